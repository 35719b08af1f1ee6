//! Scenario configuration, read from TOML.
//!
//! Every field has a default, so an empty file describes the desk-scale
//! ISI-dominant scene: 64 subcarriers at 480 kHz, 16 symbols, an 8×8 array
//! and five targets at 20 m/s, two of them beyond the standard maximum range.

use std::path::Path;

use anyhow::{bail, Context};
use otfs_isac::channel::ArrayGeometry;
use otfs_isac::radar::FftFilter;
use otfs_isac::{OtfsParams, SPEED_OF_LIGHT};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Master seed; per-trial streams derive from it and the trial index.
    pub seed: u64,
    pub trials: usize,
    pub frame: FrameConfig,
    pub array: ArrayConfig,
    pub radar: RadarConfig,
    pub detector: DetectorSettings,
    pub fft: FftSettings,
    pub association: AssociationConfig,
    pub design: DesignConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: 100,
            frame: FrameConfig::default(),
            array: ArrayConfig::default(),
            radar: RadarConfig::default(),
            detector: DetectorSettings::default(),
            fft: FftSettings::default(),
            association: AssociationConfig::default(),
            design: DesignConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    /// Subcarriers.
    pub n: usize,
    /// OTFS symbols.
    pub m: usize,
    /// Subcarrier spacing [Hz].
    pub delta_f: f64,
    /// Cyclic prefix [s].
    pub t_cp: f64,
    /// Carrier frequency [Hz].
    pub fc: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    pub qam_order: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            n: 64,
            m: 16,
            delta_f: 480e3,
            t_cp: 12.5e-6,
            fc: 28e9,
            n_tx: 8,
            n_rx: 8,
            qam_order: 64,
        }
    }
}

impl FrameConfig {
    pub fn params(&self) -> anyhow::Result<OtfsParams> {
        OtfsParams::new(self.n, self.m, self.delta_f, self.t_cp, self.fc, self.n_tx, self.n_rx)
            .context("invalid frame parameters")
    }
}

/// Element spacings in wavelengths; defaults are λ/2 at TX and `N_T λ/2` at RX.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    pub tx_spacing: Option<f64>,
    pub rx_spacing: Option<f64>,
}

impl ArrayConfig {
    pub fn geometry(&self, params: &OtfsParams) -> anyhow::Result<ArrayGeometry> {
        let mut g = ArrayGeometry::for_params(params);
        if let Some(s) = self.tx_spacing {
            g.tx_spacing = s;
        }
        if let Some(s) = self.rx_spacing {
            g.rx_spacing = s;
        }
        g.validate().context("invalid array geometry")?;
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub angle_deg: f64,
    /// `|α|²/σ²` [dB].
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarConfig {
    pub noise_variance: f64,
    pub targets: Vec<TargetSpec>,
    /// Index of the target whose SNR is swept and whose Pd/RMSE is reported.
    pub reference_target: usize,
    /// Reference-target SNR points [dB]; empty means "use the configured SNR".
    pub snr_sweep_db: Vec<f64>,
}

impl Default for RadarConfig {
    fn default() -> Self {
        let t = |range_m, angle_deg, snr_db| TargetSpec {
            range_m,
            velocity_mps: 20.0,
            angle_deg,
            snr_db,
        };
        Self {
            noise_variance: 1.0,
            targets: vec![
                t(100.0, 20.0, 20.0),
                t(200.0, -10.0, 15.0),
                t(200.0, -5.0, 5.0),
                t(412.5, 20.0, 25.0),
                t(825.0, -10.0, 10.0),
            ],
            reference_target: 2,
            snr_sweep_db: vec![-5.0, -4.0, -3.0, -2.0, -1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSettings {
    pub p_fa: f64,
    /// CFAR training cells per side, [delay, Doppler].
    pub training: [usize; 2],
    /// CFAR guard cells per side, [delay, Doppler].
    pub guard: [usize; 2],
    pub os_delay: usize,
    pub os_doppler: usize,
    /// Largest searched range [m]; defaults to the CP-limited range `c T_cp / 2`.
    pub max_range_m: Option<f64>,
    /// Doppler search half-span [Hz]; defaults to `1/(2T)`.
    pub doppler_half_span_hz: Option<f64>,
    pub angle_step_deg: f64,
    pub angle_training: usize,
    /// Degrees of freedom of the CFAR noise model.
    pub looks: Looks,
}

/// CFAR noise model: the number of Gamma "looks" per map cell.
///
/// Thermal noise gives one look per TX/RX channel. When a few strong
/// targets dominate the floor, their data-dependent sidelobes are coherent
/// across the RX array and only the TX dimension averages, so the floor
/// behaves like `N_T` looks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Looks {
    Model(LooksModel),
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LooksModel {
    /// `N_T N_R`.
    Channels,
    /// `N_T`.
    Transmitters,
}

impl Looks {
    pub fn resolve(&self, geometry: &ArrayGeometry) -> f64 {
        match self {
            Looks::Model(LooksModel::Channels) => (geometry.n_tx * geometry.n_rx) as f64,
            Looks::Model(LooksModel::Transmitters) => geometry.n_tx as f64,
            Looks::Value(v) => *v,
        }
    }
}

impl Default for DetectorSettings {
    fn default() -> Self {
        Self {
            p_fa: 1e-3,
            training: [16, 8],
            guard: [2, 2],
            os_delay: 2,
            os_doppler: 2,
            max_range_m: None,
            doppler_half_span_hz: None,
            angle_step_deg: 0.5,
            angle_training: 16,
            looks: Looks::Model(LooksModel::Transmitters),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FftSettings {
    pub os_delay: usize,
    pub os_doppler: usize,
    pub filter: FilterKind,
}

impl Default for FftSettings {
    fn default() -> Self {
        Self {
            os_delay: 2,
            os_doppler: 2,
            filter: FilterKind::Matched,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Matched,
    Reciprocal,
}

impl From<FilterKind> for FftFilter {
    fn from(k: FilterKind) -> Self {
        match k {
            FilterKind::Matched => FftFilter::Matched,
            FilterKind::Reciprocal => FftFilter::Reciprocal,
        }
    }
}

/// Detection-to-truth gates, in resolution cells.
///
/// Range resolution is `c/(2NΔf)`, velocity resolution `λ/(2MT)` and
/// angular resolution `2/(N_T N_R)` in sine space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssociationConfig {
    pub range_cells: f64,
    pub velocity_cells: f64,
    pub angle_cells: f64,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self {
            range_cells: 0.5,
            velocity_cells: 0.5,
            angle_cells: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommPathSpec {
    pub gain_re: f64,
    pub gain_im: f64,
    pub delay_s: f64,
    pub doppler_hz: f64,
    pub angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    pub frame: FrameConfig,
    pub noise_variance: f64,
    pub rho_grid: Vec<f64>,
    /// LOS-to-multipath power ratios [dB].
    pub lmr_db: Vec<f64>,
    /// `Σ|α̃_k|²/σ²` [dB].
    pub total_snr_db: f64,
    /// Number of comm paths, LOS included.
    pub paths: usize,
    pub comm_angle_deg: f64,
    /// Path delays are drawn uniformly from `[0, max_delay_s]`.
    pub max_delay_s: f64,
    /// Path Dopplers are drawn uniformly from `[-max_doppler_hz, max_doppler_hz]`.
    pub max_doppler_hz: f64,
    /// Random channel draws per LMR.
    pub draws: usize,
    /// Explicit comm channel; overrides the random draw when nonempty.
    pub explicit_paths: Vec<CommPathSpec>,
    pub beampattern_step_deg: f64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            frame: FrameConfig {
                n: 32,
                m: 16,
                delta_f: 120e3,
                t_cp: 2.5e-6,
                fc: 28e9,
                n_tx: 8,
                n_rx: 8,
                qam_order: 64,
            },
            noise_variance: 1.0,
            rho_grid: (0..=10).map(|k| k as f64 / 10.0).collect(),
            lmr_db: vec![-10.0, 0.0, 10.0],
            total_snr_db: 25.0,
            paths: 11,
            comm_angle_deg: -30.0,
            max_delay_s: 2.0e-6,
            max_doppler_hz: 2.8e3,
            draws: 20,
            explicit_paths: Vec::new(),
            beampattern_step_deg: 0.1,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text).context("could not parse scenario config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml_string(&self) -> anyhow::Result<String> {
        toml::to_string(self).context("could not serialize scenario config")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let params = self.frame.params()?;
        self.array.geometry(&params)?;
        self.design.frame.params().context("design frame")?;
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if !(self.radar.noise_variance > 0.0) || !(self.design.noise_variance > 0.0) {
            bail!("noise variance must be positive");
        }
        if !self.radar.targets.is_empty() && self.radar.reference_target >= self.radar.targets.len() {
            bail!(
                "reference target {} out of range for {} targets",
                self.radar.reference_target,
                self.radar.targets.len()
            );
        }
        for (i, t) in self.radar.targets.iter().enumerate() {
            if !(t.range_m >= 0.0) || !t.velocity_mps.is_finite() || !t.angle_deg.is_finite() || !t.snr_db.is_finite() {
                bail!("target {i} has an invalid range, velocity, angle or SNR");
            }
            if t.angle_deg.abs() >= 90.0 {
                bail!("target {i} angle must lie in (-90, 90) degrees");
            }
        }
        let max_range = SPEED_OF_LIGHT * params.t_cp / 2.0;
        if let Some(t) = self.radar.targets.iter().find(|t| t.range_m > max_range) {
            bail!("target at {} m is beyond the CP-limited range {max_range} m", t.range_m);
        }
        if !(self.detector.p_fa > 0.0 && self.detector.p_fa < 1.0) {
            bail!("p_fa must lie in (0, 1)");
        }
        if self.detector.os_delay == 0 || self.detector.os_doppler == 0 || self.fft.os_delay == 0 || self.fft.os_doppler == 0 {
            bail!("oversampling factors must be at least 1");
        }
        if let Looks::Value(v) = self.detector.looks {
            if !(v > 0.0 && v.is_finite()) {
                bail!("CFAR looks must be positive");
            }
        }
        if !(self.detector.angle_step_deg > 0.0) || !(self.design.beampattern_step_deg > 0.0) {
            bail!("angle steps must be positive");
        }
        let a = &self.association;
        if !(a.range_cells > 0.0 && a.velocity_cells > 0.0 && a.angle_cells > 0.0) {
            bail!("association gates must be positive");
        }
        let d = &self.design;
        if d.rho_grid.iter().any(|r| !(0.0..=1.0).contains(r)) {
            bail!("rho grid values must lie in [0, 1]");
        }
        if d.explicit_paths.is_empty() {
            if d.paths == 0 || d.draws == 0 {
                bail!("design needs at least one path and one draw");
            }
            if d.max_delay_s < 0.0 || d.max_delay_s > d.frame.t_cp || d.max_doppler_hz < 0.0 {
                bail!("design path delays must lie within [0, T_cp] and the Doppler span must be nonnegative");
            }
        }
        Ok(())
    }
}
