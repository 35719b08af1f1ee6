//! Multi-target delay-Doppler-angle detection with the GLRT map.

use serde::{Deserialize, Serialize};

use crate::channel::{ArrayGeometry, RadarObservation};
use crate::frame::WaveformMatrix;
use crate::radar::angle::{subtract_and_refine, AngleConfig, AngleEstimate};
use crate::radar::cfar::{cfar_detect, CfarConfig};
use crate::radar::glrt::{DdMap, GlrtProcessor, SpatialSnapshot};
use crate::radar::grid::DdGrid;
use crate::Result;

/// Detector settings shared by the GLRT and FFT processing chains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub p_fa: f64,
    /// Training cells per side `[delay, doppler]`.
    pub training: [usize; 2],
    /// Guard cells per side `[delay, doppler]`.
    pub guard: [usize; 2],
    /// Noise-cell degrees of freedom for the CFAR scale; `None` uses the
    /// number of noncoherently integrated channels.
    pub looks: Option<f64>,
    pub angle: AngleConfig,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            p_fa: 1e-4,
            training: [16, 16],
            guard: [2, 2],
            looks: None,
            angle: AngleConfig::default(),
        }
    }
}

impl DetectorConfig {
    pub(crate) fn cfar(&self, default_looks: f64) -> CfarConfig {
        CfarConfig {
            training: self.training,
            guard: self.guard,
            looks: self.looks.unwrap_or(default_looks),
        }
    }
}

/// One delay-Doppler detection and the angles resolved in its cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub tau: f64,
    pub nu: f64,
    pub delay_index: usize,
    pub doppler_index: usize,
    pub statistic: f64,
    pub threshold: f64,
    pub angles: Vec<AngleEstimate>,
}

/// Output of a detector run.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub detections: Vec<Detection>,
    pub p_fa: f64,
    pub cfar: CfarConfig,
    /// Map cells above the CFAR threshold, before peak picking.
    pub exceedances: usize,
    pub cells_tested: usize,
    pub map: DdMap,
}

impl DetectionReport {
    /// Flattened `(τ, ν, θ)` estimates, one per resolved angle.
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        self.detections
            .iter()
            .flat_map(|d| d.angles.iter().map(move |a| (d.tau, d.nu, a.theta)))
            .collect()
    }
}

/// Shared back half of both detectors: CFAR on the map, then angle
/// estimation on the snapshot of every detected cell.
pub(crate) fn detect_on_map<F>(
    map: DdMap,
    geometry: &ArrayGeometry,
    theta_axis: &[f64],
    config: &DetectorConfig,
    default_looks: f64,
    mut snapshot: F,
) -> Result<DetectionReport>
where
    F: FnMut(usize, usize) -> Result<SpatialSnapshot>,
{
    let cfar = config.cfar(default_looks);
    let outcome = cfar_detect(&map.values, config.p_fa, &cfar)?;
    let mut detections = Vec::with_capacity(outcome.detections.len());
    for d in &outcome.detections {
        let snap = snapshot(d.row, d.col)?;
        // Noise-only `‖Q‖²` has mean `σ² N_R tr(S^H S)`, the angle spectrum `σ² N_R`.
        let trace: f64 = snap.gram.diagonal().iter().map(|v| v.re).sum();
        let noise_level = (trace > 0.0).then(|| d.noise_mean / trace);
        let angles = subtract_and_refine(&snap, geometry, theta_axis, config.p_fa, noise_level, &config.angle)?;
        detections.push(Detection {
            tau: map.grid.tau_axis()[d.row],
            nu: map.grid.nu_axis()[d.col],
            delay_index: d.row,
            doppler_index: d.col,
            statistic: d.statistic,
            threshold: d.threshold,
            angles,
        });
    }
    Ok(DetectionReport {
        detections,
        p_fa: config.p_fa,
        cfar,
        exceedances: outcome.exceedances,
        cells_tested: outcome.cells_tested,
        map,
    })
}

/// GLRT map over `grid`, CA-CFAR in delay-Doppler, then per-detection angle
/// spectrum with CFAR and interference subtraction. Gains are least-squares
/// fits at the detected delay, Doppler and angle.
pub fn detect_targets(
    obs: &RadarObservation,
    s: &WaveformMatrix,
    geometry: &ArrayGeometry,
    grid: &DdGrid,
    theta_axis: &[f64],
    config: &DetectorConfig,
) -> Result<DetectionReport> {
    let proc = GlrtProcessor::new(s);
    let map = proc.map(&obs.y, grid)?;
    let looks = (geometry.n_tx * geometry.n_rx) as f64;
    let tau_axis = grid.tau_axis().to_vec();
    let nu_axis = grid.nu_axis().to_vec();
    detect_on_map(map, geometry, theta_axis, config, looks, |i, j| {
        proc.snapshot(&obs.y, tau_axis[i], nu_axis[j])
    })
}
