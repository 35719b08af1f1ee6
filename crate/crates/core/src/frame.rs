//! OTFS transmit chain: DD symbol grids, per-antenna DD windows, ISFFT,
//! Heisenberg transform and the sampled waveform matrix.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::transforms::{transform_columns, transform_rows};
use crate::{CMatrix, CVector, OtfsError, OtfsParams, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// An N×M grid of delay-Doppler data symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct DdFrame {
    x_dd: CMatrix,
}

impl DdFrame {
    pub fn new(x_dd: CMatrix) -> Self {
        Self { x_dd }
    }

    /// Random square-QAM frame with unit average symbol energy.
    ///
    /// `order` must be an even power of two (4, 16, 64, ...).
    pub fn random_qam<R: Rng + ?Sized>(n: usize, m: usize, order: usize, rng: &mut R) -> Result<Self> {
        let side = (order as f64).sqrt().round() as usize;
        if side < 2 || side * side != order || !side.is_power_of_two() {
            return Err(OtfsError::InvalidArgument(format!(
                "QAM order must be a square power of two >= 4, got {order}"
            )));
        }
        // Mean energy of a side×side grid with levels ±1, ±3, ... is 2(order-1)/3.
        let scale = 1.0 / (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
        let level = |k: usize| (2.0 * k as f64 - (side as f64 - 1.0)) * scale;
        let x_dd = CMatrix::from_fn(n, m, |_, _| {
            Complex64::new(level(rng.random_range(0..side)), level(rng.random_range(0..side)))
        });
        Ok(Self { x_dd })
    }

    pub fn symbols(&self) -> &CMatrix {
        &self.x_dd
    }

    pub fn n(&self) -> usize {
        self.x_dd.nrows()
    }

    pub fn m(&self) -> usize {
        self.x_dd.ncols()
    }
}

/// How the per-antenna DD windows were produced.
#[derive(Debug, Clone, PartialEq)]
pub enum WindowMode {
    /// Disjoint Boolean masks covering every DD bin exactly once.
    Search,
    /// Rank-one windows `vec(W_i) = beta_i * p`.
    Track { beta: CVector, p: Vec<f64> },
}

/// One DD window per transmit antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    mode: WindowMode,
    windows: Vec<CMatrix>,
}

impl WindowSet {
    /// Balanced random partition of the NM bins over `n_tx` antennas.
    ///
    /// Each antenna receives either `floor(NM/N_T)` or `ceil(NM/N_T)` bins.
    pub fn random_search<R: Rng + ?Sized>(n: usize, m: usize, n_tx: usize, rng: &mut R) -> Result<Self> {
        if n_tx == 0 {
            return Err(OtfsError::InvalidArgument("need at least one antenna".into()));
        }
        let mut bins: Vec<usize> = (0..n * m).collect();
        bins.shuffle(rng);
        let mut windows = vec![CMatrix::zeros(n, m); n_tx];
        for (k, &bin) in bins.iter().enumerate() {
            windows[k % n_tx].as_mut_slice()[bin] = Complex64::new(1.0, 0.0);
        }
        Ok(Self {
            mode: WindowMode::Search,
            windows,
        })
    }

    /// Search-mode windows from explicit Boolean masks.
    pub fn from_masks(masks: &[Vec<bool>], n: usize, m: usize) -> Result<Self> {
        let windows = masks
            .iter()
            .map(|mask| {
                if mask.len() != n * m {
                    return Err(OtfsError::DimensionMismatch(format!(
                        "mask has {} entries, expected {}",
                        mask.len(),
                        n * m
                    )));
                }
                Ok(CMatrix::from_iterator(
                    n,
                    m,
                    mask.iter().map(|&b| if b { Complex64::new(1.0, 0.0) } else { ZERO }),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let set = Self {
            mode: WindowMode::Search,
            windows,
        };
        set.validate()?;
        Ok(set)
    }

    /// Track-mode windows `vec(W_i) = beta_i * p`.
    pub fn track(beta: CVector, p: Vec<f64>, n: usize, m: usize) -> Result<Self> {
        if p.len() != n * m {
            return Err(OtfsError::DimensionMismatch(format!(
                "amplitude vector has {} entries, expected {}",
                p.len(),
                n * m
            )));
        }
        if p.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(OtfsError::InvalidArgument(
                "DD amplitudes must be finite and nonnegative".into(),
            ));
        }
        let windows = beta
            .iter()
            .map(|&b| CMatrix::from_iterator(n, m, p.iter().map(|&v| b * v)))
            .collect();
        Ok(Self {
            mode: WindowMode::Track { beta, p },
            windows,
        })
    }

    /// All-ones window for every antenna (used for single-antenna plain OTFS).
    pub fn all_ones(n: usize, m: usize, n_tx: usize) -> Self {
        let beta = CVector::from_element(n_tx, Complex64::new(1.0, 0.0));
        Self::track(beta, vec![1.0; n * m], n, m).expect("valid by construction")
    }

    /// Check the mode invariants.
    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.windows.first() else {
            return Err(OtfsError::InvalidArgument("empty window set".into()));
        };
        let shape = first.shape();
        if self.windows.iter().any(|w| w.shape() != shape) {
            return Err(OtfsError::DimensionMismatch("windows differ in shape".into()));
        }
        match &self.mode {
            WindowMode::Search => {
                let len = shape.0 * shape.1;
                for bin in 0..len {
                    let mut owners = 0;
                    for w in &self.windows {
                        let v = w.as_slice()[bin];
                        if v == Complex64::new(1.0, 0.0) {
                            owners += 1;
                        } else if v != ZERO {
                            return Err(OtfsError::InvalidArgument(
                                "search-mode windows must be Boolean".into(),
                            ));
                        }
                    }
                    if owners != 1 {
                        return Err(OtfsError::InvalidArgument(format!(
                            "DD bin {bin} is used by {owners} antennas; search masks must partition the grid"
                        )));
                    }
                }
            }
            WindowMode::Track { beta, p } => {
                if beta.len() != self.windows.len() {
                    return Err(OtfsError::DimensionMismatch("beta length != antenna count".into()));
                }
                for (i, w) in self.windows.iter().enumerate() {
                    for (x, &pv) in w.iter().zip(p) {
                        if (x - beta[i] * pv).norm() > 1e-12 * (1.0 + x.norm()) {
                            return Err(OtfsError::InvalidArgument(
                                "track-mode window is not beta_i * p".into(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn mode(&self) -> &WindowMode {
        &self.mode
    }

    pub fn windows(&self) -> &[CMatrix] {
        &self.windows
    }

    pub fn n_tx(&self) -> usize {
        self.windows.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.windows[0].shape()
    }

    /// Σ_i ‖W_i‖_F².
    pub fn total_power(&self) -> f64 {
        self.windows.iter().map(|w| w.norm_squared()).sum()
    }

    /// `W a` where `W = [vec(W_1), ..., vec(W_{N_T})]`.
    pub fn combine(&self, weights: &CVector) -> Result<CVector> {
        if weights.len() != self.n_tx() {
            return Err(OtfsError::DimensionMismatch(format!(
                "{} weights for {} antennas",
                weights.len(),
                self.n_tx()
            )));
        }
        let (n, m) = self.shape();
        let mut out = CVector::zeros(n * m);
        for (w, &a) in self.windows.iter().zip(weights.iter()) {
            out.iter_mut().zip(w.iter()).for_each(|(o, &x)| *o += x * a);
        }
        Ok(out)
    }
}

/// Windowed copies `X^DD ⊙ W_i`, one per antenna.
pub fn apply_windows(frame: &DdFrame, windows: &WindowSet) -> Result<Vec<CMatrix>> {
    let shape = frame.symbols().shape();
    if windows.shape() != shape {
        return Err(OtfsError::DimensionMismatch(format!(
            "frame is {:?} but windows are {:?}",
            shape,
            windows.shape()
        )));
    }
    Ok(windows
        .windows()
        .iter()
        .map(|w| frame.symbols().component_mul(w))
        .collect())
}

/// Inverse symplectic finite Fourier transform `F_N X F_M^H`.
pub fn isfft(x: &CMatrix) -> CMatrix {
    let mut out = x.clone();
    transform_columns(&mut out, false);
    transform_rows(&mut out, true);
    out
}

/// Symplectic finite Fourier transform `F_N^H X F_M`.
pub fn sfft(x: &CMatrix) -> CMatrix {
    let mut out = x.clone();
    transform_columns(&mut out, true);
    transform_rows(&mut out, false);
    out
}

/// Diagonal pulse-shaping matrix, stored as its N diagonal entries.
///
/// In continuous time the pulse holds value `g[l]` on `[lT/N, (l+1)T/N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseShape {
    gains: Vec<f64>,
}

impl PulseShape {
    pub fn rectangular(n: usize) -> Self {
        Self { gains: vec![1.0; n] }
    }

    pub fn new(gains: Vec<f64>) -> Result<Self> {
        if gains.iter().any(|g| !g.is_finite()) {
            return Err(OtfsError::InvalidArgument("pulse gains must be finite".into()));
        }
        Ok(Self { gains })
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.gains.iter().all(|&g| g == 1.0)
    }
}

/// Critically sampled Heisenberg transform `vec(G_tx F_N^H X_ft)`.
pub fn heisenberg_time_signal(x_ft: &CMatrix, pulse: &PulseShape) -> Result<Vec<Complex64>> {
    if pulse.len() != x_ft.nrows() {
        return Err(OtfsError::DimensionMismatch(format!(
            "pulse has {} taps, frame has {} subcarriers",
            pulse.len(),
            x_ft.nrows()
        )));
    }
    let mut t = x_ft.clone();
    transform_columns(&mut t, true);
    for (r, &g) in pulse.gains().iter().enumerate() {
        t.row_mut(r).iter_mut().for_each(|v| *v *= g);
    }
    Ok(t.as_slice().to_vec())
}

/// Sampled multi-antenna waveform `S = [s_1, ..., s_{N_T}]` plus what is needed
/// to evaluate the continuous-time signals it was sampled from.
#[derive(Debug, Clone)]
pub struct WaveformMatrix {
    params: OtfsParams,
    s: CMatrix,
    pulse: PulseShape,
    /// Time-frequency grids `F_N X_i^DD F_M^H`, one per antenna.
    tf_grids: Vec<CMatrix>,
}

/// Build `S` from a frame, its windows and a pulse shape.
pub fn build_waveform_matrix(
    params: &OtfsParams,
    frame: &DdFrame,
    windows: &WindowSet,
    pulse: &PulseShape,
) -> Result<WaveformMatrix> {
    if frame.n() != params.n || frame.m() != params.m {
        return Err(OtfsError::DimensionMismatch(format!(
            "frame is {}x{}, parameters say {}x{}",
            frame.n(),
            frame.m(),
            params.n,
            params.m
        )));
    }
    if windows.n_tx() != params.n_tx {
        return Err(OtfsError::DimensionMismatch(format!(
            "{} windows for {} TX antennas",
            windows.n_tx(),
            params.n_tx
        )));
    }
    let windowed = apply_windows(frame, windows)?;
    let tf_grids: Vec<CMatrix> = windowed.iter().map(isfft).collect();
    let mut s = CMatrix::zeros(params.nm(), params.n_tx);
    for (i, grid) in tf_grids.iter().enumerate() {
        let col = heisenberg_time_signal(grid, pulse)?;
        s.column_mut(i).copy_from_slice(&col);
    }
    Ok(WaveformMatrix {
        params: *params,
        s,
        pulse: pulse.clone(),
        tf_grids,
    })
}

impl WaveformMatrix {
    pub fn params(&self) -> &OtfsParams {
        &self.params
    }

    /// The NM×N_T sample matrix.
    pub fn samples(&self) -> &CMatrix {
        &self.s
    }

    pub fn pulse(&self) -> &PulseShape {
        &self.pulse
    }

    pub fn n_tx(&self) -> usize {
        self.s.ncols()
    }

    /// Time-frequency grid `F_N X_i^DD F_M^H` of antenna `i`.
    pub fn tf_grid(&self, antenna: usize) -> &CMatrix {
        &self.tf_grids[antenna]
    }

    /// `S^H S`.
    pub fn gram(&self) -> CMatrix {
        self.s.adjoint() * &self.s
    }

    /// Continuous-time `s_i` at a time given in sample units (`t N / T`).
    ///
    /// Zero outside one frame `[0, NM)`. Arguments within 1e-9 of an integer
    /// are snapped so that sample instants are evaluated exactly.
    pub fn continuous_at_sample(&self, antenna: usize, u: f64) -> Complex64 {
        let (n, m) = (self.params.n, self.params.m);
        let nearest = u.round();
        let u = if (u - nearest).abs() < 1e-9 { nearest } else { u };
        if !(0.0..(n * m) as f64).contains(&u) {
            return ZERO;
        }
        let sym = ((u / n as f64).floor() as usize).min(m - 1);
        let within = u - (sym * n) as f64;
        let tap = (within.floor() as usize).min(n - 1);
        let grid = &self.tf_grids[antenna];
        let mut acc = ZERO;
        for k in 0..n {
            acc += grid[(k, sym)] * Complex64::from_polar(1.0, TAU * k as f64 * within / n as f64);
        }
        acc * self.pulse.gains()[tap] / (n as f64).sqrt()
    }

    /// Continuous-time `s_i(t)` for `t` in seconds; zero outside `[0, MT)`.
    pub fn continuous(&self, antenna: usize, t: f64) -> Complex64 {
        self.continuous_at_sample(antenna, t / self.params.sample_period())
    }

    /// CP-extended signal: `s_i(t + MT)` on `[-T_cp, 0)`, `s_i(t)` on
    /// `[0, MT)`, zero elsewhere. Time in sample units.
    pub fn continuous_cp_at_sample(&self, antenna: usize, u: f64) -> Complex64 {
        let frame = self.params.nm() as f64;
        let cp = self.params.t_cp / self.params.sample_period();
        let nearest = u.round();
        let u = if (u - nearest).abs() < 1e-9 { nearest } else { u };
        if u < -cp - 1e-9 || u >= frame {
            return ZERO;
        }
        self.continuous_at_sample(antenna, u.rem_euclid(frame))
    }

    /// CP-extended signal with `t` in seconds.
    pub fn continuous_cp(&self, antenna: usize, t: f64) -> Complex64 {
        self.continuous_cp_at_sample(antenna, t / self.params.sample_period())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::transforms::dft_matrix;
    use proptest::prelude::*;

    fn params(n: usize, m: usize, n_tx: usize) -> OtfsParams {
        OtfsParams::new(n, m, 15e3, 1.0 / 15e3, 4e9, n_tx, 2).unwrap()
    }

    #[test]
    fn identity_window_is_a_no_op() {
        let mut rng = stream_rng(1, 0);
        let frame = DdFrame::random_qam(4, 3, 64, &mut rng).unwrap();
        let w = WindowSet::all_ones(4, 3, 1);
        assert_eq!(apply_windows(&frame, &w).unwrap()[0], *frame.symbols());
    }

    #[test]
    fn checkerboard_masks_are_disjoint() {
        let a = vec![true, false, false, true];
        let b: Vec<bool> = a.iter().map(|x| !x).collect();
        let w = WindowSet::from_masks(&[a, b], 2, 2).unwrap();
        let frame = DdFrame::new(CMatrix::from_element(2, 2, Complex64::new(1.0, 1.0)));
        let out = apply_windows(&frame, &w).unwrap();
        for o in &out {
            assert_eq!(o.iter().filter(|v| v.norm() > 0.0).count(), 2);
        }
        assert_eq!(out[0].component_mul(&out[1]).norm(), 0.0);
    }

    #[test]
    fn overlapping_masks_rejected() {
        let a = vec![true, true, false, false];
        let b = vec![true, false, true, true];
        assert!(WindowSet::from_masks(&[a, b], 2, 2).is_err());
    }

    #[test]
    fn random_masks_partition_frame() {
        let mut rng = stream_rng(2, 0);
        let frame = DdFrame::random_qam(4, 4, 64, &mut rng).unwrap();
        let w = WindowSet::random_search(4, 4, 3, &mut rng).unwrap();
        w.validate().unwrap();
        let sum = apply_windows(&frame, &w)
            .unwrap()
            .into_iter()
            .fold(CMatrix::zeros(4, 4), |a, b| a + b);
        assert!((sum - frame.symbols()).norm() < 1e-15);
        let counts: Vec<usize> = w
            .windows()
            .iter()
            .map(|x| x.iter().filter(|v| v.norm() > 0.0).count())
            .collect();
        assert!(counts.iter().all(|&c| c == 5 || c == 6), "{counts:?}");
    }

    #[test]
    fn qam_has_unit_average_power() {
        let mut rng = stream_rng(3, 0);
        let frame = DdFrame::random_qam(64, 64, 64, &mut rng).unwrap();
        let p = frame.symbols().norm_squared() / 4096.0;
        assert!((p - 1.0).abs() < 0.05, "{p}");
        assert!(DdFrame::random_qam(2, 2, 32, &mut rng).is_err());
    }

    #[test]
    fn isfft_of_zero_and_two_point_identity() {
        assert_eq!(isfft(&CMatrix::zeros(3, 2)), CMatrix::zeros(3, 2));
        // Hand-expanded: F_2 I F_2^H = I for the unitary 2-point DFT.
        let out = isfft(&CMatrix::identity(2, 2));
        assert!((out - CMatrix::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn isfft_matches_dense_product() {
        let mut rng = stream_rng(4, 0);
        let x = DdFrame::random_qam(4, 3, 16, &mut rng).unwrap();
        let dense = dft_matrix(4) * x.symbols() * dft_matrix(3).adjoint();
        assert!((isfft(x.symbols()) - dense).norm() < 1e-12);
    }

    #[test]
    fn heisenberg_dc_subcarrier() {
        let mut x = CMatrix::zeros(4, 2);
        x[(0, 0)] = Complex64::new(1.0, 0.0);
        let s = heisenberg_time_signal(&x, &PulseShape::rectangular(4)).unwrap();
        for v in &s[..4] {
            assert!((v - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        }
        assert!(s[4..].iter().all(|v| v.norm() < 1e-15));
        let zero = heisenberg_time_signal(&x, &PulseShape::new(vec![0.0; 4]).unwrap()).unwrap();
        assert!(zero.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn both_factorizations_of_time_signal_agree() {
        let mut rng = stream_rng(5, 0);
        let x = DdFrame::random_qam(8, 4, 64, &mut rng).unwrap();
        let s = heisenberg_time_signal(&isfft(x.symbols()), &PulseShape::rectangular(8)).unwrap();
        let direct = x.symbols() * dft_matrix(4).adjoint();
        for (a, b) in s.iter().zip(direct.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn track_mode_single_antenna_beam() {
        let mut rng = stream_rng(6, 0);
        let p = params(4, 2, 3);
        let frame = DdFrame::random_qam(4, 2, 64, &mut rng).unwrap();
        let mut beta = CVector::zeros(3);
        beta[0] = Complex64::new(1.0, 0.0);
        let w = WindowSet::track(beta, vec![1.0; 8], 4, 2).unwrap();
        w.validate().unwrap();
        let s = build_waveform_matrix(&p, &frame, &w, &PulseShape::rectangular(4)).unwrap();
        assert!(s.samples().column(0).norm() > 0.0);
        assert_eq!(s.samples().column(1).norm(), 0.0);
        assert_eq!(s.samples().column(2).norm(), 0.0);
    }

    #[test]
    fn continuous_signal_matches_samples_and_cp() {
        let mut rng = stream_rng(7, 0);
        let mut p = params(4, 3, 2);
        p.t_cp = 0.6 / p.delta_f;
        let frame = DdFrame::random_qam(4, 3, 64, &mut rng).unwrap();
        let w = WindowSet::random_search(4, 3, 2, &mut rng).unwrap();
        let s = build_waveform_matrix(&p, &frame, &w, &PulseShape::rectangular(4)).unwrap();
        let ts = p.sample_period();
        for i in 0..2 {
            for l in 0..12 {
                let v = s.continuous_cp(i, l as f64 * ts);
                assert!((v - s.samples()[(l, i)]).norm() < 1e-12);
            }
            // CP branch: s_cp(t) = s(t + MT) on [-T_cp, 0).
            for l in 1..=2 {
                let t = -(l as f64) * ts;
                let expect = s.continuous(i, t + p.frame_duration());
                assert!((s.continuous_cp(i, t) - expect).norm() < 1e-12);
            }
            assert_eq!(s.continuous_cp(i, -0.7 / p.delta_f), ZERO);
        }
    }

    proptest! {
        #[test]
        fn isfft_is_unitary(seed in any::<u64>(), n in 1usize..9, m in 1usize..9) {
            let mut rng = stream_rng(seed, 0);
            let x = DdFrame::random_qam(n, m, 16, &mut rng).unwrap();
            let y = isfft(x.symbols());
            let rel = (y.norm() - x.symbols().norm()).abs() / x.symbols().norm();
            prop_assert!(rel < 1e-12);
            let back = sfft(&y);
            prop_assert!((back - x.symbols()).norm() <= 1e-12 * x.symbols().norm());
        }
    }
}
