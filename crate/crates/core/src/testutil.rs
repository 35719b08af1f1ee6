//! Shared fixtures for unit tests.

use num_complex::Complex64;

use crate::channel::{synth_radar_compact, ArrayGeometry, PathTuple, RadarObservation, RadarScene};
use crate::frame::{build_waveform_matrix, DdFrame, PulseShape, WaveformMatrix, WindowSet};
use crate::rng::stream_rng;
use crate::OtfsParams;

#[allow(dead_code)]
pub struct Fixture {
    pub params: OtfsParams,
    pub frame: DdFrame,
    pub windows: WindowSet,
    pub s: WaveformMatrix,
    pub geometry: ArrayGeometry,
}

/// Search-mode fixture with `T_cp = cp_symbols / Δf`.
pub fn fixture(n: usize, m: usize, n_tx: usize, n_rx: usize, cp_symbols: f64, seed: u64) -> Fixture {
    let delta_f = 1.0e5;
    let params = OtfsParams::new(n, m, delta_f, cp_symbols / delta_f, 2.8e10, n_tx, n_rx).unwrap();
    let mut rng = stream_rng(seed, 0);
    let frame = DdFrame::random_qam(n, m, 64, &mut rng).unwrap();
    let windows = WindowSet::random_search(n, m, n_tx, &mut rng).unwrap();
    let s = build_waveform_matrix(&params, &frame, &windows, &PulseShape::rectangular(n)).unwrap();
    let geometry = ArrayGeometry::for_params(&params);
    Fixture {
        params,
        frame,
        windows,
        s,
        geometry,
    }
}

impl Fixture {
    pub fn observe(&self, targets: &[(f64, f64, f64, f64)], sigma2: f64, seed: u64) -> RadarObservation {
        let scene = RadarScene {
            targets: targets
                .iter()
                .map(|&(amp, tau, nu, theta)| PathTuple::new(Complex64::new(amp, 0.0), tau, nu, theta))
                .collect(),
        };
        let mut rng = stream_rng(seed, 1);
        synth_radar_compact(&self.s, &scene, &self.geometry, sigma2, &mut rng).unwrap()
    }
}
