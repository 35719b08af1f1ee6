//! Oracle and invariant checks behind `otfs-sim validate` and the acceptance suite.
//!
//! Each check returns a [`CheckResult`] instead of panicking, so a run always
//! reports every criterion. An error inside a check counts as a failure and
//! is reported in the detail line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use otfs_isac::channel::{
    build_hdd, synth_radar_compact, synth_radar_oracle, ArrayGeometry, CommChannel, PathTuple, RadarScene,
};
use otfs_isac::comm_rx::lmmse_covariance;
use otfs_isac::designer::{approx_rate_diagonal, build_g, lmmse_cov_from_pg, waterfill};
use otfs_isac::frame::{apply_windows, build_waveform_matrix, DdFrame, PulseShape, WaveformMatrix, WindowSet};
use otfs_isac::radar::{
    angle_axis, cfar_detect, fft_benchmark, detect_targets, AngleConfig, CfarConfig, DetectorConfig,
    FftBenchmarkConfig, FftFilter, GlrtProcessor, DdGrid, GridSpec,
};
use otfs_isac::rng::{complex_gaussian, stream_rng};
use otfs_isac::{CMatrix, CVector, OtfsParams};
use rand::Rng;

use crate::config::{Looks, LooksModel, ScenarioConfig};
use crate::export::{write_sensing, write_tradeoff};
use crate::sensing::run_sensing_experiment;
use crate::tradeoff::run_tradeoff_experiment;
use crate::with_threads;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    /// Wall-clock time of the check [s].
    pub seconds: f64,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {:>2} {}: {} [{:.1} s]", self.id, self.name, self.detail, self.seconds)
    }
}

fn finish(id: u8, name: &'static str, start: Instant, outcome: anyhow::Result<(bool, String)>) -> CheckResult {
    let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e:#}")));
    CheckResult {
        id,
        name,
        pass,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Trials used by the Monte Carlo checks.
pub fn monte_carlo_trials(full: bool) -> usize {
    if full {
        100
    } else {
        20
    }
}

/// Run every check in order. `full` selects the 100-trial Monte Carlo protocol.
pub fn run_checks(full: bool) -> Vec<CheckResult> {
    run_checks_with(full, |_| {})
}

/// Like [`run_checks`], calling `report` as soon as each check finishes.
pub fn run_checks_with(full: bool, mut report: impl FnMut(&CheckResult)) -> Vec<CheckResult> {
    let trials = monte_carlo_trials(full);
    let mut out: Vec<CheckResult> = Vec::new();
    let mut push = |batch: Vec<CheckResult>| {
        for r in batch {
            report(&r);
            out.push(r);
        }
    };
    push(vec![check_model_equivalence()]);
    push(vec![check_search_orthogonality()]);
    push(vec![check_virtual_array()]);
    push(vec![check_ambiguity_limits()]);
    push(vec![check_extended_ambiguity()]);
    push(check_sensing(trials));
    push(vec![check_cfar_calibration()]);
    push(vec![check_lmmse_routes()]);
    push(vec![check_waterfilling()]);
    push(check_tradeoff());
    push(vec![check_determinism()]);
    out
}

fn random_waveform<R: Rng>(p: &OtfsParams, rng: &mut R) -> anyhow::Result<(DdFrame, WindowSet, WaveformMatrix)> {
    let frame = DdFrame::random_qam(p.n, p.m, 64, rng)?;
    let windows = WindowSet::random_search(p.n, p.m, p.n_tx, rng)?;
    let s = build_waveform_matrix(p, &frame, &windows, &PulseShape::rectangular(p.n))?;
    Ok((frame, windows, s))
}

fn relative_error(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Compact model against the sampled continuous-time echo, off-grid scenes.
pub fn check_model_equivalence() -> CheckResult {
    let start = Instant::now();
    let run = || -> anyhow::Result<(bool, String)> {
        let mut rng = stream_rng(0xC1, 0);
        let (mut worst, mut worst_on_grid) = (0.0_f64, 0.0_f64);
        for _ in 0..50 {
            let n = rng.random_range(2..=8);
            let m = rng.random_range(2..=8);
            let n_tx = rng.random_range(1..=4);
            let n_rx = rng.random_range(1..=4);
            let cp_samples = rng.random_range(1..=n);
            let delta_f = 1.0e5;
            let p = OtfsParams::new(n, m, delta_f, cp_samples as f64 / (n as f64 * delta_f), 2.8e10, n_tx, n_rx)?;
            let geometry = ArrayGeometry::for_params(&p);
            let (_, _, s) = random_waveform(&p, &mut rng)?;
            let k = rng.random_range(1..=3);
            let mut targets = Vec::with_capacity(k);
            for _ in 0..k {
                targets.push(PathTuple::new(
                    complex_gaussian(&mut rng, 1.0),
                    uniform(&mut rng, 0.0, p.t_cp),
                    uniform(&mut rng, -0.5, 0.5) * n as f64 / p.symbol_duration(),
                    uniform(&mut rng, -1.4, 1.4),
                ));
            }
            let scene = RadarScene { targets };
            let compact = synth_radar_compact(&s, &scene, &geometry, 0.0, &mut stream_rng(0, 0))?;
            let oracle = synth_radar_oracle(&s, &scene, &geometry, 0.0, &mut stream_rng(0, 0))?;
            worst = worst.max(relative_error(&compact.y, &oracle.y));

            // Same scene with delays rounded to the sample grid.
            let ts = p.sample_period();
            let on_grid = RadarScene {
                targets: scene
                    .targets
                    .iter()
                    .map(|t| PathTuple::new(t.alpha, (t.tau / ts).floor() * ts, t.nu, t.theta))
                    .collect(),
            };
            let compact = synth_radar_compact(&s, &on_grid, &geometry, 0.0, &mut stream_rng(0, 0))?;
            let oracle = synth_radar_oracle(&s, &on_grid, &geometry, 0.0, &mut stream_rng(0, 0))?;
            worst_on_grid = worst_on_grid.max(relative_error(&compact.y, &oracle.y));
        }
        Ok((
            worst <= 1e-9,
            format!("max relative error {worst:.3e} (fractional delay), {worst_on_grid:.3e} (sample-grid delay); tolerance 1e-9"),
        ))
    };
    finish(1, "compact model vs continuous-time oracle", start, run())
}

/// Search-mode waveforms are mutually orthogonal with the expected powers.
pub fn check_search_orthogonality() -> CheckResult {
    let start = Instant::now();
    let run = || -> anyhow::Result<(bool, String)> {
        let sizes = [2usize, 4, 8];
        let (mut off, mut diag) = (0.0_f64, 0.0_f64);
        let mut stream = 0;
        for &n in &sizes {
            for &m in &sizes {
                for &n_tx in &sizes {
                    stream += 1;
                    let p = OtfsParams::new(n, m, 1.0e5, 1.0e-5, 2.8e10, n_tx, 1)?;
                    let (frame, windows, s) = random_waveform(&p, &mut stream_rng(0xC2, stream))?;
                    let gram = s.gram();
                    let powers: Vec<f64> = apply_windows(&frame, &windows)?.iter().map(|x| x.norm_squared()).collect();
                    let top = powers.iter().cloned().fold(0.0, f64::max);
                    for i in 0..n_tx {
                        diag = diag.max((gram[(i, i)].re - powers[i]).abs() / powers[i].max(1.0));
                        for j in (0..n_tx).filter(|&j| j != i) {
                            off = off.max(gram[(i, j)].norm() / top);
                        }
                    }
                }
            }
        }
        Ok((
            off <= 1e-10 && diag <= 1e-10,
            format!("27 sizes; max off-diagonal / max power {off:.2e}, max diagonal error {diag:.2e}"),
        ))
    };
    finish(2, "search-mode waveform orthogonality", start, run())
}

/// `(S^H S)^{-1} Q` at the true cell equals `α a_T a_R^T`.
pub fn check_virtual_array() -> CheckResult {
    let start = Instant::now();
    let run = || -> anyhow::Result<(bool, String)> {
        let mut rng = stream_rng(0xC3, 0);
        let p = OtfsParams::new(8, 8, 1.0e5, 2.0e-5, 2.8e10, 4, 4)?;
        let geometry = ArrayGeometry::for_params(&p);
        let mut worst = 0.0_f64;
        for _ in 0..20 {
            let (_, _, s) = random_waveform(&p, &mut rng)?;
            let target = PathTuple::new(
                complex_gaussian(&mut rng, 1.0),
                uniform(&mut rng, 0.0, p.t_cp),
                uniform(&mut rng, -0.5, 0.5) * p.n as f64 / p.symbol_duration(),
                uniform(&mut rng, -1.4, 1.4),
            );
            let scene = RadarScene { targets: vec![target] };
            let obs = synth_radar_compact(&s, &scene, &geometry, 0.0, &mut stream_rng(0, 0))?;
            let snap = GlrtProcessor::new(&s).snapshot(&obs.y, target.tau, target.nu)?;
            let gram_inv = snap
                .gram
                .clone()
                .try_inverse()
                .ok_or_else(|| anyhow::anyhow!("singular waveform Gram matrix"))?;
            let estimate = gram_inv * &snap.q;
            let a_t = geometry.tx_steering(target.theta);
            let a_r = geometry.rx_steering(target.theta);
            let expected = (&a_t * a_r.transpose()) * target.alpha;
            worst = worst.max(relative_error(&estimate, &expected));
        }
        Ok((worst <= 1e-9, format!("20 random scenes; max relative error {worst:.2e}")))
    };
    finish(3, "virtual-array matched-filter identity", start, run())
}

/// Ambiguity limits of the two reference numerologies.
pub fn check_ambiguity_limits() -> CheckResult {
    let start = Instant::now();
    let run = || -> anyhow::Result<(bool, String)> {
        let isi = OtfsParams::new(64, 128, 480e3, 12.5e-6, 28e9, 8, 8)?.ambiguity_limits();
        let ici = OtfsParams::new(1024, 8, 30e3, 12.5e-6, 28e9, 8, 8)?.ambiguity_limits();
        let cases = [
            ("standard range", isi.standard_range, 312.5),
            ("ISI range", isi.isi_range, 1875.0),
            ("standard velocity (480 kHz)", isi.standard_velocity, 1285.7),
            ("standard velocity (30 kHz)", ici.standard_velocity, 80.35),
        ];
        let mut pass = true;
        let mut parts = Vec::new();
        for (label, got, want) in cases {
            let rel = (got - want).abs() / want;
            pass &= rel <= 1e-3;
            parts.push(format!("{label} {got:.2}"));
        }
        Ok((pass, parts.join(", ")))
    };
    finish(4, "ambiguity limits", start, run())
}

/// Targets beyond the standard delay and Doppler limits.
pub fn check_extended_ambiguity() -> CheckResult {
    let start = Instant::now();
    let run = || -> anyhow::Result<(bool, String)> {
        let delta_f = 1.0e5;
        let p = OtfsParams::new(32, 32, delta_f, 2.5 / delta_f, 28e9, 4, 4)?;
        let geometry = ArrayGeometry::for_params(&p);
        let t = p.symbol_duration();
        let (_, _, s) = random_waveform(&p, &mut stream_rng(0xC5, 0))?;
        let far = PathTuple::new(Complex64::new(1.0, 0.0), 1.5 / delta_f, 0.0, 0.3);
        let fast = PathTuple::new(Complex64::new(0.0, 1.0), 0.3 / delta_f, 1.5 / t, -0.4);
        let scene = RadarScene { targets: vec![far, fast] };
        let obs = synth_radar_compact(&s, &scene, &geometry, 0.0, &mut stream_rng(0, 0))?;
        let grid = DdGrid::for_params(
            &p,
            &GridSpec {
                os_delay: 2,
                os_doppler: 2,
                max_delay: Some(p.t_cp),
                doppler_half_span: Some(2.0 / t),
            },
        )?;
        let detector = DetectorConfig {
            p_fa: 1e-3,
            training: [16, 16],
            guard: [2, 2],
            looks: Some(geometry.n_tx as f64),
            angle: AngleConfig::default(),
        };
        let theta = angle_axis(0.5);
        let glrt = detect_targets(&obs, &s, &geometry, &grid, &theta, &detector)?;
        let fft_config = FftBenchmarkConfig {
            os_delay: 2,
            os_doppler: 2,
            filter: FftFilter::Matched,
        };
        let fft = fft_benchmark(&obs, &s, &geometry, &theta, &fft_config, &detector)?;

        // One oversampled cell of the GLRT grid.
        let (cell_tau, cell_nu) = (1.0 / (2.0 * p.bandwidth()), 1.0 / (2.0 * p.frame_duration()));
        let hit = |pts: &[(f64, f64, f64)], target: &PathTuple| {
            pts.iter()
                .any(|&(tau, nu, _)| (tau - target.tau).abs() <= cell_tau + 1e-15 && (nu - target.nu).abs() <= cell_nu + 1e-9)
        };
        let glrt_points: Vec<_> = glrt.detections.iter().map(|d| (d.tau, d.nu, 0.0)).collect();
        let fft_points: Vec<_> = fft.detections.iter().map(|d| (d.tau, d.nu, 0.0)).collect();
        let glrt_ok = hit(&glrt_points, &far) && hit(&glrt_points, &fast);
        let fft_true = hit(&fft_points, &far) || hit(&fft_points, &fast);
        Ok((
            glrt_ok && !fft_true,
            format!(
                "GLRT finds both true cells: {glrt_ok} ({} detections); FFT detections at a true cell: {fft_true} ({} detections)",
                glrt.detections.len(),
                fft.detections.len()
            ),
        ))
    };
    finish(5, "delay and Doppler beyond the standard limits", start, run())
}

/// Multi-target masking and the reference-target SNR sweep.
pub fn check_sensing(trials: usize) -> Vec<CheckResult> {
    let start = Instant::now();
    let mut configured = ScenarioConfig {
        trials,
        ..ScenarioConfig::default()
    };
    configured.radar.snr_sweep_db.clear();
    let masking = (|| -> anyhow::Result<(bool, String)> {
        let record = run_sensing_experiment(&configured)?;
        let glrt = record.get(crate::sensing::Method::Glrt, 0);
        let fft = record.get(crate::sensing::Method::Fft, 0);
        Ok((
            glrt.all_detected >= 0.8 && fft.max_targets_detected <= 3,
            format!(
                "{trials} trials; GLRT all five detected in {:.0}% of trials; FFT at most {} targets",
                100.0 * glrt.all_detected,
                fft.max_targets_detected
            ),
        ))
    })();

    let masking = finish(6, "multi-target masking", start, masking);
    let start = Instant::now();
    let sweep = ScenarioConfig {
        trials,
        ..ScenarioConfig::default()
    };
    let dominance = (|| -> anyhow::Result<(bool, String)> {
        let record = run_sensing_experiment(&sweep)?;
        let mut pass = true;
        let mut parts = Vec::new();
        for k in 0..record.points() {
            let g = record.get(crate::sensing::Method::Glrt, k);
            let f = record.get(crate::sensing::Method::Fft, k);
            pass &= g.pd >= f.pd - 0.05;
            parts.push(format!("{} dB {:.2}/{:.2}", g.snr_db, g.pd, f.pd));
        }
        let top = record.get(crate::sensing::Method::Glrt, record.points() - 1).pd;
        pass &= top >= 0.9;
        Ok((pass, format!("{trials} trials; Pd GLRT/FFT: {}", parts.join(", "))))
    })();
    vec![masking, finish(7, "detector dominance over the SNR sweep", start, dominance)]
}

/// Exceedance rate of the GLRT map CFAR on pure noise.
pub fn check_cfar_calibration() -> CheckResult {
    let start = Instant::now();
    let run = || -> anyhow::Result<(bool, String)> {
        let p = OtfsParams::new(32, 16, 1.0e5, 1.0e-5, 28e9, 4, 4)?;
        let geometry = ArrayGeometry::for_params(&p);
        let grid = DdGrid::for_params(
            &p,
            &GridSpec {
                os_delay: 1,
                os_doppler: 1,
                max_delay: Some(p.t_cp),
                doppler_half_span: Some(0.5 * p.n as f64 / p.symbol_duration()),
            },
        )?;
        let looks = Looks::Model(LooksModel::Channels).resolve(&geometry);
        let config = CfarConfig {
            training: [8, 8],
            guard: [1, 1],
            looks,
        };
        let mut maps = Vec::new();
        let mut cells = 0;
        let mut frame = 0;
        while cells < 100_000 {
            let (_, _, s) = random_waveform(&p, &mut stream_rng(0xC8, frame))?;
            let mut rng = stream_rng(0xC8, (1 << 32) + frame);
            let noisy = CMatrix::from_fn(p.nm(), geometry.n_rx, |_, _| complex_gaussian(&mut rng, 1.0));
            let map = GlrtProcessor::new(&s).map(&noisy, &grid)?;
            cells += map.values.len();
            maps.push(map.values);
            frame += 1;
        }
        let mut pass = true;
        let mut parts = Vec::new();
        for p_fa in [1e-2, 1e-3] {
            let (mut hits, mut tested) = (0usize, 0usize);
            for map in &maps {
                let outcome = cfar_detect(map, p_fa, &config)?;
                hits += outcome.exceedances;
                tested += outcome.cells_tested;
            }
            let expected = p_fa * tested as f64;
            let sigma = (tested as f64 * p_fa * (1.0 - p_fa)).sqrt();
            let ok = (hits as f64 - expected).abs() <= 3.0 * sigma;
            pass &= ok;
            parts.push(format!(
                "P_fa {p_fa:e}: {hits} of {tested} cells (expected {expected:.0} ± {:.0})",
                3.0 * sigma
            ));
        }
        Ok((pass, parts.join("; ")))
    };
    finish(8, "CFAR calibration on pure noise", start, run())
}

/// Correlation-form LMMSE covariance against the explicit DD channel route.
pub fn check_lmmse_routes() -> CheckResult {
    let start = Instant::now();
    let run = || -> anyhow::Result<(bool, String)> {
        let mut rng = stream_rng(0xC9, 0);
        let shapes = [(4, 4), (8, 4), (4, 8), (8, 8), (2, 8), (8, 2), (4, 2), (2, 4)];
        let mut worst = 0.0_f64;
        for case in 0..20 {
            let (n, m) = shapes[case % shapes.len()];
            let n_tx = rng.random_range(1..=4);
            let p = OtfsParams::new(n, m, 1.0e5, 2.0e-5, 2.8e10, n_tx, 1)?;
            let geometry = ArrayGeometry::for_params(&p);
            let k = rng.random_range(1..=4);
            let channel = CommChannel {
                paths: (0..k)
                    .map(|_| {
                        PathTuple::new(
                            complex_gaussian(&mut rng, 1.0),
                            uniform(&mut rng, 0.0, p.t_cp),
                            uniform(&mut rng, -2000.0, 2000.0),
                            uniform(&mut rng, -1.2, 1.2),
                        )
                    })
                    .collect(),
            };
            let beta = CVector::from_fn(n_tx, |_, _| complex_gaussian(&mut rng, 1.0));
            let beta = beta.unscale(beta.norm());
            let amplitudes: Vec<f64> = (0..n * m).map(|_| rng.random::<f64>() * 2.0).collect();
            let sigma2 = 0.5;
            let windows = WindowSet::track(beta.clone(), amplitudes.clone(), n, m)?;
            let h = build_hdd(&windows, &channel, &p, &geometry)?;
            let direct = lmmse_covariance(&h, sigma2)?;
            let g = build_g(&beta, &channel, &geometry, &p, sigma2)?;
            let fast = lmmse_cov_from_pg(&amplitudes, &g)?;
            worst = worst.max((&direct - &fast).camax());
        }
        Ok((worst <= 1e-9, format!("20 cases; max entry difference {worst:.2e}")))
    };
    finish(9, "LMMSE covariance routes agree", start, run())
}

/// Water-filling against random feasible allocations, KKT and a hand case.
pub fn check_waterfilling() -> CheckResult {
    let start = Instant::now();
    let run = || -> anyhow::Result<(bool, String)> {
        let mut rng = stream_rng(0xCA, 0);
        let g: Vec<f64> = (0..64).map(|i| if i % 7 == 0 { 0.05 } else { rng.random::<f64>() * 4.0 }).collect();
        let budget = 64.0;
        let q = waterfill(&g, budget)?;
        let best = approx_rate_diagonal(&q, &g)?;
        let mut beaten = 0;
        for _ in 0..100 {
            let raw: Vec<f64> = (0..g.len()).map(|_| rng.random::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            let other: Vec<f64> = raw.iter().map(|v| v * budget / total).collect();
            if approx_rate_diagonal(&other, &g)? > best {
                beaten += 1;
            }
        }
        let budget_residual = (q.iter().sum::<f64>() - budget).abs();
        let level = g
            .iter()
            .zip(&q)
            .filter(|(_, &qi)| qi > 0.0)
            .map(|(&gi, &qi)| qi + 1.0 / gi)
            .fold(f64::NAN, f64::max);
        let kkt = g
            .iter()
            .zip(&q)
            .map(|(&gi, &qi)| {
                if qi > 0.0 {
                    (qi + 1.0 / gi - level).abs()
                } else {
                    (level - 1.0 / gi).max(0.0)
                }
            })
            .fold(0.0, f64::max);
        let hand = waterfill(&[1.0, 3.0], 2.0)?;
        let hand_err = (hand[0] - 2.0 / 3.0).abs().max((hand[1] - 4.0 / 3.0).abs());
        Ok((
            beaten == 0 && budget_residual <= 1e-8 && kkt <= 1e-8 && hand_err <= 1e-12,
            format!(
                "random allocations beating it {beaten}/100; budget residual {budget_residual:.1e}; KKT residual {kkt:.1e}; g=[1,3] -> [{:.6}, {:.6}]",
                hand[0], hand[1]
            ),
        ))
    };
    finish(10, "water-filling optimality", start, run())
}

/// Trade-off curve monotonicity and beampattern endpoints.
pub fn check_tradeoff() -> Vec<CheckResult> {
    let start = Instant::now();
    let cfg = ScenarioConfig::default();
    let table = run_tradeoff_experiment(&cfg);
    let curves = match &table {
        Ok(t) => {
            let slack = 1e-9;
            let n_rho = t.rho_grid.len();
            let draws = t.draws.len() / (t.lmr_db.len() * n_rho).max(1);
            let mut violations = 0;
            for chunk in t.draws.chunks(n_rho) {
                for w in chunk.windows(2) {
                    let snr_tol = slack * w[0].snr_rad.abs().max(1.0);
                    let rate_tol = slack * w[0].rate.abs().max(1.0);
                    if w[1].snr_rad < w[0].snr_rad - snr_tol || w[1].rate > w[0].rate + rate_tol {
                        violations += 1;
                    }
                }
            }
            let mut lmr_ok = true;
            for k in 0..n_rho {
                for l in 1..t.lmr_db.len() {
                    lmr_ok &= t.row(l, k).rate > t.row(l - 1, k).rate;
                }
            }
            let means: Vec<String> = (0..t.lmr_db.len())
                .map(|l| format!("{} dB {:.2}..{:.2}", t.lmr_db[l], t.row(l, n_rho - 1).rate, t.row(l, 0).rate))
                .collect();
            Ok((
                violations == 0 && lmr_ok,
                format!(
                    "{draws} draws; monotonicity violations {violations}; mean rate increasing in LMR at every weight: {lmr_ok} (rate range per LMR: {})",
                    means.join(", ")
                ),
            ))
        }
        Err(e) => Err(anyhow::anyhow!("{e:#}")),
    };
    let endpoints = match &table {
        Ok(t) => (|| -> anyhow::Result<(bool, String)> {
            let bp = &t.beampatterns;
            let argmax = |pattern: &[f64]| {
                pattern
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| bp.angles_deg[i])
                    .unwrap_or(f64::NAN)
            };
            let strongest = cfg
                .radar
                .targets
                .iter()
                .max_by(|a, b| a.snr_db.total_cmp(&b.snr_db))
                .map(|t| t.angle_deg)
                .ok_or_else(|| anyhow::anyhow!("no radar targets"))?;
            let comm = cfg.design.comm_angle_deg;
            let find = |rho: f64| t.rho_grid.iter().position(|&r| (r - rho).abs() < 1e-12);
            let (i0, i1) = find(0.0)
                .zip(find(1.0))
                .ok_or_else(|| anyhow::anyhow!("weight grid must contain 0 and 1"))?;
            let (a0, a1) = (argmax(&bp.patterns[i0]), argmax(&bp.patterns[i1]));
            Ok((
                (a0 - comm).abs() <= 1.0 && (a1 - strongest).abs() <= 1.0,
                format!("weight 0 peaks at {a0:.1}° (comm {comm}°); weight 1 peaks at {a1:.1}° (strongest target {strongest}°)"),
            ))
        })(),
        Err(e) => Err(anyhow::anyhow!("{e:#}")),
    };
    vec![
        finish(11, "trade-off curve properties", start, curves),
        finish(12, "beampattern endpoints", start, endpoints),
    ]
}

fn scratch_dir(tag: &str) -> PathBuf {
    std::env::temp_dir().join(format!("otfs-sim-check-{}-{tag}", std::process::id()))
}

fn read_csvs(dir: &Path, files: &[PathBuf]) -> anyhow::Result<Vec<(String, Vec<u8>)>> {
    files
        .iter()
        .map(|f| {
            let name = f.strip_prefix(dir).unwrap_or(f).display().to_string();
            Ok((name, std::fs::read(f)?))
        })
        .collect()
}

/// `sense` and `design` outputs do not depend on the worker count.
pub fn check_determinism() -> CheckResult {
    let start = Instant::now();
    let run = || -> anyhow::Result<(bool, String)> {
        let mut cfg = ScenarioConfig {
            trials: 4,
            ..ScenarioConfig::default()
        };
        cfg.radar.snr_sweep_db = vec![-3.0, 0.0];
        cfg.design.draws = 3;
        let mut outputs = Vec::new();
        for threads in [1usize, 4, 1] {
            let dir = scratch_dir(&format!("t{threads}-{}", outputs.len()));
            let record = with_threads(threads, || run_sensing_experiment(&cfg))??;
            let mut files = write_sensing(&dir, &record)?;
            let table = with_threads(threads, || run_tradeoff_experiment(&cfg))??;
            files.extend(write_tradeoff(&dir, &table)?);
            outputs.push(read_csvs(&dir, &files)?);
            std::fs::remove_dir_all(&dir)?;
        }
        let identical = outputs.windows(2).all(|w| w[0] == w[1]);
        let files = outputs[0].len();
        Ok((identical, format!("{files} CSV files from runs with 1, 4 and 1 workers byte-identical: {identical}")))
    };
    finish(13, "deterministic output", start, run())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_marks_verdict() {
        let r = CheckResult {
            seconds: 0.25,
            ..finish(4, "x", Instant::now(), Ok((true, "ok".into())))
        };
        assert_eq!(r.to_string(), "PASS  4 x: ok [0.2 s]");
        let r = finish(4, "x", Instant::now(), Err(anyhow::anyhow!("boom")));
        assert!(!r.pass);
        assert!(r.to_string().starts_with("FAIL  4 x: error: boom"));
    }

    #[test]
    fn quick_checks_pass() {
        for r in [check_search_orthogonality(), check_virtual_array(), check_ambiguity_limits(), check_waterfilling()] {
            assert!(r.pass, "{r}");
        }
    }
}
