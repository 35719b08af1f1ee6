//! Monte Carlo sensing experiment: GLRT chain versus the 2-D FFT benchmark.
//!
//! Each trial draws a fresh QAM frame, search-mode windows, target phases and
//! noise from streams keyed by `(seed, trial)`. All SNR points of a sweep
//! reuse the trial's draws and only rescale the reference target, so the
//! sweep compares like with like.

use anyhow::Context;
use num_complex::Complex64;
use otfs_isac::channel::{synth_radar_compact, ArrayGeometry, PathTuple, RadarObservation, RadarScene};
use otfs_isac::frame::{build_waveform_matrix, DdFrame, PulseShape, WaveformMatrix, WindowSet};
use otfs_isac::radar::{
    angle_axis, fft_benchmark, detect_targets, AngleConfig, DdGrid, DetectionReport, DetectorConfig,
    FftBenchmarkConfig, GridSpec,
};
use otfs_isac::rng::{stream_rng, unit_phase};
use otfs_isac::OtfsParams;
use rayon::prelude::*;

use crate::association::{associate, Association, Gates, RvaPoint};
use crate::config::ScenarioConfig;

/// Offset separating noise streams from frame streams.
const NOISE_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Glrt,
    Fft,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Glrt, Method::Fft];

    pub fn label(&self) -> &'static str {
        match self {
            Method::Glrt => "glrt",
            Method::Fft => "fft",
        }
    }
}

/// Everything a trial needs that does not change between trials.
#[derive(Debug, Clone)]
pub struct SensingSetup {
    pub params: OtfsParams,
    pub geometry: ArrayGeometry,
    pub qam_order: usize,
    pub sigma2: f64,
    pub truth: Vec<RvaPoint>,
    /// `|α_k|` at the configured SNRs.
    pub amplitudes: Vec<f64>,
    pub reference: usize,
    pub grid: DdGrid,
    pub fft: FftBenchmarkConfig,
    pub detector: DetectorConfig,
    pub theta_axis: Vec<f64>,
    pub gates: Gates,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl SensingSetup {
    pub fn new(cfg: &ScenarioConfig) -> anyhow::Result<Self> {
        let params = cfg.frame.params()?;
        let geometry = cfg.array.geometry(&params)?;
        let sigma2 = cfg.radar.noise_variance;
        let truth = cfg
            .radar
            .targets
            .iter()
            .map(|t| RvaPoint {
                range: t.range_m,
                velocity: t.velocity_mps,
                angle: t.angle_deg.to_radians(),
            })
            .collect();
        let amplitudes = cfg
            .radar
            .targets
            .iter()
            .map(|t| (db_to_linear(t.snr_db) * sigma2).sqrt())
            .collect();
        let d = &cfg.detector;
        let max_range = d.max_range_m.unwrap_or(params.delay_to_range(params.t_cp));
        let grid = DdGrid::for_params(
            &params,
            &GridSpec {
                os_delay: d.os_delay,
                os_doppler: d.os_doppler,
                max_delay: Some(params.range_to_delay(max_range)),
                doppler_half_span: Some(d.doppler_half_span_hz.unwrap_or(0.5 / params.symbol_duration())),
            },
        )
        .context("building the GLRT search grid")?;
        let detector = DetectorConfig {
            p_fa: d.p_fa,
            training: d.training,
            guard: d.guard,
            looks: Some(d.looks.resolve(&geometry)),
            angle: AngleConfig {
                training: d.angle_training,
                ..AngleConfig::default()
            },
        };
        let a = &cfg.association;
        let gates = Gates {
            range: a.range_cells * params.range_resolution(),
            velocity: a.velocity_cells * params.velocity_resolution(),
            sine: a.angle_cells * 2.0 / (geometry.n_tx * geometry.n_rx) as f64,
        };
        Ok(Self {
            params,
            geometry,
            qam_order: cfg.frame.qam_order,
            sigma2,
            truth,
            amplitudes,
            reference: cfg.radar.reference_target,
            grid,
            fft: FftBenchmarkConfig {
                os_delay: cfg.fft.os_delay,
                os_doppler: cfg.fft.os_doppler,
                filter: cfg.fft.filter.into(),
            },
            detector,
            theta_axis: angle_axis(d.angle_step_deg),
            gates,
        })
    }

    /// Amplitudes with the reference target moved to `snr_db`.
    pub fn amplitudes_at(&self, snr_db: Option<f64>) -> Vec<f64> {
        let mut amps = self.amplitudes.clone();
        if let (Some(db), Some(a)) = (snr_db, amps.get_mut(self.reference)) {
            *a = (db_to_linear(db) * self.sigma2).sqrt();
        }
        amps
    }
}

/// Per-trial random draws shared by all SNR points.
pub struct TrialDraw {
    pub waveform: WaveformMatrix,
    pub phases: Vec<Complex64>,
    noise_seed: (u64, u64),
}

pub fn draw_trial(setup: &SensingSetup, seed: u64, trial: u64) -> anyhow::Result<TrialDraw> {
    let p = &setup.params;
    let mut rng = stream_rng(seed, trial);
    let frame = DdFrame::random_qam(p.n, p.m, setup.qam_order, &mut rng)?;
    let windows = WindowSet::random_search(p.n, p.m, p.n_tx, &mut rng)?;
    let waveform = build_waveform_matrix(p, &frame, &windows, &PulseShape::rectangular(p.n))?;
    let phases = setup.truth.iter().map(|_| unit_phase(&mut rng)).collect();
    Ok(TrialDraw {
        waveform,
        phases,
        noise_seed: (seed, NOISE_STREAM + trial),
    })
}

/// Noisy observation of the configured scene for one trial.
pub fn observe(setup: &SensingSetup, draw: &TrialDraw, amplitudes: &[f64]) -> anyhow::Result<RadarObservation> {
    let p = &setup.params;
    let scene = RadarScene {
        targets: setup
            .truth
            .iter()
            .zip(amplitudes)
            .zip(&draw.phases)
            .map(|((t, &a), &ph)| {
                PathTuple::new(ph * a, p.range_to_delay(t.range), p.velocity_to_doppler(t.velocity), t.angle)
            })
            .collect(),
    };
    let mut rng = stream_rng(draw.noise_seed.0, draw.noise_seed.1);
    Ok(synth_radar_compact(&draw.waveform, &scene, &setup.geometry, setup.sigma2, &mut rng)?)
}

pub fn detect(setup: &SensingSetup, obs: &RadarObservation, s: &WaveformMatrix, method: Method) -> anyhow::Result<DetectionReport> {
    Ok(match method {
        Method::Glrt => detect_targets(obs, s, &setup.geometry, &setup.grid, &setup.theta_axis, &setup.detector)?,
        Method::Fft => fft_benchmark(obs, s, &setup.geometry, &setup.theta_axis, &setup.fft, &setup.detector)?,
    })
}

/// Detections as range/velocity/angle points, one per resolved angle.
pub fn report_points(setup: &SensingSetup, report: &DetectionReport) -> Vec<RvaPoint> {
    let p = &setup.params;
    report
        .points()
        .into_iter()
        .map(|(tau, nu, theta)| RvaPoint {
            range: p.delay_to_range(tau),
            velocity: p.doppler_to_velocity(nu),
            angle: theta,
        })
        .collect()
}

/// Outcome of one method on one trial at one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub association: Association,
    pub points: Vec<RvaPoint>,
}

impl MethodOutcome {
    pub fn estimate(&self, target: usize) -> Option<&RvaPoint> {
        self.association.matches[target].map(|d| &self.points[d])
    }
}

pub fn evaluate(setup: &SensingSetup, obs: &RadarObservation, s: &WaveformMatrix, method: Method) -> anyhow::Result<MethodOutcome> {
    let report = detect(setup, obs, s, method)?;
    let points = report_points(setup, &report);
    let association = associate(&points, &setup.truth, &setup.gates);
    Ok(MethodOutcome { association, points })
}

/// Aggregate metrics for one method at one SNR point.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MethodMetrics {
    pub method: &'static str,
    /// Reference-target SNR [dB].
    pub snr_db: f64,
    pub trials: usize,
    /// Detection probability of the reference target.
    pub pd: f64,
    /// Position RMSE [m] of the reference target over trials where it was detected.
    pub rmse_m: Option<f64>,
    pub detected_trials: usize,
    pub target_pd: Vec<f64>,
    pub mean_false_alarms: f64,
    pub mean_targets_detected: f64,
    /// Fraction of trials in which every target was detected.
    pub all_detected: f64,
    pub max_targets_detected: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SensingRecord {
    pub reference_target: usize,
    /// Ordered by SNR point, then method.
    pub metrics: Vec<MethodMetrics>,
}

impl SensingRecord {
    pub fn get(&self, method: Method, point: usize) -> &MethodMetrics {
        self.metrics
            .iter()
            .filter(|m| m.method == method.label())
            .nth(point)
            .expect("point index within the sweep")
    }

    pub fn points(&self) -> usize {
        self.metrics.len() / Method::ALL.len()
    }
}

fn aggregate(method: Method, snr_db: f64, reference: usize, truth: &[RvaPoint], outcomes: &[&MethodOutcome]) -> MethodMetrics {
    let trials = outcomes.len();
    let mut detected_trials = 0;
    let mut err2 = 0.0;
    let mut target_hits = vec![0usize; truth.len()];
    let (mut fa, mut hits, mut all, mut max) = (0usize, 0usize, 0usize, 0usize);
    for o in outcomes {
        if let Some(est) = truth.get(reference).and(o.estimate(reference)) {
            detected_trials += 1;
            err2 += est.position_error2(&truth[reference]);
        }
        for (t, m) in o.association.matches.iter().enumerate() {
            if m.is_some() {
                target_hits[t] += 1;
            }
        }
        let n = o.association.detected();
        fa += o.association.false_alarms;
        hits += n;
        max = max.max(n);
        if n == truth.len() {
            all += 1;
        }
    }
    let t = trials.max(1) as f64;
    MethodMetrics {
        method: method.label(),
        snr_db,
        trials,
        pd: detected_trials as f64 / t,
        rmse_m: (detected_trials > 0).then(|| (err2 / detected_trials as f64).sqrt()),
        detected_trials,
        target_pd: target_hits.iter().map(|&h| h as f64 / t).collect(),
        mean_false_alarms: fa as f64 / t,
        mean_targets_detected: hits as f64 / t,
        all_detected: all as f64 / t,
        max_targets_detected: max,
    }
}

/// Reference-target SNR points of the sweep.
pub fn sweep_points(cfg: &ScenarioConfig) -> Vec<f64> {
    if cfg.radar.snr_sweep_db.is_empty() {
        cfg.radar
            .targets
            .get(cfg.radar.reference_target)
            .map(|t| vec![t.snr_db])
            .unwrap_or_else(|| vec![f64::NAN])
    } else {
        cfg.radar.snr_sweep_db.clone()
    }
}

/// Run `trials` Monte Carlo trials over the SNR sweep of the reference target.
///
/// Trials run on the current rayon pool; results are reduced in trial order,
/// so the record does not depend on the number of workers.
pub fn run_sensing_experiment(cfg: &ScenarioConfig) -> anyhow::Result<SensingRecord> {
    let setup = SensingSetup::new(cfg)?;
    let sweep = sweep_points(cfg);
    let per_trial: Vec<Vec<[MethodOutcome; 2]>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|trial| -> anyhow::Result<Vec<[MethodOutcome; 2]>> {
            let draw = draw_trial(&setup, cfg.seed, trial)?;
            sweep
                .iter()
                .map(|&db| {
                    let amps = setup.amplitudes_at(db.is_finite().then_some(db));
                    let obs = observe(&setup, &draw, &amps)?;
                    Ok([
                        evaluate(&setup, &obs, &draw.waveform, Method::Glrt)?,
                        evaluate(&setup, &obs, &draw.waveform, Method::Fft)?,
                    ])
                })
                .collect()
        })
        .collect::<anyhow::Result<_>>()?;
    let mut metrics = Vec::new();
    for (k, &db) in sweep.iter().enumerate() {
        for (j, method) in Method::ALL.iter().enumerate() {
            let outcomes: Vec<&MethodOutcome> = per_trial.iter().map(|t| &t[k][j]).collect();
            metrics.push(aggregate(*method, db, setup.reference, &setup.truth, &outcomes));
        }
    }
    Ok(SensingRecord {
        reference_target: setup.reference,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TargetSpec;

    fn single_target() -> ScenarioConfig {
        let mut cfg = ScenarioConfig {
            trials: 2,
            ..ScenarioConfig::default()
        };
        let p = cfg.frame.params().unwrap();
        cfg.radar.targets = vec![TargetSpec {
            range_m: 10.0 * p.range_resolution(),
            velocity_mps: 0.0,
            angle_deg: 10.0,
            snr_db: 60.0,
        }];
        cfg.radar.reference_target = 0;
        cfg.radar.snr_sweep_db.clear();
        cfg
    }

    #[test]
    fn strong_on_grid_target_is_found_by_both_methods() {
        let record = run_sensing_experiment(&single_target()).unwrap();
        for method in Method::ALL {
            let m = record.get(method, 0);
            assert_eq!(m.pd, 1.0, "{}", m.method);
            assert!(m.rmse_m.unwrap() < 0.05, "{} rmse {:?}", m.method, m.rmse_m);
            assert_eq!(m.target_pd, vec![1.0]);
        }
    }

    #[test]
    fn sweep_reports_every_point_and_method() {
        let mut cfg = ScenarioConfig {
            trials: 1,
            ..ScenarioConfig::default()
        };
        cfg.radar.snr_sweep_db = vec![-10.0, 10.0];
        let record = run_sensing_experiment(&cfg).unwrap();
        assert_eq!(record.points(), 2);
        assert_eq!(record.metrics.len(), 4);
        assert_eq!(record.reference_target, 2);
        for m in &record.metrics {
            assert!((0.0..=1.0).contains(&m.pd));
            assert_eq!(m.target_pd.len(), 5);
            assert_eq!(m.rmse_m.is_some(), m.detected_trials > 0);
        }
        assert_eq!(record.get(Method::Glrt, 1).snr_db, 10.0);
    }
}
