//! ISAC trade-off sweep over the weight `ρ` and the LOS-to-multipath ratio.
//!
//! For every LMR, `draws` random comm channels are generated. Draw `d` uses
//! the same delays, Dopplers, phases and relative multipath powers for every
//! LMR; only the LOS/multipath power split changes.

use anyhow::Context;
use num_complex::Complex64;
use otfs_isac::channel::{build_hdd, ArrayGeometry, CommChannel, PathTuple, RadarScene};
use otfs_isac::designer::{beampattern, rate_from_pg, IsacDesigner, IsacWeight};
use otfs_isac::frame::WindowSet;
use otfs_isac::radar::angle_axis;
use otfs_isac::rng::{stream_rng, unit_phase};
use otfs_isac::{CVector, OtfsParams};
use rand::Rng;
use rayon::prelude::*;

use crate::config::{DesignConfig, ScenarioConfig};
use crate::sensing::db_to_linear;

/// Radar scene seen by the designer: targets' gains and angles only.
pub fn design_scene(cfg: &ScenarioConfig) -> RadarScene {
    let sigma2 = cfg.design.noise_variance;
    RadarScene {
        targets: cfg
            .radar
            .targets
            .iter()
            .map(|t| {
                let amp = (db_to_linear(t.snr_db) * sigma2).sqrt();
                PathTuple::new(Complex64::new(amp, 0.0), 0.0, 0.0, t.angle_deg.to_radians())
            })
            .collect(),
    }
}

/// Random comm channel with LOS-to-multipath ratio `lmr_db` and total
/// SNR `Σ|α̃_k|²/σ²` fixed by the config.
pub fn draw_comm_channel(design: &DesignConfig, lmr_db: f64, seed: u64, draw: u64) -> CommChannel {
    if !design.explicit_paths.is_empty() {
        return CommChannel {
            paths: design
                .explicit_paths
                .iter()
                .map(|p| PathTuple::new(Complex64::new(p.gain_re, p.gain_im), p.delay_s, p.doppler_hz, p.angle_deg.to_radians()))
                .collect(),
        };
    }
    let mut rng = stream_rng(seed, draw);
    let total = db_to_linear(design.total_snr_db) * design.noise_variance;
    let j = db_to_linear(lmr_db);
    let k = design.paths;
    let theta = design.comm_angle_deg.to_radians();
    let mut delays = Vec::with_capacity(k);
    let mut dopplers = Vec::with_capacity(k);
    let mut phases = Vec::with_capacity(k);
    let mut weights = Vec::with_capacity(k);
    for _ in 0..k {
        delays.push(rng.random::<f64>() * design.max_delay_s);
        dopplers.push((2.0 * rng.random::<f64>() - 1.0) * design.max_doppler_hz);
        phases.push(unit_phase(&mut rng));
        // Exponential multipath powers.
        weights.push(-(1.0 - rng.random::<f64>()).ln());
    }
    let multipath: f64 = weights[1..].iter().sum();
    let paths = (0..k)
        .map(|i| {
            let power = if k == 1 {
                total
            } else if i == 0 {
                total * j / (1.0 + j)
            } else {
                total / (1.0 + j) * weights[i] / multipath
            };
            PathTuple::new(phases[i] * power.sqrt(), delays[i], dopplers[i], theta)
        })
        .collect();
    CommChannel { paths }
}

/// One design point for one channel draw.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DrawPoint {
    pub lmr_db: f64,
    pub draw: usize,
    pub rho: f64,
    pub snr_rad: f64,
    /// Exact rate at the water-filled allocation [nats].
    pub rate: f64,
    /// Exact rate with uniform allocation `q = 1` [nats].
    pub rate_uniform: f64,
}

/// Mean over draws at one `(LMR, ρ)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TradeoffRow {
    pub lmr_db: f64,
    pub rho: f64,
    pub snr_rad: f64,
    pub rate: f64,
    pub rate_uniform: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beampatterns {
    pub angles_deg: Vec<f64>,
    /// One pattern per `ρ` in the grid.
    pub patterns: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffTable {
    pub rho_grid: Vec<f64>,
    pub lmr_db: Vec<f64>,
    pub rows: Vec<TradeoffRow>,
    pub draws: Vec<DrawPoint>,
    pub beampatterns: Beampatterns,
}

impl TradeoffTable {
    pub fn row(&self, lmr: usize, rho: usize) -> &TradeoffRow {
        &self.rows[lmr * self.rho_grid.len() + rho]
    }
}

fn design_draw(
    scene: &RadarScene,
    channel: &CommChannel,
    geometry: &ArrayGeometry,
    params: &OtfsParams,
    design: &DesignConfig,
) -> anyhow::Result<Vec<(f64, f64, f64, CVector)>> {
    let designer = IsacDesigner::new(scene, channel, geometry, params, design.noise_variance)?;
    let ones = vec![1.0; params.nm()];
    design
        .rho_grid
        .iter()
        .map(|&rho| {
            let r = designer.design(IsacWeight::new(rho)?)?;
            let g = designer.g_matrix(&r.beta)?;
            let uniform = rate_from_pg(&ones, &g)?;
            Ok((r.snr_rad, r.rate, uniform, r.beta))
        })
        .collect()
}

/// Sweep `ρ` for every LMR and channel draw; the beampattern table is taken
/// from the first draw of the LMR closest to 0 dB.
pub fn run_tradeoff_experiment(cfg: &ScenarioConfig) -> anyhow::Result<TradeoffTable> {
    let design = &cfg.design;
    let params = design.frame.params().context("design frame")?;
    let geometry = cfg.array.geometry(&params)?;
    let scene = design_scene(cfg);
    let draws = if design.explicit_paths.is_empty() { design.draws } else { 1 };
    let jobs: Vec<(usize, usize)> = (0..design.lmr_db.len())
        .flat_map(|l| (0..draws).map(move |d| (l, d)))
        .collect();
    let results: Vec<Vec<(f64, f64, f64, CVector)>> = jobs
        .par_iter()
        .map(|&(l, d)| {
            let channel = draw_comm_channel(design, design.lmr_db[l], cfg.seed, d as u64);
            design_draw(&scene, &channel, &geometry, &params, design)
        })
        .collect::<anyhow::Result<_>>()?;

    let n_rho = design.rho_grid.len();
    let mut points = Vec::with_capacity(jobs.len() * n_rho);
    let mut rows = Vec::with_capacity(design.lmr_db.len() * n_rho);
    for (l, &lmr) in design.lmr_db.iter().enumerate() {
        let mut acc = vec![(0.0, 0.0, 0.0); n_rho];
        for d in 0..draws {
            for (k, (snr, rate, uniform, _)) in results[l * draws + d].iter().enumerate() {
                points.push(DrawPoint {
                    lmr_db: lmr,
                    draw: d,
                    rho: design.rho_grid[k],
                    snr_rad: *snr,
                    rate: *rate,
                    rate_uniform: *uniform,
                });
                acc[k].0 += snr;
                acc[k].1 += rate;
                acc[k].2 += uniform;
            }
        }
        for (k, (snr, rate, uniform)) in acc.into_iter().enumerate() {
            let n = draws as f64;
            rows.push(TradeoffRow {
                lmr_db: lmr,
                rho: design.rho_grid[k],
                snr_rad: snr / n,
                rate: rate / n,
                rate_uniform: uniform / n,
            });
        }
    }

    let pattern_lmr = design
        .lmr_db
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(l, _)| l)
        .unwrap_or(0);
    let axis = angle_axis(design.beampattern_step_deg);
    let patterns = if design.lmr_db.is_empty() {
        Vec::new()
    } else {
        results[pattern_lmr * draws]
            .iter()
            .map(|(_, _, _, beta)| beampattern(beta, &geometry, &axis))
            .collect()
    };
    Ok(TradeoffTable {
        rho_grid: design.rho_grid.clone(),
        lmr_db: design.lmr_db.clone(),
        rows,
        draws: points,
        beampatterns: Beampatterns {
            angles_deg: axis.iter().map(|a| a.to_degrees()).collect(),
            patterns,
        },
    })
}

/// `|H_DD|` response to a DD impulse at the origin, `N×M`, for a unit-norm
/// beam matched to the comm angle and uniform amplitudes.
pub fn dd_channel_magnitude(cfg: &ScenarioConfig, lmr_db: f64) -> anyhow::Result<Vec<Vec<f64>>> {
    let design = &cfg.design;
    let params = design.frame.params().context("design frame")?;
    let geometry = cfg.array.geometry(&params)?;
    let channel = draw_comm_channel(design, lmr_db, cfg.seed, 0);
    let steer = geometry.tx_steering(design.comm_angle_deg.to_radians());
    let beta = steer.map(|v| v.conj()) / Complex64::from(steer.norm());
    let windows = WindowSet::track(beta, vec![1.0; params.nm()], params.n, params.m)?;
    let h = build_hdd(&windows, &channel, &params, &geometry)?;
    Ok((0..params.n)
        .map(|row| (0..params.m).map(|col| h[(col * params.n + row, 0)].norm()).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_change_draws_but_not_shape() {
        let mut cfg = ScenarioConfig::default();
        cfg.design.draws = 2;
        cfg.design.rho_grid = vec![0.0, 1.0];
        cfg.design.lmr_db = vec![0.0];
        let a = run_tradeoff_experiment(&cfg).unwrap();
        cfg.seed = 2;
        let b = run_tradeoff_experiment(&cfg).unwrap();
        assert_eq!(a.rows.len(), b.rows.len());
        assert_ne!(a.rows[0].rate, b.rows[0].rate);
        // The radar side does not depend on the comm draw at weight 1.
        assert!((a.rows[1].snr_rad - b.rows[1].snr_rad).abs() < 1e-9 * a.rows[1].snr_rad);
    }

    #[test]
    fn comm_draw_splits_power_by_lmr() {
        let design = ScenarioConfig::default().design;
        let total = db_to_linear(design.total_snr_db) * design.noise_variance;
        for lmr in [-10.0, 0.0, 10.0] {
            let ch = draw_comm_channel(&design, lmr, 9, 3);
            assert_eq!(ch.paths.len(), design.paths);
            let powers: Vec<f64> = ch.paths.iter().map(|p| p.alpha.norm_sqr()).collect();
            let sum: f64 = powers.iter().sum();
            assert!((sum - total).abs() < 1e-9 * total);
            let j = db_to_linear(lmr);
            assert!((powers[0] - total * j / (1.0 + j)).abs() < 1e-9 * total);
            for p in &ch.paths {
                assert!(p.tau >= 0.0 && p.tau <= design.max_delay_s);
                assert!(p.nu.abs() <= design.max_doppler_hz);
            }
        }
        // Same draw index, same geometry across LMR values.
        let a = draw_comm_channel(&design, -10.0, 9, 3);
        let b = draw_comm_channel(&design, 10.0, 9, 3);
        assert!(a.paths.iter().zip(&b.paths).all(|(x, y)| x.tau == y.tau && x.nu == y.nu));
    }
}
