//! Cell-averaging CFAR over 1-D and 2-D statistic maps.
//!
//! The threshold of a cell is `scale * mean(training cells)`, where the
//! training region is a rectangle of half-width `guard + training` around the
//! cell with the `guard` rectangle removed, clipped at the map borders. The
//! scale assumes noise cells that are Gamma distributed with `looks` degrees
//! of freedom (a sum of `looks` independent exponentials), which covers both
//! single-channel maps (`looks = 1`) and maps integrated noncoherently over
//! several channels.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::{OtfsError, Result};

/// Window geometry per dimension `[rows, cols]` and the noise-cell order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfarConfig {
    /// Training cells on each side of the guard band.
    pub training: [usize; 2],
    /// Guard cells on each side of the cell under test.
    pub guard: [usize; 2],
    /// Number of exponential components per noise cell.
    pub looks: f64,
}

impl Default for CfarConfig {
    fn default() -> Self {
        Self {
            training: [16, 16],
            guard: [2, 2],
            looks: 1.0,
        }
    }
}

impl CfarConfig {
    pub fn with_looks(mut self, looks: f64) -> Self {
        self.looks = looks;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfarDetection {
    pub row: usize,
    pub col: usize,
    pub statistic: f64,
    pub threshold: f64,
    /// Mean of the training cells.
    pub noise_mean: f64,
}

/// Detections plus the raw exceedance count used for calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfarOutcome {
    /// Exceedances that are also local maxima of their guard neighbourhood.
    pub detections: Vec<CfarDetection>,
    /// All cells whose statistic exceeds the threshold.
    pub exceedances: usize,
    pub cells_tested: usize,
    pub p_fa: f64,
    pub config: CfarConfig,
}

/// Threshold multiplier for `n_train` averaged training cells.
///
/// Solves `P_fa = 1 - I_{c/(1+c)}(L, L n)` for `scale = c n`; for `L = 1`
/// this is the closed form `n (P_fa^{-1/n} - 1)`.
pub fn cfar_scale(p_fa: f64, n_train: usize, looks: f64) -> Result<f64> {
    if !(p_fa > 0.0 && p_fa < 1.0) {
        return Err(OtfsError::InvalidArgument(format!("P_fa must lie in (0, 1), got {p_fa}")));
    }
    if n_train == 0 {
        return Err(OtfsError::InvalidArgument("no training cells".into()));
    }
    if !(looks > 0.0 && looks.is_finite()) {
        return Err(OtfsError::InvalidArgument(format!("looks must be positive, got {looks}")));
    }
    let n = n_train as f64;
    if looks == 1.0 {
        return Ok(n * (p_fa.powf(-1.0 / n) - 1.0));
    }
    let tail = |x: f64| 1.0 - beta_reg(looks, looks * n, x);
    // tail is decreasing in x; bisect on [0, 1].
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) > p_fa {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let x = 0.5 * (lo + hi);
    Ok(n * x / (1.0 - x))
}

struct SummedArea {
    table: Vec<f64>,
    cols: usize,
}

impl SummedArea {
    fn new(map: &DMatrix<f64>) -> Self {
        let (r, c) = map.shape();
        let cols = c + 1;
        let mut table = vec![0.0; (r + 1) * cols];
        for i in 0..r {
            let mut row = 0.0;
            for j in 0..c {
                row += map[(i, j)];
                table[(i + 1) * cols + j + 1] = table[i * cols + j + 1] + row;
            }
        }
        Self { table, cols }
    }

    /// Sum over rows `r0..r1` and columns `c0..c1` (half-open).
    fn sum(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> f64 {
        let t = |i: usize, j: usize| self.table[i * self.cols + j];
        t(r1, c1) - t(r0, c1) - t(r1, c0) + t(r0, c0)
    }
}

fn span(center: usize, half: usize, len: usize) -> (usize, usize) {
    (center.saturating_sub(half), (center + half + 1).min(len))
}

/// 2-D CA-CFAR on a nonnegative map.
pub fn cfar_detect(map: &DMatrix<f64>, p_fa: f64, config: &CfarConfig) -> Result<CfarOutcome> {
    let (rows, cols) = map.shape();
    if config.training == [0, 0] {
        return Err(OtfsError::InvalidArgument("training must be >= 1 in some dimension".into()));
    }
    for (dim, len) in [rows, cols].into_iter().enumerate() {
        let width = 2 * (config.training[dim] + config.guard[dim]) + 1;
        if len < width {
            return Err(OtfsError::InvalidArgument(format!(
                "map dimension {dim} has {len} cells but the CFAR window needs {width}"
            )));
        }
    }
    if map.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(OtfsError::InvalidArgument("CFAR map must be finite and nonnegative".into()));
    }
    let sat = SummedArea::new(map);
    let outer = [config.training[0] + config.guard[0], config.training[1] + config.guard[1]];
    let mut scales: HashMap<usize, f64> = HashMap::new();
    let mut exceedances = 0;
    let mut candidates = Vec::new();
    for j in 0..cols {
        for i in 0..rows {
            let (or0, or1) = span(i, outer[0], rows);
            let (oc0, oc1) = span(j, outer[1], cols);
            let (gr0, gr1) = span(i, config.guard[0], rows);
            let (gc0, gc1) = span(j, config.guard[1], cols);
            let count = (or1 - or0) * (oc1 - oc0) - (gr1 - gr0) * (gc1 - gc0);
            let total = sat.sum(or0, or1, oc0, oc1) - sat.sum(gr0, gr1, gc0, gc1);
            let scale = match scales.get(&count) {
                Some(&s) => s,
                None => {
                    let s = cfar_scale(p_fa, count, config.looks)?;
                    scales.insert(count, s);
                    s
                }
            };
            let noise_mean = total.max(0.0) / count as f64;
            let threshold = scale * noise_mean;
            let v = map[(i, j)];
            if v > threshold {
                exceedances += 1;
                candidates.push(CfarDetection {
                    row: i,
                    col: j,
                    statistic: v,
                    threshold,
                    noise_mean,
                });
            }
        }
    }
    let radius = [config.guard[0].max(1), config.guard[1].max(1)];
    let detections = candidates
        .into_iter()
        .filter(|d| is_local_max(map, d.row, d.col, radius))
        .collect();
    Ok(CfarOutcome {
        detections,
        exceedances,
        cells_tested: rows * cols,
        p_fa,
        config: *config,
    })
}

/// Strict local maximum; equal neighbours are resolved in favour of the
/// earlier cell in column-major order so plateaus yield one detection.
fn is_local_max(map: &DMatrix<f64>, i: usize, j: usize, radius: [usize; 2]) -> bool {
    let (rows, cols) = map.shape();
    let v = map[(i, j)];
    let (r0, r1) = span(i, radius[0], rows);
    let (c0, c1) = span(j, radius[1], cols);
    let here = j * rows + i;
    for b in c0..c1 {
        for a in r0..r1 {
            let idx = b * rows + a;
            if idx == here {
                continue;
            }
            let w = map[(a, b)];
            if w > v || (w == v && idx < here) {
                return false;
            }
        }
    }
    true
}

/// 1-D CA-CFAR; detections report `row` as the index and `col = 0`.
pub fn cfar_detect_1d(values: &[f64], p_fa: f64, training: usize, guard: usize, looks: f64) -> Result<CfarOutcome> {
    let map = DMatrix::from_column_slice(values.len(), 1, values);
    let config = CfarConfig {
        training: [training, 0],
        guard: [guard, 0],
        looks,
    };
    cfar_detect(&map, p_fa, &config)
}
