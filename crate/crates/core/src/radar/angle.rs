//! Angle estimation at a detected delay-Doppler point.
//!
//! The coherent spatial spectrum is
//! `|a_T^H Q a_R^*|² / (a_T^H S^H S a_T)` for the snapshot `Q` of
//! [`SpatialSnapshot`]. Multiple targets sharing a delay-Doppler cell are
//! separated greedily: detect the strongest angle, fit its gain, remove its
//! contribution `α S^H S a_T a_R^T` from `Q`, and repeat.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ArrayGeometry;
use crate::radar::cfar::cfar_detect_1d;
use crate::radar::glrt::SpatialSnapshot;
use crate::{CMatrix, CVector, OtfsError, Result};

use std::f64::consts::FRAC_PI_2;

/// Angle-domain detection and interference-subtraction settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleConfig {
    pub training: usize,
    /// Guard cells per side; `None` sizes the guard band to the mainlobe
    /// half-width of the virtual array.
    pub guard: Option<usize>,
    pub max_iterations: usize,
    /// Stop once the residual peak falls below this fraction of the first peak.
    pub relative_floor: f64,
    /// Re-fit every angle with the others removed after the greedy pass.
    pub refine: bool,
}

impl Default for AngleConfig {
    fn default() -> Self {
        Self {
            training: 16,
            guard: None,
            max_iterations: 4,
            relative_floor: 1e-8,
            refine: true,
        }
    }
}

/// One resolved angle with its least-squares gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleEstimate {
    pub theta: f64,
    pub gain: Complex64,
    /// Spectrum value at the time the angle was detected.
    pub power: f64,
}

/// Uniform grid of `step_deg` over the open interval (-90°, 90°), centred on 0.
pub fn angle_axis(step_deg: f64) -> Vec<f64> {
    let half = ((90.0 / step_deg) - 1e-9).floor() as i64;
    let half = if (half as f64 * step_deg - 90.0).abs() < 1e-9 { half - 1 } else { half };
    (-half..=half).map(|k| (k as f64 * step_deg).to_radians()).collect()
}

/// Default axis: 0.5° spacing, ±89.5°.
pub fn default_angle_axis() -> Vec<f64> {
    angle_axis(0.5)
}

struct Spectrum<'a> {
    snap: &'a SpatialSnapshot,
    geometry: &'a ArrayGeometry,
}

impl Spectrum<'_> {
    fn terms(&self, q: &CMatrix, theta: f64) -> Result<(Complex64, f64, CVector, CVector)> {
        let a_t = self.geometry.tx_steering(theta);
        let a_r = self.geometry.rx_steering(theta);
        let den = (a_t.adjoint() * &self.snap.gram * &a_t)[(0, 0)].re;
        if !(den > 0.0) {
            return Err(OtfsError::Numeric(format!(
                "angle spectrum denominator {den} is not positive"
            )));
        }
        let num = (a_t.adjoint() * q * a_r.map(|v| v.conj()))[(0, 0)];
        Ok((num, den, a_t, a_r))
    }

    fn value(&self, q: &CMatrix, theta: f64) -> Result<f64> {
        let (num, den, _, _) = self.terms(q, theta)?;
        Ok(num.norm_sqr() / den)
    }

    /// Least-squares gain `tr(A^H Y) / ‖A‖_F²` expressed through `Q`.
    fn gain(&self, q: &CMatrix, theta: f64) -> Result<Complex64> {
        let (num, den, _, a_r) = self.terms(q, theta)?;
        Ok(num / (den * a_r.norm_squared()))
    }

    /// `S^H S a_T a_R^T` for one angle.
    fn atom(&self, theta: f64) -> CMatrix {
        let a_t = self.geometry.tx_steering(theta);
        let a_r = self.geometry.rx_steering(theta);
        &self.snap.gram * a_t * a_r.transpose()
    }

    fn golden_max(&self, q: &CMatrix, mut lo: f64, mut hi: f64) -> Result<f64> {
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - ratio * (hi - lo);
        let mut x2 = lo + ratio * (hi - lo);
        let mut f1 = self.value(q, x1)?;
        let mut f2 = self.value(q, x2)?;
        for _ in 0..60 {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + ratio * (hi - lo);
                f2 = self.value(q, x2)?;
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - ratio * (hi - lo);
                f1 = self.value(q, x1)?;
            }
            if hi - lo < 1e-10 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Refine around axis index `k` within one grid step on either side.
    fn refine(&self, q: &CMatrix, axis: &[f64], k: usize) -> Result<f64> {
        let lo = if k > 0 { axis[k - 1] } else { axis[0] };
        let hi = if k + 1 < axis.len() { axis[k + 1] } else { axis[k] };
        if hi <= lo {
            return Ok(axis[k]);
        }
        let best = self.golden_max(q, lo, hi)?;
        // Keep the grid point if the search did not improve on it.
        Ok(if self.value(q, best)? >= self.value(q, axis[k])? { best } else { axis[k] })
    }
}

fn check_axis(axis: &[f64]) -> Result<()> {
    if axis.is_empty() || axis.iter().any(|t| !(t.abs() <= FRAC_PI_2)) {
        return Err(OtfsError::InvalidArgument("angle axis must lie within [-π/2, π/2]".into()));
    }
    Ok(())
}

/// Coherent spatial spectrum over `theta_axis`.
pub fn angle_spectrum(snap: &SpatialSnapshot, geometry: &ArrayGeometry, theta_axis: &[f64]) -> Result<Vec<f64>> {
    check_axis(theta_axis)?;
    let sp = Spectrum { snap, geometry };
    theta_axis.iter().map(|&t| sp.value(&snap.q, t)).collect()
}

/// Greedy angle detection with interference subtraction.
///
/// Each iteration runs a 1-D CA-CFAR over the residual spectrum at `p_fa`
/// and takes the strongest detected peak. When `noise_level` is given (the
/// noise-only mean of the spectrum, which is exponential at every angle),
/// the peak must also exceed `-ln(p_fa) * noise_level`. If nothing passes on
/// the first iteration, the global maximum is returned so that every
/// delay-Doppler detection carries at least one angle.
pub fn subtract_and_refine(
    snap: &SpatialSnapshot,
    geometry: &ArrayGeometry,
    theta_axis: &[f64],
    p_fa: f64,
    noise_level: Option<f64>,
    config: &AngleConfig,
) -> Result<Vec<AngleEstimate>> {
    check_axis(theta_axis)?;
    let sp = Spectrum { snap, geometry };
    let guard = config.guard.unwrap_or_else(|| mainlobe_cells(geometry, theta_axis));
    // Shrink the window for short axes or very small arrays.
    let half = (theta_axis.len().saturating_sub(1)) / 2;
    let training = config.training.min(half).max(1);
    let guard = guard.min(half.saturating_sub(training));
    let mut residual = snap.q.clone();
    let mut found: Vec<AngleEstimate> = Vec::new();
    let mut first_peak = None;
    for iteration in 0..config.max_iterations {
        let spectrum: Vec<f64> = theta_axis
            .iter()
            .map(|&t| sp.value(&residual, t))
            .collect::<Result<_>>()?;
        let peak = spectrum.iter().cloned().fold(0.0, f64::max);
        if peak <= 0.0 {
            break;
        }
        let floor = *first_peak.get_or_insert(peak) * config.relative_floor;
        let absolute = noise_level.map_or(0.0, |n| -p_fa.ln() * n);
        let outcome = cfar_detect_1d(&spectrum, p_fa, training, guard, 1.0)?;
        let strongest = outcome
            .detections
            .iter()
            .filter(|d| d.statistic > absolute)
            .max_by(|a, b| a.statistic.total_cmp(&b.statistic))
            .map(|d| d.row);
        let k = match strongest {
            Some(k) => k,
            None if iteration == 0 => argmax(&spectrum),
            None => break,
        };
        if spectrum[k] < floor {
            break;
        }
        let theta = sp.refine(&residual, theta_axis, k)?;
        let gain = sp.gain(&residual, theta)?;
        residual -= sp.atom(theta) * gain;
        found.push(AngleEstimate {
            theta,
            gain,
            power: spectrum[k],
        });
    }
    if config.refine && found.len() > 1 {
        refine_jointly(&sp, theta_axis, &mut found)?;
    }
    Ok(found)
}

/// Grid cells spanned by the broadside mainlobe half-width `1/L` in sine
/// space, `L` being the virtual aperture in wavelengths.
pub fn mainlobe_cells(geometry: &ArrayGeometry, axis: &[f64]) -> usize {
    let aperture = geometry.n_tx as f64 * geometry.tx_spacing
        + (geometry.n_rx as f64 - 1.0) * geometry.rx_spacing;
    let step = if axis.len() > 1 { (axis[1] - axis[0]).abs() } else { 1.0 };
    ((1.0 / aperture / step).ceil() as usize).max(1)
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// One cyclic pass: re-search each angle with all others removed, then solve
/// for all gains jointly by least squares.
fn refine_jointly(sp: &Spectrum<'_>, axis: &[f64], found: &mut [AngleEstimate]) -> Result<()> {
    let step = if axis.len() > 1 { axis[1] - axis[0] } else { 0.0 };
    for k in 0..found.len() {
        let mut q = sp.snap.q.clone();
        for (j, est) in found.iter().enumerate() {
            if j != k {
                q -= sp.atom(est.theta) * est.gain;
            }
        }
        let centre = found[k].theta;
        let lo = (centre - step).max(-FRAC_PI_2);
        let hi = (centre + step).min(FRAC_PI_2);
        if hi > lo {
            let theta = sp.golden_max(&q, lo, hi)?;
            if sp.value(&q, theta)? >= sp.value(&q, centre)? {
                found[k].theta = theta;
            }
        }
        found[k].gain = sp.gain(&q, found[k].theta)?;
    }
    // Joint gains: [tr(A_j^H A_l)] α = [tr(A_j^H Y)].
    let n = found.len();
    let steer: Vec<(CVector, CVector)> = found
        .iter()
        .map(|e| (sp.geometry.tx_steering(e.theta), sp.geometry.rx_steering(e.theta)))
        .collect();
    let gram = &sp.snap.gram;
    let system = DMatrix::from_fn(n, n, |j, l| {
        let tx = (steer[j].0.adjoint() * gram * &steer[l].0)[(0, 0)];
        let rx = steer[j].1.dotc(&steer[l].1);
        tx * rx
    });
    let rhs = CVector::from_fn(n, |j, _| {
        (steer[j].0.adjoint() * &sp.snap.q * steer[j].1.map(|v| v.conj()))[(0, 0)]
    });
    if let Some(gains) = system.lu().solve(&rhs) {
        if gains.iter().all(|g| g.re.is_finite() && g.im.is_finite()) {
            for (e, g) in found.iter_mut().zip(gains.iter()) {
                e.gain = *g;
            }
        }
    }
    Ok(())
}
