//! Delay-Doppler search grids.

use serde::{Deserialize, Serialize};

use crate::{OtfsError, OtfsParams, Result};

/// Grid resolution and extent relative to the frame numerology.
///
/// `max_delay` and `doppler_half_span` default to the ISI/ICI-embracing
/// limits `min{M/Δf, T_cp}` and `N/(2T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub os_delay: usize,
    pub os_doppler: usize,
    pub max_delay: Option<f64>,
    pub doppler_half_span: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            os_delay: 2,
            os_doppler: 2,
            max_delay: None,
            doppler_half_span: None,
        }
    }
}

/// Sorted delay [s] and Doppler [Hz] axes.
#[derive(Debug, Clone, PartialEq)]
pub struct DdGrid {
    tau_axis: Vec<f64>,
    nu_axis: Vec<f64>,
    os_delay: usize,
    os_doppler: usize,
}

fn strictly_increasing(axis: &[f64]) -> bool {
    axis.windows(2).all(|w| w[1] > w[0]) && axis.iter().all(|v| v.is_finite())
}

impl DdGrid {
    /// Arbitrary sorted axes.
    pub fn from_axes(tau_axis: Vec<f64>, nu_axis: Vec<f64>) -> Result<Self> {
        if tau_axis.is_empty() || nu_axis.is_empty() {
            return Err(OtfsError::InvalidArgument("grid axes must be nonempty".into()));
        }
        if !strictly_increasing(&tau_axis) || !strictly_increasing(&nu_axis) {
            return Err(OtfsError::InvalidArgument("grid axes must be strictly increasing".into()));
        }
        Ok(Self {
            tau_axis,
            nu_axis,
            os_delay: 1,
            os_doppler: 1,
        })
    }

    /// Uniform grid: delay step `T/(N os)` from 0, Doppler step `1/(M T os)`
    /// over `[-span, span)`.
    ///
    /// The delay axis includes `max_delay` when it falls on the grid, but never
    /// extends to a full ISI period `M/Δf` (which aliases delay zero).
    pub fn for_params(params: &OtfsParams, spec: &GridSpec) -> Result<Self> {
        if spec.os_delay == 0 || spec.os_doppler == 0 {
            return Err(OtfsError::InvalidArgument("oversampling factors must be >= 1".into()));
        }
        let max_delay = spec.max_delay.unwrap_or_else(|| params.unambiguous_delay(true));
        let half_span = spec
            .doppler_half_span
            .unwrap_or_else(|| params.unambiguous_doppler(true) / 2.0);
        if !(max_delay >= 0.0 && half_span > 0.0) {
            return Err(OtfsError::InvalidArgument("grid spans must be positive".into()));
        }
        let tau_step = params.sample_period() / spec.os_delay as f64;
        let period = params.nm() * spec.os_delay;
        let tau_count = ((max_delay / tau_step + 1e-9).floor() as usize + 1).min(period);
        let nu_step = params.delta_f / (params.m * spec.os_doppler) as f64;
        let nu_count = ((2.0 * half_span / nu_step) - 1e-9).ceil().max(1.0) as usize;
        let tau_axis = (0..tau_count).map(|k| k as f64 * tau_step).collect();
        let nu_axis = (0..nu_count).map(|k| -half_span + k as f64 * nu_step).collect();
        Ok(Self {
            tau_axis,
            nu_axis,
            os_delay: spec.os_delay,
            os_doppler: spec.os_doppler,
        })
    }

    pub fn tau_axis(&self) -> &[f64] {
        &self.tau_axis
    }

    pub fn nu_axis(&self) -> &[f64] {
        &self.nu_axis
    }

    pub fn oversampling(&self) -> (usize, usize) {
        (self.os_delay, self.os_doppler)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.tau_axis.len(), self.nu_axis.len())
    }

    /// Start and step of the delay axis if it is uniform.
    pub fn uniform_delay(&self) -> Option<(f64, f64)> {
        let t = &self.tau_axis;
        if t.len() < 2 {
            return None;
        }
        let step = t[1] - t[0];
        let uniform = t
            .iter()
            .enumerate()
            .all(|(k, &v)| (v - (t[0] + k as f64 * step)).abs() <= 1e-9 * step);
        uniform.then_some((t[0], step))
    }

    /// Index of the axis point nearest to `tau`.
    pub fn nearest_delay(&self, tau: f64) -> usize {
        nearest(&self.tau_axis, tau)
    }

    pub fn nearest_doppler(&self, nu: f64) -> usize {
        nearest(&self.nu_axis, nu)
    }
}

fn nearest(axis: &[f64], x: f64) -> usize {
    axis.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_spans_extended_limits() {
        let p = OtfsParams::new(8, 4, 1e5, 2.5e-5, 1e10, 2, 2).unwrap();
        let g = DdGrid::for_params(&p, &GridSpec::default()).unwrap();
        let (nt, nv) = g.shape();
        // T_cp = 2.5 T, delay step T/16 -> 41 points including the endpoint.
        assert_eq!(nt, 41);
        assert!((g.tau_axis()[40] - 2.5e-5).abs() < 1e-15);
        // [-N/(2T), N/(2T)) with step 1/(M T os) -> N M os points.
        assert_eq!(nv, 64);
        assert!((g.nu_axis()[0] + 4e5).abs() < 1e-6);
        assert!(g.uniform_delay().is_some());
    }

    #[test]
    fn delay_axis_stops_short_of_full_period() {
        let p = OtfsParams::new(4, 2, 1e5, 1.0, 1e10, 1, 1).unwrap();
        let g = DdGrid::for_params(&p, &GridSpec::default()).unwrap();
        assert_eq!(g.shape().0, 16);
    }

    #[test]
    fn rejects_unsorted_axes() {
        assert!(DdGrid::from_axes(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(DdGrid::from_axes(vec![], vec![1.0]).is_err());
        assert!(DdGrid::from_axes(vec![0.0, 1.0], vec![-1.0, 1.0]).is_ok());
    }
}
