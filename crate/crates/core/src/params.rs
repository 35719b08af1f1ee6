//! Frame numerology and physical conversions.

use serde::{Deserialize, Serialize};

use crate::{OtfsError, Result};

/// Propagation speed used for range/velocity conversions [m/s].
///
/// The rounded value reproduces the published parameter tables exactly.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// OTFS frame numerology and array sizes.
///
/// `n` is the number of subcarriers and `m` the number of OFDM-like symbols;
/// the symbol duration is always `1/delta_f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OtfsParams {
    pub n: usize,
    pub m: usize,
    /// Subcarrier spacing [Hz].
    pub delta_f: f64,
    /// Cyclic-prefix duration [s].
    pub t_cp: f64,
    /// Carrier frequency [Hz].
    pub fc: f64,
    pub n_tx: usize,
    pub n_rx: usize,
}

impl OtfsParams {
    pub fn new(
        n: usize,
        m: usize,
        delta_f: f64,
        t_cp: f64,
        fc: f64,
        n_tx: usize,
        n_rx: usize,
    ) -> Result<Self> {
        let p = Self {
            n,
            m,
            delta_f,
            t_cp,
            fc,
            n_tx,
            n_rx,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.n_tx == 0 || self.n_rx == 0 {
            return Err(OtfsError::InvalidArgument(format!(
                "N, M, N_T, N_R must be >= 1 (got {}, {}, {}, {})",
                self.n, self.m, self.n_tx, self.n_rx
            )));
        }
        for (name, v) in [
            ("delta_f", self.delta_f),
            ("t_cp", self.t_cp),
            ("fc", self.fc),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(OtfsError::InvalidArgument(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Number of DD bins / time samples per frame.
    pub fn nm(&self) -> usize {
        self.n * self.m
    }

    /// Symbol duration `T = 1/delta_f` [s].
    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.delta_f
    }

    /// Time-sample spacing `T/N` [s].
    pub fn sample_period(&self) -> f64 {
        self.symbol_duration() / self.n as f64
    }

    pub fn bandwidth(&self) -> f64 {
        self.n as f64 * self.delta_f
    }

    pub fn frame_duration(&self) -> f64 {
        self.m as f64 * self.symbol_duration()
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.fc
    }

    /// Round-trip delay of a target at `range` metres.
    pub fn range_to_delay(&self, range: f64) -> f64 {
        2.0 * range / SPEED_OF_LIGHT
    }

    pub fn delay_to_range(&self, delay: f64) -> f64 {
        delay * SPEED_OF_LIGHT / 2.0
    }

    /// Two-way Doppler shift of a target with radial velocity `v` [m/s].
    pub fn velocity_to_doppler(&self, v: f64) -> f64 {
        2.0 * v / self.wavelength()
    }

    pub fn doppler_to_velocity(&self, nu: f64) -> f64 {
        nu * self.wavelength() / 2.0
    }

    /// Range resolution `c / (2 N delta_f)` [m].
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth())
    }

    /// Velocity resolution `lambda / (2 M T)` [m/s].
    pub fn velocity_resolution(&self) -> f64 {
        self.wavelength() / (2.0 * self.frame_duration())
    }

    /// Unambiguous delay [s]: `min{M/Δf, T_cp}` when ISI is exploited,
    /// `min{1/Δf, T_cp}` otherwise.
    pub fn unambiguous_delay(&self, with_isi: bool) -> f64 {
        let span = if with_isi {
            self.m as f64 / self.delta_f
        } else {
            1.0 / self.delta_f
        };
        span.min(self.t_cp)
    }

    /// Unambiguous Doppler span [Hz]: `N/T` when ICI is exploited, `1/T` otherwise.
    pub fn unambiguous_doppler(&self, with_ici: bool) -> f64 {
        let t = self.symbol_duration();
        if with_ici {
            self.n as f64 / t
        } else {
            1.0 / t
        }
    }

    pub fn ambiguity_limits(&self) -> AmbiguityLimits {
        let lambda = self.wavelength();
        let standard_delay = self.unambiguous_delay(false);
        let isi_delay = self.unambiguous_delay(true);
        let standard_doppler = self.unambiguous_doppler(false);
        let ici_doppler = self.unambiguous_doppler(true);
        AmbiguityLimits {
            standard_delay,
            standard_delay_uncapped: 1.0 / self.delta_f,
            isi_delay,
            standard_doppler,
            ici_doppler,
            standard_range: self.delay_to_range(standard_delay),
            standard_range_uncapped: self.delay_to_range(1.0 / self.delta_f),
            isi_range: self.delay_to_range(isi_delay),
            // Doppler spans are two-sided: v in [-ν/2, ν/2] * λ/2.
            standard_velocity: standard_doppler * lambda / 4.0,
            ici_velocity: ici_doppler * lambda / 4.0,
        }
    }
}

/// Maximum unambiguous delay/Doppler and the equivalent range/velocity.
///
/// Velocities are the one-sided limits (`±v`). `standard_*_uncapped` ignore the
/// CP length, which is how some parameter tables quote the standard range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityLimits {
    pub standard_delay: f64,
    pub standard_delay_uncapped: f64,
    pub isi_delay: f64,
    pub standard_doppler: f64,
    pub ici_doppler: f64,
    pub standard_range: f64,
    pub standard_range_uncapped: f64,
    pub isi_range: f64,
    pub standard_velocity: f64,
    pub ici_velocity: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn isi_regime() -> OtfsParams {
        OtfsParams::new(64, 128, 480e3, 12.5e-6, 28e9, 8, 8).unwrap()
    }

    #[test]
    fn rejects_bad_numerology() {
        assert!(OtfsParams::new(0, 4, 1e3, 1e-3, 1e9, 1, 1).is_err());
        assert!(OtfsParams::new(4, 4, -1.0, 1e-3, 1e9, 1, 1).is_err());
        assert!(OtfsParams::new(4, 4, 1e3, 0.0, 1e9, 1, 1).is_err());
        assert!(OtfsParams::new(4, 4, 1e3, 1e-3, f64::NAN, 1, 1).is_err());
    }

    #[test]
    fn symbol_duration_is_reciprocal_spacing() {
        let p = isi_regime();
        assert!((p.symbol_duration() * p.delta_f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isi_regime_ranges() {
        let lim = isi_regime().ambiguity_limits();
        assert!((lim.standard_range - 312.5).abs() < 1e-9);
        assert!((lim.isi_range - 1875.0).abs() < 1e-9);
        assert!((lim.standard_velocity - 1285.714285714).abs() < 1e-6);
    }

    #[test]
    fn degenerate_single_symbol_limits_coincide() {
        let p = OtfsParams::new(16, 1, 1e4, 1.0e3, 1e9, 1, 1).unwrap();
        assert_eq!(p.unambiguous_delay(true), p.unambiguous_delay(false));
        assert!((p.unambiguous_delay(true) - 1e-4).abs() < 1e-18);
    }
}
