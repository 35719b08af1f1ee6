//! Steering vectors, radar and communication observation models, and the
//! DD-domain channel matrix.
//!
//! Radar observations use the compact time-spatial form
//! `Y = Σ_k α_k C(ν_k) F^H B(τ_k) F S a_T(θ_k) a_R^T(θ_k) + Z`, where `F` is
//! the unitary NM-point DFT, `B = diag(b(τ))` and `C = diag(c(ν))`. A second
//! path samples the continuous-time CP-extended waveform directly and serves
//! as an independent reference.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::frame::{WaveformMatrix, WindowSet};
use crate::rng::complex_gaussian;
use crate::transforms::{fft, ifft, kron_dft_rows};
use crate::{CMatrix, CVector, OtfsError, OtfsParams, Result};

/// One propagation path: complex gain, delay [s], Doppler [Hz], angle [rad].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathTuple {
    pub alpha: Complex64,
    pub tau: f64,
    pub nu: f64,
    pub theta: f64,
}

impl PathTuple {
    pub fn new(alpha: Complex64, tau: f64, nu: f64, theta: f64) -> Self {
        Self {
            alpha,
            tau,
            nu,
            theta,
        }
    }
}

/// Point targets seen by the monostatic radar.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RadarScene {
    pub targets: Vec<PathTuple>,
}

/// Multipath channel to the communication receiver; index 0 is the LOS path.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CommChannel {
    pub paths: Vec<PathTuple>,
}

/// Uniform linear TX and RX arrays.
///
/// Spacings are in wavelengths. The default RX spacing of `N_T/2` together
/// with λ/2 TX spacing yields an `N_T N_R`-element λ/2 virtual array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub n_tx: usize,
    pub n_rx: usize,
    pub tx_spacing: f64,
    pub rx_spacing: f64,
}

impl ArrayGeometry {
    pub fn for_params(params: &OtfsParams) -> Self {
        Self {
            n_tx: params.n_tx,
            n_rx: params.n_rx,
            tx_spacing: 0.5,
            rx_spacing: params.n_tx as f64 / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tx_spacing > 0.0 && self.rx_spacing > 0.0) {
            return Err(OtfsError::InvalidArgument("array spacings must be positive".into()));
        }
        Ok(())
    }

    pub fn tx_steering(&self, theta: f64) -> CVector {
        ula_steering(theta, self.n_tx, self.tx_spacing)
    }

    pub fn rx_steering(&self, theta: f64) -> CVector {
        ula_steering(theta, self.n_rx, self.rx_spacing)
    }
}

/// Radar samples arranged as NM (time) × N_R (antenna).
#[derive(Debug, Clone, PartialEq)]
pub struct RadarObservation {
    pub y: CMatrix,
    pub sigma2: f64,
}

/// Frequency-domain steering vector `b(τ) = b_N(τ) ⊗ b^ISI(τ)`.
///
/// Entry `k = nM + m` is `e^{-j2π k Δf τ / M}`.
pub fn freq_steering(tau: f64, params: &OtfsParams) -> CVector {
    let step = -TAU * params.delta_f * tau / params.m as f64;
    CVector::from_fn(params.nm(), |k, _| Complex64::from_polar(1.0, step * k as f64))
}

/// Temporal steering vector `c(ν) = c_M(ν) ⊗ c^ICI(ν)`.
///
/// Entry `l = mN + n` is `e^{j2π l T ν / N}`, the Doppler phase at sample `l`.
pub fn temporal_steering(nu: f64, params: &OtfsParams) -> CVector {
    let step = TAU * params.sample_period() * nu;
    CVector::from_fn(params.nm(), |l, _| Complex64::from_polar(1.0, step * l as f64))
}

/// ULA response with the first element as phase reference.
pub fn ula_steering(theta: f64, count: usize, spacing: f64) -> CVector {
    let step = TAU * spacing * theta.sin();
    CVector::from_fn(count, |k, _| Complex64::from_polar(1.0, step * k as f64))
}

/// `C(ν) F^H B(τ) F x` for an NM-sample signal `x`.
pub fn delay_doppler_shift(x: &[Complex64], tau: f64, nu: f64, params: &OtfsParams) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    fft(&mut buf);
    let b = freq_steering(tau, params);
    buf.iter_mut().zip(b.iter()).for_each(|(v, w)| *v *= w);
    ifft(&mut buf);
    let c = temporal_steering(nu, params);
    buf.iter_mut().zip(c.iter()).for_each(|(v, w)| *v *= w);
    buf
}

pub(crate) fn validate_paths<'a>(paths: impl Iterator<Item = &'a PathTuple>, params: &OtfsParams) -> Result<()> {
    for p in paths {
        if !(p.tau >= 0.0) || p.tau > params.t_cp * (1.0 + 1e-12) {
            return Err(OtfsError::Precondition(format!(
                "path delay {:.6e} s outside [0, T_cp = {:.6e} s]",
                p.tau, params.t_cp
            )));
        }
        if !(p.nu.is_finite() && p.theta.is_finite() && p.alpha.re.is_finite() && p.alpha.im.is_finite()) {
            return Err(OtfsError::InvalidArgument("non-finite path parameter".into()));
        }
    }
    Ok(())
}

fn add_noise<R: Rng + ?Sized>(values: &mut [Complex64], sigma2: f64, rng: &mut R) -> Result<()> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(OtfsError::InvalidArgument(format!("noise variance {sigma2} must be >= 0")));
    }
    if sigma2 > 0.0 {
        values.iter_mut().for_each(|v| *v += complex_gaussian(rng, sigma2));
    }
    Ok(())
}

fn check_geometry(s: &WaveformMatrix, geometry: &ArrayGeometry) -> Result<()> {
    geometry.validate()?;
    if geometry.n_tx != s.n_tx() {
        return Err(OtfsError::DimensionMismatch(format!(
            "array has {} TX elements, waveform has {} columns",
            geometry.n_tx,
            s.n_tx()
        )));
    }
    Ok(())
}

/// Radar observation from the compact matrix model.
pub fn synth_radar_compact<R: Rng + ?Sized>(
    s: &WaveformMatrix,
    scene: &RadarScene,
    geometry: &ArrayGeometry,
    sigma2: f64,
    rng: &mut R,
) -> Result<RadarObservation> {
    let params = s.params();
    check_geometry(s, geometry)?;
    validate_paths(scene.targets.iter(), params)?;
    let mut y = CMatrix::zeros(params.nm(), geometry.n_rx);
    for t in &scene.targets {
        let beam = s.samples() * geometry.tx_steering(t.theta);
        let echo = delay_doppler_shift(beam.as_slice(), t.tau, t.nu, params);
        let a_r = geometry.rx_steering(t.theta);
        for r in 0..geometry.n_rx {
            let w = t.alpha * a_r[r];
            y.column_mut(r).iter_mut().zip(&echo).for_each(|(o, &e)| *o += w * e);
        }
    }
    add_noise(y.as_mut_slice(), sigma2, rng)?;
    Ok(RadarObservation { y, sigma2 })
}

/// Echo of the continuous CP-extended transmit signal, sampled at `t = lT/N`.
fn continuous_echo(s: &WaveformMatrix, a_t: &CVector, tau: f64, nu: f64) -> Vec<Complex64> {
    let params = s.params();
    let shift = tau / params.sample_period();
    let ts = params.sample_period();
    (0..params.nm())
        .map(|l| {
            let u = l as f64 - shift;
            let tx: Complex64 = (0..s.n_tx())
                .map(|i| a_t[i] * s.continuous_cp_at_sample(i, u))
                .sum();
            Complex64::from_polar(1.0, TAU * nu * l as f64 * ts) * tx
        })
        .collect()
}

/// Radar observation by direct sampling of the continuous-time echo.
///
/// Each target contributes `α e^{j2πνt} a_R a_T^T s_CP(t - τ)` at
/// `t = lT/N`; the CP makes this the cyclic shift `s([t - τ]_{MT})`.
pub fn synth_radar_oracle<R: Rng + ?Sized>(
    s: &WaveformMatrix,
    scene: &RadarScene,
    geometry: &ArrayGeometry,
    sigma2: f64,
    rng: &mut R,
) -> Result<RadarObservation> {
    let params = s.params();
    check_geometry(s, geometry)?;
    validate_paths(scene.targets.iter(), params)?;
    let mut y = CMatrix::zeros(params.nm(), geometry.n_rx);
    for t in &scene.targets {
        let echo = continuous_echo(s, &geometry.tx_steering(t.theta), t.tau, t.nu);
        let a_r = geometry.rx_steering(t.theta);
        for r in 0..geometry.n_rx {
            let w = t.alpha * a_r[r];
            y.column_mut(r).iter_mut().zip(&echo).for_each(|(o, &e)| *o += w * e);
        }
    }
    add_noise(y.as_mut_slice(), sigma2, rng)?;
    Ok(RadarObservation { y, sigma2 })
}

/// Time-domain samples at the single-antenna communication receiver.
pub fn synth_comm<R: Rng + ?Sized>(
    s: &WaveformMatrix,
    channel: &CommChannel,
    geometry: &ArrayGeometry,
    sigma2: f64,
    rng: &mut R,
) -> Result<CVector> {
    let params = s.params();
    check_geometry(s, geometry)?;
    validate_paths(channel.paths.iter(), params)?;
    let mut y = CVector::zeros(params.nm());
    for p in &channel.paths {
        let beam = s.samples() * geometry.tx_steering(p.theta);
        let rx = delay_doppler_shift(beam.as_slice(), p.tau, p.nu, params);
        y.iter_mut().zip(&rx).for_each(|(o, &e)| *o += p.alpha * e);
    }
    add_noise(y.as_mut_slice(), sigma2, rng)?;
    Ok(y)
}

/// Communication samples from the continuous-time MISO channel.
pub fn synth_comm_oracle<R: Rng + ?Sized>(
    s: &WaveformMatrix,
    channel: &CommChannel,
    geometry: &ArrayGeometry,
    sigma2: f64,
    rng: &mut R,
) -> Result<CVector> {
    let params = s.params();
    check_geometry(s, geometry)?;
    validate_paths(channel.paths.iter(), params)?;
    let mut y = CVector::zeros(params.nm());
    for p in &channel.paths {
        let rx = continuous_echo(s, &geometry.tx_steering(p.theta), p.tau, p.nu);
        y.iter_mut().zip(&rx).for_each(|(o, &e)| *o += p.alpha * e);
    }
    add_noise(y.as_mut_slice(), sigma2, rng)?;
    Ok(y)
}

/// DD-domain channel matrix
/// `H_DD = (F_M ⊗ I_N) Σ_k α_k C(ν_k) F^H B(τ_k) F (F_M^H ⊗ I_N) diag(W a_T(θ_k))`.
///
/// Dense NM×NM; intended for NM up to a few thousand.
pub fn build_hdd(
    windows: &WindowSet,
    channel: &CommChannel,
    params: &OtfsParams,
    geometry: &ArrayGeometry,
) -> Result<CMatrix> {
    let (n, m) = (params.n, params.m);
    if windows.shape() != (n, m) {
        return Err(OtfsError::DimensionMismatch("window shape does not match N×M".into()));
    }
    let nm = params.nm();
    let precoders = channel
        .paths
        .iter()
        .map(|p| windows.combine(&geometry.tx_steering(p.theta)))
        .collect::<Result<Vec<_>>>()?;
    let mut h = CMatrix::zeros(nm, nm);
    let mut unit = vec![Complex64::new(0.0, 0.0); nm];
    for j in 0..nm {
        unit[j] = Complex64::new(1.0, 0.0);
        let tx = kron_dft_rows(&unit, n, m, true);
        unit[j] = Complex64::new(0.0, 0.0);
        let mut col = vec![Complex64::new(0.0, 0.0); nm];
        for (p, pre) in channel.paths.iter().zip(&precoders) {
            let w = p.alpha * pre[j];
            if w == Complex64::new(0.0, 0.0) {
                continue;
            }
            let rx = delay_doppler_shift(&tx, p.tau, p.nu, params);
            col.iter_mut().zip(&rx).for_each(|(o, &e)| *o += w * e);
        }
        let dd = kron_dft_rows(&col, n, m, false);
        h.column_mut(j).copy_from_slice(&dd);
    }
    Ok(h)
}

/// Largest unambiguous delay [s]; see [`OtfsParams::unambiguous_delay`].
pub fn unambiguous_delay(params: &OtfsParams, with_isi: bool) -> f64 {
    params.unambiguous_delay(with_isi)
}

/// Unambiguous Doppler span [Hz]; see [`OtfsParams::unambiguous_doppler`].
pub fn unambiguous_doppler(params: &OtfsParams, with_ici: bool) -> f64 {
    params.unambiguous_doppler(with_ici)
}
