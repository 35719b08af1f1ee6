//! DD-domain demodulation and LMMSE estimation at the communication receiver.

use nalgebra::Cholesky;
use num_complex::Complex64;

use crate::frame::PulseShape;
use crate::transforms::{kron_dft_rows, transform_columns, transform_rows};
use crate::{CMatrix, CVector, OtfsError, Result};

/// Vectorized DD-domain observation `y_dd` with its noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct DdObservation {
    pub y_dd: CVector,
    pub sigma2: f64,
}

/// Wigner transform followed by SFFT: `F_N^H (F_N G_rx Y) F_M` with
/// `Y = reshape(y_com, N, M)`.
pub fn demodulate_dd(
    y_com: &CVector,
    pulse: &PulseShape,
    n: usize,
    m: usize,
    sigma2: f64,
) -> Result<DdObservation> {
    if y_com.len() != n * m || pulse.len() != n {
        return Err(OtfsError::DimensionMismatch(format!(
            "y_com has {} samples and pulse {} taps for a {n}x{m} frame",
            y_com.len(),
            pulse.len()
        )));
    }
    if pulse.is_identity() {
        return demodulate_dd_rectangular(y_com, n, m, sigma2);
    }
    Ok(DdObservation {
        y_dd: CVector::from_column_slice(wigner_sfft(y_com, pulse, n, m).as_slice()),
        sigma2,
    })
}

fn wigner_sfft(y_com: &CVector, pulse: &PulseShape, n: usize, m: usize) -> CMatrix {
    let mut y = CMatrix::from_column_slice(n, m, y_com.as_slice());
    for (r, &g) in pulse.gains().iter().enumerate() {
        y.row_mut(r).iter_mut().for_each(|v| *v *= g);
    }
    // Wigner transform (F_N G_rx Y), then SFFT (F_N^H · F_M).
    transform_columns(&mut y, false);
    transform_columns(&mut y, true);
    transform_rows(&mut y, false);
    y
}

/// Rectangular-pulse shortcut `(F_M ⊗ I_N) y_com`.
pub fn demodulate_dd_rectangular(y_com: &CVector, n: usize, m: usize, sigma2: f64) -> Result<DdObservation> {
    if y_com.len() != n * m {
        return Err(OtfsError::DimensionMismatch(format!(
            "y_com has {} samples for a {n}x{m} frame",
            y_com.len()
        )));
    }
    Ok(DdObservation {
        y_dd: CVector::from_vec(kron_dft_rows(y_com.as_slice(), n, m, false)),
        sigma2,
    })
}

/// General-path demodulation regardless of pulse shape (for cross-checks).
pub fn demodulate_dd_general(y_com: &CVector, pulse: &PulseShape, n: usize, m: usize) -> CVector {
    CVector::from_column_slice(wigner_sfft(y_com, pulse, n, m).as_slice())
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(OtfsError::InvalidArgument(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    Ok(())
}

/// `I + H^H H / σ²`.
fn information_matrix(h: &CMatrix, sigma2: f64) -> Result<CMatrix> {
    if h.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(OtfsError::Numeric("channel matrix has non-finite entries".into()));
    }
    let n = h.ncols();
    let mut a = h.adjoint() * h / Complex64::from(sigma2);
    for i in 0..n {
        a[(i, i)] += 1.0;
    }
    Ok(a)
}

/// `x̂ = H^H (H H^H + σ² I)^{-1} y_dd`.
pub fn lmmse_estimate(obs: &DdObservation, h: &CMatrix) -> Result<CVector> {
    check_sigma2(obs.sigma2)?;
    if h.nrows() != obs.y_dd.len() {
        return Err(OtfsError::DimensionMismatch("H rows != observation length".into()));
    }
    let mut a = h * h.adjoint();
    for i in 0..a.nrows() {
        a[(i, i)] += obs.sigma2;
    }
    let chol = Cholesky::new(a).ok_or_else(|| OtfsError::Numeric("H H^H + σ²I not positive definite".into()))?;
    Ok(h.adjoint() * chol.solve(&obs.y_dd))
}

/// Error covariance `(I + H^H H / σ²)^{-1}`.
pub fn lmmse_covariance(h: &CMatrix, sigma2: f64) -> Result<CMatrix> {
    check_sigma2(sigma2)?;
    let a = information_matrix(h, sigma2)?;
    let chol = Cholesky::new(a).ok_or_else(|| OtfsError::Numeric("information matrix not positive definite".into()))?;
    let mut r = chol.inverse();
    hermitize(&mut r);
    Ok(r)
}

pub(crate) fn hermitize(a: &mut CMatrix) {
    let n = a.nrows();
    for i in 0..n {
        a[(i, i)].im = 0.0;
        for j in i + 1..n {
            let v = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
    }
}

/// `log det A` of a Hermitian positive definite matrix via Cholesky.
pub fn log_det_hpd(a: &CMatrix) -> Result<f64> {
    let chol = Cholesky::new(a.clone()).ok_or_else(|| OtfsError::Numeric("matrix not positive definite".into()))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.re.ln()).sum::<f64>())
}

/// Achievable rate `-log det R_LMMSE` in nats.
pub fn achievable_rate(r_lmmse: &CMatrix) -> Result<f64> {
    if r_lmmse.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(OtfsError::Numeric("covariance has non-finite entries".into()));
    }
    Ok(-log_det_hpd(r_lmmse)?)
}

/// `log det (I + H^H H / σ²)`, the same rate without forming the inverse.
pub fn rate_from_channel(h: &CMatrix, sigma2: f64) -> Result<f64> {
    check_sigma2(sigma2)?;
    log_det_hpd(&information_matrix(h, sigma2)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::isfft;
    use crate::rng::{complex_gaussian, stream_rng};
    use crate::transforms::dft_matrix;

    fn random_matrix(r: usize, c: usize, seed: u64) -> CMatrix {
        let mut rng = stream_rng(seed, 0);
        CMatrix::from_fn(r, c, |_, _| complex_gaussian(&mut rng, 1.0))
    }

    #[test]
    fn zero_input_demodulates_to_zero() {
        let obs = demodulate_dd(&CVector::zeros(6), &PulseShape::rectangular(3), 3, 2, 1.0).unwrap();
        assert_eq!(obs.y_dd.norm(), 0.0);
    }

    #[test]
    fn demodulation_inverts_modulation() {
        let x = random_matrix(4, 3, 1);
        let y = x.clone() * dft_matrix(3).adjoint();
        let obs = demodulate_dd(&CVector::from_column_slice(y.as_slice()), &PulseShape::rectangular(4), 4, 3, 1.0).unwrap();
        assert!((obs.y_dd - CVector::from_column_slice(x.as_slice())).norm() < 1e-12);
        // Round trip through the time signal generated by the transmitter.
        let s = crate::frame::heisenberg_time_signal(&isfft(&x), &PulseShape::rectangular(4)).unwrap();
        let obs = demodulate_dd(&CVector::from_vec(s), &PulseShape::rectangular(4), 4, 3, 1.0).unwrap();
        assert!((obs.y_dd - CVector::from_column_slice(x.as_slice())).norm() < 1e-12);
    }

    #[test]
    fn general_and_kron_paths_agree() {
        let y = CVector::from_column_slice(random_matrix(12, 1, 2).as_slice());
        let a = demodulate_dd_general(&y, &PulseShape::rectangular(4), 4, 3);
        let b = demodulate_dd_rectangular(&y, 4, 3, 1.0).unwrap().y_dd;
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn lmmse_trivial_cases() {
        let y = CVector::from_column_slice(random_matrix(4, 1, 3).as_slice());
        let obs = DdObservation { y_dd: y.clone(), sigma2: 1e-9 };
        let x = lmmse_estimate(&obs, &CMatrix::identity(4, 4)).unwrap();
        assert!((x - &y).norm() < 1e-8);
        let x0 = lmmse_estimate(&DdObservation { y_dd: y.clone(), sigma2: 1.0 }, &CMatrix::zeros(4, 4)).unwrap();
        assert_eq!(x0.norm(), 0.0);
        assert!(lmmse_estimate(&DdObservation { y_dd: y, sigma2: 0.0 }, &CMatrix::identity(4, 4)).is_err());
    }

    #[test]
    fn lmmse_matches_alternate_form() {
        let h = random_matrix(4, 4, 4);
        let y = CVector::from_column_slice(random_matrix(4, 1, 5).as_slice());
        let sigma2 = 0.3;
        let x = lmmse_estimate(&DdObservation { y_dd: y.clone(), sigma2 }, &h).unwrap();
        let a = CMatrix::identity(4, 4) + h.adjoint() * &h / Complex64::from(sigma2);
        let alt = a.try_inverse().unwrap() * h.adjoint() * y / Complex64::from(sigma2);
        assert!((x - &alt).norm() < 1e-10 * alt.norm());
    }

    #[test]
    fn rate_closed_forms() {
        let r = lmmse_covariance(&CMatrix::zeros(5, 5), 1.0).unwrap();
        assert!((r.clone() - CMatrix::identity(5, 5)).norm() < 1e-15);
        assert!(achievable_rate(&r).unwrap().abs() < 1e-15);
        let g = Complex64::new(0.6, -0.8) * 2.0;
        let sigma2 = 0.5;
        let r = lmmse_covariance(&(CMatrix::identity(6, 6) * g), sigma2).unwrap();
        let expect = 6.0 * (1.0 + g.norm_sqr() / sigma2).ln();
        assert!((achievable_rate(&r).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn rate_matches_eigenvalue_sum() {
        let h = random_matrix(8, 8, 6);
        let sigma2 = 0.7;
        let eig = (h.adjoint() * &h).symmetric_eigenvalues();
        let expect: f64 = eig.iter().map(|l| (1.0 + l / sigma2).ln()).sum();
        let r = lmmse_covariance(&h, sigma2).unwrap();
        assert!((achievable_rate(&r).unwrap() - expect).abs() < 1e-9);
        assert!((rate_from_channel(&h, sigma2).unwrap() - expect).abs() < 1e-9);
        // Hermitian with spectrum in (0, 1].
        assert!((r.clone() - r.adjoint()).norm() < 1e-12);
        for l in r.symmetric_eigenvalues().iter() {
            assert!(*l > 0.0 && *l <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn rate_decreases_with_noise() {
        let h = random_matrix(6, 6, 7);
        let rates: Vec<f64> = [0.01, 0.1, 1.0, 10.0]
            .iter()
            .map(|&s| rate_from_channel(&h, s).unwrap())
            .collect();
        assert!(rates.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn non_finite_channel_is_rejected() {
        let mut h = CMatrix::identity(2, 2);
        h[(0, 1)] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(lmmse_covariance(&h, 1.0), Err(OtfsError::Numeric(_))));
    }
}
