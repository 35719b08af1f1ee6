//! Unitary DFTs and the structured transforms used by the OTFS chain.
//!
//! All transforms use the unitary convention `[F_N]_{l,n} = e^{-j2πnl/N}/√N`.
//! Matrices are N×M with column-major storage, so `as_slice()` is `vec(X)`.

use std::cell::RefCell;
use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::CMatrix;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

fn run(buf: &mut [Complex64], inverse: bool, unitary: bool) {
    let n = buf.len();
    if n == 0 {
        return;
    }
    plan(n, inverse).process(buf);
    if unitary {
        let s = 1.0 / (n as f64).sqrt();
        buf.iter_mut().for_each(|x| *x *= s);
    }
}

/// In-place unitary forward DFT (`F x`).
pub fn fft(buf: &mut [Complex64]) {
    run(buf, false, true);
}

/// In-place unitary inverse DFT (`F^H x`).
pub fn ifft(buf: &mut [Complex64]) {
    run(buf, true, true);
}

/// Unnormalized forward DFT: `X[k] = Σ x[n] e^{-j2πkn/L}`.
pub fn fft_raw(buf: &mut [Complex64]) {
    run(buf, false, false);
}

/// Unnormalized inverse DFT: `x[n] = Σ X[k] e^{+j2πkn/L}`.
pub fn ifft_raw(buf: &mut [Complex64]) {
    run(buf, true, false);
}

/// Apply a unitary DFT (or its inverse) to every column of `x`.
pub fn transform_columns(x: &mut CMatrix, inverse: bool) {
    let rows = x.nrows();
    if rows == 0 {
        return;
    }
    for col in x.as_mut_slice().chunks_exact_mut(rows) {
        run(col, inverse, true);
    }
}

/// Apply a unitary DFT (or its inverse) along every row of `x`.
pub fn transform_rows(x: &mut CMatrix, inverse: bool) {
    let (rows, cols) = x.shape();
    let mut scratch = vec![Complex64::new(0.0, 0.0); cols];
    for r in 0..rows {
        for c in 0..cols {
            scratch[c] = x[(r, c)];
        }
        run(&mut scratch, inverse, true);
        for c in 0..cols {
            x[(r, c)] = scratch[c];
        }
    }
}

/// `(F_M ⊗ I_N) v` for `v = vec(V)` with `V` N×M: a DFT along each row of `V`.
pub fn kron_dft_rows(v: &[Complex64], n: usize, m: usize, inverse: bool) -> Vec<Complex64> {
    assert_eq!(v.len(), n * m, "vector length must be N*M");
    let mut x = CMatrix::from_column_slice(n, m, v);
    transform_rows(&mut x, inverse);
    x.as_slice().to_vec()
}

/// Dense unitary DFT matrix, for oracle checks at small sizes.
pub fn dft_matrix(n: usize) -> CMatrix {
    let s = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |l, k| {
        Complex64::from_polar(s, -TAU * ((l * k) % n) as f64 / n as f64)
    })
}

/// Kronecker product of two dense matrices.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMatrix::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian, stream_rng};

    fn random_vec(len: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = stream_rng(seed, 0);
        (0..len).map(|_| complex_gaussian(&mut rng, 1.0)).collect()
    }

    #[test]
    fn fft_matches_dense_dft() {
        for n in [1, 2, 3, 8, 12] {
            let x = random_vec(n, n as u64);
            let dense = dft_matrix(n) * nalgebra::DVector::from_vec(x.clone());
            let mut y = x.clone();
            fft(&mut y);
            for (a, b) in y.iter().zip(dense.iter()) {
                assert!((a - b).norm() < 1e-12);
            }
            ifft(&mut y);
            for (a, b) in y.iter().zip(x.iter()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn kron_rows_matches_dense_kron() {
        let (n, m) = (3, 4);
        let v = random_vec(n * m, 9);
        let op = kron(&dft_matrix(m), &CMatrix::identity(n, n));
        let dense = op * nalgebra::DVector::from_vec(v.clone());
        let fast = kron_dft_rows(&v, n, m, false);
        for (a, b) in fast.iter().zip(dense.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
        let back = kron_dft_rows(&fast, n, m, true);
        for (a, b) in back.iter().zip(v.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
