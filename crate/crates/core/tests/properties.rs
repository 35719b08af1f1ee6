//! Property tests over randomized inputs.

use num_complex::Complex64;
use otfs_isac::designer::{solve_beamformer, waterfill, IsacWeight};
use otfs_isac::frame::{isfft, sfft};
use otfs_isac::radar::cfar_scale;
use otfs_isac::rng::{complex_gaussian, stream_rng};
use otfs_isac::CMatrix;
use proptest::prelude::*;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
    let mut rng = stream_rng(seed, 0);
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(&mut rng, 1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sfft_inverts_isfft(seed in any::<u64>(), n in 1usize..12, m in 1usize..12) {
        let x = random_matrix(n, m, seed);
        let back = sfft(&isfft(&x));
        prop_assert!((back - &x).norm() <= 1e-12 * x.norm().max(1.0));
    }

    #[test]
    fn waterfill_spends_the_budget(gains in prop::collection::vec(0.0f64..10.0, 1..64), budget in 0.1f64..100.0) {
        prop_assume!(gains.iter().any(|&g| g > 0.0));
        let q = waterfill(&gains, budget).unwrap();
        prop_assert!((q.iter().sum::<f64>() - budget).abs() < 1e-8 * budget.max(1.0));
        for (&g, &qi) in gains.iter().zip(&q) {
            prop_assert!(qi >= 0.0);
            if g == 0.0 { prop_assert_eq!(qi, 0.0); }
        }
    }

    #[test]
    fn beamformer_is_unit_norm_and_optimal(seed in any::<u64>(), n_tx in 1usize..9, rho in 0.0f64..=1.0) {
        let a = random_matrix(n_tx, n_tx, seed);
        let b = random_matrix(n_tx, n_tx, seed.wrapping_add(1));
        let d_rad = &a * a.adjoint();
        let d_com = &b * b.adjoint();
        let sol = solve_beamformer(&d_rad, &d_com, IsacWeight::new(rho).unwrap()).unwrap();
        prop_assert!((sol.beta.norm() - 1.0).abs() < 1e-9);
        let d = &d_rad * Complex64::from(rho) + &d_com * Complex64::from(1.0 - rho);
        let top = d.symmetric_eigen().eigenvalues.max();
        prop_assert!((sol.objective - top).abs() <= 1e-8 * top.max(1.0));
    }

    #[test]
    fn cfar_scale_grows_as_false_alarms_shrink(n_train in 4usize..200, looks in 1.0f64..16.0) {
        let loose = cfar_scale(1e-2, n_train, looks).unwrap();
        let tight = cfar_scale(1e-5, n_train, looks).unwrap();
        prop_assert!(tight > loose && loose > 0.0);
    }
}
