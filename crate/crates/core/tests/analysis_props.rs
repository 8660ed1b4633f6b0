use gastridge::analysis::{mse, pearson, rmse, rrr, svd_rank_matrix};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn series(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n)
}

proptest! {
    #[test]
    fn pearson_is_affine_invariant(a in series(30), b in series(30), s in 0.1f64..10.0, c in -5.0f64..5.0) {
        if let Some(r) = pearson(&a, &b) {
            let scaled: Vec<f64> = a.iter().map(|x| s * x + c).collect();
            let r2 = pearson(&scaled, &b).unwrap();
            prop_assert!((r - r2).abs() < 1e-9);
            let flipped: Vec<f64> = a.iter().map(|x| -s * x + c).collect();
            prop_assert!((r + pearson(&flipped, &b).unwrap()).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn rmse_squared_is_mse(a in series(25), b in series(25)) {
        let m = mse(&a, &b);
        prop_assert!((rmse(&a, &b).powi(2) - m).abs() <= 1e-12 * (1.0 + m));
        prop_assert_eq!(mse(&a, &a), 0.0);
    }

    #[test]
    fn rrr_bounds(base in 1e-6f64..1.0, frac in 0.0f64..2.0) {
        let g = rrr(base, base * frac).unwrap();
        prop_assert!(g <= 100.0);
        prop_assert!((g - 100.0 * (1.0 - frac)).abs() < 1e-9);
    }

    #[test]
    fn svd_reconstructs_and_ranks(data in prop::collection::vec(-1.0f64..1.0, 20 * 4)) {
        let s = DMatrix::from_vec(20, 4, data);
        let r = svd_rank_matrix(&s, &[0, 1, 2, 3]).unwrap();
        let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(r.singular_values.clone()));
        prop_assert!((&r.u * sigma * &r.v_t - &s).amax() < 1e-9);
        prop_assert!(r.singular_values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(r.cumulative_info.windows(2).all(|w| w[1] >= w[0] - 1e-15));
        prop_assert!((r.cumulative_info[3] - 1.0).abs() < 1e-12);
        let mut sorted = r.order.clone();
        sorted.sort();
        prop_assert_eq!(sorted, vec![0, 1, 2, 3]);
    }

    #[test]
    fn svd_ranking_follows_columns_under_permutation(data in prop::collection::vec(-1.0f64..1.0, 15 * 3)) {
        let s = DMatrix::from_vec(15, 3, data);
        let perm = [2usize, 0, 1];
        let p = s.select_columns(&perm);
        let a = svd_rank_matrix(&s, &[0, 1, 2]).unwrap();
        let b = svd_rank_matrix(&p, &perm).unwrap();
        for (k, &c) in perm.iter().enumerate() {
            prop_assert!((a.xbar[c].abs() - b.xbar[k].abs()).abs() < 1e-9);
        }
    }
}
