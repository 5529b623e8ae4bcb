use attncap_core::numerics::{
    allocate_epsilons, matrix_norm_pq, norm1, norm2, norm_inf, project_unit_ball, softmax, softmax_jacobian, spectral_norm,
    split_objective, sub, Lp, Matrix,
};
use proptest::prelude::*;

fn vec_pair(max_len: usize, scale: f64) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_len).prop_flat_map(move |n| {
        (prop::collection::vec(-scale..scale, n), prop::collection::vec(-scale..scale, n))
    })
}

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0f64..10.0, r * c).prop_map(move |data| Matrix::new(r, c, data).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn softmax_is_two_lipschitz_from_sup_to_l1((u, v) in vec_pair(12, 20.0)) {
        let su = softmax(&u).unwrap().into_vec();
        let sv = softmax(&v).unwrap().into_vec();
        prop_assert!(norm1(&sub(&su, &sv)) <= 2.0 * norm_inf(&sub(&u, &v)) + 1e-12);
    }

    #[test]
    fn softmax_jacobian_entry_sum_is_at_most_two((u, _) in vec_pair(12, 30.0)) {
        let j = softmax_jacobian(&u).unwrap();
        prop_assert!(matrix_norm_pq(&j, Lp::One, Lp::One) <= 2.0 + 1e-12);
    }

    #[test]
    fn softmax_lands_on_the_simplex((u, _) in vec_pair(16, 700.0)) {
        let p = softmax(&u).unwrap().into_vec();
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_ball_projection_is_contractive((x, y) in vec_pair(8, 5.0)) {
        let d = norm2(&sub(&project_unit_ball(&x), &project_unit_ball(&y)));
        prop_assert!(d <= norm2(&sub(&x, &y)) + 1e-12);
        prop_assert!(norm2(&project_unit_ball(&x)) <= 1.0 + 1e-12);
    }

    #[test]
    fn spectral_norm_sits_between_row_and_frobenius_norms(m in matrix(6, 6)) {
        let s = spectral_norm(&m).unwrap();
        prop_assert!(s <= m.frobenius() * (1.0 + 1e-9) + 1e-12);
        prop_assert!(s >= matrix_norm_pq(&m, Lp::Two, Lp::Inf) * (1.0 - 1e-6) - 1e-12);
    }

    #[test]
    fn matrix_text_round_trip_is_exact(m in matrix(5, 7)) {
        prop_assert_eq!(Matrix::from_text(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn allocation_beats_random_feasible_splits(
        ab in prop::collection::vec((0.01f64..10.0, 0.01f64..10.0), 1..6),
        c in 0.1f64..10.0,
        w in prop::collection::vec(0.01f64..1.0, 6),
    ) {
        let (alpha, beta): (Vec<f64>, Vec<f64>) = ab.into_iter().unzip();
        let best = allocate_epsilons(&alpha, &beta, c).unwrap();
        let budget: f64 = best.x.iter().zip(&beta).map(|(x, b)| x * b).sum();
        prop_assert!((budget - c).abs() <= 1e-9 * c);
        let total: f64 = w[..alpha.len()].iter().sum();
        let x: Vec<f64> = w[..alpha.len()].iter().zip(&beta).map(|(wi, b)| c * wi / total / b).collect();
        prop_assert!(best.objective <= split_objective(&alpha, &x) * (1.0 + 1e-12));
    }
}
