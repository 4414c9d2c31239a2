mod common;

use nalgebra::DVector;
use nphmm::numerics::{
    haar_orthogonal, project_row_stochastic, project_simplex, real_eig_distinct, stationary_of,
    top_k_right_singular, Mat, EIGEN_SEP_TOL,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mat_strategy(rows: usize, cols: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-5.0f64..5.0, rows * cols)
        .prop_map(move |v| Mat::from_row_slice(rows, cols, &v))
}

/// Brute-force nearest point of the simplex on a grid of step `h`.
fn grid_projection(v: &[f64], h: f64) -> Vec<f64> {
    let steps = (1.0 / h).round() as usize;
    let mut best = (f64::INFINITY, vec![]);
    let mut consider = |p: Vec<f64>| {
        let d: f64 = p.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
        if d < best.0 {
            best = (d, p);
        }
    };
    match v.len() {
        2 => {
            for i in 0..=steps {
                let a = i as f64 * h;
                consider(vec![a, 1.0 - a]);
            }
        }
        3 => {
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let (a, b) = (i as f64 * h, j as f64 * h);
                    consider(vec![a, b, (1.0 - a - b).max(0.0)]);
                }
            }
        }
        _ => unreachable!(),
    }
    best.1
}

#[test]
fn simplex_projection_matches_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for trial in 0..60 {
        let k = 2 + trial % 2;
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..2.0)).collect();
        let fast = project_simplex(&v);
        let grid = grid_projection(&v, 1e-3);
        let linf = fast
            .iter()
            .zip(&grid)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(linf <= 2e-3, "v = {v:?}: {fast:?} vs {grid:?}");
    }
}

#[test]
fn stationary_residuals_on_random_chains() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..1000 {
        let k = 2 + i % 4;
        let q = common::random_transition(&mut rng, k, 0.0);
        let pi = stationary_of(&q).unwrap();
        let res = (q.transpose() * pi.to_dvector() - pi.to_dvector()).amax();
        assert!(res <= 1e-10, "residual {res:e} for K = {k}");
        assert!((pi.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

proptest! {
    #[test]
    fn svd_columns_orthonormal(a in mat_strategy(7, 5), k in 1usize..=5) {
        if let Ok(v) = top_k_right_singular(&a, k) {
            prop_assert!((v.transpose() * &v - Mat::identity(k, k)).amax() <= 1e-12);
        }
    }

    #[test]
    fn eig_residual_small(
        diag in prop::collection::vec(-3.0f64..3.0, 4),
        seed in 0u64..1000,
    ) {
        let mut d = diag.clone();
        d.sort_by(f64::total_cmp);
        prop_assume!(d.windows(2).all(|w| w[1] - w[0] > 1e-3));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = Mat::from_fn(4, 4, |i, j| {
            if i == j { 2.0 } else { rng.random_range(-0.5..0.5) }
        });
        let c = &s * Mat::from_diagonal(&DVector::from_vec(diag)) * s.clone().try_inverse().unwrap();
        let e = real_eig_distinct(&c, EIGEN_SEP_TOL).unwrap();
        let lam = Mat::from_diagonal(&DVector::from_vec(e.values.clone()));
        prop_assert!((&c * &e.vectors - &e.vectors * lam).norm() <= 1e-8 * c.norm());
        for j in 0..4 {
            prop_assert!((e.vectors.column(j).norm() - 1.0).abs() < 1e-12);
        }
        prop_assert!(e.values.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn row_projection_idempotent_and_contractive(
        a in mat_strategy(3, 3),
        seed in 0u64..10_000,
    ) {
        let p = project_row_stochastic(&a);
        for r in p.row_iter() {
            prop_assert!((r.sum() - 1.0).abs() < 1e-12);
            prop_assert!(r.iter().all(|&x| x >= 0.0));
        }
        prop_assert!((project_row_stochastic(&p) - &p).amax() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = common::random_transition(&mut rng, 3, 0.0);
        prop_assert!((&p - &t).norm() <= (&a - &t).norm() + 1e-12);
    }

    #[test]
    fn haar_orthogonality(k in 1usize..8, seed in any::<u64>()) {
        let t = haar_orthogonal(k, seed);
        prop_assert!((t.transpose() * &t - Mat::identity(k, k)).norm() <= 1e-12);
    }
}
