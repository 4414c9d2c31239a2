#![allow(dead_code)]

use nphmm::model::{BetaMixture, HmmSpec};
use nphmm::numerics::Mat;
use rand::Rng;

/// Random row-stochastic matrix with every entry at least `floor`.
pub fn random_transition<R: Rng>(rng: &mut R, k: usize, floor: f64) -> Mat {
    random_rows(rng, k, floor, 0.0)
}

/// Rows drawn from uniform weights, with `diag_boost` added on the diagonal
/// before normalization.
fn random_rows<R: Rng>(rng: &mut R, k: usize, floor: f64, diag_boost: f64) -> Mat {
    let mut q = Mat::zeros(k, k);
    for i in 0..k {
        let u: Vec<f64> = (0..k)
            .map(|j| rng.random::<f64>() + 1e-3 + if i == j { diag_boost } else { 0.0 })
            .collect();
        let s: f64 = u.iter().sum();
        for j in 0..k {
            q[(i, j)] = floor + (1.0 - floor * k as f64) * u[j] / s;
        }
    }
    q
}

/// Well-conditioned random transition matrix (|det| > 0.05) with entries >= `floor`.
pub fn random_full_rank_transition<R: Rng>(rng: &mut R, k: usize, floor: f64) -> Mat {
    loop {
        let q = random_rows(rng, k, floor, 1.0);
        if q.determinant().abs() > 0.05 {
            return q;
        }
    }
}

/// Random stationary HMM with single-beta emissions whose means are spread apart.
pub fn random_hmm<R: Rng>(rng: &mut R, k: usize) -> HmmSpec {
    let q = random_full_rank_transition(rng, k, 0.05);
    let emissions = loop {
        let params: Vec<(f64, f64)> = (0..k)
            .map(|_| (rng.random_range(1.5..8.0), rng.random_range(1.5..8.0)))
            .collect();
        let mut means: Vec<f64> = params.iter().map(|(a, b)| a / (a + b)).collect();
        means.sort_by(f64::total_cmp);
        if means.windows(2).all(|w| w[1] - w[0] > 0.15) {
            break params
                .into_iter()
                .map(|(a, b)| BetaMixture::single(a, b))
                .collect();
        }
    };
    HmmSpec::stationary_from(q, emissions).unwrap()
}

/// Exhaustive posterior of `X_t` (0-based) given `obs[..upto]`, by summing over
/// all hidden paths of length `upto`.
pub fn enumerate_posterior(
    q: &Mat,
    pi: &[f64],
    f: &dyn Fn(usize, f64) -> f64,
    obs: &[f64],
    upto: usize,
    t: usize,
) -> Vec<f64> {
    let k = q.nrows();
    let mut out = vec![0.0; k];
    let total = k.pow(upto as u32);
    for code in 0..total {
        let mut path = Vec::with_capacity(upto);
        let mut c = code;
        for _ in 0..upto {
            path.push(c % k);
            c /= k;
        }
        let mut w = pi[path[0]] * f(path[0], obs[0]);
        for j in 1..upto {
            w *= q[(path[j - 1], path[j])] * f(path[j], obs[j]);
        }
        out[path[t]] += w;
    }
    let s: f64 = out.iter().sum();
    out.iter().map(|v| v / s).collect()
}

/// Max entrywise distance between two matrices after permuting the columns
/// (and, for square state matrices, rows) of `b` by `perm`.
pub fn permuted_col_error(a: &Mat, b: &Mat, perm: &[usize]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.nrows() {
        for (x, &j) in perm.iter().enumerate() {
            worst = worst.max((a[(i, x)] - b[(i, j)]).abs());
        }
    }
    worst
}

pub fn permuted_square_error(a: &Mat, b: &Mat, perm: &[usize]) -> f64 {
    let mut worst: f64 = 0.0;
    for (x, &i) in perm.iter().enumerate() {
        for (z, &j) in perm.iter().enumerate() {
            worst = worst.max((a[(x, z)] - b[(i, j)]).abs());
        }
    }
    worst
}
