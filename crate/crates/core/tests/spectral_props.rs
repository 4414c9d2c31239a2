mod common;

use nphmm::bases::{project_density, reconstruct, BasisSpec};
use nphmm::eval::{align, median};
use nphmm::model::{population_moments, sample_trajectory, BetaMixture, HmmSpec};
use nphmm::numerics::{is_row_stochastic, singular_values, Mat, ProbVec, Tensor3};
use nphmm::spectral::{emission_estimates, empirical_moments, fit, FitOptions, MomentSet, SpectralEstimate};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn population_fit(hmm: &HmmSpec, basis: &BasisSpec, seed: u64) -> (Mat, SpectralEstimate) {
    let o = hmm.emission_coefficients(basis, &basis.default_quadrature());
    let mom = population_moments(&o, hmm.q(), hmm.pi()).unwrap();
    let est = fit(&mom, basis, &FitOptions::new(hmm.k(), seed)).unwrap();
    (o, est)
}

/// Max entrywise recovery error of (O, Q, π) under the best column matching.
fn recovery_error(hmm: &HmmSpec, o: &Mat, est: &SpectralEstimate) -> f64 {
    let perm = align(o, &est.o_hat).unwrap().perm;
    let pi_err = perm
        .iter()
        .enumerate()
        .map(|(x, &j)| (hmm.pi()[x] - est.pi_hat[j]).abs())
        .fold(0.0, f64::max);
    common::permuted_col_error(o, &est.o_hat, &perm)
        .max(common::permuted_square_error(hmm.q(), &est.q_hat, &perm))
        .max(pi_err)
}

#[test]
fn benchmark_population_recovery_is_exact() {
    let hmm = HmmSpec::two_beta_benchmark();
    let basis = BasisSpec::histogram(8).unwrap();
    let (o, est) = population_fit(&hmm, &basis, 1);
    assert!(recovery_error(&hmm, &o, &est) <= 1e-8);

    let perm = align(&o, &est.o_hat).unwrap().perm;
    let quad = basis.default_quadrature();
    let coeffs = emission_estimates(&est);
    for (x, e) in hmm.emissions().iter().enumerate() {
        let truth = project_density(|y| e.pdf(y), &basis, &quad);
        for (a, b) in truth.coefficients.iter().zip(&coeffs[perm[x]].coefficients) {
            assert!((a - b).abs() <= 1e-8);
        }
    }
}

#[test]
fn random_population_recovery() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for i in 0..40 {
        let k = 2 + i % 2;
        let m = if i % 4 < 2 { 8 } else { 16 };
        let hmm = common::random_hmm(&mut rng, k);
        let basis = BasisSpec::histogram(m).unwrap();
        let (o, est) = population_fit(&hmm, &basis, i as u64);
        let err = recovery_error(&hmm, &o, &est);
        assert!(err <= 1e-6, "case {i} (K = {k}, M = {m}): error {err:e}");
        assert!(is_row_stochastic(&est.q_hat, 1e-12));
    }
}

#[test]
fn single_state_collapse() {
    let hmm = HmmSpec::stationary_from(Mat::identity(1, 1), vec![BetaMixture::single(2.0, 5.0)]).unwrap();
    let basis = BasisSpec::histogram(5).unwrap();
    let (o, est) = population_fit(&hmm, &basis, 0);
    assert!((est.q_hat[(0, 0)] - 1.0).abs() < 1e-12);
    assert!((est.pi_hat[0] - 1.0).abs() < 1e-12);
    assert!((&o - &est.o_hat).amax() <= 1e-10);
    assert_eq!(emission_estimates(&est).len(), 1);
}

#[test]
fn permutation_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let hmm = common::random_hmm(&mut rng, 3);
        let perm = vec![2, 0, 1];
        let relabeled = hmm.permuted(&perm).unwrap();
        let basis = BasisSpec::histogram(8).unwrap();
        let (_, a) = population_fit(&hmm, &basis, 9);
        let (_, b) = population_fit(&relabeled, &basis, 9);
        let tau = align(&a.o_hat, &b.o_hat).unwrap().perm;
        assert!(common::permuted_col_error(&a.o_hat, &b.o_hat, &tau) <= 1e-8);
        assert!(common::permuted_square_error(&a.q_hat, &b.q_hat, &tau) <= 1e-8);
    }
}

#[test]
fn rotation_robustness() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let hmm = common::random_hmm(&mut rng, 3);
        let basis = BasisSpec::histogram(16).unwrap();
        let (_, a) = population_fit(&hmm, &basis, 1);
        let (_, b) = population_fit(&hmm, &basis, 2);
        assert_ne!(a.diagnostics.rotation_seed, b.diagnostics.rotation_seed);
        let tau = align(&a.o_hat, &b.o_hat).unwrap().perm;
        assert!(common::permuted_col_error(&a.o_hat, &b.o_hat, &tau) <= 1e-6);
        assert!(common::permuted_square_error(&a.q_hat, &b.q_hat, &tau) <= 1e-6);
    }
}

#[test]
fn reconstruction_within_projection_bias() {
    let hmm = HmmSpec::two_beta_benchmark();
    let basis = BasisSpec::histogram(16).unwrap();
    let (o, est) = population_fit(&hmm, &basis, 3);
    let perm = align(&o, &est.o_hat).unwrap().perm;
    let coeffs = emission_estimates(&est);
    for (x, e) in hmm.emissions().iter().enumerate() {
        let truth = project_density(|y| e.pdf(y), &basis, &basis.default_quadrature());
        let bias = (e.pdf(0.5) - reconstruct(&truth, 0.5).unwrap()).abs();
        let gap = (e.pdf(0.5) - reconstruct(&coeffs[perm[x]], 0.5).unwrap()).abs();
        assert!(gap <= bias + 1e-8);
    }
}

fn empirical(hmm: &HmmSpec, basis: &BasisSpec, p: usize, seed: u64) -> MomentSet {
    let t = sample_trajectory(hmm, p + 2, seed);
    empirical_moments(&t.obs, basis).unwrap()
}

#[test]
fn lag_two_moment_error_shrinks() {
    let hmm = HmmSpec::two_beta_benchmark();
    let basis = BasisSpec::histogram(11).unwrap();
    let o = hmm.emission_coefficients(&basis, &basis.default_quadrature());
    let pop = population_moments(&o, hmm.q(), hmm.pi()).unwrap();
    let ratios: Vec<f64> = (0..20u64)
        .into_par_iter()
        .map(|s| {
            let small = (empirical(&hmm, &basis, 15_000, 100 + s).p - &pop.p).norm();
            let large = (empirical(&hmm, &basis, 60_000, 200 + s).p - &pop.p).norm();
            large / small
        })
        .collect();
    let med = median(&ratios);
    assert!(med <= 0.6, "median shrink factor {med}");
}

#[test]
fn sigma_k_converges() {
    let hmm = HmmSpec::two_beta_benchmark();
    let basis = BasisSpec::histogram(11).unwrap();
    let o = hmm.emission_coefficients(&basis, &basis.default_quadrature());
    let pop = population_moments(&o, hmm.q(), hmm.pi()).unwrap();
    let target = singular_values(&pop.p)[1];
    let gaps: Vec<(f64, f64)> = (0..20u64)
        .into_par_iter()
        .map(|s| {
            let a = singular_values(&empirical(&hmm, &basis, 5_000, 300 + s).p)[1];
            let b = singular_values(&empirical(&hmm, &basis, 20_000, 400 + s).p)[1];
            ((a - target).abs(), (b - target).abs())
        })
        .collect();
    let small: Vec<f64> = gaps.iter().map(|g| g.0).collect();
    let large: Vec<f64> = gaps.iter().map(|g| g.1).collect();
    assert!(median(&large) < median(&small));
}

#[test]
fn coefficient_error_decreases_with_sample_size() {
    let hmm = HmmSpec::two_beta_benchmark();
    let basis = BasisSpec::histogram(11).unwrap();
    let o = hmm.emission_coefficients(&basis, &basis.default_quadrature());
    let worst = |p: usize, seed: u64| {
        let est = fit(&empirical(&hmm, &basis, p, seed), &basis, &FitOptions::new(2, seed)).unwrap();
        align(&o, &est.o_hat)
            .unwrap()
            .column_errors
            .into_iter()
            .fold(0.0, f64::max)
    };
    let (small, large): (Vec<f64>, Vec<f64>) = (0..20u64)
        .into_par_iter()
        .map(|s| (worst(6_000, 500 + s), worst(60_000, 600 + s)))
        .unzip();
    assert!(median(&large) < median(&small));
}

#[test]
fn empirical_moment_hand_cases() {
    let basis = BasisSpec::histogram(4).unwrap();
    let m = empirical_moments(&[0.1, 0.2, 0.05, 0.15], &basis).unwrap();
    assert_eq!(m.sample_count, Some(2));
    assert!((m.l[0] - 2.0).abs() < 1e-15);
    assert!(m.l.iter().skip(1).all(|&v| v == 0.0));
    assert!((m.m3.get(0, 0, 0) - 8.0).abs() < 1e-12);
    assert!(empirical_moments(&[0.1, 0.2], &basis).is_err());
}

fn garbage_moments(rng: &mut ChaCha8Rng, m: usize) -> MomentSet {
    let mut rand_mat = || Mat::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    let (n, p) = (rand_mat(), rand_mat());
    let l = nalgebra::DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
    let data = (0..m * m * m).map(|_| rng.random_range(-1.0..1.0)).collect();
    MomentSet {
        l,
        n,
        p,
        m3: Tensor3::from_vec(m, data).unwrap(),
        sample_count: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn q_hat_row_stochastic_on_garbage(seed in any::<u64>(), k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = BasisSpec::histogram(6).unwrap();
        let mom = garbage_moments(&mut rng, 6);
        if let Ok(est) = fit(&mom, &basis, &FitOptions::new(k, seed)) {
            prop_assert!(is_row_stochastic(&est.q_hat, 1e-12));
            let pi: &ProbVec = &est.pi_hat;
            let res = (est.q_hat.transpose() * pi.to_dvector() - pi.to_dvector()).amax();
            prop_assert!(res <= 1e-10);
        }
    }

    #[test]
    fn population_recovery_random(seed in any::<u64>(), k in 2usize..=3, big in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hmm = common::random_hmm(&mut rng, k);
        let basis = BasisSpec::histogram(if big { 16 } else { 8 }).unwrap();
        let (o, est) = population_fit(&hmm, &basis, seed);
        prop_assert!(recovery_error(&hmm, &o, &est) <= 1e-6);
    }
}
