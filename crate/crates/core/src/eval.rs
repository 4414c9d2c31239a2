//! Label alignment, estimation risks, the filtering/smoothing error bounds
//! and Monte Carlo studies of the moment estimators.

use std::io::Write;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bases::{BasisSpec, Quadrature};
use crate::error::{Error, Result};
use crate::inference::{oracle_posteriors, plugin_posteriors, tv_distance, PosteriorTrack};
use crate::model::{
    c_star, markov_constants, population_moments, sample_trajectory, ForgettingConstants,
    HmmSpec, MarkovConstants,
};
use crate::numerics::Mat;
use crate::spectral::{empirical_moments, fit, FitOptions, MomentSet, SpectralEstimate};

/// Largest state count accepted by the brute-force alignment.
pub const MAX_ALIGN_STATES: usize = 8;

/// `c⋆(y)` values below this make the corresponding bound term infinite.
pub const C_STAR_FLOOR: f64 = 1e-12;

/// A relabeling of estimated states: true state `x` ↔ estimated state `perm[x]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub perm: Vec<usize>,
    /// `‖O⋆(·, x) − Ô(·, perm[x])‖₂` per true state.
    pub column_errors: Vec<f64>,
    pub cost: f64,
}

fn column_distance(a: &Mat, i: usize, b: &Mat, j: usize) -> f64 {
    (a.column(i) - b.column(j)).norm()
}

/// Exhaustive search for the permutation minimizing the summed column L2 distance.
pub fn align(o_true: &Mat, o_hat: &Mat) -> Result<Alignment> {
    if o_true.shape() != o_hat.shape() {
        return Err(Error::Dimension(format!(
            "cannot align {:?} with {:?}",
            o_true.shape(),
            o_hat.shape()
        )));
    }
    let k = o_true.ncols();
    if k > MAX_ALIGN_STATES {
        return Err(Error::Capability(format!(
            "brute-force alignment supports at most {MAX_ALIGN_STATES} states, got {k}"
        )));
    }
    let dist: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| column_distance(o_true, i, o_hat, j)).collect())
        .collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in (0..k).permutations(k) {
        let cost: f64 = perm.iter().enumerate().map(|(i, &j)| dist[i][j]).sum();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, perm));
        }
    }
    let (cost, perm) = best.unwrap_or((0.0, Vec::new()));
    let column_errors = perm.iter().enumerate().map(|(i, &j)| dist[i][j]).collect();
    Ok(Alignment {
        perm,
        column_errors,
        cost,
    })
}

/// Emission risk of one true state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionRisk {
    /// `‖O⋆(·, x) − Ô(·, τx)‖₂`, the error within the projection space.
    pub coefficient_error: f64,
    /// `‖f⋆_x − f̂_{τx}‖₂` measured by quadrature, projection bias included.
    pub total_error: f64,
    /// `‖f⋆_x − f⋆_{M,x}‖₂`.
    pub projection_bias: f64,
}

pub fn emission_l2_risk(
    hmm: &HmmSpec,
    est: &SpectralEstimate,
    alignment: &Alignment,
    quad: &Quadrature,
) -> Vec<EmissionRisk> {
    let o_true = hmm.emission_coefficients(&est.basis, quad);
    let mut phi = vec![0.0; est.basis.size()];
    (0..hmm.k())
        .map(|x| {
            let j = alignment.perm[x];
            let coefficient_error = column_distance(&o_true, x, &est.o_hat, j);
            let f = &hmm.emissions()[x];
            let (mut total, mut bias) = (0.0, 0.0);
            for (&y, &w) in quad.nodes.iter().zip(&quad.weights) {
                est.basis.eval_into(y, &mut phi);
                let fy = f.pdf(y);
                let (mut proj, mut hat) = (0.0, 0.0);
                for a in 0..phi.len() {
                    proj += o_true[(a, x)] * phi[a];
                    hat += est.o_hat[(a, j)] * phi[a];
                }
                total += w * (fy - hat).powi(2);
                bias += w * (fy - proj).powi(2);
            }
            EmissionRisk {
                coefficient_error,
                total_error: total.sqrt(),
                projection_bias: bias.sqrt(),
            }
        })
        .collect()
}

/// Parameter errors entering the filtering and smoothing bounds, in the
/// labeling of the true model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub forgetting: ForgettingConstants,
    /// Minimal entry of `Q̂`.
    pub delta_hat: f64,
    /// `‖π⋆ − P_τ π̂‖₂`.
    pub pi_error: f64,
    /// `‖Q⋆ − P_τ Q̂ P_τᵀ‖_F`.
    pub q_error: f64,
    /// `max_x |f⋆_x(y_ℓ) − f̂_{τx}(y_ℓ)|` per observation, `f̂` clamped at 0.
    pub emission_error: Vec<f64>,
    /// `c⋆(y_ℓ)` per observation.
    pub c_star: Vec<f64>,
}

impl BoundInputs {
    /// `1 − δ̂/(1 − δ̂)`; `None` when `δ̂ = 0`.
    pub fn rho_hat(&self) -> Option<f64> {
        (self.delta_hat > 0.0).then(|| 1.0 - self.delta_hat / (1.0 - self.delta_hat))
    }

    fn weighted_emission(&self, l: usize) -> f64 {
        let e = self.emission_error[l];
        if e == 0.0 {
            0.0
        } else if self.c_star[l] < C_STAR_FLOOR {
            f64::INFINITY
        } else {
            e / self.c_star[l]
        }
    }

    /// Number of observations whose `c⋆` falls below [`C_STAR_FLOOR`].
    pub fn c_star_floor_hits(&self) -> usize {
        self.c_star.iter().filter(|&&c| c < C_STAR_FLOOR).count()
    }

    pub fn from_estimate(
        hmm: &HmmSpec,
        est: &SpectralEstimate,
        alignment: &Alignment,
        obs: &[f64],
    ) -> Result<Self> {
        let forgetting = markov_constants(hmm)?
            .forgetting
            .ok_or_else(|| Error::Unavailable("true transition matrix has a zero entry".into()))?;
        let k = hmm.k();
        let perm = &alignment.perm;
        let pi_error = (0..k)
            .map(|x| (hmm.pi()[x] - est.pi_hat[perm[x]]).powi(2))
            .sum::<f64>()
            .sqrt();
        let q_error = (0..k)
            .cartesian_product(0..k)
            .map(|(x, z)| (hmm.q()[(x, z)] - est.q_hat[(perm[x], perm[z])]).powi(2))
            .sum::<f64>()
            .sqrt();
        let delta_hat = est.q_hat.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut phi = vec![0.0; est.basis.size()];
        let mut emission_error = Vec::with_capacity(obs.len());
        let mut cs = Vec::with_capacity(obs.len());
        for &y in obs {
            let hat = est.emission_values(y, &mut phi);
            let err = (0..k)
                .map(|x| (hmm.emissions()[x].pdf(y) - hat[perm[x]].max(0.0)).abs())
                .fold(0.0, f64::max);
            emission_error.push(err);
            cs.push(c_star(hmm, y)?);
        }
        Ok(Self {
            forgetting,
            delta_hat,
            pi_error,
            q_error,
            emission_error,
            c_star: cs,
        })
    }
}

/// Filtering error bound at time `k` (1-based).
pub fn prop1_bound(inputs: &BoundInputs, k: usize) -> f64 {
    assert!(k >= 1 && k <= inputs.emission_error.len());
    let ForgettingConstants {
        delta_star,
        rho_star,
        c_big_star,
    } = inputs.forgetting;
    let emission: f64 = (1..=k)
        .map(|l| rho_star.powi((k - l) as i32) * inputs.weighted_emission(l - 1))
        .sum();
    c_big_star
        * (rho_star.powi(k as i32 - 1) * inputs.pi_error / delta_star
            + inputs.q_error / (delta_star * (1.0 - rho_star))
            + emission)
}

/// Marginal smoothing error bound at time `k` of a record of length `n`.
/// Infinite when `δ̂ = 0`.
pub fn prop2_bound(inputs: &BoundInputs, k: usize, n: usize) -> f64 {
    assert!(k >= 1 && k <= n && n <= inputs.emission_error.len());
    let ForgettingConstants {
        delta_star,
        rho_star,
        c_big_star,
    } = inputs.forgetting;
    let Some(rho_hat) = inputs.rho_hat() else {
        return f64::INFINITY;
    };
    let rho = rho_hat.max(rho_star);
    let emission: f64 = (1..=n)
        .map(|l| rho.powi(l.abs_diff(k) as i32) * inputs.weighted_emission(l - 1))
        .sum();
    c_big_star
        * (rho_star.powi(k as i32 - 1) * inputs.pi_error / delta_star
            + (1.0 / (1.0 - rho_star) + 1.0 / (1.0 - rho_hat)) * inputs.q_error / delta_star
            + emission)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    /// 1-based time index.
    pub k: usize,
    pub lhs_filter: f64,
    pub rhs_filter: f64,
    pub lhs_smooth: f64,
    pub rhs_smooth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundFlags {
    pub degenerate_steps: usize,
    pub delta_hat_zero: bool,
    pub c_star_floor_hits: usize,
    pub clamped_emissions: usize,
}

impl BoundFlags {
    pub fn clean(&self) -> bool {
        self.degenerate_steps == 0 && !self.delta_hat_zero && self.c_star_floor_hits == 0
    }
}

/// Measured plug-in errors and both bounds along one inference record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub seed: u64,
    pub rows: Vec<BoundRow>,
    pub inputs: BoundInputs,
    pub rho_hat: Option<f64>,
    pub flags: BoundFlags,
    pub violations_filter: usize,
    pub violations_smooth: usize,
    /// The left-hand sides use `Σ_x |·|`.
    pub tv_convention: String,
}

impl BoundReport {
    pub fn violations(&self) -> usize {
        self.violations_filter + self.violations_smooth
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        for row in &self.rows {
            wtr.serialize(row).map_err(io)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Constants and flags, without the per-step table.
    pub fn sidecar_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            seed: u64,
            forgetting: &'a ForgettingConstants,
            delta_hat: f64,
            rho_hat: Option<f64>,
            pi_error: f64,
            q_error: f64,
            max_emission_error: f64,
            min_c_star: f64,
            flags: &'a BoundFlags,
            clean: bool,
            violations_filter: usize,
            violations_smooth: usize,
            tv_convention: &'a str,
        }
        let inp = &self.inputs;
        Ok(serde_json::to_string_pretty(&Sidecar {
            seed: self.seed,
            forgetting: &inp.forgetting,
            delta_hat: inp.delta_hat,
            rho_hat: self.rho_hat,
            pi_error: inp.pi_error,
            q_error: inp.q_error,
            max_emission_error: inp.emission_error.iter().cloned().fold(0.0, f64::max),
            min_c_star: inp.c_star.iter().cloned().fold(f64::INFINITY, f64::min),
            flags: &self.flags,
            clean: self.flags.clean(),
            violations_filter: self.violations_filter,
            violations_smooth: self.violations_smooth,
            tv_convention: &self.tv_convention,
        })?)
    }
}

/// Compares plug-in and oracle posteriors on `obs` against both bounds.
pub fn bound_report(
    hmm: &HmmSpec,
    est: &SpectralEstimate,
    alignment: &Alignment,
    obs: &[f64],
    seed: u64,
) -> Result<BoundReport> {
    let inputs = BoundInputs::from_estimate(hmm, est, alignment, obs)?;
    let oracle = oracle_posteriors(hmm, obs)?;
    let plugin = plugin_posteriors(est, obs)?.relabeled(&alignment.perm);
    let n = obs.len();
    let mut rows = Vec::with_capacity(n);
    for k in 1..=n {
        rows.push(BoundRow {
            k,
            lhs_filter: tv_distance(&oracle.filter[k - 1], &plugin.filter[k - 1])?,
            rhs_filter: prop1_bound(&inputs, k),
            lhs_smooth: tv_distance(&oracle.smooth[k - 1], &plugin.smooth[k - 1])?,
            rhs_smooth: prop2_bound(&inputs, k, n),
        });
    }
    let violations_filter = rows.iter().filter(|r| r.lhs_filter > r.rhs_filter).count();
    let violations_smooth = rows.iter().filter(|r| r.lhs_smooth > r.rhs_smooth).count();
    let flags = BoundFlags {
        degenerate_steps: plugin.degenerate_steps.len() + oracle.degenerate_steps.len(),
        delta_hat_zero: inputs.delta_hat <= 0.0,
        c_star_floor_hits: inputs.c_star_floor_hits(),
        clamped_emissions: plugin.clamped,
    };
    Ok(BoundReport {
        seed,
        rows,
        rho_hat: inputs.rho_hat(),
        inputs,
        flags,
        violations_filter,
        violations_smooth,
        tv_convention: "sum_abs".into(),
    })
}

/// One replicate of the estimation/inference experiment: `p` triples for
/// estimation, then `n` fresh observations for inference.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub seed: u64,
    pub estimate: SpectralEstimate,
    pub alignment: Alignment,
    pub inference_obs: Vec<f64>,
}

/// Simulates `p + 2 + n` observations, fits on the first `p + 2` and keeps
/// the remaining `n` for inference.
pub fn run_replicate(
    hmm: &HmmSpec,
    basis: &BasisSpec,
    p: usize,
    n: usize,
    seed: u64,
    retries: usize,
) -> Result<Replicate> {
    let traj = sample_trajectory(hmm, p + 2 + n, seed);
    let (est_obs, inf_obs) = traj.obs.split_at(p + 2);
    let moments = empirical_moments(est_obs, basis)?;
    let opts = FitOptions {
        k: hmm.k(),
        seed,
        retries,
    };
    let estimate = fit(&moments, basis, &opts)?;
    let o_true = hmm.emission_coefficients(basis, &basis.default_quadrature());
    let alignment = align(&o_true, &estimate.o_hat)?;
    Ok(Replicate {
        seed,
        estimate,
        alignment,
        inference_obs: inf_obs.to_vec(),
    })
}

/// Per-step TV gap `Σ_x |oracle − plug-in|` of the smoothing (or filtering) rows.
pub fn tv_gaps(oracle: &PosteriorTrack, plugin_aligned: &PosteriorTrack, smooth: bool) -> Vec<f64> {
    let (a, b) = if smooth {
        (&oracle.smooth, &plugin_aligned.smooth)
    } else {
        (&oracle.filter, &plugin_aligned.filter)
    };
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()).sum())
        .collect()
}

/// Linear-interpolation quantile of unsorted data (`q ∈ [0, 1]`).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// One replicate of the rate study. `p = None` marks exact population moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub p: Option<usize>,
    pub seed: u64,
    pub p_error: f64,
    pub m_error: f64,
    /// `max_x ‖O⋆(·, x) − Ô(·, τx)‖₂`; `None` when the fit failed.
    pub coefficient_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Self {
        Self {
            q1: quantile(values, 0.25),
            median: median(values),
            q3: quantile(values, 0.75),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub p: Option<usize>,
    pub replicates: usize,
    pub p_error: Spread,
    pub m_error: Spread,
    pub coefficient_error: Spread,
    pub fit_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub basis: BasisSpec,
    pub rows: Vec<RateRow>,
    pub summary: Vec<RateSummary>,
}

impl RateTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        wtr.write_record(["p", "seed", "p_error", "m_error", "coefficient_error"])
            .map_err(io)?;
        for r in &self.rows {
            wtr.write_record(&[
                r.p.map_or("inf".to_string(), |p| p.to_string()),
                r.seed.to_string(),
                r.p_error.to_string(),
                r.m_error.to_string(),
                r.coefficient_error.map_or(String::new(), |c| c.to_string()),
            ])
            .map_err(io)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn summary_for(&self, p: Option<usize>) -> Option<&RateSummary> {
        self.summary.iter().find(|s| s.p == p)
    }
}

fn max_coefficient_error(o_true: &Mat, est: &SpectralEstimate) -> Result<f64> {
    let a = align(o_true, &est.o_hat)?;
    Ok(a.column_errors.into_iter().fold(0.0, f64::max))
}

fn rate_row(
    p: Option<usize>,
    seed: u64,
    moments: &MomentSet,
    population: &MomentSet,
    o_true: &Mat,
    basis: &BasisSpec,
    k: usize,
) -> RateRow {
    let coefficient_error = fit(moments, basis, &FitOptions::new(k, seed))
        .ok()
        .and_then(|est| max_coefficient_error(o_true, &est).ok());
    RateRow {
        p,
        seed,
        p_error: (&moments.p - &population.p).norm(),
        m_error: moments.m3.frobenius_distance(&population.m3),
        coefficient_error,
    }
}

/// Errors of the empirical moments and of the fitted coefficients across
/// sample sizes and seeds; a final population row (`p = None`) checks the
/// zero-error limit. Replicates run in parallel.
pub fn rate_study(
    hmm: &HmmSpec,
    basis: &BasisSpec,
    p_grid: &[usize],
    seeds: &[u64],
) -> Result<RateTable> {
    if p_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidModel("p_grid must be strictly increasing".into()));
    }
    let o_true = hmm.emission_coefficients(basis, &basis.default_quadrature());
    let population = population_moments(&o_true, hmm.q(), hmm.pi())?;
    let jobs: Vec<(usize, u64)> = p_grid
        .iter()
        .cartesian_product(seeds.iter())
        .map(|(&p, &s)| (p, s))
        .collect();
    let mut rows: Vec<RateRow> = jobs
        .par_iter()
        .map(|&(p, seed)| -> Result<RateRow> {
            let traj = sample_trajectory(hmm, p + 2, seed);
            let moments = empirical_moments(&traj.obs, basis)?;
            Ok(rate_row(Some(p), seed, &moments, &population, &o_true, basis, hmm.k()))
        })
        .collect::<Result<_>>()?;
    rows.push(rate_row(
        None,
        seeds.first().copied().unwrap_or(0),
        &population,
        &population,
        &o_true,
        basis,
        hmm.k(),
    ));

    let mut summary = Vec::new();
    let groups: Vec<Option<usize>> = p_grid.iter().map(|&p| Some(p)).chain([None]).collect();
    for g in groups {
        let sel: Vec<&RateRow> = rows.iter().filter(|r| r.p == g).collect();
        let pe: Vec<f64> = sel.iter().map(|r| r.p_error).collect();
        let me: Vec<f64> = sel.iter().map(|r| r.m_error).collect();
        let ce: Vec<f64> = sel.iter().filter_map(|r| r.coefficient_error).collect();
        summary.push(RateSummary {
            p: g,
            replicates: sel.len(),
            p_error: Spread::of(&pe),
            m_error: Spread::of(&me),
            coefficient_error: Spread::of(&ce),
            fit_failures: sel.len() - ce.len(),
        });
    }
    Ok(RateTable {
        basis: *basis,
        rows,
        summary,
    })
}

/// Constants summary for a model: Markov constants, the concentration
/// constant at `delta`, and `η₃` of a basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub markov: MarkovConstants,
    pub pi_star: Vec<f64>,
    pub delta: f64,
    pub c_star_q_delta: f64,
    pub basis: BasisSpec,
    pub eta3: crate::bases::Eta3,
}

pub fn constants_report(hmm: &HmmSpec, delta: f64, basis: &BasisSpec) -> Result<ConstantsReport> {
    let markov = markov_constants(hmm)?;
    let c = crate::model::c_star_constant(&markov, delta)?;
    Ok(ConstantsReport {
        pi_star: hmm.pi().as_slice().to_vec(),
        markov,
        delta,
        c_star_q_delta: c,
        basis: *basis,
        eta3: crate::bases::eta3(basis),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn align_swapped_and_identity() {
        let o = Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 0.5, 0.0, 1.0]);
        let swapped = Mat::from_fn(3, 2, |i, j| o[(i, 1 - j)]);
        let a = align(&o, &swapped).unwrap();
        assert_eq!(a.perm, vec![1, 0]);
        assert_abs_diff_eq!(a.cost, 0.0);
        assert_eq!(align(&o, &o).unwrap().perm, vec![0, 1]);
    }

    #[test]
    fn align_errors() {
        assert!(matches!(
            align(&Mat::zeros(3, 2), &Mat::zeros(2, 2)),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            align(&Mat::zeros(10, 9), &Mat::zeros(10, 9)),
            Err(Error::Capability(_))
        ));
    }

    fn exact_inputs(n: usize) -> BoundInputs {
        BoundInputs {
            forgetting: ForgettingConstants::from_min_entry(0.2).unwrap(),
            delta_hat: 0.2,
            pi_error: 0.0,
            q_error: 0.0,
            emission_error: vec![0.0; n],
            c_star: vec![1.0; n],
        }
    }

    #[test]
    fn bounds_vanish_for_exact_parameters() {
        let inp = exact_inputs(10);
        for k in 1..=10 {
            assert_eq!(prop1_bound(&inp, k), 0.0);
            assert_eq!(prop2_bound(&inp, k, 10), 0.0);
        }
    }

    #[test]
    fn transition_error_limit_of_filter_bound() {
        let mut inp = exact_inputs(200);
        inp.pi_error = 0.05;
        inp.q_error = 0.01 * 2f64.sqrt();
        let limit = 16.0 * inp.q_error / (0.2 * 0.25);
        assert_abs_diff_eq!(prop1_bound(&inp, 200), limit, epsilon = 1e-12);
    }

    #[test]
    fn c_star_floor_gives_infinite_term() {
        let mut inp = exact_inputs(3);
        inp.emission_error[1] = 0.1;
        inp.c_star[1] = 0.0;
        assert_eq!(inp.c_star_floor_hits(), 1);
        assert_eq!(prop1_bound(&inp, 1), 0.0);
        assert!(prop1_bound(&inp, 2).is_infinite());
        inp.delta_hat = 0.0;
        assert!(prop2_bound(&inp, 1, 3).is_infinite());
    }

    #[test]
    fn quantiles() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_abs_diff_eq!(median(&v), 2.5);
        assert_abs_diff_eq!(quantile(&v, 0.0), 1.0);
        assert_abs_diff_eq!(quantile(&v, 1.0), 4.0);
        assert_abs_diff_eq!(quantile(&v, 0.25), 1.75);
    }
}
