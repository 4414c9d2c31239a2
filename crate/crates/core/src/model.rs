//! Ground-truth hidden Markov models with beta-mixture emissions on [0, 1].

use nalgebra::{DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::bases::{BasisSpec, Quadrature};
use crate::error::{Error, Result};
use crate::numerics::{
    is_row_stochastic, mat_to_rows, rows_to_mat, stationary_of, Mat, ProbVec, Tensor3,
};
use crate::spectral::MomentSet;

/// Cap on `k` in the pseudo-spectral-gap maximization.
pub const PSEUDO_GAP_K_MAX: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaComponent {
    pub weight: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// A finite mixture of beta densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BetaMixture {
    pub components: Vec<BetaComponent>,
}

impl BetaMixture {
    pub fn single(alpha: f64, beta: f64) -> Self {
        Self {
            components: vec![BetaComponent {
                weight: 1.0,
                alpha,
                beta,
            }],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidModel("empty beta mixture".into()));
        }
        for c in &self.components {
            if !(c.alpha > 0.0 && c.beta > 0.0) || !c.alpha.is_finite() || !c.beta.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "beta parameters must be positive, got ({}, {})",
                    c.alpha, c.beta
                )));
            }
            if !(c.weight >= 0.0) {
                return Err(Error::InvalidModel("negative mixture weight".into()));
            }
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel(format!(
                "mixture weights sum to {total}"
            )));
        }
        Ok(())
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * beta_pdf(c.alpha, c.beta, y))
            .sum()
    }

    /// One draw: a component by weight, then a beta variate from two gamma draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut u: f64 = rng.random();
        let mut chosen = self.components.last().unwrap();
        for c in &self.components {
            if u < c.weight {
                chosen = c;
                break;
            }
            u -= c.weight;
        }
        // Gamma uses Marsaglia–Tsang; the ratio of two draws is beta distributed.
        let g1 = Gamma::new(chosen.alpha, 1.0).unwrap().sample(rng);
        let g2 = Gamma::new(chosen.beta, 1.0).unwrap().sample(rng);
        let s = g1 + g2;
        if s > 0.0 {
            (g1 / s).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }
}

fn beta_pdf(a: f64, b: f64, y: f64) -> f64 {
    if !(0.0..=1.0).contains(&y) {
        return 0.0;
    }
    let log_norm = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
    let log_part = |exp: f64, v: f64| {
        if exp == 1.0 {
            0.0
        } else if v == 0.0 {
            if exp > 1.0 {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }
        } else {
            (exp - 1.0) * v.ln()
        }
    };
    (log_norm + log_part(a, y) + log_part(b, 1.0 - y)).exp()
}

/// Ground-truth HMM: transition matrix, initial law, beta-mixture emissions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HmmFile", into = "HmmFile")]
pub struct HmmSpec {
    q: Mat,
    pi: ProbVec,
    stationary: bool,
    emissions: Vec<BetaMixture>,
}

/// On-disk layout of an [`HmmSpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HmmFile {
    #[serde(rename = "K", alias = "k")]
    pub k: usize,
    pub q: Vec<Vec<f64>>,
    /// Initial law; computed from `q` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<f64>>,
    #[serde(default = "default_true")]
    pub stationary: bool,
    pub emissions: Vec<BetaMixture>,
}

fn default_true() -> bool {
    true
}

impl TryFrom<HmmFile> for HmmSpec {
    type Error = Error;
    fn try_from(f: HmmFile) -> Result<Self> {
        let q = rows_to_mat(&f.q)?;
        if q.nrows() != f.k {
            return Err(Error::Dimension(format!(
                "K = {} but q has {} rows",
                f.k,
                q.nrows()
            )));
        }
        let pi = match f.pi {
            Some(p) => ProbVec::new(p)?,
            None => stationary_of(&q)?,
        };
        HmmSpec::new(q, pi, f.stationary, f.emissions)
    }
}

impl From<HmmSpec> for HmmFile {
    fn from(h: HmmSpec) -> Self {
        HmmFile {
            k: h.k(),
            q: mat_to_rows(&h.q),
            pi: Some(h.pi.into()),
            stationary: h.stationary,
            emissions: h.emissions,
        }
    }
}

impl HmmSpec {
    pub fn new(q: Mat, pi: ProbVec, stationary: bool, emissions: Vec<BetaMixture>) -> Result<Self> {
        let k = q.nrows();
        if k == 0 || !q.is_square() {
            return Err(Error::Dimension("transition matrix must be square and nonempty".into()));
        }
        if pi.dim() != k || emissions.len() != k {
            return Err(Error::Dimension(format!(
                "K = {k} but pi has {} entries and there are {} emissions",
                pi.dim(),
                emissions.len()
            )));
        }
        if !is_row_stochastic(&q, 1e-12) || q.iter().any(|&x| x > 1.0) {
            return Err(Error::InvalidModel("q must be row-stochastic".into()));
        }
        for e in &emissions {
            e.validate()?;
        }
        if stationary {
            let pq = q.transpose() * pi.to_dvector();
            let res = (pq - pi.to_dvector()).amax();
            if res > 1e-10 {
                return Err(Error::InvalidModel(format!(
                    "pi is not stationary for q (residual {res:e})"
                )));
            }
        }
        Ok(Self {
            q,
            pi,
            stationary,
            emissions,
        })
    }

    /// Stationary chain started from `stationary_of(q)`.
    pub fn stationary_from(q: Mat, emissions: Vec<BetaMixture>) -> Result<Self> {
        let pi = stationary_of(&q)?;
        Self::new(q, pi, true, emissions)
    }

    /// Two states, `Q = [[0.4, 0.6], [0.8, 0.2]]`, emissions beta(2,5) and beta(4,3).
    pub fn two_beta_benchmark() -> Self {
        let q = Mat::from_row_slice(2, 2, &[0.4, 0.6, 0.8, 0.2]);
        Self::stationary_from(
            q,
            vec![BetaMixture::single(2.0, 5.0), BetaMixture::single(4.0, 3.0)],
        )
        .expect("benchmark model is valid")
    }

    pub fn k(&self) -> usize {
        self.q.nrows()
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn pi(&self) -> &ProbVec {
        &self.pi
    }

    pub fn is_stationary(&self) -> bool {
        self.stationary
    }

    pub fn emissions(&self) -> &[BetaMixture] {
        &self.emissions
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Relabels hidden states: new state `i` is old state `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let k = self.k();
        let q = Mat::from_fn(k, k, |i, j| self.q[(perm[i], perm[j])]);
        let pi = ProbVec::new(perm.iter().map(|&i| self.pi[i]).collect())?;
        let emissions = perm.iter().map(|&i| self.emissions[i].clone()).collect();
        Self::new(q, pi, self.stationary, emissions)
    }

    /// `M × K` matrix of emission coefficients `⟨f_x, φ_m⟩`.
    pub fn emission_coefficients(&self, basis: &BasisSpec, quad: &Quadrature) -> Mat {
        let m = basis.size();
        let mut o = Mat::zeros(m, self.k());
        let mut phi = vec![0.0; m];
        for (&y, &w) in quad.nodes.iter().zip(&quad.weights) {
            basis.eval_into(y, &mut phi);
            for (x, e) in self.emissions.iter().enumerate() {
                let fy = w * e.pdf(y);
                for a in 0..m {
                    o[(a, x)] += fy * phi[a];
                }
            }
        }
        o
    }
}

/// A simulated path of hidden states (0-based) and observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub hidden: Vec<usize>,
    pub obs: Vec<f64>,
    pub seed: u64,
}

fn sample_index<R: Rng + ?Sized>(weights: impl Iterator<Item = f64>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

pub fn sample_trajectory(hmm: &HmmSpec, n: usize, seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hidden = Vec::with_capacity(n);
    let mut obs = Vec::with_capacity(n);
    let mut x = sample_index(hmm.pi.as_slice().iter().cloned(), &mut rng);
    for j in 0..n {
        if j > 0 {
            x = sample_index(hmm.q.row(x).iter().cloned(), &mut rng);
        }
        hidden.push(x);
        obs.push(hmm.emissions[x].sample(&mut rng));
    }
    Trajectory { hidden, obs, seed }
}

fn check_unit(y: f64) -> Result<()> {
    if (0.0..=1.0).contains(&y) {
        Ok(())
    } else {
        Err(Error::Domain {
            value: y,
            domain: "[0, 1]",
        })
    }
}

/// Emission density of state `x` at `y`.
pub fn eval_emission(hmm: &HmmSpec, x: usize, y: f64) -> Result<f64> {
    check_unit(y)?;
    let e = hmm
        .emissions
        .get(x)
        .ok_or_else(|| Error::Dimension(format!("state {x} out of range")))?;
    Ok(e.pdf(y))
}

/// Minimal one-step predictive density `min_x Σ_{x'} q(x, x') f_{x'}(y)`.
pub fn c_star(hmm: &HmmSpec, y: f64) -> Result<f64> {
    check_unit(y)?;
    let f: Vec<f64> = hmm.emissions.iter().map(|e| e.pdf(y)).collect();
    Ok(hmm
        .q
        .row_iter()
        .map(|row| row.iter().zip(&f).map(|(q, fx)| q * fx).sum::<f64>())
        .fold(f64::INFINITY, f64::min))
}

/// Forgetting constants of a chain with positive minimal transition probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForgettingConstants {
    pub delta_star: f64,
    pub rho_star: f64,
    pub c_big_star: f64,
}

impl ForgettingConstants {
    /// Constants derived from a minimal transition probability; `None` at zero.
    pub fn from_min_entry(delta: f64) -> Option<Self> {
        (delta > 0.0).then(|| Self {
            delta_star: delta,
            rho_star: 1.0 - delta / (1.0 - delta),
            c_big_star: 4.0 * (1.0 - delta) / delta,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovConstants {
    /// `None` when some transition probability is zero.
    pub forgetting: Option<ForgettingConstants>,
    pub g_ps: f64,
    /// Power `k` at which the pseudo spectral gap maximum was attained.
    pub g_ps_argmax: usize,
    pub g_ps_k_max: usize,
    pub t_mix: f64,
    pub pi_min: f64,
}

/// Spectral gap of a transition matrix `D_π⁻¹ Aᵀ D_π A`-style operator given
/// the eigenvalues of its symmetrization, sorted descending.
fn gap_from_sorted(eigs: &[f64]) -> f64 {
    match eigs.get(1) {
        None => 1.0,
        Some(&second) if second >= 1.0 - 1e-10 => 0.0,
        Some(&second) => 1.0 - second,
    }
}

pub fn markov_constants(hmm: &HmmSpec) -> Result<MarkovConstants> {
    markov_constants_with(hmm.q(), PSEUDO_GAP_K_MAX)
}

/// Constants for a transition matrix, maximizing the pseudo spectral gap over
/// powers `1..=k_max`.
pub fn markov_constants_with(q: &Mat, k_max: usize) -> Result<MarkovConstants> {
    let pi = stationary_of(q)?;
    let k = q.nrows();
    let delta = q.iter().cloned().fold(f64::INFINITY, f64::min);
    let sqrt_pi: Vec<f64> = pi.as_slice().iter().map(|p| p.sqrt()).collect();
    // D_π⁻¹ (Qᵀ)^j D_π Q^j is similar to SᵀS with S = D_π^{1/2} Q^j D_π^{-1/2},
    // so its eigenvalues are real and come from a symmetric solver.
    let mut power = Mat::identity(k, k);
    let (mut g_ps, mut argmax) = (f64::NEG_INFINITY, 1);
    for j in 1..=k_max {
        power = &power * q;
        let s = Mat::from_fn(k, k, |a, b| sqrt_pi[a] * power[(a, b)] / sqrt_pi[b]);
        let sym = s.transpose() * &s;
        let mut eigs: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().cloned().collect();
        eigs.sort_by(|a, b| b.total_cmp(a));
        let value = gap_from_sorted(&eigs) / j as f64;
        if value > g_ps {
            g_ps = value;
            argmax = j;
        }
    }
    if !(g_ps > 0.0) {
        return Err(Error::Structure("pseudo spectral gap is zero".into()));
    }
    let pi_min = pi.as_slice().iter().cloned().fold(f64::INFINITY, f64::min);
    let t_mix = (1.0 + 3.0 * 2f64.ln() - pi_min.ln()) / g_ps;
    Ok(MarkovConstants {
        forgetting: ForgettingConstants::from_min_entry(delta),
        g_ps,
        g_ps_argmax: argmax,
        g_ps_k_max: k_max,
        t_mix,
        pi_min,
    })
}

/// Concentration constant `√(2/G_ps) + 2√(−2 T_mix log δ)` for `δ ∈ (0, 1)`.
pub fn c_star_constant(constants: &MarkovConstants, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain {
            value: delta,
            domain: "(0, 1)",
        });
    }
    Ok((2.0 / constants.g_ps).sqrt() + 2.0 * (-2.0 * constants.t_mix * delta.ln()).sqrt())
}

/// Exact moments of a stationary HMM from its emission coefficients.
pub fn population_moments(o: &Mat, q: &Mat, pi: &ProbVec) -> Result<MomentSet> {
    let (m, k) = (o.nrows(), o.ncols());
    if q.nrows() != k || q.ncols() != k || pi.dim() != k {
        return Err(Error::Dimension(format!(
            "coefficients have {k} columns but q is {}x{} and pi has {} entries",
            q.nrows(),
            q.ncols(),
            pi.dim()
        )));
    }
    let pi_v = pi.to_dvector();
    let d_pi = Mat::from_diagonal(&pi_v);
    let l: DVector<f64> = o * &pi_v;
    let left = o * &d_pi * q; // O D_π Q
    let n = &left * o.transpose();
    let p = &left * q * o.transpose();
    let right = q * o.transpose(); // Q Oᵀ
    let mut m3 = Tensor3::zeros(m);
    for b in 0..m {
        let d_b = Mat::from_diagonal(&o.row(b).transpose());
        let slice = &left * d_b * &right;
        for a in 0..m {
            for c in 0..m {
                *m3.get_mut(a, b, c) = slice[(a, c)];
            }
        }
    }
    Ok(MomentSet {
        l,
        n,
        p,
        m3,
        sample_count: None,
    })
}
