//! Method-of-moments estimation of the transition matrix and the projected
//! emission densities from one observed trajectory.
//!
//! The pipeline: empirical moments of one, two and three consecutive
//! observations in the basis; the top-K right singular subspace of the
//! lag-two moment; observable operators diagonalized jointly through a
//! random rotation; then the stationary-law surrogate and the transition
//! matrix, projected back onto row-stochastic matrices.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bases::{BasisSpec, CoeffVec};
use crate::error::{Error, Result};
use crate::numerics::{
    checked_inverse, haar_orthogonal, is_primitive, mat_to_rows, project_row_stochastic, real_eig_distinct,
    rows_to_mat, stationary_of, stationary_unichain, truncated_svd, Mat, ProbVec, Tensor3, EIGEN_SEP_TOL,
};

/// Entries of the stationary-law surrogate below this magnitude abort the fit.
pub const PI_TILDE_FLOOR: f64 = 1e-10;

/// Basis moments of one, two and three consecutive observations.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    /// `L(a) = E φ_a(Y₁)`.
    pub l: DVector<f64>,
    /// `N(a, b) = E φ_a(Y₁) φ_b(Y₂)`.
    pub n: Mat,
    /// `P(a, c) = E φ_a(Y₁) φ_c(Y₃)`.
    pub p: Mat,
    /// `M(a, b, c) = E φ_a(Y₁) φ_b(Y₂) φ_c(Y₃)`.
    pub m3: Tensor3,
    /// Number of triples averaged; `None` for exact population moments.
    pub sample_count: Option<usize>,
}

impl MomentSet {
    pub fn dim(&self) -> usize {
        self.l.len()
    }
}

/// Empirical moments over the overlapping triples `(Y_s, Y_{s+1}, Y_{s+2})`,
/// `s = 1..len−2`.
pub fn empirical_moments(obs: &[f64], basis: &BasisSpec) -> Result<MomentSet> {
    if obs.len() < 3 {
        return Err(Error::InsufficientData {
            got: obs.len(),
            need: 3,
        });
    }
    if let Some(&bad) = obs.iter().find(|y| !(0.0..=1.0).contains(*y)) {
        return Err(Error::Domain {
            value: bad,
            domain: "[0, 1]",
        });
    }
    let m = basis.size();
    let p = obs.len() - 2;

    // Nonzero basis values per observation; histograms have exactly one.
    let mut scratch = vec![0.0; m];
    let sparse: Vec<Vec<(usize, f64)>> = obs
        .iter()
        .map(|&y| {
            basis.eval_into(y, &mut scratch);
            scratch
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i, *v))
                .collect()
        })
        .collect();

    let mut l = DVector::zeros(m);
    let mut n = Mat::zeros(m, m);
    let mut pm = Mat::zeros(m, m);
    let mut m3 = Tensor3::zeros(m);
    let data = m3.as_mut_slice();
    for s in 0..p {
        let (first, second, third) = (&sparse[s], &sparse[s + 1], &sparse[s + 2]);
        for &(a, va) in first {
            l[a] += va;
            for &(c, vc) in third {
                pm[(a, c)] += va * vc;
            }
            for &(b, vb) in second {
                let ab = va * vb;
                n[(a, b)] += ab;
                let row = (a * m + b) * m;
                for &(c, vc) in third {
                    data[row + c] += ab * vc;
                }
            }
        }
    }
    let inv = 1.0 / p as f64;
    l *= inv;
    n *= inv;
    pm *= inv;
    data.iter_mut().for_each(|v| *v *= inv);
    Ok(MomentSet {
        l,
        n,
        p: pm,
        m3,
        sample_count: Some(p),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Number of hidden states.
    pub k: usize,
    /// Seed of the first rotation draw.
    pub seed: u64,
    /// Extra rotation draws allowed after an eigenvalue-separation failure.
    pub retries: usize,
}

impl FitOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        Self { k, seed, retries: 8 }
    }
}

/// Numerical health of one fit. Non-finite values (an infinite eigenvalue
/// gap when `K = 1`, say) are written as the strings `inf`, `-inf`, `nan`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(with = "extended_f64")]
    pub sigma_1_p: f64,
    /// `σ_K` of the lag-two moment matrix.
    #[serde(with = "extended_f64")]
    pub sigma_k_p: f64,
    /// `σ_{K+1}`, zero when `M = K`.
    #[serde(with = "extended_f64")]
    pub sigma_k1_p: f64,
    #[serde(with = "extended_f64")]
    pub eig_min_gap: f64,
    /// Largest off-diagonal Frobenius mass of `R⁻¹ C(x) R` over `x`.
    #[serde(with = "extended_f64")]
    pub offdiag_residual: f64,
    #[serde(with = "extended_f64")]
    pub cond_utpu: f64,
    #[serde(with = "extended_f64")]
    pub cond_r: f64,
    #[serde(with = "extended_f64")]
    pub cond_uto: f64,
    #[serde(with = "extended_f64")]
    pub cond_uto_dpi: f64,
    pub rotation_redraws: usize,
    /// Whether `Q̂` is irreducible and aperiodic after projection.
    pub q_hat_primitive: bool,
    pub seed: u64,
    pub rotation_seed: u64,
    pub sample_count: Option<usize>,
}

mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("expected a number, got {other:?}"))),
            },
        }
    }
}

/// Output of the spectral estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    pub basis: BasisSpec,
    /// `M × K` emission coefficients, one column per state.
    pub o_hat: Mat,
    /// Stationary-law surrogate before any simplex constraint.
    pub pi_tilde: Vec<f64>,
    pub q_hat: Mat,
    pub pi_hat: ProbVec,
    pub diagnostics: Diagnostics,
}

#[derive(Serialize, Deserialize)]
struct EstimateFile {
    basis: BasisSpec,
    k: usize,
    o_hat: Vec<Vec<f64>>,
    pi_tilde: Vec<f64>,
    q_hat: Vec<Vec<f64>>,
    pi_hat: ProbVec,
    diagnostics: Diagnostics,
}

impl Serialize for SpectralEstimate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        EstimateFile {
            basis: self.basis,
            k: self.k(),
            o_hat: mat_to_rows(&self.o_hat),
            pi_tilde: self.pi_tilde.clone(),
            q_hat: mat_to_rows(&self.q_hat),
            pi_hat: self.pi_hat.clone(),
            diagnostics: self.diagnostics.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpectralEstimate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let f = EstimateFile::deserialize(d)?;
        let o_hat = rows_to_mat(&f.o_hat).map_err(D::Error::custom)?;
        let q_hat = rows_to_mat(&f.q_hat).map_err(D::Error::custom)?;
        if o_hat.nrows() != f.basis.size() || o_hat.ncols() != f.k || q_hat.nrows() != f.k {
            return Err(D::Error::custom("estimate dimensions disagree"));
        }
        Ok(SpectralEstimate {
            basis: f.basis,
            o_hat,
            pi_tilde: f.pi_tilde,
            q_hat,
            pi_hat: f.pi_hat,
            diagnostics: f.diagnostics,
        })
    }
}

impl SpectralEstimate {
    pub fn k(&self) -> usize {
        self.o_hat.ncols()
    }

    /// Estimated (unclamped) emission densities at `y`.
    pub fn emission_values(&self, y: f64, scratch: &mut [f64]) -> Vec<f64> {
        self.basis.eval_into(y, scratch);
        (0..self.k())
            .map(|x| {
                self.o_hat
                    .column(x)
                    .iter()
                    .zip(scratch.iter())
                    .map(|(o, p)| o * p)
                    .sum()
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Seed of the `attempt`-th rotation draw.
fn rotation_seed(seed: u64, attempt: usize) -> u64 {
    if attempt == 0 {
        seed
    } else {
        seed ^ (attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

struct Diagonalized {
    o_hat: Mat,
    eig_min_gap: f64,
    offdiag_residual: f64,
    cond_r: f64,
}

/// Joint diagonalization for one rotation `Θ`; returns `Ô = UΘΛ`.
fn diagonalize(
    moments: &MomentSet,
    u: &Mat,
    utpu_inv: &Mat,
    theta: &Mat,
) -> Result<Diagonalized> {
    let k = u.ncols();
    let w = u * theta;
    let c: Vec<Mat> = (0..k)
        .map(|x| {
            let weights: Vec<f64> = w.column(x).iter().cloned().collect();
            utpu_inv * u.transpose() * moments.m3.contract_middle(&weights) * u
        })
        .collect();
    let eig = real_eig_distinct(&c[0], EIGEN_SEP_TOL)?;
    let r = eig.vectors;
    let (r_inv, cond_r) = checked_inverse(&r, "eigenvector matrix R")?;
    let mut lambda = Mat::zeros(k, k);
    let mut offdiag_residual: f64 = 0.0;
    for (x, cx) in c.iter().enumerate() {
        let d = &r_inv * cx * &r;
        let mut off = 0.0;
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    lambda[(x, i)] = d[(i, i)];
                } else {
                    off += d[(i, j)] * d[(i, j)];
                }
            }
        }
        offdiag_residual = offdiag_residual.max(off.sqrt());
    }
    Ok(Diagonalized {
        o_hat: w * lambda,
        eig_min_gap: eig.min_gap,
        offdiag_residual,
        cond_r,
    })
}

/// Recovers emission coefficients, transition matrix and stationary law
/// from basis moments.
pub fn fit(moments: &MomentSet, basis: &BasisSpec, opts: &FitOptions) -> Result<SpectralEstimate> {
    let (m, k) = (moments.dim(), opts.k);
    if basis.size() != m {
        return Err(Error::Dimension(format!(
            "moments have dimension {m} but the basis has size {}",
            basis.size()
        )));
    }
    if k == 0 || k > m {
        return Err(Error::Dimension(format!(
            "need 1 <= K <= M, got K = {k}, M = {m}"
        )));
    }

    let svd = truncated_svd(&moments.p, k).map_err(|e| match e {
        Error::RankDeficient {
            sigma_min,
            condition,
            ..
        } => Error::RankDeficient {
            what: "lag-two moment matrix P".into(),
            sigma_min,
            condition,
        },
        other => other,
    })?;
    let u = svd.v;
    let ut = u.transpose();
    let (utpu_inv, cond_utpu) = checked_inverse(&(&ut * &moments.p * &u), "UᵀPU")?;

    let mut last_err = None;
    let mut found = None;
    for attempt in 0..=opts.retries {
        let rseed = rotation_seed(opts.seed, attempt);
        let theta = haar_orthogonal(k, rseed);
        match diagonalize(moments, &u, &utpu_inv, &theta) {
            Ok(d) => {
                found = Some((attempt, rseed, d));
                break;
            }
            Err(e @ Error::EigenSeparation(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    let (redraws, rseed, diag) = found.ok_or_else(|| Error::Diagonalization {
        attempts: opts.retries + 1,
        last: last_err.map(|e| e.to_string()).unwrap_or_default(),
    })?;
    let o_hat = diag.o_hat;

    let uto = &ut * &o_hat;
    let (uto_inv, cond_uto) = checked_inverse(&uto, "UᵀÔ")?;
    let pi_tilde_v = &uto_inv * (&ut * &moments.l);
    let pi_tilde: Vec<f64> = pi_tilde_v.iter().cloned().collect();
    if let Some((x, v)) = pi_tilde
        .iter()
        .enumerate()
        .find(|(_, v)| v.abs() < PI_TILDE_FLOOR)
    {
        return Err(Error::Estimation(format!(
            "stationary surrogate entry {x} is {v:e}, too small to invert"
        )));
    }

    let scaled = &uto * Mat::from_diagonal(&pi_tilde_v);
    let (scaled_inv, cond_uto_dpi) = checked_inverse(&scaled, "UᵀÔ D_π̃")?;
    let (otu_inv, _) = checked_inverse(&uto.transpose(), "ÔᵀU")?;
    let raw_q = scaled_inv * &ut * &moments.n * &u * otu_inv;
    let q_hat = project_row_stochastic(&raw_q);
    let q_hat_primitive = is_primitive(&q_hat);
    let pi_hat = if q_hat_primitive {
        stationary_of(&q_hat)?
    } else {
        stationary_unichain(&q_hat)?
    };

    let s = &svd.singular_values;
    Ok(SpectralEstimate {
        basis: *basis,
        o_hat,
        pi_tilde,
        q_hat,
        pi_hat,
        diagnostics: Diagnostics {
            sigma_1_p: s[0],
            sigma_k_p: s[k - 1],
            sigma_k1_p: s.get(k).copied().unwrap_or(0.0),
            eig_min_gap: diag.eig_min_gap,
            offdiag_residual: diag.offdiag_residual,
            cond_utpu,
            cond_r: diag.cond_r,
            cond_uto,
            cond_uto_dpi,
            rotation_redraws: redraws,
            q_hat_primitive,
            seed: opts.seed,
            rotation_seed: rseed,
            sample_count: moments.sample_count,
        },
    })
}

/// Column `x` of `Ô` as a coefficient vector in the estimate's basis.
pub fn emission_estimates(est: &SpectralEstimate) -> Vec<CoeffVec> {
    (0..est.k())
        .map(|x| CoeffVec {
            basis: est.basis,
            coefficients: est.o_hat.column(x).iter().cloned().collect(),
        })
        .collect()
}
