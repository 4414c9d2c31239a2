//! Forward filtering and backward marginal smoothing for finite-state HMMs,
//! with either the true parameters or plugged-in spectral estimates.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::HmmSpec;
use crate::numerics::{Mat, ProbVec};
use crate::spectral::SpectralEstimate;

/// Normalizers below this are treated as underflow.
pub const UNDERFLOW: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    TrueDensity,
    ProjectionEstimate,
}

/// Pointwise evaluation of the `K` emission densities.
pub trait EmissionEval {
    fn k(&self) -> usize;
    /// Writes `(f_1(y), …, f_K(y))` into `out`; values may be negative.
    fn eval(&self, y: f64, out: &mut [f64]);
    fn provenance(&self) -> Provenance;
}

/// Emission densities of a known model.
pub struct TrueEmissions<'a>(pub &'a HmmSpec);

impl EmissionEval for TrueEmissions<'_> {
    fn k(&self) -> usize {
        self.0.k()
    }
    fn eval(&self, y: f64, out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(self.0.emissions()) {
            *o = e.pdf(y);
        }
    }
    fn provenance(&self) -> Provenance {
        Provenance::TrueDensity
    }
}

/// Projection estimates `Σ_m Ô(m, x) φ_m` from a spectral fit.
pub struct ProjectionEmissions<'a> {
    est: &'a SpectralEstimate,
    scratch: std::cell::RefCell<Vec<f64>>,
}

impl<'a> ProjectionEmissions<'a> {
    pub fn new(est: &'a SpectralEstimate) -> Self {
        Self {
            est,
            scratch: std::cell::RefCell::new(vec![0.0; est.basis.size()]),
        }
    }
}

impl EmissionEval for ProjectionEmissions<'_> {
    fn k(&self) -> usize {
        self.est.k()
    }
    fn eval(&self, y: f64, out: &mut [f64]) {
        let mut phi = self.scratch.borrow_mut();
        let v = self.est.emission_values(y, &mut phi);
        out.copy_from_slice(&v);
    }
    fn provenance(&self) -> Provenance {
        Provenance::ProjectionEstimate
    }
}

/// Filtering distributions and the steps where the normalizer underflowed.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub rows: Vec<Vec<f64>>,
    pub degenerate_steps: Vec<usize>,
    /// Number of negative emission values clamped to zero.
    pub clamped: usize,
}

fn normalize_in_place(v: &mut [f64]) -> bool {
    let s: f64 = v.iter().sum();
    if s < UNDERFLOW || !s.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= s);
    true
}

fn check_dims(q: &Mat, pi: &ProbVec, k: usize) -> Result<()> {
    if !q.is_square() || q.nrows() != k || pi.dim() != k {
        return Err(Error::Dimension(format!(
            "q is {}x{}, pi has {} entries, emissions have {k} states",
            q.nrows(),
            q.ncols(),
            pi.dim()
        )));
    }
    Ok(())
}

pub fn forward_filter(
    q: &Mat,
    pi: &ProbVec,
    emit: &dyn EmissionEval,
    obs: &[f64],
) -> Result<FilterOutput> {
    let k = emit.k();
    check_dims(q, pi, k)?;
    if obs.is_empty() {
        return Err(Error::InsufficientData { got: 0, need: 1 });
    }
    if let Some(&bad) = obs.iter().find(|y| !(0.0..=1.0).contains(*y)) {
        return Err(Error::Domain {
            value: bad,
            domain: "[0, 1]",
        });
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(obs.len());
    let mut degenerate_steps = Vec::new();
    let mut clamped = 0;
    let mut f = vec![0.0; k];
    for (t, &y) in obs.iter().enumerate() {
        emit.eval(y, &mut f);
        for v in f.iter_mut() {
            if *v < 0.0 || v.is_nan() {
                *v = 0.0;
                clamped += 1;
            }
        }
        let predictive: Vec<f64> = match rows.last() {
            None => pi.as_slice().to_vec(),
            Some(prev) => (0..k)
                .map(|x| (0..k).map(|z| q[(z, x)] * prev[z]).sum())
                .collect(),
        };
        let mut row: Vec<f64> = predictive.iter().zip(&f).map(|(p, fx)| p * fx).collect();
        if !normalize_in_place(&mut row) {
            degenerate_steps.push(t);
            row = predictive;
            if !normalize_in_place(&mut row) {
                row = vec![1.0 / k as f64; k];
            }
        }
        rows.push(row);
    }
    Ok(FilterOutput {
        rows,
        degenerate_steps,
        clamped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothOutput {
    pub rows: Vec<Vec<f64>>,
    pub degenerate_steps: Vec<usize>,
}

/// Backward pass: `smooth_k(x) = Σ_{x'} B_k(x', x) smooth_{k+1}(x')` with
/// `B_k(u, v) = q(v, u) filter_k(v) / Σ_z q(z, u) filter_k(z)`.
pub fn backward_smooth(q: &Mat, filter: &[Vec<f64>]) -> Result<SmoothOutput> {
    let k = q.nrows();
    if !q.is_square() || filter.iter().any(|r| r.len() != k) {
        return Err(Error::Dimension("filter rows do not match q".into()));
    }
    let n = filter.len();
    if n == 0 {
        return Err(Error::InsufficientData { got: 0, need: 1 });
    }
    let mut rows = vec![Vec::new(); n];
    rows[n - 1] = filter[n - 1].clone();
    let mut degenerate_steps = Vec::new();
    for t in (0..n - 1).rev() {
        let phi = &filter[t];
        let next = &rows[t + 1];
        let mut row = vec![0.0; k];
        let mut flagged = false;
        for u in 0..k {
            let denom: f64 = (0..k).map(|z| q[(z, u)] * phi[z]).sum();
            if denom < UNDERFLOW {
                flagged = true;
                for r in row.iter_mut() {
                    *r += next[u] / k as f64;
                }
            } else {
                for v in 0..k {
                    row[v] += q[(v, u)] * phi[v] / denom * next[u];
                }
            }
        }
        if flagged {
            degenerate_steps.push(t);
        }
        if !normalize_in_place(&mut row) {
            row = vec![1.0 / k as f64; k];
            if !flagged {
                degenerate_steps.push(t);
            }
        }
        rows[t] = row;
    }
    degenerate_steps.reverse();
    Ok(SmoothOutput {
        rows,
        degenerate_steps,
    })
}

/// `Σ_x |p(x) − r(x)|` (total mass of the signed difference, in [0, 2]).
pub fn tv_distance(p: &[f64], r: &[f64]) -> Result<f64> {
    if p.len() != r.len() {
        return Err(Error::Dimension(format!(
            "distributions of dimension {} and {}",
            p.len(),
            r.len()
        )));
    }
    Ok(p.iter().zip(r).map(|(a, b)| (a - b).abs()).sum())
}

/// Half of [`tv_distance`], in [0, 1].
pub fn tv_distance_half(p: &[f64], r: &[f64]) -> Result<f64> {
    tv_distance(p, r).map(|d| 0.5 * d)
}

/// Filtering and marginal smoothing distributions along one observation record.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTrack {
    pub filter: Vec<Vec<f64>>,
    pub smooth: Vec<Vec<f64>>,
    /// Sorted time indices (0-based) where a fallback was used in either pass.
    pub degenerate_steps: Vec<usize>,
    pub clamped: usize,
}

impl PosteriorTrack {
    pub fn len(&self) -> usize {
        self.filter.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filter.is_empty()
    }

    /// Rows expressed in another labeling: new state `x` is old state `perm[x]`.
    pub fn relabeled(&self, perm: &[usize]) -> PosteriorTrack {
        let map = |rows: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| perm.iter().map(|&i| r[i]).collect())
                .collect()
        };
        PosteriorTrack {
            filter: map(&self.filter),
            smooth: map(&self.smooth),
            degenerate_steps: self.degenerate_steps.clone(),
            clamped: self.clamped,
        }
    }

    /// CSV with columns `time,state,filter_prob,smooth_prob,degenerate_flag`;
    /// time and state are 1-based.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["time", "state", "filter_prob", "smooth_prob", "degenerate_flag"])
            .map_err(csv_err)?;
        for t in 0..self.len() {
            let flag = u8::from(self.degenerate_steps.binary_search(&t).is_ok());
            for x in 0..self.filter[t].len() {
                wtr.write_record(&[
                    (t + 1).to_string(),
                    (x + 1).to_string(),
                    self.filter[t][x].to_string(),
                    self.smooth[t][x].to_string(),
                    flag.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Runs both passes with the given parameters.
pub fn posteriors(
    q: &Mat,
    pi: &ProbVec,
    emit: &dyn EmissionEval,
    obs: &[f64],
) -> Result<PosteriorTrack> {
    let f = forward_filter(q, pi, emit, obs)?;
    let s = backward_smooth(q, &f.rows)?;
    let mut degenerate_steps = f.degenerate_steps;
    degenerate_steps.extend(s.degenerate_steps);
    degenerate_steps.sort_unstable();
    degenerate_steps.dedup();
    Ok(PosteriorTrack {
        filter: f.rows,
        smooth: s.rows,
        degenerate_steps,
        clamped: f.clamped,
    })
}

/// Posteriors computed with the true parameters.
pub fn oracle_posteriors(hmm: &HmmSpec, obs: &[f64]) -> Result<PosteriorTrack> {
    posteriors(hmm.q(), hmm.pi(), &TrueEmissions(hmm), obs)
}

/// Posteriors computed with `(Q̂, π̂, f̂)`, negative density values clamped at 0.
pub fn plugin_posteriors(est: &SpectralEstimate, obs: &[f64]) -> Result<PosteriorTrack> {
    posteriors(&est.q_hat, &est.pi_hat, &ProjectionEmissions::new(est), obs)
}
