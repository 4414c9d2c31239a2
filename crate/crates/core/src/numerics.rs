//! Small dense kernels used by the spectral estimator.
//!
//! Everything here targets the regime of a handful of hidden states and at
//! most a few hundred basis functions. Decompositions are delegated to
//! `nalgebra`; this module adds the ordering, sign and rank conventions the
//! estimator relies on.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// Singular values below this are treated as exact zeros.
pub const RANK_TOL: f64 = 1e-13;

/// Default minimal separation between eigenvalues of a matrix to diagonalize.
pub const EIGEN_SEP_TOL: f64 = 1e-9;

/// A probability vector: nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVec(Vec<f64>);

impl ProbVec {
    /// Validates `weights` (nonnegative, finite, sum within 1e-9 of one) and
    /// rescales them so the sum is one to machine precision.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Dimension("empty probability vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Domain {
                value: weights.iter().cloned().fold(f64::INFINITY, f64::min),
                domain: "nonnegative finite weights",
            });
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain {
                value: total,
                domain: "probability vector sum = 1",
            });
        }
        Ok(Self(weights.into_iter().map(|w| w / total).collect()))
    }

    /// Normalizes nonnegative weights with a positive total.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Domain {
                value: total,
                domain: "positive total mass",
            });
        }
        Ok(Self(weights.into_iter().map(|w| w / total).collect()))
    }

    pub fn uniform(dim: usize) -> Self {
        Self(vec![1.0 / dim as f64; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }
}

impl TryFrom<Vec<f64>> for ProbVec {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        ProbVec::new(v)
    }
}

impl From<ProbVec> for Vec<f64> {
    fn from(p: ProbVec) -> Self {
        p.0
    }
}

impl std::ops::Index<usize> for ProbVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Dense cubic tensor `T(a, b, c)` stored with `c` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn from_vec(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim * dim {
            return Err(Error::Dimension(format!(
                "tensor of side {dim} needs {} entries, got {}",
                dim * dim * dim,
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn offset(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.dim + b) * self.dim + c
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[self.offset(a, b, c)]
    }

    #[inline]
    pub fn get_mut(&mut self, a: usize, b: usize, c: usize) -> &mut f64 {
        let o = self.offset(a, b, c);
        &mut self.data[o]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// The matrix `T(·, b, ·)`.
    pub fn middle_slice(&self, b: usize) -> Mat {
        Mat::from_fn(self.dim, self.dim, |a, c| self.get(a, b, c))
    }

    /// `Σ_b w_b T(·, b, ·)`.
    pub fn contract_middle(&self, w: &[f64]) -> Mat {
        assert_eq!(w.len(), self.dim);
        Mat::from_fn(self.dim, self.dim, |a, c| {
            (0..self.dim).map(|b| w[b] * self.get(a, b, c)).sum()
        })
    }

    pub fn frobenius_distance(&self, other: &Tensor3) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

/// Right singular vectors for the leading singular values of a matrix.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// Orthonormal columns spanning the top-k right singular subspace.
    pub v: Mat,
    /// All singular values, sorted descending.
    pub singular_values: Vec<f64>,
}

/// Flips a vector so its largest-magnitude entry (first on ties) is positive.
fn canonical_sign(mut v: DVector<f64>) -> DVector<f64> {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
    v
}

pub fn truncated_svd(a: &Mat, k: usize) -> Result<TruncatedSvd> {
    let rank_cap = a.nrows().min(a.ncols());
    if k == 0 || k > rank_cap {
        return Err(Error::Dimension(format!(
            "cannot take {k} singular vectors of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let svd = a.clone().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Estimation("SVD did not return right singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let sigma_k = singular_values[k - 1];
    if sigma_k < RANK_TOL {
        return Err(Error::RankDeficient {
            what: format!("top-{k} singular subspace"),
            sigma_min: sigma_k,
            condition: singular_values[0] / sigma_k,
        });
    }
    let mut v = Mat::zeros(a.ncols(), k);
    for (col, &i) in order.iter().take(k).enumerate() {
        let row = v_t.row(i).transpose();
        v.set_column(col, &canonical_sign(row));
    }
    Ok(TruncatedSvd { v, singular_values })
}

/// Orthonormal right singular vectors of `a` for its top `k` singular values.
pub fn top_k_right_singular(a: &Mat, k: usize) -> Result<Mat> {
    truncated_svd(a, k).map(|s| s.v)
}

pub fn singular_values(a: &Mat) -> Vec<f64> {
    let mut s: Vec<f64> = a.singular_values().iter().cloned().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// `σ_max / σ_min`; infinite for singular input.
pub fn condition_number(a: &Mat) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Inverse of a square matrix, refusing anything with σ_min below [`RANK_TOL`].
/// Returns the inverse and the condition number.
pub fn checked_inverse(a: &Mat, what: &str) -> Result<(Mat, f64)> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("{what} is not square")));
    }
    let s = singular_values(a);
    let (hi, lo) = (s[0], *s.last().unwrap());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if lo < RANK_TOL {
        return Err(Error::RankDeficient {
            what: what.to_string(),
            sigma_min: lo,
            condition,
        });
    }
    let inv = a.clone().try_inverse().ok_or_else(|| Error::RankDeficient {
        what: what.to_string(),
        sigma_min: lo,
        condition,
    })?;
    Ok((inv, condition))
}

/// Eigendecomposition of a matrix with real, well separated eigenvalues.
#[derive(Debug, Clone)]
pub struct RealEigen {
    /// Unit-norm eigenvectors as columns, matched with `values`.
    pub vectors: Mat,
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Smallest gap between consecutive eigenvalues.
    pub min_gap: f64,
}

/// Diagonalizes `c`, requiring real eigenvalues pairwise separated by more
/// than `sep_tol` (relative to `max(1, max|λ|)`).
pub fn real_eig_distinct(c: &Mat, sep_tol: f64) -> Result<RealEigen> {
    if !c.is_square() {
        return Err(Error::Dimension("eigendecomposition needs a square matrix".into()));
    }
    let k = c.nrows();
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenSeparation("non-finite matrix entries".into()));
    }
    let schur = c.clone().schur();
    let (_, t) = schur.unpack();
    // Real Schur form: a nonzero subdiagonal entry marks a complex pair.
    let scale = c.norm().max(1.0);
    for i in 0..k.saturating_sub(1) {
        if t[(i + 1, i)].abs() > 1e-12 * scale {
            return Err(Error::EigenSeparation("complex eigenvalue pair".into()));
        }
    }
    let mut values: Vec<f64> = (0..k).map(|i| t[(i, i)]).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let lam_scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let min_gap = values
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::INFINITY, f64::min);
    if k > 1 && min_gap <= sep_tol * lam_scale {
        return Err(Error::EigenSeparation(format!(
            "eigenvalue gap {min_gap:e} below tolerance"
        )));
    }

    let mut vectors = Mat::zeros(k, k);
    for (col, &lam) in values.iter().enumerate() {
        let shifted = c - Mat::identity(k, k) * lam;
        let svd = shifted.svd(false, true);
        let v_t = svd
            .v_t
            .ok_or_else(|| Error::EigenSeparation("SVD failed".into()))?;
        let mut smallest = 0;
        for i in 1..svd.singular_values.len() {
            if svd.singular_values[i] < svd.singular_values[smallest] {
                smallest = i;
            }
        }
        let v = v_t.row(smallest).transpose();
        let v = &v / v.norm();
        vectors.set_column(col, &canonical_sign(v));
    }

    let lam = Mat::from_diagonal(&DVector::from_column_slice(&values));
    let residual = (c * &vectors - &vectors * lam).norm();
    if residual > 1e-8 * c.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::EigenSeparation(format!(
            "eigenvector residual {residual:e} too large"
        )));
    }
    Ok(RealEigen {
        vectors,
        values,
        min_gap,
    })
}

/// Euclidean projection of `v` onto the probability simplex
/// (sort-and-threshold).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Frobenius-nearest row-stochastic matrix: each row projected onto the simplex.
pub fn project_row_stochastic(a: &Mat) -> Mat {
    let mut out = a.clone();
    for i in 0..a.nrows() {
        let row: Vec<f64> = a.row(i).iter().cloned().collect();
        let p = project_simplex(&row);
        for (j, x) in p.into_iter().enumerate() {
            out[(i, j)] = x;
        }
    }
    out
}

pub fn is_row_stochastic(q: &Mat, tol: f64) -> bool {
    q.is_square()
        && q.iter().all(|&x| x >= -tol && x.is_finite())
        && q.row_iter().all(|r| (r.sum() - 1.0).abs() <= tol)
}

/// Whether some power `q^j`, `j ≤ K²`, is entrywise positive (irreducible
/// and aperiodic). Works on the zero pattern only.
pub fn is_primitive(q: &Mat) -> bool {
    let k = q.nrows();
    let pattern: Vec<bool> = (0..k * k).map(|i| q[(i / k, i % k)] > 0.0).collect();
    let mut power = pattern.clone();
    for _ in 0..k * k {
        if power.iter().all(|&b| b) {
            return true;
        }
        let mut next = vec![false; k * k];
        for i in 0..k {
            for j in 0..k {
                next[i * k + j] = (0..k).any(|l| power[i * k + l] && pattern[l * k + j]);
            }
        }
        power = next;
    }
    power.iter().all(|&b| b)
}

/// Stationary law of a primitive transition matrix, from the least-squares
/// solution of `[I − qᵀ; 1ᵀ] π = (0, …, 0, 1)`.
pub fn stationary_of(q: &Mat) -> Result<ProbVec> {
    if !is_row_stochastic(q, 1e-9) {
        return Err(Error::Structure("matrix is not row-stochastic".into()));
    }
    if !is_primitive(q) {
        return Err(Error::Structure("chain is reducible or periodic".into()));
    }
    stationary_least_squares(q)
}

/// Stationary law of a row-stochastic matrix with a single recurrent class,
/// which need not be primitive (e.g. with transient or absorbing states).
pub fn stationary_unichain(q: &Mat) -> Result<ProbVec> {
    if !is_row_stochastic(q, 1e-9) {
        return Err(Error::Structure("matrix is not row-stochastic".into()));
    }
    let k = q.nrows();
    // I − qᵀ has rank K − 1 exactly when one recurrent class exists
    let s = singular_values(&(Mat::identity(k, k) - q.transpose()));
    if k > 1 && s[k - 2] < 1e-10 {
        return Err(Error::Structure("chain has several recurrent classes".into()));
    }
    stationary_least_squares(q)
}

fn stationary_least_squares(q: &Mat) -> Result<ProbVec> {
    let k = q.nrows();
    let mut a = Mat::zeros(k + 1, k);
    let top = Mat::identity(k, k) - q.transpose();
    a.view_mut((0, 0), (k, k)).copy_from(&top);
    for j in 0..k {
        a[(k, j)] = 1.0;
    }
    let mut b = DVector::zeros(k + 1);
    b[k] = 1.0;
    let pi = pinv_solve(&a, &b)?;
    let cleaned: Vec<f64> = pi.iter().map(|&x| x.max(0.0)).collect();
    ProbVec::normalized(cleaned)
}

/// A Haar-distributed real orthogonal matrix, deterministic per seed.
pub fn haar_orthogonal(k: usize, seed: u64) -> Mat {
    assert!(k >= 1, "haar_orthogonal needs k >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Mat::from_fn(k, k, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Least-squares solution of `a x = b`; exact inverse for square input.
pub fn pinv_solve(a: &Mat, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != b.len() {
        return Err(Error::Dimension(format!(
            "system has {} rows but right-hand side has {}",
            a.nrows(),
            b.len()
        )));
    }
    if a.is_square() {
        let (inv, _) = checked_inverse(a, "square system")?;
        return Ok(inv * b);
    }
    let svd = a.clone().svd(true, true);
    svd.solve(b, RANK_TOL)
        .map_err(|e| Error::Estimation(format!("least squares: {e}")))
}

pub fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

pub fn rows_to_mat(rows: &[Vec<f64>]) -> Result<Mat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged nested array".into()));
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn projector(v: &Mat) -> Mat {
        v * v.transpose()
    }

    #[test]
    fn svd_of_diagonal_picks_coordinate_axes() {
        let a = Mat::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let v = top_k_right_singular(&a, 2).unwrap();
        assert_abs_diff_eq!(v, Mat::identity(3, 2), epsilon = 1e-14);
    }

    #[test]
    fn svd_of_identity_is_orthonormal() {
        let v = top_k_right_singular(&Mat::identity(4, 4), 4).unwrap();
        assert_abs_diff_eq!(v.transpose() * &v, Mat::identity(4, 4), epsilon = 1e-12);
    }

    #[test]
    fn svd_recovers_planted_subspace() {
        let u0 = haar_orthogonal(8, 1);
        let v0 = haar_orthogonal(8, 2);
        let sigma = DVector::from_vec(vec![9.0, 7.0, 5.0, 1.0, 0.5, 0.2, 0.1, 0.01]);
        let a = &u0 * Mat::from_diagonal(&sigma) * v0.transpose();
        let v = top_k_right_singular(&a, 3).unwrap();
        let expected = projector(&v0.columns(0, 3).into_owned());
        assert!((projector(&v) - expected).norm() < 1e-10);
    }

    #[test]
    fn svd_rejects_bad_rank_requests() {
        let a = Mat::identity(3, 3);
        assert!(matches!(top_k_right_singular(&a, 4), Err(Error::Dimension(_))));
        assert!(matches!(top_k_right_singular(&a, 0), Err(Error::Dimension(_))));
        let mut low = Mat::zeros(3, 3);
        low[(0, 0)] = 1.0;
        assert!(matches!(
            top_k_right_singular(&low, 2),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn eig_of_diagonal() {
        let c = Mat::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        let e = real_eig_distinct(&c, EIGEN_SEP_TOL).unwrap();
        assert_eq!(e.values, vec![2.0, 1.0]);
        assert_abs_diff_eq!(e.vectors, Mat::identity(2, 2), epsilon = 1e-14);
    }

    #[test]
    fn eig_of_similarity_transform() {
        let s = Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let d = Mat::from_diagonal(&DVector::from_vec(vec![5.0, -1.0]));
        let c = &s * d * s.clone().try_inverse().unwrap();
        let e = real_eig_distinct(&c, EIGEN_SEP_TOL).unwrap();
        assert_abs_diff_eq!(e.values[0], 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.values[1], -1.0, epsilon = 1e-12);
        let r = &e.vectors;
        let lam = Mat::from_diagonal(&DVector::from_vec(e.values.clone()));
        assert!((&c * r - r * lam).norm() <= 1e-10);
        // columns are the columns of s, normalized: (1,0) and (1,1)/√2
        assert_abs_diff_eq!(r[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r[(1, 0)], 0.0, epsilon = 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(r[(0, 1)], h, epsilon = 1e-12);
        assert_abs_diff_eq!(r[(1, 1)], h, epsilon = 1e-12);
    }

    #[test]
    fn eig_of_rank_one_averaging_matrix() {
        let c = Mat::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let e = real_eig_distinct(&c, EIGEN_SEP_TOL).unwrap();
        assert_abs_diff_eq!(e.values[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 0.0, epsilon = 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(e.vectors[(0, 0)], h, epsilon = 1e-12);
        assert_abs_diff_eq!(e.vectors[(1, 0)], h, epsilon = 1e-12);
        assert_abs_diff_eq!(e.vectors[(0, 1)].abs(), h, epsilon = 1e-12);
        assert_abs_diff_eq!(e.vectors[(0, 1)] + e.vectors[(1, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn eig_rejects_rotation_and_repeated_values() {
        let rot = Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!(matches!(
            real_eig_distinct(&rot, EIGEN_SEP_TOL),
            Err(Error::EigenSeparation(_))
        ));
        assert!(matches!(
            real_eig_distinct(&Mat::identity(3, 3), EIGEN_SEP_TOL),
            Err(Error::EigenSeparation(_))
        ));
    }

    #[test]
    fn row_projection_examples() {
        let q = Mat::from_row_slice(2, 2, &[0.4, 0.6, 0.8, 0.2]);
        assert_abs_diff_eq!(project_row_stochastic(&q), q, epsilon = 1e-15);
        let p = project_simplex(&[0.5, 0.7]);
        assert_abs_diff_eq!(p[0], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.6, epsilon = 1e-15);
        assert_eq!(project_simplex(&[-0.1, 0.9]), vec![0.0, 1.0]);
    }

    #[test]
    fn stationary_examples() {
        let q = Mat::from_row_slice(2, 2, &[0.4, 0.6, 0.8, 0.2]);
        let pi = stationary_of(&q).unwrap();
        assert_abs_diff_eq!(pi[0], 4.0 / 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pi[1], 3.0 / 7.0, epsilon = 1e-12);
        for q in [
            Mat::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]),
            Mat::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9]),
        ] {
            let pi = stationary_of(&q).unwrap();
            assert_abs_diff_eq!(pi[0], 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn stationary_rejects_reducible_and_periodic() {
        let flip = Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(stationary_of(&flip), Err(Error::Structure(_))));
        assert!(matches!(
            stationary_of(&Mat::identity(2, 2)),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn unichain_stationary() {
        let absorbing = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.3, 0.7]);
        let pi = stationary_unichain(&absorbing).unwrap();
        assert_abs_diff_eq!(pi[0], 1.0, epsilon = 1e-12);
        let flip = Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_abs_diff_eq!(stationary_unichain(&flip).unwrap()[0], 0.5, epsilon = 1e-12);
        assert!(stationary_unichain(&Mat::identity(2, 2)).is_err());
    }

    #[test]
    fn haar_is_orthogonal_and_deterministic() {
        let one = haar_orthogonal(1, 99);
        assert_abs_diff_eq!(one[(0, 0)].abs(), 1.0, epsilon = 1e-15);
        let t = haar_orthogonal(3, 7);
        assert!((t.transpose() * &t - Mat::identity(3, 3)).norm() <= 1e-12);
        assert_abs_diff_eq!(t.determinant().abs(), 1.0, epsilon = 1e-10);
        assert_eq!(t, haar_orthogonal(3, 7));
    }

    #[test]
    fn haar_first_column_angle_is_uniform() {
        let n = 10_000;
        let mut angles: Vec<f64> = (0..n)
            .map(|s| {
                let t = haar_orthogonal(2, s as u64);
                let a = t[(1, 0)].atan2(t[(0, 0)]);
                (a + std::f64::consts::PI) / (2.0 * std::f64::consts::PI)
            })
            .collect();
        angles.sort_by(f64::total_cmp);
        let ks = angles
            .iter()
            .enumerate()
            .map(|(i, &u)| {
                let lo = (u - i as f64 / n as f64).abs();
                let hi = ((i + 1) as f64 / n as f64 - u).abs();
                lo.max(hi)
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "KS statistic {ks}");
    }

    #[test]
    fn pinv_examples() {
        let x = pinv_solve(&Mat::identity(2, 2), &DVector::from_vec(vec![3.0, 4.0])).unwrap();
        assert_abs_diff_eq!(x, DVector::from_vec(vec![3.0, 4.0]), epsilon = 1e-15);
        let a = Mat::from_diagonal(&DVector::from_vec(vec![2.0, 4.0]));
        let x = pinv_solve(&a, &DVector::from_vec(vec![2.0, 8.0])).unwrap();
        assert_abs_diff_eq!(x, DVector::from_vec(vec![1.0, 2.0]), epsilon = 1e-15);
        let a = Mat::from_row_slice(2, 1, &[1.0, 1.0]);
        let x = pinv_solve(&a, &DVector::from_vec(vec![0.0, 2.0])).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn pinv_rejects_singular_square() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            pinv_solve(&a, &DVector::from_vec(vec![1.0, 1.0])),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn tensor_contraction_matches_slices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..27).map(|_| rng.random::<f64>()).collect();
        let t = Tensor3::from_vec(3, data).unwrap();
        let w = [0.2, -1.0, 3.0];
        let direct: Mat = (0..3).map(|b| t.middle_slice(b) * w[b]).sum();
        assert_abs_diff_eq!(t.contract_middle(&w), direct, epsilon = 1e-14);
    }
}
