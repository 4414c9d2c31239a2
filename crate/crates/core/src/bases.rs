//! Orthonormal projection bases on the unit interval.
//!
//! Two families are provided: piecewise-constant histograms on a regular
//! partition and real trigonometric polynomials. Densities are projected by
//! quadrature and emission estimates are carried as coefficient vectors.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default node count of the Gauss–Legendre inner product.
pub const DEFAULT_QUAD_NODES: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisFamily {
    #[serde(rename = "hist", alias = "histogram")]
    Histogram,
    #[serde(rename = "trig", alias = "trigonometric")]
    Trigonometric,
}

impl fmt::Display for BasisFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisFamily::Histogram => "hist",
            BasisFamily::Trigonometric => "trig",
        })
    }
}

impl FromStr for BasisFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hist" | "histogram" => Ok(BasisFamily::Histogram),
            "trig" | "trigonometric" => Ok(BasisFamily::Trigonometric),
            other => Err(Error::InvalidModel(format!("unknown basis family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawBasisSpec")]
pub struct BasisSpec {
    family: BasisFamily,
    size: usize,
}

#[derive(Deserialize)]
struct RawBasisSpec {
    family: BasisFamily,
    size: usize,
}

impl TryFrom<RawBasisSpec> for BasisSpec {
    type Error = Error;
    fn try_from(raw: RawBasisSpec) -> Result<Self> {
        BasisSpec::new(raw.family, raw.size)
    }
}

impl BasisSpec {
    pub fn new(family: BasisFamily, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidModel("basis size must be at least 1".into()));
        }
        if family == BasisFamily::Trigonometric && size.is_multiple_of(2) {
            return Err(Error::InvalidModel(format!(
                "trigonometric basis needs an odd size, got {size}"
            )));
        }
        Ok(Self { family, size })
    }

    pub fn histogram(size: usize) -> Result<Self> {
        Self::new(BasisFamily::Histogram, size)
    }

    pub fn trigonometric(size: usize) -> Result<Self> {
        Self::new(BasisFamily::Trigonometric, size)
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Writes `(φ_1(y), …, φ_M(y))` into `out` without checking `y`.
    pub fn eval_into(&self, y: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.size);
        match self.family {
            BasisFamily::Histogram => {
                out.iter_mut().for_each(|v| *v = 0.0);
                out[self.bin(y)] = (self.size as f64).sqrt();
            }
            BasisFamily::Trigonometric => {
                out[0] = 1.0;
                for k in 1..=(self.size - 1) / 2 {
                    let arg = 2.0 * PI * k as f64 * y;
                    out[2 * k - 1] = SQRT_2 * arg.cos();
                    out[2 * k] = SQRT_2 * arg.sin();
                }
            }
        }
    }

    /// Histogram bin of `y`; the right endpoint belongs to the last bin.
    pub fn bin(&self, y: f64) -> usize {
        ((y * self.size as f64).floor() as usize).min(self.size - 1)
    }

    /// Default inner-product rule for this basis: composite Gauss–Legendre
    /// aligned with the bin edges for histograms, plain Gauss–Legendre for
    /// trigonometric polynomials.
    pub fn default_quadrature(&self) -> Quadrature {
        match self.family {
            BasisFamily::Histogram => {
                let per_panel = DEFAULT_QUAD_NODES.div_ceil(self.size).max(16);
                Quadrature::composite_gauss_legendre(self.size, per_panel)
            }
            BasisFamily::Trigonometric => Quadrature::gauss_legendre(DEFAULT_QUAD_NODES),
        }
    }
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

/// `(φ_1(y), …, φ_M(y))`.
pub fn eval_basis(spec: &BasisSpec, y: f64) -> Result<Vec<f64>> {
    check_unit(y)?;
    let mut out = vec![0.0; spec.size];
    spec.eval_into(y, &mut out);
    Ok(out)
}

/// Coefficients of a function in a projection basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffVec {
    pub basis: BasisSpec,
    pub coefficients: Vec<f64>,
}

impl CoeffVec {
    pub fn new(basis: BasisSpec, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != basis.size() {
            return Err(Error::Dimension(format!(
                "{} coefficients for a basis of size {}",
                coefficients.len(),
                basis.size()
            )));
        }
        Ok(Self { basis, coefficients })
    }

    pub fn l2_norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Pointwise value without a domain check.
    pub fn value_unchecked(&self, y: f64, scratch: &mut [f64]) -> f64 {
        self.basis.eval_into(y, scratch);
        scratch.iter().zip(&self.coefficients).map(|(p, c)| p * c).sum()
    }
}

/// Nodes and positive weights on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    /// `n`-point Gauss–Legendre rule mapped to [0, 1].
    pub fn gauss_legendre(n: usize) -> Self {
        let (t, w) = gauss_legendre_reference(n);
        Self {
            nodes: t.iter().map(|x| 0.5 * (x + 1.0)).collect(),
            weights: w.iter().map(|x| 0.5 * x).collect(),
        }
    }

    /// `panels` equal subintervals, each with an `per_panel`-point rule.
    pub fn composite_gauss_legendre(panels: usize, per_panel: usize) -> Self {
        let (t, w) = gauss_legendre_reference(per_panel);
        let h = 1.0 / panels as f64;
        let mut nodes = Vec::with_capacity(panels * per_panel);
        let mut weights = Vec::with_capacity(panels * per_panel);
        for p in 0..panels {
            let left = p as f64 * h;
            for (x, wx) in t.iter().zip(&w) {
                nodes.push(left + 0.5 * h * (x + 1.0));
                weights.push(0.5 * h * wx);
            }
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&y, &w)| w * f(y))
            .sum()
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// three-term Legendre recurrence.
fn gauss_legendre_reference(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Coefficients `⟨f, φ_m⟩` computed with `quad`.
pub fn project_density(f: impl Fn(f64) -> f64, spec: &BasisSpec, quad: &Quadrature) -> CoeffVec {
    let mut acc = vec![0.0; spec.size];
    let mut phi = vec![0.0; spec.size];
    for (&y, &w) in quad.nodes.iter().zip(&quad.weights) {
        let fy = f(y);
        spec.eval_into(y, &mut phi);
        for (a, p) in acc.iter_mut().zip(&phi) {
            *a += w * fy * p;
        }
    }
    CoeffVec {
        basis: *spec,
        coefficients: acc,
    }
}

/// `Σ_m c_m φ_m(y)`.
pub fn reconstruct(c: &CoeffVec, y: f64) -> Result<f64> {
    check_unit(y)?;
    let mut scratch = vec![0.0; c.basis.size()];
    Ok(c.value_unchecked(y, &mut scratch))
}

/// The triple-product oscillation functional of a basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eta3 {
    pub value: f64,
    /// Set when `value` is only an upper bound of the supremum.
    pub upper_bound: bool,
}

/// `η₃(Φ_M) = sup_{y,y'} ‖φ⊗φ⊗φ(y) − φ⊗φ⊗φ(y')‖₂`.
///
/// The squared distance equals `2M³ − 2 Π_i K(y_i, y'_i)` whenever
/// `Σ_m φ_m² ≡ M`, with reproducing kernel `K(y, y') = Σ_m φ_m(y)φ_m(y')`.
/// Over `K ∈ [k_min, M]` the product is minimized by `M² k_min` when
/// `k_min < 0`. Histograms have `k_min = 0` (M ≥ 2); the trigonometric
/// kernel is the Dirichlet kernel, minimized numerically.
pub fn eta3(spec: &BasisSpec) -> Eta3 {
    let m = spec.size as f64;
    let kernel_min = match spec.family {
        BasisFamily::Histogram if spec.size == 1 => 1.0,
        BasisFamily::Histogram => 0.0,
        BasisFamily::Trigonometric if spec.size == 1 => 1.0,
        BasisFamily::Trigonometric => dirichlet_min((spec.size - 1) / 2),
    };
    let product_min = if kernel_min < 0.0 {
        m * m * kernel_min
    } else {
        kernel_min.powi(3)
    };
    Eta3 {
        value: (2.0 * m.powi(3) - 2.0 * product_min).max(0.0).sqrt(),
        upper_bound: false,
    }
}

fn dirichlet(r: usize, t: f64) -> f64 {
    1.0 + 2.0 * (1..=r).map(|k| (2.0 * PI * k as f64 * t).cos()).sum::<f64>()
}

/// Minimum over t of the Dirichlet kernel `1 + 2 Σ_{k≤r} cos(2πkt)`.
fn dirichlet_min(r: usize) -> f64 {
    let grid = 2000 * (2 * r + 1);
    let h = 0.5 / grid as f64;
    // symmetric about 1/2, so scan [0, 1/2]
    let (mut best_t, mut best) = (0.0, f64::INFINITY);
    for i in 0..=grid {
        let t = i as f64 * h;
        let v = dirichlet(r, t);
        if v < best {
            best = v;
            best_t = t;
        }
    }
    // golden-section refinement on the bracketing cell pair
    let (mut lo, mut hi) = ((best_t - h).max(0.0), (best_t + h).min(0.5));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if dirichlet(r, a) < dirichlet(r, b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    best.min(dirichlet(r, 0.5 * (lo + hi)))
}
