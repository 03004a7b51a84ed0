//! P-spline bases: equidistant B-splines with a difference penalty.
//!
//! A smooth term `s(x) = Σ_m b_m φ_m(x)` is represented by a [`BasisBundle`]
//! holding the design matrix on the fitting sample, the penalty `S = DᵀD` and,
//! once [`apply_centering`] has been called, the sum-to-zero reparametrization
//! that identifies the smooth against the predictor intercept.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack allowed when checking prediction points against the knot range.
const RANGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KnotPlacement {
    /// Equidistant knots spanning the observed covariate range.
    #[default]
    Equidistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoothSpec {
    pub covariate: String,
    pub num_basis: usize,
    pub degree: usize,
    pub penalty_order: usize,
    #[serde(default)]
    pub knots: KnotPlacement,
}

impl SmoothSpec {
    pub fn new(covariate: impl Into<String>) -> Self {
        Self {
            covariate: covariate.into(),
            num_basis: 10,
            degree: 3,
            penalty_order: 2,
            knots: KnotPlacement::Equidistant,
        }
    }

    pub fn with_basis(mut self, num_basis: usize) -> Self {
        self.num_basis = num_basis;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_basis < self.degree + 2 {
            return Err(Error::Config(format!(
                "smooth on `{}`: {} basis functions is too few for degree {} (need at least {})",
                self.covariate,
                self.num_basis,
                self.degree,
                self.degree + 2
            )));
        }
        if self.penalty_order == 0 || self.penalty_order >= self.num_basis {
            return Err(Error::Config(format!(
                "smooth on `{}`: penalty order {} must lie in 1..{}",
                self.covariate, self.penalty_order, self.num_basis
            )));
        }
        Ok(())
    }
}

/// Sum-to-zero constraint `cᵀb = 0`, with `c` the design column sums on the
/// fitting sample, and an orthonormal basis `Z` of its null space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centering {
    pub constraint: Vec<f64>,
    pub transform: DMatrix<f64>,
}

impl Centering {
    fn from_constraint(constraint: Vec<f64>) -> Self {
        let m = constraint.len();
        let c = DVector::from_column_slice(&constraint);
        let norm = c.norm();
        // Householder reflection mapping c onto a multiple of e_1; the
        // remaining columns span the orthogonal complement of c.
        let mut v = c.clone();
        let sign = if c[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * norm;
        let vv = v.dot(&v);
        let reflector = DMatrix::<f64>::identity(m, m) - (&v * v.transpose()) * (2.0 / vv);
        let transform = reflector.columns(1, m - 1).into_owned();
        Self {
            constraint,
            transform,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisBundle {
    pub spec: SmoothSpec,
    pub lower: f64,
    pub upper: f64,
    /// Basis evaluations on the fitting sample (centered when `centering` is set).
    #[serde(skip, default = "empty_matrix")]
    pub design: DMatrix<f64>,
    pub penalty: DMatrix<f64>,
    /// `R` with `penalty = RᵀR`; `bᵀSb` is evaluated as `‖Rb‖²` to avoid cancellation.
    pub penalty_root: DMatrix<f64>,
    pub centering: Option<Centering>,
}

fn empty_matrix() -> DMatrix<f64> {
    DMatrix::zeros(0, 0)
}

impl BasisBundle {
    /// Number of coefficients carried by the term (M, or M − 1 once centered).
    pub fn num_coefficients(&self) -> usize {
        match &self.centering {
            Some(c) => c.transform.ncols(),
            None => self.spec.num_basis,
        }
    }

    /// Rank of the (possibly centered) penalty; `M − penalty_order` in both cases.
    pub fn penalty_rank(&self) -> usize {
        self.spec.num_basis - self.spec.penalty_order
    }

    fn knot_spacing(&self) -> f64 {
        (self.upper - self.lower) / (self.spec.num_basis - self.spec.degree) as f64
    }

    fn check_range(&self, x: f64) -> Result<f64> {
        let slack = RANGE_SLACK * (self.upper - self.lower).abs().max(1.0);
        if !x.is_finite() || x < self.lower - slack || x > self.upper + slack {
            return Err(Error::Domain {
                covariate: self.spec.covariate.clone(),
                value: x,
                lower: self.lower,
                upper: self.upper,
            });
        }
        Ok(x.clamp(self.lower, self.upper))
    }

    /// Uncentered B-spline values at `x`; returns the index of the first
    /// nonzero basis function and the `degree + 1` values from there on.
    pub fn raw_row(&self, x: f64) -> Result<(usize, Vec<f64>)> {
        let x = self.check_range(x)?;
        Ok(bspline_nonzero(
            x,
            self.lower,
            self.knot_spacing(),
            self.spec.num_basis,
            self.spec.degree,
        ))
    }

    /// Design rows at new covariate values, with the stored centering re-applied.
    pub fn evaluate(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let m = self.spec.num_basis;
        let mut raw = DMatrix::zeros(x.len(), m);
        for (row, &xv) in x.iter().enumerate() {
            let (first, values) = self.raw_row(xv)?;
            for (k, v) in values.into_iter().enumerate() {
                raw[(row, first + k)] = v;
            }
        }
        Ok(match &self.centering {
            Some(c) => raw * &c.transform,
            None => raw,
        })
    }
}

/// Cox–de Boor recursion on the uniform knot grid `lower + (j − degree)·h`.
fn bspline_nonzero(x: f64, lower: f64, h: f64, m: usize, degree: usize) -> (usize, Vec<f64>) {
    let knot = |j: usize| lower + (j as f64 - degree as f64) * h;
    // Interval k with knot(k) <= x < knot(k+1), restricted to the fitted range.
    let pos = ((x - lower) / h).floor();
    let k = (pos.max(0.0) as usize + degree).min(m - 1);

    let mut n = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    n[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - knot(k + 1 - j);
        right[j] = knot(k + j) - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    (k - degree, n)
}

/// The `order`-th difference operator as an `(m − order) × m` matrix.
pub fn difference_matrix(m: usize, order: usize) -> DMatrix<f64> {
    let mut d = DMatrix::<f64>::identity(m, m);
    for _ in 0..order {
        let rows = d.nrows() - 1;
        let next = DMatrix::from_fn(rows, m, |i, j| d[(i + 1, j)] - d[(i, j)]);
        d = next;
    }
    d
}

/// Builds the uncentered basis and difference penalty for one smooth term.
pub fn build_basis(spec: &SmoothSpec, x: &[f64]) -> Result<BasisBundle> {
    spec.validate()?;
    if x.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "smooth on `{}`: no observations",
            spec.covariate
        )));
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "smooth on `{}`: non-finite covariate value {bad}",
            spec.covariate
        )));
    }
    let mut lower = x.iter().copied().fold(f64::INFINITY, f64::min);
    let mut upper = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if upper - lower <= 0.0 {
        // Degenerate covariate; widen so the knot grid is well defined.
        lower -= 0.5;
        upper += 0.5;
    }
    let d = difference_matrix(spec.num_basis, spec.penalty_order);
    let penalty = d.transpose() * &d;
    let mut bundle = BasisBundle {
        spec: spec.clone(),
        lower,
        upper,
        design: DMatrix::zeros(0, 0),
        penalty,
        penalty_root: d,
        centering: None,
    };
    bundle.design = bundle.evaluate(x)?;
    Ok(bundle)
}

/// Reparametrizes the term so its design columns sum to zero over the fitting
/// sample. A bundle that is already centered is returned unchanged.
pub fn apply_centering(bundle: &BasisBundle) -> BasisBundle {
    if bundle.centering.is_some() {
        return bundle.clone();
    }
    let constraint: Vec<f64> = bundle.design.row_sum().iter().copied().collect();
    let centering = Centering::from_constraint(constraint);
    let z = &centering.transform;
    BasisBundle {
        spec: bundle.spec.clone(),
        lower: bundle.lower,
        upper: bundle.upper,
        design: &bundle.design * z,
        penalty: z.transpose() * &bundle.penalty * z,
        penalty_root: &bundle.penalty_root * z,
        centering: Some(centering),
    }
}

/// Convenience: basis built on `x` and centered on the same sample.
pub fn centered_basis(spec: &SmoothSpec, x: &[f64]) -> Result<BasisBundle> {
    Ok(apply_centering(&build_basis(spec, x)?))
}
