//! Gaussian posterior draws around θ̂ with covariance `H⁻¹` and pointwise
//! bands for curves mapped from them.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::predict::{grid_rows, GridDesign};
use crate::inference::FittedModel;
use crate::markov::{stationary, tpm_from_eta};

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSampleSet {
    /// `R × dim(θ)`, one draw per row.
    pub draws: DMatrix<f64>,
    pub seed: u64,
}

impl PosteriorSampleSet {
    pub fn from_draws(draws: DMatrix<f64>, seed: u64) -> Self {
        Self { draws, seed }
    }

    pub fn len(&self) -> usize {
        self.draws.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.nrows() == 0
    }

    pub fn draw(&self, r: usize) -> Vec<f64> {
        self.draws.row(r).iter().copied().collect()
    }
}

/// `R` draws from `N(mean, precision⁻¹)`.
pub fn sample_gaussian(mean: &[f64], precision: &DMatrix<f64>, r: usize, seed: u64) -> Result<PosteriorSampleSet> {
    let dim = mean.len();
    if precision.nrows() != dim || precision.ncols() != dim {
        return Err(Error::InvalidArgument("precision matrix does not match the mean".into()));
    }
    let chol = precision
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("penalized Hessian is not positive definite".into()))?;
    let lt = chol.l().transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = DMatrix::zeros(r, dim);
    for row in 0..r {
        let z = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
        let x = lt
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::Singular("Cholesky factor".into()))?;
        for k in 0..dim {
            draws[(row, k)] = mean[k] + x[k];
        }
    }
    Ok(PosteriorSampleSet { draws, seed })
}

pub fn sample_posterior(fitted: &FittedModel, r: usize, seed: u64) -> Result<PosteriorSampleSet> {
    sample_gaussian(&fitted.theta, &fitted.hessian, r, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub grid: Vec<f64>,
    pub estimate: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Draws excluded at each grid point.
    pub dropped: Vec<usize>,
}

/// Sample quantile with linear interpolation between order statistics
/// (`h = (n − 1) p`); `values` must be sorted.
pub fn quantile_sorted(values: &[f64], p: f64) -> f64 {
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    values[lo] + (h - lo as f64) * (values[hi] - values[lo])
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::InvalidArgument(format!("band level {level} must lie in (0, 1]")));
    }
    Ok(())
}

/// Builds a band from per-draw curves (`None` marks a dropped value).
fn summarize(grid: &[f64], estimate: Vec<f64>, per_draw: Vec<Vec<Option<f64>>>, level: f64) -> Band {
    let g_len = grid.len();
    let mut lower = vec![f64::NAN; g_len];
    let mut upper = vec![f64::NAN; g_len];
    let mut dropped = vec![0; g_len];
    let (pl, pu) = ((1.0 - level) / 2.0, (1.0 + level) / 2.0);
    for g in 0..g_len {
        let mut values: Vec<f64> = per_draw.iter().filter_map(|c| c[g]).collect();
        dropped[g] = per_draw.len() - values.len();
        values.sort_by(|a, b| a.total_cmp(b));
        lower[g] = quantile_sorted(&values, pl);
        upper[g] = quantile_sorted(&values, pu);
    }
    Band {
        grid: grid.to_vec(),
        estimate,
        lower,
        upper,
        dropped,
    }
}

/// Pointwise band for one state-dependent parameter over a covariate grid.
pub fn effect_band(
    fitted: &FittedModel,
    samples: &PosteriorSampleSet,
    parameter: &str,
    state: usize,
    covariate: &str,
    grid: &[f64],
    level: f64,
) -> Result<Band> {
    check_level(level)?;
    let structure = &fitted.structure;
    let param = structure
        .spec
        .family
        .param_index(parameter)
        .ok_or_else(|| Error::Config(format!("family has no parameter `{parameter}`")))?;
    if state >= structure.n_states() {
        return Err(Error::InvalidArgument(format!("state {} does not exist", state + 1)));
    }
    let design = GridDesign::new(structure, grid_rows(structure, covariate, grid)?)?;
    let estimate = design.parameter(structure, &fitted.theta, state, param);
    let per_draw: Vec<Vec<Option<f64>>> = (0..samples.len())
        .into_par_iter()
        .map(|r| {
            design
                .parameter(structure, &samples.draw(r), state, param)
                .into_iter()
                .map(|v| v.is_finite().then_some(v))
                .collect()
        })
        .collect();
    Ok(summarize(grid, estimate, per_draw, level))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionTarget {
    /// `γ_{from,to}` (0-based states).
    Pair { from: usize, to: usize },
    /// Stationary probability of one state.
    Stationary { state: usize },
}

/// Pointwise band for a transition probability or stationary probability
/// over a transition covariate grid. Draws whose t.p.m. has no unique
/// stationary distribution at a grid point are dropped there.
pub fn transition_band(
    fitted: &FittedModel,
    samples: &PosteriorSampleSet,
    target: TransitionTarget,
    covariate: &str,
    grid: &[f64],
    level: f64,
) -> Result<Band> {
    check_level(level)?;
    let structure = &fitted.structure;
    let n = structure.n_states();
    let valid = match target {
        TransitionTarget::Pair { from, to } => from < n && to < n,
        TransitionTarget::Stationary { state } => state < n,
    };
    if !valid {
        return Err(Error::InvalidArgument(format!("{target:?} is not valid for {n} states")));
    }
    let design = GridDesign::new(structure, grid_rows(structure, covariate, grid)?)?;
    let map = |theta: &[f64]| -> Vec<Option<f64>> {
        design
            .eta_matrices(structure, theta)
            .iter()
            .map(|eta| {
                let tpm = tpm_from_eta(eta);
                match target {
                    TransitionTarget::Pair { from, to } => Some(tpm.get(from, to)),
                    TransitionTarget::Stationary { state } => stationary(&tpm).ok().map(|d| d[state]),
                }
            })
            .collect()
    };
    let estimate: Vec<f64> = map(&fitted.theta)
        .into_iter()
        .map(|v| v.ok_or_else(|| Error::Singular("stationary distribution of the point estimate".into())))
        .collect::<Result<_>>()?;
    let per_draw: Vec<Vec<Option<f64>>> = (0..samples.len())
        .into_par_iter()
        .map(|r| map(&samples.draw(r)))
        .collect();
    let band = summarize(grid, estimate, per_draw, level);
    let total: usize = band.dropped.iter().sum();
    if total > 0 {
        log::warn!("{total} draw/grid-point combinations dropped for {target:?}: non-ergodic t.p.m.");
    }
    Ok(band)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_type7() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert!((quantile_sorted(&v, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile_sorted(&v, 0.25) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn identity_precision_covariance() {
        let dim = 3;
        let r = 100_000;
        let s = sample_gaussian(&[0.0; 3], &DMatrix::identity(dim, dim), r, 7).unwrap();
        for a in 0..dim {
            for b in 0..dim {
                let c: f64 = (0..r).map(|i| s.draws[(i, a)] * s.draws[(i, b)]).sum::<f64>() / r as f64;
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((c - target).abs() < 0.02, "cov[{a},{b}] = {c}");
            }
        }
    }

    #[test]
    fn linear_functional_variance() {
        let h = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let c = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let exact = c.dot(&(h.clone().try_inverse().unwrap() * &c));
        let r = 100_000;
        let s = sample_gaussian(&[1.0, 2.0, 3.0], &h, r, 11).unwrap();
        let vals: Vec<f64> = (0..r).map(|i| c.dot(&s.draws.row(i).transpose())).collect();
        let mean = vals.iter().sum::<f64>() / r as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
        assert!((var / exact - 1.0).abs() < 0.05, "{var} vs {exact}");
    }

    #[test]
    fn single_draw_is_reproducible() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let a = sample_gaussian(&[0.5, -0.5], &h, 1, 42).unwrap();
        let b = sample_gaussian(&[0.5, -0.5], &h, 1, 42).unwrap();
        assert_eq!(a.draws.as_slice(), b.draws.as_slice());
        assert_eq!(a.draw(0).iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   b.draw(0).iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn not_positive_definite_fails() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(sample_gaussian(&[0.0, 0.0], &h, 5, 1), Err(Error::Singular(_))));
    }

    #[test]
    fn full_level_spans_extremes() {
        let per_draw = vec![vec![Some(3.0)], vec![Some(-1.0)], vec![Some(2.0)], vec![None]];
        let band = summarize(&[0.0], vec![1.0], per_draw, 1.0);
        assert_eq!(band.lower, vec![-1.0]);
        assert_eq!(band.upper, vec![3.0]);
        assert_eq!(band.dropped, vec![1]);
    }
}
