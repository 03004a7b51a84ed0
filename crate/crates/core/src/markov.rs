//! Covariate-dependent transition probability matrices and stationary
//! distributions.
//!
//! Row `i` of the t.p.m. is a softmax over the predictors `η_{i,·}` with the
//! diagonal entry as reference category (`η_{i,i} = 0`).
//!
//! Timing: the matrix that moves the chain from time `t − 1` to `t` is built
//! from the covariate row at `t − 1`, i.e. `γ^{(t)}_{ij} = Pr(S_{t+1} = j | S_t = i, z_t)`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::splines::BasisBundle;

/// Predictors are clipped to this magnitude before the softmax.
pub const ETA_CLIP: f64 = 50.0;

pub type CovariateRow = BTreeMap<String, f64>;

/// Off-diagonal `(from, to)` pairs in row-major order; this is the packing
/// order of transition predictors everywhere in the crate.
pub fn off_diagonal_pairs(n_states: usize) -> Vec<(usize, usize)> {
    (0..n_states)
        .flat_map(|i| (0..n_states).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect()
}

/// Row-stochastic transition probability matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tpm(DMatrix<f64>);

impl Tpm {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::InvalidArgument("t.p.m. must be square and non-empty".into()));
        }
        for row in matrix.row_iter() {
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) || (row.sum() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidArgument(format!("row {row} is not a probability vector")));
            }
        }
        Ok(Self(matrix))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn n_states(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

/// Row-wise softmax of the predictor matrix (entries clipped to ±50).
pub fn tpm_from_eta(eta: &DMatrix<f64>) -> Tpm {
    let n = eta.nrows();
    let mut gamma = DMatrix::zeros(n, n);
    let mut row = vec![0.0; n];
    let mut out = vec![0.0; n];
    for i in 0..n {
        row.iter_mut().enumerate().for_each(|(j, r)| *r = eta[(i, j)]);
        softmax_row(&row, &mut out);
        gamma.row_mut(i).iter_mut().zip(&out).for_each(|(g, o)| *g = *o);
    }
    Tpm(gamma)
}

pub(crate) fn softmax_row(eta: &[f64], out: &mut [f64]) {
    let max = eta
        .iter()
        .map(|e| e.clamp(-ETA_CLIP, ETA_CLIP))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, e) in out.iter_mut().zip(eta) {
        *o = (e.clamp(-ETA_CLIP, ETA_CLIP) - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Stationary distribution `δΓ = δ`, `Σδ = 1`, from `δ (I − Γ + U) = 1`.
pub fn stationary(tpm: &Tpm) -> Result<DVector<f64>> {
    let g = tpm.matrix();
    let n = g.nrows();
    let a = DMatrix::<f64>::identity(n, n) - g + DMatrix::from_element(n, n, 1.0);
    let at = a.transpose();
    let svd = at.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::Singular(
            "transition matrix has no unique stationary distribution".into(),
        ));
    }
    let lu = at.clone().lu();
    let ones = DVector::from_element(n, 1.0);
    let mut delta = lu
        .solve(&ones)
        .ok_or_else(|| Error::Singular("stationary system is singular".into()))?;
    // One step of iterative refinement.
    let residual = &ones - &at * &delta;
    if let Some(correction) = lu.solve(&residual) {
        delta += correction;
    }
    for v in delta.iter_mut() {
        if *v < 0.0 && *v > -1e-14 {
            *v = 0.0;
        }
    }
    if delta.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::Singular(format!("stationary solution {delta} is not a distribution")));
    }
    let total = delta.sum();
    Ok(delta / total)
}

/// A smooth contribution `s(z) = B(z) b` to a transition predictor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothContribution {
    pub basis: BasisBundle,
    pub coefficients: Vec<f64>,
}

/// Predictor `η_{from,to}(z) = β₀ + Σ β_k z_k + Σ s_k(z_k)` for one off-diagonal pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairPredictor {
    pub from: usize,
    pub to: usize,
    pub intercept: f64,
    pub linear: Vec<(String, f64)>,
    pub smooths: Vec<SmoothContribution>,
}

impl PairPredictor {
    pub fn eval(&self, z: &CovariateRow) -> Result<f64> {
        let mut eta = self.intercept;
        for (name, coef) in &self.linear {
            eta += coef * lookup(z, name)?;
        }
        for s in &self.smooths {
            let value = lookup(z, &s.basis.spec.covariate)?;
            let row = s.basis.evaluate(&[value])?;
            eta += row
                .row(0)
                .iter()
                .zip(&s.coefficients)
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
        Ok(eta)
    }
}

fn lookup(z: &CovariateRow, name: &str) -> Result<f64> {
    z.get(name)
        .copied()
        .ok_or_else(|| Error::Config(format!("missing transition covariate `{name}`")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionModel {
    pub n_states: usize,
    pub pairs: Vec<PairPredictor>,
}

impl TransitionModel {
    /// Intercept-only model.
    pub fn constant(eta: &DMatrix<f64>) -> Self {
        let n = eta.nrows();
        let pairs = off_diagonal_pairs(n)
            .into_iter()
            .map(|(i, j)| PairPredictor {
                from: i,
                to: j,
                intercept: eta[(i, j)] - eta[(i, i)],
                linear: Vec::new(),
                smooths: Vec::new(),
            })
            .collect();
        Self { n_states: n, pairs }
    }
}

/// Predictor matrix at one covariate row; the diagonal is exactly zero.
pub fn eta_matrix(model: &TransitionModel, z: &CovariateRow) -> Result<DMatrix<f64>> {
    let mut eta = DMatrix::zeros(model.n_states, model.n_states);
    for pair in &model.pairs {
        eta[(pair.from, pair.to)] = pair.eval(z)?;
    }
    Ok(eta)
}

/// Stationary distribution at each grid row (`grid.len() × N`).
pub fn stationary_curve(model: &TransitionModel, grid: &[CovariateRow]) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(grid.len(), model.n_states);
    for (g, z) in grid.iter().enumerate() {
        let tpm = tpm_from_eta(&eta_matrix(model, z)?);
        let delta = stationary(&tpm).map_err(|e| match e {
            Error::Singular(msg) => Error::Singular(format!("at covariates {z:?}: {msg}")),
            other => other,
        })?;
        out.row_mut(g).copy_from(&delta.transpose());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn builtin_eta(z: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(
            2,
            2,
            &[0.0, -1.8 + 1.5 * z - 2.0 * z * z, -2.1 - 2.0 * z - z * z, 0.0],
        )
    }

    fn random_tpm(rng: &mut ChaCha8Rng, n: usize) -> Tpm {
        let eta = DMatrix::from_fn(n, n, |_, _| rng.random_range(-3.0..3.0));
        tpm_from_eta(&eta)
    }

    #[test]
    fn zero_predictors_give_uniform_rows() {
        let model = TransitionModel::constant(&DMatrix::zeros(3, 3));
        let eta = eta_matrix(&model, &CovariateRow::new()).unwrap();
        assert_eq!(eta, DMatrix::zeros(3, 3));
        let tpm = tpm_from_eta(&eta);
        for v in tpm.matrix().iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_state_logistic() {
        let tpm = tpm_from_eta(&builtin_eta(0.0));
        assert!((tpm.get(0, 1) - 1.0 / (1.0 + 1.8f64.exp())).abs() < 1e-15);
        assert!((tpm.get(0, 1) - 0.14185).abs() < 5e-6);
        let e = DMatrix::from_row_slice(2, 2, &[0.0, -50.0, 0.0, 0.0]);
        assert!(tpm_from_eta(&e).get(0, 0) >= 1.0 - 1e-20);
    }

    #[test]
    fn builtin_dgp_predictor_values() {
        let e0 = builtin_eta(0.0);
        assert_eq!(e0[(0, 1)], -1.8);
        assert_eq!(e0[(1, 0)], -2.1);
        let e1 = builtin_eta(1.0);
        assert!((e1[(0, 1)] + 2.3).abs() < 1e-15);
    }

    #[test]
    fn stationary_closed_form() {
        let tpm = Tpm::new(DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8])).unwrap();
        let d = stationary(&tpm).unwrap();
        assert!((d[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((d[1] - 1.0 / 3.0).abs() < 1e-15);

        let tpm = tpm_from_eta(&builtin_eta(0.0));
        let (g12, g21) = (tpm.get(0, 1), tpm.get(1, 0));
        let d = stationary(&tpm).unwrap();
        assert!((d[0] - g21 / (g12 + g21)).abs() < 1e-14);
        // logistic(−2.1) / (logistic(−1.8) + logistic(−2.1)), evaluated independently.
        assert!((d[0] - 0.434_738_952_747_480_9).abs() < 1e-12);
    }

    #[test]
    fn doubly_stochastic_is_uniform() {
        let g = DMatrix::from_row_slice(3, 3, &[0.5, 0.3, 0.2, 0.2, 0.5, 0.3, 0.3, 0.2, 0.5]);
        let d = stationary(&Tpm::new(g).unwrap()).unwrap();
        for v in d.iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_has_no_unique_stationary_distribution() {
        let tpm = Tpm::new(DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(stationary(&tpm), Err(Error::Singular(_))));
    }

    #[test]
    fn stationary_residual_on_random_tpms() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let n = rng.random_range(2..=4);
            let tpm = random_tpm(&mut rng, n);
            let d = stationary(&tpm).unwrap();
            let resid = (d.transpose() * tpm.matrix() - d.transpose()).amax();
            assert!(resid <= 1e-12);
            assert!((d.sum() - 1.0).abs() < 1e-14);
            assert!(d.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let eta = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-5.0..5.0));
            let mut shifted = eta.clone();
            for i in 0..3 {
                let c = rng.random_range(-10.0..10.0);
                for j in 0..3 {
                    shifted[(i, j)] += c;
                }
            }
            let a = tpm_from_eta(&eta);
            let b = tpm_from_eta(&shifted);
            assert!((a.matrix() - b.matrix()).amax() < 1e-12);
        }
    }

    #[test]
    fn switching_probability_is_increasing() {
        let mut last = 0.0;
        for k in 0..200 {
            let e = -10.0 + 0.1 * k as f64;
            let g = tpm_from_eta(&DMatrix::from_row_slice(2, 2, &[0.0, e, 0.0, 0.0])).get(0, 1);
            assert!(g > last);
            last = g;
        }
    }

    #[test]
    fn stationary_is_lipschitz_in_eta() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let eta = DMatrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { rng.random_range(-2.0..2.0) });
            let base = stationary(&tpm_from_eta(&eta)).unwrap();
            let mut ratios = Vec::new();
            for scale in [1e-2, 1e-3, 1e-4, 1e-5] {
                let eps = DMatrix::from_fn(3, 3, |i, j| {
                    if i == j { 0.0 } else { scale * rng.random_range(-1.0..1.0) }
                });
                let moved = stationary(&tpm_from_eta(&(&eta + &eps))).unwrap();
                ratios.push((moved - &base).norm() / eps.norm());
            }
            // Derivative bounded: ratios stay within a fixed constant.
            assert!(ratios.iter().all(|r| *r < 5.0), "{ratios:?}");
        }
    }

    #[test]
    fn constant_model_curve_rows_identical() {
        let model = TransitionModel::constant(&builtin_eta(0.0));
        let grid: Vec<CovariateRow> = (0..5)
            .map(|i| CovariateRow::from([("z".to_string(), i as f64)]))
            .collect();
        let curve = stationary_curve(&model, &grid).unwrap();
        for g in 1..5 {
            assert_eq!(curve.row(g), curve.row(0));
        }
        for row in curve.row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn missing_covariate_is_config_error() {
        let mut model = TransitionModel::constant(&DMatrix::zeros(2, 2));
        model.pairs[0].linear.push(("spread".into(), 1.0));
        assert!(matches!(eta_matrix(&model, &CovariateRow::new()), Err(Error::Config(_))));
    }
}
