//! Likelihood, decoding, residuals and prediction for fitted models.

pub mod decode;
pub mod forward;
pub mod layout;
pub mod predict;
pub mod residuals;
pub mod spec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use forward::{Components, ForwardPass, Problem};
pub use layout::{Layout, ModelStructure, PredictorRole};
pub use predict::{GridDesign, ParameterCurves};
pub use residuals::{ks_test_normal, KsResult, PseudoResiduals};
pub use spec::{InitialDistribution, ModelSpec, PredictorSpec, Term};

use crate::error::Result;
use crate::io::frame::TimeSeriesFrame;
use crate::markov::{self, off_diagonal_pairs, PairPredictor, SmoothContribution, TransitionModel};

/// `ℓ(θ)` with bases built on `data`.
pub fn log_likelihood(spec: &ModelSpec, theta: &[f64], data: &TimeSeriesFrame) -> Result<f64> {
    Problem::fit_structure(spec, data)?.log_likelihood(theta)
}

pub fn penalized_nll(spec: &ModelSpec, theta: &[f64], lambda: &[f64], data: &TimeSeriesFrame) -> Result<f64> {
    Problem::fit_structure(spec, data)?.penalized_nll(theta, lambda)
}

/// Gradient of the penalized negative log-likelihood.
pub fn gradient(spec: &ModelSpec, theta: &[f64], lambda: &[f64], data: &TimeSeriesFrame) -> Result<Vec<f64>> {
    Ok(Problem::fit_structure(spec, data)?.penalized_nll_grad(theta, lambda)?.1)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub converged: bool,
    pub outer_iterations: usize,
    pub inner_iterations: Vec<usize>,
    pub gradient_norm: f64,
    /// λ after each outer update.
    pub lambda_trace: Vec<Vec<f64>>,
    /// Smallest Hessian eigenvalue before any positive-definite correction.
    pub min_hessian_eigenvalue: f64,
    pub hessian_corrected: bool,
    /// Permutation applied to the estimated states (`new[i] = old[perm[i]]`).
    pub state_order: Vec<usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedModel {
    pub structure: ModelStructure,
    pub theta: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Penalized Hessian at `(θ̂, λ̂)`, positive definite.
    pub hessian: DMatrix<f64>,
    pub log_likelihood: f64,
    pub penalized_objective: f64,
    pub diagnostics: FitDiagnostics,
}

impl FittedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.structure.spec
    }

    pub fn n_states(&self) -> usize {
        self.structure.n_states()
    }

    /// Binds the fitted bases to new data; columns must match the model.
    pub fn problem(&self, data: &TimeSeriesFrame) -> Result<Problem> {
        Problem::new(self.structure.clone(), data)
    }

    pub fn log_likelihood_on(&self, data: &TimeSeriesFrame) -> Result<f64> {
        self.problem(data)?.log_likelihood(&self.theta)
    }

    pub fn viterbi(&self, data: &TimeSeriesFrame) -> Result<Vec<usize>> {
        decode::viterbi_path(&self.problem(data)?, &self.theta)
    }

    pub fn pseudo_residuals(&self, data: &TimeSeriesFrame) -> Result<PseudoResiduals> {
        residuals::pseudo_residuals(&self.problem(data)?, &self.theta)
    }

    pub fn predict_parameters(&self, covariate: &str, grid: &[f64]) -> Result<ParameterCurves> {
        predict::predict_parameters(&self.structure, &self.theta, covariate, grid)
    }

    pub fn quantile_curves(&self, covariate: &str, grid: &[f64], probs: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
        let curves = self.predict_parameters(covariate, grid)?;
        predict::quantile_curves(&curves, &self.structure, probs)
    }

    /// The estimated transition predictors as a standalone model.
    pub fn transition_model(&self) -> TransitionModel {
        transition_model(&self.structure, &self.theta)
    }

    /// Transition matrices on a grid over one transition covariate.
    pub fn tpm_curve(&self, covariate: &str, grid: &[f64]) -> Result<Vec<markov::Tpm>> {
        let design = GridDesign::new(&self.structure, predict::grid_rows(&self.structure, covariate, grid)?)?;
        Ok(design
            .eta_matrices(&self.structure, &self.theta)
            .iter()
            .map(markov::tpm_from_eta)
            .collect())
    }

    /// Stationary distributions (`grid.len() × N`) over one transition covariate.
    pub fn stationary_curve(&self, covariate: &str, grid: &[f64]) -> Result<DMatrix<f64>> {
        let rows = predict::grid_rows(&self.structure, covariate, grid)?;
        markov::stationary_curve(&self.transition_model(), &rows)
    }
}

pub fn transition_model(structure: &ModelStructure, theta: &[f64]) -> TransitionModel {
    let n = structure.n_states();
    let pairs = off_diagonal_pairs(n)
        .into_iter()
        .map(|(from, to)| {
            let p = structure.layout.transition_predictor(from, to);
            let pred = &structure.layout.predictors[p];
            let mut out = PairPredictor {
                from,
                to,
                intercept: 0.0,
                linear: Vec::new(),
                smooths: Vec::new(),
            };
            for slot in &pred.terms {
                match slot {
                    layout::TermSlot::Intercept { index } => out.intercept = theta[*index],
                    layout::TermSlot::Linear { covariate, index } => {
                        out.linear.push((covariate.clone(), theta[*index]))
                    }
                    layout::TermSlot::Smooth { basis, range, .. } => out.smooths.push(SmoothContribution {
                        basis: structure.bases[*basis].clone(),
                        coefficients: theta[range.clone()].to_vec(),
                    }),
                }
            }
            out
        })
        .collect();
    TransitionModel { n_states: n, pairs }
}
