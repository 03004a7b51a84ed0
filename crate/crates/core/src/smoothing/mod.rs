//! Penalized fitting and automatic smoothness selection.
//!
//! The inner loop minimizes the penalized negative log-likelihood at fixed
//! λ with BFGS. The outer loop alternates warm-started inner fits with the
//! multiplicative update
//!
//! ```text
//! λ_p ← λ_p · max(ε, rank(S_p)/λ_p − tr(H⁻¹ S̃_p)) / max(ε, b_pᵀ S_p b_p)
//! ```
//!
//! where `H` is the penalized Hessian and `S̃_p` embeds `S_p` in the full
//! parameter space.

pub mod bfgs;

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::layout::{PredictorRole, TermSlot};
use crate::inference::spec::InitialDistribution;
use crate::inference::{FitDiagnostics, FittedModel, ModelSpec, Problem};
use crate::io::frame::TimeSeriesFrame;

const LAMBDA_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub gradient_tolerance: f64,
    pub max_inner_iterations: usize,
    pub outer_tolerance: f64,
    pub max_outer_iterations: usize,
    pub initial_lambda: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Number of perturbed restarts of the first fit; 0 disables multi-start.
    pub multi_start: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            gradient_tolerance: 1e-6,
            max_inner_iterations: 500,
            outer_tolerance: 1e-3,
            max_outer_iterations: 50,
            initial_lambda: 1e4,
            lambda_min: 1e-8,
            lambda_max: 1e8,
            multi_start: 0,
            seed: 1,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.gradient_tolerance, self.outer_tolerance, self.lambda_min];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Config("optimizer tolerances must be positive".into()));
        }
        if !(self.lambda_min < self.lambda_max) {
            return Err(Error::Config("lambda bounds must satisfy min < max".into()));
        }
        if !(self.lambda_min..=self.lambda_max).contains(&self.initial_lambda) {
            return Err(Error::Config("initial lambda outside the lambda bounds".into()));
        }
        if self.max_inner_iterations == 0 || self.max_outer_iterations == 0 {
            return Err(Error::Config("iteration limits must be positive".into()));
        }
        Ok(())
    }

    /// Default with the recommended multi-start count.
    pub fn with_multi_start(mut self) -> Self {
        self.multi_start = 5;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerFit {
    pub theta: Vec<f64>,
    pub objective: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// Minimizes the penalized negative log-likelihood at fixed λ.
///
/// Fails with [`Error::NonConvergence`] (carrying the best θ) when the
/// iteration limit is reached.
pub fn fit_penalized(
    problem: &Problem,
    lambda: &[f64],
    theta_init: &[f64],
    config: &OptimizerConfig,
) -> Result<InnerFit> {
    fit_penalized_warm(problem, lambda, theta_init, config, None)
}

fn fit_penalized_warm(
    problem: &Problem,
    lambda: &[f64],
    theta_init: &[f64],
    config: &OptimizerConfig,
    inverse_hessian: Option<DMatrix<f64>>,
) -> Result<InnerFit> {
    if theta_init.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("initial parameters must be finite".into()));
    }
    let n_pen = problem.structure.layout.penalties.len();
    if lambda.len() != n_pen {
        return Err(Error::Config(format!(
            "expected {n_pen} smoothing parameters, got {}",
            lambda.len()
        )));
    }
    if let Some(l) = lambda
        .iter()
        .find(|l| !(config.lambda_min..=config.lambda_max).contains(*l) && **l != 0.0)
    {
        return Err(Error::Config(format!("smoothing parameter {l} outside bounds")));
    }
    let inverse_hessian = inverse_hessian.or_else(|| preconditioner(problem, theta_init, lambda, 1e-10));
    let opts = bfgs::BfgsOptions {
        gradient_tolerance: config.gradient_tolerance,
        max_iterations: config.max_inner_iterations,
        max_step: 5.0,
    };
    let out = bfgs::minimize(
        |th| problem.penalized_nll_grad(th, lambda),
        theta_init,
        &opts,
        inverse_hessian,
    )?;
    let mut out = out;
    if !out.converged {
        newton_polish(problem, lambda, config.gradient_tolerance, &mut out);
    }
    let gradient_norm = out.gradient.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
    if let Some(index) = out.stalled_at.filter(|_| !out.converged) {
        if !out.converged && gradient_norm > 1e3 * config.gradient_tolerance {
            return Err(Error::Numeric(format!(
                "no finite descent step; largest step in {}",
                describe_coefficient(problem, index)
            )));
        }
    }
    if !out.converged && out.stalled_at.is_none() {
        return Err(Error::NonConvergence {
            iterations: out.iterations,
            gradient_norm,
            best_theta: out.x,
            best_objective: out.value,
        });
    }
    Ok(InnerFit {
        theta: out.x,
        objective: out.value,
        gradient_norm,
        iterations: out.iterations,
    })
}

/// Damped Newton steps on the finite-difference Hessian. Stiff penalty
/// directions (large λ) are resolved here when quasi-Newton updates are
/// dominated by rounding.
fn newton_polish(problem: &Problem, lambda: &[f64], tolerance: f64, out: &mut bfgs::BfgsOutcome) {
    let inf = |g: &[f64]| g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for _ in 0..20 {
        let gnorm = inf(&out.gradient);
        if gnorm <= tolerance {
            out.converged = true;
            return;
        }
        let Some(metric) = preconditioner(problem, &out.x, lambda, 1e-13) else {
            return;
        };
        let step = metric * DVector::from_column_slice(&out.gradient);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = out.x.iter().zip(step.iter()).map(|(x, d)| x - alpha * d).collect();
            if let Ok((f, g)) = problem.penalized_nll_grad(&trial, lambda) {
                let noise = 1e-11 * (1.0 + out.value.abs());
                if f.is_finite() && (f < out.value - noise || (f <= out.value + noise && inf(&g) < gnorm)) {
                    out.x = trial;
                    out.value = f;
                    out.gradient = g;
                    out.iterations += 1;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return;
        }
    }
    out.converged = inf(&out.gradient) <= tolerance;
}

/// Inverse of the penalized Hessian with eigenvalue magnitudes floored,
/// used as the starting BFGS metric on a cold start.
fn preconditioner(problem: &Problem, theta: &[f64], lambda: &[f64], floor: f64) -> Option<DMatrix<f64>> {
    let h = raw_penalized_hessian(problem, theta, lambda).ok()?;
    let eig = SymmetricEigen::new(h);
    let top = eig.eigenvalues.amax();
    if !top.is_finite() || top == 0.0 {
        return None;
    }
    let inv = eig.eigenvalues.map(|v| 1.0 / v.abs().max(floor * top));
    let q = &eig.eigenvectors;
    Some(q * DMatrix::from_diagonal(&inv) * q.transpose())
}

/// Human-readable name of the predictor block owning coefficient `index`.
pub fn describe_coefficient(problem: &Problem, index: usize) -> String {
    let structure = &problem.structure;
    let names = structure.spec.family.parameter_names();
    structure
        .layout
        .predictors
        .iter()
        .find(|p| p.range.contains(&index))
        .map(|p| match p.role {
            PredictorRole::State { state, param } => {
                format!("the {} predictor of state {}", names[param], state + 1)
            }
            PredictorRole::Transition { from, to } => {
                format!("the transition predictor {}->{}", from + 1, to + 1)
            }
        })
        .unwrap_or_else(|| format!("coefficient {index}"))
}

#[derive(Debug, Clone)]
pub struct PenalizedHessian {
    pub matrix: DMatrix<f64>,
    pub min_eigenvalue: f64,
    pub corrected: bool,
}

/// Hessian of the penalized objective: central differences of the exact
/// log-likelihood gradient plus the exact penalty block `λ_p S_p`. An
/// indefinite result has its eigenvalues floored.
pub fn penalized_hessian(problem: &Problem, theta: &[f64], lambda: &[f64]) -> Result<PenalizedHessian> {
    let h = raw_penalized_hessian(problem, theta, lambda)?;
    let eig = SymmetricEigen::new(h.clone());
    let min_eigenvalue = eig.eigenvalues.min();
    let max_eigenvalue = eig.eigenvalues.max();
    let floor = 1e-12 * max_eigenvalue.abs().max(1.0);
    if min_eigenvalue >= floor {
        return Ok(PenalizedHessian {
            matrix: h,
            min_eigenvalue,
            corrected: false,
        });
    }
    warn!("penalized Hessian not positive definite (min eigenvalue {min_eigenvalue:.3e}); flooring at {floor:.3e}");
    let values = eig.eigenvalues.map(|v| v.max(floor));
    let q = &eig.eigenvectors;
    let fixed = q * DMatrix::from_diagonal(&values) * q.transpose();
    Ok(PenalizedHessian {
        matrix: (&fixed + fixed.transpose()) * 0.5,
        min_eigenvalue,
        corrected: true,
    })
}

fn raw_penalized_hessian(problem: &Problem, theta: &[f64], lambda: &[f64]) -> Result<DMatrix<f64>> {
    let dim = theta.len();
    let mut h = DMatrix::zeros(dim, dim);
    let mut work = theta.to_vec();
    for j in 0..dim {
        let step = 1e-5 * (1.0 + theta[j].abs());
        work[j] = theta[j] + step;
        let (_, gp) = problem.log_likelihood_grad(&work)?;
        work[j] = theta[j] - step;
        let (_, gm) = problem.log_likelihood_grad(&work)?;
        work[j] = theta[j];
        for i in 0..dim {
            h[(i, j)] = -(gp[i] - gm[i]) / (2.0 * step);
        }
    }
    let mut h = (&h + h.transpose()) * 0.5;
    add_penalty(problem, &mut h, lambda, 1.0);
    Ok(h)
}

/// Adds `scale · λ_p S_p` to the matching diagonal blocks.
pub fn add_penalty(problem: &Problem, h: &mut DMatrix<f64>, lambda: &[f64], scale: f64) {
    for (p, block) in problem.structure.layout.penalties.iter().enumerate() {
        let s = problem.structure.penalty_matrix(p);
        let r = block.range.start;
        let w = block.range.len();
        let mut view = h.view_mut((r, r), (w, w));
        view += s * (scale * lambda[p]);
    }
}

/// Quantile-band starting values (see module docs of the CLI for the scheme).
pub fn initial_theta(problem: &Problem) -> Vec<f64> {
    let structure = &problem.structure;
    let n = structure.n_states();
    let family = &structure.spec.family;
    let mut theta = vec![0.0; structure.dim()];
    let mut y = problem.response().to_vec();
    y.sort_by(|a, b| a.total_cmp(b));
    let len = y.len();
    for i in 0..n {
        let lo = i * len / n;
        let hi = ((i + 1) * len / n).max(lo + 1).min(len);
        let band = &y[lo.min(len - 1)..hi];
        let mean = band.iter().sum::<f64>() / band.len() as f64;
        let var = band.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / band.len() as f64;
        let sd = var.sqrt().max(1e-3 * (1.0 + mean.abs()));
        let natural = [mean, sd, 0.0];
        for (k, value) in natural.iter().enumerate().take(family.num_params()) {
            let p = structure.layout.state_predictor(i, k);
            let start = structure.layout.predictors[p].range.start;
            theta[start] = family.links[k].link(*value);
        }
    }
    if n > 1 {
        let eta = (0.1 / (n as f64 - 1.0) / 0.9).ln();
        for pred in &structure.layout.predictors {
            if let PredictorRole::Transition { .. } = pred.role {
                theta[pred.range.start] = eta;
            }
        }
    }
    theta
}

fn inner_or_best(
    problem: &Problem,
    lambda: &[f64],
    theta: &[f64],
    config: &OptimizerConfig,
    inverse_hessian: Option<DMatrix<f64>>,
    warnings: &mut Vec<String>,
) -> Result<(InnerFit, bool)> {
    match fit_penalized_warm(problem, lambda, theta, config, inverse_hessian) {
        Ok(fit) => {
            let ok = fit.gradient_norm <= config.gradient_tolerance;
            Ok((fit, ok))
        }
        Err(Error::NonConvergence {
            iterations,
            gradient_norm,
            best_theta,
            best_objective,
        }) => {
            let msg = format!(
                "inner fit stopped after {iterations} iterations with gradient norm {gradient_norm:.3e}"
            );
            warn!("{msg}");
            warnings.push(msg);
            Ok((
                InnerFit {
                    theta: best_theta,
                    objective: best_objective,
                    gradient_norm,
                    iterations,
                },
                false,
            ))
        }
        Err(e) => Err(e),
    }
}

/// Automatic smoothness selection starting from the default initialization.
pub fn select_smoothness(spec: &ModelSpec, data: &TimeSeriesFrame, config: &OptimizerConfig) -> Result<FittedModel> {
    let problem = Problem::fit_structure(spec, data)?;
    select_smoothness_from(&problem, None, None, config)
}

/// Automatic smoothness selection from optional starting `θ` and `λ`.
pub fn select_smoothness_from(
    problem: &Problem,
    theta_init: Option<&[f64]>,
    lambda_init: Option<&[f64]>,
    config: &OptimizerConfig,
) -> Result<FittedModel> {
    config.validate()?;
    let layout = &problem.structure.layout;
    let np = layout.num_penalties();
    let mut theta = match theta_init {
        Some(t) if t.len() == layout.dim => t.to_vec(),
        Some(t) => {
            return Err(Error::InvalidArgument(format!(
                "initial parameters have length {}, model expects {}",
                t.len(),
                layout.dim
            )))
        }
        None => initial_theta(problem),
    };
    let mut lambda = match lambda_init {
        Some(l) if l.len() == np => l.iter().map(|v| v.clamp(config.lambda_min, config.lambda_max)).collect(),
        Some(_) => return Err(Error::Config(format!("expected {np} smoothing parameters"))),
        None => vec![config.initial_lambda; np],
    };

    let mut diag = FitDiagnostics::default();
    if config.multi_start > 0 && theta_init.is_none() {
        theta = multi_start(problem, &theta, &lambda, config, &mut diag.warnings)?;
    }

    let mut inverse_hessian: Option<DMatrix<f64>> = None;
    let mut all_inner_converged = true;
    let mut accelerator = Accelerator::new(np);
    let (fit, hessian) = loop {
        diag.outer_iterations += 1;
        let (fit, ok) = inner_or_best(
            problem,
            &lambda,
            &theta,
            config,
            inverse_hessian.take(),
            &mut diag.warnings,
        )?;
        all_inner_converged &= ok;
        diag.inner_iterations.push(fit.iterations);
        theta = fit.theta.clone();
        let hess = penalized_hessian(problem, &theta, &lambda)?;
        let h_inv = hess
            .matrix
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("penalized Hessian".into()))?
            .inverse();

        if np == 0 {
            diag.lambda_trace.push(Vec::new());
            break (fit, hess);
        }
        let new_lambda = update_lambda(problem, &theta, &lambda, &h_inv, config, &mut diag.warnings);
        let change = lambda
            .iter()
            .zip(&new_lambda)
            .map(|(old, new)| (new - old).abs() / old)
            .fold(0.0, f64::max);
        diag.lambda_trace.push(new_lambda.clone());
        if change < config.outer_tolerance {
            break (fit, hess);
        }
        if diag.outer_iterations >= config.max_outer_iterations {
            let msg = format!(
                "smoothness selection stopped after {} outer iterations (relative change {change:.3e})",
                diag.outer_iterations
            );
            warn!("{msg}");
            diag.warnings.push(msg);
            all_inner_converged = false;
            break (fit, hess);
        }
        lambda = accelerator.step(&lambda, &new_lambda, config);
        inverse_hessian = Some(h_inv);
    };

    let log_likelihood = problem.log_likelihood(&theta)?;
    diag.converged = all_inner_converged;
    diag.gradient_norm = fit.gradient_norm;
    diag.min_hessian_eigenvalue = hessian.min_eigenvalue;
    diag.hessian_corrected = hessian.corrected;
    if hessian.corrected {
        diag.warnings.push(format!(
            "penalized Hessian was indefinite (min eigenvalue {:.3e}) and was corrected",
            hessian.min_eigenvalue
        ));
    }
    diag.state_order = (0..problem.structure.n_states()).collect();
    let fitted = FittedModel {
        structure: problem.structure.clone(),
        theta,
        lambda,
        hessian: hessian.matrix,
        log_likelihood,
        penalized_objective: fit.objective,
        diagnostics: diag,
    };
    canonicalize(fitted)
}

/// Per-component Aitken extrapolation of the fixed-point iteration in `log λ`.
///
/// Three consecutive plain steps in the same direction with contraction ratio
/// `ρ ≥ 0.8` are extended towards the estimated limit `d/(1-ρ)`, capped at a
/// factor of 10 in `λ`. Each jump is followed by at least three plain updates.
/// Termination is judged on the plain update alone.
struct Accelerator {
    history: Vec<Vec<f64>>,
}

impl Accelerator {
    const MIN_RATIO: f64 = 0.8;
    const MAX_LOG_JUMP: f64 = std::f64::consts::LN_10;

    fn new(n: usize) -> Self {
        Self { history: vec![Vec::new(); n] }
    }

    fn step(&mut self, old: &[f64], proposed: &[f64], config: &OptimizerConfig) -> Vec<f64> {
        old.iter()
            .zip(proposed)
            .zip(&mut self.history)
            .map(|((&old, &new), history)| {
                let d = (new / old).ln();
                history.push(d);
                let n = history.len();
                if n < 3 {
                    return new;
                }
                let (a, b) = (history[n - 3], history[n - 2]);
                let steady = [b / a, d / b].iter().all(|r| r.is_finite() && *r >= Self::MIN_RATIO);
                if !(steady && a * d > 0.0) {
                    return new;
                }
                let rho = (d / b).min(0.99);
                let jump = (d / (1.0 - rho)).clamp(-Self::MAX_LOG_JUMP, Self::MAX_LOG_JUMP);
                history.clear();
                (old * jump.exp()).clamp(config.lambda_min, config.lambda_max)
            })
            .collect()
    }
}

fn update_lambda(
    problem: &Problem,
    theta: &[f64],
    lambda: &[f64],
    h_inv: &DMatrix<f64>,
    config: &OptimizerConfig,
    warnings: &mut Vec<String>,
) -> Vec<f64> {
    let layout = &problem.structure.layout;
    layout
        .penalties
        .iter()
        .enumerate()
        .map(|(p, block)| {
            let s = problem.structure.penalty_matrix(p);
            let r = block.range.start;
            let w = block.range.len();
            let h_block = h_inv.view((r, r), (w, w));
            let trace: f64 = (0..w)
                .map(|i| (0..w).map(|j| h_block[(i, j)] * s[(j, i)]).sum::<f64>())
                .sum();
            let b = nalgebra::DVector::from_column_slice(&theta[block.range.clone()]);
            let bsb = (problem.structure.penalty_root(p) * &b).norm_squared();
            let numerator = (block.rank as f64 / lambda[p] - trace).max(LAMBDA_EPS);
            let proposed = lambda[p] * numerator / bsb.max(LAMBDA_EPS);
            let clamped = proposed.clamp(config.lambda_min, config.lambda_max);
            if clamped != proposed {
                let msg = format!(
                    "smoothing parameter {} ({}) clamped to {clamped:.3e}",
                    p + 1,
                    describe_coefficient(problem, block.range.start)
                );
                if !warnings.contains(&msg) {
                    warn!("{msg}");
                    warnings.push(msg);
                }
            }
            clamped
        })
        .collect()
}

fn multi_start(
    problem: &Problem,
    theta: &[f64],
    lambda: &[f64],
    config: &OptimizerConfig,
    warnings: &mut Vec<String>,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let jitter = Normal::new(0.0, 0.25).expect("valid normal");
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in 0..=config.multi_start {
        let candidate: Vec<f64> = if start == 0 {
            theta.to_vec()
        } else {
            theta.iter().map(|v| v + jitter.sample(&mut rng)).collect()
        };
        match inner_or_best(problem, lambda, &candidate, config, None, warnings) {
            Ok((fit, _)) => {
                if best.as_ref().is_none_or(|(f, _)| fit.objective < *f) {
                    best = Some((fit.objective, fit.theta));
                }
            }
            Err(e) if start > 0 => warn!("multi-start {start} failed: {e}"),
            Err(e) => return Err(e),
        }
    }
    Ok(best.expect("first start succeeded").1)
}

/// Orders states by the intercept of the σ predictor (ascending) when the
/// model treats every state alike.
pub fn canonicalize(mut fitted: FittedModel) -> Result<FittedModel> {
    let structure = &fitted.structure;
    let n = structure.n_states();
    let fixed_asymmetric = match &structure.spec.initial {
        InitialDistribution::Fixed(d) => d.iter().any(|v| (v - d[0]).abs() > 0.0),
        _ => false,
    };
    if n < 2 || !structure.spec.states_exchangeable() || fixed_asymmetric {
        return Ok(fitted);
    }
    let sigma_intercept = |state: usize| {
        let p = structure.layout.state_predictor(state, 1);
        structure.layout.predictors[p]
            .terms
            .iter()
            .find_map(|t| match t {
                TermSlot::Intercept { index } => Some(fitted.theta[*index]),
                _ => None,
            })
            .expect("intercept present")
    };
    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by(|&a, &b| sigma_intercept(a).total_cmp(&sigma_intercept(b)));
    if perm.iter().enumerate().all(|(i, p)| i == *p) {
        return Ok(fitted);
    }
    let (theta_map, penalty_map) = structure.layout.state_permutation(&perm)?;
    let old_theta = fitted.theta.clone();
    fitted.theta = theta_map.iter().map(|&k| old_theta[k]).collect();
    let old_lambda = fitted.lambda.clone();
    fitted.lambda = penalty_map.iter().map(|&k| old_lambda[k]).collect();
    let old_h = fitted.hessian.clone();
    fitted.hessian = DMatrix::from_fn(old_h.nrows(), old_h.ncols(), |a, b| old_h[(theta_map[a], theta_map[b])]);
    for trace in &mut fitted.diagnostics.lambda_trace {
        let old = trace.clone();
        *trace = penalty_map.iter().map(|&k| old[k]).collect();
    }
    fitted.diagnostics.state_order = perm;
    Ok(fitted)
}

/// Inner fit at fixed λ wrapped as a model, with its penalized Hessian.
pub fn fit_fixed_lambda(problem: &Problem, lambda: &[f64], theta_init: &[f64], config: &OptimizerConfig) -> Result<FittedModel> {
    let fit = fit_penalized(problem, lambda, theta_init, config)?;
    let hessian = penalized_hessian(problem, &fit.theta, lambda)?;
    let diagnostics = FitDiagnostics {
        converged: fit.gradient_norm <= config.gradient_tolerance,
        outer_iterations: 1,
        inner_iterations: vec![fit.iterations],
        gradient_norm: fit.gradient_norm,
        lambda_trace: vec![lambda.to_vec()],
        min_hessian_eigenvalue: hessian.min_eigenvalue,
        hessian_corrected: hessian.corrected,
        state_order: (0..problem.structure.n_states()).collect(),
        warnings: Vec::new(),
    };
    Ok(FittedModel {
        structure: problem.structure.clone(),
        log_likelihood: problem.log_likelihood(&fit.theta)?,
        theta: fit.theta,
        lambda: lambda.to_vec(),
        hessian: hessian.matrix,
        penalized_objective: fit.objective,
        diagnostics,
    })
}
