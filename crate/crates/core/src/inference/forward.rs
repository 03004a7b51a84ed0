//! Scaled forward algorithm and its exact gradient.
//!
//! The log-likelihood is accumulated from normalized forward variables
//! `φ_t = α_t / (α_t 1ᵀ)`:
//!
//! ```text
//! ℓ = log(δ P(y_1) 1ᵀ) + Σ_{t≥2} log(φ_{t−1} Γ^{(t)} P(y_t) 1ᵀ)
//! ```
//!
//! Densities are exponentiated after subtracting the per-step maximum of the
//! state log-densities. The gradient comes from the matching scaled backward
//! pass: state posteriors weight the density scores and pairwise posteriors
//! weight the softmax derivatives of the transition predictors.

use nalgebra::{DMatrix, DVector};

use super::layout::{ModelStructure, PredictorRole};
use super::spec::InitialDistribution;
use crate::error::{Error, Result};
use crate::io::frame::TimeSeriesFrame;
use crate::markov::{off_diagonal_pairs, softmax_row, stationary, Tpm, ETA_CLIP};

/// A model structure bound to one data set: design matrices and response.
#[derive(Debug, Clone)]
pub struct Problem {
    pub structure: ModelStructure,
    designs: Vec<DMatrix<f64>>,
    y: Vec<f64>,
}

/// θ-dependent quantities entering the forward recursion.
#[derive(Debug, Clone)]
pub struct Components {
    pub n_states: usize,
    pub n_params: usize,
    /// Natural-scale parameters, indexed `[t][state][param]`.
    pub params: Vec<f64>,
    /// Predictor values of the state-dependent parameters, same indexing.
    pub eta: Vec<f64>,
    /// `log f_i(y_t)`, indexed `[t][state]`.
    pub log_dens: Vec<f64>,
    /// `Γ^{(t)}` for `t = 1..T` (transition into `t`), indexed `[t−1][i][j]`.
    pub gammas: Vec<f64>,
    /// Off-diagonal transition predictors per covariate row, `[t][pair]`.
    pub trans_eta: Vec<f64>,
    pub delta: Vec<f64>,
}

impl Components {
    pub fn len(&self) -> usize {
        self.log_dens.len() / self.n_states
    }

    pub fn is_empty(&self) -> bool {
        self.log_dens.is_empty()
    }

    pub fn params_at(&self, t: usize, state: usize) -> &[f64] {
        let k = self.n_params;
        let start = (t * self.n_states + state) * k;
        &self.params[start..start + k]
    }

    /// Transition matrix into time `t` (`t ≥ 1`).
    pub fn gamma(&self, t: usize, i: usize, j: usize) -> f64 {
        let n = self.n_states;
        self.gammas[(t - 1) * n * n + i * n + j]
    }

    pub fn tpm(&self, t: usize) -> Tpm {
        let n = self.n_states;
        Tpm::new(DMatrix::from_row_slice(
            n,
            n,
            &self.gammas[(t - 1) * n * n..t * n * n],
        ))
        .expect("softmax rows are stochastic")
    }
}

/// Normalized forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub log_likelihood: f64,
    /// `φ_t`, indexed `[t][state]`; each row sums to one.
    pub phi: Vec<f64>,
    /// `exp(log f_i(y_t) − m_t)`.
    pub scaled_dens: Vec<f64>,
    /// Per-step normalizers `φ_{t−1} Γ^{(t)} P̃(y_t) 1ᵀ`.
    pub scale: Vec<f64>,
}

impl Problem {
    pub fn new(structure: ModelStructure, frame: &TimeSeriesFrame) -> Result<Self> {
        let needed = structure.spec.covariates();
        frame.require_columns(
            needed
                .iter()
                .map(|s| s.as_str())
                .chain(std::iter::once(structure.spec.response.as_str())),
        )?;
        if frame.is_empty() {
            return Err(Error::InvalidArgument("data has no rows".into()));
        }
        let designs = (0..structure.layout.predictors.len())
            .map(|p| structure.predictor_design(p, frame))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            structure,
            designs,
            y: frame.response().to_vec(),
        })
    }

    /// Builds bases on `frame` and binds them to the same data.
    pub fn fit_structure(spec: &super::ModelSpec, frame: &TimeSeriesFrame) -> Result<Self> {
        Self::new(ModelStructure::build(spec, frame)?, frame)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.structure.dim()
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn design(&self, predictor: usize) -> &DMatrix<f64> {
        &self.designs[predictor]
    }

    fn predictor_values(&self, predictor: usize, theta: &[f64]) -> DVector<f64> {
        let range = self.structure.layout.predictors[predictor].range.clone();
        let beta = DVector::from_column_slice(&theta[range]);
        &self.designs[predictor] * beta
    }

    pub fn components(&self, theta: &[f64]) -> Result<Components> {
        self.components_inner(theta, None)
    }

    fn components_inner(&self, theta: &[f64], mut scores: Option<&mut Vec<f64>>) -> Result<Components> {
        let layout = &self.structure.layout;
        if theta.len() != layout.dim {
            return Err(Error::InvalidArgument(format!(
                "parameter vector has length {}, model expects {}",
                theta.len(),
                layout.dim
            )));
        }
        let spec = &self.structure.spec;
        let family = &spec.family;
        let n = spec.n_states;
        let k = family.num_params();
        let t_len = self.y.len();

        let mut eta = vec![0.0; t_len * n * k];
        let mut params = vec![0.0; t_len * n * k];
        let mut trans_eta = vec![0.0; t_len * n * (n - 1)];
        let pairs = off_diagonal_pairs(n);
        for (p, pred) in layout.predictors.iter().enumerate() {
            let values = self.predictor_values(p, theta);
            match pred.role {
                PredictorRole::State { state, param } => {
                    let link = family.links[param];
                    for t in 0..t_len {
                        let idx = (t * n + state) * k + param;
                        eta[idx] = values[t];
                        params[idx] = link.inverse(values[t]);
                    }
                }
                PredictorRole::Transition { from, to } => {
                    let q = pairs.iter().position(|&pr| pr == (from, to)).expect("pair");
                    for t in 0..t_len {
                        trans_eta[t * (n - 1) * n + q] = values[t];
                    }
                }
            }
        }

        let mut log_dens = vec![0.0; t_len * n];
        if let Some(s) = scores.as_deref_mut() {
            s.clear();
            s.resize(t_len * n * k, 0.0);
        }
        for t in 0..t_len {
            for i in 0..n {
                let base = (t * n + i) * k;
                let par = &params[base..base + k];
                let sigma = par[1];
                if !(sigma > 0.0) || !sigma.is_finite() || par.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Parameter(format!(
                        "state {} at t = {t}: parameters {par:?}",
                        i + 1
                    )));
                }
                let y = self.y[t];
                log_dens[t * n + i] = match scores.as_deref_mut() {
                    Some(s) => {
                        let out = &mut s[base..base + k];
                        let lf = family.log_density_with_score(y, par, out);
                        for (kk, v) in out.iter_mut().enumerate() {
                            *v *= family.links[kk].inverse_derivative(eta[base + kk]);
                        }
                        lf
                    }
                    None => family.log_density_unchecked(y, par),
                };
            }
        }

        let mut gammas = vec![0.0; t_len.saturating_sub(1) * n * n];
        let mut row_eta = vec![0.0; n];
        for t in 1..t_len {
            for i in 0..n {
                for j in 0..n {
                    row_eta[j] = if i == j {
                        0.0
                    } else {
                        let q = pair_index(n, i, j);
                        trans_eta[(t - 1) * (n - 1) * n + q]
                    };
                }
                let start = (t - 1) * n * n + i * n;
                softmax_row(&row_eta, &mut gammas[start..start + n]);
            }
        }

        let delta = match &spec.initial {
            InitialDistribution::Uniform => vec![1.0 / n as f64; n],
            InitialDistribution::Fixed(d) => d.clone(),
            InitialDistribution::Stationary => {
                let g0 = first_tpm(&trans_eta, n);
                stationary(&g0)?.iter().copied().collect()
            }
        };

        Ok(Components {
            n_states: n,
            n_params: k,
            params,
            eta,
            log_dens,
            gammas,
            trans_eta,
            delta,
        })
    }

    pub fn forward(&self, comps: &Components) -> Result<ForwardPass> {
        let n = comps.n_states;
        let t_len = comps.len();
        let mut phi = vec![0.0; t_len * n];
        let mut scaled = vec![0.0; t_len * n];
        let mut scale = vec![0.0; t_len];
        let mut loglik = 0.0;
        let mut pred = vec![0.0; n];
        for t in 0..t_len {
            let lf = &comps.log_dens[t * n..(t + 1) * n];
            let m = lf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                return Err(Error::Likelihood { t: t + 1 });
            }
            for i in 0..n {
                scaled[t * n + i] = (lf[i] - m).exp();
            }
            if t == 0 {
                pred.copy_from_slice(&comps.delta);
            } else {
                pred.iter_mut().for_each(|p| *p = 0.0);
                for i in 0..n {
                    let w = phi[(t - 1) * n + i];
                    if w == 0.0 {
                        continue;
                    }
                    for (j, p) in pred.iter_mut().enumerate() {
                        *p += w * comps.gamma(t, i, j);
                    }
                }
            }
            let mut c = 0.0;
            for i in 0..n {
                let a = pred[i] * scaled[t * n + i];
                phi[t * n + i] = a;
                c += a;
            }
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::Likelihood { t: t + 1 });
            }
            for i in 0..n {
                phi[t * n + i] /= c;
            }
            scale[t] = c;
            loglik += c.ln() + m;
        }
        Ok(ForwardPass {
            log_likelihood: loglik,
            phi,
            scaled_dens: scaled,
            scale,
        })
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> Result<f64> {
        let comps = self.components(theta)?;
        Ok(self.forward(&comps)?.log_likelihood)
    }

    /// Log-likelihood and its exact gradient with respect to θ.
    pub fn log_likelihood_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut scores = Vec::new();
        let comps = self.components_inner(theta, Some(&mut scores))?;
        let fwd = self.forward(&comps)?;
        let n = comps.n_states;
        let k = comps.n_params;
        let t_len = comps.len();
        let pairs = off_diagonal_pairs(n);
        let n_pairs = pairs.len();

        // Scaled backward pass.
        let mut back = vec![1.0; t_len * n];
        for t in (1..t_len).rev() {
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    s += comps.gamma(t, i, j) * fwd.scaled_dens[t * n + j] * back[t * n + j];
                }
                back[(t - 1) * n + i] = s / fwd.scale[t];
            }
        }

        // dℓ/dη for each state-dependent predictor value.
        let mut state_w = vec![0.0; t_len * n * k];
        for t in 0..t_len {
            for i in 0..n {
                let post = fwd.phi[t * n + i] * back[t * n + i];
                for kk in 0..k {
                    let idx = (t * n + i) * k + kk;
                    state_w[idx] = post * scores[idx];
                }
            }
        }

        // dℓ/dη for each transition predictor value, per covariate row.
        let mut trans_w = vec![0.0; t_len * n_pairs];
        let mut v = vec![0.0; n * n];
        for t in 1..t_len {
            for i in 0..n {
                let fi = fwd.phi[(t - 1) * n + i];
                for j in 0..n {
                    v[i * n + j] = fi
                        * comps.gamma(t, i, j)
                        * fwd.scaled_dens[t * n + j]
                        * back[t * n + j]
                        / fwd.scale[t];
                }
            }
            for (q, &(a, b)) in pairs.iter().enumerate() {
                let eta = comps.trans_eta[(t - 1) * n_pairs + q];
                if eta.abs() >= ETA_CLIP {
                    continue;
                }
                let row_total: f64 = v[a * n..(a + 1) * n].iter().sum();
                trans_w[(t - 1) * n_pairs + q] = v[a * n + b] - comps.gamma(t, a, b) * row_total;
            }
        }

        if matches!(self.structure.spec.initial, InitialDistribution::Stationary) {
            // dℓ/dδ_i, then implicit differentiation of δ(I − Γ + U) = 1.
            let g = DVector::from_fn(n, |i, _| fwd.scaled_dens[i] * back[i] / fwd.scale[0]);
            let g0 = first_tpm(&comps.trans_eta, n);
            let gm = g0.matrix();
            let a = DMatrix::<f64>::identity(n, n) - gm + DMatrix::from_element(n, n, 1.0);
            let ainv_g = a
                .lu()
                .solve(&g)
                .ok_or_else(|| Error::Singular("stationary initial distribution".into()))?;
            for (q, &(a_, b)) in pairs.iter().enumerate() {
                if comps.trans_eta[q].abs() >= ETA_CLIP {
                    continue;
                }
                // ∂ℓ/∂Γ_ab = δ_a (A⁻¹g)_b, chained through the softmax of row a.
                let grad_gamma = |l: usize| comps.delta[a_] * ainv_g[l];
                let row_mean: f64 = (0..n).map(|l| gm[(a_, l)] * grad_gamma(l)).sum();
                trans_w[q] += gm[(a_, b)] * (grad_gamma(b) - row_mean);
            }
        }

        let layout = &self.structure.layout;
        let mut grad = vec![0.0; layout.dim];
        for (p, pred) in layout.predictors.iter().enumerate() {
            let w = match pred.role {
                PredictorRole::State { state, param } => {
                    DVector::from_fn(t_len, |t, _| state_w[(t * n + state) * k + param])
                }
                PredictorRole::Transition { from, to } => {
                    let q = pair_index(n, from, to);
                    DVector::from_fn(t_len, |t, _| trans_w[t * n_pairs + q])
                }
            };
            let g = self.designs[p].tr_mul(&w);
            grad[pred.range.clone()].copy_from_slice(g.as_slice());
        }
        Ok((fwd.log_likelihood, grad))
    }

    /// `½ Σ_p λ_p b_pᵀ S_p b_p`.
    pub fn penalty(&self, theta: &[f64], lambda: &[f64]) -> f64 {
        self.structure
            .layout
            .penalties
            .iter()
            .enumerate()
            .map(|(p, block)| {
                let r = self.structure.penalty_root(p);
                0.5 * lambda[p] * (r * DVector::from_column_slice(&theta[block.range.clone()])).norm_squared()
            })
            .sum()
    }

    fn check_lambda(&self, lambda: &[f64]) -> Result<()> {
        let np = self.structure.layout.num_penalties();
        if lambda.len() != np {
            return Err(Error::Config(format!(
                "expected {np} smoothing parameters, got {}",
                lambda.len()
            )));
        }
        if let Some(bad) = lambda.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
            return Err(Error::Config(format!("smoothing parameter {bad} must be non-negative")));
        }
        Ok(())
    }

    pub fn penalized_nll(&self, theta: &[f64], lambda: &[f64]) -> Result<f64> {
        self.check_lambda(lambda)?;
        Ok(-self.log_likelihood(theta)? + self.penalty(theta, lambda))
    }

    pub fn penalized_nll_grad(&self, theta: &[f64], lambda: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_lambda(lambda)?;
        let (ll, mut grad) = self.log_likelihood_grad(theta)?;
        grad.iter_mut().for_each(|g| *g = -*g);
        let mut pen = 0.0;
        for (p, block) in self.structure.layout.penalties.iter().enumerate() {
            let b = DVector::from_column_slice(&theta[block.range.clone()]);
            let r = self.structure.penalty_root(p);
            let rb = r * &b;
            let sb = r.tr_mul(&rb);
            pen += 0.5 * lambda[p] * rb.norm_squared();
            for (g, v) in grad[block.range.clone()].iter_mut().zip(sb.iter()) {
                *g += lambda[p] * v;
            }
        }
        Ok((-ll + pen, grad))
    }
}

/// `½ λ bᵀ S b` for one block.
pub fn quadratic_penalty(b: &[f64], s: &DMatrix<f64>, lambda: f64) -> f64 {
    let b = DVector::from_column_slice(b);
    0.5 * lambda * b.dot(&(s * &b))
}

pub(crate) fn pair_index(n: usize, from: usize, to: usize) -> usize {
    from * (n - 1) + if to > from { to - 1 } else { to }
}

fn first_tpm(trans_eta: &[f64], n: usize) -> Tpm {
    let mut eta = DMatrix::zeros(n, n);
    for (q, (i, j)) in off_diagonal_pairs(n).into_iter().enumerate() {
        eta[(i, j)] = trans_eta[q];
    }
    crate::markov::tpm_from_eta(&eta)
}
