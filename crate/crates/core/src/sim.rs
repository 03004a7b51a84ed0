//! Simulation from non-homogeneous Markov-switching distributional regressions.

use std::sync::Arc;

use indexmap::IndexMap;
use nalgebra::DMatrix;
use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::families::Family;
use crate::io::frame::TimeSeriesFrame;
use crate::markov::{off_diagonal_pairs, tpm_from_eta};

/// A function of the covariate vector, in the order of [`DgpSpec::covariates`].
pub type CovFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

pub fn cov_fn(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> CovFn {
    Arc::new(f)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovariateProcess {
    /// Independent draws each time step.
    Uniform { low: f64, high: f64 },
    /// `c_t = ρ c_{t−1} + sd·ε_t`, started from its stationary law.
    Ar1 { rho: f64, sd: f64 },
}

#[derive(Debug, Clone)]
pub struct CovariateGenerator {
    pub name: String,
    pub process: CovariateProcess,
}

#[derive(Clone)]
pub struct DgpSpec {
    pub n_states: usize,
    pub family: Family,
    pub initial: Vec<f64>,
    pub response: String,
    pub covariates: Vec<CovariateGenerator>,
    /// Off-diagonal transition predictors, row-major pair order.
    pub transitions: Vec<CovFn>,
    /// Natural-scale distribution parameters, indexed `[state][param]`.
    pub parameters: Vec<Vec<CovFn>>,
    pub length: usize,
    pub seed: u64,
}

impl std::fmt::Debug for DgpSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DgpSpec")
            .field("n_states", &self.n_states)
            .field("family", &self.family)
            .field("initial", &self.initial)
            .field("covariates", &self.covariates)
            .field("length", &self.length)
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub frame: TimeSeriesFrame,
    /// True states, 0-based.
    pub states: Vec<usize>,
}

/// Two-state normal DGP with quadratic transition effects of `z` and
/// nonlinear mean and scale effects of `x`; `T = 4000`, `δ = (½, ½)`.
pub fn builtin_dgp() -> DgpSpec {
    let uniform = CovariateProcess::Uniform { low: -1.0, high: 1.0 };
    DgpSpec {
        n_states: 2,
        family: Family::normal(),
        initial: vec![0.5, 0.5],
        response: "y".into(),
        covariates: vec![
            CovariateGenerator {
                name: "x".into(),
                process: uniform,
            },
            CovariateGenerator {
                name: "z".into(),
                process: uniform,
            },
        ],
        transitions: vec![
            cov_fn(|c| builtin_eta12(c[1])),
            cov_fn(|c| builtin_eta21(c[1])),
        ],
        parameters: vec![
            vec![cov_fn(|c| builtin_mu(0, c[0])), cov_fn(|c| builtin_log_sigma(0, c[0]).exp())],
            vec![cov_fn(|c| builtin_mu(1, c[0])), cov_fn(|c| builtin_log_sigma(1, c[0]).exp())],
        ],
        length: 4000,
        seed: 1,
    }
}

pub fn builtin_eta12(z: f64) -> f64 {
    -1.8 + 1.5 * z - 2.0 * z * z
}

pub fn builtin_eta21(z: f64) -> f64 {
    -2.1 - 2.0 * z - z * z
}

pub fn builtin_mu(state: usize, x: f64) -> f64 {
    match state {
        0 => x + x * x,
        _ => -1.0 + x + 0.5 * (std::f64::consts::PI * x).sin(),
    }
}

pub fn builtin_log_sigma(state: usize, x: f64) -> f64 {
    match state {
        0 => -0.5 + x * x,
        _ => (1.0 + 0.5 * x).ln(),
    }
}

impl DgpSpec {
    pub fn with_length(mut self, length: usize) -> Self {
        self.length = length;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Adds `offset` to the mean of the last state.
    pub fn with_mean_offset(mut self, offset: f64) -> Self {
        let last = self.n_states - 1;
        let mu = self.parameters[last][0].clone();
        self.parameters[last][0] = cov_fn(move |c| mu(c) + offset);
        self
    }

    /// Switches to the skew-normal family with constant shape `nu` in every state.
    pub fn with_skew(mut self, nu: f64) -> Self {
        self.family = Family::skew_normal();
        for state in &mut self.parameters {
            state.truncate(2);
            state.push(cov_fn(move |_| nu));
        }
        self
    }

    pub fn with_parameter(mut self, state: usize, param: usize, f: CovFn) -> Self {
        self.parameters[state][param] = f;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_states;
        if n == 0 {
            return Err(Error::Config("number of states must be positive".into()));
        }
        if self.length == 0 {
            return Err(Error::Config("series length must be at least 1".into()));
        }
        if self.initial.len() != n
            || self.initial.iter().any(|p| *p < 0.0)
            || (self.initial.iter().sum::<f64>() - 1.0).abs() > 1e-10
        {
            return Err(Error::Config("initial distribution is not a probability vector".into()));
        }
        if self.transitions.len() != n * (n - 1) {
            return Err(Error::Config("one transition predictor per off-diagonal pair required".into()));
        }
        let k = self.family.num_params();
        if self.parameters.len() != n || self.parameters.iter().any(|s| s.len() != k) {
            return Err(Error::Config(format!("{k} parameter functions required per state")));
        }
        for g in &self.covariates {
            let ok = match g.process {
                CovariateProcess::Uniform { low, high } => low < high,
                CovariateProcess::Ar1 { rho, sd } => rho.abs() < 1.0 && sd > 0.0,
            };
            if !ok {
                return Err(Error::Config(format!("invalid generator for covariate `{}`", g.name)));
            }
        }
        Ok(())
    }
}

/// Simulates one series. Γ into time `t` uses the covariates of row `t − 1`.
pub fn simulate(dgp: &DgpSpec) -> Result<Simulation> {
    simulate_stream(dgp, 0)
}

/// Simulates replication `r` on an independent stream of the same seed.
pub fn simulate_replication(dgp: &DgpSpec, r: u64) -> Result<Simulation> {
    simulate_stream(dgp, r)
}

fn simulate_stream(dgp: &DgpSpec, stream: u64) -> Result<Simulation> {
    dgp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(dgp.seed);
    rng.set_stream(stream);
    let n = dgp.n_states;
    let t_len = dgp.length;
    let n_cov = dgp.covariates.len();
    let pairs = off_diagonal_pairs(n);
    let unit = Uniform::new(0.0, 1.0).expect("valid range");

    let mut cov = vec![vec![0.0; n_cov]; t_len];
    for (c, g) in dgp.covariates.iter().enumerate() {
        match g.process {
            CovariateProcess::Uniform { low, high } => {
                let d = Uniform::new(low, high).expect("validated range");
                for row in cov.iter_mut() {
                    row[c] = d.sample(&mut rng);
                }
            }
            CovariateProcess::Ar1 { rho, sd } => {
                let mut prev = sd / (1.0 - rho * rho).sqrt() * rng.sample::<f64, _>(StandardNormal);
                for row in cov.iter_mut() {
                    row[c] = prev;
                    prev = rho * prev + sd * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
    }

    let draw_from = |probs: &[f64], u: f64| -> usize {
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.len() - 1
    };

    let mut states = Vec::with_capacity(t_len);
    let mut y = Vec::with_capacity(t_len);
    let mut eta = DMatrix::zeros(n, n);
    let k = dgp.family.num_params();
    let mut params = vec![0.0; k];
    for t in 0..t_len {
        let u: f64 = unit.sample(&mut rng);
        let state = if t == 0 {
            draw_from(&dgp.initial, u)
        } else {
            for (q, &(i, j)) in pairs.iter().enumerate() {
                eta[(i, j)] = (dgp.transitions[q])(&cov[t - 1]);
            }
            let gamma = tpm_from_eta(&eta);
            let prev = states[t - 1];
            let row: Vec<f64> = (0..n).map(|j| gamma.get(prev, j)).collect();
            draw_from(&row, u)
        };
        states.push(state);
        for (kk, p) in params.iter_mut().enumerate() {
            *p = (dgp.parameters[state][kk])(&cov[t]);
        }
        let value = dgp.family.sample(&params, &mut rng).map_err(|e| {
            Error::Parameter(format!("at t = {} in state {}: {e}", t + 1, state + 1))
        })?;
        y.push(value);
    }

    let mut columns = IndexMap::new();
    columns.insert(dgp.response.clone(), y);
    for (c, g) in dgp.covariates.iter().enumerate() {
        columns.insert(g.name.clone(), cov.iter().map(|row| row[c]).collect());
    }
    Ok(Simulation {
        frame: TimeSeriesFrame::new(dgp.response.clone(), columns)?,
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::stationary;

    #[test]
    fn builtin_design_values() {
        assert_eq!(builtin_mu(0, 0.0), 0.0);
        assert_eq!(builtin_log_sigma(0, 0.0), -0.5);
        assert_eq!(builtin_mu(1, 0.0), -1.0);
        assert_eq!(builtin_log_sigma(1, 0.0), 0.0);
        assert_eq!(builtin_eta12(0.0), -1.8);
        assert!((builtin_eta21(-1.0) - -1.1).abs() < 1e-15);
        let dgp = builtin_dgp();
        assert_eq!(dgp.initial, vec![0.5, 0.5]);
        assert_eq!(dgp.length, 4000);
    }

    #[test]
    fn deterministic_per_seed() {
        let dgp = builtin_dgp().with_length(300).with_seed(9);
        let a = simulate(&dgp).unwrap();
        let b = simulate(&dgp).unwrap();
        assert_eq!(a.frame, b.frame);
        assert_eq!(a.states, b.states);
        let c = simulate_replication(&dgp, 1).unwrap();
        assert_ne!(a.frame.response(), c.frame.response());
    }

    #[test]
    fn invalid_sigma_names_time() {
        let dgp = builtin_dgp()
            .with_length(50)
            .with_parameter(0, 1, cov_fn(|c| c[0]))
            .with_parameter(1, 1, cov_fn(|c| c[0]));
        let err = simulate(&dgp).unwrap_err();
        assert!(matches!(err, Error::Parameter(ref m) if m.contains("at t = ")), "{err}");
    }

    #[test]
    fn switching_frequency_near_zero_covariate() {
        let dgp = builtin_dgp().with_length(1_000_000).with_seed(3);
        let sim = simulate(&dgp).unwrap();
        let z = sim.frame.column("z").unwrap();
        let (mut from1, mut switches) = (0usize, 0usize);
        for t in 1..sim.states.len() {
            if sim.states[t - 1] == 0 && z[t - 1].abs() < 0.05 {
                from1 += 1;
                switches += usize::from(sim.states[t] == 1);
            }
        }
        let freq = switches as f64 / from1 as f64;
        let expected = 1.0 / (1.0 + 1.8f64.exp());
        assert!((expected - 0.1419).abs() < 1e-4);
        assert!((freq - expected).abs() < 0.003, "{freq} vs {expected} from {from1}");
    }

    #[test]
    fn long_run_frequencies_match_averaged_stationary() {
        let t_len = 1_000_000;
        let sim = simulate(&builtin_dgp().with_length(t_len).with_seed(4)).unwrap();
        // With i.i.d. covariates the state sequence is a homogeneous chain
        // with t.p.m. E_z[Γ(z)]; midpoint quadrature over U(−1, 1).
        let m = 2000;
        let mut mean_gamma = DMatrix::zeros(2, 2);
        for g in 0..m {
            let z = -1.0 + (g as f64 + 0.5) * 2.0 / m as f64;
            let mut eta = DMatrix::zeros(2, 2);
            eta[(0, 1)] = builtin_eta12(z);
            eta[(1, 0)] = builtin_eta21(z);
            mean_gamma += tpm_from_eta(&eta).matrix() / m as f64;
        }
        let avg = stationary(&crate::markov::Tpm::new(mean_gamma).unwrap()).unwrap()[0];
        let ind: Vec<f64> = sim.states.iter().map(|&s| f64::from(u8::from(s == 0))).collect();
        let mean = ind.iter().sum::<f64>() / t_len as f64;
        // Batch means for the standard error of a dependent sequence.
        let batches = 200;
        let size = t_len / batches;
        let means: Vec<f64> = ind.chunks(size).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        let var = means.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
        let se = (var / batches as f64).sqrt();
        assert!((mean - avg).abs() < 3.0 * se, "{mean} vs {avg} (se {se})");
    }

    #[test]
    fn skew_variant_uses_three_parameters() {
        let dgp = builtin_dgp().with_skew(5.0).with_mean_offset(4.0).with_length(100);
        assert_eq!(dgp.family, Family::skew_normal());
        let sim = simulate(&dgp).unwrap();
        assert_eq!(sim.frame.len(), 100);
    }
}
