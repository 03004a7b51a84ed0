use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::Family;
use crate::markov::off_diagonal_pairs;
use crate::splines::SmoothSpec;

/// One additive term of a predictor. The intercept is always present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Term {
    Linear(String),
    Smooth(SmoothSpec),
}

impl Term {
    pub fn covariate(&self) -> &str {
        match self {
            Term::Linear(name) => name,
            Term::Smooth(s) => &s.covariate,
        }
    }

    pub fn smooth(covariate: &str) -> Self {
        Term::Smooth(SmoothSpec::new(covariate))
    }

    pub fn linear(covariate: &str) -> Self {
        Term::Linear(covariate.to_string())
    }
}

impl std::str::FromStr for Term {
    type Err = Error;

    /// `linear(name)` or `smooth(name)` / `smooth(name, k=M)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("cannot parse term `{s}`"));
        let (head, rest) = s.split_once('(').ok_or_else(bad)?;
        let inner = rest.strip_suffix(')').ok_or_else(bad)?;
        let mut args = inner.split(',').map(str::trim);
        let name = args.next().filter(|n| !n.is_empty()).ok_or_else(bad)?;
        match head.trim() {
            "linear" => {
                if args.next().is_some() {
                    return Err(bad());
                }
                Ok(Term::Linear(name.to_string()))
            }
            "smooth" | "s" => {
                let mut spec = SmoothSpec::new(name);
                for arg in args {
                    let (key, value) = arg.split_once('=').ok_or_else(bad)?;
                    let value: usize = value.trim().parse().map_err(|_| bad())?;
                    match key.trim() {
                        "k" => spec.num_basis = value,
                        "degree" => spec.degree = value,
                        "order" | "m" => spec.penalty_order = value,
                        _ => return Err(bad()),
                    }
                }
                if spec.num_basis < 4 {
                    return Err(Error::Config(format!("`{s}`: k must be at least 4")));
                }
                spec.validate()?;
                Ok(Term::Smooth(spec))
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorSpec {
    pub terms: Vec<Term>,
}

impl PredictorSpec {
    pub fn intercept_only() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn new(terms: Vec<Term>) -> Self {
        Self { terms }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum InitialDistribution {
    #[default]
    Uniform,
    Fixed(Vec<f64>),
    /// Stationary distribution of the t.p.m. at the first covariate row.
    Stationary,
}

/// Declarative model: family, per-state parameter predictors and
/// off-diagonal transition predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n_states: usize,
    pub family: Family,
    pub response: String,
    /// Indexed `[state][parameter]`.
    pub state_predictors: Vec<Vec<PredictorSpec>>,
    /// One per off-diagonal pair, row-major.
    pub transition_predictors: Vec<PredictorSpec>,
    pub initial: InitialDistribution,
}

impl ModelSpec {
    /// Intercept-only model in every predictor.
    pub fn new(n_states: usize, family: Family, response: impl Into<String>) -> Self {
        let k = family.num_params();
        Self {
            n_states,
            state_predictors: vec![vec![PredictorSpec::intercept_only(); k]; n_states],
            transition_predictors: vec![
                PredictorSpec::intercept_only();
                n_states * n_states.saturating_sub(1)
            ],
            family,
            response: response.into(),
            initial: InitialDistribution::Uniform,
        }
    }

    /// Same terms for the named parameter in every state.
    pub fn with_parameter(mut self, param: &str, terms: Vec<Term>) -> Result<Self> {
        let k = self
            .family
            .param_index(param)
            .ok_or_else(|| Error::Config(format!("family has no parameter `{param}`")))?;
        for state in &mut self.state_predictors {
            state[k] = PredictorSpec::new(terms.clone());
        }
        Ok(self)
    }

    /// Same terms for every off-diagonal transition predictor.
    pub fn with_transitions(mut self, terms: Vec<Term>) -> Self {
        for p in &mut self.transition_predictors {
            *p = PredictorSpec::new(terms.clone());
        }
        self
    }

    pub fn with_pair(mut self, from: usize, to: usize, terms: Vec<Term>) -> Result<Self> {
        let idx = off_diagonal_pairs(self.n_states)
            .iter()
            .position(|&p| p == (from, to))
            .ok_or_else(|| Error::Config(format!("no transition pair {from}->{to}")))?;
        self.transition_predictors[idx] = PredictorSpec::new(terms);
        Ok(self)
    }

    pub fn with_initial(mut self, initial: InitialDistribution) -> Self {
        self.initial = initial;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 {
            return Err(Error::Config("number of states must be positive".into()));
        }
        self.family.validate()?;
        let k = self.family.num_params();
        if self.state_predictors.len() != self.n_states
            || self.state_predictors.iter().any(|s| s.len() != k)
        {
            return Err(Error::Config(format!(
                "expected {k} predictors for each of {} states",
                self.n_states
            )));
        }
        if self.transition_predictors.len() != self.n_states * (self.n_states - 1) {
            return Err(Error::Config("one predictor per off-diagonal transition required".into()));
        }
        for pred in self.state_predictors.iter().flatten().chain(&self.transition_predictors) {
            for term in &pred.terms {
                if let Term::Smooth(s) = term {
                    s.validate()?;
                }
            }
        }
        if let InitialDistribution::Fixed(d) = &self.initial {
            if d.len() != self.n_states
                || d.iter().any(|v| *v < 0.0)
                || (d.iter().sum::<f64>() - 1.0).abs() > 1e-10
            {
                return Err(Error::Config(format!("initial distribution {d:?} is not a probability vector")));
            }
        }
        Ok(())
    }

    /// Covariates referenced by any predictor, sorted and deduplicated.
    pub fn covariates(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .state_predictors
            .iter()
            .flatten()
            .chain(&self.transition_predictors)
            .flat_map(|p| p.terms.iter().map(|t| t.covariate().to_string()))
            .collect();
        names.sort();
        names.dedup();
        names
    }

    pub fn transition_covariates(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .transition_predictors
            .iter()
            .flat_map(|p| p.terms.iter().map(|t| t.covariate().to_string()))
            .collect();
        names.sort();
        names.dedup();
        names
    }

    /// True when every state uses identical predictor terms, so states can be relabeled.
    pub fn states_exchangeable(&self) -> bool {
        let first = &self.state_predictors[0];
        self.state_predictors.iter().all(|s| s == first)
            && self
                .transition_predictors
                .iter()
                .all(|p| *p == self.transition_predictors[0])
    }
}
