//! Run configuration in TOML.
//!
//! ```toml
//! data = "prices.csv"            # relative to this file
//! response = "price"
//! family = "skew-normal"         # or "normal"
//! states = 2
//! seed = 1
//! output = "out"
//! lags = ["lag(spread, 360)"]
//! label = "date"                 # opaque column carried through outputs
//! initial = "uniform"            # "stationary" or an explicit vector
//!
//! [parameters]
//! mu = ["smooth(oil_price, k=10)", "linear(exchange_rate)"]
//! sigma = ["smooth(oil_price)"]
//!
//! [transitions]
//! all = ["smooth(exchange_rate)"]
//! "2->1" = []                    # per-pair override
//!
//! [optimizer]
//! max_outer_iterations = 50
//! ```

use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{Family, FamilyKind};
use crate::inference::{InitialDistribution, ModelSpec, Term};
use crate::io::frame::{load_frame, LagDirective, TimeSeriesFrame};
use crate::smoothing::OptimizerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSetting {
    Named(String),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: PathBuf,
    pub response: String,
    pub family: String,
    pub states: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub lags: Vec<String>,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub initial: Option<InitialSetting>,
    #[serde(default)]
    pub parameters: IndexMap<String, Vec<String>>,
    #[serde(default)]
    pub transitions: IndexMap<String, Vec<String>>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_seed() -> u64 {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read `{}`: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.optimizer.validate()?;
        Ok(config)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn data_path(&self) -> PathBuf {
        self.resolve(&self.data)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output)
    }

    pub fn lag_directives(&self) -> Result<Vec<LagDirective>> {
        self.lags.iter().map(|l| l.parse()).collect()
    }

    pub fn family(&self) -> Result<Family> {
        let kind: FamilyKind = self.family.parse()?;
        Ok(Family::new(kind))
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let family = self.family()?;
        if self.states == 0 {
            return Err(Error::Config("`states` must be at least 1".into()));
        }
        let mut spec = ModelSpec::new(self.states, family.clone(), self.response.clone());
        for (param, terms) in &self.parameters {
            if family.param_index(param).is_none() {
                return Err(Error::Config(format!(
                    "family `{}` has no parameter `{param}` (expected one of {})",
                    self.family,
                    family.parameter_names().join(", ")
                )));
            }
            spec = spec.with_parameter(param, parse_terms(terms)?)?;
        }
        if let Some(shared) = self
            .transitions
            .iter()
            .find(|(k, _)| k.as_str() == "all")
            .map(|(_, v)| v)
        {
            spec = spec.with_transitions(parse_terms(shared)?);
        }
        for (key, terms) in &self.transitions {
            if key == "all" {
                continue;
            }
            let (from, to) = parse_pair(key)?;
            if from == to || from >= self.states || to >= self.states {
                return Err(Error::Config(format!("transition `{key}` is not an off-diagonal pair")));
            }
            spec = spec.with_pair(from, to, parse_terms(terms)?)?;
        }
        spec = spec.with_initial(match &self.initial {
            None => InitialDistribution::Uniform,
            Some(InitialSetting::Named(name)) => match name.as_str() {
                "uniform" => InitialDistribution::Uniform,
                "stationary" => InitialDistribution::Stationary,
                other => return Err(Error::Config(format!("unknown initial distribution `{other}`"))),
            },
            Some(InitialSetting::Vector(v)) => InitialDistribution::Fixed(v.clone()),
        });
        spec.validate()?;
        Ok(spec)
    }

    /// Loads the data file with lags applied and checks every referenced column.
    pub fn load_data(&self) -> Result<TimeSeriesFrame> {
        let spec = self.model_spec()?;
        let frame = load_frame(
            &self.data_path(),
            &self.response,
            &self.lag_directives()?,
            self.label.as_deref(),
        )?;
        frame.require_columns(spec.covariates().iter().map(|s| s.as_str()))?;
        Ok(frame)
    }
}

fn parse_terms(terms: &[String]) -> Result<Vec<Term>> {
    terms.iter().map(|t| t.parse()).collect()
}

/// `"i->j"` with 1-based states, returned 0-based.
fn parse_pair(key: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("transition key `{key}` must be `all` or `i->j`"));
    let (a, b) = key.split_once("->").ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b == 0 {
        return Err(bad());
    }
    Ok((a - 1, b - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
data = "energy.csv"
response = "price"
family = "skew-normal"
states = 2
lags = ["lag(oil_price, 1)"]
initial = [0.5, 0.5]

[parameters]
mu = ["smooth(oil_price, k=8)"]
sigma = ["smooth(oil_price)"]
nu = ["linear(oil_price)"]

[transitions]
all = ["smooth(exchange_rate)"]
"2->1" = []

[optimizer]
max_outer_iterations = 20
"#;

    #[test]
    fn parses_full_example() {
        let c = RunConfig::parse(EXAMPLE).unwrap();
        assert_eq!(c.seed, 1);
        assert_eq!(c.optimizer.max_outer_iterations, 20);
        assert_eq!(c.optimizer.gradient_tolerance, 1e-6);
        let spec = c.model_spec().unwrap();
        assert_eq!(spec.transition_predictors[0].terms.len(), 1);
        assert!(spec.transition_predictors[1].terms.is_empty());
        assert_eq!(spec.initial, InitialDistribution::Fixed(vec![0.5, 0.5]));
        assert_eq!(c.lag_directives().unwrap()[0].lag, 1);
    }

    #[test]
    fn rejects_bad_settings() {
        let bad_param = EXAMPLE.replace("nu = ", "tau = ");
        assert!(matches!(RunConfig::parse(&bad_param).unwrap().model_spec(), Err(Error::Config(_))));
        let small_k = EXAMPLE.replace("k=8", "k=3");
        assert!(RunConfig::parse(&small_k).unwrap().model_spec().is_err());
        let bad_pair = EXAMPLE.replace("\"2->1\"", "\"2->2\"");
        assert!(RunConfig::parse(&bad_pair).unwrap().model_spec().is_err());
        assert!(RunConfig::parse("states = 2").is_err());
        let unknown = format!("{EXAMPLE}\n[extra]\nx = 1\n");
        assert!(RunConfig::parse(&unknown).is_err());
    }
}
