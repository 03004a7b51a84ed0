//! Python bindings: simulation, fitting, decoding, diagnostics and curve
//! prediction. Data are passed as `dict[str, list[float]]` column maps or as
//! CSV paths.

use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use msgamlss::inference::{ks_test_normal, FittedModel};
use msgamlss::io::config::{InitialSetting, RunConfig};
use msgamlss::io::{DataSettings, ModelFile, TimeSeriesFrame};
use msgamlss::markov;
use msgamlss::sim::{builtin_dgp, simulate_replication};
use msgamlss::smoothing::select_smoothness;
use msgamlss::uncertainty::{effect_band, sample_posterior, transition_band, TransitionTarget};
use msgamlss::Error;

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

type Columns = IndexMap<String, Vec<f64>>;

/// Data argument: a column dict or a CSV path.
#[derive(FromPyObject)]
enum DataArg {
    Columns(Columns),
    Path(PathBuf),
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("expected a non-empty square matrix"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Simulates from the built-in two-state normal design. Returns columns
/// `y`, `x`, `z` and the 1-based true `state`.
#[pyfunction]
#[pyo3(signature = (length = 4000, seed = 1, replication = 0, mean_offset = None, skew = None))]
fn simulate(length: usize, seed: u64, replication: u64, mean_offset: Option<f64>, skew: Option<f64>) -> PyResult<Columns> {
    let mut dgp = builtin_dgp().with_length(length).with_seed(seed);
    if let Some(offset) = mean_offset {
        dgp = dgp.with_mean_offset(offset);
    }
    if let Some(nu) = skew {
        dgp = dgp.with_skew(nu);
    }
    let sim = simulate_replication(&dgp, replication).map_err(to_py)?;
    let mut out = Columns::new();
    for name in sim.frame.column_names() {
        out.insert(name.to_string(), sim.frame.column(name).map_err(to_py)?.to_vec());
    }
    out.insert("state".into(), sim.states.iter().map(|s| (s + 1) as f64).collect());
    Ok(out)
}

/// Stationary distribution of a row-stochastic matrix.
#[pyfunction]
fn stationary(tpm: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let tpm = markov::Tpm::new(matrix_from_rows(&tpm)?).map_err(to_py)?;
    Ok(markov::stationary(&tpm).map_err(to_py)?.iter().copied().collect())
}

/// Row-wise softmax of a predictor matrix; the diagonal is the reference.
#[pyfunction]
fn tpm_from_eta(eta: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let eta = matrix_from_rows(&eta)?;
    Ok(matrix_rows(markov::tpm_from_eta(&eta).matrix()))
}

/// Kolmogorov–Smirnov test against the standard normal: `(statistic, p_value)`.
#[pyfunction]
fn ks_normal(sample: Vec<f64>) -> (f64, f64) {
    let r = ks_test_normal(&sample);
    (r.statistic, r.p_value)
}

/// Fits a model from a TOML run configuration file.
#[pyfunction]
fn fit_config(path: PathBuf) -> PyResult<Model> {
    let config = RunConfig::load(&path).map_err(to_py)?;
    fit_run(&config, config.load_data().map_err(to_py)?)
}

/// Fits a model to in-memory columns. Term strings use the configuration
/// syntax, e.g. `parameters={"mu": ["smooth(x)"]}`, `transitions={"all": ["smooth(z)"]}`.
#[pyfunction]
#[pyo3(signature = (
    columns, response, family = "normal".to_string(), states = 2, parameters = None,
    transitions = None, initial = None, lags = None, seed = 1, multi_start = 0
))]
#[allow(clippy::too_many_arguments)]
fn fit(
    columns: Columns,
    response: String,
    family: String,
    states: usize,
    parameters: Option<IndexMap<String, Vec<String>>>,
    transitions: Option<IndexMap<String, Vec<String>>>,
    initial: Option<Bound<'_, PyAny>>,
    lags: Option<Vec<String>>,
    seed: u64,
    multi_start: usize,
) -> PyResult<Model> {
    let initial = match initial {
        None => None,
        Some(obj) => Some(match obj.extract::<String>() {
            Ok(name) => InitialSetting::Named(name),
            Err(_) => InitialSetting::Vector(obj.extract::<Vec<f64>>()?),
        }),
    };
    let mut config = RunConfig {
        data: PathBuf::new(),
        response: response.clone(),
        family,
        states,
        seed,
        output: PathBuf::new(),
        lags: lags.unwrap_or_default(),
        label: None,
        initial,
        parameters: parameters.unwrap_or_default(),
        transitions: transitions.unwrap_or_default(),
        optimizer: Default::default(),
        base_dir: PathBuf::new(),
    };
    config.optimizer.multi_start = multi_start;
    let spec = config.model_spec().map_err(to_py)?;
    let frame = TimeSeriesFrame::new(response, columns)
        .and_then(|f| f.apply_lags(&config.lag_directives()?))
        .map_err(to_py)?;
    frame
        .require_columns(spec.covariates().iter().map(|s| s.as_str()))
        .map_err(to_py)?;
    fit_run(&config, frame)
}

fn fit_run(config: &RunConfig, frame: TimeSeriesFrame) -> PyResult<Model> {
    let spec = config.model_spec().map_err(to_py)?;
    let mut optimizer = config.optimizer.clone();
    optimizer.seed = config.seed;
    let model = select_smoothness(&spec, &frame, &optimizer).map_err(to_py)?;
    let settings = DataSettings {
        response: config.response.clone(),
        lags: config.lag_directives().map_err(to_py)?,
        label: config.label.clone(),
    };
    Ok(Model {
        file: ModelFile::new(model, settings),
    })
}

/// A fitted model together with the data settings needed to read new data.
#[pyclass(module = "msgamlss_py")]
struct Model {
    file: ModelFile,
}

impl Model {
    fn fitted(&self) -> &FittedModel {
        &self.file.model
    }

    fn frame(&self, data: DataArg) -> PyResult<TimeSeriesFrame> {
        match data {
            DataArg::Path(p) => self.file.load_data(&p).map_err(to_py),
            DataArg::Columns(cols) => {
                let frame = TimeSeriesFrame::new(self.file.data.response.clone(), cols)
                    .and_then(|f| f.apply_lags(&self.file.data.lags))
                    .map_err(to_py)?;
                let spec = &self.fitted().structure.spec;
                frame
                    .require_columns(spec.covariates().iter().map(|s| s.as_str()))
                    .map_err(to_py)?;
                Ok(frame)
            }
        }
    }

    fn target(&self, kind: &str, index: (usize, usize)) -> PyResult<TransitionTarget> {
        match kind {
            "transition" => Ok(TransitionTarget::Pair {
                from: index.0,
                to: index.1,
            }),
            "stationary" => Ok(TransitionTarget::Stationary { state: index.0 }),
            other => Err(PyValueError::new_err(format!("unknown band target `{other}`"))),
        }
    }
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            file: ModelFile::load(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.file.save(Path::new(&path)).map_err(to_py)
    }

    #[getter]
    fn n_states(&self) -> usize {
        self.fitted().n_states()
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.fitted().structure.spec.family.kind.name()
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.fitted().theta.clone()
    }

    #[getter]
    fn smoothing_parameters(&self) -> Vec<f64> {
        self.fitted().lambda.clone()
    }

    #[getter]
    fn log_likelihood(&self) -> f64 {
        self.fitted().log_likelihood
    }

    #[getter]
    fn converged(&self) -> bool {
        self.fitted().diagnostics.converged
    }

    #[getter]
    fn outer_iterations(&self) -> usize {
        self.fitted().diagnostics.outer_iterations
    }

    #[getter]
    fn coefficient_labels(&self) -> Vec<String> {
        msgamlss::io::report::coefficient_labels(self.fitted())
    }

    /// Log-likelihood of the fitted parameters on other data.
    fn log_likelihood_on(&self, data: DataArg) -> PyResult<f64> {
        let frame = self.frame(data)?;
        self.fitted().log_likelihood_on(&frame).map_err(to_py)
    }

    /// Most probable state sequence, 1-based.
    fn viterbi(&self, data: DataArg) -> PyResult<Vec<usize>> {
        let frame = self.frame(data)?;
        Ok(self.fitted().viterbi(&frame).map_err(to_py)?.into_iter().map(|s| s + 1).collect())
    }

    /// One-step-ahead pseudo-residuals.
    fn pseudo_residuals(&self, data: DataArg) -> PyResult<Vec<f64>> {
        let frame = self.frame(data)?;
        Ok(self.fitted().pseudo_residuals(&frame).map_err(to_py)?.residuals)
    }

    /// `{parameter: [state][grid]}` on the natural scale.
    fn effects(&self, covariate: &str, grid: Vec<f64>) -> PyResult<IndexMap<String, Vec<Vec<f64>>>> {
        let curves = self.fitted().predict_parameters(covariate, &grid).map_err(to_py)?;
        Ok(curves
            .names
            .iter()
            .enumerate()
            .map(|(k, name)| (name.to_string(), curves.values.iter().map(|s| s[k].clone()).collect()))
            .collect())
    }

    /// Conditional quantiles `[state][prob][grid]`.
    fn quantiles(&self, covariate: &str, grid: Vec<f64>, probs: Vec<f64>) -> PyResult<Vec<Vec<Vec<f64>>>> {
        self.fitted().quantile_curves(covariate, &grid, &probs).map_err(to_py)
    }

    /// Transition probability matrices `[grid][from][to]`.
    fn transitions(&self, covariate: &str, grid: Vec<f64>) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let tpms = self.fitted().tpm_curve(covariate, &grid).map_err(to_py)?;
        Ok(tpms.iter().map(|m| matrix_rows(m.matrix())).collect())
    }

    /// Stationary distributions `[grid][state]`.
    fn stationary(&self, covariate: &str, grid: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let curve = self.fitted().stationary_curve(covariate, &grid).map_err(to_py)?;
        Ok(matrix_rows(&curve))
    }

    /// Pointwise band for one state-dependent parameter: `(estimate, lower, upper)`.
    /// `state` is 1-based.
    #[pyo3(signature = (parameter, state, covariate, grid, draws = 1000, level = 0.95, seed = 1))]
    #[allow(clippy::too_many_arguments)]
    fn effect_band(
        &self,
        parameter: &str,
        state: usize,
        covariate: &str,
        grid: Vec<f64>,
        draws: usize,
        level: f64,
        seed: u64,
    ) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let state = state.checked_sub(1).ok_or_else(|| PyValueError::new_err("states are 1-based"))?;
        let samples = sample_posterior(self.fitted(), draws, seed).map_err(to_py)?;
        let b = effect_band(self.fitted(), &samples, parameter, state, covariate, &grid, level).map_err(to_py)?;
        Ok((b.estimate, b.lower, b.upper))
    }

    /// Pointwise band for `kind = "transition"` (`index = (from, to)`) or
    /// `"stationary"` (`index = (state, _)`), 1-based: `(estimate, lower, upper)`.
    #[pyo3(signature = (kind, index, covariate, grid, draws = 1000, level = 0.95, seed = 1))]
    #[allow(clippy::too_many_arguments)]
    fn transition_band(
        &self,
        kind: &str,
        index: (usize, usize),
        covariate: &str,
        grid: Vec<f64>,
        draws: usize,
        level: f64,
        seed: u64,
    ) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let zero = |i: usize| i.checked_sub(1).ok_or_else(|| PyValueError::new_err("states are 1-based"));
        let index = match kind {
            "stationary" => (zero(index.0)?, 0),
            _ => (zero(index.0)?, zero(index.1)?),
        };
        let target = self.target(kind, index)?;
        let samples = sample_posterior(self.fitted(), draws, seed).map_err(to_py)?;
        let b = transition_band(self.fitted(), &samples, target, covariate, &grid, level).map_err(to_py)?;
        Ok((b.estimate, b.lower, b.upper))
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(family={}, states={}, log_likelihood={:.4})",
            self.family(),
            self.n_states(),
            self.log_likelihood()
        )
    }
}

#[pymodule]
pub fn msgamlss_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(fit_config, m)?)?;
    m.add_function(wrap_pyfunction!(stationary, m)?)?;
    m.add_function(wrap_pyfunction!(tpm_from_eta, m)?)?;
    m.add_function(wrap_pyfunction!(ks_normal, m)?)?;
    Ok(())
}
