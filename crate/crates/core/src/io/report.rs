//! Model file and fit report.
//!
//! The model file is JSON:
//!
//! ```text
//! { "format": "msgamlss-model", "version": 1,
//!   "data": { "response": ..., "lags": [...], "label": ... },
//!   "model": { "structure": ..., "theta": [...], "lambda": [...],
//!              "hessian": ..., "log_likelihood": ..., ... } }
//! ```
//!
//! Floats are written in shortest round-trip form and parsed exactly, so θ̂
//! survives a save/load cycle bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::layout::TermSlot;
use crate::inference::{FitDiagnostics, FittedModel, PredictorRole};
use crate::io::frame::{load_frame, LagDirective, TimeSeriesFrame};

pub const MODEL_FORMAT: &str = "msgamlss-model";
pub const MODEL_VERSION: u32 = 1;

/// How the fitting data were read, so new data can be prepared identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSettings {
    pub response: String,
    pub lags: Vec<LagDirective>,
    pub label: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub data: DataSettings,
    pub model: FittedModel,
}

impl ModelFile {
    pub fn new(model: FittedModel, data: DataSettings) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            data,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read model file `{}`: {e}", path.display())))?;
        let file: Self = serde_json::from_str(&text)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Config(format!(
                "`{}` is not a version {MODEL_VERSION} model file",
                path.display()
            )));
        }
        Ok(file)
    }

    /// Reads a CSV with the model's lags and label, checking the schema.
    pub fn load_data(&self, path: &Path) -> Result<TimeSeriesFrame> {
        let frame = load_frame(path, &self.data.response, &self.data.lags, self.data.label.as_deref())?;
        let spec = &self.model.structure.spec;
        frame.require_columns(spec.covariates().iter().map(|s| s.as_str()))?;
        Ok(frame)
    }
}

/// Human-readable name of every coefficient in θ.
pub fn coefficient_labels(model: &FittedModel) -> Vec<String> {
    let s = &model.structure;
    let names = s.spec.family.parameter_names();
    let mut labels = vec![String::new(); s.dim()];
    for pred in &s.layout.predictors {
        let owner = match pred.role {
            PredictorRole::State { state, param } => format!("state{}.{}", state + 1, names[param]),
            PredictorRole::Transition { from, to } => format!("eta{}{}", from + 1, to + 1),
        };
        for slot in &pred.terms {
            match slot {
                TermSlot::Intercept { index } => labels[*index] = format!("{owner}.intercept"),
                TermSlot::Linear { covariate, index } => labels[*index] = format!("{owner}.{covariate}"),
                TermSlot::Smooth { basis, range, .. } => {
                    let cov = &s.bases[*basis].spec.covariate;
                    for (k, i) in range.clone().enumerate() {
                        labels[i] = format!("{owner}.s({cov}).{}", k + 1);
                    }
                }
            }
        }
    }
    labels
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub term: String,
    pub lambda: f64,
    pub penalty_rank: usize,
}

/// Summary of a fit, written next to the model file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub family: String,
    pub states: usize,
    pub observations: usize,
    pub log_likelihood: f64,
    pub penalized_objective: f64,
    pub coefficients: Vec<(String, f64)>,
    pub smoothing: Vec<SmoothingReport>,
    pub diagnostics: FitDiagnostics,
}

impl FitReport {
    pub fn new(model: &FittedModel, observations: usize) -> Self {
        let labels = coefficient_labels(model);
        let s = &model.structure;
        let smoothing = s
            .layout
            .penalties
            .iter()
            .zip(&model.lambda)
            .map(|(block, &lambda)| {
                let label = &labels[block.range.start];
                let term = label.rsplit_once('.').map_or(label.as_str(), |(head, _)| head);
                SmoothingReport {
                    term: term.to_string(),
                    lambda,
                    penalty_rank: block.rank,
                }
            })
            .collect();
        Self {
            family: format!("{:?}", s.spec.family.kind),
            states: s.n_states(),
            observations,
            log_likelihood: model.log_likelihood,
            penalized_objective: model.penalized_objective,
            coefficients: labels.into_iter().zip(model.theta.iter().copied()).collect(),
            smoothing,
            diagnostics: model.diagnostics.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
