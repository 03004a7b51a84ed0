//! Coefficient packing.
//!
//! The parameter vector θ is the concatenation of one block per predictor:
//! first every state-dependent predictor, ordered by state then by
//! distribution parameter, then every off-diagonal transition predictor in
//! row-major `(from, to)` order. Inside a block the intercept comes first,
//! then linear coefficients in term order, then each smooth's (centered)
//! spline coefficients in term order. Every spline block owns one penalty
//! slot and one smoothing parameter, numbered in order of appearance.

use std::ops::Range;

use indexmap::IndexMap;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::spec::{ModelSpec, Term};
use crate::error::{Error, Result};
use crate::io::frame::TimeSeriesFrame;
use crate::markov::{off_diagonal_pairs, CovariateRow};
use crate::splines::{centered_basis, BasisBundle, SmoothSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorRole {
    State { state: usize, param: usize },
    Transition { from: usize, to: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TermSlot {
    Intercept { index: usize },
    Linear { covariate: String, index: usize },
    Smooth { basis: usize, range: Range<usize>, penalty: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorLayout {
    pub role: PredictorRole,
    pub range: Range<usize>,
    pub terms: Vec<TermSlot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyBlock {
    pub predictor: usize,
    pub basis: usize,
    pub range: Range<usize>,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub predictors: Vec<PredictorLayout>,
    pub penalties: Vec<PenaltyBlock>,
    pub dim: usize,
}

impl Layout {
    pub fn num_penalties(&self) -> usize {
        self.penalties.len()
    }

    pub fn state_predictor(&self, state: usize, param: usize) -> usize {
        self.predictors
            .iter()
            .position(|p| p.role == PredictorRole::State { state, param })
            .expect("state predictor present")
    }

    pub fn transition_predictor(&self, from: usize, to: usize) -> usize {
        self.predictors
            .iter()
            .position(|p| p.role == PredictorRole::Transition { from, to })
            .expect("transition predictor present")
    }

    /// Splits θ into per-predictor coefficient blocks.
    pub fn unpack(&self, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
        if theta.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "parameter vector has length {}, layout expects {}",
                theta.len(),
                self.dim
            )));
        }
        Ok(self
            .predictors
            .iter()
            .map(|p| theta[p.range.clone()].to_vec())
            .collect())
    }

    pub fn pack(&self, blocks: &[Vec<f64>]) -> Result<Vec<f64>> {
        if blocks.len() != self.predictors.len()
            || blocks
                .iter()
                .zip(&self.predictors)
                .any(|(b, p)| b.len() != p.range.len())
        {
            return Err(Error::InvalidArgument("coefficient blocks do not match layout".into()));
        }
        Ok(blocks.concat())
    }

    /// Index map for relabeling states: new state `a` is old state `perm[a]`.
    /// Returns `(theta_map, penalty_map)` with `new[k] = old[map[k]]`.
    pub fn state_permutation(&self, perm: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut theta_map = vec![0; self.dim];
        let mut penalty_map = vec![0; self.penalties.len()];
        for (new_idx, pred) in self.predictors.iter().enumerate() {
            let old_role = match pred.role {
                PredictorRole::State { state, param } => PredictorRole::State {
                    state: perm[state],
                    param,
                },
                PredictorRole::Transition { from, to } => PredictorRole::Transition {
                    from: perm[from],
                    to: perm[to],
                },
            };
            let old_idx = self
                .predictors
                .iter()
                .position(|p| p.role == old_role)
                .ok_or_else(|| Error::InvalidArgument("invalid state permutation".into()))?;
            let old = &self.predictors[old_idx];
            if old.range.len() != pred.range.len() {
                return Err(Error::InvalidArgument(
                    "states have different predictor structures".into(),
                ));
            }
            for (k, idx) in pred.range.clone().enumerate() {
                theta_map[idx] = old.range.start + k;
            }
            for (pi, block) in self.penalties.iter().enumerate() {
                if block.predictor == new_idx {
                    let offset = block.range.start - pred.range.start;
                    let old_pi = self
                        .penalties
                        .iter()
                        .position(|b| b.predictor == old_idx && b.range.start - old.range.start == offset)
                        .ok_or_else(|| Error::InvalidArgument("penalty blocks do not align".into()))?;
                    penalty_map[pi] = old_pi;
                }
            }
        }
        Ok((theta_map, penalty_map))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// Everything about a model that depends on the fitting sample but not on θ:
/// the model spec, the coefficient layout, the spline bases and covariate ranges.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelStructure {
    pub spec: ModelSpec,
    pub layout: Layout,
    pub bases: Vec<BasisBundle>,
    pub covariates: IndexMap<String, CovariateSummary>,
}

impl ModelStructure {
    pub fn build(spec: &ModelSpec, frame: &TimeSeriesFrame) -> Result<Self> {
        spec.validate()?;
        if frame.is_empty() {
            return Err(Error::InvalidArgument("data has no rows".into()));
        }
        let covariate_names = spec.covariates();
        frame.require_columns(
            covariate_names
                .iter()
                .map(|s| s.as_str())
                .chain(std::iter::once(spec.response.as_str())),
        )?;
        if frame.response_name() != spec.response {
            return Err(Error::Config(format!(
                "model response `{}` but data response `{}`",
                spec.response,
                frame.response_name()
            )));
        }

        let mut covariates = IndexMap::new();
        for name in &covariate_names {
            let col = frame.column(name)?;
            let min = col.iter().copied().fold(f64::INFINITY, f64::min);
            let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            covariates.insert(name.clone(), CovariateSummary { min, max, mean });
        }

        let mut bases: Vec<BasisBundle> = Vec::new();
        let mut basis_index = |s: &SmoothSpec| -> Result<usize> {
            if let Some(i) = bases.iter().position(|b| &b.spec == s) {
                return Ok(i);
            }
            let mut b = centered_basis(s, frame.column(&s.covariate)?)?;
            b.design = DMatrix::zeros(0, 0);
            bases.push(b);
            Ok(bases.len() - 1)
        };

        let mut roles = Vec::new();
        for (i, state) in spec.state_predictors.iter().enumerate() {
            for (k, pred) in state.iter().enumerate() {
                roles.push((PredictorRole::State { state: i, param: k }, pred));
            }
        }
        for ((from, to), pred) in off_diagonal_pairs(spec.n_states)
            .into_iter()
            .zip(&spec.transition_predictors)
        {
            roles.push((PredictorRole::Transition { from, to }, pred));
        }

        let mut predictors = Vec::new();
        let mut penalties = Vec::new();
        let mut offset = 0;
        for (role, pred) in roles {
            let start = offset;
            let mut terms = vec![TermSlot::Intercept { index: offset }];
            offset += 1;
            for term in &pred.terms {
                if let Term::Linear(name) = term {
                    terms.push(TermSlot::Linear {
                        covariate: name.clone(),
                        index: offset,
                    });
                    offset += 1;
                }
            }
            for term in &pred.terms {
                if let Term::Smooth(s) = term {
                    let basis = basis_index(s)?;
                    let width = s.num_basis - 1;
                    let range = offset..offset + width;
                    penalties.push(PenaltyBlock {
                        predictor: predictors.len(),
                        basis,
                        range: range.clone(),
                        rank: s.num_basis - s.penalty_order,
                    });
                    terms.push(TermSlot::Smooth {
                        basis,
                        range,
                        penalty: penalties.len() - 1,
                    });
                    offset += width;
                }
            }
            predictors.push(PredictorLayout {
                role,
                range: start..offset,
                terms,
            });
        }
        Ok(Self {
            spec: spec.clone(),
            layout: Layout {
                predictors,
                penalties,
                dim: offset,
            },
            bases,
            covariates,
        })
    }

    pub fn n_states(&self) -> usize {
        self.spec.n_states
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    pub fn penalty_matrix(&self, block: usize) -> &DMatrix<f64> {
        &self.bases[self.layout.penalties[block].basis].penalty
    }

    pub fn penalty_root(&self, block: usize) -> &DMatrix<f64> {
        &self.bases[self.layout.penalties[block].basis].penalty_root
    }

    /// Design matrix of one predictor on a data frame; smooth columns use the
    /// stored bases, so covariates must lie in the fitted range.
    pub fn predictor_design(&self, predictor: usize, frame: &TimeSeriesFrame) -> Result<DMatrix<f64>> {
        let pred = &self.layout.predictors[predictor];
        let t_len = frame.len();
        let mut x = DMatrix::zeros(t_len, pred.range.len());
        for slot in &pred.terms {
            match slot {
                TermSlot::Intercept { index } => x.column_mut(index - pred.range.start).fill(1.0),
                TermSlot::Linear { covariate, index } => {
                    let col = frame.column(covariate)?;
                    x.column_mut(index - pred.range.start)
                        .copy_from_slice(col);
                }
                TermSlot::Smooth { basis, range, .. } => {
                    let b = &self.bases[*basis];
                    let block = b.evaluate(frame.column(&b.spec.covariate)?)?;
                    x.columns_mut(range.start - pred.range.start, range.len())
                        .copy_from(&block);
                }
            }
        }
        Ok(x)
    }

    /// Design row of one predictor at a single covariate row.
    pub fn predictor_row(&self, predictor: usize, z: &CovariateRow) -> Result<Vec<f64>> {
        let pred = &self.layout.predictors[predictor];
        let mut row = vec![0.0; pred.range.len()];
        let get = |name: &str| {
            z.get(name)
                .copied()
                .ok_or_else(|| Error::Config(format!("missing covariate `{name}`")))
        };
        for slot in &pred.terms {
            match slot {
                TermSlot::Intercept { index } => row[index - pred.range.start] = 1.0,
                TermSlot::Linear { covariate, index } => {
                    row[index - pred.range.start] = get(covariate)?;
                }
                TermSlot::Smooth { basis, range, .. } => {
                    let b = &self.bases[*basis];
                    let values = b.evaluate(&[get(&b.spec.covariate)?])?;
                    for (k, v) in values.row(0).iter().enumerate() {
                        row[range.start - pred.range.start + k] = *v;
                    }
                }
            }
        }
        Ok(row)
    }

    /// Covariate row at the training means of every covariate.
    pub fn mean_row(&self) -> CovariateRow {
        self.covariates
            .iter()
            .map(|(k, s)| (k.clone(), s.mean))
            .collect()
    }

    /// Checks a covariate value against the fitting range.
    pub fn check_in_range(&self, covariate: &str, value: f64) -> Result<()> {
        let s = self
            .covariates
            .get(covariate)
            .ok_or_else(|| Error::Config(format!("model does not use covariate `{covariate}`")))?;
        let slack = 1e-9 * (s.max - s.min).abs().max(1.0);
        if !(value >= s.min - slack && value <= s.max + slack) {
            return Err(Error::Domain {
                covariate: covariate.to_string(),
                value,
                lower: s.min,
                upper: s.max,
            });
        }
        Ok(())
    }
}
