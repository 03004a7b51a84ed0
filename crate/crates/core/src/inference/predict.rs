use nalgebra::{DMatrix, DVector};

use super::layout::{ModelStructure, PredictorRole};
use crate::error::{Error, Result};
use crate::markov::{off_diagonal_pairs, CovariateRow};

/// Covariate rows that vary `covariate` over `grid` and hold every other
/// covariate at its training mean.
pub fn grid_rows(structure: &ModelStructure, covariate: &str, grid: &[f64]) -> Result<Vec<CovariateRow>> {
    let base = structure.mean_row();
    if !base.contains_key(covariate) {
        return Err(Error::Config(format!("model does not use covariate `{covariate}`")));
    }
    grid.iter()
        .map(|&v| {
            structure.check_in_range(covariate, v)?;
            let mut row = base.clone();
            row.insert(covariate.to_string(), v);
            Ok(row)
        })
        .collect()
}

/// Design matrices of every predictor evaluated at fixed covariate rows,
/// so that curves for many θ can be mapped cheaply.
#[derive(Debug, Clone)]
pub struct GridDesign {
    pub rows: Vec<CovariateRow>,
    designs: Vec<DMatrix<f64>>,
}

impl GridDesign {
    pub fn new(structure: &ModelStructure, rows: Vec<CovariateRow>) -> Result<Self> {
        let designs = (0..structure.layout.predictors.len())
            .map(|p| {
                let width = structure.layout.predictors[p].range.len();
                let mut x = DMatrix::zeros(rows.len(), width);
                for (g, row) in rows.iter().enumerate() {
                    let r = structure.predictor_row(p, row)?;
                    x.row_mut(g).copy_from_slice(&r);
                }
                Ok(x)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows, designs })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Linear predictor of one predictor on the grid.
    pub fn predictor(&self, structure: &ModelStructure, p: usize, theta: &[f64]) -> DVector<f64> {
        let range = structure.layout.predictors[p].range.clone();
        &self.designs[p] * DVector::from_column_slice(&theta[range])
    }

    /// Natural-scale parameter `g⁻¹(η)` for one state and parameter.
    pub fn parameter(
        &self,
        structure: &ModelStructure,
        theta: &[f64],
        state: usize,
        param: usize,
    ) -> Vec<f64> {
        let p = structure.layout.state_predictor(state, param);
        let link = structure.spec.family.links[param];
        self.predictor(structure, p, theta)
            .iter()
            .map(|&e| link.inverse(e))
            .collect()
    }

    /// Off-diagonal predictor matrices `η(z_g)` (diagonal zero) at each grid row.
    pub fn eta_matrices(&self, structure: &ModelStructure, theta: &[f64]) -> Vec<DMatrix<f64>> {
        let n = structure.n_states();
        let mut out = vec![DMatrix::zeros(n, n); self.len()];
        for (p, pred) in structure.layout.predictors.iter().enumerate() {
            if let PredictorRole::Transition { from, to } = pred.role {
                let eta = self.predictor(structure, p, theta);
                for (g, m) in out.iter_mut().enumerate() {
                    m[(from, to)] = eta[g];
                }
            }
        }
        out
    }
}

/// Parameter curves over a grid, indexed `[state][param][grid point]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterCurves {
    pub covariate: String,
    pub grid: Vec<f64>,
    pub names: Vec<&'static str>,
    pub values: Vec<Vec<Vec<f64>>>,
}

pub fn predict_parameters(
    structure: &ModelStructure,
    theta: &[f64],
    covariate: &str,
    grid: &[f64],
) -> Result<ParameterCurves> {
    let design = GridDesign::new(structure, grid_rows(structure, covariate, grid)?)?;
    let k = structure.spec.family.num_params();
    let values = (0..structure.n_states())
        .map(|i| (0..k).map(|param| design.parameter(structure, theta, i, param)).collect())
        .collect();
    Ok(ParameterCurves {
        covariate: covariate.to_string(),
        grid: grid.to_vec(),
        names: structure.spec.family.parameter_names(),
        values,
    })
}

/// Conditional quantile curves, indexed `[state][probability][grid point]`.
pub fn quantile_curves(curves: &ParameterCurves, structure: &ModelStructure, probs: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
    let family = &structure.spec.family;
    let k = family.num_params();
    curves
        .values
        .iter()
        .map(|state| {
            probs
                .iter()
                .map(|&p| {
                    (0..curves.grid.len())
                        .map(|g| {
                            let params: Vec<f64> = (0..k).map(|kk| state[kk][g]).collect();
                            family.quantile(p, &params)
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Transition-pair labels in predictor order, 1-based as `"i->j"`.
pub fn pair_labels(n_states: usize) -> Vec<String> {
    off_diagonal_pairs(n_states)
        .into_iter()
        .map(|(i, j)| format!("{}->{}", i + 1, j + 1))
        .collect()
}
