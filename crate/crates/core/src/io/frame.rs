use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::CovariateRow;

/// Response plus aligned covariate columns, in time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesFrame {
    response: String,
    columns: IndexMap<String, Vec<f64>>,
    labels: Option<(String, Vec<String>)>,
}

/// `lag(name, L)`: row `t` takes the value the column had at `t − L`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagDirective {
    pub column: String,
    pub lag: usize,
}

impl std::str::FromStr for LagDirective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let inner = s
            .strip_prefix("lag(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::Config(format!("expected `lag(name, L)`, got `{s}`")))?;
        let (name, lag) = inner
            .split_once(',')
            .ok_or_else(|| Error::Config(format!("expected `lag(name, L)`, got `{s}`")))?;
        let lag = lag
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("lag in `{s}` must be a non-negative integer")))?;
        Ok(Self {
            column: name.trim().to_string(),
            lag,
        })
    }
}

impl TimeSeriesFrame {
    pub fn new(response: impl Into<String>, columns: IndexMap<String, Vec<f64>>) -> Result<Self> {
        let response = response.into();
        let len = columns
            .get(&response)
            .ok_or_else(|| Error::Schema {
                missing: vec![response.clone()],
            })?
            .len();
        for (name, col) in &columns {
            if col.len() != len {
                return Err(Error::InvalidArgument(format!(
                    "column `{name}` has {} rows, expected {len}",
                    col.len()
                )));
            }
            if let Some(t) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "column `{name}` has a missing or non-finite value at row {t}"
                )));
            }
        }
        Ok(Self {
            response,
            columns,
            labels: None,
        })
    }

    pub fn with_labels(mut self, name: impl Into<String>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::InvalidArgument("label column length mismatch".into()));
        }
        self.labels = Some((name.into(), labels));
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.columns[&self.response].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn response_name(&self) -> &str {
        &self.response
    }

    pub fn response(&self) -> &[f64] {
        &self.columns[&self.response]
    }

    pub fn labels(&self) -> Option<(&str, &[String])> {
        self.labels.as_ref().map(|(n, l)| (n.as_str(), l.as_slice()))
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(|s| s.as_str())
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .get(name)
            .map(|c| c.as_slice())
            .ok_or_else(|| Error::Schema {
                missing: vec![name.to_string()],
            })
    }

    /// Fails with every missing name listed at once.
    pub fn require_columns<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let mut missing: Vec<String> = names
            .into_iter()
            .filter(|n| !self.columns.contains_key(*n))
            .map(String::from)
            .collect();
        missing.sort();
        missing.dedup();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Schema { missing })
        }
    }

    pub fn covariate_row(&self, t: usize) -> CovariateRow {
        self.columns
            .iter()
            .filter(|(name, _)| **name != self.response)
            .map(|(name, col)| (name.clone(), col[t]))
            .collect()
    }

    /// Applies lag directives and drops the first `max L` rows.
    pub fn apply_lags(&self, lags: &[LagDirective]) -> Result<Self> {
        let max_lag = lags.iter().map(|l| l.lag).max().unwrap_or(0);
        if lags.is_empty() {
            return Ok(self.clone());
        }
        if max_lag >= self.len() {
            return Err(Error::Config(format!(
                "lag {max_lag} leaves no rows in a series of length {}",
                self.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for l in lags {
            if !seen.insert(&l.column) {
                return Err(Error::Config(format!("column `{}` is lagged twice", l.column)));
            }
            if !self.columns.contains_key(&l.column) {
                return Err(Error::Schema {
                    missing: vec![l.column.clone()],
                });
            }
        }
        let n = self.len();
        let columns = self
            .columns
            .iter()
            .map(|(name, col)| {
                let lag = lags.iter().find(|l| &l.column == name).map_or(0, |l| l.lag);
                let shifted: Vec<f64> = (max_lag..n).map(|t| col[t - lag]).collect();
                (name.clone(), shifted)
            })
            .collect();
        let labels = self
            .labels
            .as_ref()
            .map(|(name, l)| (name.clone(), l[max_lag..].to_vec()));
        Ok(Self {
            response: self.response.clone(),
            columns,
            labels,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = Vec::new();
        if let Some((name, _)) = &self.labels {
            header.push(name);
        }
        header.extend(self.columns.keys().map(|s| s.as_str()));
        w.write_record(&header)?;
        for t in 0..self.len() {
            let mut record: Vec<String> = Vec::with_capacity(header.len());
            if let Some((_, l)) = &self.labels {
                record.push(l[t].clone());
            }
            record.extend(self.columns.values().map(|c| c[t].to_string()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a CSV with a header row. Every column except `label` must be numeric.
pub fn load_frame(
    path: &Path,
    response: &str,
    lags: &[LagDirective],
    label: Option<&str>,
) -> Result<TimeSeriesFrame> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let display = path.display().to_string();
    let mut columns: IndexMap<String, Vec<f64>> = IndexMap::new();
    let mut labels = Vec::new();
    for name in &headers {
        if Some(name.as_str()) != label {
            columns.insert(name.clone(), Vec::new());
        }
    }
    if let Some(l) = label {
        if !headers.iter().any(|h| h == l) {
            return Err(Error::Schema {
                missing: vec![l.to_string()],
            });
        }
    }
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (name, cell) in headers.iter().zip(record.iter()) {
            if Some(name.as_str()) == label {
                labels.push(cell.to_string());
                continue;
            }
            let value = cell.trim().parse::<f64>().map_err(|e| Error::Parse {
                path: display.clone(),
                row: row + 2,
                column: name.clone(),
                message: format!("`{cell}`: {e}"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    path: display.clone(),
                    row: row + 2,
                    column: name.clone(),
                    message: format!("non-finite value `{cell}`"),
                });
            }
            columns[name].push(value);
        }
    }
    let mut frame = TimeSeriesFrame::new(response, columns)?;
    if let Some(l) = label {
        frame = frame.with_labels(l, labels)?;
    }
    frame.apply_lags(lags)
}
