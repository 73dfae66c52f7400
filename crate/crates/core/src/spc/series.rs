use serde::{Deserialize, Serialize};

use super::SpcError;
use crate::fem::SpectraTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    #[default]
    Reference,
    Monitoring,
}

/// Time-ordered spectra, one row per part.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectraSeries {
    rows: Vec<Vec<f64>>,
    part_ids: Vec<String>,
    phase: Phase,
}

impl SpectraSeries {
    pub fn new(rows: Vec<Vec<f64>>, part_ids: Vec<String>, phase: Phase) -> Result<Self, SpcError> {
        if rows.is_empty() {
            return Err(SpcError::Empty);
        }
        let p = rows[0].len();
        if p == 0 {
            return Err(SpcError::Empty);
        }
        if let Some(t) = rows.iter().position(|r| r.len() != p) {
            return Err(SpcError::RaggedRow { row: t + 1, len: rows[t].len(), expected: p });
        }
        if part_ids.len() != rows.len() {
            return Err(SpcError::LabelCount { labels: part_ids.len(), rows: rows.len() });
        }
        if let Some(t) = rows.iter().position(|r| r.iter().any(|x| !x.is_finite())) {
            return Err(SpcError::NonFinite { row: t + 1 });
        }
        Ok(Self { rows, part_ids, phase })
    }

    /// Rows labelled `t1`, `t2`, ...
    pub fn unlabeled(rows: Vec<Vec<f64>>, phase: Phase) -> Result<Self, SpcError> {
        let ids = (1..=rows.len()).map(|t| format!("t{t}")).collect();
        Self::new(rows, ids, phase)
    }

    pub fn from_table(table: &SpectraTable, phase: Phase) -> Result<Self, SpcError> {
        Self::new(table.rows.clone(), table.part_ids.clone(), phase)
    }

    /// Number of observations.
    pub fn m(&self) -> usize {
        self.rows.len()
    }

    /// Number of variables.
    pub fn p(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn part_ids(&self) -> &[String] {
        &self.part_ids
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Keeps only the first `p` variables.
    pub fn truncated(&self, p: usize) -> Result<Self, SpcError> {
        Self::new(self.rows.iter().map(|r| r[..p.min(r.len())].to_vec()).collect(), self.part_ids.clone(), self.phase)
    }

    /// Rows `start..end` (0-based, half-open) as a new series.
    pub fn slice(&self, start: usize, end: usize, phase: Phase) -> Result<Self, SpcError> {
        Self::new(self.rows[start..end].to_vec(), self.part_ids[start..end].to_vec(), phase)
    }

    /// Applies `f(j, x)` to every entry of variable `j`.
    pub fn map(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        let rows = self.rows.iter().map(|r| r.iter().enumerate().map(|(j, &x)| f(j, x)).collect()).collect();
        Self { rows, part_ids: self.part_ids.clone(), phase: self.phase }
    }
}
