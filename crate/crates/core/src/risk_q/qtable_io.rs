use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::operators::{EntropicParams, QTable};
use super::RiskError;
use crate::json17;

/// On-disk QTable: grid shape and risk parameters, then the values flattened
/// in `(row, col, action)` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QTableFile {
    pub m: usize,
    pub n: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub values: Vec<f64>,
}

impl QTableFile {
    pub fn new(q: &QTable, m: usize, n: usize, p: EntropicParams) -> Result<Self, RiskError> {
        if m * n != q.n_states() {
            return Err(RiskError::ShapeMismatch);
        }
        Ok(QTableFile {
            m,
            n,
            alpha: p.alpha,
            gamma: p.gamma,
            values: q.values().to_vec(),
        })
    }

    pub fn to_qtable(&self) -> Result<QTable, RiskError> {
        QTable::from_values(self.m * self.n, self.values.clone())
    }

    pub fn to_json(&self) -> Result<String, RiskError> {
        json17::to_string_pretty(self).map_err(|e| RiskError::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, RiskError> {
        let file: QTableFile =
            serde_json::from_str(text).map_err(|e| RiskError::Format(e.to_string()))?;
        file.to_qtable()?;
        Ok(file)
    }
}

pub fn write_qtable(path: &Path, file: &QTableFile) -> Result<(), RiskError> {
    fs::write(path, file.to_json()?).map_err(|e| RiskError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn read_qtable(path: &Path) -> Result<QTableFile, RiskError> {
    let text = fs::read_to_string(path).map_err(|e| RiskError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    QTableFile::from_json(&text)
}
