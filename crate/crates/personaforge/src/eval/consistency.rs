//! Multi-turn personality consistency.
//!
//! Five interview rounds each yield one score per dimension; the metric is
//! the standard deviation of each dimension's five scores, averaged across
//! dimensions. Lower means steadier role-play. Population standard deviation
//! (divide by n) is the default; a flag switches to the sample estimator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Number of interview rounds the protocol prescribes.
pub const ROUNDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdMode {
    /// Divide squared deviations by n.
    Population,
    /// Divide squared deviations by n - 1.
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub scale_id: String,
    pub per_dimension_std: BTreeMap<String, f64>,
    pub average_std: f64,
    pub n_rounds: usize,
    pub mode: StdMode,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ConsistencyError {
    #[error("expected {expected} rounds, got {actual}")]
    RoundCountMismatch { expected: usize, actual: usize },
    #[error("round {round} has a different dimension key set")]
    KeySetMismatch { round: usize },
}

fn std_dev(values: &[f64], mode: StdMode) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sum_sq: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let divisor = match mode {
        StdMode::Population => n,
        StdMode::Sample => n - 1.0,
    };
    (sum_sq / divisor).sqrt()
}

/// Per-dimension standard deviation over exactly [`ROUNDS`] score maps, and
/// their arithmetic mean.
pub fn consistency(
    scale_id: &str,
    rounds: &[BTreeMap<String, f64>],
    mode: StdMode,
) -> Result<ConsistencyReport, ConsistencyError> {
    if rounds.len() != ROUNDS {
        return Err(ConsistencyError::RoundCountMismatch {
            expected: ROUNDS,
            actual: rounds.len(),
        });
    }
    let keys: Vec<&String> = rounds[0].keys().collect();
    for (i, round) in rounds.iter().enumerate().skip(1) {
        if round.keys().collect::<Vec<_>>() != keys {
            return Err(ConsistencyError::KeySetMismatch { round: i });
        }
    }

    let mut per_dimension_std = BTreeMap::new();
    for key in keys {
        let values: Vec<f64> = rounds.iter().map(|r| r[key]).collect();
        per_dimension_std.insert(key.clone(), std_dev(&values, mode));
    }
    let average_std = if per_dimension_std.is_empty() {
        0.0
    } else {
        per_dimension_std.values().sum::<f64>() / per_dimension_std.len() as f64
    };
    Ok(ConsistencyReport {
        scale_id: scale_id.to_string(),
        per_dimension_std,
        average_std,
        n_rounds: ROUNDS,
        mode,
    })
}
