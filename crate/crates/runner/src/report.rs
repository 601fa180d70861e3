//! JSON report shapes and threshold checks.

use serde::Serialize;
use serde_json::Value;

/// One threshold comparison.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: Value,
    pub expected: String,
    pub pass: bool,
}

impl Check {
    pub fn close(name: impl Into<String>, value: f64, want: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value: value.into(),
            expected: format!("{want} +- {tol:e}"),
            pass: (value - want).abs() <= tol,
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            value: value.into(),
            expected: format!("<= {max}"),
            pass: value <= max,
        }
    }

    pub fn below(name: impl Into<String>, value: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            value: value.into(),
            expected: format!("< {max}"),
            pass: value < max,
        }
    }

    pub fn count_at_least(name: impl Into<String>, value: usize, min: usize) -> Self {
        Self {
            name: name.into(),
            value: value.into(),
            expected: format!(">= {min}"),
            pass: value >= min,
        }
    }

    pub fn count_at_most(name: impl Into<String>, value: usize, max: usize) -> Self {
        Self {
            name: name.into(),
            value: value.into(),
            expected: format!("<= {max}"),
            pass: value <= max,
        }
    }

    pub fn equals<T: Serialize + PartialEq + std::fmt::Debug>(
        name: impl Into<String>,
        value: T,
        want: T,
    ) -> Self {
        Self {
            name: name.into(),
            expected: format!("{want:?}"),
            pass: value == want,
            value: serde_json::to_value(&value).unwrap_or(Value::Null),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub scenario: String,
    pub experiment: String,
    pub kind: String,
    pub paper_claim: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub files: Vec<String>,
    pub result: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentSummary {
    pub experiment: String,
    pub kind: String,
    pub paper_claim: String,
    pub pass: bool,
    pub failed_checks: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub description: String,
    pub paper_claim: String,
    pub seed: u64,
    pub pass: bool,
    pub experiments: Vec<ExperimentSummary>,
}
