//! Residual reports shared by the verification suites.

use serde::Serialize;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(skip)]
    fixed: bool,
}

impl Check {
    /// Passes when the residual is at most the tolerance.
    pub fn at_most(name: impl Into<String>, max_residual: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            max_residual,
            tolerance,
            pass: max_residual.is_finite() && max_residual <= tolerance,
            detail: None,
            fixed: false,
        }
    }

    /// Passes when the value is strictly above the threshold.
    pub fn above(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), max_residual: value, tolerance: threshold, pass: value > threshold, detail: None, fixed: true }
    }

    /// Integer bound such as a rank; unaffected by tolerance overrides.
    pub fn count(name: impl Into<String>, value: usize, bound: usize) -> Self {
        Check { name: name.into(), max_residual: value as f64, tolerance: bound as f64, pass: value <= bound, detail: None, fixed: true }
    }

    pub fn failed(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Check { name: name.into(), max_residual: f64::INFINITY, tolerance: 0.0, pass: false, detail: Some(detail.into()), fixed: false }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    /// Re-evaluates the verdict against another tolerance.
    pub fn retolerance(mut self, tolerance: f64) -> Self {
        if !self.fixed && self.max_residual.is_finite() {
            self.tolerance = tolerance;
            self.pass = self.max_residual.is_finite() && self.max_residual <= tolerance;
        }
        self
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
    /// Why the suite does not apply to this graph, when it was skipped.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

impl SuiteReport {
    pub fn new(suite: impl Into<String>, checks: Vec<Check>) -> Self {
        SuiteReport { suite: suite.into(), checks, skipped: None }
    }

    pub fn skipped(suite: impl Into<String>, reason: impl Into<String>) -> Self {
        SuiteReport { suite: suite.into(), checks: Vec::new(), skipped: Some(reason.into()) }
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}
