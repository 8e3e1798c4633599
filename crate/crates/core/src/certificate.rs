use serde::{Deserialize, Serialize};

/// Outcome of one inequality check `lhs <= rhs`.
///
/// `slack = rhs - lhs`, and the check passes when `slack >= -tolerance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub name: String,
    /// Time step the check refers to; `None` for global checks.
    pub step: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl CertificateReport {
    pub fn new(
        name: impl Into<String>,
        step: Option<usize>,
        lhs: f64,
        rhs: f64,
        tolerance: f64,
    ) -> Self {
        let slack = rhs - lhs;
        // NaN anywhere fails the check.
        let pass = slack >= -tolerance;
        Self {
            name: name.into(),
            step,
            lhs,
            rhs,
            slack,
            tolerance,
            pass,
            note: String::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    /// Slack measured in units of the tolerance band; negative below -1 means failure.
    pub fn normalized_slack(&self) -> f64 {
        if self.tolerance > 0.0 {
            self.slack / self.tolerance
        } else {
            self.slack
        }
    }
}

pub fn all_pass(reports: &[CertificateReport]) -> bool {
    reports.iter().all(|r| r.pass)
}

/// The report with the smallest normalized slack.
pub fn worst(reports: &[CertificateReport]) -> Option<&CertificateReport> {
    reports.iter().min_by(|a, b| {
        let (x, y) = (a.normalized_slack(), b.normalized_slack());
        x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal)
    })
}
