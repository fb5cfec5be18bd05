//! Structured pass/fail reports emitted by the diagnostic operations.

use serde::{Deserialize, Serialize};

/// Outcome of a single named check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Warn,
    /// Informational value with no threshold attached.
    Info,
}

/// One row of a diagnostic report: `{name, value, threshold, verdict}`.
/// Informational rows carry no threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub verdict: Verdict,
    /// Optional free-form context (fitted exponents, locations, ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckItem {
    pub fn new(
        name: impl Into<String>,
        value: f64,
        threshold: Option<f64>,
        verdict: Verdict,
    ) -> Self {
        CheckItem {
            name: name.into(),
            value,
            threshold,
            verdict,
            note: None,
        }
    }

    /// Pass/fail against `value <= threshold`.
    pub fn le(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        let verdict = if value <= threshold {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        CheckItem::new(name, value, Some(threshold), verdict)
    }

    pub fn info(name: impl Into<String>, value: f64) -> Self {
        CheckItem::new(name, value, None, Verdict::Info)
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        matches!(self.verdict, Verdict::Pass | Verdict::Info)
    }
}

/// A collection of checks produced by one diagnostic run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Report {
    pub items: Vec<CheckItem>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn push(&mut self, item: CheckItem) {
        self.items.push(item);
    }

    pub fn get(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.name == name)
    }

    /// True when no item carries a `Fail` verdict.
    pub fn all_passed(&self) -> bool {
        self.items.iter().all(|i| i.verdict != Verdict::Fail)
    }

    /// Fixed-width text table for terminal output.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let name_w = self
            .items
            .iter()
            .map(|i| i.name.len())
            .max()
            .unwrap_or(4)
            .max(4);
        out.push_str(&format!(
            "{:<name_w$}  {:>14}  {:>14}  {:<7}  note\n",
            "name", "value", "threshold", "verdict"
        ));
        for item in &self.items {
            let verdict = match item.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "FAIL",
                Verdict::Warn => "warn",
                Verdict::Info => "info",
            };
            let thr = match item.threshold {
                None => "-".to_string(),
                Some(t) => format!("{t:.6e}"),
            };
            out.push_str(&format!(
                "{:<name_w$}  {:>14.6e}  {:>14}  {:<7}  {}\n",
                item.name,
                item.value,
                thr,
                verdict,
                item.note.as_deref().unwrap_or("")
            ));
        }
        out
    }
}
