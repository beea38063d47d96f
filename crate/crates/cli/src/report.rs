//! Experiment reports and their JSON, CSV and Markdown renderings.
//!
//! Floating-point values are printed with 17 significant digits in
//! scientific notation so that identical runs produce identical bytes;
//! non-finite values become `null` (JSON) or `NaN`/`inf` (CSV, Markdown).

use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;
use serde_json::value::RawValue;

use crate::config::ExperimentConfig;
use crate::CliError;

/// One checked identity: `pass` is decided by the experiment, usually as
/// `|lhs − rhs| ≤ tol`.
#[derive(Clone, Debug, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub paper_ref: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Assertion {
    pub fn close(
        name: impl Into<String>,
        paper_ref: impl Into<String>,
        lhs: f64,
        rhs: f64,
        tol: f64,
    ) -> Self {
        let pass = (lhs - rhs).abs() <= tol;
        Self {
            name: name.into(),
            paper_ref: paper_ref.into(),
            lhs,
            rhs,
            tol,
            pass,
        }
    }

    /// `lhs ≤ tol`, for norms of residuals.
    pub fn small(
        name: impl Into<String>,
        paper_ref: impl Into<String>,
        lhs: f64,
        tol: f64,
    ) -> Self {
        let pass = lhs.abs() <= tol;
        Self {
            name: name.into(),
            paper_ref: paper_ref.into(),
            lhs,
            rhs: 0.0,
            tol,
            pass,
        }
    }

    pub fn with_pass(mut self, pass: bool) -> Self {
        self.pass = pass;
        self
    }
}

/// A table of numbers written alongside the report, e.g. values along a
/// time ladder.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub assertions: Vec<Assertion>,
    pub series: Vec<Series>,
    pub runtime_ms: u64,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        !self.assertions.is_empty() && self.assertions.iter().all(|a| a.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.pass)
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s =
            serde_json::to_string_pretty(self).map_err(|e| CliError::Output(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// Assertions as CSV with a header row.
    pub fn assertions_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(vec![]);
        let err = |e: csv::Error| CliError::Output(e.to_string());
        w.write_record(["name", "paper_ref", "lhs", "rhs", "tol", "pass"])
            .map_err(err)?;
        for a in &self.assertions {
            w.write_record([
                a.name.clone(),
                a.paper_ref.clone(),
                fmt_float(a.lhs),
                fmt_float(a.rhs),
                fmt_float(a.tol),
                a.pass.to_string(),
            ])
            .map_err(err)?;
        }
        finish_csv(w)
    }

    pub fn series_csv(series: &Series) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(vec![]);
        let err = |e: csv::Error| CliError::Output(e.to_string());
        w.write_record(&series.columns).map_err(err)?;
        for row in &series.rows {
            w.write_record(row.iter().map(|x| fmt_float(*x)))
                .map_err(err)?;
        }
        finish_csv(w)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("# {}\n\nseed: {}\n\n", self.experiment, self.seed);
        out.push_str("| name | reference | lhs | rhs | tol | pass |\n|---|---|---|---|---|---|\n");
        for a in &self.assertions {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} |\n",
                md_escape(&a.name),
                md_escape(&a.paper_ref),
                fmt_float(a.lhs),
                fmt_float(a.rhs),
                fmt_float(a.tol),
                if a.pass { "PASS" } else { "FAIL" }
            ));
        }
        let passed = self.assertions.iter().filter(|a| a.pass).count();
        out.push_str(&format!(
            "\n{passed}/{} assertions pass.\n",
            self.assertions.len()
        ));
        out
    }
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
}

fn md_escape(s: &str) -> String {
    s.replace('|', "\\|")
}

/// 17 significant digits, scientific notation.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

struct Float17(f64);

impl Serialize for Float17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            let raw =
                RawValue::from_string(fmt_float(self.0)).map_err(serde::ser::Error::custom)?;
            raw.serialize(s)
        } else {
            s.serialize_none()
        }
    }
}

impl Serialize for Assertion {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Assertion", 6)?;
        st.serialize_field("name", &self.name)?;
        st.serialize_field("paper_ref", &self.paper_ref)?;
        st.serialize_field("lhs", &Float17(self.lhs))?;
        st.serialize_field("rhs", &Float17(self.rhs))?;
        st.serialize_field("tol", &Float17(self.tol))?;
        st.serialize_field("pass", &self.pass)?;
        st.end()
    }
}

impl Serialize for Report {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Report", 6)?;
        st.serialize_field("experiment", &self.experiment)?;
        st.serialize_field("config", &self.config)?;
        st.serialize_field("seed", &self.seed)?;
        st.serialize_field("assertions", &self.assertions)?;
        st.serialize_field("runtime_ms", &self.runtime_ms)?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        Report {
            experiment: "eta".into(),
            config: ExperimentConfig::default(),
            seed: 3,
            assertions: vec![
                Assertion::close("a", "r", 0.1, 0.1 + 1e-17, 1e-12),
                Assertion::small("b, with comma", "r|s", f64::NAN, 1.0),
            ],
            series: vec![],
            runtime_ms: 0,
        }
    }

    #[test]
    fn json_has_schema_keys_and_fixed_precision() {
        let r = sample();
        let text = r.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for k in ["experiment", "config", "seed", "assertions", "runtime_ms"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(v["assertions"][1]["lhs"].is_null());
        assert_eq!(v["assertions"][1]["pass"], false);
    }

    #[test]
    fn csv_quotes_fields() {
        let csv = sample().assertions_csv().unwrap();
        assert!(csv.starts_with("name,paper_ref,lhs,rhs,tol,pass\n"));
        assert!(csv.contains("\"b, with comma\""));
    }

    #[test]
    fn nan_fails_closeness() {
        assert!(!Assertion::close("x", "r", f64::NAN, 0.0, 1.0).pass);
        assert!(!Assertion::small("x", "r", f64::NAN, 1.0).pass);
    }

    #[test]
    fn empty_report_does_not_pass() {
        let mut r = sample();
        r.assertions.clear();
        assert!(!r.all_pass());
    }
}
