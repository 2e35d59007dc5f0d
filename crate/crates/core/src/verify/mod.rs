//! Numerical checks of the construction's quantitative claims, emitted as
//! [`SpectralReport`]s.

mod fit;
mod gadget;
mod kitaev;
mod lemma;
mod twolocal;

pub use fit::{beta_hat_sweep, propagation_gap_fit, FitTable};
pub use gadget::{excited_suite, gadget_suite, SELF_ENERGY_TOL};
pub use kitaev::{kitaev5_suite, kitaev6_suite};
pub use lemma::check_projection_lemma;
pub use twolocal::{
    check_eigenvalue_bounds, check_fidelity_and_gap, check_orthogonal_energy, check_restricted_forms,
    suite_from, twolocal_suite, TwoLocalContext,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

/// Absolute tolerance for equalities backed by exact numerics.
pub const EXACT_TOL: f64 = 1e-9;
/// Relative tolerance for inequalities that scale with `Delta`.
pub const RELATIVE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportKind {
    /// A bound with a definite threshold; carries `pass`.
    Bound,
    /// A trend with an unspecified constant; carries a table, never a verdict.
    Fit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `measured >= claimed`.
    Lower,
    /// `measured <= claimed`.
    Upper,
    /// `|measured - claimed| <= tolerance`.
    Equal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Claimed {
    pub symbolic: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub check: String,
    pub anchor: String,
    pub kind: ReportKind,
    pub claimed: Claimed,
    pub measured: f64,
    /// `measured - claimed`.
    pub margin: f64,
    pub tolerance: f64,
    pub direction: Direction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitTable>,
    #[serde(default)]
    pub meta: BTreeMap<String, Value>,
}

fn verdict(direction: Direction, margin: f64, tolerance: f64) -> bool {
    match direction {
        Direction::Lower => margin >= -tolerance,
        Direction::Upper => margin <= tolerance,
        Direction::Equal => margin.abs() <= tolerance,
    }
}

impl SpectralReport {
    pub fn bound(
        check: &str,
        anchor: &str,
        direction: Direction,
        symbolic: &str,
        claimed: f64,
        measured: f64,
        tolerance: f64,
    ) -> Self {
        let margin = measured - claimed;
        SpectralReport {
            check: check.to_string(),
            anchor: anchor.to_string(),
            kind: ReportKind::Bound,
            claimed: Claimed {
                symbolic: symbolic.to_string(),
                value: claimed,
            },
            measured,
            margin,
            tolerance,
            direction,
            // NaN margins fail every direction
            pass: Some(verdict(direction, margin, tolerance)),
            fit: None,
            meta: BTreeMap::new(),
        }
    }

    pub fn fitted(check: &str, anchor: &str, symbolic: &str, table: FitTable) -> Self {
        let value = table.fitted;
        SpectralReport {
            check: check.to_string(),
            anchor: anchor.to_string(),
            kind: ReportKind::Fit,
            claimed: Claimed {
                symbolic: symbolic.to_string(),
                value,
            },
            measured: value,
            margin: 0.0,
            tolerance: 0.0,
            direction: Direction::Equal,
            pass: None,
            fit: Some(table),
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.meta.insert(key.to_string(), value.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.pass != Some(false)
    }
}

/// True iff any `bound` report failed.
pub fn suite_failed(reports: &[SpectralReport]) -> bool {
    reports.iter().any(|r| r.kind == ReportKind::Bound && r.pass == Some(false))
}

/// Sorts by check name so concurrent runners merge deterministically.
pub fn merge(mut reports: Vec<SpectralReport>) -> Vec<SpectralReport> {
    reports.sort_by(|a, b| a.check.cmp(&b.check));
    reports
}

#[derive(Serialize)]
struct CsvRow<'a> {
    check: &'a str,
    anchor: &'a str,
    kind: ReportKind,
    claimed_symbolic: &'a str,
    claimed: f64,
    measured: f64,
    margin: f64,
    tolerance: f64,
    direction: Direction,
    pass: Option<bool>,
}

/// One row per report; fit tables are exported separately by [`FitTable::to_csv`].
pub fn to_csv(reports: &[SpectralReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        w.serialize(CsvRow {
            check: &r.check,
            anchor: &r.anchor,
            kind: r.kind,
            claimed_symbolic: &r.claimed.symbolic,
            claimed: r.claimed.value,
            measured: r.measured,
            margin: r.margin,
            tolerance: r.tolerance,
            direction: r.direction,
            pass: r.pass,
        })
        .map_err(|e| crate::Error::invalid(e.to_string()))?;
    }
    csv_string(w)
}

pub(crate) fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| crate::Error::invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| crate::Error::invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts_follow_direction() {
        let lo = SpectralReport::bound("a", "x", Direction::Lower, "b", 1.0, 0.9999, 1e-3);
        assert_eq!(lo.pass, Some(true));
        assert!(lo.margin < 0.0);
        let up = SpectralReport::bound("a", "x", Direction::Upper, "b", 1.0, 1.1, 1e-3);
        assert_eq!(up.pass, Some(false));
        let eq = SpectralReport::bound("a", "x", Direction::Equal, "b", 1.0, f64::NAN, 1e-3);
        assert_eq!(eq.pass, Some(false));
        assert!(suite_failed(&[lo, up]));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let r = vec![
            SpectralReport::bound("z", "x", Direction::Lower, "b", 1.0, 2.0, 0.0),
            SpectralReport::bound("a", "x", Direction::Upper, "b", 1.0, 0.0, 0.0),
        ];
        let r = merge(r);
        assert_eq!(r[0].check, "a");
        let s = to_csv(&r).unwrap();
        assert_eq!(s.lines().count(), 3);
        assert!(s.starts_with("check,anchor,kind"));
    }

    #[test]
    fn json_round_trip() {
        let r = SpectralReport::bound("a", "x", Direction::Lower, "b", 0.1, 0.30000000000000004, 1e-9)
            .with_meta("Delta", 16.0);
        let s = serde_json::to_string(&r).unwrap();
        let back: SpectralReport = serde_json::from_str(&s).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
        assert!(!s.contains("\"fit\""));
    }
}
