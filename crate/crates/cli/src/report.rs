//! Human-readable estimate tables.

use crate::config::Units;
use std::fmt::Write as _;
use strata::estimate::EstimateReport;

/// `100 · part / whole` with two decimals, ties to even.
pub fn format_percent(part: f64, whole: f64) -> String {
    let pct = if whole == 0.0 {
        0.0
    } else {
        100.0 * part / whole
    };
    let hundredths = (pct * 100.0).round_ties_even();
    format!("{:.2}%", hundredths / 100.0 + 0.0)
}

fn quantity(v: f64, units: Units) -> String {
    match units {
        Units::None => format!("{v:.6}"),
        Units::M2 => format!("{:.2} ha", v / 10_000.0),
    }
}

pub fn format_report(r: &EstimateReport, units: Units) -> String {
    let mut out = String::new();
    let mut row = |k: &str, v: String| {
        let _ = writeln!(out, "{k:<24}{v}");
    };
    row("scheme", r.scheme.to_string());
    row("sites", r.n.to_string());
    row("estimate", quantity(r.estimate, units));
    row("region area", quantity(r.region_area, units));
    row(
        "percent of region",
        format_percent(r.estimate, r.region_area),
    );
    if let Some(se) = r.std_error {
        row("standard error", quantity(se, units));
    }
    if let Some(ci) = r.ci {
        row(
            &format!("{}% interval", ci.level * 100.0),
            format!(
                "[{}, {}]",
                quantity(ci.lower, units),
                quantity(ci.upper, units)
            ),
        );
    }
    for (k, v) in &r.variance_estimates {
        let shown = match units {
            Units::None => format!("{v:.6e}"),
            Units::M2 => format!("{:.6e} ha²", v / 1e8),
        };
        let used = if r.variance_used.as_deref() == Some(k.as_str()) {
            " *"
        } else {
            ""
        };
        row(&format!("variance ({k})"), format!("{shown}{used}"));
    }
    for w in &r.warnings {
        row("warning", w.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_examples() {
        assert_eq!(format_percent(660.0, 1045.0), "63.16%");
        assert_eq!(format_percent(0.0, 3.0), "0.00%");
        assert_eq!(format_percent(7.5, 7.5), "100.00%");
    }

    #[test]
    fn percent_ties_go_to_even() {
        // 0.125 and 0.375 are exact in binary, so these are true ties.
        assert_eq!(format_percent(0.125, 100.0), "0.12%");
        assert_eq!(format_percent(0.375, 100.0), "0.38%");
    }
}
