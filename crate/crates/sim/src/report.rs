//! CSV output and the expected-vs-simulated comparison table.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::SimError;
use crate::harness::{expected_false_rate, Report};

pub const CSV_HEADER: &str =
    "prior,n,runs,false_accept_rate,expected_false,dispute_rate,gas_mean,gas_std,slashes";

/// Widest deviation, in percentage points, tolerated between simulated and
/// expected false-acceptance rates.
pub const MAX_DEVIATION_PP: f64 = 3.1;

pub const REFERENCE_PRIORS: [f64; 3] = [0.3, 0.5, 0.7];
pub const REFERENCE_VERIFIERS: [usize; 6] = [1, 2, 3, 4, 5, 6];

pub fn to_csv(report: &Report) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in &report.cells {
        let _ = writeln!(
            out,
            "{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{}",
            c.prior,
            c.n,
            c.runs,
            c.false_accept_rate,
            c.expected_false,
            c.dispute_rate,
            c.gas_mean,
            c.gas_std,
            c.slashes
        );
    }
    out
}

pub fn emit_csv(report: &Report, path: &Path) -> Result<(), SimError> {
    std::fs::write(path, to_csv(report))
        .map_err(|e| SimError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Shortest decimal rendering of a percentage, with at least one fractional
/// digit (`9.0`, `0.02187`, `8.23543`).
pub fn format_percent(value: f64) -> String {
    let mut s = format!("{value:.10}");
    while s.ends_with('0') && !s.ends_with(".0") {
        s.pop();
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub prior: f64,
    pub n: usize,
    pub expected_pct: f64,
    pub actual_pct: f64,
    pub ci_low_pct: f64,
    pub ci_high_pct: f64,
    /// The expected rate lies inside the observed 95% interval.
    pub within_ci: bool,
    /// The observed rate is within `MAX_DEVIATION_PP` of the expected one.
    pub within_band: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn outside_ci(&self) -> usize {
        self.rows.iter().filter(|r| !r.within_ci).count()
    }

    pub fn outside_band(&self) -> usize {
        self.rows.iter().filter(|r| !r.within_band).count()
    }

    /// Every cell inside its interval and at most one outside the band.
    pub fn passes(&self) -> bool {
        self.outside_ci() == 0 && self.outside_band() <= 1
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>5} {:>3} {:>14} {:>10} {:>19}  flags",
            "prior", "n", "expected[%]", "actual[%]", "95% CI [%]"
        );
        for r in &self.rows {
            let mut flags = Vec::new();
            if !r.within_ci {
                flags.push("outside-ci");
            }
            if !r.within_band {
                flags.push("beyond-3.1pp");
            }
            let _ = writeln!(
                out,
                "{:>5} {:>3} {:>14} {:>10.1} {:>8.2} - {:>8.2}  {}",
                r.prior,
                r.n,
                format_percent(r.expected_pct),
                r.actual_pct,
                r.ci_low_pct,
                r.ci_high_pct,
                if flags.is_empty() {
                    "ok".to_string()
                } else {
                    flags.join(",")
                }
            );
        }
        let _ = writeln!(
            out,
            "cells outside 95% CI: {}   beyond ±{MAX_DEVIATION_PP}pp: {}   => {}",
            self.outside_ci(),
            self.outside_band(),
            if self.passes() { "PASS" } else { "FAIL" }
        );
        out
    }
}

/// Side-by-side expected `p^(n+1)` and simulated false-acceptance rates for
/// the reference grid of priors {0.3, 0.5, 0.7} and 1..=6 verifiers.
pub fn compare_to_reference(report: &Report) -> Result<ComparisonTable, SimError> {
    let missing: Vec<(f64, usize)> = REFERENCE_PRIORS
        .iter()
        .flat_map(|&p| REFERENCE_VERIFIERS.iter().map(move |&n| (p, n)))
        .filter(|&(p, n)| report.cell(p, n).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(SimError::MissingCells(missing));
    }
    let rows = REFERENCE_PRIORS
        .iter()
        .flat_map(|&p| REFERENCE_VERIFIERS.iter().map(move |&n| (p, n)))
        .filter_map(|(p, n)| report.cell(p, n))
        .map(|c| {
            let expected = expected_false_rate(c.prior, c.n);
            ComparisonRow {
                prior: c.prior,
                n: c.n,
                expected_pct: expected * 100.0,
                actual_pct: c.false_accept_rate * 100.0,
                ci_low_pct: c.ci_low * 100.0,
                ci_high_pct: c.ci_high * 100.0,
                within_ci: c.ci_low <= expected && expected <= c.ci_high,
                within_band: ((c.false_accept_rate - expected) * 100.0).abs() <= MAX_DEVIATION_PP,
            }
        })
        .collect();
    Ok(ComparisonTable { rows })
}

/// Gas summary per prior: mean/std per verifier count and the linear fit.
pub fn render_gas(report: &Report) -> String {
    let mut out = String::new();
    for fit in &report.fits {
        let _ = writeln!(
            out,
            "prior {}: gas ≈ {:.2}·n + {:.2}  (R² = {:.4}, increasing: {})",
            fit.prior, fit.fit.slope, fit.fit.intercept, fit.fit.r_squared, fit.strictly_increasing
        );
        for c in report.cells.iter().filter(|c| c.prior == fit.prior) {
            let _ = writeln!(
                out,
                "  n={}  mean {:>9.2}  std {:>8.2}  dispute {:.3}",
                c.n, c.gas_mean, c.gas_std, c.dispute_rate
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{aggregate, GasFit, RunRecord};
    use crate::stats::LinearFit;
    use vericomp_core::Case;

    fn report_with(cells: &[(f64, usize, usize)]) -> Report {
        let cells = cells
            .iter()
            .map(|&(p, n, false_accepts)| {
                let records: Vec<RunRecord> = (0..1000)
                    .map(|i| RunRecord {
                        case: if i < false_accepts {
                            Case::FalseAccepted
                        } else {
                            Case::CorrectAccepted
                        },
                        gas: 100 + i as u64 % 7,
                        slashes: 0,
                        disputed: false,
                    })
                    .collect();
                aggregate(p, n, &records)
            })
            .collect();
        Report {
            cells,
            fits: vec![GasFit {
                prior: 0.5,
                fit: LinearFit {
                    slope: 1.0,
                    intercept: 0.0,
                    r_squared: 1.0,
                },
                strictly_increasing: true,
            }],
        }
    }

    #[test]
    fn csv_layout() {
        let r = report_with(&[(0.5, 1, 250), (0.5, 2, 125)]);
        let csv = to_csv(&r);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(
            lines[1].starts_with("0.5,1,1000,0.2500,0.2500,0.0000,"),
            "{}",
            lines[1]
        );
        assert_eq!(csv, to_csv(&r));
    }

    #[test]
    fn percent_formatting() {
        assert_eq!(format_percent(9.0), "9.0");
        assert_eq!(format_percent(0.3f64.powi(7) * 100.0), "0.02187");
        assert_eq!(format_percent(0.7f64.powi(7) * 100.0), "8.23543");
        assert_eq!(format_percent(0.5f64.powi(6) * 100.0), "1.5625");
    }

    #[test]
    fn missing_cells_listed() {
        let r = report_with(&[(0.5, 1, 250)]);
        match compare_to_reference(&r) {
            Err(SimError::MissingCells(m)) => assert_eq!(m.len(), 17),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn comparison_flags() {
        let mut cells = Vec::new();
        for p in REFERENCE_PRIORS {
            for n in REFERENCE_VERIFIERS {
                let k = (expected_false_rate(p, n) * 1000.0).round() as usize;
                cells.push((p, n, k));
            }
        }
        let table = compare_to_reference(&report_with(&cells)).unwrap();
        assert!(table.passes(), "{}", table.render());
        cells[0].2 = 200; // 20% against 9% expected
        let table = compare_to_reference(&report_with(&cells)).unwrap();
        assert!(!table.rows[0].within_ci && !table.rows[0].within_band);
        assert!(!table.passes());
    }
}
