//! Report-to-baseline comparison.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::table::{Cell, Table};
use super::MetricsReport;

#[derive(Debug, Error, PartialEq)]
pub enum CompareError {
    #[error("scenario mismatch: report `{report}` vs baseline `{baseline}`")]
    Scenario { report: String, baseline: String },
    #[error("table `{0}` missing from report")]
    MissingTable(String),
    #[error("table `{table}`: columns differ ({report:?} vs {baseline:?})")]
    Columns {
        table: String,
        report: Vec<String>,
        baseline: Vec<String>,
    },
    #[error("table `{table}`: row {key} missing from report")]
    MissingRow { table: String, key: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDiff {
    pub key: String,
    pub column: String,
    pub report: f64,
    pub baseline: f64,
    pub allowed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDiff {
    pub table: String,
    pub cells: usize,
    pub max_abs: f64,
    pub max_rel: f64,
    /// Cells outside tolerance.
    pub failures: Vec<CellDiff>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: String,
    pub tables: Vec<TableDiff>,
}

impl Comparison {
    pub fn passed(&self) -> bool {
        self.tables.iter().all(|t| t.failures.is_empty())
    }

    pub fn render(&self) -> String {
        let mut s = format!("comparison for `{}`\n", self.scenario);
        for t in &self.tables {
            s.push_str(&format!(
                "  {:<24} cells {:>7}  max |d| {:.3e}  max rel {:.3e}  {}\n",
                t.table,
                t.cells,
                t.max_abs,
                t.max_rel,
                if t.failures.is_empty() { "ok" } else { "FAIL" }
            ));
            for f in t.failures.iter().take(10) {
                s.push_str(&format!(
                    "    {} / {}: {} vs baseline {} (allowed {:.3e})\n",
                    f.key, f.column, f.report, f.baseline, f.allowed
                ));
            }
        }
        s
    }
}

fn row_key(t: &Table, row: &[Cell]) -> String {
    row[..t.key_columns]
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join("|")
}

fn diff_table(report: &Table, baseline: &Table) -> Result<TableDiff, CompareError> {
    if report.columns != baseline.columns {
        return Err(CompareError::Columns {
            table: baseline.name.clone(),
            report: report.columns.clone(),
            baseline: baseline.columns.clone(),
        });
    }
    let tol = baseline.tolerance;
    let index: HashMap<String, &Vec<Cell>> = report.rows.iter().map(|r| (row_key(report, r), r)).collect();
    let se_col = |name: &str| baseline.column(&format!("{name}_se"));
    let mut out = TableDiff {
        table: baseline.name.clone(),
        cells: 0,
        max_abs: 0.0,
        max_rel: 0.0,
        failures: Vec::new(),
    };
    for brow in &baseline.rows {
        let key = row_key(baseline, brow);
        let rrow = index.get(&key).ok_or_else(|| CompareError::MissingRow {
            table: baseline.name.clone(),
            key: key.clone(),
        })?;
        for (c, name) in baseline.columns.iter().enumerate().skip(baseline.key_columns) {
            if name.ends_with("_se") || baseline.info_columns.contains(name) {
                continue;
            }
            let (Some(b), Some(r)) = (brow[c].as_f64(), rrow[c].as_f64()) else {
                if brow[c] != rrow[c] {
                    out.failures.push(CellDiff {
                        key: key.clone(),
                        column: name.clone(),
                        report: f64::NAN,
                        baseline: f64::NAN,
                        allowed: 0.0,
                    });
                }
                continue;
            };
            out.cells += 1;
            let d = (r - b).abs();
            let rel = if b != 0.0 {
                d / b.abs()
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            out.max_abs = out.max_abs.max(d);
            out.max_rel = out.max_rel.max(rel);
            let stat = match (tol.sigma, se_col(name)) {
                (Some(k), Some(sc)) => {
                    // A missing spread means too few seeds to bound the difference.
                    let (sb, sr) = (
                        brow[sc].as_f64().unwrap_or(f64::INFINITY),
                        rrow[sc].as_f64().unwrap_or(f64::INFINITY),
                    );
                    Some(k * (sb * sb + sr * sr).sqrt())
                }
                _ => None,
            };
            let abs_allowed = stat.or(tol.abs).unwrap_or(0.0);
            let rel_allowed = tol.rel.map(|x| x * b.abs()).unwrap_or(0.0);
            let allowed = abs_allowed.max(rel_allowed);
            let ok = d <= allowed || (r.is_nan() && b.is_nan());
            if !ok {
                out.failures.push(CellDiff {
                    key: key.clone(),
                    column: name.clone(),
                    report: r,
                    baseline: b,
                    allowed,
                });
            }
        }
    }
    Ok(out)
}

/// Per-table deviations of `report` from `baseline`, judged against the
/// baseline's declared tolerances. Tables stored without rows are skipped.
pub fn compare_report(report: &MetricsReport, baseline: &MetricsReport) -> Result<Comparison, CompareError> {
    if report.scenario != baseline.scenario {
        return Err(CompareError::Scenario {
            report: report.scenario.clone(),
            baseline: baseline.scenario.clone(),
        });
    }
    let mut tables = Vec::new();
    for bt in baseline.tables.iter().filter(|t| t.in_report) {
        let rt = report
            .table(&bt.name)
            .ok_or_else(|| CompareError::MissingTable(bt.name.clone()))?;
        tables.push(diff_table(rt, bt)?);
    }
    Ok(Comparison {
        scenario: baseline.scenario.clone(),
        tables,
    })
}

#[cfg(test)]
mod tests {
    use super::super::table::Tolerance;
    use super::super::Fingerprint;
    use super::*;

    fn report(values: &[f64], tol: Tolerance) -> MetricsReport {
        let mut t = Table::new("loss", "Fig. 5", &["depth_m", "total_db"], 1);
        t.tolerance = tol;
        for (i, v) in values.iter().enumerate() {
            t.push(vec![(i as f64 * 1e-4).into(), (*v).into()]);
        }
        MetricsReport {
            scenario: "fig5".into(),
            figure: "Fig. 5".into(),
            analysis: "path_loss".into(),
            fingerprint: Fingerprint {
                config_hash: "x".into(),
                seeds: vec![0],
                version: "0".into(),
            },
            tables: vec![t],
            checks: vec![],
            notes: vec![],
        }
    }

    #[test]
    fn self_comparison_is_clean() {
        let r = report(&[1.0, 2.0, 3.0], Tolerance::exact());
        let c = compare_report(&r, &r).unwrap();
        assert!(c.passed());
        assert_eq!(c.tables[0].max_abs, 0.0);
    }

    #[test]
    fn perturbed_cell_is_named() {
        let tol = Tolerance {
            abs: Some(0.01),
            ..Tolerance::default()
        };
        let base = report(&[10.0, 20.0, 30.0], tol);
        let perturbed = report(&[10.0, 20.1, 30.0], tol);
        let c = compare_report(&perturbed, &base).unwrap();
        assert!(!c.passed());
        let f = &c.tables[0].failures;
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].key, "0.0001");
        assert_eq!(f[0].column, "total_db");
    }

    #[test]
    fn schema_mismatch_is_structured() {
        let a = report(&[1.0], Tolerance::exact());
        let mut b = a.clone();
        b.scenario = "fig6".into();
        assert!(matches!(compare_report(&a, &b), Err(CompareError::Scenario { .. })));
        let mut c = a.clone();
        c.tables[0].columns[1] = "other".into();
        assert!(matches!(compare_report(&a, &c), Err(CompareError::Columns { .. })));
        let mut d = a.clone();
        d.tables.clear();
        assert_eq!(compare_report(&d, &a), Err(CompareError::MissingTable("loss".into())));
    }

    #[test]
    fn statistical_columns_use_standard_errors() {
        let mut t = Table::new("error_bins", "Fig. 9", &["bin", "mean", "mean_se"], 1);
        t.tolerance = Tolerance {
            sigma: Some(3.0),
            ..Tolerance::default()
        };
        t.push(vec![0.0.into(), 1.0.into(), 0.1.into()]);
        let mut base = report(&[], Tolerance::exact());
        base.tables = vec![t.clone()];
        let mut near = base.clone();
        near.tables[0].rows[0][1] = 1.3.into();
        assert!(compare_report(&near, &base).unwrap().passed());
        let mut far = base.clone();
        far.tables[0].rows[0][1] = 1.5.into();
        assert!(!compare_report(&far, &base).unwrap().passed());
        far.tables[0].rows[0][2] = Cell::Missing;
        assert!(compare_report(&far, &base).unwrap().passed());
    }
}
