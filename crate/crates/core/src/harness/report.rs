//! Percentile tables of the range-error distribution, grouped by estimator,
//! SNR and/or measurement count.

use std::collections::BTreeMap;

use crate::error::{Result, SimError};
use crate::estimators::percentile;

use super::TrialRecord;

/// Grouping dimensions for [`report_cdf`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupField {
    Estimator,
    Snr,
    M,
}

impl std::str::FromStr for GroupField {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "estimator" => Ok(GroupField::Estimator),
            "snr" => Ok(GroupField::Snr),
            "m" => Ok(GroupField::M),
            other => Err(SimError::Parse(format!(
                "unknown group field `{other}` (expected estimator, snr or m)"
            ))),
        }
    }
}

/// Percentiles reported by default: p50, p67, p90, p95.
pub const DEFAULT_PERCENTILES: [f64; 4] = [0.50, 0.67, 0.90, 0.95];

/// One group's error percentiles.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfRow {
    pub group: String,
    /// Records that entered the statistics.
    pub count: usize,
    /// Flagged (failed-round) records excluded from the statistics.
    pub excluded: usize,
    /// `(p, value_m)` pairs in the requested order.
    pub percentiles: Vec<(f64, f64)>,
}

/// Group the records and compute absolute-error percentiles per group.
/// Flagged records are excluded from the statistics but counted.
pub fn report_cdf(
    records: &[TrialRecord],
    group_by: &[GroupField],
    ps: &[f64],
) -> Result<Vec<CdfRow>> {
    if records.is_empty() {
        return Err(SimError::EmptyInput("report_cdf"));
    }
    let mut groups: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    for r in records {
        let mut parts = Vec::new();
        for field in group_by {
            let part = match field {
                GroupField::Estimator => format!("estimator={}", r.estimator),
                GroupField::Snr => format!("snr={}", r.snr_db),
                GroupField::M => format!("m={}", r.m),
            };
            parts.push(part);
        }
        let key = if parts.is_empty() {
            "all".to_string()
        } else {
            parts.join(" ")
        };
        let entry = groups.entry(key).or_default();
        if r.is_ok() && r.error_m.is_finite() {
            entry.0.push(r.error_m);
        } else {
            entry.1 += 1;
        }
    }
    let mut rows = Vec::new();
    for (group, (errors, excluded)) in groups {
        let percentiles = if errors.is_empty() {
            ps.iter().map(|&p| (p, f64::NAN)).collect()
        } else {
            ps.iter()
                .map(|&p| percentile(&errors, p).map(|v| (p, v)))
                .collect::<Result<Vec<_>>>()?
        };
        rows.push(CdfRow {
            group,
            count: errors.len(),
            excluded,
            percentiles,
        });
    }
    Ok(rows)
}

/// Plain-text table for terminal output.
pub fn render_table(rows: &[CdfRow]) -> String {
    let mut out = String::new();
    let group_width = rows
        .iter()
        .map(|r| r.group.len())
        .max()
        .unwrap_or(5)
        .max(5);
    out.push_str(&format!("{:<group_width$}  {:>7}  {:>8}", "group", "count", "excluded"));
    if let Some(first) = rows.first() {
        for (p, _) in &first.percentiles {
            out.push_str(&format!("  {:>10}", format!("p{:.0}", p * 100.0)));
        }
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{:<group_width$}  {:>7}  {:>8}",
            row.group, row.count, row.excluded
        ));
        for (_, v) in &row.percentiles {
            out.push_str(&format!("  {:>10.4}", v));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::EstimatorKind;

    fn record(estimator: EstimatorKind, snr: f64, m: usize, error: f64) -> TrialRecord {
        TrialRecord {
            distance_true_m: 5.0,
            snr_db: snr,
            m,
            estimator,
            d_hat_m: 5.0 + error,
            error_m: error,
            rtt_samples: 0.0,
            ta: 0,
            p_d: 0,
            nu: 0,
            root_used: 0,
            seed: 0,
            status: "ok".to_string(),
        }
    }

    #[test]
    fn zero_errors_give_zero_percentiles() {
        let records: Vec<TrialRecord> = (0..10)
            .map(|_| record(EstimatorKind::Pd, 30.0, 20, 0.0))
            .collect();
        let rows = report_cdf(&records, &[], &DEFAULT_PERCENTILES).unwrap();
        assert_eq!(rows.len(), 1);
        for (_, v) in &rows[0].percentiles {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn group_count_matches_distinct_triples() {
        let mut records = Vec::new();
        for est in [EstimatorKind::Pd, EstimatorKind::Mf] {
            for snr in [30.0, -20.0] {
                for m in [20usize, 60] {
                    records.push(record(est, snr, m, 1.0));
                }
            }
        }
        let rows = report_cdf(
            &records,
            &[GroupField::Estimator, GroupField::Snr, GroupField::M],
            &[0.5],
        )
        .unwrap();
        assert_eq!(rows.len(), 8);
    }

    #[test]
    fn flagged_records_are_excluded_but_counted() {
        let mut records: Vec<TrialRecord> = (0..4)
            .map(|i| record(EstimatorKind::Pd, 30.0, 20, i as f64))
            .collect();
        records.push(TrialRecord {
            status: "cyclic shift out of range: boom".to_string(),
            error_m: f64::NAN,
            ..record(EstimatorKind::Pd, 30.0, 20, 0.0)
        });
        let rows = report_cdf(&records, &[], &[0.5]).unwrap();
        assert_eq!(rows[0].count, 4);
        assert_eq!(rows[0].excluded, 1);
    }

    #[test]
    fn table_renders_one_line_per_group() {
        let records = vec![
            record(EstimatorKind::Pd, 30.0, 20, 1.0),
            record(EstimatorKind::Mf, 30.0, 20, 0.5),
        ];
        let rows = report_cdf(&records, &[GroupField::Estimator], &[0.5, 0.9]).unwrap();
        let table = render_table(&rows);
        assert_eq!(table.lines().count(), 3, "{table}");
        assert!(table.contains("estimator=mf"));
        assert!(table.contains("p90"));
    }
}
