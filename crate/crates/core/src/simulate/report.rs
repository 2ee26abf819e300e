use serde::{Deserialize, Serialize};

use super::protocol::{RocPoint, SimMetrics};
use crate::error::{Error, Result};
use crate::io::format_f64;

pub const ROW_LABELS: [&str; 5] = [
    "Mean Hit (%)",
    "Mean False positive (%)",
    "Mean Nonzero",
    "Mean Prediction error",
    "Mean Estimation error",
];

/// Metric rows by (design, estimator) columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

pub fn column_label(m: &SimMetrics) -> String {
    format!("design {} {}", m.design, m.estimator)
}

pub fn table_report(metrics: &[SimMetrics]) -> TableReport {
    let columns = metrics.iter().map(column_label).collect();
    let pick: [fn(&SimMetrics) -> f64; 5] = [
        |m| m.hit_pct,
        |m| m.fp_pct,
        |m| m.nonzero,
        |m| m.pred_error,
        |m| m.est_error,
    ];
    let rows = ROW_LABELS
        .iter()
        .zip(pick)
        .map(|(label, f)| (label.to_string(), metrics.iter().map(f).collect()))
        .collect();
    TableReport { columns, rows }
}

impl TableReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["metric".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        if !self.columns.is_empty() {
            for (label, vals) in &self.rows {
                let mut rec = vec![label.clone()];
                rec.extend(vals.iter().map(|v| format_f64(*v)));
                w.write_record(&rec)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Argument(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let columns: Vec<String> = rdr.headers()?.iter().skip(1).map(String::from).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let vals = rec
                .iter()
                .enumerate()
                .skip(1)
                .map(|(c, f)| {
                    f.parse::<f64>().map_err(|_| Error::Parse {
                        row: i + 2,
                        column: c + 1,
                        message: format!("'{f}' is not a number"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push((rec[0].to_string(), vals));
        }
        Ok(TableReport { columns, rows })
    }

    /// Aligned view rounded to three decimals.
    pub fn to_text(&self) -> String {
        let label_w = ROW_LABELS.iter().map(|l| l.len()).max().unwrap_or(0);
        let widths: Vec<usize> = self.columns.iter().map(|c| c.len().max(10)).collect();
        let mut out = format!("{:<label_w$}", "metric");
        for (c, w) in self.columns.iter().zip(&widths) {
            out.push_str(&format!("  {c:>w$}"));
        }
        out.push('\n');
        if self.columns.is_empty() {
            return out;
        }
        for (label, vals) in &self.rows {
            out.push_str(&format!("{label:<label_w$}"));
            for (v, w) in vals.iter().zip(&widths) {
                out.push_str(&format!("  {v:>w$.3}"));
            }
            out.push('\n');
        }
        out
    }
}

/// JSON report carrying every metric bundle and its protocol settings.
pub fn metrics_json(metrics: &[SimMetrics]) -> Result<String> {
    Ok(serde_json::to_string_pretty(metrics)?)
}

pub fn roc_csv(points: &[RocPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["lambda", "tp_fraction", "fp_fraction"])?;
    for p in points {
        w.write_record([
            format_f64(p.lambda),
            format_f64(p.tp_fraction),
            format_f64(p.fp_fraction),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Argument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::DesignId;

    fn metric(est: &str, base: f64) -> SimMetrics {
        SimMetrics {
            design: DesignId::D1,
            estimator: est.into(),
            seed: 1,
            reps: 3,
            n_lambda: Some(100),
            lambda_min_ratio: Some(0.01),
            hit_pct: base + 1.0 / 3.0,
            fp_pct: base * 0.1,
            nonzero: 20.0 + base,
            pred_error: 0.021 * base,
            est_error: 1e-17 + base,
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = table_report(&[]);
        assert_eq!(t.to_csv().unwrap(), "metric\n");
        assert_eq!(t.to_text().lines().count(), 1);
    }

    #[test]
    fn two_estimators_two_columns() {
        let t = table_report(&[metric("lasso", 1.0), metric("grouplasso", 2.0)]);
        assert_eq!(t.columns, vec!["design 1 lasso", "design 1 grouplasso"]);
        let csv = t.to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[4].starts_with("Mean Prediction error,"));
        let back = TableReport::from_csv(&csv).unwrap();
        assert_eq!(back, t);
        let text = t.to_text();
        assert!(text.contains("Mean Hit (%)"));
        assert!(text.contains("1.333"));
    }

    #[test]
    fn roc_csv_layout() {
        let pts = [RocPoint {
            lambda: 0.5,
            tp_fraction: 0.0,
            fp_fraction: 0.0,
        }];
        let s = roc_csv(&pts).unwrap();
        assert!(s.starts_with("lambda,tp_fraction,fp_fraction\n"));
        assert_eq!(s.lines().count(), 2);
    }
}
