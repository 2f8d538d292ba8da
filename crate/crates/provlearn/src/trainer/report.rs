//! Deterministic renderings of a cross-validation summary. All formats use
//! the percent scale with two decimals.

use super::CvSummary;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    TextTable,
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(ReportFormat::TextTable),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format `{other}` (expected text|json|csv)")),
        }
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

fn pct_pm(mean: f64, std: f64) -> String {
    format!("{}±{}", pct(mean), pct(std))
}

/// Render `summary` in the requested format. JSON keeps full precision and
/// reparses to an equal summary; the text table and CSV carry one row per
/// fold plus a mean±std aggregate row.
pub fn report(summary: &CvSummary, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(summary).expect("summary serializes");
            out.push(b'\n');
            out
        }
        ReportFormat::Csv => {
            let mut out = String::from("fold,precision,recall,f1\n");
            for (i, m) in summary.folds.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    i + 1,
                    pct(m.precision),
                    pct(m.recall),
                    pct(m.f1)
                ));
            }
            out.push_str(&format!(
                "mean,{},{},{}\n",
                pct_pm(summary.precision.mean, summary.precision.std),
                pct_pm(summary.recall.mean, summary.recall.std),
                pct_pm(summary.f1.mean, summary.f1.std)
            ));
            out.into_bytes()
        }
        ReportFormat::TextTable => {
            let mut rows = vec![[
                "fold".to_string(),
                "precision".to_string(),
                "recall".to_string(),
                "f1".to_string(),
            ]];
            for (i, m) in summary.folds.iter().enumerate() {
                rows.push([(i + 1).to_string(), pct(m.precision), pct(m.recall), pct(m.f1)]);
            }
            rows.push([
                "mean".to_string(),
                pct_pm(summary.precision.mean, summary.precision.std),
                pct_pm(summary.recall.mean, summary.recall.std),
                pct_pm(summary.f1.mean, summary.f1.std),
            ]);
            let widths: Vec<usize> = (0..4)
                .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
                .collect();
            let mut out = String::new();
            for row in rows {
                for (c, cell) in row.iter().enumerate() {
                    if c > 0 {
                        out.push_str("  ");
                    }
                    out.push_str(cell);
                    if c + 1 < 4 {
                        for _ in cell.chars().count()..widths[c] {
                            out.push(' ');
                        }
                    }
                }
                out.push('\n');
            }
            out.into_bytes()
        }
    }
}
