//! Plain-text rendering of evaluation results.
//!
//! Reports are line-oriented `key=value` text with a versioned first line,
//! so they diff cleanly and survive in shell pipelines. Floats print with
//! `{}` (shortest round-trip form), which keeps repeated runs byte
//! identical. Error rates are percentages; thresholds stay in raw score
//! units.

use super::{EvalReport, ThresholdPolicy};
use crate::error::Result;
use std::fmt::Write as _;
use std::path::Path;

pub const REPORT_MAGIC: &str = "OCPAD-REPORT v1";

pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{REPORT_MAGIC}");
    let _ = writeln!(out, "granularity={}", report.granularity.as_str());
    let _ = writeln!(out, "policy={}", report.policy.as_str());
    let _ = writeln!(out, "eer_dev={}", report.eer_dev);
    if let ThresholdPolicy::Global { threshold } = &report.thresholds {
        let _ = writeln!(out, "threshold={threshold}");
    }
    if let Some(h) = report.hter_test {
        let _ = writeln!(out, "hter_test={h}");
    }
    let _ = writeln!(out, "auc_test={}", report.auc_test);
    let _ = writeln!(out, "roc_points={}", report.roc_test.len());

    if let ThresholdPolicy::PerClient { thresholds } = &report.thresholds {
        let _ = writeln!(out, "\n[thresholds]");
        for (client, t) in thresholds {
            let _ = writeln!(out, "{client}={t}");
        }
    }
    if let Some(per_client) = &report.per_client_eer_dev {
        let _ = writeln!(out, "\n[per_client_eer]");
        for (client, e) in per_client {
            let _ = writeln!(out, "{client}={e}");
        }
    }
    for (client, summary) in &report.summaries {
        let _ = writeln!(out, "\n[client {client}]");
        for (tag, q) in [("real", &summary.real), ("attack", &summary.attack)] {
            if let Some(q) = q {
                let _ = writeln!(out, "{tag}_min={}", q.min);
                let _ = writeln!(out, "{tag}_q1={}", q.q1);
                let _ = writeln!(out, "{tag}_median={}", q.median);
                let _ = writeln!(out, "{tag}_q3={}", q.q3);
                let _ = writeln!(out, "{tag}_max={}", q.max);
            }
        }
    }
    out
}

pub fn save_report(report: &EvalReport, path: &Path) -> Result<()> {
    std::fs::write(path, render_report(report))?;
    Ok(())
}

/// ROC curve as two-column CSV, one `fpr,tpr` row per threshold.
pub fn render_roc_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("fpr,tpr\n");
    for (fpr, tpr) in points {
        let _ = writeln!(out, "{fpr},{tpr}");
    }
    out
}

pub fn save_roc_csv(points: &[(f64, f64)], path: &Path) -> Result<()> {
    std::fs::write(path, render_roc_csv(points))?;
    Ok(())
}

/// The handful of headline numbers a command prints to stdout.
pub fn summary_lines(report: &EvalReport) -> Vec<String> {
    let mut lines = vec![
        format!("granularity={}", report.granularity.as_str()),
        format!("policy={}", report.policy.as_str()),
        format!("eer_dev={}", report.eer_dev),
    ];
    if let ThresholdPolicy::Global { threshold } = &report.thresholds {
        lines.push(format!("threshold={threshold}"));
    }
    if let Some(h) = report.hter_test {
        lines.push(format!("hter_test={h}"));
    }
    lines.push(format!("auc_test={}", report.auc_test));
    lines
}
