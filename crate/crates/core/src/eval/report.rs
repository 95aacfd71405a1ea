use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{ConfusionMatrix, MetricsReport, MetricsSummary, RocPoint};
use crate::error::{Error, Result};
use crate::nn::Architecture;

pub const GENERAL_HEADER: &str = "Accuracy, Precision, Recall, F1 Score, AUC-ROC";
pub const ARCHITECTURE_HEADER: &str =
    "Model Architecture, Accuracy, F1 Score, Precision, Recall, AUC-ROC";
pub const BEFORE_AFTER_HEADER: &str = "Patient ID, Patient Accuracy Before Personalization (Tested on General Model), Patient Accuracy After Personalization (Tested on Personalized Model)";
pub const APPENDIX_HEADER: &str = "Patient ID, Accuracy, Precision, Recall, F1 Score";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    General,
    PerPatientBeforeAfter,
    Appendix,
    ArchitectureComparison,
}

impl Layout {
    pub const ALL: [Layout; 4] = [
        Layout::General,
        Layout::PerPatientBeforeAfter,
        Layout::Appendix,
        Layout::ArchitectureComparison,
    ];
}

/// Accuracy as a percentage with two decimals.
pub fn format_accuracy(v: f64) -> String {
    format!("{:.2}%", v * 100.0)
}

/// Four significant digits: `0.8800`, `1.000`.
pub fn format_metric(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "1.0000" {
        "1.000".into()
    } else {
        s
    }
}

pub fn render_general(m: &MetricsSummary) -> String {
    format!(
        "{GENERAL_HEADER}\n{}, {}, {}, {}, {}\n",
        format_accuracy(m.accuracy),
        format_metric(m.precision),
        format_metric(m.recall),
        format_metric(m.f1),
        format_metric(m.auc_roc)
    )
}

/// One row per architecture in the order bilstm, cnn_lstm, cnn_bilstm.
pub fn render_architecture_comparison(rows: &[(Architecture, MetricsSummary)]) -> Result<String> {
    let missing: Vec<&str> = Architecture::ALL
        .iter()
        .filter(|a| !rows.iter().any(|(r, _)| r == *a))
        .map(|a| a.display_name())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Contract(format!(
            "architecture comparison is missing {}",
            missing.join(", ")
        )));
    }
    let mut out = format!("{ARCHITECTURE_HEADER}\n");
    for arch in Architecture::ALL {
        let (_, m) = rows.iter().find(|(a, _)| *a == arch).expect("checked above");
        let _ = writeln!(
            out,
            "{}, {}, {}, {}, {}, {}",
            arch.display_name(),
            format_accuracy(m.accuracy),
            format_metric(m.f1),
            format_metric(m.precision),
            format_metric(m.recall),
            format_metric(m.auc_roc)
        );
    }
    Ok(out)
}

fn check_patients<'a>(present: impl Iterator<Item = &'a str>, expected: &[String]) -> Result<()> {
    let present: BTreeSet<&str> = present.collect();
    let absent: Vec<&str> = expected
        .iter()
        .map(String::as_str)
        .filter(|p| !present.contains(p))
        .collect();
    if !absent.is_empty() {
        return Err(Error::Contract(format!(
            "missing patient rows: {}",
            absent.join(", ")
        )));
    }
    Ok(())
}

/// Before/after accuracy per patient, rows in the given order. Every id in
/// `expected` must have a row.
pub fn render_before_after(rows: &[(String, f64, f64)], expected: &[String]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Contract("no patient rows to render".into()));
    }
    check_patients(rows.iter().map(|r| r.0.as_str()), expected)?;
    let mut out = format!("{BEFORE_AFTER_HEADER}\n");
    for (pid, before, after) in rows {
        let _ = writeln!(out, "{pid}, {}, {}", format_accuracy(*before), format_accuracy(*after));
    }
    Ok(out)
}

/// Accuracy, precision, recall and F1 per patient, rows in the given order.
pub fn render_appendix(rows: &[(String, MetricsSummary)], expected: &[String]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Contract("no patient rows to render".into()));
    }
    check_patients(rows.iter().map(|r| r.0.as_str()), expected)?;
    let mut out = format!("{APPENDIX_HEADER}\n");
    for (pid, m) in rows {
        let _ = writeln!(
            out,
            "{pid}, {}, {}, {}, {}",
            format_accuracy(m.accuracy),
            format_metric(m.precision),
            format_metric(m.recall),
            format_metric(m.f1)
        );
    }
    Ok(out)
}

/// `fpr,tpr,threshold` rows for plotting.
pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut out = String::from("fpr,tpr,threshold\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.fpr, p.tpr, p.threshold);
    }
    out
}

/// `tp,fp,tn,fn` counts for plotting.
pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    let c = cm.counts;
    format!("tp,fp,tn,fn\n{},{},{},{}\n", c.tp, c.fp, c.tn, c.fn_)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientComparison {
    pub patient_id: String,
    pub before: MetricsReport,
    pub after: MetricsReport,
}

/// Reports available for rendering; each layout reads the parts it needs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportSet {
    pub general: Option<MetricsReport>,
    pub architectures: Vec<(Architecture, MetricsReport)>,
    pub patients: Vec<PatientComparison>,
    /// Patient ids that must appear in per-patient layouts.
    pub expected_patients: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFile {
    pub name: String,
    pub contents: String,
}

impl ReportFile {
    fn new(name: &str, contents: String) -> Self {
        ReportFile {
            name: name.to_string(),
            contents,
        }
    }
}

pub const GENERAL_FILE: &str = "general_metrics.csv";
pub const ROC_FILE: &str = "roc_curve.csv";
pub const CONFUSION_FILE: &str = "confusion_matrix.csv";
pub const ARCHITECTURE_FILE: &str = "architecture_comparison.csv";
pub const BEFORE_AFTER_FILE: &str = "personalization_summary.csv";
pub const APPENDIX_BEFORE_FILE: &str = "appendix_before.csv";
pub const APPENDIX_AFTER_FILE: &str = "appendix_after.csv";

/// Renders one layout to CSV files.
pub fn render_reports(set: &ReportSet, layout: Layout) -> Result<Vec<ReportFile>> {
    match layout {
        Layout::General => {
            let r = set
                .general
                .as_ref()
                .ok_or_else(|| Error::Contract("no general report to render".into()))?;
            Ok(vec![
                ReportFile::new(GENERAL_FILE, render_general(&r.summary())),
                ReportFile::new(ROC_FILE, roc_csv(&r.roc_points)),
                ReportFile::new(CONFUSION_FILE, confusion_csv(&r.confusion)),
            ])
        }
        Layout::ArchitectureComparison => {
            let rows: Vec<_> = set
                .architectures
                .iter()
                .map(|(a, r)| (*a, r.summary()))
                .collect();
            Ok(vec![ReportFile::new(
                ARCHITECTURE_FILE,
                render_architecture_comparison(&rows)?,
            )])
        }
        Layout::PerPatientBeforeAfter => {
            let rows: Vec<_> = set
                .patients
                .iter()
                .map(|p| (p.patient_id.clone(), p.before.accuracy, p.after.accuracy))
                .collect();
            Ok(vec![ReportFile::new(
                BEFORE_AFTER_FILE,
                render_before_after(&rows, &set.expected_patients)?,
            )])
        }
        Layout::Appendix => {
            let before: Vec<_> = set
                .patients
                .iter()
                .map(|p| (p.patient_id.clone(), p.before.summary()))
                .collect();
            let after: Vec<_> = set
                .patients
                .iter()
                .map(|p| (p.patient_id.clone(), p.after.summary()))
                .collect();
            Ok(vec![
                ReportFile::new(APPENDIX_BEFORE_FILE, render_appendix(&before, &set.expected_patients)?),
                ReportFile::new(APPENDIX_AFTER_FILE, render_appendix(&after, &set.expected_patients)?),
            ])
        }
    }
}

pub fn write_report_files(dir: &Path, files: &[ReportFile]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for f in files {
        let path = dir.join(&f.name);
        fs::write(&path, &f.contents).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
