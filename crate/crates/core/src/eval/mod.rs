//! Confusion counts, classification metrics, ROC/AUC, and report rendering.

mod metrics;
mod report;

pub use metrics::{
    confusion, evaluate_model, evaluate_scores, metrics, roc_auc, ConfusionMatrix, CoreMetrics, Counts,
    MetricFlags, MetricsReport, MetricsSummary, RocPoint, DEFAULT_THRESHOLD,
};
pub use report::{
    confusion_csv, format_accuracy, format_metric, render_appendix, render_architecture_comparison,
    render_before_after, render_general, render_reports, roc_csv, write_report_files, Layout,
    PatientComparison, ReportFile, ReportSet, APPENDIX_AFTER_FILE, APPENDIX_BEFORE_FILE,
    APPENDIX_HEADER, ARCHITECTURE_FILE, ARCHITECTURE_HEADER, BEFORE_AFTER_FILE, BEFORE_AFTER_HEADER,
    CONFUSION_FILE, GENERAL_FILE, GENERAL_HEADER, ROC_FILE,
};
