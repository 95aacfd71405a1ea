//! Reference results as numbers, fed to the renderers by the golden tests.

use preictal::eval::{
    render_reports, ConfusionMatrix, Counts, Layout, MetricFlags, MetricsReport, MetricsSummary, PatientComparison,
    ReportSet,
};
use preictal::nn::Architecture;

/// accuracy, precision, recall, f1, auc
pub const GENERAL: [f64; 5] = [0.9194, 0.9377, 0.8800, 0.9079, 0.9159];

/// architecture, accuracy, f1, precision, recall, auc
pub const ARCHITECTURES: [(Architecture, [f64; 5]); 3] = [
    (Architecture::Bilstm, [0.8303, 0.7927, 0.7947, 0.7921, 0.7921]),
    (Architecture::CnnLstm, [0.8527, 0.8509, 0.8603, 0.8495, 0.8495]),
    (Architecture::CnnBilstm, [0.9194, 0.9079, 0.9377, 0.8800, 0.9159]),
];

/// patient, accuracy, precision, recall, f1 before personalization
pub const BEFORE: [(&str, [f64; 4]); 9] = [
    ("01838", [0.7391, 1.0, 0.7391, 0.8500]),
    ("01575", [0.6570, 0.4928, 0.8870, 0.6335]),
    ("00501", [0.5000, 0.5000, 0.4000, 0.4444]),
    ("01097", [0.5526, 0.5556, 0.6034, 0.5785]),
    ("00172", [0.6522, 1.0, 0.6522, 0.7895]),
    ("01110-ICU", [0.3515, 0.3604, 0.4000, 0.3791]),
    ("01808", [0.6000, 0.5606, 0.7708, 0.6491]),
    ("01842", [0.3131, 0.3504, 0.4528, 0.3951]),
    ("01844", [0.5674, 0.4346, 0.7381, 0.5471]),
];

pub const AFTER: [(&str, [f64; 4]); 9] = [
    ("01838", [0.9130, 1.0, 0.9130, 0.9545]),
    ("01575", [0.9709, 0.9817, 0.9304, 0.9554]),
    ("00501", [0.9000, 1.0, 0.8000, 0.9000]),
    ("01097", [0.9211, 0.9455, 0.8966, 0.9204]),
    ("00172", [0.9478, 1.0, 0.9478, 0.9732]),
    ("01110-ICU", [0.9010, 0.8774, 0.9300, 0.9029]),
    ("01808", [0.9000, 0.9318, 0.8542, 0.8913]),
    ("01842", [0.9299, 0.9789, 0.8774, 0.9254]),
    ("01844", [0.8034, 0.8043, 0.5873, 0.6789]),
];

pub fn summary(accuracy: f64, precision: f64, recall: f64, f1: f64, auc_roc: f64) -> MetricsSummary {
    MetricsSummary { accuracy, precision, recall, f1, auc_roc }
}

/// A report carrying only the headline numbers.
pub fn report(m: MetricsSummary) -> MetricsReport {
    MetricsReport {
        accuracy: m.accuracy,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        auc_roc: m.auc_roc,
        confusion: ConfusionMatrix {
            counts: Counts { tp: 0, fp: 0, tn: 0, fn_: 0 },
            threshold: 0.5,
        },
        roc_points: Vec::new(),
        n_samples: 0,
        flags: MetricFlags::default(),
    }
}

pub fn patient_report(v: [f64; 4]) -> MetricsReport {
    report(summary(v[0], v[1], v[2], v[3], f64::NAN))
}

/// Every reference number, with patients expected in their listed order.
pub fn reference_set() -> ReportSet {
    let [acc, prec, rec, f1, auc] = GENERAL;
    ReportSet {
        general: Some(report(summary(acc, prec, rec, f1, auc))),
        architectures: ARCHITECTURES
            .iter()
            .map(|&(a, [acc, f1, prec, rec, auc])| (a, report(summary(acc, prec, rec, f1, auc))))
            .collect(),
        patients: BEFORE
            .iter()
            .zip(&AFTER)
            .map(|(b, a)| PatientComparison {
                patient_id: b.0.to_string(),
                before: patient_report(b.1),
                after: patient_report(a.1),
            })
            .collect(),
        expected_patients: BEFORE.iter().map(|b| b.0.to_string()).collect(),
    }
}

pub const GOLDEN: [(&str, &str); 5] = [
    ("general_metrics.csv", include_str!("../golden/general_metrics.csv")),
    ("architecture_comparison.csv", include_str!("../golden/architecture_comparison.csv")),
    ("personalization_summary.csv", include_str!("../golden/personalization_summary.csv")),
    ("appendix_before.csv", include_str!("../golden/appendix_before.csv")),
    ("appendix_after.csv", include_str!("../golden/appendix_after.csv")),
];

/// Renders every layout from [`reference_set`] and lists each golden file
/// whose text differs, with the first differing line.
pub fn golden_mismatches() -> Vec<String> {
    let set = reference_set();
    let mut rendered = Vec::new();
    for layout in Layout::ALL {
        rendered.extend(render_reports(&set, layout).expect("reference set renders"));
    }
    let mut bad = Vec::new();
    for (name, want) in GOLDEN {
        let Some(got) = rendered.iter().find(|f| f.name == name) else {
            bad.push(format!("{name}: not rendered"));
            continue;
        };
        if got.contents != want {
            let line = got
                .contents
                .lines()
                .zip(want.lines())
                .find(|(g, w)| g != w)
                .map_or_else(|| "line count differs".to_string(), |(g, w)| format!("{g:?} != {w:?}"));
            bad.push(format!("{name}: {line}"));
        }
    }
    bad
}
