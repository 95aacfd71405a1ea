//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! Run all of them with `cargo test -p preictal --test acceptance`, or a
//! subset by number: `cargo test -p preictal --test acceptance -- 7 8`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::checkpoints::{fault_failures, roundtrip_failures};
use common::reference::golden_mismatches;
use common::scenario::{pipeline_snapshot, shipped_config, tiny};
use common::{grad_max_error, mann_whitney_auc, oracle_max_error, random_scored, GRAD_KINDS, ORACLE_OPS};
use preictal::data::{robust_scale, split, Sample, SplitRatios, NUM_CHANNELS};
use preictal::eval::{evaluate_scores, roc_auc};
use preictal::experiment::{
    load_samples, prepare_archive, run_general, run_personalization, synthesize_corpus, ExperimentConfig,
};
use preictal::training::class_weights;
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, t: Instant) -> Result<Duration, String> {
    let took = t.elapsed();
    if took < limit {
        Ok(took)
    } else {
        Err(format!("took {took:.1?}, limit {limit:?}"))
    }
}

fn gradients() -> Outcome {
    let t = Instant::now();
    let mut worst = (0.0f64, "");
    for (i, kind) in GRAD_KINDS.iter().enumerate() {
        let err = grad_max_error(kind, 20, 900 + i as u64);
        if err.is_nan() || err > worst.0 {
            worst = (err, kind);
        }
    }
    let took = within(Duration::from_secs(60), t)?;
    check(
        worst.0 < 1e-4,
        format!("{} kinds x 20 instances, max relative error {:.2e} ({}), {took:.1?}", GRAD_KINDS.len(), worst.0, worst.1),
    )
}

fn oracles() -> Outcome {
    let t = Instant::now();
    let mut worst = (0.0f64, "");
    for (i, op) in ORACLE_OPS.iter().enumerate() {
        let err = oracle_max_error(op, 100, 40 + i as u64);
        if err.is_nan() || err > worst.0 {
            worst = (err, op);
        }
    }
    let took = within(Duration::from_secs(60), t)?;
    check(
        worst.0 < 1e-10,
        format!("{} ops x 100 instances, max abs error {:.2e} ({}), {took:.1?}", ORACLE_OPS.len(), worst.0, worst.1),
    )
}

fn class_weight_formula() -> Outcome {
    let mut r = common::rng(17);
    for _ in 0..50 {
        let (n0, n1) = (r.random_range(1..5000usize), r.random_range(1..5000usize));
        let w = class_weights(&BTreeMap::from([(0u8, n0), (1u8, n1)]), n0 + n1).map_err(|e| e.to_string())?;
        let total = (n0 + n1) as f64;
        if w.negative != total / (2.0 * n0 as f64) || w.positive != total / (2.0 * n1 as f64) {
            return Err(format!("counts ({n0}, {n1}) gave ({}, {})", w.negative, w.positive));
        }
        let b = class_weights(&BTreeMap::from([(0u8, n1), (1u8, n1)]), 2 * n1).map_err(|e| e.to_string())?;
        if (b.negative, b.positive) != (1.0, 1.0) {
            return Err(format!("balanced counts {n1} gave ({}, {})", b.negative, b.positive));
        }
    }
    Ok("50 random count pairs exact, balanced counts give (1, 1)".into())
}

fn robust_scaling() -> Outcome {
    let example = robust_scale(&[1.0, 2.0, 3.0, 4.0, 100.0]).map_err(|e| e.to_string())?;
    if example.values != [-1.0, -0.5, 0.0, 0.5, 48.5] {
        return Err(format!("[1,2,3,4,100] gave {:?}", example.values));
    }
    let mut r = common::rng(44);
    let (mut worst_median, mut worst_affine) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let half = r.random_range(2..60);
        let x = common::distinct(&mut r, 2 * half + 1);
        let scaled = robust_scale(&x).map_err(|e| e.to_string())?;
        let mut sorted = x.clone();
        sorted.sort_by(f64::total_cmp);
        let mid = x.iter().position(|&v| v == sorted[half]).expect("median is an element");
        worst_median = worst_median.max(scaled.values[mid].abs());
        let (a, b) = (r.random_range(0.01..100.0), r.random_range(-1e3..1e3));
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let again = robust_scale(&y).map_err(|e| e.to_string())?;
        for (p, q) in scaled.values.iter().zip(&again.values) {
            worst_affine = worst_affine.max((p - q).abs());
        }
    }
    check(
        worst_median == 0.0 && worst_affine < 1e-10,
        format!("worked example exact, median maps to {worst_median:e}, affine drift {worst_affine:.2e} over 200 instances"),
    )
}

fn metric_oracles() -> Outcome {
    let mut r = common::rng(31);
    for _ in 0..100 {
        let (scores, labels) = random_scored(&mut r, 500);
        let rep = evaluate_scores(&scores, &labels).map_err(|e| e.to_string())?;
        let c = rep.confusion.counts;
        let count = |pred: bool, pos: u8| scores.iter().zip(&labels).filter(|(s, l)| (**s >= 0.5) == pred && **l == pos).count();
        if (c.tp, c.fp, c.tn, c.fn_) != (count(true, 1), count(true, 0), count(false, 0), count(false, 1)) {
            return Err(format!("confusion counts {c:?} disagree with brute force"));
        }
        let recall = c.tp as f64 / (c.tp + c.fn_) as f64;
        let precision = if c.tp + c.fp == 0 { 0.0 } else { c.tp as f64 / (c.tp + c.fp) as f64 };
        if rep.accuracy != (c.tp + c.tn) as f64 / scores.len() as f64 || rep.recall != recall || rep.precision != precision {
            return Err("accuracy, precision or recall differ from brute force".into());
        }
    }
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (scores, labels) = random_scored(&mut r, 500);
        let auc = roc_auc(&scores, &labels).map_err(|e| e.to_string())?.0;
        worst = worst.max((auc - mann_whitney_auc(&scores, &labels)).abs());
        let cubed: Vec<f64> = scores.iter().map(|s| (3.0 * s - 1.0).powi(3).exp()).collect();
        let mapped = roc_auc(&cubed, &labels).map_err(|e| e.to_string())?.0;
        if (mapped - auc).abs() > 1e-12 {
            return Err(format!("monotone transform moved AUC from {auc} to {mapped}"));
        }
    }
    check(worst < 1e-12, format!("counts exact, AUC vs Mann-Whitney max error {worst:.2e}, monotone invariant"))
}

fn split_hygiene() -> Outcome {
    let ratios = SplitRatios::default();
    let mut worst_strat = 0.0f64;
    for seed in 0..50u64 {
        let mut r = common::rng(1000 + seed);
        let n = r.random_range(300..1500);
        let p = r.random_range(0.1..0.5);
        let samples: Vec<Sample> = (0..n)
            .map(|i| Sample {
                window: vec![0.0; 4 * NUM_CHANNELS],
                label: u8::from(r.random_bool(p)),
                patient_id: format!("P{}", i % 4),
                window_start_ms: i as i64 * 30_000,
                source_segment_id: 0,
            })
            .collect();
        let keys: BTreeSet<_> = samples.iter().map(Sample::key).collect();
        let rate = samples.iter().filter(|s| s.label == 1).count() as f64 / n as f64;
        let set = split(samples, &ratios, seed).map_err(|e| e.to_string())?;
        let mut seen = BTreeSet::new();
        for (part, frac) in [(&set.train, 0.6), (&set.validation, 0.2), (&set.test, 0.2)] {
            for s in part.iter() {
                if !seen.insert(s.key()) {
                    return Err(format!("seed {seed}: sample in two parts"));
                }
            }
            if (part.len() as f64 - n as f64 * frac).abs() > 1.0 + 1e-9 {
                return Err(format!("seed {seed}: part of {} for target {}", part.len(), n as f64 * frac));
            }
            let part_rate = part.iter().filter(|s| s.label == 1).count() as f64 / part.len() as f64;
            worst_strat = worst_strat.max((part_rate - rate).abs());
        }
        if seen != keys {
            return Err(format!("seed {seed}: parts do not cover the input"));
        }
    }
    check(
        worst_strat <= 0.05,
        format!("50 seeds exact partitions within 1 sample, worst class-rate gap {:.2} pp", worst_strat * 100.0),
    )
}

fn general_model() -> Outcome {
    let t = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg: ExperimentConfig = shipped_config("example.config");
    cfg.data.corpus_dir = tmp.path().join("corpus");
    cfg.data.archive_dir = tmp.path().join("archive");
    cfg.output_dir = tmp.path().join("out");
    let patients = synthesize_corpus(&cfg).map_err(|e| e.to_string())?;
    prepare_archive(&cfg).map_err(|e| e.to_string())?;
    let samples = load_samples(&cfg).map_err(|e| e.to_string())?;
    let run = run_general(&cfg, &samples).map_err(|e| e.to_string())?;
    let took = t.elapsed();
    let m = &run.report;
    check(
        m.accuracy >= 0.85 && m.auc_roc >= 0.90 && took < Duration::from_secs(600),
        format!(
            "{} patients, {} windows, test accuracy {:.4}, AUC {:.4}, {took:.0?} on {} thread(s)",
            patients.len(),
            samples.len(),
            m.accuracy,
            m.auc_roc,
            rayon::current_num_threads()
        ),
    )
}

fn personalization_lift() -> Outcome {
    let base = shipped_config("personalization.config");
    let mut rows = Vec::new();
    let mut ok = true;
    for seed in 0..3 {
        let mut cfg = base.clone();
        cfg.set_seed(seed);
        let samples = load_samples(&cfg).map_err(|e| e.to_string())?;
        let r = run_personalization(&cfg, &samples, "P9").map_err(|e| e.to_string())?;
        let (b, a) = (r.before.accuracy, r.after.accuracy);
        ok &= b <= 0.65 && a >= b + 0.15 && r.before.n_samples == r.after.n_samples;
        rows.push(format!("seed {seed}: {:.2}% -> {:.2}%", b * 100.0, a * 100.0));
    }
    check(ok, format!("held-out P9, {}", rows.join(", ")))
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = tiny(tmp.path());
    let a = pipeline_snapshot(&cfg, &tmp.path().join("a"));
    let b = pipeline_snapshot(&cfg, &tmp.path().join("b"));
    let differing: Vec<String> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.display().to_string())
        .collect();
    check(
        a.len() == b.len() && differing.is_empty(),
        format!("{} files from two identical general + personalization runs, differing: {differing:?}", a.len()),
    )
}

fn report_fidelity() -> Outcome {
    let bad = golden_mismatches();
    check(bad.is_empty(), if bad.is_empty() { "5 golden tables match character for character".into() } else { bad.join("; ") })
}

fn checkpoints() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bad = roundtrip_failures(tmp.path(), 11);
    bad.extend(fault_failures(tmp.path()));
    check(
        bad.is_empty(),
        if bad.is_empty() { "3 architectures bit-identical on 5 inputs, 7 corruptions give their codes".into() } else { bad.join("; ") },
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("gradient correctness", gradients),
        ("oracle equivalence", oracles),
        ("class weight formula", class_weight_formula),
        ("robust scaling", robust_scaling),
        ("metric oracles", metric_oracles),
        ("split hygiene", split_hygiene),
        ("general model on synthetic corpus", general_model),
        ("personalization lift", personalization_lift),
        ("determinism", determinism),
        ("report fidelity", report_fidelity),
        ("checkpoint round trip", checkpoints),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {n:>2} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {n:>2} {name}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
