use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::{load_checkpoint, save_checkpoint};
use super::config::{DataSource, ExperimentConfig};
use super::provenance::{software_version, write_provenance, Provenance};
use crate::data::{
    ingest_corpus, read_archive, scale_split, split, synth_recording, window_recordings, write_archive,
    write_corpus, ArchiveManifest, ProfileFile, Recording, Sample, SampleKey, SplitSet,
};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate_model, render_reports, write_report_files, Layout, MetricsReport, PatientComparison,
    ReportFile, ReportSet,
};
use crate::nn::{build_model, Architecture, Model};
use crate::training::{train, BatchEvent, ClassWeights, TrainConfig, TrainHistory};

pub const REPORTS_FILE: &str = "reports.toml";
pub const HISTORY_FILE: &str = "history.csv";
pub const MODEL_FILE: &str = "model.ckpt";

/// Generates the synthetic corpus described by `data.profile` into `data.corpus_dir`.
pub fn synthesize_corpus(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    let profile = ProfileFile::load(&cfg.profile_path()?)?;
    let out = cfg.corpus_dir();
    write_corpus(&profile, &out)
}

/// Raw recordings from the synthetic profile or the corpus directory.
pub fn load_recordings(cfg: &ExperimentConfig) -> Result<Vec<Recording>> {
    match cfg.data.source {
        DataSource::Synthetic => {
            let profile = ProfileFile::load(&cfg.profile_path()?)?;
            profile
                .resolve()?
                .par_iter()
                .map(|(p, hours)| synth_recording(p, *hours))
                .collect::<Vec<_>>()
                .into_iter()
                .collect()
        }
        DataSource::Corpus | DataSource::Archive => ingest_corpus(&cfg.corpus_dir()),
    }
}

/// Ingests, windows and splits the corpus, then writes the unscaled sample archive.
pub fn prepare_archive(cfg: &ExperimentConfig) -> Result<ArchiveManifest> {
    let samples = window_recordings(&load_recordings(cfg)?, &cfg.window)?;
    let set = split(samples, &cfg.split, cfg.seed)?;
    write_archive(&cfg.archive_dir(), &set, &cfg.window)
}

/// Unscaled samples in canonical order from the configured source.
pub fn load_samples(cfg: &ExperimentConfig) -> Result<Vec<Sample>> {
    cfg.check_source()?;
    match cfg.data.source {
        DataSource::Archive => {
            let (set, manifest) = read_archive(&cfg.archive_dir())?;
            if manifest.window != cfg.window {
                return Err(Error::Config(format!(
                    "{} was built with different window parameters; re-run prepare",
                    cfg.archive_dir().display()
                )));
            }
            Ok(set.into_samples())
        }
        _ => window_recordings(&load_recordings(cfg)?, &cfg.window),
    }
}

fn patients(samples: &[Sample]) -> BTreeSet<&str> {
    samples.iter().map(|s| s.patient_id.as_str()).collect()
}

fn require_both_classes(samples: &[Sample], what: &str) -> Result<()> {
    for class in [0u8, 1] {
        if !samples.iter().any(|s| s.label == class) {
            return Err(Error::DegenerateData(format!(
                "{what} has no samples of class {class}"
            )));
        }
    }
    Ok(())
}

fn check_pool(samples: &[Sample]) -> Result<()> {
    let n = patients(samples).len();
    if n < 2 {
        return Err(Error::DegenerateData(format!(
            "the dataset needs at least 2 patients, found {n}"
        )));
    }
    require_both_classes(samples, "the dataset")
}

fn refs(samples: &[Sample]) -> Vec<&Sample> {
    samples.iter().collect()
}

/// Splits and scales pooled samples the same way for every general run.
pub fn general_split(cfg: &ExperimentConfig, samples: &[Sample]) -> Result<SplitSet> {
    check_pool(samples)?;
    let mut set = split(samples.to_vec(), &cfg.split, cfg.seed)?;
    scale_split(&mut set)?;
    Ok(set)
}

/// One trained general model and its test-set report.
#[derive(Debug, Clone)]
pub struct GeneralRun {
    pub architecture: Architecture,
    pub report: MetricsReport,
    pub model: Model,
    pub history: TrainHistory,
    pub provenance: Provenance,
}

fn provenance(
    cfg: &ExperimentConfig,
    experiment: &str,
    architecture: Architecture,
    history: Option<&TrainHistory>,
    held_out_patient: Option<&str>,
) -> Provenance {
    Provenance {
        software_version: software_version(),
        experiment: experiment.to_string(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        split_seed: cfg.seed,
        architecture,
        epochs_completed: history.map_or(0, |h| h.epochs.len()),
        optimizer_steps: history.map_or(0, |h| h.optimizer_steps),
        held_out_patient: held_out_patient.map(str::to_string),
    }
}

fn train_general(cfg: &ExperimentConfig, architecture: Architecture, set: &SplitSet, experiment: &str) -> Result<GeneralRun> {
    let shape = cfg.window.window_shape()?;
    let mut model = build_model(architecture, shape, &cfg.model.hyper, cfg.seed)?;
    let weights = ClassWeights::from_labels(set.train.iter().map(|s| s.label))?;
    log::info!(
        "training {architecture} on {} samples (validation {}, test {})",
        set.train.len(),
        set.validation.len(),
        set.test.len()
    );
    let history = train(&mut model, &refs(&set.train), &refs(&set.validation), weights, None, &cfg.train, None)?;
    let report = evaluate_model(&model, &refs(&set.test))?;
    Ok(GeneralRun {
        architecture,
        report,
        provenance: provenance(cfg, experiment, architecture, Some(&history), None),
        model,
        history,
    })
}

/// Trains the configured architecture on the pooled 60 % split and reports
/// on the held-out 20 %.
pub fn run_general(cfg: &ExperimentConfig, samples: &[Sample]) -> Result<GeneralRun> {
    let set = general_split(cfg, samples)?;
    train_general(cfg, cfg.model.architecture, &set, "general")
}

/// Trains every architecture on one shared split with one seed.
pub fn run_architecture_comparison(cfg: &ExperimentConfig, samples: &[Sample]) -> Result<Vec<GeneralRun>> {
    let set = general_split(cfg, samples)?;
    Architecture::ALL
        .iter()
        .map(|&a| train_general(cfg, a, &set, "compare"))
        .collect()
}

/// Batch-level evidence that the held-out patient stayed out of training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Hygiene {
    pub base_batches: usize,
    /// Held-out-patient samples seen while training the base model.
    pub base_held_out_samples: usize,
    pub finetune_batches: usize,
    /// Held-out test samples seen while fine-tuning.
    pub finetune_test_samples: usize,
}

#[derive(Debug, Clone)]
pub struct PersonalizationRun {
    pub patient_id: String,
    pub before: MetricsReport,
    pub after: MetricsReport,
    pub base_history: TrainHistory,
    pub finetune_history: Option<TrainHistory>,
    /// The personalized model (the base model when fine-tuning is skipped).
    pub model: Model,
    pub hygiene: Hygiene,
    pub provenance: Provenance,
}

/// Leave-one-patient-out personalization for `patient_id`: a base model on
/// every other patient, then fine-tuning with the patient's train and
/// validation windows up-weighted. Before and after are scored on the same
/// patient test portion.
pub fn run_personalization(cfg: &ExperimentConfig, samples: &[Sample], patient_id: &str) -> Result<PersonalizationRun> {
    let (own, pool): (Vec<Sample>, Vec<Sample>) =
        samples.iter().cloned().partition(|s| s.patient_id == patient_id);
    if own.is_empty() {
        return Err(Error::Data(format!("patient {patient_id} has no samples")));
    }
    require_both_classes(&own, &format!("patient {patient_id}"))?;
    if patients(&pool).is_empty() {
        return Err(Error::DegenerateData(format!(
            "no other patients to train a base model for {patient_id}"
        )));
    }
    require_both_classes(&pool, "the base pool")?;

    let mut pool_set = split(pool, &cfg.split, cfg.seed)?;
    scale_split(&mut pool_set)?;
    let mut own_set = split(own, &cfg.split, cfg.seed)?;
    scale_split(&mut own_set)?;
    require_both_classes(&own_set.test, &format!("patient {patient_id} test portion"))?;

    let shape = cfg.window.window_shape()?;
    let mut base = build_model(cfg.model.architecture, shape, &cfg.model.hyper, cfg.seed)?;
    let weights = ClassWeights::from_labels(pool_set.train.iter().map(|s| s.label))?;
    let mut hygiene = Hygiene::default();
    log::info!("patient {patient_id}: base model on {} pooled samples", pool_set.train.len());
    let base_history = {
        let mut watch = |e: &BatchEvent| {
            hygiene.base_batches += 1;
            hygiene.base_held_out_samples += e.samples.iter().filter(|s| s.patient_id == patient_id).count();
        };
        train(
            &mut base,
            &refs(&pool_set.train),
            &refs(&pool_set.validation),
            weights,
            None,
            &cfg.train,
            Some(&mut watch),
        )?
    };
    let test = refs(&own_set.test);
    let before = evaluate_model(&base, &test)?;

    let epochs = cfg.personalization.finetune_epochs.unwrap_or(cfg.train.epochs);
    let (model, finetune_history) = if epochs == 0 {
        (base, None)
    } else {
        let mut tuned = base.clone();
        let mut combined = refs(&pool_set.train);
        combined.extend(own_set.train.iter().chain(&own_set.validation));
        let boost = cfg.train.sample_weight_boost;
        let sample_weights: Vec<f64> = combined
            .iter()
            .map(|s| if s.patient_id == patient_id { boost } else { 1.0 })
            .collect();
        let weights = ClassWeights::from_labels(combined.iter().map(|s| s.label))?;
        let tune_cfg = TrainConfig { epochs, ..cfg.train.clone() };
        let test_keys: HashSet<SampleKey> = own_set.test.iter().map(Sample::key).collect();
        log::info!(
            "patient {patient_id}: fine-tuning on {} samples ({} from the patient, weight {boost})",
            combined.len(),
            own_set.train.len() + own_set.validation.len()
        );
        let history = {
            let mut watch = |e: &BatchEvent| {
                hygiene.finetune_batches += 1;
                hygiene.finetune_test_samples += e.samples.iter().filter(|s| test_keys.contains(&s.key())).count();
            };
            train(
                &mut tuned,
                &combined,
                &refs(&pool_set.validation),
                weights,
                Some(&sample_weights),
                &tune_cfg,
                Some(&mut watch),
            )?
        };
        (tuned, Some(history))
    };
    if hygiene.base_held_out_samples > 0 || hygiene.finetune_test_samples > 0 {
        return Err(Error::Contract(format!(
            "held-out data leaked into training for patient {patient_id}: {hygiene:?}"
        )));
    }
    let after = evaluate_model(&model, &test)?;
    let mut prov = provenance(cfg, "personalize", cfg.model.architecture, Some(&base_history), Some(patient_id));
    if let Some(h) = &finetune_history {
        prov.epochs_completed += h.epochs.len();
        prov.optimizer_steps += h.optimizer_steps;
    }
    Ok(PersonalizationRun {
        patient_id: patient_id.to_string(),
        before,
        after,
        base_history,
        finetune_history,
        model,
        hygiene,
        provenance: prov,
    })
}

/// Runs personalization for each listed patient; rows come back sorted by patient id.
pub fn run_personalization_all(
    cfg: &ExperimentConfig,
    samples: &[Sample],
    patient_ids: &[String],
) -> Result<Vec<PersonalizationRun>> {
    let mut ids = patient_ids.to_vec();
    ids.sort();
    ids.dedup();
    ids.iter().map(|p| run_personalization(cfg, samples, p)).collect()
}

/// Every patient id present in `samples`, sorted.
pub fn patient_ids(samples: &[Sample]) -> Vec<String> {
    patients(samples).into_iter().map(str::to_string).collect()
}

/// Scores a checkpoint on the test portion of the configured general split.
pub fn run_evaluate(cfg: &ExperimentConfig, samples: &[Sample], checkpoint: &Path) -> Result<MetricsReport> {
    let ckpt = load_checkpoint(checkpoint, Some(cfg.model.architecture))?;
    let shape = cfg.window.window_shape()?;
    if ckpt.model.input_shape != shape {
        return Err(Error::Config(format!(
            "checkpoint expects windows of {:?}, config produces {shape:?}",
            ckpt.model.input_shape
        )));
    }
    let set = general_split(cfg, samples)?;
    evaluate_model(&ckpt.model, &refs(&set.test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ArchitectureReport {
    architecture: Architecture,
    report: MetricsReport,
}

/// Reports as stored on disk so `report` can re-render them.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
struct StoredReports {
    expected_patients: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    general: Option<MetricsReport>,
    architectures: Vec<ArchitectureReport>,
    patients: Vec<PatientComparison>,
}

impl From<&ReportSet> for StoredReports {
    fn from(r: &ReportSet) -> Self {
        StoredReports {
            expected_patients: r.expected_patients.clone(),
            general: r.general.clone(),
            architectures: r
                .architectures
                .iter()
                .map(|(a, rep)| ArchitectureReport {
                    architecture: *a,
                    report: rep.clone(),
                })
                .collect(),
            patients: r.patients.clone(),
        }
    }
}

impl From<StoredReports> for ReportSet {
    fn from(s: StoredReports) -> Self {
        ReportSet {
            general: s.general,
            architectures: s.architectures.into_iter().map(|a| (a.architecture, a.report)).collect(),
            patients: s.patients,
            expected_patients: s.expected_patients,
        }
    }
}

pub fn save_report_set(dir: &Path, set: &ReportSet) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(REPORTS_FILE);
    let text = toml::to_string(&StoredReports::from(set))
        .map_err(|e| Error::Contract(format!("serializing reports: {e}")))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn load_report_set(dir: &Path) -> Result<ReportSet> {
    let path = dir.join(REPORTS_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let stored: StoredReports = toml::from_str(&text)
        .map_err(|e| Error::Data(format!("{}: {}", path.display(), e.message())))?;
    Ok(stored.into())
}

/// Renders every layout the set has data for.
pub fn render_available(set: &ReportSet) -> Result<Vec<ReportFile>> {
    let mut files = Vec::new();
    if set.general.is_some() {
        files.extend(render_reports(set, Layout::General)?);
    }
    if !set.architectures.is_empty() {
        files.extend(render_reports(set, Layout::ArchitectureComparison)?);
    }
    if !set.patients.is_empty() {
        files.extend(render_reports(set, Layout::PerPatientBeforeAfter)?);
        files.extend(render_reports(set, Layout::Appendix)?);
    }
    if files.is_empty() {
        return Err(Error::Contract("report set is empty".into()));
    }
    Ok(files)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn finish(dir: &Path, set: &ReportSet) -> Result<Vec<PathBuf>> {
    let files = render_available(set)?;
    write_report_files(dir, &files)?;
    save_report_set(dir, set)?;
    Ok(files.iter().map(|f| dir.join(&f.name)).collect())
}

/// Writes the general-model report, training history, checkpoint and provenance.
pub fn write_general(dir: &Path, run: &GeneralRun) -> Result<Vec<PathBuf>> {
    let set = ReportSet {
        general: Some(run.report.clone()),
        ..ReportSet::default()
    };
    let written = finish(dir, &set)?;
    write_text(&dir.join(HISTORY_FILE), &run.history.to_csv())?;
    save_checkpoint(&run.model, &run.provenance, &dir.join(MODEL_FILE))?;
    write_provenance(dir, std::slice::from_ref(&run.provenance))?;
    Ok(written)
}

pub fn write_comparison(dir: &Path, runs: &[GeneralRun]) -> Result<Vec<PathBuf>> {
    let set = ReportSet {
        architectures: runs.iter().map(|r| (r.architecture, r.report.clone())).collect(),
        ..ReportSet::default()
    };
    let written = finish(dir, &set)?;
    for r in runs {
        let tag = r.architecture.tag();
        write_text(&dir.join(format!("history_{tag}.csv")), &r.history.to_csv())?;
        save_checkpoint(&r.model, &r.provenance, &dir.join(format!("{tag}.ckpt")))?;
    }
    let provs: Vec<Provenance> = runs.iter().map(|r| r.provenance.clone()).collect();
    write_provenance(dir, &provs)?;
    Ok(written)
}

/// Writes the before/after summary and appendix tables (rows sorted by
/// patient id), per-patient histories and personalized checkpoints.
pub fn write_personalization(dir: &Path, runs: &[PersonalizationRun]) -> Result<Vec<PathBuf>> {
    let mut sorted: Vec<&PersonalizationRun> = runs.iter().collect();
    sorted.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    let set = ReportSet {
        patients: sorted
            .iter()
            .map(|r| PatientComparison {
                patient_id: r.patient_id.clone(),
                before: r.before.clone(),
                after: r.after.clone(),
            })
            .collect(),
        expected_patients: sorted.iter().map(|r| r.patient_id.clone()).collect(),
        ..ReportSet::default()
    };
    let written = finish(dir, &set)?;
    for r in &sorted {
        let pid = &r.patient_id;
        write_text(&dir.join(format!("history_{pid}_base.csv")), &r.base_history.to_csv())?;
        if let Some(h) = &r.finetune_history {
            write_text(&dir.join(format!("history_{pid}_finetune.csv")), &h.to_csv())?;
        }
        save_checkpoint(&r.model, &r.provenance, &dir.join(format!("{pid}.ckpt")))?;
    }
    let provs: Vec<Provenance> = sorted.iter().map(|r| r.provenance.clone()).collect();
    write_provenance(dir, &provs)?;
    Ok(written)
}
