//! Small synthetic corpora and configs for end-to-end tests.

use std::fs;
use std::path::{Path, PathBuf};

use preictal::experiment::ExperimentConfig;

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn shipped_config(name: &str) -> ExperimentConfig {
    ExperimentConfig::load_unchecked(&repo_root().join("configs").join(name)).unwrap()
}

const CHANNELS: &str = r#"
[channels.BVP]
rate_hz = 8.0
mean = 0.0
std = 40.0

[channels.EDA]
rate_hz = 4.0
mean = 2.0
std = 0.5
drift = 3.0

[channels.HR]
rate_hz = 1.0
mean = 75.0
std = 6.0
drift = 3.0

[channels.TEMP]
rate_hz = 4.0
mean = 33.0
std = 0.4
drift = -2.0

[channels.ACC_X]
rate_hz = 4.0
mean = 0.0
std = 0.3

[channels.ACC_Y]
rate_hz = 4.0
mean = 0.0
std = 0.3

[channels.ACC_Z]
rate_hz = 4.0
mean = 1.0
std = 0.3
drift = 2.0
"#;

/// Three 3-hour patients with two seizures each.
pub fn tiny_profile() -> String {
    let mut s = format!("ramp_minutes = 30.0\nhorizon_minutes = 30.0\n{CHANNELS}");
    for (i, pid) in ["A01", "B02", "C03"].iter().enumerate() {
        s += &format!(
            "\n[[patient]]\npatient_id = \"{pid}\"\nseed = {}\nduration_hours = 3.0\nseizures = [{{ onset_hours = 1.5 }}, {{ onset_hours = 2.7 }}]\n",
            i + 1
        );
    }
    s
}

/// Config text for a tiny model on `profile.toml` in the same directory.
pub fn tiny_config(source: &str) -> String {
    format!(
        r#"seed = 1
output_dir = "out"

[data]
source = "{source}"
profile = "profile.toml"
corpus_dir = "corpus"
archive_dir = "archive"

[window]
preictal_horizon_minutes = 30.0
interictal_exclusion_minutes = 30.0
postictal_buffer_minutes = 30.0

[model.hyper]
conv_filters = [4]
lstm_hidden = 4
dense_units = 4

[train]
epochs = 2
"#
    )
}

/// Writes the tiny profile and config into `dir`; returns the config path.
pub fn write_tiny(dir: &Path, source: &str) -> PathBuf {
    fs::write(dir.join("profile.toml"), tiny_profile()).unwrap();
    let path = dir.join("experiment.config");
    fs::write(&path, tiny_config(source)).unwrap();
    path
}

pub fn tiny(dir: &Path) -> ExperimentConfig {
    ExperimentConfig::load(&write_tiny(dir, "synthetic")).unwrap()
}

/// Every regular file under `dir` as (relative path, bytes), sorted.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Runs the general model and personalization for every patient, writes
/// both into `out`, and returns the written files.
pub fn pipeline_snapshot(cfg: &ExperimentConfig, out: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    use preictal::experiment::*;
    let samples = load_samples(cfg).unwrap();
    write_general(&out.join("general"), &run_general(cfg, &samples).unwrap()).unwrap();
    let runs = run_personalization_all(cfg, &samples, &patient_ids(&samples)).unwrap();
    write_personalization(&out.join("personalize"), &runs).unwrap();
    snapshot(out)
}
