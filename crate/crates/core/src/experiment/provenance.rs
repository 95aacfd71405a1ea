use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Architecture;

pub const PROVENANCE_FILE: &str = "provenance.toml";

/// `<crate version>+<git describe>` of the running build.
pub fn software_version() -> String {
    format!(
        "{}+{}",
        env!("CARGO_PKG_VERSION"),
        env!("PREICTAL_GIT_DESCRIBE")
    )
}

/// What is needed to reproduce a run. Deliberately free of timestamps and
/// host details so identical runs produce identical records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub software_version: String,
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub split_seed: u64,
    pub architecture: Architecture,
    pub epochs_completed: usize,
    pub optimizer_steps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held_out_patient: Option<String>,
}

#[derive(Serialize)]
struct ProvenanceLog<'a> {
    run: &'a [Provenance],
}

/// Writes one `[[run]]` entry per trained model.
pub fn write_provenance(dir: &Path, runs: &[Provenance]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(PROVENANCE_FILE);
    let text = toml::to_string(&ProvenanceLog { run: runs }).expect("provenance serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}
