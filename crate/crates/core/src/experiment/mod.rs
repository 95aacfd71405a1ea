//! Experiment configuration, checkpoints, and the general, architecture
//! comparison and personalization runs.

mod checkpoint;
mod config;
mod provenance;
mod run;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::{DataConfig, DataSource, ExperimentConfig, ModelConfig, PersonalizationConfig};
pub use provenance::{software_version, write_provenance, Provenance, PROVENANCE_FILE};
pub use run::{
    general_split, load_recordings, load_report_set, load_samples, patient_ids, prepare_archive,
    render_available, run_architecture_comparison, run_evaluate, run_general, run_personalization,
    run_personalization_all, save_report_set, synthesize_corpus, write_comparison, write_general,
    write_personalization, GeneralRun, Hygiene, PersonalizationRun, HISTORY_FILE, MODEL_FILE, REPORTS_FILE,
};
