//! Ingestion, resampling, robust scaling, windowing, splitting, synthetic
//! patients, and the binary sample archive.

mod archive;
mod ingest;
mod sample;
mod scale;
mod signal;
mod split;
mod synth;
mod window;

use rayon::prelude::*;

pub use archive::{read_archive, write_archive, ArchiveManifest, ARCHIVE_MAGIC, ARCHIVE_MANIFEST};
pub use ingest::{
    align, ingest_patient, ingest_patient_dir, read_annotations, read_channel_csv, AlignedRecording,
    ChannelEntry, PatientManifest, Recording, SeizureAnnotation, MAX_GAP_MS,
};
pub use sample::{sort_canonical, Sample, SampleKey, NUM_CHANNELS, SAMPLE_CHANNELS};
pub use scale::{apply_scalers, fit_scalers, scale_split, PatientScaler, ScalerSet};
pub use signal::{
    acc_magnitude, grid_period_ms, quantile_sorted, resample, robust_scale, Channel, ChannelSeries,
    RobustScaled, RobustScaler,
};
pub use split::{part_sizes, split, split_indices, Part, SplitRatios, SplitSet, MIN_SPLIT_SAMPLES};
pub use synth::{
    ingest_corpus, synth_generate, synth_recording, write_corpus, write_patient, ChannelProfile, PatientEntry,
    PatientProfile, ProfileFile, SeizureSpec, DEFAULT_START_MS, SYNTH_CHANNELS,
};
pub use window::{classify_span, label_windows, WindowGeometry, WindowParams};

use crate::error::Result;

/// Aligns and windows every recording, returning unscaled samples in
/// canonical order.
pub fn window_recordings(recordings: &[Recording], params: &WindowParams) -> Result<Vec<Sample>> {
    params.validate()?;
    let per_patient: Vec<Result<Vec<Sample>>> = recordings
        .par_iter()
        .map(|r| label_windows(&align(r, params.common_rate_hz)?, params))
        .collect();
    let mut all = Vec::new();
    for p in per_patient {
        all.extend(p?);
    }
    sort_canonical(&mut all);
    Ok(all)
}
