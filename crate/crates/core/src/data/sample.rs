use serde::{Deserialize, Serialize};

/// Model input channel order for every window.
pub const SAMPLE_CHANNELS: [&str; 5] = ["BVP", "EDA", "HR", "ACC_MAG", "TEMP"];
pub const NUM_CHANNELS: usize = SAMPLE_CHANNELS.len();

/// One labeled multichannel window, stored row-major as `[rows × 5]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub window: Vec<f64>,
    /// 0 = interictal, 1 = pre-ictal.
    pub label: u8,
    pub patient_id: String,
    pub window_start_ms: i64,
    pub source_segment_id: u32,
}

/// Identity of a sample within a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SampleKey {
    pub patient_id: String,
    pub window_start_ms: i64,
}

impl Sample {
    pub fn rows(&self) -> usize {
        self.window.len() / NUM_CHANNELS
    }

    pub fn key(&self) -> SampleKey {
        SampleKey {
            patient_id: self.patient_id.clone(),
            window_start_ms: self.window_start_ms,
        }
    }

    pub fn channel(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.window.iter().skip(c).step_by(NUM_CHANNELS).copied()
    }
}

/// Canonical corpus order: by patient, then window start.
pub fn sort_canonical(samples: &mut [Sample]) {
    samples.sort_by(|a, b| {
        a.patient_id
            .cmp(&b.patient_id)
            .then(a.window_start_ms.cmp(&b.window_start_ms))
    });
}
