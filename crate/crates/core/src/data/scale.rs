use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::sample::{Sample, NUM_CHANNELS};
use super::signal::RobustScaler;
use super::split::SplitSet;
use crate::error::{Error, Result};

/// One robust scaler per model channel for a single patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientScaler {
    pub channels: Vec<RobustScaler>,
}

impl PatientScaler {
    /// Fits every channel on all rows of the given windows.
    pub fn fit<'a>(windows: impl IntoIterator<Item = &'a Sample>) -> Result<Self> {
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); NUM_CHANNELS];
        for s in windows {
            for (c, col) in columns.iter_mut().enumerate() {
                col.extend(s.channel(c));
            }
        }
        let channels = columns
            .iter()
            .map(|c| RobustScaler::fit(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(PatientScaler { channels })
    }

    pub fn apply(&self, sample: &mut Sample) {
        for (i, v) in sample.window.iter_mut().enumerate() {
            *v = self.channels[i % NUM_CHANNELS].apply(*v);
        }
    }
}

pub type ScalerSet = BTreeMap<String, PatientScaler>;

/// Fits one scaler per patient on that patient's windows in `fit_on`.
pub fn fit_scalers<'a>(fit_on: impl IntoIterator<Item = &'a Sample>) -> Result<ScalerSet> {
    let mut grouped: BTreeMap<&str, Vec<&Sample>> = BTreeMap::new();
    for s in fit_on {
        grouped.entry(s.patient_id.as_str()).or_default().push(s);
    }
    grouped
        .into_iter()
        .map(|(pid, samples)| Ok((pid.to_string(), PatientScaler::fit(samples)?)))
        .collect()
}

pub fn apply_scalers<'a>(scalers: &ScalerSet, samples: impl IntoIterator<Item = &'a mut Sample>) -> Result<()> {
    for s in samples {
        let scaler = scalers.get(&s.patient_id).ok_or_else(|| {
            Error::DegenerateData(format!("no scaler fitted for patient {}", s.patient_id))
        })?;
        scaler.apply(s);
    }
    Ok(())
}

/// Fits per-patient scalers on each patient's training windows and applies
/// them to every part. A patient with no training windows is fitted on its
/// validation windows instead; test windows are never used for fitting.
pub fn scale_split(split: &mut SplitSet) -> Result<ScalerSet> {
    let mut scalers = fit_scalers(&split.train)?;
    let missing: BTreeSet<String> = split
        .iter()
        .map(|s| s.patient_id.clone())
        .filter(|p| !scalers.contains_key(p))
        .collect();
    if !missing.is_empty() {
        let fallback = fit_scalers(split.validation.iter().filter(|s| missing.contains(&s.patient_id)))?;
        for (pid, sc) in fallback {
            log::warn!("patient {pid} has no training windows; scaler fitted on validation windows");
            scalers.insert(pid, sc);
        }
    }
    apply_scalers(&scalers, split.train.iter_mut())?;
    apply_scalers(&scalers, split.validation.iter_mut())?;
    apply_scalers(&scalers, split.test.iter_mut())?;
    Ok(scalers)
}
