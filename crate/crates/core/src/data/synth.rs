use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ingest::{ingest_patient_dir, ChannelEntry, PatientManifest, Recording, SeizureAnnotation};
use super::signal::{acc_magnitude, Channel, ChannelSeries};
use crate::error::{Error, Result};

/// 2020-01-01T00:00:00Z.
pub const DEFAULT_START_MS: i64 = 1_577_836_800_000;

/// Channels a synthetic patient is generated with.
pub const SYNTH_CHANNELS: [Channel; 7] = [
    Channel::Bvp,
    Channel::Eda,
    Channel::Hr,
    Channel::Temp,
    Channel::AccX,
    Channel::AccY,
    Channel::AccZ,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelProfile {
    pub rate_hz: f64,
    pub mean: f64,
    pub std: f64,
    /// Mean shift reached at onset, in units of `std`.
    #[serde(default)]
    pub drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeizureSpec {
    pub onset_hours: f64,
    #[serde(default = "default_seizure_type", rename = "type")]
    pub seizure_type: String,
}

fn default_seizure_type() -> String {
    "Focal".into()
}

/// Fully resolved generator settings for one synthetic patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientProfile {
    pub patient_id: String,
    pub channels: BTreeMap<Channel, ChannelProfile>,
    /// Length of the linear pre-ictal drift before each onset.
    pub ramp_minutes: f64,
    /// Pre-ictal horizon written to the annotations; must cover the ramp.
    pub horizon_minutes: f64,
    pub seizures: Vec<SeizureSpec>,
    /// Multiplier on every channel's `std`.
    pub noise_level: f64,
    pub start_time_ms: i64,
    pub rng_seed: u64,
}

impl PatientProfile {
    pub fn validate(&self) -> Result<()> {
        if self.ramp_minutes < 0.0 || self.ramp_minutes > self.horizon_minutes {
            return Err(Error::Config(format!(
                "patient {}: ramp_minutes must be in [0, horizon_minutes]",
                self.patient_id
            )));
        }
        if !(self.noise_level >= 0.0) {
            return Err(Error::Config(format!(
                "patient {}: noise_level must be >= 0",
                self.patient_id
            )));
        }
        for ch in SYNTH_CHANNELS {
            let c = self.channels.get(&ch).ok_or_else(|| {
                Error::Config(format!("patient {}: channel {ch} missing", self.patient_id))
            })?;
            if !(c.rate_hz > 0.0) || !(c.std >= 0.0) {
                return Err(Error::Config(format!(
                    "patient {}: channel {ch} needs rate_hz > 0 and std >= 0",
                    self.patient_id
                )));
            }
        }
        Ok(())
    }
}

/// One `[[patient]]` entry of a profile file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatientEntry {
    pub patient_id: String,
    pub seed: u64,
    pub duration_hours: f64,
    pub seizures: Vec<SeizureSpec>,
    #[serde(default)]
    pub ramp_minutes: Option<f64>,
    #[serde(default)]
    pub horizon_minutes: Option<f64>,
    #[serde(default = "one")]
    pub noise_level: f64,
    /// Multiplies every channel's drift; negative values invert the signature.
    #[serde(default = "one")]
    pub drift_scale: f64,
    #[serde(default)]
    pub start_time_ms: Option<i64>,
}

fn one() -> f64 {
    1.0
}

/// A synthetic corpus description: shared channel baselines plus patients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileFile {
    pub ramp_minutes: f64,
    pub horizon_minutes: f64,
    pub channels: BTreeMap<Channel, ChannelProfile>,
    #[serde(rename = "patient")]
    pub patients: Vec<PatientEntry>,
}

impl ProfileFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    /// `(profile, duration_hours)` per patient.
    pub fn resolve(&self) -> Result<Vec<(PatientProfile, f64)>> {
        let mut ids = std::collections::BTreeSet::new();
        self.patients
            .iter()
            .map(|p| {
                if !ids.insert(p.patient_id.as_str()) {
                    return Err(Error::Config(format!("duplicate patient {}", p.patient_id)));
                }
                let channels = self
                    .channels
                    .iter()
                    .map(|(&ch, c)| {
                        let mut c = c.clone();
                        c.drift *= p.drift_scale;
                        (ch, c)
                    })
                    .collect();
                let profile = PatientProfile {
                    patient_id: p.patient_id.clone(),
                    channels,
                    ramp_minutes: p.ramp_minutes.unwrap_or(self.ramp_minutes),
                    horizon_minutes: p.horizon_minutes.unwrap_or(self.horizon_minutes),
                    seizures: p.seizures.clone(),
                    noise_level: p.noise_level,
                    start_time_ms: p.start_time_ms.unwrap_or(DEFAULT_START_MS),
                    rng_seed: p.seed,
                };
                profile.validate()?;
                Ok((profile, p.duration_hours))
            })
            .collect()
    }
}

fn to_csv_precision(v: f64) -> f64 {
    format!("{v:.4}").parse().expect("formatted float parses")
}

/// Synthetic recording: Gaussian noise around each channel mean, with the
/// mean drifting linearly to `drift · std` over the ramp before each onset.
/// Values are rounded to the four decimals the corpus files carry, so
/// in-memory and on-disk corpora are identical.
pub fn synth_generate(
    profile: &PatientProfile,
    duration_hours: f64,
) -> Result<(Vec<ChannelSeries>, Vec<SeizureAnnotation>)> {
    profile.validate()?;
    let duration_ms = duration_hours * 3_600_000.0;
    let ramp_ms = profile.ramp_minutes * 60_000.0;
    let mut onsets = Vec::new();
    for s in &profile.seizures {
        let o = s.onset_hours * 3_600_000.0;
        if o - ramp_ms < 0.0 || o >= duration_ms {
            return Err(Error::Contract(format!(
                "patient {}: seizure at {} h does not fit in {duration_hours} h with a {} min ramp",
                profile.patient_id, s.onset_hours, profile.ramp_minutes
            )));
        }
        if onsets.last().is_some_and(|&p| o <= p) {
            return Err(Error::Contract(format!(
                "patient {}: seizure onsets must be strictly increasing",
                profile.patient_id
            )));
        }
        onsets.push(o);
    }
    let ramp_at = |t: f64| -> f64 {
        onsets
            .iter()
            .find(|&&o| t >= o - ramp_ms && t < o)
            .map_or(0.0, |&o| if ramp_ms > 0.0 { (t - (o - ramp_ms)) / ramp_ms } else { 0.0 })
    };

    let mut series = Vec::new();
    for (ci, ch) in SYNTH_CHANNELS.into_iter().enumerate() {
        let c = &profile.channels[&ch];
        let n = (duration_ms * c.rate_hz / 1000.0).floor() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(profile.rng_seed.wrapping_mul(1_000_003).wrapping_add(ci as u64));
        let noise = Normal::new(0.0, c.std * profile.noise_level)
            .map_err(|e| Error::Config(format!("channel {ch}: {e}")))?;
        let values = (0..n)
            .map(|i| {
                let t = i as f64 * 1000.0 / c.rate_hz;
                to_csv_precision(c.mean + c.drift * c.std * ramp_at(t) + noise.sample(&mut rng))
            })
            .collect();
        series.push(ChannelSeries {
            patient_id: profile.patient_id.clone(),
            channel: ch,
            start_time_ms: profile.start_time_ms,
            sample_rate: c.rate_hz,
            values,
        });
    }
    let annotations = profile
        .seizures
        .iter()
        .zip(&onsets)
        .enumerate()
        .map(|(i, (s, &o))| SeizureAnnotation {
            patient_id: profile.patient_id.clone(),
            seizure_id: format!("S{}", i + 1),
            onset_time_ms: profile.start_time_ms + o.round() as i64,
            seizure_type: s.seizure_type.clone(),
            horizon_minutes: Some(profile.horizon_minutes),
        })
        .collect();
    Ok((series, annotations))
}

/// In-memory equivalent of generating a patient and ingesting it: the
/// accelerometer axes are folded into ACC_MAG.
pub fn synth_recording(profile: &PatientProfile, duration_hours: f64) -> Result<Recording> {
    let (series, annotations) = synth_generate(profile, duration_hours)?;
    let mut channels: BTreeMap<Channel, Vec<ChannelSeries>> = BTreeMap::new();
    let mut axes = Vec::new();
    for s in series {
        match s.channel {
            Channel::AccX | Channel::AccY | Channel::AccZ => axes.push(s),
            ch => {
                channels.insert(ch, vec![s]);
            }
        }
    }
    let [x, y, z]: [ChannelSeries; 3] = axes
        .try_into()
        .map_err(|_| Error::Contract("synthetic patient lacks accelerometer axes".into()))?;
    if x.sample_rate != y.sample_rate || x.sample_rate != z.sample_rate {
        return Err(Error::Config(format!(
            "patient {}: ACC axes must share one rate",
            profile.patient_id
        )));
    }
    channels.insert(
        Channel::AccMag,
        vec![ChannelSeries {
            values: acc_magnitude(&x.values, &y.values, &z.values)?,
            channel: Channel::AccMag,
            ..x
        }],
    );
    Ok(Recording {
        patient_id: profile.patient_id.clone(),
        channels,
        annotations,
    })
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

/// Writes one patient directory in the ingestion CSV layout.
pub fn write_patient(
    dir: &Path,
    series: &[ChannelSeries],
    annotations: &[SeizureAnnotation],
) -> Result<PatientManifest> {
    let patient_id = series
        .first()
        .map(|s| s.patient_id.clone())
        .ok_or_else(|| Error::Contract("no series to write".into()))?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut channels = BTreeMap::new();
    for s in series {
        let file = format!("{}.csv", s.channel);
        let path = dir.join(&file);
        let mut w = create(&path)?;
        let io = io_at(&path);
        writeln!(w, "timestamp_ms,value").map_err(&io)?;
        for (i, v) in s.values.iter().enumerate() {
            writeln!(w, "{},{:.4}", s.time_ms(i).round() as i64, v).map_err(&io)?;
        }
        w.flush().map_err(&io)?;
        channels.insert(
            s.channel,
            ChannelEntry {
                path: PathBuf::from(file),
                rate_hz: s.sample_rate,
            },
        );
    }
    let ann = dir.join("annotations.csv");
    let mut w = create(&ann)?;
    let io = io_at(&ann);
    writeln!(w, "seizure_id,onset_ms,type,horizon_minutes").map_err(&io)?;
    for a in annotations {
        let h = a.horizon_minutes.map(|h| h.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{h}", a.seizure_id, a.onset_time_ms, a.seizure_type).map_err(&io)?;
    }
    w.flush().map_err(&io)?;
    let manifest = PatientManifest {
        patient_id,
        annotations: PathBuf::from("annotations.csv"),
        channels,
    };
    let mpath = dir.join(PatientManifest::FILE_NAME);
    fs::write(&mpath, manifest.to_toml()).map_err(|e| Error::io(&mpath, e))?;
    Ok(manifest)
}

/// Generates every patient of a profile file into `<out>/<patient_id>/`.
pub fn write_corpus(profiles: &ProfileFile, out: &Path) -> Result<Vec<String>> {
    let resolved = profiles.resolve()?;
    resolved
        .par_iter()
        .map(|(profile, hours)| {
            let (series, annotations) = synth_generate(profile, *hours)?;
            write_patient(&out.join(&profile.patient_id), &series, &annotations)?;
            Ok(profile.patient_id.clone())
        })
        .collect::<Vec<Result<String>>>()
        .into_iter()
        .collect()
}

/// Ingests every subdirectory of `dir` that holds a patient manifest, in
/// directory-name order.
pub fn ingest_corpus(dir: &Path) -> Result<Vec<Recording>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut dirs = Vec::new();
    for e in entries {
        let path = e.map_err(|e| Error::io(dir, e))?.path();
        if path.join(PatientManifest::FILE_NAME).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Ingestion(format!(
            "no patient directories with {} under {}",
            PatientManifest::FILE_NAME,
            dir.display()
        )));
    }
    dirs.par_iter()
        .map(|d| ingest_patient_dir(d))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}
