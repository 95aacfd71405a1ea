use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::signal::{acc_magnitude, grid_period_ms, resample, Channel, ChannelSeries};
use crate::error::{Error, Result};

/// Gaps between consecutive timestamps longer than this start a new segment.
pub const MAX_GAP_MS: i64 = 5_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeizureAnnotation {
    pub patient_id: String,
    pub seizure_id: String,
    pub onset_time_ms: i64,
    pub seizure_type: String,
    /// Per-seizure pre-ictal horizon overriding the windowing default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_minutes: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelEntry {
    pub path: PathBuf,
    pub rate_hz: f64,
}

/// Per-patient manifest: channel files with native rates plus annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatientManifest {
    pub patient_id: String,
    pub annotations: PathBuf,
    pub channels: BTreeMap<Channel, ChannelEntry>,
}

impl PatientManifest {
    pub const FILE_NAME: &'static str = "manifest.toml";

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text)
            .map_err(|e| Error::Ingestion(format!("{}: {}", path.display(), e.message())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

/// Everything ingested for one patient. Each channel holds one series per
/// contiguous segment, in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub patient_id: String,
    pub channels: BTreeMap<Channel, Vec<ChannelSeries>>,
    pub annotations: Vec<SeizureAnnotation>,
}

fn parse_f64(field: &str, what: &str, path: &Path, line: u64) -> Result<f64> {
    let t = field.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    t.parse().map_err(|_| {
        Error::Data(format!("{}:{line}: invalid {what} {t:?}", path.display()))
    })
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn check_header(reader: &mut csv::Reader<fs::File>, path: &Path, want: &[&str]) -> Result<()> {
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let got: Vec<&str> = headers.iter().collect();
    if got.len() < want.len() || got[..want.len()] != *want {
        return Err(Error::Data(format!(
            "{}: expected header {:?}, found {:?}",
            path.display(),
            want.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

/// Reads a `timestamp_ms,value` file. Samples are placed on the declared
/// native-rate grid; short gaps become NaN and gaps above [`MAX_GAP_MS`]
/// split the series.
pub fn read_channel_csv(
    path: &Path,
    patient_id: &str,
    channel: Channel,
    rate_hz: f64,
) -> Result<Vec<ChannelSeries>> {
    if !(rate_hz > 0.0) || !rate_hz.is_finite() {
        return Err(Error::Ingestion(format!(
            "channel {channel} declares invalid rate {rate_hz}"
        )));
    }
    let mut reader = csv_reader(path)?;
    check_header(&mut reader, path, &["timestamp_ms", "value"])?;
    let mut segments: Vec<ChannelSeries> = Vec::new();
    let mut prev: Option<i64> = None;
    let period = 1000.0 / rate_hz;
    for (row, record) in reader.records().enumerate() {
        let line = row as u64 + 2;
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        if record.len() < 2 {
            return Err(Error::Data(format!("{}:{line}: expected 2 fields", path.display())));
        }
        let ts: i64 = record[0].trim().parse().map_err(|_| {
            Error::Data(format!("{}:{line}: invalid timestamp {:?}", path.display(), &record[0]))
        })?;
        let value = parse_f64(&record[1], "value", path, line)?;
        if let Some(p) = prev {
            if ts <= p {
                return Err(Error::Data(format!(
                    "{}:{line}: timestamps not strictly increasing ({ts} after {p})",
                    path.display()
                )));
            }
        }
        let new_segment = prev.is_none_or(|p| ts - p > MAX_GAP_MS);
        prev = Some(ts);
        if new_segment {
            segments.push(ChannelSeries {
                patient_id: patient_id.to_string(),
                channel,
                start_time_ms: ts,
                sample_rate: rate_hz,
                values: vec![value],
            });
            continue;
        }
        let seg = segments.last_mut().expect("segment exists");
        let idx = ((ts - seg.start_time_ms) as f64 / period).round() as usize;
        if idx < seg.values.len() {
            return Err(Error::Data(format!(
                "{}:{line}: timestamp {ts} collides with an earlier sample at {rate_hz} Hz",
                path.display()
            )));
        }
        seg.values.resize(idx, f64::NAN);
        seg.values.push(value);
    }
    if segments.is_empty() {
        return Err(Error::Data(format!("{}: no samples", path.display())));
    }
    Ok(segments)
}

/// Reads `seizure_id,onset_ms,type[,horizon_minutes]`.
pub fn read_annotations(path: &Path, patient_id: &str) -> Result<Vec<SeizureAnnotation>> {
    let mut reader = csv_reader(path)?;
    check_header(&mut reader, path, &["seizure_id", "onset_ms", "type"])?;
    let mut out: Vec<SeizureAnnotation> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row as u64 + 2;
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        if record.len() < 3 {
            return Err(Error::Data(format!("{}:{line}: expected 3 fields", path.display())));
        }
        let onset: i64 = record[1].trim().parse().map_err(|_| {
            Error::Data(format!("{}:{line}: invalid onset {:?}", path.display(), &record[1]))
        })?;
        let horizon = match record.get(3).map(str::trim) {
            None | Some("") => None,
            Some(h) => {
                let v: f64 = h.parse().map_err(|_| {
                    Error::Data(format!("{}:{line}: invalid horizon {h:?}", path.display()))
                })?;
                if !(v > 0.0) {
                    return Err(Error::Data(format!(
                        "{}:{line}: horizon must be positive",
                        path.display()
                    )));
                }
                Some(v)
            }
        };
        if let Some(last) = out.last() {
            if onset <= last.onset_time_ms {
                return Err(Error::Data(format!(
                    "{}:{line}: seizure onsets not strictly increasing",
                    path.display()
                )));
            }
        }
        out.push(SeizureAnnotation {
            patient_id: patient_id.to_string(),
            seizure_id: record[0].to_string(),
            onset_time_ms: onset,
            seizure_type: record[2].to_string(),
            horizon_minutes: horizon,
        });
    }
    Ok(out)
}

/// Loads one patient directory described by `manifest` (paths relative to
/// `dir`). ACC_MAG is taken from the manifest if present, otherwise derived
/// from ACC_X/Y/Z.
pub fn ingest_patient(dir: &Path, manifest: &PatientManifest) -> Result<Recording> {
    let pid = &manifest.patient_id;
    let mut channels = BTreeMap::new();
    let has_mag = manifest.channels.contains_key(&Channel::AccMag);
    let mut required = vec![Channel::Bvp, Channel::Eda, Channel::Hr, Channel::Temp];
    if has_mag {
        required.push(Channel::AccMag);
    } else {
        required.extend([Channel::AccX, Channel::AccY, Channel::AccZ]);
    }
    for ch in required {
        let entry = manifest
            .channels
            .get(&ch)
            .ok_or_else(|| Error::Ingestion(format!("channel {ch} absent")))?;
        let path = dir.join(&entry.path);
        if !path.is_file() {
            return Err(Error::Ingestion(format!(
                "channel {ch} absent: {} not found",
                path.display()
            )));
        }
        channels.insert(ch, read_channel_csv(&path, pid, ch, entry.rate_hz)?);
    }
    if !has_mag {
        let mag = magnitude_segments(&channels[&Channel::AccX], &channels[&Channel::AccY], &channels[&Channel::AccZ])?;
        for ch in [Channel::AccX, Channel::AccY, Channel::AccZ] {
            channels.remove(&ch);
        }
        channels.insert(Channel::AccMag, mag);
    }
    let ann_path = dir.join(&manifest.annotations);
    if !ann_path.is_file() {
        return Err(Error::Ingestion(format!(
            "annotations absent: {} not found",
            ann_path.display()
        )));
    }
    Ok(Recording {
        patient_id: pid.clone(),
        channels,
        annotations: read_annotations(&ann_path, pid)?,
    })
}

/// Loads `<dir>/manifest.toml` and the files it names.
pub fn ingest_patient_dir(dir: &Path) -> Result<Recording> {
    let manifest = PatientManifest::load(&dir.join(PatientManifest::FILE_NAME))?;
    ingest_patient(dir, &manifest)
}

fn magnitude_segments(
    x: &[ChannelSeries],
    y: &[ChannelSeries],
    z: &[ChannelSeries],
) -> Result<Vec<ChannelSeries>> {
    if x.len() != y.len() || x.len() != z.len() {
        return Err(Error::Ingestion("ACC axes have different segment counts".into()));
    }
    x.iter()
        .zip(y)
        .zip(z)
        .map(|((a, b), c)| {
            if a.start_time_ms != b.start_time_ms
                || a.start_time_ms != c.start_time_ms
                || a.sample_rate != b.sample_rate
                || a.sample_rate != c.sample_rate
            {
                return Err(Error::Ingestion(format!(
                    "ACC axes are not aligned at {} ms",
                    a.start_time_ms
                )));
            }
            Ok(ChannelSeries {
                patient_id: a.patient_id.clone(),
                channel: Channel::AccMag,
                start_time_ms: a.start_time_ms,
                sample_rate: a.sample_rate,
                values: acc_magnitude(&a.values, &b.values, &c.values)?,
            })
        })
        .collect()
}

/// The five model channels on one shared grid. Grid point `i` sits at
/// `start_time_ms + i · period_ms`; NaN marks missing data.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedRecording {
    pub patient_id: String,
    pub start_time_ms: i64,
    pub period_ms: i64,
    /// Indexed like [`Channel::SAMPLE_ORDER`].
    pub channels: Vec<Vec<f64>>,
    /// Grid indices at which a new recording segment begins (always starts with 0).
    pub segment_starts: Vec<usize>,
    pub annotations: Vec<SeizureAnnotation>,
}

impl AlignedRecording {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time_ms(&self, i: usize) -> i64 {
        self.start_time_ms + i as i64 * self.period_ms
    }

    /// Segment containing grid index `i`.
    pub fn segment_of(&self, i: usize) -> usize {
        self.segment_starts.partition_point(|&s| s <= i) - 1
    }
}

/// Resamples every segment of the five model channels to `rate` and lays
/// them on one grid spanning the union of all segments.
pub fn align(recording: &Recording, rate: f64) -> Result<AlignedRecording> {
    let period = grid_period_ms(rate)?;
    let mut resampled: Vec<Vec<ChannelSeries>> = Vec::new();
    for ch in Channel::SAMPLE_ORDER {
        let segs = recording
            .channels
            .get(&ch)
            .ok_or_else(|| Error::Ingestion(format!("channel {ch} absent")))?;
        let mut out = Vec::new();
        for s in segs {
            if s.values.len() < 2 {
                log::warn!(
                    "{}: dropping {ch} segment at {} ms with fewer than 2 samples",
                    recording.patient_id,
                    s.start_time_ms
                );
                continue;
            }
            match resample(s, rate) {
                Ok(r) => out.push(r),
                Err(Error::Contract(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        resampled.push(out);
    }
    let first = resampled
        .iter()
        .flatten()
        .map(|s| s.start_time_ms)
        .min()
        .ok_or_else(|| {
            Error::DegenerateData(format!("{}: no usable signal", recording.patient_id))
        })?;
    let end = resampled
        .iter()
        .flatten()
        .map(|s| s.start_time_ms + s.values.len() as i64 * period)
        .max()
        .expect("non-empty");
    let len = ((end - first) / period) as usize;
    let mut channels = vec![vec![f64::NAN; len]; Channel::SAMPLE_ORDER.len()];
    let mut starts = vec![0usize];
    for (c, segs) in resampled.iter().enumerate() {
        for (k, s) in segs.iter().enumerate() {
            let offset = ((s.start_time_ms - first) / period) as usize;
            channels[c][offset..offset + s.values.len()].copy_from_slice(&s.values);
            if k > 0 {
                starts.push(offset);
            }
        }
    }
    starts.sort_unstable();
    starts.dedup();
    Ok(AlignedRecording {
        patient_id: recording.patient_id.clone(),
        start_time_ms: first,
        period_ms: period,
        channels,
        segment_starts: starts,
        annotations: recording.annotations.clone(),
    })
}
