use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sample::{Sample, NUM_CHANNELS, SAMPLE_CHANNELS};
use super::split::{Part, SplitSet};
use super::window::WindowParams;
use crate::error::{Error, Result};

pub const ARCHIVE_MAGIC: &[u8; 8] = b"PSEIZ001";
pub const ARCHIVE_MANIFEST: &str = "archive.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchiveManifest {
    pub format: String,
    pub rows: usize,
    pub channels: Vec<String>,
    pub split_seed: u64,
    /// Windows are stored before robust scaling.
    pub scaled: bool,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub window: WindowParams,
}

fn blob_name(p: Part) -> String {
    format!("{}.bin", p.name())
}

fn sidecar_name(p: Part) -> String {
    format!("{}.csv", p.name())
}

fn write_part(dir: &Path, part: Part, samples: &[Sample], rows: usize) -> Result<()> {
    let path = dir.join(blob_name(part));
    let io = |e| Error::io(&path, e);
    let mut w = BufWriter::new(fs::File::create(&path).map_err(io)?);
    let n = u32::try_from(samples.len())
        .map_err(|_| Error::Contract("too many samples for the archive format".into()))?;
    w.write_all(ARCHIVE_MAGIC).map_err(io)?;
    w.write_all(&n.to_le_bytes()).map_err(io)?;
    w.write_all(&(rows as u32).to_le_bytes()).map_err(io)?;
    for s in samples {
        if s.window.len() != rows * NUM_CHANNELS {
            return Err(Error::Contract(format!(
                "sample {}@{} has {} values, expected {}",
                s.patient_id,
                s.window_start_ms,
                s.window.len(),
                rows * NUM_CHANNELS
            )));
        }
        for v in &s.window {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)?;

    let path = dir.join(sidecar_name(part));
    let mut csv = csv::Writer::from_path(&path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    csv.write_record(["label", "patient_id", "window_start_ms", "source_segment_id"])
        .map_err(err)?;
    for s in samples {
        csv.write_record([
            s.label.to_string(),
            s.patient_id.clone(),
            s.window_start_ms.to_string(),
            s.source_segment_id.to_string(),
        ])
        .map_err(err)?;
    }
    csv.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}

fn read_part(dir: &Path, part: Part, rows: usize) -> Result<Vec<Sample>> {
    let path = dir.join(blob_name(part));
    let mut bytes = Vec::new();
    fs::File::open(&path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(&path, e))?;
    if bytes.len() < 16 || &bytes[..8] != ARCHIVE_MAGIC {
        return Err(Error::Data(format!("{}: not a sample archive blob", path.display())));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let t = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    if t != rows {
        return Err(Error::Data(format!(
            "{}: window length {t} does not match manifest {rows}",
            path.display()
        )));
    }
    let per = t * NUM_CHANNELS;
    if bytes.len() != 16 + n * per * 8 {
        return Err(Error::Data(format!(
            "{}: expected {} bytes for {n} windows, found {}",
            path.display(),
            16 + n * per * 8,
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();

    let side = dir.join(sidecar_name(part));
    let mut reader = csv::Reader::from_path(&side).map_err(|e| Error::Data(format!("{}: {e}", side.display())))?;
    let mut samples = Vec::with_capacity(n);
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(format!("{}: {e}", side.display())))?;
        if i >= n || rec.len() != 4 {
            return Err(Error::Data(format!("{}: row {} is malformed or extra", side.display(), i + 2)));
        }
        let bad = |what: &str| Error::Data(format!("{}: row {}: invalid {what}", side.display(), i + 2));
        let label: u8 = rec[0].parse().map_err(|_| bad("label"))?;
        if label > 1 {
            return Err(bad("label"));
        }
        samples.push(Sample {
            window: values[i * per..(i + 1) * per].to_vec(),
            label,
            patient_id: rec[1].to_string(),
            window_start_ms: rec[2].parse().map_err(|_| bad("window_start_ms"))?,
            source_segment_id: rec[3].parse().map_err(|_| bad("source_segment_id"))?,
        });
    }
    if samples.len() != n {
        return Err(Error::Data(format!(
            "{}: {} rows for {n} windows",
            side.display(),
            samples.len()
        )));
    }
    Ok(samples)
}

/// Writes a split to `dir`: one binary blob and one sidecar CSV per part
/// plus a manifest.
pub fn write_archive(dir: &Path, split: &SplitSet, window: &WindowParams) -> Result<ArchiveManifest> {
    let rows = window.validate()?.rows;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for p in Part::ALL {
        write_part(dir, p, split.part(p), rows)?;
    }
    let manifest = ArchiveManifest {
        format: String::from_utf8_lossy(ARCHIVE_MAGIC).into_owned(),
        rows,
        channels: SAMPLE_CHANNELS.iter().map(|c| c.to_string()).collect(),
        split_seed: split.split_seed,
        scaled: false,
        train: split.train.len(),
        validation: split.validation.len(),
        test: split.test.len(),
        window: window.clone(),
    };
    let path = dir.join(ARCHIVE_MANIFEST);
    let text = toml::to_string(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_archive(dir: &Path) -> Result<(SplitSet, ArchiveManifest)> {
    let path = dir.join(ARCHIVE_MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: ArchiveManifest =
        toml::from_str(&text).map_err(|e| Error::Data(format!("{}: {}", path.display(), e.message())))?;
    if manifest.format.as_bytes() != ARCHIVE_MAGIC {
        return Err(Error::Data(format!("{}: unknown format {}", path.display(), manifest.format)));
    }
    let mut split = SplitSet {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        split_seed: manifest.split_seed,
    };
    for p in Part::ALL {
        *split.part_mut(p) = read_part(dir, p, manifest.rows)?;
    }
    let counts = [manifest.train, manifest.validation, manifest.test];
    if counts != [split.train.len(), split.validation.len(), split.test.len()] {
        return Err(Error::Data(format!("{}: part counts disagree with blobs", path.display())));
    }
    Ok((split, manifest))
}
