//! Checkpoint round trips and corruption cases shared by the tests.

use std::path::Path;

use preictal::experiment::{load_checkpoint, save_checkpoint, software_version, Provenance};
use preictal::nn::{build_model, Architecture, Hyperparameters, Model};
use preictal::error::CheckpointFault;
use preictal::Error;

pub const INPUT: [usize; 2] = [24, 5];

pub fn small_model(arch: Architecture, seed: u64) -> Model {
    let hyper = Hyperparameters {
        conv_filters: vec![4, 6],
        lstm_hidden: 5,
        dense_units: 6,
        ..Hyperparameters::default()
    };
    build_model(arch, INPUT, &hyper, seed).unwrap()
}

pub fn provenance(arch: Architecture) -> Provenance {
    Provenance {
        software_version: software_version(),
        experiment: "unit".into(),
        config_hash: "0".repeat(64),
        seed: 3,
        split_seed: 3,
        architecture: arch,
        epochs_completed: 0,
        optimizer_steps: 0,
        held_out_patient: None,
    }
}

/// Saves and reloads every architecture; reports any difference in the
/// model, its provenance, or its outputs on five random windows.
pub fn roundtrip_failures(dir: &Path, seed: u64) -> Vec<String> {
    let mut bad = Vec::new();
    let mut r = super::rng(seed);
    for (i, arch) in Architecture::ALL.into_iter().enumerate() {
        let model = small_model(arch, seed + i as u64);
        let path = dir.join(format!("{arch}.ckpt"));
        save_checkpoint(&model, &provenance(arch), &path).unwrap();
        let loaded = match load_checkpoint(&path, Some(arch)) {
            Ok(c) => c,
            Err(e) => {
                bad.push(format!("{arch}: {e}"));
                continue;
            }
        };
        if loaded.model != model || loaded.provenance != provenance(arch) {
            bad.push(format!("{arch}: reloaded model or provenance differs"));
        }
        for _ in 0..5 {
            let x = super::uniform(&mut r, INPUT[0] * INPUT[1], -2.0, 2.0);
            let (a, b) = (model.predict(&x).unwrap(), loaded.model.predict(&x).unwrap());
            if a.to_bits() != b.to_bits() {
                bad.push(format!("{arch}: output {a} became {b}"));
            }
        }
    }
    bad
}

/// Corrupted files paired with the fault each must produce.
pub fn fault_cases() -> Vec<(&'static str, Vec<u8>, Option<Architecture>, CheckpointFault)> {
    let arch = Architecture::CnnBilstm;
    let good = preictal::experiment::encode_checkpoint(&small_model(arch, 1), &provenance(arch)).unwrap();
    let mut magic = good.clone();
    magic[0] ^= 0xff;
    let mut version = good.clone();
    version[8] = 2;
    let mut flipped = good.clone();
    let mid = good.len() - 100;
    flipped[mid] ^= 0x10;
    let other = preictal::experiment::encode_checkpoint(
        &small_model(Architecture::CnnLstm, 1),
        &provenance(Architecture::CnnLstm),
    )
    .unwrap();
    vec![
        ("corrupted magic", magic, None, CheckpointFault::NotACheckpoint),
        ("text file", b"hello, world\n".to_vec(), None, CheckpointFault::NotACheckpoint),
        ("future version", version, None, CheckpointFault::VersionMismatch),
        ("cut inside header", good[..12].to_vec(), None, CheckpointFault::Truncated),
        ("cut inside weights", good[..good.len() / 2 + 7].to_vec(), None, CheckpointFault::Truncated),
        ("flipped weight byte", flipped, None, CheckpointFault::ChecksumMismatch),
        ("cnn_lstm where cnn_bilstm expected", other, Some(arch), CheckpointFault::ArchitectureMismatch),
    ]
}

/// Writes each corrupted file and loads it; reports any case that does not
/// fail with its expected fault.
pub fn fault_failures(dir: &Path) -> Vec<String> {
    let mut bad = Vec::new();
    for (i, (what, bytes, expected, want)) in fault_cases().into_iter().enumerate() {
        let path = dir.join(format!("bad{i}.ckpt"));
        std::fs::write(&path, bytes).unwrap();
        match load_checkpoint(&path, expected) {
            Err(Error::Checkpoint { fault, .. }) if fault == want => {}
            Err(e) => bad.push(format!("{what}: expected {}, got {e}", want.code())),
            Ok(_) => bad.push(format!("{what}: loaded without error")),
        }
    }
    bad
}
