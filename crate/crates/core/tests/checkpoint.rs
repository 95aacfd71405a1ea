mod common;

use common::checkpoints::{fault_failures, provenance, roundtrip_failures, small_model};
use preictal::experiment::{decode_checkpoint, encode_checkpoint, load_checkpoint, CHECKPOINT_MAGIC};
use preictal::nn::Architecture;
use preictal::Error;

#[test]
fn round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let bad = roundtrip_failures(dir.path(), 11);
    assert!(bad.is_empty(), "{bad:#?}");
}

#[test]
fn corrupted_files_fail_with_the_right_fault() {
    let dir = tempfile::tempdir().unwrap();
    let bad = fault_failures(dir.path());
    assert!(bad.is_empty(), "{bad:#?}");
}

#[test]
fn encoding_is_deterministic_and_framed() {
    let arch = Architecture::Bilstm;
    let a = encode_checkpoint(&small_model(arch, 5), &provenance(arch)).unwrap();
    let b = encode_checkpoint(&small_model(arch, 5), &provenance(arch)).unwrap();
    assert_eq!(a, b);
    assert_eq!(&a[..8], CHECKPOINT_MAGIC);
    let crc = u32::from_le_bytes(a[a.len() - 4..].try_into().unwrap());
    assert_eq!(crc, crc32fast::hash(&a[..a.len() - 4]));
    assert!(decode_checkpoint(&a, None).is_ok());
}

#[test]
fn load_errors_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("junk.ckpt");
    std::fs::write(&path, b"junk").unwrap();
    let err = load_checkpoint(&path, None).unwrap_err();
    assert_eq!(err.code(), "checkpoint.not_a_checkpoint");
    assert!(err.to_string().contains("junk.ckpt"), "{err}");
    let missing = load_checkpoint(&dir.path().join("absent.ckpt"), None).unwrap_err();
    assert!(matches!(missing, Error::Io { .. }));
}
