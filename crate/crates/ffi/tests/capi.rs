use std::ffi::{CStr, CString};
use std::ptr;

use dialsum::corpus::{synthetic, write_canonical};
use dialsum::heuristics::Heuristic;
use dialsum::metrics::{evaluate, RougeConfig};
use dialsum_ffi::*;

fn last_error() -> Option<String> {
    let p = dialsum_last_error();
    if p.is_null() {
        None
    } else {
        Some(unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
    }
}

fn load(dir: &std::path::Path) -> *mut DialsumDataset {
    let path = CString::new(dir.to_str().unwrap()).unwrap();
    let format = CString::new("canonical-jsonl").unwrap();
    let mut handle = ptr::null_mut();
    let status = unsafe { dialsum_dataset_load(path.as_ptr(), format.as_ptr(), &mut handle) };
    assert_eq!(status, DialsumStatus::Ok, "{:?}", last_error());
    assert!(!handle.is_null());
    handle
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(dialsum_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn rouge_identity_and_disjoint() {
    let a = CString::new("the package never arrived").unwrap();
    let b = CString::new("refund issued today").unwrap();
    let mut out = DialsumRouge::default();
    assert_eq!(unsafe { dialsum_rouge(a.as_ptr(), a.as_ptr(), 80, false, &mut out) }, DialsumStatus::Ok);
    assert_eq!((out.rouge1, out.rouge2, out.rouge_l, out.n), (1.0, 1.0, 1.0, 1));
    assert_eq!(unsafe { dialsum_rouge(a.as_ptr(), b.as_ptr(), 80, false, &mut out) }, DialsumStatus::Ok);
    assert_eq!((out.rouge1, out.rouge2, out.rouge_l), (0.0, 0.0, 0.0));
    assert!(last_error().is_none());
}

#[test]
fn rouge_rejects_bad_input() {
    let a = CString::new("x").unwrap();
    let mut out = DialsumRouge::default();
    let status = unsafe { dialsum_rouge(ptr::null(), a.as_ptr(), 80, false, &mut out) };
    assert_eq!(status, DialsumStatus::NullPointer);
    assert!(last_error().unwrap().contains("candidate"));

    let bad = [0xffu8, 0xfe, 0];
    let status = unsafe { dialsum_rouge(bad.as_ptr().cast(), a.as_ptr(), 80, false, &mut out) };
    assert_eq!(status, DialsumStatus::InvalidUtf8);

    let status = unsafe { dialsum_rouge(a.as_ptr(), a.as_ptr(), 0, false, &mut out) };
    assert_eq!(status, DialsumStatus::InvalidArgument);

    let status = unsafe { dialsum_rouge(a.as_ptr(), a.as_ptr(), 80, false, ptr::null_mut()) };
    assert_eq!(status, DialsumStatus::NullPointer);
}

#[test]
fn dataset_roundtrip_and_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let split = synthetic::generate_split(12, 3, 9, 5);
    write_canonical(&split, dir.path()).unwrap();

    let handle = load(dir.path());
    let (mut tr, mut va, mut te) = (0usize, 0usize, 0usize);
    assert_eq!(unsafe { dialsum_dataset_split_sizes(handle, &mut tr, &mut va, &mut te) }, DialsumStatus::Ok);
    assert_eq!((tr, va, te), (12, 3, 9));

    let mut out = DialsumRouge::default();
    let status = unsafe { dialsum_baseline(handle, DialsumMethod::Long1, DialsumSplit::Test, 80, false, &mut out) };
    assert_eq!(status, DialsumStatus::Ok);

    let preds: Vec<_> = split.test.iter().map(|e| Heuristic::Long1.apply(&e.dialog)).collect();
    let refs: Vec<_> = split.test.iter().map(|e| e.references.clone()).collect();
    let expected = evaluate(&preds, &refs, 80, RougeConfig::default()).unwrap();
    assert_eq!(out.n, 9);
    assert_eq!(out.rouge1, expected.rouge1);
    assert_eq!(out.rouge2, expected.rouge2);
    assert_eq!(out.rouge_l, expected.rouge_l);

    let status = unsafe { dialsum_baseline(handle, DialsumMethod::Lead1, DialsumSplit::Test, 0, false, &mut out) };
    assert_eq!(status, DialsumStatus::InvalidArgument);

    unsafe { dialsum_dataset_free(handle) };
    unsafe { dialsum_dataset_free(ptr::null_mut()) };
}

#[test]
fn load_errors_leave_handle_null() {
    let dir = tempfile::tempdir().unwrap();
    let missing = CString::new(dir.path().join("nope").to_str().unwrap()).unwrap();
    let format = CString::new("canonical-jsonl").unwrap();
    let mut handle: *mut DialsumDataset = ptr::dangling_mut();
    let status = unsafe { dialsum_dataset_load(missing.as_ptr(), format.as_ptr(), &mut handle) };
    assert_eq!(status, DialsumStatus::Io);
    assert!(handle.is_null());
    assert!(last_error().is_some());

    let bogus = CString::new("xml").unwrap();
    let status = unsafe { dialsum_dataset_load(missing.as_ptr(), bogus.as_ptr(), &mut handle) };
    assert_eq!(status, DialsumStatus::InvalidArgument);

    let status = unsafe { dialsum_dataset_load(missing.as_ptr(), format.as_ptr(), ptr::null_mut()) };
    assert_eq!(status, DialsumStatus::NullPointer);
}

#[test]
fn render_numbered_listing() {
    let turns = CString::new(
        r#"[{"speaker":"customer","text":"My order is late. Where is it?"},
            {"speaker":"agent","text":"Sorry about that."}]"#,
    )
    .unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { dialsum_render_numbered(turns.as_ptr(), &mut out) }, DialsumStatus::Ok);
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_string();
    unsafe { dialsum_string_free(out) };
    assert_eq!(text, "Customer: 1) My order is late.\n2) Where is it?\nAgent: 3) Sorry about that.");

    let bad = CString::new(r#"[{"speaker":"bot","text":"hi"}]"#).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { dialsum_render_numbered(bad.as_ptr(), &mut out) }, DialsumStatus::InvalidArgument);
    assert!(out.is_null());
    unsafe { dialsum_string_free(ptr::null_mut()) };
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/dialsum.h")).unwrap();
    assert!(header.contains("#ifndef DIALSUM_H"));
    assert!(header.contains("typedef struct DialsumDataset DialsumDataset;"));
    for name in [
        "dialsum_version",
        "dialsum_last_error",
        "dialsum_string_free",
        "dialsum_dataset_load",
        "dialsum_dataset_free",
        "dialsum_dataset_split_sizes",
        "dialsum_baseline",
        "dialsum_rouge",
        "dialsum_render_numbered",
    ] {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}
