use std::ffi::{c_char, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use minwise_lab::extractor::leftover_extract;
use minwise_lab::gf2::find_irreducible;
use minwise_lab::kwise::{SeededFamily, TWiseFamily};
use minwise_lab::verify::uniform_minwise_probability;
use minwise_lab::SeedBits;
use minwise_lab_ffi::*;

fn build(json: &str) -> *mut MwlFamily {
    let c = CString::new(json).unwrap();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { mwl_family_from_json(c.as_ptr(), &mut f) }, MwlStatus::Ok);
    assert!(!f.is_null());
    f
}

fn last_error() -> String {
    let mut buf = vec![0u8; 256];
    let need = unsafe { mwl_last_error_message(buf.as_mut_ptr() as *mut c_char, buf.len()) };
    let n = buf.iter().position(|&b| b == 0).unwrap();
    assert!(need > n);
    String::from_utf8(buf[..n].to_vec()).unwrap()
}

#[test]
fn eval_matches_the_library() {
    let f = build(r#"{"family":"twise","t":3,"N":8,"M":8}"#);
    let fam = TWiseFamily::new(3, 8, 8).unwrap();
    unsafe {
        assert_eq!(mwl_family_seed_bits(f), 9);
        assert_eq!(mwl_family_domain(f), 8);
        assert_eq!(mwl_family_range(f), 8);
        for s in [0u64, 1, 0x155, 0x1ff] {
            let bytes = s.to_le_bytes();
            let hex = CString::new(format!("{s:#x}")).unwrap();
            for x in 1..=8 {
                let want = fam.eval(&SeedBits::from_u64(s, 9), x).unwrap();
                let (mut a, mut b) = (0, 0);
                assert_eq!(mwl_family_eval(f, bytes.as_ptr(), 2, x, &mut a), MwlStatus::Ok);
                assert_eq!(mwl_family_eval_hex(f, hex.as_ptr(), x, &mut b), MwlStatus::Ok);
                assert_eq!((a, b), (want, want));
            }
        }
        mwl_family_free(f);
    }
}

#[test]
fn construction_handles() {
    let cfg = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/configs/family_minwise.json"),
    )
    .unwrap();
    let f = build(&cfg);
    let mut v = 0;
    unsafe {
        assert_eq!(mwl_family_seed_bits(f), 20);
        assert_eq!(mwl_family_eval(f, [0x34, 0x12, 0x0a].as_ptr(), 3, 5, &mut v), MwlStatus::Ok);
        assert!((1..=8).contains(&v));
        mwl_family_free(f);
    }
}

#[test]
fn errors_are_reported() {
    let f = build(r#"{"family":"uniform","N":4,"M":4}"#);
    let mut v = 0;
    unsafe {
        // 8 seed bits: one byte
        assert_eq!(mwl_family_eval(f, [0u8; 2].as_ptr(), 2, 1, &mut v), MwlStatus::BadSeed);
        assert!(last_error().contains("1 bytes"));
        assert_eq!(mwl_family_eval(f, [0u8].as_ptr(), 1, 5, &mut v), MwlStatus::Domain);
        assert_eq!(mwl_family_eval(f, [0u8].as_ptr(), 1, 1, ptr::null_mut()), MwlStatus::NullPointer);
        assert_eq!(mwl_family_eval(ptr::null(), [0u8].as_ptr(), 1, 1, &mut v), MwlStatus::NullPointer);
        let hex = CString::new("0x1ff").unwrap();
        assert_eq!(mwl_family_eval_hex(f, hex.as_ptr(), 1, &mut v), MwlStatus::BadSeed);
        mwl_family_free(f);
        mwl_family_free(ptr::null_mut());

        let bad = CString::new(r#"{"family":"twise","t":2,"N":8}"#).unwrap();
        let mut h = ptr::null_mut();
        assert_eq!(mwl_family_from_json(bad.as_ptr(), &mut h), MwlStatus::Config);
        assert!(last_error().contains("M"), "{}", last_error());
        assert!(h.is_null());
        let bad = CString::new(r#"{"family":"twise","t":2,"N":8,"M":6}"#).unwrap();
        assert_eq!(mwl_family_from_json(bad.as_ptr(), &mut h), MwlStatus::Param);
        assert_eq!(mwl_family_from_json(ptr::null(), &mut h), MwlStatus::NullPointer);

        // truncation keeps the NUL and reports the full size
        let mut small = [1 as c_char; 4];
        let need = mwl_last_error_message(small.as_mut_ptr(), small.len());
        assert_eq!(small[3], 0);
        assert_eq!(need, "null string".len() + 1);
    }
}

#[test]
fn padding_bits_must_be_zero() {
    let f = build(r#"{"family":"twise","t":3,"N":8,"M":8}"#);
    let mut v = 0;
    unsafe {
        assert_eq!(mwl_family_eval(f, [0xff, 0x03].as_ptr(), 2, 1, &mut v), MwlStatus::BadSeed);
        mwl_family_free(f);
    }
}

#[test]
fn scalar_helpers() {
    let mut p = 0.0;
    let mut y = 0;
    unsafe {
        assert_eq!(mwl_uniform_minwise_probability(4, 16, 2, &mut p), MwlStatus::Ok);
        assert_eq!(p, uniform_minwise_probability(4, 16, 2).unwrap());
        assert_eq!(mwl_uniform_minwise_probability(1, 16, 2, &mut p), MwlStatus::Param);
        let ctx = find_irreducible(8).unwrap();
        assert_eq!(mwl_leftover_extract(8, 0xa7, 0x13, 3, &mut y), MwlStatus::Ok);
        assert_eq!(y, leftover_extract(&ctx, 0xa7, 0x13, 3).unwrap());
        assert_eq!(mwl_leftover_extract(8, 1, 1, 8, &mut y), MwlStatus::Param);
    }
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/minwise_lab.h")
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok_and(|o| o.status.success())
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "minwise_lab.h"

int main(void) {
    MwlFamily *f = NULL;
    if (mwl_family_from_json("{\"family\":\"twise\",\"t\":2,\"N\":8,\"M\":8}", &f) != MWL_STATUS_OK) return 1;
    uint8_t seed[1] = {0x2b};
    uint64_t v = 0;
    if (mwl_family_eval(f, seed, 1, 5, &v) != MWL_STATUS_OK) return 2;
    printf("%llu\n", (unsigned long long)v);
    if (mwl_family_eval(f, seed, 1, 9, &v) != MWL_STATUS_DOMAIN) return 3;
    char msg[128];
    mwl_last_error_message(msg, sizeof msg);
    if (strstr(msg, "domain") == NULL) return 4;
    mwl_family_free(f);
    return 0;
}
"#;

#[test]
fn header_compiles_as_c() {
    let h = std::fs::read_to_string(header()).unwrap();
    for name in [
        "mwl_family_from_json",
        "mwl_family_free",
        "mwl_family_seed_bits",
        "mwl_family_eval",
        "mwl_family_eval_hex",
        "mwl_uniform_minwise_probability",
        "mwl_leftover_extract",
        "mwl_last_error_message",
        "typedef struct MwlFamily MwlFamily",
    ] {
        assert!(h.contains(name), "{name} missing from header");
    }
    if !have_cc() {
        eprintln!("cc not found; skipping C compile check");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let inc = header().parent().unwrap().to_path_buf();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-c", "-o"])
        .arg(dir.path().join("main.o"))
        .arg("-I")
        .arg(&inc)
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

/// Links the C program against the static library when cargo has built one
/// next to this test binary.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().unwrap().parent().unwrap().join("libminwise_lab_ffi.a");
    if !have_cc() || !lib.exists() {
        eprintln!("cc or {} not available; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    let fam = TWiseFamily::new(2, 8, 8).unwrap();
    let want = fam.eval(&SeedBits::from_u64(0x2b, 6), 5).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), want.to_string());
}
