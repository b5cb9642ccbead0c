//! Compiles a small C program against the generated header and the static
//! library.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "prevtrial.h"

int main(void) {
    PrevtrialDesign d;
    uint64_t events = 0;
    if (prevtrial_design_default(&d) != PREVTRIAL_STATUS_OK) return 1;
    d.pe_null = 0.0;
    d.pe_alt = 0.4;
    if (prevtrial_required_events(&d, &events) != PREVTRIAL_STATUS_OK) return 2;
    d.dropout = 1.5;
    PrevtrialSampleSize n;
    if (prevtrial_sample_size(&d, 0.006, 0.01, &n) != PREVTRIAL_STATUS_VALIDATION) return 3;
    printf("%llu %s\n", (unsigned long long)events, prevtrial_last_error());
    return 0;
}
"#;

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

/// Builds the static library; `cargo test` only produces the rlib.
fn static_lib() -> PathBuf {
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let status = Command::new(cargo)
        .args(["build", "--quiet", "--lib", "--profile", "test", "--manifest-path"])
        .arg(crate_dir().join("Cargo.toml"))
        .status()
        .unwrap();
    assert!(status.success());
    // The test binary lives in target/<profile>/deps.
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().join("libprevtrial_ffi.a")
}

fn cc() -> Command {
    Command::new(std::env::var("CC").unwrap_or_else(|_| "cc".into()))
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let include = crate_dir().join("include");
    assert!(include.join("prevtrial.h").exists());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = cc()
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let status = cc()
        .args(["-x", "c++", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn c_program_links_and_runs() {
    let lib = static_lib();
    assert!(lib.exists(), "{} missing", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = cc()
        .args(["-std=c99", "-I"])
        .arg(crate_dir().join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(Path::new(&exe)).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("162 annual_dropout"), "{text}");
}
