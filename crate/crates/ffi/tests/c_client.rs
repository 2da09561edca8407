//! Compiles a small C program against the generated header and the shared
//! library and runs it.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "hjrate.h"

int main(void) {
    HjGrid *g = NULL;
    HjGridFn *f = NULL;
    HjEnvelope *e = NULL;
    double v[8] = {0, 1, 0, -1, 0, 1, 0, -1};
    double out[8];
    size_t arg[8];
    if (hj_grid_new(1, 8, 1.0, &g) != HJ_STATUS_OK) return 1;
    if (hj_gridfn_new(g, v, 8, &f) != HJ_STATUS_OK) return 2;
    if (hj_inf_convolution(f, 1e-3, &e) != HJ_STATUS_OK) return 3;
    if (hj_envelope_copy_values(e, out, 8) != HJ_STATUS_OK) return 4;
    if (hj_envelope_copy_argmax(e, arg, 8) != HJ_STATUS_OK) return 5;
    for (int i = 0; i < 8; i++) {
        if (out[i] != v[i] || arg[i] != (size_t)i) return 6;
    }
    if (hj_grid_new(5, 8, 1.0, &g) != HJ_STATUS_INVALID_GRID) return 7;
    if (hj_last_error_message() == NULL) return 8;
    hj_envelope_free(e);
    hj_gridfn_free(f);
    hj_grid_free(g);
    printf("ok %s\n", hj_version());
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    assert!(
        lib_dir.join("libhjrate_ffi.so").exists() || lib_dir.join("libhjrate_ffi.dylib").exists(),
        "shared library not found in {}",
        lib_dir.display()
    );
    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("client.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let bin = work.path().join("client");
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg(format!("-I{}", crate_dir.join("include").display()))
        .arg(format!("-L{}", lib_dir.display()))
        .arg("-lhjrate_ffi")
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin)
        .env("LD_LIBRARY_PATH", &lib_dir)
        .env("DYLD_LIBRARY_PATH", &lib_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "client exited with {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
