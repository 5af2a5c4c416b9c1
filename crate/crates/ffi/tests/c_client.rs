//! Compiles a small C program against the header and the static library,
//! when a C compiler is available.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "noma_slice.h"

int main(void) {
    double gains[2] = {1.0, 4.0};
    double p[2];
    double level;
    if (nsl_waterfill(gains, 2, 2.0, p, &level) != NSL_STATUS_OK) return 1;
    NslTable *t = NULL;
    if (nsl_table_load("/nonexistent", &t) != NSL_STATUS_IO) return 2;
    char msg[128];
    if (nsl_last_error(msg, sizeof msg) == 0) return 3;
    printf("%s %.6f %.6f\n", nsl_version(), p[0], p[1]);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests/<bin> lives in target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let lib = target_dir().join("libnoma_slice_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = dir.path().join("client");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with(env!("CARGO_PKG_VERSION")));
}
