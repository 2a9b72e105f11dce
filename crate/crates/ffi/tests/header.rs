//! The checked-in header must declare every exported function, and a C
//! program using it must build and run against the static library.

use std::path::{Path, PathBuf};
use std::process::Command;

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn exported_functions() -> Vec<String> {
    let src = std::fs::read_to_string(crate_dir().join("src/lib.rs")).unwrap();
    src.lines()
        .filter_map(|l| {
            let rest = l.trim_start().strip_prefix("pub ")?;
            let rest = rest.strip_prefix("unsafe ").unwrap_or(rest);
            let rest = rest.strip_prefix("extern \"C\" fn ")?;
            Some(rest.split('(').next()?.to_string())
        })
        .collect()
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(crate_dir().join("include/oodlens.h")).unwrap();
    let fns = exported_functions();
    assert!(fns.len() >= 14, "{fns:?}");
    for f in fns {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    for t in ["OodStatus", "OodLayout", "OodDetector", "OOD_STATUS_OK"] {
        assert!(header.contains(t), "{t} missing from header");
    }
}

/// `target/<profile>` of the running test binary.
fn profile_dir() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    Some(exe.parent()?.parent()?.to_path_buf())
}

#[test]
fn c_program_links_and_runs() {
    let Some(dir) = profile_dir() else { return };
    let lib = dir.join("liboodlens_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no static library at {} or no C compiler", lib.display());
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("smoke.c");
    std::fs::write(&src, C_SMOKE).unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(Path::new(&exe)).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

const C_SMOKE: &str = r#"
#include <math.h>
#include <stdio.h>
#include "oodlens.h"

int main(void) {
    double costs[4] = {1.0, 0.0, 0.0, 1.0};
    size_t perm[2];
    double total;
    if (oodlens_lap_solve_dense(costs, 2, perm, &total) != OOD_STATUS_OK) return 1;
    if (perm[0] != 1 || perm[1] != 0 || total != 0.0) return 2;
    if (oodlens_lap_solve_dense(NULL, 2, perm, &total) != OOD_STATUS_NULL_POINTER) return 3;
    if (oodlens_last_error() == NULL) return 4;

    double xy[8] = {0, 0, 1, 0, 0, 1, 1, 1};
    OodLayout *layout = NULL;
    if (oodlens_layout_compute(xy, 4, 2, false, &layout) != OOD_STATUS_OK) return 5;
    size_t m, n, cells[4];
    oodlens_layout_grid(layout, &m, &n);
    oodlens_layout_cells(layout, cells, 4);
    oodlens_layout_free(layout);
    if (m != 2 || n != 2) return 6;

    double probs[4] = {1, 0, 0, 1};
    double h;
    oodlens_entropy_scores(probs, 1, 2, 2, &h);
    if (fabs(h - log(2.0)) > 1e-12) return 7;
    printf("ok\n");
    return 0;
}
"#;
