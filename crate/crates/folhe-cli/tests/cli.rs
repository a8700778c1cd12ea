//! Black-box tests of the `folhe` binary: exit codes, report determinism,
//! CSV emission and plotting.

use std::path::PathBuf;
use std::process::{Command, Output};

fn folhe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_folhe"))
        .args(args)
        .env("FOLHE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write_cfg(dir: &std::path::Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const EXT_CFG: &str = "\
[model]
n = 1
m = 1
cutoff = 3
leaf_volume = 1.0

[bundle]
factors = 1 | 0 | 0
ext = 1 2 : 0 0 : 1 0

[solver]
eps_min = 1e-4
";

const FLAT_CFG: &str = "\
[model]
n = 1
m = 1
cutoff = 2

[bundle]
factors = 1
";

#[test]
fn deterministic_reports_modulo_wall_clock() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "ext.cfg", EXT_CFG);
    let out1 = dir.path().join("r1.json");
    let out2 = dir.path().join("r2.json");
    for out in [&out1, &out2] {
        let st = folhe(&["solve-he", "--model", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    }
    let strip = |p: &PathBuf| -> String {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .filter(|l| !l.contains("wall_clock_seconds"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let (a, b) = (strip(&out1), strip(&out2));
    assert!(!a.is_empty());
    assert_eq!(a, b);
    // all float payloads use the 17-significant-digit form
    assert!(a.contains("e0") || a.contains("e-"));
}

#[test]
fn csv_history_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "ext.cfg", EXT_CFG);
    let json = dir.path().join("r.json");
    let csv = dir.path().join("h.csv");
    let st = folhe(&[
        "solve-he",
        "--model",
        cfg.to_str().unwrap(),
        "--out",
        json.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(st.status.success());
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    assert!(csv_text.starts_with("eps,sup_log,"));
    assert!(csv_text.lines().count() > 2);
    let svg = dir.path().join("p.svg");
    let st = folhe(&["plot", "--report", json.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert!(st.status.success());
    let svg_text = std::fs::read_to_string(&svg).unwrap();
    assert!(svg_text.starts_with("<svg"));
    assert!(svg_text.contains("polyline"));
}

#[test]
fn exit_codes() {
    // unknown flag → 1 with usage on stderr
    let st = folhe(&["degree", "--no-such-flag"]);
    assert_eq!(st.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&st.stderr).to_lowercase().contains("usage"));

    // malformed config → 1, diagnostic names the key
    let dir = tempfile::tempdir().unwrap();
    let bad = write_cfg(dir.path(), "bad.cfg", "[model]\nn = 1\nm = 1\ncutoff = zero\n");
    let st = folhe(&["degree", "--model", bad.to_str().unwrap()]);
    assert_eq!(st.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&st.stderr).contains("cutoff"));

    // UNSUPPORTED vanishing request → 2
    let cfg = write_cfg(dir.path(), "flat.cfg", FLAT_CFG);
    let st = folhe(&["verdict", "--model", cfg.to_str().unwrap(), "--vanishing"]);
    assert_eq!(st.status.code(), Some(2));

    // clean run → 0
    let st = folhe(&["degree", "--model", cfg.to_str().unwrap()]);
    assert_eq!(st.status.code(), Some(0));

    // moduli certificate and control case both succeed
    let st = folhe(&["moduli-t3", "--xi", "1,sqrt2,sqrt3", "--count", "4"]);
    assert_eq!(st.status.code(), Some(0));
    let st = folhe(&["moduli-t3", "--xi", "0,0,1", "--count", "4"]);
    assert_eq!(st.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&st.stdout).contains("compact"));
}
