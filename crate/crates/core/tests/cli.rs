use std::fs;
use std::path::Path;
use std::process::Command;

use dietcalib::io::csv::{parse_replicates_csv, read_replicates_csv, Replicates};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dietcalib"));
    c.env_remove("DIETCALIB_SEED");
    c
}

fn run(args: &[&str]) -> std::process::Output {
    bin().args(args).output().expect("spawn dietcalib")
}

fn small_triads(dir: &Path, seed: &str, threads: &str) {
    let out = run(&[
        "run",
        "--study",
        "triads",
        "--replicates",
        "20",
        "--seed",
        seed,
        "--threads",
        threads,
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn same_seed_same_bytes_any_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    small_triads(&a, "7", "1");
    small_triads(&b, "7", "3");
    for name in ["replicates.csv", "summary.csv"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let c = tmp.path().join("c");
    small_triads(&c, "8", "1");
    assert_ne!(
        fs::read(a.join("replicates.csv")).unwrap(),
        fs::read(c.join("replicates.csv")).unwrap()
    );
}

#[test]
fn env_seed_used_when_no_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let flag = tmp.path().join("flag");
    small_triads(&flag, "99", "1");
    let env = tmp.path().join("env");
    let out = bin()
        .env("DIETCALIB_SEED", "99")
        .args([
            "run",
            "--study",
            "triads",
            "--replicates",
            "20",
            "--out",
            env.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        fs::read(flag.join("replicates.csv")).unwrap(),
        fs::read(env.join("replicates.csv")).unwrap()
    );
}

#[test]
fn show_defaults_round_trips_as_config() {
    let tmp = tempfile::tempdir().unwrap();
    for study in ["calibration", "triads", "density"] {
        let out = run(&["show-defaults", "--study", study]);
        assert!(out.status.success());
        let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(doc["study"], study);
        let path = tmp.path().join(format!("{study}.json"));
        let mut doc = doc;
        // Shrink so the round trip stays cheap.
        match study {
            "density" => doc["n"] = 5000.into(),
            _ => doc["replicates"] = 3.into(),
        }
        doc["output_dir"] = tmp.path().join(study).to_str().unwrap().into();
        fs::write(&path, doc.to_string()).unwrap();
        let out = run(&["run", "--config", path.to_str().unwrap()]);
        assert!(
            out.status.success(),
            "{study}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert!(tmp.path().join("density/density_curves.csv").exists());
    assert!(tmp.path().join("calibration/summary.csv").exists());
}

#[test]
fn config_errors_exit_one_with_key() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    fs::write(&path, r#"{"study": "calibration", "rhos_mw": [1.5]}"#).unwrap();
    let out = run(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("rhos_mw"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);

    assert_eq!(run(&["run"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn truncated_replicates_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    small_triads(tmp.path(), "3", "1");
    let text = fs::read_to_string(tmp.path().join("replicates.csv")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let last = lines.pop().unwrap();
    let cut = format!("{}\n{}\n", lines.join("\n"), &last[..last.len() / 2]);
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, cut).unwrap();
    let out = run(&["summarize", "--input", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));

    let header_only = tmp.path().join("cols.csv");
    fs::write(&header_only, "scenario_id,alpha,replicate\n").unwrap();
    let out = run(&["summarize", "--input", header_only.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing column"));
}

#[test]
fn resummarize_matches_run_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "run",
        "--study",
        "calibration",
        "--replicates",
        "6",
        "--seed",
        "11",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let again = tmp.path().join("again.csv");
    let out = run(&[
        "summarize",
        "--input",
        tmp.path().join("replicates.csv").to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let a = fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    let b = fs::read_to_string(&again).unwrap();
    assert_eq!(a.lines().count(), 28);
    for (la, lb) in a.lines().zip(b.lines()) {
        for (x, y) in la.split(',').zip(lb.split(',')) {
            match (x.parse::<f64>(), y.parse::<f64>()) {
                (Ok(x), Ok(y)) => assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{x} vs {y}"),
                _ => assert_eq!(x, y),
            }
        }
    }
}

#[test]
fn replicate_csv_reads_back_identically() {
    let tmp = tempfile::tempdir().unwrap();
    small_triads(tmp.path(), "5", "1");
    let text = fs::read_to_string(tmp.path().join("replicates.csv")).unwrap();
    let parsed = parse_replicates_csv(&text).unwrap();
    let Replicates::Triads(rows) = &parsed else {
        panic!("expected triads")
    };
    assert_eq!(rows.len(), 8 * 20);
    let rewritten = dietcalib::io::csv::triad_replicates_csv(rows).unwrap();
    assert_eq!(String::from_utf8(rewritten).unwrap(), text);
}

#[test]
fn plot_writes_svg_and_companion_csv() {
    let tmp = tempfile::tempdir().unwrap();
    small_triads(tmp.path(), "1", "1");
    let out = run(&["plot", "--input", tmp.path().join("replicates.csv").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for stem in ["vc_strip_l0.95-0.9", "vc_strip_l0.8-0.5"] {
        let svg = fs::read_to_string(tmp.path().join(format!("{stem}.svg"))).unwrap();
        assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
        let csv = fs::read_to_string(tmp.path().join(format!("{stem}.csv"))).unwrap();
        assert!(csv.starts_with("panel,series,kind,x,y\n"));
        assert_eq!(csv.lines().filter(|l| l.contains(",truth,")).count(), 4);
    }
    let records = read_replicates_csv(&tmp.path().join("replicates.csv")).unwrap();
    assert_eq!(records.len(), 160);
}
