//! End-to-end tests of the `rrest` binary: exit-code protocol, output
//! determinism, and the file formats.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicU32, Ordering};

static DIR_COUNTER: AtomicU32 = AtomicU32::new(0);

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "rrest-cli-{}-{}-{}",
        tag,
        std::process::id(),
        DIR_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn rrest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rrest"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    entries.sort();
    entries
}

#[test]
fn reproduce_is_byte_deterministic() {
    let dir_a = scratch_dir("repro-a");
    let dir_b = scratch_dir("repro-b");
    for dir in [&dir_a, &dir_b] {
        let out = rrest(&[
            "reproduce",
            "--seed",
            "7",
            "--out",
            dir.to_str().unwrap(),
            "--mc-samples",
            "50000",
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let a = read_dir_sorted(&dir_a);
    let b = read_dir_sorted(&dir_b);
    assert_eq!(a.len(), 8, "expected 8 output files");
    for ((name_a, bytes_a), (name_b, bytes_b)) in a.iter().zip(&b) {
        assert_eq!(name_a, name_b);
        assert_eq!(bytes_a, bytes_b, "{name_a} differs between runs");
    }
    fs::remove_dir_all(dir_a).ok();
    fs::remove_dir_all(dir_b).ok();
}

#[test]
fn reproduce_outputs_are_consistent() {
    let dir = scratch_dir("repro-consistency");
    let out = rrest(&[
        "reproduce",
        "--seed",
        "3",
        "--out",
        dir.to_str().unwrap(),
        "--mc-samples",
        "50000",
    ]);
    assert!(out.status.success());

    let mse: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("mse.json")).unwrap()).unwrap();
    let cert: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("certificates.json")).unwrap()).unwrap();

    // Whenever the certificate says the full-rank filter loses, the generic
    // closed forms must agree.
    if cert["verdict_al"] == "mmse-worse" {
        let j_mmse = mse["generic"]["mmse"].as_f64().unwrap();
        let j_rmmse = mse["generic"]["rmmse"].as_f64().unwrap();
        assert!(j_mmse >= j_rmmse, "verdict contradicts closed forms");
    }

    // The noise term of the certificate split never exceeds (m - r)/4.
    let table4 = fs::read_to_string(dir.join("table4.csv")).unwrap();
    let mut eps_term = None;
    let mut threshold = None;
    for line in table4.lines().skip(1) {
        let (key, value) = line.split_once(',').unwrap();
        match key {
            "epsilon_term" => eps_term = Some(value.parse::<f64>().unwrap()),
            "threshold" => threshold = Some(value.parse::<f64>().unwrap()),
            _ => {}
        }
    }
    let eps_term = eps_term.unwrap();
    let threshold = threshold.unwrap();
    assert!(eps_term <= threshold / 4.0 + 1e-12, "noise term {eps_term}");

    // Monte Carlo confirmation brackets the generic closed form.
    for kind in ["mmse", "rmmse", "rsvd"] {
        let exact = mse["generic"][kind].as_f64().unwrap();
        let estimate = mse["monte_carlo"][kind]["estimate"].as_f64().unwrap();
        let stderr = mse["monte_carlo"][kind]["stderr"].as_f64().unwrap();
        assert!(
            (estimate - exact).abs() <= 5.0 * stderr,
            "{kind}: MC {estimate} vs exact {exact} (se {stderr})"
        );
    }

    // The manifest lists exactly the written outputs, relative to its dir.
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 7);
    for entry in outputs {
        assert!(dir.join(entry.as_str().unwrap()).exists());
    }
    fs::remove_dir_all(dir).ok();
}

#[test]
fn reproduce_is_thread_count_invariant() {
    let dir_a = scratch_dir("threads-1");
    let dir_b = scratch_dir("threads-4");
    for (dir, threads) in [(&dir_a, "1"), (&dir_b, "4")] {
        let out = Command::new(env!("CARGO_BIN_EXE_rrest"))
            .env("RREST_THREADS", threads)
            .args([
                "reproduce",
                "--seed",
                "5",
                "--out",
                dir.to_str().unwrap(),
                "--mc-samples",
                "200000",
            ])
            .output()
            .expect("binary runs");
        assert!(out.status.success());
    }
    for ((name_a, bytes_a), (name_b, bytes_b)) in
        read_dir_sorted(&dir_a).iter().zip(&read_dir_sorted(&dir_b))
    {
        assert_eq!(name_a, name_b);
        assert_eq!(bytes_a, bytes_b, "{name_a} differs across thread counts");
    }
    fs::remove_dir_all(dir_a).ok();
    fs::remove_dir_all(dir_b).ok();
}

#[test]
fn reproduce_supports_rectangular_models() {
    let dir = scratch_dir("repro-rect");
    let out = rrest(&[
        "reproduce",
        "--seed",
        "2",
        "--out",
        dir.to_str().unwrap(),
        "--n",
        "6",
        "--m",
        "4",
        "--gamma-min-cap",
        "0.05",
        "--cond-min",
        "100",
        "--mc-samples",
        "20000",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let scenario: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("scenario.json")).unwrap()).unwrap();
    assert_eq!(scenario["h"]["rows"], 6);
    assert_eq!(scenario["h"]["cols"], 4);
    assert_eq!(scenario["r"], 3);
    fs::remove_dir_all(dir).ok();
}

#[test]
fn reproduce_reports_generation_failure() {
    let dir = scratch_dir("repro-fail");
    let out = rrest(&[
        "reproduce",
        "--seed",
        "1",
        "--out",
        dir.to_str().unwrap(),
        "--gamma-min-cap",
        "1e-12",
        "--max-rejects",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    fs::remove_dir_all(dir).ok();
}

#[test]
fn sweep_grid_contract() {
    let dir = scratch_dir("sweep");
    let out = rrest(&[
        "sweep",
        "--term",
        "A",
        "--grid",
        "0.05,10,400",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "a_gamma,a_sigma,a_value,b_value");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 400 * 400);

    // The grid maximum of the A term must recover the landscape peak.
    let mut max_a = f64::NEG_INFINITY;
    let mut arg = (0.0, 0.0);
    for row in rows {
        let cols: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        if cols[2] > max_a {
            max_a = cols[2];
            arg = (cols[0], cols[1]);
        }
    }
    assert!((max_a - 0.033).abs() < 1e-3, "grid max {max_a} at {arg:?}");
    assert!((arg.0 - 1.394).abs() < 0.05 && (arg.1 - 2.611).abs() < 0.05);

    let boundary = fs::read_to_string(dir.join("boundary.csv")).unwrap();
    assert!(boundary.lines().next().unwrap() == "a_gamma,a_sigma");
    assert!(
        boundary.lines().count() > 100,
        "boundary polyline too sparse"
    );

    // A focused sweep with the gamma axis running toward zero at sigma
    // near one: the B values must climb to the 1/4 supremum.
    let dir_b = scratch_dir("sweep-b");
    let out = rrest(&[
        "sweep",
        "--term",
        "B",
        "--grid",
        "0.0001,0.05,200",
        "--grid",
        "0.8,1.2,41",
        "--out",
        dir_b.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir_b.join("sweep.csv")).unwrap();
    let mut b_near = f64::NEG_INFINITY;
    for row in csv.lines().skip(1) {
        let cols: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        b_near = b_near.max(cols[3]);
    }
    assert!(b_near > 0.2499 && b_near < 0.25, "B near supremum {b_near}");
    fs::remove_dir_all(dir).ok();
    fs::remove_dir_all(dir_b).ok();
}

#[test]
fn certify_exit_codes() {
    // A generated scenario certifies as mmse-worse (exit 0).
    let dir = scratch_dir("certify");
    let out = rrest(&[
        "reproduce",
        "--seed",
        "42",
        "--out",
        dir.to_str().unwrap(),
        "--mc-samples",
        "50000",
    ]);
    assert!(out.status.success());
    let out = rrest(&[
        "certify",
        "--pair",
        dir.join("scenario.json").to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.join("certificate.json").exists());

    // An unperturbed well-conditioned pair cannot certify: exit 1.
    let inconclusive = serde_json::json!({
        "h": {"rows": 2, "cols": 2, "data": [3.0, 0.0, 0.0, 1.0]},
        "delta": {"rows": 2, "cols": 2, "data": [0.0, 0.0, 0.0, 0.0]},
        "epsilon": 0.25,
        "r": 1,
        "kappa": 1.5
    });
    let pair_path = dir.join("inconclusive.json");
    fs::write(&pair_path, serde_json::to_vec(&inconclusive).unwrap()).unwrap();
    let out = rrest(&[
        "certify",
        "--pair",
        pair_path.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));

    // Nearly coincident leading singular values with a perturbation larger
    // than the gap: the separation measure fails its gate (exit 4).
    let gated = serde_json::json!({
        "h": {"rows": 3, "cols": 3, "data": [1.0, 0.0, 0.0, 0.0, 0.97, 0.0, 0.0, 0.0, 0.002]},
        "delta": {"rows": 3, "cols": 3, "data": [0.0, 0.04, 0.0, -0.04, 0.0, 0.0, 0.0, 0.0, 0.001]},
        "epsilon": 1e-5,
        "r": 2,
        "kappa": 1.75
    });
    let gated_path = dir.join("gated.json");
    fs::write(&gated_path, serde_json::to_vec(&gated).unwrap()).unwrap();
    let out = rrest(&[
        "certify",
        "--pair",
        gated_path.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));

    // Malformed JSON: exit 5 and no partial certificate.
    let broken_path = dir.join("broken.json");
    fs::write(&broken_path, b"{ not json").unwrap();
    let clean = scratch_dir("certify-clean");
    let out = rrest(&[
        "certify",
        "--pair",
        broken_path.to_str().unwrap(),
        "--out",
        clean.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(5));
    assert!(!clean.join("certificate.json").exists());
    fs::remove_dir_all(dir).ok();
    fs::remove_dir_all(clean).ok();
}

#[test]
fn validate_suites_pass() {
    let dir = scratch_dir("validate");
    for suite in ["mse", "bounds"] {
        let out = rrest(&[
            "validate",
            "--suite",
            suite,
            "--trials",
            "25",
            "--seed",
            "11",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{suite}: {}",
            String::from_utf8_lossy(&out.stdout)
        );
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("25/25 pass"), "{text}");
    }

    let out = rrest(&[
        "validate",
        "--suite",
        "ensembles",
        "--trials",
        "20000",
        "--seed",
        "11",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stats = fs::read_to_string(dir.join("tail_stats.csv")).unwrap();
    assert_eq!(stats.lines().next().unwrap(), "t,empirical,lower,upper");
    assert_eq!(stats.lines().count(), 4);
    fs::remove_dir_all(dir).ok();
}
