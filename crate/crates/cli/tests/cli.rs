//! End-to-end tests of the `crs` binary.

use std::process::Command;

fn crs() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crs"))
}

#[test]
fn gen_solve_happy_path() {
    let dir = tempfile::tempdir().unwrap();
    let chan = dir.path().join("c.json");
    let sol = dir.path().join("s.json");

    let out = crs()
        .args(["gen-channels", "--seed", "42", "--nt", "2"])
        .arg("--out")
        .arg(&chan)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(chan.exists());

    let out = crs()
        .args(["solve", "--pt", "100", "--pr", "100", "--eps", "1e-3", "--scheme", "crs"])
        .arg("--channels")
        .arg(&chan)
        .arg("--out")
        .arg(&sol)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&sol).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["scheme"], "crs");
    assert!(v["ssr_bits"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["design"]["p_c"].as_array().unwrap().len(), 2);
    // fingerprint covers the file bytes on disk
    let expected = {
        use std::process::Stdio;
        let _ = Stdio::null();
        crs_core::channel::fingerprint_bytes(&std::fs::read(&chan).unwrap())
    };
    assert_eq!(v["channel_fingerprint"], expected);
}

#[test]
fn bogus_scheme_exits_2_and_lists_schemes() {
    let out = crs()
        .args([
            "solve",
            "--channels",
            "c.json",
            "--pt",
            "1",
            "--pr",
            "1",
            "--scheme",
            "bogus",
            "--out",
            "s.json",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for s in ["crs", "nrs", "mulp", "cnoma"] {
        assert!(err.contains(s), "missing {s} in: {err}");
    }
}

#[test]
fn unknown_flag_exits_2_with_usage() {
    let out = crs().args(["montecarlo", "--nope", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn missing_channel_file_exits_1() {
    let out = crs()
        .args([
            "solve",
            "--channels",
            "/nonexistent/c.json",
            "--pt",
            "1",
            "--pr",
            "1",
            "--scheme",
            "crs",
            "--out",
            "/tmp/x.json",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn montecarlo_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let out = crs()
        .args([
            "montecarlo",
            "--trials",
            "2",
            "--snr",
            "0:15:30",
            "--nt",
            "2",
            "--schemes",
            "crs,nrs",
            "--seed",
            "7",
        ])
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "snr_db,scheme,trial,ssr_bits,theta,case,iters,solve_ms,status");
    // 2 trials x 3 snr points x 2 schemes
    assert_eq!(lines.len(), 1 + 2 * 3 * 2);
    assert!(csv.with_extension("summary.csv").exists());
}
