use std::io::Write;
use std::process::{Command, Output, Stdio};

fn gre(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_gre"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or("").as_bytes()).unwrap();
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn encode_decode_round_trip() {
    let enc = gre(&["encode", "--scheme", "gre", "--x", "0.3", "--bits", "50"], None);
    assert!(enc.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&enc)).unwrap();
    assert_eq!(json["scheme"], "gre");
    assert_eq!(json["bits"].as_str().unwrap().len(), 50);

    let dec = gre(&["decode", "--beta", "1.618033988749895"], Some(&stdout(&enc)));
    assert!(dec.status.success());
    let value: f64 = stdout(&dec).trim().parse().unwrap();
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    assert!((value - 0.3).abs() <= (1.0 + phi) * phi.powi(-50));

    let default_base = gre(&["decode"], Some(&stdout(&enc)));
    assert_eq!(stdout(&default_base), stdout(&dec));
}

#[test]
fn every_scheme_encodes() {
    for extra in [
        &["--scheme", "pcm", "--tau", "1"][..],
        &["--scheme", "beta", "--beta", "1.8"],
        &["--scheme", "sd1"],
        &["--scheme", "poly", "--L", "4"],
        &[
            "--scheme",
            "gre",
            "--alpha",
            "1.5",
            "--nu1",
            "1.2",
            "--nu2",
            "1.3",
            "--resolver",
            "random",
            "--seed",
            "9",
            "--noise-amp",
            "0.01",
        ],
    ] {
        let mut args = vec!["encode", "--x", "0.4", "--bits", "32"];
        args.extend_from_slice(extra);
        let out = gre(&args, None);
        assert!(
            out.status.success(),
            "{extra:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let dec = gre(&["decode"], Some(&stdout(&out)));
        assert!(dec.status.success(), "{extra:?}");
        let v: f64 = stdout(&dec).trim().parse().unwrap();
        assert!((v - 0.4).abs() < 0.05, "{extra:?}: {v}");
    }
}

#[test]
fn bias_corrected_decode() {
    let enc = gre(&["encode", "--scheme", "gre", "--x", "0", "--bits", "10"], None);
    let out = gre(
        &["decode", "--beta", "1.618033988749895", "--bias-correct"],
        Some(&stdout(&enc)),
    );
    let v: f64 = stdout(&out).trim().parse().unwrap();
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    assert!((v - 0.5 * phi.powi(-8)).abs() < 1e-15);
}

#[test]
fn requantize_prints_binary() {
    let stream = r#"{"scheme":"gre","params":{"values":{}},"n_bits":3,"bits":"001"}"#;
    let out = gre(&["requantize", "--B", "16"], Some(stream));
    assert!(out.status.success());
    let text = stdout(&out);
    let (int, frac) = text.trim().split_once('.').unwrap();
    assert_eq!(int, "0");
    assert_eq!(frac.len(), 16);
    // floor(2^16 φ^{-2}) with φ^{-2} = (3 − √5)/2
    let expected = ((3.0 - 5f64.sqrt()) / 2.0 * 65536.0).floor() as u32;
    assert_eq!(frac, format!("{expected:016b}"));
}

#[test]
fn region_json() {
    let out = gre(&["region", "--mu", "0.01"], None);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["alpha_min"].as_f64().unwrap() - 1.061554).abs() < 1e-5);
    assert_eq!(v["table"].as_array().unwrap().len(), 21);
    let one = gre(&["region", "--mu", "0", "--alpha", "1"], None);
    let v: serde_json::Value = serde_json::from_str(&stdout(&one)).unwrap();
    assert_eq!(v["sample"]["nu_min"], 1.0);
    assert_eq!(v["sample"]["nu_max"], 1.0);
}

#[test]
fn invariance_exit_codes() {
    let ok = gre(
        &[
            "invariance-check",
            "--mu",
            "0",
            "--alpha",
            "1",
            "--nu1",
            "1",
            "--nu2",
            "1",
            "--grid",
            "60",
        ],
        None,
    );
    assert_eq!(ok.status.code(), Some(0));
    let bad = gre(
        &[
            "invariance-check",
            "--mu",
            "0",
            "--alpha",
            "1",
            "--nu1",
            "0.95",
            "--nu2",
            "1.05",
            "--grid",
            "60",
        ],
        None,
    );
    assert_eq!(bad.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&stdout(&bad)).unwrap();
    assert!(report["violation_count"].as_u64().unwrap() > 0);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(gre(&["encode", "--scheme", "gre"], None).status.code(), Some(2));
    assert_eq!(
        gre(&["encode", "--scheme", "gre", "--x", "7", "--bits", "4"], None)
            .status
            .code(),
        Some(2)
    );
    assert_eq!(gre(&["decode"], Some("not json")).status.code(), Some(2));
    assert_eq!(
        gre(&["experiment", "escape", "--trials", "10"], None).status.code(),
        Some(2)
    );
    let pcm = r#"{"scheme":"pcm","params":{"values":{}},"n_bits":2,"bits":"01"}"#;
    assert_eq!(gre(&["requantize", "--B", "8"], Some(pcm)).status.code(), Some(2));
}

#[test]
fn experiments_write_tables() {
    let dir = std::env::temp_dir().join(format!("gre-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("escape.csv");
    let out = gre(
        &[
            "experiment",
            "escape",
            "--trials",
            "200",
            "--seed",
            "5",
            "--delta",
            "0.1",
            "--n-max",
            "12",
            "--out",
            csv.to_str().unwrap(),
        ],
        None,
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("N,delta,escape_fraction,escapes,trials,seed\n"));
    assert_eq!(text.lines().count(), 13);

    let json = dir.join("sweep.json");
    let out = gre(
        &[
            "experiment",
            "sweep",
            "--trials",
            "5",
            "--alpha-grid",
            "1,1.5",
            "--nu-grid",
            "1,1.2",
            "--out",
            json.to_str().unwrap(),
        ],
        None,
    );
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["experiment"], "sweep");
    assert_eq!(v["rows"].as_array().unwrap().len(), 6);

    for kind in [
        &["rmse", "--n-max", "5"][..],
        &["variance", "--n", "5"],
        &["bias", "--n", "4"],
    ] {
        let mut args = vec!["experiment"];
        args.extend_from_slice(kind);
        args.extend_from_slice(&["--trials", "100", "--seed", "2"]);
        let first = gre(&args, None);
        assert!(
            first.status.success(),
            "{kind:?}: {}",
            String::from_utf8_lossy(&first.stderr)
        );
        assert_eq!(stdout(&first), stdout(&gre(&args, None)), "{kind:?} is reproducible");
    }
    std::fs::remove_dir_all(&dir).unwrap();
}
