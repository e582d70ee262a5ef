use std::path::Path;
use std::process::{Command, Output};

use cmpswhe_cli::bench::BenchReport;

fn cmpswhe(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmpswhe"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cmpswhe(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str]) -> String {
    let out = cmpswhe(dir, args);
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8(out.stderr).unwrap()
}

fn demo_fixtures(dir: &Path) {
    ok(dir, &["keygen", "--demo", "--out-private", "d.key", "--out-public", "d.pub"]);
    ok(dir, &["--key", "d.key", "encrypt", "68", "--eta", "10", "--out", "x.ct"]);
    ok(dir, &["--key", "d.key", "encrypt", "78", "--eta", "7", "--out", "y.ct"]);
}

#[test]
fn keygen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = |n: &str| {
        vec![
            "keygen".to_string(),
            "--user-key".into(),
            "000102030405060708090a0b0c0d0e0f".into(),
            "--timestamp".into(),
            "1700000000".into(),
            "--out-private".into(),
            format!("{n}.key"),
            "--out-public".into(),
            format!("{n}.pub"),
        ]
    };
    for n in ["a", "b"] {
        let a = args(n);
        ok(d, &a.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let read = |f: &str| std::fs::read_to_string(d.join(f)).unwrap();
    assert_eq!(read("a.key"), read("b.key"));
    assert_eq!(read("a.pub"), read("b.pub"));
    assert!(!read("a.pub").contains("template"));

    ok(d, &["keygen", "--user-key", "000102030405060708090a0b0c0d0e0f", "--out-private", "c.key", "--out-public", "c.pub"]);
    // the current time lands in the private file and reproduces the key
    let ts = read("c.key").lines().find_map(|l| l.strip_prefix("timestamp=").map(str::to_string)).unwrap();
    assert!(ts.parse::<u64>().unwrap() > 1_700_000_000);
    ok(d, &["keygen", "--user-key", "000102030405060708090a0b0c0d0e0f", "--timestamp", &ts, "--out-private", "r.key", "--out-public", "r.pub"]);
    assert_eq!(read("c.key"), read("r.key"));
    let err = fails(d, &["keygen", "--user-key", "xyz", "--out-private", "e.key", "--out-public", "e.pub"]);
    assert!(err.contains("hex"), "{err}");
}

#[test]
fn encrypted_sum_decrypts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    demo_fixtures(d);
    ok(d, &["--public-key", "d.pub", "eval", "x+y", "--var", "x=x.ct", "--var", "y=y.ct", "--out", "s.ct"]);
    assert_eq!(ok(d, &["--key", "d.key", "--round", "floor", "decrypt", "s.ct"]).trim(), "146");
    assert_eq!(ok(d, &["--key", "d.key", "decrypt", "--raw", "s.ct"]).trim(), "4835/33");
}

#[test]
fn eval_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    demo_fixtures(d);
    let err = fails(d, &["--public-key", "d.pub", "eval", "x+z", "--var", "x=x.ct", "--out", "o.ct"]);
    assert!(err.contains("unbound variable `z`"), "{err}");
    let err = fails(d, &["--public-key", "d.pub", "eval", "x+y+x", "--var", "x=x.ct", "--var", "y=y.ct", "--out", "o.ct"]);
    assert!(err.contains("modulus product above 25246"), "{err}");
    assert!(!d.join("o.ct").exists());
}

#[test]
fn bench_csv_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--seed", "2", "bench", "--batches", "1,4", "--size", "16", "--reps", "1", "--out", "b.csv"]);
    let report = BenchReport::parse(&std::fs::read_to_string(d.join("b.csv")).unwrap()).unwrap();
    assert_eq!(report.rows.iter().map(|r| r.batch).collect::<Vec<_>>(), [1, 4]);
    assert!(report.rows.iter().all(|r| r.elements == 256));
}

#[test]
fn errorlab_writes_trends() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["--seed", "5", "errorlab", "--sweep", "imbalance", "--runs", "3"]);
    assert!(out.starts_with("sweep,run,config,"));
    assert!(out.contains("# imbalance error increasing in 3/3 runs: holds"), "{out}");
    fails(dir.path(), &["errorlab", "--sweep", "width"]);
}

#[test]
fn demos_match_plaintext() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    demo_fixtures(d);
    let out = ok(d, &["--seed", "4", "demo", "fgdiff", "--cases", "2", "--out-dir", "fg"]);
    assert_eq!(out.matches("matches plaintext").count(), 2, "{out}");
    assert!(d.join("fg/fgdiff_001_mask.pgm").exists());
    let out = ok(d, &["--seed", "4", "demo", "detect", "--cases", "1", "--out-dir", "det"]);
    assert!(out.contains("detect case 0: matches plaintext"), "{out}");
    assert!(d.join("det/detect_000_boxes.pgm").exists());
}

#[test]
fn residue_image_is_a_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    demo_fixtures(d);
    ok(d, &["--key", "d.key", "--seed", "1", "residue-image", "--row", "2", "--out", "r.pgm"]);
    let img = cmpswhe_vision::Frame::read_pgm(d.join("r.pgm")).unwrap();
    assert_eq!((img.width(), img.height()), (256, 64));
    fails(d, &["--key", "d.key", "residue-image", "--row", "3", "--out", "r2.pgm"]);
}

#[test]
fn packed_lanes_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["keygen", "--user-key", "ffeeddccbbaa99887766554433221100", "--timestamp", "9", "--out-private", "k", "--out-public", "p"]);
    ok(d, &["--key", "k", "--seed", "3", "pack", "--lanes", "4", "--lane-bound", "1000", "--values", "7,0,999,42", "--out", "v.ct", "--packing-key-out", "v.pk"]);
    assert_eq!(ok(d, &["--key", "k", "decrypt", "v.ct", "--packing-key", "v.pk"]).trim(), "7,0,999,42");
}
