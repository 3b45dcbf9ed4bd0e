use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn beno(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beno"))
        .args(args)
        .env_remove("BENO_SEED")
        .output()
        .unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn csvs(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    v.sort();
    v
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_writes_two_files_per_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    let o = beno(&["generate", "--corners", "4", "--base-n", "16", "--count", "3", "--seed", "1", "--out", p(&d)]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let files = csvs(&d);
    assert_eq!(files.len(), 6);
    assert!(files.contains(&"sample_2_boundary.csv".to_string()));
    assert!(files.contains(&"sample_0_interior.csv".to_string()));
    assert!(d.join("manifest.txt").exists());
}

#[test]
fn repeated_generation_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = beno(&["generate", "--corners", "2", "--base-n", "12", "--count", "2", "--seed", "9", "--out", p(d)]);
        assert!(o.status.success());
    }
    for f in csvs(&a) {
        assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_env_applies_only_without_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &Path, env: Option<&str>, flag: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_beno"));
        c.args(["generate", "--corners", "1", "--base-n", "8", "--count", "1", "--out", p(dir)]);
        c.env_remove("BENO_SEED");
        if let Some(s) = env {
            c.env("BENO_SEED", s);
        }
        if let Some(s) = flag {
            c.args(["--seed", s]);
        }
        assert!(c.output().unwrap().status.success());
        fs::read(dir.join("sample_0_interior.csv")).unwrap()
    };
    let env7 = run(&tmp.path().join("e"), Some("7"), None);
    let flag7 = run(&tmp.path().join("f"), None, Some("7"));
    let both = run(&tmp.path().join("b"), Some("8"), Some("7"));
    let env8 = run(&tmp.path().join("g"), Some("8"), None);
    assert_eq!(env7, flag7);
    assert_eq!(both, flag7);
    assert_ne!(env8, env7);
}

#[test]
fn green_check_passes_on_small_grids() {
    let o = beno(&["green-check", "--base-n", "8", "--trials", "5"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let out = text(&o.stdout);
    assert_eq!(out.matches("superposition trial").count(), 5);
    assert!(out.contains("green symmetry"));
    assert!(out.contains("all defects <= 1.0e-8"));
}

#[test]
fn green_check_threshold_failure_exits_nonzero() {
    let o = beno(&["green-check", "--base-n", "8", "--trials", "1", "--threshold", "0"]);
    assert!(!o.status.success());
    let err = text(&o.stderr);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("beno: error["));
}

#[test]
fn unknown_flag_exits_nonzero_with_usage() {
    let o = beno(&["train", "--nope"]);
    assert!(!o.status.success());
    let err = text(&o.stderr);
    assert!(err.starts_with("beno: error[usage]:"));
    assert!(err.contains("Usage:"));
}

#[test]
fn truncated_sample_reports_row_count_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    assert!(beno(&["generate", "--corners", "0", "--base-n", "8", "--count", "1", "--out", p(&d)]).status.success());
    let f = d.join("sample_0_interior.csv");
    let body = fs::read_to_string(&f).unwrap();
    let cut: Vec<&str> = body.lines().take(10).collect();
    fs::write(&f, cut.join("\n") + "\n").unwrap();
    let o = beno(&["plot", "--sample", p(&d.join("sample_0")), "--out", p(&tmp.path().join("x.png"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).starts_with("beno: error[row_count_mismatch]:"));
}

#[test]
fn plot_renders_field_and_comparison() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    assert!(beno(&["generate", "--corners", "3", "--base-n", "8", "--count", "1", "--out", p(&d)]).status.success());
    let stem = d.join("sample_0");
    let single = tmp.path().join("u.png");
    let o = beno(&["plot", "--sample", p(&stem), "--out", p(&single)]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let pred = tmp.path().join("pred.csv");
    let body = fs::read_to_string(d.join("sample_0_interior.csv")).unwrap();
    let vals: Vec<String> = body.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().to_string()).collect();
    fs::write(&pred, format!("u\n{}\n", vals.join("\n"))).unwrap();
    let triple = tmp.path().join("cmp.png");
    let o = beno(&["plot", "--sample", p(&stem), "--pred", p(&pred), "--out", p(&triple)]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let w = |f: &Path| {
        let dec = png::Decoder::new(std::io::BufReader::new(fs::File::open(f).unwrap()));
        let r = dec.read_info().unwrap();
        r.info().width
    };
    assert!(w(&triple) > 2 * w(&single));
}

#[test]
fn train_then_evaluate_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    assert!(beno(&["generate", "--corners", "4", "--base-n", "8", "--count", "4", "--seed", "2", "--out", p(&d)]).status.success());
    let cfg = tmp.path().join("train.cfg");
    fs::write(&cfg, "epochs = 2\nembed-dim = 8\nmp_steps = 1\nval_fraction = 0.25\nlearning_rate = 1e-3\n").unwrap();
    let run = tmp.path().join("run");
    let o = beno(&["train", "--data", p(&d), "--config", p(&cfg), "--out", p(&run), "--variant", "w_M"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert_eq!(text(&o.stdout).matches("epoch ").count(), 3);
    let hist = fs::read_to_string(run.join("history.csv")).unwrap();
    assert_eq!(hist.lines().count(), 3);
    let metrics = tmp.path().join("m.csv");
    let o = beno(&["evaluate", "--checkpoint", p(&run.join("checkpoint.bin")), "--data", p(&d), "--out", p(&metrics)]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert!(text(&o.stdout).starts_with("samples=4 rel_l2="));
    assert_eq!(fs::read_to_string(&metrics).unwrap().lines().count(), 5);
    let o = beno(&["evaluate", "--checkpoint", p(&tmp.path().join("none.bin")), "--data", p(&d), "--out", p(&metrics)]);
    assert!(text(&o.stderr).starts_with("beno: error[missing_file]:"));
}

#[test]
fn experiment_runs_from_spec_file() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("exp.cfg");
    let out = tmp.path().join("exp");
    fs::write(
        &spec,
        format!(
            "experiment = variants\nvariants = full, wo_D\nbase_n = 8\ntrain_count = 3\ntest_count = 1\ntest_corners = 4\nepochs = 1\nembed_dim = 8\nmp_steps = 1\nval_fraction = 0.3\nout = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let o = beno(&["experiment", "--spec", p(&spec), "--quiet"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let s = text(&o.stdout);
    assert!(s.contains("\nfull,4,8,") && s.contains("\nwo_D,4,8,"), "{s}");
    assert!(out.join("wo_D/eval_c4.csv").exists());
    assert!(out.join("summary.json").exists());
}
