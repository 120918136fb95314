use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stickynet(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stickynet"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("STICKYNET_SEED")
        .output()
        .unwrap()
}

#[test]
fn density_row_and_provenance() {
    let d = tempfile::tempdir().unwrap();
    let o = stickynet(&["density", "--t", "0.01", "--y", "0"], d.path());
    assert!(o.status.success());
    let text = fs::read_to_string(d.path().join("density.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("#seed=0"));
    assert!(lines.next().unwrap().starts_with("#config-hash="));
    assert_eq!(lines.next(), Some("t,x,y,atom,pdf"));
    assert!(text.lines().any(|l| l.starts_with("0.01,0,0,0.793572")), "{text}");
    assert!(d.path().join("config.toml").exists());
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(stickynet(&["frobnicate"], d.path()).status.code(), Some(2));
    assert_eq!(stickynet(&["--config", "/no/such/file.toml", "density"], d.path()).status.code(), Some(3));
    let bad = d.path().join("bad.toml");
    fs::write(&bad, "no_such_key = 1\n").unwrap();
    assert_eq!(stickynet(&["--config", bad.to_str().unwrap(), "density"], &d.path().join("o")).status.code(), Some(3));
    let file = d.path().join("plain");
    fs::write(&file, "x").unwrap();
    assert_eq!(stickynet(&["density"], &file.join("sub")).status.code(), Some(4));
}

#[test]
fn env_seed_overrides_file_and_flag_overrides_env() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.toml");
    fs::write(&cfg, "seed = 5\n").unwrap();
    let run = |env: Option<&str>, flag: Option<&str>, out: &str| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_stickynet"));
        c.arg("--config").arg(&cfg).arg("--out").arg(d.path().join(out));
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        c.env_remove("STICKYNET_SEED");
        if let Some(e) = env {
            c.env("STICKYNET_SEED", e);
        }
        c.args(["density", "--t", "0.1", "--y", "0.5"]).status().unwrap();
        fs::read_to_string(d.path().join(out).join("density.csv")).unwrap()
    };
    assert!(run(None, None, "a").starts_with("#seed=5\n"));
    assert!(run(Some("8"), None, "b").starts_with("#seed=8\n"));
    assert!(run(Some("8"), Some("9"), "c").starts_with("#seed=9\n"));
}

#[test]
fn verify_twice_is_identical() {
    let d = tempfile::tempdir().unwrap();
    let a = stickynet(&["--seed", "7", "verify", "--lemma-reps", "50000"], &d.path().join("a"));
    let b = stickynet(&["--seed", "7", "verify", "--lemma-reps", "50000"], &d.path().join("b"));
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(b.status.success());
    let ja = fs::read(d.path().join("a/verify.json")).unwrap();
    assert_eq!(ja, fs::read(d.path().join("b/verify.json")).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&ja).unwrap();
    assert_eq!(v["seed"], 7);
    assert_eq!(v["version"], 1);
    assert!(v["checks"].as_array().unwrap().len() > 20);
}

#[test]
fn pn_reports_slope_columns_and_svg() {
    let d = tempfile::tempdir().unwrap();
    let o = stickynet(&["--svg", "pn", "--n", "5..7", "--reps", "1e4"], d.path());
    assert!(o.status.success());
    let text = fs::read_to_string(d.path().join("pn.csv")).unwrap();
    assert!(text.contains("n,reps,p_hat,stderr,ratio_2n2,analytic_pn,weighted_slope,unweighted_slope"));
    assert_eq!(text.lines().count(), 3 + 3);
    assert!(fs::read_to_string(d.path().join("pn.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn net_and_dim_outputs() {
    let d = tempfile::tempdir().unwrap();
    assert!(stickynet(&["net"], &d.path().join("n")).status.success());
    let flags = fs::read_to_string(d.path().join("n/flags.csv")).unwrap();
    assert_eq!(flags.lines().filter(|l| l.starts_with("J1,")).count(), 16);
    assert!(stickynet(&["net", "--eps", "0.03"], &d.path().join("m")).status.code() == Some(1));
    assert!(stickynet(&["dim", "--k-max", "8", "--grids", "10"], &d.path().join("k")).status.success());
    let dim = fs::read_to_string(d.path().join("k/dim.csv")).unwrap();
    assert!(dim.contains("level,count,weighted_slope,unweighted_slope"));
}
