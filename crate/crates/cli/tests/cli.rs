use std::path::PathBuf;
use std::process::{Command, Output};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn qlayer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qlayer"))
        .args(args)
        .env("QLAYER_THREADS", "1")
        .output()
        .unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qlayer-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn stderr_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

#[test]
fn plane_certify_exits_not_certified() {
    let plane = configs().join("plane.toml");
    let out = scratch("plane-certify.json");
    let o = qlayer(&["certify", "--config", plane.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["error"], "NOT_CERTIFIED");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["schema"], "qlayer-report/1");
    assert_eq!(report["status"], "NOT_CERTIFIED");
    assert_eq!(report["certify"]["certificate"]["status"], "NOT_CERTIFIED");
    assert_eq!(report["threads"], 1);
}

#[test]
fn config_errors_have_their_own_exit_code() {
    let bad = scratch("bad.toml");
    std::fs::write(&bad, "[surface]\nfamily = \"plane\"\n[laye]\na = 1.0\n").unwrap();
    let o = qlayer(&["curvature", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    let e = stderr_json(&o);
    assert_eq!(e["schema"], "qlayer-error/1");
    assert_eq!(e["error"], "ParseError");
    assert!(e["message"].as_str().unwrap().contains("laye"));

    let thick = scratch("thick.toml");
    std::fs::write(&thick, "[surface]\nfamily = \"compact-bump\"\nparams = { h = 1.5, s = 1.5 }\n[layer]\na = 0.3\n").unwrap();
    let o = qlayer(&["curvature", "--config", thick.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr_json(&o)["message"].as_str().unwrap().contains("layer.a"));

    let o = qlayer(&["curvature", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(6));
}

#[test]
fn usage_errors_and_bad_thread_counts() {
    assert_eq!(qlayer(&["bogus", "--config", "x.toml"]).status.code(), Some(2));
    let plane = configs().join("plane.toml");
    let o = Command::new(env!("CARGO_BIN_EXE_qlayer"))
        .args(["curvature", "--config", plane.to_str().unwrap()])
        .env("QLAYER_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(stderr_json(&o)["error"], "ValidationError");
}

#[test]
fn identities_pass_on_the_shipped_bump_and_write_csv() {
    let bump = configs().join("bump.toml");
    let o = qlayer(&["check-identities", "--config", bump.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "check,parameter,value,tolerance,pass");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r.ends_with(",true")), "{rows:?}");
}

#[test]
fn csv_sidecars_carry_the_other_tables() {
    let bump = configs().join("bump.toml");
    let out = scratch("bump-certify.csv");
    let o = qlayer(&["certify", "--config", bump.to_str().unwrap(), "--format", "csv", "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let sweep = std::fs::read_to_string(&out).unwrap();
    assert!(sweep.starts_with("sigma,sigma_r0,t0,"));
    assert_eq!(sweep.lines().count(), 12);
    let curv = scratch("bump-curvature.csv");
    let o = qlayer(&["curvature", "--config", bump.to_str().unwrap(), "--format", "csv", "--output", curv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(std::fs::read_to_string(&curv).unwrap().starts_with("r,gauss,mean,k_plus,k_minus"));
}

#[test]
fn sphere_patch_is_refused_by_certify() {
    let cfg = scratch("sphere.toml");
    std::fs::write(&cfg, "[surface]\nfamily = \"sphere-patch-test\"\nparams = { radius = 2.0 }\n[layer]\na = 0.5\n").unwrap();
    let o = qlayer(&["check-identities", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = qlayer(&["certify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr_json(&o)["message"].as_str().unwrap().contains("surface.family"));
}
