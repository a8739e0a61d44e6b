use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sco_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sco-lab"))
        .args(args)
        .env_remove("SCO_LAB_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn geometry_count_prints_thirteen() {
    let o = sco_lab(&["geometry", "count", "--d", "2", "--R", "2"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "13");
}

#[test]
fn bounds_json_has_combined_term() {
    let o = sco_lab(&["bounds", "--d", "4", "--R", "2", "--eps", "0.1", "--delta", "0.25"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["combined"].as_f64().unwrap() - 2.104).abs() < 1e-3);
    assert_eq!(v["query"]["d"], 4);
}

#[test]
fn verify_gadget_passes() {
    let o = sco_lab(&["verify", "--suite", "gadget"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn verify_rejects_an_invalid_gadget_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    // γ above μ/24 fails validation when the document is loaded
    fs::write(
        &path,
        r#"{"family":"block_gadget","d":2,"mu":1.0,"L":64.0,"tau":2,"gamma":1.0,"b":[1],"sigma":1.0}"#,
    )
    .unwrap();
    let o = sco_lab(&["verify", "--suite", "gadget", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(sco_lab(&["simulate", "--bogus"]).status.code(), Some(2));
    assert_eq!(sco_lab(&["geometry", "count", "--d", "2"]).status.code(), Some(2));
    let o = sco_lab(&["simulate", "--family", "coin", "--eps", "0.1", "--m-grid", "8,4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("m_grid"));
}

fn simulate_into(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "simulate", "--family", "coin", "--d", "6", "--R", "1", "--eps", "0.05", "--trials", "60", "--m-grid",
        "16,128,1024", "--seed", "5", "--id", "coin", "--out",
    ];
    args.push(out.to_str().unwrap());
    args.extend_from_slice(extra);
    sco_lab(&args)
}

#[test]
fn simulate_writes_artifacts_and_replays_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let o = simulate_into(&a, &["--threads", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let exp = a.join("coin");
    let csv = fs::read_to_string(exp.join("trials.csv")).unwrap();
    assert!(csv.starts_with("experiment_id,family,rule,d,R,eps,delta,m,trial,seed,excess,success"));
    assert_eq!(csv.lines().count(), 1 + 3 * 60);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(exp.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 5);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(exp.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["per_m"].as_array().unwrap().len(), 3);

    // replay from the manifest with a different thread count
    let b = dir.path().join("b");
    let o = Command::new(env!("CARGO_BIN_EXE_sco-lab"))
        .args(["simulate", "--config", exp.join("manifest.json").to_str().unwrap(), "--out", b.to_str().unwrap()])
        .env("SCO_LAB_THREADS", "3")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(b.join("coin/trials.csv")).unwrap(), csv.as_bytes());
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate_into(dir.path(), &[]);
    assert!(o.status.success());
    let manifest = dir.path().join("coin/manifest.json");
    let out = dir.path().join("override");
    let o = sco_lab(&[
        "simulate", "--config", manifest.to_str().unwrap(), "--trials", "10", "--id", "small", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("small/trials.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 10);
    // instance flags without --family are rejected rather than ignored
    let o = sco_lab(&["simulate", "--config", manifest.to_str().unwrap(), "--d", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ratefit_reads_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for (i, eps) in ["0.2", "0.1", "0.05"].iter().enumerate() {
        let id = format!("q{i}");
        let o = sco_lab(&[
            "simulate", "--family", "quad-gaussian", "--feasible", "all-space", "--rule", "continuous_erm", "--d", "2",
            "--eps", eps, "--trials", "200", "--m-grid", "1,2,4,8,16,32,64,128,256,512", "--fixed-instance", "--id",
            &id, "--out", dir.path().to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        paths.push(dir.path().join(id).join("summary.json"));
    }
    let fit_path = dir.path().join("fit.json");
    let mut args = vec!["ratefit".to_string()];
    args.extend(paths.iter().map(|p| p.to_str().unwrap().to_string()));
    args.extend(["--out".into(), fit_path.to_str().unwrap().to_string()]);
    let o = Command::new(env!("CARGO_BIN_EXE_sco-lab")).args(&args).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(fit_path).unwrap()).unwrap();
    let slope = fit["slope"].as_f64().unwrap();
    assert!((0.5..=1.5).contains(&slope), "slope {slope}");

    // two summaries cannot support a fit
    let o = sco_lab(&["ratefit", paths[0].to_str().unwrap(), paths[1].to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn geometry_packing_csv_has_header_line() {
    let o = sco_lab(&["geometry", "packing", "--d", "8", "--R", "3", "--seed", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(header["d"], 8);
    assert!(text.lines().nth(1).unwrap().starts_with("x1,"));
}
