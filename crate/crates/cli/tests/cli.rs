use std::path::Path;
use std::process::{Command, Output};

fn schedbench(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_schedbench"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SCHEDBENCH_OUTPUT_ROOT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_small_plan(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> String {
    let out = schedbench(
        &["plan", "--machine", "2000Q", "--output-dir", "sweep", "--seed", "3", "--out", "plan.json"],
        dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let path = dir.join("plan.json");
    let mut plan: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    plan["sizes"] = serde_json::json!([7, 8]);
    plan["instances_per_size"] = 2.into();
    plan["density"] = 2.25.into();
    plan["anneal_times_us"] = serde_json::json!([1.0]);
    plan["j_f_grid"] = serde_json::json!([-0.75, -1.5]);
    plan["sampler"]["num_reads"] = 25.into();
    plan["sampler"]["num_gauges"] = 2.into();
    plan["gauges"] = serde_json::Value::Null;
    plan["bootstrap_resamples"] = 100.into();
    edit(&mut plan);
    std::fs::write(&path, serde_json::to_string_pretty(&plan).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn invalid_plan_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write_small_plan(dir.path(), |p| p["j_f_grid"] = serde_json::json!([]));
    let out = schedbench(&["sweep", "--plan", &plan], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("sweep").join("cells.jsonl").exists());
}

#[test]
fn missing_file_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = schedbench(&["sweep", "--plan", "nope.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn generate_embed_and_sample() {
    let dir = tempfile::tempdir().unwrap();
    let out = schedbench(
        &["generate", "--sizes", "7,9", "--count", "2", "--density", "2.25", "--seed", "5", "--out", "ens"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let instances: Vec<_> = std::fs::read_dir(dir.path().join("ens/instances"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(instances.len(), 4);
    let first = instances[0].to_string_lossy().into_owned();

    let out = schedbench(
        &["embed", "--instance", &first, "--machine", "2X", "--ideal", "--out", "emb.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("length"));
    let emb: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("emb.json")).unwrap()).unwrap();
    assert!(emb["chains"].is_object());

    let out = schedbench(
        &["sample", "--instance", &first, "--reads", "20", "--anneal-time", "2", "--out", "s.jsonl"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        std::fs::read_to_string(dir.path().join("s.jsonl")).unwrap().lines().count(),
        21
    );
    let out = schedbench(
        &["sample", "--instance", &first, "--sampler", "replay", "--replay", "s.jsonl"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("/20 samples"));
}

#[test]
fn sweep_resumes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write_small_plan(dir.path(), |_| {});
    let out = schedbench(&["sweep", "--plan", &plan, "--max-cells", "3"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("pending"));
    assert!(!dir.path().join("sweep/result.json").exists());

    let out = schedbench(&["sweep", "--plan", &plan], dir.path());
    assert!(matches!(out.status.code(), Some(0) | Some(3)));
    let result = dir.path().join("sweep/result.json");
    assert!(result.exists());
    let result = result.to_string_lossy().into_owned();

    let out = schedbench(&["analyze", "--result", &result, "--out", "fits.json"], dir.path());
    assert!(out.status.success());
    assert!(stdout(&out).contains("u.opt"));

    let out = schedbench(&["report", "--result", &result, "--out", "report"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_dir(dir.path().join("report")).unwrap().count() >= 4);

    let out = schedbench(
        &["run", "--plan", &plan, "--anneal-time", "1", "--j-f", "-1.5"],
        dir.path(),
    );
    assert!(matches!(out.status.code(), Some(0) | Some(3)));
    assert!(stdout(&out).contains("J_F=-1.5"));
}

#[test]
fn output_root_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_schedbench"))
        .args(["generate", "--sizes", "8", "--count", "1", "--density", "2.25", "--out", "ens"])
        .env("SCHEDBENCH_OUTPUT_ROOT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("ens/manifest.json").exists());
}
