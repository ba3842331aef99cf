use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_inspect-plan"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(cmd: &mut Command) -> Output {
    cmd.arg("-q").output().expect("spawn inspect-plan")
}

fn cube_plan(out: &Path, extra: &[&str]) -> Output {
    let mut cmd = bin();
    cmd.arg("plan").arg("-c").arg(configs().join("cube.toml")).arg("-o").arg(out);
    for s in extra {
        cmd.args(["--set", s]);
    }
    run(&mut cmd)
}

#[test]
fn plan_writes_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cube_plan(tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["path.json", "mission.json", "stats.csv", "heatmap.csv", "heatmap.ply", "summary.json"] {
        assert!(tmp.path().join(f).is_file(), "missing {f}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["feasible"], true);
    assert!(summary["coverage"].as_f64().unwrap() >= 0.9);
    let stats = fs::read_to_string(tmp.path().join("stats.csv")).unwrap();
    assert_eq!(stats.lines().count(), 1 + 40);
}

#[test]
fn infeasible_plan_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cube_plan(
        tmp.path(),
        &["ga.generations=0", "ga.population_size=2", "ga.tournament_size=1", "ga.initial_path_points=2", "ga.rule_based_initialization_proportion=0.0", "ga.coverage_goal=1.0"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(tmp.path().join("summary.json").is_file());
}

#[test]
fn bad_config_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cube_plan(tmp.path(), &["ga.coverage_goal=1.5"]);
    assert_eq!(out.status.code(), Some(1));
    let out = cube_plan(tmp.path(), &["ga.no_such_key=1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = cube_plan(tmp.path(), &["space.no_fly_zones=[{ min = [-9.0, -9.0, -9.0], max = [9.0, 9.0, 9.0] }]"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("sweep.csv");
    let out = run(bin()
        .arg("sweep")
        .arg("-c")
        .arg(configs().join("cube.toml"))
        .args(["--param", "fov", "--values", "60,90,120", "--repetitions", "2", "-o"])
        .arg(&csv));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "param,value,rep,seed,length,coverage,poses,feasible,runtime_s,error"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.starts_with("fov,")));
}

#[test]
fn poses_and_heatmap_reuse_a_saved_plan() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = tmp.path().join("plan");
    assert_eq!(cube_plan(&plan, &[]).status.code(), Some(0));
    let mission = tmp.path().join("wide.json");
    let out = run(bin()
        .arg("poses")
        .arg("-c")
        .arg(configs().join("cube.toml"))
        .arg("--path")
        .arg(plan.join("path.json"))
        .args(["--fov", "120", "-o"])
        .arg(&mission));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let poses: Vec<serde_json::Value> = serde_json::from_slice(&fs::read(&mission).unwrap()).unwrap();
    assert!(!poses.is_empty());

    let heat = tmp.path().join("heat");
    let out = run(bin()
        .arg("heatmap")
        .arg("-c")
        .arg(configs().join("cube.toml"))
        .arg("--path")
        .arg(plan.join("path.json"))
        .arg("--mission")
        .arg(plan.join("mission.json"))
        .arg("--out-dir")
        .arg(&heat));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read(heat.join("heatmap.csv")).unwrap(),
        fs::read(plan.join("heatmap.csv")).unwrap()
    );
}

#[test]
fn gen_bridge_writes_a_mesh() {
    let tmp = tempfile::tempdir().unwrap();
    let obj = tmp.path().join("bridge.obj");
    let out = run(bin().arg("gen-bridge").arg("-o").arg(&obj));
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&obj).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 508);

    let out = run(bin().arg("gen-bridge").arg("-o").arg(tmp.path().join("bridge.xyz")));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn visibility_writes_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("vis.bin");
    let out = run(bin()
        .arg("visibility")
        .arg("-c")
        .arg(configs().join("cube.toml"))
        .arg("--cache")
        .arg(&cache));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(cache.is_file());
    assert!(String::from_utf8_lossy(&out.stdout).contains("coverage upper bound 1.0000"));
}
