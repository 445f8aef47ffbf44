use std::fs;
use std::path::PathBuf;

use bfd_core::cli::run_cli;
use bfd_core::harness::RunConfig;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bfd-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn tiny() -> RunConfig {
    let mut c = RunConfig::default();
    c.kernel.n_theta = 8;
    c.kernel.n_phi = 4;
    c.grid.n_per_axis = 4;
    c.grid.extent = 6.0;
    c.space.modes_per_axis = 8;
    c.t_final = 0.003;
    c.decay.samples = 12;
    c
}

fn run(dir: &PathBuf, cmd: &str, cfg: &RunConfig) -> i32 {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string(cfg).unwrap()).unwrap();
    run_cli(["bfd", cmd, "--config", path.to_str().unwrap(), "--out", dir.to_str().unwrap()])
}

#[test]
fn constants_writes_moments_and_operator() {
    let dir = scratch("constants");
    assert_eq!(run(&dir, "constants", &tiny()), 0);
    let moments: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("moments.json")).unwrap()).unwrap();
    assert!(moments["E2"].as_f64().unwrap() > 0.0);
    assert!(dir.join("collision.json").exists());
    let entries: Vec<String> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert!(entries.iter().any(|e| e.ends_with(".bin")), "{entries:?}");
}

#[test]
fn converge_writes_one_row_per_epsilon_and_the_fitted_orders() {
    let dir = scratch("converge");
    assert_eq!(run(&dir, "converge", &tiny()), 0);
    let text = fs::read_to_string(dir.join("errors.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "epsilon,E_sup,E_fluid,E_micro");
    let data: Vec<&str> = lines.iter().copied().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(data.len(), 3);
    for l in &data {
        let cols: Vec<f64> = l.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 4);
        assert!(cols.iter().all(|x| x.is_finite() && *x > 0.0), "{l}");
    }
    assert!(lines.iter().any(|l| l.starts_with("# fitted_order,")));
    assert!(lines.iter().any(|l| l.starts_with("# envelope,")));
    assert_eq!(fs::read_dir(dir.join("rows")).unwrap().count(), 3);
}

#[test]
fn evolve_resumes_from_its_own_state() {
    let whole = scratch("evolve-whole");
    let split = scratch("evolve-split");
    let mut cfg = tiny();
    cfg.epsilons = vec![0.5];
    cfg.t_final = 0.004;
    assert_eq!(run(&whole, "evolve", &cfg), 0);

    let path = split.join("config.json");
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let (steps, dt) = cfg.dt.uniform_steps(0.0, cfg.t_final, 0.5).unwrap();
    let half = (steps / 2) as f64 * dt;
    let first = split.join("first");
    let base = ["bfd", "evolve", "--config", path.to_str().unwrap()];
    let until = half.to_string();
    let mut a: Vec<&str> = base.to_vec();
    a.extend(["--out", first.to_str().unwrap(), "--until", &until]);
    assert_eq!(run_cli(a), 0);
    let state = first.join("state.json");
    let second = split.join("second");
    let mut b: Vec<&str> = base.to_vec();
    b.extend(["--out", second.to_str().unwrap(), "--resume", state.to_str().unwrap()]);
    assert_eq!(run_cli(b), 0);

    let x: serde_json::Value = serde_json::from_str(&fs::read_to_string(whole.join("state.json")).unwrap()).unwrap();
    let y: serde_json::Value = serde_json::from_str(&fs::read_to_string(second.join("state.json")).unwrap()).unwrap();
    assert_eq!(x, y);
}

#[test]
fn alpha_outside_the_admissible_range_is_a_validation_error() {
    let dir = scratch("alpha");
    let mut cfg = tiny();
    cfg.alpha = 0.3;
    assert_eq!(run(&dir, "converge", &cfg), 1);
    let err = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap_err();
    assert!(err.to_string().contains("1/4"), "{err}");
}

#[test]
fn unknown_subcommands_and_fields_exit_with_one() {
    assert_eq!(run_cli(["bfd", "frobnicate"]), 1);
    assert_eq!(run_cli(["bfd"]), 1);
    let dir = scratch("unknown-field");
    let path = dir.join("config.json");
    fs::write(&path, r#"{"not_a_field": 1}"#).unwrap();
    assert_eq!(run_cli(["bfd", "coeffs", "--config", path.to_str().unwrap(), "--out", dir.to_str().unwrap()]), 1);
    assert_eq!(run_cli(["bfd", "coeffs", "--config", "/nonexistent/config.json"]), 1);
}

#[test]
fn fixedpoint_demo_needs_no_config() {
    let dir = scratch("fixedpoint");
    assert_eq!(run_cli(["bfd", "fixedpoint-demo", "--out", dir.to_str().unwrap()]), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("fixedpoint.json")).unwrap()).unwrap();
    let y = v[0][1]["y"][0].as_f64().unwrap();
    assert!((y - 2.0 / 15.0).abs() < 1e-12);
}
