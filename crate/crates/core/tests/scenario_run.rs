use std::fs;
use std::path::Path;

use pevgame::scenario::{
    default_scenario, load_scenario, read_strategy, run, write_scenario, Scale, AGGREGATE_FILE, FIG_LOAD_FILE,
    FIG_POTENTIAL_FILE, FIG_SOC_FILE, ITERATION_FILE, MANIFEST_FILE, SCENARIO_FILE, STRATEGY_FILE, TRAJECTORY_FILE,
};

fn columns(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn desk_run_writes_consistent_reproducible_outputs() {
    let cfg = default_scenario(Scale::Desk);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run(&cfg, a.path()).unwrap();
    run(&cfg, b.path()).unwrap();
    assert!(first.summary.converged);

    for name in [TRAJECTORY_FILE, AGGREGATE_FILE, ITERATION_FILE, STRATEGY_FILE, SCENARIO_FILE, FIG_SOC_FILE] {
        let (x, y) = (fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
        assert_eq!(x, y, "{name} differs between identical runs");
    }

    let traj = fs::read_to_string(a.path().join(TRAJECTORY_FILE)).unwrap();
    assert!(traj.starts_with("player,t,x,u,delta,delta_c,delta_d\n"));
    assert_eq!(traj.lines().count(), 1 + cfg.players * cfg.horizon_slots);
    let agg = fs::read_to_string(a.path().join(AGGREGATE_FILE)).unwrap();
    assert!(agg.starts_with("t,d,sum_u,net_load,plugged\n"));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["summary"]["converged"], true);
    assert_eq!(manifest["files"].as_array().unwrap().len(), 9);

    assert_eq!(load_scenario(&a.path().join(SCENARIO_FILE)).unwrap(), cfg);
    assert_eq!(read_strategy(&a.path().join(STRATEGY_FILE)).unwrap(), first.strategies);

    for row in columns(&a.path().join(FIG_SOC_FILE)) {
        assert!(row[4] == 0.0 || row[4] == 1.0);
        assert!(row[2] >= row[3] - 1e-9 && row[2] <= 1.0 + 1e-9);
    }
    for row in columns(&a.path().join(FIG_LOAD_FILE)) {
        assert!(row[3] >= -1e-6 && row[3] <= row[4] + 1e-6, "net load {row:?}");
    }
    let pot = columns(&a.path().join(FIG_POTENTIAL_FILE));
    assert_eq!(pot.len(), 1 + first.iterations.len());
    assert!(pot.windows(2).all(|w| w[1][1] <= w[0][1]));
}

#[test]
fn written_scenario_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("paper.toml");
    let cfg = default_scenario(Scale::Paper);
    write_scenario(&cfg, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.contains("capacity_kwh"));
    assert!(text.contains("energy_cost_eur_per_kwh2"));
    assert_eq!(load_scenario(&path).unwrap(), cfg);
}

#[test]
fn missing_file_reports_its_path() {
    let err = load_scenario(Path::new("/nonexistent/scenario.toml")).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/scenario.toml"));
}
