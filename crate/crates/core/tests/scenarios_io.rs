use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};

use sampled_cbf::scenarios::{
    load_scenario, log_csv_header, log_to_csv, log_to_svg, parse_scenario, run_scenario,
    run_tradeoff, tradeoff_to_csv, PairScanSpec, RobustnessConfig, RunOptions, ScenarioConfig,
    ScenarioError, DEFAULT_DT,
};

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn minimal() -> Value {
    json!({
        "model": {"type": "single_integrator", "dim": 2},
        "workspace": {"min_corner": [-5.0, -5.0], "max_corner": [5.0, 5.0]},
        "obstacles": [{"shape": {"type": "disc", "center": [2.0, 0.0], "radius": 0.5}}],
        "robot": {"shape": {"type": "disc", "center": [0.0, 0.0], "radius": 0.2}},
        "sampler": {"technique": "grid", "n": 40},
        "barrier": {"gamma": 0.05},
        "reference": {"type": "goal_point", "goal": [3.5, 0.0]},
        "initial_state": [0.0, 0.0],
        "t_end": 0.03
    })
}

fn cfg(v: &Value) -> ScenarioConfig {
    parse_scenario(&v.to_string()).unwrap()
}

/// Two point obstacles 0.2 m either side of a point robot: the two active
/// constraints push in opposite directions.
fn squeezed(gamma: f64) -> Value {
    json!({
        "model": {"type": "single_integrator", "dim": 2},
        "workspace": {
            "min_corner": [-5.0, -5.0],
            "max_corner": [5.0, 5.0],
            "sampler": {"technique": "grid", "n": 4000}
        },
        "obstacles": [
            {"shape": {"type": "point", "at": [-0.2, 0.0]}},
            {"shape": {"type": "point", "at": [0.2, 0.0]}}
        ],
        "robot": {"shape": {"type": "point", "at": [0.0, 0.0]}},
        "sampler": {"technique": "grid", "n": 3},
        "barrier": {"gamma": gamma},
        "reference": {"type": "goal_point", "goal": [0.0, 0.0]},
        "initial_state": [0.0, 0.0],
        "t_end": 0.02
    })
}

#[test]
fn minimal_file_gets_defaults() {
    let c = cfg(&minimal());
    assert_eq!(c.dt, DEFAULT_DT);
    assert_eq!(c.log_every, 1);
    assert_eq!(c.barrier.r_bar_fraction, 0.5);
    assert_eq!(c.barrier.activation_tolerance, 1e-8);
    assert_eq!(c.robustness, RobustnessConfig::Nominal);
    assert_eq!(c.pair_scan, PairScanSpec::Auto);
    assert_eq!(c.robot.position_indices, [0, 1]);
    assert_eq!(c.controller.kp.get(0), 0.5);
    assert_eq!(c.controller.ki.get(1), 0.01);
    assert_eq!(c.controller.kd.get(0), 0.1);
    assert_eq!(c.controller.integral_clamp, 10.0);
}

#[test]
fn missing_workspace_is_rejected() {
    let mut v = minimal();
    v.as_object_mut().unwrap().remove("workspace");
    match parse_scenario(&v.to_string()) {
        Err(ScenarioError::Validation(m)) => assert!(m.contains("workspace required")),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn parse_error_reports_position() {
    let text = "{\n  \"model\": {\"type\": \"omni\"},\n  \"t_end\": oops\n}";
    match parse_scenario(text) {
        Err(e @ ScenarioError::Parse { line, column, .. }) => {
            assert_eq!(line, 3);
            assert!(column > 0);
            assert_eq!(e.exit_code(), 2);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn shipped_scenarios_round_trip() {
    let mut count = 0;
    for entry in std::fs::read_dir(scenario_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let c = load_scenario(&path).unwrap();
            let again = parse_scenario(&c.to_json()).unwrap();
            assert_eq!(c, again, "{}", path.display());
            assert_eq!(c.hash(), again.hash());
            count += 1;
        }
    }
    assert_eq!(count, 6);
}

#[test]
fn csv_has_header_plus_one_row_per_logged_step() {
    let mut log = run_scenario(&cfg(&minimal()), RunOptions::default()).unwrap();
    assert_eq!(log.summary.steps, 3);
    // Steps 0..=3 are logged.
    assert_eq!(log_to_csv(&log).lines().count(), 5);
    log.records.truncate(3);
    let csv = log_to_csv(&log);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], log_csv_header(2, 2));
    let n_cols = lines[0].split(',').count();
    assert!(lines.iter().all(|l| l.split(',').count() == n_cols));
    assert!(lines[1].split(',').nth(11).unwrap() == "NaN");
}

#[test]
fn log_every_thins_rows() {
    let mut v = minimal();
    v["t_end"] = json!(0.1);
    v["log_every"] = json!(4);
    let log = run_scenario(&cfg(&v), RunOptions::default()).unwrap();
    let ts: Vec<f64> = log.records.iter().map(|r| (r.t * 100.0).round()).collect();
    assert_eq!(ts, vec![0.0, 4.0, 8.0]);
}

#[test]
fn svg_has_one_polyline_per_input() {
    let log = run_scenario(&cfg(&minimal()), RunOptions { oracle: true }).unwrap();
    let svg = log_to_svg(&log);
    assert!(svg.starts_with("<svg"));
    // b(t) plus one per filtered input coordinate.
    assert_eq!(svg.matches("<polyline").count(), 1 + 2);
    assert_eq!(svg.matches("<polygon").count(), 2);
    assert!(log.records.iter().all(|r| r.d_oracle.is_some()));
}

#[test]
fn runs_are_deterministic_apart_from_timing() {
    let mut v = minimal();
    v["disturbance"] = json!({"type": "uniform_box", "half_width": [0.3, 0.3], "seed": 4});
    v["robustness"] = json!({"type": "unstructured"});
    v["t_end"] = json!(0.5);
    let c = cfg(&v);
    let strip = |csv: String| -> Vec<String> {
        csv.lines()
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                f[..f.len() - 2].join(",")
            })
            .collect()
    };
    let a = strip(log_to_csv(
        &run_scenario(&c, RunOptions::default()).unwrap(),
    ));
    let b = strip(log_to_csv(
        &run_scenario(&c, RunOptions::default()).unwrap(),
    ));
    assert_eq!(a, b);
}

#[test]
fn tradeoff_rows_sorted_by_epsilon() {
    let mut v = minimal();
    v["t_end"] = json!(0.1);
    let report = run_tradeoff(&cfg(&v), &[80, 20, 40]).unwrap();
    let eps: Vec<f64> = report.rows.iter().map(|r| r.epsilon).collect();
    assert!(eps.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(report.rows[0].n_samples, 80);
    let csv = tradeoff_to_csv(&report);
    assert_eq!(
        csv.lines().next().unwrap(),
        "n_samples,epsilon,min_sampled_distance_at_deadlock,mean_qp_time_s,mean_filter_time_s"
    );
    assert_eq!(csv.lines().count(), 4);
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sampled-cbf"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, v.to_string()).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_string_lossy().into_owned();

    let good = write(dir.path(), "good.json", &minimal());
    let o = cli(&["run", &good, "--out-dir", &out, "--svg"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in ["good.csv", "good.svg", "good.meta.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert_eq!(cli(&["validate", &good]).status.code(), Some(0));
    let o = cli(&["certify", &good]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("shape,n,rho_m2,epsilon_m2"));

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{ not json").unwrap();
    assert_eq!(
        cli(&["validate", broken.to_str().unwrap()]).status.code(),
        Some(2)
    );

    let mut v = minimal();
    v.as_object_mut().unwrap().remove("workspace");
    let no_ws = write(dir.path(), "no_ws.json", &v);
    assert_eq!(
        cli(&["run", &no_ws, "--out-dir", &out]).status.code(),
        Some(2)
    );

    // b = 0.04 - 0.05 lies inside the domain, but both constraints demand
    // moving away from each other.
    let infeasible = write(dir.path(), "squeeze.json", &squeezed(0.05));
    assert_eq!(
        cli(&["run", &infeasible, "--out-dir", &out]).status.code(),
        Some(3)
    );

    // b = 0.04 - 0.1 is below -r_bar = -0.05.
    let outside = write(dir.path(), "outside.json", &squeezed(0.1));
    assert_eq!(
        cli(&["run", &outside, "--out-dir", &out]).status.code(),
        Some(4)
    );

    assert_eq!(cli(&["run", "/nonexistent/x.json"]).status.code(), Some(1));
}
