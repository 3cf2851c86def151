use std::fs;
use std::path::{Path, PathBuf};

use ringroad::simulation::{
    comparison_report, emit_outputs, run_scenario, set_key, InitSpec, MonitorKind, Scenario,
    METRICS_FILE, SCENARIO_FILE, SUMMARY_FILE, TRAJECTORY_FILE,
};
use ringroad::verify::equilibrium_fleet;
use ringroad::Fault;

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"))
}

fn scenario(name: &str, overrides: &[(&str, &str)]) -> Scenario {
    let text = fs::read_to_string(scenario_path(name)).unwrap();
    let mut table: toml::Table = text.parse().unwrap();
    for (k, v) in overrides {
        set_key(&mut table, k, v).unwrap();
    }
    Scenario::from_table(table).unwrap()
}

const ALL: [&str; 4] = ["ncc_inviscid", "ncc_viscous", "prcc_inviscid", "prcc_viscous"];

fn read(dir: &Path, file: &str) -> Vec<u8> {
    fs::read(dir.join(file)).unwrap()
}

#[test]
fn shipped_scenarios_parse_and_validate() {
    for name in ALL {
        let sc = Scenario::load(&scenario_path(name)).unwrap();
        assert_eq!(sc.name, name);
        sc.validate().unwrap();
        assert_eq!(sc.model().unwrap().n(), 10);
    }
}

#[test]
fn identical_scenarios_give_identical_files_and_the_echo_reproduces_them() {
    let sc = scenario("ncc_viscous", &[("integrator.t_end", "2.0")]);
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    emit_outputs(&run_scenario(&sc).unwrap(), &sc, &a).unwrap();
    emit_outputs(&run_scenario(&sc).unwrap(), &sc, &b).unwrap();
    for file in [TRAJECTORY_FILE, METRICS_FILE, SCENARIO_FILE, SUMMARY_FILE] {
        assert_eq!(read(&a, file), read(&b, file), "{file} differs between identical runs");
    }

    let echoed = Scenario::load(&a.join(SCENARIO_FILE)).unwrap();
    assert_eq!(echoed.to_toml_string().unwrap(), sc.to_toml_string().unwrap());
    emit_outputs(&run_scenario(&echoed).unwrap(), &echoed, &c).unwrap();
    assert_eq!(read(&a, METRICS_FILE), read(&c, METRICS_FILE));
    assert_eq!(read(&a, TRAJECTORY_FILE), read(&c, TRAJECTORY_FILE));
}

#[test]
fn trajectory_rows_and_columns_follow_decimation_and_fleet_size() {
    for (every, rows) in [(100usize, 21usize), (7, 2000 / 7 + 1), (2000, 2), (3000, 1)] {
        let sc = scenario(
            "prcc_inviscid",
            &[("integrator.t_end", "2.0"), ("integrator.record_every", &every.to_string())],
        );
        let result = run_scenario(&sc).unwrap();
        assert!(result.passed());
        let tmp = tempfile::tempdir().unwrap();
        emit_outputs(&result, &sc, tmp.path()).unwrap();
        let text = fs::read_to_string(tmp.path().join(TRAJECTORY_FILE)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), rows + 1, "record_every = {every}");
        for line in &lines {
            assert_eq!(line.split(',').count(), 1 + 6 * 10);
        }
        assert!(lines[0].starts_with("t,r_0,phi_0,s_0,v_0,F_0,delta_0,r_1"));
        let metrics = fs::read_to_string(tmp.path().join(METRICS_FILE)).unwrap();
        assert_eq!(metrics.lines().count(), rows + 1);
    }
}

#[test]
fn outputs_include_one_plot_script_per_figure() {
    let sc = scenario("ncc_inviscid", &[("integrator.t_end", "0.5")]);
    let tmp = tempfile::tempdir().unwrap();
    let written = emit_outputs(&run_scenario(&sc).unwrap(), &sc, tmp.path()).unwrap();
    let scripts: Vec<_> = written
        .iter()
        .filter(|p| p.extension().is_some_and(|e| e == "py"))
        .collect();
    assert_eq!(scripts.len(), 5);
    for s in scripts {
        let text = fs::read_to_string(s).unwrap();
        assert!(text.contains(METRICS_FILE) && text.contains("savefig"));
    }
}

#[test]
fn equilibrium_fleet_stays_put() {
    for name in ALL {
        let mut sc = scenario(name, &[("integrator.t_end", "5.0"), ("integrator.record_every", "500")]);
        let ring = sc.model().unwrap().ring;
        let w0 = equilibrium_fleet(&ring, (37.5, 42.5));
        sc.init = InitSpec::Explicit {
            vehicles: w0.vehicles.clone(),
        };
        let result = run_scenario(&sc).unwrap();
        assert!(result.passed(), "{name}: {:?}", result.violation);
        let m = &result.metrics;
        assert_eq!(m.len(), 11);
        for k in 0..m.len() {
            assert!(m.sup_angular_error[k] < 1e-12, "{name}: {}", m.sup_angular_error[k]);
            assert!(m.sup_accel[k] < 1e-10, "{name}: {}", m.sup_accel[k]);
            assert!(m.sup_orientation[k] < 1e-12, "{name}: {}", m.sup_orientation[k]);
            assert!(m.clf[k] < 1e-20, "{name}: {}", m.clf[k]);
            assert!((m.min_gap[k] - m.min_gap[0]).abs() < 1e-9, "{name}: gap drifted");
        }
    }
}

#[test]
fn flipped_radial_gradient_fires_the_dissipation_monitor_at_the_first_check() {
    for name in ALL {
        let mut sc = scenario(name, &[("integrator.t_end", "1.0")]);
        sc.controller.fault = Some(Fault::FlipRadialGradient);
        let result = run_scenario(&sc).unwrap();
        let v = result.violation.expect("fault must be detected");
        assert_eq!(v.kind, MonitorKind::Dissipation, "{name}: {v}");
        assert_eq!(v.step, 0, "{name}: {v}");
    }
}

#[test]
fn oversized_steps_are_reported_as_monitor_violations() {
    let sc = scenario("ncc_inviscid", &[("integrator.dt", "0.5"), ("integrator.t_end", "100.0")]);
    let result = run_scenario(&sc).unwrap();
    let v = result.violation.expect("a 0.5 s step cannot track the closed loop");
    assert!(matches!(v.kind, MonitorKind::StateSpace | MonitorKind::Clf), "{v}");
    assert!(result.steps_taken < 200);
}

#[test]
fn viscous_and_inviscid_runs_are_compared_side_by_side() {
    let a = scenario("ncc_inviscid", &[("integrator.t_end", "5.0")]);
    let b = scenario("ncc_viscous", &[("integrator.t_end", "5.0")]);
    assert_eq!(
        a.initial_fleet(&a.model().unwrap().ring).unwrap(),
        b.initial_fleet(&b.model().unwrap().ring).unwrap()
    );
    let (ra, rb) = (run_scenario(&a).unwrap(), run_scenario(&b).unwrap());
    let report = comparison_report(("inviscid", &ra), ("viscous", &rb), 1e-3);
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "metric,inviscid,viscous");
    assert_eq!(lines.len(), 10);
    for line in &lines[1..] {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 3, "{line}");
        for c in &cells[1..] {
            c.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn configuration_errors_are_distinguished_from_runtime_failures() {
    for (key, value) in [
        ("ring.theta", "0.48"),
        ("ring.omega_star", "0.16666666666666666"),
        ("integrator.dt", "-1.0"),
        ("potentials.q2", "0.0"),
    ] {
        let sc = scenario("ncc_viscous", &[(key, value)]);
        let err = run_scenario(&sc).unwrap_err();
        assert!(err.is_config(), "{key} = {value}: {err}");
    }
    let text = fs::read_to_string(scenario_path("ncc_inviscid")).unwrap();
    let err = Scenario::from_toml_str(&text.replace("[ring]", "[ring]\nbogus = 1")).unwrap_err();
    assert!(err.is_config(), "{err}");
}
