//! End-to-end acceptance checks on the four shipped scenarios.
//!
//! Each test prints one `PASS`/`FAIL` line to stderr (bypassing the test
//! harness capture) before asserting, so a full `cargo test` log shows the
//! outcome of every criterion.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ringroad::clf::{dissipation_residual, Dissipation, FD_STEP};
use ringroad::geometry::RingConfig;
use ringroad::potentials::check_axioms;
use ringroad::simulation::{
    comparison_report, emit_outputs, run_scenario, set_key, RunResult, Scenario, METRICS_FILE,
    TRAJECTORY_FILE,
};
use ringroad::verify::{cross_model_check, equilibrium_control_error, equilibrium_fleet, StateSampler};
use ringroad::{Controller, Error, Family, Fault, Model, PotentialConfig};

const SCENARIOS: [&str; 4] = ["ncc_inviscid", "ncc_viscous", "prcc_inviscid", "prcc_viscous"];
const T_END: f64 = 200.0;

fn report(criterion: u8, title: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let line = format!("[acceptance] criterion {criterion} ({title}): {verdict} | {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"))
}

fn load(name: &str, overrides: &[(&str, &str)]) -> Scenario {
    let mut table: toml::Table = fs::read_to_string(scenario_path(name)).unwrap().parse().unwrap();
    for (k, v) in overrides {
        set_key(&mut table, k, v).unwrap();
    }
    Scenario::from_table(table).unwrap()
}

struct BaseRun {
    name: &'static str,
    scenario: Scenario,
    result: RunResult,
    elapsed: Duration,
}

/// The four reference runs, computed once and shared by every criterion.
fn base_runs() -> &'static [BaseRun] {
    static RUNS: OnceLock<Vec<BaseRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        SCENARIOS
            .iter()
            .map(|&name| {
                let scenario = load(name, &[]);
                assert_eq!(scenario.integrator.t_end, T_END);
                assert_eq!(scenario.integrator.dt, 1e-3);
                let start = Instant::now();
                let result = run_scenario(&scenario).unwrap();
                BaseRun {
                    name,
                    scenario,
                    result,
                    elapsed: start.elapsed(),
                }
            })
            .collect()
    })
}

#[test]
fn criterion_1_safety() {
    let mut ok = true;
    let mut details = Vec::new();
    for run in base_runs() {
        let r = &run.result;
        let min_gap = r.metrics.min_gap.iter().copied().fold(f64::INFINITY, f64::min);
        let margins = r.min_margins;
        let pass = r.passed()
            && r.steps_taken == run.scenario.integrator.steps()
            && min_gap > 6.0
            && margins.all_positive()
            && r.max_effort.is_finite()
            && run.elapsed < Duration::from_secs(120);
        ok &= pass;
        details.push(format!(
            "{} min_gap={min_gap:.4} min_margin={:.4} max_effort={:.3} time={:.1}s",
            run.name,
            margins.as_array().into_iter().fold(f64::INFINITY, f64::min),
            r.max_effort,
            run.elapsed.as_secs_f64()
        ));
        if let Some(v) = &r.violation {
            details.push(format!("{}: {v}", run.name));
        }
    }
    report(1, "safety", ok, &details.join("; "));
    assert!(ok, "{details:?}");
}

#[test]
fn criterion_2_convergence() {
    let mut ok = true;
    let mut details = Vec::new();
    for run in base_runs() {
        let m = &run.result.metrics;
        let tol = run.scenario.monitors.convergence_tolerance;
        assert_eq!(tol, 1e-3);
        let (end, mid) = (m.index_at(T_END).unwrap(), m.index_at(100.0).unwrap());
        assert!((m.t[end] - T_END).abs() < 1e-9 && (m.t[mid] - 100.0).abs() < 1e-9);
        for (label, col) in [
            ("angular_error", &m.sup_angular_error),
            ("accel", &m.sup_accel),
            ("orientation", &m.sup_orientation),
        ] {
            let pass = col[end] < tol && col[end] < col[mid];
            ok &= pass;
            details.push(format!("{} {label}: {:.2e} (t=100: {:.2e})", run.name, col[end], col[mid]));
        }
    }
    report(2, "convergence", ok, &details.join("; "));
    assert!(ok, "{details:?}");
}

#[test]
fn criterion_3_lyapunov_monotone() {
    let mut ok = true;
    let mut details = Vec::new();
    for run in base_runs() {
        let m = &run.result.metrics;
        let worst = m.worst_clf_increase();
        let pass = run.result.passed() && m.t.last() == Some(&T_END) && worst <= 1e-6;
        ok &= pass;
        details.push(format!(
            "{} H: {:.3e} -> {:.3e}, worst relative step {worst:.2e}",
            run.name,
            m.clf[0],
            m.clf[m.len() - 1]
        ));
    }
    report(3, "lyapunov monotonicity", ok, &details.join("; "));
    assert!(ok, "{details:?}");
}

fn reference_model(family: Family, n: usize, q2: f64) -> Model {
    let params = match family {
        Family::Ncc => PotentialConfig::reference_ncc(q2),
        Family::Prcc => PotentialConfig::reference_prcc(q2),
    };
    Model::reference(n, params)
}

struct Survey {
    samples: usize,
    identity: f64,
    /// Largest `(fd - bound) / max(1, |bound|)`.
    excess: f64,
    excess_abs: f64,
    slack: f64,
    unresolved: usize,
}

fn survey(controller: &Controller, q2: f64, seed: u64) -> Survey {
    let sampler = StateSampler::default();
    let mut out = Survey {
        samples: 0,
        identity: 0.0,
        excess: f64::NEG_INFINITY,
        excess_abs: f64::NEG_INFINITY,
        slack: 0.0,
        unresolved: 0,
    };
    for (k, n) in [2usize, 3, 5].into_iter().enumerate() {
        let model = reference_model(controller.family, n, q2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + k as u64);
        for _ in 0..1000 {
            let w = sampler.clustered(&mut rng, &model.ring).unwrap();
            out.samples += 1;
            match dissipation_residual(&w, &model, controller, FD_STEP) {
                Ok(d) => {
                    out.identity = out.identity.max((d.fd - d.exact).abs() / Dissipation::scale(d.exact));
                    out.excess = out.excess.max((d.fd - d.bound) / Dissipation::scale(d.bound));
                    out.excess_abs = out.excess_abs.max(d.fd - d.bound);
                    out.slack = out.slack.max(d.bound - d.exact);
                }
                Err(Error::Unresolved { .. }) => out.unresolved += 1,
                Err(e) => panic!("{e}"),
            }
        }
    }
    out
}

#[test]
fn criterion_4_dissipation_identity() {
    let mut ok = true;
    let mut details = Vec::new();
    for (family, q2) in [(Family::Ncc, 0.0), (Family::Ncc, 0.1), (Family::Prcc, 0.0), (Family::Prcc, 0.1)] {
        let name = format!("{family}{}", if q2 > 0.0 { " viscous" } else { " inviscid" });
        let s = survey(&Controller::new(family), q2, 2024);
        let pass = s.unresolved == 0 && s.identity <= 1e-6 && s.excess <= 1e-6;
        ok &= pass;
        details.push(format!(
            "{name}: {} states, identity {:.2e}, bound excess {:.2e} (absolute {:.2e}), max(bound - exact) {:.2e}",
            s.samples, s.identity, s.excess, s.excess_abs, s.slack
        ));

        let f = survey(&Controller::new(family).with_fault(Fault::FlipRadialGradient), q2, 2024);
        let caught = f.unresolved > 0 || f.identity > 1e-6 || f.excess > 1e-6;
        ok &= caught;
        details.push(format!(
            "{name} flipped: identity {:.2e}, bound excess {:.2e} ({})",
            f.identity,
            f.excess,
            if caught { "rejected" } else { "NOT rejected" }
        ));
    }
    report(4, "dissipation identity", ok, &details.join("; "));
    assert!(ok, "{details:?}");
}

#[test]
fn criterion_5_cross_model() {
    let mut worst = 0.0f64;
    for name in SCENARIOS {
        let sc = load(name, &[]);
        let ring = sc.model().unwrap().ring;
        worst = worst.max(cross_model_check(&sc.initial_fleet(&ring).unwrap(), &ring, 1e-3, 10.0).unwrap());
    }
    let ring = RingConfig::reference(5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let w = StateSampler::default().clustered(&mut rng, &ring).unwrap();
        worst = worst.max(cross_model_check(&w, &ring, 1e-3, 10.0).unwrap());
    }
    let ok = worst < 1e-6;
    report(5, "cross-model oracle", ok, &format!("max state deviation {worst:.2e} over 10 s at dt=1e-3"));
    assert!(ok);
}

#[test]
fn criterion_6_axioms() {
    let mut ok = true;
    let mut details = Vec::new();
    for (label, params) in [
        ("ncc gains", PotentialConfig::reference_ncc(0.1)),
        ("prcc gains", PotentialConfig::reference_prcc(0.1)),
    ] {
        let model = Model::reference(10, params);
        let r = check_axioms(model.potentials.as_ref(), model.shaping.as_ref(), &model.ring, 100);
        ok &= r.passed();
        details.push(format!("{label}: {} axioms, {} failures", r.checked.len(), r.failures.len()));
        for f in &r.failures {
            details.push(f.to_string());
        }
    }
    report(6, "potential axioms", ok, &details.join("; "));
    assert!(ok, "{details:?}");
}

fn conditions(err: Error) -> Vec<String> {
    match err {
        Error::InvalidConfig(issues) => issues.into_iter().map(|i| i.condition).collect(),
        other => panic!("expected a configuration error, got {other}"),
    }
}

#[test]
fn criterion_7_config_gate() {
    let base = load("ncc_viscous", &[]);
    let reference_ok = base.validate().is_ok();
    let ring = base.model().unwrap().ring;
    let params = base.effective_potentials();
    let inequalities = ring.theta.cos() > 0.9 && params.b > 1.0 / 400.0;

    let theta = conditions(load("ncc_viscous", &[("ring.theta", "0.48")]).model().unwrap_err());
    let omega = conditions(
        load("ncc_viscous", &[("ring.omega_star", &(10.0f64 / 60.0).to_string())])
            .model()
            .unwrap_err(),
    );
    let theta_ok = theta == ["cos(theta) > R_out*omega_star/v_max"];
    let omega_ok = omega == ["omega_star < v_max/R_out", "cos(theta) > R_out*omega_star/v_max"];
    let ok = reference_ok && inequalities && theta_ok && omega_ok;
    report(
        7,
        "config gate",
        ok,
        &format!(
            "reference valid={reference_ok}, cos(theta)={:.5}, b={}; theta=0.48 -> {theta:?}; omega*=v_max/R_out -> {omega:?}",
            ring.theta.cos(),
            params.b
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_8_equilibrium() {
    let mut worst_control = 0.0f64;
    for (family, q2) in [(Family::Ncc, 0.0), (Family::Ncc, 0.1), (Family::Prcc, 0.0), (Family::Prcc, 0.1)] {
        for n in [1usize, 2, 5, 10] {
            let model = reference_model(family, n, q2);
            for radii in [(40.0, 40.0), (37.5, 42.5), (31.0, 49.0)] {
                let w = equilibrium_fleet(&model.ring, radii);
                let err = equilibrium_control_error(&w, &model, &Controller::new(family)).unwrap();
                worst_control = worst_control.max(err);
            }
        }
    }
    let mut ok = worst_control <= 2.0 * f64::EPSILON;
    let mut details = vec![format!("max control deviation on equilibria {worst_control:.1e}")];
    for run in base_runs() {
        let m = &run.result.metrics;
        let end = m.equilibrium_residual[m.len() - 1];
        let mid = m.equilibrium_residual[m.index_at(100.0).unwrap()];
        ok &= end < 1e-2;
        details.push(format!("{} end residual {end:.2e} (t=100: {mid:.2e})", run.name));
    }
    report(8, "equilibrium fixed point", ok, &details.join("; "));
    assert!(ok, "{details:?}");
}

#[test]
fn criterion_9_determinism_and_step_halving() {
    let mut ok = true;
    let mut details = Vec::new();
    let tmp = tempfile::tempdir().unwrap();
    for run in base_runs() {
        let sc = &run.scenario;
        let (a, b) = (tmp.path().join(format!("{}-a", run.name)), tmp.path().join(format!("{}-b", run.name)));
        emit_outputs(&run.result, sc, &a).unwrap();
        emit_outputs(&run_scenario(sc).unwrap(), sc, &b).unwrap();
        let identical = [TRAJECTORY_FILE, METRICS_FILE]
            .iter()
            .all(|f| fs::read(a.join(f)).unwrap() == fs::read(b.join(f)).unwrap());

        let every = 2 * sc.integrator.record_every;
        let halved = load(
            run.name,
            &[("integrator.dt", "5e-4"), ("integrator.record_every", &every.to_string())],
        );
        let fine = run_scenario(&halved).unwrap();
        let (m, n) = (&run.result.metrics, &fine.metrics);
        assert_eq!(m.len(), n.len());
        let last = m.len() - 1;
        let diff = m
            .row(last)
            .iter()
            .zip(n.row(last))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let pass = identical && fine.passed() && diff < 1e-6;
        ok &= pass;
        details.push(format!("{}: byte-identical={identical}, dt/2 end-metric change {diff:.2e}", run.name));
    }

    let runs = base_runs();
    for (x, y) in [(0, 1), (2, 3)] {
        let table = comparison_report((runs[x].name, &runs[x].result), (runs[y].name, &runs[y].result), 1e-3);
        let _ = std::io::stderr().write_all(format!("[acceptance] comparison\n{table}").as_bytes());
    }
    report(9, "determinism and discretization", ok, &details.join("; "));
    assert!(ok, "{details:?}");
}
