use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::metrics::MetricsSeries;
use super::run::{RunResult, TrajectoryRecord};
use super::scenario::Scenario;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SCENARIO_FILE: &str = "scenario.toml";
pub const SUMMARY_FILE: &str = "summary.txt";

/// Trajectory table: `t`, then `r, phi, s, v, F, delta` per vehicle.
pub fn trajectory_csv(record: &TrajectoryRecord) -> String {
    let n = record.states.first().map_or(0, |w| w.len());
    let mut out = String::from("t");
    for i in 0..n {
        for c in ["r", "phi", "s", "v", "F", "delta"] {
            write!(out, ",{c}_{i}").unwrap();
        }
    }
    out.push('\n');
    for ((t, w), u) in record.t.iter().zip(&record.states).zip(&record.controls) {
        write!(out, "{t}").unwrap();
        for (x, c) in w.vehicles.iter().zip(u) {
            write!(out, ",{},{},{},{},{},{}", x.r, x.phi, x.s, x.v, c.accel, c.steering).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn metrics_csv(m: &MetricsSeries) -> String {
    let mut out = MetricsSeries::COLUMNS.join(",");
    out.push('\n');
    for k in 0..m.len() {
        let row: Vec<String> = m.row(k).iter().map(f64::to_string).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Human-readable verdict and extremal values of a run.
pub fn summary_text(result: &RunResult, sc: &Scenario) -> String {
    let mut out = String::new();
    let verdict = match &result.violation {
        None => "pass".to_owned(),
        Some(v) => format!("fail: {v}"),
    };
    writeln!(out, "scenario: {}", sc.name).unwrap();
    writeln!(out, "verdict: {verdict}").unwrap();
    writeln!(out, "steps: {}", result.steps_taken).unwrap();
    let m = &result.min_margins;
    for (name, value) in [
        "inner_radius",
        "outer_radius",
        "min_speed",
        "max_speed",
        "orientation",
        "gap",
    ]
    .iter()
    .zip(m.as_array())
    {
        writeln!(out, "min_margin_{name}: {value}").unwrap();
    }
    writeln!(out, "max_effort: {}", result.max_effort).unwrap();
    writeln!(out, "dissipation_checks: {}", result.dissipation.checks).unwrap();
    writeln!(
        out,
        "worst_dissipation_margin: {}",
        result.dissipation.worst_relative_margin
    )
    .unwrap();
    if let Some(k) = result.metrics.len().checked_sub(1) {
        for (name, value) in MetricsSeries::COLUMNS.iter().zip(result.metrics.row(k)) {
            writeln!(out, "final_{name}: {value}").unwrap();
        }
    }
    out
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes the trajectory, metrics, scenario echo, summary and plot scripts
/// into `dir`, creating it if needed. Returns the written paths.
pub fn emit_outputs(result: &RunResult, sc: &Scenario, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = vec![
        write(dir, TRAJECTORY_FILE, &trajectory_csv(&result.record))?,
        write(dir, METRICS_FILE, &metrics_csv(&result.metrics))?,
        write(dir, SCENARIO_FILE, &sc.to_toml_string()?)?,
        write(dir, SUMMARY_FILE, &summary_text(result, sc))?,
    ];
    written.extend(emit_plot_scripts(dir, &sc.name)?);
    Ok(written)
}

/// One script per figure, each reading `metrics.csv` from its own
/// directory and saving a PNG next to it.
const PLOTS: [(&str, &str, &str, bool); 5] = [
    ("angular_error", "sup_angular_error", "max_i |v_i/r_i - omega*| (rad/s)", true),
    ("acceleration", "sup_accel", "max_i |F_i| (m/s^2)", true),
    ("orientation", "sup_orientation", "max_i |s_i| (rad)", true),
    ("min_gap", "min_gap", "min_{i!=j} d_ij (m)", false),
    ("clf", "clf", "Lyapunov function", true),
];

fn plot_script(title: &str, column: &str, label: &str, log: bool, stem: &str) -> String {
    let scale = if log { "ax.set_yscale(\"log\")\n" } else { "" };
    let floor = if column == "min_gap" {
        "ax.axhline(L, color=\"red\", linestyle=\"--\", label=\"L\")\nax.legend()\n"
    } else {
        ""
    };
    format!(
        r#"#!/usr/bin/env python3
"""{title}: {label} against time."""
import csv
import pathlib
import tomllib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = pathlib.Path(__file__).resolve().parent
with open(here / "{METRICS_FILE}", newline="") as fh:
    rows = list(csv.DictReader(fh))
with open(here / "{SCENARIO_FILE}", "rb") as fh:
    L = tomllib.load(fh)["ring"]["min_gap"]

t = [float(r["t"]) for r in rows]
y = [float(r["{column}"]) for r in rows]

fig, ax = plt.subplots(figsize=(6, 3.5))
ax.plot(t, y)
{scale}{floor}ax.set_xlabel("t (s)")
ax.set_ylabel("{label}")
ax.set_title("{title}")
fig.tight_layout()
fig.savefig(here / "{stem}.png", dpi=150)
"#
    )
}

/// Writes the plot scripts for one run directory.
pub fn emit_plot_scripts(dir: &Path, title: &str) -> Result<Vec<PathBuf>> {
    PLOTS
        .iter()
        .map(|&(stem, column, label, log)| {
            let script = plot_script(title, column, label, log, stem);
            write(dir, &format!("plot_{stem}.py"), &script)
        })
        .collect()
}

/// Side-by-side summary of two runs from the same initial fleet, e.g. the
/// viscous and inviscid variants of one controller family. Reports values
/// only; no ordering is asserted.
pub fn comparison_report(a: (&str, &RunResult), b: (&str, &RunResult), tolerance: f64) -> String {
    let stats = |r: &RunResult| -> Vec<f64> {
        let m = &r.metrics;
        let last = m.len().saturating_sub(1);
        let settle = |col: &[f64]| {
            // first recorded time after which the column stays below tolerance
            let k = col.iter().rposition(|&v| v >= tolerance).map_or(0, |k| k + 1);
            m.t.get(k).copied().unwrap_or(f64::NAN)
        };
        let variation: f64 = m.sup_accel.windows(2).map(|p| (p[1] - p[0]).abs()).sum();
        vec![
            m.sup_angular_error[last],
            m.sup_accel[last],
            m.sup_orientation[last],
            m.min_gap.iter().copied().fold(f64::INFINITY, f64::min),
            m.clf[last],
            settle(&m.sup_angular_error),
            settle(&m.sup_accel),
            variation,
            r.max_effort,
        ]
    };
    let names = [
        "final_sup_angular_error",
        "final_sup_accel",
        "final_sup_orientation",
        "min_gap_over_run",
        "final_clf",
        "settling_time_angular_error",
        "settling_time_accel",
        "total_variation_sup_accel",
        "max_effort",
    ];
    let (sa, sb) = (stats(a.1), stats(b.1));
    let mut out = format!("metric,{},{}\n", a.0, b.0);
    for ((name, x), y) in names.iter().zip(sa).zip(sb) {
        writeln!(out, "{name},{x},{y}").unwrap();
    }
    out
}
