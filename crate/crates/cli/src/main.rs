use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use rayon::prelude::*;

use ringroad::controllers::permitted_information_audit;
use ringroad::potentials::check_axioms;
use ringroad::simulation::{
    comparison_report, emit_outputs, emit_plot_scripts, run_scenario, set_key, RunResult, Scenario,
    SCENARIO_FILE,
};
use ringroad::verify::{
    cross_model_check, dissipation_survey, equilibrium_control_error, equilibrium_fleet, StateSampler,
};

const EXIT_VIOLATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "ringroad", version, about = "Lane-free ring-road cruise control simulator")]
struct Cli {
    /// Log progress (repeat for more detail); RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its outputs.
    Run {
        scenario: PathBuf,
        /// Output directory (default: the scenario's, else runs/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a grid of scenario variants in parallel.
    Sweep {
        scenario: PathBuf,
        /// `key=v1,v2,...`; repeat to form a grid.
        #[arg(long, required = true)]
        vary: Vec<String>,
        /// Root directory; each variant writes to its own subdirectory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check axioms, dissipation, the model oracle and equilibria without a long run.
    Verify {
        scenario: PathBuf,
        /// Random states in the dissipation survey.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write the plot scripts into an existing run directory.
    Plots { run_dir: PathBuf },
    /// Run two scenarios and tabulate their metrics side by side.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct Overrides {
    /// Override a scenario value, e.g. `--set integrator.dt=5e-4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

type Assignments = Vec<(String, String)>;

fn split_assignment(text: &str) -> Result<(String, String)> {
    text.split_once('=')
        .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| anyhow!("expected KEY=VALUE, got `{text}`"))
}

impl Overrides {
    fn assignments(&self) -> Result<Assignments> {
        self.set.iter().map(|s| split_assignment(s)).collect()
    }
}

fn load_table(path: &Path) -> Result<toml::Table> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse::<toml::Table>()
        .with_context(|| format!("parsing {}", path.display()))
}

fn scenario_from(mut table: toml::Table, assignments: &[(String, String)]) -> Result<Scenario> {
    for (key, value) in assignments {
        set_key(&mut table, key, value)?;
    }
    let sc = Scenario::from_table(table)?;
    sc.validate()?;
    Ok(sc)
}

fn load_scenario(path: &Path, overrides: &Overrides) -> Result<Scenario> {
    scenario_from(load_table(path)?, &overrides.assignments()?)
}

fn final_line(result: &RunResult) -> String {
    let m = &result.metrics;
    match m.len().checked_sub(1) {
        Some(k) => format!(
            "angular_error={:.3e} accel={:.3e} orientation={:.3e} min_gap={:.4} residual={:.3e}",
            m.sup_angular_error[k],
            m.sup_accel[k],
            m.sup_orientation[k],
            m.min_gap.iter().copied().fold(f64::INFINITY, f64::min),
            m.equilibrium_residual[k],
        ),
        None => String::new(),
    }
}

fn verdict(result: &RunResult) -> String {
    match &result.violation {
        None => "pass".into(),
        Some(v) => format!("FAIL ({v})"),
    }
}

fn cmd_run(path: &Path, out: Option<PathBuf>, overrides: &Overrides) -> Result<u8> {
    let sc = load_scenario(path, overrides)?;
    let dir = out.unwrap_or_else(|| sc.output_dir());
    let result = run_scenario(&sc)?;
    emit_outputs(&result, &sc, &dir)?;
    println!("{}: {} {}", sc.name, verdict(&result), final_line(&result));
    println!("outputs in {}", dir.display());
    Ok(if result.passed() { 0 } else { EXIT_VIOLATION })
}

/// Every combination of the `--vary` values, as `(label, assignments)`.
fn sweep_grid(vary: &[String]) -> Result<Vec<(String, Assignments)>> {
    let mut grid: Vec<(String, Assignments)> = vec![(String::new(), Vec::new())];
    for spec in vary {
        let (key, values) = split_assignment(spec)?;
        let key = key.as_str();
        let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            bail!("no values given for `{key}`");
        }
        grid = grid
            .into_iter()
            .flat_map(|(label, sets)| {
                values.iter().map(move |v| {
                    let part = format!("{key}={v}");
                    let label = if label.is_empty() { part } else { format!("{label},{part}") };
                    let mut sets = sets.clone();
                    sets.push((key.to_owned(), (*v).to_owned()));
                    (label, sets)
                })
            })
            .collect();
    }
    Ok(grid)
}

fn dir_name(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.=".contains(c) { c } else { '_' })
        .collect()
}

fn cmd_sweep(path: &Path, vary: &[String], out: Option<PathBuf>, overrides: &Overrides) -> Result<u8> {
    let table = load_table(path)?;
    let common = overrides.assignments()?;
    let base = scenario_from(table.clone(), &common)?;
    let root = out.unwrap_or_else(|| PathBuf::from("runs").join(format!("{}-sweep", base.name)));
    let grid = sweep_grid(vary)?;
    // validate every variant before spending time on any run
    let variants = grid
        .iter()
        .map(|(label, sets)| {
            let mut sets: Assignments = common.iter().chain(sets).cloned().collect();
            let name = format!("{}-{}", base.name, dir_name(label));
            sets.push(("name".into(), format!("\"{name}\"")));
            let mut sc = scenario_from(table.clone(), &sets).with_context(|| format!("variant {label}"))?;
            sc.outputs.directory = Some(root.join(dir_name(label)));
            Ok((label.clone(), sc))
        })
        .collect::<Result<Vec<_>>>()?;
    info!("sweeping {} variants into {}", variants.len(), root.display());

    let results: Vec<(String, Result<RunResult>)> = variants
        .par_iter()
        .map(|(label, sc)| {
            let outcome = run_scenario(sc)
                .map_err(anyhow::Error::from)
                .and_then(|r| emit_outputs(&r, sc, &sc.output_dir()).map(|_| r).map_err(Into::into));
            (label.clone(), outcome)
        })
        .collect();

    let mut code = 0;
    let mut table_csv = String::from("variant,verdict,final_sup_angular_error,final_sup_accel,final_sup_orientation,min_gap,final_equilibrium_residual\n");
    for (label, outcome) in &results {
        match outcome {
            Ok(r) => {
                println!("{label}: {} {}", verdict(r), final_line(r));
                let m = &r.metrics;
                let k = m.len() - 1;
                table_csv.push_str(&format!(
                    "\"{label}\",{},{},{},{},{},{}\n",
                    if r.passed() { "pass" } else { "fail" },
                    m.sup_angular_error[k],
                    m.sup_accel[k],
                    m.sup_orientation[k],
                    m.min_gap.iter().copied().fold(f64::INFINITY, f64::min),
                    m.equilibrium_residual[k],
                ));
                if !r.passed() {
                    code = code.max(EXIT_VIOLATION);
                }
            }
            Err(e) => {
                println!("{label}: error: {e:#}");
                table_csv.push_str(&format!("\"{label}\",error,,,,,\n"));
                code = EXIT_CONFIG;
            }
        }
    }
    fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
    let summary = root.join("sweep.csv");
    fs::write(&summary, table_csv).with_context(|| format!("writing {}", summary.display()))?;
    println!("sweep summary in {}", summary.display());
    Ok(code)
}

fn check_line(name: &str, ok: bool, detail: String) -> bool {
    println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn cmd_verify(path: &Path, samples: usize, seed: u64, overrides: &Overrides) -> Result<u8> {
    let sc = load_scenario(path, overrides)?;
    let model = sc.model()?;
    let controller = sc.controller();
    let ring = &model.ring;
    let mut all = true;

    let axioms = check_axioms(model.potentials.as_ref(), model.shaping.as_ref(), ring, 100);
    let detail = match axioms.failures.first() {
        None => format!("{} axioms hold", axioms.checked.len()),
        Some(f) => format!("{} failures, first: {f}", axioms.failures.len()),
    };
    all &= check_line("potential axioms", axioms.passed(), detail);

    let tol = sc.monitors.dissipation_tolerance;
    let sampler = StateSampler::default();
    all &= match dissipation_survey(&model, &controller, &sampler, samples, seed, sc.monitors.fd_step) {
        Ok(s) => {
            // the identity holds for every variant; the bound is what the run monitor enforces
            let ok = s.worst_identity_error <= tol && s.worst_bound_excess <= tol;
            check_line(
                "dissipation",
                ok,
                format!(
                    "{} states ({} interacting), identity error {:.2e}, bound excess {:.2e}",
                    s.samples, s.interacting, s.worst_identity_error, s.worst_bound_excess
                ),
            )
        }
        Err(e) => check_line("dissipation", false, e.to_string()),
    };

    let w0 = sc.initial_fleet(ring)?;
    all &= match cross_model_check(&w0, ring, 1e-3, 10.0) {
        Ok(dev) => check_line("cross-model", dev < 1e-6, format!("max deviation {dev:.2e} over 10 s")),
        Err(e) => check_line("cross-model", false, e.to_string()),
    };

    let half = 0.25 * sc.effective_potentials().c;
    let eq = equilibrium_fleet(ring, (ring.r_mid() - half, ring.r_mid() + half));
    all &= match equilibrium_control_error(&eq, &model, &controller) {
        Ok(err) => check_line("equilibrium", err <= 1e-12, format!("max control deviation {err:.2e}")),
        Err(e) => check_line("equilibrium", false, e.to_string()),
    };

    let audits: Vec<_> = (0..model.n())
        .map(|i| permitted_information_audit(&controller, i, &w0, &model))
        .collect();
    let dirty: Vec<String> = audits
        .iter()
        .filter(|a| !a.is_clean())
        .map(|a| format!("vehicle {}: {:?}", a.vehicle, a.violations))
        .collect();
    all &= check_line(
        "information audit",
        dirty.is_empty(),
        if dirty.is_empty() {
            format!("{} vehicles read only permitted fields", audits.len())
        } else {
            dirty.join("; ")
        },
    );

    Ok(if all { 0 } else { EXIT_VIOLATION })
}

fn cmd_plots(run_dir: &Path) -> Result<u8> {
    let echo = run_dir.join(SCENARIO_FILE);
    let sc = Scenario::load(&echo).with_context(|| format!("{} is not a run directory", run_dir.display()))?;
    for p in emit_plot_scripts(run_dir, &sc.name)? {
        println!("{}", p.display());
    }
    Ok(0)
}

fn cmd_compare(a: &Path, b: &Path, out: Option<PathBuf>) -> Result<u8> {
    let none = Overrides::default();
    let (sa, sb) = (load_scenario(a, &none)?, load_scenario(b, &none)?);
    let (ra, rb) = rayon::join(|| run_scenario(&sa), || run_scenario(&sb));
    let (ra, rb) = (ra?, rb?);
    let tolerance = sa.monitors.convergence_tolerance;
    let report = comparison_report((&sa.name, &ra), (&sb.name, &rb), tolerance);
    match out {
        Some(path) => fs::write(&path, &report).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{report}"),
    }
    for (name, r) in [(&sa.name, &ra), (&sb.name, &rb)] {
        eprintln!("{name}: {}", verdict(r));
    }
    Ok(if ra.passed() && rb.passed() { 0 } else { EXIT_VIOLATION })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match cli.command {
        Command::Run { scenario, out, overrides } => cmd_run(&scenario, out, &overrides),
        Command::Sweep {
            scenario,
            vary,
            out,
            overrides,
        } => cmd_sweep(&scenario, &vary, out, &overrides),
        Command::Verify {
            scenario,
            samples,
            seed,
            overrides,
        } => cmd_verify(&scenario, samples, seed, &overrides),
        Command::Plots { run_dir } => cmd_plots(&run_dir),
        Command::Compare { a, b, out } => cmd_compare(&a, &b, out),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
