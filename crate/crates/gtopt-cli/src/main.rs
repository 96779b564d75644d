//! Command-line front end: run overlay scenarios, solve standalone specs,
//! export DOT views, and run the incremental-join scaling benchmark.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 infeasible, 3 I/O error.

mod bench;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gtopt::dsl;
use gtopt::ilp::write_lp;
use gtopt::model::{Metamodel, Model};
use gtopt::overlay::{self, OverlayError, RunConfig, Scenario, TraceEntry};
use gtopt::pipeline::{CycleStatus, Engine};

#[derive(Parser)]
#[command(
    name = "gtopt",
    version,
    about = "Graph-transformation rule selection via 0/1 ILP"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Output directory for all produced files
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for anything randomized
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario file: one MAPE-K cycle per event batch
    Run {
        /// Scenario JSON path
        scenario: PathBuf,
        /// Write snapshot_<step>.dot / .json after every cycle
        #[arg(long)]
        snapshots: bool,
        /// Write cycle_<step>.lp and varmap_<step>.json per cycle
        #[arg(long)]
        lp_dump: bool,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run one cycle of a spec over a model and write the modified model
    Solve {
        /// Specification (.gspec) path
        spec: PathBuf,
        /// Model JSON path
        model: PathBuf,
        /// Metamodel JSON path
        #[arg(long)]
        metamodel: PathBuf,
        /// Also write the generated ILP (cycle.lp) and its varmap.json
        #[arg(long)]
        lp_dump: bool,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Export a model view
    Export {
        /// Overlay model JSON path
        model: PathBuf,
        /// Emit Graphviz DOT (model.dot)
        #[arg(long)]
        dot: bool,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Scaling benchmark: clients join one at a time, timings per count
    Bench {
        /// Client count range, e.g. 5..75 (inclusive)
        #[arg(long, value_parser = parse_range)]
        clients: (usize, usize),
        /// Stride through the range
        #[arg(long, default_value_t = 1)]
        step: usize,
        /// Scenario repetitions averaged per row
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Server upload bandwidth in Mbit/s for generated scenarios
        #[arg(long, default_value_t = 25_000.0)]
        server_upload: f64,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once("..").ok_or("expected A..B")?;
    let a: usize = a.trim().parse().map_err(|_| "bad range start")?;
    let b: usize = b.trim().parse().map_err(|_| "bad range end")?;
    if a == 0 || b < a {
        return Err("range must be 1 <= A <= B".into());
    }
    Ok((a, b))
}

enum Failure {
    Input(String),
    Infeasible(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Infeasible(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Infeasible(m) | Failure::Io(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let benign = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if benign {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("reading {}: {e}", path.display())))
}

fn write(path: &Path, content: &str) -> Result<(), Failure> {
    fs::write(path, content).map_err(|e| Failure::Io(format!("writing {}: {e}", path.display())))
}

fn ensure_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("creating {}: {e}", dir.display())))
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            scenario,
            snapshots,
            lp_dump,
            common,
        } => run_cmd(&scenario, snapshots, lp_dump, &common),
        Command::Solve {
            spec,
            model,
            metamodel,
            lp_dump,
            common,
        } => solve_cmd(&spec, &model, &metamodel, lp_dump, &common),
        Command::Export { model, dot, common } => export_cmd(&model, dot, &common),
        Command::Bench {
            clients,
            step,
            repeats,
            server_upload,
            common,
        } => bench::bench_cmd(
            clients,
            step,
            repeats,
            server_upload,
            &common.out,
            common.seed,
        ),
    }
}

fn write_trace(
    out: &Path,
    trace: &[TraceEntry],
    snapshots: bool,
    lp_dump: bool,
) -> Result<(), Failure> {
    let mut lines = String::new();
    for entry in trace {
        lines.push_str(&serde_json::to_string(entry).expect("trace serializes"));
        lines.push('\n');
    }
    write(&out.join("trace.jsonl"), &lines)?;
    for entry in trace {
        if snapshots {
            if let Some(model) = &entry.snapshot {
                write(
                    &out.join(format!("snapshot_{}.dot", entry.step)),
                    &overlay::export_dot(model),
                )?;
                write(
                    &out.join(format!("snapshot_{}.json", entry.step)),
                    &model.to_json(),
                )?;
            }
        }
        if lp_dump {
            if let Some(lp) = &entry.lp {
                write(&out.join(format!("cycle_{}.lp", entry.step)), lp)?;
            }
            if let Some(varmap) = &entry.varmap {
                write(&out.join(format!("varmap_{}.json", entry.step)), varmap)?;
            }
        }
    }
    Ok(())
}

fn run_cmd(
    scenario_path: &Path,
    snapshots: bool,
    lp_dump: bool,
    common: &CommonOpts,
) -> Result<(), Failure> {
    let text = read(scenario_path)?;
    let scenario = Scenario::from_json(&text).map_err(|e| Failure::Input(e.to_string()))?;
    ensure_out(&common.out)?;
    let config = RunConfig {
        capture_snapshots: snapshots,
        capture_lp: lp_dump,
    };
    match overlay::run_scenario(&scenario, &config) {
        Ok(run) => {
            write_trace(&common.out, &run.trace, snapshots, lp_dump)?;
            write(&common.out.join("final.json"), &run.model.to_json())?;
            write(
                &common.out.join("final.dot"),
                &overlay::export_dot(&run.model),
            )?;
            let total_violations: usize = run.trace.iter().map(|t| t.violations.len()).sum();
            println!(
                "ran {} cycles, {} clients connected, {} violations",
                run.trace.len(),
                run.model.count_of_type("Client"),
                total_violations
            );
            Ok(())
        }
        Err(OverlayError::InfeasibleCycle { step, trace }) => {
            write_trace(&common.out, &trace, snapshots, lp_dump)?;
            Err(Failure::Infeasible(format!(
                "cycle at step {step} is infeasible; partial trace written"
            )))
        }
        Err(e) => Err(Failure::Input(e.to_string())),
    }
}

fn solve_cmd(
    spec_path: &Path,
    model_path: &Path,
    metamodel_path: &Path,
    lp_dump: bool,
    common: &CommonOpts,
) -> Result<(), Failure> {
    let mm =
        Metamodel::from_json(&read(metamodel_path)?).map_err(|e| Failure::Input(e.to_string()))?;
    let mut model =
        Model::load(&read(model_path)?, &mm).map_err(|e| Failure::Input(e.to_string()))?;
    let spec_text = read(spec_path)?;
    let parsed = dsl::parse(&spec_text).map_err(|diags| Failure::Input(render_diags(&diags)))?;
    let compiled =
        dsl::compile(&parsed, &mm).map_err(|diags| Failure::Input(render_diags(&diags)))?;

    ensure_out(&common.out)?;
    let mut engine = Engine::new(compiled, &model).map_err(|e| Failure::Input(e.to_string()))?;
    if lp_dump {
        let (problem, varmap) = engine
            .build_current(&model)
            .map_err(|e| Failure::Input(e.to_string()))?;
        let lp = write_lp(&problem).map_err(|e| Failure::Input(e.to_string()))?;
        write(&common.out.join("cycle.lp"), &lp)?;
        write(&common.out.join("varmap.json"), &varmap.to_json())?;
    }
    let report = engine
        .run_cycle(&mut model)
        .map_err(|e| Failure::Input(e.to_string()))?;
    write(
        &common.out.join("report.json"),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    write(&common.out.join("model_out.json"), &model.to_json())?;
    match report.status {
        CycleStatus::Optimal => {
            println!(
                "optimal: objective {}, {} of {} variables selected, {} applications",
                report.objective.unwrap_or(0.0),
                report.selected.len(),
                report.var_count,
                report.applied
            );
            Ok(())
        }
        CycleStatus::Infeasible => Err(Failure::Infeasible(
            "the generated ILP is infeasible".into(),
        )),
    }
}

fn export_cmd(model_path: &Path, dot: bool, common: &CommonOpts) -> Result<(), Failure> {
    if !dot {
        return Err(Failure::Input("nothing to export: pass --dot".into()));
    }
    let mm = overlay::metamodel();
    let model = Model::load(&read(model_path)?, &mm).map_err(|e| Failure::Input(e.to_string()))?;
    ensure_out(&common.out)?;
    write(&common.out.join("model.dot"), &overlay::export_dot(&model))?;
    println!("wrote {}", common.out.join("model.dot").display());
    Ok(())
}

fn render_diags(diags: &[dsl::Diagnostic]) -> String {
    let mut s = String::from("specification has diagnostics:");
    for d in diags {
        s.push_str("\n  ");
        s.push_str(&d.to_string());
    }
    s
}
