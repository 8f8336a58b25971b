use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cdsim::config::load_config;
use cdsim::entanglement::{cutoff_bound, feasibility_argument, max_cutoff, max_swap_distance};
use cdsim::oracle::{enumerate_exact, TinyConfig};
use cdsim::sweep::{meta_path, run_sweep};
use cdsim::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cdsim",
    version,
    about = "Continuous entanglement distribution on regular lattices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every parameter point and q of an experiment and write a CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; receives `<config stem>.csv` and its metadata.
        #[arg(long)]
        out: PathBuf,
    },
    /// Largest cutoff for a swap distance, or largest swap distance for a cutoff.
    DeriveParams(DeriveArgs),
    /// Exact expected metrics for a tiny experiment.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// Observation step; defaults to the last scheduled step.
        #[arg(long)]
        step: Option<u64>,
    },
    /// Resolve and check an experiment without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct DeriveArgs {
    /// Coherence time in time steps.
    #[arg(long = "T")]
    coherence_time: f64,
    #[arg(long = "Fnew")]
    f_new: f64,
    #[arg(long = "Fmin")]
    f_min: f64,
    #[arg(long = "M", conflicts_with = "tcut", required_unless_present = "tcut")]
    max_swap_distance: Option<u32>,
    #[arg(long)]
    tcut: Option<u32>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config_error() {
        2
    } else if e.is_invariant_violation() {
        3
    } else {
        1
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate { config, out } => {
            let experiment = load_config(&config)?;
            let stem = config
                .file_stem()
                .map_or("results".into(), |s| s.to_os_string());
            let path = out.join(stem).with_extension("csv");
            let rows = run_sweep(&experiment, &path)?;
            let unsteady = rows.iter().filter(|r| !r.steady).count();
            println!("wrote {} rows to {}", rows.len(), path.display());
            println!("metadata in {}", meta_path(&path).display());
            if unsteady > 0 {
                println!("{unsteady} row(s) did not reach a steady state");
            }
            Ok(())
        }
        Command::DeriveParams(args) => derive(&args),
        Command::Oracle { config, step } => {
            let experiment = load_config(&config)?;
            println!("point\tq\tnode\tE[v]\tE[k]");
            for (i, point) in experiment.points.iter().enumerate() {
                for &q in &experiment.q {
                    let tiny = TinyConfig {
                        config: experiment.protocol_config(point, q),
                        budget: experiment.oracle_budget,
                    };
                    let t = step.unwrap_or(point.schedule.steps as u64 - 1);
                    let exact = enumerate_exact(&tiny, t)?;
                    for node in 0..exact.v.len() {
                        println!(
                            "{i}\t{q}\t{node}\t{:.12}\t{:.12}",
                            exact.v[node], exact.k[node]
                        );
                    }
                }
            }
            Ok(())
        }
        Command::Validate { config } => {
            let experiment = load_config(&config)?;
            println!(
                "{} {} {}: {} point(s) x {} q value(s), N = {}",
                experiment.topology,
                experiment.boundary.name(),
                experiment.boundary.dims_label(),
                experiment.points.len(),
                experiment.q.len(),
                experiment.realizations
            );
            println!("p_gen\tp_swap\tT\tF_new\tF_min\tM\tt_cut\tsteps\twindow");
            for p in &experiment.points {
                println!(
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    p.hardware.p_gen,
                    p.hardware.p_swap,
                    p.hardware.coherence_time,
                    p.hardware.f_new,
                    p.f_min,
                    p.max_swap_distance,
                    p.t_cut,
                    p.schedule.steps,
                    p.schedule.window
                );
            }
            Ok(())
        }
    }
}

fn derive(args: &DeriveArgs) -> Result<()> {
    let (t, f_new, f_min) = (args.coherence_time, args.f_new, args.f_min);
    let m = match (args.max_swap_distance, args.tcut) {
        (Some(m), _) => m,
        (None, Some(t_cut)) => max_swap_distance(t, t_cut, f_new, f_min)?,
        (None, None) => unreachable!("clap requires M or tcut"),
    };
    let t_cut = match args.tcut {
        Some(t_cut) => t_cut,
        None => max_cutoff(t, f_new, f_min, m)?,
    };
    println!("T\tFnew\tFmin\tM\targument\trhs\ttcut");
    println!(
        "{t}\t{f_new}\t{f_min}\t{m}\t{:.6}\t{:.6}\t{t_cut}",
        feasibility_argument(f_new, f_min, m),
        cutoff_bound(t, f_new, f_min, m)
    );
    Ok(())
}
