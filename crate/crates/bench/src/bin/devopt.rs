use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use devopt_bench::config::Solver;
use devopt_bench::experiment::{run_experiment_with, ExperimentResult};
use devopt_bench::export::{export_curves, load_trace, save_trace, OUT_DIR_ENV};
use devopt_bench::train::{checkpoint, train_fb_nets, train_for, train_smooth_net};
use devopt_bench::{ExperimentConfig, LearnedNets, Operators, Result};
use devopt_core::learned::Checkpoint;

#[derive(Parser)]
#[command(name = "devopt", about = "Deviation-based solvers on imaging problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write curves, manifest and trace.
    Run {
        config: PathBuf,
        /// Output directory (also settable through DEVOPT_OUT_DIR).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Parameter file for the learned rule; trained on the fly otherwise.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train the safeguarded rule and write its parameter file.
    Train {
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Run the configured solvers and report certificate checks only.
    Verify {
        config: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Re-emit curves and manifest from a saved trace.
    Export {
        trace: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .or(flag)
        .unwrap_or_else(|| PathBuf::from("devopt-out"))
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::parse(&std::fs::read_to_string(path)?)
}

fn nets_for(cfg: &ExperimentConfig, ops: &Operators, ck: Option<PathBuf>) -> Result<LearnedNets> {
    let ck = ck.or_else(|| cfg.checkpoint.clone());
    let nets = match ck {
        Some(path) if cfg.solvers.contains(&Solver::Learned) => {
            let mut nets = LearnedNets::from_checkpoint(Checkpoint::load(&path)?);
            if cfg.solvers.contains(&Solver::LearnedUnnormalized) {
                if cfg.is_smooth() {
                    nets.smooth_raw = Some(train_smooth_net(cfg, ops, false)?.0);
                } else {
                    nets.fb_raw = Some(train_fb_nets(cfg, ops, false)?.0);
                }
            }
            nets
        }
        _ => {
            if cfg.solvers.iter().any(|s| s.needs_training()) {
                eprintln!("training {} steps", cfg.train_steps);
            }
            train_for(cfg, ops)?
        }
    };
    Ok(nets)
}

fn summarize(result: &ExperimentResult) -> bool {
    println!("{:<22} {:>12} {:>12} {:>12} {:>9} {:>10}", "solver", "gap@1", "gap@10", "gap@end", "diverged", "wall_s");
    for c in result.curves() {
        let at = |n: usize| c.mean_at(n).map_or("-".to_string(), |g| format!("{g:.4e}"));
        println!(
            "{:<22} {:>12} {:>12} {:>12} {:>9} {:>10.2}",
            c.solver.name(),
            at(1),
            at(10),
            at(result.config.iters),
            c.diverged_seeds.len(),
            c.wall.as_secs_f64()
        );
    }
    let rep = result.report();
    println!("certificate checks: {} passed, {} failed", rep.passed, rep.failures);
    for (solver, seed, n, what) in &rep.first_failures {
        println!("  {solver} seed {seed} n {n}: {what}");
    }
    rep.ok()
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, out, checkpoint } => {
            let cfg = load_config(&config)?;
            let ops = Operators::build(&cfg)?;
            let nets = nets_for(&cfg, &ops, checkpoint)?;
            let result = run_experiment_with(&cfg, &ops, &nets)?;
            let ok = summarize(&result);
            let dir = out_dir(out);
            let mut files = export_curves(&result, &dir)?;
            files.push(save_trace(&result, &dir)?);
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(ok)
        }
        Command::Train { config, output } => {
            let cfg = load_config(&config)?;
            let ops = Operators::build(&cfg)?;
            let mut train_cfg = cfg.clone();
            train_cfg.solvers = vec![Solver::Learned];
            let nets = train_for(&train_cfg, &ops)?;
            checkpoint(&cfg, &nets)?.save(&output)?;
            println!("wrote {}", output.display());
            Ok(true)
        }
        Command::Verify { config, checkpoint } => {
            let cfg = load_config(&config)?;
            let ops = Operators::build(&cfg)?;
            let nets = nets_for(&cfg, &ops, checkpoint)?;
            let result = run_experiment_with(&cfg, &ops, &nets)?;
            let rep = result.report();
            for s in &rep.per_solver {
                println!(
                    "{:<22} checks {:>7} failures {:>5} enforced {:>6}",
                    s.solver.name(),
                    s.checks,
                    s.failures,
                    s.enforced_steps
                );
            }
            println!("certificate checks: {} passed, {} failed", rep.passed, rep.failures);
            Ok(rep.ok())
        }
        Command::Export { trace, out } => {
            let result = load_trace(&trace)?;
            for f in export_curves(&result, &out_dir(out))? {
                println!("wrote {}", f.display());
            }
            Ok(result.report().ok())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
