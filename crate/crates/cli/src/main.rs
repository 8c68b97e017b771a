use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rough_scl::exec::Exec;
use rough_scl::harness::manifest::{create_run_dir, OUT_ENV};
use rough_scl::harness::suite::{run_suite, SuiteContext};
use rough_scl::harness::{execute, output_root, rerun, ExperimentConfig, RunResult};

/// Finite-volume and kinetic experiments for conservation laws driven by rough paths.
#[derive(Parser)]
#[command(name = "rough-scl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (TOML); defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Root directory for run directories.
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Worker threads for seed and data sweeps.
    #[arg(long)]
    workers: Option<usize>,
    /// Run sweeps on the calling thread.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    fn config(&self, experiment: &str) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        cfg.experiment = experiment.to_string();
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem per seed and check the monotone-scheme invariants.
    Solve(Common),
    /// L1 distance between two solutions driven by the same path.
    Contraction(Common),
    /// Solution distance under path perturbations of size eps.
    PathStability(Common),
    /// Solutions driven by dyadic interpolations of a fine path.
    Refine(Common),
    /// Kinetic defect measure bounds and the L1 identity.
    KineticCheck(Common),
    /// Comparison with local smooth solutions on short windows.
    DissipativeCheck(Common),
    /// Transformed flux against a direct solve with a source term.
    SemilinearDemo(Common),
    /// Run acceptance criteria by name, number or `acceptance` for all.
    Suite {
        #[arg(default_value = "acceptance")]
        names: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Re-execute the configuration recorded in a manifest.json.
    Rerun {
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn report_run(r: &RunResult) -> bool {
    println!("run {}", r.dir.display());
    for g in &r.output.gates {
        println!("{} {}: {}", if g.pass { "PASS" } else { "FAIL" }, g.name, g.detail);
    }
    let failed: Vec<&str> = r.output.gates.iter().filter(|g| !g.pass).map(|g| g.name.as_str()).collect();
    if !failed.is_empty() {
        eprintln!("failed gates: {}", failed.join(", "));
    }
    failed.is_empty()
}

fn experiment(name: &str, c: &Common) -> Result<bool> {
    let cfg = c.config(name)?;
    let root = output_root(c.out.as_deref());
    let r = c.exec().with_workers(c.workers, || execute(&cfg, &root, c.exec()))?;
    Ok(report_run(&r))
}

fn suite(names: &[String], c: &Common) -> Result<bool> {
    let root = output_root(c.out.as_deref());
    let (_, dir) = create_run_dir(&root, "suite")?;
    let ctx = SuiteContext {
        exec: c.exec(),
        root: dir.clone(),
    };
    let report = c.exec().with_workers(c.workers, || run_suite(names, &ctx))?;
    for cr in &report.criteria {
        let status = if cr.passed() { "PASS" } else { "FAIL" };
        println!("criterion {} {}: {status} ({:.1}s)", cr.id, cr.name, cr.seconds);
        if let Some(e) = &cr.error {
            println!("  error: {e}");
        }
        for g in &cr.gates {
            println!("  {} {}: {}", if g.pass { "PASS" } else { "FAIL" }, g.name, g.detail);
        }
        for n in &cr.notes {
            println!("  note: {n}");
        }
    }
    std::fs::write(dir.join("suite.json"), serde_json::to_string_pretty(&report)?)?;
    println!("report {}", dir.join("suite.json").display());
    let failed = report.failed_gates();
    if !failed.is_empty() {
        eprintln!("failed gates: {}", failed.join("; "));
    }
    Ok(failed.is_empty())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve(c) => experiment("solve", &c),
        Command::Contraction(c) => experiment("contraction", &c),
        Command::PathStability(c) => experiment("path-stability", &c),
        Command::Refine(c) => experiment("refine", &c),
        Command::KineticCheck(c) => experiment("kinetic-check", &c),
        Command::DissipativeCheck(c) => experiment("dissipative-check", &c),
        Command::SemilinearDemo(c) => experiment("semilinear-demo", &c),
        Command::Suite { names, common } => suite(&names, &common),
        Command::Rerun { manifest, common } => {
            let root = output_root(common.out.as_deref());
            let r = common
                .exec()
                .with_workers(common.workers, || rerun(&manifest, &root, common.exec()))?;
            Ok(report_run(&r))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
