//! Command-line entry point.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qklab_core::kernels::{Backend, KernelSpec};

use crate::bench::{run_bench, write_bench, BenchSpec};
use crate::config::RunConfig;
use crate::diagnose::cmd_diagnose;
use crate::error::LabResult;
use crate::exec::{resolve_workers, Parallel};
use crate::experiment::{cmd_experiment, model_name, protocol_name, CellStatus};
use crate::persist::{hash_json, write_manifest};
use crate::pipeline::{cmd_kernel, cmd_prepare, Layout, Outcome};
use crate::report::cmd_report;

#[derive(Debug, Parser)]
#[command(
    name = "qklab",
    version,
    about = "Fidelity quantum kernel experiments on matrix-product states"
)]
pub struct Cli {
    /// Worker threads for kernel fills; falls back to the config, then `QKLAB_WORKERS`.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run configuration JSON.
    #[arg(long, short)]
    pub config: PathBuf,
    /// Overrides `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `backend`.
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Tn,
    Sv,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Tn => Backend::Tn,
            BackendArg::Sv => Backend::Sv,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Quantum,
    Rbf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load or generate data, write splits and normalized feature subsets.
    Prepare(RunArgs),
    /// Compute train, train×val and train×test kernels for one cell.
    Kernel {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        split: usize,
        #[arg(long)]
        n: usize,
        /// Bandwidth `c` for the quantum kernel, `gamma` for the RBF.
        #[arg(long)]
        scale: f64,
        #[arg(long, value_enum)]
        kind: KindArg,
    },
    /// Run HPO and training over the whole grid; resumable.
    Experiment(RunArgs),
    /// Kernel statistics, scaling fits and paired tests over a finished grid.
    Diagnose(RunArgs),
    /// Time kernel fills over a range of qubit counts.
    Bench {
        #[arg(long, value_enum, default_value = "tn")]
        backend: BackendArg,
        /// Comma-separated qubit counts; a backend-specific sweep when absent.
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<usize>>,
        #[arg(long, default_value_t = 10)]
        size: usize,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 1.0)]
        bandwidth: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "runs/bench")]
        out: PathBuf,
    },
    /// Write a markdown summary of a run and print it.
    Report(RunArgs),
}

fn load_config(args: &RunArgs) -> LabResult<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(b) = args.backend {
        cfg.backend = b.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn executor(flag: Option<usize>, cfg: Option<&RunConfig>) -> Parallel {
    let explicit = flag.or_else(|| cfg.and_then(|c| c.workers));
    Parallel::new(resolve_workers(explicit))
}

fn finish(cfg: &RunConfig) -> LabResult<()> {
    write_manifest(&cfg.output_dir, &cfg.config_hash(), cfg.seed)?;
    Ok(())
}

fn outcome_word(o: Outcome) -> &'static str {
    match o {
        Outcome::Written => "written",
        Outcome::UpToDate => "up to date",
    }
}

pub fn run(cli: Cli) -> LabResult<()> {
    match cli.command {
        Command::Prepare(args) => {
            let cfg = load_config(&args)?;
            let layout = Layout::new(&cfg.output_dir);
            let outcome = cmd_prepare(&cfg, &layout)?;
            println!("prepare: {} ({})", outcome_word(outcome), cfg.output_dir.display());
            finish(&cfg)
        }
        Command::Kernel {
            run,
            split,
            n,
            scale,
            kind,
        } => {
            let cfg = load_config(&run)?;
            let layout = Layout::new(&cfg.output_dir);
            let spec = match kind {
                KindArg::Quantum => KernelSpec::FidelityQuantum {
                    bandwidth: scale,
                    backend: cfg.backend,
                    sv_max_qubits: cfg.sv_max_qubits,
                },
                KindArg::Rbf => KernelSpec::rbf(scale),
            };
            let exec = executor(cli.workers, Some(&cfg));
            let (dir, outcome) = cmd_kernel(&cfg, &layout, split, n, &spec, &exec)?;
            println!("kernel: {} ({})", outcome_word(outcome), dir.display());
            finish(&cfg)
        }
        Command::Experiment(args) => {
            let cfg = load_config(&args)?;
            let layout = Layout::new(&cfg.output_dir);
            let exec = executor(cli.workers, Some(&cfg));
            let result = cmd_experiment(&cfg, &layout, &exec, |c, skipped| {
                let status = match (skipped, c.status) {
                    (true, _) => "cached".to_string(),
                    (false, CellStatus::Ok) => format!("test {:.3}", c.test_accuracy.unwrap_or(f64::NAN)),
                    (false, CellStatus::Failed) => format!("FAILED: {}", c.error.as_deref().unwrap_or("")),
                };
                eprintln!(
                    "split {} n {} {} {}: {status}",
                    c.split,
                    c.n,
                    protocol_name(c.protocol),
                    model_name(c.model)
                );
            });
            finish(&cfg)?;
            let results = result?;
            println!(
                "experiment: {} cells ({})",
                results.cells.len(),
                layout.results().display()
            );
            Ok(())
        }
        Command::Diagnose(args) => {
            let cfg = load_config(&args)?;
            let layout = Layout::new(&cfg.output_dir);
            let result = cmd_diagnose(&cfg, &layout);
            if cfg.output_dir.exists() {
                finish(&cfg)?;
            }
            let d = result?;
            println!("diagnose: {} cells ({})", d.cells.len(), layout.diagnostics().display());
            Ok(())
        }
        Command::Bench {
            backend,
            ns,
            size,
            reps,
            bandwidth,
            seed,
            out,
        } => {
            let mut spec = BenchSpec::default_for(backend.into());
            if let Some(ns) = ns {
                spec.ns = ns;
            }
            spec.size = size;
            spec.reps = reps;
            spec.bandwidth = bandwidth;
            spec.seed = seed;
            let exec = executor(cli.workers, None);
            let report = run_bench(&spec, &exec, exec.workers())?;
            write_bench(&out, &report)?;
            for p in &report.points {
                println!("n {:>4}: median {:.6} s", p.n, p.median_seconds);
            }
            if let Some(fit) = &report.fit {
                println!("fit slope {:.4}, R² {:.4}", fit.slope, fit.r_squared);
            }
            write_manifest(&out, &hash_json(&spec), seed)?;
            Ok(())
        }
        Command::Report(args) => {
            let cfg = load_config(&args)?;
            let text = cmd_report(&Layout::new(&cfg.output_dir))?;
            print!("{text}");
            finish(&cfg)
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
