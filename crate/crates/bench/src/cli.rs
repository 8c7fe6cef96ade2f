//! Command-line front end.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::check::{cmd_check, CheckOptions};
use crate::commands::{cmd_compare, cmd_eval, cmd_generate, cmd_train, thread_pool};
use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};

#[derive(Debug, Parser)]
#[command(name = "qapbench", version, about = "Phone-clone allocation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
    /// Output directory; defaults to the config's `out_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated solver names for `compare`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write evaluation instances and a manifest.
    Generate {
        /// Instances per size; defaults to the config's `eval_batch`.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Train a model and write its checkpoint and learning curve.
    Train,
    /// Score a checkpoint on the evaluation sweep.
    Eval,
    /// Run several methods on identical instances.
    Compare,
    /// Run the verification battery.
    Check {
        /// Corrupt analytic gradients so the gradient property must fail.
        #[arg(long)]
        inject_gradient_fault: bool,
    },
}

impl Cli {
    pub fn load_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.common.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.common.seed {
            cfg.master_seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn checkpoint(&self) -> Result<&PathBuf> {
        self.common.checkpoint.as_ref().ok_or_else(|| BenchError::Config("--checkpoint is required".into()))
    }
}

/// Runs one parsed invocation and returns a one-line summary.
pub fn run(cli: &Cli) -> Result<String> {
    let cfg = cli.load_config()?;
    let out = cli.common.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    let pool = thread_pool(cli.common.threads)?;
    match &cli.command {
        Command::Generate { count } => {
            let files = cmd_generate(&cfg, count.unwrap_or(cfg.eval_batch), &out)?;
            Ok(format!("wrote {} instances to {}", files.len(), out.display()))
        }
        Command::Train => {
            let t = cmd_train(&cfg, &out)?;
            let last = t.curve.last().map_or(f64::NAN, |c| c.mean_return);
            Ok(format!("trained {} episodes, final eval return {last:.6}; checkpoint {}", t.curve.len(), t.checkpoint.display()))
        }
        Command::Eval => {
            let e = cmd_eval(&cfg, cli.checkpoint()?, &out, &pool)?;
            Ok(format!("evaluated {} instances into {}", e.rows.len(), out.display()))
        }
        Command::Compare => {
            let methods = cli.common.methods.clone().unwrap_or_else(|| cfg.methods.clone());
            let c = cmd_compare(&cfg, cli.common.checkpoint.as_deref(), &methods, &out, &pool)?;
            let mut lines = vec![format!("{} rows into {}", c.rows.len(), out.display())];
            for a in &c.aggregates {
                lines.push(format!("m={:<4} {:<13} mean risk {:.6} (sd {:.6})", a.m, a.method, a.mean_risk, a.std_risk));
            }
            Ok(lines.join("\n"))
        }
        Command::Check { inject_gradient_fault } => {
            let opts = CheckOptions { corrupt_gradient: *inject_gradient_fault };
            let report = cmd_check(&cfg, opts, &out)?;
            let lines: Vec<String> = report
                .results
                .iter()
                .map(|r| {
                    let verdict = if r.passed() { "PASS" } else { "FAIL" };
                    format!("{verdict} {:<22} measured {:.3e} tolerance {:.0e}", r.name, r.measured, r.tolerance)
                })
                .collect();
            if report.passed() {
                Ok(lines.join("\n"))
            } else {
                Err(BenchError::Verification(format!("\n{}", lines.join("\n"))))
            }
        }
    }
}
