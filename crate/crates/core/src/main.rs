use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use emt_nas::run::{compare, load_checkpoint, run_with};
use emt_nas::RunConfig;

#[derive(Parser)]
#[command(
    name = "emt-nas",
    version,
    about = "Multi-objective multi-task architecture search on a simulated supernet"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one search.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue from a checkpoint.json written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run several config variants over shared seeds and tabulate HV.
    Compare {
        #[arg(long, num_args = 2.., required = true)]
        configs: Vec<PathBuf>,
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long, default_value = "compare_out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match try_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn try_main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            workers,
            out,
            resume,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            cfg.validate()?;
            let checkpoint = resume.map(|p| load_checkpoint(&p)).transpose()?;
            let outcome = run_with(&cfg, Some(&cfg.out_dir), checkpoint).with_context(|| {
                format!("run failed; partial output in {}", cfg.out_dir.display())
            })?;
            for row in &outcome.hv {
                println!("task {} HV {:.6}", row.task, row.hv);
            }
            for t in &outcome.tasks {
                for (k, r) in t.representatives.iter().enumerate() {
                    let o = r.objectives.expect("evaluated");
                    println!(
                        "task {} rep {} error {:.4} params {} {}",
                        t.task,
                        (b'A' + k as u8) as char,
                        o.error,
                        o.params_raw,
                        r.genotype
                    );
                }
            }
            println!("wrote {}", cfg.out_dir.display());
        }
        Command::Compare {
            configs,
            seeds,
            out,
        } => {
            let variants = configs
                .iter()
                .map(|p| RunConfig::load(p))
                .collect::<Result<Vec<_>, _>>()?;
            let cmp = compare(&variants, &seeds, Some(&out))?;
            println!(
                "{:>4}  {:<24} {:>10} {:>10}",
                "task", "variant", "mean HV", "std"
            );
            for s in &cmp.summary {
                println!(
                    "{:>4}  {:<24} {:>10.6} {:>10.6}",
                    s.task, s.variant, s.mean, s.std
                );
            }
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
