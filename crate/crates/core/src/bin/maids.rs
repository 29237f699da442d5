use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use maids_core::bounds::{theoretical_bounds, BoundDims, CompressionExtra, Theorem};
use maids_core::general_sum::TabularGeneralSumMG;
use maids_core::harness::{lemma_audit, run_experiment, write_outputs, ExperimentConfig};
use maids_core::mg::TabularZeroSumMG;
use maids_core::Error;

#[derive(Parser)]
#[command(name = "maids", version, about = "Information-directed learning in tabular Markov games")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment; writes regret.csv and report.json.
    Run {
        config: PathBuf,
        /// Output directory (default: the config's output_dir, else ".").
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a regret bound (natural log).
    Bounds {
        #[arg(long)]
        thm: u8,
        /// S,A,B,H,K. For theorem 4, A is the joint action count and B is ignored.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 2)]
        players: usize,
        /// Information term for theorem 3.
        #[arg(long)]
        information: Option<f64>,
        /// Distortion for theorem 3.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Replay a finite-prior run and check the per-episode lemma caps.
    Audit {
        config: PathBuf,
        /// Write the full audit report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an environment file (zero-sum or general-sum JSON).
    Validate { env: PathBuf },
}

fn code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Json(_) | Error::EnumerationTooLarge { .. } => 1,
        _ => 2,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code(&e))
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Run { config, out } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let report = match run_experiment(&cfg) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            let dir = out.or(cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
            if let Err(e) = write_outputs(&cfg, &report, &dir) {
                return fail(e);
            }
            for a in &report.algorithms {
                let bound = a.bound.as_ref().and_then(|b| b.last()).map_or("-".into(), |b| format!("{b:.4}"));
                println!(
                    "{:<18} cum_regret {:.4} ± {:.4}  mi_cum {:.4}  bound {}",
                    a.label,
                    a.final_mean(),
                    a.final_stderr(),
                    a.mean_mi_cum.last().unwrap_or(&0.0),
                    bound
                );
            }
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Cmd::Bounds {
            thm,
            dims,
            players,
            information,
            epsilon,
        } => {
            if dims.len() != 5 {
                return fail(Error::InvalidArgument(format!("--dims takes S,A,B,H,K, got {} values", dims.len())));
            }
            let which = match Theorem::from_number(thm) {
                Ok(t) => t,
                Err(e) => return fail(e),
            };
            let d = BoundDims {
                states: dims[0],
                actions_max: dims[1],
                actions_min: dims[2],
                horizon: dims[3],
                episodes: dims[4],
                players,
            };
            let extra = match (information, epsilon) {
                (Some(information), Some(epsilon)) => Some(CompressionExtra { information, epsilon }),
                _ => None,
            };
            match theoretical_bounds(&d, which, extra) {
                Ok(v) => {
                    println!("{v}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Cmd::Audit { config, out } => {
            let report = match ExperimentConfig::load(&config).and_then(|c| lemma_audit(&c)) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            if let Some(path) = out {
                let written = serde_json::to_string_pretty(&report).map_err(Error::from).and_then(|s| Ok(std::fs::write(path, s)?));
                if let Err(e) = written {
                    return fail(e);
                }
            }
            println!(
                "checks {}  violations {}  max_ts_ratio {:.4}  max_min_ratio {:.4}  max_formula_error {:.2e}",
                report.checks,
                report.violations.len(),
                report.max_ts_ratio,
                report.max_min_ratio,
                report.max_formula_error
            );
            for v in &report.violations {
                println!("violation {} {} draw {} episode {}: {} > {}", v.check, v.algorithm, v.draw, v.episode, v.value, v.limit);
            }
            if report.violations.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Cmd::Validate { env } => {
            let text = match std::fs::read_to_string(&env) {
                Ok(t) => t,
                Err(e) => return fail(e.into()),
            };
            match TabularZeroSumMG::from_json(&text) {
                Ok(e) => {
                    let d = e.dims();
                    println!("ok: zero-sum H={} S={} A={} B={}", d.horizon, d.num_states, d.actions_max, d.actions_min);
                    ExitCode::SUCCESS
                }
                Err(zs) => match TabularGeneralSumMG::from_json(&text) {
                    Ok(g) => {
                        println!("ok: general-sum H={} S={} actions={:?}", g.horizon(), g.num_states(), g.action_counts());
                        ExitCode::SUCCESS
                    }
                    Err(_) => fail(zs),
                },
            }
        }
    }
}
