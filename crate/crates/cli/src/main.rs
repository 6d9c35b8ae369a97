use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rcd_lmc::harness::checks::{run_check, Suite};
use rcd_lmc::harness::{
    append_csv, bounds_table, emit_csv, format_bounds_table, parse_config, preset_spec,
    run_experiment, with_workers, write_saturation_tsv, ExperimentSpec, Preset, RunRecord, Scale,
    WORKERS_ENV,
};
use rcd_lmc::theory::BoundParams;

#[derive(Parser)]
#[command(name = "rcd-lmc", version, about = "Langevin Monte Carlo with random coordinate fluxes")]
struct Cli {
    /// Worker threads (default: all available cores).
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// CSV output (default: the config's `out`, else results.csv).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Append to an existing CSV instead of replacing it.
        #[arg(long)]
        append: bool,
        /// Print the parsed config with defaults filled and exit.
        #[arg(long)]
        echo: bool,
    },
    /// Run a named preset over its step-size list.
    Sweep {
        #[arg(long)]
        preset: String,
        #[arg(long, default_value = "desk")]
        scale: String,
        /// CSV output (default: <preset>-<scale>.csv).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        append: bool,
    },
    /// Print step-size caps, bound curves and cost scalings.
    Bounds {
        #[arg(long)]
        mu: f64,
        #[arg(long = "L")]
        lip_grad: f64,
        #[arg(long = "H")]
        lip_hess: Option<f64>,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        tau: Option<usize>,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        /// Initial W2 distance used for the bound curves.
        #[arg(long, default_value_t = 1.0)]
        w0: f64,
    },
    /// Run acceptance checks.
    Check {
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

fn tsv_path(csv: &Path) -> PathBuf {
    csv.with_extension("tsv")
}

fn execute(spec: &ExperimentSpec, out: &Path, append: bool, workers: Option<usize>) -> Result<()> {
    let records: Vec<RunRecord> = with_workers(workers, || run_experiment(spec))??;
    let rows: Vec<_> = records.iter().map(|r| r.row.clone()).collect();
    if append {
        append_csv(&rows, out)?;
    } else {
        emit_csv(&rows, out)?;
    }
    write_saturation_tsv(&records, &tsv_path(out))?;
    println!(
        "{:<8} {:>10} {:>10} {:>12} {:>12} {:>14} {:>9}",
        "alg", "h", "M", "weak_error", "saturation", "cost", "status"
    );
    for r in &records {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4e}"));
        println!(
            "{:<8} {:>10} {:>10} {:>12} {:>12} {:>14} {:>9}",
            r.row.algorithm,
            r.row.h,
            r.row.m,
            fmt(r.row.weak_error),
            fmt(r.saturation_error),
            r.row.cost_partials,
            format!("{:?}", r.row.status).to_lowercase()
        );
    }
    println!("wrote {} and {}", out.display(), tsv_path(out).display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            out,
            append,
            echo,
        } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let spec = parse_config(&text)?;
            if echo {
                print!("{}", rcd_lmc::harness::to_toml(&spec));
                return Ok(true);
            }
            let out = out
                .or_else(|| spec.out.clone())
                .unwrap_or_else(|| PathBuf::from("results.csv"));
            execute(&spec, &out, append, cli.workers)?;
        }
        Command::Sweep {
            preset,
            scale,
            out,
            append,
        } => {
            let Some(p) = Preset::parse(&preset) else {
                bail!("unknown preset `{preset}`");
            };
            let Some(s) = Scale::parse(&scale) else {
                bail!("unknown scale `{scale}` (expected desk or paper)");
            };
            let spec = preset_spec(p, s)?;
            let out = out.unwrap_or_else(|| PathBuf::from(format!("{}-{}.csv", p.name(), s.name())));
            execute(&spec, &out, append, cli.workers)?;
        }
        Command::Bounds {
            mu,
            lip_grad,
            lip_hess,
            d,
            tau,
            eps,
            w0,
        } => {
            let params = BoundParams {
                lip_hess,
                tau,
                ..BoundParams::new(mu, lip_grad, d).with_w0(w0)
            };
            params.validate()?;
            print!("{}", format_bounds_table(&bounds_table(&params, eps)));
        }
        Command::Check { suite } => {
            let Some(s) = Suite::parse(&suite) else {
                bail!("unknown suite `{suite}` (expected unit, moments, slopes or all)");
            };
            let mut all = true;
            for &id in s.criteria() {
                let r = with_workers(cli.workers, || run_check(id))?;
                println!("{r}");
                all &= r.passed;
            }
            return Ok(all);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
