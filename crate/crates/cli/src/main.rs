use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qkdrate_core::config::{self, OutputFormat};
use qkdrate_core::{verify, Error, RunConfig, Stats, Suite};

#[derive(Parser)]
#[command(name = "qkdrate", version, about = "Secure key rates for BB84 and Ekert QKD links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rate, detection statistics and key budget at the configured point.
    Rate(IoArgs),
    /// Rate curves over the configured grid.
    Sweep(IoArgs),
    /// Optimal source parameter at the configured point.
    Optimize(IoArgs),
    /// Cutoff distance of each configured curve.
    Cutoff(IoArgs),
    /// Run a verification suite and emit a JSON report.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct IoArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value = "all", value_parser = parse_suite)]
    suite: Suite,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Failure classes with distinct exit codes.
enum Failure {
    /// Malformed or inconsistent configuration.
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn load(path: &Path) -> std::result::Result<RunConfig, Failure> {
    RunConfig::load(path).map_err(|e| Failure::Config(anyhow::Error::new(e)))
}

fn config_error(e: Error) -> Failure {
    match e {
        Error::Config(_) => Failure::Config(e.into()),
        other => Failure::Runtime(other.into()),
    }
}

fn format_of(args: &IoArgs, cfg: &RunConfig) -> Format {
    args.format.unwrap_or(match cfg.output.format {
        OutputFormat::Csv => Format::Csv,
        OutputFormat::Json => Format::Json,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn describe_stats(s: &Stats) -> String {
    match s {
        Stats::Click(c) => format!(
            "p_click {:e}, p_signal {:e}, p_dark {:e}, e {:.6}, beta {:.6}",
            c.p_click, c.p_signal, c.p_dark, c.e, c.beta
        ),
        Stats::Coincidence(c) => format!(
            "p_coin {:e}, p_true {:e}, p_false {:e}, e {:.6}",
            c.p_coin, c.p_true, c.p_false, c.e
        ),
    }
}

fn cmd_rate(args: &IoArgs) -> std::result::Result<bool, Failure> {
    let cfg = load(&args.config)?;
    let reports = cfg.run_point().map_err(config_error)?;
    let text = match format_of(args, &cfg) {
        Format::Json => config::json_string(&reports).map_err(anyhow::Error::new)?,
        Format::Csv => {
            let mut s = String::new();
            for r in &reports {
                let p = &r.point;
                s.push_str(&format!("{} at {}: rate {:e} bits/pulse (raw {:e})\n", r.label, p.abscissa, p.rate, p.rate_raw));
                if let Some(param) = p.optimal_param {
                    s.push_str(&format!("  optimal parameter {param:.6}\n"));
                }
                if let Some(st) = &p.stats {
                    s.push_str(&format!("  {}\n", describe_stats(st)));
                }
                if let Some(b) = &r.budget {
                    s.push_str(&format!(
                        "  n_tot {}: n_rec {}, tau {:.6}, kappa {}, r {}, eve info <= {:e} bits\n",
                        cfg.n_tot, b.n_rec, b.tau, b.kappa, b.r, b.eve_info_bound
                    ));
                }
                if p.rate <= 0.0 {
                    s.push_str("  no secure key\n");
                }
                if let Some(d) = &p.diagnostic {
                    s.push_str(&format!("  note: {d}\n"));
                }
            }
            s
        }
    };
    emit(args.out.as_deref(), &text)?;
    Ok(true)
}

fn cmd_sweep(args: &IoArgs) -> std::result::Result<bool, Failure> {
    let cfg = load(&args.config)?;
    if cfg.grid.is_none() {
        return Err(Failure::Config(anyhow::anyhow!("sweep needs `grid` in the config")));
    }
    let results = cfg.run_sweep().map_err(config_error)?;
    let text = match format_of(args, &cfg) {
        Format::Csv => config::csv_string(&results),
        Format::Json => config::json_string(&results),
    }
    .map_err(anyhow::Error::new)?;
    let out = args.out.as_deref().or(cfg.output.path.as_deref());
    emit(out, &text)?;
    Ok(true)
}

fn cmd_optimize(args: &IoArgs) -> std::result::Result<bool, Failure> {
    let cfg = load(&args.config)?;
    let found = cfg.run_optimize().map_err(config_error)?;
    let text = match format_of(args, &cfg) {
        Format::Json => config::json_string(&found).map_err(anyhow::Error::new)?,
        Format::Csv => {
            let mut s = String::from("curve,param,rate,zero_rate\n");
            for r in &found {
                let o = &r.optimum;
                s.push_str(&format!("{},{:e},{:e},{}\n", r.label, o.param, o.rate.clamped, o.zero_rate));
            }
            s
        }
    };
    emit(args.out.as_deref(), &text)?;
    Ok(true)
}

fn cmd_cutoff(args: &IoArgs) -> std::result::Result<bool, Failure> {
    let cfg = load(&args.config)?;
    let found = cfg.run_cutoff();
    let text = match format_of(args, &cfg) {
        Format::Json => config::json_string(&found).map_err(anyhow::Error::new)?,
        Format::Csv => {
            let mut s = String::from("curve,cutoff_km,diagnostic\n");
            for c in &found {
                let km = c.cutoff_km.map(|v| v.to_string()).unwrap_or_default();
                s.push_str(&format!("{},{km},{}\n", c.label, c.diagnostic.clone().unwrap_or_default()));
            }
            s
        }
    };
    emit(args.out.as_deref(), &text)?;
    Ok(true)
}

fn cmd_verify(args: &VerifyArgs) -> std::result::Result<bool, Failure> {
    let report = verify::run_suite(args.suite).map_err(anyhow::Error::new)?;
    let text = config::json_string(&report).map_err(anyhow::Error::new)?;
    emit(args.out.as_deref(), &text)?;
    for p in report.properties.iter().filter(|p| !p.informational) {
        eprintln!("{} {}: {:e}", if p.passed { "PASS" } else { "FAIL" }, p.property, p.measured);
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Rate(a) => cmd_rate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Cutoff(a) => cmd_cutoff(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
