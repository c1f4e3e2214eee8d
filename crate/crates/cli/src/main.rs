//! `mdtax`: solve and analyze the multidimensional taxation planner
//! problem, identify skills from earnings records, and export the planner
//! LP in standard formats.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 IO
//! error.

use clap::{Parser, Subcommand, ValueEnum};
use mdtax_cli::commands::{analyze, benchmark, export, identify, resolve_out_dir, solve};
use mdtax_cli::config::RunConfig;
use mdtax_cli::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mdtax", version, about = "Multidimensional taxation planner toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LpFormat {
    Mps,
    Lp,
}

#[derive(Subcommand)]
enum Command {
    /// Invert earnings records into skills and smooth them onto the grid.
    Identify {
        #[arg(long)]
        config: PathBuf,
        /// Input records CSV (falls back to io.input in the config).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the planner problem with the assignment iteration.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Benchmark mode: drop incentive and outside-option rows.
        #[arg(long)]
        no_ic: bool,
        /// Override the wage-schedule convexity parameter.
        #[arg(long)]
        eta: Option<f64>,
        /// Override the grid size, e.g. 12x12.
        #[arg(long)]
        grid: Option<String>,
        /// Override the random seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Continue from the checkpoints in the output directory.
        #[arg(long)]
        resume: bool,
        /// Export the final approximate LP next to the outputs.
        #[arg(long)]
        dump_lp: bool,
        /// Override the outer-iteration cap.
        #[arg(long)]
        max_outer: Option<usize>,
    },
    /// Diagnostics over a solve bundle.
    Analyze {
        /// Directory produced by solve.
        #[arg(long)]
        bundle: PathBuf,
        /// Config override; defaults to the bundle's resolved config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form unconstrained benchmark.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the initial planner LP.
    ExportLp {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "mps")]
        format: LpFormat,
        /// Output file path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn apply_overrides(
    cfg: &mut RunConfig,
    eta: Option<f64>,
    grid: Option<&str>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    if let Some(e) = eta {
        cfg.model.eta = e;
    }
    if let Some(g) = grid {
        let parts: Vec<&str> = g.split(['x', 'X']).collect();
        if parts.len() != 2 {
            return Err(CliError::Config(format!(
                "grid override must look like 12x12, got {g:?}"
            )));
        }
        cfg.grid.n_c = parts[0]
            .parse()
            .map_err(|_| CliError::Config(format!("bad grid size {:?}", parts[0])))?;
        cfg.grid.n_m = parts[1]
            .parse()
            .map_err(|_| CliError::Config(format!("bad grid size {:?}", parts[1])))?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Identify { config, input, out } => {
            let cfg = RunConfig::from_path(&config)?;
            let out_dir = resolve_out_dir(&cfg, out.as_deref());
            let input = input
                .or_else(|| cfg.io.input.as_ref().map(PathBuf::from))
                .ok_or_else(|| {
                    CliError::Config("identify needs --input or io.input".to_string())
                })?;
            let result = identify::run(&cfg, &input, &out_dir)?;
            println!(
                "identified {} workers ({} malformed rows skipped) -> {}",
                result.workers.len(),
                result.malformed.len(),
                out_dir.display()
            );
            Ok(())
        }
        Command::Solve {
            config,
            out,
            no_ic,
            eta,
            grid,
            seed,
            resume,
            dump_lp,
            max_outer,
        } => {
            let mut cfg = RunConfig::from_path(&config)?;
            apply_overrides(&mut cfg, eta, grid.as_deref(), seed)?;
            let out_dir = resolve_out_dir(&cfg, out.as_deref());
            let flags = solve::SolveFlags {
                no_ic,
                resume,
                dump_lp,
                max_outer,
            };
            let result = solve::run(&cfg, &out_dir, &flags)?;
            println!(
                "solved: lambda = {:.6}, converged at outer iteration {} -> {}",
                result.lambda,
                result.converged_at,
                out_dir.display()
            );
            Ok(())
        }
        Command::Analyze {
            bundle,
            config,
            out,
        } => {
            let cfg_path = config.unwrap_or_else(|| bundle.join("resolved_config.toml"));
            let cfg = RunConfig::from_path(&cfg_path)?;
            let out_dir = out.unwrap_or_else(|| bundle.clone());
            let result = analyze::run(&cfg, &bundle, &out_dir)?;
            println!(
                "analyzed: bunched mass {:.4} (blunt {:.2}, targeted {:.2}) -> {}",
                result.bunched_mass,
                result.blunt_share,
                result.targeted_share,
                out_dir.display()
            );
            Ok(())
        }
        Command::Benchmark { config, out } => {
            let cfg = RunConfig::from_path(&config)?;
            let out_dir = resolve_out_dir(&cfg, out.as_deref());
            benchmark::run(&cfg, &out_dir)?;
            println!("benchmark written -> {}", out_dir.display());
            Ok(())
        }
        Command::ExportLp {
            config,
            format,
            out,
        } => {
            let cfg = RunConfig::from_path(&config)?;
            let (fmt, ext) = match format {
                LpFormat::Mps => (mdtax::lp::ExportFormat::Mps, "mps"),
                LpFormat::Lp => (mdtax::lp::ExportFormat::LpText, "lp"),
            };
            let out_path = out.unwrap_or_else(|| {
                resolve_out_dir(&cfg, None).join(format!("planner.{ext}"))
            });
            export::run(&cfg, fmt, &out_path)?;
            println!("LP written -> {}", out_path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
