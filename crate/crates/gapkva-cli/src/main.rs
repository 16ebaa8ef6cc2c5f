use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use gapkva_cli::config::{OutputFormat, RunConfig};
use gapkva_cli::error::{CliError, CliResult};
use gapkva_cli::output::{pde_report_csv, price_table, to_csv, to_json};
use gapkva_cli::{load_config, parse_config, pipeline, TABLE1_CONFIG};

#[derive(Parser)]
#[command(
    name = "gapkva",
    version,
    about = "Term-repo pricing with margin-period gap risk, economic capital and KVA"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration file (flat `key = value` format)
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    /// Override mc.seed from the configuration
    #[arg(long)]
    seed: Option<u64>,
    /// Override mc.n_paths from the configuration
    #[arg(long)]
    paths: Option<usize>,
    /// Write the data to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv or json
    #[arg(long)]
    format: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Price the configured repo: npv*, CRA, GAP-EVA, KVA, npv, break-even
    Price(RunArgs),
    /// Emit the economic-capital term profile as (t, N_c(t)/N_p)
    EcProfile(RunArgs),
    /// Sweep haircuts and compare economic- vs regulatory-capital value
    HaircutSweep(RunArgs),
    /// Cross-validate the PDE solver against the closed form and Monte Carlo
    PdeCheck(RunArgs),
    /// Price the bundled sample-repo configuration
    Table1(Overrides),
}

fn apply_overrides(cfg: &mut RunConfig, ov: &Overrides) -> CliResult<()> {
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    if let Some(paths) = ov.paths {
        if paths == 0 {
            return Err(CliError::Config("--paths must be >= 1".into()));
        }
        cfg.n_paths = paths;
    }
    if let Some(out) = &ov.out {
        cfg.out_path = Some(out.clone());
    }
    if let Some(fmt) = &ov.format {
        cfg.format = fmt.parse().map_err(CliError::Config)?;
    }
    Ok(())
}

fn emit(cfg: &RunConfig, data: String, human: Option<String>) -> CliResult<()> {
    match &cfg.out_path {
        Some(path) => {
            std::fs::write(path, &data)?;
            if let Some(table) = human {
                print!("{table}");
            }
            println!("wrote {}", path.display());
        }
        None => {
            if let Some(table) = human {
                print!("{table}");
                println!();
            }
            print!("{data}");
        }
    }
    Ok(())
}

fn run_price_command(cfg: &RunConfig) -> CliResult<()> {
    let rows = pipeline::run_price(cfg)?;
    let data = match cfg.format {
        OutputFormat::Csv => to_csv(&rows),
        OutputFormat::Json => to_json(&rows),
    };
    emit(cfg, data, Some(price_table(&rows)))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Price(args) => {
            let mut cfg = load_config(&args.config)?;
            apply_overrides(&mut cfg, &args.overrides)?;
            run_price_command(&cfg)
        }
        Command::Table1(overrides) => {
            let mut cfg = parse_config(TABLE1_CONFIG)?;
            apply_overrides(&mut cfg, &overrides)?;
            run_price_command(&cfg)
        }
        Command::EcProfile(args) => {
            let mut cfg = load_config(&args.config)?;
            apply_overrides(&mut cfg, &args.overrides)?;
            let rows = pipeline::run_ec_profile(&cfg)?;
            let data = match cfg.format {
                OutputFormat::Csv => to_csv(&rows),
                OutputFormat::Json => to_json(&rows),
            };
            emit(&cfg, data, None)
        }
        Command::HaircutSweep(args) => {
            let mut cfg = load_config(&args.config)?;
            apply_overrides(&mut cfg, &args.overrides)?;
            let rows = pipeline::run_haircut_sweep(&cfg)?;
            let data = match cfg.format {
                OutputFormat::Csv => to_csv(&rows),
                OutputFormat::Json => to_json(&rows),
            };
            emit(&cfg, data, None)
        }
        Command::PdeCheck(args) => {
            let mut cfg = load_config(&args.config)?;
            apply_overrides(&mut cfg, &args.overrides)?;
            let report = pipeline::run_pde_check(&cfg)?;
            let data = match cfg.format {
                OutputFormat::Csv => pde_report_csv(&report),
                OutputFormat::Json => to_json(&report),
            };
            emit(&cfg, data, None)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
