use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use equibound::bounds::Units;
use equibound::cli::{
    parse_config, parse_psbr_list, render_oracle_table, render_report, render_sweep, run_report, run_sweep,
    write_atomic, Format, RunConfig, DEFAULT_PSBR_GRID,
};
use equibound::oracle::{compare_with_oracle, random_fleet};
use equibound::{Error, Result};

#[derive(Parser)]
#[command(name = "equibound", version, about = "Monte Carlo mutual information and Bayesian-error bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every bound for one model.
    Run(Common),
    /// Evaluate a PSBR sweep of a FLEM-FLASH model.
    Sweep(Common),
    /// Built-in demonstrations.
    Demo {
        #[command(subcommand)]
        which: Demo,
    },
    /// Compare Monte Carlo estimates with quadrature on random scalar Gaussian models.
    Oracle(OracleArgs),
}

#[derive(Subcommand)]
enum Demo {
    /// FLEM-FLASH at its default parameters over the default PSBR grid.
    FlemFlash(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// One value for `run`, a comma-separated list for `sweep`.
    #[arg(long)]
    psbr: Option<String>,
    #[arg(long)]
    format: Option<Format>,
    #[arg(long)]
    units: Option<Units>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Number of random models.
    #[arg(long, default_value_t = 100)]
    models: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Agreement threshold in standard errors.
    #[arg(long, default_value_t = 3.0)]
    sigmas: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Input(format!("reading {}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(n) = common.samples {
        config.samples = n;
    }
    if let Some(s) = common.seed {
        config.seed = s;
    }
    if let Some(f) = common.format {
        config.format = f;
    }
    if let Some(u) = common.units {
        config.units = u;
    }
    if common.depth.is_some() {
        config.depth = common.depth;
    }
    if let Some(l) = common.lambda {
        config.lambda = l;
    }
    Ok(config)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Success when no row failed; exit status 2 otherwise (the report is still written).
fn status(failed: bool) -> ExitCode {
    if failed {
        eprintln!("error: one or more bounds could not be evaluated; see the flags column");
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn run(common: &Common) -> Result<ExitCode> {
    let mut config = load(common)?;
    if let Some(p) = &common.psbr {
        let values = parse_psbr_list(p)?;
        if values.len() != 1 {
            return Err(Error::Input("run takes a single --psbr value; use sweep for a list".into()));
        }
        config = config.with_psbr(values[0])?;
    }
    config.validate()?;
    let report = run_report(&config)?;
    emit(&common.out, &render_report(&config, &report)?)?;
    Ok(status(report.rows.iter().any(|r| r.failed())))
}

fn sweep(common: &Common, default_grid: &[f64]) -> Result<ExitCode> {
    let config = load(common)?;
    config.validate()?;
    let grid = match (&common.psbr, &config.psbr_grid) {
        (Some(p), _) => parse_psbr_list(p)?,
        (None, Some(g)) => g.clone(),
        (None, None) => default_grid.to_vec(),
    };
    let points = run_sweep(&config, &grid)?;
    emit(&common.out, &render_sweep(&config, &points)?)?;
    Ok(status(points.iter().any(|(_, r)| r.rows.iter().any(|row| row.failed()))))
}

fn oracle(args: &OracleArgs) -> Result<ExitCode> {
    let fleet = random_fleet(args.models, args.seed);
    let results = fleet
        .iter()
        .enumerate()
        .map(|(i, g)| Ok((i, compare_with_oracle(g, args.samples, args.seed.wrapping_add(i as u64))?)))
        .collect::<Result<Vec<_>>>()?;
    let bad = results.iter().filter(|(_, cs)| cs.iter().any(|c| !c.agrees(args.sigmas))).count();
    let mut text = render_oracle_table(&results, args.sigmas);
    text.push_str(&format!("models {} agreeing {} mismatched {bad}\n", results.len(), results.len() - bad));
    emit(&args.out, &text)?;
    // one model in a hundred may fall outside 3 SE by chance
    let allowed = args.models / 100;
    Ok(if bad > allowed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("EQUIBOUND_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| Error::Input(format!("EQUIBOUND_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Input(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Run(c) => run(c),
        Command::Sweep(c) => sweep(c, &DEFAULT_PSBR_GRID),
        Command::Demo { which: Demo::FlemFlash(c) } => sweep(c, &DEFAULT_PSBR_GRID),
        Command::Oracle(a) => oracle(a),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
