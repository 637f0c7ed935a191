use annuity_cli::commands::{self, FairAnnuityArgs, Overrides};
use annuity_cli::CliError;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

/// Lifecycle annuitization solver: closed form, oracle cross-checks and figure data.
///
/// Exit codes: 0 success, 1 some criteria or curves failed, 2 invalid
/// config or flags, 3 numerical or i/o failure.
#[derive(Parser)]
#[command(name = "annuity", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Scenario file (flat `key = value` or JSON); baseline when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Policy form: foc or printed.
    #[arg(long, global = true)]
    mode: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve at each eval age and write summary.txt / summary.kv.
    Solve,
    /// Write the figure CSVs.
    Curves,
    /// Run the acceptance battery and write verify_report.{txt,json}.
    Verify,
    /// Print annuity factors and fair payout rates.
    FairAnnuity {
        #[arg(long, default_value_t = 0.03)]
        beta: f64,
        #[arg(long, default_value_t = 85.0)]
        modal_age: f64,
        #[arg(long, default_value_t = 10.0)]
        dispersion: f64,
        /// Use a constant hazard instead of Gompertz.
        #[arg(long)]
        constant_delta: Option<f64>,
        /// Comma-separated ages.
        #[arg(long, value_delimiter = ',', default_value = "60,65,70,75,80,85,90")]
        ages: Vec<f64>,
    },
    /// Simulate the closed-form policy and record sample paths.
    Simulate {
        /// Full age-dependent hazard instead of the stationary model.
        #[arg(long)]
        gompertz: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = cli.global;
    if let Command::FairAnnuity { beta, modal_age, dispersion, constant_delta, ages } = cli.command {
        let rows = commands::fair_annuity(&FairAnnuityArgs { beta, modal_age, dispersion, constant_delta, ages })?;
        print!("{}", commands::render_fair_annuity(&rows));
        return Ok(());
    }
    let ov = Overrides { out: g.out, seed: g.seed, workers: g.workers, mode: g.mode };
    let cfg = commands::load(g.config.as_deref(), &ov)?;
    if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build_global()
            .map_err(|e| CliError::Validation(format!("workers: {e}")))?;
    }
    let start = Instant::now();
    match cli.command {
        Command::Solve => print!("{}", commands::solve(&cfg)?),
        Command::Curves => {
            let results = commands::curves(&cfg)?;
            let mut failed = Vec::new();
            for (name, err) in results {
                match err {
                    None => println!("wrote {name}"),
                    Some(e) => {
                        eprintln!("{name}: {e}");
                        failed.push(name);
                    }
                }
            }
            if !failed.is_empty() {
                return Err(CliError::Incomplete(format!("{} curve(s) failed: {}", failed.len(), failed.join(", "))));
            }
        }
        Command::Verify => {
            let report = commands::verify(&cfg)?;
            print!("{}", report.render_text());
            eprintln!("verify finished in {:.1} s", start.elapsed().as_secs_f64());
            if !report.all_pass() {
                return Err(CliError::Incomplete("some criteria failed".into()));
            }
        }
        Command::Simulate { gompertz } => print!("{}", commands::simulate(&cfg, gompertz)?),
        Command::FairAnnuity { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
