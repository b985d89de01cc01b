use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use netfx_cli::{AnalysisConfig, CommandError};
use netfx_core::cohorts::PassRateRule;
use netfx_core::{DiscretizationScheme, IngestFormat, LogBase};

#[derive(Parser)]
#[command(
    name = "netfx",
    version,
    about = "Platform driver transfer-entropy analytics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the driver matrix and rank pairs by normalized impact.
    Analyze(CommonArgs),
    /// Select the Super-user and Great-user cohorts.
    Cohort(CommonArgs),
    /// Monthly power user curves and smile indices.
    Curve(CommonArgs),
    /// Generate a synthetic event log with known couplings.
    Synth(SynthArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config (or a previous run's manifest.json); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// jsonl or csv; inferred from the extension when omitted.
    #[arg(long)]
    format: Option<IngestFormat>,
    #[arg(long)]
    from: Option<NaiveDate>,
    #[arg(long)]
    to: Option<NaiveDate>,
    /// Destination history length.
    #[arg(long)]
    k: Option<usize>,
    /// Source history length.
    #[arg(long)]
    l: Option<usize>,
    /// bits or nats.
    #[arg(long)]
    base: Option<LogBase>,
    /// slope or quantile:N.
    #[arg(long)]
    disc: Option<DiscretizationScheme>,
    /// Flat band for the slope scheme.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    recency_days: Option<u32>,
    /// Last day of Super-user evaluation; defaults to the window end.
    #[arg(long)]
    reference_date: Option<NaiveDate>,
    /// Require each Super user's first reviewed task to have passed.
    #[arg(long)]
    first_task_rule: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Add the raw cell in A.U. to ranking.csv.
    #[arg(long)]
    au: bool,
    /// Restrict the ranking to the eleven reference pairs.
    #[arg(long = "paper-rows")]
    reference_rows: bool,
    /// Keep only the first N non-zero ranking rows.
    #[arg(long)]
    top_n: Option<usize>,
    /// Shuffle-surrogate trials per pair (0 disables).
    #[arg(long)]
    surrogates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Rank an existing A.U. matrix CSV instead of an event log.
    #[arg(long)]
    from_matrix: Option<PathBuf>,
    /// Also write each driver's symbol series.
    #[arg(long)]
    dump_series: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Coupling spec JSON; defaults to Credit -> Project at strength 0.9.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "2020-07-01")]
    from: NaiveDate,
    #[arg(long, default_value = "2020-12-31")]
    to: NaiveDate,
    #[arg(long, short, default_value = "synth")]
    out: PathBuf,
}

impl CommonArgs {
    fn resolve(self) -> Result<AnalysisConfig, CommandError> {
        let mut cfg = match &self.config {
            Some(path) => AnalysisConfig::load(path)?,
            None => AnalysisConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        if self.input.is_some() {
            cfg.input = self.input;
        }
        if self.format.is_some() {
            cfg.format = self.format;
        }
        if self.from.is_some() {
            cfg.from = self.from;
        }
        if self.to.is_some() {
            cfg.to = self.to;
        }
        if self.reference_date.is_some() {
            cfg.reference_date = self.reference_date;
        }
        if self.top_n.is_some() {
            cfg.top_n = self.top_n;
        }
        if self.from_matrix.is_some() {
            cfg.from_matrix = self.from_matrix;
        }
        set! {
            k => cfg.history.k,
            l => cfg.history.l,
            base => cfg.history.log_base,
            disc => cfg.discretization,
            recency_days => cfg.recency_days,
            out => cfg.out,
            surrogates => cfg.surrogates,
            seed => cfg.seed,
        }
        if let Some(eps) = self.epsilon {
            match &mut cfg.discretization {
                DiscretizationScheme::SlopeSign { flat_epsilon } => *flat_epsilon = eps,
                DiscretizationScheme::QuantileBins { .. } => {
                    return Err(CommandError::Config(
                        "--epsilon only applies to the slope scheme".into(),
                    ))
                }
            }
        }
        if self.first_task_rule {
            cfg.pass_rule = PassRateRule::FirstTaskPassed;
        }
        cfg.au |= self.au;
        cfg.reference_rows |= self.reference_rows;
        cfg.dump_series |= self.dump_series;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Analyze(args) => {
            let report = netfx_cli::analyze(&args.resolve()?)?;
            if let Some(top) = report.ranking.entries.first() {
                println!("top pair: {} (F = 100)", top.label());
            }
            for p in &report.outputs {
                println!("wrote {}", p.display());
            }
        }
        Command::Cohort(args) => {
            let report = netfx_cli::cohort(&args.resolve()?)?;
            println!(
                "{} super users, {} great users",
                report.selection.cohort.len(),
                report.great_users.len()
            );
            for p in &report.outputs {
                println!("wrote {}", p.display());
            }
        }
        Command::Curve(args) => {
            let report = netfx_cli::curve(&args.resolve()?)?;
            for p in &report.outputs {
                println!("wrote {}", p.display());
            }
        }
        Command::Synth(args) => {
            let report = netfx_cli::synth(
                args.spec.as_deref(),
                args.seed,
                args.from,
                args.to,
                &args.out,
            )?;
            println!("{} records", report.records);
            println!("wrote {}", report.events.display());
            println!("wrote {}", report.truth.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NETFX_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
