use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ginidep::screen::{run_screening, ScreenStatistic, ScreeningConfig};
use ginidep::single::{run_single_test, SingleTestConfig};
use ginidep::{CliError, ColumnSelector};
use ginidep_core::estimators::Statistic;
use ginidep_core::kernels::{Kernel, DEFAULT_SIGMA2};
use ginidep_core::simgen::{power_and_auc, Family, PowerConfig};

#[derive(Parser)]
#[command(
    name = "ginidep",
    version,
    about = "Gini distance dependence between numeric features and a class label"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank every feature of a CSV file by its dependence on the label.
    Screen(ScreenArgs),
    /// Permutation test of a single feature.
    Test(TestArgs),
    /// Power and AUC of the distance statistics on synthetic data.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Label column, by header name or 0-based index.
    #[arg(long)]
    label: ColumnSelector,
    #[arg(long, value_enum, default_value_t = ScreenStatistic::Gcor)]
    statistic: ScreenStatistic,
    /// Kernel bandwidth of the weighted Gaussian distance.
    #[arg(long, default_value_t = DEFAULT_SIGMA2)]
    sigma2: f64,
    /// Standardize features (on by default).
    #[arg(long, overrides_with = "no_standardize")]
    standardize: bool,
    #[arg(long)]
    no_standardize: bool,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Remove classes with fewer than two rows instead of failing.
    #[arg(long)]
    drop_small_classes: bool,
}

#[derive(Args)]
struct ScreenArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of top-ranked features to select (default: all scored).
    #[arg(long)]
    top_k: Option<usize>,
    /// Permutations per feature; 0 skips the test.
    #[arg(long, default_value_t = 0)]
    permutations: usize,
    /// Score a uniform subsample of at most this many rows.
    #[arg(long)]
    sample_cap: Option<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Feature column, by header name or 0-based index among features.
    #[arg(long)]
    feature: ColumnSelector,
    #[arg(long, default_value_t = 999)]
    permutations: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_parser = parse_family)]
    family: Family,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 2000)]
    m: usize,
    #[arg(long, default_value_t = DEFAULT_SIGMA2)]
    sigma2: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: ginidep_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Screen(args) => {
            let d = args.data;
            let cfg = ScreeningConfig {
                input: d.input,
                label: d.label,
                statistic: d.statistic,
                sigma2: d.sigma2,
                standardize: !d.no_standardize,
                top_k: args.top_k,
                permutations: args.permutations,
                alpha: d.alpha,
                seed: d.seed,
                sample_cap: args.sample_cap,
                drop_small_classes: d.drop_small_classes,
            };
            let report = run_screening(&cfg, &args.out_dir)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for f in report
                .features
                .iter()
                .filter(|f| report.selected.contains(&f.name))
            {
                match f.p_value {
                    Some(p) => println!(
                        "{:>4}  {:<24} {:.6}  p={p:.4}",
                        f.rank,
                        f.name,
                        f.value.unwrap_or(f64::NAN)
                    ),
                    None => println!(
                        "{:>4}  {:<24} {:.6}",
                        f.rank,
                        f.name,
                        f.value.unwrap_or(f64::NAN)
                    ),
                }
            }
        }
        Command::Test(args) => {
            let d = args.data;
            let cfg = SingleTestConfig {
                input: d.input,
                label: d.label,
                feature: args.feature,
                statistic: d.statistic,
                sigma2: d.sigma2,
                standardize: !d.no_standardize,
                permutations: args.permutations,
                alpha: d.alpha,
                seed: d.seed,
                drop_small_classes: d.drop_small_classes,
            };
            let report = run_single_test(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Simulate(args) => {
            let cfg = PowerConfig {
                family: args.family,
                k: args.k,
                n: args.n,
                m: args.m,
                kernel: Kernel::weighted_gaussian(args.sigma2)?,
                alpha: args.alpha,
                seed: args.seed,
            };
            let report = power_and_auc(&cfg, &Statistic::TABLE)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}
