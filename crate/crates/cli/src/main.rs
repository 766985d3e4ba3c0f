use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use wecfarm::dataset::Scenario;
use wecfarm_cli::commands::{
    cmd_evaluate, cmd_outliers, cmd_plotdata, cmd_stats, cmd_train, Failure,
};
use wecfarm_cli::config::{parse_hidden, parse_scenario_arg, Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "wecfarm",
    version,
    about = "Wave-farm layout statistics, outlier screening and power regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Scenario data file, repeatable.
    #[arg(long = "scenario", value_name = "NAME=PATH", global = true, value_parser = parse_scenario_arg)]
    scenarios: Vec<(Scenario, PathBuf)>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// LOF neighborhood size.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Hidden layer widths, e.g. 64,64.
    #[arg(long, value_name = "WIDTHS", global = true)]
    hidden: Option<String>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Also train one model on all scenarios.
    #[arg(long, global = true)]
    combined: bool,
    /// Output directory.
    #[arg(long = "out", value_name = "DIR", global = true)]
    output_dir: Option<PathBuf>,
    /// Generate synthetic data for scenarios without a file.
    #[arg(long, global = true)]
    fixtures: bool,
    #[arg(long, global = true)]
    fixture_rows: Option<usize>,
    /// Fail scenarios whose validation reports findings.
    #[arg(long, global = true)]
    strict: bool,
    /// Split in file order instead of a seeded permutation.
    #[arg(long, global = true)]
    no_shuffle: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Farm statistics and distance/power plot data.
    Stats,
    /// LOF, z-score and IQR screening.
    Outliers,
    /// Train one model per scenario (and a combined one with --combined).
    Train,
    /// Evaluate a saved model on its test split.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        /// Scenario to evaluate on; defaults to the one the model was trained on.
        #[arg(long)]
        on: Option<Scenario>,
    },
    /// PCA scores and sampled layouts for plotting.
    Plotdata,
}

impl Common {
    fn overrides(self) -> Result<Overrides> {
        Ok(Overrides {
            scenarios: self.scenarios,
            seed: self.seed,
            k: self.k,
            hidden: self.hidden.as_deref().map(parse_hidden).transpose()?,
            epochs: self.epochs,
            output_dir: self.output_dir,
            fixture_rows: self.fixture_rows,
            combined: self.combined,
            fixtures: self.fixtures,
            strict: self.strict,
            no_shuffle: self.no_shuffle,
        })
    }
}

fn run(cli: Cli) -> Result<Vec<Failure>> {
    let config_path = cli.common.config.clone();
    let config = RunConfig::load(config_path.as_deref(), &cli.common.overrides()?)?.prepare()?;
    Ok(match cli.command {
        Command::Stats => cmd_stats(&config).failures,
        Command::Outliers => cmd_outliers(&config).failures,
        Command::Train => cmd_train(&config).failures(),
        Command::Evaluate { model, on } => cmd_evaluate(&config, &model, on).failures,
        Command::Plotdata => cmd_plotdata(&config).failures,
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            eprintln!("{} scenario(s) failed:", failures.len());
            for f in &failures {
                eprintln!("  {}: {}", f.scope, f.error);
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
