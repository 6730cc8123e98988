mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use wiretap_core::chanmodel::{generate_channels, partition_svd, CsiErrorModel};
use wiretap_core::perturb::{compute_moments, perturbation_ratio, predict_naive_powers};
use wiretap_core::sim::{
    db_to_linear, linear_to_db, run_experiment, Averaging, ExperimentConfig, Scenario, SchemeTag, Sweep, SweepResult,
    VALIDITY_LIMIT_DB,
};
use wiretap_core::validate::{run_suite, SuiteOptions};
use wiretap_core::Error;

use output::{Format, PlotKind};

#[derive(Parser)]
#[command(name = "wiretap", version, about = "Monte Carlo simulator for artificial-noise MIMO secrecy with imperfect CSI")]
struct Cli {
    /// Worker threads for the Monte Carlo loop (default: all cores).
    #[arg(long, global = true, env = "WIRETAP_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file and/or flags.
    Run {
        /// TOML or JSON config, or a manifest written by an earlier run.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        exp: ExperimentArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Reproduce one of the five preset experiments.
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=5))]
        number: u8,
        #[command(flatten)]
        exp: ExperimentArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Closed-form naive SINR for one random channel.
    Predict {
        #[arg(long, default_value_t = 5)]
        na: usize,
        #[arg(long, default_value_t = 5)]
        nb: usize,
        #[arg(long = "sigma-h-db", default_value_t = -20.0, allow_negative_numbers = true)]
        sigma_h_db: f64,
        #[arg(long = "target-sinr-db", default_value_t = 20.0, allow_negative_numbers = true)]
        target_sinr_db: f64,
        #[arg(long = "power-db", default_value_t = 20.0, allow_negative_numbers = true)]
        power_db: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the built-in invariant and oracle checks.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fewer channels and oracle draws.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Args, Default)]
struct ExperimentArgs {
    #[arg(long, value_delimiter = ',')]
    na: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    nb: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    ne: Option<Vec<usize>>,
    #[arg(long = "target-sinr-db", value_delimiter = ',', allow_hyphen_values = true)]
    target_sinr_db: Option<Vec<f64>>,
    #[arg(long = "sigma-h-db", value_delimiter = ',', allow_hyphen_values = true)]
    sigma_h_db: Option<Vec<f64>>,
    #[arg(long = "gamma-ecsi")]
    gamma_ecsi: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long = "power-db", allow_negative_numbers = true)]
    power_db: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated scheme tags, e.g. `perfect,naive,robust_fdd`.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    /// Robust FDD receiver propagates the jamming through the channel estimate.
    #[arg(long = "jam-through-estimate")]
    jam_through_estimate: bool,
    #[arg(long, value_enum)]
    averaging: Option<AveragingArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AveragingArg {
    Ratio,
    Mean,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long = "out-dir", default_value = "wiretap-out")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

enum CliError {
    Config(String),
    Validity(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parameter(_) | Error::Dimension(_) | Error::Orientation { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Validity(e.to_string()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Config(format!("{e:#}"))
    }
}

/// One labelled experiment of a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Curve {
    pub label: String,
    pub config: ExperimentConfig,
}

#[derive(Serialize, Deserialize)]
struct ManifestInput {
    curves: Vec<Curve>,
}

fn sweep<T: Copy>(v: Vec<T>) -> Sweep<T> {
    if v.len() == 1 {
        Sweep::One(v[0])
    } else {
        Sweep::Many(v)
    }
}

impl ExperimentArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), CliError> {
        if let Some(v) = &self.na {
            cfg.na = sweep(v.clone());
        }
        if let Some(v) = &self.nb {
            cfg.nb = sweep(v.clone());
        }
        if let Some(v) = &self.ne {
            cfg.ne = sweep(v.clone());
        }
        if let Some(v) = &self.target_sinr_db {
            cfg.target_sinr_db = sweep(v.clone());
        }
        if let Some(v) = &self.sigma_h_db {
            cfg.sigma_h_db = sweep(v.clone());
        }
        if let Some(g) = self.gamma_ecsi {
            cfg.gamma_ecsi = g;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(p) = self.power_db {
            cfg.power_db = p;
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(list) = &self.schemes {
            cfg.schemes = list.iter().map(|s| s.trim().parse::<SchemeTag>()).collect::<Result<_, _>>()?;
        }
        if self.jam_through_estimate {
            cfg.jam_through_estimate = true;
        }
        if let Some(a) = self.averaging {
            cfg.averaging = match a {
                AveragingArg::Ratio => Averaging::RatioOfExpectations,
                AveragingArg::Mean => Averaging::MeanLinear,
            };
        }
        Ok(())
    }
}

fn read_config(path: &Path) -> Result<Vec<Curve>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        if let Ok(m) = serde_json::from_str::<ManifestInput>(&text) {
            return Ok(m.curves);
        }
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
        Ok(vec![Curve { label: String::new(), config }])
    } else {
        let config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
        Ok(vec![Curve { label: String::new(), config }])
    }
}

fn figure_curves(number: u8) -> (PlotKind, Vec<Curve>) {
    let curve = |label: &str, config| Curve { label: label.to_string(), config };
    match number {
        1 => {
            let base = ExperimentConfig::preset(Scenario::Fig1NeSweep);
            let eight = ExperimentConfig { na: Sweep::One(8), nb: Sweep::One(8), ..base.clone() };
            (PlotKind::Eve, vec![curve("n4", base), curve("n8", eight)])
        }
        2 => {
            let base = ExperimentConfig::preset(Scenario::Fig2Prediction);
            let two = ExperimentConfig { na: Sweep::One(2), nb: Sweep::One(2), ne: Sweep::One(2), ..base.clone() };
            (PlotKind::Bob, vec![curve("n2", two), curve("n5", base)])
        }
        3 => (PlotKind::BobEve, vec![curve("", ExperimentConfig::preset(Scenario::Fig3SinrVsTarget))]),
        4 => (PlotKind::Secrecy, vec![curve("", ExperimentConfig::preset(Scenario::Fig4Secrecy))]),
        _ => (PlotKind::BobEve, vec![curve("", ExperimentConfig::preset(Scenario::Fig5SigmaSweep))]),
    }
}

fn execute(curves: Vec<Curve>, kind: PlotKind, out: &OutputArgs, plot_name: &str, threads: usize) -> Result<(), CliError> {
    for c in &curves {
        c.config.validate()?;
    }
    let start = Instant::now();
    let mut results: Vec<(Curve, SweepResult)> = Vec::with_capacity(curves.len());
    for c in curves {
        let r = run_experiment(&c.config)?;
        results.push((c, r));
    }
    let wall = start.elapsed().as_secs_f64();
    let written = output::write_bundle(&out.out_dir, out.format, plot_name, kind, &results, wall, threads)
        .map_err(|e| CliError::Config(format!("cannot write results: {e:#}")))?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn predict(na: usize, nb: usize, sigma_h_db: f64, target_sinr_db: f64, power_db: f64, seed: u64) -> Result<(), CliError> {
    let chan = generate_channels(na, nb, 1, 1.0, seed)?.with_link_budget(db_to_linear(power_db), 1.0, 1.0)?;
    let svd = partition_svd(&chan.h_ba)?;
    let sigma_h_sq = db_to_linear(sigma_h_db);
    let moments = compute_moments(&svd, &CsiErrorModel::iid(sigma_h_sq)?)?;
    let s = db_to_linear(target_sinr_db);
    let p = predict_naive_powers(&svd, &moments, &chan, s)?;
    let sinr_db = linear_to_db(p.sinr());
    println!("target_sinr_db = {target_sinr_db:.16e}");
    println!("naive_sinr_db = {sinr_db:.16e}");
    println!("degradation_db = {:.16e}", target_sinr_db - sinr_db);
    println!("sigma_1 = {:.16e}", svd.sigma_1());
    println!("perturbation_ratio = {:.16e}", perturbation_ratio(&svd, sigma_h_sq.sqrt()));
    println!("outage = {}", p.outage);
    if sigma_h_db > VALIDITY_LIMIT_DB {
        eprintln!("warning: sigma_h_db above {VALIDITY_LIMIT_DB} dB; the second-order prediction is extrapolated");
    }
    Ok(())
}

fn validate(seed: u64, quick: bool) -> Result<(), CliError> {
    let opts = if quick {
        SuiteOptions { channels: 100, oracle_draws: 100_000, seed }
    } else {
        SuiteOptions { seed, ..Default::default() }
    };
    let results = run_suite(&opts)?;
    let mut all = true;
    for r in &results {
        all &= r.passed;
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    if all {
        Ok(())
    } else {
        Err(CliError::Validity("validation suite reported failures".into()))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = match cli.threads {
        Some(0) => return Err(CliError::Config("threads must be ≥ 1".into())),
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
            n
        }
        None => rayon::current_num_threads(),
    };
    match cli.command {
        Command::Run { config, exp, out } => {
            let mut curves = match &config {
                Some(path) => read_config(path)?,
                None => vec![Curve { label: String::new(), config: ExperimentConfig::default() }],
            };
            for c in &mut curves {
                exp.apply(&mut c.config)?;
            }
            execute(curves, PlotKind::BobEve, &out, "plot.csv", threads)
        }
        Command::Figure { number, exp, out } => {
            let (kind, mut curves) = figure_curves(number);
            for c in &mut curves {
                exp.apply(&mut c.config)?;
            }
            execute(curves, kind, &out, &format!("fig{number}.csv"), threads)
        }
        Command::Predict { na, nb, sigma_h_db, target_sinr_db, power_db, seed } => {
            predict(na, nb, sigma_h_db, target_sinr_db, power_db, seed)
        }
        Command::Validate { seed, quick } => validate(seed, quick),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Validity(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
