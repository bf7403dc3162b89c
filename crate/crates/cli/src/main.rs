use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use superflow::data::{
    build_supervised, generate_synthetic_basin, load_basin_csv, write_basin_csv, ColumnDescriptor, CsvFormat,
    DateRange, NaiveDate, PeriodSplit, Process, RunoffModel, SyntheticParams,
};
use superflow::harness::{
    aggregate, export_report, run_experiment, ExperimentConfig, ExperimentReport, FoldSchemeKind, Manifest,
};
use superflow::learners::{fit_learner, FittedModel, LearnerConfig, LearnerId};
use superflow::select::{permutation_vim, select_predictors, VimConfig};

const EXIT_CONFIG: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "superflow",
    version,
    about = "Super-learner ensembles for daily streamflow forecasting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic basin CSV files.
    Synth(SynthArgs),
    /// Rank lagged predictors of one basin and select the best per process.
    SelectVars(SelectArgs),
    /// Fit one learner on one basin and save the model as JSON.
    Fit(FitArgs),
    /// Apply a saved model to a basin record.
    Predict(PredictArgs),
    /// Run a full multi-basin experiment and export the report.
    Run(RunArgs),
    /// Re-aggregate a stored report and export it again.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    n_basins: usize,
    /// Record length in days.
    #[arg(long, default_value_t = 3653 + 30)]
    n_days: usize,
    /// Seed of the first basin; the others use consecutive seeds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "2003-12-02")]
    start_date: NaiveDate,
    /// `bucket` or `linear_reservoir`.
    #[arg(long, default_value = "bucket")]
    model: String,
}

#[derive(Args)]
struct BasinArgs {
    /// Basin CSV file; the file stem is the basin id.
    #[arg(long)]
    basin: PathBuf,
    /// `simple` or `camels`.
    #[arg(long, default_value = "simple")]
    format: CsvFormat,
    #[arg(long, default_value_t = superflow::data::DEFAULT_LAG_WINDOW)]
    lag_window: usize,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    basin: BasinArgs,
    /// Training period as `START..END`.
    #[arg(long, default_value = "2004-01-01..2008-12-31")]
    train: String,
    #[arg(long, default_value_t = superflow::select::DEFAULT_PER_TYPE)]
    per_type: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    n_trees: Option<usize>,
    /// Output JSON file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    basin: BasinArgs,
    #[arg(long)]
    learner: LearnerId,
    #[arg(long, default_value = "2004-01-01..2008-12-31")]
    train: String,
    /// Comma-separated predictors such as `Q1,Q2,P1`; all candidates when absent.
    #[arg(long)]
    predictors: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    basin: BasinArgs,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "2009-01-01..2013-12-31")]
    period: String,
    #[arg(long)]
    clip_negative: bool,
    /// Output CSV file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON or TOML experiment description.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Basin files; replaces the manifest of the config file.
    #[arg(long = "basin")]
    basins: Vec<PathBuf>,
    #[arg(long)]
    format: Option<CsvFormat>,
    #[arg(long)]
    train: Option<String>,
    #[arg(long)]
    test: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    fold_scheme: Option<FoldSchemeKind>,
    #[arg(long)]
    store_forecasts: bool,
    #[arg(long)]
    clip_negative: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// A `report.json` written by `run`.
    #[arg(long)]
    from: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn parse_range(text: &str) -> anyhow::Result<DateRange> {
    let (a, b) = text
        .split_once("..")
        .with_context(|| format!("expected START..END, got `{text}`"))?;
    let parse = |s: &str| s.trim().parse().with_context(|| format!("invalid date `{s}`"));
    Ok(DateRange::new(parse(a)?, parse(b)?)?)
}

fn parse_predictors(text: &str) -> anyhow::Result<Vec<ColumnDescriptor>> {
    text.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let (p, lag) = tok.split_at(tok.find(|c: char| c.is_ascii_digit()).unwrap_or(tok.len()));
            let process = match p {
                "Q" => Process::Q,
                "P" => Process::P,
                "T" => Process::T,
                _ => bail!("unknown process in predictor `{tok}`"),
            };
            let lag = lag
                .parse()
                .with_context(|| format!("invalid lag in predictor `{tok}`"))?;
            Ok(ColumnDescriptor::new(process, lag))
        })
        .collect()
}

fn write_output(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn synth(a: SynthArgs) -> anyhow::Result<ExitCode> {
    let model = match a.model.as_str() {
        "bucket" => RunoffModel::Bucket,
        "linear_reservoir" => RunoffModel::LinearReservoir,
        other => return Err(superflow::Error::Config(format!("unknown runoff model `{other}`")).into()),
    };
    let params = SyntheticParams {
        start_date: a.start_date,
        model,
        ..SyntheticParams::default()
    };
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for seed in a.seed..a.seed + a.n_basins as u64 {
        let series = generate_synthetic_basin(seed, a.n_days, &params)?;
        let path = a.out.join(format!("{}.csv", series.basin_id()));
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_basin_csv(&series, std::io::BufWriter::new(file))?;
        info!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn select_vars(a: SelectArgs) -> anyhow::Result<ExitCode> {
    let series = load_basin_csv(&a.basin.basin, a.basin.format)?;
    let train = parse_range(&a.train)?;
    let data = build_supervised(&series, a.basin.lag_window, &train, None)?;
    let mut cfg = VimConfig::default();
    if let Some(n) = a.n_trees {
        cfg.forest.n_trees = n;
    }
    let vim = permutation_vim(&data, &cfg, a.seed)?;
    let set = select_predictors(&vim, a.per_type)?;
    if set.fallback {
        warn!("no predictor had positive importance; selected Q1");
    }
    let out = serde_json::json!({ "importance": vim, "predictors": set });
    write_output(a.out.as_deref(), &(serde_json::to_string_pretty(&out)? + "\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn fit(a: FitArgs) -> anyhow::Result<ExitCode> {
    let series = load_basin_csv(&a.basin.basin, a.basin.format)?;
    let train = parse_range(&a.train)?;
    let subset = a.predictors.as_deref().map(parse_predictors).transpose()?;
    let data = build_supervised(&series, a.basin.lag_window, &train, subset.as_deref())?;
    let model = fit_learner(a.learner, &data, &LearnerConfig::with_seed(a.seed))?;
    fs::write(&a.out, model.to_json()? + "\n").with_context(|| format!("writing {}", a.out.display()))?;
    Ok(ExitCode::SUCCESS)
}

fn predict(a: PredictArgs) -> anyhow::Result<ExitCode> {
    let text = fs::read_to_string(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let model = FittedModel::from_json(&text)?;
    let series = load_basin_csv(&a.basin.basin, a.basin.format)?;
    let period = parse_range(&a.period)?;
    let data = build_supervised(&series, a.basin.lag_window, &period, Some(&model.columns))?;
    let mut pred = model.predict(&data)?;
    if a.clip_negative {
        pred.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    let mut out = String::from("date,forecast,observed\n");
    for ((d, f), o) in data.target_dates().iter().zip(&pred).zip(data.y()) {
        out.push_str(&format!("{d},{f},{o}\n"));
    }
    write_output(a.out.as_deref(), &out)?;
    Ok(ExitCode::SUCCESS)
}

fn finish(report: &ExperimentReport, out: &Path) -> anyhow::Result<ExitCode> {
    let files = export_report(report, out)?;
    for w in &report.warnings {
        warn!("{w}");
    }
    info!("wrote {} files to {}", files.len() + 1, out.display());
    let rmse = report.metric(superflow::metrics::Metric::Rmse);
    for (alg, rank) in report.algorithms.iter().zip(&rmse.mean_ranks) {
        if let Some(r) = rank {
            info!("{alg:>18}  mean RMSE rank {r:.2}");
        }
    }
    if report.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        warn!(
            "{} of {} basins failed",
            report.failures.len(),
            report.failures.len() + report.basins.len()
        );
        Ok(ExitCode::from(EXIT_PARTIAL))
    }
}

fn run(a: RunArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if !a.basins.is_empty() {
        cfg.manifest = Manifest::Files {
            paths: a.basins.clone(),
            format: a.format.unwrap_or_default(),
        };
    } else if let (Some(fmt), Manifest::Files { format, .. }) = (a.format, &mut cfg.manifest) {
        *format = fmt;
    }
    let mut split = cfg.split;
    if let Some(t) = &a.train {
        split.train = parse_range(t)?;
    }
    if let Some(t) = &a.test {
        split.test = parse_range(t)?;
    }
    cfg.split = PeriodSplit::new(split.train, split.test)?;
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    if let Some(k) = a.folds {
        cfg.folds = k;
    }
    if let Some(s) = a.fold_scheme {
        cfg.fold_scheme = s;
    }
    cfg.store_forecasts |= a.store_forecasts;
    cfg.clip_negative |= a.clip_negative;
    cfg.workers = a.workers;
    cfg.output_dir = Some(a.out.clone());
    let report = run_experiment(&cfg)?;
    finish(&report, &a.out)
}

fn report(a: ReportArgs) -> anyhow::Result<ExitCode> {
    let text = fs::read_to_string(&a.from).with_context(|| format!("reading {}", a.from.display()))?;
    let stored = ExperimentReport::from_json(&text)?;
    let rebuilt = aggregate(stored.config.clone(), stored.basins.clone(), stored.failures.clone())?;
    if rebuilt.aggregates != stored.aggregates {
        warn!("stored aggregates differ from a recomputation; exporting the recomputed values");
    }
    finish(&rebuilt, &a.out)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<superflow::Error>() {
        Some(e) if e.is_data_error() => EXIT_DATA,
        Some(_) => EXIT_CONFIG,
        // unreadable files named on the command line count as data problems
        None if err.chain().any(|c| c.is::<std::io::Error>()) => EXIT_DATA,
        None => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::SelectVars(a) => select_vars(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
