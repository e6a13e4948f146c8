//! The `tmc` command line.

pub mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use tmc_core::datagen::generate_network_with;
use tmc_core::eval::{loio_evaluate, BaselineFactory, EvalConfig, ModelFactory, TransferFactory};
use tmc_core::io::{ingest_csv, load_model, save_model, write_dataset_csv, write_json, write_rows};
use tmc_core::lasso::{select_features, FeatureSelection};
use tmc_core::transfer::{match_intersections, run_pipeline, Prediction, TransferPlan};
use tmc_core::{Dataset, ErrorClass, Feature, Movement};

pub use config::{ModelSpec, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tmc", version, about = "Turning-movement count estimation by transfer learning")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// Master seed; every random choice derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// JSON configuration file. Flags win over its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads (default: available processors).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic network: observations.csv and params.json.
    Gen(GenArgs),
    /// Lasso feature selection: coefficient tables and the selected union.
    Select(SelectArgs),
    /// Rank source intersections for each target intersection.
    Match(MatchArgs),
    /// Full transfer pipeline: predictions.csv and plan.json.
    Run(RunArgs),
    /// Leave-one-intersection-out comparison of TL and the baselines.
    Evaluate(EvaluateArgs),
    /// Apply a saved plan to new observations.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub intersections: Option<usize>,
    #[arg(long)]
    pub days: Option<u32>,
    #[arg(long)]
    pub approaches: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LassoFlags {
    /// Number of penalties on the Lasso path.
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Cross-validation folds for choosing the penalty.
    #[arg(long)]
    pub lasso_folds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BoostFlags {
    /// Outer steps of the weight schedule.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Target folds scoring each step.
    #[arg(long)]
    pub folds: Option<usize>,
    /// Inner boosting rounds.
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Share of matched rows substituted as target data.
    #[arg(long)]
    pub fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long, value_name = "CSV")]
    pub data: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub lasso: LassoFlags,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long, value_name = "CSV")]
    pub source: PathBuf,
    #[arg(long, value_name = "CSV")]
    pub target: PathBuf,
    /// Selected variables as written by `select`; selection is rerun when absent.
    #[arg(long, value_name = "JSON")]
    pub selected: Option<PathBuf>,
    #[arg(long, value_name = "JSON")]
    pub out: PathBuf,
    #[command(flatten)]
    pub lasso: LassoFlags,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_name = "CSV")]
    pub source: PathBuf,
    /// Target observations; label columns may be empty.
    #[arg(long, value_name = "CSV")]
    pub target: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub lasso: LassoFlags,
    #[command(flatten)]
    pub boost: BoostFlags,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "CSV")]
    pub data: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Comma-separated subset of tl, knn, forest, adaboost_r2.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    #[command(flatten)]
    pub lasso: LassoFlags,
    #[command(flatten)]
    pub boost: BoostFlags,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Plan file written by `run`.
    #[arg(long, value_name = "JSON")]
    pub model: PathBuf,
    #[arg(long, value_name = "CSV")]
    pub data: PathBuf,
    #[arg(long, value_name = "CSV")]
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(tmc_core::Error),
}

impl From<tmc_core::Error> for CliError {
    fn from(e: tmc_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => match e.class() {
                ErrorClass::Data => EXIT_DATA,
                ErrorClass::Numeric => EXIT_NUMERIC,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => {
                write!(f, "{e}")?;
                if let tmc_core::Error::Rows(rows) = e {
                    for r in rows.iter().skip(1) {
                        write!(f, "\n  {r}")?;
                    }
                }
                Ok(())
            }
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// The saved model file payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSet {
    pub plans: Vec<TransferPlan>,
}

/// Contents of `selected.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedVariables {
    pub selected: Vec<Feature>,
    /// Chosen penalty per movement (left, through, right).
    pub lambda: Vec<f64>,
}

impl LassoFlags {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(v) = self.grid_size {
            c.lasso.grid_size = v;
        }
        if let Some(v) = self.lasso_folds {
            c.lasso.folds = v;
        }
    }
}

impl BoostFlags {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(v) = self.steps {
            c.boosting.steps = v;
        }
        if let Some(v) = self.folds {
            c.boosting.folds = v;
        }
        if let Some(v) = self.iterations {
            c.boosting.boost.iterations = v;
        }
        if let Some(v) = self.max_depth {
            c.boosting.boost.tree.max_depth = v;
        }
        if let Some(v) = self.fraction {
            c.matching.substitution_fraction = v;
        }
    }
}

/// Layers defaults, the optional config file and the flags, in that order.
pub fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut c = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(CliError::Usage)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    match &cli.command {
        Command::Gen(a) => {
            if let Some(v) = a.intersections {
                c.gen.intersections = v;
            }
            if let Some(v) = a.days {
                c.gen.days = v;
            }
            if let Some(v) = a.approaches {
                c.gen.approaches = v;
            }
            if let Some(v) = a.noise {
                c.gen.noise_scale = v;
            }
        }
        Command::Select(a) => a.lasso.apply(&mut c),
        Command::Match(a) => a.lasso.apply(&mut c),
        Command::Run(a) => {
            a.lasso.apply(&mut c);
            a.boost.apply(&mut c);
        }
        Command::Evaluate(a) => {
            a.lasso.apply(&mut c);
            a.boost.apply(&mut c);
            if let Some(names) = &a.models {
                let mut models = Vec::new();
                for name in names {
                    let name = name.trim();
                    let spec = c
                        .eval
                        .models
                        .iter()
                        .find(|m| m.kind() == name)
                        .copied()
                        .or_else(|| ModelSpec::default_for(name))
                        .ok_or_else(|| {
                            CliError::Usage(format!(
                                "unknown model `{name}` (expected one of {})",
                                ModelSpec::KINDS.join(", ")
                            ))
                        })?;
                    models.push(spec);
                }
                c.eval.models = models;
            }
        }
        Command::Predict(_) => {}
    }
    c.validate().map_err(CliError::Usage)?;
    Ok(c)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Summaries go to stdout, diagnostics to stderr.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("TMC_LOG", "warn"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            print!("{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("tmc: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<String> {
    let config = resolve_config(cli)?;
    if let Some(n) = cli.jobs {
        // A second call in the same process keeps the first pool.
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global() {
            log::debug!("worker pool already configured: {e}");
        }
    }
    log::info!("seed {}", config.seed);
    match &cli.command {
        Command::Gen(a) => gen(a, &config),
        Command::Select(a) => select(a, &config),
        Command::Match(a) => match_cmd(a, &config),
        Command::Run(a) => run(a, &config),
        Command::Evaluate(a) => evaluate(a, &config),
        Command::Predict(a) => predict(a),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn gen(a: &GenArgs, c: &RunConfig) -> CliResult<String> {
    let g = &c.gen;
    let net = generate_network_with(&g.generator(), g.intersections, g.days, c.seed)?;
    create_dir(&a.out)?;
    write_dataset_csv(&net.dataset, a.out.join("observations.csv"))?;
    write_json(&net.params, a.out.join("params.json"))?;
    Ok(format!(
        "generated {} observations at {} intersections over {} day(s) into {}\n",
        net.dataset.len(),
        g.intersections,
        g.days,
        a.out.display()
    ))
}

fn labeled(path: &Path) -> CliResult<Dataset> {
    Ok(ingest_csv(path, true)?)
}

fn coefficient_csv(sel: &FeatureSelection, standardized: bool) -> String {
    let mut out = String::from("variable");
    for m in Movement::ALL {
        out.push(',');
        out.push_str(m.title());
    }
    out.push('\n');
    for row in &sel.table.rows {
        let v = if standardized { row.standardized } else { row.raw };
        let _ = writeln!(out, "{},{},{},{}", row.feature.name(), v[0], v[1], v[2]);
    }
    out
}

fn selected_variables(sel: &FeatureSelection) -> SelectedVariables {
    SelectedVariables {
        selected: sel.selected.clone(),
        lambda: sel.models.iter().map(|m| m.lambda).collect(),
    }
}

fn names(features: &[Feature]) -> String {
    features.iter().map(|f| f.name()).collect::<Vec<_>>().join(", ")
}

fn select(a: &SelectArgs, c: &RunConfig) -> CliResult<String> {
    let data = labeled(&a.data)?;
    let sel = select_features(&data, &c.lasso, tmc_core::folds::derive_seed(c.seed, 0))?;
    create_dir(&a.out)?;
    fs::write(a.out.join("coefficients.csv"), coefficient_csv(&sel, false))?;
    fs::write(a.out.join("coefficients_standardized.csv"), coefficient_csv(&sel, true))?;
    write_json(&selected_variables(&sel), a.out.join("selected.json"))?;
    Ok(format!(
        "selected {} of {} variables: {}\n",
        sel.selected.len(),
        Feature::ALL.len(),
        names(&sel.selected)
    ))
}

fn match_cmd(a: &MatchArgs, c: &RunConfig) -> CliResult<String> {
    let source = labeled(&a.source)?;
    let target = ingest_csv(&a.target, false)?;
    let selected = match &a.selected {
        Some(path) => tmc_core::io::read_json::<SelectedVariables>(path)?.selected,
        None => select_features(&source, &c.lasso, tmc_core::folds::derive_seed(c.seed, 0))?.selected,
    };
    let mut results = Vec::new();
    let mut summary = String::new();
    for id in target.intersection_ids() {
        let m = match_intersections(&source, &target.intersection(&id), &selected)?;
        let _ = writeln!(summary, "{} -> {} (score {:.4})", m.target_id, m.chosen, m.ranked[0].score);
        results.push(m);
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_json(&results, &a.out)?;
    Ok(summary)
}

fn write_predictions(rows: &[Prediction], path: &Path) -> CliResult<()> {
    if rows.is_empty() {
        let header = "intersection_id,approach_id,day_index,interval_index,v_lm_hat,v_tm_hat,v_rm_hat\n";
        fs::write(path, header)?;
        return Ok(());
    }
    write_rows(rows, path)?;
    Ok(())
}

fn run(a: &RunArgs, c: &RunConfig) -> CliResult<String> {
    let source = labeled(&a.source)?;
    let target = ingest_csv(&a.target, false)?;
    let (selection, outputs) = run_pipeline(&source, &target, &c.pipeline())?;
    let mut summary = format!("selected {} variables: {}\n", selection.selected.len(), names(&selection.selected));
    let mut predictions = Vec::new();
    let mut plans = Vec::new();
    for out in outputs {
        let chosen: Vec<String> = out.plan.models.iter().map(|m| m.chosen_stage.to_string()).collect();
        let _ = writeln!(
            summary,
            "{}: matched {}, {} substituted rows, chosen stages {}",
            out.plan.match_result.target_id,
            out.plan.match_result.chosen,
            out.plan.substitute_indices.len(),
            chosen.join("/")
        );
        predictions.extend(out.predictions);
        plans.push(out.plan);
    }
    create_dir(&a.out)?;
    write_predictions(&predictions, &a.out.join("predictions.csv"))?;
    save_model(&PlanSet { plans }, c, a.out.join("plan.json"))?;
    Ok(summary)
}

fn evaluate(a: &EvaluateArgs, c: &RunConfig) -> CliResult<String> {
    let data = labeled(&a.data)?;
    let tl = TransferFactory { config: c.pipeline() };
    let baselines: Vec<BaselineFactory> = c
        .eval
        .models
        .iter()
        .filter_map(|m| m.baseline().map(|baseline| BaselineFactory { baseline }))
        .collect();
    let mut factories: Vec<&dyn ModelFactory> = Vec::new();
    let mut next = baselines.iter();
    for m in &c.eval.models {
        match m.baseline() {
            None => factories.push(&tl),
            Some(_) => factories.push(next.next().expect("one factory per baseline")),
        }
    }
    let eval = EvalConfig {
        lasso: c.lasso,
        seed: c.seed,
    };
    let mut report = loio_evaluate(&data, &factories, &eval)?;
    report.config = serde_json::to_value(c).map_err(tmc_core::Error::from)?;
    report.write(&a.out)?;
    let mut summary = String::from("MAE\n");
    summary.push_str(&report.table_csv(tmc_core::eval::Metric::Mae));
    summary.push_str("RMSE\n");
    summary.push_str(&report.table_csv(tmc_core::eval::Metric::Rmse));
    for f in &report.failures {
        let _ = writeln!(summary, "fold failure: {} {}: {}", f.model, f.intersection_id, f.error);
    }
    Ok(summary)
}

fn predict(a: &PredictArgs) -> CliResult<String> {
    let env = load_model::<PlanSet>(&a.model)?;
    let plans = env.payload.plans;
    let data = ingest_csv(&a.data, false)?;
    let mut rows = Vec::with_capacity(data.len());
    for inst in data.instances() {
        let id = inst.intersection_id();
        let plan = match plans.iter().find(|p| p.match_result.target_id == id) {
            Some(p) => p,
            None if plans.len() == 1 => &plans[0],
            None => {
                return Err(CliError::Core(tmc_core::Error::argument(format!(
                    "no plan for intersection `{id}` among {} plans",
                    plans.len()
                ))))
            }
        };
        rows.push(Prediction::new(&inst.key, plan.predict(inst)?));
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_predictions(&rows, &a.out)?;
    Ok(format!("wrote {} predictions to {}\n", rows.len(), a.out.display()))
}
