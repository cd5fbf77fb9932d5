//! The `simulate`, `fit`, `searchlight` and `compare` commands.
//!
//! Each command takes an argument struct that can come from command-line
//! flags or from a JSON config file with the same field names, and writes
//! its outputs into a directory. Outputs depend only on the arguments, so a
//! re-run with the same seed reproduces them byte for byte; wall-clock time
//! is only recorded when asked for.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cut::{expected_fit_count, ClusteringFit, CutConfig, CutMethod, SupervisedClustering};
use crate::dataset::{DataFormat, Dataset, Task};
use crate::error::{Error, Result};
use crate::estimators::{
    AnovaPipeline, BayesianRidge, ElasticNetCv, Estimator, Fitted, GridPoint, LinearSvc, LinearSvcCv, SvcConfig,
};
use crate::evaluation::{paired_t_test, summarize, FoldScheme, Score, Summary};
use crate::grid::{build_connectivity, Adjacency, VoxelGrid, WeightMap};
use crate::rng::{derive_seed, fnv1a};
use crate::searchlight::{searchlight_map, SearchlightSpec};
use crate::simulation::{simulate_1d, simulate_3d, Sim1dSpec, Sim3dSpec};

pub const REPORT_FORMAT: &str = "agd-run-report/1";

/// Reads a JSON config file into an argument struct.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::invalid(format!("bad config {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::invalid(format!("cannot create output directory {}: {e}", dir.display())))
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} {} does not exist", path.display())))
    }
}

/// Hex fingerprint of a dataset's binary encoding.
pub fn data_id(data: &Dataset) -> String {
    format!("{:016x}", fnv1a(&data.to_raw()))
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    require_file(path, "dataset")?;
    Dataset::load(path, DataFormat::from_path(path))
}

fn load_grid(path: Option<&Path>, p: usize) -> Result<VoxelGrid> {
    let grid = match path {
        Some(path) => {
            require_file(path, "grid")?;
            let text = fs::read_to_string(path)?;
            serde_json::from_str(&text).map_err(|e| Error::invalid(format!("bad grid {}: {e}", path.display())))?
        }
        None => VoxelGrid::line(p)?,
    };
    if grid.n_features() != p {
        return Err(Error::invalid(format!(
            "dataset has {p} features but the grid has {} in-mask voxels",
            grid.n_features()
        )));
    }
    Ok(grid)
}

fn parse_scheme(text: Option<&str>, default: FoldScheme, seed: u64) -> Result<FoldScheme> {
    match text {
        Some(t) => Ok(t.parse::<FoldScheme>()?.with_seed(seed)),
        None => Ok(default.with_seed(seed)),
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum SimKind {
    #[serde(rename = "1d")]
    #[value(name = "1d")]
    OneD,
    #[serde(rename = "3d")]
    #[value(name = "3d")]
    ThreeD,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    Csv,
    Raw,
}

impl FileFormat {
    fn data_format(self) -> DataFormat {
        match self {
            FileFormat::Csv => DataFormat::Csv,
            FileFormat::Raw => DataFormat::RawF64,
        }
    }

    fn extension(self) -> &'static str {
        match self {
            FileFormat::Csv => "csv",
            FileFormat::Raw => "bin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "1d")]
    pub kind: SimKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Signal-to-noise ratio in dB (3D only).
    #[arg(long)]
    pub snr_db: Option<f64>,
    /// Samples per generated set.
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FileFormat,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

impl Default for SimulateArgs {
    fn default() -> Self {
        SimulateArgs {
            kind: SimKind::OneD,
            seed: 0,
            snr_db: None,
            n_samples: None,
            format: FileFormat::Csv,
            out: PathBuf::from("."),
        }
    }
}

#[derive(Serialize)]
#[serde(tag = "kind")]
enum SpecRecord<'a> {
    #[serde(rename = "1d")]
    OneD(&'a Sim1dSpec),
    #[serde(rename = "3d")]
    ThreeD(&'a Sim3dSpec),
}

/// Writes the simulated data, its grid, true weights and spec. Returns the
/// written paths.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<PathBuf>> {
    prepare_dir(&args.out)?;
    let ext = args.format.extension();
    let fmt = args.format.data_format();
    let mut written = Vec::new();
    let mut put = |name: String| {
        let p = args.out.join(name);
        written.push(p.clone());
        p
    };
    match args.kind {
        SimKind::OneD => {
            if args.snr_db.is_some() {
                return Err(Error::invalid("--snr-db only applies to the 3D simulation"));
            }
            let mut spec = Sim1dSpec::with_seed(args.seed);
            if let Some(n) = args.n_samples {
                spec.n_samples = n;
            }
            let sim = simulate_1d(&spec)?;
            let grid = VoxelGrid::line(spec.n_features)?;
            sim.dataset.save(put(format!("dataset.{ext}")), fmt)?;
            write_json(&put("grid.json".into()), &grid)?;
            let w = WeightMap::new(sim.weights.clone(), grid)?;
            write_with(&put("true_weights.csv".into()), |b| w.write_csv(b))?;
            write_json(&put("spec.json".into()), &SpecRecord::OneD(&spec))?;
        }
        SimKind::ThreeD => {
            let mut spec = Sim3dSpec::with_seed(args.seed);
            if let Some(n) = args.n_samples {
                spec.n_samples = n;
            }
            if let Some(snr) = args.snr_db {
                spec.snr_db = Some(snr);
            }
            let sim = simulate_3d(&spec)?;
            sim.train.save(put(format!("train.{ext}")), fmt)?;
            sim.test.save(put(format!("test.{ext}")), fmt)?;
            write_json(&put("grid.json".into()), sim.true_weights.grid())?;
            write_with(&put("true_weights.csv".into()), |b| sim.true_weights.write_csv(b))?;
            write_json(&put("spec.json".into()), &SpecRecord::ThreeD(&spec))?;
        }
    }
    Ok(written)
}

// ---------------------------------------------------------------- methods

/// Estimator used on parcel averages or after ANOVA screening.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerKind {
    Brr,
    Svc,
    Enet,
}

impl FromStr for InnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brr" => Ok(InnerKind::Brr),
            "svc" => Ok(InnerKind::Svc),
            "enet" => Ok(InnerKind::Enet),
            _ => Err(Error::invalid(format!(
                "unknown estimator `{s}` (expected brr, svc or enet)"
            ))),
        }
    }
}

impl fmt::Display for InnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InnerKind::Brr => "brr",
            InnerKind::Svc => "svc",
            InnerKind::Enet => "enet",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Sc,
    Uc,
    Enet,
    Svc,
    Brr,
    Searchlight,
    Anova(InnerKind),
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(inner) = s.strip_prefix("anova+") {
            return Ok(Method::Anova(inner.parse()?));
        }
        match s {
            "sc" => Ok(Method::Sc),
            "uc" => Ok(Method::Uc),
            "enet" => Ok(Method::Enet),
            "svc" => Ok(Method::Svc),
            "brr" => Ok(Method::Brr),
            "searchlight" => Ok(Method::Searchlight),
            _ => Err(Error::invalid(format!(
                "unknown method `{s}` (expected sc, uc, enet, svc, brr, searchlight or anova+<estimator>)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Sc => f.write_str("sc"),
            Method::Uc => f.write_str("uc"),
            Method::Enet => f.write_str("enet"),
            Method::Svc => f.write_str("svc"),
            Method::Brr => f.write_str("brr"),
            Method::Searchlight => f.write_str("searchlight"),
            Method::Anova(inner) => write!(f, "anova+{inner}"),
        }
    }
}

/// Parcel-level estimator: BRR for regression, SVC with C = 0.01 for
/// classification.
fn parcel_estimator(kind: InnerKind) -> Box<dyn Estimator> {
    match kind {
        InnerKind::Brr => Box::new(BayesianRidge::default()),
        InnerKind::Svc => Box::new(LinearSvc {
            config: SvcConfig::default(),
        }),
        InnerKind::Enet => Box::new(ElasticNetCv::new(FoldScheme::kfold(4, 0))),
    }
}

fn default_inner(task: Task) -> InnerKind {
    match task {
        Task::Regression => InnerKind::Brr,
        Task::Classification => InnerKind::Svc,
    }
}

fn check_task(est: &dyn Estimator, task: Task) -> Result<()> {
    if est.task() != task {
        return Err(Error::invalid(format!(
            "estimator {} does not handle {task:?} targets",
            est.name()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------- fit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(default, deny_unknown_fields)]
pub struct FitArgs {
    /// Training dataset (`.csv` or raw `.bin`).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Held-out dataset; replaces the outer cross-validation.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Grid JSON; a line of features when absent.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// sc, uc, enet, svc, brr, searchlight or anova+{brr,svc,enet}.
    #[arg(long, default_value = "sc")]
    pub method: String,
    /// Steps of the cut (default 50, or 75 with groups).
    #[arg(long)]
    pub delta: Option<usize>,
    /// Estimator on parcels or after screening (brr, svc, enet).
    #[arg(long)]
    pub estimator: Option<String>,
    /// Exploration folds of the supervised cut.
    #[arg(long)]
    pub cv_e: Option<String>,
    /// Selection folds of both cuts.
    #[arg(long)]
    pub cv_s: Option<String>,
    /// Outer evaluation folds (default kfold:4, or logo with groups).
    #[arg(long)]
    pub cv: Option<String>,
    /// Internal folds of the voxel baselines' grid searches.
    #[arg(long)]
    pub inner_cv: Option<String>,
    #[arg(long, value_enum, default_value = "face6")]
    pub adjacency: AdjacencyArg,
    /// Searchlight radius in voxels.
    #[arg(long, default_value_t = 2.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Name of the run in comparison tables (default: the method).
    #[arg(long)]
    pub label: Option<String>,
    /// Record wall-clock time in the report.
    #[arg(long)]
    pub timing: bool,
    #[arg(long, default_value = ".")]
    #[serde(skip_serializing)]
    pub out: PathBuf,
}

impl Default for FitArgs {
    fn default() -> Self {
        FitArgs {
            data: None,
            test: None,
            grid: None,
            method: "sc".into(),
            delta: None,
            estimator: None,
            cv_e: None,
            cv_s: None,
            cv: None,
            inner_cv: None,
            adjacency: AdjacencyArg::Face6,
            radius: 2.0,
            seed: 0,
            label: None,
            timing: false,
            out: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyArg {
    Face6,
    Chain1d,
}

impl From<AdjacencyArg> for Adjacency {
    fn from(a: AdjacencyArg) -> Self {
        match a {
            AdjacencyArg::Face6 => Adjacency::Face6,
            AdjacencyArg::Chain1d => Adjacency::Chain1d,
        }
    }
}

/// How the reported scores were obtained; two runs are comparable only if
/// these agree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluation {
    /// `kfold:K`, `logo`, `loo` or `holdout`.
    pub scheme: String,
    pub seed: u64,
    pub data_id: String,
    pub test_id: Option<String>,
    /// Test fold of every sample (empty for a holdout).
    pub fold_assignment: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutReport {
    pub method: CutMethod,
    pub estimator: String,
    pub max_steps: usize,
    pub explore: String,
    pub select: String,
    pub per_fold_chosen_delta: Vec<usize>,
    pub per_fold_fit_count: Vec<usize>,
    /// From the fit on the whole training set.
    pub chosen_delta: usize,
    pub chosen_parcels: usize,
    pub fit_count: usize,
    pub skipped_singletons: usize,
    /// Closed-form fit count when no singleton was skipped.
    pub expected_fit_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub params: BTreeMap<String, f64>,
    /// `None` when every fold failed.
    pub score: Option<f64>,
    pub chosen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchlightReport {
    pub radius: f64,
    pub estimator: String,
    pub cv: String,
    pub missing: Vec<usize>,
    pub max_score: f64,
    pub best_feature: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    pub label: String,
    pub method: String,
    pub estimator: String,
    pub task: Task,
    pub score: Score,
    pub seed: u64,
    pub n_samples: usize,
    pub n_features: usize,
    pub evaluation: Evaluation,
    pub per_fold: Vec<f64>,
    pub summary: Option<Summary>,
    pub cut: Option<CutReport>,
    pub grid_search: Option<Vec<GridRecord>>,
    pub searchlight: Option<SearchlightReport>,
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
    pub config: FitArgs,
}

enum Model {
    Cut(SupervisedClustering<Box<dyn Estimator>>),
    Plain(Box<dyn Estimator>),
}

struct SplitOutcome {
    score: f64,
    fitted: Fitted,
    clustering: Option<ClusteringFit>,
}

impl Model {
    fn name(&self) -> String {
        match self {
            Model::Cut(m) => m.name(),
            Model::Plain(m) => m.name(),
        }
    }

    fn run(&self, train: &Dataset, test: Option<&Dataset>, score: Score) -> Result<SplitOutcome> {
        let (fitted, clustering) = match self {
            Model::Cut(m) => {
                let fit = m.fit_full(train)?;
                (fit.model.feature_space_model()?, Some(fit))
            }
            Model::Plain(m) => (m.fit_grouped(train.x().view(), train.y(), train.groups())?, None),
        };
        let score = match test {
            Some(test) => score.evaluate(test.y(), &fitted.predict(test.x().view())?)?,
            None => f64::NAN,
        };
        Ok(SplitOutcome {
            score,
            fitted,
            clustering,
        })
    }
}

fn grid_records(method: Method, data: &Dataset, inner: FoldScheme) -> Result<Option<Vec<GridRecord>>> {
    let (x, y) = (data.x().view(), data.y());
    let (points, best): (Vec<GridPoint>, usize) = match method {
        Method::Enet => ElasticNetCv::new(inner).search(x, y)?,
        Method::Svc => LinearSvcCv::new(inner).search(x, y)?,
        Method::Anova(kind) => match kind {
            InnerKind::Brr => AnovaPipeline::new(BayesianRidge::default(), inner).search(x, y)?,
            InnerKind::Svc => AnovaPipeline::new(LinearSvcCv::new(inner), inner).search(x, y)?,
            InnerKind::Enet => AnovaPipeline::new(ElasticNetCv::new(inner), inner).search(x, y)?,
        },
        _ => return Ok(None),
    };
    Ok(Some(
        points
            .into_iter()
            .enumerate()
            .map(|(i, p)| GridRecord {
                params: p.params.into_iter().collect(),
                score: p.score.is_finite().then_some(p.score),
                chosen: i == best,
            })
            .collect(),
    ))
}

/// Runs one method: outer evaluation (cross-validation or a held-out set),
/// a final fit on all training data, and the report, weights and (for cuts)
/// trace files in `args.out`.
pub fn cmd_fit(args: &FitArgs) -> Result<RunReport> {
    let start = Instant::now();
    let data_path = args
        .data
        .as_deref()
        .ok_or_else(|| Error::invalid("--data is required"))?;
    let method: Method = args.method.parse()?;
    let data = load_dataset(data_path)?;
    let test = args.test.as_deref().map(load_dataset).transpose()?;
    if let Some(t) = &test {
        if t.n_features() != data.n_features() {
            return Err(Error::invalid(format!(
                "test set has {} features, training set has {}",
                t.n_features(),
                data.n_features()
            )));
        }
    }
    let grid = load_grid(args.grid.as_deref(), data.n_features())?;
    prepare_dir(&args.out)?;
    let task = data.y().task();
    let score = Score::for_task(task);
    let grouped = data.groups().is_some();
    let seed = args.seed;
    let label = args.label.clone().unwrap_or_else(|| method.to_string());

    if method == Method::Searchlight {
        return fit_searchlight(args, &data, &grid, task, score, label, start);
    }

    let group_default = if grouped {
        FoldScheme::leave_one_group_out()
    } else {
        FoldScheme::kfold(4, 0)
    };
    let inner_cv = parse_scheme(
        args.inner_cv.as_deref(),
        FoldScheme::kfold(4, 0),
        derive_seed(seed, "inner", 0),
    )?;
    let inner_kind = args.estimator.as_deref().map(str::parse).transpose()?;

    let model = match method {
        Method::Sc | Method::Uc => {
            let kind = inner_kind.unwrap_or_else(|| default_inner(task));
            let estimator = parcel_estimator(kind);
            check_task(estimator.as_ref(), task)?;
            let config = CutConfig {
                max_steps: args.delta.unwrap_or(if grouped { 75 } else { 50 }),
                explore: parse_scheme(args.cv_e.as_deref(), group_default, derive_seed(seed, "explore", 0))?,
                select: parse_scheme(args.cv_s.as_deref(), group_default, derive_seed(seed, "select", 0))?,
                score,
            };
            if config.max_steps == 0 {
                return Err(Error::invalid("--delta must be at least 1"));
            }
            Model::Cut(SupervisedClustering {
                graph: build_connectivity(&grid, args.adjacency.into())?,
                method: if method == Method::Sc {
                    CutMethod::Supervised
                } else {
                    CutMethod::Unsupervised
                },
                config,
                estimator,
            })
        }
        Method::Enet => Model::Plain(Box::new(ElasticNetCv::new(inner_cv))),
        Method::Svc => Model::Plain(Box::new(LinearSvcCv::new(inner_cv))),
        Method::Brr => Model::Plain(Box::new(BayesianRidge::default())),
        Method::Anova(kind) => Model::Plain(match kind {
            InnerKind::Brr => Box::new(AnovaPipeline::new(BayesianRidge::default(), inner_cv)),
            InnerKind::Svc => Box::new(AnovaPipeline::new(LinearSvcCv::new(inner_cv), inner_cv)),
            InnerKind::Enet => Box::new(AnovaPipeline::new(ElasticNetCv::new(inner_cv), inner_cv)),
        }),
        Method::Searchlight => unreachable!("handled above"),
    };
    if let Model::Plain(est) = &model {
        check_task(est.as_ref(), task)?;
    }

    // outer evaluation
    let (evaluation, outcomes, final_fit) = match &test {
        Some(test) => {
            let outcome = model.run(&data, Some(test), score)?;
            let evaluation = Evaluation {
                scheme: "holdout".into(),
                seed,
                data_id: data_id(&data),
                test_id: Some(data_id(test)),
                fold_assignment: Vec::new(),
            };
            let per_fold = vec![(
                outcome.score,
                outcome
                    .clustering
                    .as_ref()
                    .map(|c| (c.trace.chosen_delta, c.trace.fit_count)),
            )];
            (evaluation, per_fold, outcome)
        }
        None => {
            let outer = parse_scheme(args.cv.as_deref(), group_default, derive_seed(seed, "outer-cv", 0))?;
            let folds = outer.folds(data.n_samples(), data.groups())?;
            let per_fold = folds
                .par_iter()
                .enumerate()
                .map(|(f, fold)| {
                    let train = data.select_rows(&fold.train);
                    let held = data.select_rows(&fold.test);
                    model
                        .run(&train, Some(&held), score)
                        .map(|o| (o.score, o.clustering.map(|c| (c.trace.chosen_delta, c.trace.fit_count))))
                        .map_err(|e| Error::FoldFailed {
                            fold: f,
                            source: Box::new(e),
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            let evaluation = Evaluation {
                scheme: outer.to_string(),
                seed: outer.seed,
                data_id: data_id(&data),
                test_id: None,
                fold_assignment: outer.assignment(data.n_samples(), data.groups())?,
            };
            (evaluation, per_fold, model.run(&data, None, score)?)
        }
    };
    let per_fold: Vec<f64> = outcomes.iter().map(|o| o.0).collect();

    let mut outputs = vec!["report.json".to_string(), "weights.csv".to_string()];
    let weights = WeightMap::new(final_fit.fitted.coefficients(), grid.clone())?;
    write_with(&args.out.join("weights.csv"), |b| weights.write_csv(b))?;
    write_json(&args.out.join("model.json"), &final_fit.fitted)?;
    outputs.push("model.json".into());

    let cut = match (&model, &final_fit.clustering) {
        (Model::Cut(m), Some(c)) => {
            write_json(&args.out.join("trace.json"), &c.trace.report())?;
            write_with(&args.out.join("parcellation.csv"), |b| {
                c.trace.chosen_parcellation().write_csv(b)
            })?;
            write_with(&args.out.join("tree.csv"), |b| c.tree.write_csv(b))?;
            outputs.extend(["trace.json", "parcellation.csv", "tree.csv"].map(String::from));
            let explore_folds = m.config.explore.n_folds(data.n_samples(), data.groups())?;
            let select_folds = m.config.select.n_folds(data.n_samples(), data.groups())?;
            let steps = c.trace.n_steps();
            Some(CutReport {
                method: m.method,
                estimator: m.estimator.name(),
                max_steps: m.config.max_steps,
                explore: m.config.explore.to_string(),
                select: m.config.select.to_string(),
                per_fold_chosen_delta: outcomes.iter().filter_map(|o| o.1.map(|v| v.0)).collect(),
                per_fold_fit_count: outcomes.iter().filter_map(|o| o.1.map(|v| v.1)).collect(),
                chosen_delta: c.trace.chosen_delta,
                chosen_parcels: c.trace.chosen_parcellation().n_parcels(),
                fit_count: c.trace.fit_count,
                skipped_singletons: c.trace.skipped_singletons,
                expected_fit_count: (m.method == CutMethod::Supervised && c.trace.skipped_singletons == 0)
                    .then(|| expected_fit_count(steps, explore_folds, select_folds)),
            })
        }
        _ => None,
    };
    let grid_search = grid_records(method, &data, inner_cv)?;

    let report = RunReport {
        format: REPORT_FORMAT.into(),
        label,
        method: method.to_string(),
        estimator: model.name(),
        task,
        score,
        seed,
        n_samples: data.n_samples(),
        n_features: data.n_features(),
        evaluation,
        summary: Some(summarize(&per_fold)?),
        per_fold,
        cut,
        grid_search,
        searchlight: None,
        outputs,
        wall_clock_seconds: args.timing.then(|| start.elapsed().as_secs_f64()),
        config: args.clone(),
    };
    write_json(&args.out.join("report.json"), &report)?;
    Ok(report)
}

fn fit_searchlight(
    args: &FitArgs,
    data: &Dataset,
    grid: &VoxelGrid,
    task: Task,
    score: Score,
    label: String,
    start: Instant,
) -> Result<RunReport> {
    let sl = SearchlightArgs {
        data: args.data.clone(),
        grid: args.grid.clone(),
        radius: args.radius,
        cv: args.cv.clone(),
        estimator: args.estimator.clone(),
        seed: args.seed,
        timing: false,
        out: args.out.clone(),
    };
    let (summary, map) = run_searchlight(&sl, data, grid)?;
    write_with(&args.out.join("weights.csv"), |b| map.write_csv(b))?;
    let report = RunReport {
        format: REPORT_FORMAT.into(),
        label,
        method: Method::Searchlight.to_string(),
        estimator: summary.estimator.clone(),
        task,
        score,
        seed: args.seed,
        n_samples: data.n_samples(),
        n_features: data.n_features(),
        evaluation: Evaluation {
            scheme: summary.cv.clone(),
            seed: args.seed,
            data_id: data_id(data),
            test_id: None,
            fold_assignment: Vec::new(),
        },
        per_fold: Vec::new(),
        summary: None,
        cut: None,
        grid_search: None,
        searchlight: Some(summary),
        outputs: vec!["report.json".into(), "weights.csv".into()],
        wall_clock_seconds: args.timing.then(|| start.elapsed().as_secs_f64()),
        config: args.clone(),
    };
    write_json(&args.out.join("report.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------- searchlight

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(default, deny_unknown_fields)]
pub struct SearchlightArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    pub radius: f64,
    /// Folds within each sphere (default kfold:4, or logo with groups).
    #[arg(long)]
    pub cv: Option<String>,
    /// brr (default for regression) or svc (default for classification).
    #[arg(long)]
    pub estimator: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub timing: bool,
    #[arg(long, default_value = ".")]
    #[serde(skip_serializing)]
    pub out: PathBuf,
}

impl Default for SearchlightArgs {
    fn default() -> Self {
        SearchlightArgs {
            data: None,
            grid: None,
            radius: 2.0,
            cv: None,
            estimator: None,
            seed: 0,
            timing: false,
            out: PathBuf::from("."),
        }
    }
}

fn run_searchlight(args: &SearchlightArgs, data: &Dataset, grid: &VoxelGrid) -> Result<(SearchlightReport, WeightMap)> {
    let task = data.y().task();
    let default = if data.groups().is_some() {
        FoldScheme::leave_one_group_out()
    } else {
        FoldScheme::kfold(4, 0)
    };
    let cv = parse_scheme(args.cv.as_deref(), default, derive_seed(args.seed, "searchlight", 0))?;
    let kind = args
        .estimator
        .as_deref()
        .map(str::parse)
        .transpose()?
        .unwrap_or_else(|| default_inner(task));
    let estimator = parcel_estimator(kind);
    check_task(estimator.as_ref(), task)?;
    let spec = SearchlightSpec {
        radius: args.radius,
        cv,
        score: Score::for_task(task),
    };
    let out = searchlight_map(data, grid, &spec, estimator.as_ref())?;
    let values = out.map.values();
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    Ok((
        SearchlightReport {
            radius: args.radius,
            estimator: estimator.name(),
            cv: cv.to_string(),
            missing: out.missing,
            max_score: values[best],
            best_feature: best,
        },
        out.map,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchlightRun {
    pub data_id: String,
    pub seed: u64,
    #[serde(flatten)]
    pub result: SearchlightReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

/// Writes `searchlight_map.csv` and `searchlight.json`.
pub fn cmd_searchlight(args: &SearchlightArgs) -> Result<SearchlightRun> {
    let start = Instant::now();
    let data_path = args
        .data
        .as_deref()
        .ok_or_else(|| Error::invalid("--data is required"))?;
    let data = load_dataset(data_path)?;
    let grid = load_grid(args.grid.as_deref(), data.n_features())?;
    prepare_dir(&args.out)?;
    let (result, map) = run_searchlight(args, &data, &grid)?;
    write_with(&args.out.join("searchlight_map.csv"), |b| map.write_csv(b))?;
    let run = SearchlightRun {
        data_id: data_id(&data),
        seed: args.seed,
        result,
        wall_clock_seconds: args.timing.then(|| start.elapsed().as_secs_f64()),
    };
    write_json(&args.out.join("searchlight.json"), &run)?;
    Ok(run)
}

// ---------------------------------------------------------------- compare

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(default, deny_unknown_fields)]
pub struct CompareArgs {
    /// Run reports; reports sharing a label are concatenated in order.
    #[arg(long, num_args = 1..)]
    pub reports: Vec<PathBuf>,
    /// Label of the reference method (default: the first report's).
    #[arg(long)]
    pub reference: Option<String>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

impl Default for CompareArgs {
    fn default() -> Self {
        CompareArgs {
            reports: Vec::new(),
            reference: None,
            out: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    pub min: f64,
    /// Paired t-test against the reference; `None` for the reference itself
    /// and when the test is undefined.
    pub p_vs_reference: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reference: String,
    pub score: Score,
    pub n_scores: usize,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,mean,std,max,min,p_vs_reference\n");
        for r in &self.rows {
            let p = r.p_vs_reference.map(|p| p.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.method, r.mean, r.std, r.max, r.min, p
            ));
        }
        out
    }
}

/// Builds the comparison table from loaded reports.
pub fn compare_reports(reports: &[RunReport], reference: Option<&str>) -> Result<Comparison> {
    if reports.is_empty() {
        return Err(Error::invalid("no reports to compare"));
    }
    let mut labels: Vec<String> = Vec::new();
    let mut by_label: BTreeMap<String, Vec<&RunReport>> = BTreeMap::new();
    for r in reports {
        if r.per_fold.is_empty() {
            return Err(Error::IncomparableRuns(format!(
                "run `{}` has no prediction scores",
                r.label
            )));
        }
        if !by_label.contains_key(&r.label) {
            labels.push(r.label.clone());
        }
        by_label.entry(r.label.clone()).or_default().push(r);
    }
    if labels.len() < 2 {
        return Err(Error::invalid("compare needs at least two methods (distinct labels)"));
    }
    let reference = reference.map(str::to_string).unwrap_or_else(|| labels[0].clone());
    let ref_runs = by_label
        .get(&reference)
        .ok_or_else(|| Error::invalid(format!("reference `{reference}` is not among the reports")))?;
    let score = ref_runs[0].score;
    for label in &labels {
        let runs = &by_label[label];
        if runs.len() != ref_runs.len() {
            return Err(Error::IncomparableRuns(format!(
                "`{label}` has {} runs, `{reference}` has {}",
                runs.len(),
                ref_runs.len()
            )));
        }
        for (a, b) in runs.iter().zip(ref_runs.iter()) {
            if a.score != score {
                return Err(Error::IncomparableRuns(format!("`{label}` uses a different score")));
            }
            if a.evaluation != b.evaluation || a.per_fold.len() != b.per_fold.len() {
                return Err(Error::IncomparableRuns(format!(
                    "`{label}` and `{reference}` were not evaluated on the same data and folds"
                )));
            }
        }
    }
    let scores = |label: &str| -> Vec<f64> {
        by_label[label]
            .iter()
            .flat_map(|r| r.per_fold.iter().copied())
            .collect()
    };
    let reference_scores = scores(&reference);
    let mut rows = Vec::with_capacity(labels.len());
    for label in &labels {
        let s = scores(label);
        let summary = summarize(&s)?;
        let (p, err) = if *label == reference {
            (None, None)
        } else {
            match paired_t_test(&s, &reference_scores) {
                Ok(t) => (Some(t.p_value), None),
                Err(e) => {
                    log::warn!("p-value of `{label}` against `{reference}`: {e}");
                    (None, Some(e.to_string()))
                }
            }
        };
        rows.push(ComparisonRow {
            method: label.clone(),
            mean: summary.mean,
            std: summary.std,
            max: summary.max,
            min: summary.min,
            p_vs_reference: p,
            p_error: err,
        });
    }
    Ok(Comparison {
        reference,
        score,
        n_scores: reference_scores.len(),
        rows,
    })
}

/// Writes `comparison.csv` and `comparison.json`.
pub fn cmd_compare(args: &CompareArgs) -> Result<Comparison> {
    let reports = args
        .reports
        .iter()
        .map(|p| {
            require_file(p, "report")?;
            let text = fs::read_to_string(p)?;
            serde_json::from_str::<RunReport>(&text)
                .map_err(|e| Error::invalid(format!("{} is not a run report: {e}", p.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let table = compare_reports(&reports, args.reference.as_deref())?;
    prepare_dir(&args.out)?;
    fs::write(args.out.join("comparison.csv"), table.to_csv())?;
    write_json(&args.out.join("comparison.json"), &table)?;
    Ok(table)
}
