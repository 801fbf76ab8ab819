//! Command-line front end for `mpboost`.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 model-format error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mpboost::dataset::{load_features_csv, save_csv};
use mpboost::{
    generate_cones, load_csv, train_test_split, train_with_test, tuning_grid, Dataset64, DepthLimit,
    Hyperparams, ImportanceBackend, LabelColumn, LossKind, MinipatchEnsemble64,
};

mod error;
pub mod export;
pub mod model_file;

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "mpboost", version, about = "Minipatch boosting with adaptive sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and optionally export curves and distributions.
    Train(TrainArgs),
    /// Predict labels for an unlabeled feature CSV.
    Predict(PredictArgs),
    /// Score a model on a labeled CSV.
    Evaluate(EvaluateArgs),
    /// Run the four adaptive-sampling arms with several seeds.
    Ablate(AblateArgs),
    /// Write a synthetic cones dataset.
    GenerateCones(ConesArgs),
    /// Print the (n, m, momentum) tuning grid for a dataset shape.
    Grid(GridArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl From<Switch> for bool {
    fn from(s: Switch) -> bool {
        s == Switch::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ImportanceArg {
    Impurity,
    Permutation,
}

#[derive(Debug, Clone, Args)]
struct DataArgs {
    /// Labeled CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Label column, by header name or zero-based index.
    #[arg(long, default_value = "label")]
    label_col: String,
    /// Label value mapped to +1; the other class maps to -1.
    #[arg(long, default_value = "1")]
    positive_label: String,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset64, CliError> {
        Ok(load_csv(&self.data, &LabelColumn::Name(self.label_col.clone()), &self.positive_label)?)
    }
}

#[derive(Debug, Clone, Args)]
struct HyperArgs {
    /// Minipatch rows [default: 10% of training rows].
    #[arg(long)]
    n_obs: Option<usize>,
    /// Minipatch columns [default: 10% of features].
    #[arg(long)]
    m_feat: Option<usize>,
    #[arg(long, default_value_t = mpboost::boost::DEFAULT_MOMENTUM)]
    momentum: f64,
    #[arg(long, default_value = "soft-logistic", value_parser = parse_loss)]
    loss: LossKind,
    /// Depth limit for each tree.
    #[arg(long, conflicts_with = "saturated")]
    max_depth: Option<usize>,
    /// Grow trees until leaves are pure (the default).
    #[arg(long)]
    saturated: bool,
    #[arg(long, default_value_t = mpboost::boost::DEFAULT_T_MAX)]
    t_max: usize,
    /// Ignore the stopping rule and run all t-max iterations.
    #[arg(long)]
    no_early_stop: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "on")]
    adaptive_rows: Switch,
    #[arg(long, value_enum, default_value = "on")]
    adaptive_cols: Switch,
    #[arg(long, value_enum, default_value = "impurity")]
    importance: ImportanceArg,
    /// Shuffles per feature for permutation importance.
    #[arg(long, default_value_t = mpboost::boost::DEFAULT_PERMUTATION_REPEATS)]
    perm_repeats: usize,
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    s.parse().map_err(|e: mpboost::Error| e.to_string())
}

impl HyperArgs {
    fn resolve(&self, data: &Dataset64) -> Result<Hyperparams, CliError> {
        let mut hp = Hyperparams::for_shape(data.n_rows(), data.n_cols());
        if let Some(n) = self.n_obs {
            hp.n_obs = n;
        }
        if let Some(m) = self.m_feat {
            hp.m_feat = m;
        }
        hp.momentum = self.momentum;
        hp.loss = self.loss;
        hp.depth = match self.max_depth {
            Some(d) => DepthLimit::Max(d),
            None => DepthLimit::Saturated,
        };
        hp.t_max = self.t_max;
        hp.early_stopping = !self.no_early_stop;
        hp.seed = self.seed;
        hp.adaptive_rows = self.adaptive_rows.into();
        hp.adaptive_cols = self.adaptive_cols.into();
        hp.importance = match self.importance {
            ImportanceArg::Impurity => ImportanceBackend::Impurity,
            ImportanceArg::Permutation => ImportanceBackend::Permutation {
                repeats: self.perm_repeats,
            },
        };
        hp.validate(data.n_rows(), data.n_cols())?;
        Ok(hp)
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Hold out this fraction of rows as a test set for the curves.
    #[arg(long)]
    test_frac: Option<f64>,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long)]
    model_out: PathBuf,
    /// CSV of per-iteration train, out-of-patch and test accuracy.
    #[arg(long)]
    curves_out: Option<PathBuf>,
    /// CSV of the final observation distribution.
    #[arg(long)]
    p_out: Option<PathBuf>,
    /// CSV of the final feature distribution.
    #[arg(long)]
    q_out: Option<PathBuf>,
    /// Print the summary as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model_in: PathBuf,
    /// Feature CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Column to drop before predicting (e.g. a label column).
    #[arg(long)]
    label_col: Option<String>,
    /// Add the raw vote sum as a second column.
    #[arg(long)]
    margins: bool,
    /// Vote with every learner instead of the best-iteration prefix.
    #[arg(long)]
    all_learners: bool,
    /// Output file [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    model_in: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    all_learners: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.2)]
    test_frac: f64,
    /// Runs per arm; run r uses seed + r.
    #[arg(long, default_value_t = 5)]
    repeats: u64,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Long-format CSV: arm,seed,t,test_acc.
    #[arg(long)]
    out: PathBuf,
    /// Per-run CSV: arm,seed,iterations,best_iteration,test_acc.
    #[arg(long)]
    summary_out: Option<PathBuf>,
    /// Directory for p_<arm>_<seed>.csv and q_<arm>_<seed>.csv.
    #[arg(long)]
    dist_dir: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ConesArgs {
    #[arg(long, default_value_t = 2500)]
    n_samples: usize,
    #[arg(long, default_value_t = 10)]
    informative: usize,
    #[arg(long, default_value_t = 90)]
    noise: usize,
    #[arg(long, default_value_t = 0.3)]
    margin: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long)]
    n_rows: usize,
    #[arg(long)]
    n_cols: usize,
}

/// The four adaptive-sampling arms: (name, adaptive rows, adaptive columns).
pub const ARMS: [(&str, bool, bool); 4] = [
    ("both", true, true),
    ("rows", true, false),
    ("cols", false, true),
    ("neither", false, false),
];

fn arm_name(rows: bool, cols: bool) -> &'static str {
    ARMS.iter().find(|a| a.1 == rows && a.2 == cols).map(|a| a.0).unwrap_or("both")
}

/// Parses `args` (program name first) and runs the command, writing reports
/// to `stdout`. Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Train(a) => cmd_train(a, stdout),
        Command::Predict(a) => cmd_predict(a, stdout),
        Command::Evaluate(a) => cmd_evaluate(a, stdout),
        Command::Ablate(a) => cmd_ablate(a, stdout),
        Command::GenerateCones(a) => cmd_generate_cones(a),
        Command::Grid(a) => cmd_grid(a, stdout),
    }
}

fn stdout_err(e: std::io::Error) -> CliError {
    CliError::io("<stdout>")(e)
}

fn split(data: Dataset64, test_frac: Option<f64>, seed: u64) -> Result<(Dataset64, Option<Dataset64>), CliError> {
    match test_frac {
        Some(f) => {
            let (train, test) = train_test_split(&data, f, seed)?;
            Ok((train, Some(test)))
        }
        None => Ok((data, None)),
    }
}

fn cmd_train(a: TrainArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let data = a.data.load()?;
    let (train, test) = split(data, a.test_frac, a.hyper.seed)?;
    let hp = a.hyper.resolve(&train)?;

    let start = Instant::now();
    let (model, diag) = train_with_test(&train, test.as_ref(), &hp)?;
    let elapsed = start.elapsed().as_secs_f64();

    model_file::save(&model, &a.model_out)?;
    if let Some(path) = &a.curves_out {
        export::save_curves(path, &diag.records)?;
    }
    if let Some(path) = &a.p_out {
        export::save_observation_probs(path, model.final_p())?;
    }
    if let Some(path) = &a.q_out {
        export::save_feature_probs(path, model.final_q(), model.metadata().feature_names.as_deref())?;
    }

    let best = model.best_iteration();
    let best_oop = diag.records.get(best.wrapping_sub(1)).map_or(0.0, |r| r.oop);
    let final_oop = diag.records.last().map_or(0.0, |r| r.oop);
    let test_acc = test.as_ref().map(|t| model.accuracy(t, true)).transpose()?;
    let arm = arm_name(hp.adaptive_rows, hp.adaptive_cols);
    if a.json {
        let summary = serde_json::json!({
            "arm": arm,
            "iterations": diag.records.len(),
            "best_iteration": best,
            "halt_iteration": diag.halt_iteration,
            "oop_at_best": best_oop,
            "final_oop": final_oop,
            "test_accuracy": test_acc,
            "train_seconds": elapsed,
        });
        writeln!(stdout, "{summary}").map_err(stdout_err)?;
    } else {
        let mut text = format!(
            "arm: {arm}\niterations: {}\nbest iteration (T): {best}\nfinal oop: {final_oop:.4}\noop at T: {best_oop:.4}\n",
            diag.records.len()
        );
        if let Some(acc) = test_acc {
            text.push_str(&format!("test accuracy: {acc:.4}\n"));
        }
        text.push_str(&format!("training time: {elapsed:.3} s\n"));
        stdout.write_all(text.as_bytes()).map_err(stdout_err)?;
    }
    Ok(())
}

fn check_width(model: &MinipatchEnsemble64, width: usize) -> Result<(), CliError> {
    if width != model.n_cols() {
        return Err(CliError::Data(format!(
            "feature width mismatch: model expects {} columns, input has {width}",
            model.n_cols()
        )));
    }
    Ok(())
}

fn cmd_predict(a: PredictArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let model = model_file::load(&a.model_in)?;
    let drop = a.label_col.map(LabelColumn::Name);
    let (features, width) = load_features_csv::<f64>(&a.data, drop.as_ref())?;
    check_width(&model, width)?;

    let mut text = String::from(if a.margins { "prediction,margin\n" } else { "prediction\n" });
    for row in features.chunks_exact(width) {
        let margin = model.predict_margin(row, !a.all_learners)?;
        let label = if margin >= 0.0 { 1 } else { -1 };
        if a.margins {
            text.push_str(&format!("{label},{margin}\n"));
        } else {
            text.push_str(&format!("{label}\n"));
        }
    }
    match &a.out {
        Some(path) => fs::write(path, text).map_err(CliError::io(path)),
        None => stdout.write_all(text.as_bytes()).map_err(stdout_err),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Confusion {
    pub accuracy: f64,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub n_rows: usize,
}

pub fn confusion(model: &MinipatchEnsemble64, data: &Dataset64, use_best: bool) -> Result<Confusion, CliError> {
    let predictions = model.predict_dataset(data, use_best)?;
    let mut c = Confusion {
        accuracy: 0.0,
        tp: 0,
        tn: 0,
        fp: 0,
        fn_: 0,
        n_rows: data.n_rows(),
    };
    for (&pred, &truth) in predictions.iter().zip(data.labels()) {
        match (pred, truth) {
            (1, 1) => c.tp += 1,
            (-1, -1) => c.tn += 1,
            (1, _) => c.fp += 1,
            _ => c.fn_ += 1,
        }
    }
    c.accuracy = (c.tp + c.tn) as f64 / c.n_rows as f64;
    Ok(c)
}

fn cmd_evaluate(a: EvaluateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let model = model_file::load(&a.model_in)?;
    let data = a.data.load()?;
    check_width(&model, data.n_cols())?;
    let c = confusion(&model, &data, !a.all_learners)?;
    let text = if a.json {
        format!("{}\n", serde_json::to_string(&c).expect("serializable"))
    } else {
        format!(
            "accuracy: {:.4}\nrows: {}\ntp: {}  fp: {}\nfn: {}  tn: {}\n",
            c.accuracy, c.n_rows, c.tp, c.fp, c.fn_, c.tn
        )
    };
    stdout.write_all(text.as_bytes()).map_err(stdout_err)
}

fn cmd_ablate(a: AblateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let data = a.data.load()?;
    let (train, test) = train_test_split(&data, a.test_frac, a.hyper.seed)?;
    let base = a.hyper.resolve(&train)?;
    if let Some(dir) = &a.dist_dir {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }

    let mut long = String::from("arm,seed,t,test_acc\n");
    let mut summary = String::from("arm,seed,iterations,best_iteration,test_acc\n");
    let mut means = Vec::new();
    for (arm, rows, cols) in ARMS {
        let mut total = 0.0;
        for r in 0..a.repeats {
            let mut hp = base.clone();
            hp.adaptive_rows = rows;
            hp.adaptive_cols = cols;
            hp.seed = base.seed + r;
            let (model, diag) = train_with_test(&train, Some(&test), &hp)?;
            for rec in &diag.records {
                let acc = rec.test_accuracy.expect("test set supplied");
                long.push_str(&format!("{arm},{},{},{acc}\n", hp.seed, rec.t));
            }
            let acc = model.accuracy(&test, true)?;
            summary.push_str(&format!(
                "{arm},{},{},{},{acc}\n",
                hp.seed,
                model.learners().len(),
                model.best_iteration()
            ));
            if let Some(dir) = &a.dist_dir {
                export::save_observation_probs(&dir.join(format!("p_{arm}_{}.csv", hp.seed)), model.final_p())?;
                export::save_feature_probs(
                    &dir.join(format!("q_{arm}_{}.csv", hp.seed)),
                    model.final_q(),
                    model.metadata().feature_names.as_deref(),
                )?;
            }
            total += acc;
        }
        means.push((arm, total / a.repeats.max(1) as f64));
    }

    fs::write(&a.out, long).map_err(CliError::io(&a.out))?;
    if let Some(path) = &a.summary_out {
        fs::write(path, summary).map_err(CliError::io(path))?;
    }
    let text = if a.json {
        let map: serde_json::Map<String, serde_json::Value> =
            means.iter().map(|(arm, m)| (arm.to_string(), serde_json::json!(m))).collect();
        format!("{}\n", serde_json::Value::Object(map))
    } else {
        means
            .iter()
            .map(|(arm, m)| format!("{arm:<8} mean test accuracy {m:.4}\n"))
            .collect()
    };
    stdout.write_all(text.as_bytes()).map_err(stdout_err)
}

fn cmd_generate_cones(a: ConesArgs) -> Result<(), CliError> {
    let data: Dataset64 = generate_cones(a.n_samples, a.informative, a.noise, a.margin, a.seed)?;
    save_csv(&data, &a.out, "label")?;
    Ok(())
}

fn cmd_grid(a: GridArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut text = String::from("n,m,momentum\n");
    for (n, m, mu) in tuning_grid(a.n_rows, a.n_cols) {
        text.push_str(&format!("{n},{m},{mu}\n"));
    }
    stdout.write_all(text.as_bytes()).map_err(stdout_err)
}

/// Convenience for callers that hold a path-like model location.
pub fn load_model(path: impl AsRef<Path>) -> Result<MinipatchEnsemble64, CliError> {
    model_file::load(path.as_ref())
}
