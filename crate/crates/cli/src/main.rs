//! `somdagmm` command-line interface.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 data error,
//! 3 training divergence.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use somdagmm::config::{DataFormat, ExperimentConfig};
use somdagmm::data::{
    encode, parse_csv, parse_nslkdd, read_cache, write_cache, LabeledDataset, ParseReport, PreprocessStats, RawRecord,
    RecordSchema,
};
use somdagmm::eval::{compute_metrics, threshold_energies, Metric, ThresholdPolicy};
use somdagmm::experiment::{load_dataset, resolve_schema, run_experiment, run_sweep, RunRecord};
use somdagmm::model_file::ModelFile;
use somdagmm::trainer::{train_with_progress, LOG_CSV_HEADER};
use somdagmm::Error;

const SEED_ENV: &str = "SOMDAGMM_SEED";

#[derive(Parser)]
#[command(name = "somdagmm", version, about = "SOM-assisted DAGMM anomaly detector")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and one-hot encode a raw file into a dataset cache.
    Preprocess(PreprocessArgs),
    /// Train a model on a dataset and save it.
    Train(TrainArgs),
    /// Write one energy per input row.
    Score(ScoreArgs),
    /// Score a labeled dataset and report accuracy, precision, recall and F1.
    Evaluate(EvaluateArgs),
    /// Multi-seed experiment over contamination ratios and model variants.
    Experiment(ExperimentArgs),
    /// F1 over a grid of SOM learning rates and neighborhood functions.
    Sweep(SweepArgs),
}

/// Settings shared by every command that reads a config.
#[derive(Args)]
struct ConfigArgs {
    /// File of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set train.epochs=20`. Repeatable;
    /// applied after every other flag.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Dataset file (data.path).
    #[arg(long)]
    data: Option<PathBuf>,
    /// cache, nsl-kdd or csv (data.format).
    #[arg(long)]
    format: Option<String>,
    /// nsl-kdd or a schema file (data.schema).
    #[arg(long)]
    schema: Option<String>,
    /// Label that counts as an inlier; repeatable (data.inlier_labels).
    #[arg(long = "inlier-label")]
    inlier_labels: Vec<String>,
    /// Number of training epochs (train.epochs).
    #[arg(long)]
    epochs: Option<usize>,
    /// Train plain DAGMM without SOM coordinates (ablation = no-som).
    #[arg(long)]
    no_som: bool,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Raw input file.
    #[arg(long)]
    input: PathBuf,
    /// nsl-kdd or csv.
    #[arg(long, default_value = "nsl-kdd")]
    format: String,
    /// nsl-kdd or a schema file.
    #[arg(long, default_value = "nsl-kdd")]
    schema: String,
    /// Label that counts as an inlier; repeatable.
    #[arg(long = "inlier-label")]
    inlier_labels: Vec<String>,
    /// Dataset cache to write.
    #[arg(long)]
    output: PathBuf,
    /// Parse report path; defaults to `<output>.report.json`.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Path for the resolved schema; defaults to `<output>.schema`.
    #[arg(long)]
    schema_out: Option<PathBuf>,
    #[arg(long, default_value_t = somdagmm::data::DEFAULT_MAX_BAD_RATIO)]
    max_bad_ratio: f64,
    /// warn-zeros or reject.
    #[arg(long, default_value = "warn-zeros")]
    unseen: String,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Run seed. Without it: the first explicitly configured seed, else
    /// SOMDAGMM_SEED, else the first default seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Train on rows labeled as inliers only.
    #[arg(long)]
    inliers_only: bool,
    /// Model file to write.
    #[arg(long)]
    output: PathBuf,
    /// Per-epoch objective log; defaults to `<output>.log.csv`.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Rows to score.
    #[arg(long)]
    input: PathBuf,
    /// cache, nsl-kdd or csv.
    #[arg(long, default_value = "cache")]
    format: String,
    /// Adds an anomaly column, e.g. `percentile:0.1` or `fixed:3.5`.
    #[arg(long)]
    threshold: Option<String>,
    /// Defaults to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Labeled dataset to evaluate.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "cache")]
    format: String,
    /// Defaults to the model's saved policy, else the input's anomaly ratio.
    #[arg(long)]
    threshold: Option<String>,
    /// Metrics JSON path.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Seed list, `a..b` or comma separated (seeds).
    #[arg(long)]
    seeds: Option<String>,
    /// Worker threads for independent seeds (jobs).
    #[arg(long)]
    jobs: Option<usize>,
    /// Contamination ratio; repeatable, selects the mixed scenario.
    #[arg(long = "ratio")]
    ratios: Vec<f64>,
    #[arg(long, default_value = "report")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Seed list, `a..b` or comma separated (seeds).
    #[arg(long)]
    seeds: Option<String>,
    /// Worker threads for independent seeds (jobs).
    #[arg(long)]
    jobs: Option<usize>,
    /// Comma-separated SOM learning rates (sweep.learning_rates).
    #[arg(long)]
    learning_rates: Option<String>,
    /// Comma-separated neighborhood functions (sweep.neighborhoods).
    #[arg(long)]
    neighborhoods: Option<String>,
    #[arg(long, default_value = "sweep")]
    out_dir: PathBuf,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::Diverged { .. } => 3,
                Error::Config(_) | Error::InvalidArgument(_) => 1,
                _ => 2,
            };
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return 2;
        }
    }
    1
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self {
            code: exit_code(&error),
            error,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Preprocess(a) => preprocess(a),
        Command::Train(a) => train_cmd(a),
        Command::Score(a) => score(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Experiment(a) => experiment(a),
        Command::Sweep(a) => sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Key/value overrides from the named flags, in application order.
fn flag_overrides(a: &ConfigArgs) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut push = |k: &str, v: String| out.push((k.to_string(), v));
    if let Some(p) = &a.data {
        push("data.path", p.display().to_string());
    }
    if let Some(f) = &a.format {
        push("data.format", f.clone());
    }
    if let Some(s) = &a.schema {
        push("data.schema", s.clone());
    }
    if !a.inlier_labels.is_empty() {
        push("data.inlier_labels", a.inlier_labels.join(","));
    }
    if let Some(e) = a.epochs {
        push("train.epochs", e.to_string());
    }
    if a.no_som {
        push("ablation", "no-som".into());
    }
    out
}

fn parse_set(s: &str) -> anyhow::Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{s}'")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn mentions_key(text: &str, key: &str) -> bool {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .any(|(k, _)| k.trim() == key)
}

/// Resolves the config: defaults, then the file, then named flags, then
/// `extra`, then `--set`. Returns whether `seeds` was given explicitly.
fn resolve_config(a: &ConfigArgs, extra: Vec<(String, String)>) -> anyhow::Result<(ExperimentConfig, bool)> {
    let mut cfg = ExperimentConfig::default();
    let mut seeds_given = false;
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        cfg.apply_text(&text)
            .with_context(|| format!("in config {}", path.display()))?;
        seeds_given |= mentions_key(&text, "seeds");
    }
    let sets = a.set.iter().map(|s| parse_set(s)).collect::<anyhow::Result<Vec<_>>>()?;
    for (k, v) in flag_overrides(a).into_iter().chain(extra).chain(sets) {
        seeds_given |= k == "seeds";
        cfg.set(&k, &v)?;
    }
    Ok((cfg, seeds_given))
}

fn env_seed() -> anyhow::Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => Ok(Some(v.trim().parse().map_err(|_| {
            Error::Config(format!("{SEED_ENV}='{v}' is not an unsigned integer"))
        })?)),
        Err(_) => Ok(None),
    }
}

/// Shifts the seed list to start at `SOMDAGMM_SEED` when no seeds were given.
fn apply_env_seeds(cfg: &mut ExperimentConfig, seeds_given: bool) -> anyhow::Result<()> {
    if !seeds_given {
        if let Some(base) = env_seed()? {
            let n = cfg.seeds.len() as u64;
            cfg.seeds = (base..base + n).collect();
        }
    }
    Ok(())
}

fn load_data(cfg: &ExperimentConfig, schema: &RecordSchema) -> anyhow::Result<somdagmm::experiment::ExperimentData> {
    let shown = cfg.get("data.path").unwrap_or_default();
    load_dataset(cfg, schema).with_context(|| format!("loading {shown}"))
}

fn parse_records(
    path: &Path,
    format: DataFormat,
    schema: &RecordSchema,
    max_bad_ratio: f64,
) -> anyhow::Result<(Vec<RawRecord>, ParseReport)> {
    Ok(match format {
        DataFormat::NslKdd => parse_nslkdd(path, schema, max_bad_ratio)?,
        DataFormat::Csv => parse_csv(path, schema, max_bad_ratio)?,
        DataFormat::Cache => bail!(Error::Config("expected a raw input format".into())),
    })
}

fn preprocess(a: PreprocessArgs) -> CmdResult {
    let format: DataFormat = a.format.parse()?;
    if format == DataFormat::Cache {
        return Err(anyhow::Error::from(Error::Config("preprocess reads nsl-kdd or csv input".into())).into());
    }
    let mut cfg = ExperimentConfig::default();
    cfg.set("data.schema", &a.schema)?;
    if !a.inlier_labels.is_empty() {
        cfg.set("data.inlier_labels", &a.inlier_labels.join(","))?;
    }
    let schema = resolve_schema(&cfg)?;
    let report_path = a.report.unwrap_or_else(|| with_suffix(&a.output, ".report.json"));
    let (records, report) =
        parse_records(&a.input, format, &schema, 1.0).with_context(|| format!("reading {}", a.input.display()))?;
    write_file(&report_path, &report.to_json())?;
    if report.lines == 0 {
        return Err(
            anyhow::Error::from(Error::EmptyInput(format!("{} contains no records", a.input.display()))).into(),
        );
    }
    if report.bad_ratio() > a.max_bad_ratio {
        return Err(anyhow::Error::from(Error::Parse(format!(
            "{} of {} lines malformed (limit {}); see {}",
            report.bad_lines.len(),
            report.lines,
            a.max_bad_ratio,
            report_path.display()
        )))
        .into());
    }
    if records.is_empty() {
        return Err(
            anyhow::Error::from(Error::EmptyInput(format!("{} has no valid records", a.input.display()))).into(),
        );
    }
    let (mut ds, enc) = encode(&records, &schema, a.unseen.parse()?)?;
    ds.provenance.source = a.input.display().to_string();
    write_cache(&a.output, &ds)?;
    let schema_path = a.schema_out.unwrap_or_else(|| with_suffix(&a.output, ".schema"));
    write_file(&schema_path, &schema.to_text())?;
    for (feature, n) in &enc.unseen {
        eprintln!("warning: {n} unseen categories in '{feature}' encoded as zeros");
    }
    eprintln!(
        "{} records ({} inliers, {} anomalies), {} bad lines, dimension {}",
        report.records,
        report.inliers,
        report.anomalies,
        report.bad_lines.len(),
        ds.features.cols()
    );
    println!("{}", a.output.display());
    Ok(())
}

fn train_cmd(a: TrainArgs) -> CmdResult {
    let (mut cfg, seeds_given) = resolve_config(&a.cfg, Vec::new())?;
    let seed = match a.seed {
        Some(s) => s,
        None if seeds_given => cfg.seeds[0],
        None => env_seed()?.unwrap_or(cfg.seeds[0]),
    };
    cfg.seeds = vec![seed];
    cfg.validate()?;
    let schema = resolve_schema(&cfg)?;
    let data = load_data(&cfg, &schema)?;
    let ds = if a.inliers_only {
        let keep: Vec<usize> = (0..data.data.len()).filter(|&i| !data.data.anomaly[i]).collect();
        data.data.select(&keep)
    } else {
        data.data
    };
    if ds.is_empty() {
        return Err(anyhow::Error::from(Error::EmptyInput("no training rows".into())).into());
    }
    let stats = PreprocessStats::fit(&schema, &ds.features)?;
    let x = stats.transform(&ds.features)?;
    let with_som = cfg.arms != somdagmm::config::Arms::NoSomOnly;
    let model_cfg = cfg.model(x.cols(), with_som);

    let log_path = a.log.unwrap_or_else(|| with_suffix(&a.output, ".log.csv"));
    let mut log = BufWriter::new(File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?);
    writeln!(log, "{LOG_CSV_HEADER}").context("writing log")?;
    let mut log_err = None;
    let trained = train_with_progress(&x, &model_cfg, &cfg.train_for(seed), |e| {
        eprintln!(
            "epoch {:>4}  objective {}  reconstruction {}  energy {}  penalty {}",
            e.epoch, e.terms.total, e.terms.reconstruction, e.terms.energy, e.terms.penalty
        );
        if let Err(err) = writeln!(log, "{}", e.csv_row()).and_then(|_| log.flush()) {
            log_err.get_or_insert(err);
        }
    });
    log.flush().context("writing log")?;
    if let Some(e) = log_err {
        return Err(anyhow::Error::from(e)
            .context(format!("writing {}", log_path.display()))
            .into());
    }
    let mut model = trained.with_context(|| format!("training log kept at {}", log_path.display()))?;
    model.preprocessing = Some(stats);
    let file = ModelFile {
        model,
        threshold: cfg.threshold,
    };
    file.save(&a.output)?;
    if let Some(last) = file.model.log.last() {
        let t = last.terms;
        println!(
            "final: reconstruction={} energy={} penalty={} objective={}",
            t.reconstruction, t.energy, t.penalty, t.total
        );
    }
    eprintln!("model written to {}, log to {}", a.output.display(), log_path.display());
    Ok(())
}

/// Scaled rows and labels of `input` under the model's preprocessing.
fn model_input(model: &ModelFile, input: &Path, format: &str) -> anyhow::Result<LabeledDataset> {
    let stats = model
        .model
        .preprocessing
        .as_ref()
        .ok_or_else(|| Error::Contract("model file carries no preprocessing section".into()))?;
    let format: DataFormat = format.parse()?;
    let ds = match format {
        DataFormat::Cache => {
            let raw = read_cache(input, &stats.schema).with_context(|| format!("reading {}", input.display()))?;
            stats.transform_dataset(&raw)?
        }
        raw => {
            let (records, _) = parse_records(input, raw, &stats.schema, somdagmm::data::DEFAULT_MAX_BAD_RATIO)
                .with_context(|| format!("reading {}", input.display()))?;
            stats.transform_records(&records, Default::default())?.0
        }
    };
    if ds.is_empty() {
        bail!(Error::EmptyInput(format!("{} has no rows", input.display())));
    }
    Ok(ds)
}

fn load_model(path: &Path) -> anyhow::Result<ModelFile> {
    ModelFile::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn parse_threshold(s: &Option<String>) -> anyhow::Result<Option<ThresholdPolicy>> {
    Ok(match s.as_deref() {
        None | Some("auto") | Some("test-anomaly-ratio") => None,
        Some(v) => Some(v.parse()?),
    })
}

fn score(a: ScoreArgs) -> CmdResult {
    let model = load_model(&a.model)?;
    let threshold = parse_threshold(&a.threshold)?;
    let ds = model_input(&model, &a.input, &a.format)?;
    let energies = model.model.score_batch(&ds.features)?;
    let flags = threshold.map(|t| threshold_energies(&energies, t));
    let mut out = String::from(if flags.is_some() {
        "index,energy,anomaly\n"
    } else {
        "index,energy\n"
    });
    for (i, e) in energies.iter().enumerate() {
        match &flags {
            Some(f) => out.push_str(&format!("{i},{e},{}\n", u8::from(f[i]))),
            None => out.push_str(&format!("{i},{e}\n")),
        }
    }
    match &a.output {
        Some(p) => write_file(p, &out)?,
        None => io::stdout().write_all(out.as_bytes()).context("writing stdout")?,
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> CmdResult {
    let model = load_model(&a.model)?;
    let ds = model_input(&model, &a.input, &a.format)?;
    let policy = match parse_threshold(&a.threshold)?.or(model.threshold) {
        Some(p) => p,
        None => ThresholdPolicy::Percentile(ds.anomaly_count() as f64 / ds.len() as f64),
    };
    policy.validate()?;
    let energies = model.model.score_batch(&ds.features)?;
    let predicted = threshold_energies(&energies, policy);
    let m = compute_metrics(&predicted, &ds.anomaly)?;
    for metric in Metric::ALL {
        println!("{}: {}", metric.label(), m.get(metric));
    }
    let c = m.confusion;
    println!("tp={} fp={} tn={} fn={}", c.tp, c.fp, c.tn, c.fn_);
    if let Some(p) = &a.output {
        let v = serde_json::json!({
            "threshold": policy.to_string(),
            "rows": ds.len(),
            "anomalies": ds.anomaly_count(),
            "accuracy": m.accuracy,
            "precision": m.precision,
            "recall": m.recall,
            "f1": m.f1,
            "confusion": {"tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn_},
            "undefined": {"precision": m.undefined.precision, "recall": m.undefined.recall, "f1": m.undefined.f1},
        });
        write_file(
            p,
            &(serde_json::to_string_pretty(&v).context("encoding metrics")? + "\n"),
        )?;
    }
    Ok(())
}

fn log_run(r: &RunRecord) {
    let ratio = r.condition.ratio.map_or_else(|| "ideal".to_string(), |x| x.to_string());
    match &r.outcome {
        Ok(o) => eprintln!(
            "{} ratio={} seed={} f1={} precision={} recall={}",
            r.condition.algorithm(),
            ratio,
            r.seed,
            o.metrics.f1,
            o.metrics.precision,
            o.metrics.recall
        ),
        Err(e) => eprintln!(
            "{} ratio={} seed={} FAILED: {e}",
            r.condition.algorithm(),
            ratio,
            r.seed
        ),
    }
}

fn common_extra(seeds: &Option<String>, jobs: Option<usize>) -> Vec<(String, String)> {
    let mut extra = Vec::new();
    if let Some(s) = seeds {
        extra.push(("seeds".to_string(), s.clone()));
    }
    if let Some(j) = jobs {
        extra.push(("jobs".to_string(), j.to_string()));
    }
    extra
}

fn experiment(a: ExperimentArgs) -> CmdResult {
    let mut extra = common_extra(&a.seeds, a.jobs);
    if !a.ratios.is_empty() {
        extra.push(("scenario".into(), "mixed".into()));
        let r: Vec<String> = a.ratios.iter().map(f64::to_string).collect();
        extra.push(("scenario.ratios".into(), r.join(",")));
    }
    let (mut cfg, seeds_given) = resolve_config(&a.cfg, extra)?;
    apply_env_seeds(&mut cfg, seeds_given)?;
    cfg.validate()?;
    let schema = resolve_schema(&cfg)?;
    let data = load_data(&cfg, &schema)?;
    eprintln!(
        "{} rows ({} anomalies), config {}",
        data.data.len(),
        data.data.anomaly_count(),
        cfg.hash()
    );
    let report = run_experiment(&data, &cfg, &log_run)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let dir = &a.out_dir;
    write_file(&dir.join("config.txt"), &cfg.to_text())?;
    write_file(&dir.join("table.csv"), &report.table_csv())?;
    write_file(&dir.join("runs.csv"), &report.runs_csv())?;
    write_file(&dir.join("aggregate.csv"), &report.aggregate_csv())?;
    write_file(&dir.join("whisker.csv"), &report.whisker_csv())?;
    write_file(&dir.join("degradation.csv"), &report.degradation_csv())?;
    write_file(&dir.join("summary.json"), &report.summary_json())?;
    print!("{}", report.table_csv());
    if report.conditions.iter().all(|c| c.aggregate.is_none()) {
        return Err(Failure {
            code: 3,
            error: anyhow::anyhow!("every run failed; see {}", dir.join("runs.csv").display()),
        });
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> CmdResult {
    let mut extra = common_extra(&a.seeds, a.jobs);
    if let Some(l) = &a.learning_rates {
        extra.push(("sweep.learning_rates".into(), l.clone()));
    }
    if let Some(n) = &a.neighborhoods {
        extra.push(("sweep.neighborhoods".into(), n.clone()));
    }
    let (mut cfg, seeds_given) = resolve_config(&a.cfg, extra)?;
    apply_env_seeds(&mut cfg, seeds_given)?;
    cfg.validate()?;
    let schema = resolve_schema(&cfg)?;
    let data = load_data(&cfg, &schema)?;
    let report = run_sweep(&data, &cfg, &|cell, r| {
        eprint!("lr={} neighborhood={} ", cell.learning_rate, cell.neighborhood);
        log_run(r);
    })?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    write_file(&a.out_dir.join("config.txt"), &cfg.to_text())?;
    write_file(&a.out_dir.join("grid.csv"), &report.grid_csv())?;
    write_file(&a.out_dir.join("cells.csv"), &report.cells_csv())?;
    write_file(&a.out_dir.join("summary.json"), &report.summary_json())?;
    print!("{}", report.grid_csv());
    Ok(())
}
