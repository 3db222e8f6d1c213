//! Multi-seed experiment harness and report emission.
//!
//! Each seed runs split, optional contamination, training, scoring,
//! thresholding and metrics. Seeds within a condition run on a pool of
//! `jobs` threads. Reports are plain CSV plus one JSON summary, with no
//! timestamps, so identical configs give byte-identical output.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{DataFormat, ExperimentConfig, Scenario};
use crate::data::{
    contamination_count, encode, mix_contamination, parse_csv, parse_nslkdd, read_cache, split_with_pool, subsample,
    LabelConvention, LabeledDataset, ParseReport, PreprocessStats, RecordSchema,
};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate, compute_metrics, five_number, threshold_energies, AggregateMetrics, FiveNumber, Metric, Metrics,
    ThresholdPolicy,
};
use crate::som::Neighborhood;
use crate::trainer::{train, ObjectiveTerms};

/// The schema named by the config, with any label override applied.
pub fn resolve_schema(cfg: &ExperimentConfig) -> Result<RecordSchema> {
    let schema = match &cfg.schema_path {
        Some(p) => RecordSchema::load(p)?,
        None => RecordSchema::nslkdd(),
    };
    Ok(match &cfg.inlier_labels {
        Some(labels) => schema.with_convention(LabelConvention::InlierLabels(labels.iter().cloned().collect())),
        None => schema,
    })
}

/// Encoded but unscaled rows with their schema. Scaling is fitted per seed
/// on that seed's training split.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentData {
    pub schema: RecordSchema,
    pub data: LabeledDataset,
    /// Present when the rows were parsed from a raw file.
    pub parse_report: Option<ParseReport>,
}

impl ExperimentData {
    pub fn new(schema: RecordSchema, data: LabeledDataset) -> Result<Self> {
        if data.provenance.schema_hash != schema.hash() {
            return Err(Error::SchemaMismatch {
                expected: schema.hash(),
                actual: data.provenance.schema_hash.clone(),
            });
        }
        Ok(Self {
            schema,
            data,
            parse_report: None,
        })
    }
}

/// Loads the dataset named by the config, after any subsampling.
pub fn load_dataset(cfg: &ExperimentConfig, schema: &RecordSchema) -> Result<ExperimentData> {
    let path = cfg
        .data_path
        .as_ref()
        .ok_or_else(|| Error::Config("data.path is not set".into()))?;
    let (ds, report) = match cfg.data_format {
        DataFormat::Cache => (read_cache(path, schema)?, None),
        DataFormat::NslKdd | DataFormat::Csv => {
            let (records, report) = if cfg.data_format == DataFormat::NslKdd {
                parse_nslkdd(path, schema, cfg.max_bad_ratio)?
            } else {
                parse_csv(path, schema, cfg.max_bad_ratio)?
            };
            let (mut ds, _) = encode(&records, schema, cfg.unseen)?;
            ds.provenance.source = path.display().to_string();
            (ds, Some(report))
        }
    };
    let ds = match cfg.subsample {
        Some(n) => subsample(&ds, n, cfg.subsample_seed),
        None => ds,
    };
    if ds.is_empty() {
        return Err(Error::EmptyInput(format!("{} has no records", path.display())));
    }
    Ok(ExperimentData {
        schema: schema.clone(),
        data: ds,
        parse_report: report,
    })
}

/// One cell of a results table: model variant and contamination ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Condition {
    pub with_som: bool,
    /// `None` is the uncontaminated scenario.
    pub ratio: Option<f64>,
}

impl Condition {
    pub fn algorithm(&self) -> &'static str {
        if self.with_som {
            "SOM-DAGMM"
        } else {
            "DAGMM"
        }
    }

    /// Column header in the results table.
    pub fn column(&self) -> String {
        match self.ratio {
            None => self.algorithm().to_string(),
            Some(r) => format!("{}% {}", percent(r), self.algorithm()),
        }
    }

    fn ratio_cell(&self) -> String {
        self.ratio.map_or_else(|| "0".into(), |r| r.to_string())
    }
}

fn percent(r: f64) -> String {
    let p = r * 100.0;
    let rounded = (p * 1e9).round() / 1e9;
    rounded.to_string()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub metrics: Metrics,
    /// Percentile ratio or fixed value used to threshold this run.
    pub threshold: ThresholdPolicy,
    pub train_rows: usize,
    pub train_anomalies: usize,
    pub test_rows: usize,
    pub test_anomalies: usize,
    pub final_terms: Option<ObjectiveTerms>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub condition: Condition,
    pub outcome: std::result::Result<RunResult, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    pub condition: Condition,
    pub runs: Vec<RunRecord>,
    /// Over successful runs only; `None` when every seed failed.
    pub aggregate: Option<AggregateMetrics>,
}

impl ConditionReport {
    pub fn successful(&self) -> Vec<&RunResult> {
        self.runs.iter().filter_map(|r| r.outcome.as_ref().ok()).collect()
    }

    pub fn failed(&self) -> Vec<(u64, &str)> {
        self.runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().err().map(|e| (r.seed, e.as_str())))
            .collect()
    }

    pub fn f1_values(&self) -> Vec<f64> {
        self.successful().iter().map(|r| r.metrics.f1).collect()
    }

    pub fn f1_summary(&self) -> Option<FiveNumber> {
        five_number(&self.f1_values())
    }
}

/// Training pool size large enough for every configured ratio, so all
/// ratios of one seed share the same test set.
fn pool_size(ds: &LabeledDataset, scenario: &Scenario) -> Result<usize> {
    let max_ratio = match scenario {
        Scenario::Ideal => return Ok(0),
        Scenario::Mixed(r) => r.iter().copied().fold(0.0, f64::max),
    };
    let train_inliers = (ds.len() - ds.anomaly_count()) / 2;
    contamination_count(train_inliers, max_ratio)
}

/// Runs one seed of one condition. Data errors are returned; training and
/// scoring failures are recorded in the outcome.
pub fn run_seed(data: &ExperimentData, cfg: &ExperimentConfig, condition: Condition, seed: u64) -> Result<RunRecord> {
    let ds = &data.data;
    let split = split_with_pool(ds, pool_size(ds, &cfg.scenario)?, seed)?;
    let stats = PreprocessStats::fit(&data.schema, &split.train.features)?;
    let train_set = stats.transform(&split.train.features)?;
    let test = stats.transform_dataset(&split.test)?;
    let (train_x, train_anomalies) = match condition.ratio {
        None => (train_set, 0),
        Some(r) => {
            let pool = stats.transform(&split.pool.features)?;
            let mixed = mix_contamination(&train_set, &pool, r, seed)?;
            let a = mixed.audit_anomaly_count();
            (mixed.into_features(), a)
        }
    };
    let threshold = cfg
        .threshold
        .unwrap_or_else(|| ThresholdPolicy::Percentile(test.anomaly_count() as f64 / test.len() as f64));
    let model_cfg = cfg.model(train_x.cols(), condition.with_som);
    let outcome = (|| -> Result<RunResult> {
        let model = train(&train_x, &model_cfg, &cfg.train_for(seed))?;
        let energies = model.score_batch(&test.features)?;
        let predicted = threshold_energies(&energies, threshold);
        Ok(RunResult {
            metrics: compute_metrics(&predicted, &test.anomaly)?,
            threshold,
            train_rows: train_x.rows(),
            train_anomalies,
            test_rows: test.len(),
            test_anomalies: test.anomaly_count(),
            final_terms: model.log.last().map(|l| l.terms),
        })
    })()
    .map_err(|e| e.to_string());
    Ok(RunRecord {
        seed,
        condition,
        outcome,
    })
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))
}

/// Every seed of one condition, in seed-list order.
pub fn run_condition(
    ds: &ExperimentData,
    cfg: &ExperimentConfig,
    condition: Condition,
    on_run: &(dyn Fn(&RunRecord) + Sync),
) -> Result<ConditionReport> {
    let pool = thread_pool(cfg.jobs)?;
    let runs = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| {
                let r = run_seed(ds, cfg, condition, seed)?;
                on_run(&r);
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let ok: Vec<Metrics> = runs
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|o| o.metrics))
        .collect();
    Ok(ConditionReport {
        condition,
        aggregate: aggregate(&ok),
        runs,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub schema_hash: String,
    pub dataset_rows: usize,
    pub dataset_anomalies: usize,
    /// Ratio-major, DAGMM before SOM-DAGMM within a ratio.
    pub conditions: Vec<ConditionReport>,
}

/// Runs every ratio × arm cell of the config.
pub fn run_experiment(
    data: &ExperimentData,
    cfg: &ExperimentConfig,
    on_run: &(dyn Fn(&RunRecord) + Sync),
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut conditions = Vec::new();
    for ratio in cfg.scenario.ratios() {
        for with_som in cfg.arms.flags() {
            conditions.push(run_condition(data, cfg, Condition { with_som, ratio }, on_run)?);
        }
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        schema_hash: data.schema.hash(),
        dataset_rows: data.data.len(),
        dataset_anomalies: data.data.anomaly_count(),
        conditions,
    })
}

fn cell(s: Option<crate::eval::Summary>) -> String {
    s.map_or_else(|| "NA".into(), |s| format!("{}({})", s.avg, s.stdev))
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn threshold_text(t: ThresholdPolicy) -> String {
    t.to_string()
}

impl ExperimentReport {
    /// Rows are metrics, columns are conditions, cells are `avg(stdev)`.
    pub fn table_csv(&self) -> String {
        let mut out = String::from("Metric");
        for c in &self.conditions {
            out.push(',');
            out.push_str(&c.condition.column());
        }
        out.push('\n');
        for m in Metric::ALL {
            out.push_str(m.label());
            for c in &self.conditions {
                out.push(',');
                out.push_str(&cell(c.aggregate.map(|a| a.get(m))));
            }
            out.push('\n');
        }
        out
    }

    /// One row per seed and condition.
    pub fn runs_csv(&self) -> String {
        let mut out = String::from(
            "algorithm,ratio,seed,status,accuracy,precision,recall,f1,tp,fp,tn,fn,train_rows,train_anomalies,test_rows,test_anomalies,threshold,final_objective,error\n",
        );
        for c in &self.conditions {
            for r in &c.runs {
                let _ = write!(
                    out,
                    "{},{},{},",
                    c.condition.algorithm(),
                    c.condition.ratio_cell(),
                    r.seed
                );
                match &r.outcome {
                    Ok(o) => {
                        let m = &o.metrics;
                        let k = &m.confusion;
                        let _ = writeln!(
                            out,
                            "ok,{},{},{},{},{},{},{},{},{},{},{},{},{},{},",
                            m.accuracy,
                            m.precision,
                            m.recall,
                            m.f1,
                            k.tp,
                            k.fp,
                            k.tn,
                            k.fn_,
                            o.train_rows,
                            o.train_anomalies,
                            o.test_rows,
                            o.test_anomalies,
                            threshold_text(o.threshold),
                            opt_num(o.final_terms.map(|t| t.total)),
                        );
                    }
                    Err(e) => {
                        let _ = writeln!(out, "failed,,,,,,,,,,,,,,,\"{}\"", e.replace('"', "'"));
                    }
                }
            }
        }
        out
    }

    /// One aggregate row per condition over its successful runs.
    pub fn aggregate_csv(&self) -> String {
        let mut out = String::from("algorithm,ratio,runs,failed");
        for m in ["accuracy", "precision", "recall", "f1"] {
            let _ = write!(out, ",{m}_avg,{m}_stdev");
        }
        out.push('\n');
        for c in &self.conditions {
            let _ = write!(
                out,
                "{},{},{},{}",
                c.condition.algorithm(),
                c.condition.ratio_cell(),
                c.successful().len(),
                c.failed().len()
            );
            for m in Metric::ALL {
                match c.aggregate {
                    Some(a) => {
                        let s = a.get(m);
                        let _ = write!(out, ",{},{}", s.avg, s.stdev);
                    }
                    None => out.push_str(",NA,NA"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// F1 five-number summary per condition.
    pub fn whisker_csv(&self) -> String {
        let mut out = String::from("algorithm,ratio,runs,min,q1,median,q3,max\n");
        for c in &self.conditions {
            let _ = write!(
                out,
                "{},{},{}",
                c.condition.algorithm(),
                c.condition.ratio_cell(),
                c.successful().len()
            );
            match c.f1_summary() {
                Some(f) => {
                    let _ = writeln!(out, ",{},{},{},{},{}", f.min, f.q1, f.median, f.q3, f.max);
                }
                None => out.push_str(",NA,NA,NA,NA,NA\n"),
            }
        }
        out
    }

    /// Mean and stdev of F1 against contamination ratio, one column pair per
    /// algorithm. The uncontaminated scenario is ratio 0.
    pub fn degradation_csv(&self) -> String {
        let algorithms: Vec<&str> = {
            let mut seen = Vec::new();
            for c in &self.conditions {
                let a = c.condition.algorithm();
                if !seen.contains(&a) {
                    seen.push(a);
                }
            }
            seen
        };
        let mut out = String::from("ratio");
        for a in &algorithms {
            let _ = write!(out, ",{a} f1_avg,{a} f1_stdev");
        }
        out.push('\n');
        let mut ratios: Vec<Option<f64>> = Vec::new();
        for c in &self.conditions {
            if !ratios.contains(&c.condition.ratio) {
                ratios.push(c.condition.ratio);
            }
        }
        for ratio in ratios {
            out.push_str(&ratio.map_or_else(|| "0".into(), |r| r.to_string()));
            for a in &algorithms {
                let s = self
                    .conditions
                    .iter()
                    .find(|c| c.condition.ratio == ratio && c.condition.algorithm() == *a)
                    .and_then(|c| c.aggregate)
                    .map(|g| g.f1);
                match s {
                    Some(s) => {
                        let _ = write!(out, ",{},{}", s.avg, s.stdev);
                    }
                    None => out.push_str(",NA,NA"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn summary_json(&self) -> String {
        let conditions: Vec<Value> = self
            .conditions
            .iter()
            .map(|c| {
                json!({
                    "algorithm": c.condition.algorithm(),
                    "ratio": c.condition.ratio,
                    "runs": c.successful().len(),
                    "failed": c.failed().iter().map(|(s, e)| json!({"seed": s, "error": e})).collect::<Vec<_>>(),
                    "aggregate": c.aggregate.map(|a| {
                        Metric::ALL
                            .iter()
                            .map(|&m| (m.label().to_string(), json!({"avg": a.get(m).avg, "stdev": a.get(m).stdev})))
                            .collect::<serde_json::Map<_, _>>()
                    }),
                })
            })
            .collect();
        let body = json!({
            "format": "somdagmm-report 1",
            "config_hash": self.config.hash(),
            "config": config_json(&self.config),
            "schema_hash": self.schema_hash,
            "dataset": {"rows": self.dataset_rows, "anomalies": self.dataset_anomalies},
            "decisions": decisions_json(&self.config),
            "conditions": conditions,
        });
        serde_json::to_string_pretty(&body).expect("report serializes") + "\n"
    }
}

fn config_json(cfg: &ExperimentConfig) -> Value {
    Value::Object(
        cfg.entries()
            .into_iter()
            .map(|(k, v)| (k.to_string(), Value::String(v)))
            .collect(),
    )
}

/// Choices the evaluation protocol leaves open, surfaced in every report.
fn decisions_json(cfg: &ExperimentConfig) -> Value {
    json!({
        "threshold": cfg.threshold.map_or_else(
            || "percentile at each test set's anomaly ratio".to_string(),
            |t| t.to_string(),
        ),
        "contamination_ratio": "fraction of the final training set; anomalies drawn from a pool held out of the test split",
        "split": "half of the inliers train, the other half plus all anomalies test",
        "scaling": "min-max fitted on each seed's training split, test values clipped to [0, 1]",
        "stdev": "population",
        "quartiles": "inclusive linear interpolation",
        "failed_seeds": "excluded from AVG/STDEV, listed per condition",
        "training_inliers": "label convention of the resolved schema",
        "epochs": cfg.train.epochs,
        "optimizer": cfg.train.optimizer.to_string(),
        "reconstruction_features": cfg.reconstruction.to_string(),
        "som_iterations": cfg.som.iterations.map_or_else(|| "10 x training rows, capped at 500000".to_string(), |n| n.to_string()),
    })
}

/// F1 over the SOM learning-rate × neighborhood grid, uncontaminated
/// SOM-DAGMM only.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub config: ExperimentConfig,
    pub cells: Vec<SweepCell>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub learning_rate: f64,
    pub neighborhood: Neighborhood,
    pub report: ConditionReport,
}

pub fn run_sweep(
    ds: &ExperimentData,
    cfg: &ExperimentConfig,
    on_run: &(dyn Fn(&SweepCell, &RunRecord) + Sync),
) -> Result<SweepReport> {
    cfg.validate()?;
    if cfg.sweep_learning_rates.is_empty() || cfg.sweep_neighborhoods.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let mut cells = Vec::new();
    for &lr in &cfg.sweep_learning_rates {
        for &nb in &cfg.sweep_neighborhoods {
            let mut c = cfg.clone();
            c.scenario = Scenario::Ideal;
            c.som.learning_rate = lr;
            c.som.neighborhood = nb;
            c.som.validate()?;
            let placeholder = SweepCell {
                learning_rate: lr,
                neighborhood: nb,
                report: ConditionReport {
                    condition: Condition {
                        with_som: true,
                        ratio: None,
                    },
                    runs: Vec::new(),
                    aggregate: None,
                },
            };
            let report = run_condition(ds, &c, placeholder.report.condition, &|r| on_run(&placeholder, r))?;
            cells.push(SweepCell { report, ..placeholder });
        }
    }
    Ok(SweepReport {
        config: cfg.clone(),
        cells,
    })
}

impl SweepReport {
    /// Mean F1 with learning rates as rows and neighborhoods as columns.
    pub fn grid_csv(&self) -> String {
        let nbs: Vec<Neighborhood> = self.config.sweep_neighborhoods.clone();
        let mut out = String::from("learning_rate");
        for nb in &nbs {
            let _ = write!(out, ",{nb}");
        }
        out.push('\n');
        let lrs: Vec<f64> = {
            let mut seen = Vec::new();
            for c in &self.cells {
                if !seen.contains(&c.learning_rate) {
                    seen.push(c.learning_rate);
                }
            }
            seen
        };
        for lr in lrs {
            out.push_str(&lr.to_string());
            for nb in &nbs {
                let f1 = self
                    .cells
                    .iter()
                    .find(|c| c.learning_rate == lr && c.neighborhood == *nb)
                    .and_then(|c| c.report.aggregate)
                    .map(|a| a.f1.avg);
                out.push(',');
                out.push_str(&f1.map_or_else(|| "NA".into(), |v| v.to_string()));
            }
            out.push('\n');
        }
        out
    }

    /// One row per grid cell with F1 mean, stdev and run counts.
    pub fn cells_csv(&self) -> String {
        let mut out = String::from("learning_rate,neighborhood,runs,failed,f1_avg,f1_stdev\n");
        for c in &self.cells {
            let f1 = c.report.aggregate.map(|a| a.f1);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                c.learning_rate,
                c.neighborhood,
                c.report.successful().len(),
                c.report.failed().len(),
                f1.map_or_else(|| "NA".into(), |s| s.avg.to_string()),
                f1.map_or_else(|| "NA".into(), |s| s.stdev.to_string()),
            );
        }
        out
    }

    pub fn summary_json(&self) -> String {
        let cells: Vec<Value> = self
            .cells
            .iter()
            .map(|c| {
                json!({
                    "learning_rate": c.learning_rate,
                    "neighborhood": c.neighborhood.to_string(),
                    "runs": c.report.successful().len(),
                    "failed": c.report.failed().iter().map(|(s, e)| json!({"seed": s, "error": e})).collect::<Vec<_>>(),
                    "f1": c.report.aggregate.map(|a| json!({"avg": a.f1.avg, "stdev": a.f1.stdev})),
                })
            })
            .collect();
        let body = json!({
            "format": "somdagmm-sweep 1",
            "config_hash": self.config.hash(),
            "config": config_json(&self.config),
            "decisions": decisions_json(&self.config),
            "cells": cells,
        });
        serde_json::to_string_pretty(&body).expect("report serializes") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Provenance;
    use crate::numeric::Matrix;
    use rand::{Rng, SeedableRng};

    /// Inliers near the origin, anomalies far out, in 3 continuous columns.
    fn toy(n_in: usize, n_out: usize, seed: u64) -> ExperimentData {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = n_in + n_out;
        let x = Matrix::from_fn(n, 3, |i, _| {
            let base = if i < n_in { 0.0 } else { 6.0 };
            base + rng.gen_range(-0.5..0.5)
        });
        let mut anomaly = vec![false; n_in];
        anomaly.resize(n, true);
        let schema = RecordSchema::numeric(
            &["a", "b", "c"],
            "label",
            LabelConvention::AnomalyLabels(["attack".to_string()].into()),
        );
        let ds = LabeledDataset::new(
            x,
            anomaly,
            Provenance {
                source: "toy".into(),
                schema_hash: schema.hash(),
                seed: None,
            },
        )
        .unwrap();
        ExperimentData::new(schema, ds).unwrap()
    }

    fn quick_config() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.seeds = vec![0, 1, 2];
        c.train.epochs = 2;
        c.train.batch_size = 64;
        c.train.learning_rate = 1e-3;
        c.som.grid_width = 4;
        c.som.grid_height = 4;
        c.som.initial_radius = 2.0;
        c.som.iterations = Some(500);
        c.ae_hidden = vec![4];
        c
    }

    #[test]
    fn table_shapes_mirror_ideal_and_mixed_layouts() {
        let ds = toy(300, 60, 1);
        let cfg = quick_config();
        let r = run_experiment(&ds, &cfg, &|_| {}).unwrap();
        let t = r.table_csv();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "Metric,DAGMM,SOM-DAGMM");
        assert_eq!(lines.len(), 5);
        for (line, m) in lines[1..].iter().zip(Metric::ALL) {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells[0], m.label());
            assert_eq!(cells.len(), 3);
            for c in &cells[1..] {
                assert!(c.ends_with(')') && c.contains('('), "{c}");
            }
        }

        let mut mixed = cfg.clone();
        mixed.scenario = Scenario::Mixed(vec![0.01, 0.05, 0.10]);
        let r = run_experiment(&ds, &mixed, &|_| {}).unwrap();
        assert_eq!(
            r.table_csv().lines().next().unwrap(),
            "Metric,1% DAGMM,1% SOM-DAGMM,5% DAGMM,5% SOM-DAGMM,10% DAGMM,10% SOM-DAGMM"
        );
        assert_eq!(r.degradation_csv().lines().count(), 4);
        assert_eq!(r.whisker_csv().lines().count(), 7);
    }

    #[test]
    fn aggregate_matches_hand_average_of_runs() {
        let ds = toy(300, 60, 2);
        let cfg = quick_config();
        let r = run_experiment(&ds, &cfg, &|_| {}).unwrap();
        for c in &r.conditions {
            let a = c.aggregate.unwrap();
            assert_eq!(a.runs, 3);
            for m in Metric::ALL {
                let vals: Vec<f64> = c.successful().iter().map(|o| o.metrics.get(m)).collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                assert!((a.get(m).avg - mean).abs() <= 1e-12);
            }
        }
        let runs = r.runs_csv();
        assert_eq!(runs.lines().count(), 1 + 2 * 3);
        assert_eq!(r.aggregate_csv().lines().count(), 1 + 2);
    }

    #[test]
    fn reports_are_deterministic_across_job_counts() {
        let ds = toy(200, 40, 3);
        let cfg = quick_config();
        let a = run_experiment(&ds, &cfg, &|_| {}).unwrap();
        let mut par = cfg.clone();
        par.jobs = 3;
        let b = run_experiment(&ds, &par, &|_| {}).unwrap();
        assert_eq!(a.table_csv(), b.table_csv());
        assert_eq!(a.runs_csv(), b.runs_csv());
        assert_eq!(a.whisker_csv(), b.whisker_csv());
    }

    #[test]
    fn default_threshold_is_test_anomaly_ratio() {
        let ds = toy(200, 40, 4);
        let cfg = quick_config();
        let rec = run_seed(
            &ds,
            &cfg,
            Condition {
                with_som: false,
                ratio: None,
            },
            0,
        )
        .unwrap();
        let o = rec.outcome.unwrap();
        assert_eq!(o.test_rows, 140);
        assert_eq!(o.test_anomalies, 40);
        assert_eq!(o.threshold, ThresholdPolicy::Percentile(40.0 / 140.0));
        let k = o.metrics.confusion;
        assert_eq!(k.tp + k.fp, 40);
    }

    #[test]
    fn contamination_uses_fraction_of_final_training_set() {
        let ds = toy(400, 80, 5);
        let mut cfg = quick_config();
        cfg.scenario = Scenario::Mixed(vec![0.01, 0.10]);
        let lo = run_seed(
            &ds,
            &cfg,
            Condition {
                with_som: false,
                ratio: Some(0.01),
            },
            0,
        )
        .unwrap();
        let hi = run_seed(
            &ds,
            &cfg,
            Condition {
                with_som: false,
                ratio: Some(0.10),
            },
            0,
        )
        .unwrap();
        let (lo, hi) = (lo.outcome.unwrap(), hi.outcome.unwrap());
        assert_eq!(lo.train_anomalies, 2);
        assert_eq!(hi.train_anomalies, 22);
        assert_eq!(hi.train_rows, 222);
        assert_eq!(lo.test_rows, hi.test_rows);
    }

    #[test]
    fn divergent_seed_is_recorded_not_fatal() {
        let mut cfg = quick_config();
        cfg.seeds = vec![0, 1];
        cfg.train.learning_rate = 1e300;
        cfg.train.optimizer = crate::trainer::Optimizer::Sgd;
        let r = run_condition(
            &toy(200, 40, 6),
            &cfg,
            Condition {
                with_som: false,
                ratio: None,
            },
            &|_| {},
        )
        .unwrap();
        assert_eq!(r.failed().len(), 2);
        assert!(r.aggregate.is_none());
        assert!(r.failed()[0].1.contains("diverged"));
        let rep = ExperimentReport {
            config: cfg.clone(),
            schema_hash: String::new(),
            dataset_rows: 240,
            dataset_anomalies: 40,
            conditions: vec![r],
        };
        assert!(rep.table_csv().contains("NA"));
        assert!(rep.runs_csv().contains("failed"));
    }

    #[test]
    fn summary_embeds_full_config_and_hash() {
        let ds = toy(200, 40, 7);
        let cfg = quick_config();
        let r = run_experiment(&ds, &cfg, &|_| {}).unwrap();
        let v: Value = serde_json::from_str(&r.summary_json()).unwrap();
        assert_eq!(v["config_hash"], cfg.hash());
        let obj = v["config"].as_object().unwrap();
        assert_eq!(obj.len(), ExperimentConfig::KEYS.len());
        let text: String = ExperimentConfig::KEYS
            .iter()
            .map(|k| format!("{k} = {}\n", obj[*k].as_str().unwrap()))
            .collect();
        assert_eq!(ExperimentConfig::from_text(&text).unwrap(), cfg);
        assert!(v["decisions"]["threshold"].is_string());
    }

    #[test]
    fn sweep_grid_shape() {
        let ds = toy(200, 40, 8);
        let mut cfg = quick_config();
        cfg.seeds = vec![0];
        cfg.sweep_learning_rates = vec![0.3, 0.6];
        let s = run_sweep(&ds, &cfg, &|_, _| {}).unwrap();
        let g = s.grid_csv();
        let lines: Vec<&str> = g.lines().collect();
        assert_eq!(lines[0], "learning_rate,bubble,gaussian");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0.3,"));
        assert_eq!(s.cells_csv().lines().count(), 5);
    }

    #[test]
    fn column_labels() {
        let c = Condition {
            with_som: true,
            ratio: Some(0.07),
        };
        assert_eq!(c.column(), "7% SOM-DAGMM");
        assert_eq!(
            Condition {
                with_som: false,
                ratio: None
            }
            .column(),
            "DAGMM"
        );
    }
}
