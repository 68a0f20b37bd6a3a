//! Repeated stratified resampling benchmark over LP, full-rank LDA and KNN.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{knn_fit, KnnK};
use crate::dataset::{load_csv, preprocess, stratified_resample, LabeledDataset, ResamplePlan, Split};
use crate::ensemble::{LpModel, LpOptions, Scheme};
use crate::error::{Error, Result};
use crate::lda::full_rank_lda;
use crate::localproj::CoreMode;
use crate::tuning::{tune_k, TuneOptions};
use crate::viz::{DumpRow, PosteriorDump, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lp,
    Lda,
    Knn,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Lp => "lp",
            Method::Lda => "lda",
            Method::Knn => "knn",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "lp" => Ok(Method::Lp),
            "lda" => Ok(Method::Lda),
            "knn" => Ok(Method::Knn),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpSettings {
    /// Fixed core size; tuned on the training data when absent.
    pub k: Option<usize>,
    pub mode: CoreMode,
    pub scheme: Scheme,
    pub exclude_core_in_weights: bool,
}

impl Default for LpSettings {
    fn default() -> Self {
        Self {
            k: None,
            mode: CoreMode::Strict,
            scheme: Scheme::Weighted,
            exclude_core_in_weights: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnSettings {
    /// Fixed neighbour count; leave-one-out when absent.
    pub k: Option<usize>,
}

/// An experiment manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub dataset: PathBuf,
    pub label_column: String,
    pub plan: ResamplePlan,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub lp: LpSettings,
    #[serde(default)]
    pub knn: KnnSettings,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Write the LP posteriors of every repetition.
    #[serde(default)]
    pub dump_posteriors: bool,
    /// Drop duplicate rows before resampling.
    #[serde(default = "yes")]
    pub deduplicate: bool,
}

fn yes() -> bool {
    true
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = Self::from_toml(&text)?;
        // relative dataset paths are resolved against the manifest
        if spec.dataset.is_relative() {
            if let Some(dir) = path.parent() {
                spec.dataset = dir.join(&spec.dataset);
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.plan.validate()?;
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub repetition: usize,
    pub method: Method,
    /// Test misclassification rate; `None` when the method failed.
    pub error_rate: Option<f64>,
    pub params: String,
    pub message: String,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// `repetition,method,status,error_rate,params,message`.
    ///
    /// Wall times are kept out of this file so that it is reproducible byte
    /// for byte; see [`ResultTable::write_timings_csv`].
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["repetition", "method", "status", "error_rate", "params", "message"])?;
        for r in &self.rows {
            let (status, rate) = match r.error_rate {
                Some(e) => ("ok", e.to_string()),
                None => ("failed", String::new()),
            };
            w.write_record([
                r.repetition.to_string(),
                r.method.to_string(),
                status.to_string(),
                rate,
                r.params.clone(),
                r.message.clone(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<results>", e))?;
        Ok(())
    }

    pub fn write_timings_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["repetition", "method", "wall_time_s"])?;
        for r in &self.rows {
            w.write_record([r.repetition.to_string(), r.method.to_string(), format!("{:.6}", r.wall_time)])?;
        }
        w.flush().map_err(|e| Error::io("<timings>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub median: f64,
    /// Median absolute deviation from the median (unscaled).
    pub mad: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn methods_in_order(table: &ResultTable) -> Vec<Method> {
    let mut methods: Vec<Method> = Vec::new();
    for r in &table.rows {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    methods
}

fn summarize_method(table: &ResultTable, m: Method) -> Result<MethodSummary> {
    let rates: Vec<f64> = table.rows.iter().filter(|r| r.method == m).filter_map(|r| r.error_rate).collect();
    let n_failed = table.rows.iter().filter(|r| r.method == m && r.error_rate.is_none()).count();
    if rates.is_empty() {
        return Err(Error::AllFailed(m.to_string()));
    }
    let med = median(&rates);
    let dev: Vec<f64> = rates.iter().map(|r| (r - med).abs()).collect();
    Ok(MethodSummary {
        method: m,
        median: med,
        mad: median(&dev),
        n_ok: rates.len(),
        n_failed,
    })
}

/// Median and MAD per method, in method order of first appearance. Failed
/// rows are left out and counted; a method with no successful row is an
/// error.
pub fn summarize(table: &ResultTable) -> Result<Vec<MethodSummary>> {
    let methods = methods_in_order(table);
    if methods.is_empty() {
        return Err(Error::Config("empty result table".into()));
    }
    methods.into_iter().map(|m| summarize_method(table, m)).collect()
}

/// Like [`summarize`], but a method that failed everywhere gets NaN
/// statistics instead of aborting the report.
pub fn summarize_lenient(table: &ResultTable) -> Vec<MethodSummary> {
    methods_in_order(table)
        .into_iter()
        .map(|m| {
            summarize_method(table, m).unwrap_or_else(|_| MethodSummary {
                method: m,
                median: f64::NAN,
                mad: f64::NAN,
                n_ok: 0,
                n_failed: table.rows.iter().filter(|r| r.method == m).count(),
            })
        })
        .collect()
}

fn na(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        v.to_string()
    }
}

pub fn write_summary_csv<W: Write>(summary: &[MethodSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "median_error", "mad", "n_ok", "n_failed"])?;
    for s in summary {
        w.write_record([
            s.method.to_string(),
            na(s.median),
            na(s.mad),
            s.n_ok.to_string(),
            s.n_failed.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<summary>", e))?;
    Ok(())
}

/// Training-set sizes per class for the six imbalance scenarios, three classes.
pub fn imbalance_scenarios() -> [[usize; 3]; 6] {
    let first = [25, 50, 75, 100, 125, 150];
    std::array::from_fn(|s| [first[s], 75, 175 - first[s]])
}

/// Resample plans for the imbalance scenarios.
pub fn imbalance_plans(repetitions: usize, seed: u64) -> Vec<ResamplePlan> {
    imbalance_scenarios()
        .iter()
        .map(|c| ResamplePlan::counts(c.to_vec(), repetitions, seed))
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub table: ResultTable,
    pub summary: Vec<MethodSummary>,
    /// LP posteriors per repetition, when requested.
    pub dumps: Vec<(usize, PosteriorDump)>,
    pub splits: Vec<Split>,
    pub classes: Vec<String>,
}

struct MethodOutcome {
    rate: f64,
    params: String,
    dump: Option<PosteriorDump>,
}

fn misclassification(pred: &[usize], truth: &[usize]) -> f64 {
    let wrong = pred.iter().zip(truth).filter(|(a, b)| a != b).count();
    wrong as f64 / truth.len() as f64
}

fn run_lp(split: &Split, spec: &ExperimentSpec) -> Result<MethodOutcome> {
    let opts = LpOptions {
        mode: spec.lp.mode,
        exclude_core_in_weights: spec.lp.exclude_core_in_weights,
    };
    let model = match spec.lp.k {
        Some(k) => LpModel::fit(&split.train, k, opts)?,
        None => {
            let tune = TuneOptions {
                lp: opts,
                scheme: spec.lp.scheme,
                ..Default::default()
            };
            tune_k(&split.train, tune)?.0
        }
    };
    let scheme = spec.lp.scheme;
    let test = model.classify_rows(split.test.features(), scheme)?;
    let pred: Vec<usize> = test.iter().map(|c| c.class).collect();
    let rate = misclassification(&pred, split.test.labels());
    let dump = if spec.dump_posteriors {
        let train = model.classify_rows(split.train.features(), scheme)?;
        let mut rows: Vec<DumpRow> = split
            .train_indices
            .iter()
            .zip(&train)
            .zip(split.train.labels())
            .map(|((&i, c), &y)| DumpRow {
                row_index: i,
                true_class: y,
                posterior: c.posterior.as_slice().to_vec(),
                role: Role::Train,
            })
            .chain(split.test_indices.iter().zip(&test).zip(split.test.labels()).map(|((&i, c), &y)| DumpRow {
                row_index: i,
                true_class: y,
                posterior: c.posterior.as_slice().to_vec(),
                role: Role::Test,
            }))
            .collect();
        rows.sort_by_key(|r| r.row_index);
        Some(PosteriorDump {
            n_classes: model.n_classes(),
            rows,
        })
    } else {
        None
    };
    Ok(MethodOutcome {
        rate,
        params: format!("k={}", model.k),
        dump,
    })
}

fn run_lda(split: &Split) -> Result<MethodOutcome> {
    let model = full_rank_lda(&split.train)?;
    let x = split.test.features();
    let pred: Vec<usize> = (0..x.nrows())
        .map(|i| model.classify(x.row(i).transpose().as_slice()))
        .collect();
    Ok(MethodOutcome {
        rate: misclassification(&pred, split.test.labels()),
        params: format!("rank={}", model.rank()),
        dump: None,
    })
}

fn run_knn(split: &Split, spec: &ExperimentSpec) -> Result<MethodOutcome> {
    let k = spec.knn.k.map_or(KnnK::LeaveOneOut, KnnK::Fixed);
    let seed = spec.plan.seed.wrapping_add(split.repetition as u64);
    let model = knn_fit(&split.train, k, seed)?;
    let pred = model.predict_rows(split.test.features());
    Ok(MethodOutcome {
        rate: misclassification(&pred, split.test.labels()),
        params: format!("k={}", model.k_nn),
        dump: None,
    })
}

type RepetitionOutcome = (Vec<ResultRow>, Option<PosteriorDump>, Split);

fn run_repetition(ds: &LabeledDataset, spec: &ExperimentSpec, rep: usize) -> Result<RepetitionOutcome> {
    let split = stratified_resample(ds, &spec.plan, rep)?;
    let mut rows = Vec::with_capacity(spec.methods.len());
    let mut dump = None;
    for &method in &spec.methods {
        let start = Instant::now();
        let outcome = match method {
            Method::Lp => run_lp(&split, spec),
            Method::Lda => run_lda(&split),
            Method::Knn => run_knn(&split, spec),
        };
        let wall_time = start.elapsed().as_secs_f64();
        rows.push(match outcome {
            Ok(o) => {
                if o.dump.is_some() {
                    dump = o.dump;
                }
                ResultRow {
                    repetition: rep,
                    method,
                    error_rate: Some(o.rate),
                    params: o.params,
                    message: String::new(),
                    wall_time,
                }
            }
            Err(e) => ResultRow {
                repetition: rep,
                method,
                error_rate: None,
                params: String::new(),
                message: e.to_string(),
                wall_time,
            },
        });
    }
    Ok((rows, dump, split))
}

/// Runs the experiment on an in-memory dataset. Repetitions run in
/// parallel; rows are merged in repetition order.
pub fn run_on_dataset(ds: &LabeledDataset, spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let ds = if spec.deduplicate { preprocess(ds)?.0 } else { ds.clone() };
    spec.plan.train_counts(&ds)?;
    let outcomes: Vec<Result<RepetitionOutcome>> = (1..=spec.plan.repetitions)
        .into_par_iter()
        .map(|rep| run_repetition(&ds, spec, rep))
        .collect();
    let mut table = ResultTable::default();
    let mut dumps = Vec::new();
    let mut splits = Vec::new();
    for (rep, outcome) in (1..=spec.plan.repetitions).zip(outcomes) {
        let (rows, dump, split) = outcome?;
        table.rows.extend(rows);
        if let Some(d) = dump {
            dumps.push((rep, d));
        }
        splits.push(split);
    }
    let summary = summarize_lenient(&table);
    Ok(ExperimentOutput {
        table,
        summary,
        dumps,
        splits,
        classes: ds.classes().to_vec(),
    })
}

/// Loads the dataset named in `spec`, runs it, and writes the outputs when
/// `spec.output_dir` is set.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let ds = load_csv(&spec.dataset, &spec.label_column)?;
    let out = run_on_dataset(&ds, spec)?;
    if let Some(dir) = &spec.output_dir {
        write_outputs(&out, dir)?;
    }
    Ok(out)
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes `results.csv`, `summary.csv`, `timings.csv`, `splits.csv`,
/// `classes.csv` and one `posteriors_rep<r>.csv` per dumped repetition.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    out.table.write_csv(create(&dir.join("results.csv"))?)?;
    out.table.write_timings_csv(create(&dir.join("timings.csv"))?)?;
    write_summary_csv(&out.summary, create(&dir.join("summary.csv"))?)?;
    crate::dataset::write_split_manifest(create(&dir.join("splits.csv"))?, &out.splits)?;
    let mut w = csv::Writer::from_writer(create(&dir.join("classes.csv"))?);
    w.write_record(["code", "label"])?;
    for (g, name) in out.classes.iter().enumerate() {
        w.write_record([(g + 1).to_string(), name.clone()])?;
    }
    w.flush().map_err(|e| Error::io(dir, e))?;
    for (rep, dump) in &out.dumps {
        dump.write_csv(create(&dir.join(format!("posteriors_rep{rep}.csv")))?)?;
    }
    Ok(())
}
