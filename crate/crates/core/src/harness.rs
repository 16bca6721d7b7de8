//! Replicated benchmark runs: seeded replicates per method, median
//! best-so-far curves with bootstrap confidence intervals, and the CSV/JSON
//! artifacts.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::global::DEFAULT_WINDOW;
use crate::hybrid::{
    run_baseline_uniform, run_hybrid, HybridConfig, Mode, RunTrace, TraceRecord,
    DEFAULT_SWITCH_AFTER,
};
use crate::local::LrSpec;
use crate::objective::{sample_uniform_position, Benchmark, BenchmarkFunction};
use crate::proposal::{ProposalDomain, DEFAULT_PHI_CAP};
use crate::rng_from_seed;
use crate::scalar::Scalar;
use crate::stats::{BootstrapPlan, DEFAULT_RESAMPLES};

pub use crate::stats::median_ci;

pub const DEFAULT_REPLICATES: usize = 20;
pub const DEFAULT_CONFIDENCE: f64 = 0.95;
pub const DEFAULT_GRID_STRIDE: usize = 100;

pub const TRACE_HEADER: [&str; 9] = [
    "eval_index",
    "mode",
    "dimension",
    "loss",
    "best_so_far",
    "window_best",
    "phi",
    "accepted",
    "lr",
];
pub const AGGREGATE_HEADER: [&str; 5] = ["method", "eval_index", "median", "ci_lo", "ci_hi"];

/// Unit of the `eval_index` axis in every artifact.
pub const X_AXIS: &str = "evaluations";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Dscd,
    Uniform,
}

impl OptimizerKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "adam" => Ok(Self::Adam),
            "dscd" => Ok(Self::Dscd),
            "uniform" => Ok(Self::Uniform),
            _ => Err(Error::Unknown {
                kind: "optimizer",
                name: name.to_string(),
            }),
        }
    }
}

/// One competitor in a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    /// `adam`, `dscd` or `uniform`.
    pub optimizer: String,
    /// Learning rate or `linear:A:B`; required for `adam`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr: Option<LrSpec<f64>>,
    /// Alternate Adam with DSCD steps.
    #[serde(default)]
    pub with_dscd: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl MethodSpec {
    pub fn adam(lr: LrSpec<f64>, with_dscd: bool) -> Self {
        Self {
            optimizer: "adam".into(),
            lr: Some(lr),
            with_dscd,
            label: None,
        }
    }

    pub fn dscd() -> Self {
        Self {
            optimizer: "dscd".into(),
            lr: None,
            with_dscd: false,
            label: None,
        }
    }

    pub fn uniform() -> Self {
        Self {
            optimizer: "uniform".into(),
            ..Self::dscd()
        }
    }

    /// `adam-0.01`, `adam-linear:0.1:0.001+dscd`, `dscd`, `uniform`, unless
    /// an explicit label is set.
    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        match (&self.lr, self.with_dscd) {
            (Some(lr), true) => format!("{}-{lr}+dscd", self.optimizer),
            (Some(lr), false) => format!("{}-{lr}", self.optimizer),
            (None, _) => self.optimizer.clone(),
        }
    }

    fn resolve(&self) -> Result<OptimizerKind> {
        let kind = OptimizerKind::parse(&self.optimizer)?;
        match kind {
            OptimizerKind::Adam if self.lr.is_none() => Err(invalid(format!(
                "method `{}` needs a learning rate",
                self.label()
            ))),
            OptimizerKind::Dscd | OptimizerKind::Uniform if self.with_dscd => Err(invalid(
                format!("with_dscd only applies to adam, not `{}`", self.optimizer),
            )),
            _ => Ok(kind),
        }
    }
}

fn default_replicates() -> usize {
    DEFAULT_REPLICATES
}
fn default_k() -> usize {
    DEFAULT_WINDOW
}
fn default_t() -> Option<usize> {
    Some(DEFAULT_SWITCH_AFTER)
}
fn default_phi_cap() -> f64 {
    DEFAULT_PHI_CAP
}
fn default_initial_mode() -> Mode {
    Mode::Local
}
fn default_resamples() -> usize {
    DEFAULT_RESAMPLES
}
fn default_confidence() -> f64 {
    DEFAULT_CONFIDENCE
}
fn default_grid_stride() -> usize {
    DEFAULT_GRID_STRIDE
}

/// Method label and optimizer, as resolved by [`BenchConfig::validate`].
pub type ResolvedMethod = (String, OptimizerKind);

/// A replicated study. Replicate `r` of every method is seeded with
/// `base_seed + r` and starts from the same uniform initial position, so
/// runs are paired across methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub objective: String,
    pub dim: usize,
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Objective evaluations per run, the initial one included.
    pub budget: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Loss window length.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Alternation threshold; `null` never switches.
    #[serde(default = "default_t")]
    pub t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_phi_cap")]
    pub phi_cap: f64,
    /// Starting mode of the Adam+DSCD methods.
    #[serde(default = "default_initial_mode")]
    pub initial_mode: Mode,
    #[serde(default)]
    pub reset_moments_on_switch: bool,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    /// Spacing of the aggregation grid; the final evaluation is always included.
    #[serde(default = "default_grid_stride")]
    pub grid_stride: usize,
}

impl BenchConfig {
    pub fn new(
        function: BenchmarkFunction,
        dim: usize,
        budget: usize,
        methods: Vec<MethodSpec>,
    ) -> Self {
        Self {
            objective: function.name().to_string(),
            dim,
            methods,
            replicates: DEFAULT_REPLICATES,
            budget,
            base_seed: 0,
            k: DEFAULT_WINDOW,
            t: Some(DEFAULT_SWITCH_AFTER),
            output_dir: None,
            phi_cap: DEFAULT_PHI_CAP,
            initial_mode: Mode::Local,
            reset_moments_on_switch: false,
            bootstrap_resamples: DEFAULT_RESAMPLES,
            confidence: DEFAULT_CONFIDENCE,
            grid_stride: DEFAULT_GRID_STRIDE,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        read_json(path)
    }

    /// Resolves every name and checks every numeric setting.
    pub fn validate(&self) -> Result<(Benchmark<f64>, Vec<ResolvedMethod>)> {
        let function: BenchmarkFunction = self.objective.parse()?;
        let bench = Benchmark::new(function, self.dim)?.with_budget(self.budget)?;
        if self.methods.is_empty() {
            return Err(invalid("at least one method is required"));
        }
        if self.replicates == 0 {
            return Err(invalid("replicates must be at least 1"));
        }
        if self.grid_stride == 0 {
            return Err(invalid("grid_stride must be at least 1"));
        }
        if self.bootstrap_resamples == 0 {
            return Err(invalid("bootstrap_resamples must be at least 1"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(invalid("confidence must lie in (0, 1)"));
        }
        let mut methods = Vec::with_capacity(self.methods.len());
        for m in &self.methods {
            let kind = m.resolve()?;
            let label = m.label();
            if methods.iter().any(|(l, _)| *l == label) {
                return Err(invalid(format!("duplicate method `{label}`")));
            }
            methods.push((label, kind));
        }
        for m in &self.methods {
            self.hybrid_config(m)?.validate()?;
        }
        Ok((bench, methods))
    }

    fn hybrid_config(&self, method: &MethodSpec) -> Result<HybridConfig<f64>> {
        let mut cfg = match (OptimizerKind::parse(&method.optimizer)?, method.lr) {
            (OptimizerKind::Adam, Some(lr)) if method.with_dscd => {
                let mut c = HybridConfig::new(self.budget, lr);
                c.switch_after = self.t;
                c.initial_mode = self.initial_mode;
                c.reset_moments_on_switch = self.reset_moments_on_switch;
                c
            }
            (OptimizerKind::Adam, Some(lr)) => HybridConfig::pure_local(self.budget, lr),
            _ => HybridConfig::pure_global(self.budget),
        };
        cfg.window = self.k;
        cfg.phi_cap = self.phi_cap;
        Ok(cfg)
    }

    /// Evaluation indices at which replicates are aggregated.
    pub fn grid(&self) -> Vec<usize> {
        let last = self.budget.saturating_sub(1);
        let mut g: Vec<usize> = (0..=last).step_by(self.grid_stride.max(1)).collect();
        if g.last() != Some(&last) {
            g.push(last);
        }
        g
    }
}

/// One completed replicate run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateTrace {
    pub method: String,
    pub replicate: usize,
    pub seed: u64,
    pub trace: RunTrace<f64>,
}

/// Runs every method × replicate to the full budget.
///
/// Output is ordered by method (config order), then replicate index;
/// replicates execute in parallel without affecting the result.
pub fn run_replicates(config: &BenchConfig) -> Result<Vec<ReplicateTrace>> {
    let (bench, methods) = config.validate()?;
    let domain = ProposalDomain::from_spec(bench.spec());
    let jobs: Vec<(usize, usize)> = (0..methods.len())
        .flat_map(|m| (0..config.replicates).map(move |r| (m, r)))
        .collect();
    jobs.into_par_iter()
        .map(|(m, r)| {
            let (label, kind) = &methods[m];
            let seed = config.base_seed.wrapping_add(r as u64);
            let mut rng = rng_from_seed(seed);
            let x0 = sample_uniform_position(bench.spec(), &mut rng);
            let trace = match kind {
                OptimizerKind::Uniform => {
                    run_baseline_uniform(&bench, bench.spec(), config.budget, &mut rng)?
                }
                _ => {
                    let cfg = config.hybrid_config(&config.methods[m])?;
                    run_hybrid(&bench, x0, &domain, cfg, &mut rng)?
                }
            };
            Ok(ReplicateTrace {
                method: label.clone(),
                replicate: r,
                seed,
                trace,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: String,
    pub eval_index: usize,
    pub median: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Median best-so-far curves with confidence bands, method by method.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub rows: Vec<AggregateRow>,
}

impl AggregateResult {
    pub fn method(&self, label: &str) -> impl Iterator<Item = &AggregateRow> + '_ {
        let label = label.to_string();
        self.rows.iter().filter(move |r| r.method == label)
    }

    pub fn final_row(&self, label: &str) -> Option<&AggregateRow> {
        self.method(label).last()
    }
}

/// Final best-so-far of each replicate of `method`, by replicate index.
pub fn final_bests(traces: &[ReplicateTrace], method: &str) -> Vec<f64> {
    let mut v: Vec<(usize, f64)> = traces
        .iter()
        .filter(|t| t.method == method)
        .filter_map(|t| t.trace.final_best().map(|b| (t.replicate, b)))
        .collect();
    v.sort_by_key(|&(r, _)| r);
    v.into_iter().map(|(_, b)| b).collect()
}

/// Aggregates replicate traces on the grid of `config`.
///
/// Methods appear in config order. Values are sorted before the bootstrap,
/// so the result does not depend on the order in which traces are supplied.
pub fn aggregate(config: &BenchConfig, traces: &[ReplicateTrace]) -> Result<AggregateResult> {
    let grid = config.grid();
    let mut by_method: BTreeMap<&str, Vec<&ReplicateTrace>> = BTreeMap::new();
    for t in traces {
        by_method.entry(t.method.as_str()).or_default().push(t);
    }
    let mut rows = Vec::new();
    for spec in &config.methods {
        let label = spec.label();
        let Some(runs) = by_method.get(label.as_str()) else {
            continue;
        };
        let plan = BootstrapPlan::new(runs.len(), config.bootstrap_resamples, config.base_seed)?;
        let curves: Vec<Vec<f64>> = runs
            .iter()
            .map(|r| r.trace.best_so_far().collect())
            .collect();
        for &e in &grid {
            let values = curves
                .iter()
                .map(|c| {
                    c.get(e).copied().ok_or(Error::StepOutOfRange {
                        step: e,
                        total: c.len(),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            let (median, ci_lo, ci_hi) = plan.median_ci(&values, config.confidence)?;
            rows.push(AggregateRow {
                method: label.clone(),
                eval_index: e,
                median,
                ci_lo,
                ci_hi,
            });
        }
    }
    Ok(AggregateResult { rows })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes trace records in the fixed column order. Floats use the shortest
/// representation that parses back to the same value.
pub fn emit_trace_csv<S: Scalar>(records: &[TraceRecord<S>], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = csv_err(path);
    w.write_record(TRACE_HEADER).map_err(&err)?;
    for r in records {
        w.write_record([
            r.eval_index.to_string(),
            r.mode.as_str().to_string(),
            opt(r.dimension),
            r.loss.to_string(),
            r.best_so_far.to_string(),
            opt(r.window_best),
            r.phi.to_string(),
            r.accepted.to_string(),
            opt(r.lr),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_field<T: std::str::FromStr>(path: &Path, field: &str, name: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| invalid(format!("{}: bad {name} `{field}`", path.display())))
}

fn parse_opt<T: std::str::FromStr>(path: &Path, field: &str, name: &str) -> Result<Option<T>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_field(path, field, name).map(Some)
    }
}

fn parse_mode(path: &Path, s: &str) -> Result<Mode> {
    match s {
        "init" => Ok(Mode::Init),
        "local" => Ok(Mode::Local),
        "global" => Ok(Mode::Global),
        "uniform" => Ok(Mode::Uniform),
        _ => Err(invalid(format!("{}: bad mode `{s}`", path.display()))),
    }
}

fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let got = r.headers().map_err(csv_err(path))?;
    if got.iter().ne(header.iter().copied()) {
        return Err(invalid(format!("{}: unexpected header", path.display())));
    }
    r.records()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err(path))
}

pub fn parse_trace_csv(path: &Path) -> Result<Vec<TraceRecord<f64>>> {
    read_csv(path, &TRACE_HEADER)?
        .iter()
        .map(|rec| {
            Ok(TraceRecord {
                eval_index: parse_field(path, &rec[0], "eval_index")?,
                mode: parse_mode(path, &rec[1])?,
                dimension: parse_opt(path, &rec[2], "dimension")?,
                loss: parse_field(path, &rec[3], "loss")?,
                best_so_far: parse_field(path, &rec[4], "best_so_far")?,
                window_best: parse_opt(path, &rec[5], "window_best")?,
                phi: parse_field(path, &rec[6], "phi")?,
                accepted: parse_field(path, &rec[7], "accepted")?,
                lr: parse_opt(path, &rec[8], "lr")?,
            })
        })
        .collect()
}

pub fn emit_aggregate_csv(agg: &AggregateResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = csv_err(path);
    w.write_record(AGGREGATE_HEADER).map_err(&err)?;
    for r in &agg.rows {
        w.write_record([
            r.method.clone(),
            r.eval_index.to_string(),
            r.median.to_string(),
            r.ci_lo.to_string(),
            r.ci_hi.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_aggregate_csv(path: &Path) -> Result<AggregateResult> {
    let rows = read_csv(path, &AGGREGATE_HEADER)?
        .iter()
        .map(|rec| {
            Ok(AggregateRow {
                method: rec[0].to_string(),
                eval_index: parse_field(path, &rec[1], "eval_index")?,
                median: parse_field(path, &rec[2], "median")?,
                ci_lo: parse_field(path, &rec[3], "ci_lo")?,
                ci_hi: parse_field(path, &rec[4], "ci_hi")?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(AggregateResult { rows })
}

/// JSON summary: the config echo, the axis unit, and the aggregate rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub config: BenchConfig,
    pub x_axis: String,
    pub aggregate: AggregateResult,
}

pub fn emit_json(agg: &AggregateResult, config: &BenchConfig, path: &Path) -> Result<()> {
    let summary = BenchSummary {
        config: config.clone(),
        x_axis: X_AXIS.to_string(),
        aggregate: agg.clone(),
    };
    write_json(&summary, path)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

pub fn parse_json(path: &Path) -> Result<BenchSummary> {
    read_json(path)
}

/// Reads a JSON document, reporting failures against `path`.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Full study: runs, aggregates, and writes `aggregate.csv` and
/// `summary.json` under `out_dir`.
pub fn run_bench(config: &BenchConfig, out_dir: &Path) -> Result<AggregateResult> {
    let traces = run_replicates(config)?;
    let agg = aggregate(config, &traces)?;
    emit_aggregate_csv(&agg, &out_dir.join(AGGREGATE_FILE))?;
    emit_json(&agg, config, &out_dir.join(SUMMARY_FILE))?;
    Ok(agg)
}
