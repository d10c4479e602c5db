//! Benchmark harness: runs decoders over cases, computes MAT and timing,
//! and drives the ablations and tree sweeps.
//!
//! Step counts, MAT and output hashes are deterministic for fixed seeds.
//! Everything under a `timing` key depends on the machine and is excluded
//! from determinism checks (see [`DecodeReport::strip_timing`]).

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{DecodeConfig, InitStrategy, UpdateScope, UpdateStrategy};
use crate::corpus::BenchCase;
use crate::decoder::{ar_decode, pld_decode, DecodeResult, PhaseTimes, TokenRecycler};
use crate::error::{Error, Result};
use crate::matrix::RecycleMatrix;
use crate::model::LanguageModel;
use crate::tree::TreeSpec;
use crate::vocab::TokenId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ar,
    Tr,
    Pld,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ar => "ar",
            Method::Tr => "tr",
            Method::Pld => "pld",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ar" => Ok(Method::Ar),
            "tr" => Ok(Method::Tr),
            "pld" => Ok(Method::Pld),
            other => Err(Error::Config(format!(
                "unknown method {other:?} (expected ar, tr or pld)"
            ))),
        }
    }
}

/// Where each case's Token Recycling matrix comes from.
#[derive(Clone, Debug, Default)]
pub enum MatrixSource {
    /// Built from `DecodeConfig::init` for every case.
    #[default]
    PerCase,
    /// Built once from `DecodeConfig::init` and carried across cases.
    Carry,
    /// A copy of this matrix for every case.
    Fixed(RecycleMatrix),
}

/// Machine-dependent measurements.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Timing {
    pub wall_time_s: f64,
    pub tokens_per_second: f64,
    /// AR wall time over this method's wall time on the same cases.
    pub speedup: Option<f64>,
    pub phases: PhaseTimes,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub generated_tokens: usize,
    pub steps: usize,
    /// Accepted tokens per step.
    pub mat: f64,
    /// AR steps over this method's steps.
    pub step_ratio: Option<f64>,
    pub timing: Timing,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

/// MAT, step ratio and timing of `result` against the AR run on the same
/// case. Both runs must have produced the same number of tokens.
pub fn compute_metrics(result: &DecodeResult, ar_reference: &DecodeResult) -> Result<Metrics> {
    if result.tokens.len() != ar_reference.tokens.len() {
        return Err(Error::invalid(format!(
            "result has {} tokens but the AR reference has {}; not the same case",
            result.tokens.len(),
            ar_reference.tokens.len()
        )));
    }
    Ok(metrics_of(result, Some(ar_reference)))
}

fn metrics_of(result: &DecodeResult, ar: Option<&DecodeResult>) -> Metrics {
    let tokens = result.tokens.len();
    Metrics {
        generated_tokens: tokens,
        steps: result.steps,
        mat: result.mean_accepted(),
        step_ratio: ar.and_then(|a| ratio(a.steps as f64, result.steps as f64)),
        timing: Timing {
            wall_time_s: result.wall_time,
            tokens_per_second: ratio(tokens as f64, result.wall_time).unwrap_or(0.0),
            speedup: ar.and_then(|a| ratio(a.wall_time, result.wall_time)),
            phases: result.phases,
        },
    }
}

pub fn output_hash(tokens: &[TokenId]) -> String {
    let mut h = Sha256::new();
    for t in tokens {
        h.update(t.0.to_le_bytes());
    }
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseReport {
    pub name: String,
    pub category: String,
    pub output_hash: String,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub generated_tokens: usize,
    pub steps: usize,
    /// Total accepted tokens over total steps.
    pub mat: f64,
    /// Unweighted mean of the per-case MATs.
    pub mean_case_mat: f64,
    pub step_ratio: Option<f64>,
    pub timing: Timing,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodReport {
    pub method: Method,
    pub aggregate: Aggregate,
    pub cases: Vec<CaseReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub k: usize,
    pub tree_nodes: usize,
    pub tree_depth: usize,
    pub temperature: f64,
    pub seed: u64,
    pub init: String,
    pub update_strategy: String,
    pub update_scope: String,
    pub matrix_source: String,
}

impl ConfigEcho {
    fn new(config: &DecodeConfig, source: &MatrixSource) -> Self {
        Self {
            k: config.k,
            tree_nodes: config.tree.len(),
            tree_depth: config.tree.depth(),
            temperature: config.temperature,
            seed: config.rng_seed,
            init: config.init.to_string(),
            update_strategy: config.update_strategy.to_string(),
            update_scope: config.update_scope.to_string(),
            matrix_source: match source {
                MatrixSource::PerCase => "per-case".into(),
                MatrixSource::Carry => "carry".into(),
                MatrixSource::Fixed(_) => "fixed".into(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecodeReport {
    pub config: ConfigEcho,
    /// True when every method produced identical tokens on every case.
    pub outputs_identical: bool,
    pub methods: Vec<MethodReport>,
    pub annotations: Vec<String>,
}

impl DecodeReport {
    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }

    /// Zeroes every machine-dependent field.
    pub fn strip_timing(&mut self) {
        for m in &mut self.methods {
            m.aggregate.timing = Timing::default();
            for c in &mut m.cases {
                c.metrics.timing = Timing::default();
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::invalid(e.to_string()))
    }

    /// One row per (method, case).
    pub fn to_csv(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Row<'a> {
            method: Method,
            case: &'a str,
            category: &'a str,
            generated_tokens: usize,
            steps: usize,
            mat: f64,
            step_ratio: Option<f64>,
            output_hash: &'a str,
            wall_time_s: f64,
            tokens_per_second: f64,
            speedup: Option<f64>,
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for m in &self.methods {
            for c in &m.cases {
                w.serialize(Row {
                    method: m.method,
                    case: &c.name,
                    category: &c.category,
                    generated_tokens: c.metrics.generated_tokens,
                    steps: c.metrics.steps,
                    mat: c.metrics.mat,
                    step_ratio: c.metrics.step_ratio,
                    output_hash: &c.output_hash,
                    wall_time_s: c.metrics.timing.wall_time_s,
                    tokens_per_second: c.metrics.timing.tokens_per_second,
                    speedup: c.metrics.timing.speedup,
                })
                .map_err(|e| Error::invalid(e.to_string()))?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
    }
}

fn case_config(config: &DecodeConfig, case: &BenchCase) -> DecodeConfig {
    DecodeConfig {
        max_new_tokens: case.max_new_tokens,
        ..config.clone()
    }
}

/// Runs Token Recycling over `cases` and returns one result per case.
pub fn run_tr<M: LanguageModel + ?Sized>(
    model: &M,
    cases: &[&BenchCase],
    config: &DecodeConfig,
    source: &MatrixSource,
) -> Result<Vec<DecodeResult>> {
    let vocab = model.vocab().size();
    let mut carried = match source {
        MatrixSource::Carry => Some(TokenRecycler::new(vocab, config.clone())?.into_matrix()),
        _ => None,
    };
    let mut results = Vec::with_capacity(cases.len());
    for case in cases {
        let cfg = case_config(config, case);
        let matrix = match source {
            MatrixSource::PerCase => RecycleMatrix::new(vocab, cfg.k, &cfg.init)?,
            MatrixSource::Carry => carried.take().expect("matrix is returned after each case"),
            MatrixSource::Fixed(m) => m.clone(),
        };
        let mut session = TokenRecycler::with_matrix(matrix, cfg)?;
        results.push(session.decode(model, &case.prompt)?);
        if let MatrixSource::Carry = source {
            carried = Some(session.into_matrix());
        }
    }
    Ok(results)
}

fn aggregate(results: &[DecodeResult], ar: Option<&[DecodeResult]>) -> Aggregate {
    let tokens: usize = results.iter().map(|r| r.tokens.len()).sum();
    let steps: usize = results.iter().map(|r| r.steps).sum();
    let wall: f64 = results.iter().map(|r| r.wall_time).sum();
    let mut phases = PhaseTimes::default();
    for r in results {
        phases.retrieve += r.phases.retrieve;
        phases.evaluate += r.phases.evaluate;
        phases.verify += r.phases.verify;
        phases.update += r.phases.update;
    }
    let ar_steps = ar.map(|a| a.iter().map(|r| r.steps).sum::<usize>() as f64);
    let ar_wall = ar.map(|a| a.iter().map(|r| r.wall_time).sum::<f64>());
    let mean_case_mat = if results.is_empty() {
        0.0
    } else {
        results.iter().map(|r| r.mean_accepted()).sum::<f64>() / results.len() as f64
    };
    Aggregate {
        generated_tokens: tokens,
        steps,
        mat: ratio(tokens as f64, steps as f64).unwrap_or(0.0),
        mean_case_mat,
        step_ratio: ar_steps.and_then(|s| ratio(s, steps as f64)),
        timing: Timing {
            wall_time_s: wall,
            tokens_per_second: ratio(tokens as f64, wall).unwrap_or(0.0),
            speedup: ar_wall.and_then(|w| ratio(w, wall)),
            phases,
        },
    }
}

/// Runs every requested method on every case with a shared model.
///
/// AR always runs (it is the reference for step ratios and speedups) but is
/// only reported when requested.
pub fn run_bench<M: LanguageModel + ?Sized>(
    cases: &[BenchCase],
    model: &M,
    methods: &[Method],
    config: &DecodeConfig,
    source: &MatrixSource,
) -> Result<DecodeReport> {
    if cases.is_empty() {
        return Err(Error::invalid("no bench cases"));
    }
    if methods.is_empty() {
        return Err(Error::invalid("no methods selected"));
    }
    config.validate()?;
    let refs: Vec<&BenchCase> = cases.iter().collect();
    let ar: Vec<DecodeResult> = refs
        .iter()
        .map(|c| ar_decode(model, &c.prompt, &case_config(config, c)))
        .collect::<Result<_>>()?;

    let mut reports = Vec::new();
    let mut identical = true;
    for &method in methods {
        let results = match method {
            Method::Ar => ar.clone(),
            Method::Tr => run_tr(model, &refs, config, source)?,
            Method::Pld => refs
                .iter()
                .map(|c| pld_decode(model, &c.prompt, &case_config(config, c)))
                .collect::<Result<_>>()?,
        };
        let mut case_reports = Vec::with_capacity(cases.len());
        for ((case, r), a) in cases.iter().zip(&results).zip(&ar) {
            identical &= r.tokens == a.tokens;
            case_reports.push(CaseReport {
                name: case.name.clone(),
                category: case.category.clone(),
                output_hash: output_hash(&r.tokens),
                metrics: if r.tokens.len() == a.tokens.len() {
                    compute_metrics(r, a)?
                } else {
                    metrics_of(r, None)
                },
            });
        }
        reports.push(MethodReport {
            method,
            aggregate: aggregate(&results, Some(&ar)),
            cases: case_reports,
        });
    }
    let mut annotations = Vec::new();
    if !identical {
        annotations.push("outputs differ across methods".to_string());
    }
    Ok(DecodeReport {
        config: ConfigEcho::new(config, source),
        outputs_identical: identical,
        methods: reports,
        annotations,
    })
}

/// Matrix left behind after running Token Recycling over `warmup` with a
/// carried matrix starting from `config.init`.
pub fn warm_matrix<M: LanguageModel + ?Sized>(
    model: &M,
    warmup: &[BenchCase],
    config: &DecodeConfig,
) -> Result<RecycleMatrix> {
    let vocab = model.vocab().size();
    let mut session = TokenRecycler::new(vocab, config.clone())?;
    for case in warmup {
        let cfg = case_config(config, case);
        let mut s = TokenRecycler::with_matrix(session.into_matrix(), cfg)?;
        s.decode(model, &case.prompt)?;
        session = s;
    }
    Ok(session.into_matrix())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitAblation {
    Zero,
    Random,
    FixedHot,
    ShuffleHot,
}

impl fmt::Display for InitAblation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitAblation::Zero => "zero",
            InitAblation::Random => "random",
            InitAblation::FixedHot => "fixed-hot",
            InitAblation::ShuffleHot => "shuffle-hot",
        })
    }
}

impl FromStr for InitAblation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "zero" => Ok(InitAblation::Zero),
            "random" => Ok(InitAblation::Random),
            "fixed-hot" | "fixed" => Ok(InitAblation::FixedHot),
            "shuffle-hot" | "shuffle" => Ok(InitAblation::ShuffleHot),
            other => Err(Error::Config(format!("unknown init ablation {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub label: String,
    pub aggregate: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub annotations: Vec<String>,
}

impl AblationReport {
    pub fn mat(&self, label: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.label == label)
            .map(|r| r.aggregate.mat)
    }

    pub fn strip_timing(&mut self) {
        for r in &mut self.rows {
            r.aggregate.timing = Timing::default();
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["label", "generated_tokens", "steps", "mat", "step_ratio", "tokens_per_second"])
            .map_err(|e| Error::invalid(e.to_string()))?;
        for r in &self.rows {
            let a = &r.aggregate;
            w.write_record([
                r.label.clone(),
                a.generated_tokens.to_string(),
                a.steps.to_string(),
                a.mat.to_string(),
                a.step_ratio.map_or(String::new(), |x| x.to_string()),
                a.timing.tokens_per_second.to_string(),
            ])
            .map_err(|e| Error::invalid(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
    }

    fn annotate_order(&mut self, lower: &str, higher: &str) {
        if let (Some(a), Some(b)) = (self.mat(lower), self.mat(higher)) {
            let verdict = if a <= b { "holds" } else { "violated" };
            self.annotations
                .push(format!("MAT({lower}) <= MAT({higher}): {verdict} ({a:.4} vs {b:.4})"));
        }
    }
}

fn ar_references<M: LanguageModel + ?Sized>(
    model: &M,
    cases: &[BenchCase],
    config: &DecodeConfig,
) -> Result<Vec<DecodeResult>> {
    cases
        .iter()
        .map(|c| ar_decode(model, &c.prompt, &case_config(config, c)))
        .collect()
}

/// Compares matrix initialization strategies.
///
/// `zero` and `random` start every case from a fresh matrix; `fixed-hot`
/// starts every case from `warm` (built on a disjoint warm-up set);
/// `shuffle-hot` carries one live matrix across the cases in a seeded
/// shuffled order. Expected orderings are recorded as annotations only.
pub fn ablate_init<M: LanguageModel + ?Sized>(
    model: &M,
    cases: &[BenchCase],
    strategies: &[InitAblation],
    config: &DecodeConfig,
    warm: Option<&RecycleMatrix>,
) -> Result<AblationReport> {
    if cases.is_empty() {
        return Err(Error::invalid("no bench cases"));
    }
    let ar = ar_references(model, cases, config)?;
    let mut rows = Vec::new();
    for &s in strategies {
        let (order, cfg, source): (Vec<usize>, DecodeConfig, MatrixSource) = match s {
            InitAblation::Zero => (
                (0..cases.len()).collect(),
                DecodeConfig {
                    init: InitStrategy::Zero,
                    ..config.clone()
                },
                MatrixSource::PerCase,
            ),
            InitAblation::Random => (
                (0..cases.len()).collect(),
                DecodeConfig {
                    init: InitStrategy::Random {
                        seed: config.rng_seed,
                    },
                    ..config.clone()
                },
                MatrixSource::PerCase,
            ),
            InitAblation::FixedHot => {
                let m = warm.ok_or_else(|| {
                    Error::Config("fixed-hot initialization needs a warm-up matrix".into())
                })?;
                ((0..cases.len()).collect(), config.clone(), MatrixSource::Fixed(m.clone()))
            }
            InitAblation::ShuffleHot => {
                let mut order: Vec<usize> = (0..cases.len()).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.rng_seed));
                (
                    order,
                    DecodeConfig {
                        init: InitStrategy::Zero,
                        ..config.clone()
                    },
                    MatrixSource::Carry,
                )
            }
        };
        let ordered: Vec<&BenchCase> = order.iter().map(|&i| &cases[i]).collect();
        let results = run_tr(model, &ordered, &cfg, &source)?;
        let ar_ordered: Vec<DecodeResult> = order.iter().map(|&i| ar[i].clone()).collect();
        rows.push(AblationRow {
            label: s.to_string(),
            aggregate: aggregate(&results, Some(&ar_ordered)),
        });
    }
    let mut report = AblationReport {
        rows,
        annotations: Vec::new(),
    };
    report.annotate_order("random", "zero");
    report.annotate_order("zero", "fixed-hot");
    report.annotate_order("zero", "shuffle-hot");
    Ok(report)
}

/// Runs Token Recycling once per labelled configuration on the same cases.
pub fn ablate_configs<M: LanguageModel + ?Sized>(
    model: &M,
    cases: &[BenchCase],
    variants: &[(String, DecodeConfig)],
    source: &MatrixSource,
) -> Result<AblationReport> {
    if cases.is_empty() {
        return Err(Error::invalid("no bench cases"));
    }
    let refs: Vec<&BenchCase> = cases.iter().collect();
    let mut rows = Vec::with_capacity(variants.len());
    for (label, cfg) in variants {
        cfg.validate()?;
        let ar = ar_references(model, cases, cfg)?;
        let results = run_tr(model, &refs, cfg, source)?;
        rows.push(AblationRow {
            label: label.clone(),
            aggregate: aggregate(&results, Some(&ar)),
        });
    }
    Ok(AblationReport {
        rows,
        annotations: Vec::new(),
    })
}

pub fn ablate_update_scope<M: LanguageModel + ?Sized>(
    model: &M,
    cases: &[BenchCase],
    config: &DecodeConfig,
    source: &MatrixSource,
) -> Result<AblationReport> {
    let variants: Vec<(String, DecodeConfig)> = [UpdateScope::AcceptedOnly, UpdateScope::AllDraft]
        .into_iter()
        .map(|scope| {
            (
                scope.to_string(),
                DecodeConfig {
                    update_scope: scope,
                    ..config.clone()
                },
            )
        })
        .collect();
    let mut r = ablate_configs(model, cases, &variants, source)?;
    r.annotate_order("accepted", "all");
    Ok(r)
}

pub fn ablate_update_strategy<M: LanguageModel + ?Sized>(
    model: &M,
    cases: &[BenchCase],
    config: &DecodeConfig,
    source: &MatrixSource,
) -> Result<AblationReport> {
    let variants: Vec<(String, DecodeConfig)> = [
        UpdateStrategy::Sequential,
        UpdateStrategy::First,
        UpdateStrategy::Last,
    ]
    .into_iter()
    .map(|s| {
        (
            s.to_string(),
            DecodeConfig {
                update_strategy: s,
                ..config.clone()
            },
        )
    })
    .collect();
    ablate_configs(model, cases, &variants, source)
}

pub fn ablate_temperature<M: LanguageModel + ?Sized>(
    model: &M,
    cases: &[BenchCase],
    temperatures: &[f64],
    config: &DecodeConfig,
    source: &MatrixSource,
) -> Result<AblationReport> {
    let variants: Vec<(String, DecodeConfig)> = temperatures
        .iter()
        .map(|&t| {
            (
                format!("T={t}"),
                DecodeConfig {
                    temperature: t,
                    ..config.clone()
                },
            )
        })
        .collect();
    ablate_configs(model, cases, &variants, source)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub nodes: usize,
    pub depth: usize,
    pub mat: f64,
    pub step_ratio: Option<f64>,
    pub timing: Timing,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub warnings: Vec<String>,
}

impl SweepReport {
    pub fn point(&self, nodes: usize, depth: usize) -> Option<&SweepPoint> {
        self.points
            .iter()
            .find(|p| p.nodes == nodes && p.depth == depth)
    }

    pub fn strip_timing(&mut self) {
        for p in &mut self.points {
            p.timing = Timing::default();
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["nodes", "depth", "mat", "step_ratio", "tokens_per_second"])
            .map_err(|e| Error::invalid(e.to_string()))?;
        for p in &self.points {
            w.write_record([
                p.nodes.to_string(),
                p.depth.to_string(),
                p.mat.to_string(),
                p.step_ratio.map_or(String::new(), |r| r.to_string()),
                p.timing.tokens_per_second.to_string(),
            ])
            .map_err(|e| Error::invalid(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
    }
}

/// Runs Token Recycling for every `(nodes, depth)` pair, with trees derived
/// from `base` by [`TreeSpec::resized`]. Pairs that cannot form a valid tree
/// are skipped with a warning.
pub fn sweep_tree<M: LanguageModel + ?Sized>(
    model: &M,
    cases: &[BenchCase],
    base: &TreeSpec,
    breadths: &[usize],
    depths: &[usize],
    config: &DecodeConfig,
    source: &MatrixSource,
) -> Result<SweepReport> {
    if cases.is_empty() {
        return Err(Error::invalid("no bench cases"));
    }
    let refs: Vec<&BenchCase> = cases.iter().collect();
    let ar = ar_references(model, cases, config)?;
    let mut points = Vec::new();
    let mut warnings = Vec::new();
    for &depth in depths {
        for &nodes in breadths {
            let tree = match base.resized(nodes, depth, config.k) {
                Ok(t) => t,
                Err(e) => {
                    warnings.push(format!("skipped nodes={nodes} depth={depth}: {e}"));
                    continue;
                }
            };
            let cfg = DecodeConfig {
                tree,
                ..config.clone()
            };
            let results = run_tr(model, &refs, &cfg, source)?;
            let agg = aggregate(&results, Some(&ar));
            points.push(SweepPoint {
                nodes,
                depth,
                mat: agg.mat,
                step_ratio: agg.step_ratio,
                timing: agg.timing,
            });
        }
    }
    Ok(SweepReport { points, warnings })
}

/// How often each node of `tree` sat on the accepted path, summed over the
/// cases. The root counts once per step.
pub fn node_hit_counts<M: LanguageModel + ?Sized>(
    model: &M,
    cases: &[BenchCase],
    tree: &TreeSpec,
    config: &DecodeConfig,
    source: &MatrixSource,
) -> Result<Vec<u64>> {
    let cfg = DecodeConfig {
        tree: tree.clone(),
        ..config.clone()
    };
    let refs: Vec<&BenchCase> = cases.iter().collect();
    let mut counts = vec![0u64; tree.len()];
    for r in run_tr(model, &refs, &cfg, source)? {
        for s in &r.per_step {
            counts[0] += 1;
            for &n in &s.accepted_node_path {
                counts[n] += 1;
            }
        }
    }
    Ok(counts)
}
