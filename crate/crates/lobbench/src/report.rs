//! Benchmark orchestration: scores, divergences, conditionals, horizon
//! curves, impact, discriminator and aggregates.

use std::collections::BTreeMap;

use lobbench_core::adversarial::{self, roc_curve, Discriminator, ScoredWindow};
use lobbench_core::divergence::{
    self, aggregate_with_ci, bin_ablation, conditional_divergence, default_intervals, horizon_divergence,
    real_real_threshold, AggregateSummary, BootstrapConfig, ConditionalResult, DivergenceError, Histogram,
    HorizonPoint,
};
use lobbench_core::impact::{self, DeltaR, ResponseCurve};
use lobbench_core::scoring::Granularity;
use lobbench_core::stats::derive_seed;
use lobbench_core::{DatasetBundle, DivergenceResult, Metric, ScoreContext, ScoreSeries, ScoreSpec, SequencePair};
use log::{debug, info};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, ResolvedConditional, RunConfig};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Divergence { context: String, source: DivergenceError },
    #[error("{context}: {msg}")]
    Module { context: String, msg: String },
    #[error("worker pool: {0}")]
    Pool(String),
}

fn div_err(context: impl Into<String>) -> impl FnOnce(DivergenceError) -> RunError {
    let context = context.into();
    move |source| RunError::Divergence { context, source }
}

/// Data shortfalls that become report flags instead of failing the run.
fn is_shortfall(e: &DivergenceError) -> bool {
    matches!(e, DivergenceError::EmptySample(_) | DivergenceError::TooFewValues { .. })
}

#[derive(Clone, Debug, Serialize)]
pub struct HorizonCurve {
    pub metric: Metric,
    pub points: Vec<HorizonPoint>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AblationEntry {
    pub factor: f64,
    pub value: f64,
    pub n_bins: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScoreReport {
    #[serde(flatten)]
    pub spec: ScoreSpec,
    pub granularity: Granularity,
    pub n_real: usize,
    pub n_gen: usize,
    pub dropped_real: usize,
    pub dropped_gen: usize,
    pub divergences: Vec<DivergenceResult>,
    /// Real-vs-real L1 significance threshold.
    pub threshold: Option<f64>,
    pub above_threshold: Option<bool>,
    pub horizon: Vec<HorizonCurve>,
    pub ablation: Vec<AblationEntry>,
    pub flags: Vec<String>,
}

impl ScoreReport {
    pub fn divergence(&self, metric: Metric) -> Option<&DivergenceResult> {
        self.divergences.iter().find(|d| d.metric == metric)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionalReport {
    pub name: String,
    pub score: String,
    pub given: String,
    pub n_real: usize,
    pub n_gen: usize,
    pub results: Vec<ConditionalResult>,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ImpactReport {
    pub lags: Vec<u32>,
    pub real: Vec<ResponseCurve>,
    pub generated: Vec<ResponseCurve>,
    pub delta: DeltaR,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscriminatorReport {
    pub config: adversarial::TrainConfig,
    pub real_windows: usize,
    pub gen_windows: usize,
    /// Delta steps where several visible levels changed at once.
    pub multi_changes: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub train_auc: f64,
    pub test_auc: f64,
    /// Real vs generated held-out logits.
    pub logit_divergence: Vec<DivergenceResult>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricAggregate {
    pub metric: Metric,
    pub scores: Vec<String>,
    #[serde(flatten)]
    pub summary: AggregateSummary,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Metadata {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub tick_size: i64,
    pub n_levels: usize,
    pub real_sequences: usize,
    pub gen_sequences: usize,
    pub cond_sequences: usize,
    pub real_messages: usize,
    pub gen_messages: usize,
    /// Non-finite score values discarded, per score and dataset.
    pub dropped: BTreeMap<String, usize>,
    pub flags: Vec<String>,
    /// Sections absent from this report and why.
    pub omitted: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchmarkReport {
    pub metadata: Metadata,
    pub scores: Vec<ScoreReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub conditionals: Vec<ConditionalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub impact: Option<ImpactReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discriminator: Option<DiscriminatorReport>,
    pub aggregates: Vec<MetricAggregate>,
}

/// Bin masses behind one score's L1 value.
#[derive(Clone, Debug)]
pub struct HistogramData {
    pub score: String,
    pub edges: Vec<f64>,
    pub real_mass: Vec<f64>,
    pub gen_mass: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LogitRow {
    pub sequence_id: String,
    pub label: bool,
    pub test: bool,
    pub logit: f64,
}

/// Plot data and the trained model, emitted next to the report.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    pub histograms: Vec<HistogramData>,
    pub roc: Vec<(f64, f64)>,
    pub logits: Vec<LogitRow>,
    pub model: Option<Discriminator>,
}

pub struct BenchmarkRun {
    pub report: BenchmarkReport,
    pub artifacts: Artifacts,
}

fn bootstrap_cfg(config: &RunConfig, seed: u64) -> Option<BootstrapConfig> {
    (config.bootstrap.replicates > 0).then(|| BootstrapConfig::new(config.bootstrap.replicates, config.bootstrap.level, seed))
}

/// Scores every sequence of a dataset, in order, stamping sequence numbers.
pub fn score_dataset(spec: &ScoreSpec, seqs: &[SequencePair], ctx: &ScoreContext) -> ScoreSeries {
    let parts: Vec<ScoreSeries> = seqs.par_iter().map(|s| spec.evaluate(s, ctx)).collect();
    let mut all = ScoreSeries::new(spec.name.clone(), lobbench_core::scoring::granularity_of(spec.kind));
    for (i, p) in parts.into_iter().enumerate() {
        all.append(p, i as u32);
    }
    all
}

fn infer_levels(bundle: &DatasetBundle) -> usize {
    bundle
        .real
        .iter()
        .chain(&bundle.generated)
        .find_map(|s| s.books.first().map(|b| b.n_levels()))
        .unwrap_or(10)
}

pub fn score_context(bundle: &DatasetBundle, config: &RunConfig) -> ScoreContext {
    ScoreContext { tick_size: config.tick_size, n_levels: config.n_levels.unwrap_or_else(|| infer_levels(bundle)) }
}

/// Runs the full benchmark on a worker pool of `jobs` threads (all cores
/// when `None`). Output does not depend on `jobs`.
pub fn run(bundle: &DatasetBundle, config: &RunConfig, jobs: Option<usize>) -> Result<BenchmarkRun, RunError> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| RunError::Pool(e.to_string()))?;
    pool.install(|| run_inner(bundle, config))
}

struct ScoreData {
    real: ScoreSeries,
    gen: ScoreSeries,
}

fn run_inner(bundle: &DatasetBundle, config: &RunConfig) -> Result<BenchmarkRun, RunError> {
    let ctx = score_context(bundle, config);
    let specs = config.resolved_scores()?;
    let conditionals = config.resolved_conditionals()?;
    let seed = config.seed;

    let mut meta = Metadata {
        schema_version: config.schema_version,
        config_hash: config.hash()?,
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        tick_size: ctx.tick_size,
        n_levels: ctx.n_levels,
        real_sequences: bundle.real.len(),
        gen_sequences: bundle.generated.len(),
        cond_sequences: bundle.conditioning.len(),
        real_messages: bundle.real.iter().map(SequencePair::len).sum(),
        gen_messages: bundle.generated.iter().map(SequencePair::len).sum(),
        ..Metadata::default()
    };

    // (score, dataset) tasks; conditioning-only scores are included so
    // each series is computed once
    let mut all_specs = specs.clone();
    for c in &conditionals {
        for s in [&c.score, &c.given] {
            if !all_specs.iter().any(|x| x.name == s.name) {
                all_specs.push(s.clone());
            }
        }
    }
    info!("scoring {} functions on {} + {} sequences", all_specs.len(), bundle.real.len(), bundle.generated.len());
    let tasks: Vec<(usize, bool)> = (0..all_specs.len()).flat_map(|i| [(i, true), (i, false)]).collect();
    let mut series: Vec<ScoreSeries> = tasks
        .par_iter()
        .map(|&(i, real)| score_dataset(&all_specs[i], if real { &bundle.real } else { &bundle.generated }, &ctx))
        .collect();
    let mut data: BTreeMap<String, ScoreData> = BTreeMap::new();
    for spec in all_specs.iter().rev() {
        let gen = series.pop().expect("one series per task");
        let real = series.pop().expect("one series per task");
        data.insert(spec.name.clone(), ScoreData { real, gen });
    }
    for spec in &specs {
        let d = &data[&spec.name];
        meta.dropped.insert(format!("{}/real", spec.name), d.real.dropped);
        meta.dropped.insert(format!("{}/generated", spec.name), d.gen.dropped);
    }

    let max_step = bundle.generated.iter().filter_map(|s| s.step_index.last().copied()).max().unwrap_or(1);
    let intervals = config.horizon.intervals.clone().unwrap_or_else(|| default_intervals(max_step, config.horizon.count));

    let scored: Vec<(ScoreReport, Option<HistogramData>)> = specs
        .par_iter()
        .map(|spec| score_report(spec, &data[&spec.name], config, &intervals))
        .collect::<Result<_, _>>()?;
    let mut artifacts = Artifacts::default();
    let mut score_reports = Vec::with_capacity(scored.len());
    for (r, h) in scored {
        for f in &r.flags {
            meta.flags.push(format!("score {}: {f}", r.spec.name));
        }
        score_reports.push(r);
        artifacts.histograms.extend(h);
    }

    let cond_reports: Vec<ConditionalReport> = conditionals
        .par_iter()
        .map(|c| conditional_report(c, &data, config))
        .collect::<Result<_, _>>()?;
    for c in &cond_reports {
        for f in &c.flags {
            meta.flags.push(format!("conditional {}: {f}", c.name));
        }
    }
    if cond_reports.is_empty() {
        meta.omitted.insert("conditionals".into(), "none configured".into());
    }

    let impact = if config.impact.enabled {
        let r = impact_report(bundle, config, ctx.tick_size);
        for c in &r.delta.per_class {
            if let Some(f) = &c.flag {
                meta.flags.push(format!("impact {}: {f}", c.class.name()));
            }
        }
        Some(r)
    } else {
        meta.omitted.insert("impact".into(), "disabled".into());
        None
    };

    let discriminator = if config.discriminator.enabled {
        match discriminator_report(bundle, config, ctx.tick_size, &mut artifacts)? {
            Ok(r) => Some(r),
            Err(why) => {
                meta.omitted.insert("discriminator".into(), why);
                None
            }
        }
    } else {
        meta.omitted.insert("discriminator".into(), "disabled".into());
        None
    };

    let aggregates = aggregates(&score_reports, config);
    if aggregates.is_empty() {
        meta.omitted.insert("aggregates".into(), "no score produced a divergence".into());
    }

    Ok(BenchmarkRun {
        report: BenchmarkReport { metadata: meta, scores: score_reports, conditionals: cond_reports, impact, discriminator, aggregates },
        artifacts,
    })
}

fn score_report(
    spec: &ScoreSpec,
    d: &ScoreData,
    config: &RunConfig,
    intervals: &[(u32, u32)],
) -> Result<(ScoreReport, Option<HistogramData>), RunError> {
    let name = &spec.name;
    let tag = |t: &str| derive_seed(config.seed, &format!("score/{name}/{t}"));
    let mut report = ScoreReport {
        spec: spec.clone(),
        granularity: d.real.granularity,
        n_real: d.real.len(),
        n_gen: d.gen.len(),
        dropped_real: d.real.dropped,
        dropped_gen: d.gen.dropped,
        divergences: Vec::new(),
        threshold: None,
        above_threshold: None,
        horizon: Vec::new(),
        ablation: Vec::new(),
        flags: Vec::new(),
    };
    let (real, gen) = (&d.real.values, &d.gen.values);
    if real.is_empty() || gen.is_empty() {
        let side = if real.is_empty() { "real" } else { "generated" };
        report.flags.push(format!("no values in {side} data"));
        return Ok((report, None));
    }
    debug!("score {name}: {} real, {} generated values", real.len(), gen.len());

    let started = std::time::Instant::now();
    let boot = bootstrap_cfg(config, tag("divergence"));
    report.divergences = divergence::evaluate(real, gen, &config.metrics, boot.as_ref()).map_err(div_err(format!("score {name}")))?;
    debug!("score {name}: divergences in {:.2?}", started.elapsed());

    let mut hist = None;
    if let Some((l1_value, edges)) = report.divergence(Metric::L1).map(|d| (d.value, d.edges.clone())) {
        if edges.len() >= 2 {
            let h = |v: &[f64]| Histogram::new(v, &edges).map(|h| h.masses().1);
            let ctx = format!("score {name}: histogram");
            hist = Some(HistogramData {
                score: name.clone(),
                edges: edges.clone(),
                real_mass: h(real).map_err(div_err(ctx.clone()))?,
                gen_mass: h(gen).map_err(div_err(ctx))?,
            });
        }

        if config.threshold.enabled {
            let t = &config.threshold;
            match real_real_threshold(real, Some(&d.real.sequences), t.replicates, t.level, tag("threshold")) {
                Ok(th) => {
                    report.threshold = Some(th);
                    report.above_threshold = Some(l1_value > th);
                }
                Err(e) if is_shortfall(&e) => report.flags.push(format!("threshold unavailable: {e}")),
                Err(e) => return Err(div_err(format!("score {name}: threshold"))(e)),
            }
        }

        report.ablation.push(AblationEntry { factor: 1.0, value: l1_value, n_bins: edges.len().saturating_sub(1) });
        for &f in &config.ablation_factors {
            let r = bin_ablation(real, gen, f).map_err(div_err(format!("score {name}: ablation x{f}")))?;
            report.ablation.push(AblationEntry { factor: f, value: r.value, n_bins: r.edges.len().saturating_sub(1) });
        }
    }

    if config.horizon.enabled {
        for &metric in &config.metrics {
            let hb = (config.horizon.bootstrap > 0)
                .then(|| BootstrapConfig::new(config.horizon.bootstrap, config.bootstrap.level, tag(&format!("horizon/{}", metric.name()))));
            let points = horizon_divergence(real, gen, &d.gen.steps, intervals, metric, hb.as_ref())
                .map_err(div_err(format!("score {name}: horizon {}", metric.name())))?;
            report.horizon.push(HorizonCurve { metric, points });
        }
    }
    Ok((report, hist))
}

fn conditional_report(
    c: &ResolvedConditional,
    data: &BTreeMap<String, ScoreData>,
    config: &RunConfig,
) -> Result<ConditionalReport, RunError> {
    let x = &data[&c.score.name];
    let y = &data[&c.given.name];
    let (xr, yr) = lobbench_core::scoring::align(&x.real, &y.real);
    let (xg, yg) = lobbench_core::scoring::align(&x.gen, &y.gen);
    let mut report = ConditionalReport {
        name: c.name.clone(),
        score: c.score.name.clone(),
        given: c.given.name.clone(),
        n_real: xr.len(),
        n_gen: xg.len(),
        results: Vec::new(),
        flags: Vec::new(),
    };
    for &metric in &config.metrics {
        let boot = bootstrap_cfg(config, derive_seed(config.seed, &format!("conditional/{}/{}", c.name, metric.name())));
        match conditional_divergence(&xr, &xg, &yr, &yg, metric, &c.buckets, boot.as_ref()) {
            Ok(r) => {
                for b in r.buckets.iter().filter(|b| b.insufficient) {
                    report.flags.push(format!(
                        "{} bucket [{}, {}) has too few values ({} real, {} generated)",
                        metric.name(),
                        b.low,
                        b.high,
                        b.n_real,
                        b.n_gen
                    ));
                }
                report.results.push(r);
            }
            Err(e) if is_shortfall(&e) => {
                report.flags.push(format!("{} unavailable: {e}", metric.name()));
            }
            Err(e) => return Err(div_err(format!("conditional {}", c.name))(e)),
        }
    }
    Ok(report)
}

/// Last conditioning book per seed id, used as the state before the first
/// generated message.
fn initial_books(bundle: &DatasetBundle) -> BTreeMap<&str, &lobbench_core::BookSnapshot> {
    bundle
        .conditioning
        .iter()
        .filter_map(|c| Some((c.seed_id.as_deref()?, c.books.last()?)))
        .collect()
}

fn impact_report(bundle: &DatasetBundle, config: &RunConfig, tick: i64) -> ImpactReport {
    let lags = impact::lag_grid(config.impact.max_lag, config.impact.lag_count);
    let init = initial_books(bundle);
    let real_events: Vec<_> = bundle.real.par_iter().map(|s| impact::classify_events(s, None, tick)).collect();
    let gen_events: Vec<_> = bundle
        .generated
        .par_iter()
        .map(|s| {
            let start = s.seed_id.as_deref().and_then(|id| init.get(id).copied());
            impact::classify_events(s, start, tick)
        })
        .collect();
    let real = impact::response_functions(&real_events, &lags);
    let generated = impact::response_functions(&gen_events, &lags);
    let delta = impact::delta_r(&real, &generated);
    ImpactReport { lags, real, generated, delta }
}

type Windows = (Vec<Vec<adversarial::DeltaStep>>, Vec<String>, usize);

fn encode_dataset(seqs: &[SequencePair], tick: i64, len: usize) -> Windows {
    let per_seq: Vec<_> = seqs
        .par_iter()
        .map(|s| {
            let enc = adversarial::encode(&s.books, tick);
            (adversarial::windows(&enc.steps, len), enc.multi_changes)
        })
        .collect();
    let mut windows = Vec::new();
    let mut ids = Vec::new();
    let mut multi = 0;
    for (s, (w, m)) in seqs.iter().zip(per_seq) {
        ids.extend(std::iter::repeat_n(s.id.clone(), w.len()));
        windows.extend(w);
        multi += m;
    }
    (windows, ids, multi)
}

/// `Ok(Err(reason))` when the data cannot support training.
fn discriminator_report(
    bundle: &DatasetBundle,
    config: &RunConfig,
    tick: i64,
    artifacts: &mut Artifacts,
) -> Result<Result<DiscriminatorReport, String>, RunError> {
    let mut cfg = config.discriminator.train.clone();
    cfg.seed = derive_seed(config.seed, "discriminator");
    let (rw, rids, rm) = encode_dataset(&bundle.real, tick, cfg.window);
    let (gw, gids, gm) = encode_dataset(&bundle.generated, tick, cfg.window);
    let out = match adversarial::train(&rw, &gw, &cfg) {
        Ok(o) => o,
        Err(e @ adversarial::AdversarialError::TooFewWindows { .. }) => return Ok(Err(e.to_string())),
        Err(e) => return Err(RunError::Module { context: "discriminator".into(), msg: e.to_string() }),
    };
    let split = |w: &[ScoredWindow]| -> (Vec<f64>, Vec<f64>) {
        let r = w.iter().filter(|s| s.label).map(|s| s.logit).collect();
        let g = w.iter().filter(|s| !s.label).map(|s| s.logit).collect();
        (r, g)
    };
    let (tr, tg) = split(&out.test);
    let boot = bootstrap_cfg(config, derive_seed(config.seed, "discriminator/logits"));
    let logit_divergence =
        divergence::evaluate(&tr, &tg, &config.metrics, boot.as_ref()).map_err(div_err("discriminator logits"))?;

    let labels: Vec<bool> = out.test.iter().map(|s| s.label).collect();
    let logits: Vec<f64> = out.test.iter().map(|s| s.logit).collect();
    artifacts.roc = roc_curve(&labels, &logits).map_err(|e| RunError::Module { context: "discriminator roc".into(), msg: e.to_string() })?;
    for (set, test) in [(&out.train, false), (&out.test, true)] {
        for s in set {
            let ids = if s.label { &rids } else { &gids };
            artifacts.logits.push(LogitRow { sequence_id: ids[s.index].clone(), label: s.label, test, logit: s.logit });
        }
    }
    artifacts.model = Some(out.model.clone());
    Ok(Ok(DiscriminatorReport {
        config: cfg,
        real_windows: rw.len(),
        gen_windows: gw.len(),
        multi_changes: rm + gm,
        initial_loss: out.initial_loss,
        final_loss: out.epoch_losses.last().copied().unwrap_or(out.initial_loss),
        train_auc: out.train_auc,
        test_auc: out.test_auc,
        logit_divergence,
    }))
}

/// Mean, median and IQM per metric over scores with a value.
pub fn aggregates(scores: &[ScoreReport], config: &RunConfig) -> Vec<MetricAggregate> {
    let mut out = Vec::new();
    for &metric in &config.metrics {
        let found: Vec<(&str, &DivergenceResult)> =
            scores.iter().filter_map(|s| Some((s.spec.name.as_str(), s.divergence(metric)?))).collect();
        if found.is_empty() {
            continue;
        }
        let values: Vec<f64> = found.iter().map(|(_, d)| d.value).collect();
        let reps: Vec<&[f64]> = found.iter().map(|(_, d)| d.replicates.as_slice()).collect();
        out.push(MetricAggregate {
            metric,
            scores: found.iter().map(|(n, _)| n.to_string()).collect(),
            summary: aggregate_with_ci(&values, &reps, config.bootstrap.level),
        });
    }
    out
}

/// One row of the bin-ablation table.
#[derive(Clone, Debug, Serialize)]
pub struct AblationRow {
    pub score: String,
    pub factor: f64,
    pub l1: f64,
    pub n_bins: usize,
}

/// L1 at the default FD width and at each factor, per score; no bootstrap.
pub fn ablate_bins(bundle: &DatasetBundle, config: &RunConfig, factors: &[f64]) -> Result<Vec<AblationRow>, RunError> {
    let ctx = score_context(bundle, config);
    let specs = config.resolved_scores()?;
    let per_score: Vec<Vec<AblationRow>> = specs
        .par_iter()
        .map(|spec| {
            let real = score_dataset(spec, &bundle.real, &ctx).values;
            let gen = score_dataset(spec, &bundle.generated, &ctx).values;
            let mut rows = Vec::new();
            if real.is_empty() || gen.is_empty() {
                return Ok(rows);
            }
            for &f in std::iter::once(&1.0).chain(factors) {
                let r = bin_ablation(&real, &gen, f).map_err(div_err(format!("score {}: ablation x{f}", spec.name)))?;
                rows.push(AblationRow { score: spec.name.clone(), factor: f, l1: r.value, n_bins: r.edges.len().saturating_sub(1) });
            }
            Ok(rows)
        })
        .collect::<Result<_, RunError>>()?;
    Ok(per_score.into_iter().flatten().collect())
}
