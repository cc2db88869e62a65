//! End-to-end acceptance checks, one test per criterion. Each prints a
//! single PASS/FAIL line to stderr (visible without `--nocapture`) before
//! asserting.

use std::io::Write as _;
use std::sync::Mutex;
use std::time::Instant;

use lobbench::config::RunConfig;
use lobbench::lobster;
use lobbench::report::{self, BenchmarkReport};
use lobbench_core::adversarial::{encode, train, windows, DeltaStep, TrainConfig};
use lobbench_core::book::replay;
use lobbench_core::divergence::{aggregate, iqm, l1_distance, wasserstein1, Metric};
use lobbench_core::generator::{perturb, simulate, Knob, RateProfile, SimConfig};
use lobbench_core::impact::{classify_events, delta_r, epsilon, lag_grid, response_functions, EventClass, OrderKind};
use lobbench_core::stats::{derive_seed, rng_from};
use lobbench_core::{BookSnapshot, DatasetBundle, EventType, Level, Message, Nanos, Role, SequencePair, Side};
use rand::Rng as _;

// timing criteria must not compete for the CPU
static SERIAL: Mutex<()> = Mutex::new(());

fn report_line(criterion: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("acceptance criterion {criterion}: {verdict} ({detail})\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn sim(profile: &RateProfile, seed: u64, n: usize) -> SequencePair {
    simulate(profile, &SimConfig::reference(seed, n)).unwrap().sequence
}

/// Consecutive `len`-message sequences with the given role.
fn chop(seq: &SequencePair, len: usize, role: Role, prefix: &str) -> Vec<SequencePair> {
    (0..seq.len() / len)
        .map(|i| {
            let mut s = seq.slice(i * len, (i + 1) * len, format!("{prefix}_{i}"));
            s.role = role;
            if role == Role::Generated {
                s = s.with_seed(prefix);
            }
            s
        })
        .collect()
}

fn config(json: &str) -> RunConfig {
    let c: RunConfig = serde_json::from_str(json).unwrap();
    c.validate().unwrap();
    c
}

const SCORES_ONLY: &str = r#"{
  "conditionals": "none",
  "bootstrap": {"replicates": 0},
  "threshold": {"enabled": false},
  "horizon": {"enabled": false},
  "impact": {"enabled": false},
  "discriminator": {"enabled": false}
}"#;

const WITH_THRESHOLD: &str = r#"{
  "conditionals": "none",
  "bootstrap": {"replicates": 0},
  "threshold": {"enabled": true, "replicates": 1000, "level": 0.99},
  "horizon": {"enabled": false},
  "impact": {"enabled": false},
  "discriminator": {"enabled": false}
}"#;

/// One 1e5-message simulation split into a first (real) and second
/// (generated) half of 500-message sequences.
fn null_bundle(seed: u64) -> DatasetBundle {
    let s = sim(&RateProfile::reference(), derive_seed(seed, "null"), 100_000);
    let first = s.slice(0, 50_000, "first");
    let second = s.slice(50_000, 100_000, "second");
    DatasetBundle::new(chop(&first, 500, Role::Real, "real"), chop(&second, 500, Role::Generated, "gen"))
}

fn mean_l1(r: &BenchmarkReport) -> f64 {
    r.aggregates.iter().find(|a| a.metric == Metric::L1).unwrap().summary.summary.mean
}

fn l1_of(r: &BenchmarkReport, score: &str) -> f64 {
    r.scores.iter().find(|s| s.spec.name == score).unwrap().divergence(Metric::L1).unwrap().value
}

// criterion 1 ---------------------------------------------------------------

fn bin_mass_l1(a: &[f64], b: &[f64], edges: &[f64]) -> f64 {
    let nb = edges.len() - 1;
    let masses = |x: &[f64]| {
        let mut c = vec![0usize; nb + 2];
        for &v in x {
            let slot = if v < edges[0] {
                0
            } else if v > edges[nb] {
                nb + 1
            } else {
                1 + (0..nb).rev().find(|&k| v >= edges[k]).unwrap()
            };
            c[slot] += 1;
        }
        c.into_iter().map(|k| k as f64 / x.len() as f64).collect::<Vec<_>>()
    };
    let (pa, pb) = (masses(a), masses(b));
    0.5 * pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn min_cost_matching(xa: &[f64], xb: &[f64]) -> f64 {
    fn rec(k: usize, xa: &[f64], xb: &[f64], used: &mut [bool], acc: f64, best: &mut f64) {
        if k == xa.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..xb.len() {
            if !used[j] {
                used[j] = true;
                rec(k + 1, xa, xb, used, acc + (xa[k] - xb[j]).abs(), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(0, xa, xb, &mut vec![false; xb.len()], 0.0, &mut best);
    best
}

/// Exhaustive transport on samples replicated to a common size.
fn transport_w1(a: &[f64], b: &[f64]) -> f64 {
    let l = (1..=8).find(|l| l % a.len() == 0 && l % b.len() == 0).unwrap();
    let rep = |x: &[f64]| x.iter().flat_map(|&v| std::iter::repeat_n(v, l / x.len())).collect::<Vec<_>>();
    let cost = min_cost_matching(&rep(a), &rep(b)) / l as f64;
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let m = all.iter().sum::<f64>() / all.len() as f64;
    let sd = (all.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / all.len() as f64).sqrt();
    if sd > 0.0 { cost / sd } else { 0.0 }
}

#[test]
fn criterion_1_metric_oracles() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = rng_from(1, "criterion1");
    let mut worst_l1: f64 = 0.0;
    let mut worst_w1: f64 = 0.0;
    let draw = |rng: &mut lobbench_core::stats::Rng, n: usize, discrete: bool, shift: f64| -> Vec<f64> {
        (0..n)
            .map(|_| if discrete { f64::from(rng.random_range(0..8)) + shift.round() } else { rng.random::<f64>() * 10.0 + shift })
            .collect()
    };
    let ot_sizes = [(1, 1), (2, 2), (3, 3), (4, 4), (5, 5), (6, 6), (7, 7), (8, 8), (2, 4), (4, 8), (2, 8), (3, 6), (1, 7), (2, 6)];
    for i in 0..200 {
        let discrete = i % 2 == 0;
        let (n, m) = (rng.random_range(1..=1000), rng.random_range(1..=1000));
        let shift = rng.random::<f64>() * 3.0;
        let a = draw(&mut rng, n, discrete, 0.0);
        let b = draw(&mut rng, m, discrete, shift);
        let pooled: Vec<f64> = a.iter().chain(&b).copied().collect();
        let edges = lobbench_core::divergence::fd_bin_edges(&pooled).unwrap();
        worst_l1 = worst_l1.max((l1_distance(&a, &b, &edges).unwrap() - bin_mass_l1(&a, &b, &edges)).abs());

        let (p, q) = ot_sizes[i % ot_sizes.len()];
        let a = draw(&mut rng, p, discrete, 0.0);
        let b = draw(&mut rng, q, discrete, shift);
        worst_w1 = worst_w1.max((wasserstein1(&a, &b).unwrap().value - transport_w1(&a, &b)).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_l1 <= 1e-12 && worst_w1 <= 1e-9 && secs < 10.0;
    report_line(1, pass, &format!("max L1 error {worst_l1:.1e}, max W1 error {worst_w1:.1e}, {secs:.2} s"));
    assert!(pass);
}

// criterion 2 ---------------------------------------------------------------

#[test]
fn criterion_2_self_benchmark_null() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let cfg = config(WITH_THRESHOLD);
    let mut passed = 0;
    let mut misses = Vec::new();
    for seed in 0..20u64 {
        let bundle = null_bundle(seed);
        let mut c = cfg.clone();
        c.seed = seed;
        let r = report::run(&bundle, &c, None).unwrap().report;
        let above: Vec<&str> =
            r.scores.iter().filter(|s| s.above_threshold != Some(false)).map(|s| s.spec.name.as_str()).collect();
        if above.is_empty() {
            passed += 1;
        } else {
            misses.push(format!("seed {seed}: {}", above.join(",")));
        }
    }
    let pass = passed >= 19;
    let detail = if misses.is_empty() { String::from("no misses") } else { misses.join("; ") };
    report_line(2, pass, &format!("{passed}/20 trials with every L1 under its threshold; {detail}"));
    assert!(pass);
}

// criterion 3 ---------------------------------------------------------------

#[test]
fn criterion_3_perturbation_sensitivity() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let cfg = config(SCORES_ONLY);
    let fast = perturb(&RateProfile::reference(), Knob::Limit, 2.0).unwrap();
    let mut min_ratio = f64::INFINITY;
    let mut worse = 0;
    for seed in 0..20u64 {
        let null = null_bundle(seed);
        let p = sim(&fast, derive_seed(seed, "perturbed"), 50_000);
        let perturbed = DatasetBundle::new(null.real.clone(), chop(&p, 500, Role::Generated, "gen"));
        let mut c = cfg.clone();
        c.seed = seed;
        let a = report::run(&null, &c, None).unwrap().report;
        let b = report::run(&perturbed, &c, None).unwrap().report;
        min_ratio = min_ratio.min(l1_of(&b, "log_inter_arrival_time") / l1_of(&a, "log_inter_arrival_time"));
        if mean_l1(&b) > mean_l1(&a) {
            worse += 1;
        }
    }
    let pass = min_ratio >= 3.0 && worse == 20;
    report_line(3, pass, &format!("smallest inter-arrival L1 ratio {min_ratio:.2}, perturbed ranked worse in {worse}/20"));
    assert!(pass);
}

// criterion 4 ---------------------------------------------------------------

#[test]
fn criterion_4_bin_ablation_direction() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let real = sim(&RateProfile::reference(), 41, 50_000);
    let gen = sim(&perturb(&RateProfile::reference(), Knob::Cancel, 1.3).unwrap(), 42, 50_000);
    let bundle = DatasetBundle::new(chop(&real, 1000, Role::Real, "real"), chop(&gen, 1000, Role::Generated, "gen"));
    let rows = report::ablate_bins(&bundle, &RunConfig::default(), &[0.5, 2.0]).unwrap();
    let mut names: Vec<&str> = rows.iter().map(|r| r.score.as_str()).collect();
    names.dedup();
    let l1 = |name: &str, f: f64| rows.iter().find(|r| r.score == name && r.factor == f).unwrap().l1;
    let monotone = names.iter().filter(|n| l1(n, 0.5) >= l1(n, 1.0) && l1(n, 1.0) >= l1(n, 2.0)).count();
    let share = monotone as f64 / names.len() as f64;
    let pass = share >= 0.9;
    report_line(4, pass, &format!("{monotone}/{} scores ordered half >= default >= double", names.len()));
    assert!(pass);
}

// criterion 5 ---------------------------------------------------------------

#[test]
fn criterion_5_impact() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let table = [
        (OrderKind::Market, 1, 1),
        (OrderKind::Market, -1, -1),
        (OrderKind::Limit, 1, 1),
        (OrderKind::Limit, -1, -1),
        (OrderKind::Cancel, 1, -1),
        (OrderKind::Cancel, -1, 1),
    ];
    let eps_ok = table.iter().all(|&(k, d, e)| epsilon(k, d) == e);

    // bid limit order inside a three-tick spread, then mid-neutral touch events
    let mut initial = BookSnapshot::empty(5);
    for k in 0..5 {
        initial.bids[k] = Some(Level::new(9900 - 100 * k as i64, 100));
        initial.asks[k] = Some(Level::new(10200 + 100 * k as i64, 100));
    }
    let mut msgs = vec![Message::new(Nanos(0), EventType::NewLimit, 1, 100, 10100, Side::Bid)];
    for i in 0..300 {
        let (side, price) = if i % 2 == 0 { (Side::Ask, 10200) } else { (Side::Bid, 10100) };
        msgs.push(Message::new(Nanos(1 + i), EventType::NewLimit, 2 + i, 100, price, side));
    }
    let books = replay(&initial, &msgs).snapshots;
    let seq = SequencePair::new("lo1", Role::Real, msgs, books).unwrap();
    let lags = lag_grid(200, 20);
    let events = classify_events(&seq, Some(&initial), 100);
    let curves = response_functions(&[events], &lags);
    let lo1 = curves.iter().find(|c| c.class == EventClass::Lo1).unwrap();
    let unit = lo1.lags == lags && lo1.values.iter().all(|&v| v == 1.0);

    let data = sim(&RateProfile::reference(), 5, 20_000);
    let x = response_functions(&[classify_events(&data, None, 100)], &lags);
    let self_gap = delta_r(&x, &x).total;
    let grid_ok = lags.first() == Some(&1) && lags.last() == Some(&200) && lags.windows(2).all(|w| w[0] < w[1]);

    let pass = eps_ok && unit && self_gap == Some(0.0) && grid_ok;
    report_line(
        5,
        pass,
        &format!("epsilon table {eps_ok}, R_LO1 = 1 at all {} lags {unit}, dR(x,x) = {self_gap:?}, grid 1..200 {grid_ok}", lags.len()),
    );
    assert!(pass);
}

// criterion 6 ---------------------------------------------------------------

fn scaled(books: &[BookSnapshot], factor: u64) -> Vec<BookSnapshot> {
    books
        .iter()
        .map(|b| {
            let mut b = b.clone();
            for l in b.bids.iter_mut().chain(b.asks.iter_mut()).flatten() {
                l.size *= factor;
            }
            b
        })
        .collect()
}

fn steps_of(books: &[BookSnapshot]) -> Vec<DeltaStep> {
    encode(books, 100).steps
}

#[test]
fn criterion_6_discriminator() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let cfg = |seed: u64| TrainConfig { seed, test_fraction: 0.5, ..TrainConfig::default() };
    let mut null_aucs = Vec::new();
    let mut scaled_aucs = Vec::new();
    let mut worst_loss_gap: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for seed in 0..5u64 {
        // identical distribution: alternate windows of one simulation
        let s = sim(&RateProfile::reference(), derive_seed(seed, "disc/null"), 200_001);
        let w = windows(&steps_of(&s.books), 100);
        let (a, b): (Vec<_>, Vec<_>) = w.into_iter().enumerate().partition(|(i, _)| i % 2 == 0);
        let a: Vec<_> = a.into_iter().map(|x| x.1).collect();
        let b: Vec<_> = b.into_iter().map(|x| x.1).collect();
        let t = Instant::now();
        let out = train(&a, &b, &cfg(seed)).unwrap();
        slowest = slowest.max(t.elapsed().as_secs_f64());
        null_aucs.push(out.test_auc);
        worst_loss_gap = worst_loss_gap.max((out.initial_loss - std::f64::consts::LN_2).abs());

        let r = sim(&RateProfile::reference(), derive_seed(seed, "disc/real"), 100_001);
        let g = sim(&RateProfile::reference(), derive_seed(seed, "disc/gen"), 100_001);
        let rw = windows(&steps_of(&r.books), 100);
        let gw = windows(&steps_of(&scaled(&g.books, 3)), 100);
        let t = Instant::now();
        let out = train(&rw, &gw, &cfg(seed)).unwrap();
        slowest = slowest.max(t.elapsed().as_secs_f64());
        scaled_aucs.push(out.test_auc);
        worst_loss_gap = worst_loss_gap.max((out.initial_loss - std::f64::consts::LN_2).abs());
    }
    let pass = null_aucs.iter().all(|a| (0.4..=0.6).contains(a))
        && scaled_aucs.iter().all(|&a| a >= 0.95)
        && worst_loss_gap <= 0.02
        && slowest < 60.0;
    report_line(
        6,
        pass,
        &format!(
            "null AUC {:?}, x3 AUC {:?}, initial loss off ln2 by <= {worst_loss_gap:.4}, slowest fit {slowest:.1} s",
            null_aucs.iter().map(|a| (a * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            scaled_aucs.iter().map(|a| (a * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
        ),
    );
    assert!(pass);
}

// criterion 7 ---------------------------------------------------------------

#[test]
fn criterion_7_aggregation() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let v: Vec<f64> = (1..=8).map(f64::from).collect();
    let q = iqm(&v);
    let s = aggregate(&[0.0, 0.0, 0.0, 100.0]);
    let pass = q == 4.5 && s.mean == 25.0 && s.median == 0.0;
    report_line(7, pass, &format!("IQM(1..8) = {q}, mean/median of {{0,0,0,100}} = {}/{}", s.mean, s.median));
    assert!(pass);
}

// criterion 8 ---------------------------------------------------------------

#[test]
fn criterion_8_generator_law() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let profile = RateProfile::reference();
    let cfg = SimConfig::reference(8, 100_000);
    let out = simulate(&profile, &cfg).unwrap();
    let horizon: f64 = out.waits.iter().sum();
    let seq = &out.sequence;

    let mut counts = [vec![0usize; profile.levels], vec![0usize; profile.levels]];
    let mut opposite = [0i64; 2];
    for (i, m) in seq.messages.iter().enumerate() {
        let before = if i == 0 { &cfg.initial } else { &seq.books[i - 1] };
        if let Some(a) = before.best_ask() {
            opposite[0] = a.price;
        }
        if let Some(b) = before.best_bid() {
            opposite[1] = b.price;
        }
        if m.event == EventType::NewLimit {
            let s = if m.side == Side::Bid { 0 } else { 1 };
            let k = ((m.price - opposite[s]).abs() / 100) as usize;
            counts[s][k - 1] += 1;
        }
    }
    let mut worst_z: f64 = 0.0;
    for (s, rates) in [&profile.bid, &profile.ask].into_iter().enumerate() {
        for k in 0..profile.levels {
            let expected = rates.limit[k] * horizon;
            worst_z = worst_z.max((counts[s][k] as f64 - expected).abs() / expected.sqrt());
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let (mp, bp) = lobster::write_sequence(dir.path(), "sim", seq).unwrap();
    let (messages, _) = lobster::parse_messages(std::fs::File::open(mp).unwrap(), "m").unwrap();
    let replayed = replay(&cfg.initial, &messages);
    let mut bytes = Vec::new();
    lobster::write_books(&mut bytes, &replayed.snapshots).unwrap();
    let exact = replayed.inconsistencies == 0 && bytes == std::fs::read(bp).unwrap();

    let pass = worst_z < 3.0 && exact;
    report_line(8, pass, &format!("largest per-level count deviation {worst_z:.2} SE, replayed book file identical {exact}"));
    assert!(pass);
}

// criterion 9 ---------------------------------------------------------------

#[test]
fn criterion_9_end_to_end_runtime() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let base = RateProfile::reference();
    let other = perturb(&base, Knob::Market, 1.2).unwrap();
    let real: Vec<SequencePair> = (0..10)
        .map(|i| {
            let mut s = sim(&base, derive_seed(9, &format!("real/{i}")), 10_000);
            s.id = format!("real_{i}");
            s.role = Role::Real;
            s
        })
        .collect();
    let gen: Vec<SequencePair> = (0..10)
        .map(|i| {
            let mut s = sim(&other, derive_seed(9, &format!("gen/{i}")), 10_000);
            s.id = format!("gen_{i}");
            s.with_seed(format!("real_{i}"))
        })
        .collect();
    let bundle = DatasetBundle::new(real, gen);
    let cfg = RunConfig::default();
    let start = Instant::now();
    let run = report::run(&bundle, &cfg, None).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let r = &run.report;
    let complete = r.scores.iter().all(|s| s.divergences.len() == 2 && s.divergences.iter().all(|d| d.ci.is_some()))
        && r.impact.is_some()
        && r.discriminator.is_some();
    let pass = secs < 60.0 && complete;
    report_line(9, pass, &format!("default benchmark on 1e5 + 1e5 messages in {secs:.1} s, all sections present {complete}"));
    assert!(pass);
}
