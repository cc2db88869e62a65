//! Zero-intelligence order book simulator driven by empirical rates.
//!
//! Limit orders arrive at each relative level (ticks from the opposite
//! best quote) with a constant rate, every resting order carries its own
//! cancellation hazard (orders beyond the tracked levels use the outermost
//! level's), and market orders
//! arrive at a constant rate per side. All events race as exponential
//! clocks; the book itself is the matching engine from [`crate::book`].

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng as _;
use thiserror::Error;

use crate::book::OrderBook;
use crate::math;
use crate::stats;
use crate::types::{BookSnapshot, EventType, Level, Message, Nanos, Price, Qty, Role, SequencePair, Side};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("no sequence with a positive time span")]
    ZeroTimeSpan,
    #[error("unknown rate knob '{0}' (expected limit, cancel or market)")]
    UnknownKnob(String),
    #[error("scale factor must be finite and non-negative, got {0}")]
    InvalidFactor(f64),
    #[error("invalid profile: {0}")]
    InvalidProfile(&'static str),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(&'static str),
}

/// Discrete size distribution.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SizeHistogram {
    pub sizes: Vec<Qty>,
    /// Probabilities, summing to one.
    pub weights: Vec<f64>,
}

impl SizeHistogram {
    pub fn from_pairs(pairs: &[(Qty, f64)]) -> Self {
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        SizeHistogram {
            sizes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        }
    }

    /// Empirical histogram of observed sizes; `fallback` when there are none.
    pub fn from_samples(samples: &[Qty], fallback: Qty) -> Self {
        if samples.is_empty() {
            return SizeHistogram { sizes: alloc::vec![fallback], weights: alloc::vec![1.0] };
        }
        let mut s = samples.to_vec();
        s.sort_unstable();
        let mut pairs: Vec<(Qty, f64)> = Vec::new();
        for v in s {
            match pairs.last_mut() {
                Some(p) if p.0 == v => p.1 += 1.0,
                _ => pairs.push((v, 1.0)),
            }
        }
        Self::from_pairs(&pairs)
    }

    pub fn mean(&self) -> f64 {
        self.sizes.iter().zip(&self.weights).map(|(&s, w)| s as f64 * w).sum()
    }

    pub fn sample(&self, rng: &mut stats::Rng) -> Qty {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (s, w) in self.sizes.iter().zip(&self.weights) {
            acc += w;
            if u < acc {
                return *s;
            }
        }
        *self.sizes.last().expect("non-empty histogram")
    }

    fn validate(&self) -> Result<(), GeneratorError> {
        if self.sizes.is_empty() || self.sizes.len() != self.weights.len() {
            return Err(GeneratorError::InvalidProfile("size histogram shape"));
        }
        if self.sizes.contains(&0) || self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(GeneratorError::InvalidProfile("size histogram values"));
        }
        if (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(GeneratorError::InvalidProfile("size histogram not normalised"));
        }
        Ok(())
    }
}

/// Rates for one side of the book.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SideRates {
    /// Limit arrivals per second at relative levels `1..=K`.
    pub limit: Vec<f64>,
    /// Cancellation hazard per resting order per second, levels `1..=K`.
    pub cancel: Vec<f64>,
    /// Market orders per second hitting this side.
    pub market: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateProfile {
    pub levels: usize,
    pub bid: SideRates,
    pub ask: SideRates,
    pub limit_sizes: SizeHistogram,
    pub market_sizes: SizeHistogram,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Knob {
    Limit,
    Cancel,
    Market,
}

impl core::str::FromStr for Knob {
    type Err = GeneratorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "limit" => Ok(Knob::Limit),
            "cancel" => Ok(Knob::Cancel),
            "market" => Ok(Knob::Market),
            other => Err(GeneratorError::UnknownKnob(other.to_string())),
        }
    }
}

impl RateProfile {
    /// Symmetric five-level profile with rates of the order reported for
    /// liquid large-tick stocks.
    pub fn reference() -> Self {
        let side = SideRates {
            limit: alloc::vec![1.85, 1.51, 1.09, 0.88, 0.77],
            cancel: alloc::vec![0.71, 0.81, 0.68, 0.56, 0.47],
            market: 0.94,
        };
        RateProfile {
            levels: 5,
            bid: side.clone(),
            ask: side,
            limit_sizes: SizeHistogram::from_pairs(&[(100, 0.45), (200, 0.25), (300, 0.15), (500, 0.1), (1000, 0.05)]),
            market_sizes: SizeHistogram::from_pairs(&[(100, 0.6), (200, 0.25), (300, 0.15)]),
        }
    }

    pub fn side(&self, side: Side) -> &SideRates {
        match side {
            Side::Bid => &self.bid,
            Side::Ask => &self.ask,
        }
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self.levels == 0 {
            return Err(GeneratorError::InvalidProfile("zero levels"));
        }
        for s in [&self.bid, &self.ask] {
            if s.limit.len() != self.levels || s.cancel.len() != self.levels {
                return Err(GeneratorError::InvalidProfile("rate vector length differs from level count"));
            }
            let ok = |v: f64| v.is_finite() && v >= 0.0;
            if !s.limit.iter().chain(&s.cancel).all(|&v| ok(v)) || !ok(s.market) {
                return Err(GeneratorError::InvalidProfile("rates must be finite and non-negative"));
            }
        }
        self.limit_sizes.validate()?;
        self.market_sizes.validate()
    }

    /// Bid/ask swapped.
    pub fn mirrored(&self) -> Self {
        RateProfile { bid: self.ask.clone(), ask: self.bid.clone(), ..self.clone() }
    }
}

/// Scales one family of rates on both sides. A factor of zero switches
/// the family off.
pub fn perturb(profile: &RateProfile, knob: Knob, factor: f64) -> Result<RateProfile, GeneratorError> {
    if !(factor.is_finite() && factor >= 0.0) {
        return Err(GeneratorError::InvalidFactor(factor));
    }
    let mut p = profile.clone();
    for s in [&mut p.bid, &mut p.ask] {
        match knob {
            Knob::Limit => s.limit.iter_mut().for_each(|r| *r *= factor),
            Knob::Cancel => s.cancel.iter_mut().for_each(|r| *r *= factor),
            Knob::Market => s.market *= factor,
        }
    }
    Ok(p)
}

/// Relative level of `price` on `side` given the opposite best quote.
fn relative_level(side: Side, price: Price, opposite_best: Price, tick: Price) -> i64 {
    match side {
        Side::Bid => (opposite_best - price) / tick,
        Side::Ask => (price - opposite_best) / tick,
    }
}

fn side_index(side: Side) -> usize {
    match side {
        Side::Bid => 0,
        Side::Ask => 1,
    }
}

/// Empirical rates from real sequences. Levels are counted in ticks from
/// the opposite best quote of the book before each message (the last
/// known quote when that side is empty). The first message of each
/// sequence only starts the clock.
pub fn estimate_rates(seqs: &[SequencePair], levels: usize, tick: Price) -> Result<RateProfile, GeneratorError> {
    if levels == 0 || tick <= 0 {
        return Err(GeneratorError::InvalidConfig("levels and tick must be positive"));
    }
    let mut span = 0.0;
    let mut limit = [alloc::vec![0.0; levels], alloc::vec![0.0; levels]];
    let mut cancel = [alloc::vec![0.0; levels], alloc::vec![0.0; levels]];
    // time integral of visible volume per relative level
    let mut exposure = [alloc::vec![0.0; levels], alloc::vec![0.0; levels]];
    let mut market = [0.0; 2];
    let mut limit_sizes: Vec<Qty> = Vec::new();
    let mut market_sizes: Vec<Qty> = Vec::new();

    for seq in seqs {
        if seq.len() < 2 {
            continue;
        }
        let t0 = seq.messages[0].time;
        let t1 = seq.messages[seq.len() - 1].time;
        span += (t1.0 - t0.0) as f64 / Nanos::PER_SECOND as f64;
        let mut last_best: [Option<Price>; 2] = [None, None];
        let mut burst: Option<(Nanos, Side, usize)> = None;
        for i in 1..seq.len() {
            let before = &seq.books[i - 1];
            for side in [Side::Bid, Side::Ask] {
                if let Some(l) = before.best(side) {
                    last_best[side_index(side)] = Some(l.price);
                }
            }
            let dt = (seq.messages[i].time.0 - seq.messages[i - 1].time.0) as f64 / Nanos::PER_SECOND as f64;
            for side in [Side::Bid, Side::Ask] {
                let Some(opp) = last_best[side_index(side.opposite())] else { continue };
                for l in before.side(side).iter().flatten() {
                    let k = relative_level(side, l.price, opp, tick);
                    if k >= 1 && (k as usize) <= levels {
                        exposure[side_index(side)][k as usize - 1] += dt * l.size as f64;
                    }
                }
            }
            let m = &seq.messages[i];
            let s = side_index(m.side);
            let level_of = |m: &Message| {
                last_best[side_index(m.side.opposite())]
                    .map(|opp| relative_level(m.side, m.price, opp, tick))
                    .filter(|&k| k >= 1 && (k as usize) <= levels)
            };
            match m.event {
                EventType::NewLimit => {
                    limit_sizes.push(m.size);
                    if let Some(k) = level_of(m) {
                        limit[s][k as usize - 1] += 1.0;
                    }
                }
                EventType::PartialCancel | EventType::Delete => {
                    if let Some(k) = level_of(m) {
                        cancel[s][k as usize - 1] += 1.0;
                    }
                }
                EventType::ExecuteVisible => match &mut burst {
                    Some((t, side, _)) if *t == m.time && *side == m.side => {
                        *market_sizes.last_mut().unwrap() += m.size;
                    }
                    _ => {
                        burst = Some((m.time, m.side, i));
                        market[s] += 1.0;
                        market_sizes.push(m.size);
                    }
                },
                _ => {}
            }
            if m.event != EventType::ExecuteVisible {
                burst = None;
            }
        }
    }
    if !(span > 0.0) {
        return Err(GeneratorError::ZeroTimeSpan);
    }
    let limit_hist = SizeHistogram::from_samples(&limit_sizes, 100);
    let mean_size = limit_hist.mean().max(1.0);
    let side_rates = |s: usize| SideRates {
        limit: limit[s].iter().map(|c| c / span).collect(),
        cancel: cancel[s]
            .iter()
            .zip(&exposure[s])
            .map(|(c, e)| if *e > 0.0 { c * mean_size / e } else { 0.0 })
            .collect(),
        market: market[s] / span,
    };
    Ok(RateProfile {
        levels,
        bid: side_rates(0),
        ask: side_rates(1),
        limit_sizes: limit_hist,
        market_sizes: SizeHistogram::from_samples(&market_sizes, 100),
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimConfig {
    pub seed: u64,
    pub n_messages: usize,
    pub initial: BookSnapshot,
    pub tick: Price,
    pub start_time: Nanos,
}

impl SimConfig {
    /// Reference setup: ten visible levels around $100.00 (price units of
    /// 1/10000 dollar, one-cent ticks), starting at 09:30.
    pub fn reference(seed: u64, n_messages: usize) -> Self {
        SimConfig {
            seed,
            n_messages,
            initial: reference_initial(10, 1_000_000, 100),
            tick: 100,
            start_time: Nanos::from_secs(34_200),
        }
    }
}

/// Symmetric book with a two-tick spread around `mid`.
pub fn reference_initial(n_levels: usize, mid: Price, tick: Price) -> BookSnapshot {
    let mut snap = BookSnapshot::empty(n_levels);
    for k in 0..n_levels {
        let size = 300 + 100 * k as Qty;
        snap.asks[k] = Some(Level::new(mid + tick * (k as Price + 1), size));
        snap.bids[k] = Some(Level::new(mid - tick * (k as Price + 1), size));
    }
    snap
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOutput {
    pub sequence: SequencePair,
    /// Total event rate in force before each simulated event.
    pub total_rates: Vec<f64>,
    /// Exact waiting time (seconds) before each simulated event.
    pub waits: Vec<f64>,
    /// Events drawn while market orders on an empty side were suspended.
    pub suspended_market_events: usize,
    /// Limit orders dropped for a non-positive price.
    pub dropped_orders: usize,
}

enum Draw {
    Limit(Side, usize),
    Cancel(Side, usize),
    /// Orders resting beyond the tracked levels.
    CancelDeep(Side),
    Market(Side),
}

/// Simulates `n_messages` LOBSTER messages; the book after every message
/// is the matching engine's visible snapshot.
pub fn simulate(profile: &RateProfile, config: &SimConfig) -> Result<SimOutput, GeneratorError> {
    profile.validate()?;
    if config.n_messages == 0 || config.tick <= 0 {
        return Err(GeneratorError::InvalidConfig("n_messages and tick must be positive"));
    }
    let n_levels = config.initial.n_levels();
    if n_levels == 0 {
        return Err(GeneratorError::InvalidConfig("initial snapshot has no levels"));
    }
    config.initial.validate().map_err(|_| GeneratorError::InvalidConfig("initial snapshot is not a valid book"))?;
    let (Some(ask0), Some(bid0)) = (config.initial.best_ask(), config.initial.best_bid()) else {
        return Err(GeneratorError::InvalidConfig("initial snapshot needs both sides"));
    };

    let tick = config.tick;
    let k = profile.levels;
    let mut rng = stats::rng_from(config.seed, "simulate");
    let mut book = OrderBook::from_snapshot(&config.initial);
    let mut last_best = [bid0.price, ask0.price];
    let mut next_id: i64 = 1;
    let mut clock = 0.0f64;

    let mut messages = Vec::with_capacity(config.n_messages);
    let mut books = Vec::with_capacity(config.n_messages);
    let mut out = SimOutput {
        sequence: SequencePair::new("sim", Role::Generated, Vec::new(), Vec::new()).expect("empty pair"),
        total_rates: Vec::new(),
        waits: Vec::new(),
        suspended_market_events: 0,
        dropped_orders: 0,
    };
    let mut weights: Vec<(f64, Draw)> = Vec::with_capacity(4 * k + 2);

    while messages.len() < config.n_messages {
        for side in [Side::Bid, Side::Ask] {
            if let Some(p) = book.best_price(side) {
                last_best[side_index(side)] = p;
            }
        }
        let price_at = |side: Side, level: usize| -> Price {
            let opp = last_best[side_index(side.opposite())];
            match side {
                Side::Bid => opp - tick * level as Price,
                Side::Ask => opp + tick * level as Price,
            }
        };
        weights.clear();
        let mut suspended = false;
        for side in [Side::Bid, Side::Ask] {
            let r = profile.side(side);
            for lvl in 1..=k {
                weights.push((r.limit[lvl - 1], Draw::Limit(side, lvl)));
                let n = book.order_count_at(side, price_at(side, lvl));
                weights.push((r.cancel[lvl - 1] * n as f64, Draw::Cancel(side, lvl)));
            }
            let deep = book.order_count_beyond(side, price_at(side, k));
            weights.push((r.cancel[k - 1] * deep as f64, Draw::CancelDeep(side)));
            if book.is_side_empty(side) {
                suspended |= r.market > 0.0;
            } else {
                weights.push((r.market, Draw::Market(side)));
            }
        }
        let total: f64 = weights.iter().map(|w| w.0).sum();
        if !(total > 0.0) {
            return Err(GeneratorError::InvalidProfile("all event rates are zero in the current state"));
        }
        if suspended {
            out.suspended_market_events += 1;
        }
        let u: f64 = 1.0 - rng.random::<f64>();
        let wait = -math::ln(u) / total;
        clock += wait;
        out.total_rates.push(total);
        out.waits.push(wait);
        let time = Nanos(config.start_time.0 + math::round(clock * Nanos::PER_SECOND as f64) as i64);

        let mut pick = rng.random::<f64>() * total;
        let mut chosen = weights.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if pick < w.0 {
                chosen = i;
                break;
            }
            pick -= w.0;
        }
        // skip zero-weight entries the rounding fallback might land on
        while weights[chosen].0 <= 0.0 && chosen > 0 {
            chosen -= 1;
        }

        let mut emit = |msg: Message, book: &mut OrderBook| {
            book.apply_message(&msg).expect("simulator messages are consistent with its book");
            messages.push(msg);
            books.push(book.snapshot(n_levels));
        };
        match weights[chosen].1 {
            Draw::Limit(side, lvl) => {
                let price = price_at(side, lvl);
                if price <= 0 {
                    out.dropped_orders += 1;
                    continue;
                }
                let size = profile.limit_sizes.sample(&mut rng);
                let msg = Message::new(time, EventType::NewLimit, next_id, size, price, side);
                next_id += 1;
                emit(msg, &mut book);
            }
            Draw::Cancel(side, lvl) => {
                let price = price_at(side, lvl);
                let n = book.order_count_at(side, price);
                let pick = rng.random_range(0..n);
                let target = *book.orders_at(side, price).nth(pick).expect("order exists");
                let msg = Message::new(time, EventType::Delete, target.order_id, target.size, price, side);
                emit(msg, &mut book);
            }
            Draw::CancelDeep(side) => {
                let n = book.order_count_beyond(side, price_at(side, k));
                let (price, target) =
                    book.nth_order_beyond(side, price_at(side, k), rng.random_range(0..n)).expect("order exists");
                let msg = Message::new(time, EventType::Delete, target.order_id, target.size, price, side);
                emit(msg, &mut book);
            }
            Draw::Market(side) => {
                let price = book.best_price(side).expect("side not empty");
                let mut remaining = profile.market_sizes.sample(&mut rng);
                let queue: Vec<_> = book.orders_at(side, price).copied().collect();
                for order in queue {
                    if remaining == 0 {
                        break;
                    }
                    let fill = remaining.min(order.size);
                    remaining -= fill;
                    let msg = Message::new(time, EventType::ExecuteVisible, order.order_id, fill, price, side);
                    emit(msg, &mut book);
                }
            }
        }
    }
    messages.truncate(config.n_messages);
    books.truncate(config.n_messages);
    out.sequence = SequencePair::new(alloc::format!("sim_{}", config.seed), Role::Generated, messages, books)
        .expect("aligned by construction");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::replay;

    #[test]
    fn deterministic_and_replayable() {
        let cfg = SimConfig::reference(7, 3000);
        let a = simulate(&RateProfile::reference(), &cfg).unwrap();
        let b = simulate(&RateProfile::reference(), &cfg).unwrap();
        assert_eq!(a.sequence, b.sequence);
        assert_eq!(a.sequence.len(), 3000);
        let r = replay(&cfg.initial, &a.sequence.messages);
        assert_eq!(r.inconsistencies, 0);
        assert_eq!(r.snapshots, a.sequence.books);
        for (w, m) in a.sequence.messages.windows(2).zip(0..) {
            assert!(w[0].time <= w[1].time, "time goes backwards at {m}");
        }
        for b in &a.sequence.books {
            b.validate().unwrap();
        }
    }

    #[test]
    fn no_market_orders_when_rate_is_zero() {
        let p = perturb(&RateProfile::reference(), Knob::Market, 0.0).unwrap();
        let out = simulate(&p, &SimConfig::reference(1, 2000)).unwrap();
        assert!(out.sequence.messages.iter().all(|m| m.event != EventType::ExecuteVisible));
    }

    #[test]
    fn perturb_rules() {
        let p = RateProfile::reference();
        assert_eq!(perturb(&p, Knob::Cancel, 1.0).unwrap(), p);
        let d = perturb(&p, Knob::Limit, 2.0).unwrap();
        assert_eq!(d.bid.limit[0], 3.7);
        assert_eq!(d.ask.cancel, p.ask.cancel);
        assert!(perturb(&p, Knob::Limit, -1.0).is_err());
        assert!("volume".parse::<Knob>().is_err());
        assert_eq!("cancel".parse::<Knob>().unwrap(), Knob::Cancel);
    }

    #[test]
    fn estimate_counts_over_time() {
        // 100 limit orders one tick below a fixed ask over 50 seconds
        let mut snap = BookSnapshot::empty(1);
        snap.asks[0] = Some(Level::new(10_100, 100));
        snap.bids[0] = Some(Level::new(9_900, 100));
        let mut messages = Vec::new();
        let mut books = Vec::new();
        let mut book = OrderBook::from_snapshot(&snap);
        // one clock-starting message at t=0, then 100 level-1 bids
        for i in 0..=100 {
            let m = Message::new(Nanos(i * 500_000_000), EventType::NewLimit, i + 1, 100, 10_000, Side::Bid);
            book.apply_message(&m).unwrap();
            messages.push(m);
            books.push(book.snapshot(1));
        }
        let seq = SequencePair::new("s", Role::Real, messages, books).unwrap();
        let p = estimate_rates(core::slice::from_ref(&seq), 3, 100).unwrap();
        assert!((p.bid.limit[0] - 2.0).abs() < 1e-12);
        assert_eq!(p.ask.market, 0.0);
        assert_eq!(p.bid.market, 0.0);
        let m = estimate_rates(&[seq.mirrored(20_000)], 3, 100).unwrap();
        assert_eq!(m.ask.limit, p.bid.limit);
        assert_eq!(m.bid.limit, p.ask.limit);
    }

    #[test]
    fn zero_span_is_error() {
        let seq = SequencePair::new("s", Role::Real, Vec::new(), Vec::new()).unwrap();
        assert_eq!(estimate_rates(&[seq], 3, 100), Err(GeneratorError::ZeroTimeSpan));
    }
}
