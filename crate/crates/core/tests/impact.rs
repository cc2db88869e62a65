use lobbench_core::book::replay;
use lobbench_core::generator::{simulate, RateProfile, SimConfig};
use lobbench_core::impact::{
    classify_events, delta_r, epsilon, lag_grid, response_functions, EventClass, OrderKind, ResponseCurve,
};
use lobbench_core::{BookSnapshot, EventType, Level, Message, Nanos, Role, SequencePair, Side};

#[test]
fn epsilon_table() {
    assert_eq!(epsilon(OrderKind::Market, 1), 1);
    assert_eq!(epsilon(OrderKind::Market, -1), -1);
    assert_eq!(epsilon(OrderKind::Limit, 1), 1);
    assert_eq!(epsilon(OrderKind::Limit, -1), -1);
    assert_eq!(epsilon(OrderKind::Cancel, 1), -1);
    assert_eq!(epsilon(OrderKind::Cancel, -1), 1);
}

#[test]
fn default_lag_grid() {
    let g = lag_grid(200, 20);
    assert_eq!(g[0], 1);
    assert_eq!(*g.last().unwrap(), 200);
    assert!(g.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(lag_grid(1, 5), vec![1]);
}

/// One bid limit order that lifts the mid by a tick, followed by touch
/// events that leave the mid alone.
fn single_lo1_sequence(followers: usize) -> (BookSnapshot, SequencePair) {
    let mut initial = BookSnapshot::empty(5);
    for k in 0..5 {
        initial.bids[k] = Some(Level::new(9900 - 100 * k as i64, 100));
        initial.asks[k] = Some(Level::new(10200 + 100 * k as i64, 100));
    }
    let mut messages = vec![Message::new(Nanos(0), EventType::NewLimit, 1, 100, 10100, Side::Bid)];
    for i in 0..followers {
        let side = if i % 2 == 0 { Side::Ask } else { Side::Bid };
        let price = if side == Side::Ask { 10200 } else { 10100 };
        messages.push(Message::new(Nanos(1 + i as i64), EventType::NewLimit, 2 + i as i64, 100, price, side));
    }
    let r = replay(&initial, &messages);
    assert_eq!(r.inconsistencies, 0);
    let seq = SequencePair::new("lo1", Role::Real, messages, r.snapshots).unwrap();
    (initial, seq)
}

#[test]
fn single_lo1_event_has_unit_response() {
    let (initial, seq) = single_lo1_sequence(250);
    let events = classify_events(&seq, Some(&initial), 100);
    assert_eq!(events[0].class, EventClass::Lo1);
    assert!(events[1..].iter().all(|e| e.class == EventClass::Lo0));
    let lags = lag_grid(200, 20);
    let curves = response_functions(&[events], &lags);
    let lo1 = curves.iter().find(|c| c.class == EventClass::Lo1).unwrap();
    assert_eq!(lo1.lags, lags);
    assert!(lo1.values.iter().all(|&v| v == 1.0), "{:?}", lo1.values);
    let lo0 = curves.iter().find(|c| c.class == EventClass::Lo0).unwrap();
    assert!(lo0.values.iter().all(|&v| v == 0.0));
}

#[test]
fn mirrored_stream_has_same_response() {
    let sim = simulate(&RateProfile::reference(), &SimConfig::reference(11, 20_000)).unwrap();
    let seq = sim.sequence;
    let pivot = 2_000_000;
    let mirror = seq.mirrored(pivot);
    let lags = lag_grid(200, 20);
    let a = response_functions(&[classify_events(&seq, None, 100)], &lags);
    let b = response_functions(&[classify_events(&mirror, None, 100)], &lags);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.class, y.class);
        assert_eq!(x.counts, y.counts);
        for (u, v) in x.values.iter().zip(&y.values) {
            assert!((u - v).abs() < 1e-12, "{:?}: {u} vs {v}", x.class);
        }
    }
    assert_eq!(delta_r(&a, &a).total, Some(0.0));
    let d = delta_r(&a, &b);
    assert!(d.total.unwrap() < 1e-12);
}

fn curve(class: EventClass, values: &[f64]) -> ResponseCurve {
    ResponseCurve {
        class,
        lags: (1..=values.len() as u32).collect(),
        values: values.to_vec(),
        counts: vec![1; values.len()],
        ci: values.iter().map(|&v| (v, v)).collect(),
    }
}

#[test]
fn delta_r_symmetric_and_offset() {
    let base: Vec<ResponseCurve> =
        EventClass::ALL.iter().enumerate().map(|(i, &c)| curve(c, &[0.1 * i as f64, 0.5, -0.3])).collect();
    let shifted: Vec<ResponseCurve> = base
        .iter()
        .map(|c| curve(c.class, &c.values.iter().map(|v| v + 0.25).collect::<Vec<_>>()))
        .collect();
    let ab = delta_r(&base, &shifted);
    let ba = delta_r(&shifted, &base);
    assert_eq!(ab, ba);
    for c in &ab.per_class {
        assert!((c.value.unwrap() - 0.25).abs() < 1e-12);
    }
    assert!((ab.total.unwrap() - 0.25).abs() < 1e-12);
}
