//! Book-state deltas as discriminator input.

use alloc::vec::Vec;

use crate::types::{BookSnapshot, Level, Price, Side};

/// One step of the delta representation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeltaStep {
    /// Mid change in ticks (half ticks possible).
    pub mid_change: f64,
    /// `+k` for ask level `k`, `-k` for bid level `k`, 0 when nothing changed.
    pub rel_level: i32,
    pub qty_change: i64,
}

impl DeltaStep {
    pub fn channels(&self) -> [f64; 3] {
        [self.mid_change, f64::from(self.rel_level), self.qty_change as f64]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Encoding {
    pub steps: Vec<DeltaStep>,
    /// Steps where more than one visible level changed.
    pub multi_changes: usize,
}

fn side_changes(before: &[Option<Level>], after: &[Option<Level>], side: Side, out: &mut Vec<(i32, i64)>) {
    let sign = if side == Side::Ask { 1 } else { -1 };
    // worse prices compare greater after this flip
    let key = |p: Price| if side == Side::Ask { p } else { -p };
    let full = |levels: &[Option<Level>]| levels.iter().all(Option::is_some);
    let worst = |levels: &[Option<Level>]| levels.iter().flatten().last().map(|l| key(l.price));
    let (wb, wa) = (worst(before), worst(after));
    let (fb, fa) = (full(before), full(after));

    for (k, lvl) in after.iter().enumerate() {
        let Some(l) = lvl else { continue };
        match before.iter().flatten().find(|b| b.price == l.price) {
            Some(b) if b.size != l.size => out.push((sign * (k as i32 + 1), l.size as i64 - b.size as i64)),
            Some(_) => {}
            None => {
                // scrolled into view from beyond the old window
                if fb && wb.is_some_and(|w| key(l.price) > w) {
                    continue;
                }
                out.push((sign * (k as i32 + 1), l.size as i64));
            }
        }
    }
    for (k, lvl) in before.iter().enumerate() {
        let Some(b) = lvl else { continue };
        if after.iter().flatten().any(|a| a.price == b.price) {
            continue;
        }
        // scrolled out of view
        if fa && wa.is_some_and(|w| key(b.price) > w) {
            continue;
        }
        out.push((sign * (k as i32 + 1), -(b.size as i64)));
    }
}

/// Delta between two consecutive snapshots, plus the number of visible
/// level changes found.
pub fn diff(before: &BookSnapshot, after: &BookSnapshot, tick: Price) -> (DeltaStep, usize) {
    let mid_change = match (before.mid_x2(), after.mid_x2()) {
        (Some(a), Some(b)) => (b - a) as f64 / (2 * tick) as f64,
        _ => 0.0,
    };
    let mut changes = Vec::new();
    side_changes(&before.asks, &after.asks, Side::Ask, &mut changes);
    side_changes(&before.bids, &after.bids, Side::Bid, &mut changes);
    let mut best: Option<(i32, i64)> = None;
    for &c in &changes {
        if best.is_none_or(|b| c.1.abs() > b.1.abs()) {
            best = Some(c);
        }
    }
    let (rel_level, qty_change) = best.unwrap_or((0, 0));
    (DeltaStep { mid_change, rel_level, qty_change }, changes.len())
}

/// `books.len() - 1` delta steps.
pub fn encode(books: &[BookSnapshot], tick: Price) -> Encoding {
    let mut enc = Encoding::default();
    for w in books.windows(2) {
        let (step, n) = diff(&w[0], &w[1], tick);
        if n > 1 {
            enc.multi_changes += 1;
        }
        enc.steps.push(step);
    }
    enc
}

/// Splits steps into consecutive windows of exactly `len` steps; the last
/// partial window is zero-padded when it holds at least half a window and
/// dropped otherwise.
pub fn windows(steps: &[DeltaStep], len: usize) -> Vec<Vec<DeltaStep>> {
    let mut out = Vec::new();
    for chunk in steps.chunks(len) {
        if chunk.len() == len {
            out.push(chunk.to_vec());
        } else if 2 * chunk.len() >= len {
            let mut w = chunk.to_vec();
            w.resize(len, DeltaStep::default());
            out.push(w);
        }
    }
    out
}

/// Pads with zero steps or truncates to exactly `len` steps.
pub fn fit_window(steps: &[DeltaStep], len: usize) -> Vec<DeltaStep> {
    let mut w: Vec<DeltaStep> = steps.iter().take(len).copied().collect();
    w.resize(len, DeltaStep::default());
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn snap(asks: &[(Price, u64)], bids: &[(Price, u64)], n: usize) -> BookSnapshot {
        let fill = |v: &[(Price, u64)]| {
            let mut out: Vec<Option<Level>> = v.iter().map(|&(p, s)| Some(Level::new(p, s))).collect();
            out.resize(n, None);
            out
        };
        BookSnapshot { asks: fill(asks), bids: fill(bids) }
    }

    #[test]
    fn single_change_examples() {
        let a = snap(&[(1010, 5)], &[(1000, 4)], 2);
        assert_eq!(diff(&a, &a, 10).0, DeltaStep::default());
        let b = snap(&[(1010, 3)], &[(1000, 4)], 2);
        assert_eq!(diff(&a, &b, 10).0, DeltaStep { mid_change: 0.0, rel_level: 1, qty_change: -2 });
        let c = snap(&[(1020, 5)], &[(1010, 7), (1000, 4)], 2);
        let a2 = snap(&[(1020, 5)], &[(1000, 4)], 2);
        assert_eq!(diff(&a2, &c, 10).0, DeltaStep { mid_change: 0.5, rel_level: -1, qty_change: 7 });
    }

    #[test]
    fn window_scrolling_is_ignored() {
        // a bid at 1010 pushes 990 out of a two-level window
        let before = snap(&[(1020, 5)], &[(1000, 4), (990, 6)], 2);
        let after = snap(&[(1020, 5)], &[(1010, 2), (1000, 4)], 2);
        let (step, n) = diff(&before, &after, 10);
        assert_eq!(n, 1);
        assert_eq!(step.qty_change, 2);
        // and 990 scrolling back in when 1010 is cancelled
        let (step, n) = diff(&after, &before, 10);
        assert_eq!(n, 1);
        assert_eq!((step.rel_level, step.qty_change), (-1, -2));
    }

    #[test]
    fn multi_change_keeps_largest() {
        let a = snap(&[(1010, 5), (1020, 5)], &[(1000, 4)], 2);
        let b = snap(&[(1010, 4), (1020, 15)], &[(1000, 4)], 2);
        let enc = encode(&[a.clone(), b, a], 10);
        assert_eq!(enc.steps.len(), 2);
        assert_eq!(enc.multi_changes, 2);
        assert_eq!((enc.steps[0].rel_level, enc.steps[0].qty_change), (2, 10));
    }

    #[test]
    fn windows_pad_and_drop() {
        let s = vec![DeltaStep { mid_change: 1.0, rel_level: 1, qty_change: 1 }; 25];
        assert_eq!(windows(&s, 10).len(), 3);
        assert_eq!(windows(&s, 12).len(), 2);
        assert_eq!(windows(&s, 20).len(), 1);
        assert_eq!(windows(&s, 40).len(), 1);
        assert_eq!(fit_window(&s, 30)[29], DeltaStep::default());
    }
}
