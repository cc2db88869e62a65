//! Price-time-priority limit order book.
//!
//! Each side maps price to a FIFO queue of resting orders. Messages are
//! validated before any mutation, so a rejected message leaves the book
//! untouched; [`replay`] relies on that to degrade gracefully on data the
//! engine cannot reconcile.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

use thiserror::Error;

use crate::types::{BookSnapshot, EventType, Level, Message, Price, Qty, Side};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RestingOrder {
    pub order_id: i64,
    pub size: Qty,
    pub entry_seq: u64,
}

#[derive(Clone, Debug, Default)]
struct PriceLevel {
    orders: VecDeque<RestingOrder>,
    total: Qty,
}

/// Inconsistencies between a message and the current book. `index` is the
/// 0-based position of the offending message in the stream applied to
/// this book.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BookError {
    #[error("message {index}: unknown order id {order_id}")]
    UnknownOrder { index: u64, order_id: i64 },
    #[error("message {index}: order {order_id} rests at {resting:?} {resting_price}, message says {side:?} {price}")]
    OrderMismatch {
        index: u64,
        order_id: i64,
        resting: Side,
        resting_price: Price,
        side: Side,
        price: Price,
    },
    #[error("message {index}: duplicate order id {order_id}")]
    DuplicateOrder { index: u64, order_id: i64 },
    #[error("message {index}: non-positive size or price")]
    InvalidOrder { index: u64 },
    #[error("message {index}: execution of {size} exceeds resting size {resting} of order {order_id}")]
    Overfill { index: u64, order_id: i64, size: Qty, resting: Qty },
}

/// Signed size change at one price level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BookEffect {
    pub side: Side,
    pub price: Price,
    pub size_delta: i64,
}

/// Result of applying one message.
#[derive(Clone, Debug, PartialEq)]
pub struct ApplyOutcome {
    pub effects: Vec<BookEffect>,
    pub mid_before: Option<f64>,
    pub mid_after: Option<f64>,
    /// A partial cancel at or above the resting size was applied as a delete.
    pub cancel_promoted: bool,
}

#[derive(Clone, Debug, Default)]
pub struct OrderBook {
    bids: BTreeMap<Price, PriceLevel>,
    asks: BTreeMap<Price, PriceLevel>,
    index: BTreeMap<i64, (Side, Price)>,
    next_seq: u64,
    applied: u64,
}

impl OrderBook {
    pub fn new() -> Self {
        Self::default()
    }

    /// Order id of the synthetic order seeding `level` (0-based) on `side`.
    /// Seeded ids live in the negative range so they never collide with
    /// exchange ids.
    pub fn seed_order_id(side: Side, level: usize) -> i64 {
        let k = level as i64;
        match side {
            Side::Ask => -(2 * k + 1),
            Side::Bid => -(2 * k + 2),
        }
    }

    /// Book holding one aggregate resting order per visible level.
    pub fn from_snapshot(snapshot: &BookSnapshot) -> Self {
        let mut book = OrderBook::new();
        for side in [Side::Ask, Side::Bid] {
            for (k, lvl) in snapshot.side(side).iter().enumerate() {
                if let Some(l) = lvl {
                    if l.size > 0 {
                        book.insert_resting(side, l.price, Self::seed_order_id(side, k), l.size);
                    }
                }
            }
        }
        book
    }

    fn levels(&self, side: Side) -> &BTreeMap<Price, PriceLevel> {
        match side {
            Side::Bid => &self.bids,
            Side::Ask => &self.asks,
        }
    }

    fn levels_mut(&mut self, side: Side) -> &mut BTreeMap<Price, PriceLevel> {
        match side {
            Side::Bid => &mut self.bids,
            Side::Ask => &mut self.asks,
        }
    }

    pub fn best_price(&self, side: Side) -> Option<Price> {
        match side {
            Side::Bid => self.bids.keys().next_back().copied(),
            Side::Ask => self.asks.keys().next().copied(),
        }
    }

    pub fn best(&self, side: Side) -> Option<Level> {
        let p = self.best_price(side)?;
        Some(Level::new(p, self.levels(side)[&p].total))
    }

    pub fn mid(&self) -> Option<f64> {
        match (self.best_price(Side::Ask), self.best_price(Side::Bid)) {
            (Some(a), Some(b)) => Some((a + b) as f64 / 2.0),
            _ => None,
        }
    }

    /// Resting orders at `price`, front of queue first.
    pub fn orders_at(&self, side: Side, price: Price) -> impl Iterator<Item = &RestingOrder> {
        self.levels(side).get(&price).into_iter().flat_map(|l| l.orders.iter())
    }

    pub fn order_count_at(&self, side: Side, price: Price) -> usize {
        self.levels(side).get(&price).map_or(0, |l| l.orders.len())
    }

    /// Resting orders at prices strictly worse than `price`.
    pub fn order_count_beyond(&self, side: Side, price: Price) -> usize {
        let mut n = 0;
        self.find_beyond(side, price, |_, l| {
            n += l.orders.len();
            None::<()>
        });
        n
    }

    /// The `n`-th resting order (best price first, queue order within a
    /// price) among those strictly worse than `price`.
    pub fn nth_order_beyond(&self, side: Side, price: Price, n: usize) -> Option<(Price, RestingOrder)> {
        let mut n = n;
        self.find_beyond(side, price, |p, l| {
            if n < l.orders.len() {
                return Some((p, l.orders[n]));
            }
            n -= l.orders.len();
            None
        })
    }

    fn find_beyond<R>(&self, side: Side, price: Price, mut f: impl FnMut(Price, &PriceLevel) -> Option<R>) -> Option<R> {
        match side {
            Side::Bid => self.bids.range(..price).rev().find_map(|(&p, l)| f(p, l)),
            Side::Ask => self.asks.range(price.saturating_add(1)..).find_map(|(&p, l)| f(p, l)),
        }
    }

    pub fn level_volume(&self, side: Side, price: Price) -> Qty {
        self.levels(side).get(&price).map_or(0, |l| l.total)
    }

    pub fn side_volume(&self, side: Side) -> Qty {
        self.levels(side).values().map(|l| l.total).sum()
    }

    pub fn is_side_empty(&self, side: Side) -> bool {
        self.levels(side).is_empty()
    }

    /// Where an order rests, if it does.
    pub fn locate(&self, order_id: i64) -> Option<(Side, Price)> {
        self.index.get(&order_id).copied()
    }

    pub fn resting_size(&self, order_id: i64) -> Option<Qty> {
        let (side, price) = self.locate(order_id)?;
        self.orders_at(side, price).find(|o| o.order_id == order_id).map(|o| o.size)
    }

    pub fn messages_applied(&self) -> u64 {
        self.applied
    }

    fn insert_resting(&mut self, side: Side, price: Price, order_id: i64, size: Qty) {
        let entry_seq = self.next_seq;
        self.next_seq += 1;
        let level = self.levels_mut(side).entry(price).or_default();
        level.orders.push_back(RestingOrder { order_id, size, entry_seq });
        level.total += size;
        self.index.insert(order_id, (side, price));
    }

    /// Reduces (or removes, when `amount >= size`) a located order.
    fn reduce(&mut self, side: Side, price: Price, order_id: i64, amount: Qty) -> Qty {
        let levels = self.levels_mut(side);
        let level = levels.get_mut(&price).expect("indexed level exists");
        let pos = level
            .orders
            .iter()
            .position(|o| o.order_id == order_id)
            .expect("indexed order exists");
        let order = &mut level.orders[pos];
        let taken = amount.min(order.size);
        order.size -= taken;
        level.total -= taken;
        if order.size == 0 {
            level.orders.remove(pos);
        }
        let level_empty = level.orders.is_empty();
        if level_empty {
            levels.remove(&price);
        }
        if self.resting_size_fast(side, price, order_id).is_none() {
            self.index.remove(&order_id);
        }
        taken
    }

    fn resting_size_fast(&self, side: Side, price: Price, order_id: i64) -> Option<Qty> {
        self.levels(side)
            .get(&price)?
            .orders
            .iter()
            .find(|o| o.order_id == order_id)
            .map(|o| o.size)
    }

    fn check_resting(&self, msg: &Message, index: u64) -> Result<Qty, BookError> {
        let (side, price) = self
            .locate(msg.order_id)
            .ok_or(BookError::UnknownOrder { index, order_id: msg.order_id })?;
        if side != msg.side || price != msg.price {
            return Err(BookError::OrderMismatch {
                index,
                order_id: msg.order_id,
                resting: side,
                resting_price: price,
                side: msg.side,
                price: msg.price,
            });
        }
        Ok(self.resting_size_fast(side, price, msg.order_id).unwrap_or(0))
    }

    /// Applies one LOBSTER message. On error the book is unchanged.
    pub fn apply_message(&mut self, msg: &Message) -> Result<ApplyOutcome, BookError> {
        let index = self.applied;
        let mid_before = self.mid();
        let mut effects = Vec::new();
        let mut cancel_promoted = false;
        match msg.event {
            EventType::NewLimit => {
                if msg.size == 0 || msg.price <= 0 {
                    return Err(BookError::InvalidOrder { index });
                }
                if self.index.contains_key(&msg.order_id) {
                    return Err(BookError::DuplicateOrder { index, order_id: msg.order_id });
                }
                let remaining = self.match_incoming(msg.side, msg.price, msg.size, &mut effects);
                if remaining > 0 {
                    self.insert_resting(msg.side, msg.price, msg.order_id, remaining);
                    effects.push(BookEffect {
                        side: msg.side,
                        price: msg.price,
                        size_delta: remaining as i64,
                    });
                }
            }
            EventType::PartialCancel => {
                let resting = self.check_resting(msg, index)?;
                let amount = if msg.size >= resting {
                    cancel_promoted = true;
                    resting
                } else {
                    msg.size
                };
                let taken = self.reduce(msg.side, msg.price, msg.order_id, amount);
                effects.push(BookEffect { side: msg.side, price: msg.price, size_delta: -(taken as i64) });
            }
            EventType::Delete => {
                let resting = self.check_resting(msg, index)?;
                let taken = self.reduce(msg.side, msg.price, msg.order_id, resting);
                effects.push(BookEffect { side: msg.side, price: msg.price, size_delta: -(taken as i64) });
            }
            EventType::ExecuteVisible => {
                let resting = self.check_resting(msg, index)?;
                if msg.size > resting {
                    return Err(BookError::Overfill {
                        index,
                        order_id: msg.order_id,
                        size: msg.size,
                        resting,
                    });
                }
                let taken = self.reduce(msg.side, msg.price, msg.order_id, msg.size);
                effects.push(BookEffect { side: msg.side, price: msg.price, size_delta: -(taken as i64) });
            }
            // Hidden executions, crosses and halts do not touch visible liquidity.
            EventType::ExecuteHidden | EventType::Cross | EventType::Halt => {}
        }
        self.applied += 1;
        Ok(ApplyOutcome { effects, mid_before, mid_after: self.mid(), cancel_promoted })
    }

    /// Matches an incoming order against the opposite side; returns the
    /// unfilled remainder.
    fn match_incoming(
        &mut self,
        side: Side,
        limit: Price,
        mut remaining: Qty,
        effects: &mut Vec<BookEffect>,
    ) -> Qty {
        let contra = side.opposite();
        while remaining > 0 {
            let Some(best) = self.best_price(contra) else { break };
            let crosses = match side {
                Side::Bid => best <= limit,
                Side::Ask => best >= limit,
            };
            if !crosses {
                break;
            }
            let front = self.levels(contra)[&best].orders[0];
            let fill = remaining.min(front.size);
            self.reduce(contra, best, front.order_id, fill);
            remaining -= fill;
            effects.push(BookEffect { side: contra, price: best, size_delta: -(fill as i64) });
        }
        remaining
    }

    /// Top-n snapshot; missing levels are `None`.
    pub fn snapshot(&self, n_levels: usize) -> BookSnapshot {
        let mut snap = BookSnapshot::empty(n_levels);
        for (slot, (p, l)) in snap.asks.iter_mut().zip(self.asks.iter()) {
            *slot = Some(Level::new(*p, l.total));
        }
        for (slot, (p, l)) in snap.bids.iter_mut().zip(self.bids.iter().rev()) {
            *slot = Some(Level::new(*p, l.total));
        }
        snap
    }
}

/// Snapshots produced by [`replay`] plus the count of rejected messages.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayOutput {
    pub snapshots: Vec<BookSnapshot>,
    pub inconsistencies: usize,
}

/// Replays `messages` on a book seeded from `initial`. Rejected messages
/// leave the book unchanged and are counted, never fatal.
pub fn replay(initial: &BookSnapshot, messages: &[Message]) -> ReplayOutput {
    let n = initial.n_levels();
    let mut book = OrderBook::from_snapshot(initial);
    let mut snapshots = Vec::with_capacity(messages.len());
    let mut inconsistencies = 0;
    for msg in messages {
        if book.apply_message(msg).is_err() {
            inconsistencies += 1;
            // keep the message counter aligned with stream positions
            book.applied += 1;
        }
        snapshots.push(book.snapshot(n));
    }
    ReplayOutput { snapshots, inconsistencies }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Nanos;

    fn msg(event: EventType, id: i64, size: Qty, price: Price, side: Side) -> Message {
        Message::new(Nanos(0), event, id, size, price, side)
    }

    #[test]
    fn new_limit_on_empty_book() {
        let mut book = OrderBook::new();
        book.apply_message(&msg(EventType::NewLimit, 1, 100, 10000, Side::Bid)).unwrap();
        assert_eq!(book.best(Side::Bid), Some(Level::new(10000, 100)));
        assert_eq!(book.best(Side::Ask), None);
    }

    #[test]
    fn execution_consumes_fifo_front() {
        let mut book = OrderBook::new();
        book.apply_message(&msg(EventType::NewLimit, 1, 10, 10100, Side::Ask)).unwrap();
        book.apply_message(&msg(EventType::NewLimit, 2, 20, 10100, Side::Ask)).unwrap();
        book.apply_message(&msg(EventType::ExecuteVisible, 1, 10, 10100, Side::Ask)).unwrap();
        let ids: Vec<i64> = book.orders_at(Side::Ask, 10100).map(|o| o.order_id).collect();
        assert_eq!(ids, [2]);
        assert_eq!(book.best(Side::Ask), Some(Level::new(10100, 20)));
        assert_eq!(book.locate(1), None);
    }

    #[test]
    fn partial_cancel_keeps_queue_position() {
        let mut book = OrderBook::new();
        book.apply_message(&msg(EventType::NewLimit, 1, 20, 10000, Side::Bid)).unwrap();
        book.apply_message(&msg(EventType::NewLimit, 2, 30, 10000, Side::Bid)).unwrap();
        let out = book.apply_message(&msg(EventType::PartialCancel, 1, 5, 10000, Side::Bid)).unwrap();
        assert!(!out.cancel_promoted);
        let q: Vec<(i64, Qty)> =
            book.orders_at(Side::Bid, 10000).map(|o| (o.order_id, o.size)).collect();
        assert_eq!(q, [(1, 15), (2, 30)]);
    }

    #[test]
    fn oversized_partial_cancel_acts_as_delete() {
        let mut book = OrderBook::new();
        book.apply_message(&msg(EventType::NewLimit, 1, 20, 10000, Side::Bid)).unwrap();
        let out = book.apply_message(&msg(EventType::PartialCancel, 1, 25, 10000, Side::Bid)).unwrap();
        assert!(out.cancel_promoted);
        assert_eq!(out.effects[0].size_delta, -20);
        assert!(book.is_side_empty(Side::Bid));
    }

    #[test]
    fn unknown_order_leaves_book_unchanged() {
        let mut book = OrderBook::new();
        book.apply_message(&msg(EventType::NewLimit, 1, 20, 10000, Side::Bid)).unwrap();
        let before = book.snapshot(5);
        let err = book.apply_message(&msg(EventType::Delete, 9, 20, 10000, Side::Bid));
        assert_eq!(err, Err(BookError::UnknownOrder { index: 1, order_id: 9 }));
        assert_eq!(book.snapshot(5), before);
    }

    #[test]
    fn marketable_limit_executes_then_rests() {
        let mut book = OrderBook::new();
        book.apply_message(&msg(EventType::NewLimit, 1, 10, 10100, Side::Ask)).unwrap();
        book.apply_message(&msg(EventType::NewLimit, 2, 10, 10200, Side::Ask)).unwrap();
        let out = book.apply_message(&msg(EventType::NewLimit, 3, 25, 10100, Side::Bid)).unwrap();
        let moved: i64 = out.effects.iter().map(|e| e.size_delta.abs()).sum();
        assert_eq!(moved, 25);
        assert_eq!(book.best(Side::Bid), Some(Level::new(10100, 15)));
        assert_eq!(book.best(Side::Ask), Some(Level::new(10200, 10)));
    }

    #[test]
    fn hidden_events_are_no_ops() {
        let mut book = OrderBook::new();
        book.apply_message(&msg(EventType::NewLimit, 1, 10, 10100, Side::Ask)).unwrap();
        for ev in [EventType::ExecuteHidden, EventType::Cross, EventType::Halt] {
            let out = book.apply_message(&msg(ev, 0, 5, 10100, Side::Ask)).unwrap();
            assert!(out.effects.is_empty());
            assert_eq!(out.mid_before, out.mid_after);
        }
        assert_eq!(book.best(Side::Ask), Some(Level::new(10100, 10)));
    }

    #[test]
    fn snapshot_levels() {
        let book = OrderBook::new();
        assert_eq!(book.snapshot(3), BookSnapshot::empty(3));
        let mut book = OrderBook::new();
        book.apply_message(&msg(EventType::NewLimit, 1, 5, 10000, Side::Bid)).unwrap();
        let s = book.snapshot(3);
        assert_eq!(s.bids, [Some(Level::new(10000, 5)), None, None]);
        let mut book = OrderBook::new();
        for k in 0..12 {
            book.apply_message(&msg(EventType::NewLimit, k + 1, 1, 10100 + 100 * k, Side::Ask))
                .unwrap();
        }
        let s = book.snapshot(10);
        assert_eq!(s.asks.iter().flatten().count(), 10);
        assert_eq!(s.asks[9].unwrap().price, 10100 + 900);
    }

    #[test]
    fn replay_counts_inconsistencies() {
        let mut initial = BookSnapshot::empty(2);
        initial.asks[0] = Some(Level::new(10100, 10));
        initial.bids[0] = Some(Level::new(10000, 10));
        assert!(replay(&initial, &[]).snapshots.is_empty());
        let msgs = [
            msg(EventType::Delete, 77, 10, 10000, Side::Bid),
            msg(EventType::PartialCancel, OrderBook::seed_order_id(Side::Bid, 0), 4, 10000, Side::Bid),
        ];
        let out = replay(&initial, &msgs);
        assert_eq!(out.inconsistencies, 1);
        assert_eq!(out.snapshots[0], initial);
        assert_eq!(out.snapshots[1].best_bid(), Some(Level::new(10000, 6)));
    }
}
