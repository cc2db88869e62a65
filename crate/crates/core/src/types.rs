//! Domain types shared by every module: LOBSTER messages, top-n book
//! snapshots, aligned message/book sequences and dataset bundles.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

/// Integer price units (dollars x 10000, LOBSTER convention).
pub type Price = i64;
/// Share quantity.
pub type Qty = u64;

/// Nanoseconds after midnight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Nanos(pub i64);

impl Nanos {
    pub const PER_SECOND: i64 = 1_000_000_000;

    pub fn from_secs(secs: i64) -> Self {
        Nanos(secs * Self::PER_SECOND)
    }

    pub fn as_secs_f64(self) -> f64 {
        let whole = self.0.div_euclid(Self::PER_SECOND) as f64;
        let frac = self.0.rem_euclid(Self::PER_SECOND) as f64 / Self::PER_SECOND as f64;
        whole + frac
    }

    /// Whole seconds after midnight (floor).
    pub fn whole_secs(self) -> i64 {
        self.0.div_euclid(Self::PER_SECOND)
    }
}

impl fmt::Display for Nanos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let secs = self.0.div_euclid(Self::PER_SECOND);
        let frac = self.0.rem_euclid(Self::PER_SECOND);
        write!(f, "{secs}.{frac:09}")
    }
}

/// LOBSTER event types, numbered as in the message files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[repr(u8)]
pub enum EventType {
    NewLimit = 1,
    PartialCancel = 2,
    Delete = 3,
    ExecuteVisible = 4,
    ExecuteHidden = 5,
    Cross = 6,
    Halt = 7,
}

impl EventType {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: i64) -> Option<Self> {
        Some(match code {
            1 => EventType::NewLimit,
            2 => EventType::PartialCancel,
            3 => EventType::Delete,
            4 => EventType::ExecuteVisible,
            5 => EventType::ExecuteHidden,
            6 => EventType::Cross,
            7 => EventType::Halt,
            _ => return None,
        })
    }

    /// Types 1-5 carry a real order with positive size and price.
    pub fn is_order_event(self) -> bool {
        (self as u8) <= 5
    }

    pub fn is_cancel(self) -> bool {
        matches!(self, EventType::PartialCancel | EventType::Delete)
    }
}

/// Book side. LOBSTER direction `+1` is the bid side, `-1` the ask side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub fn direction(self) -> i8 {
        match self {
            Side::Bid => 1,
            Side::Ask => -1,
        }
    }

    pub fn from_direction(dir: i64) -> Option<Self> {
        match dir {
            1 => Some(Side::Bid),
            -1 => Some(Side::Ask),
            _ => None,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Side::Bid => Side::Ask,
            Side::Ask => Side::Bid,
        }
    }
}

/// One LOBSTER order-flow event.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Message {
    pub time: Nanos,
    pub event: EventType,
    pub order_id: i64,
    pub size: Qty,
    pub price: Price,
    pub side: Side,
}

impl Message {
    pub fn new(
        time: Nanos,
        event: EventType,
        order_id: i64,
        size: Qty,
        price: Price,
        side: Side,
    ) -> Self {
        Message { time, event, order_id, size, price, side }
    }
}

/// A visible price level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Level {
    pub price: Price,
    pub size: Qty,
}

impl Level {
    pub fn new(price: Price, size: Qty) -> Self {
        Level { price, size }
    }
}

/// Violations of the snapshot ordering invariants.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SnapshotError {
    #[error("crossed book: best ask {ask} <= best bid {bid}")]
    Crossed { ask: Price, bid: Price },
    #[error("{side:?} prices not strictly ordered at level {level}")]
    Unordered { side: Side, level: usize },
    #[error("{side:?} level {level} present after an absent level")]
    Gap { side: Side, level: usize },
    #[error("ask and bid level counts differ ({asks} vs {bids})")]
    Shape { asks: usize, bids: usize },
}

/// Top-n levels per side; index 0 is the best level. Absent levels are `None`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BookSnapshot {
    pub asks: Vec<Option<Level>>,
    pub bids: Vec<Option<Level>>,
}

impl BookSnapshot {
    /// An all-absent snapshot with `n` levels per side.
    pub fn empty(n: usize) -> Self {
        BookSnapshot { asks: alloc::vec![None; n], bids: alloc::vec![None; n] }
    }

    pub fn n_levels(&self) -> usize {
        self.asks.len()
    }

    pub fn side(&self, side: Side) -> &[Option<Level>] {
        match side {
            Side::Bid => &self.bids,
            Side::Ask => &self.asks,
        }
    }

    pub fn best(&self, side: Side) -> Option<Level> {
        self.side(side).first().copied().flatten()
    }

    pub fn best_ask(&self) -> Option<Level> {
        self.best(Side::Ask)
    }

    pub fn best_bid(&self) -> Option<Level> {
        self.best(Side::Bid)
    }

    /// Mid-price in price units, when both touches exist.
    pub fn mid(&self) -> Option<f64> {
        match (self.best_ask(), self.best_bid()) {
            (Some(a), Some(b)) => Some((a.price + b.price) as f64 / 2.0),
            _ => None,
        }
    }

    /// Twice the mid-price; exact in integer arithmetic.
    pub fn mid_x2(&self) -> Option<i64> {
        match (self.best_ask(), self.best_bid()) {
            (Some(a), Some(b)) => Some(a.price + b.price),
            _ => None,
        }
    }

    /// 1-based level index of `price` on `side`, if visible.
    pub fn level_of(&self, side: Side, price: Price) -> Option<usize> {
        self.side(side)
            .iter()
            .position(|l| matches!(l, Some(l) if l.price == price))
            .map(|i| i + 1)
    }

    pub fn total_volume(&self, side: Side) -> Qty {
        self.side(side).iter().flatten().map(|l| l.size).sum()
    }

    /// Checks ordering, contiguity and the uncrossed-touch invariant.
    pub fn validate(&self) -> Result<(), SnapshotError> {
        if self.asks.len() != self.bids.len() {
            return Err(SnapshotError::Shape { asks: self.asks.len(), bids: self.bids.len() });
        }
        for side in [Side::Ask, Side::Bid] {
            let levels = self.side(side);
            let mut seen_gap = false;
            let mut prev: Option<Price> = None;
            for (i, lvl) in levels.iter().enumerate() {
                match lvl {
                    None => seen_gap = true,
                    Some(l) => {
                        if seen_gap {
                            return Err(SnapshotError::Gap { side, level: i + 1 });
                        }
                        if let Some(p) = prev {
                            let ordered = match side {
                                Side::Ask => l.price > p,
                                Side::Bid => l.price < p,
                            };
                            if !ordered {
                                return Err(SnapshotError::Unordered { side, level: i + 1 });
                            }
                        }
                        prev = Some(l.price);
                    }
                }
            }
        }
        if let (Some(a), Some(b)) = (self.best_ask(), self.best_bid()) {
            if a.price <= b.price {
                return Err(SnapshotError::Crossed { ask: a.price, bid: b.price });
            }
        }
        Ok(())
    }

    /// Reflects prices around `pivot / 2` and swaps the two sides.
    pub fn mirrored(&self, pivot: Price) -> Self {
        let flip = |levels: &[Option<Level>]| {
            levels
                .iter()
                .map(|l| l.map(|l| Level::new(pivot - l.price, l.size)))
                .collect::<Vec<_>>()
        };
        BookSnapshot { asks: flip(&self.bids), bids: flip(&self.asks) }
    }
}

/// Which part of a dataset a sequence belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Role {
    Real,
    Generated,
    Conditioning,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SequenceError {
    #[error("sequence {id}: {messages} messages but {books} book snapshots")]
    LengthMismatch { id: String, messages: usize, books: usize },
    #[error("sequence {id}: step index not strictly increasing at position {position}")]
    Steps { id: String, position: usize },
}

/// Messages aligned with the book state after each message.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SequencePair {
    pub id: String,
    pub role: Role,
    pub seed_id: Option<String>,
    pub messages: Vec<Message>,
    pub books: Vec<BookSnapshot>,
    /// 1-based generation step (generated data) or message index (real data).
    pub step_index: Vec<u32>,
}

impl SequencePair {
    /// Builds a pair with steps `1..=M`.
    pub fn new(
        id: impl Into<String>,
        role: Role,
        messages: Vec<Message>,
        books: Vec<BookSnapshot>,
    ) -> Result<Self, SequenceError> {
        let id = id.into();
        if messages.len() != books.len() {
            return Err(SequenceError::LengthMismatch {
                id,
                messages: messages.len(),
                books: books.len(),
            });
        }
        let step_index = (1..=messages.len() as u32).collect();
        Ok(SequencePair { id, role, seed_id: None, messages, books, step_index })
    }

    pub fn with_steps(mut self, steps: Vec<u32>) -> Result<Self, SequenceError> {
        if steps.len() != self.messages.len() {
            return Err(SequenceError::LengthMismatch {
                id: self.id.clone(),
                messages: self.messages.len(),
                books: steps.len(),
            });
        }
        if let Some(pos) = steps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(SequenceError::Steps { id: self.id.clone(), position: pos + 1 });
        }
        self.step_index = steps;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: impl Into<String>) -> Self {
        self.seed_id = Some(seed.into());
        self
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Copy of `messages[range]` with matching books and steps.
    pub fn slice(&self, start: usize, end: usize, id: impl Into<String>) -> Self {
        SequencePair {
            id: id.into(),
            role: self.role,
            seed_id: self.seed_id.clone(),
            messages: self.messages[start..end].to_vec(),
            books: self.books[start..end].to_vec(),
            step_index: self.step_index[start..end].to_vec(),
        }
    }

    /// Bid/ask mirror image: prices reflected through `pivot / 2`, sides swapped.
    pub fn mirrored(&self, pivot: Price) -> Self {
        let messages = self
            .messages
            .iter()
            .map(|m| Message { price: pivot - m.price, side: m.side.opposite(), ..*m })
            .collect();
        let books = self.books.iter().map(|b| b.mirrored(pivot)).collect();
        SequencePair {
            id: self.id.clone(),
            role: self.role,
            seed_id: self.seed_id.clone(),
            messages,
            books,
            step_index: self.step_index.clone(),
        }
    }
}

/// Real, generated and conditioning sequences of one benchmark run.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetBundle {
    pub real: Vec<SequencePair>,
    pub generated: Vec<SequencePair>,
    pub conditioning: Vec<SequencePair>,
    pub tick_size: Price,
}

impl DatasetBundle {
    pub const DEFAULT_TICK: Price = 100;

    pub fn new(real: Vec<SequencePair>, generated: Vec<SequencePair>) -> Self {
        DatasetBundle {
            real,
            generated,
            conditioning: Vec::new(),
            tick_size: Self::DEFAULT_TICK,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn nanos_display_is_fixed_precision() {
        assert_eq!(Nanos(34_200_189_000_000).to_string(), "34200.189000000");
        assert_eq!(Nanos(5).to_string(), "0.000000005");
    }

    #[test]
    fn snapshot_validation() {
        let mut s = BookSnapshot::empty(2);
        s.asks[0] = Some(Level::new(1000, 5));
        s.bids[0] = Some(Level::new(900, 7));
        assert!(s.validate().is_ok());
        s.asks[1] = Some(Level::new(999, 1));
        assert_eq!(s.validate(), Err(SnapshotError::Unordered { side: Side::Ask, level: 2 }));
        let mut c = BookSnapshot::empty(1);
        c.asks[0] = Some(Level::new(900, 1));
        c.bids[0] = Some(Level::new(1000, 1));
        assert!(matches!(c.validate(), Err(SnapshotError::Crossed { .. })));
        let mut g = BookSnapshot::empty(2);
        g.bids[1] = Some(Level::new(900, 1));
        assert!(matches!(g.validate(), Err(SnapshotError::Gap { .. })));
    }

    #[test]
    fn sequence_lengths_must_match() {
        let err = SequencePair::new("x", Role::Real, vec![], vec![BookSnapshot::empty(1)]);
        assert!(err.is_err());
        let ok = SequencePair::new("x".to_string(), Role::Real, vec![], vec![]).unwrap();
        assert!(ok.is_empty());
    }

    #[test]
    fn mirror_is_an_involution() {
        let mut s = BookSnapshot::empty(2);
        s.asks[0] = Some(Level::new(1100, 5));
        s.bids[0] = Some(Level::new(1000, 7));
        s.bids[1] = Some(Level::new(900, 2));
        let m = s.mirrored(2100);
        assert!(m.validate().is_ok());
        assert_eq!(m.best_ask(), Some(Level::new(1100, 7)));
        assert_eq!(m.mirrored(2100), s);
    }
}
