//! LOBSTER message/orderbook CSV files and the real/generated/cond layout.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use lobbench_core::types::SnapshotError;
use lobbench_core::{BookSnapshot, DatasetBundle, EventType, Level, Message, Nanos, Role, SequencePair, Side};
use rayon::prelude::*;
use thiserror::Error;

/// Price written for an empty ask level.
pub const ASK_SENTINEL: i64 = 9_999_999_999;
/// Price written for an empty bid level.
pub const BID_SENTINEL: i64 = -9_999_999_999;
/// Backward time steps up to this size are warnings, larger ones errors.
pub const TIME_TOLERANCE_NS: i64 = 1_000;

#[derive(Debug, Error)]
pub enum LobsterError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{file}, row {row}: {msg}")]
    Parse { file: String, row: usize, msg: String },
    #[error("{file}, row {row}: {source}")]
    Book { file: String, row: usize, source: SnapshotError },
    #[error("{file}, row {row}: time moves back by {delta_ns} ns")]
    TimeRegression { file: String, row: usize, delta_ns: i64 },
    #[error("sequence {stem}: {messages} messages but {books} book rows")]
    LengthMismatch { stem: String, messages: usize, books: usize },
    #[error("{dir}: {stem} has no {missing} file")]
    Orphan { dir: PathBuf, stem: String, missing: &'static str },
    #[error("no {0} data")]
    NoData(&'static str),
}

impl LobsterError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        LobsterError::Io { path: path.to_path_buf(), source }
    }
}

/// Non-fatal findings while parsing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Warning {
    pub file: String,
    pub row: usize,
    pub msg: String,
}

/// Parses seconds-after-midnight with up to nine decimals into nanoseconds,
/// exactly. Further digits are rounded half up.
pub fn parse_time(s: &str) -> Result<Nanos, String> {
    let s = s.trim();
    let (int, frac) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return Err(format!("bad time '{s}'"));
    }
    if !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("bad time '{s}'"));
    }
    let secs: i64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| format!("bad time '{s}'"))? };
    let mut ns: i64 = 0;
    for (k, b) in frac.bytes().take(9).enumerate() {
        ns += i64::from(b - b'0') * 10i64.pow(8 - k as u32);
    }
    if frac.len() > 9 && frac.as_bytes()[9] >= b'5' {
        ns += 1;
    }
    secs.checked_mul(Nanos::PER_SECOND)
        .and_then(|v| v.checked_add(ns))
        .map(Nanos)
        .ok_or_else(|| format!("time '{s}' out of range"))
}

fn field(rec: &csv::StringRecord, i: usize) -> &str {
    rec.get(i).unwrap_or("").trim()
}

fn int_field(rec: &csv::StringRecord, i: usize, what: &str) -> Result<i64, String> {
    let f = field(rec, i);
    f.parse::<i64>()
        .or_else(|e| {
            // tolerate integral values written as floats, e.g. "100.0"
            f.parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0 && v.abs() < 9.0e15)
                .map(|v| v as i64)
                .ok_or(e)
        })
        .map_err(|_| format!("bad {what} '{f}'"))
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input)
}

/// Parses a message file. Time regressions within [`TIME_TOLERANCE_NS`]
/// come back as warnings.
pub fn parse_messages<R: Read>(input: R, file: &str) -> Result<(Vec<Message>, Vec<Warning>), LobsterError> {
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    let mut last: Option<Nanos> = None;
    for (i, rec) in reader(input).records().enumerate() {
        let row = i + 1;
        let perr = |msg: String| LobsterError::Parse { file: file.to_string(), row, msg };
        let rec = rec.map_err(|e| perr(e.to_string()))?;
        if rec.len() == 1 && field(&rec, 0).is_empty() {
            continue;
        }
        if rec.len() != 6 {
            return Err(perr(format!("expected 6 columns, found {}", rec.len())));
        }
        let time = parse_time(field(&rec, 0)).map_err(perr)?;
        let code = int_field(&rec, 1, "event type").map_err(perr)?;
        let event = EventType::from_code(code).ok_or_else(|| perr(format!("unknown event type {code}")))?;
        let order_id = int_field(&rec, 2, "order id").map_err(perr)?;
        let size = int_field(&rec, 3, "size").map_err(perr)?;
        let price = int_field(&rec, 4, "price").map_err(perr)?;
        let dir = int_field(&rec, 5, "direction").map_err(perr)?;
        let side = Side::from_direction(dir).ok_or_else(|| perr(format!("direction must be 1 or -1, got {dir}")))?;
        if size < 0 || (size == 0 && code <= 5) {
            return Err(perr(format!("size must be positive, got {size}")));
        }
        if price <= 0 && code <= 5 {
            return Err(perr(format!("price must be positive, got {price}")));
        }
        if let Some(prev) = last {
            let delta = time.0 - prev.0;
            if delta < -TIME_TOLERANCE_NS {
                return Err(LobsterError::TimeRegression { file: file.to_string(), row, delta_ns: -delta });
            }
            if delta < 0 {
                warnings.push(Warning { file: file.to_string(), row, msg: format!("time moves back by {} ns", -delta) });
            }
        }
        last = Some(time);
        out.push(Message::new(time, event, order_id, size as u64, price, side));
    }
    Ok((out, warnings))
}

fn level(price: i64, size: i64, side: Side) -> Option<Level> {
    let empty = size <= 0
        || match side {
            Side::Ask => price >= ASK_SENTINEL,
            Side::Bid => price <= 0,
        };
    (!empty).then(|| Level::new(price, size as u64))
}

/// Parses an orderbook file with `4 * n_levels` columns; `None` infers the
/// level count from the first row.
pub fn parse_books<R: Read>(input: R, n_levels: Option<usize>, file: &str) -> Result<Vec<BookSnapshot>, LobsterError> {
    let mut out = Vec::new();
    let mut n = n_levels;
    for (i, rec) in reader(input).records().enumerate() {
        let row = i + 1;
        let perr = |msg: String| LobsterError::Parse { file: file.to_string(), row, msg };
        let rec = rec.map_err(|e| perr(e.to_string()))?;
        if rec.len() == 1 && field(&rec, 0).is_empty() {
            continue;
        }
        let levels = *n.get_or_insert(rec.len() / 4);
        if levels == 0 || rec.len() != 4 * levels {
            return Err(perr(format!("expected {} columns, found {}", 4 * levels.max(1), rec.len())));
        }
        let mut snap = BookSnapshot::empty(levels);
        for k in 0..levels {
            let ap = int_field(&rec, 4 * k, "ask price").map_err(perr)?;
            let az = int_field(&rec, 4 * k + 1, "ask size").map_err(perr)?;
            let bp = int_field(&rec, 4 * k + 2, "bid price").map_err(perr)?;
            let bz = int_field(&rec, 4 * k + 3, "bid size").map_err(perr)?;
            if az < 0 || bz < 0 {
                return Err(perr(String::from("negative size")));
            }
            snap.asks[k] = level(ap, az, Side::Ask);
            snap.bids[k] = level(bp, bz, Side::Bid);
        }
        snap.validate().map_err(|source| LobsterError::Book { file: file.to_string(), row, source })?;
        out.push(snap);
    }
    Ok(out)
}

pub fn write_messages<W: Write>(out: W, messages: &[Message]) -> std::io::Result<()> {
    let mut w = BufWriter::new(out);
    for m in messages {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            m.time,
            m.event.code(),
            m.order_id,
            m.size,
            m.price,
            m.side.direction()
        )?;
    }
    w.flush()
}

pub fn write_books<W: Write>(out: W, books: &[BookSnapshot]) -> std::io::Result<()> {
    let mut w = BufWriter::new(out);
    let mut line = String::new();
    for b in books {
        line.clear();
        for k in 0..b.n_levels() {
            use std::fmt::Write as _;
            if k > 0 {
                line.push(',');
            }
            let (ap, az) = b.asks[k].map_or((ASK_SENTINEL, 0), |l| (l.price, l.size));
            let (bp, bz) = b.bids[k].map_or((BID_SENTINEL, 0), |l| (l.price, l.size));
            let _ = write!(line, "{ap},{az},{bp},{bz}");
        }
        writeln!(w, "{line}")?;
    }
    w.flush()
}

/// Writes `<stem>_message.csv` and `<stem>_orderbook.csv` into `dir`.
pub fn write_sequence(dir: &Path, stem: &str, seq: &SequencePair) -> Result<(PathBuf, PathBuf), LobsterError> {
    std::fs::create_dir_all(dir).map_err(|e| LobsterError::io(dir, e))?;
    let mp = dir.join(format!("{stem}_message.csv"));
    let bp = dir.join(format!("{stem}_orderbook.csv"));
    let f = File::create(&mp).map_err(|e| LobsterError::io(&mp, e))?;
    write_messages(f, &seq.messages).map_err(|e| LobsterError::io(&mp, e))?;
    let f = File::create(&bp).map_err(|e| LobsterError::io(&bp, e))?;
    write_books(f, &seq.books).map_err(|e| LobsterError::io(&bp, e))?;
    Ok((mp, bp))
}

/// Paired files found in one directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilePair {
    pub stem: String,
    pub message: PathBuf,
    pub book: PathBuf,
}

fn stem_of(name: &str, marker: &str) -> Option<String> {
    if !name.ends_with(".csv") {
        return None;
    }
    name.rfind(marker).map(|i| name[..i].to_string())
}

/// Pairs `<stem>_message*.csv` with `<stem>_orderbook*.csv`, sorted by stem.
pub fn pair_files(dir: &Path) -> Result<Vec<FilePair>, LobsterError> {
    let mut msgs = std::collections::BTreeMap::new();
    let mut books = std::collections::BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| LobsterError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| LobsterError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(stem) = stem_of(&name, "_message") {
            msgs.insert(stem, entry.path());
        } else if let Some(stem) = stem_of(&name, "_orderbook") {
            books.insert(stem, entry.path());
        }
    }
    for stem in books.keys() {
        if !msgs.contains_key(stem) {
            return Err(LobsterError::Orphan { dir: dir.to_path_buf(), stem: stem.clone(), missing: "message" });
        }
    }
    let mut out = Vec::new();
    for (stem, message) in msgs {
        let book = books
            .remove(&stem)
            .ok_or_else(|| LobsterError::Orphan { dir: dir.to_path_buf(), stem: stem.clone(), missing: "orderbook" })?;
        out.push(FilePair { stem, message, book });
    }
    Ok(out)
}

/// Seed identifier of a stem: the part before `__` if present.
pub fn seed_of(stem: &str) -> &str {
    stem.split_once("__").map_or(stem, |(s, _)| s)
}

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Book depth; inferred per file when `None`.
    pub n_levels: Option<usize>,
    pub tick_size: Option<i64>,
}

/// Loads one sequence from a file pair.
pub fn load_sequence(pair: &FilePair, role: Role, opts: &LoadOptions) -> Result<(SequencePair, Vec<Warning>), LobsterError> {
    let open = |p: &Path| File::open(p).map(BufReader::new).map_err(|e| LobsterError::io(p, e));
    let mname = pair.message.display().to_string();
    let bname = pair.book.display().to_string();
    let (messages, warnings) = parse_messages(open(&pair.message)?, &mname)?;
    let books = parse_books(open(&pair.book)?, opts.n_levels, &bname)?;
    if messages.len() != books.len() {
        return Err(LobsterError::LengthMismatch { stem: pair.stem.clone(), messages: messages.len(), books: books.len() });
    }
    let mut seq = SequencePair::new(pair.stem.clone(), role, messages, books).expect("lengths checked");
    if role != Role::Real {
        seq = seq.with_seed(seed_of(&pair.stem));
    }
    Ok((seq, warnings))
}

fn load_dir(dir: &Path, role: Role, opts: &LoadOptions) -> Result<(Vec<SequencePair>, Vec<Warning>), LobsterError> {
    if !dir.is_dir() {
        return Ok((Vec::new(), Vec::new()));
    }
    let pairs = pair_files(dir)?;
    let loaded: Vec<_> = pairs.par_iter().map(|p| load_sequence(p, role, opts)).collect::<Result<_, _>>()?;
    let mut seqs = Vec::with_capacity(loaded.len());
    let mut warnings = Vec::new();
    for (s, w) in loaded {
        seqs.push(s);
        warnings.extend(w);
    }
    Ok((seqs, warnings))
}

/// Loads `<root>/real`, `<root>/generated` and (optionally) `<root>/cond`.
pub fn load_bundle(root: &Path, opts: &LoadOptions) -> Result<(DatasetBundle, Vec<Warning>), LobsterError> {
    let (real, mut warnings) = load_dir(&root.join("real"), Role::Real, opts)?;
    let (generated, w) = load_dir(&root.join("generated"), Role::Generated, opts)?;
    warnings.extend(w);
    let (conditioning, w) = load_dir(&root.join("cond"), Role::Conditioning, opts)?;
    warnings.extend(w);
    if real.is_empty() {
        return Err(LobsterError::NoData("real"));
    }
    if generated.is_empty() {
        return Err(LobsterError::NoData("generated"));
    }
    let mut bundle = DatasetBundle::new(real, generated);
    bundle.conditioning = conditioning;
    if let Some(t) = opts.tick_size {
        bundle.tick_size = t;
    }
    Ok((bundle, warnings))
}

/// Problems found by [`validate_dir`].
#[derive(Debug, Default)]
pub struct ValidationReport {
    pub files_checked: usize,
    pub errors: Vec<String>,
    pub warnings: Vec<Warning>,
}

/// Parses and cross-checks every file pair under the layout directories
/// that exist, collecting all problems instead of stopping at the first.
pub fn validate_dir(root: &Path, opts: &LoadOptions) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut dirs: Vec<(PathBuf, Role)> = [("real", Role::Real), ("generated", Role::Generated), ("cond", Role::Conditioning)]
        .iter()
        .map(|(d, r)| (root.join(d), *r))
        .filter(|(d, _)| d.is_dir())
        .collect();
    if dirs.is_empty() {
        // a plain directory of file pairs
        dirs.push((root.to_path_buf(), Role::Real));
    }
    for (dir, role) in dirs {
        let pairs = match pair_files(&dir) {
            Ok(p) => p,
            Err(e) => {
                report.errors.push(e.to_string());
                continue;
            }
        };
        for p in pairs {
            report.files_checked += 2;
            match load_sequence(&p, role, opts) {
                Ok((_, w)) => report.warnings.extend(w),
                Err(e) => report.errors.push(e.to_string()),
            }
        }
    }
    report
}
