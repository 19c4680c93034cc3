//! Stream events, frequency vectors and the exact frequency-moment oracle.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StreamError {
    #[error("item {item} outside universe of size {universe}")]
    ItemOutOfRange { item: u64, universe: u64 },
    #[error("deletions are not allowed in cash-register mode")]
    DeletionInCashRegister,
    #[error("delta must be +1 or -1, got {0}")]
    BadDelta(i64),
    #[error("repeat count must be at least 1")]
    ZeroRepeat,
    #[error("count overflow on item {0}")]
    Overflow(u64),
    #[error("moment order must be positive, got {0}")]
    BadOrder(f64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for StreamError {
    fn from(e: std::io::Error) -> Self {
        StreamError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamMode {
    CashRegister,
    Turnstile,
}

impl fmt::Display for StreamMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamMode::CashRegister => f.write_str("cash"),
            StreamMode::Turnstile => f.write_str("turnstile"),
        }
    }
}

impl FromStr for StreamMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cash" => Ok(StreamMode::CashRegister),
            "turnstile" => Ok(StreamMode::Turnstile),
            other => Err(format!("unknown stream mode `{other}`")),
        }
    }
}

/// `repeat` identical consecutive unit updates of `item` by `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamEvent {
    pub item: u64,
    pub delta: i8,
    pub repeat: u64,
}

impl StreamEvent {
    pub fn insert(item: u64, repeat: u64) -> Self {
        Self { item, delta: 1, repeat }
    }

    pub fn delete(item: u64, repeat: u64) -> Self {
        Self { item, delta: -1, repeat }
    }

    pub fn unit(item: u64) -> Self {
        Self::insert(item, 1)
    }

    /// Net signed change the event applies to its item.
    pub fn signed_mass(&self) -> i64 {
        self.delta as i64 * self.repeat as i64
    }

    /// Checks the event against a universe size and stream mode.
    pub fn validate(&self, universe: u64, mode: StreamMode) -> Result<(), StreamError> {
        if self.item >= universe {
            return Err(StreamError::ItemOutOfRange { item: self.item, universe });
        }
        if self.delta != 1 && self.delta != -1 {
            return Err(StreamError::BadDelta(self.delta as i64));
        }
        if self.repeat == 0 {
            return Err(StreamError::ZeroRepeat);
        }
        if self.repeat > i64::MAX as u64 {
            return Err(StreamError::Overflow(self.item));
        }
        if mode == StreamMode::CashRegister && self.delta < 0 {
            return Err(StreamError::DeletionInCashRegister);
        }
        Ok(())
    }
}

/// Sparse frequency vector in canonical form: zero counts are never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyVector {
    counts: BTreeMap<u64, i64>,
    universe: u64,
}

impl FrequencyVector {
    pub fn new(universe: u64) -> Self {
        Self { counts: BTreeMap::new(), universe }
    }

    /// Builds a vector from `(item, count)` pairs, summing duplicates.
    pub fn from_counts<I>(universe: u64, pairs: I) -> Result<Self, StreamError>
    where
        I: IntoIterator<Item = (u64, i64)>,
    {
        let mut f = Self::new(universe);
        for (item, count) in pairs {
            f.add(item, count)?;
        }
        Ok(f)
    }

    pub fn universe(&self) -> u64 {
        self.universe
    }

    pub fn get(&self, item: u64) -> i64 {
        self.counts.get(&item).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Nonzero entries in increasing item order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, i64)> + '_ {
        self.counts.iter().map(|(&i, &c)| (i, c))
    }

    /// Adds `amount` to `item`, removing the entry if it reaches zero.
    /// Returns the previous count.
    pub fn add(&mut self, item: u64, amount: i64) -> Result<i64, StreamError> {
        if item >= self.universe {
            return Err(StreamError::ItemOutOfRange { item, universe: self.universe });
        }
        let old = self.get(item);
        let new = old.checked_add(amount).ok_or(StreamError::Overflow(item))?;
        if new == 0 {
            self.counts.remove(&item);
        } else {
            self.counts.insert(item, new);
        }
        Ok(old)
    }

    /// Applies one (run-length) event under the given stream model.
    pub fn apply(&mut self, event: &StreamEvent, mode: StreamMode) -> Result<(), StreamError> {
        event.validate(self.universe, mode)?;
        self.add(event.item, event.signed_mass())?;
        Ok(())
    }

    /// Number of nonzero entries.
    pub fn distinct_count(&self) -> usize {
        self.counts.len()
    }

    pub fn l1_norm(&self) -> u64 {
        self.counts.values().map(|c| c.unsigned_abs()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.counts.values().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt()
    }

    /// `sum_i |f_i|^p`; zero for the empty vector.
    pub fn exact_moment(&self, p: f64) -> Result<f64, StreamError> {
        if !(p > 0.0) {
            return Err(StreamError::BadOrder(p));
        }
        if p == 2.0 {
            return Ok(self.exact_f2().map(|v| v as f64).unwrap_or(f64::INFINITY));
        }
        let mut sum = NeumaierSum::default();
        for &c in self.counts.values() {
            sum.add((c.unsigned_abs() as f64).powf(p));
        }
        Ok(sum.value())
    }

    /// Second moment in exact integer arithmetic; `None` on overflow.
    pub fn exact_f2(&self) -> Option<u128> {
        self.counts.values().try_fold(0u128, |acc, &c| {
            let a = c.unsigned_abs() as u128;
            acc.checked_add(a * a)
        })
    }

    /// Dense copy of the counts, for small universes in tests and experiments.
    pub fn to_dense(&self) -> Vec<i64> {
        let mut v = vec![0; self.universe as usize];
        for (&i, &c) in &self.counts {
            v[i as usize] = c;
        }
        v
    }
}

/// Compensated summation; keeps incremental fractional moments within a few
/// ulps of a from-scratch sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Maintains the frequency vector of a growing prefix together with its
/// exact p-th moment, updated incrementally per event.
///
/// For `p = 2` the moment is kept in exact integer arithmetic.
#[derive(Debug, Clone)]
pub struct MomentTracker {
    p: f64,
    mode: StreamMode,
    freq: FrequencyVector,
    f2: u128,
    fp: NeumaierSum,
    mass: u64,
}

impl MomentTracker {
    pub fn new(p: f64, universe: u64, mode: StreamMode) -> Result<Self, StreamError> {
        if !(p > 0.0) {
            return Err(StreamError::BadOrder(p));
        }
        Ok(Self { p, mode, freq: FrequencyVector::new(universe), f2: 0, fp: NeumaierSum::default(), mass: 0 })
    }

    pub fn apply(&mut self, event: &StreamEvent) -> Result<(), StreamError> {
        event.validate(self.freq.universe(), self.mode)?;
        let old = self.freq.add(event.item, event.signed_mass())?;
        let new = old + event.signed_mass();
        let (old_abs, new_abs) = (old.unsigned_abs() as u128, new.unsigned_abs() as u128);
        if self.p == 2.0 {
            self.f2 = (self.f2 + new_abs * new_abs)
                .checked_sub(old_abs * old_abs)
                .ok_or(StreamError::Overflow(event.item))?;
        } else {
            self.fp.add((new_abs as f64).powf(self.p) - (old_abs as f64).powf(self.p));
        }
        self.mass = self.mass.saturating_add(event.repeat);
        Ok(())
    }

    /// Exact moment of the current prefix (exactly 0 when the vector is empty).
    pub fn moment(&self) -> f64 {
        if self.freq.is_empty() {
            0.0
        } else if self.p == 2.0 {
            self.f2 as f64
        } else {
            self.fp.value()
        }
    }

    pub fn exact_f2(&self) -> Option<u128> {
        (self.p == 2.0).then_some(self.f2)
    }

    pub fn frequency(&self) -> &FrequencyVector {
        &self.freq
    }

    /// Number of unit updates applied so far (the stream time index).
    pub fn time(&self) -> u64 {
        self.mass
    }
}

/// A materialized stream: mode, universe size and run-length events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stream {
    pub mode: StreamMode,
    pub universe: u64,
    pub events: Vec<StreamEvent>,
}

impl Stream {
    pub fn new(mode: StreamMode, universe: u64) -> Self {
        Self { mode, universe, events: Vec::new() }
    }

    pub fn push(&mut self, event: StreamEvent) {
        self.events.push(event);
    }

    /// Total number of unit updates (the stream length m).
    pub fn length(&self) -> u64 {
        self.events.iter().map(|e| e.repeat).sum()
    }

    /// Frequency vector after the whole stream.
    pub fn frequency(&self) -> Result<FrequencyVector, StreamError> {
        self.prefix_frequency(self.events.len())
    }

    /// Frequency vector after the first `events` events.
    pub fn prefix_frequency(&self, events: usize) -> Result<FrequencyVector, StreamError> {
        let mut f = FrequencyVector::new(self.universe);
        for e in &self.events[..events] {
            f.apply(e, self.mode)?;
        }
        Ok(f)
    }

    /// Largest distinct count seen at any prefix (equals the final F0 for
    /// cash-register streams).
    pub fn max_distinct(&self) -> Result<usize, StreamError> {
        let mut f = FrequencyVector::new(self.universe);
        let mut best = 0;
        for e in &self.events {
            f.apply(e, self.mode)?;
            best = best.max(f.distinct_count());
        }
        Ok(best)
    }

    /// Writes the text stream format: a `mode` and an `n` header line, then
    /// one `<item> <delta> <repeat>` line per event.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), StreamError> {
        writeln!(w, "mode {}", self.mode)?;
        writeln!(w, "n {}", self.universe)?;
        for e in &self.events {
            writeln!(w, "{} {} {}", e.item, e.delta, e.repeat)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii")
    }

    /// Parses the text stream format. `#` starts a comment; blank lines are ignored.
    pub fn read_from<R: BufRead>(r: R) -> Result<Self, StreamError> {
        let mut mode = None;
        let mut universe = None;
        let mut events = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let err = |message: String| StreamError::Parse { line: lineno, message };
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            match fields.as_slice() {
                ["mode", m] => mode = Some(m.parse::<StreamMode>().map_err(err)?),
                ["n", n] => universe = Some(n.parse::<u64>().map_err(|e| err(format!("bad universe: {e}")))?),
                [item, delta, repeat] => {
                    let (Some(mode), Some(universe)) = (mode, universe) else {
                        return Err(err("event before `mode` and `n` headers".into()));
                    };
                    let event = StreamEvent {
                        item: item.parse().map_err(|e| err(format!("bad item: {e}")))?,
                        delta: match *delta {
                            "1" | "+1" => 1,
                            "-1" => -1,
                            other => return Err(err(format!("bad delta `{other}`"))),
                        },
                        repeat: repeat.parse().map_err(|e| err(format!("bad repeat: {e}")))?,
                    };
                    event.validate(universe, mode).map_err(|e| err(e.to_string()))?;
                    events.push(event);
                }
                _ => return Err(err(format!("unrecognized line `{content}`"))),
            }
        }
        let mode = mode.ok_or(StreamError::Parse { line: 0, message: "missing `mode` header".into() })?;
        let universe = universe.ok_or(StreamError::Parse { line: 0, message: "missing `n` header".into() })?;
        Ok(Self { mode, universe, events })
    }
}
