//! Stream generators: benign Zipf/uniform workloads and the two adversarial
//! families behind the linear-sketch lower bounds.
//!
//! Adversarial streams are built over pairs `(position, value)` with
//! `position` in `1..=N` and `value` in `1..=alphabet`, flattened row-major to
//! the item `(position - 1) * alphabet + (value - 1)`. Inserting the pair at
//! position `i` always happens in runs of `floor(q^i)` copies.

use std::io::Write;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use thiserror::Error;

use crate::stream_model::{FrequencyVector, Stream, StreamError, StreamEvent, StreamMode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HardError {
    #[error("p = {0} is outside (0, 2] or not allowed for this family")]
    BadOrder(f64),
    #[error("run length floor(q^{position}) does not fit below 2^62")]
    Overflow { position: usize },
    #[error("invalid instance: {0}")]
    BadInput(String),
    #[error("moment is zero; gap undefined")]
    ZeroMoment,
    #[error(transparent)]
    Stream(#[from] StreamError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HardFamily {
    CashRegister,
    Turnstile,
}

/// Growth parameters of an adversarial family: runs at position `i` have
/// length `floor(q^i)` with `q = t^(1/p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardParams {
    pub family: HardFamily,
    pub p: f64,
    pub t: f64,
    pub q: f64,
}

/// Cash-register family: `t = 2^(2p) / |2^(p-1) - 1|`, `q = t^(1/p)`.
/// Turnstile family: `q = 2^(1/p)`, i.e. `t = 2`.
pub fn hard_params(p: f64, family: HardFamily) -> Result<HardParams, HardError> {
    if !(p > 0.0 && p <= 2.0) {
        return Err(HardError::BadOrder(p));
    }
    let t = match family {
        HardFamily::CashRegister => {
            let denom = (2f64.powf(p - 1.0) - 1.0).abs();
            if denom == 0.0 {
                return Err(HardError::BadOrder(p));
            }
            2f64.powf(2.0 * p) / denom
        }
        HardFamily::Turnstile => 2.0,
    };
    Ok(HardParams { family, p, t, q: t.powf(1.0 / p) })
}

/// Largest run length the generators accept (exclusive).
pub const MAX_RUN: u64 = 1 << 62;

impl HardParams {
    /// `floor(q^i)`, with values within 1e-9 relative of an integer snapped
    /// to it (so `sqrt(2)^4` is 4, not 3).
    pub fn run_length(&self, position: usize) -> Result<u64, HardError> {
        let y = self.t.powf(position as f64 / self.p);
        if !(y < MAX_RUN as f64) {
            return Err(HardError::Overflow { position });
        }
        let r = y.round();
        let v = if (y - r).abs() <= 1e-9 * y.max(1.0) { r } else { y.floor() };
        Ok(v as u64)
    }

    /// Smallest relative F_p gap a tracker must resolve:
    /// `(2^p - 2) / 2^(p + 3)`.
    pub fn required_gap(&self) -> f64 {
        required_gap(self.p)
    }
}

pub fn required_gap(p: f64) -> f64 {
    (2f64.powf(p) - 2.0) / 2f64.powf(p + 3.0)
}

/// Flattened item of the pair `(position, value)`, both 1-based.
pub fn pair_item(position: usize, value: u32, alphabet: u32) -> u64 {
    (position as u64 - 1) * alphabet as u64 + (value as u64 - 1)
}

/// A recorded point of a generated stream: the frequency vector after event
/// `event_index` (0-based, inclusive) is the one phase `phase` certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Checkpoint {
    pub event_index: usize,
    pub phase: usize,
    /// Player (index into the original, unsorted input) the checkpoint serves.
    pub player: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardStream {
    pub stream: Stream,
    pub checkpoints: Vec<Checkpoint>,
}

impl HardStream {
    /// Sidecar format: one `checkpoint <event_index> <phase>` line per checkpoint.
    pub fn write_checkpoints<W: Write>(&self, mut w: W) -> Result<(), StreamError> {
        for c in &self.checkpoints {
            writeln!(w, "checkpoint {} {}", c.event_index, c.phase)?;
        }
        Ok(())
    }

    /// Frequency vector at a recorded checkpoint.
    pub fn checkpoint_vector(&self, checkpoint: &Checkpoint) -> Result<FrequencyVector, StreamError> {
        self.stream.prefix_frequency(checkpoint.event_index + 1)
    }
}

/// Input of the cash-register construction: a string `x` over the alphabet,
/// `k` distinct query positions `v` and a guess `y_j` for each `x[v_j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CashHardInput {
    pub alphabet: u32,
    /// `x[i - 1]` is the value at position `i`.
    pub x: Vec<u32>,
    /// 1-based, distinct; any order.
    pub v: Vec<usize>,
    pub y: Vec<u32>,
}

impl CashHardInput {
    pub fn positions(&self) -> usize {
        self.x.len()
    }

    pub fn players(&self) -> usize {
        self.v.len()
    }

    /// Whether guess `j` is correct.
    pub fn planted(&self, j: usize) -> bool {
        self.y[j] == self.x[self.v[j] - 1]
    }

    fn validate(&self) -> Result<(), HardError> {
        let bad = |m: String| Err(HardError::BadInput(m));
        if self.alphabet == 0 {
            return bad("alphabet must be non-empty".into());
        }
        if self.v.is_empty() || self.v.len() != self.y.len() {
            return bad(format!("{} positions but {} guesses", self.v.len(), self.y.len()));
        }
        let in_alphabet = |c: &u32| (1..=self.alphabet).contains(c);
        if !self.x.iter().all(in_alphabet) || !self.y.iter().all(in_alphabet) {
            return bad("value outside the alphabet".into());
        }
        let mut sorted = self.v.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.v.len() {
            return bad("query positions must be distinct".into());
        }
        if sorted[0] == 0 || *sorted.last().unwrap() > self.positions() {
            return bad(format!("query positions must lie in 1..={}", self.positions()));
        }
        Ok(())
    }

    /// Random instance with each guess planted with probability 1/2.
    pub fn random(positions: usize, players: usize, alphabet: u32, seed: u64) -> Result<Self, HardError> {
        if players == 0 || players > positions || alphabet == 0 {
            return Err(HardError::BadInput(format!(
                "need 1 <= players ({players}) <= positions ({positions}) and a non-empty alphabet"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<u32> = (0..positions).map(|_| rng.random_range(1..=alphabet)).collect();
        let v: Vec<usize> = sample(&mut rng, positions, players).into_iter().map(|i| i + 1).collect();
        let y = v
            .iter()
            .map(|&pos| if rng.random::<bool>() { x[pos - 1] } else { rng.random_range(1..=alphabet) })
            .collect();
        Ok(Self { alphabet, x, v, y })
    }
}

/// Cash-register hard stream.
///
/// With `v'` the sorted positions (and `y'` permuted along), phase `j`
/// inserts `floor(q^i)` copies of `(i, x_i)` for `v'_{j-1} < i <= v'_j`,
/// then `floor(q^{v'_j})` copies of `(v'_j, y'_j)`. The checkpoint of phase
/// `j` is its last event.
pub fn gen_cash_hard(params: &HardParams, input: &CashHardInput) -> Result<HardStream, HardError> {
    if params.family != HardFamily::CashRegister {
        return Err(HardError::BadInput("parameters are for the turnstile family".into()));
    }
    input.validate()?;
    params.run_length(input.positions())?;
    let alphabet = input.alphabet;
    let universe = input.positions() as u64 * alphabet as u64;
    let mut order: Vec<usize> = (0..input.players()).collect();
    order.sort_by_key(|&j| input.v[j]);

    let mut stream = Stream::new(StreamMode::CashRegister, universe);
    let mut checkpoints = Vec::with_capacity(order.len());
    let mut prev = 0;
    for (phase, &j) in order.iter().enumerate() {
        let vj = input.v[j];
        for i in prev + 1..=vj {
            stream.push(StreamEvent::insert(pair_item(i, input.x[i - 1], alphabet), params.run_length(i)?));
        }
        stream.push(StreamEvent::insert(pair_item(vj, input.y[j], alphabet), params.run_length(vj)?));
        checkpoints.push(Checkpoint { event_index: stream.events.len() - 1, phase, player: j });
        prev = vj;
    }
    Ok(HardStream { stream, checkpoints })
}

/// One Augmented-Indexing instance: string `a`, query position `t` (1-based)
/// and a guess `query` for `a[t]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexingInstance {
    pub a: Vec<u32>,
    pub t: usize,
    pub query: u32,
}

impl IndexingInstance {
    pub fn planted(&self) -> bool {
        self.a[self.t - 1] == self.query
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnstileHardInput {
    pub alphabet: u32,
    pub positions: usize,
    pub instances: Vec<IndexingInstance>,
}

impl TurnstileHardInput {
    pub fn random(positions: usize, players: usize, alphabet: u32, seed: u64) -> Result<Self, HardError> {
        if players == 0 || positions == 0 || alphabet == 0 {
            return Err(HardError::BadInput("empty turnstile instance".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let instances = (0..players)
            .map(|_| {
                let a: Vec<u32> = (0..positions).map(|_| rng.random_range(1..=alphabet)).collect();
                let t = rng.random_range(1..=positions);
                let query = if rng.random::<bool>() { a[t - 1] } else { rng.random_range(1..=alphabet) };
                IndexingInstance { a, t, query }
            })
            .collect();
        Ok(Self { alphabet, positions, instances })
    }
}

/// Turnstile hard stream: one phase per instance. Phase `i` inserts
/// `floor(q^j)` copies of `(j, a_j)` for `j <= t_i`, deletes `floor(q^{t_i})`
/// copies of `(t_i, query_i)` (the checkpoint), then undoes every update of
/// the phase in reverse order, leaving the zero vector.
pub fn gen_turnstile_hard(params: &HardParams, input: &TurnstileHardInput) -> Result<HardStream, HardError> {
    if params.family != HardFamily::Turnstile {
        return Err(HardError::BadInput("parameters are for the cash-register family".into()));
    }
    let alphabet = input.alphabet;
    if alphabet == 0 || input.positions == 0 || input.instances.is_empty() {
        return Err(HardError::BadInput("empty turnstile instance".into()));
    }
    params.run_length(input.positions)?;
    let universe = input.positions as u64 * alphabet as u64;
    let mut stream = Stream::new(StreamMode::Turnstile, universe);
    let mut checkpoints = Vec::new();
    for (phase, inst) in input.instances.iter().enumerate() {
        if inst.a.len() != input.positions || inst.t == 0 || inst.t > input.positions {
            return Err(HardError::BadInput(format!("instance {phase} has the wrong shape")));
        }
        if !inst.a.iter().chain([&inst.query]).all(|c| (1..=alphabet).contains(c)) {
            return Err(HardError::BadInput(format!("instance {phase} leaves the alphabet")));
        }
        let start = stream.events.len();
        for j in 1..=inst.t {
            stream.push(StreamEvent::insert(pair_item(j, inst.a[j - 1], alphabet), params.run_length(j)?));
        }
        stream.push(StreamEvent::delete(pair_item(inst.t, inst.query, alphabet), params.run_length(inst.t)?));
        checkpoints.push(Checkpoint { event_index: stream.events.len() - 1, phase, player: phase });
        let undo: Vec<StreamEvent> =
            stream.events[start..].iter().rev().map(|e| StreamEvent { delta: -e.delta, ..*e }).collect();
        stream.events.extend(undo);
    }
    Ok(HardStream { stream, checkpoints })
}

/// Relative F_p gap `|F_p(yes) - F_p(no)| / min(F_p(yes), F_p(no))`.
pub fn gap_check(f_yes: &FrequencyVector, f_no: &FrequencyVector, p: f64) -> Result<f64, HardError> {
    let a = f_yes.exact_moment(p)?;
    let b = f_no.exact_moment(p)?;
    let lo = a.min(b);
    if lo == 0.0 {
        return Err(HardError::ZeroMoment);
    }
    Ok((a - b).abs() / lo)
}

/// Exact rational F_2 gap `numerator / denominator`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactGap {
    pub numerator: u128,
    pub denominator: u128,
}

impl ExactGap {
    /// `numerator / denominator >= num / den`, decided in integers.
    pub fn at_least(&self, num: u128, den: u128) -> bool {
        self.numerator * den >= num * self.denominator
    }

    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

/// F_2 gap in exact integer arithmetic.
pub fn gap_check_f2_exact(f_yes: &FrequencyVector, f_no: &FrequencyVector) -> Result<ExactGap, HardError> {
    let overflow = || HardError::BadInput("F2 overflows 128 bits".into());
    let a = f_yes.exact_f2().ok_or_else(overflow)?;
    let b = f_no.exact_f2().ok_or_else(overflow)?;
    let lo = a.min(b);
    if lo == 0 {
        return Err(HardError::ZeroMoment);
    }
    Ok(ExactGap { numerator: a.abs_diff(b), denominator: lo })
}

/// `m` cash-register unit updates with item `i` drawn with probability
/// proportional to `(i + 1)^-skew`. Prefix-consistent: the first `m'` events
/// for a seed do not depend on `m`.
pub fn gen_zipf(n: u64, m: u64, skew: f64, seed: u64) -> Result<Stream, HardError> {
    if n == 0 || !(skew > 0.0) {
        return Err(HardError::BadInput(format!("zipf needs n >= 1 and skew > 0 (n {n}, skew {skew})")));
    }
    let zipf = Zipf::new(n as f64, skew).map_err(|e| HardError::BadInput(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let events = (0..m).map(|_| StreamEvent::unit((zipf.sample(&mut rng) as u64 - 1).min(n - 1))).collect();
    Ok(Stream { mode: StreamMode::CashRegister, universe: n, events })
}

/// `m` cash-register unit updates with uniformly random items.
pub fn gen_uniform(n: u64, m: u64, seed: u64) -> Result<Stream, HardError> {
    if n == 0 {
        return Err(HardError::BadInput("uniform needs n >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let events = (0..m).map(|_| StreamEvent::unit(rng.random_range(0..n))).collect();
    Ok(Stream { mode: StreamMode::CashRegister, universe: n, events })
}
