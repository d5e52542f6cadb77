//! The split-and-mix aggregation protocol: per-party encoder, shuffler,
//! analyzer, the certified message-count formula, and corruption-aware
//! simulation.
//!
//! A party holding `x` sends `m` messages: `m - 1` uniform field elements and
//! one correcting share, so the messages always sum to `x`. The analyzer sums
//! the shuffled multiset of all `n * m` messages, which equals the sum of the
//! inputs by construction.
//!
//! Transcripts are canonicalized as sorted multisets. Conditioned on the
//! multiset, the shuffled tuple order is uniform and input-independent, so
//! every statistical-distance computation over multisets agrees with the one
//! over shuffled tuples while collapsing `(nm)!` tuple states.

use crate::ffield::{FieldElement, PrimeModulus};
use crate::rng::SeededRng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("party count must be at least 1")]
    NoParties,
    #[error("message count m must be at least 1")]
    NoMessages,
    #[error("gamma must lie in (0, 1], got {0}")]
    BadGamma(f64),
    #[error("message-count formula needs n >= 3 so that the log base n/2 exceeds 1, got n = {0}")]
    DegenerateLogBase(usize),
    #[error("share vectors disagree on length or modulus")]
    MixedShareVectors,
    #[error("input vector has length {got}, expected n = {expected}")]
    WrongInputCount { got: usize, expected: usize },
    #[error("input value {0} out of range for modulus {1}")]
    InputOutOfRange(u64, u64),
    #[error("corrupted index {0} out of range for n = {1}")]
    BadCorruptedIndex(usize, usize),
    #[error("all parties corrupted: no honest transcript exists")]
    AllCorrupted,
    #[error("transcript carries {got} messages, expected n*m = {expected}")]
    WrongMessageCount { got: usize, expected: usize },
    #[error("malformed transcript file: {0}")]
    BadTranscriptFile(String),
}

/// Protocol parameters. `gamma` is the target statistical distance to the
/// sum-conditioned uniform reference; `sigma` the security parameter in bits.
/// When derived from `sigma`, `gamma = 2^(-sigma-1)` (the triangle-inequality
/// split: two gamma-steps through the reference distribution).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub n: usize,
    pub m: usize,
    pub q: PrimeModulus,
    pub gamma: f64,
    pub sigma: f64,
}

impl ProtocolParams {
    pub fn new(n: usize, m: usize, q: PrimeModulus) -> Result<Self, ProtocolError> {
        Self::with_gamma(n, m, q, 1.0)
    }

    pub fn with_gamma(
        n: usize,
        m: usize,
        q: PrimeModulus,
        gamma: f64,
    ) -> Result<Self, ProtocolError> {
        if n < 1 {
            return Err(ProtocolError::NoParties);
        }
        if m < 1 {
            return Err(ProtocolError::NoMessages);
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(ProtocolError::BadGamma(gamma));
        }
        let sigma = -gamma.log2() - 1.0;
        Ok(ProtocolParams {
            n,
            m,
            q,
            gamma,
            sigma,
        })
    }

    pub fn with_sigma(
        n: usize,
        m: usize,
        q: PrimeModulus,
        sigma: f64,
    ) -> Result<Self, ProtocolError> {
        let gamma = (-sigma - 1.0).exp2();
        let mut params = Self::with_gamma(n, m, q, gamma)?;
        params.sigma = sigma;
        Ok(params)
    }

    pub fn message_total(&self) -> usize {
        self.n * self.m
    }
}

/// One party's `m` additive shares of its declared input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareVector {
    shares: Vec<u64>,
    declared_input: u64,
    modulus: PrimeModulus,
}

impl ShareVector {
    pub fn shares(&self) -> &[u64] {
        &self.shares
    }

    pub fn declared_input(&self) -> u64 {
        self.declared_input
    }

    pub fn modulus(&self) -> PrimeModulus {
        self.modulus
    }

    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }

    /// Sum of the shares; equals the declared input by construction.
    pub fn sum(&self) -> u64 {
        let q = self.modulus;
        self.shares.iter().fold(0, |acc, &s| q.add(acc, s))
    }
}

/// The shuffled multiset of `n * m` messages, in canonical sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    messages: Vec<u64>,
    params: ProtocolParams,
}

#[derive(Serialize, Deserialize)]
struct TranscriptFile {
    q: u64,
    n: usize,
    m: usize,
    messages: Vec<u64>,
}

impl Transcript {
    pub fn from_messages(
        mut messages: Vec<u64>,
        params: ProtocolParams,
    ) -> Result<Self, ProtocolError> {
        if messages.len() != params.message_total() {
            return Err(ProtocolError::WrongMessageCount {
                got: messages.len(),
                expected: params.message_total(),
            });
        }
        for &v in &messages {
            if v >= params.q.value() {
                return Err(ProtocolError::InputOutOfRange(v, params.q.value()));
            }
        }
        canonical_sort(&mut messages, params.q.value());
        Ok(Transcript { messages, params })
    }

    pub fn messages(&self) -> &[u64] {
        &self.messages
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    /// Serializes to the on-disk form `{q, n, m, messages}` with messages in
    /// ascending order. Round-trips bit-exactly.
    pub fn to_json(&self) -> String {
        let file = TranscriptFile {
            q: self.params.q.value(),
            n: self.params.n,
            m: self.params.m,
            messages: self.messages.clone(),
        };
        serde_json::to_string(&file).expect("transcript serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, ProtocolError> {
        let file: TranscriptFile = serde_json::from_str(text)
            .map_err(|e| ProtocolError::BadTranscriptFile(e.to_string()))?;
        let q = PrimeModulus::new(file.q)
            .map_err(|e| ProtocolError::BadTranscriptFile(e.to_string()))?;
        let params = ProtocolParams::new(file.n, file.m, q)?;
        Transcript::from_messages(file.messages, params)
    }
}

/// Sorts message values ascending; counting sort when the field is small
/// relative to the message count.
fn canonical_sort(values: &mut [u64], q: u64) {
    if q as usize <= values.len().saturating_mul(4) && q <= (1 << 24) {
        let mut counts = vec![0usize; q as usize];
        for &v in values.iter() {
            counts[v as usize] += 1;
        }
        let mut idx = 0;
        for (v, &c) in counts.iter().enumerate() {
            values[idx..idx + c].fill(v as u64);
            idx += c;
        }
    } else {
        values.sort_unstable();
    }
}

/// What a colluding adversary sees: the honest parties' shuffled transcript
/// plus the corrupted parties' full share vectors.
#[derive(Debug, Clone)]
pub struct CorruptionView {
    pub honest_transcript: Transcript,
    pub corrupted_shares: BTreeMap<usize, ShareVector>,
}

/// Splits `x` into `m` additive shares: the first `m - 1` uniform, the last
/// chosen so the sum equals `x`.
pub fn encode(x: FieldElement, m: usize, rng: &mut SeededRng) -> ShareVector {
    assert!(m >= 1, "m must be at least 1");
    let q = x.modulus();
    let mut shares = Vec::with_capacity(m);
    let mut acc = 0u64;
    for _ in 0..m - 1 {
        let s = rng.random_range(0..q.value());
        acc = q.add(acc, s);
        shares.push(s);
    }
    shares.push(q.sub(x.value(), acc));
    ShareVector {
        shares,
        declared_input: x.value(),
        modulus: q,
    }
}

fn check_uniform_vectors(vectors: &[ShareVector]) -> Result<(usize, PrimeModulus), ProtocolError> {
    let first = vectors.first().ok_or(ProtocolError::NoParties)?;
    let (m, q) = (first.len(), first.modulus());
    if vectors.iter().any(|v| v.len() != m || v.modulus() != q) {
        return Err(ProtocolError::MixedShareVectors);
    }
    Ok((m, q))
}

/// Shuffles the concatenation of all parties' shares into a canonical
/// transcript.
///
/// The canonical multiset form is order-free, so the output is a
/// deterministic function of the inputs; the generator is still consumed to
/// mirror the shuffler model (and [`shuffled_tuple`] exposes the permuted
/// tuple itself).
pub fn shuffle(vectors: &[ShareVector], rng: &mut SeededRng) -> Result<Transcript, ProtocolError> {
    let tuple = shuffled_tuple(vectors, rng)?;
    let (m, q) = check_uniform_vectors(vectors)?;
    let params = ProtocolParams::new(vectors.len(), m, q)?;
    Transcript::from_messages(tuple, params)
}

/// The uniformly permuted tuple of all `n * m` messages.
pub fn shuffled_tuple(
    vectors: &[ShareVector],
    rng: &mut SeededRng,
) -> Result<Vec<u64>, ProtocolError> {
    check_uniform_vectors(vectors)?;
    let mut all: Vec<u64> = vectors
        .iter()
        .flat_map(|v| v.shares().iter().copied())
        .collect();
    // Fisher-Yates
    for i in (1..all.len()).rev() {
        let j = rng.random_range(0..=i);
        all.swap(i, j);
    }
    Ok(all)
}

/// Sums all messages of the transcript; equals the field sum of the inputs
/// whenever the transcript came from `encode` + `shuffle`.
pub fn analyze(t: &Transcript) -> FieldElement {
    let q = t.params().q;
    let sum = t.messages().iter().fold(0, |acc, &v| q.add(acc, v));
    q.element(sum)
}

/// Smallest message count `m* = 4 + ceil(100 * log_{n/2}(q / gamma))`
/// certified sufficient for the target distance `gamma`.
///
/// These are the certified proof constants, not optimized ones; the
/// asymptotic form is `O(1 + (sigma + log q) / log n)`.
pub fn required_messages(n: usize, q: PrimeModulus, gamma: f64) -> Result<usize, ProtocolError> {
    if n <= 2 {
        return Err(ProtocolError::DegenerateLogBase(n));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(ProtocolError::BadGamma(gamma));
    }
    let base = n as f64 / 2.0;
    let log = (q.value() as f64 / gamma).ln() / base.ln();
    Ok(4 + (100.0 * log).ceil() as usize)
}

/// Runs the encoder for every party and splits the view: honest parties'
/// canonical transcript plus the corrupted parties' full share vectors.
/// Security statements then apply with `n` counted as honest parties only.
pub fn simulate_with_corruptions(
    inputs: &[u64],
    corrupted: &BTreeSet<usize>,
    params: &ProtocolParams,
    rng: &mut SeededRng,
) -> Result<CorruptionView, ProtocolError> {
    if inputs.len() != params.n {
        return Err(ProtocolError::WrongInputCount {
            got: inputs.len(),
            expected: params.n,
        });
    }
    for &x in inputs {
        if x >= params.q.value() {
            return Err(ProtocolError::InputOutOfRange(x, params.q.value()));
        }
    }
    if let Some(&bad) = corrupted.iter().find(|&&i| i >= params.n) {
        return Err(ProtocolError::BadCorruptedIndex(bad, params.n));
    }
    if corrupted.len() == params.n {
        return Err(ProtocolError::AllCorrupted);
    }

    let mut honest = Vec::new();
    let mut corrupted_shares = BTreeMap::new();
    for (i, &x) in inputs.iter().enumerate() {
        let v = encode(params.q.element(x), params.m, rng);
        if corrupted.contains(&i) {
            corrupted_shares.insert(i, v);
        } else {
            honest.push(v);
        }
    }
    let honest_transcript = shuffle(&honest, rng)?;
    Ok(CorruptionView {
        honest_transcript,
        corrupted_shares,
    })
}
