//! Exact and Monte-Carlo distributional analysis of transcripts.
//!
//! The central objects are the transcript distribution `R(x)` of the
//! protocol on an input vector `x` and the reference `U_a`: the uniform
//! distribution on `F_q^{mn}` conditioned on the coordinates summing to
//! `a`. Both are computed exactly by enumeration at desk scale, as tables
//! over canonical multisets; the security statement bounds the statistical
//! distance `SD(R(x), U_{sum x})`.

use crate::exact::{self, Rational};
use crate::linalg;
use crate::protocol::{ProtocolParams, Transcript};
use crate::rng::{self, SeededRng};
use num_bigint::{BigInt, BigUint};
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Default cap on enumerated elementary states.
pub const DEFAULT_BUDGET: u64 = 100_000_000;
/// State spaces up to this size keep exact rational probabilities.
pub const EXACT_STATE_LIMIT: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("enumeration needs {states} states, over budget {budget}")]
    BudgetExceeded { states: u128, budget: u64 },
    #[error("input vector has length {got}, expected n = {expected}")]
    WrongInputCount { got: usize, expected: usize },
    #[error("input value {0} out of range for modulus {1}")]
    InputOutOfRange(u64, u64),
    #[error("distribution tables live on different parameter spaces")]
    SpaceMismatch,
    #[error("input vectors must have equal sums mod q (sigma-security is only defined there)")]
    SumMismatch,
    #[error("declared sum {0} does not match the input vector sum {1}")]
    WrongDeclaredSum(u64, u64),
    #[error("permutation must be a bijection on 0..{0}")]
    NotAPermutation(usize),
    #[error("moment experiment requires n >= 3 and m >= 3, got n = {0}, m = {1}")]
    MomentNeedsN3M3(usize, usize),
    #[error("malformed distribution file: {0}")]
    BadDistributionFile(String),
}

/// Probabilities of a distribution table: exact counts over a common
/// denominator while the state space is small, floating point beyond.
#[derive(Debug, Clone, PartialEq)]
pub enum Probs {
    Exact { counts: Vec<u64>, total: u64 },
    Float(Vec<f64>),
}

/// An exact probability distribution over canonical transcript multisets.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionTable {
    q: u64,
    n: usize,
    m: usize,
    support: Vec<Vec<u64>>,
    probs: Probs,
}

#[derive(Serialize, Deserialize)]
struct DistEntryFile {
    multiset: Vec<u64>,
    prob_num: String,
    prob_den: String,
}

#[derive(Serialize, Deserialize)]
struct DistFile {
    q: u64,
    n: usize,
    m: usize,
    exact: bool,
    entries: Vec<DistEntryFile>,
}

impl DistributionTable {
    fn from_counts(params: &ProtocolParams, map: BTreeMap<Vec<u64>, u64>, total: u64) -> Self {
        let mut support = Vec::with_capacity(map.len());
        let mut counts = Vec::with_capacity(map.len());
        for (k, v) in map {
            support.push(k);
            counts.push(v);
        }
        debug_assert_eq!(
            counts.iter().map(|&c| c as u128).sum::<u128>(),
            total as u128,
            "enumeration counts must exhaust the state space"
        );
        let probs = if total <= EXACT_STATE_LIMIT {
            Probs::Exact { counts, total }
        } else {
            Probs::Float(counts.iter().map(|&c| c as f64 / total as f64).collect())
        };
        DistributionTable {
            q: params.q.value(),
            n: params.n,
            m: params.m,
            support,
            probs,
        }
    }

    /// Builds a table from explicit (multiset, numerator) pairs over a common
    /// denominator. Mostly useful for tests and hand-built references.
    pub fn from_parts(params: &ProtocolParams, entries: Vec<(Vec<u64>, u64)>, total: u64) -> Self {
        let map: BTreeMap<Vec<u64>, u64> = entries.into_iter().collect();
        Self::from_counts(params, map, total)
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.probs, Probs::Exact { .. })
    }

    pub fn support(&self) -> &[Vec<u64>] {
        &self.support
    }

    pub fn prob(&self, i: usize) -> f64 {
        match &self.probs {
            Probs::Exact { counts, total } => counts[i] as f64 / *total as f64,
            Probs::Float(p) => p[i],
        }
    }

    pub fn prob_exact(&self, i: usize) -> Option<Rational> {
        match &self.probs {
            Probs::Exact { counts, total } => Some(exact::ratio(counts[i], *total)),
            Probs::Float(_) => None,
        }
    }

    pub fn prob_of(&self, multiset: &[u64]) -> f64 {
        match self
            .support
            .binary_search_by(|s| s.as_slice().cmp(multiset))
        {
            Ok(i) => self.prob(i),
            Err(_) => 0.0,
        }
    }

    /// Total mass; exactly 1 in exact mode, within 1e-12 otherwise.
    pub fn total_mass(&self) -> f64 {
        match &self.probs {
            Probs::Exact { counts, total } => {
                counts.iter().map(|&c| c as u128).sum::<u128>() as f64 / *total as f64
            }
            Probs::Float(p) => p.iter().sum(),
        }
    }

    pub fn to_json(&self) -> String {
        let entries = (0..self.len())
            .map(|i| {
                let (num, den) = match &self.probs {
                    Probs::Exact { counts, total } => (counts[i].to_string(), total.to_string()),
                    Probs::Float(p) => {
                        let r = Rational::from_float(p[i]).unwrap_or_else(Rational::zero);
                        (r.numer().to_string(), r.denom().to_string())
                    }
                };
                DistEntryFile {
                    multiset: self.support[i].clone(),
                    prob_num: num,
                    prob_den: den,
                }
            })
            .collect();
        let file = DistFile {
            q: self.q,
            n: self.n,
            m: self.m,
            exact: self.is_exact(),
            entries,
        };
        serde_json::to_string(&file).expect("distribution serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, AnalysisError> {
        let file: DistFile = serde_json::from_str(text)
            .map_err(|e| AnalysisError::BadDistributionFile(e.to_string()))?;
        let mut support = Vec::with_capacity(file.entries.len());
        if file.exact {
            let mut counts = Vec::with_capacity(file.entries.len());
            let mut total = 0u64;
            for e in &file.entries {
                support.push(e.multiset.clone());
                let num: u64 = e
                    .prob_num
                    .parse()
                    .map_err(|_| AnalysisError::BadDistributionFile("bad numerator".into()))?;
                let den: u64 = e
                    .prob_den
                    .parse()
                    .map_err(|_| AnalysisError::BadDistributionFile("bad denominator".into()))?;
                counts.push(num);
                total = den;
            }
            Ok(DistributionTable {
                q: file.q,
                n: file.n,
                m: file.m,
                support,
                probs: Probs::Exact { counts, total },
            })
        } else {
            let mut probs = Vec::with_capacity(file.entries.len());
            for e in &file.entries {
                support.push(e.multiset.clone());
                let num: BigInt = e
                    .prob_num
                    .parse()
                    .map_err(|_| AnalysisError::BadDistributionFile("bad numerator".into()))?;
                let den: BigInt = e
                    .prob_den
                    .parse()
                    .map_err(|_| AnalysisError::BadDistributionFile("bad denominator".into()))?;
                let r = Rational::new(num, den);
                probs.push(exact::to_f64(&r));
            }
            Ok(DistributionTable {
                q: file.q,
                n: file.n,
                m: file.m,
                support,
                probs: Probs::Float(probs),
            })
        }
    }
}

fn states_for(q: u64, digits: usize) -> u128 {
    (q as u128).pow(digits as u32)
}

fn check_budget(states: u128, budget: u64) -> Result<(), AnalysisError> {
    if states > budget as u128 {
        return Err(AnalysisError::BudgetExceeded { states, budget });
    }
    Ok(())
}

fn check_inputs(x: &[u64], params: &ProtocolParams) -> Result<(), AnalysisError> {
    if x.len() != params.n {
        return Err(AnalysisError::WrongInputCount {
            got: x.len(),
            expected: params.n,
        });
    }
    for &v in x {
        if v >= params.q.value() {
            return Err(AnalysisError::InputOutOfRange(v, params.q.value()));
        }
    }
    Ok(())
}

/// Visits every vector of `digits` base-`q` digits exactly once.
fn for_each_tuple(digits: usize, q: u64, mut f: impl FnMut(&[u64])) {
    let mut state = vec![0u64; digits];
    loop {
        f(&state);
        let mut i = 0;
        loop {
            if i == digits {
                return;
            }
            state[i] += 1;
            if state[i] < q {
                break;
            }
            state[i] = 0;
            i += 1;
        }
    }
}

fn bump(map: &mut BTreeMap<Vec<u64>, u64>, key: &[u64]) {
    if let Some(c) = map.get_mut(key) {
        *c += 1;
    } else {
        map.insert(key.to_vec(), 1);
    }
}

/// Exact distribution of the canonical transcript multiset under the
/// protocol on input vector `x`, by enumerating all `q^((m-1)n)` joint share
/// choices with equal weight.
pub fn exact_transcript_distribution(
    x: &[u64],
    params: &ProtocolParams,
    budget: u64,
) -> Result<DistributionTable, AnalysisError> {
    check_inputs(x, params)?;
    let q = params.q;
    let free = (params.m - 1) * params.n;
    let states = states_for(q.value(), free);
    check_budget(states, budget)?;

    let mut map = BTreeMap::new();
    let mut multiset = vec![0u64; params.message_total()];
    for_each_tuple(free, q.value(), |draw| {
        for i in 0..params.n {
            let block = &draw[(params.m - 1) * i..(params.m - 1) * (i + 1)];
            let mut acc = 0u64;
            for (j, &s) in block.iter().enumerate() {
                multiset[params.m * i + j] = s;
                acc = q.add(acc, s);
            }
            multiset[params.m * i + params.m - 1] = q.sub(x[i], acc);
        }
        multiset.sort_unstable();
        bump(&mut map, &multiset);
    });
    Ok(DistributionTable::from_counts(params, map, states as u64))
}

/// Exact distribution `U_a` of the canonical multiset of a uniform vector in
/// `F_q^{mn}` conditioned on coordinate sum `a`.
pub fn uniform_conditioned_distribution(
    a: u64,
    params: &ProtocolParams,
    budget: u64,
) -> Result<DistributionTable, AnalysisError> {
    let q = params.q;
    if a >= q.value() {
        return Err(AnalysisError::InputOutOfRange(a, q.value()));
    }
    let free = params.message_total() - 1;
    let states = states_for(q.value(), free);
    check_budget(states, budget)?;

    let mut map = BTreeMap::new();
    let mut multiset = vec![0u64; params.message_total()];
    for_each_tuple(free, q.value(), |draw| {
        let mut acc = 0u64;
        for (j, &v) in draw.iter().enumerate() {
            multiset[j] = v;
            acc = q.add(acc, v);
        }
        multiset[free] = q.sub(a, acc);
        multiset.sort_unstable();
        bump(&mut map, &multiset);
    });
    Ok(DistributionTable::from_counts(params, map, states as u64))
}

/// A statistical distance, exact when both inputs were exact.
#[derive(Debug, Clone, PartialEq)]
pub struct StatDistance {
    pub value: f64,
    pub exact: Option<Rational>,
}

/// `SD(D1, D2) = (1/2) * sum_y |D1(y) - D2(y)|` over the union of supports.
pub fn statistical_distance(
    d1: &DistributionTable,
    d2: &DistributionTable,
) -> Result<StatDistance, AnalysisError> {
    if d1.q != d2.q || d1.n != d2.n || d1.m != d2.m {
        return Err(AnalysisError::SpaceMismatch);
    }
    let exact = match (&d1.probs, &d2.probs) {
        (
            Probs::Exact {
                counts: c1,
                total: t1,
            },
            Probs::Exact {
                counts: c2,
                total: t2,
            },
        ) => {
            let mut num: u128 = 0;
            merge_supports(d1, d2, |i, j| {
                let a = i.map(|i| c1[i] as u128 * *t2 as u128).unwrap_or(0);
                let b = j.map(|j| c2[j] as u128 * *t1 as u128).unwrap_or(0);
                num += a.abs_diff(b);
            });
            let den = 2u128 * *t1 as u128 * *t2 as u128;
            Some(Rational::new(BigInt::from(num), BigInt::from(den)))
        }
        _ => None,
    };
    let value = match &exact {
        Some(r) => exact::to_f64(r),
        None => {
            let mut acc = 0.0;
            merge_supports(d1, d2, |i, j| {
                let a = i.map(|i| d1.prob(i)).unwrap_or(0.0);
                let b = j.map(|j| d2.prob(j)).unwrap_or(0.0);
                acc += (a - b).abs();
            });
            acc / 2.0
        }
    };
    Ok(StatDistance { value, exact })
}

fn merge_supports(
    d1: &DistributionTable,
    d2: &DistributionTable,
    mut f: impl FnMut(Option<usize>, Option<usize>),
) {
    let (mut i, mut j) = (0, 0);
    while i < d1.len() || j < d2.len() {
        if j == d2.len() || (i < d1.len() && d1.support[i] < d2.support[j]) {
            f(Some(i), None);
            i += 1;
        } else if i == d1.len() || d2.support[j] < d1.support[i] {
            f(None, Some(j));
            j += 1;
        } else {
            f(Some(i), Some(j));
            i += 1;
            j += 1;
        }
    }
}

/// `SD(R(x), U_{sum x})`: distance from the protocol transcript to the
/// sum-conditioned uniform reference.
pub fn sd_to_conditioned_uniform(
    x: &[u64],
    params: &ProtocolParams,
    budget: u64,
) -> Result<StatDistance, AnalysisError> {
    check_inputs(x, params)?;
    let a = x.iter().fold(0, |acc, &v| params.q.add(acc, v));
    let rx = exact_transcript_distribution(x, params, budget)?;
    let ua = uniform_conditioned_distribution(a, params, budget)?;
    statistical_distance(&rx, &ua)
}

/// Exact security check for one input pair with equal sums: the transcript
/// distance itself plus the two distances to the shared uniform reference,
/// whose sum certifies an upper bound by the triangle inequality.
#[derive(Debug, Clone)]
pub struct SecurityCheck {
    pub sd: StatDistance,
    pub sd_x_uniform: StatDistance,
    pub sd_xp_uniform: StatDistance,
    pub certified_bound: f64,
    pub certified_bound_exact: Option<Rational>,
    pub triangle_holds: bool,
}

pub fn security_check(
    x: &[u64],
    x_prime: &[u64],
    params: &ProtocolParams,
    budget: u64,
) -> Result<SecurityCheck, AnalysisError> {
    check_inputs(x, params)?;
    check_inputs(x_prime, params)?;
    let q = params.q;
    let sum = |v: &[u64]| v.iter().fold(0, |acc, &t| q.add(acc, t));
    let a = sum(x);
    if a != sum(x_prime) {
        return Err(AnalysisError::SumMismatch);
    }
    let rx = exact_transcript_distribution(x, params, budget)?;
    let rxp = exact_transcript_distribution(x_prime, params, budget)?;
    let ua = uniform_conditioned_distribution(a, params, budget)?;
    let sd = statistical_distance(&rx, &rxp)?;
    let sd_x_uniform = statistical_distance(&rx, &ua)?;
    let sd_xp_uniform = statistical_distance(&rxp, &ua)?;
    let certified_bound = sd_x_uniform.value + sd_xp_uniform.value;
    let certified_bound_exact = match (&sd_x_uniform.exact, &sd_xp_uniform.exact) {
        (Some(a), Some(b)) => Some(a + b),
        _ => None,
    };
    let triangle_holds = match (&sd.exact, &certified_bound_exact) {
        (Some(s), Some(b)) => s <= b,
        _ => sd.value <= certified_bound + 1e-12,
    };
    Ok(SecurityCheck {
        sd,
        sd_x_uniform,
        sd_xp_uniform,
        certified_bound,
        certified_bound_exact,
        triangle_holds,
    })
}

/// Monte-Carlo advantage of a fixed acceptor between two transcript
/// samplers: a consistent lower-bound estimator of their statistical
/// distance.
#[derive(Debug, Clone, PartialEq)]
pub struct McAdvantage {
    pub estimate: f64,
    pub stderr: f64,
    pub accept_rate_1: f64,
    pub accept_rate_2: f64,
    pub trials: u64,
}

pub fn mc_advantage(
    mut sampler1: impl FnMut(&mut SeededRng) -> Transcript,
    mut sampler2: impl FnMut(&mut SeededRng) -> Transcript,
    acceptor: impl Fn(&Transcript) -> bool,
    trials: u64,
    seed: u64,
) -> McAdvantage {
    assert!(trials >= 1, "need at least one trial");
    let mut hits1 = 0u64;
    let mut hits2 = 0u64;
    let mut rng1 = rng::substream(seed, 0);
    let mut rng2 = rng::substream(seed, 1);
    for _ in 0..trials {
        if acceptor(&sampler1(&mut rng1)) {
            hits1 += 1;
        }
        if acceptor(&sampler2(&mut rng2)) {
            hits2 += 1;
        }
    }
    let p1 = hits1 as f64 / trials as f64;
    let p2 = hits2 as f64 / trials as f64;
    let stderr = ((p1 * (1.0 - p1) + p2 * (1.0 - p2)) / trials as f64).sqrt();
    McAdvantage {
        estimate: p1 - p2,
        stderr,
        accept_rate_1: p1,
        accept_rate_2: p2,
        trials,
    }
}

/// Exact `Pr[t ~ U_a satisfies all per-party block-sum equations under pi]`.
///
/// The block events are independent and each costs a factor `1/q`, with the
/// last one implied, so the result is always exactly `q^-(n-1)`.
pub fn first_moment_check(
    pi: &[usize],
    x: &[u64],
    a: u64,
    params: &ProtocolParams,
    budget: u64,
) -> Result<Rational, AnalysisError> {
    check_inputs(x, params)?;
    let q = params.q;
    let total = params.message_total();
    if pi.len() != total {
        return Err(AnalysisError::NotAPermutation(total));
    }
    let mut seen = vec![false; total];
    for &p in pi {
        if p >= total || seen[p] {
            return Err(AnalysisError::NotAPermutation(total));
        }
        seen[p] = true;
    }
    let declared = x.iter().fold(0, |acc, &v| q.add(acc, v));
    if declared != a {
        return Err(AnalysisError::WrongDeclaredSum(a, declared));
    }
    let free = total - 1;
    let states = states_for(q.value(), free);
    check_budget(states, budget)?;

    let mut hits: u64 = 0;
    let mut t = vec![0u64; total];
    for_each_tuple(free, q.value(), |draw| {
        let mut acc = 0u64;
        for (j, &v) in draw.iter().enumerate() {
            t[j] = v;
            acc = q.add(acc, v);
        }
        t[free] = q.sub(a, acc);
        let ok = (0..params.n).all(|i| {
            let mut s = 0u64;
            for j in params.m * i..params.m * (i + 1) {
                s = q.add(s, t[pi[j]]);
            }
            s == x[i]
        });
        if ok {
            hits += 1;
        }
    });
    Ok(exact::ratio(hits, states as u64))
}

/// Outcome of the second-moment sampling experiment at the zero input.
///
/// `mu` is the exact first moment `(mn)!/q^(n-1)` of the permutation count.
/// The scaled estimate is `E[Y Y'] * q^(2n-1)`, compared against the
/// truncated bounding series (truncated at `k = 2n`, the largest possible
/// rank deficit).
#[derive(Debug, Clone)]
pub struct MomentRecord {
    pub mu: Rational,
    pub empirical_second_moment_ratio: f64,
    pub k_tail: BTreeMap<usize, f64>,
    pub scaled_estimate: f64,
    pub scaled_stderr: f64,
    pub series_bound: f64,
    pub samples: u64,
    pub pass: bool,
}

/// The truncated bounding series `sum_{k=1}^{2n} q^k * r^((k-1)/2)` with
/// `r = n^2/(n/2)^(m-2)`, scaled by `q^(2n-1)` like the estimate.
pub fn second_moment_series(n: usize, m: usize, q: u64) -> f64 {
    let r = (n as f64).powi(2) / (n as f64 / 2.0).powi(m as i32 - 2);
    (1..=2 * n)
        .map(|k| (q as f64).powi(k as i32) * r.powf((k as f64 - 1.0) / 2.0))
        .sum()
}

pub fn second_moment_experiment(
    params: &ProtocolParams,
    samples: u64,
    seed: u64,
) -> Result<MomentRecord, AnalysisError> {
    let (n, m) = (params.n, params.m);
    if n < 3 || m < 3 {
        return Err(AnalysisError::MomentNeedsN3M3(n, m));
    }
    assert!(samples >= 1, "need at least one sample");
    let q = params.q;
    let total = params.message_total();

    // one substream per sample and exact integer merging keep the parallel
    // loop independent of scheduling
    let (yy_hits, defc_hist) = {
        use rayon::prelude::*;
        (0..samples)
            .into_par_iter()
            .fold(
                || (0u64, vec![0u64; 2 * n + 1]),
                |(mut hits, mut hist), i| {
                    let mut r = rng::substream(seed, i);
                    let pi = rng::random_permutation(total, &mut r);
                    let pi_prime = rng::random_permutation(total, &mut r);
                    // t ~ U_0
                    let mut t = vec![0u64; total];
                    let mut acc = 0u64;
                    for slot in t.iter_mut().take(total - 1) {
                        let v = rand::Rng::random_range(&mut r, 0..q.value());
                        *slot = v;
                        acc = q.add(acc, v);
                    }
                    t[total - 1] = q.neg(acc);

                    let block_zero = |perm: &[usize]| {
                        (0..n).all(|i| {
                            let mut s = 0u64;
                            for j in m * i..m * (i + 1) {
                                s = q.add(s, t[perm[j]]);
                            }
                            s == 0
                        })
                    };
                    if block_zero(&pi) && block_zero(&pi_prime) {
                        hits += 1;
                    }
                    hist[linalg::rank_deficit_fast(&pi, &pi_prime, n, m, q)] += 1;
                    (hits, hist)
                },
            )
            .reduce(
                || (0u64, vec![0u64; 2 * n + 1]),
                |(h1, mut a), (h2, b)| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    (h1 + h2, a)
                },
            )
    };

    let p_hat = yy_hits as f64 / samples as f64;
    let scale = (q.value() as f64).powi(2 * n as i32 - 1);
    let scaled_estimate = p_hat * scale;
    let scaled_stderr = (p_hat * (1.0 - p_hat) / samples as f64).sqrt() * scale;
    let series_bound = second_moment_series(n, m, q.value());
    let k_tail: BTreeMap<usize, f64> = (1..=2 * n)
        .map(|k| {
            let hits: u64 = defc_hist.iter().skip(k).sum();
            (k, hits as f64 / samples as f64)
        })
        .collect();
    let mu = Rational::new(
        BigInt::from(exact::factorial(total as u64)),
        BigInt::from(exact::pow_big(q.value(), n as u64 - 1)),
    );
    debug_assert!(mu.is_positive());
    let pass = scaled_estimate <= series_bound + 5.0 * scaled_stderr;
    Ok(MomentRecord {
        mu,
        empirical_second_moment_ratio: scaled_estimate / series_bound,
        k_tail,
        scaled_estimate,
        scaled_stderr,
        series_bound,
        samples,
        pass,
    })
}

/// Exact mean of the transcript count variable: `(mn)! / q^(n-1)`.
pub fn first_moment_mu(n: usize, m: usize, q: u64) -> Rational {
    Rational::new(
        BigInt::from(exact::factorial((n * m) as u64)),
        BigInt::from(BigUint::from(q).pow(n as u32 - 1)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ffield::PrimeModulus;
    use crate::protocol::{encode, shuffle, ProtocolParams};
    use num_traits::One;

    fn params(n: usize, m: usize, q: u64) -> ProtocolParams {
        ProtocolParams::new(n, m, PrimeModulus::new(q).unwrap()).unwrap()
    }

    fn ratio(n: u64, d: u64) -> Rational {
        exact::ratio(n, d)
    }

    #[test]
    fn point_masses_at_m1() {
        let p = params(1, 1, 5);
        let d = exact_transcript_distribution(&[3], &p, DEFAULT_BUDGET).unwrap();
        assert_eq!(d.support(), &[vec![3]]);
        assert_eq!(d.prob_exact(0), Some(Rational::one()));

        let p = params(2, 1, 2);
        let d = exact_transcript_distribution(&[0, 1], &p, DEFAULT_BUDGET).unwrap();
        assert_eq!(d.support(), &[vec![0, 1]]);
        assert_eq!(d.prob_exact(0), Some(Rational::one()));
    }

    #[test]
    fn n2m2q2_table_matches_hand_enumeration() {
        // independent oracle: enumerate the 4 joint choices of first shares
        let mut expected: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
        for y1 in 0u64..2 {
            for y3 in 0u64..2 {
                let mut ms = vec![y1, y1, y3, y3]; // x = 0 forces the pair repeat mod 2
                ms.sort_unstable();
                *expected.entry(ms).or_insert(0) += 1;
            }
        }
        let p = params(2, 2, 2);
        let d = exact_transcript_distribution(&[0, 0], &p, DEFAULT_BUDGET).unwrap();
        assert_eq!(d.len(), expected.len());
        for (i, ms) in d.support().iter().enumerate() {
            assert_eq!(d.prob_exact(i), Some(ratio(expected[ms], 4)));
        }
        assert_eq!(d.prob_of(&[0, 0, 1, 1]), 0.5);
    }

    #[test]
    fn conditioned_uniform_examples() {
        let p = params(1, 1, 7);
        let d = uniform_conditioned_distribution(4, &p, DEFAULT_BUDGET).unwrap();
        assert_eq!(d.support(), &[vec![4]]);

        let p = params(2, 1, 2);
        let d = uniform_conditioned_distribution(0, &p, DEFAULT_BUDGET).unwrap();
        assert_eq!(d.support(), &[vec![0, 0], vec![1, 1]]);
        assert_eq!(d.prob_exact(0), Some(ratio(1, 2)));
        assert_eq!(d.prob_exact(1), Some(ratio(1, 2)));

        for (n, m, q, a) in [(2, 2, 3, 1u64), (3, 1, 5, 2), (2, 3, 2, 1)] {
            let p = params(n, m, q);
            let d = uniform_conditioned_distribution(a, &p, DEFAULT_BUDGET).unwrap();
            assert!((d.total_mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sd_basics() {
        let p = params(2, 2, 2);
        let d = exact_transcript_distribution(&[0, 0], &p, DEFAULT_BUDGET).unwrap();
        let sd = statistical_distance(&d, &d).unwrap();
        assert_eq!(sd.exact, Some(Rational::zero()));

        // disjoint supports
        let a = DistributionTable::from_parts(&p, vec![(vec![0, 0, 0, 0], 1)], 1);
        let b = DistributionTable::from_parts(&p, vec![(vec![1, 1, 1, 1], 1)], 1);
        assert_eq!(
            statistical_distance(&a, &b).unwrap().exact,
            Some(Rational::one())
        );

        // hand sum: {A: 1/2, B: 1/2} vs {A: 1/4, B: 3/4} -> 1/4
        let a = DistributionTable::from_parts(&p, vec![(vec![0], 2), (vec![1], 2)], 4);
        let b = DistributionTable::from_parts(&p, vec![(vec![0], 1), (vec![1], 3)], 4);
        assert_eq!(
            statistical_distance(&a, &b).unwrap().exact,
            Some(ratio(1, 4))
        );
    }

    #[test]
    fn security_check_examples() {
        let p = params(2, 1, 5);
        let c = security_check(&[0, 0], &[1, 4], &p, DEFAULT_BUDGET).unwrap();
        assert_eq!(c.sd.exact, Some(Rational::one()));
        assert!(c.triangle_holds);

        let p = params(2, 2, 2);
        let c = security_check(&[0, 0], &[1, 1], &p, DEFAULT_BUDGET).unwrap();
        // independent 16+16-state oracle
        let oracle_sd = {
            let mut mass: BTreeMap<Vec<u64>, i64> = BTreeMap::new();
            for p1 in 0u64..2 {
                for p2 in 0u64..2 {
                    // input (0,0): party i sends (y, y); input (1,1): (y, 1-y)
                    let mut ms0 = vec![p1, p1, p2, p2];
                    ms0.sort_unstable();
                    *mass.entry(ms0).or_insert(0) += 1;
                    let mut ms1 = vec![p1, 1 - p1, p2, 1 - p2];
                    ms1.sort_unstable();
                    *mass.entry(ms1).or_insert(0) -= 1;
                }
            }
            let num: i64 = mass.values().map(|v| v.abs()).sum();
            ratio(num as u64, 8)
        };
        assert_eq!(c.sd.exact, Some(oracle_sd));
        assert!(c.triangle_holds);
        let x = c.sd.exact.unwrap();
        let bound = c.certified_bound_exact.unwrap();
        assert!(bound >= x);

        assert!(matches!(
            security_check(&[0, 0], &[0, 1], &p, DEFAULT_BUDGET),
            Err(AnalysisError::SumMismatch)
        ));
        let same = security_check(&[1, 1], &[1, 1], &p, DEFAULT_BUDGET).unwrap();
        assert_eq!(same.sd.exact, Some(Rational::zero()));
    }

    #[test]
    fn first_moment_exact_values() {
        // n=1: probability 1
        let p = params(1, 2, 3);
        let r = first_moment_check(&[0, 1], &[2], 2, &p, DEFAULT_BUDGET).unwrap();
        assert_eq!(r, Rational::one());

        // n=2, m=1, q=2: 1/2 for any permutation
        let p = params(2, 1, 2);
        for pi in [[0usize, 1], [1, 0]] {
            let r = first_moment_check(&pi, &[0, 1], 1, &p, DEFAULT_BUDGET).unwrap();
            assert_eq!(r, ratio(1, 2));
        }

        // n=2, m=2, q=3, identity: 1/3
        let p = params(2, 2, 3);
        let r = first_moment_check(&[0, 1, 2, 3], &[1, 2], 0, &p, DEFAULT_BUDGET).unwrap();
        assert_eq!(r, ratio(1, 3));
    }

    #[test]
    fn mc_advantage_behaviour() {
        let p = params(2, 1, 2);
        let sample_const = |inputs: [u64; 2]| {
            move |r: &mut SeededRng| {
                let q = PrimeModulus::new(2).unwrap();
                let vs: Vec<_> = inputs.iter().map(|&x| encode(q.element(x), 1, r)).collect();
                shuffle(&vs, r).unwrap()
            }
        };
        let _ = p;

        // identical samplers concentrate at zero
        let adv = mc_advantage(
            sample_const([0, 1]),
            sample_const([0, 1]),
            |t| t.messages()[0] == 0,
            20_000,
            9,
        );
        assert!(
            adv.estimate.abs() <= 5.0 * adv.stderr.max(1e-4),
            "estimate {}",
            adv.estimate
        );

        // constant-true acceptor: exactly zero
        let adv = mc_advantage(
            sample_const([0, 0]),
            sample_const([1, 1]),
            |_| true,
            1_000,
            1,
        );
        assert_eq!(adv.estimate, 0.0);

        // point masses: multiset {0,0} separates (0,0) from (1,1) perfectly
        let adv = mc_advantage(
            sample_const([0, 0]),
            sample_const([1, 1]),
            |t| t.messages() == [0, 0],
            2_000,
            2,
        );
        assert_eq!(adv.estimate, 1.0);
    }

    #[test]
    fn second_moment_at_smallest_grid_point() {
        let p = params(3, 3, 2);
        let rec = second_moment_experiment(&p, 100_000, 11).unwrap();
        assert!(
            rec.pass,
            "estimate {} vs bound {}",
            rec.scaled_estimate, rec.series_bound
        );
        // k = 1 term of the series is q
        assert!(rec.series_bound >= 2.0);
        assert_eq!(rec.mu, first_moment_mu(3, 3, 2));
        // deficits are always >= 1
        assert_eq!(rec.k_tail[&1], 1.0);
        assert!(matches!(
            second_moment_experiment(&params(2, 3, 2), 10, 0),
            Err(AnalysisError::MomentNeedsN3M3(2, 3))
        ));
    }

    #[test]
    fn forced_equal_permutations_square_to_the_first_moment() {
        // with pi = pi' the product indicator is Y itself, so its mean over
        // U_0 is exactly q^-(n-1); enumerate all conditioned vectors
        let p = params(3, 3, 2);
        let q = p.q;
        let total = p.message_total();
        let mut r = crate::rng::from_seed(4);
        let pi = crate::rng::random_permutation(total, &mut r);
        let mut hits = 0u64;
        let mut states = 0u64;
        let mut t = vec![0u64; total];
        let mut draw = vec![0u64; total - 1];
        loop {
            let mut acc = 0u64;
            for (j, &v) in draw.iter().enumerate() {
                t[j] = v;
                acc = q.add(acc, v);
            }
            t[total - 1] = q.neg(acc);
            let y = (0..3).all(|i| {
                let mut s = 0u64;
                for j in 3 * i..3 * (i + 1) {
                    s = q.add(s, t[pi[j]]);
                }
                s == 0
            });
            // Y * Y = Y for an indicator
            if y {
                hits += 1;
            }
            states += 1;
            let mut i = 0;
            loop {
                if i == total - 1 {
                    break;
                }
                draw[i] += 1;
                if draw[i] < 2 {
                    break;
                }
                draw[i] = 0;
                i += 1;
            }
            if i == total - 1 {
                break;
            }
        }
        assert_eq!(exact::ratio(hits, states), exact::ratio(1, 4)); // q^-(n-1)
        let via_first_moment = first_moment_check(&pi, &[0, 0, 0], 0, &p, DEFAULT_BUDGET).unwrap();
        assert_eq!(via_first_moment, exact::ratio(1, 4));
    }

    #[test]
    fn series_k1_term() {
        // the k=1 term is q/q^(2n-1) = q^-(2n-2); scaled by q^(2n-1) it is q
        let n = 3;
        let q = 2.0f64;
        let series = second_moment_series(n, 3, 2);
        assert!(series > q);
    }

    #[test]
    fn budget_is_enforced() {
        let p = params(4, 4, 101);
        assert!(matches!(
            exact_transcript_distribution(&[0, 0, 0, 0], &p, 1000),
            Err(AnalysisError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn first_moment_validates_inputs() {
        let p = params(2, 1, 3);
        // not a bijection
        assert!(matches!(
            first_moment_check(&[0, 0], &[1, 2], 0, &p, DEFAULT_BUDGET),
            Err(AnalysisError::NotAPermutation(2))
        ));
        // declared sum disagrees with the vector
        assert!(matches!(
            first_moment_check(&[0, 1], &[1, 2], 1, &p, DEFAULT_BUDGET),
            Err(AnalysisError::WrongDeclaredSum(1, 0))
        ));
    }

    #[test]
    fn sd_rejects_mismatched_spaces() {
        let a = exact_transcript_distribution(&[0, 0], &params(2, 2, 2), DEFAULT_BUDGET).unwrap();
        let b = exact_transcript_distribution(&[0, 0], &params(2, 1, 2), DEFAULT_BUDGET).unwrap();
        assert!(matches!(
            statistical_distance(&a, &b),
            Err(AnalysisError::SpaceMismatch)
        ));
    }

    #[test]
    fn distribution_file_round_trip() {
        let p = params(2, 2, 3);
        let d = exact_transcript_distribution(&[1, 2], &p, DEFAULT_BUDGET).unwrap();
        let text = d.to_json();
        let back = DistributionTable::from_json(&text).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn empirical_frequencies_match_exact_table() {
        // chi-square against the exact table, significance 1e-3
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let p = params(2, 2, 3);
        let d = exact_transcript_distribution(&[1, 2], &p, DEFAULT_BUDGET).unwrap();
        let trials = 100_000u64;
        let q = PrimeModulus::new(3).unwrap();
        let mut counts = vec![0u64; d.len()];
        let mut r = crate::rng::from_seed(42);
        for _ in 0..trials {
            let vs: Vec<_> = [1u64, 2]
                .iter()
                .map(|&x| encode(q.element(x), 2, &mut r))
                .collect();
            let t = shuffle(&vs, &mut r).unwrap();
            let idx = d
                .support()
                .binary_search_by(|s| s.as_slice().cmp(t.messages()))
                .expect("sampled multiset must be in the exact support");
            counts[idx] += 1;
        }
        let chi2: f64 = (0..d.len())
            .map(|i| {
                let expected = d.prob(i) * trials as f64;
                (counts[i] as f64 - expected).powi(2) / expected
            })
            .sum();
        let threshold = ChiSquared::new((d.len() - 1) as f64)
            .unwrap()
            .inverse_cdf(1.0 - 1e-3);
        assert!(chi2 < threshold, "chi2 = {chi2}, threshold = {threshold}");
    }

    #[test]
    fn theorem3_distance_zero_when_single_message() {
        // m*n = 1: R(x) and U_a are both the same point mass
        let p = params(1, 1, 5);
        let sd = sd_to_conditioned_uniform(&[2], &p, DEFAULT_BUDGET).unwrap();
        assert_eq!(sd.exact, Some(Rational::zero()));
    }
}
