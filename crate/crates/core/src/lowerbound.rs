//! Lower bounds on the message count of one-round aggregation protocols in
//! the anonymized model.
//!
//! Two independent mechanisms force messages:
//!
//! * a field-dependent bound: over all input pairs with a common sum, the
//!   average transcript distance is at least `1 - n^(nm)/q^(n-1)`, because a
//!   shuffled output can be explained by at most `n^(nm)` inputs;
//! * a security-dependent bound: for any correct encoder with `n > 2`
//!   parties there is a sum-zero input vector whose transcript distribution
//!   is at least `(10nm)^(-5m)` away from the all-zero one, witnessed by a
//!   distinguisher built from the smallest marginal size `t` at which the
//!   per-input encodings separate.
//!
//! Encoders are handled as explicit finite tables ([`EncoderSpec`]),
//! symmetrized at construction: treating an encoding as a multiset of
//! messages is without loss of generality, since a party may re-shuffle its
//! own messages before sending.

use crate::exact::{self, Rational};
use crate::ffield::PrimeModulus;
use crate::rng::{self, SeededRng};
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LowerBoundError {
    #[error("enumeration needs {states} states, over budget {budget}")]
    BudgetExceeded { states: u128, budget: u64 },
    #[error("invalid encoder table: {0}")]
    BadTable(String),
    #[error("the distinguisher theorem requires n > 2 parties, got {0}")]
    NeedsThreeParties(usize),
    #[error(
        "no marginal size separates the encodings; the encoder cannot be a correct aggregator"
    )]
    NotSeparating,
    #[error("input value {0} out of range for domain size {1}")]
    InputOutOfRange(usize, usize),
    #[error("expected a multiset of {expected} messages, got {got}")]
    WrongTupleLength { got: usize, expected: usize },
    #[error("sigma must be at least 1, got {0}")]
    SigmaTooSmall(f64),
}

/// Default cap on enumerated states for the exact paths.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

pub type MultisetDist = BTreeMap<Vec<u16>, Rational>;

/// A finite-table encoder: for each input `x` in `0..q`, a distribution over
/// multisets of `m` messages from an alphabet of size `alphabet`.
///
/// Tables built from sampled frequencies instead of exact probabilities are
/// flagged `estimated`, and everything derived from them inherits the flag.
#[derive(Debug, Clone)]
pub struct EncoderSpec {
    q: usize,
    alphabet: usize,
    m: usize,
    estimated: bool,
    tables: Vec<MultisetDist>,
}

impl EncoderSpec {
    /// Builds a spec from per-input lists of (tuple, probability) pairs.
    /// Tuples are sorted into multisets, which symmetrizes the encoder.
    pub fn from_tables(
        q: usize,
        alphabet: usize,
        m: usize,
        raw: Vec<Vec<(Vec<u16>, Rational)>>,
    ) -> Result<Self, LowerBoundError> {
        if raw.len() != q {
            return Err(LowerBoundError::BadTable(format!(
                "need one table per input: got {}, expected {}",
                raw.len(),
                q
            )));
        }
        let mut tables = Vec::with_capacity(q);
        for (x, entries) in raw.into_iter().enumerate() {
            let mut dist: MultisetDist = BTreeMap::new();
            let mut mass = Rational::zero();
            for (mut tuple, p) in entries {
                if tuple.len() != m {
                    return Err(LowerBoundError::BadTable(format!(
                        "input {x}: tuple of length {}, expected {m}",
                        tuple.len()
                    )));
                }
                if tuple.iter().any(|&s| s as usize >= alphabet) {
                    return Err(LowerBoundError::BadTable(format!(
                        "input {x}: symbol out of alphabet range {alphabet}"
                    )));
                }
                if p.is_negative() {
                    return Err(LowerBoundError::BadTable(format!(
                        "input {x}: negative mass"
                    )));
                }
                mass += &p;
                tuple.sort_unstable();
                *dist.entry(tuple).or_insert_with(Rational::zero) += p;
            }
            if !mass.is_one() {
                return Err(LowerBoundError::BadTable(format!(
                    "input {x}: mass sums to {mass}, expected 1"
                )));
            }
            tables.push(dist);
        }
        Ok(EncoderSpec {
            q,
            alphabet,
            m,
            estimated: false,
            tables,
        })
    }

    /// The additive-share encoder over `F_q` with `m` messages: input `x`
    /// maps uniformly onto the `q^(m-1)` tuples summing to `x`.
    pub fn split_and_mix(q: PrimeModulus, m: usize) -> Result<Self, LowerBoundError> {
        let qv = q.value();
        assert!(m >= 1);
        let states = (qv as u128).pow(m as u32 - 1);
        if states > DEFAULT_BUDGET as u128 {
            return Err(LowerBoundError::BudgetExceeded {
                states,
                budget: DEFAULT_BUDGET,
            });
        }
        let total = states as u64;
        let mut tables = Vec::with_capacity(qv as usize);
        for x in 0..qv {
            let mut dist: MultisetDist = BTreeMap::new();
            let mut tuple = vec![0u16; m];
            let mut draw = vec![0u64; m - 1];
            'draws: loop {
                let mut acc = 0u64;
                for (j, &s) in draw.iter().enumerate() {
                    tuple[j] = s as u16;
                    acc = q.add(acc, s);
                }
                tuple[m - 1] = q.sub(x, acc) as u16;
                let mut key = tuple.clone();
                key.sort_unstable();
                *dist.entry(key).or_insert_with(Rational::zero) += exact::ratio(1, total);
                let mut i = 0;
                loop {
                    if i == m - 1 {
                        break 'draws;
                    }
                    draw[i] += 1;
                    if draw[i] < qv {
                        break;
                    }
                    draw[i] = 0;
                    i += 1;
                }
            }
            tables.push(dist);
        }
        Ok(EncoderSpec {
            q: qv as usize,
            alphabet: qv as usize,
            m,
            estimated: false,
            tables,
        })
    }

    /// Estimates a spec by sampling a black-box encoder. Results derived
    /// from it carry statistical slack and are flagged accordingly.
    pub fn from_sampler(
        q: usize,
        alphabet: usize,
        m: usize,
        samples_per_input: u64,
        seed: u64,
        mut sampler: impl FnMut(usize, &mut SeededRng) -> Vec<u16>,
    ) -> Self {
        let mut tables = Vec::with_capacity(q);
        for x in 0..q {
            let mut rng = rng::substream(seed, x as u64);
            let mut dist: MultisetDist = BTreeMap::new();
            for _ in 0..samples_per_input {
                let mut tuple = sampler(x, &mut rng);
                assert_eq!(tuple.len(), m, "sampler must return m messages");
                tuple.sort_unstable();
                *dist.entry(tuple).or_insert_with(Rational::zero) +=
                    exact::ratio(1, samples_per_input);
            }
            tables.push(dist);
        }
        EncoderSpec {
            q,
            alphabet,
            m,
            estimated: true,
            tables,
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn estimated(&self) -> bool {
        self.estimated
    }

    pub fn table(&self, x: usize) -> &MultisetDist {
        &self.tables[x]
    }

    /// The `t`-marginal of input `x`, as multiset masses.
    ///
    /// For an exchangeable encoding, conditioned on the full multiset `S`
    /// the first `t` coordinates are a uniform size-`t` sub-multiset, so
    /// each sub-multiset `s` receives `P(S) * prod_v C(S_v, s_v) / C(m, t)`.
    pub fn marginal(&self, x: usize, t: usize) -> MultisetDist {
        assert!(t >= 1 && t <= self.m);
        let denom = exact::binomial_ratio(self.m as u64, t as u64);
        let mut out: MultisetDist = BTreeMap::new();
        for (tuple, mass) in &self.tables[x] {
            let groups = group_counts(tuple);
            let mut chosen: Vec<(u16, u64)> = Vec::new();
            enumerate_submultisets(
                &groups,
                0,
                t as u64,
                BigUint::one(),
                &mut chosen,
                &mut |sub, ways| {
                    let key = expand_groups(sub);
                    let weight = Rational::from_integer(BigInt::from(ways.clone())) / &denom;
                    *out.entry(key).or_insert_with(Rational::zero) += mass * weight;
                },
            );
        }
        out
    }
}

fn group_counts(tuple: &[u16]) -> Vec<(u16, u64)> {
    let mut groups: Vec<(u16, u64)> = Vec::new();
    for &v in tuple {
        match groups.last_mut() {
            Some((val, c)) if *val == v => *c += 1,
            _ => groups.push((v, 1)),
        }
    }
    groups
}

fn expand_groups(groups: &[(u16, u64)]) -> Vec<u16> {
    let mut out = Vec::new();
    for &(v, c) in groups {
        for _ in 0..c {
            out.push(v);
        }
    }
    out
}

fn enumerate_submultisets(
    groups: &[(u16, u64)],
    at: usize,
    remaining: u64,
    ways: BigUint,
    chosen: &mut Vec<(u16, u64)>,
    f: &mut impl FnMut(&[(u16, u64)], &BigUint),
) {
    if at == groups.len() {
        if remaining == 0 {
            f(chosen, &ways);
        }
        return;
    }
    let (v, count) = groups[at];
    let left_capacity: u64 = groups[at + 1..].iter().map(|&(_, c)| c).sum();
    for take in 0..=count.min(remaining) {
        if remaining - take > left_capacity {
            continue;
        }
        let w = ways.clone() * exact::binomial(count, take);
        if take > 0 {
            chosen.push((v, take));
        }
        enumerate_submultisets(groups, at + 1, remaining - take, w, chosen, f);
        if take > 0 {
            chosen.pop();
        }
    }
}

/// Statistical distance between two multiset-mass maps.
pub fn sd_maps(a: &MultisetDist, b: &MultisetDist) -> Rational {
    let mut acc = Rational::zero();
    for (k, pa) in a {
        match b.get(k) {
            Some(pb) => acc += (pa - pb).abs(),
            None => acc += pa.abs(),
        }
    }
    for (k, pb) in b {
        if !a.contains_key(k) {
            acc += pb.abs();
        }
    }
    acc / Rational::from_integer(BigInt::from(2))
}

/// SD between the `t`-marginals of two inputs.
pub fn marginal_sd(enc: &EncoderSpec, x_a: usize, x_b: usize, t: usize) -> Rational {
    sd_maps(&enc.marginal(x_a, t), &enc.marginal(x_b, t))
}

/// True iff the per-input encoding distributions have pairwise disjoint
/// supports. Any correct aggregation protocol satisfies this: a shared
/// encoding would let two different sums explain the same transcript.
pub fn check_disjoint_supports(enc: &EncoderSpec) -> bool {
    let mut seen: BTreeSet<Vec<u16>> = BTreeSet::new();
    for table in &enc.tables {
        for (tuple, mass) in table {
            if mass.is_zero() {
                continue;
            }
            if !seen.insert(tuple.clone()) {
                return false;
            }
        }
    }
    true
}

/// Distribution of the shuffled transcript multiset on input vector `xs`:
/// the product of the per-party tables, collapsed to multisets.
pub fn transcript_distribution(
    enc: &EncoderSpec,
    xs: &[usize],
) -> Result<MultisetDist, LowerBoundError> {
    for &x in xs {
        if x >= enc.q {
            return Err(LowerBoundError::InputOutOfRange(x, enc.q));
        }
    }
    let mut acc: MultisetDist = BTreeMap::new();
    acc.insert(Vec::new(), Rational::one());
    for &x in xs {
        let mut next: MultisetDist = BTreeMap::new();
        for (prefix, pa) in &acc {
            for (tuple, pb) in &enc.tables[x] {
                let mut merged = Vec::with_capacity(prefix.len() + tuple.len());
                merged.extend_from_slice(prefix);
                merged.extend_from_slice(tuple);
                merged.sort_unstable();
                *next.entry(merged).or_insert_with(Rational::zero) += pa * pb;
            }
        }
        acc = next;
    }
    Ok(acc)
}

/// Exact SD between the transcript distributions of two input vectors.
pub fn transcript_sd(
    enc: &EncoderSpec,
    xs_a: &[usize],
    xs_b: &[usize],
) -> Result<Rational, LowerBoundError> {
    Ok(sd_maps(
        &transcript_distribution(enc, xs_a)?,
        &transcript_distribution(enc, xs_b)?,
    ))
}

/// Result of the field-dependent average-distance computation over the
/// sum-`s` slice.
#[derive(Debug, Clone)]
pub struct FieldDistanceResult {
    pub d_avg: Rational,
    pub bound: Rational,
    pub witness: (Vec<usize>, Vec<usize>),
    pub witness_sd: Rational,
    pub pass: bool,
}

/// Average SD between transcript distributions over all ordered input pairs
/// in the sum-`s` slice, against the bound `1 - n^(nm)/q^(n-1)`.
///
/// Also returns a witness pair achieving at least the bound; the maximum
/// dominates the average.
pub fn avg_field_distance(
    enc: &EncoderSpec,
    n: usize,
    s: usize,
    budget: u64,
) -> Result<FieldDistanceResult, LowerBoundError> {
    let q = enc.q;
    if s >= q {
        return Err(LowerBoundError::InputOutOfRange(s, q));
    }
    let states = (q as u128).pow(n as u32 - 1);
    if states > budget as u128 {
        return Err(LowerBoundError::BudgetExceeded { states, budget });
    }

    let slice = enumerate_sum_slice(q, n, s);
    let dists: Vec<MultisetDist> = slice
        .iter()
        .map(|x| transcript_distribution(enc, x))
        .collect::<Result<_, _>>()?;

    let mut total = Rational::zero();
    let mut best = Rational::zero();
    let mut witness = (slice[0].clone(), slice[0].clone());
    for (i, da) in dists.iter().enumerate() {
        for (j, db) in dists.iter().enumerate() {
            let sd = if i == j {
                Rational::zero()
            } else {
                sd_maps(da, db)
            };
            if sd > best {
                best = sd.clone();
                witness = (slice[i].clone(), slice[j].clone());
            }
            total += sd;
        }
    }
    let pairs = Rational::from_integer(BigInt::from(states * states));
    let d_avg = total / pairs;

    let nm = (n * enc.m) as u64;
    let bound = Rational::one()
        - Rational::new(
            BigInt::from(exact::pow_big(n as u64, nm)),
            BigInt::from(exact::pow_big(q as u64, n as u64 - 1)),
        );
    let pass = d_avg >= bound && best >= bound;
    Ok(FieldDistanceResult {
        d_avg,
        bound,
        witness,
        witness_sd: best,
        pass,
    })
}

fn enumerate_sum_slice(q: usize, n: usize, s: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut x = vec![0usize; n];
    loop {
        let head_sum: usize = x[..n - 1].iter().sum();
        x[n - 1] = (s + q - head_sum % q) % q;
        out.push(x.clone());
        let mut i = 0;
        loop {
            if i + 1 == n {
                return out;
            }
            x[i] += 1;
            if x[i] < q {
                break;
            }
            x[i] = 0;
            i += 1;
        }
    }
}

/// How many sum-`s` inputs can produce the shuffled output `y`, with the two
/// caps it must respect: the slice size `q^(n-1)` and the assignment count
/// `n^(nm)`.
#[derive(Debug, Clone)]
pub struct InvyResult {
    pub count: u64,
    pub cap_slice: BigUint,
    pub cap_assignments: BigUint,
    pub pass: bool,
}

pub fn invy_bound_check(
    y: &[u16],
    enc: &EncoderSpec,
    n: usize,
    s: usize,
    budget: u64,
) -> Result<InvyResult, LowerBoundError> {
    let q = enc.q;
    if s >= q {
        return Err(LowerBoundError::InputOutOfRange(s, q));
    }
    if y.len() != n * enc.m {
        return Err(LowerBoundError::WrongTupleLength {
            got: y.len(),
            expected: n * enc.m,
        });
    }
    let states = (q as u128).pow(n as u32 - 1);
    if states > budget as u128 {
        return Err(LowerBoundError::BudgetExceeded { states, budget });
    }
    let mut key = y.to_vec();
    key.sort_unstable();

    let mut count = 0u64;
    for x in enumerate_sum_slice(q, n, s) {
        let dist = transcript_distribution(enc, &x)?;
        if dist.get(&key).is_some_and(|p| p.is_positive()) {
            count += 1;
        }
    }
    let cap_slice = exact::pow_big(q as u64, n as u64 - 1);
    let cap_assignments = exact::pow_big(n as u64, (n * enc.m) as u64);
    let pass = BigUint::from(count) <= cap_slice.clone().min(cap_assignments.clone());
    Ok(InvyResult {
        count,
        cap_slice,
        cap_assignments,
        pass,
    })
}

/// Exact advantage of the subset-sum distinguisher against the additive
/// encoder, on the input `(1, ..., 1, -(n-1))` versus all zeros.
///
/// The distinguisher draws `m` random positions of the shuffled transcript
/// and accepts iff their sum is zero. Subsets covering exactly one party's
/// block accept with probability 1 under the zero input; all other subsets
/// see a uniform sum and cancel between the two inputs.
#[derive(Debug, Clone)]
pub struct WarmupResult {
    pub advantage: Rational,
    pub floor: f64,
    pub input_vector: Vec<u64>,
    pub accept_zero: Rational,
    pub accept_x: Rational,
    pub pass: bool,
}

pub fn splitmix_distinguisher_advantage(
    n: usize,
    m: usize,
    q: PrimeModulus,
    budget: u64,
) -> Result<WarmupResult, LowerBoundError> {
    let qv = q.value();
    let total = n * m;
    let draws = (qv as u128).pow(((m - 1) * n) as u32);
    let subsets = exact::binomial(total as u64, m as u64)
        .to_u128()
        .expect("subset count fits 128 bits at exact scale");
    let states = draws.saturating_mul(subsets);
    if states > budget as u128 {
        return Err(LowerBoundError::BudgetExceeded { states, budget });
    }

    let x_last = q.neg((n as u64 - 1) % qv);
    let mut x = vec![1u64; n];
    x[n - 1] = x_last;
    let zero = vec![0u64; n];

    let mut subset_list = Vec::new();
    let mut current = Vec::with_capacity(m);
    collect_subsets(total, m, 0, &mut current, &mut subset_list);

    let count_accepts = |inputs: &[u64]| -> u64 {
        let mut hits = 0u64;
        let mut values = vec![0u64; total];
        let mut draw = vec![0u64; (m - 1) * n];
        loop {
            for i in 0..n {
                let block = &draw[(m - 1) * i..(m - 1) * (i + 1)];
                let mut acc = 0u64;
                for (j, &sv) in block.iter().enumerate() {
                    values[m * i + j] = sv;
                    acc = q.add(acc, sv);
                }
                values[m * i + m - 1] = q.sub(inputs[i], acc);
            }
            for subset in &subset_list {
                let mut sum = 0u64;
                for &p in subset {
                    sum = q.add(sum, values[p]);
                }
                if sum == 0 {
                    hits += 1;
                }
            }
            let mut i = 0;
            loop {
                if i == draw.len() {
                    return hits;
                }
                draw[i] += 1;
                if draw[i] < qv {
                    break;
                }
                draw[i] = 0;
                i += 1;
            }
        }
    };

    let hits_zero = count_accepts(&zero);
    let hits_x = count_accepts(&x);
    let denom = BigInt::from(draws) * BigInt::from(subsets);
    let accept_zero = Rational::new(BigInt::from(hits_zero), denom.clone());
    let accept_x = Rational::new(BigInt::from(hits_x), denom);
    let advantage = &accept_zero - &accept_x;
    let floor = ((std::f64::consts::E * n as f64).powi(m as i32)).recip();
    let pass = exact::to_f64(&advantage) >= floor - 1e-12;
    Ok(WarmupResult {
        advantage,
        floor,
        input_vector: x,
        accept_zero,
        accept_x,
        pass,
    })
}

fn collect_subsets(
    total: usize,
    m: usize,
    from: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if current.len() == m {
        out.push(current.clone());
        return;
    }
    let needed = m - current.len();
    for p in from..=total - needed {
        current.push(p);
        collect_subsets(total, m, p + 1, current, out);
        current.pop();
    }
}

/// Monte-Carlo fallback of the warm-up distinguisher for sizes beyond exact
/// enumeration: samples transcripts under both inputs and checks the sum of
/// the first `m` positions of the freshly shuffled tuple.
#[derive(Debug, Clone)]
pub struct WarmupMcResult {
    pub estimate: f64,
    pub stderr: f64,
    pub floor: f64,
    pub trials: u64,
    pub pass: bool,
}

pub fn splitmix_distinguisher_advantage_mc(
    n: usize,
    m: usize,
    q: PrimeModulus,
    trials: u64,
    seed: u64,
) -> WarmupMcResult {
    use crate::protocol::{encode, shuffled_tuple};
    assert!(trials >= 1);
    let x_last = q.neg((n as u64 - 1) % q.value());
    let mut x = vec![1u64; n];
    x[n - 1] = x_last;
    let zero = vec![0u64; n];

    let run = |inputs: &[u64], stream: u64| -> f64 {
        let mut hits = 0u64;
        let mut rng = rng::substream(seed, stream);
        for _ in 0..trials {
            let vs: Vec<_> = inputs
                .iter()
                .map(|&v| encode(q.element(v), m, &mut rng))
                .collect();
            let tuple = shuffled_tuple(&vs, &mut rng).expect("uniform share vectors");
            let mut sum = 0u64;
            for &v in tuple.iter().take(m) {
                sum = q.add(sum, v);
            }
            if sum == 0 {
                hits += 1;
            }
        }
        hits as f64 / trials as f64
    };
    let p0 = run(&zero, 0);
    let px = run(&x, 1);
    let estimate = p0 - px;
    let stderr = ((p0 * (1.0 - p0) + px * (1.0 - px)) / trials as f64).sqrt();
    let floor = ((std::f64::consts::E * n as f64).powi(m as i32)).recip();
    WarmupMcResult {
        estimate,
        stderr,
        floor,
        trials,
        pass: estimate + 5.0 * stderr >= floor,
    }
}

/// The pivot of the general distinguisher: the smallest marginal size `t`
/// whose per-input marginals separate by at least `1/(10nm)^(4(m-t))`, the
/// maximizing input `x*`, and the acceptance set `H` of `t`-multisets more
/// likely under input 0 than under `x*`.
#[derive(Debug, Clone)]
pub struct MarginalSpec {
    pub t: usize,
    pub x_star: usize,
    pub h: BTreeSet<Vec<u16>>,
    pub threshold: Rational,
    pub sd_at_t: Rational,
    /// `(t', max_x SD, threshold at t')` for every `t' < t`; all fell short.
    pub below_thresholds: Vec<(usize, Rational, Rational)>,
}

fn marginal_threshold(n: usize, m: usize, t: usize) -> Rational {
    Rational::new(
        BigInt::one(),
        BigInt::from(exact::pow_big((10 * n * m) as u64, (4 * (m - t)) as u64)),
    )
}

/// Finds the minimal separating marginal size for `n` parties.
pub fn build_marginal_spec(enc: &EncoderSpec, n: usize) -> Result<MarginalSpec, LowerBoundError> {
    let m = enc.m;
    let mut below = Vec::new();
    for t in 1..=m {
        let threshold = marginal_threshold(n, m, t);
        let zero_marginal = enc.marginal(0, t);
        let mut best = Rational::zero();
        let mut best_x = 0usize;
        for x in 0..enc.q {
            let sd = sd_maps(&zero_marginal, &enc.marginal(x, t));
            if sd > best {
                best = sd;
                best_x = x;
            }
        }
        if best >= threshold {
            let x_marginal = enc.marginal(best_x, t);
            let mut h = BTreeSet::new();
            for (key, p0) in &zero_marginal {
                let px = x_marginal.get(key).cloned().unwrap_or_else(Rational::zero);
                if *p0 > px {
                    h.insert(key.clone());
                }
            }
            return Ok(MarginalSpec {
                t,
                x_star: best_x,
                h,
                threshold,
                sd_at_t: best,
                below_thresholds: below,
            });
        }
        below.push((t, best, threshold));
    }
    Err(LowerBoundError::NotSeparating)
}

/// One permutation category of the distinguisher analysis.
#[derive(Debug, Clone)]
pub struct CategoryBreakdown {
    /// Probability that a random position choice lands in the category.
    pub prob: Rational,
    /// Conditional advantage within the category.
    pub delta: Rational,
}

/// Per-overlap detail for the scattered category.
#[derive(Debug, Clone)]
pub struct CategoryIiiDetail {
    pub j: usize,
    pub prob: Rational,
    pub max_abs_delta: Rational,
    pub delta_bound: Rational,
    pub prob_bound: Rational,
}

/// Full exact evaluation of the general distinguisher on an encoder.
#[derive(Debug, Clone)]
pub struct DistinguisherRun {
    pub spec: MarginalSpec,
    pub input_vector: Vec<usize>,
    /// Categories: all `t` positions on one non-last party / all on the
    /// last party / scattered.
    pub categories: [CategoryBreakdown; 3],
    pub iii_details: Vec<CategoryIiiDetail>,
    pub total_advantage: Rational,
    pub floor: Rational,
    /// Concentrated-on-one-party advantage equals the marginal SD exactly.
    pub concentrated_delta_is_sd: bool,
    /// Last-party conditional advantage is bounded by the marginal SD.
    pub last_party_delta_bounded: bool,
    /// Scattered per-overlap advantages and probabilities respect their
    /// certified bounds.
    pub scattered_bounds_hold: bool,
    pub estimated: bool,
    pub pass: bool,
}

/// Runs the `t`-marginal distinguisher construction for `n > 2` parties and
/// evaluates its advantage exactly by conditioning on how the `t` inspected
/// positions spread over parties.
pub fn general_distinguisher(
    enc: &EncoderSpec,
    n: usize,
) -> Result<DistinguisherRun, LowerBoundError> {
    if n <= 2 {
        return Err(LowerBoundError::NeedsThreeParties(n));
    }
    let m = enc.m;
    let spec = build_marginal_spec(enc, n)?;
    let t = spec.t;

    // x = (x*, ..., x*, -(n-1)x*), a sum-zero vector.
    let x_star = spec.x_star;
    let q = enc.q;
    let x_last = (q - (((n - 1) * x_star) % q)) % q;
    let mut input_vector = vec![x_star; n - 1];
    input_vector.push(x_last);

    // Marginal cache over (input value, overlap size).
    let mut marginals: BTreeMap<(usize, usize), MultisetDist> = BTreeMap::new();
    let mut marginal_of = |x: usize, u: usize| {
        marginals
            .entry((x, u))
            .or_insert_with(|| enc.marginal(x, u))
            .clone()
    };

    let total_positions = (n * m) as u64;
    let choose_total = exact::binomial_ratio(total_positions, t as u64);

    // Overlap patterns u: how many of the t inspected positions hit each
    // party. Pr[u] is multivariate hypergeometric.
    let mut patterns = Vec::new();
    compositions(n, m, &mut vec![0usize; n], 0, t, &mut patterns);

    let mut cat_prob = [Rational::zero(), Rational::zero(), Rational::zero()];
    let mut cat_delta_mass = [Rational::zero(), Rational::zero(), Rational::zero()];
    let mut iii_by_j: BTreeMap<usize, (Rational, Rational)> = BTreeMap::new();
    let mut total_advantage = Rational::zero();
    let mut concentrated_ok = true;

    let zeros = vec![0usize; n];
    for u in &patterns {
        let mut prob = Rational::one();
        for &ui in u {
            prob *= exact::binomial_ratio(m as u64, ui as u64);
        }
        prob /= &choose_total;
        if prob.is_zero() {
            continue;
        }

        let p_zero = accept_probability(u, &zeros, &spec.h, &mut marginal_of);
        let p_x = accept_probability(u, &input_vector, &spec.h, &mut marginal_of);
        let delta = &p_zero - &p_x;
        total_advantage += &prob * &delta;

        let max_overlap = *u.iter().max().expect("non-empty pattern");
        if max_overlap == t {
            let concentrated_party = u
                .iter()
                .position(|&ui| ui == t)
                .expect("some party holds all positions");
            if concentrated_party != n - 1 {
                if delta != spec.sd_at_t {
                    concentrated_ok = false;
                }
                cat_prob[0] += &prob;
                cat_delta_mass[0] += &prob * &delta;
            } else {
                cat_prob[1] += &prob;
                cat_delta_mass[1] += &prob * &delta;
            }
        } else {
            cat_prob[2] += &prob;
            cat_delta_mass[2] += &prob * &delta;
            let entry = iii_by_j
                .entry(max_overlap)
                .or_insert_with(|| (Rational::zero(), Rational::zero()));
            entry.0 += &prob;
            let abs = delta.abs();
            if abs > entry.1 {
                entry.1 = abs;
            }
        }
    }

    let sd = &spec.sd_at_t;
    let conditional = |mass: &Rational, prob: &Rational| {
        if prob.is_zero() {
            Rational::zero()
        } else {
            mass / prob
        }
    };
    let delta_i = conditional(&cat_delta_mass[0], &cat_prob[0]);
    let delta_ii = conditional(&cat_delta_mass[1], &cat_prob[1]);
    let delta_iii = conditional(&cat_delta_mass[2], &cat_prob[2]);
    let last_party_ok = delta_ii.abs() <= *sd;

    let prob_one_party = exact::binomial_ratio(m as u64, t as u64) / &choose_total;
    let mut scattered_ok = true;
    let mut iii_details = Vec::new();
    for (j, (prob_j, max_abs)) in &iii_by_j {
        let delta_bound = Rational::new(
            BigInt::from(m as u64),
            BigInt::from(exact::pow_big((10 * n * m) as u64, (4 * (m - j)) as u64)),
        );
        let prob_bound = Rational::from_integer(BigInt::from(n as u64))
            * &prob_one_party
            * Rational::from_integer(BigInt::from(exact::pow_big(
                (n * m) as u64,
                (3 * (t - j)) as u64,
            )));
        if *max_abs >= delta_bound || prob_j > &prob_bound {
            scattered_ok = false;
        }
        iii_details.push(CategoryIiiDetail {
            j: *j,
            prob: prob_j.clone(),
            max_abs_delta: max_abs.clone(),
            delta_bound,
            prob_bound,
        });
    }

    let floor = Rational::new(
        BigInt::one(),
        BigInt::from(exact::pow_big((10 * n * m) as u64, (5 * m) as u64)),
    );
    let pass = total_advantage >= floor && concentrated_ok && last_party_ok && scattered_ok;

    Ok(DistinguisherRun {
        spec,
        input_vector,
        categories: [
            CategoryBreakdown {
                prob: cat_prob[0].clone(),
                delta: delta_i,
            },
            CategoryBreakdown {
                prob: cat_prob[1].clone(),
                delta: delta_ii,
            },
            CategoryBreakdown {
                prob: cat_prob[2].clone(),
                delta: delta_iii,
            },
        ],
        iii_details,
        total_advantage,
        floor,
        concentrated_delta_is_sd: concentrated_ok,
        last_party_delta_bounded: last_party_ok,
        scattered_bounds_hold: scattered_ok,
        estimated: enc.estimated,
        pass,
    })
}

/// Probability that the inspected positions, spread over parties as `u`,
/// form a multiset in `h`; the per-party contributions are independent
/// marginals of the respective inputs.
fn accept_probability(
    u: &[usize],
    inputs: &[usize],
    h: &BTreeSet<Vec<u16>>,
    marginal_of: &mut impl FnMut(usize, usize) -> MultisetDist,
) -> Rational {
    let mut acc: MultisetDist = BTreeMap::new();
    acc.insert(Vec::new(), Rational::one());
    for (i, &ui) in u.iter().enumerate() {
        if ui == 0 {
            continue;
        }
        let part = marginal_of(inputs[i], ui);
        let mut next: MultisetDist = BTreeMap::new();
        for (prefix, pa) in &acc {
            for (tuple, pb) in &part {
                let mut merged = Vec::with_capacity(prefix.len() + tuple.len());
                merged.extend_from_slice(prefix);
                merged.extend_from_slice(tuple);
                merged.sort_unstable();
                *next.entry(merged).or_insert_with(Rational::zero) += pa * pb;
            }
        }
        acc = next;
    }
    acc.iter()
        .filter(|(k, _)| h.contains(*k))
        .fold(Rational::zero(), |s, (_, p)| s + p)
}

fn compositions(
    n: usize,
    cap: usize,
    current: &mut Vec<usize>,
    at: usize,
    remaining: usize,
    out: &mut Vec<Vec<usize>>,
) {
    if at == n {
        if remaining == 0 {
            out.push(current.clone());
        }
        return;
    }
    for v in 0..=cap.min(remaining) {
        current[at] = v;
        compositions(n, cap, current, at + 1, remaining - v, out);
    }
    current[at] = 0;
}

/// The two finite message-count floors implied by the implemented
/// inequalities for a sigma-secure protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LowerBoundSummary {
    /// Smallest `m` the field-dependent bound does not exclude:
    /// `n^(nm) >= q^(n-1) (1 - 2^-sigma)`.
    pub m_field: usize,
    /// Smallest `m` the distinguisher bound does not exclude:
    /// `(10nm)^(5m) >= 2^sigma`.
    pub m_security: usize,
}

pub fn lower_bound_summary(
    n: usize,
    q: PrimeModulus,
    sigma: f64,
) -> Result<LowerBoundSummary, LowerBoundError> {
    if !sigma.is_finite() || sigma < 1.0 {
        return Err(LowerBoundError::SigmaTooSmall(sigma));
    }
    let two_pow_neg_sigma = Rational::from_float((-sigma).exp2()).unwrap_or_else(Rational::zero);
    let rhs = Rational::from_integer(BigInt::from(exact::pow_big(q.value(), n as u64 - 1)))
        * (Rational::one() - two_pow_neg_sigma);
    let mut m_field = 1usize;
    loop {
        let lhs =
            Rational::from_integer(BigInt::from(exact::pow_big(n as u64, (n * m_field) as u64)));
        if lhs >= rhs {
            break;
        }
        m_field += 1;
    }

    let mut m_security = 1usize;
    while 5.0 * m_security as f64 * (10.0 * (n * m_security) as f64).log2() < sigma {
        m_security += 1;
    }
    Ok(LowerBoundSummary {
        m_field,
        m_security,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis;
    use crate::protocol::ProtocolParams;

    fn qmod(v: u64) -> PrimeModulus {
        PrimeModulus::new(v).unwrap()
    }

    fn rat(n: u64, d: u64) -> Rational {
        exact::ratio(n, d)
    }

    #[test]
    fn split_and_mix_tables_are_uniform_over_sum_slices() {
        let enc = EncoderSpec::split_and_mix(qmod(3), 2).unwrap();
        assert_eq!(enc.q(), 3);
        for x in 0..3 {
            let total: Rational = enc.table(x).values().fold(Rational::zero(), |a, b| a + b);
            assert!(total.is_one());
            for tuple in enc.table(x).keys() {
                let sum: u64 = tuple.iter().map(|&v| v as u64).sum();
                assert_eq!(sum % 3, x as u64);
            }
        }
    }

    #[test]
    fn disjoint_supports_examples() {
        // m = 1: support of x is exactly {x}
        let enc = EncoderSpec::split_and_mix(qmod(3), 1).unwrap();
        assert!(check_disjoint_supports(&enc));

        // m = 2: the pair determines the sum, so supports stay disjoint
        let enc = EncoderSpec::split_and_mix(qmod(3), 2).unwrap();
        assert!(check_disjoint_supports(&enc));

        // broken encoder: inputs 0 and 1 both map to uniform pairs
        let uniform: Vec<(Vec<u16>, Rational)> = (0..2u16)
            .flat_map(|a| (0..2u16).map(move |b| (vec![a, b], rat(1, 4))))
            .collect();
        let broken = EncoderSpec::from_tables(2, 2, 2, vec![uniform.clone(), uniform]).unwrap();
        assert!(!check_disjoint_supports(&broken));
    }

    #[test]
    fn marginals_of_additive_encoder_are_uniform_below_m() {
        // every proper subset of the shares is uniform
        let enc = EncoderSpec::split_and_mix(qmod(3), 2).unwrap();
        for x in 0..3 {
            let marg = enc.marginal(x, 1);
            for v in 0..3u16 {
                assert_eq!(marg.get(&vec![v]), Some(&rat(1, 3)), "input {x} symbol {v}");
            }
        }
        assert!(marginal_sd(&enc, 0, 1, 1).is_zero());
        // at t = m supports are disjoint, so the SD is 1
        assert!(marginal_sd(&enc, 0, 1, 2).is_one());
    }

    #[test]
    fn avg_field_distance_n2_m1_q5() {
        let enc = EncoderSpec::split_and_mix(qmod(5), 1).unwrap();
        let r = avg_field_distance(&enc, 2, 0, DEFAULT_BUDGET).unwrap();
        // bound = 1 - n^(nm)/q^(n-1) = 1 - 4/5
        assert_eq!(r.bound, rat(1, 5));
        // 25 ordered pairs; multisets {x, -x} collide only for x' in {x, -x}:
        // 9 colliding ordered pairs, 16 distinct ones, each at SD exactly 1.
        assert_eq!(r.d_avg, rat(16, 25));
        assert!(r.pass);
        assert!(r.witness_sd.is_one());
    }

    #[test]
    fn avg_field_distance_vacuous_bound() {
        let enc = EncoderSpec::split_and_mix(qmod(2), 1).unwrap();
        let r = avg_field_distance(&enc, 2, 0, DEFAULT_BUDGET).unwrap();
        assert!(r.bound.is_negative());
        assert!(r.pass);
    }

    #[test]
    fn invy_examples() {
        let enc = EncoderSpec::split_and_mix(qmod(5), 1).unwrap();
        // y = {1, 4}: inputs (1,4) and (4,1)
        let r = invy_bound_check(&[1, 4], &enc, 2, 0, DEFAULT_BUDGET).unwrap();
        assert_eq!(r.count, 2);
        assert!(r.pass);
        // unreachable output: {0, 1} has sum 1 != 0
        let r = invy_bound_check(&[0, 1], &enc, 2, 0, DEFAULT_BUDGET).unwrap();
        assert_eq!(r.count, 0);
    }

    #[test]
    fn invy_every_output_respects_the_assignment_cap() {
        // every reachable output of the two-share encoder explains at most
        // n^(nm) sum-zero inputs
        let enc = EncoderSpec::split_and_mix(qmod(3), 2).unwrap();
        let n = 2;
        let dist_union: Vec<Vec<u16>> = enumerate_sum_slice(3, n, 0)
            .iter()
            .flat_map(|x| transcript_distribution(&enc, x).unwrap().into_keys())
            .collect();
        for y in dist_union {
            let r = invy_bound_check(&y, &enc, n, 0, DEFAULT_BUDGET).unwrap();
            assert!(BigUint::from(r.count) <= r.cap_assignments);
            assert!(BigUint::from(r.count) <= r.cap_slice);
            assert!(r.pass);
        }
    }

    #[test]
    fn invy_validates_tuple_length() {
        let enc = EncoderSpec::split_and_mix(qmod(3), 2).unwrap();
        assert!(matches!(
            invy_bound_check(&[0, 1, 2], &enc, 2, 0, DEFAULT_BUDGET),
            Err(LowerBoundError::WrongTupleLength {
                got: 3,
                expected: 4
            })
        ));
    }

    #[test]
    fn warmup_budget_is_enforced() {
        assert!(matches!(
            splitmix_distinguisher_advantage(4, 3, qmod(101), 1_000),
            Err(LowerBoundError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn warmup_n3_m1_q5_has_full_advantage() {
        let r = splitmix_distinguisher_advantage(3, 1, qmod(5), DEFAULT_BUDGET).unwrap();
        assert!(r.advantage.is_one());
        assert!(r.accept_zero.is_one());
        assert!(r.accept_x.is_zero());
        assert!(r.pass);
        assert!((r.floor - 1.0 / (3.0 * std::f64::consts::E)).abs() < 1e-12);
    }

    #[test]
    fn warmup_n3_m2_q5_exact_value() {
        // same-party pairs: 3 of C(6,2) = 15; accept prob 1 under zero,
        // 0 under (1,1,-2); cross pairs cancel. Advantage 3/15 = 1/5.
        let r = splitmix_distinguisher_advantage(3, 2, qmod(5), DEFAULT_BUDGET).unwrap();
        assert_eq!(r.advantage, rat(1, 5));
        assert!(r.pass);
    }

    #[test]
    fn warmup_zero_vector_has_no_advantage() {
        // replacing x by the zero vector means identical distributions
        let enc = EncoderSpec::split_and_mix(qmod(5), 2).unwrap();
        let sd = transcript_sd(&enc, &[0, 0, 0], &[0, 0, 0]).unwrap();
        assert!(sd.is_zero());
    }

    #[test]
    fn warmup_mc_close_to_exact() {
        let exact_run = splitmix_distinguisher_advantage(3, 2, qmod(5), DEFAULT_BUDGET).unwrap();
        let mc = splitmix_distinguisher_advantage_mc(3, 2, qmod(5), 20_000, 5);
        let exact_value = exact::to_f64(&exact_run.advantage);
        assert!(
            (mc.estimate - exact_value).abs() <= 5.0 * mc.stderr,
            "mc {} vs exact {exact_value}",
            mc.estimate
        );
        assert!(mc.pass);
    }

    #[test]
    fn marginal_spec_point_masses_at_m1() {
        let enc = EncoderSpec::split_and_mix(qmod(3), 1).unwrap();
        let spec = build_marginal_spec(&enc, 3).unwrap();
        assert_eq!(spec.t, 1);
        assert!(spec.sd_at_t.is_one());
        assert_eq!(spec.x_star, 1);
        assert!(spec.threshold.is_one());
        assert!(spec.below_thresholds.is_empty());
    }

    #[test]
    fn marginal_spec_skips_uniform_singletons() {
        let enc = EncoderSpec::split_and_mix(qmod(3), 2).unwrap();
        let spec = build_marginal_spec(&enc, 3).unwrap();
        // single messages are uniform, so t = 1 cannot separate; t = m = 2
        // separates with SD exactly 1
        assert_eq!(spec.t, 2);
        assert!(spec.sd_at_t.is_one());
        assert_eq!(spec.below_thresholds.len(), 1);
        let (tp, max_sd, thr) = &spec.below_thresholds[0];
        assert_eq!(*tp, 1);
        assert!(max_sd.is_zero());
        assert!(*max_sd < *thr);
    }

    #[test]
    fn general_distinguisher_splitmix_grid() {
        for (m, qv) in [(1usize, 2u64), (1, 3), (2, 2), (2, 3)] {
            let n = 3;
            let enc = EncoderSpec::split_and_mix(qmod(qv), m).unwrap();
            let run = general_distinguisher(&enc, n).unwrap();

            // category probabilities partition the permutation space
            let total_prob: Rational = run
                .categories
                .iter()
                .fold(Rational::zero(), |a, c| a + &c.prob);
            assert!(
                total_prob.is_one(),
                "(m={m}, q={qv}) probs sum to {total_prob}"
            );

            // certified category facts
            assert!(run.concentrated_delta_is_sd, "(m={m}, q={qv})");
            assert!(run.last_party_delta_bounded, "(m={m}, q={qv})");
            assert!(run.scattered_bounds_hold, "(m={m}, q={qv})");

            // the advantage clears the floor and never exceeds the true SD
            assert!(run.total_advantage >= run.floor, "(m={m}, q={qv})");
            let sd = transcript_sd(&enc, &vec![0; n], &run.input_vector).unwrap();
            assert!(
                run.total_advantage <= sd,
                "(m={m}, q={qv}): advantage {} exceeds SD {sd}",
                run.total_advantage
            );
            assert!(run.pass);
        }
    }

    #[test]
    fn general_distinguisher_category_probs_formulas() {
        // Pr[concentrated elsewhere] = (n-1) C(m,t)/C(nm,t); last party: C(m,t)/C(nm,t)
        let n = 3;
        let enc = EncoderSpec::split_and_mix(qmod(2), 2).unwrap();
        let run = general_distinguisher(&enc, n).unwrap();
        let t = run.spec.t as u64;
        let per_party = exact::binomial_ratio(2, t) / exact::binomial_ratio((n * 2) as u64, t);
        assert_eq!(
            run.categories[0].prob,
            per_party.clone() * Rational::from_integer(BigInt::from(n as u64 - 1))
        );
        assert_eq!(run.categories[1].prob, per_party);
    }

    #[test]
    fn general_distinguisher_rejects_two_parties() {
        let enc = EncoderSpec::split_and_mix(qmod(2), 1).unwrap();
        assert!(matches!(
            general_distinguisher(&enc, 2),
            Err(LowerBoundError::NeedsThreeParties(2))
        ));
    }

    #[test]
    fn distinguisher_advantage_matches_analysis_module_sd() {
        // cross-check the generic transcript distribution against the
        // share-enumeration path of the analysis module
        let n = 3;
        for (m, qv) in [(1usize, 2u64), (2, 3)] {
            let enc = EncoderSpec::split_and_mix(qmod(qv), m).unwrap();
            let run = general_distinguisher(&enc, n).unwrap();
            let params = ProtocolParams::new(n, m, qmod(qv)).unwrap();
            let xs: Vec<u64> = run.input_vector.iter().map(|&v| v as u64).collect();
            let rx =
                analysis::exact_transcript_distribution(&xs, &params, analysis::DEFAULT_BUDGET)
                    .unwrap();
            let r0 = analysis::exact_transcript_distribution(
                &vec![0; n],
                &params,
                analysis::DEFAULT_BUDGET,
            )
            .unwrap();
            let sd = analysis::statistical_distance(&rx, &r0)
                .unwrap()
                .exact
                .unwrap();
            let generic = transcript_sd(&enc, &vec![0; n], &run.input_vector).unwrap();
            assert_eq!(sd, generic, "(m={m}, q={qv})");
            assert!(run.total_advantage <= generic);
        }
    }

    #[test]
    fn summary_examples() {
        // q = 2, large n: log_n q < 1 makes the field bound vacuous
        let s = lower_bound_summary(64, qmod(2), 1.0).unwrap();
        assert_eq!(s.m_field, 1);

        // sigma = 1, n = 4, q just above 4^8: integer search of the
        // field inequality n^(nm) >= q^(n-1)(1 - 2^-sigma)
        let q = crate::ffield::next_prime_above(65536);
        let s = lower_bound_summary(4, q, 1.0).unwrap();
        let mut expect = 1usize;
        loop {
            let lhs = exact::pow_big(4, (4 * expect) as u64);
            let rhs =
                Rational::from_integer(BigInt::from(exact::pow_big(q.value(), 3))) * rat(1, 2);
            if Rational::from_integer(BigInt::from(lhs)) >= rhs {
                break;
            }
            expect += 1;
        }
        assert_eq!(s.m_field, expect);

        // m_security grows with sigma
        let mut prev = 0;
        for sigma in [1.0, 8.0, 32.0, 128.0, 512.0] {
            let s = lower_bound_summary(8, qmod(101), sigma).unwrap();
            assert!(s.m_security >= prev);
            prev = s.m_security;
        }
        assert!(matches!(
            lower_bound_summary(8, qmod(101), 0.5),
            Err(LowerBoundError::SigmaTooSmall(_))
        ));
    }

    #[test]
    fn estimated_tables_flagged() {
        let q = qmod(3);
        let enc = EncoderSpec::from_sampler(3, 3, 2, 2_000, 9, |x, rng| {
            let v = crate::protocol::encode(q.element(x as u64), 2, rng);
            v.shares().iter().map(|&s| s as u16).collect()
        });
        assert!(enc.estimated());
        let run = general_distinguisher(&enc, 3).unwrap();
        assert!(run.estimated);
    }
}
