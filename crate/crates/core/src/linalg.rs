//! Random-matrix machinery for the transcript second moment: the 0/1
//! matrices induced by permutation pairs, their rank deficits, the
//! matching-partition certificates that witness those deficits, the tail
//! bound experiment, and the multinomial inequalities the bound rests on.
//!
//! For a permutation `pi` of the `m * n` message positions, row `i` of
//! `A_pi` is the indicator of the positions party `i`'s block lands on. The
//! stacked matrix of a pair `(pi, pi')` has rank deficit
//! `defc = 2n - rank`, and `Pr[defc >= k] <= (n^2 / (n/2)^(m-2))^((k-1)/2)`
//! for `m >= 3`.

use crate::exact::{self, Rational};
use crate::ffield::{FieldMatrix, PrimeModulus};
use crate::rng;
use num_bigint::{BigInt, BigUint};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("permutation must be a bijection on 0..{0}")]
    NotAPermutation(usize),
    #[error("partition search needs Bell(n)^2 = {needed} <= budget {budget}")]
    PartitionBudget { needed: u128, budget: u128 },
    #[error("position masks support at most 128 positions, got m*n = {0}")]
    TooManyPositions(usize),
    #[error("tail experiment requires m >= 3, got {0}")]
    TailNeedsM3(usize),
    #[error("count tuples must have equal length: {0} vs {1}")]
    TupleLengthMismatch(usize, usize),
    #[error("count tuples must be non-empty")]
    EmptyTuple,
}

/// Default cap on `Bell(n)^2` for the partition search; admits `n <= 8`.
pub const PARTITION_BUDGET: u128 = 17_139_600;

fn validate_permutation(pi: &[usize], len: usize) -> Result<(), LinalgError> {
    if pi.len() != len {
        return Err(LinalgError::NotAPermutation(len));
    }
    let mut seen = vec![false; len];
    for &p in pi {
        if p >= len || seen[p] {
            return Err(LinalgError::NotAPermutation(len));
        }
        seen[p] = true;
    }
    Ok(())
}

/// The `2n x mn` stack of the two block-indicator matrices of a permutation
/// pair. Every entry is 0 or 1, every row has exactly `m` ones, and the rows
/// of each half partition the positions.
#[derive(Debug, Clone)]
pub struct PermutationPairMatrix {
    n: usize,
    m: usize,
    pi: Vec<usize>,
    pi_prime: Vec<usize>,
    matrix: FieldMatrix,
}

impl PermutationPairMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn pi(&self) -> &[usize] {
        &self.pi
    }

    pub fn pi_prime(&self) -> &[usize] {
        &self.pi_prime
    }

    pub fn matrix(&self) -> &FieldMatrix {
        &self.matrix
    }

    /// `2n - rank`. Always at least 1: adding the top rows and subtracting
    /// the bottom rows gives zero, so the rank is at most `2n - 1`.
    pub fn rank_deficit(&self) -> usize {
        2 * self.n - self.matrix.rank()
    }
}

/// Builds the stacked pair matrix for permutations of the `m*n` positions.
pub fn build_pair_matrix(
    pi: &[usize],
    pi_prime: &[usize],
    n: usize,
    m: usize,
    q: PrimeModulus,
) -> Result<PermutationPairMatrix, LinalgError> {
    let len = n * m;
    validate_permutation(pi, len)?;
    validate_permutation(pi_prime, len)?;
    let mut matrix = FieldMatrix::zero(2 * n, len, q);
    for i in 0..n {
        for j in m * i..m * (i + 1) {
            matrix.set_raw(i, pi[j], 1);
            matrix.set_raw(n + i, pi_prime[j], 1);
        }
    }
    Ok(PermutationPairMatrix {
        n,
        m,
        pi: pi.to_vec(),
        pi_prime: pi_prime.to_vec(),
        matrix,
    })
}

/// Per-party position masks under `pi`; requires `m*n <= 128`.
fn block_masks(pi: &[usize], n: usize, m: usize) -> Result<Vec<u128>, LinalgError> {
    if n * m > 128 {
        return Err(LinalgError::TooManyPositions(n * m));
    }
    let mut masks = vec![0u128; n];
    for i in 0..n {
        for j in m * i..m * (i + 1) {
            masks[i] |= 1u128 << pi[j];
        }
    }
    Ok(masks)
}

fn rank_mod2_bitrows(rows: impl IntoIterator<Item = u128>) -> usize {
    let mut pivots = [0u128; 128];
    let mut rank = 0;
    for mut r in rows {
        while r != 0 {
            let lead = 127 - r.leading_zeros() as usize;
            if pivots[lead] == 0 {
                pivots[lead] = r;
                rank += 1;
                break;
            }
            r ^= pivots[lead];
        }
    }
    rank
}

fn rank_modq_rows(mut rows: Vec<Vec<u64>>, q: PrimeModulus) -> usize {
    let nrows = rows.len();
    let ncols = if nrows == 0 { 0 } else { rows[0].len() };
    let mut rank = 0;
    for col in 0..ncols {
        if rank == nrows {
            break;
        }
        let pivot = match (rank..nrows).find(|&r| rows[r][col] != 0) {
            Some(r) => r,
            None => continue,
        };
        rows.swap(pivot, rank);
        let inv = q.inv(rows[rank][col]).expect("pivot is nonzero");
        for c in col..ncols {
            rows[rank][c] = q.mul(rows[rank][c], inv);
        }
        let (pivot_row, rest) = {
            let (head, tail) = rows.split_at_mut(rank + 1);
            (&head[rank], tail)
        };
        for r in rest.iter_mut() {
            let factor = r[col];
            if factor == 0 {
                continue;
            }
            for c in col..ncols {
                r[c] = q.sub(r[c], q.mul(factor, pivot_row[c]));
            }
        }
        rank += 1;
    }
    rank
}

/// Rank deficit of the pair matrix without materializing a `FieldMatrix`;
/// used by the sampling loops. Bit-rows for `q = 2`, dense rows otherwise.
pub(crate) fn rank_deficit_fast(
    pi: &[usize],
    pi_prime: &[usize],
    n: usize,
    m: usize,
    q: PrimeModulus,
) -> usize {
    if q.value() == 2 && n * m <= 128 {
        let rows = block_masks(pi, n, m)
            .expect("checked size")
            .into_iter()
            .chain(block_masks(pi_prime, n, m).expect("checked size"));
        return 2 * n - rank_mod2_bitrows(rows);
    }
    let len = n * m;
    let mut rows = Vec::with_capacity(2 * n);
    for (perm, _) in [(pi, 0), (pi_prime, 1)] {
        for i in 0..n {
            let mut row = vec![0u64; len];
            for j in m * i..m * (i + 1) {
                row[perm[j]] = 1;
            }
            rows.push(row);
        }
    }
    2 * n - rank_modq_rows(rows, q)
}

/// A pair of equal-shape partitions of the parties whose lifted position
/// sets coincide under the two permutations. Certifies `defc >= k` via the
/// row-sum identities `sum_{i in S_j} (A_pi)_i = sum_{i' in S'_j} (A_pi')_{i'}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPair {
    pub parts: Vec<(Vec<usize>, Vec<usize>)>,
}

/// Bell number `B(n)` (number of set partitions of an `n`-set).
pub fn bell_number(n: usize) -> u128 {
    // Bell triangle
    let mut row = vec![1u128];
    for _ in 1..=n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().unwrap());
        for &v in &row {
            let last = *next.last().unwrap();
            next.push(last + v);
        }
        row = next;
    }
    row[0]
}

/// Searches for a matching pair of `k`-part partitions.
///
/// Left partitions are enumerated in canonical lexicographic order of
/// minimal elements and the first match is returned, so the witness is
/// deterministic. For each left partition the right side is forced: a party
/// block under `pi_prime` must land entirely inside one lifted image.
pub fn find_matching_partitions(
    pi: &[usize],
    pi_prime: &[usize],
    n: usize,
    m: usize,
    k: usize,
    budget: Option<u128>,
) -> Result<Option<PartitionPair>, LinalgError> {
    let len = n * m;
    validate_permutation(pi, len)?;
    validate_permutation(pi_prime, len)?;
    if k == 0 || k > n {
        return Ok(None);
    }
    let budget = budget.unwrap_or(PARTITION_BUDGET);
    let bell = bell_number(n);
    let needed = bell.saturating_mul(bell);
    if needed > budget {
        return Err(LinalgError::PartitionBudget { needed, budget });
    }
    let masks_pi = block_masks(pi, n, m)?;
    let masks_pip = block_masks(pi_prime, n, m)?;

    // Restricted-growth strings enumerate set partitions of [n]; classes are
    // labeled by first occurrence, i.e. sorted by minimal element.
    let mut labels = vec![0usize; n];
    let found = search_partitions(&mut labels, 1, 0, n, k, &masks_pi, &masks_pip);
    Ok(found)
}

fn search_partitions(
    labels: &mut Vec<usize>,
    pos: usize,
    max_label: usize,
    n: usize,
    k: usize,
    masks_pi: &[u128],
    masks_pip: &[u128],
) -> Option<PartitionPair> {
    if pos == n {
        if max_label + 1 != k {
            return None;
        }
        return try_match(labels, k, masks_pi, masks_pip);
    }
    // classes still needed must fit in the remaining positions
    let remaining = n - pos;
    for label in 0..=(max_label + 1).min(k - 1) {
        let new_max = max_label.max(label);
        if k - 1 > new_max && (k - 1 - new_max) > remaining - 1 {
            continue;
        }
        labels[pos] = label;
        if let Some(found) = search_partitions(labels, pos + 1, new_max, n, k, masks_pi, masks_pip)
        {
            return Some(found);
        }
    }
    None
}

fn try_match(
    labels: &[usize],
    k: usize,
    masks_pi: &[u128],
    masks_pip: &[u128],
) -> Option<PartitionPair> {
    let n = labels.len();
    let mut images = vec![0u128; k];
    for (i, &label) in labels.iter().enumerate() {
        images[label] |= masks_pi[i];
    }
    let mut right: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in 0..n {
        let mask = masks_pip[i];
        let j = images.iter().position(|&t| mask & !t == 0)?;
        right[j].push(i);
    }
    let mut parts = Vec::with_capacity(k);
    for j in 0..k {
        let left: Vec<usize> = (0..n).filter(|&i| labels[i] == j).collect();
        debug_assert_eq!(left.len(), right[j].len(), "image sizes force equal parts");
        parts.push((left, right[j].clone()));
    }
    Some(PartitionPair { parts })
}

/// One point of the rank-deficit tail experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct TailBound {
    pub k: usize,
    pub empirical: f64,
    pub bound: f64,
    pub stderr: f64,
    pub samples: u64,
    pub pass: bool,
}

/// The certified tail bound `(n^2 / (n/2)^(m-2))^((k-1)/2)`.
pub fn deficit_tail_bound(n: usize, m: usize, k: usize) -> f64 {
    let ratio = (n as f64).powi(2) / (n as f64 / 2.0).powi(m as i32 - 2);
    ratio.powf((k as f64 - 1.0) / 2.0)
}

/// Samples uniform permutation pairs and reports the empirical tail
/// `Pr[defc >= k]` against the certified bound for every `k` in `ks`,
/// sharing one sample set across the curve.
///
/// Pass means `empirical <= bound + 5 * stderr`; the slack only absorbs
/// Monte-Carlo noise, the bound itself is deterministic.
pub fn deficit_tail_curve(
    n: usize,
    m: usize,
    q: PrimeModulus,
    ks: &[usize],
    samples: u64,
    seed: u64,
) -> Result<Vec<TailBound>, LinalgError> {
    if m < 3 {
        return Err(LinalgError::TailNeedsM3(m));
    }
    assert!(samples >= 1, "need at least one sample");
    let histogram = (0..samples)
        .into_par_iter()
        .fold(
            || vec![0u64; 2 * n + 1],
            |mut acc, i| {
                let mut rng = rng::substream(seed, i);
                let pi = rng::random_permutation(n * m, &mut rng);
                let pi_prime = rng::random_permutation(n * m, &mut rng);
                let defc = rank_deficit_fast(&pi, &pi_prime, n, m, q);
                acc[defc] += 1;
                acc
            },
        )
        .reduce(
            || vec![0u64; 2 * n + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok(ks
        .iter()
        .map(|&k| {
            let hits: u64 = histogram.iter().skip(k.min(2 * n + 1)).sum();
            let empirical = hits as f64 / samples as f64;
            let stderr = (empirical * (1.0 - empirical) / samples as f64).sqrt();
            let bound = deficit_tail_bound(n, m, k);
            TailBound {
                k,
                empirical,
                bound,
                stderr,
                samples,
                pass: empirical <= bound + 5.0 * stderr,
            }
        })
        .collect())
}

/// Single-`k` form of [`deficit_tail_curve`].
pub fn deficit_tail_experiment(
    n: usize,
    m: usize,
    q: PrimeModulus,
    k: usize,
    samples: u64,
    seed: u64,
) -> Result<TailBound, LinalgError> {
    Ok(deficit_tail_curve(n, m, q, &[k], samples, seed)?
        .pop()
        .expect("one k requested"))
}

/// Both sides of the two multinomial inequalities, exact.
///
/// The first: the multinomial of the merged counts dominates the product of
/// the two multinomials. The second: a `k`-part multinomial is at least
/// `(sum/2)^floor(k/2)`, evaluated for each tuple. The half-power bound is
/// about partition part sizes, which are positive; zero entries do not
/// count toward `k` (with them counted the bound is simply false, e.g.
/// `(0, 12)`).
#[derive(Debug, Clone)]
pub struct FactsCheck {
    pub merged_vs_product: (BigUint, BigUint),
    pub half_power_first: (BigUint, Rational),
    pub half_power_second: (BigUint, Rational),
    pub ok: bool,
}

pub fn multinomial_facts_check(a: &[u64], a_prime: &[u64]) -> Result<FactsCheck, LinalgError> {
    if a.is_empty() || a_prime.is_empty() {
        return Err(LinalgError::EmptyTuple);
    }
    if a.len() != a_prime.len() {
        return Err(LinalgError::TupleLengthMismatch(a.len(), a_prime.len()));
    }
    let merged: Vec<u64> = a.iter().zip(a_prime).map(|(x, y)| x + y).collect();
    let lhs1 = exact::multinomial(&merged);
    let rhs1 = exact::multinomial(a) * exact::multinomial(a_prime);

    let half_power = |parts: &[u64]| -> (BigUint, Rational) {
        let positive: Vec<u64> = parts.iter().copied().filter(|&v| v > 0).collect();
        let lhs = exact::multinomial(&positive);
        let total: u64 = positive.iter().sum();
        let half = Rational::new(BigInt::from(total), BigInt::from(2));
        let rhs = exact::pow_ratio(&half, (positive.len() / 2) as u64);
        (lhs, rhs)
    };
    let f2a = half_power(a);
    let f2b = half_power(a_prime);

    let ok = lhs1 >= rhs1
        && Rational::from_integer(BigInt::from(f2a.0.clone())) >= f2a.1
        && Rational::from_integer(BigInt::from(f2b.0.clone())) >= f2b.1;
    Ok(FactsCheck {
        merged_vs_product: (lhs1, rhs1),
        half_power_first: f2a,
        half_power_second: f2b,
        ok,
    })
}

/// Samples random positive count tuples and counts violations of the two
/// multinomial inequalities. Entries are positive: the half-power bound is
/// about non-empty partition parts.
pub fn facts_check_experiment(
    trials: u64,
    max_entry: u64,
    max_parts: usize,
    seed: u64,
) -> Result<u64, LinalgError> {
    use rand::Rng;
    assert!(max_entry >= 1 && max_parts >= 1);
    let mut r = rng::from_seed(seed);
    let mut violations = 0u64;
    for _ in 0..trials {
        let k = r.random_range(1..=max_parts);
        let a: Vec<u64> = (0..k).map(|_| r.random_range(1..=max_entry)).collect();
        let b: Vec<u64> = (0..k).map(|_| r.random_range(1..=max_entry)).collect();
        if !multinomial_facts_check(&a, &b)?.ok {
            violations += 1;
        }
    }
    Ok(violations)
}
