//! Secure aggregation in the shuffled (anonymized) model via additive share
//! splitting, together with the analysis machinery needed to study it
//! empirically.
//!
//! Each of `n` parties holds a value in a prime field `F_q` and publishes `m`
//! anonymous messages: `m - 1` uniform field elements plus one correcting
//! share so the party's messages sum to its input. The analyzer sees only the
//! shuffled multiset of all `n * m` messages and adds them up. The crate
//! implements:
//!
//! * [`ffield`] — exact arithmetic and linear algebra over `F_q`,
//! * [`protocol`] — the encoder, shuffler, analyzer and corruption-aware
//!   simulation,
//! * [`analysis`] — exact transcript distributions, the sum-conditioned
//!   uniform reference, statistical distance and moment experiments,
//! * [`linalg`] — permutation-pair matrices, rank-deficit tail experiments
//!   and the matching-partition certificates behind them,
//! * [`lowerbound`] — distinguisher constructions that bound the message
//!   count of *any* one-round aggregation protocol from below,
//! * [`dp`] — differentially private real summation built on top of the
//!   secure aggregator with a pluggable noise mechanism.
//!
//! All randomized operations take explicitly seeded generators (see [`rng`])
//! and reproduce their results bit-exactly for a fixed seed.

// index-heavy matrix and block loops read better with explicit ranges
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod dp;
pub mod exact;
pub mod ffield;
pub mod linalg;
pub mod lowerbound;
pub mod protocol;
pub mod rng;
