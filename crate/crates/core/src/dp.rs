//! Differentially private real summation in the shuffled model, built on
//! the secure aggregator.
//!
//! The reduction consumes a sigma-secure aggregation protocol as a black
//! box: with `sigma = 1 + log2((1 + e^eps)/delta)` and the field order set
//! to the smallest prime above `2 n^(3/2)`, the shuffled protocol becomes
//! `(eps, delta)`-differentially private once each party adds appropriate
//! noise to its quantized input. The noise mechanism itself is NOT fixed by
//! that reduction; it is a pluggable interface here, with a
//! Polya-difference default whose aggregate is a symmetric discrete-Laplace
//! style variable. The default's privacy is validated empirically, not
//! proven.

use crate::ffield::{next_prime_above, PrimeModulus};
use crate::protocol::{self, ProtocolParams, ShareVector, Transcript};
use crate::rng::{self, SeededRng};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DpError {
    #[error("epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("delta must lie in (0, 1), got {0}")]
    BadDelta(f64),
    #[error("the reduction needs n >= 3 parties, got {0}")]
    TooFewParties(usize),
    #[error("input {0} outside [0, 1]")]
    InputOutOfRange(f64),
    #[error("protocol error: {0}")]
    Protocol(#[from] protocol::ProtocolError),
}

/// Parameters of the private-summation reduction.
///
/// Invariants: `sigma = 1 + log2((1 + e^eps)/delta)`; `q` is the smallest
/// prime above `2 n^(3/2)`; `scale <= q/(2n)` so that `n` scaled inputs
/// cannot wrap modulo `q` on their own.
#[derive(Debug, Clone, PartialEq)]
pub struct DpParams {
    pub epsilon: f64,
    pub delta: f64,
    pub n: usize,
    pub sigma: f64,
    pub q: PrimeModulus,
    pub scale: u64,
    pub m: usize,
}

impl DpParams {
    pub fn protocol_params(&self) -> ProtocolParams {
        ProtocolParams::with_sigma(self.n, self.m, self.q, self.sigma)
            .expect("derived parameters are valid")
    }

    pub fn bits_per_message(&self) -> u32 {
        64 - (self.q.value() - 1).leading_zeros()
    }
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    while r * r > n {
        r -= 1;
    }
    r
}

/// `floor(2 n^(3/2))`, exact for perfect squares.
fn two_n_three_halves_floor(n: u64) -> u64 {
    let s = isqrt(n);
    if s * s == n {
        return 2 * n * s;
    }
    (2.0 * (n as f64) * (n as f64).sqrt()).floor() as u64
}

/// Derives the reduction parameters for a target `(epsilon, delta)`.
///
/// Also fixes the message count from the certified formula at
/// `gamma = 2^(-sigma-1)` and the default fixed-point scale `floor(sqrt n)`,
/// which keeps the rounding error O(1) while respecting the headroom
/// invariant.
pub fn derive_dp_params(epsilon: f64, delta: f64, n: usize) -> Result<DpParams, DpError> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(DpError::BadEpsilon(epsilon));
    }
    if !delta.is_finite() || delta <= 0.0 || delta >= 1.0 {
        return Err(DpError::BadDelta(delta));
    }
    if n < 3 {
        return Err(DpError::TooFewParties(n));
    }
    let sigma = 1.0 + ((1.0 + epsilon.exp()) / delta).log2();
    let q = next_prime_above(two_n_three_halves_floor(n as u64));
    let scale = isqrt(n as u64).max(1);
    debug_assert!(scale <= q.value() / (2 * n as u64));
    let gamma = (-sigma - 1.0).exp2();
    let m = protocol::required_messages(n, q, gamma)?;
    Ok(DpParams {
        epsilon,
        delta,
        n,
        sigma,
        q,
        scale,
        m,
    })
}

/// Per-party integer noise. Samples must stay within the declared
/// truncation bound; the clamped mass is what the accounting report charges
/// to the privacy budget. Mechanisms hold no per-sample state, so they are
/// shared freely across parallel trial workers.
pub trait NoiseMechanism: Sync {
    fn name(&self) -> String;
    fn truncation_bound(&self) -> u64;
    fn sample(&self, rng: &mut SeededRng) -> i64;
    /// Upper bound on the probability that any of `calls` per-party samples
    /// clamps, i.e. the distribution distortion charged to delta.
    fn truncation_mass_bound(&self, calls: u64) -> f64;
}

/// The no-noise mechanism: secure aggregation only, no differential
/// privacy.
#[derive(Debug, Clone, Copy)]
pub struct ZeroNoise;

impl NoiseMechanism for ZeroNoise {
    fn name(&self) -> String {
        "none".into()
    }

    fn truncation_bound(&self) -> u64 {
        0
    }

    fn sample(&self, _rng: &mut SeededRng) -> i64 {
        0
    }

    fn truncation_mass_bound(&self, _calls: u64) -> f64 {
        0.0
    }
}

/// Default mechanism: each party adds the difference of two independent
/// Polya(1/n, alpha) counts with `alpha = e^(-eps/scale)`, so the aggregate
/// over `n` parties is a symmetric two-sided-geometric (discrete-Laplace
/// style) variable. Counts are truncated at `bound`.
///
/// This default is not part of the reduction it plugs into; its privacy is
/// checked empirically only.
#[derive(Debug, Clone)]
pub struct PolyaDifferenceNoise {
    pub r: f64,
    pub alpha: f64,
    pub bound: u64,
}

impl PolyaDifferenceNoise {
    pub fn for_params(p: &DpParams) -> Self {
        let alpha = (-p.epsilon / p.scale as f64).exp();
        // tail cut deep enough that the clamped mass is negligible next to
        // delta: alpha^bound <= delta/(8n) roughly
        let bound =
            ((p.scale as f64 / p.epsilon) * (8.0 * p.n as f64 / p.delta).ln()).ceil() as u64;
        PolyaDifferenceNoise {
            r: 1.0 / p.n as f64,
            alpha,
            bound: bound.max(1),
        }
    }

    /// Inverse-CDF walk over the Polya(r, alpha) pmf, truncated at `bound`.
    fn sample_polya(&self, rng: &mut SeededRng) -> u64 {
        let u: f64 = rng.random();
        let mut pmf = (1.0 - self.alpha).powf(self.r);
        let mut cdf = pmf;
        let mut k = 0u64;
        while u >= cdf && k < self.bound {
            pmf *= self.alpha * (k as f64 + self.r) / (k as f64 + 1.0);
            cdf += pmf;
            k += 1;
        }
        k
    }

    /// Chernoff bound on `Pr[Polya(r, alpha) > bound]`, minimized over a
    /// grid of tilting points.
    fn single_tail_bound(&self) -> f64 {
        let mut best = 1.0f64;
        for i in 1..200 {
            let z = 1.0 + (1.0 / self.alpha - 1.0) * (i as f64 / 200.0);
            if self.alpha * z >= 1.0 {
                break;
            }
            let mgf = ((1.0 - self.alpha) / (1.0 - self.alpha * z)).powf(self.r);
            let bound = mgf * z.powf(-(self.bound as f64 + 1.0));
            best = best.min(bound);
        }
        best
    }
}

impl NoiseMechanism for PolyaDifferenceNoise {
    fn name(&self) -> String {
        "polya-difference".into()
    }

    fn truncation_bound(&self) -> u64 {
        self.bound
    }

    fn sample(&self, rng: &mut SeededRng) -> i64 {
        let a = self.sample_polya(rng) as i64;
        let b = self.sample_polya(rng) as i64;
        a - b
    }

    fn truncation_mass_bound(&self, calls: u64) -> f64 {
        (2.0 * calls as f64 * self.single_tail_bound()).min(1.0)
    }
}

/// Quantizes `x` in `[0, 1]` to `[0, scale]` by unbiased randomized rounding,
/// adds the party's noise, reduces mod q, and share-splits the result.
pub fn dp_encode(
    x: f64,
    params: &DpParams,
    noise: &dyn NoiseMechanism,
    rng: &mut SeededRng,
) -> Result<ShareVector, DpError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(DpError::InputOutOfRange(x));
    }
    let scaled = x * params.scale as f64;
    let floor = scaled.floor();
    let frac = scaled - floor;
    let mut v = floor as i64;
    if frac > 0.0 && rng.random::<f64>() < frac {
        v += 1;
    }
    let noisy = v + noise.sample(rng);
    let q = params.q.value() as i64;
    let w = noisy.rem_euclid(q) as u64;
    Ok(protocol::encode(params.q.element(w), params.m, rng))
}

/// Decodes the transcript sum back to a real estimate of the input sum:
/// representative of the field sum in `(-q/2, q/2]` (zero-centered noise
/// means no offset), divided by the scale.
pub fn dp_aggregate(t: &Transcript, params: &DpParams) -> f64 {
    let z = protocol::analyze(t).value();
    let q = params.q.value();
    let centered = if z <= (q - 1) / 2 {
        z as i64
    } else {
        z as i64 - q as i64
    };
    centered as f64 / params.scale as f64
}

/// One full simulated round: encode every input, shuffle, aggregate.
#[derive(Debug, Clone)]
pub struct DpTrial {
    pub estimate: f64,
    pub true_sum: f64,
    /// Scaled quantized-plus-noise sum, tracked outside the field.
    pub noisy_scaled_sum: i64,
    pub decoded_scaled: i64,
    /// Whether the no-wraparound precondition
    /// `n (truncation_bound + scale) < q/2` held for this configuration.
    pub wraparound_safe: bool,
}

pub fn dp_simulate(
    xs: &[f64],
    params: &DpParams,
    noise: &dyn NoiseMechanism,
    rng: &mut SeededRng,
) -> Result<DpTrial, DpError> {
    assert_eq!(xs.len(), params.n, "one input per party");
    let q = params.q.value() as i64;
    let mut vectors = Vec::with_capacity(params.n);
    let mut noisy_scaled_sum = 0i64;
    for &x in xs {
        if !(0.0..=1.0).contains(&x) {
            return Err(DpError::InputOutOfRange(x));
        }
        let scaled = x * params.scale as f64;
        let floor = scaled.floor();
        let frac = scaled - floor;
        let mut v = floor as i64;
        if frac > 0.0 && rng.random::<f64>() < frac {
            v += 1;
        }
        let noisy = v + noise.sample(rng);
        noisy_scaled_sum += noisy;
        let w = noisy.rem_euclid(q) as u64;
        vectors.push(protocol::encode(params.q.element(w), params.m, rng));
    }
    let transcript = protocol::shuffle(&vectors, rng)?;
    let estimate = dp_aggregate(&transcript, params);
    let decoded_scaled = (estimate * params.scale as f64).round() as i64;

    let n = params.n as u64;
    let wraparound_safe = n * (noise.truncation_bound() + params.scale) < params.q.value() / 2;
    if wraparound_safe {
        // inside the headroom the decode is exact, not just likely
        assert_eq!(
            decoded_scaled, noisy_scaled_sum,
            "decoded sum must equal the true noisy sum inside the headroom"
        );
    }
    Ok(DpTrial {
        estimate,
        true_sum: xs.iter().sum(),
        noisy_scaled_sum,
        decoded_scaled,
        wraparound_safe,
    })
}

/// The (epsilon, delta) accounting of a configuration: the security side
/// contributes `(1 + e^eps) 2^(-sigma-1)` (which the sigma formula makes
/// `delta/4`), the noise side its truncation mass. A report, not a proof.
#[derive(Debug, Clone)]
pub struct AccountingReport {
    pub epsilon: f64,
    pub delta_target: f64,
    pub sigma: f64,
    pub delta_security: f64,
    pub delta_noise: f64,
    pub delta_total: f64,
    pub m: usize,
    pub q: u64,
    pub bits_per_message: u32,
    pub noise_name: String,
}

pub fn dp_privacy_accounting(params: &DpParams, noise: &dyn NoiseMechanism) -> AccountingReport {
    let delta_security = (1.0 + params.epsilon.exp()) * (-params.sigma - 1.0).exp2();
    let delta_noise = noise.truncation_mass_bound(params.n as u64);
    AccountingReport {
        epsilon: params.epsilon,
        delta_target: params.delta,
        sigma: params.sigma,
        delta_security,
        delta_noise,
        delta_total: delta_security + delta_noise,
        m: params.m,
        q: params.q.value(),
        bits_per_message: params.bits_per_message(),
        noise_name: noise.name(),
    }
}

/// Mean absolute error of repeated simulated rounds; the experiment behind
/// the expected-error claim.
#[derive(Debug, Clone)]
pub struct ErrorExperiment {
    pub mean_abs_error: f64,
    pub max_abs_error: f64,
    pub trials: u64,
}

pub fn dp_error_experiment(
    params: &DpParams,
    noise: &dyn NoiseMechanism,
    trials: u64,
    seed: u64,
) -> Result<ErrorExperiment, DpError> {
    use rayon::prelude::*;
    assert!(trials >= 1);
    let errors: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng::substream(seed, trial);
            let xs: Vec<f64> = (0..params.n).map(|_| rng.random::<f64>()).collect();
            let run = dp_simulate(&xs, params, noise, &mut rng)?;
            Ok((run.estimate - run.true_sum).abs())
        })
        .collect::<Result<_, DpError>>()?;
    let mean = errors.iter().sum::<f64>() / trials as f64;
    let max = errors.iter().cloned().fold(0.0, f64::max);
    Ok(ErrorExperiment {
        mean_abs_error: mean,
        max_abs_error: max,
        trials,
    })
}
