//! Entropy of minimum-key sets.
//!
//! A sketch retains the k least of n distinct 63-bit keys. How small
//! can a lossless encoding of those keys possibly be? The answer is the
//! Shannon entropy of the retained set, and this module computes it
//! several ways:
//!
//! - [`h_uniform`]: one uniform key, `ln s` nats.
//! - [`hbs_approx`] / [`hbs_exact`]: one delta near the bottom of a
//!   uniform sample of n keys. The minimum of n uniforms is roughly
//!   Exp(n)-distributed, which costs about `ln s - ln n + (n-1)/n`
//!   nats; the exact form enumerates the discretized distribution.
//! - [`hkn_approx`] / [`hkn_exact`]: the whole k-least set, about
//!   `k (ln s - ln(n+1) + 1)` nats. The exact form sums over the
//!   distribution of the k-th least element j, weighting each j by the
//!   `C(j-1, k-1)` equally likely sets below it.
//! - [`empirical_hkn`]: a Monte Carlo estimate of the same quantity,
//!   averaging `-ln p(set)` over sampled sets. Usable at any s, which
//!   the exact sum is not.
//! - [`predicted_min_leading_zeros`]: how many high zero bits the
//!   deltas of such a set share, about `log2 n - log2 ln n - 2`.
//!
//! Throughout, `s` is the hash-space size (2^63 for this crate's
//! sketches, arbitrary for analysis), `n` the number of distinct keys
//! hashed, and `k` the retention capacity, with 1 <= k <= n <= s.
//! Entropies are carried in nats and converted on the way out.

use std::f64::consts::LN_2;
use std::fmt;

use libm::lgamma as ln_gamma;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Beta, Distribution};

/// Largest s that [`hbs_exact`] will enumerate.
pub const HBS_EXACT_MAX_S: u128 = 1 << 22;
/// Largest s that [`hkn_exact`] will sum over.
pub const HKN_EXACT_MAX_S: u128 = 1 << 20;

/// Errors for entropy computations.
#[derive(Debug, Clone, PartialEq)]
pub enum EntropyError {
    /// Arguments violate 1 <= k <= n <= s or an operation's own bound.
    Domain { detail: String },
    /// A computation failed internally (normalization drift, a sampler
    /// that cannot produce valid draws).
    Numeric { detail: String },
    /// s is beyond what an exact enumeration will attempt.
    OverflowGuard { limit: u128, requested: u128 },
}

impl fmt::Display for EntropyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntropyError::Domain { detail } => write!(f, "domain error: {detail}"),
            EntropyError::Numeric { detail } => write!(f, "numeric error: {detail}"),
            EntropyError::OverflowGuard { limit, requested } => {
                write!(f, "s = {requested} exceeds enumeration limit {limit}")
            }
        }
    }
}

impl std::error::Error for EntropyError {}

fn domain(detail: impl Into<String>) -> EntropyError {
    EntropyError::Domain {
        detail: detail.into(),
    }
}

/// Symbols shared by every operation here: hash-space size s, distinct
/// count n, retained keys k.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntropyParams {
    pub s: u128,
    pub n: u64,
    pub k: u64,
}

impl EntropyParams {
    /// Validates 1 <= k <= n <= s.
    pub fn new(s: u128, n: u64, k: u64) -> Result<Self, EntropyError> {
        if k == 0 {
            return Err(domain("k must be at least 1"));
        }
        if k > n {
            return Err(domain(format!("k = {k} exceeds n = {n}")));
        }
        if u128::from(n) > s {
            return Err(domain(format!("n = {n} exceeds s = {s}")));
        }
        Ok(EntropyParams { s, n, k })
    }
}

/// An entropy in every unit a caller might want.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimate {
    pub nats: f64,
    pub bits: f64,
    pub bits_per_key: f64,
    pub bytes: f64,
}

impl EntropyEstimate {
    fn from_nats(nats: f64, k: u64) -> Self {
        let bits = nats / LN_2;
        EntropyEstimate {
            nats,
            bits,
            bits_per_key: bits / k as f64,
            bytes: bits / 8.0,
        }
    }
}

/// Report from the Monte Carlo estimator [`empirical_hkn`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalEntropyReport {
    pub samples: u64,
    pub mean_bits_per_key: f64,
    /// Sample standard deviation of the per-key bit cost.
    pub std_bits_per_key: f64,
    /// [`hkn_approx`] for the same parameters, per key.
    pub approx_bits_per_key: f64,
    /// mean_bits_per_key - approx_bits_per_key.
    pub diff: f64,
    /// Draws rejected and retried because they landed where the
    /// closed-form sample expression is undefined.
    pub resamples: u64,
}

/// Compensated summation. Entropy sums run over up to millions of
/// terms spanning many magnitudes; plain accumulation drifts past the
/// 1e-10 normalization check.
#[derive(Clone, Copy, Default)]
struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Entropy of one key drawn uniformly from a space of size s: ln s.
pub fn h_uniform(s: u128) -> Result<EntropyEstimate, EntropyError> {
    if s == 0 {
        return Err(domain("s must be at least 1"));
    }
    Ok(EntropyEstimate::from_nats((s as f64).ln(), 1))
}

/// Approximate entropy of one value at the bottom of a uniform sample
/// of n keys: ln s - ln n + (n-1)/n nats, with error O(n ln n / s).
pub fn hbs_approx(s: u128, n: u64) -> Result<EntropyEstimate, EntropyError> {
    EntropyParams::new(s, n, 1)?;
    let nf = n as f64;
    let nats = (s as f64).ln() - nf.ln() + (nf - 1.0) / nf;
    Ok(EntropyEstimate::from_nats(nats, 1))
}

/// Exact entropy of the minimum of n uniform draws discretized onto s
/// bins: -sum q_i ln q_i with q_i = (1 - i/s)^n - (1 - (i+1)/s)^n.
///
/// Enumerates all s bins, so s is capped at [`HBS_EXACT_MAX_S`].
pub fn hbs_exact(s: u128, n: u64) -> Result<EntropyEstimate, EntropyError> {
    EntropyParams::new(s, n, 1)?;
    if s > HBS_EXACT_MAX_S {
        return Err(EntropyError::OverflowGuard {
            limit: HBS_EXACT_MAX_S,
            requested: s,
        });
    }
    let s = s as u64;
    let sf = s as f64;
    let nf = n as f64;
    let mut entropy = KahanSum::default();
    let mut prev = 1.0;
    for i in 0..s {
        let next = if i + 1 == s {
            0.0
        } else {
            ((s - i - 1) as f64 / sf).powf(nf)
        };
        let q = prev - next;
        if q > 0.0 {
            entropy.add(-q * q.ln());
        }
        prev = next;
    }
    Ok(EntropyEstimate::from_nats(entropy.value(), 1))
}

/// Approximate entropy of the set of the k least of n distinct uniform
/// keys: k (ln s - ln(n+1) + 1) nats, with per-key error
/// O(max(n ln n / s, ln k / k)).
pub fn hkn_approx(s: u128, n: u64, k: u64) -> Result<EntropyEstimate, EntropyError> {
    EntropyParams::new(s, n, k)?;
    let per_key = (s as f64).ln() - (n as f64 + 1.0).ln() + 1.0;
    Ok(EntropyEstimate::from_nats(k as f64 * per_key, k))
}

/// Exact entropy of the k-least set by summation over j, the value of
/// the k-th least element.
///
/// The set's probability factors through j: there are C(j-1, k-1)
/// equally likely sets below a given j, and j itself has pmf
/// p_j = C(j-1, k-1) C(s-j, n-k) / C(s, n). The entropy is
/// -sum_j p_j [ln p_j - ln C(j-1, k-1)].
///
/// Terms are carried in log space via the term-to-term ratio
///
/// ```text
/// p_{j+1}/p_j = [j / (j-k+1)] * [(s-j-(n-k)) / (s-j)]
/// ```
///
/// anchored at ln p_k = -sum_{i<k} [ln(s-i) - ln(n-i)], which keeps
/// every intermediate finite even where p_j underflows. The computed
/// pmf must sum to 1 within 1e-10 or the call reports a numeric error.
/// s is capped at [`HKN_EXACT_MAX_S`].
pub fn hkn_exact(s: u128, n: u64, k: u64) -> Result<EntropyEstimate, EntropyError> {
    EntropyParams::new(s, n, k)?;
    if s > HKN_EXACT_MAX_S {
        return Err(EntropyError::OverflowGuard {
            limit: HKN_EXACT_MAX_S,
            requested: s,
        });
    }
    let s = s as u64;

    let mut lp = KahanSum::default();
    for i in 0..k {
        lp.add(((n - i) as f64).ln() - ((s - i) as f64).ln());
    }
    let mut lck = KahanSum::default();
    let mut entropy = KahanSum::default();
    let mut psum = KahanSum::default();

    let j_max = s - n + k;
    for j in k..=j_max {
        let log_p = lp.value();
        let p = log_p.exp();
        psum.add(p);
        entropy.add(p * (lck.value() - log_p));
        if j < j_max {
            let below = (j as f64).ln() - ((j - k + 1) as f64).ln();
            let above = ((s - j - (n - k)) as f64).ln() - ((s - j) as f64).ln();
            lp.add(below + above);
            lck.add(below);
        }
    }

    let drift = (psum.value() - 1.0).abs();
    if drift > 1e-10 {
        return Err(EntropyError::Numeric {
            detail: format!("pmf sums to 1 with drift {drift:.3e}"),
        });
    }
    Ok(EntropyEstimate::from_nats(entropy.value(), k))
}

/// ln C(a, b) via the log-gamma function.
pub fn log_choose(a: u64, b: u64) -> Result<f64, EntropyError> {
    if b > a {
        return Err(domain(format!("b = {b} exceeds a = {a}")));
    }
    let af = a as f64;
    let bf = b as f64;
    Ok(ln_gamma(af + 1.0) - ln_gamma(bf + 1.0) - ln_gamma(af - bf + 1.0))
}

/// Predicted shared leading-zero count of the deltas after n distinct
/// keys: log2 n - log2 ln n - 2.
pub fn predicted_min_leading_zeros(n: u64) -> Result<f64, EntropyError> {
    if n < 3 {
        return Err(domain(format!("n = {n} below 3")));
    }
    let nf = n as f64;
    Ok(nf.log2() - nf.ln().log2() - 2.0)
}

/// Monte Carlo estimate of the per-key entropy of the k-least set.
///
/// Each sample draws j, the value of the k-th least of n uniform keys:
/// the k-th order statistic of n uniforms on (0,1) is Beta(k, n-k+1)
/// distributed, and j = floor(u s) + 1 clamped to [k, s] discretizes
/// it. The sample value is -ln p(set) in closed form,
///
/// ```text
/// sum_{i<n} ln(s-i) - sum_{i<k} ln(n-i)
///   - (n-k) [ln s + ln(1 - t - (n-k-1)/s)]       t = j/s
/// ```
///
/// whose last logarithm collapses the (n-k) factors above j into one
/// evaluation; the gap to the true product is under
/// (n-k)(n-k-1) / (2s(1-t)) nats, vanishing for s at hash-space scale.
/// A draw landing where that logarithm is undefined is rejected and
/// retried (`resamples` counts these); if retries exceed 100 per
/// requested sample the call reports a numeric error.
///
/// The mean of -ln p(set) is the entropy, so the report's mean
/// estimates [`hkn_exact`] per key and its diff column compares
/// against [`hkn_approx`], at any s.
pub fn empirical_hkn(
    s: u128,
    n: u64,
    k: u64,
    samples: u64,
    seed: u64,
) -> Result<EmpiricalEntropyReport, EntropyError> {
    EntropyParams::new(s, n, k)?;
    if samples == 0 {
        return Err(domain("samples must be at least 1"));
    }
    let sf = s as f64;
    let ln_s = sf.ln();

    // c1 = sum_{i<n} ln(s-i), in the form n ln s + sum ln(1 - i/s) so
    // the correction survives even when i/s is below f64 resolution of
    // s - i.
    let mut c1 = KahanSum::default();
    for i in 0..n {
        c1.add((-(i as f64) / sf).ln_1p());
    }
    let c1 = n as f64 * ln_s + c1.value();
    let mut c2 = KahanSum::default();
    for i in 0..k {
        c2.add(((n - i) as f64).ln());
    }
    let c2 = c2.value();

    let beta = Beta::new(k as f64, (n - k) as f64 + 1.0)
        .map_err(|e| EntropyError::Numeric {
            detail: format!("Beta({k}, {}): {e}", n - k + 1),
        })?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let nk = (n - k) as f64;
    let kf = k as f64;

    let max_attempts = samples.saturating_mul(100);
    let mut attempts = 0u64;
    let mut resamples = 0u64;
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for drawn in 0..samples {
        let nats = loop {
            attempts += 1;
            if attempts > max_attempts {
                return Err(EntropyError::Numeric {
                    detail: format!(
                        "rejected {resamples} draws in {attempts} attempts"
                    ),
                });
            }
            let u: f64 = beta.sample(&mut rng);
            let j = ((u * sf).floor() + 1.0).clamp(kf, sf);
            let t = j / sf;
            let arg = 1.0 - t - (nk - 1.0) / sf;
            if nk > 0.0 && arg <= 0.0 {
                resamples += 1;
                continue;
            }
            break if nk > 0.0 {
                c1 - c2 - nk * (ln_s + arg.ln())
            } else {
                c1 - c2
            };
        };
        let x = nats / (kf * LN_2);
        let delta = x - mean;
        mean += delta / (drawn + 1) as f64;
        m2 += delta * (x - mean);
    }
    let std = if samples > 1 {
        (m2 / (samples - 1) as f64).sqrt()
    } else {
        0.0
    };

    let approx = hkn_approx(s, n, k)?.bits_per_key;
    Ok(EmpiricalEntropyReport {
        samples,
        mean_bits_per_key: mean,
        std_bits_per_key: std,
        approx_bits_per_key: approx,
        diff: mean - approx,
        resamples,
    })
}
