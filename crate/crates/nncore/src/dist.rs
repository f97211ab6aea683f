//! Action distributions. Inputs may be any [`Scalar`]; all arithmetic and
//! results are `f64`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{NnError, Result};
use crate::tensor::Scalar;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<f64> {
    let max = logits
        .iter()
        .map(|v| v.to_f64())
        .fold(f64::NEG_INFINITY, f64::max);
    let lse = max
        + logits
            .iter()
            .map(|v| (v.to_f64() - max).exp())
            .sum::<f64>()
            .ln();
    logits.iter().map(|v| v.to_f64() - lse).collect()
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// Shannon entropy (nats) of the categorical distribution over `logits`.
pub fn entropy_categorical<T: Scalar>(logits: &[T]) -> f64 {
    log_softmax(logits)
        .into_iter()
        .map(|lp| -lp.exp() * lp)
        .sum()
}

/// Draws an index from `softmax(logits)` by inverse CDF; returns the index
/// and its log-probability.
pub fn sample_categorical<T: Scalar, R: Rng + ?Sized>(logits: &[T], rng: &mut R) -> Result<(usize, f64)> {
    if logits.is_empty() {
        return Err(NnError::Shape("empty logits".into()));
    }
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(NnError::NonFinite("logits"));
    }
    let logp = log_softmax(logits);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, lp) in logp.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return Ok((i, *lp));
        }
    }
    // u landed in the rounding gap above the final partial sum
    let last = logp.len() - 1;
    Ok((last, logp[last]))
}

/// Sum of independent per-dimension normal log-densities.
pub fn gaussian_logprob<T: Scalar>(mean: &[T], log_std: &[T], sample: &[T]) -> f64 {
    assert!(
        mean.len() == log_std.len() && mean.len() == sample.len(),
        "gaussian_logprob dimension mismatch"
    );
    mean.iter()
        .zip(log_std)
        .zip(sample)
        .map(|((m, ls), x)| {
            let ls = ls.to_f64();
            let z = (x.to_f64() - m.to_f64()) / ls.exp();
            -0.5 * z * z - ls - 0.5 * LN_2PI
        })
        .sum()
}

/// Entropy of a diagonal Gaussian with the given log standard deviations.
pub fn gaussian_entropy<T: Scalar>(log_std: &[T]) -> f64 {
    log_std
        .iter()
        .map(|ls| ls.to_f64() + 0.5 * (1.0 + LN_2PI))
        .sum()
}

pub fn sample_gaussian<T: Scalar, R: Rng + ?Sized>(mean: &[T], log_std: &[T], rng: &mut R) -> Vec<f64> {
    mean.iter()
        .zip(log_std)
        .map(|(m, ls)| {
            let eps: f64 = rng.sample(StandardNormal);
            m.to_f64() + ls.to_f64().exp() * eps
        })
        .collect()
}
