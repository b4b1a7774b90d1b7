//! Small information-theoretic helpers shared by the oracle and the tests.
//!
//! Everything here works in nats; use [`nats_to_bits`] at reporting time.

use crate::error::{NtsError, Result};

pub const LN_2: f64 = std::f64::consts::LN_2;

pub fn nats_to_bits(x: f64) -> f64 {
    x / LN_2
}

pub fn bits_to_nats(x: f64) -> f64 {
    x * LN_2
}

/// Binary entropy in bits.
pub fn h2(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    term(p) + term(1.0 - p)
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// Kullback-Leibler divergence `D(p || q)` in nats; infinite when `p` is not
/// absolutely continuous with respect to `q`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            acc += a * (a / b).ln();
        }
    }
    acc.max(0.0)
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn l1_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

/// `ln Σ exp(v_i)` over the finite entries of `v`.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + v.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Checks that `p` is a probability vector (entries in [0, 1], sum within
/// `tol` of 1) and returns a renormalized copy.
pub fn normalized(p: &[f64], tol: f64) -> Result<Vec<f64>> {
    if p.is_empty() {
        return Err(NtsError::InvalidDistribution("empty vector".into()));
    }
    if let Some(bad) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(NtsError::InvalidDistribution(format!(
            "entry {bad} is not a probability"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(NtsError::InvalidDistribution(format!(
            "entries sum to {sum}"
        )));
    }
    Ok(p.iter().map(|x| x / sum).collect())
}

pub fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}
