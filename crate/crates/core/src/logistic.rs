//! Single-covariate logistic regression fitted by Newton–Raphson (IRLS).

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 50;
pub const TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticFit {
    pub intercept: f64,
    pub slope: f64,
    pub se_intercept: f64,
    pub se_slope: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
}

/// Bernoulli log-likelihood of `y` under `logit p = b0 + b1 x`.
pub fn log_likelihood(y: &[f64], x: &[f64], b0: f64, b1: f64) -> f64 {
    y.iter()
        .zip(x)
        .map(|(&yi, &xi)| {
            let eta = b0 + b1 * xi;
            // log(1 + e^eta) without overflow
            let softplus = if eta > 0.0 {
                eta + (-eta).exp().ln_1p()
            } else {
                eta.exp().ln_1p()
            };
            yi * eta - softplus
        })
        .sum()
}

fn check_separation(y: &[f64], x: &[f64]) -> Result<()> {
    let (mut min1, mut max1, mut min0, mut max0) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for (&yi, &xi) in y.iter().zip(x) {
        if yi == 1.0 {
            min1 = min1.min(xi);
            max1 = max1.max(xi);
        } else if yi == 0.0 {
            min0 = min0.min(xi);
            max0 = max0.max(xi);
        } else {
            return Err(Error::Domain(format!("response must be 0/1, got {yi}")));
        }
    }
    if min1.is_infinite() || min0.is_infinite() {
        return Err(Error::Separation("response is constant".into()));
    }
    if max0 <= min1 || max1 <= min0 {
        return Err(Error::Separation(format!(
            "covariate separates outcomes (y=0 in [{min0}, {max0}], y=1 in [{min1}, {max1}])"
        )));
    }
    Ok(())
}

/// Fit `logit P(y = 1) = b0 + b1 x`.
///
/// Iterates until the largest absolute score component or the largest
/// parameter step drops below [`TOLERANCE`]; standard errors come from the
/// inverse observed information at the optimum.
pub fn fit_logistic(y: &[f64], x: &[f64]) -> Result<LogisticFit> {
    if y.len() != x.len() || y.is_empty() {
        return Err(Error::Domain(format!(
            "logistic fit needs equal-length, non-empty vectors ({} vs {})",
            y.len(),
            x.len()
        )));
    }
    check_separation(y, x)?;

    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    let mut beta = [(ybar / (1.0 - ybar)).ln(), 0.0];
    let mut trace = Vec::new();
    for iter in 1..=MAX_ITERATIONS {
        let (mut s0, mut s1, mut i00, mut i01, mut i11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&yi, &xi) in y.iter().zip(x) {
            let p = 1.0 / (1.0 + (-(beta[0] + beta[1] * xi)).exp());
            let w = p * (1.0 - p);
            s0 += yi - p;
            s1 += (yi - p) * xi;
            i00 += w;
            i01 += w * xi;
            i11 += w * xi * xi;
        }
        let det = i00 * i11 - i01 * i01;
        if det.is_nan() || det <= 1e-300 || det.is_infinite() {
            return Err(Error::Separation(format!(
                "singular information matrix (det = {det})"
            )));
        }
        let step = [(i11 * s0 - i01 * s1) / det, (i00 * s1 - i01 * s0) / det];
        let score_max = s0.abs().max(s1.abs());
        trace.push((beta[1], score_max));
        if score_max < TOLERANCE {
            return Ok(finish(y, x, beta, [i00, i01, i11], iter));
        }
        beta[0] += step[0];
        beta[1] += step[1];
        if beta[1].abs() > 50.0 || !beta[1].is_finite() {
            return Err(Error::Separation(format!("slope diverging ({})", beta[1])));
        }
        if step[0].abs().max(step[1].abs()) < TOLERANCE {
            let info = information(x, beta);
            return Ok(finish(y, x, beta, info, iter));
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
        trace,
    })
}

fn information(x: &[f64], beta: [f64; 2]) -> [f64; 3] {
    let (mut i00, mut i01, mut i11) = (0.0, 0.0, 0.0);
    for &xi in x {
        let p = 1.0 / (1.0 + (-(beta[0] + beta[1] * xi)).exp());
        let w = p * (1.0 - p);
        i00 += w;
        i01 += w * xi;
        i11 += w * xi * xi;
    }
    [i00, i01, i11]
}

fn finish(y: &[f64], x: &[f64], beta: [f64; 2], info: [f64; 3], iterations: usize) -> LogisticFit {
    let [i00, i01, i11] = info;
    let det = i00 * i11 - i01 * i01;
    LogisticFit {
        intercept: beta[0],
        slope: beta[1],
        se_intercept: (i11 / det).sqrt(),
        se_slope: (i00 / det).sqrt(),
        log_likelihood: log_likelihood(y, x, beta[0], beta[1]),
        iterations,
    }
}
