//! DerSimonian–Laird random-effects pooling of per-study effects.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::stats::{compensated_sum, Z_95};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaResult {
    pub k: usize,
    pub g_wm: f64,
    pub v_wm: f64,
    pub tau2: f64,
    pub q: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Normalized random-effects weights, in input order.
    pub weights: Vec<f64>,
}

/// Pool `(g, v_g)` pairs. Sums run over the inputs sorted by `(g, v)`, so the
/// result is bit-identical under any permutation of `effects`.
pub fn pool_random_effects(effects: &[(f64, f64)]) -> Result<MetaResult> {
    if effects.is_empty() {
        return Err(Error::EmptyInput);
    }
    for (i, &(g, v)) in effects.iter().enumerate() {
        if !g.is_finite() {
            return Err(domain(format!("effect {i} is not finite ({g})")));
        }
        if !(v > 0.0 && v.is_finite()) {
            return Err(domain(format!("effect {i} has nonpositive variance ({v})")));
        }
    }
    let k = effects.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        effects[a]
            .0
            .total_cmp(&effects[b].0)
            .then(effects[a].1.total_cmp(&effects[b].1))
    });
    let sorted: Vec<(f64, f64)> = order.iter().map(|&i| effects[i]).collect();

    let w: Vec<f64> = sorted.iter().map(|&(_, v)| 1.0 / v).collect();
    let sw = compensated_sum(&w);
    let g_fe = compensated_sum(
        &sorted
            .iter()
            .zip(&w)
            .map(|(&(g, _), &wi)| wi * g)
            .collect::<Vec<_>>(),
    ) / sw;
    let q = compensated_sum(
        &sorted
            .iter()
            .zip(&w)
            .map(|(&(g, _), &wi)| wi * (g - g_fe) * (g - g_fe))
            .collect::<Vec<_>>(),
    );
    let tau2 = if k == 1 {
        0.0
    } else {
        let c = sw - compensated_sum(&w.iter().map(|wi| wi * wi).collect::<Vec<_>>()) / sw;
        ((q - (k as f64 - 1.0)) / c).max(0.0)
    };

    let w_re: Vec<f64> = sorted.iter().map(|&(_, v)| 1.0 / (v + tau2)).collect();
    let sw_re = compensated_sum(&w_re);
    let g_wm = compensated_sum(
        &sorted
            .iter()
            .zip(&w_re)
            .map(|(&(g, _), &wi)| wi * g)
            .collect::<Vec<_>>(),
    ) / sw_re;
    let (lo, hi) = (sorted[0].0, sorted[k - 1].0);
    let g_wm = g_wm.clamp(lo, hi);
    let v_wm = 1.0 / sw_re;
    let half = Z_95 * v_wm.sqrt();

    let mut weights = vec![0.0; k];
    for (pos, &i) in order.iter().enumerate() {
        weights[i] = w_re[pos] / sw_re;
    }
    Ok(MetaResult {
        k,
        g_wm,
        v_wm,
        tau2,
        q,
        ci_lo: g_wm - half,
        ci_hi: g_wm + half,
        weights,
    })
}
