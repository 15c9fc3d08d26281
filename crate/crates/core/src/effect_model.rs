//! Study summaries and the summary-statistics ("crude") additive estimator.
//!
//! Genotype groups are always ordered AA, AB, BB (0, 1, 2 risk-allele copies).
//! Pairwise effects are formed for the adjacent pairs AA/AB and AB/BB and then
//! combined by inverse-variance weighting.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Reported per-genotype summary statistics for one study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub study_id: String,
    pub means: [f64; 3],
    pub sds: [f64; 3],
    pub n: [u32; 3],
}

impl StudySummary {
    pub fn new(
        study_id: impl Into<String>,
        means: [f64; 3],
        sds: [f64; 3],
        n: [u32; 3],
    ) -> Result<Self> {
        let summary = Self {
            study_id: study_id.into(),
            means,
            sds,
            n,
        };
        summary.validate()?;
        Ok(summary)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::InvalidSummary {
            study: self.study_id.clone(),
            reason,
        };
        for k in 0..3 {
            if !self.means[k].is_finite() {
                return Err(fail(format!("mean m{} is not finite", k + 1)));
            }
            if !(self.sds[k].is_finite() && self.sds[k] > 0.0) {
                return Err(fail(format!(
                    "sd{} must be positive, got {}",
                    k + 1,
                    self.sds[k]
                )));
            }
            if self.n[k] < 2 {
                return Err(fail(format!(
                    "n{} must be at least 2, got {}",
                    k + 1,
                    self.n[k]
                )));
            }
        }
        Ok(())
    }

    pub fn total_n(&self) -> u32 {
        self.n.iter().sum()
    }
}

/// Effect size for one pair of adjacent genotype groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairEffect {
    pub d: f64,
    pub v_d: f64,
    pub j: f64,
    pub g: f64,
    pub v_g: f64,
    pub n_lo: u32,
    pub n_hi: u32,
}

impl PairEffect {
    pub fn new(d: f64, n_lo: u32, n_hi: u32) -> Result<Self> {
        let v_d = cohens_d_variance(n_lo, n_hi, d)?;
        let j = hedges_j(n_lo, n_hi)?;
        Ok(Self {
            d,
            v_d,
            j,
            g: j * d,
            v_g: j * j * v_d,
            n_lo,
            n_hi,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Crude,
    Simulation,
    /// Computed from individual-level data (the Monte Carlo reference).
    Individual,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Crude => "crude",
            Method::Simulation => "sim",
            Method::Individual => "individual",
        }
    }
}

/// Per-study additive-model effect.
///
/// For the crude method `d == beta / sd_beta`. For the simulation method all
/// three are iteration means, so the identity only holds approximately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveEffect {
    pub study_id: String,
    pub beta: f64,
    pub sd_beta: f64,
    pub d: f64,
    pub g: f64,
    pub v_g: f64,
    pub method: Method,
    pub pair12: PairEffect,
    pub pair23: PairEffect,
}

impl AdditiveEffect {
    /// Build the pairwise records from a single standardized effect `d` and
    /// pool them into the combined `g`.
    pub fn from_d(
        summary: &StudySummary,
        beta: f64,
        sd_beta: f64,
        d: f64,
        method: Method,
    ) -> Result<Self> {
        let pair12 = PairEffect::new(d, summary.n[0], summary.n[1])?;
        let pair23 = PairEffect::new(d, summary.n[1], summary.n[2])?;
        let (g, v_g) = combine_pairs(&pair12, &pair23)?;
        Ok(Self {
            study_id: summary.study_id.clone(),
            beta,
            sd_beta,
            d,
            g,
            v_g,
            method,
            pair12,
            pair23,
        })
    }
}

/// How the crude estimator standardizes its slope.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrudeScale {
    /// Mean of the AA/AB and AB/BB pooled SDs.
    #[default]
    PairwiseAverage,
    /// Within-group SD pooled over all three groups (N - 3 df).
    PooledWithin,
}

pub fn pooled_sd(sd_a: f64, n_a: u32, sd_b: f64, n_b: u32) -> Result<f64> {
    if n_a < 1 || n_b < 1 {
        return Err(domain(format!(
            "pooled_sd: counts must be >= 1, got ({n_a}, {n_b})"
        )));
    }
    if n_a + n_b <= 2 {
        return Err(domain(format!(
            "pooled_sd: n_a + n_b must exceed 2, got {}",
            n_a + n_b
        )));
    }
    if !(sd_a > 0.0 && sd_b > 0.0) {
        return Err(domain(format!(
            "pooled_sd: SDs must be positive, got ({sd_a}, {sd_b})"
        )));
    }
    let (na, nb) = (f64::from(n_a), f64::from(n_b));
    // IEEE addition is commutative, so swapping the arguments is exact.
    let ss = (na - 1.0) * sd_a * sd_a + (nb - 1.0) * sd_b * sd_b;
    Ok((ss / (na + nb - 2.0)).sqrt())
}

/// Within-group SD pooled across all three genotype groups.
pub fn pooled_sd_three(summary: &StudySummary) -> Result<f64> {
    summary.validate()?;
    let ss: f64 = (0..3)
        .map(|k| (f64::from(summary.n[k]) - 1.0) * summary.sds[k] * summary.sds[k])
        .sum();
    Ok((ss / (f64::from(summary.total_n()) - 3.0)).sqrt())
}

/// Slope of the three group means on codes 1, 2, 3 and its standardizer.
pub fn crude_beta(summary: &StudySummary) -> Result<(f64, f64)> {
    crude_beta_with(summary, CrudeScale::default())
}

pub fn crude_beta_with(summary: &StudySummary, scale: CrudeScale) -> Result<(f64, f64)> {
    summary.validate()?;
    let [m1, _, m3] = summary.means;
    // Unweighted OLS on equally spaced codes reduces to the end-point slope.
    let beta = (m3 - m1) / 2.0;
    let sd_beta = match scale {
        CrudeScale::PairwiseAverage => {
            let sd12 = pooled_sd(summary.sds[0], summary.n[0], summary.sds[1], summary.n[1])?;
            let sd23 = pooled_sd(summary.sds[1], summary.n[1], summary.sds[2], summary.n[2])?;
            (sd12 + sd23) / 2.0
        }
        CrudeScale::PooledWithin => pooled_sd_three(summary)?,
    };
    Ok((beta, sd_beta))
}

/// Large-sample variance of Cohen's d for two groups.
pub fn cohens_d_variance(n_a: u32, n_b: u32, d: f64) -> Result<f64> {
    if n_a == 0 || n_b == 0 {
        return Err(domain(format!(
            "cohens_d_variance: zero count ({n_a}, {n_b})"
        )));
    }
    let (na, nb) = (f64::from(n_a), f64::from(n_b));
    Ok((na + nb) / (na * nb) + d * d / (2.0 * (na + nb)))
}

/// Hedges' small-sample correction factor J = 1 - 3 / (4(n_a + n_b - 2) - 1).
pub fn hedges_j(n_a: u32, n_b: u32) -> Result<f64> {
    let df = f64::from(n_a) + f64::from(n_b) - 2.0;
    let denom = 4.0 * df - 1.0;
    if df <= 0.0 || denom <= 3.0 {
        return Err(domain(format!(
            "hedges_j: need n_a + n_b > 2, got ({n_a}, {n_b})"
        )));
    }
    Ok(1.0 - 3.0 / denom)
}

/// Inverse-variance weighted mean of the two pairwise g's and its variance.
pub fn combine_pairs(pair12: &PairEffect, pair23: &PairEffect) -> Result<(f64, f64)> {
    if !(pair12.v_g > 0.0 && pair23.v_g > 0.0) {
        return Err(domain(format!(
            "combine_pairs: variances must be positive, got ({}, {})",
            pair12.v_g, pair23.v_g
        )));
    }
    let w12 = 1.0 / pair12.v_g;
    let w23 = 1.0 / pair23.v_g;
    let w = w12 + w23;
    let g = (pair12.g * w12 + pair23.g * w23) / w;
    // Clamp against rounding so g never leaves the hull of its inputs.
    let g = g.clamp(pair12.g.min(pair23.g), pair12.g.max(pair23.g));
    Ok((g, 1.0 / w))
}

pub fn crude_effect(summary: &StudySummary) -> Result<AdditiveEffect> {
    crude_effect_with(summary, CrudeScale::default())
}

pub fn crude_effect_with(summary: &StudySummary, scale: CrudeScale) -> Result<AdditiveEffect> {
    let (beta, sd_beta) = crude_beta_with(summary, scale)?;
    AdditiveEffect::from_d(summary, beta, sd_beta, beta / sd_beta, Method::Crude)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn satiety() -> StudySummary {
        StudySummary::new(
            "SATIETY",
            [11.45, 12.16, 14.73],
            [8.29, 8.38, 9.63],
            [63, 63, 42],
        )
        .unwrap()
    }

    #[test]
    fn pooled_sd_examples() {
        // ((62 * 8.29^2 + 62 * 8.38^2) / 124)^0.5
        let v = pooled_sd(8.29, 63, 8.38, 63).unwrap();
        assert!((v - 8.335_121_474_82).abs() < 1e-9, "{v}");
        let v = pooled_sd(5.11, 74, 5.88, 40).unwrap();
        assert!((v - 5.390_620_905_80).abs() < 1e-9, "{v}");
        assert_eq!(pooled_sd(3.5, 10, 3.5, 10).unwrap(), 3.5);
    }

    #[test]
    fn pooled_sd_rejects_bad_input() {
        assert!(pooled_sd(0.0, 10, 1.0, 10).is_err());
        assert!(pooled_sd(1.0, 0, 1.0, 10).is_err());
        assert!(pooled_sd(1.0, 1, 1.0, 1).is_err());
        assert!(pooled_sd(-1.0, 5, 1.0, 5).is_err());
    }

    #[test]
    fn cohens_d_variance_examples() {
        assert!((cohens_d_variance(100, 100, 0.0).unwrap() - 0.02).abs() < 1e-15);
        assert!((cohens_d_variance(40, 40, 0.0).unwrap() - 2.0 / 40.0).abs() < 1e-15);
        // 126/3969 + 0.187^2/252
        let v = cohens_d_variance(63, 63, 0.187).unwrap();
        assert!((v - 0.031_884_797_62).abs() < 1e-9, "{v}");
        assert!(cohens_d_variance(0, 5, 0.1).is_err());
    }

    #[test]
    fn hedges_j_examples() {
        assert!((hedges_j(63, 63).unwrap() - (1.0 - 3.0 / 495.0)).abs() < 1e-15);
        assert!((hedges_j(2, 2).unwrap() - (1.0 - 3.0 / 7.0)).abs() < 1e-15);
        assert!((hedges_j(1_000_000, 1_000_000).unwrap() - 1.0).abs() < 1e-5);
        assert!(hedges_j(1, 1).is_err());
    }

    #[test]
    fn combine_pairs_examples() {
        let pair = |g: f64, v_g: f64| PairEffect {
            d: g,
            v_d: v_g,
            j: 1.0,
            g,
            v_g,
            n_lo: 10,
            n_hi: 10,
        };
        let (g, v) = combine_pairs(&pair(0.7, 0.3), &pair(0.7, 0.3)).unwrap();
        assert!((g - 0.7).abs() < 1e-15 && (v - 0.15).abs() < 1e-15);
        let (g, v) = combine_pairs(&pair(1.0, 1.0), &pair(0.0, 1.0)).unwrap();
        assert_eq!((g, v), (0.5, 0.5));
        let (g, v) = combine_pairs(&pair(0.2, 0.01), &pair(0.4, 0.04)).unwrap();
        assert!(
            (g - 0.24).abs() < 1e-12 && (v - 0.008).abs() < 1e-12,
            "{g} {v}"
        );
        assert!(combine_pairs(&pair(0.2, 0.0), &pair(0.4, 0.04)).is_err());
    }

    #[test]
    fn crude_beta_examples() {
        let flat = StudySummary::new("flat", [5.0; 3], [1.0, 2.0, 3.0], [10, 20, 30]).unwrap();
        assert_eq!(crude_beta(&flat).unwrap().0, 0.0);
        let lin = StudySummary::new("lin", [4.0, 5.5, 7.0], [1.0, 4.0, 2.0], [5, 8, 13]).unwrap();
        assert_eq!(crude_beta(&lin).unwrap().0, 1.5);

        let (beta, sd_beta) = crude_beta(&satiety()).unwrap();
        assert!((beta - 1.64).abs() < 1e-12);
        assert!((sd_beta - 8.617).abs() < 1e-3, "{sd_beta}");
    }

    #[test]
    fn pooled_within_scale_matches_three_group_formula() {
        let (_, sd) = crude_beta_with(&satiety(), CrudeScale::PooledWithin).unwrap();
        let ss = 62.0 * 8.29f64.powi(2) + 62.0 * 8.38f64.powi(2) + 41.0 * 9.63f64.powi(2);
        assert!((sd - (ss / 165.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn crude_effect_flat_is_zero() {
        let flat = StudySummary::new("flat", [5.0; 3], [1.0, 2.0, 3.0], [10, 20, 30]).unwrap();
        let e = crude_effect(&flat).unwrap();
        assert_eq!(e.d, 0.0);
        assert_eq!(e.g, 0.0);
        assert_eq!(e.method, Method::Crude);
    }

    #[test]
    fn crude_effect_pairs_share_combined_d() {
        let e = crude_effect(&satiety()).unwrap();
        assert_eq!(e.pair12.d, e.d);
        assert_eq!(e.pair23.d, e.d);
        assert_eq!(e.pair12.g, e.pair12.j * e.d);
        assert_eq!(e.pair23.v_g, e.pair23.j * e.pair23.j * e.pair23.v_d);
        assert!((e.d - 0.187).abs() < 0.015, "{}", e.d);
    }

    #[test]
    fn summary_validation() {
        assert!(StudySummary::new("x", [1.0; 3], [1.0, 0.0, 1.0], [5; 3]).is_err());
        assert!(StudySummary::new("x", [1.0; 3], [1.0; 3], [5, 1, 5]).is_err());
        assert!(StudySummary::new("x", [f64::NAN, 1.0, 1.0], [1.0; 3], [5; 3]).is_err());
    }
}
