//! Normal-mixture shapes used to generate "original" study data.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityId {
    /// Standard normal.
    F1,
    /// Strongly right skewed.
    F2,
    /// Asymmetric bimodal.
    F3,
    /// Heavily kurtotic.
    F4,
}

impl DensityId {
    pub const ALL: [DensityId; 4] = [DensityId::F1, DensityId::F2, DensityId::F3, DensityId::F4];

    pub fn as_str(self) -> &'static str {
        match self {
            DensityId::F1 => "f1",
            DensityId::F2 => "f2",
            DensityId::F3 => "f3",
            DensityId::F4 => "f4",
        }
    }

    pub fn density(self) -> MixtureDensity {
        MixtureDensity::new(self)
    }
}

impl fmt::Display for DensityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DensityId {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f1" | "normal" => Ok(DensityId::F1),
            "f2" | "skewed" => Ok(DensityId::F2),
            "f3" | "bimodal" => Ok(DensityId::F3),
            "f4" | "kurtotic" => Ok(DensityId::F4),
            other => Err(domain(format!(
                "unknown density '{other}' (expected f1..f4)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureDensity {
    pub id: DensityId,
    pub components: Vec<Component>,
    pub analytic_mean: f64,
    pub analytic_var: f64,
    /// Cumulative weights for component selection; the last entry is 1.
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl MixtureDensity {
    pub fn new(id: DensityId) -> Self {
        let c = |weight: f64, mu: f64, sigma: f64| Component { weight, mu, sigma };
        let components = match id {
            DensityId::F1 => vec![c(1.0, 0.0, 1.0)],
            DensityId::F2 => (0..8)
                .map(|l| {
                    let r = (2.0f64 / 3.0).powi(l);
                    c(1.0 / 8.0, 3.0 * (r - 1.0), r)
                })
                .collect(),
            DensityId::F3 => vec![c(0.75, 0.0, 1.0), c(0.25, 1.5, 1.0 / 3.0)],
            DensityId::F4 => vec![c(2.0 / 3.0, 0.0, 1.0), c(1.0 / 3.0, 0.0, 0.1f64.sqrt())],
        };
        Self::from_components(id, components)
    }

    fn from_components(id: DensityId, components: Vec<Component>) -> Self {
        let analytic_mean: f64 = components.iter().map(|c| c.weight * c.mu).sum();
        let second: f64 = components
            .iter()
            .map(|c| c.weight * (c.sigma * c.sigma + c.mu * c.mu))
            .sum();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = components
            .iter()
            .map(|c| {
                acc += c.weight;
                acc
            })
            .collect();
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Self {
            id,
            components,
            analytic_mean,
            analytic_var: second - analytic_mean * analytic_mean,
            cumulative,
        }
    }

    /// One draw from the unstandardized mixture.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let idx = if self.components.len() == 1 {
            0
        } else {
            let u: f64 = rng.random();
            self.cumulative
                .iter()
                .position(|&c| u < c)
                .unwrap_or(self.components.len() - 1)
        };
        let comp = &self.components[idx];
        let z: f64 = rng.sample(StandardNormal);
        comp.mu + comp.sigma * z
    }
}

/// Draws from `density`, affinely rescaled so the population mean and SD
/// equal `target_mean` and `target_sd`.
pub fn sample_standardized<R: Rng + ?Sized>(
    density: &MixtureDensity,
    n: usize,
    target_mean: f64,
    target_sd: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(domain("sample_standardized: n must be at least 1"));
    }
    if !(target_sd > 0.0 && target_sd.is_finite()) || !target_mean.is_finite() {
        return Err(domain(format!(
            "sample_standardized: invalid target ({target_mean}, {target_sd})"
        )));
    }
    let scale = target_sd / density.analytic_var.sqrt();
    Ok((0..n)
        .map(|_| target_mean + scale * (density.sample(rng) - density.analytic_mean))
        .collect())
}
