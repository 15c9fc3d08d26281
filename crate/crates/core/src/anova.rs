//! Linear regression of a phenotype on numeric genotype codes (1, 2, 3) with
//! its one-degree-of-freedom ANOVA table.
//!
//! The slope is the additive effect and `sqrt(MS_model / F)`, which is the
//! residual SD of the linear fit, is its standardizer. The residual includes
//! lack of fit when the three group means are not collinear, so it is in
//! general larger than the pooled within-group SD (also reported here).

use crate::error::{Error, Result};

pub const CODES: [f64; 3] = [1.0, 2.0, 3.0];

/// Sufficient statistics for one genotype group.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GroupStats {
    pub n: u32,
    pub mean: f64,
    /// Sum of squared deviations from the group mean.
    pub ss: f64,
}

impl GroupStats {
    pub fn from_values(values: &[f64]) -> Self {
        let mut acc = GroupAccumulator::default();
        values.iter().for_each(|&v| acc.push(v));
        acc.finish()
    }
}

/// Welford accumulator, used while streaming draws.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroupAccumulator {
    n: u32,
    mean: f64,
    m2: f64,
}

impl GroupAccumulator {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / f64::from(self.n);
        self.m2 += delta * (x - self.mean);
    }

    pub fn finish(self) -> GroupStats {
        GroupStats {
            n: self.n,
            mean: self.mean,
            ss: self.m2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearAnova {
    pub n_total: u32,
    pub intercept: f64,
    pub slope: f64,
    pub ss_model: f64,
    pub ss_resid: f64,
    /// Pooled within-group sum of squares (three-level factor model).
    pub ss_within: f64,
}

impl LinearAnova {
    /// Closed form from the three groups' sufficient statistics.
    pub fn from_groups(groups: &[GroupStats; 3]) -> Result<Self> {
        let n_total: u32 = groups.iter().map(|g| g.n).sum();
        if n_total < 4 || groups.iter().filter(|g| g.n > 0).count() < 2 {
            return Err(Error::DegenerateSample(format!(
                "need at least two non-empty groups and 4 observations, got n = {:?}",
                groups.map(|g| g.n)
            )));
        }
        let nt = f64::from(n_total);
        let w = groups.map(|g| f64::from(g.n));
        let x_bar = (0..3).map(|k| w[k] * CODES[k]).sum::<f64>() / nt;
        let y_bar = (0..3).map(|k| w[k] * groups[k].mean).sum::<f64>() / nt;
        let sxx: f64 = (0..3).map(|k| w[k] * (CODES[k] - x_bar).powi(2)).sum();
        let sxy: f64 = (0..3)
            .map(|k| w[k] * (CODES[k] - x_bar) * (groups[k].mean - y_bar))
            .sum();
        let slope = sxy / sxx;
        let intercept = y_bar - slope * x_bar;
        let ss_within: f64 = groups.iter().map(|g| g.ss).sum();
        let lack_of_fit: f64 = (0..3)
            .map(|k| w[k] * (groups[k].mean - intercept - slope * CODES[k]).powi(2))
            .sum();
        Ok(Self {
            n_total,
            intercept,
            slope,
            ss_model: slope * slope * sxx,
            ss_resid: ss_within + lack_of_fit,
            ss_within,
        })
    }

    /// Literal individual-level OLS of `y` on `codes`.
    pub fn fit(y: &[f64], codes: &[f64]) -> Result<Self> {
        if y.len() != codes.len() {
            return Err(Error::Domain(format!(
                "response and code vectors differ in length ({} vs {})",
                y.len(),
                codes.len()
            )));
        }
        if y.len() < 4 {
            return Err(Error::DegenerateSample(format!("{} observations", y.len())));
        }
        let n = y.len() as f64;
        let x_bar = codes.iter().sum::<f64>() / n;
        let y_bar = y.iter().sum::<f64>() / n;
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for (&x, &v) in codes.iter().zip(y) {
            sxx += (x - x_bar) * (x - x_bar);
            sxy += (x - x_bar) * (v - y_bar);
        }
        if sxx == 0.0 {
            return Err(Error::DegenerateSample(
                "all genotype codes identical".into(),
            ));
        }
        let slope = sxy / sxx;
        let intercept = y_bar - slope * x_bar;
        let ss_resid: f64 = codes
            .iter()
            .zip(y)
            .map(|(&x, &v)| (v - intercept - slope * x).powi(2))
            .sum();
        let ss_model: f64 = codes.iter().map(|&x| (slope * (x - x_bar)).powi(2)).sum();

        let mut accs = [GroupAccumulator::default(); 3];
        for (&x, &v) in codes.iter().zip(y) {
            let k = CODES
                .iter()
                .position(|&c| c == x)
                .ok_or_else(|| Error::Domain(format!("genotype code {x} is not one of 1, 2, 3")))?;
            accs[k].push(v);
        }
        let ss_within = accs.iter().map(|a| a.finish().ss).sum();
        Ok(Self {
            n_total: y.len() as u32,
            intercept,
            slope,
            ss_model,
            ss_resid,
            ss_within,
        })
    }

    pub fn df_resid(&self) -> f64 {
        f64::from(self.n_total) - 2.0
    }

    pub fn ms_model(&self) -> f64 {
        self.ss_model
    }

    pub fn ms_resid(&self) -> f64 {
        self.ss_resid / self.df_resid()
    }

    pub fn f_stat(&self) -> f64 {
        self.ms_model() / self.ms_resid()
    }

    /// `sqrt(MS_model / F)` exactly as an ANOVA table would give it. Undefined
    /// (NaN) when the slope is exactly zero; see [`Self::residual_sd`].
    pub fn anova_sd(&self) -> f64 {
        (self.ms_model() / self.f_stat()).sqrt()
    }

    /// Residual standard deviation of the linear fit; equal to
    /// [`Self::anova_sd`] whenever the latter is defined.
    pub fn residual_sd(&self) -> f64 {
        self.ms_resid().sqrt()
    }

    /// Pooled within-group SD of the three-level factor model (N - 3 df).
    pub fn within_sd(&self) -> f64 {
        (self.ss_within / (f64::from(self.n_total) - 3.0)).sqrt()
    }
}
