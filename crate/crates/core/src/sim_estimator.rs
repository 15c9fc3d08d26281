//! Simulation-based additive estimator.
//!
//! Each iteration regenerates individual-level normal data from a study's
//! reported means, SDs and group sizes, regresses it on genotype codes and
//! records `d = slope / sqrt(MS_model / F)`. The estimate is the mean `d` over
//! iterations, which then goes through the same pairwise J/variance machinery
//! as the crude estimator.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anova::{GroupAccumulator, LinearAnova, CODES};
use crate::effect_model::{AdditiveEffect, Method, StudySummary};
use crate::error::{Error, Result};
use crate::parallel::with_workers;
use crate::rng::substream;
use crate::stats::mean;

pub const DEFAULT_ITERATIONS: u32 = 10_000;
pub const DEFAULT_SEED: u64 = 20_160_601;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub iterations: u32,
    pub seed: u64,
    /// Parallelism hint; results do not depend on it.
    pub workers: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            seed: DEFAULT_SEED,
            workers: 1,
        }
    }
}

impl SimConfig {
    pub fn new(iterations: u32, seed: u64) -> Self {
        Self {
            iterations,
            seed,
            ..Self::default()
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Domain("iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// One synthetic replicate of a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimDraw {
    pub beta: f64,
    pub sd: f64,
    pub d: f64,
}

impl SimDraw {
    pub fn from_fit(fit: &LinearAnova) -> Result<Self> {
        let sd = fit.residual_sd();
        if sd.is_nan() || sd <= 0.0 {
            return Err(Error::DegenerateSample(format!(
                "zero residual variance (slope {})",
                fit.slope
            )));
        }
        Ok(Self {
            beta: fit.slope,
            sd,
            d: fit.slope / sd,
        })
    }
}

fn check_drawable(summary: &StudySummary) -> Result<()> {
    summary.validate()?;
    if summary.total_n() < 4 {
        return Err(Error::InvalidSummary {
            study: summary.study_id.clone(),
            reason: "need at least 4 subjects in total".into(),
        });
    }
    Ok(())
}

/// Draw one synthetic data set and reduce it to `(beta, sd, d)`.
///
/// Groups are drawn in AA, AB, BB order; values are streamed into sufficient
/// statistics rather than materialized.
pub fn simulate_study_once<R: Rng + ?Sized>(
    summary: &StudySummary,
    rng: &mut R,
) -> Result<SimDraw> {
    check_drawable(summary)?;
    let mut groups = [GroupAccumulator::default(); 3];
    for (k, acc) in groups.iter_mut().enumerate() {
        let (m, s) = (summary.means[k], summary.sds[k]);
        for _ in 0..summary.n[k] {
            let z: f64 = rng.sample(StandardNormal);
            acc.push(m + s * z);
        }
    }
    let fit = LinearAnova::from_groups(&groups.map(|g| g.finish()))?;
    SimDraw::from_fit(&fit)
}

/// The individual-level data [`simulate_study_once`] would reduce, in the
/// same draw order, as `(phenotype, genotype code)` vectors.
pub fn simulate_study_data<R: Rng + ?Sized>(
    summary: &StudySummary,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_drawable(summary)?;
    let total = summary.total_n() as usize;
    let mut y = Vec::with_capacity(total);
    let mut codes = Vec::with_capacity(total);
    for (k, &code) in CODES.iter().enumerate() {
        let (m, s) = (summary.means[k], summary.sds[k]);
        for _ in 0..summary.n[k] {
            let z: f64 = rng.sample(StandardNormal);
            y.push(m + s * z);
            codes.push(code);
        }
    }
    Ok((y, codes))
}

/// All iteration draws, ordered by iteration index. Iteration `i` uses the
/// substream `(seed, i)`, so the result does not depend on scheduling.
pub fn sim_draws(summary: &StudySummary, config: &SimConfig) -> Result<Vec<SimDraw>> {
    config.validate()?;
    check_drawable(summary)?;
    with_workers(config.workers, || {
        draws_in_pool(summary, config.iterations, config.seed)
    })
}

pub(crate) fn draws_in_pool(
    summary: &StudySummary,
    iterations: u32,
    seed: u64,
) -> Result<Vec<SimDraw>> {
    (0..iterations)
        .into_par_iter()
        .map(|i| simulate_study_once(summary, &mut substream(seed, &[u64::from(i)])))
        .collect()
}

pub fn sim_effect(summary: &StudySummary, config: &SimConfig) -> Result<AdditiveEffect> {
    let draws = sim_draws(summary, config)?;
    effect_from_draws(summary, &draws)
}

/// Same as [`sim_effect`] but runs on the caller's rayon pool.
pub(crate) fn sim_effect_in_pool(
    summary: &StudySummary,
    iterations: u32,
    seed: u64,
) -> Result<AdditiveEffect> {
    check_drawable(summary)?;
    let draws = draws_in_pool(summary, iterations, seed)?;
    effect_from_draws(summary, &draws)
}

pub fn effect_from_draws(summary: &StudySummary, draws: &[SimDraw]) -> Result<AdditiveEffect> {
    if draws.is_empty() {
        return Err(Error::Domain("no simulation draws".into()));
    }
    let col = |f: fn(&SimDraw) -> f64| draws.iter().map(f).collect::<Vec<_>>();
    let beta = mean(&col(|x| x.beta));
    let sd = mean(&col(|x| x.sd));
    let d = mean(&col(|x| x.d));
    AdditiveEffect::from_d(summary, beta, sd, d, Method::Simulation)
}
