//! Monte Carlo bias study comparing the crude and simulation estimators.
//!
//! One replicate of a scenario:
//!
//! 1. perturb the scenario's mean vector and within-study SD into `L`
//!    per-study parameter sets;
//! 2. draw "original" individual data for each study from the scenario's
//!    mixture density, standardized to those parameters;
//! 3. compute each study's true `g` from its individual data, and the true
//!    random-effects `g`-WM;
//! 4. run both estimators on the study summaries and record the mean absolute
//!    error of `g` across studies and the absolute error of `g`-WM.
//!
//! Replicate `r` only ever draws from substreams keyed by `(seed, r, ...)`, so
//! a scenario's report is identical at any worker count.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anova::{GroupStats, LinearAnova};
use crate::effect_model::{crude_effect_with, AdditiveEffect, CrudeScale, Method, StudySummary};
use crate::error::{Error, Result};
use crate::meta_re::pool_random_effects;
use crate::mixture::{sample_standardized, DensityId, MixtureDensity};
use crate::rng::{derive_key, lane, substream};
use crate::sim_estimator::{sim_effect_in_pool, SimDraw};
use crate::stats::{compensated_sum, mean_and_se};

pub const STUDY_COUNTS: [usize; 3] = [5, 10, 15];
pub const MEAN_VECS: [[f64; 3]; 3] = [[4.0, 5.5, 7.0], [4.0, 5.5, 9.0], [4.0, 5.5, 11.0]];
pub const SIGMA_WS: [f64; 2] = [1.0, 5.0];
pub const N_TRIPLETS: [[u32; 3]; 8] = [
    [10, 15, 5],
    [15, 20, 10],
    [15, 20, 30],
    [15, 45, 30],
    [35, 45, 30],
    [75, 100, 60],
    [150, 200, 120],
    [300, 400, 240],
];
/// SD of the between-study perturbation of means and SDs.
pub const PERTURBATION_SD: f64 = 2.0;
pub const DESK_REPS: u32 = 100;
pub const DESK_INNER_ITERATIONS: u32 = 2000;
const MAX_RETRIES: u32 = 16;

/// Approximate true `g` for a mean vector / within-study SD combination.
pub fn approximate_true_g(mean_vec: [f64; 3], sigma_ws: f64) -> Option<f64> {
    let row = MEAN_VECS.iter().position(|m| *m == mean_vec)?;
    match sigma_ws {
        1.0 => Some([0.82, 1.28, 1.64][row]),
        5.0 => Some([0.30, 0.48, 0.65][row]),
        _ => None,
    }
}

/// Replacement rule for perturbed means that come out negative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truncation {
    /// Every group falls back to the first (AA) anchor.
    #[default]
    FirstAnchor,
    /// Each group falls back to its own anchor.
    PerGroup,
}

/// What the estimators get to see for each generated study.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SummarySource {
    /// The per-study generating means/SDs (the "reported" values).
    #[default]
    Generating,
    /// Sample means/SDs of the generated original data.
    Sample,
}

fn default_reps() -> u32 {
    DESK_REPS
}
fn default_inner() -> u32 {
    DESK_INNER_ITERATIONS
}
fn default_perturbation() -> f64 {
    PERTURBATION_SD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub density: DensityId,
    #[serde(rename = "L")]
    pub studies: usize,
    pub mean_vec: [f64; 3],
    pub sigma_ws: f64,
    pub n_triplet: [u32; 3],
    #[serde(default = "default_reps")]
    pub mc_reps: u32,
    #[serde(default = "default_inner")]
    pub inner_iterations: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default)]
    pub summary_source: SummarySource,
    #[serde(default)]
    pub crude_scale: CrudeScale,
    #[serde(default = "default_perturbation")]
    pub perturbation_sd: f64,
}

impl Scenario {
    /// Desk-scale scenario with default options.
    pub fn new(
        density: DensityId,
        studies: usize,
        mean_vec: [f64; 3],
        sigma_ws: f64,
        n_triplet: [u32; 3],
    ) -> Self {
        Self {
            density,
            studies,
            mean_vec,
            sigma_ws,
            n_triplet,
            mc_reps: DESK_REPS,
            inner_iterations: DESK_INNER_ITERATIONS,
            seed: 0,
            truncation: Truncation::default(),
            summary_source: SummarySource::default(),
            crude_scale: CrudeScale::default(),
            perturbation_sd: PERTURBATION_SD,
        }
    }

    pub fn with_reps(mut self, mc_reps: u32, inner_iterations: u32) -> Self {
        self.mc_reps = mc_reps;
        self.inner_iterations = inner_iterations;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if !STUDY_COUNTS.contains(&self.studies) {
            return bad(format!(
                "L must be one of {STUDY_COUNTS:?}, got {}",
                self.studies
            ));
        }
        if !MEAN_VECS.contains(&self.mean_vec) {
            return bad(format!(
                "mean_vec must be one of {MEAN_VECS:?}, got {:?}",
                self.mean_vec
            ));
        }
        if !SIGMA_WS.contains(&self.sigma_ws) {
            return bad(format!(
                "sigma_ws must be one of {SIGMA_WS:?}, got {}",
                self.sigma_ws
            ));
        }
        if !N_TRIPLETS.contains(&self.n_triplet) {
            return bad(format!(
                "n_triplet {:?} is not one of the eight grid triplets",
                self.n_triplet
            ));
        }
        if self.mc_reps == 0 || self.inner_iterations == 0 {
            return bad("mc_reps and inner_iterations must be at least 1".into());
        }
        if !(self.perturbation_sd >= 0.0 && self.perturbation_sd.is_finite()) {
            return bad(format!(
                "perturbation_sd must be >= 0, got {}",
                self.perturbation_sd
            ));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }
}

/// Every combination of density, L, mean vector, SD and sample-size triplet
/// (576 scenarios), each with its own seed derived from `seed`.
pub fn full_grid(mc_reps: u32, inner_iterations: u32, seed: u64) -> Vec<Scenario> {
    let mut out = Vec::with_capacity(576);
    for density in DensityId::ALL {
        for studies in STUDY_COUNTS {
            for sigma_ws in SIGMA_WS {
                for mean_vec in MEAN_VECS {
                    for n_triplet in N_TRIPLETS {
                        let idx = out.len() as u64;
                        out.push(
                            Scenario::new(density, studies, mean_vec, sigma_ws, n_triplet)
                                .with_reps(mc_reps, inner_iterations)
                                .with_seed(derive_key(seed, &[idx])),
                        );
                    }
                }
            }
        }
    }
    out
}

/// Generating parameters of one study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyParams {
    pub means: [f64; 3],
    pub sds: [f64; 3],
}

/// Apply the negative-mean replacement rule to a draw for group `k`.
pub fn truncate_mean(draw: f64, k: usize, mean_vec: &[f64; 3], rule: Truncation) -> f64 {
    if draw >= 0.0 {
        return draw;
    }
    match rule {
        Truncation::FirstAnchor => mean_vec[0],
        Truncation::PerGroup => mean_vec[k],
    }
}

/// Non-positive SD draws fall back to the scenario's within-study SD.
pub fn truncate_sd(draw: f64, sigma_ws: f64) -> f64 {
    if draw > 0.0 {
        draw
    } else {
        sigma_ws
    }
}

/// Per-study parameters: for each group all `L` means are drawn first, then
/// all `L` SDs, group by group.
pub fn perturb_study_params<R: Rng + ?Sized>(
    mean_vec: [f64; 3],
    sigma_ws: f64,
    studies: usize,
    perturbation_sd: f64,
    truncation: Truncation,
    rng: &mut R,
) -> Vec<StudyParams> {
    let mut params = vec![
        StudyParams {
            means: [0.0; 3],
            sds: [0.0; 3],
        };
        studies
    ];
    for k in 0..3 {
        for p in params.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            p.means[k] = truncate_mean(mean_vec[k] + perturbation_sd * z, k, &mean_vec, truncation);
        }
    }
    for k in 0..3 {
        for p in params.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            p.sds[k] = truncate_sd(sigma_ws + perturbation_sd * z, sigma_ws);
        }
    }
    params
}

/// One generated study as seen by an estimator.
#[derive(Debug, Clone)]
pub struct GeneratedStudy {
    pub index: usize,
    pub params: StudyParams,
    /// Original individual data per genotype group.
    pub data: [Vec<f64>; 3],
    /// Summary handed to the estimators (see [`SummarySource`]).
    pub summary: StudySummary,
    /// Effect computed from the individual data.
    pub truth: AdditiveEffect,
}

pub trait StudyEstimator: Sync {
    fn estimate(&self, study: &GeneratedStudy, seed: u64) -> Result<AdditiveEffect>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CrudeEstimator(pub CrudeScale);

impl StudyEstimator for CrudeEstimator {
    fn estimate(&self, study: &GeneratedStudy, _seed: u64) -> Result<AdditiveEffect> {
        crude_effect_with(&study.summary, self.0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimulationEstimator {
    pub iterations: u32,
}

impl StudyEstimator for SimulationEstimator {
    fn estimate(&self, study: &GeneratedStudy, seed: u64) -> Result<AdditiveEffect> {
        sim_effect_in_pool(&study.summary, self.iterations, seed)
    }
}

/// Effect computed directly from individual-level data, with the same
/// pairwise J/variance machinery the estimators use.
pub fn individual_effect(study_id: &str, data: &[Vec<f64>; 3]) -> Result<AdditiveEffect> {
    let groups = [
        GroupStats::from_values(&data[0]),
        GroupStats::from_values(&data[1]),
        GroupStats::from_values(&data[2]),
    ];
    let fit = LinearAnova::from_groups(&groups)?;
    let draw = SimDraw::from_fit(&fit)?;
    let summary = StudySummary {
        study_id: study_id.to_string(),
        means: groups.map(|g| g.mean),
        sds: groups.map(|g| (g.ss / (f64::from(g.n) - 1.0)).sqrt()),
        n: groups.map(|g| g.n),
    };
    AdditiveEffect::from_d(&summary, draw.beta, draw.sd, draw.d, Method::Individual)
}

/// Mean absolute difference in `g` across studies. Terms are summed in sorted
/// order so the value does not depend on study order.
pub fn mean_abs_g_bias(truth: &[AdditiveEffect], est: &[AdditiveEffect]) -> f64 {
    let mut diffs: Vec<f64> = truth
        .iter()
        .zip(est)
        .map(|(t, e)| (t.g - e.g).abs())
        .collect();
    diffs.sort_by(f64::total_cmp);
    compensated_sum(&diffs) / diffs.len() as f64
}

fn pooled_g(effects: &[AdditiveEffect]) -> Result<f64> {
    let pairs: Vec<(f64, f64)> = effects.iter().map(|e| (e.g, e.v_g)).collect();
    Ok(pool_random_effects(&pairs)?.g_wm)
}

/// Per-replicate bias values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub bias_g_crude: f64,
    pub bias_gwm_crude: f64,
    pub bias_g_sim: f64,
    pub bias_gwm_sim: f64,
    pub retries: u32,
}

impl ReplicateOutcome {
    pub fn from_effects(
        truth: &[AdditiveEffect],
        crude: &[AdditiveEffect],
        sim: &[AdditiveEffect],
    ) -> Result<Self> {
        let gwm_true = pooled_g(truth)?;
        Ok(Self {
            bias_g_crude: mean_abs_g_bias(truth, crude),
            bias_gwm_crude: (gwm_true - pooled_g(crude)?).abs(),
            bias_g_sim: mean_abs_g_bias(truth, sim),
            bias_gwm_sim: (gwm_true - pooled_g(sim)?).abs(),
            retries: 0,
        })
    }
}

/// Generate the studies of replicate `rep` (attempt `attempt`).
pub fn generate_studies(
    scenario: &Scenario,
    rep: u64,
    attempt: u64,
) -> Result<Vec<GeneratedStudy>> {
    let density = MixtureDensity::new(scenario.density);
    let mut prng = substream(scenario.seed, &[rep, lane::STUDY_PARAMS, attempt]);
    let params = perturb_study_params(
        scenario.mean_vec,
        scenario.sigma_ws,
        scenario.studies,
        scenario.perturbation_sd,
        scenario.truncation,
        &mut prng,
    );
    params
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut drng = substream(
                scenario.seed,
                &[rep, lane::ORIGINAL_DATA, attempt, i as u64],
            );
            let mut group = |k: usize| {
                sample_standardized(
                    &density,
                    scenario.n_triplet[k] as usize,
                    p.means[k],
                    p.sds[k],
                    &mut drng,
                )
            };
            let data = [group(0)?, group(1)?, group(2)?];
            let id = format!("study{}", i + 1);
            let truth = individual_effect(&id, &data)?;
            let summary = match scenario.summary_source {
                SummarySource::Generating => {
                    StudySummary::new(id, p.means, p.sds, scenario.n_triplet)?
                }
                SummarySource::Sample => {
                    let mut s = StudySummary {
                        study_id: id,
                        means: [0.0; 3],
                        sds: [0.0; 3],
                        n: scenario.n_triplet,
                    };
                    for (k, values) in data.iter().enumerate() {
                        let gs = GroupStats::from_values(values);
                        s.means[k] = gs.mean;
                        s.sds[k] = (gs.ss / (f64::from(gs.n) - 1.0)).sqrt();
                    }
                    s.validate()?;
                    s
                }
            };
            Ok(GeneratedStudy {
                index: i,
                params: p,
                data,
                summary,
                truth,
            })
        })
        .collect()
}

fn replicate_attempt(
    scenario: &Scenario,
    rep: u64,
    attempt: u64,
    crude: &dyn StudyEstimator,
    sim: &dyn StudyEstimator,
) -> Result<ReplicateOutcome> {
    let studies = generate_studies(scenario, rep, attempt)?;
    let truth: Vec<AdditiveEffect> = studies.iter().map(|s| s.truth.clone()).collect();
    let mut crude_fx = Vec::with_capacity(studies.len());
    let mut sim_fx = Vec::with_capacity(studies.len());
    for s in &studies {
        let key = derive_key(
            scenario.seed,
            &[rep, lane::SIM_ESTIMATOR, attempt, s.index as u64],
        );
        crude_fx.push(crude.estimate(s, key)?);
        sim_fx.push(sim.estimate(s, key)?);
    }
    ReplicateOutcome::from_effects(&truth, &crude_fx, &sim_fx)
}

/// Run replicate `rep`, retrying on fresh substreams after degenerate samples.
pub fn run_replicate(
    scenario: &Scenario,
    rep: u64,
    crude: &dyn StudyEstimator,
    sim: &dyn StudyEstimator,
) -> Result<ReplicateOutcome> {
    let mut attempt = 0u32;
    loop {
        match replicate_attempt(scenario, rep, u64::from(attempt), crude, sim) {
            Ok(mut out) => {
                out.retries = attempt;
                return Ok(out);
            }
            Err(Error::DegenerateSample(_)) if attempt < MAX_RETRIES => attempt += 1,
            Err(e) => return Err(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McStandardErrors {
    pub g_crude: f64,
    pub gwm_crude: f64,
    pub g_sim: f64,
    pub gwm_sim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub scenario: Scenario,
    pub bias_g_crude: f64,
    pub bias_gwm_crude: f64,
    pub bias_g_sim: f64,
    pub bias_gwm_sim: f64,
    pub mc_se: McStandardErrors,
    pub retries: u32,
}

impl BiasReport {
    pub fn from_replicates(scenario: &Scenario, reps: &[ReplicateOutcome]) -> Self {
        let col =
            |f: fn(&ReplicateOutcome) -> f64| mean_and_se(&reps.iter().map(f).collect::<Vec<_>>());
        let (g_c, se_g_c) = col(|r| r.bias_g_crude);
        let (w_c, se_w_c) = col(|r| r.bias_gwm_crude);
        let (g_s, se_g_s) = col(|r| r.bias_g_sim);
        let (w_s, se_w_s) = col(|r| r.bias_gwm_sim);
        Self {
            scenario: scenario.clone(),
            bias_g_crude: g_c,
            bias_gwm_crude: w_c,
            bias_g_sim: g_s,
            bias_gwm_sim: w_s,
            mc_se: McStandardErrors {
                g_crude: se_g_c,
                gwm_crude: se_w_c,
                g_sim: se_g_s,
                gwm_sim: se_w_s,
            },
            retries: reps.iter().map(|r| r.retries).sum(),
        }
    }
}

pub fn run_scenario(scenario: &Scenario) -> Result<BiasReport> {
    let crude = CrudeEstimator(scenario.crude_scale);
    let sim = SimulationEstimator {
        iterations: scenario.inner_iterations,
    };
    run_scenario_with(scenario, &crude, &sim)
}

/// Run with caller-supplied estimators; replicates run on the ambient rayon
/// pool and are aggregated in replicate order.
pub fn run_scenario_with(
    scenario: &Scenario,
    crude: &dyn StudyEstimator,
    sim: &dyn StudyEstimator,
) -> Result<BiasReport> {
    scenario.validate()?;
    let reps: Vec<ReplicateOutcome> = (0..u64::from(scenario.mc_reps))
        .into_par_iter()
        .map(|r| run_replicate(scenario, r, crude, sim))
        .collect::<Result<_>>()?;
    Ok(BiasReport::from_replicates(scenario, &reps))
}

pub const DICHOTOMIZED_MEANS: [f64; 3] = [4.0, 5.5, 7.0];
pub const DICHOTOMIZED_SD: f64 = 5.0;
pub const DICHOTOMIZED_GROUP_SIZE: usize = 30;
pub const DICHOTOMIZED_CUTOFF: f64 = 6.0;

/// Dichotomized three-group data used to exercise the binary pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryFixture {
    pub data: [Vec<f64>; 3],
    /// `(present, absent)` per group, AA, AB, BB.
    pub counts: [[u32; 2]; 3],
}

pub fn dichotomized_fixture<R: Rng + ?Sized>(rng: &mut R) -> BinaryFixture {
    dichotomized_fixture_with_cutoff(rng, DICHOTOMIZED_CUTOFF)
}

/// Phenotype is present for values strictly above `cutoff`.
pub fn dichotomized_fixture_with_cutoff<R: Rng + ?Sized>(rng: &mut R, cutoff: f64) -> BinaryFixture {
    let data: [Vec<f64>; 3] = std::array::from_fn(|k| {
        (0..DICHOTOMIZED_GROUP_SIZE)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                DICHOTOMIZED_MEANS[k] + DICHOTOMIZED_SD * z
            })
            .collect()
    });
    let counts = std::array::from_fn(|k| {
        let present = data[k].iter().filter(|&&v| v > cutoff).count() as u32;
        [present, data[k].len() as u32 - present]
    });
    BinaryFixture { data, counts }
}
