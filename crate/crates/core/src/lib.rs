//! Meta-analysis of genetic association studies under the additive genetic
//! model, working from reported per-genotype summary statistics.
//!
//! * [`effect_model`]: study summaries, pairwise Cohen's d / Hedges' g and the
//!   crude (summary-only) additive estimator.
//! * [`sim_estimator`]: the simulation-based additive estimator.
//! * [`meta_re`]: DerSimonian–Laird random-effects pooling.
//! * [`mc_harness`]: Monte Carlo bias study comparing the two estimators.
//! * [`binary_recon`]: combined odds ratio from two reported pairwise odds
//!   ratios for binary phenotypes.
//! * [`io`]: CSV/JSON file formats.

pub mod anova;
pub mod binary_recon;
pub mod effect_model;
pub mod error;
pub mod io;
pub mod logistic;
pub mod mc_harness;
pub mod meta_re;
pub mod mixture;
pub mod parallel;
pub mod rng;
pub mod sim_estimator;
pub mod stats;

pub use binary_recon::{
    combined_or, recover_tables, select_pairing, CombinedOr, MergedTable, OrLabel, OrRecord,
};
pub use effect_model::{
    crude_effect, crude_effect_with, AdditiveEffect, CrudeScale, Method, PairEffect, StudySummary,
};
pub use error::{Error, Result};
pub use mc_harness::{run_scenario, BiasReport, Scenario, SummarySource, Truncation};
pub use meta_re::{pool_random_effects, MetaResult};
pub use mixture::{DensityId, MixtureDensity};
pub use sim_estimator::{sim_effect, SimConfig};
