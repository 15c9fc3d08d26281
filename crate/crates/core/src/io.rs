//! CSV and JSON file formats.
//!
//! | file                | columns |
//! |---------------------|---------|
//! | study summaries     | `study_id,m1,m2,m3,sd1,sd2,sd3,n1,n2,n3` |
//! | additive effects    | `study_id,method,beta,sd_beta,d,g,v_g,seed,iterations` |
//! | pooled result       | `k,g_wm,v_wm,tau2,ci_lo,ci_hi` |
//! | bias report         | `density,L,sigma_ws,m1,m2,m3,n1,n2,n3,bias_*,mc_se_*,...` |
//! | odds-ratio records  | `study_id,label,or,ci_lo,ci_hi,m_top,m_bottom` |
//! | combined odds ratio | `study_id,or_combined,ci_lo,ci_hi,pairing,ab_distance` |

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::binary_recon::{CombinedOr, MergedTable, OrLabel, OrRecord};
use crate::effect_model::{AdditiveEffect, StudySummary};
use crate::error::{Error, Result};
use crate::mc_harness::BiasReport;
use crate::meta_re::MetaResult;

pub const DEFAULT_PRECISION: usize = 6;

/// Format `x` with `digits` significant digits in positional notation.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let digits = digits.max(1) as i32;
    // Round first so the magnitude reflects carries like 9.9999995 -> 10.0000.
    let rounded: f64 = format!("{:.*e}", (digits - 1) as usize, x)
        .parse()
        .unwrap_or(x);
    let magnitude = rounded.abs().log10().floor() as i32;
    let decimals = (digits - 1 - magnitude).max(0) as usize;
    format!("{rounded:.decimals$}")
}

/// Flat CSV/JSON shape of a [`StudySummary`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub study_id: String,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub sd1: f64,
    pub sd2: f64,
    pub sd3: f64,
    pub n1: u32,
    pub n2: u32,
    pub n3: u32,
}

impl SummaryRow {
    pub fn into_summary(self) -> Result<StudySummary> {
        StudySummary::new(
            self.study_id,
            [self.m1, self.m2, self.m3],
            [self.sd1, self.sd2, self.sd3],
            [self.n1, self.n2, self.n3],
        )
    }
}

impl From<&StudySummary> for SummaryRow {
    fn from(s: &StudySummary) -> Self {
        Self {
            study_id: s.study_id.clone(),
            m1: s.means[0],
            m2: s.means[1],
            m3: s.means[2],
            sd1: s.sds[0],
            sd2: s.sds[1],
            sd3: s.sds[2],
            n1: s.n[0],
            n2: s.n[1],
            n3: s.n[2],
        }
    }
}

fn row_error(row: usize, e: impl std::fmt::Display) -> Error {
    Error::Row {
        row,
        message: e.to_string(),
    }
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input)
}

/// Read and validate study summaries. Row numbers in errors count the header
/// as row 1.
pub fn read_summaries<R: Read>(input: R) -> Result<Vec<StudySummary>> {
    let mut rdr = csv_reader(input);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<SummaryRow>().enumerate() {
        let row = i + 2;
        let parsed = rec.map_err(|e| row_error(row, e))?;
        out.push(parsed.into_summary().map_err(|e| row_error(row, e))?);
    }
    Ok(out)
}

pub fn read_summaries_json(text: &str) -> Result<Vec<StudySummary>> {
    let rows: Vec<SummaryRow> = serde_json::from_str(text)?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| r.into_summary().map_err(|e| row_error(i + 1, e)))
        .collect()
}

pub fn write_summaries<W: Write>(out: W, summaries: &[StudySummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in summaries {
        w.serialize(SummaryRow::from(s))?;
    }
    w.flush()?;
    Ok(())
}

/// Provenance of a simulation estimate, written alongside each effect row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimProvenance {
    pub seed: u64,
    pub iterations: u32,
}

pub fn write_effects<W: Write>(
    out: W,
    effects: &[AdditiveEffect],
    provenance: Option<SimProvenance>,
    precision: usize,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "study_id",
        "method",
        "beta",
        "sd_beta",
        "d",
        "g",
        "v_g",
        "seed",
        "iterations",
    ])?;
    let f = |x: f64| fmt_sig(x, precision);
    for e in effects {
        let (seed, iters) = provenance
            .map(|p| (p.seed.to_string(), p.iterations.to_string()))
            .unwrap_or_default();
        w.write_record([
            e.study_id.clone(),
            e.method.as_str().to_string(),
            f(e.beta),
            f(e.sd_beta),
            f(e.d),
            f(e.g),
            f(e.v_g),
            seed,
            iters,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The columns of an effects file needed for pooling.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct EffectRow {
    pub study_id: String,
    #[serde(default)]
    pub method: String,
    pub g: f64,
    pub v_g: f64,
}

pub fn read_effects<R: Read>(input: R) -> Result<Vec<EffectRow>> {
    let mut rdr = csv_reader(input);
    rdr.deserialize::<EffectRow>()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| row_error(i + 2, e)))
        .collect()
}

pub fn write_meta<W: Write>(out: W, result: &MetaResult, precision: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let f = |x: f64| fmt_sig(x, precision);
    w.write_record(["k", "g_wm", "v_wm", "tau2", "ci_lo", "ci_hi"])?;
    w.write_record([
        result.k.to_string(),
        f(result.g_wm),
        f(result.v_wm),
        f(result.tau2),
        f(result.ci_lo),
        f(result.ci_hi),
    ])?;
    w.flush()?;
    Ok(())
}

pub const BIAS_HEADER: [&str; 18] = [
    "density",
    "L",
    "sigma_ws",
    "m1",
    "m2",
    "m3",
    "n1",
    "n2",
    "n3",
    "bias_g_crude",
    "bias_gwm_crude",
    "bias_g_sim",
    "bias_gwm_sim",
    "mc_se_g_crude",
    "mc_se_gwm_crude",
    "mc_se_g_sim",
    "mc_se_gwm_sim",
    "retries",
];

pub fn write_bias_reports<W: Write>(
    out: W,
    reports: &[BiasReport],
    precision: usize,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BIAS_HEADER)?;
    let f = |x: f64| fmt_sig(x, precision);
    for r in reports {
        let s = &r.scenario;
        w.write_record([
            s.density.as_str().to_string(),
            s.studies.to_string(),
            f(s.sigma_ws),
            f(s.mean_vec[0]),
            f(s.mean_vec[1]),
            f(s.mean_vec[2]),
            s.n_triplet[0].to_string(),
            s.n_triplet[1].to_string(),
            s.n_triplet[2].to_string(),
            f(r.bias_g_crude),
            f(r.bias_gwm_crude),
            f(r.bias_g_sim),
            f(r.bias_gwm_sim),
            f(r.mc_se.g_crude),
            f(r.mc_se.gwm_crude),
            f(r.mc_se.g_sim),
            f(r.mc_se.gwm_sim),
            r.retries.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct OrRow {
    study_id: String,
    label: String,
    or: f64,
    ci_lo: f64,
    ci_hi: f64,
    m_top: u32,
    m_bottom: u32,
}

/// One study's pair of reported odds ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct OrStudy {
    pub study_id: String,
    pub ab_aa: OrRecord,
    pub bb_ab: OrRecord,
}

/// Read odds-ratio records and group them by study, in order of first
/// appearance. Each study needs exactly one row per label.
pub fn read_or_records<R: Read>(input: R) -> Result<Vec<OrStudy>> {
    let mut rdr = csv_reader(input);
    let mut order: Vec<String> = Vec::new();
    let mut slots: std::collections::HashMap<String, (Option<OrRecord>, Option<OrRecord>, usize)> =
        std::collections::HashMap::new();
    for (i, rec) in rdr.deserialize::<OrRow>().enumerate() {
        let row = i + 2;
        let r = rec.map_err(|e| row_error(row, e))?;
        let label: OrLabel = r.label.parse().map_err(|e| row_error(row, e))?;
        let record = OrRecord {
            label,
            or_value: r.or,
            ci_lo: r.ci_lo,
            ci_hi: r.ci_hi,
            m_top: r.m_top,
            m_bottom: r.m_bottom,
        };
        record.validate().map_err(|e| row_error(row, e))?;
        let entry = slots.entry(r.study_id.clone()).or_insert_with(|| {
            order.push(r.study_id.clone());
            (None, None, row)
        });
        let slot = match label {
            OrLabel::AbVsAa => &mut entry.0,
            OrLabel::BbVsAb => &mut entry.1,
        };
        if slot.is_some() {
            return Err(row_error(
                row,
                format!("duplicate {label} record for study '{}'", r.study_id),
            ));
        }
        *slot = Some(record);
    }
    order
        .into_iter()
        .map(|id| {
            let (lo, hi, row) = slots.remove(&id).expect("recorded");
            match (lo, hi) {
                (Some(ab_aa), Some(bb_ab)) => Ok(OrStudy {
                    study_id: id,
                    ab_aa,
                    bb_ab,
                }),
                _ => Err(row_error(
                    row,
                    format!("study '{id}' needs one AB_vs_AA and one BB_vs_AB row"),
                )),
            }
        })
        .collect()
}

pub fn write_combined_or<W: Write>(
    out: W,
    rows: &[(String, MergedTable, CombinedOr)],
    precision: usize,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let f = |x: f64| fmt_sig(x, precision);
    w.write_record([
        "study_id",
        "or_combined",
        "ci_lo",
        "ci_hi",
        "pairing",
        "ab_distance",
    ])?;
    for (id, merged, or) in rows {
        let (pairing, dist) = merged
            .provenance
            .as_ref()
            .map(|p| (p.label(), f(p.ab_distance)))
            .unwrap_or_default();
        w.write_record([
            id.clone(),
            f(or.or_value),
            f(or.ci_lo),
            f(or.ci_hi),
            pairing,
            dist,
        ])?;
    }
    w.flush()?;
    Ok(())
}
