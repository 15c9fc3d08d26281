//! Combined additive-model odds ratio from two reported pairwise odds ratios.
//!
//! Each reported OR (AB vs AA, BB vs AB) with its 95% CI and row margins is
//! turned back into candidate 2x2 tables by solving the quadratic for the
//! top-left cell. Candidates from the two records are paired by how closely
//! their shared AB rows agree, merged into a 3x2 genotype-by-phenotype table,
//! and a logistic regression on genotype codes gives the combined OR.
//!
//! A 2x2 table is laid out as
//!
//! ```text
//!              present  absent   total
//!   top row       a        b      m_top
//!   bottom row    c        d      m_bottom
//! ```
//!
//! with the higher-risk genotype on top.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::logistic::fit_logistic;
use crate::stats::Z_95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrLabel {
    /// AB on top, AA on the bottom.
    #[serde(rename = "AB_vs_AA")]
    AbVsAa,
    /// BB on top, AB on the bottom.
    #[serde(rename = "BB_vs_AB")]
    BbVsAb,
}

impl OrLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            OrLabel::AbVsAa => "AB_vs_AA",
            OrLabel::BbVsAb => "BB_vs_AB",
        }
    }
}

impl fmt::Display for OrLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OrLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "AB_vs_AA" => Ok(OrLabel::AbVsAa),
            "BB_vs_AB" => Ok(OrLabel::BbVsAb),
            other => Err(domain(format!(
                "unknown OR label '{other}' (expected AB_vs_AA or BB_vs_AB)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrRecord {
    pub label: OrLabel,
    pub or_value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub m_top: u32,
    pub m_bottom: u32,
}

impl OrRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.ci_lo > 0.0 && self.ci_lo < self.ci_hi && self.ci_hi.is_finite()) {
            return Err(domain(format!(
                "{}: CI must satisfy 0 < lo < hi, got ({}, {})",
                self.label, self.ci_lo, self.ci_hi
            )));
        }
        if !(self.or_value >= self.ci_lo && self.or_value <= self.ci_hi) {
            return Err(domain(format!(
                "{}: OR {} lies outside its CI ({}, {})",
                self.label, self.or_value, self.ci_lo, self.ci_hi
            )));
        }
        if self.m_top < 1 || self.m_bottom < 1 {
            return Err(domain(format!("{}: margins must be positive", self.label)));
        }
        Ok(())
    }
}

/// Standard error of ln(OR) implied by a 95% Wald interval.
pub fn se_from_ci(ci_lo: f64, ci_hi: f64) -> Result<f64> {
    if !(ci_lo > 0.0 && ci_lo < ci_hi && ci_hi.is_finite()) {
        return Err(domain(format!(
            "se_from_ci: need 0 < lo < hi, got ({ci_lo}, {ci_hi})"
        )));
    }
    Ok((ci_hi.ln() - ci_lo.ln()) / (2.0 * Z_95))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RootBranch {
    /// `a = -(λ + √disc) / 2α`
    Plus,
    /// `a = -(λ - √disc) / 2α`
    Minus,
}

impl RootBranch {
    fn index(self) -> usize {
        match self {
            RootBranch::Plus => 0,
            RootBranch::Minus => 1,
        }
    }

    fn letter(self) -> char {
        match self {
            RootBranch::Plus => 'a',
            RootBranch::Minus => 'b',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateTable {
    pub branch: RootBranch,
    /// Unrounded cells `[a, b, c, d]`.
    pub raw: [f64; 4],
    /// Rounded cells `[a, b, c, d]`; row margins are preserved exactly.
    pub cells: [u32; 4],
}

impl CandidateTable {
    pub fn top_row(&self) -> [u32; 2] {
        [self.cells[0], self.cells[1]]
    }

    pub fn bottom_row(&self) -> [u32; 2] {
        [self.cells[2], self.cells[3]]
    }

    pub fn odds_ratio_raw(&self) -> f64 {
        let [a, b, c, d] = self.raw;
        (a * d) / (b * c)
    }
}

fn round_cell(x: f64, margin: u32) -> u32 {
    // f64::round is half-away-from-zero
    x.round().clamp(0.0, f64::from(margin)) as u32
}

fn label_of(record: &OrRecord) -> String {
    format!(
        "{} (OR {}, CI {}-{}, margins {}/{})",
        record.label, record.or_value, record.ci_lo, record.ci_hi, record.m_top, record.m_bottom
    )
}

/// Both candidate tables consistent with the record's OR, CI and margins,
/// minus any that are infeasible (a cell below -0.5 or above its margin + 0.5).
/// Returned in branch order, `Plus` first.
pub fn recover_tables(record: &OrRecord) -> Result<Vec<CandidateTable>> {
    record.validate()?;
    let or = record.or_value;
    let (m1, m2) = (f64::from(record.m_top), f64::from(record.m_bottom));
    let se2 = se_from_ci(record.ci_lo, record.ci_hi)?.powi(2);

    let alpha = (1.0 - or).powi(2) + or * m2 * se2;
    let lambda = or * m1 * (2.0 * (1.0 - or) - m2 * se2);
    let gamma = or * m1 * (or * m1 + m2);
    let mut disc = lambda * lambda - 4.0 * alpha * gamma;
    if disc < 0.0 {
        // Exact double roots can come out a few ulps negative.
        if disc > -1e-9 * lambda * lambda {
            disc = 0.0;
        } else {
            return Err(Error::NegativeDiscriminant {
                record: label_of(record),
                discriminant: disc,
            });
        }
    }
    let root = disc.sqrt();

    let tables: Vec<CandidateTable> = [(RootBranch::Plus, root), (RootBranch::Minus, -root)]
        .into_iter()
        .filter_map(|(branch, r)| {
            let a = -(lambda + r) / (2.0 * alpha);
            let denom = or * m1 + a * (1.0 - or);
            if denom == 0.0 {
                return None;
            }
            let b = m1 - a;
            let c = a * m2 / denom;
            let d = or * m2 * (m1 - a) / denom;
            let feasible = [(a, m1), (b, m1), (c, m2), (d, m2)]
                .iter()
                .all(|&(x, m)| x.is_finite() && x >= -0.5 && x <= m + 0.5);
            if !feasible {
                return None;
            }
            let ai = round_cell(a, record.m_top);
            let ci = round_cell(c, record.m_bottom);
            Some(CandidateTable {
                branch,
                raw: [a, b, c, d],
                cells: [ai, record.m_top - ai, ci, record.m_bottom - ci],
            })
        })
        .collect();
    if tables.is_empty() {
        return Err(Error::NoFeasibleTable(label_of(record)));
    }
    Ok(tables)
}

/// Chosen pairing of an AB-vs-AA candidate with a BB-vs-AB candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    pub ab_aa: RootBranch,
    pub bb_ab: RootBranch,
    pub ab_distance: f64,
    /// Every evaluated `(pairing index, distance)`; index = 2·ab_aa + bb_ab.
    pub distances: Vec<(usize, f64)>,
}

impl Pairing {
    /// e.g. `"a-b"`: first AB-vs-AA candidate with second BB-vs-AB candidate.
    pub fn label(&self) -> String {
        format!("{}-{}", self.ab_aa.letter(), self.bb_ab.letter())
    }
}

/// 3x2 genotype-by-phenotype table; each row is `[present, absent]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedTable {
    pub bb: [u32; 2],
    pub ab: [u32; 2],
    pub aa: [u32; 2],
    pub provenance: Option<Pairing>,
}

impl MergedTable {
    pub fn new(bb: [u32; 2], ab: [u32; 2], aa: [u32; 2]) -> Self {
        Self {
            bb,
            ab,
            aa,
            provenance: None,
        }
    }

    /// Rows in genotype-code order AA, AB, BB.
    pub fn rows_by_code(&self) -> [[u32; 2]; 3] {
        [self.aa, self.ab, self.bb]
    }

    pub fn margins(&self) -> [u32; 3] {
        self.rows_by_code().map(|r| r[0] + r[1])
    }
}

fn row_distance(x: [u32; 2], y: [u32; 2]) -> f64 {
    let dx = f64::from(x[0]) - f64::from(y[0]);
    let dy = f64::from(x[1]) - f64::from(y[1]);
    dx.hypot(dy)
}

/// Pick the candidate pair whose AB rows are closest (ties go to the lowest
/// pairing index) and merge them into a 3x2 table. The merged AB row is the
/// column-wise average of the two AB rows, with the present count rounded
/// half away from zero and the absent count set to preserve the AB margin.
pub fn select_pairing(ab_aa: &[CandidateTable], bb_ab: &[CandidateTable]) -> Result<MergedTable> {
    if ab_aa.is_empty() || bb_ab.is_empty() {
        return Err(domain(
            "select_pairing: each record needs at least one candidate table",
        ));
    }
    let mut distances = Vec::with_capacity(4);
    for lo in ab_aa {
        for hi in bb_ab {
            let idx = 2 * lo.branch.index() + hi.branch.index();
            distances.push((idx, row_distance(lo.top_row(), hi.bottom_row()), lo, hi));
        }
    }
    distances.sort_by_key(|&(idx, ..)| idx);
    let &(_, best_dist, lo, hi) = distances
        .iter()
        .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)))
        .expect("non-empty");

    let ab_lo = lo.top_row();
    let ab_hi = hi.bottom_row();
    let margin_lo = ab_lo[0] + ab_lo[1];
    let margin_hi = ab_hi[0] + ab_hi[1];
    let ab_margin = (f64::from(margin_lo + margin_hi) / 2.0).round() as u32;
    let present = ((f64::from(ab_lo[0]) + f64::from(ab_hi[0])) / 2.0)
        .round()
        .min(f64::from(ab_margin)) as u32;

    Ok(MergedTable {
        bb: hi.top_row(),
        ab: [present, ab_margin - present],
        aa: lo.bottom_row(),
        provenance: Some(Pairing {
            ab_aa: lo.branch,
            bb_ab: hi.branch,
            ab_distance: best_dist,
            distances: distances.iter().map(|&(i, d, ..)| (i, d)).collect(),
        }),
    })
}

/// Individual-level vectors reproducing the merged table: phenotype (1 =
/// present) and genotype code (AA = 1, AB = 2, BB = 3). Within each group the
/// present cases come first.
pub fn expand_indicators(merged: &MergedTable) -> (Vec<f64>, Vec<f64>) {
    let total: u32 = merged.margins().iter().sum();
    let mut phenotype = Vec::with_capacity(total as usize);
    let mut codes = Vec::with_capacity(total as usize);
    for (k, [present, absent]) in merged.rows_by_code().into_iter().enumerate() {
        let code = (k + 1) as f64;
        phenotype.extend(std::iter::repeat_n(1.0, present as usize));
        phenotype.extend(std::iter::repeat_n(0.0, absent as usize));
        codes.extend(std::iter::repeat_n(code, (present + absent) as usize));
    }
    (phenotype, codes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedOr {
    pub or_value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub beta: f64,
    pub se_beta: f64,
    pub iterations_used: usize,
}

pub fn combined_or(merged: &MergedTable) -> Result<CombinedOr> {
    let (y, x) = expand_indicators(merged);
    let fit = fit_logistic(&y, &x)?;
    Ok(CombinedOr {
        or_value: fit.slope.exp(),
        ci_lo: (fit.slope - Z_95 * fit.se_slope).exp(),
        ci_hi: (fit.slope + Z_95 * fit.se_slope).exp(),
        beta: fit.slope,
        se_beta: fit.se_slope,
        iterations_used: fit.iterations,
    })
}

/// Full pipeline for one study's pair of reported odds ratios.
pub fn recombine(ab_aa: &OrRecord, bb_ab: &OrRecord) -> Result<(MergedTable, CombinedOr)> {
    if ab_aa.label != OrLabel::AbVsAa || bb_ab.label != OrLabel::BbVsAb {
        return Err(domain(format!(
            "recombine expects AB_vs_AA then BB_vs_AB, got {} and {}",
            ab_aa.label, bb_ab.label
        )));
    }
    let lo = recover_tables(ab_aa)?;
    let hi = recover_tables(bb_ab)?;
    let merged = select_pairing(&lo, &hi)?;
    let or = combined_or(&merged)?;
    Ok((merged, or))
}

/// Odds ratio and 95% Wald interval of an integer 2x2 table `[a, b, c, d]`.
pub fn table_or_ci(cells: [u32; 4]) -> Result<(f64, f64, f64)> {
    if cells.contains(&0) {
        return Err(domain("table_or_ci: zero cell"));
    }
    let [a, b, c, d] = cells.map(f64::from);
    let or = (a * d) / (b * c);
    let se = (1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d).sqrt();
    Ok((or, (or.ln() - Z_95 * se).exp(), (or.ln() + Z_95 * se).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(label: OrLabel, or_value: f64, ci_lo: f64, ci_hi: f64) -> OrRecord {
        OrRecord {
            label,
            or_value,
            ci_lo,
            ci_hi,
            m_top: 30,
            m_bottom: 30,
        }
    }

    fn cand(branch: RootBranch, cells: [u32; 4]) -> CandidateTable {
        CandidateTable {
            branch,
            raw: cells.map(f64::from),
            cells,
        }
    }

    #[test]
    fn se_from_ci_examples() {
        let se = se_from_ci(1.05, 8.60).unwrap();
        assert!((se - 0.536_472_458_95).abs() < 1e-10, "{se}");
        let se = se_from_ci((-1.96f64).exp(), 1.96f64.exp()).unwrap();
        assert!((se - 1.0).abs() < 1e-12);
        let se = se_from_ci(0.36, 2.81).unwrap();
        assert!((se - 0.524_192_788_49).abs() < 1e-10, "{se}");
        assert!(se_from_ci(2.0, 1.0).is_err());
        assert!(se_from_ci(0.0, 1.0).is_err());
    }

    #[test]
    fn or_one_symmetric_candidates_mirror() {
        let t = recover_tables(&rec(OrLabel::BbVsAb, 1.0, 0.25, 4.0)).unwrap();
        assert_eq!(t.len(), 2);
        assert!((t[0].raw[0] - (30.0 - t[1].raw[0])).abs() < 1e-9);
    }

    #[test]
    fn record_validation() {
        assert!(recover_tables(&rec(OrLabel::AbVsAa, 9.0, 1.05, 8.60)).is_err());
        let mut r = rec(OrLabel::AbVsAa, 3.0, 1.05, 8.60);
        r.m_top = 0;
        assert!(recover_tables(&r).is_err());
    }

    #[test]
    fn negative_discriminant_reported() {
        // A CI far too narrow for the margins has no real solution.
        let r = rec(OrLabel::AbVsAa, 3.0, 2.99, 3.01);
        assert!(matches!(
            recover_tables(&r),
            Err(Error::NegativeDiscriminant { .. })
        ));
    }

    #[test]
    fn half_rows_average_with_margin_repair() {
        let lo = [cand(RootBranch::Plus, [17, 13, 10, 20])];
        let hi = [cand(RootBranch::Plus, [20, 10, 18, 12])];
        let m = select_pairing(&lo, &hi).unwrap();
        assert_eq!(m.ab, [18, 12]);
        assert!((m.provenance.unwrap().ab_distance - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let lo = [
            cand(RootBranch::Plus, [15, 15, 10, 20]),
            cand(RootBranch::Minus, [15, 15, 12, 18]),
        ];
        let hi = [
            cand(RootBranch::Plus, [20, 10, 15, 15]),
            cand(RootBranch::Minus, [5, 25, 15, 15]),
        ];
        let m = select_pairing(&lo, &hi).unwrap();
        let p = m.provenance.unwrap();
        assert_eq!((p.ab_aa, p.bb_ab), (RootBranch::Plus, RootBranch::Plus));
        assert_eq!(p.ab_distance, 0.0);
        assert_eq!(m.aa, [10, 20]);
        assert_eq!(m.bb, [20, 10]);
    }

    #[test]
    fn expansion_counts() {
        let m = MergedTable::new([18, 12], [18, 12], [10, 20]);
        let (y, x) = expand_indicators(&m);
        assert_eq!(y.len(), 90);
        for (k, want) in [(1.0, 10.0), (2.0, 18.0), (3.0, 18.0)] {
            let ones: f64 = y
                .iter()
                .zip(&x)
                .filter(|(_, &c)| c == k)
                .map(|(v, _)| v)
                .sum();
            assert_eq!(ones, want);
        }
        let none = MergedTable::new([0, 5], [0, 7], [0, 9]);
        let (y, x) = expand_indicators(&none);
        assert!(y.iter().all(|&v| v == 0.0));
        assert_eq!(x.len(), 21);
    }

    #[test]
    fn identical_rows_give_unit_or() {
        let m = MergedTable::new([12, 18], [12, 18], [12, 18]);
        let c = combined_or(&m).unwrap();
        assert!(c.beta.abs() < 1e-12);
        assert!((c.or_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separated_table_errors() {
        let m = MergedTable::new([10, 0], [5, 5], [0, 10]);
        assert!(matches!(combined_or(&m), Err(Error::Separation(_))));
    }

    #[test]
    fn labels_parse() {
        assert_eq!("AB_vs_AA".parse::<OrLabel>().unwrap(), OrLabel::AbVsAa);
        assert!("AA_vs_BB".parse::<OrLabel>().is_err());
    }
}
