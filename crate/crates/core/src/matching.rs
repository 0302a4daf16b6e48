//! Coarsened exact matching on fixed bins, and the cell-averaged score
//! difference between two sides.
//!
//! Units are binned on age (cut at 30) and on per-category offense counts.
//! Cells present on both sides contribute their mean-score difference,
//! weighted by cell population; cells present on one side only are dropped.
//! All bin edges are fixed up front, so the partition never depends on the
//! data.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::taxonomy::OffenseKind;
use crate::Result;

/// How far the count bins keep resolving past 9. The shared lower bins are
/// 0, 1, 2, 3-4, 5-6, 7-9.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BinningVariant {
    /// 10+.
    Coarse,
    /// 10-19, 20+.
    Medium,
    /// 10-19, 20-49, 50+.
    #[default]
    Fine,
}

impl BinningVariant {
    pub const ALL: [BinningVariant; 3] = [
        BinningVariant::Coarse,
        BinningVariant::Medium,
        BinningVariant::Fine,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BinningVariant::Coarse => "coarse",
            BinningVariant::Medium => "medium",
            BinningVariant::Fine => "fine",
        }
    }
}

impl fmt::Display for BinningVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BinningVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BinningVariant::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::data(format!("unknown binning variant: {s:?}")))
    }
}

pub fn count_bin(count: u32, variant: BinningVariant) -> u8 {
    match count {
        0 => 0,
        1 => 1,
        2 => 2,
        3..=4 => 3,
        5..=6 => 4,
        7..=9 => 5,
        _ => match variant {
            BinningVariant::Coarse => 6,
            BinningVariant::Medium => {
                if count <= 19 {
                    6
                } else {
                    7
                }
            }
            BinningVariant::Fine => {
                if count <= 19 {
                    6
                } else if count <= 49 {
                    7
                } else {
                    8
                }
            }
        },
    }
}

/// Ages below 30 (including minors) on one side, 30 and up on the other.
pub fn age_bin(age_years: i32) -> u8 {
    if age_years < 30 {
        0
    } else {
        1
    }
}

/// Age bin plus one count bin per category, in canonical category order.
pub type CellKey = (u8, [u8; 9]);

/// One unit to match: covariates and the score being compared.
#[derive(Debug, Clone, Copy)]
pub struct MatchUnit {
    pub age_years: i32,
    /// Offense counts in canonical category order.
    pub counts: [u32; 9],
    pub score: f64,
}

pub fn counts_array(map: &BTreeMap<OffenseKind, u32>) -> [u32; 9] {
    let mut out = [0u32; 9];
    for (slot, kind) in OffenseKind::ALL.iter().enumerate() {
        out[slot] = map.get(kind).copied().unwrap_or(0);
    }
    out
}

pub fn cell_key(unit: &MatchUnit, variant: BinningVariant) -> CellKey {
    let mut bins = [0u8; 9];
    for (slot, &count) in unit.counts.iter().enumerate() {
        bins[slot] = count_bin(count, variant);
    }
    (age_bin(unit.age_years), bins)
}

#[derive(Debug, Clone)]
pub struct CellSummary {
    pub key: CellKey,
    pub n_a: u64,
    pub n_b: u64,
    pub mean_a: f64,
    pub mean_b: f64,
}

/// Population-weighted average of per-cell mean differences, side A minus
/// side B, on the score's own scale.
#[derive(Debug, Clone)]
pub struct MatchResult {
    pub ae: f64,
    pub n_cells: usize,
    pub n_matched_a: u64,
    pub n_matched_b: u64,
    pub cells: Vec<CellSummary>,
}

/// `None` when no cell has units on both sides.
pub fn match_and_compare(
    a: &[MatchUnit],
    b: &[MatchUnit],
    variant: BinningVariant,
) -> Option<MatchResult> {
    #[derive(Default)]
    struct Acc {
        n_a: u64,
        sum_a: f64,
        n_b: u64,
        sum_b: f64,
    }
    let mut cells: BTreeMap<CellKey, Acc> = BTreeMap::new();
    for unit in a {
        let acc = cells.entry(cell_key(unit, variant)).or_default();
        acc.n_a += 1;
        acc.sum_a += unit.score;
    }
    for unit in b {
        let acc = cells.entry(cell_key(unit, variant)).or_default();
        acc.n_b += 1;
        acc.sum_b += unit.score;
    }

    let mut weighted = 0.0;
    let mut weight = 0.0;
    let mut out = MatchResult {
        ae: 0.0,
        n_cells: 0,
        n_matched_a: 0,
        n_matched_b: 0,
        cells: Vec::new(),
    };
    for (key, acc) in &cells {
        if acc.n_a == 0 || acc.n_b == 0 {
            continue;
        }
        let mean_a = acc.sum_a / acc.n_a as f64;
        let mean_b = acc.sum_b / acc.n_b as f64;
        let w = (acc.n_a + acc.n_b) as f64;
        weighted += w * (mean_a - mean_b);
        weight += w;
        out.n_cells += 1;
        out.n_matched_a += acc.n_a;
        out.n_matched_b += acc.n_b;
        out.cells.push(CellSummary {
            key: *key,
            n_a: acc.n_a,
            n_b: acc.n_b,
            mean_a,
            mean_b,
        });
    }
    if weight == 0.0 {
        return None;
    }
    out.ae = weighted / weight;
    Some(out)
}
