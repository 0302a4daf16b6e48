//! The four risk instruments and their common normalized scale.
//!
//! Each instrument maps a [`HistorySummary`] to a score; scores are then
//! rescaled to `[0, 1]` so disparities are comparable across instruments.
//! Three instruments are additive point scales with fixed item weights; the
//! fourth is a logistic model whose coefficients load from JSON.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cohort::{HistorySummary, Sex};
use crate::error::Error;
use crate::taxonomy::OffenseKind;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rai {
    Nca,
    Nvca,
    Vprai,
    Ogrs3,
}

impl Rai {
    pub const ALL: [Rai; 4] = [Rai::Nca, Rai::Nvca, Rai::Vprai, Rai::Ogrs3];

    pub fn name(&self) -> &'static str {
        match self {
            Rai::Nca => "nca",
            Rai::Nvca => "nvca",
            Rai::Vprai => "vprai",
            Rai::Ogrs3 => "ogrs3",
        }
    }
}

impl fmt::Display for Rai {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rai {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Rai::ALL
            .iter()
            .copied()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::data(format!("unknown instrument: {s:?}")))
    }
}

/// New-criminal-activity point total (0..=13).
pub fn nca_raw(h: &HistorySummary) -> u32 {
    let mut pts = 0;
    if h.age_years <= 22 {
        pts += 2;
    }
    if h.pending_charge {
        pts += 3;
    }
    if h.prior_misdemeanor_convictions > 0 {
        pts += 1;
    }
    if h.prior_felony_convictions > 0 {
        pts += 1;
    }
    pts += match h.prior_violent_convictions {
        0 => 0,
        1..=2 => 1,
        _ => 2,
    };
    pts += match h.prior_fta_recent {
        0 => 0,
        1 => 1,
        _ => 2,
    };
    if h.prior_incarceration {
        pts += 2;
    }
    pts
}

/// Point total to 1..=6 scale.
pub fn nca_scaled(raw: u32) -> u32 {
    match raw {
        0 => 1,
        1..=2 => 2,
        3..=4 => 3,
        5..=6 => 4,
        7..=8 => 5,
        _ => 6,
    }
}

/// New-violent-criminal-activity point total (0..=7).
pub fn nvca_raw(h: &HistorySummary) -> u32 {
    let mut pts = 0;
    if h.current_violent {
        pts += 2;
        if h.age_years <= 20 {
            pts += 1;
        }
    }
    if h.pending_charge {
        pts += 1;
    }
    if h.prior_convictions_total() > 0 {
        pts += 1;
    }
    pts += match h.prior_violent_convictions {
        0 => 0,
        1..=2 => 1,
        _ => 2,
    };
    pts
}

/// Point total to 1..=6 scale.
pub fn nvca_scaled(raw: u32) -> u32 {
    match raw {
        0..=1 => 1,
        2 => 2,
        3 => 3,
        4 => 4,
        5 => 5,
        _ => 6,
    }
}

/// Pretrial risk point total (0..=7). The instrument's employment,
/// residence, and outstanding-warrant items are not derivable from arrest
/// records and contribute zero here.
pub fn vprai_raw(h: &HistorySummary) -> u32 {
    let mut pts = 0;
    if h.current_felony {
        pts += 1;
    }
    if h.pending_charge {
        pts += 1;
    }
    if h.prior_convictions_total() > 0 {
        pts += 1;
    }
    if h.prior_violent_convictions >= 2 {
        pts += 1;
    }
    if h.prior_fta_total >= 2 {
        pts += 2;
    }
    if h.prior_drug_convictions > 0 {
        pts += 1;
    }
    pts
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AgeSexWeight {
    sex: Sex,
    /// Band start; the band runs to the next start for the same sex.
    min_age: i32,
    weight: f64,
}

/// Logistic reconviction model: intercept, age/sex band weight, current
/// offense weight, and a rate term over the prior sanction count and career
/// length.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ogrs3Coefficients {
    pub intercept: f64,
    pub career_weight: f64,
    /// Added to career length to keep the rate term finite at first arrest.
    pub career_constant_months: f64,
    age_sex: Vec<AgeSexWeight>,
    offense: BTreeMap<OffenseKind, f64>,
}

impl Ogrs3Coefficients {
    pub fn from_json(json: &str) -> Result<Self> {
        let mut c: Ogrs3Coefficients = serde_json::from_str(json)
            .map_err(|e| Error::data(format!("reconviction coefficients: {e}")))?;
        c.validate()?;
        c.age_sex.sort_by_key(|w| (w.sex, w.min_age));
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("coefficients {}: {e}", path.display())))?;
        Ogrs3Coefficients::from_json(&json)
    }

    fn validate(&self) -> Result<()> {
        if self.career_constant_months <= 0.0 {
            return Err(Error::data(
                "reconviction coefficients: career_constant_months must be positive",
            ));
        }
        for sex in [Sex::Female, Sex::Male] {
            if !self.age_sex.iter().any(|w| w.sex == sex) {
                return Err(Error::data(format!(
                    "reconviction coefficients: no age bands for sex {sex}"
                )));
            }
        }
        for kind in OffenseKind::ALL {
            if !self.offense.contains_key(&kind) {
                return Err(Error::data(format!(
                    "reconviction coefficients: no offense weight for {kind}"
                )));
            }
        }
        Ok(())
    }

    /// Weight of the band containing `age`; ages below the first band clamp
    /// into it.
    fn age_sex_weight(&self, sex: Sex, age: i32) -> f64 {
        let mut chosen = None;
        for w in self.age_sex.iter().filter(|w| w.sex == sex) {
            if chosen.is_none() || w.min_age <= age {
                chosen = Some(w.weight);
            }
        }
        chosen.expect("validated: at least one band per sex")
    }

    fn offense_weight(&self, kind: OffenseKind) -> f64 {
        *self.offense.get(&kind).expect("validated: all categories weighted")
    }

    /// Placeholder coefficient set with the published model's shape: risk
    /// falls with age, women score below men, acquisitive offenses score
    /// above violent ones, and risk rises with sanction density. Not a
    /// calibrated model; real uses should load a coefficient file.
    pub fn builtin() -> Self {
        use OffenseKind::*;
        let male = [
            (18, 0.0),
            (21, -0.19),
            (25, -0.63),
            (30, -0.77),
            (35, -0.84),
            (40, -1.13),
            (50, -1.66),
        ];
        let female = [
            (18, -0.38),
            (21, -0.88),
            (25, -1.06),
            (30, -1.01),
            (35, -1.09),
            (40, -1.43),
            (50, -2.10),
        ];
        // same canonical ordering from_json leaves the bands in
        let mut age_sex = Vec::new();
        for (min_age, weight) in female {
            age_sex.push(AgeSexWeight { sex: Sex::Female, min_age, weight });
        }
        for (min_age, weight) in male {
            age_sex.push(AgeSexWeight { sex: Sex::Male, min_age, weight });
        }
        let offense = [
            (AggravatedAssault, -0.56),
            (DrugSell, -0.20),
            (DrugUse, 0.15),
            (Dui, -0.50),
            (Other, 0.0),
            (Property, 0.30),
            (Robbery, -0.74),
            (SexOffense, -1.75),
            (SimpleAssault, -0.40),
        ]
        .into_iter()
        .collect();
        Ogrs3Coefficients {
            intercept: 1.0,
            career_weight: 0.75,
            career_constant_months: 12.0,
            age_sex,
            offense,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("coefficient serialization cannot fail")
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Two-year reconviction probability in (0, 1).
pub fn ogrs3_probability(h: &HistorySummary, c: &Ogrs3Coefficients) -> f64 {
    let sanctions = 1.0 + h.prior_arrests as f64;
    let career = h.career_months as f64 + c.career_constant_months;
    let z = c.intercept
        + c.age_sex_weight(h.sex, h.age_years)
        + c.offense_weight(h.current_category)
        + c.career_weight * (sanctions / career).ln();
    logistic(z)
}

/// Score on the common `[0, 1]` scale. Each instrument's output is shifted
/// and divided by a fixed span, then clamped.
pub fn normalized(rai: Rai, h: &HistorySummary, c: &Ogrs3Coefficients) -> f64 {
    let (value, min, span) = match rai {
        Rai::Nca => (nca_scaled(nca_raw(h)) as f64, 1.0, 5.0),
        Rai::Nvca => (nvca_scaled(nvca_raw(h)) as f64, 1.0, 5.0),
        Rai::Vprai => (vprai_raw(h) as f64, 0.0, 5.0),
        Rai::Ogrs3 => (ogrs3_probability(h, c), 0.0, 1.0),
    };
    ((value - min) / span).clamp(0.0, 1.0)
}

/// All four normalized scores for one history.
pub fn all_normalized(h: &HistorySummary, c: &Ogrs3Coefficients) -> [(Rai, f64); 4] {
    Rai::ALL.map(|rai| (rai, normalized(rai, h, c)))
}
