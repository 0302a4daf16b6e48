//! Offense taxonomy: category names, violence flags, and default grades.
//!
//! The taxonomy is data, not code: a JSON array of `{name, violent,
//! default_grade}` entries loaded at startup. The category name set is
//! closed (nine categories), but which of them count as violent and what
//! grade a synthetic event receives are configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Offense category. Ordering is lexical on the wire name and is used as the
/// canonical ordering everywhere (matching covariate slots, CSV emission).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffenseKind {
    AggravatedAssault,
    DrugSell,
    DrugUse,
    Dui,
    Other,
    Property,
    Robbery,
    SexOffense,
    SimpleAssault,
}

impl OffenseKind {
    pub const ALL: [OffenseKind; 9] = [
        OffenseKind::AggravatedAssault,
        OffenseKind::DrugSell,
        OffenseKind::DrugUse,
        OffenseKind::Dui,
        OffenseKind::Other,
        OffenseKind::Property,
        OffenseKind::Robbery,
        OffenseKind::SexOffense,
        OffenseKind::SimpleAssault,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            OffenseKind::AggravatedAssault => "aggravated_assault",
            OffenseKind::DrugSell => "drug_sell",
            OffenseKind::DrugUse => "drug_use",
            OffenseKind::Dui => "dui",
            OffenseKind::Other => "other",
            OffenseKind::Property => "property",
            OffenseKind::Robbery => "robbery",
            OffenseKind::SexOffense => "sex_offense",
            OffenseKind::SimpleAssault => "simple_assault",
        }
    }

    /// True for the categories whose group rates come from self-report
    /// surveys (and therefore use the wider age banding).
    pub fn is_self_report(&self) -> bool {
        matches!(
            self,
            OffenseKind::DrugUse | OffenseKind::DrugSell | OffenseKind::Dui
        )
    }
}

impl fmt::Display for OffenseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OffenseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OffenseKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::data(format!("unknown offense category: {s:?}")))
    }
}

/// Charge grade attached to an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grade {
    Felony,
    Misdemeanor,
}

impl Grade {
    pub fn name(&self) -> &'static str {
        match self {
            Grade::Felony => "felony",
            Grade::Misdemeanor => "misdemeanor",
        }
    }
}

impl FromStr for Grade {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "felony" => Ok(Grade::Felony),
            "misdemeanor" => Ok(Grade::Misdemeanor),
            other => Err(Error::data(format!("unknown grade: {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TaxonomyEntry {
    name: String,
    violent: bool,
    default_grade: Grade,
}

/// Violence flags and default grades per category.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    entries: BTreeMap<OffenseKind, (bool, Grade)>,
}

impl Taxonomy {
    /// Load from a JSON array of `{name, violent, default_grade}` objects.
    /// Every category referenced by a cohort must be present; duplicates are
    /// rejected.
    pub fn from_json(json: &str) -> Result<Self> {
        let raw: Vec<TaxonomyEntry> =
            serde_json::from_str(json).map_err(|e| Error::data(format!("taxonomy: {e}")))?;
        let mut entries = BTreeMap::new();
        for entry in raw {
            let kind: OffenseKind = entry.name.parse()?;
            if entries
                .insert(kind, (entry.violent, entry.default_grade))
                .is_some()
            {
                return Err(Error::data(format!("taxonomy: duplicate category {kind}")));
            }
        }
        if entries.is_empty() {
            return Err(Error::data("taxonomy: no categories defined"));
        }
        Ok(Taxonomy { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("taxonomy {}: {e}", path.display())))?;
        Taxonomy::from_json(&json)
    }

    /// Built-in nine-category taxonomy used by the synthetic generator and
    /// as the reference for the shipped fixture file.
    pub fn builtin() -> Self {
        use Grade::*;
        use OffenseKind::*;
        let table = [
            (AggravatedAssault, true, Felony),
            (DrugSell, false, Felony),
            (DrugUse, false, Misdemeanor),
            (Dui, false, Misdemeanor),
            (Other, false, Misdemeanor),
            (Property, false, Misdemeanor),
            (Robbery, true, Felony),
            (SexOffense, true, Felony),
            (SimpleAssault, true, Misdemeanor),
        ];
        Taxonomy {
            entries: table.iter().map(|&(k, v, g)| (k, (v, g))).collect(),
        }
    }

    pub fn contains(&self, kind: OffenseKind) -> bool {
        self.entries.contains_key(&kind)
    }

    pub fn violent(&self, kind: OffenseKind) -> Result<bool> {
        self.entries
            .get(&kind)
            .map(|&(v, _)| v)
            .ok_or_else(|| Error::data(format!("taxonomy: category {kind} not defined")))
    }

    pub fn default_grade(&self, kind: OffenseKind) -> Result<Grade> {
        self.entries
            .get(&kind)
            .map(|&(_, g)| g)
            .ok_or_else(|| Error::data(format!("taxonomy: category {kind} not defined")))
    }

    /// Categories in canonical order.
    pub fn kinds(&self) -> impl Iterator<Item = OffenseKind> + '_ {
        self.entries.keys().copied()
    }

    /// Serialize to the JSON wire form (canonical order).
    pub fn to_json(&self) -> String {
        let raw: Vec<TaxonomyEntry> = self
            .entries
            .iter()
            .map(|(&kind, &(violent, grade))| TaxonomyEntry {
                name: kind.name().to_string(),
                violent,
                default_grade: grade,
            })
            .collect();
        serde_json::to_string_pretty(&raw).expect("taxonomy serialization cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_round_trips_through_json() {
        let t = Taxonomy::builtin();
        let parsed = Taxonomy::from_json(&t.to_json()).unwrap();
        for kind in OffenseKind::ALL {
            assert_eq!(parsed.violent(kind).unwrap(), t.violent(kind).unwrap());
            assert_eq!(
                parsed.default_grade(kind).unwrap(),
                t.default_grade(kind).unwrap()
            );
        }
    }

    #[test]
    fn violent_flags_cover_assaultive_categories() {
        let t = Taxonomy::builtin();
        assert!(t.violent(OffenseKind::Robbery).unwrap());
        assert!(t.violent(OffenseKind::AggravatedAssault).unwrap());
        assert!(t.violent(OffenseKind::SexOffense).unwrap());
        assert!(!t.violent(OffenseKind::DrugUse).unwrap());
        assert!(!t.violent(OffenseKind::Property).unwrap());
    }

    #[test]
    fn unknown_category_is_a_data_error() {
        let err = Taxonomy::from_json(r#"[{"name":"larceny","violent":false,"default_grade":"felony"}]"#)
            .unwrap_err();
        assert!(matches!(err, Error::Data(_)), "got {err:?}");
    }

    #[test]
    fn duplicate_category_is_rejected() {
        let json = r#"[
            {"name":"dui","violent":false,"default_grade":"misdemeanor"},
            {"name":"dui","violent":false,"default_grade":"felony"}
        ]"#;
        assert!(Taxonomy::from_json(json).is_err());
    }

    #[test]
    fn self_report_categories() {
        assert!(OffenseKind::DrugUse.is_self_report());
        assert!(OffenseKind::DrugSell.is_self_report());
        assert!(OffenseKind::Dui.is_self_report());
        assert!(!OffenseKind::Robbery.is_self_report());
    }
}
