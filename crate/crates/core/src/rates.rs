//! Group offense and arrest rate tables.
//!
//! A rate table maps (demographic cell, offense category) to a rate in
//! `[0, 1]`. Tables come from four places:
//!
//! * a direct table CSV (`sex,race,ethnicity,age_band,category,rate`),
//! * an aggregate survey CSV with per-year numerators and denominators,
//! * a micro survey CSV with one row per respondent and category, which
//!   yields an offense-prevalence table and an arrest-rate table in one
//!   pass,
//! * rearrest prevalence computed from a cohort's own records.
//!
//! Multi-year series collapse to a single rate either by pooled averaging
//! (sum of numerators over sum of denominators, invariant to how rows are
//! split) or by a weighted regression on calendar year evaluated at a
//! target year. Cells with fewer than two distinct years fall back to
//! averaging and say so in their metadata.
//!
//! Cell resolution: self-report categories key Hispanic individuals by
//! ethnicity with race collapsed to `other` (their source tables have no
//! race split within Hispanic respondents) and band adults at 35; all other
//! lookups key by race with ethnicity collapsed to `non_hispanic` and band
//! adults at 30.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};

use crate::cohort::{AgeBand, AgeConvention, Cohort, Ethnicity, GroupKey, Race, Sex};
use crate::error::Error;
use crate::taxonomy::OffenseKind;
use crate::Result;

/// How a multi-year series becomes one rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimationMethod {
    /// Pooled numerator over pooled denominator.
    Averaging,
    /// Denominator-weighted least squares on year, evaluated at
    /// `target_year`, clipped to `[0, 1]`.
    Wls { target_year: i32 },
}

/// What actually produced a cell's value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellMethod {
    Averaging,
    Wls,
    /// Regression was requested but the cell had one distinct year.
    WlsFallback,
    /// Value supplied directly, no estimation.
    Given,
}

impl CellMethod {
    pub fn name(&self) -> &'static str {
        match self {
            CellMethod::Averaging => "averaging",
            CellMethod::Wls => "wls",
            CellMethod::WlsFallback => "wls_fallback",
            CellMethod::Given => "given",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateCell {
    pub value: f64,
    pub method: CellMethod,
    /// Pooled numerator and denominator across years (diagnostics).
    pub numerator: f64,
    pub denominator: f64,
}

/// The two bands a convention produces.
fn convention_bands(conv: AgeConvention) -> [AgeBand; 2] {
    match conv {
        AgeConvention::Cut30 => [AgeBand::A18To29, AgeBand::A30Plus],
        AgeConvention::Cut35 => [AgeBand::A18To34, AgeBand::A35Plus],
    }
}

/// The cell an individual's rates live in. See the module doc for the
/// ethnicity and banding rules.
pub fn resolve_group_parts(
    sex: Sex,
    race: Race,
    ethnicity: Ethnicity,
    age_years: i32,
    category: OffenseKind,
) -> GroupKey {
    let band = AgeConvention::for_category(category).band(age_years);
    if ethnicity == Ethnicity::Hispanic && category.is_self_report() {
        GroupKey {
            sex,
            race: Race::Other,
            ethnicity: Ethnicity::Hispanic,
            band,
        }
    } else {
        GroupKey {
            sex,
            race,
            ethnicity: Ethnicity::NonHispanic,
            band,
        }
    }
}

/// Resolution keyed off a person's age at July 1 of `year`.
pub fn resolve_group(
    person: &crate::cohort::Person,
    year: i32,
    category: OffenseKind,
) -> GroupKey {
    let midpoint = NaiveDate::from_ymd_opt(year, 7, 1).expect("valid date");
    resolve_group_parts(
        person.sex,
        person.race,
        person.ethnicity,
        person.age_at(midpoint),
        category,
    )
}

#[derive(Debug, Clone, Default)]
pub struct RateTable {
    cells: BTreeMap<(GroupKey, OffenseKind), RateCell>,
}

impl RateTable {
    pub fn new() -> Self {
        RateTable::default()
    }

    pub fn insert(&mut self, group: GroupKey, category: OffenseKind, cell: RateCell) {
        self.cells.insert((group, category), cell);
    }

    pub fn insert_given(&mut self, group: GroupKey, category: OffenseKind, value: f64) {
        self.insert(
            group,
            category,
            RateCell {
                value,
                method: CellMethod::Given,
                numerator: value,
                denominator: 1.0,
            },
        );
    }

    pub fn get(&self, group: GroupKey, category: OffenseKind) -> Option<f64> {
        self.cells.get(&(group, category)).map(|c| c.value)
    }

    pub fn cell(&self, group: GroupKey, category: OffenseKind) -> Option<&RateCell> {
        self.cells.get(&(group, category))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(GroupKey, OffenseKind), &RateCell)> {
        self.cells.iter()
    }

    /// Direct table CSV: `sex,race,ethnicity,age_band,category,rate`, extra
    /// columns ignored, so a written table loads back.
    pub fn read_table_csv<R: Read>(reader: R) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
        let header = csv
            .headers()
            .map_err(|e| Error::data(format!("rate table header: {e}")))?
            .clone();
        let want = ["sex", "race", "ethnicity", "age_band", "category", "rate"];
        let got: Vec<&str> = header.iter().take(want.len()).collect();
        if got != want {
            return Err(Error::data(format!(
                "rate table header mismatch: expected columns starting {want:?}, got {got:?}"
            )));
        }
        let mut table = RateTable::new();
        for (idx, record) in csv.records().enumerate() {
            let row = idx + 2;
            let record = record.map_err(|e| Error::data(format!("rate table row {row}: {e}")))?;
            let field = |i: usize| record.get(i).unwrap_or("").trim();
            let (group, category) = parse_cell_key(field(0), field(1), field(2), field(3), field(4))
                .map_err(|e| Error::data(format!("rate table row {row}: {e}")))?;
            let value: f64 = field(5)
                .parse()
                .map_err(|_| Error::data(format!("rate table row {row}: bad rate {:?}", field(5))))?;
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::data(format!(
                    "rate table row {row}: rate {value} outside [0, 1]"
                )));
            }
            if table.cells.contains_key(&(group, category)) {
                return Err(Error::data(format!(
                    "rate table row {row}: duplicate cell {group} {category}"
                )));
            }
            table.insert_given(group, category, value);
        }
        Ok(table)
    }

    /// Aggregate survey CSV:
    /// `year,sex,race,ethnicity,age_band,category,numerator,denominator`.
    pub fn read_aggregate_csv<R: Read>(reader: R, method: EstimationMethod) -> Result<Self> {
        let mut csv = csv::Reader::from_reader(reader);
        let header = csv
            .headers()
            .map_err(|e| Error::data(format!("aggregate rates header: {e}")))?
            .clone();
        let want = [
            "year",
            "sex",
            "race",
            "ethnicity",
            "age_band",
            "category",
            "numerator",
            "denominator",
        ];
        let got: Vec<&str> = header.iter().collect();
        if got != want {
            return Err(Error::data(format!(
                "aggregate rates header mismatch: expected {want:?}, got {got:?}"
            )));
        }
        let mut series: BTreeMap<(GroupKey, OffenseKind), BTreeMap<i32, (f64, f64)>> =
            BTreeMap::new();
        for (idx, record) in csv.records().enumerate() {
            let row = idx + 2;
            let record =
                record.map_err(|e| Error::data(format!("aggregate rates row {row}: {e}")))?;
            let field = |i: usize| record.get(i).unwrap_or("").trim();
            let year: i32 = field(0)
                .parse()
                .map_err(|_| Error::data(format!("aggregate rates row {row}: bad year")))?;
            let (group, category) = parse_cell_key(field(1), field(2), field(3), field(4), field(5))
                .map_err(|e| Error::data(format!("aggregate rates row {row}: {e}")))?;
            let numerator: f64 = field(6)
                .parse()
                .map_err(|_| Error::data(format!("aggregate rates row {row}: bad numerator")))?;
            let denominator: f64 = field(7)
                .parse()
                .map_err(|_| Error::data(format!("aggregate rates row {row}: bad denominator")))?;
            if denominator <= 0.0 {
                return Err(Error::data(format!(
                    "aggregate rates row {row}: denominator must be positive"
                )));
            }
            if numerator < 0.0 || numerator > denominator {
                return Err(Error::data(format!(
                    "aggregate rates row {row}: numerator must lie in [0, denominator]"
                )));
            }
            let entry = series
                .entry((group, category))
                .or_default()
                .entry(year)
                .or_insert((0.0, 0.0));
            entry.0 += numerator;
            entry.1 += denominator;
        }
        Ok(RateTable::from_series(series, method))
    }

    /// Micro survey CSV, one row per respondent and category:
    /// `respondent_id,year,sex,race,ethnicity,age,category,committed,ever_arrested,arrested_for_category`.
    ///
    /// Returns the offense-prevalence table (share of ever-arrested
    /// respondents reporting the offense) and the arrest-rate table (share
    /// of reporting respondents arrested for it).
    pub fn read_micro_csv<R: Read>(
        reader: R,
        method: EstimationMethod,
    ) -> Result<(RateTable, RateTable)> {
        let mut csv = csv::Reader::from_reader(reader);
        let header = csv
            .headers()
            .map_err(|e| Error::data(format!("micro rates header: {e}")))?
            .clone();
        let want = [
            "respondent_id",
            "year",
            "sex",
            "race",
            "ethnicity",
            "age",
            "category",
            "committed",
            "ever_arrested",
            "arrested_for_category",
        ];
        let got: Vec<&str> = header.iter().collect();
        if got != want {
            return Err(Error::data(format!(
                "micro rates header mismatch: expected {want:?}, got {got:?}"
            )));
        }
        let mut prevalence: BTreeMap<(GroupKey, OffenseKind), BTreeMap<i32, (f64, f64)>> =
            BTreeMap::new();
        let mut arrest: BTreeMap<(GroupKey, OffenseKind), BTreeMap<i32, (f64, f64)>> =
            BTreeMap::new();
        for (idx, record) in csv.records().enumerate() {
            let row = idx + 2;
            let record = record.map_err(|e| Error::data(format!("micro rates row {row}: {e}")))?;
            let field = |i: usize| record.get(i).unwrap_or("").trim();
            let year: i32 = field(1)
                .parse()
                .map_err(|_| Error::data(format!("micro rates row {row}: bad year")))?;
            let sex: Sex = field(2)
                .parse()
                .map_err(|e| Error::data(format!("micro rates row {row}: {e}")))?;
            let race: Race = field(3)
                .parse()
                .map_err(|e| Error::data(format!("micro rates row {row}: {e}")))?;
            let ethnicity: Ethnicity = field(4)
                .parse()
                .map_err(|e| Error::data(format!("micro rates row {row}: {e}")))?;
            let age: i32 = field(5)
                .parse()
                .map_err(|_| Error::data(format!("micro rates row {row}: bad age")))?;
            let category: OffenseKind = field(6)
                .parse()
                .map_err(|e| Error::data(format!("micro rates row {row}: {e}")))?;
            let committed = parse_bool(field(7))
                .map_err(|e| Error::data(format!("micro rates row {row}: committed: {e}")))?;
            let ever_arrested = parse_bool(field(8))
                .map_err(|e| Error::data(format!("micro rates row {row}: ever_arrested: {e}")))?;
            let arrested_for = parse_bool(field(9)).map_err(|e| {
                Error::data(format!("micro rates row {row}: arrested_for_category: {e}"))
            })?;

            let group = resolve_group_parts(sex, race, ethnicity, age, category);
            if ever_arrested {
                let entry = prevalence
                    .entry((group, category))
                    .or_default()
                    .entry(year)
                    .or_insert((0.0, 0.0));
                entry.1 += 1.0;
                if committed {
                    entry.0 += 1.0;
                }
            }
            if committed {
                let entry = arrest
                    .entry((group, category))
                    .or_default()
                    .entry(year)
                    .or_insert((0.0, 0.0));
                entry.1 += 1.0;
                if arrested_for {
                    entry.0 += 1.0;
                }
            }
        }
        Ok((
            RateTable::from_series(prevalence, method),
            RateTable::from_series(arrest, method),
        ))
    }

    /// Rearrest prevalence from the cohort's own records: the share of each
    /// cell with at least two observed arrests for the category. Cells are
    /// resolved with ages at July 1 of `reference`'s year.
    pub fn rearrest_from_cohort(
        cohort: &Cohort,
        reference: NaiveDate,
        categories: &[OffenseKind],
    ) -> RateTable {
        let year = reference.year();
        let mut table = RateTable::new();
        for &category in categories {
            let mut counts: BTreeMap<GroupKey, (f64, f64)> = BTreeMap::new();
            for person in &cohort.persons {
                let group = resolve_group(person, year, category);
                let entry = counts.entry(group).or_insert((0.0, 0.0));
                entry.1 += 1.0;
                if person.observed_count(category) >= 2 {
                    entry.0 += 1.0;
                }
            }
            for (group, (num, den)) in counts {
                table.insert(
                    group,
                    category,
                    RateCell {
                        value: num / den,
                        method: CellMethod::Averaging,
                        numerator: num,
                        denominator: den,
                    },
                );
            }
        }
        table
    }

    fn from_series(
        series: BTreeMap<(GroupKey, OffenseKind), BTreeMap<i32, (f64, f64)>>,
        method: EstimationMethod,
    ) -> RateTable {
        let mut table = RateTable::new();
        for ((group, category), years) in series {
            if let Some(cell) = estimate(&years, method) {
                table.insert(group, category, cell);
            }
        }
        table
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record([
            "sex",
            "race",
            "ethnicity",
            "age_band",
            "category",
            "rate",
            "method",
            "numerator",
            "denominator",
        ])?;
        for ((group, category), cell) in &self.cells {
            csv.write_record([
                group.sex.name(),
                group.race.name(),
                group.ethnicity.name(),
                group.band.name(),
                category.name(),
                &format!("{}", cell.value),
                cell.method.name(),
                &format!("{}", cell.numerator),
                &format!("{}", cell.denominator),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::config(format!("rate table {}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load_table(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::config(format!("rate table {}: {e}", path.display())))?;
        RateTable::read_table_csv(std::io::BufReader::new(file))
    }
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        v => Err(Error::data(format!("expected 0 or 1, got {v:?}"))),
    }
}

fn parse_cell_key(
    sex: &str,
    race: &str,
    ethnicity: &str,
    band: &str,
    category: &str,
) -> Result<(GroupKey, OffenseKind)> {
    let sex: Sex = sex.parse()?;
    let race: Race = race.parse()?;
    let ethnicity: Ethnicity = ethnicity.parse()?;
    let band: AgeBand = band.parse()?;
    let category: OffenseKind = category.parse()?;

    let conv = AgeConvention::for_category(category);
    if !convention_bands(conv).contains(&band) {
        return Err(Error::data(format!(
            "age band {band} does not match the banding for category {category}"
        )));
    }
    if ethnicity == Ethnicity::Hispanic {
        if !category.is_self_report() {
            return Err(Error::data(format!(
                "hispanic cells only exist for self-report categories, not {category}"
            )));
        }
        if race != Race::Other {
            return Err(Error::data(
                "hispanic cells must use race \"other\" (no race split within hispanic)",
            ));
        }
    }
    Ok((
        GroupKey {
            sex,
            race,
            ethnicity,
            band,
        },
        category,
    ))
}

/// Collapse one cell's year series to a rate. Years with zero denominator
/// have been dropped already; an empty series yields no cell.
fn estimate(years: &BTreeMap<i32, (f64, f64)>, method: EstimationMethod) -> Option<RateCell> {
    let pts: Vec<(f64, f64, f64)> = years
        .iter()
        .filter(|(_, &(_, den))| den > 0.0)
        .map(|(&y, &(num, den))| (y as f64, num / den, den))
        .collect();
    if pts.is_empty() {
        return None;
    }
    let total_num: f64 = years.values().map(|&(n, _)| n).sum();
    let total_den: f64 = years.values().map(|&(_, d)| d).sum();
    let pooled = total_num / total_den;

    match method {
        EstimationMethod::Averaging => Some(RateCell {
            value: pooled,
            method: CellMethod::Averaging,
            numerator: total_num,
            denominator: total_den,
        }),
        EstimationMethod::Wls { target_year } => {
            if pts.len() < 2 {
                return Some(RateCell {
                    value: pooled,
                    method: CellMethod::WlsFallback,
                    numerator: total_num,
                    denominator: total_den,
                });
            }
            let w_total: f64 = pts.iter().map(|&(_, _, w)| w).sum();
            let x_bar = pts.iter().map(|&(x, _, w)| w * x).sum::<f64>() / w_total;
            let y_bar = pts.iter().map(|&(_, y, w)| w * y).sum::<f64>() / w_total;
            let sxx: f64 = pts.iter().map(|&(x, _, w)| w * (x - x_bar).powi(2)).sum();
            let sxy: f64 = pts
                .iter()
                .map(|&(x, y, w)| w * (x - x_bar) * (y - y_bar))
                .sum();
            let slope = sxy / sxx;
            let value = (y_bar + slope * (target_year as f64 - x_bar)).clamp(0.0, 1.0);
            Some(RateCell {
                value,
                method: CellMethod::Wls,
                numerator: total_num,
                denominator: total_den,
            })
        }
    }
}
