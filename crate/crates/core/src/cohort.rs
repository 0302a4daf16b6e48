//! Cohort data model: people, arrest/offense events, demographic keys, and
//! the criminal-history summary consumed by the risk scores.
//!
//! A cohort is a flat CSV, one row per event, person attributes repeated on
//! every row:
//!
//! ```text
//! person_id,birth_date,sex,race,ethnicity,offense_date,category,grade,disposition,disposition_date,observed
//! ```
//!
//! `grade` may be empty (falls back to the taxonomy default for the
//! category), `disposition` may be empty (treated as `none`),
//! `disposition_date` may be empty, and `observed` may be empty or absent
//! (treated as `1`). Synthetic offenses injected by the augmentation step
//! carry `observed = 0`; they never appear in score inputs, which read
//! official records only.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::taxonomy::{Grade, OffenseKind, Taxonomy};
use crate::Result;

pub const COHORT_HEADER: [&str; 11] = [
    "person_id",
    "birth_date",
    "sex",
    "race",
    "ethnicity",
    "offense_date",
    "category",
    "grade",
    "disposition",
    "disposition_date",
    "observed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    pub fn name(&self) -> &'static str {
        match self {
            Sex::Female => "female",
            Sex::Male => "male",
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "female" => Ok(Sex::Female),
            "male" => Ok(Sex::Male),
            other => Err(Error::data(format!("unknown sex: {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Race {
    Black,
    White,
    Other,
}

impl Race {
    pub fn name(&self) -> &'static str {
        match self {
            Race::Black => "black",
            Race::White => "white",
            Race::Other => "other",
        }
    }
}

impl fmt::Display for Race {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Race {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "black" => Ok(Race::Black),
            "white" => Ok(Race::White),
            "other" => Ok(Race::Other),
            v => Err(Error::data(format!("unknown race: {v:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ethnicity {
    Hispanic,
    NonHispanic,
}

impl Ethnicity {
    pub fn name(&self) -> &'static str {
        match self {
            Ethnicity::Hispanic => "hispanic",
            Ethnicity::NonHispanic => "non_hispanic",
        }
    }
}

impl fmt::Display for Ethnicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ethnicity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hispanic" => Ok(Ethnicity::Hispanic),
            "non_hispanic" => Ok(Ethnicity::NonHispanic),
            v => Err(Error::data(format!("unknown ethnicity: {v:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncarcerationKind {
    LocalJail,
    StateJail,
    StatePrison,
    Life,
    ShockProbation,
}

impl IncarcerationKind {
    pub fn name(&self) -> &'static str {
        match self {
            IncarcerationKind::LocalJail => "local_jail",
            IncarcerationKind::StateJail => "state_jail",
            IncarcerationKind::StatePrison => "state_prison",
            IncarcerationKind::Life => "life",
            IncarcerationKind::ShockProbation => "shock_probation",
        }
    }
}

/// Recorded outcome of an arrest event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Disposition {
    Guilty,
    NotGuilty,
    Pending,
    /// The arrest produced a failure-to-appear charge.
    FtaCharge,
    /// Guilty with a custodial sentence.
    Incarceration(IncarcerationKind),
    /// Outcome not recorded.
    None,
}

impl Disposition {
    /// Counts toward conviction history. FTA charges do not.
    pub fn is_conviction(&self) -> bool {
        matches!(self, Disposition::Guilty | Disposition::Incarceration(_))
    }

    pub fn wire_name(&self) -> String {
        match self {
            Disposition::Guilty => "guilty".to_string(),
            Disposition::NotGuilty => "not_guilty".to_string(),
            Disposition::Pending => "pending".to_string(),
            Disposition::FtaCharge => "fta_charge".to_string(),
            Disposition::Incarceration(kind) => format!("incarceration:{}", kind.name()),
            Disposition::None => "none".to_string(),
        }
    }
}

impl FromStr for Disposition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "" | "none" => Ok(Disposition::None),
            "guilty" => Ok(Disposition::Guilty),
            "not_guilty" => Ok(Disposition::NotGuilty),
            "pending" => Ok(Disposition::Pending),
            "fta_charge" => Ok(Disposition::FtaCharge),
            other => match other.strip_prefix("incarceration:") {
                Some("local_jail") => Ok(Disposition::Incarceration(IncarcerationKind::LocalJail)),
                Some("state_jail") => Ok(Disposition::Incarceration(IncarcerationKind::StateJail)),
                Some("state_prison") => {
                    Ok(Disposition::Incarceration(IncarcerationKind::StatePrison))
                }
                Some("life") => Ok(Disposition::Incarceration(IncarcerationKind::Life)),
                Some("shock_probation") => {
                    Ok(Disposition::Incarceration(IncarcerationKind::ShockProbation))
                }
                _ => Err(Error::data(format!("unknown disposition: {other:?}"))),
            },
        }
    }
}

/// One offense event. Observed events are arrests drawn from the record;
/// unobserved events are synthetic offenses added by augmentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub date: NaiveDate,
    pub category: OffenseKind,
    pub grade: Grade,
    pub disposition: Disposition,
    pub disposition_date: Option<NaiveDate>,
    pub observed: bool,
}

impl Event {
    /// Outcome known and final on or before `at`. Pending or unrecorded
    /// dispositions never resolve; a disposition date in the future of `at`
    /// means the case was still open at `at`.
    pub fn resolved_by(&self, at: NaiveDate) -> bool {
        match self.disposition {
            Disposition::Pending | Disposition::None => false,
            _ => self.disposition_date.is_none_or(|d| d <= at),
        }
    }

    pub fn conviction_by(&self, at: NaiveDate) -> bool {
        self.disposition.is_conviction() && self.resolved_by(at)
    }
}

/// Which events contribute to matching covariates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CovariateSource {
    /// Observed arrests only (official record).
    Arrests,
    /// Observed arrests plus injected unobserved offenses.
    Offenses,
}

impl CovariateSource {
    pub fn name(&self) -> &'static str {
        match self {
            CovariateSource::Arrests => "arrests",
            CovariateSource::Offenses => "offenses",
        }
    }
}

impl fmt::Display for CovariateSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Age band of a demographic cell. The two-way splits come in two cut
/// points because self-report survey tables and record-derived tables band
/// adults differently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AgeBand {
    A18To29,
    A30Plus,
    A18To34,
    A35Plus,
}

impl AgeBand {
    pub fn name(&self) -> &'static str {
        match self {
            AgeBand::A18To29 => "18-29",
            AgeBand::A30Plus => "30+",
            AgeBand::A18To34 => "18-34",
            AgeBand::A35Plus => ">34",
        }
    }
}

impl fmt::Display for AgeBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgeBand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "18-29" => Ok(AgeBand::A18To29),
            "30+" => Ok(AgeBand::A30Plus),
            "18-34" => Ok(AgeBand::A18To34),
            ">34" => Ok(AgeBand::A35Plus),
            v => Err(Error::data(format!("unknown age band: {v:?}"))),
        }
    }
}

/// Where to cut the adult age range in two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgeConvention {
    /// 18-29 vs 30+.
    Cut30,
    /// 18-34 vs >34.
    Cut35,
}

impl AgeConvention {
    /// Ages below 18 clamp into the lowest band.
    pub fn band(&self, age_years: i32) -> AgeBand {
        match self {
            AgeConvention::Cut30 => {
                if age_years < 30 {
                    AgeBand::A18To29
                } else {
                    AgeBand::A30Plus
                }
            }
            AgeConvention::Cut35 => {
                if age_years < 35 {
                    AgeBand::A18To34
                } else {
                    AgeBand::A35Plus
                }
            }
        }
    }

    /// The convention a category's group-rate tables use.
    pub fn for_category(kind: OffenseKind) -> AgeConvention {
        if kind.is_self_report() {
            AgeConvention::Cut35
        } else {
            AgeConvention::Cut30
        }
    }
}

/// Demographic cell: sex, race, ethnicity, age band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupKey {
    pub sex: Sex,
    pub race: Race,
    pub ethnicity: Ethnicity,
    pub band: AgeBand,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}/{}",
            self.sex, self.race, self.ethnicity, self.band
        )
    }
}

/// Completed years of age on `on`. A Feb 29 birthday is treated as Mar 1 in
/// non-leap comparisons, so the birthday "happens" once every year.
pub fn age_at(birth: NaiveDate, on: NaiveDate) -> i32 {
    let (bm, bd) = if birth.month() == 2 && birth.day() == 29 {
        (3, 1)
    } else {
        (birth.month(), birth.day())
    };
    let mut years = on.year() - birth.year();
    if (on.month(), on.day()) < (bm, bd) {
        years -= 1;
    }
    years
}

/// Whole calendar months from `from` to `to` (0 if `to` precedes `from`).
pub fn months_between(from: NaiveDate, to: NaiveDate) -> u32 {
    if to < from {
        return 0;
    }
    let mut months = (to.year() - from.year()) * 12 + to.month() as i32 - from.month() as i32;
    if to.day() < from.day() {
        months -= 1;
    }
    months.max(0) as u32
}

/// Criminal-history features at the scoring moment, extracted once and
/// shared by all four instruments. The scoring moment is the date of the
/// current event; "prior" means strictly before that date; only observed
/// events count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistorySummary {
    pub sex: Sex,
    pub age_years: i32,
    pub current_category: OffenseKind,
    pub current_violent: bool,
    pub current_felony: bool,
    /// Any earlier charge still unresolved at the scoring moment.
    pub pending_charge: bool,
    pub prior_misdemeanor_convictions: u32,
    pub prior_felony_convictions: u32,
    pub prior_violent_convictions: u32,
    pub prior_drug_convictions: u32,
    /// Failure-to-appear charges in the two years before the scoring moment.
    pub prior_fta_recent: u32,
    pub prior_fta_total: u32,
    pub prior_incarceration: bool,
    pub prior_arrests: u32,
    /// Months from first observed arrest to the scoring moment.
    pub career_months: u32,
}

impl HistorySummary {
    pub fn prior_convictions_total(&self) -> u32 {
        self.prior_misdemeanor_convictions + self.prior_felony_convictions
    }
}

/// Two calendar years before `date`, Feb 29 mapped to Mar 1.
fn two_years_before(date: NaiveDate) -> NaiveDate {
    let year = date.year() - 2;
    NaiveDate::from_ymd_opt(year, date.month(), date.day())
        .unwrap_or_else(|| NaiveDate::from_ymd_opt(year, 3, 1).expect("valid date"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Person {
    pub id: String,
    pub birth_date: NaiveDate,
    pub sex: Sex,
    pub race: Race,
    pub ethnicity: Ethnicity,
    /// Sorted by date; ties keep insertion order.
    pub events: Vec<Event>,
}

impl Person {
    pub fn observed_events(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.observed)
    }

    /// Insert keeping date order; equal dates go after existing ones.
    pub fn add_event(&mut self, event: Event) {
        let idx = self.events.partition_point(|e| e.date <= event.date);
        self.events.insert(idx, event);
    }

    pub fn age_at(&self, on: NaiveDate) -> i32 {
        age_at(self.birth_date, on)
    }

    /// Age band in `year`, measured at July 1.
    pub fn band_at_year(&self, year: i32, convention: AgeConvention) -> AgeBand {
        let midpoint = NaiveDate::from_ymd_opt(year, 7, 1).expect("valid date");
        convention.band(self.age_at(midpoint))
    }

    pub fn group_key(&self, year: i32, convention: AgeConvention) -> GroupKey {
        GroupKey {
            sex: self.sex,
            race: self.race,
            ethnicity: self.ethnicity,
            band: self.band_at_year(year, convention),
        }
    }

    /// Observed arrests of `category` with dates in `[from_year, to_year]`.
    pub fn observed_in_window(&self, category: OffenseKind, from_year: i32, to_year: i32) -> u32 {
        self.observed_events()
            .filter(|e| {
                e.category == category && e.date.year() >= from_year && e.date.year() <= to_year
            })
            .count() as u32
    }

    /// Observed arrests of `category` over the whole record.
    pub fn observed_count(&self, category: OffenseKind) -> u32 {
        self.observed_events()
            .filter(|e| e.category == category)
            .count() as u32
    }

    /// Per-category event counts up to and including `reference`.
    pub fn category_counts(
        &self,
        reference: NaiveDate,
        source: CovariateSource,
    ) -> BTreeMap<OffenseKind, u32> {
        let mut counts = BTreeMap::new();
        for event in &self.events {
            if event.date > reference {
                continue;
            }
            if source == CovariateSource::Arrests && !event.observed {
                continue;
            }
            *counts.entry(event.category).or_insert(0) += 1;
        }
        counts
    }

    /// History at the latest observed event strictly before `reference`.
    /// `None` when the person has no such event (nothing to score).
    pub fn history_at(&self, reference: NaiveDate, taxonomy: &Taxonomy) -> Result<Option<HistorySummary>> {
        let current = match self
            .observed_events()
            .filter(|e| e.date < reference)
            .last()
        {
            Some(e) => e.clone(),
            None => return Ok(None),
        };
        let at = current.date;
        let window_start = two_years_before(at);

        let mut summary = HistorySummary {
            sex: self.sex,
            age_years: self.age_at(at),
            current_category: current.category,
            current_violent: taxonomy.violent(current.category)?,
            current_felony: current.grade == Grade::Felony,
            pending_charge: false,
            prior_misdemeanor_convictions: 0,
            prior_felony_convictions: 0,
            prior_violent_convictions: 0,
            prior_drug_convictions: 0,
            prior_fta_recent: 0,
            prior_fta_total: 0,
            prior_incarceration: false,
            prior_arrests: 0,
            career_months: 0,
        };

        let mut first_arrest = at;
        for event in self.observed_events() {
            if event.date >= at {
                continue;
            }
            first_arrest = first_arrest.min(event.date);
            summary.prior_arrests += 1;
            if !event.resolved_by(at) {
                summary.pending_charge = true;
            }
            if event.conviction_by(at) {
                match event.grade {
                    Grade::Felony => summary.prior_felony_convictions += 1,
                    Grade::Misdemeanor => summary.prior_misdemeanor_convictions += 1,
                }
                if taxonomy.violent(event.category)? {
                    summary.prior_violent_convictions += 1;
                }
                if matches!(event.category, OffenseKind::DrugUse | OffenseKind::DrugSell) {
                    summary.prior_drug_convictions += 1;
                }
                if matches!(event.disposition, Disposition::Incarceration(_)) {
                    summary.prior_incarceration = true;
                }
            }
            if event.disposition == Disposition::FtaCharge {
                summary.prior_fta_total += 1;
                if event.date >= window_start {
                    summary.prior_fta_recent += 1;
                }
            }
        }
        summary.career_months = months_between(first_arrest, at);
        Ok(Some(summary))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Cohort {
    /// Sorted by person id.
    pub persons: Vec<Person>,
}

impl Cohort {
    pub fn len(&self) -> usize {
        self.persons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.persons.is_empty()
    }

    pub fn from_persons(mut persons: Vec<Person>) -> Self {
        persons.sort_by(|a, b| a.id.cmp(&b.id));
        for person in &mut persons {
            person.events.sort_by_key(|e| e.date);
        }
        Cohort { persons }
    }

    pub fn read_csv<R: Read>(reader: R, taxonomy: &Taxonomy) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
        let header = csv.headers().map_err(|e| Error::data(format!("cohort header: {e}")))?.clone();
        let expected_min = &COHORT_HEADER[..10];
        let got: Vec<&str> = header.iter().collect();
        let ok = got == COHORT_HEADER || got == expected_min;
        if !ok {
            return Err(Error::data(format!(
                "cohort header mismatch: expected {:?} (observed column optional), got {:?}",
                COHORT_HEADER, got
            )));
        }
        let has_observed = got.len() == 11;

        let mut persons: BTreeMap<String, Person> = BTreeMap::new();
        let mut order: Vec<String> = Vec::new();
        for (idx, record) in csv.records().enumerate() {
            let row = idx + 2;
            let record = record.map_err(|e| Error::data(format!("cohort row {row}: {e}")))?;
            let field = |i: usize| record.get(i).unwrap_or("").trim();

            let id = field(0);
            if id.is_empty() {
                return Err(Error::data(format!("cohort row {row}: empty person_id")));
            }
            let birth_date = parse_date(field(1))
                .map_err(|e| Error::data(format!("cohort row {row}: birth_date: {e}")))?;
            let sex: Sex = field(2)
                .parse()
                .map_err(|e| Error::data(format!("cohort row {row}: {e}")))?;
            let race: Race = field(3)
                .parse()
                .map_err(|e| Error::data(format!("cohort row {row}: {e}")))?;
            let ethnicity: Ethnicity = field(4)
                .parse()
                .map_err(|e| Error::data(format!("cohort row {row}: {e}")))?;
            let offense_date = parse_date(field(5))
                .map_err(|e| Error::data(format!("cohort row {row}: offense_date: {e}")))?;
            if offense_date < birth_date {
                return Err(Error::data(format!(
                    "cohort row {row}: offense_date precedes birth_date"
                )));
            }
            let category: OffenseKind = field(6)
                .parse()
                .map_err(|e| Error::data(format!("cohort row {row}: {e}")))?;
            if !taxonomy.contains(category) {
                return Err(Error::data(format!(
                    "cohort row {row}: category {category} not in taxonomy"
                )));
            }
            let grade = match field(7) {
                "" => taxonomy.default_grade(category)?,
                g => g
                    .parse()
                    .map_err(|e| Error::data(format!("cohort row {row}: {e}")))?,
            };
            let disposition: Disposition = field(8)
                .parse()
                .map_err(|e| Error::data(format!("cohort row {row}: {e}")))?;
            let disposition_date = match field(9) {
                "" => None,
                d => Some(
                    parse_date(d)
                        .map_err(|e| Error::data(format!("cohort row {row}: disposition_date: {e}")))?,
                ),
            };
            let observed = if has_observed {
                match field(10) {
                    "" | "1" => true,
                    "0" => false,
                    v => {
                        return Err(Error::data(format!(
                            "cohort row {row}: observed must be 0 or 1, got {v:?}"
                        )))
                    }
                }
            } else {
                true
            };

            let event = Event {
                date: offense_date,
                category,
                grade,
                disposition,
                disposition_date,
                observed,
            };

            match persons.get_mut(id) {
                Some(person) => {
                    if person.birth_date != birth_date
                        || person.sex != sex
                        || person.race != race
                        || person.ethnicity != ethnicity
                    {
                        return Err(Error::data(format!(
                            "cohort row {row}: attributes conflict with earlier rows for person {id}"
                        )));
                    }
                    person.events.push(event);
                }
                None => {
                    order.push(id.to_string());
                    persons.insert(
                        id.to_string(),
                        Person {
                            id: id.to_string(),
                            birth_date,
                            sex,
                            race,
                            ethnicity,
                            events: vec![event],
                        },
                    );
                }
            }
        }

        let mut out: Vec<Person> = persons.into_values().collect();
        for person in &mut out {
            person.events.sort_by_key(|e| e.date);
        }
        Ok(Cohort { persons: out })
    }

    pub fn load(path: &Path, taxonomy: &Taxonomy) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::config(format!("cohort {}: {e}", path.display())))?;
        Cohort::read_csv(std::io::BufReader::new(file), taxonomy)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(COHORT_HEADER)?;
        for person in &self.persons {
            for event in &person.events {
                csv.write_record([
                    person.id.as_str(),
                    &person.birth_date.to_string(),
                    person.sex.name(),
                    person.race.name(),
                    person.ethnicity.name(),
                    &event.date.to_string(),
                    event.category.name(),
                    event.grade.name(),
                    &event.disposition.wire_name(),
                    &event
                        .disposition_date
                        .map(|d| d.to_string())
                        .unwrap_or_default(),
                    if event.observed { "1" } else { "0" },
                ])?;
            }
        }
        csv.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::config(format!("cohort {}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

pub fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|e| Error::data(format!("bad date {s:?}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).expect("valid test date")
    }

    fn event(y: i32, m: u32, d: u32, category: OffenseKind) -> Event {
        Event {
            date: date(y, m, d),
            category,
            grade: Grade::Misdemeanor,
            disposition: Disposition::None,
            disposition_date: None,
            observed: true,
        }
    }

    fn person(id: &str, events: Vec<Event>) -> Person {
        Person {
            id: id.to_string(),
            birth_date: date(1980, 6, 15),
            sex: Sex::Male,
            race: Race::Black,
            ethnicity: Ethnicity::NonHispanic,
            events,
        }
    }

    #[test]
    fn age_counts_completed_years() {
        let birth = date(1980, 6, 15);
        assert_eq!(age_at(birth, date(2000, 6, 14)), 19);
        assert_eq!(age_at(birth, date(2000, 6, 15)), 20);
        assert_eq!(age_at(birth, date(2000, 6, 16)), 20);
    }

    #[test]
    fn leap_day_birthday_falls_on_march_first() {
        let birth = date(1980, 2, 29);
        assert_eq!(age_at(birth, date(1999, 2, 28)), 18);
        assert_eq!(age_at(birth, date(1999, 3, 1)), 19);
        assert_eq!(age_at(birth, date(2000, 2, 29)), 19);
        assert_eq!(age_at(birth, date(2000, 3, 1)), 20);
    }

    #[test]
    fn months_between_counts_whole_months() {
        assert_eq!(months_between(date(2000, 1, 15), date(2000, 1, 15)), 0);
        assert_eq!(months_between(date(2000, 1, 15), date(2000, 2, 14)), 0);
        assert_eq!(months_between(date(2000, 1, 15), date(2000, 2, 15)), 1);
        assert_eq!(months_between(date(2000, 1, 15), date(2002, 1, 15)), 24);
        assert_eq!(months_between(date(2002, 1, 15), date(2000, 1, 15)), 0);
    }

    #[test]
    fn band_conventions_cut_at_30_and_35() {
        assert_eq!(AgeConvention::Cut30.band(29), AgeBand::A18To29);
        assert_eq!(AgeConvention::Cut30.band(30), AgeBand::A30Plus);
        assert_eq!(AgeConvention::Cut35.band(34), AgeBand::A18To34);
        assert_eq!(AgeConvention::Cut35.band(35), AgeBand::A35Plus);
        assert_eq!(AgeConvention::Cut30.band(16), AgeBand::A18To29);
    }

    #[test]
    fn disposition_wire_round_trip() {
        let all = [
            Disposition::Guilty,
            Disposition::NotGuilty,
            Disposition::Pending,
            Disposition::FtaCharge,
            Disposition::Incarceration(IncarcerationKind::StatePrison),
            Disposition::Incarceration(IncarcerationKind::ShockProbation),
            Disposition::None,
        ];
        for d in all {
            let parsed: Disposition = d.wire_name().parse().expect("round trip");
            assert_eq!(parsed, d);
        }
        assert_eq!("".parse::<Disposition>().expect("empty"), Disposition::None);
    }

    #[test]
    fn history_counts_convictions_and_ftas() {
        let mut p = person("p1", vec![]);
        p.add_event(Event {
            grade: Grade::Felony,
            disposition: Disposition::Incarceration(IncarcerationKind::StatePrison),
            disposition_date: Some(date(2000, 9, 1)),
            ..event(2000, 3, 1, OffenseKind::Robbery)
        });
        p.add_event(Event {
            disposition: Disposition::FtaCharge,
            ..event(2004, 1, 10, OffenseKind::Property)
        });
        p.add_event(Event {
            disposition: Disposition::Guilty,
            disposition_date: Some(date(2005, 8, 1)),
            ..event(2005, 2, 1, OffenseKind::DrugUse)
        });
        p.add_event(event(2005, 6, 1, OffenseKind::SimpleAssault));

        let taxonomy = Taxonomy::builtin();
        let h = p
            .history_at(date(2006, 1, 1), &taxonomy)
            .expect("history")
            .expect("scoreable");

        assert_eq!(h.current_category, OffenseKind::SimpleAssault);
        assert!(h.current_violent);
        assert!(!h.current_felony);
        assert_eq!(h.age_years, 24);
        assert_eq!(h.prior_arrests, 3);
        assert_eq!(h.prior_felony_convictions, 1);
        assert_eq!(h.prior_violent_convictions, 1);
        assert!(h.prior_incarceration);
        assert_eq!(h.prior_fta_total, 1);
        assert_eq!(h.prior_fta_recent, 1);
        assert_eq!(h.career_months, 63);
        // drug conviction resolved 2005-08-01, after the 2005-06-01 scoring
        // moment, so it was still pending then
        assert_eq!(h.prior_misdemeanor_convictions, 0);
        assert_eq!(h.prior_drug_convictions, 0);
        assert!(h.pending_charge);
    }

    #[test]
    fn fta_outside_two_year_window_is_not_recent() {
        let mut p = person("p1", vec![]);
        p.add_event(Event {
            disposition: Disposition::FtaCharge,
            ..event(2001, 1, 1, OffenseKind::Property)
        });
        p.add_event(event(2005, 6, 1, OffenseKind::Property));
        let taxonomy = Taxonomy::builtin();
        let h = p
            .history_at(date(2006, 1, 1), &taxonomy)
            .expect("history")
            .expect("scoreable");
        assert_eq!(h.prior_fta_total, 1);
        assert_eq!(h.prior_fta_recent, 0);
    }

    #[test]
    fn unobserved_events_do_not_reach_history() {
        let mut p = person("p1", vec![]);
        p.add_event(Event {
            observed: false,
            ..event(2004, 1, 1, OffenseKind::Robbery)
        });
        p.add_event(event(2005, 6, 1, OffenseKind::Property));
        let taxonomy = Taxonomy::builtin();
        let h = p
            .history_at(date(2006, 1, 1), &taxonomy)
            .expect("history")
            .expect("scoreable");
        assert_eq!(h.prior_arrests, 0);
        let counts = p.category_counts(date(2006, 1, 1), CovariateSource::Offenses);
        assert_eq!(counts.get(&OffenseKind::Robbery), Some(&1));
        let counts = p.category_counts(date(2006, 1, 1), CovariateSource::Arrests);
        assert_eq!(counts.get(&OffenseKind::Robbery), None);
    }

    #[test]
    fn no_event_before_reference_means_unscored() {
        let p = person("p1", vec![event(2007, 1, 1, OffenseKind::Property)]);
        let taxonomy = Taxonomy::builtin();
        assert!(p
            .history_at(date(2006, 1, 1), &taxonomy)
            .expect("history")
            .is_none());
    }

    #[test]
    fn csv_round_trip_preserves_cohort() {
        let taxonomy = Taxonomy::builtin();
        let mut p = person("b7", vec![]);
        p.add_event(Event {
            grade: Grade::Felony,
            disposition: Disposition::Guilty,
            disposition_date: Some(date(2001, 2, 3)),
            ..event(2000, 3, 1, OffenseKind::DrugSell)
        });
        p.add_event(Event {
            observed: false,
            ..event(2002, 5, 1, OffenseKind::Property)
        });
        let cohort = Cohort::from_persons(vec![p, person("a1", vec![event(1999, 1, 1, OffenseKind::Dui)])]);

        let mut buf = Vec::new();
        cohort.write_csv(&mut buf).expect("write");
        let back = Cohort::read_csv(buf.as_slice(), &taxonomy).expect("read");
        assert_eq!(back.persons, cohort.persons);
        assert_eq!(back.persons[0].id, "a1");
    }

    #[test]
    fn missing_grade_takes_taxonomy_default() {
        let taxonomy = Taxonomy::builtin();
        let csv = "person_id,birth_date,sex,race,ethnicity,offense_date,category,grade,disposition,disposition_date\n\
                   p1,1980-06-15,male,black,non_hispanic,2000-01-01,robbery,,,\n";
        let cohort = Cohort::read_csv(csv.as_bytes(), &taxonomy).expect("read");
        assert_eq!(cohort.persons[0].events[0].grade, Grade::Felony);
        assert!(cohort.persons[0].events[0].observed);
    }

    #[test]
    fn conflicting_attributes_are_rejected_with_row_number() {
        let taxonomy = Taxonomy::builtin();
        let csv = "person_id,birth_date,sex,race,ethnicity,offense_date,category,grade,disposition,disposition_date,observed\n\
                   p1,1980-06-15,male,black,non_hispanic,2000-01-01,dui,,,,1\n\
                   p1,1981-06-15,male,black,non_hispanic,2001-01-01,dui,,,,1\n";
        let err = Cohort::read_csv(csv.as_bytes(), &taxonomy).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 3"), "got {msg}");
    }

    #[test]
    fn offense_before_birth_is_rejected() {
        let taxonomy = Taxonomy::builtin();
        let csv = "person_id,birth_date,sex,race,ethnicity,offense_date,category,grade,disposition,disposition_date,observed\n\
                   p1,1980-06-15,male,black,non_hispanic,1979-01-01,dui,,,,1\n";
        assert!(Cohort::read_csv(csv.as_bytes(), &taxonomy).is_err());
    }
}
