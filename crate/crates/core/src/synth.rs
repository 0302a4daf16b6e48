//! Synthetic cohort generation with known ground truth.
//!
//! A population spec lists demographic groups with per-category offense
//! intensities, per-offense arrest probabilities, and disposition rates.
//! Offenses arrive per person-year as Poisson counts; each offense is
//! recorded as an arrest with its category's arrest probability, and
//! arrests resolve 183 days later. People whose record stays empty are
//! dropped, as they would be in real arrest records. The generator also
//! returns the arrest-rate table it drew from, so downstream estimation can
//! run against exact truth.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cohort::{Cohort, Disposition, Ethnicity, Event, IncarcerationKind, Person, Race, Sex};
use crate::error::Error;
use crate::rates::{resolve_group_parts, RateTable};
use crate::seed;
use crate::taxonomy::{OffenseKind, Taxonomy};
use crate::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupSpec {
    pub label: String,
    pub sex: Sex,
    pub race: Race,
    pub ethnicity: Ethnicity,
    pub size: u32,
    /// Inclusive age bounds at the end year.
    pub age_range: [u32; 2],
    /// Offenses per person-year by category.
    pub intensities: BTreeMap<OffenseKind, f64>,
    /// Chance an offense is recorded as an arrest, by category.
    pub arrest_rates: BTreeMap<OffenseKind, f64>,
    /// Chance an arrest convicts; the rest acquit.
    #[serde(default)]
    pub conviction_rate: f64,
    /// Chance an arrest becomes a failure-to-appear charge instead.
    #[serde(default)]
    pub fta_rate: f64,
    /// Chance a conviction carries a custodial sentence.
    #[serde(default)]
    pub incarceration_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub start_year: i32,
    pub end_year: i32,
    pub reference: NaiveDate,
    pub groups: Vec<GroupSpec>,
}

impl PopulationSpec {
    pub fn from_json(json: &str) -> Result<Self> {
        let spec: PopulationSpec = serde_json::from_str(json)
            .map_err(|e| Error::config(format!("population spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("population spec {}: {e}", path.display())))?;
        PopulationSpec::from_json(&json)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("population spec serialization cannot fail")
    }

    pub fn validate(&self) -> Result<()> {
        if self.end_year < self.start_year {
            return Err(Error::config("population spec: end_year precedes start_year"));
        }
        if self.groups.is_empty() {
            return Err(Error::config("population spec: no groups"));
        }
        let mut labels: Vec<&str> = self.groups.iter().map(|g| g.label.as_str()).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != self.groups.len() {
            return Err(Error::config("population spec: duplicate group labels"));
        }
        for g in &self.groups {
            if g.label.is_empty() {
                return Err(Error::config("population spec: empty group label"));
            }
            if g.size == 0 {
                return Err(Error::config(format!("group {}: size must be positive", g.label)));
            }
            if g.age_range[0] == 0 || g.age_range[0] > g.age_range[1] {
                return Err(Error::config(format!(
                    "group {}: bad age range {:?}",
                    g.label, g.age_range
                )));
            }
            for (&cat, &rate) in &g.intensities {
                if rate < 0.0 {
                    return Err(Error::config(format!(
                        "group {}: negative intensity for {cat}",
                        g.label
                    )));
                }
                if rate > 0.0 && !g.arrest_rates.contains_key(&cat) {
                    return Err(Error::config(format!(
                        "group {}: no arrest rate for active category {cat}",
                        g.label
                    )));
                }
            }
            for (&cat, &rate) in &g.arrest_rates {
                if !(rate > 0.0 && rate <= 1.0) {
                    return Err(Error::config(format!(
                        "group {}: arrest rate for {cat} must lie in (0, 1]",
                        g.label
                    )));
                }
            }
            for (name, p) in [
                ("conviction_rate", g.conviction_rate),
                ("fta_rate", g.fta_rate),
                ("incarceration_rate", g.incarceration_rate),
            ] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::config(format!(
                        "group {}: {name} must lie in [0, 1]",
                        g.label
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Poisson draw by inversion: walk the pmf recurrence until the cumulative
/// mass passes a uniform draw. One `exp` per draw, no platform-dependent
/// special functions.
fn poisson(rng: &mut impl Rng, lambda: f64) -> u32 {
    if lambda <= 0.0 {
        return 0;
    }
    let u: f64 = rng.random();
    let mut p = (-lambda).exp();
    let mut cdf = p;
    let mut k = 0u32;
    while u > cdf && k < 10_000 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k
}

fn random_day_in_year(rng: &mut impl Rng, year: i32) -> NaiveDate {
    let days = if NaiveDate::from_ymd_opt(year, 12, 31)
        .expect("valid date")
        .ordinal()
        == 366
    {
        366
    } else {
        365
    };
    NaiveDate::from_yo_opt(year, 1 + rng.random_range(0..days)).expect("valid ordinal")
}

fn draw_disposition(rng: &mut impl Rng, group: &GroupSpec, date: NaiveDate) -> Event {
    // caller fills category and grade
    let resolved = date.checked_add_days(Days::new(183)).expect("date in range");
    let disposition = if rng.random::<f64>() < group.fta_rate {
        Disposition::FtaCharge
    } else if rng.random::<f64>() < group.conviction_rate {
        if rng.random::<f64>() < group.incarceration_rate {
            Disposition::Incarceration(IncarcerationKind::StatePrison)
        } else {
            Disposition::Guilty
        }
    } else {
        Disposition::NotGuilty
    };
    Event {
        date,
        category: OffenseKind::Other,
        grade: crate::taxonomy::Grade::Misdemeanor,
        disposition,
        disposition_date: Some(resolved),
        observed: true,
    }
}

#[derive(Debug)]
pub struct SynthOutput {
    pub cohort: Cohort,
    /// The exact arrest rates generation used, keyed like any rate table.
    pub arrest_rates: RateTable,
}

/// Generate a cohort. With `keep_unobserved`, offenses that never became
/// arrests stay in the data as unobserved events (ground-truth mode);
/// otherwise only arrests survive. People with no surviving events are
/// dropped either way.
pub fn generate(
    spec: &PopulationSpec,
    taxonomy: &Taxonomy,
    keep_unobserved: bool,
    master_seed: u64,
) -> Result<SynthOutput> {
    spec.validate()?;
    for group in &spec.groups {
        for &cat in group.intensities.keys() {
            if !taxonomy.contains(cat) {
                return Err(Error::config(format!(
                    "group {}: category {cat} not in taxonomy",
                    group.label
                )));
            }
        }
    }

    let mut arrest_rates = RateTable::new();
    for group in &spec.groups {
        for (&cat, &rate) in &group.arrest_rates {
            // one representative age per band of the category's convention
            for age in [25, 40] {
                let key = resolve_group_parts(group.sex, group.race, group.ethnicity, age, cat);
                if let Some(existing) = arrest_rates.get(key, cat) {
                    if existing != rate {
                        return Err(Error::config(format!(
                            "conflicting arrest rates for cell {key} {cat}: {existing} vs {rate}"
                        )));
                    }
                }
                arrest_rates.insert_given(key, cat, rate);
            }
        }
    }

    let mut persons = Vec::new();
    for group in &spec.groups {
        let width = group.age_range[1] - group.age_range[0] + 1;
        for i in 0..group.size {
            let mut rng = seed::rng(master_seed, &format!("synth/{}/{i}", group.label));
            let age_at_end = group.age_range[0] + rng.random_range(0..width);
            let birth_year = spec.end_year - age_at_end as i32;
            let birth_date = random_day_in_year(&mut rng, birth_year);

            let mut events = Vec::new();
            for year in spec.start_year..=spec.end_year {
                for (&category, &intensity) in &group.intensities {
                    let arrest_rate = match group.arrest_rates.get(&category) {
                        Some(&r) => r,
                        None => continue,
                    };
                    for _ in 0..poisson(&mut rng, intensity) {
                        let mut date = random_day_in_year(&mut rng, year);
                        if date < birth_date {
                            date = birth_date;
                        }
                        let observed = rng.random::<f64>() < arrest_rate;
                        if observed {
                            let mut event = draw_disposition(&mut rng, group, date);
                            event.category = category;
                            event.grade = taxonomy.default_grade(category)?;
                            events.push(event);
                        } else if keep_unobserved {
                            events.push(Event {
                                date,
                                category,
                                grade: taxonomy.default_grade(category)?,
                                disposition: Disposition::None,
                                disposition_date: None,
                                observed: false,
                            });
                        }
                    }
                }
            }
            if events.is_empty() {
                continue;
            }
            persons.push(Person {
                id: format!("{}-{i:05}", group.label),
                birth_date,
                sex: group.sex,
                race: group.race,
                ethnicity: group.ethnicity,
                events,
            });
        }
    }

    Ok(SynthOutput {
        cohort: Cohort::from_persons(persons),
        arrest_rates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basic_spec() -> PopulationSpec {
        PopulationSpec {
            start_year: 2000,
            end_year: 2009,
            reference: NaiveDate::from_ymd_opt(2009, 12, 31).expect("valid date"),
            groups: vec![GroupSpec {
                label: "g1".to_string(),
                sex: Sex::Male,
                race: Race::Black,
                ethnicity: Ethnicity::NonHispanic,
                size: 200,
                age_range: [25, 45],
                intensities: [(OffenseKind::Property, 0.3)].into_iter().collect(),
                arrest_rates: [(OffenseKind::Property, 0.5)].into_iter().collect(),
                conviction_rate: 0.5,
                fta_rate: 0.0,
                incarceration_rate: 0.0,
            }],
        }
    }

    #[test]
    fn poisson_matches_its_mean_and_is_seeded() {
        let mut rng = seed::rng(3, "poisson-test");
        let n = 20_000;
        let lambda = 1.7;
        let total: u64 = (0..n).map(|_| poisson(&mut rng, lambda) as u64).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - lambda).abs() < 0.05, "mean {mean}");

        let mut a = seed::rng(9, "poisson-det");
        let mut b = seed::rng(9, "poisson-det");
        let xs: Vec<u32> = (0..50).map(|_| poisson(&mut a, 2.5)).collect();
        let ys: Vec<u32> = (0..50).map(|_| poisson(&mut b, 2.5)).collect();
        assert_eq!(xs, ys);
        assert_eq!(poisson(&mut a, 0.0), 0);
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let spec = basic_spec();
        let taxonomy = Taxonomy::builtin();
        let a = generate(&spec, &taxonomy, false, 42).expect("generate");
        let b = generate(&spec, &taxonomy, false, 42).expect("generate");
        assert_eq!(a.cohort.persons, b.cohort.persons);
        let c = generate(&spec, &taxonomy, false, 43).expect("generate");
        assert_ne!(a.cohort.persons, c.cohort.persons);
    }

    #[test]
    fn arrest_thinning_hits_the_configured_rate() {
        let mut spec = basic_spec();
        spec.groups[0].size = 2000;
        let taxonomy = Taxonomy::builtin();
        let out = generate(&spec, &taxonomy, true, 7).expect("generate");
        let (mut observed, mut total) = (0u64, 0u64);
        for p in &out.cohort.persons {
            for e in &p.events {
                total += 1;
                if e.observed {
                    observed += 1;
                }
            }
        }
        let share = observed as f64 / total as f64;
        assert!((share - 0.5).abs() < 0.02, "observed share {share}");
        // expected offense volume: size * years * intensity
        let expected = 2000.0 * 10.0 * 0.3;
        assert!((total as f64 - expected).abs() < 0.05 * expected, "total {total}");
    }

    #[test]
    fn records_mode_keeps_only_arrests_and_arrested_people() {
        let out = generate(&basic_spec(), &Taxonomy::builtin(), false, 11).expect("generate");
        assert!(!out.cohort.is_empty());
        for p in &out.cohort.persons {
            assert!(!p.events.is_empty());
            for e in &p.events {
                assert!(e.observed);
                assert!(e.disposition != Disposition::None);
                let resolved = e.disposition_date.expect("synthetic arrests resolve");
                assert_eq!(resolved, e.date + Days::new(183));
            }
        }
    }

    #[test]
    fn ages_at_end_year_stay_in_range() {
        let out = generate(&basic_spec(), &Taxonomy::builtin(), false, 5).expect("generate");
        let end = NaiveDate::from_ymd_opt(2009, 12, 31).expect("valid date");
        for p in &out.cohort.persons {
            let age = p.age_at(end);
            assert!((24..=45).contains(&age), "age {age}");
        }
    }

    #[test]
    fn emitted_rate_table_covers_both_bands() {
        let out = generate(&basic_spec(), &Taxonomy::builtin(), false, 5).expect("generate");
        assert_eq!(out.arrest_rates.len(), 2);
        for ((key, cat), cell) in out.arrest_rates.iter() {
            assert_eq!(*cat, OffenseKind::Property);
            assert_eq!(cell.value, 0.5);
            assert_eq!(key.race, Race::Black);
        }
    }

    #[test]
    fn conflicting_group_rates_for_one_cell_are_rejected() {
        let mut spec = basic_spec();
        let mut second = spec.groups[0].clone();
        second.label = "g2".to_string();
        second.arrest_rates = [(OffenseKind::Property, 0.9)].into_iter().collect();
        spec.groups.push(second);
        let err = generate(&spec, &Taxonomy::builtin(), false, 5).unwrap_err();
        assert!(err.to_string().contains("conflicting arrest rates"), "{err}");
    }

    #[test]
    fn spec_json_round_trips_and_validates() {
        let spec = basic_spec();
        let back = PopulationSpec::from_json(&spec.to_json()).expect("round trip");
        assert_eq!(back.groups[0].label, "g1");
        assert_eq!(back.groups[0].conviction_rate, 0.5);

        let mut bad = basic_spec();
        bad.groups[0].arrest_rates.clear();
        assert!(bad.validate().is_err());
        let mut bad = basic_spec();
        bad.groups[0].age_range = [40, 20];
        assert!(bad.validate().is_err());
    }
}
