//! Semi-synthetic record augmentation.
//!
//! For each offense category and demographic cell, the observed arrest
//! count and the cell's arrest rate give an estimate of total offending;
//! the gap between that estimate (scaled by the prevalence knob) and the
//! observed count is injected back into the cohort as unobserved offense
//! events. Events land on cohort members at random, weighted by a uniform
//! share plus a multiple of each member's own arrest count, so enforcement
//! contact pulls synthetic offenses toward the people already in the
//! record.
//!
//! Injection walks calendar time with a rolling window: the first batch
//! covers `[start, start + delta_t]` and spreads its full estimate
//! round-robin across those years; each later target year `y` re-estimates
//! over `[y - delta_t, y]` and injects one year's share, dated `y`. Cell
//! membership, rates, and the random stream are resolved at the batch's end
//! year.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::cohort::{Cohort, Disposition, Event, GroupKey};
use crate::error::Error;
use crate::rates::{resolve_group, RateTable};
use crate::seed;
use crate::taxonomy::{OffenseKind, Taxonomy};
use crate::Result;

/// Round half away from zero toward positive infinity, floored at zero.
pub fn round_half_up_nonneg(x: f64) -> u64 {
    let v = (x + 0.5).floor();
    if v <= 0.0 {
        0
    } else {
        v as u64
    }
}

/// Prevalence knob clamped to its meaningful range: at the arrest rate the
/// unobserved estimate vanishes, at one the full dark figure is used.
pub fn clamp_scale(lambda: f64, arrest_rate: f64) -> f64 {
    lambda.clamp(arrest_rate.min(1.0), 1.0)
}

/// Estimated unobserved offenses for a cell: `lambda * A / AR - A`,
/// rounded half up, never negative. `arrests` is the observed arrest count
/// `A`; `arrest_rate` must be in `(0, 1]`; `lambda` should already be
/// clamped.
pub fn unobserved_count(arrests: f64, arrest_rate: f64, lambda: f64) -> u64 {
    scaled_unobserved(arrests, arrest_rate, lambda, 1.0)
}

/// Same estimate with the gap scaled by a sensitivity multiplier before
/// rounding.
pub fn scaled_unobserved(arrests: f64, arrest_rate: f64, lambda: f64, multiplier: f64) -> u64 {
    round_half_up_nonneg(multiplier * (lambda * arrests / arrest_rate - arrests))
}

/// Normalized assignment probabilities over cell members: a uniform share
/// of the unobserved count plus `omega` times each member's own arrest
/// count.
pub fn person_weights(unobserved: u64, omega: f64, arrests: &[u32]) -> Vec<f64> {
    let n = arrests.len() as f64;
    let base = unobserved as f64 / n;
    let raw: Vec<f64> = arrests.iter().map(|&a| base + omega * a as f64).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// Where the prevalence knob comes from.
#[derive(Debug, Clone, Copy)]
pub enum LambdaSource<'a> {
    /// One value for every cell (still clamped per cell).
    Fixed(f64),
    /// Per-cell values from an offense-prevalence table.
    Table(&'a RateTable),
}

#[derive(Debug, Clone)]
pub struct AugmentConfig {
    /// Rolling window reaches this many years back from the target year.
    pub delta_t: u32,
    pub start_year: i32,
    pub end_year: i32,
    /// Weight of a member's own arrests in assignment probabilities.
    pub omega: f64,
    /// Sensitivity multiplier on the unobserved estimate.
    pub multiplier: f64,
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta_t == 0 {
            return Err(Error::config("augment: delta_t must be at least 1"));
        }
        if self.end_year < self.start_year + self.delta_t as i32 {
            return Err(Error::config(format!(
                "augment: year range {}..={} shorter than the {}-year window",
                self.start_year, self.end_year, self.delta_t
            )));
        }
        if self.omega < 0.0 {
            return Err(Error::config("augment: omega must be nonnegative"));
        }
        if self.multiplier <= 0.0 {
            return Err(Error::config("augment: multiplier must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Batch {
    window_start: i32,
    window_end: i32,
    /// True for the opening batch, which spreads its full estimate across
    /// the window instead of injecting one year's share.
    spread: bool,
}

fn batches(config: &AugmentConfig) -> Vec<Batch> {
    let first_end = config.start_year + config.delta_t as i32;
    let mut out = vec![Batch {
        window_start: config.start_year,
        window_end: first_end,
        spread: true,
    }];
    for y in (first_end + 1)..=config.end_year {
        out.push(Batch {
            window_start: y - config.delta_t as i32,
            window_end: y,
            spread: false,
        });
    }
    out
}

/// One cell-batch estimate, kept for diagnostics.
#[derive(Debug, Clone)]
pub struct CellReport {
    pub category: OffenseKind,
    pub group: GroupKey,
    pub window_start: i32,
    pub window_end: i32,
    pub arrests: u64,
    pub lambda_raw: f64,
    pub lambda_used: f64,
    pub arrest_rate: f64,
    pub window_unobserved: u64,
    pub injected: u64,
}

#[derive(Debug, Clone, Default)]
pub struct AugmentReport {
    pub cells: Vec<CellReport>,
    /// Cell-batches with no usable rate, left untouched.
    pub skipped: Vec<(OffenseKind, GroupKey, i32, String)>,
    pub total_injected: u64,
}

pub struct AugmentOutcome {
    pub cohort: Cohort,
    pub report: AugmentReport,
}

/// Inject unobserved offenses for the given categories. The input cohort's
/// observed events drive every estimate; earlier injections never feed back
/// into later batches.
pub fn augment(
    cohort: &Cohort,
    lambda: LambdaSource,
    arrest_rates: &RateTable,
    categories: &[OffenseKind],
    config: &AugmentConfig,
    taxonomy: &Taxonomy,
    master_seed: u64,
) -> Result<AugmentOutcome> {
    config.validate()?;
    let mut report = AugmentReport::default();
    let mut additions: Vec<(usize, Event)> = Vec::new();

    for &category in categories {
        let grade = taxonomy.default_grade(category)?;
        for batch in batches(config) {
            let band_year = batch.window_end;
            let mut groups: BTreeMap<GroupKey, Vec<usize>> = BTreeMap::new();
            for (idx, person) in cohort.persons.iter().enumerate() {
                groups
                    .entry(resolve_group(person, band_year, category))
                    .or_default()
                    .push(idx);
            }

            for (group, members) in groups {
                let arrest_rate = match arrest_rates.get(group, category) {
                    Some(v) if v > 0.0 && v <= 1.0 => v,
                    Some(v) => {
                        return Err(Error::data(format!(
                            "arrest rate {v} for {group} {category} outside (0, 1]"
                        )))
                    }
                    None => {
                        report.skipped.push((
                            category,
                            group,
                            band_year,
                            "no arrest rate cell".to_string(),
                        ));
                        continue;
                    }
                };
                let lambda_raw = match lambda {
                    LambdaSource::Fixed(v) => v,
                    LambdaSource::Table(table) => match table.get(group, category) {
                        Some(v) => v,
                        None => {
                            report.skipped.push((
                                category,
                                group,
                                band_year,
                                "no prevalence cell".to_string(),
                            ));
                            continue;
                        }
                    },
                };
                let lambda_used = clamp_scale(lambda_raw, arrest_rate);

                let arrests: Vec<u32> = members
                    .iter()
                    .map(|&i| {
                        cohort.persons[i].observed_in_window(
                            category,
                            batch.window_start,
                            batch.window_end,
                        )
                    })
                    .collect();
                let total_arrests: u64 = arrests.iter().map(|&a| a as u64).sum();
                let window_unobserved = scaled_unobserved(
                    total_arrests as f64,
                    arrest_rate,
                    lambda_used,
                    config.multiplier,
                );
                let injected = if batch.spread {
                    window_unobserved
                } else {
                    round_half_up_nonneg(window_unobserved as f64 / config.delta_t as f64)
                };

                report.cells.push(CellReport {
                    category,
                    group,
                    window_start: batch.window_start,
                    window_end: batch.window_end,
                    arrests: total_arrests,
                    lambda_raw,
                    lambda_used,
                    arrest_rate,
                    window_unobserved,
                    injected,
                });
                if injected == 0 {
                    continue;
                }
                report.total_injected += injected;

                let weights = person_weights(window_unobserved.max(1), config.omega, &arrests);
                let dist = WeightedIndex::new(&weights)
                    .map_err(|e| Error::domain(format!("assignment weights: {e}")))?;
                let mut rng = seed::rng(
                    master_seed,
                    &format!("augment/{category}/{group}/{band_year}"),
                );
                let window_len = (batch.window_end - batch.window_start + 1) as u64;
                for k in 0..injected {
                    let year = if batch.spread {
                        batch.window_start + (k % window_len) as i32
                    } else {
                        batch.window_end
                    };
                    let date = NaiveDate::from_ymd_opt(year, 7, 1).expect("valid date");
                    let who = members[dist.sample(&mut rng)];
                    additions.push((
                        who,
                        Event {
                            date,
                            category,
                            grade,
                            disposition: Disposition::None,
                            disposition_date: None,
                            observed: false,
                        },
                    ));
                }
            }
        }
    }

    let mut out = cohort.clone();
    for (idx, event) in additions {
        out.persons[idx].add_event(event);
    }
    Ok(AugmentOutcome { cohort: out, report })
}
