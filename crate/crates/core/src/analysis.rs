//! Disparity estimation: score two sides of a comparison, match them on
//! binned covariates, and average the per-cell score gaps, replicated
//! across seeds when the cohort itself is stochastic.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::cohort::{Cohort, CovariateSource, Ethnicity, Person, Race, Sex};
use crate::error::Error;
use crate::matching::{counts_array, match_and_compare, BinningVariant, MatchResult, MatchUnit};
use crate::scores::{all_normalized, Ogrs3Coefficients, Rai};
use crate::seed;
use crate::taxonomy::Taxonomy;
use crate::Result;

/// Attribute filter; `None` fields match anything.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PersonFilter {
    pub sex: Option<Sex>,
    pub race: Option<Race>,
    pub ethnicity: Option<Ethnicity>,
}

impl PersonFilter {
    pub fn race(race: Race) -> Self {
        PersonFilter {
            race: Some(race),
            ..PersonFilter::default()
        }
    }

    pub fn with_sex(mut self, sex: Sex) -> Self {
        self.sex = Some(sex);
        self
    }

    pub fn matches(&self, person: &Person) -> bool {
        self.sex.is_none_or(|s| s == person.sex)
            && self.race.is_none_or(|r| r == person.race)
            && self.ethnicity.is_none_or(|e| e == person.ethnicity)
    }
}

/// Two sides to compare; the reported gap is side A minus side B.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub name: String,
    pub a: PersonFilter,
    pub b: PersonFilter,
}

impl Comparison {
    pub fn black_vs_white() -> Self {
        Comparison {
            name: "black_vs_white".to_string(),
            a: PersonFilter::race(Race::Black),
            b: PersonFilter::race(Race::White),
        }
    }

    pub fn restricted_to_sex(&self, sex: Sex) -> Self {
        Comparison {
            name: format!("{}_{}", self.name, sex),
            a: self.a.with_sex(sex),
            b: self.b.with_sex(sex),
        }
    }
}

struct ScoredUnit {
    age_years: i32,
    counts: [u32; 9],
    scores: [(Rai, f64); 4],
}

fn scored_units(
    cohort: &Cohort,
    filter: &PersonFilter,
    reference: NaiveDate,
    source: CovariateSource,
    taxonomy: &Taxonomy,
    coefficients: &Ogrs3Coefficients,
) -> Result<(Vec<ScoredUnit>, usize)> {
    let mut units = Vec::new();
    let mut excluded = 0usize;
    for person in cohort.persons.iter().filter(|p| filter.matches(p)) {
        let history = match person.history_at(reference, taxonomy)? {
            Some(h) => h,
            None => {
                excluded += 1;
                continue;
            }
        };
        units.push(ScoredUnit {
            age_years: person.age_at(reference),
            counts: counts_array(&person.category_counts(reference, source)),
            scores: all_normalized(&history, coefficients),
        });
    }
    Ok((units, excluded))
}

/// One cohort, all four instruments over the same cell partition.
#[derive(Debug)]
pub struct CohortComparison {
    pub results: BTreeMap<Rai, MatchResult>,
    /// Persons on each side with nothing to score before the reference.
    pub excluded_a: usize,
    pub excluded_b: usize,
}

pub fn compare_cohort(
    cohort: &Cohort,
    comparison: &Comparison,
    reference: NaiveDate,
    variant: BinningVariant,
    source: CovariateSource,
    taxonomy: &Taxonomy,
    coefficients: &Ogrs3Coefficients,
) -> Result<CohortComparison> {
    let (units_a, excluded_a) =
        scored_units(cohort, &comparison.a, reference, source, taxonomy, coefficients)?;
    let (units_b, excluded_b) =
        scored_units(cohort, &comparison.b, reference, source, taxonomy, coefficients)?;

    let mut results = BTreeMap::new();
    for (slot, rai) in Rai::ALL.iter().enumerate() {
        let side = |units: &[ScoredUnit]| -> Vec<MatchUnit> {
            units
                .iter()
                .map(|u| MatchUnit {
                    age_years: u.age_years,
                    counts: u.counts,
                    score: u.scores[slot].1,
                })
                .collect()
        };
        let result = match_and_compare(&side(&units_a), &side(&units_b), variant).ok_or_else(|| {
            Error::domain(format!(
                "comparison {}: no matched cells between sides ({} vs {} scoreable units)",
                comparison.name,
                units_a.len(),
                units_b.len()
            ))
        })?;
        results.insert(*rai, result);
    }
    Ok(CohortComparison {
        results,
        excluded_a,
        excluded_b,
    })
}

/// Cross-seed aggregate for one instrument. Gaps are reported in
/// percentage points of the normalized score (the `[0, 1]` gap times 100).
#[derive(Debug, Clone)]
pub struct EffectEstimate {
    pub rai: Rai,
    pub comparison: String,
    pub covariate_source: CovariateSource,
    pub ae: f64,
    pub ae_std: f64,
    pub n_seeds: u32,
    /// Means across seeds.
    pub n_cells: f64,
    pub n_matched_a: f64,
    pub n_matched_b: f64,
}

pub const EFFECTS_HEADER: [&str; 9] = [
    "rai",
    "comparison",
    "covariate_source",
    "ae",
    "ae_std",
    "n_seeds",
    "n_cells",
    "n_matched_a",
    "n_matched_b",
];

pub fn write_effects_csv<W: std::io::Write>(
    estimates: &[EffectEstimate],
    writer: W,
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(EFFECTS_HEADER)?;
    for e in estimates {
        csv.write_record([
            e.rai.name(),
            &e.comparison,
            e.covariate_source.name(),
            &format!("{}", e.ae),
            &format!("{}", e.ae_std),
            &format!("{}", e.n_seeds),
            &format!("{}", e.n_cells),
            &format!("{}", e.n_matched_a),
            &format!("{}", e.n_matched_b),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Replicate a cohort construction across seeds and aggregate the gaps.
/// `make_cohort` gets one derived seed per replicate; a deterministic
/// construction can ignore it and run with a single seed.
pub fn estimate_effects<F>(
    make_cohort: F,
    n_seeds: u32,
    master_seed: u64,
    comparison: &Comparison,
    reference: NaiveDate,
    variant: BinningVariant,
    source: CovariateSource,
    taxonomy: &Taxonomy,
    coefficients: &Ogrs3Coefficients,
) -> Result<Vec<EffectEstimate>>
where
    F: Fn(u64) -> Result<Cohort> + Sync,
{
    if n_seeds == 0 {
        return Err(Error::config("estimate_effects: n_seeds must be at least 1"));
    }
    let seeds: Vec<u64> = (0..n_seeds)
        .map(|k| seed::derive(master_seed, &format!("replicate/{k}")))
        .collect();
    let replicates: Vec<CohortComparison> = seeds
        .par_iter()
        .map(|&s| {
            let cohort = make_cohort(s)?;
            compare_cohort(
                &cohort,
                comparison,
                reference,
                variant,
                source,
                taxonomy,
                coefficients,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::new();
    for rai in Rai::ALL {
        let per_seed: Vec<&MatchResult> = replicates
            .iter()
            .map(|r| r.results.get(&rai).expect("all instruments computed"))
            .collect();
        let aes: Vec<f64> = per_seed.iter().map(|r| r.ae * 100.0).collect();
        let n = aes.len() as f64;
        let mean = aes.iter().sum::<f64>() / n;
        let std = if aes.len() < 2 {
            0.0
        } else {
            let var = aes.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
            var.sqrt()
        };
        out.push(EffectEstimate {
            rai,
            comparison: comparison.name.clone(),
            covariate_source: source,
            ae: mean,
            ae_std: std,
            n_seeds,
            n_cells: per_seed.iter().map(|r| r.n_cells as f64).sum::<f64>() / n,
            n_matched_a: per_seed.iter().map(|r| r.n_matched_a as f64).sum::<f64>() / n,
            n_matched_b: per_seed.iter().map(|r| r.n_matched_b as f64).sum::<f64>() / n,
        });
    }
    Ok(out)
}

/// How a gap moved between two runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedMetrics {
    pub difference: f64,
    pub ratio: f64,
    pub pct_increase: f64,
}

pub fn derived_metrics(baseline_ae: f64, simulated_ae: f64) -> DerivedMetrics {
    DerivedMetrics {
        difference: simulated_ae - baseline_ae,
        ratio: simulated_ae / baseline_ae,
        pct_increase: 100.0 * (simulated_ae - baseline_ae) / baseline_ae,
    }
}

/// Average ranks, 1-based, ties share their mean rank.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("no NaN in ranks"));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = mean_rank;
        }
        i = j + 1;
    }
    out
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Rank correlation: Pearson over average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    pearson(&ranks(x), &ranks(y))
}
