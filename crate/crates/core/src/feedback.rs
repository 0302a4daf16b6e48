//! Place-based enforcement feedback loop.
//!
//! Locations generate crimes at fixed rates. A crime becomes a recorded
//! incident via citizen reporting (resource-independent) or patrol
//! discovery (resource-driven). Each step, the system predicts next-step
//! crime from the last step's incident counts alone, recommends
//! reallocating patrol resources proportionally to that prediction, and
//! blends the recommendation in with adoption weight `s`; discovery
//! probabilities then scale with each location's resource change. The run
//! is deterministic: incident counts are expectations, not draws.
//!
//! The tracked outcome is recorded enforcement activity,
//! `p_reporting + p_discovery * (resources / initial resources)`, reported
//! per location as growth relative to step 0. Under full adoption, equal
//! crime rates, no reporting, and an initial discovery ratio `d` between
//! two locations, the pairwise growth ratio is exactly `d^(2t)`: each step
//! compounds once through the resource shift and once through the
//! discovery-probability update.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Location {
    pub name: String,
    /// Expected crimes per step.
    pub crimes_per_step: f64,
    /// Resource-independent chance a crime is reported.
    pub p_reporting: f64,
    /// Initial chance a crime is discovered by patrol.
    pub p_discovery: f64,
    /// Initial resource share (any positive scale).
    pub resources: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeedbackConfig {
    pub locations: Vec<Location>,
    /// Weight on the reallocation recommendation, 0 (ignore) to 1 (follow).
    pub adoption: f64,
    /// Number of update steps; states 0..=steps are recorded.
    pub steps: u32,
}

impl FeedbackConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let config: FeedbackConfig = serde_json::from_str(json)
            .map_err(|e| Error::config(format!("feedback config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("feedback config {}: {e}", path.display())))?;
        FeedbackConfig::from_json(&json)
    }

    pub fn validate(&self) -> Result<()> {
        if self.locations.is_empty() {
            return Err(Error::config("feedback: at least one location required"));
        }
        if !(0.0..=1.0).contains(&self.adoption) {
            return Err(Error::config("feedback: adoption must lie in [0, 1]"));
        }
        let mut names: Vec<&str> = self.locations.iter().map(|l| l.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.locations.len() {
            return Err(Error::config("feedback: duplicate location names"));
        }
        for l in &self.locations {
            if l.name.is_empty() {
                return Err(Error::config("feedback: empty location name"));
            }
            if l.crimes_per_step < 0.0 {
                return Err(Error::config(format!(
                    "feedback: negative crime rate at {}",
                    l.name
                )));
            }
            if !(0.0..=1.0).contains(&l.p_reporting) || !(0.0..=1.0).contains(&l.p_discovery) {
                return Err(Error::config(format!(
                    "feedback: probabilities at {} must lie in [0, 1]",
                    l.name
                )));
            }
            if l.resources <= 0.0 {
                return Err(Error::config(format!(
                    "feedback: initial resources at {} must be positive",
                    l.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: u32,
    pub location: String,
    pub resources: f64,
    pub p_discovery: f64,
    pub p_reporting: f64,
    /// `min(1, p_reporting + p_discovery)` at this step.
    pub enforcement_prob: f64,
    /// Recorded activity at this step (see module doc).
    pub activity: f64,
    /// Activity relative to the same location at step 0.
    pub difference_factor: f64,
}

#[derive(Debug, Clone)]
pub struct FeedbackRun {
    pub records: Vec<StepRecord>,
}

impl FeedbackRun {
    fn record(&self, location: &str, step: u32) -> Option<&StepRecord> {
        self.records
            .iter()
            .find(|r| r.step == step && r.location == location)
    }

    /// Growth of `a`'s recorded activity relative to `b`'s, both normalized
    /// to step 0.
    pub fn difference_factor(&self, a: &str, b: &str, step: u32) -> Option<f64> {
        let fa = self.record(a, step)?.difference_factor;
        let fb = self.record(b, step)?.difference_factor;
        Some(fa / fb)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record([
            "step",
            "location",
            "resources",
            "p_discovery",
            "p_reporting",
            "enforcement_prob",
            "difference_factor",
        ])?;
        for r in &self.records {
            csv.write_record([
                &format!("{}", r.step),
                &r.location,
                &format!("{}", r.resources),
                &format!("{}", r.p_discovery),
                &format!("{}", r.p_reporting),
                &format!("{}", r.enforcement_prob),
                &format!("{}", r.difference_factor),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }
}

pub fn simulate(config: &FeedbackConfig) -> Result<FeedbackRun> {
    config.validate()?;
    let n = config.locations.len();
    let total_resources: f64 = config.locations.iter().map(|l| l.resources).sum();
    let initial_resources: Vec<f64> = config.locations.iter().map(|l| l.resources).collect();

    let mut resources = initial_resources.clone();
    let mut p_discovery: Vec<f64> = config.locations.iter().map(|l| l.p_discovery).collect();
    let mut records = Vec::with_capacity((config.steps as usize + 1) * n);
    let mut baseline_activity = vec![0.0; n];

    for step in 0..=config.steps {
        for (i, loc) in config.locations.iter().enumerate() {
            let enforcement = (loc.p_reporting + p_discovery[i]).min(1.0);
            let activity = loc.p_reporting + p_discovery[i] * resources[i] / initial_resources[i];
            if step == 0 {
                baseline_activity[i] = activity;
            }
            let difference_factor = if baseline_activity[i] > 0.0 {
                activity / baseline_activity[i]
            } else {
                1.0
            };
            records.push(StepRecord {
                step,
                location: loc.name.clone(),
                resources: resources[i],
                p_discovery: p_discovery[i],
                p_reporting: loc.p_reporting,
                enforcement_prob: enforcement,
                activity,
                difference_factor,
            });
        }
        if step == config.steps {
            break;
        }

        // expected incidents drive next step's prediction
        let incidents: Vec<f64> = config
            .locations
            .iter()
            .enumerate()
            .map(|(i, loc)| {
                loc.crimes_per_step * (loc.p_reporting + p_discovery[i]).min(1.0)
            })
            .collect();
        let total_incidents: f64 = incidents.iter().sum();

        let mut next_resources = vec![0.0; n];
        for i in 0..n {
            // no incidents anywhere means no signal: recommend status quo
            let recommended = if total_incidents > 0.0 {
                total_resources * incidents[i] / total_incidents
            } else {
                resources[i]
            };
            next_resources[i] =
                (1.0 - config.adoption) * resources[i] + config.adoption * recommended;
        }
        for i in 0..n {
            if resources[i] > 0.0 {
                p_discovery[i] = (p_discovery[i] * next_resources[i] / resources[i]).min(1.0);
            }
        }
        resources = next_resources;
    }

    Ok(FeedbackRun { records })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_locations(p_d0: f64, p_d1: f64, p_r: f64, adoption: f64, steps: u32) -> FeedbackConfig {
        FeedbackConfig {
            locations: vec![
                Location {
                    name: "l0".to_string(),
                    crimes_per_step: 100.0,
                    p_reporting: p_r,
                    p_discovery: p_d0,
                    resources: 1.0,
                },
                Location {
                    name: "l1".to_string(),
                    crimes_per_step: 100.0,
                    p_reporting: p_r,
                    p_discovery: p_d1,
                    resources: 1.0,
                },
            ],
            adoption,
            steps,
        }
    }

    #[test]
    fn full_adoption_compounds_the_initial_discovery_ratio_twice_per_step() {
        let delta: f64 = 1.2;
        let config = two_locations(1.2e-4, 1.0e-4, 0.0, 1.0, 10);
        let run = simulate(&config).expect("simulate");
        for t in 0..=10 {
            let factor = run.difference_factor("l0", "l1", t).expect("both present");
            let expected = delta.powi(2 * t as i32);
            assert!(
                (factor - expected).abs() < 1e-9,
                "t={t}: {factor} vs {expected}"
            );
        }
        let t3 = run.difference_factor("l0", "l1", 3).expect("present");
        assert!((t3 - 2.985984).abs() < 1e-9);
    }

    #[test]
    fn zero_adoption_freezes_the_system() {
        let run = simulate(&two_locations(2e-4, 1e-4, 0.1, 0.0, 8)).expect("simulate");
        for t in 0..=8 {
            let factor = run.difference_factor("l0", "l1", t).expect("both present");
            assert!((factor - 1.0).abs() < 1e-12, "t={t}: {factor}");
        }
        for r in &run.records {
            assert_eq!(r.resources, 1.0);
        }
    }

    #[test]
    fn pure_reporting_activity_never_drifts() {
        // discovery off; resources may move with reporting differences but
        // recorded activity stays at each location's reporting rate
        let mut config = two_locations(0.0, 0.0, 0.3, 1.0, 6);
        config.locations[1].p_reporting = 0.1;
        let run = simulate(&config).expect("simulate");
        for t in 0..=6 {
            let factor = run.difference_factor("l0", "l1", t).expect("both present");
            assert!((factor - 1.0).abs() < 1e-12, "t={t}: {factor}");
        }
    }

    #[test]
    fn resources_are_conserved() {
        let config = two_locations(3e-3, 1e-3, 0.05, 0.7, 12);
        let run = simulate(&config).expect("simulate");
        for t in 0..=12 {
            let total: f64 = run
                .records
                .iter()
                .filter(|r| r.step == t)
                .map(|r| r.resources)
                .sum();
            assert!((total - 2.0).abs() < 1e-9, "t={t}: {total}");
        }
    }

    #[test]
    fn discovery_probability_is_capped() {
        let config = two_locations(0.9, 0.05, 0.0, 1.0, 6);
        let run = simulate(&config).expect("simulate");
        for r in &run.records {
            assert!(r.p_discovery <= 1.0, "{}: {}", r.location, r.p_discovery);
            assert!(r.enforcement_prob <= 1.0);
        }
    }

    #[test]
    fn csv_lists_every_step_and_location() {
        let run = simulate(&two_locations(1e-3, 2e-3, 0.0, 1.0, 2)).expect("simulate");
        let mut buf = Vec::new();
        run.write_csv(&mut buf).expect("write");
        let text = String::from_utf8(buf).expect("utf8");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "step,location,resources,p_discovery,p_reporting,enforcement_prob,difference_factor"
        );
        assert_eq!(lines.len(), 1 + 3 * 2);
    }

    #[test]
    fn config_validation_catches_bad_inputs() {
        let mut config = two_locations(0.1, 0.1, 0.0, 1.5, 3);
        assert!(config.validate().is_err());
        config.adoption = 0.5;
        config.locations[0].resources = 0.0;
        assert!(config.validate().is_err());
        config.locations[0].resources = 1.0;
        config.locations[1].name = "l0".to_string();
        assert!(config.validate().is_err());
    }
}
