//! Command-line driver: validate inputs, score a cohort, generate
//! synthetic populations, run the full audit, and run the standalone
//! simulators.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use rai_audit_core::analysis::derived_metrics;
use rai_audit_core::cohort::Cohort;
use rai_audit_core::feedback::{simulate as simulate_feedback, FeedbackConfig};
use rai_audit_core::matching::BinningVariant;
use rai_audit_core::pipeline::{
    cumulative, expected_flows, simulate_flows, PeriodFlow, PipelineParams,
};
use rai_audit_core::rates::RateTable;
use rai_audit_core::runner::{run_audit, AuditInputs, AuditOptions, LambdaSpec};
use rai_audit_core::scores::{all_normalized, Ogrs3Coefficients};
use rai_audit_core::seed;
use rai_audit_core::synth::{generate, PopulationSpec};
use rai_audit_core::taxonomy::{OffenseKind, Taxonomy};
use rai_audit_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "rai-audit",
    version,
    about = "Audit risk-assessment instruments against record augmentation"
)]
struct Cli {
    /// Worker threads for seed replication (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that input files parse and cross-reference cleanly.
    Validate(ValidateArgs),
    /// Score every cohort member at a reference date.
    Score(ScoreArgs),
    /// Generate a synthetic cohort with known arrest rates.
    Synth(SynthArgs),
    /// Run the baseline-versus-augmented audit.
    Audit(AuditArgs),
    /// Standalone simulators.
    #[command(subcommand)]
    Simulate(SimulateCommand),
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    cohort: PathBuf,
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    #[arg(long)]
    arrest_rates: Option<PathBuf>,
    #[arg(long)]
    lambda_table: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    cohort: PathBuf,
    /// Reference date, YYYY-MM-DD.
    #[arg(long)]
    reference: String,
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    #[arg(long)]
    coefficients: Option<PathBuf>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Population spec JSON.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep offenses that never became arrests as unobserved events.
    #[arg(long)]
    keep_unobserved: bool,
    #[arg(long)]
    out_cohort: PathBuf,
    #[arg(long)]
    out_rates: PathBuf,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    cohort: PathBuf,
    #[arg(long)]
    arrest_rates: PathBuf,
    /// Fixed prevalence value; mutually exclusive with --lambda-table.
    #[arg(long)]
    lambda: Option<f64>,
    /// Per-cell prevalence table CSV.
    #[arg(long)]
    lambda_table: Option<PathBuf>,
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    #[arg(long)]
    coefficients: Option<PathBuf>,
    /// Reference date, YYYY-MM-DD.
    #[arg(long)]
    reference: String,
    #[arg(long)]
    start_year: i32,
    #[arg(long)]
    end_year: i32,
    #[arg(long)]
    delta_t: u32,
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    #[arg(long, default_value_t = 1.0)]
    multiplier: f64,
    /// Comma-separated categories; default: every category in the
    /// arrest-rate table.
    #[arg(long)]
    categories: Option<String>,
    #[arg(long, default_value_t = 5)]
    seeds: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Covariate binning: coarse, medium, or fine.
    #[arg(long, default_value = "fine")]
    binning: String,
    /// Comma-separated prevalence values to sweep.
    #[arg(long)]
    lambda_grid: Option<String>,
    /// Comma-separated multipliers to sweep.
    #[arg(long)]
    multiplier_grid: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum SimulateCommand {
    /// Resource-allocation feedback loop over locations.
    Feedback(FeedbackArgs),
    /// Staged enforcement funnel.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct FeedbackArgs {
    /// Feedback config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output trace CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// Pipeline params JSON.
    #[arg(long)]
    params: PathBuf,
    /// Monte Carlo replicates; expected-value pass when omitted.
    #[arg(long)]
    replicates: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output flows CSV.
    #[arg(long)]
    out: PathBuf,
}

fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|_| Error::config(format!("bad date {s:?}, expected YYYY-MM-DD")))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse()
                .map_err(|_| Error::config(format!("bad {what} entry {p:?}")))
        })
        .collect()
}

fn load_taxonomy(path: &Option<PathBuf>) -> Result<Taxonomy> {
    match path {
        Some(p) => Taxonomy::load(p),
        None => Ok(Taxonomy::builtin()),
    }
}

fn load_coefficients(path: &Option<PathBuf>) -> Result<Ogrs3Coefficients> {
    match path {
        Some(p) => Ogrs3Coefficients::load(p),
        None => Ok(Ogrs3Coefficients::builtin()),
    }
}

fn load_rate_table(path: &Path) -> Result<RateTable> {
    RateTable::load_table(path)
}

fn cmd_validate(args: &ValidateArgs) -> Result<()> {
    let taxonomy = load_taxonomy(&args.taxonomy)?;
    let cohort = Cohort::load(&args.cohort, &taxonomy)?;
    let n_events: usize = cohort.persons.iter().map(|p| p.observed_events().count()).sum();
    println!(
        "cohort OK: {} people, {} recorded arrests",
        cohort.persons.len(),
        n_events
    );
    for (label, path) in [
        ("arrest rates", &args.arrest_rates),
        ("prevalence table", &args.lambda_table),
    ] {
        if let Some(p) = path {
            let table = load_rate_table(p)?;
            println!("{label} OK: {} cells", table.len());
        }
    }
    Ok(())
}

fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let taxonomy = load_taxonomy(&args.taxonomy)?;
    let coefficients = load_coefficients(&args.coefficients)?;
    let cohort = Cohort::load(&args.cohort, &taxonomy)?;
    let reference = parse_date(&args.reference)?;

    let mut writer: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut csv = csv::Writer::from_writer(&mut writer);
    csv.write_record([
        "person_id",
        "sex",
        "race",
        "ethnicity",
        "age_years",
        "nca",
        "nvca",
        "vprai",
        "ogrs3",
    ])?;
    let mut skipped = 0usize;
    for person in &cohort.persons {
        let history = match person.history_at(reference, &taxonomy)? {
            Some(h) => h,
            None => {
                skipped += 1;
                continue;
            }
        };
        let scores = all_normalized(&history, &coefficients);
        csv.write_record([
            person.id.clone(),
            person.sex.to_string(),
            person.race.to_string(),
            person.ethnicity.to_string(),
            format!("{}", person.age_at(reference)),
            format!("{}", scores[0].1),
            format!("{}", scores[1].1),
            format!("{}", scores[2].1),
            format!("{}", scores[3].1),
        ])?;
    }
    csv.flush()?;
    drop(csv);
    drop(writer);
    if skipped > 0 {
        eprintln!("skipped {skipped} people with no scoreable arrest before {reference}");
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let taxonomy = load_taxonomy(&args.taxonomy)?;
    let spec = PopulationSpec::load(&args.spec)?;
    let out = generate(&spec, &taxonomy, args.keep_unobserved, args.seed)?;
    out.cohort.save(&args.out_cohort)?;
    out.arrest_rates.save(&args.out_rates)?;
    let n_events: usize = out.cohort.persons.iter().map(|p| p.events.len()).sum();
    println!(
        "wrote {} people, {} events to {}; {} rate cells to {}",
        out.cohort.persons.len(),
        n_events,
        args.out_cohort.display(),
        out.arrest_rates.len(),
        args.out_rates.display()
    );
    Ok(())
}

fn cmd_audit(args: &AuditArgs) -> Result<()> {
    let taxonomy = load_taxonomy(&args.taxonomy)?;
    let coefficients = load_coefficients(&args.coefficients)?;
    let cohort = Cohort::load(&args.cohort, &taxonomy)?;
    let arrest_rates = load_rate_table(&args.arrest_rates)?;
    let lambda_table = match &args.lambda_table {
        Some(p) => Some(load_rate_table(p)?),
        None => None,
    };
    let lambda = match (args.lambda, &lambda_table) {
        (Some(_), Some(_)) => {
            return Err(Error::config("give either --lambda or --lambda-table, not both"))
        }
        (Some(v), None) => LambdaSpec::Fixed(v),
        (None, Some(_)) => LambdaSpec::Table,
        (None, None) => {
            return Err(Error::config("one of --lambda or --lambda-table is required"))
        }
    };
    let categories: Vec<OffenseKind> = match &args.categories {
        Some(list) => parse_list(list, "category")?,
        None => {
            let set: BTreeSet<OffenseKind> =
                arrest_rates.iter().map(|((_, cat), _)| *cat).collect();
            set.into_iter().collect()
        }
    };
    let options = AuditOptions {
        reference: parse_date(&args.reference)?,
        start_year: args.start_year,
        end_year: args.end_year,
        delta_t: args.delta_t,
        lambda,
        omega: args.omega,
        multiplier: args.multiplier,
        categories,
        n_seeds: args.seeds,
        master_seed: args.seed,
        variant: args
            .binning
            .parse::<BinningVariant>()
            .map_err(|e| Error::config(format!("--binning: {e}")))?,
        lambda_grid: match &args.lambda_grid {
            Some(list) => parse_list(list, "lambda grid")?,
            None => Vec::new(),
        },
        multiplier_grid: match &args.multiplier_grid {
            Some(list) => parse_list(list, "multiplier grid")?,
            None => Vec::new(),
        },
    };
    let inputs = AuditInputs {
        cohort: &cohort,
        arrest_rates: &arrest_rates,
        lambda_table: lambda_table.as_ref(),
        taxonomy: &taxonomy,
        coefficients: &coefficients,
    };
    let summary = run_audit(&inputs, &options, &args.out)?;
    for (baseline, simulated) in summary.baseline.iter().zip(&summary.simulated) {
        let movement = derived_metrics(baseline.ae, simulated.ae);
        println!(
            "{}: baseline {:.2} pp, simulated {:.2} pp (+/- {:.2}), difference {:.2}",
            baseline.rai, baseline.ae, simulated.ae, simulated.ae_std, movement.difference
        );
    }
    println!("outputs in {}", args.out.display());
    Ok(())
}

fn cmd_simulate_feedback(args: &FeedbackArgs) -> Result<()> {
    let config = FeedbackConfig::load(&args.config)?;
    let run = simulate_feedback(&config)?;
    run.write_csv(BufWriter::new(File::create(&args.out)?))?;
    println!(
        "wrote {} step records to {}",
        run.records.len(),
        args.out.display()
    );
    Ok(())
}

fn write_flows<W: Write>(rows: &[(String, PeriodFlow)], writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record([
        "mode",
        "period",
        "crimes",
        "incidents",
        "arrests",
        "convictions",
        "incarcerations",
    ])?;
    for (mode, flow) in rows {
        csv.write_record([
            mode.clone(),
            format!("{}", flow.period),
            format!("{}", flow.crimes),
            format!("{}", flow.incidents),
            format!("{}", flow.arrests),
            format!("{}", flow.convictions),
            format!("{}", flow.incarcerations),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

fn cmd_simulate_pipeline(args: &PipelineArgs) -> Result<()> {
    let params = PipelineParams::load(&args.params)?;
    let rows: Vec<(String, PeriodFlow)> = match args.replicates {
        None => expected_flows(&params)?
            .into_iter()
            .map(|f| ("expected".to_string(), f))
            .collect(),
        Some(0) => return Err(Error::config("--replicates must be at least 1")),
        Some(reps) => {
            let mut sums = vec![PeriodFlow::default(); params.periods as usize];
            for k in 0..reps {
                let mut rng = seed::rng(args.seed, &format!("pipeline/{k}"));
                for (sum, flow) in sums.iter_mut().zip(simulate_flows(&params, &mut rng)?) {
                    sum.period = flow.period;
                    sum.crimes += flow.crimes;
                    sum.incidents += flow.incidents;
                    sum.arrests += flow.arrests;
                    sum.convictions += flow.convictions;
                    sum.incarcerations += flow.incarcerations;
                }
            }
            let n = reps as f64;
            sums.into_iter()
                .map(|mut f| {
                    f.crimes /= n;
                    f.incidents /= n;
                    f.arrests /= n;
                    f.convictions /= n;
                    f.incarcerations /= n;
                    ("mc_mean".to_string(), f)
                })
                .collect()
        }
    };
    write_flows(&rows, BufWriter::new(File::create(&args.out)?))?;
    let flows: Vec<PeriodFlow> = rows.iter().map(|(_, f)| *f).collect();
    let total = cumulative(&flows);
    println!(
        "wrote {} periods to {}; totals: {:.1} crimes -> {:.1} incidents -> {:.1} arrests -> {:.1} convictions -> {:.1} incarcerations",
        rows.len(),
        args.out.display(),
        total.crimes,
        total.incidents,
        total.arrests,
        total.convictions,
        total.incarcerations
    );
    Ok(())
}

fn run(command: &Command) -> Result<()> {
    match command {
        Command::Validate(args) => cmd_validate(args),
        Command::Score(args) => cmd_score(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Audit(args) => cmd_audit(args),
        Command::Simulate(SimulateCommand::Feedback(args)) => cmd_simulate_feedback(args),
        Command::Simulate(SimulateCommand::Pipeline(args)) => cmd_simulate_pipeline(args),
    }
}

fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config(_) => 1,
        Error::Data(_) => 2,
        Error::Domain(_) | Error::Io(_) => 3,
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
    if let Err(error) = run(&cli.command) {
        eprintln!("error: {error}");
        std::process::exit(exit_code(&error));
    }
}
