//! The `isocal` command line: calibrate, evaluate, simulate, residuals,
//! perturb and validate.
//!
//! Exit codes: 0 success, 1 I/O or parse failure, 2 invalid input,
//! 3 infeasible synthetic graph.

pub mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use isocal::evaluation::{
    self, group_by, holdout_split, oral_reference, perturbation_study, EvaluationReport, GroupKey, HoldoutMode,
    Population,
};
use isocal::model::validate_dataset;
use isocal::policy::emergency_plan;
use isocal::synthetic::{self, ExperimentKind, ScaleConvention, SyntheticConfig};
use isocal::{calibrate, Dataset, Error, StrategyKind};

use report::{write_atomic, write_pair, Cell, Table};

pub const THREADS_ENV: &str = "ISOCAL_THREADS";

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn io(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_) => Failure::io(e.to_string()),
            Error::InfeasibleGraph { .. } => Failure {
                code: 3,
                message: e.to_string(),
            },
            _ => Failure::invalid(e.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

#[derive(Parser, Debug)]
#[command(name = "isocal", version, about = "Calibrate review scores with author rankings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Strategy {
    Simple,
    Greedy,
    Multiowner,
}

impl From<Strategy> for StrategyKind {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Simple => StrategyKind::SimpleAveraging,
            Strategy::Greedy => StrategyKind::Greedy,
            Strategy::Multiowner => StrategyKind::MultiOwner,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScoreSource {
    /// One randomly held-out review per paper.
    Holdout,
    /// Mean of all reviews.
    Mean,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Mode {
    One,
    Two,
}

impl From<Mode> for HoldoutMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::One => HoldoutMode::OneScore,
            Mode::Two => HoldoutMode::TwoScores,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PopulationArg {
    Ranked,
    All,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GroupArg {
    RankingLength,
    CoauthorCount,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Kind {
    Noisy,
    Biased,
    Outlier,
}

impl From<Kind> for ExperimentKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Noisy => ExperimentKind::NoisyRanking,
            Kind::Biased => ExperimentKind::BiasedReviewers,
            Kind::Outlier => ExperimentKind::OutlierScore,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Convention {
    Sd,
    Variance,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write raw and isotonic scores per paper.
    Calibrate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "simple")]
        strategy: Strategy,
        #[arg(long, value_enum, default_value = "mean")]
        scores: ScoreSource,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV, or JSON when the name ends in `.json`.
        #[arg(long)]
        output: PathBuf,
    },
    /// Holdout evaluation of all strategies over several seeds.
    Evaluate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "one")]
        mode: Mode,
        /// Comma-separated seeds; `a-b` expands to an inclusive range.
        #[arg(long, default_value = "1")]
        seeds: String,
        #[arg(long, value_enum, default_value = "ranked")]
        population: PopulationArg,
        #[arg(long, value_enum)]
        group_by: Option<GroupArg>,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Generate a synthetic conference and run one experiment on it.
    Simulate {
        #[arg(long, value_enum)]
        kind: Kind,
        /// Fraction of the full-size venue, in (0, 1].
        #[arg(long, default_value_t = 0.1)]
        scale: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Reading of the second parameter of the Gaussian generators.
        #[arg(long, value_enum, default_value = "sd")]
        scale_convention: Convention,
        /// Multiplier on true scores in the ranking model.
        #[arg(long, default_value_t = 1.0)]
        sharpness: f64,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Emergency-reviewer plan from residual quantiles.
    Residuals {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "simple")]
        strategy: Strategy,
        #[arg(long)]
        output: PathBuf,
    },
    /// Top-k overlap with oral papers when some rankings are reversed.
    Perturb {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "0,0.2,0.5")]
        fractions: String,
        /// Defaults to the number of oral papers.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value = "1-20")]
        seeds: String,
        #[arg(long, value_enum, default_value = "greedy")]
        strategy: Strategy,
        #[arg(long)]
        output: PathBuf,
    },
    /// Check a dataset file and list every problem.
    Validate {
        #[arg(long)]
        input: PathBuf,
    },
}

/// Parses `1,2,5-8` into `[1, 2, 5, 6, 7, 8]`.
pub fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Failure::invalid(format!("bad seed list entry {part:?}"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (
                    a.trim().parse().map_err(|_| bad())?,
                    b.trim().parse().map_err(|_| bad())?,
                );
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(Failure::invalid("no seeds given"));
    }
    Ok(out)
}

pub fn parse_fractions(s: &str) -> CliResult<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| Failure::invalid(format!("bad fraction {p:?}")))
        })
        .collect::<CliResult<_>>()?;
    if v.is_empty() {
        return Err(Failure::invalid("no fractions given"));
    }
    Ok(v)
}

fn seeds_text(seeds: &[u64]) -> String {
    seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}

fn load(path: &Path) -> CliResult<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    Dataset::from_json(&text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn load_valid(path: &Path) -> CliResult<Dataset> {
    let d = load(path)?;
    let violations = validate_dataset(&d);
    if violations.is_empty() {
        return Ok(d);
    }
    let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
    Err(Failure::invalid(format!(
        "{} validation problem(s):\n{}",
        list.len(),
        list.join("\n")
    )))
}

fn write(path: &Path, contents: &str) -> CliResult {
    write_atomic(path, contents).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn write_tables(dir: &Path, stem: &str, t: &Table) -> CliResult {
    write_pair(dir, stem, t).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))
}

fn cmd_calibrate(input: &Path, strategy: StrategyKind, scores: ScoreSource, seed: u64, output: &Path) -> CliResult {
    let d = load_valid(input)?;
    let raw = match scores {
        ScoreSource::Mean => d.mean_scores(),
        ScoreSource::Holdout => holdout_split(&d, HoldoutMode::OneScore, seed).estimator_scores,
    };
    let cal = calibrate(&d, &raw, strategy)?;
    let mut t = Table::new(vec!["seed", "strategy", "paper_id", "raw", "isotonic"]);
    for (id, y) in raw.iter() {
        t.push(vec![
            seed.into(),
            strategy.as_str().into(),
            id.as_str().into(),
            y.into(),
            cal.scores.get(id).into(),
        ]);
    }
    write(output, &t.render_for(output))
}

const SUMMARY_COLUMNS: [&str; 20] = [
    "seeds",
    "scope",
    "strategy",
    "target",
    "n",
    "raw_mse",
    "iso_mse",
    "mse_improvement_pct",
    "mse_p_value",
    "raw_mae",
    "iso_mae",
    "mae_improvement_pct",
    "mae_p_value",
    "mean_mse_reduction",
    "ci95_lower",
    "ci95_upper",
    "ci99_lower",
    "ci99_upper",
    "excluded",
    "population",
];

fn summary_row(scope: &str, r: &EvaluationReport, excluded: Option<usize>, population: &str) -> Vec<Cell> {
    let s = &r.summary;
    vec![
        seeds_text(&r.seeds).into(),
        scope.into(),
        r.strategy.as_str().into(),
        r.target.as_str().into(),
        s.n.into(),
        s.raw_mse.into(),
        s.iso_mse.into(),
        s.mse_improvement_pct.into(),
        s.mse_p_value.into(),
        s.raw_mae.into(),
        s.iso_mae.into(),
        s.mae_improvement_pct.into(),
        s.mae_p_value.into(),
        (s.raw_mse - s.iso_mse).into(),
        s.ci95.lower.into(),
        s.ci95.upper.into(),
        s.ci99.lower.into(),
        s.ci99.upper.into(),
        excluded.map_or(Cell::Empty, Cell::from),
        population.into(),
    ]
}

fn errors_table(r: &EvaluationReport) -> Table {
    let mut t = Table::new(vec![
        "seed", "strategy", "paper_id", "target", "raw", "isotonic", "raw_sq", "iso_sq",
    ]);
    for row in &r.rows {
        t.push(vec![
            row.seed.into(),
            r.strategy.as_str().into(),
            row.paper.as_str().into(),
            row.target.into(),
            row.raw.into(),
            row.iso.into(),
            row.raw_sq().into(),
            row.iso_sq().into(),
        ]);
    }
    t
}

fn cmd_evaluate(
    input: &Path,
    mode: HoldoutMode,
    seeds: &[u64],
    population: Population,
    group: Option<GroupKey>,
    out: &Path,
) -> CliResult {
    let d = load_valid(input)?;
    let ev = evaluation::evaluate_strategies(&d, mode, seeds, population)?;
    let pop = population.to_string();

    let mut summary = Table::new(SUMMARY_COLUMNS.to_vec());
    for s in &ev.per_seed {
        for r in &s.reports {
            summary.push(summary_row("seed", r, Some(s.excluded), &pop));
        }
    }
    let excluded_total: usize = ev.per_seed.iter().map(|s| s.excluded).sum();
    for r in &ev.pooled {
        summary.push(summary_row("pooled", r, Some(excluded_total), &pop));
    }
    write_tables(out, "summary", &summary)?;

    for r in &ev.pooled {
        write_tables(out, &format!("errors_{}", r.strategy.as_str()), &errors_table(r))?;
    }

    if let Some(key) = group {
        let mut t = Table::new(vec![
            "seeds",
            "strategy",
            key.as_str(),
            "n",
            "raw_mse",
            "iso_mse",
            "mse_improvement_pct",
            "raw_mae",
            "iso_mae",
        ]);
        for r in &ev.pooled {
            for g in group_by(&d, r, key) {
                t.push(vec![
                    seeds_text(&r.seeds).into(),
                    r.strategy.as_str().into(),
                    g.key.into(),
                    g.n.into(),
                    g.raw_mse.into(),
                    g.iso_mse.into(),
                    g.mse_improvement_pct().into(),
                    g.raw_mae.into(),
                    g.iso_mae.into(),
                ]);
            }
        }
        write_tables(out, &format!("groups_{}", key.as_str()), &t)?;
    }
    Ok(())
}

fn cmd_simulate(
    kind: ExperimentKind,
    scale: f64,
    seed: u64,
    convention: ScaleConvention,
    sharpness: f64,
    out: &Path,
) -> CliResult {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Failure::invalid(format!("scale {scale} not in (0, 1]")));
    }
    let mut cfg = SyntheticConfig::for_experiment(kind, scale, seed);
    cfg.scale_convention = convention;
    cfg.ranking_sharpness = sharpness;
    let run = synthetic::run_synthetic_experiment(kind, &cfg)?;

    write(&out.join("dataset.json"), &run.dataset.to_json())?;
    let mut summary = Table::new(SUMMARY_COLUMNS.to_vec());
    for r in &run.reports {
        summary.push(summary_row(kind.as_str(), r, None, "ranked"));
    }
    for r in run.baseline.iter().flatten() {
        summary.push(summary_row("baseline", r, None, "ranked"));
    }
    write_tables(out, "summary", &summary)?;
    for r in &run.reports {
        write_tables(out, &format!("errors_{}", r.strategy.as_str()), &errors_table(r))?;
    }
    Ok(())
}

fn cmd_residuals(input: &Path, strategy: StrategyKind, output: &Path) -> CliResult {
    let d = load_valid(input)?;
    let plan = emergency_plan(&d, strategy)?;
    let contents = match output.extension().and_then(|e| e.to_str()) {
        Some("json") => {
            let mut t = Table::new(PLAN_COLUMNS.to_vec());
            for r in &plan.rows {
                t.push(vec![
                    r.paper.as_str().into(),
                    r.participating.into(),
                    r.initial.into(),
                    r.emergency.into(),
                    r.quantile.into(),
                ]);
            }
            t.to_json()
        }
        _ => plan.to_csv(),
    };
    write(output, &contents)
}

const PLAN_COLUMNS: [&str; 5] = ["paper_id", "participating", "initial", "emergency", "quantile"];

fn cmd_perturb(
    input: &Path,
    fractions: &[f64],
    k: Option<usize>,
    seeds: &[u64],
    strategy: StrategyKind,
    output: &Path,
) -> CliResult {
    let d = load_valid(input)?;
    let reference = oral_reference(&d);
    if reference.is_empty() {
        return Err(Failure::invalid("no oral or award papers to compare against"));
    }
    let k = k.unwrap_or(reference.len());
    let rows = perturbation_study(&d, &d.mean_scores(), &reference, fractions, k, seeds, strategy)?;
    let mut t = Table::new(vec![
        "seeds",
        "strategy",
        "k",
        "fraction",
        "reversed_authors",
        "mean_overlap",
        "sd_overlap",
        "overlaps",
    ]);
    for r in rows {
        let overlaps: Vec<String> = r.overlaps.iter().map(usize::to_string).collect();
        t.push(vec![
            seeds_text(seeds).into(),
            strategy.as_str().into(),
            k.into(),
            r.fraction.into(),
            r.reversed_authors.into(),
            r.mean.into(),
            r.sd.into(),
            overlaps.join(";").into(),
        ]);
    }
    write(output, &t.render_for(output))
}

fn cmd_validate(input: &Path) -> CliResult {
    load_valid(input).map(|d| {
        let rankers = d.authors.iter().filter(|a| a.ranking.is_some()).count();
        println!(
            "ok: {} papers, {} authors, {} rankings",
            d.papers.len(),
            d.authors.len(),
            rankers
        );
    })
}

/// Sizes the global worker pool from `ISOCAL_THREADS` (0 or unset: automatic).
pub fn configure_threads() -> CliResult {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Failure::invalid(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}")))?;
    if n > 0 {
        // a second initialisation in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn execute(cli: Cli) -> CliResult {
    configure_threads()?;
    match cli.command {
        Command::Calibrate {
            input,
            strategy,
            scores,
            seed,
            output,
        } => cmd_calibrate(&input, strategy.into(), scores, seed, &output),
        Command::Evaluate {
            input,
            mode,
            seeds,
            population,
            group_by,
            output_dir,
        } => {
            let population = match population {
                PopulationArg::Ranked => Population::Ranked,
                PopulationArg::All => Population::All,
            };
            let group = group_by.map(|g| match g {
                GroupArg::RankingLength => GroupKey::RankingLength,
                GroupArg::CoauthorCount => GroupKey::CoauthorCount,
            });
            cmd_evaluate(
                &input,
                mode.into(),
                &parse_seeds(&seeds)?,
                population,
                group,
                &output_dir,
            )
        }
        Command::Simulate {
            kind,
            scale,
            seed,
            scale_convention,
            sharpness,
            output_dir,
        } => {
            let convention = match scale_convention {
                Convention::Sd => ScaleConvention::StdDev,
                Convention::Variance => ScaleConvention::Variance,
            };
            cmd_simulate(kind.into(), scale, seed, convention, sharpness, &output_dir)
        }
        Command::Residuals {
            input,
            strategy,
            output,
        } => cmd_residuals(&input, strategy.into(), &output),
        Command::Perturb {
            input,
            fractions,
            k,
            seeds,
            strategy,
            output,
        } => cmd_perturb(
            &input,
            &parse_fractions(&fractions)?,
            k,
            &parse_seeds(&seeds)?,
            strategy.into(),
            &output,
        ),
        Command::Validate { input } => cmd_validate(&input),
    }
}

/// Parses `args`, runs the command and maps failures to exit codes.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1,2, 5-7").unwrap(), vec![1, 2, 5, 6, 7]);
        assert!(parse_seeds("").is_err());
        assert!(parse_seeds("3-1").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn fraction_lists() {
        assert_eq!(parse_fractions("0,0.2,0.5").unwrap(), vec![0.0, 0.2, 0.5]);
        assert!(parse_fractions("a").is_err());
    }

    #[test]
    fn error_codes() {
        assert_eq!(Failure::from(Error::Parse("x".into())).code, 1);
        assert_eq!(Failure::from(Error::EmptyInput).code, 2);
        let e = Error::InfeasibleGraph {
            attempts: 20,
            realized: vec![(2, 1)],
        };
        assert_eq!(Failure::from(e).code, 3);
    }
}
