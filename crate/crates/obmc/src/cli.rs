//! Command-line interface.
//!
//! Exit status is 0 on success, 1 on invalid arguments, configuration or I/O
//! errors, and 2 on numerical failures.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use obmc_core::{
    generate_truth, risk_report, sample_observations, select_lambda, Estimator, Generator,
    SampleSet, SamplingScheme, Shape, SolverConfig,
};

use crate::config::{apply_solver_overrides, default_lambda_grid, SweepConfig};
use crate::error::{Error, Result};
use crate::experiments::run_sweep;
use crate::{io, plot, table};

#[derive(Debug, Parser)]
#[command(
    name = "obmc",
    version,
    about = "Logistic 1-bit matrix completion experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a ground-truth matrix and optionally a sample set from it.
    Generate(GenerateArgs),
    /// Fit one estimator and write the estimate with a fit summary.
    Fit(FitArgs),
    /// Print the risk report of an estimate as one CSV line.
    Evaluate(EvaluateArgs),
    /// Run a replicated sweep and write one CSV row per replicate and cell.
    Sweep(SweepArgs),
    /// Fit log-log rates to a sweep CSV and write a rate table and plot.
    Rate(RateArgs),
    /// Print the version.
    Version,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub m1: usize,
    #[arg(long)]
    pub m2: usize,
    /// Rank of the truth.
    #[arg(long, short)]
    pub rank: usize,
    /// Entrywise amplitude bound.
    #[arg(long)]
    pub gamma: f64,
    /// `block_sign` or `gaussian_factor`.
    #[arg(long, default_value = "block_sign")]
    pub generator: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Truth matrix file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also draw this many observations.
    #[arg(long, requires = "samples_out")]
    pub n: Option<usize>,
    /// `iid_uniform` or `bernoulli_mask`.
    #[arg(long, default_value = "iid_uniform")]
    pub scheme: String,
    /// Sample file to write when `--n` is given.
    #[arg(long, requires = "n")]
    pub samples_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Truth file; supplies gamma and rank and, without `--samples`, the
    /// matrix to sample from.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Sample file to fit instead of drawing samples from the truth.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Observations to draw from the truth.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value = "iid_uniform")]
    pub scheme: String,
    /// `nuclear_penalized`, `nuclear_constrained` or `maxnorm_constrained`.
    #[arg(long, default_value = "nuclear_penalized")]
    pub estimator: String,
    /// Seed for sampling, penalty selection and the solver.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Solver setting `key=value`, e.g. `lambda=0.01` or `max_iters=500`.
    /// Without `lambda` the penalized estimator selects it on a hold-out split.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Estimate file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Estimate matrix file.
    #[arg(long)]
    pub estimate: PathBuf,
    /// Truth matrix file.
    #[arg(long)]
    pub truth: PathBuf,
    /// Print the column names first.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// CSV file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Replaces `base_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every CPU. Never changes the output.
    #[arg(long, env = "OBMC_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Configuration override `key=value`; solver keys may be bare.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    /// Sweep configuration the CSV was produced with; only its estimators
    /// are reported.
    #[arg(long)]
    pub config: PathBuf,
    /// Sweep CSV to read.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Rate table to write.
    #[arg(long)]
    pub out: PathBuf,
    /// SVG plot to write; defaults to the table path with an `svg` extension.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Configuration override `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

fn generator(name: &str) -> Result<Generator> {
    Generator::from_name(name).ok_or_else(|| Error::Config(format!("unknown generator `{name}`")))
}

fn scheme(name: &str) -> Result<SamplingScheme> {
    SamplingScheme::from_name(name)
        .ok_or_else(|| Error::Config(format!("unknown sampling scheme `{name}`")))
}

fn estimator(name: &str) -> Result<Estimator> {
    Estimator::from_name(name).ok_or_else(|| Error::Config(format!("unknown estimator `{name}`")))
}

fn generate(a: &GenerateArgs, out: &mut dyn Write) -> Result<()> {
    let shape = Shape::new(a.m1, a.m2)?;
    let truth = generate_truth(shape, a.rank, a.gamma, generator(&a.generator)?, a.seed)?;
    io::write_truth(&a.out, &truth)?;
    if let (Some(n), Some(path)) = (a.n, &a.samples_out) {
        let samples = sample_observations(
            &truth,
            n,
            scheme(&a.scheme)?,
            obmc_core::rng::derive_seed(&[a.seed, 1]),
        )?;
        io::write_samples(path, &samples)?;
    }
    writeln!(out, "margin_tau {}", truth.margin_tau).map_err(|e| Error::io("stdout", e))
}

fn fit(a: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let truth = a.truth.as_deref().map(io::read_truth).transpose()?;
    let samples: SampleSet = match (&a.samples, &truth, a.n) {
        (Some(path), _, None) => io::read_samples(path)?,
        (None, Some(t), Some(n)) => sample_observations(t, n, scheme(&a.scheme)?, a.seed)?,
        _ => {
            return Err(Error::Config(
                "give either --samples, or --truth together with --n".into(),
            ))
        }
    };
    if let Some(t) = &truth {
        if t.shape() != samples.shape() {
            return Err(Error::Config("samples and truth differ in shape".into()));
        }
    }
    let est = estimator(&a.estimator)?;
    let mut config = match &truth {
        Some(t) => SolverConfig::for_truth(t.gamma, t.rank_budget),
        None => SolverConfig::default(),
    };
    config.seed = a.seed;
    apply_solver_overrides(&mut config, &a.overrides)?;
    let has_lambda = a
        .overrides
        .iter()
        .any(|o| o.split('=').next().map(str::trim) == Some("lambda"));
    if est == Estimator::NuclearPenalized && !has_lambda {
        let d = samples.shape().dim_sum() as f64;
        let scale = (d / samples.len() as f64).sqrt();
        let grid: Vec<f64> = default_lambda_grid().iter().map(|m| m * scale).collect();
        config.lambda = select_lambda(&samples, &config, &grid)?;
    }
    let started = std::time::Instant::now();
    let mut result = est.fit(&samples, &config)?;
    result.runtime_ms = started.elapsed().as_millis() as u64;
    let f = &result.feasibility_report;
    let summary = vec![
        ("estimator", est.name().to_string()),
        ("n", samples.len().to_string()),
        ("gamma", format!("{}", config.gamma)),
        ("rank_hint", config.rank_hint.to_string()),
        ("lambda", format!("{}", config.lambda)),
        ("iterations", result.iterations.to_string()),
        ("converged", result.converged.to_string()),
        ("final_objective", format!("{}", result.final_objective())),
        ("nuclear_norm", format!("{}", f.nuclear_norm)),
        ("inf_norm_violation", format!("{}", f.inf_norm_violation)),
        ("maxnorm_upper_bound", format!("{}", f.maxnorm_upper_bound)),
        ("runtime_ms", result.runtime_ms.to_string()),
    ];
    io::write_matrix(&a.out, &result.estimate, &summary)?;
    for (k, v) in &summary {
        writeln!(out, "{k} {v}").map_err(|e| Error::io("stdout", e))?;
    }
    Ok(())
}

fn evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let truth = io::read_truth(&a.truth)?;
    let (estimate, _) = io::read_matrix(&a.estimate)?;
    let r = risk_report(&estimate, &truth)?;
    let mut text = String::new();
    if a.header {
        text.push_str("risk,bayes_risk,excess,frob_err_sq_norm\n");
    }
    text.push_str(&format!(
        "{},{},{},{}\n",
        table::float(r.risk),
        table::float(r.bayes_risk),
        table::float(r.excess),
        table::float(r.frob_error_sq_normalized)
    ));
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("stdout", e))
}

fn sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = SweepConfig::load(&a.config, &a.overrides)?;
    if let Some(seed) = a.seed {
        config.base_seed = seed;
    }
    let cells = run_sweep(&config, &a.out, a.threads)?;
    writeln!(out, "wrote {} cells to {}", cells.len(), a.out.display())
        .map_err(|e| Error::io("stdout", e))
}

fn rate(a: &RateArgs, out: &mut dyn Write) -> Result<()> {
    let config = SweepConfig::load(&a.config, &a.overrides)?;
    let file = std::fs::File::open(&a.input).map_err(|e| Error::io(&a.input, e))?;
    let mut rows = table::read_aggregates(file, &a.input)?;
    rows.retain(|r| config.estimators.contains(&r.estimator));
    let rates = table::rate_rows(&rows);
    let mut buf = Vec::new();
    table::write_rates(&mut buf, &rates).map_err(|e| Error::io(&a.out, e))?;
    std::fs::write(&a.out, buf).map_err(|e| Error::io(&a.out, e))?;
    let plot_path = a
        .plot
        .clone()
        .unwrap_or_else(|| a.out.with_extension("svg"));
    write_file(&plot_path, &plot::rate_svg(&rates))?;
    for r in &rates {
        let slope = r
            .excess
            .as_ref()
            .map_or("n/a".to_string(), |f| format!("{:.3}", f.slope));
        writeln!(
            out,
            "{} {}x{} r={} gamma={}: excess slope {slope}",
            r.estimator.name(),
            r.m1,
            r.m2,
            r.r,
            r.gamma
        )
        .map_err(|e| Error::io("stdout", e))?;
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Executes a parsed command, writing its report to `out`.
pub fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => generate(a, out),
        Command::Fit(a) => fit(a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Sweep(a) => sweep(a, out),
        Command::Rate(a) => rate(a, out),
        Command::Version => {
            writeln!(out, "obmc {}", env!("CARGO_PKG_VERSION")).map_err(|e| Error::io("stdout", e))
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match dispatch(&cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parse_errors_exit_one_and_help_zero() {
        assert_eq!(run(["obmc", "frobnicate"]), 1);
        assert_eq!(run(["obmc", "sweep"]), 1);
        assert_eq!(run(["obmc", "--help"]), 0);
        assert_eq!(run(["obmc", "rate", "--help"]), 0);
        assert_eq!(run(["obmc", "version"]), 0);
    }
}
