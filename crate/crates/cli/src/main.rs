use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use scpp_core::harness::{load_config, render_from_dir};
use scpp_core::sampler::read_csv;
use scpp_core::{
    emit_report, estimate, run_experiment, sample_limit, sample_observations, EstimateResult, ExperimentConfig,
    IntensityModel, LimitKind, LimitSummary, Prior, SampleSet,
};

const EXIT_INVALID_CONFIG: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "scpp",
    version,
    about = "Smooth change-point estimation for Poisson processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate observation sets and write them as CSV, one file per (n, replication).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of replications per n to dump.
        #[arg(long, default_value_t = 1)]
        replications: u64,
    },
    /// Estimate the change point from an event CSV and print JSON.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Number of trajectories; inferred from the data when omitted.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run a Monte Carlo experiment and write its report.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Write SVG plots next to the report.
        #[arg(long)]
        svg: bool,
        /// Overrides the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the limit functionals eta and zeta.
    Limits {
        #[arg(long, conflicts_with_all = ["a", "b"])]
        rho: Option<f64>,
        #[arg(long, requires = "b")]
        a: Option<f64>,
        #[arg(long, requires = "a")]
        b: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV file for the individual draws.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the summary of a finished run and optionally re-render its plots.
    Report {
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        svg: bool,
    },
}

/// Model plus prior, for estimating without a full experiment config.
#[derive(Deserialize)]
struct EstimateConfig {
    model: IntensityModel,
    #[serde(default)]
    prior: Prior,
}

#[derive(Serialize)]
struct EstimateOutput {
    n: usize,
    delta: f64,
    total_events: usize,
    #[serde(flatten)]
    result: EstimateResult,
}

fn load_experiment(path: &Path) -> Result<ExperimentConfig> {
    let mut config = load_config(path)?;
    if let Ok(seed) = std::env::var("SCPP_SEED") {
        config.master_seed = seed
            .trim()
            .parse()
            .map_err(|_| scpp_core::Error::InvalidConfig(format!("SCPP_SEED is not a u64: {seed:?}")))?;
    }
    config.validate()?;
    Ok(config)
}

fn simulate(config: &Path, out: &Path, replications: u64) -> Result<()> {
    let config = load_experiment(config)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for &n in &config.n_grid {
        let model = config.model_at(n)?;
        for rep in 0..replications {
            let sample = sample_observations(&model, config.theta_true, n, config.seed_for(n), rep)?;
            let path = out.join(format!("n{n}_rep{rep}.csv"));
            sample.write_csv(&path)?;
            eprintln!("wrote {} ({} events)", path.display(), sample.total_events());
        }
    }
    Ok(())
}

fn estimate_cmd(config: &Path, data: &Path, n: Option<usize>) -> Result<()> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let (template, schedule, prior) = match load_config(config) {
        Ok(c) => (c.model, Some(c.schedule), c.prior),
        Err(_) => {
            let c: EstimateConfig = serde_json::from_str(&text).map_err(|e| {
                scpp_core::Error::InvalidConfig(format!(
                    "{}: expected an experiment config or {{model, prior}}: {e}",
                    config.display()
                ))
            })?;
            (c.model, None, c.prior)
        }
    };
    let trajectories = read_csv(data, n, template.tau())?;
    let n = trajectories.len();
    let model = match &schedule {
        Some(s) => template
            .with_delta(s.delta(n))
            .map_err(|e| scpp_core::Error::InvalidConfig(e.to_string()))?,
        None => template,
    };
    prior.validate(&model)?;
    let sample = SampleSet::from_trajectories(trajectories, model.clone())?;
    let result = estimate(&sample, &model, &prior)?;
    let out = EstimateOutput {
        n,
        delta: model.delta(),
        total_events: sample.total_events(),
        result,
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn experiment(config: &Path, threads: usize, svg: bool, out: Option<PathBuf>) -> Result<ExitCode> {
    let mut config = load_experiment(config)?;
    if let Some(out) = out {
        config.output_dir = out;
    }
    let report = run_experiment(&config, threads)?;
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    let files = emit_report(&report, &config.output_dir, svg)?;
    eprintln!(
        "{} replications ({} failed) in {:.1}s; {} files in {}",
        report.replications.len(),
        report.failures.len(),
        report.wall_time_seconds,
        files.len(),
        config.output_dir.display()
    );
    for c in &report.checks {
        let n = c.n.map_or(String::new(), |n| format!(" n={n}"));
        println!(
            "{} {}{}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            n,
            c.detail
        );
    }
    Ok(if report.all_checks_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    })
}

fn limits(
    rho: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
    paths: usize,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<()> {
    let kind = match (rho, a, b) {
        (Some(rho), None, None) => LimitKind::Rho { rho },
        (None, Some(a), Some(b)) => LimitKind::TwoSided { a, b },
        _ => bail!(scpp_core::Error::InvalidConfig(
            "give either --rho or both --a and --b".into()
        )),
    };
    kind.validate()?;
    let draws = sample_limit(kind, paths, seed)?;
    if let Some(path) = out {
        let mut w =
            std::io::BufWriter::new(fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        writeln!(w, "index,eta,zeta,window,truncated")?;
        for (i, d) in draws.iter().enumerate() {
            writeln!(w, "{i},{},{},{},{}", d.eta, d.zeta, d.window, d.truncated)?;
        }
        w.flush()?;
    }
    let summary = LimitSummary::from_draws(kind, seed, &draws);
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn report(from: &Path, svg: bool) -> Result<()> {
    let summary = from.join("summary.csv");
    let text = fs::read_to_string(&summary).with_context(|| format!("reading {}", summary.display()))?;
    print!("{text}");
    if svg {
        for p in render_from_dir(from)? {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            replications,
        } => simulate(&config, &out, replications)?,
        Command::Estimate { config, data, n } => estimate_cmd(&config, &data, n)?,
        Command::Experiment {
            config,
            threads,
            svg,
            out,
        } => return experiment(&config, threads, svg, out),
        Command::Limits {
            rho,
            a,
            b,
            paths,
            seed,
            out,
        } => limits(rho, a, b, paths, seed, out)?,
        Command::Report { from, svg } => report(&from, svg)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        matches!(
            c.downcast_ref::<scpp_core::Error>(),
            Some(scpp_core::Error::InvalidConfig(_) | scpp_core::Error::InvalidModel(_))
        )
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_config_error(&e) {
                ExitCode::from(EXIT_INVALID_CONFIG)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
