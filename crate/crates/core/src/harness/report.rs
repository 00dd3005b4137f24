//! Persisting experiment reports and re-rendering plots from them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::svg::{histogram_plot, intensity_plot, Overlay};
use super::{
    EstimatorSummary, ExperimentConfig, ExperimentReport, Histogram, Reference, ReplicationResult, HISTOGRAM_BINS,
};
use crate::error::{Error, Result};
use crate::limits::{sample_limit, LimitKind};

/// Statistics written per `(n, estimator)` row of `summary.csv`, in order.
pub const STATISTICS: [&str; 11] = [
    "count",
    "mean",
    "variance",
    "second_moment",
    "fourth_moment",
    "mean_abs",
    "boundary_rate",
    "reference_second_moment",
    "ks_statistic",
    "ks_critical",
    "exploratory",
];

fn statistic(e: &EstimatorSummary, name: &str) -> f64 {
    let m = &e.moments;
    match name {
        "count" => m.count as f64,
        "mean" => m.mean,
        "variance" => m.variance,
        "second_moment" => m.second_moment,
        "fourth_moment" => m.fourth_moment,
        "mean_abs" => m.mean_abs,
        "boundary_rate" => e.boundary_rate,
        "reference_second_moment" => e.reference_second_moment.unwrap_or(f64::NAN),
        "ks_statistic" => e.ks_statistic.unwrap_or(f64::NAN),
        "ks_critical" => e.ks_critical.unwrap_or(f64::NAN),
        "exploratory" => f64::from(u8::from(e.exploratory)),
        _ => unreachable!("unknown statistic {name}"),
    }
}

pub fn summary_csv(report: &ExperimentReport) -> String {
    let mut s = String::from("n,estimator,statistic,value\n");
    for p in &report.per_n {
        for e in &p.estimators {
            for name in STATISTICS {
                s.push_str(&format!("{},{},{},{}\n", p.n, e.estimator, name, statistic(e, name)));
            }
        }
    }
    s
}

fn replications_header(u_grid: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = [
        "n",
        "replication_index",
        "seed",
        "mle",
        "bayes",
        "norm_err_mle",
        "norm_err_bayes",
        "boundary_flag",
        "loglik_at_mle",
        "quadrature_error",
        "lan_delta",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(u_grid.iter().map(|u| format!("log_lr_u{u}")));
    h
}

pub fn replications_csv(u_grid: &[f64], reps: &[ReplicationResult]) -> String {
    let mut s = replications_header(u_grid).join(",");
    s.push('\n');
    for r in reps {
        let mut row = vec![
            r.n.to_string(),
            r.replication_index.to_string(),
            r.seed.to_string(),
            r.mle.to_string(),
            r.bayes.to_string(),
            r.norm_err_mle.to_string(),
            r.norm_err_bayes.to_string(),
            r.boundary_flag.to_string(),
            r.loglik_at_mle.to_string(),
            r.quadrature_error.to_string(),
            r.lan_delta.map_or(String::new(), |d| d.to_string()),
        ];
        row.extend(r.log_lr.iter().map(|v| v.to_string()));
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Parses a `replications.csv` written by [`emit_report`].
pub fn read_replications(path: &Path) -> Result<Vec<ReplicationResult>> {
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.len() < 11 || &header[0] != "n" {
        return Err(bad("unexpected header".into()));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |k: usize| -> Result<f64> {
            rec[k]
                .parse::<f64>()
                .map_err(|_| bad(format!("row {}: column {} is not a number", line + 2, &header[k])))
        };
        let int = |k: usize| -> Result<u64> {
            rec[k]
                .parse::<u64>()
                .map_err(|_| bad(format!("row {}: column {} is not an integer", line + 2, &header[k])))
        };
        out.push(ReplicationResult {
            n: int(0)? as usize,
            replication_index: int(1)?,
            seed: int(2)?,
            mle: field(3)?,
            bayes: field(4)?,
            norm_err_mle: field(5)?,
            norm_err_bayes: field(6)?,
            boundary_flag: rec[7]
                .parse()
                .map_err(|_| bad(format!("row {}: bad boundary_flag", line + 2)))?,
            loglik_at_mle: field(8)?,
            quadrature_error: field(9)?,
            lan_delta: if rec[10].is_empty() { None } else { Some(field(10)?) },
            log_lr: (11..rec.len()).map(field).collect::<Result<_>>()?,
        });
    }
    Ok(out)
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report types serialize") + "\n"
}

/// Reads an experiment config, or the config echoed inside a `manifest.json`.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    if let Some(inner) = value.get_mut("config") {
        value = inner.take();
    }
    serde_json::from_value(value).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

/// Writes `manifest.json`, `summary.csv`, `replications.csv`,
/// `diagnostics.json` and, if asked, SVG plots. Returns the written paths.
pub fn emit_report(report: &ExperimentReport, dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let c = &report.config;
    let mut written = Vec::new();
    write(dir.join("summary.csv"), summary_csv(report), &mut written)?;
    write(
        dir.join("replications.csv"),
        replications_csv(&c.u_grid, &report.replications),
        &mut written,
    )?;
    let diagnostics = json!({
        "reference": report.reference,
        "per_n": report.per_n,
        "limit_moments": report.limit_moments,
        "checks": report.checks,
    });
    write(dir.join("diagnostics.json"), to_json(&diagnostics), &mut written)?;
    if svg {
        let reference = ReferencePlot::from_report(report);
        written.extend(write_plots(c, &report.replications, &reference, dir)?);
    }
    let seeds: BTreeMap<String, u64> = c.n_grid.iter().map(|&n| (n.to_string(), c.seed_for(n))).collect();
    let manifest = json!({
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": c,
        "seeds": { "master": c.master_seed, "per_n": seeds, "reference": c.reference_seed() },
        "threads": report.threads,
        "wall_time_seconds": report.wall_time_seconds,
        "reference": report.reference,
        "replications_completed": report.replications.len(),
        "failures": report.failures,
        "notes": report.notes,
        "checks_passed": report.all_checks_passed(),
        "files": written.iter().filter_map(|p| p.file_name()).map(|f| f.to_string_lossy()).collect::<Vec<_>>(),
    });
    write(dir.join("manifest.json"), to_json(&manifest), &mut written)?;
    Ok(written)
}

struct ReferencePlot {
    reference: Reference,
    eta: Vec<f64>,
    zeta: Vec<f64>,
}

impl ReferencePlot {
    fn from_report(report: &ExperimentReport) -> Self {
        Self {
            reference: report.reference.clone(),
            eta: report.reference_eta.clone(),
            zeta: report.reference_zeta.clone(),
        }
    }

    fn overlay(&self, estimator: &str) -> Overlay<'_> {
        match &self.reference {
            Reference::Normal { variance } => Overlay::Normal { variance: *variance },
            Reference::Limit { .. } if estimator == "mle" => Overlay::Sample(&self.eta),
            Reference::Limit { .. } => Overlay::Sample(&self.zeta),
            Reference::None => Overlay::None,
        }
    }
}

fn write_plots(
    config: &ExperimentConfig,
    reps: &[ReplicationResult],
    reference: &ReferencePlot,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for &n in &config.n_grid {
        let model = config.model_at(n)?;
        write(
            dir.join(format!("intensity_n{n}.svg")),
            intensity_plot(&model, config.theta_true, n),
            &mut written,
        )?;
        let at_n: Vec<&ReplicationResult> = reps.iter().filter(|r| r.n == n).collect();
        if at_n.len() < 2 {
            continue;
        }
        for est in ["mle", "bayes"] {
            let errs: Vec<f64> = at_n
                .iter()
                .map(|r| if est == "mle" { r.norm_err_mle } else { r.norm_err_bayes })
                .collect();
            let hist = Histogram::of(&errs, HISTOGRAM_BINS);
            let title = format!("{est}: normalized error, n = {n}");
            write(
                dir.join(format!("hist_n{n}_{est}.svg")),
                histogram_plot(&title, &hist, errs.len(), reference.overlay(est)),
                &mut written,
            )?;
        }
    }
    Ok(written)
}

/// Re-renders the SVG plots of a finished run from its `manifest.json` and
/// `replications.csv`; a simulated limit reference is regenerated from its seed.
pub fn render_from_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let manifest_path = dir.join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: manifest_path.clone(),
        message: e.to_string(),
    })?;
    let config = load_config(&manifest_path)?;
    let reference: Reference = serde_json::from_value(manifest["reference"].clone()).map_err(|e| Error::Format {
        path: manifest_path.clone(),
        message: format!("reference: {e}"),
    })?;
    let (eta, zeta) = match &reference {
        Reference::Limit { a, b, size, seed, .. } => {
            let draws = sample_limit(LimitKind::TwoSided { a: *a, b: *b }, *size, *seed)?;
            (
                draws.iter().map(|d| d.eta).collect(),
                draws.iter().map(|d| d.zeta).collect(),
            )
        }
        _ => (Vec::new(), Vec::new()),
    };
    let reps = read_replications(&dir.join("replications.csv"))?;
    write_plots(&config, &reps, &ReferencePlot { reference, eta, zeta }, dir)
}

#[cfg(test)]
mod tests {
    use super::super::{run_experiment, tests::small_config};
    use super::*;

    #[test]
    fn emitted_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path().to_path_buf());
        let report = run_experiment(&config, 2).unwrap();
        emit_report(&report, dir.path(), true).unwrap();

        let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count() - 1, config.n_grid.len() * 2 * STATISTICS.len());

        let reps = read_replications(&dir.path().join("replications.csv")).unwrap();
        assert_eq!(reps, report.replications);

        let back = load_config(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(back, config);

        for entry in fs::read_dir(dir.path()).unwrap() {
            let p = entry.unwrap().path();
            if p.extension().is_some_and(|e| e == "svg") {
                let text = fs::read_to_string(&p).unwrap();
                roxmltree::Document::parse(&text).unwrap();
            }
        }
        let again = render_from_dir(dir.path()).unwrap();
        assert_eq!(again.len(), 3 * config.n_grid.len());
    }
}
