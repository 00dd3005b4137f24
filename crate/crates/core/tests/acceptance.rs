//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use scpp_core::harness::{emit_report, run_experiment, Analysis, ExperimentConfig};
use scpp_core::likelihood::{
    char_fn_log_lr, hellinger_half_moment, hellinger_increment, increment_bound_fast, increment_bound_slow,
    limit_char_fn, tail_bound_kappa,
};
use scpp_core::limits::{sample_limit, LimitKind};
use scpp_core::schedule::{DeltaRule, RateSchedule, Regime};
use scpp_core::stats::{ks_critical_two_sample, ks_two_sample, Moments};
use scpp_core::{sample_observations, IntensityModel, LogLikelihood, Prior};

const KS_LEVEL: f64 = 0.001;
const ZETA3: f64 = 1.202_056_903_159_594_3;

struct Outcome {
    passed: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            passed: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.passed &= ok;
        self.details
            .push(format!("{} {detail}", if ok { "ok  " } else { "FAIL" }));
    }
}

fn within_rel(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol * target.abs()
}

fn criterion_1() -> Outcome {
    let mut out = Outcome::new();
    let n = 100;
    let (theta, m) = (0.5, 20_000u64);
    let model = IntensityModel::constant(1.0, 1.0, 0.05, 1.0, 0.25, 0.75).unwrap();
    let schedule = RateSchedule {
        regime: Regime::Slow,
        delta_rule: DeltaRule::Constant(0.05),
    };
    let phi = schedule.phi(n);
    let us = [-2.0, -1.0, 1.0, 2.0];
    let mut roots = vec![Vec::with_capacity(m as usize); us.len()];
    for rep in 0..m {
        let s = sample_observations(&model, theta, n, 1001, rep).unwrap();
        let ll = LogLikelihood::new(&s).unwrap();
        for (k, &u) in us.iter().enumerate() {
            roots[k].push((0.5 * ll.log_lr(theta, u, phi).unwrap()).exp());
        }
    }
    for (k, &u) in us.iter().enumerate() {
        let mc = Moments::of(&roots[k]);
        let exact = hellinger_half_moment(&model, theta, u, &schedule, n).unwrap();
        let z = (mc.mean - exact).abs() / mc.mean_se;
        out.check(
            z <= 3.0,
            format!(
                "u={u}: MC {:.5} +- {:.5}, exact {exact:.5} ({z:.2} SE)",
                mc.mean, mc.mean_se
            ),
        );
    }
    out
}

fn criterion_2() -> Outcome {
    let mut out = Outcome::new();
    let grid: Vec<f64> = (-50..=50).map(|i| i as f64 / 10.0).collect();
    let cases = [
        ("slow l0=2 r=1", 2.0, 1.0, RateSchedule::slow_power(1.0, 0.5)),
        ("slow l0=1 r=1", 1.0, 1.0, RateSchedule::slow_power(1.0, 0.5)),
        ("fast l0=1 r=3", 1.0, 3.0, RateSchedule::fast_power(1.0, 2.0)),
    ];
    for (name, l0, r, schedule) in cases {
        let model = IntensityModel::constant(l0, r, 0.0, 1.0, 0.25, 0.75).unwrap();
        let kappa = tail_bound_kappa(l0, r);
        let (mut worst_inc, mut worst_tail, mut points) = (f64::INFINITY, f64::INFINITY, 0usize);
        for n in [100usize, 1000, 10_000] {
            let fast = matches!(schedule.regime, Regime::Fast);
            if !fast && (n as f64) * schedule.delta(n) < 1.0 {
                continue;
            }
            let phi = schedule.phi(n);
            for theta in [0.35, 0.5, 0.65] {
                let inside = |u: f64| {
                    let t = theta + u * phi;
                    t > 0.25 && t < 0.75
                };
                let us: Vec<f64> = grid.iter().copied().filter(|&u| inside(u)).collect();
                for &u in &us {
                    let h = hellinger_half_moment(&model, theta, u, &schedule, n).unwrap();
                    worst_tail = worst_tail.min((-kappa * u.abs().min(u * u)).exp() - h);
                    for &v in us.iter().filter(|&&v| v != u) {
                        let inc = hellinger_increment(&model, theta, u, v, &schedule, n).unwrap();
                        let bound = if fast {
                            increment_bound_fast(r, u, v)
                        } else {
                            increment_bound_slow(l0, r, u, v)
                        };
                        worst_inc = worst_inc.min(bound - inc);
                        points += 1;
                    }
                }
            }
        }
        out.check(
            worst_inc >= -1e-9 && worst_tail >= -1e-9,
            format!("{name}: {points} pairs, min increment slack {worst_inc:.3e}, min tail slack {worst_tail:.3e}"),
        );
    }
    out
}

fn slow_config(dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        model: IntensityModel::constant(2.0, 1.0, 0.01, 1.0, 0.25, 0.75).unwrap(),
        schedule: RateSchedule::slow_power(1.0, 0.5),
        n_grid: vec![10_000],
        theta_true: 0.5,
        replications: 2000,
        prior: Prior::Uniform,
        master_seed: 20_240_301,
        analyses: vec![Analysis::EstimatorDist, Analysis::LanCheck],
        output_dir: dir.to_path_buf(),
        u_grid: vec![-2.0, -1.0, 1.0, 2.0],
        reference_size: 100_000,
        reference_seed: None,
    }
}

fn criterion_3(dir: &Path) -> Outcome {
    let mut out = Outcome::new();
    let config = slow_config(dir);
    let report = run_experiment(&config, 1).unwrap();
    emit_report(&report, dir, false).unwrap();
    let f = (1.5f64).ln();
    let k = config.u_grid.iter().position(|&u| u == 1.0).unwrap();
    let z: Vec<f64> = report.replications.iter().map(|r| r.log_lr[k]).collect();
    let mz = Moments::of(&z);
    let var_se = Moments::variance_se(&z);
    out.check(
        (mz.mean + f / 2.0).abs() <= 4.0 * mz.mean_se,
        format!(
            "(a) mean ln Z(1) {:.4} +- {:.4} vs {:.4}",
            mz.mean,
            mz.mean_se,
            -f / 2.0
        ),
    );
    out.check(
        (mz.variance - f).abs() <= 4.0 * var_se,
        format!("(a) var ln Z(1) {:.4} +- {:.4} vs {f:.4}", mz.variance, var_se),
    );
    let est = &report.per_n[0].estimators;
    for e in est {
        out.check(
            within_rel(e.moments.variance, 1.0 / f, 0.10),
            format!(
                "(b) {} normalized variance {:.4} vs 1/F = {:.4}",
                e.estimator,
                e.moments.variance,
                1.0 / f
            ),
        );
    }
    let bayes = est.iter().find(|e| e.estimator == "bayes").unwrap();
    let (ks, crit) = (bayes.ks_statistic.unwrap(), bayes.ks_critical.unwrap());
    out.check(
        ks < crit,
        format!("(c) bayes KS vs N(0,1/F) {ks:.4}, critical {crit:.4}"),
    );
    out.details
        .push(format!("     wall time {:.1}s", report.wall_time_seconds));
    out
}

fn criterion_4() -> Outcome {
    let mut out = Outcome::new();
    let config = ExperimentConfig {
        model: IntensityModel::constant(1.0, 3.0, 0.0, 1.0, 0.25, 0.75).unwrap(),
        schedule: RateSchedule::fast_power(1.0, 2.0),
        n_grid: vec![2000],
        theta_true: 0.5,
        replications: 2000,
        prior: Prior::Uniform,
        master_seed: 20_240_302,
        analyses: vec![Analysis::EstimatorDist],
        output_dir: "unused".into(),
        u_grid: vec![-2.0, -1.0, 1.0, 2.0],
        reference_size: 100_000,
        reference_seed: None,
    };
    let report = run_experiment(&config, 1).unwrap();
    let bayes = report.per_n[0]
        .estimators
        .iter()
        .find(|e| e.estimator == "bayes")
        .unwrap();
    let (ks, crit) = (bayes.ks_statistic.unwrap(), bayes.ks_critical.unwrap());
    out.check(ks < crit, format!("two-sample KS {ks:.4}, critical {crit:.4}"));
    let (m2, ref_m2) = (bayes.moments.second_moment, bayes.reference_second_moment.unwrap());
    out.check(
        within_rel(m2, ref_m2, 0.10),
        format!("second moment {m2:.4} vs reference {ref_m2:.4}"),
    );
    out
}

fn criterion_5() -> Outcome {
    let mut out = Outcome::new();
    for (rho, eta_target, zeta_target, tol) in [(8.0, 2.0, 1.0, 0.15), (0.1, 26.0 / 0.01, 16.0 * ZETA3 / 0.01, 0.20)] {
        let draws = sample_limit(LimitKind::Rho { rho }, 100_000, 5050).unwrap();
        let eta: Vec<f64> = draws.iter().map(|d| d.eta).collect();
        let zeta: Vec<f64> = draws.iter().map(|d| d.zeta).collect();
        let (me, mz) = (Moments::of(&eta).second_moment, Moments::of(&zeta).second_moment);
        let truncated = draws.iter().filter(|d| d.truncated).count();
        out.check(
            within_rel(me, eta_target, tol),
            format!("rho={rho}: E eta^2 {me:.4} vs {eta_target:.4} (tol {tol}, {truncated} truncated)"),
        );
        out.check(
            within_rel(mz, zeta_target, tol),
            format!("rho={rho}: E zeta^2 {mz:.4} vs {zeta_target:.4} (tol {tol})"),
        );
    }
    out
}

fn criterion_6() -> Outcome {
    let mut out = Outcome::new();
    let (a, b) = (1.0f64, 4.0f64);
    let m = 100_000;
    let two = sample_limit(LimitKind::TwoSided { a, b }, m, 606).unwrap();
    let rho = sample_limit(LimitKind::Rho { rho: (b / a).ln() }, m, 607).unwrap();
    let crit = ks_critical_two_sample(m, m, KS_LEVEL);
    type Getter = fn(&scpp_core::LimitDraw) -> f64;
    let pairs: [(&str, Getter); 2] = [("eta", |d| d.eta), ("zeta", |d| d.zeta)];
    for (name, get) in pairs {
        let x: Vec<f64> = two.iter().map(get).collect();
        let y: Vec<f64> = rho.iter().map(|d| get(d) / (a - b)).collect();
        let ks = ks_two_sample(&x, &y).unwrap();
        out.check(
            ks < crit,
            format!("{name}_ab vs {name}_rho/(a-b): KS {ks:.5}, critical {crit:.5}"),
        );
    }
    out
}

fn criterion_7() -> Outcome {
    let mut out = Outcome::new();
    let model = IntensityModel::constant(1.0, 3.0, 0.0, 1.0, 0.25, 0.75).unwrap();
    let schedule = RateSchedule::fast_power(1.0, 2.0);
    let us = [0.5, 1.0, 1.5, 2.0, 2.5];
    let xs = [-1.0, -0.5, 0.5, 1.0];
    let mut sups = Vec::new();
    for n in [100usize, 1000, 10_000] {
        let mut sup = 0.0f64;
        for (i, &u) in us.iter().enumerate() {
            for &v in &us[i + 1..] {
                for &x in &xs {
                    for &y in &xs {
                        let got = char_fn_log_lr(&model, 0.5, &schedule, n, u, v, x, y).unwrap();
                        sup = sup.max((got - limit_char_fn(1.0, 4.0, u, v, x, y)).norm());
                    }
                }
            }
        }
        sups.push(sup);
    }
    out.check(
        sups.windows(2).all(|w| w[1] < w[0]),
        format!(
            "sup distances {:.3e}, {:.3e}, {:.3e} strictly decreasing",
            sups[0], sups[1], sups[2]
        ),
    );
    out.check(sups[2] < 0.02, format!("sup distance at n=1e4 {:.3e} < 0.02", sups[2]));
    out
}

fn criterion_8(dir: &Path, rerun: &Path) -> Outcome {
    let mut out = Outcome::new();
    let mut config = slow_config(rerun);
    config.output_dir = rerun.to_path_buf();
    let report = run_experiment(&config, 8).unwrap();
    emit_report(&report, rerun, false).unwrap();
    let a = fs::read(dir.join("summary.csv")).unwrap();
    let b = fs::read(rerun.join("summary.csv")).unwrap();
    out.check(
        a == b,
        format!("summary.csv with 1 and 8 threads identical ({} bytes)", a.len()),
    );
    out
}

type Criterion<'a> = (&'a str, Box<dyn Fn() -> Outcome + 'a>);

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let tmp = tempfile::tempdir().unwrap();
    let one = tmp.path().join("threads1");
    let eight = tmp.path().join("threads8");
    let criteria: Vec<Criterion> = vec![
        ("1 hellinger identity", Box::new(criterion_1)),
        ("2 deterministic bound suite", Box::new(criterion_2)),
        ("3 slow case LAN and normality", Box::new(|| criterion_3(&one))),
        ("4 fast case limit law", Box::new(criterion_4)),
        ("5 limit process moments", Box::new(criterion_5)),
        ("6 scaling identities", Box::new(criterion_6)),
        ("7 characteristic function convergence", Box::new(criterion_7)),
        ("8 thread-count determinism", Box::new(|| criterion_8(&one, &eight))),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let start = Instant::now();
        let o = run();
        println!(
            "{} criterion {name} ({:.1}s)",
            if o.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        for d in &o.details {
            println!("    {d}");
        }
        failed += usize::from(!o.passed);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
