//! Exact simulation of the observed Poisson trajectories.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intensity::{Baseline, IntensityModel};
use crate::rng::trajectory_stream;

/// One realization of the point process on `[0, τ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    events: Vec<f64>,
    tau: f64,
}

impl Trajectory {
    pub fn new(events: Vec<f64>, tau: f64) -> Result<Self> {
        if events.iter().any(|t| !(0.0..=tau).contains(t)) {
            return Err(Error::InvalidInput(format!("event time outside [0, {tau}]")));
        }
        if events.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("event times must be strictly increasing".into()));
        }
        Ok(Self { events, tau })
    }

    pub fn empty(tau: f64) -> Self {
        Self {
            events: Vec::new(),
            tau,
        }
    }

    pub fn events(&self) -> &[f64] {
        &self.events
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Number of events in `[lo, hi)`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        self.events.partition_point(|&t| t < hi) - self.events.partition_point(|&t| t < lo)
    }
}

/// `n` independent trajectories drawn under `(model, theta_true)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub trajectories: Vec<Trajectory>,
    pub model: IntensityModel,
    pub theta_true: f64,
    pub seed: u64,
    pub replication_index: u64,
}

impl SampleSet {
    /// Wraps externally obtained trajectories (e.g. read from a dump).
    pub fn from_trajectories(trajectories: Vec<Trajectory>, model: IntensityModel) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::InvalidInput("a sample needs at least one trajectory".into()));
        }
        if trajectories.iter().any(|tr| tr.tau != model.tau()) {
            return Err(Error::InvalidInput(
                "trajectory horizon differs from the model's tau".into(),
            ));
        }
        Ok(Self {
            trajectories,
            model,
            theta_true: f64::NAN,
            seed: 0,
            replication_index: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.trajectories.len()
    }

    pub fn total_events(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    /// All event times of all trajectories, sorted.
    pub fn pooled_events(&self) -> Vec<f64> {
        let mut all: Vec<f64> = Vec::with_capacity(self.total_events());
        for tr in &self.trajectories {
            all.extend_from_slice(&tr.events);
        }
        all.sort_unstable_by(f64::total_cmp);
        all
    }

    /// Writes the `(trajectory_index, event_time)` dump, 17 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(w, "trajectory_index,event_time")?;
            for (j, tr) in self.trajectories.iter().enumerate() {
                for t in &tr.events {
                    writeln!(w, "{j},{t:.16e}")?;
                }
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

/// Reads a trajectory dump. Trajectories without events do not appear in the
/// file, so the sample size `n` must be supplied (or is inferred from the
/// largest index when `None`).
pub fn read_csv(path: &Path, n: Option<usize>, tau: f64) -> Result<Vec<Trajectory>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, msg: &str| Error::Format {
        path: path.to_path_buf(),
        message: format!("line {line}: {msg}"),
    };
    let mut rows: Vec<(usize, f64)> = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if k == 0 {
            if line != "trajectory_index,event_time" {
                return Err(bad(1, "expected header 'trajectory_index,event_time'"));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let (idx, t) = line.split_once(',').ok_or_else(|| bad(k + 1, "expected two columns"))?;
        let idx: usize = idx.trim().parse().map_err(|_| bad(k + 1, "bad trajectory index"))?;
        let t: f64 = t.trim().parse().map_err(|_| bad(k + 1, "bad event time"))?;
        rows.push((idx, t));
    }
    let inferred = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    let n = n.unwrap_or(inferred);
    if n == 0 || inferred > n {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("trajectory index {} exceeds n = {n}", inferred.saturating_sub(1)),
        });
    }
    let mut per: Vec<Vec<f64>> = vec![Vec::new(); n];
    for (idx, t) in rows {
        per[idx].push(t);
    }
    per.into_iter()
        .map(|mut ev| {
            ev.sort_by(f64::total_cmp);
            Trajectory::new(ev, tau)
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

/// Draws a strictly positive increment `t + Exp(rate)`; a draw that does not
/// advance `t` in floating point is redrawn.
#[inline]
fn next_arrival<R: Rng + ?Sized>(t: f64, rate: f64, rng: &mut R) -> f64 {
    loop {
        let e: f64 = rng.sample(Exp1);
        let next = t + e / rate;
        if next > t {
            return next;
        }
    }
}

/// Thinning sampler with envelope `max ψ + max(r, 0)`.
pub fn sample_trajectory<R: Rng + ?Sized>(model: &IntensityModel, theta: f64, rng: &mut R) -> Result<Trajectory> {
    model.check_theta(theta)?;
    Ok(thinning(model, theta, rng))
}

fn thinning<R: Rng + ?Sized>(model: &IntensityModel, theta: f64, rng: &mut R) -> Trajectory {
    let envelope = model.envelope_rate();
    let tau = model.tau();
    let mut events = Vec::new();
    let mut t = 0.0;
    loop {
        t = next_arrival(t, envelope, rng);
        if t > tau {
            break;
        }
        let u: f64 = rng.random();
        if u * envelope < model.rate(theta, t) {
            events.push(t);
        }
    }
    Trajectory { events, tau }
}

/// Inversion of the closed-form cumulative intensity; constant baseline only.
/// Independent second sampler used to cross-check thinning.
pub fn sample_trajectory_inversion<R: Rng + ?Sized>(
    model: &IntensityModel,
    theta: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    model.check_theta(theta)?;
    let l0 = match model.psi() {
        Baseline::Constant(l) => *l,
        Baseline::PiecewiseLinear(_) => {
            return Err(Error::InvalidInput(
                "inversion sampler needs a constant baseline".into(),
            ))
        }
    };
    let (r, d, tau) = (model.r(), model.delta(), model.tau());
    let before = l0 * theta;
    let ramp_end = before + l0 * d + 0.5 * r * d;
    let total = model.total_mass(theta);
    let invert = |s: f64| -> f64 {
        if s <= before {
            s / l0
        } else if s <= ramp_end && d > 0.0 {
            let c = s - before;
            let disc = (l0 * l0 + 2.0 * (r / d) * c).max(0.0);
            theta + 2.0 * c / (l0 + disc.sqrt())
        } else {
            (s + 0.5 * r * d + r * theta) / (l0 + r)
        }
    };
    let mut events = Vec::new();
    let mut s = 0.0;
    loop {
        s = next_arrival(s, 1.0, rng);
        if s > total {
            break;
        }
        let t = invert(s).min(tau);
        if events.last().is_some_and(|&last| t <= last) {
            // floating-point tie after inversion; the arrival is redrawn
            continue;
        }
        events.push(t);
    }
    Ok(Trajectory { events, tau })
}

/// `n` independent trajectories, trajectory `j` drawn from the stream keyed
/// by `(master_seed, replication_index, j)`.
pub fn sample_observations(
    model: &IntensityModel,
    theta: f64,
    n: usize,
    master_seed: u64,
    replication_index: u64,
) -> Result<SampleSet> {
    model.check_theta(theta)?;
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let trajectories = (0..n)
        .map(|j| {
            let mut rng = trajectory_stream(master_seed, replication_index, j as u64);
            thinning(model, theta, &mut rng)
        })
        .collect();
    Ok(SampleSet {
        trajectories,
        model: model.clone(),
        theta_true: theta,
        seed: master_seed,
        replication_index,
    })
}

/// Homogeneous Poisson arrivals of intensity `rate` on `[0, window]`.
pub fn sample_homogeneous_stream<R: Rng + ?Sized>(rate: f64, window: f64, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::new();
    extend_homogeneous(&mut out, 0.0, rate, window, rng);
    out
}

/// Appends arrivals on `(start, end]` to `out`, continuing a stream that has
/// been simulated up to `start`.
pub(crate) fn extend_homogeneous<R: Rng + ?Sized>(
    out: &mut Vec<f64>,
    start: f64,
    rate: f64,
    end: f64,
    rng: &mut R,
) -> f64 {
    if !(rate > 0.0) || !(end > start) {
        return start;
    }
    let mut t = start;
    loop {
        let next = next_arrival(t, rate, rng);
        if next > end {
            // memorylessness: the overshoot is discarded and the stream
            // restarts from `end` on the next extension
            return end;
        }
        t = next;
        out.push(t);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_from_path;
    use crate::stats::{ks_critical_one_sample, ks_critical_two_sample, ks_one_sample, ks_two_sample};

    fn model() -> IntensityModel {
        IntensityModel::constant(2.0, 1.5, 0.1, 1.0, 0.2, 0.8).unwrap()
    }

    fn mean_sd(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v.sqrt())
    }

    #[test]
    fn homogeneous_mean_count() {
        let mut rng = stream_from_path(1, &[0]);
        let m = 100_000;
        let counts: Vec<f64> = (0..m)
            .map(|_| sample_homogeneous_stream(1.0, 10.0, &mut rng).len() as f64)
            .collect();
        let (mean, _) = mean_sd(&counts);
        assert!((mean - 10.0).abs() < 4.0 * (10.0f64 / m as f64).sqrt(), "mean {mean}");
        assert!(sample_homogeneous_stream(1.0, 0.0, &mut rng).is_empty());
    }

    #[test]
    fn homogeneous_law_of_large_numbers() {
        let mut rng = stream_from_path(2, &[0]);
        let m = 10_000;
        let total: usize = (0..m)
            .map(|_| sample_homogeneous_stream(100.0, 1.0, &mut rng).len())
            .sum();
        let rate = total as f64 / m as f64;
        assert!((rate / 100.0 - 1.0).abs() < 0.01, "rate {rate}");
    }

    #[test]
    fn extension_is_consistent() {
        let mut rng = stream_from_path(3, &[0]);
        let mut out = Vec::new();
        let end = extend_homogeneous(&mut out, 0.0, 5.0, 2.0, &mut rng);
        let k = out.len();
        extend_homogeneous(&mut out, end, 5.0, 4.0, &mut rng);
        assert!(out.windows(2).all(|w| w[1] > w[0]));
        assert!(out[..k].iter().all(|&t| t <= 2.0) && out[k..].iter().all(|&t| t > 2.0 && t <= 4.0));
    }

    #[test]
    fn homogeneous_when_r_is_zero() {
        let m = IntensityModel::constant(3.0, 0.0, 0.1, 1.0, 0.2, 0.8).unwrap();
        let mut rng = stream_from_path(4, &[0]);
        let reps = 100_000;
        let counts: Vec<f64> = (0..reps)
            .map(|_| sample_trajectory(&m, 0.5, &mut rng).unwrap().len() as f64)
            .collect();
        let (mean, _) = mean_sd(&counts);
        assert!((mean - 3.0).abs() < 4.0 * (3.0f64 / reps as f64).sqrt());
    }

    #[test]
    fn mean_count_matches_compensator() {
        let pw = IntensityModel::new(
            Baseline::PiecewiseLinear(vec![[0.0, 1.0], [0.5, 2.5], [1.0, 0.5]]),
            -0.4,
            0.15,
            1.0,
            0.2,
            0.8,
        )
        .unwrap();
        for m in [model(), pw] {
            let theta = 0.37;
            let mut rng = stream_from_path(5, &[0]);
            let reps = 40_000;
            let counts: Vec<f64> = (0..reps)
                .map(|_| sample_trajectory(&m, theta, &mut rng).unwrap().len() as f64)
                .collect();
            let (mean, sd) = mean_sd(&counts);
            let target = m.total_mass(theta);
            assert!(
                (mean - target).abs() < 4.0 * sd / (reps as f64).sqrt(),
                "{mean} vs {target}"
            );
            // subinterval counts follow their own compensators
            let (lo, hi) = (theta, theta + m.delta());
            let sub: Vec<f64> = (0..reps)
                .map(|_| sample_trajectory(&m, theta, &mut rng).unwrap().count_in(lo, hi) as f64)
                .collect();
            let (smean, ssd) = mean_sd(&sub);
            let starget = m.cumulative_unchecked(theta, hi) - m.cumulative_unchecked(theta, lo);
            assert!((smean - starget).abs() < 4.0 * ssd / (reps as f64).sqrt());
        }
    }

    #[test]
    fn time_changed_events_are_unit_exponential() {
        // Λ_θ maps the process to a unit-rate Poisson process
        let m = model();
        let theta = 0.45;
        let mut rng = stream_from_path(6, &[0]);
        // trajectories are concatenated on the transformed scale so that no
        // gap is censored at the window end
        let total = m.total_mass(theta);
        let mut gaps = Vec::new();
        let (mut offset, mut prev) = (0.0, 0.0);
        while gaps.len() < 20_000 {
            let tr = sample_trajectory(&m, theta, &mut rng).unwrap();
            for &t in tr.events() {
                let s = offset + m.cumulative_unchecked(theta, t);
                gaps.push(s - prev);
                prev = s;
            }
            offset += total;
        }
        let d = ks_one_sample(&gaps, |x| 1.0 - (-x).exp()).unwrap();
        assert!(d < ks_critical_one_sample(gaps.len(), 0.001), "KS {d}");
    }

    #[test]
    fn disjoint_counts_uncorrelated() {
        let m = model();
        let mut rng = stream_from_path(7, &[0]);
        let reps = 20_000;
        let pairs: Vec<(f64, f64)> = (0..reps)
            .map(|_| {
                let tr = sample_trajectory(&m, 0.5, &mut rng).unwrap();
                (tr.count_in(0.0, 0.5) as f64, tr.count_in(0.5, 1.0 + 1e-12) as f64)
            })
            .collect();
        let corr = correlation(&pairs);
        assert!(corr.abs() < 4.0 / (reps as f64).sqrt(), "corr {corr}");
    }

    fn correlation(pairs: &[(f64, f64)]) -> f64 {
        let n = pairs.len() as f64;
        let (mx, my) = pairs.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in pairs {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx).powi(2);
            syy += (y - my).powi(2);
        }
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn thinning_and_inversion_agree() {
        for m in [
            model(),
            IntensityModel::constant(2.0, -1.5, 0.2, 1.0, 0.2, 0.8).unwrap(),
        ] {
            let theta = 0.41;
            let mut r1 = stream_from_path(8, &[0]);
            let mut r2 = stream_from_path(8, &[1]);
            let reps = 20_000;
            let (mut c1, mut c2, mut f1, mut f2) = (vec![], vec![], vec![], vec![]);
            for _ in 0..reps {
                let a = sample_trajectory(&m, theta, &mut r1).unwrap();
                let b = sample_trajectory_inversion(&m, theta, &mut r2).unwrap();
                c1.push(a.len() as f64 + 0.5 * a.events().iter().sum::<f64>());
                c2.push(b.len() as f64 + 0.5 * b.events().iter().sum::<f64>());
                if let Some(&t) = a.events().first() {
                    f1.push(t)
                }
                if let Some(&t) = b.events().first() {
                    f2.push(t)
                }
            }
            let crit = ks_critical_two_sample(reps, reps, 0.001);
            assert!(ks_two_sample(&c1, &c2).unwrap() < crit);
            assert!(ks_two_sample(&f1, &f2).unwrap() < ks_critical_two_sample(f1.len(), f2.len(), 0.001));
        }
    }

    #[test]
    fn inversion_rejects_piecewise() {
        let pw = IntensityModel::new(
            Baseline::PiecewiseLinear(vec![[0.0, 1.0], [1.0, 2.0]]),
            1.0,
            0.1,
            1.0,
            0.2,
            0.8,
        )
        .unwrap();
        let mut rng = stream_from_path(0, &[]);
        assert!(sample_trajectory_inversion(&pw, 0.5, &mut rng).is_err());
    }

    #[test]
    fn no_events_where_intensity_vanishes_is_respected() {
        // r close to -min ψ: post-ramp intensity nearly zero
        let m = IntensityModel::constant(1.0, -0.999, 0.05, 1.0, 0.2, 0.8).unwrap();
        let mut rng = stream_from_path(9, &[0]);
        let mut late = 0usize;
        let reps = 5_000;
        for _ in 0..reps {
            late += sample_trajectory(&m, 0.3, &mut rng)
                .unwrap()
                .count_in(0.35, 1.0 + 1e-12);
        }
        // expected 0.001 * 0.65 per path
        assert!((late as f64) < reps as f64 * 0.0065 * 4.0 + 10.0);
    }

    #[test]
    fn observations_deterministic() {
        let m = model();
        let a = sample_observations(&m, 0.5, 50, 99, 3).unwrap();
        let b = sample_observations(&m, 0.5, 50, 99, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(sample_observations(&m, 0.5, 1, 99, 3).unwrap().n(), 1);
        assert!(sample_observations(&m, 0.5, 0, 99, 3).is_err());
        for tr in &a.trajectories {
            assert!(tr.events().windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn replications_independent() {
        let m = model();
        let pairs: Vec<(f64, f64)> = (0..10_000u64)
            .map(|k| {
                let a = sample_observations(&m, 0.5, 1, 123, 2 * k).unwrap().total_events() as f64;
                let b = sample_observations(&m, 0.5, 1, 123, 2 * k + 1).unwrap().total_events() as f64;
                (a, b)
            })
            .collect();
        assert!(correlation(&pairs).abs() < 4.0 / 100.0);
    }

    #[test]
    fn csv_round_trip() {
        let m = model();
        let s = sample_observations(&m, 0.5, 20, 5, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        s.write_csv(&path).unwrap();
        let back = read_csv(&path, Some(20), 1.0).unwrap();
        assert_eq!(back, s.trajectories);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("trajectory_index,event_time\n"));
    }

    #[test]
    fn csv_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "trajectory_index,event_time\n0,abc\n").unwrap();
        assert!(read_csv(&path, None, 1.0).is_err());
        std::fs::write(&path, "trajectory_index,event_time\n3,0.5\n").unwrap();
        assert!(read_csv(&path, Some(2), 1.0).is_err());
        assert_eq!(read_csv(&path, None, 1.0).unwrap().len(), 4);
    }
}
