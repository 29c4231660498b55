//! Monte Carlo harnesses that confront simulated paths with the asymptotic
//! predictions, plus the SLA capacity planner.
//!
//! Every replicate or sample draws from its own seed derived from the master
//! seed and its index, and results are merged by index, so outputs do not
//! depend on the number of workers.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::rate::{RateFunctionCtx, Transform};
use crate::rng::derive_seed;
use crate::segments::{r_trajectory, t_stat, ThresholdSet};
use crate::simulator::{simulate, window_sum, NoiseMode, PathConfig};
use crate::stats::{quantile_sorted, sort_floats};

/// Pass/fail verdict of one pre-registered check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrongLawConfig {
    /// Per-customer headroom; the target set is `(c_p, inf)`.
    pub c_p: f64,
    pub r_grid: Vec<usize>,
    pub t_grid: Vec<usize>,
    pub replicates: usize,
    pub master_seed: u64,
    pub noise_mode: Option<NoiseMode>,
    pub initial_horizon: usize,
    /// Horizon doubling stops here; replicates still short of `T_r` are censored.
    pub horizon_cap: usize,
    /// Relative half-width of the acceptance band around the prediction.
    pub band: f64,
    pub workers: usize,
}

impl StrongLawConfig {
    pub fn new(c_p: f64, r_grid: Vec<usize>, t_grid: Vec<usize>, replicates: usize, master_seed: u64) -> Self {
        Self {
            c_p,
            r_grid,
            t_grid,
            replicates,
            master_seed,
            noise_mode: None,
            initial_horizon: 1024,
            horizon_cap: 10_000_000,
            band: 0.4,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateResult {
    pub index: usize,
    pub seed: u64,
    pub horizon: usize,
    /// `T_r` per entry of the r grid; `None` when censored at the horizon.
    pub t_r: Vec<Option<usize>>,
    pub r_t: Vec<usize>,
    pub duality_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub point: usize,
    /// `None` when censoring pushes the quantile to infinity.
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    pub censored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongLawReport {
    pub c_p: f64,
    /// `Lambda*(c_p)`, the limit of `log T_r / r` and of `log t / R_t`.
    pub predicted_rate: f64,
    /// Limit of `R_t / log t`.
    pub predicted_reciprocal: f64,
    pub replicates: Vec<ReplicateResult>,
    /// Quantiles of `log T_r / r` over replicates, per r.
    pub t_summary: Vec<GridSummary>,
    /// Quantiles of `R_t / log t` over replicates, per t.
    pub r_summary: Vec<GridSummary>,
    pub duality_violations: usize,
    pub checks: Vec<Check>,
}

impl StrongLawReport {
    pub fn median_at(&self, r: usize) -> Option<f64> {
        self.t_summary.iter().find(|s| s.point == r).and_then(|s| s.median)
    }
}

#[cfg(feature = "parallel")]
fn map_indexed<T, F>(n: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}

#[cfg(not(feature = "parallel"))]
fn map_indexed<T, F>(n: usize, _workers: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T>,
{
    (0..n).map(f).collect()
}

fn summarize(point: usize, mut values: Vec<f64>) -> GridSummary {
    let censored = values.iter().filter(|v| v.is_infinite()).count();
    sort_floats(&mut values);
    let finite = |q: f64| quantile_sorted(&values, q).filter(|v| v.is_finite());
    GridSummary {
        point,
        median: finite(0.5),
        q1: finite(0.25),
        q3: finite(0.75),
        censored,
    }
}

/// Simulates replicates and records `log T_r / r` and `R_t / log t`.
pub fn run_strong_law(spec: &ModelSpec, cfg: &StrongLawConfig) -> Result<StrongLawReport> {
    if cfg.r_grid.is_empty() || cfg.r_grid.contains(&0) {
        return Err(Error::InvalidArgument("r grid must be non-empty with entries >= 1".into()));
    }
    if cfg.t_grid.contains(&0) || cfg.t_grid.contains(&1) {
        return Err(Error::InvalidArgument("t grid entries must be >= 2 (log t > 0)".into()));
    }
    if cfg.replicates == 0 {
        return Err(Error::InvalidArgument("need at least one replicate".into()));
    }
    let ctx = RateFunctionCtx::new(spec);
    let set = ThresholdSet::Above(cfg.c_p);
    let predicted_rate = ctx.rate_over(Transform::Limit, &set)?;
    if !(predicted_rate > 0.0) {
        return Err(Error::Degenerate(format!(
            "Lambda*(c_p) = {predicted_rate} at c_p = {}: the target set touches the mean, so T_r and R_t have no exponential scale",
            cfg.c_p
        )));
    }
    let r_max = *cfg.r_grid.iter().max().expect("non-empty");
    let t_max = cfg.t_grid.iter().copied().max().unwrap_or(0);
    let start = cfg.initial_horizon.max(t_max).max(r_max).min(cfg.horizon_cap.max(t_max));

    let replicates = map_indexed(cfg.replicates, cfg.workers, |index| {
        let seed = derive_seed(cfg.master_seed, index as u64);
        let mut horizon = start;
        loop {
            let path = simulate(
                spec,
                &PathConfig {
                    t_max: horizon,
                    seed,
                    noise_mode: cfg.noise_mode,
                    record_steps: false,
                },
            )?;
            let longest = t_stat(&path, &set, r_max)?;
            if longest.value.is_none() && horizon < cfg.horizon_cap {
                horizon = (2 * horizon).min(cfg.horizon_cap);
                continue;
            }
            let t_r = cfg
                .r_grid
                .iter()
                .map(|&r| t_stat(&path, &set, r).map(|rep| rep.value))
                .collect::<Result<Vec<_>>>()?;
            let r_t = if t_max > 0 {
                let traj = r_trajectory(&path, &set, t_max)?;
                cfg.t_grid.iter().map(|&t| traj[t - 1]).collect()
            } else {
                Vec::new()
            };
            let mut duality_violations = 0;
            for (r, tr) in cfg.r_grid.iter().zip(&t_r) {
                for (t, rt) in cfg.t_grid.iter().zip(&r_t) {
                    if tr.is_some_and(|v| v <= *t) != (rt >= r) {
                        duality_violations += 1;
                    }
                }
            }
            return Ok(ReplicateResult {
                index,
                seed,
                horizon,
                t_r,
                r_t,
                duality_violations,
            });
        }
    })?;

    let t_summary: Vec<GridSummary> = cfg
        .r_grid
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let vals = replicates
                .iter()
                .map(|rep| rep.t_r[i].map_or(f64::INFINITY, |t| (t as f64).ln() / r as f64))
                .collect();
            summarize(r, vals)
        })
        .collect();
    let r_summary: Vec<GridSummary> = cfg
        .t_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let vals = replicates.iter().map(|rep| rep.r_t[i] as f64 / (t as f64).ln()).collect();
            summarize(t, vals)
        })
        .collect();
    let duality_violations = replicates.iter().map(|r| r.duality_violations).sum();

    let mut checks = Vec::new();
    let (lo, hi) = (predicted_rate * (1.0 - cfg.band), predicted_rate * (1.0 + cfg.band));
    for s in &t_summary {
        checks.push(Check {
            name: format!("median log T_r/r in band at r={}", s.point),
            pass: s.median.is_some_and(|m| m >= lo && m <= hi),
            detail: format!("median {:?}, band [{lo}, {hi}] (engineering choice)", s.median),
        });
    }
    let mut sorted: Vec<&GridSummary> = t_summary.iter().collect();
    sorted.sort_by_key(|s| s.point);
    if let (Some(first), Some(last)) = (sorted.first(), sorted.last()) {
        if first.point != last.point {
            let gap = |s: &GridSummary| s.median.map(|m| (m - predicted_rate).abs());
            checks.push(Check {
                name: format!("median closer to prediction at r={} than r={}", last.point, first.point),
                pass: matches!((gap(last), gap(first)), (Some(a), Some(b)) if a < b),
                detail: format!("gaps {:?} vs {:?}", gap(last), gap(first)),
            });
        }
    }
    checks.push(Check {
        name: "duality T_r <= t iff R_t >= r".into(),
        pass: duality_violations == 0,
        detail: format!("{duality_violations} violations"),
    });

    Ok(StrongLawReport {
        c_p: cfg.c_p,
        predicted_rate,
        predicted_reciprocal: 1.0 / predicted_rate,
        replicates,
        t_summary,
        r_summary,
        duality_violations,
        checks,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UldpConfig {
    /// Relative segment positions; `k * t` must be an integer.
    pub k_grid: Vec<f64>,
    pub t: usize,
    pub set: ThresholdSet,
    pub samples: usize,
    pub master_seed: u64,
    pub noise_mode: Option<NoiseMode>,
    /// Relative half-width of the acceptance band around each prediction.
    pub band: f64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UldpRow {
    pub k: f64,
    pub t: usize,
    pub samples: usize,
    pub successes: u64,
    pub p_hat: f64,
    pub std_error: f64,
    /// `-(1/t) log p_hat`; absent with zero successes.
    pub empirical_exponent: Option<f64>,
    /// With zero successes: `-(1/t) log(3/samples)`, a 95% one-sided bound.
    pub exponent_lower_bound: Option<f64>,
    /// `inf_A Lambda^{k*}`.
    pub predicted_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UldpReport {
    pub set: ThresholdSet,
    pub rows: Vec<UldpRow>,
    pub checks: Vec<Check>,
}

const CHUNK: usize = 4096;

/// Estimates `P[X(kt, (k+1)t) in A]` for each `k` by sampling the window
/// directly, beside the predicted exponent.
pub fn run_uldp(spec: &ModelSpec, cfg: &UldpConfig) -> Result<UldpReport> {
    if cfg.t < 1 || cfg.samples == 0 || cfg.k_grid.is_empty() {
        return Err(Error::InvalidArgument("need t >= 1, samples >= 1 and a non-empty k grid".into()));
    }
    let ctx = RateFunctionCtx::new(spec);
    let mut rows = Vec::with_capacity(cfg.k_grid.len());
    for (ki, &k) in cfg.k_grid.iter().enumerate() {
        let start = k * cfg.t as f64;
        if !(k >= 0.0 && start.fract() == 0.0 && start.is_finite()) {
            return Err(Error::InvalidArgument(format!("k * t = {start} must be a nonnegative integer")));
        }
        let start = start as u64;
        let end = start + cfg.t as u64;
        let mass = (spec.cumulative_population(end) - spec.cumulative_population(start)) as f64;
        let mode = match (cfg.noise_mode, spec.noise()) {
            (Some(m), _) => m,
            (None, Some(n)) if !n.has_exact_sum() => NoiseMode::Literal,
            _ => NoiseMode::Aggregate,
        };
        let k_seed = derive_seed(cfg.master_seed, ki as u64);
        let chunks = cfg.samples.div_ceil(CHUNK);
        let counts = map_indexed(chunks, cfg.workers, |c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(cfg.samples);
            let mut hits = 0u64;
            for j in lo..hi {
                let sum = window_sum(spec, start, cfg.t as u64, derive_seed(k_seed, j as u64), mode);
                if cfg.set.contains(sum / mass) {
                    hits += 1;
                }
            }
            Ok(hits)
        })?;
        let successes: u64 = counts.iter().sum();
        let n = cfg.samples as f64;
        let p_hat = successes as f64 / n;
        let t = cfg.t as f64;
        rows.push(UldpRow {
            k,
            t: cfg.t,
            samples: cfg.samples,
            successes,
            p_hat,
            std_error: (p_hat * (1.0 - p_hat) / n).sqrt(),
            empirical_exponent: (successes > 0).then(|| -p_hat.ln() / t),
            exponent_lower_bound: (successes == 0).then(|| -(3.0 / n).ln() / t),
            predicted_exponent: ctx.rate_over(Transform::Segment(k), &cfg.set)?,
        });
    }

    let mut checks = Vec::new();
    for row in &rows {
        let (lo, hi) = (row.predicted_exponent * (1.0 - cfg.band), row.predicted_exponent * (1.0 + cfg.band));
        checks.push(Check {
            name: format!("empirical exponent in band at k={}", row.k),
            pass: row.empirical_exponent.is_some_and(|e| e >= lo && e <= hi),
            detail: format!("empirical {:?}, band [{lo}, {hi}] (engineering choice)", row.empirical_exponent),
        });
    }
    let mut by_k: Vec<&UldpRow> = rows.iter().collect();
    by_k.sort_by(|a, b| a.k.total_cmp(&b.k));
    let ordered = by_k.windows(2).all(|w| match (w[0].empirical_exponent, w[1].empirical_exponent) {
        (Some(a), Some(b)) => a <= b,
        _ => false,
    });
    checks.push(Check {
        name: "empirical exponents nondecreasing in k".into(),
        pass: ordered,
        detail: format!("{:?}", by_k.iter().map(|r| r.empirical_exponent).collect::<Vec<_>>()),
    });
    Ok(UldpReport {
        set: cfg.set,
        rows,
        checks,
    })
}

/// Target rates below this are flagged: the capacity sits near the mean
/// where the asymptotics say little at practical horizons.
pub const NEAR_MEAN_RATE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlaPlan {
    pub r_target: usize,
    pub horizon: f64,
    /// `log(horizon) / r_target`
    pub target_rate: f64,
    /// Headroom per customer above the mean workload.
    pub c_p: f64,
    pub mean_workload: f64,
    /// `c_p / mean_workload` when the mean workload is positive.
    pub relative_headroom: Option<f64>,
    /// `log(horizon) / Lambda*(c_p)`, which should echo `r_target`.
    pub predicted_r_at_horizon: f64,
    pub warnings: Vec<String>,
}

/// Headroom `c_p` such that the longest latency period expected by
/// `horizon` is `r_target` steps.
pub fn sla_plan(spec: &ModelSpec, r_target: usize, horizon: f64) -> Result<SlaPlan> {
    if !(horizon > 1.0 && horizon.is_finite()) || r_target < 1 {
        return Err(Error::InvalidArgument("need horizon > 1 and r_target >= 1".into()));
    }
    let ctx = RateFunctionCtx::new(spec);
    let target_rate = horizon.ln() / r_target as f64;
    let c_p = ctx.invert_capacity(target_rate)?;
    let achieved = ctx.rate(Transform::Limit, c_p)?;
    let mean_workload = spec.mean_workload();
    let mut warnings = Vec::new();
    if target_rate < NEAR_MEAN_RATE {
        warnings.push(format!(
            "prediction unreliable near the mean: target rate {target_rate:e} puts c_p = {c_p:e} close to zero"
        ));
    }
    Ok(SlaPlan {
        r_target,
        horizon,
        target_rate,
        c_p,
        mean_workload,
        relative_headroom: (mean_workload > 0.0).then(|| c_p / mean_workload),
        predicted_r_at_horizon: horizon.ln() / achieved,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::gaussian_model;

    fn unit() -> ModelSpec {
        gaussian_model(1.0, &[(1, vec![1.0])], &[(0, 1.0)], vec![vec![1.0]])
    }

    #[test]
    fn degenerate_target_is_refused() {
        let m = unit();
        let cfg = StrongLawConfig::new(0.0, vec![5], vec![100], 2, 1);
        assert!(matches!(run_strong_law(&m, &cfg), Err(Error::Degenerate(_))));
    }

    #[test]
    fn small_strong_law_run_is_consistent() {
        let m = unit();
        let mut cfg = StrongLawConfig::new(1.0, vec![2, 4], vec![50, 200], 6, 3);
        cfg.initial_horizon = 64;
        let rep = run_strong_law(&m, &cfg).unwrap();
        assert_eq!(rep.predicted_rate, 0.5);
        assert_eq!(rep.predicted_reciprocal, 2.0);
        assert_eq!(rep.duality_violations, 0);
        for r in &rep.replicates {
            assert!(r.t_r[0] <= r.t_r[1]);
            assert!(r.r_t[0] <= r.r_t[1]);
        }
        let again = run_strong_law(&m, &cfg).unwrap();
        assert_eq!(rep, again);
        cfg.workers = 3;
        assert_eq!(rep, run_strong_law(&m, &cfg).unwrap());
    }

    #[test]
    fn censoring_is_reported() {
        let m = unit();
        let mut cfg = StrongLawConfig::new(3.0, vec![30], vec![], 3, 9);
        cfg.initial_horizon = 16;
        cfg.horizon_cap = 64;
        let rep = run_strong_law(&m, &cfg).unwrap();
        assert_eq!(rep.t_summary[0].censored, 3);
        assert_eq!(rep.t_summary[0].median, None);
        assert!(rep.replicates.iter().all(|r| r.horizon == 64 && r.t_r[0].is_none()));
    }

    #[test]
    fn uldp_prediction_and_determinism() {
        let m = unit();
        let cfg = UldpConfig {
            k_grid: vec![0.0, 1.0],
            t: 10,
            set: ThresholdSet::Above(0.4),
            samples: 5000,
            master_seed: 4,
            noise_mode: None,
            band: 0.25,
            workers: 1,
        };
        let rep = run_uldp(&m, &cfg).unwrap();
        // Lambda^0 = 2 lam^2/3 -> 3 x^2 / 8
        assert!((rep.rows[0].predicted_exponent - 0.06).abs() < 1e-12);
        assert!(rep.rows[1].predicted_exponent > 0.06);
        let par = run_uldp(&m, &UldpConfig { workers: 4, ..cfg.clone() }).unwrap();
        assert_eq!(rep, par);
        let bad = UldpConfig { k_grid: vec![0.25], t: 10, ..cfg };
        assert!(run_uldp(&m, &bad).is_err());
    }

    #[test]
    fn window_sampling_matches_path_law() {
        // exact variance of X(kt,(k+1)t) for the unit model: sum s^2 / (sum s)^2
        let m = unit();
        let (start, len) = (20u64, 10u64);
        let n = 20_000;
        let mass = (m.cumulative_population(start + len) - m.cumulative_population(start)) as f64;
        let vals: Vec<f64> = (0..n)
            .map(|j| window_sum(&m, start, len, derive_seed(77, j), NoiseMode::Off) / mass)
            .collect();
        let (_, var) = crate::stats::mean_var(&vals);
        let exact: f64 = (start + 1..=start + len).map(|s| (s * s) as f64).sum::<f64>() / (mass * mass);
        assert!((var / exact - 1.0).abs() < 0.05, "{var} vs {exact}");
    }

    #[test]
    fn sla_examples() {
        let m = unit();
        let plan = sla_plan(&m, 10, 148.0).unwrap();
        assert!((plan.target_rate - 0.5).abs() < 1e-3);
        assert!((plan.c_p - 1.0).abs() < 1e-3);
        assert!((plan.predicted_r_at_horizon - 10.0).abs() < 1e-6);
        assert!(plan.warnings.is_empty());
        let e5 = sla_plan(&m, 10, 5f64.exp()).unwrap();
        assert!((e5.c_p - 1.0).abs() < 1e-10);
        let near = sla_plan(&m, 1_000_000, 2.0).unwrap();
        assert!(near.c_p < 1e-2);
        assert!(near.warnings[0].contains("unreliable near the mean"));
        let doubled = gaussian_model(1.0, &[(1, vec![1.0])], &[(0, 1.0)], vec![vec![2.0]]);
        let wide = sla_plan(&doubled, 10, 148.0).unwrap();
        assert!((wide.c_p / plan.c_p - 2f64.sqrt()).abs() < 1e-9);
        assert!(sla_plan(&m, 0, 148.0).is_err());
        assert!(sla_plan(&m, 10, 1.0).is_err());
    }
}
