//! Workload-deviation paths.
//!
//! At step `t` every customer of group `i` deviates by
//! `beta_i^T Z(t) + eps`, with `Z(t) = sum_k phi_k xi(t-k)`. Since all groups
//! scale with the same `floor(t^alpha)`, the aggregate deviation is
//! `D(t) = floor(t^alpha) * beta^T Z(t) + (noise over C floor(t^alpha) customers)`
//! with `beta = sum_i c_i beta_i`, and `S(t) = S(t-1) + D(t)`.
//!
//! Innovations are drawn in index order from their own stream and noise from
//! another, so a longer run with the same seed extends a shorter one.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::innovations::{dot, sample_sum_literal};
use crate::model::ModelSpec;
use crate::rng::{self, SimRng, INNOVATION_STREAM, NOISE_STREAM};

/// Literal noise summation refuses runs needing more individual draws.
pub const LITERAL_DRAW_LIMIT: u128 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// One exact draw for the sum over all customers of a step.
    Aggregate,
    /// One draw per customer.
    Literal,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub t_max: usize,
    pub seed: u64,
    /// `None` picks `Aggregate` when the noise law has an exact sum sampler,
    /// `Literal` otherwise.
    pub noise_mode: Option<NoiseMode>,
    /// Keep the per-step deviations `D(t)`.
    pub record_steps: bool,
}

impl PathConfig {
    pub fn new(t_max: usize, seed: u64) -> Self {
        Self {
            t_max,
            seed,
            noise_mode: None,
            record_steps: false,
        }
    }
}

/// Cumulative deviation `S` and normalizer `N`, both indexed `0..=t_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadPath {
    s: Vec<f64>,
    n: Vec<u128>,
    d: Option<Vec<f64>>,
    spec_hash: String,
    seed: u64,
}

impl WorkloadPath {
    /// Path from explicit per-step deviations and per-step population
    /// increments (both indexed from step 1).
    pub fn from_steps(deviations: &[f64], increments: &[u64]) -> Result<Self> {
        if deviations.len() != increments.len() || deviations.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "need equal, nonzero numbers of deviations ({}) and increments ({})",
                deviations.len(),
                increments.len()
            )));
        }
        if increments.contains(&0) {
            return Err(Error::InvalidArgument("population increments must be positive".into()));
        }
        if deviations.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidArgument("deviations must be finite".into()));
        }
        let mut acc = Accumulator::default();
        let mut s = Vec::with_capacity(deviations.len() + 1);
        let mut n = Vec::with_capacity(deviations.len() + 1);
        s.push(0.0);
        n.push(0);
        let mut total = 0u128;
        for (&d, &inc) in deviations.iter().zip(increments) {
            s.push(acc.add(d));
            total += inc as u128;
            n.push(total);
        }
        Ok(Self {
            s,
            n,
            d: Some(deviations.to_vec()),
            spec_hash: String::new(),
            seed: 0,
        })
    }

    /// Per-step deviations with one new customer per step (`N(t) = t`).
    pub fn from_unit_steps(deviations: &[f64]) -> Result<Self> {
        Self::from_steps(deviations, &vec![1; deviations.len()])
    }

    pub fn t_max(&self) -> usize {
        self.s.len() - 1
    }

    /// `S(0..=t_max)`
    pub fn s(&self) -> &[f64] {
        &self.s
    }

    /// `N(0..=t_max)`
    pub fn n(&self) -> &[u128] {
        &self.n
    }

    /// `D(1..=t_max)` when recorded.
    pub fn steps(&self) -> Option<&[f64]> {
        self.d.as_deref()
    }

    pub fn spec_hash(&self) -> &str {
        &self.spec_hash
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Average deviation over the segment `(k, l]`.
    pub fn segment_average(&self, k: usize, l: usize) -> Result<f64> {
        if k >= l || l > self.t_max() {
            return Err(Error::InvalidArgument(format!(
                "segment ({k}, {l}] needs k < l <= {}",
                self.t_max()
            )));
        }
        Ok((self.s[l] - self.s[k]) / (self.n[l] - self.n[k]) as f64)
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub(crate) fn add(&mut self, x: f64) -> f64 {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
        self.value()
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Where the innovations come from.
#[allow(clippy::large_enum_variant)]
enum Source<'a> {
    Sampled(SimRng),
    /// Flattened `xi(j)` for consecutive `j`, `dim` values each.
    Injected { data: &'a [f64], pos: usize },
}

/// Generates `D(t)` for `t = start+1, start+2, ...`.
pub(crate) struct DeviationStream<'a> {
    spec: &'a ModelSpec,
    coeffs: Vec<(i64, f64)>,
    lead: usize,
    // beta . xi(j) for j in [t - lead, t + lag_ahead] around the next t
    window: VecDeque<f64>,
    source: Source<'a>,
    noise_rng: SimRng,
    mode: NoiseMode,
    xi: Vec<f64>,
    t: u64,
}

impl<'a> DeviationStream<'a> {
    fn new(spec: &'a ModelSpec, start: u64, source: Source<'a>, noise_rng: SimRng, mode: NoiseMode) -> Self {
        let ma = spec.ma();
        let mut stream = Self {
            spec,
            coeffs: ma.iter().collect(),
            lead: ma.lead(),
            window: VecDeque::with_capacity(ma.lead() + ma.lag_ahead() + 2),
            source,
            noise_rng,
            mode,
            xi: vec![0.0; spec.innovations().dim()],
            t: start,
        };
        // prime with xi(start+1-lead ..= start+lag_ahead)
        for _ in 0..(ma.lead() + ma.lag_ahead()) {
            let b = stream.draw();
            stream.window.push_back(b);
        }
        stream
    }

    pub(crate) fn sampled(spec: &'a ModelSpec, start: u64, seed: u64, mode: NoiseMode) -> Self {
        Self::new(
            spec,
            start,
            Source::Sampled(rng::stream(seed, INNOVATION_STREAM)),
            rng::stream(seed, NOISE_STREAM),
            mode,
        )
    }

    fn draw(&mut self) -> f64 {
        match &mut self.source {
            Source::Sampled(r) => {
                self.spec.innovations().sample(r, &mut self.xi);
            }
            Source::Injected { data, pos } => {
                let k = self.xi.len();
                self.xi.copy_from_slice(&data[*pos..*pos + k]);
                *pos += k;
            }
        }
        dot(self.spec.beta_sum(), &self.xi)
    }

    pub(crate) fn next_step(&mut self) -> f64 {
        self.t += 1;
        let b = self.draw();
        self.window.push_back(b);
        // window[i] = beta . xi(t - lead + i)
        let mut z = 0.0;
        for &(lag, phi) in &self.coeffs {
            let idx = (self.lead as i64 - lag) as usize;
            z += phi * self.window[idx];
        }
        self.window.pop_front();
        let pop = self.spec.unit_population(self.t);
        let mut d = pop as f64 * z;
        if let Some(noise) = self.spec.noise() {
            let customers = self.spec.total_c() * pop;
            d += match self.mode {
                NoiseMode::Off => 0.0,
                NoiseMode::Aggregate => noise
                    .sample_sum(customers, &mut self.noise_rng)
                    .unwrap_or_else(|| sample_sum_literal(noise, customers, &mut self.noise_rng)),
                NoiseMode::Literal => sample_sum_literal(noise, customers, &mut self.noise_rng),
            };
        }
        d
    }
}

fn resolve_mode(spec: &ModelSpec, cfg: &PathConfig) -> Result<NoiseMode> {
    let mode = match (cfg.noise_mode, spec.noise()) {
        (_, None) => return Ok(NoiseMode::Off),
        (Some(m), _) => m,
        (None, Some(noise)) if noise.has_exact_sum() => NoiseMode::Aggregate,
        (None, Some(_)) => NoiseMode::Literal,
    };
    if mode == NoiseMode::Literal {
        let draws = spec.cumulative_population(cfg.t_max as u64);
        if draws > LITERAL_DRAW_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "literal noise needs {draws} draws (limit {LITERAL_DRAW_LIMIT}); use aggregate mode"
            )));
        }
    }
    Ok(mode)
}

fn run(spec: &ModelSpec, cfg: &PathConfig, mut stream: DeviationStream<'_>) -> WorkloadPath {
    let t_max = cfg.t_max;
    let n = spec.cumulative_table(t_max as u64);
    let mut s = Vec::with_capacity(t_max + 1);
    let mut d = cfg.record_steps.then(|| Vec::with_capacity(t_max));
    s.push(0.0);
    let mut acc = Accumulator::default();
    for _ in 0..t_max {
        let step = stream.next_step();
        if let Some(d) = d.as_mut() {
            d.push(step);
        }
        s.push(acc.add(step));
    }
    WorkloadPath {
        s,
        n,
        d,
        spec_hash: spec.digest(),
        seed: cfg.seed,
    }
}

/// Simulates one path from the seed in `cfg`.
pub fn simulate(spec: &ModelSpec, cfg: &PathConfig) -> Result<WorkloadPath> {
    if cfg.t_max < 1 {
        return Err(Error::InvalidArgument("t_max must be >= 1".into()));
    }
    let mode = resolve_mode(spec, cfg)?;
    let stream = DeviationStream::sampled(spec, 0, cfg.seed, mode);
    Ok(run(spec, cfg, stream))
}

/// Number of innovation vectors an injected run of length `t_max` consumes:
/// `xi(j)` for `j` in `1 - lead ..= t_max + lag_ahead`.
pub fn injected_len(spec: &ModelSpec, t_max: usize) -> usize {
    t_max + spec.ma().lead() + spec.ma().lag_ahead()
}

/// Simulates with caller-supplied innovations, flattened with
/// `spec.innovations().dim()` values per index, covering
/// `1 - lead ..= t_max + lag_ahead` in order. Noise, if any, is still drawn
/// from the seed in `cfg`.
pub fn simulate_injected(spec: &ModelSpec, cfg: &PathConfig, innovations: &[f64]) -> Result<WorkloadPath> {
    if cfg.t_max < 1 {
        return Err(Error::InvalidArgument("t_max must be >= 1".into()));
    }
    let need = injected_len(spec, cfg.t_max) * spec.innovations().dim();
    if innovations.len() != need {
        return Err(Error::InvalidArgument(format!(
            "injected innovations have {} values, need {need}",
            innovations.len()
        )));
    }
    let mode = resolve_mode(spec, cfg)?;
    let stream = DeviationStream::new(
        spec,
        0,
        Source::Injected {
            data: innovations,
            pos: 0,
        },
        rng::stream(cfg.seed, NOISE_STREAM),
        mode,
    );
    Ok(run(spec, cfg, stream))
}

/// `S((k+1)t) - S(kt)` for one independent draw of the window `(kt, (k+1)t]`,
/// generated without simulating the prefix.
pub(crate) fn window_sum(spec: &ModelSpec, start: u64, len: u64, seed: u64, mode: NoiseMode) -> f64 {
    let mut stream = DeviationStream::sampled(spec, start, seed, mode);
    let mut acc = Accumulator::default();
    for _ in 0..len {
        acc.add(stream.next_step());
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::innovations::{GaussianInnovations, GaussianNoise};
    use crate::model::tests::gaussian_model;
    use crate::model::{CustomerGroup, MACoefficients};
    use std::sync::Arc;

    fn unit() -> ModelSpec {
        gaussian_model(1.0, &[(1, vec![1.0])], &[(0, 1.0)], vec![vec![1.0]])
    }

    fn with_noise(spec: &ModelSpec, var: f64) -> ModelSpec {
        spec.with_noise(Some(Arc::new(GaussianNoise::new(var).unwrap())))
    }

    #[test]
    fn injected_example() {
        let m = unit();
        let mut cfg = PathConfig::new(3, 0);
        cfg.record_steps = true;
        let p = simulate_injected(&m, &cfg, &[1.0, -1.0, 1.0]).unwrap();
        assert_eq!(p.steps().unwrap(), &[1.0, -2.0, 3.0]);
        assert_eq!(p.s(), &[0.0, 1.0, -1.0, 2.0]);
        assert_eq!(p.n(), &[0, 1, 3, 6]);
        assert_eq!(p.segment_average(0, 3).unwrap(), 2.0 / 6.0);
        assert_eq!(p.segment_average(1, 2).unwrap(), -1.0);
        assert!(p.segment_average(2, 2).is_err());
        assert!(p.segment_average(1, 4).is_err());
    }

    #[test]
    fn zero_innovations_give_zero_path() {
        let m = unit();
        let p = simulate_injected(&m, &PathConfig::new(50, 0), &[0.0; 50]).unwrap();
        assert!(p.s().iter().all(|&s| s == 0.0));
        assert!(simulate_injected(&m, &PathConfig::new(50, 0), &[0.0; 49]).is_err());
    }

    #[test]
    fn two_sided_window_is_aligned() {
        // Z(t) = xi(t) + 2 xi(t-1) + 3 xi(t+1); xi indexed from 0 to t_max+1
        let m = gaussian_model(1.0, &[(1, vec![1.0])], &[(-1, 3.0), (0, 1.0), (1, 2.0)], vec![vec![1.0]]);
        let t_max = 4;
        let xi: Vec<f64> = (0..injected_len(&m, t_max)).map(|j| (j * j) as f64 + 1.0).collect();
        let mut cfg = PathConfig::new(t_max, 0);
        cfg.record_steps = true;
        let p = simulate_injected(&m, &cfg, &xi).unwrap();
        let at = |j: usize| xi[j]; // xi(j) lives at offset j (lead = 1)
        for t in 1..=t_max {
            let z = at(t) + 2.0 * at(t - 1) + 3.0 * at(t + 1);
            assert_eq!(p.steps().unwrap()[t - 1], t as f64 * z);
        }
    }

    #[test]
    fn multi_group_uses_aggregate_beta() {
        let m = ModelSpec::new(
            0.5,
            vec![
                CustomerGroup { c: 2, mu: 1.0, beta: vec![1.0, 0.0] },
                CustomerGroup { c: 3, mu: 1.0, beta: vec![0.5, 2.0] },
            ],
            MACoefficients::new([(0, 1.0)], 0.0).unwrap(),
            Arc::new(GaussianInnovations::unit(2)),
            None,
        )
        .unwrap();
        let xi = [1.0, 2.0, -1.0, 0.5, 0.25, 4.0];
        let mut cfg = PathConfig::new(3, 0);
        cfg.record_steps = true;
        let p = simulate_injected(&m, &cfg, &xi).unwrap();
        for t in 1..=3usize {
            let pop = (t as f64).sqrt().floor();
            // sum over customers of beta_i . xi
            let per_step = 2.0 * (xi[2 * t - 2]) + 3.0 * (0.5 * xi[2 * t - 2] + 2.0 * xi[2 * t - 1]);
            assert_eq!(p.steps().unwrap()[t - 1], pop * per_step);
        }
        assert_eq!(p.n(), &[0, 5, 10, 15]);
    }

    #[test]
    fn reproducible_and_prefix_stable() {
        let m = with_noise(&unit(), 1.0);
        let a = simulate(&m, &PathConfig::new(200, 17)).unwrap();
        let b = simulate(&m, &PathConfig::new(200, 17)).unwrap();
        assert_eq!(a, b);
        let long = simulate(&m, &PathConfig::new(400, 17)).unwrap();
        assert_eq!(&long.s()[..=200], a.s());
        let other = simulate(&m, &PathConfig::new(200, 18)).unwrap();
        assert_ne!(a.s(), other.s());
    }

    #[test]
    fn single_group_equals_direct_sum() {
        let m = unit();
        let xi: Vec<f64> = (0..100).map(|j| ((j * 37 % 11) as f64 - 5.0) * 0.5).collect();
        let p = simulate_injected(&m, &PathConfig::new(100, 0), &xi).unwrap();
        let mut direct = 0.0;
        for t in 1..=100usize {
            direct += t as f64 * xi[t - 1];
            assert_eq!(p.s()[t], direct);
        }
    }

    #[test]
    fn mean_of_segment_average_is_zero() {
        let m = unit();
        let n = 10_000;
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let p = simulate(&m, &PathConfig::new(50, rng::derive_seed(99, i))).unwrap();
                p.segment_average(0, 50).unwrap()
            })
            .collect();
        let (mean, var) = crate::stats::mean_var(&vals);
        assert!(mean.abs() < 4.0 * (var / n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn aggregate_and_literal_noise_agree_in_law() {
        // same seed with noise off isolates the noise total in S(20)
        let m = with_noise(&unit(), 1.0);
        let sample = |mode: NoiseMode, base: u64| -> Vec<f64> {
            (0..10_000)
                .map(|i| {
                    let mut cfg = PathConfig::new(20, rng::derive_seed(base, i));
                    cfg.noise_mode = Some(NoiseMode::Off);
                    let quiet = simulate(&m, &cfg).unwrap().s()[20];
                    cfg.noise_mode = Some(mode);
                    simulate(&m, &cfg).unwrap().s()[20] - quiet
                })
                .collect()
        };
        let mut a = sample(NoiseMode::Aggregate, 1);
        let mut b = sample(NoiseMode::Literal, 2);
        let (_, va) = crate::stats::mean_var(&a);
        let (_, vb) = crate::stats::mean_var(&b);
        assert!((va / 210.0 - 1.0).abs() < 0.06 && (vb / 210.0 - 1.0).abs() < 0.06, "{va} {vb}");
        let d = crate::stats::ks_two_sample(&mut a, &mut b);
        assert!(d < crate::stats::ks_critical(10_000, 10_000, 0.01), "KS {d}");
    }

    #[test]
    fn literal_guard() {
        let m = with_noise(&unit(), 1.0);
        let mut cfg = PathConfig::new(100_000, 0);
        cfg.noise_mode = Some(NoiseMode::Literal);
        assert!(simulate(&m, &cfg).is_err());
    }

    #[test]
    fn noise_excess_variance_decays_like_inverse_population() {
        // X(0,t) with noise minus without noise: the noise term alone has
        // variance 1/N(t). Regress log(excess variance) on log N(t).
        let base = unit();
        let noisy = with_noise(&base, 1.0);
        let ts = [10usize, 20, 50, 100, 200];
        let reps = 4000u64;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &t in &ts {
            let mut diff = Vec::with_capacity(reps as usize);
            for i in 0..reps {
                let seed = rng::derive_seed(t as u64, i);
                // same innovation stream, so the difference isolates the noise
                let a = simulate(&noisy, &PathConfig::new(t, seed)).unwrap();
                let b = simulate(&base, &PathConfig::new(t, seed)).unwrap();
                diff.push(a.segment_average(0, t).unwrap() - b.segment_average(0, t).unwrap());
            }
            let (_, var) = crate::stats::mean_var(&diff);
            xs.push((base.cumulative_population(t as u64) as f64).ln());
            ys.push(var.ln());
        }
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
        assert!((slope + 1.0).abs() <= 0.2, "slope {slope}");
    }
}
