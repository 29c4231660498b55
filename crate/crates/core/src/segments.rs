//! Long-strange-segment statistics on a path.
//!
//! * `R_t(A)`: the longest `m` such that some segment `(l-m, l]` with
//!   `l <= t` has average in `A`;
//! * `T_r(A)`: the first `l` such that some `(k, l]` with `l - k >= r` has
//!   average in `A`.
//!
//! They are dual: `T_r(A) <= m` iff `R_m(A) >= r`.
//!
//! For `A = (a, inf)`, `X(k,l) > a` iff `G(l) > G(k)` with
//! `G(m) = S(m) - a N(m)`, so `R_t` is a maximum-width ramp of `G` and `T_r`
//! compares `G(l)` with a running minimum. `(-inf, a)` flips the inequality.
//! Intervals use the quadratic enumeration.
//!
//! Witnesses are canonical so the fast scans and the enumerations agree
//! exactly: for `R`, the widest segment with the smallest start; for `T`,
//! the smallest qualifying start at the first qualifying end.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::WorkloadPath;

/// Open threshold sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSet {
    /// `(a, inf)`
    Above(f64),
    /// `(-inf, a)`
    Below(f64),
    /// `(a, b)`
    Interval(f64, f64),
}

impl ThresholdSet {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::InvalidArgument(format!("interval ({a}, {b}) is empty")));
        }
        Ok(ThresholdSet::Interval(a, b))
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            ThresholdSet::Above(a) => x > a,
            ThresholdSet::Below(a) => x < a,
            ThresholdSet::Interval(a, b) => a < x && x < b,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ThresholdSet::Above(a) | ThresholdSet::Below(a) => a.is_finite(),
            ThresholdSet::Interval(a, b) => a.is_finite() && b.is_finite() && a < b,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad threshold set {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    R,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub statistic: Statistic,
    /// `R_t` (always present) or `T_r` (absent when not reached by `t_max`).
    pub value: Option<usize>,
    /// `(k, l)` of a witnessing segment `(k, l]`.
    pub witness: Option<(usize, usize)>,
}

// Score with X(k,l) in A iff score(l) `beats` score(k).
enum Ramp {
    Up(Vec<f64>),
    Down(Vec<f64>),
}

impl Ramp {
    fn new(path: &WorkloadPath, set: &ThresholdSet, upto: usize) -> Option<Self> {
        let score = |a: f64| -> Vec<f64> {
            path.s()[..=upto]
                .iter()
                .zip(&path.n()[..=upto])
                .map(|(&s, &n)| s - a * n as f64)
                .collect()
        };
        match *set {
            ThresholdSet::Above(a) => Some(Ramp::Up(score(a))),
            ThresholdSet::Below(a) => Some(Ramp::Down(score(a))),
            ThresholdSet::Interval(..) => None,
        }
    }

    // does ending at l beat starting at k
    fn beats(&self, l: usize, k: usize) -> bool {
        match self {
            Ramp::Up(g) => g[l] > g[k],
            Ramp::Down(g) => g[l] < g[k],
        }
    }

    // strictly better start than k (lower for Up)
    fn better_start(&self, j: usize, k: usize) -> bool {
        self.beats(k, j)
    }
}

fn check_horizon(path: &WorkloadPath, t: usize) -> Result<()> {
    if t < 1 || t > path.t_max() {
        return Err(Error::InvalidArgument(format!("horizon t = {t} outside 1..={}", path.t_max())));
    }
    Ok(())
}

/// `R_t(A)` with its canonical witness.
pub fn r_stat(path: &WorkloadPath, set: &ThresholdSet, t: usize) -> Result<SegmentReport> {
    set.validate()?;
    check_horizon(path, t)?;
    let Some(ramp) = Ramp::new(path, set, t) else {
        return brute_force_r(path, set, t);
    };
    // starts that no earlier index dominates, in index order
    let mut stack: Vec<usize> = Vec::new();
    for k in 0..t {
        if stack.last().is_none_or(|&top| ramp.better_start(k, top)) {
            stack.push(k);
        }
    }
    let mut best: Option<(usize, usize)> = None;
    for l in (1..=t).rev() {
        while let Some(&k) = stack.last() {
            if k >= l {
                stack.pop();
                continue;
            }
            if !ramp.beats(l, k) {
                break;
            }
            // l is the last end beating k; later pops have smaller k
            if best.is_none_or(|(bk, bl)| l - k >= bl - bk) {
                best = Some((k, l));
            }
            stack.pop();
        }
        if stack.is_empty() {
            break;
        }
    }
    Ok(report_r(best))
}

fn report_r(best: Option<(usize, usize)>) -> SegmentReport {
    SegmentReport {
        statistic: Statistic::R,
        value: Some(best.map_or(0, |(k, l)| l - k)),
        witness: best,
    }
}

/// `R_1(A), ..., R_t(A)` in one pass. Entry `i` is `R_{i+1}`.
pub fn r_trajectory(path: &WorkloadPath, set: &ThresholdSet, t: usize) -> Result<Vec<usize>> {
    set.validate()?;
    check_horizon(path, t)?;
    let mut out = Vec::with_capacity(t);
    let mut best = 0usize;
    match Ramp::new(path, set, t) {
        Some(ramp) => {
            // prefix-dominant starts in index order; their scores improve strictly
            let mut stack: Vec<usize> = vec![0];
            for l in 1..=t {
                // first stack entry that l beats; beating is monotone along the stack
                let pos = stack.partition_point(|&k| !ramp.beats(l, k));
                if pos < stack.len() {
                    best = best.max(l - stack[pos]);
                }
                out.push(best);
                if ramp.better_start(l, *stack.last().expect("stack holds index 0")) {
                    stack.push(l);
                }
            }
        }
        None => {
            for l in 1..=t {
                if let Some(k) = (0..l).find(|&k| set.contains(average(path, k, l))) {
                    best = best.max(l - k);
                }
                out.push(best);
            }
        }
    }
    Ok(out)
}

/// `T_r(A)` with its canonical witness, scanning the whole path.
pub fn t_stat(path: &WorkloadPath, set: &ThresholdSet, r: usize) -> Result<SegmentReport> {
    set.validate()?;
    if r < 1 {
        return Err(Error::InvalidArgument("segment length r must be >= 1".into()));
    }
    let t_max = path.t_max();
    let absent = SegmentReport {
        statistic: Statistic::T,
        value: None,
        witness: None,
    };
    if r > t_max {
        return Ok(absent);
    }
    let Some(ramp) = Ramp::new(path, set, t_max) else {
        return brute_force_t(path, set, r);
    };
    let mut champion = 0usize;
    for l in r..=t_max {
        let k = l - r;
        if ramp.better_start(k, champion) {
            champion = k;
        }
        if ramp.beats(l, champion) {
            let first = (0..=l - r).find(|&j| ramp.beats(l, j)).expect("champion qualifies");
            return Ok(SegmentReport {
                statistic: Statistic::T,
                value: Some(l),
                witness: Some((first, l)),
            });
        }
    }
    Ok(absent)
}

fn average(path: &WorkloadPath, k: usize, l: usize) -> f64 {
    (path.s()[l] - path.s()[k]) / (path.n()[l] - path.n()[k]) as f64
}

/// `R_t(A)` by enumerating every segment ending by `t`.
pub fn brute_force_r(path: &WorkloadPath, set: &ThresholdSet, t: usize) -> Result<SegmentReport> {
    set.validate()?;
    check_horizon(path, t)?;
    let mut best: Option<(usize, usize)> = None;
    for m in (1..=t).rev() {
        if let Some(l) = (m..=t).find(|&l| set.contains(average(path, l - m, l))) {
            best = Some((l - m, l));
            break;
        }
    }
    Ok(report_r(best))
}

/// `T_r(A)` by enumerating every segment.
pub fn brute_force_t(path: &WorkloadPath, set: &ThresholdSet, r: usize) -> Result<SegmentReport> {
    set.validate()?;
    if r < 1 {
        return Err(Error::InvalidArgument("segment length r must be >= 1".into()));
    }
    for l in r..=path.t_max() {
        if let Some(k) = (0..=l - r).find(|&k| set.contains(average(path, k, l))) {
            return Ok(SegmentReport {
                statistic: Statistic::T,
                value: Some(l),
                witness: Some((k, l)),
            });
        }
    }
    Ok(SegmentReport {
        statistic: Statistic::T,
        value: None,
        witness: None,
    })
}

/// `T_r(A)` for several `r` in one pass over the path. `rs` need not be
/// sorted; output follows its order.
pub fn t_stats(path: &WorkloadPath, set: &ThresholdSet, rs: &[usize]) -> Result<Vec<SegmentReport>> {
    rs.iter().map(|&r| t_stat(path, set, r)).collect()
}
