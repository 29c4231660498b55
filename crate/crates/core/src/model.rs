//! Static description of the workload model and its deterministic
//! population arithmetic.
//!
//! Group `i` holds `c_i * floor(t^alpha)` customers at time `t`; every
//! customer's deviation loads the shared moving average `Z(t)` through the
//! group weights `beta_i`. Only population-weighted aggregates of the groups
//! ever matter, so the spec caches `C = sum c_i`, `beta = sum c_i beta_i` and
//! `beta_bar = beta / C`.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::innovations::{
    check_law, steepness_spot_check, GaussianInnovations, GaussianNoise, InnovationDoc, InnovationLaw, NoiseDoc,
    NoiseLaw,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomerGroup {
    /// Group size coefficient.
    pub c: u64,
    /// Mean workload per customer.
    pub mu: f64,
    /// Loading weights on the innovation coordinates.
    pub beta: Vec<f64>,
}

/// Moving-average coefficients `phi_k` with finite (possibly two-sided)
/// support.
#[derive(Debug, Clone, PartialEq)]
pub struct MACoefficients {
    coeffs: BTreeMap<i64, f64>,
    trunc_tol: f64,
}

impl MACoefficients {
    /// Builds from explicit `(lag, value)` pairs. Outermost lags are dropped
    /// while their cumulative absolute mass stays below `trunc_tol`.
    pub fn new(pairs: impl IntoIterator<Item = (i64, f64)>, trunc_tol: f64) -> Result<Self> {
        if !(trunc_tol.is_finite() && trunc_tol >= 0.0) {
            return Err(Error::model("trunc_tol nonnegative", format!("trunc_tol = {trunc_tol}")));
        }
        let mut coeffs = BTreeMap::new();
        for (lag, value) in pairs {
            if !value.is_finite() {
                return Err(Error::model("phi finite", format!("phi[{lag}] = {value}")));
            }
            if coeffs.insert(lag, value).is_some() {
                return Err(Error::model("phi lags distinct", format!("lag {lag} listed twice")));
            }
        }
        let mut ma = Self { coeffs, trunc_tol };
        ma.truncate();
        if ma.total() == 0.0 {
            return Err(Error::model("phi != 0", "moving-average coefficients sum to zero"));
        }
        Ok(ma)
    }

    /// Builds from a coefficient generator over lags `-max_lag..=max_lag`,
    /// keeping the smallest symmetric window whose discarded mass is below
    /// `trunc_tol`. Fails when the outer half of the scanned range still
    /// carries mass `>= trunc_tol`, i.e. the tail has not settled.
    pub fn from_generator(gen: impl Fn(i64) -> f64, trunc_tol: f64, max_lag: i64) -> Result<Self> {
        if !(trunc_tol > 0.0) || max_lag < 1 {
            return Err(Error::InvalidArgument("generator needs trunc_tol > 0 and max_lag >= 1".into()));
        }
        let outer: f64 = (max_lag / 2 + 1..=max_lag).map(|k| gen(k).abs() + gen(-k).abs()).sum();
        if !(outer < trunc_tol) {
            return Err(Error::Truncation { tol: trunc_tol, max_lag });
        }
        Self::new((-max_lag..=max_lag).map(|k| (k, gen(k))).filter(|&(_, v)| v != 0.0), trunc_tol)
    }

    fn truncate(&mut self) {
        let mut dropped = 0.0;
        loop {
            let (lo, hi) = match (self.coeffs.first_key_value(), self.coeffs.last_key_value()) {
                (Some((&lo, _)), Some((&hi, _))) if lo != hi => (lo, hi),
                _ => break,
            };
            // trim the farther lag first
            let lag = if hi.unsigned_abs() >= lo.unsigned_abs() { hi } else { lo };
            let mass = self.coeffs[&lag].abs();
            if dropped + mass < self.trunc_tol {
                dropped += mass;
                self.coeffs.remove(&lag);
            } else {
                break;
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.coeffs.iter().map(|(&k, &v)| (k, v))
    }

    /// `phi = sum_k phi_k`
    pub fn total(&self) -> f64 {
        self.coeffs.values().sum()
    }

    pub fn abs_sum(&self) -> f64 {
        self.coeffs.values().map(|v| v.abs()).sum()
    }

    /// Largest positive lag (0 if none): `Z(t)` reaches back to `xi(t - lag)`.
    pub fn lead(&self) -> usize {
        self.coeffs.keys().next_back().map_or(0, |&k| k.max(0) as usize)
    }

    /// Largest negative lag in absolute value (0 if none).
    pub fn lag_ahead(&self) -> usize {
        self.coeffs.keys().next().map_or(0, |&k| (-k).max(0) as usize)
    }

    pub fn trunc_tol(&self) -> f64 {
        self.trunc_tol
    }
}

/// One entry of the `phi` array in a model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiEntry {
    pub lag: i64,
    pub value: f64,
}

/// The JSON model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub alpha: f64,
    pub groups: Vec<CustomerGroup>,
    pub phi: Vec<PhiEntry>,
    pub innovations: InnovationDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trunc_tol: Option<f64>,
}

/// `floor(t^alpha)` with exact resolution of values that land within
/// rounding distance of an integer.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PowerFloor {
    alpha: f64,
    rational: Option<(u32, u32)>,
}

impl PowerFloor {
    fn new(alpha: f64) -> Self {
        Self {
            alpha,
            rational: small_rational(alpha, 64),
        }
    }

    fn eval(&self, t: u64) -> u64 {
        if t <= 1 {
            return t;
        }
        if self.alpha == 1.0 {
            return t;
        }
        let v = (t as f64).powf(self.alpha);
        let r = v.round();
        if (v - r).abs() > 1e-9 * r.max(1.0) {
            return v.floor() as u64;
        }
        let r_int = r as u64;
        let at_least_r = match self.rational.and_then(|(p, q)| pow_ge(t, p, r_int, q)) {
            Some(ge) => ge,
            None => (r_int as f64).powf(1.0 / self.alpha) <= t as f64,
        };
        if at_least_r {
            r_int
        } else {
            r_int - 1
        }
    }
}

// t^p >= r^q in exact integer arithmetic, None on overflow.
fn pow_ge(t: u64, p: u32, r: u64, q: u32) -> Option<bool> {
    let lhs = (t as u128).checked_pow(p)?;
    let rhs = (r as u128).checked_pow(q)?;
    Some(lhs >= rhs)
}

// p/q == x exactly (to 1e-12 relative) with q <= max_den, via continued fractions.
fn small_rational(x: f64, max_den: u32) -> Option<(u32, u32)> {
    if !(x > 0.0) || x > 1e6 {
        return None;
    }
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut f = x;
    for _ in 0..32 {
        let a = f.floor();
        let a_int = a as u64;
        let h2 = a_int.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a_int.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den as u64 {
            return None;
        }
        if ((h2 as f64 / k2 as f64) - x).abs() <= 1e-12 * x {
            return Some((u32::try_from(h2).ok()?, k2 as u32));
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = f - a;
        if frac <= 0.0 {
            return None;
        }
        f = 1.0 / frac;
    }
    None
}

/// Full workload model.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    alpha: f64,
    groups: Vec<CustomerGroup>,
    ma: MACoefficients,
    innovations: Arc<dyn InnovationLaw>,
    noise: Option<Arc<dyn NoiseLaw>>,
    power: PowerFloor,
    total_c: u64,
    beta_sum: Vec<f64>,
    beta_bar: Vec<f64>,
    phi: f64,
    steep: bool,
}

impl ModelSpec {
    pub fn new(
        alpha: f64,
        groups: Vec<CustomerGroup>,
        ma: MACoefficients,
        innovations: Arc<dyn InnovationLaw>,
        noise: Option<Arc<dyn NoiseLaw>>,
    ) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::model("alpha > 0", format!("alpha = {alpha}")));
        }
        if groups.is_empty() {
            return Err(Error::model("at least one group", "groups is empty"));
        }
        let dim = innovations.dim();
        for (i, g) in groups.iter().enumerate() {
            if g.c < 1 {
                return Err(Error::model("c >= 1", format!("group {i} has c = 0")));
            }
            if g.beta.len() != dim {
                return Err(Error::model(
                    "beta length equals innovation dimension",
                    format!("group {i} has {} weights, innovations have dimension {dim}", g.beta.len()),
                ));
            }
            if !g.mu.is_finite() || g.beta.iter().any(|b| !b.is_finite()) {
                return Err(Error::model("group parameters finite", format!("group {i}")));
            }
        }
        let total_c = groups
            .iter()
            .try_fold(0u64, |acc, g| acc.checked_add(g.c))
            .ok_or_else(|| Error::model("C fits in 64 bits", "sum of c overflows"))?;
        let mut beta_sum = vec![0.0; dim];
        for g in &groups {
            for (acc, b) in beta_sum.iter_mut().zip(&g.beta) {
                *acc += g.c as f64 * b;
            }
        }
        let beta_bar: Vec<f64> = beta_sum.iter().map(|b| b / total_c as f64).collect();
        let phi = ma.total();
        if phi == 0.0 {
            return Err(Error::model("phi != 0", "moving-average coefficients sum to zero"));
        }
        check_law(innovations.as_ref())?;
        let direction: Vec<f64> = beta_bar.iter().map(|b| phi * b).collect();
        let steep = steepness_spot_check(innovations.as_ref(), &direction);
        if !steep {
            log::warn!("steepness spot check failed along phi * beta_bar; rate functions may not bracket");
        }
        Ok(Self {
            alpha,
            groups,
            ma,
            innovations,
            noise,
            power: PowerFloor::new(alpha),
            total_c,
            beta_sum,
            beta_bar,
            phi,
            steep,
        })
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let ma = MACoefficients::new(
            doc.phi.iter().map(|e| (e.lag, e.value)),
            doc.trunc_tol.unwrap_or(0.0),
        )?;
        let innovations: Arc<dyn InnovationLaw> = match &doc.innovations {
            InnovationDoc::Gaussian { cov } => Arc::new(GaussianInnovations::new(cov.clone())?),
        };
        let noise: Option<Arc<dyn NoiseLaw>> = match &doc.noise {
            None | Some(NoiseDoc::None) => None,
            Some(NoiseDoc::GaussianNoise { var }) => Some(Arc::new(GaussianNoise::new(*var)?)),
        };
        Self::new(doc.alpha, doc.groups.clone(), ma, innovations, noise)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }

    /// Canonical JSON form of the model (after truncation).
    pub fn to_json(&self) -> serde_json::Value {
        let phi: Vec<serde_json::Value> = self
            .ma
            .iter()
            .map(|(lag, value)| serde_json::json!({ "lag": lag, "value": value }))
            .collect();
        let noise = self
            .noise
            .as_ref()
            .map_or_else(|| serde_json::json!({ "type": "none" }), |n| n.to_json());
        serde_json::json!({
            "alpha": self.alpha,
            "groups": self.groups,
            "phi": phi,
            "innovations": self.innovations.to_json(),
            "noise": noise,
            "trunc_tol": self.ma.trunc_tol(),
        })
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(&self.to_json()).expect("model JSON serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn groups(&self) -> &[CustomerGroup] {
        &self.groups
    }

    pub fn ma(&self) -> &MACoefficients {
        &self.ma
    }

    pub fn innovations(&self) -> &dyn InnovationLaw {
        self.innovations.as_ref()
    }

    pub fn noise(&self) -> Option<&dyn NoiseLaw> {
        self.noise.as_deref()
    }

    /// Same model with the noise law replaced.
    pub fn with_noise(&self, noise: Option<Arc<dyn NoiseLaw>>) -> Self {
        Self {
            noise,
            ..self.clone()
        }
    }

    /// `C = sum_i c_i`
    pub fn total_c(&self) -> u64 {
        self.total_c
    }

    /// `beta_bar = C^-1 sum_i c_i beta_i`
    pub fn aggregate_beta(&self) -> &[f64] {
        &self.beta_bar
    }

    /// `sum_i c_i beta_i`
    pub fn beta_sum(&self) -> &[f64] {
        &self.beta_sum
    }

    /// `phi = sum_k phi_k`, nonzero by construction.
    pub fn total_phi(&self) -> f64 {
        self.phi
    }

    /// Population-weighted mean workload per customer.
    pub fn mean_workload(&self) -> f64 {
        self.groups.iter().map(|g| g.c as f64 * g.mu).sum::<f64>() / self.total_c as f64
    }

    /// Whether the steepness spot check passed at load.
    pub fn is_steep(&self) -> bool {
        self.steep
    }

    /// `floor(t^alpha)`
    pub fn unit_population(&self, t: u64) -> u64 {
        self.power.eval(t)
    }

    /// `n_i(t) = c_i floor(t^alpha)`; `group` is zero based.
    pub fn population(&self, group: usize, t: u64) -> Result<u64> {
        let g = self.groups.get(group).ok_or(Error::GroupIndex {
            index: group,
            groups: self.groups.len(),
        })?;
        Ok(g.c * self.unit_population(t))
    }

    /// `sum_i n_i(t) = C floor(t^alpha)`
    pub fn step_population(&self, t: u64) -> u64 {
        self.total_c * self.unit_population(t)
    }

    /// `N(t) = sum_{s=1..t} sum_i n_i(s)`
    pub fn cumulative_population(&self, t: u64) -> u128 {
        (1..=t).map(|s| self.step_population(s) as u128).sum()
    }

    /// `N(0..=t_max)` as a prefix array.
    pub fn cumulative_table(&self, t_max: u64) -> Vec<u128> {
        let mut out = Vec::with_capacity(t_max as usize + 1);
        let mut acc = 0u128;
        out.push(0);
        for s in 1..=t_max {
            acc += self.step_population(s) as u128;
            out.push(acc);
        }
        out
    }
}
