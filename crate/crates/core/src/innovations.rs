//! Innovation and noise laws.
//!
//! An innovation law supplies the log moment generating function of the
//! K-dimensional shocks driving the moving average, its gradient and a
//! sampler. The rate-function engine only ever sees the law through
//! [`InnovationLaw`], so any law with a closed-form log-MGF that is finite
//! everywhere can be plugged in. Noise laws describe the per-customer
//! idiosyncratic term and may offer an exact sampler for sums of draws.

use std::fmt;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

pub trait InnovationLaw: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;

    /// `log E[exp(eta . xi)]`. Returns `+inf` outside the finite domain.
    fn log_mgf(&self, eta: &[f64]) -> f64;

    fn grad_log_mgf(&self, eta: &[f64]) -> Vec<f64>;

    /// `v . grad(eta)`; override to avoid the allocation.
    fn directional_derivative(&self, eta: &[f64], v: &[f64]) -> f64 {
        dot(&self.grad_log_mgf(eta), v)
    }

    /// Writes one draw into `out` (length `dim`).
    fn sample(&self, rng: &mut SimRng, out: &mut [f64]);

    /// Document form, used for hashing and manifests.
    fn to_json(&self) -> serde_json::Value;

    fn as_gaussian(&self) -> Option<&GaussianInnovations> {
        None
    }
}

pub trait NoiseLaw: fmt::Debug + Send + Sync {
    fn log_mgf(&self, lambda: f64) -> f64;

    fn variance(&self) -> f64;

    fn sample(&self, rng: &mut SimRng) -> f64;

    /// One draw distributed as the sum of `n` independent noise terms, when an
    /// exact shortcut exists.
    fn sample_sum(&self, _n: u64, _rng: &mut SimRng) -> Option<f64> {
        None
    }

    /// Whether [`NoiseLaw::sample_sum`] returns `Some`.
    fn has_exact_sum(&self) -> bool {
        false
    }

    fn to_json(&self) -> serde_json::Value;
}

/// Sum of `n` individual draws.
pub fn sample_sum_literal(law: &dyn NoiseLaw, n: u64, rng: &mut SimRng) -> f64 {
    let mut acc = 0.0;
    for _ in 0..n {
        acc += law.sample(rng);
    }
    acc
}

/// Draw of the aggregate noise of `n` customers: the exact shortcut when the
/// law offers one, literal summation otherwise.
pub fn sample_aggregate_noise(law: &dyn NoiseLaw, n: u64, rng: &mut SimRng) -> f64 {
    match law.sample_sum(n, rng) {
        Some(v) => v,
        None => sample_sum_literal(law, n, rng),
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Zero-mean Gaussian innovations with covariance `cov`.
#[derive(Debug, Clone)]
pub struct GaussianInnovations {
    cov: Vec<Vec<f64>>,
    // lower-triangular factor, cov = L L^T
    chol: Vec<Vec<f64>>,
}

impl GaussianInnovations {
    pub fn new(cov: Vec<Vec<f64>>) -> Result<Self> {
        let k = cov.len();
        if k == 0 {
            return Err(Error::model("cov non-empty", "covariance has no rows"));
        }
        for row in &cov {
            if row.len() != k {
                return Err(Error::model("cov square", format!("row of length {} in {k}x{k} covariance", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::model("cov finite", "covariance has non-finite entries"));
            }
        }
        for i in 0..k {
            for j in 0..i {
                let scale = cov[i][j].abs().max(cov[j][i].abs()).max(1.0);
                if (cov[i][j] - cov[j][i]).abs() > 1e-12 * scale {
                    return Err(Error::model("cov symmetric", format!("cov[{i}][{j}] != cov[{j}][{i}]")));
                }
            }
        }
        let chol = psd_cholesky(&cov)?;
        Ok(Self { cov, chol })
    }

    pub fn unit(dim: usize) -> Self {
        let cov = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(cov).expect("identity is a valid covariance")
    }

    pub fn cov(&self) -> &[Vec<f64>] {
        &self.cov
    }

    /// `v^T cov v`
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, row) in self.cov.iter().enumerate() {
            acc += v[i] * dot(row, v);
        }
        acc
    }
}

/// Cholesky factor of a positive semidefinite matrix. Pivots that vanish up to
/// rounding zero their column.
fn psd_cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let k = a.len();
    let scale = (0..k).map(|i| a[i][i].abs()).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    let mut l = vec![vec![0.0; k]; k];
    for j in 0..k {
        let mut d = a[j][j];
        for p in 0..j {
            d -= l[j][p] * l[j][p];
        }
        if d < -tol {
            return Err(Error::model("cov positive semidefinite", format!("negative pivot {d:e} at index {j}")));
        }
        if d <= tol {
            // Off-diagonal residuals in this column must vanish too.
            for i in (j + 1)..k {
                let mut s = a[i][j];
                for p in 0..j {
                    s -= l[i][p] * l[j][p];
                }
                if s.abs() > 1e-9 * scale.sqrt().max(1.0) {
                    return Err(Error::model("cov positive semidefinite", format!("matrix is indefinite at index {j}")));
                }
            }
            continue;
        }
        let root = d.sqrt();
        l[j][j] = root;
        for i in (j + 1)..k {
            let mut s = a[i][j];
            for p in 0..j {
                s -= l[i][p] * l[j][p];
            }
            l[i][j] = s / root;
        }
    }
    Ok(l)
}

impl InnovationLaw for GaussianInnovations {
    fn dim(&self) -> usize {
        self.cov.len()
    }

    fn log_mgf(&self, eta: &[f64]) -> f64 {
        0.5 * self.quadratic_form(eta)
    }

    fn grad_log_mgf(&self, eta: &[f64]) -> Vec<f64> {
        self.cov.iter().map(|row| dot(row, eta)).collect()
    }

    fn directional_derivative(&self, eta: &[f64], v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, row) in self.cov.iter().enumerate() {
            acc += v[i] * dot(row, eta);
        }
        acc
    }

    fn sample(&self, rng: &mut SimRng, out: &mut [f64]) {
        let k = self.cov.len();
        let mut z = [0.0f64; 8];
        let mut heap;
        let z: &mut [f64] = if k <= z.len() {
            &mut z[..k]
        } else {
            heap = vec![0.0; k];
            &mut heap
        };
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
        for (i, o) in out.iter_mut().enumerate().take(k) {
            *o = dot(&self.chol[i][..=i], &z[..=i]);
        }
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "type": "gaussian", "cov": self.cov })
    }

    fn as_gaussian(&self) -> Option<&GaussianInnovations> {
        Some(self)
    }
}

/// Zero-mean Gaussian idiosyncratic noise with variance `var`.
#[derive(Debug, Clone)]
pub struct GaussianNoise {
    var: f64,
}

impl GaussianNoise {
    pub fn new(var: f64) -> Result<Self> {
        if !(var.is_finite() && var >= 0.0) {
            return Err(Error::model("noise variance nonnegative", format!("var = {var}")));
        }
        Ok(Self { var })
    }
}

impl NoiseLaw for GaussianNoise {
    fn log_mgf(&self, lambda: f64) -> f64 {
        0.5 * self.var * lambda * lambda
    }

    fn variance(&self) -> f64 {
        self.var
    }

    fn sample(&self, rng: &mut SimRng) -> f64 {
        if self.var == 0.0 {
            return 0.0;
        }
        let z: f64 = StandardNormal.sample(rng);
        self.var.sqrt() * z
    }

    fn sample_sum(&self, n: u64, rng: &mut SimRng) -> Option<f64> {
        if self.var == 0.0 {
            return Some(0.0);
        }
        let z: f64 = StandardNormal.sample(rng);
        Some((self.var * n as f64).sqrt() * z)
    }

    fn has_exact_sum(&self) -> bool {
        true
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "type": "gaussian_noise", "var": self.var })
    }
}

/// Innovation section of a model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InnovationDoc {
    Gaussian { cov: Vec<Vec<f64>> },
}

/// Noise section of a model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseDoc {
    GaussianNoise { var: f64 },
    None,
}

/// Sanity checks every innovation law must pass at model load: normalization,
/// zero mean, convexity along sampled lines and a gradient consistent with
/// central differences of the log-MGF.
pub fn check_law(law: &dyn InnovationLaw) -> Result<()> {
    let k = law.dim();
    let zero = vec![0.0; k];
    let at_zero = law.log_mgf(&zero);
    if at_zero.abs() > 1e-12 {
        return Err(Error::model("log-mgf vanishes at 0", format!("value {at_zero:e}")));
    }
    let g0 = law.grad_log_mgf(&zero);
    if g0.iter().any(|g| g.abs() > 1e-12) {
        return Err(Error::model("innovations have mean zero", format!("gradient at 0 is {g0:?}")));
    }
    for (a, b) in probe_pairs(k) {
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let fa = law.log_mgf(&a);
        let fb = law.log_mgf(&b);
        let fm = law.log_mgf(&mid);
        if !(fa.is_finite() && fb.is_finite() && fm.is_finite()) {
            return Err(Error::model("log-mgf finite everywhere", format!("non-finite value near {a:?}")));
        }
        let avg = 0.5 * (fa + fb);
        if fm > avg + 1e-9 * avg.abs().max(1.0) {
            return Err(Error::model("log-mgf convex", format!("midpoint of {a:?} and {b:?} lies above the chord")));
        }
        let grad = law.grad_log_mgf(&a);
        let h = 1e-5;
        for i in 0..k {
            let mut up = a.clone();
            let mut dn = a.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (law.log_mgf(&up) - law.log_mgf(&dn)) / (2.0 * h);
            if (fd - grad[i]).abs() > 1e-5 * fd.abs().max(1.0) {
                return Err(Error::model(
                    "gradient matches log-mgf",
                    format!("coordinate {i} at {a:?}: finite difference {fd} vs gradient {}", grad[i]),
                ));
            }
        }
    }
    Ok(())
}

// Deterministic probe points on a small lattice of directions and radii.
fn probe_pairs(k: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out = Vec::new();
    for (n, r) in [0.3, 1.0, 2.5].into_iter().enumerate() {
        for i in 0..k {
            let mut a = vec![0.0; k];
            let mut b = vec![0.0; k];
            a[i] = r;
            b[i] = -0.5 * r;
            b[(i + 1) % k] += 0.7 * r * if n % 2 == 0 { 1.0 } else { -1.0 };
            out.push((a, b));
        }
    }
    out
}

/// Spot check of steepness along `direction`: the directional derivative of
/// `s -> log_mgf(s * direction)` must grow in magnitude across
/// |s| in {1e2, 1e3, 1e4}, on both sides.
pub fn steepness_spot_check(law: &dyn InnovationLaw, direction: &[f64]) -> bool {
    let eval = |s: f64| {
        let eta: Vec<f64> = direction.iter().map(|d| s * d).collect();
        law.directional_derivative(&eta, direction).abs()
    };
    [1.0, -1.0].into_iter().all(|sign| {
        let vals: Vec<f64> = [1e2, 1e3, 1e4].iter().map(|s| eval(sign * s)).collect();
        vals.iter().all(|v| v.is_finite()) && vals[0] < vals[1] && vals[1] < vals[2]
    })
}
