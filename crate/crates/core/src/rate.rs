//! Scaled log-MGFs of segment averages and their Fenchel-Legendre
//! transforms.
//!
//! Two families are evaluated:
//!
//! * the limit `Lambda(lam) = Lambda_xi(lam * phi * beta_bar)`, whose
//!   transform is the rate in the strong law for `T_r` and `R_t`;
//! * the segment functions
//!   `Lambda^k(lam) = int_k^{k+1} Lambda_xi(w_k(y) * lam * phi * beta_bar) dy`
//!   with `w_k(y) = (alpha+1) y^alpha / ((k+1)^(alpha+1) - k^(alpha+1))`,
//!   governing the segment `(kt, (k+1)t]` of a path of length `t`.
//!
//! All of them are convex with derivative zero at the origin, so conjugates
//! are found by bracketing the slope equation `f'(lam) = x` and bisecting.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::quadrature;
use crate::segments::ThresholdSet;

/// Which log-MGF to transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Limit,
    /// Segment starting at relative position `k >= 0`.
    Segment(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LegendreResult {
    pub value: f64,
    /// Maximizing `lam`, the point where the slope equals `x`.
    pub argmax_lambda: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateConfig {
    pub quad_order: usize,
    pub quad_tol: f64,
    pub root_tol: f64,
    /// Doublings of the initial bracket `|lam| = 1` before giving up.
    pub bracket_doublings: u32,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            quad_order: 16,
            quad_tol: 1e-10,
            root_tol: 1e-12,
            bracket_doublings: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RateFunctionCtx<'a> {
    spec: &'a ModelSpec,
    direction: Vec<f64>,
    cfg: RateConfig,
}

impl<'a> RateFunctionCtx<'a> {
    pub fn new(spec: &'a ModelSpec) -> Self {
        Self::with_config(spec, RateConfig::default()).expect("default config is valid")
    }

    pub fn with_config(spec: &'a ModelSpec, cfg: RateConfig) -> Result<Self> {
        if cfg.quad_order < 16 {
            return Err(Error::InvalidArgument(format!("quad_order {} < 16", cfg.quad_order)));
        }
        if !(cfg.quad_tol > 0.0 && cfg.root_tol > 0.0) {
            return Err(Error::InvalidArgument("quad_tol and root_tol must be positive".into()));
        }
        let phi = spec.total_phi();
        let direction = spec.aggregate_beta().iter().map(|b| phi * b).collect();
        Ok(Self { spec, direction, cfg })
    }

    pub fn spec(&self) -> &ModelSpec {
        self.spec
    }

    pub fn config(&self) -> &RateConfig {
        &self.cfg
    }

    // s -> Lambda_xi(s * phi * beta_bar) and its derivative
    fn along(&self, s: f64) -> f64 {
        let eta: Vec<f64> = self.direction.iter().map(|d| s * d).collect();
        self.spec.innovations().log_mgf(&eta)
    }

    fn along_prime(&self, s: f64) -> f64 {
        let eta: Vec<f64> = self.direction.iter().map(|d| s * d).collect();
        self.spec.innovations().directional_derivative(&eta, &self.direction)
    }

    /// `Lambda(lam)`
    pub fn lambda_limit(&self, lam: f64) -> f64 {
        self.along(lam)
    }

    /// `Lambda'(lam)`
    pub fn lambda_limit_prime(&self, lam: f64) -> f64 {
        self.along_prime(lam)
    }

    fn weight(&self, k: f64) -> Result<impl Fn(f64) -> f64> {
        if !(k.is_finite() && k >= 0.0) {
            return Err(Error::InvalidArgument(format!("segment position k = {k} must be >= 0")));
        }
        let alpha = self.spec.alpha();
        let a = alpha + 1.0;
        Ok(move |y: f64| {
            if k == 0.0 {
                a * y.powf(alpha)
            } else {
                // (k+1)^a - k^a = k^a expm1(a ln1p(1/k)), free of cancellation
                a * (y / k).powf(alpha) / (k * (a * (1.0 / k).ln_1p()).exp_m1())
            }
        })
    }

    /// `Lambda^k(lam)` by quadrature.
    pub fn lambda_k(&self, k: f64, lam: f64) -> Result<f64> {
        let w = self.weight(k)?;
        if lam == 0.0 {
            return Ok(0.0);
        }
        quadrature::integrate(|y| self.along(w(y) * lam), k, k + 1.0, self.cfg.quad_order, self.cfg.quad_tol)
    }

    /// `(Lambda^k)'(lam)` by quadrature of the differentiated integrand.
    pub fn lambda_k_prime(&self, k: f64, lam: f64) -> Result<f64> {
        let w = self.weight(k)?;
        quadrature::integrate(
            |y| {
                let wy = w(y);
                wy * self.along_prime(wy * lam)
            },
            k,
            k + 1.0,
            self.cfg.quad_order,
            self.cfg.quad_tol,
        )
    }

    pub fn eval(&self, which: Transform, lam: f64) -> Result<f64> {
        match which {
            Transform::Limit => Ok(self.lambda_limit(lam)),
            Transform::Segment(k) => self.lambda_k(k, lam),
        }
    }

    pub fn eval_prime(&self, which: Transform, lam: f64) -> Result<f64> {
        match which {
            Transform::Limit => Ok(self.lambda_limit_prime(lam)),
            Transform::Segment(k) => self.lambda_k_prime(k, lam),
        }
    }

    /// Fenchel-Legendre transform `sup_lam { lam x - f(lam) }`.
    pub fn legendre(&self, which: Transform, x: f64) -> Result<LegendreResult> {
        if !x.is_finite() {
            return Err(Error::InvalidArgument(format!("x = {x}")));
        }
        if let Transform::Segment(k) = which {
            let _ = self.weight(k)?;
        }
        conjugate(
            |l| self.eval(which, l),
            |l| self.eval_prime(which, l),
            x,
            self.cfg.root_tol,
            self.cfg.bracket_doublings,
        )
    }

    /// Shorthand for `legendre(which, x)?.value`.
    pub fn rate(&self, which: Transform, x: f64) -> Result<f64> {
        Ok(self.legendre(which, x)?.value)
    }

    /// Mean point `f'(0)`, where the rate vanishes.
    pub fn mean(&self, which: Transform) -> Result<f64> {
        self.eval_prime(which, 0.0)
    }

    /// Infimum of the rate over a threshold set. Zero when the closure of the
    /// set contains the mean.
    pub fn rate_over(&self, which: Transform, set: &ThresholdSet) -> Result<f64> {
        let m = self.mean(which)?;
        match *set {
            ThresholdSet::Above(a) if a >= m => self.rate(which, a),
            ThresholdSet::Below(a) if a <= m => self.rate(which, a),
            ThresholdSet::Interval(a, b) if b <= m || a >= m => {
                Ok(self.rate(which, a)?.min(self.rate(which, b)?))
            }
            _ => Ok(0.0),
        }
    }

    /// Capacity `x > mean` at which the limit rate equals `target`.
    pub fn invert_capacity(&self, target: f64) -> Result<f64> {
        self.invert_rate(Transform::Limit, target)
    }

    /// Point `x > mean` with `f*(x) = target`, solved through the slope
    /// parametrization `x = f'(lam)`, `f*(x) = lam f'(lam) - f(lam)`, which
    /// is increasing in `lam > 0`.
    pub fn invert_rate(&self, which: Transform, target: f64) -> Result<f64> {
        if !(target.is_finite() && target > 0.0) {
            return Err(Error::InvalidArgument(format!("target rate {target} must be positive")));
        }
        let g = |lam: f64| -> Result<f64> { Ok(lam * self.eval_prime(which, lam)? - self.eval(which, lam)?) };
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut n = 0;
        while g(hi)? < target {
            if n == self.cfg.bracket_doublings {
                return Err(Error::Steepness {
                    target,
                    doublings: n,
                });
            }
            lo = hi;
            hi *= 2.0;
            n += 1;
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lam = 0.5 * (lo + hi);
        self.eval_prime(which, lam)
    }

    /// `x^2 / (2 phi^2 beta_bar^T Sigma beta_bar)` for Gaussian innovations.
    pub fn gaussian_closed_form(&self, x: f64) -> Result<f64> {
        gaussian_closed_form(self.spec, x)
    }
}

/// `x^2 / M` with `M = 2 phi^2 beta_bar^T Sigma beta_bar`.
pub fn gaussian_closed_form(spec: &ModelSpec, x: f64) -> Result<f64> {
    let m = gaussian_scale(spec)?;
    Ok(x * x / m)
}

/// `M = 2 phi^2 beta_bar^T Sigma beta_bar`, the variability constant of a
/// Gaussian model.
pub fn gaussian_scale(spec: &ModelSpec) -> Result<f64> {
    let g = spec.innovations().as_gaussian().ok_or(Error::NotGaussian)?;
    let phi = spec.total_phi();
    let m = 2.0 * phi * phi * g.quadratic_form(spec.aggregate_beta());
    if !(m > 0.0) {
        return Err(Error::Degenerate("beta_bar^T Sigma beta_bar = 0".into()));
    }
    Ok(m)
}

/// Lorenz curve of `U_k = (alpha+1)(k+U)^alpha / ((k+1)^(alpha+1) - k^(alpha+1))`,
/// `U ~ Uniform(0,1)`:
/// `L(p) = ((k+p)^(alpha+1) - k^(alpha+1)) / ((k+1)^(alpha+1) - k^(alpha+1))`.
pub fn lorenz(alpha: f64, k: f64, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || !(k >= 0.0 && k.is_finite()) || !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("lorenz(alpha={alpha}, k={k}, p={p})")));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(p);
    }
    let a = alpha + 1.0;
    if k == 0.0 {
        return Ok(p.powf(a));
    }
    Ok((a * (p / k).ln_1p()).exp_m1() / (a * (1.0 / k).ln_1p()).exp_m1())
}

fn conjugate(
    f: impl Fn(f64) -> Result<f64>,
    df: impl Fn(f64) -> Result<f64>,
    x: f64,
    root_tol: f64,
    doublings: u32,
) -> Result<LegendreResult> {
    let mean = df(0.0)?;
    if x == mean {
        return Ok(LegendreResult {
            value: 0.0,
            argmax_lambda: 0.0,
            converged: true,
        });
    }
    let dir = if x > mean { 1.0 } else { -1.0 };
    // below(l): slope at l has not yet reached x in the direction of travel
    let below = |l: f64| -> Result<bool> { Ok(dir * (df(l)? - x) < 0.0) };
    let (mut lo, mut hi) = (0.0, dir);
    let mut n = 0;
    while below(hi)? {
        if n == doublings {
            return Err(Error::Steepness { target: x, doublings });
        }
        lo = hi;
        hi *= 2.0;
        n += 1;
    }
    let mut converged = false;
    for _ in 0..400 {
        if (hi - lo).abs() <= root_tol * hi.abs().max(1.0) {
            converged = true;
            break;
        }
        let mid = 0.5 * (lo + hi);
        if below(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // one Newton step with the bracket's secant slope, kept inside the bracket
    let mid = 0.5 * (lo + hi);
    let mut lam = mid;
    let slope = (df(hi)? - df(lo)?) / (hi - lo);
    if slope.is_finite() && slope > 0.0 {
        let cand = mid - (df(mid)? - x) / slope;
        if cand >= lo.min(hi) && cand <= lo.max(hi) {
            lam = cand;
        }
    }
    let value = (lam * x - f(lam)?).max(0.0);
    Ok(LegendreResult {
        value,
        argmax_lambda: lam,
        converged,
    })
}
