//! Small statistics helpers shared by the Monte Carlo harnesses and tests.

/// Quantile with linear interpolation between order statistics (the
/// "type 7" rule). `sorted` must be ascending and may contain `+inf`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let (a, b) = (sorted[lo], sorted[hi]);
    if lo == hi || a == b {
        return Some(a);
    }
    if b.is_infinite() {
        return Some(b);
    }
    Some(a + (h - lo as f64) * (b - a))
}

pub fn sort_floats(v: &mut [f64]) {
    v.sort_by(f64::total_cmp);
}

/// Two-sample Kolmogorov-Smirnov statistic. Sorts both inputs in place.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    sort_floats(a);
    sort_floats(b);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic critical value of the two-sample KS statistic at level `alpha`.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), Some(2.5));
        assert_eq!(quantile_sorted(&v, 0.0), Some(1.0));
        assert_eq!(quantile_sorted(&v, 1.0), Some(4.0));
        assert_eq!(quantile_sorted(&v, 0.25), Some(1.75));
        let w = [1.0, f64::INFINITY, f64::INFINITY];
        assert_eq!(quantile_sorted(&w, 0.5), Some(f64::INFINITY));
        assert_eq!(quantile_sorted(&[], 0.5), None);
    }

    #[test]
    fn ks_of_identical_and_disjoint_samples() {
        let mut a = vec![1.0, 2.0, 3.0];
        let mut b = vec![3.0, 1.0, 2.0];
        assert_eq!(ks_two_sample(&mut a, &mut b), 0.0);
        let mut c = vec![10.0, 11.0];
        assert_eq!(ks_two_sample(&mut a, &mut c), 1.0);
    }
}
