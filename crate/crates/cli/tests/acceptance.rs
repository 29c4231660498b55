//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Tolerances and seeds are fixed here
//! before running and are not tuned to the outcome.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use strange_segments::experiments::{run_strong_law, run_uldp, StrongLawConfig, StrongLawReport, UldpConfig};
use strange_segments::innovations::GaussianNoise;
use strange_segments::rate::{gaussian_closed_form, lorenz, RateFunctionCtx, Transform};
use strange_segments::segments::{brute_force_r, brute_force_t, r_stat, t_stat, ThresholdSet};
use strange_segments::simulator::WorkloadPath;
use strange_segments::ModelSpec;

const UNIT: &str = r#"{"alpha": 1, "groups": [{"c": 1, "mu": 0, "beta": [1]}],
  "phi": [{"lag": 0, "value": 1}], "innovations": {"type": "gaussian", "cov": [[1]]}}"#;

fn model(alpha: f64, phi: f64, var: f64) -> ModelSpec {
    ModelSpec::from_json(&format!(
        r#"{{"alpha": {alpha}, "groups": [{{"c": 1, "mu": 0, "beta": [1]}}],
        "phi": [{{"lag": 0, "value": {phi}}}], "innovations": {{"type": "gaussian", "cov": [[{var}]]}}}}"#
    ))
    .expect("valid model")
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn grid(lo: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + step * i as f64).collect()
}

// 1. Numerical conjugate of the limit log-MGF against x^2 / M.
fn closed_form_conjugate() -> Outcome {
    const TOL: f64 = 1e-8;
    const BUDGET: Duration = Duration::from_secs(1);
    let start = Instant::now();
    let models = [model(1.0, 1.0, 1.0), model(1.0, 2.0, 1.0), model(1.0, 1.0, 4.0)];
    let mut worst: f64 = 0.0;
    for m in &models {
        let ctx = RateFunctionCtx::new(m);
        for i in 1..=30 {
            let x = i as f64 / 10.0;
            let num = ctx.rate(Transform::Limit, x).expect("legendre");
            worst = worst.max((num - gaussian_closed_form(m, x).expect("gaussian")).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= TOL && elapsed < BUDGET,
        format!("max |numeric - closed form| = {worst:.3e} (tol {TOL:e}), {elapsed:.2?} (budget {BUDGET:?})"),
    )
}

// 2. Segment-0 conjugate at x = 1 against 3x^2/8.
fn segment_conjugate() -> Outcome {
    const TOL: f64 = 1e-8;
    let m = model(1.0, 1.0, 1.0);
    let v = RateFunctionCtx::new(&m).rate(Transform::Segment(0.0), 1.0).expect("legendre");
    outcome((v - 0.375).abs() <= TOL, format!("Lambda^0*(1) = {v:.15} (want 0.375, tol {TOL:e})"))
}

// 3. Monotonicity in k of Lambda^k, Lambda^k* and the Lorenz curves.
fn monotonicity() -> Outcome {
    const SLACK: f64 = 1e-8;
    let ks = [0.0, 0.5, 1.0, 2.0, 5.0, 20.0, 100.0];
    let points = grid(0.25, 0.25, 12);
    let mut violations = Vec::new();
    let mut checked = 0usize;
    for alpha in [0.5, 1.0, 2.0] {
        let m = model(alpha, 1.0, 1.0);
        let ctx = RateFunctionCtx::new(&m);
        for &p in &points {
            let lam: Vec<f64> = ks.iter().map(|&k| ctx.lambda_k(k, p).expect("quadrature")).collect();
            let star: Vec<f64> = ks.iter().map(|&k| ctx.rate(Transform::Segment(k), p).expect("legendre")).collect();
            for w in 0..ks.len() - 1 {
                checked += 2;
                if lam[w + 1] > lam[w] + SLACK {
                    violations.push(format!("Lambda^k alpha={alpha} lam={p} k={}", ks[w + 1]));
                }
                if star[w + 1] < star[w] - SLACK {
                    violations.push(format!("Lambda^k* alpha={alpha} x={p} k={}", ks[w + 1]));
                }
            }
        }
        for i in 0..=100 {
            let p = i as f64 / 100.0;
            let l: Vec<f64> = ks.iter().map(|&k| lorenz(alpha, k, p).expect("lorenz")).collect();
            for w in 0..ks.len() - 1 {
                checked += 1;
                if l[w + 1] < l[w] - SLACK {
                    violations.push(format!("Lorenz alpha={alpha} p={p} k={}", ks[w + 1]));
                }
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!("{} violations in {checked} comparisons (alpha in 0.5, 1, 2) {:?}", violations.len(), violations),
    )
}

// 4. sup_{|lam| <= 2} |Lambda^k - Lambda| decreasing in k, small at k = 1000.
fn convergence() -> Outcome {
    const LIMIT_AT_1000: f64 = 5e-3;
    let m = model(1.0, 1.0, 1.0);
    let ctx = RateFunctionCtx::new(&m);
    let lams = grid(-2.0, 0.01, 401);
    let sups: Vec<f64> = [1.0, 10.0, 100.0, 1000.0]
        .iter()
        .map(|&k| {
            lams.iter()
                .map(|&l| (ctx.lambda_k(k, l).expect("quadrature") - ctx.lambda_limit(l)).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let monotone = sups.windows(2).all(|w| w[1] < w[0]);
    outcome(
        monotone && sups[3] < LIMIT_AT_1000,
        format!(
            "sup gaps at k=1,10,100,1000: {:?} (need decreasing and < {LIMIT_AT_1000:e})",
            sups.iter().map(|s| format!("{s:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn random_path(rng: &mut ChaCha8Rng, len: usize) -> (WorkloadPath, bool) {
    let integer = rng.random_bool(0.5);
    let d: Vec<f64> = (0..len)
        .map(|_| {
            if integer {
                rng.random_range(-3i32..=3) as f64
            } else {
                rng.random_range(-2.0..2.0)
            }
        })
        .collect();
    let inc: Vec<u64> = match rng.random_range(0..3) {
        0 => vec![1; len],
        1 => (0..len).map(|_| rng.random_range(1..=5)).collect(),
        _ => {
            let alpha = [0.5, 1.5, 2.0][rng.random_range(0..3)];
            (1..=len).map(|t| ((t as f64).powf(alpha).floor() as u64).max(1)).collect()
        }
    };
    (WorkloadPath::from_steps(&d, &inc).expect("valid path"), integer)
}

fn random_set(rng: &mut ChaCha8Rng, integer: bool) -> ThresholdSet {
    let level = |rng: &mut ChaCha8Rng| {
        if integer {
            rng.random_range(-4i32..=4) as f64 / 4.0
        } else {
            rng.random_range(-1.0..1.0)
        }
    };
    match rng.random_range(0..5) {
        0 | 1 => ThresholdSet::Above(level(rng)),
        2 | 3 => ThresholdSet::Below(level(rng)),
        _ => {
            let a = level(rng);
            ThresholdSet::Interval(a, a + 0.25 + rng.random_range(0..4) as f64 * 0.25)
        }
    }
}

// 5. Fast detectors equal the enumerations; duality holds exhaustively.
fn detector_exactness() -> Outcome {
    const BUDGET: Duration = Duration::from_secs(30);
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0usize;
    let mut comparisons = 0usize;
    for _ in 0..1000 {
        let len = rng.random_range(1..=200);
        let (path, integer) = random_path(&mut rng, len);
        let set = random_set(&mut rng, integer);
        for t in [len, rng.random_range(1..=len)] {
            comparisons += 1;
            if r_stat(&path, &set, t).unwrap() != brute_force_r(&path, &set, t).unwrap() {
                mismatches += 1;
            }
        }
        for r in [1, rng.random_range(1..=len), len] {
            comparisons += 1;
            if t_stat(&path, &set, r).unwrap() != brute_force_t(&path, &set, r).unwrap() {
                mismatches += 1;
            }
        }
    }
    let mut duality_failures = 0usize;
    let mut duality_checks = 0usize;
    for _ in 0..300 {
        let len = rng.random_range(1..=100);
        let (path, integer) = random_path(&mut rng, len);
        let set = random_set(&mut rng, integer);
        let rs: Vec<usize> = (1..=len).map(|m| r_stat(&path, &set, m).unwrap().value.unwrap()).collect();
        for r in 1..=len {
            let tr = t_stat(&path, &set, r).unwrap().value;
            for m in 1..=len {
                duality_checks += 1;
                if tr.is_some_and(|v| v <= m) != (rs[m - 1] >= r) {
                    duality_failures += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches == 0 && duality_failures == 0 && elapsed < BUDGET,
        format!(
            "{mismatches}/{comparisons} fast-vs-oracle mismatches, {duality_failures}/{duality_checks} duality failures, {elapsed:.2?} (budget {BUDGET:?})"
        ),
    )
}

const STRONG_LAW_SEED: u64 = 20_261_016;
const STRONG_LAW_REPLICATES: usize = 100;

fn strong_law_config() -> StrongLawConfig {
    StrongLawConfig {
        workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        ..StrongLawConfig::new(1.0, vec![6, 12, 14], vec![100, 1000, 10_000], STRONG_LAW_REPLICATES, STRONG_LAW_SEED)
    }
}

// 6. Median log T_r / r near Lambda*(1) = 0.5 and converging.
fn strong_law() -> (Outcome, Option<StrongLawReport>) {
    let m = model(1.0, 1.0, 1.0);
    let start = Instant::now();
    let rep = match run_strong_law(&m, &strong_law_config()) {
        Ok(r) => r,
        Err(e) => return (outcome(false, format!("run failed: {e}")), None),
    };
    let med = |r| rep.median_at(r);
    let in_band = med(12).is_some_and(|v| (0.30..=0.70).contains(&v));
    let gap = |r| med(r).map(|v| (v - rep.predicted_rate).abs());
    let trend = matches!((gap(14), gap(6)), (Some(a), Some(b)) if a < b);
    let censored: usize = rep.t_summary.iter().map(|s| s.censored).sum();
    let o = outcome(
        in_band && trend && rep.predicted_rate == 0.5 && rep.duality_violations == 0,
        format!(
            "predicted {}, medians r=6: {:?}, r=12: {:?} (band [0.30, 0.70]), r=14: {:?}; {} replicates, {censored} censored, {} duality violations, {:.1?}",
            rep.predicted_rate,
            med(6),
            med(12),
            med(14),
            rep.replicates.len(),
            rep.duality_violations,
            start.elapsed()
        ),
    );
    (o, Some(rep))
}

// 7. Segment tail exponents at t = 40 against Lambda^k*.
fn uldp() -> Outcome {
    const BUDGET: Duration = Duration::from_secs(300);
    const BAND: f64 = 0.25;
    let m = model(1.0, 1.0, 1.0);
    let start = Instant::now();
    let cfg = UldpConfig {
        k_grid: vec![0.0, 1.0, 4.0],
        t: 40,
        set: ThresholdSet::Above(0.4),
        samples: 100_000,
        master_seed: 7,
        noise_mode: None,
        band: BAND,
        workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let rep = match run_uldp(&m, &cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let emp: Vec<Option<f64>> = rep.rows.iter().map(|r| r.empirical_exponent).collect();
    let ordered = emp.windows(2).all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if a <= b));
    let pred0 = rep.rows[0].predicted_exponent;
    let near = emp[0].is_some_and(|e| (e - pred0).abs() <= BAND * pred0);
    let elapsed = start.elapsed();
    outcome(
        ordered && near && (pred0 - 0.06).abs() < 1e-9 && elapsed < BUDGET,
        format!(
            "empirical exponents k=0,1,4: {emp:.4?} (nondecreasing: {ordered}); predicted {:?}; k=0 within +-25% of {pred0:.6}: {near}; {elapsed:.1?}",
            rep.rows.iter().map(|r| r.predicted_exponent).collect::<Vec<_>>()
        ),
    )
}

// 8. Idiosyncratic noise leaves the criterion-6 medians unchanged.
fn noise_washout(quiet: Option<&StrongLawReport>) -> Outcome {
    let Some(quiet) = quiet else {
        return outcome(false, "criterion 6 run unavailable".into());
    };
    let m = model(1.0, 1.0, 1.0).with_noise(Some(Arc::new(GaussianNoise::new(1.0).expect("variance"))));
    let noisy = match run_strong_law(&m, &strong_law_config()) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for (a, b) in quiet.t_summary.iter().zip(&noisy.t_summary) {
        let iqr = |s: &strange_segments::experiments::GridSummary| s.q3.zip(s.q1).map(|(h, l)| h - l);
        let ok = match (a.median, b.median, iqr(a), iqr(b)) {
            (Some(x), Some(y), Some(ia), Some(ib)) => (x - y).abs() < ia.max(ib),
            _ => false,
        };
        pass &= ok;
        parts.push(format!(
            "r={}: off {:?} vs noise {:?}, IQRs {:?}/{:?}",
            a.point,
            a.median,
            b.median,
            iqr(a),
            iqr(b)
        ));
    }
    outcome(pass, parts.join("; "))
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_strange-segments"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    ["output.csv", "summary.json", "manifest.json"]
        .iter()
        .map(|f| (f.to_string(), std::fs::read(dir.join(f)).unwrap_or_default()))
        .collect()
}

// 9. Same seed, any worker count, and manifest replay give identical bytes.
fn reproducibility() -> Outcome {
    let tmp = tempfile::tempdir().expect("tempdir");
    let model_path = tmp.path().join("unit.json");
    std::fs::write(&model_path, UNIT).unwrap();
    let mp = model_path.to_str().unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["rate", "--model", mp, "--x", "0.5,1,2", "--k", "1"],
        vec!["simulate", "--model", mp, "--seed", "11", "--t-max", "500", "--record-steps"],
        vec!["segments", "--model", mp, "--seed", "12", "--t-max", "2000", "--a", "0.5", "--r", "5"],
        vec![
            "verify-strong-law", "--model", mp, "--seed", "13", "--c-p", "1", "--r-grid", "3,5", "--t-grid",
            "100,500", "--replicates", "12", "--initial-horizon", "256",
        ],
        vec![
            "verify-uldp", "--model", mp, "--seed", "14", "--t", "10", "--a", "0.4", "--samples", "5000",
        ],
        vec!["plan", "--model", mp, "--r-target", "10", "--horizon", "148"],
    ];
    let mut failures = Vec::new();
    let mut compared = 0;
    for (i, args) in runs.iter().enumerate() {
        let mut reference = None;
        for (j, workers) in ["1", "2", "4", "1"].iter().enumerate() {
            let dir = tmp.path().join(format!("run{i}_{j}"));
            let mut full: Vec<&str> = args.clone();
            let d = dir.to_str().unwrap().to_owned();
            let parallel = args[0].starts_with("verify");
            if parallel {
                full.extend(["--workers", workers]);
            }
            full.extend(["--out-dir", &d]);
            let out = cli(&full);
            if !out.status.success() {
                failures.push(format!("{} exited {:?}: {}", args[0], out.status.code(), String::from_utf8_lossy(&out.stderr)));
                break;
            }
            let got = files(&dir);
            match &reference {
                None => reference = Some(got),
                Some(r) => {
                    compared += 1;
                    if *r != got {
                        failures.push(format!("{} differs with workers={workers}", args[0]));
                    }
                }
            }
            if !parallel && j == 1 {
                break;
            }
        }
        let first = tmp.path().join(format!("run{i}_0"));
        let replay_dir = tmp.path().join(format!("replay{i}"));
        let out = cli(&[
            "replay",
            "--manifest",
            first.join("manifest.json").to_str().unwrap(),
            "--workers",
            "3",
            "--out-dir",
            replay_dir.to_str().unwrap(),
        ]);
        compared += 1;
        if !out.status.success() || files(&first) != files(&replay_dir) {
            failures.push(format!("{} replay differs", args[0]));
        }
    }
    let a = cli(&["simulate", "--model", mp, "--seed", "3", "--t-max", "100"]);
    let b = cli(&["simulate", "--model", mp, "--seed", "3", "--t-max", "100"]);
    compared += 1;
    if a.stdout != b.stdout || a.stderr != b.stderr {
        failures.push("stdout/stderr mode differs".into());
    }
    outcome(failures.is_empty(), format!("{compared} byte comparisons, failures: {failures:?}"))
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |n: u32, name: &'static str, f: &dyn Fn() -> Outcome| {
        let o = f();
        println!("{} criterion {n} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    record(1, "closed-form conjugate", &closed_form_conjugate);
    record(2, "segment-k conjugate oracle", &segment_conjugate);
    record(3, "monotonicity suite", &monotonicity);
    record(4, "convergence in k", &convergence);
    record(5, "detector exactness", &detector_exactness);
    let (six, report) = strong_law();
    record(6, "strong law", &|| outcome(six.pass, six.detail.clone()));
    record(7, "uniform LDP desk check", &uldp);
    record(8, "noise washout", &|| noise_washout(report.as_ref()));
    record(9, "reproducibility", &reproducibility);
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {}/{} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
