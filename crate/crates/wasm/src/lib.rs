//! Browser bindings for the static demo page in `www/`.

use serde_json::json;
use wasm_bindgen::prelude::*;

use strange_segments::experiments::sla_plan;
use strange_segments::rate::{RateFunctionCtx, Transform};
use strange_segments::segments::{r_trajectory, t_stat, ThresholdSet};
use strange_segments::simulator::{simulate, PathConfig};
use strange_segments::ModelSpec;

fn model(json: &str) -> Result<ModelSpec, JsError> {
    ModelSpec::from_json(json).map_err(|e| JsError::new(&e.to_string()))
}

fn js(e: strange_segments::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Rate function values at `xs`; `k < 0` selects the limit.
#[wasm_bindgen]
pub fn rate_curve(model_json: &str, k: f64, xs: Vec<f64>) -> Result<Vec<f64>, JsError> {
    let spec = model(model_json)?;
    let ctx = RateFunctionCtx::new(&spec);
    let which = if k < 0.0 { Transform::Limit } else { Transform::Segment(k) };
    xs.iter().map(|&x| ctx.rate(which, x).map_err(js)).collect()
}

/// Capacity plan as JSON.
#[wasm_bindgen]
pub fn plan(model_json: &str, r_target: u32, horizon: f64) -> Result<String, JsError> {
    let spec = model(model_json)?;
    let p = sla_plan(&spec, r_target as usize, horizon).map_err(js)?;
    Ok(serde_json::to_string(&p)?)
}

/// Simulates one path and reports the segment averages over a trailing
/// window, the `R_t` trajectory and `T_r` for `A = (c_p, inf)`, as JSON.
#[wasm_bindgen]
pub fn simulate_segments(model_json: &str, seed: u32, t_max: u32, c_p: f64, window: u32, r: u32) -> Result<String, JsError> {
    let spec = model(model_json)?;
    let path = simulate(&spec, &PathConfig::new(t_max as usize, seed as u64)).map_err(js)?;
    let set = ThresholdSet::Above(c_p);
    let w = (window.max(1) as usize).min(path.t_max());
    let averages = (w..=path.t_max())
        .map(|l| path.segment_average(l - w, l))
        .collect::<Result<Vec<_>, _>>()
        .map_err(js)?;
    let trajectory = r_trajectory(&path, &set, path.t_max()).map_err(js)?;
    let first = t_stat(&path, &set, r.max(1) as usize).map_err(js)?;
    Ok(json!({
        "window": w,
        "averages": averages,
        "r_trajectory": trajectory,
        "t_r": first,
    })
    .to_string())
}
