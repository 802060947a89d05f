//! Browser bindings for the core library.
//!
//! Three interactive operations back the demo page in `www/`:
//!
//! * [`orbit_json`] — integrate a charged worldline in a uniform
//!   electromagnetic field and return the sampled trajectory,
//! * [`family_json`] — scan a charge-to-mass grid for trajectories
//!   connecting two fixed events, one curve per ratio,
//! * [`extremal_json`] — extremize the discrete energy functional between
//!   two events and report the recovered ratio constraint.
//!
//! Every function takes plain numbers and returns a JSON string: either
//! the payload produced by the core export routines or `{"error": "…"}`.
//! Keeping the boundary to strings makes the bindings equally callable
//! from a browser and from native unit tests; build the wasm package
//! with `wasm-pack build crates/emflow-web --target web --out-dir
//! ../../www/pkg`.

use emflow::connect::{scan_charge_to_mass, SolverOptions};
use emflow::dynamics::{integrate, ForceSystem, IntegratorConfig};
use emflow::export;
use emflow::functionals::{check_neo, extremize_j, OptimizerConfig, PolylineCurve};
use emflow::geometry::{ConstantField, Event, Minkowski};
use nalgebra::DVector;
use wasm_bindgen::prelude::wasm_bindgen;

/// Wraps an error message as a `{"error": …}` payload.
fn fail(message: impl std::fmt::Display) -> String {
    let raw = message.to_string();
    let mut escaped = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            '"' => escaped.push_str("\\\""),
            '\\' => escaped.push_str("\\\\"),
            '\n' => escaped.push_str("\\n"),
            '\t' => escaped.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                escaped.push_str(&format!("\\u{:04x}", c as u32));
            }
            c => escaped.push(c),
        }
    }
    format!("{{\"error\":\"{escaped}\"}}")
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn all_finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

/// The demo endpoints all sit at the chart origin; the target event must
/// be chronologically later for a timelike curve to reach it.
fn check_chronological(t1: f64, x1: f64) -> Result<(), String> {
    if t1 > x1.abs() {
        Ok(())
    } else {
        Err(format!(
            "the target event (t = {t1}, x = {x1}) must lie in the chronological \
             future of the origin: need t > |x|"
        ))
    }
}

/// Integrates the charged-particle force equation in a 3-dimensional flat
/// spacetime with a uniform field (`e` along the first spatial axis, `b`
/// normal to the spatial plane), starting from the origin with rapidity
/// `a` along the first spatial axis, over proper time `[0, span]`.
///
/// Returns the trajectory JSON: `system`, `param`, `params`, `norm_drift`
/// and `samples` (each with `lambda`, `x`, `v`).
#[wasm_bindgen]
pub fn orbit_json(e: f64, b: f64, qm: f64, rapidity: f64, span: f64, samples: u32) -> String {
    match orbit(e, b, qm, rapidity, span, samples) {
        Ok(json) => json,
        Err(message) => fail(message),
    }
}

fn orbit(e: f64, b: f64, qm: f64, rapidity: f64, span: f64, samples: u32) -> Result<String, String> {
    if !all_finite(&[e, b, qm, rapidity, span]) {
        return Err("all inputs must be finite numbers".to_string());
    }
    if !(span > 0.0) {
        return Err(format!("the proper-time span must be positive, got {span}"));
    }
    if !(2..=4001).contains(&samples) {
        return Err(format!("samples must lie in [2, 4001], got {samples}"));
    }
    if rapidity.abs() > 6.0 {
        return Err(format!("|rapidity| is capped at 6 for the demo, got {rapidity}"));
    }

    let metric = Minkowski::new(3).map_err(|err| err.to_string())?;
    let field = ConstantField::uniform_eb(3, e, b).map_err(|err| err.to_string())?;
    let system = ForceSystem::lorentz(&metric, &field, qm).map_err(|err| err.to_string())?;
    let x0 = Event::from_slice(&[0.0, 0.0, 0.0]);
    let u0 = DVector::from_vec(vec![rapidity.cosh(), rapidity.sinh(), 0.0]);
    let w = integrate(&system, &x0, &u0, (0.0, span), samples as usize, &IntegratorConfig::rk45(1e-10, 1e-10))
        .map_err(|err| err.to_string())?;
    Ok(export::worldline_json(&w))
}

/// Solves the two-point connection problem between the origin and
/// `(t1, x1)` in a 2-dimensional flat spacetime with a uniform electric
/// field of strength `e`, once per charge-to-mass ratio on a grid of
/// `count` values spread evenly over `[-qm_max, qm_max]`.
///
/// Returns the scan JSON (`entries` with embedded trajectories,
/// `converged_count`, `min_pairwise_separation`).
#[wasm_bindgen]
pub fn family_json(e: f64, t1: f64, x1: f64, qm_max: f64, count: u32) -> String {
    match family(e, t1, x1, qm_max, count) {
        Ok(json) => json,
        Err(message) => fail(message),
    }
}

fn family(e: f64, t1: f64, x1: f64, qm_max: f64, count: u32) -> Result<String, String> {
    if !all_finite(&[e, t1, x1, qm_max]) {
        return Err("all inputs must be finite numbers".to_string());
    }
    check_chronological(t1, x1)?;
    if !(1..=33).contains(&count) {
        return Err(format!("the grid size is capped at 33 for the demo, got {count}"));
    }
    let half_width = qm_max.abs();

    let grid: Vec<f64> = if count == 1 {
        vec![0.0]
    } else {
        (0..count)
            .map(|i| -half_width + 2.0 * half_width * i as f64 / (count - 1) as f64)
            .collect()
    };

    let metric = Minkowski::new(2).map_err(|err| err.to_string())?;
    let field = ConstantField::uniform_electric(2, e).map_err(|err| err.to_string())?;
    let x0 = Event::from_slice(&[0.0, 0.0]);
    let x1 = Event::from_slice(&[t1, x1]);
    let opts = SolverOptions { samples: 101, ..SolverOptions::default() };
    // One worker: the browser build has no threads.
    let scan = scan_charge_to_mass(&metric, &field, &x0, &x1, &grid, &opts, 1)
        .map_err(|err| err.to_string())?;
    Ok(export::scan_json(&scan, true))
}

/// Extremizes the discrete energy functional (kinetic term plus coupling
/// `qm` times the potential term) over polylines between the origin and
/// `(t1, x1)` in a 2-dimensional flat spacetime with a uniform electric
/// field `e`, starting from the straight chord on `segments` segments.
///
/// Returns `{converged, iterations, action: {…}, constraint: {…},
/// grid: […], nodes: [[t, x], …]}` where `action` carries the value and
/// stationarity residual and `constraint` the recovered charge-to-mass
/// ratio identity.
#[wasm_bindgen]
pub fn extremal_json(e: f64, qm: f64, t1: f64, x1: f64, segments: u32) -> String {
    match extremal(e, qm, t1, x1, segments) {
        Ok(json) => json,
        Err(message) => fail(message),
    }
}

fn extremal(e: f64, qm: f64, t1: f64, x1: f64, segments: u32) -> Result<String, String> {
    if !all_finite(&[e, qm, t1, x1]) {
        return Err("all inputs must be finite numbers".to_string());
    }
    check_chronological(t1, x1)?;
    if !(4..=512).contains(&segments) {
        return Err(format!("segments must lie in [4, 512], got {segments}"));
    }

    let metric = Minkowski::new(2).map_err(|err| err.to_string())?;
    let field = ConstantField::uniform_electric(2, e).map_err(|err| err.to_string())?;
    let x0 = Event::from_slice(&[0.0, 0.0]);
    let x1 = Event::from_slice(&[t1, x1]);
    let init = PolylineCurve::straight(&x0, &x1, segments as usize, (0.0, 1.0))
        .map_err(|err| err.to_string())?;
    let sol = extremize_j(&metric, &field, qm, &init, true, &OptimizerConfig::default())
        .map_err(|err| err.to_string())?;
    let neo = check_neo(&metric, &field, &sol.curve, qm, sol.curve.span())
        .map_err(|err| err.to_string())?;

    let mut out = String::new();
    out.push('{');
    out.push_str(&format!("\"converged\":{},", sol.converged));
    out.push_str(&format!("\"iterations\":{},", sol.iterations));
    out.push_str(&format!("\"action\":{},", export::action_json(&sol.report)));
    out.push_str(&format!("\"constraint\":{},", export::neo_json(&neo)));
    out.push_str("\"grid\":[");
    for (i, lambda) in sol.curve.grid().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&num(*lambda));
    }
    out.push_str("],\"nodes\":[");
    for (i, node) in sol.curve.nodes().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push('[');
        for (j, coord) in node.coords().iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&num(*coord));
        }
        out.push(']');
    }
    out.push_str("]}");
    Ok(out)
}
