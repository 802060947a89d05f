//! Plot-ready CSV and regression-grade JSON output.
//!
//! JSON numbers carry 17 significant digits, enough to round-trip every
//! `f64` bit pattern, so files diff cleanly across runs; CSV carries 9
//! for plotting. Writers are hand-rolled to pin those digit counts and
//! keep key order deterministic.

use std::fmt::Write as _;

use crate::connect::{Connection, DistanceEstimate, ScanResult};
use crate::dynamics::{ChargeToMass, ParamKind, Worldline};
use crate::error::Result;
use crate::functionals::{ActionReport, NeoReport};
use crate::geometry::Metric;
use crate::scene::ValidationReport;

fn json_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn csv_f64(x: f64) -> String {
    format!("{x:.8e}")
}

fn json_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn json_vec(v: impl IntoIterator<Item = f64>) -> String {
    let inner: Vec<String> = v.into_iter().map(json_f64).collect();
    format!("[{}]", inner.join(","))
}

fn param_kind_json(kind: ParamKind) -> String {
    match kind {
        ParamKind::ProperTime => r#"{"kind":"proper-time"}"#.to_string(),
        ParamKind::AffineConstantSpeed(c) => {
            format!(r#"{{"kind":"affine","speed":{}}}"#, json_f64(c))
        }
        ParamKind::Generic => r#"{"kind":"generic"}"#.to_string(),
    }
}

/// `lambda,x0..x{n-1},v0..v{n-1},norm` rows at 9 significant digits; the
/// last column is the conserved fiber norm at each sample — `g(v,v)` for
/// tangent-bundle worldlines, `g⁻¹(p,p)` for cotangent ones (detected
/// from the generating system's name).
pub fn worldline_csv<M: Metric + ?Sized>(metric: &M, w: &Worldline) -> Result<String> {
    let cotangent = matches!(w.meta().system.as_str(), "cotangent" | "twisted");
    let n = w.dim();
    let mut out = String::new();
    out.push_str("lambda");
    for i in 0..n {
        let _ = write!(out, ",x{i}");
    }
    for i in 0..n {
        let _ = write!(out, ",v{i}");
    }
    out.push_str(",norm\n");
    for s in w.samples() {
        out.push_str(&csv_f64(s.lambda));
        for c in s.x.coords().iter().chain(s.v.iter()) {
            out.push(',');
            out.push_str(&csv_f64(*c));
        }
        let norm = if cotangent {
            (metric.inverse(&s.x)? * &s.v).dot(&s.v)
        } else {
            metric.inner(&s.x, &s.v, &s.v)?
        };
        out.push(',');
        out.push_str(&csv_f64(norm));
        out.push('\n');
    }
    Ok(out)
}

pub fn worldline_json(w: &Worldline) -> String {
    let meta = w.meta();
    let mut out = String::new();
    out.push('{');
    let _ = write!(out, r#""system":{},"#, json_str(&meta.system));
    let _ = write!(out, r#""param":{},"#, param_kind_json(w.param_kind()));
    out.push_str("\"params\":{");
    let mut first = true;
    for (key, value) in &meta.params {
        if !first {
            out.push(',');
        }
        first = false;
        let _ = write!(out, "{}:{}", json_str(key), json_f64(*value));
    }
    out.push_str("},");
    let _ = write!(out, r#""norm_drift":{},"#, json_f64(meta.norm_drift));
    out.push_str("\"samples\":[");
    for (i, s) in w.samples().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(
            out,
            r#"{{"lambda":{},"x":{},"v":{}}}"#,
            json_f64(s.lambda),
            json_vec(s.x.coords().iter().copied()),
            json_vec(s.v.iter().copied()),
        );
    }
    out.push_str("]}");
    out
}

pub fn connection_json(conn: &Connection) -> String {
    format!(
        r#"{{"converged":true,"miss_norm":{},"iterations":{},"restarts":{},"scale":{},"direction":{},"worldline":{}}}"#,
        json_f64(conn.miss_norm),
        conn.iterations,
        conn.restarts,
        json_f64(conn.vars.scale),
        json_vec(conn.vars.direction.iter().copied()),
        worldline_json(&conn.worldline),
    )
}

/// `qm,converged,miss_norm,proper_length,action_I` rows; absent values
/// print as `nan`.
pub fn scan_csv(scan: &ScanResult) -> String {
    let mut out = String::from("qm,converged,miss_norm,proper_length,action_I\n");
    for e in &scan.entries {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            csv_f64(e.ratio),
            u8::from(e.converged),
            csv_f64(e.miss_norm),
            csv_f64(e.proper_length.unwrap_or(f64::NAN)),
            csv_f64(e.action.unwrap_or(f64::NAN)),
        );
    }
    out
}

pub fn scan_json(scan: &ScanResult, embed_trajectories: bool) -> String {
    let mut out = String::from("{\"entries\":[");
    for (i, e) in scan.entries.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(
            out,
            r#"{{"qm":{},"converged":{},"miss_norm":{},"restarts":{},"proper_length":{},"action_I":{}"#,
            json_f64(e.ratio),
            e.converged,
            json_f64(e.miss_norm),
            e.restarts,
            e.proper_length.map_or("null".to_string(), json_f64),
            e.action.map_or("null".to_string(), json_f64),
        );
        if embed_trajectories {
            match &e.worldline {
                Some(w) => {
                    let _ = write!(out, r#","worldline":{}"#, worldline_json(w));
                }
                None => out.push_str(r#","worldline":null"#),
            }
        }
        out.push('}');
    }
    out.push_str("],");
    let _ = write!(
        out,
        r#""converged_count":{},"min_pairwise_separation":{}}}"#,
        scan.converged_count(),
        scan.min_pairwise_separation().map_or("null".to_string(), json_f64),
    );
    out
}

pub fn action_json(report: &ActionReport) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        r#"{{"which":{},"value":{},"gradient_norm":{},"integral_ds":{},"integral_omega":{},"params":{{"#,
        json_str(report.which.label()),
        json_f64(report.value),
        json_f64(report.gradient_norm),
        json_f64(report.integral_ds),
        json_f64(report.integral_omega),
    );
    let mut first = true;
    for (key, value) in &report.params {
        if !first {
            out.push(',');
        }
        first = false;
        let _ = write!(out, "{}:{}", json_str(key), json_f64(*value));
    }
    out.push_str("}}");
    out
}

pub fn neo_json(report: &NeoReport) -> String {
    let ratio = match report.ratio {
        ChargeToMass::Real(r) => json_f64(r),
        ChargeToMass::SymbolR => json_str("R"),
    };
    format!(
        r#"{{"ratio":{},"integral_ds":{},"target":{},"abs_error":{},"rel_error":{},"kernel_degenerate":{}}}"#,
        ratio,
        json_f64(report.integral_ds),
        json_f64(report.target),
        json_f64(report.abs_error),
        json_f64(report.rel_error),
        report.kernel_degenerate,
    )
}

pub fn distance_json(est: &DistanceEstimate, embed_witness: bool) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        r#"{{"lower_bound":{},"witness_ratio":{},"curves_found":{}"#,
        json_f64(est.lower_bound),
        json_f64(est.witness_ratio),
        est.curves_found,
    );
    if embed_witness {
        let _ = write!(out, r#","witness":{}"#, worldline_json(&est.witness));
    }
    out.push('}');
    out
}

pub fn validation_json(report: &ValidationReport) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        r#"{{"passed":{},"sampled_events":{},"checks":["#,
        report.passed(),
        report.sample_count,
    );
    for (i, c) in report.checks.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(
            out,
            r#"{{"name":{},"passed":{},"worst":{},"threshold":{}}}"#,
            json_str(c.name),
            c.passed,
            json_f64(c.worst),
            json_f64(c.threshold),
        );
    }
    out.push_str("]}");
    out
}
