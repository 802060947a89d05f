use nalgebra::DVector;

use crate::dynamics::{ParamKind, Sample, Worldline};
use crate::error::{Error, Result};
use crate::geometry::{Event, Metric};
use crate::tol;

/// Reparametrizes a timelike curve by proper time, preserving its image.
///
/// Curves already carrying an affine constant-speed parametrization are
/// rescaled exactly (`s = C·λ`, `u = v/C`). Generic curves are resampled:
/// cumulative arc length by Hermite–Simpson quadrature, the inverse map
/// `λ(s)` by monotone (Fritsch–Carlson) cubic interpolation, positions by
/// cubic Hermite interpolation of the stored samples, and tangents
/// normalized to exact unit norm afterwards.
pub fn reparametrize_proper_time<M: Metric + ?Sized>(
    metric: &M,
    w: &Worldline,
) -> Result<Worldline> {
    match w.param_kind() {
        ParamKind::ProperTime => Ok(w.clone()),
        ParamKind::AffineConstantSpeed(c) => {
            if !(c > 0.0) {
                return Err(Error::config(format!("constant speed must be positive, got {c}")));
            }
            let lambda0 = w.first().lambda;
            let samples = w
                .samples()
                .iter()
                .map(|s| Sample {
                    lambda: c * (s.lambda - lambda0),
                    x: s.x.clone(),
                    v: &s.v / c,
                })
                .collect();
            let mut meta = w.meta().clone();
            meta.norm_drift = w.meta().norm_drift / (c * c);
            Worldline::from_samples(samples, ParamKind::ProperTime, meta)
        }
        ParamKind::Generic => resample_by_arc_length(metric, w),
    }
}

fn resample_by_arc_length<M: Metric + ?Sized>(metric: &M, w: &Worldline) -> Result<Worldline> {
    let samples = w.samples();
    let len = samples.len();

    // Pointwise speeds, with a timelike guard.
    let mut speed = Vec::with_capacity(len);
    for s in samples {
        let q = metric.inner(&s.x, &s.v, &s.v)?;
        if q <= tol::TOL_NULL * s.v.norm_squared() {
            return Err(Error::Causality(format!(
                "proper-time reparametrization needs a timelike curve; \
                 g(v,v) = {q:.3e} at lambda = {}",
                s.lambda
            )));
        }
        speed.push(q.sqrt());
    }

    // Cumulative arc length: per-interval Simpson with the midpoint state
    // taken from the Hermite interpolant of (x, v).
    let mut arc = Vec::with_capacity(len);
    arc.push(0.0);
    for i in 1..len {
        let (s0, s1) = (&samples[i - 1], &samples[i]);
        let dl = s1.lambda - s0.lambda;
        let xm = hermite_position(s0, s1, 0.5);
        let vm = hermite_velocity(s0, s1, 0.5);
        let qm = metric.inner(&Event::from(xm), &vm, &vm)?;
        if qm <= 0.0 {
            return Err(Error::Causality(format!(
                "curve leaves the timelike cone between lambda = {} and {}",
                s0.lambda, s1.lambda
            )));
        }
        let seg = dl / 6.0 * (speed[i - 1] + 4.0 * qm.sqrt() + speed[i]);
        arc.push(arc[i - 1] + seg);
    }
    let total = *arc.last().unwrap();

    // Monotone cubic λ(s) through the knots (arc_i, λ_i).
    let lambdas: Vec<f64> = samples.iter().map(|s| s.lambda).collect();
    let lam_of_s = MonotoneCubic::new(&arc, &lambdas)?;

    let mut out = Vec::with_capacity(len);
    for j in 0..len {
        let s_target = if j == len - 1 {
            total
        } else {
            total * j as f64 / (len - 1) as f64
        };
        let lam = lam_of_s.eval(s_target);
        let (i, t) = locate(&lambdas, lam);
        let (s0, s1) = (&samples[i], &samples[i + 1]);
        let x = Event::from(hermite_position(s0, s1, t));
        let v = hermite_velocity(s0, s1, t);
        // Exact unit normalization: direction from the interpolant, norm
        // from the metric.
        let q = metric.inner(&x, &v, &v)?;
        if q <= 0.0 {
            return Err(Error::Causality(format!(
                "interpolated tangent not timelike at s = {s_target}"
            )));
        }
        out.push(Sample { lambda: s_target, x, v: v / q.sqrt() });
    }

    let mut meta = w.meta().clone();
    meta.norm_drift = 0.0;
    Worldline::from_samples(out, ParamKind::ProperTime, meta)
}

/// Cubic Hermite position on the segment, at fraction `t ∈ [0,1]`.
fn hermite_position(s0: &Sample, s1: &Sample, t: f64) -> DVector<f64> {
    let dl = s1.lambda - s0.lambda;
    let (t2, t3) = (t * t, t * t * t);
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * s0.x.coords() + (h10 * dl) * &s0.v + h01 * s1.x.coords() + (h11 * dl) * &s1.v
}

/// Derivative (with respect to λ) of the cubic Hermite position.
fn hermite_velocity(s0: &Sample, s1: &Sample, t: f64) -> DVector<f64> {
    let dl = s1.lambda - s0.lambda;
    let t2 = t * t;
    let d00 = (6.0 * t2 - 6.0 * t) / dl;
    let d10 = 3.0 * t2 - 4.0 * t + 1.0;
    let d01 = (-6.0 * t2 + 6.0 * t) / dl;
    let d11 = 3.0 * t2 - 2.0 * t;
    d00 * s0.x.coords() + d10 * &s0.v + d01 * s1.x.coords() + d11 * &s1.v
}

/// Locates `lam` in the knot vector; returns (interval index, fraction).
fn locate(knots: &[f64], lam: f64) -> (usize, f64) {
    let len = knots.len();
    let mut lo = 0usize;
    let mut hi = len - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if knots[mid] <= lam {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = ((lam - knots[lo]) / (knots[lo + 1] - knots[lo])).clamp(0.0, 1.0);
    (lo, t)
}

/// Fritsch–Carlson monotone cubic interpolant of strictly increasing data.
struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::config("monotone interpolation needs at least 2 knots"));
        }
        for i in 1..n {
            if xs[i] <= xs[i - 1] {
                return Err(Error::config("interpolation abscissae must be strictly increasing"));
            }
        }
        let h: Vec<f64> = (0..n - 1).map(|i| xs[i + 1] - xs[i]).collect();
        let d: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();

        let mut m = vec![0.0; n];
        m[0] = d[0];
        m[n - 1] = d[n - 2];
        for i in 1..n - 1 {
            if d[i - 1] * d[i] <= 0.0 {
                m[i] = 0.0;
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        // Endpoint slope limiting keeps the interpolant monotone.
        for i in [0usize, n - 1] {
            let dref = if i == 0 { d[0] } else { d[n - 2] };
            if m[i] * dref <= 0.0 {
                m[i] = 0.0;
            } else if m[i].abs() > 3.0 * dref.abs() {
                m[i] = 3.0 * dref;
            }
        }
        Ok(MonotoneCubic { xs: xs.to_vec(), ys: ys.to_vec(), slopes: m })
    }

    fn eval(&self, x: f64) -> f64 {
        let (i, t) = locate(&self.xs, x.clamp(self.xs[0], *self.xs.last().unwrap()));
        let h = self.xs[i + 1] - self.xs[i];
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i]
            + h10 * h * self.slopes[i]
            + h01 * self.ys[i + 1]
            + h11 * h * self.slopes[i + 1]
    }
}

/// Maps a solution of the electromagnetic flow with coefficient `Q` to the
/// solution with coefficient `Q′` tracing the same image: `y(λ) = x(αλ)`
/// solves the `αQ`-flow when `x` solves the `Q`-flow, so with `α = Q′/Q`
/// the samples transform as `λ′ = λ/α`, `x′ = x`, `v′ = α·v`.
///
/// `Q` is read from the worldline's metadata; `Q′` must have the same
/// sign. The recovered charge-to-mass ratio is invariant under this map.
pub fn efe_rescale(w: &Worldline, q_new: f64) -> Result<Worldline> {
    let q_old = w.meta().coupling().ok_or_else(|| {
        Error::config("worldline metadata carries no flow coefficient to rescale")
    })?;
    if q_old == 0.0 || !q_new.is_finite() || q_new * q_old <= 0.0 {
        return Err(Error::config(format!(
            "flow rescaling needs nonzero coefficients of equal sign, got {q_old} -> {q_new}"
        )));
    }
    if q_new == q_old {
        return Ok(w.clone());
    }
    let alpha = q_new / q_old;
    let samples = w
        .samples()
        .iter()
        .map(|s| Sample { lambda: s.lambda / alpha, x: s.x.clone(), v: alpha * &s.v })
        .collect();
    let param = match w.param_kind() {
        ParamKind::ProperTime => ParamKind::AffineConstantSpeed(alpha),
        ParamKind::AffineConstantSpeed(c) => ParamKind::AffineConstantSpeed(c * alpha),
        ParamKind::Generic => ParamKind::Generic,
    };
    let mut meta = w.meta().clone();
    meta.params.insert("coupling".to_string(), q_new);
    meta.norm_drift = w.meta().norm_drift * alpha * alpha;
    Worldline::from_samples(samples, param, meta)
}
