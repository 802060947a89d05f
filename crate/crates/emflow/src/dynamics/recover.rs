use nalgebra::DVector;

use crate::dynamics::Worldline;
use crate::error::{Error, Result};
use crate::geometry::{raise_field, Field, Metric};
use crate::tol;

/// The charge-to-mass observable of a trajectory: a real ratio, or the
/// symbol `R` when the trajectory is a geodesic whose tangent stays in the
/// kernel of `F̂` — such a curve solves the force equation for every ratio
/// simultaneously, so no value is observable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChargeToMass {
    Real(f64),
    SymbolR,
}

#[derive(Clone, Copy, Debug)]
pub struct RecoveryReport {
    pub ratio: ChargeToMass,
    /// Relative least-squares residual of the fit `a = (q/m)·b`.
    pub residual: f64,
    /// Number of samples entering the fit (interior samples with
    /// high-order derivative support).
    pub rows: usize,
}

/// Derivative of a uniformly sampled series by central finite differences
/// on the stored values: sixth order in the deep interior, falling to
/// fourth and second near the boundary, `None` at the endpoints.
pub(crate) fn grid_derivative(values: &[DVector<f64>], h: f64) -> Vec<Option<DVector<f64>>> {
    let len = values.len();
    let mut out: Vec<Option<DVector<f64>>> = vec![None; len];
    for i in 1..len.saturating_sub(1) {
        let d = if i >= 3 && i + 3 < len {
            (-&values[i - 3] + 9.0 * &values[i - 2] - 45.0 * &values[i - 1]
                + 45.0 * &values[i + 1]
                - 9.0 * &values[i + 2]
                + &values[i + 3])
                / (60.0 * h)
        } else if i >= 2 && i + 2 < len {
            (&values[i - 2] - 8.0 * &values[i - 1] + 8.0 * &values[i + 1] - &values[i + 2])
                / (12.0 * h)
        } else {
            (&values[i + 1] - &values[i - 1]) / (2.0 * h)
        };
        out[i] = Some(d);
    }
    out
}

/// Per-sample ingredients of the force equation along a curve.
struct ForceData {
    /// Covariant proper-time acceleration `a = D_s (v/|v|)` at fit rows.
    a: Vec<DVector<f64>>,
    /// Field term `b = F̂[v/|v|]` at fit rows.
    b: Vec<DVector<f64>>,
    /// Max of `‖F̂[v/|v|]‖` over all samples (kernel detection).
    bmax_all: f64,
    rows: usize,
}

/// Computes proper-time accelerations and field terms along a timelike
/// curve directly on its own parameter grid: with `w = √g(v,v)` and
/// `u = v/w`,
///
/// `a = D_s u = (v̇ + Γ(v,v))/w² − v·ẇ/w³`,   `b = F̂[u]`,
///
/// where `v̇` and `ẇ` are central differences of the stored tangents. No
/// resampling is involved, so the only error is the stencil truncation.
fn force_data<M, F>(metric: &M, field: &F, w: &Worldline) -> Result<ForceData>
where
    M: Metric + ?Sized,
    F: Field + ?Sized,
{
    if w.len() < 9 {
        return Err(Error::config("charge recovery needs at least 9 samples"));
    }
    let h = w
        .uniform_step(1e-9)
        .ok_or_else(|| Error::config("charge recovery needs a uniform parameter grid"))?;

    let samples = w.samples();
    let len = samples.len();
    let mut wnorm = Vec::with_capacity(len);
    let mut bterms = Vec::with_capacity(len);
    let mut bmax_all: f64 = 0.0;
    for s in samples {
        let q = metric.inner(&s.x, &s.v, &s.v)?;
        if q <= tol::TOL_NULL * s.v.norm_squared() {
            return Err(Error::Causality(format!(
                "charge recovery needs a timelike curve; g(v,v) = {q:.3e} at lambda = {}",
                s.lambda
            )));
        }
        let wn = q.sqrt();
        let fhat = raise_field(metric, field, &s.x)?;
        let b = (fhat * &s.v) / wn;
        bmax_all = bmax_all.max(b.norm());
        wnorm.push(wn);
        bterms.push(b);
    }

    let vseries: Vec<DVector<f64>> = samples.iter().map(|s| s.v.clone()).collect();
    let wseries: Vec<DVector<f64>> =
        wnorm.iter().map(|&x| DVector::from_element(1, x)).collect();
    let vdot = grid_derivative(&vseries, h);
    let wdot = grid_derivative(&wseries, h);

    // Fit rows: indices with at least fourth-order stencil support.
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 2..len - 2 {
        let s = &samples[i];
        let gamma = metric.christoffel(&s.x)?;
        let q = wnorm[i] * wnorm[i];
        let acc = (vdot[i].as_ref().unwrap() + gamma.quadratic(&s.v)) / q
            - &s.v * (wdot[i].as_ref().unwrap()[0] / (q * wnorm[i]));
        a.push(acc);
        b.push(bterms[i].clone());
    }
    let rows = a.len();
    Ok(ForceData { a, b, bmax_all, rows })
}

/// Recovers the charge-to-mass ratio of a timelike trajectory by a
/// least-squares fit of the proper-time force equation, sample by sample.
///
/// Returns [`ChargeToMass::SymbolR`] when both the field term and the
/// acceleration vanish along the whole curve within [`tol::KERNEL_TOL`]
/// (the kernel-degenerate case). Errors with
/// [`Error::NotASolution`] when the best-fit residual exceeds
/// [`tol::FIT_TOL`] relative to the size of the fit terms.
pub fn recover_charge_to_mass<M, F>(
    metric: &M,
    field: &F,
    w: &Worldline,
) -> Result<RecoveryReport>
where
    M: Metric + ?Sized,
    F: Field + ?Sized,
{
    let data = force_data(metric, field, w)?;
    let amax = data.a.iter().map(|v| v.norm()).fold(0.0_f64, f64::max);

    if data.bmax_all < tol::KERNEL_TOL && amax < tol::KERNEL_TOL {
        return Ok(RecoveryReport { ratio: ChargeToMass::SymbolR, residual: 0.0, rows: data.rows });
    }

    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in data.a.iter().zip(&data.b) {
        num += a.dot(b);
        den += b.dot(b);
    }
    let ratio = if den > 0.0 { num / den } else { 0.0 };

    let mut res_sq = 0.0;
    let mut a_sq = 0.0;
    let mut rb_sq = 0.0;
    for (a, b) in data.a.iter().zip(&data.b) {
        res_sq += (a - ratio * b).norm_squared();
        a_sq += a.norm_squared();
        rb_sq += (ratio * b).norm_squared();
    }
    let scale = a_sq.max(rb_sq).max(tol::KERNEL_TOL * tol::KERNEL_TOL).sqrt();
    let residual = res_sq.sqrt() / scale;

    if residual > tol::FIT_TOL {
        return Err(Error::NotASolution { ratio, residual, tol: tol::FIT_TOL });
    }
    Ok(RecoveryReport { ratio: ChargeToMass::Real(ratio), residual, rows: data.rows })
}

/// Relative residual of the force equation
/// `v̇ + Γ(v,v) = coupling · F̂[v]` along the curve, in the curve's own
/// parametrization (proper time for the Lorentz force equation, the affine
/// parameter for the electromagnetic flow).
///
/// Evaluated only at interior samples with sixth-order stencil support and
/// normalized by `1 + max(‖v̇ + Γ(v,v)‖, |coupling|·‖F̂v‖)`, so the kernel
/// case yields zero for every coupling.
pub fn force_equation_residual<M, F>(
    metric: &M,
    field: &F,
    coupling: f64,
    w: &Worldline,
) -> Result<f64>
where
    M: Metric + ?Sized,
    F: Field + ?Sized,
{
    if w.len() < 9 {
        return Err(Error::config("residual check needs at least 9 samples"));
    }
    let h = w
        .uniform_step(1e-9)
        .ok_or_else(|| Error::config("residual check needs a uniform parameter grid"))?;

    let samples = w.samples();
    let len = samples.len();
    let vseries: Vec<DVector<f64>> = samples.iter().map(|s| s.v.clone()).collect();
    let vdot = grid_derivative(&vseries, h);

    let mut worst_res: f64 = 0.0;
    let mut worst_scale: f64 = 0.0;
    for i in 3..len - 3 {
        let s = &samples[i];
        let gamma = metric.christoffel(&s.x)?;
        let fhat = raise_field(metric, field, &s.x)?;
        let acc = vdot[i].as_ref().unwrap() + gamma.quadratic(&s.v);
        let force = coupling * (fhat * &s.v);
        worst_res = worst_res.max((&acc - &force).norm());
        worst_scale = worst_scale.max(acc.norm()).max(force.norm());
    }
    Ok(worst_res / (1.0 + worst_scale))
}
