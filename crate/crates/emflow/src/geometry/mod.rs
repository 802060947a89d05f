//! Charts, metrics, fields, and pointwise tensor algebra.

mod field;
mod metric;

pub use field::{closedness_violation_fd, two_form_fd, ConstantField, Field};
pub use metric::{christoffel_fd, Christoffel, Euclidean, Metric, Minkowski, Schwarzschild, Signature};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tol;

/// A point of the chart: coordinates `(x⁰, …, x^{n−1})`, with coordinate 0
/// playing the role of time in Lorentzian signature.
#[derive(Clone, Debug, PartialEq)]
pub struct Event(DVector<f64>);

impl Event {
    /// Validating constructor for externally supplied coordinates.
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::config(format!(
                "an event needs at least 2 coordinates, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::config(format!(
                "event coordinates must be finite, got {:?}",
                coords.as_slice()
            )));
        }
        Ok(Event(coords))
    }

    pub fn from_vec(coords: Vec<f64>) -> Self {
        Event(DVector::from_vec(coords))
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        Event(DVector::from_column_slice(coords))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> f64) -> Self {
        let mut f = f;
        Event(DVector::from_fn(n, |i, _| f(i)))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn coords_mut(&mut self) -> &mut DVector<f64> {
        &mut self.0
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.0
    }
}

impl From<DVector<f64>> for Event {
    fn from(v: DVector<f64>) -> Self {
        Event(v)
    }
}

/// Causal type of a tangent vector, oriented by the sign of its
/// time component (valid in the static charts this crate ships, where
/// `∂₀` is timelike and future-directed).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CausalClass {
    TimelikeFuture,
    TimelikePast,
    NullFuture,
    NullPast,
    Spacelike,
}

impl CausalClass {
    pub fn is_timelike(self) -> bool {
        matches!(self, CausalClass::TimelikeFuture | CausalClass::TimelikePast)
    }

    pub fn is_null(self) -> bool {
        matches!(self, CausalClass::NullFuture | CausalClass::NullPast)
    }

    pub fn is_causal(self) -> bool {
        self.is_timelike() || self.is_null()
    }

    pub fn is_future(self) -> bool {
        matches!(self, CausalClass::TimelikeFuture | CausalClass::NullFuture)
    }
}

/// Component matrix `g_{μν}(x)`.
pub fn metric_at<M: Metric + ?Sized>(metric: &M, x: &Event) -> Result<DMatrix<f64>> {
    metric.components(x)
}

/// Christoffel symbols `Γ^μ_{αβ}(x)` of the Levi-Civita connection.
pub fn christoffel_at<M: Metric + ?Sized>(metric: &M, x: &Event) -> Result<Christoffel> {
    metric.christoffel(x)
}

/// Mixed field tensor `F̂^μ_ν = g^{μα} F_{αν}` at `x` — the linear map
/// applied to the velocity in the force equations.
pub fn raise_field<M, F>(metric: &M, field: &F, x: &Event) -> Result<DMatrix<f64>>
where
    M: Metric + ?Sized,
    F: Field + ?Sized,
{
    if metric.dim() != field.dim() {
        return Err(Error::config(format!(
            "metric '{}' has dimension {}, field '{}' has {}",
            metric.name(),
            metric.dim(),
            field.name(),
            field.dim()
        )));
    }
    Ok(metric.inverse(x)? * field.two_form(x)?)
}

/// Classifies a tangent vector at `x` as timelike / null / spacelike with
/// time orientation. Null means `|g(v,v)|` below [`tol::TOL_NULL`] relative
/// to the squared Euclidean size of `v`.
pub fn causal_character<M: Metric + ?Sized>(
    metric: &M,
    x: &Event,
    v: &DVector<f64>,
) -> Result<CausalClass> {
    if metric.signature() != Signature::Lorentzian {
        return Err(Error::config(format!(
            "causal classification needs a Lorentzian metric, '{}' is not",
            metric.name()
        )));
    }
    if v.len() != metric.dim() {
        return Err(Error::config(format!(
            "vector has dimension {}, metric '{}' expects {}",
            v.len(),
            metric.name(),
            metric.dim()
        )));
    }
    let scale = v.norm_squared();
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::config("cannot classify a zero or non-finite vector"));
    }
    let q = metric.inner(x, v, v)?;
    let future = v[0] >= 0.0;
    if q.abs() <= tol::TOL_NULL * scale {
        Ok(if future { CausalClass::NullFuture } else { CausalClass::NullPast })
    } else if q > 0.0 {
        Ok(if future { CausalClass::TimelikeFuture } else { CausalClass::TimelikePast })
    } else {
        Ok(CausalClass::Spacelike)
    }
}

/// Proper length `∫ √g(ẋ,ẋ) dλ` of a sampled causal curve, by the
/// trapezoid rule on its parameter grid. Errors if any sample is spacelike.
pub fn proper_length<M: Metric + ?Sized>(
    metric: &M,
    curve: &crate::dynamics::Worldline,
) -> Result<f64> {
    let samples = curve.samples();
    if samples.len() < 2 {
        return Err(Error::config("proper length needs at least 2 samples"));
    }
    let mut integrand = Vec::with_capacity(samples.len());
    for s in samples {
        let q = metric.inner(&s.x, &s.v, &s.v)?;
        let scale = s.v.norm_squared();
        if q < -tol::TOL_NULL * scale {
            return Err(Error::Causality(format!(
                "spacelike sample at lambda = {}: g(v,v) = {q:.3e}",
                s.lambda
            )));
        }
        integrand.push(q.max(0.0).sqrt());
    }
    let mut total = 0.0;
    for i in 1..samples.len() {
        let dl = samples[i].lambda - samples[i - 1].lambda;
        total += 0.5 * (integrand[i] + integrand[i - 1]) * dl;
    }
    Ok(total)
}
