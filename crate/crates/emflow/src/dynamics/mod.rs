//! The five dynamical systems on a charged-particle spacetime, their
//! integrators, and the observables defined on integrated worldlines.

mod integrate;
mod recover;
mod reparam;
mod systems;

pub use integrate::{integrate, IntegratorConfig, Method};
pub(crate) use recover::grid_derivative as position_derivative;
pub use recover::{
    force_equation_residual, recover_charge_to_mass, ChargeToMass, RecoveryReport,
};
pub use reparam::{efe_rescale, reparametrize_proper_time};
pub use systems::{
    cotangent_flow_rhs, efe_rhs, lfe_rhs, magnetic_flow_rhs, twisted_hamiltonian_rhs,
    CotangentSystem, DynamicalSystem, ForceSystem,
};

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::Event;

/// One sample of an integrated curve: parameter value, base point, and the
/// fiber vector — the velocity `dx/dλ` for tangent-bundle systems, the
/// covelocity `p` for cotangent-bundle systems (see the worldline's
/// metadata for which).
#[derive(Clone, Debug)]
pub struct Sample {
    pub lambda: f64,
    pub x: Event,
    pub v: DVector<f64>,
}

/// How a worldline is parametrized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamKind {
    /// `g(v,v) = 1` at every sample: arc-length/proper-time parametrization.
    ProperTime,
    /// `g(v,v) = speed²` at every sample: affine parameter with
    /// `ds = speed · dλ`.
    AffineConstantSpeed(f64),
    /// No normalization claimed.
    Generic,
}

impl ParamKind {
    /// Nominal value of `g(v,v)` along the curve, when one is claimed.
    pub fn norm_sq(&self) -> Option<f64> {
        match self {
            ParamKind::ProperTime => Some(1.0),
            ParamKind::AffineConstantSpeed(c) => Some(c * c),
            ParamKind::Generic => None,
        }
    }
}

/// Provenance of a worldline: which system generated it, with which
/// scalar parameters, and how well the conserved fiber norm held up.
#[derive(Clone, Debug, Default)]
pub struct WorldlineMeta {
    /// Generating system: "lfe", "efe", "cotangent", "twisted", "magnetic",
    /// or a descriptive tag for manually built curves.
    pub system: String,
    /// Named scalar parameters ("coupling", "h_drift", ...).
    pub params: BTreeMap<String, f64>,
    /// Max over samples of `|g(v,v) − g(v₀,v₀)|` observed at output
    /// samples (for cotangent systems, with `g⁻¹(p,p)` instead).
    pub norm_drift: f64,
}

impl WorldlineMeta {
    pub fn new(system: &str) -> Self {
        WorldlineMeta { system: system.to_string(), ..Default::default() }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn coupling(&self) -> Option<f64> {
        self.params.get("coupling").copied()
    }
}

/// A sampled solution curve.
#[derive(Clone, Debug)]
pub struct Worldline {
    samples: Vec<Sample>,
    param: ParamKind,
    meta: WorldlineMeta,
}

impl Worldline {
    pub fn from_samples(
        samples: Vec<Sample>,
        param: ParamKind,
        meta: WorldlineMeta,
    ) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::config("a worldline needs at least 2 samples"));
        }
        let n = samples[0].x.dim();
        for (i, s) in samples.iter().enumerate() {
            if s.x.dim() != n || s.v.len() != n {
                return Err(Error::config(format!("sample {i} has inconsistent dimension")));
            }
            if !s.lambda.is_finite()
                || s.x.coords().iter().any(|c| !c.is_finite())
                || s.v.iter().any(|c| !c.is_finite())
            {
                return Err(Error::config(format!("sample {i} has non-finite entries")));
            }
            if i > 0 && s.lambda <= samples[i - 1].lambda {
                return Err(Error::config(format!(
                    "parameter values must be strictly increasing (sample {i})"
                )));
            }
        }
        Ok(Worldline { samples, param, meta })
    }

    pub fn dim(&self) -> usize {
        self.samples[0].x.dim()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: at least 2 samples
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().unwrap()
    }

    pub fn param_kind(&self) -> ParamKind {
        self.param
    }

    pub fn meta(&self) -> &WorldlineMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut WorldlineMeta {
        &mut self.meta
    }

    pub fn span(&self) -> f64 {
        self.last().lambda - self.first().lambda
    }

    /// Uniform grid spacing, if the parameter grid is uniform to relative
    /// tolerance `rtol`.
    pub fn uniform_step(&self, rtol: f64) -> Option<f64> {
        let h = (self.last().lambda - self.first().lambda) / (self.len() - 1) as f64;
        for i in 1..self.len() {
            let dl = self.samples[i].lambda - self.samples[i - 1].lambda;
            if (dl - h).abs() > rtol * h.abs() {
                return None;
            }
        }
        Some(h)
    }

    /// Max over matched samples of the Euclidean chart distance between
    /// the two curves' positions. The curves must have equal length;
    /// parameter grids are not compared, so this measures image
    /// coincidence for curves sampled at corresponding points.
    pub fn max_position_distance(&self, other: &Worldline) -> Result<f64> {
        if self.len() != other.len() || self.dim() != other.dim() {
            return Err(Error::config("can only compare worldlines sampled alike"));
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.samples.iter().zip(other.samples.iter()) {
            worst = worst.max((a.x.coords() - b.x.coords()).norm());
        }
        Ok(worst)
    }

    /// Max over samples of `|g(v,v) − claimed|` for the claimed
    /// parametrization; `None` when the curve claims nothing.
    pub fn max_norm_violation<M: crate::geometry::Metric + ?Sized>(
        &self,
        metric: &M,
    ) -> Result<Option<f64>> {
        let Some(target) = self.param.norm_sq() else {
            return Ok(None);
        };
        let mut worst: f64 = 0.0;
        for s in &self.samples {
            let q = metric.inner(&s.x, &s.v, &s.v)?;
            worst = worst.max((q - target).abs());
        }
        Ok(Some(worst))
    }
}

/// A point of the cotangent bundle: base event plus covelocity one-form.
#[derive(Clone, Debug)]
pub struct CotangentState {
    pub x: Event,
    pub p: DVector<f64>,
}

impl CotangentState {
    pub fn new(x: Event, p: DVector<f64>) -> Result<Self> {
        if p.len() != x.dim() {
            return Err(Error::config("covelocity dimension must match the event"));
        }
        if p.iter().any(|c| !c.is_finite()) {
            return Err(Error::config("covelocity must be finite"));
        }
        Ok(CotangentState { x, p })
    }

    /// Lowers a velocity with the metric: `p_μ = g_{μν} v^ν`.
    pub fn from_velocity<M: crate::geometry::Metric + ?Sized>(
        metric: &M,
        x: Event,
        v: &DVector<f64>,
    ) -> Result<Self> {
        let g = metric.components(&x)?;
        Ok(CotangentState { p: &g * v, x })
    }
}
