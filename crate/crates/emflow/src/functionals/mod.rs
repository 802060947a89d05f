//! Discrete action functionals on polyline curves and their extremization.
//!
//! Three functionals over curves connecting two fixed events:
//!
//! * `I  = ∫ (ds + (q/m) ω)` — charged-particle action, parametrization
//!   free, extremals solve the force equation with the prescribed ratio;
//! * `J  = ∫ (k·g(γ′,γ′) + Q ω[γ′]) dλ` over a fixed parameter interval
//!   (`k = ½`, or `k = 1` for the variant `J̃`) — energy-type action whose
//!   timelike extremals solve the force equation with a ratio fixed only
//!   a posteriori by `(q/m)∫ds = QΔλ`;
//! * `K  = ½(∫ds)² + β∫ω` with `β = QΔλ` — parametrization-free companion
//!   of `J` with the same unparametrized extremals.
//!
//! All quadrature is midpoint-per-segment on the polyline nodes.

mod extremize;

pub use extremize::{extremize_j, ExtremalResult, OptimizerConfig};

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::dynamics::{ChargeToMass, ParamKind, Sample, Worldline, WorldlineMeta};
use crate::error::{Error, Result};
use crate::geometry::{Event, Field, Metric};
use crate::tol;

/// A discrete curve: ordered nodes with a strictly increasing parameter
/// grid. Endpoints are treated as fixed by all variational operations;
/// only interior nodes are ever perturbed.
#[derive(Clone, Debug)]
pub struct PolylineCurve {
    nodes: Vec<Event>,
    grid: Vec<f64>,
}

impl PolylineCurve {
    pub fn new(nodes: Vec<Event>, grid: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || grid.len() != nodes.len() {
            return Err(Error::config(
                "a polyline needs at least 2 nodes and one parameter per node",
            ));
        }
        let n = nodes[0].dim();
        for (i, x) in nodes.iter().enumerate() {
            if x.dim() != n {
                return Err(Error::config(format!("node {i} has inconsistent dimension")));
            }
            if x.coords().iter().any(|c| !c.is_finite()) || !grid[i].is_finite() {
                return Err(Error::config(format!("node {i} has non-finite entries")));
            }
            if i > 0 && grid[i] <= grid[i - 1] {
                return Err(Error::config("parameter grid must be strictly increasing"));
            }
        }
        Ok(PolylineCurve { nodes, grid })
    }

    /// Straight coordinate segment from `x0` to `x1` on a uniform grid
    /// over `[λ₀, λ₁]` with `segments + 1` nodes.
    pub fn straight(x0: &Event, x1: &Event, segments: usize, range: (f64, f64)) -> Result<Self> {
        if segments < 1 {
            return Err(Error::config("need at least 1 segment"));
        }
        if x0.dim() != x1.dim() {
            return Err(Error::config("endpoint dimensions differ"));
        }
        if !(range.1 > range.0) {
            return Err(Error::config("parameter range must be increasing"));
        }
        let count = segments + 1;
        let mut nodes = Vec::with_capacity(count);
        let mut grid = Vec::with_capacity(count);
        for j in 0..count {
            let t = j as f64 / segments as f64;
            nodes.push(Event::from(
                x0.coords() + t * (x1.coords() - x0.coords()),
            ));
            grid.push(range.0 + t * (range.1 - range.0));
        }
        PolylineCurve::new(nodes, grid)
    }

    pub fn from_worldline(w: &Worldline) -> Self {
        PolylineCurve {
            nodes: w.samples().iter().map(|s| s.x.clone()).collect(),
            grid: w.samples().iter().map(|s| s.lambda).collect(),
        }
    }

    pub fn nodes(&self) -> &[Event] {
        &self.nodes
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].dim()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn segment_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn span(&self) -> f64 {
        self.grid[self.grid.len() - 1] - self.grid[0]
    }

    pub fn first(&self) -> &Event {
        &self.nodes[0]
    }

    pub fn last(&self) -> &Event {
        &self.nodes[self.nodes.len() - 1]
    }

    pub(crate) fn nodes_mut(&mut self) -> &mut Vec<Event> {
        &mut self.nodes
    }

    /// Sup over nodes of the Euclidean coordinate distance to another
    /// polyline with the same node count.
    pub fn max_deviation_from(&self, other: &PolylineCurve) -> f64 {
        self.nodes
            .iter()
            .zip(&other.nodes)
            .map(|(a, b)| (a.coords() - b.coords()).norm())
            .fold(0.0, f64::max)
    }

    /// Whether every segment chord is timelike and future-directed, with
    /// the metric read at the segment midpoint.
    pub fn is_timelike_future<M: Metric + ?Sized>(&self, metric: &M) -> Result<bool> {
        for i in 0..self.segment_count() {
            let dx = self.nodes[i + 1].coords() - self.nodes[i].coords();
            let mid = Event::from(0.5 * (self.nodes[i].coords() + self.nodes[i + 1].coords()));
            let q = metric.inner(&mid, &dx, &dx)?;
            if q <= tol::TOL_NULL * dx.norm_squared() || dx[0] <= 0.0 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Resamples the polyline as a worldline, estimating tangents from the
    /// node positions with central finite differences (one-sided at the
    /// endpoints). Needs a uniform grid.
    pub fn to_worldline(&self) -> Result<Worldline> {
        let count = self.node_count();
        if count < 5 {
            return Err(Error::config("tangent estimation needs at least 5 nodes"));
        }
        let h = {
            let h = self.span() / (count - 1) as f64;
            for i in 1..count {
                if ((self.grid[i] - self.grid[i - 1]) - h).abs() > 1e-9 * h {
                    return Err(Error::config("tangent estimation needs a uniform grid"));
                }
            }
            h
        };
        let series: Vec<DVector<f64>> =
            self.nodes.iter().map(|x| x.coords().clone()).collect();
        let inner = crate::dynamics::position_derivative(&series, h);
        let mut samples = Vec::with_capacity(count);
        for i in 0..count {
            let v = match &inner[i] {
                Some(v) => v.clone(),
                None if i == 0 => {
                    (-3.0 * &series[0] + 4.0 * &series[1] - &series[2]) / (2.0 * h)
                }
                None => {
                    (3.0 * &series[count - 1] - 4.0 * &series[count - 2]
                        + &series[count - 3])
                        / (2.0 * h)
                }
            };
            samples.push(Sample { lambda: self.grid[i], x: self.nodes[i].clone(), v });
        }
        Worldline::from_samples(samples, ParamKind::Generic, WorldlineMeta::new("polyline"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionKind {
    I,
    J,
    Jtilde,
    K,
}

impl ActionKind {
    pub fn label(&self) -> &'static str {
        match self {
            ActionKind::I => "I",
            ActionKind::J => "J",
            ActionKind::Jtilde => "Jtilde",
            ActionKind::K => "K",
        }
    }
}

/// Value of a functional on a discrete curve, with first-variation and
/// constraint diagnostics.
#[derive(Clone, Debug)]
pub struct ActionReport {
    pub which: ActionKind,
    pub value: f64,
    /// Max-norm over interior nodes of the central finite-difference first
    /// variation (step `1e-6` per unit coordinate scale).
    pub gradient_norm: f64,
    /// Chord proper length `Σ √g(Δx,Δx)` (midpoint metric).
    pub integral_ds: f64,
    /// Potential integral `Σ ω(mid)·Δx`.
    pub integral_omega: f64,
    /// Scalar parameters of the functional ("ratio", "coupling", "span",
    /// "beta").
    pub params: BTreeMap<String, f64>,
}

/// Per-segment quadrature contributions; every functional is a function
/// of these sums alone.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct SegmentSums {
    /// `Σ √max(g_mid(Δx,Δx), 0)`.
    pub ds: f64,
    /// `Σ g_mid(Δx,Δx)/Δλ` — the energy integrand `∫ g(γ′,γ′) dλ`.
    pub energy: f64,
    /// `Σ ω(mid)·Δx`.
    pub omega: f64,
}

impl std::ops::Add for SegmentSums {
    type Output = SegmentSums;
    fn add(self, rhs: SegmentSums) -> SegmentSums {
        SegmentSums {
            ds: self.ds + rhs.ds,
            energy: self.energy + rhs.energy,
            omega: self.omega + rhs.omega,
        }
    }
}

impl std::ops::Sub for SegmentSums {
    type Output = SegmentSums;
    fn sub(self, rhs: SegmentSums) -> SegmentSums {
        SegmentSums {
            ds: self.ds - rhs.ds,
            energy: self.energy - rhs.energy,
            omega: self.omega - rhs.omega,
        }
    }
}

/// Quadrature contributions of the segment from `a` to `b` over parameter
/// step `dl`: metric and potential read at the chord midpoint, negative
/// chord norms clamped to zero for the `ds` term (the causal guards of the
/// individual functionals run before any clamping matters).
pub(crate) fn segment_sums<M, F>(
    metric: &M,
    field: &F,
    a: &Event,
    b: &Event,
    dl: f64,
) -> Result<SegmentSums>
where
    M: Metric + ?Sized,
    F: Field + ?Sized,
{
    let dx = b.coords() - a.coords();
    let mid = Event::from(0.5 * (a.coords() + b.coords()));
    let q = metric.inner(&mid, &dx, &dx)?;
    let omega = if field.has_potential() { field.potential(&mid)?.dot(&dx) } else { 0.0 };
    Ok(SegmentSums { ds: q.max(0.0).sqrt(), energy: q / dl, omega })
}

pub(crate) fn curve_sums<M, F>(metric: &M, field: &F, c: &PolylineCurve) -> Result<SegmentSums>
where
    M: Metric + ?Sized,
    F: Field + ?Sized,
{
    let mut total = SegmentSums::default();
    for i in 0..c.segment_count() {
        total = total
            + segment_sums(metric, field, &c.nodes[i], &c.nodes[i + 1], c.grid[i + 1] - c.grid[i])?;
    }
    Ok(total)
}

fn require_potential<F: Field + ?Sized>(field: &F) -> Result<()> {
    if !field.has_potential() {
        return Err(Error::config(format!(
            "field '{}' has no potential one-form; the action needs ω with F = dω",
            field.name()
        )));
    }
    Ok(())
}

fn require_timelike<M: Metric + ?Sized>(metric: &M, c: &PolylineCurve) -> Result<()> {
    if !c.is_timelike_future(metric)? {
        return Err(Error::Causality(
            "the curve has a non-timelike or past-directed segment".to_string(),
        ));
    }
    Ok(())
}

/// How a functional combines the segment sums into a value.
pub(crate) fn combine(which: ActionKind, params: &BTreeMap<String, f64>, s: &SegmentSums) -> f64 {
    match which {
        ActionKind::I => s.ds + params["ratio"] * s.omega,
        ActionKind::J => 0.5 * s.energy + params["coupling"] * s.omega,
        ActionKind::Jtilde => s.energy + params["coupling"] * s.omega,
        ActionKind::K => 0.5 * s.ds * s.ds + params["beta"] * s.omega,
    }
}

/// Central finite-difference first variation over interior nodes,
/// max-norm. Exactly the derivative of the full action, computed by
/// updating only the two segments a node touches.
fn gradient_norm<M, F>(
    metric: &M,
    field: &F,
    which: ActionKind,
    params: &BTreeMap<String, f64>,
    c: &PolylineCurve,
    total: SegmentSums,
) -> Result<f64>
where
    M: Metric + ?Sized,
    F: Field + ?Sized,
{
    let grad = gradient(metric, field, which, params, c, total)?;
    Ok(grad.iter().fold(0.0_f64, |m, g| m.max(g.abs())))
}

/// Full finite-difference gradient over interior nodes, flattened in node
/// order. Shared by the diagnostics and the extremizer.
pub(crate) fn gradient<M, F>(
    metric: &M,
    field: &F,
    which: ActionKind,
    params: &BTreeMap<String, f64>,
    c: &PolylineCurve,
    total: SegmentSums,
) -> Result<Vec<f64>>
where
    M: Metric + ?Sized,
    F: Field + ?Sized,
{
    let n = c.dim();
    let count = c.node_count();
    let mut grad = Vec::with_capacity((count - 2) * n);
    let mut probe = c.clone();
    for j in 1..count - 1 {
        let local = |nodes: &[Event]| -> Result<SegmentSums> {
            Ok(segment_sums(metric, field, &nodes[j - 1], &nodes[j], c.grid[j] - c.grid[j - 1])?
                + segment_sums(metric, field, &nodes[j], &nodes[j + 1], c.grid[j + 1] - c.grid[j])?)
        };
        let base = local(&probe.nodes)?;
        for mu in 0..n {
            let x0 = probe.nodes[j].coords()[mu];
            let h = 1e-6 * (1.0 + x0.abs());
            probe.nodes[j].coords_mut()[mu] = x0 + h;
            let plus = local(&probe.nodes)?;
            probe.nodes[j].coords_mut()[mu] = x0 - h;
            let minus = local(&probe.nodes)?;
            probe.nodes[j].coords_mut()[mu] = x0;
            let vp = combine(which, params, &(total - base + plus));
            let vm = combine(which, params, &(total - base + minus));
            grad.push((vp - vm) / (2.0 * h));
        }
    }
    Ok(grad)
}

fn finish_report<M, F>(
    metric: &M,
    field: &F,
    which: ActionKind,
    params: BTreeMap<String, f64>,
    c: &PolylineCurve,
) -> Result<ActionReport>
where
    M: Metric + ?Sized,
    F: Field + ?Sized,
{
    let total = curve_sums(metric, field, c)?;
    let gradient_norm = gradient_norm(metric, field, which, &params, c, total)?;
    Ok(ActionReport {
        which,
        value: combine(which, &params, &total),
        gradient_norm,
        integral_ds: total.ds,
        integral_omega: total.omega,
        params,
    })
}

/// Charged-particle action `I = Σ (√g_mid(Δx,Δx) + (q/m)·ω_mid(Δx))`.
/// Reads nodes only (parametrization free). The curve must be timelike
/// future-directed and the field must carry a potential.
pub fn action_i<M, F>(metric: &M, field: &F, ratio: f64, c: &PolylineCurve) -> Result<ActionReport>
where
    M: Metric + ?Sized,
    F: Field + ?Sized,
{
    require_potential(field)?;
    require_timelike(metric, c)?;
    let mut params = BTreeMap::new();
    params.insert("ratio".to_string(), ratio);
    finish_report(metric, field, ActionKind::I, params, c)
}

/// Energy-type action
/// `J = Σ (k·g_mid(d,d) + Q·ω_mid(d))·Δλ`, `d = Δx/Δλ`, with `k = ½`
/// (`half = true`) or `k = 1` (the variant `J̃`). Parametrization
/// dependent by design; no causality requirement.
pub fn action_j<M, F>(
    metric: &M,
    field: &F,
    coupling: f64,
    c: &PolylineCurve,
    half: bool,
) -> Result<ActionReport>
where
    M: Metric + ?Sized,
    F: Field + ?Sized,
{
    require_potential(field)?;
    let mut params = BTreeMap::new();
    params.insert("coupling".to_string(), coupling);
    params.insert("span".to_string(), c.span());
    let which = if half { ActionKind::J } else { ActionKind::Jtilde };
    finish_report(metric, field, which, params, c)
}

/// Parametrization-free companion `K = ½(Σds)² + β·Σω`.
pub fn action_k<M, F>(metric: &M, field: &F, beta: f64, c: &PolylineCurve) -> Result<ActionReport>
where
    M: Metric + ?Sized,
    F: Field + ?Sized,
{
    require_potential(field)?;
    require_timelike(metric, c)?;
    let mut params = BTreeMap::new();
    params.insert("beta".to_string(), beta);
    finish_report(metric, field, ActionKind::K, params, c)
}

/// Constraint report for an extremal of `J`: how well the a-posteriori
/// ratio identity `(q/m)·∫ds = Q·Δλ` holds.
#[derive(Clone, Debug)]
pub struct NeoReport {
    pub ratio: ChargeToMass,
    pub integral_ds: f64,
    /// `Q·Δλ`.
    pub target: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    /// True when the recovery returned the symbol `R` (kernel-degenerate
    /// trajectory): the constraint is then vacuously satisfiable.
    pub kernel_degenerate: bool,
}

/// Checks the a-posteriori ratio identity on a converged extremal of `J`:
/// recovers `q/m` from the curve, measures `∫ds` as the chord proper
/// length, and reports `|(q/m)·∫ds − Q·Δλ|` absolutely and relative to
/// `|Q·Δλ|`.
pub fn check_neo<M, F>(
    metric: &M,
    field: &F,
    c: &PolylineCurve,
    coupling: f64,
    dlambda: f64,
) -> Result<NeoReport>
where
    M: Metric + ?Sized,
    F: Field + ?Sized,
{
    let target = coupling * dlambda;
    let total = curve_sums(metric, field, c)?;
    let w = c.to_worldline()?;
    let recovery = crate::dynamics::recover_charge_to_mass(metric, field, &w)?;
    match recovery.ratio {
        ChargeToMass::SymbolR => Ok(NeoReport {
            ratio: ChargeToMass::SymbolR,
            integral_ds: total.ds,
            target,
            abs_error: 0.0,
            rel_error: 0.0,
            kernel_degenerate: true,
        }),
        ChargeToMass::Real(r) => {
            let abs_error = (r * total.ds - target).abs();
            let rel_error = if target.abs() > 0.0 { abs_error / target.abs() } else { abs_error };
            Ok(NeoReport {
                ratio: ChargeToMass::Real(r),
                integral_ds: total.ds,
                target,
                abs_error,
                rel_error,
                kernel_degenerate: false,
            })
        }
    }
}

/// Lower bound `|β| / l_est` on the charge-to-mass ratio of any timelike
/// extremal of `J` with `β = QΔλ`, from a lower estimate `l_est > 0` of
/// the Lorentzian distance between the endpoints.
pub fn charge_bound<M: Metric + ?Sized>(
    metric: &M,
    beta: f64,
    x0: &Event,
    x1: &Event,
    l_est: f64,
) -> Result<f64> {
    metric.check_event(x0)?;
    metric.check_event(x1)?;
    if !(l_est > 0.0) {
        return Err(Error::Causality(format!(
            "no positive distance estimate between the endpoints (got {l_est}); \
             they are not chronologically related at this resolution"
        )));
    }
    Ok(beta.abs() / l_est)
}
