//! Two-point boundary value solvers.
//!
//! Connecting two chronologically related events by a solution of the
//! Lorentz force equation (prescribed ratio `q/m`, unknown direction and
//! proper-time span) or of the electromagnetic flow equation (normalized
//! coupling `ε = ±1` over a unit parameter span, unknown direction and
//! speed `C`) is a shooting problem: root-find the endpoint miss map over
//! the initial data.
//!
//! The mass-shell constraint `g(u,u) = 1` is built into the unknowns, not
//! enforced by penalty: initial directions live on the future unit
//! hyperboloid, charted as a graph over an orthonormal frame obtained from
//! the eigendecomposition of the metric at the start event.

mod scan;

pub use scan::{
    lorentzian_distance_estimate, scan_charge_to_mass, DistanceEstimate, ScanEntry, ScanResult,
};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{integrate, ForceSystem, IntegratorConfig, Worldline};
use crate::error::{Error, Result};
use crate::geometry::{Event, Field, Metric, Signature};
use crate::tol;

/// Which connection problem is being solved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProblemKind {
    /// Lorentz force equation with prescribed charge-to-mass ratio;
    /// proper-time parametrized, unknowns are the direction and the total
    /// proper time.
    Lorentz { ratio: f64 },
    /// Electromagnetic flow with normalized coupling `ε = ±1` over the
    /// fixed parameter span `[0, 1]` (any other coupling is reachable by
    /// rescaling); unknowns are the direction and the speed `C > 0`.
    Flow { eps: f64 },
}

/// Solver knobs shared by all connection solvers.
#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Convergence threshold on the coordinate norm of the endpoint miss.
    pub tol: f64,
    pub max_iters: usize,
    /// Random restarts (perturbations of the chord guess) after the warm
    /// start fails.
    pub max_restarts: usize,
    /// Seed for the restart draws; identical seeds give identical runs.
    pub seed: u64,
    /// Output samples per trajectory.
    pub samples: usize,
    pub integrator: IntegratorConfig,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: tol::BVP_TOL_FLAT,
            max_iters: tol::BVP_MAX_ITERS,
            max_restarts: tol::BVP_MAX_RESTARTS,
            seed: 7,
            samples: 201,
            integrator: IntegratorConfig::default(),
        }
    }
}

/// A two-point connection problem between fixed events.
#[derive(Clone)]
pub struct ConnectionProblem<'a> {
    pub metric: &'a dyn Metric,
    pub field: &'a dyn Field,
    pub x0: Event,
    pub x1: Event,
    pub kind: ProblemKind,
    pub opts: SolverOptions,
}

impl<'a> ConnectionProblem<'a> {
    pub fn validate(&self) -> Result<()> {
        if self.metric.signature() != Signature::Lorentzian {
            return Err(Error::config("connection problems need a Lorentzian metric"));
        }
        if self.field.dim() != self.metric.dim() {
            return Err(Error::config("field and metric dimensions differ"));
        }
        self.metric.check_event(&self.x0)?;
        self.metric.check_event(&self.x1)?;
        if (self.x0.coords() - self.x1.coords()).amax() == 0.0 {
            return Err(Error::config("the endpoints coincide"));
        }
        if let ProblemKind::Flow { eps } = self.kind {
            if eps.abs() != 1.0 {
                return Err(Error::config(format!("eps must be +1 or -1, got {eps}")));
            }
        }
        if self.opts.samples < 2 {
            return Err(Error::config("need at least 2 output samples"));
        }
        Ok(())
    }
}

/// Unknowns of the shooting map: a chart point `w` on the future unit
/// hyperboloid (the reconstructed tangent is
/// `u = √(1+|w|²)·E₀ + Σ w_k·E_k` in an orthonormal frame, so
/// `g(u,u) = 1` holds identically) and a positive scale — the proper-time
/// span for the Lorentz problem, the initial speed for the flow problem.
#[derive(Clone, Debug)]
pub struct ShootingVariables {
    pub direction: DVector<f64>,
    pub scale: f64,
}

impl ShootingVariables {
    pub fn new(direction: DVector<f64>, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::config(format!("the scale must be positive, got {scale}")));
        }
        if direction.iter().any(|w| !w.is_finite()) {
            return Err(Error::config("non-finite direction chart entries"));
        }
        Ok(ShootingVariables { direction, scale })
    }
}

/// Result of one evaluation of the endpoint map.
#[derive(Clone, Debug)]
pub struct ShotOutcome {
    /// `x(end) − x₁` in chart coordinates.
    pub miss: DVector<f64>,
    pub miss_norm: f64,
    pub worldline: Worldline,
}

/// A converged connection.
#[derive(Clone, Debug)]
pub struct Connection {
    pub worldline: Worldline,
    pub vars: ShootingVariables,
    pub miss_norm: f64,
    pub iterations: usize,
    /// Restarts consumed before convergence (0 = warm start succeeded).
    pub restarts: usize,
}

/// Orthonormal frame at an event: `basis[0]` is unit timelike
/// future-directed, the rest unit spacelike, built from the symmetric
/// eigendecomposition of the metric components.
pub(crate) struct BoostFrame {
    basis: Vec<DVector<f64>>,
}

impl BoostFrame {
    pub(crate) fn at<M: Metric + ?Sized>(metric: &M, x: &Event) -> Result<BoostFrame> {
        let g = metric.components(x)?;
        let n = g.nrows();
        let eig = SymmetricEigen::new(g);
        let scale = eig.eigenvalues.amax();
        let mut timelike: Option<DVector<f64>> = None;
        let mut spacelike: Vec<DVector<f64>> = Vec::with_capacity(n - 1);
        for i in 0..n {
            let lam = eig.eigenvalues[i];
            let e = eig.eigenvectors.column(i).into_owned();
            if lam > 1e-12 * scale {
                if timelike.is_some() {
                    return Err(Error::Singular(
                        "metric has more than one timelike eigendirection".to_string(),
                    ));
                }
                timelike = Some(e / lam.sqrt());
            } else if lam < -1e-12 * scale {
                spacelike.push(e / (-lam).sqrt());
            } else {
                return Err(Error::Singular(format!(
                    "metric is degenerate at the start event (eigenvalue {lam:.3e})"
                )));
            }
        }
        let mut e0 = timelike.ok_or_else(|| {
            Error::Singular("metric has no timelike eigendirection".to_string())
        })?;
        if e0[0] < 0.0 {
            e0 = -e0;
        }
        let mut basis = vec![e0];
        basis.extend(spacelike);
        Ok(BoostFrame { basis })
    }

    /// Future unit timelike tangent of the chart point `w`.
    pub(crate) fn tangent(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut u = (1.0 + w.norm_squared()).sqrt() * &self.basis[0];
        for (k, wk) in w.iter().enumerate() {
            u += *wk * &self.basis[k + 1];
        }
        u
    }

    /// Chart point and proper chord norm of the straight chord `x₁ − x₀`:
    /// the natural warm start. Falls back to the frame's rest direction
    /// when the chord is not timelike future.
    pub(crate) fn chord_guess<M: Metric + ?Sized>(
        &self,
        metric: &M,
        x0: &Event,
        x1: &Event,
    ) -> Result<ShootingVariables> {
        let d = x1.coords() - x0.coords();
        let n = d.len();
        let c0 = metric.inner(x0, &d, &self.basis[0])?;
        let mut c = DVector::zeros(n - 1);
        for k in 0..n - 1 {
            c[k] = -metric.inner(x0, &d, &self.basis[k + 1])?;
        }
        let q = c0 * c0 - c.norm_squared();
        if c0 > 0.0 && q > 0.0 {
            let s = q.sqrt();
            ShootingVariables::new(c / s, s)
        } else {
            ShootingVariables::new(DVector::zeros(n - 1), d.norm().max(0.1))
        }
    }
}

/// Evaluates the endpoint map once: integrates the problem's equation
/// from `x₀` with the initial data encoded by `vars` and reports the
/// coordinate miss at the far end, along with the trajectory.
pub fn shoot(p: &ConnectionProblem, vars: &ShootingVariables) -> Result<ShotOutcome> {
    p.validate()?;
    let frame = BoostFrame::at(p.metric, &p.x0)?;
    shoot_in_frame(p, &frame, vars)
}

fn shoot_in_frame(
    p: &ConnectionProblem,
    frame: &BoostFrame,
    vars: &ShootingVariables,
) -> Result<ShotOutcome> {
    if !(vars.scale > 0.0) || !vars.scale.is_finite() {
        return Err(Error::config(format!("the scale must be positive, got {}", vars.scale)));
    }
    if vars.direction.len() != p.x0.dim() - 1 {
        return Err(Error::config("direction chart has the wrong dimension"));
    }
    let u = frame.tangent(&vars.direction);
    let (sys, v0, range) = match p.kind {
        ProblemKind::Lorentz { ratio } => (
            ForceSystem::lorentz(p.metric, p.field, ratio)?,
            u,
            (0.0, vars.scale),
        ),
        ProblemKind::Flow { eps } => (
            ForceSystem::electromagnetic_flow(p.metric, p.field, eps)?,
            vars.scale * u,
            (0.0, 1.0),
        ),
    };
    let worldline = integrate(&sys, &p.x0, &v0, range, p.opts.samples, &p.opts.integrator)?;
    let miss = worldline.last().x.coords() - p.x1.coords();
    Ok(ShotOutcome { miss_norm: miss.norm(), miss, worldline })
}

/// Damped Newton iteration on the miss map from one initial guess.
/// `Err` carries the best miss norm seen before the attempt died.
fn newton(
    p: &ConnectionProblem,
    frame: &BoostFrame,
    init: &ShootingVariables,
) -> std::result::Result<(ShootingVariables, ShotOutcome, usize), f64> {
    let n = p.x0.dim();
    let pack = |vars: &ShootingVariables| {
        let mut z = DVector::zeros(n);
        z.rows_mut(0, n - 1).copy_from(&vars.direction);
        z[n - 1] = vars.scale.ln();
        z
    };
    let unpack = |z: &DVector<f64>| ShootingVariables {
        direction: z.rows(0, n - 1).into_owned(),
        scale: z[n - 1].exp(),
    };
    let eval = |z: &DVector<f64>| -> Option<ShotOutcome> {
        if z.iter().any(|c| !c.is_finite()) {
            return None;
        }
        shoot_in_frame(p, frame, &unpack(z)).ok()
    };

    let mut best = f64::INFINITY;
    let mut z = pack(init);
    let mut base = match eval(&z) {
        Some(out) => out,
        None => return Err(best),
    };
    best = best.min(base.miss_norm);

    for it in 0..p.opts.max_iters {
        if base.miss_norm <= p.opts.tol {
            return Ok((unpack(&z), base, it));
        }

        let mut jac = DMatrix::zeros(n, n);
        for i in 0..n {
            let h = tol::JACOBIAN_STEP_REL * (1.0 + z[i].abs());
            let mut zp = z.clone();
            zp[i] += h;
            let mut zm = z.clone();
            zm[i] -= h;
            match (eval(&zp), eval(&zm)) {
                (Some(p_out), Some(m_out)) => {
                    jac.column_mut(i).copy_from(&((p_out.miss - m_out.miss) / (2.0 * h)));
                }
                _ => return Err(best),
            }
        }
        let delta = match jac.lu().solve(&(-&base.miss)) {
            Some(d) if d.iter().all(|c| c.is_finite()) => d,
            _ => return Err(best),
        };

        let mut alpha = 1.0_f64;
        let mut accepted = None;
        while alpha >= 1e-8 {
            let zt = &z + alpha * &delta;
            if let Some(out) = eval(&zt) {
                if out.miss_norm < (1.0 - 1e-4 * alpha) * base.miss_norm {
                    accepted = Some((zt, out));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((zt, out)) => {
                z = zt;
                base = out;
                best = best.min(base.miss_norm);
            }
            None => return Err(best),
        }
    }
    if base.miss_norm <= p.opts.tol {
        return Ok((unpack(&z), base, p.opts.max_iters));
    }
    Err(best)
}

/// Shared solver loop: warm start (or chord guess), then seeded random
/// restarts perturbing the chord guess with growing amplitude.
pub(crate) fn solve_core(
    p: &ConnectionProblem,
    warm: Option<&ShootingVariables>,
) -> Result<Connection> {
    p.validate()?;
    let frame = BoostFrame::at(p.metric, &p.x0)?;
    let chord = frame.chord_guess(p.metric, &p.x0, &p.x1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.opts.seed);
    let mut best = f64::INFINITY;

    for attempt in 0..=p.opts.max_restarts {
        let init = if attempt == 0 {
            warm.cloned().unwrap_or_else(|| chord.clone())
        } else {
            let sigma = 0.25 * 1.4_f64.powi(attempt as i32 - 1);
            let dir = DVector::from_fn(chord.direction.len(), |k, _| {
                chord.direction[k] + sigma * (2.0 * rng.random::<f64>() - 1.0)
            });
            let scale = chord.scale * (0.5 * sigma * (2.0 * rng.random::<f64>() - 1.0)).exp();
            ShootingVariables { direction: dir, scale }
        };
        match newton(p, &frame, &init) {
            Ok((vars, outcome, iterations)) => {
                let mut worldline = outcome.worldline;
                if let ProblemKind::Flow { eps } = p.kind {
                    let meta = worldline.meta_mut();
                    meta.params.insert("speed".to_string(), vars.scale);
                    meta.params.insert("induced_ratio".to_string(), eps / vars.scale);
                }
                return Ok(Connection {
                    worldline,
                    vars,
                    miss_norm: outcome.miss_norm,
                    iterations,
                    restarts: attempt,
                });
            }
            Err(b) => best = best.min(b),
        }
    }
    Err(Error::NoConnection { best_miss: best, restarts: p.opts.max_restarts })
}

/// Finds a proper-time-parametrized solution of the Lorentz force
/// equation with the problem's prescribed ratio connecting `x₀` to `x₁`.
pub fn solve_connection_lfe(p: &ConnectionProblem) -> Result<Connection> {
    match p.kind {
        ProblemKind::Lorentz { .. } => solve_core(p, None),
        ProblemKind::Flow { .. } => {
            Err(Error::config("this problem is a flow connection; use the flow solver"))
        }
    }
}

/// Finds an electromagnetic-flow solution with normalized coupling
/// `ε = ±1` over the unit parameter span connecting `x₀` to `x₁`. The
/// returned worldline's metadata reports the speed `C` and the induced
/// charge-to-mass ratio `ε/C`.
pub fn solve_connection_efe(p: &ConnectionProblem) -> Result<Connection> {
    match p.kind {
        ProblemKind::Flow { .. } => solve_core(p, None),
        ProblemKind::Lorentz { .. } => {
            Err(Error::config("this problem is a Lorentz connection; use the Lorentz solver"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{recover_charge_to_mass, ChargeToMass, ParamKind};
    use crate::geometry::{proper_length, ConstantField, Minkowski, Schwarzschild};
    use approx::assert_relative_eq;

    fn quick_opts() -> SolverOptions {
        SolverOptions { samples: 33, ..Default::default() }
    }

    #[test]
    fn frame_tangents_sit_on_the_unit_hyperboloid() {
        let mink = Minkowski::new(4).unwrap();
        let schw = Schwarzschild::new(1.0).unwrap();
        let cases: [(&dyn Metric, Event); 2] = [
            (&mink, Event::from_slice(&[0.4, -1.0, 2.0, 0.3])),
            (&schw, Event::from_slice(&[0.0, 8.0, std::f64::consts::FRAC_PI_2, 0.1])),
        ];
        let charts = [
            DVector::from_vec(vec![0.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.3, -0.2, 0.9]),
            DVector::from_vec(vec![-4.0, 2.5, 1.5]),
        ];
        for (metric, x) in &cases {
            let frame = BoostFrame::at(*metric, x).unwrap();
            for w in &charts {
                let u = frame.tangent(w);
                let norm = metric.inner(x, &u, &u).unwrap();
                assert!((norm - 1.0).abs() < 1e-12, "|g(u,u)-1| = {:e}", (norm - 1.0).abs());
                assert!(u[0] > 0.0);
            }
        }
    }

    #[test]
    fn shooting_a_flat_chord_hits_exactly() {
        let m = Minkowski::new(4).unwrap();
        let f = ConstantField::zero(4);
        let x1 = Event::from_slice(&[2.0, 1.0, 0.0, 0.0]);
        let p = ConnectionProblem {
            metric: &m,
            field: &f,
            x0: Event::from_slice(&[0.0, 0.0, 0.0, 0.0]),
            x1: x1.clone(),
            kind: ProblemKind::Lorentz { ratio: 0.0 },
            opts: quick_opts(),
        };
        let frame = BoostFrame::at(&m, &p.x0).unwrap();
        let chord = frame.chord_guess(&m, &p.x0, &p.x1).unwrap();
        assert_relative_eq!(chord.scale, 3.0_f64.sqrt(), max_relative = 1e-14);

        let hit = shoot(&p, &chord).unwrap();
        assert!(hit.miss_norm < 1e-12, "miss {:e}", hit.miss_norm);

        // Stopping at unit proper time instead lands at x₁/√3.
        let short = shoot(&p, &ShootingVariables::new(chord.direction.clone(), 1.0).unwrap())
            .unwrap();
        let expect = x1.coords() / 3.0_f64.sqrt() - x1.coords();
        assert!((short.miss - expect).amax() < 1e-12);
    }

    #[test]
    fn flat_geodesic_connection() {
        let m = Minkowski::new(4).unwrap();
        let f = ConstantField::zero(4);
        let p = ConnectionProblem {
            metric: &m,
            field: &f,
            x0: Event::from_slice(&[0.0, 0.0, 0.0, 0.0]),
            x1: Event::from_slice(&[2.0, 1.0, 0.0, 0.0]),
            kind: ProblemKind::Lorentz { ratio: 0.3 },
            opts: quick_opts(),
        };
        let conn = solve_connection_lfe(&p).unwrap();
        assert!(conn.miss_norm < 1e-10);
        assert_eq!(conn.restarts, 0);
        assert_relative_eq!(conn.vars.scale, 3.0_f64.sqrt(), epsilon = 1e-10);
        assert_eq!(conn.worldline.param_kind(), ParamKind::ProperTime);
        assert_relative_eq!(
            proper_length(&m, &conn.worldline).unwrap(),
            3.0_f64.sqrt(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn manufactured_accelerated_endpoint_recovers_the_ratio() {
        // Constant field pushing a unit charge: the trajectory through
        // t(s) = sinh s, x(s) = cosh s − 1 connects the origin to the
        // manufactured endpoint at proper time 1.
        let m = Minkowski::new(2).unwrap();
        let f = ConstantField::uniform_electric(2, 1.0).unwrap();
        let p = ConnectionProblem {
            metric: &m,
            field: &f,
            x0: Event::from_slice(&[0.0, 0.0]),
            x1: Event::from_slice(&[1.0_f64.sinh(), 1.0_f64.cosh() - 1.0]),
            kind: ProblemKind::Lorentz { ratio: 1.0 },
            opts: SolverOptions::default(),
        };
        let conn = solve_connection_lfe(&p).unwrap();
        assert!(conn.miss_norm < 1e-8);
        assert_relative_eq!(conn.vars.scale, 1.0, epsilon = 1e-6);
        let report = recover_charge_to_mass(&m, &f, &conn.worldline).unwrap();
        match report.ratio {
            ChargeToMass::Real(r) => assert_relative_eq!(r, 1.0, epsilon = 1e-6),
            ChargeToMass::SymbolR => panic!("accelerated trajectory cannot be kernel"),
        }
    }

    #[test]
    fn flow_connection_reports_speed_and_induced_ratio() {
        let m = Minkowski::new(4).unwrap();
        let f = ConstantField::zero(4);
        let p = ConnectionProblem {
            metric: &m,
            field: &f,
            x0: Event::from_slice(&[0.0, 0.0, 0.0, 0.0]),
            x1: Event::from_slice(&[2.0, 1.0, 0.0, 0.0]),
            kind: ProblemKind::Flow { eps: 1.0 },
            opts: quick_opts(),
        };
        let conn = solve_connection_efe(&p).unwrap();
        assert!(conn.miss_norm < 1e-10);
        // Unit λ-span: the speed equals the proper chord length √3.
        assert_relative_eq!(conn.vars.scale, 3.0_f64.sqrt(), epsilon = 1e-9);
        let meta = conn.worldline.meta();
        assert_relative_eq!(meta.params["speed"], 3.0_f64.sqrt(), epsilon = 1e-9);
        assert_relative_eq!(
            meta.params["induced_ratio"],
            1.0 / 3.0_f64.sqrt(),
            epsilon = 1e-9
        );
        match conn.worldline.param_kind() {
            ParamKind::AffineConstantSpeed(c) => {
                assert_relative_eq!(c, 3.0_f64.sqrt(), epsilon = 1e-9)
            }
            other => panic!("expected constant-speed parametrization, got {other:?}"),
        }
    }

    #[test]
    fn flow_solution_ratio_round_trip() {
        // Manufacture a reachable endpoint by integrating the flow, then
        // reconnect and confirm the recovered ratio equals ε / C.
        let m = Minkowski::new(2).unwrap();
        let f = ConstantField::uniform_electric(2, 0.4).unwrap();
        let sys = crate::dynamics::ForceSystem::electromagnetic_flow(&m, &f, 1.0).unwrap();
        let target = integrate(
            &sys,
            &Event::from_slice(&[0.0, 0.0]),
            &DVector::from_vec(vec![1.25, 0.75]),
            (0.0, 1.0),
            33,
            &IntegratorConfig::default(),
        )
        .unwrap();
        let p = ConnectionProblem {
            metric: &m,
            field: &f,
            x0: Event::from_slice(&[0.0, 0.0]),
            x1: target.last().x.clone(),
            kind: ProblemKind::Flow { eps: 1.0 },
            opts: SolverOptions::default(),
        };
        let conn = solve_connection_efe(&p).unwrap();
        assert!(conn.miss_norm < 1e-8);
        let induced = conn.worldline.meta().params["induced_ratio"];
        let report = recover_charge_to_mass(&m, &f, &conn.worldline).unwrap();
        match report.ratio {
            ChargeToMass::Real(r) => assert_relative_eq!(r, induced, epsilon = 1e-6),
            ChargeToMass::SymbolR => panic!("accelerated trajectory cannot be kernel"),
        }
    }

    #[test]
    fn spacelike_endpoints_report_no_connection() {
        let m = Minkowski::new(2).unwrap();
        let f = ConstantField::zero(2);
        let p = ConnectionProblem {
            metric: &m,
            field: &f,
            x0: Event::from_slice(&[0.0, 0.0]),
            x1: Event::from_slice(&[0.5, 2.0]),
            kind: ProblemKind::Lorentz { ratio: 0.0 },
            opts: SolverOptions {
                max_iters: 10,
                max_restarts: 2,
                samples: 17,
                ..Default::default()
            },
        };
        match solve_connection_lfe(&p) {
            Err(Error::NoConnection { best_miss, restarts }) => {
                assert!(best_miss > 0.1);
                assert_eq!(restarts, 2);
            }
            other => panic!("expected no connection, got {other:?}"),
        }
    }

    #[test]
    fn kind_mismatch_is_a_config_error() {
        let m = Minkowski::new(2).unwrap();
        let f = ConstantField::zero(2);
        let p = ConnectionProblem {
            metric: &m,
            field: &f,
            x0: Event::from_slice(&[0.0, 0.0]),
            x1: Event::from_slice(&[2.0, 1.0]),
            kind: ProblemKind::Lorentz { ratio: 0.0 },
            opts: quick_opts(),
        };
        assert!(matches!(solve_connection_efe(&p), Err(Error::Config(_))));
        let mut q = p.clone();
        q.kind = ProblemKind::Flow { eps: 0.5 };
        assert!(matches!(solve_connection_efe(&q), Err(Error::Config(_))));
    }

    #[test]
    fn scan_finds_distinct_solutions_per_ratio() {
        let m = Minkowski::new(2).unwrap();
        let f = ConstantField::uniform_electric(2, 0.5).unwrap();
        let x0 = Event::from_slice(&[0.0, 0.0]);
        let x1 = Event::from_slice(&[2.0, 0.2]);
        let grid = [0.2, 0.4, 0.6, 0.8];
        let scan =
            scan_charge_to_mass(&m, &f, &x0, &x1, &grid, &SolverOptions::default(), 2).unwrap();
        assert_eq!(scan.converged_count(), 4);
        for entry in &scan.entries {
            assert!(entry.miss_norm < 1e-8);
            assert!(entry.proper_length.is_some());
            assert!(entry.action.is_some());
        }
        let sep = scan.min_pairwise_separation().unwrap();
        assert!(sep > 1e-4, "trajectories not distinct: separation {sep:e}");
    }

    #[test]
    fn kernel_scene_connects_identically_for_all_ratios() {
        // A purely magnetic field leaves a particle at rest alone: the
        // same rest geodesic connects t-axis events for every ratio, and
        // the ratio is unobservable on it.
        let m = Minkowski::new(4).unwrap();
        let f = ConstantField::uniform_magnetic(4, 1.0).unwrap();
        let x0 = Event::from_slice(&[0.0, 0.0, 0.0, 0.0]);
        let x1 = Event::from_slice(&[2.0, 0.0, 0.0, 0.0]);
        let grid = [-1.0, 0.0, 1.0];
        let scan =
            scan_charge_to_mass(&m, &f, &x0, &x1, &grid, &SolverOptions::default(), 1).unwrap();
        assert_eq!(scan.converged_count(), 3);
        let sep = scan.min_pairwise_separation().unwrap();
        assert!(sep < 1e-10, "kernel trajectories should coincide, separation {sep:e}");
        for entry in &scan.entries {
            let w = entry.worldline.as_ref().unwrap();
            let report = recover_charge_to_mass(&m, &f, w).unwrap();
            assert!(
                matches!(report.ratio, ChargeToMass::SymbolR),
                "ratio should be unobservable at ratio {}",
                entry.ratio
            );
        }
    }

    #[test]
    fn distance_estimate_is_exact_in_flat_space() {
        let m = Minkowski::new(4).unwrap();
        let f = ConstantField::zero(4);
        let x0 = Event::from_slice(&[0.0, 0.0, 0.0, 0.0]);
        let x1 = Event::from_slice(&[2.0, 1.0, 0.0, 0.0]);
        let est = lorentzian_distance_estimate(&m, &f, &x0, &x1, 3, &quick_opts(), 1).unwrap();
        assert_relative_eq!(est.lower_bound, 3.0_f64.sqrt(), epsilon = 1e-9);
        assert_eq!(est.witness_ratio, 0.0);
        assert_eq!(est.curves_found, 3);
        assert_relative_eq!(
            proper_length(&m, &est.witness).unwrap(),
            est.lower_bound,
            epsilon = 1e-12
        );
    }

    #[test]
    fn distance_estimate_grows_with_the_grid() {
        let m = Minkowski::new(2).unwrap();
        let f = ConstantField::uniform_electric(2, 0.5).unwrap();
        let x0 = Event::from_slice(&[0.0, 0.0]);
        let x1 = Event::from_slice(&[2.0, 0.2]);
        let small = lorentzian_distance_estimate(&m, &f, &x0, &x1, 1, &quick_opts(), 1).unwrap();
        let large = lorentzian_distance_estimate(&m, &f, &x0, &x1, 5, &quick_opts(), 2).unwrap();
        assert!(large.curves_found >= small.curves_found);
        assert!(large.lower_bound >= small.lower_bound - 1e-9);
    }
}
