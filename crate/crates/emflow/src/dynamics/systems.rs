use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{causal_character, raise_field, Event, Field, Metric, Signature};

/// A first-order system on a bundle over the chart: state `y = [x | w]`
/// where `x` is the base point and `w` the fiber vector (velocity or
/// covelocity). All five built-in systems have this shape.
pub trait DynamicalSystem: Send + Sync {
    fn metric(&self) -> &dyn Metric;

    /// Short tag used in worldline metadata and exports.
    fn name(&self) -> &str;

    /// The scalar multiplying the field term: `q/m`, `Q`, or `ε`.
    fn coupling(&self) -> f64;

    fn dim(&self) -> usize {
        self.metric().dim()
    }

    /// Derivative of the packed state `[x | w]`.
    fn rhs(&self, y: &DVector<f64>) -> Result<DVector<f64>>;

    /// The conserved norm observable: `g(v,v)` on the tangent bundle,
    /// `g⁻¹(p,p)` on the cotangent bundle.
    fn fiber_norm_sq(&self, x: &Event, w: &DVector<f64>) -> Result<f64>;

    /// Validates an initial condition against the system's preconditions.
    fn check_init(&self, x: &Event, w: &DVector<f64>) -> Result<()>;
}

pub(crate) fn pack(x: &Event, w: &DVector<f64>) -> DVector<f64> {
    let n = x.dim();
    let mut y = DVector::zeros(2 * n);
    y.rows_mut(0, n).copy_from(x.coords());
    y.rows_mut(n, n).copy_from(w);
    y
}

pub(crate) fn unpack(y: &DVector<f64>) -> (Event, DVector<f64>) {
    let n = y.len() / 2;
    let x = Event::from_fn(n, |i| y[i]);
    let w = DVector::from_fn(n, |i, _| y[n + i]);
    (x, w)
}

fn check_common(metric: &dyn Metric, field: &dyn Field) -> Result<()> {
    if metric.dim() != field.dim() {
        return Err(Error::config(format!(
            "metric '{}' has dimension {}, field '{}' has {}",
            metric.name(),
            metric.dim(),
            field.name(),
            field.dim()
        )));
    }
    Ok(())
}

/// Second-order force equation on the tangent bundle:
///
/// `dx = v`, `dv^μ = −Γ^μ_{αβ} v^α v^β + coupling · F̂^μ_ν v^ν`.
///
/// Three named problems share this right-hand side and differ only in
/// signature requirements, parameter semantics, and normalization:
/// the Lorentz force equation (proper time, `coupling = q/m`, unit
/// timelike tangent), the electromagnetic flow equation (affine parameter,
/// `coupling = Q` or `ε`, no normalization), and the magnetic flow on a
/// Riemannian space (external time, `coupling = q/m`).
pub struct ForceSystem<'a> {
    metric: &'a dyn Metric,
    field: &'a dyn Field,
    coupling: f64,
    tag: &'static str,
}

impl<'a> ForceSystem<'a> {
    /// Lorentz force equation with charge-to-mass ratio `q/m`. Initial
    /// tangents must be timelike and future-directed.
    pub fn lorentz(metric: &'a dyn Metric, field: &'a dyn Field, ratio: f64) -> Result<Self> {
        check_common(metric, field)?;
        if metric.signature() != Signature::Lorentzian {
            return Err(Error::config("the Lorentz force equation needs a Lorentzian metric"));
        }
        Ok(ForceSystem { metric, field, coupling: ratio, tag: "lfe" })
    }

    /// Electromagnetic flow equation with coefficient `Q` (pass `±1` for
    /// the normalized `ε` variant). No restriction on initial tangents.
    pub fn electromagnetic_flow(
        metric: &'a dyn Metric,
        field: &'a dyn Field,
        coupling: f64,
    ) -> Result<Self> {
        check_common(metric, field)?;
        if metric.signature() != Signature::Lorentzian {
            return Err(Error::config("the electromagnetic flow needs a Lorentzian metric"));
        }
        Ok(ForceSystem { metric, field, coupling, tag: "efe" })
    }

    /// Magnetic flow on a Riemannian space, external time parameter.
    pub fn magnetic_flow(
        metric: &'a dyn Metric,
        field: &'a dyn Field,
        ratio: f64,
    ) -> Result<Self> {
        check_common(metric, field)?;
        if metric.signature() != Signature::Riemannian {
            return Err(Error::config("the magnetic flow needs a Riemannian space metric"));
        }
        Ok(ForceSystem { metric, field, coupling: ratio, tag: "magnetic" })
    }

    /// RHS in unpacked form, for callers holding `(x, v)` rather than a
    /// packed state.
    pub fn rhs_split(&self, x: &Event, v: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let gamma = self.metric.christoffel(x)?;
        let fhat = raise_field(self.metric, self.field, x)?;
        let dv = -gamma.quadratic(v) + self.coupling * (&fhat * v);
        Ok((v.clone(), dv))
    }
}

impl DynamicalSystem for ForceSystem<'_> {
    fn metric(&self) -> &dyn Metric {
        self.metric
    }

    fn name(&self) -> &str {
        self.tag
    }

    fn coupling(&self) -> f64 {
        self.coupling
    }

    fn rhs(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let (x, v) = unpack(y);
        let (dx, dv) = self.rhs_split(&x, &v)?;
        Ok(pack(&Event::from(dx), &dv))
    }

    fn fiber_norm_sq(&self, x: &Event, w: &DVector<f64>) -> Result<f64> {
        self.metric.inner(x, w, w)
    }

    fn check_init(&self, x: &Event, w: &DVector<f64>) -> Result<()> {
        self.metric.check_event(x)?;
        if self.tag == "lfe" {
            let class = causal_character(self.metric, x, w)?;
            if !(class.is_timelike() && class.is_future()) {
                return Err(Error::Causality(format!(
                    "the Lorentz force equation needs a timelike future-directed \
                     initial tangent, got {class:?}"
                )));
            }
        } else if w.norm_squared() == 0.0 {
            return Err(Error::config("initial fiber vector must be nonzero"));
        }
        Ok(())
    }
}

/// First-order flow on the cotangent bundle:
///
/// `dx^α = g^{αβ} p_β`, `dp_μ = Γ^σ_{μβ} p_σ (dx)^β + coupling · F_{μν} (dx)^ν`.
///
/// This is simultaneously the lowered form of the electromagnetic flow
/// equation (`coupling = ε = ±1`) and the Hamiltonian flow of
/// `H = ½ g^{μν} p_μ p_ν` with respect to the twisted symplectic form
/// `Ω + coupling · π*F`: expanding `dp_μ = −∂H/∂x^μ + coupling F_{μν} dx^ν`
/// in coordinates yields exactly the Christoffel contraction above, so the
/// two named flows share one right-hand side.
pub struct CotangentSystem<'a> {
    metric: &'a dyn Metric,
    field: &'a dyn Field,
    coupling: f64,
    tag: &'static str,
}

impl<'a> CotangentSystem<'a> {
    /// Cotangent form of the normalized electromagnetic flow; `eps` must
    /// be ±1.
    pub fn electromagnetic_flow(
        metric: &'a dyn Metric,
        field: &'a dyn Field,
        eps: f64,
    ) -> Result<Self> {
        if eps.abs() != 1.0 {
            return Err(Error::config(format!("eps must be +1 or -1, got {eps}")));
        }
        Self::twisted(metric, field, eps).map(|mut s| {
            s.tag = "cotangent";
            s
        })
    }

    /// Hamiltonian flow of `H = ½ g^{μν} p_μ p_ν` for the symplectic form
    /// twisted by `coupling · π*F`.
    pub fn twisted_hamiltonian(
        metric: &'a dyn Metric,
        field: &'a dyn Field,
        coupling: f64,
    ) -> Result<Self> {
        Self::twisted(metric, field, coupling)
    }

    fn twisted(metric: &'a dyn Metric, field: &'a dyn Field, coupling: f64) -> Result<Self> {
        check_common(metric, field)?;
        if metric.signature() != Signature::Lorentzian {
            return Err(Error::config("the cotangent flow needs a Lorentzian metric"));
        }
        Ok(CotangentSystem { metric, field, coupling, tag: "twisted" })
    }

    pub fn rhs_split(&self, x: &Event, p: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let ginv = self.metric.inverse(x)?;
        let gamma = self.metric.christoffel(x)?;
        let f = self.field.two_form(x)?;
        let dx = &ginv * p;
        let dp = gamma.lower_bilinear(p, &dx) + self.coupling * (&f * &dx);
        Ok((dx, dp))
    }

    /// Hamiltonian `H = ½ g^{μν} p_μ p_ν` — conserved along the flow.
    pub fn hamiltonian(&self, x: &Event, p: &DVector<f64>) -> Result<f64> {
        Ok(0.5 * self.fiber_norm_sq(x, p)?)
    }
}

impl DynamicalSystem for CotangentSystem<'_> {
    fn metric(&self) -> &dyn Metric {
        self.metric
    }

    fn name(&self) -> &str {
        self.tag
    }

    fn coupling(&self) -> f64 {
        self.coupling
    }

    fn rhs(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let (x, p) = unpack(y);
        let (dx, dp) = self.rhs_split(&x, &p)?;
        Ok(pack(&Event::from(dx), &dp))
    }

    fn fiber_norm_sq(&self, x: &Event, w: &DVector<f64>) -> Result<f64> {
        let ginv = self.metric.inverse(x)?;
        Ok(w.dot(&(ginv * w)))
    }

    fn check_init(&self, x: &Event, w: &DVector<f64>) -> Result<()> {
        self.metric.check_event(x)?;
        if w.norm_squared() == 0.0 {
            return Err(Error::config("initial covelocity must be nonzero"));
        }
        Ok(())
    }
}

/// `dx = u`, `du^μ = −Γ^μ_{αβ} u^α u^β + (q/m) F̂^μ_ν u^ν` (proper-time
/// Lorentz force equation).
pub fn lfe_rhs(
    metric: &dyn Metric,
    field: &dyn Field,
    ratio: f64,
    x: &Event,
    u: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    ForceSystem::lorentz(metric, field, ratio)?.rhs_split(x, u)
}

/// `dx = v`, `dv^μ = −Γ^μ_{αβ} v^α v^β + coupling · F̂^μ_ν v^ν`
/// (electromagnetic flow; pass `±1` for the normalized variant or a
/// general `Q`).
pub fn efe_rhs(
    metric: &dyn Metric,
    field: &dyn Field,
    coupling: f64,
    x: &Event,
    v: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    ForceSystem::electromagnetic_flow(metric, field, coupling)?.rhs_split(x, v)
}

/// Cotangent electromagnetic flow with `eps = ±1`; see [`CotangentSystem`].
pub fn cotangent_flow_rhs(
    metric: &dyn Metric,
    field: &dyn Field,
    eps: f64,
    state: &super::CotangentState,
) -> Result<(DVector<f64>, DVector<f64>)> {
    CotangentSystem::electromagnetic_flow(metric, field, eps)?.rhs_split(&state.x, &state.p)
}

/// Twisted-Hamiltonian flow with general coupling `Q`; see
/// [`CotangentSystem`].
pub fn twisted_hamiltonian_rhs(
    metric: &dyn Metric,
    field: &dyn Field,
    coupling: f64,
    state: &super::CotangentState,
) -> Result<(DVector<f64>, DVector<f64>)> {
    CotangentSystem::twisted_hamiltonian(metric, field, coupling)?.rhs_split(&state.x, &state.p)
}

/// Magnetic flow on a Riemannian space; see [`ForceSystem::magnetic_flow`].
pub fn magnetic_flow_rhs(
    space_metric: &dyn Metric,
    field: &dyn Field,
    ratio: f64,
    x: &Event,
    v: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    ForceSystem::magnetic_flow(space_metric, field, ratio)?.rhs_split(x, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::CotangentState;
    use crate::geometry::{ConstantField, Euclidean, Minkowski, Schwarzschild};
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    #[test]
    fn lfe_rest_particle_in_zero_field_is_geodesic() {
        let m = Minkowski::new(4).unwrap();
        let f = ConstantField::zero(4);
        let x = Event::from_vec(vec![0.0; 4]);
        let u = dvector![1.0, 0.0, 0.0, 0.0];
        let (dx, du) = lfe_rhs(&m, &f, 3.7, &x, &u).unwrap();
        assert_eq!(dx, u);
        assert_eq!(du, dvector![0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn lfe_rest_particle_in_electric_field_accelerates() {
        let m = Minkowski::new(4).unwrap();
        let f = ConstantField::uniform_electric(4, 1.0).unwrap();
        let x = Event::from_vec(vec![0.0; 4]);
        let u = dvector![1.0, 0.0, 0.0, 0.0];
        let (_, du) = lfe_rhs(&m, &f, 1.0, &x, &u).unwrap();
        assert_relative_eq!(du, dvector![0.0, 1.0, 0.0, 0.0], epsilon = 1e-15);
    }

    #[test]
    fn lfe_rejects_bad_initial_tangents() {
        let m = Minkowski::new(4).unwrap();
        let f = ConstantField::zero(4);
        let sys = ForceSystem::lorentz(&m, &f, 1.0).unwrap();
        let x = Event::from_vec(vec![0.0; 4]);
        assert!(sys.check_init(&x, &dvector![0.0, 1.0, 0.0, 0.0]).is_err()); // spacelike
        assert!(sys.check_init(&x, &dvector![-1.0, 0.0, 0.0, 0.0]).is_err()); // past
        assert!(sys.check_init(&x, &dvector![1.0, 0.0, 0.0, 0.0]).is_ok());
    }

    #[test]
    fn efe_equals_lfe_term_by_term() {
        let m = Schwarzschild::new(1.0).unwrap();
        let f = ConstantField::uniform_eb(4, 0.3, 0.7).unwrap();
        let x = Event::from_vec(vec![0.1, 5.0, 1.2, 0.4]);
        let v = dvector![1.7, 0.2, -0.1, 0.05];
        let (dx_a, dv_a) = efe_rhs(&m, &f, 0.45, &x, &v).unwrap();
        let (dx_b, dv_b) = lfe_rhs(&m, &f, 0.45, &x, &v).unwrap();
        assert_eq!(dx_a, dx_b);
        assert_relative_eq!(dv_a, dv_b, epsilon = 1e-15);
    }

    #[test]
    fn efe_is_linear_in_the_field_term() {
        let m = Minkowski::new(4).unwrap();
        let f = ConstantField::uniform_electric(4, 1.0).unwrap();
        let x = Event::from_vec(vec![0.0; 4]);
        let (_, dv) = efe_rhs(&m, &f, 1.0, &x, &dvector![2.0, 0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(dv, dvector![0.0, 2.0, 0.0, 0.0], epsilon = 1e-15);
    }

    #[test]
    fn schwarzschild_radial_pull() {
        let m = Schwarzschild::new(1.0).unwrap();
        let f = ConstantField::zero(4);
        let x = Event::from_vec(vec![0.0, 4.0, std::f64::consts::FRAC_PI_2, 0.0]);
        let ut = 1.3;
        let (_, du) = lfe_rhs(&m, &f, 0.0, &x, &dvector![ut, 0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(du[1], -0.03125 * ut * ut, max_relative = 1e-14);
    }

    #[test]
    fn cotangent_flat_free_flow_raises_the_index() {
        let m = Minkowski::new(4).unwrap();
        let f = ConstantField::zero(4);
        let s = CotangentState::new(
            Event::from_vec(vec![0.0; 4]),
            dvector![1.0, 0.5, -0.25, 0.0],
        )
        .unwrap();
        let (dx, dp) = cotangent_flow_rhs(&m, &f, 1.0, &s).unwrap();
        assert_relative_eq!(dx, dvector![1.0, -0.5, 0.25, 0.0], epsilon = 1e-15);
        assert_relative_eq!(dp, dvector![0.0, 0.0, 0.0, 0.0], epsilon = 1e-15);
    }

    #[test]
    fn cotangent_and_tangent_rhs_are_consistent() {
        // Lowering the EFE must give the cotangent RHS: if p = g·v then
        // dp computed by the cotangent system equals d(g·v) computed from
        // the tangent system plus the metric's own variation along dx.
        let m = Schwarzschild::new(1.0).unwrap();
        let f = ConstantField::uniform_eb(4, 0.2, -0.5).unwrap();
        let x = Event::from_vec(vec![0.0, 6.0, 1.1, 0.3]);
        let v = dvector![1.4, 0.1, -0.02, 0.07];
        let q = 0.8;

        let g = m.components(&x).unwrap();
        let p = &g * &v;
        let state = CotangentState::new(x.clone(), p.clone()).unwrap();
        let (dx_cot, dp_cot) =
            CotangentSystem::twisted_hamiltonian(&m, &f, q).unwrap().rhs_split(&state.x, &state.p).unwrap();
        assert_relative_eq!(dx_cot, v, epsilon = 1e-12);

        let (_, dv) = efe_rhs(&m, &f, q, &x, &v).unwrap();
        // d(g·v)_mu = (∂_σ g_{μν}) v^σ v^ν + g_{μν} dv^ν, with the metric
        // derivative taken by finite differences as an independent check.
        let h = 1e-6;
        let mut dgv = DVector::zeros(4);
        for si in 0..4 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.coords_mut()[si] += h;
            xm.coords_mut()[si] -= h;
            let dg = (m.components(&xp).unwrap() - m.components(&xm).unwrap()) / (2.0 * h);
            dgv += v[si] * (&dg * &v);
        }
        let dp_expected = dgv + &g * &dv;
        assert_relative_eq!(dp_cot, dp_expected, epsilon = 1e-7);
    }

    #[test]
    fn magnetic_flow_needs_riemannian_space() {
        let lor = Minkowski::new(3).unwrap();
        let f = ConstantField::space_uniform_magnetic(3, 1.0).unwrap();
        assert!(ForceSystem::magnetic_flow(&lor, &f, 1.0).is_err());
        let eu = Euclidean::new(3).unwrap();
        assert!(ForceSystem::magnetic_flow(&eu, &f, 1.0).is_ok());
    }

    #[test]
    fn magnetic_flow_turns_the_velocity() {
        let eu = Euclidean::new(3).unwrap();
        let f = ConstantField::space_uniform_magnetic(3, 1.0).unwrap();
        let x = Event::from_vec(vec![0.0; 3]);
        let (_, dv) = magnetic_flow_rhs(&eu, &f, 1.0, &x, &dvector![1.0, 0.0, 0.0]).unwrap();
        // v = e_0 must rotate toward −e_1 for the cyclotron solution
        // v(t) = (cos t, −sin t, 0).
        assert_relative_eq!(dv, dvector![0.0, -1.0, 0.0], epsilon = 1e-15);
    }
}
