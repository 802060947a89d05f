use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::Event;
use crate::tol;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Signature {
    /// `(+,−,…,−)`: coordinate 0 is time.
    Lorentzian,
    /// Positive definite; used for magnetic flows on space.
    Riemannian,
}

/// Christoffel symbols `Γ^μ_{αβ}` at a point, stored dense.
///
/// Symmetric in the lower pair, but stored in full so indexing stays dumb.
#[derive(Clone, Debug)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(n: usize) -> Self {
        Christoffel { n, data: vec![0.0; n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, mu: usize, al: usize, be: usize) -> f64 {
        self.data[(mu * self.n + al) * self.n + be]
    }

    #[inline]
    pub fn set(&mut self, mu: usize, al: usize, be: usize, value: f64) {
        self.data[(mu * self.n + al) * self.n + be] = value;
    }

    /// Sets both `Γ^μ_{αβ}` and `Γ^μ_{βα}`.
    pub fn set_sym(&mut self, mu: usize, al: usize, be: usize, value: f64) {
        self.set(mu, al, be, value);
        self.set(mu, be, al, value);
    }

    /// `out^μ = Γ^μ_{αβ} u^α v^β`.
    pub fn bilinear(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut out = DVector::zeros(n);
        for mu in 0..n {
            let mut acc = 0.0;
            for al in 0..n {
                let ua = u[al];
                if ua == 0.0 {
                    continue;
                }
                for be in 0..n {
                    acc += self.get(mu, al, be) * ua * v[be];
                }
            }
            out[mu] = acc;
        }
        out
    }

    /// `out^μ = Γ^μ_{αβ} v^α v^β` — the geodesic quadratic form.
    pub fn quadratic(&self, v: &DVector<f64>) -> DVector<f64> {
        self.bilinear(v, v)
    }

    /// `out_μ = Γ^σ_{μβ} p_σ v^β` — the contraction that feeds the
    /// covelocity equation of the cotangent flow.
    pub fn lower_bilinear(&self, p: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut out = DVector::zeros(n);
        for mu in 0..n {
            let mut acc = 0.0;
            for si in 0..n {
                let ps = p[si];
                if ps == 0.0 {
                    continue;
                }
                for be in 0..n {
                    acc += self.get(si, mu, be) * ps * v[be];
                }
            }
            out[mu] = acc;
        }
        out
    }

    /// Largest absolute asymmetry `|Γ^μ_{αβ} − Γ^μ_{βα}|`.
    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for mu in 0..n {
            for al in 0..n {
                for be in 0..al {
                    worst = worst.max((self.get(mu, al, be) - self.get(mu, be, al)).abs());
                }
            }
        }
        worst
    }
}

/// A semi-Riemannian metric presented in a single coordinate chart.
pub trait Metric: Send + Sync {
    fn dim(&self) -> usize;

    fn signature(&self) -> Signature;

    fn name(&self) -> &str;

    /// Whether the event lies strictly inside the chart's validity domain.
    fn contains(&self, x: &Event) -> bool;

    /// Component matrix `g_{μν}(x)`.
    fn components(&self, x: &Event) -> Result<DMatrix<f64>>;

    /// Inverse component matrix `g^{μν}(x)`.
    fn inverse(&self, x: &Event) -> Result<DMatrix<f64>> {
        let g = self.components(x)?;
        g.clone().try_inverse().ok_or_else(|| {
            Error::Singular(format!("metric '{}' not invertible at {:?}", self.name(), x))
        })
    }

    /// Christoffel symbols of the Levi-Civita connection at `x`.
    ///
    /// Metrics with closed-form symbols implement them directly; a metric
    /// known only through its component matrix should delegate to
    /// [`christoffel_fd`], which differentiates the components with central
    /// finite differences.
    fn christoffel(&self, x: &Event) -> Result<Christoffel>;

    /// Pairing `g(u, v)` at `x`.
    fn inner(&self, x: &Event, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        let g = self.components(x)?;
        Ok(u.dot(&(g * v)))
    }

    /// Draws an event well inside the chart domain, for randomized tests
    /// and solver restarts.
    fn sample_domain_event(&self, rng: &mut dyn rand::RngCore) -> Event;

    fn check_event(&self, x: &Event) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::config(format!(
                "event has dimension {}, metric '{}' expects {}",
                x.dim(),
                self.name(),
                self.dim()
            )));
        }
        if !self.contains(x) {
            return Err(Error::chart(format!(
                "{:?} not in the domain of metric '{}'",
                x.coords().as_slice(),
                self.name()
            )));
        }
        Ok(())
    }
}

/// Christoffel symbols from central finite differences of the metric
/// components:
/// `Γ^μ_{αβ} = ½ g^{μσ} (∂_α g_{σβ} + ∂_β g_{σα} − ∂_σ g_{αβ})`.
///
/// This is the generic fallback for metrics without closed-form symbols,
/// and the independent cross-check for those with them.
pub fn christoffel_fd<M: Metric + ?Sized>(metric: &M, x: &Event) -> Result<Christoffel> {
    metric.check_event(x)?;
    let n = metric.dim();
    let ginv = metric.inverse(x)?;

    // dg[σ] = ∂_σ g_{··}
    let mut dg = Vec::with_capacity(n);
    for si in 0..n {
        let h = tol::FD_STEP_REL * (1.0 + x.coords()[si].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp.coords_mut()[si] += h;
        xm.coords_mut()[si] -= h;
        let gp = metric.components(&xp)?;
        let gm = metric.components(&xm)?;
        dg.push((gp - gm) / (2.0 * h));
    }

    let mut gamma = Christoffel::zeros(n);
    for mu in 0..n {
        for al in 0..n {
            for be in 0..=al {
                let mut acc = 0.0;
                for si in 0..n {
                    acc += ginv[(mu, si)]
                        * (dg[al][(si, be)] + dg[be][(si, al)] - dg[si][(al, be)]);
                }
                gamma.set_sym(mu, al, be, 0.5 * acc);
            }
        }
    }
    Ok(gamma)
}

/// Flat spacetime, signature `(+,−,…,−)`, in an inertial chart.
#[derive(Clone, Debug)]
pub struct Minkowski {
    n: usize,
}

impl Minkowski {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::config("Minkowski needs dimension >= 2"));
        }
        Ok(Minkowski { n })
    }
}

impl Metric for Minkowski {
    fn dim(&self) -> usize {
        self.n
    }

    fn signature(&self) -> Signature {
        Signature::Lorentzian
    }

    fn name(&self) -> &str {
        "minkowski"
    }

    fn contains(&self, x: &Event) -> bool {
        x.dim() == self.n
    }

    fn components(&self, x: &Event) -> Result<DMatrix<f64>> {
        self.check_event(x)?;
        let mut g = DMatrix::zeros(self.n, self.n);
        g[(0, 0)] = 1.0;
        for i in 1..self.n {
            g[(i, i)] = -1.0;
        }
        Ok(g)
    }

    fn inverse(&self, x: &Event) -> Result<DMatrix<f64>> {
        self.components(x)
    }

    fn christoffel(&self, x: &Event) -> Result<Christoffel> {
        self.check_event(x)?;
        Ok(Christoffel::zeros(self.n))
    }

    fn sample_domain_event(&self, rng: &mut dyn rand::RngCore) -> Event {
        Event::from_fn(self.n, |_| rng.random_range(-2.0..2.0))
    }
}

/// Flat space, positive definite, in Cartesian coordinates. Carrier for
/// magnetic flows on a Riemannian base.
#[derive(Clone, Debug)]
pub struct Euclidean {
    n: usize,
}

impl Euclidean {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::config("Euclidean needs dimension >= 2"));
        }
        Ok(Euclidean { n })
    }
}

impl Metric for Euclidean {
    fn dim(&self) -> usize {
        self.n
    }

    fn signature(&self) -> Signature {
        Signature::Riemannian
    }

    fn name(&self) -> &str {
        "euclidean"
    }

    fn contains(&self, x: &Event) -> bool {
        x.dim() == self.n
    }

    fn components(&self, x: &Event) -> Result<DMatrix<f64>> {
        self.check_event(x)?;
        Ok(DMatrix::identity(self.n, self.n))
    }

    fn inverse(&self, x: &Event) -> Result<DMatrix<f64>> {
        self.components(x)
    }

    fn christoffel(&self, x: &Event) -> Result<Christoffel> {
        self.check_event(x)?;
        Ok(Christoffel::zeros(self.n))
    }

    fn sample_domain_event(&self, rng: &mut dyn rand::RngCore) -> Event {
        Event::from_fn(self.n, |_| rng.random_range(-2.0..2.0))
    }
}

/// Exterior static black-hole chart in coordinates `(t, r, θ, φ)` with
/// `f(r) = 1 − 2M/r`:
///
/// `g = f dt² − f⁻¹ dr² − r² dθ² − r² sin²θ dφ²`.
///
/// Valid strictly outside the horizon, away from the polar axis.
#[derive(Clone, Debug)]
pub struct Schwarzschild {
    mass: f64,
}

impl Schwarzschild {
    pub fn new(mass: f64) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::config(format!("mass must be positive and finite, got {mass}")));
        }
        Ok(Schwarzschild { mass })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    fn f(&self, r: f64) -> f64 {
        1.0 - 2.0 * self.mass / r
    }
}

impl Metric for Schwarzschild {
    fn dim(&self) -> usize {
        4
    }

    fn signature(&self) -> Signature {
        Signature::Lorentzian
    }

    fn name(&self) -> &str {
        "schwarzschild"
    }

    fn contains(&self, x: &Event) -> bool {
        if x.dim() != 4 {
            return false;
        }
        let r = x.coords()[1];
        let th = x.coords()[2];
        r > 2.0 * self.mass && th > 0.0 && th < std::f64::consts::PI
    }

    fn components(&self, x: &Event) -> Result<DMatrix<f64>> {
        self.check_event(x)?;
        let (r, th) = (x.coords()[1], x.coords()[2]);
        let f = self.f(r);
        let mut g = DMatrix::zeros(4, 4);
        g[(0, 0)] = f;
        g[(1, 1)] = -1.0 / f;
        g[(2, 2)] = -r * r;
        g[(3, 3)] = -r * r * th.sin().powi(2);
        Ok(g)
    }

    fn inverse(&self, x: &Event) -> Result<DMatrix<f64>> {
        let mut g = self.components(x)?;
        for i in 0..4 {
            g[(i, i)] = 1.0 / g[(i, i)];
        }
        Ok(g)
    }

    fn christoffel(&self, x: &Event) -> Result<Christoffel> {
        self.check_event(x)?;
        let m = self.mass;
        let (r, th) = (x.coords()[1], x.coords()[2]);
        let f = self.f(r);
        let (sin, cos) = (th.sin(), th.cos());

        let mut ga = Christoffel::zeros(4);
        ga.set_sym(0, 0, 1, m / (r * r * f));
        ga.set(1, 0, 0, m * f / (r * r));
        ga.set(1, 1, 1, -m / (r * r * f));
        ga.set(1, 2, 2, -r * f);
        ga.set(1, 3, 3, -r * f * sin * sin);
        ga.set_sym(2, 1, 2, 1.0 / r);
        ga.set(2, 3, 3, -sin * cos);
        ga.set_sym(3, 1, 3, 1.0 / r);
        ga.set_sym(3, 2, 3, cos / sin);
        Ok(ga)
    }

    fn sample_domain_event(&self, rng: &mut dyn rand::RngCore) -> Event {
        let m = self.mass;
        let pi = std::f64::consts::PI;
        Event::from_vec(vec![
            rng.random_range(-2.0..2.0) * m,
            m * rng.random_range(5.0..12.0),
            rng.random_range(0.25 * pi..0.75 * pi),
            rng.random_range(0.0..2.0 * pi),
        ])
    }
}
