use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::Event;
use crate::tol;

/// An electromagnetic field: a closed two-form `F`, optionally presented as
/// `F = dω` with an explicit potential one-form `ω`.
///
/// Sign conventions: `(dω)_{μν} = ∂_μ ω_ν − ∂_ν ω_μ`, and a particle of
/// charge-to-mass ratio `q/m` feels the force `(q/m) F̂[u]` with
/// `F̂^μ_ν = g^{μα} F_{αν}`.
pub trait Field: Send + Sync {
    fn dim(&self) -> usize;

    fn name(&self) -> &str;

    /// Component matrix `F_{μν}(x)`; antisymmetric.
    fn two_form(&self, x: &Event) -> Result<DMatrix<f64>>;

    fn has_potential(&self) -> bool;

    /// Potential one-form `ω_ν(x)`, needed by the action functionals.
    fn potential(&self, x: &Event) -> Result<DVector<f64>>;
}

/// Uniform field with an affine potential: `ω_ν(x) = w0_ν + W_{νμ} x^μ`,
/// hence `F = Wᵀ − W` constant. Covers every built-in field.
#[derive(Clone, Debug)]
pub struct ConstantField {
    n: usize,
    label: String,
    f: DMatrix<f64>,
    w: DMatrix<f64>,
    w0: DVector<f64>,
}

impl ConstantField {
    fn from_w(n: usize, label: &str, w: DMatrix<f64>, w0: DVector<f64>) -> Self {
        let f = w.transpose() - &w;
        ConstantField { n, label: label.to_string(), f, w, w0 }
    }

    pub fn zero(n: usize) -> Self {
        Self::from_w(n, "zero", DMatrix::zeros(n, n), DVector::zeros(n))
    }

    /// Uniform electric field of strength `e` along coordinate axis 1,
    /// gauge `ω = −e x¹ dx⁰`.
    pub fn uniform_electric(n: usize, e: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::config("electric field needs dimension >= 2"));
        }
        let mut w = DMatrix::zeros(n, n);
        w[(0, 1)] = -e;
        Ok(Self::from_w(n, "uniform-electric", w, DVector::zeros(n)))
    }

    /// Uniform magnetic field of strength `b` in the (1,2) coordinate
    /// plane, gauge `ω = b x¹ dx²`. On a four-dimensional spacetime this
    /// is a magnetic field along the remaining spatial axis.
    pub fn uniform_magnetic(n: usize, b: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::config("magnetic field needs dimension >= 3"));
        }
        let mut w = DMatrix::zeros(n, n);
        w[(2, 1)] = b;
        Ok(Self::from_w(n, "uniform-magnetic", w, DVector::zeros(n)))
    }

    /// Crossed uniform fields: electric `e` along axis 1 plus magnetic `b`
    /// in the (1,2) plane.
    pub fn uniform_eb(n: usize, e: f64, b: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::config("crossed fields need dimension >= 3"));
        }
        let mut w = DMatrix::zeros(n, n);
        w[(0, 1)] = -e;
        w[(2, 1)] = b;
        Ok(Self::from_w(n, "uniform-eb", w, DVector::zeros(n)))
    }

    /// Uniform magnetic field on a Riemannian plane or 3-space: strength
    /// `b` in the (0,1) coordinate plane, gauge `ω = b x⁰ dx¹`.
    pub fn space_uniform_magnetic(n: usize, b: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::config("planar magnetic field needs dimension >= 2"));
        }
        let mut w = DMatrix::zeros(n, n);
        w[(1, 0)] = b;
        Ok(Self::from_w(n, "space-uniform-magnetic", w, DVector::zeros(n)))
    }

    /// Constant antisymmetric table `F`, in the symmetric gauge
    /// `ω_ν = −½ F_{νμ} x^μ`.
    pub fn from_table(f: DMatrix<f64>) -> Result<Self> {
        let n = f.nrows();
        if f.ncols() != n || n < 2 {
            return Err(Error::config("field table must be square with dimension >= 2"));
        }
        let asym = (&f + f.transpose()).abs().max();
        if asym > tol::TOL_NULL {
            return Err(Error::config(format!(
                "field table must be antisymmetric; max |F + Fᵀ| = {asym:.3e}"
            )));
        }
        let w = -0.5 * &f;
        Ok(Self::from_w(n, "table", w, DVector::zeros(n)))
    }

    /// Zero field with a nonzero constant potential `ω = w0` — a pure
    /// gauge term, useful for probing gauge dependence of action values.
    pub fn pure_gauge(w0: DVector<f64>) -> Result<Self> {
        let n = w0.len();
        if n < 2 {
            return Err(Error::config("gauge potential needs dimension >= 2"));
        }
        Ok(Self::from_w(n, "pure-gauge", DMatrix::zeros(n, n), w0))
    }

    pub fn two_form_matrix(&self) -> &DMatrix<f64> {
        &self.f
    }
}

impl Field for ConstantField {
    fn dim(&self) -> usize {
        self.n
    }

    fn name(&self) -> &str {
        &self.label
    }

    fn two_form(&self, x: &Event) -> Result<DMatrix<f64>> {
        check_dim(self, x)?;
        Ok(self.f.clone())
    }

    fn has_potential(&self) -> bool {
        true
    }

    fn potential(&self, x: &Event) -> Result<DVector<f64>> {
        check_dim(self, x)?;
        Ok(&self.w0 + &self.w * x.coords())
    }
}

fn check_dim<F: Field + ?Sized>(field: &F, x: &Event) -> Result<()> {
    if x.dim() != field.dim() {
        return Err(Error::config(format!(
            "event has dimension {}, field '{}' expects {}",
            x.dim(),
            field.name(),
            field.dim()
        )));
    }
    Ok(())
}

/// Reconstructs `F = dω` from the potential by central finite differences:
/// `F_{μν} = ∂_μ ω_ν − ∂_ν ω_μ`. Cross-check for fields that carry both.
pub fn two_form_fd<F: Field + ?Sized>(field: &F, x: &Event) -> Result<DMatrix<f64>> {
    if !field.has_potential() {
        return Err(Error::config(format!("field '{}' has no potential", field.name())));
    }
    let n = field.dim();
    check_dim(field, x)?;

    // dw[μ] = ∂_μ ω_·
    let mut dw = Vec::with_capacity(n);
    for mu in 0..n {
        let h = tol::FD_STEP_REL * (1.0 + x.coords()[mu].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp.coords_mut()[mu] += h;
        xm.coords_mut()[mu] -= h;
        dw.push((field.potential(&xp)? - field.potential(&xm)?) / (2.0 * h));
    }

    let mut f = DMatrix::zeros(n, n);
    for mu in 0..n {
        for nu in 0..n {
            f[(mu, nu)] = dw[mu][nu] - dw[nu][mu];
        }
    }
    Ok(f)
}

/// Worst violation of the closedness condition `dF = 0` at `x`, measured
/// by central finite differences of the two-form components:
/// `max |∂_α F_{μν} + ∂_μ F_{να} + ∂_ν F_{αμ}|` over index triples.
pub fn closedness_violation_fd<F: Field + ?Sized>(field: &F, x: &Event) -> Result<f64> {
    let n = field.dim();
    check_dim(field, x)?;

    // df[α] = ∂_α F
    let mut df = Vec::with_capacity(n);
    for alpha in 0..n {
        let h = tol::FD_STEP_REL * (1.0 + x.coords()[alpha].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp.coords_mut()[alpha] += h;
        xm.coords_mut()[alpha] -= h;
        df.push((field.two_form(&xp)? - field.two_form(&xm)?) / (2.0 * h));
    }

    let mut worst: f64 = 0.0;
    for alpha in 0..n {
        for mu in alpha + 1..n {
            for nu in mu + 1..n {
                let cyclic =
                    df[alpha][(mu, nu)] + df[mu][(nu, alpha)] + df[nu][(alpha, mu)];
                worst = worst.max(cyclic.abs());
            }
        }
    }
    Ok(worst)
}
