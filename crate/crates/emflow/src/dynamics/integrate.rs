use nalgebra::DVector;

use crate::dynamics::systems::{pack, unpack};
use crate::dynamics::{DynamicalSystem, ParamKind, Sample, Worldline, WorldlineMeta};
use crate::error::{Error, Result};
use crate::geometry::Event;
use crate::tol;

#[derive(Clone, Copy, Debug)]
pub enum Method {
    /// Dormand–Prince 5(4) embedded pair with adaptive step control.
    Rk45 { abs_tol: f64, rel_tol: f64 },
    /// Classical fixed-step fourth-order Runge–Kutta, for
    /// conservation-order studies.
    Rk4 { step: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct IntegratorConfig {
    pub method: Method,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Rk45 { abs_tol: tol::ODE_ABS_TOL, rel_tol: tol::ODE_REL_TOL },
            max_steps: tol::ODE_MAX_STEPS,
        }
    }
}

impl IntegratorConfig {
    pub fn rk45(abs_tol: f64, rel_tol: f64) -> Self {
        IntegratorConfig { method: Method::Rk45 { abs_tol, rel_tol }, ..Default::default() }
    }

    pub fn rk4(step: f64) -> Self {
        IntegratorConfig { method: Method::Rk4 { step }, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            Method::Rk45 { abs_tol, rel_tol } => {
                if !(abs_tol > 0.0) || !(rel_tol > 0.0) {
                    return Err(Error::config("integrator tolerances must be positive"));
                }
            }
            Method::Rk4 { step } => {
                if !(step > 0.0) {
                    return Err(Error::config("fixed step must be positive"));
                }
            }
        }
        if self.max_steps == 0 {
            return Err(Error::config("max_steps must be at least 1"));
        }
        Ok(())
    }
}

/// Integrates one of the dynamical systems over `[λ₀, λ₁]`, sampling the
/// solution on a uniform grid of `samples` points (endpoints included).
///
/// The parametrization kind is inferred from the initial fiber norm: proper
/// time for unit timelike Lorentz-force data, affine constant speed
/// `C = √g(v₀,v₀)` otherwise when positive, generic for null or spacelike
/// data. The max drift of the (conserved) fiber norm across output samples
/// is recorded in the metadata; cotangent systems also record the
/// Hamiltonian drift, which is half of it.
pub fn integrate(
    sys: &dyn DynamicalSystem,
    x0: &Event,
    w0: &DVector<f64>,
    range: (f64, f64),
    samples: usize,
    cfg: &IntegratorConfig,
) -> Result<Worldline> {
    cfg.validate()?;
    if !(range.1 > range.0) {
        return Err(Error::config(format!(
            "parameter range must be increasing, got [{}, {}]",
            range.0, range.1
        )));
    }
    if samples < 2 {
        return Err(Error::config("need at least 2 output samples"));
    }
    sys.check_init(x0, w0)?;

    let q0 = sys.fiber_norm_sq(x0, w0)?;
    let mut run = Run {
        sys,
        q0,
        span: range.1 - range.0,
        grid: uniform_grid(range, samples),
        recorded: vec![Sample { lambda: range.0, x: x0.clone(), v: w0.clone() }],
        drift: 0.0,
        lambda: range.0,
        y: pack(x0, w0),
        steps: 0,
        max_steps: cfg.max_steps,
    };

    match cfg.method {
        Method::Rk45 { abs_tol, rel_tol } => run.adaptive(abs_tol, rel_tol)?,
        Method::Rk4 { step } => run.fixed(step)?,
    }

    let param = infer_param_kind(sys, q0, w0);
    let mut meta =
        WorldlineMeta::new(sys.name()).with_param("coupling", sys.coupling());
    meta.norm_drift = run.drift;
    if sys.name() == "cotangent" || sys.name() == "twisted" {
        meta.params.insert("h_drift".to_string(), 0.5 * run.drift);
    }
    Worldline::from_samples(run.recorded, param, meta)
}

fn uniform_grid(range: (f64, f64), samples: usize) -> Vec<f64> {
    let gap = (range.1 - range.0) / (samples - 1) as f64;
    (0..samples)
        .map(|j| if j == samples - 1 { range.1 } else { range.0 + j as f64 * gap })
        .collect()
}

fn infer_param_kind(sys: &dyn DynamicalSystem, q0: f64, w0: &DVector<f64>) -> ParamKind {
    let scale = w0.norm_squared();
    if q0 > tol::TOL_NULL * scale {
        let c = q0.sqrt();
        if sys.name() == "lfe" && (c - 1.0).abs() <= tol::TOL_NULL {
            ParamKind::ProperTime
        } else {
            ParamKind::AffineConstantSpeed(c)
        }
    } else {
        ParamKind::Generic
    }
}

struct Run<'a> {
    sys: &'a dyn DynamicalSystem,
    q0: f64,
    span: f64,
    grid: Vec<f64>,
    recorded: Vec<Sample>,
    drift: f64,
    lambda: f64,
    y: DVector<f64>,
    steps: usize,
    max_steps: usize,
}

impl Run<'_> {
    fn fail(&mut self, reason: String) -> Error {
        let partial = if self.recorded.len() >= 2 {
            let mut meta = WorldlineMeta::new(self.sys.name())
                .with_param("coupling", self.sys.coupling());
            meta.norm_drift = self.drift;
            Worldline::from_samples(std::mem::take(&mut self.recorded), ParamKind::Generic, meta)
                .ok()
                .map(Box::new)
        } else {
            None
        };
        Error::Integration { reason, lambda: self.lambda, partial }
    }

    /// Records the current state as the sample for grid index `j`.
    fn record(&mut self) -> Result<()> {
        let (x, w) = unpack(&self.y);
        let q = self
            .sys
            .fiber_norm_sq(&x, &w)
            .map_err(|e| self.fail(format!("norm evaluation failed: {e}")))?;
        self.drift = self.drift.max((q - self.q0).abs());
        self.recorded.push(Sample { lambda: self.lambda, x, v: w });
        Ok(())
    }

    fn budget(&mut self) -> Result<()> {
        if self.steps >= self.max_steps {
            return Err(self.fail(format!("step budget of {} exhausted", self.max_steps)));
        }
        self.steps += 1;
        Ok(())
    }

    fn adaptive(&mut self, abs_tol: f64, rel_tol: f64) -> Result<()> {
        let h_floor = 1e-14 * (self.span + self.grid[0].abs() + self.grid.last().unwrap().abs());
        let mut h = self.span / (self.grid.len() - 1) as f64 / 8.0;
        let mut k1: Option<DVector<f64>> = None;
        let mut j = 1usize;

        while j < self.grid.len() {
            self.budget()?;
            let target = self.grid[j];
            let hitting = self.lambda + h >= target - 1e-12 * self.span;
            let h_step = if hitting { target - self.lambda } else { h };

            let k1_val = match k1.take() {
                Some(k) => k,
                None => self
                    .sys
                    .rhs(&self.y)
                    .map_err(|e| self.fail(format!("right-hand side failed: {e}")))?,
            };

            match dopri5_step(self.sys, &self.y, &k1_val, h_step, abs_tol, rel_tol) {
                Err(e) => {
                    // Usually a trial stage left the chart; retry smaller.
                    if h_step * 0.5 > h_floor {
                        h = h_step * 0.5;
                        k1 = Some(k1_val);
                    } else {
                        return Err(self.fail(format!("step size underflow: {e}")));
                    }
                }
                Ok((y5, k7, err)) => {
                    let factor = tol::STEP_SAFETY * err.max(1e-30).powf(-0.2);
                    if err <= 1.0 {
                        self.y = y5;
                        self.lambda = if hitting { target } else { self.lambda + h_step };
                        k1 = Some(k7);
                        if hitting {
                            self.record()?;
                            j += 1;
                        }
                        h = h_step * factor.clamp(tol::STEP_SHRINK_MIN, tol::STEP_GROW_MAX);
                    } else {
                        h = h_step * factor.clamp(tol::STEP_SHRINK_MIN, 1.0);
                        k1 = Some(k1_val);
                        if h < h_floor {
                            return Err(
                                self.fail("step size underflow under error control".to_string())
                            );
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn fixed(&mut self, step: f64) -> Result<()> {
        let mut j = 1usize;
        while j < self.grid.len() {
            self.budget()?;
            let target = self.grid[j];
            let h_step = step.min(target - self.lambda);
            let hitting = self.lambda + h_step >= target - 1e-12 * self.span;
            let ynew = rk4_step(self.sys, &self.y, h_step)
                .map_err(|e| self.fail(format!("right-hand side failed: {e}")))?;
            self.y = ynew;
            self.lambda = if hitting { target } else { self.lambda + h_step };
            if hitting {
                self.record()?;
                j += 1;
            }
        }
        Ok(())
    }
}

// Dormand–Prince 5(4) tableau.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B5: [f64; 6] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One trial step of size `h` from `y` with first stage `k1` already
/// evaluated (FSAL). Returns the fifth-order solution, the derivative at
/// it (the next step's first stage), and the scaled RMS error norm with
/// per-component scale `abs_tol + rel_tol·max(|y|, |y₅|)`.
fn dopri5_step(
    sys: &dyn DynamicalSystem,
    y: &DVector<f64>,
    k1: &DVector<f64>,
    h: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(DVector<f64>, DVector<f64>, f64)> {
    let k2 = sys.rhs(&(y + h * (A2[0] * k1)))?;
    let k3 = sys.rhs(&(y + h * (A3[0] * k1 + A3[1] * &k2)))?;
    let k4 = sys.rhs(&(y + h * (A4[0] * k1 + A4[1] * &k2 + A4[2] * &k3)))?;
    let k5 = sys.rhs(&(y + h * (A5[0] * k1 + A5[1] * &k2 + A5[2] * &k3 + A5[3] * &k4)))?;
    let k6 = sys
        .rhs(&(y + h * (A6[0] * k1 + A6[1] * &k2 + A6[2] * &k3 + A6[3] * &k4 + A6[4] * &k5)))?;
    let y5 = y + h
        * (B5[0] * k1 + B5[1] * &k2 + B5[2] * &k3 + B5[3] * &k4 + B5[4] * &k5 + B5[5] * &k6);
    let k7 = sys.rhs(&y5)?;
    let y4 = y + h
        * (B4[0] * k1
            + B4[1] * &k2
            + B4[2] * &k3
            + B4[3] * &k4
            + B4[4] * &k5
            + B4[5] * &k6
            + B4[6] * &k7);

    let mut acc = 0.0;
    for i in 0..y.len() {
        let sc = abs_tol + rel_tol * y[i].abs().max(y5[i].abs());
        let e = (y5[i] - y4[i]) / sc;
        acc += e * e;
    }
    let err = (acc / y.len() as f64).sqrt();
    Ok((y5, k7, err))
}

fn rk4_step(sys: &dyn DynamicalSystem, y: &DVector<f64>, h: f64) -> Result<DVector<f64>> {
    let k1 = sys.rhs(y)?;
    let k2 = sys.rhs(&(y + (0.5 * h) * &k1))?;
    let k3 = sys.rhs(&(y + (0.5 * h) * &k2))?;
    let k4 = sys.rhs(&(y + h * &k3))?;
    Ok(y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}
