//! Declarative scene configuration.
//!
//! A scene is a TOML document naming a metric, a field, endpoints and run
//! parameters. Building it instantiates the registered models; validating
//! it runs the model invariant suite (metric symmetry and inverse,
//! connection coefficients against finite differences, field antisymmetry,
//! closedness `dF = 0`, and `F = dω` when a potential is claimed) at
//! sampled domain events, so malformed scenes are refused before any run.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{
    christoffel_fd, closedness_violation_fd, two_form_fd, ConstantField, Euclidean, Event, Field,
    Metric, Minkowski, Schwarzschild,
};
use crate::tol;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub scene: SceneSection,
    pub metric: MetricSection,
    pub field: FieldSection,
    pub events: EventsSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    pub dimension: usize,
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSection {
    /// One of `minkowski`, `euclidean`, `schwarzschild`.
    pub name: String,
    #[serde(default)]
    pub mass: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    /// One of `zero`, `electric`, `magnetic`, `eb`, `space-magnetic`,
    /// `table`, `pure-gauge`.
    pub name: String,
    #[serde(default)]
    pub e: Option<f64>,
    #[serde(default)]
    pub b: Option<f64>,
    /// Component rows of `F_{μν}` for the `table` field.
    #[serde(default)]
    pub f: Option<Vec<Vec<f64>>>,
    /// Constant potential entries for the `pure-gauge` field.
    #[serde(default)]
    pub omega0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventsSection {
    pub x0: Vec<f64>,
    #[serde(default)]
    pub x1: Option<Vec<f64>>,
    /// Initial velocity (or covelocity) for initial value runs.
    #[serde(default)]
    pub v0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Parameter interval for initial value runs.
    pub span: [f64; 2],
    /// Output samples per trajectory.
    pub samples: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Endpoint miss tolerance for connection solves.
    pub bvp_tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
    /// Polyline nodes for variational runs.
    pub nodes: usize,
    /// Stationarity threshold for variational runs.
    pub g_tol: f64,
    /// Worker threads for scans; 0 means available parallelism.
    pub workers: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            span: [0.0, 1.0],
            samples: 201,
            abs_tol: tol::ODE_ABS_TOL,
            rel_tol: tol::ODE_REL_TOL,
            bvp_tol: tol::BVP_TOL_FLAT,
            max_restarts: tol::BVP_MAX_RESTARTS,
            seed: 7,
            nodes: tol::DEFAULT_NODES,
            g_tol: tol::DEFAULT_G_TOL,
            workers: 0,
        }
    }
}

/// A built scene: instantiated models plus the resolved run parameters.
pub struct Scene {
    pub metric: Box<dyn Metric>,
    pub field: Box<dyn Field>,
    pub x0: Event,
    pub x1: Option<Event>,
    pub v0: Option<DVector<f64>>,
    pub run: RunSection,
}

impl SceneConfig {
    pub fn from_toml_str(text: &str) -> Result<SceneConfig> {
        toml::from_str(text).map_err(|e| Error::config(format!("scene parse error: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<SceneConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Instantiates the configured models, checking dimensions and
    /// registry names. Model invariants are checked by [`Scene::validate`].
    pub fn build(&self) -> Result<Scene> {
        let n = self.scene.dimension;
        let metric: Box<dyn Metric> = match self.metric.name.as_str() {
            "minkowski" => Box::new(Minkowski::new(n)?),
            "euclidean" => Box::new(Euclidean::new(n)?),
            "schwarzschild" => {
                if n != 4 {
                    return Err(Error::config(format!(
                        "the schwarzschild chart is 4-dimensional, scene says {n}"
                    )));
                }
                let mass = self.metric.mass.ok_or_else(|| {
                    Error::config("the schwarzschild metric needs a `mass` entry")
                })?;
                Box::new(Schwarzschild::new(mass)?)
            }
            other => {
                return Err(Error::config(format!(
                    "unknown metric '{other}' (expected minkowski, euclidean, or schwarzschild)"
                )))
            }
        };

        let need = |opt: Option<f64>, what: &str| {
            opt.ok_or_else(|| {
                Error::config(format!("field '{}' needs a `{what}` entry", self.field.name))
            })
        };
        let field: Box<dyn Field> = match self.field.name.as_str() {
            "zero" => Box::new(ConstantField::zero(n)),
            "electric" => Box::new(ConstantField::uniform_electric(n, need(self.field.e, "e")?)?),
            "magnetic" => Box::new(ConstantField::uniform_magnetic(n, need(self.field.b, "b")?)?),
            "eb" => Box::new(ConstantField::uniform_eb(
                n,
                need(self.field.e, "e")?,
                need(self.field.b, "b")?,
            )?),
            "space-magnetic" => Box::new(ConstantField::space_uniform_magnetic(
                n,
                need(self.field.b, "b")?,
            )?),
            "table" => {
                let rows = self.field.f.as_ref().ok_or_else(|| {
                    Error::config("field 'table' needs an `f` matrix of component rows")
                })?;
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::config(format!(
                        "field table must be {n}x{n} for this scene"
                    )));
                }
                let mut f = DMatrix::zeros(n, n);
                for (i, row) in rows.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        f[(i, j)] = *v;
                    }
                }
                Box::new(ConstantField::from_table(f)?)
            }
            "pure-gauge" => {
                let w0 = self.field.omega0.as_ref().ok_or_else(|| {
                    Error::config("field 'pure-gauge' needs an `omega0` vector")
                })?;
                if w0.len() != n {
                    return Err(Error::config(format!(
                        "omega0 must have {n} entries for this scene"
                    )));
                }
                Box::new(ConstantField::pure_gauge(DVector::from_vec(w0.clone()))?)
            }
            other => {
                return Err(Error::config(format!(
                    "unknown field '{other}' (expected zero, electric, magnetic, eb, \
                     space-magnetic, table, or pure-gauge)"
                )))
            }
        };

        let vector = |v: &Vec<f64>, what: &str| -> Result<DVector<f64>> {
            if v.len() != n {
                return Err(Error::config(format!(
                    "{what} must have {n} entries for this scene, got {}",
                    v.len()
                )));
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::config(format!("{what} has non-finite entries")));
            }
            Ok(DVector::from_vec(v.clone()))
        };
        let x0 = Event::from(vector(&self.events.x0, "x0")?);
        let x1 = match &self.events.x1 {
            Some(v) => Some(Event::from(vector(v, "x1")?)),
            None => None,
        };
        let v0 = match &self.events.v0 {
            Some(v) => Some(vector(v, "v0")?),
            None => None,
        };

        let run = self.run.clone();
        if run.samples < 2 {
            return Err(Error::config("run.samples must be at least 2"));
        }
        if !(run.span[1] > run.span[0]) {
            return Err(Error::config("run.span must be increasing"));
        }
        if run.nodes < 2 {
            return Err(Error::config("run.nodes must be at least 2"));
        }

        let scene = Scene { metric, field, x0, x1, v0, run };
        scene.metric.check_event(&scene.x0)?;
        if let Some(x1) = &scene.x1 {
            scene.metric.check_event(x1)?;
        }
        Ok(scene)
    }
}

/// One named invariant check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst violation observed (compared against `threshold`).
    pub worst: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
    /// Domain events the checks were sampled at.
    pub sample_count: usize,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl Scene {
    /// Runs the model invariant suite at `samples` events drawn from the
    /// metric's chart domain (seeded by the run seed, so reports are
    /// reproducible).
    pub fn validate(&self, samples: usize) -> Result<ValidationReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.run.seed);
        let mut events = vec![self.x0.clone()];
        if let Some(x1) = &self.x1 {
            events.push(x1.clone());
        }
        for _ in 0..samples {
            events.push(self.metric.sample_domain_event(&mut rng));
        }

        let mut sym: f64 = 0.0;
        let mut inv: f64 = 0.0;
        let mut gamma_sym: f64 = 0.0;
        let mut gamma_fd: f64 = 0.0;
        let mut antisym: f64 = 0.0;
        let mut closed: f64 = 0.0;
        let mut potential: f64 = 0.0;
        for x in &events {
            let g = self.metric.components(x)?;
            sym = sym.max((&g - g.transpose()).amax());
            let ginv = self.metric.inverse(x)?;
            let n = g.nrows();
            inv = inv.max((&g * &ginv - DMatrix::<f64>::identity(n, n)).amax());

            let gamma = self.metric.christoffel(x)?;
            gamma_sym = gamma_sym.max(gamma.max_asymmetry());
            let fd = christoffel_fd(self.metric.as_ref(), x)?;
            let mut worst = 0.0_f64;
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        let d = (gamma.get(a, b, c) - fd.get(a, b, c)).abs();
                        worst = worst.max(d / (1.0 + gamma.get(a, b, c).abs()));
                    }
                }
            }
            gamma_fd = gamma_fd.max(worst);

            let f = self.field.two_form(x)?;
            antisym = antisym.max((&f + f.transpose()).amax());
            closed = closed.max(closedness_violation_fd(self.field.as_ref(), x)?);
            if self.field.has_potential() {
                let from_potential = two_form_fd(self.field.as_ref(), x)?;
                potential = potential.max((&f - from_potential).amax());
            }
        }

        let checks = vec![
            CheckOutcome {
                name: "metric symmetry",
                passed: sym < 1e-12,
                worst: sym,
                threshold: 1e-12,
            },
            CheckOutcome {
                name: "metric inverse",
                passed: inv < tol::INVERSE_TOL,
                worst: inv,
                threshold: tol::INVERSE_TOL,
            },
            CheckOutcome {
                name: "connection symmetry",
                passed: gamma_sym < 1e-10,
                worst: gamma_sym,
                threshold: 1e-10,
            },
            CheckOutcome {
                name: "connection vs finite differences",
                passed: gamma_fd < tol::DERIV_TOL,
                worst: gamma_fd,
                threshold: tol::DERIV_TOL,
            },
            CheckOutcome {
                name: "field antisymmetry",
                passed: antisym < 1e-12,
                worst: antisym,
                threshold: 1e-12,
            },
            CheckOutcome {
                name: "field closedness (dF = 0)",
                passed: closed < tol::DERIV_TOL,
                worst: closed,
                threshold: tol::DERIV_TOL,
            },
            CheckOutcome {
                name: "potential consistency (F = dω)",
                passed: potential < tol::DERIV_TOL,
                worst: potential,
                threshold: tol::DERIV_TOL,
            },
        ];
        Ok(ValidationReport { checks, sample_count: events.len() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENE: &str = r#"
[scene]
dimension = 2
name = "constant electric"

[metric]
name = "minkowski"

[field]
name = "electric"
e = 0.25

[events]
x0 = [0.0, 0.0]
x1 = [2.0, 0.8]
v0 = [1.25, 0.75]

[run]
samples = 101
seed = 42
"#;

    #[test]
    fn builds_and_validates_a_scene() {
        let config = SceneConfig::from_toml_str(SCENE).unwrap();
        let scene = config.build().unwrap();
        assert_eq!(scene.metric.dim(), 2);
        assert_eq!(scene.field.name(), "uniform-electric");
        assert_eq!(scene.run.samples, 101);
        assert_eq!(scene.run.seed, 42);
        assert_eq!(scene.run.nodes, tol::DEFAULT_NODES);
        let report = scene.validate(16).unwrap();
        assert!(report.passed(), "{:?}", report.checks);
        assert_eq!(report.checks.len(), 7);
    }

    #[test]
    fn schwarzschild_scene_passes_the_invariant_suite() {
        let text = r#"
[scene]
dimension = 4

[metric]
name = "schwarzschild"
mass = 1.0

[field]
name = "zero"

[events]
x0 = [0.0, 8.0, 1.5707963267948966, 0.0]
"#;
        let scene = SceneConfig::from_toml_str(text).unwrap().build().unwrap();
        let report = scene.validate(12).unwrap();
        assert!(report.passed(), "{:?}", report.checks);
    }

    #[test]
    fn bad_scenes_are_refused() {
        let unknown_metric = SCENE.replace("\"minkowski\"", "\"desitter\"");
        assert!(SceneConfig::from_toml_str(&unknown_metric).unwrap().build().is_err());

        let missing_param = SCENE.replace("e = 0.25\n", "");
        assert!(SceneConfig::from_toml_str(&missing_param).unwrap().build().is_err());

        let wrong_dim = SCENE.replace("x0 = [0.0, 0.0]", "x0 = [0.0, 0.0, 0.0]");
        assert!(SceneConfig::from_toml_str(&wrong_dim).unwrap().build().is_err());

        let bad_key = SCENE.replace("e = 0.25", "e = 0.25\nvoltage = 3.0");
        assert!(SceneConfig::from_toml_str(&bad_key).is_err());

        let table_scene = r#"
[scene]
dimension = 2
[metric]
name = "minkowski"
[field]
name = "table"
f = [[0.0, 0.5], [0.5, 0.0]]
[events]
x0 = [0.0, 0.0]
"#;
        // Symmetric (not antisymmetric) table must be rejected.
        assert!(SceneConfig::from_toml_str(table_scene).unwrap().build().is_err());
    }

    #[test]
    fn schwarzschild_needs_dimension_four_and_a_mass() {
        let wrong_dim = r#"
[scene]
dimension = 3
[metric]
name = "schwarzschild"
mass = 1.0
[field]
name = "zero"
[events]
x0 = [0.0, 8.0, 1.5]
"#;
        assert!(SceneConfig::from_toml_str(wrong_dim).unwrap().build().is_err());

        let no_mass = r#"
[scene]
dimension = 4
[metric]
name = "schwarzschild"
[field]
name = "zero"
[events]
x0 = [0.0, 8.0, 1.5, 0.0]
"#;
        assert!(SceneConfig::from_toml_str(no_mass).unwrap().build().is_err());
    }
}
