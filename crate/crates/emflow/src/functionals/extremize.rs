//! Newton extremization of the fixed-parameter action `J`.
//!
//! The discrete first variation `G` of `J` over the interior nodes (the
//! same finite-difference gradient reported by the action diagnostics)
//! vanishes at an extremal. Because timelike extremals of `J` are saddle
//! points in general, the solver is a damped Newton *root-finder* on
//! `G = 0`, not a descent method on `J` itself: the Jacobian of `G` is
//! block tridiagonal (node `j` only couples to the segments it touches),
//! so each Newton step is a block Thomas solve. Steps are backtracked on
//! `‖G‖` and rejected whenever a chord leaves the timelike future cone.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{Event, Field, Metric};
use crate::tol;

use super::{
    action_j, combine, gradient, curve_sums, segment_sums, ActionKind, ActionReport,
    PolylineCurve,
};

#[derive(Clone, Copy, Debug)]
pub struct OptimizerConfig {
    /// Convergence threshold on the max-norm of the first variation.
    pub g_tol: f64,
    pub max_iters: usize,
    /// Relative step for differencing the gradient into the Jacobian.
    pub hessian_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { g_tol: tol::DEFAULT_G_TOL, max_iters: 50, hessian_step: 1e-4 }
    }
}

#[derive(Clone, Debug)]
pub struct ExtremalResult {
    pub curve: PolylineCurve,
    /// Action report on the final curve (its `gradient_norm` is the
    /// stationarity residual actually reached).
    pub report: ActionReport,
    pub converged: bool,
    pub iterations: usize,
}

/// Extremizes `J` (or `J̃` when `half` is false) over the interior nodes
/// of `init` at fixed endpoints, fixed parameter grid, and fixed coupling.
///
/// The initial curve must be timelike and future-directed; every accepted
/// iterate keeps that property. Returns the converged flag rather than an
/// error when the iteration budget runs out with a finite residual; errors
/// only when no admissible step improves the residual at all.
pub fn extremize_j<M, F>(
    metric: &M,
    field: &F,
    coupling: f64,
    init: &PolylineCurve,
    half: bool,
    cfg: &OptimizerConfig,
) -> Result<ExtremalResult>
where
    M: Metric + ?Sized,
    F: Field + ?Sized,
{
    if !field.has_potential() {
        return Err(Error::config(format!(
            "field '{}' has no potential one-form; the action needs ω with F = dω",
            field.name()
        )));
    }
    if init.node_count() < 3 {
        return Err(Error::config("extremization needs at least one interior node"));
    }
    if !init.is_timelike_future(metric)? {
        return Err(Error::Causality(
            "the initial curve has a non-timelike or past-directed segment".to_string(),
        ));
    }

    let which = if half { ActionKind::J } else { ActionKind::Jtilde };
    let mut params = std::collections::BTreeMap::new();
    params.insert("coupling".to_string(), coupling);
    params.insert("span".to_string(), init.span());

    let n = init.dim();
    let interior = init.node_count() - 2;
    let mut curve = init.clone();
    let mut iterations = 0;
    let mut converged = false;

    let grad_vec = |c: &PolylineCurve| -> Result<DVector<f64>> {
        let total = curve_sums(metric, field, c)?;
        Ok(DVector::from_vec(gradient(metric, field, which, &params, c, total)?))
    };

    let mut g = grad_vec(&curve)?;
    for it in 0..cfg.max_iters {
        iterations = it;
        let gmax = g.amax();
        if gmax < cfg.g_tol {
            converged = true;
            break;
        }

        let (mut sub, mut diag, mut sup) = jacobian_blocks(metric, field, which, &params, &curve, cfg.hessian_step)?;
        let mut delta = None;
        let mut shift = 0.0;
        for _ in 0..6 {
            if shift > 0.0 {
                for d in &mut diag {
                    for k in 0..n {
                        d[(k, k)] += shift;
                    }
                }
            }
            match block_thomas(&sub, &diag, &sup, &(-&g)) {
                Some(d) if d.iter().all(|x| x.is_finite()) => {
                    delta = Some(d);
                    break;
                }
                _ => {
                    let scale = diag.iter().map(|d| d.amax()).fold(1.0_f64, f64::max);
                    shift = if shift == 0.0 { 1e-8 * scale } else { shift * 100.0 };
                    (sub, diag, sup) =
                        jacobian_blocks(metric, field, which, &params, &curve, cfg.hessian_step)?;
                }
            }
        }
        let delta = delta.ok_or_else(|| Error::Singular(
            "the Jacobian of the first variation is numerically singular".to_string(),
        ))?;

        let gnorm = g.norm();
        let mut alpha = 1.0_f64;
        let mut accepted = None;
        while alpha >= 1e-12 {
            let mut trial = curve.clone();
            for j in 0..interior {
                let node = trial.nodes_mut()[j + 1].coords_mut();
                for mu in 0..n {
                    node[mu] += alpha * delta[j * n + mu];
                }
            }
            if trial.nodes().iter().all(|x| x.coords().iter().all(|c| c.is_finite()))
                && trial.is_timelike_future(metric)?
            {
                let gt = grad_vec(&trial)?;
                if gt.norm() <= (1.0 - 1e-4 * alpha) * gnorm {
                    accepted = Some((trial, gt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, gt)) => {
                curve = trial;
                g = gt;
            }
            None => {
                return Err(Error::NoExtremum { gradient_norm: gmax, iterations: it + 1 });
            }
        }
        iterations = it + 1;
    }

    let report = action_j(metric, field, coupling, &curve, half)?;
    Ok(ExtremalResult { curve, report, converged, iterations })
}

/// First variation of the two segments adjacent to node `j`, differenced
/// with respect to that node's coordinates. For `J` the combination of
/// segment sums is linear, so this local value equals the corresponding
/// components of the full gradient.
fn local_grad<M, F>(
    metric: &M,
    field: &F,
    which: ActionKind,
    params: &std::collections::BTreeMap<String, f64>,
    nodes: &mut [Event],
    grid: &[f64],
    j: usize,
) -> Result<DVector<f64>>
where
    M: Metric + ?Sized,
    F: Field + ?Sized,
{
    let n = nodes[0].dim();
    let mut out = DVector::zeros(n);
    for mu in 0..n {
        let x0 = nodes[j].coords()[mu];
        let h = 1e-6 * (1.0 + x0.abs());
        let mut eval = |x: f64| -> Result<f64> {
            nodes[j].coords_mut()[mu] = x;
            let s = segment_sums(metric, field, &nodes[j - 1], &nodes[j], grid[j] - grid[j - 1])?
                + segment_sums(metric, field, &nodes[j], &nodes[j + 1], grid[j + 1] - grid[j])?;
            Ok(combine(which, params, &s))
        };
        let plus = eval(x0 + h)?;
        let minus = eval(x0 - h)?;
        nodes[j].coords_mut()[mu] = x0;
        out[mu] = (plus - minus) / (2.0 * h);
    }
    Ok(out)
}

type Blocks = (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>);

/// Block-tridiagonal Jacobian of the first variation: differencing the
/// local gradients of the (at most three) interior nodes whose segments a
/// perturbed node touches. `sub[i] = ∂G_i/∂x_{i-1}`, `diag[i] = ∂G_i/∂x_i`,
/// `sup[i] = ∂G_i/∂x_{i+1}` in interior-node indexing.
fn jacobian_blocks<M, F>(
    metric: &M,
    field: &F,
    which: ActionKind,
    params: &std::collections::BTreeMap<String, f64>,
    curve: &PolylineCurve,
    rel_step: f64,
) -> Result<Blocks>
where
    M: Metric + ?Sized,
    F: Field + ?Sized,
{
    let n = curve.dim();
    let interior = curve.node_count() - 2;
    let grid = curve.grid().to_vec();
    let mut nodes = curve.nodes().to_vec();
    let mut sub = vec![DMatrix::zeros(n, n); interior];
    let mut diag = vec![DMatrix::zeros(n, n); interior];
    let mut sup = vec![DMatrix::zeros(n, n); interior];

    for jc in 0..interior {
        let j = jc + 1;
        for mu in 0..n {
            let x0 = nodes[j].coords()[mu];
            let h = rel_step * (1.0 + x0.abs());
            let mut rows_at = |x: f64| -> Result<Vec<(usize, DVector<f64>)>> {
                nodes[j].coords_mut()[mu] = x;
                let mut rows = Vec::with_capacity(3);
                for i in [j.wrapping_sub(1), j, j + 1] {
                    if i >= 1 && i <= interior {
                        rows.push((i - 1, local_grad(metric, field, which, params, &mut nodes, &grid, i)?));
                    }
                }
                Ok(rows)
            };
            let plus = rows_at(x0 + h)?;
            let minus = rows_at(x0 - h)?;
            nodes[j].coords_mut()[mu] = x0;
            for ((ic, gp), (_, gm)) in plus.into_iter().zip(minus) {
                let col = (gp - gm) / (2.0 * h);
                let block = match ic as isize - jc as isize {
                    -1 => &mut sup[ic],
                    0 => &mut diag[ic],
                    1 => &mut sub[ic],
                    _ => unreachable!(),
                };
                block.column_mut(mu).copy_from(&col);
            }
        }
    }
    Ok((sub, diag, sup))
}

/// Solves the block-tridiagonal system by forward elimination with LU
/// pivot blocks. Returns `None` on a singular pivot.
fn block_thomas(
    sub: &[DMatrix<f64>],
    diag: &[DMatrix<f64>],
    sup: &[DMatrix<f64>],
    rhs: &DVector<f64>,
) -> Option<DVector<f64>> {
    let m = diag.len();
    let n = diag[0].nrows();
    let mut c_prime: Vec<DMatrix<f64>> = Vec::with_capacity(m);
    let mut d_prime: Vec<DVector<f64>> = Vec::with_capacity(m);

    let seg = |i: usize| rhs.rows(i * n, n).into_owned();

    let lu0 = diag[0].clone().lu();
    c_prime.push(lu0.solve(&sup[0])?);
    d_prime.push(lu0.solve(&seg(0))?);
    for i in 1..m {
        let denom = &diag[i] - &sub[i] * &c_prime[i - 1];
        let lu = denom.lu();
        let cp = if i + 1 < m { lu.solve(&sup[i])? } else { DMatrix::zeros(n, n) };
        let dp = lu.solve(&(seg(i) - &sub[i] * &d_prime[i - 1]))?;
        c_prime.push(cp);
        d_prime.push(dp);
    }

    let mut x = DVector::zeros(m * n);
    let mut xi = d_prime[m - 1].clone();
    x.rows_mut((m - 1) * n, n).copy_from(&xi);
    for i in (0..m - 1).rev() {
        xi = &d_prime[i] - &c_prime[i] * &xi;
        x.rows_mut(i * n, n).copy_from(&xi);
    }
    Some(x)
}
