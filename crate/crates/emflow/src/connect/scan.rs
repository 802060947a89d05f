//! Ratio scans and Lorentzian distance estimation.
//!
//! A single pair of chronologically related events is generically joined
//! by a *family* of force-equation solutions, one per charge-to-mass
//! ratio; scanning a ratio grid makes that multiplicity concrete. The
//! longest connecting curve found along the way is a certified lower
//! bound for the Lorentzian distance.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::dynamics::Worldline;
use crate::error::{Error, Result};
use crate::functionals::{action_i, PolylineCurve};
use crate::geometry::{proper_length, Event, Field, Metric};

use super::{solve_core, ConnectionProblem, ProblemKind, ShootingVariables, SolverOptions};

/// Entries are solved in consecutive runs of this size so neighbors can
/// warm-start each other while runs proceed in parallel.
const CHUNK: usize = 4;

/// Outcome of one grid entry of a ratio scan.
#[derive(Clone, Debug)]
pub struct ScanEntry {
    pub ratio: f64,
    pub converged: bool,
    /// Endpoint miss of the accepted solution, or the best miss seen
    /// before giving up.
    pub miss_norm: f64,
    /// Restarts consumed (grid entries are warm-started from converged
    /// neighbors within their chunk).
    pub restarts: usize,
    pub proper_length: Option<f64>,
    /// Charged-particle action of the connecting curve at this entry's
    /// ratio (needs a field with a potential).
    pub action: Option<f64>,
    pub worldline: Option<Worldline>,
    /// Shooting variables of the accepted solution (drives warm starts
    /// and the continuity diagnostics).
    pub vars: Option<ShootingVariables>,
}

#[derive(Debug)]
pub struct ScanResult {
    pub entries: Vec<ScanEntry>,
}

impl ScanResult {
    pub fn converged_count(&self) -> usize {
        self.entries.iter().filter(|e| e.converged).count()
    }

    /// Minimum over pairs of converged trajectories of their maximal
    /// pointwise coordinate separation: a positive value certifies the
    /// trajectories are pairwise distinct. `None` with fewer than two
    /// successes.
    pub fn min_pairwise_separation(&self) -> Option<f64> {
        let curves: Vec<&Worldline> =
            self.entries.iter().filter_map(|e| e.worldline.as_ref()).collect();
        if curves.len() < 2 {
            return None;
        }
        let mut min = f64::INFINITY;
        for i in 0..curves.len() {
            for j in i + 1..curves.len() {
                if let Ok(d) = curves[i].max_position_distance(curves[j]) {
                    min = min.min(d);
                }
            }
        }
        min.is_finite().then_some(min)
    }
}

/// Solves the Lorentz connection problem for every ratio in `grid`,
/// distributing chunks of consecutive entries over `workers` threads.
/// Per-entry failures are recorded in the table, never raised. Entry
/// seeds derive from `opts.seed` and the grid index, so results do not
/// depend on the worker count.
pub fn scan_charge_to_mass(
    metric: &dyn Metric,
    field: &dyn Field,
    x0: &Event,
    x1: &Event,
    grid: &[f64],
    opts: &SolverOptions,
    workers: usize,
) -> Result<ScanResult> {
    if grid.is_empty() {
        return Err(Error::config("the ratio grid is empty"));
    }
    ConnectionProblem {
        metric,
        field,
        x0: x0.clone(),
        x1: x1.clone(),
        kind: ProblemKind::Lorentz { ratio: grid[0] },
        opts: opts.clone(),
    }
    .validate()?;

    let chunk_count = grid.len().div_ceil(CHUNK);
    let threads = workers.max(1).min(chunk_count);
    let slots: Mutex<Vec<Option<ScanEntry>>> = Mutex::new(vec![None; grid.len()]);
    let next_chunk = AtomicUsize::new(0);

    let drain_chunks = || loop {
        let chunk = next_chunk.fetch_add(1, Ordering::Relaxed);
        if chunk >= chunk_count {
            return;
        }
        let lo = chunk * CHUNK;
        let hi = (lo + CHUNK).min(grid.len());
        let mut warm: Option<ShootingVariables> = None;
        let mut local = Vec::with_capacity(hi - lo);
        for (index, &ratio) in grid.iter().enumerate().take(hi).skip(lo) {
            let entry = scan_entry(metric, field, x0, x1, ratio, index, opts, warm.as_ref());
            warm = entry.vars.clone();
            local.push(entry);
        }
        let mut slots = slots.lock().unwrap();
        for (offset, entry) in local.into_iter().enumerate() {
            slots[lo + offset] = Some(entry);
        }
    };

    if threads == 1 {
        // Inline so single-worker scans stay available on targets without
        // thread support (the browser build runs everything on one worker).
        drain_chunks();
    } else {
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(|| drain_chunks());
            }
        });
    }

    let entries = slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|e| e.expect("every grid entry is filled"))
        .collect();
    Ok(ScanResult { entries })
}

#[allow(clippy::too_many_arguments)]
fn scan_entry(
    metric: &dyn Metric,
    field: &dyn Field,
    x0: &Event,
    x1: &Event,
    ratio: f64,
    index: usize,
    opts: &SolverOptions,
    warm: Option<&ShootingVariables>,
) -> ScanEntry {
    let mut entry_opts = opts.clone();
    entry_opts.seed =
        opts.seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let problem = ConnectionProblem {
        metric,
        field,
        x0: x0.clone(),
        x1: x1.clone(),
        kind: ProblemKind::Lorentz { ratio },
        opts: entry_opts,
    };
    match solve_core(&problem, warm) {
        Ok(conn) => {
            let length = proper_length(metric, &conn.worldline).ok();
            let action = if field.has_potential() {
                action_i(metric, field, ratio, &PolylineCurve::from_worldline(&conn.worldline))
                    .ok()
                    .map(|r| r.value)
            } else {
                None
            };
            ScanEntry {
                ratio,
                converged: true,
                miss_norm: conn.miss_norm,
                restarts: conn.restarts,
                proper_length: length,
                action,
                worldline: Some(conn.worldline),
                vars: Some(conn.vars),
            }
        }
        Err(Error::NoConnection { best_miss, restarts }) => ScanEntry {
            ratio,
            converged: false,
            miss_norm: best_miss,
            restarts,
            proper_length: None,
            action: None,
            worldline: None,
            vars: None,
        },
        Err(_) => ScanEntry {
            ratio,
            converged: false,
            miss_norm: f64::INFINITY,
            restarts: 0,
            proper_length: None,
            action: None,
            worldline: None,
            vars: None,
        },
    }
}

/// A certified lower bound for the Lorentzian distance between two
/// events, witnessed by the longest connecting curve found.
#[derive(Clone, Debug)]
pub struct DistanceEstimate {
    pub lower_bound: f64,
    pub witness: Worldline,
    /// Ratio of the witnessing trajectory (0 for the geodesic).
    pub witness_ratio: f64,
    /// Connecting curves that entered the maximum.
    pub curves_found: usize,
}

/// Estimates the Lorentzian distance from below as the maximal proper
/// length over all connecting curves found: the geodesic (ratio 0) plus a
/// scan over `grid_size` ratios spread across `[-1, 1]`. The bound never
/// overstates: it is exact in flat space, where the geodesic maximizes
/// length, and a lower bound everywhere else.
pub fn lorentzian_distance_estimate(
    metric: &dyn Metric,
    field: &dyn Field,
    x0: &Event,
    x1: &Event,
    grid_size: usize,
    opts: &SolverOptions,
    workers: usize,
) -> Result<DistanceEstimate> {
    let mut ratios = vec![0.0];
    if grid_size > 1 {
        for i in 0..grid_size {
            let r = -1.0 + 2.0 * i as f64 / (grid_size - 1) as f64;
            if r.abs() > 1e-12 {
                ratios.push(r);
            }
        }
    }
    let scan = scan_charge_to_mass(metric, field, x0, x1, &ratios, opts, workers)?;

    let mut best: Option<(f64, &ScanEntry)> = None;
    let mut found = 0;
    for entry in &scan.entries {
        if let (true, Some(length)) = (entry.converged, entry.proper_length) {
            found += 1;
            if best.is_none_or(|(l, _)| length > l) {
                best = Some((length, entry));
            }
        }
    }
    match best {
        Some((lower_bound, entry)) => Ok(DistanceEstimate {
            lower_bound,
            witness: entry.worldline.clone().expect("converged entries keep their curve"),
            witness_ratio: entry.ratio,
            curves_found: found,
        }),
        None => {
            let best_miss =
                scan.entries.iter().map(|e| e.miss_norm).fold(f64::INFINITY, f64::min);
            Err(Error::NoConnection { best_miss, restarts: opts.max_restarts })
        }
    }
}
