//! `emflow` — scene-driven experiments on charged-particle worldlines.
//!
//! Every subcommand loads a TOML scene, checks the scene's model
//! invariants, runs one experiment, writes plot-ready CSV and
//! regression-grade JSON artifacts into the output directory, and prints
//! a short summary. Identical scene + seed gives byte-identical
//! artifacts. Exit codes: 0 success, 2 configuration error, 3 numerical
//! failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use emflow::connect::{
    scan_charge_to_mass, solve_connection_efe, solve_connection_lfe, ConnectionProblem,
    ProblemKind, SolverOptions,
};
use emflow::dynamics::{
    integrate, recover_charge_to_mass, ChargeToMass, CotangentState, CotangentSystem, ForceSystem,
    IntegratorConfig,
};
use emflow::export;
use emflow::functionals::{
    action_i, action_j, action_k, charge_bound, check_neo, extremize_j, ActionReport,
    OptimizerConfig, PolylineCurve,
};
use emflow::geometry::{proper_length, Event};
use emflow::scene::{Scene, SceneConfig};
use emflow::{Error, Result};

#[derive(Parser)]
#[command(
    name = "emflow",
    version,
    about = "Charged-particle worldlines: integrate, connect, scan, extremize, validate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one of the dynamical systems from the scene's initial data
    Integrate(IntegrateArgs),
    /// Solve the two-point connection problem between the scene's events
    Connect(ConnectArgs),
    /// Solve the connection problem across a grid of charge-to-mass ratios
    Scan(ScanArgs),
    /// Evaluate or extremize one of the action functionals
    Action(ActionArgs),
    /// Run the full model-invariant suite on a scene
    Check(CheckArgs),
}

#[derive(Args)]
struct Common {
    /// Scene description (TOML)
    #[arg(long, value_name = "FILE")]
    scene: PathBuf,
    /// Output directory for artifacts (default: $EMFLOW_OUT_DIR or ".")
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum SystemKind {
    /// Lorentz force equation (proper time, coupling q/m)
    Lfe,
    /// Electromagnetic flow equation (affine parameter, coupling Q)
    Efe,
    /// Cotangent flow with normalized coupling ε = ±1
    Cotangent,
    /// Twisted-Hamiltonian flow (cotangent bundle, coupling Q)
    Twisted,
    /// Magnetic flow on a Riemannian space (external time, coupling q/m)
    Magnetic,
}

#[derive(Args)]
struct IntegrateArgs {
    #[command(flatten)]
    common: Common,
    /// Dynamical system to integrate
    #[arg(long, value_enum)]
    system: SystemKind,
    /// Coupling constant: q/m (lfe, magnetic), Q (efe, twisted), ε (cotangent)
    #[arg(long = "qm", visible_alias = "coupling", default_value_t = 1.0)]
    qm: f64,
    /// Integrate over [0, SPAN] instead of the scene's run.span
    #[arg(long)]
    span: Option<f64>,
    /// Output samples (default: the scene's run.samples)
    #[arg(long)]
    samples: Option<usize>,
    /// Basename of the trajectory artifacts
    #[arg(long, default_value = "worldline")]
    prefix: String,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ConnectKind {
    /// Lorentz-force connection at a prescribed ratio (needs --qm)
    Lfe,
    /// Flow connection with normalized coupling (--eps, default +1)
    Efe,
}

#[derive(Args)]
struct ConnectArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    kind: ConnectKind,
    /// Charge-to-mass ratio of the connecting Lorentz-force solution
    #[arg(long)]
    qm: Option<f64>,
    /// Normalized flow coupling, +1 or -1
    #[arg(long)]
    eps: Option<f64>,
    /// Basename of the solution artifacts
    #[arg(long, default_value = "connection")]
    prefix: String,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    common: Common,
    /// Ratio grid START:END:COUNT (inclusive, uniformly spaced)
    #[arg(long = "qm-grid", value_name = "A:B:N")]
    qm_grid: String,
    /// Worker threads (default: scene run.workers, or all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// Embed full trajectories in the JSON artifact
    #[arg(long)]
    embed: bool,
    /// Basename of the scan artifacts
    #[arg(long, default_value = "scan")]
    prefix: String,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum WhichAction {
    /// Charged-particle action ∫(ds + (q/m)ω)
    I,
    /// Energy functional ½∫g(γ′,γ′) + Q∫ω
    J,
    /// Energy functional without the ½: ∫g(γ′,γ′) + Q∫ω
    Jtilde,
    /// Parametrization-free ½(∫ds)² + β∫ω
    K,
}

#[derive(Args)]
struct ActionArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    which: WhichAction,
    /// Functional parameter: q/m (i), Q (j, jtilde), β (k)
    #[arg(long = "qm", visible_alias = "coupling", alias = "beta")]
    qm: f64,
    /// Extremize instead of evaluating (j and jtilde only)
    #[arg(long)]
    extremize: bool,
    /// Number of polyline segments (default: the scene's run.nodes)
    #[arg(long)]
    nodes: Option<usize>,
    /// Evaluate on a trajectory CSV instead of the straight chord
    #[arg(long, value_name = "FILE")]
    curve: Option<PathBuf>,
    /// Basename of the report artifacts
    #[arg(long, default_value = "action")]
    prefix: String,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    common: Common,
    /// Events to sample the invariants at
    #[arg(long, default_value_t = 20)]
    samples: usize,
    /// Basename of the report artifact
    #[arg(long, default_value = "check")]
    prefix: String,
}

/// Restores the default SIGPIPE disposition so `emflow … | head` dies
/// quietly like other pipeline tools instead of panicking on a closed
/// stdout.
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn main() -> ExitCode {
    reset_sigpipe();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Integrate(args) => cmd_integrate(args),
        Command::Connect(args) => cmd_connect(args),
        Command::Scan(args) => cmd_scan(args),
        Command::Action(args) => cmd_action(args),
        Command::Check(args) => cmd_check(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match err {
                Error::Config(_)
                | Error::ChartDomain(_)
                | Error::Causality(_)
                | Error::Io(_)
                | Error::Serialize(_) => 2,
                _ => 3,
            })
        }
    }
}

/// Loads and builds the scene, then refuses it unless the model
/// invariants hold at a few sampled events.
fn load_scene(common: &Common) -> Result<Scene> {
    let scene = SceneConfig::load(&common.scene)?.build()?;
    let report = scene.validate(8)?;
    if !report.passed() {
        for c in report.checks.iter().filter(|c| !c.passed) {
            eprintln!("invariant violated: {} (worst {:.3e} > {:.1e})", c.name, c.worst, c.threshold);
        }
        return Err(Error::config(format!(
            "scene '{}' fails its model invariants; see `emflow check`",
            common.scene.display()
        )));
    }
    Ok(scene)
}

fn out_dir(common: &Common) -> Result<PathBuf> {
    let dir = common
        .out
        .clone()
        .or_else(|| std::env::var_os("EMFLOW_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

fn integrator(scene: &Scene) -> IntegratorConfig {
    IntegratorConfig::rk45(scene.run.abs_tol, scene.run.rel_tol)
}

fn solver_options(scene: &Scene) -> SolverOptions {
    SolverOptions {
        tol: scene.run.bvp_tol,
        max_restarts: scene.run.max_restarts,
        seed: scene.run.seed,
        samples: scene.run.samples,
        integrator: integrator(scene),
        ..SolverOptions::default()
    }
}

fn event_str(x: &Event) -> String {
    let inner: Vec<String> = x.coords().iter().map(|c| format!("{c:.9}")).collect();
    format!("({})", inner.join(", "))
}

fn cmd_integrate(args: IntegrateArgs) -> Result<()> {
    let scene = load_scene(&args.common)?;
    let dir = out_dir(&args.common)?;
    let metric = scene.metric.as_ref();
    let field = scene.field.as_ref();
    let v0 = scene
        .v0
        .clone()
        .ok_or_else(|| Error::config("this scene has no initial velocity: add `v0` to [events]"))?;
    let range = match args.span {
        Some(end) => (0.0, end),
        None => (scene.run.span[0], scene.run.span[1]),
    };
    let samples = args.samples.unwrap_or(scene.run.samples);
    let cfg = integrator(&scene);

    let w = match args.system {
        SystemKind::Lfe => {
            let sys = ForceSystem::lorentz(metric, field, args.qm)?;
            integrate(&sys, &scene.x0, &v0, range, samples, &cfg)?
        }
        SystemKind::Efe => {
            let sys = ForceSystem::electromagnetic_flow(metric, field, args.qm)?;
            integrate(&sys, &scene.x0, &v0, range, samples, &cfg)?
        }
        SystemKind::Magnetic => {
            let sys = ForceSystem::magnetic_flow(metric, field, args.qm)?;
            integrate(&sys, &scene.x0, &v0, range, samples, &cfg)?
        }
        SystemKind::Cotangent | SystemKind::Twisted => {
            // The initial velocity is lowered to the covelocity p = g·v.
            let state = CotangentState::from_velocity(metric, scene.x0.clone(), &v0)?;
            let sys = match args.system {
                SystemKind::Cotangent => {
                    CotangentSystem::electromagnetic_flow(metric, field, args.qm)?
                }
                _ => CotangentSystem::twisted_hamiltonian(metric, field, args.qm)?,
            };
            integrate(&sys, &state.x, &state.p, range, samples, &cfg)?
        }
    };

    let csv = write_artifact(&dir, &format!("{}.csv", args.prefix), &export::worldline_csv(metric, &w)?)?;
    let json = write_artifact(&dir, &format!("{}.json", args.prefix), &export::worldline_json(&w))?;

    let meta = w.meta();
    println!(
        "integrated {} over lambda in [{}, {}], {} samples, coupling {}",
        meta.system,
        range.0,
        range.1,
        w.len(),
        args.qm
    );
    println!("  parametrization {:?}, norm drift {:.3e}", w.param_kind(), meta.norm_drift);
    if let Some(h) = meta.params.get("h_drift") {
        println!("  hamiltonian drift {h:.3e}");
    }
    println!("  endpoint {}", event_str(&w.last().x));
    println!("  wrote {} and {}", csv.display(), json.display());
    Ok(())
}

fn describe_connection(
    scene: &Scene,
    kind_label: &str,
    conn: &emflow::connect::Connection,
) -> Result<()> {
    println!(
        "{kind_label} connection converged: miss {:.3e}, {} iterations, {} restarts",
        conn.miss_norm, conn.iterations, conn.restarts
    );
    let len = proper_length(scene.metric.as_ref(), &conn.worldline)?;
    println!("  proper length {len:.9}");
    for key in ["speed", "induced_ratio"] {
        if let Some(v) = conn.worldline.meta().params.get(key) {
            println!("  {key} {v:.9}");
        }
    }
    Ok(())
}

fn cmd_connect(args: ConnectArgs) -> Result<()> {
    let scene = load_scene(&args.common)?;
    let dir = out_dir(&args.common)?;
    let x1 = scene
        .x1
        .clone()
        .ok_or_else(|| Error::config("the connection problem needs `x1` in [events]"))?;

    let (kind, label) = match args.kind {
        ConnectKind::Lfe => {
            if args.eps.is_some() {
                return Err(Error::config("--eps applies to the flow connection (`--kind efe`)"));
            }
            let ratio = args.qm.ok_or_else(|| {
                Error::config("the Lorentz-force connection needs --qm <ratio>")
            })?;
            (ProblemKind::Lorentz { ratio }, "lorentz-force")
        }
        ConnectKind::Efe => {
            if args.qm.is_some() {
                return Err(Error::config("--qm applies to the Lorentz connection (`--kind lfe`)"));
            }
            (ProblemKind::Flow { eps: args.eps.unwrap_or(1.0) }, "flow")
        }
    };

    let problem = ConnectionProblem {
        metric: scene.metric.as_ref(),
        field: scene.field.as_ref(),
        x0: scene.x0.clone(),
        x1,
        kind,
        opts: solver_options(&scene),
    };
    let conn = match args.kind {
        ConnectKind::Lfe => solve_connection_lfe(&problem)?,
        ConnectKind::Efe => solve_connection_efe(&problem)?,
    };

    describe_connection(&scene, label, &conn)?;
    if let ConnectKind::Lfe = args.kind {
        if let ChargeToMass::Real(r) =
            recover_charge_to_mass(scene.metric.as_ref(), scene.field.as_ref(), &conn.worldline)?
                .ratio
        {
            println!("  recovered ratio {r:.9}");
        }
    }
    let csv = write_artifact(
        &dir,
        &format!("{}.csv", args.prefix),
        &export::worldline_csv(scene.metric.as_ref(), &conn.worldline)?,
    )?;
    let json =
        write_artifact(&dir, &format!("{}.json", args.prefix), &export::connection_json(&conn))?;
    println!("  wrote {} and {}", csv.display(), json.display());
    Ok(())
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(Error::config(format!("grid must look like START:END:COUNT, got '{text}'")));
    };
    let bad = |what: &str| Error::config(format!("grid {what} in '{text}' is not a number"));
    let a: f64 = a.parse().map_err(|_| bad("start"))?;
    let b: f64 = b.parse().map_err(|_| bad("end"))?;
    let n: usize = n.parse().map_err(|_| Error::config(format!("grid count in '{text}' is not a positive integer")))?;
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::config("grid bounds must be finite"));
    }
    if n == 0 {
        return Err(Error::config("grid count must be at least 1"));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

fn cmd_scan(args: ScanArgs) -> Result<()> {
    let scene = load_scene(&args.common)?;
    let dir = out_dir(&args.common)?;
    let x1 = scene
        .x1
        .clone()
        .ok_or_else(|| Error::config("the ratio scan needs `x1` in [events]"))?;
    let grid = parse_grid(&args.qm_grid)?;
    let workers = args
        .workers
        .or(if scene.run.workers > 0 { Some(scene.run.workers) } else { None })
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |p| p.get()));

    let scan = scan_charge_to_mass(
        scene.metric.as_ref(),
        scene.field.as_ref(),
        &scene.x0,
        &x1,
        &grid,
        &solver_options(&scene),
        workers,
    )?;

    let lengths: Vec<f64> = scan.entries.iter().filter_map(|e| e.proper_length).collect();
    let (lo, hi) = lengths
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &l| (lo.min(l), hi.max(l)));
    println!(
        "scan over {} ratios: {} connected, proper length in [{lo:.6}, {hi:.6}]",
        grid.len(),
        scan.converged_count()
    );
    if let Some(sep) = scan.min_pairwise_separation() {
        println!("  min pairwise trajectory separation {sep:.3e}");
    }

    let csv = write_artifact(&dir, &format!("{}.csv", args.prefix), &export::scan_csv(&scan))?;
    let json = write_artifact(
        &dir,
        &format!("{}.json", args.prefix),
        &export::scan_json(&scan, args.embed),
    )?;
    println!("  wrote {} and {}", csv.display(), json.display());
    Ok(())
}

/// Reads a polyline back from a trajectory CSV written by this tool
/// (`lambda,x0..x{n-1},...` — only the parameter and position columns are
/// used).
fn read_polyline_csv(path: &Path) -> Result<PolylineCurve> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::config(format!("curve file {} is empty", path.display())))?;
    let n = header.split(',').filter(|c| c.starts_with('x')).count();
    if n == 0 {
        return Err(Error::config(format!(
            "curve file {} has no coordinate columns in its header",
            path.display()
        )));
    }
    let mut grid = Vec::new();
    let mut nodes = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let values: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| {
                Error::config(format!("curve file {}, line {}: {e}", path.display(), lineno + 1))
            })?;
        if values.len() < 1 + n {
            return Err(Error::config(format!(
                "curve file {}, line {}: expected at least {} columns",
                path.display(),
                lineno + 1,
                1 + n
            )));
        }
        grid.push(values[0]);
        nodes.push(Event::from_slice(&values[1..1 + n]));
    }
    PolylineCurve::new(nodes, grid)
}

fn describe_report(report: &ActionReport) {
    println!(
        "{}: value {:.9}, gradient norm {:.3e}",
        report.which.label(),
        report.value,
        report.gradient_norm
    );
    println!("  integral ds {:.9}, integral omega {:.9}", report.integral_ds, report.integral_omega);
}

fn cmd_action(args: ActionArgs) -> Result<()> {
    let scene = load_scene(&args.common)?;
    let dir = out_dir(&args.common)?;
    let metric = scene.metric.as_ref();
    let field = scene.field.as_ref();

    let curve = match &args.curve {
        Some(path) => read_polyline_csv(path)?,
        None => {
            let x1 = scene.x1.clone().ok_or_else(|| {
                Error::config("evaluating on the straight chord needs `x1` in [events]")
            })?;
            let segments = args.nodes.unwrap_or(scene.run.nodes);
            PolylineCurve::straight(
                &scene.x0,
                &x1,
                segments,
                (scene.run.span[0], scene.run.span[1]),
            )?
        }
    };

    if args.extremize {
        let half = match args.which {
            WhichAction::J => true,
            WhichAction::Jtilde => false,
            _ => {
                return Err(Error::config(
                    "extremization applies to the energy functionals: --which j or jtilde",
                ))
            }
        };
        let cfg = OptimizerConfig { g_tol: scene.run.g_tol, ..OptimizerConfig::default() };
        let sol = extremize_j(metric, field, args.qm, &curve, half, &cfg)?;
        describe_report(&sol.report);
        println!("  converged in {} iterations", sol.iterations);

        // The a-posteriori ratio constraint, with the effective coupling
        // of the doubled-kinetic variant being Q/2.
        let coupling = if half { args.qm } else { 0.5 * args.qm };
        let neo = check_neo(metric, field, &sol.curve, coupling, sol.curve.span())?;
        let json_neo =
            write_artifact(&dir, &format!("{}_constraint.json", args.prefix), &export::neo_json(&neo))?;
        match neo.ratio {
            ChargeToMass::SymbolR => {
                println!("  kernel-degenerate extremal: ratio undetermined (R)")
            }
            ChargeToMass::Real(r) => {
                println!(
                    "  recovered ratio {r:.9}; constraint |(q/m)∫ds − QΔλ|/|QΔλ| = {:.3e}",
                    neo.rel_error
                );
                // Lower bound |β|/l with l estimated by the chord length.
                let chord = PolylineCurve::straight(
                    sol.curve.first(),
                    sol.curve.last(),
                    sol.curve.segment_count().max(8),
                    (0.0, sol.curve.span()),
                )?;
                let l_est = proper_length(metric, &chord.to_worldline()?)?;
                let bound =
                    charge_bound(metric, coupling * sol.curve.span(), sol.curve.first(), sol.curve.last(), l_est)?;
                println!("  ratio bound: |q/m| = {:.6} >= |beta|/l_est = {bound:.6}", r.abs());
            }
        }

        let w = sol.curve.to_worldline()?;
        let csv = write_artifact(&dir, &format!("{}_extremal.csv", args.prefix), &export::worldline_csv(metric, &w)?)?;
        let json = write_artifact(&dir, &format!("{}.json", args.prefix), &export::action_json(&sol.report))?;
        println!("  wrote {}, {} and {}", json.display(), csv.display(), json_neo.display());
        return Ok(());
    }

    let report = match args.which {
        WhichAction::I => action_i(metric, field, args.qm, &curve)?,
        WhichAction::J => action_j(metric, field, args.qm, &curve, true)?,
        WhichAction::Jtilde => action_j(metric, field, args.qm, &curve, false)?,
        WhichAction::K => action_k(metric, field, args.qm, &curve)?,
    };
    describe_report(&report);
    let json = write_artifact(&dir, &format!("{}.json", args.prefix), &export::action_json(&report))?;
    println!("  wrote {}", json.display());
    Ok(())
}

fn cmd_check(args: CheckArgs) -> Result<()> {
    let scene = SceneConfig::load(&args.common.scene)?.build()?;
    let dir = out_dir(&args.common)?;
    let report = scene.validate(args.samples)?;
    for c in &report.checks {
        println!(
            "{} {:28} worst {:.3e} (threshold {:.1e})",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.worst,
            c.threshold
        );
    }
    let json = write_artifact(&dir, &format!("{}.json", args.prefix), &export::validation_json(&report))?;
    println!(
        "{} of {} checks passed at {} sampled events; wrote {}",
        report.checks.iter().filter(|c| c.passed).count(),
        report.checks.len(),
        report.sample_count,
        json.display()
    );
    if !report.passed() {
        return Err(Error::config("scene fails its model invariants"));
    }
    Ok(())
}
