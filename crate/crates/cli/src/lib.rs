//! Command-line front end: simulate built-in models, run regularity and
//! derivative checks, and run convergence studies.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
#[cfg(feature = "plot")]
mod plot;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use nhfield_core::models::{builtin, Builtin, FieldBuiltin, MechanicalBuiltin};
use nhfield_core::{
    check_derivatives, constraint_regularity, dedonder_residual_20, evolve_field, hessian_regularity, integrate,
    multiplier_solve, project_state_weighted, semidiscretize, Boundary, CauchyGrid, CauchySystem, Error,
    FieldTrajectory, FieldVariation, IntegrateOptions, JetPoint, MechState, Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{BoundaryKind, Defaults, RunArgs, RunConfig, Settings, OUT_DIR_ENV};
use output::Table;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

/// Relative tolerance of the derivative cross-check.
pub const CHECK_RTOL: f64 = 1e-6;
/// Relative singular-value threshold of the regularity reports.
pub const REGULARITY_TOL: f64 = 1e-10;
/// Test variations drawn for the field-theory residual.
pub const EQ20_VARIATIONS: usize = 32;

#[derive(Debug, Parser)]
#[command(
    name = "nhfield",
    version,
    about = "Nonholonomic Lagrangian mechanics and field theories"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a model and write trajectory and diagnostics CSV files.
    Simulate(RunArgs),
    /// Regularity reports and derivative cross-checks.
    Check(RunArgs),
    /// Step-size or grid refinement study with observed orders.
    Convergence(RunArgs),
}

/// A failed command and the exit status it maps to.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Config(String),
    Solver(String),
    Check(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Solver(_) => EXIT_SOLVER,
            Failure::Check(_) => EXIT_CHECK,
            Failure::Io(_) => EXIT_IO,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Solver(m) | Failure::Check(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_solver_failure() {
            Failure::Solver(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status. Reports go to stdout, errors to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let env_out = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    let result = match &cli.command {
        Command::Simulate(a) => Settings::resolve(a, Defaults::RUN, env_out)
            .map_err(Failure::Config)
            .and_then(|s| cmd_simulate(&s)),
        Command::Check(a) => Settings::resolve(a, Defaults::RUN, env_out)
            .map_err(Failure::Config)
            .and_then(|s| cmd_check(&s)),
        Command::Convergence(a) => Settings::resolve(a, Defaults::STUDY, env_out)
            .map_err(Failure::Config)
            .and_then(|s| cmd_convergence(&s)),
    };
    match result {
        Ok(report) => {
            print!("{report}");
            EXIT_OK
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.exit_code()
        }
    }
}

fn load_model(s: &Settings) -> Result<Builtin, Failure> {
    Ok(builtin(&s.model, &s.params)?)
}

fn options(s: &Settings, mobility: Option<Vec<f64>>) -> IntegrateOptions {
    IntegrateOptions {
        project_each_step: s.project,
        record_every: s.record_every,
        mobility,
        ..Default::default()
    }
}

fn mech_initial(s: &Settings, m: &MechanicalBuiltin) -> Result<MechState, Failure> {
    if s.project {
        let o = IntegrateOptions::default();
        Ok(project_state_weighted(
            &m.constraints,
            &m.initial,
            m.mobility.as_deref(),
            o.projection_tol,
            o.projection_max_iter,
        )?)
    } else {
        Ok(m.initial.clone())
    }
}

/// Trajectory and diagnostics tables of a mechanical run.
pub fn mechanical_tables(s: &Settings, m: &MechanicalBuiltin, traj: &Trajectory) -> (Table, Table) {
    let names = m.lagrangian.space().fiber_names();
    let k = m.constraints.k();
    let mut header = vec!["t".to_string()];
    header.extend(names.iter().cloned());
    header.extend(names.iter().map(|n| format!("{n}dot")));
    header.extend((1..=k).map(|a| format!("Phi{a}")));
    if s.multipliers {
        header.extend((1..=k).map(|a| format!("lambda{a}")));
    }
    if s.energy {
        header.push("E".into());
    }
    let mut main = Table::new(header);
    let mut diag = Table::new(vec![
        "t".into(),
        "max_abs_Phi".into(),
        "energy".into(),
        "kkt_residual".into(),
    ]);
    for ((t, st), d) in traj.times.iter().zip(&traj.states).zip(&traj.diagnostics) {
        let mut row = vec![*t];
        row.extend(st.q.iter());
        row.extend(st.qdot.iter());
        row.extend(d.constraint_residuals.iter());
        if s.multipliers {
            row.extend(d.multipliers.iter());
        }
        if s.energy {
            row.push(d.energy);
        }
        main.push(row);
        let phi = d.constraint_residuals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        diag.push(vec![*t, phi, d.energy, d.kkt_residual]);
    }
    (main, diag)
}

fn grid_for(s: &Settings, m: usize, nb: usize) -> Result<CauchyGrid, Failure> {
    let boundary = match s.boundary {
        BoundaryKind::Periodic => Boundary::Periodic,
        BoundaryKind::Fixed => {
            let left = s.left.clone().unwrap_or_else(|| vec![0.0; m]);
            let right = s.right.clone().unwrap_or_else(|| vec![0.0; m]);
            if left.len() != m || right.len() != m {
                return Err(Failure::Config(format!("left/right need {m} values each")));
            }
            Boundary::Fixed { left, right }
        }
    };
    Ok(CauchyGrid::new(s.lb, nb, boundary)?)
}

/// Semidiscretizes a field model and evolves its (projected) initial data.
pub fn run_field(
    s: &Settings,
    f: &FieldBuiltin,
    nb: usize,
    h: f64,
) -> Result<(CauchySystem, FieldTrajectory), Failure> {
    let m = f.lagrangian.space().m();
    let grid = grid_for(s, m, nb)?;
    let sys = semidiscretize(&f.lagrangian, &f.constraints, &grid)?;
    let mut s0 = sys.initial_state(0.0, f.initial)?;
    if sys.k() > 0 {
        let o = IntegrateOptions::default();
        s0 = sys.project(&s0, o.projection_tol, o.projection_max_iter)?;
    }
    let traj = evolve_field(&sys, &s0, h, s.t_end, &options(s, None))?;
    Ok((sys, traj))
}

/// Trajectory and diagnostics tables of a field run.
pub fn field_tables(s: &Settings, f: &FieldBuiltin, sys: &CauchySystem, traj: &FieldTrajectory) -> (Table, Table) {
    let names = f.lagrangian.space().fiber_names();
    let (nb, k) = (sys.grid().nb(), sys.k());
    let mut header = vec!["t".to_string()];
    for suffix in ["", "_t"] {
        for j in 0..nb {
            header.extend(names.iter().map(|n| format!("{n}{suffix}[{j}]")));
        }
    }
    if s.multipliers {
        for j in 0..nb {
            header.extend((1..=k).map(|a| format!("lambda{a}[{j}]")));
        }
    }
    if s.energy {
        header.push("E".into());
    }
    let mut dheader = vec!["t".to_string(), "max_abs_Phi".into(), "energy".into()];
    if f.exact.is_some() {
        header.push("linf_error".into());
        dheader.push("linf_error".into());
    }
    let mut main = Table::new(header);
    let mut diag = Table::new(dheader);
    for ((t, st), d) in traj.times.iter().zip(&traj.states).zip(&traj.diagnostics) {
        let err = f.exact.map(|e| nhfield_core::cauchy::state_error(sys.grid(), st, e));
        let mut row = vec![*t];
        row.extend(st.y.iter());
        row.extend(st.v.iter());
        if s.multipliers {
            row.extend(d.multipliers.iter());
        }
        if s.energy {
            row.push(d.energy);
        }
        row.extend(err);
        main.push(row);
        let phi = d.constraint_residuals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let mut drow = vec![*t, phi, d.energy];
        drow.extend(err);
        diag.push(drow);
    }
    (main, diag)
}

/// Seeded test variations with independent uniform node values.
pub fn random_variations(m: usize, nb: usize, count: usize, seed: u64) -> Vec<FieldVariation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let dy = DMatrix::from_fn(m, nb, |_, _| rng.random_range(-1.0..1.0));
            let dv = DMatrix::from_fn(m, nb, |_, _| rng.random_range(-1.0..1.0));
            FieldVariation::new(dy, dv)
        })
        .collect()
}

/// The recorded sample closest to mid-run that has neighbours on both sides.
fn mid_sample(traj: &FieldTrajectory) -> Option<f64> {
    let n = traj.times.len();
    if n < 3 {
        return None;
    }
    let target = traj.times[n - 1] / 2.0;
    (1..n - 1)
        .map(|i| traj.times[i])
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
}

fn eq20_at_mid(s: &Settings, sys: &CauchySystem, traj: &FieldTrajectory) -> Result<(f64, f64), Failure> {
    let t = mid_sample(traj).ok_or_else(|| Failure::Config("too few samples for the mid-run residual".into()))?;
    let vars = random_variations(sys.m(), sys.grid().nb(), EQ20_VARIATIONS, s.seed);
    Ok((t, dedonder_residual_20(sys, traj, t, &vars)?))
}

fn save_all(dir: &Path, files: &[(String, &Table)]) -> Result<Vec<PathBuf>, Failure> {
    std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    let mut written = Vec::new();
    for (name, table) in files {
        let path = dir.join(name);
        table.save(&path).map_err(|e| io_failure(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(feature = "plot")]
fn maybe_plot(s: &Settings, table: &Table, columns: &[String]) -> Result<Option<PathBuf>, Failure> {
    if !s.plot {
        return Ok(None);
    }
    let path = s.out_dir.join(format!("{}.svg", s.model));
    plot::line_chart(&path, table, columns).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    Ok(Some(path))
}

#[cfg(not(feature = "plot"))]
fn maybe_plot(_s: &Settings, _table: &Table, _columns: &[String]) -> Result<Option<PathBuf>, Failure> {
    Ok(None)
}

fn require_plot_support(s: &Settings) -> Result<(), Failure> {
    if s.plot && !cfg!(feature = "plot") {
        return Err(Failure::Config(
            "this build has no plot support (enable the `plot` feature)".into(),
        ));
    }
    Ok(())
}

/// Runs a model and writes `<model>.csv` and `<model>_diagnostics.csv`
/// (plus `<model>_eq20.csv` when requested) into the output directory.
pub fn cmd_simulate(s: &Settings) -> Result<String, Failure> {
    let model = load_model(s)?;
    require_plot_support(s)?;
    let mut report = String::new();
    let (main, diag, extra, plotted) = match &model {
        Builtin::Mechanical(m) => {
            if s.eq20_residual {
                return Err(Failure::Config("eq20_residual applies to field models only".into()));
            }
            let traj = integrate(
                &m.lagrangian,
                &m.constraints,
                &mech_initial(s, m)?,
                s.h,
                s.t_end,
                &options(s, m.mobility.clone()),
            )?;
            let (main, diag) = mechanical_tables(s, m, &traj);
            let _ = writeln!(report, "model {}: {} samples, t_end = {}", s.model, traj.len(), s.t_end);
            let _ = writeln!(report, "max |Phi| = {:e}", traj.max_constraint_residual());
            let _ = writeln!(report, "max |E - E0| = {:e}", traj.max_energy_drift());
            let plotted: Vec<String> = m.lagrangian.space().fiber_names().to_vec();
            (main, diag, None, plotted)
        }
        Builtin::Field(f) => {
            let (sys, traj) = run_field(s, f, s.nb, s.h)?;
            let (main, diag) = field_tables(s, f, &sys, &traj);
            let _ = writeln!(
                report,
                "model {}: N_b = {}, {} samples, t_end = {}",
                s.model,
                s.nb,
                traj.times.len(),
                s.t_end
            );
            let _ = writeln!(report, "max |Phi| = {:e}", traj.max_constraint_residual());
            if let Some(e) = f.exact {
                let _ = writeln!(report, "L-infinity error vs exact = {:e}", traj.linf_error(e));
            }
            let extra = if s.eq20_residual {
                let (t, r) = eq20_at_mid(s, &sys, &traj)?;
                let _ = writeln!(
                    report,
                    "field residual at t = {t}: {r:e} ({EQ20_VARIATIONS} variations, seed {})",
                    s.seed
                );
                let mut table = Table::new(vec!["t_probe".into(), "residual".into()]);
                table.push(vec![t, r]);
                Some(table)
            } else {
                None
            };
            let plotted = vec!["max_abs_Phi".to_string(), "energy".into()];
            (main, diag, extra, plotted)
        }
    };
    let mut files = vec![
        (format!("{}.csv", s.model), &main),
        (format!("{}_diagnostics.csv", s.model), &diag),
    ];
    if let Some(t) = &extra {
        files.push((format!("{}_eq20.csv", s.model), t));
    }
    for p in save_all(&s.out_dir, &files)? {
        let _ = writeln!(report, "wrote {}", p.display());
    }
    let source = if matches!(model, Builtin::Mechanical(_)) {
        &main
    } else {
        &diag
    };
    if let Some(p) = maybe_plot(s, source, &plotted)? {
        let _ = writeln!(report, "wrote {}", p.display());
    }
    Ok(report)
}

/// Seeded random jets around the model's typical scale.
fn probe_jets(space: &nhfield_core::FiberedSpace, count: usize, seed: u64) -> Vec<JetPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| JetPoint {
            x: DVector::from_fn(space.n(), |_, _| rng.random_range(-1.0..1.0)),
            y: DVector::from_fn(space.m(), |_, _| rng.random_range(-1.0..1.0)),
            z: DMatrix::from_fn(space.m(), space.n(), |_, _| rng.random_range(-1.0..1.0)),
        })
        .collect()
}

/// One line of the check table.
struct CheckLine {
    item: String,
    value: String,
    status: &'static str,
    failed: bool,
}

/// Regularity reports and derivative cross-checks; fails with exit 4 if
/// any check fails without a waiver.
pub fn cmd_check(s: &Settings) -> Result<String, Failure> {
    let model = load_model(s)?;
    let (lagrangian, constraints) = (model.lagrangian(), model.constraints());
    let space = lagrangian.space();
    let mut probes = probe_jets(space, 20, s.seed);
    if let Builtin::Mechanical(m) = &model {
        probes.insert(0, m.initial.to_jet());
    }
    let mut lines = Vec::new();

    let d = check_derivatives(lagrangian, &probes, CHECK_RTOL)?;
    for p in &d.partials {
        lines.push(CheckLine {
            item: format!("derivative {}", p.partial),
            value: format!("{:.3e}", p.max_discrepancy),
            status: if p.passed { "ok" } else { "FAIL" },
            failed: !p.passed,
        });
    }
    let sym = d.max_asymmetry <= nhfield_core::DerivativeCheck::SYMMETRY_TOL;
    lines.push(CheckLine {
        item: "Hessian symmetry".into(),
        value: format!("{:.3e}", d.max_asymmetry),
        status: if sym { "ok" } else { "FAIL" },
        failed: !sym,
    });
    if constraints.k() > 0 {
        let disc = constraints.jacobian_discrepancy(&probes)?;
        let ok = disc <= CHECK_RTOL;
        lines.push(CheckLine {
            item: "constraint jacobians".into(),
            value: format!("{disc:.3e}"),
            status: if ok { "ok" } else { "FAIL" },
            failed: !ok,
        });
    }

    let reg = hessian_regularity(lagrangian, &probes[0], REGULARITY_TOL)?;
    let mut line = CheckLine {
        item: "Hessian".into(),
        value: format!(
            "min sv {:.3e}, {} vanishing",
            reg.min_singular_value,
            reg.vanishing_count()
        ),
        status: "regular",
        failed: false,
    };
    if !reg.regular {
        // Degenerate Lagrangians are acceptable when the constrained system
        // is still solvable for the accelerations.
        let augmented_ok = match &model {
            Builtin::Mechanical(m) if m.constraints.k() > 0 => probes.iter().all(|p| {
                let st = MechState {
                    t: p.x[0],
                    q: p.y.clone(),
                    qdot: p.z.column(0).into_owned(),
                };
                multiplier_solve(
                    &m.lagrangian,
                    &m.constraints,
                    &st,
                    nhfield_core::mechanics::DEFAULT_SOLVE_TOL,
                )
                .is_ok()
            }),
            _ => false,
        };
        line.status = if augmented_ok {
            "degenerate (waived: augmented system regular)"
        } else {
            "degenerate"
        };
        line.failed = !augmented_ok;
    }
    lines.push(line);

    if constraints.k() > 0 {
        let mut worst: Option<nhfield_core::ConstraintRegularity> = None;
        for p in &probes {
            let r = constraint_regularity(constraints, p, REGULARITY_TOL)?;
            if worst
                .as_ref()
                .is_none_or(|w| r.min_singular_value < w.min_singular_value)
            {
                worst = Some(r);
            }
        }
        let r = worst.expect("at least one probe");
        lines.push(CheckLine {
            item: "constraints".into(),
            value: format!(
                "rank {}/{}, min sv {:.3e}",
                r.rank,
                constraints.k(),
                r.min_singular_value
            ),
            status: if r.independent { "independent" } else { "dependent" },
            failed: !r.independent,
        });
    }

    let width = lines.iter().map(|l| l.item.chars().count()).max().unwrap_or(0);
    let vwidth = lines.iter().map(|l| l.value.chars().count()).max().unwrap_or(0);
    let mut report = format!("model {} ({} probes, seed {})\n", s.model, probes.len(), s.seed);
    for l in &lines {
        let pad = width - l.item.chars().count();
        let vpad = vwidth - l.value.chars().count();
        let _ = writeln!(
            report,
            "  {}{}  {}{}  {}",
            l.item,
            " ".repeat(pad),
            l.value,
            " ".repeat(vpad),
            l.status
        );
    }
    let failed: Vec<&str> = lines.iter().filter(|l| l.failed).map(|l| l.item.as_str()).collect();
    if failed.is_empty() {
        Ok(report)
    } else {
        print!("{report}");
        Err(Failure::Check(format!("failed checks: {}", failed.join(", "))))
    }
}

/// `log2(a / b)`, the observed order between two successive halvings.
pub fn observed_order(a: f64, b: f64) -> f64 {
    (a / b).log2()
}

fn order_cell(prev: Option<f64>, cur: f64) -> String {
    match prev {
        Some(p) => format!("{:.3}", observed_order(p, cur)),
        None => "-".into(),
    }
}

/// Below this a measured error or drift is rounding noise and orders taken
/// from it say nothing.
const ROUNDING_FLOOR: f64 = 1e-12;

/// Resolutions run in parallel; results keep the input order.
fn parallel<T: Send, R: Send>(inputs: Vec<T>, f: impl Fn(T) -> R + Sync) -> Vec<R> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = inputs.into_iter().map(|x| scope.spawn(|| f(x))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// Halves `h` (mechanical models) or doubles `N_b` (field models) `levels − 1`
/// times and prints observed orders; writes `<model>_convergence.csv`.
pub fn cmd_convergence(s: &Settings) -> Result<String, Failure> {
    if s.levels < 3 {
        return Err(Failure::Config(format!("need ≥ 3 resolutions, got {}", s.levels)));
    }
    let model = load_model(s)?;
    let mut report = String::new();
    let table = match &model {
        Builtin::Mechanical(m) => {
            let hs: Vec<f64> = (0..s.levels).map(|i| s.h / 2f64.powi(i as i32)).collect();
            let s0 = mech_initial(s, m)?;
            let runs = parallel(hs.clone(), |h| {
                integrate(
                    &m.lagrangian,
                    &m.constraints,
                    &s0,
                    h,
                    s.t_end,
                    &options(s, m.mobility.clone()),
                )
            });
            let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
            let _ = writeln!(report, "model {}: step halving over t in [0, {}]", s.model, s.t_end);
            let _ = writeln!(
                report,
                "{:>12}  {:>12}  {:>8}  {:>12}  {:>8}",
                "h", "drift", "order", "self-diff", "order"
            );
            let mut table = Table::new(vec!["h".into(), "drift".into(), "final_state_difference".into()]);
            let mut prev_drift = None;
            let mut prev_diff = None;
            let finals: Vec<DVector<f64>> = runs
                .iter()
                .map(|t| {
                    let last = t.states.last().expect("non-empty trajectory");
                    DVector::from_iterator(2 * last.dim(), last.q.iter().chain(last.qdot.iter()).copied())
                })
                .collect();
            for (i, (h, traj)) in hs.iter().zip(&runs).enumerate() {
                let drift = traj.max_constraint_residual();
                let diff = if i + 1 < finals.len() {
                    (&finals[i] - &finals[i + 1]).amax()
                } else {
                    f64::NAN
                };
                let drift_order = if m.constraints.k() > 0 {
                    order_cell(prev_drift, drift)
                } else {
                    "-".into()
                };
                let diff_order = if diff.is_nan() {
                    "-".into()
                } else {
                    order_cell(prev_diff, diff)
                };
                let diff_cell = if diff.is_nan() {
                    "-".to_string()
                } else {
                    format!("{diff:.3e}")
                };
                let _ = writeln!(
                    report,
                    "{h:>12.4e}  {drift:>12.3e}  {drift_order:>8}  {diff_cell:>12}  {diff_order:>8}"
                );
                table.push(vec![*h, drift, diff]);
                prev_drift = Some(drift);
                if !diff.is_nan() {
                    prev_diff = Some(diff);
                }
            }
            let drifts: Vec<f64> = runs.iter().map(|t| t.max_constraint_residual()).collect();
            if m.constraints.k() > 0 && drifts.iter().all(|d| *d < ROUNDING_FLOOR) {
                let _ = writeln!(
                    report,
                    "constraint drift is at rounding level; its order is not measurable"
                );
            }
            table
        }
        Builtin::Field(f) => {
            let nbs: Vec<usize> = (0..s.levels).map(|i| s.nb << i).collect();
            let runs = parallel(nbs.clone(), |nb| run_field(s, f, nb, s.h));
            let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
            let _ = writeln!(
                report,
                "model {}: grid doubling, h = {}, t_end = {}",
                s.model, s.h, s.t_end
            );
            let mut header = vec!["Nb".to_string(), "drift".into(), "eq20_residual".into()];
            if f.exact.is_some() {
                header.push("linf_error".into());
            }
            let _ = writeln!(
                report,
                "{:>6}  {:>12}  {:>12}  {:>8}{}",
                "N_b",
                "drift",
                "residual",
                "order",
                if f.exact.is_some() {
                    format!("  {:>12}  {:>8}", "error", "order")
                } else {
                    String::new()
                }
            );
            let mut table = Table::new(header);
            let (mut prev_r, mut prev_e) = (None, None);
            for (nb, (sys, traj)) in nbs.iter().zip(&runs) {
                let (_, r) = eq20_at_mid(s, sys, traj)?;
                let drift = traj.max_constraint_residual();
                let mut row = vec![*nb as f64, drift, r];
                let mut line = format!("{nb:>6}  {drift:>12.3e}  {r:>12.3e}  {:>8}", order_cell(prev_r, r));
                if let Some(e) = f.exact {
                    let err = traj.linf_error(e);
                    let _ = write!(line, "  {err:>12.3e}  {:>8}", order_cell(prev_e, err));
                    row.push(err);
                    prev_e = Some(err);
                }
                let _ = writeln!(report, "{line}");
                table.push(row);
                prev_r = Some(r);
            }
            table
        }
    };
    for p in save_all(&s.out_dir, &[(format!("{}_convergence.csv", s.model), &table)])? {
        let _ = writeln!(report, "wrote {}", p.display());
    }
    Ok(report)
}
