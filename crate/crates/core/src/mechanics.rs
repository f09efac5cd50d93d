//! Mechanics on a one-dimensional base: the multiplier solve, velocity
//! projection and fixed-step RK4 integration.
//!
//! With `x = (t)`, `y = q` and `z = q̇`, the constrained Euler–Lagrange
//! equations together with the differentiated constraints form the square
//! system
//!
//! ```text
//! [ W  −Aᵀ ] [ q̈ ]   [  F ]
//! [ A   0  ] [ λ  ] = [ −c ]
//! ```
//!
//! with `W = ∂²L/∂q̇∂q̇`, `A = ∂Φ/∂q̇`, `F = ∂L/∂q − ∂²L/∂t∂q̇ − (∂²L/∂q∂q̇)ᵀq̇`
//! and `c = (∂Φ/∂q)q̇ + ∂Φ/∂t`. `W` may be singular as long as the whole
//! matrix is not.

use nalgebra::{DMatrix, DVector};

use crate::constraints::{self, ConstraintSet, DEFAULT_RANK_TOL};
use crate::error::{Degeneracy, Error, Result};
use crate::jet::{eval_derivatives, DerivativeBundle, JetPoint, LagrangianModel};
use crate::linalg;

pub const DEFAULT_SOLVE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MechState {
    pub t: f64,
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
}

impl MechState {
    pub fn new(t: f64, q: Vec<f64>, qdot: Vec<f64>) -> Self {
        Self {
            t,
            q: DVector::from_vec(q),
            qdot: DVector::from_vec(qdot),
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn to_jet(&self) -> JetPoint {
        JetPoint {
            x: DVector::from_element(1, self.t),
            y: self.q.clone(),
            z: DMatrix::from_column_slice(self.qdot.len(), 1, self.qdot.as_slice()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.q.iter().chain(self.qdot.iter()).all(|v| v.is_finite())
    }

    fn check(&self, m: usize) -> Result<()> {
        if self.q.len() != m || self.qdot.len() != m {
            return Err(Error::shape(format!(
                "state has q:{}, qdot:{}; the model has m={m}",
                self.q.len(),
                self.qdot.len()
            )));
        }
        if !self.is_finite() {
            return Err(Error::NonFinite {
                quantity: "state",
                probe: format!("{self:?}"),
            });
        }
        Ok(())
    }
}

/// The assembled multiplier system at one state.
#[derive(Debug, Clone)]
pub struct KktSystem {
    pub w: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub f: DVector<f64>,
    pub c: DVector<f64>,
    pub derivatives: DerivativeBundle,
    pub phi: DVector<f64>,
}

impl KktSystem {
    pub fn m(&self) -> usize {
        self.w.nrows()
    }

    pub fn k(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let (m, k) = (self.m(), self.k());
        let mut kkt = DMatrix::zeros(m + k, m + k);
        kkt.view_mut((0, 0), (m, m)).copy_from(&self.w);
        kkt.view_mut((0, m), (m, k)).copy_from(&(-self.a.transpose()));
        kkt.view_mut((m, 0), (k, m)).copy_from(&self.a);
        kkt
    }

    pub fn rhs(&self) -> DVector<f64> {
        let mut r = DVector::zeros(self.m() + self.k());
        r.rows_mut(0, self.m()).copy_from(&self.f);
        r.rows_mut(self.m(), self.k()).copy_from(&(-&self.c));
        r
    }

    /// `W q̈ − Aᵀλ − F`.
    pub fn dynamics_residual(&self, qddot: &DVector<f64>, lambda: &DVector<f64>) -> DVector<f64> {
        &self.w * qddot - self.a.tr_mul(lambda) - &self.f
    }

    /// `A q̈ + c`.
    pub fn constraint_residual(&self, qddot: &DVector<f64>) -> DVector<f64> {
        &self.a * qddot + &self.c
    }

    /// `E = q̇·∂L/∂q̇ − L`.
    pub fn energy(&self, qdot: &DVector<f64>) -> f64 {
        qdot.dot(&self.derivatives.dl_dz) - self.derivatives.value
    }
}

pub fn assemble_kkt(model: &LagrangianModel, cs: &ConstraintSet, s: &MechState) -> Result<KktSystem> {
    let space = model.space();
    if space.n() != 1 {
        return Err(Error::shape(format!(
            "mechanics needs a one-dimensional base, got n={}",
            space.n()
        )));
    }
    if !cs.space().same_dims(space) {
        return Err(Error::shape("Lagrangian and constraints live on different spaces"));
    }
    s.check(space.m())?;
    let p = s.to_jet();
    let derivatives = eval_derivatives(model, &p)?;
    let phi = cs.eval(&p)?;
    let a = cs.jacobian_z(&p)?;
    let c = cs.jacobian_y(&p)? * &s.qdot + cs.jacobian_x(&p)?.column(0);
    let f = &derivatives.dl_dy - derivatives.mixed_xz.row(0).transpose() - derivatives.mixed_yz.tr_mul(&s.qdot);
    Ok(KktSystem {
        w: derivatives.hessian_zz.clone(),
        a,
        f,
        c,
        derivatives,
        phi,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSolution {
    pub qddot: DVector<f64>,
    pub lambda: DVector<f64>,
    /// Max-norm of the residual of the full linear system.
    pub kkt_residual: f64,
    /// Max-norm of `A q̈ + c`.
    pub constraint_accel_residual: f64,
}

/// Solves for accelerations and multipliers at `s`.
///
/// The matrix counts as singular when its singular-value ratio is at or
/// below `tol`.
pub fn multiplier_solve(
    model: &LagrangianModel,
    cs: &ConstraintSet,
    s: &MechState,
    tol: f64,
) -> Result<MultiplierSolution> {
    let kkt = assemble_kkt(model, cs, s)?;
    solve_kkt(&kkt, s, tol)
}

pub fn solve_kkt(kkt: &KktSystem, s: &MechState, tol: f64) -> Result<MultiplierSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "solver tolerance must be positive, got {tol}"
        )));
    }
    let x = match schur_solve(kkt) {
        Some(x) => x,
        None => dense_solve(kkt, s, tol)?,
    };
    let m = kkt.m();
    let qddot = x.rows(0, m).into_owned();
    let lambda = x.rows(m, kkt.k()).into_owned();
    let r1 = kkt.dynamics_residual(&qddot, &lambda);
    let r2 = kkt.constraint_residual(&qddot);
    let kkt_residual = linalg::max_abs(&r1).max(linalg::max_abs(&r2));
    if !kkt_residual.is_finite() {
        return Err(Error::NonFinite {
            quantity: "multiplier solution",
            probe: format!("{s:?}"),
        });
    }
    Ok(MultiplierSolution {
        qddot,
        lambda,
        kkt_residual,
        constraint_accel_residual: linalg::max_abs(&r2),
    })
}

/// Block elimination when `W` is diagonal and comfortably invertible:
/// `(A W⁻¹ Aᵀ) λ = −c − A W⁻¹ F`, then `q̈ = W⁻¹ (F + Aᵀλ)`.
fn schur_solve(kkt: &KktSystem) -> Option<DVector<f64>> {
    let m = kkt.m();
    let w = &kkt.w;
    let diag = w.diagonal();
    let largest = linalg::max_abs(&diag);
    if largest == 0.0 || diag.iter().any(|d| d.abs() <= 1e-8 * largest) {
        return None;
    }
    for j in 0..m {
        for i in 0..m {
            if i != j && w[(i, j)] != 0.0 {
                return None;
            }
        }
    }
    let inv = diag.map(|d| 1.0 / d);
    let mut winv_at = kkt.a.transpose();
    for (i, mut row) in winv_at.row_iter_mut().enumerate() {
        row *= inv[i];
    }
    let schur = &kkt.a * &winv_at;
    let chol = if kkt.k() > 0 {
        let chol = schur.clone().cholesky()?;
        let l = chol.l_dirty().diagonal();
        let (lo, hi) = l.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| {
            (lo.min(v.abs()), hi.max(v.abs()))
        });
        // Pivot ratio of L is roughly the square root of the condition ratio of S.
        if !(lo > 1e-5 * hi) {
            return None;
        }
        Some(chol)
    } else {
        None
    };
    let solve = |top: &DVector<f64>, bottom: &DVector<f64>| -> DVector<f64> {
        // W q̈ − Aᵀλ = top, A q̈ = bottom.
        let wt = top.component_mul(&inv);
        let lambda = match &chol {
            Some(c) => c.solve(&(bottom - &kkt.a * &wt)),
            None => DVector::zeros(0),
        };
        let qddot = (top + kkt.a.tr_mul(&lambda)).component_mul(&inv);
        let mut x = DVector::zeros(m + kkt.k());
        x.rows_mut(0, m).copy_from(&qddot);
        x.rows_mut(m, kkt.k()).copy_from(&lambda);
        x
    };
    let neg_c = -&kkt.c;
    let mut x = solve(&kkt.f, &neg_c);
    let (q, l) = (x.rows(0, m).into_owned(), x.rows(m, kkt.k()).into_owned());
    let r1 = kkt.f.clone() - (&kkt.w * &q - kkt.a.tr_mul(&l));
    let r2 = &neg_c - &kkt.a * &q;
    x += solve(&r1, &r2);
    Some(x)
}

fn dense_solve(kkt: &KktSystem, s: &MechState, tol: f64) -> Result<DVector<f64>> {
    let matrix = kkt.matrix();
    let rhs = kkt.rhs();
    let lu = matrix.clone().lu();
    let u = lu.u();
    let pivots = u.diagonal();
    let (lo, hi) = pivots.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| {
        (lo.min(v.abs()), hi.max(v.abs()))
    });
    let suspicious = pivots.is_empty() || !(lo > tol * hi);
    if suspicious {
        let svd = matrix.clone().svd(false, true);
        let sv = &svd.singular_values;
        let (mut imin, mut smin, mut smax) = (0, f64::INFINITY, 0.0_f64);
        for (i, &v) in sv.iter().enumerate() {
            if v < smin {
                smin = v;
                imin = i;
            }
            smax = smax.max(v);
        }
        if !(smin > tol * smax) {
            let reg = constraints::regularity_of(&kkt.a, DEFAULT_RANK_TOL);
            if !reg.independent {
                return Err(Error::DependentConstraints {
                    t: s.t,
                    rank: reg.rank,
                    count: kkt.k(),
                    min_singular_value: reg.min_singular_value,
                });
            }
            let v_t = svd.v_t.expect("right singular vectors requested");
            return Err(Error::DegenerateSystem(Box::new(Degeneracy {
                t: s.t,
                q: s.q.iter().copied().collect(),
                qdot: s.qdot.iter().copied().collect(),
                min_singular_value: smin,
                max_singular_value: smax,
                weakest_direction: v_t.row(imin).iter().copied().collect(),
                stage: None,
                nodes: Vec::new(),
            })));
        }
    }
    let mut x = lu.solve(&rhs).ok_or_else(|| {
        Error::DegenerateSystem(Box::new(Degeneracy {
            t: s.t,
            q: s.q.iter().copied().collect(),
            qdot: s.qdot.iter().copied().collect(),
            min_singular_value: 0.0,
            max_singular_value: hi,
            weakest_direction: Vec::new(),
            stage: None,
            nodes: Vec::new(),
        }))
    })?;
    let r = &rhs - &matrix * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    Ok(x)
}

fn max_violation(cs: &ConstraintSet, s: &MechState) -> Result<f64> {
    Ok(linalg::max_abs(&cs.eval(&s.to_jet())?))
}

/// Adjusts `qdot` (never `q`) until `max|Φ| ≤ tol`, by Gauss–Newton steps
/// with the pseudoinverse of `∂Φ/∂q̇`.
pub fn project_state(cs: &ConstraintSet, s: &MechState, tol: f64, max_iter: usize) -> Result<MechState> {
    project_state_weighted(cs, s, None, tol, max_iter)
}

/// As [`project_state`], with a nonnegative mobility per velocity: the step
/// minimises `Σ δ_i² / d_i` over velocities with `d_i > 0` and leaves those
/// with `d_i = 0` untouched.
pub fn project_state_weighted(
    cs: &ConstraintSet,
    s: &MechState,
    mobility: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<MechState> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "projection tolerance must be positive, got {tol}"
        )));
    }
    s.check(cs.space().m())?;
    let m = s.dim();
    let scale = match mobility {
        Some(d) => {
            if d.len() != m || d.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::InvalidArgument(format!(
                    "mobility must be {m} nonnegative values"
                )));
            }
            DVector::from_iterator(m, d.iter().map(|v| v.sqrt()))
        }
        None => DVector::from_element(m, 1.0),
    };
    let mut out = s.clone();
    let mut residual = max_violation(cs, &out)?;
    let mut iterations = 0;
    while residual > tol {
        if iterations == max_iter {
            return Err(Error::ProjectionFailed { iterations, residual });
        }
        let p = out.to_jet();
        let r = cs.eval(&p)?;
        let mut a = cs.jacobian_z(&p)?;
        for (j, mut col) in a.column_iter_mut().enumerate() {
            col *= scale[j];
        }
        let svd = a.svd(true, true);
        let cutoff = 1e-14 * svd.singular_values.max();
        let step = svd
            .solve(&r, cutoff)
            .map_err(|_| Error::ProjectionFailed { iterations, residual })?;
        out.qdot -= step.component_mul(&scale);
        iterations += 1;
        residual = max_violation(cs, &out)?;
        if !residual.is_finite() {
            return Err(Error::ProjectionFailed { iterations, residual });
        }
    }
    Ok(out)
}

fn with_stage(err: Error, stage: usize) -> Error {
    match err {
        Error::DegenerateSystem(mut d) => {
            d.stage = Some(stage);
            Error::DegenerateSystem(d)
        }
        other => other,
    }
}

fn advanced(s: &MechState, h: f64, dq: &DVector<f64>, dv: &DVector<f64>) -> MechState {
    MechState {
        t: s.t + h,
        q: &s.q + dq * h,
        qdot: &s.qdot + dv * h,
    }
}

/// One classical RK4 step. `first` may carry the stage-1 solve at `s`.
pub(crate) fn rk4(
    model: &LagrangianModel,
    cs: &ConstraintSet,
    s: &MechState,
    h: f64,
    tol: f64,
    first: Option<&MultiplierSolution>,
) -> Result<MechState> {
    let accel = |state: &MechState, stage: usize| -> Result<DVector<f64>> {
        multiplier_solve(model, cs, state, tol)
            .map(|sol| sol.qddot)
            .map_err(|e| with_stage(e, stage))
    };
    let a1 = match first {
        Some(sol) => sol.qddot.clone(),
        None => accel(s, 1)?,
    };
    let v1 = s.qdot.clone();
    let s2 = advanced(s, h / 2.0, &v1, &a1);
    let a2 = accel(&s2, 2)?;
    let v2 = s2.qdot.clone();
    let s3 = advanced(s, h / 2.0, &v2, &a2);
    let a3 = accel(&s3, 3)?;
    let v3 = s3.qdot.clone();
    let s4 = advanced(s, h, &v3, &a3);
    let a4 = accel(&s4, 4)?;
    let v4 = s4.qdot.clone();
    let dq = (v1 + (v2 + v3) * 2.0 + v4) / 6.0;
    let dv = (a1 + (a2 + a3) * 2.0 + a4) / 6.0;
    Ok(advanced(s, h, &dq, &dv))
}

pub fn step_rk4(model: &LagrangianModel, cs: &ConstraintSet, s: &MechState, h: f64) -> Result<MechState> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {h}")));
    }
    rk4(model, cs, s, h, DEFAULT_SOLVE_TOL, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions {
    pub project_each_step: bool,
    pub record_every: usize,
    pub drift_ceiling: f64,
    pub solve_tol: f64,
    pub projection_tol: f64,
    pub projection_max_iter: usize,
    /// Largest `max|Φ|` accepted at the initial state when not projecting.
    pub consistency_tol: f64,
    /// Velocity mobility for the projection; `None` treats all alike.
    pub mobility: Option<Vec<f64>>,
    pub rank_tol: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            project_each_step: false,
            record_every: 1,
            drift_ceiling: 1e-3,
            solve_tol: DEFAULT_SOLVE_TOL,
            projection_tol: 1e-12,
            projection_max_iter: 50,
            consistency_tol: 1e-10,
            mobility: None,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleDiagnostics {
    pub constraint_residuals: DVector<f64>,
    pub multipliers: DVector<f64>,
    pub qddot: DVector<f64>,
    pub energy: f64,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<MechState>,
    pub diagnostics: Vec<SampleDiagnostics>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&MechState> {
        self.states.last()
    }

    /// `max_t max_α |Φ^α|`.
    pub fn max_constraint_residual(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| linalg::max_abs(&d.constraint_residuals))
            .fold(0.0, f64::max)
    }

    /// `max_t |E(t) − E(t₀)|`.
    pub fn max_energy_drift(&self) -> f64 {
        let Some(e0) = self.diagnostics.first().map(|d| d.energy) else {
            return 0.0;
        };
        self.diagnostics
            .iter()
            .map(|d| (d.energy - e0).abs())
            .fold(0.0, f64::max)
    }
}

/// Number of steps of size `h` from 0 to `t_end`; the ratio must be integral.
pub fn step_count(h: f64, t_end: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {h}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_end must be positive, got {t_end}")));
    }
    let n = (t_end / h).round();
    if n < 1.0 || (n * h - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "t_end={t_end} is not a whole number of steps h={h}"
        )));
    }
    Ok(n as usize)
}

fn check_regularity(a: &DMatrix<f64>, t: f64, rank_tol: f64) -> Result<()> {
    let k = a.nrows();
    if k == 0 {
        return Ok(());
    }
    let gram = a * a.transpose();
    if let Some(chol) = gram.cholesky() {
        let l = chol.l_dirty().diagonal();
        let (lo, hi) = l.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| {
            (lo.min(v.abs()), hi.max(v.abs()))
        });
        if lo > 1e-4 * hi {
            return Ok(());
        }
    }
    let reg = constraints::regularity_of(a, rank_tol);
    if reg.independent {
        Ok(())
    } else {
        Err(Error::DependentConstraints {
            t,
            rank: reg.rank,
            count: k,
            min_singular_value: reg.min_singular_value,
        })
    }
}

/// Integrates from `s0` over `[s0.t, s0.t + t_end]` with fixed step `h`.
pub fn integrate(
    model: &LagrangianModel,
    cs: &ConstraintSet,
    s0: &MechState,
    h: f64,
    t_end: f64,
    options: &IntegrateOptions,
) -> Result<Trajectory> {
    let steps = step_count(h, t_end)?;
    if options.record_every == 0 {
        return Err(Error::InvalidArgument("record_every must be at least 1".into()));
    }
    if !(options.drift_ceiling > 0.0) {
        return Err(Error::InvalidArgument("drift ceiling must be positive".into()));
    }
    s0.check(model.space().m())?;
    let project = |s: &MechState| {
        project_state_weighted(
            cs,
            s,
            options.mobility.as_deref(),
            options.projection_tol,
            options.projection_max_iter,
        )
    };
    let mut s = if options.project_each_step {
        project(s0)?
    } else {
        let residual = max_violation(cs, s0)?;
        if residual > options.consistency_tol {
            return Err(Error::InconsistentState {
                residual,
                allowed: options.consistency_tol,
            });
        }
        s0.clone()
    };

    let t0 = s0.t;
    let capacity = steps / options.record_every + 2;
    let mut traj = Trajectory {
        times: Vec::with_capacity(capacity),
        states: Vec::with_capacity(capacity),
        diagnostics: Vec::with_capacity(capacity),
    };
    for i in 0..=steps {
        let kkt = assemble_kkt(model, cs, &s).map_err(|e| with_stage(e, 1))?;
        let drift = linalg::max_abs(&kkt.phi);
        if drift > options.drift_ceiling {
            return Err(Error::DriftExceeded {
                t: s.t,
                residual: drift,
                ceiling: options.drift_ceiling,
            });
        }
        check_regularity(&kkt.a, s.t, options.rank_tol)?;
        let sol = solve_kkt(&kkt, &s, options.solve_tol).map_err(|e| with_stage(e, 1))?;
        if i % options.record_every == 0 || i == steps {
            traj.times.push(s.t);
            traj.diagnostics.push(SampleDiagnostics {
                constraint_residuals: kkt.phi.clone(),
                multipliers: sol.lambda.clone(),
                qddot: sol.qddot.clone(),
                energy: kkt.energy(&s.qdot),
                kkt_residual: sol.kkt_residual,
            });
            traj.states.push(s.clone());
        }
        if i == steps {
            break;
        }
        let mut next = rk4(model, cs, &s, h, options.solve_tol, Some(&sol))?;
        next.t = t0 + (i + 1) as f64 * h;
        if options.project_each_step {
            next = project(&next)?;
        }
        s = next;
    }
    Ok(traj)
}
