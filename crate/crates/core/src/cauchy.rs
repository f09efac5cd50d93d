//! Field theories on a 1+1 base reduced to mechanics on a Cauchy grid.
//!
//! Fields are sampled at the nodes of a grid over `B`. The induced
//! Lagrangian is a quadrature of `L` over one-sided jets: every node carries
//! two terms of weight `Δb/2`, one with the forward and one with the backward
//! difference as `z₁`. The induced constraints average `Φ` over the same two
//! jets, one row per `(node, α)`. On fixed-value grids the boundary points
//! are not unknowns; they enter as ghost values with zero velocity and carry
//! half-weight trapezoid terms of their own.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::jet::{eval_derivatives, FiberedSpace, JetPoint, LagrangianModel};
use crate::mechanics::{integrate, project_state_weighted, IntegrateOptions, MechState, SampleDiagnostics};
use crate::models::{ExactField, FieldProfile};

#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    Periodic,
    /// Field values held at `b = 0` and `b = Lb`, one per fiber component.
    Fixed {
        left: Vec<f64>,
        right: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CauchyGrid {
    lb: f64,
    nb: usize,
    boundary: Boundary,
}

impl CauchyGrid {
    pub const MIN_NODES: usize = 4;

    pub fn new(lb: f64, nb: usize, boundary: Boundary) -> Result<Self> {
        if !(lb > 0.0 && lb.is_finite()) {
            return Err(Error::Construction(format!("extent Lb must be positive, got {lb}")));
        }
        if nb < Self::MIN_NODES {
            return Err(Error::Construction(format!(
                "need N_b >= {}, got {nb}",
                Self::MIN_NODES
            )));
        }
        if let Boundary::Fixed { left, right } = &boundary {
            if left.iter().chain(right).any(|v| !v.is_finite()) {
                return Err(Error::Construction("boundary values must be finite".into()));
            }
        }
        Ok(Self { lb, nb, boundary })
    }

    pub fn periodic(lb: f64, nb: usize) -> Result<Self> {
        Self::new(lb, nb, Boundary::Periodic)
    }

    pub fn lb(&self) -> f64 {
        self.lb
    }

    pub fn nb(&self) -> usize {
        self.nb
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.boundary, Boundary::Periodic)
    }

    /// `Lb/N_b` on periodic grids, `Lb/(N_b + 1)` between fixed ends.
    pub fn spacing(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.lb / self.nb as f64,
            Boundary::Fixed { .. } => self.lb / (self.nb + 1) as f64,
        }
    }

    pub fn node_position(&self, j: usize) -> f64 {
        match self.boundary {
            Boundary::Periodic => j as f64 * self.spacing(),
            Boundary::Fixed { .. } => (j + 1) as f64 * self.spacing(),
        }
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.nb).map(|j| self.node_position(j)).collect()
    }

    fn check_boundary(&self, m: usize) -> Result<()> {
        if let Boundary::Fixed { left, right } = &self.boundary {
            if left.len() != m || right.len() != m {
                return Err(Error::Construction(format!(
                    "fixed boundary needs {m} values per end, got {} and {}",
                    left.len(),
                    right.len()
                )));
            }
        }
        Ok(())
    }

    /// Quadrature points used by the diagnostics: the nodes, plus both ends
    /// on fixed grids. Returns `(position, weight, node)`.
    fn diagnostic_points(&self) -> Vec<(f64, f64, Option<usize>)> {
        let db = self.spacing();
        match self.boundary {
            Boundary::Periodic => (0..self.nb).map(|j| (self.node_position(j), db, Some(j))).collect(),
            Boundary::Fixed { .. } => {
                let mut pts = vec![(0.0, db / 2.0, None)];
                pts.extend((0..self.nb).map(|j| (self.node_position(j), db, Some(j))));
                pts.push((self.lb, db / 2.0, None));
                pts
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Node(usize),
    Ghost(Side),
}

#[derive(Debug, Clone, Copy)]
struct Term {
    weight: f64,
    b: f64,
    center: Slot,
    fwd: Slot,
    bwd: Slot,
}

fn build_terms(grid: &CauchyGrid) -> Vec<Term> {
    let n = grid.nb;
    let db = grid.spacing();
    let w = db / 2.0;
    let mut terms = Vec::with_capacity(2 * n + 2);
    let periodic = grid.is_periodic();
    let next = |j: usize| {
        if j + 1 < n {
            Slot::Node(j + 1)
        } else if periodic {
            Slot::Node(0)
        } else {
            Slot::Ghost(Side::Right)
        }
    };
    let prev = |j: usize| {
        if j > 0 {
            Slot::Node(j - 1)
        } else if periodic {
            Slot::Node(n - 1)
        } else {
            Slot::Ghost(Side::Left)
        }
    };
    for j in 0..n {
        let b = grid.node_position(j);
        terms.push(Term {
            weight: w,
            b,
            center: Slot::Node(j),
            fwd: next(j),
            bwd: Slot::Node(j),
        });
        terms.push(Term {
            weight: w,
            b,
            center: Slot::Node(j),
            fwd: Slot::Node(j),
            bwd: prev(j),
        });
    }
    if !periodic {
        let left = Slot::Ghost(Side::Left);
        let right = Slot::Ghost(Side::Right);
        terms.push(Term {
            weight: w,
            b: 0.0,
            center: left,
            fwd: Slot::Node(0),
            bwd: left,
        });
        terms.push(Term {
            weight: w,
            b: grid.lb,
            center: right,
            fwd: right,
            bwd: Slot::Node(n - 1),
        });
    }
    terms
}

/// Field values and time velocities at the nodes, `m × N_b` each.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyState {
    pub t: f64,
    pub y: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl CauchyState {
    pub fn new(t: f64, y: DMatrix<f64>, v: DMatrix<f64>) -> Self {
        Self { t, y, v }
    }

    pub fn zeros(m: usize, grid: &CauchyGrid) -> Self {
        Self {
            t: 0.0,
            y: DMatrix::zeros(m, grid.nb),
            v: DMatrix::zeros(m, grid.nb),
        }
    }

    /// Samples a profile at the node positions.
    pub fn from_profile(m: usize, grid: &CauchyGrid, t: f64, profile: FieldProfile) -> Result<Self> {
        let mut s = Self::zeros(m, grid);
        s.t = t;
        for j in 0..grid.nb {
            let (y, v) = profile(grid.node_position(j), grid.lb);
            if y.len() != m || v.len() != m {
                return Err(Error::shape(format!(
                    "profile returned {} / {} values, expected {m}",
                    y.len(),
                    v.len()
                )));
            }
            for i in 0..m {
                s.y[(i, j)] = y[i];
                s.v[(i, j)] = v[i];
            }
        }
        Ok(s)
    }

    pub fn m(&self) -> usize {
        self.y.nrows()
    }

    pub fn nb(&self) -> usize {
        self.y.ncols()
    }

    /// Stacked coordinates, `q[j·m + i] = Y[i][j]`.
    pub fn to_mech(&self) -> MechState {
        MechState {
            t: self.t,
            q: DVector::from_column_slice(self.y.as_slice()),
            qdot: DVector::from_column_slice(self.v.as_slice()),
        }
    }

    pub fn from_mech(m: usize, s: &MechState) -> Result<Self> {
        if m == 0 || !s.q.len().is_multiple_of(m) || s.qdot.len() != s.q.len() {
            return Err(Error::shape(format!(
                "stacked state of length {} does not split into m={m}",
                s.q.len()
            )));
        }
        let nb = s.q.len() / m;
        Ok(Self {
            t: s.t,
            y: DMatrix::from_column_slice(m, nb, s.q.as_slice()),
            v: DMatrix::from_column_slice(m, nb, s.qdot.as_slice()),
        })
    }

    fn check(&self, m: usize, grid: &CauchyGrid) -> Result<()> {
        if self.y.shape() != (m, grid.nb) || self.v.shape() != (m, grid.nb) {
            return Err(Error::shape(format!(
                "Cauchy state is {:?}/{:?}, grid expects ({m}, {})",
                self.y.shape(),
                self.v.shape(),
                grid.nb
            )));
        }
        Ok(())
    }
}

struct Inner {
    grid: CauchyGrid,
    model: LagrangianModel,
    cs: ConstraintSet,
    terms: Vec<Term>,
    m: usize,
    k: usize,
}

impl Inner {
    fn slot_value(&self, q: &DVector<f64>, slot: Slot, i: usize) -> f64 {
        match slot {
            Slot::Node(j) => q[j * self.m + i],
            Slot::Ghost(side) => match (&self.grid.boundary, side) {
                (Boundary::Fixed { left, .. }, Side::Left) => left[i],
                (Boundary::Fixed { right, .. }, Side::Right) => right[i],
                (Boundary::Periodic, _) => unreachable!("periodic grids have no ghosts"),
            },
        }
    }

    fn jet(&self, p: &JetPoint, term: &Term) -> JetPoint {
        let m = self.m;
        let db = self.grid.spacing();
        let q = &p.y;
        let mut jet = JetPoint {
            x: DVector::from_vec(vec![p.x[0], term.b]),
            y: DVector::zeros(m),
            z: DMatrix::zeros(m, 2),
        };
        for i in 0..m {
            jet.y[i] = self.slot_value(q, term.center, i);
            jet.z[(i, 0)] = match term.center {
                Slot::Node(j) => p.z[(j * m + i, 0)],
                Slot::Ghost(_) => 0.0,
            };
            jet.z[(i, 1)] = (self.slot_value(q, term.fwd, i) - self.slot_value(q, term.bwd, i)) / db;
        }
        jet
    }

    fn dim(&self) -> usize {
        self.m * self.grid.nb
    }

    /// Coefficient of node `l` in the spatial difference of a term.
    fn stencil(&self, term: &Term, l: usize) -> f64 {
        let mut c = 0.0;
        if term.fwd == Slot::Node(l) {
            c += 1.0;
        }
        if term.bwd == Slot::Node(l) {
            c -= 1.0;
        }
        c / self.grid.spacing()
    }

    /// Nodes touched by a term.
    fn touched(&self, term: &Term) -> Vec<usize> {
        let mut nodes = Vec::with_capacity(3);
        for slot in [term.center, term.fwd, term.bwd] {
            if let Slot::Node(j) = slot {
                if !nodes.contains(&j) {
                    nodes.push(j);
                }
            }
        }
        nodes
    }

    fn value(&self, p: &JetPoint) -> f64 {
        self.terms
            .iter()
            .map(|t| t.weight * self.model.value(&self.jet(p, t)).unwrap_or(f64::NAN))
            .sum()
    }

    fn dl_dy(&self, p: &JetPoint) -> DVector<f64> {
        let m = self.m;
        let mut out = DVector::zeros(self.dim());
        for t in &self.terms {
            let jet = self.jet(p, t);
            let (Ok(ly), Ok(lz)) = (self.model.dl_dy(&jet), self.model.dl_dz(&jet)) else {
                return DVector::from_element(self.dim(), f64::NAN);
            };
            if let Slot::Node(c) = t.center {
                for i in 0..m {
                    out[c * m + i] += t.weight * ly[i];
                }
            }
            for l in self.touched(t) {
                let s = self.stencil(t, l);
                if s != 0.0 {
                    for i in 0..m {
                        out[l * m + i] += t.weight * lz[i * 2 + 1] * s;
                    }
                }
            }
        }
        out
    }

    fn dl_dz(&self, p: &JetPoint) -> DVector<f64> {
        let m = self.m;
        let mut out = DVector::zeros(self.dim());
        for t in &self.terms {
            if let Slot::Node(c) = t.center {
                let Ok(lz) = self.model.dl_dz(&self.jet(p, t)) else {
                    return DVector::from_element(self.dim(), f64::NAN);
                };
                for i in 0..m {
                    out[c * m + i] += t.weight * lz[i * 2];
                }
            }
        }
        out
    }

    fn hessian_zz(&self, p: &JetPoint) -> DMatrix<f64> {
        let m = self.m;
        let dim = self.dim();
        let mut out = DMatrix::zeros(dim, dim);
        for t in &self.terms {
            if let Slot::Node(c) = t.center {
                let Ok(h) = self.model.hessian_zz(&self.jet(p, t)) else {
                    return DMatrix::from_element(dim, dim, f64::NAN);
                };
                for i in 0..m {
                    for j in 0..m {
                        out[(c * m + i, c * m + j)] += t.weight * h[(i * 2, j * 2)];
                    }
                }
            }
        }
        out
    }

    /// Rows `Y_{j,l'}`, columns `V_{i,l}`.
    fn mixed_yz(&self, p: &JetPoint) -> DMatrix<f64> {
        let m = self.m;
        let dim = self.dim();
        let mut out = DMatrix::zeros(dim, dim);
        for t in &self.terms {
            let Slot::Node(c) = t.center else { continue };
            let jet = self.jet(p, t);
            let (Ok(hyz), Ok(hzz)) = (self.model.mixed_yz(&jet), self.model.hessian_zz(&jet)) else {
                return DMatrix::from_element(dim, dim, f64::NAN);
            };
            for i in 0..m {
                let col = c * m + i;
                for j in 0..m {
                    out[(c * m + j, col)] += t.weight * hyz[(j, i * 2)];
                }
                for l in self.touched(t) {
                    let s = self.stencil(t, l);
                    if s != 0.0 {
                        for j in 0..m {
                            out[(l * m + j, col)] += t.weight * hzz[(j * 2 + 1, i * 2)] * s;
                        }
                    }
                }
            }
        }
        out
    }

    fn mixed_xz(&self, p: &JetPoint) -> DMatrix<f64> {
        let m = self.m;
        let mut out = DMatrix::zeros(1, self.dim());
        for t in &self.terms {
            if let Slot::Node(c) = t.center {
                let Ok(hx) = self.model.mixed_xz(&self.jet(p, t)) else {
                    return DMatrix::from_element(1, self.dim(), f64::NAN);
                };
                for i in 0..m {
                    out[(0, c * m + i)] += t.weight * hx[(0, i * 2)];
                }
            }
        }
        out
    }

    fn rows(&self) -> usize {
        self.k * self.grid.nb
    }

    fn phi(&self, p: &JetPoint) -> DVector<f64> {
        let k = self.k;
        let mut out = DVector::zeros(self.rows());
        for t in &self.terms {
            if let Slot::Node(c) = t.center {
                let Ok(v) = self.cs.eval(&self.jet(p, t)) else {
                    return DVector::from_element(self.rows(), f64::NAN);
                };
                for a in 0..k {
                    out[c * k + a] += 0.5 * v[a];
                }
            }
        }
        out
    }

    fn phi_jac_x(&self, p: &JetPoint) -> DMatrix<f64> {
        let k = self.k;
        let mut out = DMatrix::zeros(self.rows(), 1);
        for t in &self.terms {
            if let Slot::Node(c) = t.center {
                let Ok(jx) = self.cs.jacobian_x(&self.jet(p, t)) else {
                    return DMatrix::from_element(self.rows(), 1, f64::NAN);
                };
                for a in 0..k {
                    out[(c * k + a, 0)] += 0.5 * jx[(a, 0)];
                }
            }
        }
        out
    }

    fn phi_jac_y(&self, p: &JetPoint) -> DMatrix<f64> {
        let (m, k) = (self.m, self.k);
        let mut out = DMatrix::zeros(self.rows(), self.dim());
        for t in &self.terms {
            let Slot::Node(c) = t.center else { continue };
            let jet = self.jet(p, t);
            let (Ok(jy), Ok(jz)) = (self.cs.jacobian_y(&jet), self.cs.jacobian_z(&jet)) else {
                return DMatrix::from_element(self.rows(), self.dim(), f64::NAN);
            };
            for a in 0..k {
                let row = c * k + a;
                for i in 0..m {
                    out[(row, c * m + i)] += 0.5 * jy[(a, i)];
                }
                for l in self.touched(t) {
                    let s = self.stencil(t, l);
                    if s != 0.0 {
                        for i in 0..m {
                            out[(row, l * m + i)] += 0.5 * jz[(a, i * 2 + 1)] * s;
                        }
                    }
                }
            }
        }
        out
    }

    fn phi_jac_z(&self, p: &JetPoint) -> DMatrix<f64> {
        let (m, k) = (self.m, self.k);
        let mut out = DMatrix::zeros(self.rows(), self.dim());
        for t in &self.terms {
            if let Slot::Node(c) = t.center {
                let Ok(jz) = self.cs.jacobian_z(&self.jet(p, t)) else {
                    return DMatrix::from_element(self.rows(), self.dim(), f64::NAN);
                };
                for a in 0..k {
                    for i in 0..m {
                        out[(c * k + a, c * m + i)] += 0.5 * jz[(a, i * 2)];
                    }
                }
            }
        }
        out
    }
}

/// A field theory reduced to a mechanical system on a Cauchy grid.
#[derive(Clone)]
pub struct CauchySystem {
    inner: Arc<Inner>,
    lagrangian: LagrangianModel,
    constraints: ConstraintSet,
}

impl std::fmt::Debug for CauchySystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CauchySystem")
            .field("grid", &self.inner.grid)
            .field("m", &self.inner.m)
            .field("k", &self.inner.k)
            .finish()
    }
}

/// Builds the induced Lagrangian and constraints on the stacked node
/// coordinates; all their partials are assembled through the stencil.
pub fn semidiscretize(model: &LagrangianModel, cs: &ConstraintSet, grid: &CauchyGrid) -> Result<CauchySystem> {
    let space = model.space();
    if space.n() != 2 {
        return Err(Error::shape(format!(
            "field reduction needs a base of dimension 2, got {}",
            space.n()
        )));
    }
    if !cs.space().same_dims(space) {
        return Err(Error::shape("Lagrangian and constraints live on different spaces"));
    }
    grid.check_boundary(space.m())?;
    let inner = Arc::new(Inner {
        grid: grid.clone(),
        model: model.clone(),
        cs: cs.clone(),
        terms: build_terms(grid),
        m: space.m(),
        k: cs.k(),
    });
    let names: Vec<String> = (0..grid.nb)
        .flat_map(|j| space.fiber_names().iter().map(move |f| format!("{f}[{j}]")))
        .collect();
    let stacked = FiberedSpace::new([space.base_names()[0].clone()], names)?;

    let i = [
        inner.clone(),
        inner.clone(),
        inner.clone(),
        inner.clone(),
        inner.clone(),
        inner.clone(),
    ];
    let [i0, i1, i2, i3, i4, i5] = i;
    let lagrangian = LagrangianModel::new(stacked.clone(), move |p| i0.value(p))
        .with_dl_dy(move |p| i1.dl_dy(p))
        .with_dl_dz(move |p| i2.dl_dz(p))
        .with_hessian_zz(move |p| i3.hessian_zz(p))
        .with_mixed_yz(move |p| i4.mixed_yz(p))
        .with_mixed_xz(move |p| i5.mixed_xz(p));
    let [c0, c1, c2, c3] = [inner.clone(), inner.clone(), inner.clone(), inner.clone()];
    let constraints = ConstraintSet::new(stacked, inner.rows(), move |p| c0.phi(p))
        .with_jacobian_x(move |p| c1.phi_jac_x(p))
        .with_jacobian_y(move |p| c2.phi_jac_y(p))
        .with_jacobian_z(move |p| c3.phi_jac_z(p));
    Ok(CauchySystem {
        inner,
        lagrangian,
        constraints,
    })
}

impl CauchySystem {
    pub fn grid(&self) -> &CauchyGrid {
        &self.inner.grid
    }

    /// Fiber dimension of the field theory.
    pub fn m(&self) -> usize {
        self.inner.m
    }

    /// Constraints per node.
    pub fn k(&self) -> usize {
        self.inner.k
    }

    pub fn node_model(&self) -> &LagrangianModel {
        &self.inner.model
    }

    pub fn node_constraints(&self) -> &ConstraintSet {
        &self.inner.cs
    }

    /// The induced Lagrangian `L̃(t, q, q̇)`.
    pub fn lagrangian(&self) -> &LagrangianModel {
        &self.lagrangian
    }

    /// The induced constraints `Φ̃`, row `l·k + α`.
    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    pub fn initial_state(&self, t: f64, profile: FieldProfile) -> Result<CauchyState> {
        CauchyState::from_profile(self.m(), self.grid(), t, profile)
    }

    /// Adjusts the node velocities (never the values) onto `Φ̃ = 0`.
    pub fn project(&self, s: &CauchyState, tol: f64, max_iter: usize) -> Result<CauchyState> {
        s.check(self.m(), self.grid())?;
        let p = project_state_weighted(&self.constraints, &s.to_mech(), None, tol, max_iter)?;
        CauchyState::from_mech(self.m(), &p)
    }

    /// `max |Φ̃|` at a state.
    pub fn constraint_residual(&self, s: &CauchyState) -> Result<f64> {
        s.check(self.m(), self.grid())?;
        let v = self.constraints.eval(&s.to_mech().to_jet())?;
        Ok(v.iter().fold(0.0_f64, |a, x| a.max(x.abs())))
    }

    /// Maps a direction over the stacked `(q̈, λ)` unknowns to the grid
    /// nodes carrying a sizeable share of it.
    fn nodes_of(&self, direction: &[f64]) -> Vec<usize> {
        let dim = self.inner.dim();
        let largest = direction.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let mut nodes: Vec<usize> = direction
            .iter()
            .enumerate()
            .filter(|(_, v)| largest > 0.0 && v.abs() >= 0.1 * largest)
            .map(|(idx, _)| {
                if idx < dim {
                    idx / self.m()
                } else {
                    (idx - dim) / self.k().max(1)
                }
            })
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }
}

/// A field trajectory: states and the per-sample diagnostics of the stacked
/// mechanics run.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTrajectory {
    pub grid: CauchyGrid,
    pub times: Vec<f64>,
    pub states: Vec<CauchyState>,
    /// Stacked multipliers are ordered `l·k + α`; may be empty when the
    /// trajectory was not produced by [`evolve_field`].
    pub diagnostics: Vec<SampleDiagnostics>,
}

impl FieldTrajectory {
    pub fn max_constraint_residual(&self) -> f64 {
        self.diagnostics
            .iter()
            .flat_map(|d| d.constraint_residuals.iter())
            .fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// Space-time maximum of `|Y − exact|`.
    pub fn linf_error(&self, exact: ExactField) -> f64 {
        self.states
            .iter()
            .map(|s| state_error(&self.grid, s, exact))
            .fold(0.0, f64::max)
    }
}

/// `max_j |Y(b_j) − exact(t, b_j)|` at one state.
pub fn state_error(grid: &CauchyGrid, s: &CauchyState, exact: ExactField) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..grid.nb {
        let e = exact(s.t, grid.node_position(j), grid.lb);
        for (i, ei) in e.iter().enumerate() {
            worst = worst.max((s.y[(i, j)] - ei).abs());
        }
    }
    worst
}

/// Advances the field by integrating the stacked mechanical system.
pub fn evolve_field(
    system: &CauchySystem,
    s0: &CauchyState,
    h: f64,
    t_end: f64,
    options: &IntegrateOptions,
) -> Result<FieldTrajectory> {
    s0.check(system.m(), system.grid())?;
    let traj = integrate(
        &system.lagrangian,
        &system.constraints,
        &s0.to_mech(),
        h,
        t_end,
        options,
    )
    .map_err(|e| match e {
        Error::DegenerateSystem(mut d) => {
            d.nodes = system.nodes_of(&d.weakest_direction);
            Error::DegenerateSystem(d)
        }
        other => other,
    })?;
    let states = traj
        .states
        .iter()
        .map(|s| CauchyState::from_mech(system.m(), s))
        .collect::<Result<Vec<_>>>()?;
    Ok(FieldTrajectory {
        grid: system.grid().clone(),
        times: traj.times,
        states,
        diagnostics: traj.diagnostics,
    })
}

/// A vertical tangent vector at a Cauchy state: `δy` and `δz₀` per node;
/// `δz₁` follows from `δy`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVariation {
    pub dy: DMatrix<f64>,
    pub dv: DMatrix<f64>,
}

impl FieldVariation {
    pub fn new(dy: DMatrix<f64>, dv: DMatrix<f64>) -> Self {
        Self { dy, dv }
    }

    pub fn zeros(m: usize, nb: usize) -> Self {
        Self {
            dy: DMatrix::zeros(m, nb),
            dv: DMatrix::zeros(m, nb),
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            dy: &self.dy * a,
            dv: &self.dv * a,
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        Self {
            dy: &self.dy + &other.dy,
            dv: &self.dv + &other.dv,
        }
    }

    fn check(&self, m: usize, nb: usize) -> Result<()> {
        if self.dy.shape() != (m, nb) || self.dv.shape() != (m, nb) {
            return Err(Error::shape(format!(
                "variation is {:?}/{:?}, expected ({m}, {nb})",
                self.dy.shape(),
                self.dv.shape()
            )));
        }
        Ok(())
    }
}

/// Second-order central spatial derivative of `Y` at each node, with ghost
/// values on fixed grids.
fn central_derivative(grid: &CauchyGrid, y: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = y.shape();
    let db = grid.spacing();
    let value = |i: usize, j: isize| -> f64 {
        match &grid.boundary {
            Boundary::Periodic => y[(i, j.rem_euclid(n as isize) as usize)],
            Boundary::Fixed { left, right } => {
                if j < 0 {
                    left[i]
                } else if j >= n as isize {
                    right[i]
                } else {
                    y[(i, j as usize)]
                }
            }
        }
    };
    DMatrix::from_fn(m, n, |i, j| {
        (value(i, j as isize + 1) - value(i, j as isize - 1)) / (2.0 * db)
    })
}

/// `Θ̃(ξ) = ∫_B p⁰_i δy^i db` with `p⁰_i = ∂L/∂z^i_0`, by the rectangle rule
/// on periodic grids and the trapezoid rule between fixed ends (where the
/// variation vanishes).
pub fn theta_tilde(
    model: &LagrangianModel,
    grid: &CauchyGrid,
    state: &CauchyState,
    xi: &FieldVariation,
) -> Result<f64> {
    let m = model.space().m();
    if model.space().n() != 2 {
        return Err(Error::shape("theta_tilde needs a field model with n = 2"));
    }
    grid.check_boundary(m)?;
    state.check(m, grid)?;
    xi.check(m, grid.nb)?;
    let z1 = central_derivative(grid, &state.y);
    let db = grid.spacing();
    let mut total = 0.0;
    for j in 0..grid.nb {
        let jet = JetPoint {
            x: DVector::from_vec(vec![state.t, grid.node_position(j)]),
            y: state.y.column(j).into_owned(),
            z: DMatrix::from_fn(m, 2, |i, mu| if mu == 0 { state.v[(i, j)] } else { z1[(i, j)] }),
        };
        let p0 = model.dl_dz(&jet)?;
        for i in 0..m {
            total += db * p0[i * 2] * xi.dy[(i, j)];
        }
    }
    Ok(total)
}

/// Values of a node field extended by the diagnostic points (ends included
/// on fixed grids with the given boundary values).
fn extended(grid: &CauchyGrid, f: &DMatrix<f64>, ends: Option<(&[f64], &[f64])>) -> DMatrix<f64> {
    match &grid.boundary {
        Boundary::Periodic => f.clone(),
        Boundary::Fixed { .. } => {
            let (m, n) = f.shape();
            let mut out = DMatrix::zeros(m, n + 2);
            out.view_mut((0, 1), (m, n)).copy_from(f);
            if let Some((l, r)) = ends {
                for i in 0..m {
                    out[(i, 0)] = l[i];
                    out[(i, n + 1)] = r[i];
                }
            }
            out
        }
    }
}

/// First and second spatial derivatives on the diagnostic points, fourth
/// order in the interior and second order next to and at fixed ends.
fn spatial_derivatives(grid: &CauchyGrid, f: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = f.shape();
    let h = grid.spacing();
    let mut d1 = DMatrix::zeros(m, n);
    let mut d2 = DMatrix::zeros(m, n);
    let periodic = grid.is_periodic();
    for i in 0..m {
        let at = |j: isize| f[(i, j.rem_euclid(n as isize) as usize)];
        for j in 0..n {
            let jj = j as isize;
            let interior4 = periodic || (j >= 2 && j + 2 < n);
            let interior2 = j >= 1 && j + 1 < n;
            if interior4 {
                d1[(i, j)] = (-at(jj + 2) + 8.0 * at(jj + 1) - 8.0 * at(jj - 1) + at(jj - 2)) / (12.0 * h);
                d2[(i, j)] =
                    (-at(jj + 2) + 16.0 * at(jj + 1) - 30.0 * at(jj) + 16.0 * at(jj - 1) - at(jj - 2)) / (12.0 * h * h);
            } else if interior2 {
                d1[(i, j)] = (at(jj + 1) - at(jj - 1)) / (2.0 * h);
                d2[(i, j)] = (at(jj + 1) - 2.0 * at(jj) + at(jj - 1)) / (h * h);
            } else {
                let s: isize = if j == 0 { 1 } else { -1 };
                let f0 = at(jj);
                let f1 = at(jj + s);
                let f2 = at(jj + 2 * s);
                let f3 = at(jj + 3 * s);
                d1[(i, j)] = s as f64 * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h);
                d2[(i, j)] = (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3) / (h * h);
            }
        }
    }
    (d1, d2)
}

/// Residual of `i_ċ(dΘ̃ − Ξ̃)` at `t_probe`: the maximum over the test
/// variations of `|dΘ̃(ċ, ξ) − Ξ̃(ċ, ξ)|`.
///
/// The curve tangent `ċ` is taken from the neighbouring samples by central
/// time differences. `dΘ̃(U, ξ) = ∫_B dΘ_L(U, ξ, W) db`, with `W` the tangent
/// of the slice along `b`, expands to
/// `dH(ξ) + dp⁰(U)δy − dp⁰(ξ)U_y − dp¹(ξ)Y' + dp¹(W)δy`.
/// Only the time components of the multipliers are known: they are the
/// stacked multipliers divided by `Δb`, and the spatial components are 0.
pub fn dedonder_residual_20(
    system: &CauchySystem,
    trajectory: &FieldTrajectory,
    t_probe: f64,
    test_variations: &[FieldVariation],
) -> Result<f64> {
    let grid = system.grid();
    if trajectory.grid != *grid {
        return Err(Error::InvalidArgument(
            "trajectory was computed on a different grid".into(),
        ));
    }
    let (m, k, nb) = (system.m(), system.k(), grid.nb);
    let times = &trajectory.times;
    let idx = times
        .iter()
        .position(|t| (t - t_probe).abs() <= 1e-9 * t_probe.abs().max(1.0))
        .ok_or_else(|| Error::DiagnosticUnavailable(format!("no sample at t = {t_probe}")))?;
    if idx == 0 || idx + 1 >= times.len() {
        return Err(Error::DiagnosticUnavailable(format!(
            "t = {t_probe} needs a sample on either side for the curve tangent"
        )));
    }
    let (before, now, after) = (
        &trajectory.states[idx - 1],
        &trajectory.states[idx],
        &trajectory.states[idx + 1],
    );
    let dt_back = times[idx] - times[idx - 1];
    let dt_fwd = times[idx + 1] - times[idx];
    if (dt_back - dt_fwd).abs() > 1e-9 * dt_fwd.abs() {
        return Err(Error::DiagnosticUnavailable(
            "samples around the probe are not evenly spaced".into(),
        ));
    }
    let lambda = match trajectory.diagnostics.get(idx) {
        Some(d) if d.multipliers.len() == k * nb => d.multipliers.clone(),
        _ => {
            return Err(Error::DiagnosticUnavailable(format!(
                "no multiplier record at t = {t_probe}"
            )))
        }
    };
    for v in test_variations {
        v.check(m, nb)?;
    }
    let db = grid.spacing();
    let two_dt = dt_back + dt_fwd;

    let ends = match &grid.boundary {
        Boundary::Fixed { left, right } => Some((left.as_slice(), right.as_slice())),
        Boundary::Periodic => None,
    };
    let zero = vec![0.0; m];
    let zero_ends = ends.map(|_| (zero.as_slice(), zero.as_slice()));
    let y = extended(grid, &now.y, ends);
    let v = extended(grid, &now.v, zero_ends);
    let uy = extended(grid, &((&after.y - &before.y) / two_dt), zero_ends);
    let uv = extended(grid, &((&after.v - &before.v) / two_dt), zero_ends);
    let (y1, y2) = spatial_derivatives(grid, &y);
    let (v1, _) = spatial_derivatives(grid, &v);
    let (uy1, _) = spatial_derivatives(grid, &uy);

    let points = grid.diagnostic_points();
    struct Point {
        weight: f64,
        node: Option<usize>,
        z: DVector<f64>,
        bundle: crate::jet::DerivativeBundle,
        phi_z: DMatrix<f64>,
        /// dp(U) and dp(W), flattened like the jet variables.
        dp_u: DVector<f64>,
        dp_w: DVector<f64>,
    }
    let model = system.node_model();
    let len = 2 * m;
    let mut prepared = Vec::with_capacity(points.len());
    for (c, &(b, weight, node)) in points.iter().enumerate() {
        let mut jet = JetPoint {
            x: DVector::from_vec(vec![now.t, b]),
            y: y.column(c).into_owned(),
            z: DMatrix::zeros(m, 2),
        };
        for i in 0..m {
            jet.z[(i, 0)] = v[(i, c)];
            jet.z[(i, 1)] = y1[(i, c)];
        }
        let bundle = eval_derivatives(model, &jet)?;
        let phi_z = if k > 0 {
            system.node_constraints().jacobian_z(&jet)?
        } else {
            DMatrix::zeros(0, len)
        };
        let mut u_y = DVector::zeros(m);
        let mut u_z = DVector::zeros(len);
        let mut w_y = DVector::zeros(m);
        let mut w_z = DVector::zeros(len);
        for i in 0..m {
            u_y[i] = uy[(i, c)];
            u_z[2 * i] = uv[(i, c)];
            u_z[2 * i + 1] = uy1[(i, c)];
            w_y[i] = y1[(i, c)];
            w_z[2 * i] = v1[(i, c)];
            w_z[2 * i + 1] = y2[(i, c)];
        }
        let dp_u = bundle.mixed_xz.row(0).transpose() + bundle.mixed_yz.tr_mul(&u_y) + &bundle.hessian_zz * &u_z;
        let dp_w = bundle.mixed_xz.row(1).transpose() + bundle.mixed_yz.tr_mul(&w_y) + &bundle.hessian_zz * &w_z;
        prepared.push(Point {
            weight,
            node,
            z: jet.z_flat(),
            bundle,
            phi_z,
            dp_u,
            dp_w,
        });
    }

    let mut worst = 0.0_f64;
    for xi in test_variations {
        let ext_dy = extended(grid, &xi.dy, zero_ends);
        let ext_dv = extended(grid, &xi.dv, zero_ends);
        let (dy1, _) = spatial_derivatives(grid, &ext_dy);
        let mut total = 0.0;
        for (c, pt) in prepared.iter().enumerate() {
            let mut xi_y = DVector::zeros(m);
            let mut xi_z = DVector::zeros(len);
            for i in 0..m {
                xi_y[i] = ext_dy[(i, c)];
                xi_z[2 * i] = ext_dv[(i, c)];
                xi_z[2 * i + 1] = dy1[(i, c)];
            }
            let b = &pt.bundle;
            let dp_xi = b.mixed_yz.tr_mul(&xi_y) + &b.hessian_zz * &xi_z;
            let dh = pt.z.dot(&dp_xi) - b.dl_dy.dot(&xi_y);
            let mut dtheta = dh;
            for i in 0..m {
                let (p0, p1) = (2 * i, 2 * i + 1);
                let uy_i = uy[(i, c)];
                let y1_i = y1[(i, c)];
                dtheta += pt.dp_u[p0] * xi_y[i] - dp_xi[p0] * uy_i - dp_xi[p1] * y1_i + pt.dp_w[p1] * xi_y[i];
            }
            let mut xi_term = 0.0;
            if let Some(l) = pt.node {
                for a in 0..k {
                    let lam = lambda[l * k + a] / db;
                    for i in 0..m {
                        xi_term += lam * pt.phi_z[(a, 2 * i)] * xi_y[i];
                    }
                }
            }
            total += pt.weight * (dtheta - xi_term);
        }
        worst = worst.max(total.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::eval_derivatives;
    use crate::linalg;
    use crate::mechanics::multiplier_solve;
    use crate::models::{scalar_constrained_model, wave_model};

    fn wave_system(nb: usize) -> CauchySystem {
        let model = wave_model();
        let cs = ConstraintSet::empty(model.space().clone());
        semidiscretize(&model, &cs, &CauchyGrid::periodic(1.0, nb).unwrap()).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(CauchyGrid::periodic(1.0, 3).is_err());
        assert!(CauchyGrid::periodic(0.0, 8).is_err());
        let g = CauchyGrid::new(
            1.0,
            9,
            Boundary::Fixed {
                left: vec![0.0],
                right: vec![0.0],
            },
        )
        .unwrap();
        assert!((g.spacing() - 0.1).abs() < 1e-15);
        let model = wave_model();
        let cs = ConstraintSet::empty(model.space().clone());
        let bad = CauchyGrid::new(
            1.0,
            9,
            Boundary::Fixed {
                left: vec![],
                right: vec![0.0],
            },
        )
        .unwrap();
        assert!(semidiscretize(&model, &cs, &bad).is_err());
    }

    #[test]
    fn stacking_round_trip() {
        let s = CauchyState::new(
            0.5,
            DMatrix::from_fn(2, 5, |i, j| (i * 10 + j) as f64),
            DMatrix::from_element(2, 5, 1.0),
        );
        let mech = s.to_mech();
        assert_eq!(mech.q[3 * 2 + 1], 13.0);
        assert_eq!(CauchyState::from_mech(2, &mech).unwrap(), s);
    }

    #[test]
    fn wave_mass_matrix_is_scaled_identity() {
        let sys = wave_system(16);
        let s = CauchyState::zeros(1, sys.grid());
        let b = eval_derivatives(sys.lagrangian(), &s.to_mech().to_jet()).unwrap();
        let db = sys.grid().spacing();
        assert!(linalg::max_abs_mat(&(b.hessian_zz - DMatrix::identity(16, 16) * db)) < 1e-15);
    }

    #[test]
    fn constant_state_quadrature() {
        let model = wave_model();
        let cs = ConstraintSet::empty(model.space().clone());
        for grid in [
            CauchyGrid::periodic(2.5, 8).unwrap(),
            CauchyGrid::new(
                2.5,
                8,
                Boundary::Fixed {
                    left: vec![0.7],
                    right: vec![0.7],
                },
            )
            .unwrap(),
        ] {
            let sys = semidiscretize(&model, &cs, &grid).unwrap();
            let mut s = CauchyState::zeros(1, &grid);
            s.y.fill(0.7);
            s.v.fill(0.0);
            let value = sys.lagrangian().value(&s.to_mech().to_jet()).unwrap();
            let jet = JetPoint::from_slices(&[0.0, 0.0], &[0.7], &[0.0, 0.0]);
            assert!((value - 2.5 * model.value(&jet).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn wave_accelerations_are_the_compact_laplacian() {
        let sys = wave_system(12);
        let db = sys.grid().spacing();
        let mut s = CauchyState::zeros(1, sys.grid());
        for j in 0..12 {
            s.y[(0, j)] = ((j * j) as f64 * 0.37).sin();
            s.v[(0, j)] = (j as f64).cos();
        }
        let none = ConstraintSet::empty(sys.lagrangian().space().clone());
        let sol = multiplier_solve(sys.lagrangian(), &none, &s.to_mech(), 1e-12).unwrap();
        for j in 0..12 {
            let (l, r) = ((j + 11) % 12, (j + 1) % 12);
            let lap = (s.y[(0, r)] - 2.0 * s.y[(0, j)] + s.y[(0, l)]) / (db * db);
            assert!((sol.qddot[j] - lap).abs() < 1e-9 * (1.0 + lap.abs()), "node {j}");
        }
    }

    #[test]
    fn induced_partials_match_differences() {
        let (model, cs) = scalar_constrained_model(0.5).unwrap();
        let grid = CauchyGrid::new(
            1.0,
            5,
            Boundary::Fixed {
                left: vec![0.2, -0.1],
                right: vec![0.0, 0.3],
            },
        )
        .unwrap();
        let sys = semidiscretize(&model, &cs, &grid).unwrap();
        let mut s = CauchyState::zeros(2, &grid);
        for j in 0..5 {
            s.y[(0, j)] = (j as f64 * 0.9).sin();
            s.y[(1, j)] = (j as f64 * 0.4).cos();
            s.v[(0, j)] = 0.3 * j as f64;
            s.v[(1, j)] = -0.2;
        }
        let p = s.to_mech().to_jet();
        let report = crate::jet::check_derivatives(sys.lagrangian(), std::slice::from_ref(&p), 1e-6).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(
            sys.constraints()
                .jacobian_discrepancy(std::slice::from_ref(&p))
                .unwrap()
                < 1e-6
        );
        let a = sys.constraints().jacobian_z(&p).unwrap();
        assert_eq!(a.shape(), (5, 10));
        for r in 0..5 {
            for c in 0..10 {
                if c / 2 != r {
                    assert_eq!(a[(r, c)], 0.0);
                }
            }
        }
    }

    #[test]
    fn theta_tilde_is_linear_and_vanishes_on_zero() {
        let model = wave_model();
        let grid = CauchyGrid::periodic(1.0, 16).unwrap();
        let mut s = CauchyState::zeros(1, &grid);
        for j in 0..16 {
            s.y[(0, j)] = (j as f64).sin();
            s.v[(0, j)] = (j as f64 * 0.5).cos();
        }
        let x1 = FieldVariation::new(DMatrix::from_fn(1, 16, |_, j| j as f64), DMatrix::zeros(1, 16));
        let x2 = FieldVariation::new(
            DMatrix::from_fn(1, 16, |_, j| (j as f64).exp().recip()),
            DMatrix::zeros(1, 16),
        );
        let zero = FieldVariation::zeros(1, 16);
        assert_eq!(theta_tilde(&model, &grid, &s, &zero).unwrap(), 0.0);
        let combo = x1.scaled(2.0).plus(&x2.scaled(-3.0));
        let lhs = theta_tilde(&model, &grid, &s, &combo).unwrap();
        let rhs =
            2.0 * theta_tilde(&model, &grid, &s, &x1).unwrap() - 3.0 * theta_tilde(&model, &grid, &s, &x2).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn spatial_stencils_are_exact_on_low_polynomials() {
        let grid = CauchyGrid::new(
            1.0,
            8,
            Boundary::Fixed {
                left: vec![0.0],
                right: vec![0.0],
            },
        )
        .unwrap();
        let h = grid.spacing();
        let f = DMatrix::from_fn(1, 10, |_, j| {
            let b = j as f64 * h;
            b * b
        });
        let (d1, d2) = spatial_derivatives(&grid, &f);
        for j in 0..10 {
            let b = j as f64 * h;
            assert!((d1[(0, j)] - 2.0 * b).abs() < 1e-9);
            assert!((d2[(0, j)] - 2.0).abs() < 1e-8);
        }
    }
}
