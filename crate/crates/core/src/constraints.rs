//! Constraint sets `Φ^α(x, y, z) = 0`, their jacobians and the builder for
//! constraints affine in the jet variables.

use std::fmt;
use std::ops::AddAssign;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::jet::{diff, Coord, FiberedSpace, JetPoint, MatrixFn, VectorFn, DEFAULT_FD_STEP};
use crate::linalg;

/// Default relative singular-value threshold for the independence test.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Clone)]
pub struct ConstraintSet {
    space: FiberedSpace,
    k: usize,
    phi: VectorFn,
    jac_x: Option<MatrixFn>,
    jac_y: Option<MatrixFn>,
    jac_z: Option<MatrixFn>,
    fd_step: f64,
}

impl fmt::Debug for ConstraintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstraintSet")
            .field("space", &self.space)
            .field("k", &self.k)
            .field("analytic_x", &self.jac_x.is_some())
            .field("analytic_y", &self.jac_y.is_some())
            .field("analytic_z", &self.jac_z.is_some())
            .finish()
    }
}

impl ConstraintSet {
    pub fn new(space: FiberedSpace, k: usize, phi: impl Fn(&JetPoint) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Self {
            space,
            k,
            phi: Arc::new(phi),
            jac_x: None,
            jac_y: None,
            jac_z: None,
            fd_step: DEFAULT_FD_STEP,
        }
    }

    /// No constraints at all.
    pub fn empty(space: FiberedSpace) -> Self {
        Self::new(space, 0, |_| DVector::zeros(0))
            .with_jacobian_x(|p| DMatrix::zeros(0, p.n()))
            .with_jacobian_y(|p| DMatrix::zeros(0, p.m()))
            .with_jacobian_z(|p| DMatrix::zeros(0, p.m() * p.n()))
    }

    pub fn with_jacobian_x(mut self, f: impl Fn(&JetPoint) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.jac_x = Some(Arc::new(f));
        self
    }

    pub fn with_jacobian_y(mut self, f: impl Fn(&JetPoint) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.jac_y = Some(Arc::new(f));
        self
    }

    pub fn with_jacobian_z(mut self, f: impl Fn(&JetPoint) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.jac_z = Some(Arc::new(f));
        self
    }

    pub fn with_fd_step(mut self, fd_step: f64) -> Result<Self> {
        if !(fd_step > 0.0 && fd_step.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "fd_step must be positive, got {fd_step}"
            )));
        }
        self.fd_step = fd_step;
        Ok(self)
    }

    /// The same constraints with the analytic jacobians dropped.
    pub fn differenced(&self) -> Self {
        Self {
            space: self.space.clone(),
            k: self.k,
            phi: self.phi.clone(),
            jac_x: None,
            jac_y: None,
            jac_z: None,
            fd_step: self.fd_step,
        }
    }

    /// Each row multiplied by the matching entry of `scales`.
    pub fn scaled_rows(&self, scales: &[f64]) -> Result<Self> {
        if scales.len() != self.k {
            return Err(Error::shape(format!(
                "{} row scales for {} constraints",
                scales.len(),
                self.k
            )));
        }
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(scales));
        let base = self.clone();
        let (dx, dy, dz) = (d.clone(), d.clone(), d.clone());
        let (bx, by, bz) = (base.clone(), base.clone(), base.clone());
        let phi = self.phi.clone();
        Ok(Self::new(self.space.clone(), self.k, move |p| &d * phi(p))
            .with_jacobian_x(move |p| &dx * bx.jacobian_x(p).unwrap_or_else(|_| nan_matrix(bx.k, p.n())))
            .with_jacobian_y(move |p| &dy * by.jacobian_y(p).unwrap_or_else(|_| nan_matrix(by.k, p.m())))
            .with_jacobian_z(move |p| &dz * bz.jacobian_z(p).unwrap_or_else(|_| nan_matrix(bz.k, p.m() * p.n()))))
    }

    pub fn space(&self) -> &FiberedSpace {
        &self.space
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn eval(&self, p: &JetPoint) -> Result<DVector<f64>> {
        let v = (self.phi)(p);
        if v.len() != self.k {
            return Err(Error::shape(format!(
                "constraint evaluator returned {} values, expected {}",
                v.len(),
                self.k
            )));
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite {
                quantity: "Φ",
                probe: p.to_string(),
            });
        }
        Ok(v)
    }

    fn differenced_columns(
        &self,
        p: &JetPoint,
        coords: impl Iterator<Item = Coord>,
        cols: usize,
    ) -> Result<DMatrix<f64>> {
        let f = |q: &JetPoint| self.eval(q);
        let mut out = DMatrix::zeros(self.k, cols);
        for (c, coord) in coords.enumerate() {
            out.set_column(c, &diff::first(&f, p, coord, self.fd_step)?);
        }
        Ok(out)
    }

    pub fn jacobian_x(&self, p: &JetPoint) -> Result<DMatrix<f64>> {
        let n = self.space.n();
        match &self.jac_x {
            Some(f) => checked(f(p), (self.k, n), "∂Φ/∂x", p),
            None => self.differenced_columns(p, (0..n).map(Coord::X), n),
        }
    }

    pub fn jacobian_y(&self, p: &JetPoint) -> Result<DMatrix<f64>> {
        let m = self.space.m();
        match &self.jac_y {
            Some(f) => checked(f(p), (self.k, m), "∂Φ/∂y", p),
            None => self.differenced_columns(p, (0..m).map(Coord::Y), m),
        }
    }

    pub fn jacobian_z(&self, p: &JetPoint) -> Result<DMatrix<f64>> {
        let len = self.space.jet_len();
        match &self.jac_z {
            Some(f) => checked(f(p), (self.k, len), "∂Φ/∂z", p),
            None => self.differenced_columns(p, (0..len).map(Coord::Z), len),
        }
    }

    /// Largest relative discrepancy `‖analytic − differenced‖∞ / max(1, ‖differenced‖∞)`
    /// over the analytic jacobians and probes.
    pub fn jacobian_discrepancy(&self, probes: &[JetPoint]) -> Result<f64> {
        let reference = self.differenced();
        let mut worst = 0.0_f64;
        for p in probes {
            p.check(&self.space)?;
            let pairs = [
                (self.jac_x.is_some(), self.jacobian_x(p)?, reference.jacobian_x(p)?),
                (self.jac_y.is_some(), self.jacobian_y(p)?, reference.jacobian_y(p)?),
                (self.jac_z.is_some(), self.jacobian_z(p)?, reference.jacobian_z(p)?),
            ];
            for (analytic, a, d) in pairs {
                if analytic {
                    let scale = linalg::max_abs_mat(&d).max(1.0);
                    worst = worst.max(linalg::max_abs_mat(&(a - d)) / scale);
                }
            }
        }
        Ok(worst)
    }
}

fn nan_matrix(r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_element(r, c, f64::NAN)
}

fn checked(m: DMatrix<f64>, shape: (usize, usize), what: &'static str, p: &JetPoint) -> Result<DMatrix<f64>> {
    if m.shape() != shape {
        return Err(Error::shape(format!(
            "{what} closure returned {:?}, expected {shape:?}",
            m.shape()
        )));
    }
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite {
            quantity: what,
            probe: p.to_string(),
        });
    }
    Ok(m)
}

/// `∂Φ^α/∂z^i_μ` at `p`, k rows and m·n columns.
pub fn jacobian_z(cs: &ConstraintSet, p: &JetPoint) -> Result<DMatrix<f64>> {
    p.check(cs.space())?;
    cs.jacobian_z(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRegularity {
    pub independent: bool,
    pub rank: usize,
    /// Smallest of the k leading singular values (0 when k > m·n, ∞ when k = 0).
    pub min_singular_value: f64,
}

/// Whether the rows `∂Φ^α/∂z` are linearly independent at `p`.
pub fn constraint_regularity(cs: &ConstraintSet, p: &JetPoint, tol: f64) -> Result<ConstraintRegularity> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rank tolerance must be positive, got {tol}"
        )));
    }
    let a = jacobian_z(cs, p)?;
    Ok(regularity_of(&a, tol))
}

pub(crate) fn regularity_of(a: &DMatrix<f64>, tol: f64) -> ConstraintRegularity {
    let k = a.nrows();
    if k == 0 {
        return ConstraintRegularity {
            independent: true,
            rank: 0,
            min_singular_value: f64::INFINITY,
        };
    }
    let sv = linalg::singular_values(a);
    let rank = linalg::relative_rank(&sv, tol);
    let min_singular_value = if k > sv.len() { 0.0 } else { sv[k - 1] };
    ConstraintRegularity {
        independent: rank == k,
        rank,
        min_singular_value,
    }
}

type CoefFn = Arc<dyn Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&DVector<f64>, &DVector<f64>) -> (DVector<f64>, DVector<f64>) + Send + Sync>;

/// A scalar coefficient function `c(x, y)`, optionally with its gradient.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Function { f: CoefFn, grad: Option<GradFn> },
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Function { grad, .. } => write!(f, "Function(analytic gradient: {})", grad.is_some()),
        }
    }
}

impl Coefficient {
    pub fn new(f: impl Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync + 'static) -> Self {
        Coefficient::Function {
            f: Arc::new(f),
            grad: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        Coefficient::Constant(c)
    }

    /// `c0 + cx·x + cy·y`, with its exact gradient.
    pub fn affine(c0: f64, cx: Vec<f64>, cy: Vec<f64>) -> Self {
        let (gx, gy) = (DVector::from_vec(cx), DVector::from_vec(cy));
        let (vx, vy) = (gx.clone(), gy.clone());
        Coefficient::Function {
            f: Arc::new(move |x, y| c0 + vx.dot(x) + vy.dot(y)),
            grad: Some(Arc::new(move |_, _| (gx.clone(), gy.clone()))),
        }
    }

    /// Attaches an analytic gradient `(∂c/∂x, ∂c/∂y)`.
    pub fn with_gradient(
        self,
        g: impl Fn(&DVector<f64>, &DVector<f64>) -> (DVector<f64>, DVector<f64>) + Send + Sync + 'static,
    ) -> Self {
        match self {
            Coefficient::Constant(c) => Coefficient::Function {
                f: Arc::new(move |_, _| c),
                grad: Some(Arc::new(g)),
            },
            Coefficient::Function { f, .. } => Coefficient::Function {
                f,
                grad: Some(Arc::new(g)),
            },
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Coefficient::Constant(c) if *c == 0.0)
    }

    pub fn eval(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Function { f, .. } => f(x, y),
        }
    }

    /// `(∂c/∂x, ∂c/∂y)`, differenced with relative step `fd_step` when no
    /// gradient was supplied.
    pub fn gradient(&self, x: &DVector<f64>, y: &DVector<f64>, fd_step: f64) -> (DVector<f64>, DVector<f64>) {
        match self {
            Coefficient::Constant(_) => (DVector::zeros(x.len()), DVector::zeros(y.len())),
            Coefficient::Function { grad: Some(g), .. } => g(x, y),
            Coefficient::Function { f, grad: None } => {
                let partial = |v: &DVector<f64>, k: usize, eval: &dyn Fn(&DVector<f64>) -> f64| {
                    let h = diff::step(fd_step, v[k]);
                    let (mut vp, mut vm) = (v.clone(), v.clone());
                    vp[k] += h;
                    vm[k] -= h;
                    let span = vp[k] - vm[k];
                    (eval(&vp) - eval(&vm)) / span
                };
                let gx = DVector::from_fn(x.len(), |k, _| partial(x, k, &|v| f(v, y)));
                let gy = DVector::from_fn(y.len(), |k, _| partial(y, k, &|v| f(x, v)));
                (gx, gy)
            }
        }
    }
}

/// Coefficients of k affine forms `φ^α = (φ^α)_0 dⁿx + (φ^α)^μ_i dy^i ∧ dⁿ⁻¹x_μ`.
#[derive(Debug, Clone)]
pub struct AffineFormCoefficients {
    k: usize,
    m: usize,
    n: usize,
    phi0: Vec<Coefficient>,
    /// Indexed `[α][i * n + μ]`.
    phi: Vec<Vec<Coefficient>>,
}

impl AffineFormCoefficients {
    /// All coefficients zero.
    pub fn new(k: usize, m: usize, n: usize) -> Self {
        Self {
            k,
            m,
            n,
            phi0: vec![Coefficient::Constant(0.0); k],
            phi: vec![vec![Coefficient::Constant(0.0); m * n]; k],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn set_phi0(&mut self, alpha: usize, c: Coefficient) -> Result<&mut Self> {
        if alpha >= self.k {
            return Err(Error::Construction(format!(
                "constraint index {alpha} out of range (k={})",
                self.k
            )));
        }
        self.phi0[alpha] = c;
        Ok(self)
    }

    /// Sets `(φ^α)^μ_i`, the coefficient multiplying `z^i_μ`.
    pub fn set_coefficient(&mut self, alpha: usize, i: usize, mu: usize, c: Coefficient) -> Result<&mut Self> {
        if alpha >= self.k || i >= self.m || mu >= self.n {
            return Err(Error::Construction(format!(
                "coefficient index (α={alpha}, i={i}, μ={mu}) out of range for k={}, m={}, n={}",
                self.k, self.m, self.n
            )));
        }
        self.phi[alpha][i * self.n + mu] = c;
        Ok(self)
    }

    pub fn phi0(&self, alpha: usize) -> &Coefficient {
        &self.phi0[alpha]
    }

    pub fn coefficient(&self, alpha: usize, i: usize, mu: usize) -> &Coefficient {
        &self.phi[alpha][i * self.n + mu]
    }

    /// The z-coefficient array at `(x, y)`, k × m·n.
    pub fn coefficient_matrix(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.k, self.m * self.n, |a, b| self.phi[a][b].eval(x, y))
    }
}

/// `Φ^α = (φ^α)_0(x, y) + Σ (φ^α)^μ_i(x, y) z^i_μ` with analytic jacobians.
pub fn affine_constraints(coeffs: AffineFormCoefficients, space: FiberedSpace) -> Result<ConstraintSet> {
    if coeffs.m != space.m() || coeffs.n != space.n() {
        return Err(Error::Construction(format!(
            "coefficients sized for m={}, n={} but the space has m={}, n={}",
            coeffs.m,
            coeffs.n,
            space.m(),
            space.n()
        )));
    }
    let k = coeffs.k;
    let c = Arc::new(coeffs);
    let fd_step = DEFAULT_FD_STEP;

    let cv = c.clone();
    let phi = move |p: &JetPoint| {
        let z = p.z_flat();
        DVector::from_fn(k, |a, _| {
            let mut v = cv.phi0[a].eval(&p.x, &p.y);
            for (b, coef) in cv.phi[a].iter().enumerate() {
                if !coef.is_zero() {
                    v += coef.eval(&p.x, &p.y) * z[b];
                }
            }
            v
        })
    };

    // Both position jacobians share one gradient pass.
    let grads = move |c: &AffineFormCoefficients, p: &JetPoint| -> (DMatrix<f64>, DMatrix<f64>) {
        let z = p.z_flat();
        let mut jx = DMatrix::zeros(k, p.n());
        let mut jy = DMatrix::zeros(k, p.m());
        for a in 0..k {
            let (gx, gy) = c.phi0[a].gradient(&p.x, &p.y, fd_step);
            jx.row_mut(a).add_assign(&gx.transpose());
            jy.row_mut(a).add_assign(&gy.transpose());
            for (b, coef) in c.phi[a].iter().enumerate() {
                if matches!(coef, Coefficient::Constant(_)) || z[b] == 0.0 {
                    continue;
                }
                let (gx, gy) = coef.gradient(&p.x, &p.y, fd_step);
                jx.row_mut(a).add_assign(&(gx.transpose() * z[b]));
                jy.row_mut(a).add_assign(&(gy.transpose() * z[b]));
            }
        }
        (jx, jy)
    };
    let (cx, cy, cz) = (c.clone(), c.clone(), c);
    Ok(ConstraintSet::new(space, k, phi)
        .with_jacobian_x(move |p| grads(&cx, p).0)
        .with_jacobian_y(move |p| grads(&cy, p).1)
        .with_jacobian_z(move |p| cz.coefficient_matrix(&p.x, &p.y)))
}
