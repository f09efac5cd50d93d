//! First jet space coordinates and Lagrangian densities.
//!
//! A point of the jet space is `(x^μ, y^i, z^i_μ)`: base coordinates, field
//! values and first derivatives. Every matrix indexed by jet variables uses
//! the flattened index `i * n + μ` (μ fastest).
//!
//! Partial derivatives of `L` come from analytic closures when the model
//! supplies them and from central differences otherwise. First differences
//! use the step `fd_step * max(1, |coordinate|)`; second differences of `L`
//! use `sqrt(fd_step)` in place of `fd_step`, which keeps rounding error far
//! below the truncation error of the first differences.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiberedSpace {
    base: Vec<String>,
    fiber: Vec<String>,
}

impl FiberedSpace {
    pub fn new<B, F>(base: B, fiber: F) -> Result<Self>
    where
        B: IntoIterator,
        B::Item: Into<String>,
        F: IntoIterator,
        F::Item: Into<String>,
    {
        let base: Vec<String> = base.into_iter().map(Into::into).collect();
        let fiber: Vec<String> = fiber.into_iter().map(Into::into).collect();
        if base.is_empty() || fiber.is_empty() {
            return Err(Error::Construction(format!(
                "fibered space needs n >= 1 and m >= 1 (got n={}, m={})",
                base.len(),
                fiber.len()
            )));
        }
        for names in [&base, &fiber] {
            for (k, name) in names.iter().enumerate() {
                if names[..k].contains(name) {
                    return Err(Error::Construction(format!("duplicate coordinate label {name:?}")));
                }
            }
        }
        Ok(Self { base, fiber })
    }

    /// Space with generated labels `x0.., y0..`.
    pub fn with_dims(n: usize, m: usize) -> Result<Self> {
        Self::new((0..n).map(|k| format!("x{k}")), (0..m).map(|k| format!("y{k}")))
    }

    pub fn n(&self) -> usize {
        self.base.len()
    }

    pub fn m(&self) -> usize {
        self.fiber.len()
    }

    /// Number of jet variables `z^i_μ`.
    pub fn jet_len(&self) -> usize {
        self.n() * self.m()
    }

    pub fn jet_index(&self, i: usize, mu: usize) -> usize {
        i * self.n() + mu
    }

    pub fn base_names(&self) -> &[String] {
        &self.base
    }

    pub fn fiber_names(&self) -> &[String] {
        &self.fiber
    }

    pub fn same_dims(&self, other: &FiberedSpace) -> bool {
        self.n() == other.n() && self.m() == other.m()
    }
}

/// A point `(x, y, z)` of the first jet space; `z[(i, μ)] = z^i_μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct JetPoint {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DMatrix<f64>,
}

/// One scalar coordinate of a jet point; `Z` uses the flattened jet index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    X(usize),
    Y(usize),
    Z(usize),
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coord::X(k) => write!(f, "x[{k}]"),
            Coord::Y(k) => write!(f, "y[{k}]"),
            Coord::Z(k) => write!(f, "z[{k}]"),
        }
    }
}

impl JetPoint {
    pub fn new(x: DVector<f64>, y: DVector<f64>, z: DMatrix<f64>) -> Self {
        Self { x, y, z }
    }

    /// Builds a point from slices; `z` is row-major `m × n`.
    pub fn from_slices(x: &[f64], y: &[f64], z: &[f64]) -> Self {
        let n = x.len();
        let m = y.len();
        assert_eq!(z.len(), n * m, "jet matrix must have m*n entries");
        Self {
            x: DVector::from_column_slice(x),
            y: DVector::from_column_slice(y),
            z: DMatrix::from_row_slice(m, n, z),
        }
    }

    pub fn zeros(space: &FiberedSpace) -> Self {
        Self {
            x: DVector::zeros(space.n()),
            y: DVector::zeros(space.m()),
            z: DMatrix::zeros(space.m(), space.n()),
        }
    }

    pub fn check(&self, space: &FiberedSpace) -> Result<()> {
        let (m, n) = (space.m(), space.n());
        if self.x.len() != n || self.y.len() != m || self.z.shape() != (m, n) {
            return Err(Error::shape(format!(
                "jet point has x:{}, y:{}, z:{:?}; space expects x:{n}, y:{m}, z:({m}, {n})",
                self.x.len(),
                self.y.len(),
                self.z.shape()
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn m(&self) -> usize {
        self.y.len()
    }

    /// Jet variables flattened with μ fastest.
    pub fn z_flat(&self) -> DVector<f64> {
        let n = self.n();
        DVector::from_fn(self.z.len(), |k, _| self.z[(k / n, k % n)])
    }

    pub fn coord(&self, c: Coord) -> f64 {
        match c {
            Coord::X(k) => self.x[k],
            Coord::Y(k) => self.y[k],
            Coord::Z(k) => {
                let n = self.n();
                self.z[(k / n, k % n)]
            }
        }
    }

    pub fn set_coord(&mut self, c: Coord, value: f64) {
        match c {
            Coord::X(k) => self.x[k] = value,
            Coord::Y(k) => self.y[k] = value,
            Coord::Z(k) => {
                let n = self.n();
                self.z[(k / n, k % n)] = value;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(self.y.iter())
            .chain(self.z.iter())
            .all(|v| v.is_finite())
    }
}

impl fmt::Display for JetPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "x={:?} y={:?} z={:?}",
            self.x.as_slice(),
            self.y.as_slice(),
            self.z_flat().as_slice()
        )
    }
}

pub(crate) mod diff {
    //! Central differences over jet coordinates.

    use super::*;

    pub fn step(fd_step: f64, at: f64) -> f64 {
        fd_step * at.abs().max(1.0)
    }

    fn annotate(err: Error, c: Coord, delta: f64) -> Error {
        match err {
            Error::NonFinite { quantity, probe } => Error::NonFinite {
                quantity,
                probe: format!("{probe} (differencing {c} by {delta:+e})"),
            },
            other => other,
        }
    }

    fn shifted(p: &JetPoint, c: Coord, delta: f64) -> (JetPoint, f64) {
        let base = p.coord(c);
        let mut q = p.clone();
        q.set_coord(c, base + delta);
        // Actual representable step.
        let h = q.coord(c) - base;
        (q, h)
    }

    /// First partial derivative of a vector-valued function along `c`.
    pub fn first<F>(f: &F, p: &JetPoint, c: Coord, fd_step: f64) -> Result<DVector<f64>>
    where
        F: Fn(&JetPoint) -> Result<DVector<f64>>,
    {
        let h = step(fd_step, p.coord(c));
        let (pp, hp) = shifted(p, c, h);
        let (pm, hm) = shifted(p, c, -h);
        let fp = f(&pp).map_err(|e| annotate(e, c, hp))?;
        let fm = f(&pm).map_err(|e| annotate(e, c, hm))?;
        Ok((fp - fm) / (hp - hm))
    }

    /// Second partial derivative of a scalar function along `a` and `b`.
    pub fn second<F>(f: &F, p: &JetPoint, a: Coord, b: Coord, step2: f64) -> Result<f64>
    where
        F: Fn(&JetPoint) -> Result<f64>,
    {
        if a == b {
            let h = step(step2, p.coord(a));
            let (pp, hp) = shifted(p, a, h);
            let (pm, hm) = shifted(p, a, -h);
            let f0 = f(p)?;
            let fp = f(&pp).map_err(|e| annotate(e, a, hp))?;
            let fm = f(&pm).map_err(|e| annotate(e, a, hm))?;
            // Non-uniform three-point formula; reduces to the usual one when hp = -hm.
            let hm = -hm;
            return Ok(2.0 * ((fp - f0) / hp - (f0 - fm) / hm) / (hp + hm));
        }
        let ha = step(step2, p.coord(a));
        let hb = step(step2, p.coord(b));
        let mut acc = 0.0;
        let mut da = 0.0;
        let mut db = 0.0;
        for (sa, sb, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
            let (q, ea) = shifted(p, a, sa * ha);
            let (q, eb) = shifted(&q, b, sb * hb);
            if sa > 0.0 {
                da += ea;
            } else {
                da -= ea;
            }
            if sb > 0.0 {
                db += eb;
            } else {
                db -= eb;
            }
            acc += sign * f(&q).map_err(|e| annotate(e, a, sa * ha))?;
        }
        // da, db each accumulate twice the full span (2h) over the four corners.
        Ok(acc / ((da / 2.0) * (db / 2.0)))
    }
}

pub type ScalarFn = Arc<dyn Fn(&JetPoint) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&JetPoint) -> DVector<f64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&JetPoint) -> DMatrix<f64> + Send + Sync>;

/// The partial derivatives of `L` that enter the field equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partial {
    /// ∂L/∂y^i, length m.
    DlDy,
    /// ∂L/∂z^i_μ, length m·n.
    DlDz,
    /// ∂²L/∂z^i_μ∂z^j_ν, (m·n) × (m·n).
    HessianZz,
    /// ∂²L/∂y^j∂z^i_μ, m × (m·n), row j.
    MixedYz,
    /// ∂²L/∂x^μ∂z^i_ν, n × (m·n), row μ.
    MixedXz,
}

impl Partial {
    pub const ALL: [Partial; 5] = [
        Partial::DlDy,
        Partial::DlDz,
        Partial::HessianZz,
        Partial::MixedYz,
        Partial::MixedXz,
    ];
}

impl fmt::Display for Partial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Partial::DlDy => "∂L/∂y",
            Partial::DlDz => "∂L/∂z",
            Partial::HessianZz => "∂²L/∂z∂z",
            Partial::MixedYz => "∂²L/∂y∂z",
            Partial::MixedXz => "∂²L/∂x∂z",
        })
    }
}

/// A Lagrangian density `L(x, y, z)` with optional analytic partials.
///
/// Evaluators must be pure functions of the jet point. They signal failure
/// by returning non-finite values.
#[derive(Clone)]
pub struct LagrangianModel {
    space: FiberedSpace,
    density: ScalarFn,
    dl_dy: Option<VectorFn>,
    dl_dz: Option<VectorFn>,
    hessian_zz: Option<MatrixFn>,
    mixed_yz: Option<MatrixFn>,
    mixed_xz: Option<MatrixFn>,
    fd_step: f64,
}

impl fmt::Debug for LagrangianModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let analytic: Vec<String> = Partial::ALL
            .iter()
            .filter(|p| self.has_analytic(**p))
            .map(|p| p.to_string())
            .collect();
        f.debug_struct("LagrangianModel")
            .field("space", &self.space)
            .field("analytic", &analytic)
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

impl LagrangianModel {
    pub fn new(space: FiberedSpace, density: impl Fn(&JetPoint) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            space,
            density: Arc::new(density),
            dl_dy: None,
            dl_dz: None,
            hessian_zz: None,
            mixed_yz: None,
            mixed_xz: None,
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn with_dl_dy(mut self, f: impl Fn(&JetPoint) -> DVector<f64> + Send + Sync + 'static) -> Self {
        self.dl_dy = Some(Arc::new(f));
        self
    }

    pub fn with_dl_dz(mut self, f: impl Fn(&JetPoint) -> DVector<f64> + Send + Sync + 'static) -> Self {
        self.dl_dz = Some(Arc::new(f));
        self
    }

    pub fn with_hessian_zz(mut self, f: impl Fn(&JetPoint) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.hessian_zz = Some(Arc::new(f));
        self
    }

    pub fn with_mixed_yz(mut self, f: impl Fn(&JetPoint) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.mixed_yz = Some(Arc::new(f));
        self
    }

    pub fn with_mixed_xz(mut self, f: impl Fn(&JetPoint) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.mixed_xz = Some(Arc::new(f));
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

    /// The same density with every analytic partial dropped.
    pub fn differenced(&self) -> Self {
        Self {
            space: self.space.clone(),
            density: self.density.clone(),
            dl_dy: None,
            dl_dz: None,
            hessian_zz: None,
            mixed_yz: None,
            mixed_xz: None,
            fd_step: self.fd_step,
        }
    }

    pub fn space(&self) -> &FiberedSpace {
        &self.space
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn has_analytic(&self, partial: Partial) -> bool {
        match partial {
            Partial::DlDy => self.dl_dy.is_some(),
            Partial::DlDz => self.dl_dz.is_some(),
            Partial::HessianZz => self.hessian_zz.is_some(),
            Partial::MixedYz => self.mixed_yz.is_some(),
            Partial::MixedXz => self.mixed_xz.is_some(),
        }
    }

    pub fn value(&self, p: &JetPoint) -> Result<f64> {
        let v = (self.density)(p);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                quantity: "L",
                probe: p.to_string(),
            });
        }
        Ok(v)
    }

    fn value_vec(&self, p: &JetPoint) -> Result<DVector<f64>> {
        Ok(DVector::from_element(1, self.value(p)?))
    }

    fn second_step(&self) -> f64 {
        self.fd_step.sqrt()
    }

    pub fn dl_dy(&self, p: &JetPoint) -> Result<DVector<f64>> {
        if let Some(f) = &self.dl_dy {
            return checked_vector(f(p), self.space.m(), "∂L/∂y", p);
        }
        let f = |q: &JetPoint| self.value_vec(q);
        let mut out = DVector::zeros(self.space.m());
        for j in 0..self.space.m() {
            out[j] = diff::first(&f, p, Coord::Y(j), self.fd_step)?[0];
        }
        Ok(out)
    }

    pub fn dl_dz(&self, p: &JetPoint) -> Result<DVector<f64>> {
        if let Some(f) = &self.dl_dz {
            return checked_vector(f(p), self.space.jet_len(), "∂L/∂z", p);
        }
        let f = |q: &JetPoint| self.value_vec(q);
        let mut out = DVector::zeros(self.space.jet_len());
        for a in 0..self.space.jet_len() {
            out[a] = diff::first(&f, p, Coord::Z(a), self.fd_step)?[0];
        }
        Ok(out)
    }

    /// Rows indexed by `coords`, columns by the jet variables: the derivative
    /// of ∂L/∂z along each coordinate.
    fn differenced_gradient_rows(&self, p: &JetPoint, coords: &[Coord]) -> Result<DMatrix<f64>> {
        let len = self.space.jet_len();
        let mut out = DMatrix::zeros(coords.len(), len);
        if self.dl_dz.is_some() {
            let g = |q: &JetPoint| self.dl_dz(q);
            for (r, &c) in coords.iter().enumerate() {
                let row = diff::first(&g, p, c, self.fd_step)?;
                out.set_row(r, &row.transpose());
            }
        } else {
            let f = |q: &JetPoint| self.value(q);
            let step2 = self.second_step();
            for (r, &c) in coords.iter().enumerate() {
                for b in 0..len {
                    out[(r, b)] = diff::second(&f, p, c, Coord::Z(b), step2)?;
                }
            }
        }
        Ok(out)
    }

    pub fn hessian_zz(&self, p: &JetPoint) -> Result<DMatrix<f64>> {
        let len = self.space.jet_len();
        if let Some(f) = &self.hessian_zz {
            return checked_matrix(f(p), (len, len), "∂²L/∂z∂z", p);
        }
        if self.dl_dz.is_some() {
            let coords: Vec<Coord> = (0..len).map(Coord::Z).collect();
            let h = self.differenced_gradient_rows(p, &coords)?;
            return Ok((&h + h.transpose()) * 0.5);
        }
        let f = |q: &JetPoint| self.value(q);
        let step2 = self.second_step();
        let mut h = DMatrix::zeros(len, len);
        for a in 0..len {
            for b in a..len {
                let v = diff::second(&f, p, Coord::Z(a), Coord::Z(b), step2)?;
                h[(a, b)] = v;
                h[(b, a)] = v;
            }
        }
        Ok(h)
    }

    pub fn mixed_yz(&self, p: &JetPoint) -> Result<DMatrix<f64>> {
        let shape = (self.space.m(), self.space.jet_len());
        if let Some(f) = &self.mixed_yz {
            return checked_matrix(f(p), shape, "∂²L/∂y∂z", p);
        }
        let coords: Vec<Coord> = (0..self.space.m()).map(Coord::Y).collect();
        self.differenced_gradient_rows(p, &coords)
    }

    pub fn mixed_xz(&self, p: &JetPoint) -> Result<DMatrix<f64>> {
        let shape = (self.space.n(), self.space.jet_len());
        if let Some(f) = &self.mixed_xz {
            return checked_matrix(f(p), shape, "∂²L/∂x∂z", p);
        }
        let coords: Vec<Coord> = (0..self.space.n()).map(Coord::X).collect();
        self.differenced_gradient_rows(p, &coords)
    }

    fn partial_as_matrix(&self, partial: Partial, p: &JetPoint) -> Result<DMatrix<f64>> {
        Ok(match partial {
            Partial::DlDy => {
                let v = self.dl_dy(p)?;
                DMatrix::from_column_slice(v.len(), 1, v.as_slice())
            }
            Partial::DlDz => {
                let v = self.dl_dz(p)?;
                DMatrix::from_column_slice(v.len(), 1, v.as_slice())
            }
            Partial::HessianZz => self.hessian_zz(p)?,
            Partial::MixedYz => self.mixed_yz(p)?,
            Partial::MixedXz => self.mixed_xz(p)?,
        })
    }
}

fn checked_vector(v: DVector<f64>, len: usize, what: &'static str, p: &JetPoint) -> Result<DVector<f64>> {
    if v.len() != len {
        return Err(Error::shape(format!(
            "{what} closure returned length {}, expected {len}",
            v.len()
        )));
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite {
            quantity: what,
            probe: p.to_string(),
        });
    }
    Ok(v)
}

fn checked_matrix(m: DMatrix<f64>, shape: (usize, usize), what: &'static str, p: &JetPoint) -> Result<DMatrix<f64>> {
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

/// Every partial of `L` at one jet point.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBundle {
    pub value: f64,
    pub dl_dy: DVector<f64>,
    pub dl_dz: DVector<f64>,
    pub hessian_zz: DMatrix<f64>,
    pub mixed_yz: DMatrix<f64>,
    pub mixed_xz: DMatrix<f64>,
}

pub fn eval_derivatives(model: &LagrangianModel, p: &JetPoint) -> Result<DerivativeBundle> {
    p.check(model.space())?;
    Ok(DerivativeBundle {
        value: model.value(p)?,
        dl_dy: model.dl_dy(p)?,
        dl_dz: model.dl_dz(p)?,
        hessian_zz: model.hessian_zz(p)?,
        mixed_yz: model.mixed_yz(p)?,
        mixed_xz: model.mixed_xz(p)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianRegularity {
    pub regular: bool,
    pub min_singular_value: f64,
    /// Descending.
    pub singular_values: Vec<f64>,
    /// The absolute cut-off the smallest singular value was compared with.
    pub threshold: f64,
}

impl HessianRegularity {
    /// Singular values at or below the regularity threshold.
    pub fn vanishing_count(&self) -> usize {
        self.singular_values.iter().filter(|&&s| s <= self.threshold).count()
    }
}

/// Regularity of `L` at `p`: the Hessian in the jet variables is invertible
/// relative to its own scale.
pub fn hessian_regularity(model: &LagrangianModel, p: &JetPoint, tol: f64) -> Result<HessianRegularity> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "regularity tolerance must be positive, got {tol}"
        )));
    }
    p.check(model.space())?;
    let h = model.hessian_zz(p)?;
    let sv = linalg::singular_values(&h);
    let largest = sv.first().copied().unwrap_or(0.0);
    let reference = if largest > 0.0 { largest } else { 1.0 };
    let threshold = tol * reference;
    let min_singular_value = sv.last().copied().unwrap_or(0.0);
    Ok(HessianRegularity {
        regular: min_singular_value > threshold,
        min_singular_value,
        singular_values: sv,
        threshold,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialCheck {
    pub partial: Partial,
    /// Max over probes of `‖analytic − differenced‖∞ / max(1, ‖differenced‖∞)`.
    pub max_discrepancy: f64,
    pub worst_probe: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeCheck {
    pub rtol: f64,
    /// One entry per partial the model supplies analytically.
    pub partials: Vec<PartialCheck>,
    /// Max over probes of the Hessian asymmetry under (i,μ)↔(j,ν).
    pub max_asymmetry: f64,
}

impl DerivativeCheck {
    pub const SYMMETRY_TOL: f64 = 1e-12;

    pub fn passed(&self) -> bool {
        self.partials.iter().all(|c| c.passed) && self.max_asymmetry <= Self::SYMMETRY_TOL
    }

    pub fn failures(&self) -> impl Iterator<Item = &PartialCheck> {
        self.partials.iter().filter(|c| !c.passed)
    }
}

/// Compares every analytic partial of `model` against central differences of
/// its density on each probe.
pub fn check_derivatives(model: &LagrangianModel, probes: &[JetPoint], rtol: f64) -> Result<DerivativeCheck> {
    if probes.is_empty() {
        return Err(Error::InvalidArgument(
            "derivative check needs at least one probe".into(),
        ));
    }
    let reference = model.differenced();
    let mut partials = Vec::new();
    for partial in Partial::ALL.into_iter().filter(|p| model.has_analytic(*p)) {
        let mut worst = (0.0_f64, 0usize);
        for (k, p) in probes.iter().enumerate() {
            p.check(model.space())?;
            let a = model.partial_as_matrix(partial, p)?;
            let d = reference.partial_as_matrix(partial, p)?;
            let scale = linalg::max_abs_mat(&d).max(1.0);
            let rel = linalg::max_abs_mat(&(a - d)) / scale;
            if rel > worst.0 || k == 0 {
                worst = (rel.max(worst.0), k);
            }
        }
        partials.push(PartialCheck {
            partial,
            max_discrepancy: worst.0,
            worst_probe: worst.1,
            passed: worst.0 <= rtol,
        });
    }
    let mut max_asymmetry = 0.0_f64;
    for p in probes {
        let h = model.hessian_zz(p)?;
        max_asymmetry = max_asymmetry.max(linalg::max_abs_mat(&(&h - h.transpose())));
    }
    Ok(DerivativeCheck {
        rtol,
        partials,
        max_asymmetry,
    })
}
