//! Built-in systems: the pneumatic tire, the free wave, a constrained scalar
//! field and two small mechanical benchmarks.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};

use crate::constraints::{affine_constraints, AffineFormCoefficients, Coefficient, ConstraintSet};
use crate::error::{Error, Result};
use crate::jet::{FiberedSpace, LagrangianModel};
use crate::mechanics::MechState;

/// Tire parameters. Elastic energy
/// `U = ½(aξ² + bφ² + ρNκ² + 2σNξκ)`, kinetic energy
/// `T = ½(m_x ẋ² + I_κ κ̇² + I_θ θ̇²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TireParams {
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    pub sigma: f64,
    pub n: f64,
    pub v: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub m_x: f64,
    pub i_kappa: f64,
    pub i_theta: f64,
}

impl Default for TireParams {
    fn default() -> Self {
        Self {
            a: 2.0,
            b: 1.0,
            rho: 0.5,
            sigma: 0.3,
            n: 10.0,
            v: 1.0,
            alpha: 0.4,
            beta: 0.2,
            gamma: 0.1,
            m_x: 1.0,
            i_kappa: 0.2,
            i_theta: 0.5,
        }
    }
}

pub const TIRE_COORDINATES: [&str; 5] = ["x", "kappa", "theta", "xi", "phi"];

impl TireParams {
    pub const KEYS: [&'static str; 12] = [
        "a", "b", "rho", "sigma", "N", "V", "alpha", "beta", "gamma", "m_x", "I_kappa", "I_theta",
    ];

    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = match key {
            "a" => &mut self.a,
            "b" => &mut self.b,
            "rho" => &mut self.rho,
            "sigma" => &mut self.sigma,
            "N" => &mut self.n,
            "V" => &mut self.v,
            "alpha" => &mut self.alpha,
            "beta" => &mut self.beta,
            "gamma" => &mut self.gamma,
            "m_x" => &mut self.m_x,
            "I_kappa" => &mut self.i_kappa,
            "I_theta" => &mut self.i_theta,
            other => {
                return Err(Error::Construction(format!(
                    "unknown tire parameter {other:?} (expected one of {})",
                    Self::KEYS.join(", ")
                )))
            }
        };
        *slot = value;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.a,
            self.b,
            self.rho,
            self.sigma,
            self.n,
            self.v,
            self.alpha,
            self.beta,
            self.gamma,
            self.m_x,
            self.i_kappa,
            self.i_theta,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Construction("tire parameters must be finite".into()));
        }
        let checks = [
            (self.v >= 0.0, "V >= 0"),
            (self.n >= 0.0, "N >= 0"),
            (self.a > 0.0, "a > 0"),
            (self.b > 0.0, "b > 0"),
            (self.m_x > 0.0, "m_x > 0"),
            (self.i_kappa > 0.0, "I_kappa > 0"),
            (self.i_theta > 0.0, "I_theta > 0"),
        ];
        for (ok, what) in checks {
            if !ok {
                return Err(Error::Construction(format!("tire parameters violate {what}: {self:?}")));
            }
        }
        Ok(())
    }

    /// Whether `[[a, σN], [σN, ρN]]` is positive semidefinite.
    pub fn elastic_psd(&self) -> bool {
        let (p, q, r) = (self.a, self.sigma * self.n, self.rho * self.n);
        p >= 0.0 && r >= 0.0 && p * r - q * q >= 0.0
    }

    /// `U(κ, ξ, φ)`.
    pub fn potential(&self, kappa: f64, xi: f64, phi: f64) -> f64 {
        0.5 * (self.a * xi * xi
            + self.b * phi * phi
            + self.rho * self.n * kappa * kappa
            + 2.0 * self.sigma * self.n * xi * kappa)
    }

    /// `(∂U/∂κ, ∂U/∂ξ, ∂U/∂φ)`.
    pub fn potential_gradient(&self, kappa: f64, xi: f64, phi: f64) -> (f64, f64, f64) {
        (
            self.rho * self.n * kappa + self.sigma * self.n * xi,
            self.a * xi + self.sigma * self.n * kappa,
            self.b * phi,
        )
    }

    /// `(Φ¹, Φ²)` at a state.
    pub fn constraint_values(&self, s: &MechState) -> (f64, f64) {
        let (q, v) = (&s.q, &s.qdot);
        (
            v[0] + v[3] + self.v * q[2] + self.v * q[4],
            v[2] + v[4] - self.alpha * self.v * q[3] + self.beta * self.v * q[4] + self.gamma * self.v * q[1],
        )
    }

    /// The state with `ξ̇` and `φ̇` chosen to satisfy both constraints.
    pub fn consistent_state(&self, t: f64, q: [f64; 5], xdot: f64, kappadot: f64, thetadot: f64) -> MechState {
        let v = self.v;
        let xidot = -xdot - v * q[2] - v * q[4];
        let phidot = -thetadot + self.alpha * v * q[3] - self.beta * v * q[4] - self.gamma * v * q[1];
        MechState::new(t, q.to_vec(), vec![xdot, kappadot, thetadot, xidot, phidot])
    }
}

/// Tire Lagrangian and constraints on coordinates `(x, κ, θ, ξ, φ)`.
pub fn tire_model(p: TireParams) -> Result<(LagrangianModel, ConstraintSet)> {
    p.validate()?;
    let space = FiberedSpace::new(["t"], TIRE_COORDINATES)?;
    let inertia = [p.m_x, p.i_kappa, p.i_theta, 0.0, 0.0];
    let model = LagrangianModel::new(space.clone(), move |j| {
        let z = &j.z;
        let t = 0.5 * (p.m_x * z[(0, 0)].powi(2) + p.i_kappa * z[(1, 0)].powi(2) + p.i_theta * z[(2, 0)].powi(2));
        t - p.potential(j.y[1], j.y[3], j.y[4])
    })
    .with_dl_dy(move |j| {
        let (dk, dxi, dphi) = p.potential_gradient(j.y[1], j.y[3], j.y[4]);
        DVector::from_vec(vec![0.0, -dk, 0.0, -dxi, -dphi])
    })
    .with_dl_dz(move |j| DVector::from_fn(5, |i, _| inertia[i] * j.z[(i, 0)]))
    .with_hessian_zz(move |_| DMatrix::from_diagonal(&DVector::from_column_slice(&inertia)))
    .with_mixed_yz(|_| DMatrix::zeros(5, 5))
    .with_mixed_xz(|_| DMatrix::zeros(1, 5));

    let v = p.v;
    let mut c = AffineFormCoefficients::new(2, 5, 1);
    c.set_phi0(0, Coefficient::affine(0.0, vec![0.0], vec![0.0, 0.0, v, 0.0, v]))?;
    c.set_coefficient(0, 0, 0, Coefficient::constant(1.0))?;
    c.set_coefficient(0, 3, 0, Coefficient::constant(1.0))?;
    c.set_phi0(
        1,
        Coefficient::affine(0.0, vec![0.0], vec![0.0, p.gamma * v, 0.0, -p.alpha * v, p.beta * v]),
    )?;
    c.set_coefficient(1, 2, 0, Coefficient::constant(1.0))?;
    c.set_coefficient(1, 4, 0, Coefficient::constant(1.0))?;
    let cs = affine_constraints(c, space)?;
    Ok((model, cs))
}

/// `(λ₁, λ₂) = (∂U/∂ξ, ∂U/∂φ)`.
pub fn tire_reference_multipliers(p: &TireParams, s: &MechState) -> (f64, f64) {
    let (_, dxi, dphi) = p.potential_gradient(s.q[1], s.q[3], s.q[4]);
    (dxi, dphi)
}

fn closed_rhs(p: &TireParams, q: &[f64], v: &[f64]) -> [f64; 10] {
    let (dk, dxi, dphi) = p.potential_gradient(q[1], q[3], q[4]);
    let xdd = dxi / p.m_x;
    let kdd = -dk / p.i_kappa;
    let tdd = dphi / p.i_theta;
    let xidd = -xdd - p.v * v[2] - p.v * v[4];
    let phidd = -tdd + p.alpha * p.v * v[3] - p.beta * p.v * v[4] - p.gamma * p.v * v[1];
    [v[0], v[1], v[2], v[3], v[4], xdd, kdd, tdd, xidd, phidd]
}

/// Right-hand side `(q̇, q̈)` of the tire equations with the multipliers
/// eliminated by hand. The state must satisfy both constraints to 1e-9.
pub fn tire_reference_rhs(p: &TireParams, s: &MechState) -> Result<DVector<f64>> {
    if s.q.len() != 5 || s.qdot.len() != 5 {
        return Err(Error::shape("tire states have five coordinates"));
    }
    let (c1, c2) = p.constraint_values(s);
    let residual = c1.abs().max(c2.abs());
    if !(residual <= 1e-9) {
        return Err(Error::InconsistentState {
            residual,
            allowed: 1e-9,
        });
    }
    Ok(DVector::from_row_slice(&closed_rhs(
        p,
        s.q.as_slice(),
        s.qdot.as_slice(),
    )))
}

/// Jacobian of the closed tire equations at straight-line rolling.
pub fn tire_linear_operator(p: &TireParams) -> DMatrix<f64> {
    // The closed equations are linear, so unit differences are exact.
    let zero = [0.0; 10];
    let base = closed_rhs(p, &zero[..5], &zero[5..]);
    let mut jac = DMatrix::zeros(10, 10);
    for k in 0..10 {
        let mut e = zero;
        e[k] = 1.0;
        let f = closed_rhs(p, &e[..5], &e[5..]);
        for r in 0..10 {
            jac[(r, k)] = f[r] - base[r];
        }
    }
    jac
}

/// Spectrum of the linearised tire equations, sorted by real part
/// (descending, ties by imaginary part).
pub fn tire_linearize(p: &TireParams) -> Result<Vec<Complex<f64>>> {
    p.validate()?;
    if !p.elastic_psd() {
        return Err(Error::Construction(format!(
            "elastic matrix [[a, σN], [σN, ρN]] is not positive semidefinite for {p:?}"
        )));
    }
    let mut eig: Vec<Complex<f64>> = tire_linear_operator(p).complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    Ok(eig)
}

/// Largest real part of a spectrum.
pub fn spectral_abscissa(eig: &[Complex<f64>]) -> f64 {
    eig.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max)
}

/// `L = ½(z₀² − z₁²)` on the base `(t, b)`.
pub fn wave_model() -> LagrangianModel {
    let space = FiberedSpace::new(["t", "b"], ["u"]).expect("static labels");
    LagrangianModel::new(space, |p| 0.5 * (p.z[(0, 0)].powi(2) - p.z[(0, 1)].powi(2)))
        .with_dl_dy(|_| DVector::zeros(1))
        .with_dl_dz(|p| DVector::from_vec(vec![p.z[(0, 0)], -p.z[(0, 1)]]))
        .with_hessian_zz(|_| DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]))
        .with_mixed_yz(|_| DMatrix::zeros(1, 2))
        .with_mixed_xz(|_| DMatrix::zeros(2, 2))
}

/// Two free scalar fields tied by `Φ = z¹_0 − c z²_1`.
pub fn scalar_constrained_model(c: f64) -> Result<(LagrangianModel, ConstraintSet)> {
    if !c.is_finite() {
        return Err(Error::Construction(format!("coupling c must be finite, got {c}")));
    }
    let space = FiberedSpace::new(["t", "b"], ["u", "w"])?;
    let hess = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 1.0, -1.0]));
    let model = LagrangianModel::new(space.clone(), |p| {
        0.5 * (p.z[(0, 0)].powi(2) - p.z[(0, 1)].powi(2) + p.z[(1, 0)].powi(2) - p.z[(1, 1)].powi(2))
    })
    .with_dl_dy(|_| DVector::zeros(2))
    .with_dl_dz(|p| DVector::from_vec(vec![p.z[(0, 0)], -p.z[(0, 1)], p.z[(1, 0)], -p.z[(1, 1)]]))
    .with_hessian_zz(move |_| hess.clone())
    .with_mixed_yz(|_| DMatrix::zeros(2, 4))
    .with_mixed_xz(|_| DMatrix::zeros(2, 4));
    let mut coeffs = AffineFormCoefficients::new(1, 2, 2);
    coeffs.set_coefficient(0, 0, 0, Coefficient::constant(1.0))?;
    coeffs.set_coefficient(0, 1, 1, Coefficient::constant(-c))?;
    Ok((model, affine_constraints(coeffs, space)?))
}

/// `L = ½ m q̇² − ½ k q²`.
pub fn harmonic_oscillator(mass: f64, k: f64) -> Result<LagrangianModel> {
    if !(mass > 0.0 && mass.is_finite() && k.is_finite()) {
        return Err(Error::Construction(format!(
            "oscillator needs mass > 0 and finite k (mass={mass}, k={k})"
        )));
    }
    let space = FiberedSpace::new(["t"], ["q"])?;
    Ok(LagrangianModel::new(space, move |p| {
        0.5 * mass * p.z[(0, 0)].powi(2) - 0.5 * k * p.y[0].powi(2)
    })
    .with_dl_dy(move |p| DVector::from_element(1, -k * p.y[0]))
    .with_dl_dz(move |p| DVector::from_element(1, mass * p.z[(0, 0)]))
    .with_hessian_zz(move |_| DMatrix::from_element(1, 1, mass))
    .with_mixed_yz(|_| DMatrix::zeros(1, 1))
    .with_mixed_xz(|_| DMatrix::zeros(1, 1)))
}

/// Free particle in space with `Φ = ż − y ẋ + offset`.
pub fn nonholonomic_particle(offset: f64) -> Result<(LagrangianModel, ConstraintSet)> {
    if !offset.is_finite() {
        return Err(Error::Construction(format!("offset must be finite, got {offset}")));
    }
    let space = FiberedSpace::new(["t"], ["x", "y", "z"])?;
    let model = LagrangianModel::new(space.clone(), |p| 0.5 * p.z.norm_squared())
        .with_dl_dy(|_| DVector::zeros(3))
        .with_dl_dz(|p| p.z_flat())
        .with_hessian_zz(|_| DMatrix::identity(3, 3))
        .with_mixed_yz(|_| DMatrix::zeros(3, 3))
        .with_mixed_xz(|_| DMatrix::zeros(1, 3));
    let mut c = AffineFormCoefficients::new(1, 3, 1);
    c.set_phi0(0, Coefficient::constant(offset))?;
    c.set_coefficient(0, 0, 0, Coefficient::affine(0.0, vec![0.0], vec![0.0, -1.0, 0.0]))?;
    c.set_coefficient(0, 2, 0, Coefficient::constant(1.0))?;
    Ok((model, affine_constraints(c, space)?))
}

/// Initial field data `(Y, V)` at a node position `b` on `[0, Lb)`.
pub type FieldProfile = fn(b: f64, lb: f64) -> (Vec<f64>, Vec<f64>);
/// Exact solution values at `(t, b)` for fields that have one.
pub type ExactField = fn(t: f64, b: f64, lb: f64) -> Vec<f64>;

#[derive(Debug, Clone)]
pub struct MechanicalBuiltin {
    pub name: &'static str,
    pub lagrangian: LagrangianModel,
    pub constraints: ConstraintSet,
    pub initial: MechState,
    /// Velocities the projection may adjust, if restricted.
    pub mobility: Option<Vec<f64>>,
    pub tire: Option<TireParams>,
}

#[derive(Debug, Clone)]
pub struct FieldBuiltin {
    pub name: &'static str,
    pub lagrangian: LagrangianModel,
    pub constraints: ConstraintSet,
    pub initial: FieldProfile,
    pub exact: Option<ExactField>,
}

#[derive(Debug, Clone)]
pub enum Builtin {
    Mechanical(MechanicalBuiltin),
    Field(FieldBuiltin),
}

impl Builtin {
    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Mechanical(m) => m.name,
            Builtin::Field(f) => f.name,
        }
    }

    pub fn lagrangian(&self) -> &LagrangianModel {
        match self {
            Builtin::Mechanical(m) => &m.lagrangian,
            Builtin::Field(f) => &f.lagrangian,
        }
    }

    pub fn constraints(&self) -> &ConstraintSet {
        match self {
            Builtin::Mechanical(m) => &m.constraints,
            Builtin::Field(f) => &f.constraints,
        }
    }
}

pub const BUILTIN_NAMES: [&str; 5] = ["tire", "wave", "scalar-constrained", "particle", "oscillator"];

/// Standing wave `sin(2πb/Lb) cos(2πt/Lb)`.
pub fn standing_wave(t: f64, b: f64, lb: f64) -> Vec<f64> {
    let k = 2.0 * PI / lb;
    vec![(k * b).sin() * (k * t).cos()]
}

fn standing_wave_initial(b: f64, lb: f64) -> (Vec<f64>, Vec<f64>) {
    (standing_wave(0.0, b, lb), vec![0.0])
}

/// `Y = (sin kb, ½ cos kb)`, `V = 0`; `V¹` still has to be projected onto
/// the constraint.
fn scalar_constrained_initial(b: f64, lb: f64) -> (Vec<f64>, Vec<f64>) {
    let k = 2.0 * PI / lb;
    (vec![(k * b).sin(), 0.5 * (k * b).cos()], vec![0.0, 0.0])
}

fn take(params: &mut Vec<(String, f64)>, key: &str, default: f64) -> f64 {
    match params.iter().position(|(k, _)| k == key) {
        Some(i) => params.remove(i).1,
        None => default,
    }
}

/// Looks up a built-in model by name and applies `key=value` overrides.
pub fn builtin(name: &str, params: &[(String, f64)]) -> Result<Builtin> {
    let mut rest: Vec<(String, f64)> = params.to_vec();
    let out = match name {
        "tire" => {
            let mut p = TireParams::default();
            for (k, v) in rest.drain(..) {
                p.set(&k, v)?;
            }
            let (lagrangian, constraints) = tire_model(p)?;
            Builtin::Mechanical(MechanicalBuiltin {
                name: "tire",
                lagrangian,
                constraints,
                initial: p.consistent_state(0.0, [0.0, 0.1, 0.0, 0.05, 0.0], 0.5, 0.0, 0.2),
                mobility: Some(vec![0.0, 0.0, 0.0, 1.0, 1.0]),
                tire: Some(p),
            })
        }
        "particle" => {
            let offset = take(&mut rest, "offset", 0.0);
            let (lagrangian, constraints) = nonholonomic_particle(offset)?;
            Builtin::Mechanical(MechanicalBuiltin {
                name: "particle",
                lagrangian,
                constraints,
                initial: MechState::new(0.0, vec![0.0, 0.0, 0.0], vec![1.0, 2.0, -offset]),
                mobility: None,
                tire: None,
            })
        }
        "oscillator" => {
            let mass = take(&mut rest, "mass", 2.0);
            let k = take(&mut rest, "k", 3.0);
            let lagrangian = harmonic_oscillator(mass, k)?;
            let constraints = ConstraintSet::empty(lagrangian.space().clone());
            Builtin::Mechanical(MechanicalBuiltin {
                name: "oscillator",
                lagrangian,
                constraints,
                initial: MechState::new(0.0, vec![1.0], vec![0.0]),
                mobility: None,
                tire: None,
            })
        }
        "wave" => {
            let lagrangian = wave_model();
            let constraints = ConstraintSet::empty(lagrangian.space().clone());
            Builtin::Field(FieldBuiltin {
                name: "wave",
                lagrangian,
                constraints,
                initial: standing_wave_initial,
                exact: Some(standing_wave),
            })
        }
        "scalar-constrained" => {
            let c = take(&mut rest, "c", 0.5);
            let (lagrangian, constraints) = scalar_constrained_model(c)?;
            Builtin::Field(FieldBuiltin {
                name: "scalar-constrained",
                lagrangian,
                constraints,
                initial: scalar_constrained_initial,
                exact: None,
            })
        }
        other => {
            return Err(Error::Construction(format!(
                "unknown model {other:?} (available: {})",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    if let Some((k, _)) = rest.first() {
        return Err(Error::Construction(format!("model {name:?} has no parameter {k:?}")));
    }
    Ok(out)
}

/// Whether some eigenvalue has real part above `tol`.
pub fn is_unstable(eig: &[Complex<f64>], tol: f64) -> bool {
    spectral_abscissa(eig) > tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{eval_derivatives, hessian_regularity, JetPoint};
    use crate::linalg;

    #[test]
    fn tire_hessian_at_origin() {
        let p = TireParams::default();
        let (model, _) = tire_model(p).unwrap();
        let b = eval_derivatives(&model, &JetPoint::zeros(model.space())).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![p.m_x, p.i_kappa, p.i_theta, 0.0, 0.0]));
        assert_eq!(b.hessian_zz, expected);
        let r = hessian_regularity(&model, &JetPoint::zeros(model.space()), 1e-10).unwrap();
        assert!(!r.regular);
        assert_eq!(r.vanishing_count(), 2);
    }

    #[test]
    fn potential_values() {
        let p = TireParams::default();
        assert_eq!(p.potential(0.0, 1.0, 0.0), 0.5 * p.a);
        let (_, dxi, _) = p.potential_gradient(0.1, 0.05, 0.0);
        assert!((dxi - 0.4).abs() < 1e-15);
    }

    #[test]
    fn tire_constraint_rows() {
        let (_, cs) = tire_model(TireParams::default()).unwrap();
        let s = TireParams::default().consistent_state(0.3, [0.1, 0.2, -0.3, 0.4, 0.5], 1.0, -1.0, 2.0);
        let a = cs.jacobian_z(&s.to_jet()).unwrap();
        assert_eq!(
            a,
            DMatrix::from_row_slice(2, 5, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0])
        );
        assert!(linalg::max_abs(&cs.eval(&s.to_jet()).unwrap()) < 1e-15);
    }

    #[test]
    fn reference_rhs_rejects_inconsistent_states() {
        let p = TireParams::default();
        let mut s = p.consistent_state(0.0, [0.0; 5], 1.0, 0.0, 0.0);
        let rhs = tire_reference_rhs(&p, &s).unwrap();
        assert_eq!((rhs[5], rhs[6], rhs[7]), (0.0, 0.0, 0.0));
        s.qdot[3] += 1e-6;
        assert!(matches!(
            tire_reference_rhs(&p, &s),
            Err(Error::InconsistentState { .. })
        ));
    }

    #[test]
    fn parameter_validation() {
        let mut p = TireParams::default();
        p.set("a", -1.0).unwrap();
        assert!(tire_model(p).is_err());
        assert!(p.set("zeta", 1.0).is_err());
        assert!(builtin("tire", &[("a".into(), -1.0)]).is_err());
        assert!(builtin("wave", &[("c".into(), 1.0)]).is_err());
        assert!(builtin("nope", &[]).is_err());
    }

    #[test]
    fn zero_rolling_speed_decouples() {
        let p = TireParams {
            v: 0.0,
            ..Default::default()
        };
        let eig = tire_linearize(&p).unwrap();
        assert_eq!(eig.len(), 10);
        assert!(eig.iter().all(|e| e.re.abs() < 1e-9));
    }

    #[test]
    fn wave_null_jets_have_zero_density() {
        let model = wave_model();
        let p = JetPoint::from_slices(&[0.0, 0.0], &[0.3], &[0.7, 0.7]);
        assert_eq!(model.value(&p).unwrap(), 0.0);
    }

    #[test]
    fn scalar_constraint_row() {
        let (_, cs) = scalar_constrained_model(0.5).unwrap();
        let p = JetPoint::from_slices(&[0.0, 0.0], &[0.0, 0.0], &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(
            cs.jacobian_z(&p).unwrap(),
            DMatrix::from_row_slice(1, 4, &[1.0, 0.0, 0.0, -0.5])
        );
    }
}
