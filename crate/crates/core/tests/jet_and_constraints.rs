use nalgebra::{DMatrix, DVector};
use nhfield_core::constraints::DEFAULT_RANK_TOL;
use nhfield_core::linalg::max_abs_mat;
use nhfield_core::models::{tire_model, wave_model, TireParams};
use nhfield_core::{
    affine_constraints, check_derivatives, constraint_regularity, eval_derivatives, hessian_regularity,
    AffineFormCoefficients, Coefficient, ConstraintSet, FiberedSpace, JetPoint, LagrangianModel,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_jet(rng: &mut ChaCha8Rng, n: usize, m: usize, r: f64) -> JetPoint {
    let mut u = |len: usize| (0..len).map(|_| rng.random_range(-r..r)).collect::<Vec<_>>();
    let (x, y, z) = (u(n), u(m), u(n * m));
    JetPoint::from_slices(&x, &y, &z)
}

/// A smooth non-quadratic density on n = 2, m = 2 with no analytic partials.
fn anharmonic() -> LagrangianModel {
    let space = FiberedSpace::with_dims(2, 2).unwrap();
    LagrangianModel::new(space, |p| {
        let z = p.z_flat();
        0.5 * (z[0] * z[0] - z[1] * z[1] + z[2] * z[2] - z[3] * z[3])
            + 0.1 * (z[0] * z[3]).sin()
            + 0.05 * p.y[0] * z[1] * z[2]
            + 0.02 * p.x[0] * z[0].powi(3)
            - 0.5 * p.y[1].powi(2)
    })
}

/// A quadratic density with hand-written partials.
fn quadratic() -> LagrangianModel {
    let space = FiberedSpace::with_dims(2, 2).unwrap();
    // L = ½ zᵀ Q z + yᵀ B z + x₀ c·z − ½|y|², z flattened.
    let q = DMatrix::from_row_slice(
        4,
        4,
        &[
            2.0, 0.3, 0.0, 0.1, 0.3, -1.0, 0.2, 0.0, 0.0, 0.2, 1.5, -0.4, 0.1, 0.0, -0.4, -0.7,
        ],
    );
    let bmat = DMatrix::from_row_slice(2, 4, &[0.5, 0.0, -0.2, 0.1, 0.0, 0.3, 0.0, 0.6]);
    let c = DVector::from_vec(vec![0.1, -0.2, 0.3, 0.0]);
    let (q1, q2, q3) = (q.clone(), q.clone(), q.clone());
    let (b1, b2, b3, b4) = (bmat.clone(), bmat.clone(), bmat.clone(), bmat.clone());
    let (c1, c2, c3) = (c.clone(), c.clone(), c.clone());
    LagrangianModel::new(space, move |p| {
        let z = p.z_flat();
        0.5 * z.dot(&(&q1 * &z)) + p.y.dot(&(&b1 * &z)) + p.x[0] * c1.dot(&z) - 0.5 * p.y.norm_squared()
    })
    .with_dl_dy(move |p| &b2 * p.z_flat() - &p.y)
    .with_dl_dz(move |p| &q2 * p.z_flat() + b3.tr_mul(&p.y) + &c2 * p.x[0])
    .with_hessian_zz(move |_| q3.clone())
    .with_mixed_yz(move |_| b4.clone())
    .with_mixed_xz(move |_| {
        let mut m = DMatrix::zeros(2, 4);
        m.set_row(0, &c3.transpose());
        m
    })
}

#[test]
fn tire_closures_agree_with_differencing_on_random_jets() {
    let (model, _) = tire_model(TireParams::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let probes: Vec<JetPoint> = (0..100).map(|_| random_jet(&mut rng, 1, 5, 1.0)).collect();
    let report = check_derivatives(&model, &probes, 1e-6).unwrap();
    assert!(report.passed(), "{report:?}");
    assert_eq!(report.partials.len(), 5);
}

#[test]
fn tire_hessian_is_the_hand_hessian() {
    let p = TireParams::default();
    let (model, _) = tire_model(p).unwrap();
    let differenced = model.differenced();
    let origin = JetPoint::zeros(model.space());
    let h = eval_derivatives(&differenced, &origin).unwrap().hessian_zz;
    // ∂²(T − U)/∂q̇∂q̇ with T = ½(m_x ẋ² + I_κ κ̇² + I_θ θ̇²) and U free of velocities.
    let hand = DMatrix::from_diagonal(&DVector::from_vec(vec![p.m_x, p.i_kappa, p.i_theta, 0.0, 0.0]));
    assert!(max_abs_mat(&(h - hand)) < 1e-9);
}

#[test]
fn regularity_flags_of_builtins() {
    let wave = wave_model();
    let r = hessian_regularity(&wave, &JetPoint::zeros(wave.space()), 1e-10).unwrap();
    assert!(r.regular);
    assert_eq!(r.singular_values, vec![1.0, 1.0]);

    let (tire, cs) = tire_model(TireParams::default()).unwrap();
    let origin = JetPoint::zeros(tire.space());
    let r = hessian_regularity(&tire, &origin, 1e-10).unwrap();
    assert!(!r.regular);
    assert_eq!(r.vanishing_count(), 2);
    let c = constraint_regularity(&cs, &origin, DEFAULT_RANK_TOL).unwrap();
    assert!(c.independent);
    assert_eq!(c.rank, 2);
}

#[test]
fn differenced_quadratic_matches_analytic() {
    let exact = quadratic();
    let diffed = exact.differenced();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let p = random_jet(&mut rng, 2, 2, 3.0);
        let a = eval_derivatives(&exact, &p).unwrap();
        let d = eval_derivatives(&diffed, &p).unwrap();
        let rel = |x: &DMatrix<f64>, y: &DMatrix<f64>| max_abs_mat(&(x - y)) / max_abs_mat(y).max(1.0);
        let col = |v: &DVector<f64>| DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        assert!(rel(&col(&d.dl_dy), &col(&a.dl_dy)) <= 1e-9);
        assert!(rel(&col(&d.dl_dz), &col(&a.dl_dz)) <= 1e-9);
        assert!(rel(&d.hessian_zz, &a.hessian_zz) <= 1e-9);
        assert!(rel(&d.mixed_yz, &a.mixed_yz) <= 1e-9);
        assert!(rel(&d.mixed_xz, &a.mixed_xz) <= 1e-9);
    }
}

#[test]
fn analytic_jacobians_of_affine_sets_agree_with_differencing() {
    let (_, cs) = tire_model(TireParams::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let probes: Vec<JetPoint> = (0..20).map(|_| random_jet(&mut rng, 1, 5, 1.0)).collect();
    assert!(cs.jacobian_discrepancy(&probes).unwrap() <= 1e-5);
}

fn random_affine_set(seed: u64, k: usize, m: usize, n: usize) -> (ConstraintSet, AffineFormCoefficients) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = AffineFormCoefficients::new(k, m, n);
    for a in 0..k {
        let (w0, w1, w2): (f64, f64, f64) = (rng.random_range(-1.0..1.0), rng.random(), rng.random());
        c.set_phi0(
            a,
            Coefficient::new(move |x, y| w0 * (w1 * x[0] + y[0]).sin() + w2 * y[m - 1].powi(2)),
        )
        .unwrap();
        for i in 0..m {
            for mu in 0..n {
                let (s0, s1): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0));
                c.set_coefficient(a, i, mu, Coefficient::new(move |x, y| s0 + s1 * (x[mu] * y[i]).cos()))
                    .unwrap();
            }
        }
    }
    let space = FiberedSpace::with_dims(n, m).unwrap();
    (affine_constraints(c.clone(), space).unwrap(), c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hessian_is_symmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_jet(&mut rng, 2, 2, 2.0);
        let h = anharmonic().hessian_zz(&p).unwrap();
        prop_assert!(max_abs_mat(&(&h - h.transpose())) <= 1e-12);
        let hq = quadratic().hessian_zz(&p).unwrap();
        prop_assert!(max_abs_mat(&(&hq - hq.transpose())) <= 1e-12);
    }

    #[test]
    fn regularity_flag_is_scale_free(seed in any::<u64>(), log_c in -3.0f64..3.0, negative in any::<bool>()) {
        let c = 10f64.powf(log_c) * if negative { -1.0 } else { 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_jet(&mut rng, 2, 2, 1.0);
        let base = anharmonic();
        let space = base.space().clone();
        let scaled = LagrangianModel::new(space, move |j| c * base.value(j).unwrap());
        let r0 = hessian_regularity(&anharmonic(), &p, 1e-10).unwrap();
        let r1 = hessian_regularity(&scaled, &p, 1e-10).unwrap();
        prop_assert_eq!(r0.regular, r1.regular);

        let (tire, _) = tire_model(TireParams::default()).unwrap();
        let tspace = tire.space().clone();
        let tscaled = LagrangianModel::new(tspace, move |j| c * tire.value(j).unwrap());
        let tp = random_jet(&mut rng, 1, 5, 1.0);
        prop_assert!(!hessian_regularity(&tscaled, &tp, 1e-10).unwrap().regular);
    }

    #[test]
    fn affine_sets_are_exactly_affine(seed in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let (cs, coeffs) = random_affine_set(seed, 2, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
        let p1 = random_jet(&mut rng, 2, 3, 1.0);
        let mut p2 = random_jet(&mut rng, 2, 3, 1.0);
        p2.x = p1.x.clone();
        p2.y = p1.y.clone();
        let mut p0 = p1.clone();
        p0.z.fill(0.0);
        let mut pc = p1.clone();
        pc.z = &p1.z * alpha + &p2.z * beta;
        let f0 = cs.eval(&p0).unwrap();
        let lhs = cs.eval(&pc).unwrap() - &f0;
        let rhs = (cs.eval(&p1).unwrap() - &f0) * alpha + (cs.eval(&p2).unwrap() - &f0) * beta;
        prop_assert!((lhs - rhs).amax() <= 1e-12);

        let a1 = cs.jacobian_z(&p1).unwrap();
        let a2 = cs.jacobian_z(&p2).unwrap();
        prop_assert!(max_abs_mat(&(&a1 - &a2)) <= 1e-12);
        prop_assert_eq!(a1, coeffs.coefficient_matrix(&p1.x, &p1.y));
    }

    #[test]
    fn constraint_flag_survives_row_rescaling(seed in any::<u64>(), s1 in -2.0f64..2.0, s2 in -2.0f64..2.0, flip in any::<bool>()) {
        let (cs, _) = random_affine_set(seed, 2, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_jet(&mut rng, 2, 3, 1.0);
        let scales = [10f64.powf(s1) * if flip { -1.0 } else { 1.0 }, 10f64.powf(s2)];
        let scaled = cs.scaled_rows(&scales).unwrap();
        prop_assert_eq!(
            constraint_regularity(&cs, &p, DEFAULT_RANK_TOL).unwrap().independent,
            constraint_regularity(&scaled, &p, DEFAULT_RANK_TOL).unwrap().independent
        );
        // A duplicated row stays dependent under any scaling.
        let dup = ConstraintSet::new(cs.space().clone(), 2, {
            let cs = cs.clone();
            move |j| { let v = cs.eval(j).unwrap()[0]; DVector::from_vec(vec![v, v]) }
        });
        let dup_scaled = dup.scaled_rows(&scales).unwrap();
        prop_assert!(!constraint_regularity(&dup_scaled, &p, DEFAULT_RANK_TOL).unwrap().independent);
    }
}
