use nalgebra::DVector;
use pathheat::dynamics::horizontal_brownian;
use pathheat::functionals::{
    beta_h, directional_derivative, directional_derivative_fd, energy_summands, eval_cylinder, ibp_check, l2_gradient,
    CylinderFunction, DirectionField, Inner, Outer,
};
use pathheat::geometry::Manifold;
use pathheat::pathgrid::Partition;
use pathheat::stats::stream;
use pathheat::Error;
use proptest::prelude::*;

fn functionals() -> Vec<CylinderFunction> {
    vec![
        CylinderFunction::parse("time_integral(0)").unwrap(),
        CylinderFunction::parse("sin(ambient_coord(3,2))").unwrap(),
        CylinderFunction::parse("square(squared_integral(1))").unwrap(),
        CylinderFunction::new(Outer::Exp { c: 0.7 }, vec![Inner::TimeIntegral { axis: 2 }]).unwrap(),
        CylinderFunction::new(
            Outer::Product,
            vec![Inner::AmbientCoord { index: 5, axis: 0 }, Inner::SquaredIntegral { axis: 2 }],
        )
        .unwrap(),
    ]
}

/// Variance of the trapezoid integral of one Brownian coordinate on the grid.
fn trapezoid_variance(n: usize) -> f64 {
    let p = Partition::new(n).unwrap();
    let w = p.trapezoid_weights();
    let mut v = 0.0;
    for i in 0..=n {
        for j in 0..=n {
            v += w[i] * w[j] * p.time(i).min(p.time(j));
        }
    }
    v
}

#[test]
fn parse_names() {
    assert_eq!(
        CylinderFunction::parse("cos( time_integral(1) )").unwrap(),
        CylinderFunction::new(Outer::Cos, vec![Inner::TimeIntegral { axis: 1 }]).unwrap()
    );
    assert!(CylinderFunction::parse("tan(time_integral(0))").is_err());
    assert!(CylinderFunction::parse("time_integral(a)").is_err());
    assert!(CylinderFunction::new(Outer::Product, vec![Inner::TimeIntegral { axis: 0 }]).is_err());
}

#[test]
fn flat_energy_of_time_integral_is_one_half() {
    let m = Manifold::euclidean(1);
    let mut rng = stream(1, 0);
    let hs = horizontal_brownian(&m, &m.origin(), &m.reference_frame(&m.origin()), 1.0 / 16.0, 16, &mut rng).unwrap();
    let f = CylinderFunction::parse("time_integral(0)").unwrap();
    let e: f64 = energy_summands(&m, &f, &hs.path, &hs.frames).unwrap().iter().sum();
    assert!((e - 0.5).abs() < 1e-15);
    let df = l2_gradient(&m, &f, &hs.path, &hs.frames).unwrap();
    assert!(df.iter().all(|v| (v[0] - 1.0).abs() < 1e-15));
}

#[test]
fn direction_field_norms() {
    let v = vec![3.0, 4.0];
    assert_eq!(DirectionField::Linear { v: v.clone() }.cameron_martin_norm2(), 25.0);
    assert!((DirectionField::Bridge { v: v.clone() }.cameron_martin_norm2() - 25.0 / 3.0).abs() < 1e-14);
    // freq 1: h' = (pi/2) cos(pi s/2) v, so int |h'|^2 = pi^2/8 |v|^2.
    let s = DirectionField::Sine { v, freq: 1.0 };
    assert!((s.cameron_martin_norm2() - 25.0 * std::f64::consts::PI.powi(2) / 8.0).abs() < 1e-12);
    assert!(s.value(0.0).norm() == 0.0 && DirectionField::Bridge { v: vec![1.0] }.is_loop());
}

#[test]
fn beta_h_requires_increments() {
    let m = Manifold::sphere(2, 1.0);
    let mut rng = stream(2, 0);
    let hs = horizontal_brownian(&m, &m.origin(), &m.reference_frame(&m.origin()), 0.125, 8, &mut rng).unwrap();
    let h = DirectionField::Linear { v: vec![1.0, 0.0] };
    let err = beta_h(&m, &hs.path, &hs.frames, None, &h, true).unwrap_err();
    assert!(matches!(err, Error::Provenance(_)));
    // Without the curvature part the flat formula is sum (h_i - h_{i-1})/dt . dB_i = B_1 . v.
    let b = beta_h(&m, &hs.path, &hs.frames, Some(&hs.increments), &h, false).unwrap();
    let total: DVector<f64> = hs.increments.iter().sum();
    assert!((b - total[0]).abs() < 1e-12);
}

#[test]
fn flat_ibp_matches_gaussian_closed_form() {
    // F = exp(c I) with I the trapezoid integral, h(s) = s e_1: both sides equal
    // (1/2) c exp(c^2 sigma^2 / 2).
    let m = Manifold::euclidean(1);
    let c = 0.8;
    let steps = 16;
    let f = CylinderFunction::new(Outer::Exp { c }, vec![Inner::TimeIntegral { axis: 0 }]).unwrap();
    let h = DirectionField::Linear { v: vec![1.0] };
    let r = ibp_check(&m, &f, &h, 40_000, steps, 3).unwrap();
    let exact = 0.5 * c * (c * c * trapezoid_variance(steps) / 2.0).exp();
    assert!((r.lhs - exact).abs() < 3.5 * r.stderr_lhs, "{} vs {exact}", r.lhs);
    assert!((r.rhs - exact).abs() < 3.5 * r.stderr_rhs, "{} vs {exact}", r.rhs);
}

#[test]
fn sphere_ibp_balances() {
    let m = Manifold::sphere(2, 1.0);
    let f = CylinderFunction::parse("time_integral(0)").unwrap();
    let h = DirectionField::Linear { v: vec![1.0, 0.0] };
    let r = ibp_check(&m, &f, &h, 20_000, 32, 4).unwrap();
    assert!(r.z.abs() < 4.0, "{r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn gradient_matches_finite_differences(seed in any::<u64>(), which in 0usize..5, dir in 0usize..3) {
        let m = Manifold::sphere(2, 1.0);
        let mut rng = stream(seed, 0);
        let hs = horizontal_brownian(&m, &m.origin(), &m.reference_frame(&m.origin()), 0.125, 8, &mut rng).unwrap();
        let f = &functionals()[which];
        let h = [
            DirectionField::Linear { v: vec![0.3, -1.0] },
            DirectionField::Sine { v: vec![1.0, 0.5], freq: 3.0 },
            DirectionField::Bridge { v: vec![-0.4, 0.9] },
        ][dir].clone();
        let analytic = directional_derivative(&m, f, &hs.path, &hs.frames, &h).unwrap();
        let fd = directional_derivative_fd(&m, f, &hs.path, &hs.frames, &h, 1e-4).unwrap();
        prop_assert!((analytic - fd).abs() < 1e-6 * (1.0 + analytic.abs()), "{} vs {}", analytic, fd);
        prop_assert!(eval_cylinder(&m, f, &hs.path).unwrap().is_finite());
    }
}
