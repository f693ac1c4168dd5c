use std::f64::consts::{E, PI};
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use nalgebra::DMatrix;
use pathheat::functionals::{CylinderFunction, Inner, Outer};
use pathheat::geometry::Manifold;
use pathheat::inequalities::{
    c0, constant_report, einstein_a, einstein_lsi_constant, flow_bound, gourcy_wu_constant, gradient_ineq_check,
    lsi_constant, lsi_constant_direct, lsi_constant_taylor, lsi_empirical, ricci_flow_matrix, path_space_constants,
    PointFunction,
};
use pathheat::pathgrid::Partition;
use proptest::prelude::*;

fn integrate(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let gl = GaussLegendre::new(NonZeroUsize::new(40).unwrap());
    let half = 0.5 * (b - a);
    gl.as_node_weight_pairs().iter().map(|&(x, w)| half * w * f(a + half * (x + 1.0))).sum()
}

/// (e^K - 1 - K)/K^2 as int_0^1 (1 - t) e^{Kt} dt.
fn first_oracle(k: f64) -> f64 {
    integrate(0.0, 1.0, |t| (1.0 - t) * (k * t).exp())
}

/// C_0 through I = int_0^{1/2} e^{Kt} dt, so that (e^{K/2} - 1)/K = I.
fn c0_oracle(k: f64) -> f64 {
    let i = integrate(0.0, 0.5, |t| (k * t).exp());
    if k > 0.0 {
        2.0 * i * i
    } else {
        let a = k * i;
        4.0 * i * i / (1.0 + (1.0 - a * a).sqrt())
    }
}

#[test]
fn values_at_one() {
    assert!((lsi_constant(1.0) - (E - 2.0)).abs() < 1e-14);
    assert!((c0(1.0) - 2.0 * (E.sqrt() - 1.0).powi(2)).abs() < 1e-14);
    let gw = 4.0 * (1.0 - (2.0 * E.sqrt() - E).sqrt());
    assert!((gourcy_wu_constant(1.0).unwrap() - gw).abs() < 1e-14);
    assert!((gw - 0.9558956).abs() < 1e-7);
    assert!(gourcy_wu_constant(0.0).is_err());
    assert_eq!(lsi_constant(0.0), 0.5);
}

#[test]
fn constants_match_quadrature() {
    for k in [-8.0, -2.0, -0.7, -1e-2, -1e-3, -1e-5, 1e-5, 1e-3, 1e-2, 0.4, 1.0, 3.0] {
        let (f, z) = (first_oracle(k), c0_oracle(k));
        assert!((lsi_constant(k) - f.min(z)).abs() < 1e-13, "K = {k}");
        assert!((c0(k) - z).abs() < 1e-13, "K = {k}");
    }
}

#[test]
fn bound_never_exceeds_gourcy_wu() {
    for k in [-2.0, -1.0, -0.5, 0.5, 1.0] {
        assert!(lsi_constant(k) <= gourcy_wu_constant(k).unwrap(), "K = {k}");
    }
}

#[test]
fn branches_agree_near_zero() {
    for k in [-1e-3, 1e-3] {
        assert!((lsi_constant_direct(k) - lsi_constant_taylor(k)).abs() < 1e-10);
    }
}

#[test]
fn einstein_coefficients() {
    assert!((einstein_a(2.0, 0) - 1.0 / (1.0 + PI * PI / 4.0)).abs() < 1e-15);
    assert!((1..50).all(|k| einstein_a(2.0, k) < einstein_a(2.0, k - 1)));
    // sum_k 1/((2k+1)^2 + x^2) = pi tanh(pi x / 2) / (4x) gives sum |A_k| = tanh(|K|/2)/2.
    for kk in [-3.0f64, 0.5, 2.0] {
        let e = einstein_lsi_constant(kk, 2, 4000).unwrap();
        let exact = (kk.abs() / 2.0).tanh() / 2.0;
        assert!((e.sum_abs_a - exact).abs() <= e.tail_error + 1e-12, "{} vs {exact}", e.sum_abs_a);
    }
    assert!(einstein_lsi_constant(1.0, 2, 999).is_err());
}

#[test]
fn einstein_value_assembles_from_parts() {
    let (kk, d) = (1.5f64, 3);
    let s = (kk / 2.0).tanh() / 2.0;
    let growth = integrate(0.0, 1.0, |t| (kk * t).exp());
    let a0 = einstein_a(kk, 0);
    let b = (2.0 * PI / (kk * kk + PI * PI)).max(1.0 / PI);
    let expect = ((4.0 * d as f64 * s * s * growth + 2.0 * a0 * a0).sqrt() + b).powi(2);
    let got = einstein_lsi_constant(kk, d, 100_000).unwrap().value;
    assert!((got - expect).abs() < 1e-8 * expect, "{got} vs {expect}");
    let zero = einstein_lsi_constant(0.0, d, 1000).unwrap().value;
    assert!((zero - 4.0 / (PI * PI)).abs() < 1e-15);
    let tiny = einstein_lsi_constant(1e-7, d, 1000).unwrap().value;
    assert!((tiny - 4.0 / (PI * PI)).abs() < 1e-5);
}

#[test]
fn horizon_constants() {
    let (c1, c2) = path_space_constants(1.0, 1.0, 4).unwrap();
    assert!((c1 - 1.0).abs() < 1e-14);
    assert!((c2 - (E - 1.0)).abs() < 1e-14);
    for (k, t, n) in [(-1.0, 2.0, 3), (0.5, 0.7, 8), (1e-4, 1.0, 2), (-2.0, 0.3, 1)] {
        let (c1, c2) = path_space_constants(k, t, n).unwrap();
        let bracket = integrate(0.0, t, |s| s * (k * s).exp());
        let growth = integrate(0.0, t, |s| (k * s).exp());
        let c1_exact = bracket.max(t * t / 2.0);
        let c2_exact = growth * (-k / n as f64).exp().max(1.0);
        assert!((c1 - c1_exact).abs() < 1e-8 * c1_exact, "{k} {t} {n}: {c1} vs {c1_exact}");
        assert!((c2 - c2_exact).abs() < 1e-8 * c2_exact, "{k} {t} {n}: {c2} vs {c2_exact}");
    }
    assert!(path_space_constants(1.0, 0.0, 4).is_err());
    let r = constant_report(0.0, 2, 1.0, 4, 1000).unwrap();
    assert!(r.c_tilde.is_none() && r.branch == "taylor");
}

#[test]
fn ricci_flow_closed_forms() {
    let times: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let ones = vec![DMatrix::<f64>::identity(2, 2); times.len()];
    let ms = ricci_flow_matrix(&ones, &times).unwrap();
    for (m, t) in ms.iter().zip(&times) {
        assert!((m - DMatrix::identity(2, 2) * (-t / 2.0).exp()).norm() < 1e-8);
    }
    let bound = flow_bound(&ms, &times, -1.0).unwrap();
    assert!(bound.worst_slack.abs() < 1e-8);
    assert_eq!(bound.pairs, 21 * 20 / 2);
    assert!(flow_bound(&ms, &times, 0.0).unwrap().worst_slack < 0.0);
    assert!(flow_bound(&ms, &times, -2.0).unwrap().worst_slack > 0.0);
    let zeros = vec![DMatrix::<f64>::zeros(2, 2); times.len()];
    let flat = ricci_flow_matrix(&zeros, &times).unwrap();
    assert!(flat.iter().all(|m| (m - DMatrix::identity(2, 2)).norm() == 0.0));
}

#[test]
fn gradient_inequality_on_sphere() {
    let m = Manifold::sphere(2, 1.0);
    let y = m.origin();
    // x^0 is a first eigenfunction: grad p_s x^0 (o) = e^{-s} e_0 and |grad x^0| = 1 at o.
    let r = gradient_ineq_check(&m, &PointFunction::Coord { axis: 0 }, 0.5, 0.1, &y).unwrap();
    let lhs = (-0.1f64).exp() - (-0.5f64).exp();
    assert!((r.lhs - lhs).abs() < 1e-6, "{} vs {lhs}", r.lhs);
    assert!(r.margin >= -3.0 * r.quadrature_error);
    let r = gradient_ineq_check(&m, &PointFunction::CosCoord { axis: 1, freq: 2.0 }, 0.2, 1.0, &y).unwrap();
    assert!(r.margin >= -3.0 * r.quadrature_error, "{r:?}");
    let same = gradient_ineq_check(&m, &PointFunction::Coord { axis: 0 }, 0.3, 0.3, &y).unwrap();
    assert_eq!((same.lhs, same.rhs), (0.0, 0.0));
    assert!(gradient_ineq_check(&Manifold::sphere(3, 1.0), &PointFunction::Coord { axis: 0 }, 0.1, 0.2, &y).is_err());
}

#[test]
fn gradient_inequality_is_an_equality_for_flat_coordinates() {
    let m = Manifold::euclidean(2);
    let y = m.origin();
    let r = gradient_ineq_check(&m, &PointFunction::Coord { axis: 1 }, 0.8, 0.2, &y).unwrap();
    assert!((r.lhs - 0.6).abs() < 1e-8 && (r.rhs - 0.6).abs() < 1e-12);
    assert!(r.margin.abs() < 1e-8);
}

/// Variance of the trapezoid integral of one Brownian coordinate on the grid.
fn trapezoid_variance(n: usize) -> f64 {
    let p = Partition::new(n).unwrap();
    let w = p.trapezoid_weights();
    (0..=n).flat_map(|i| (0..=n).map(move |j| (i, j))).map(|(i, j)| w[i] * w[j] * p.time(i).min(p.time(j))).sum()
}

#[test]
fn flat_lsi_matches_gaussian_closed_form() {
    // F = exp(c I) with I ~ N(0, sigma^2): Ent(F^2) = 2 c^2 sigma^2 after normalization,
    // and |DF|^2 / F^2 = c^2 exactly, so the energy is c^2 / 2 on every sample.
    let m = Manifold::euclidean(1);
    let (c, n) = (0.5, 16);
    let f = CylinderFunction::new(Outer::Exp { c }, vec![Inner::TimeIntegral { axis: 0 }]).unwrap();
    let r = lsi_empirical(&m, &f, n, 1, 40_000, 11).unwrap();
    assert_eq!(r.c, 0.5);
    assert!((r.energy - c * c / 2.0).abs() < 1e-12);
    let entropy = 2.0 * c * c * trapezoid_variance(n);
    assert!((r.entropy - entropy).abs() < 3.0 * r.stderr, "{} vs {entropy}", r.entropy);
    assert!((r.slack - (c * c / 2.0 - entropy)).abs() < 3.0 * r.stderr);
    assert!(r.slack_unhalved > 0.0);
}

#[test]
fn constant_functional_has_no_entropy() {
    let m = Manifold::sphere(2, 1.0);
    let f = CylinderFunction::new(Outer::Exp { c: 0.0 }, vec![Inner::TimeIntegral { axis: 0 }]).unwrap();
    let r = lsi_empirical(&m, &f, 32, 2, 400, 3).unwrap();
    assert!(r.entropy.abs() < 1e-14 && r.energy == 0.0);
}

#[test]
fn sphere_lsi_holds_with_the_full_dirichlet_form() {
    // F = 1 + 0.2 I on unit S^2, K = -1. The slack against 2C(K) mu(|DF|^2) stays nonnegative.
    let m = Manifold::sphere(2, 1.0);
    let f = CylinderFunction::new(Outer::Affine { a: 1.0, b: 0.2 }, vec![Inner::TimeIntegral { axis: 0 }]).unwrap();
    let r = lsi_empirical(&m, &f, 16, 2, 100_000, 21).unwrap();
    assert_eq!(r.k, -1.0);
    assert!(r.slack_unhalved >= -3.0 * r.stderr_unhalved, "{r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn constant_is_positive_and_increasing(k in -20.0f64..10.0, dk in 1e-3f64..1.0) {
        prop_assert!(lsi_constant(k) > 0.0);
        prop_assert!(lsi_constant(k + dk) > lsi_constant(k));
        prop_assert!(lsi_constant(k) <= c0(k));
    }
}
