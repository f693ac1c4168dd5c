use nalgebra::{DMatrix, DVector, SymmetricEigen};
use pathheat::geometry::Manifold;
use pathheat::jacobi::{
    default_delta, jacobi_basis, jacobi_series, remainder_expansion, q_operator, sup_bound, DeltaAdmissibility,
    JacobiSeries,
};
use pathheat::pathgrid::{anti_development, develop};
use pathheat::stats::stream;
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

/// B(r) D0^{-1} through the eigen-decomposition of a symmetric coefficient.
fn eigen_oracle(a: &DMatrix<f64>, eps: f64, r: f64) -> DMatrix<f64> {
    let e = SymmetricEigen::new(a.clone());
    let s = |lam: f64, x: f64| {
        if lam > 1e-14 {
            (lam.sqrt() * x).sinh() / lam.sqrt()
        } else if lam < -1e-14 {
            ((-lam).sqrt() * x).sin() / (-lam).sqrt()
        } else {
            x
        }
    };
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        a.nrows(),
        e.eigenvalues.iter().map(|&l| s(l, r) / s(l, eps)),
    ));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

#[test]
fn admissibility_of_default_delta() {
    let m = Manifold::sphere(2, 1.0);
    let d = default_delta(&m);
    assert!(DeltaAdmissibility::new(m.kappa0, d).ok());
    assert!(!DeltaAdmissibility::new(m.kappa0, 1.2 * d).ok());
    assert!(DeltaAdmissibility::new(0.0, f64::INFINITY).ok());
    assert!(DeltaAdmissibility::new(1.0, 0.6).require().is_err());
}

#[test]
fn sphere_normal_field_is_a_sine() {
    let m = Manifold::sphere(2, 1.0);
    let o = m.origin();
    let u = m.reference_frame(&o);
    let n = 4;
    let eps = 1.0 / n as f64;
    let theta = 0.4;
    let incs = vec![DVector::from_vec(vec![theta, 0.0]); n];
    let delta = default_delta(&m);
    let (path, frames) = develop(&m, &o, &u, &incs, delta).unwrap();
    let ad = anti_development(&m, &path, &frames).unwrap();
    let normal = jacobi_basis(&m, &path, &frames, &ad, 1, 2).unwrap();
    let along = jacobi_basis(&m, &path, &frames, &ad, 0, 2).unwrap();
    for k in 0..=10 {
        let r = eps * k as f64 / 10.0;
        let h = normal.value(r);
        let expect = (theta * r / eps).sin() / theta.sin() / eps.sqrt();
        assert!((h[1] - expect).abs() < 1e-12 && h[0].abs() < 1e-12);
        let g = along.value(r);
        assert!((g[0] - r / eps / eps.sqrt()).abs() < 1e-12 && g[1].abs() < 1e-12);
    }
}

/// Shooting oracle for h'' = A h with h(0) = 0, h(eps) = target: one RK4 shot per unit slope.
fn shoot(a: &DMatrix<f64>, eps: f64, target: &DVector<f64>, steps: usize) -> Vec<DVector<f64>> {
    let d = a.nrows();
    let run = |slope: &DVector<f64>| {
        let h = eps / steps as f64;
        let (mut y, mut p) = (DVector::zeros(d), slope.clone());
        let mut out = vec![y.clone()];
        for _ in 0..steps {
            let k1 = (p.clone(), a * &y);
            let k2 = (&p + &k1.1 * (h / 2.0), a * (&y + &k1.0 * (h / 2.0)));
            let k3 = (&p + &k2.1 * (h / 2.0), a * (&y + &k2.0 * (h / 2.0)));
            let k4 = (&p + &k3.1 * h, a * (&y + &k3.0 * h));
            y += (k1.0 + &k2.0 * 2.0 + &k3.0 * 2.0 + k4.0) * (h / 6.0);
            p += (k1.1 + &k2.1 * 2.0 + &k3.1 * 2.0 + k4.1) * (h / 6.0);
            out.push(y.clone());
        }
        out
    };
    let mut end = DMatrix::zeros(d, d);
    for c in 0..d {
        let mut e = DVector::zeros(d);
        e[c] = 1.0;
        end.set_column(c, run(&e).last().unwrap());
    }
    let slope = end.try_inverse().unwrap() * target;
    run(&slope)
}

#[test]
fn basis_field_matches_shooting_on_sphere() {
    let m = Manifold::sphere(2, 1.0);
    let o = m.origin();
    let u = m.reference_frame(&o);
    let incs = vec![DVector::from_vec(vec![0.18, -0.24]), DVector::from_vec(vec![0.1, 0.2])];
    let (path, frames) = develop(&m, &o, &u, &incs, default_delta(&m)).unwrap();
    let ad = anti_development(&m, &path, &frames).unwrap();
    let eps = path.eps();
    for a in 0..2 {
        let h = jacobi_basis(&m, &path, &frames, &ad, a, 1).unwrap();
        let mut target = DVector::zeros(2);
        target[a] = 1.0 / eps.sqrt();
        let steps = 400;
        let shot = shoot(&h.a0, eps, &target, steps);
        for (k, y) in shot.iter().enumerate().step_by(40) {
            let r = eps * k as f64 / steps as f64;
            assert!((h.value(r) - y).norm() < 1e-8);
        }
    }
}

#[test]
fn q_operator_support() {
    let m = Manifold::sphere(2, 1.0);
    let o = m.origin();
    let incs = vec![DVector::from_vec(vec![0.2, 0.1]); 3];
    let (path, frames) = develop(&m, &o, &m.reference_frame(&o), &incs, default_delta(&m)).unwrap();
    let ad = anti_development(&m, &path, &frames).unwrap();
    let h = jacobi_basis(&m, &path, &frames, &ad, 0, 2).unwrap();
    assert_eq!(q_operator(&m, &path, &frames, &ad, &h, 1).unwrap().norm(), 0.0);
    assert!(q_operator(&m, &path, &frames, &ad, &h, 2).is_ok());
    assert!(q_operator(&m, &path, &frames, &ad, &h, 3).is_err());
    assert!(jacobi_basis(&m, &path, &frames, &ad, 2, 1).is_err());
    assert!(jacobi_basis(&m, &path, &frames, &ad, 0, 0).is_err());
}

#[test]
fn remainder_shrinks_with_step() {
    let m = Manifold::sphere(2, 1.0);
    let o = m.origin();
    let u = m.reference_frame(&o);
    let eps = 0.125;
    let rem = |len: f64| {
        let db = DVector::from_vec(vec![0.6 * len, 0.8 * len]);
        remainder_expansion(&m, &u, &db, 1, eps, 0.7 * eps).unwrap().remainder
    };
    let (r1, r2) = (rem(0.2), rem(0.1));
    assert!(r2 < r1 / 4.0, "{r1} {r2}");
    assert!(remainder_expansion(&m, &u, &DVector::from_vec(vec![0.7, 0.0]), 0, eps, eps).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn series_matches_eigen_oracle(seed in any::<u64>(), d in 1usize..4, scale in 0.0f64..40.0, frac in 0.0f64..1.0) {
        let mut rng = stream(seed, 0);
        let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
        let a = (&g + g.transpose()) * (0.5 * scale / d as f64);
        let eps = 0.25;
        let r = frac * eps;
        let series = jacobi_series(&a, eps, r);
        prop_assume!(series.is_ok());
        let oracle = eigen_oracle(&a, eps, r);
        prop_assert!((series.unwrap() - &oracle).norm() < 1e-10 * (1.0 + oracle.norm()));
        let s = JacobiSeries::new(&a, eps).unwrap();
        let fd = (s.b(r + 1e-6) - s.b(r - 1e-6)) / 2e-6;
        prop_assert!((fd - s.b_prime(r)).norm() < 1e-7);
    }

    #[test]
    fn sup_bound_on_random_admissible_paths(seed in any::<u64>(), n in 2usize..16) {
        let m = Manifold::sphere(2, 1.0);
        let delta = default_delta(&m);
        let mut rng = stream(seed, 1);
        let incs: Vec<DVector<f64>> = (0..n)
            .map(|_| {
                let v: DVector<f64> = DVector::from_fn(2, |_, _| StandardNormal.sample(&mut rng));
                let len = 0.999 * delta * rand::Rng::random::<f64>(&mut rng);
                &v * (len / v.norm())
            })
            .collect();
        let o = m.origin();
        let (path, frames) = develop(&m, &o, &m.reference_frame(&o), &incs, delta).unwrap();
        let ad = anti_development(&m, &path, &frames).unwrap();
        let bound = sup_bound(m.kappa0, delta, path.eps());
        for i in 1..=n {
            for a in 0..2 {
                let h = jacobi_basis(&m, &path, &frames, &ad, a, i).unwrap();
                prop_assert!(h.sup_norm() <= bound);
            }
        }
    }
}
