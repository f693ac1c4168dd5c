use std::f64::consts::PI;

use nalgebra::DVector;
use pathheat::drift::{drift_field_full, SmoothPath};
use pathheat::dynamics::{
    brownian_path_sample, flat_she_exact, horizontal_brownian, run_until, she_step, she_step_sigma, BasisKind,
    FlatSpectralState, SheSettings, SheState, Variant,
};
use pathheat::geometry::Manifold;
use pathheat::jacobi::default_delta;
use pathheat::pathgrid::{horizontal_lift, Partition};
use pathheat::stats::{ks_pvalue, ks_statistic, mean_stderr, stream};
use statrs::distribution::{ContinuousCDF, Normal};

#[test]
fn stationary_series_sums_to_min_and_bridge() {
    for (kind, target) in [
        (BasisKind::DirichletNeumann, Box::new(|s: f64, t: f64| s.min(t)) as Box<dyn Fn(f64, f64) -> f64>),
        (BasisKind::DirichletDirichlet, Box::new(|s: f64, t: f64| s.min(t) * (1.0 - s.max(t)))),
    ] {
        let st = FlatSpectralState::zero(kind, 4000, 1);
        for (s, t) in [(0.2, 0.7), (0.5, 0.5), (0.9, 0.3), (1.0, 1.0)] {
            let err = (st.stationary_covariance(s, t) - target(s, t)).abs();
            assert!(err <= 2.0 * kind.tail_bound(4000), "{kind:?} {s} {t} {err}");
        }
    }
}

#[test]
fn exact_ou_reaches_stationary_variance() {
    let chains = 4000;
    let samples: Vec<f64> = (0..chains)
        .map(|c| {
            let mut rng = stream(5, c);
            let mut st = FlatSpectralState::zero(BasisKind::DirichletNeumann, 128, 1);
            for _ in 0..10 {
                flat_she_exact(&mut st, 1.0, &mut rng);
            }
            st.field(0.5)[0]
        })
        .collect();
    let sq: Vec<f64> = samples.iter().map(|x| x * x).collect();
    let (var, se) = mean_stderr(&sq);
    assert!((var - 0.5).abs() < 4.0 * se + BasisKind::DirichletNeumann.tail_bound(128), "{var} +- {se}");
}

#[test]
fn zero_noise_geodesic_flow_matches_rk4() {
    let m = Manifold::sphere(2, 1.0);
    let n = 6;
    let path = SmoothPath::GreatCircle { speed: 1.0 }.sample(&m, n, default_delta(&m)).unwrap();
    let frame0 = m.reference_frame(&m.origin());
    let mut settings = SheSettings::with_default_dt(Variant::Full, path.eps());
    settings.noise_scale = 0.0;
    settings.dt = 2.5e-4;
    let mut state = SheState::new(&m, path.clone(), &frame0, settings, stream(0, 0)).unwrap();
    run_until(&m, &mut state, 0.1, |_, _, _| {}).unwrap();

    // RK4 in the ambient space with re-normalization, using the drift field directly.
    let rhs = |pts: &[DVector<f64>]| -> Vec<DVector<f64>> {
        let p = path.with_points(pts.to_vec());
        let frames = horizontal_lift(&m, &p, &frame0).unwrap();
        drift_field_full(&m, &p, &frames).unwrap().vectors.into_iter().map(|v| -v).collect()
    };
    let add = |a: &[DVector<f64>], k: &[DVector<f64>], h: f64| -> Vec<DVector<f64>> {
        a.iter().zip(k).map(|(x, v)| (x + v * h).normalize()).collect()
    };
    let mut pts = path.points.clone();
    let h = 1e-4;
    for _ in 0..1000 {
        let k1 = rhs(&pts);
        let k2 = rhs(&add(&pts, &k1, h / 2.0));
        let k3 = rhs(&add(&pts, &k2, h / 2.0));
        let k4 = rhs(&add(&pts, &k3, h));
        pts = pts
            .iter()
            .enumerate()
            .map(|(i, x)| (x + (&k1[i] + &k2[i] * 2.0 + &k3[i] * 2.0 + &k4[i]) * (h / 6.0)).normalize())
            .collect();
    }
    for (a, b) in state.path.points.iter().zip(&pts) {
        assert!((a - b).norm() < 1e-6, "{}", (a - b).norm());
        // Stays on the great circle through the origin and e_0.
        assert!(a[1].abs() < 1e-12);
    }
}

#[test]
fn sigma_step_from_constant_path_has_gaussian_increments() {
    let m = Manifold::sphere(2, 1.0);
    let n = 4;
    let path = SmoothPath::Constant.sample(&m, n, default_delta(&m)).unwrap();
    let frame0 = m.reference_frame(&m.origin());
    let eps = path.eps();
    let dt = 1e-7;
    let mut coords = Vec::new();
    for k in 0..1250 {
        let settings = SheSettings { dt, ..SheSettings::with_default_dt(Variant::Sigma, eps) };
        let mut st = SheState::new(&m, path.clone(), &frame0, settings, stream(77, k)).unwrap();
        she_step_sigma(&m, &mut st, dt).unwrap();
        assert!(she_step(&m, &mut st, dt).is_err());
        for i in 1..=n {
            let v = m.log(path.point(i), st.path.point(i)).unwrap();
            coords.extend(m.frame_coords(&frame0, &v).iter().map(|x| x / (dt / eps).sqrt()));
        }
    }
    let normal = Normal::standard();
    let d = ks_statistic(&coords, |x| normal.cdf(x));
    assert!(ks_pvalue(d, coords.len()) > 0.01, "D = {d}");
    let sq: Vec<f64> = coords.iter().map(|x| x * x).collect();
    let (var, se) = mean_stderr(&sq);
    assert!((var - 1.0).abs() < 4.0 * se);
}

#[test]
fn frames_stay_orthonormal_over_many_steps() {
    let m = Manifold::sphere(2, 3.0);
    let part = Partition::new(4).unwrap();
    let delta = default_delta(&m);
    let mut rng = stream(8, 0);
    let (path, _) = brownian_path_sample(&m, &m.origin(), part, delta, 4, &mut rng).unwrap();
    let settings = SheSettings::with_default_dt(Variant::Full, part.eps);
    let mut st = SheState::new(&m, path, &m.reference_frame(&m.origin()), settings.clone(), rng).unwrap();
    let t_end = 1000.0 * settings.dt;
    let steps = run_until(&m, &mut st, t_end, |_, _, _| {}).unwrap();
    assert!(steps >= 1000);
    for u in &st.frames.frames {
        assert!(m.frame_orthonormality_error(u) < 1e-8);
    }
}

#[test]
fn circle_brownian_endpoint_is_wrapped_gaussian() {
    let m = Manifold::circle(2.0 * PI);
    let o = m.origin();
    let u = m.reference_frame(&o);
    let steps = 32;
    let ends: Vec<f64> = (0..4000)
        .map(|k| {
            let mut rng = stream(13, k);
            let s = horizontal_brownian(&m, &o, &u, 1.0 / steps as f64, steps, &mut rng).unwrap();
            let x = s.path.point(steps)[0];
            if x >= PI { x - 2.0 * PI } else { x }
        })
        .collect();
    let normal = Normal::standard();
    let cdf = |x: f64| (-6..=6).map(|k| {
        let shift = 2.0 * PI * k as f64;
        normal.cdf(x + shift) - normal.cdf(-PI + shift)
    }).sum::<f64>();
    let d = ks_statistic(&ends, cdf);
    assert!(ks_pvalue(d, ends.len()) > 0.01, "D = {d}");
}

#[test]
fn sampler_reports_oversized_steps() {
    let m = Manifold::sphere(2, 1.0);
    let mut rng = stream(0, 0);
    assert!(brownian_path_sample(&m, &m.origin(), Partition::new(2).unwrap(), 0.02, 1, &mut rng).is_err());
    let spectral = SheSettings::with_default_dt(Variant::FlatDn, 0.5);
    let path = SmoothPath::Constant.sample(&m, 2, 0.5).unwrap();
    assert!(SheState::new(&m, path, &m.reference_frame(&m.origin()), spectral, stream(0, 1)).is_err());
}
