use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use pathheat::geometry::Manifold;
use pathheat::measures::{
    heat_kernel_expectation, nu_expectation, nu_sample, nu_total_mass, richardson, wiener_expectation, ChainConfig,
};
use pathheat::pathgrid::energy;
use pathheat::stats::mean_stderr;

#[test]
fn flat_mass_is_one() {
    let m = Manifold::euclidean(2);
    let est = nu_total_mass(&m, &m.origin(), 8, 50.0, 2000, 1).unwrap();
    assert_eq!(est.value, 1.0);
    assert_eq!(est.truncated_fraction, 0.0);
}

#[test]
fn flat_truncated_mass_is_a_chi_square_probability() {
    // |N(0, eps I_2)|^2 / eps is chi-square with two degrees of freedom.
    let m = Manifold::euclidean(2);
    let (n, delta) = (4, 0.8);
    let eps = 1.0 / n as f64;
    let exact = (1.0 - (-delta * delta / (2.0 * eps)).exp()).powi(n as i32);
    let est = nu_total_mass(&m, &m.origin(), n, delta, 40_000, 2).unwrap();
    assert!((est.value - exact).abs() < 4.0 * est.stderr, "{} vs {exact}", est.value);
}

#[test]
fn sphere_mass_factorizes_over_steps() {
    // The weight is a product of independent sin(r)/r factors with r Rayleigh(sqrt(eps)),
    // so the mass is (eps^{-1} int_0^delta sin(r) e^{-r^2 / 2 eps} dr)^n.
    let m = Manifold::sphere(2, 1.0);
    let (n, delta) = (4, 0.9 * PI);
    let eps = 1.0 / n as f64;
    let gl = GaussLegendre::new(NonZeroUsize::new(60).unwrap());
    let h = delta / 2.0;
    let one: f64 =
        gl.as_node_weight_pairs().iter().map(|&(x, w)| h * w * (h * (x + 1.0)).sin() * (-(h * (x + 1.0)).powi(2) / (2.0 * eps)).exp()).sum::<f64>() / eps;
    let exact = one.powi(n as i32);
    let est = nu_total_mass(&m, &m.origin(), n, delta, 40_000, 3).unwrap();
    assert!(est.value < 1.0);
    assert!((est.value - exact).abs() < 4.0 * est.stderr, "{} vs {exact}", est.value);
    assert!(nu_total_mass(&m, &m.origin(), n, 4.0, 10, 3).is_err());
}

#[test]
fn unnormalized_expectation_of_one_is_the_mass() {
    let m = Manifold::sphere(2, 1.0);
    let o = m.origin();
    let mass = nu_total_mass(&m, &o, 4, 2.0, 5000, 9).unwrap();
    let (e, _) = nu_expectation(&m, &o, 4, 2.0, 5000, 9, |_| 1.0).unwrap();
    assert!((e - mass.value).abs() < 1e-12);
}

#[test]
fn heat_kernel_expectations() {
    let s2 = Manifold::sphere(2, 1.0);
    let o = s2.origin();
    for t in [0.05, 0.3, 2.0] {
        assert!((heat_kernel_expectation(&s2, &o, t, |_| 1.0, 64).unwrap() - 1.0).abs() < 1e-8);
        // The height along o is a first eigenfunction: E cos(theta) = e^{-t}.
        let h = heat_kernel_expectation(&s2, &o, t, |y| y.dot(&o), 64).unwrap();
        assert!((h - (-t).exp()).abs() < 1e-8, "t = {t}: {h}");
    }
    let circle = Manifold::circle(2.0 * PI);
    let c = circle.origin();
    let v = heat_kernel_expectation(&circle, &c, 1.0, |y| y[0].cos(), 64).unwrap();
    assert!((v - (-0.5f64).exp()).abs() < 1e-10);
    assert!(heat_kernel_expectation(&Manifold::sphere(3, 1.0), &Manifold::sphere(3, 1.0).origin(), 1.0, |_| 1.0, 8).is_err());
}

#[test]
fn wiener_circle_characteristic_function() {
    let m = Manifold::circle(2.0 * PI);
    let (v, se) = wiener_expectation(&m, &m.origin(), |p| p.point(p.n())[0].cos(), 16, 1, PI, 20_000, 4).unwrap();
    assert!((v - (-0.5f64).exp()).abs() < 4.0 * se, "{v} +- {se}");
}

#[test]
fn richardson_is_exact_on_polynomials_in_one_over_n() {
    let ns = [8, 16, 32];
    let lin: Vec<f64> = ns.iter().map(|&n| 2.0 + 3.0 / n as f64).collect();
    let (first, _) = richardson(&ns[1..], &lin[1..]);
    assert!((first - 2.0).abs() < 1e-13);
    let quad: Vec<f64> = ns.iter().map(|&n| 2.0 + 3.0 / n as f64 - 5.0 / (n * n) as f64).collect();
    let (_, second) = richardson(&ns, &quad);
    assert!((second.unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn mala_on_flat_grid_recovers_brownian_endpoint() {
    // On the line the normalized measure is the Brownian grid law, so x_n ~ N(0, 1).
    let m = Manifold::euclidean(1);
    let config = ChainConfig { chains: 4, burn_in: 2000, samples: 4000, thin: 4, ..ChainConfig::default() };
    let ens = nu_sample(&m, &m.origin(), 4, 50.0, &config, 5, |p| p.point(p.n())[0]).unwrap();
    let pr = &ens.provenance;
    assert!((0.1..=0.9).contains(&pr.acceptance_rate) && pr.gelman_rubin < 1.05);
    let sq: Vec<f64> = ens.paths.iter().map(|p| p.point(4)[0].powi(2)).collect();
    let (var, _) = mean_stderr(&sq);
    // Var of a chi-square(1) draw is 2; use the effective sample size for the error.
    let se = (2.0 / pr.effective_sample_size).sqrt();
    assert!((var - 1.0).abs() < 4.0 * se, "{var} with se {se}");
}

#[test]
fn mala_on_small_sphere_is_well_mixed() {
    let m = Manifold::sphere(2, 1.0);
    let config = ChainConfig { chains: 4, burn_in: 1000, samples: 2000, thin: 2, ..ChainConfig::default() };
    let ens = nu_sample(&m, &m.origin(), 4, 2.0, &config, 6, |p| energy(&m, p)).unwrap();
    assert_eq!(ens.paths.len(), 4 * 2000);
    assert!(ens.paths.iter().all(|p| (1..=4).all(|i| m.dist(p.point(i - 1), p.point(i)) < 2.0)));
    assert!(nu_sample(&m, &m.origin(), 4, 4.0, &config, 6, |_| 0.0).is_err());
}
