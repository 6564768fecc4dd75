mod common;

use blowuplab_core::ansatz::{
    ansatz_pde_residual, ansatz_v, bubble, bubble_laplacian, correction_closed_form, correction_field, delta_of,
    kernel_element, Bubble, ConcentrationConfig, FieldEval, ALPHA,
};
use blowuplab_core::geometry::{boundary_point, Domain, DomainSpec, Vec4};
use common::bessel_oracle::Oracle;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_ball_config(lambda: f64, beta: f64) -> ConcentrationConfig {
    let d = Domain::new(DomainSpec::ball(1.0)).unwrap();
    let p1 = boundary_point(&d, &Vec4::new(0.0, 0.0, 0.0, 1.0)).unwrap();
    let p2 = boundary_point(&d, &Vec4::new(0.0, 0.0, 0.0, -1.0)).unwrap();
    ConcentrationConfig::new(lambda, beta, [1.0, 1.0], [p1, p2], 0.1).unwrap()
}

fn random_in_ball(rng: &mut ChaCha8Rng, radius: f64) -> Vec4 {
    loop {
        let v = Vec4::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        if v.norm() <= 1.0 {
            return v * radius;
        }
    }
}

fn fd_gradient(f: impl Fn(&Vec4) -> f64, x: &Vec4, h: f64) -> Vec4 {
    Vec4::from_fn(|k, _| {
        let e = Vec4::ith(k, h);
        (f(&(x + e)) - f(&(x - e))) / (2.0 * h)
    })
}

fn check_gradient(name: &str, fe: FieldEval, f: impl Fn(&Vec4) -> f64, x: &Vec4, scale: f64) {
    let fd = fd_gradient(f, x, 1e-5 * scale);
    let err = (fd - fe.gradient).norm() / fe.gradient.norm().max(1e-300);
    assert!(err <= 1e-6, "{name}: gradient mismatch {err} at {x:?}");
}

#[test]
fn bubble_scaling_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let delta = 10f64.powf(rng.gen_range(-6.0..0.0));
        let xi = random_in_ball(&mut rng, 1.0);
        let x = xi + random_in_ball(&mut rng, 1.0) * 10f64.powf(rng.gen_range(-7.0..0.0));
        let u = bubble(delta, &xi, &x).value;
        let unit = bubble(1.0, &Vec4::zeros(), &((x - xi) / delta)).value / delta;
        assert!(((u - unit) / unit).abs() <= 1e-12);
    }
}

#[test]
fn bubble_solves_critical_equation_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let delta = 10f64.powf(rng.gen_range(-5.0..0.0));
        let xi = random_in_ball(&mut rng, 1.0);
        let x = random_in_ball(&mut rng, 2.0);
        let u = bubble(delta, &xi, &x).value;
        let res = -bubble_laplacian(delta, &xi, &x) - u.powi(3);
        assert!(res.abs() <= 1e-8 * u.powi(3));
    }
}

#[test]
fn bubble_fourth_power_integral_by_radial_quadrature() {
    // int_{R^4} U_{1,0}^4 = 2 pi^2 alpha^4 int_0^inf r^3 / (1 + r^2)^4 dr = 32 pi^2 / 3
    let n = 200_000;
    let mut s = 0.0;
    for k in 0..n {
        // r = tan(theta): integrand sin^3 cos^3 dtheta
        let th = (k as f64 + 0.5) / n as f64 * std::f64::consts::FRAC_PI_2;
        s += th.sin().powi(3) * th.cos().powi(3);
    }
    s *= std::f64::consts::FRAC_PI_2 / n as f64;
    let total = 2.0 * std::f64::consts::PI.powi(2) * ALPHA.powi(4) * s;
    assert!((total - 32.0 * std::f64::consts::PI.powi(2) / 3.0).abs() < 1e-8);
}

#[test]
fn correction_representations_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let lambda = 10f64.powf(rng.gen_range(2.0..4.0));
        let delta = delta_of(rng.gen_range(0.2..5.0), lambda);
        let xi = random_in_ball(&mut rng, 1.0);
        let y = random_in_ball(&mut rng, 2.0);
        if y.norm() < 0.01 {
            continue;
        }
        let a = correction_field(lambda, delta, &xi, &(xi + y)).unwrap().value;
        let b = correction_closed_form(lambda, delta, y.norm()).unwrap();
        worst = worst.max(((a - b) / a).abs());
    }
    assert!(worst <= 1e-10, "max discrepancy {worst}");
}

#[test]
fn correction_far_field_and_oracle_point() {
    let (lambda, delta) = (1e4, 1e-5);
    for &r in &[0.3, 0.5, 1.0, 2.0] {
        let w = correction_field(lambda, delta, &Vec4::zeros(), &Vec4::new(r, 0.0, 0.0, 0.0)).unwrap().value;
        let far = ALPHA * delta / (r * r);
        assert!(((w - far) / far).abs() <= 1e-6);
    }
    let mut o = Oracle::new();
    let r = 1e-3;
    let s = lambda.sqrt() * r;
    let exact = ALPHA * lambda * delta * o.w(s);
    let w = correction_field(lambda, delta, &Vec4::zeros(), &Vec4::new(0.0, r, 0.0, 0.0)).unwrap().value;
    assert!(((w - exact) / exact).abs() <= 1e-12, "{w} vs {exact}");
}

#[test]
fn ansatz_far_field_bound_is_stable_in_lambda() {
    let mut ratios = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for &lambda in &[1e2, 1e3, 1e4] {
        let cfg = unit_ball_config(lambda, 1.0);
        let delta = cfg.delta(0);
        let xi = cfg.xi[0].xi;
        let mut m: f64 = 0.0;
        for _ in 0..2000 {
            let x = random_in_ball(&mut rng, 1.0);
            if (x - xi).norm() < cfg.eta / 2.0 {
                continue;
            }
            m = m.max(ansatz_v(&cfg, 0, &x).unwrap().value.abs() / delta);
        }
        ratios.push(m);
    }
    // bounded, and the bound does not deteriorate as lambda grows
    for w in ratios.windows(2) {
        assert!(w[1].is_finite() && w[1] <= w[0], "far-field |V|/delta along lambda: {ratios:?}");
    }
}

#[test]
fn ansatz_near_center_is_the_bubble() {
    let cfg = unit_ball_config(1e4, 1.0);
    let delta = cfg.delta(0);
    let x = cfg.xi[0].xi + cfg.xi[0].tangent_frame[0] * delta;
    let v = ansatz_v(&cfg, 0, &x).unwrap().value;
    let u = bubble(delta, &cfg.xi[0].xi, &x).value;
    assert!(((v - u) / u).abs() < 0.01);
    assert!(v < u);
}

#[test]
fn ansatz_equation_holds_on_stratified_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for &lambda in &[1e2, 1e4] {
        let cfg = unit_ball_config(lambda, 1.0);
        let delta = cfg.delta(0);
        let xi = cfg.xi[0].xi;
        let mut worst: f64 = 0.0;
        for k in 0..1000 {
            let scale = match k % 3 {
                0 => delta * rng.gen_range(0.01..10.0),
                1 => 10f64.powf(rng.gen_range(delta.log10() + 1.0..-1.0)),
                _ => rng.gen_range(0.1..2.0),
            };
            let dir = random_in_ball(&mut rng, 1.0).normalize();
            let x = xi + dir * scale;
            worst = worst.max(ansatz_pde_residual(&cfg, 0, &x).unwrap().abs());
        }
        let near = xi + cfg.xi[0].tangent_frame[1] * (10.0 * delta);
        worst = worst.max(ansatz_pde_residual(&cfg, 0, &near).unwrap().abs());
        assert!(worst <= 1e-7, "lambda = {lambda}: residual {worst}");
    }
}

#[test]
fn ansatz_laplacian_matches_finite_differences() {
    let cfg = unit_ball_config(1e2, 1.0);
    let b = cfg.bubble(0);
    for &r in &[0.05, 0.2, 0.6] {
        let x = b.xi + Vec4::new(0.3, -0.2, 0.5, -0.6).normalize() * r;
        let h = 1e-4 * r;
        let f = |p: &Vec4| b.v(p).unwrap().value;
        let mut lap = 0.0;
        for k in 0..4 {
            let e = Vec4::ith(k, h);
            lap += (f(&(x + e)) - 2.0 * f(&x) + f(&(x - e))) / (h * h);
        }
        let (u, w) = b.radial(r).unwrap();
        let exact = u.laplacian - w.laplacian;
        assert!(((lap - exact) / exact).abs() <= 1e-5, "r = {r}: {lap} vs {exact}");
    }
}

#[test]
fn kernel_elements_dominated_by_bubble() {
    let cfg = unit_ball_config(1e3, 1.0);
    let b = cfg.bubble(0);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let x = b.xi + random_in_ball(&mut rng, 1.0) * 10f64.powf(rng.gen_range(-7.0..0.3));
        let u = bubble(b.delta, &b.xi, &x).value;
        for j in 0..4 {
            worst = worst.max(kernel_element(&cfg, 0, j, &x).value.abs() / u);
        }
    }
    assert!(worst <= 1.0 + 1e-12, "max |Z|/U = {worst}");
    for j in 1..4 {
        let y = Vec4::new(0.01, 0.02, -0.03, 0.04);
        let a = b.kernel(j, &(b.xi + y)).value;
        let c = b.kernel(j, &(b.xi - y)).value;
        assert!((a + c).abs() <= 1e-12 * a.abs());
        assert_eq!(b.kernel(j, &b.xi).value, 0.0);
    }
}

#[test]
fn kernel_elements_are_scaled_derivatives() {
    let cfg = unit_ball_config(1e3, 1.0);
    let b = cfg.bubble(0);
    let x = b.xi + Vec4::new(0.001, -0.002, 0.0005, 0.003);
    let h = 1e-6 * b.delta;
    let z0 = b.delta * (bubble(b.delta + h, &b.xi, &x).value - bubble(b.delta - h, &b.xi, &x).value) / (2.0 * h);
    assert!(((z0 - b.kernel(0, &x).value) / z0).abs() < 1e-6);
    for j in 1..4 {
        let t = b.frame[j - 1];
        let hs = 1e-7;
        let zj = b.delta * (bubble(b.delta, &(b.xi + t * hs), &x).value - bubble(b.delta, &(b.xi - t * hs), &x).value)
            / (2.0 * hs);
        assert!(((zj - b.kernel(j, &x).value) / zj).abs() < 1e-5);
    }
}

#[test]
fn admissibility_is_enforced() {
    let d = Domain::new(DomainSpec::ball(1.0)).unwrap();
    let p1 = boundary_point(&d, &Vec4::new(0.0, 0.0, 0.0, 1.0)).unwrap();
    let p2 = boundary_point(&d, &Vec4::new(0.0, 0.0, 0.1, 1.0)).unwrap();
    assert!(ConcentrationConfig::new(100.0, 1.0, [1.0, 1.0], [p1.clone(), p2.clone()], 0.1).is_err());
    assert!(ConcentrationConfig::new(100.0, 1.0, [1.0, 1.0], [p1.clone(), p2.clone()], 0.04).is_ok());
    assert!(ConcentrationConfig::new(2.0, 1.0, [1.0, 1.0], [p1.clone(), p2.clone()], 0.04).is_err());
    assert!(ConcentrationConfig::new(100.0, 1.0, [30.0, 1.0], [p1, p2], 0.04).is_err());
}

proptest! {
    #[test]
    fn gradients_match_finite_differences(
        lam_exp in 2.0f64..4.0,
        d in 0.3f64..3.0,
        dir in prop::array::uniform4(-1.0f64..1.0),
        r_exp in -2.0f64..0.3,
    ) {
        let lambda = 10f64.powf(lam_exp);
        let delta = delta_of(d, lambda);
        let dirv = Vec4::from_column_slice(&dir);
        prop_assume!(dirv.norm() > 0.1);
        let r = 10f64.powf(r_exp);
        let xi = Vec4::new(0.0, 0.0, 0.0, 1.0);
        let x = xi + dirv.normalize() * r;
        let b = Bubble::new(lambda, delta, xi, [Vec4::x(), Vec4::y(), Vec4::z()]);
        check_gradient("U", bubble(delta, &xi, &x), |p| bubble(delta, &xi, p).value, &x, r);
        check_gradient("W", correction_field(lambda, delta, &xi, &x).unwrap(), |p| correction_field(lambda, delta, &xi, p).unwrap().value, &x, r);
        // V = U - W cancels in the far field, where differences of V are noise
        let v = b.v(&x).unwrap();
        if v.value.abs() >= 1e-2 * bubble(delta, &xi, &x).value {
            check_gradient("V", v, |p| b.v(p).unwrap().value, &x, r);
        }
        for j in 0..4 {
            let z = b.kernel(j, &x);
            if z.gradient.norm() > 1e-8 * z.value.abs() / r {
                check_gradient("Z", z, |p| b.kernel(j, p).value, &x, r);
            }
        }
    }

    #[test]
    fn ansatz_below_bubble_where_correction_positive(r_exp in -8.0f64..0.5, lam_exp in 2.0f64..4.0) {
        let lambda = 10f64.powf(lam_exp);
        let delta = delta_of(1.0, lambda);
        let x = Vec4::new(10f64.powf(r_exp), 0.0, 0.0, 0.0);
        let w = correction_field(lambda, delta, &Vec4::zeros(), &x).unwrap().value;
        let b = Bubble::new(lambda, delta, Vec4::zeros(), [Vec4::x(), Vec4::y(), Vec4::z()]);
        if w > 0.0 {
            prop_assert!(b.v(&x).unwrap().value < bubble(delta, &Vec4::zeros(), &x).value);
        }
    }
}
