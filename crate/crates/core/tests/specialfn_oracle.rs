mod common;

use blowuplab_core::specialfn::{
    bessel_k01, bessel_k1, bessel_k1_derivs, correction_w, k1_large_form, k1_small_form,
    w_ode_residual, EULER_GAMMA,
};
use common::bessel_oracle::{k_integral, Oracle, SERIES_MAX, SERIES_MAX_OVERLAP_LO};

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn frozen_table() -> Vec<(f64, f64, f64)> {
    include_str!("data/bessel_k_mpmath.txt")
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let v: Vec<f64> = l.split_whitespace().map(|t| t.parse().unwrap()).collect();
            (v[0], v[1], v[2])
        })
        .collect()
}

#[test]
fn oracle_branches_agree_on_overlap() {
    let mut o = Oracle::new();
    for x in log_grid(SERIES_MAX_OVERLAP_LO, SERIES_MAX, 9) {
        let (s0, s1) = o.series(x);
        let (a0, a1) = o.asymptotic(x);
        assert!(rel(s0, a0) < 1e-15, "K0 overlap at {x}: {s0} vs {a0}");
        assert!(rel(s1, a1) < 1e-15, "K1 overlap at {x}: {s1} vs {a1}");
    }
}

#[test]
fn oracle_matches_integral_representation() {
    let mut o = Oracle::new();
    for x in log_grid(0.1, 50.0, 25) {
        let (k0, k1) = o.k01(x);
        assert!(rel(k0, k_integral(0.0, x)) < 1e-13, "K0 at {x}");
        assert!(rel(k1, k_integral(1.0, x)) < 1e-13, "K1 at {x}");
    }
}

#[test]
fn oracle_matches_frozen_table() {
    let mut o = Oracle::new();
    for (x, k0, k1) in frozen_table() {
        let (a0, a1) = o.k01(x);
        assert!(rel(a0, k0) < 1e-15, "K0 at {x}: {a0} vs {k0}");
        assert!(rel(a1, k1) < 1e-15, "K1 at {x}: {a1} vs {k1}");
    }
}

#[test]
fn k1_within_1e12_of_oracle_over_full_range() {
    let mut o = Oracle::new();
    let mut worst = (0.0, 0.0);
    let mut pts = log_grid(1e-8, 700.0, 400);
    pts.extend(frozen_table().into_iter().map(|t| t.0));
    for x in pts {
        let (k0, k1) = bessel_k01(x).unwrap();
        let (r0, r1) = o.k01(x);
        let e = rel(k1, r1).max(rel(k0, r0) * if x > 1.5 && x < 2.5 { 0.0 } else { 1.0 });
        if e > worst.1 {
            worst = (x, e);
        }
    }
    assert!(worst.1 <= 1e-12, "worst relative error {} at r = {}", worst.1, worst.0);
}

#[test]
fn k0_within_1e12_near_its_zero_free_crossover() {
    // K0 is positive everywhere; near the series/fraction switch the series
    // carries a mild cancellation, bounded here separately.
    let mut o = Oracle::new();
    for x in log_grid(1.5, 2.5, 21) {
        let (k0, _) = bessel_k01(x).unwrap();
        let (r0, _) = o.k01(x);
        assert!(rel(k0, r0) <= 1e-12, "K0 at {x}");
    }
}

#[test]
fn documented_point_values() {
    // 40-digit reference: K1(1) = 0.60190723019723457473..., K1(10) = 1.86487734538255845968e-5
    assert!(rel(bessel_k1(1.0).unwrap(), 0.6019072301972346) < 1e-15);
    assert!(rel(bessel_k1(10.0).unwrap(), 1.864_877_345_382_558_5e-5) < 1e-14);
    let small = bessel_k1(1e-3).unwrap();
    assert!((999.99..=1000.01).contains(&small));
    let d = bessel_k1_derivs(1.0).unwrap();
    assert!(rel(-d.k1_prime, 1.022_931_668_437_942_9) < 1e-14);
    let d = bessel_k1_derivs(1e-3).unwrap();
    assert!(rel(d.k1_prime, -1e6) < 1e-3);
}

#[test]
fn derivative_identity_at_large_r() {
    // r K1' - K1 + sqrt(pi/2) sqrt(r) e^{-r} = O(e^{-r}/sqrt(r))
    for &r in &[20.0, 30.0, 60.0, 200.0] {
        let d = bessel_k1_derivs(r).unwrap();
        let lhs = (r * d.k1_prime - d.k1 + std::f64::consts::FRAC_PI_2.sqrt() * r.sqrt() * (-r).exp()).abs();
        let scale = (-r).exp() / r.sqrt();
        assert!(lhs <= 3.0 * scale, "r = {r}: {lhs} vs {scale}");
    }
}

#[test]
fn euler_constant_is_accurate() {
    assert_eq!(EULER_GAMMA, 0.5772156649015329);
}

#[test]
fn expansion_windows_hold() {
    let small = log_grid(1e-6, 0.1, 200)
        .into_iter()
        .map(|r| (bessel_k1(r).unwrap() - k1_small_form(r)).abs() / (r.powi(3) * r.ln().abs()))
        .fold(0.0f64, f64::max);
    assert!(small.is_finite() && small < 1.0, "small-r window constant {small}");
    let large = log_grid(10.0, 100.0, 200)
        .into_iter()
        .map(|r| (bessel_k1(r).unwrap() - k1_large_form(r)).abs() / ((-r).exp() * r.powf(-2.5)))
        .fold(0.0f64, f64::max);
    assert!(large.is_finite() && large < 1.0, "large-r window constant {large}");
}

#[test]
fn w_solves_radial_equation() {
    let worst = log_grid(1e-6, 50.0, 1000)
        .into_iter()
        .map(|r| w_ode_residual(&correction_w(r).unwrap()).abs())
        .fold(0.0f64, f64::max);
    assert!(worst <= 1e-8, "max relative ODE residual {worst}");
}

#[test]
fn w_matches_oracle_closed_form() {
    let mut o = Oracle::new();
    for r in log_grid(1e-6, 100.0, 120) {
        let w = o.w(r);
        let c = correction_w(r).unwrap();
        assert!(rel(c.w, w) < 1e-12, "W at {r}: {} vs {w}", c.w);
    }
}

