use blowuplab_core::specialfn::{bessel_k01, bessel_k1, bessel_k1_derivs, correction_w, w_ode_residual};
use proptest::prelude::*;

fn log_r(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

fn central(f: impl Fn(f64) -> f64, r: f64) -> f64 {
    let h = 1e-5 * r;
    (f(r + h) - f(r - h)) / (2.0 * h)
}

proptest! {
    #[test]
    fn k1_positive_and_decreasing(r in log_r(1e-8, 700.0)) {
        let b = bessel_k1_derivs(r).unwrap();
        prop_assert!(b.k1 > 0.0);
        prop_assert!(b.k1_prime < 0.0);
        let (k0, _) = bessel_k01(r).unwrap();
        let rec = -k0 - b.k1 / r;
        prop_assert!(((b.k1_prime - rec) / rec).abs() <= 1e-10);
    }

    #[test]
    fn k1_derivatives_match_finite_differences(r in log_r(0.01, 50.0)) {
        let b = bessel_k1_derivs(r).unwrap();
        let fd1 = central(|t| bessel_k1(t).unwrap(), r);
        prop_assert!(((b.k1_prime - fd1) / b.k1_prime).abs() <= 1e-6);
        let fd2 = central(|t| bessel_k1_derivs(t).unwrap().k1_prime, r);
        prop_assert!(((b.k1_second - fd2) / b.k1_second).abs() <= 1e-6);
    }

    #[test]
    fn w_derivatives_match_finite_differences(r in log_r(0.01, 50.0)) {
        let c = correction_w(r).unwrap();
        let fd1 = central(|t| correction_w(t).unwrap().w, r);
        prop_assert!(((c.w_prime - fd1) / c.w_prime).abs() <= 1e-6);
        let fd2 = central(|t| correction_w(t).unwrap().w_prime, r);
        prop_assert!(((c.w_second - fd2) / c.w_second).abs() <= 1e-6);
    }

    #[test]
    fn w_identity_and_equation(r in log_r(1e-6, 50.0)) {
        let c = correction_w(r).unwrap();
        prop_assert!(w_ode_residual(&c).abs() <= 1e-8);
        prop_assert!(c.w > 0.0);
        if r > 0.5 {
            // no cancellation in the closed form here
            let k1 = bessel_k1(r).unwrap();
            let w = 1.0 / (r * r) - k1 / r;
            prop_assert!(((c.w - w) / w).abs() <= 1e-12);
        }
    }
}

#[test]
fn w_growth_windows() {
    let grid = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        (0..n).map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp()).collect()
    };
    let near = grid(1e-6, 0.1, 300);
    let c_w = near.iter().map(|&r| correction_w(r).unwrap().w / r.ln().abs()).fold(0.0f64, f64::max);
    assert!(c_w <= 2.0, "W/|ln r| constant {c_w}");
    let c_wp = near.iter().map(|&r| correction_w(r).unwrap().w_prime.abs() * r).fold(0.0f64, f64::max);
    let c_wpp = near.iter().map(|&r| correction_w(r).unwrap().w_second.abs() * r * r).fold(0.0f64, f64::max);
    assert!(c_wp < 1.0 && c_wpp < 1.0, "{c_wp} {c_wpp}");
    let far = grid(10.0, 699.0, 300);
    for &r in &far {
        let c = correction_w(r).unwrap();
        assert!(c.w * r * r <= 1.0 + 1e-12);
        assert!(c.w_prime.abs() * r.powi(3) <= 2.0 + 1e-12);
        assert!(c.w_second.abs() * r.powi(4) <= 6.0 + 1e-12);
    }
    let c20 = correction_w(20.0).unwrap();
    assert!((0.9..=1.1).contains(&(c20.w * 400.0)));
}
