//! Modified Bessel functions `K0`, `K1` and the radial correction profile
//! `W(r) = 1/r^2 - K1(r)/r`.
//!
//! `W` is the radial solution of `-W'' - (3/r) W' + W = 1/r^2` in four
//! dimensions. It is evaluated from a cancellation-free series for `r <= 2`
//! and from `K0`, `K1` beyond that.
//!
//! Small arguments use the ascending series of `K0`/`K1`; larger arguments use
//! Steed's continued fraction (Temme's variant for `K_nu`, `nu = 0`).

use serde::Serialize;
use thiserror::Error;

/// Euler–Mascheroni constant to 20 significant digits.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_61;

/// Smallest argument covered by the accuracy contract.
pub const R_MIN: f64 = 1e-8;

/// Largest argument evaluated; beyond this `K0`, `K1` are reported as underflow.
pub const R_MAX: f64 = 700.0;

/// Switch between the ascending series and the continued fraction.
const SERIES_LIMIT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SpecialFnError {
    #[error("argument must be positive and finite, got {0}")]
    Domain(f64),
    #[error("K0/K1 underflow at r = {0} (supported range ends at 700)")]
    Underflow(f64),
}

/// `K1` and its first two derivatives at `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BesselEval {
    pub r: f64,
    pub k1: f64,
    pub k1_prime: f64,
    pub k1_second: f64,
}

/// `W` and its first two derivatives at `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrectionEval {
    pub r: f64,
    pub w: f64,
    pub w_prime: f64,
    pub w_second: f64,
}

/// `K0`, `K1` with an explicit underflow flag instead of an error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KPair {
    pub k0: f64,
    pub k1: f64,
    /// Set when `r > R_MAX`; both values are then exactly zero.
    pub underflow: bool,
}

fn check_domain(r: f64) -> Result<(), SpecialFnError> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(SpecialFnError::Domain(r));
    }
    Ok(())
}

/// `(K0(r), K1(r))`, failing with `Underflow` for `r > 700`.
pub fn bessel_k01(r: f64) -> Result<(f64, f64), SpecialFnError> {
    check_domain(r)?;
    if r > R_MAX {
        return Err(SpecialFnError::Underflow(r));
    }
    Ok(if r <= SERIES_LIMIT {
        k01_series(r)
    } else {
        k01_steed(r)
    })
}

/// Like [`bessel_k01`] but returns a flagged exact zero past the underflow
/// threshold, so callers can drop far tails knowingly.
pub fn bessel_k01_tolerant(r: f64) -> Result<KPair, SpecialFnError> {
    match bessel_k01(r) {
        Ok((k0, k1)) => Ok(KPair {
            k0,
            k1,
            underflow: false,
        }),
        Err(SpecialFnError::Underflow(_)) => Ok(KPair {
            k0: 0.0,
            k1: 0.0,
            underflow: true,
        }),
        Err(e) => Err(e),
    }
}

pub fn bessel_k0(r: f64) -> Result<f64, SpecialFnError> {
    bessel_k01(r).map(|(k0, _)| k0)
}

pub fn bessel_k1(r: f64) -> Result<f64, SpecialFnError> {
    bessel_k01(r).map(|(_, k1)| k1)
}

/// `K1, K1', K1''` from `K0`, `K1` via `K1' = -K0 - K1/r` and the Bessel
/// equation `K1'' = (1 + 1/r^2) K1 - K1'/r`.
pub fn bessel_k1_derivs(r: f64) -> Result<BesselEval, SpecialFnError> {
    let (k0, k1) = bessel_k01(r)?;
    Ok(k1_derivs_from(r, k0, k1))
}

fn k1_derivs_from(r: f64, k0: f64, k1: f64) -> BesselEval {
    let k1_prime = -k0 - k1 / r;
    let k1_second = (1.0 + 1.0 / (r * r)) * k1 - k1_prime / r;
    BesselEval {
        r,
        k1,
        k1_prime,
        k1_second,
    }
}

/// `W(r) = 1/r^2 - K1(r)/r` with `W'` and `W''`.
pub fn correction_w(r: f64) -> Result<CorrectionEval, SpecialFnError> {
    check_domain(r)?;
    if r > R_MAX {
        return Err(SpecialFnError::Underflow(r));
    }
    Ok(correction_w_unchecked(r))
}

/// [`correction_w`] that keeps going past `R_MAX`, where `W = 1/r^2` exactly
/// in double precision. The flag reports that the `K1` part was dropped.
pub fn correction_w_tolerant(r: f64) -> Result<(CorrectionEval, bool), SpecialFnError> {
    check_domain(r)?;
    if r > R_MAX {
        let r2 = r * r;
        return Ok((
            CorrectionEval {
                r,
                w: 1.0 / r2,
                w_prime: -2.0 / (r2 * r),
                w_second: 6.0 / (r2 * r2),
            },
            true,
        ));
    }
    Ok((correction_w_unchecked(r), false))
}

fn correction_w_unchecked(r: f64) -> CorrectionEval {
    if r <= SERIES_LIMIT {
        return w_series(r);
    }
    let (k0, k1) = k01_steed(r);
    let b = k1_derivs_from(r, k0, k1);
    let r2 = r * r;
    let w = 1.0 / r2 - k1 / r;
    // Closed form: W' = -2/r^3 - K1'/r + K1/r^2.
    let w_prime = -2.0 / (r2 * r) - b.k1_prime / r + k1 / r2;
    let w_second = 6.0 / (r2 * r2) - b.k1_second / r + 2.0 * b.k1_prime / r2 - 2.0 * k1 / (r2 * r);
    CorrectionEval {
        r,
        w,
        w_prime,
        w_second,
    }
}

/// Ascending series with `y = r^2/4`:
/// `A(y) = sum y^k / (k!(k+1)!)`, `B(y) = sum (psi(k+1)+psi(k+2)) y^k / (k!(k+1)!)`,
/// giving `K1(r) = 1/r + (r/2) ln(r/2) A - (r/4) B`.
struct SeriesAB {
    a: [f64; 3],
    b: [f64; 3],
}

fn series_ab(y: f64) -> SeriesAB {
    let mut a = [0.0; 3];
    let mut b = [0.0; 3];
    // term_k = y^k/(k!(k+1)!), psi(k+1) = H_k - gamma
    let mut coef = 1.0; // 1/(k!(k+1)!)
    let mut h_k = 0.0;
    let mut k = 0usize;
    let mut ypow = [1.0, 0.0, 0.0]; // y^k, y^(k-1), y^(k-2)
    loop {
        let kf = k as f64;
        let psi_sum = 2.0 * h_k + 1.0 / (kf + 1.0) - 2.0 * EULER_GAMMA;
        let ta = coef * ypow[0];
        a[0] += ta;
        b[0] += psi_sum * ta;
        if k >= 1 {
            let t1 = coef * kf * ypow[1];
            a[1] += t1;
            b[1] += psi_sum * t1;
        }
        if k >= 2 {
            let t2 = coef * kf * (kf - 1.0) * ypow[2];
            a[2] += t2;
            b[2] += psi_sum * t2;
        }
        if k > 3 && ta.abs() < 1e-18 * a[0].abs() {
            break;
        }
        k += 1;
        let kf = k as f64;
        h_k += 1.0 / kf;
        coef /= kf * (kf + 1.0);
        ypow[2] = ypow[1];
        ypow[1] = ypow[0];
        ypow[0] *= y;
        if k > 200 {
            break;
        }
    }
    SeriesAB { a, b }
}

fn k01_series(x: f64) -> (f64, f64) {
    let y = 0.25 * x * x;
    let l = (0.5 * x).ln();
    // K0 = -(ln(x/2) + gamma) I0 + sum H_k y^k/(k!)^2
    let mut i0 = 0.0;
    let mut s0 = 0.0;
    let mut term = 1.0;
    let mut h_k = 0.0;
    let mut k = 0usize;
    loop {
        i0 += term;
        s0 += h_k * term;
        if k > 2 && term < 1e-18 * i0 {
            break;
        }
        k += 1;
        let kf = k as f64;
        term *= y / (kf * kf);
        h_k += 1.0 / kf;
    }
    let k0 = -(l + EULER_GAMMA) * i0 + s0;
    let ab = series_ab(y);
    let k1 = 1.0 / x + 0.5 * x * l * ab.a[0] - 0.25 * x * ab.b[0];
    (k0, k1)
}

fn w_series(r: f64) -> CorrectionEval {
    let y = 0.25 * r * r;
    let l = (0.5 * r).ln();
    let SeriesAB { a, b } = series_ab(y);
    let w = -0.5 * l * a[0] + 0.25 * b[0];
    let w_prime = -0.5 * (a[0] / r + l * a[1] * 0.5 * r) + 0.125 * b[1] * r;
    let w_second = -0.5 * (a[1] - a[0] / (r * r) + l * (a[2] * y + 0.5 * a[1]))
        + 0.25 * (b[2] * y + 0.5 * b[1]);
    CorrectionEval {
        r,
        w,
        w_prime,
        w_second,
    }
}

/// Steed's method for `K0`, `K1` at `x > 2` (continued fraction CF2 with
/// Temme's normalization sum).
fn k01_steed(x: f64) -> (f64, f64) {
    const EPS: f64 = 1e-17;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut a = -a1;
    let mut q = a1;
    let mut c = a1;
    let mut s = 1.0 + q * delh;
    for i in 1..10_000 {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -c * a / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let k0 = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

/// Leading small-r form `1/r + (r/2) ln(r/2) + (r/2)(gamma - 1/2)`.
pub fn k1_small_form(r: f64) -> f64 {
    1.0 / r + 0.5 * r * (0.5 * r).ln() + 0.5 * r * (EULER_GAMMA - 0.5)
}

/// Leading large-r form `sqrt(pi/2) e^{-r} (r^{-1/2} + (3/8) r^{-3/2})`.
pub fn k1_large_form(r: f64) -> f64 {
    (std::f64::consts::FRAC_PI_2).sqrt() * (-r).exp() * (r.powf(-0.5) + 0.375 * r.powf(-1.5))
}

/// Residual of the radial equation relative to the source `1/r^2`.
pub fn w_ode_residual(c: &CorrectionEval) -> f64 {
    let r = c.r;
    let src = 1.0 / (r * r);
    (-c.w_second - 3.0 / r * c.w_prime + c.w - src) / src
}

/// Log-spaced grid of `n >= 2` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Sup of a window ratio on a grid and on the 2x refined grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowConstant {
    pub lo: f64,
    pub hi: f64,
    pub constant: f64,
    pub refined: f64,
    /// `max(c, c') / min(c, c')`; stable means at most 2.
    pub variation: f64,
    pub stable: bool,
}

/// `K1(r) - (1/r + (r/2) ln(r/2) + (r/2)(gamma - 1/2))` summed directly from
/// the `k >= 1` terms of the ascending series; forming the difference in
/// floating point leaves only roundoff once `r^4 |ln r|` drops below `eps`.
fn k1_small_remainder(r: f64) -> f64 {
    let y = 0.25 * r * r;
    let l = (0.5 * r).ln();
    let mut sum = 0.0;
    let mut coef = 1.0;
    let mut h_k = 0.0;
    let mut ypow = 1.0;
    for k in 1..200usize {
        let kf = k as f64;
        h_k += 1.0 / kf;
        coef /= kf * (kf + 1.0);
        ypow *= y;
        let psi_sum = 2.0 * h_k + 1.0 / (kf + 1.0) - 2.0 * EULER_GAMMA;
        let t = coef * ypow * (0.5 * r * l - 0.25 * r * psi_sum);
        sum += t;
        if t.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn window(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> WindowConstant {
    let sup = |m: usize| log_grid(lo, hi, m).into_iter().map(&f).fold(0.0f64, f64::max);
    let c = sup(n);
    let c2 = sup(2 * n);
    let variation = c.max(c2) / c.min(c2);
    WindowConstant {
        lo,
        hi,
        constant: c,
        refined: c2,
        variation,
        stable: c.is_finite() && c2.is_finite() && variation <= 2.0,
    }
}

/// Outcome of [`invariant_suite`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecialFnReport {
    pub rmin: f64,
    pub rmax: f64,
    pub points: usize,
    /// Max relative radial ODE residual of `W` on the log grid.
    pub ode_residual_max: f64,
    /// Max relative violation of `K1' = -K0 - K1/r`.
    pub recurrence_max: f64,
    /// Max relative mismatch of `K1'` and `W'` against central differences
    /// on the part of the grid inside `[0.01, 50]`.
    pub k1_derivative_max: f64,
    pub w_derivative_max: f64,
    pub k1_positive_decreasing: bool,
    pub w_positive_near_zero: bool,
    /// `|K1 - (1/r + (r/2) ln(r/2) + (r/2)(gamma - 1/2))| / (r^3 |ln r|)` on `(0, 0.1]`.
    pub small_window: WindowConstant,
    /// `|K1 - sqrt(pi/2) e^{-r} (r^{-1/2} + (3/8) r^{-3/2})| / (e^{-r} r^{-5/2})` on `[10, 100]`.
    pub large_window: WindowConstant,
    pub pass: bool,
}

/// Runs the `K1`/`W` invariants on a log grid over `[rmin, rmax]`.
pub fn invariant_suite(rmin: f64, rmax: f64, points: usize) -> Result<SpecialFnReport, SpecialFnError> {
    check_domain(rmin)?;
    if rmin < R_MIN {
        return Err(SpecialFnError::Domain(rmin));
    }
    if !(rmax > rmin) {
        return Err(SpecialFnError::Domain(rmax));
    }
    if rmax > R_MAX {
        return Err(SpecialFnError::Underflow(rmax));
    }
    let grid = log_grid(rmin, rmax, points);
    let mut ode = 0.0f64;
    let mut rec = 0.0f64;
    let mut dk = 0.0f64;
    let mut dw = 0.0f64;
    let mut mono = true;
    let mut prev = f64::INFINITY;
    for &r in &grid {
        let (k0, k1) = bessel_k01(r)?;
        let b = k1_derivs_from(r, k0, k1);
        let c = correction_w(r)?;
        ode = ode.max(w_ode_residual(&c).abs());
        rec = rec.max(((b.k1_prime + k0 + k1 / r) / b.k1_prime).abs());
        mono &= k1 > 0.0 && b.k1_prime < 0.0 && k1 < prev;
        prev = k1;
        if (0.01..=50.0).contains(&r) {
            let h = 1e-5 * r;
            let fd_k = (bessel_k1(r + h)? - bessel_k1(r - h)?) / (2.0 * h);
            let fd_w = (correction_w(r + h)?.w - correction_w(r - h)?.w) / (2.0 * h);
            dk = dk.max(((fd_k - b.k1_prime) / b.k1_prime).abs());
            dw = dw.max(((fd_w - c.w_prime) / c.w_prime).abs());
        }
    }
    let w_pos = log_grid(R_MIN, 0.1, 200).into_iter().all(|r| correction_w_unchecked(r).w > 0.0);
    let small_window = window(1e-6, 0.1, points / 5, |r| k1_small_remainder(r).abs() / (r.powi(3) * r.ln().abs()));
    let large_window = window(10.0, 100.0, points / 5, |r| {
        (bessel_k1(r).unwrap_or(f64::NAN) - k1_large_form(r)).abs() / ((-r).exp() * r.powf(-2.5))
    });
    let pass = ode <= 1e-8
        && rec <= 1e-10
        && dk <= 1e-6
        && dw <= 1e-6
        && mono
        && w_pos
        && small_window.stable
        && large_window.stable;
    Ok(SpecialFnReport {
        rmin,
        rmax,
        points,
        ode_residual_max: ode,
        recurrence_max: rec,
        k1_derivative_max: dk,
        w_derivative_max: dw,
        k1_positive_decreasing: mono,
        w_positive_near_zero: w_pos,
        small_window,
        large_window,
        pass,
    })
}
