// Arbitrary-precision reference values for K0 and K1.
//
// Ascending series (exact arithmetic up to rounding at PREC bits) for small and
// moderate x, Hankel asymptotic sum with optimal truncation for large x. The two
// overlap on [SERIES_MAX_OVERLAP_LO, SERIES_MAX] and are cross-checked there.

#![allow(dead_code)]

use astro_float::{BigFloat, Consts, Radix, RoundingMode};

const PREC: usize = 384;
const RM: RoundingMode = RoundingMode::ToEven;
pub const SERIES_MAX: f64 = 25.0;
pub const SERIES_MAX_OVERLAP_LO: f64 = 18.0;

const GAMMA_DIGITS: &str =
    "0.577215664901532860606512090082402431042159335939923598805767234884867726777664670936947063";

fn bf(x: f64) -> BigFloat {
    BigFloat::from_f64(x, PREC)
}

fn to_f64(x: &BigFloat, cc: &mut Consts) -> f64 {
    let s = x.format(Radix::Dec, RM, cc).expect("format");
    s.parse::<f64>().expect("parse")
}

pub struct Oracle {
    cc: Consts,
    gamma: BigFloat,
}

impl Oracle {
    pub fn new() -> Self {
        let mut cc = Consts::new().expect("constants cache");
        let gamma = BigFloat::parse(GAMMA_DIGITS, Radix::Dec, PREC, RM, &mut cc);
        Oracle { cc, gamma }
    }

    /// (K0, K1) by the ascending series at working precision.
    pub fn series(&mut self, x: f64) -> (f64, f64) {
        let (k0, k1) = self.series_big(x);
        (to_f64(&k0, &mut self.cc), to_f64(&k1, &mut self.cc))
    }

    /// `W(r) = 1/r^2 - K1(r)/r`, with the subtraction done at working precision.
    pub fn w(&mut self, r: f64) -> f64 {
        if r > SERIES_MAX {
            let (_, k1) = self.asymptotic(r);
            return 1.0 / (r * r) - k1 / r;
        }
        let p = PREC;
        let (_, k1) = self.series_big(r);
        let rb = bf(r);
        let w = bf(1.0)
            .div(&rb.mul(&rb, p, RM), p, RM)
            .sub(&k1.div(&rb, p, RM), p, RM);
        to_f64(&w, &mut self.cc)
    }

    fn series_big(&mut self, x: f64) -> (BigFloat, BigFloat) {
        let p = PREC;
        let xb = bf(x);
        let half = bf(0.5);
        let y = xb.mul(&xb, p, RM).mul(&bf(0.25), p, RM);
        let l = xb.mul(&half, p, RM).ln(p, RM, &mut self.cc);
        let eps = bf(1e-110);

        let mut i0 = bf(0.0);
        let mut s0 = bf(0.0);
        let mut a = bf(0.0);
        let mut b = bf(0.0);
        let mut t0 = bf(1.0); // y^k/(k!)^2
        let mut t1 = bf(1.0); // y^k/(k!(k+1)!)
        let mut hk = bf(0.0);
        let mut k = 0usize;
        loop {
            i0 = i0.add(&t0, p, RM);
            s0 = s0.add(&hk.mul(&t0, p, RM), p, RM);
            a = a.add(&t1, p, RM);
            let hk1 = hk.add(&bf(1.0).div(&bf((k + 1) as f64), p, RM), p, RM);
            let psi = hk
                .add(&hk1, p, RM)
                .sub(&self.gamma.mul(&bf(2.0), p, RM), p, RM);
            b = b.add(&psi.mul(&t1, p, RM), p, RM);
            k += 1;
            let kf = bf(k as f64);
            t0 = t0.mul(&y, p, RM).div(&kf.mul(&kf, p, RM), p, RM);
            t1 = t1
                .mul(&y, p, RM)
                .div(&kf.mul(&bf((k + 1) as f64), p, RM), p, RM);
            hk = hk1;
            if k > 5 && t0.abs().cmp(&eps.mul(&i0, p, RM)).is_some_and(|c| c < 0) {
                break;
            }
        }
        let k0 = l
            .add(&self.gamma, p, RM)
            .mul(&i0, p, RM)
            .neg()
            .add(&s0, p, RM);
        let k1 = bf(1.0)
            .div(&xb, p, RM)
            .add(&xb.mul(&half, p, RM).mul(&l, p, RM).mul(&a, p, RM), p, RM)
            .sub(&xb.mul(&bf(0.25), p, RM).mul(&b, p, RM), p, RM);
        (k0, k1)
    }

    /// (K0, K1) by the Hankel expansion truncated at its smallest term.
    pub fn asymptotic(&mut self, x: f64) -> (f64, f64) {
        let p = PREC;
        let xb = bf(x);
        let pi = self.cc.pi(p, RM);
        let pref = pi
            .div(&xb.mul(&bf(2.0), p, RM), p, RM)
            .sqrt(p, RM)
            .mul(&xb.neg().exp(p, RM, &mut self.cc), p, RM);
        let mut out = [0.0; 2];
        for (slot, nu) in [0.0f64, 1.0].iter().enumerate() {
            let mu = 4.0 * nu * nu;
            let mut sum = bf(1.0);
            let mut term = bf(1.0);
            let mut last = f64::INFINITY;
            for k in 1..400 {
                let j = (2 * k - 1) as f64;
                let fac = bf(mu - j * j).div(&bf(8.0 * k as f64).mul(&xb, p, RM), p, RM);
                let next = term.mul(&fac, p, RM);
                let mag = to_f64(&next.abs(), &mut self.cc);
                if mag >= last || mag == 0.0 {
                    break;
                }
                last = mag;
                term = next;
                sum = sum.add(&term, p, RM);
            }
            out[slot] = to_f64(&pref.mul(&sum, p, RM), &mut self.cc);
        }
        (out[0], out[1])
    }

    pub fn k01(&mut self, x: f64) -> (f64, f64) {
        if x <= SERIES_MAX {
            self.series(x)
        } else {
            self.asymptotic(x)
        }
    }
}

/// Double-precision check of the oracle through the integral representation
/// `K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt` (trapezoid rule, which is
/// spectrally accurate for this integrand).
pub fn k_integral(nu: f64, x: f64) -> f64 {
    let h = 1.0 / 64.0;
    let mut sum = 0.5;
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let s = (0.5 * t).sinh();
        let term = (-2.0 * x * s * s).exp() * (nu * t).cosh();
        sum += term;
        if term < 1e-20 * sum {
            break;
        }
        k += 1;
    }
    (-x).exp() * sum * h
}
