//! Closed-form fields of the two-bubble ansatz.
//!
//! For a concentration point `xi`, scale `delta` and parameter `lambda`:
//!
//! * bubble `U = alpha delta / (delta^2 + |x - xi|^2)`, `alpha = 2 sqrt 2`,
//!   solving `-Delta U = U^3` in R^4;
//! * correction `W_lambda = alpha lambda delta W(sqrt(lambda) |x - xi|)`, with
//!   `W` from [`crate::specialfn::correction_w`];
//! * ansatz `V = U - W_lambda`, which satisfies
//!   `-Delta V + lambda V = U^3 + lambda (U - alpha delta / |x - xi|^2)`;
//! * kernel elements `Z_0 = delta dU/d delta`, `Z_j = delta dU/d xi` along
//!   the tangent direction `t_j` at `xi`.
//!
//! All fields are radial about `xi` except `Z_j`; gradients and Laplacians are
//! analytic.

use crate::geometry::{BoundaryPoint, Vec4};
use crate::specialfn::{bessel_k01_tolerant, correction_w_tolerant, SpecialFnError};
use thiserror::Error;

pub const ALPHA: f64 = 2.0 * std::f64::consts::SQRT_2;

/// Requests closer than this to the concentration point are rejected.
pub const SINGULAR_RADIUS: f64 = 1e-14;

/// `sqrt(lambda) r` beyond which `V` is evaluated in cancellation-free form.
const V_SPLIT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnsatzError {
    #[error("evaluation at the concentration point (|x - xi| = {0:e})")]
    Singular(f64),
    #[error("inadmissible configuration: {0}")]
    Inadmissible(String),
    #[error(transparent)]
    Special(#[from] SpecialFnError),
}

/// Value and gradient of a scalar field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldEval {
    pub value: f64,
    pub gradient: Vec4,
}

/// Radial profile values at distance `r`: value, `d/dr`, Laplacian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radial {
    pub value: f64,
    pub d1: f64,
    pub laplacian: f64,
}

/// `U` as a function of `r = |x - xi|`.
pub fn bubble_radial(delta: f64, r: f64) -> Radial {
    let q = delta * delta + r * r;
    Radial {
        value: ALPHA * delta / q,
        d1: -2.0 * ALPHA * delta * r / (q * q),
        laplacian: -8.0 * ALPHA * delta.powi(3) / (q * q * q),
    }
}

/// `W_lambda` as a function of `r`, with the Laplacian taken from the
/// analytic `W''` (not from the ODE it satisfies).
pub fn correction_radial(lambda: f64, delta: f64, r: f64) -> Result<Radial, AnsatzError> {
    if r < SINGULAR_RADIUS {
        return Err(AnsatzError::Singular(r));
    }
    let sl = lambda.sqrt();
    let s = sl * r;
    let (c, _) = correction_w_tolerant(s)?;
    let amp = ALPHA * lambda * delta;
    Ok(Radial {
        value: amp * c.w,
        d1: amp * sl * c.w_prime,
        laplacian: amp * lambda * (c.w_second + 3.0 * c.w_prime / s),
    })
}

/// Second closed form `alpha (delta/r^2 - sqrt(lambda) delta K1(sqrt(lambda) r)/r)`.
pub fn correction_closed_form(lambda: f64, delta: f64, r: f64) -> Result<f64, AnsatzError> {
    if r < SINGULAR_RADIUS {
        return Err(AnsatzError::Singular(r));
    }
    let sl = lambda.sqrt();
    let k = bessel_k01_tolerant(sl * r)?;
    Ok(ALPHA * (delta / (r * r) - sl * delta * k.k1 / r))
}

fn radial_field(p: Radial, y: &Vec4, r: f64) -> FieldEval {
    FieldEval {
        value: p.value,
        gradient: if r > 0.0 { y * (p.d1 / r) } else { Vec4::zeros() },
    }
}

/// Bubble `U_{delta, xi}` at `x`.
pub fn bubble(delta: f64, xi: &Vec4, x: &Vec4) -> FieldEval {
    let y = x - xi;
    let r = y.norm();
    let q = delta * delta + r * r;
    FieldEval {
        value: ALPHA * delta / q,
        gradient: y * (-2.0 * ALPHA * delta / (q * q)),
    }
}

/// Laplacian of the bubble at `x` (`-8 alpha delta^3 / (delta^2 + r^2)^3`).
pub fn bubble_laplacian(delta: f64, xi: &Vec4, x: &Vec4) -> f64 {
    bubble_radial(delta, (x - xi).norm()).laplacian
}

/// Correction `W_{lambda, delta, xi}` at `x`.
pub fn correction_field(lambda: f64, delta: f64, xi: &Vec4, x: &Vec4) -> Result<FieldEval, AnsatzError> {
    let y = x - xi;
    let r = y.norm();
    let p = correction_radial(lambda, delta, r)?;
    Ok(radial_field(p, &y, r))
}

/// One concentrating component: parameters plus the tangent frame at `xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bubble {
    pub lambda: f64,
    pub delta: f64,
    pub xi: Vec4,
    /// Tangent directions at `xi` (used by `Z_1..Z_3`).
    pub frame: [Vec4; 3],
}

impl Bubble {
    pub fn new(lambda: f64, delta: f64, xi: Vec4, frame: [Vec4; 3]) -> Self {
        Bubble {
            lambda,
            delta,
            xi,
            frame,
        }
    }

    pub fn at_point(lambda: f64, delta: f64, p: &BoundaryPoint) -> Self {
        Bubble::new(lambda, delta, p.xi, p.tangent_frame)
    }

    /// `(U, W_lambda)` radial data at distance `r`.
    pub fn radial(&self, r: f64) -> Result<(Radial, Radial), AnsatzError> {
        Ok((bubble_radial(self.delta, r), correction_radial(self.lambda, self.delta, r)?))
    }

    /// `V = U - W_lambda` as a function of `r`.
    ///
    /// For `sqrt(lambda) r > 2` the difference is formed analytically,
    /// `V = alpha (-delta^3 / (r^2 (delta^2 + r^2)) + sqrt(lambda) delta K1(sqrt(lambda) r) / r)`,
    /// since `U` and `W_lambda` agree to `O(delta^2 / r^2)` there.
    pub fn v_radial(&self, r: f64) -> Result<Radial, AnsatzError> {
        if r < SINGULAR_RADIUS {
            return Err(AnsatzError::Singular(r));
        }
        let sl = self.lambda.sqrt();
        let s = sl * r;
        if s <= V_SPLIT {
            let (u, w) = self.radial(r)?;
            return Ok(Radial {
                value: u.value - w.value,
                d1: u.d1 - w.d1,
                laplacian: u.laplacian - w.laplacian,
            });
        }
        let d = self.delta;
        let q = d * d + r * r;
        let d3 = d * d * d;
        let m1 = -d3 / (r * r * q);
        let m1p = 2.0 * d3 * (d * d + 2.0 * r * r) / (r.powi(3) * q * q);
        let lap1 = -8.0 * d3 / (q * q * q);
        let k = bessel_k01_tolerant(s)?;
        let m2 = sl * d * k.k1 / r;
        let k1p = -k.k0 - k.k1 / s;
        let m2p = self.lambda * d * k1p / r - sl * d * k.k1 / (r * r);
        Ok(Radial {
            value: ALPHA * (m1 + m2),
            d1: ALPHA * (m1p + m2p),
            // K1(s)/s is an eigenfunction of the 4D Laplacian: Delta m2 = lambda m2
            laplacian: ALPHA * (lap1 + self.lambda * m2),
        })
    }

    /// `V = U - W_lambda` at `x`.
    pub fn v(&self, x: &Vec4) -> Result<FieldEval, AnsatzError> {
        let y = x - self.xi;
        let r = y.norm();
        Ok(radial_field(self.v_radial(r)?, &y, r))
    }

    /// Residual `-Delta V + lambda V - U^3 - lambda (U - alpha delta / r^2)`
    /// and the scale `|U^3| + lambda U` it is measured against.
    pub fn pde_residual(&self, x: &Vec4) -> Result<(f64, f64), AnsatzError> {
        let r = (x - self.xi).norm();
        let u = bubble_radial(self.delta, r);
        let vr = self.v_radial(r)?;
        let v = vr.value;
        let lap_v = vr.laplacian;
        let u3 = u.value.powi(3);
        let src = self.lambda * (u.value - ALPHA * self.delta / (r * r));
        let res = -lap_v + self.lambda * v - u3 - src;
        Ok((res, u3.abs() + self.lambda * u.value))
    }

    /// Kernel element `Z_j`, `j = 0` (dilation) or `1..=3` (tangential).
    pub fn kernel(&self, j: usize, x: &Vec4) -> FieldEval {
        let y = x - self.xi;
        let d = self.delta;
        let r2 = y.norm_squared();
        let q = d * d + r2;
        if j == 0 {
            FieldEval {
                value: ALPHA * d * (r2 - d * d) / (q * q),
                gradient: y * (2.0 * ALPHA * d * (3.0 * d * d - r2) / (q * q * q)),
            }
        } else {
            let t = &self.frame[j - 1];
            let yt = y.dot(t);
            FieldEval {
                value: 2.0 * ALPHA * d * d * yt / (q * q),
                gradient: (t / (q * q) - y * (4.0 * yt / (q * q * q))) * (2.0 * ALPHA * d * d),
            }
        }
    }
}

/// Parameters of the two-component ansatz.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationConfig {
    pub lambda: f64,
    pub beta: f64,
    pub d: [f64; 2],
    pub xi: [BoundaryPoint; 2],
    pub eta: f64,
}

impl ConcentrationConfig {
    /// Builds a configuration, checking `lambda > e` and membership in the
    /// admissible set (`|xi_1 - xi_2| >= 2 eta`, `eta < d_i < 1/eta`).
    pub fn new(lambda: f64, beta: f64, d: [f64; 2], xi: [BoundaryPoint; 2], eta: f64) -> Result<Self, AnsatzError> {
        if !(lambda > std::f64::consts::E) {
            return Err(AnsatzError::Inadmissible(format!("lambda = {lambda} must exceed e")));
        }
        if !(eta > 0.0) {
            return Err(AnsatzError::Inadmissible("eta must be positive".into()));
        }
        for &di in &d {
            if !(di > eta && di < 1.0 / eta) {
                return Err(AnsatzError::Inadmissible(format!("d = {di} outside ({eta}, {})", 1.0 / eta)));
            }
        }
        let sep = (xi[0].xi - xi[1].xi).norm();
        if sep < 2.0 * eta {
            return Err(AnsatzError::Inadmissible(format!(
                "|xi_1 - xi_2| = {sep} below 2 eta = {}",
                2.0 * eta
            )));
        }
        Ok(ConcentrationConfig { lambda, beta, d, xi, eta })
    }

    /// `delta_i = d_i / (lambda ln lambda)`.
    pub fn delta(&self, i: usize) -> f64 {
        delta_of(self.d[i], self.lambda)
    }

    pub fn bubble(&self, i: usize) -> Bubble {
        Bubble::at_point(self.lambda, self.delta(i), &self.xi[i])
    }

    /// Same configuration with the components exchanged.
    pub fn swapped(&self) -> Self {
        ConcentrationConfig {
            lambda: self.lambda,
            beta: self.beta,
            d: [self.d[1], self.d[0]],
            xi: [self.xi[1].clone(), self.xi[0].clone()],
            eta: self.eta,
        }
    }
}

pub fn delta_of(d: f64, lambda: f64) -> f64 {
    d / (lambda * lambda.ln())
}

/// `V_i` at `x`.
pub fn ansatz_v(cfg: &ConcentrationConfig, i: usize, x: &Vec4) -> Result<FieldEval, AnsatzError> {
    cfg.bubble(i).v(x)
}

/// Residual of the ansatz equation at `x`, relative to `|U^3| + lambda U`.
pub fn ansatz_pde_residual(cfg: &ConcentrationConfig, i: usize, x: &Vec4) -> Result<f64, AnsatzError> {
    let (r, s) = cfg.bubble(i).pde_residual(x)?;
    Ok(r / s)
}

/// `Z_{j,i}` at `x`.
pub fn kernel_element(cfg: &ConcentrationConfig, i: usize, j: usize, x: &Vec4) -> FieldEval {
    cfg.bubble(i).kernel(j, x)
}
