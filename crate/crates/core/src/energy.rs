//! Energy functional of the two-component system and the pieces of its
//! expansion along the ansatz.
//!
//! `E(u1, u2) = 1/2 int |grad u1|^2 + |grad u2|^2 + lambda/2 int u1^2 + u2^2
//!            - 1/4 int u1^4 + u2^4 - beta/2 int u1^2 u2^2`.
//!
//! Single-component integrals are radial about the concentration point and
//! use the tabulated radial path; anything involving both components or the
//! tangential kernel elements goes through the general domain rule.

use crate::ansatz::{AnsatzError, Bubble, ConcentrationConfig, FieldEval, ALPHA};
use crate::geometry::{mean_curvature, Domain, Vec4};
use crate::quadrature::{
    integrate_boundary, integrate_domain, integrate_domain_vec, integrate_radial_vec, integrate_shell_vec, root,
    QuadResult, SingularityHint, Tolerance,
};
use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
    #[error("component index {0} out of range")]
    Index(usize),
}

/// Tolerances used by the energy routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyTolerances {
    /// Radial single-component energies (cheap, so kept tight).
    pub radial: Tolerance,
    /// Radial pieces of the `Q` split.
    pub q: Tolerance,
    /// Two-center domain integrals (coupling, `E6`).
    pub coupling: Tolerance,
    /// Boundary integral of `E5` and the Gram matrix.
    pub general: Tolerance,
}

impl Default for EnergyTolerances {
    fn default() -> Self {
        EnergyTolerances {
            radial: Tolerance::new(1e-15, 1e-10),
            q: Tolerance::new(1e-300, 1e-5),
            coupling: Tolerance::new(1e-300, 1e-3).with_budget(200_000_000),
            general: Tolerance::singular(),
        }
    }
}

impl EnergyTolerances {
    /// Same tolerances with every relative target replaced by `rel`
    /// (the radial one is kept at least as tight as before).
    pub fn with_rel(mut self, rel: f64) -> Self {
        self.radial.rel = self.radial.rel.min(rel);
        self.q.rel = self.q.rel.min(rel);
        self.coupling.rel = rel;
        self.general.rel = rel;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `1/2 int |grad u1|^2 + |grad u2|^2`
    pub dirichlet: f64,
    /// `lambda/2 int u1^2 + u2^2`
    pub mass: f64,
    /// `-1/4 int u1^4 + u2^4`
    pub quartic: f64,
    /// `-beta/2 int u1^2 u2^2`
    pub coupling: f64,
    pub total: f64,
    /// Error estimates of the four parts, in the same order.
    pub err_est: [f64; 4],
    pub converged: [bool; 4],
}

/// `I(V)` and its three parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleEnergy {
    pub value: f64,
    pub dirichlet: f64,
    pub mass: f64,
    pub quartic: f64,
    pub err_est: f64,
    pub n_evals: u64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedEnergy {
    pub value: f64,
    pub single: [f64; 2],
    pub coupling: f64,
    pub err_est: f64,
    pub converged: bool,
    /// Size of the neglected remainder term,
    /// `sum_i delta_i |ln delta_i|^(2/3) / (lambda (ln lambda)^(1/3))`.
    pub predicted_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorNormReport {
    /// Dual norms `||E_1||` .. `||E_6||`.
    pub norms: [f64; 6],
    /// Predicted scalings `s_1` .. `s_6`.
    pub scalings: [f64; 6],
    pub err_est: [f64; 6],
    pub converged: [bool; 6],
    /// `sum_k ||E_k||`.
    pub total_bound: f64,
    /// `int |E_6|^(4/3)` over `B_{eta/2}(xi_1)`, `B_{eta/2}(xi_2)` and the rest.
    pub e6_split: [f64; 3],
}

impl ErrorNormReport {
    pub fn ratios(&self) -> [f64; 6] {
        let mut r = [0.0; 6];
        for k in 0..6 {
            r[k] = if self.scalings[k] > 0.0 { self.norms[k] / self.scalings[k] } else { 0.0 };
        }
        r
    }

    /// The predicted scaling of `E_5` is the largest of the six.
    pub fn e5_dominant(&self) -> bool {
        (0..6).all(|k| k == 4 || self.scalings[4] >= self.scalings[k])
    }

    /// The computed norm of `E_5` is the largest of the six (constants
    /// included, so this can fail at moderate `lambda`).
    pub fn e5_norm_dominant(&self) -> bool {
        (0..6).all(|k| k == 4 || self.norms[4] >= self.norms[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QDecomposition {
    pub q: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    /// `lambda delta^2 |ln delta|`
    pub scale: f64,
    pub err_est: f64,
    pub converged: bool,
}

impl QDecomposition {
    /// `q - (q1 - q2 + q3)`.
    pub fn defect(&self) -> f64 {
        self.q - (self.q1 - self.q2 + self.q3)
    }
}

/// Gram matrix of the kernel elements in the `H^1_lambda` inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGram {
    pub sigma: Matrix4<f64>,
    pub err_est: Matrix4<f64>,
    pub converged: bool,
}

fn check_index(i: usize) -> Result<(), EnergyError> {
    if i < 2 {
        Ok(())
    } else {
        Err(EnergyError::Index(i))
    }
}

fn hint_for(cfg: &ConcentrationConfig, centers: Vec<Vec4>) -> SingularityHint {
    SingularityHint::new(centers, cfg.delta(0).min(cfg.delta(1)))
}

/// `V` radial data with a NaN fallback (the rules never sample `r = 0`).
fn v_at(b: &Bubble, r: f64) -> (f64, f64) {
    b.v_radial(r).map_or((f64::NAN, f64::NAN), |v| (v.value, v.d1))
}

fn v_field(b: &Bubble, x: &Vec4) -> f64 {
    b.v(x).map_or(f64::NAN, |v| v.value)
}

/// `I(V_i) = 1/2 int |grad V|^2 + lambda/2 int V^2 - 1/4 int V^4`.
pub fn single_energy(cfg: &ConcentrationConfig, i: usize, domain: &Domain, tol: &Tolerance) -> Result<SingleEnergy, EnergyError> {
    check_index(i)?;
    Ok(bubble_energy(&cfg.bubble(i), domain, tol))
}

/// `I(V)` for a single bubble.
pub fn bubble_energy(b: &Bubble, domain: &Domain, tol: &Tolerance) -> SingleEnergy {
    let h = SingularityHint::new(vec![b.xi], b.delta);
    let lambda = b.lambda;
    let r = integrate_radial_vec(
        |t| {
            let (v, dv) = v_at(b, t);
            let v2 = v * v;
            [0.5 * dv * dv, 0.5 * lambda * v2, -0.25 * v2 * v2]
        },
        domain,
        &b.xi,
        (0.0, f64::INFINITY),
        &h,
        tol,
    );
    SingleEnergy {
        value: r.values.iter().sum(),
        dirichlet: r.values[0],
        mass: r.values[1],
        quartic: r.values[2],
        err_est: r.errs.iter().sum(),
        n_evals: r.n_evals,
        converged: r.converged,
    }
}

/// `-beta/2 int V_1^2 V_2^2`; exactly zero for `beta = 0`.
pub fn coupling_term(cfg: &ConcentrationConfig, domain: &Domain, tol: &Tolerance) -> QuadResult {
    if cfg.beta == 0.0 {
        return QuadResult {
            value: 0.0,
            err_est: 0.0,
            n_evals: 0,
            converged: true,
        };
    }
    let (b1, b2) = (cfg.bubble(0), cfg.bubble(1));
    let h = hint_for(cfg, vec![b1.xi, b2.xi]);
    let r = integrate_domain(
        |x| {
            let v1 = v_field(&b1, x);
            let v2 = v_field(&b2, x);
            v1 * v1 * v2 * v2
        },
        domain,
        &h,
        tol,
    );
    let s = -0.5 * cfg.beta;
    QuadResult {
        value: s * r.value,
        err_est: s.abs() * r.err_est,
        ..r
    }
}

/// `E(V_1, V_2)` part by part.
pub fn energy_full(cfg: &ConcentrationConfig, domain: &Domain, tol: &EnergyTolerances) -> EnergyBreakdown {
    let s = [bubble_energy(&cfg.bubble(0), domain, &tol.radial), bubble_energy(&cfg.bubble(1), domain, &tol.radial)];
    breakdown_of(&s, coupling_term(cfg, domain, &tol.coupling))
}

fn breakdown_of(s: &[SingleEnergy; 2], c: QuadResult) -> EnergyBreakdown {
    let dirichlet = s[0].dirichlet + s[1].dirichlet;
    let mass = s[0].mass + s[1].mass;
    let quartic = s[0].quartic + s[1].quartic;
    // the radial rule reports one estimate for the three parts
    let e = s[0].err_est + s[1].err_est;
    let ok = s[0].converged && s[1].converged;
    EnergyBreakdown {
        dirichlet,
        mass,
        quartic,
        coupling: c.value,
        total: dirichlet + mass + quartic + c.value,
        err_est: [e, e, e, c.err_est],
        converged: [ok, ok, ok, c.converged],
    }
}

/// `I(V_1) + I(V_2) - beta/2 int V_1^2 V_2^2`, the energy along the ansatz
/// with the remainder dropped.
pub fn reduced_energy(cfg: &ConcentrationConfig, domain: &Domain, tol: &EnergyTolerances) -> ReducedEnergy {
    let s = [bubble_energy(&cfg.bubble(0), domain, &tol.radial), bubble_energy(&cfg.bubble(1), domain, &tol.radial)];
    let b = breakdown_of(&s, coupling_term(cfg, domain, &tol.coupling));
    let ll = cfg.lambda.ln();
    let predicted_discrepancy = (0..2)
        .map(|i| {
            let d = cfg.delta(i);
            d * d.ln().abs().powf(2.0 / 3.0)
        })
        .sum::<f64>()
        / (cfg.lambda * ll.powf(1.0 / 3.0));
    ReducedEnergy {
        value: b.total,
        single: [s[0].value, s[1].value],
        coupling: b.coupling,
        err_est: b.err_est[0] + b.err_est[3],
        converged: b.converged.iter().all(|&c| c),
        predicted_discrepancy,
    }
}

/// Predicted scalings of the six error terms for component `i`.
pub fn error_scalings(cfg: &ConcentrationConfig, i: usize) -> [f64; 6] {
    let l = cfg.lambda;
    let d = cfg.delta(i);
    let dj = cfg.delta(1 - i);
    let ld = d.ln().abs();
    let ll = l.ln();
    let l32 = l.powf(1.5);
    [
        l * d * d * ld,
        l32 * d.powi(3) * ll * ll,
        l32 * d.powi(3) * ll.powi(3),
        l * d * d,
        d * ld.powf(2.0 / 3.0),
        cfg.beta.abs() * d * dj,
    ]
}

/// The six dual norms of the error of the ansatz for component `i`:
/// `||3 U^2 W||`, `||3 U W^2||`, `||W^3||`, `||lambda (U - alpha delta/r^2)||`
/// in `L^{4/3}(Omega)`, `||d_nu V||` in `L^{3/2}(dOmega)`, and
/// `||beta V_i V_j^2||` in `L^{4/3}(Omega)`.
pub fn error_dual_norms(cfg: &ConcentrationConfig, i: usize, domain: &Domain, tol: &EnergyTolerances) -> Result<ErrorNormReport, EnergyError> {
    check_index(i)?;
    let b = cfg.bubble(i);
    let h = SingularityHint::new(vec![b.xi], b.delta);
    let (lambda, delta) = (b.lambda, b.delta);
    let p = 4.0 / 3.0;
    let rad = integrate_radial_vec(
        |t| {
            let (u, w) = match b.radial(t) {
                Ok((u, w)) => (u.value, w.value),
                Err(_) => return [f64::NAN; 4],
            };
            let e4 = lambda * ALPHA * delta.powi(3) / ((delta * delta + t * t) * t * t);
            [
                (3.0 * u * u * w).abs().powf(p),
                (3.0 * u * w * w).abs().powf(p),
                w.abs().powi(3).powf(p),
                e4.powf(p),
            ]
        },
        domain,
        &b.xi,
        (0.0, f64::INFINITY),
        &h,
        &tol.general,
    );
    let mut norms = [0.0; 6];
    let mut err_est = [0.0; 6];
    let mut converged = [true; 6];
    for k in 0..4 {
        let r = root(rad.component(k), p);
        norms[k] = r.value;
        err_est[k] = r.err_est;
        converged[k] = r.converged;
    }

    let e5 = integrate_boundary(
        |x, nu| {
            let y = x - b.xi;
            let r = y.norm();
            let (_, dv) = v_at(&b, r);
            (dv * y.dot(nu) / r).abs().powf(1.5)
        },
        domain,
        &h,
        &tol.general,
    );
    let r5 = root(e5, 1.5);
    norms[4] = r5.value;
    err_est[4] = r5.err_est;
    converged[4] = r5.converged;

    let mut e6_split = [0.0; 3];
    if cfg.beta != 0.0 {
        let bj = cfg.bubble(1 - i);
        let beta = cfg.beta;
        let f = |x: &Vec4| {
            let vi = v_field(&b, x);
            let vj = v_field(&bj, x);
            [(beta * vi * vj * vj).abs().powf(p)]
        };
        let h2 = hint_for(cfg, vec![cfg.xi[0].xi, cfg.xi[1].xi]);
        let all = integrate_domain_vec(f, domain, &h2, &tol.coupling);
        let half = 0.5 * cfg.eta;
        let mut balls = [0.0; 2];
        let mut bad = !all.converged;
        let mut err = all.errs[0];
        for (k, ball) in balls.iter_mut().enumerate() {
            let r = integrate_shell_vec(f, domain, &cfg.xi[k].xi, (0.0, half), &h2, &tol.coupling);
            *ball = r.values[0];
            err += r.errs[0];
            bad |= !r.converged;
        }
        e6_split = [balls[0], balls[1], all.values[0] - balls[0] - balls[1]];
        let r6 = root(
            QuadResult {
                value: all.values[0],
                err_est: err,
                n_evals: all.n_evals,
                converged: !bad,
            },
            p,
        );
        norms[5] = r6.value;
        err_est[5] = r6.err_est;
        converged[5] = r6.converged;
    }

    Ok(ErrorNormReport {
        norms,
        scalings: error_scalings(cfg, i),
        err_est,
        converged,
        total_bound: norms.iter().sum(),
        e6_split,
    })
}

/// `int_Omega W_lambda^4` for a single bubble.
pub fn correction_l4(b: &Bubble, domain: &Domain, tol: &Tolerance) -> QuadResult {
    let h = SingularityHint::new(vec![b.xi], b.delta);
    integrate_radial_vec(
        |t| {
            let w = b.radial(t).map_or(f64::NAN, |(_, w)| w.value);
            [w.powi(4)]
        },
        domain,
        &b.xi,
        (0.0, f64::INFINITY),
        &h,
        tol,
    )
    .component(0)
}

/// `Q = lambda int V U` split on the balls `B_{sqrt delta}` and
/// `B_{1/sqrt lambda}` about `xi_i`:
/// `Q1 = lambda int_{B_sqrt(delta)} U^2`, `Q2 = lambda int_{B_sqrt(delta)} W U`,
/// `Q3 = lambda int_{Omega \ B_sqrt(delta)} V U = M1 + M2 + M3`.
pub fn q_decomposition(cfg: &ConcentrationConfig, i: usize, domain: &Domain, tol: &Tolerance) -> Result<QDecomposition, EnergyError> {
    check_index(i)?;
    Ok(bubble_q(&cfg.bubble(i), domain, tol))
}

pub fn bubble_q(b: &Bubble, domain: &Domain, tol: &Tolerance) -> QDecomposition {
    let (lambda, delta) = (b.lambda, b.delta);
    let sl = lambda.sqrt();
    let h = SingularityHint::new(vec![b.xi], delta);
    let rs = delta.sqrt();
    let rl = 1.0 / sl;
    let inf = f64::INFINITY;
    let xi = b.xi;
    let run = |g: &(dyn Fn(f64) -> [f64; 2] + Sync), w: (f64, f64)| integrate_radial_vec(g, domain, &xi, w, &h, tol);

    let inner = run(
        &|t| match b.radial(t) {
            Ok((u, w)) => [lambda * u.value * u.value, lambda * w.value * u.value],
            Err(_) => [f64::NAN; 2],
        },
        (0.0, rs),
    );
    let whole = run(
        &|t| {
            let u = crate::ansatz::bubble_radial(delta, t).value;
            let (v, _) = v_at(b, t);
            [lambda * v * u, 0.0]
        },
        (0.0, inf),
    );
    // V = alpha (m1 + m2) with m1 = -delta^3 / (r^2 (delta^2 + r^2)),
    // m2 = sqrt(lambda) delta K1(sqrt(lambda) r) / r
    let m = |t: f64| {
        let u = crate::ansatz::bubble_radial(delta, t).value;
        let m1 = -delta.powi(3) / (t * t * (delta * delta + t * t));
        let vv = v_at(b, t).0;
        let m2 = vv / ALPHA - m1;
        [lambda * ALPHA * m1 * u, lambda * ALPHA * m2 * u]
    };
    let out_s = run(&m, (rs, inf));
    let mid = run(&m, (rs, rl.max(rs)));
    let far = run(&m, (rl.max(rs), inf));

    let q1 = inner.values[0];
    let q2 = inner.values[1];
    let m1 = out_s.values[0];
    let m2 = mid.values[1];
    let m3 = far.values[1];
    let all = [&inner, &whole, &out_s, &mid, &far];
    QDecomposition {
        q: whole.values[0],
        q1,
        q2,
        q3: m1 + m2 + m3,
        m1,
        m2,
        m3,
        scale: lambda * delta * delta * delta.ln().abs(),
        err_est: all.iter().map(|r| r.errs[0] + r.errs[1]).sum(),
        converged: all.iter().all(|r| r.converged),
    }
}

/// `sigma_kj = <Z_k, Z_j>` in the `H^1_lambda` inner product over the domain,
/// `k, j = 0..3`.
pub fn kernel_gram(cfg: &ConcentrationConfig, i: usize, domain: &Domain, tol: &Tolerance) -> Result<KernelGram, EnergyError> {
    check_index(i)?;
    Ok(bubble_gram(&cfg.bubble(i), domain, tol))
}

pub fn bubble_gram(b: &Bubble, domain: &Domain, tol: &Tolerance) -> KernelGram {
    const OFF: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let h = SingularityHint::new(vec![b.xi], b.delta);
    let lambda = b.lambda;
    let entry = |z: &[FieldEval; 4], k: usize, j: usize| z[k].gradient.dot(&z[j].gradient) + lambda * z[k].value * z[j].value;
    let kernels = |x: &Vec4| [b.kernel(0, x), b.kernel(1, x), b.kernel(2, x), b.kernel(3, x)];
    let diag = integrate_domain_vec(
        |x| {
            let z = kernels(x);
            [entry(&z, 0, 0), entry(&z, 1, 1), entry(&z, 2, 2), entry(&z, 3, 3)]
        },
        domain,
        &h,
        tol,
    );
    // off-diagonal entries may vanish by symmetry, so they are resolved
    // relative to the diagonal scale sqrt(sigma_kk sigma_jj)
    let scale = diag.values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let off_tol = Tolerance {
        abs: tol.abs.max(tol.rel * scale),
        ..*tol
    };
    let off = integrate_domain_vec(
        |x| {
            let z = kernels(x);
            OFF.map(|(k, j)| entry(&z, k, j))
        },
        domain,
        &h,
        &off_tol,
    );
    let mut sigma = Matrix4::zeros();
    let mut err = Matrix4::zeros();
    for k in 0..4 {
        sigma[(k, k)] = diag.values[k];
        err[(k, k)] = diag.errs[k];
    }
    for (c, &(k, j)) in OFF.iter().enumerate() {
        sigma[(k, j)] = off.values[c];
        sigma[(j, k)] = off.values[c];
        err[(k, j)] = off.errs[c];
        err[(j, k)] = off.errs[c];
    }
    KernelGram {
        sigma,
        err_est: err,
        converged: diag.converged && off.converged,
    }
}

/// Hyperspherical angles `(theta1, theta2, phi)` of a direction, with
/// `w = (cos t1, sin t1 cos t2, sin t1 sin t2 cos phi, sin t1 sin t2 sin phi)`.
pub fn spherical_angles(w: &Vec4) -> [f64; 3] {
    let w = w.normalize();
    let t1 = w[0].clamp(-1.0, 1.0).acos();
    let rest = (w[1] * w[1] + w[2] * w[2] + w[3] * w[3]).sqrt();
    let t2 = if rest == 0.0 { 0.0 } else { (w[1] / rest).clamp(-1.0, 1.0).acos() };
    let phi = w[3].atan2(w[2]);
    [t1, t2, phi]
}

/// One energy sample as emitted in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub lambda: f64,
    pub beta: f64,
    pub d: [f64; 2],
    pub xi_spherical: [[f64; 3]; 2],
    #[serde(rename = "H_values")]
    pub h_values: [f64; 2],
    pub breakdown: EnergyBreakdown,
    pub error_report: Option<ErrorNormReport>,
    pub q_decomposition: Option<[QDecomposition; 2]>,
}

/// Full record for one configuration; the error report and `Q` split are
/// computed for component 0 and both components respectively when asked.
pub fn energy_sample(
    cfg: &ConcentrationConfig,
    domain: &Domain,
    tol: &EnergyTolerances,
    with_errors: bool,
    with_q: bool,
) -> Result<EnergySample, EnergyError> {
    let breakdown = energy_full(cfg, domain, tol);
    let error_report = if with_errors { Some(error_dual_norms(cfg, 0, domain, tol)?) } else { None };
    let q_decomposition = if with_q {
        Some([q_decomposition(cfg, 0, domain, &tol.q)?, q_decomposition(cfg, 1, domain, &tol.q)?])
    } else {
        None
    };
    Ok(EnergySample {
        lambda: cfg.lambda,
        beta: cfg.beta,
        d: cfg.d,
        xi_spherical: [spherical_angles(&cfg.xi[0].omega), spherical_angles(&cfg.xi[1].omega)],
        h_values: [mean_curvature(&cfg.xi[0]).h, mean_curvature(&cfg.xi[1]).h],
        breakdown,
        error_report,
        q_decomposition,
    })
}
