//! Star-shaped domains in R^4, boundary charts and mean curvature.
//!
//! A domain is `{ r w : 0 <= r < rho(w) }` for a positive profile `rho` on
//! S^3. Each shape also carries a level function `F` (negative inside) with
//! analytic gradient and Hessian, used for normals, curvature and ray exits.
//!
//! Normal convention: near a boundary point the domain lies on the side
//! `x4 > g(x')` of the local graph, so the stored `normal` points inward.
//! Mean curvature is normalized as `H = (2/3) sum g_i`, which equals the
//! average of the principal curvatures (unit sphere: `H = 1`).

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, SymmetricEigen, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec4 = Vector4<f64>;
pub type Mat4 = Matrix4<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("profile degenerate at direction {0:?}: rho = {1}")]
    Degenerate([f64; 4], f64),
    #[error("graph chart fit residual {residual:e} exceeds tolerance {tol:e} at chart radius {radius:e}")]
    ChartFit { residual: f64, tol: f64, radius: f64 },
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

/// Shape tag and parameters as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    Ball {
        #[serde(default = "one")]
        radius: f64,
    },
    Ellipsoid {
        semi_axes: [f64; 4],
    },
    /// `rho(w) = base (1 + amplitude Im((w.b + i w.a)^frequency))`, with `a`
    /// the axis and `b` the first coordinate vector not parallel to it
    /// (orthonormalized). The lobes lie in the `(b, a)` plane.
    Protrusion {
        base: f64,
        amplitude: f64,
        frequency: u32,
        axis: [f64; 4],
    },
}

/// JSON-facing domain description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    #[serde(flatten)]
    pub kind: DomainKind,
    /// Optional rotation `R` (row-major): the domain is `R` applied to the
    /// shape described by `kind`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<[[f64; 4]; 4]>,
    /// Enforce the graph-chart residual tolerance instead of only reporting it.
    #[serde(default = "yes")]
    pub smoothness_check: bool,
}

impl DomainSpec {
    pub fn ball(radius: f64) -> Self {
        DomainSpec {
            kind: DomainKind::Ball { radius },
            rotation: None,
            smoothness_check: true,
        }
    }

    pub fn ellipsoid(semi_axes: [f64; 4]) -> Self {
        DomainSpec {
            kind: DomainKind::Ellipsoid { semi_axes },
            rotation: None,
            smoothness_check: true,
        }
    }

    pub fn protrusion(base: f64, amplitude: f64, frequency: u32, axis: [f64; 4]) -> Self {
        DomainSpec {
            kind: DomainKind::Protrusion {
                base,
                amplitude,
                frequency,
                axis,
            },
            rotation: None,
            smoothness_check: true,
        }
    }

    pub fn rotated(mut self, r: &Mat4) -> Self {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = r[(i, j)];
            }
        }
        self.rotation = Some(m);
        self
    }
}

#[derive(Debug, Clone)]
enum Shape {
    /// `F = sum x_i^2 / a_i^2 - 1`
    Quadric { inv_a2: [f64; 4] },
    Lobed {
        base: f64,
        eps: f64,
        m: u32,
        a: Vec4,
        b: Vec4,
    },
}

/// Validated domain, ready for evaluation.
#[derive(Debug, Clone)]
pub struct Domain {
    spec: DomainSpec,
    shape: Shape,
    rot: Mat4,
    rho_min: f64,
    rho_max: f64,
}

/// Quadratic and cubic coefficients of the boundary graph
/// `x4 = sum g_i x_i^2 + sum_{i<=j<=l} g_ijl x_i x_j x_l + O(|x'|^4)`
/// in the principal frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphCoeffs {
    pub g: [f64; 3],
    /// Cubic coefficients in the order of [`CUBIC_INDEX`].
    pub g3: [f64; 10],
    /// RMS residual of the odd-part least-squares fit, relative to the
    /// largest graph height in the chart.
    pub fit_residual: f64,
    /// `max |x4 - quadratic - cubic| / |x'|^4` over the chart samples.
    pub quartic_constant: f64,
    pub chart_radius: f64,
}

/// Sorted index triples `(i, j, l)`, `i <= j <= l`, for cubic coefficients.
pub const CUBIC_INDEX: [(usize, usize, usize); 10] = [
    (0, 0, 0),
    (0, 0, 1),
    (0, 0, 2),
    (0, 1, 1),
    (0, 1, 2),
    (0, 2, 2),
    (1, 1, 1),
    (1, 1, 2),
    (1, 2, 2),
    (2, 2, 2),
];

impl GraphCoeffs {
    pub fn cubic(&self, i: usize, j: usize, l: usize) -> f64 {
        let mut k = [i, j, l];
        k.sort_unstable();
        let pos = CUBIC_INDEX
            .iter()
            .position(|&(a, b, c)| (a, b, c) == (k[0], k[1], k[2]))
            .expect("index in range");
        self.g3[pos]
    }

    pub fn eval(&self, x: &Vector3<f64>) -> f64 {
        let mut v = self.g[0] * x[0] * x[0] + self.g[1] * x[1] * x[1] + self.g[2] * x[2] * x[2];
        for (c, &(i, j, l)) in self.g3.iter().zip(CUBIC_INDEX.iter()) {
            v += c * x[i] * x[j] * x[l];
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub omega: Vec4,
    pub xi: Vec4,
    /// Inward unit normal.
    pub normal: Vec4,
    /// Principal directions, ordered by decreasing principal curvature.
    pub tangent_frame: [Vec4; 3],
    /// Principal curvatures with respect to the inward normal (positive
    /// for convex boundaries).
    pub principal_curvatures: [f64; 3],
    pub graph: GraphCoeffs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureEval {
    pub h: f64,
    /// Derivative of `H` along each tangent frame vector.
    pub h_grad: [f64; 3],
}

/// A segment `[t0, t1]` of a ray inside the domain.
pub type Segment = (f64, f64);

impl Domain {
    pub fn new(spec: DomainSpec) -> Result<Self, GeometryError> {
        let bad = |m: &str| Err(GeometryError::InvalidDomain(m.to_string()));
        let shape = match &spec.kind {
            DomainKind::Ball { radius } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return bad("ball radius must be positive");
                }
                Shape::Quadric {
                    inv_a2: [1.0 / (radius * radius); 4],
                }
            }
            DomainKind::Ellipsoid { semi_axes } => {
                if semi_axes.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
                    return bad("ellipsoid semi-axes must be positive");
                }
                let mut inv = [0.0; 4];
                for (v, a) in inv.iter_mut().zip(semi_axes) {
                    *v = 1.0 / (a * a);
                }
                Shape::Quadric { inv_a2: inv }
            }
            DomainKind::Protrusion {
                base,
                amplitude,
                frequency,
                axis,
            } => {
                if !(*base > 0.0) {
                    return bad("protrusion base radius must be positive");
                }
                if !(amplitude.abs() < 1.0) {
                    return bad("protrusion amplitude must satisfy |amplitude| < 1");
                }
                if *frequency < 1 {
                    return bad("protrusion frequency must be at least 1");
                }
                let a = Vec4::from_column_slice(axis);
                let n = a.norm();
                if !(n > 0.0) || !n.is_finite() {
                    return bad("protrusion axis must be a nonzero vector");
                }
                let a = a / n;
                let mut b = None;
                for k in 0..4 {
                    let e = Vec4::ith(k, 1.0);
                    let p = e - a * a.dot(&e);
                    if p.norm() > 1e-6 {
                        b = Some(p.normalize());
                        break;
                    }
                }
                Shape::Lobed {
                    base: *base,
                    eps: *amplitude,
                    m: *frequency,
                    a,
                    b: b.expect("some coordinate vector is not parallel to the axis"),
                }
            }
        };
        let rot = match spec.rotation {
            None => Mat4::identity(),
            Some(m) => {
                let r = Mat4::from_fn(|i, j| m[i][j]);
                if (r.transpose() * r - Mat4::identity()).norm() > 1e-10 {
                    return bad("rotation must be orthogonal");
                }
                r
            }
        };
        let (rho_min, rho_max) = match &shape {
            Shape::Quadric { inv_a2 } => {
                let lo = inv_a2.iter().cloned().fold(0.0f64, f64::max).sqrt().recip();
                let hi = inv_a2.iter().cloned().fold(f64::INFINITY, f64::min).sqrt().recip();
                (lo, hi)
            }
            Shape::Lobed { base, eps, .. } => (base * (1.0 - eps.abs()), base * (1.0 + eps.abs())),
        };
        let d = Domain {
            spec,
            shape,
            rot,
            rho_min,
            rho_max,
        };
        d.check_profile()?;
        Ok(d)
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn rotation(&self) -> &Mat4 {
        &self.rot
    }

    pub fn rho_min(&self) -> f64 {
        self.rho_min
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    pub fn is_quadric(&self) -> bool {
        matches!(self.shape, Shape::Quadric { .. })
    }

    fn check_profile(&self) -> Result<(), GeometryError> {
        for w in sphere_points(2048) {
            let r = self.rho(&w);
            if !(r >= self.rho_min * (1.0 - 1e-12)) || !(r > 0.0) {
                return Err(GeometryError::Degenerate([w[0], w[1], w[2], w[3]], r));
            }
        }
        Ok(())
    }

    /// Boundary radius in direction `w` (unit vector).
    pub fn rho(&self, w: &Vec4) -> f64 {
        let u = self.rot.transpose() * w;
        match &self.shape {
            Shape::Quadric { inv_a2 } => {
                let s: f64 = (0..4).map(|i| u[i] * u[i] * inv_a2[i]).sum();
                1.0 / s.sqrt()
            }
            Shape::Lobed { base, eps, m, a, b } => {
                let (_, im) = cpow(u.dot(b), u.dot(a), *m);
                base * (1.0 + eps * im)
            }
        }
    }

    /// Level function `F` (negative inside).
    pub fn level(&self, x: &Vec4) -> f64 {
        let u = self.rot.transpose() * x;
        match &self.shape {
            Shape::Quadric { inv_a2 } => (0..4).map(|i| u[i] * u[i] * inv_a2[i]).sum::<f64>() - 1.0,
            Shape::Lobed { base, eps, m, a, b } => {
                let s = u.norm();
                let (_, im) = cpow(u.dot(b), u.dot(a), *m);
                s - base * (1.0 + eps * im / s.powi(*m as i32))
            }
        }
    }

    /// `(F, grad F, Hess F)` at `x`.
    pub fn level_derivs(&self, x: &Vec4) -> (f64, Vec4, Mat4) {
        let u = self.rot.transpose() * x;
        let (f, g, h) = match &self.shape {
            Shape::Quadric { inv_a2 } => {
                let d = Vec4::from_column_slice(inv_a2);
                let f = (0..4).map(|i| u[i] * u[i] * inv_a2[i]).sum::<f64>() - 1.0;
                (f, 2.0 * u.component_mul(&d), Mat4::from_diagonal(&(2.0 * d)))
            }
            Shape::Lobed { base, eps, m, a, b } => lobed_derivs(&u, *base, *eps, *m, a, b),
        };
        (f, self.rot * g, self.rot * h * self.rot.transpose())
    }

    pub fn contains(&self, x: &Vec4) -> bool {
        self.level(x) < 0.0
    }

    /// Outward unit normal at a boundary point.
    pub fn outward_normal(&self, x: &Vec4) -> Vec4 {
        let (_, g, _) = self.level_derivs(x);
        g.normalize()
    }

    /// Boundary point in direction `w`.
    pub fn boundary_xi(&self, w: &Vec4) -> Vec4 {
        w * self.rho(w)
    }

    /// Parts of the ray `c + t theta`, `t > 0`, that lie inside the domain.
    /// With `on_boundary` the start point is treated as lying exactly on the
    /// boundary.
    pub fn ray_segments(&self, c: &Vec4, theta: &Vec4, on_boundary: bool) -> Vec<Segment> {
        match &self.shape {
            Shape::Quadric { inv_a2 } => {
                let cu = self.rot.transpose() * c;
                let tu = self.rot.transpose() * theta;
                let (mut qa, mut qb, mut qc) = (0.0, 0.0, -1.0);
                for i in 0..4 {
                    qa += tu[i] * tu[i] * inv_a2[i];
                    qb += cu[i] * tu[i] * inv_a2[i];
                    qc += cu[i] * cu[i] * inv_a2[i];
                }
                if on_boundary {
                    let t = -2.0 * qb / qa;
                    if t > 0.0 {
                        vec![(0.0, t)]
                    } else {
                        vec![]
                    }
                } else {
                    let disc = qb * qb - qa * qc;
                    if disc <= 0.0 {
                        return vec![];
                    }
                    let sq = disc.sqrt();
                    // stable roots of qa t^2 + 2 qb t + qc
                    let q = -(qb + qb.signum() * sq);
                    let (r1, r2) = if q != 0.0 { (q / qa, qc / q) } else { (0.0, 0.0) };
                    let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
                    if hi <= 0.0 {
                        vec![]
                    } else {
                        vec![(lo.max(0.0), hi)]
                    }
                }
            }
            Shape::Lobed { .. } => self.ray_segments_generic(c, theta, on_boundary),
        }
    }

    fn ray_segments_generic(&self, c: &Vec4, theta: &Vec4, on_boundary: bool) -> Vec<Segment> {
        let t_max = c.norm() + self.rho_max * 1.0001;
        let h = |t: f64| self.level(&(c + theta * t));
        // geometric samples near the start resolve grazing rays from boundary points
        let mut ts = Vec::with_capacity(256);
        let mut t = 1e-10 * self.rho_min;
        let step = self.rho_min / 48.0;
        while t < step {
            ts.push(t);
            t *= 2.0;
        }
        let mut t = step;
        while t < t_max {
            ts.push(t);
            t += step;
        }
        ts.push(t_max);
        let vals: Vec<f64> = ts.iter().map(|&t| h(t)).collect();
        let mut segs = Vec::new();
        let inside0 = if on_boundary { vals[0] < 0.0 } else { h(0.0) < 0.0 };
        let mut start = if inside0 { Some(0.0) } else { None };
        let mut prev = (0.0, if inside0 { -1.0 } else { 1.0 });
        for (&t, &v) in ts.iter().zip(vals.iter()) {
            let inside_prev = prev.1 < 0.0;
            let inside = v < 0.0;
            if inside != inside_prev {
                let root = bisect(&h, prev.0, t);
                if inside {
                    start = Some(root);
                } else if let Some(s) = start.take() {
                    segs.push((s, root));
                }
            }
            prev = (t, v);
        }
        if let Some(s) = start {
            segs.push((s, t_max));
        }
        segs
    }

    /// Mean curvature at the boundary point in direction `w`, from the
    /// Hessian of the level function (no chart fit).
    pub fn mean_curvature_at(&self, w: &Vec4) -> f64 {
        let xi = self.boundary_xi(w);
        let (_, g, h) = self.level_derivs(&xi);
        let gn = g.norm();
        let n = g / gn;
        (h.trace() - (n.transpose() * h * n)[(0, 0)]) / (3.0 * gn)
    }
}

fn bisect(h: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = h(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = h(m);
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// `(re, im)` of `(x + i y)^m`.
fn cpow(x: f64, y: f64, m: u32) -> (f64, f64) {
    let (mut re, mut im) = (1.0, 0.0);
    for _ in 0..m {
        let r = re * x - im * y;
        im = re * y + im * x;
        re = r;
    }
    (re, im)
}

/// Level function `|u| - base (1 + eps P(u) |u|^{-m})`, `P = Im((u.b + i u.a)^m)`.
fn lobed_derivs(u: &Vec4, base: f64, eps: f64, m: u32, a: &Vec4, b: &Vec4) -> (f64, Vec4, Mat4) {
    let mf = m as f64;
    let s = u.norm();
    let (_, p) = cpow(u.dot(b), u.dot(a), m);
    let (re1, im1) = cpow(u.dot(b), u.dot(a), m - 1);
    let grad_p = mf * (b * im1 + a * re1);
    let hess_p = if m >= 2 {
        let (re2, im2) = cpow(u.dot(b), u.dot(a), m - 2);
        mf * (mf - 1.0) * ((b * b.transpose() - a * a.transpose()) * im2 + (a * b.transpose() + b * a.transpose()) * re2)
    } else {
        Mat4::zeros()
    };
    let gs = s.powi(-(m as i32));
    let grad_gs = -mf * s.powi(-(m as i32) - 2) * u;
    let hess_gs = -mf * s.powi(-(m as i32) - 2) * Mat4::identity()
        + mf * (mf + 2.0) * s.powi(-(m as i32) - 4) * (u * u.transpose());
    let q = p * gs;
    let grad_q = grad_p * gs + grad_gs * p;
    let hess_q = hess_p * gs + grad_p * grad_gs.transpose() + grad_gs * grad_p.transpose() + hess_gs * p;
    let grad_s = u / s;
    let hess_s = (Mat4::identity() - u * u.transpose() / (s * s)) / s;
    let f = s - base * (1.0 + eps * q);
    (f, grad_s - base * eps * grad_q, hess_s - base * eps * hess_q)
}

/// Deterministic quasi-uniform points on S^3 (Halton sequence in bases 2, 3, 5
/// pushed through the area-preserving Hopf-type map).
pub fn sphere_points(n: usize) -> Vec<Vec4> {
    fn halton(mut i: usize, b: usize) -> f64 {
        let mut f = 1.0;
        let mut r = 0.0;
        while i > 0 {
            f /= b as f64;
            r += f * (i % b) as f64;
            i /= b;
        }
        r
    }
    let tau = std::f64::consts::TAU;
    (1..=n)
        .map(|i| {
            let u1 = halton(i, 2);
            let u2 = halton(i, 3);
            let u3 = halton(i, 5);
            let a = (1.0 - u1).sqrt();
            let b = u1.sqrt();
            Vec4::new(a * (tau * u2).sin(), a * (tau * u2).cos(), b * (tau * u3).sin(), b * (tau * u3).cos())
        })
        .collect()
}

/// Orthonormal basis of the orthogonal complement of `n`, from coordinate
/// seed vectors taken in order of increasing overlap with `n`.
pub fn complement_frame(n: &Vec4) -> [Vec4; 3] {
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| n[i].abs().partial_cmp(&n[j].abs()).unwrap().then(i.cmp(&j)));
    let mut out: Vec<Vec4> = Vec::with_capacity(3);
    for &k in &order {
        let mut v = Vec4::ith(k, 1.0);
        v -= n * n.dot(&v);
        for q in &out {
            v -= q * q.dot(&v);
        }
        let norm = v.norm();
        if norm > 1e-8 {
            out.push(v / norm);
        }
        if out.len() == 3 {
            break;
        }
    }
    [out[0], out[1], out[2]]
}

fn fix_sign(v: Vec4) -> Vec4 {
    for k in 0..4 {
        if v[k].abs() > 1e-12 {
            return if v[k] < 0.0 { -v } else { v };
        }
    }
    v
}

/// Principal frame and curvatures at a boundary point (w.r.t. the inward
/// normal), eigenvalues sorted descending.
fn principal_frame(domain: &Domain, xi: &Vec4) -> (Vec4, [Vec4; 3], [f64; 3]) {
    let (_, g, h) = domain.level_derivs(xi);
    let gn = g.norm();
    let n_out = g / gn;
    let t = complement_frame(&n_out);
    let mut s = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            s[(i, j)] = (t[i].transpose() * h * t[j])[(0, 0)] / gn;
        }
    }
    let s = 0.5 * (s + s.transpose());
    let eig = SymmetricEigen::new(s);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap().then(a.cmp(&b)));
    let mut frame = [Vec4::zeros(); 3];
    let mut kappa = [0.0; 3];
    for (slot, &k) in idx.iter().enumerate() {
        let c = eig.eigenvectors.column(k);
        let v = t[0] * c[0] + t[1] * c[1] + t[2] * c[2];
        frame[slot] = fix_sign(v.normalize());
        kappa[slot] = eig.eigenvalues[k];
    }
    (-n_out, frame, kappa)
}

/// Solve for the graph height `x4` over tangent coordinates `x'`.
fn graph_height(domain: &Domain, xi: &Vec4, nu: &Vec4, frame: &[Vec4; 3], x: &Vector3<f64>, guess: f64) -> f64 {
    let base = xi + frame[0] * x[0] + frame[1] * x[1] + frame[2] * x[2];
    let mut z = guess;
    for _ in 0..50 {
        let p = base + nu * z;
        let (f, g, _) = domain.level_derivs(&p);
        let d = g.dot(nu);
        let dz = f / d;
        z -= dz;
        if dz.abs() <= 1e-16 * (1.0 + z.abs()) {
            break;
        }
    }
    z
}

/// Boundary point above tangent coordinates `x'` in the chart of `p`.
pub fn graph_point(domain: &Domain, p: &BoundaryPoint, x: &Vector3<f64>) -> Vec4 {
    let z = graph_height(domain, &p.xi, &p.normal, &p.tangent_frame, x, p.graph.eval(x));
    p.xi + p.tangent_frame[0] * x[0] + p.tangent_frame[1] * x[1] + p.tangent_frame[2] * x[2] + p.normal * z
}

fn chart_directions() -> Vec<Vector3<f64>> {
    // half-space representatives of +/- pairs
    let mut dirs = Vec::new();
    for i in -1i32..=1 {
        for j in -1i32..=1 {
            for k in -1i32..=1 {
                let v = Vector3::new(i as f64, j as f64, k as f64);
                if v.norm() == 0.0 {
                    continue;
                }
                let first = [i, j, k].into_iter().find(|&c| c != 0).unwrap();
                if first > 0 {
                    dirs.push(v.normalize());
                }
            }
        }
    }
    let n = 48;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    for i in 0..n {
        let z = 1.0 - (i as f64 + 0.5) / n as f64;
        let r = (1.0 - z * z).sqrt();
        let phi = golden * i as f64;
        dirs.push(Vector3::new(r * phi.cos(), r * phi.sin(), z));
    }
    dirs
}

fn monomials(x: &Vector3<f64>, degree: usize, out: &mut Vec<f64>) {
    for i in 0..3 {
        for j in i..3 {
            for l in j..3 {
                if degree == 3 {
                    out.push(x[i] * x[j] * x[l]);
                } else {
                    for p in l..3 {
                        for q in p..3 {
                            out.push(x[i] * x[j] * x[l] * x[p] * x[q]);
                        }
                    }
                }
            }
        }
    }
}

const CHART_FIT_TOL: f64 = 1e-6;

fn fit_chart(domain: &Domain, xi: &Vec4, nu: &Vec4, frame: &[Vec4; 3], g: [f64; 3], radius: f64) -> GraphCoeffs {
    let radii = [0.25, 0.5, 0.75, 1.0];
    let dirs = chart_directions();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    let mut samples = Vec::new();
    let quad = |x: &Vector3<f64>| g[0] * x[0] * x[0] + g[1] * x[1] * x[1] + g[2] * x[2] * x[2];
    for &s in &radii {
        for d in &dirs {
            let x = d * (s * radius);
            let fp = graph_height(domain, xi, nu, frame, &x, quad(&x));
            let fm = graph_height(domain, xi, nu, frame, &(-x), quad(&x));
            let mut row = Vec::with_capacity(31);
            monomials(&x, 3, &mut row);
            monomials(&x, 5, &mut row);
            rows.push(row);
            rhs.push(0.5 * (fp - fm));
            samples.push((x, fp));
            samples.push((-x, fm));
        }
    }
    let a = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    let b = DVector::from_vec(rhs.clone());
    let svd = a.clone().svd(true, true);
    let coef = svd.solve(&b, 1e-14).expect("svd solve");
    let res = &a * &coef - &b;
    let scale = samples.iter().fold(0.0f64, |m, (_, f)| m.max(f.abs())).max(f64::MIN_POSITIVE);
    let fit_residual = (res.norm_squared() / rhs.len() as f64).sqrt() / scale;
    let mut g3 = [0.0; 10];
    g3.copy_from_slice(&coef.as_slice()[..10]);
    let mut out = GraphCoeffs {
        g,
        g3,
        fit_residual,
        quartic_constant: 0.0,
        chart_radius: radius,
    };
    out.quartic_constant = samples
        .iter()
        .map(|(x, f)| (f - out.eval(x)).abs() / x.norm().powi(4))
        .fold(0.0, f64::max);
    out
}

/// Boundary point in direction `w` with inward normal, principal frame and
/// graph coefficients.
pub fn boundary_point(domain: &Domain, w: &Vec4) -> Result<BoundaryPoint, GeometryError> {
    let w = w.normalize();
    let r = domain.rho(&w);
    if !(r >= domain.rho_min * (1.0 - 1e-12)) {
        return Err(GeometryError::Degenerate([w[0], w[1], w[2], w[3]], r));
    }
    let xi = w * r;
    let (normal, frame, kappa) = principal_frame(domain, &xi);
    let g = [0.5 * kappa[0], 0.5 * kappa[1], 0.5 * kappa[2]];
    let mut p = BoundaryPoint {
        omega: w,
        xi,
        normal,
        tangent_frame: frame,
        principal_curvatures: kappa,
        graph: GraphCoeffs {
            g,
            g3: [0.0; 10],
            fit_residual: 0.0,
            quartic_constant: 0.0,
            chart_radius: 0.0,
        },
    };
    p.graph = local_graph_coeffs(domain, &p)?;
    Ok(p)
}

/// Graph coefficients at `p`: quadratic part from the second fundamental
/// form, cubic part by least squares on boundary samples in the chart. The
/// chart radius starts at `0.1 rho_min` and is halved while the fit residual
/// is above tolerance.
pub fn local_graph_coeffs(domain: &Domain, p: &BoundaryPoint) -> Result<GraphCoeffs, GeometryError> {
    let g = [
        0.5 * p.principal_curvatures[0],
        0.5 * p.principal_curvatures[1],
        0.5 * p.principal_curvatures[2],
    ];
    let mut radius = 0.1 * domain.rho_min();
    let mut best = fit_chart(domain, &p.xi, &p.normal, &p.tangent_frame, g, radius);
    for _ in 0..4 {
        if best.fit_residual <= CHART_FIT_TOL {
            return Ok(best);
        }
        radius *= 0.5;
        best = fit_chart(domain, &p.xi, &p.normal, &p.tangent_frame, g, radius);
    }
    if best.fit_residual <= CHART_FIT_TOL || !domain.spec().smoothness_check {
        Ok(best)
    } else {
        Err(GeometryError::ChartFit {
            residual: best.fit_residual,
            tol: CHART_FIT_TOL,
            radius,
        })
    }
}

/// `H = (2/3) sum g_i` and `dH/dt_i = (2/3)(sum_{j<i} g_jji + sum_{j>i} g_ijj + 3 g_iii)`.
pub fn mean_curvature(p: &BoundaryPoint) -> CurvatureEval {
    let gc = &p.graph;
    let h = 2.0 / 3.0 * (gc.g[0] + gc.g[1] + gc.g[2]);
    let mut h_grad = [0.0; 3];
    for (i, hg) in h_grad.iter_mut().enumerate() {
        let mut s = 3.0 * gc.cubic(i, i, i);
        for j in 0..3 {
            if j < i {
                s += gc.cubic(j, j, i);
            } else if j > i {
                s += gc.cubic(i, j, j);
            }
        }
        *hg = 2.0 / 3.0 * s;
    }
    CurvatureEval { h, h_grad }
}

/// Result of the multi-start search for strict local maxima of `H`.
#[derive(Debug, Clone)]
pub struct CurvatureMaxima {
    /// Strict local maxima with `H > 0`, sorted by `H` descending.
    pub maxima: Vec<(BoundaryPoint, f64)>,
    /// `H` is constant over the sampled boundary (no strict maxima exist).
    pub constant_curvature: bool,
}

fn tangent_basis(w: &Vec4) -> [Vec4; 3] {
    complement_frame(w)
}

fn step_on_sphere(w: &Vec4, basis: &[Vec4; 3], d: &Vector3<f64>) -> Vec4 {
    (w + basis[0] * d[0] + basis[1] * d[1] + basis[2] * d[2]).normalize()
}

fn h_gradient(domain: &Domain, w: &Vec4, basis: &[Vec4; 3], h: f64) -> Vector3<f64> {
    let mut g = Vector3::zeros();
    for k in 0..3 {
        let mut e = Vector3::zeros();
        e[k] = h;
        let hp = domain.mean_curvature_at(&step_on_sphere(w, basis, &e));
        let hm = domain.mean_curvature_at(&step_on_sphere(w, basis, &(-e)));
        g[k] = (hp - hm) / (2.0 * h);
    }
    g
}

fn h_hessian(domain: &Domain, w: &Vec4, basis: &[Vec4; 3], h: f64) -> Matrix3<f64> {
    let f = |d: Vector3<f64>| domain.mean_curvature_at(&step_on_sphere(w, basis, &d));
    let f0 = f(Vector3::zeros());
    let mut m = Matrix3::zeros();
    for i in 0..3 {
        for j in i..3 {
            let mut ei = Vector3::zeros();
            ei[i] = h;
            let mut ej = Vector3::zeros();
            ej[j] = h;
            let v = if i == j {
                (f(ei) - 2.0 * f0 + f(-ei)) / (h * h)
            } else {
                (f(ei + ej) - f(ei - ej) - f(-ei + ej) + f(-ei - ej)) / (4.0 * h * h)
            };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Local ascent of `H` on S^3 from `w0`: gradient steps with backtracking,
/// then Newton polishing with a finite-difference Hessian.
pub fn ascend_curvature(domain: &Domain, w0: &Vec4) -> Vec4 {
    let mut w = w0.normalize();
    let mut hw = domain.mean_curvature_at(&w);
    let mut step = 0.05;
    for _ in 0..2000 {
        let basis = tangent_basis(&w);
        let g = h_gradient(domain, &w, &basis, 1e-6);
        let gn = g.norm();
        if gn < 1e-9 {
            break;
        }
        let mut accepted = false;
        while step > 1e-12 {
            let cand = step_on_sphere(&w, &basis, &(g * (step / gn)));
            let hc = domain.mean_curvature_at(&cand);
            if hc > hw {
                w = cand;
                hw = hc;
                accepted = true;
                step *= 1.5;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    for _ in 0..20 {
        let basis = tangent_basis(&w);
        let g = h_gradient(domain, &w, &basis, 1e-5);
        let hs = h_hessian(domain, &w, &basis, 1e-4);
        let Some(inv) = hs.try_inverse() else { break };
        let d = -(inv * g);
        if d.norm() > 0.05 {
            break;
        }
        let cand = step_on_sphere(&w, &basis, &d);
        let hc = domain.mean_curvature_at(&cand);
        if hc < hw - 1e-13 * hw.abs().max(1.0) {
            break;
        }
        let moved = (cand - w).norm();
        w = cand;
        hw = hc;
        if moved < 1e-12 {
            break;
        }
    }
    w
}

/// Multi-start search for strict local maxima of `H` with `H > 0`.
pub fn find_curvature_maxima(domain: &Domain, n_seeds: usize) -> Result<CurvatureMaxima, GeometryError> {
    let seeds = sphere_points(n_seeds.max(8));
    let hs: Vec<f64> = seeds.iter().map(|w| domain.mean_curvature_at(w)).collect();
    let hmax = hs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let hmin = hs.iter().cloned().fold(f64::INFINITY, f64::min);
    if hmax - hmin <= 1e-9 * hmax.abs().max(1.0) {
        return Ok(CurvatureMaxima {
            maxima: vec![],
            constant_curvature: true,
        });
    }
    use rayon::prelude::*;
    let ends: Vec<Vec4> = seeds.par_iter().map(|w| ascend_curvature(domain, w)).collect();
    let mut found: Vec<(Vec4, f64)> = Vec::new();
    for w in ends {
        if found.iter().any(|(v, _)| (v - w).norm() < 1e-4) {
            continue;
        }
        let h = domain.mean_curvature_at(&w);
        if !(h > 0.0) {
            continue;
        }
        let basis = tangent_basis(&w);
        let hess = h_hessian(domain, &w, &basis, 1e-3);
        let eig = SymmetricEigen::new(hess);
        let strict = eig.eigenvalues.iter().all(|&e| e < -1e-6 * h.abs().max(1.0));
        if strict {
            found.push((w, h));
        }
    }
    // rank by H; near-ties keep discovery order
    found.sort_by(|a, b| {
        let tol = 1e-9 * a.1.abs().max(b.1.abs());
        if (a.1 - b.1).abs() <= tol {
            std::cmp::Ordering::Equal
        } else {
            b.1.partial_cmp(&a.1).unwrap()
        }
    });
    let maxima = found
        .into_iter()
        .map(|(w, h)| boundary_point(domain, &w).map(|p| (p, h)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CurvatureMaxima {
        maxima,
        constant_curvature: false,
    })
}
