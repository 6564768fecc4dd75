//! Product-rule quadrature over star-shaped domains in R^4 and their
//! boundaries.
//!
//! Volume integrals use polar coordinates `x = c + t theta` about each
//! declared center `c` (or the origin when there is none). The direction is
//! split as `theta = sin(v) n + cos(v) sigma`, `sigma` on the unit 2-sphere
//! orthogonal to `n`, with `sigma` in spherical angles `(psi, zeta)`:
//!
//! `dx = t^3 cos(v)^2 sin(psi) dt dv dpsi dzeta`.
//!
//! `t` runs over the exact ray/domain intersection, on Gauss-Kronrod panels
//! graded geometrically from `min_panel` outward. For a center on the
//! boundary, `n` is the inward normal and the `v` panels are graded toward the
//! tangent plane `v = 0`, where ray lengths shrink to zero. Several centers
//! are combined through the partition of unity `|x - c_j|^-8 / sum_k |x - c_k|^-8`.
//!
//! Boundary integrals use geodesic polar coordinates on S^3 about the
//! direction of each center, `x = rho(w) w`, `dS = rho^3 / (w . nu) dw`.
//!
//! Error estimates: per dimension, Kronrod-15 against embedded Gauss-7 with
//! QUADPACK rescaling (trapezoid `M` against `M/2` points in `zeta`); the
//! dimension with the largest estimate is refined first. All node sets are
//! fixed by the refinement levels, and partial sums are reduced in a fixed
//! order, so results do not depend on the number of worker threads.

use crate::ansatz::FieldEval;
use crate::geometry::{complement_frame, Domain, Vec4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_LEVEL: u32 = 7;
const POU_POWER: i32 = 4;
/// Growth ratio of the angular panels graded toward the tangent plane.
const V_RATIO: f64 = 4.0;
const BOUNDARY_LEVEL_TOL: f64 = 1e-9;

/// Scalar integration result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub err_est: f64,
    pub n_evals: u64,
    pub converged: bool,
}

/// Result for an `N`-component integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadVec<const N: usize> {
    pub values: [f64; N],
    pub errs: [f64; N],
    pub n_evals: u64,
    pub converged: bool,
}

impl<const N: usize> QuadVec<N> {
    pub fn component(&self, i: usize) -> QuadResult {
        QuadResult {
            value: self.values[i],
            err_est: self.errs[i],
            n_evals: self.n_evals,
            converged: self.converged,
        }
    }
}

/// Where integrands may be singular or sharply peaked.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularityHint {
    pub centers: Vec<Vec4>,
    /// Ratio of consecutive radial panel lengths, in (0, 1).
    pub grading_ratio: f64,
    /// Length of the innermost radial panel.
    pub min_panel: f64,
}

impl SingularityHint {
    /// Centers with the smallest length scale `delta_min` among them;
    /// panels are graded by 1/2 down to `1e-3 delta_min`.
    pub fn new(centers: Vec<Vec4>, delta_min: f64) -> Self {
        SingularityHint {
            centers,
            grading_ratio: 0.5,
            min_panel: 1e-3 * delta_min,
        }
    }

    /// No centers: origin-polar rule for smooth integrands.
    pub fn none() -> Self {
        SingularityHint {
            centers: vec![],
            grading_ratio: 0.5,
            min_panel: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_evals: u64,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance {
            abs,
            rel,
            max_evals: 40_000_000,
        }
    }

    /// Default for smooth integrands.
    pub fn smooth() -> Self {
        Tolerance::new(1e-15, 1e-6)
    }

    /// Default for bubble-singular energy terms.
    pub fn singular() -> Self {
        Tolerance::new(1e-15, 1e-4)
    }

    pub fn with_budget(mut self, max_evals: u64) -> Self {
        self.max_evals = max_evals;
        self
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::smooth()
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    x: f64,
    wk: f64,
    wg: f64,
}

/// Kronrod-15 nodes on `[a, b]` with the embedded Gauss-7 weights
/// (zero at the Kronrod-only nodes).
fn gk15(a: f64, b: f64, out: &mut Vec<Node>) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    for k in 0..7 {
        let wg = if k % 2 == 1 { WG[k / 2] * h } else { 0.0 };
        out.push(Node {
            x: c - h * XGK[k],
            wk: WGK[k] * h,
            wg,
        });
        out.push(Node {
            x: c + h * XGK[k],
            wk: WGK[k] * h,
            wg,
        });
    }
    out.push(Node {
        x: c,
        wk: WGK[7] * h,
        wg: WG[3] * h,
    });
}

/// Panel sum and rescaled error from 15 node values.
fn panel<const N: usize>(nodes: &[Node], vals: &[[f64; N]], len: f64) -> ([f64; N], [f64; N]) {
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    for (nd, v) in nodes.iter().zip(vals) {
        for c in 0..N {
            k[c] += nd.wk * v[c];
            g[c] += nd.wg * v[c];
        }
    }
    let mut err = [0.0; N];
    for c in 0..N {
        let mean = k[c] / len;
        let mut resasc = 0.0;
        let mut resabs = 0.0;
        for (nd, v) in nodes.iter().zip(vals) {
            resasc += nd.wk * (v[c] - mean).abs();
            resabs += nd.wk * v[c].abs();
        }
        let d = (k[c] - g[c]).abs();
        let mut e = d;
        if resasc > 0.0 && d > 0.0 {
            e = resasc * (200.0 * d / resasc).powf(1.5).min(1.0);
        }
        err[c] = e.max(50.0 * f64::EPSILON * resabs);
    }
    (k, err)
}

fn add<const N: usize>(acc: &mut [f64; N], v: &[f64; N], w: f64) {
    for c in 0..N {
        acc[c] += w * v[c];
    }
}

/// Panel breakpoints `0, m, m q, m q^2, ...` up to `end`; a last panel
/// shorter than half its predecessor is merged into it.
fn ladder(m: f64, q: f64, end: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    let mut t = m.min(end);
    while t < end {
        b.push(t);
        t *= q;
    }
    b.push(end);
    let n = b.len();
    if n >= 3 && (b[n - 1] - b[n - 2]) < 0.5 * (b[n - 2] - b[n - 3]) {
        b.remove(n - 2);
    }
    b
}

fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

/// Kronrod nodes for the pieces of `[a, b]` cut at `breaks` (those strictly
/// inside), each piece split into `sub` equal panels. Returns nodes and the
/// panel lengths.
fn panel_nodes(a: f64, b: f64, breaks: &[f64], sub: usize, nodes: &mut Vec<Node>, lens: &mut Vec<f64>) {
    nodes.clear();
    lens.clear();
    let mut lo = a;
    let start = breaks.partition_point(|&x| x <= a);
    for &bk in breaks[start..].iter().chain(std::iter::once(&b)) {
        let hi = bk.min(b);
        if hi > lo {
            let h = (hi - lo) / sub as f64;
            for s in 0..sub {
                let p0 = lo + h * s as f64;
                let p1 = if s + 1 == sub { hi } else { p0 + h };
                gk15(p0, p1, nodes);
                lens.push(p1 - p0);
            }
        }
        lo = hi;
        if lo >= b {
            break;
        }
    }
}

fn panels_from(breaks: &[f64], sub: usize) -> (Vec<Node>, Vec<f64>) {
    let mut nodes = Vec::new();
    let mut lens = Vec::new();
    panel_nodes(breaks[0], *breaks.last().unwrap(), &breaks[1..breaks.len() - 1], sub, &mut nodes, &mut lens);
    (nodes, lens)
}

/// Refinement levels: `[t (or unused), v (or a), psi, zeta]`.
type Levels = [u32; 4];

/// Partial result of one direction-sphere node: value and per-dimension
/// error estimates.
#[derive(Clone, Copy)]
struct Partial<const N: usize> {
    val: [f64; N],
    err: [[f64; N]; 4],
    evals: u64,
}

impl<const N: usize> Partial<N> {
    fn zero() -> Self {
        Partial {
            val: [0.0; N],
            err: [[0.0; N]; 4],
            evals: 0,
        }
    }
}

/// Integrates `inner(sigma)` over the unit 2-sphere spanned by `frame` using
/// Kronrod panels in `psi` and the periodic trapezoid rule in `zeta`.
fn sphere2<const N: usize>(frame: &[Vec4; 3], lv: &Levels, inner: &(dyn Fn(&Vec4) -> Partial<N> + Sync)) -> Partial<N> {
    let np = 1usize << lv[2];
    let (pnodes, plens) = panels_from(&uniform(0.0, PI, np), 1);
    let m = 8usize << lv[3];
    let jobs: Vec<(usize, usize)> = (0..m).flat_map(|k| (0..pnodes.len()).map(move |i| (k, i))).collect();
    let parts: Vec<Partial<N>> = jobs
        .par_iter()
        .with_min_len(16)
        .map(|&(k, i)| {
            let z = TAU * k as f64 / m as f64;
            let p = pnodes[i].x;
            let s = frame[0] * p.cos() + (frame[1] * z.cos() + frame[2] * z.sin()) * p.sin();
            inner(&s)
        })
        .collect();
    let mut out = Partial::zero();
    let mut half = [0.0; N];
    let n_psi = pnodes.len();
    let mut hv = vec![[0.0; N]; 15];
    for k in 0..m {
        let row = &parts[k * n_psi..(k + 1) * n_psi];
        let mut ik = [0.0; N];
        for (pi, len) in plens.iter().enumerate() {
            let nodes = &pnodes[pi * 15..(pi + 1) * 15];
            for (j, nd) in nodes.iter().enumerate() {
                let sp = nd.x.sin();
                let part = &row[pi * 15 + j];
                for c in 0..N {
                    hv[j][c] = part.val[c] * sp;
                }
                for d in 0..2 {
                    add(&mut out.err[d], &part.err[d], nd.wk * sp * TAU / m as f64);
                }
                out.evals += part.evals;
            }
            let (kv, e) = panel(nodes, &hv, *len);
            add(&mut ik, &kv, 1.0);
            add(&mut out.err[2], &e, TAU / m as f64);
        }
        add(&mut out.val, &ik, TAU / m as f64);
        if k % 2 == 0 {
            add(&mut half, &ik, 2.0 * TAU / m as f64);
        }
    }
    for c in 0..N {
        out.err[3][c] = (out.val[c] - half[c]).abs();
    }
    out
}

/// Polar frame about one center.
#[derive(Debug, Clone)]
struct Pole {
    c: Vec4,
    n: Vec4,
    frame: [Vec4; 3],
    on_boundary: bool,
}

fn poles(domain: &Domain, hints: &SingularityHint) -> Vec<Pole> {
    let centers = if hints.centers.is_empty() {
        vec![Vec4::zeros()]
    } else {
        hints.centers.clone()
    };
    centers
        .into_iter()
        .map(|c| {
            let on_boundary = domain.level(&c).abs() < BOUNDARY_LEVEL_TOL;
            let n = if on_boundary { -domain.outward_normal(&c) } else { Vec4::w() };
            Pole {
                c,
                n,
                frame: complement_frame(&n),
                on_boundary,
            }
        })
        .collect()
}

/// `v` breakpoints for a pole.
fn v_breaks(domain: &Domain, pole: &Pole, hints: &SingularityHint) -> Vec<f64> {
    if !pole.on_boundary {
        return uniform(-FRAC_PI_2, FRAC_PI_2, 2);
    }
    // below v ~ delta the rays are shorter than the bubble scale and the
    // integrand is polynomial in v
    let v0 = (1e3 * hints.min_panel / domain.rho_max()).min(0.1);
    let up = ladder(v0, V_RATIO, FRAC_PI_2);
    if domain.is_quadric() {
        // convex: rays with v <= 0 leave at once
        up
    } else {
        let mut b: Vec<f64> = up.iter().rev().map(|x| -x).collect();
        b.extend_from_slice(&up[1..]);
        b
    }
}

fn t_extent(domain: &Domain, c: &Vec4) -> f64 {
    c.norm() + domain.rho_max() * 1.0001
}

fn segments(domain: &Domain, pole: &Pole, theta: &Vec4, origin_polar: bool) -> Vec<(f64, f64)> {
    if origin_polar {
        vec![(0.0, domain.rho(theta))]
    } else {
        domain.ray_segments(&pole.c, theta, pole.on_boundary)
    }
}

fn pou_weight(x: &Vec4, j: usize, centers: &[Vec4]) -> f64 {
    if centers.len() < 2 {
        return 1.0;
    }
    let dj = (x - centers[j]).norm();
    let mut s = 0.0;
    for c in centers {
        let r = dj / (x - c).norm();
        s += r.powi(POU_POWER);
    }
    1.0 / s
}

/// Runs `attempt` at increasing levels until the per-component tolerance is
/// met, refining the dimension with the largest scaled error.
fn adapt<const N: usize>(
    tol: &Tolerance,
    active: [bool; 4],
    mut attempt: impl FnMut(&Levels) -> Partial<N>,
) -> QuadVec<N> {
    let mut lv: Levels = [0; 4];
    let mut spent = 0u64;
    loop {
        let p = attempt(&lv);
        spent += p.evals;
        let mut errs = [0.0; N];
        let mut worst = (0usize, 0.0f64);
        let mut ok = true;
        for c in 0..N {
            let t = tol.abs.max(tol.rel * p.val[c].abs());
            for d in 0..4 {
                errs[c] += p.err[d][c];
            }
            if errs[c] > t {
                ok = false;
            }
            for d in 0..4 {
                if active[d] && lv[d] < MAX_LEVEL {
                    let r = p.err[d][c] / t;
                    if r > worst.1 {
                        worst = (d, r);
                    }
                }
            }
        }
        let done = QuadVec {
            values: p.val,
            errs,
            n_evals: spent,
            converged: ok,
        };
        if ok || worst.1 == 0.0 || spent + 2 * p.evals > tol.max_evals {
            return done;
        }
        lv[worst.0] += 1;
    }
}

/// Integral over one ray restricted to `window`, with the integrand already
/// including every weight except the outer angular ones.
#[allow(clippy::too_many_arguments)]
fn ray_integral<const N: usize>(
    f: &(dyn Fn(&Vec4) -> [f64; N] + Sync),
    pole: &Pole,
    centers: &[Vec4],
    j: usize,
    theta: &Vec4,
    segs: &[(f64, f64)],
    window: (f64, f64),
    breaks: &[f64],
    sub: usize,
) -> ([f64; N], [f64; N], u64) {
    let mut val = [0.0; N];
    let mut err = [0.0; N];
    let mut evals = 0;
    let mut nodes = Vec::with_capacity(15 * 64);
    let mut lens = Vec::with_capacity(64);
    let mut vals = [[0.0; N]; 15];
    for &(a, b) in segs {
        let (a, b) = (a.max(window.0), b.min(window.1));
        if b <= a {
            continue;
        }
        panel_nodes(a, b, breaks, sub, &mut nodes, &mut lens);
        for (pi, len) in lens.iter().enumerate() {
            let pn = &nodes[pi * 15..(pi + 1) * 15];
            for (k, nd) in pn.iter().enumerate() {
                let x = pole.c + theta * nd.x;
                let w = nd.x.powi(3) * pou_weight(&x, j, centers);
                let fx = f(&x);
                for c in 0..N {
                    vals[k][c] = fx[c] * w;
                }
            }
            evals += 15;
            let (kv, e) = panel(pn, &vals, *len);
            add(&mut val, &kv, 1.0);
            add(&mut err, &e, 1.0);
        }
    }
    (val, err, evals)
}

/// Integrates the radial-direction values `ray(theta) -> (value, t-error, evals)`
/// over `v` and the 2-sphere about one pole.
fn pole_integral<const N: usize>(
    pole: &Pole,
    vbreaks: &[f64],
    lv: &Levels,
    ray: &(dyn Fn(&Vec4) -> ([f64; N], [f64; N], u64) + Sync),
) -> Partial<N> {
    let (vnodes, vlens) = panels_from(vbreaks, 1 << lv[1]);
    let inner = |s: &Vec4| -> Partial<N> {
        let mut out = Partial::zero();
        let mut vals = [[0.0; N]; 15];
        for (pi, len) in vlens.iter().enumerate() {
            let pn = &vnodes[pi * 15..(pi + 1) * 15];
            for (k, nd) in pn.iter().enumerate() {
                let (sv, cv) = nd.x.sin_cos();
                let theta = pole.n * sv + s * cv;
                let (v, e, n) = ray(&theta);
                let c2 = cv * cv;
                for c in 0..N {
                    vals[k][c] = v[c] * c2;
                }
                add(&mut out.err[0], &e, nd.wk * c2);
                out.evals += n;
            }
            let (kv, e) = panel(pn, &vals, *len);
            add(&mut out.val, &kv, 1.0);
            add(&mut out.err[1], &e, 1.0);
        }
        out
    };
    sphere2(&pole.frame, lv, &inner)
}

fn merge<const N: usize>(acc: &mut Partial<N>, p: &Partial<N>) {
    add(&mut acc.val, &p.val, 1.0);
    for d in 0..4 {
        add(&mut acc.err[d], &p.err[d], 1.0);
    }
    acc.evals += p.evals;
}

/// `int_Omega f` for an `N`-component integrand, graded toward the hint
/// centers.
pub fn integrate_domain_vec<const N: usize, F>(f: F, domain: &Domain, hints: &SingularityHint, tol: &Tolerance) -> QuadVec<N>
where
    F: Fn(&Vec4) -> [f64; N] + Sync,
{
    let origin_polar = hints.centers.is_empty();
    let ps = poles(domain, hints);
    let centers: Vec<Vec4> = ps.iter().map(|p| p.c).collect();
    let q = 1.0 / hints.grading_ratio;
    adapt(tol, [true; 4], |lv| {
        let mut acc = Partial::zero();
        for (j, pole) in ps.iter().enumerate() {
            let vb = v_breaks(domain, pole, hints);
            let tb = ladder(hints.min_panel, q, t_extent(domain, &pole.c));
            let tb_inner = &tb[1..tb.len() - 1];
            let sub = 1usize << lv[0];
            let ray = |theta: &Vec4| {
                let segs = segments(domain, pole, theta, origin_polar);
                ray_integral(&f, pole, &centers, j, theta, &segs, (0.0, f64::INFINITY), tb_inner, sub)
            };
            merge(&mut acc, &pole_integral(pole, &vb, lv, &ray));
        }
        acc
    })
}

/// Scalar version of [`integrate_domain_vec`].
pub fn integrate_domain<F>(f: F, domain: &Domain, hints: &SingularityHint, tol: &Tolerance) -> QuadResult
where
    F: Fn(&Vec4) -> f64 + Sync,
{
    integrate_domain_vec(|x| [f(x)], domain, hints, tol).component(0)
}

/// `int_{Omega cap {t0 <= |x - c| < t1}} f` using a single pole at `center`
/// (no partition of unity). The integrand must be regular in that region
/// away from `center`.
pub fn integrate_shell_vec<const N: usize, F>(
    f: F,
    domain: &Domain,
    center: &Vec4,
    window: (f64, f64),
    hints: &SingularityHint,
    tol: &Tolerance,
) -> QuadVec<N>
where
    F: Fn(&Vec4) -> [f64; N] + Sync,
{
    let h = SingularityHint {
        centers: vec![*center],
        ..hints.clone()
    };
    let pole = poles(domain, &h).remove(0);
    let q = 1.0 / h.grading_ratio;
    let vb = v_breaks(domain, &pole, &h);
    let tb = ladder(h.min_panel, q, t_extent(domain, center));
    let centers = [pole.c];
    adapt(tol, [true; 4], |lv| {
        let sub = 1usize << lv[0];
        let ray = |theta: &Vec4| {
            let segs = segments(domain, &pole, theta, false);
            ray_integral(&f, &pole, &centers, 0, theta, &segs, window, &tb[1..tb.len() - 1], sub)
        };
        pole_integral(&pole, &vb, lv, &ray)
    })
}

/// Cumulative table of `int_0^T g(t) t^3 dt` on the graded radial ladder.
struct Profile<'a, const N: usize> {
    g: &'a (dyn Fn(f64) -> [f64; N] + Sync),
    breaks: Vec<f64>,
    cum: Vec<[f64; N]>,
    cum_err: Vec<[f64; N]>,
}

impl<'a, const N: usize> Profile<'a, N> {
    fn new(g: &'a (dyn Fn(f64) -> [f64; N] + Sync), base: &[f64], sub: usize) -> (Self, u64) {
        let mut breaks = vec![0.0];
        for w in base.windows(2) {
            let h = (w[1] - w[0]) / sub as f64;
            for s in 1..=sub {
                breaks.push(if s == sub { w[1] } else { w[0] + h * s as f64 });
            }
        }
        let mut cum = vec![[0.0; N]];
        let mut cum_err = vec![[0.0; N]];
        let mut nodes = Vec::with_capacity(15);
        let mut vals = [[0.0; N]; 15];
        for w in breaks.windows(2) {
            nodes.clear();
            gk15(w[0], w[1], &mut nodes);
            for (k, nd) in nodes.iter().enumerate() {
                let gv = g(nd.x);
                let t3 = nd.x.powi(3);
                for c in 0..N {
                    vals[k][c] = gv[c] * t3;
                }
            }
            let (kv, e) = panel(&nodes, &vals, w[1] - w[0]);
            let mut c1 = *cum.last().unwrap();
            let mut e1 = *cum_err.last().unwrap();
            add(&mut c1, &kv, 1.0);
            add(&mut e1, &e, 1.0);
            cum.push(c1);
            cum_err.push(e1);
        }
        let n = (breaks.len() as u64 - 1) * 15;
        (
            Profile {
                g,
                breaks,
                cum,
                cum_err,
            },
            n,
        )
    }

    /// `(int_0^T, panel index, error of the partial panel, evals)`.
    fn at(&self, t: f64) -> ([f64; N], usize, [f64; N], u64) {
        if t <= 0.0 {
            return ([0.0; N], 0, [0.0; N], 0);
        }
        let t = t.min(*self.breaks.last().unwrap());
        let k = self.breaks.partition_point(|&b| b <= t) - 1;
        let k = k.min(self.breaks.len() - 2);
        let b0 = self.breaks[k];
        let mut v = self.cum[k];
        if t <= b0 {
            return (v, k, [0.0; N], 0);
        }
        let mut nodes = Vec::with_capacity(15);
        gk15(b0, t, &mut nodes);
        let mut vals = [[0.0; N]; 15];
        for (i, nd) in nodes.iter().enumerate() {
            let gv = (self.g)(nd.x);
            let t3 = nd.x.powi(3);
            for c in 0..N {
                vals[i][c] = gv[c] * t3;
            }
        }
        let (kv, e) = panel(&nodes, &vals, t - b0);
        add(&mut v, &kv, 1.0);
        (v, k, e, 15)
    }

    /// Integral over `[a, b]` with its error estimate.
    fn between(&self, a: f64, b: f64) -> ([f64; N], [f64; N], u64) {
        let (va, ka, ea, na) = self.at(a);
        let (vb, kb, eb, nb) = self.at(b);
        let mut v = [0.0; N];
        let mut e = [0.0; N];
        for c in 0..N {
            v[c] = vb[c] - va[c];
            e[c] = (self.cum_err[kb][c] - self.cum_err[ka][c]).abs() + ea[c] + eb[c];
        }
        (v, e, na + nb)
    }
}

/// `int_{Omega cap {t0 <= |x - c| < t1}} g(|x - c|) dx` for a radial
/// integrand about `center`. The radial profile is tabulated once per
/// refinement level, so each ray only costs the partial panels at its ends.
pub fn integrate_radial_vec<const N: usize, G>(
    g: G,
    domain: &Domain,
    center: &Vec4,
    window: (f64, f64),
    hints: &SingularityHint,
    tol: &Tolerance,
) -> QuadVec<N>
where
    G: Fn(f64) -> [f64; N] + Sync,
{
    let h = SingularityHint {
        centers: vec![*center],
        ..hints.clone()
    };
    let pole = poles(domain, &h).remove(0);
    let vb = v_breaks(domain, &pole, &h);
    let base = ladder(h.min_panel, 1.0 / h.grading_ratio, t_extent(domain, center));
    adapt(tol, [true; 4], |lv| {
        let (prof, n0) = Profile::new(&g, &base, 1 << lv[0]);
        let ray = |theta: &Vec4| {
            let mut val = [0.0; N];
            let mut err = [0.0; N];
            let mut n = 0;
            for (a, b) in segments(domain, &pole, theta, false) {
                let (a, b) = (a.max(window.0), b.min(window.1));
                if b > a {
                    let (v, e, k) = prof.between(a, b);
                    add(&mut val, &v, 1.0);
                    add(&mut err, &e, 1.0);
                    n += k;
                }
            }
            (val, err, n)
        };
        let mut p = pole_integral(&pole, &vb, lv, &ray);
        p.evals += n0;
        p
    })
}

pub fn integrate_radial<G>(g: G, domain: &Domain, center: &Vec4, hints: &SingularityHint, tol: &Tolerance) -> QuadResult
where
    G: Fn(f64) -> f64 + Sync,
{
    integrate_radial_vec(|t| [g(t)], domain, center, (0.0, f64::INFINITY), hints, tol).component(0)
}

/// `int_{dOmega} f(x, nu(x)) dS` with `nu` the outward unit normal.
pub fn integrate_boundary_vec<const N: usize, F>(f: F, domain: &Domain, hints: &SingularityHint, tol: &Tolerance) -> QuadVec<N>
where
    F: Fn(&Vec4, &Vec4) -> [f64; N] + Sync,
{
    let dirs: Vec<Vec4> = if hints.centers.is_empty() {
        vec![Vec4::x()]
    } else {
        hints.centers.iter().map(|c| c.normalize()).collect()
    };
    let centers: Vec<Vec4> = dirs.iter().map(|w| domain.boundary_xi(w)).collect();
    let graded = !hints.centers.is_empty();
    adapt(tol, [false, true, true, true], |lv| {
        let mut acc = Partial::zero();
        for (j, wc) in dirs.iter().enumerate() {
            let abreaks = if graded {
                let a0 = (1e3 * hints.min_panel / domain.rho(wc)).min(0.1);
                ladder(a0, 1.0 / hints.grading_ratio, PI)
            } else {
                uniform(0.0, PI, 2)
            };
            let (anodes, alens) = panels_from(&abreaks, 1 << lv[1]);
            let frame = complement_frame(wc);
            let inner = |s: &Vec4| -> Partial<N> {
                let mut out = Partial::zero();
                let mut vals = [[0.0; N]; 15];
                for (pi, len) in alens.iter().enumerate() {
                    let pn = &anodes[pi * 15..(pi + 1) * 15];
                    for (k, nd) in pn.iter().enumerate() {
                        let (sa, ca) = nd.x.sin_cos();
                        let w = wc * ca + s * sa;
                        let rho = domain.rho(&w);
                        let x = w * rho;
                        let nu = domain.outward_normal(&x);
                        let jac = rho.powi(3) / w.dot(&nu) * sa * sa * pou_weight(&x, j, &centers);
                        let fx = f(&x, &nu);
                        for c in 0..N {
                            vals[k][c] = fx[c] * jac;
                        }
                    }
                    out.evals += 15;
                    let (kv, e) = panel(pn, &vals, *len);
                    add(&mut out.val, &kv, 1.0);
                    add(&mut out.err[1], &e, 1.0);
                }
                out
            };
            merge(&mut acc, &sphere2(&frame, lv, &inner));
        }
        acc
    })
}

pub fn integrate_boundary<F>(f: F, domain: &Domain, hints: &SingularityHint, tol: &Tolerance) -> QuadResult
where
    F: Fn(&Vec4, &Vec4) -> f64 + Sync,
{
    integrate_boundary_vec(|x, n| [f(x, n)], domain, hints, tol).component(0)
}

/// `<u, v> = int grad u . grad v + lambda int u v` over the domain.
pub fn h1_lambda_inner<U, V>(u: U, v: V, lambda: f64, domain: &Domain, hints: &SingularityHint, tol: &Tolerance) -> QuadResult
where
    U: Fn(&Vec4) -> FieldEval + Sync,
    V: Fn(&Vec4) -> FieldEval + Sync,
{
    integrate_domain(
        |x| {
            let a = u(x);
            let b = v(x);
            a.gradient.dot(&b.gradient) + lambda * a.value * b.value
        },
        domain,
        hints,
        tol,
    )
}

/// Integration region for [`lp_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Domain,
    Boundary,
}

/// `(int |u|^p)^(1/p)` over the domain or its boundary. The error estimate
/// is propagated to first order through the root.
pub fn lp_norm<U>(u: U, p: f64, region: Region, domain: &Domain, hints: &SingularityHint, tol: &Tolerance) -> QuadResult
where
    U: Fn(&Vec4) -> f64 + Sync,
{
    let r = match region {
        Region::Domain => integrate_domain(|x| u(x).abs().powf(p), domain, hints, tol),
        Region::Boundary => integrate_boundary(|x, _| u(x).abs().powf(p), domain, hints, tol),
    };
    root(r, p)
}

/// Turns `int |u|^p` into the norm.
pub fn root(r: QuadResult, p: f64) -> QuadResult {
    let value = r.value.max(0.0).powf(1.0 / p);
    let err_est = if r.value > 0.0 { value * r.err_est / (p * r.value) } else { r.err_est.powf(1.0 / p) };
    QuadResult {
        value,
        err_est,
        n_evals: r.n_evals,
        converged: r.converged,
    }
}
