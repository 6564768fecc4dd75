//! Scaling-law regression over lambda grids.
//!
//! Power models are fitted in log coordinates, the energy expansion by
//! linear least squares (SVD) in an explicit basis. The flatness test for a
//! ratio `value / predicted` is the least-squares slope of
//! `ln(ratio)` against `ln(lambda)`.

use crate::ansatz::{delta_of, AnsatzError, Bubble, ConcentrationConfig};
use crate::energy::{bubble_energy, error_dual_norms, reduced_energy, EnergyError, EnergyTolerances, ErrorNormReport};
use crate::geometry::{
    boundary_point, find_curvature_maxima, mean_curvature, BoundaryPoint, CurvatureMaxima, Domain, GeometryError, Vec4,
};
use crate::quadrature::Tolerance;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest admissible `|log-slope|` of a ratio band.
pub const FLATNESS: f64 = 0.1;
/// Relative singular-value threshold for rank decisions (columns are
/// normalized first).
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsymptoticsError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("grid spans {0:.2} decades of lambda, need at least 2")]
    NarrowGrid(f64),
    #[error("non-positive value {0:e} in a log-coordinate fit")]
    NonPositive(f64),
    #[error("basis rank deficient: {0}")]
    RankDeficient(String),
    #[error("hypothesis unmet: {0}")]
    Hypothesis(String),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Regression model for [`fit_scaling`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum FitModel {
    /// `value = C lambda^p`; coefficients `[C, p]`.
    PurePower,
    /// `value = C delta^p |ln delta|^q` with `delta = d / (lambda ln lambda)`
    /// and `q` fixed; coefficients `[C, p]`.
    PowerWithLog { log_power: f64, d: f64 },
    /// `value = a + b delta + c lambda delta^2 |ln delta|`; coefficients
    /// `[a, b, c]`.
    AffineInBasis { d: f64 },
}

impl FitModel {
    pub fn tag(&self) -> &'static str {
        match self {
            FitModel::PurePower => "pure-power",
            FitModel::PowerWithLog { .. } => "power-with-log",
            FitModel::AffineInBasis { .. } => "affine-in-basis",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub model: String,
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    /// `(lambda, value)` pairs, or `(lambda, value)` per row for joint fits.
    pub grid: Vec<(f64, f64)>,
}

/// Linear least squares `A c ~ y` via SVD. Returns coefficients, residuals
/// and `R^2`; fails when the column-normalized design is rank deficient.
pub fn least_squares(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>, f64), AsymptoticsError> {
    let (n, m) = a.shape();
    if n < m {
        return Err(AsymptoticsError::TooFewSamples { need: m, got: n });
    }
    let scale: Vec<f64> = (0..m).map(|j| a.column(j).norm()).collect();
    if let Some(j) = scale.iter().position(|&s| !(s > 0.0)) {
        return Err(AsymptoticsError::RankDeficient(format!("column {j} vanishes on the grid")));
    }
    let mut an = a.clone();
    for (j, s) in scale.iter().enumerate() {
        an.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = an.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > RANK_TOL * smax).count();
    if rank < m {
        return Err(AsymptoticsError::RankDeficient(format!("rank {rank} < {m} columns")));
    }
    let cn = svd.solve(y, 0.0).map_err(|e| AsymptoticsError::RankDeficient(e.to_string()))?;
    let c = DVector::from_iterator(m, cn.iter().zip(scale.iter()).map(|(v, s)| v / s));
    let fitted = a * &c;
    let res = y - fitted;
    Ok((c, res.clone(), r_squared(y, &res)))
}

fn r_squared(y: &DVector<f64>, res: &DVector<f64>) -> f64 {
    let mean = y.mean();
    let tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss: f64 = res.iter().map(|r| r * r).sum();
    if tot > 0.0 {
        (1.0 - ss / tot).clamp(0.0, 1.0)
    } else if ss == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Basis row `[1, delta, lambda delta^2 |ln delta|]` at `lambda`.
pub fn energy_basis(lambda: f64, d: f64) -> [f64; 3] {
    let delta = delta_of(d, lambda);
    [1.0, delta, lambda * delta * delta * delta.ln().abs()]
}

/// Fits `samples = [(lambda, value)]` with the given model. Needs at least
/// four samples spanning two decades of `lambda`.
pub fn fit_scaling(samples: &[(f64, f64)], model: &FitModel) -> Result<ScalingFit, AsymptoticsError> {
    if samples.len() < 4 {
        return Err(AsymptoticsError::TooFewSamples { need: 4, got: samples.len() });
    }
    let lmin = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let lmax = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let decades = (lmax / lmin).log10();
    if !(decades >= 2.0 - 1e-12) {
        return Err(AsymptoticsError::NarrowGrid(decades));
    }
    let n = samples.len();
    let (a, y) = match *model {
        FitModel::PurePower | FitModel::PowerWithLog { .. } => {
            let mut a = DMatrix::zeros(n, 2);
            let mut y = DVector::zeros(n);
            for (k, &(l, v)) in samples.iter().enumerate() {
                if !(v > 0.0) {
                    return Err(AsymptoticsError::NonPositive(v));
                }
                let (x, lv) = match *model {
                    FitModel::PowerWithLog { log_power, d } => {
                        let delta = delta_of(d, l);
                        (delta.ln(), v.ln() - log_power * delta.ln().abs().ln())
                    }
                    _ => (l.ln(), v.ln()),
                };
                a[(k, 0)] = 1.0;
                a[(k, 1)] = x;
                y[k] = lv;
            }
            (a, y)
        }
        FitModel::AffineInBasis { d } => {
            let mut a = DMatrix::zeros(n, 3);
            let mut y = DVector::zeros(n);
            for (k, &(l, v)) in samples.iter().enumerate() {
                let row = energy_basis(l, d);
                for j in 0..3 {
                    a[(k, j)] = row[j];
                }
                y[k] = v;
            }
            (a, y)
        }
    };
    let (c, res, r2) = least_squares(&a, &y)?;
    let coefficients = match model {
        FitModel::AffineInBasis { .. } => c.iter().copied().collect(),
        _ => vec![c[0].exp(), c[1]],
    };
    Ok(ScalingFit {
        model: model.tag().to_string(),
        coefficients,
        r_squared: r2,
        residuals: res.iter().copied().collect(),
        grid: samples.to_vec(),
    })
}

/// Least-squares slope of `ln(value)` against `ln(lambda)`.
pub fn log_slope(samples: &[(f64, f64)]) -> Result<f64, AsymptoticsError> {
    if samples.len() < 2 {
        return Err(AsymptoticsError::TooFewSamples { need: 2, got: samples.len() });
    }
    let n = samples.len() as f64;
    let mut pts = Vec::with_capacity(samples.len());
    for &(l, v) in samples {
        if !(v > 0.0) {
            return Err(AsymptoticsError::NonPositive(v));
        }
        pts.push((l.ln(), v.ln()));
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Boundary point data in plain arrays, for output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub omega: [f64; 4],
    pub xi: [f64; 4],
    #[serde(rename = "H")]
    pub h: f64,
}

impl PointRecord {
    pub fn of(p: &BoundaryPoint) -> Self {
        let a = |v: &Vec4| [v[0], v[1], v[2], v[3]];
        PointRecord {
            omega: a(&p.omega),
            xi: a(&p.xi),
            h: mean_curvature(p).h,
        }
    }
}

/// One single-energy sample of the constants fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub lambda: f64,
    pub point: usize,
    #[serde(rename = "H")]
    pub h: f64,
    pub d: f64,
    pub delta: f64,
    pub energy: f64,
    pub err_est: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsFit {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub fit: ScalingFit,
    pub points: Vec<PointRecord>,
    pub rows: Vec<EnergyRow>,
    /// `[c0, c1, c2]` fitted on `lambda <= split` and on `lambda >= split`.
    pub split: Option<[[f64; 3]; 2]>,
    pub split_lambda: Option<f64>,
    /// `c1 > 0`, `c2 > 0` and `R^2 >= 0.99`.
    pub verified: bool,
    pub flags: Vec<String>,
}

impl ConstantsFit {
    /// Largest relative change of `c1` and `c2` between the two halves.
    pub fn split_drift(&self) -> Option<[f64; 2]> {
        self.split.map(|[a, b]| [rel_diff(a[1], b[1]), rel_diff(a[2], b[2])])
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn joint_fit(rows: &[EnergyRow]) -> Result<(DVector<f64>, DVector<f64>, f64), AsymptoticsError> {
    let n = rows.len();
    let mut a = DMatrix::zeros(n, 3);
    let mut y = DVector::zeros(n);
    for (k, r) in rows.iter().enumerate() {
        a[(k, 0)] = 1.0;
        a[(k, 1)] = r.h * r.delta;
        a[(k, 2)] = r.lambda * r.delta * r.delta * r.delta.ln().abs();
        y[k] = r.energy;
    }
    let (c, res, r2) = least_squares(&a, &y)?;
    // I = c0 - c1 H delta + c2 lambda delta^2 |ln delta|
    Ok((DVector::from_vec(vec![c[0], -c[1], c[2]]), res, r2))
}

/// Regresses `I(V)` sampled at `points` x `lambdas` on the basis
/// `{1, H delta, lambda delta^2 |ln delta|}` jointly over the points.
/// `split` (if given and both halves hold at least two lambdas) refits on
/// `lambda <= split` and `lambda >= split`.
pub fn extract_constants(
    domain: &Domain,
    points: &[BoundaryPoint],
    lambdas: &[f64],
    d: f64,
    split: Option<f64>,
    tol: &Tolerance,
) -> Result<ConstantsFit, AsymptoticsError> {
    let recs: Vec<PointRecord> = points.iter().map(PointRecord::of).collect();
    let mut hs: Vec<f64> = recs.iter().map(|r| r.h).collect();
    hs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    hs.dedup_by(|a, b| (*a - *b).abs() <= 1e-8 * b.abs().max(1.0));
    if hs.len() < 3 {
        return Err(AsymptoticsError::RankDeficient(format!(
            "{} distinct mean curvature value(s) among the points, need at least 3",
            hs.len()
        )));
    }
    if let Some(r) = recs.iter().find(|r| !(r.h > 0.0)) {
        return Err(AsymptoticsError::Hypothesis(format!("H = {} is not positive", r.h)));
    }
    let jobs: Vec<(usize, f64)> = (0..points.len()).flat_map(|p| lambdas.iter().map(move |&l| (p, l))).collect();
    let rows: Vec<EnergyRow> = jobs
        .par_iter()
        .map(|&(p, l)| {
            let delta = delta_of(d, l);
            let s = bubble_energy(&Bubble::at_point(l, delta, &points[p]), domain, tol);
            EnergyRow {
                lambda: l,
                point: p,
                h: recs[p].h,
                d,
                delta,
                energy: s.value,
                err_est: s.err_est,
                converged: s.converged,
            }
        })
        .collect();
    let (c, res, r2) = joint_fit(&rows)?;
    let split_fit = match split {
        Some(sl) => {
            let lo: Vec<EnergyRow> = rows.iter().filter(|r| r.lambda <= sl * (1.0 + 1e-12)).cloned().collect();
            let hi: Vec<EnergyRow> = rows.iter().filter(|r| r.lambda >= sl * (1.0 - 1e-12)).cloned().collect();
            let nl = |v: &[EnergyRow]| {
                let mut ls: Vec<f64> = v.iter().map(|r| r.lambda).collect();
                ls.dedup();
                ls.len()
            };
            if nl(&lo) >= 2 && nl(&hi) >= 2 {
                let (a, _, _) = joint_fit(&lo)?;
                let (b, _, _) = joint_fit(&hi)?;
                Some([[a[0], a[1], a[2]], [b[0], b[1], b[2]]])
            } else {
                None
            }
        }
        None => None,
    };
    let mut flags = Vec::new();
    if !(c[1] > 0.0) {
        flags.push(format!("c1 = {} is not positive", c[1]));
    }
    if !(c[2] > 0.0) {
        flags.push(format!("c2 = {} is not positive", c[2]));
    }
    if !(r2 >= 0.99) {
        flags.push(format!("R^2 = {r2} below 0.99"));
    }
    if rows.iter().any(|r| !r.converged) {
        flags.push("some energy samples did not converge".into());
    }
    let verified = c[1] > 0.0 && c[2] > 0.0 && r2 >= 0.99;
    Ok(ConstantsFit {
        c0: c[0],
        c1: c[1],
        c2: c[2],
        fit: ScalingFit {
            model: "affine-in-basis".into(),
            coefficients: vec![c[0], c[1], c[2]],
            r_squared: r2,
            residuals: res.iter().copied().collect(),
            grid: rows.iter().map(|r| (r.lambda, r.energy)).collect(),
        },
        points: recs,
        rows,
        split: split_fit,
        split_lambda: split,
        verified,
        flags,
    })
}

/// Ratio band of one error term along the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermBand {
    pub term: usize,
    pub ratios: Vec<f64>,
    /// `None` when the term vanishes identically (`beta = 0` for `E6`).
    pub slope: Option<f64>,
    pub flat: bool,
    /// Grid values of `lambda` whose ratio lies outside the band a slope of
    /// [`FLATNESS`] would allow around the median.
    pub offending: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorScalingReport {
    pub lambdas: Vec<f64>,
    pub reports: Vec<ErrorNormReport>,
    pub bands: Vec<TermBand>,
    /// Predicted `E5` scaling dominant, per grid point.
    pub e5_dominant: Vec<bool>,
    pub pass: bool,
}

/// Error-term ratio bands for component 0 of the configuration
/// `(xi, partner)` along the lambda grid.
#[allow(clippy::too_many_arguments)]
pub fn verify_error_scaling(
    domain: &Domain,
    xi: &BoundaryPoint,
    partner: &BoundaryPoint,
    eta: f64,
    lambdas: &[f64],
    beta: f64,
    d: f64,
    tol: &EnergyTolerances,
) -> Result<ErrorScalingReport, AsymptoticsError> {
    let mut reports = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let cfg = ConcentrationConfig::new(l, beta, [d, d], [xi.clone(), partner.clone()], eta)?;
        reports.push(error_dual_norms(&cfg, 0, domain, tol)?);
    }
    let bands = ratio_bands(lambdas, &reports)?;
    let e5_dominant: Vec<bool> = reports.iter().map(|r| r.e5_dominant()).collect();
    let pass = bands.iter().all(|b| b.flat) && e5_dominant.iter().all(|&b| b);
    Ok(ErrorScalingReport {
        lambdas: lambdas.to_vec(),
        reports,
        bands,
        e5_dominant,
        pass,
    })
}

/// Flatness bands of the six ratios.
pub fn ratio_bands(lambdas: &[f64], reports: &[ErrorNormReport]) -> Result<Vec<TermBand>, AsymptoticsError> {
    let mut bands = Vec::with_capacity(6);
    let lspan = lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ln() - lambdas.iter().cloned().fold(f64::INFINITY, f64::min).ln();
    for k in 0..6 {
        let ratios: Vec<f64> = reports.iter().map(|r| r.ratios()[k]).collect();
        if ratios.iter().all(|&r| r == 0.0) {
            bands.push(TermBand {
                term: k + 1,
                ratios,
                slope: None,
                flat: true,
                offending: vec![],
            });
            continue;
        }
        let samples: Vec<(f64, f64)> = lambdas.iter().copied().zip(ratios.iter().copied()).collect();
        let slope = log_slope(&samples)?;
        let mut sorted = ratios.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = sorted[sorted.len() / 2];
        let half = 0.5 * FLATNESS * lspan;
        let offending = samples.iter().filter(|(_, r)| (r / med).ln().abs() > half).map(|s| s.0).collect();
        bands.push(TermBand {
            term: k + 1,
            ratios,
            slope: Some(slope),
            flat: slope.abs() <= FLATNESS,
            offending,
        });
    }
    Ok(bands)
}

/// Derivative-free coordinate descent: golden-section line searches over
/// each coordinate inside `bounds`, repeated until a sweep moves every
/// coordinate by less than `rtol` relative. Only comparisons of `f` are
/// used, so the result is invariant under positive rescaling of `f`.
pub fn coordinate_descent<F>(f: F, x0: &[f64], bounds: &[(f64, f64)], rtol: f64, max_sweeps: usize) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    const G: f64 = 0.618_033_988_749_894_9;
    for _ in 0..max_sweeps {
        let mut moved = 0.0f64;
        for k in 0..x.len() {
            let (mut a, mut b) = bounds[k];
            let eval = |t: f64, x: &mut Vec<f64>| {
                let old = x[k];
                x[k] = t;
                let v = f(x);
                x[k] = old;
                v
            };
            let mut c = b - G * (b - a);
            let mut d = a + G * (b - a);
            let mut fc = eval(c, &mut x);
            let mut fd = eval(d, &mut x);
            while (b - a) > rtol * 0.5 * (a.abs() + b.abs()) {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - G * (b - a);
                    fc = eval(c, &mut x);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + G * (b - a);
                    fd = eval(d, &mut x);
                }
            }
            let (t, ft) = if fc < fd { (c, fc) } else { (d, fd) };
            if ft < fx {
                moved = moved.max((t - x[k]).abs() / x[k].abs().max(1e-300));
                x[k] = t;
                fx = ft;
            }
        }
        if moved < rtol {
            break;
        }
    }
    (x, fx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupPrediction {
    pub xi_star: [PointRecord; 2],
    /// `d*_i = c1 H(xi*_i) / (2 c2)`.
    pub d_star: [f64; 2],
    pub delta_star: [f64; 2],
    #[serde(rename = "H_values")]
    pub h_values: [f64; 2],
    /// Reduced energy at the direct minimizer (cross-check only).
    pub energy_at_min: Option<f64>,
    /// Minimizer of the sampled reduced energy over `(d1, d2)`.
    pub d_direct: Option<[f64; 2]>,
    /// `max_i |d_direct_i - d*_i| / d*_i`.
    pub disagreement: Option<f64>,
    /// `disagreement <= 0.1`.
    pub consistent: Option<bool>,
    pub n_maxima: usize,
    /// `k (k - 1) / 2` candidate pairs for `k` maxima.
    pub pair_count: usize,
    pub lambda: f64,
    pub beta: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Settings of [`predict_blowup`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictOptions {
    pub n_seeds: usize,
    /// Golden-section stopping tolerance (relative, in `d`).
    pub rtol: f64,
    pub max_sweeps: usize,
    /// Search interval for each `d_i` as multiples of `d*_i`.
    pub bracket: (f64, f64),
    /// Run the direct minimization.
    pub cross_check: bool,
}

impl Default for PredictOptions {
    fn default() -> Self {
        PredictOptions {
            n_seeds: 200,
            rtol: 1e-4,
            max_sweeps: 3,
            bracket: (0.25, 4.0),
            cross_check: true,
        }
    }
}

/// Blow-up data from the two largest strict maxima of `H`, cross-checked
/// against direct minimization of the reduced energy in `(d1, d2)`.
pub fn predict_blowup(
    domain: &Domain,
    lambda: f64,
    beta: f64,
    c1: f64,
    c2: f64,
    opts: &PredictOptions,
    tol: &EnergyTolerances,
) -> Result<BlowupPrediction, AsymptoticsError> {
    let found = find_curvature_maxima(domain, opts.n_seeds)?;
    predict_from_maxima(domain, &found, lambda, beta, c1, c2, opts, tol)
}

/// Fails unless at least two strict maxima of `H` with `H > 0` exist.
pub fn check_hypothesis(found: &CurvatureMaxima) -> Result<(), AsymptoticsError> {
    if found.constant_curvature {
        return Err(AsymptoticsError::Hypothesis("mean curvature is constant, no strict maxima".into()));
    }
    if found.maxima.len() < 2 {
        return Err(AsymptoticsError::Hypothesis(format!(
            "{} strict local maximum point(s) of H with H > 0, need 2",
            found.maxima.len()
        )));
    }
    Ok(())
}

/// [`predict_blowup`] with the curvature maxima already located.
#[allow(clippy::too_many_arguments)]
pub fn predict_from_maxima(
    domain: &Domain,
    found: &CurvatureMaxima,
    lambda: f64,
    beta: f64,
    c1: f64,
    c2: f64,
    opts: &PredictOptions,
    tol: &EnergyTolerances,
) -> Result<BlowupPrediction, AsymptoticsError> {
    check_hypothesis(found)?;
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(AsymptoticsError::Hypothesis(format!("constants c1 = {c1}, c2 = {c2} must be positive")));
    }
    let k = found.maxima.len();
    let (p1, h1) = found.maxima[0].clone();
    let (p2, h2) = found.maxima[1].clone();
    let d_star = [c1 * h1 / (2.0 * c2), c1 * h2 / (2.0 * c2)];
    let bounds: Vec<(f64, f64)> = d_star.iter().map(|d| (d * opts.bracket.0, d * opts.bracket.1)).collect();
    let dlo = bounds.iter().map(|b| b.0).fold(f64::INFINITY, f64::min);
    let dhi = bounds.iter().map(|b| b.1).fold(0.0, f64::max);
    let sep = (p1.xi - p2.xi).norm();
    let eta = (0.5 * sep).min(0.5 * dlo).min(0.5 / dhi);
    let pts = [p1.clone(), p2.clone()];
    let energy = |x: &[f64]| -> f64 {
        match ConcentrationConfig::new(lambda, beta, [x[0], x[1]], pts.clone(), eta) {
            Ok(cfg) => reduced_energy(&cfg, domain, tol).value,
            Err(_) => f64::INFINITY,
        }
    };
    let (d_direct, disagreement, energy_at_min) = if opts.cross_check {
        let (x, e) = coordinate_descent(energy, &d_star, &bounds, opts.rtol, opts.max_sweeps);
        let dis = (0..2).map(|i| (x[i] - d_star[i]).abs() / d_star[i]).fold(0.0, f64::max);
        (Some([x[0], x[1]]), Some(dis), Some(e))
    } else {
        (None, None, None)
    };
    Ok(BlowupPrediction {
        xi_star: [PointRecord::of(&p1), PointRecord::of(&p2)],
        d_star,
        delta_star: [delta_of(d_star[0], lambda), delta_of(d_star[1], lambda)],
        h_values: [h1, h2],
        energy_at_min,
        d_direct,
        disagreement,
        consistent: disagreement.map(|d| d <= 0.1),
        n_maxima: k,
        pair_count: k * (k - 1) / 2,
        lambda,
        beta,
        c1,
        c2,
    })
}

/// Boundary points in the given directions.
pub fn points_at(domain: &Domain, dirs: &[Vec4]) -> Result<Vec<BoundaryPoint>, AsymptoticsError> {
    Ok(dirs.iter().map(|w| boundary_point(domain, w)).collect::<Result<Vec<_>, _>>()?)
}
