//! Subcommand bodies. Every command writes its CSV/JSON into the output
//! directory; `--json` additionally sends the JSON report to stdout or a
//! chosen path.

use blowuplab_core::ansatz::{delta_of, Bubble, ConcentrationConfig};
use blowuplab_core::asymptotics::{
    check_hypothesis, extract_constants, fit_scaling, log_slope, points_at, predict_from_maxima, verify_error_scaling,
    AsymptoticsError, ConstantsFit, FitModel, PointRecord, PredictOptions, TermBand, FLATNESS,
};
use blowuplab_core::energy::{bubble_q, correction_l4, coupling_term, EnergyTolerances};
use blowuplab_core::geometry::{find_curvature_maxima, sphere_points, BoundaryPoint, Domain, Vec4};
use blowuplab_core::specialfn::invariant_suite;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::{Failure, GlobalOpts, Quantity};

fn asym(e: AsymptoticsError) -> Failure {
    let code = match e {
        AsymptoticsError::Hypothesis(_) => 5,
        AsymptoticsError::NonPositive(_) => 4,
        _ => 2,
    };
    Failure::new(code, e.to_string())
}

struct Setup {
    cfg: ExperimentConfig,
    domain: Domain,
    out: PathBuf,
    tol: EnergyTolerances,
}

fn setup(g: &GlobalOpts) -> Result<Setup, Failure> {
    let path = g.config.as_ref().ok_or_else(|| Failure::usage("--config is required for this command"))?;
    let (mut cfg, base) = ExperimentConfig::load(path)?;
    if let Some(grid) = &g.lambda_grid {
        cfg.lambda_grid = grid.clone();
        cfg.validate()?;
    }
    let domain = cfg.domain(&base)?;
    let out = out_dir(g, cfg.output.dir.as_deref())?;
    let mut tol = EnergyTolerances::default();
    if let Some(r) = g.tol_rel.or(cfg.tolerance.rel) {
        tol = tol.with_rel(r);
    }
    if let Some(r) = cfg.tolerance.radial_rel {
        tol.radial.rel = r;
    }
    if let Some(n) = cfg.tolerance.max_evals {
        for t in [&mut tol.radial, &mut tol.q, &mut tol.coupling, &mut tol.general] {
            t.max_evals = n;
        }
    }
    Ok(Setup { cfg, domain, out, tol })
}

fn out_dir(g: &GlobalOpts, from_config: Option<&str>) -> Result<PathBuf, Failure> {
    let dir = g.out.clone().or_else(|| from_config.map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Failure::usage(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn io(e: impl std::fmt::Display) -> Failure {
    Failure::usage(format!("write failed: {e}"))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(io)?;
    s.push('\n');
    std::fs::write(path, s).map_err(io)
}

/// Writes `dir/name` and honours `--json`.
fn emit_json(g: &GlobalOpts, dir: &Path, name: &str, value: &serde_json::Value) -> Result<(), Failure> {
    write_json(&dir.join(name), value)?;
    match &g.json {
        Some(Some(p)) => write_json(p, value),
        Some(None) => {
            println!("{}", serde_json::to_string_pretty(value).map_err(io)?);
            Ok(())
        }
        None => Ok(()),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn unconverged(what: &str, lambdas: &[f64]) -> Failure {
    let list: Vec<String> = lambdas.iter().map(|l| format!("{l}")).collect();
    Failure::new(3, format!("{what}: quadrature did not converge at lambda = [{}]", list.join(", ")))
}

pub fn verify_specialfn(g: &GlobalOpts, rmin: f64, rmax: f64, points: usize) -> Result<(), Failure> {
    if points < 10 {
        return Err(Failure::usage(format!("--points {points} is below 10")));
    }
    let rep = invariant_suite(rmin, rmax, points).map_err(|e| Failure::usage(format!("unsupported range [{rmin}, {rmax}]: {e}")))?;
    eprintln!(
        "ode residual max {:.3e}, recurrence max {:.3e}, derivative max {:.3e} / {:.3e}",
        rep.ode_residual_max, rep.recurrence_max, rep.k1_derivative_max, rep.w_derivative_max
    );
    for w in [&rep.small_window, &rep.large_window] {
        eprintln!(
            "window [{}, {}]: constant {:.6e}, refined {:.6e}, variation {:.4}, stable {}",
            w.lo, w.hi, w.constant, w.refined, w.variation, w.stable
        );
    }
    let value = serde_json::to_value(&rep).map_err(io)?;
    if g.out.is_some() {
        let dir = out_dir(g, None)?;
        emit_json(g, &dir, "specialfn.json", &value)?;
    } else {
        match &g.json {
            Some(Some(p)) => write_json(p, &value)?,
            Some(None) => println!("{}", serde_json::to_string_pretty(&value).map_err(io)?),
            None => {}
        }
    }
    if rep.pass {
        Ok(())
    } else {
        Err(Failure::new(1, "special-function invariant suite failed"))
    }
}

#[derive(Serialize)]
struct ScanRow {
    omega1: f64,
    omega2: f64,
    omega3: f64,
    omega4: f64,
    xi1: f64,
    xi2: f64,
    xi3: f64,
    xi4: f64,
    #[serde(rename = "H")]
    h: f64,
}

pub fn curvature(g: &GlobalOpts) -> Result<(), Failure> {
    let s = setup(g)?;
    let dirs = sphere_points(s.cfg.scan_points);
    let rows: Vec<ScanRow> = dirs
        .par_iter()
        .map(|w| {
            let x = s.domain.boundary_xi(w);
            ScanRow {
                omega1: w[0],
                omega2: w[1],
                omega3: w[2],
                omega4: w[3],
                xi1: x[0],
                xi2: x[1],
                xi3: x[2],
                xi4: x[3],
                h: s.domain.mean_curvature_at(w),
            }
        })
        .collect();
    write_csv(&s.out.join("curvature.csv"), &rows)?;
    let found = find_curvature_maxima(&s.domain, s.cfg.n_seeds).map_err(|e| Failure::usage(e.to_string()))?;
    let maxima: Vec<PointRecord> = found.maxima.iter().map(|(p, _)| PointRecord::of(p)).collect();
    #[derive(Serialize)]
    struct MaxRow {
        rank: usize,
        omega1: f64,
        omega2: f64,
        omega3: f64,
        omega4: f64,
        #[serde(rename = "H")]
        h: f64,
    }
    let mrows: Vec<MaxRow> = maxima
        .iter()
        .enumerate()
        .map(|(k, m)| MaxRow {
            rank: k + 1,
            omega1: m.omega[0],
            omega2: m.omega[1],
            omega3: m.omega[2],
            omega4: m.omega[3],
            h: m.h,
        })
        .collect();
    write_csv(&s.out.join("curvature_maxima.csv"), &mrows)?;
    let hmin = rows.iter().map(|r| r.h).fold(f64::INFINITY, f64::min);
    let hmax = rows.iter().map(|r| r.h).fold(f64::NEG_INFINITY, f64::max);
    eprintln!("H in [{hmin:.6}, {hmax:.6}], {} strict maxima", maxima.len());
    let report = json!({
        "command": "curvature",
        "domain": s.domain.spec(),
        "scan_points": rows.len(),
        "h_min": hmin,
        "h_max": hmax,
        "constant_curvature": found.constant_curvature,
        "maxima": maxima,
    });
    emit_json(g, &s.out, "curvature.json", &report)
}

/// `xi` and its partner for the scaling runs: the first two config points,
/// defaulting to `e1` and `-e1`.
fn scaling_points(s: &Setup) -> Result<(BoundaryPoint, BoundaryPoint), Failure> {
    let mut dirs = s.cfg.directions();
    if dirs.is_empty() {
        dirs.push(Vec4::x());
    }
    if dirs.len() < 2 {
        dirs.push(-dirs[0]);
    }
    let pts = points_at(&s.domain, &dirs[..2]).map_err(asym)?;
    Ok((pts[0].clone(), pts[1].clone()))
}

pub fn scaling(g: &GlobalOpts, q: Quantity) -> Result<(), Failure> {
    let s = setup(g)?;
    match q {
        Quantity::Error => scaling_error(g, &s),
        Quantity::Coupling => scaling_coupling(g, &s),
        Quantity::Q1 => scaling_q1(g, &s),
        Quantity::Wnorm => scaling_wnorm(g, &s),
    }
}

/// Power fit of `(lambda, value)` when the grid allows one.
fn optional_fit(samples: &[(f64, f64)]) -> serde_json::Value {
    match fit_scaling(samples, &FitModel::PurePower) {
        Ok(f) => serde_json::to_value(f).unwrap_or(serde_json::Value::Null),
        Err(e) => json!({ "skipped": e.to_string() }),
    }
}

fn flat_band(lambdas: &[f64], ratios: &[f64]) -> Result<Option<f64>, Failure> {
    if ratios.iter().all(|&r| r == 0.0) {
        return Ok(None);
    }
    let samples: Vec<(f64, f64)> = lambdas.iter().copied().zip(ratios.iter().map(|r| r.abs())).collect();
    log_slope(&samples).map(Some).map_err(asym)
}

#[derive(Serialize)]
struct ErrorRow {
    lambda: f64,
    delta: f64,
    e1: f64,
    e2: f64,
    e3: f64,
    e4: f64,
    e5: f64,
    e6: f64,
    s1: f64,
    s2: f64,
    s3: f64,
    s4: f64,
    s5: f64,
    s6: f64,
    ratio1: f64,
    ratio2: f64,
    ratio3: f64,
    ratio4: f64,
    ratio5: f64,
    ratio6: f64,
    e5_dominant: bool,
    converged: bool,
}

fn scaling_error(g: &GlobalOpts, s: &Setup) -> Result<(), Failure> {
    let (xi, partner) = scaling_points(s)?;
    let d = s.cfg.d_defaults[0];
    let lambdas = &s.cfg.lambda_grid;
    let rep = verify_error_scaling(&s.domain, &xi, &partner, s.cfg.eta, lambdas, s.cfg.beta, d, &s.tol).map_err(asym)?;
    let rows: Vec<ErrorRow> = rep
        .reports
        .iter()
        .zip(lambdas)
        .map(|(r, &l)| {
            let q = r.ratios();
            ErrorRow {
                lambda: l,
                delta: delta_of(d, l),
                e1: r.norms[0],
                e2: r.norms[1],
                e3: r.norms[2],
                e4: r.norms[3],
                e5: r.norms[4],
                e6: r.norms[5],
                s1: r.scalings[0],
                s2: r.scalings[1],
                s3: r.scalings[2],
                s4: r.scalings[3],
                s5: r.scalings[4],
                s6: r.scalings[5],
                ratio1: q[0],
                ratio2: q[1],
                ratio3: q[2],
                ratio4: q[3],
                ratio5: q[4],
                ratio6: q[5],
                e5_dominant: r.e5_dominant(),
                converged: r.converged.iter().all(|&c| c),
            }
        })
        .collect();
    write_csv(&s.out.join("scaling_error.csv"), &rows)?;
    let fits: Vec<serde_json::Value> = (0..6)
        .map(|k| {
            let samples: Vec<(f64, f64)> = rep.reports.iter().zip(lambdas).map(|(r, &l)| (l, r.norms[k])).collect();
            if samples.iter().all(|p| p.1 == 0.0) {
                json!({ "skipped": "term vanishes identically" })
            } else {
                optional_fit(&samples)
            }
        })
        .collect();
    for b in &rep.bands {
        eprintln!("E{}: slope {:?}, flat {}", b.term, b.slope, b.flat);
    }
    let report = json!({
        "command": "scaling",
        "quantity": "error",
        "domain": s.domain.spec(),
        "xi": PointRecord::of(&xi),
        "partner": PointRecord::of(&partner),
        "beta": s.cfg.beta,
        "d": d,
        "eta": s.cfg.eta,
        "flatness": FLATNESS,
        "lambdas": lambdas,
        "bands": rep.bands,
        "e5_dominant": rep.e5_dominant,
        "e5_norm_dominant": rep.reports.iter().map(|r| r.e5_norm_dominant()).collect::<Vec<_>>(),
        "e6_split": rep.reports.iter().map(|r| r.e6_split).collect::<Vec<_>>(),
        "fits": fits,
        "pass": rep.pass,
    });
    emit_json(g, &s.out, "scaling_error.json", &report)?;
    let bad: Vec<f64> = rows.iter().filter(|r| !r.converged).map(|r| r.lambda).collect();
    if !bad.is_empty() {
        return Err(unconverged("error norms", &bad));
    }
    if !rep.pass {
        let off: Vec<String> = rep.bands.iter().filter(|b: &&TermBand| !b.flat).map(|b| format!("E{}", b.term)).collect();
        return Err(Failure::new(4, format!("flatness not met for [{}] or E5 not dominant", off.join(", "))));
    }
    Ok(())
}

#[derive(Serialize)]
struct CouplingRow {
    lambda: f64,
    delta1: f64,
    delta2: f64,
    coupling: f64,
    err_est: f64,
    ratio: f64,
    converged: bool,
}

fn scaling_coupling(g: &GlobalOpts, s: &Setup) -> Result<(), Failure> {
    let (xi, partner) = scaling_points(s)?;
    let beta = s.cfg.beta;
    let mut rows = Vec::new();
    for &l in &s.cfg.lambda_grid {
        let cfg = ConcentrationConfig::new(l, beta, s.cfg.d_defaults, [xi.clone(), partner.clone()], s.cfg.eta)
            .map_err(|e| Failure::usage(e.to_string()))?;
        let c = coupling_term(&cfg, &s.domain, &s.tol.coupling);
        let (d1, d2) = (cfg.delta(0), cfg.delta(1));
        let scale = d1 * d1 * d2 * d2 * (d1 * d2).ln().abs();
        rows.push(CouplingRow {
            lambda: l,
            delta1: d1,
            delta2: d2,
            coupling: c.value,
            err_est: c.err_est,
            ratio: c.value.abs() / scale,
            converged: c.converged,
        });
    }
    write_csv(&s.out.join("scaling_coupling.csv"), &rows)?;
    let lambdas: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let (slope, fit, notice) = if beta == 0.0 {
        eprintln!("notice: beta = 0, coupling vanishes identically; fit skipped");
        (None, serde_json::Value::Null, Some("beta = 0: coupling vanishes identically, fit skipped"))
    } else {
        let samples: Vec<(f64, f64)> = rows.iter().map(|r| (r.lambda, r.coupling.abs())).collect();
        (flat_band(&lambdas, &ratios)?, optional_fit(&samples), None)
    };
    let pass = slope.map_or(true, |p| p.abs() <= FLATNESS);
    if let Some(p) = slope {
        eprintln!("coupling ratio log-slope {p:.4}");
    }
    let report = json!({
        "command": "scaling",
        "quantity": "coupling",
        "domain": s.domain.spec(),
        "xi": PointRecord::of(&xi),
        "partner": PointRecord::of(&partner),
        "beta": beta,
        "d": s.cfg.d_defaults,
        "eta": s.cfg.eta,
        "flatness": FLATNESS,
        "lambdas": lambdas,
        "ratios": ratios,
        "slope": slope,
        "fit": fit,
        "notice": notice,
        "pass": pass,
    });
    emit_json(g, &s.out, "scaling_coupling.json", &report)?;
    let bad: Vec<f64> = rows.iter().filter(|r| !r.converged).map(|r| r.lambda).collect();
    if !bad.is_empty() {
        return Err(unconverged("coupling", &bad));
    }
    if !pass {
        return Err(Failure::new(4, format!("coupling ratio not flat: log-slope {:.4}", slope.unwrap_or(f64::NAN))));
    }
    Ok(())
}

#[derive(Serialize)]
struct QRow {
    lambda: f64,
    delta: f64,
    q: f64,
    q1: f64,
    q2: f64,
    q3: f64,
    m1: f64,
    m2: f64,
    m3: f64,
    scale: f64,
    q1_ratio: f64,
    q2_ratio: f64,
    q3_ratio: f64,
    defect: f64,
    err_est: f64,
    converged: bool,
}

/// Candidate limit of `Q1 / (lambda delta^2 |ln delta|)`.
pub const A0_ORACLE: f64 = 4.0 * PI * PI;

fn scaling_q1(g: &GlobalOpts, s: &Setup) -> Result<(), Failure> {
    let (xi, _) = scaling_points(s)?;
    let d = s.cfg.d_defaults[0];
    let rows: Vec<QRow> = s
        .cfg
        .lambda_grid
        .iter()
        .map(|&l| {
            let delta = delta_of(d, l);
            let r = bubble_q(&Bubble::at_point(l, delta, &xi), &s.domain, &s.tol.q);
            QRow {
                lambda: l,
                delta,
                q: r.q,
                q1: r.q1,
                q2: r.q2,
                q3: r.q3,
                m1: r.m1,
                m2: r.m2,
                m3: r.m3,
                scale: r.scale,
                q1_ratio: r.q1 / r.scale,
                q2_ratio: r.q2 / r.scale,
                q3_ratio: r.q3 / r.scale,
                defect: r.defect(),
                err_est: r.err_est,
                converged: r.converged,
            }
        })
        .collect();
    write_csv(&s.out.join("scaling_q1.csv"), &rows)?;
    let q1: Vec<f64> = rows.iter().map(|r| r.q1_ratio).collect();
    let dist: Vec<f64> = q1.iter().map(|r| (r - A0_ORACLE).abs()).collect();
    let monotone = dist.windows(2).all(|w| w[1] < w[0]);
    let n = q1.len();
    let last_two = if n >= 2 { (q1[n - 1] - q1[n - 2]).abs() / q1[n - 1].abs() } else { f64::NAN };
    let decreasing = |v: Vec<f64>| v.windows(2).all(|w| w[1] < w[0]);
    let q2_dec = decreasing(rows.iter().map(|r| r.q2_ratio.abs()).collect());
    let q3_dec = decreasing(rows.iter().map(|r| r.q3_ratio.abs()).collect());
    let pass = n >= 2 && monotone && last_two <= 0.05 && q2_dec && q3_dec;
    eprintln!("Q1 ratios {q1:?}, last-two gap {last_two:.4}");
    let samples: Vec<(f64, f64)> = rows.iter().map(|r| (r.lambda, r.q1)).collect();
    let report = json!({
        "command": "scaling",
        "quantity": "q1",
        "domain": s.domain.spec(),
        "xi": PointRecord::of(&xi),
        "d": d,
        "lambdas": s.cfg.lambda_grid,
        "q1_ratios": q1,
        "a0_oracle": A0_ORACLE,
        "a0_estimate": q1.last(),
        "monotone_toward_oracle": monotone,
        "last_two_gap": last_two,
        "q2_ratio_decreasing": q2_dec,
        "q3_ratio_decreasing": q3_dec,
        "fit": optional_fit(&samples),
        "pass": pass,
    });
    emit_json(g, &s.out, "scaling_q1.json", &report)?;
    let bad: Vec<f64> = rows.iter().filter(|r| !r.converged).map(|r| r.lambda).collect();
    if !bad.is_empty() {
        return Err(unconverged("Q decomposition", &bad));
    }
    if !pass {
        return Err(Failure::new(4, "Q1 ratio not converging monotonically or Q2/Q3 ratios not decreasing"));
    }
    Ok(())
}

#[derive(Serialize)]
struct WRow {
    lambda: f64,
    delta: f64,
    w4: f64,
    err_est: f64,
    scale: f64,
    ratio: f64,
    converged: bool,
}

fn scaling_wnorm(g: &GlobalOpts, s: &Setup) -> Result<(), Failure> {
    let (xi, _) = scaling_points(s)?;
    let d = s.cfg.d_defaults[0];
    let rows: Vec<WRow> = s
        .cfg
        .lambda_grid
        .iter()
        .map(|&l| {
            let delta = delta_of(d, l);
            let r = correction_l4(&Bubble::at_point(l, delta, &xi), &s.domain, &s.tol.general);
            let scale = l * l * delta.powi(4) * l.ln().powi(4);
            WRow {
                lambda: l,
                delta,
                w4: r.value,
                err_est: r.err_est,
                scale,
                ratio: r.value / scale,
                converged: r.converged,
            }
        })
        .collect();
    write_csv(&s.out.join("scaling_wnorm.csv"), &rows)?;
    let lambdas: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let slope = flat_band(&lambdas, &ratios)?;
    // an upper bound: the ratio may decay but must not grow
    let pass = slope.map_or(true, |p| p <= FLATNESS);
    eprintln!("W L4 ratio log-slope {slope:?}");
    let samples: Vec<(f64, f64)> = rows.iter().map(|r| (r.lambda, r.w4)).collect();
    let report = json!({
        "command": "scaling",
        "quantity": "wnorm",
        "domain": s.domain.spec(),
        "xi": PointRecord::of(&xi),
        "d": d,
        "flatness": FLATNESS,
        "lambdas": lambdas,
        "ratios": ratios,
        "slope": slope,
        "fit": optional_fit(&samples),
        "pass": pass,
    });
    emit_json(g, &s.out, "scaling_wnorm.json", &report)?;
    let bad: Vec<f64> = rows.iter().filter(|r| !r.converged).map(|r| r.lambda).collect();
    if !bad.is_empty() {
        return Err(unconverged("W norm", &bad));
    }
    if !pass {
        return Err(Failure::new(4, format!("W L4 ratio grows: log-slope {:.4}", slope.unwrap_or(f64::NAN))));
    }
    Ok(())
}

/// Default split of the stability refit: the geometric middle of the grid.
fn split_of(cfg: &ExperimentConfig) -> f64 {
    cfg.split_lambda.unwrap_or_else(|| {
        let lo = cfg.lambda_grid.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = cfg.lambda_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo * hi).sqrt()
    })
}

fn run_fit(s: &Setup) -> Result<ConstantsFit, Failure> {
    let dirs = s.cfg.directions();
    if dirs.is_empty() {
        return Err(Failure::usage("config lists no boundary points"));
    }
    let pts = points_at(&s.domain, &dirs).map_err(asym)?;
    extract_constants(&s.domain, &pts, &s.cfg.lambda_grid, s.cfg.d_defaults[0], Some(split_of(&s.cfg)), &s.tol.radial).map_err(asym)
}

/// Closed-form candidate for `c0`.
pub const C0_ORACLE: f64 = 4.0 * PI * PI / 3.0;

fn constants_report(s: &Setup, f: &ConstantsFit) -> serde_json::Value {
    json!({
        "command": "fit-constants",
        "domain": s.domain.spec(),
        "c0": f.c0,
        "c1": f.c1,
        "c2": f.c2,
        "diagnostics": {
            "r_squared": f.fit.r_squared,
            "residuals": f.fit.residuals,
            "split_lambda": f.split_lambda,
            "split": f.split,
            "split_drift": f.split_drift(),
            "c0_oracle": C0_ORACLE,
            "c0_rel_err": (f.c0 - C0_ORACLE).abs() / C0_ORACLE,
            "verified": f.verified,
            "flags": f.flags,
        },
        "points": f.points,
    })
}

fn check_fit(f: &ConstantsFit) -> Result<(), Failure> {
    let bad: Vec<f64> = f.rows.iter().filter(|r| !r.converged).map(|r| r.lambda).collect();
    if !bad.is_empty() {
        return Err(unconverged("single energies", &bad));
    }
    if !f.verified {
        return Err(Failure::new(4, format!("expansion verification failed: {}", f.flags.join("; "))));
    }
    Ok(())
}

pub fn fit_constants(g: &GlobalOpts) -> Result<(), Failure> {
    let s = setup(g)?;
    let f = run_fit(&s)?;
    write_csv(&s.out.join("constants.csv"), &f.rows)?;
    eprintln!("c0 {:.8}, c1 {:.6}, c2 {:.6}, R^2 {:.6}", f.c0, f.c1, f.c2, f.fit.r_squared);
    emit_json(g, &s.out, "constants.json", &constants_report(&s, &f))?;
    check_fit(&f)
}

pub fn predict(g: &GlobalOpts) -> Result<(), Failure> {
    let s = setup(g)?;
    let found = find_curvature_maxima(&s.domain, s.cfg.n_seeds).map_err(|e| Failure::usage(e.to_string()))?;
    check_hypothesis(&found).map_err(asym)?;
    let (c1, c2, source) = match s.cfg.constants {
        Some(c) => (c.c1, c.c2, json!("config")),
        None => {
            let f = run_fit(&s)?;
            check_fit(&f)?;
            (f.c1, f.c2, constants_report(&s, &f))
        }
    };
    let lambda = s.cfg.lambda.unwrap_or_else(|| s.cfg.lambda_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let opts = PredictOptions {
        n_seeds: s.cfg.n_seeds,
        cross_check: s.cfg.cross_check,
        ..PredictOptions::default()
    };
    let p = predict_from_maxima(&s.domain, &found, lambda, s.cfg.beta, c1, c2, &opts, &s.tol).map_err(asym)?;
    eprintln!(
        "xi* H = {:?}, d* = {:?}, {} maxima, {} pairs, disagreement {:?}",
        p.h_values, p.d_star, p.n_maxima, p.pair_count, p.disagreement
    );
    let maxima: Vec<PointRecord> = found.maxima.iter().map(|(m, _)| PointRecord::of(m)).collect();
    let report = json!({
        "command": "predict",
        "domain": s.domain.spec(),
        "constants": source,
        "maxima": maxima,
        "prediction": p,
    });
    emit_json(g, &s.out, "predict.json", &report)?;
    if p.consistent == Some(false) {
        return Err(Failure::new(
            4,
            format!("d* formula and direct minimization disagree by {:.3}", p.disagreement.unwrap_or(f64::NAN)),
        ));
    }
    Ok(())
}
