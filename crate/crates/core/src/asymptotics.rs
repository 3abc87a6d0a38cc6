//! Large-scale linearity of solved maps and growth of the spherical area.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beltrami::{BeltramiField, GridSpec};
use crate::geom::Rect;
use crate::rng::child_seed;
use crate::solver::{solve_field, solve_truncated, DiscreteMap, SolveOptions};
use crate::surface::{sample_surface, surface_beltrami, SurfaceModel, SurfaceSample};
use crate::{Error, Result};

/// Real-linear map `(x, y) -> matrix · (x, y)`.
pub type Matrix2 = [[f64; 2]; 2];

pub fn apply(m: &Matrix2, z: Complex64) -> Complex64 {
    Complex64::new(m[0][0] * z.re + m[0][1] * z.im, m[1][0] * z.re + m[1][1] * z.im)
}

pub fn det(m: &Matrix2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Matrix of `z -> a z + b z̄`.
pub fn complex_linear(a: Complex64, b: Complex64) -> Matrix2 {
    let (p, q) = (a + b, a - b);
    [[p.re, -q.im], [p.im, q.re]]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearMapEstimate {
    pub matrix: Matrix2,
    /// `sup |w(z) - Â z| / R` over the sample points.
    pub deviation: f64,
    pub radius: f64,
    pub samples: usize,
}

/// `count` points spread evenly over `B(0, r)` (sunflower arrangement).
pub fn disk_samples(r: f64, count: usize) -> Vec<Complex64> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| Complex64::from_polar(r * ((k as f64 + 0.5) / count as f64).sqrt(), k as f64 * golden))
        .collect()
}

/// Least-squares real-linear fit of `map` over `B(0, radius)`.
pub fn estimate_linear_map(map: &DiscreteMap, radius: f64, samples: usize) -> Result<LinearMapEstimate> {
    if samples < 3 || !(radius > 0.0) {
        return Err(Error::invalid("need a positive radius and at least 3 samples"));
    }
    if !map.domain().contains_disk(Complex64::new(0.0, 0.0), radius) {
        return Err(Error::DomainTooSmall(format!("B(0, {radius}) leaves the map domain")));
    }
    let zs = disk_samples(radius, samples);
    let ws = zs.iter().map(|&z| map.evaluate(z)).collect::<Result<Vec<_>>>()?;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    let (mut ux, mut uy, mut vx, mut vy) = (0.0, 0.0, 0.0, 0.0);
    for (z, w) in zs.iter().zip(&ws) {
        sxx += z.re * z.re;
        sxy += z.re * z.im;
        syy += z.im * z.im;
        ux += w.re * z.re;
        uy += w.re * z.im;
        vx += w.im * z.re;
        vy += w.im * z.im;
    }
    let d = sxx * syy - sxy * sxy;
    if !(d > 1e-12 * (sxx * syy).max(1e-300)) {
        return Err(Error::Numerical("degenerate sample set".into()));
    }
    let solve = |bx: f64, by: f64| [(syy * bx - sxy * by) / d, (sxx * by - sxy * bx) / d];
    let matrix = [solve(ux, uy), solve(vx, vy)];
    if !(det(&matrix) > 0.0) {
        return Err(Error::Numerical(format!("fitted map reverses orientation (det {})", det(&matrix))));
    }
    let deviation = zs
        .iter()
        .zip(&ws)
        .map(|(z, w)| (w - apply(&matrix, *z)).norm())
        .fold(0.0, f64::max)
        / radius;
    Ok(LinearMapEstimate { matrix, deviation, radius, samples })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationOptions {
    /// Grid nodes per unit of `R`; the grid covers `[-2R, 2R]^2`.
    pub nodes_per_radius: usize,
    pub samples: usize,
    pub solve: SolveOptions,
}

impl Default for DeviationOptions {
    fn default() -> Self {
        DeviationOptions { nodes_per_radius: 16, samples: 4096, solve: SolveOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub radius: f64,
    pub completed: usize,
    pub failures: Vec<String>,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    pub max: f64,
    /// Ensemble average of the fitted matrices.
    pub mean_matrix: Matrix2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationCurve {
    pub rows: Vec<DeviationRow>,
    /// `(R, trial, estimate)` for completed trials.
    pub trials: Vec<(f64, usize, LinearMapEstimate)>,
}

pub(crate) fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let x = (sorted.len() - 1) as f64 * p;
    let (lo, hi) = (x.floor() as usize, x.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (x - lo as f64)
}

impl DeviationCurve {
    /// Table `R,trials,failures,median,q10,q90,max,a11,a12,a21,a22`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["R", "trials", "failures", "median", "q10", "q90", "max", "a11", "a12", "a21", "a22"])?;
        for r in &self.rows {
            let m = r.mean_matrix;
            let mut rec = vec![format!("{}", r.radius), r.completed.to_string(), r.failures.len().to_string()];
            rec.extend([r.median, r.q10, r.q90, r.max, m[0][0], m[0][1], m[1][0], m[1][1]].iter().map(|v| format!("{v:.9e}")));
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Deviation from linearity along a radius ladder, for fields produced by
/// `make_field(grid, trial_seed)` and truncated at `R`.
pub fn deviation_curve_with<F>(ladder: &[f64], trials: usize, seed: u64, opts: &DeviationOptions, make_field: F) -> Result<DeviationCurve>
where
    F: Fn(GridSpec, u64) -> Result<BeltramiField> + Sync,
{
    if trials < 5 {
        return Err(Error::invalid("at least 5 trials are required"));
    }
    if ladder.is_empty() || ladder.windows(2).any(|w| w[1] <= w[0]) || ladder[0] <= 0.0 {
        return Err(Error::invalid("ladder must be positive and increasing"));
    }
    let mut rows = Vec::new();
    let mut all = Vec::new();
    for &r in ladder {
        let n = (opts.nodes_per_radius as f64 * r).round() as usize;
        let grid = GridSpec::new(2.0 * r, n)?;
        let outcomes: Vec<std::result::Result<LinearMapEstimate, String>> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let run = || -> Result<LinearMapEstimate> {
                    let field = make_field(grid, child_seed(seed, t as u64))?;
                    let map = solve_truncated(&field, r, &opts.solve)?;
                    estimate_linear_map(&map, r, opts.samples)
                };
                run().map_err(|e| format!("trial {t}: {e}"))
            })
            .collect();
        let mut devs = Vec::new();
        let mut mean = [[0.0; 2]; 2];
        let mut failures = Vec::new();
        for (t, o) in outcomes.into_iter().enumerate() {
            match o {
                Ok(est) => {
                    devs.push(est.deviation);
                    for a in 0..2 {
                        for b in 0..2 {
                            mean[a][b] += est.matrix[a][b];
                        }
                    }
                    all.push((r, t, est));
                }
                Err(e) => failures.push(e),
            }
        }
        let k = devs.len().max(1) as f64;
        mean.iter_mut().flatten().for_each(|v| *v /= k);
        devs.sort_by(f64::total_cmp);
        rows.push(DeviationRow {
            radius: r,
            completed: devs.len(),
            failures,
            median: quantile(&devs, 0.5),
            q10: quantile(&devs, 0.1),
            q90: quantile(&devs, 0.9),
            max: devs.last().copied().unwrap_or(f64::NAN),
            mean_matrix: mean,
        });
    }
    Ok(DeviationCurve { rows, trials: all })
}

/// Deviation curve for fresh surface-model fields.
pub fn deviation_curve(model: &SurfaceModel, ladder: &[f64], trials: usize, seed: u64, opts: &DeviationOptions) -> Result<DeviationCurve> {
    deviation_curve_with(ladder, trials, seed, opts, |grid, s| {
        let sample = sample_surface(model, Rect::centered_square(grid.half_width), s)?;
        surface_beltrami(model, &sample, grid)
    })
}

/// Spherical area of `{z : |w(z)| < t}` under the deformed surface map, for
/// each `t` (sphere area normalized to 1).
pub fn spherical_area(model: &SurfaceModel, sample: &SurfaceSample, map: &DiscreteMap, t_values: &[f64]) -> Result<Vec<f64>> {
    let t_max = t_values.iter().copied().fold(0.0, f64::max);
    let m = map.nodes_per_side();
    let vals = map.values();
    let reach = (0..m)
        .flat_map(|k| [(0, k), (m - 1, k), (k, 0), (k, m - 1)])
        .map(|(i, j)| map.at(i, j).norm())
        .fold(f64::INFINITY, f64::min);
    if !(reach > t_max) || map.winding_number(Complex64::new(0.0, 0.0)) != 1 {
        return Err(Error::DomainTooSmall(format!("map image covers B(0, {reach:.3}) only, need {t_max}")));
    }
    let h2 = map.spacing() * map.spacing();
    let mut weighted: Vec<(f64, f64)> = (0..m * m)
        .into_par_iter()
        .filter(|&k| vals[k].norm() < t_max)
        .map(|k| {
            let z = map.node(k / m, k % m);
            model.area_density(sample, z).map(|d| (vals[k].norm(), d * h2))
        })
        .collect::<Result<Vec<_>>>()?;
    weighted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cum = Vec::with_capacity(weighted.len() + 1);
    cum.push(0.0);
    for (_, a) in &weighted {
        cum.push(cum.last().unwrap() + a);
    }
    Ok(t_values
        .iter()
        .map(|&t| cum[weighted.partition_point(|(r, _)| *r < t)])
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Characteristic {
    pub r: Vec<f64>,
    pub t_values: Vec<f64>,
    /// Refinement estimate of the quadrature error per `r`.
    pub error: Vec<f64>,
}

fn log_trapezoid(t: &[f64], a: &[f64], stride: usize) -> Vec<(usize, f64)> {
    let mut out = vec![(0, 0.5 * a[0])];
    let mut acc = 0.5 * a[0];
    let mut k = 0;
    while k + stride < t.len() {
        acc += 0.5 * (a[k] + a[k + stride]) * (t[k + stride] / t[k]).ln();
        k += stride;
        out.push((k, acc));
    }
    out
}

/// `T(r) = A(t_0)/2 + ∫_{t_0}^r A(t)/t dt` by the trapezoid rule in `log t`
/// at every sample `t`. The first term is the exact integral for `A ~ c t²`
/// below the first sample.
pub fn characteristic(t: &[f64], a: &[f64]) -> Result<Characteristic> {
    if t.len() != a.len() || t.is_empty() {
        return Err(Error::invalid("t and A tables must have equal nonzero length"));
    }
    if t[0] <= 0.0 || t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("t samples must be positive and increasing"));
    }
    if a.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("A table is not monotone"));
    }
    let fine = log_trapezoid(t, a, 1);
    let coarse = log_trapezoid(t, a, 2);
    let mut error = vec![0.0; t.len()];
    for (k, c) in coarse {
        error[k] = (fine[k].1 - c).abs() / 3.0;
    }
    // odd points inherit the larger neighbouring estimate
    for k in (1..t.len()).step_by(2) {
        error[k] = error[k - 1].max(error.get(k + 1).copied().unwrap_or(error[k - 1]));
    }
    Ok(Characteristic { r: t.to_vec(), t_values: fine.into_iter().map(|(_, v)| v).collect(), error })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    /// Finite-window proxy for the order.
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    /// RMS residual of the log-log fit.
    pub residual: f64,
    /// Finite-window proxy for the lower order: least two-point slope over
    /// sub-windows spanning a factor of 2 in `r`.
    pub lower_order: f64,
    pub points: usize,
}

pub fn order_fit(r: &[f64], t: &[f64], window: (f64, f64)) -> Result<OrderFit> {
    let pts: Vec<(f64, f64)> = r
        .iter()
        .zip(t)
        .filter(|(r, v)| **r >= window.0 && **r <= window.1 && **v > 0.0)
        .map(|(r, v)| (r.ln(), v.ln()))
        .collect();
    if pts.len() < 6 {
        return Err(Error::invalid(format!("{} points in the fit window, need 6", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    let span = 2f64.ln().min(pts[pts.len() - 1].0 - pts[0].0);
    let mut lower = f64::INFINITY;
    for (i, p) in pts.iter().enumerate() {
        if let Some(q) = pts[i + 1..].iter().find(|q| q.0 - p.0 >= span - 1e-12) {
            lower = lower.min((q.1 - p.1) / (q.0 - p.0));
        }
    }
    Ok(OrderFit { slope, intercept, window, residual, lower_order: lower, points: pts.len() })
}

/// True when `T` is convex as a function of `log r` up to `tol` per point.
pub fn convex_in_log(r: &[f64], t: &[f64], tol: &[f64]) -> bool {
    (1..r.len().saturating_sub(1)).all(|k| {
        let (x0, x1, x2) = (r[k - 1].ln(), r[k].ln(), r[k + 1].ln());
        let chord = t[k - 1] + (t[k + 1] - t[k - 1]) * (x1 - x0) / (x2 - x0);
        t[k] <= chord + tol[k] + 1e-12 * t[k].abs()
    })
}

/// `n` log-spaced points from `a` to `b`.
pub fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a * (b / a).powf(k as f64 / (n - 1).max(1) as f64)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicCurve {
    pub seed: u64,
    pub t_samples: Vec<f64>,
    pub a_values: Vec<f64>,
    pub characteristic: Characteristic,
    pub fit: OrderFit,
    pub iterations: usize,
}

impl CharacteristicCurve {
    /// Table `t,A,T,T_err`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "A", "T", "T_err"])?;
        for k in 0..self.t_samples.len() {
            w.write_record([
                format!("{:.9e}", self.t_samples[k]),
                format!("{:.9e}", self.a_values[k]),
                format!("{:.9e}", self.characteristic.t_values[k]),
                format!("{:.3e}", self.characteristic.error[k]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Full pipeline for one surface sample: field on `grid`, normalized
/// solution, spherical area at `t_samples`, characteristic and fit over
/// `window`.
pub fn surface_order(
    model: &SurfaceModel,
    seed: u64,
    grid: GridSpec,
    t_samples: &[f64],
    window: (f64, f64),
    opts: &SolveOptions,
) -> Result<CharacteristicCurve> {
    let sample = sample_surface(model, Rect::centered_square(grid.half_width), seed)?;
    let field = surface_beltrami(model, &sample, grid)?;
    let map = solve_field(&field, opts)?;
    let a_values = spherical_area(model, &sample, &map, t_samples)?;
    let characteristic = characteristic(t_samples, &a_values)?;
    let fit = order_fit(&characteristic.r, &characteristic.t_values, window)?;
    Ok(CharacteristicCurve { seed, t_samples: t_samples.to_vec(), a_values, characteristic, fit, iterations: map.meta.iterations })
}
