//! Beltrami-equation solver on periodic grids.
//!
//! For a coefficient `μ` on `[-L, L)^2` we iterate `ω ← μ (1 + S ω)`, where
//! `S` is the Beurling transform with multiplier `conj(ξ)/ξ`, and set
//! `w = z + m z̄ + P(ω - m)` with `m` the mean of `ω` and `P` the periodic
//! inverse of `∂_z̄`. Then `w_z̄ = ω` and `w_z = 1 + S ω` hold exactly on the
//! torus. The map is finally composed with the affine map fixing 0 and 1.

use std::hash::{DefaultHasher, Hash, Hasher};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beltrami::BeltramiField;
use crate::fft::Fft2;
use crate::geom::Rect;
use crate::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Fixed-point tolerance: iteration stops once successive iterates
    /// differ by less than `tol (1 - k)` in sup norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Collar (grid cells) excluded around coefficient jumps in the
    /// finite-difference residual.
    pub collar: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iter: 2000, collar: 2 }
    }
}

/// Summary statistics of a residual over a node set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub count: usize,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
}

impl ResidualStats {
    pub fn from_values(mut v: Vec<f64>) -> Self {
        if v.is_empty() {
            return ResidualStats::default();
        }
        v.sort_by(f64::total_cmp);
        let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
        ResidualStats { count: v.len(), median: q(0.5), p90: q(0.9), max: v[v.len() - 1] }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MapMeta {
    pub field_hash: u64,
    pub truncation: Option<f64>,
    pub iterations: usize,
    /// Last fixed-point update `sup |ω_{t+1} - ω_t|`.
    pub spectral_residual: f64,
    /// `|μ_fd - μ|` off the collar, with `μ_fd = w_z̄ / w_z` by central
    /// differences.
    pub fd_residual: ResidualStats,
    pub converged: bool,
    pub history: Vec<(usize, f64)>,
}

/// Grid samples of a plane map on the closed square `[-L, L]^2`, with
/// `(n + 1)^2` nodes, evaluated by bilinear interpolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMap {
    pub half_width: f64,
    pub n: usize,
    values: Vec<Complex64>,
    pub normalized: bool,
    pub meta: MapMeta,
}

fn field_hash(f: &BeltramiField) -> u64 {
    let mut h = DefaultHasher::new();
    f.grid.n.hash(&mut h);
    f.grid.half_width.to_bits().hash(&mut h);
    for v in f.values() {
        v.re.to_bits().hash(&mut h);
        v.im.to_bits().hash(&mut h);
    }
    h.finish()
}

impl DiscreteMap {
    /// Map from node values, `(n + 1)^2` of them, rows indexed by `y`.
    pub fn from_values(half_width: f64, n: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != (n + 1) * (n + 1) || n < 2 || !(half_width > 0.0) {
            return Err(Error::invalid("node count does not match the grid"));
        }
        Ok(DiscreteMap { half_width, n, values, normalized: false, meta: MapMeta::default() })
    }

    /// Samples `f` at the nodes.
    pub fn from_fn<F: Fn(Complex64) -> Complex64 + Sync>(half_width: f64, n: usize, f: F) -> Result<Self> {
        let h = 2.0 * half_width / n as f64;
        let m = n + 1;
        let values = (0..m * m)
            .into_par_iter()
            .map(|k| f(Complex64::new(-half_width + (k % m) as f64 * h, -half_width + (k / m) as f64 * h)))
            .collect();
        Self::from_values(half_width, n, values)
    }

    pub fn identity(half_width: f64, n: usize) -> Self {
        let mut m = Self::from_fn(half_width, n, |z| z).expect("valid grid");
        m.normalized = true;
        m
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn nodes_per_side(&self) -> usize {
        self.n + 1
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn node(&self, i: usize, j: usize) -> Complex64 {
        let h = self.spacing();
        Complex64::new(-self.half_width + j as f64 * h, -self.half_width + i as f64 * h)
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * (self.n + 1) + j]
    }

    pub fn domain(&self) -> Rect {
        Rect::centered_square(self.half_width)
    }

    fn locate(&self, z: Complex64) -> Result<(usize, usize, f64, f64)> {
        let l = self.half_width;
        if !(z.re.abs() <= l && z.im.abs() <= l) {
            return Err(Error::OutsideDomain(z));
        }
        let h = self.spacing();
        let fx = (z.re + l) / h;
        let fy = (z.im + l) / h;
        let j = (fx.floor() as usize).min(self.n - 1);
        let i = (fy.floor() as usize).min(self.n - 1);
        Ok((i, j, fx - j as f64, fy - i as f64))
    }

    /// Bilinear interpolation.
    pub fn evaluate(&self, z: Complex64) -> Result<Complex64> {
        let (i, j, tx, ty) = self.locate(z)?;
        let (a, b, c, d) = (self.at(i, j), self.at(i, j + 1), self.at(i + 1, j), self.at(i + 1, j + 1));
        Ok(a * (1.0 - tx) * (1.0 - ty) + b * tx * (1.0 - ty) + c * (1.0 - tx) * ty + d * tx * ty)
    }

    /// Value and partial derivatives `(w, w_x, w_y)` of the interpolant.
    fn evaluate_with_gradient(&self, z: Complex64) -> Result<(Complex64, Complex64, Complex64)> {
        let (i, j, tx, ty) = self.locate(z)?;
        let (a, b, c, d) = (self.at(i, j), self.at(i, j + 1), self.at(i + 1, j), self.at(i + 1, j + 1));
        let h = self.spacing();
        let w = a * (1.0 - tx) * (1.0 - ty) + b * tx * (1.0 - ty) + c * (1.0 - tx) * ty + d * tx * ty;
        let wx = ((b - a) * (1.0 - ty) + (d - c) * ty) / h;
        let wy = ((c - a) * (1.0 - tx) + (d - b) * tx) / h;
        Ok((w, wx, wy))
    }

    /// Compose with `w -> a w + b`.
    pub fn post_compose_affine(&mut self, a: Complex64, b: Complex64) {
        self.values.iter_mut().for_each(|v| *v = a * *v + b);
    }

    /// Compose with the affine map fixing the images of 0 and 1.
    pub fn normalize(&mut self) -> Result<()> {
        let w0 = self.evaluate(ZERO)?;
        let w1 = self.evaluate(Complex64::new(1.0, 0.0))?;
        let d = w1 - w0;
        if d.norm() == 0.0 {
            return Err(Error::Numerical("map collapses 0 and 1".into()));
        }
        let a = 1.0 / d;
        self.post_compose_affine(a, -w0 * a);
        // Pin the grid values at 0 and 1 when they are nodes.
        for p in [ZERO, Complex64::new(1.0, 0.0)] {
            let (i, j, tx, ty) = self.locate(p)?;
            if tx == 0.0 && ty == 0.0 {
                self.values[i * (self.n + 1) + j] = p;
            }
        }
        self.normalized = true;
        Ok(())
    }

    /// Relabel the domain: the result `v` satisfies `v(z) = w(z / δ)` on
    /// `[-δL, δL]^2`.
    pub fn rescale_domain(&self, delta: f64) -> Result<DiscreteMap> {
        if !(delta > 0.0) {
            return Err(Error::invalid("scale factor must be positive"));
        }
        let mut out = self.clone();
        out.half_width *= delta;
        Ok(out)
    }

    /// Central-difference `(w_z, w_z̄)` at interior node `(i, j)`.
    pub fn fd_derivatives(&self, i: usize, j: usize) -> Option<(Complex64, Complex64)> {
        if i == 0 || j == 0 || i >= self.n || j >= self.n {
            return None;
        }
        let h2 = 2.0 * self.spacing();
        let wx = (self.at(i, j + 1) - self.at(i, j - 1)) / h2;
        let wy = (self.at(i + 1, j) - self.at(i - 1, j)) / h2;
        Some(((wx - I * wy) * 0.5, (wx + I * wy) * 0.5))
    }

    /// Finite-difference Beltrami coefficient `w_z̄ / w_z`.
    pub fn fd_beltrami(&self, i: usize, j: usize) -> Option<Complex64> {
        let (dz, dzb) = self.fd_derivatives(i, j)?;
        Some(dzb / dz)
    }

    /// Fraction of interior nodes with positive discrete Jacobian
    /// `|w_z|^2 - |w_z̄|^2`.
    pub fn positive_jacobian_fraction(&self) -> f64 {
        let n = self.n;
        let pos: usize = (1..n)
            .into_par_iter()
            .map(|i| {
                (1..n)
                    .filter(|&j| {
                        let (a, b) = self.fd_derivatives(i, j).expect("interior");
                        a.norm_sqr() - b.norm_sqr() > 0.0
                    })
                    .count()
            })
            .sum();
        pos as f64 / ((n - 1) * (n - 1)) as f64
    }

    /// Winding number of the image of the domain boundary about `w`.
    pub fn winding_number(&self, w: Complex64) -> i64 {
        let n = self.n;
        let mut loop_pts = Vec::with_capacity(4 * n);
        for j in 0..n {
            loop_pts.push(self.at(0, j));
        }
        for i in 0..n {
            loop_pts.push(self.at(i, n));
        }
        for j in (1..=n).rev() {
            loop_pts.push(self.at(n, j));
        }
        for i in (1..=n).rev() {
            loop_pts.push(self.at(i, 0));
        }
        let mut total = 0.0;
        for k in 0..loop_pts.len() {
            let a = loop_pts[k] - w;
            let b = loop_pts[(k + 1) % loop_pts.len()] - w;
            total += (b / a).arg();
        }
        (total / (2.0 * std::f64::consts::PI)).round() as i64
    }

    /// `z` with `|w(z) - target| <= tol`: damped Newton on the interpolant,
    /// restarted from the best grid node when it stalls.
    pub fn invert_at(&self, target: Complex64, guess: Complex64, tol: f64) -> Result<Complex64> {
        if self.winding_number(target) == 0 {
            return Err(Error::OutsideDomain(target));
        }
        let clamp = |z: Complex64| {
            let l = self.half_width;
            Complex64::new(z.re.clamp(-l, l), z.im.clamp(-l, l))
        };
        let newton = |start: Complex64| -> Option<Complex64> {
            let mut z = clamp(start);
            let mut r = (self.evaluate(z).ok()? - target).norm();
            for _ in 0..100 {
                if r <= tol {
                    return Some(z);
                }
                let (w, wx, wy) = self.evaluate_with_gradient(z).ok()?;
                let f = w - target;
                let det = wx.re * wy.im - wx.im * wy.re;
                if det.abs() < 1e-300 {
                    return None;
                }
                let dx = (wy.im * f.re - wy.re * f.im) / det;
                let dy = (-wx.im * f.re + wx.re * f.im) / det;
                let step = Complex64::new(-dx, -dy);
                let mut t = 1.0;
                loop {
                    let zn = clamp(z + step * t);
                    let rn = (self.evaluate(zn).ok()? - target).norm();
                    if rn < r {
                        z = zn;
                        r = rn;
                        break;
                    }
                    t *= 0.5;
                    if t < 1e-8 {
                        return if r <= tol { Some(z) } else { None };
                    }
                }
            }
            (r <= tol).then_some(z)
        };
        if let Some(z) = newton(guess) {
            return Ok(z);
        }
        let m = self.n + 1;
        let mut order: Vec<usize> = (0..m * m).collect();
        order.sort_by(|&a, &b| (self.values[a] - target).norm().total_cmp(&(self.values[b] - target).norm()));
        for &k in order.iter().take(8) {
            if let Some(z) = newton(self.node(k / m, k % m)) {
                return Ok(z);
            }
        }
        Err(Error::NonConvergence { iterations: 100, last_update: f64::NAN })
    }

    /// `|μ_fd - μ|` at the interior field nodes accepted by `mask`.
    pub fn fd_residual(&self, field: &BeltramiField, mask: &[bool]) -> Result<ResidualStats> {
        if field.grid.n != self.n || (field.grid.half_width - self.half_width).abs() > 1e-12 * self.half_width {
            return Err(Error::invalid("map and field grids differ"));
        }
        let n = self.n;
        let errs: Vec<f64> = (1..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                (1..n).filter_map(move |j| {
                    if !mask[i * n + j] {
                        return None;
                    }
                    let mu = self.fd_beltrami(i, j)?;
                    Some((mu - field.at(i, j)).norm())
                })
            })
            .collect();
        Ok(ResidualStats::from_values(errs))
    }
}

/// Fourier multipliers of `S` and `P` for an `n`-point grid of period `2L`.
struct Multipliers {
    s: Vec<Complex64>,
    p: Vec<Complex64>,
}

fn multipliers(fft: &Fft2, half_width: f64) -> Multipliers {
    let n = fft.len();
    let scale = std::f64::consts::PI / half_width;
    let mut s = vec![ZERO; n * n];
    let mut p = vec![ZERO; n * n];
    for r in 0..n {
        let xi2 = fft.freq(r) as f64 * scale;
        for c in 0..n {
            let xi1 = fft.freq(c) as f64 * scale;
            let xi = Complex64::new(xi1, xi2);
            if xi1 != 0.0 || xi2 != 0.0 {
                s[r * n + c] = xi.conj() / xi;
                p[r * n + c] = 1.0 / (I * 0.5 * xi);
            }
        }
    }
    Multipliers { s, p }
}

fn sup_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Solve for the coefficient as given (periodically extended), without
/// truncation or normalization.
pub fn solve_periodic(field: &BeltramiField, opts: &SolveOptions) -> Result<DiscreteMap> {
    let k = field.sup_norm();
    if !(k < 1.0) {
        return Err(Error::Degenerate(k));
    }
    let grid = field.grid;
    let n = grid.n;
    let fft = Fft2::new(n);
    let mult = multipliers(&fft, grid.half_width);
    let mu = field.values();
    let mut omega: Vec<Complex64> = mu.to_vec();
    let mut buf = vec![ZERO; n * n];
    let threshold = opts.tol * (1.0 - k);
    let mut history = Vec::new();
    let mut last = 0.0;
    let mut iterations = 0;
    let mut converged = k == 0.0;
    while !converged {
        if iterations >= opts.max_iter {
            return Err(Error::NonConvergence { iterations, last_update: last });
        }
        buf.copy_from_slice(&omega);
        fft.forward(&mut buf);
        buf.iter_mut().zip(&mult.s).for_each(|(b, s)| *b *= s);
        fft.inverse(&mut buf);
        buf.par_iter_mut().zip(mu.par_iter()).for_each(|(b, m)| *b = m * (1.0 + *b));
        last = sup_diff(&buf, &omega);
        std::mem::swap(&mut omega, &mut buf);
        iterations += 1;
        history.push((iterations, last));
        converged = last < threshold;
    }
    let mean = omega.iter().sum::<Complex64>() / (n * n) as f64;
    buf.copy_from_slice(&omega);
    fft.forward(&mut buf);
    buf.iter_mut().zip(&mult.p).for_each(|(b, p)| *b *= p);
    fft.inverse(&mut buf);
    let periodic = buf;
    let m = n + 1;
    let h = grid.spacing();
    let l = grid.half_width;
    let values: Vec<Complex64> = (0..m * m)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / m, idx % m);
            let z = Complex64::new(-l + j as f64 * h, -l + i as f64 * h);
            z + mean * z.conj() + periodic[(i % n) * n + (j % n)]
        })
        .collect();
    let mut map = DiscreteMap::from_values(l, n, values)?;
    map.meta = MapMeta {
        field_hash: field_hash(field),
        truncation: field.truncation,
        iterations,
        spectral_residual: last,
        fd_residual: ResidualStats::default(),
        converged: true,
        history,
    };
    Ok(map)
}

/// Solve and normalize; records the finite-difference residual.
pub fn solve_field(field: &BeltramiField, opts: &SolveOptions) -> Result<DiscreteMap> {
    let mut map = solve_periodic(field, opts)?;
    map.normalize()?;
    let mask = field.smooth_mask(opts.collar);
    map.meta.fd_residual = map.fd_residual(field, &mask)?;
    Ok(map)
}

/// Normalized solution for `μ χ_{B(0,R)}`. Requires `L >= 2R`.
pub fn solve_truncated(field: &BeltramiField, radius: f64, opts: &SolveOptions) -> Result<DiscreteMap> {
    if !(radius > 0.0) {
        return Err(Error::invalid("truncation radius must be positive"));
    }
    if field.grid.half_width < 2.0 * radius {
        return Err(Error::DomainTooSmall(format!(
            "half-width {} below twice the truncation radius {radius}",
            field.grid.half_width
        )));
    }
    let k = field.k_bound();
    if !(k < 1.0) {
        return Err(Error::Degenerate(k));
    }
    solve_field(&field.truncate(radius), opts)
}

/// Outcome of [`solve_limit`].
#[derive(Clone, Debug)]
pub struct LimitResult {
    pub map: DiscreteMap,
    pub radius: f64,
    pub converged: bool,
    /// `sup_K |w_{R_i} - w_{R_{i-1}}|` for the rungs visited.
    pub differences: Vec<f64>,
}

/// Walk the radius ladder until consecutive normalized solutions agree on
/// the compact set `K` to within `tol`.
pub fn solve_limit(field: &BeltramiField, ladder: &[f64], compact: Rect, tol: f64, opts: &SolveOptions) -> Result<LimitResult> {
    if ladder.is_empty() || ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("ladder must be nonempty and increasing"));
    }
    let l = field.grid.half_width;
    if !Rect::centered_square(l).contains(compact.center()) || compact.x_min < -l || compact.x_max > l || compact.y_min < -l || compact.y_max > l {
        return Err(Error::DomainTooSmall("compact set exceeds the grid".into()));
    }
    let mut prev: Option<DiscreteMap> = None;
    let mut differences = Vec::new();
    for (idx, &r) in ladder.iter().enumerate() {
        let map = solve_truncated(field, r, opts)?;
        // Once truncation no longer changes the field, later rungs repeat.
        let exhausted = field.truncate(r).values() == field.values();
        if let Some(p) = &prev {
            let d = sup_on(&map, p, &compact);
            differences.push(d);
            if d < tol {
                return Ok(LimitResult { map, radius: r, converged: true, differences });
            }
        }
        if exhausted {
            return Ok(LimitResult { map, radius: r, converged: true, differences });
        }
        if idx + 1 == ladder.len() {
            return Ok(LimitResult { map, radius: r, converged: false, differences });
        }
        prev = Some(map);
    }
    unreachable!()
}

fn sup_on(a: &DiscreteMap, b: &DiscreteMap, k: &Rect) -> f64 {
    let m = a.n + 1;
    (0..m * m)
        .filter(|&idx| k.contains(a.node(idx / m, idx % m)))
        .map(|idx| (a.values[idx] - b.values[idx]).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beltrami::GridSpec;
    use proptest::prelude::*;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    fn radial_field(l: f64, n: usize, r: f64) -> BeltramiField {
        BeltramiField::from_fn(GridSpec::new(l, n).unwrap(), |z| {
            if z.norm() < r && z.norm() > 0.0 {
                (z / z.conj() / 3.0, 1)
            } else {
                (ZERO, 0)
            }
        })
        .unwrap()
    }

    fn exact_radial(z: Complex64, r: f64) -> Complex64 {
        if z.norm() <= r {
            z * z.norm()
        } else {
            z * r
        }
    }

    #[test]
    fn zero_field_gives_identity() {
        let f = BeltramiField::zero(GridSpec::new(4.0, 64).unwrap());
        let m = solve_truncated(&f, 2.0, &SolveOptions::default()).unwrap();
        assert!(m.values().iter().enumerate().all(|(k, v)| (v - m.node(k / 65, k % 65)).norm() < 1e-12));
        assert_eq!(m.evaluate(c(0.25, 0.5)).unwrap(), c(0.25, 0.5));
        assert!(m.normalized);
    }

    #[test]
    fn constant_coefficient_is_affine() {
        // Constant μ on the torus: w = z + μ z̄ exactly.
        let mu = c(0.2, -0.1);
        let f = BeltramiField::from_fn(GridSpec::new(2.0, 32).unwrap(), |_| (mu, 0)).unwrap();
        let m = solve_field(&f, &SolveOptions::default()).unwrap();
        let a = 1.0 / (1.0 + mu);
        for k in 0..33 * 33 {
            let z = m.node(k / 33, k % 33);
            assert!((m.values()[k] - a * (z + mu * z.conj())).norm() < 1e-12);
        }
        assert!(m.meta.fd_residual.max < 1e-12);
    }

    #[test]
    fn radial_map_small_grid() {
        let f = radial_field(8.0, 256, 4.0);
        let opts = SolveOptions { tol: 1e-9, ..Default::default() };
        let m = solve_truncated(&f, 4.0, &opts).unwrap();
        let mut err: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for k in 0..257 * 257 {
            let z = m.node(k / 257, k % 257);
            if z.norm() <= 2.0 {
                err = err.max((m.values()[k] - exact_radial(z, 4.0)).norm());
                scale = scale.max(exact_radial(z, 4.0).norm());
            }
        }
        assert!(err / scale < 3e-2, "relative error {}", err / scale);
        assert_eq!(m.evaluate(ZERO).unwrap(), ZERO);
        assert_eq!(m.evaluate(c(1.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert_eq!(m.positive_jacobian_fraction(), 1.0);
        // geometric convergence at rate about k = 1/3
        let h = &m.meta.history;
        let rate = (h[h.len() - 1].1 / h[h.len() - 4].1).powf(1.0 / 3.0);
        assert!(rate < 0.4, "rate {rate}");
    }

    #[test]
    fn inversion() {
        let id = DiscreteMap::identity(4.0, 16);
        let z = id.invert_at(c(1.0, 1.0), ZERO, 1e-12).unwrap();
        assert!((z - c(1.0, 1.0)).norm() < 1e-12);
        assert!(id.invert_at(c(10.0, 0.0), ZERO, 1e-12).is_err());
        let m = DiscreteMap::from_fn(8.0, 128, |z| exact_radial(z, 4.0)).unwrap();
        let z = m.invert_at(c(4.0, 0.0), c(1.0, 1.0), 1e-10).unwrap();
        assert!((z - c(2.0, 0.0)).norm() < 1e-3, "{z}");
        assert!((m.evaluate(z).unwrap() - c(4.0, 0.0)).norm() <= 1e-10);
    }

    #[test]
    fn interpolation_error_is_second_order() {
        let f = |z: Complex64| z * z.norm();
        let p = c(0.37, -0.81);
        let e1 = (DiscreteMap::from_fn(2.0, 32, f).unwrap().evaluate(p).unwrap() - f(p)).norm();
        let e2 = (DiscreteMap::from_fn(2.0, 64, f).unwrap().evaluate(p).unwrap() - f(p)).norm();
        assert!(e1 / e2 > 3.0, "{e1} {e2}");
    }

    #[test]
    fn limit_of_compact_support() {
        let f = radial_field(16.0, 128, 2.0);
        let k = Rect::centered_square(1.0);
        let r = solve_limit(&f, &[2.0, 4.0, 8.0], k, 1e-6, &SolveOptions::default()).unwrap();
        assert!(r.converged && r.radius == 2.0 && r.differences.is_empty());
        let z = BeltramiField::zero(GridSpec::new(8.0, 32).unwrap());
        let r = solve_limit(&z, &[1.0, 2.0], k, 1e-6, &SolveOptions::default()).unwrap();
        assert!(r.converged && r.radius == 1.0);
    }

    #[test]
    fn preconditions() {
        let f = BeltramiField::zero(GridSpec::new(4.0, 16).unwrap());
        assert!(matches!(solve_truncated(&f, 3.0, &SolveOptions::default()), Err(Error::DomainTooSmall(_))));
        let g = BeltramiField::from_fn(GridSpec::new(4.0, 16).unwrap(), |_| (c(0.999, 0.0), 0)).unwrap();
        let opts = SolveOptions { max_iter: 3, ..Default::default() };
        let bumpy = BeltramiField::from_fn(GridSpec::new(4.0, 16).unwrap(), |z| {
            (if z.re > 0.0 { c(0.9, 0.0) } else { c(-0.9, 0.0) }, (z.re > 0.0) as u64)
        })
        .unwrap();
        assert!(matches!(solve_field(&bumpy, &opts), Err(Error::NonConvergence { .. })));
        assert!(solve_field(&g, &SolveOptions::default()).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn normalization_and_orientation(a in 0.0f64..0.6, b in -0.6f64..0.6, r in 1.0f64..3.0) {
            let grid = GridSpec::new(6.0, 64).unwrap();
            let mu = c(a, b) * (0.8 / c(a, b).norm().max(0.8));
            let f = BeltramiField::from_fn(grid, |z| {
                let inside = z.re.abs() < r && z.im.abs() < r;
                (if inside { mu } else { ZERO }, inside as u64)
            }).unwrap();
            let m = solve_truncated(&f, 3.0, &SolveOptions::default()).unwrap();
            prop_assert!(m.evaluate(ZERO).unwrap().norm() < 1e-13);
            prop_assert!((m.evaluate(c(1.0, 0.0)).unwrap() - 1.0).norm() < 1e-13);
            prop_assert!(m.positive_jacobian_fraction() == 1.0);
            prop_assert!(m.meta.spectral_residual < 1e-10);
        }
    }
}
