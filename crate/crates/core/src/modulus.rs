//! Moduli of quadrilaterals and annuli, Euclidean or in the conformal
//! structure of a Beltrami coefficient.
//!
//! Conventions are fixed here and nowhere else: a quadrilateral's modulus
//! is the reciprocal extremal length of the family joining its marked
//! sides, which equals the Dirichlet energy of the potential that is 0 and
//! 1 on them. An annulus's modulus is the extremal length of the family
//! joining its boundary components, the reciprocal of the energy.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::beltrami::{BeltramiField, GridSpec};
use crate::fem::{self, GridProblem, Tensor, IDENTITY};
use crate::geom::{Polygon, Rect};
use crate::rng::{stream, Tag};
use crate::{Error, Result};

const CG_TOL: f64 = 1e-10;
const CG_MAX_ITER: usize = 200_000;

/// Which pair of opposite sides the curve family joins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Marking {
    /// Left and right sides; curves run horizontally.
    Vertical,
    /// Bottom and top sides.
    Horizontal,
}

impl Marking {
    pub fn other(self) -> Marking {
        match self {
            Marking::Vertical => Marking::Horizontal,
            Marking::Horizontal => Marking::Vertical,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Marking::Vertical => "vertical",
            Marking::Horizontal => "horizontal",
        }
    }
}

/// Modulus of a `width x height` rectangle.
pub fn modulus_euclidean_rectangle(width: f64, height: f64, marking: Marking) -> f64 {
    match marking {
        Marking::Vertical => height / width,
        Marking::Horizontal => width / height,
    }
}

/// Straight-sided quadrilateral with corners in counterclockwise order;
/// side `k` runs from corner `k` to corner `k + 1`. Vertical marking joins
/// sides 3 and 1, horizontal joins 0 and 2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadrilateral {
    pub corners: [Complex64; 4],
    pub marking: Marking,
}

impl Quadrilateral {
    pub fn new(corners: [Complex64; 4], marking: Marking) -> Result<Self> {
        let q = Quadrilateral { corners, marking };
        let poly = q.polygon();
        if !(poly.signed_area() > 0.0) {
            return Err(Error::invalid("corners must be counterclockwise and nondegenerate"));
        }
        // bilinear parametrisation must stay orientation preserving
        for (s, t) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
            let (_, j) = q.param(s, t);
            if !(j[0][0] * j[1][1] - j[0][1] * j[1][0] > 0.0) {
                return Err(Error::invalid("quadrilateral is not convex"));
            }
        }
        Ok(q)
    }

    pub fn from_rect(r: &Rect, marking: Marking) -> Result<Self> {
        Self::new(r.corners(), marking)
    }

    pub fn polygon(&self) -> Polygon {
        Polygon::new(self.corners.to_vec())
    }

    pub fn with_marking(mut self, marking: Marking) -> Self {
        self.marking = marking;
        self
    }

    fn side_lengths(&self) -> [f64; 4] {
        std::array::from_fn(|k| (self.corners[(k + 1) % 4] - self.corners[k]).norm())
    }

    /// Point and Jacobian `[[x_s, x_t], [y_s, y_t]]` of the bilinear map.
    fn param(&self, s: f64, t: f64) -> (Complex64, [[f64; 2]; 2]) {
        let [c0, c1, c2, c3] = self.corners;
        let z = c0 * (1.0 - s) * (1.0 - t) + c1 * s * (1.0 - t) + c2 * s * t + c3 * (1.0 - s) * t;
        let zs = (c1 - c0) * (1.0 - t) + (c2 - c3) * t;
        let zt = (c3 - c0) * (1.0 - s) + (c2 - c1) * s;
        (z, [[zs.re, zt.re], [zs.im, zt.im]])
    }
}

/// Coefficient tensor of a medium at a point.
pub trait Medium: Sync {
    fn tensor(&self, z: Complex64) -> Tensor;

    /// Region where the medium is defined; `None` for the whole plane.
    fn domain(&self) -> Option<Rect> {
        None
    }
}

/// The Euclidean structure.
#[derive(Clone, Copy, Debug, Default)]
pub struct Euclidean;

impl Medium for Euclidean {
    fn tensor(&self, _z: Complex64) -> Tensor {
        IDENTITY
    }
}

/// Constant tensor.
#[derive(Clone, Copy, Debug)]
pub struct Uniform(pub Tensor);

impl Medium for Uniform {
    fn tensor(&self, _z: Complex64) -> Tensor {
        self.0
    }
}

/// `(1/(1-|μ|²)) [[|1-μ|², -2 Im μ], [-2 Im μ, |1+μ|²]]`: the metric
/// whose energy is the Euclidean energy of the image under a map with
/// coefficient `μ`.
pub fn conductivity_matrix(mu: Complex64) -> Result<Tensor> {
    let m2 = mu.norm_sqr();
    if !(m2 < 1.0) {
        return Err(Error::Degenerate(m2.sqrt()));
    }
    let d = 1.0 - m2;
    Ok([(1.0 - mu).norm_sqr() / d, -2.0 * mu.im / d, (1.0 + mu).norm_sqr() / d])
}

/// Tensor samples on the nodes of a Beltrami grid.
#[derive(Clone, Debug)]
pub struct ConductivityField {
    pub grid: GridSpec,
    values: Vec<Tensor>,
}

impl ConductivityField {
    pub fn values(&self) -> &[Tensor] {
        &self.values
    }
}

impl Medium for ConductivityField {
    /// Nearest-node value; points outside the grid get the identity.
    fn tensor(&self, z: Complex64) -> Tensor {
        match self.grid.nearest(z) {
            Some((i, j)) => self.values[i * self.grid.n + j],
            None => IDENTITY,
        }
    }

    fn domain(&self) -> Option<Rect> {
        Some(Rect::centered_square(self.grid.half_width))
    }
}

pub fn conductivity_from_beltrami(field: &BeltramiField) -> Result<ConductivityField> {
    let values = field.values().iter().map(|&mu| conductivity_matrix(mu)).collect::<Result<Vec<_>>>()?;
    Ok(ConductivityField { grid: field.grid, values })
}

/// A modulus computed at two resolutions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusEstimate {
    /// Value at the finer resolution.
    pub value: f64,
    pub coarse: f64,
    /// Second-order extrapolation from the two.
    pub richardson: f64,
    pub error_estimate: f64,
    /// Cells across the shorter direction at the finer resolution.
    pub resolution: usize,
    pub iterations: usize,
}

impl ModulusEstimate {
    fn from_pair(fine: (f64, usize), coarse: f64, resolution: usize) -> Self {
        let d = (fine.0 - coarse) / 3.0;
        ModulusEstimate {
            value: fine.0,
            coarse,
            richardson: fine.0 + d,
            error_estimate: d.abs(),
            resolution,
            iterations: fine.1,
        }
    }

    fn map(self, f: impl Fn(f64) -> f64) -> Self {
        let (v, c, r) = (f(self.value), f(self.coarse), f(self.richardson));
        ModulusEstimate { value: v, coarse: c, richardson: r, error_estimate: (r - v).abs(), ..self }
    }
}

pub const MIN_RESOLUTION: usize = 32;

fn check_domain(medium: &dyn Medium, r: Rect) -> Result<()> {
    if let Some(d) = medium.domain() {
        let eps = 1e-9 * d.width();
        if r.x_min < d.x_min - eps || r.x_max > d.x_max + eps || r.y_min < d.y_min - eps || r.y_max > d.y_max + eps {
            return Err(Error::DomainTooSmall("region exceeds the conductivity domain".into()));
        }
    }
    Ok(())
}

/// Pull `A(z)` back to parameter space: `|det J| J⁻¹ A J⁻ᵀ`.
fn pullback(a: Tensor, j: [[f64; 2]; 2]) -> Tensor {
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
    let am = [[a[0], a[1]], [a[1], a[2]]];
    let mut out = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            let mut s = 0.0;
            for k in 0..2 {
                for l in 0..2 {
                    s += inv[r][k] * am[k][l] * inv[c][l];
                }
            }
            out[r][c] = s * det.abs();
        }
    }
    [out[0][0], 0.5 * (out[0][1] + out[1][0]), out[1][1]]
}

fn quad_energy(quad: &Quadrilateral, medium: &dyn Medium, ns: usize, nt: usize) -> Result<(f64, usize)> {
    let (hs, ht) = (1.0 / ns as f64, 1.0 / nt as f64);
    let mut p = GridProblem::new(ns, nt, hs, ht, false);
    for ct in 0..nt {
        for cs in 0..ns {
            let (z, j) = quad.param((cs as f64 + 0.5) * hs, (ct as f64 + 0.5) * ht);
            p.tensor[ct * ns + cs] = pullback(medium.tensor(z), j);
        }
    }
    let mut init = vec![0.0; p.node_count()];
    for it in 0..=nt {
        for is in 0..=ns {
            let k = p.node_index(is, it);
            let (s, t) = (is as f64 * hs, it as f64 * ht);
            match quad.marking {
                Marking::Vertical => {
                    init[k] = s;
                    if is == 0 || is == ns {
                        p.dirichlet[k] = Some(s);
                    }
                }
                Marking::Horizontal => {
                    init[k] = t;
                    if it == 0 || it == nt {
                        p.dirichlet[k] = Some(t);
                    }
                }
            }
        }
    }
    let sol = fem::solve(&p, Some(&init), CG_TOL, CG_MAX_ITER)?;
    Ok((sol.energy, sol.iterations))
}

/// Modulus of `quad` in `medium`, with `resolution` cells across the
/// shorter direction (at least 32), checked against half that resolution.
pub fn modulus_discrete(quad: &Quadrilateral, medium: &dyn Medium, resolution: usize) -> Result<ModulusEstimate> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::invalid(format!("resolution must be at least {MIN_RESOLUTION}")));
    }
    check_domain(medium, quad.polygon().bbox())?;
    let sides = quad.side_lengths();
    let (ls, lt) = (0.5 * (sides[0] + sides[2]), 0.5 * (sides[1] + sides[3]));
    let cells = |r: usize| -> (usize, usize) {
        if ls <= lt {
            (r, ((r as f64) * lt / ls).round().max(1.0) as usize)
        } else {
            (((r as f64) * ls / lt).round().max(1.0) as usize, r)
        }
    };
    let (ns, nt) = cells(resolution);
    let fine = quad_energy(quad, medium, ns, nt)?;
    let (cs, ct) = cells(resolution / 2);
    let coarse = quad_energy(quad, medium, cs, ct)?.0;
    Ok(ModulusEstimate::from_pair(fine, coarse, resolution))
}

/// Doubly connected region centred at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Annulus {
    /// `r < |z - c| < R`.
    Round { center: Complex64, inner: f64, outer: f64 },
    /// `n < |z - c|_∞ < N`, the square frame `Q(n, N)`.
    Square { center: Complex64, inner: f64, outer: f64 },
}

impl Annulus {
    pub fn round(inner: f64, outer: f64) -> Self {
        Annulus::Round { center: Complex64::new(0.0, 0.0), inner, outer }
    }

    pub fn square(inner: f64, outer: f64) -> Self {
        Annulus::Square { center: Complex64::new(0.0, 0.0), inner, outer }
    }

    fn radii(&self) -> (Complex64, f64, f64) {
        match *self {
            Annulus::Round { center, inner, outer } | Annulus::Square { center, inner, outer } => (center, inner, outer),
        }
    }

    pub fn bbox(&self) -> Rect {
        let (c, _, r) = self.radii();
        Rect::centered_square(r).translate(c)
    }
}

/// `(1/2π) log(R/r)`.
pub fn modulus_round_annulus(inner: f64, outer: f64) -> f64 {
    (outer / inner).ln() / (2.0 * PI)
}

fn round_energy(center: Complex64, r0: f64, r1: f64, medium: &dyn Medium, nr: usize, na: usize) -> Result<(f64, usize)> {
    let (s0, s1) = (r0.ln(), r1.ln());
    let hs = (s1 - s0) / nr as f64;
    let ht = 2.0 * PI / na as f64;
    // x is the angle (periodic), y the log-radius
    let mut p = GridProblem::new(na, nr, ht, hs, true);
    for cy in 0..nr {
        for cx in 0..na {
            let s = s0 + (cy as f64 + 0.5) * hs;
            let t = (cx as f64 + 0.5) * ht;
            let z = center + Complex64::from_polar(s.exp(), t);
            // z = c + e^{s + it}: conformal with Jacobian e^s R(t), so the
            // pulled-back tensor is R(t)ᵀ A R(t) in (radial, angular) axes.
            let a = medium.tensor(z);
            let (cs, sn) = (t.cos(), t.sin());
            let ar = a[0] * cs * cs + 2.0 * a[1] * cs * sn + a[2] * sn * sn;
            let aa = a[0] * sn * sn - 2.0 * a[1] * cs * sn + a[2] * cs * cs;
            let ra = (a[2] - a[0]) * cs * sn + a[1] * (cs * cs - sn * sn);
            p.tensor[cy * na + cx] = [aa, ra, ar];
        }
    }
    let mut init = vec![0.0; p.node_count()];
    for iy in 0..=nr {
        for ix in 0..na {
            let k = p.node_index(ix, iy);
            init[k] = iy as f64 / nr as f64;
            if iy == 0 || iy == nr {
                p.dirichlet[k] = Some(init[k]);
            }
        }
    }
    let sol = fem::solve(&p, Some(&init), CG_TOL, CG_MAX_ITER)?;
    Ok((sol.energy, sol.iterations))
}

fn frame_energy(center: Complex64, n0: f64, n1: f64, medium: &dyn Medium, cells: usize) -> Result<(f64, usize)> {
    let h = 2.0 * n1 / cells as f64;
    let hole = (n0 / h).round() as i64;
    if ((n0 / h) - hole as f64).abs() > 1e-9 {
        return Err(Error::invalid("inner frame is not aligned with the grid"));
    }
    let half = (cells / 2) as i64;
    let mut p = GridProblem::new(cells, cells, h, h, false);
    let mut active = vec![true; cells * cells];
    for cy in 0..cells {
        for cx in 0..cells {
            let (x, y) = (cx as i64 - half, cy as i64 - half);
            let inside = x >= -hole && x < hole && y >= -hole && y < hole;
            active[cy * cells + cx] = !inside;
            let z = center + Complex64::new((cx as f64 + 0.5) * h - n1, (cy as f64 + 0.5) * h - n1);
            p.tensor[cy * cells + cx] = medium.tensor(z);
        }
    }
    p.active = Some(active);
    let mut init = vec![0.0; p.node_count()];
    for iy in 0..=cells {
        for ix in 0..=cells {
            let k = p.node_index(ix, iy);
            let d = (ix as i64 - half).abs().max((iy as i64 - half).abs());
            init[k] = ((d - hole) as f64 / (half - hole) as f64).max(0.0);
            if d <= hole {
                p.dirichlet[k] = Some(0.0);
            } else if d == half {
                p.dirichlet[k] = Some(1.0);
            }
        }
    }
    let sol = fem::solve(&p, Some(&init), CG_TOL, CG_MAX_ITER)?;
    Ok((sol.energy, sol.iterations))
}

/// Extremal length of the family joining the boundary components.
/// `resolution` is the number of cells across the ring's width.
pub fn modulus_annulus_discrete(annulus: &Annulus, medium: &dyn Medium, resolution: usize) -> Result<ModulusEstimate> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::invalid(format!("resolution must be at least {MIN_RESOLUTION}")));
    }
    let (c, r0, r1) = annulus.radii();
    if !(r0 > 0.0 && r1 > r0) {
        return Err(Error::invalid("annulus radii must satisfy 0 < inner < outer"));
    }
    check_domain(medium, annulus.bbox())?;
    let solve_at = |res: usize| -> Result<(f64, usize)> {
        match annulus {
            Annulus::Round { .. } => {
                // cells of unit aspect in log-polar coordinates
                let width = (r1 / r0).ln();
                let na = ((res as f64) * 2.0 * PI / width).ceil().max(8.0) as usize;
                round_energy(c, r0, r1, medium, res, na)
            }
            Annulus::Square { .. } => {
                let cells_across = (res as f64 * 2.0 * r1 / (r1 - r0)).round() as usize;
                // keep the hole on grid lines
                let step = (2.0 * r1 / gcd_f(2.0 * r1, r0)).round() as usize;
                let cells = cells_across.div_ceil(step).max(1) * step;
                frame_energy(c, r0, r1, medium, cells)
            }
        }
    };
    let fine = solve_at(resolution)?;
    let coarse = solve_at(resolution / 2)?.0;
    Ok(ModulusEstimate::from_pair(fine, coarse, resolution).map(|e| 1.0 / e))
}

/// Greatest common divisor of two lengths, to rounding.
fn gcd_f(a: f64, b: f64) -> f64 {
    let (mut a, mut b) = (a, b);
    while b > 1e-9 * a.max(1.0) {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoughQcEntry {
    pub id: usize,
    pub rect: Rect,
    pub marking: Marking,
    pub euclidean: f64,
    pub intrinsic: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoughQcReport {
    pub side_floor: f64,
    pub entries: Vec<RoughQcEntry>,
    /// `max max(ratio, 1/ratio)` over rectangles and markings.
    pub k_empirical: f64,
}

/// Modulus distortion of the rectangles under the medium's structure.
pub fn rough_qc_report(medium: &dyn Medium, rects: &[Rect], side_floor: f64, resolution: usize) -> Result<RoughQcReport> {
    use rayon::prelude::*;
    if let Some(r) = rects.iter().find(|r| r.width() < side_floor || r.height() < side_floor) {
        return Err(Error::invalid(format!("rectangle {r:?} has a side below the floor {side_floor}")));
    }
    let jobs: Vec<(usize, Marking)> =
        (0..rects.len()).flat_map(|i| [(i, Marking::Vertical), (i, Marking::Horizontal)]).collect();
    let entries = jobs
        .par_iter()
        .map(|&(i, marking)| {
            let r = rects[i];
            let quad = Quadrilateral::from_rect(&r, marking)?;
            let intrinsic = modulus_discrete(&quad, medium, resolution)?.value;
            let euclidean = modulus_euclidean_rectangle(r.width(), r.height(), marking);
            Ok(RoughQcEntry { id: i, rect: r, marking, euclidean, intrinsic, ratio: intrinsic / euclidean })
        })
        .collect::<Result<Vec<_>>>()?;
    let k_empirical = entries.iter().map(|e| e.ratio.max(1.0 / e.ratio)).fold(1.0, f64::max);
    Ok(RoughQcReport { side_floor, entries, k_empirical })
}

/// `count` axis-parallel rectangles inside `B(0, radius)` with sides in
/// `[floor, max_side]`.
pub fn random_rectangles(radius: f64, count: usize, floor: f64, max_side: f64, seed: u64) -> Result<Vec<Rect>> {
    if !(floor > 0.0 && max_side >= floor && 2f64.sqrt() * 0.5 * max_side < radius) {
        return Err(Error::invalid("rectangle sides do not fit the disk"));
    }
    let mut out = Vec::with_capacity(count);
    let mut k = 0u64;
    while out.len() < count {
        let mut rng = stream(seed, Tag::Misc, k as i64, 0, 1);
        k += 1;
        let w = floor + (max_side - floor) * rng.random::<f64>();
        let h = floor + (max_side - floor) * rng.random::<f64>();
        let c = Complex64::new(radius * (2.0 * rng.random::<f64>() - 1.0), radius * (2.0 * rng.random::<f64>() - 1.0));
        let r = Rect::new(c.re - 0.5 * w, c.re + 0.5 * w, c.im - 0.5 * h, c.im + 0.5 * h);
        if r.max_distance_to(Complex64::new(0.0, 0.0)) <= radius {
            out.push(r);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingEntry {
    pub level: usize,
    pub inner: f64,
    pub outer: f64,
    pub euclidean: f64,
    pub intrinsic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub rings: Vec<RingEntry>,
    pub running_sum: Vec<f64>,
}

/// Moduli of the frames `Q(2^k n0, 2^{k+1} n0)`, `k < depth`, and their
/// running sum.
pub fn annulus_chain_diagnostic(medium: &dyn Medium, n0: f64, depth: usize, resolution: usize) -> Result<ChainReport> {
    use rayon::prelude::*;
    if depth == 0 {
        return Err(Error::invalid("depth must be at least 1"));
    }
    let outer = n0 * 2f64.powi(depth as i32);
    check_domain(medium, Rect::centered_square(outer))?;
    let rings = (0..depth)
        .into_par_iter()
        .map(|k| {
            let (a, b) = (n0 * 2f64.powi(k as i32), n0 * 2f64.powi(k as i32 + 1));
            let ann = Annulus::square(a, b);
            let euclidean = modulus_annulus_discrete(&ann, &Euclidean, resolution)?.value;
            let intrinsic = modulus_annulus_discrete(&ann, medium, resolution)?.value;
            Ok(RingEntry { level: k, inner: a, outer: b, euclidean, intrinsic })
        })
        .collect::<Result<Vec<_>>>()?;
    let running_sum = rings
        .iter()
        .scan(0.0, |s, r| {
            *s += r.intrinsic;
            Some(*s)
        })
        .collect();
    Ok(ChainReport { rings, running_sum })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    fn unit_square(m: Marking) -> Quadrilateral {
        Quadrilateral::from_rect(&Rect::new(0.0, 1.0, 0.0, 1.0), m).unwrap()
    }

    #[test]
    fn euclidean_rectangles() {
        assert_eq!(modulus_euclidean_rectangle(1.0, 1.0, Marking::Vertical), 1.0);
        assert_eq!(modulus_euclidean_rectangle(2.0, 1.0, Marking::Vertical), 0.5);
        let p = modulus_euclidean_rectangle(3.0, 1.7, Marking::Vertical) * modulus_euclidean_rectangle(3.0, 1.7, Marking::Horizontal);
        assert!((p - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unit_square_at_512() {
        let m = modulus_discrete(&unit_square(Marking::Vertical), &Euclidean, 512).unwrap();
        assert!((m.value - 1.0).abs() < 1e-3);
    }

    #[test]
    fn conductivity_formula() {
        let a = conductivity_matrix(c(0.5, 0.0)).unwrap();
        assert!((a[0] - 1.0 / 3.0).abs() < 1e-15 && a[1] == 0.0 && (a[2] - 3.0).abs() < 1e-15);
        assert_eq!(conductivity_matrix(c(0.0, 0.0)).unwrap(), IDENTITY);
        assert!(conductivity_matrix(c(1.0, 0.0)).is_err());
        // equals |det J| J⁻¹ J⁻ᵀ for w = z + μ z̄
        for mu in [c(0.3, -0.4), c(-0.2, 0.7), c(0.1, 0.1)] {
            let j = [[1.0 + mu.re, mu.im], [mu.im, 1.0 - mu.re]];
            let expect = pullback(IDENTITY, j);
            let got = conductivity_matrix(mu).unwrap();
            for k in 0..3 {
                assert!((expect[k] - got[k]).abs() < 1e-12, "{mu}: {expect:?} {got:?}");
            }
            assert!((got[0] * got[2] - got[1] * got[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_image_oracle() {
        for k in 1..10 {
            let k = k as f64 / 10.0;
            let a = conductivity_matrix(c(k, 0.0)).unwrap();
            let m = modulus_discrete(&unit_square(Marking::Vertical), &Uniform(a), 32).unwrap();
            let expect = (1.0 - k) / (1.0 + k);
            assert!((m.value / expect - 1.0).abs() < 0.02, "k = {k}: {}", m.value);
        }
    }

    #[test]
    fn complex_coefficient_matches_parallelogram() {
        // Image of the unit square under w = z + μ z̄ is a parallelogram; its
        // Euclidean modulus equals the intrinsic modulus of the square.
        let mu = c(0.3, 0.25);
        let w = |z: Complex64| z + mu * z.conj();
        let corners = [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0), c(0.0, 1.0)].map(w);
        let par = Quadrilateral::new(corners, Marking::Vertical).unwrap();
        let direct = modulus_discrete(&par, &Euclidean, 64).unwrap();
        let intrinsic = modulus_discrete(&unit_square(Marking::Vertical), &Uniform(conductivity_matrix(mu).unwrap()), 64).unwrap();
        assert!((direct.richardson - intrinsic.richardson).abs() < 1e-3 * direct.value);
    }

    #[test]
    fn round_annulus() {
        let m = modulus_annulus_discrete(&Annulus::round(1.0, (2.0 * PI).exp()), &Euclidean, 32).unwrap();
        assert!((m.value - 1.0).abs() < 0.01);
        let m = modulus_annulus_discrete(&Annulus::round(1.0, 3.0), &Euclidean, 32).unwrap();
        assert!((m.value - modulus_round_annulus(1.0, 3.0)).abs() < 1e-6);
        // a constant coefficient distorts by at most K
        let k = 0.4;
        let mu = Uniform(conductivity_matrix(c(0.0, k)).unwrap());
        let e = modulus_round_annulus(1.0, 4.0);
        let v = modulus_annulus_discrete(&Annulus::round(1.0, 4.0), &mu, 32).unwrap().value;
        let kk = (1.0 + k) / (1.0 - k);
        assert!(v <= kk * e && v >= e / kk && (v - e).abs() > 1e-3);
    }

    #[test]
    fn square_frame_refines_consistently() {
        let a = modulus_annulus_discrete(&Annulus::square(1.0, 2.0), &Euclidean, 32).unwrap();
        let b = modulus_annulus_discrete(&Annulus::square(1.0, 2.0), &Euclidean, 64).unwrap();
        assert!((a.richardson - b.richardson).abs() < 2e-3 * b.value, "{a:?} {b:?}");
        // comparable to the inscribed round annuli
        assert!(b.value > modulus_round_annulus(2f64.sqrt(), 2.0) && b.value < modulus_round_annulus(1.0, 2.0 * 2f64.sqrt()));
        // scale invariance
        let s = modulus_annulus_discrete(&Annulus::square(8.0, 16.0), &Euclidean, 32).unwrap();
        assert!((s.value - a.value).abs() < 1e-9);
    }

    #[test]
    fn chain_of_euclidean_rings() {
        let r = annulus_chain_diagnostic(&Euclidean, 1.0, 3, 32).unwrap();
        for ring in &r.rings {
            assert!((ring.intrinsic - ring.euclidean).abs() < 1e-12);
        }
        let inc: Vec<f64> = r.running_sum.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(inc.iter().all(|d| (d - inc[0]).abs() < 1e-9));
    }

    #[test]
    fn rough_qc_of_constant_field() {
        let grid = GridSpec::new(8.0, 64).unwrap();
        let k = 0.3;
        let field = BeltramiField::from_fn(grid, |_| (c(k, 0.0), 0)).unwrap();
        let cond = conductivity_from_beltrami(&field).unwrap();
        let rects = random_rectangles(6.0, 6, 2.0, 4.0, 3).unwrap();
        let rep = rough_qc_report(&cond, &rects, 2.0, 32).unwrap();
        assert!(rep.k_empirical <= (1.0 + k) / (1.0 - k) + 1e-9);
        assert!(rep.k_empirical > 1.0 + 1e-3);
        assert!(rough_qc_report(&cond, &rects, 5.0, 32).is_err());
        let flat = conductivity_from_beltrami(&BeltramiField::zero(grid)).unwrap();
        assert!((rough_qc_report(&flat, &rects, 2.0, 32).unwrap().k_empirical - 1.0).abs() < 1e-9);
    }

    #[test]
    fn domain_checks() {
        let cond = conductivity_from_beltrami(&BeltramiField::zero(GridSpec::new(2.0, 16).unwrap())).unwrap();
        let q = Quadrilateral::from_rect(&Rect::new(0.0, 3.0, 0.0, 1.0), Marking::Vertical).unwrap();
        assert!(matches!(modulus_discrete(&q, &cond, 32), Err(Error::DomainTooSmall(_))));
        assert!(annulus_chain_diagnostic(&cond, 1.0, 2, 32).is_err());
        assert!(modulus_discrete(&q, &Euclidean, 8).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10))]

        #[test]
        fn reciprocal_duality(dx in -0.3f64..0.3, dy in -0.3f64..0.3, w in 0.6f64..1.5, h in 0.6f64..1.5) {
            let q = Quadrilateral::new([c(0.0, 0.0), c(w, 0.0), c(w + dx, h + dy), c(dx * 0.5, h)], Marking::Vertical).unwrap();
            let a = modulus_discrete(&q, &Euclidean, 64).unwrap();
            let b = modulus_discrete(&q.with_marking(Marking::Horizontal), &Euclidean, 64).unwrap();
            prop_assert!((a.richardson * b.richardson - 1.0).abs() < 2e-3, "{} {}", a.richardson, b.richardson);
        }

        #[test]
        fn zero_field_is_euclidean(x in -3.0f64..1.0, y in -3.0f64..1.0, w in 0.5f64..2.0, h in 0.5f64..2.0) {
            let cond = conductivity_from_beltrami(&BeltramiField::zero(GridSpec::new(4.0, 32).unwrap())).unwrap();
            let r = Rect::new(x, x + w, y, y + h);
            for m in [Marking::Vertical, Marking::Horizontal] {
                let v = modulus_discrete(&Quadrilateral::from_rect(&r, m).unwrap(), &cond, 32).unwrap().value;
                prop_assert!((v - modulus_euclidean_rectangle(w, h, m)).abs() < 1e-3 * v);
            }
        }
    }
}
