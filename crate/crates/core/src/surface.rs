//! Random checkerboard surfaces and their Beltrami fields.
//!
//! Each cell of the plane is mapped conformally onto a hemisphere; its four
//! corners go to the points `e^{i m_i}`. A sample moves the marked point of
//! every lattice vertex labelled `i` to a random `e^{i α}` on the arc `C_i`,
//! and each hemisphere is deformed in its disk chart by the angular map
//! `Φ(u) = |u| e^{i k(arg u)}`, with `k` piecewise linear on eight sectors.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::beltrami::{BeltramiField, GridSpec};
use crate::elliptic::{CellMap, ChartValue};
use crate::geom::Rect;
use crate::partition::{arc_midpoints, unwrap_anchors, vertex_region_id, DEFAULT_ANCHORS};
use crate::rng::{stream, Tag};
use crate::{Error, Result};

const TAU: f64 = 2.0 * PI;

/// Point of the extended real line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Extended {
    Finite(f64),
    Infinity,
}

impl Extended {
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(x) => Some(x),
            Extended::Infinity => None,
        }
    }
}

/// Real coordinate of the boundary point `e^{iθ}`:
/// `t(θ) = -i (e^{iθ} + i)/(e^{iθ} - i)`.
pub fn boundary_coordinate(theta: f64) -> Extended {
    let u = Complex64::from_polar(1.0, theta);
    let i = Complex64::i();
    let den = u - i;
    if den.norm() < 1e-15 {
        return Extended::Infinity;
    }
    Extended::Finite((-i * (u + i) / den).re)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossRatioValue {
    pub value: f64,
}

/// `(a, b; c, d) = (a - c)(b - d) / ((a - d)(b - c))`, with limits at ∞.
pub fn cross_ratio(a: Extended, b: Extended, c: Extended, d: Extended) -> Result<CrossRatioValue> {
    use Extended::*;
    let pts = [a, b, c, d];
    for x in 0..4 {
        for y in x + 1..4 {
            if pts[x] == pts[y] {
                return Err(Error::invalid("cross-ratio of coincident points"));
            }
        }
    }
    let value = match (a, b, c, d) {
        (Finite(a), Finite(b), Finite(c), Finite(d)) => (a - c) * (b - d) / ((a - d) * (b - c)),
        (Infinity, Finite(b), Finite(c), Finite(d)) => (b - d) / (b - c),
        (Finite(a), Infinity, Finite(c), Finite(d)) => (a - c) / (a - d),
        (Finite(a), Finite(b), Infinity, Finite(d)) => (b - d) / (a - d),
        (Finite(a), Finite(b), Finite(c), Infinity) => (a - c) / (b - c),
        _ => unreachable!("at most one point is infinite"),
    };
    Ok(CrossRatioValue { value })
}

/// Law of a marked point on an arc, in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AngleLaw {
    Uniform { lo: f64, hi: f64 },
    PointMass { at: f64 },
}

impl AngleLaw {
    pub fn support(&self) -> (f64, f64) {
        match *self {
            AngleLaw::Uniform { lo, hi } => (lo, hi),
            AngleLaw::PointMass { at } => (at, at),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            AngleLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            AngleLaw::PointMass { at } => at,
        }
    }

    /// Cumulative distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            AngleLaw::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            AngleLaw::PointMass { at } => (x >= at) as u8 as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub anchors: [f64; 4],
    pub laws: [AngleLaw; 4],
    pub cell_width: f64,
}

/// Anchors, arc laws and cell size of a random surface.
#[derive(Clone, Debug)]
pub struct SurfaceModel {
    /// Unwrapped: `θ_1 < θ_2 < θ_3 < θ_4 < θ_1 + 2π`.
    pub anchors: [f64; 4],
    pub midpoints: [f64; 4],
    /// Laws in the unwrapped branch of each arc.
    pub laws: [AngleLaw; 4],
    pub cell_width: f64,
    pub cell_height: f64,
    cell: CellMap,
}

impl SurfaceModel {
    pub fn new(anchors: [f64; 4], laws: [AngleLaw; 4], cell_width: f64) -> Result<Self> {
        let anchors = unwrap_anchors(anchors)?;
        let midpoints = arc_midpoints(&anchors);
        let cell = CellMap::new(cell_width, midpoints)?;
        let mut model =
            SurfaceModel { anchors, midpoints, laws, cell_width, cell_height: cell.b, cell };
        for i in 0..4 {
            let (lo, hi) = laws[i].support();
            let lo = model.to_arc_branch(i, lo);
            let hi = model.to_arc_branch(i, hi);
            let (a, b) = model.arc(i);
            if !(a < lo && lo <= hi && hi < b) {
                return Err(Error::invalid(format!("law {} has mass outside its arc", i + 1)));
            }
            model.laws[i] = match laws[i] {
                AngleLaw::Uniform { .. } => AngleLaw::Uniform { lo, hi },
                AngleLaw::PointMass { .. } => AngleLaw::PointMass { at: lo },
            };
        }
        Ok(model)
    }

    /// Uniform laws on the middle `fraction` of every arc.
    pub fn uniform(anchors: [f64; 4], fraction: f64, cell_width: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::invalid("fraction must lie in (0, 1)"));
        }
        let a = unwrap_anchors(anchors)?;
        let laws = std::array::from_fn(|i| {
            let (lo, hi) = (a[i], if i == 3 { a[0] + TAU } else { a[i + 1] });
            let margin = 0.5 * (1.0 - fraction) * (hi - lo);
            AngleLaw::Uniform { lo: lo + margin, hi: hi - margin }
        });
        Self::new(a, laws, cell_width)
    }

    /// Point masses at the arc midpoints: the undeformed surface.
    pub fn base(anchors: [f64; 4], cell_width: f64) -> Result<Self> {
        let a = unwrap_anchors(anchors)?;
        let m = arc_midpoints(&a);
        Self::new(a, std::array::from_fn(|i| AngleLaw::PointMass { at: m[i] }), cell_width)
    }

    pub fn from_file(f: &ModelFile) -> Result<Self> {
        Self::new(f.anchors, f.laws, f.cell_width)
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile { anchors: self.anchors, laws: self.laws, cell_width: self.cell_width }
    }

    pub fn cell_map(&self) -> &CellMap {
        &self.cell
    }

    /// Endpoints of arc `i` (0-based) in the unwrapped branch.
    pub fn arc(&self, i: usize) -> (f64, f64) {
        (self.anchors[i], if i == 3 { self.anchors[0] + TAU } else { self.anchors[i + 1] })
    }

    fn to_arc_branch(&self, i: usize, x: f64) -> f64 {
        let t0 = self.anchors[i];
        t0 + (x - t0).rem_euclid(TAU)
    }

    /// Arc index and unwrapped angle of a boundary angle.
    pub fn locate_angle(&self, theta: f64) -> (usize, f64) {
        let t = self.anchors[0] + (theta - self.anchors[0]).rem_euclid(TAU);
        let i = (1..4).rev().find(|&i| t >= self.anchors[i]).unwrap_or(0);
        (i, t)
    }

    /// Largest `|μ|` any sample can produce.
    pub fn k_bound(&self) -> f64 {
        (0..4)
            .map(|i| {
                let (lo, hi) = self.laws[i].support();
                let mut alphas = self.midpoints;
                alphas[i] = lo;
                let a = sector_slopes(self, alphas).expect("support inside arc");
                alphas[i] = hi;
                let b = sector_slopes(self, alphas).expect("support inside arc");
                a.iter().chain(&b).map(|&s| slope_dilation(s)).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Lattice vertices `(p, q)` at the corners of cells meeting `window`.
    pub fn vertex_range(&self, window: Rect) -> ((i64, i64), (i64, i64)) {
        let (a, b) = (self.cell_width, self.cell_height);
        (
            ((window.x_min / a).floor() as i64, (window.x_max / a).floor() as i64 + 1),
            ((window.y_min / b).floor() as i64, (window.y_max / b).floor() as i64 + 1),
        )
    }
}

impl Default for SurfaceModel {
    fn default() -> Self {
        SurfaceModel::uniform(DEFAULT_ANCHORS, 0.8, 1.0).expect("default model is valid")
    }
}

fn slope_dilation(s: f64) -> f64 {
    (1.0 - s).abs() / (1.0 + s)
}

/// Evaluator for the doubly periodic base map `℘` and its derivative.
#[derive(Clone, Debug)]
pub struct BaseMap {
    cell: CellMap,
}

pub fn elliptic_base_map(model: &SurfaceModel) -> BaseMap {
    BaseMap { cell: model.cell.clone() }
}

impl BaseMap {
    /// `(℘(z), ℘'(z))`; `None` at poles.
    pub fn eval(&self, z: Complex64) -> (Option<Complex64>, Option<Complex64>) {
        self.cell.wp(z)
    }

    /// `(1/℘(z), (1/℘)'(z))`, for use near poles.
    pub fn eval_inverted(&self, z: Complex64) -> (Option<Complex64>, Option<Complex64>) {
        self.cell.wp_inverted(z)
    }

    pub fn periods(&self) -> (Complex64, Complex64) {
        (Complex64::new(2.0 * self.cell.a, 0.0), Complex64::new(0.0, 2.0 * self.cell.b))
    }

    pub fn chart(&self, z: Complex64) -> ChartValue {
        self.cell.chart(z)
    }
}

/// Marked-point angle of every lattice vertex in a rectangle of vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSample {
    pub p_range: (i64, i64),
    pub q_range: (i64, i64),
    /// Row-major in `q`, unwrapped into the vertex's arc.
    pub alpha: Vec<f64>,
    pub seed: u64,
}

impl SurfaceSample {
    fn width(&self) -> usize {
        (self.p_range.1 - self.p_range.0 + 1) as usize
    }

    pub fn alpha_at(&self, p: i64, q: i64) -> Option<f64> {
        if p < self.p_range.0 || p > self.p_range.1 || q < self.q_range.0 || q > self.q_range.1 {
            return None;
        }
        let k = (q - self.q_range.0) as usize * self.width() + (p - self.p_range.0) as usize;
        Some(self.alpha[k])
    }

    pub fn set_alpha(&mut self, p: i64, q: i64, alpha: f64) -> Result<()> {
        if self.alpha_at(p, q).is_none() {
            return Err(Error::invalid("vertex outside the sample"));
        }
        let k = (q - self.q_range.0) as usize * self.width() + (p - self.p_range.0) as usize;
        self.alpha[k] = alpha;
        Ok(())
    }

    pub fn vertices(&self) -> impl Iterator<Item = (i64, i64, f64)> + '_ {
        let w = self.width();
        self.alpha.iter().enumerate().map(move |(k, &a)| {
            (self.p_range.0 + (k % w) as i64, self.q_range.0 + (k / w) as i64, a)
        })
    }

    /// Delimited table `p,q,label,alpha`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["p", "q", "label", "alpha_rad"])?;
        for (p, q, a) in self.vertices() {
            w.write_record([p.to_string(), q.to_string(), CellMap::vertex_label(p, q).to_string(), format!("{a:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Independent draws `α_v ~ η_{label(v)}` for the vertices of cells meeting
/// `window`, keyed by `(seed, v)`.
pub fn sample_surface(model: &SurfaceModel, window: Rect, seed: u64) -> Result<SurfaceSample> {
    let ((p0, p1), (q0, q1)) = model.vertex_range(window);
    let count = ((p1 - p0 + 1) * (q1 - q0 + 1)) as usize;
    if count > 1 << 26 {
        return Err(Error::GridTooLarge { samples: count, budget: 1 << 26 });
    }
    let mut alpha = Vec::with_capacity(count);
    for q in q0..=q1 {
        for p in p0..=p1 {
            let i = CellMap::vertex_label(p, q) - 1;
            let mut rng = stream(seed, Tag::Surface, p, q, 0);
            let a = model.laws[i].draw(&mut rng);
            let (lo, hi) = model.arc(i);
            if !(lo < a && a < hi) {
                return Err(Error::invalid(format!("law {} has mass outside its arc", i + 1)));
            }
            alpha.push(a);
        }
    }
    Ok(SurfaceSample { p_range: (p0, p1), q_range: (q0, q1), alpha, seed })
}

/// Slopes of the angular map on the eight sectors, in the order
/// `[θ_1, m_1], [m_1, θ_2], [θ_2, m_2], ...`.
pub fn sector_slopes(model: &SurfaceModel, alphas: [f64; 4]) -> Result<[f64; 8]> {
    let mut s = [0.0; 8];
    for i in 0..4 {
        let (lo, hi) = model.arc(i);
        let a = model.to_arc_branch(i, alphas[i]);
        if !(lo < a && a < hi) {
            return Err(Error::invalid(format!("alpha {} outside arc {}", alphas[i], i + 1)));
        }
        let m = model.midpoints[i];
        s[2 * i] = (a - lo) / (m - lo);
        s[2 * i + 1] = (hi - a) / (hi - m);
    }
    Ok(s)
}

/// Beltrami coefficient of `Φ(u) = |u| e^{i k(arg u)}` on a sector where
/// `k` has slope `s`: `e^{2i arg u} (1 - s)/(1 + s)`.
pub fn sector_beltrami(s: f64, u: Complex64) -> Result<Complex64> {
    if !(s > 0.0) {
        return Err(Error::invalid("sector slope must be positive"));
    }
    if u.norm() == 0.0 {
        return Err(Error::invalid("argument undefined at the origin"));
    }
    Ok(Complex64::from_polar((1.0 - s) / (1.0 + s), 2.0 * u.arg()))
}

/// Angular map `k` of one hemisphere: fixes the anchors, sends `m_i` to
/// `α_i`, linear in between.
pub fn deform_angle(model: &SurfaceModel, alphas: [f64; 4], theta: f64) -> Result<f64> {
    let s = sector_slopes(model, alphas)?;
    let (i, t) = model.locate_angle(theta);
    let (lo, _) = model.arc(i);
    let m = model.midpoints[i];
    let a = model.to_arc_branch(i, alphas[i]);
    Ok(if t <= m { lo + s[2 * i] * (t - lo) } else { a + s[2 * i + 1] * (t - m) })
}

/// Local state of the deformed surface at a plane point.
#[derive(Clone, Copy, Debug)]
pub struct SurfacePoint {
    pub cell: (i64, i64),
    /// Sector index `0..8`, as in [`sector_slopes`].
    pub sector: usize,
    /// Lattice vertex whose marked point governs the sector.
    pub vertex: (i64, i64),
    pub slope: f64,
    pub chart: ChartValue,
}

impl SurfaceModel {
    fn chart_robust(&self, z: Complex64, ci: i64, cj: i64) -> ChartValue {
        let upper = CellMap::is_upper(ci, cj);
        let ok = |c: &ChartValue| c.u.is_finite() && c.d.is_finite() && c.d.norm() > 1e-12 && c.u.norm() > 1e-12;
        let cv = self.cell.chart_in_cell(z, upper);
        if ok(&cv) {
            return cv;
        }
        let center = Complex64::new((ci as f64 + 0.5) * self.cell_width, (cj as f64 + 0.5) * self.cell_height);
        let eps = 1e-7 * self.cell_width;
        let toward = (center - z) / (center - z).norm().max(1e-300);
        for dir in [toward, Complex64::new(0.6, 0.8) * toward, Complex64::new(0.6, -0.8) * toward] {
            let cv = self.cell.chart_in_cell(z + dir * eps, upper);
            if ok(&cv) {
                return cv;
            }
        }
        cv
    }

    /// Cell, sector, governing vertex and slope at `z`.
    pub fn locate(&self, sample: &SurfaceSample, z: Complex64) -> Result<SurfacePoint> {
        let (ci, cj) = self.cell.cell_of(z);
        let chart = self.chart_robust(z, ci, cj);
        let (i, t) = self.locate_angle(chart.u.arg());
        let half = (t > self.midpoints[i]) as usize;
        let vertex = [(0, 0), (1, 0), (0, 1), (1, 1)]
            .into_iter()
            .map(|(dp, dq)| (ci + dp, cj + dq))
            .find(|&(p, q)| CellMap::vertex_label(p, q) == i + 1)
            .expect("every cell has one corner of each label");
        let alpha = sample
            .alpha_at(vertex.0, vertex.1)
            .ok_or_else(|| Error::DomainTooSmall(format!("sample lacks vertex {vertex:?}")))?;
        let (lo, hi) = self.arc(i);
        let m = self.midpoints[i];
        let slope = if half == 0 { (alpha - lo) / (m - lo) } else { (hi - alpha) / (hi - m) };
        Ok(SurfacePoint { cell: (ci, cj), sector: 2 * i + half, vertex, slope, chart })
    }

    /// Beltrami coefficient of the deformed surface map at `z`.
    pub fn beltrami_at(&self, sample: &SurfaceSample, z: Complex64) -> Result<(Complex64, SurfacePoint)> {
        let pt = self.locate(sample, z)?;
        let c = pt.chart;
        let mu_phi = sector_beltrami(pt.slope, c.u)?;
        let mu_phi = if c.upper { mu_phi } else { mu_phi.conj() };
        Ok((mu_phi * c.d.conj() / c.d, pt))
    }

    /// Deformed surface map in the target hemisphere's disk chart.
    pub fn composite_chart(&self, sample: &SurfaceSample, z: Complex64) -> Result<Complex64> {
        let pt = self.locate(sample, z)?;
        let u = pt.chart.u;
        let p = self.cell.cell_of(z);
        let alphas: [f64; 4] = std::array::from_fn(|i| {
            let v = [(0, 0), (1, 0), (0, 1), (1, 1)]
                .into_iter()
                .map(|(dp, dq)| (p.0 + dp, p.1 + dq))
                .find(|&(a, b)| CellMap::vertex_label(a, b) == i + 1)
                .expect("corner");
            sample.alpha_at(v.0, v.1).unwrap_or(self.midpoints[i])
        });
        let w = Complex64::from_polar(u.norm(), deform_angle(self, alphas, u.arg())?);
        Ok(if pt.chart.upper { w } else { w.conj() })
    }

    /// Density of the pulled-back spherical area (total sphere area 1).
    pub fn area_density(&self, sample: &SurfaceSample, z: Complex64) -> Result<f64> {
        let pt = self.locate(sample, z)?;
        let u2 = pt.chart.u.norm_sqr();
        let d = pt.slope * pt.chart.d.norm_sqr() / (PI * (1.0 + u2) * (1.0 + u2));
        Ok(if d.is_finite() { d } else { 0.0 })
    }
}

fn sector_label(cell: (i64, i64), sector: usize) -> u64 {
    let mut h = DefaultHasher::new();
    (cell, sector).hash(&mut h);
    h.finish()
}

/// Beltrami field of the deformed surface map on `grid`.
pub fn surface_beltrami(model: &SurfaceModel, sample: &SurfaceSample, grid: GridSpec) -> Result<BeltramiField> {
    let l = grid.half_width;
    let ((p0, p1), (q0, q1)) = model.vertex_range(Rect::centered_square(l));
    if p0 < sample.p_range.0 || p1 > sample.p_range.1 || q0 < sample.q_range.0 || q1 > sample.q_range.1 {
        return Err(Error::DomainTooSmall("surface sample does not cover the grid".into()));
    }
    let mut field = BeltramiField::from_fn(grid, |z| match model.beltrami_at(sample, z) {
        Ok((mu, pt)) => (mu, sector_label(pt.cell, pt.sector)),
        Err(_) => (Complex64::new(f64::NAN, 0.0), 0),
    })?;
    let mut sup = BTreeMap::new();
    for q in q0..=q1 {
        for p in p0..=p1 {
            let i = CellMap::vertex_label(p, q) - 1;
            let (lo, hi) = model.arc(i);
            let m = model.midpoints[i];
            let a = sample.alpha_at(p, q).expect("covered");
            let k = slope_dilation((a - lo) / (m - lo)).max(slope_dilation((hi - a) / (hi - m)));
            let e = sup.entry(vertex_region_id(p, q)).or_insert(0.0f64);
            *e = e.max(k);
        }
    }
    field.region_sup = sup;
    field.seed = sample.seed;
    field.partition_ref = Some(format!(
        "vertex-sector anchors={:?} cell={}x{}",
        model.anchors, model.cell_width, model.cell_height
    ));
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assume, proptest, ProptestConfig};

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn boundary_coordinates_of_anchors() {
        assert!((boundary_coordinate(0.0).finite().unwrap() - 1.0).abs() < 1e-15);
        assert!((boundary_coordinate(PI).finite().unwrap() + 1.0).abs() < 1e-15);
        assert!(boundary_coordinate(1.5 * PI).finite().unwrap().abs() < 1e-15);
        assert_eq!(boundary_coordinate(0.5 * PI), Extended::Infinity);
        // increasing on (π/2, 5π/2)
        let ts: Vec<f64> = (1..200).map(|k| boundary_coordinate(0.5 * PI + k as f64 * 0.01 * PI).finite().unwrap()).collect();
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        // agrees with the disk chart
        let chart = crate::elliptic::disk_chart();
        for th in [0.3, 1.9, 4.0] {
            let t = boundary_coordinate(th).finite().unwrap();
            let u = chart.apply(c(t, 0.0)).unwrap();
            assert!((u - Complex64::from_polar(1.0, th)).norm() < 1e-12);
        }
    }

    #[test]
    fn cross_ratio_limits() {
        use Extended::*;
        let v = cross_ratio(Finite(2.0), Finite(1.0), Finite(0.0), Infinity).unwrap();
        assert_eq!(v.value, 2.0);
        let v = cross_ratio(Finite(5.5), Finite(1.0), Finite(0.0), Infinity).unwrap();
        assert_eq!(v.value, 5.5);
        assert!(cross_ratio(Finite(1.0), Finite(1.0), Finite(0.0), Infinity).is_err());
        // limit agrees with a large finite value
        let big = cross_ratio(Finite(3.0), Finite(1.0), Finite(-2.0), Finite(1e12)).unwrap();
        let inf = cross_ratio(Finite(3.0), Finite(1.0), Finite(-2.0), Infinity).unwrap();
        assert!((big.value - inf.value).abs() < 1e-9);
    }

    #[test]
    fn base_map_corners_and_symmetries() {
        let model = SurfaceModel::uniform([0.1, 1.2, 3.0, 4.4], 0.8, 1.0).unwrap();
        let wp = elliptic_base_map(&model);
        let (a, b) = (model.cell_width, model.cell_height);
        for p in 0..3i64 {
            for q in 0..3i64 {
                let label = CellMap::vertex_label(p, q);
                let z = c(p as f64 * a, q as f64 * b);
                let expect = boundary_coordinate(model.midpoints[label - 1]);
                match expect {
                    Extended::Finite(t) => {
                        let v = wp.eval(z).0.unwrap();
                        assert!((v - c(t, 0.0)).norm() < 1e-8, "vertex {p},{q}: {v} vs {t}");
                    }
                    Extended::Infinity => assert!(wp.eval_inverted(z).0.unwrap().norm() < 1e-8),
                }
            }
        }
        let (w1, w2) = wp.periods();
        let mut rng = stream(3, Tag::Misc, 0, 0, 0);
        for _ in 0..100 {
            let z = c(rng.random::<f64>() * 3.0, rng.random::<f64>() * 3.0);
            let v = wp.eval(z).0.unwrap();
            for w in [w1, w2, w1 + w2] {
                assert!((wp.eval(z + w).0.unwrap() - v).norm() < 1e-8 * (1.0 + v.norm_sqr()));
            }
            // reflection across the horizontal edge y = 0 and vertical edge x = a
            let r = wp.eval(z.conj()).0.unwrap();
            assert!((r - v.conj()).norm() < 1e-8 * (1.0 + v.norm_sqr()));
            let r = wp.eval(c(2.0 * a - z.re, z.im)).0.unwrap();
            assert!((r - v.conj()).norm() < 1e-8 * (1.0 + v.norm_sqr()));
        }
    }

    #[test]
    fn derivative_by_difference() {
        let wp = elliptic_base_map(&SurfaceModel::default());
        let z = c(0.31, 0.47);
        let h = 1e-6;
        let fd = (wp.eval(z + h).0.unwrap() - wp.eval(z - h).0.unwrap()) / (2.0 * h);
        let d = wp.eval(z).1.unwrap();
        assert!((fd - d).norm() < 1e-6 * d.norm());
    }

    #[test]
    fn slopes() {
        let model = SurfaceModel::default();
        let s = sector_slopes(&model, model.midpoints).unwrap();
        assert!(s.iter().all(|&x| (x - 1.0).abs() < 1e-15));
        let mut al = model.midpoints;
        let (lo, hi) = model.arc(1);
        al[1] = lo + 0.25 * (hi - lo);
        let s = sector_slopes(&model, al).unwrap();
        assert!((s[2] - 0.5).abs() < 1e-12 && (s[3] - 1.5).abs() < 1e-12);
        // width-weighted average of one arc's slopes is 1
        let m = model.midpoints[1];
        assert!(((s[2] * (m - lo) + s[3] * (hi - m)) / (hi - lo) - 1.0).abs() < 1e-12);
        al[1] = hi + 0.1;
        assert!(sector_slopes(&model, al).is_err());
        assert!((model.k_bound() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sector_coefficient() {
        assert_eq!(sector_beltrami(1.0, c(0.3, 0.2)).unwrap().norm(), 0.0);
        for u in [c(0.1, 0.0), c(-0.5, 0.4), c(0.0, -0.9)] {
            assert!((sector_beltrami(3.0, u).unwrap().norm() - 0.5).abs() < 1e-15);
        }
        assert!(sector_beltrami(0.0, c(0.1, 0.0)).is_err());
        // polar-coordinate check against a difference quotient of Φ
        let s = 1.7;
        let phi = |u: Complex64| Complex64::from_polar(u.norm(), s * u.arg());
        let u = c(0.4, 0.3);
        let h = 1e-6;
        let dx = (phi(u + h) - phi(u - h)) / (2.0 * h);
        let dy = (phi(u + c(0.0, h)) - phi(u - c(0.0, h))) / (2.0 * h);
        let mu = (dx + c(0.0, 1.0) * dy) / (dx - c(0.0, 1.0) * dy);
        assert!((mu - sector_beltrami(s, u).unwrap()).norm() < 1e-8);
    }

    #[test]
    fn sampling_is_keyed_and_inside_arcs() {
        let model = SurfaceModel::default();
        let w = Rect::centered_square(5.0);
        let a = sample_surface(&model, w, 11).unwrap();
        assert_eq!(a, sample_surface(&model, w, 11).unwrap());
        assert_ne!(a, sample_surface(&model, w, 12).unwrap());
        // a larger window agrees on shared vertices
        let b = sample_surface(&model, Rect::centered_square(8.0), 11).unwrap();
        for (p, q, x) in a.vertices() {
            assert_eq!(b.alpha_at(p, q), Some(x));
            let (lo, hi) = model.arc(CellMap::vertex_label(p, q) - 1);
            assert!(lo < x && x < hi);
        }
        let base = SurfaceModel::base(DEFAULT_ANCHORS, 1.0).unwrap();
        let s = sample_surface(&base, w, 1).unwrap();
        for (p, q, x) in s.vertices() {
            assert_eq!(x, base.midpoints[CellMap::vertex_label(p, q) - 1]);
        }
    }

    #[test]
    fn empirical_law_matches() {
        let model = SurfaceModel::default();
        let s = sample_surface(&model, Rect::centered_square(99.0), 5).unwrap();
        for label in 1..=4 {
            let mut xs: Vec<f64> =
                s.vertices().filter(|&(p, q, _)| CellMap::vertex_label(p, q) == label).map(|v| v.2).collect();
            assert!(xs.len() >= 10_000 / 4);
            xs.sort_by(f64::total_cmp);
            let n = xs.len() as f64;
            let law = model.laws[label - 1];
            let d = xs
                .iter()
                .enumerate()
                .map(|(k, &x)| {
                    let f = law.cdf(x);
                    (f - k as f64 / n).abs().max((f - (k + 1) as f64 / n).abs())
                })
                .fold(0.0, f64::max);
            assert!(d < 1.63 / n.sqrt(), "label {label}: KS {d}");
        }
    }

    #[test]
    fn base_surface_field_is_zero() {
        let model = SurfaceModel::base(DEFAULT_ANCHORS, 1.0).unwrap();
        let grid = GridSpec::new(3.0, 48).unwrap();
        let s = sample_surface(&model, Rect::centered_square(3.0), 0).unwrap();
        let f = surface_beltrami(&model, &s, grid).unwrap();
        assert_eq!(f.sup_norm(), 0.0);
    }

    #[test]
    fn single_vertex_perturbation() {
        let model = SurfaceModel::default();
        let base = SurfaceModel::base(DEFAULT_ANCHORS, 1.0).unwrap();
        let mut s = sample_surface(&base, Rect::centered_square(4.0), 0).unwrap();
        let (p, q) = (1, 1);
        let i = CellMap::vertex_label(p, q) - 1;
        let (lo, hi) = model.arc(i);
        s.set_alpha(p, q, lo + 0.3 * (hi - lo)).unwrap();
        let mut al = model.midpoints;
        al[i] = lo + 0.3 * (hi - lo);
        let sl = sector_slopes(&model, al).unwrap();
        let grid = GridSpec::new(4.0, 160).unwrap();
        let mut seen = std::collections::BTreeMap::<(i64, i64, usize), (f64, f64)>::new();
        for k in 0..grid.len() {
            let z = grid.node(k / grid.n, k % grid.n);
            let (mu, pt) = model.beltrami_at(&s, z).unwrap();
            if pt.vertex == (p, q) {
                let e = seen.entry((pt.cell.0, pt.cell.1, pt.sector)).or_insert((f64::MAX, 0.0));
                e.0 = e.0.min(mu.norm());
                e.1 = e.1.max(mu.norm());
                assert!((mu.norm() - slope_dilation(sl[pt.sector])).abs() < 1e-6);
            } else {
                assert!(mu.norm() < 1e-12);
            }
        }
        assert_eq!(seen.len(), 8);
        assert!(seen.values().all(|&(a, b)| b - a < 1e-6));
    }

    #[test]
    fn finite_difference_oracle() {
        let model = SurfaceModel::uniform([0.2, 1.3, 3.3, 4.8], 0.8, 1.0).unwrap();
        let s = sample_surface(&model, Rect::centered_square(6.0), 9).unwrap();
        let mut rng = stream(17, Tag::Misc, 0, 0, 0);
        let mut checked = 0;
        while checked < 20 {
            let z = c(rng.random::<f64>() * 8.0 - 4.0, rng.random::<f64>() * 8.0 - 4.0);
            let h = 1e-5;
            let pts = [z + h, z - h, z + c(0.0, h), z - c(0.0, h)];
            let (mu, pt) = model.beltrami_at(&s, z).unwrap();
            // stay inside one triangle
            if pts.iter().any(|&y| {
                let o = model.locate(&s, y).unwrap();
                o.cell != pt.cell || o.sector != pt.sector
            }) || pt.chart.u.norm() < 1e-2
            {
                continue;
            }
            let f = |y| model.composite_chart(&s, y).unwrap();
            let dx = (f(pts[0]) - f(pts[1])) / (2.0 * h);
            let dy = (f(pts[2]) - f(pts[3])) / (2.0 * h);
            let fd = (dx + c(0.0, 1.0) * dy) / (dx - c(0.0, 1.0) * dy);
            assert!((fd - mu).norm() < 1e-3, "{z}: {fd} vs {mu}");
            checked += 1;
        }
    }

    #[test]
    fn gluing_traces_agree() {
        // Both hemispheres adjacent to an edge see the same two vertices.
        let model = SurfaceModel::default();
        let s = sample_surface(&model, Rect::centered_square(4.0), 2).unwrap();
        let a = model.cell_width;
        for (cell_a, cell_b, z) in [((0, 0), (1, 0), c(a, 0.4 * model.cell_height)), ((0, 0), (0, -1), c(0.3 * a, 0.0))] {
            let alphas = |cell: (i64, i64)| -> [f64; 4] {
                std::array::from_fn(|i| {
                    let v = [(0, 0), (1, 0), (0, 1), (1, 1)]
                        .into_iter()
                        .map(|(dp, dq)| (cell.0 + dp, cell.1 + dq))
                        .find(|&(p, q)| CellMap::vertex_label(p, q) == i + 1)
                        .unwrap();
                    s.alpha_at(v.0, v.1).unwrap()
                })
            };
            let ua = model.cell.chart_in_cell(z, CellMap::is_upper(cell_a.0, cell_a.1)).u;
            let ub = model.cell.chart_in_cell(z, CellMap::is_upper(cell_b.0, cell_b.1)).u;
            assert!((ua - ub).norm() < 1e-8);
            let ka = deform_angle(&model, alphas(cell_a), ua.arg()).unwrap();
            let kb = deform_angle(&model, alphas(cell_b), ub.arg()).unwrap();
            assert!((ka - kb).abs() < 1e-8);
        }
    }

    #[test]
    fn model_round_trip() {
        let m = SurfaceModel::default();
        let txt = toml::to_string(&m.to_file()).unwrap();
        let back = SurfaceModel::from_file(&toml::from_str(&txt).unwrap()).unwrap();
        assert_eq!(back.laws, m.laws);
        let bad = ModelFile { laws: [AngleLaw::PointMass { at: 0.0 }; 4], ..m.to_file() };
        assert!(SurfaceModel::from_file(&bad).is_err());
    }

    #[test]
    fn base_area_density_integrates_to_half_per_cell() {
        let model = SurfaceModel::base(DEFAULT_ANCHORS, 1.0).unwrap();
        let s = sample_surface(&model, Rect::centered_square(3.0), 0).unwrap();
        let n = 200;
        let h = 1.0 / n as f64;
        let mut tot = 0.0;
        for i in 0..n {
            for j in 0..n {
                tot += model.area_density(&s, c((j as f64 + 0.5) * h, (i as f64 + 0.5) * h)).unwrap() * h * h;
            }
        }
        assert!((tot - 0.5).abs() < 2e-3, "{tot}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn field_is_bounded_by_region_sup(seed in 0u64..1000) {
            let model = SurfaceModel::default();
            let s = sample_surface(&model, Rect::centered_square(2.0), seed).unwrap();
            let f = surface_beltrami(&model, &s, GridSpec::new(2.0, 32).unwrap()).unwrap();
            let kmax = f.region_sup.values().cloned().fold(0.0, f64::max);
            prop_assert!(f.sup_norm() <= kmax + 1e-12);
            prop_assert!(kmax <= model.k_bound() + 1e-12);
        }

        #[test]
        fn cross_ratio_is_mobius_invariant(a in -5.0f64..5.0, b in -5.0f64..5.0, c0 in -5.0f64..5.0, d in -5.0f64..5.0,
                                           m in 0.2f64..3.0, t in -2.0f64..2.0) {
            let pts = [a, b, c0, d];
            prop_assume!((0..4).all(|i| (i + 1..4).all(|j| (pts[i] - pts[j]).abs() > 0.1)));
            prop_assume!(pts.iter().all(|&x| (x + 3.7).abs() > 0.1));
            // real Möbius x -> (m x + t) / (x + 3.7)
            let g = |x: f64| Extended::Finite((m * x + t) / (x + 3.7));
            let f = Extended::Finite;
            let before = cross_ratio(f(a), f(b), f(c0), f(d)).unwrap().value;
            let after = cross_ratio(g(a), g(b), g(c0), g(d)).unwrap().value;
            prop_assert!((before - after).abs() <= 1e-10 * before.abs().max(1.0));
        }
    }
}
