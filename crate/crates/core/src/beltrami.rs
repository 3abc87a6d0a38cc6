//! Random Beltrami coefficients sampled on uniform grids.

use std::collections::{BTreeMap, HashMap};
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::partition::{Partition, RegionId};
use crate::rng::{self, Tag};
use crate::{Error, Result};

/// Largest admissible `|μ|`.
pub const MU_CAP: f64 = 1.0 - 1e-9;

/// Default cap on the number of grid samples.
pub const DEFAULT_SAMPLE_BUDGET: usize = 1 << 24;

/// Uniform `n x n` grid on `[-L, L)^2` with nodes `-L + j h`, `h = 2L/n`.
/// Samples are stored row-major with rows indexed by `y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() || n < 4 {
            return Err(Error::invalid(format!("bad grid: L = {half_width}, n = {n}")));
        }
        Ok(GridSpec { half_width, n })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn coord(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    /// Node at row `i` (y) and column `j` (x).
    pub fn node(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.coord(j), self.coord(i))
    }

    /// Nearest node `(i, j)`, or `None` outside the sampled square.
    pub fn nearest(&self, z: Complex64) -> Option<(usize, usize)> {
        let h = self.spacing();
        let fx = ((z.re + self.half_width) / h).round();
        let fy = ((z.im + self.half_width) / h).round();
        let n = self.n as f64;
        if fx < 0.0 || fy < 0.0 || fx > n - 1.0 || fy > n - 1.0 || fx.is_nan() || fy.is_nan() {
            None
        } else {
            Some((fy as usize, fx as usize))
        }
    }
}

/// One realized coefficient on a region together with its sup bound.
#[derive(Clone)]
pub struct Coefficient {
    pub value: CoefficientFn,
    pub sup: f64,
}

#[derive(Clone)]
pub enum CoefficientFn {
    Constant(Complex64),
    Function(Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>),
}

impl Coefficient {
    pub fn constant(mu: Complex64) -> Self {
        Coefficient { value: CoefficientFn::Constant(mu), sup: mu.norm() }
    }

    pub fn at(&self, z: Complex64) -> Complex64 {
        match &self.value {
            CoefficientFn::Constant(c) => *c,
            CoefficientFn::Function(f) => f(z),
        }
    }
}

/// Law `ν_i` of the coefficient on regions with a given local index.
/// Every draw reports its own sup bound.
pub trait RegionLaw: Send + Sync {
    fn draw(&self, id: RegionId, rng: &mut ChaCha8Rng) -> Coefficient;
    fn description(&self) -> String;
}

/// Deterministic constant coefficient.
#[derive(Clone, Copy, Debug)]
pub struct PointMass(pub Complex64);

impl RegionLaw for PointMass {
    fn draw(&self, _: RegionId, _: &mut ChaCha8Rng) -> Coefficient {
        Coefficient::constant(self.0)
    }
    fn description(&self) -> String {
        format!("point-mass({}, {})", self.0.re, self.0.im)
    }
}

/// Constant coefficient `t · direction`, `t` uniform on `[lo, hi]`.
#[derive(Clone, Copy, Debug)]
pub struct UniformLaw {
    pub lo: f64,
    pub hi: f64,
    pub direction: Complex64,
}

impl RegionLaw for UniformLaw {
    fn draw(&self, _: RegionId, rng: &mut ChaCha8Rng) -> Coefficient {
        let t = self.lo + (self.hi - self.lo) * rng.random::<f64>();
        Coefficient::constant(self.direction * t)
    }
    fn description(&self) -> String {
        format!("uniform[{}, {}]", self.lo, self.hi)
    }
}

/// Constant coefficient `t · direction` with `t` normal, truncated to
/// `[lo, hi]` by rejection.
#[derive(Clone, Copy, Debug)]
pub struct TruncatedNormalLaw {
    pub mean: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
    pub direction: Complex64,
}

impl RegionLaw for TruncatedNormalLaw {
    fn draw(&self, _: RegionId, rng: &mut ChaCha8Rng) -> Coefficient {
        let normal = Normal::new(self.mean, self.sd.max(1e-300)).expect("finite parameters");
        for _ in 0..10_000 {
            let t = normal.sample(rng);
            if (self.lo..=self.hi).contains(&t) {
                return Coefficient::constant(self.direction * t);
            }
        }
        Coefficient::constant(self.direction * self.mean.clamp(self.lo, self.hi))
    }
    fn description(&self) -> String {
        format!("truncated-normal({}, {}; [{}, {}])", self.mean, self.sd, self.lo, self.hi)
    }
}

/// Finite law over constant coefficients.
#[derive(Clone, Debug)]
pub struct DiscreteLaw {
    pub values: Vec<Complex64>,
    pub weights: Vec<f64>,
}

impl DiscreteLaw {
    pub fn uniform(values: Vec<Complex64>) -> Self {
        let w = vec![1.0; values.len()];
        DiscreteLaw { values, weights: w }
    }
}

impl RegionLaw for DiscreteLaw {
    fn draw(&self, _: RegionId, rng: &mut ChaCha8Rng) -> Coefficient {
        let total: f64 = self.weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (v, w) in self.values.iter().zip(&self.weights) {
            if u < *w {
                return Coefficient::constant(*v);
            }
            u -= w;
        }
        Coefficient::constant(*self.values.last().expect("nonempty law"))
    }
    fn description(&self) -> String {
        format!("discrete({} atoms)", self.values.len())
    }
}

/// Coefficient samples on a grid with per-region metadata.
#[derive(Clone, Debug)]
pub struct BeltramiField {
    pub grid: GridSpec,
    values: Vec<Complex64>,
    /// Piece label per node; `μ` may jump only where labels change.
    labels: Option<Vec<u64>>,
    /// Realized sup bound of every region met by the grid.
    pub region_sup: BTreeMap<RegionId, f64>,
    pub seed: u64,
    pub partition_ref: Option<String>,
    pub truncation: Option<f64>,
}

fn label_of<T: Hash>(t: &T) -> u64 {
    let mut h = DefaultHasher::new();
    t.hash(&mut h);
    h.finish()
}

const OUTSIDE_LABEL: u64 = u64::MAX;

fn check_values(values: &[Complex64]) -> Result<()> {
    match values.iter().map(|v| v.norm()).find(|m| !(*m <= MU_CAP)) {
        Some(m) => Err(Error::Degenerate(m)),
        None => Ok(()),
    }
}

impl BeltramiField {
    /// Field from raw samples; rejects `|μ| > 1 - 1e-9`.
    pub fn from_samples(grid: GridSpec, values: Vec<Complex64>, labels: Option<Vec<u64>>, seed: u64) -> Result<Self> {
        if values.len() != grid.len() || labels.as_ref().is_some_and(|l| l.len() != grid.len()) {
            return Err(Error::invalid("sample count does not match the grid"));
        }
        check_values(&values)?;
        Ok(BeltramiField {
            grid,
            values,
            labels,
            region_sup: BTreeMap::new(),
            seed,
            partition_ref: None,
            truncation: None,
        })
    }

    /// Field `f(z)` at every node. `f` also returns the piece label.
    pub fn from_fn<F>(grid: GridSpec, f: F) -> Result<Self>
    where
        F: Fn(Complex64) -> (Complex64, u64) + Sync,
    {
        let n = grid.n;
        let pairs: Vec<(Complex64, u64)> =
            (0..grid.len()).into_par_iter().map(|k| f(grid.node(k / n, k % n))).collect();
        let (values, labels) = pairs.into_iter().unzip();
        Self::from_samples(grid, values, Some(labels), 0)
    }

    pub fn zero(grid: GridSpec) -> Self {
        BeltramiField {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            labels: None,
            region_sup: BTreeMap::new(),
            seed: 0,
            partition_ref: None,
            truncation: None,
        }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[u64]> {
        self.labels.as_deref()
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.grid.n + j]
    }

    /// Nearest-sample value.
    pub fn value_at(&self, z: Complex64) -> Result<Complex64> {
        let (i, j) = self.grid.nearest(z).ok_or(Error::OutsideDomain(z))?;
        Ok(self.at(i, j))
    }

    /// Largest sampled `|μ|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Bound `k` on `|μ|`: the largest recorded region sup, or the sampled
    /// sup when no region metadata is present.
    pub fn k_bound(&self) -> f64 {
        let s = self.sup_norm();
        self.region_sup.values().copied().fold(s, f64::max)
    }

    /// `K = (1 + k) / (1 - k)`.
    pub fn dilatation(&self) -> f64 {
        let k = self.k_bound();
        (1.0 + k) / (1.0 - k)
    }

    /// Nodes whose `collar`-neighborhood lies in a single piece.
    pub fn smooth_mask(&self, collar: usize) -> Vec<bool> {
        let n = self.grid.n;
        let Some(labels) = &self.labels else {
            return vec![true; n * n];
        };
        let c = collar as isize;
        let mut mask = vec![false; n * n];
        mask.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (j, m) in row.iter_mut().enumerate() {
                let l = labels[i * n + j];
                let mut ok = true;
                'outer: for di in -c..=c {
                    for dj in -c..=c {
                        let (ii, jj) = (i as isize + di, j as isize + dj);
                        if ii < 0 || jj < 0 || ii >= n as isize || jj >= n as isize {
                            continue;
                        }
                        if labels[ii as usize * n + jj as usize] != l {
                            ok = false;
                            break 'outer;
                        }
                    }
                }
                *m = ok;
            }
        });
        mask
    }

    /// `μ · χ_{B(0,R)}`.
    pub fn truncate(&self, radius: f64) -> BeltramiField {
        let n = self.grid.n;
        let mut out = self.clone();
        let mut labels = self.labels.clone().unwrap_or_else(|| vec![0; n * n]);
        for i in 0..n {
            for j in 0..n {
                if self.grid.node(i, j).norm() >= radius {
                    out.values[i * n + j] = Complex64::new(0.0, 0.0);
                    labels[i * n + j] = OUTSIDE_LABEL;
                }
            }
        }
        out.labels = Some(labels);
        out.truncation = Some(self.truncation.map_or(radius, |r| r.min(radius)));
        out
    }

    /// `μ_δ(z) = μ(z/δ)`, realized by relabelling the grid: node `δ z`
    /// carries the sample of node `z`.
    pub fn rescale(&self, delta: f64) -> Result<BeltramiField> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::invalid("scale factor must be positive"));
        }
        let mut out = self.clone();
        out.grid = GridSpec::new(self.grid.half_width * delta, self.grid.n)?;
        out.truncation = self.truncation.map(|r| r * delta);
        Ok(out)
    }

    /// `μ_δ` resampled onto another grid by nearest node.
    pub fn rescale_onto(&self, delta: f64, target: GridSpec) -> Result<BeltramiField> {
        if !(delta > 0.0) {
            return Err(Error::invalid("scale factor must be positive"));
        }
        self.resample(target, |z| Ok((z / delta, Complex64::new(1.0, 0.0))))
    }

    fn resample<F>(&self, target: GridSpec, map: F) -> Result<BeltramiField>
    where
        F: Fn(Complex64) -> Result<(Complex64, Complex64)> + Sync,
    {
        let n = target.n;
        let res: Result<Vec<(Complex64, u64)>> = (0..target.len())
            .into_par_iter()
            .map(|k| {
                let (src, factor) = map(target.node(k / n, k % n))?;
                let (i, j) = self.grid.nearest(src).ok_or(Error::OutsideDomain(src))?;
                let l = self.labels.as_ref().map_or(0, |l| l[i * self.grid.n + j]);
                Ok((self.at(i, j) * factor, l))
            })
            .collect();
        let (values, labels): (Vec<_>, Vec<_>) = res?.into_iter().unzip();
        let mut out = BeltramiField::from_samples(target, values, Some(labels), self.seed)?;
        out.region_sup = self.region_sup.clone();
        out.partition_ref = self.partition_ref.clone();
        Ok(out)
    }

    /// Coefficient of `f ∘ g` for conformal `g`:
    /// `μ(g(z)) · conj(g'(z)) / g'(z)`. `g` returns `(g(z), g'(z))`.
    pub fn pullback_conformal<G>(&self, g: G) -> Result<BeltramiField>
    where
        G: Fn(Complex64) -> (Complex64, Complex64) + Sync,
    {
        self.resample(self.grid, |z| {
            let (w, d) = g(z);
            if d.norm() == 0.0 || !d.is_finite() {
                return Err(Error::Numerical(format!("conformal derivative vanishes at {z}")));
            }
            Ok((w, d.conj() / d))
        })
    }
}

/// Options for [`sample_field_with`].
#[derive(Clone, Copy, Debug)]
pub struct SampleOptions {
    pub max_samples: usize,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions { max_samples: DEFAULT_SAMPLE_BUDGET }
    }
}

/// Draw the coefficient of one region; keyed by `(seed, id)`.
pub fn draw_region(law: &dyn RegionLaw, id: RegionId, seed: u64) -> Coefficient {
    let mut r = rng::stream(seed, Tag::Field, id.lattice_cell.0, id.lattice_cell.1, id.local_index as u64);
    law.draw(id, &mut r)
}

pub fn sample_field(partition: &Partition, laws: &[&dyn RegionLaw], grid: GridSpec, seed: u64) -> Result<BeltramiField> {
    sample_field_with(partition, laws, grid, seed, SampleOptions::default())
}

/// Independent draws per region, laws indexed by local index.
pub fn sample_field_with(
    partition: &Partition,
    laws: &[&dyn RegionLaw],
    grid: GridSpec,
    seed: u64,
    opts: SampleOptions,
) -> Result<BeltramiField> {
    if laws.len() < partition.local_count() {
        return Err(Error::MissingLaw(laws.len()));
    }
    if grid.len() > opts.max_samples {
        return Err(Error::GridTooLarge { samples: grid.len(), budget: opts.max_samples });
    }
    let n = grid.n;
    let w = partition.window();
    let (lo, hi) = (grid.coord(0), grid.coord(n - 1));
    if w.x_min > lo || w.y_min > lo || w.x_max < hi || w.y_max < hi {
        return Err(Error::DomainTooSmall("partition window does not cover the grid".into()));
    }
    type Row = (Vec<Complex64>, Vec<u64>, HashMap<RegionId, f64>);
    let rows: Result<Vec<Row>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cache: HashMap<RegionId, Coefficient> = HashMap::new();
            let mut vals = Vec::with_capacity(n);
            let mut labs = Vec::with_capacity(n);
            for j in 0..n {
                let z = grid.node(i, j);
                let id = partition.region_of(z)?;
                let coef = cache.entry(id).or_insert_with(|| draw_region(laws[id.local_index], id, seed));
                if !(coef.sup < 1.0) {
                    return Err(Error::Degenerate(coef.sup));
                }
                let v = coef.at(z);
                if v.norm() > coef.sup + 1e-12 {
                    return Err(Error::Numerical(format!("law exceeded its reported sup at {z}")));
                }
                vals.push(v);
                labs.push(label_of(&id));
            }
            let sups = cache.into_iter().map(|(id, c)| (id, c.sup)).collect();
            Ok((vals, labs, sups))
        })
        .collect();
    let mut values = Vec::with_capacity(n * n);
    let mut labels = Vec::with_capacity(n * n);
    let mut region_sup = BTreeMap::new();
    for (v, l, s) in rows? {
        values.extend(v);
        labels.extend(l);
        region_sup.extend(s);
    }
    let mut f = BeltramiField::from_samples(grid, values, Some(labels), seed)?;
    f.region_sup = region_sup;
    f.partition_ref = Some(format!(
        "{} {}x{} period ({}, {})",
        partition.family(),
        partition.cell_width(),
        partition.cell_height(),
        partition.period_vectors()[0].re,
        partition.period_vectors()[1].im
    ));
    Ok(f)
}

/// Result of [`probabilistic_bound_estimate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEstimate {
    pub k: f64,
    pub dilatation: f64,
}

/// Smallest observed sup `k` such that for every law the fraction of draws
/// with sup `<= k` is at least `1 - ε`.
pub fn probabilistic_bound_estimate(laws: &[&dyn RegionLaw], eps: f64, trials: usize, seed: u64) -> Result<BoundEstimate> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid("ε must lie in (0, 1)"));
    }
    if trials < 100 {
        return Err(Error::invalid("need at least 100 trials"));
    }
    let mut k: f64 = 0.0;
    for (li, law) in laws.iter().enumerate() {
        let mut sups = Vec::with_capacity(trials);
        for t in 0..trials {
            let id = RegionId::new(t as i64, li as i64, li);
            let s = draw_region(*law, id, seed).sup;
            if !(s < 1.0) {
                return Err(Error::Degenerate(s));
            }
            sups.push(s);
        }
        sups.sort_by(f64::total_cmp);
        let need = ((1.0 - eps) * trials as f64 - 1e-9).ceil().max(1.0) as usize;
        k = k.max(sups[need - 1]);
    }
    Ok(BoundEstimate { k, dilatation: (1.0 + k) / (1.0 - k) })
}
