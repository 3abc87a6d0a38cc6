//! Blue/yellow colorings of a partition and chemical distance.
//!
//! The chemical length of a curve is the length of its blue part. Two
//! evaluators are provided: a lattice Dijkstra for arbitrary colorings of
//! the plane, and an exact graph on yellow clusters used by the ratio
//! experiment.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::{Polygon, Rect};
use crate::partition::{Partition, RegionId};
use crate::rng::{stream, uniform, Tag};
use crate::{Error, Result};

/// Anything that colors points of the plane.
pub trait ColorField: Sync {
    fn is_yellow_at(&self, z: Complex64) -> bool;
}

impl<F: Fn(Complex64) -> bool + Sync> ColorField for F {
    fn is_yellow_at(&self, z: Complex64) -> bool {
        self(z)
    }
}

/// Independent Bernoulli coloring of the regions of a partition.
#[derive(Clone, Debug)]
pub struct Coloring<'a> {
    partition: &'a Partition,
    yellow: BTreeSet<RegionId>,
    pub r: f64,
    pub seed: u64,
}

/// Color every region of `partition`: region `id` is yellow with
/// probability `yellow_prob[id.local_index]`, each at most `r`.
pub fn color<'a>(partition: &'a Partition, yellow_prob: &[f64], r: f64, seed: u64) -> Result<Coloring<'a>> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::invalid("percolation parameter must lie in [0, 1]"));
    }
    if yellow_prob.len() != partition.local_count() {
        return Err(Error::invalid("one probability per local index is required"));
    }
    if let Some(p) = yellow_prob.iter().find(|&&p| !(0.0..=r).contains(&p)) {
        return Err(Error::invalid(format!("yellow probability {p} exceeds r = {r}")));
    }
    let yellow = partition
        .regions()
        .iter()
        .filter(|id| {
            let u = uniform(seed, Tag::Coloring, id.lattice_cell.0, id.lattice_cell.1, id.local_index as u64);
            u < yellow_prob[id.local_index]
        })
        .copied()
        .collect();
    Ok(Coloring { partition, yellow, r, seed })
}

impl<'a> Coloring<'a> {
    pub fn partition(&self) -> &'a Partition {
        self.partition
    }

    pub fn is_yellow(&self, id: RegionId) -> bool {
        self.yellow.contains(&id)
    }

    pub fn yellow_regions(&self) -> impl Iterator<Item = RegionId> + '_ {
        self.yellow.iter().copied()
    }

    pub fn yellow_fraction(&self) -> f64 {
        self.yellow.len() as f64 / self.partition.len().max(1) as f64
    }

    /// Copy with additional yellow regions.
    pub fn with_yellow(&self, extra: &[RegionId]) -> Coloring<'a> {
        let mut c = self.clone();
        c.yellow.extend(extra.iter().copied().filter(|id| self.partition.contains_region(*id)));
        c
    }
}

impl ColorField for Coloring<'_> {
    /// Points outside the window count as blue.
    fn is_yellow_at(&self, z: Complex64) -> bool {
        self.partition.region_of(z).map(|id| self.is_yellow(id)).unwrap_or(false)
    }
}

/// Stencil of primitive steps `(a, b)` with `|a|, |b| <= 4`.
fn stencil() -> Vec<(i64, i64)> {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    let mut s = Vec::new();
    for a in -4i64..=4 {
        for b in -4i64..=4 {
            if (a, b) != (0, 0) && gcd(a, b) == 1 {
                s.push((a, b));
            }
        }
    }
    s
}

/// Worst-case relative overestimate of Euclidean length by the stencil
/// metric.
pub fn stencil_distortion() -> f64 {
    let mut angles: Vec<f64> = stencil().iter().map(|&(a, b)| (b as f64).atan2(a as f64)).collect();
    angles.sort_by(f64::total_cmp);
    let gap = angles
        .windows(2)
        .map(|w| w[1] - w[0])
        .chain(std::iter::once(angles[0] + 2.0 * std::f64::consts::PI - angles[angles.len() - 1]))
        .fold(0.0, f64::max);
    1.0 / (0.5 * gap).cos() - 1.0
}

pub const MIN_RESOLUTION: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChemicalDistance {
    pub value: f64,
    /// Bound on the discretisation error of `value` relative to the
    /// continuum quantity on the same window.
    pub slack: f64,
}

/// Lattice graph over a window; edges cost their blue length.
pub struct ChemicalLattice {
    origin: Complex64,
    h: f64,
    nx: usize,
    ny: usize,
    /// Colors on the twice finer raster.
    fine: Vec<bool>,
    steps: Vec<(i64, i64)>,
}

impl ChemicalLattice {
    /// `resolution` lattice nodes per `mesh` length, at least 8.
    pub fn new(field: &dyn ColorField, window: Rect, mesh: f64, resolution: f64) -> Result<Self> {
        if !(resolution >= MIN_RESOLUTION) {
            return Err(Error::invalid(format!("resolution {resolution} below {MIN_RESOLUTION} nodes per mesh")));
        }
        if !(mesh > 0.0) || !window.is_nonempty() {
            return Err(Error::invalid("mesh and window must be nondegenerate"));
        }
        let h = mesh / resolution;
        let nx = (window.width() / h).ceil() as usize + 1;
        let ny = (window.height() / h).ceil() as usize + 1;
        if nx * ny > 1 << 24 {
            return Err(Error::GridTooLarge { samples: nx * ny, budget: 1 << 24 });
        }
        let origin = Complex64::new(window.x_min, window.y_min);
        let (fx, fy) = (2 * nx - 1, 2 * ny - 1);
        let fine = (0..fx * fy)
            .into_par_iter()
            .map(|k| field.is_yellow_at(origin + Complex64::new((k % fx) as f64 * 0.5 * h, (k / fx) as f64 * 0.5 * h)))
            .collect();
        Ok(ChemicalLattice { origin, h, nx, ny, fine, steps: stencil() })
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    fn snap(&self, z: Complex64) -> Result<(usize, usize)> {
        let fx = ((z.re - self.origin.re) / self.h).round();
        let fy = ((z.im - self.origin.im) / self.h).round();
        if fx < 0.0 || fy < 0.0 || fx as usize >= self.nx || fy as usize >= self.ny {
            return Err(Error::OutsideDomain(z));
        }
        Ok((fx as usize, fy as usize))
    }

    fn edge_weight(&self, x: usize, y: usize, (a, b): (i64, i64)) -> f64 {
        let m = 2 * a.abs().max(b.abs());
        let fx = (2 * self.nx - 1) as i64;
        let mut blue = 0;
        for k in 0..m {
            // sample at the midpoints of the m pieces, on the fine raster
            let t = (2 * k + 1) as f64 / (2 * m) as f64;
            let px = (2.0 * (x as f64 + t * a as f64)).round() as i64;
            let py = (2.0 * (y as f64 + t * b as f64)).round() as i64;
            if !self.fine[(py * fx + px) as usize] {
                blue += 1;
            }
        }
        self.h * ((a * a + b * b) as f64).sqrt() * blue as f64 / m as f64
    }

    /// Shortest blue length between the lattice nodes nearest `x` and `y`.
    pub fn distance(&self, x: Complex64, y: Complex64) -> Result<ChemicalDistance> {
        let s = self.snap(x)?;
        let t = self.snap(y)?;
        let idx = |p: (usize, usize)| p.1 * self.nx + p.0;
        let mut dist = vec![f64::INFINITY; self.nx * self.ny];
        let mut heap = BinaryHeap::new();
        dist[idx(s)] = 0.0;
        heap.push(State(0.0, idx(s)));
        let target = idx(t);
        while let Some(State(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            if u == target {
                break;
            }
            let (ux, uy) = ((u % self.nx) as i64, (u / self.nx) as i64);
            for &(a, b) in &self.steps {
                let (vx, vy) = (ux + a, uy + b);
                if vx < 0 || vy < 0 || vx >= self.nx as i64 || vy >= self.ny as i64 {
                    continue;
                }
                let v = vy as usize * self.nx + vx as usize;
                let nd = d + self.edge_weight(ux as usize, uy as usize, (a, b));
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(State(nd, v));
                }
            }
        }
        let value = dist[target];
        let slack = stencil_distortion() * (x - y).norm() + 2f64.sqrt() * self.h;
        Ok(ChemicalDistance { value, slack })
    }
}

#[derive(PartialEq)]
struct State(f64, usize);

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(self.1.cmp(&other.1))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Chemical distance on a lattice over the bounding box of `x` and `y`
/// widened by half their distance plus two mesh sizes.
pub fn chemical_distance(field: &dyn ColorField, x: Complex64, y: Complex64, mesh: f64, resolution: f64) -> Result<ChemicalDistance> {
    let margin = 0.5 * (x - y).norm() + 2.0 * mesh;
    let window = Rect::new(x.re.min(y.re), x.re.max(y.re), x.im.min(y.im), x.im.max(y.im)).inflate(margin);
    ChemicalLattice::new(field, window, mesh, resolution)?.distance(x, y)
}

/// Connected yellow sets of a coloring, with exact gaps between them.
pub struct ClusterGraph {
    clusters: Vec<Vec<Polygon>>,
    /// Piece bounding boxes; exact pieces when the partition is a grid.
    boxes: Vec<Vec<Rect>>,
    rect_like: bool,
    gaps: Vec<f64>,
}

fn polygon_gap(a: &Polygon, b: &Polygon, rect_like: bool) -> f64 {
    if rect_like {
        a.bbox().distance_to_rect(&b.bbox())
    } else {
        a.distance_to_polygon(b)
    }
}

impl ClusterGraph {
    pub fn new(coloring: &Coloring) -> Self {
        let part = coloring.partition();
        let rect_like = part.family() == "grid";
        let ids: Vec<RegionId> = coloring.yellow_regions().collect();
        let index: BTreeMap<RegionId, usize> = ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
        let mut parent: Vec<usize> = (0..ids.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (k, &id) in ids.iter().enumerate() {
            for nb in part.touching(id) {
                if let Some(&j) = index.get(&nb) {
                    let (a, b) = (find(&mut parent, k), find(&mut parent, j));
                    if a != b {
                        parent[a] = b;
                    }
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<Polygon>> = BTreeMap::new();
        for (k, &id) in ids.iter().enumerate() {
            let root = find(&mut parent, k);
            groups.entry(root).or_default().push(part.polygon(id));
        }
        let clusters: Vec<Vec<Polygon>> = groups.into_values().collect();
        let boxes: Vec<Vec<Rect>> = clusters.iter().map(|c| c.iter().map(|p| p.bbox()).collect()).collect();
        let n = clusters.len();
        let gaps: Vec<f64> = (0..n * n)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / n, k % n);
                if i == j {
                    return 0.0;
                }
                if i > j {
                    return f64::NAN;
                }
                let mut best = f64::INFINITY;
                for (ka, a) in boxes[i].iter().enumerate() {
                    for (kb, b) in boxes[j].iter().enumerate() {
                        let d = a.distance_to_rect(b);
                        if d < best {
                            best = if rect_like { d } else { best.min(clusters[i][ka].distance_to_polygon(&clusters[j][kb])) };
                        }
                    }
                }
                best
            })
            .collect();
        let mut g = ClusterGraph { clusters, boxes, rect_like, gaps };
        for i in 0..n {
            for j in 0..i {
                g.gaps[i * n + j] = g.gaps[j * n + i];
            }
        }
        g
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    fn point_gap(&self, c: usize, z: Complex64) -> f64 {
        let mut best = f64::INFINITY;
        for (k, b) in self.boxes[c].iter().enumerate() {
            let d = b.distance_to(z);
            if d < best {
                best = if self.rect_like { d } else { best.min(self.clusters[c][k].distance_to(z)) };
            }
        }
        best
    }

    /// Chemical distances from `source` to each target.
    pub fn distances(&self, source: Complex64, targets: &[Complex64]) -> Vec<f64> {
        let n = self.len();
        let mut dist: Vec<f64> = (0..n).map(|c| self.point_gap(c, source)).collect();
        let mut done = vec![false; n];
        for _ in 0..n {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..n {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            let row = &self.gaps[u * n..(u + 1) * n];
            for v in 0..n {
                if !done[v] {
                    let nd = best + row[v];
                    if nd < dist[v] {
                        dist[v] = nd;
                    }
                }
            }
        }
        targets
            .iter()
            .map(|&t| {
                (0..n)
                    .map(|c| dist[c] + self.point_gap(c, t))
                    .fold((source - t).norm(), f64::min)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioConfig {
    pub r: f64,
    /// Pairs are drawn in `B(0, n)` with `d >= ln n`.
    pub n: f64,
    pub pairs: usize,
    /// Pairs share this many sources per coloring.
    pub sources: usize,
    pub colorings: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub coloring: usize,
    pub pair_id: usize,
    pub d: f64,
    pub d_chem: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub config: RatioConfig,
    pub records: Vec<PairRecord>,
    /// Minimum ratio per coloring.
    pub coloring_min: Vec<f64>,
    pub min: f64,
    pub q01: f64,
    pub median: f64,
    pub max: f64,
    /// Fraction of colorings whose minimum ratio is at least 1/10.
    pub fraction_above_tenth: f64,
    pub yellow_fraction: f64,
}

impl RatioStats {
    /// Table `N,r,coloring,pair_id,d,d_chem,ratio`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["N", "r", "coloring", "pair_id", "d", "d_chem", "ratio"])?;
        for rec in &self.records {
            w.write_record([
                format!("{}", self.config.n),
                format!("{}", self.config.r),
                rec.coloring.to_string(),
                rec.pair_id.to_string(),
                format!("{:.12e}", rec.d),
                format!("{:.12e}", rec.d_chem),
                format!("{:.12e}", rec.ratio),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn point_in_disk<R: Rng>(rng: &mut R, n: f64) -> Complex64 {
    loop {
        let z = Complex64::new(n * (2.0 * rng.random::<f64>() - 1.0), n * (2.0 * rng.random::<f64>() - 1.0));
        if z.norm() <= n {
            return z;
        }
    }
}

/// Point pairs `(source, targets)` with every target at distance at least
/// `ln n` from its source.
pub fn sample_pairs(n: f64, pairs: usize, sources: usize, seed: u64, coloring: usize) -> Vec<(Complex64, Vec<Complex64>)> {
    let sources = sources.clamp(1, pairs.max(1));
    let per = pairs.div_ceil(sources);
    let mut left = pairs;
    let mut out = Vec::with_capacity(sources);
    for s in 0..sources {
        let mut rng = stream(seed, Tag::Pairs, coloring as i64, s as i64, 0);
        let x = point_in_disk(&mut rng, n);
        let k = per.min(left);
        left -= k;
        let mut ts = Vec::with_capacity(k);
        while ts.len() < k {
            let y = point_in_disk(&mut rng, n);
            if (x - y).norm() >= n.ln() {
                ts.push(y);
            }
        }
        out.push((x, ts));
    }
    out
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    sorted[((sorted.len() - 1) as f64 * p).round() as usize]
}

/// Ratios `d_chem / d` over independent colorings of `partition` with every
/// region yellow with probability `r`.
pub fn ratio_experiment(partition: &Partition, cfg: &RatioConfig) -> Result<RatioStats> {
    if cfg.pairs == 0 || cfg.colorings == 0 {
        return Err(Error::invalid("pairs and colorings must be positive"));
    }
    if cfg.n < 16.0 {
        return Err(Error::invalid("N must be at least 16"));
    }
    if !partition.window().contains_disk(Complex64::new(0.0, 0.0), cfg.n) {
        return Err(Error::DomainTooSmall("partition window does not contain B(0, N)".into()));
    }
    let probs = vec![cfg.r; partition.local_count()];
    let mut records = Vec::with_capacity(cfg.pairs * cfg.colorings);
    let mut coloring_min = Vec::with_capacity(cfg.colorings);
    let mut yellow = 0.0;
    for c in 0..cfg.colorings {
        let col = color(partition, &probs, cfg.r, crate::rng::child_seed(cfg.seed, c as u64))?;
        yellow += col.yellow_fraction();
        let graph = ClusterGraph::new(&col);
        let groups = sample_pairs(cfg.n, cfg.pairs, cfg.sources, cfg.seed, c);
        let dists: Vec<Vec<f64>> = groups.par_iter().map(|(x, ts)| graph.distances(*x, ts)).collect();
        let mut cmin = f64::INFINITY;
        let mut pair_id = 0;
        for ((x, ts), ds) in groups.iter().zip(dists) {
            for (y, dc) in ts.iter().zip(ds) {
                let d = (x - y).norm();
                let ratio = dc / d;
                cmin = cmin.min(ratio);
                records.push(PairRecord { coloring: c, pair_id, d, d_chem: dc, ratio });
                pair_id += 1;
            }
        }
        coloring_min.push(cmin);
    }
    let mut ratios: Vec<f64> = records.iter().map(|r| r.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let good = coloring_min.iter().filter(|&&m| m >= 0.1).count();
    Ok(RatioStats {
        config: *cfg,
        min: ratios[0],
        q01: quantile(&ratios, 0.01),
        median: quantile(&ratios, 0.5),
        max: ratios[ratios.len() - 1],
        fraction_above_tenth: good as f64 / cfg.colorings as f64,
        yellow_fraction: yellow / cfg.colorings as f64,
        records,
        coloring_min,
    })
}

/// Fraction of instantiated regions all of whose regions within distance
/// `radius` (itself included) are blue.
pub fn insularity_fraction(coloring: &Coloring, radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::invalid("radius must be positive"));
    }
    let part = coloring.partition();
    if part.is_empty() {
        return Ok(0.0);
    }
    let rect_like = part.family() == "grid";
    let mut spoiled = BTreeSet::new();
    for y in coloring.yellow_regions() {
        let py = part.polygon(y);
        let bb = py.bbox();
        let reach = radius + 0.5 * bb.width().hypot(bb.height());
        for id in part.regions_near(bb.center(), reach) {
            if id == y || polygon_gap(&py, &part.polygon(id), rect_like) <= radius {
                spoiled.insert(id);
            }
        }
        spoiled.insert(y);
    }
    Ok(1.0 - spoiled.len() as f64 / part.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{build_square_grid, build_vertex_sector_partition, DEFAULT_ANCHORS};
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    fn grid(half: f64) -> Partition {
        build_square_grid(1.0, 1.0, Rect::centered_square(half)).unwrap()
    }

    #[test]
    fn coloring_extremes_and_fraction() {
        let p = grid(50.0);
        assert_eq!(color(&p, &[0.0], 0.0, 1).unwrap().yellow_fraction(), 0.0);
        assert_eq!(color(&p, &[1.0], 1.0, 1).unwrap().yellow_fraction(), 1.0);
        let f = color(&p, &[0.3], 0.3, 7).unwrap().yellow_fraction();
        assert!((f - 0.3).abs() < 0.015, "{f}");
        assert!(color(&p, &[0.4], 0.3, 7).is_err());
        let a = color(&p, &[0.3], 0.3, 7).unwrap();
        let b = color(&p, &[0.3], 0.3, 7).unwrap();
        assert!(a.yellow_regions().eq(b.yellow_regions()));
    }

    #[test]
    fn stencil_is_within_one_percent() {
        let e = stencil_distortion();
        assert!(e > 0.0 && e < 0.01, "{e}");
    }

    #[test]
    fn lattice_oracles() {
        let blue = |_z: Complex64| false;
        let d = chemical_distance(&blue, c(0.0, 0.0), c(3.0, 0.0), 1.0, 8.0).unwrap();
        assert!((d.value - 3.0).abs() < 1e-12);
        let d = chemical_distance(&blue, c(0.0, 0.0), c(2.3, 1.7), 1.0, 8.0).unwrap();
        let e = c(2.3, 1.7).norm();
        assert!(d.value >= e - d.slack && d.value <= e * 1.01 + d.slack, "{d:?}");
        let yellow = |_z: Complex64| true;
        assert_eq!(chemical_distance(&yellow, c(0.0, 0.0), c(3.0, 0.0), 1.0, 8.0).unwrap().value, 0.0);
        let disk = |z: Complex64| z.norm() <= 1.0;
        let d = chemical_distance(&disk, c(-2.0, 0.0), c(2.0, 0.0), 1.0, 16.0).unwrap();
        assert!((d.value - 2.0).abs() <= d.slack, "{d:?}");
        assert!(chemical_distance(&blue, c(0.0, 0.0), c(1.0, 0.0), 1.0, 4.0).is_err());
    }

    #[test]
    fn cluster_graph_matches_lattice() {
        let p = grid(12.0);
        let col = color(&p, &[0.35], 0.35, 4).unwrap();
        let g = ClusterGraph::new(&col);
        let lat = ChemicalLattice::new(&col, Rect::centered_square(12.0), 2f64.sqrt(), 12.0).unwrap();
        for (x, y) in [(c(-7.3, -2.1), c(6.2, 5.5)), (c(0.4, 8.8), c(-3.3, -9.9)), (c(-9.0, 9.0), c(9.0, -9.0))] {
            let exact = g.distances(x, &[y])[0];
            let approx = lat.distance(x, y).unwrap();
            assert!(exact <= (x - y).norm() + 1e-12);
            assert!((exact - approx.value).abs() <= approx.slack + 1e-9, "{exact} vs {approx:?}");
        }
    }

    #[test]
    fn zero_r_gives_unit_ratios() {
        let p = grid(20.0);
        let cfg = RatioConfig { r: 0.0, n: 16.0, pairs: 20, sources: 4, colorings: 2, seed: 3 };
        let s = ratio_experiment(&p, &cfg).unwrap();
        assert!(s.records.iter().all(|r| r.ratio == 1.0 && r.d >= 16f64.ln()));
        assert_eq!(s.records.len(), 40);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("N,r,coloring,pair_id,d,d_chem,ratio"));
    }

    #[test]
    fn insularity_extremes_and_bound() {
        let p = grid(40.0);
        assert_eq!(insularity_fraction(&color(&p, &[0.0], 0.0, 1).unwrap(), 1.0).unwrap(), 1.0);
        assert_eq!(insularity_fraction(&color(&p, &[1.0], 1.0, 1).unwrap(), 1.0).unwrap(), 0.0);
        // radius 0.5 meets the 3x3 block: expected fraction (1 - r)^9 away
        // from the window edge; edges only help
        let r = 0.05;
        let f = insularity_fraction(&color(&p, &[r], r, 9).unwrap(), 0.5).unwrap();
        let expect = (1.0f64 - r).powi(9);
        let sigma = (expect * (1.0 - expect) / p.len() as f64).sqrt();
        assert!(f >= expect - 3.0 * sigma * 9.0, "{f} vs {expect}");
        assert!((f - expect).abs() < 0.03, "{f} vs {expect}");
    }

    #[test]
    fn vertex_sector_partitions_color_too() {
        let p = build_vertex_sector_partition(1.0, 1.0, DEFAULT_ANCHORS, Rect::centered_square(4.0)).unwrap();
        let col = color(&p, &[0.3; 4], 0.3, 2).unwrap();
        let g = ClusterGraph::new(&col);
        let d = g.distances(c(-3.0, -3.0), &[c(3.0, 3.0)])[0];
        assert!(d <= c(6.0, 6.0).norm() + 1e-12);
        assert!(insularity_fraction(&col, 0.2).unwrap() < 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn pseudometric_and_monotone(seed in 0u64..500) {
            let p = grid(8.0);
            let col = color(&p, &[0.3], 0.3, seed).unwrap();
            let lat = ChemicalLattice::new(&col, Rect::centered_square(8.0), 1.0, 8.0).unwrap();
            let pts = [c(-5.0, -4.0), c(5.0, 3.0), c(-1.0, 6.0)];
            let d = |a: usize, b: usize| lat.distance(pts[a], pts[b]).unwrap().value;
            prop_assert!((d(0, 1) - d(1, 0)).abs() < 1e-9);
            prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9);
            prop_assert!(d(0, 1) <= (pts[0] - pts[1]).norm() * 1.01 + lat.spacing() * 2.0);
            // more yellow never increases distances
            let extra: Vec<RegionId> = p.regions().iter().copied().filter(|id| (id.lattice_cell.0 + id.lattice_cell.1) % 5 == 0).collect();
            let more = col.with_yellow(&extra);
            let g0 = ClusterGraph::new(&col).distances(pts[0], &pts[1..]);
            let g1 = ClusterGraph::new(&more).distances(pts[0], &pts[1..]);
            for (a, b) in g0.iter().zip(&g1) {
                prop_assert!(b <= a);
            }
        }
    }
}
