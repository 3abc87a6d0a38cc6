//! Periodic partitions of the plane into polygonal Jordan regions.
//!
//! Two families are provided: rectangular grids and the vertex-sector
//! partition of the surface model, where each region collects the eight
//! curvilinear triangles around one lattice vertex. The infinite partition
//! is instantiated over a finite window: a region belongs to the partition
//! when it overlaps the window with positive area.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::elliptic::CellMap;
use crate::geom::{Polygon, Rect};
use crate::{Error, Result};

/// Region index: lattice cell of the period lattice plus position inside
/// one fundamental domain. The derived order is the boundary tie-break.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RegionId {
    pub lattice_cell: (i64, i64),
    pub local_index: usize,
}

impl RegionId {
    pub fn new(i: i64, j: i64, local_index: usize) -> Self {
        RegionId { lattice_cell: (i, j), local_index }
    }
}

/// Default anchor angles of the surface model.
pub const DEFAULT_ANCHORS: [f64; 4] = [0.0, 0.5 * PI, PI, 1.5 * PI];

/// Segments per curved edge in the polyline approximation.
pub const DEFAULT_SEGMENTS: usize = 16;

/// Unwrap cyclically ordered anchors so that `θ1 < θ2 < θ3 < θ4 < θ1 + 2π`.
pub fn unwrap_anchors(theta: [f64; 4]) -> Result<[f64; 4]> {
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("anchors must be finite"));
    }
    let mut out = theta;
    let mut total = 0.0;
    for i in 1..4 {
        let d = (theta[i] - theta[i - 1]).rem_euclid(2.0 * PI);
        if d <= 0.0 {
            return Err(Error::invalid("anchors coincide"));
        }
        out[i] = out[i - 1] + d;
        total += d;
    }
    let last = (theta[0] - theta[3]).rem_euclid(2.0 * PI);
    total += last;
    if last <= 0.0 || (total - 2.0 * PI).abs() > 1e-9 {
        return Err(Error::invalid("anchors are not cyclically ordered"));
    }
    Ok(out)
}

/// Midpoints of the arcs `[θ_i, θ_{i+1}]` of unwrapped anchors.
pub fn arc_midpoints(theta: &[f64; 4]) -> [f64; 4] {
    let mut m = [0.0; 4];
    for i in 0..4 {
        let next = if i == 3 { theta[0] + 2.0 * PI } else { theta[i + 1] };
        m[i] = 0.5 * (theta[i] + next);
    }
    m
}

/// Geometry of the vertex-sector partition.
#[derive(Clone, Debug)]
pub struct SectorGeometry {
    pub anchors: [f64; 4],
    pub midpoints: [f64; 4],
    pub cell_map: CellMap,
    pub segments: usize,
    /// Curves from the reference cell center to the edge point of each
    /// anchor ray, in the upper reference cell.
    pub curves: [Vec<Complex64>; 4],
    /// Region polygons of the vertices `(p, q)` with `p, q ∈ {0, 1}`.
    prototypes: [[Polygon; 2]; 2],
}

impl SectorGeometry {
    pub fn new(cell_width: f64, anchors: [f64; 4], midpoints: [f64; 4], segments: usize) -> Result<Self> {
        if segments == 0 {
            return Err(Error::invalid("need at least one segment per curve"));
        }
        let cell_map = CellMap::new(cell_width, midpoints)?;
        let center = cell_map.reference_center();
        let curves: [Vec<Complex64>; 4] = std::array::from_fn(|j| {
            let th = anchors[j];
            let mut c = vec![center];
            for s in 1..segments {
                let r = s as f64 / segments as f64;
                c.push(cell_map.reference_preimage(Complex64::from_polar(r, th)));
            }
            c.push(cell_map.reference_edge_point(th));
            c
        });
        let mut geom = SectorGeometry {
            anchors,
            midpoints,
            cell_map,
            segments,
            curves,
            prototypes: Default::default(),
        };
        for p in 0..2 {
            for q in 0..2 {
                geom.prototypes[p][q] = geom.build_vertex_polygon(p as i64, q as i64);
            }
        }
        Ok(geom)
    }

    fn build_vertex_polygon(&self, p: i64, q: i64) -> Polygon {
        let (a, b) = (self.cell_map.a, self.cell_map.b);
        let vertex = Complex64::new(p as f64 * a, q as f64 * b);
        let label = CellMap::vertex_label(p, q);
        let cells = [(p, q, 0.0), (p - 1, q, 0.5 * PI), (p - 1, q - 1, PI), (p, q - 1, 1.5 * PI)];
        let mut pts: Vec<Complex64> = Vec::with_capacity(8 * self.segments + 4);
        for (ci, cj, phi0) in cells {
            let mapped: Vec<Vec<Complex64>> = [label - 1, label % 4]
                .iter()
                .map(|&j| self.curves[j].iter().map(|&z| self.cell_map.reflect_into(z, ci, cj)).collect())
                .collect();
            let angle = |c: &Vec<Complex64>| (c.last().unwrap() - vertex).arg() - phi0;
            let rel = |c: &Vec<Complex64>| angle(c).rem_euclid(2.0 * PI);
            let (first, second) = if rel(&mapped[0]) <= rel(&mapped[1]) { (0, 1) } else { (1, 0) };
            pts.extend(mapped[first].iter().rev());
            pts.extend(mapped[second].iter().skip(1));
        }
        let tol = 1e-12 * a.max(b);
        let mut out: Vec<Complex64> = Vec::with_capacity(pts.len());
        for z in pts {
            if out.last().is_none_or(|l: &Complex64| (l - z).norm() > tol) {
                out.push(z);
            }
        }
        if out.len() > 1 && (out[0] - out[out.len() - 1]).norm() <= tol {
            out.pop();
        }
        Polygon::new(out)
    }

    pub fn vertex_polygon(&self, p: i64, q: i64) -> Polygon {
        let (pr, qr) = (p.rem_euclid(2), q.rem_euclid(2));
        let t = Complex64::new((p - pr) as f64 * self.cell_map.a, (q - qr) as f64 * self.cell_map.b);
        self.prototypes[pr as usize][qr as usize].translate(t)
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Grid,
    VertexSector(Box<SectorGeometry>),
}

/// A periodic partition instantiated over a window.
#[derive(Clone, Debug)]
pub struct Partition {
    kind: Kind,
    cell_width: f64,
    cell_height: f64,
    window: Rect,
    period_vectors: [Complex64; 2],
    mesh_size: f64,
    /// Sorted ids of the instantiated regions.
    regions: Vec<RegionId>,
}

/// Structured-text form of a partition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionFile {
    pub family: String,
    pub cell_width: f64,
    pub cell_height: f64,
    pub window: Rect,
    pub period_vectors: [Complex64; 2],
    pub anchors: Option<[f64; 4]>,
    pub segments: Option<usize>,
    pub mesh_size: f64,
    pub regions: Vec<(RegionId, Polygon)>,
}

fn check_window(window: &Rect) -> Result<()> {
    if !window.is_nonempty() || !window.area().is_finite() {
        return Err(Error::invalid("window must be a nonempty finite rectangle"));
    }
    Ok(())
}

/// Rectangular grid with cells `[i w, (i+1) w] x [j h, (j+1) h]`.
pub fn build_square_grid(cell_width: f64, cell_height: f64, window: Rect) -> Result<Partition> {
    if !(cell_width > 0.0 && cell_height > 0.0) || !(cell_width * cell_height).is_finite() {
        return Err(Error::invalid("cell dimensions must be positive"));
    }
    check_window(&window)?;
    let i0 = (window.x_min / cell_width).floor() as i64;
    let i1 = (window.x_max / cell_width).ceil() as i64 - 1;
    let j0 = (window.y_min / cell_height).floor() as i64;
    let j1 = (window.y_max / cell_height).ceil() as i64 - 1;
    let mut regions = Vec::with_capacity(((i1 - i0 + 1) * (j1 - j0 + 1)).max(0) as usize);
    for i in i0..=i1 {
        for j in j0..=j1 {
            regions.push(RegionId::new(i, j, 0));
        }
    }
    regions.sort();
    Ok(Partition {
        kind: Kind::Grid,
        cell_width,
        cell_height,
        window,
        period_vectors: [Complex64::new(cell_width, 0.0), Complex64::new(0.0, cell_height)],
        mesh_size: cell_width.hypot(cell_height),
        regions,
    })
}

/// Vertex-sector partition of the surface model. The anchors fix the
/// conformal shape of a cell, so `cell_height` must agree with the height
/// they imply (see [`sector_cell_height`]).
pub fn build_vertex_sector_partition(
    cell_width: f64,
    cell_height: f64,
    theta_anchors: [f64; 4],
    window: Rect,
) -> Result<Partition> {
    build_vertex_sector_partition_with(cell_width, cell_height, theta_anchors, window, DEFAULT_SEGMENTS)
}

/// Cell height implied by the anchors for a given cell width.
pub fn sector_cell_height(cell_width: f64, theta_anchors: [f64; 4]) -> Result<f64> {
    let th = unwrap_anchors(theta_anchors)?;
    Ok(CellMap::new(cell_width, arc_midpoints(&th))?.b)
}

pub fn build_vertex_sector_partition_with(
    cell_width: f64,
    cell_height: f64,
    theta_anchors: [f64; 4],
    window: Rect,
    segments: usize,
) -> Result<Partition> {
    if !(cell_width > 0.0 && cell_height > 0.0) {
        return Err(Error::invalid("cell dimensions must be positive"));
    }
    check_window(&window)?;
    let th = unwrap_anchors(theta_anchors)?;
    let geom = SectorGeometry::new(cell_width, th, arc_midpoints(&th), segments)?;
    let b = geom.cell_map.b;
    if (cell_height - b).abs() > 1e-6 * b {
        return Err(Error::invalid(format!(
            "cell height {cell_height} inconsistent with the anchors, which require {b}"
        )));
    }
    let (a, b) = (cell_width, b);
    let p0 = (window.x_min / a).floor() as i64 - 1;
    let p1 = (window.x_max / a).ceil() as i64 + 1;
    let q0 = (window.y_min / b).floor() as i64 - 1;
    let q1 = (window.y_max / b).ceil() as i64 + 1;
    let inner = window.inflate(-1.5 * a.max(b));
    let mut regions = Vec::new();
    for p in p0..=p1 {
        for q in q0..=q1 {
            let v = Complex64::new(p as f64 * a, q as f64 * b);
            let keep = if inner.is_nonempty() && inner.contains(v) {
                true
            } else {
                let poly = geom.vertex_polygon(p, q);
                poly.bbox().overlaps(&window) && poly.clip_to_rect(&window).area() > 1e-12 * a * b
            };
            if keep {
                regions.push(vertex_region_id(p, q));
            }
        }
    }
    regions.sort();
    let mesh_size = (0..2)
        .flat_map(|p| (0..2).map(move |q| (p, q)))
        .map(|(p, q)| geom.vertex_polygon(p, q).diameter())
        .fold(0.0, f64::max);
    Ok(Partition {
        kind: Kind::VertexSector(Box::new(geom)),
        cell_width,
        cell_height: b,
        window,
        period_vectors: [Complex64::new(2.0 * a, 0.0), Complex64::new(0.0, 2.0 * b)],
        mesh_size,
        regions,
    })
}

/// Region of the vertex-sector partition around lattice vertex `(p, q)`.
pub fn vertex_region_id(p: i64, q: i64) -> RegionId {
    RegionId::new(p.div_euclid(2), q.div_euclid(2), CellMap::vertex_label(p, q) - 1)
}

fn vertex_of(id: RegionId) -> (i64, i64) {
    let (dp, dq) = match id.local_index {
        0 => (0, 1),
        1 => (1, 1),
        2 => (1, 0),
        _ => (0, 0),
    };
    (2 * id.lattice_cell.0 + dp, 2 * id.lattice_cell.1 + dq)
}

impl Partition {
    pub fn window(&self) -> Rect {
        self.window
    }

    pub fn period_vectors(&self) -> [Complex64; 2] {
        self.period_vectors
    }

    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    pub fn cell_width(&self) -> f64 {
        self.cell_width
    }

    pub fn cell_height(&self) -> f64 {
        self.cell_height
    }

    /// Instantiated regions in increasing id order.
    pub fn regions(&self) -> &[RegionId] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn contains_region(&self, id: RegionId) -> bool {
        self.regions.binary_search(&id).is_ok()
    }

    /// Number of regions per fundamental domain.
    pub fn local_count(&self) -> usize {
        match self.kind {
            Kind::Grid => 1,
            Kind::VertexSector(_) => 4,
        }
    }

    pub fn sector_geometry(&self) -> Option<&SectorGeometry> {
        match &self.kind {
            Kind::Grid => None,
            Kind::VertexSector(g) => Some(g),
        }
    }

    pub fn family(&self) -> &'static str {
        match self.kind {
            Kind::Grid => "grid",
            Kind::VertexSector(_) => "vertex-sector",
        }
    }

    /// Region polygon of any region of the infinite partition.
    pub fn polygon(&self, id: RegionId) -> Polygon {
        match &self.kind {
            Kind::Grid => Polygon::from_rect(&self.cell_rect(id)),
            Kind::VertexSector(g) => {
                let (p, q) = vertex_of(id);
                g.vertex_polygon(p, q)
            }
        }
    }

    fn cell_rect(&self, id: RegionId) -> Rect {
        let (i, j) = id.lattice_cell;
        let (w, h) = (self.cell_width, self.cell_height);
        Rect::new(i as f64 * w, (i + 1) as f64 * w, j as f64 * h, (j + 1) as f64 * h)
    }

    pub fn bbox(&self, id: RegionId) -> Rect {
        match self.kind {
            Kind::Grid => self.cell_rect(id),
            Kind::VertexSector(_) => self.polygon(id).bbox(),
        }
    }

    /// Bounding rectangle of the instantiated regions.
    pub fn extent(&self) -> Rect {
        self.regions.iter().map(|&id| self.bbox(id)).reduce(|a, b| a.union(&b)).unwrap_or(self.window)
    }

    /// Translate a region by an integer combination of the period vectors.
    pub fn translate(&self, id: RegionId, du: i64, dv: i64) -> RegionId {
        RegionId::new(id.lattice_cell.0 + du, id.lattice_cell.1 + dv, id.local_index)
    }

    /// Closed distance from `z` to a region.
    pub fn distance_to_region(&self, id: RegionId, z: Complex64) -> f64 {
        match self.kind {
            Kind::Grid => self.cell_rect(id).distance_to(z),
            Kind::VertexSector(_) => self.polygon(id).distance_to(z),
        }
    }

    pub fn region_contains(&self, id: RegionId, z: Complex64, eps: f64) -> bool {
        match self.kind {
            Kind::Grid => self.cell_rect(id).distance_to(z) <= eps,
            Kind::VertexSector(_) => self.polygon(id).contains(z, eps),
        }
    }

    /// Regions of the infinite partition whose closure may contain `z`,
    /// in increasing id order.
    fn candidates(&self, z: Complex64, eps: f64) -> Vec<RegionId> {
        let mut c = Vec::with_capacity(9);
        match self.kind {
            Kind::Grid => {
                let (w, h) = (self.cell_width, self.cell_height);
                let ir = ((z.re - eps) / w).ceil() as i64 - 1..=((z.re + eps) / w).floor() as i64;
                for i in ir {
                    let jr = ((z.im - eps) / h).ceil() as i64 - 1..=((z.im + eps) / h).floor() as i64;
                    for j in jr {
                        c.push(RegionId::new(i, j, 0));
                    }
                }
            }
            Kind::VertexSector(_) => {
                let (a, b) = (self.cell_width, self.cell_height);
                for p in ((z.re - eps) / a).floor() as i64..=((z.re + eps) / a).floor() as i64 + 1 {
                    for q in ((z.im - eps) / b).floor() as i64..=((z.im + eps) / b).floor() as i64 + 1 {
                        c.push(vertex_region_id(p, q));
                    }
                }
            }
        }
        c.sort();
        c
    }

    fn boundary_eps(&self) -> f64 {
        1e-9 * self.cell_width.max(self.cell_height)
    }

    /// Region whose closed set contains `z`; the smallest id on shared
    /// boundaries.
    pub fn region_of(&self, z: Complex64) -> Result<RegionId> {
        if !self.window.contains(z) {
            return Err(Error::OutsideDomain(z));
        }
        let eps = match self.kind {
            Kind::Grid => 0.0,
            Kind::VertexSector(_) => self.boundary_eps(),
        };
        let cands = self.candidates(z, eps);
        for &id in &cands {
            if self.contains_region(id) && self.region_contains(id, z, eps) {
                return Ok(id);
            }
        }
        // Only reachable through rounding at polyline joints.
        cands
            .into_iter()
            .filter(|&id| self.contains_region(id))
            .min_by(|&x, &y| self.distance_to_region(x, z).total_cmp(&self.distance_to_region(y, z)))
            .ok_or(Error::OutsideDomain(z))
    }

    /// Number of instantiated regions whose closure meets the open disk.
    pub fn count_regions_in_disk(&self, center: Complex64, radius: f64) -> Result<usize> {
        if !(radius > 0.0) {
            return Err(Error::invalid("radius must be positive"));
        }
        if !self.window.contains_disk(center, radius) {
            return Err(Error::DomainTooSmall(format!(
                "disk of radius {radius} about {center} exceeds the window"
            )));
        }
        Ok(self.regions_near(center, radius).len())
    }

    /// Instantiated regions at distance `< radius` from `center`.
    pub fn regions_near(&self, center: Complex64, radius: f64) -> Vec<RegionId> {
        let (w, h) = (self.cell_width, self.cell_height);
        let reach = radius + 2.0 * w.max(h);
        let i0 = ((center.re - reach) / w).floor() as i64;
        let i1 = ((center.re + reach) / w).ceil() as i64;
        let j0 = ((center.im - reach) / h).floor() as i64;
        let j1 = ((center.im + reach) / h).ceil() as i64;
        let mut out = Vec::new();
        for i in i0..=i1 {
            for j in j0..=j1 {
                let id = match self.kind {
                    Kind::Grid => RegionId::new(i, j, 0),
                    Kind::VertexSector(_) => vertex_region_id(i, j),
                };
                if !self.contains_region(id) {
                    continue;
                }
                let bb = self.bbox(id);
                if bb.distance_to(center) >= radius {
                    continue;
                }
                if bb.max_distance_to(center) < radius || self.distance_to_region(id, center) < radius {
                    out.push(id);
                }
            }
        }
        out.sort();
        out
    }

    /// `(R, k_R)` about the window center.
    pub fn density_table(&self, radii: &[f64]) -> Result<Vec<(f64, usize)>> {
        let c = self.window.center();
        radii.iter().map(|&r| Ok((r, self.count_regions_in_disk(c, r)?))).collect()
    }

    /// Regions of the infinite partition whose closures meet that of `id`.
    pub fn touching(&self, id: RegionId) -> Vec<RegionId> {
        let mut out = Vec::with_capacity(8);
        match self.kind {
            Kind::Grid => {
                let (i, j) = id.lattice_cell;
                for di in -1..=1 {
                    for dj in -1..=1 {
                        if di != 0 || dj != 0 {
                            out.push(RegionId::new(i + di, j + dj, 0));
                        }
                    }
                }
            }
            Kind::VertexSector(_) => {
                let (p, q) = vertex_of(id);
                for dp in -1..=1 {
                    for dq in -1..=1 {
                        if dp != 0 || dq != 0 {
                            out.push(vertex_region_id(p + dp, q + dq));
                        }
                    }
                }
            }
        }
        out
    }

    /// Lattice vertex `(p, q)` of a vertex-sector region.
    pub fn vertex_of(&self, id: RegionId) -> Option<(i64, i64)> {
        match self.kind {
            Kind::Grid => None,
            Kind::VertexSector(_) => Some(vertex_of(id)),
        }
    }

    pub fn to_file(&self) -> PartitionFile {
        let (anchors, segments) = match &self.kind {
            Kind::Grid => (None, None),
            Kind::VertexSector(g) => (Some(g.anchors), Some(g.segments)),
        };
        PartitionFile {
            family: self.family().to_string(),
            cell_width: self.cell_width,
            cell_height: self.cell_height,
            window: self.window,
            period_vectors: self.period_vectors,
            anchors,
            segments,
            mesh_size: self.mesh_size,
            regions: self.regions.iter().map(|&id| (id, self.polygon(id))).collect(),
        }
    }

    pub fn from_file(f: &PartitionFile) -> Result<Partition> {
        match (f.family.as_str(), f.anchors) {
            ("grid", _) => build_square_grid(f.cell_width, f.cell_height, f.window),
            ("vertex-sector", Some(th)) => build_vertex_sector_partition_with(
                f.cell_width,
                f.cell_height,
                th,
                f.window,
                f.segments.unwrap_or(DEFAULT_SEGMENTS),
            ),
            (other, _) => Err(Error::Format(format!("unknown partition family {other}"))),
        }
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_file())?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Partition> {
        let f: PartitionFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Partition::from_file(&f)
    }
}
