//! Plane geometry on `Complex64` points: rectangles, polygons and distances.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Closed axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Rect { x_min, x_max, y_min, y_max }
    }

    /// The square `[-h, h]^2`.
    pub fn centered_square(half: f64) -> Self {
        Rect::new(-half, half, -half, half)
    }

    pub fn is_nonempty(&self) -> bool {
        self.x_max > self.x_min && self.y_max > self.y_min
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Complex64) -> bool {
        p.re >= self.x_min && p.re <= self.x_max && p.im >= self.y_min && p.im <= self.y_max
    }

    /// Whether the open disk `B(c, r)` lies inside the rectangle.
    pub fn contains_disk(&self, c: Complex64, r: f64) -> bool {
        c.re - r >= self.x_min && c.re + r <= self.x_max && c.im - r >= self.y_min && c.im + r <= self.y_max
    }

    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x_min <= other.x_max && other.x_min <= self.x_max && self.y_min <= other.y_max && other.y_min <= self.y_max
    }

    pub fn translate(&self, t: Complex64) -> Rect {
        Rect::new(self.x_min + t.re, self.x_max + t.re, self.y_min + t.im, self.y_max + t.im)
    }

    pub fn inflate(&self, d: f64) -> Rect {
        Rect::new(self.x_min - d, self.x_max + d, self.y_min - d, self.y_max + d)
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    pub fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.x_min, self.y_min),
            Complex64::new(self.x_max, self.y_min),
            Complex64::new(self.x_max, self.y_max),
            Complex64::new(self.x_min, self.y_max),
        ]
    }

    /// Euclidean distance from `p` to the closed rectangle.
    pub fn distance_to(&self, p: Complex64) -> f64 {
        let dx = (self.x_min - p.re).max(0.0).max(p.re - self.x_max);
        let dy = (self.y_min - p.im).max(0.0).max(p.im - self.y_max);
        dx.hypot(dy)
    }

    /// Largest distance from `p` to a point of the rectangle.
    pub fn max_distance_to(&self, p: Complex64) -> f64 {
        let dx = (p.re - self.x_min).abs().max((p.re - self.x_max).abs());
        let dy = (p.im - self.y_min).abs().max((p.im - self.y_max).abs());
        dx.hypot(dy)
    }

    pub fn distance_to_rect(&self, other: &Rect) -> f64 {
        let dx = (other.x_min - self.x_max).max(self.x_min - other.x_max).max(0.0);
        let dy = (other.y_min - self.y_max).max(self.y_min - other.y_max).max(0.0);
        dx.hypot(dy)
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect::new(
            self.x_min.min(other.x_min),
            self.x_max.max(other.x_max),
            self.y_min.min(other.y_min),
            self.y_max.max(other.y_max),
        )
    }
}

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

/// Whether the closed segments `[a, b]` and `[c, d]` intersect.
pub fn segments_intersect(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> bool {
    let d1 = cross(d - c, a - c);
    let d2 = cross(d - c, b - c);
    let d3 = cross(b - a, c - a);
    let d4 = cross(b - a, d - a);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && point_segment_distance(a, c, d) == 0.0)
        || (d2 == 0.0 && point_segment_distance(b, c, d) == 0.0)
        || (d3 == 0.0 && point_segment_distance(c, a, b) == 0.0)
        || (d4 == 0.0 && point_segment_distance(d, a, b) == 0.0)
}

pub fn segment_segment_distance(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Simple polygon given by its vertex loop (last edge implicit).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Complex64>,
}

impl Polygon {
    pub fn new(vertices: Vec<Complex64>) -> Self {
        Polygon { vertices }
    }

    pub fn from_rect(r: &Rect) -> Self {
        Polygon::new(r.corners().to_vec())
    }

    pub fn edges(&self) -> impl Iterator<Item = (Complex64, Complex64)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn bbox(&self) -> Rect {
        let mut r = Rect::new(f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            r.x_min = r.x_min.min(v.re);
            r.x_max = r.x_max.max(v.re);
            r.y_min = r.y_min.min(v.im);
            r.y_max = r.y_max.max(v.im);
        }
        r
    }

    pub fn signed_area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| cross(a, b)).sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    pub fn translate(&self, t: Complex64) -> Polygon {
        Polygon::new(self.vertices.iter().map(|v| v + t).collect())
    }

    pub fn boundary_distance(&self, p: Complex64) -> f64 {
        self.edges().map(|(a, b)| point_segment_distance(p, a, b)).fold(f64::INFINITY, f64::min)
    }

    /// Even-odd interior test (boundary points are not treated specially).
    pub fn contains_interior(&self, p: Complex64) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.im > p.im) != (b.im > p.im) {
                let x = a.re + (p.im - a.im) / (b.im - a.im) * (b.re - a.re);
                if p.re < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Closed containment with boundary tolerance `eps`.
    pub fn contains(&self, p: Complex64, eps: f64) -> bool {
        self.contains_interior(p) || self.boundary_distance(p) <= eps
    }

    /// Distance from `p` to the closed polygon (zero inside).
    pub fn distance_to(&self, p: Complex64) -> f64 {
        if self.contains_interior(p) {
            0.0
        } else {
            self.boundary_distance(p)
        }
    }

    /// Distance between two closed polygons (zero when they meet).
    pub fn distance_to_polygon(&self, other: &Polygon) -> f64 {
        if self.vertices.iter().any(|&v| other.contains_interior(v))
            || other.vertices.iter().any(|&v| self.contains_interior(v))
        {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for (a, b) in self.edges() {
            for (c, d) in other.edges() {
                best = best.min(segment_segment_distance(a, b, c, d));
                if best == 0.0 {
                    return 0.0;
                }
            }
        }
        best
    }

    /// Sutherland–Hodgman clip against a rectangle. The result may contain
    /// degenerate edges for non-convex input, which leaves its area exact.
    pub fn clip_to_rect(&self, r: &Rect) -> Polygon {
        let mut pts = self.vertices.clone();
        let planes: [(usize, f64, bool); 4] =
            [(0, r.x_min, true), (0, r.x_max, false), (1, r.y_min, true), (1, r.y_max, false)];
        for (axis, bound, keep_greater) in planes {
            if pts.is_empty() {
                break;
            }
            let coord = |p: Complex64| if axis == 0 { p.re } else { p.im };
            let inside = |p: Complex64| if keep_greater { coord(p) >= bound } else { coord(p) <= bound };
            let mut out = Vec::with_capacity(pts.len() + 4);
            for i in 0..pts.len() {
                let cur = pts[i];
                let prev = pts[(i + pts.len() - 1) % pts.len()];
                let (ci, pi) = (inside(cur), inside(prev));
                if ci != pi {
                    let t = (bound - coord(prev)) / (coord(cur) - coord(prev));
                    out.push(prev + (cur - prev) * t);
                }
                if ci {
                    out.push(cur);
                }
            }
            pts = out;
        }
        Polygon::new(pts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn unit_square_basics() {
        let sq = Polygon::from_rect(&Rect::new(0.0, 1.0, 0.0, 1.0));
        assert!((sq.area() - 1.0).abs() < 1e-15);
        assert!((sq.diameter() - 2f64.sqrt()).abs() < 1e-15);
        assert!(sq.contains(c(0.5, 0.5), 0.0));
        assert!(sq.contains(c(1.0, 0.3), 1e-12));
        assert!(!sq.contains(c(1.1, 0.3), 1e-12));
        assert!((sq.distance_to(c(2.0, 0.5)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn clipping_keeps_overlap_area() {
        let sq = Polygon::from_rect(&Rect::new(-1.0, 1.0, -1.0, 1.0));
        let clipped = sq.clip_to_rect(&Rect::new(0.0, 4.0, 0.0, 4.0));
        assert!((clipped.area() - 1.0).abs() < 1e-14);
        let touching = Polygon::from_rect(&Rect::new(-1.0, 0.0, -1.0, 0.0)).clip_to_rect(&Rect::new(0.0, 4.0, 0.0, 4.0));
        assert!(touching.area() < 1e-14);
    }

    #[test]
    fn polygon_distances() {
        let a = Polygon::from_rect(&Rect::new(0.0, 1.0, 0.0, 1.0));
        let b = Polygon::from_rect(&Rect::new(2.0, 3.0, 0.0, 1.0));
        let d = Polygon::from_rect(&Rect::new(1.0, 2.0, 1.0, 2.0));
        assert!((a.distance_to_polygon(&b) - 1.0).abs() < 1e-15);
        assert_eq!(a.distance_to_polygon(&d), 0.0);
    }
}
