//! Jacobi elliptic functions, Carlson's RF, Möbius maps and the
//! rectangle-to-half-plane map used by the surface model.
//!
//! Parameter convention: `m = k^2`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Complete elliptic integral of the first kind `K(m)` by the AGM.
pub fn ellip_k(m: f64) -> f64 {
    assert!((0.0..1.0).contains(&m), "parameter out of range: {m}");
    let (mut a, mut b) = (1.0f64, (1.0 - m).sqrt());
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    PI / (a + b)
}

/// Real `(sn, cn, dn)(u | m)` by descending Landen transformation.
pub fn sncndn(u: f64, m: f64) -> (f64, f64, f64) {
    let mut emc = 1.0 - m;
    if emc == 0.0 {
        let cn = 1.0 / u.cosh();
        return (u.tanh(), cn, cn);
    }
    let mut em = [0.0f64; 16];
    let mut en = [0.0f64; 16];
    let mut a = 1.0;
    let mut dn = 1.0;
    let mut c = 1.0;
    let mut l = 0;
    for i in 0..16 {
        l = i;
        em[i] = a;
        emc = emc.sqrt();
        en[i] = emc;
        c = 0.5 * (a + emc);
        if (a - emc).abs() <= 1e-9 * a {
            break;
        }
        emc *= a;
        a = c;
    }
    let v = c * u;
    let mut sn = v.sin();
    let mut cn = v.cos();
    if sn != 0.0 {
        let mut a = cn / sn;
        c *= a;
        for ii in (0..=l).rev() {
            let b = em[ii];
            a *= c;
            c *= dn;
            dn = (en[ii] + a) / (b + a);
            a = c / b;
        }
        let a = 1.0 / (c * c + 1.0).sqrt();
        sn = if sn >= 0.0 { a } else { -a };
        cn = c * sn;
    }
    (sn, cn, dn)
}

/// Numerators and common real denominator of complex `sn, cn, dn`.
#[derive(Clone, Copy, Debug)]
pub struct JacobiParts {
    pub ns: Complex64,
    pub nc: Complex64,
    pub nd: Complex64,
    pub den: f64,
}

impl JacobiParts {
    pub fn sn(&self) -> Complex64 {
        self.ns / self.den
    }
    pub fn cn(&self) -> Complex64 {
        self.nc / self.den
    }
    pub fn dn(&self) -> Complex64 {
        self.nd / self.den
    }
}

/// Complex Jacobi functions via the imaginary-argument addition formulas.
/// `kk` and `kkp` are `K(m)` and `K(1-m)`, used for argument reduction.
pub fn jacobi_parts(z: Complex64, m: f64, kk: f64, kkp: f64) -> JacobiParts {
    let x = reduce(z.re, 4.0 * kk);
    let y = reduce(z.im, 4.0 * kkp);
    let (s, c, d) = sncndn(x, m);
    let (s1, c1, d1) = sncndn(y, 1.0 - m);
    let den = c1 * c1 + m * s * s * s1 * s1;
    JacobiParts {
        ns: Complex64::new(s * d1, c * d * s1 * c1),
        nc: Complex64::new(c * c1, -s * d * s1 * d1),
        nd: Complex64::new(d * c1 * d1, -m * s * c * s1),
        den,
    }
}

fn reduce(x: f64, period: f64) -> f64 {
    x - period * (x / period).round()
}

/// Carlson's symmetric integral `RF(x, y, z)` for complex arguments off the
/// negative real axis.
pub fn carlson_rf(x: Complex64, y: Complex64, z: Complex64) -> Complex64 {
    let (mut x, mut y, mut z) = (x, y, z);
    for _ in 0..64 {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * sy + sx * sz + sy * sz;
        x = (x + lambda) * 0.25;
        y = (y + lambda) * 0.25;
        z = (z + lambda) * 0.25;
        let a = (x + y + z) / 3.0;
        let dx = 1.0 - x / a;
        let dy = 1.0 - y / a;
        let dz = 1.0 - z / a;
        if dx.norm().max(dy.norm()).max(dz.norm()) < 1e-4 {
            let e2 = dx * dy - dz * dz;
            let e3 = dx * dy * dz;
            return (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0) / a.sqrt();
        }
    }
    let a = (x + y + z) / 3.0;
    1.0 / a.sqrt()
}

/// Inverse of `sn(. | m)` on the principal rectangle `[-K, K] x [-K', K']`.
pub fn arcsn(s: Complex64, m: f64) -> Complex64 {
    let s2 = s * s;
    s * carlson_rf(1.0 - s2, 1.0 - m * s2, Complex64::new(1.0, 0.0))
}

/// Möbius map `z -> (a z + b) / (c z + d)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mobius {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Mobius {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Mobius { a, b, c, d }
    }

    pub fn det(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    /// Image of `z`; `None` at the pole.
    pub fn apply(&self, z: Complex64) -> Option<Complex64> {
        let q = self.c * z + self.d;
        if q == Complex64::new(0.0, 0.0) {
            None
        } else {
            Some((self.a * z + self.b) / q)
        }
    }

    /// Image of the point `[p : q]` in homogeneous coordinates.
    pub fn apply_homogeneous(&self, p: Complex64, q: Complex64) -> (Complex64, Complex64) {
        (self.a * p + self.b * q, self.c * p + self.d * q)
    }

    pub fn image_of_infinity(&self) -> Option<Complex64> {
        if self.c == Complex64::new(0.0, 0.0) {
            None
        } else {
            Some(self.a / self.c)
        }
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let q = self.c * z + self.d;
        self.det() / (q * q)
    }

    pub fn inverse(&self) -> Mobius {
        Mobius::new(self.d, -self.b, -self.c, self.a)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Mobius) -> Mobius {
        Mobius::new(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )
    }

    /// The map sending finite `z1, z2, z3` to `0, 1, ∞`.
    fn to_zero_one_inf(z1: Complex64, z2: Complex64, z3: Complex64) -> Mobius {
        Mobius::new(z2 - z3, -z1 * (z2 - z3), z2 - z1, -z3 * (z2 - z1))
    }

    /// The unique map with `z_j -> w_j`, all points finite and distinct.
    pub fn from_three_points(z: [Complex64; 3], w: [Complex64; 3]) -> Mobius {
        let tz = Mobius::to_zero_one_inf(z[0], z[1], z[2]);
        let tw = Mobius::to_zero_one_inf(w[0], w[1], w[2]);
        tw.inverse().compose(&tz)
    }
}

/// `(a - c)(b - d) / ((a - d)(b - c))` for finite points.
pub fn cross_ratio(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    (a - c) * (b - d) / ((a - d) * (b - c))
}

/// Modulus `k` of the rectangle whose corners `-1, 1, 1/k, -1/k` have
/// cross-ratio `x = ((1 + k) / (1 - k))^2`.
pub fn modulus_from_cross_ratio(x: f64) -> Result<f64> {
    if !(x > 1.0) || !x.is_finite() {
        return Err(Error::invalid(format!("cross-ratio {x} not in (1, inf)")));
    }
    let s = x.sqrt();
    Ok((s - 1.0) / (s + 1.0))
}

/// Modulus `k` with `K(1 - k^2) / K(k^2) = ratio`, by bisection on `k`.
pub fn modulus_from_period_ratio(ratio: f64) -> Result<f64> {
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(Error::invalid(format!("period ratio {ratio} must be positive")));
    }
    let f = |k: f64| {
        let m = k * k;
        ellip_k(1.0 - m) / ellip_k(m) - ratio
    };
    let (mut lo, mut hi) = (1e-7f64, 1.0 - 1e-7);
    if f(lo) < 0.0 || f(hi) > 0.0 {
        return Err(Error::invalid(format!("period ratio {ratio} out of range")));
    }
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Spherical isometry from the upper half-plane onto the unit disk,
/// `U(ζ) = (1 + iζ)/(ζ + i)`. Boundary point `t(θ)` goes to `e^{iθ}`.
pub fn disk_chart() -> Mobius {
    let one = Complex64::new(1.0, 0.0);
    Mobius::new(I, one, one, I)
}

/// Conformal map of a checkerboard cell onto a hemisphere, extended to the
/// plane by reflection.
///
/// The upper reference cell is `[a, 2a] x [0, b]`. Cells `(ci, cj)` with
/// `ci + cj` odd are upper. Inside a cell the disk coordinate is
/// `u = V(sn(w))` on upper cells and `u = V(conj sn(w))` on lower cells,
/// with `w = (z - 1.5a)(2K/a)`.
#[derive(Clone, Debug)]
pub struct CellMap {
    pub a: f64,
    pub b: f64,
    pub k: f64,
    m: f64,
    kk: f64,
    kkp: f64,
    v: Mobius,
    v_conj: Mobius,
    scale: f64,
}

/// Disk coordinate of a point and the derivative of its holomorphic part.
#[derive(Clone, Copy, Debug)]
pub struct ChartValue {
    /// Disk coordinate of the image.
    pub u: Complex64,
    /// `g'(z)` where `u = g(z)` on upper cells and `u = conj g(z)` on lower.
    pub d: Complex64,
    pub upper: bool,
}

impl CellMap {
    /// Build from the cell width and the four corner angles on the unit
    /// circle (`midpoints[i]` is the image of the corner labelled `i + 1`).
    pub fn new(cell_width: f64, midpoints: [f64; 4]) -> Result<Self> {
        if !(cell_width > 0.0) {
            return Err(Error::invalid("cell width must be positive"));
        }
        let p: Vec<Complex64> = midpoints.iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
        let x = cross_ratio(p[2], p[3], p[0], p[1]);
        if x.im.abs() > 1e-9 * x.norm() {
            return Err(Error::invalid("corner points are not concyclic"));
        }
        let k = modulus_from_cross_ratio(x.re)?;
        let m = k * k;
        let kk = ellip_k(m);
        let kkp = ellip_k(1.0 - m);
        let one = Complex64::new(1.0, 0.0);
        let v = Mobius::from_three_points([-one, one, one / k], [p[2], p[3], p[0]]);
        let v_conj = Mobius::new(v.a.conj(), v.b.conj(), v.c.conj(), v.d.conj());
        Ok(CellMap {
            a: cell_width,
            b: cell_width * kkp / (2.0 * kk),
            k,
            m,
            kk,
            kkp,
            v,
            v_conj,
            scale: 2.0 * kk / cell_width,
        })
    }

    pub fn quarter_periods(&self) -> (f64, f64) {
        (self.kk, self.kkp)
    }

    /// The Möbius map `V` from the `sn` half-plane to the disk.
    pub fn disk_map(&self) -> Mobius {
        self.v
    }

    pub fn cell_of(&self, z: Complex64) -> (i64, i64) {
        ((z.re / self.a).floor() as i64, (z.im / self.b).floor() as i64)
    }

    pub fn is_upper(ci: i64, cj: i64) -> bool {
        (ci + cj).rem_euclid(2) == 1
    }

    /// Label (1..=4) of lattice vertex `(p, q)`.
    pub fn vertex_label(p: i64, q: i64) -> usize {
        match (p.rem_euclid(2), q.rem_euclid(2)) {
            (1, 1) => 2,
            (1, 0) => 3,
            (0, 1) => 1,
            _ => 4,
        }
    }

    pub fn jacobi(&self, z: Complex64) -> JacobiParts {
        let w = (z - Complex64::new(1.5 * self.a, 0.0)) * self.scale;
        jacobi_parts(w, self.m, self.kk, self.kkp)
    }

    /// Disk-chart value and derivative at `z`. Upper/lower is decided by
    /// the cell containing `z` (half-open cells).
    pub fn chart(&self, z: Complex64) -> ChartValue {
        let (ci, cj) = self.cell_of(z);
        self.chart_in_cell(z, Self::is_upper(ci, cj))
    }

    pub fn chart_in_cell(&self, z: Complex64, upper: bool) -> ChartValue {
        let j = self.jacobi(z);
        let den = Complex64::new(j.den, 0.0);
        let ncnd = j.nc * j.nd;
        if upper {
            let (p, q) = self.v.apply_homogeneous(j.ns, den);
            ChartValue { u: p / q, d: self.v.det() * ncnd / (q * q) * self.scale, upper }
        } else {
            let (p, _) = self.v.apply_homogeneous(j.ns.conj(), den);
            let (_, qc) = self.v_conj.apply_homogeneous(j.ns, den);
            ChartValue { u: p / qc.conj(), d: self.v.det().conj() * ncnd / (qc * qc) * self.scale, upper }
        }
    }

    /// Elliptic function `℘ = U⁻¹ ∘ V ∘ sn` in homogeneous form `[p : q]`
    /// together with the Wronskian factor for derivatives.
    fn wp_homogeneous(&self, z: Complex64) -> (Complex64, Complex64, Complex64) {
        let j = self.jacobi(z);
        let mm = disk_chart().inverse().compose(&self.v);
        let (p, q) = mm.apply_homogeneous(j.ns, Complex64::new(j.den, 0.0));
        (p, q, mm.det() * j.nc * j.nd * self.scale)
    }

    /// `℘(z)` and `℘'(z)`; `None` at poles.
    pub fn wp(&self, z: Complex64) -> (Option<Complex64>, Option<Complex64>) {
        let (p, q, w) = self.wp_homogeneous(z);
        if q.norm() <= 1e-300 {
            return (None, None);
        }
        (Some(p / q), Some(w / (q * q)))
    }

    /// `1/℘(z)` and its derivative, the chart near poles.
    pub fn wp_inverted(&self, z: Complex64) -> (Option<Complex64>, Option<Complex64>) {
        let (p, q, w) = self.wp_homogeneous(z);
        if p.norm() <= 1e-300 {
            return (None, None);
        }
        (Some(q / p), Some(-w / (p * p)))
    }

    /// Point of the upper reference cell with disk coordinate `u`, `|u| < 1`.
    pub fn reference_preimage(&self, u: Complex64) -> Complex64 {
        let s = self.v.inverse().apply(u).unwrap_or(Complex64::new(f64::INFINITY, 0.0));
        let w = arcsn(s, self.m);
        Complex64::new(1.5 * self.a, 0.0) + w / self.scale
    }

    /// Point on the boundary of the upper reference cell whose disk
    /// coordinate has argument `theta`, found by bisection along the edges.
    pub fn reference_edge_point(&self, theta: f64) -> Complex64 {
        let (a, b) = (self.a, self.b);
        let corners = [
            Complex64::new(a, 0.0),
            Complex64::new(2.0 * a, 0.0),
            Complex64::new(2.0 * a, b),
            Complex64::new(a, b),
        ];
        // Corners are labelled 3, 4, 1, 2 in this order.
        let labels = [3usize, 4, 1, 2];
        let arg = |z: Complex64| self.chart_in_cell(z, true).u.arg();
        for e in 0..4 {
            let (p0, p1) = (corners[e], corners[(e + 1) % 4]);
            let t0 = self.corner_angle(labels[e]);
            let mut t1 = self.corner_angle(labels[(e + 1) % 4]);
            while t1 <= t0 {
                t1 += 2.0 * PI;
            }
            let th = t0 + (theta - t0).rem_euclid(2.0 * PI);
            if th > t1 {
                continue;
            }
            let unwrap = |x: f64| {
                let mut x = x;
                while x < t0 - PI {
                    x += 2.0 * PI;
                }
                while x > t0 + PI + (t1 - t0) {
                    x -= 2.0 * PI;
                }
                x
            };
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let p = p0 + (p1 - p0) * mid;
                if unwrap(arg(p)) < th {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = 0.5 * (lo + hi);
            let mut p = p0 + (p1 - p0) * t;
            // Pin the coordinate that is constant along the edge.
            if e % 2 == 0 {
                p.im = p0.im;
            } else {
                p.re = p0.re;
            }
            return p;
        }
        unreachable!("angle {theta} not on the cell boundary")
    }

    fn corner_angle(&self, label: usize) -> f64 {
        let one = Complex64::new(1.0, 0.0);
        let s = match label {
            1 => one / self.k,
            2 => -one / self.k,
            3 => -one,
            _ => one,
        };
        self.v.apply(s).map(|u| u.arg()).unwrap_or(FRAC_PI_2)
    }

    /// Center of the upper reference cell (disk coordinate 0).
    pub fn reference_center(&self) -> Complex64 {
        self.reference_preimage(Complex64::new(0.0, 0.0))
    }

    /// Map a point of the upper reference cell into cell `(ci, cj)` by the
    /// reflections that generate the extension.
    pub fn reflect_into(&self, z: Complex64, ci: i64, cj: i64) -> Complex64 {
        let x = if ci.rem_euclid(2) == 1 { z.re + (ci - 1) as f64 * self.a } else { (ci + 2) as f64 * self.a - z.re };
        let y = if cj.rem_euclid(2) == 0 { z.im + cj as f64 * self.b } else { (cj + 1) as f64 * self.b - z.im };
        Complex64::new(x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn complete_integral_values() {
        assert!((ellip_k(0.0) - FRAC_PI_2).abs() < 1e-15);
        // K(1/2) = Γ(1/4)^2 / (4 sqrt(pi))
        assert!((ellip_k(0.5) - 1.854_074_677_301_372).abs() < 1e-14);
    }

    #[test]
    fn real_jacobi_identities() {
        for &m in &[0.0, 0.1, 0.5, 0.9, 0.99] {
            let kk = ellip_k(m);
            let (s, c, d) = sncndn(kk, m);
            assert!((s - 1.0).abs() < 1e-13 && c.abs() < 1e-7 && (d - (1.0 - m).sqrt()).abs() < 1e-12, "m={m}");
            for &u in &[0.1, 0.7, 2.3, -1.1] {
                let (s, c, d) = sncndn(u, m);
                assert!((s * s + c * c - 1.0).abs() < 1e-14);
                assert!((d * d + m * s * s - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn complex_sn_derivative_and_inverse() {
        let m = 0.3;
        let (kk, kkp) = (ellip_k(m), ellip_k(1.0 - m));
        let z = c(0.4, 0.9);
        let j = jacobi_parts(z, m, kk, kkp);
        let h = 1e-5;
        let jp = jacobi_parts(z + h, m, kk, kkp);
        let jm = jacobi_parts(z - h, m, kk, kkp);
        let fd = (jp.sn() - jm.sn()) / (2.0 * h);
        assert!((fd - j.cn() * j.dn()).norm() < 1e-8);
        assert!((j.sn() * j.sn() + j.cn() * j.cn() - 1.0).norm() < 1e-13);
        let back = arcsn(j.sn(), m);
        assert!((back - z).norm() < 1e-12, "{back}");
        // i K' is a pole
        let p = jacobi_parts(c(0.0, kkp), m, kk, kkp);
        assert!(p.den.abs() < 1e-12);
    }

    #[test]
    fn mobius_three_points() {
        let z = [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 2.0)];
        let w = [c(1.0, 1.0), c(-1.0, 0.5), c(3.0, -2.0)];
        let t = Mobius::from_three_points(z, w);
        for i in 0..3 {
            assert!((t.apply(z[i]).unwrap() - w[i]).norm() < 1e-12);
        }
        let id = t.inverse().compose(&t);
        let p = c(0.3, -0.7);
        assert!((id.apply(p).unwrap() - p).norm() < 1e-12);
    }

    #[test]
    fn default_corners_give_square_cells() {
        let mids = [PI / 4.0, 3.0 * PI / 4.0, 5.0 * PI / 4.0, 7.0 * PI / 4.0];
        let cm = CellMap::new(1.0, mids).unwrap();
        assert!((cm.k - (3.0 - 2.0 * 2f64.sqrt())).abs() < 1e-14);
        assert!((cm.b - 1.0).abs() < 1e-12);
        let kb = modulus_from_period_ratio(2.0).unwrap();
        assert!((kb - cm.k).abs() < 1e-12);
    }

    #[test]
    fn chart_corners_and_edges() {
        let mids = [0.5, 2.0, 3.5, 5.2];
        let cm = CellMap::new(2.0, mids).unwrap();
        let (a, b) = (cm.a, cm.b);
        let eps = 1e-9;
        let inner = [c(a + eps, eps), c(2.0 * a - eps, eps), c(2.0 * a - eps, b - eps), c(a + eps, b - eps)];
        let want = [mids[2], mids[3], mids[0], mids[1]];
        for (z, t) in inner.iter().zip(want) {
            let u = cm.chart_in_cell(*z, true).u;
            assert!((u - Complex64::from_polar(1.0, t)).norm() < 1e-6, "{u} vs {t}");
        }
        let center = cm.reference_center();
        assert!(cm.chart_in_cell(center, true).u.norm() < 1e-12);
        for &th in &[0.1, 1.3, 2.9, 4.4] {
            let p = cm.reference_edge_point(th);
            let u = cm.chart_in_cell(p, true).u;
            assert!((u.arg() - Complex64::from_polar(1.0, th).arg()).abs() < 1e-9);
            assert!((u.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn lower_chart_is_reflection() {
        let cm = CellMap::new(1.0, [0.7, 2.2, 3.9, 5.5]).unwrap();
        let z = c(1.37, 0.41);
        let up = cm.chart_in_cell(z, true);
        let zr = c(z.re, -z.im);
        let lo = cm.chart_in_cell(zr, false);
        assert!((up.u - lo.u).norm() < 1e-12);
        // d is the derivative of the holomorphic g with u = conj g
        let h = 1e-6;
        let g = |z: Complex64| cm.chart_in_cell(z, false).u.conj();
        let fd = (g(zr + h) - g(zr - h)) / (2.0 * h);
        assert!((fd - lo.d).norm() < 1e-6 * lo.d.norm().max(1.0));
    }
}
