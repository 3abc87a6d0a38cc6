//! Bilinear finite elements for `div(A ∇u) = 0` on structured grids.
//!
//! Cells carry a constant symmetric tensor `A = [a11, a12, a22]`. The
//! assembled operator is a 9-point stencil per node; Dirichlet nodes are
//! eliminated and the rest solved by Jacobi-preconditioned CG. Boundaries
//! without Dirichlet data are natural (no flux).

use crate::{Error, Result};

/// Symmetric 2x2 tensor `[a11, a12, a22]`.
pub type Tensor = [f64; 3];

pub const IDENTITY: Tensor = [1.0, 0.0, 1.0];

#[derive(Clone, Debug)]
pub struct GridProblem {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    /// Identify the columns `x = 0` and `x = nx hx`.
    pub periodic_x: bool,
    /// Per cell, row-major in `y`.
    pub tensor: Vec<Tensor>,
    /// Per cell; inactive cells are holes.
    pub active: Option<Vec<bool>>,
    /// Per node.
    pub dirichlet: Vec<Option<f64>>,
}

#[derive(Clone, Debug)]
pub struct FemSolution {
    pub u: Vec<f64>,
    pub energy: f64,
    pub iterations: usize,
    pub relative_residual: f64,
}

impl GridProblem {
    pub fn new(nx: usize, ny: usize, hx: f64, hy: f64, periodic_x: bool) -> Self {
        let nodes = if periodic_x { nx } else { nx + 1 } * (ny + 1);
        GridProblem {
            nx,
            ny,
            hx,
            hy,
            periodic_x,
            tensor: vec![IDENTITY; nx * ny],
            active: None,
            dirichlet: vec![None; nodes],
        }
    }

    pub fn nodes_x(&self) -> usize {
        if self.periodic_x {
            self.nx
        } else {
            self.nx + 1
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes_x() * (self.ny + 1)
    }

    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nodes_x() + ix % self.nodes_x()
    }

    fn cell_active(&self, c: usize) -> bool {
        self.active.as_ref().is_none_or(|a| a[c])
    }

    fn cell_nodes(&self, cx: usize, cy: usize) -> [usize; 4] {
        [
            self.node_index(cx, cy),
            self.node_index(cx + 1, cy),
            self.node_index(cx, cy + 1),
            self.node_index(cx + 1, cy + 1),
        ]
    }
}

/// Element matrices `(Kxx, Kyy, Kxy)` with `K_e = a11 Kxx + a22 Kyy +
/// a12 (Kxy + Kxyᵀ)`, local order `(0,0), (1,0), (0,1), (1,1)`.
fn element_bases(hx: f64, hy: f64) -> [[[f64; 4]; 4]; 3] {
    let g = 0.5 / 3f64.sqrt();
    let pts = [0.5 - g, 0.5 + g];
    let mut out = [[[0.0; 4]; 4]; 3];
    for &s in &pts {
        for &t in &pts {
            // gradients of the four shape functions at (s, t)
            let dx = [-(1.0 - t) / hx, (1.0 - t) / hx, -t / hx, t / hx];
            let dy = [-(1.0 - s) / hy, -s / hy, (1.0 - s) / hy, s / hy];
            let w = 0.25 * hx * hy;
            for i in 0..4 {
                for j in 0..4 {
                    out[0][i][j] += w * dx[i] * dx[j];
                    out[1][i][j] += w * dy[i] * dy[j];
                    out[2][i][j] += w * dx[i] * dy[j];
                }
            }
        }
    }
    out
}

fn element_matrix(b: &[[[f64; 4]; 4]; 3], a: &Tensor) -> [[f64; 4]; 4] {
    let mut k = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            k[i][j] = a[0] * b[0][i][j] + a[2] * b[1][i][j] + a[1] * (b[2][i][j] + b[2][j][i]);
        }
    }
    k
}

const OFFSETS: [(i64, i64); 9] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (0, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

struct Operator {
    nxn: usize,
    ny: usize,
    periodic: bool,
    stencil: Vec<[f64; 9]>,
}

impl Operator {
    fn assemble(p: &GridProblem) -> Self {
        let nxn = p.nodes_x();
        let mut stencil = vec![[0.0; 9]; p.node_count()];
        let bases = element_bases(p.hx, p.hy);
        let local = [(0i64, 0i64), (1, 0), (0, 1), (1, 1)];
        for cy in 0..p.ny {
            for cx in 0..p.nx {
                let c = cy * p.nx + cx;
                if !p.cell_active(c) {
                    continue;
                }
                let ke = element_matrix(&bases, &p.tensor[c]);
                let nodes = p.cell_nodes(cx, cy);
                for i in 0..4 {
                    for j in 0..4 {
                        let dx = local[j].0 - local[i].0;
                        let dy = local[j].1 - local[i].1;
                        let k = ((dy + 1) * 3 + dx + 1) as usize;
                        stencil[nodes[i]][k] += ke[i][j];
                    }
                }
            }
        }
        Operator { nxn, ny: p.ny, periodic: p.periodic_x, stencil }
    }

    fn neighbour(&self, idx: usize, k: usize) -> Option<usize> {
        let (ix, iy) = ((idx % self.nxn) as i64, (idx / self.nxn) as i64);
        let (dx, dy) = OFFSETS[k];
        let (mut x, y) = (ix + dx, iy + dy);
        if y < 0 || y > self.ny as i64 {
            return None;
        }
        if self.periodic {
            x = x.rem_euclid(self.nxn as i64);
        } else if x < 0 || x >= self.nxn as i64 {
            return None;
        }
        Some(y as usize * self.nxn + x as usize)
    }

    /// `y = K x`.
    fn apply(&self, x: &[f64], y: &mut [f64], nbr: &[[u32; 9]]) {
        for (i, (s, nb)) in self.stencil.iter().zip(nbr).enumerate() {
            let mut acc = 0.0;
            for k in 0..9 {
                if s[k] != 0.0 {
                    acc += s[k] * x[nb[k] as usize];
                }
            }
            y[i] = acc;
        }
    }
}

/// Solve with `initial` as the starting guess for free nodes.
pub fn solve(p: &GridProblem, initial: Option<&[f64]>, tol: f64, max_iter: usize) -> Result<FemSolution> {
    let n = p.node_count();
    if p.tensor.len() != p.nx * p.ny || p.dirichlet.len() != n {
        return Err(Error::invalid("problem arrays do not match the grid"));
    }
    if let Some((c, _)) = p.tensor.iter().enumerate().find(|(_, a)| !(a[0] > 0.0 && a[0] * a[2] - a[1] * a[1] > 0.0)) {
        return Err(Error::Numerical(format!("tensor of cell {c} is not positive definite")));
    }
    let op = Operator::assemble(p);
    let nbr: Vec<[u32; 9]> = (0..n)
        .map(|i| std::array::from_fn(|k| op.neighbour(i, k).unwrap_or(i) as u32))
        .collect();
    let free: Vec<bool> = (0..n).map(|i| p.dirichlet[i].is_none() && op.stencil[i][4] > 0.0).collect();
    let mut u: Vec<f64> = match initial {
        Some(x) if x.len() == n => x.to_vec(),
        Some(_) => return Err(Error::invalid("initial guess has the wrong length")),
        None => vec![0.0; n],
    };
    for i in 0..n {
        if let Some(v) = p.dirichlet[i] {
            u[i] = v;
        } else if !free[i] {
            u[i] = 0.0;
        }
    }
    let mut tmp = vec![0.0; n];
    op.apply(&u, &mut tmp, &nbr);
    let mut r: Vec<f64> = (0..n).map(|i| if free[i] { -tmp[i] } else { 0.0 }).collect();
    let dinv: Vec<f64> = (0..n).map(|i| if free[i] { 1.0 / op.stencil[i][4] } else { 0.0 }).collect();
    // reference scale: residual of the zero guess on free nodes
    let mut scale = {
        let mut z = u.clone();
        for i in 0..n {
            if free[i] {
                z[i] = 0.0;
            }
        }
        op.apply(&z, &mut tmp, &nbr);
        (0..n).filter(|&i| free[i]).map(|i| tmp[i] * tmp[i]).sum::<f64>().sqrt()
    };
    if scale == 0.0 {
        scale = 1.0;
    }
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(a, b)| a * b).collect();
    let mut pvec = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut rnorm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut it = 0;
    while rnorm > tol * scale {
        if it >= max_iter {
            return Err(Error::NonConvergence { iterations: it, last_update: rnorm / scale });
        }
        op.apply(&pvec, &mut tmp, &nbr);
        let mut pap = 0.0;
        for i in 0..n {
            if !free[i] {
                tmp[i] = 0.0;
            }
            pap += pvec[i] * tmp[i];
        }
        if !(pap > 0.0) {
            return Err(Error::Numerical("operator is not positive definite".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            u[i] += alpha * pvec[i];
            r[i] -= alpha * tmp[i];
            z[i] = r[i] * dinv[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            pvec[i] = z[i] + beta * pvec[i];
        }
        rnorm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        it += 1;
    }
    let energy = energy(p, &u);
    Ok(FemSolution { u, energy, iterations: it, relative_residual: rnorm / scale })
}

/// Dirichlet energy `∫ ∇uᵀ A ∇u` of a nodal function.
pub fn energy(p: &GridProblem, u: &[f64]) -> f64 {
    let bases = element_bases(p.hx, p.hy);
    let mut e = 0.0;
    for cy in 0..p.ny {
        for cx in 0..p.nx {
            let c = cy * p.nx + cx;
            if !p.cell_active(c) {
                continue;
            }
            let ke = element_matrix(&bases, &p.tensor[c]);
            let v = p.cell_nodes(cx, cy).map(|i| u[i]);
            for i in 0..4 {
                for j in 0..4 {
                    e += v[i] * ke[i][j] * v[j];
                }
            }
        }
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip(nx: usize, ny: usize, w: f64, h: f64, a: Tensor) -> GridProblem {
        let mut p = GridProblem::new(nx, ny, w / nx as f64, h / ny as f64, false);
        p.tensor = vec![a; nx * ny];
        for iy in 0..=ny {
            let (l, r) = (p.node_index(0, iy), p.node_index(nx, iy));
            p.dirichlet[l] = Some(0.0);
            p.dirichlet[r] = Some(1.0);
        }
        p
    }

    #[test]
    fn linear_solution_is_exact() {
        let p = strip(16, 8, 2.0, 1.0, IDENTITY);
        let s = solve(&p, None, 1e-12, 1000).unwrap();
        assert!((s.energy - 0.5).abs() < 1e-10);
        for iy in 0..=8 {
            for ix in 0..=16 {
                assert!((s.u[p.node_index(ix, iy)] - ix as f64 / 16.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn diagonal_tensor_scales_energy() {
        let p = strip(10, 10, 1.0, 1.0, [3.0, 0.0, 0.5]);
        assert!((solve(&p, None, 1e-12, 1000).unwrap().energy - 3.0).abs() < 1e-9);
    }

    #[test]
    fn off_diagonal_tensor_with_neumann_sides() {
        // Energy lies between the Schur complement a11 - a12²/a22 (free
        // tilt) and a11 (linear profile), and is even in a12.
        let a = [2.0, 0.6, 1.0];
        let e = |n, a12| solve(&strip(n, n, 1.0, 1.0, [a[0], a12, a[2]]), None, 1e-12, 5000).unwrap().energy;
        let (e32, e64) = (e(32, a[1]), e(64, a[1]));
        assert!(e64 > a[0] - a[1] * a[1] / a[2] && e64 < a[0]);
        assert!((e32 - e64).abs() < 1e-2 * e64);
        assert!((e(32, -a[1]) - e32).abs() < 1e-9);
    }

    #[test]
    fn periodic_strip() {
        let mut p = GridProblem::new(12, 10, 0.5, 0.1, true);
        for ix in 0..12 {
            let (b, t) = (p.node_index(ix, 0), p.node_index(ix, 10));
            p.dirichlet[b] = Some(0.0);
            p.dirichlet[t] = Some(1.0);
        }
        let s = solve(&p, None, 1e-12, 1000).unwrap();
        assert!((s.energy - 6.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_indefinite_tensor() {
        let p = strip(4, 4, 1.0, 1.0, [1.0, 2.0, 1.0]);
        assert!(solve(&p, None, 1e-12, 100).is_err());
    }
}
