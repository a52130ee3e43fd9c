//! Face-centred quadrature used by every weak form.
//!
//! Each quadrature point sits on a cell face between two neighbouring nodes.
//! The derivative across the face is the compact two-point difference; the
//! derivative along the face is the average of the nodal centred differences
//! at the two neighbours. The resulting discrete gradient annihilates only
//! constants, and every bilinear form `Σ_q ω_q ρ₀(q) Gu·Gv` is symmetric and
//! never divides by ρ₀.

use crate::calculus::{x1_stencil, x2_stencil};
use crate::grid::{Grid, WeightField};

/// Sparse operator whose rows are sums of weighted differences
/// `Σ w (u_a − u_b)`, so constants are annihilated exactly.
#[derive(Clone, Debug)]
pub struct DifferenceRows {
    pub ncols: usize,
    /// Per row: `(a, b, w)` triples.
    pub rows: Vec<Vec<(usize, usize, f64)>>,
}

impl DifferenceRows {
    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(a, b, w)| w * (x[a] - x[b])).sum())
            .collect()
    }

    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (row, &yr) in self.rows.iter().zip(y) {
            for &(a, b, w) in row {
                out[a] += w * yr;
                out[b] -= w * yr;
            }
        }
        out
    }

    /// Row `r` as merged `(column, coefficient)` pairs.
    pub fn expanded_row(&self, r: usize) -> Vec<(usize, f64)> {
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(2 * self.rows[r].len());
        for &(a, b, w) in &self.rows[r] {
            entries.push((a, w));
            entries.push((b, -w));
        }
        entries.sort_by_key(|e| e.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (c, w) in entries {
            match out.last_mut() {
                Some(last) if last.0 == c => last.1 += w,
                _ => out.push((c, w)),
            }
        }
        out
    }
}

/// Quadrature points on the faces of the node lattice with the discrete
/// gradient evaluated there.
#[derive(Clone, Debug)]
pub struct FaceQuadrature {
    pub grid: Grid,
    /// `(x1, x2)` of every point.
    pub points: Vec<(f64, f64)>,
    /// Quadrature weight `ω_q`.
    pub weights: Vec<f64>,
    /// ρ₀ evaluated at the point.
    pub rho: Vec<f64>,
    /// Rows `2q` and `2q + 1` give `∂₁` and `∂₂` at point `q`.
    pub gradient: DifferenceRows,
}

impl FaceQuadrature {
    pub fn new(w: &WeightField) -> Self {
        let grid = w.grid;
        let (n1, n2) = (grid.n1, grid.n2);
        let d1 = x1_stencil(grid.h1, 1, 2);
        let d2: Vec<_> = (0..n2).map(|j| x2_stencil(n2, grid.h2, j, 1, 2)).collect();

        // nodal centred differences as (neighbour, node, weight) triples,
        // halved for the two-node average
        let nodal_d1 = |i: usize, j: usize| {
            d1.iter().map(move |&(o, c)| {
                let ii = (i as isize + o).rem_euclid(n1 as isize) as usize;
                (grid.index(ii, j), grid.index(i, j), 0.5 * c)
            })
        };
        let nodal_d2 = |i: usize, j: usize| {
            d2[j].iter().map(move |&(o, c)| {
                (grid.index(i, (j as isize + o) as usize), grid.index(i, j), 0.5 * c)
            })
        };

        let nq = n1 * n2 + n1 * (n2 - 1);
        let omega = 0.5 * grid.cell_area();
        let mut points = Vec::with_capacity(nq);
        let mut rows = Vec::with_capacity(2 * nq);

        for j in 0..n2 {
            for i in 0..n1 {
                let ip = (i + 1) % n1;
                points.push(((i as f64 + 0.5) * grid.h1, grid.x2(j)));
                rows.push(vec![(grid.index(ip, j), grid.index(i, j), 1.0 / grid.h1)]);
                rows.push(nodal_d2(i, j).chain(nodal_d2(ip, j)).collect());
            }
        }
        for j in 0..n2 - 1 {
            for i in 0..n1 {
                points.push((grid.x1(i), (j as f64 + 1.0) * grid.h2));
                rows.push(nodal_d1(i, j).chain(nodal_d1(i, j + 1)).collect());
                rows.push(vec![(grid.index(i, j + 1), grid.index(i, j), 1.0 / grid.h2)]);
            }
        }

        let rho = points.iter().map(|&(x1, x2)| w.eval(x1, x2)).collect();
        FaceQuadrature {
            grid,
            points,
            weights: vec![omega; nq],
            rho,
            gradient: DifferenceRows {
                ncols: grid.len(),
                rows,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(∂₁u, ∂₂u)` at every point.
    pub fn grad(&self, u: &[f64]) -> Vec<[f64; 2]> {
        let flat = self.gradient.apply(u);
        flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
    }

    /// `Σ_q ω_q ρ₀(q)^power |Gu|²`.
    pub fn weighted_dirichlet(&self, u: &[f64], power: i32) -> f64 {
        self.grad(u)
            .iter()
            .zip(self.weights.iter().zip(&self.rho))
            .map(|(g, (w, r))| w * r.powi(power) * (g[0] * g[0] + g[1] * g[1]))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Profile;
    use std::f64::consts::PI;

    #[test]
    fn gradient_is_exact_on_linear_fields_and_kills_constants() {
        let w = WeightField::new(Profile::Sine, Grid::new(8, 8).unwrap()).unwrap();
        let q = FaceQuadrature::new(&w);
        assert_eq!(q.len(), 8 * 8 + 8 * 7);
        let ones = vec![1.0; w.grid.len()];
        assert!(q.gradient.apply(&ones).iter().all(|v| *v == 0.0));
        let lin = w.grid.sample(|_, x2| 3.0 * x2);
        for g in q.grad(&lin) {
            assert!((g[0]).abs() < 1e-13 && (g[1] - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_form_converges() {
        // ∫ sin(πx2) |∇ sin(2πx1)|² = 4π²·½·(2/π)
        let exact = 4.0 * PI;
        let errs: Vec<f64> = [16, 32]
            .iter()
            .map(|&n| {
                let w = WeightField::new(Profile::Sine, Grid::new(n, n).unwrap()).unwrap();
                let q = FaceQuadrature::new(&w);
                let u = w.grid.sample(|x1, _| (2.0 * PI * x1).sin());
                (q.weighted_dirichlet(&u, 1) - exact).abs()
            })
            .collect();
        assert!(errs[1] < 0.3 * errs[0], "{errs:?}");
    }

    #[test]
    fn transpose_is_adjoint() {
        let w = WeightField::new(Profile::Parabolic, Grid::new(6, 5).unwrap()).unwrap();
        let q = FaceQuadrature::new(&w);
        let x: Vec<f64> = (0..w.grid.len()).map(|k| (k as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..q.gradient.nrows()).map(|k| (k as f64 * 0.11).cos()).collect();
        let lhs: f64 = q.gradient.apply(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = q.gradient.apply_transpose(&y).iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
