//! Eigenbasis of the degenerate-singular operator `𝓛w = −div(ρ₀Dw)/ρ₀ + w`.
//!
//! The operator is only ever used through its weak form
//! `B[w, φ] = ∫ρ₀(Dw·Dφ + wφ)`, so the singular factor `1/ρ₀` cancels against
//! the measure `ρ₀dx` and no division by ρ₀ occurs. No boundary condition is
//! imposed.

use faer::{Mat, Side};
use serde::Serialize;

use crate::calculus::{gradient, mixed_derivative, weighted_inner};
use crate::error::{Error, Result};
use crate::grid::{Grid, WeightField};
use crate::quadrature::FaceQuadrature;

/// Relative eigenvalue gap below which two modes are treated as degenerate.
pub const CLUSTER_TOLERANCE: f64 = 1e-8;
/// Residual above which the eigensolve is reported as failed.
pub const RESIDUAL_LIMIT: f64 = 1e-6;

/// Stiffness-plus-mass matrix `A` and lumped mass `M` of the weak form.
#[derive(Clone, Debug)]
pub struct OperatorPair {
    pub grid: Grid,
    /// `A_ab = Σ_q ω_q ρ₀(q) Gφ_a·Gφ_b + M_ab`
    pub a: Mat<f64>,
    /// Diagonal of `M`: `ρ₀(node)·h1·h2`.
    pub mass: Vec<f64>,
    pub quadrature: FaceQuadrature,
}

impl OperatorPair {
    pub fn dofs(&self) -> usize {
        self.mass.len()
    }

    pub fn mass_matrix(&self) -> Mat<f64> {
        Mat::from_fn(self.dofs(), self.dofs(), |i, j| if i == j { self.mass[i] } else { 0.0 })
    }

    /// `A x`
    pub fn apply_a(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dofs())
            .map(|i| (0..self.dofs()).map(|j| self.a[(i, j)] * x[j]).sum())
            .collect()
    }
}

/// Assembles `A` and `M` on the grid of `w`.
pub fn assemble_operator(w: &WeightField, grid: &Grid) -> Result<OperatorPair> {
    if *grid != w.grid {
        return Err(Error::GridMismatch {
            expected: w.grid.len(),
            found: grid.len(),
        });
    }
    let quadrature = FaceQuadrature::new(w);
    let n = grid.len();
    let mut a = Mat::<f64>::zeros(n, n);
    for r in 0..quadrature.gradient.nrows() {
        let c = quadrature.weights[r / 2] * quadrature.rho[r / 2];
        let row = quadrature.gradient.expanded_row(r);
        for &(p, cp) in &row {
            for &(s, cs) in &row {
                a[(p, s)] += c * (cp * cs);
            }
        }
    }
    let mass: Vec<f64> = w.nodes.iter().map(|r| r * grid.cell_area()).collect();
    for (i, m) in mass.iter().enumerate() {
        a[(i, i)] += m;
    }
    Ok(OperatorPair {
        grid: *grid,
        a,
        mass,
        quadrature,
    })
}

/// Eigenpairs `A w = σ M w`, M-orthonormal, ascending σ.
#[derive(Clone, Debug)]
pub struct SpectralBasis {
    pub grid: Grid,
    /// Columns are the nodal mode vectors `w_l`.
    pub modes: Mat<f64>,
    pub sigma: Vec<f64>,
    pub mass: Vec<f64>,
}

impl SpectralBasis {
    pub fn n_modes(&self) -> usize {
        self.sigma.len()
    }

    pub fn mode(&self, l: usize) -> Vec<f64> {
        (0..self.modes.nrows()).map(|i| self.modes[(i, l)]).collect()
    }

    /// `Wᵀ M u` (L²_ρ₀ projection coefficients).
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        (0..self.n_modes())
            .map(|l| {
                (0..u.len())
                    .map(|i| self.modes[(i, l)] * self.mass[i] * u[i])
                    .sum()
            })
            .collect()
    }

    /// `Σ_l λ_l w_l`
    pub fn reconstruct(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.modes.nrows()];
        for (l, c) in coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += c * self.modes[(i, l)];
            }
        }
        out
    }

    /// Keeps the first `n` modes.
    pub fn truncate(&self, n: usize) -> SpectralBasis {
        let n = n.min(self.n_modes());
        SpectralBasis {
            grid: self.grid,
            modes: self.modes.subcols(0, n).to_owned(),
            sigma: self.sigma[..n].to_vec(),
            mass: self.mass.clone(),
        }
    }
}

fn in_same_cluster(a: f64, b: f64) -> bool {
    (a - b).abs() <= CLUSTER_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// Smallest count `≥ n` that does not split a degenerate cluster.
pub fn cluster_complete_count(sigma: &[f64], n: usize) -> usize {
    let mut n = n.min(sigma.len());
    while n > 0 && n < sigma.len() && in_same_cluster(sigma[n - 1], sigma[n]) {
        n += 1;
    }
    n
}

fn full_eigensolve(op: &OperatorPair) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = op.dofs();
    let s: Vec<f64> = op.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let b = Mat::from_fn(n, n, |i, j| op.a[(i, j)] * (s[i] * s[j]));
    let evd = b
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("symmetric eigensolve failed: {e:?}")))?;
    let sigma: Vec<f64> = (0..n).map(|l| evd.S()[l]).collect();
    Ok((sigma, evd.U().to_owned()))
}

fn orthonormalize_cluster(y: &mut Mat<f64>, cols: std::ops::Range<usize>) {
    let n = y.nrows();
    for _ in 0..2 {
        for c in cols.clone() {
            for p in cols.start..c {
                let dot: f64 = (0..n).map(|i| y[(i, c)] * y[(i, p)]).sum();
                for i in 0..n {
                    let v = y[(i, p)];
                    y[(i, c)] -= dot * v;
                }
            }
            let norm = (0..n).map(|i| y[(i, c)].powi(2)).sum::<f64>().sqrt();
            for i in 0..n {
                y[(i, c)] /= norm;
            }
        }
    }
}

fn build_basis(op: &OperatorPair, sigma: Vec<f64>, mut y: Mat<f64>, count: usize) -> Result<SpectralBasis> {
    let n = op.dofs();
    let mut start = 0;
    while start < count {
        let mut end = start + 1;
        while end < sigma.len() && in_same_cluster(sigma[end - 1], sigma[end]) {
            end += 1;
        }
        if end - start > 1 {
            orthonormalize_cluster(&mut y, start..end);
        }
        start = end;
    }
    for l in 0..count {
        let mut best = 0;
        for i in 1..n {
            if y[(i, l)].abs() > y[(best, l)].abs() {
                best = i;
            }
        }
        if y[(best, l)] < 0.0 {
            for i in 0..n {
                y[(i, l)] = -y[(i, l)];
            }
        }
    }
    let modes = Mat::from_fn(n, count, |i, l| y[(i, l)] / op.mass[i].sqrt());
    let basis = SpectralBasis {
        grid: op.grid,
        modes,
        sigma: sigma[..count].to_vec(),
        mass: op.mass.clone(),
    };
    let residuals = eigen_residuals(&basis, op);
    let worst = residuals.iter().cloned().fold(0.0, f64::max);
    if !(worst <= RESIDUAL_LIMIT) {
        return Err(Error::Eigen(format!(
            "eigenpairs did not converge, residual norms {residuals:?}"
        )));
    }
    Ok(basis)
}

fn check_count(op: &OperatorPair, n_modes: usize) -> Result<()> {
    if n_modes == 0 || n_modes > op.dofs() {
        return Err(Error::InvalidArgument(format!(
            "n_modes must be in 1..={}, got {n_modes}",
            op.dofs()
        )));
    }
    Ok(())
}

/// The `n_modes` lowest eigenpairs.
pub fn solve_eigenbasis(op: &OperatorPair, n_modes: usize) -> Result<SpectralBasis> {
    check_count(op, n_modes)?;
    let (sigma, y) = full_eigensolve(op)?;
    build_basis(op, sigma, y, n_modes)
}

/// At least `n_modes` eigenpairs, extended so that no degenerate cluster is
/// split by the truncation.
pub fn solve_eigenbasis_complete(op: &OperatorPair, n_modes: usize) -> Result<SpectralBasis> {
    check_count(op, n_modes)?;
    let (sigma, y) = full_eigensolve(op)?;
    let count = cluster_complete_count(&sigma, n_modes);
    build_basis(op, sigma, y, count)
}

/// `‖A w_l − σ_l M w_l‖₂ / ‖M w_l‖₂` per mode.
pub fn eigen_residuals(basis: &SpectralBasis, op: &OperatorPair) -> Vec<f64> {
    let aw = &op.a * &basis.modes;
    (0..basis.n_modes())
        .map(|l| {
            let (mut r, mut m) = (0.0, 0.0);
            for i in 0..op.dofs() {
                let mw = op.mass[i] * basis.modes[(i, l)];
                r += (aw[(i, l)] - basis.sigma[l] * mw).powi(2);
                m += mw * mw;
            }
            (r / m).sqrt()
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct BasisReport {
    /// `max |WᵀMW − I|`
    pub orthonormality_defect: f64,
    /// Entry of `WᵀMW − I` with the largest magnitude.
    pub worst_pair: (usize, usize),
    /// Off-diagonal `max |WᵀAW|`.
    pub stiffness_off_diagonal: f64,
    /// `max |WᵀAW − WᵀMW − diag(σ − 1)|`
    pub spectral_identity_defect: f64,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Orthonormality, diagonalisation and residual diagnostics.
pub fn verify_basis(basis: &SpectralBasis, op: &OperatorPair) -> BasisReport {
    let n = basis.n_modes();
    let w = &basis.modes;
    let mw = Mat::from_fn(op.dofs(), n, |i, l| op.mass[i] * w[(i, l)]);
    let gram = w.transpose() * &mw;
    let stiff = w.transpose() * (&op.a * w);
    let mut report = BasisReport {
        orthonormality_defect: 0.0,
        worst_pair: (0, 0),
        stiffness_off_diagonal: 0.0,
        spectral_identity_defect: 0.0,
        residuals: eigen_residuals(basis, op),
        max_residual: 0.0,
    };
    report.max_residual = report.residuals.iter().cloned().fold(0.0, f64::max);
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            let d = (gram[(i, j)] - delta).abs();
            if d > report.orthonormality_defect {
                report.orthonormality_defect = d;
                report.worst_pair = (i, j);
            }
            if i != j {
                report.stiffness_off_diagonal = report.stiffness_off_diagonal.max(stiff[(i, j)].abs());
            }
            let expect = if i == j { basis.sigma[i] - 1.0 } else { 0.0 };
            report.spectral_identity_defect = report
                .spectral_identity_defect
                .max((stiff[(i, j)] - gram[(i, j)] - expect).abs());
        }
    }
    report
}

/// One weighted norm in the eigenfunction regularity ladder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RegularityTerm {
    /// `‖√ρ₀ ∂₁^l1 D w‖`
    Gradient { l1: usize },
    /// `‖ρ₀^{l2/2} ∂₁^l1 ∂₂^l2 w‖`
    Normal { l1: usize, l2: usize },
}

/// Highest total differentiation order checked by [`basis_regularity`].
pub const REGULARITY_ORDER: usize = 4;

impl RegularityTerm {
    pub fn all() -> Vec<RegularityTerm> {
        let mut out: Vec<_> = (0..REGULARITY_ORDER).map(|l1| RegularityTerm::Gradient { l1 }).collect();
        for l2 in 2..=REGULARITY_ORDER {
            for l1 in 0..=REGULARITY_ORDER - l2 {
                out.push(RegularityTerm::Normal { l1, l2 });
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeRegularity {
    pub index: usize,
    pub sigma: f64,
    /// `‖√ρ₀ w_l‖`
    pub base_norm: f64,
    pub terms: Vec<(RegularityTerm, f64)>,
    /// `(Σ terms²)^{1/2} / ‖√ρ₀ w_l‖`
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub modes: Vec<ModeRegularity>,
    pub sup_ratio: f64,
}

/// Weighted derivative norms of every mode up to total order four.
pub fn basis_regularity(basis: &SpectralBasis, w: &WeightField) -> Result<RegularityReport> {
    let grid = &w.grid;
    let mut modes = Vec::with_capacity(basis.n_modes());
    for l in 0..basis.n_modes() {
        let wl = basis.mode(l);
        grid.check_len(&wl)?;
        let base_norm = weighted_inner(&wl, &wl, w, 1)?.sqrt();
        let mut terms = Vec::new();
        let mut total = 0.0;
        for term in RegularityTerm::all() {
            let sq = match term {
                RegularityTerm::Gradient { l1 } => {
                    let [g1, g2] = gradient(grid, &mixed_derivative(grid, &wl, l1, 0)?)?;
                    weighted_inner(&g1, &g1, w, 1)? + weighted_inner(&g2, &g2, w, 1)?
                }
                RegularityTerm::Normal { l1, l2 } => {
                    let d = mixed_derivative(grid, &wl, l1, l2)?;
                    weighted_inner(&d, &d, w, l2 as u32)?
                }
            };
            total += sq;
            terms.push((term, sq.sqrt()));
        }
        let ratio = if base_norm > 0.0 { total.sqrt() / base_norm } else { 0.0 };
        modes.push(ModeRegularity {
            index: l,
            sigma: basis.sigma[l],
            base_norm,
            terms,
            ratio,
        });
    }
    let sup_ratio = modes.iter().map(|m| m.ratio).fold(0.0, f64::max);
    Ok(RegularityReport { modes, sup_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Profile;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sine_op(n1: usize, n2: usize) -> (WeightField, OperatorPair) {
        let w = WeightField::new(Profile::Sine, Grid::new(n1, n2).unwrap()).unwrap();
        let op = assemble_operator(&w, &w.grid).unwrap();
        (w, op)
    }

    #[test]
    fn operator_is_symmetric_and_fixes_constants() {
        let (_, op) = sine_op(8, 8);
        let n = op.dofs();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(op.a[(i, j)], op.a[(j, i)]);
            }
        }
        let ones = vec![1.0; n];
        let a1 = op.apply_a(&ones);
        for (x, m) in a1.iter().zip(&op.mass) {
            assert!((x - m).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_mismatched_grid() {
        let w = WeightField::new(Profile::Sine, Grid::new(8, 8).unwrap()).unwrap();
        assert!(assemble_operator(&w, &Grid::new(8, 4).unwrap()).is_err());
    }

    #[test]
    fn lowest_mode_is_constant() {
        let (_, op) = sine_op(8, 8);
        let b = solve_eigenbasis(&op, 6).unwrap();
        assert!((b.sigma[0] - 1.0).abs() < 1e-8);
        let w0 = b.mode(0);
        let spread = w0.iter().fold(0.0_f64, |m, v| m.max((v - w0[0]).abs()));
        assert!(spread < 1e-8 && w0[0] > 0.0);
        assert!(b.sigma.windows(2).all(|p| p[0] <= p[1]));
        assert!(b.sigma[5] > b.sigma[0]);
        assert!(solve_eigenbasis(&op, 0).is_err());
        assert!(solve_eigenbasis(&op, 65).is_err());
    }

    #[test]
    fn basis_verifies() {
        let (_, op) = sine_op(8, 8);
        let b = solve_eigenbasis(&op, 20).unwrap();
        let r = verify_basis(&b, &op);
        assert!(r.orthonormality_defect < 1e-10, "{r:?}");
        assert!(r.stiffness_off_diagonal < 1e-8);
        assert!(r.spectral_identity_defect < 1e-8);
        assert!(r.max_residual < 1e-8);

        let one = verify_basis(&b.truncate(1), &op);
        assert!(one.orthonormality_defect < 1e-12);
    }

    #[test]
    fn duplicated_column_is_reported() {
        let (_, op) = sine_op(8, 8);
        let mut b = solve_eigenbasis(&op, 4).unwrap();
        for i in 0..b.modes.nrows() {
            b.modes[(i, 3)] = b.modes[(i, 2)];
        }
        let r = verify_basis(&b, &op);
        assert!((r.orthonormality_defect - 1.0).abs() < 1e-8);
        assert!(r.worst_pair == (2, 3) || r.worst_pair == (3, 2));
    }

    #[test]
    fn second_eigenvalue_approaches_legendre_value() {
        // cos(πx2) is an eigenfunction with σ = 1 + 2π²
        let errs: Vec<f64> = [16, 32]
            .iter()
            .map(|&n| {
                let (_, op) = sine_op(4, n);
                (solve_eigenbasis(&op, 2).unwrap().sigma[1] - (1.0 + 2.0 * PI * PI)).abs()
            })
            .collect();
        assert!(errs[1] < 0.1 && errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    #[test]
    fn complete_count_extends_degenerate_clusters() {
        let sigma = [1.0, 3.0, 3.0, 3.0, 5.0];
        assert_eq!(cluster_complete_count(&sigma, 2), 4);
        assert_eq!(cluster_complete_count(&sigma, 4), 4);
        assert_eq!(cluster_complete_count(&sigma, 1), 1);
        let (_, op) = sine_op(8, 8);
        // modes 3 and 4 are the sin/cos pair in x1
        let b = solve_eigenbasis_complete(&op, 3).unwrap();
        assert_eq!(b.n_modes(), 4);
        assert!(verify_basis(&b, &op).orthonormality_defect < 1e-10);
    }

    #[test]
    fn projection_roundtrip() {
        let (w, op) = sine_op(8, 8);
        let b = solve_eigenbasis(&op, w.grid.len()).unwrap();
        let u = w.grid.sample(|x1, x2| (2.0 * PI * x1).sin() * x2);
        let back = b.reconstruct(&b.project(&u));
        for (p, q) in u.iter().zip(&back) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_mode_has_zero_regularity_ratio() {
        let (w, op) = sine_op(8, 16);
        let b = solve_eigenbasis(&op, 3).unwrap();
        let r = basis_regularity(&b, &w).unwrap();
        assert!(r.modes[0].ratio < 1e-6);
        assert!(r.modes.iter().all(|m| m.ratio.is_finite()));
        assert!((r.modes[1].base_norm - 1.0).abs() < 1e-10);
        assert_eq!(r.modes[0].terms.len(), RegularityTerm::all().len());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn mass_is_positive_and_a_dominates_m(x in prop::collection::vec(-1.0f64..1.0, 36)) {
            prop_assume!(x.iter().any(|v| v.abs() > 1e-3));
            let (_, op) = sine_op(6, 6);
            let xmx: f64 = x.iter().zip(&op.mass).map(|(v, m)| m * v * v).sum();
            let xax: f64 = x.iter().zip(op.apply_a(&x)).map(|(v, a)| v * a).sum();
            prop_assert!(xmx > 0.0);
            prop_assert!(xax >= xmx - 1e-12);
        }
    }
}
