//! Lagrangian flow map, deformation tensors and their a priori bounds.
//!
//! Index convention: `a[i][k]` is `a_i^k`, the entry in row `k`, column `i`
//! of the cofactor matrix
//!
//! ```text
//!     [  η²,₂  −η¹,₂ ]
//!     [ −η²,₁   η¹,₁ ]
//! ```
//!
//! so that `Σ_k a_i^k η^j,_k = J δ_ij`, each column satisfies `a_i^k,_k = 0`
//! and `b^{kj} = a_l^k a_l^j`.

use serde::Serialize;

use crate::calculus::{diff_op, diff_op_with_accuracy, Axis};
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Two-component nodal field.
pub type VectorField = [Vec<f64>; 2];
/// 2×2 matrix, row-major.
pub type Mat2 = [[f64; 2]; 2];

/// Lower bound of J enforced by the a priori guard.
pub const J_LOWER: f64 = 0.9;
/// Upper bound of J enforced by the a priori guard.
pub const J_UPPER: f64 = 1.1;
/// Lower bound on the smallest eigenvalue of b (and on b²²).
pub const B_LOWER: f64 = 0.2;

pub fn zero_field(grid: &Grid) -> VectorField {
    [vec![0.0; grid.len()], vec![0.0; grid.len()]]
}

/// Flow map `η = e + displacement` and velocity `v` at time `t`.
///
/// The displacement is stored instead of η so that the periodic part is
/// explicit; [`FlowMapState::eta`] adds the identity back.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowMapState {
    pub grid: Grid,
    pub displacement: VectorField,
    pub v: VectorField,
    pub t: f64,
}

impl FlowMapState {
    /// `η = e` at `t = 0`.
    pub fn identity(grid: Grid, v: VectorField) -> Result<Self> {
        grid.check_len(&v[0])?;
        grid.check_len(&v[1])?;
        Ok(FlowMapState {
            grid,
            displacement: zero_field(&grid),
            v,
            t: 0.0,
        })
    }

    /// Nodal positions `η(x)`.
    pub fn eta(&self) -> VectorField {
        let g = &self.grid;
        [
            (0..g.len()).map(|k| g.node(k).0 + self.displacement[0][k]).collect(),
            (0..g.len()).map(|k| g.node(k).1 + self.displacement[1][k]).collect(),
        ]
    }
}

/// Trapezoidal flow-map update `η' = η + dt (v + v_new)/2`.
pub fn advance_flow_map(state: &FlowMapState, v_new: &VectorField, dt: f64) -> Result<FlowMapState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    state.grid.check_len(&v_new[0])?;
    state.grid.check_len(&v_new[1])?;
    let step = |d: &[f64], v: &[f64], w: &[f64]| -> Vec<f64> {
        d.iter()
            .zip(v.iter().zip(w))
            .map(|(d, (v, w))| d + 0.5 * dt * (v + w))
            .collect()
    };
    Ok(FlowMapState {
        grid: state.grid,
        displacement: [
            step(&state.displacement[0], &state.v[0], &v_new[0]),
            step(&state.displacement[1], &state.v[1], &v_new[1]),
        ],
        v: v_new.clone(),
        t: state.t + dt,
    })
}

/// Tensors at a single point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointTensors {
    /// `deta[a][k] = η^a,_k`
    pub deta: Mat2,
    pub j: f64,
    /// `a[i][k] = a_i^k`
    pub a: Mat2,
    /// `b[k][j] = b^{kj}`
    pub b: Mat2,
}

impl PointTensors {
    pub fn from_gradient(deta: Mat2) -> Self {
        let j = deta[0][0] * deta[1][1] - deta[0][1] * deta[1][0];
        let a = [
            [deta[1][1], -deta[1][0]],
            [-deta[0][1], deta[0][0]],
        ];
        let mut b = [[0.0; 2]; 2];
        for k in 0..2 {
            for jj in 0..2 {
                b[k][jj] = a[0][k] * a[0][jj] + a[1][k] * a[1][jj];
            }
        }
        PointTensors { deta, j, a, b }
    }

    /// `J⁻²b`
    pub fn scaled_b(&self) -> Mat2 {
        let s = 1.0 / (self.j * self.j);
        [[s * self.b[0][0], s * self.b[0][1]], [s * self.b[1][0], s * self.b[1][1]]]
    }

    /// `J⁻²a`
    pub fn scaled_a(&self) -> Mat2 {
        let s = 1.0 / (self.j * self.j);
        [[s * self.a[0][0], s * self.a[0][1]], [s * self.a[1][0], s * self.a[1][1]]]
    }
}

/// Smallest eigenvalue of a symmetric 2×2 matrix.
pub fn min_eigenvalue(m: &Mat2) -> f64 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = ((m[0][0] - m[1][1]).powi(2) + 4.0 * m[0][1] * m[1][0]).max(0.0);
    // stable form of (tr − √disc)/2
    let big = 0.5 * (tr + disc.sqrt());
    if big != 0.0 {
        det / big
    } else {
        0.0
    }
}

/// Nodal tensor fields.
#[derive(Clone, Debug)]
pub struct KinematicTensors {
    pub grid: Grid,
    pub points: Vec<PointTensors>,
}

impl KinematicTensors {
    pub fn j(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.j).collect()
    }

    fn cofactor_component(&self, i: usize, k: usize) -> Vec<f64> {
        self.points.iter().map(|p| p.a[i][k]).collect()
    }
}

/// Nodal `Dη = I + D(displacement)` by second-order differences.
pub fn displacement_gradient(grid: &Grid, displacement: &VectorField) -> Result<Vec<Mat2>> {
    let d = [
        [
            diff_op(grid, &displacement[0], Axis::X1, 1)?,
            diff_op(grid, &displacement[0], Axis::X2, 1)?,
        ],
        [
            diff_op(grid, &displacement[1], Axis::X1, 1)?,
            diff_op(grid, &displacement[1], Axis::X2, 1)?,
        ],
    ];
    Ok((0..grid.len())
        .map(|n| {
            [
                [1.0 + d[0][0][n], d[0][1][n]],
                [d[1][0][n], 1.0 + d[1][1][n]],
            ]
        })
        .collect())
}

pub fn deformation_from_displacement(grid: &Grid, displacement: &VectorField) -> Result<KinematicTensors> {
    Ok(KinematicTensors {
        grid: *grid,
        points: displacement_gradient(grid, displacement)?
            .into_iter()
            .map(PointTensors::from_gradient)
            .collect(),
    })
}

/// `Dη`, `J`, `a`, `b` at every node.
pub fn deformation(state: &FlowMapState) -> KinematicTensors {
    deformation_from_displacement(&state.grid, &state.displacement)
        .expect("state fields match their grid")
}

/// `max_{i, nodes} |a_i^k,_k|`.
///
/// The divergence uses fourth-order stencils on a cofactor assembled from
/// second-order differences. Tensor-product difference operators commute,
/// so using the same stencil for both would make the residual vanish
/// identically and say nothing; with mixed orders it measures the O(h²)
/// consistency of the discrete cofactor and is exactly zero for affine maps.
pub fn piola_residual(tensors: &KinematicTensors) -> f64 {
    let grid = &tensors.grid;
    let mut worst = 0.0_f64;
    for i in 0..2 {
        let d1 = diff_op_with_accuracy(grid, &tensors.cofactor_component(i, 0), Axis::X1, 1, 4)
            .expect("tensor fields match their grid");
        let d2 = diff_op_with_accuracy(grid, &tensors.cofactor_component(i, 1), Axis::X2, 1, 4)
            .expect("tensor fields match their grid");
        worst = d1
            .iter()
            .zip(&d2)
            .fold(worst, |m, (p, q)| m.max((p + q).abs()));
    }
    worst
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct BoundsReport {
    pub j_min: f64,
    pub j_max: f64,
    pub b_min_eig: f64,
    pub b22_min: f64,
    pub pass_j: bool,
    pub pass_b: bool,
    pub pass_b22: bool,
}

impl BoundsReport {
    pub fn pass(&self) -> bool {
        self.pass_j && self.pass_b && self.pass_b22
    }

    fn from_points<'a>(points: impl IntoIterator<Item = &'a PointTensors>) -> Self {
        let mut r = BoundsReport {
            j_min: f64::INFINITY,
            j_max: f64::NEG_INFINITY,
            b_min_eig: f64::INFINITY,
            b22_min: f64::INFINITY,
            pass_j: false,
            pass_b: false,
            pass_b22: false,
        };
        for p in points {
            r.j_min = r.j_min.min(p.j);
            r.j_max = r.j_max.max(p.j);
            r.b_min_eig = r.b_min_eig.min(min_eigenvalue(&p.b));
            r.b22_min = r.b22_min.min(p.b[1][1]);
        }
        r.pass_j = r.j_min >= J_LOWER && r.j_max <= J_UPPER;
        r.pass_b = r.b_min_eig >= B_LOWER;
        r.pass_b22 = r.b22_min >= B_LOWER;
        r
    }

    /// Worst case over several reports.
    pub fn combine(&self, other: &BoundsReport) -> BoundsReport {
        let mut r = BoundsReport {
            j_min: self.j_min.min(other.j_min),
            j_max: self.j_max.max(other.j_max),
            b_min_eig: self.b_min_eig.min(other.b_min_eig),
            b22_min: self.b22_min.min(other.b22_min),
            ..*self
        };
        r.pass_j = r.j_min >= J_LOWER && r.j_max <= J_UPPER;
        r.pass_b = r.b_min_eig >= B_LOWER;
        r.pass_b22 = r.b22_min >= B_LOWER;
        r
    }
}

/// J-bound, b-ellipticity and b²² checks. Violations are reported, not
/// raised.
pub fn check_bounds(tensors: &KinematicTensors) -> BoundsReport {
    BoundsReport::from_points(&tensors.points)
}

pub(crate) fn bounds_of_points(points: &[PointTensors]) -> BoundsReport {
    BoundsReport::from_points(points)
}

/// Explicit expansion of `b` in terms of the time-integrated velocity
/// gradient `p[a][k] = ∫₀ᵗ v^a,_k ds`.
pub fn b_from_integrated_gradient(p: &Mat2) -> Mat2 {
    let b11 = 1.0 + 2.0 * p[1][1] + p[1][1] * p[1][1] + p[0][1] * p[0][1];
    let b12 = -(p[1][0] + p[0][1]) - p[0][0] * p[0][1] - p[1][0] * p[1][1];
    let b22 = 1.0 + 2.0 * p[0][0] + p[0][0] * p[0][0] + p[1][0] * p[1][0];
    [[b11, b12], [b12, b22]]
}

/// `η = e + ε·(sin 2πx1 sin πx2, 0)` at rest, the reference map of the
/// refinement studies.
pub fn smooth_perturbation(grid: Grid, epsilon: f64) -> FlowMapState {
    let mut displacement = zero_field(&grid);
    displacement[0] = grid.sample(|x1, x2| {
        epsilon * (2.0 * std::f64::consts::PI * x1).sin() * (std::f64::consts::PI * x2).sin()
    });
    FlowMapState {
        grid,
        displacement,
        v: zero_field(&grid),
        t: 0.0,
    }
}

/// Piola residuals of [`smooth_perturbation`] at the given resolutions and
/// the observed orders between consecutive ones.
pub fn piola_refinement(sizes: &[usize], epsilon: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut residuals = Vec::with_capacity(sizes.len());
    for &n in sizes {
        residuals.push(piola_residual(&deformation(&smooth_perturbation(Grid::new(n, n)?, epsilon))));
    }
    let orders = residuals
        .windows(2)
        .zip(sizes.windows(2))
        .map(|(r, n)| (r[0] / r[1]).ln() / (n[1] as f64 / n[0] as f64).ln())
        .collect();
    Ok((residuals, orders))
}

/// Integrates `v = ε·(π/2T)·cos(πt/2T)·(sin 2πx1 sin πx2, 0)` over `[0, T]`
/// in `steps` trapezoidal steps on an `n × n` grid, so that the exact map at
/// T is [`smooth_perturbation`]. Returns `max |b − b_formula(Dη − I)|` with
/// the exact gradient, which is `O(h² + dt²)`.
pub fn b_formula_study(n: usize, steps: usize, epsilon: f64) -> Result<f64> {
    use std::f64::consts::PI;
    let grid = Grid::new(n, n)?;
    let t_final = 1.0;
    let shape = grid.sample(|x1, x2| (2.0 * PI * x1).sin() * (PI * x2).sin());
    let velocity = |t: f64| -> VectorField {
        let c = epsilon * PI / (2.0 * t_final) * (PI * t / (2.0 * t_final)).cos();
        [shape.iter().map(|s| c * s).collect(), vec![0.0; grid.len()]]
    };
    let dt = t_final / steps as f64;
    let mut state = FlowMapState::identity(grid, velocity(0.0))?;
    for k in 1..=steps {
        state = advance_flow_map(&state, &velocity(k as f64 * dt), dt)?;
    }
    let tensors = deformation(&state);
    Ok((0..grid.len())
        .map(|k| {
            let (x1, x2) = grid.node(k);
            let p11 = 2.0 * PI * epsilon * (2.0 * PI * x1).cos() * (PI * x2).sin();
            let p12 = PI * epsilon * (2.0 * PI * x1).sin() * (PI * x2).cos();
            let exact = b_from_integrated_gradient(&[[p11, p12], [0.0, 0.0]]);
            let b = tensors.points[k].b;
            (0..4)
                .map(|e| (b[e / 2][e % 2] - exact[e / 2][e % 2]).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max))
}

/// `max |det a − J|` over the nodes.
pub fn cofactor_determinant_defect(tensors: &KinematicTensors) -> f64 {
    tensors
        .points
        .iter()
        .map(|p| (p.a[0][0] * p.a[1][1] - p.a[0][1] * p.a[1][0] - p.j).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn shear(grid: Grid, t: f64) -> FlowMapState {
        let mut s = FlowMapState::identity(grid, zero_field(&grid)).unwrap();
        s.displacement[0] = grid.sample(|_, x2| t * x2);
        s
    }

    #[test]
    fn zero_velocity_leaves_map_unchanged() {
        let grid = Grid::new(6, 6).unwrap();
        let s = FlowMapState::identity(grid, zero_field(&grid)).unwrap();
        let s2 = advance_flow_map(&s, &zero_field(&grid), 0.3).unwrap();
        assert_eq!(s2.displacement, s.displacement);
        assert_relative_eq!(s2.t, 0.3);
        assert!(advance_flow_map(&s, &zero_field(&grid), 0.0).is_err());
        let other = Grid::new(4, 4).unwrap();
        assert!(advance_flow_map(&s, &zero_field(&other), 0.1).is_err());
    }

    #[test]
    fn shear_velocity_update() {
        let grid = Grid::new(6, 6).unwrap();
        let v = [grid.sample(|_, x2| x2), vec![0.0; grid.len()]];
        let s = FlowMapState::identity(grid, v.clone()).unwrap();
        let s2 = advance_flow_map(&s, &v, 0.25).unwrap();
        for k in 0..grid.len() {
            assert_relative_eq!(s2.displacement[0][k], 0.25 * grid.node(k).1, epsilon = 1e-15);
        }
        let half = advance_flow_map(&advance_flow_map(&s, &v, 0.125).unwrap(), &v, 0.125).unwrap();
        assert_eq!(half.displacement, s2.displacement);
    }

    #[test]
    fn identity_tensors() {
        let grid = Grid::new(8, 8).unwrap();
        let t = deformation(&FlowMapState::identity(grid, zero_field(&grid)).unwrap());
        for p in &t.points {
            assert_eq!(p.deta, [[1.0, 0.0], [0.0, 1.0]]);
            assert_eq!(p.a, [[1.0, 0.0], [0.0, 1.0]]);
            assert_eq!(p.b, [[1.0, 0.0], [0.0, 1.0]]);
            assert_eq!(p.j, 1.0);
        }
        assert_eq!(piola_residual(&t), 0.0);
        let r = check_bounds(&t);
        assert_eq!((r.j_min, r.j_max, r.b_min_eig), (1.0, 1.0, 1.0));
        assert!(r.pass());
    }

    #[test]
    fn shear_tensors_and_bounds() {
        let grid = Grid::new(8, 8).unwrap();
        let t = deformation(&shear(grid, 0.3));
        for p in &t.points {
            assert_relative_eq!(p.j, 1.0, epsilon = 1e-14);
            assert_relative_eq!(p.b[0][0], 1.09, epsilon = 1e-13);
            assert_relative_eq!(p.b[0][1], -0.3, epsilon = 1e-13);
            assert_relative_eq!(p.b[1][1], 1.0, epsilon = 1e-13);
        }
        assert!(piola_residual(&t) < 1e-11);

        let closed = |t: f64| ((2.0 + t * t) - ((2.0 + t * t).powi(2) - 4.0).sqrt()) / 2.0;
        let r = check_bounds(&deformation(&shear(grid, 0.05)));
        assert_relative_eq!(r.b_min_eig, closed(0.05), epsilon = 1e-10);
        assert_relative_eq!(r.b_min_eig, 0.9512, epsilon = 1e-4);
        assert!(r.pass_b);
        let r = check_bounds(&deformation(&shear(grid, 2.0)));
        assert_relative_eq!(r.b_min_eig, closed(2.0), epsilon = 1e-10);
        assert!(!r.pass_b);
    }

    #[test]
    fn cofactor_layout_matches_explicit_expansion() {
        // a general gradient: the contraction a_l^k a_l^j must reproduce the
        // explicit formula in terms of p = Dη − I
        let p = [[0.03, -0.07], [0.11, 0.02]];
        let t = PointTensors::from_gradient([[1.0 + p[0][0], p[0][1]], [p[1][0], 1.0 + p[1][1]]]);
        let b = b_from_integrated_gradient(&p);
        for k in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(t.b[k][j], b[k][j], epsilon = 1e-15);
            }
        }
    }

    fn perturbation(n: usize) -> (Grid, FlowMapState) {
        let grid = Grid::new(n, n).unwrap();
        (grid, smooth_perturbation(grid, 0.01))
    }

    #[test]
    fn perturbation_b_matches_symbolic_derivatives() {
        let errs: Vec<f64> = [16, 32]
            .iter()
            .map(|&n| {
                let (grid, s) = perturbation(n);
                let t = deformation(&s);
                (0..grid.len())
                    .map(|k| {
                        let (x1, x2) = grid.node(k);
                        let p11 = 0.02 * PI * (2.0 * PI * x1).cos() * (PI * x2).sin();
                        let p12 = 0.01 * PI * (2.0 * PI * x1).sin() * (PI * x2).cos();
                        let b = b_from_integrated_gradient(&[[p11, p12], [0.0, 0.0]]);
                        (0..4)
                            .map(|e| (t.points[k].b[e / 2][e % 2] - b[e / 2][e % 2]).abs())
                            .fold(0.0, f64::max)
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(errs[0] < 5e-3 && errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    #[test]
    fn b_formula_study_is_second_order_in_h_and_dt() {
        let coarse = b_formula_study(16, 8, 0.01).unwrap();
        let fine = b_formula_study(32, 16, 0.01).unwrap();
        assert!(coarse < 5e-3 && coarse / fine > 3.5, "{coarse} {fine}");
    }

    #[test]
    fn piola_residual_converges_at_second_order() {
        let r: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| piola_residual(&deformation(&perturbation(n).1)))
            .collect();
        assert!(r[0] > 0.0);
        assert!(r[0] / r[1] >= 3.7 && r[1] / r[2] >= 3.7, "{r:?}");
    }

    proptest! {
        #[test]
        fn algebraic_identities_hold_pointwise(
            e in prop::array::uniform4(-0.4f64..0.4)
        ) {
            let t = PointTensors::from_gradient([[1.0 + e[0], e[1]], [e[2], 1.0 + e[3]]]);
            let det_a = t.a[0][0] * t.a[1][1] - t.a[0][1] * t.a[1][0];
            prop_assert!((det_a - t.j).abs() < 1e-14);
            for i in 0..2 {
                for j in 0..2 {
                    let s: f64 = (0..2).map(|k| t.a[i][k] * t.deta[j][k]).sum();
                    let expect = if i == j { t.j } else { 0.0 };
                    prop_assert!((s - expect).abs() < 1e-14);
                }
            }
            prop_assert_eq!(t.b[0][1], t.b[1][0]);
            prop_assert!(min_eigenvalue(&t.b) >= -1e-14);
        }

        #[test]
        fn affine_maps_have_zero_piola_residual(
            c in prop::array::uniform4(-0.3f64..0.3),
            shift in prop::array::uniform2(-1.0f64..1.0),
        ) {
            // periodic affine displacement: linear in x2 only, plus a shift
            let grid = Grid::new(8, 8).unwrap();
            let mut s = FlowMapState::identity(grid, zero_field(&grid)).unwrap();
            s.displacement[0] = grid.sample(|_, x2| shift[0] + c[0] * x2);
            s.displacement[1] = grid.sample(|_, x2| shift[1] + c[1] * x2);
            let t = deformation(&s);
            prop_assert!(piola_residual(&t) < 1e-10);
        }
    }
}
