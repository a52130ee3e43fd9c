//! Finite-difference operators, weighted quadrature, and empirical checks
//! of the weighted Hardy, interpolation, and tangent inequalities.
//!
//! All stencils are applied in difference form `Σ w_m (u_m − u_center)`,
//! so constants are annihilated exactly rather than to round-off.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, WeightField};

/// Highest weight power accepted by [`weighted_inner`].
pub const MAX_WEIGHT_POWER: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Periodic horizontal direction.
    X1,
    /// Bounded direction normal to Γ.
    X2,
}

/// Finite-difference weights for the `order`-th derivative at `z` from the
/// sample points `xs` (Fornberg's recursion).
pub fn fornberg_weights(z: f64, xs: &[f64], order: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c.swap_remove(order)
}

/// One-dimensional stencil: `(offset, weight)` pairs relative to the node.
pub(crate) type Stencil = Vec<(isize, f64)>;

fn half_width(order: usize, accuracy: usize) -> usize {
    (order + accuracy - 1) / 2
}

/// Centered periodic stencil in x1 (same for every node).
pub(crate) fn x1_stencil(h: f64, order: usize, accuracy: usize) -> Stencil {
    let r = half_width(order, accuracy) as isize;
    let offsets: Vec<f64> = (-r..=r).map(|o| o as f64).collect();
    let w = fornberg_weights(0.0, &offsets, order);
    let scale = h.powi(order as i32);
    (-r..=r)
        .zip(w)
        .filter(|(o, _)| *o != 0)
        .map(|(o, w)| (o, w / scale))
        .collect()
}

/// Stencil in x2 at row `j`: centered where it fits, otherwise one-sided with
/// `order + accuracy` points shifted into the domain.
pub(crate) fn x2_stencil(n: usize, h: f64, j: usize, order: usize, accuracy: usize) -> Stencil {
    let r = half_width(order, accuracy);
    let (start, width) = if j >= r && j + r < n {
        (j - r, 2 * r + 1)
    } else {
        let width = (order + accuracy).min(n);
        let start = j.saturating_sub(width / 2).min(n - width);
        (start, width)
    };
    let offsets: Vec<f64> = (start..start + width)
        .map(|m| m as f64 - j as f64)
        .collect();
    let w = fornberg_weights(0.0, &offsets, order);
    let scale = h.powi(order as i32);
    (start..start + width)
        .zip(w)
        .filter(|(m, _)| *m != j)
        .map(|(m, w)| (m as isize - j as isize, w / scale))
        .collect()
}

fn apply_x1(grid: &Grid, u: &[f64], stencil: &Stencil) -> Vec<f64> {
    let n1 = grid.n1 as isize;
    let mut out = vec![0.0; u.len()];
    for j in 0..grid.n2 {
        let row = j * grid.n1;
        for i in 0..grid.n1 {
            let center = u[row + i];
            out[row + i] = stencil
                .iter()
                .map(|&(o, w)| {
                    let ii = (i as isize + o).rem_euclid(n1) as usize;
                    w * (u[row + ii] - center)
                })
                .sum();
        }
    }
    out
}

fn apply_x2(grid: &Grid, u: &[f64], order: usize, accuracy: usize) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    for j in 0..grid.n2 {
        let stencil = x2_stencil(grid.n2, grid.h2, j, order, accuracy);
        for i in 0..grid.n1 {
            let center = u[grid.index(i, j)];
            out[grid.index(i, j)] = stencil
                .iter()
                .map(|&(o, w)| w * (u[grid.index(i, (j as isize + o) as usize)] - center))
                .sum();
        }
    }
    out
}

/// Derivative of the given order (1..=4) with a stencil of the given
/// formal accuracy (2 or 4).
pub fn diff_op_with_accuracy(
    grid: &Grid,
    field: &[f64],
    axis: Axis,
    order: usize,
    accuracy: usize,
) -> Result<Vec<f64>> {
    grid.check_len(field)?;
    if !(1..=4).contains(&order) {
        return Err(Error::InvalidArgument(format!(
            "derivative order must be 1..=4, got {order}"
        )));
    }
    if accuracy != 2 && accuracy != 4 {
        return Err(Error::InvalidArgument(format!(
            "stencil accuracy must be 2 or 4, got {accuracy}"
        )));
    }
    Ok(match axis {
        Axis::X1 => apply_x1(grid, field, &x1_stencil(grid.h1, order, accuracy)),
        Axis::X2 => apply_x2(grid, field, order, accuracy),
    })
}

/// Second-order accurate derivative `∂_axis^order` (periodic in x1,
/// one-sided at the x2 edges). Higher totals are obtained by composition.
pub fn diff_op(grid: &Grid, field: &[f64], axis: Axis, order: usize) -> Result<Vec<f64>> {
    diff_op_with_accuracy(grid, field, axis, order, 2)
}

/// `∂₁^a ∂₂^b` by composition; `a`, `b` may each be 0..=8 (split into
/// applications of order ≤ 4).
pub fn mixed_derivative(grid: &Grid, field: &[f64], a: usize, b: usize) -> Result<Vec<f64>> {
    let mut out = field.to_vec();
    for (axis, mut left) in [(Axis::X1, a), (Axis::X2, b)] {
        while left > 0 {
            let step = left.min(4);
            out = diff_op(grid, &out, axis, step)?;
            left -= step;
        }
    }
    Ok(out)
}

/// `(∂₁u, ∂₂u)` at the nodes.
pub fn gradient(grid: &Grid, field: &[f64]) -> Result<[Vec<f64>; 2]> {
    Ok([
        diff_op(grid, field, Axis::X1, 1)?,
        diff_op(grid, field, Axis::X2, 1)?,
    ])
}

/// `∫ ρ₀^power f g dx` by the node rule (midpoint in x2, trapezoid in the
/// periodic x1).
pub fn weighted_inner(f: &[f64], g: &[f64], w: &WeightField, power: u32) -> Result<f64> {
    if power > MAX_WEIGHT_POWER {
        return Err(Error::InvalidArgument(format!(
            "weight power {power} exceeds {MAX_WEIGHT_POWER}"
        )));
    }
    w.grid.check_len(f)?;
    w.grid.check_len(g)?;
    let sum: f64 = w
        .nodes
        .iter()
        .zip(f.iter().zip(g))
        .map(|(r, (a, b))| r.powi(power as i32) * a * b)
        .sum();
    Ok(sum * w.grid.cell_area())
}

fn weighted_norm_sq(f: &[f64], w: &WeightField, power: u32) -> Result<f64> {
    weighted_inner(f, f, w, power)
}

/// `∫ ρ₀^power (g² + |Dg|²)`
fn weighted_h1_sq(g: &[f64], w: &WeightField, power: u32) -> Result<f64> {
    let [g1, g2] = gradient(&w.grid, g)?;
    Ok(weighted_norm_sq(g, w, power)?
        + weighted_norm_sq(&g1, w, power)?
        + weighted_norm_sq(&g2, w, power)?)
}

/// Fitted constant of an inequality `LHS ≲ RHS` on one sample.
#[derive(Clone, Debug, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `LHS / RHS`; `None` when the sample is degenerate (`RHS = 0`).
    pub constant: Option<f64>,
    pub sample: String,
    /// Set by refinement studies.
    pub stable: Option<bool>,
}

impl InequalityReport {
    fn new(name: &str, lhs: f64, rhs: f64, sample: &str) -> Self {
        let constant = (rhs > 0.0).then(|| lhs / rhs);
        InequalityReport {
            name: name.to_string(),
            lhs,
            rhs,
            constant,
            sample: sample.to_string(),
            stable: None,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.constant.is_none()
    }
}

/// Weighted Hardy-type embedding `∫ρ₀^α g² ≲ ∫ρ₀^{α+2}(g² + |Dg|²)`.
pub fn check_hardy_embedding(g: &[f64], w: &WeightField, alpha: u32) -> Result<InequalityReport> {
    if alpha + 2 > MAX_WEIGHT_POWER {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} needs weight power above {MAX_WEIGHT_POWER}"
        )));
    }
    let lhs = weighted_norm_sq(g, w, alpha)?;
    let rhs = weighted_h1_sq(g, w, alpha + 2)?;
    Ok(InequalityReport::new(
        &format!("hardy_alpha{alpha}"),
        lhs,
        rhs,
        "field",
    ))
}

/// Weighted interpolation `‖g‖_{L²} ≲ ‖g‖_{L²_ρ₀}^{1/2} ‖g‖_{H¹_ρ₀}^{1/2}`.
pub fn check_interpolation(g: &[f64], w: &WeightField) -> Result<InequalityReport> {
    let lhs = weighted_norm_sq(g, w, 0)?.sqrt();
    let l2 = weighted_norm_sq(g, w, 1)?.sqrt();
    let h1 = weighted_h1_sq(g, w, 1)?.sqrt();
    Ok(InequalityReport::new(
        "interpolation",
        lhs,
        (l2 * h1).sqrt(),
        "field",
    ))
}

/// `sup |∂₁^l ρ₀| / ρ₀` over the nodes, `l = 1..=4`.
pub fn tangent_ratio(w: &WeightField, l: usize) -> Result<f64> {
    if !(1..=4).contains(&l) {
        return Err(Error::InvalidArgument(format!(
            "tangential order must be 1..=4, got {l}"
        )));
    }
    let d = diff_op(&w.grid, &w.nodes, Axis::X1, l)?;
    Ok(d
        .iter()
        .zip(&w.nodes)
        .fold(0.0_f64, |m, (d, r)| m.max(d.abs() / r)))
}

/// Computable stand-in for `‖g‖_{H^{1/2}}`: `(∫ρ₀(g² + |Dg|²))^{1/2}`.
pub fn surrogate_h_half(g: &[f64], w: &WeightField) -> Result<f64> {
    Ok(weighted_h1_sq(g, w, 1)?.sqrt())
}

/// Smooth test function: truncated Fourier series in x1 times shifted
/// Legendre polynomials in x2.
#[derive(Clone, Debug)]
pub struct SmoothSample {
    /// `coeffs[k][p] = (cos, sin)` amplitude of wavenumber `k`, degree `p`.
    coeffs: Vec<Vec<(f64, f64)>>,
}

pub const SAMPLE_WAVENUMBERS: usize = 3;
pub const SAMPLE_DEGREE: usize = 4;

fn shifted_legendre(p: usize, x: f64) -> f64 {
    let s = 2.0 * x - 1.0;
    let (mut prev, mut cur) = (1.0, s);
    match p {
        0 => prev,
        _ => {
            for n in 1..p {
                let next = ((2 * n + 1) as f64 * s * cur - n as f64 * prev) / (n + 1) as f64;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

impl SmoothSample {
    pub fn random(rng: &mut impl Rng) -> Self {
        let coeffs = (0..=SAMPLE_WAVENUMBERS)
            .map(|k| {
                (0..=SAMPLE_DEGREE)
                    .map(|p| {
                        let scale = 1.0 / (1 + k + p) as f64;
                        let c = rng.random_range(-1.0..1.0) * scale;
                        let s = if k == 0 {
                            0.0
                        } else {
                            rng.random_range(-1.0..1.0) * scale
                        };
                        (c, s)
                    })
                    .collect()
            })
            .collect();
        SmoothSample { coeffs }
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        let mut total = 0.0;
        for (k, row) in self.coeffs.iter().enumerate() {
            let arg = 2.0 * PI * k as f64 * x1;
            let (ca, sa) = (arg.cos(), arg.sin());
            for (p, (c, s)) in row.iter().enumerate() {
                total += (c * ca + s * sa) * shifted_legendre(p, x2);
            }
        }
        total
    }

    pub fn on_grid(&self, grid: &Grid) -> Vec<f64> {
        grid.sample(|x1, x2| self.eval(x1, x2))
    }
}

/// `count` samples from a fixed seed.
pub fn random_samples(seed: u64, count: usize) -> Vec<SmoothSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| SmoothSample::random(&mut rng)).collect()
}

/// Which inequality a refinement study fits.
#[derive(Clone, Copy, Debug)]
pub enum InequalityKind {
    Hardy { alpha: u32 },
    Interpolation,
}

/// Result of fitting the largest constant over a sample set on a coarse and
/// a fine grid.
#[derive(Clone, Debug, Serialize)]
pub struct RefinementStudy {
    pub name: String,
    pub coarse_max: f64,
    pub fine_max: f64,
    pub drift: f64,
    pub stable: bool,
}

fn fit(kind: InequalityKind, g: &[f64], w: &WeightField) -> Result<InequalityReport> {
    match kind {
        InequalityKind::Hardy { alpha } => check_hardy_embedding(g, w, alpha),
        InequalityKind::Interpolation => check_interpolation(g, w),
    }
}

/// Largest fitted constant over the samples on one weight field.
pub fn max_constant(kind: InequalityKind, samples: &[SmoothSample], w: &WeightField) -> Result<f64> {
    let mut best = 0.0_f64;
    for s in samples {
        if let Some(c) = fit(kind, &s.on_grid(&w.grid), w)?.constant {
            best = best.max(c);
        }
    }
    Ok(best)
}

/// Compares the largest fitted constant on two resolutions; stable when the
/// relative drift is below `threshold`.
pub fn refinement_study(
    kind: InequalityKind,
    samples: &[SmoothSample],
    coarse: &WeightField,
    fine: &WeightField,
    threshold: f64,
) -> Result<RefinementStudy> {
    let coarse_max = max_constant(kind, samples, coarse)?;
    let fine_max = max_constant(kind, samples, fine)?;
    let drift = (fine_max - coarse_max).abs() / coarse_max.max(f64::MIN_POSITIVE);
    let name = match kind {
        InequalityKind::Hardy { alpha } => format!("hardy_alpha{alpha}"),
        InequalityKind::Interpolation => "interpolation".into(),
    };
    Ok(RefinementStudy {
        name,
        coarse_max,
        fine_max,
        drift,
        stable: drift < threshold,
    })
}

/// One exported inequality row.
#[derive(Clone, Debug, Serialize)]
pub struct InequalityRow {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub n1: usize,
    pub n2: usize,
    pub seed: u64,
}

impl InequalityRow {
    pub fn from_report(r: &InequalityReport, grid: &Grid, seed: u64) -> Self {
        InequalityRow {
            name: format!("{}:{}", r.name, r.sample),
            lhs: r.lhs,
            rhs: r.rhs,
            constant: r.constant.unwrap_or(f64::NAN),
            n1: grid.n1,
            n2: grid.n2,
            seed,
        }
    }
}

/// Writes inequality rows as CSV (`name,lhs,rhs,C,n1,n2,seed`).
pub fn write_inequality_csv(path: &Path, rows: &[InequalityRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    wtr.write_record(["name", "lhs", "rhs", "C", "n1", "n2", "seed"])
        .map_err(|e| Error::csv(path, e))?;
    for r in rows {
        wtr.write_record([
            r.name.clone(),
            format!("{:e}", r.lhs),
            format!("{:e}", r.rhs),
            format!("{:e}", r.constant),
            r.n1.to_string(),
            r.n2.to_string(),
            r.seed.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Profile;
    use approx::assert_relative_eq;

    fn sine(n1: usize, n2: usize) -> WeightField {
        WeightField::new(Profile::Sine, Grid::new(n1, n2).unwrap()).unwrap()
    }

    #[test]
    fn fornberg_reproduces_textbook_stencils() {
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 1);
        assert_relative_eq!(w[0], -0.5);
        assert_relative_eq!(w[2], 0.5);
        let w = fornberg_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 4);
        for (a, b) in w.iter().zip([1.0, -4.0, 6.0, -4.0, 1.0]) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
        let w = fornberg_weights(0.0, &[0.0, 1.0, 2.0], 1);
        for (a, b) in w.iter().zip([-1.5, 2.0, -0.5]) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn d1_of_fourier_mode() {
        let grid = Grid::new(64, 8).unwrap();
        let u = grid.sample(|x1, _| (2.0 * PI * x1).sin());
        let d = diff_op(&grid, &u, Axis::X1, 1).unwrap();
        for k in 0..grid.len() {
            let (x1, _) = grid.node(k);
            let exact = 2.0 * PI * (2.0 * PI * x1).cos();
            assert!((d[k] - exact).abs() < 2.0 * PI * (2.0 * PI * grid.h1).powi(2));
        }
    }

    #[test]
    fn constants_are_annihilated_exactly() {
        let grid = Grid::new(8, 8).unwrap();
        let u = vec![3.7; grid.len()];
        for axis in [Axis::X1, Axis::X2] {
            for order in 1..=4 {
                let d = diff_op(&grid, &u, axis, order).unwrap();
                assert!(d.iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn second_derivative_of_quadratic_is_exact() {
        let grid = Grid::new(4, 16).unwrap();
        let u = grid.sample(|_, x2| x2 * x2);
        let d = diff_op(&grid, &u, Axis::X2, 2).unwrap();
        for v in &d {
            assert_relative_eq!(*v, 2.0, epsilon = 1e-9);
        }
        // first derivative of a quadratic is exact everywhere, edges included
        let d = diff_op(&grid, &u, Axis::X2, 1).unwrap();
        for k in 0..grid.len() {
            assert_relative_eq!(d[k], 2.0 * grid.node(k).1, epsilon = 1e-12);
        }
    }

    #[test]
    fn higher_orders_converge() {
        for order in 1..=4 {
            let errs: Vec<f64> = [32, 64]
                .iter()
                .map(|&n| {
                    let grid = Grid::new(4, n).unwrap();
                    let u = grid.sample(|_, x2| (1.3 * x2).exp());
                    let d = diff_op(&grid, &u, Axis::X2, order).unwrap();
                    (0..grid.len())
                        .map(|k| (d[k] - 1.3f64.powi(order as i32) * (1.3 * grid.node(k).1).exp()).abs())
                        .fold(0.0, f64::max)
                })
                .collect();
            assert!(errs[0] / errs[1] > 3.5, "order {order}: {errs:?}");
        }
    }

    #[test]
    fn mixed_derivatives_commute() {
        let grid = Grid::new(32, 32).unwrap();
        let u = grid.sample(|x1, x2| (2.0 * PI * x1).sin() * (x2 * x2 * x2));
        let a = diff_op(&grid, &diff_op(&grid, &u, Axis::X1, 1).unwrap(), Axis::X2, 1).unwrap();
        let b = diff_op(&grid, &diff_op(&grid, &u, Axis::X2, 1).unwrap(), Axis::X1, 1).unwrap();
        let diff = a.iter().zip(&b).fold(0.0_f64, |m, (p, q)| m.max((p - q).abs()));
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn weighted_inner_examples() {
        let w = sine(16, 64);
        let ones = vec![1.0; w.grid.len()];
        let mass = weighted_inner(&ones, &ones, &w, 1).unwrap();
        assert_relative_eq!(mass, 2.0 / PI, max_relative = 1e-3);
        assert_relative_eq!(weighted_inner(&ones, &ones, &w, 0).unwrap(), 1.0, epsilon = 1e-14);
        let s = w.grid.sample(|x1, _| (2.0 * PI * x1).sin());
        let c = w.grid.sample(|x1, _| (2.0 * PI * x1).cos());
        assert!(weighted_inner(&s, &c, &w, 1).unwrap().abs() < 1e-15);
        assert!(weighted_inner(&ones, &ones, &w, 9).is_err());
    }

    #[test]
    fn hardy_constant_for_unit_field() {
        let w = sine(16, 32);
        let ones = vec![1.0; w.grid.len()];
        let r = check_hardy_embedding(&ones, &w, 0).unwrap();
        assert_relative_eq!(r.constant.unwrap(), 2.0, epsilon = 1e-12);
        let zero = vec![0.0; w.grid.len()];
        assert!(check_hardy_embedding(&zero, &w, 0).unwrap().is_degenerate());
    }

    #[test]
    fn interpolation_unit_field_and_homogeneity() {
        let w = sine(16, 64);
        let ones = vec![1.0; w.grid.len()];
        let r = check_interpolation(&ones, &w).unwrap();
        assert_relative_eq!(r.constant.unwrap(), (PI / 2.0).sqrt(), max_relative = 1e-3);

        let g = random_samples(3, 1)[0].on_grid(&w.grid);
        let scaled: Vec<f64> = g.iter().map(|v| 7.5 * v).collect();
        let a = check_interpolation(&g, &w).unwrap().constant.unwrap();
        let b = check_interpolation(&scaled, &w).unwrap().constant.unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn tangent_ratio_cases() {
        assert_eq!(tangent_ratio(&sine(16, 16), 1).unwrap(), 0.0);
        assert!(tangent_ratio(&sine(16, 16), 5).is_err());

        // dense sampling of |0.2π cos θ / (1 + 0.1 sin θ)|
        let dense = (0..100_000)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / 100_000.0;
                (0.2 * PI * th.cos() / (1.0 + 0.1 * th.sin())).abs()
            })
            .fold(0.0, f64::max);
        let w = WeightField::new(Profile::perturbed_sine(0.1).unwrap(), Grid::new(128, 8).unwrap())
            .unwrap();
        assert_relative_eq!(tangent_ratio(&w, 1).unwrap(), dense, max_relative = 1e-3);
    }

    #[test]
    fn surrogate_norm_cases() {
        let w = sine(16, 64);
        let zero = vec![0.0; w.grid.len()];
        assert_eq!(surrogate_h_half(&zero, &w).unwrap(), 0.0);
        let ones = vec![1.0; w.grid.len()];
        assert_relative_eq!(
            surrogate_h_half(&ones, &w).unwrap(),
            (2.0 / PI).sqrt(),
            max_relative = 1e-3
        );
        // pointwise larger weight gives a larger value
        let heavier = WeightField {
            nodes: w.nodes.iter().map(|r| 1.5 * r).collect(),
            ..w.clone()
        };
        let g = random_samples(11, 1)[0].on_grid(&w.grid);
        assert!(surrogate_h_half(&g, &heavier).unwrap() > surrogate_h_half(&g, &w).unwrap());
    }

    #[test]
    fn samples_are_seeded() {
        let a = random_samples(42, 3);
        let b = random_samples(42, 3);
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(p.eval(0.3, 0.7).to_bits(), q.eval(0.3, 0.7).to_bits());
        }
    }
}
