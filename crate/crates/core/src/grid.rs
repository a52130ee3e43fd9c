//! The periodic slab 𝕋×(0,1), its node layout, and the degenerate depth
//! weight ρ₀ that vanishes on the two boundary lines x2 = 0 and x2 = 1.
//!
//! Nodes are cell-centered in x2, so ρ₀ is strictly positive at every
//! degree of freedom and no discrete operator ever divides by zero. Values
//! on the boundary only appear through one-sided extrapolation.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calculus::{diff_op, Axis};
use crate::error::{Error, Result};

/// Minimum node count per direction; the one-sided edge stencils need it.
pub const MIN_NODES: usize = 4;

/// Number of x2 samples used when estimating the comparability constants.
const DENSE_SAMPLES: usize = 10_000;

/// Uniform grid on 𝕋×(0,1): periodic nodes `x1 = i·h1`, cell-centered
/// nodes `x2 = (j + 1/2)·h2`. Flat storage is row-major in x2, i.e. node
/// `(i, j)` lives at `j·n1 + i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n1: usize,
    pub n2: usize,
    pub h1: f64,
    pub h2: f64,
}

impl Grid {
    /// Builds the grid; both directions need at least [`MIN_NODES`] nodes.
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 < MIN_NODES || n2 < MIN_NODES {
            return Err(Error::Grid(format!(
                "need n1, n2 >= {MIN_NODES}, got ({n1}, {n2})"
            )));
        }
        Ok(Grid {
            n1,
            n2,
            h1: 1.0 / n1 as f64,
            h2: 1.0 / n2 as f64,
        })
    }

    /// x1 is periodic, x2 is bounded.
    pub const fn periodic_x1(&self) -> bool {
        true
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n1 + i
    }

    #[inline]
    pub fn x1(&self, i: usize) -> f64 {
        i as f64 * self.h1
    }

    #[inline]
    pub fn x2(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.h2
    }

    /// Coordinates of flat node `k`.
    pub fn node(&self, k: usize) -> (f64, f64) {
        (self.x1(k % self.n1), self.x2(k / self.n1))
    }

    /// Area element of one node cell.
    pub fn cell_area(&self) -> f64 {
        self.h1 * self.h2
    }

    /// Samples `f(x1, x2)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let (x1, x2) = self.node(k);
                f(x1, x2)
            })
            .collect()
    }

    pub fn check_len(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.len() {
            return Err(Error::GridMismatch {
                expected: self.len(),
                found: field.len(),
            });
        }
        Ok(())
    }
}

/// Distance to Γ on the slab.
#[inline]
pub fn boundary_distance(x2: f64) -> f64 {
    x2.min(1.0 - x2)
}

/// Depth profile tabulated in x2, linearly interpolated, with an optional
/// horizontal modulation `ρ₀ = r(x2)·(1 + m(x2)·sin(2πx1))`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedProfile {
    x2: Vec<f64>,
    depth: Vec<f64>,
    modulation: Option<Vec<f64>>,
}

impl TabulatedProfile {
    pub fn new(x2: Vec<f64>, depth: Vec<f64>, modulation: Option<Vec<f64>>) -> Result<Self> {
        if x2.len() < 2 || x2.len() != depth.len() {
            return Err(Error::Profile(
                "tabulated profile needs at least two (x2, depth) rows".into(),
            ));
        }
        if x2.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Profile("x2 column must be strictly increasing".into()));
        }
        if let Some(m) = &modulation {
            if m.len() != x2.len() {
                return Err(Error::Profile("modulation column length mismatch".into()));
            }
            if m.iter().any(|e| e.abs() >= 0.5) {
                return Err(Error::Profile("modulation amplitude must satisfy |m| < 1/2".into()));
            }
        }
        for (x, r) in x2.iter().zip(&depth) {
            if *x > 0.0 && *x < 1.0 && *r <= 0.0 {
                return Err(Error::Profile(format!(
                    "nonpositive interior depth {r} at x2 = {x}"
                )));
            }
        }
        Ok(TabulatedProfile {
            x2,
            depth,
            modulation,
        })
    }

    /// Builds a table by sampling `f` at `rows` equispaced x2 values on [0, 1].
    pub fn from_fn(rows: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let x2: Vec<f64> = (0..rows).map(|k| k as f64 / (rows - 1) as f64).collect();
        let depth = x2.iter().map(|&x| f(x)).collect();
        Self::new(x2, depth, None)
    }

    /// Reads a headerless or headed CSV with columns `x2, depth[, modulation]`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_path(path)
            .map_err(|e| Error::csv(path, e))?;
        let (mut x2, mut depth, mut modulation) = (Vec::new(), Vec::new(), Vec::new());
        let mut has_modulation = None;
        for record in reader.records() {
            let record = record.map_err(|e| Error::csv(path, e))?;
            let parsed: std::result::Result<Vec<f64>, _> =
                record.iter().map(str::parse::<f64>).collect();
            let Ok(values) = parsed else {
                // header row
                if x2.is_empty() {
                    continue;
                }
                return Err(Error::Profile(format!(
                    "{}: non-numeric row {:?}",
                    path.display(),
                    record
                )));
            };
            if values.len() < 2 || values.len() > 3 {
                return Err(Error::Profile(format!(
                    "{}: expected 2 or 3 columns, got {}",
                    path.display(),
                    values.len()
                )));
            }
            let with_mod = values.len() == 3;
            if *has_modulation.get_or_insert(with_mod) != with_mod {
                return Err(Error::Profile(format!(
                    "{}: inconsistent column count",
                    path.display()
                )));
            }
            x2.push(values[0]);
            depth.push(values[1]);
            if with_mod {
                modulation.push(values[2]);
            }
        }
        let modulation = has_modulation.unwrap_or(false).then_some(modulation);
        Self::new(x2, depth, modulation)
    }

    fn interp(&self, column: &[f64], x: f64) -> f64 {
        let n = self.x2.len();
        let seg = match self.x2.partition_point(|&t| t <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (xa, xb) = (self.x2[seg], self.x2[seg + 1]);
        let s = (x - xa) / (xb - xa);
        column[seg] * (1.0 - s) + column[seg + 1] * s
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        let r = self.interp(&self.depth, x2);
        match &self.modulation {
            Some(m) => r * (1.0 + self.interp(m, x2) * (2.0 * PI * x1).sin()),
            None => r,
        }
    }

    pub fn depends_on_x1(&self) -> bool {
        self.modulation
            .as_ref()
            .is_some_and(|m| m.iter().any(|e| *e != 0.0))
    }
}

/// Initial depth profile descriptor.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    /// `sin(πx2)`
    Sine,
    /// `x2(1 − x2)`
    Parabolic,
    /// `(1 + ε·sin(2πx1))·sin(πx2)` with `|ε| < 1/2`
    PerturbedSine { epsilon: f64 },
    Tabulated(TabulatedProfile),
}

impl Profile {
    pub fn perturbed_sine(epsilon: f64) -> Result<Self> {
        if !(epsilon.abs() < 0.5) {
            return Err(Error::Profile(format!(
                "perturbed-sine needs |epsilon| < 1/2, got {epsilon}"
            )));
        }
        Ok(Profile::PerturbedSine { epsilon })
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        match self {
            Profile::Sine => (PI * x2).sin(),
            Profile::Parabolic => x2 * (1.0 - x2),
            Profile::PerturbedSine { epsilon } => {
                (1.0 + epsilon * (2.0 * PI * x1).sin()) * (PI * x2).sin()
            }
            Profile::Tabulated(t) => t.eval(x1, x2),
        }
    }

    pub fn depends_on_x1(&self) -> bool {
        match self {
            Profile::Sine | Profile::Parabolic => false,
            Profile::PerturbedSine { epsilon } => *epsilon != 0.0,
            Profile::Tabulated(t) => t.depends_on_x1(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Profile::Sine => "sine",
            Profile::Parabolic => "parabolic",
            Profile::PerturbedSine { .. } => "perturbed-sine",
            Profile::Tabulated(_) => "tabulated",
        }
    }
}

/// ρ₀ sampled on a grid, together with its measured comparability
/// constants `C1·d ≤ ρ₀ ≤ C2·d`.
#[derive(Clone, Debug)]
pub struct WeightField {
    pub grid: Grid,
    pub profile: Profile,
    pub nodes: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
}

impl WeightField {
    /// Samples the profile on the grid and estimates `C1`, `C2` by dense
    /// sampling of `ρ₀/d` on the open slab.
    pub fn new(profile: Profile, grid: Grid) -> Result<Self> {
        let nodes = grid.sample(|x1, x2| profile.eval(x1, x2));
        if let Some(k) = nodes.iter().position(|r| !(*r > 0.0)) {
            let (x1, x2) = grid.node(k);
            return Err(Error::Profile(format!(
                "depth {} is not positive at node ({x1}, {x2})",
                nodes[k]
            )));
        }
        let (c1, c2) = comparability_constants(&profile);
        Ok(WeightField {
            grid,
            profile,
            nodes,
            c1,
            c2,
        })
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        self.profile.eval(x1, x2)
    }

    pub fn max(&self) -> f64 {
        self.nodes.iter().copied().fold(0.0, f64::max)
    }
}

/// `build_weight`: samples the profile on the grid.
pub fn build_weight(profile: Profile, grid: Grid) -> Result<WeightField> {
    WeightField::new(profile, grid)
}

/// `build_grid`
pub fn build_grid(n1: usize, n2: usize) -> Result<Grid> {
    Grid::new(n1, n2)
}

fn comparability_constants(profile: &Profile) -> (f64, f64) {
    let x1_samples: Vec<f64> = if profile.depends_on_x1() {
        (0..64).map(|i| i as f64 / 64.0).collect()
    } else {
        vec![0.0]
    };
    let mut lo = f64::INFINITY;
    let mut hi = 0.0_f64;
    for k in 0..DENSE_SAMPLES {
        let x2 = (k as f64 + 0.5) / DENSE_SAMPLES as f64;
        let d = boundary_distance(x2);
        for &x1 in &x1_samples {
            let ratio = profile.eval(x1, x2) / d;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    (lo, hi)
}

/// Thresholds used by [`validate_physical_vacuum`].
#[derive(Clone, Copy, Debug)]
pub struct VacuumTolerances {
    /// Smallest admissible `ρ₀/d`.
    pub min_ratio: f64,
    /// Largest admissible `ρ₀/d`.
    pub max_ratio: f64,
    /// Boundary extrapolation must stay below `factor·h2²·max ρ₀`.
    pub boundary_factor: f64,
}

impl Default for VacuumTolerances {
    fn default() -> Self {
        VacuumTolerances {
            min_ratio: 0.05,
            max_ratio: 1.0e3,
            boundary_factor: 4.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub pass: bool,
    /// Measured `min ρ₀/d` (the comparability constant C1).
    pub min_ratio: f64,
    /// Measured `max ρ₀/d` (the comparability constant C2).
    pub max_ratio: f64,
    /// `max |ρ₀|` extrapolated onto x2 = 0 and x2 = 1.
    pub boundary_residual: f64,
    pub boundary_tolerance: f64,
    /// `sup |∂₂ᵏ ρ₀|` for k = 1..4 on the nodes.
    pub difference_quotients: [f64; 4],
    pub offending_nodes: Vec<usize>,
}

/// Quadratic extrapolation weights from nodes at h/2, 3h/2, 5h/2 to 0.
pub(crate) const EDGE_EXTRAPOLATION: [f64; 3] = [1.875, -1.25, 0.375];

/// Extrapolates a nodal field onto the two boundary rows. Returns
/// `(bottom, top)`, each of length `n1`.
pub fn extrapolate_to_boundary(grid: &Grid, field: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n2 = grid.n2;
    let row = |i: usize, j: usize| field[grid.index(i, j)];
    let bottom = (0..grid.n1)
        .map(|i| (0..3).map(|r| EDGE_EXTRAPOLATION[r] * row(i, r)).sum())
        .collect();
    let top = (0..grid.n1)
        .map(|i| {
            (0..3)
                .map(|r| EDGE_EXTRAPOLATION[r] * row(i, n2 - 1 - r))
                .sum()
        })
        .collect();
    (bottom, top)
}

/// Checks the physical-vacuum comparability and the vanishing of ρ₀ on Γ.
pub fn validate_physical_vacuum(w: &WeightField) -> ValidationReport {
    validate_physical_vacuum_with(w, VacuumTolerances::default())
}

pub fn validate_physical_vacuum_with(w: &WeightField, tol: VacuumTolerances) -> ValidationReport {
    let grid = w.grid;
    let mut min_ratio = w.c1;
    let mut max_ratio = w.c2;
    let mut offending = Vec::new();
    for (k, &r) in w.nodes.iter().enumerate() {
        let (_, x2) = grid.node(k);
        let ratio = r / boundary_distance(x2);
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
        if !(r > 0.0) || ratio < tol.min_ratio || ratio > tol.max_ratio || !ratio.is_finite() {
            offending.push(k);
        }
    }

    let (bottom, top) = extrapolate_to_boundary(&grid, &w.nodes);
    let boundary_residual = bottom
        .iter()
        .chain(&top)
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let boundary_tolerance = tol.boundary_factor * grid.h2 * grid.h2 * w.max();

    let mut difference_quotients = [0.0; 4];
    for (order, slot) in difference_quotients.iter_mut().enumerate() {
        *slot = diff_op(&grid, &w.nodes, Axis::X2, order + 1)
            .map(|d| d.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
            .unwrap_or(f64::INFINITY);
    }

    let pass = offending.is_empty()
        && min_ratio >= tol.min_ratio
        && max_ratio <= tol.max_ratio
        && boundary_residual <= boundary_tolerance
        && difference_quotients.iter().all(|q| q.is_finite());

    ValidationReport {
        pass,
        min_ratio,
        max_ratio,
        boundary_residual,
        boundary_tolerance,
        difference_quotients,
        offending_nodes: offending,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cell_centered_layout() {
        let g = Grid::new(8, 8).unwrap();
        assert_eq!(g.h1, 0.125);
        assert_eq!(g.h2, 0.125);
        let x2: Vec<f64> = (0..8).map(|j| g.x2(j)).collect();
        assert_eq!(x2[0], 0.0625);
        assert_eq!(x2[7], 0.9375);

        let g = Grid::new(4, 4).unwrap();
        assert_eq!(g.len(), 16);
        assert_eq!(g.x2(0), 0.125);
    }

    #[test]
    fn rejects_coarse_grids() {
        assert!(Grid::new(3, 8).is_err());
        assert!(Grid::new(8, 3).is_err());
    }

    #[test]
    fn grid_is_pure() {
        let a = Grid::new(12, 9).unwrap();
        let b = Grid::new(12, 9).unwrap();
        assert_eq!(a, b);
        let sa = a.sample(|x, y| x * 3.0 + y);
        let sb = b.sample(|x, y| x * 3.0 + y);
        assert!(sa.iter().zip(&sb).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn builtin_profile_values() {
        assert_relative_eq!(Profile::Sine.eval(0.3, 0.5), 1.0);
        assert_relative_eq!(Profile::Parabolic.eval(0.3, 0.5), 0.25);
        assert!(Profile::perturbed_sine(0.6).is_err());
    }

    #[test]
    fn sine_comparability_constants() {
        let w = WeightField::new(Profile::Sine, Grid::new(8, 8).unwrap()).unwrap();
        // 2·d ≤ sin(πx2) ≤ π·d
        assert!((w.c1 - 2.0).abs() < 1e-3, "c1 = {}", w.c1);
        assert!((w.c2 - PI).abs() < 1e-3, "c2 = {}", w.c2);
    }

    #[test]
    fn builtin_profiles_validate_at_all_resolutions() {
        let profiles = [
            Profile::Sine,
            Profile::Parabolic,
            Profile::perturbed_sine(0.1).unwrap(),
        ];
        for p in profiles {
            let mut prev: Option<(f64, f64)> = None;
            for n2 in [8, 16, 32, 64] {
                let w = WeightField::new(p.clone(), Grid::new(8, n2).unwrap()).unwrap();
                let report = validate_physical_vacuum(&w);
                assert!(report.pass, "{} at n2 = {n2}: {report:?}", p.name());
                if let Some((c1, c2)) = prev {
                    assert!((report.min_ratio - c1).abs() / c1 < 0.05);
                    assert!((report.max_ratio - c2).abs() / c2 < 0.05);
                }
                prev = Some((report.min_ratio, report.max_ratio));
            }
        }
    }

    #[test]
    fn quartic_vanishing_fails_lower_bound() {
        let table = TabulatedProfile::from_fn(2001, |x| x * x * (1.0 - x) * (1.0 - x)).unwrap();
        let w = WeightField::new(Profile::Tabulated(table), Grid::new(8, 32).unwrap()).unwrap();
        let report = validate_physical_vacuum(&w);
        assert!(!report.pass);
        assert!(report.min_ratio < 0.05);
    }

    #[test]
    fn constant_profile_fails_boundary() {
        let table = TabulatedProfile::from_fn(11, |_| 1.0).unwrap();
        let w = WeightField::new(Profile::Tabulated(table), Grid::new(8, 32).unwrap()).unwrap();
        let report = validate_physical_vacuum(&w);
        assert!(!report.pass);
        assert!(report.boundary_residual > 0.9);
    }

    #[test]
    fn tabulated_rejects_nonpositive_interior() {
        let err = TabulatedProfile::new(vec![0.0, 0.5, 1.0], vec![0.0, -0.1, 0.0], None);
        assert!(err.is_err());
    }

    #[test]
    fn tabulated_csv_with_modulation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profile.csv");
        let mut body = String::from("x2,depth,modulation\n");
        for k in 0..=100 {
            let x = k as f64 / 100.0;
            body.push_str(&format!("{x},{},{}\n", (PI * x).sin(), 0.1));
        }
        std::fs::write(&path, body).unwrap();
        let table = TabulatedProfile::from_csv(&path).unwrap();
        assert!(table.depends_on_x1());
        let p = Profile::Tabulated(table);
        let expected = Profile::PerturbedSine { epsilon: 0.1 }.eval(0.2, 0.5);
        assert_relative_eq!(p.eval(0.2, 0.5), expected, epsilon = 1e-3);
    }
}
