//! Truncated higher-order energy functional and the Lagrangian boundary
//! residual of a nonlinear solution.
//!
//! The full functional is
//!
//! ```text
//! E = Σ_{l0≤4} ‖√ρ₀ ∂ₜ^{l0} v‖²
//!   + Σ_{2l0+l1≤6} (‖√ρ₀ ∂ₜ^{l0} ∂₁^{l1} Dv‖² + ‖√ρ₀ ∂ₜ^{l0} ∂₁^{l1+1} Dv‖²)
//!   + Σ_{2l0+l1+l2≤8, l2≥2} ‖ρ₀^{l2/2} ∂ₜ^{l0} ∂₁^{l1} ∂₂^{l2} v‖²
//! ```
//!
//! A term is kept when its parabolic order (two per time derivative, one per
//! space derivative) is at most the requested truncation order.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::calculus::{diff_op, mixed_derivative, weighted_inner, Axis};
use crate::error::{Error, Result};
use crate::grid::{extrapolate_to_boundary, WeightField};
use crate::kinematics::{check_bounds, deformation, BoundsReport, VectorField};
use crate::picard::Solution;

/// Highest accepted truncation order.
pub const MAX_TRUNCATION_ORDER: usize = 4;
/// Slack on the `E(t) ≤ 2E(0)` bound.
pub const ENERGY_BOUND_SLACK: f64 = 0.1;

/// Key of one term of the functional.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum EnergyTerm {
    /// `‖√ρ₀ ∂ₜ^{l0} v‖²`
    Velocity { l0: usize },
    /// `‖√ρ₀ ∂ₜ^{l0} ∂₁^{l1} Dv‖²`
    Gradient { l0: usize, l1: usize },
    /// `‖ρ₀^{l2/2} ∂ₜ^{l0} ∂₁^{l1} ∂₂^{l2} v‖²`
    Normal { l0: usize, l1: usize, l2: usize },
}

impl EnergyTerm {
    pub fn order(&self) -> usize {
        match *self {
            EnergyTerm::Velocity { l0 } => 2 * l0,
            EnergyTerm::Gradient { l0, l1 } => 2 * l0 + l1 + 1,
            EnergyTerm::Normal { l0, l1, l2 } => 2 * l0 + l1 + l2,
        }
    }

    pub fn time_order(&self) -> usize {
        match *self {
            EnergyTerm::Velocity { l0 } | EnergyTerm::Gradient { l0, .. } | EnergyTerm::Normal { l0, .. } => l0,
        }
    }

    pub fn is_normal(&self) -> bool {
        matches!(self, EnergyTerm::Normal { .. })
    }

    /// `(l0, l1, l2)`; gradient terms report `l2 = 1`.
    pub fn indices(&self) -> (usize, usize, usize) {
        match *self {
            EnergyTerm::Velocity { l0 } => (l0, 0, 0),
            EnergyTerm::Gradient { l0, l1 } => (l0, l1, 1),
            EnergyTerm::Normal { l0, l1, l2 } => (l0, l1, l2),
        }
    }
}

/// Terms of the functional with parabolic order `≤ max_order`, each with its
/// multiplicity in the sum (tangential gradient terms with `l1 ≥ 1` occur
/// twice).
pub fn energy_terms(max_order: usize) -> Vec<(EnergyTerm, usize)> {
    let mut terms: BTreeMap<EnergyTerm, usize> = BTreeMap::new();
    for l0 in 0..=4 {
        let t = EnergyTerm::Velocity { l0 };
        if t.order() <= max_order {
            *terms.entry(t).or_default() += 1;
        }
    }
    for l0 in 0..=3 {
        for l1 in 0..=6 {
            if 2 * l0 + l1 > 6 {
                continue;
            }
            for t in [EnergyTerm::Gradient { l0, l1 }, EnergyTerm::Gradient { l0, l1: l1 + 1 }] {
                if t.order() <= max_order {
                    *terms.entry(t).or_default() += 1;
                }
            }
        }
    }
    for l0 in 0..=3 {
        for l1 in 0..=6 {
            for l2 in 2..=8 {
                let t = EnergyTerm::Normal { l0, l1, l2 };
                if 2 * l0 + l1 + l2 <= 8 && t.order() <= max_order {
                    *terms.entry(t).or_default() += 1;
                }
            }
        }
    }
    terms.into_iter().collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyReport {
    pub t: f64,
    pub e_total: f64,
    /// Tangential block (velocity and gradient terms).
    pub e_en: f64,
    /// Normal block.
    pub e_el: f64,
    /// Value of each term, multiplicity included.
    pub terms: Vec<(EnergyTerm, f64)>,
    pub max_order: usize,
    /// `M₀ = E(0)` of the same truncation.
    pub m0: f64,
    /// `E(t) ≤ 2 M₀ (1 + slack)`
    pub bound_ok: bool,
    pub boundary_residual: f64,
    /// Kinematic bounds at the nodes at this time.
    pub bounds: BoundsReport,
}

fn check_order(max_order: usize) -> Result<()> {
    if !(2..=MAX_TRUNCATION_ORDER).contains(&max_order) {
        return Err(Error::InvalidArgument(format!(
            "truncation order must be in 2..={MAX_TRUNCATION_ORDER}, got {max_order}"
        )));
    }
    Ok(())
}

/// `∂ₜ^l v` at time index `n`: backward differences, forward where fewer
/// than `l` earlier levels exist.
fn time_derivative(fields: &[&VectorField], times: &[f64], n: usize, l: usize) -> Result<VectorField> {
    if l == 0 {
        return Ok(fields[n].clone());
    }
    if fields.len() < l + 1 {
        return Err(Error::InsufficientHistory(format!(
            "time derivative of order {l} needs {} levels, solution has {}",
            l + 1,
            fields.len()
        )));
    }
    let start = n.saturating_sub(l);
    let dt = (times[start + l] - times[start]) / l as f64;
    // binomial difference over l + 1 consecutive levels
    let coeffs: Vec<f64> = match l {
        1 => vec![-1.0, 1.0],
        2 => vec![1.0, -2.0, 1.0],
        3 => vec![-1.0, 3.0, -3.0, 1.0],
        4 => vec![1.0, -4.0, 6.0, -4.0, 1.0],
        _ => unreachable!("time order bounded by truncation"),
    };
    let scale = dt.powi(l as i32);
    let len = fields[n][0].len();
    let mut out: VectorField = [vec![0.0; len], vec![0.0; len]];
    for (m, c) in coeffs.iter().enumerate() {
        for comp in 0..2 {
            for (o, v) in out[comp].iter_mut().zip(&fields[start + m][comp]) {
                *o += c * v / scale;
            }
        }
    }
    Ok(out)
}

fn term_value(term: EnergyTerm, dv: &VectorField, w: &WeightField) -> Result<f64> {
    let grid = &w.grid;
    let mut total = 0.0;
    for comp in dv {
        total += match term {
            EnergyTerm::Velocity { .. } => weighted_inner(comp, comp, w, 1)?,
            EnergyTerm::Gradient { l1, .. } => {
                let base = mixed_derivative(grid, comp, l1, 0)?;
                let g1 = diff_op(grid, &base, Axis::X1, 1)?;
                let g2 = diff_op(grid, &base, Axis::X2, 1)?;
                weighted_inner(&g1, &g1, w, 1)? + weighted_inner(&g2, &g2, w, 1)?
            }
            EnergyTerm::Normal { l1, l2, .. } => {
                let d = mixed_derivative(grid, comp, l1, l2)?;
                weighted_inner(&d, &d, w, l2 as u32)?
            }
        };
    }
    Ok(total)
}

fn raw_energy(sol: &Solution, w: &WeightField, n: usize, max_order: usize) -> Result<(f64, f64, Vec<(EnergyTerm, f64)>)> {
    let fields: Vec<&VectorField> = sol.states.iter().map(|s| &s.v).collect();
    let mut cache: BTreeMap<usize, VectorField> = BTreeMap::new();
    let mut e_en = 0.0;
    let mut e_el = 0.0;
    let mut terms = Vec::new();
    for (term, mult) in energy_terms(max_order) {
        let l0 = term.time_order();
        if !cache.contains_key(&l0) {
            cache.insert(l0, time_derivative(&fields, &sol.times, n, l0)?);
        }
        let value = mult as f64 * term_value(term, &cache[&l0], w)?;
        if term.is_normal() {
            e_el += value;
        } else {
            e_en += value;
        }
        terms.push((term, value));
    }
    Ok((e_en, e_el, terms))
}

/// Truncated functional at time index `n`.
pub fn energy_functional(sol: &Solution, w: &WeightField, n: usize, max_order: usize) -> Result<EnergyReport> {
    check_order(max_order)?;
    if n >= sol.len() {
        return Err(Error::InvalidArgument(format!(
            "time index {n} beyond solution length {}",
            sol.len()
        )));
    }
    let (e0_en, e0_el, _) = raw_energy(sol, w, 0, max_order)?;
    report_at(sol, w, n, max_order, e0_en + e0_el)
}

fn report_at(sol: &Solution, w: &WeightField, n: usize, max_order: usize, m0: f64) -> Result<EnergyReport> {
    let (e_en, e_el, terms) = raw_energy(sol, w, n, max_order)?;
    let e_total = e_en + e_el;
    Ok(EnergyReport {
        t: sol.times[n],
        e_total,
        e_en,
        e_el,
        terms,
        max_order,
        m0,
        bound_ok: e_total <= 2.0 * m0 * (1.0 + ENERGY_BOUND_SLACK),
        boundary_residual: boundary_residual(sol, w, n)?,
        bounds: check_bounds(&deformation(&sol.states[n])),
    })
}

/// Reports at every time of the solution.
pub fn energy_history(sol: &Solution, w: &WeightField, max_order: usize) -> Result<Vec<EnergyReport>> {
    check_order(max_order)?;
    let (e0_en, e0_el, _) = raw_energy(sol, w, 0, max_order)?;
    (0..sol.len())
        .map(|n| report_at(sol, w, n, max_order, e0_en + e0_el))
        .collect()
}

/// `max_{i, Γ} |(ρ₀),ₖ bᵏʲ vⁱ,ⱼ|`, with the nodal field extrapolated to
/// x2 = 0 and x2 = 1.
pub fn boundary_residual(sol: &Solution, w: &WeightField, n: usize) -> Result<f64> {
    let state = sol
        .states
        .get(n)
        .ok_or_else(|| Error::InvalidArgument(format!("time index {n} beyond solution length {}", sol.len())))?;
    let grid = &w.grid;
    let tensors = deformation(state);
    let drho = [
        diff_op(grid, &w.nodes, Axis::X1, 1)?,
        diff_op(grid, &w.nodes, Axis::X2, 1)?,
    ];
    let mut worst = 0.0_f64;
    for comp in &state.v {
        let dv = [diff_op(grid, comp, Axis::X1, 1)?, diff_op(grid, comp, Axis::X2, 1)?];
        let field: Vec<f64> = (0..grid.len())
            .map(|p| {
                let b = &tensors.points[p].b;
                (0..2)
                    .flat_map(|k| (0..2).map(move |j| (k, j)))
                    .map(|(k, j)| drho[k][p] * b[k][j] * dv[j][p])
                    .sum()
            })
            .collect();
        let (bottom, top) = extrapolate_to_boundary(grid, &field);
        worst = bottom.iter().chain(&top).fold(worst, |m, v| m.max(v.abs()));
    }
    Ok(worst)
}
