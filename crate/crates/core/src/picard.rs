//! Picard iteration for the nonlinear Lagrangian system: each iterate is the
//! linearized solve with coefficients frozen from the previous iterate.
//! The horizon T is halved whenever the a priori guard or the contraction
//! monitor fails.

use serde::{Deserialize, Serialize};

use crate::eigenbasis::{assemble_operator, solve_eigenbasis_complete};
use crate::error::{Error, Result};
use crate::galerkin::{
    freeze_coefficients, solve_linearized, uniform_times, GalerkinBasis, GalerkinState, LinearOptions, Scheme,
    VelocityHistory,
};
use crate::grid::WeightField;
use crate::kinematics::{advance_flow_map, FlowMapState, VectorField};
use crate::quadrature::FaceQuadrature;

/// Ratio above which an iterate counts as non-contracting.
pub const NON_CONTRACTION_RATIO: f64 = 0.9;
/// Consecutive non-contracting iterates that trigger a halving.
pub const NON_CONTRACTION_WINDOW: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    pub t_final: f64,
    /// Steps per attempt; kept fixed when T is halved.
    pub n_steps: usize,
    pub scheme: Scheme,
    pub pressure: bool,
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            t_final: 0.1,
            n_steps: 200,
            scheme: Scheme::CrankNicolson,
            pressure: true,
            tol: 1e-8,
            max_iter: 50,
            max_halvings: 6,
        }
    }
}

impl PicardConfig {
    fn linear_options(&self) -> LinearOptions {
        LinearOptions {
            scheme: self.scheme,
            pressure: self.pressure,
        }
    }
}

/// Weight, eigenbasis and quadrature shared by every solve on one grid.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub weight: WeightField,
    pub galerkin: GalerkinBasis,
}

impl Discretization {
    /// Assembles the operator and keeps at least `n_modes` eigenmodes,
    /// extended to the end of a degenerate cluster.
    pub fn new(weight: WeightField, n_modes: usize) -> Result<Self> {
        let op = assemble_operator(&weight, &weight.grid)?;
        let basis = solve_eigenbasis_complete(&op, n_modes)?;
        let galerkin = GalerkinBasis::new(basis, op.quadrature)?;
        Ok(Discretization { weight, galerkin })
    }

    pub fn quadrature(&self) -> &FaceQuadrature {
        &self.galerkin.quadrature
    }

    /// `L²_ρ₀` projection of `u` onto the retained modes.
    pub fn project(&self, u: &VectorField) -> VectorField {
        let b = &self.galerkin.basis;
        [b.reconstruct(&b.project(&u[0])), b.reconstruct(&b.project(&u[1]))]
    }
}

/// Converged (or last attempted) nonlinear solution.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<FlowMapState>,
    pub coefficients: Vec<[Vec<f64>; 2]>,
    pub converged: bool,
    pub t_final: f64,
}

impl Solution {
    pub fn velocity_history(&self) -> VelocityHistory {
        VelocityHistory {
            times: self.times.clone(),
            fields: self.states.iter().map(|s| s.v.clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Builds flow-map states from a velocity history by the trapezoidal rule.
pub fn integrate_flow_map(history: &VelocityHistory, grid: crate::grid::Grid) -> Result<Vec<FlowMapState>> {
    let mut states = Vec::with_capacity(history.times.len());
    let mut s = FlowMapState::identity(grid, history.fields[0].clone())?;
    states.push(s.clone());
    for n in 1..history.times.len() {
        s = advance_flow_map(&s, &history.fields[n], history.times[n] - history.times[n - 1])?;
        states.push(s.clone());
    }
    Ok(states)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HalvingReason {
    BoundsGuard,
    NonContraction,
    MaxIterations,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HalvingEvent {
    /// Horizon that was abandoned.
    pub t_final: f64,
    pub reason: HalvingReason,
    /// Iteration at which the attempt was abandoned.
    pub iteration: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PicardIterate {
    pub iter: usize,
    /// `sup_t ‖√ρ₀(v⁽ⁿ⁾ − v⁽ⁿ⁻¹⁾)‖`
    pub d: f64,
    /// `(∫₀ᵀ ‖√ρ₀ D(v⁽ⁿ⁾ − v⁽ⁿ⁻¹⁾)‖² dt)^{1/2}`
    pub e: f64,
    /// `d_n / d_{n−1}`
    pub ratio: Option<f64>,
    /// `sup_t (‖Δv‖_{L²_ρ₀} ‖Δv‖_{H¹_ρ₀})^{1/2}`, which bounds the unweighted
    /// `L²` distance through the weighted interpolation inequality.
    pub interpolated: f64,
    pub t_final: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PicardTrace {
    /// Every iterate of every attempt, in order.
    pub iterates: Vec<PicardIterate>,
    pub halvings: Vec<HalvingEvent>,
    pub converged: bool,
}

impl PicardTrace {
    /// Iterates of the last attempt (after the final halving).
    pub fn final_attempt(&self) -> &[PicardIterate] {
        let t = self.iterates.last().map(|i| i.t_final);
        let start = self
            .iterates
            .iter()
            .rposition(|i| Some(i.t_final) != t)
            .map_or(0, |p| p + 1);
        &self.iterates[start..]
    }

    pub fn iterations(&self) -> usize {
        self.final_attempt().len()
    }
}

/// `(sup_t ‖√ρ₀(a − b)‖, (∫₀ᵀ ‖√ρ₀D(a − b)‖² dt)^{1/2})` with the node rule
/// in space and the trapezoidal rule in time.
pub fn iteration_distance(
    a: &VelocityHistory,
    b: &VelocityHistory,
    w: &WeightField,
    quad: &FaceQuadrature,
) -> Result<(f64, f64)> {
    let (sup, diss, _) = distance_parts(a, b, w, quad)?;
    Ok((sup, diss))
}

fn distance_parts(
    a: &VelocityHistory,
    b: &VelocityHistory,
    w: &WeightField,
    quad: &FaceQuadrature,
) -> Result<(f64, f64, f64)> {
    if a.times != b.times {
        return Err(Error::InvalidArgument("runs are on different time grids".into()));
    }
    let grid = &w.grid;
    let mass = grid.cell_area();
    let mut sup = 0.0_f64;
    let mut interp = 0.0_f64;
    let mut dissipation = Vec::with_capacity(a.times.len());
    for (fa, fb) in a.fields.iter().zip(&b.fields) {
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for c in 0..2 {
            grid.check_len(&fa[c])?;
            grid.check_len(&fb[c])?;
            let diff: Vec<f64> = fa[c].iter().zip(&fb[c]).map(|(x, y)| x - y).collect();
            l2 += diff.iter().zip(&w.nodes).map(|(d, r)| r * d * d).sum::<f64>() * mass;
            h1 += quad.weighted_dirichlet(&diff, 1);
        }
        sup = sup.max(l2.sqrt());
        interp = interp.max((l2.sqrt() * (l2 + h1).sqrt()).sqrt());
        dissipation.push(h1);
    }
    let integral: f64 = a
        .times
        .windows(2)
        .zip(dissipation.windows(2))
        .map(|(t, d)| 0.5 * (t[1] - t[0]) * (d[0] + d[1]))
        .sum();
    Ok((sup, integral.sqrt(), interp))
}

enum Attempt {
    Converged(VelocityHistory, Vec<[Vec<f64>; 2]>),
    Halve(HalvingReason, usize, VelocityHistory, Vec<[Vec<f64>; 2]>),
}

fn attempt(
    disc: &Discretization,
    u0: &VectorField,
    config: &PicardConfig,
    t_final: f64,
    trace: &mut PicardTrace,
) -> Result<Attempt> {
    let gb = &disc.galerkin;
    let basis = &gb.basis;
    let times = uniform_times(t_final, config.n_steps);
    let lambda0 = [basis.project(&u0[0]), basis.project(&u0[1])];
    let projected = [basis.reconstruct(&lambda0[0]), basis.reconstruct(&lambda0[1])];
    let mut prev = VelocityHistory::constant(times.clone(), &projected)?;
    let mut prev_coeffs = vec![lambda0.clone(); times.len()];
    let mut last_d: Option<f64> = None;
    let mut stalled = 0;
    for iter in 1..=config.max_iter {
        let frozen = freeze_coefficients(&prev, disc.quadrature())?;
        let guard = frozen.bounds.iter().all(|b| b.pass_j && b.pass_b);
        if !guard {
            return Ok(Attempt::Halve(HalvingReason::BoundsGuard, iter, prev, prev_coeffs));
        }
        let state: GalerkinState = solve_linearized(&frozen, gb, lambda0.clone(), config.linear_options())?;
        let next = VelocityHistory {
            times: times.clone(),
            fields: (0..state.history.len()).map(|n| state.velocity(basis, n)).collect(),
        };
        let (d, e, interpolated) = distance_parts(&next, &prev, &disc.weight, disc.quadrature())?;
        let ratio = last_d.map(|p| if p > 0.0 { d / p } else { 0.0 });
        trace.iterates.push(PicardIterate {
            iter,
            d,
            e,
            ratio,
            interpolated,
            t_final,
        });
        prev = next;
        prev_coeffs = state.history.into_iter().map(|(_, l)| l).collect();
        if d <= config.tol {
            return Ok(Attempt::Converged(prev, prev_coeffs));
        }
        if ratio.is_some_and(|r| r > NON_CONTRACTION_RATIO) {
            stalled += 1;
            if stalled >= NON_CONTRACTION_WINDOW {
                return Ok(Attempt::Halve(HalvingReason::NonContraction, iter, prev, prev_coeffs));
            }
        } else {
            stalled = 0;
        }
        last_d = Some(d);
    }
    Ok(Attempt::Halve(HalvingReason::MaxIterations, config.max_iter, prev, prev_coeffs))
}

/// Picard iteration from `u0`, halving T on guard failure, stalled
/// contraction or exhausted iterations.
///
/// When every allowed halving fails, the last attempt is returned with
/// `converged = false` together with the full trace.
pub fn picard_solve(disc: &Discretization, u0: &VectorField, config: &PicardConfig) -> Result<(Solution, PicardTrace)> {
    if !(config.t_final > 0.0) || config.n_steps == 0 || config.max_iter == 0 {
        return Err(Error::InvalidArgument(
            "t_final, n_steps and max_iter must be positive".into(),
        ));
    }
    let grid = disc.weight.grid;
    grid.check_len(&u0[0])?;
    grid.check_len(&u0[1])?;
    let mut trace = PicardTrace::default();
    let mut t_final = config.t_final;
    let mut halvings = 0;
    loop {
        match attempt(disc, u0, config, t_final, &mut trace)? {
            Attempt::Converged(history, coefficients) => {
                trace.converged = true;
                let states = integrate_flow_map(&history, grid)?;
                return Ok((
                    Solution {
                        times: history.times,
                        states,
                        coefficients,
                        converged: true,
                        t_final,
                    },
                    trace,
                ));
            }
            Attempt::Halve(reason, iteration, history, coefficients) => {
                trace.halvings.push(HalvingEvent {
                    t_final,
                    reason,
                    iteration,
                });
                if halvings == config.max_halvings {
                    let states = integrate_flow_map(&history, grid)?;
                    return Ok((
                        Solution {
                            times: history.times,
                            states,
                            coefficients,
                            converged: false,
                            t_final,
                        },
                        trace,
                    ));
                }
                halvings += 1;
                t_final *= 0.5;
            }
        }
    }
}

/// One more linearized solve with coefficients frozen from `sol`; returns
/// `sup_t ‖√ρ₀(v_new − v)‖`.
pub fn fixed_point_defect(disc: &Discretization, sol: &Solution, config: &PicardConfig) -> Result<f64> {
    let history = sol.velocity_history();
    let frozen = freeze_coefficients(&history, disc.quadrature())?;
    let state = solve_linearized(
        &frozen,
        &disc.galerkin,
        sol.coefficients[0].clone(),
        config.linear_options(),
    )?;
    let next = VelocityHistory {
        times: history.times.clone(),
        fields: (0..state.history.len())
            .map(|n| state.velocity(&disc.galerkin.basis, n))
            .collect(),
    };
    Ok(iteration_distance(&next, &history, &disc.weight, disc.quadrature())?.0)
}
