//! Linearized Galerkin solve with identity coefficients: energy decay and
//! the affine uniform estimate, for both time schemes.
//!
//! ```sh
//! cargo run --example linearized_solve -- 16 16
//! ```

use std::f64::consts::PI;

use shallow_vacuum::eigenbasis::{assemble_operator, solve_eigenbasis_complete};
use shallow_vacuum::galerkin::{
    freeze_coefficients, max_weak_residual, solve_linearized, uniform_estimate_report, uniform_times, GalerkinBasis,
    GalerkinState, LinearOptions, Scheme, VelocityHistory,
};
use shallow_vacuum::grid::{Grid, Profile, WeightField};
use shallow_vacuum::kinematics::zero_field;

fn main() -> shallow_vacuum::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(16);
    let modes = args.get(1).copied().unwrap_or(16);

    let w = WeightField::new(Profile::Sine, Grid::new(n, n)?)?;
    let grid = w.grid;
    let op = assemble_operator(&w, &grid)?;
    let gb = GalerkinBasis::new(solve_eigenbasis_complete(&op, modes)?, op.quadrature.clone())?;
    let u0 = [
        grid.sample(|x1, x2| 0.05 * (2.0 * PI * x1).sin() * (PI * x2).sin()),
        vec![0.0; grid.len()],
    ];
    let lambda0 = GalerkinState::from_initial_velocity(&gb.basis, &u0).lambda().clone();
    let frozen = freeze_coefficients(
        &VelocityHistory::constant(uniform_times(0.1, 100), &zero_field(&grid))?,
        &gb.quadrature,
    )?;

    for scheme in [Scheme::ImplicitEuler, Scheme::CrankNicolson] {
        for pressure in [false, true] {
            let opts = LinearOptions { scheme, pressure };
            let state = solve_linearized(&frozen, &gb, lambda0.clone(), opts)?;
            let last = state.history.len() - 1;
            let est = uniform_estimate_report(&state, &gb);
            println!(
                "{scheme:?} pressure={pressure}: E(0)={:.4e} E(T)={:.4e} dissipation={:.4e} b={:.3e} residual={:.2e}",
                state.energy(0),
                state.energy(last),
                est.dissipation,
                est.b,
                max_weak_residual(&state, &frozen, &gb, opts)?
            );
        }
    }
    Ok(())
}
