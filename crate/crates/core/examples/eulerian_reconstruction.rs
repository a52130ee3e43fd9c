//! Eulerian depth, velocity and free boundary of the default run: mass
//! agreement, round trip of the inverse map, simplicity of Γ(t) and the
//! stress-free residual.
//!
//! ```sh
//! cargo run --example eulerian_reconstruction -- 32
//! ```

use std::f64::consts::PI;

use shallow_vacuum::eulerian::{
    count_crossings, eulerian_fields, mass_defect, round_trip_error, stress_free_residual,
};
use shallow_vacuum::grid::{Grid, Profile, WeightField};
use shallow_vacuum::picard::{picard_solve, Discretization, PicardConfig};

fn main() -> shallow_vacuum::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(32);
    let w = WeightField::new(Profile::Sine, Grid::new(n, n)?)?;
    let disc = Discretization::new(w, 32)?;
    let grid = disc.weight.grid;
    let u0 = [
        grid.sample(|x1, x2| 0.05 * (2.0 * PI * x1).sin() * (PI * x2).sin()),
        vec![0.0; grid.len()],
    ];
    let (sol, _) = picard_solve(&disc, &u0, &PicardConfig::default())?;

    println!("     t   mass defect   round trip  crossings  max curvature  stress-free");
    for state in sol.states.iter().step_by(sol.len() / 5) {
        let snap = eulerian_fields(state, &disc.weight, grid)?;
        let kappa = snap.boundary.iter().map(|c| c.max_curvature()).fold(0.0, f64::max);
        println!(
            "{:6.3}   {:.3e}   {:.3e}   {:>9}   {:.3e}   {:.3e}",
            state.t,
            mass_defect(state, &disc.weight)?,
            round_trip_error(state)?,
            count_crossings(&[&snap.boundary[0], &snap.boundary[1]]),
            kappa,
            stress_free_residual(&snap)?,
        );
    }
    Ok(())
}
