//! Default nonlinear run: Picard trace, energy history and kinematic bounds.
//!
//! ```sh
//! cargo run --example picard_run -- 32 32
//! ```

use std::f64::consts::PI;
use std::time::Instant;

use shallow_vacuum::energy::energy_history;
use shallow_vacuum::grid::{Grid, Profile, WeightField};
use shallow_vacuum::picard::{picard_solve, Discretization, PicardConfig};

fn main() -> shallow_vacuum::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(32);
    let modes = args.get(1).copied().unwrap_or(32);

    let start = Instant::now();
    let w = WeightField::new(Profile::Sine, Grid::new(n, n)?)?;
    let disc = Discretization::new(w, modes)?;
    println!("basis: {} modes in {:.2?}", disc.galerkin.n_modes(), start.elapsed());

    let grid = disc.weight.grid;
    let u0 = [
        grid.sample(|x1, x2| 0.05 * (2.0 * PI * x1).sin() * (PI * x2).sin()),
        vec![0.0; grid.len()],
    ];
    let config = PicardConfig::default();
    let (sol, trace) = picard_solve(&disc, &u0, &config)?;
    println!("picard: converged={} T={} in {:.2?}", sol.converged, sol.t_final, start.elapsed());
    for h in &trace.halvings {
        println!("  halved T={} ({:?} at iteration {})", h.t_final, h.reason, h.iteration);
    }
    for it in trace.final_attempt() {
        let ratio = it.ratio.map_or("-".to_string(), |r| format!("{r:.4}"));
        println!("  iter {:>2}  d={:.3e}  e={:.3e}  ratio={ratio}", it.iter, it.d, it.e);
    }

    let history = energy_history(&sol, &disc.weight, 4)?;
    let stride = (history.len() / 10).max(1);
    println!("       t        E       E_en       E_el    J_min    J_max  b_min  boundary");
    for r in history.iter().step_by(stride).chain(history.last()) {
        println!(
            "{:8.4} {:.3e} {:.3e} {:.3e} {:.5} {:.5} {:.4} {:.3e}",
            r.t, r.e_total, r.e_en, r.e_el, r.bounds.j_min, r.bounds.j_max, r.bounds.b_min_eig, r.boundary_residual
        );
    }
    println!("energy bound holds: {}", history.iter().all(|r| r.bound_ok));
    println!("total {:.2?}", start.elapsed());
    Ok(())
}
