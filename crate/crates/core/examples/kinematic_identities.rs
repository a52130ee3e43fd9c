//! Piola identity, cofactor determinant and the integrated form of b on a
//! smooth flow map, under refinement.
//!
//! ```sh
//! cargo run --example kinematic_identities
//! ```

use shallow_vacuum::grid::Grid;
use shallow_vacuum::kinematics::{
    b_formula_study, check_bounds, cofactor_determinant_defect, deformation, piola_refinement, smooth_perturbation,
};

fn main() -> shallow_vacuum::Result<()> {
    let eps = 0.01;
    let sizes = [16, 32, 64];
    let (residuals, orders) = piola_refinement(&sizes, eps)?;
    println!("piola residual");
    for (k, n) in sizes.iter().enumerate() {
        let order = if k == 0 { "-".to_string() } else { format!("{:.3}", orders[k - 1]) };
        println!("  n={n:<3} {:.3e}  order {order}", residuals[k]);
    }

    let tensors = deformation(&smooth_perturbation(Grid::new(32, 32)?, eps));
    let bounds = check_bounds(&tensors);
    println!("|det a - J| = {:.1e}", cofactor_determinant_defect(&tensors));
    println!("J in [{:.5}, {:.5}], min eig b {:.4}", bounds.j_min, bounds.j_max, bounds.b_min_eig);

    println!("b against the time-integrated gradient");
    let mut prev: Option<f64> = None;
    for (n, steps) in [(16, 8), (32, 16), (64, 32)] {
        let err = b_formula_study(n, steps, eps)?;
        let ratio = prev.map_or("-".to_string(), |p| format!("{:.2}", p / err));
        println!("  n={n:<3} steps={steps:<3} {err:.3e}  ratio {ratio}");
        prev = Some(err);
    }
    Ok(())
}
