//! Weighted eigenbasis: leading eigenvalues, orthonormality and residuals.
//!
//! ```sh
//! cargo run --example eigenbasis_spectrum -- 32 16
//! ```

use std::time::Instant;

use shallow_vacuum::eigenbasis::{assemble_operator, basis_regularity, solve_eigenbasis_complete, verify_basis};
use shallow_vacuum::grid::{Grid, Profile, WeightField};

fn main() -> shallow_vacuum::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(32);
    let modes = args.get(1).copied().unwrap_or(16);

    let start = Instant::now();
    let w = WeightField::new(Profile::Sine, Grid::new(n, n)?)?;
    let op = assemble_operator(&w, &w.grid)?;
    let basis = solve_eigenbasis_complete(&op, modes)?;
    println!("{} modes on {n}x{n} in {:.2?}", basis.n_modes(), start.elapsed());
    for (l, s) in basis.sigma.iter().enumerate() {
        println!("  sigma_{:<2} = {s:.8}", l + 1);
    }

    let report = verify_basis(&basis, &op);
    println!("W'MW - I          {:.2e} at {:?}", report.orthonormality_defect, report.worst_pair);
    println!("off-diagonal W'AW {:.2e}", report.stiffness_off_diagonal);
    println!("max residual      {:.2e}", report.max_residual);

    let reg = basis_regularity(&basis, &w)?;
    println!("sup weighted regularity ratio {:.4}", reg.sup_ratio);
    Ok(())
}
