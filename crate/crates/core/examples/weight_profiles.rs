//! Builds each analytic weight profile and reports the physical-vacuum checks.
//!
//! ```sh
//! cargo run --example weight_profiles -- 32
//! ```

use shallow_vacuum::grid::{validate_physical_vacuum, Grid, Profile, TabulatedProfile, WeightField};

fn main() -> shallow_vacuum::Result<()> {
    let n = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(32);
    let grid = Grid::new(n, n)?;
    let table = TabulatedProfile::from_fn(65, |x2| x2 * (1.0 - x2))?;
    let profiles = [
        Profile::Sine,
        Profile::Parabolic,
        Profile::perturbed_sine(0.1)?,
        Profile::Tabulated(table),
    ];
    println!("{:<16} {:>8} {:>8} {:>10} {:>10} {:>6}", "profile", "C1", "C2", "edge", "tol", "pass");
    for profile in profiles {
        let name = profile.name();
        let w = WeightField::new(profile, grid)?;
        let r = validate_physical_vacuum(&w);
        println!(
            "{name:<16} {:>8.4} {:>8.4} {:>10.2e} {:>10.2e} {:>6}",
            r.min_ratio, r.max_ratio, r.boundary_residual, r.boundary_tolerance, r.pass
        );
    }
    // a profile that detaches from the boundary is rejected
    let bad = TabulatedProfile::from_fn(65, |x2| 0.1 + x2 * (1.0 - x2))?;
    let r = validate_physical_vacuum(&WeightField::new(Profile::Tabulated(bad), grid)?);
    println!("offset table: pass={} edge={:.3e}", r.pass, r.boundary_residual);
    Ok(())
}
