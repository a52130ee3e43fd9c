//! Fitted constants of the weighted Hardy and interpolation inequalities
//! over random smooth samples, on two resolutions.
//!
//! ```sh
//! cargo run --example weighted_inequalities -- 17 100
//! ```

use shallow_vacuum::calculus::{random_samples, refinement_study, tangent_ratio, InequalityKind};
use shallow_vacuum::grid::{Grid, Profile, WeightField};

fn main() -> shallow_vacuum::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let seed = args.first().copied().unwrap_or(17);
    let count = args.get(1).copied().unwrap_or(100) as usize;
    let samples = random_samples(seed, count);
    let coarse = WeightField::new(Profile::Sine, Grid::new(32, 32)?)?;
    let fine = WeightField::new(Profile::Sine, Grid::new(64, 64)?)?;

    println!("{:<14} {:>8} {:>8} {:>7} {:>7}", "inequality", "n=32", "n=64", "drift", "stable");
    for kind in [
        InequalityKind::Hardy { alpha: 0 },
        InequalityKind::Hardy { alpha: 1 },
        InequalityKind::Hardy { alpha: 2 },
        InequalityKind::Interpolation,
    ] {
        let s = refinement_study(kind, &samples, &coarse, &fine, 0.1)?;
        println!(
            "{:<14} {:>8.4} {:>8.4} {:>6.1}% {:>7}",
            s.name,
            s.coarse_max,
            s.fine_max,
            100.0 * s.drift,
            s.stable
        );
    }

    for eps in [0.05, 0.1, 0.2] {
        let w = WeightField::new(Profile::perturbed_sine(eps)?, Grid::new(64, 32)?)?;
        let exact = 2.0 * std::f64::consts::PI * eps / (1.0 - eps * eps).sqrt();
        println!("tangent ratio eps={eps}: {:.5} (sup {exact:.5})", tangent_ratio(&w, 1)?);
    }
    Ok(())
}
