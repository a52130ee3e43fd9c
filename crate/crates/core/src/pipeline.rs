//! The three commands behind the CLI: a full nonlinear run, the eigenbasis
//! export and the property checks. Each writes its artifacts and a manifest
//! into one output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::calculus::{
    check_hardy_embedding, check_interpolation, random_samples, refinement_study, tangent_ratio,
    write_inequality_csv, InequalityKind, InequalityRow,
};
use crate::config::LoadedConfig;
use crate::eigenbasis::{assemble_operator, solve_eigenbasis_complete, verify_basis, RESIDUAL_LIMIT};
use crate::energy::{energy_history, EnergyReport, ENERGY_BOUND_SLACK};
use crate::error::{Error, Result};
use crate::eulerian::{
    count_crossings, eulerian_fields_with, eulerian_mass, lagrangian_mass, invert_with, FlowMapInterpolant,
    MassQuadrature, SplineBasis, stress_free_residual,
};
use crate::export::{
    ensure_dir, snapshot_indices, write_boundary_csv, write_eigenvalues_csv, write_energy_csv, write_eulerian_csv,
    write_mode_csv, write_picard_csv, write_state_csv, CheckOutcome, ConvergenceSummary, RunManifest, RunStamp,
};
use crate::grid::{Grid, WeightField};
use crate::kinematics::{
    b_formula_study, cofactor_determinant_defect, deformation, piola_refinement, smooth_perturbation, B_LOWER,
    J_LOWER, J_UPPER,
};
use crate::picard::{fixed_point_defect, picard_solve, Discretization, PicardTrace, Solution};

/// Drift allowed between the coarse and refined inequality constants.
pub const INEQUALITY_DRIFT: f64 = 0.1;
/// Contraction factor required after the second iterate.
pub const CONTRACTION_FACTOR: f64 = 0.5;
pub const MASS_TOLERANCE: f64 = 1e-6;
pub const ROUND_TRIP_TOLERANCE: f64 = 1e-9;
/// Smallest observed order accepted for the Piola residual.
pub const PIOLA_ORDER: f64 = 1.9;
const PERTURBATION: f64 = 0.01;

/// Everything a run produced, for callers that want more than the files.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub diagnostics: BTreeMap<String, f64>,
    pub solution: Option<Solution>,
    pub trace: Option<PicardTrace>,
    pub energy: Vec<EnergyReport>,
}

impl RunOutcome {
    pub fn converged(&self) -> bool {
        self.manifest.convergence.as_ref().is_none_or(|c| c.converged)
    }
}

fn finish(mut manifest: RunManifest, dir: &Path, result: Result<()>) -> Result<RunManifest> {
    match result {
        Ok(()) => {
            manifest.write(dir)?;
            Ok(manifest)
        }
        Err(e) => {
            manifest.status = format!("failed: {e}");
            manifest.write(dir)?;
            Err(e)
        }
    }
}

fn file(manifest: &mut RunManifest, dir: &Path, name: String) -> PathBuf {
    manifest.files.push(name.clone());
    dir.join(name)
}

/// Largest `d_{n+1}/d_n` with `n ≥ 2` in the final attempt.
pub fn late_contraction(trace: &PicardTrace) -> f64 {
    trace
        .final_attempt()
        .iter()
        .filter(|i| i.iter >= 3)
        .filter_map(|i| i.ratio)
        .fold(0.0, f64::max)
}

/// `max_t E(t) / E(0)`; zero for an identically zero history.
pub fn energy_growth(reports: &[EnergyReport]) -> f64 {
    let e0 = reports.first().map_or(0.0, |r| r.e_total);
    let peak = reports.iter().fold(0.0_f64, |m, r| m.max(r.e_total));
    if peak == 0.0 {
        0.0
    } else if e0 == 0.0 {
        f64::INFINITY
    } else {
        peak / e0
    }
}

/// Nonlinear run: Picard solve, energy history, Eulerian snapshots and all
/// files.
pub fn execute_run(loaded: &LoadedConfig, dir: &Path, stamp: RunStamp) -> Result<RunOutcome> {
    ensure_dir(dir)?;
    let mut manifest = RunManifest::new("run", &loaded.source, stamp);
    let mut outcome = RunOutcome {
        dir: dir.to_path_buf(),
        manifest: manifest.clone(),
        diagnostics: BTreeMap::new(),
        solution: None,
        trace: None,
        energy: Vec::new(),
    };
    let result = run_inner(loaded, dir, &mut manifest, &mut outcome);
    outcome.manifest = finish(manifest, dir, result)?;
    Ok(outcome)
}

fn run_inner(loaded: &LoadedConfig, dir: &Path, manifest: &mut RunManifest, out: &mut RunOutcome) -> Result<()> {
    let config = &loaded.config;
    if config.n_steps() == 0 {
        manifest.status = "empty".into();
        return Ok(());
    }
    let weight = config.weight(&loaded.base)?;
    let grid = weight.grid;
    let disc = Discretization::new(weight, config.solver.n_modes)?;
    let picard = config.picard();
    let (sol, trace) = picard_solve(&disc, &config.initial_velocity(&grid), &picard)?;
    let energy = energy_history(&sol, &disc.weight, config.energy.max_order)?;

    write_energy_csv(&file(manifest, dir, "energy.csv".into()), &energy)?;
    write_picard_csv(&file(manifest, dir, "picard.csv".into()), &trace)?;

    let splines = SplineBasis::new(grid)?;
    let quadrature = MassQuadrature::for_grid(&grid);
    let reference_mass = lagrangian_mass(&disc.weight, quadrature);
    let (mut mass_defect, mut round_trip, mut crossings) = (0.0_f64, 0.0_f64, 0usize);
    let mut snapshots = Vec::new();
    for idx in snapshot_indices(sol.len(), config.output.stride) {
        let state = &sol.states[idx];
        write_state_csv(&file(manifest, dir, format!("state_{idx:04}.csv")), state, &disc.weight)?;
        let map = FlowMapInterpolant::with_basis(&splines, state)?;
        let snap = eulerian_fields_with(&map, &disc.weight, grid)?;
        write_eulerian_csv(&file(manifest, dir, format!("eulerian_{idx:04}.csv")), &snap)?;
        let mass = eulerian_mass(&map, &disc.weight, quadrature)?;
        mass_defect = mass_defect.max((mass - reference_mass).abs() / reference_mass);
        round_trip = round_trip.max(round_trip_with(&map, &grid)?);
        crossings += count_crossings(&[&snap.boundary[0], &snap.boundary[1]]);
        snapshots.push((idx, snap));
    }
    write_boundary_csv(&file(manifest, dir, "boundary.csv".into()), &snapshots)?;

    let bounds = energy
        .iter()
        .map(|r| r.bounds)
        .reduce(|a, b| a.combine(&b))
        .ok_or_else(|| Error::InvalidArgument("empty energy history".into()))?;
    let last = energy.last().expect("nonempty history");
    let final_snapshot = &snapshots.last().expect("final snapshot").1;
    manifest.checks = vec![
        CheckOutcome::at_most("contraction_ratio", late_contraction(&trace), CONTRACTION_FACTOR),
        CheckOutcome::at_least("j_min", bounds.j_min, J_LOWER),
        CheckOutcome::at_most("j_max", bounds.j_max, J_UPPER),
        CheckOutcome::at_least("b_min_eig", bounds.b_min_eig, B_LOWER),
        CheckOutcome::at_most("energy_growth", energy_growth(&energy), 2.0 * (1.0 + ENERGY_BOUND_SLACK)),
        CheckOutcome::at_most("fixed_point_defect", fixed_point_defect(&disc, &sol, &picard)?, 10.0 * picard.tol),
        CheckOutcome::at_most("mass_defect", mass_defect, MASS_TOLERANCE),
        CheckOutcome::at_most("round_trip", round_trip, ROUND_TRIP_TOLERANCE),
        CheckOutcome::at_most("boundary_crossings", crossings as f64, 0.0),
    ];
    out.diagnostics.insert("boundary_residual".into(), last.boundary_residual);
    out.diagnostics.insert("stress_free_residual".into(), stress_free_residual(final_snapshot)?);
    out.diagnostics.insert(
        "max_curvature".into(),
        snapshots
            .iter()
            .flat_map(|(_, s)| s.boundary.iter().map(|c| c.max_curvature()))
            .fold(0.0, f64::max),
    );
    manifest.convergence = Some(ConvergenceSummary {
        converged: sol.converged,
        iterations: trace.iterations(),
        halvings: trace.halvings.len(),
        t_final: sol.t_final,
        n_steps: picard.n_steps,
        n_modes: disc.galerkin.n_modes(),
        final_distance: trace.iterates.last().map(|i| i.d),
    });
    manifest.status = if sol.converged { "converged" } else { "not-converged" }.into();
    out.solution = Some(sol);
    out.trace = Some(trace);
    out.energy = energy;
    Ok(())
}

fn round_trip_with(map: &FlowMapInterpolant, grid: &Grid) -> Result<f64> {
    let nodes: Vec<[f64; 2]> = (0..grid.len()).map(|k| grid.node(k)).map(|(a, b)| [a, b]).collect();
    let images: Vec<[f64; 2]> = nodes.iter().map(|&x| map.eta(x)).collect();
    let pre = invert_with(map, &images);
    let failed = pre.iter().filter(|p| !p.converged).count();
    if failed > 0 {
        return Err(Error::Inversion {
            failed,
            total: pre.len(),
        });
    }
    Ok(nodes
        .iter()
        .zip(&pre)
        .map(|(x, p)| {
            let d1 = x[0] - p.x[0];
            (d1 - d1.round()).hypot(x[1] - p.x[1])
        })
        .fold(0.0, f64::max))
}

/// Eigenbasis export: eigenvalues, optional mode snapshots and basis checks.
pub fn execute_eigen(loaded: &LoadedConfig, dir: &Path, stamp: RunStamp) -> Result<RunManifest> {
    ensure_dir(dir)?;
    let mut manifest = RunManifest::new("eigen", &loaded.source, stamp);
    let result = (|| {
        let config = &loaded.config;
        let weight = config.weight(&loaded.base)?;
        let op = assemble_operator(&weight, &weight.grid)?;
        let basis = solve_eigenbasis_complete(&op, config.solver.n_modes)?;
        let report = verify_basis(&basis, &op);
        write_eigenvalues_csv(&file(&mut manifest, dir, "eigenvalues.csv".into()), &basis)?;
        for l in 0..config.output.mode_snapshots.min(basis.n_modes()) {
            write_mode_csv(&file(&mut manifest, dir, format!("mode_{:04}.csv", l + 1)), &basis, l)?;
        }
        manifest.checks = vec![
            CheckOutcome::at_most("sigma1_defect", (basis.sigma[0] - 1.0).abs(), 1e-8),
            CheckOutcome::at_most("orthonormality_defect", report.orthonormality_defect, 1e-10),
            CheckOutcome::at_most("stiffness_off_diagonal", report.stiffness_off_diagonal, 1e-8),
            CheckOutcome::at_most("max_residual", report.max_residual, RESIDUAL_LIMIT),
        ];
        manifest.status = "complete".into();
        Ok(())
    })();
    finish(manifest, dir, result)
}

fn refined(w: &WeightField) -> Result<WeightField> {
    WeightField::new(w.profile.clone(), Grid::new(2 * w.grid.n1, 2 * w.grid.n2)?)
}

/// Inequality and kinematics property suites on the configured weight.
pub fn execute_check(loaded: &LoadedConfig, dir: &Path, stamp: RunStamp) -> Result<RunManifest> {
    ensure_dir(dir)?;
    let mut manifest = RunManifest::new("check", &loaded.source, stamp);
    let result = (|| {
        let config = &loaded.config;
        let coarse = config.weight(&loaded.base)?;
        let fine = refined(&coarse)?;
        let seed = config.check.seed;
        let samples = random_samples(seed, config.check.samples);
        let kinds = [
            InequalityKind::Hardy { alpha: 0 },
            InequalityKind::Hardy { alpha: 1 },
            InequalityKind::Hardy { alpha: 2 },
            InequalityKind::Interpolation,
        ];

        let mut rows = Vec::new();
        for w in [&coarse, &fine] {
            for (k, s) in samples.iter().enumerate() {
                let g = s.on_grid(&w.grid);
                for kind in kinds {
                    let mut r = match kind {
                        InequalityKind::Hardy { alpha } => check_hardy_embedding(&g, w, alpha)?,
                        InequalityKind::Interpolation => check_interpolation(&g, w)?,
                    };
                    r.sample = format!("s{k:03}");
                    rows.push(InequalityRow::from_report(&r, &w.grid, seed));
                }
            }
        }
        write_inequality_csv(&file(&mut manifest, dir, "inequalities.csv".into()), &rows)?;

        let mut checks = Vec::new();
        for kind in kinds {
            let study = refinement_study(kind, &samples, &coarse, &fine, INEQUALITY_DRIFT)?;
            checks.push(CheckOutcome::at_most(&format!("{}_drift", study.name), study.drift, INEQUALITY_DRIFT));
        }
        if coarse.profile.depends_on_x1() {
            // informational: no closed form is asserted
            let ratio = tangent_ratio(&coarse, 1)?;
            checks.push(CheckOutcome::at_most("tangent_ratio_1", ratio, f64::INFINITY));
        }
        let (_, orders) = piola_refinement(&[16, 32, 64], PERTURBATION)?;
        checks.push(CheckOutcome::at_least(
            "piola_order",
            orders.iter().copied().fold(f64::INFINITY, f64::min),
            PIOLA_ORDER,
        ));
        let tensors = deformation(&smooth_perturbation(coarse.grid, PERTURBATION));
        checks.push(CheckOutcome::at_most("cofactor_det_defect", cofactor_determinant_defect(&tensors), 1e-14));
        let b_coarse = b_formula_study(16, 8, PERTURBATION)?;
        let b_fine = b_formula_study(32, 16, PERTURBATION)?;
        checks.push(CheckOutcome::at_least("b_formula_ratio", b_coarse / b_fine, 3.5));
        manifest.checks = checks;
        manifest.status = "complete".into();
        Ok(())
    })();
    finish(manifest, dir, result)
}
