//! Run configuration read from TOML. Unknown keys are rejected and the raw
//! text is kept for a bit-exact echo in the manifest.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galerkin::Scheme;
use crate::grid::{Grid, Profile, TabulatedProfile, WeightField};
use crate::kinematics::VectorField;
use crate::picard::PicardConfig;

const MAX_NODES: usize = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n1: usize,
    pub n2: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { n1: 32, n2: 32 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Sine,
    Parabolic,
    PerturbedSine,
    Tabulated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    pub profile: ProfileKind,
    /// Amplitude of the perturbed-sine modulation.
    pub epsilon: Option<f64>,
    /// CSV table for the tabulated profile, relative to the config file.
    pub path: Option<PathBuf>,
}

impl Default for WeightSection {
    fn default() -> Self {
        WeightSection {
            profile: ProfileKind::Sine,
            epsilon: None,
            path: None,
        }
    }
}

/// `u₀ = a·(sin 2πx1 sin πx2, 0) + δ·(cos 2πx1 sin πx2, 0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub amplitude: f64,
    pub perturbation: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            amplitude: 0.05,
            perturbation: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub n_modes: usize,
    pub t_final: f64,
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub scheme: Scheme,
    pub pressure: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            n_modes: 32,
            t_final: 0.1,
            dt: 0.1 / 200.0,
            tol: 1e-8,
            max_iter: 50,
            max_halvings: 6,
            scheme: Scheme::CrankNicolson,
            pressure: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergySection {
    pub max_order: usize,
}

impl Default for EnergySection {
    fn default() -> Self {
        EnergySection { max_order: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Snapshot files are written every `stride` time steps and at T.
    pub stride: usize,
    /// Number of eigenmodes written by `eigen`.
    pub mode_snapshots: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            stride: 40,
            mode_snapshots: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSection {
    pub seed: u64,
    pub samples: usize,
}

impl Default for CheckSection {
    fn default() -> Self {
        CheckSection { seed: 17, samples: 100 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub grid: GridSection,
    pub weight: WeightSection,
    pub initial: InitialSection,
    pub solver: SolverSection,
    pub energy: EnergySection,
    pub output: OutputSection,
    pub check: CheckSection,
}

/// A validated configuration with the text it was parsed from.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: SolverConfig,
    pub source: String,
    /// Directory that relative paths are resolved against.
    pub base: PathBuf,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl SolverConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: SolverConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if !(4..=MAX_NODES).contains(&g.n1) || !(4..=MAX_NODES).contains(&g.n2) {
            return Err(bad(format!("grid sizes must lie in 4..={MAX_NODES}")));
        }
        match self.weight.profile {
            ProfileKind::PerturbedSine => {
                let eps = self.weight.epsilon.ok_or_else(|| bad("perturbed-sine needs weight.epsilon"))?;
                if !(eps.abs() < 0.5) {
                    return Err(bad("weight.epsilon must satisfy |epsilon| < 1/2"));
                }
            }
            ProfileKind::Tabulated => {
                if self.weight.path.is_none() {
                    return Err(bad("tabulated profile needs weight.path"));
                }
            }
            ProfileKind::Sine | ProfileKind::Parabolic => {}
        }
        if self.weight.profile != ProfileKind::PerturbedSine && self.weight.epsilon.is_some() {
            return Err(bad("weight.epsilon only applies to perturbed-sine"));
        }
        if self.weight.profile != ProfileKind::Tabulated && self.weight.path.is_some() {
            return Err(bad("weight.path only applies to tabulated"));
        }
        let i = &self.initial;
        if !i.amplitude.is_finite() || !i.perturbation.is_finite() {
            return Err(bad("initial amplitudes must be finite"));
        }
        let s = &self.solver;
        if s.n_modes == 0 || s.n_modes > g.n1 * g.n2 {
            return Err(bad("solver.n_modes must lie in 1..=n1*n2"));
        }
        if !(s.t_final >= 0.0 && s.t_final.is_finite()) {
            return Err(bad("solver.t_final must be nonnegative"));
        }
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(bad("solver.dt must be positive"));
        }
        let steps = s.t_final / s.dt;
        if (steps - steps.round()).abs() > 1e-6 {
            return Err(bad("solver.t_final must be a whole number of solver.dt steps"));
        }
        if !(s.tol > 0.0 && s.tol < 1.0) {
            return Err(bad("solver.tol must lie in (0, 1)"));
        }
        if !(1..=1000).contains(&s.max_iter) {
            return Err(bad("solver.max_iter must lie in 1..=1000"));
        }
        if s.max_halvings > 30 {
            return Err(bad("solver.max_halvings must be at most 30"));
        }
        if !(2..=4).contains(&self.energy.max_order) {
            return Err(bad("energy.max_order must lie in 2..=4"));
        }
        let steps = self.n_steps();
        if steps > 0 && steps < self.energy.max_order / 2 {
            return Err(bad("too few time steps for the energy time differences"));
        }
        if self.output.stride == 0 {
            return Err(bad("output.stride must be positive"));
        }
        if self.check.samples == 0 {
            return Err(bad("check.samples must be positive"));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.solver.t_final / self.solver.dt).round() as usize
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.n1, self.grid.n2)
    }

    /// The weight profile; tabulated paths are resolved against `base`.
    pub fn profile(&self, base: &Path) -> Result<Profile> {
        Ok(match self.weight.profile {
            ProfileKind::Sine => Profile::Sine,
            ProfileKind::Parabolic => Profile::Parabolic,
            ProfileKind::PerturbedSine => Profile::perturbed_sine(self.weight.epsilon.unwrap_or(0.0))?,
            ProfileKind::Tabulated => {
                let path = self.weight.path.as_deref().ok_or_else(|| bad("tabulated profile needs weight.path"))?;
                let table = TabulatedProfile::from_csv(&base.join(path)).map_err(|e| bad(e.to_string()))?;
                Profile::Tabulated(table)
            }
        })
    }

    pub fn weight(&self, base: &Path) -> Result<WeightField> {
        WeightField::new(self.profile(base)?, self.grid()?)
    }

    pub fn initial_velocity(&self, grid: &Grid) -> VectorField {
        let (a, d) = (self.initial.amplitude, self.initial.perturbation);
        [
            grid.sample(|x1, x2| (a * (2.0 * PI * x1).sin() + d * (2.0 * PI * x1).cos()) * (PI * x2).sin()),
            vec![0.0; grid.len()],
        ]
    }

    pub fn picard(&self) -> PicardConfig {
        let s = &self.solver;
        PicardConfig {
            t_final: s.t_final,
            n_steps: self.n_steps(),
            scheme: s.scheme,
            pressure: s.pressure,
            tol: s.tol,
            max_iter: s.max_iter,
            max_halvings: s.max_halvings,
        }
    }
}

impl LoadedConfig {
    pub fn from_text(source: String, base: PathBuf) -> Result<Self> {
        let config = SolverConfig::parse(&source)?;
        Ok(LoadedConfig { config, source, base })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let source = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_text(source, base)
    }

    /// Output directory; relative paths are taken from the working directory.
    pub fn output_dir(&self) -> &Path {
        &self.config.output.dir
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = SolverConfig::parse("").unwrap();
        assert_eq!(c, SolverConfig::default());
        assert_eq!(c.n_steps(), 200);
        assert_eq!(c.picard().n_steps, 200);
    }

    #[test]
    fn unknown_keys_and_bad_ranges_are_rejected() {
        for text in [
            "[grid]\nn1 = 32\nn2 = 32\nn3 = 4\n",
            "[solver]\nmodes = 4\n",
            "[bogus]\n",
            "[energy]\nmax_order = 5\n",
            "[grid]\nn1 = 2\nn2 = 32\n",
            "[solver]\nt_final = 0.1\ndt = 0.03\n",
            "[weight]\nprofile = \"perturbed-sine\"\n",
            "[weight]\nprofile = \"sine\"\nepsilon = 0.1\n",
            "[weight]\nprofile = \"cosine\"\n",
            "[solver]\nscheme = \"rk4\"\n",
        ] {
            assert!(matches!(SolverConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn sections_parse() {
        let c = SolverConfig::parse(
            "[weight]\nprofile = \"perturbed-sine\"\nepsilon = 0.1\n\n[solver]\nscheme = \"implicit-euler\"\npressure = false\nt_final = 0.0\n",
        )
        .unwrap();
        assert_eq!(c.weight.epsilon, Some(0.1));
        assert_eq!(c.solver.scheme, Scheme::ImplicitEuler);
        assert_eq!(c.n_steps(), 0);
        assert!(matches!(c.profile(Path::new(".")).unwrap(), Profile::PerturbedSine { .. }));
    }
}
