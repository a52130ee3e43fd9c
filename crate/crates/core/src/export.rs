//! Run artifacts: CSV files and the TOML manifest.
//!
//! Every writer is deterministic given its inputs; floats are written in
//! shortest round-trip form.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::eigenbasis::SpectralBasis;
use crate::energy::EnergyReport;
use crate::error::{Error, Result};
use crate::eulerian::EulerianSnapshot;
use crate::grid::WeightField;
use crate::kinematics::{deformation, FlowMapState};
use crate::picard::PicardTrace;

pub const MANIFEST_NAME: &str = "manifest.toml";
pub const MANIFEST_FORMAT: u32 = 1;

/// Creation time recorded in manifests. `SOURCE_DATE_EPOCH` wins over the
/// system clock so reruns can be byte-identical.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RunStamp {
    pub unix_seconds: u64,
}

impl RunStamp {
    pub fn fixed(unix_seconds: u64) -> Self {
        RunStamp { unix_seconds }
    }

    pub fn from_env() -> Self {
        let seconds = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
        RunStamp::fixed(seconds)
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

fn write_rows<R: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_energy_csv(path: &Path, reports: &[EnergyReport]) -> Result<()> {
    write_rows(
        path,
        &["t", "E_total", "E_en", "E_el", "J_min", "J_max", "b_min_eig", "boundary_residual"],
        reports.iter().map(|r| {
            (
                r.t,
                r.e_total,
                r.e_en,
                r.e_el,
                r.bounds.j_min,
                r.bounds.j_max,
                r.bounds.b_min_eig,
                r.boundary_residual,
            )
        }),
    )
}

pub fn write_picard_csv(path: &Path, trace: &PicardTrace) -> Result<()> {
    write_rows(
        path,
        &["iter", "d_n", "e_n", "ratio", "T"],
        trace.iterates.iter().map(|i| (i.iter, i.d, i.e, i.ratio, i.t_final)),
    )
}

/// Nodal Lagrangian state: positions, velocity, `J` and `ρ₀J⁻¹`.
pub fn write_state_csv(path: &Path, state: &FlowMapState, w: &WeightField) -> Result<()> {
    let grid = state.grid;
    let eta = state.eta();
    let j = deformation(state).j();
    write_rows(
        path,
        &["x1", "x2", "eta1", "eta2", "v1", "v2", "J", "rho"],
        (0..grid.len()).map(|k| {
            let (x1, x2) = grid.node(k);
            (x1, x2, eta[0][k], eta[1][k], state.v[0][k], state.v[1][k], j[k], w.nodes[k] / j[k])
        }),
    )
}

pub fn write_eulerian_csv(path: &Path, snap: &EulerianSnapshot) -> Result<()> {
    write_rows(
        path,
        &["y1", "y2", "rho", "u1", "u2"],
        (0..snap.len()).map(|k| (snap.points[k][0], snap.points[k][1], snap.rho[k], snap.u[0][k], snap.u[1][k])),
    )
}

/// Γ(t) polylines of every snapshot in one file.
pub fn write_boundary_csv(path: &Path, snapshots: &[(usize, EulerianSnapshot)]) -> Result<()> {
    let rows = snapshots.iter().flat_map(|(index, snap)| {
        snap.boundary.iter().flat_map(move |curve| {
            (0..curve.vertices.len()).map(move |k| {
                (
                    *index,
                    snap.t,
                    curve.side.name(),
                    k,
                    curve.vertices[k][0],
                    curve.vertices[k][1],
                    curve.normals[k][0],
                    curve.normals[k][1],
                    curve.curvature[k],
                )
            })
        })
    });
    write_rows(path, &["index", "t", "side", "vertex", "y1", "y2", "n1", "n2", "curvature"], rows)
}

pub fn write_eigenvalues_csv(path: &Path, basis: &SpectralBasis) -> Result<()> {
    write_rows(path, &["index", "sigma"], basis.sigma.iter().enumerate().map(|(l, s)| (l + 1, *s)))
}

/// Node coordinates and values of mode `l` (zero-based).
pub fn write_mode_csv(path: &Path, basis: &SpectralBasis, l: usize) -> Result<()> {
    let grid = basis.grid;
    let mode = basis.mode(l);
    write_rows(
        path,
        &["x1", "x2", "w"],
        (0..grid.len()).map(|k| {
            let (x1, x2) = grid.node(k);
            (x1, x2, mode[k])
        }),
    )
}

/// Outcome of one named property check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckOutcome {
    /// Passes when `value ≤ threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        CheckOutcome {
            name: name.into(),
            value,
            threshold,
            pass: value <= threshold,
        }
    }

    /// Passes when `value ≥ threshold`.
    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        CheckOutcome {
            name: name.into(),
            value,
            threshold,
            pass: value >= threshold,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    pub converged: bool,
    pub iterations: usize,
    pub halvings: usize,
    pub t_final: f64,
    pub n_steps: usize,
    pub n_modes: usize,
    pub final_distance: Option<f64>,
}

/// Written once per command, after completion or failure.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub format: u32,
    pub package: String,
    pub version: String,
    pub command: String,
    pub created_unix: u64,
    pub status: String,
    /// Verbatim configuration text.
    pub config: String,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceSummary>,
    pub checks: Vec<CheckOutcome>,
}

impl RunManifest {
    pub fn new(command: &str, config: &str, stamp: RunStamp) -> Self {
        RunManifest {
            format: MANIFEST_FORMAT,
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            created_unix: stamp.unix_seconds,
            status: "incomplete".into(),
            config: config.into(),
            files: Vec::new(),
            convergence: None,
            checks: Vec::new(),
        }
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_NAME);
        let text = toml::to_string(self).map_err(|e| Error::Config(format!("manifest: {e}")))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Indices written as snapshots: every `stride`-th step and the last one.
pub fn snapshot_indices(len: usize, stride: usize) -> Vec<usize> {
    if len == 0 {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..len).step_by(stride.max(1)).collect();
    if idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_indices_cover_the_end() {
        assert_eq!(snapshot_indices(0, 3), Vec::<usize>::new());
        assert_eq!(snapshot_indices(1, 3), vec![0]);
        assert_eq!(snapshot_indices(7, 3), vec![0, 3, 6]);
        assert_eq!(snapshot_indices(8, 3), vec![0, 3, 6, 7]);
    }

    #[test]
    fn manifest_echoes_config_exactly() {
        let text = "# comment\n[grid]\nn1 = 8\n\n\tn2 = 8 \"quoted\" \\ \n";
        let dir = tempfile::tempdir().unwrap();
        let m = RunManifest::new("run", text, RunStamp::fixed(1));
        let path = m.write(dir.path()).unwrap();
        let back: toml::Value = toml::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(back["config"].as_str().unwrap(), text);
        assert_eq!(back["created_unix"].as_integer().unwrap(), 1);
    }
}
