//! Machine-readable outputs: JSON serializations of linear models and
//! gain sets, and the trajectory CSV format.
//!
//! CSV schema (fixed): `t,x1_deg,x2_m,x3_degps,x4_mps,u_V,cref1_deg,cref2_m`.
//! Floats are written with the shortest representation that round-trips,
//! so identical runs produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};
use simo_lqr_core::linearize::{ControllabilityReport, LinearModel};
use simo_lqr_core::lqr::GainSet;
use simo_lqr_core::robot::TiltUnit;
use simo_lqr_core::sim::Trajectory;

use crate::error::{CliError, CliResult};

pub const CSV_HEADER: &str = "t,x1_deg,x2_m,x3_degps,x4_mps,u_V,cref1_deg,cref2_m";

/// Serialized linear model plus its controllability analysis.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LinearModelFile {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub e: Vec<Vec<f64>>,
    pub x_e: Vec<f64>,
    pub u_e: f64,
    pub epsilon_applied: bool,
    pub epsilon: Vec<f64>,
    pub drift_residual_inf: f64,
    pub controllability: ControllabilityFile,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ControllabilityFile {
    pub determinant: f64,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub controllable: bool,
}

impl LinearModelFile {
    pub fn new(model: &LinearModel, report: &ControllabilityReport) -> Self {
        Self {
            a: matrix_rows(&model.a),
            b: model.b.column(0).iter().copied().collect(),
            e: matrix_rows(&model.e),
            x_e: model.x_e.iter().copied().collect(),
            u_e: model.u_e,
            epsilon_applied: model.epsilon_applied,
            epsilon: model.epsilon.iter().copied().collect(),
            drift_residual_inf: model.drift_residual_inf,
            controllability: ControllabilityFile {
                determinant: report.determinant,
                rank: report.rank,
                singular_values: report.singular_values.clone(),
                controllable: report.controllable,
            },
        }
    }

    pub fn to_model(&self) -> LinearModel {
        let n = self.a.len();
        let q = self.e.len();
        LinearModel {
            a: DMatrix::from_fn(n, n, |r, c| self.a[r][c]),
            b: DMatrix::from_fn(n, 1, |r, _| self.b[r]),
            e: DMatrix::from_fn(q, n, |r, c| self.e[r][c]),
            x_e: DVector::from_vec(self.x_e.clone()),
            u_e: self.u_e,
            epsilon_applied: self.epsilon_applied,
            epsilon: DVector::from_vec(self.epsilon.clone()),
            drift_residual_inf: self.drift_residual_inf,
        }
    }
}

/// Serialized gain set with the design context.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GainFile {
    pub k: Vec<f64>,
    pub k_p: Vec<f64>,
    pub k_d: Vec<f64>,
    pub k_ref: Vec<f64>,
    pub q_diag: Vec<f64>,
    pub r: f64,
    pub care_residual: f64,
    /// Closed-loop eigenvalues as (re, im) pairs.
    pub closed_loop_eigenvalues: Vec<(f64, f64)>,
}

impl GainFile {
    pub fn gain_set(&self) -> GainSet {
        GainSet::from_feedback(RowDVector::from_row_slice(&self.k))
            .expect("stored gain row has even length")
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| m.row(r).iter().copied().collect())
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Validation(format!("serialization failed: {e}")))?;
    std::fs::write(path, text).map_err(CliError::io(format!("writing {}", path.display())))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(CliError::io(format!("reading {}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: parse error: {e}", path.display())))
}

/// Conversion between internal state units and the degree-based CSV/CLI
/// boundary for tilt channels (state indices 0 and 2 of the robot).
#[derive(Debug, Clone, Copy)]
pub struct DegreeBoundary {
    tilt_unit: TiltUnit,
}

impl DegreeBoundary {
    pub fn new(tilt_unit: TiltUnit) -> Self {
        Self { tilt_unit }
    }

    fn to_internal_factor(self) -> f64 {
        match self.tilt_unit {
            TiltUnit::Radians => core::f64::consts::PI / 180.0,
            TiltUnit::Degrees => 1.0,
        }
    }

    /// Boundary vector (degrees on tilt channels) → plant state.
    pub fn state_from_degrees(&self, deg: &[f64]) -> DVector<f64> {
        let f = self.to_internal_factor();
        DVector::from_fn(deg.len(), |i, _| {
            if i == 0 || i == 2 {
                deg[i] * f
            } else {
                deg[i]
            }
        })
    }

    /// Plant state → boundary vector.
    pub fn state_to_degrees(&self, x: &DVector<f64>) -> Vec<f64> {
        let f = self.to_internal_factor();
        x.iter()
            .enumerate()
            .map(|(i, v)| if i == 0 || i == 2 { v / f } else { *v })
            .collect()
    }

    /// Boundary reference (tilt in degrees, position in metres) →
    /// internal reference.
    pub fn reference_from_degrees(&self, deg: &[f64]) -> DVector<f64> {
        let f = self.to_internal_factor();
        DVector::from_fn(deg.len(), |i, _| if i == 0 { deg[i] * f } else { deg[i] })
    }

    pub fn reference_to_degrees(&self, r: &DVector<f64>) -> Vec<f64> {
        let f = self.to_internal_factor();
        r.iter()
            .enumerate()
            .map(|(i, v)| if i == 0 { v / f } else { *v })
            .collect()
    }
}

/// Renders a robot trajectory as CSV.
pub fn trajectory_csv(traj: &Trajectory, boundary: DegreeBoundary) -> String {
    let mut out = String::with_capacity(64 * (traj.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    let cref = boundary.reference_to_degrees(&traj.reference);
    for i in 0..traj.len() {
        let x = boundary.state_to_degrees(&traj.states[i]);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            traj.time[i], x[0], x[1], x[2], x[3], traj.controls[i], cref[0], cref[1]
        );
    }
    out
}
