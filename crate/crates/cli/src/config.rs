//! Project configuration: plant selection, robot parameter overrides,
//! LQR weights and the scenario list.
//!
//! The file format is TOML; all physical quantities carry the units of
//! the robot's data sheet, with angles in degrees at this boundary.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use simo_lqr_core::control::Saturation;
use simo_lqr_core::lqr::LqrWeights;
use simo_lqr_core::model::AffineSystem;
use simo_lqr_core::robot::{BalancingRobot, RobotParams, TiltUnit};
use simo_lqr_core::sim::{ControllerKind, DEFAULT_FILTER_COEFFICIENT};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub out_dir: Option<String>,
    #[serde(default)]
    pub plant: PlantConfig,
    #[serde(default)]
    pub robot: RobotOverrides,
    pub lqr: Option<LqrConfig>,
    #[serde(default)]
    pub scenarios: Vec<ScenarioEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default = "default_tilt_unit")]
    pub tilt_unit: String,
    /// Lower drift rows of a `linear-mechanical` plant (q rows of 2q).
    pub a_lower: Option<Vec<Vec<f64>>>,
    /// Lower input rows of a `linear-mechanical` plant (q values).
    pub b_lower: Option<Vec<f64>>,
}

fn default_kind() -> String {
    "balancing-robot".into()
}

fn default_tilt_unit() -> String {
    "degrees".into()
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            tilt_unit: default_tilt_unit(),
            a_lower: None,
            b_lower: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RobotOverrides {
    pub body_inertia: Option<f64>,
    pub wheel_inertia: Option<f64>,
    pub body_mass: Option<f64>,
    pub wheel_mass: Option<f64>,
    pub cog_distance: Option<f64>,
    pub winding_resistance: Option<f64>,
    pub wheel_radius: Option<f64>,
    pub gear_ratio: Option<f64>,
    pub emf_constant: Option<f64>,
    pub torque_constant: Option<f64>,
    pub gravity: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqrConfig {
    pub q_diag: Vec<f64>,
    pub r: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEntry {
    pub name: String,
    pub controller: String,
    #[serde(default = "default_x0")]
    pub x0_deg: Vec<f64>,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    pub ts_s: Option<f64>,
    pub filter_n: Option<f64>,
    #[serde(default)]
    pub saturation: Option<bool>,
    pub u_min: Option<f64>,
    pub u_max: Option<f64>,
    /// Constant reference, degrees on the tilt channel.
    pub reference: Option<Vec<f64>>,
}

fn default_x0() -> Vec<f64> {
    vec![10.0, 0.0, 0.0, 0.0]
}

fn default_duration() -> f64 {
    25.0
}

fn default_dt() -> f64 {
    1e-3
}

/// Resolved plant: the affine system plus the unit bookkeeping needed at
/// the degree boundary.
pub struct Plant {
    pub system: AffineSystem,
    pub kind: PlantKind,
    pub tilt_unit: TiltUnit,
    pub robot: Option<BalancingRobot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantKind {
    BalancingRobot,
    LinearMechanical,
}

impl ProjectConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(CliError::io(format!("reading config {}", path.display())))?;
        let cfg: ProjectConfig = toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("config parse error: {e}")))?;
        Ok(cfg)
    }

    /// Built-in configuration: the robot in its published design
    /// convention and the four standard stabilization scenarios.
    pub fn default_experiment() -> Self {
        let scenarios = [
            "sfr-continuous",
            "pd-continuous",
            "pd-discrete",
            "sfr-discrete",
        ]
        .iter()
        .map(|c| ScenarioEntry {
            name: (*c).into(),
            controller: (*c).into(),
            x0_deg: default_x0(),
            duration_s: default_duration(),
            dt_s: default_dt(),
            ts_s: c.ends_with("discrete").then_some(0.1),
            filter_n: None,
            saturation: None,
            u_min: None,
            u_max: None,
            reference: None,
        })
        .collect();
        ProjectConfig {
            scenarios,
            ..Default::default()
        }
    }

    pub fn robot_params(&self) -> RobotParams {
        let mut p = RobotParams::default();
        let o = &self.robot;
        macro_rules! apply {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { p.$f = v; } )* };
        }
        apply!(
            body_inertia,
            wheel_inertia,
            body_mass,
            wheel_mass,
            cog_distance,
            winding_resistance,
            wheel_radius,
            gear_ratio,
            emf_constant,
            torque_constant,
            gravity
        );
        p
    }

    pub fn tilt_unit(&self) -> CliResult<TiltUnit> {
        match self.plant.tilt_unit.as_str() {
            "degrees" => Ok(TiltUnit::Degrees),
            "radians" => Ok(TiltUnit::Radians),
            other => Err(CliError::Validation(format!(
                "unknown tilt unit '{other}' (expected 'degrees' or 'radians')"
            ))),
        }
    }

    pub fn plant(&self) -> CliResult<Plant> {
        let tilt_unit = self.tilt_unit()?;
        match self.plant.kind.as_str() {
            "balancing-robot" => {
                let robot = BalancingRobot::with_tilt_unit(self.robot_params(), tilt_unit)
                    .map_err(CliError::from)?;
                Ok(Plant {
                    system: robot.affine_system(),
                    kind: PlantKind::BalancingRobot,
                    tilt_unit,
                    robot: Some(robot),
                })
            }
            "linear-mechanical" => {
                let a_lower = self.plant.a_lower.clone().ok_or_else(|| {
                    CliError::Validation("linear-mechanical plants need a_lower".into())
                })?;
                let b_lower = self.plant.b_lower.clone().ok_or_else(|| {
                    CliError::Validation("linear-mechanical plants need b_lower".into())
                })?;
                let q = a_lower.len();
                let n = 2 * q;
                if q == 0 || a_lower.iter().any(|row| row.len() != n) || b_lower.len() != q {
                    return Err(CliError::Validation(
                        "a_lower must be q rows of 2q entries and b_lower q entries".into(),
                    ));
                }
                let a1 = DMatrix::from_fn(q, n, |r, c| a_lower[r][c]);
                let b1 = DVector::from_vec(b_lower);
                let a_drift = a1.clone();
                let system = AffineSystem::mechanical(
                    q,
                    move |x: &DVector<f64>| &a_drift * x,
                    move |_: &DVector<f64>| b1.clone(),
                    Some(Box::new(move |_: &DVector<f64>| a1.clone())),
                )
                .map_err(CliError::from)?;
                Ok(Plant {
                    system,
                    kind: PlantKind::LinearMechanical,
                    tilt_unit,
                    robot: None,
                })
            }
            other => Err(CliError::Validation(format!(
                "unknown plant kind '{other}' (expected 'balancing-robot' or 'linear-mechanical')"
            ))),
        }
    }

    /// Weights from the config, or the published defaults. The flag in
    /// the returned pair is true when defaults were substituted.
    pub fn weights(&self, state_dim: usize) -> CliResult<(LqrWeights, bool)> {
        match &self.lqr {
            Some(cfg) => {
                if cfg.q_diag.len() != state_dim {
                    return Err(CliError::Validation(format!(
                        "lqr.q_diag must have {state_dim} entries, got {}",
                        cfg.q_diag.len()
                    )));
                }
                let w = LqrWeights::new(DVector::from_vec(cfg.q_diag.clone()), cfg.r)
                    .map_err(CliError::from)?;
                Ok((w, false))
            }
            None => {
                if state_dim != 4 {
                    return Err(CliError::Validation(
                        "no [lqr] section and the plant is not 4-dimensional; \
                         weights must be given explicitly"
                            .into(),
                    ));
                }
                let w = LqrWeights::new(DVector::from_vec(vec![100.0, 100.0, 1.0, 1.0]), 1.0)
                    .map_err(CliError::from)?;
                Ok((w, true))
            }
        }
    }
}

impl ScenarioEntry {
    pub fn controller_kind(&self) -> CliResult<ControllerKind> {
        match self.controller.as_str() {
            "sfr-continuous" => Ok(ControllerKind::SfrContinuous),
            "pd-continuous" => Ok(ControllerKind::PdContinuous),
            "pd-discrete" => Ok(ControllerKind::PdDiscrete),
            "sfr-discrete" => Ok(ControllerKind::SfrDiscrete),
            other => Err(CliError::Validation(format!(
                "unknown controller '{other}'"
            ))),
        }
    }

    /// Saturation resolution: discrete laws clamp to the drive limits
    /// unless explicitly disabled; continuous laws run unclamped unless
    /// explicitly enabled.
    pub fn saturation(&self, kind: ControllerKind) -> CliResult<Option<Saturation>> {
        let wants = self.saturation.unwrap_or(kind.is_discrete());
        if !wants {
            return Ok(None);
        }
        let sat = match (self.u_min, self.u_max) {
            (Some(lo), Some(hi)) => Saturation::new(lo, hi).map_err(CliError::from)?,
            (None, None) => Saturation::symmetric_12v(),
            _ => {
                return Err(CliError::Validation(
                    "u_min and u_max must be given together".into(),
                ))
            }
        };
        Ok(Some(sat))
    }

    pub fn filter_coefficient(&self) -> f64 {
        self.filter_n.unwrap_or(DEFAULT_FILTER_COEFFICIENT)
    }
}
