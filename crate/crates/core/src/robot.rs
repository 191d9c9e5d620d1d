//! Two-wheeled balancing robot: parameters, lumped dynamic coefficients,
//! the coupled tilt/drive dynamics and their analytic Jacobian.
//!
//! State layout: `x₁` tilt angle, `x₂` position [m], `x₃` tilt rate,
//! `x₄` linear velocity [m/s]; the control is the DC motor voltage [V].
//! Physics is evaluated in radians. [`TiltUnit::Degrees`] keeps the tilt
//! state in degrees and converts it only inside the trigonometric terms,
//! leaving the remaining states untouched; this is the state convention
//! behind the published design matrices and gains of this plant, and it
//! is what `reproduce-paper` checks against.

use alloc::boxed::Box;
use core::f64::consts::PI;
use nalgebra::{DMatrix, DVector};

use crate::model::AffineSystem;
use crate::{Error, Result};

/// Physical parameters of the robot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotParams {
    /// Body moment of inertia [kg·m²].
    pub body_inertia: f64,
    /// Wheel moment of inertia [kg·m²].
    pub wheel_inertia: f64,
    /// Body mass [kg].
    pub body_mass: f64,
    /// Wheel mass [kg].
    pub wheel_mass: f64,
    /// Distance to the centre of gravity [m].
    pub cog_distance: f64,
    /// Motor winding resistance [Ω].
    pub winding_resistance: f64,
    /// Wheel radius [m].
    pub wheel_radius: f64,
    /// Gear ratio [-].
    pub gear_ratio: f64,
    /// Electro-mechanical constant [V·s].
    pub emf_constant: f64,
    /// Torque constant; the data sheet labels it [V·s].
    pub torque_constant: f64,
    /// Gravitational acceleration [m/s²].
    pub gravity: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            body_inertia: 0.0112,
            wheel_inertia: 3.9337e-5,
            body_mass: 1.12,
            wheel_mass: 0.125,
            cog_distance: 0.1,
            winding_resistance: 2.1428,
            wheel_radius: 0.045,
            gear_ratio: 34.014,
            emf_constant: 68.9655e-4,
            torque_constant: 14.8850e-2,
            gravity: 9.81,
        }
    }
}

impl RobotParams {
    /// Checks positivity of every parameter and that the mass-matrix
    /// determinant stays positive for every tilt angle, which holds iff
    /// `α₁·α₂ > (m_n·l)²`.
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.body_inertia,
            self.wheel_inertia,
            self.body_mass,
            self.wheel_mass,
            self.cog_distance,
            self.winding_resistance,
            self.wheel_radius,
            self.gear_ratio,
            self.emf_constant,
            self.torque_constant,
            self.gravity,
        ];
        if all.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Config(
                "robot parameters must all be strictly positive".into(),
            ));
        }
        let tilt_inertia =
            self.body_inertia + self.body_mass * self.cog_distance * self.cog_distance;
        let drive_inertia = 2.0 * self.wheel_inertia / (self.wheel_radius * self.wheel_radius)
            + 2.0 * self.wheel_mass
            + self.body_mass;
        let coupling_max = self.body_mass * self.cog_distance;
        if tilt_inertia * drive_inertia <= coupling_max * coupling_max {
            return Err(Error::Config(
                "mass matrix loses definiteness for these parameters".into(),
            ));
        }
        Ok(())
    }
}

/// Unit in which the tilt states enter the state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiltUnit {
    /// SI-consistent state; trigonometry receives the tilt directly.
    #[default]
    Radians,
    /// Tilt state carried in degrees; converted to radians only inside
    /// the trigonometric terms. Matches the published design matrices.
    Degrees,
}

impl TiltUnit {
    /// Factor applied to the tilt state before trigonometric evaluation.
    pub fn trig_scale(self) -> f64 {
        match self {
            TiltUnit::Radians => 1.0,
            TiltUnit::Degrees => PI / 180.0,
        }
    }
}

/// Lumped coefficients of the coupled tilt/drive equations at one state.
///
/// The tilt equation reads `α₁·ẍ_tilt − α₃·ẍ_drive = α₆ + α₄·u` and the
/// drive equation `α₂·ẍ_drive − α₃·ẍ_tilt = α₇ + α₅·u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    /// α₁: effective tilt inertia, constant.
    pub tilt_inertia: f64,
    /// α₂: effective translational mass, constant.
    pub drive_inertia: f64,
    /// α₃ = −m_n·l·cos(tilt): inertial coupling.
    pub coupling: f64,
    /// α₄: voltage-to-tilt-torque coefficient, constant.
    pub tilt_input: f64,
    /// α₅: voltage-to-drive-force coefficient, constant.
    pub drive_input: f64,
    /// α₆: state-dependent tilt forcing (back-EMF drag and gravity).
    pub tilt_forcing: f64,
    /// α₇: state-dependent drive forcing (back-EMF drag and the
    /// centripetal term `m_n·l·x₃²·sin(tilt)`).
    pub drive_forcing: f64,
}

impl Coefficients {
    /// Determinant of the 2×2 mass matrix, `α₁α₂ − α₃²`.
    pub fn mass_determinant(&self) -> f64 {
        self.tilt_inertia * self.drive_inertia - self.coupling * self.coupling
    }
}

/// Evaluates the lumped coefficients with the tilt in radians.
pub fn coefficients(p: &RobotParams, x: &DVector<f64>) -> Coefficients {
    coefficients_at(p, x[0], x[2], x[3])
}

fn coefficients_at(p: &RobotParams, tilt_rad: f64, tilt_rate: f64, velocity: f64) -> Coefficients {
    let (sin_t, cos_t) = (libm::sin(tilt_rad), libm::cos(tilt_rad));
    let ml = p.body_mass * p.cog_distance;
    let kk = p.emf_constant * p.torque_constant;
    let back_emf_drive = 2.0 * p.gear_ratio * kk / (p.winding_resistance * p.wheel_radius);
    let back_emf_tilt = 2.0 * kk / p.winding_resistance;
    let back_emf_drive_sq = 2.0 * p.gear_ratio * p.gear_ratio * kk
        / (p.winding_resistance * p.wheel_radius * p.wheel_radius);
    Coefficients {
        tilt_inertia: p.body_inertia + ml * p.cog_distance,
        drive_inertia: 2.0 * p.wheel_inertia / (p.wheel_radius * p.wheel_radius)
            + 2.0 * p.wheel_mass
            + p.body_mass,
        coupling: -ml * cos_t,
        tilt_input: -2.0 * p.torque_constant / p.winding_resistance,
        drive_input: 2.0 * p.gear_ratio * p.torque_constant
            / (p.winding_resistance * p.wheel_radius),
        tilt_forcing: back_emf_drive * velocity - back_emf_tilt * tilt_rate
            + ml * p.gravity * sin_t,
        drive_forcing: back_emf_drive * tilt_rate - back_emf_drive_sq * velocity
            + ml * tilt_rate * tilt_rate * sin_t,
    }
}

/// The robot as a concrete plant with a chosen tilt-state unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalancingRobot {
    params: RobotParams,
    tilt_unit: TiltUnit,
}

impl BalancingRobot {
    /// SI-consistent robot (tilt states in radians).
    pub fn new(params: RobotParams) -> Result<Self> {
        Self::with_tilt_unit(params, TiltUnit::Radians)
    }

    pub fn with_tilt_unit(params: RobotParams, tilt_unit: TiltUnit) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, tilt_unit })
    }

    pub fn params(&self) -> &RobotParams {
        &self.params
    }

    pub fn tilt_unit(&self) -> TiltUnit {
        self.tilt_unit
    }

    /// Acceleration-level fields: `(H₃/M, H₄/M)` and `(P₃/M, P₄/M)`.
    fn accel_fields(&self, x: &DVector<f64>) -> ([f64; 2], [f64; 2]) {
        let s = self.tilt_unit.trig_scale();
        let c = coefficients_at(&self.params, x[0] * s, x[2], x[3]);
        let m = c.mass_determinant();
        let h3 = c.drive_inertia * c.tilt_forcing + c.coupling * c.drive_forcing;
        let h4 = c.coupling * c.tilt_forcing + c.tilt_inertia * c.drive_forcing;
        let p3 = c.drive_inertia * c.tilt_input + c.coupling * c.drive_input;
        let p4 = c.coupling * c.tilt_input + c.tilt_inertia * c.drive_input;
        ([h3 / m, h4 / m], [p3 / m, p4 / m])
    }

    /// Full state derivative `ẋ = F(x) + G(x)·u`.
    pub fn dynamics(&self, x: &DVector<f64>, u: f64) -> Result<DVector<f64>> {
        if x.len() != 4 {
            return Err(Error::Dimension {
                what: "robot state",
                expected: 4,
                got: x.len(),
            });
        }
        let s = self.tilt_unit.trig_scale();
        let c = coefficients_at(&self.params, x[0] * s, x[2], x[3]);
        let m = c.mass_determinant();
        if libm::fabs(m) < 1e-12 {
            return Err(Error::SingularMass { determinant: m });
        }
        let (h, p) = self.accel_fields(x);
        let dx = DVector::from_column_slice(&[x[2], x[3], h[0] + p[0] * u, h[1] + p[1] * u]);
        for (i, v) in dx.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "robot state derivative",
                    index: i,
                });
            }
        }
        Ok(dx)
    }

    /// Analytic Jacobian of the drift field.
    ///
    /// Rows 1–2 are the integrator rows `(0,0,1,0)` and `(0,0,0,1)`;
    /// rows 3–4 are closed-form derivatives of `H/M`. Position never
    /// enters the dynamics, so column 2 is identically zero.
    pub fn drift_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let s = self.tilt_unit.trig_scale();
        let p = &self.params;
        let th = x[0] * s;
        let (sin_t, cos_t) = (libm::sin(th), libm::cos(th));
        let ml = p.body_mass * p.cog_distance;
        let c = coefficients_at(p, th, x[2], x[3]);
        let m = c.mass_determinant();

        let kk = p.emf_constant * p.torque_constant;
        let back_emf_drive = 2.0 * p.gear_ratio * kk / (p.winding_resistance * p.wheel_radius);
        let back_emf_tilt = 2.0 * kk / p.winding_resistance;
        let back_emf_drive_sq = 2.0 * p.gear_ratio * p.gear_ratio * kk
            / (p.winding_resistance * p.wheel_radius * p.wheel_radius);

        // Chain-rule factor `s` on every ∂/∂x₁ of a trigonometric term.
        let d_coupling = ml * sin_t * s;
        let d_tilt_forcing_1 = ml * p.gravity * cos_t * s;
        let d_tilt_forcing_3 = -back_emf_tilt;
        let d_tilt_forcing_4 = back_emf_drive;
        let d_drive_forcing_1 = ml * x[2] * x[2] * cos_t * s;
        let d_drive_forcing_3 = back_emf_drive + 2.0 * ml * x[2] * sin_t;
        let d_drive_forcing_4 = -back_emf_drive_sq;
        let d_mass = -2.0 * c.coupling * d_coupling;

        let h3 = c.drive_inertia * c.tilt_forcing + c.coupling * c.drive_forcing;
        let h4 = c.coupling * c.tilt_forcing + c.tilt_inertia * c.drive_forcing;

        let mut jac = DMatrix::zeros(4, 4);
        jac[(0, 2)] = 1.0;
        jac[(1, 3)] = 1.0;
        jac[(2, 0)] = (c.drive_inertia * d_tilt_forcing_1
            + d_coupling * c.drive_forcing
            + c.coupling * d_drive_forcing_1)
            / m
            - (h3 / m) * d_mass / m;
        jac[(2, 2)] = (c.drive_inertia * d_tilt_forcing_3 + c.coupling * d_drive_forcing_3) / m;
        jac[(2, 3)] = (c.drive_inertia * d_tilt_forcing_4 + c.coupling * d_drive_forcing_4) / m;
        jac[(3, 0)] = (d_coupling * c.tilt_forcing
            + c.coupling * d_tilt_forcing_1
            + c.tilt_inertia * d_drive_forcing_1)
            / m
            - (h4 / m) * d_mass / m;
        jac[(3, 2)] = (c.coupling * d_tilt_forcing_3 + c.tilt_inertia * d_drive_forcing_3) / m;
        jac[(3, 3)] = (c.coupling * d_tilt_forcing_4 + c.tilt_inertia * d_drive_forcing_4) / m;
        jac
    }

    /// Wraps the robot as a generic mechanical affine system.
    pub fn affine_system(&self) -> AffineSystem {
        let drift_bot = *self;
        let input_bot = *self;
        let jac_bot = *self;
        AffineSystem::mechanical(
            2,
            move |x| {
                let (h, _) = drift_bot.accel_fields(x);
                DVector::from_column_slice(&h)
            },
            move |x| {
                let (_, p) = input_bot.accel_fields(x);
                DVector::from_column_slice(&p)
            },
            Some(Box::new(move |x| {
                jac_bot.drift_jacobian(x).rows(2, 2).into_owned()
            })),
        )
        .expect("q = 2 is valid")
    }
}
