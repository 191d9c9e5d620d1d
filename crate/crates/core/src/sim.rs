//! Fixed-step closed-loop simulation of a plant under one of the four
//! controller realizations, with settling-time metrics.

use alloc::vec::Vec;
use nalgebra::DVector;

use crate::control::{
    control_pd_continuous, control_sfr_ffr, saturate, DiscretePdState, Saturation,
};
use crate::lqr::{GainSet, LqrWeights};
use crate::model::{evaluate_dynamics, AffineSystem};
use crate::{Error, Result};

/// State magnitude beyond which a run is declared divergent.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// Default derivative-filter coefficient for sampled PD runs.
pub const DEFAULT_FILTER_COEFFICIENT: f64 = 10.0;

/// Controller realization used in a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    SfrContinuous,
    PdContinuous,
    PdDiscrete,
    SfrDiscrete,
}

impl ControllerKind {
    pub fn is_discrete(self) -> bool {
        matches!(
            self,
            ControllerKind::PdDiscrete | ControllerKind::SfrDiscrete
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::SfrContinuous => "sfr-continuous",
            ControllerKind::PdContinuous => "pd-continuous",
            ControllerKind::PdDiscrete => "pd-discrete",
            ControllerKind::SfrDiscrete => "sfr-discrete",
        }
    }
}

/// One closed-loop experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Initial state in the plant's own state units.
    pub initial_state: DVector<f64>,
    /// Run length [s].
    pub duration: f64,
    /// Integrator step [s].
    pub dt: f64,
    pub controller: ControllerKind,
    /// Sampling period for discrete controllers; must be an integer
    /// multiple of `dt`.
    pub sample_time: Option<f64>,
    /// Derivative-filter coefficient for the sampled PD law.
    pub filter_coefficient: f64,
    /// Output clamp; `None` leaves the law unclamped.
    pub saturation: Option<Saturation>,
    /// Constant reference; `None` means the origin.
    pub reference: Option<DVector<f64>>,
}

impl ScenarioConfig {
    pub fn new(
        initial_state: DVector<f64>,
        duration: f64,
        dt: f64,
        controller: ControllerKind,
    ) -> Self {
        Self {
            initial_state,
            duration,
            dt,
            controller,
            sample_time: None,
            filter_coefficient: DEFAULT_FILTER_COEFFICIENT,
            saturation: None,
            reference: None,
        }
    }

    /// Number of integrator steps, after validation.
    fn validated_steps(&self, plant: &AffineSystem) -> Result<(usize, usize)> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::Config("duration must be positive".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config("integrator step must be positive".into()));
        }
        if self.initial_state.len() != plant.state_dim() {
            return Err(Error::Dimension {
                what: "initial state",
                expected: plant.state_dim(),
                got: self.initial_state.len(),
            });
        }
        if let Some(r) = &self.reference {
            if r.len() != plant.output_dim() {
                return Err(Error::Dimension {
                    what: "reference vector",
                    expected: plant.output_dim(),
                    got: r.len(),
                });
            }
        }
        let steps = libm::round(self.duration / self.dt) as usize;
        if steps == 0 {
            return Err(Error::Config("duration shorter than one step".into()));
        }
        let hold = if self.controller.is_discrete() {
            let ts = self
                .sample_time
                .ok_or_else(|| Error::Config("discrete controllers need a sample time".into()))?;
            if !(ts.is_finite() && ts > 0.0) {
                return Err(Error::Config("sample time must be positive".into()));
            }
            let ratio = ts / self.dt;
            let m = libm::round(ratio);
            if m < 1.0 || libm::fabs(ratio - m) > 1e-9 * libm::fmax(1.0, ratio) {
                return Err(Error::Config(
                    "sample time must be an integer multiple of the integrator step".into(),
                ));
            }
            m as usize
        } else {
            1
        };
        Ok((steps, hold))
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimOutcome {
    Completed,
    /// The run was cut short; the trajectory holds the samples up to and
    /// including the offending state.
    Diverged {
        time: f64,
        state_index: usize,
        value: f64,
    },
}

/// Time-indexed record of a closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub time: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<f64>,
    /// Constant reference the controller tracked.
    pub reference: DVector<f64>,
    pub controller: ControllerKind,
    pub dt: f64,
    pub sample_time: Option<f64>,
    pub saturation: Option<Saturation>,
    pub initial_state: DVector<f64>,
    pub outcome: SimOutcome,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states
            .last()
            .expect("trajectory has at least one sample")
    }

    pub fn completed(&self) -> bool {
        self.outcome == SimOutcome::Completed
    }
}

/// One classical fourth-order Runge–Kutta step with the control held
/// constant across the step.
pub fn rk4_step(sys: &AffineSystem, x: &DVector<f64>, u: f64, dt: f64) -> Result<DVector<f64>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config("integrator step must be positive".into()));
    }
    let k1 = evaluate_dynamics(sys, x, u)?;
    let k2 = evaluate_dynamics(sys, &(x + &k1 * (dt * 0.5)), u)?;
    let k3 = evaluate_dynamics(sys, &(x + &k2 * (dt * 0.5)), u)?;
    let k4 = evaluate_dynamics(sys, &(x + &k3 * dt), u)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Runs a closed-loop experiment.
///
/// Continuous laws are re-evaluated every integrator step; sampled laws
/// are evaluated every `sample_time` and held (zero-order hold) between
/// samples. A state leaving `[-1e6, 1e6]` or turning non-finite stops
/// the run; the partial trajectory is returned with a
/// [`SimOutcome::Diverged`] diagnostic.
pub fn simulate(
    plant: &AffineSystem,
    gains: &GainSet,
    scenario: &ScenarioConfig,
) -> Result<Trajectory> {
    let (steps, hold) = scenario.validated_steps(plant)?;
    let n = plant.state_dim();
    let q = plant.output_dim();
    if gains.state_dim() != n {
        return Err(Error::Dimension {
            what: "gain set",
            expected: n,
            got: gains.state_dim(),
        });
    }
    let pd_law = matches!(
        scenario.controller,
        ControllerKind::PdContinuous | ControllerKind::PdDiscrete
    );
    if pd_law && !plant.is_mechanical() {
        return Err(Error::Config(
            "PD realizations need the integrator structure of a mechanical plant".into(),
        ));
    }

    let c_ref = scenario
        .reference
        .clone()
        .unwrap_or_else(|| DVector::zeros(q));
    let mut pd_state = if scenario.controller == ControllerKind::PdDiscrete {
        Some(DiscretePdState::new(
            gains.clone(),
            scenario.sample_time.unwrap_or(scenario.dt),
            scenario.filter_coefficient,
            scenario.saturation.unwrap_or(Saturation {
                u_min: -f64::MAX,
                u_max: f64::MAX,
            }),
        )?)
    } else {
        None
    };

    let mut traj = Trajectory {
        time: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        controls: Vec::with_capacity(steps + 1),
        reference: c_ref.clone(),
        controller: scenario.controller,
        dt: scenario.dt,
        sample_time: scenario
            .controller
            .is_discrete()
            .then_some(scenario.sample_time)
            .flatten(),
        saturation: scenario.saturation,
        initial_state: scenario.initial_state.clone(),
        outcome: SimOutcome::Completed,
    };

    let clamp = |u: f64| match scenario.saturation {
        Some(sat) => saturate(u, sat),
        None => u,
    };
    let continuous_control = |x: &DVector<f64>| -> Result<f64> {
        match scenario.controller {
            ControllerKind::SfrContinuous | ControllerKind::SfrDiscrete => {
                Ok(clamp(control_sfr_ffr(x, &c_ref, gains)?))
            }
            ControllerKind::PdContinuous => {
                let e = &c_ref - x.rows(0, q);
                let e_dot = -x.rows(q, q).into_owned();
                Ok(clamp(control_pd_continuous(&e, &e_dot, gains)?))
            }
            ControllerKind::PdDiscrete => unreachable!("sampled PD handled separately"),
        }
    };

    let mut x = scenario.initial_state.clone();
    let mut u = 0.0;
    for i in 0..steps {
        let t = i as f64 * scenario.dt;
        let refresh = !scenario.controller.is_discrete() || i % hold == 0;
        if refresh {
            u = match (&mut pd_state, scenario.controller) {
                (Some(pd), ControllerKind::PdDiscrete) => {
                    let e_k = &c_ref - x.rows(0, q);
                    let (u_k, next) = crate::control::step_discrete_pd(pd, &e_k)?;
                    *pd = next;
                    u_k
                }
                _ => continuous_control(&x)?,
            };
        }
        traj.time.push(t);
        traj.states.push(x.clone());
        traj.controls.push(u);

        x = match rk4_step(plant, &x, u, scenario.dt) {
            Ok(next) => next,
            Err(_) => {
                traj.outcome = SimOutcome::Diverged {
                    time: t + scenario.dt,
                    state_index: 0,
                    value: f64::NAN,
                };
                return Ok(traj);
            }
        };
        if let Some((idx, value)) = escape_check(&x) {
            let t_next = (i + 1) as f64 * scenario.dt;
            traj.time.push(t_next);
            traj.states.push(x.clone());
            traj.controls.push(u);
            traj.outcome = SimOutcome::Diverged {
                time: t_next,
                state_index: idx,
                value,
            };
            return Ok(traj);
        }
    }
    let t_final = steps as f64 * scenario.dt;
    let u_final = if scenario.controller.is_discrete() {
        u
    } else {
        continuous_control(&x)?
    };
    traj.time.push(t_final);
    traj.states.push(x);
    traj.controls.push(u_final);
    Ok(traj)
}

fn escape_check(x: &DVector<f64>) -> Option<(usize, f64)> {
    x.iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || libm::fabs(**v) > DIVERGENCE_BOUND)
        .map(|(i, v)| (i, *v))
}

/// Settling metrics of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SettlingReport {
    /// Last time the tilt left its band; `None` when still outside at
    /// the final sample.
    pub tilt_settling: Option<f64>,
    /// Same for the position channel.
    pub position_settling: Option<f64>,
    pub max_abs_control: f64,
    /// Fraction of control samples pinned at a saturation limit.
    pub saturation_duty: f64,
}

/// Computes settling times against symmetric bands on the first two
/// state channels (tilt, position), plus control statistics.
pub fn settling_metrics(traj: &Trajectory, tilt_band: f64, position_band: f64) -> SettlingReport {
    let settle = |channel: usize, band: f64| -> Option<f64> {
        let mut last_violation = None;
        for (i, x) in traj.states.iter().enumerate() {
            if libm::fabs(x[channel]) > band {
                last_violation = Some(i);
            }
        }
        match last_violation {
            None => Some(0.0),
            Some(i) if i + 1 == traj.states.len() => None,
            Some(i) => Some(traj.time[i]),
        }
    };
    let max_abs_control = traj
        .controls
        .iter()
        .fold(0.0_f64, |acc, u| libm::fmax(acc, libm::fabs(*u)));
    let saturation_duty = match traj.saturation {
        Some(sat) => {
            let at_limit = traj
                .controls
                .iter()
                .filter(|u| **u >= sat.u_max - 1e-12 || **u <= sat.u_min + 1e-12)
                .count();
            at_limit as f64 / traj.controls.len() as f64
        }
        None => 0.0,
    };
    SettlingReport {
        tilt_settling: settle(0, tilt_band),
        position_settling: settle(1, position_band),
        max_abs_control,
        saturation_duty,
    }
}

/// Left-rectangle integral of the quadratic regulator cost
/// `xᵀQx + R·u²` along a trajectory.
pub fn quadratic_cost(traj: &Trajectory, weights: &LqrWeights) -> f64 {
    let q = weights.q_matrix();
    let mut acc = 0.0;
    for i in 0..traj.states.len().saturating_sub(1) {
        let x = &traj.states[i];
        let u = traj.controls[i];
        acc += (x.dot(&(&q * x)) + weights.r() * u * u) * traj.dt;
    }
    acc
}
