//! Control laws: continuous state feedback with feedforward, the
//! equivalent continuous PD bank, and the sampled PD law with a filtered
//! derivative and output saturation.

use nalgebra::DVector;

use crate::lqr::GainSet;
use crate::{Error, Result};

/// Symmetric or asymmetric output clamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Saturation {
    pub u_min: f64,
    pub u_max: f64,
}

impl Saturation {
    pub fn new(u_min: f64, u_max: f64) -> Result<Self> {
        if !(u_min.is_finite() && u_max.is_finite()) || u_min >= u_max {
            return Err(Error::Config(
                "saturation limits must be finite with u_min < u_max".into(),
            ));
        }
        Ok(Self { u_min, u_max })
    }

    /// Supply-voltage limits of the robot's DC drive.
    pub fn symmetric_12v() -> Self {
        Self {
            u_min: -12.0,
            u_max: 12.0,
        }
    }
}

/// `clamp(u, u_min, u_max)`.
pub fn saturate(u: f64, sat: Saturation) -> f64 {
    libm::fmin(libm::fmax(u, sat.u_min), sat.u_max)
}

/// Aggregated state-feedback + feedforward law `u = −K·x + K_ref·c_ref`.
pub fn control_sfr_ffr(x: &DVector<f64>, c_ref: &DVector<f64>, gains: &GainSet) -> Result<f64> {
    let n = gains.state_dim();
    let q = gains.output_dim();
    if x.len() != n {
        return Err(Error::Dimension {
            what: "state vector",
            expected: n,
            got: x.len(),
        });
    }
    if c_ref.len() != q {
        return Err(Error::Dimension {
            what: "reference vector",
            expected: q,
            got: c_ref.len(),
        });
    }
    let k = gains.k();
    let mut u_x = 0.0;
    for i in 0..n {
        u_x -= k[i] * x[i];
    }
    let mut u_ref = 0.0;
    for j in 0..q {
        u_ref += k[j] * c_ref[j];
    }
    Ok(u_x + u_ref)
}

/// PD bank on the error and its derivative: `u = Σ_j K_p_j e_j + K_d_j ė_j`.
pub fn control_pd_continuous(
    e: &DVector<f64>,
    e_dot: &DVector<f64>,
    gains: &GainSet,
) -> Result<f64> {
    let q = gains.output_dim();
    if e.len() != q || e_dot.len() != q {
        return Err(Error::Dimension {
            what: "error vectors",
            expected: q,
            got: if e.len() != q { e.len() } else { e_dot.len() },
        });
    }
    let k = gains.k();
    let mut u = 0.0;
    for j in 0..q {
        u += k[j] * e[j] + k[q + j] * e_dot[j];
    }
    Ok(u)
}

/// Sampled PD controller state: per-channel filtered-derivative and
/// previous-error memories plus the sampling and saturation settings.
///
/// The derivative is passed through a first-order low-pass discretized by
/// backward Euler: with `β = N·T_s / (1 + N·T_s)`,
///
/// ```text
/// d_k = (1 − β)·d_{k−1} + β·(e_k − e_{k−1})/T_s
/// ```
///
/// Stepping is a pure state transition: the updated controller is
/// returned alongside the control value and the caller owns sequencing.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePdState {
    gains: GainSet,
    sample_time: f64,
    filter_coefficient: f64,
    saturation: Saturation,
    prev_filtered_derivative: DVector<f64>,
    prev_error: DVector<f64>,
}

impl DiscretePdState {
    pub fn new(
        gains: GainSet,
        sample_time: f64,
        filter_coefficient: f64,
        saturation: Saturation,
    ) -> Result<Self> {
        if !sample_time.is_finite() || sample_time <= 0.0 {
            return Err(Error::Config("sample time must be positive".into()));
        }
        if !filter_coefficient.is_finite() || filter_coefficient <= 0.0 {
            return Err(Error::Config(
                "derivative filter coefficient must be positive".into(),
            ));
        }
        let q = gains.output_dim();
        Ok(Self {
            gains,
            sample_time,
            filter_coefficient,
            saturation,
            prev_filtered_derivative: DVector::zeros(q),
            prev_error: DVector::zeros(q),
        })
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }

    pub fn filter_coefficient(&self) -> f64 {
        self.filter_coefficient
    }

    pub fn saturation(&self) -> Saturation {
        self.saturation
    }

    pub fn gains(&self) -> &GainSet {
        &self.gains
    }

    /// Filter pole placement `β = N·T_s / (1 + N·T_s)`.
    pub fn beta(&self) -> f64 {
        let nts = self.filter_coefficient * self.sample_time;
        nts / (1.0 + nts)
    }

    /// Zeroes both memories.
    pub fn reset(&mut self) {
        self.prev_filtered_derivative.fill(0.0);
        self.prev_error.fill(0.0);
    }
}

/// One sample of the discrete PD law. Returns the saturated control (held
/// by the caller until the next sample) and the updated controller state.
pub fn step_discrete_pd(
    state: &DiscretePdState,
    e_k: &DVector<f64>,
) -> Result<(f64, DiscretePdState)> {
    let q = state.gains.output_dim();
    if e_k.len() != q {
        return Err(Error::Dimension {
            what: "sampled error vector",
            expected: q,
            got: e_k.len(),
        });
    }
    for (i, v) in e_k.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "sampled error",
                index: i,
            });
        }
    }
    let beta = state.beta();
    let k = state.gains.k();
    let mut next = state.clone();
    let mut u_raw = 0.0;
    for j in 0..q {
        let raw_derivative = (e_k[j] - state.prev_error[j]) / state.sample_time;
        let filtered = (1.0 - beta) * state.prev_filtered_derivative[j] + beta * raw_derivative;
        u_raw += k[j] * e_k[j] + k[q + j] * filtered;
        next.prev_filtered_derivative[j] = filtered;
        next.prev_error[j] = e_k[j];
    }
    Ok((saturate(u_raw, state.saturation), next))
}

/// Unsaturated value of the same law; used where the raw magnitude matters.
pub fn step_discrete_pd_raw(state: &DiscretePdState, e_k: &DVector<f64>) -> Result<f64> {
    let q = state.gains.output_dim();
    if e_k.len() != q {
        return Err(Error::Dimension {
            what: "sampled error vector",
            expected: q,
            got: e_k.len(),
        });
    }
    let beta = state.beta();
    let k = state.gains.k();
    let mut u_raw = 0.0;
    for j in 0..q {
        let raw_derivative = (e_k[j] - state.prev_error[j]) / state.sample_time;
        let filtered = (1.0 - beta) * state.prev_filtered_derivative[j] + beta * raw_derivative;
        u_raw += k[j] * e_k[j] + k[q + j] * filtered;
    }
    Ok(u_raw)
}
