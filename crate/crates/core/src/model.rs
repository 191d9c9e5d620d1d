//! Nonlinear affine system representation.
//!
//! A system is `ẋ = F(x) + G(x)·u` with a scalar control `u`, state
//! dimension `n = 2q` and `q` controlled outputs `c = E·x`,
//! `E = [I_q | 0]`. Mechanical systems additionally have the integrator
//! structure `F_j(x) = x_{q+j}`, `G_j(x) = 0` for `j = 1..q`; the
//! [`AffineSystem::mechanical`] constructor enforces it structurally.

use alloc::boxed::Box;
use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Drift or input field: maps a state to a vector of the same dimension.
pub type FieldFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
/// Analytic Jacobian of the drift field.
pub type JacobianFn = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Nonlinear control-affine SIMO system.
pub struct AffineSystem {
    n: usize,
    q: usize,
    mechanical: bool,
    drift: FieldFn,
    input: FieldFn,
    jacobian: Option<JacobianFn>,
}

impl core::fmt::Debug for AffineSystem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("AffineSystem")
            .field("n", &self.n)
            .field("q", &self.q)
            .field("mechanical", &self.mechanical)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl AffineSystem {
    /// General affine system with full-state drift and input fields.
    ///
    /// `q` is the number of controlled outputs; the state dimension is
    /// `n = 2q`.
    pub fn new(
        q: usize,
        drift: FieldFn,
        input: FieldFn,
        jacobian: Option<JacobianFn>,
    ) -> Result<Self> {
        if q == 0 {
            return Err(Error::Config("output count q must be positive".into()));
        }
        Ok(Self {
            n: 2 * q,
            q,
            mechanical: false,
            drift,
            input,
            jacobian,
        })
    }

    /// Mechanical system given only the acceleration-level fields.
    ///
    /// `lower_drift` and `lower_input` return the last `q` components of
    /// `F` and `G`; the first `q` rows are emitted structurally as
    /// `F_j = x_{q+j}`, `G_j = 0`. `lower_jacobian`, when provided,
    /// returns the `q x n` Jacobian of `lower_drift`.
    pub fn mechanical(
        q: usize,
        lower_drift: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        lower_input: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        lower_jacobian: Option<JacobianFn>,
    ) -> Result<Self> {
        if q == 0 {
            return Err(Error::Config("output count q must be positive".into()));
        }
        let n = 2 * q;
        let drift = Box::new(move |x: &DVector<f64>| {
            let mut out = DVector::zeros(n);
            for j in 0..q {
                out[j] = x[q + j];
            }
            out.rows_mut(q, q).copy_from(&lower_drift(x));
            out
        });
        let input = Box::new(move |x: &DVector<f64>| {
            let mut out = DVector::zeros(n);
            out.rows_mut(q, q).copy_from(&lower_input(x));
            out
        });
        let jacobian: Option<JacobianFn> = lower_jacobian.map(|lj| {
            Box::new(move |x: &DVector<f64>| {
                let mut jac = DMatrix::zeros(n, n);
                for j in 0..q {
                    jac[(j, q + j)] = 1.0;
                }
                jac.rows_mut(q, q).copy_from(&lj(x));
                jac
            }) as JacobianFn
        });
        Ok(Self {
            n,
            q,
            mechanical: true,
            drift,
            input,
            jacobian,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn output_dim(&self) -> usize {
        self.q
    }

    /// Whether the integrator structure of the first `q` rows is guaranteed.
    pub fn is_mechanical(&self) -> bool {
        self.mechanical
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    /// Drift field `F(x)`.
    pub fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.drift)(x)
    }

    /// Input field `G(x)`.
    pub fn input_field(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.input)(x)
    }

    /// Output matrix `E = [I_q | 0]`.
    pub fn output_matrix(&self) -> DMatrix<f64> {
        let mut e = DMatrix::zeros(self.q, self.n);
        for j in 0..self.q {
            e[(j, j)] = 1.0;
        }
        e
    }

    /// Drift Jacobian at `x`: analytic when supplied, otherwise central
    /// differences.
    pub fn jacobian_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        match &self.jacobian {
            Some(j) => Ok(j(x)),
            None => numeric_jacobian(self, x),
        }
    }
}

/// Evaluates `ẋ = F(x) + G(x)·u`.
pub fn evaluate_dynamics(sys: &AffineSystem, x: &DVector<f64>, u: f64) -> Result<DVector<f64>> {
    if x.len() != sys.n {
        return Err(Error::Dimension {
            what: "state vector",
            expected: sys.n,
            got: x.len(),
        });
    }
    if !u.is_finite() {
        return Err(Error::NonFinite {
            what: "control input",
            index: 0,
        });
    }
    let mut dx = sys.drift(x);
    dx.axpy(u, &sys.input_field(x), 1.0);
    for (i, v) in dx.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "state derivative",
                index: i,
            });
        }
    }
    Ok(dx)
}

/// Central-difference Jacobian of the drift field, step
/// `h_i = 1e-6 * max(1, |x_i|)` per coordinate.
pub fn numeric_jacobian(sys: &AffineSystem, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = sys.n;
    if x.len() != n {
        return Err(Error::Dimension {
            what: "state vector",
            expected: n,
            got: x.len(),
        });
    }
    let mut jac = DMatrix::zeros(n, n);
    let mut probe = x.clone();
    for i in 0..n {
        let h = 1e-6 * libm::fmax(1.0, libm::fabs(x[i]));
        probe[i] = x[i] + h;
        let fp = sys.drift(&probe);
        probe[i] = x[i] - h;
        let fm = sys.drift(&probe);
        probe[i] = x[i];
        for r in 0..n {
            let d = (fp[r] - fm[r]) / (2.0 * h);
            if !d.is_finite() {
                return Err(Error::NonFinite {
                    what: "drift evaluation in numeric Jacobian",
                    index: r,
                });
            }
            jac[(r, i)] = d;
        }
    }
    Ok(jac)
}
