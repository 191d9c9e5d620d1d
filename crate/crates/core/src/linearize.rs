//! Optimization-based linearization at an operating point and the Kalman
//! controllability test.
//!
//! The linear model is obtained without shifting coordinates: `B = G(x_e)`
//! and row `i` of `A` is
//!
//! ```text
//! a_i = ∇F_i(x_e) + [(F_i(x_e) − x_eᵀ ∇F_i(x_e)) / (x_eᵀ x_e)] · x_e
//! ```
//!
//! For a zero-norm equilibrium, `x_e` is first perturbed by a small
//! `ε_e` (default `1e-4·𝟙`). For mechanical systems the first `q` rows
//! of `A` equal base vectors exactly, so they are emitted structurally
//! as `[0 | I]` instead of being evaluated through the formula.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::model::AffineSystem;
use crate::{Error, Result};

/// Default equilibrium perturbation magnitude.
pub const DEFAULT_EPSILON: f64 = 1e-4;

/// Drift-residual magnitude above which the operating point should be
/// reported as a questionable equilibrium (the linearization still runs).
pub const EQUILIBRIUM_RESIDUAL_WARN: f64 = 1e-6;

/// Linear model `ẋ = A x + B u`, `c = E x` about `(x_e, u_e = 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub e: DMatrix<f64>,
    /// Operating state actually used (after any ε perturbation).
    pub x_e: DVector<f64>,
    /// Operating control; always zero for this system class.
    pub u_e: f64,
    /// Whether `x_e` was perturbed away from a zero-norm equilibrium.
    pub epsilon_applied: bool,
    /// The perturbation vector that was added (zero when unused).
    pub epsilon: DVector<f64>,
    /// `‖F‖∞` at the supplied operating point (before any ε
    /// displacement); values above [`EQUILIBRIUM_RESIDUAL_WARN`] mean
    /// the candidate is not an equilibrium and deserve a warning
    /// upstream. The displaced point always carries a residual of
    /// order `‖A‖·ε`, so it is not a useful equilibrium test.
    pub drift_residual_inf: f64,
}

impl LinearModel {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.e.nrows()
    }
}

/// Kalman controllability analysis of a linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllabilityReport {
    /// `[B | AB | A²B | … | A^{n−1}B]`.
    pub mc: DMatrix<f64>,
    pub rank: usize,
    pub determinant: f64,
    pub singular_values: Vec<f64>,
    pub controllable: bool,
}

/// Linearizes `sys` about `x_e` with the default ε perturbation.
pub fn linearize(sys: &AffineSystem, x_e: &DVector<f64>) -> Result<LinearModel> {
    let eps = DVector::from_element(sys.state_dim(), DEFAULT_EPSILON);
    linearize_with_epsilon(sys, x_e, &eps)
}

/// Linearizes `sys` about `x_e`, using `epsilon` to displace a zero-norm
/// equilibrium.
pub fn linearize_with_epsilon(
    sys: &AffineSystem,
    x_e: &DVector<f64>,
    epsilon: &DVector<f64>,
) -> Result<LinearModel> {
    let n = sys.state_dim();
    let q = sys.output_dim();
    if x_e.len() != n {
        return Err(Error::Dimension {
            what: "equilibrium state",
            expected: n,
            got: x_e.len(),
        });
    }
    if epsilon.len() != n {
        return Err(Error::Dimension {
            what: "epsilon vector",
            expected: n,
            got: epsilon.len(),
        });
    }

    let candidate_residual = sys.drift(x_e).amax();
    let mut point = x_e.clone();
    let mut epsilon_applied = false;
    if point.norm() == 0.0 {
        point += epsilon;
        epsilon_applied = true;
        if point.norm() == 0.0 {
            return Err(Error::Config(
                "epsilon perturbation left the equilibrium at zero norm".into(),
            ));
        }
    }

    let drift = sys.drift(&point);
    let jac = sys.jacobian_at(&point)?;
    let xtx = point.dot(&point);
    let jac_x = &jac * &point;

    let mut a = DMatrix::zeros(n, n);
    let start_row = if sys.is_mechanical() {
        // Rows 1..q equal base vectors exactly; emit them without
        // floating-point noise.
        for j in 0..q {
            a[(j, q + j)] = 1.0;
        }
        q
    } else {
        0
    };
    for i in start_row..n {
        let correction = (drift[i] - jac_x[i]) / xtx;
        for c in 0..n {
            a[(i, c)] = jac[(i, c)] + correction * point[c];
        }
    }

    let b = DMatrix::from_column_slice(n, 1, sys.input_field(&point).as_slice());

    let used_epsilon = if epsilon_applied {
        epsilon.clone()
    } else {
        DVector::zeros(n)
    };
    Ok(LinearModel {
        a,
        b,
        e: sys.output_matrix(),
        x_e: point,
        u_e: 0.0,
        epsilon_applied,
        epsilon: used_epsilon,
        drift_residual_inf: candidate_residual,
    })
}

/// Builds the controllability matrix of `(A, B)` and tests its rank via
/// singular values with threshold `σ_max · n · machine-epsilon`.
///
/// The determinant is reported for reproduction purposes only; the rank
/// decision always comes from the SVD.
pub fn controllability(model: &LinearModel) -> ControllabilityReport {
    controllability_of(&model.a, &model.b)
}

/// [`controllability`] on raw matrices.
pub fn controllability_of(a: &DMatrix<f64>, b: &DMatrix<f64>) -> ControllabilityReport {
    let n = a.nrows();
    let mut mc = DMatrix::zeros(n, n);
    let mut col = b.column(0).clone_owned();
    for j in 0..n {
        mc.set_column(j, &col);
        col = a * &col;
    }
    let svd = mc.clone().svd(false, false);
    let mut singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    singular_values.sort_by(|x, y| y.partial_cmp(x).unwrap_or(core::cmp::Ordering::Equal));
    let smax = singular_values.first().copied().unwrap_or(0.0);
    let threshold = smax * n as f64 * f64::EPSILON;
    let rank = singular_values.iter().filter(|s| **s > threshold).count();
    let determinant = mc.clone().lu().determinant();
    ControllabilityReport {
        mc,
        rank,
        determinant,
        singular_values,
        controllable: rank == n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::boxed::Box;
    use alloc::vec;
    use nalgebra::{dmatrix, dvector};

    fn linear_system(a: DMatrix<f64>, b: DVector<f64>) -> AffineSystem {
        let q = a.nrows() / 2;
        let aj = a.clone();
        AffineSystem::new(
            q,
            Box::new(move |x| &a * x),
            Box::new(move |_| b.clone()),
            Some(Box::new(move |_| aj.clone())),
        )
        .unwrap()
    }

    #[test]
    fn linear_drift_correction_vanishes_exactly() {
        let a0 = dmatrix![0.3, -1.1; 2.0, 0.7];
        let sys = linear_system(a0.clone(), dvector![1.0, 0.5]);
        let model = linearize(&sys, &dvector![0.4, -0.8]).unwrap();
        // F(x_e) − (J x_e) is computed from the same matrix-vector product
        // on both sides, so the correction is exactly zero and A == A0.
        assert_eq!(model.a, a0);
        assert!(!model.epsilon_applied);
    }

    #[test]
    fn zero_equilibrium_gets_perturbed_deterministically() {
        let a0 = dmatrix![0.0, 1.0; -1.0, 0.0];
        let sys = linear_system(a0.clone(), dvector![0.0, 1.0]);
        let m1 = linearize(&sys, &dvector![0.0, 0.0]).unwrap();
        let m2 = linearize(&sys, &dvector![0.0, 0.0]).unwrap();
        assert!(m1.epsilon_applied);
        assert_eq!(m1.x_e, dvector![1e-4, 1e-4]);
        assert_eq!(m1.a, m2.a);
        assert_eq!(m1.b, m2.b);
    }

    #[test]
    fn pathological_epsilon_is_a_config_error() {
        let sys = linear_system(dmatrix![0.0, 1.0; 0.0, 0.0], dvector![0.0, 1.0]);
        let zero = dvector![0.0, 0.0];
        let err = linearize_with_epsilon(&sys, &zero, &zero).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn double_integrator_controllability() {
        let model = LinearModel {
            a: dmatrix![0.0, 1.0; 0.0, 0.0],
            b: DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            e: dmatrix![1.0, 0.0],
            x_e: dvector![0.0, 0.0],
            u_e: 0.0,
            epsilon_applied: false,
            epsilon: dvector![0.0, 0.0],
            drift_residual_inf: 0.0,
        };
        let report = controllability(&model);
        assert_eq!(report.mc, dmatrix![0.0, 1.0; 1.0, 0.0]);
        assert!((report.determinant - (-1.0)).abs() < 1e-14);
        assert_eq!(report.rank, 2);
        assert!(report.controllable);
    }

    #[test]
    fn rank_deficient_pair_reported_uncontrollable() {
        let model = LinearModel {
            a: DMatrix::zeros(2, 2),
            b: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            e: dmatrix![1.0, 0.0],
            x_e: dvector![0.0, 0.0],
            u_e: 0.0,
            epsilon_applied: false,
            epsilon: dvector![0.0, 0.0],
            drift_residual_inf: 0.0,
        };
        let report = controllability(&model);
        assert_eq!(report.rank, 1);
        assert!(!report.controllable);
    }
}
