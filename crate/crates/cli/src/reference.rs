//! Published reference values for the balancing-robot case study, used
//! by `reproduce-paper` to grade the pipeline's outputs.

/// Linearized state matrix in the degree-tilt design convention.
pub const A_REF: [[f64; 4]; 4] = [
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [1.4188, 5.7939e-7, -4.3319, 3274.4],
    [-0.1128, -6.6786e-12, 0.8586, -648.99],
];

/// Linearized input matrix.
pub const B_REF: [f64; 4] = [0.0, 0.0, -628.4856, 124.4993];

/// Controllability-matrix determinant (SI radian convention).
pub const DET_MC_REF: f64 = -1.4517e13;

/// State-feedback / PD gains for Q = diag(100, 100, 1, 1), R = 1.
pub const K_REF: [f64; 4] = [-13.1881, -10.0, -9.3717, -45.1452];

/// Relative tolerance used for reproduction checks.
pub const REL_TOL: f64 = 1e-3;
/// Absolute tolerance for reference entries below [`SMALL_ENTRY`].
pub const SMALL_ABS_TOL: f64 = 1e-9;
pub const SMALL_ENTRY: f64 = 1e-6;

/// Grades one value against its reference. Returns (pass, error, kind).
pub fn grade(actual: f64, reference: f64) -> (bool, f64, &'static str) {
    if reference.abs() < SMALL_ENTRY {
        let err = (actual - reference).abs();
        (err < SMALL_ABS_TOL, err, "abs")
    } else {
        let err = (actual - reference).abs() / reference.abs();
        (err < REL_TOL, err, "rel")
    }
}
