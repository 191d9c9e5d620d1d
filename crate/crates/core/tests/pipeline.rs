//! Cross-module pipeline checks: robot → linearization → design → gains,
//! for both tilt-state conventions, against independently computed values.

use nalgebra::{dvector, DVector};
use simo_lqr_core::linearize::{controllability, linearize};
use simo_lqr_core::lqr::{closed_loop_matrix, lqr_gain, spectral_abscissa, LqrWeights};
use simo_lqr_core::robot::{BalancingRobot, RobotParams, TiltUnit};

fn weights() -> LqrWeights {
    LqrWeights::new(dvector![100.0, 100.0, 1.0, 1.0], 1.0).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn degree_convention_linearization_values() {
    let bot = BalancingRobot::with_tilt_unit(RobotParams::default(), TiltUnit::Degrees).unwrap();
    let sys = bot.affine_system();
    let model = linearize(&sys, &DVector::zeros(4)).unwrap();
    assert!(model.epsilon_applied);
    assert_eq!(model.x_e, dvector![1e-4, 1e-4, 1e-4, 1e-4]);
    assert_eq!(model.u_e, 0.0);

    // Upper blocks are structural.
    for j in 0..2 {
        for c in 0..4 {
            let expected = if c == j + 2 { 1.0 } else { 0.0 };
            assert_eq!(model.a[(j, c)], expected);
        }
        assert_eq!(model.b[(j, 0)], 0.0);
    }

    // Values computed independently from the same printed parameters.
    let expected_a3 = [
        1.420855462184888,
        5.80105408154452e-9,
        -4.336912149623277,
        3278.127334378476,
    ];
    let expected_a4 = [
        -0.11295429429811236,
        -6.663766760617306e-10,
        0.858827606728666,
        -649.1591608088534,
    ];
    for c in 0..4 {
        assert!(
            rel(model.a[(2, c)], expected_a3[c]) < 1e-9,
            "A3{c}: {} vs {}",
            model.a[(2, c)],
            expected_a3[c]
        );
        assert!(
            rel(model.a[(3, c)], expected_a4[c]) < 1e-9,
            "A4{c}: {} vs {}",
            model.a[(3, c)],
            expected_a4[c]
        );
    }
    assert!(rel(model.b[(2, 0)], -628.8524197162417) < 1e-12);
    assert!(rel(model.b[(3, 0)], 124.53003419811148) < 1e-12);
}

#[test]
fn radian_convention_linearization_values() {
    let bot = BalancingRobot::new(RobotParams::default()).unwrap();
    let model = linearize(&bot.affine_system(), &DVector::zeros(4)).unwrap();
    let expected_a3 = [
        81.40896403886843,
        1.9189017319565235e-5,
        -4.336892929445384,
        3278.1273158245617,
    ];
    let expected_a4 = [
        -6.471797791798695,
        -2.192698175806917e-6,
        0.858825411597371,
        -649.159158698266,
    ];
    for c in 0..4 {
        assert!(
            rel(model.a[(2, c)], expected_a3[c]) < 1e-9,
            "A3{c} = {}",
            model.a[(2, c)]
        );
        assert!(
            rel(model.a[(3, c)], expected_a4[c]) < 1e-9,
            "A4{c} = {}",
            model.a[(3, c)]
        );
    }

    let report = controllability(&model);
    assert_eq!(report.rank, 4);
    assert!(report.controllable);
    assert!(
        rel(report.determinant, -1.4561177695948062e13) < 1e-9,
        "det = {}",
        report.determinant
    );
}

#[test]
fn degree_convention_gain_design() {
    let bot = BalancingRobot::with_tilt_unit(RobotParams::default(), TiltUnit::Degrees).unwrap();
    let model = linearize(&bot.affine_system(), &DVector::zeros(4)).unwrap();
    let gains = lqr_gain(&model.a, &model.b, &weights()).unwrap();
    let expected = [
        -13.187333962495467,
        -10.000000037842698,
        -9.367165486597882,
        -45.1373825559786,
    ];
    for (i, want) in expected.iter().enumerate() {
        assert!(
            rel(gains.k()[i], *want) < 1e-6,
            "K{i}: {} vs {want}",
            gains.k()[i]
        );
    }
    let abscissa = spectral_abscissa(&closed_loop_matrix(&model.a, &model.b, &gains));
    assert!(abscissa < 0.0, "closed loop not Hurwitz: {abscissa}");
}

#[test]
fn radian_convention_gain_design() {
    let bot = BalancingRobot::new(RobotParams::default()).unwrap();
    let model = linearize(&bot.affine_system(), &DVector::zeros(4)).unwrap();
    let gains = lqr_gain(&model.a, &model.b, &weights()).unwrap();
    let expected = [
        -23.609200259767817,
        -10.000003941419504,
        -3.208138651452073,
        -13.978701321991963,
    ];
    for (i, want) in expected.iter().enumerate() {
        assert!(
            rel(gains.k()[i], *want) < 1e-6,
            "K{i}: {} vs {want}",
            gains.k()[i]
        );
    }
}

#[test]
fn teixeira_zak_matches_taylor_jacobian_at_perturbed_point() {
    // At an equilibrium displaced by ε the optimization-based matrices
    // agree with the plain Jacobian up to the second-order correction.
    let bot = BalancingRobot::new(RobotParams::default()).unwrap();
    let sys = bot.affine_system();
    let model = linearize(&sys, &DVector::zeros(4)).unwrap();
    // The correction term leaves O(1e-5) residue on entries whose true
    // Jacobian value is zero (the position column), so those are held to
    // an absolute floor instead of a relative one.
    let jac = bot.drift_jacobian(&model.x_e);
    for r in 0..4 {
        for c in 0..4 {
            let a = model.a[(r, c)];
            let j = jac[(r, c)];
            if a.abs().max(j.abs()) > 1e-4 {
                assert!(rel(a, j) < 1e-3, "entry ({r},{c}): {a} vs {j}");
            } else {
                assert!((a - j).abs() < 1e-4, "entry ({r},{c}): {a} vs {j}");
            }
        }
    }
}
