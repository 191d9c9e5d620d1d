//! Algebraic identity of the aggregated state-feedback law and the PD
//! bank under constant references, checked at floating-point resolution.

use nalgebra::{DVector, RowDVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simo_lqr_core::control::{control_pd_continuous, control_sfr_ffr};
use simo_lqr_core::lqr::GainSet;

#[test]
fn sfr_ffr_equals_pd_at_machine_precision() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_ratio = 0.0_f64;
    for _ in 0..1000 {
        let q = rng.gen_range(1..=3usize);
        let k = RowDVector::from_fn(2 * q, |_, _| rng.gen_range(-50.0..50.0));
        let gains = GainSet::from_feedback(k).unwrap();
        let x = DVector::from_fn(2 * q, |_, _| rng.gen_range(-10.0..10.0));
        let c_ref = DVector::from_fn(q, |_, _| rng.gen_range(-5.0..5.0));

        let u_sfr = control_sfr_ffr(&x, &c_ref, &gains).unwrap();
        let e = &c_ref - x.rows(0, q);
        let e_dot = -x.rows(q, q).into_owned();
        let u_pd = control_pd_continuous(&e, &e_dot, &gains).unwrap();

        let k_l1: f64 = gains.k().iter().map(|v| v.abs()).sum();
        let bound = 4.0 * f64::EPSILON * k_l1 * (x.amax() + c_ref.amax());
        let diff = (u_sfr - u_pd).abs();
        assert!(
            diff <= bound,
            "diff {diff:.3e} exceeds bound {bound:.3e} (q = {q})"
        );
        if bound > 0.0 {
            worst_ratio = worst_ratio.max(diff / bound);
        }
    }
    // Keep some slack visible: the identity should sit well inside the
    // allowed rounding envelope, not at its edge.
    assert!(worst_ratio <= 1.0, "worst ratio {worst_ratio}");
}
