use bivmac::model::{
    canonicalize, canonicalize_distortion, decanonicalize_distortion, CanonicalInstance,
    DistortionPair, ProblemInstance,
};
use bivmac::rd_bounds::{capacity_term, check_necessary_condition, rd_rate, RATE_COMPARISON_TOL};
use bivmac::region::{verdict, Verdict};
use bivmac::uncoded::{simulate_uncoded, uncoded_distortions};
use bivmac::vq_analytic::{in_rate_region, region_limits, vq_distortions, RatePair};
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = CanonicalInstance> {
    (0.0..=1.0f64, 0.05..50.0f64, 0.05..50.0f64, 0.1..5.0f64)
        .prop_map(|(rho, p1, p2, n)| CanonicalInstance::new(1.0, rho, p1, p2, n).unwrap())
}

proptest! {
    #[test]
    fn uncoded_never_beats_the_outer_bound(c in instance()) {
        let u = uncoded_distortions(&c);
        let rate = rd_rate(&c, DistortionPair::new(u.d1, u.d2).unwrap()).unwrap();
        prop_assert!(rate <= capacity_term(&c) + 1e-9, "{} > {}", rate, capacity_term(&c));
    }

    #[test]
    fn quantizer_points_never_beat_the_outer_bound(c in instance(), a in 0.0..1.0f64, b in 0.0..1.0f64) {
        // scale a point toward the origin until it lies in the rate region
        let (l1, l2, _) = region_limits(&c, 0.0);
        let mut rates = RatePair::new(c.rho, a * l1, b * l2).unwrap();
        while !in_rate_region(&c, &rates) {
            rates = RatePair::new(c.rho, 0.9 * rates.r1, 0.9 * rates.r2).unwrap();
        }
        let d = vq_distortions(&c, &rates);
        prop_assume!(d.d1 > 0.0 && d.d2 > 0.0);
        let rate = rd_rate(&c, d).unwrap();
        prop_assert!(rate <= capacity_term(&c) + 1e-9);
    }

    #[test]
    fn verdicts_are_invariant_under_rescaling(
        rho in -0.99..0.99f64,
        v1 in 0.1..10.0f64,
        v2 in 0.1..10.0f64,
        t1 in 0.05..1.0f64,
        t2 in 0.05..1.0f64,
    ) {
        let inst = ProblemInstance::new(v1, v2, rho, 2.0, 1.0, 1.0).unwrap();
        let c = canonicalize(&inst);
        let unit = CanonicalInstance::new(1.0, rho.abs(), 2.0, 1.0, 1.0).unwrap();
        // same relative targets in both unit systems
        let target = DistortionPair::new(t1 * v1, t2 * v2).unwrap();
        let ct = canonicalize_distortion(&c, target);
        let a = check_necessary_condition(&c, ct).unwrap();
        let b = check_necessary_condition(&unit, DistortionPair::new(t1, t2).unwrap()).unwrap();
        prop_assert!((a.rd_rate - b.rd_rate).abs() < 1e-9);
        let back = decanonicalize_distortion(&c, ct);
        prop_assert!((back.d1 - target.d1).abs() < 1e-12 * v1 && (back.d2 - target.d2).abs() < 1e-12 * v2);
    }
}

#[test]
fn unequal_variances_simulate_in_original_units() {
    let inst = ProblemInstance::new(4.0, 0.25, -0.7, 1.5, 3.0, 0.5).unwrap();
    let c = canonicalize(&inst);
    let sim = simulate_uncoded(&c, 400_000, 5).unwrap();
    let u = uncoded_distortions(&c);
    let empirical = decanonicalize_distortion(&c, sim.distortion);
    let analytic = decanonicalize_distortion(&c, DistortionPair::new(u.d1, u.d2).unwrap());
    assert!((empirical.d1 / analytic.d1 - 1.0).abs() < 0.01);
    assert!((empirical.d2 / analytic.d2 - 1.0).abs() < 0.01);
    assert!(analytic.d2 < 0.25);
}

#[test]
fn verdict_precedence_on_a_line_of_targets() {
    let c = CanonicalInstance::symmetric(1.0, 0.5, 2.0, 3.0).unwrap();
    let mut seen = Vec::new();
    for k in 1..=20 {
        let d = 0.3 + 0.035 * k as f64;
        let r = verdict(&c, DistortionPair::new(d, d).unwrap()).unwrap();
        let outer_ok = r.capacity_term >= r.outer_rd_rate.unwrap() - RATE_COMPARISON_TOL;
        assert_eq!(r.verdict == Verdict::Unachievable, !outer_ok);
        seen.push(r.verdict);
    }
    // below the threshold SNR the outer bound is met, so there is no gap
    assert!(!seen.contains(&Verdict::Gap));
    assert_eq!(seen.first(), Some(&Verdict::Unachievable));
    assert_eq!(seen.last(), Some(&Verdict::UncodedAchieves));
}
