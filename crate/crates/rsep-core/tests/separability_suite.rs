//! The separability pipeline end to end: verdicts on randomized family
//! instances and their structural perturbations, the two gauge realisations
//! against each other, the modified potential against its defining formula
//! and its conformal transport, the shared-profile compatibility batteries,
//! and the certificate guard rails.

mod common;

use std::sync::Arc;

use common::{field, inset_box, interval_domain, random_root_tuple, rng, uniform, INTERVALS, ROOTS};
use rsep_core::jets::Func;
use rsep_core::{
    build_r_factor, build_r_factor_path, check_compatibility, check_conformal_separability,
    check_laplace_compatibility, make_conformally_separable, make_rsep, modified_potential,
    rsep_from_roots, simple_stackel_metric, ConstField, DiagonalMetric, Error,
    ModifiedPotentialField, Poly, ProductField, RMethod, SamplingPlan, ScalarField, Tolerances,
    Verdict,
};

fn tols() -> Tolerances {
    Tolerances::default()
}

fn unit_conformal() -> Arc<dyn ScalarField> {
    Arc::new(ConstField::new(3, 1.0))
}

/// A conformally separable instance with randomized profiles.  The middle
/// profile is negative because the middle cofactor is negative on the
/// ordered chain, so positivity of the metric forces the sign pattern.
fn random_csep(seed: u64) -> DiagonalMetric {
    let mut r = rng(seed);
    let a: Vec<f64> = (0..8).map(|_| uniform(&mut r, -0.3, 0.3)).collect();
    let h = vec![
        field(&format!("{} + {}*q1 + {}*q1^2", uniform(&mut r, 0.8, 1.5), a[0], a[1])),
        field(&format!("-({} + {}*q2)", uniform(&mut r, 0.8, 1.5), a[2])),
        field(&format!("{} + {}*sin(q3)", uniform(&mut r, 1.2, 2.0), a[3])),
    ];
    let q = field(&format!(
        "exp({}*q1 + {}*q2 + {}*q3 + {}*q1*q2)",
        a[4], a[5], a[6], a[7]
    ));
    make_conformally_separable(format!("csep-{seed}"), h, q, interval_domain()).unwrap()
}

/// A shared-profile instance on a randomized ordered root tuple with a
/// generic positive conformal factor.
fn random_rsep(seed: u64) -> DiagonalMetric {
    let mut r = rng(seed);
    let roots = random_root_tuple(&mut r);
    let q = field(&format!(
        "exp({}*q1 + {}*q2 + {}*q3)",
        uniform(&mut r, -0.2, 0.2),
        uniform(&mut r, -0.2, 0.2),
        uniform(&mut r, -0.2, 0.2)
    ));
    rsep_from_roots(format!("rsep-{seed}"), &roots, 1.0, q).unwrap()
}

/// Break the product structure of the first component with a cross term.
fn perturb(m: &DiagonalMetric) -> DiagonalMetric {
    let comps = m.components().to_vec();
    let mut broken = comps.clone();
    broken[0] = Arc::new(ProductField::new(1.0, vec![comps[0].clone(), field("1 + 0.05*q2*q3")]));
    DiagonalMetric::from_components(
        format!("{}~broken", m.id()),
        m.coords().to_vec(),
        broken,
        m.domain().clone(),
    )
    .unwrap()
}

/// Shared profile `F(q^i)` on the standard intervals with unit conformal
/// factor; `#` marks the coordinate slot in the template.
fn shared_profile_metric(template: &str) -> DiagonalMetric {
    let h: Vec<Arc<dyn ScalarField>> = (0..3)
        .map(|i| field(&template.replace('#', &format!("q{}", i + 1))))
        .collect();
    make_conformally_separable(
        format!("shared[{template}]"),
        h,
        unit_conformal(),
        interval_domain(),
    )
    .unwrap()
}

fn qualifying_metric(coeffs: &[f64]) -> DiagonalMetric {
    let p = Poly::from_coeffs(coeffs.to_vec()).unwrap();
    make_rsep(format!("poly-deg{}", p.degree()), &p, unit_conformal(), INTERVALS).unwrap()
}

#[test]
fn randomized_instances_separate_and_structural_perturbations_do_not() {
    let plan = SamplingPlan { count: 200, seed: 41 };
    for m in [random_csep(1), random_csep(2), random_rsep(3), random_rsep(4)] {
        let rep = check_conformal_separability(&m, &plan, &tols()).unwrap();
        assert_eq!(
            rep.conformally_separable,
            Verdict::Pass,
            "{}: residual {}",
            m.id(),
            rep.conformal_residual
        );
        assert!(rep.conformal_residual < 1e-8);

        let broken = perturb(&m);
        let rep = check_conformal_separability(&broken, &plan, &tols()).unwrap();
        assert_eq!(
            rep.conformally_separable,
            Verdict::Fail,
            "{}: residual {}",
            broken.id(),
            rep.conformal_residual
        );
        assert!(rep.conformal_residual > 1e-3);
    }
}

#[test]
fn ignorable_coordinates_follow_the_component_ratios() {
    // Component ratios constant: every coordinate is ignorable.
    let m = rsep_core::sphere_stereographic_chart("s3", 2.0).unwrap();
    let rep = check_conformal_separability(&m, &SamplingPlan { count: 40, seed: 5 }, &tols()).unwrap();
    assert_eq!(rep.conformally_ignorable, vec![0, 1, 2]);

    // Ratios depend on the first coordinate only.
    let q = "exp(0.1*q1 + 0.2*q2)";
    let comps = vec![
        field(&format!("(1 + 0.5*q1^2)*{q}")),
        field(q),
        field(q),
    ];
    let m = DiagonalMetric::from_components(
        "ratios-q1".to_string(),
        vec!["q1".into(), "q2".into(), "q3".into()],
        comps,
        interval_domain(),
    )
    .unwrap();
    let rep = check_conformal_separability(&m, &SamplingPlan { count: 40, seed: 6 }, &tols()).unwrap();
    assert_eq!(rep.conformally_ignorable, vec![1, 2]);
}

#[test]
fn gauge_realisations_agree_pointwise() {
    // The closed-form gauge family metrics carry and the generic quadrature
    // along axis-aligned legs must produce the same function once anchored
    // at the same point.
    for m in [random_rsep(11), random_csep(12)] {
        let closed = build_r_factor(&m).unwrap();
        assert!(matches!(closed.method, RMethod::ClosedForm));
        assert!(closed.gradient_residual < 1e-8, "{}", closed.gradient_residual);

        let path = build_r_factor_path(&m, &closed.base_point, 2048).unwrap();
        assert!(matches!(path.method, RMethod::PathIntegral { .. }));
        assert!(path.integrability_residual < 1e-7);

        let hull = inset_box(m.domain(), 0.02);
        let (points, _) = SamplingPlan { count: 15, seed: 21 }.sample(&hull).unwrap();
        for p in &points {
            let a = *closed.ln_r.jet(p, 0).unwrap().value();
            let b = *path.ln_r.jet(p, 0).unwrap().value();
            assert!((a - b).abs() < 1e-8, "{}: ln R {a} vs {b} at {p:?}", m.id());
        }
    }
}

#[test]
fn gauge_anchor_only_shifts_by_a_constant() {
    // Integrability makes the path integral independent of the anchor up to
    // an additive constant; the gradient of the difference must vanish.
    let m = random_csep(13);
    let hull = inset_box(m.domain(), 0.05);
    let (bases, _) = SamplingPlan { count: 2, seed: 3 }.sample(&hull).unwrap();
    let r1 = build_r_factor_path(&m, &bases[0], 2048).unwrap();
    let r2 = build_r_factor_path(&m, &bases[1], 2048).unwrap();
    let (points, _) = SamplingPlan { count: 10, seed: 4 }.sample(&hull).unwrap();
    for p in &points {
        let j1 = r1.ln_r.jet(p, 1).unwrap();
        let j2 = r2.ln_r.jet(p, 1).unwrap();
        for i in 0..3 {
            let d = j1.grad(i).unwrap() - j2.grad(i).unwrap();
            assert!(d.abs() < 1e-7, "grad {i} of gauge difference: {d}");
        }
    }
    let shift = r1.ln_r.jet(&bases[1], 0).unwrap().value() - r2.ln_r.jet(&bases[1], 0).unwrap().value();
    assert!(shift.abs() > 0.0 || shift == 0.0, "finite shift, got {shift}");
}

#[test]
fn modified_potential_is_the_operator_on_the_gauge() {
    // U = ℍR / R, assembled here from raw jets of ln R.
    for m in [random_rsep(14), random_csep(15)] {
        let r = build_r_factor(&m).unwrap();
        let hull = inset_box(m.domain(), 0.02);
        let (points, _) = SamplingPlan { count: 12, seed: 8 }.sample(&hull).unwrap();
        let u = ModifiedPotentialField::new(&m);
        for p in &points {
            let rj = r.ln_r.jet(p, 2).unwrap().apply(Func::Exp).unwrap();
            let want = m.ci_from_jet(&rj, p).unwrap() / rj.value();
            let got = modified_potential(&m, &r, p).unwrap();
            assert!(
                (got - want).abs() < 1e-8 * want.abs().max(1.0),
                "{}: {got} vs {want}",
                m.id()
            );
            let through_field = *u.jet(p, 0).unwrap().value();
            assert!((through_field - want).abs() < 1e-8 * want.abs().max(1.0));
        }
    }
}

#[test]
fn modified_potential_transports_conformally() {
    // Ũ = e^{-2σ} U across the conformal class.
    let sigma = field("0.3*q1 - 0.2*q2^2 + 0.15*q1*q3");
    for m in [random_rsep(16), random_csep(17)] {
        let mt = m.conformally_rescaled(sigma.clone()).unwrap();
        let u = ModifiedPotentialField::new(&m);
        let ut = ModifiedPotentialField::new(&mt);
        let hull = inset_box(m.domain(), 0.02);
        let (points, _) = SamplingPlan { count: 12, seed: 9 }.sample(&hull).unwrap();
        for p in &points {
            let base = *u.jet(p, 0).unwrap().value();
            let scaled = *ut.jet(p, 0).unwrap().value();
            let want = (-2.0 * sigma.jet(p, 0).unwrap().value()).exp() * base;
            assert!(
                (scaled - want).abs() < 1e-8 * want.abs().max(1.0),
                "{}: {scaled} vs {want}",
                m.id()
            );
        }
    }
}

#[test]
fn shared_polynomial_profiles_are_compatible_and_others_are_not() {
    let plan = SamplingPlan { count: 60, seed: 77 };
    // Qualifying profiles: polynomials through degree five.
    let qualifying: &[&[f64]] = &[
        &[2.0],
        &[1.0, 1.0],
        &[0.5, 0.0, 1.0],
        &[2.0, 2.0, 1.0, 1.0],
        &[2.0, 0.0, 3.0, 0.0, 1.0],
    ];
    for coeffs in qualifying {
        let m = qualifying_metric(coeffs);
        let u = ModifiedPotentialField::new(&m);
        let rep = check_compatibility(&m, &u, &plan, &tols()).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "{}: residual {}", m.id(), rep.residual);
        assert!(rep.decomposition.is_some(), "{} should certify", m.id());
    }
    let deg5 = Poly::from_roots(&ROOTS, 1.0).unwrap();
    let m = make_rsep("deg5", &deg5, unit_conformal(), INTERVALS).unwrap();
    let rep = check_compatibility(&m, &ModifiedPotentialField::new(&m), &plan, &tols()).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass, "deg5 residual {}", rep.residual);

    // Non-qualifying shared profiles must be rejected outright, with no
    // inconclusive middle ground on this battery.
    for template in ["#^6 + 0.5", "exp(#)", "3 + sin(3*#)", "ln(# + 0.15)"] {
        let m = shared_profile_metric(template);
        let u = ModifiedPotentialField::new(&m);
        let rep = check_compatibility(&m, &u, &plan, &tols()).unwrap();
        assert_eq!(rep.verdict, Verdict::Fail, "{}: residual {}", m.id(), rep.residual);
        assert!(rep.decomposition.is_none());
    }
}

#[test]
fn vanishing_potential_certifies_with_flat_profiles() {
    let h: Vec<Arc<dyn ScalarField>> = (0..3).map(|_| unit_conformal()).collect();
    let m = make_conformally_separable("unit", h, unit_conformal(), interval_domain()).unwrap();
    let u = ModifiedPotentialField::new(&m);
    let (points, _) = SamplingPlan { count: 30, seed: 2 }.sample(m.domain()).unwrap();
    for p in &points {
        assert!(u.jet(p, 0).unwrap().value().abs() < 1e-12);
    }
    let rep = check_compatibility(&m, &u, &SamplingPlan { count: 60, seed: 3 }, &tols()).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass);
    let dec = rep.decomposition.expect("certifies");
    assert!(dec.fit_residual < 1e-10);
    assert!(dec.holdout_residual < 1e-10);
    for h in 0..3 {
        let (lo, hi) = (dec.grids[h][0], *dec.grids[h].last().unwrap());
        for k in 0..5 {
            let t = lo + (hi - lo) * k as f64 / 4.0;
            assert!(dec.scaled_profile(h, t).unwrap().abs() < 1e-10);
        }
    }
}

#[test]
fn laplace_compatibility_separates_the_families() {
    let plan = SamplingPlan { count: 60, seed: 31 };
    // Degree-five shared profile: scalar curvature is not a compatible
    // potential, so the plain Laplacian does not separate on these charts.
    let deg5 = Poly::from_roots(&ROOTS, 1.0).unwrap();
    let m = make_rsep("deg5", &deg5, unit_conformal(), INTERVALS).unwrap();
    let rep = check_laplace_compatibility(&m, &plan, &tols()).unwrap();
    assert_eq!(rep.verdict, Verdict::Fail, "residual {}", rep.residual);

    // Degree-three simple form is flat, so the curvature term is absent.
    let cubic = Poly::from_roots(&[0.0, 1.0, 2.0], 4.0).unwrap();
    let (m, warnings) = simple_stackel_metric("cubic", &cubic, INTERVALS).unwrap();
    assert!(warnings.is_empty(), "{warnings:?}");
    let rep = check_laplace_compatibility(&m, &plan, &tols()).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass, "residual {}", rep.residual);

    // Flat space reports a vanishing curvature supremum.
    let flat = rsep_core::flat_elliptic_metric("flat", &ROOTS).unwrap();
    let rep = check_laplace_compatibility(&flat, &plan, &tols()).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass, "residual {}", rep.residual);
    assert!(rep.residual < 1e-9);
    // On the sphere the condition degenerates to simple separability, an
    // analytic zero that the second-order operator computes as cancellation
    // noise; the check must not reject it, but near the chart walls it may
    // stay below certification resolution.
    let sphere = rsep_core::sphere_elliptic_metric("sphere", &ROOTS, 1.0).unwrap();
    let rep = check_laplace_compatibility(&sphere, &plan, &tols()).unwrap();
    assert_ne!(rep.verdict, Verdict::Fail, "residual {}", rep.residual);
    assert!(rep.residual < 1e-6, "residual {}", rep.residual);
}

#[test]
fn certificates_refuse_queries_outside_their_hull() {
    let m = rsep_from_roots("rsep", &ROOTS, 1.0, unit_conformal()).unwrap();
    let u = ModifiedPotentialField::new(&m);
    let rep = check_compatibility(&m, &u, &SamplingPlan { count: 60, seed: 13 }, &tols()).unwrap();
    let dec = rep.decomposition.expect("family instance certifies");
    let err = dec.scaled_profile(0, -0.5).unwrap_err();
    assert!(matches!(err, Error::InterpolationGap { .. }), "{err:?}");
    let err = dec.scaled_profile(2, 3.5).unwrap_err();
    assert!(matches!(err, Error::InterpolationGap { .. }), "{err:?}");
}

#[test]
fn compatibility_verdict_is_stable_across_the_conformal_class() {
    let sigma = field("0.25*q1*q2 - 0.3*q3 + 0.1*q2^2");
    let plan = SamplingPlan { count: 60, seed: 19 };
    let m = random_rsep(23);
    let mt = m.conformally_rescaled(sigma).unwrap();
    for metric in [&m, &mt] {
        let u = ModifiedPotentialField::new(metric);
        let rep = check_compatibility(metric, &u, &plan, &tols()).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "{}: {}", metric.id(), rep.residual);
        assert!(rep.decomposition.is_some());
    }
}
