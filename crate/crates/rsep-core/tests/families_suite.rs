//! Family constructors and the elliptic chart: pullbacks to the ambient
//! spaces, consistency between the conformal-factor routes, input
//! validation, and the simple-form fallbacks.

mod common;

use std::sync::Arc;

use common::{field, random_root_tuple, rng, uniform, INTERVALS, ROOTS};
use rsep_core::{
    elliptic_map, flat_elliptic_metric, make_conformally_separable, make_rsep, pullback_check,
    rsep_from_roots, simple_stackel_metric, sphere_elliptic_metric, AmbientChart, ConstField,
    Error, FlatConformalField, Poly, ProductField, SamplingPlan, ScalarField,
    SphereConformalField, MAX_PROFILE_DEGREE,
};

fn plan100(seed: u64) -> SamplingPlan {
    SamplingPlan { count: 100, seed }
}

#[test]
fn flat_family_pulls_back_to_the_euclidean_metric() {
    let mut r = rng(101);
    let mut tuples = vec![ROOTS];
    for _ in 0..3 {
        tuples.push(random_root_tuple(&mut r));
    }
    for (k, roots) in tuples.iter().enumerate() {
        let m = flat_elliptic_metric(format!("flat-{k}"), roots).unwrap();
        let rep = pullback_check(&m, roots, AmbientChart::Euclidean, &plan100(7 + k as u64))
            .unwrap();
        assert_eq!(rep.samples, 100);
        assert!(rep.max_rel_diag < 1e-9, "{roots:?}: diag {}", rep.max_rel_diag);
        assert!(rep.max_abs_offdiag < 1e-9, "{roots:?}: offdiag {}", rep.max_abs_offdiag);
    }
}

#[test]
fn sphere_family_pulls_back_through_the_stereographic_chart() {
    let mut r = rng(102);
    let tuples = [ROOTS, random_root_tuple(&mut r)];
    for (k, roots) in tuples.iter().enumerate() {
        for radius in [1.0, 2.0] {
            let m = sphere_elliptic_metric(format!("sphere-{k}-{radius}"), roots, radius).unwrap();
            let rep = pullback_check(
                &m,
                roots,
                AmbientChart::Stereographic { radius },
                &plan100(11 + k as u64),
            )
            .unwrap();
            assert!(rep.max_rel_diag < 1e-9, "{roots:?} r={radius}: {}", rep.max_rel_diag);
            assert!(rep.max_abs_offdiag < 1e-9, "{roots:?} r={radius}: {}", rep.max_abs_offdiag);
        }
    }
}

#[test]
fn pullback_detects_a_scaled_conformal_factor() {
    let flat: Arc<dyn ScalarField> = Arc::new(FlatConformalField::new(&ROOTS).unwrap());
    let wrong: Arc<dyn ScalarField> = Arc::new(ProductField::new(1.01, vec![flat]));
    let m = rsep_from_roots("flat-off", &ROOTS, 4.0, wrong).unwrap();
    let rep = pullback_check(&m, &ROOTS, AmbientChart::Euclidean, &plan100(13)).unwrap();
    assert!(rep.max_rel_diag > 1e-3, "diag deviation {}", rep.max_rel_diag);
}

#[test]
fn conformal_factor_routes_agree() {
    // Q_S = Q_E · (r² + |x|²)² / (4 r⁴), and the q_e carried by the map
    // equals the flat conformal field.
    let flat = FlatConformalField::new(&ROOTS).unwrap();
    let mut r = rng(103);
    for radius in [1.0, 2.0] {
        let sphere = SphereConformalField::new(&ROOTS, radius).unwrap();
        for _ in 0..25 {
            let q = [
                uniform(&mut r, 0.05, 0.95),
                uniform(&mut r, 1.05, 1.95),
                uniform(&mut r, 2.05, 2.95),
            ];
            let point = elliptic_map(&ROOTS, &q).unwrap();
            assert!(point.lambda > 0.0 && point.lambda.is_finite());
            assert!(point.x.iter().all(|v| *v > 0.0 && v.is_finite()));

            let qe = *flat.jet(&q, 0).unwrap().value();
            assert!((point.q_e - qe).abs() < 1e-12 * qe.abs());

            let n2: f64 = point.x.iter().map(|v| v * v).sum();
            let r2 = radius * radius;
            let want = qe * (r2 + n2) * (r2 + n2) / (4.0 * r2 * r2);
            let qs = *sphere.jet(&q, 0).unwrap().value();
            assert!((qs - want).abs() < 1e-10 * want.abs(), "{qs} vs {want}");
        }
    }
}

#[test]
fn chart_rejects_points_off_the_interlacing_chain() {
    // q2 below e2.
    let err = elliptic_map(&ROOTS, &[0.5, 0.9, 2.5]).unwrap_err();
    assert!(matches!(err, Error::OutsideDomain { .. }), "{err:?}");
    // q3 above e4.
    let err = elliptic_map(&ROOTS, &[0.5, 1.5, 3.5]).unwrap_err();
    assert!(matches!(err, Error::OutsideDomain { .. }), "{err:?}");
}

#[test]
fn constructors_validate_their_inputs() {
    let unit: Arc<dyn ScalarField> = Arc::new(ConstField::new(3, 1.0));

    let err = rsep_from_roots("bad", &[0.0, 2.0, 1.0, 3.0, 4.0], 1.0, unit.clone()).unwrap_err();
    assert!(matches!(err, Error::RootsNotOrdered { .. }), "{err:?}");

    let err = rsep_from_roots("bad", &[0.0, 1.0, 2.0], 1.0, unit.clone()).unwrap_err();
    assert!(matches!(err, Error::Inconsistent { .. }), "{err:?}");

    let sextic = Poly::from_coeffs(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
    assert_eq!(sextic.degree(), MAX_PROFILE_DEGREE + 1);
    let err = make_rsep("bad", &sextic, unit.clone(), INTERVALS).unwrap_err();
    assert!(matches!(err, Error::DegreeTooHigh { degree: 6, max: 5 }), "{err:?}");

    // The first profile shadows a foreign coordinate.
    let h = vec![field("1 + 0.2*q2"), field("-1"), field("1")];
    let err = make_conformally_separable("bad", h, unit, common::interval_domain()).unwrap_err();
    assert!(matches!(err, Error::ForeignCoordinate { .. }), "{err:?}");
}

#[test]
fn simple_form_shrinks_intervals_at_interior_profile_zeros() {
    // P(t) = t(t-1)(t-2)(t-3)(t-4) has a zero at 3.0, inside the last
    // requested interval; the constructor must warn and retreat to the
    // widest zero-free stretch instead of building a degenerate metric.
    let p = Poly::from_roots(&ROOTS[..5], 1.0).unwrap();
    let intervals = [(0.1, 0.9), (1.1, 1.9), (2.1, 3.9)];
    let (m, warnings) = simple_stackel_metric("shrunk", &p, intervals).unwrap();
    assert_eq!(warnings.len(), 1, "{warnings:?}");
    assert!(warnings[0].contains('2'), "warning names the coordinate: {warnings:?}");
    let d = m.domain();
    assert!(d.hi[2] <= 3.0 + 1e-6 || d.lo[2] >= 3.0 - 1e-6, "interval avoids the zero: {d:?}");
    assert!(d.hi[2] - d.lo[2] < 1.8 - 1e-6, "interval actually shrank: {d:?}");

    // A zero-free request passes through, up to the constructors' small
    // wall inset.
    let (m, warnings) = simple_stackel_metric("clean", &p, INTERVALS).unwrap();
    assert!(warnings.is_empty(), "{warnings:?}");
    let d = m.domain();
    for (i, (lo, hi)) in INTERVALS.iter().enumerate() {
        assert!(d.lo[i] >= *lo && d.hi[i] <= *hi, "domain inside request: {d:?}");
        assert!(d.hi[i] - d.lo[i] > 0.99 * (hi - lo), "request essentially kept: {d:?}");
    }
}

#[test]
fn family_metadata_survives_a_conformal_rescale() {
    let m = flat_elliptic_metric("flat", &ROOTS).unwrap();
    let sigma = field("0.2*q1 - 0.1*q2*q3");
    let mt = m.conformally_rescaled(sigma).unwrap();
    assert_eq!(mt.id(), "flat~rescaled");
    let fam = mt.family().expect("family info survives");
    let orig = m.family().unwrap();
    assert_eq!(fam.base_intervals, orig.base_intervals);
    // The rescaled metric still certifies as a family instance downstream.
    let rep = rsep_core::check_conformal_separability(
        &mt,
        &SamplingPlan { count: 50, seed: 3 },
        &rsep_core::Tolerances::default(),
    )
    .unwrap();
    assert_eq!(rep.conformally_separable, rsep_core::Verdict::Pass);
}
