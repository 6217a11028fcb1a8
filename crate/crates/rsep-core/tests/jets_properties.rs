//! Property tests for the jet arithmetic: algebraic identities hold to
//! round-off and derivatives agree with central differences on composed
//! functions.

mod common;

use common::{fd_grad, fd_hess};
use proptest::prelude::*;
use rsep_core::jets::{seed_point, Func};
use rsep_core::Jet3;

/// Build `(a + x)·exp(b·y) + c·x²·sin(z)` as a jet at `(x, y, z)`.
fn composed_jet(x: f64, y: f64, z: f64, a: f64, b: f64, c: f64, order: usize) -> Jet3 {
    let seeds = seed_point(&[x, y, z], order).unwrap();
    let (jx, jy, jz) = (&seeds[0], &seeds[1], &seeds[2]);
    let term1 = jx
        .add(&jx.const_like_jet(a))
        .unwrap()
        .mul(&jy.scale(b).apply(Func::Exp).unwrap())
        .unwrap();
    let term2 = jx.mul(jx).unwrap().scale(c).mul(&jz.apply(Func::Sin).unwrap()).unwrap();
    term1.add(&term2).unwrap()
}

fn composed_val(p: &[f64], a: f64, b: f64, c: f64) -> f64 {
    (a + p[0]) * (b * p[1]).exp() + c * p[0] * p[0] * p[2].sin()
}

fn assert_jets_close(got: &Jet3, want: &Jet3, tol: f64) {
    let scale = want.value().abs().max(1.0);
    assert!(
        (got.value() - want.value()).abs() / scale < tol,
        "value {} vs {}",
        got.value(),
        want.value()
    );
    for i in 0..got.dim() {
        let (g, w) = (*got.grad(i).unwrap(), *want.grad(i).unwrap());
        assert!((g - w).abs() / w.abs().max(scale) < tol, "grad {i}: {g} vs {w}");
        for j in 0..got.dim() {
            let (g, w) = (*got.hess(i, j).unwrap(), *want.hess(i, j).unwrap());
            assert!((g - w).abs() / w.abs().max(scale) < tol, "hess {i}{j}: {g} vs {w}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composed_jets_match_central_differences(
        x in 0.3..2.0_f64,
        y in 0.3..2.0_f64,
        z in 0.3..2.0_f64,
        a in -1.5..1.5_f64,
        b in -1.2..1.2_f64,
        c in -1.5..1.5_f64,
    ) {
        let j = composed_jet(x, y, z, a, b, c, 2);
        let p = [x, y, z];
        let f = |p: &[f64]| composed_val(p, a, b, c);
        let scale = j.value().abs().max(1.0);
        prop_assert!((j.value() - f(&p)).abs() / scale < 1e-12);
        let grad = fd_grad(&f, &p, 1e-5);
        for i in 0..3 {
            prop_assert!(
                (*j.grad(i).unwrap() - grad[i]).abs() / scale.max(grad[i].abs()) < 1e-7,
                "grad {}: jet {} fd {}", i, j.grad(i).unwrap(), grad[i]
            );
        }
        let hess = fd_hess(&f, &p, 1e-4);
        for i in 0..3 {
            for k in 0..3 {
                prop_assert!(
                    (*j.hess(i, k).unwrap() - hess[i * 3 + k]).abs()
                        / scale.max(hess[i * 3 + k].abs()) < 1e-5,
                    "hess {}{}: jet {} fd {}", i, k, j.hess(i, k).unwrap(), hess[i * 3 + k]
                );
            }
        }
    }

    #[test]
    fn multiplication_distributes_over_addition(
        x in 0.3..2.0_f64,
        y in 0.3..2.0_f64,
        z in 0.3..2.0_f64,
        a in -1.5..1.5_f64,
        b in -1.2..1.2_f64,
    ) {
        let seeds = seed_point(&[x, y, z], 2).unwrap();
        let j1 = composed_jet(x, y, z, a, b, 0.5, 2);
        let j2 = seeds[1].apply(Func::Sin).unwrap();
        let j3 = seeds[2].add(&seeds[0]).unwrap();
        let lhs = j1.add(&j2).unwrap().mul(&j3).unwrap();
        let rhs = j1.mul(&j3).unwrap().add(&j2.mul(&j3).unwrap()).unwrap();
        assert_jets_close(&lhs, &rhs, 1e-12);
    }

    #[test]
    fn division_inverts_multiplication(
        x in 0.3..2.0_f64,
        y in 0.3..2.0_f64,
        z in 0.3..2.0_f64,
        b in -1.2..1.2_f64,
    ) {
        // exp(b·y) + x is bounded away from zero on the sampled box.
        let seeds = seed_point(&[x, y, z], 2).unwrap();
        let denom = seeds[1].scale(b).apply(Func::Exp).unwrap().add(&seeds[0]).unwrap();
        let num = composed_jet(x, y, z, 0.7, b, -0.4, 2);
        let back = num.div(&denom).unwrap().mul(&denom).unwrap();
        assert_jets_close(&back, &num, 1e-12);
    }

    #[test]
    fn exp_ln_roundtrip(
        x in 0.3..2.0_f64,
        y in 0.3..2.0_f64,
        z in 0.3..2.0_f64,
    ) {
        // x + y + z > 0, so ln is applicable; exp(ln(s)) must reproduce s.
        let seeds = seed_point(&[x, y, z], 2).unwrap();
        let s = seeds[0].add(&seeds[1]).unwrap().add(&seeds[2]).unwrap();
        let back = s.apply(Func::Ln).unwrap().apply(Func::Exp).unwrap();
        assert_jets_close(&back, &s, 1e-12);
    }

    #[test]
    fn powi_matches_repeated_multiplication(
        x in 0.3..2.0_f64,
        y in 0.3..2.0_f64,
        z in 0.3..2.0_f64,
        k in 2..5_i32,
    ) {
        let seeds = seed_point(&[x, y, z], 2).unwrap();
        let s = seeds[0].add(&seeds[1].mul(&seeds[2]).unwrap()).unwrap();
        let mut by_mul = s.clone();
        for _ in 1..k {
            by_mul = by_mul.mul(&s).unwrap();
        }
        assert_jets_close(&s.powi(k).unwrap(), &by_mul, 1e-12);
    }

    #[test]
    fn directional_derivative_jets_slot_into_the_parent(
        x in 0.3..2.0_f64,
        y in 0.3..2.0_f64,
        z in 0.3..2.0_f64,
        a in -1.5..1.5_f64,
    ) {
        let j = composed_jet(x, y, z, a, 0.8, -0.6, 2);
        for i in 0..3 {
            let d = j.derivative(i).unwrap();
            prop_assert!((d.value() - j.grad(i).unwrap()).abs() < 1e-13);
            for k in 0..3 {
                prop_assert!((*d.grad(k).unwrap() - *j.hess(i, k).unwrap()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn truncation_preserves_lower_order_slots(
        x in 0.3..2.0_f64,
        y in 0.3..2.0_f64,
        z in 0.3..2.0_f64,
    ) {
        let j = composed_jet(x, y, z, 0.3, 0.9, 1.1, 2);
        let t = j.truncated(1).unwrap();
        prop_assert_eq!(t.order(), 1);
        prop_assert!((t.value() - j.value()).abs() == 0.0);
        for i in 0..3 {
            prop_assert!((*t.grad(i).unwrap() - *j.grad(i).unwrap()).abs() == 0.0);
        }
    }
}

#[test]
fn seed_jets_carry_unit_gradients() {
    let seeds = seed_point(&[0.4, 1.7, 2.2], 2).unwrap();
    for (i, s) in seeds.iter().enumerate() {
        assert_eq!(*s.value(), [0.4, 1.7, 2.2][i]);
        for k in 0..3 {
            assert_eq!(*s.grad(k).unwrap(), if k == i { 1.0 } else { 0.0 });
            for l in 0..3 {
                assert_eq!(*s.hess(k, l).unwrap(), 0.0);
            }
        }
    }
}

#[test]
fn third_order_slots_are_symmetric() {
    let seeds = seed_point(&[0.5, 1.3, 0.8], 3).unwrap();
    let j = seeds[0]
        .mul(&seeds[1])
        .unwrap()
        .mul(&seeds[2])
        .unwrap()
        .add(&seeds[0].powi(3).unwrap())
        .unwrap();
    // All permutations of (i, j, k) agree.
    let perms: [[usize; 3]; 6] =
        [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let want = *j.third(0, 1, 2).unwrap();
    for p in perms {
        assert_eq!(*j.third(p[0], p[1], p[2]).unwrap(), want);
    }
    // d³/dx³ of x³ is 6.
    assert_eq!(*j.third(0, 0, 0).unwrap(), 6.0);
}
