//! Property tests for the expression layer: parsed expressions evaluate and
//! differentiate like the functions they denote, and pretty-printing
//! round-trips through the parser.

mod common;

use common::{fd_grad, fd_hess};
use proptest::prelude::*;
use rsep_core::{Expr, Scope};

fn scope() -> Scope {
    Scope::new(vec!["q1", "q2", "q3"], vec!["a", "b"]).unwrap()
}

/// Trivariate polynomial with monomials `q1^i q2^j q3^k`, `i+j+k ≤ 2`.
fn poly_source(c: &[f64; 10]) -> String {
    format!(
        "{} + {}*q1 + {}*q2 + {}*q3 + {}*q1^2 + {}*q2^2 + {}*q3^2 \
         + {}*q1*q2 + {}*q1*q3 + {}*q2*q3",
        c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7], c[8], c[9]
    )
}

fn poly_value(c: &[f64; 10], p: &[f64]) -> f64 {
    let (x, y, z) = (p[0], p[1], p[2]);
    c[0] + c[1] * x
        + c[2] * y
        + c[3] * z
        + c[4] * x * x
        + c[5] * y * y
        + c[6] * z * z
        + c[7] * x * y
        + c[8] * x * z
        + c[9] * y * z
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_polynomials_evaluate_and_differentiate_exactly(
        c in prop::array::uniform10(-3.0..3.0_f64),
        x in -2.0..2.0_f64,
        y in -2.0..2.0_f64,
        z in -2.0..2.0_f64,
    ) {
        let e = Expr::parse(&poly_source(&c), &scope()).unwrap();
        let p = [x, y, z];
        let j = e.eval_jet(&p, &[0.0, 0.0], 2).unwrap();
        let scale = j.value().abs().max(1.0);
        prop_assert!((j.value() - poly_value(&c, &p)).abs() / scale < 1e-13);
        // Analytic gradient of the quadratic.
        let want = [
            c[1] + 2.0 * c[4] * x + c[7] * y + c[8] * z,
            c[2] + 2.0 * c[5] * y + c[7] * x + c[9] * z,
            c[3] + 2.0 * c[6] * z + c[8] * x + c[9] * y,
        ];
        for i in 0..3 {
            prop_assert!((*j.grad(i).unwrap() - want[i]).abs() / scale < 1e-13);
        }
        // Hessian is the constant coefficient matrix.
        let hess = [
            [2.0 * c[4], c[7], c[8]],
            [c[7], 2.0 * c[5], c[9]],
            [c[8], c[9], 2.0 * c[6]],
        ];
        for i in 0..3 {
            for k in 0..3 {
                prop_assert!((*j.hess(i, k).unwrap() - hess[i][k]).abs() / scale < 1e-13);
            }
        }
    }

    #[test]
    fn pretty_print_round_trips_random_polynomials(
        c in prop::array::uniform10(-3.0..3.0_f64),
        x in -2.0..2.0_f64,
        y in -2.0..2.0_f64,
        z in -2.0..2.0_f64,
    ) {
        let sc = scope();
        let e = Expr::parse(&poly_source(&c), &sc).unwrap();
        let printed = e.pretty(&sc);
        let back = Expr::parse(&printed, &sc).unwrap();
        let p = [x, y, z];
        let v0 = *e.eval_jet(&p, &[0.0, 0.0], 0).unwrap().value();
        let v1 = *back.eval_jet(&p, &[0.0, 0.0], 0).unwrap().value();
        prop_assert!((v0 - v1).abs() <= 1e-12 * v0.abs().max(1.0), "{printed}: {v0} vs {v1}");
    }

    #[test]
    fn parameters_bind_by_position(
        a in -3.0..3.0_f64,
        b in -3.0..3.0_f64,
        x in 0.2..2.0_f64,
    ) {
        let e = Expr::parse("a*q1^2 + b", &scope()).unwrap();
        let v = *e.eval_jet(&[x, 0.0, 0.0], &[a, b], 0).unwrap().value();
        prop_assert!((v - (a * x * x + b)).abs() < 1e-13);
    }
}

#[test]
fn function_chain_matches_central_differences() {
    let src = "exp(0.3*q1)*sin(q2) + ln(1 + q3)*sqrt(1 + q1) + cos(q2)*tan(0.3*q3)";
    let e = Expr::parse(src, &scope()).unwrap();
    let f = |p: &[f64]| {
        (0.3 * p[0]).exp() * p[1].sin()
            + (1.0 + p[2]).ln() * (1.0 + p[0]).sqrt()
            + p[1].cos() * (0.3 * p[2]).tan()
    };
    for p in [[0.4, 1.1, 0.7], [1.3, 0.2, 1.9], [0.9, 2.4, 0.3]] {
        let j = e.eval_jet(&p, &[0.0, 0.0], 2).unwrap();
        assert!((j.value() - f(&p)).abs() < 1e-13);
        let grad = fd_grad(&f, &p, 1e-5);
        for i in 0..3 {
            assert!(
                (*j.grad(i).unwrap() - grad[i]).abs() < 1e-7 * grad[i].abs().max(1.0),
                "grad {i} at {p:?}"
            );
        }
        let hess = fd_hess(&f, &p, 1e-4);
        for i in 0..3 {
            for k in 0..3 {
                assert!(
                    (*j.hess(i, k).unwrap() - hess[i * 3 + k]).abs()
                        < 1e-5 * hess[i * 3 + k].abs().max(1.0),
                    "hess {i}{k} at {p:?}"
                );
            }
        }
    }
}

#[test]
fn malformed_inputs_are_rejected_not_panicked() {
    let sc = scope();
    for bad in ["q1 +", "(q1", "q1 ** q2", "2 + unknown", "sin()", "q1 q2", ""] {
        assert!(Expr::parse(bad, &sc).is_err(), "{bad:?} should fail to parse");
    }
}
