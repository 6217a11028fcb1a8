//! Measurement probe: Stäckel operator magnitudes across gauges, Laplace
//! compatibility on the sphere class, and the fixed-energy eigenvalue.

use std::sync::Arc;

use rsep_core::{
    check_laplace_compatibility, control_residual_without_gauge, fixed_energy_check,
    flat_elliptic_metric, make_rsep, simple_stackel_metric, sphere_elliptic_metric, stackel_apply,
    ConstField, DiagonalMetric, ExprField, Poly, SamplingPlan, ScalarField, Tolerances,
};

const ROOTS: [f64; 5] = [0.0, 1.0, 2.0, 3.0, 4.0];
const INTERVALS: [(f64, f64); 3] = [(0.1, 0.9), (1.1, 1.9), (2.1, 2.9)];

fn inset_points(m: &DiagonalMetric, frac: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let d = m.domain();
    let mut lo = d.lo.clone();
    let mut hi = d.hi.clone();
    for k in 0..3 {
        let w = hi[k] - lo[k];
        lo[k] += frac * w;
        hi[k] -= frac * w;
    }
    let inner = rsep_core::Domain::new(lo, hi, 0.0).unwrap();
    let (pts, _) = SamplingPlan { count, seed }.sample(&inner).unwrap();
    pts
}

fn stackel_scan(m: &DiagonalMetric, label: &str) {
    let comps = m.components().to_vec();
    for frac in [0.25, 0.1, 0.02] {
        let pts = inset_points(m, frac, 30, 7);
        let mut sup_abs = 0.0_f64;
        let mut sup_rel = 0.0_f64;
        for p in &pts {
            for i in 0..3 {
                for j in (i + 1)..3 {
                    for h in 0..3 {
                        let s = stackel_apply(m, comps[h].as_ref(), p, i, j).unwrap();
                        let g = *comps[h].jet(p, 0).unwrap().value();
                        sup_abs = sup_abs.max(s.abs());
                        sup_rel = sup_rel.max(s.abs() / g.abs().max(1e-300));
                    }
                }
            }
        }
        println!("{label} inset {frac}: sup|S_ij(g^hh)| = {sup_abs:.3e}, sup|S/g| = {sup_rel:.3e}");
    }
}

fn main() {
    let tols = Tolerances::default();
    let unit: Arc<dyn ScalarField> = Arc::new(ConstField::new(3, 1.0));

    let flat = flat_elliptic_metric("flat", &ROOTS).unwrap();
    let sphere = sphere_elliptic_metric("sphere", &ROOTS, 1.0).unwrap();
    let p5 = Poly::from_roots(&ROOTS, 1.0).unwrap();
    let rsep5 = make_rsep("rsep5", &p5, unit.clone(), INTERVALS).unwrap();
    let cubic = Poly::from_roots(&[0.0, 1.0, 2.0], 4.0).unwrap();
    let (stackel3, _) = simple_stackel_metric("cubic", &cubic, INTERVALS).unwrap();

    println!("== direct Stäckel operator scan ==");
    stackel_scan(&stackel3, "cubic-stackel (exact simple)");
    stackel_scan(&rsep5, "rsep5-unitQ");
    stackel_scan(&flat, "flat-elliptic");
    stackel_scan(&sphere, "sphere-elliptic r=1");

    println!("== common-factor check: S_ij(g^hh)/g^hh across h ==");
    for (label, m) in [("flat", &flat), ("sphere", &sphere)] {
        let comps = m.components().to_vec();
        let pts = inset_points(m, 0.15, 3, 11);
        for p in &pts {
            for (i, j) in [(0usize, 1usize), (0, 2), (1, 2)] {
                let ratios: Vec<f64> = (0..3)
                    .map(|h| {
                        let s = stackel_apply(m, comps[h].as_ref(), p, i, j).unwrap();
                        s / comps[h].jet(p, 0).unwrap().value()
                    })
                    .collect();
                println!(
                    "{label} p=[{:.2},{:.2},{:.2}] pair({i},{j}): {:+.6e} {:+.6e} {:+.6e}",
                    p[0], p[1], p[2], ratios[0], ratios[1], ratios[2]
                );
            }
        }
    }

    println!("== laplace compatibility across the sphere class ==");
    let plan = SamplingPlan { count: 60, seed: 31 };
    for (label, m) in [
        ("sphere r=1 ROOTS", sphere_elliptic_metric("s1", &ROOTS, 1.0).unwrap()),
        ("sphere r=2 ROOTS", sphere_elliptic_metric("s2", &ROOTS, 2.0).unwrap()),
        (
            "sphere r=1 shifted tuple",
            sphere_elliptic_metric("s3", &[-1.3, 0.2, 1.1, 2.7, 4.4], 1.0).unwrap(),
        ),
        ("rsep5 unit Q", rsep5.clone()),
        ("cubic stackel", stackel3.clone()),
    ] {
        let rep = check_laplace_compatibility(&m, &plan, &tols).unwrap();
        println!("{label}: verdict {:?}, residual {:.4e}", rep.verdict, rep.residual);
    }

    // A conformal rescale of the round sphere: still the sphere class.
    let scope = rsep_core::Scope::new(vec!["q1", "q2", "q3"], Vec::<&str>::new()).unwrap();
    let sigma: Arc<dyn ScalarField> =
        Arc::new(ExprField::parse("0.2*q1 - 0.15*q2 + 0.1*q3", &scope, vec![]).unwrap());
    let rescaled = sphere_elliptic_metric("s4", &ROOTS, 1.0)
        .unwrap()
        .conformally_rescaled(sigma)
        .unwrap();
    let rep = check_laplace_compatibility(&rescaled, &plan, &tols).unwrap();
    println!("sphere r=1 rescaled: verdict {:?}, residual {:.4e}", rep.verdict, rep.residual);
    stackel_scan(&rescaled, "sphere-rescaled");

    for r in [1.5, 3.0] {
        let m = sphere_elliptic_metric("sr", &ROOTS, r).unwrap();
        let rep = check_laplace_compatibility(&m, &plan, &tols).unwrap();
        println!("sphere r={r} ROOTS: verdict {:?}, residual {:.4e}", rep.verdict, rep.residual);
    }
    let shifted = sphere_elliptic_metric("sh", &[-1.3, 0.2, 1.1, 2.7, 4.4], 1.0).unwrap();
    stackel_scan(&shifted, "sphere r=1 shifted tuple");
    let r2 = sphere_elliptic_metric("s2", &ROOTS, 2.0).unwrap();
    stackel_scan(&r2, "sphere r=2");

    println!("== gauge load-bearing on the sphere ==");
    let cert_plan = SamplingPlan { count: 40, seed: 9 };
    let cert = rsep_core::certify(&sphere, &cert_plan, &tols).unwrap();
    let sol = rsep_core::solve_separated(&sphere, &cert, 0.4, -0.2, [0.3, 0.1, -0.2]).unwrap();
    let (pts, _) = SamplingPlan { count: 40, seed: 17 }.sample(&sol.domain().unwrap()).unwrap();
    let with = rsep_core::residual(&sphere, &sol, &pts).unwrap();
    let ctrl = control_residual_without_gauge(&sphere, &sol, &pts).unwrap();
    println!(
        "sphere residual with gauge: {:.4e}, without: {:.4e}",
        with.max_residual, ctrl.max_residual
    );

    println!("== fixed energy ==");
    for r in [1.0, 2.0] {
        let rep = fixed_energy_check(r).unwrap();
        println!(
            "r={r}: R_s={:.12}, R_s/8={:.12}, measured={:.12}, flag={}, op_res={:.3e}",
            rep.scalar_curvature,
            rep.curvature_over_eight,
            rep.measured_energy,
            rep.energy_is_curvature_over_eight,
            rep.operator_residual
        );
    }
}
