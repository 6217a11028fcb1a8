//! Adaptive Dormand–Prince 5(4) integration with a 4th-order continuous
//! extension (dense output), after Hairer–Nørsett–Wanner.
//!
//! The separated equations this crate produces are small linear systems, so
//! the integrator works on `Vec<f64>` states with a fallible right-hand side
//! (coefficients may come from interpolated tables that can report gaps).

use crate::error::{Error, Result};

/// Integration options; the defaults match the verification requirements
/// (local tolerance `1e-10` absolute and relative).
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Initial step size; `None` picks a conservative fraction of the span.
    pub h0: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-10, max_steps: 100_000, h0: None }
    }
}

/// One accepted step with its dense-output coefficients.
#[derive(Debug, Clone)]
struct DenseStep {
    t: f64,
    h: f64,
    /// Five coefficients per state component: `y(t+θh)` is the quartic
    /// `r₁ + θ(r₂ + (1-θ)(r₃ + θ(r₄ + (1-θ)r₅)))`.
    rcont: Vec<[f64; 5]>,
}

impl DenseStep {
    fn eval_into(&self, t: f64, out: &mut [f64]) {
        let theta = (t - self.t) / self.h;
        let theta1 = 1.0 - theta;
        for (o, r) in out.iter_mut().zip(&self.rcont) {
            *o = r[0] + theta * (r[1] + theta1 * (r[2] + theta * (r[3] + theta1 * r[4])));
        }
    }
}

/// A solution trajectory evaluable anywhere between its endpoints.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    steps: Vec<DenseStep>,
    t_start: f64,
    t_end: f64,
    /// State at `t_end`.
    pub y_end: Vec<f64>,
    /// Accepted and rejected step counts.
    pub accepted: usize,
    pub rejected: usize,
}

impl DenseSolution {
    /// The integration span `(start, end)`; `end` may lie left of `start`
    /// for backward integration.
    pub fn span(&self) -> (f64, f64) {
        (self.t_start, self.t_end)
    }

    pub fn dim(&self) -> usize {
        self.y_end.len()
    }

    /// Evaluate the interpolated state at `t` (within the span).
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let (lo, hi) = if self.t_start <= self.t_end {
            (self.t_start, self.t_end)
        } else {
            (self.t_end, self.t_start)
        };
        let slack = 1e-12 * (hi - lo).max(1.0);
        if t < lo - slack || t > hi + slack {
            return Err(Error::InterpolationGap { t, lo, hi });
        }
        let dir = if self.t_start <= self.t_end { 1.0 } else { -1.0 };
        // First step whose far end reaches `t` in the march direction.
        let idx = self.steps.partition_point(|s| dir * (s.t + s.h) < dir * t);
        let step = self.steps.get(idx).or_else(|| self.steps.last()).ok_or(
            Error::InterpolationGap { t, lo, hi },
        )?;
        step.eval_into(t, out);
        Ok(())
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [&[f64]; 7] = [
    &[],
    &[0.2],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Dense-output weights for the quartic continuous extension.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

/// Integrate `y' = f(t, y)` from `t0` to `t1` (either direction), recording
/// dense output on every accepted step.
pub fn integrate<F>(mut f: F, t0: f64, t1: f64, y0: &[f64], opts: &OdeOptions) -> Result<DenseSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    if !(t1 - t0).is_finite() || t0 == t1 {
        return Err(Error::NonFinite { context: "integration span" });
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let n = y0.len();

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k = vec![vec![0.0; n]; 7];
    f(t, &y, &mut k[0])?;
    let mut h = dir * opts.h0.map_or(1e-3 * span, f64::abs).min(span);

    let mut steps = Vec::new();
    let mut accepted = 0usize;
    let mut rejected = 0usize;

    while dir * (t1 - t) > 1e-14 * span {
        if accepted + rejected >= opts.max_steps {
            return Err(Error::StepBudget { max: opts.max_steps, target: t1 });
        }
        if h.abs() < 1e-14 * t.abs().max(span) {
            return Err(Error::StepUnderflow { t, h });
        }
        if dir * (t + h) > dir * t1 {
            h = t1 - t;
        }

        // Stages 2..7 (stage 1 is the FSAL slope already in k[0]).
        let mut y_stage = vec![0.0; n];
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, aj) in A[s].iter().enumerate() {
                    acc += aj * k[j][i];
                }
                y_stage[i] = y[i] + h * acc;
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            f(t + C[s] * h, &y_stage, &mut tail[0])?;
        }
        // k[6] is the slope at the 5th-order result; y_stage now equals y1.
        let y1 = y_stage;

        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, ej) in E.iter().enumerate() {
                e += ej * k[j][i];
            }
            let scale = opts.atol + opts.rtol * y[i].abs().max(y1[i].abs());
            let r = h * e / scale;
            err += r * r;
        }
        err = (err / n as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::NonFinite { context: "integration error estimate" });
        }

        if err <= 1.0 {
            let mut rcont = Vec::with_capacity(n);
            for i in 0..n {
                let ydiff = y1[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                let mut d = 0.0;
                for (j, dj) in D.iter().enumerate() {
                    d += dj * k[j][i];
                }
                rcont.push([y[i], ydiff, bspl, ydiff - h * k[6][i] - bspl, h * d]);
            }
            steps.push(DenseStep { t, h, rcont });
            t += h;
            y = y1;
            k[0] = k[6].clone();
            accepted += 1;
        } else {
            rejected += 1;
        }

        let fac = (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX);
        h *= if err <= 1.0 { fac } else { fac.min(1.0) };
    }

    Ok(DenseSolution { steps, t_start: t0, t_end: t1, y_end: y, accepted, rejected })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_rhs(_t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        dy[0] = y[0];
        Ok(())
    }

    #[test]
    fn exponential_growth_to_machine_scale_tolerance() {
        let sol = integrate(exp_rhs, 0.0, 1.0, &[1.0], &OdeOptions::default()).unwrap();
        let want = 1.0_f64.exp();
        assert!((sol.y_end[0] - want).abs() < 1e-10 * want, "got {}", sol.y_end[0]);
        assert!(sol.accepted > 0);
    }

    #[test]
    fn dense_output_matches_the_solution_between_steps() {
        let sol = integrate(exp_rhs, 0.0, 2.0, &[1.0], &OdeOptions::default()).unwrap();
        for k in 0..40 {
            let t = 0.05 * (k as f64 + 0.5);
            let got = sol.eval(t).unwrap()[0];
            let want = t.exp();
            assert!((got - want).abs() < 1e-9 * want, "t = {t}: {got} vs {want}");
        }
    }

    #[test]
    fn harmonic_oscillator_closes_its_orbit() {
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        };
        let tau = std::f64::consts::TAU;
        let sol = integrate(rhs, 0.0, tau, &[1.0, 0.0], &OdeOptions::default()).unwrap();
        assert!((sol.y_end[0] - 1.0).abs() < 1e-8);
        assert!(sol.y_end[1].abs() < 1e-8);
        // Interior check against the closed form.
        let mid = sol.eval(tau / 3.0).unwrap();
        assert!((mid[0] - (tau / 3.0).cos()).abs() < 1e-9);
        assert!((mid[1] + (tau / 3.0).sin()).abs() < 1e-9);
    }

    #[test]
    fn backward_integration_and_evaluation_work() {
        let sol = integrate(exp_rhs, 1.0, 0.0, &[1.0_f64.exp()], &OdeOptions::default()).unwrap();
        assert!((sol.y_end[0] - 1.0).abs() < 1e-10);
        let got = sol.eval(0.25).unwrap()[0];
        assert!((got - 0.25_f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn quartic_solutions_are_reproduced_by_the_dense_output() {
        // y' = 4t³ has solution t⁴; the continuous extension is a quartic in
        // the step parameter, so the interpolant stays at solver accuracy.
        let rhs = |t: f64, _y: &[f64], dy: &mut [f64]| -> Result<()> {
            dy[0] = 4.0 * t * t * t;
            Ok(())
        };
        let sol = integrate(rhs, 0.0, 1.0, &[0.0], &OdeOptions::default()).unwrap();
        for k in 1..20 {
            let t = k as f64 / 20.0;
            let got = sol.eval(t).unwrap()[0];
            assert!((got - t.powi(4)).abs() < 1e-10, "t = {t}: {got}");
        }
    }

    #[test]
    fn evaluation_outside_the_span_is_a_gap_error() {
        let sol = integrate(exp_rhs, 0.0, 1.0, &[1.0], &OdeOptions::default()).unwrap();
        assert!(matches!(sol.eval(1.5), Err(Error::InterpolationGap { .. })));
        assert!(matches!(sol.eval(-0.1), Err(Error::InterpolationGap { .. })));
    }

    #[test]
    fn step_budget_is_enforced() {
        let opts = OdeOptions { max_steps: 3, ..OdeOptions::default() };
        let err = integrate(exp_rhs, 0.0, 50.0, &[1.0], &opts).unwrap_err();
        assert!(matches!(err, Error::StepBudget { max: 3, .. }));
    }

    #[test]
    fn tightening_the_tolerance_reduces_the_error() {
        let loose = OdeOptions { rtol: 1e-4, atol: 1e-4, ..OdeOptions::default() };
        let tight = OdeOptions { rtol: 1e-12, atol: 1e-12, ..OdeOptions::default() };
        let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            dy[0] = y[0] * t.sin();
            Ok(())
        };
        let want = (1.0 - 3.0_f64.cos()).exp();
        let e_loose = (integrate(rhs, 0.0, 3.0, &[1.0], &loose).unwrap().y_end[0] - want).abs();
        let e_tight = (integrate(rhs, 0.0, 3.0, &[1.0], &tight).unwrap().y_end[0] - want).abs();
        assert!(e_tight < e_loose / 10.0, "loose {e_loose:.3e} tight {e_tight:.3e}");
        assert!(e_tight < 1e-9, "tight {e_tight:.3e}");
    }

    #[test]
    fn rhs_errors_propagate() {
        let rhs = |t: f64, _y: &[f64], _dy: &mut [f64]| -> Result<()> {
            if t > 0.5 {
                Err(Error::NonFinite { context: "test coefficient" })
            } else {
                Ok(())
            }
        };
        assert!(integrate(rhs, 0.0, 1.0, &[1.0], &OdeOptions::default()).is_err());
    }
}
