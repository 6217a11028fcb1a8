//! Deterministic sample-point generation and verdict thresholds.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Domain;

/// How many points to draw and with what seed; identical plans yield
/// identical points.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SamplingPlan {
    pub count: usize,
    pub seed: u64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan { count: 200, seed: 0 }
    }
}

fn unit_f64(rng: &mut ChaCha8Rng) -> f64 {
    // 53 uniform mantissa bits in [0, 1).
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

impl SamplingPlan {
    /// Draw points uniformly inside `domain`, rejecting points whose
    /// coordinates come closer to each other than the domain's minimum
    /// separation (which would put them too near a coordinate-collision
    /// singularity).  Returns the points and the number of rejected draws.
    pub fn sample(&self, domain: &Domain) -> Result<(Vec<Vec<f64>>, usize)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut points = Vec::with_capacity(self.count);
        let mut skipped = 0usize;
        let max_attempts = 1000 * self.count.max(1);
        let mut attempts = 0usize;
        while points.len() < self.count {
            attempts += 1;
            if attempts > max_attempts {
                return Err(Error::SamplingExhausted { requested: self.count, attempts });
            }
            let p: Vec<f64> = domain
                .lo
                .iter()
                .zip(&domain.hi)
                .map(|(&lo, &hi)| lo + (hi - lo) * unit_f64(&mut rng))
                .collect();
            if domain.admissible(&p) {
                points.push(p);
            } else {
                skipped += 1;
            }
        }
        Ok((points, skipped))
    }
}

/// Pass/fail thresholds on normalized residuals.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Tolerances {
    /// Residuals below this certify the property.
    pub pass: f64,
    /// Residuals above this refute it.
    pub fail: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { pass: 1e-8, fail: 1e-3 }
    }
}

/// Three-way decision: residuals between the two thresholds are inconclusive
/// rather than silently rounded to one side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn from_residual(residual: f64, tols: &Tolerances) -> Verdict {
        if !residual.is_finite() {
            Verdict::Fail
        } else if residual < tols.pass {
            Verdict::Pass
        } else if residual > tols.fail {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Pass => write!(f, "pass"),
            Verdict::Fail => write!(f, "fail"),
            Verdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> Domain {
        Domain::new(vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0], 1e-2).unwrap()
    }

    #[test]
    fn sampling_is_deterministic_for_a_seed() {
        let plan = SamplingPlan { count: 50, seed: 42 };
        let (a, _) = plan.sample(&unit_box()).unwrap();
        let (b, _) = plan.sample(&unit_box()).unwrap();
        assert_eq!(a, b);
        let (c, _) = SamplingPlan { count: 50, seed: 43 }.sample(&unit_box()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn points_lie_inside_and_respect_separation() {
        let plan = SamplingPlan { count: 200, seed: 7 };
        let domain = unit_box();
        let (pts, _skipped) = plan.sample(&domain).unwrap();
        assert_eq!(pts.len(), 200);
        for p in &pts {
            for (i, &x) in p.iter().enumerate() {
                assert!(x >= domain.lo[i] && x <= domain.hi[i]);
            }
            for i in 0..3 {
                for j in (i + 1)..3 {
                    assert!((p[i] - p[j]).abs() >= 1e-2, "coordinates too close in {p:?}");
                }
            }
        }
    }

    #[test]
    fn impossible_separation_exhausts_sampling() {
        // Box so small no pair of coordinates can be 0.5 apart.
        let domain = Domain::new(vec![0.0, 0.0, 0.0], vec![0.1, 0.1, 0.1], 0.5).unwrap();
        let err = SamplingPlan { count: 3, seed: 0 }.sample(&domain).unwrap_err();
        assert!(matches!(err, Error::SamplingExhausted { .. }));
    }

    #[test]
    fn verdict_thresholds() {
        let tols = Tolerances::default();
        assert_eq!(Verdict::from_residual(1e-12, &tols), Verdict::Pass);
        assert_eq!(Verdict::from_residual(1e-5, &tols), Verdict::Inconclusive);
        assert_eq!(Verdict::from_residual(0.5, &tols), Verdict::Fail);
        assert_eq!(Verdict::from_residual(f64::NAN, &tols), Verdict::Fail);
    }
}
