//! Decide, certify and demonstrate R-separation of variables for the
//! conformally invariant Laplace equation on orthogonal 3-D metrics.
//!
//! The crate is organised as a pipeline:
//!
//! 1. [`jets`] / [`expr`] / [`fields`] — exact derivative arithmetic and the
//!    scalar-field abstraction everything is built on;
//! 2. [`geometry`] — diagonal metrics, curvature, the conformally weighted
//!    Laplacian;
//! 3. [`families`] — constructors for conformally separable metrics,
//!    elliptic coordinates, flat space and the 3-sphere;
//! 4. [`separability`] — the second-order separability tests, the rescaling
//!    gauge `R` and the modified potential;
//! 5. [`verify`] — separated ordinary differential equations, products that
//!    solve the original equation, residual and completeness certificates.

pub mod error;
pub mod expr;
pub mod families;
pub mod fields;
pub mod geometry;
pub mod jets;
pub mod ode;
pub mod sampling;
pub mod separability;
pub mod verify;

pub use error::{Error, Result};
pub use expr::{Expr, Scope};
pub use families::{
    elliptic_map, flat_elliptic_metric, make_conformally_separable, make_rsep, pullback_check,
    rsep_from_roots, simple_stackel_metric, sphere_elliptic_metric, sphere_stereographic_chart,
    AmbientChart, CofactorField, EllipticPoint, FamilyInfo, FamilyKind, FlatConformalField, Poly,
    ProfileField, PullbackReport, SphereConformalField, MAX_PROFILE_DEGREE,
};
pub use fields::{ConstField, ExprField, PolyCoordField, ProductField, ScalarField, SumField};
pub use geometry::{CurvatureData, DiagonalMetric, Domain, RicciScalarField, CI_CURVATURE_COEFF};
pub use jets::{Jet, Jet3, JetError, MAX_ORDER};
pub use ode::{integrate, DenseSolution, OdeOptions};
pub use sampling::{SamplingPlan, Tolerances, Verdict};
pub use separability::{
    build_r_factor, build_r_factor_at, build_r_factor_path, build_r_factor_with,
    check_compatibility, check_conformal_separability, check_laplace_compatibility,
    compatibility_residual, modified_potential, stackel_apply, CompatibilityReport,
    ModifiedPotentialField, PairResidual, RFactor, RMethod, SeparabilityReport,
    StackelDecomposition,
};
pub use verify::{
    certify, completeness_rank, control_residual_without_gauge, derive_separated_odes,
    fixed_energy_check, residual, solve_separated, solve_separated_perturbed, Certification,
    FixedEnergyReport,
    ResidualReport, SeparatedOde, SeparatedSolution,
};
