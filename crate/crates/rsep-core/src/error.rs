//! Crate-wide error type.

use thiserror::Error;

use crate::expr::EvalError;
use crate::jets::JetError;

/// Anything that can go wrong while building metrics, checking separability or
/// verifying solutions.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("this field does not support nested jet evaluation")]
    NestedUnsupported,
    #[error("point has dimension {got}, metric expects {want}")]
    PointDim { want: usize, got: usize },
    #[error("point {point:?} lies outside the metric domain: {reason}")]
    OutsideDomain { point: Vec<f64>, reason: String },
    #[error("metric component g^{index}{index} is degenerate at {point:?} (value {value})")]
    DegenerateComponent { index: usize, point: Vec<f64>, value: f64 },
    #[error("metric is not Riemannian: g^{index}{index} = {value} at {point:?}")]
    NonRiemannian { index: usize, point: Vec<f64>, value: f64 },
    #[error("could not draw {requested} admissible sample points after {attempts} attempts")]
    SamplingExhausted { requested: usize, attempts: usize },
    #[error("contracted connection is not a gradient: mixed-partial residual {residual:.3e} exceeds {tol:.3e}")]
    NotIntegrable { residual: f64, tol: f64 },
    #[error("internal cross-check failed: {context} ({detail})")]
    Inconsistent { context: &'static str, detail: String },
    #[error("{context}: verdict and fitted model disagree (residual {residual:.3e} vs tolerance {tol:.3e})")]
    ToleranceMismatch { context: &'static str, residual: f64, tol: f64 },
    #[error("factor for coordinate {index} depends on coordinate {foreign} (gradient {value:.3e} at {point:?})")]
    ForeignCoordinate { index: usize, foreign: usize, value: f64, point: Vec<f64> },
    #[error("polynomial degree {degree} exceeds the supported maximum {max}")]
    DegreeTooHigh { degree: usize, max: usize },
    #[error("roots must be strictly increasing: e[{index}] = {value} breaks the order")]
    RootsNotOrdered { index: usize, value: f64 },
    #[error("radicand for x^{axis} is negative ({value:.6e}) at q = {q:?}")]
    NegativeRadicand { axis: usize, value: f64, q: Vec<f64> },
    #[error("coefficient must be nonzero: {what}")]
    CoefficientZero { what: &'static str },
    #[error("leading coefficient for coordinate {coord} crosses zero near t = {t}")]
    CoefficientZeroCrossing { coord: usize, t: f64 },
    #[error("integration step size underflowed at t = {t} (step {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("integration exceeded {max} steps before reaching t = {target}")]
    StepBudget { max: usize, target: f64 },
    #[error("metric is not certified for separation: {reason}")]
    NotCertified { reason: String },
    #[error("interpolation abscissa {t} outside tabulated range [{lo}, {hi}]")]
    InterpolationGap { t: f64, lo: f64, hi: f64 },
    #[error("{what} vanishes at the base point {point:?}")]
    VanishingAtBase { what: &'static str, point: Vec<f64> },
    #[error("non-finite value produced by {context}")]
    NonFinite { context: &'static str },
}

pub type Result<T> = std::result::Result<T, Error>;
