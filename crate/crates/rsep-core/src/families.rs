//! Constructors for conformally separable orthogonal metrics.
//!
//! The central family has inverse components
//!
//! ```text
//! g^ii = Q(q) · h_i(q^i) · S_i ,   S_1 = q³-q², S_2 = q¹-q³, S_3 = q²-q¹,
//! ```
//!
//! where each profile `h_i` depends on its own coordinate only and `Q` is an
//! arbitrary conformal factor.  The `S_i` are the cofactors of a 3×3 Stäckel
//! matrix in the Vandermonde gauge; they satisfy `Σ_i S_i = 0` and
//! `Σ_i S_i q^i = 0`, which is what ultimately produces two separation
//! constants.
//!
//! Specialisations built here:
//!
//! * shared-profile metrics `h_i = P` for a single polynomial `P` of degree
//!   at most five,
//! * the simply separable form `g^ii = P(q^i) / ((q^i-q^j)(q^i-q^k))`
//!   (equivalent to `Q = 1/((q¹-q²)(q²-q³)(q³-q¹))`),
//! * flat Euclidean space in elliptic coordinates derived from five ordered
//!   roots, and the round 3-sphere conformally over it.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{JetPoint, ProductField, ScalarField};
use crate::geometry::{DiagonalMetric, Domain};
use crate::jets::{seed_point, Func, Jet, Jet3, JetScalar};
use crate::sampling::SamplingPlan;

/// Largest admissible degree for shared profile polynomials.
pub const MAX_PROFILE_DEGREE: usize = 5;

/// A real polynomial with coefficients in ascending degree order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn from_coeffs(mut coeffs: Vec<f64>) -> Result<Self> {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() || coeffs.iter().all(|&c| c == 0.0) {
            return Err(Error::CoefficientZero { what: "polynomial coefficients" });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { context: "polynomial coefficients" });
        }
        Ok(Poly { coeffs })
    }

    /// `scale · Π (t - r_i)`.
    pub fn from_roots(roots: &[f64], scale: f64) -> Result<Self> {
        if scale == 0.0 {
            return Err(Error::CoefficientZero { what: "leading coefficient" });
        }
        let mut coeffs = vec![scale];
        for &r in roots {
            let mut next = vec![0.0; coeffs.len() + 1];
            for (k, &c) in coeffs.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= c * r;
            }
            coeffs = next;
        }
        Poly::from_coeffs(coeffs)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() == 1 {
            return Poly { coeffs: vec![0.0] };
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * k as f64)
            .collect();
        Poly { coeffs }
    }

    /// Horner evaluation on a jet argument.
    pub fn eval_jet<T: JetScalar>(&self, q: &Jet<T>) -> Result<Jet<T>> {
        let mut acc = q.const_like_jet(*self.coeffs.last().expect("nonempty"));
        for &c in self.coeffs.iter().rev().skip(1) {
            acc = acc.mul(q)?.add(&q.const_like_jet(c))?;
        }
        Ok(acc)
    }
}

/// The Stäckel cofactor `S_i = q^{i+2} - q^{i+1}` (indices cyclic, 0-based)
/// as a scalar field on a 3-D chart.
#[derive(Debug, Clone, Copy)]
pub struct CofactorField {
    pub index: usize,
}

impl CofactorField {
    fn eval_generic<T: JetPoint>(&self, point: &[T], order: usize) -> Result<Jet<T>> {
        if point.len() != 3 {
            return Err(Error::PointDim { want: 3, got: point.len() });
        }
        let seeds = seed_point(point, order)?;
        Ok(seeds[(self.index + 2) % 3].sub(&seeds[(self.index + 1) % 3])?)
    }
}

impl ScalarField for CofactorField {
    fn dim(&self) -> usize {
        3
    }

    fn jet(&self, point: &[f64], order: usize) -> Result<Jet3> {
        self.eval_generic(point, order)
    }

    fn jet_nested(&self, point: &[Jet3], order: usize) -> Result<Jet<Jet3>> {
        self.eval_generic(point, order)
    }
}

/// A profile polynomial in one chosen coordinate of a 3-D chart.
#[derive(Debug, Clone)]
pub struct ProfileField {
    poly: Poly,
    coord: usize,
}

impl ProfileField {
    pub fn new(poly: Poly, coord: usize) -> Self {
        ProfileField { poly, coord }
    }

    pub fn poly(&self) -> &Poly {
        &self.poly
    }

    fn eval_generic<T: JetPoint>(&self, point: &[T], order: usize) -> Result<Jet<T>> {
        if point.len() != 3 {
            return Err(Error::PointDim { want: 3, got: point.len() });
        }
        let seeds = seed_point(point, order)?;
        self.poly.eval_jet(&seeds[self.coord])
    }
}

impl ScalarField for ProfileField {
    fn dim(&self) -> usize {
        3
    }

    fn jet(&self, point: &[f64], order: usize) -> Result<Jet3> {
        self.eval_generic(point, order)
    }

    fn jet_nested(&self, point: &[Jet3], order: usize) -> Result<Jet<Jet3>> {
        self.eval_generic(point, order)
    }
}

/// `(q¹-q²)(q²-q³)(q³-q¹)`, the cyclic coordinate-difference product.
fn cyclic_product<T: JetScalar>(seeds: &[Jet<T>]) -> Result<Jet<T>> {
    let d01 = seeds[0].sub(&seeds[1])?;
    let d12 = seeds[1].sub(&seeds[2])?;
    let d20 = seeds[2].sub(&seeds[0])?;
    Ok(d01.mul(&d12)?.mul(&d20)?)
}

/// `1 / ((q¹-q²)(q²-q³)(q³-q¹))`: the conformal factor that turns the shared
/// profile family into the simply separable component form
/// `g^ii = P(q^i)/((q^i-q^j)(q^i-q^k))`.
#[derive(Debug, Clone, Copy)]
pub struct CyclicRecipField;

impl CyclicRecipField {
    fn eval_generic<T: JetPoint>(&self, point: &[T], order: usize) -> Result<Jet<T>> {
        if point.len() != 3 {
            return Err(Error::PointDim { want: 3, got: point.len() });
        }
        let seeds = seed_point(point, order)?;
        Ok(cyclic_product(&seeds)?.apply(Func::Recip)?)
    }
}

impl ScalarField for CyclicRecipField {
    fn dim(&self) -> usize {
        3
    }

    fn jet(&self, point: &[f64], order: usize) -> Result<Jet3> {
        self.eval_generic(point, order)
    }

    fn jet_nested(&self, point: &[Jet3], order: usize) -> Result<Jet<Jet3>> {
        self.eval_generic(point, order)
    }
}

/// What is known about how a metric was built.
#[derive(Debug, Clone, Serialize)]
pub enum FamilyKind {
    /// Independent profiles, arbitrary conformal factor.
    General,
    /// All three profiles equal one polynomial of degree ≤ 5.
    SharedPoly(Poly),
    /// Shared polynomial with the cyclic-reciprocal conformal factor: the
    /// simply separable component form.
    Simple(Poly),
}

impl FamilyKind {
    pub fn shared_poly(&self) -> Option<&Poly> {
        match self {
            FamilyKind::General => None,
            FamilyKind::SharedPoly(p) | FamilyKind::Simple(p) => Some(p),
        }
    }
}

/// Construction data carried by family metrics; downstream stages use it to
/// derive separated equations without re-identifying the factors numerically.
#[derive(Clone)]
pub struct FamilyInfo {
    /// Profile fields `h_i(q^i)`, each univariate in its coordinate.
    pub h: Vec<Arc<dyn ScalarField>>,
    /// The conformal factor `Q`.
    pub conformal: Arc<dyn ScalarField>,
    pub kind: FamilyKind,
    /// Per-coordinate intervals the construction is based on (before any
    /// domain inset).
    pub base_intervals: [(f64, f64); 3],
}

impl FamilyInfo {
    /// Midpoints of the base intervals: a canonical admissible point.
    pub fn base_point(&self) -> [f64; 3] {
        [
            0.5 * (self.base_intervals[0].0 + self.base_intervals[0].1),
            0.5 * (self.base_intervals[1].0 + self.base_intervals[1].1),
            0.5 * (self.base_intervals[2].0 + self.base_intervals[2].1),
        ]
    }

    /// Evaluate the profile `h_i` as a univariate function.
    pub fn h_value(&self, i: usize, t: f64) -> Result<f64> {
        let mut p = self.base_point();
        p[i] = t;
        Ok(*self.h[i].jet(&p, 0)?.value())
    }

    /// Evaluate the conformal factor at a point.
    pub fn conformal_value(&self, p: &[f64]) -> Result<f64> {
        Ok(*self.conformal.jet(p, 0)?.value())
    }

    pub(crate) fn conformally_rescaled(&self, weight: &Arc<dyn ScalarField>) -> FamilyInfo {
        let conformal: Arc<dyn ScalarField> = Arc::new(ProductField::new(
            1.0,
            vec![weight.clone(), self.conformal.clone()],
        ));
        // A rescaled simple form is no longer the canonical simple form, but
        // the shared profile survives.
        let kind = match &self.kind {
            FamilyKind::General => FamilyKind::General,
            FamilyKind::SharedPoly(p) | FamilyKind::Simple(p) => FamilyKind::SharedPoly(p.clone()),
        };
        FamilyInfo { h: self.h.clone(), conformal, kind, base_intervals: self.base_intervals }
    }
}

/// `ln R` for family metrics in closed form:
/// `¼ ln|Q| - ¼ Σ_h ln|h_h(q^h)| + ¼ Σ_{j<k} ln|q^j - q^k|`.
pub(crate) struct LnRFamilyField {
    pub h: Vec<Arc<dyn ScalarField>>,
    pub conformal: Arc<dyn ScalarField>,
}

impl LnRFamilyField {
    fn eval_generic<T: JetPoint>(&self, point: &[T], order: usize) -> Result<Jet<T>> {
        let ln_abs = |j: Jet<T>| -> Result<Jet<T>> { Ok(j.apply(Func::Abs)?.apply(Func::Ln)?) };
        let q = T::field_jet(self.conformal.as_ref(), point, order)?;
        let mut acc = ln_abs(q)?;
        for h in &self.h {
            let hj = T::field_jet(h.as_ref(), point, order)?;
            acc = acc.sub(&ln_abs(hj)?)?;
        }
        let seeds = seed_point(point, order)?;
        for j in 0..3 {
            for k in (j + 1)..3 {
                let diff = seeds[j].sub(&seeds[k])?;
                acc = acc.add(&ln_abs(diff)?)?;
            }
        }
        Ok(acc.scale(0.25))
    }
}

impl ScalarField for LnRFamilyField {
    fn dim(&self) -> usize {
        3
    }

    fn jet(&self, point: &[f64], order: usize) -> Result<Jet3> {
        self.eval_generic(point, order)
    }

    fn jet_nested(&self, point: &[Jet3], order: usize) -> Result<Jet<Jet3>> {
        self.eval_generic(point, order)
    }
}

/// Verify that a profile field really is univariate in its coordinate by
/// probing gradients at deterministic sample points.
fn check_univariate(h: &dyn ScalarField, index: usize, domain: &Domain) -> Result<()> {
    let plan = SamplingPlan { count: 5, seed: 0xfade };
    let (mut probes, _) = plan.sample(domain)?;
    probes.push(domain.center());
    for p in &probes {
        if !domain.admissible(p) {
            continue;
        }
        let j = h.jet(p, 1)?;
        let scale = j.value().abs().max(j.grad(index)?.abs()).max(1.0);
        for foreign in 0..3 {
            if foreign == index {
                continue;
            }
            let g = *j.grad(foreign)?;
            if g.abs() > 1e-9 * scale {
                return Err(Error::ForeignCoordinate {
                    index,
                    foreign,
                    value: g,
                    point: p.clone(),
                });
            }
        }
    }
    Ok(())
}

fn interval_domain(intervals: &[(f64, f64); 3], min_separation: f64) -> Result<Domain> {
    let mut lo = Vec::with_capacity(3);
    let mut hi = Vec::with_capacity(3);
    for &(a, b) in intervals {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::OutsideDomain {
                point: vec![a, b],
                reason: "empty or non-finite coordinate interval".to_owned(),
            });
        }
        let inset = 1e-3 * (b - a);
        lo.push(a + inset);
        hi.push(b - inset);
    }
    Domain::new(lo, hi, min_separation)
}

fn family_components(
    h: &[Arc<dyn ScalarField>],
    conformal: &Arc<dyn ScalarField>,
) -> Vec<Arc<dyn ScalarField>> {
    (0..3)
        .map(|i| {
            Arc::new(ProductField::new(
                1.0,
                vec![
                    conformal.clone(),
                    h[i].clone(),
                    Arc::new(CofactorField { index: i }) as Arc<dyn ScalarField>,
                ],
            )) as Arc<dyn ScalarField>
        })
        .collect()
}

fn build_family_metric(
    id: impl Into<String>,
    h: Vec<Arc<dyn ScalarField>>,
    conformal: Arc<dyn ScalarField>,
    kind: FamilyKind,
    base_intervals: [(f64, f64); 3],
    domain: Domain,
) -> Result<DiagonalMetric> {
    let gup = family_components(&h, &conformal);
    let ln_r: Arc<dyn ScalarField> =
        Arc::new(LnRFamilyField { h: h.clone(), conformal: conformal.clone() });
    let family = FamilyInfo { h, conformal, kind, base_intervals };
    DiagonalMetric::from_components_unchecked(
        id,
        vec!["q1".into(), "q2".into(), "q3".into()],
        gup,
        domain,
        Some(family),
        Some(ln_r),
    )
}

/// General conformally separable metric: independent univariate profiles and
/// an arbitrary conformal factor on a caller-supplied domain.
pub fn make_conformally_separable(
    id: impl Into<String>,
    h: Vec<Arc<dyn ScalarField>>,
    conformal: Arc<dyn ScalarField>,
    domain: Domain,
) -> Result<DiagonalMetric> {
    if h.len() != 3 {
        return Err(Error::PointDim { want: 3, got: h.len() });
    }
    for (i, hi) in h.iter().enumerate() {
        check_univariate(hi.as_ref(), i, &domain)?;
    }
    let base_intervals = [
        (domain.lo[0], domain.hi[0]),
        (domain.lo[1], domain.hi[1]),
        (domain.lo[2], domain.hi[2]),
    ];
    build_family_metric(id, h, conformal, FamilyKind::General, base_intervals, domain)
}

/// Shared-profile metric `g^ii = Q · P(q^i) · S_i` on three coordinate
/// intervals (degree of `P` at most five).
pub fn make_rsep(
    id: impl Into<String>,
    p: &Poly,
    conformal: Arc<dyn ScalarField>,
    intervals: [(f64, f64); 3],
) -> Result<DiagonalMetric> {
    if p.degree() > MAX_PROFILE_DEGREE {
        return Err(Error::DegreeTooHigh { degree: p.degree(), max: MAX_PROFILE_DEGREE });
    }
    let h: Vec<Arc<dyn ScalarField>> = (0..3)
        .map(|i| Arc::new(ProfileField::new(p.clone(), i)) as Arc<dyn ScalarField>)
        .collect();
    let domain = interval_domain(&intervals, 0.0)?;
    build_family_metric(id, h, conformal, FamilyKind::SharedPoly(p.clone()), intervals, domain)
}

fn require_ordered(roots: &[f64]) -> Result<()> {
    for i in 1..roots.len() {
        if !(roots[i] > roots[i - 1]) {
            return Err(Error::RootsNotOrdered { index: i, value: roots[i] });
        }
    }
    Ok(())
}

/// Shared-profile metric with `P = scale · Π (t - e_a)` and coordinate
/// intervals taken as the first three root gaps (four or five ordered roots).
pub fn rsep_from_roots(
    id: impl Into<String>,
    roots: &[f64],
    scale: f64,
    conformal: Arc<dyn ScalarField>,
) -> Result<DiagonalMetric> {
    if !(4..=5).contains(&roots.len()) {
        return Err(Error::Inconsistent {
            context: "rsep_from_roots",
            detail: format!("need 4 or 5 ordered roots to cut 3 intervals, got {}", roots.len()),
        });
    }
    require_ordered(roots)?;
    let p = Poly::from_roots(roots, scale)?;
    let intervals = [
        (roots[0], roots[1]),
        (roots[1], roots[2]),
        (roots[2], roots[3]),
    ];
    make_rsep(id, &p, conformal, intervals)
}

/// The simply separable component form
/// `g^ii = P(q^i) / ((q^i - q^j)(q^i - q^k))`.  The supplied intervals are
/// scanned for interior zeros of `P`; if any are found, the interval is
/// shrunk to the widest zero-free stretch and a warning is returned.
pub fn simple_stackel_metric(
    id: impl Into<String>,
    p: &Poly,
    intervals: [(f64, f64); 3],
) -> Result<(DiagonalMetric, Vec<String>)> {
    if p.degree() > MAX_PROFILE_DEGREE {
        return Err(Error::DegreeTooHigh { degree: p.degree(), max: MAX_PROFILE_DEGREE });
    }
    let mut warnings = Vec::new();
    let mut fixed = intervals;
    for (i, iv) in fixed.iter_mut().enumerate() {
        let (a, b) = *iv;
        const SCAN: usize = 1000;
        let step = (b - a) / SCAN as f64;
        // Locate interior zeros of P by sign changes between consecutive
        // midpoint samples; exclude the whole bracketing step so the chosen
        // stretch is strictly zero-free.
        let mut stretches = Vec::new();
        let mut start = a;
        let mut prev = p.eval(a + 0.5 * step);
        for k in 1..SCAN {
            let t = a + (k as f64 + 0.5) * step;
            let v = p.eval(t);
            if prev == 0.0 || v == 0.0 || (prev < 0.0) != (v < 0.0) {
                stretches.push((start, t - step));
                start = t;
            }
            prev = v;
        }
        stretches.push((start, b));
        if stretches.len() > 1 {
            let (lo, hi) = stretches
                .into_iter()
                .max_by(|x, y| {
                    (x.1 - x.0).partial_cmp(&(y.1 - y.0)).expect("finite widths")
                })
                .expect("at least one stretch");
            warnings.push(format!(
                "interval {i} [{a}, {b}] contains zeros of the profile polynomial; \
                 shrunk to [{lo}, {hi}]"
            ));
            *iv = (lo, hi);
        }
    }
    let h: Vec<Arc<dyn ScalarField>> = (0..3)
        .map(|i| Arc::new(ProfileField::new(p.clone(), i)) as Arc<dyn ScalarField>)
        .collect();
    let conformal: Arc<dyn ScalarField> = Arc::new(CyclicRecipField);
    let domain = interval_domain(&fixed, 0.0)?;
    let metric = build_family_metric(
        id,
        h,
        conformal,
        FamilyKind::Simple(p.clone()),
        fixed,
        domain,
    )?;
    Ok((metric, warnings))
}

/// Image of a chart point under the elliptic-coordinate map.
#[derive(Debug, Clone, Serialize)]
pub struct EllipticPoint {
    pub lambda: f64,
    pub x: [f64; 3],
    /// The flat conformal factor `Q_E = 4λ² / ((q¹-q²)(q²-q³)(q³-q¹))`.
    pub q_e: f64,
}

fn check_chain(roots: &[f64], q: &[f64]) -> Result<()> {
    if roots.len() != 5 {
        return Err(Error::PointDim { want: 5, got: roots.len() });
    }
    require_ordered(roots)?;
    if q.len() != 3 {
        return Err(Error::PointDim { want: 3, got: q.len() });
    }
    let chain_ok = roots[0] < q[0]
        && q[0] < roots[1]
        && roots[1] < q[1]
        && q[1] < roots[2]
        && roots[2] < q[2]
        && q[2] < roots[3];
    if !chain_ok {
        return Err(Error::OutsideDomain {
            point: q.to_vec(),
            reason: format!(
                "coordinates must interlace the roots: e1 < q1 < e2 < q2 < e3 < q3 < e4, \
                 roots {roots:?}"
            ),
        });
    }
    Ok(())
}

/// Radicand of the Cartesian component `x^a`:
/// `Π_i (q^i - e_{a+1}) / Π_{b≠a+1} (e_{a+1} - e_b)` (0-based `a`).
fn radicand_jet<T: JetScalar>(roots: &[f64], seeds: &[Jet<T>], a: usize) -> Result<Jet<T>> {
    let e = roots[a + 1];
    let mut num = seeds[0].sub(&seeds[0].const_like_jet(e))?;
    for s in &seeds[1..3] {
        num = num.mul(&s.sub(&s.const_like_jet(e))?)?;
    }
    let den: f64 = roots
        .iter()
        .enumerate()
        .filter(|&(b, _)| b != a + 1)
        .map(|(_, &eb)| e - eb)
        .product();
    Ok(num.scale(1.0 / den))
}

/// The normalisation `λ = sqrt(rad_0) + sqrt(-rad_4)` built from the two
/// extreme roots (both radicands are positive on the interlaced domain).
fn lambda_jet<T: JetScalar>(roots: &[f64], seeds: &[Jet<T>]) -> Result<Jet<T>> {
    let term = |root_idx: usize, negate: bool| -> Result<Jet<T>> {
        let e = roots[root_idx];
        let mut num = seeds[0].sub(&seeds[0].const_like_jet(e))?;
        for s in &seeds[1..3] {
            num = num.mul(&s.sub(&s.const_like_jet(e))?)?;
        }
        let den: f64 = roots
            .iter()
            .enumerate()
            .filter(|&(b, _)| b != root_idx)
            .map(|(_, &eb)| e - eb)
            .product();
        let mut u = num.scale(1.0 / den);
        if negate {
            u = u.neg();
        }
        Ok(u.apply(Func::Sqrt)?)
    };
    Ok(term(0, false)?.add(&term(4, true)?)?)
}

/// Evaluate the map `q ↦ x` at a plain point.
pub fn elliptic_map(roots: &[f64], q: &[f64]) -> Result<EllipticPoint> {
    check_chain(roots, q)?;
    // Guard the radicands explicitly so near-boundary round-off produces a
    // structured error instead of a jet domain failure.
    let seeds0 = seed_point(q, 0)?;
    let mut x = [0.0; 3];
    let mut rads = [0.0; 3];
    for a in 0..3 {
        let r = *radicand_jet(roots, &seeds0, a)?.value();
        if r < 0.0 {
            return Err(Error::NegativeRadicand { axis: a, value: r, q: q.to_vec() });
        }
        rads[a] = r;
    }
    let lambda = *lambda_jet(roots, &seeds0)?.value();
    for a in 0..3 {
        x[a] = rads[a].sqrt() / lambda;
    }
    let prod = *cyclic_product(&seeds0)?.value();
    Ok(EllipticPoint { lambda, x, q_e: 4.0 * lambda * lambda / prod })
}

/// Jets of the Cartesian components and `λ` at a point (used for pullback
/// Jacobians).
pub(crate) fn elliptic_map_jets(
    roots: &[f64],
    q: &[f64],
    order: usize,
) -> Result<(Jet3, Vec<Jet3>)> {
    check_chain(roots, q)?;
    let seeds = seed_point(q, order)?;
    let lambda = lambda_jet(roots, &seeds)?;
    let mut x = Vec::with_capacity(3);
    for a in 0..3 {
        let rad = radicand_jet(roots, &seeds, a)?;
        if rad.value().re() < 0.0 {
            return Err(Error::NegativeRadicand { axis: a, value: rad.value().re(), q: q.to_vec() });
        }
        x.push(rad.apply(Func::Sqrt)?.div(&lambda)?);
    }
    Ok((lambda, x))
}

/// Conformal factor of flat Euclidean 3-space in elliptic coordinates:
/// `Q_E = 4λ(q)² / ((q¹-q²)(q²-q³)(q³-q¹))`.
#[derive(Debug, Clone)]
pub struct FlatConformalField {
    roots: Vec<f64>,
}

impl FlatConformalField {
    pub fn new(roots: &[f64]) -> Result<Self> {
        if roots.len() != 5 {
            return Err(Error::PointDim { want: 5, got: roots.len() });
        }
        require_ordered(roots)?;
        Ok(FlatConformalField { roots: roots.to_vec() })
    }

    fn eval_generic<T: JetPoint>(&self, point: &[T], order: usize) -> Result<Jet<T>> {
        if point.len() != 3 {
            return Err(Error::PointDim { want: 3, got: point.len() });
        }
        let seeds = seed_point(point, order)?;
        let lambda = lambda_jet(&self.roots, &seeds)?;
        let prod = cyclic_product(&seeds)?;
        Ok(lambda.mul(&lambda)?.scale(4.0).div(&prod)?)
    }
}

impl ScalarField for FlatConformalField {
    fn dim(&self) -> usize {
        3
    }

    fn jet(&self, point: &[f64], order: usize) -> Result<Jet3> {
        self.eval_generic(point, order)
    }

    fn jet_nested(&self, point: &[Jet3], order: usize) -> Result<Jet<Jet3>> {
        self.eval_generic(point, order)
    }
}

/// Conformal factor of the round 3-sphere (radius `r`) over the same
/// elliptic chart: `Q_S = Q_E · (r² + |x(q)|²)² / (4 r⁴)`.
#[derive(Debug, Clone)]
pub struct SphereConformalField {
    roots: Vec<f64>,
    radius: f64,
}

impl SphereConformalField {
    pub fn new(roots: &[f64], radius: f64) -> Result<Self> {
        if roots.len() != 5 {
            return Err(Error::PointDim { want: 5, got: roots.len() });
        }
        require_ordered(roots)?;
        if !(radius > 0.0) {
            return Err(Error::CoefficientZero { what: "sphere radius" });
        }
        Ok(SphereConformalField { roots: roots.to_vec(), radius })
    }

    fn eval_generic<T: JetPoint>(&self, point: &[T], order: usize) -> Result<Jet<T>> {
        if point.len() != 3 {
            return Err(Error::PointDim { want: 3, got: point.len() });
        }
        let seeds = seed_point(point, order)?;
        let lambda = lambda_jet(&self.roots, &seeds)?;
        let lambda2 = lambda.mul(&lambda)?;
        // |x|² = Σ_a rad_a / λ².
        let mut rad_sum = radicand_jet(&self.roots, &seeds, 0)?;
        for a in 1..3 {
            rad_sum = rad_sum.add(&radicand_jet(&self.roots, &seeds, a)?)?;
        }
        let x2 = rad_sum.div(&lambda2)?;
        let r2 = self.radius * self.radius;
        let stereo = x2.add(&x2.const_like_jet(r2))?;
        let stereo2 = stereo.mul(&stereo)?.scale(1.0 / (4.0 * r2 * r2));
        let prod = cyclic_product(&seeds)?;
        let q_e = lambda2.scale(4.0).div(&prod)?;
        Ok(q_e.mul(&stereo2)?)
    }
}

impl ScalarField for SphereConformalField {
    fn dim(&self) -> usize {
        3
    }

    fn jet(&self, point: &[f64], order: usize) -> Result<Jet3> {
        self.eval_generic(point, order)
    }

    fn jet_nested(&self, point: &[Jet3], order: usize) -> Result<Jet<Jet3>> {
        self.eval_generic(point, order)
    }
}

/// Flat Euclidean 3-space in elliptic coordinates cut from five ordered
/// roots: shared profile `P = Π (t - e_a)`, conformal factor `Q_E`.
pub fn flat_elliptic_metric(id: impl Into<String>, roots: &[f64]) -> Result<DiagonalMetric> {
    let conformal: Arc<dyn ScalarField> = Arc::new(FlatConformalField::new(roots)?);
    rsep_from_roots(id, roots, 1.0, conformal)
}

/// Round 3-sphere of radius `r` over the same chart.
pub fn sphere_elliptic_metric(
    id: impl Into<String>,
    roots: &[f64],
    radius: f64,
) -> Result<DiagonalMetric> {
    let conformal: Arc<dyn ScalarField> = Arc::new(SphereConformalField::new(roots, radius)?);
    rsep_from_roots(id, roots, 1.0, conformal)
}

/// The round 3-sphere in its stereographic chart,
/// `g^ii = (r² + |X|²)² / (4 r⁴)`: every component equal, so every
/// coordinate is conformally ignorable.
pub fn sphere_stereographic_chart(id: impl Into<String>, radius: f64) -> Result<DiagonalMetric> {
    if !(radius > 0.0) {
        return Err(Error::CoefficientZero { what: "sphere radius" });
    }
    let scope = crate::expr::Scope::new(vec!["X1", "X2", "X3"], vec!["r"])
        .expect("static names are valid");
    let g: Arc<dyn ScalarField> = Arc::new(crate::fields::ExprField::parse(
        "((r^2 + X1^2 + X2^2 + X3^2)^2) / (4 * r^4)",
        &scope,
        vec![radius],
    )?);
    let half = 1.5 * radius;
    let domain = Domain::new(vec![-half; 3], vec![half; 3], 0.0)?;
    DiagonalMetric::from_components(
        id,
        vec!["X1".into(), "X2".into(), "X3".into()],
        vec![g.clone(), g.clone(), g],
        domain,
    )
}

/// Ambient chart a pullback is compared against.
#[derive(Debug, Clone, Copy)]
pub enum AmbientChart {
    /// Flat metric `δ_ab`.
    Euclidean,
    /// Stereographic 3-sphere metric `4 r⁴ / (r² + |x|²)² δ_ab`.
    Stereographic { radius: f64 },
}

/// Result of comparing a family metric against the pullback of an ambient
/// metric through the elliptic map.
#[derive(Debug, Clone, Serialize)]
pub struct PullbackReport {
    pub samples: usize,
    pub max_rel_diag: f64,
    pub max_abs_offdiag: f64,
}

/// Pull the ambient metric back through `q ↦ x(q)` and compare with the
/// metric's own covariant components on sample points.
pub fn pullback_check(
    metric: &DiagonalMetric,
    roots: &[f64],
    ambient: AmbientChart,
    plan: &SamplingPlan,
) -> Result<PullbackReport> {
    let (points, _) = plan.sample(metric.domain())?;
    let mut max_rel_diag = 0.0_f64;
    let mut max_abs_offdiag = 0.0_f64;
    for q in &points {
        let (_, x) = elliptic_map_jets(roots, q, 1)?;
        let xv: Vec<f64> = x.iter().map(|j| *j.value()).collect();
        let gamma = match ambient {
            AmbientChart::Euclidean => 1.0,
            AmbientChart::Stereographic { radius } => {
                let r2 = radius * radius;
                let n2: f64 = xv.iter().map(|v| v * v).sum();
                4.0 * r2 * r2 / ((r2 + n2) * (r2 + n2))
            }
        };
        let gup = metric.gup_values(q)?;
        let mut diag_scale = 0.0_f64;
        for i in 0..3 {
            diag_scale = diag_scale.max((1.0 / gup[i]).abs());
        }
        for i in 0..3 {
            for j in i..3 {
                let pullback: f64 =
                    (0..3).map(|a| x[a].grad(i).unwrap() * x[a].grad(j).unwrap()).sum::<f64>()
                        * gamma;
                if i == j {
                    let want = 1.0 / gup[i];
                    let rel = (pullback - want).abs() / want.abs().max(1e-300);
                    max_rel_diag = max_rel_diag.max(rel);
                } else {
                    max_abs_offdiag = max_abs_offdiag.max(pullback.abs() / diag_scale);
                }
            }
        }
    }
    Ok(PullbackReport { samples: points.len(), max_rel_diag, max_abs_offdiag })
}
