//! Orthogonal metrics on a 3-D chart and their curvature.
//!
//! A [`DiagonalMetric`] stores the *inverse* metric components `g^ii` as
//! scalar fields; everything downstream (connection, Ricci, scalar curvature,
//! Cotton tensor, Laplace–Beltrami and the conformally weighted operator) is
//! computed from jets of those fields.  No determinant root is ever taken:
//! the identity `∂_i(√g g^ii)/√g = -g^ii Γ_i` with the contracted connection
//!
//! ```text
//! Γ_i = -(∂_i g^ii)/g^ii + ½ Σ_h (∂_i g^hh)/g^hh
//! ```
//!
//! keeps every formula rational in the `g^ii`, hence valid for either
//! signature sign pattern on the diagonal.
//!
//! All pipeline routines are generic over [`JetPoint`], so the same code
//! yields plain derivatives (`T = f64`) and one extra tower of derivatives
//! (`T = Jet3`) when a caller needs to differentiate a *computed* scalar such
//! as the curvature.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::families::FamilyInfo;
use crate::fields::{JetPoint, ScalarField};
use crate::jets::{seed_point, Jet, Jet3, JetScalar};

/// Coefficient of the scalar-curvature term in the conformally invariant
/// operator `ℍf = Δf + c·R_s·f` for n = 3, with `|c| = (n-2)/(4(n-1)) = 1/8`.
///
/// The sign is not a free choice: this crate uses the coordinate Laplacian
/// normalisation (`Δ(r²) = 6` on flat space) together with scalar curvature
/// positive on round spheres (`R_s = 6/r²`), and with that pairing the
/// covariance identity `ℍ̃(e^{-σ/2} f) = e^{-5σ/2} ℍf` under
/// `g̃ = e^{2σ} g` holds for `c = -1/8` and fails for `c = +1/8` (texts that
/// print `+⅛` pair it with the opposite curvature sign convention).  On a
/// round sphere the operator therefore coincides with the Helmholtz operator
/// at the fixed energy `E = +R_s/8 = +3/(4r²)`.
pub const CI_CURVATURE_COEFF: f64 = -1.0 / 8.0;

/// An axis-aligned box of admissible chart points.  `min_separation` keeps
/// samples away from coordinate collisions `q^i = q^j`, where family metrics
/// degenerate.
#[derive(Debug, Clone, Serialize)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub min_separation: f64,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, min_separation: f64) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::PointDim { want: lo.len().max(1), got: hi.len() });
        }
        for (i, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l < h) || !l.is_finite() || !h.is_finite() {
                return Err(Error::OutsideDomain {
                    point: vec![l, h],
                    reason: format!("empty or non-finite bounds for coordinate {i}"),
                });
            }
        }
        if !(min_separation >= 0.0) {
            return Err(Error::NonFinite { context: "domain minimum separation" });
        }
        Ok(Domain { lo, hi, min_separation })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&x, (&l, &h))| x >= l && x <= h && x.is_finite())
    }

    /// Inside the box *and* clear of pairwise coordinate collisions.
    pub fn admissible(&self, p: &[f64]) -> bool {
        if !self.contains(p) {
            return false;
        }
        for i in 0..p.len() {
            for j in (i + 1)..p.len() {
                if (p[i] - p[j]).abs() < self.min_separation {
                    return false;
                }
            }
        }
        true
    }

    /// Why a point is inadmissible, for error messages.
    pub fn rejection_reason(&self, p: &[f64]) -> String {
        if p.len() != self.dim() {
            return format!("dimension {} instead of {}", p.len(), self.dim());
        }
        for (i, (&x, (&l, &h))) in p.iter().zip(self.lo.iter().zip(&self.hi)).enumerate() {
            if !(x >= l && x <= h) {
                return format!("coordinate {i} = {x} outside [{l}, {h}]");
            }
        }
        for i in 0..p.len() {
            for j in (i + 1)..p.len() {
                if (p[i] - p[j]).abs() < self.min_separation {
                    return format!(
                        "coordinates {i} and {j} closer than {} (collision guard)",
                        self.min_separation
                    );
                }
            }
        }
        "admissible".to_owned()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(&l, &h)| 0.5 * (l + h)).collect()
    }
}

/// Curvature data at a single point, with tensors flattened row-major.
///
/// * `christoffel_first[(h*n + k)*n + i]` is `Γ_{hk,i} = ½(∂_h g_{ki} +
///   ∂_k g_{hi} - ∂_i g_{hk})`.
/// * `ricci[i*n + j]` is the Ricci tensor.
/// * `cotton[(i*n + j)*n + k]` is `C_{ijk} = ∇_k R_{ij} - ∇_j R_{ik}
///   - ¼ (g_{ij} ∂_k R - g_{ik} ∂_j R)`.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureData {
    pub point: Vec<f64>,
    pub christoffel_first: Vec<f64>,
    pub contracted_gamma: Vec<f64>,
    pub ricci: Vec<f64>,
    pub scalar_curvature: f64,
    pub cotton: Vec<f64>,
}

/// A diagonal (orthogonal) metric given through its inverse components.
#[derive(Clone)]
pub struct DiagonalMetric {
    id: String,
    coords: Vec<String>,
    gup: Vec<Arc<dyn ScalarField>>,
    domain: Domain,
    family: Option<FamilyInfo>,
    ln_r_hint: Option<Arc<dyn ScalarField>>,
}

impl std::fmt::Debug for DiagonalMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiagonalMetric")
            .field("id", &self.id)
            .field("coords", &self.coords)
            .field("domain", &self.domain)
            .field("has_family", &self.family.is_some())
            .finish()
    }
}

impl DiagonalMetric {
    /// Build a metric from user-supplied inverse components.  All components
    /// are probed on a coarse deterministic sample and must be strictly
    /// positive: a negative component means the input is not a Riemannian
    /// metric and is rejected here (family constructors, which control their
    /// own sign bookkeeping, use [`DiagonalMetric::from_components_unchecked`]).
    pub fn from_components(
        id: impl Into<String>,
        coords: Vec<String>,
        gup: Vec<Arc<dyn ScalarField>>,
        domain: Domain,
    ) -> Result<Self> {
        let m = Self::from_components_unchecked(id, coords, gup, domain, None, None)?;
        let plan = crate::sampling::SamplingPlan { count: 24, seed: 0x5eed };
        let (mut probes, _) = plan.sample(&m.domain)?;
        probes.push(m.domain.center());
        for p in &probes {
            if !m.domain.admissible(p) {
                continue;
            }
            for (i, g) in m.gup.iter().enumerate() {
                let v = *g.jet(p, 0)?.value();
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::NonRiemannian { index: i, point: p.clone(), value: v });
                }
            }
        }
        Ok(m)
    }

    /// Construct without the positivity probe; components must still be
    /// finite and nonzero across the domain (checked on a coarse sample).
    pub(crate) fn from_components_unchecked(
        id: impl Into<String>,
        coords: Vec<String>,
        gup: Vec<Arc<dyn ScalarField>>,
        domain: Domain,
        family: Option<FamilyInfo>,
        ln_r_hint: Option<Arc<dyn ScalarField>>,
    ) -> Result<Self> {
        let n = domain.dim();
        if coords.len() != n {
            return Err(Error::PointDim { want: n, got: coords.len() });
        }
        if gup.len() != n {
            return Err(Error::PointDim { want: n, got: gup.len() });
        }
        for g in &gup {
            if g.dim() != n {
                return Err(Error::PointDim { want: n, got: g.dim() });
            }
        }
        let m = DiagonalMetric { id: id.into(), coords, gup, domain, family, ln_r_hint };
        let plan = crate::sampling::SamplingPlan { count: 12, seed: 0x5eed };
        let (mut probes, _) = plan.sample(&m.domain)?;
        probes.push(m.domain.center());
        for p in &probes {
            if !m.domain.admissible(p) {
                continue;
            }
            for (i, g) in m.gup.iter().enumerate() {
                let v = *g.jet(p, 0)?.value();
                if v == 0.0 || !v.is_finite() {
                    return Err(Error::DegenerateComponent {
                        index: i,
                        point: p.clone(),
                        value: v,
                    });
                }
            }
        }
        Ok(m)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn component(&self, i: usize) -> &Arc<dyn ScalarField> {
        &self.gup[i]
    }

    pub fn components(&self) -> &[Arc<dyn ScalarField>] {
        &self.gup
    }

    pub fn family(&self) -> Option<&FamilyInfo> {
        self.family.as_ref()
    }

    pub(crate) fn ln_r_hint(&self) -> Option<&Arc<dyn ScalarField>> {
        self.ln_r_hint.as_ref()
    }

    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::PointDim { want: self.dim(), got: p.len() });
        }
        if !self.domain.admissible(p) {
            return Err(Error::OutsideDomain {
                point: p.to_vec(),
                reason: self.domain.rejection_reason(p),
            });
        }
        Ok(())
    }

    /// Inverse-metric values at a point.
    pub fn gup_values(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_point(p)?;
        self.gup.iter().map(|g| Ok(*g.jet(p, 0)?.value())).collect()
    }

    /// Jets of every `g^ii` at the (possibly nested) point.
    pub(crate) fn gup_jets<T: JetPoint>(&self, point: &[T], order: usize) -> Result<Vec<Jet<T>>> {
        self.gup.iter().map(|g| T::field_jet(g.as_ref(), point, order)).collect()
    }

    /// Jets of the covariant components `g_ii = 1/g^ii`.
    pub(crate) fn gcov_jets<T: JetPoint>(&self, point: &[T], order: usize) -> Result<Vec<Jet<T>>> {
        self.gup_jets(point, order)?
            .into_iter()
            .map(|g| Ok(g.apply(crate::jets::Func::Recip)?))
            .collect()
    }

    /// Christoffel symbols of the first kind `Γ_{hk,i}` as jets of order
    /// `order` (metric fields are evaluated at `order + 1`).  Flattened as
    /// `(h*n + k)*n + i`.
    pub(crate) fn christoffel_first_jets<T: JetPoint>(
        &self,
        point: &[T],
        order: usize,
    ) -> Result<Vec<Jet<T>>> {
        let n = self.dim();
        let gcov = self.gcov_jets(point, order + 1)?;
        // dg[h][i] = ∂_i g_hh at `order`.
        let mut dg = Vec::with_capacity(n);
        for h in 0..n {
            let mut row = Vec::with_capacity(n);
            for i in 0..n {
                row.push(gcov[h].derivative(i)?);
            }
            dg.push(row);
        }
        let zero = dg[0][0].const_like_jet(0.0);
        let mut out = vec![zero; n * n * n];
        for h in 0..n {
            for k in 0..n {
                for i in 0..n {
                    let mut s = if k == i { dg[k][h].clone() } else { dg[0][0].const_like_jet(0.0) };
                    if h == i {
                        s = s.add(&dg[h][k])?;
                    }
                    if h == k {
                        s = s.sub(&dg[h][i])?;
                    }
                    out[(h * n + k) * n + i] = s.scale(0.5);
                }
            }
        }
        Ok(out)
    }

    /// Christoffel symbols of the second kind `Γ^a_{bc}` as jets of order
    /// `order`, flattened as `(a*n + b)*n + c`.
    pub(crate) fn christoffel_second_jets<T: JetPoint>(
        &self,
        point: &[T],
        order: usize,
    ) -> Result<Vec<Jet<T>>> {
        let n = self.dim();
        let first = self.christoffel_first_jets(point, order)?;
        let gup: Vec<Jet<T>> = self
            .gup_jets(point, order + 1)?
            .into_iter()
            .map(|g| g.truncated(order))
            .collect::<std::result::Result<_, _>>()?;
        let mut out = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    // Γ^a_{bc} = g^{aa} Γ_{bc,a} for a diagonal metric.
                    out.push(gup[a].mul(&first[(b * n + c) * n + a])?);
                }
            }
        }
        Ok(out)
    }

    /// Contracted connection `Γ_i = Σ_h g^hh Γ_{hh,i}` as jets of order
    /// `order`, computed in the rational form that never forms `√g`.
    pub(crate) fn gamma_contracted_jets<T: JetPoint>(
        &self,
        point: &[T],
        order: usize,
    ) -> Result<Vec<Jet<T>>> {
        let n = self.dim();
        let gup = self.gup_jets(point, order + 1)?;
        let gup_lo: Vec<Jet<T>> = gup
            .iter()
            .map(|g| g.truncated(order))
            .collect::<std::result::Result<_, _>>()?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            // Γ_i = -(∂_i g^ii)/g^ii + ½ Σ_h (∂_i g^hh)/g^hh
            let mut s = gup[i].derivative(i)?.div(&gup_lo[i])?.neg();
            for h in 0..n {
                let t = gup[h].derivative(i)?.div(&gup_lo[h])?;
                s = s.add(&t.scale(0.5))?;
            }
            out.push(s);
        }
        Ok(out)
    }

    /// Ricci tensor jets (order `order`; metric evaluated at `order + 2`),
    /// flattened `i*n + j`.
    pub(crate) fn ricci_jets<T: JetPoint>(&self, point: &[T], order: usize) -> Result<Vec<Jet<T>>> {
        let n = self.dim();
        let g2 = self.christoffel_second_jets(point, order + 1)?;
        let g2_lo: Vec<Jet<T>> = g2
            .iter()
            .map(|g| g.truncated(order))
            .collect::<std::result::Result<_, _>>()?;
        let idx = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
        let mut out = Vec::with_capacity(n * n);
        for s in 0..n {
            for v in 0..n {
                // R_{sv} = ∂_m Γ^m_{vs} - ∂_v Γ^m_{ms}
                //        + Γ^m_{ml} Γ^l_{vs} - Γ^m_{vl} Γ^l_{ms}
                let mut r = g2[idx(0, v, s)].derivative(0)?;
                for m in 1..n {
                    r = r.add(&g2[idx(m, v, s)].derivative(m)?)?;
                }
                for m in 0..n {
                    r = r.sub(&g2[idx(m, m, s)].derivative(v)?)?;
                }
                for m in 0..n {
                    for l in 0..n {
                        r = r.add(&g2_lo[idx(m, m, l)].mul(&g2_lo[idx(l, v, s)])?)?;
                        r = r.sub(&g2_lo[idx(m, v, l)].mul(&g2_lo[idx(l, m, s)])?)?;
                    }
                }
                out.push(r);
            }
        }
        Ok(out)
    }

    /// Scalar curvature jet (metric evaluated at `order + 2`).
    pub(crate) fn scalar_curvature_jet<T: JetPoint>(
        &self,
        point: &[T],
        order: usize,
    ) -> Result<Jet<T>> {
        let n = self.dim();
        let ricci = self.ricci_jets(point, order)?;
        let gup: Vec<Jet<T>> = self
            .gup_jets(point, order + 2)?
            .into_iter()
            .map(|g| g.truncated(order))
            .collect::<std::result::Result<_, _>>()?;
        let mut s = gup[0].mul(&ricci[0])?;
        for i in 1..n {
            s = s.add(&gup[i].mul(&ricci[i * n + i])?)?;
        }
        Ok(s)
    }

    /// Christoffel symbols of the first kind at a point.
    pub fn christoffel_first(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_point(p)?;
        Ok(self
            .christoffel_first_jets(p, 0)?
            .into_iter()
            .map(|j| *j.value())
            .collect())
    }

    /// Contracted connection values at a point.
    pub fn contracted_gamma(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_point(p)?;
        Ok(self
            .gamma_contracted_jets(p, 0)?
            .into_iter()
            .map(|j| *j.value())
            .collect())
    }

    /// Ricci tensor values at a point (row-major).
    pub fn ricci(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_point(p)?;
        Ok(self.ricci_jets(p, 0)?.into_iter().map(|j| *j.value()).collect())
    }

    /// Scalar curvature at a point.
    pub fn scalar_curvature(&self, p: &[f64]) -> Result<f64> {
        self.check_point(p)?;
        Ok(*self.scalar_curvature_jet(p, 0)?.value())
    }

    /// Cotton tensor `C_{ijk}` values at a point, flattened `(i*n + j)*n + k`.
    /// Vanishing identically is equivalent to conformal flatness in three
    /// dimensions.
    pub fn cotton(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_point(p)?;
        let n = self.dim();
        let ricci = self.ricci_jets(p, 1)?;
        let rs = self.scalar_curvature_jet(p, 1)?;
        let g2 = self.christoffel_second_jets(p, 0)?;
        let gcov = self.gcov_jets(p, 0)?;
        let idx2 = |a: usize, b: usize| a * n + b;
        let idx3 = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
        // ∇_k R_{ij} = ∂_k R_{ij} - Γ^a_{ki} R_{aj} - Γ^a_{kj} R_{ia}
        let mut nabla = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = *ricci[idx2(i, j)].derivative(k)?.value();
                    for a in 0..n {
                        v -= g2[idx3(a, k, i)].value() * ricci[idx2(a, j)].value();
                        v -= g2[idx3(a, k, j)].value() * ricci[idx2(i, a)].value();
                    }
                    nabla[idx3(i, j, k)] = v;
                }
            }
        }
        let drs: Vec<f64> = (0..n)
            .map(|k| rs.derivative(k).map(|d| *d.value()))
            .collect::<std::result::Result<_, _>>()?;
        let mut out = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let g_ij = if i == j { *gcov[i].value() } else { 0.0 };
                    let g_ik = if i == k { *gcov[i].value() } else { 0.0 };
                    out[idx3(i, j, k)] = nabla[idx3(i, j, k)] - nabla[idx3(i, k, j)]
                        - 0.25 * (g_ij * drs[k] - g_ik * drs[j]);
                }
            }
        }
        Ok(out)
    }

    /// All curvature data at a point in one call.
    pub fn curvature(&self, p: &[f64]) -> Result<CurvatureData> {
        Ok(CurvatureData {
            point: p.to_vec(),
            christoffel_first: self.christoffel_first(p)?,
            contracted_gamma: self.contracted_gamma(p)?,
            ricci: self.ricci(p)?,
            scalar_curvature: self.scalar_curvature(p)?,
            cotton: self.cotton(p)?,
        })
    }

    /// Laplace–Beltrami operator applied to a prebuilt order-2 jet of a
    /// function at `p`: `Δf = Σ_i g^ii (f_,ii - Γ_i f_,i)`.
    pub fn laplace_from_jet(&self, f: &Jet3, p: &[f64]) -> Result<f64> {
        self.check_point(p)?;
        let n = self.dim();
        if f.dim() != n {
            return Err(Error::PointDim { want: n, got: f.dim() });
        }
        let gup = self.gup_jets::<f64>(p, 0)?;
        let gamma = self.gamma_contracted_jets::<f64>(p, 0)?;
        let mut acc = 0.0;
        for i in 0..n {
            acc += gup[i].value() * (f.hess(i, i)? - gamma[i].value() * f.grad(i)?);
        }
        Ok(acc)
    }

    /// Laplace–Beltrami operator applied to a scalar field at `p`.
    pub fn laplace_beltrami(&self, f: &dyn ScalarField, p: &[f64]) -> Result<f64> {
        let fj = f.jet(p, 2)?;
        self.laplace_from_jet(&fj, p)
    }

    /// The conformally weighted operator `Δf + c·R_s·f` with
    /// `c = CI_CURVATURE_COEFF`, applied to a prebuilt order-2 jet.
    pub fn ci_from_jet(&self, f: &Jet3, p: &[f64]) -> Result<f64> {
        let lap = self.laplace_from_jet(f, p)?;
        let rs = self.scalar_curvature(p)?;
        Ok(lap + CI_CURVATURE_COEFF * rs * f.value())
    }

    /// The conformally weighted operator applied to a scalar field.
    pub fn ci_laplace(&self, f: &dyn ScalarField, p: &[f64]) -> Result<f64> {
        let fj = f.jet(p, 2)?;
        self.ci_from_jet(&fj, p)
    }

    /// The metric `e^{-2σ} g^ii` obtained by conformal rescaling
    /// `g̃_ii = e^{2σ} g_ii`.  Family data and the rescaling-gauge hint are
    /// transported: `Q̃ = e^{-2σ} Q` and `ln R̃ = ln R - σ/2`.
    pub fn conformally_rescaled(&self, sigma: Arc<dyn ScalarField>) -> Result<DiagonalMetric> {
        if sigma.dim() != self.dim() {
            return Err(Error::PointDim { want: self.dim(), got: sigma.dim() });
        }
        let weight: Arc<dyn ScalarField> = Arc::new(crate::fields::ScaledExpField {
            sigma: sigma.clone(),
            factor: -2.0,
        });
        let gup: Vec<Arc<dyn ScalarField>> = self
            .gup
            .iter()
            .map(|g| {
                Arc::new(crate::fields::ProductField::new(1.0, vec![weight.clone(), g.clone()]))
                    as Arc<dyn ScalarField>
            })
            .collect();
        let family = self.family.as_ref().map(|fam| fam.conformally_rescaled(&weight));
        let ln_r_hint: Option<Arc<dyn ScalarField>> = self.ln_r_hint.as_ref().map(|hint| {
            Arc::new(crate::fields::SumField::new(
                self.dim(),
                vec![(1.0, hint.clone()), (-0.5, sigma.clone())],
            )) as Arc<dyn ScalarField>
        });
        DiagonalMetric::from_components_unchecked(
            format!("{}~rescaled", self.id),
            self.coords.clone(),
            gup,
            self.domain.clone(),
            family,
            ln_r_hint,
        )
    }
}

/// Scalar curvature of a metric as a field in its own right; nested
/// evaluation lets callers take derivatives of curvature through the full
/// pipeline.
pub struct RicciScalarField {
    metric: DiagonalMetric,
}

impl RicciScalarField {
    pub fn new(metric: &DiagonalMetric) -> Self {
        RicciScalarField { metric: metric.clone() }
    }
}

impl ScalarField for RicciScalarField {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn jet(&self, point: &[f64], order: usize) -> Result<Jet3> {
        if order + 2 <= crate::jets::MAX_ORDER {
            return self.metric.scalar_curvature_jet(point, order);
        }
        if order > 2 {
            return Err(Error::Jet(crate::jets::JetError::OrderTooHigh(order + 2)));
        }
        // Order 2 exceeds the plain cap (metric would need order 4), so run
        // the pipeline over a nested tower: inner jets carry one derivative,
        // the outer pass one more, and the coefficients are reassembled.
        let n = point.len();
        let inner = seed_point(point, 1)?;
        let outer = self.metric.scalar_curvature_jet(&inner, 1)?;
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            let gi = outer.grad(i)?;
            grad[i] = gi.re();
            for j in 0..n {
                hess[i * n + j] = *gi.grad(j)?;
            }
        }
        // Symmetrize: outer/inner mixed coefficients are equal up to
        // round-off, and averaging keeps the jet exactly symmetric.
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (hess[i * n + j] + hess[j * n + i]);
                hess[i * n + j] = avg;
                hess[j * n + i] = avg;
            }
        }
        assemble_plain(n, order, outer.value().re(), &grad, &hess)
    }

    fn jet_nested(&self, point: &[Jet3], order: usize) -> Result<Jet<Jet3>> {
        if order + 2 > crate::jets::MAX_ORDER {
            return Err(Error::Jet(crate::jets::JetError::OrderTooHigh(order + 2)));
        }
        self.metric.scalar_curvature_jet(point, order)
    }
}

/// Build a plain order-≤2 jet from raw value/gradient/Hessian coefficients.
pub(crate) fn assemble_plain(
    n: usize,
    order: usize,
    value: f64,
    grad: &[f64],
    hess_full: &[f64],
) -> Result<Jet3> {
    // Route through seeded arithmetic: v + Σ g_i dx_i + ½ Σ h_ij dx_i dx_j
    // evaluated as a quadratic in the seeds reproduces exactly these
    // coefficients.
    let seeds = seed_point(&vec![0.0; n], order)?;
    let mut acc = seeds[0].const_like_jet(value);
    if order >= 1 {
        for i in 0..n {
            acc = acc.add(&seeds[i].scale(grad[i]))?;
        }
    }
    if order >= 2 {
        for i in 0..n {
            for j in 0..n {
                let term = seeds[i].mul(&seeds[j])?.scale(0.5 * hess_full[i * n + j]);
                acc = acc.add(&term)?;
            }
        }
    }
    Ok(acc)
}
