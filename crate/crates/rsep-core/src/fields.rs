//! Scalar fields on a coordinate chart.
//!
//! A [`ScalarField`] produces jets of itself at a point.  Two entry points are
//! required: a plain evaluation ([`ScalarField::jet`]) and a nested one
//! ([`ScalarField::jet_nested`]) where the point coordinates are themselves
//! jets.  The nested form lets downstream code differentiate quantities that
//! are *computed* from fields (curvature scalars, potentials) by running the
//! same pipeline over `Jet<Jet<f64>>`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{Expr, Scope};
use crate::jets::{seed_point, Jet, Jet3, JetScalar};

/// A real-valued function of the chart coordinates, differentiable through
/// jets.
pub trait ScalarField: Send + Sync {
    /// Number of coordinates.
    fn dim(&self) -> usize;
    /// Jet of the field at a plain point.
    fn jet(&self, point: &[f64], order: usize) -> Result<Jet3>;
    /// Jet of the field where each coordinate is itself a jet (one nesting
    /// level).  Fields that cannot support this return
    /// [`Error::NestedUnsupported`].
    fn jet_nested(&self, point: &[Jet3], order: usize) -> Result<Jet<Jet3>>;
}

/// Coordinate scalars a field can be evaluated over: `f64` for plain jets,
/// [`Jet3`] for one level of nesting.
pub trait JetPoint: JetScalar {
    fn field_jet(field: &dyn ScalarField, point: &[Self], order: usize) -> Result<Jet<Self>>;
}

impl JetPoint for f64 {
    fn field_jet(field: &dyn ScalarField, point: &[Self], order: usize) -> Result<Jet<Self>> {
        field.jet(point, order)
    }
}

impl JetPoint for Jet3 {
    fn field_jet(field: &dyn ScalarField, point: &[Self], order: usize) -> Result<Jet<Self>> {
        field.jet_nested(point, order)
    }
}

fn check_dim(want: usize, got: usize) -> Result<()> {
    if want == got {
        Ok(())
    } else {
        Err(Error::PointDim { want, got })
    }
}

/// A constant.
#[derive(Debug, Clone)]
pub struct ConstField {
    pub dim: usize,
    pub value: f64,
}

impl ConstField {
    pub fn new(dim: usize, value: f64) -> Self {
        ConstField { dim, value }
    }
}

impl ScalarField for ConstField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, point: &[f64], order: usize) -> Result<Jet3> {
        check_dim(self.dim, point.len())?;
        Ok(Jet::constant(self.dim, order, self.value)?)
    }

    fn jet_nested(&self, point: &[Jet3], order: usize) -> Result<Jet<Jet3>> {
        check_dim(self.dim, point.len())?;
        let proto = point[0].const_like(self.value);
        Ok(Jet::constant(self.dim, order, proto)?)
    }
}

/// A parsed closed-form expression with bound parameter values.
#[derive(Debug, Clone)]
pub struct ExprField {
    expr: Expr,
    dim: usize,
    params: Vec<f64>,
}

impl ExprField {
    pub fn new(expr: Expr, scope: &Scope, params: Vec<f64>) -> Result<Self> {
        if params.len() != scope.params().len() {
            return Err(Error::PointDim { want: scope.params().len(), got: params.len() });
        }
        Ok(ExprField { expr, dim: scope.coords().len(), params })
    }

    /// Parse and bind in one step.
    pub fn parse(src: &str, scope: &Scope, params: Vec<f64>) -> Result<Self> {
        let expr = Expr::parse(src, scope).map_err(|e| Error::Inconsistent {
            context: "expression parse",
            detail: e.to_string(),
        })?;
        Self::new(expr, scope, params)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    fn eval_generic<T: JetPoint>(&self, point: &[T], order: usize) -> Result<Jet<T>> {
        check_dim(self.dim, point.len())?;
        let seeds = seed_point(point, order)?;
        Ok(self.expr.eval_seeded(&seeds, &self.params)?)
    }
}

impl ScalarField for ExprField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, point: &[f64], order: usize) -> Result<Jet3> {
        let out = self.eval_generic(point, order)?;
        if !out.all_finite() {
            return Err(Error::NonFinite { context: "expression field" });
        }
        Ok(out)
    }

    fn jet_nested(&self, point: &[Jet3], order: usize) -> Result<Jet<Jet3>> {
        self.eval_generic(point, order)
    }
}

/// Pointwise product of factor fields, with an optional constant prefactor.
pub struct ProductField {
    pub factor: f64,
    pub terms: Vec<Arc<dyn ScalarField>>,
}

impl ProductField {
    pub fn new(factor: f64, terms: Vec<Arc<dyn ScalarField>>) -> Self {
        ProductField { factor, terms }
    }

    fn eval_generic<T: JetPoint>(&self, point: &[T], order: usize) -> Result<Jet<T>> {
        let mut acc: Option<Jet<T>> = None;
        for term in &self.terms {
            let j = T::field_jet(term.as_ref(), point, order)?;
            acc = Some(match acc {
                None => j,
                Some(a) => a.mul(&j)?,
            });
        }
        let acc = match acc {
            Some(a) => a,
            None => {
                let proto = point
                    .first()
                    .ok_or(Error::PointDim { want: 1, got: 0 })?
                    .const_like(1.0);
                Jet::constant(point.len(), order, proto)?
            }
        };
        Ok(acc.scale(self.factor))
    }
}

impl ScalarField for ProductField {
    fn dim(&self) -> usize {
        self.terms.first().map_or(0, |t| t.dim())
    }

    fn jet(&self, point: &[f64], order: usize) -> Result<Jet3> {
        self.eval_generic(point, order)
    }

    fn jet_nested(&self, point: &[Jet3], order: usize) -> Result<Jet<Jet3>> {
        self.eval_generic(point, order)
    }
}

/// Weighted sum of fields.
pub struct SumField {
    pub terms: Vec<(f64, Arc<dyn ScalarField>)>,
    pub dim: usize,
}

impl SumField {
    pub fn new(dim: usize, terms: Vec<(f64, Arc<dyn ScalarField>)>) -> Self {
        SumField { terms, dim }
    }

    fn eval_generic<T: JetPoint>(&self, point: &[T], order: usize) -> Result<Jet<T>> {
        let proto = point
            .first()
            .ok_or(Error::PointDim { want: 1, got: 0 })?
            .const_like(0.0);
        let mut acc = Jet::constant(point.len(), order, proto)?;
        for (w, term) in &self.terms {
            let j = T::field_jet(term.as_ref(), point, order)?;
            acc = acc.add(&j.scale(*w))?;
        }
        Ok(acc)
    }
}

impl ScalarField for SumField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, point: &[f64], order: usize) -> Result<Jet3> {
        self.eval_generic(point, order)
    }

    fn jet_nested(&self, point: &[Jet3], order: usize) -> Result<Jet<Jet3>> {
        self.eval_generic(point, order)
    }
}

/// `exp(factor * sigma)` for a conformal weight field `sigma`.
pub struct ScaledExpField {
    pub sigma: Arc<dyn ScalarField>,
    pub factor: f64,
}

impl ScaledExpField {
    fn eval_generic<T: JetPoint>(&self, point: &[T], order: usize) -> Result<Jet<T>> {
        let s = T::field_jet(self.sigma.as_ref(), point, order)?;
        Ok(s.scale(self.factor).apply(crate::jets::Func::Exp)?)
    }
}

impl ScalarField for ScaledExpField {
    fn dim(&self) -> usize {
        self.sigma.dim()
    }

    fn jet(&self, point: &[f64], order: usize) -> Result<Jet3> {
        self.eval_generic(point, order)
    }

    fn jet_nested(&self, point: &[Jet3], order: usize) -> Result<Jet<Jet3>> {
        self.eval_generic(point, order)
    }
}

/// A polynomial in a single chosen coordinate, coefficients in ascending
/// degree order.
#[derive(Debug, Clone)]
pub struct PolyCoordField {
    pub coeffs: Vec<f64>,
    pub coord: usize,
    pub dim: usize,
}

impl PolyCoordField {
    pub fn new(dim: usize, coord: usize, coeffs: Vec<f64>) -> Self {
        PolyCoordField { coeffs, coord, dim }
    }

    fn eval_generic<T: JetPoint>(&self, point: &[T], order: usize) -> Result<Jet<T>> {
        check_dim(self.dim, point.len())?;
        let seeds = seed_point(point, order)?;
        let q = &seeds[self.coord];
        // Horner evaluation keeps jet operations linear in the degree.
        let mut acc = q.const_like(*self.coeffs.last().unwrap_or(&0.0));
        for &c in self.coeffs.iter().rev().skip(1) {
            acc = acc.mul(q)?.add(&q.const_like(c))?;
        }
        Ok(acc)
    }
}

impl ScalarField for PolyCoordField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, point: &[f64], order: usize) -> Result<Jet3> {
        self.eval_generic(point, order)
    }

    fn jet_nested(&self, point: &[Jet3], order: usize) -> Result<Jet<Jet3>> {
        self.eval_generic(point, order)
    }
}
