//! Truncated multivariate Taylor arithmetic ("jets") up to third order.
//!
//! A [`Jet`] holds the value, gradient, symmetric Hessian and symmetric third
//! derivative tensor of a scalar function at a point, in `n` variables.  All
//! arithmetic propagates derivatives exactly (Leibniz products, series
//! reciprocals, Faà di Bruno composition), so every derivative in the crate
//! comes out of this module rather than from finite differences.
//!
//! The coefficient type is generic: `Jet<f64>` is the workhorse, and
//! `Jet<Jet<f64>>` nests one tower deep, which is how higher derivatives of
//! pipeline-computed scalars (scalar curvature, modified potential) are
//! obtained without raising the order cap.

use thiserror::Error;

/// Highest supported derivative order.
pub const MAX_ORDER: usize = 3;

/// Errors from jet construction and arithmetic.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("jet dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("jet order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("requested order {0} exceeds maximum {MAX_ORDER}")]
    OrderTooHigh(usize),
    #[error("coordinate index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("division by zero in jet arithmetic")]
    DivisionByZero,
    #[error("{func} undefined or not differentiable at {value}")]
    Domain { func: &'static str, value: f64 },
    #[error("derivative of an order-0 jet requested")]
    NoDerivative,
}

/// Elementary functions liftable through jets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Recip,
    /// Real power with a constant exponent; requires a positive base.
    Pow(f64),
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Recip => "recip",
            Func::Pow(_) => "pow",
        }
    }
}

/// Binary operations for [`combine`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Scalar ring with elementary functions, implemented by `f64` and by jets
/// themselves so that towers `Jet<Jet<f64>>` work with the same code paths.
pub trait JetScalar: Clone + Send + Sync + 'static {
    /// The underlying point value (innermost coefficient); used for domain
    /// checks and diagnostics.
    fn re(&self) -> f64;
    /// A constant of the same shape (dimension/order) as `self`.
    fn const_like(&self, c: f64) -> Self;
    fn is_finite(&self) -> bool;
    fn neg(&self) -> Self;
    fn add(&self, rhs: &Self) -> Result<Self, JetError>;
    fn sub(&self, rhs: &Self) -> Result<Self, JetError>;
    fn mul(&self, rhs: &Self) -> Result<Self, JetError>;
    fn div(&self, rhs: &Self) -> Result<Self, JetError>;
    fn apply(&self, f: Func) -> Result<Self, JetError>;
}

impl JetScalar for f64 {
    fn re(&self) -> f64 {
        *self
    }

    fn const_like(&self, c: f64) -> Self {
        c
    }

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }

    fn neg(&self) -> Self {
        -*self
    }

    fn add(&self, rhs: &Self) -> Result<Self, JetError> {
        Ok(self + rhs)
    }

    fn sub(&self, rhs: &Self) -> Result<Self, JetError> {
        Ok(self - rhs)
    }

    fn mul(&self, rhs: &Self) -> Result<Self, JetError> {
        Ok(self * rhs)
    }

    fn div(&self, rhs: &Self) -> Result<Self, JetError> {
        if *rhs == 0.0 {
            return Err(JetError::DivisionByZero);
        }
        Ok(self / rhs)
    }

    fn apply(&self, f: Func) -> Result<Self, JetError> {
        let v = *self;
        match f {
            Func::Sin => Ok(v.sin()),
            Func::Cos => Ok(v.cos()),
            Func::Tan => Ok(v.tan()),
            Func::Exp => Ok(v.exp()),
            Func::Ln => {
                if v <= 0.0 || !v.is_finite() {
                    Err(JetError::Domain { func: "ln", value: v })
                } else {
                    Ok(v.ln())
                }
            }
            Func::Sqrt => {
                if v < 0.0 || !v.is_finite() {
                    Err(JetError::Domain { func: "sqrt", value: v })
                } else {
                    Ok(v.sqrt())
                }
            }
            Func::Abs => Ok(v.abs()),
            Func::Recip => {
                if v == 0.0 {
                    Err(JetError::DivisionByZero)
                } else {
                    Ok(1.0 / v)
                }
            }
            Func::Pow(c) => {
                if v <= 0.0 || !v.is_finite() {
                    Err(JetError::Domain { func: "pow", value: v })
                } else {
                    Ok(v.powf(c))
                }
            }
        }
    }
}

/// Derivatives `d^k f / dv^k` for `k = 0..=order`, evaluated in the scalar
/// ring `T` (for nested jets the argument `v` is itself a jet).
fn univariate_derivs<T: JetScalar>(f: Func, v: &T, order: usize) -> Result<Vec<T>, JetError> {
    let one = v.const_like(1.0);
    let mut d = Vec::with_capacity(order + 1);
    match f {
        Func::Sin => {
            let s = v.apply(Func::Sin)?;
            let c = v.apply(Func::Cos)?;
            d.push(s.clone());
            if order >= 1 {
                d.push(c.clone());
            }
            if order >= 2 {
                d.push(s.neg());
            }
            if order >= 3 {
                d.push(c.neg());
            }
        }
        Func::Cos => {
            let s = v.apply(Func::Sin)?;
            let c = v.apply(Func::Cos)?;
            d.push(c.clone());
            if order >= 1 {
                d.push(s.neg());
            }
            if order >= 2 {
                d.push(c.neg());
            }
            if order >= 3 {
                d.push(s);
            }
        }
        Func::Tan => {
            let t = v.apply(Func::Tan)?;
            let t2 = t.mul(&t)?;
            let sec2 = one.add(&t2)?; // 1 + tan^2
            d.push(t.clone());
            if order >= 1 {
                d.push(sec2.clone());
            }
            if order >= 2 {
                d.push(t.mul(&sec2)?.mul(&v.const_like(2.0))?);
            }
            if order >= 3 {
                // (1 + t^2)(2 + 6 t^2)
                let inner = v.const_like(2.0).add(&t2.mul(&v.const_like(6.0))?)?;
                d.push(sec2.mul(&inner)?);
            }
        }
        Func::Exp => {
            let e = v.apply(Func::Exp)?;
            for _ in 0..=order {
                d.push(e.clone());
            }
        }
        Func::Ln => {
            if v.re() <= 0.0 || !v.re().is_finite() {
                return Err(JetError::Domain { func: "ln", value: v.re() });
            }
            d.push(v.apply(Func::Ln)?);
            if order >= 1 {
                d.push(one.div(v)?);
            }
            if order >= 2 {
                d.push(d[1].mul(&d[1])?.neg());
            }
            if order >= 3 {
                let cube = d[1].mul(&d[1])?.mul(&d[1])?;
                d.push(cube.mul(&v.const_like(2.0))?);
            }
        }
        Func::Sqrt => {
            let re = v.re();
            if re < 0.0 || !re.is_finite() || (re == 0.0 && order >= 1) {
                return Err(JetError::Domain { func: "sqrt", value: re });
            }
            d.push(v.apply(Func::Sqrt)?);
            if order >= 1 {
                d.push(v.const_like(0.5).div(&d[0])?);
            }
            if order >= 2 {
                d.push(d[1].mul(&v.const_like(-0.5))?.div(v)?);
            }
            if order >= 3 {
                d.push(d[2].mul(&v.const_like(-1.5))?.div(v)?);
            }
        }
        Func::Abs => {
            let re = v.re();
            if re == 0.0 && order >= 1 {
                return Err(JetError::Domain { func: "abs", value: 0.0 });
            }
            let sign = if re >= 0.0 { 1.0 } else { -1.0 };
            d.push(if re >= 0.0 { v.clone() } else { v.neg() });
            if order >= 1 {
                d.push(v.const_like(sign));
            }
            if order >= 2 {
                d.push(v.const_like(0.0));
            }
            if order >= 3 {
                d.push(v.const_like(0.0));
            }
        }
        Func::Recip => {
            if v.re() == 0.0 {
                return Err(JetError::DivisionByZero);
            }
            let r = one.div(v)?;
            d.push(r.clone());
            if order >= 1 {
                d.push(r.mul(&r)?.neg());
            }
            if order >= 2 {
                d.push(r.mul(&r)?.mul(&r)?.mul(&v.const_like(2.0))?);
            }
            if order >= 3 {
                let r2 = r.mul(&r)?;
                d.push(r2.mul(&r2)?.mul(&v.const_like(-6.0))?);
            }
        }
        Func::Pow(c) => {
            if v.re() <= 0.0 || !v.re().is_finite() {
                return Err(JetError::Domain { func: "pow", value: v.re() });
            }
            d.push(v.apply(Func::Pow(c))?);
            let mut factor = c;
            for _ in 1..=order {
                let prev = d.last().expect("nonempty").clone();
                d.push(prev.mul(&v.const_like(factor))?.div(v)?);
                factor -= 1.0;
            }
            d.truncate(order + 1);
        }
    }
    Ok(d)
}

fn hess_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn third_len(n: usize) -> usize {
    n * (n + 1) * (n + 2) / 6
}

/// Packed index of the symmetric pair `(i, j)` with `i <= j`.
fn hess_idx(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - (i * i - i) / 2 + (j - i)
}

/// Packed index of the sorted triple `(i, j, k)`.
fn third_idx(n: usize, i: usize, j: usize, k: usize) -> usize {
    let mut t = [i, j, k];
    t.sort_unstable();
    let [i, j, k] = t;
    let mut start = 0;
    for m in 0..i {
        let r = n - m;
        start += r * (r + 1) / 2;
    }
    start + hess_idx(n - i, j - i, k - i)
}

/// Truncated Taylor expansion of a scalar function at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet<T> {
    dim: usize,
    order: usize,
    value: T,
    grad: Vec<T>,
    hess: Vec<T>,
    third: Vec<T>,
}

/// The everyday jet with plain floating-point coefficients.
pub type Jet3 = Jet<f64>;

impl<T: JetScalar> Jet<T> {
    fn check_shape(dim: usize, order: usize) -> Result<(), JetError> {
        if order > MAX_ORDER {
            return Err(JetError::OrderTooHigh(order));
        }
        if dim == 0 {
            return Err(JetError::DimMismatch(0, 0));
        }
        Ok(())
    }

    /// Constant jet: all derivatives vanish.
    pub fn constant(dim: usize, order: usize, value: T) -> Result<Self, JetError> {
        Self::check_shape(dim, order)?;
        let zero = value.const_like(0.0);
        Ok(Jet {
            dim,
            order,
            grad: if order >= 1 { vec![zero.clone(); dim] } else { Vec::new() },
            hess: if order >= 2 { vec![zero.clone(); hess_len(dim)] } else { Vec::new() },
            third: if order >= 3 { vec![zero.clone(); third_len(dim)] } else { Vec::new() },
            value,
        })
    }

    /// Seed jet for the coordinate `index`: value `value`, unit gradient slot.
    pub fn seed(dim: usize, order: usize, index: usize, value: T) -> Result<Self, JetError> {
        if index >= dim {
            return Err(JetError::IndexOutOfRange { index, dim });
        }
        let mut jet = Self::constant(dim, order, value)?;
        if order >= 1 {
            jet.grad[index] = jet.value.const_like(1.0);
        }
        Ok(jet)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> &T {
        &self.value
    }

    pub fn grad(&self, i: usize) -> Result<&T, JetError> {
        if self.order < 1 {
            return Err(JetError::NoDerivative);
        }
        self.grad.get(i).ok_or(JetError::IndexOutOfRange { index: i, dim: self.dim })
    }

    pub fn hess(&self, i: usize, j: usize) -> Result<&T, JetError> {
        if self.order < 2 {
            return Err(JetError::NoDerivative);
        }
        if i >= self.dim || j >= self.dim {
            return Err(JetError::IndexOutOfRange { index: i.max(j), dim: self.dim });
        }
        Ok(&self.hess[hess_idx(self.dim, i, j)])
    }

    pub fn third(&self, i: usize, j: usize, k: usize) -> Result<&T, JetError> {
        if self.order < 3 {
            return Err(JetError::NoDerivative);
        }
        if i >= self.dim || j >= self.dim || k >= self.dim {
            return Err(JetError::IndexOutOfRange { index: i.max(j).max(k), dim: self.dim });
        }
        Ok(&self.third[third_idx(self.dim, i, j, k)])
    }

    fn match_with(&self, rhs: &Self) -> Result<(), JetError> {
        if self.dim != rhs.dim {
            return Err(JetError::DimMismatch(self.dim, rhs.dim));
        }
        if self.order != rhs.order {
            return Err(JetError::OrderMismatch(self.order, rhs.order));
        }
        Ok(())
    }

    /// Constant jet shaped like `self`.
    pub fn const_like_jet(&self, c: f64) -> Self {
        Jet::constant(self.dim, self.order, self.value.const_like(c)).expect("shape is valid")
    }

    pub fn add(&self, rhs: &Self) -> Result<Self, JetError> {
        self.match_with(rhs)?;
        let mut out = self.clone();
        out.value = out.value.add(&rhs.value)?;
        for (a, b) in out.grad.iter_mut().zip(&rhs.grad) {
            *a = a.add(b)?;
        }
        for (a, b) in out.hess.iter_mut().zip(&rhs.hess) {
            *a = a.add(b)?;
        }
        for (a, b) in out.third.iter_mut().zip(&rhs.third) {
            *a = a.add(b)?;
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self, JetError> {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        out.value = out.value.neg();
        for a in out.grad.iter_mut() {
            *a = a.neg();
        }
        for a in out.hess.iter_mut() {
            *a = a.neg();
        }
        for a in out.third.iter_mut() {
            *a = a.neg();
        }
        out
    }

    /// Multiply by a plain constant.
    pub fn scale(&self, c: f64) -> Self {
        let k = self.value.const_like(c);
        let mut out = self.clone();
        out.value = out.value.mul(&k).expect("constant multiply");
        for a in out.grad.iter_mut() {
            *a = a.mul(&k).expect("constant multiply");
        }
        for a in out.hess.iter_mut() {
            *a = a.mul(&k).expect("constant multiply");
        }
        for a in out.third.iter_mut() {
            *a = a.mul(&k).expect("constant multiply");
        }
        out
    }

    /// Leibniz product through third order.
    pub fn mul(&self, rhs: &Self) -> Result<Self, JetError> {
        self.match_with(rhs)?;
        let n = self.dim;
        let mut out = Jet::constant(n, self.order, self.value.mul(&rhs.value)?)?;
        if self.order >= 1 {
            for i in 0..n {
                out.grad[i] = self.grad[i]
                    .mul(&rhs.value)?
                    .add(&self.value.mul(&rhs.grad[i])?)?;
            }
        }
        if self.order >= 2 {
            for i in 0..n {
                for j in i..n {
                    let idx = hess_idx(n, i, j);
                    let mut s = self.hess[idx].mul(&rhs.value)?;
                    s = s.add(&self.value.mul(&rhs.hess[idx])?)?;
                    s = s.add(&self.grad[i].mul(&rhs.grad[j])?)?;
                    s = s.add(&self.grad[j].mul(&rhs.grad[i])?)?;
                    out.hess[idx] = s;
                }
            }
        }
        if self.order >= 3 {
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        let idx = third_idx(n, i, j, k);
                        let hij = hess_idx(n, i, j);
                        let hik = hess_idx(n, i, k);
                        let hjk = hess_idx(n, j, k);
                        let mut s = self.third[idx].mul(&rhs.value)?;
                        s = s.add(&self.value.mul(&rhs.third[idx])?)?;
                        s = s.add(&self.hess[hij].mul(&rhs.grad[k])?)?;
                        s = s.add(&self.hess[hik].mul(&rhs.grad[j])?)?;
                        s = s.add(&self.hess[hjk].mul(&rhs.grad[i])?)?;
                        s = s.add(&self.grad[k].mul(&rhs.hess[hij])?)?;
                        s = s.add(&self.grad[j].mul(&rhs.hess[hik])?)?;
                        s = s.add(&self.grad[i].mul(&rhs.hess[hjk])?)?;
                        out.third[idx] = s;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn div(&self, rhs: &Self) -> Result<Self, JetError> {
        self.match_with(rhs)?;
        self.mul(&rhs.apply(Func::Recip)?)
    }

    /// Lift a univariate elementary function through the jet (Faà di Bruno up
    /// to third order).
    pub fn apply(&self, f: Func) -> Result<Self, JetError> {
        let d = univariate_derivs(f, &self.value, self.order)?;
        let n = self.dim;
        let mut out = Jet::constant(n, self.order, d[0].clone())?;
        if self.order >= 1 {
            for i in 0..n {
                out.grad[i] = d[1].mul(&self.grad[i])?;
            }
        }
        if self.order >= 2 {
            for i in 0..n {
                for j in i..n {
                    let idx = hess_idx(n, i, j);
                    let t2 = d[2].mul(&self.grad[i])?.mul(&self.grad[j])?;
                    let t1 = d[1].mul(&self.hess[idx])?;
                    out.hess[idx] = t2.add(&t1)?;
                }
            }
        }
        if self.order >= 3 {
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        let idx = third_idx(n, i, j, k);
                        let hij = hess_idx(n, i, j);
                        let hik = hess_idx(n, i, k);
                        let hjk = hess_idx(n, j, k);
                        let t3 = d[3]
                            .mul(&self.grad[i])?
                            .mul(&self.grad[j])?
                            .mul(&self.grad[k])?;
                        let mut t2 = self.hess[hij].mul(&self.grad[k])?;
                        t2 = t2.add(&self.hess[hik].mul(&self.grad[j])?)?;
                        t2 = t2.add(&self.hess[hjk].mul(&self.grad[i])?)?;
                        t2 = d[2].mul(&t2)?;
                        let t1 = d[1].mul(&self.third[idx])?;
                        out.third[idx] = t3.add(&t2)?.add(&t1)?;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Integer power by repeated multiplication; valid for any base sign.
    pub fn powi(&self, k: i32) -> Result<Self, JetError> {
        if k == 0 {
            return Ok(self.const_like_jet(1.0));
        }
        let mut exp = k.unsigned_abs();
        let mut base = self.clone();
        let mut acc: Option<Self> = None;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul(&base)?,
                });
            }
            exp >>= 1;
            if exp > 0 {
                base = base.mul(&base)?;
            }
        }
        let pos = acc.expect("nonzero exponent");
        if k < 0 {
            pos.apply(Func::Recip)
        } else {
            Ok(pos)
        }
    }

    /// A copy truncated to a lower (or equal) order; used to match shapes
    /// after [`Jet::derivative`] has reduced one operand.
    pub fn truncated(&self, order: usize) -> Result<Self, JetError> {
        if order > self.order {
            return Err(JetError::OrderMismatch(self.order, order));
        }
        let mut out = self.clone();
        out.order = order;
        if order < 1 {
            out.grad.clear();
        }
        if order < 2 {
            out.hess.clear();
        }
        if order < 3 {
            out.third.clear();
        }
        Ok(out)
    }

    /// The jet of `∂f/∂q^i`, one order lower.
    pub fn derivative(&self, i: usize) -> Result<Self, JetError> {
        if self.order == 0 {
            return Err(JetError::NoDerivative);
        }
        if i >= self.dim {
            return Err(JetError::IndexOutOfRange { index: i, dim: self.dim });
        }
        let n = self.dim;
        let order = self.order - 1;
        let mut out = Jet::constant(n, order, self.grad[i].clone())?;
        if order >= 1 {
            for j in 0..n {
                out.grad[j] = self.hess[hess_idx(n, i, j)].clone();
            }
        }
        if order >= 2 {
            for j in 0..n {
                for k in j..n {
                    out.hess[hess_idx(n, j, k)] = self.third[third_idx(n, i, j, k)].clone();
                }
            }
        }
        Ok(out)
    }

    /// True when every coefficient is finite.
    pub fn all_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|c| c.is_finite())
            && self.hess.iter().all(|c| c.is_finite())
            && self.third.iter().all(|c| c.is_finite())
    }
}

impl<T: JetScalar> JetScalar for Jet<T> {
    fn re(&self) -> f64 {
        self.value.re()
    }

    fn const_like(&self, c: f64) -> Self {
        self.const_like_jet(c)
    }

    fn is_finite(&self) -> bool {
        self.all_finite()
    }

    fn neg(&self) -> Self {
        Jet::neg(self)
    }

    fn add(&self, rhs: &Self) -> Result<Self, JetError> {
        Jet::add(self, rhs)
    }

    fn sub(&self, rhs: &Self) -> Result<Self, JetError> {
        Jet::sub(self, rhs)
    }

    fn mul(&self, rhs: &Self) -> Result<Self, JetError> {
        Jet::mul(self, rhs)
    }

    fn div(&self, rhs: &Self) -> Result<Self, JetError> {
        Jet::div(self, rhs)
    }

    fn apply(&self, f: Func) -> Result<Self, JetError> {
        Jet::apply(self, f)
    }
}

/// Combine two jets with a binary operation (checked dimensions and orders).
pub fn combine<T: JetScalar>(a: &Jet<T>, b: &Jet<T>, op: BinOp) -> Result<Jet<T>, JetError> {
    match op {
        BinOp::Add => a.add(b),
        BinOp::Sub => a.sub(b),
        BinOp::Mul => a.mul(b),
        BinOp::Div => a.div(b),
    }
}

/// Seed jets for a full coordinate point.
pub fn seed_point<T: JetScalar>(point: &[T], order: usize) -> Result<Vec<Jet<T>>, JetError> {
    let n = point.len();
    point
        .iter()
        .enumerate()
        .map(|(i, v)| Jet::seed(n, order, i, v.clone()))
        .collect()
}
