//! A small closed-form expression language.
//!
//! Metric components and auxiliary factors can be given as text like
//! `"(q1 - q2) * exp(a * q3)"`. Expressions are parsed once against a
//! [`Scope`] naming the coordinates and parameters, and evaluated to jets of
//! any order up to the cap, so all derivatives are exact.

use std::fmt;

use thiserror::Error;

use crate::jets::{Func, Jet, Jet3, JetError, JetScalar};

/// Names visible to the parser: coordinates (differentiated) and parameters
/// (plain constants supplied at evaluation time).
#[derive(Debug, Clone)]
pub struct Scope {
    coords: Vec<String>,
    params: Vec<String>,
}

const RESERVED: &[&str] = &["sin", "cos", "tan", "exp", "ln", "sqrt", "abs"];

impl Scope {
    pub fn new<S: Into<String>>(
        coords: impl IntoIterator<Item = S>,
        params: impl IntoIterator<Item = S>,
    ) -> Result<Self, ScopeError> {
        let coords: Vec<String> = coords.into_iter().map(Into::into).collect();
        let params: Vec<String> = params.into_iter().map(Into::into).collect();
        let mut seen: Vec<&str> = Vec::new();
        for name in coords.iter().chain(params.iter()) {
            if name.is_empty()
                || !name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            {
                return Err(ScopeError::BadName(name.clone()));
            }
            if RESERVED.contains(&name.as_str()) {
                return Err(ScopeError::Reserved(name.clone()));
            }
            if seen.contains(&name.as_str()) {
                return Err(ScopeError::Duplicate(name.clone()));
            }
            seen.push(name);
        }
        Ok(Scope { coords, params })
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    fn lookup(&self, name: &str) -> Option<Ident> {
        if let Some(i) = self.coords.iter().position(|c| c == name) {
            return Some(Ident::Coord(i));
        }
        self.params.iter().position(|p| p == name).map(Ident::Param)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScopeError {
    #[error("invalid identifier {0:?}")]
    BadName(String),
    #[error("identifier {0:?} is a reserved function name")]
    Reserved(String),
    #[error("duplicate identifier {0:?}")]
    Duplicate(String),
}

#[derive(Debug, Clone, Copy)]
enum Ident {
    Coord(usize),
    Param(usize),
}

/// Binary operators in the surface syntax.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Unary elementary functions in the surface syntax.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func1 {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
}

impl Func1 {
    fn name(self) -> &'static str {
        match self {
            Func1::Sin => "sin",
            Func1::Cos => "cos",
            Func1::Tan => "tan",
            Func1::Exp => "exp",
            Func1::Ln => "ln",
            Func1::Sqrt => "sqrt",
            Func1::Abs => "abs",
        }
    }

    fn jet_func(self) -> Func {
        match self {
            Func1::Sin => Func::Sin,
            Func1::Cos => Func::Cos,
            Func1::Tan => Func::Tan,
            Func1::Exp => Func::Exp,
            Func1::Ln => Func::Ln,
            Func1::Sqrt => Func::Sqrt,
            Func1::Abs => Func::Abs,
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func1::Sin,
            "cos" => Func1::Cos,
            "tan" => Func1::Tan,
            "exp" => Func1::Exp,
            "ln" => Func1::Ln,
            "sqrt" => Func1::Sqrt,
            "abs" => Func1::Abs,
            _ => return None,
        })
    }
}

/// Parsed expression tree.  Coordinates and parameters are stored by index
/// into the scope they were parsed against.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Coord(usize),
    Param(usize),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func1, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
}

/// Parse failure with a byte offset into the source string.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("parse error at byte {offset}: {kind}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unknown identifier {0:?}")]
    UnknownIdent(String),
    #[error("malformed number {0:?}")]
    BadNumber(String),
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("trailing input")]
    TrailingInput,
    #[error("exponent must not depend on a coordinate")]
    CoordInExponent,
}

/// Evaluation failure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("expression expects {want} coordinates, point has {got}")]
    PointLen { want: usize, got: usize },
    #[error("expression expects {want} parameters, got {got}")]
    ParamLen { want: usize, got: usize },
    #[error("exponent evaluated on a coordinate-dependent base that is not positive")]
    NonPositiveBase,
    #[error("expression produced a non-finite value")]
    NonFinite,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    scope: &'a Scope,
}

impl<'a> Parser<'a> {
    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError { offset: self.pos, kind }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8, what: &'static str) -> Result<(), ParseError> {
        match self.peek() {
            Some(got) if got == c => {
                self.pos += 1;
                Ok(())
            }
            Some(_) => Err(self.err(ParseErrorKind::Expected(what))),
            None => Err(self.err(ParseErrorKind::UnexpectedEnd)),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Binary(BinOp::Add, Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Binary(BinOp::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::Binary(BinOp::Mul, Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::Binary(BinOp::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp_start = {
                self.skip_ws();
                self.pos
            };
            let exp = self.unary()?;
            if exp.depends_on_coord() {
                return Err(ParseError { offset: exp_start, kind: ParseErrorKind::CoordInExponent });
            }
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.err(ParseErrorKind::UnexpectedEnd)),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(b')', "closing parenthesis")?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(c) => Err(self.err(ParseErrorKind::UnexpectedChar(c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E') && self.pos > start {
                self.pos += 1;
                if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        text.parse::<f64>().map(Expr::Num).map_err(|_| ParseError {
            offset: start,
            kind: ParseErrorKind::BadNumber(text.to_owned()),
        })
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        if let Some(f) = Func1::from_name(name) {
            self.expect(b'(', "opening parenthesis after function name")?;
            let arg = self.expr()?;
            self.expect(b')', "closing parenthesis")?;
            return Ok(Expr::Call(f, Box::new(arg)));
        }
        match self.scope.lookup(name) {
            Some(Ident::Coord(i)) => Ok(Expr::Coord(i)),
            Some(Ident::Param(i)) => Ok(Expr::Param(i)),
            None => Err(ParseError {
                offset: start,
                kind: ParseErrorKind::UnknownIdent(name.to_owned()),
            }),
        }
    }
}

impl Expr {
    /// Parse `src` against `scope`.
    pub fn parse(src: &str, scope: &Scope) -> Result<Expr, ParseError> {
        let mut p = Parser { src: src.as_bytes(), pos: 0, scope };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err(ParseErrorKind::TrailingInput));
        }
        Ok(e)
    }

    fn depends_on_coord(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Param(_) => false,
            Expr::Coord(_) => true,
            Expr::Neg(a) => a.depends_on_coord(),
            Expr::Binary(_, a, b) => a.depends_on_coord() || b.depends_on_coord(),
            Expr::Call(_, a) => a.depends_on_coord(),
            Expr::Pow(a, b) => a.depends_on_coord() || b.depends_on_coord(),
        }
    }

    /// Indices of coordinates the expression mentions.
    pub fn coords_used(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_coords(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_coords(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Num(_) | Expr::Param(_) => {}
            Expr::Coord(i) => out.push(*i),
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_coords(out),
            Expr::Binary(_, a, b) | Expr::Pow(a, b) => {
                a.collect_coords(out);
                b.collect_coords(out);
            }
        }
    }

    /// Evaluate a numeric subtree containing no coordinates.
    fn eval_const(&self, params: &[f64]) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Coord(_) => unreachable!("exponents may not contain coordinates"),
            Expr::Param(i) => params[*i],
            Expr::Neg(a) => -a.eval_const(params)?,
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval_const(params)?, b.eval_const(params)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::Jet(JetError::DivisionByZero));
                        }
                        a / b
                    }
                }
            }
            Expr::Call(f, a) => JetScalar::apply(&a.eval_const(params)?, f.jet_func())?,
            Expr::Pow(a, b) => {
                let (a, b) = (a.eval_const(params)?, b.eval_const(params)?);
                if b.fract() == 0.0 && b.abs() <= 2147483647.0 {
                    a.powi(b as i32)
                } else if a > 0.0 {
                    a.powf(b)
                } else {
                    return Err(EvalError::NonPositiveBase);
                }
            }
        })
    }

    /// Evaluate on pre-seeded coordinate jets; the generic scalar makes the
    /// same code serve plain and nested towers.
    pub(crate) fn eval_seeded<T: JetScalar>(
        &self,
        seeds: &[Jet<T>],
        params: &[f64],
    ) -> Result<Jet<T>, EvalError> {
        let proto = seeds.first().ok_or(EvalError::PointLen { want: 1, got: 0 })?;
        Ok(match self {
            Expr::Num(v) => proto.const_like(*v),
            Expr::Coord(i) => seeds
                .get(*i)
                .cloned()
                .ok_or(EvalError::PointLen { want: *i + 1, got: seeds.len() })?,
            Expr::Param(i) => proto.const_like(
                *params.get(*i).ok_or(EvalError::ParamLen { want: *i + 1, got: params.len() })?,
            ),
            Expr::Neg(a) => a.eval_seeded(seeds, params)?.neg(),
            Expr::Binary(op, a, b) => {
                let a = a.eval_seeded(seeds, params)?;
                let b = b.eval_seeded(seeds, params)?;
                match op {
                    BinOp::Add => a.add(&b)?,
                    BinOp::Sub => a.sub(&b)?,
                    BinOp::Mul => a.mul(&b)?,
                    BinOp::Div => a.div(&b)?,
                }
            }
            Expr::Call(f, a) => a.eval_seeded(seeds, params)?.apply(f.jet_func())?,
            Expr::Pow(base, exp) => {
                let c = exp.eval_const(params)?;
                let base = base.eval_seeded(seeds, params)?;
                if c.fract() == 0.0 && c.abs() <= 2147483647.0 {
                    base.powi(c as i32)?
                } else {
                    base.apply(Func::Pow(c))?
                }
            }
        })
    }

    /// Evaluate to a jet of the requested order at a plain point.
    pub fn eval_jet(&self, point: &[f64], params: &[f64], order: usize) -> Result<Jet3, EvalError> {
        let seeds = crate::jets::seed_point(point, order)?;
        let out = self.eval_seeded(&seeds, params)?;
        if !out.all_finite() {
            return Err(EvalError::NonFinite);
        }
        Ok(out)
    }

    /// Render with the scope's names; parses back to an equal tree.
    pub fn pretty(&self, scope: &Scope) -> String {
        let mut s = String::new();
        self.fmt_prec(scope, 0, &mut s).expect("string formatting");
        s
    }

    fn fmt_prec(&self, scope: &Scope, parent: u8, out: &mut String) -> fmt::Result {
        use fmt::Write;
        let prec = match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        };
        let parens = prec < parent;
        if parens {
            out.push('(');
        }
        match self {
            Expr::Num(v) => {
                if *v < 0.0 {
                    // Negative literals print through Neg-style parens.
                    write!(out, "({v})")?;
                } else {
                    write!(out, "{v}")?;
                }
            }
            Expr::Coord(i) => out.push_str(&scope.coords[*i]),
            Expr::Param(i) => out.push_str(&scope.params[*i]),
            Expr::Neg(a) => {
                out.push('-');
                a.fmt_prec(scope, 4, out)?;
            }
            Expr::Binary(op, a, b) => {
                let (sym, rp) = match op {
                    BinOp::Add => (" + ", 1),
                    BinOp::Sub => (" - ", 2),
                    BinOp::Mul => (" * ", 2),
                    BinOp::Div => (" / ", 3),
                };
                a.fmt_prec(scope, prec, out)?;
                out.push_str(sym);
                b.fmt_prec(scope, rp, out)?;
            }
            Expr::Call(f, a) => {
                out.push_str(f.name());
                out.push('(');
                a.fmt_prec(scope, 0, out)?;
                out.push(')');
            }
            Expr::Pow(a, b) => {
                a.fmt_prec(scope, 5, out)?;
                out.push('^');
                b.fmt_prec(scope, 5, out)?;
            }
        }
        if parens {
            out.push(')');
        }
        Ok(())
    }
}
