//! Closed-form scalar expressions in the coordinates `x1 … xn`.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := base ('^' exponent)?
//! base   := number | var | func '(' expr ')' | '(' expr ')' | '-' factor
//! var    := 'x' digit+
//! func   := 'exp' | 'log' | 'sin' | 'cos' | 'sqrt'
//! ```
//!
//! The exponent is a number, a signed number, or a parenthesized expression
//! without variables. Evaluation with [`Jet2`] yields exact first and second
//! partial derivatives.

mod jet;
mod parse;

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub use jet::{Jet1, Jet2};
pub use parse::parse;

use crate::{point_f64, Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// Expression tree. `Var(i)` is the 0-based coordinate, printed as `x{i+1}`.
#[derive(Clone, Debug, PartialEq)]
pub enum Expression {
    Const(f64),
    Var(usize),
    Neg(Box<Expression>),
    Add(Box<Expression>, Box<Expression>),
    Sub(Box<Expression>, Box<Expression>),
    Mul(Box<Expression>, Box<Expression>),
    Div(Box<Expression>, Box<Expression>),
    Pow(Box<Expression>, f64),
    Func(Func, Box<Expression>),
}

/// Scalar types an [`Expression`] can be evaluated in.
pub trait EvalScalar<T: Real>:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn from_const(c: T) -> Self;
    fn primal(&self) -> T;
    fn exp_(self) -> Self;
    fn ln_(self) -> Self;
    fn sin_(self) -> Self;
    fn cos_(self) -> Self;
    fn sqrt_(self) -> Self;
    fn powf_(self, p: T) -> Self;
}

impl<T: Real> EvalScalar<T> for T {
    fn from_const(c: T) -> Self {
        c
    }
    fn primal(&self) -> T {
        *self
    }
    fn exp_(self) -> Self {
        self.exp()
    }
    fn ln_(self) -> Self {
        self.ln()
    }
    fn sin_(self) -> Self {
        self.sin()
    }
    fn cos_(self) -> Self {
        self.cos()
    }
    fn sqrt_(self) -> Self {
        self.sqrt()
    }
    fn powf_(self, p: T) -> Self {
        if p == p.round() && p.abs() <= T::lit(1024.0) {
            self.powi(p.to_i32().unwrap())
        } else {
            self.powf(p)
        }
    }
}

impl<T: Real, const N: usize> EvalScalar<T> for Jet2<T, N> {
    fn from_const(c: T) -> Self {
        Jet2::constant(c)
    }
    fn primal(&self) -> T {
        self.value
    }
    fn exp_(self) -> Self {
        self.exp()
    }
    fn ln_(self) -> Self {
        self.ln()
    }
    fn sin_(self) -> Self {
        self.sin()
    }
    fn cos_(self) -> Self {
        self.cos()
    }
    fn sqrt_(self) -> Self {
        self.sqrt()
    }
    fn powf_(self, p: T) -> Self {
        self.powf(p)
    }
}

impl<T: Real, const N: usize> EvalScalar<T> for Jet1<T, N> {
    fn from_const(c: T) -> Self {
        Jet1::constant(c)
    }
    fn primal(&self) -> T {
        self.value
    }
    fn exp_(self) -> Self {
        self.exp()
    }
    fn ln_(self) -> Self {
        self.ln()
    }
    fn sin_(self) -> Self {
        self.sin()
    }
    fn cos_(self) -> Self {
        self.cos()
    }
    fn sqrt_(self) -> Self {
        self.sqrt()
    }
    fn powf_(self, p: T) -> Self {
        self.powf(p)
    }
}

fn is_small_int(p: f64) -> bool {
    p == p.round() && p.abs() <= 1024.0
}

impl Expression {
    pub fn constant(c: f64) -> Self {
        Expression::Const(c)
    }

    /// Coordinate `x{i+1}`.
    pub fn var(i: usize) -> Self {
        Expression::Var(i)
    }

    pub fn func(f: Func, a: Expression) -> Self {
        Expression::Func(f, Box::new(a))
    }

    pub fn pow(a: Expression, p: f64) -> Self {
        Expression::Pow(Box::new(a), p)
    }

    /// Largest variable index used plus one (0 for constant expressions).
    pub fn arity(&self) -> usize {
        match self {
            Expression::Const(_) => 0,
            Expression::Var(i) => i + 1,
            Expression::Neg(a) | Expression::Pow(a, _) | Expression::Func(_, a) => a.arity(),
            Expression::Add(a, b) | Expression::Sub(a, b) | Expression::Mul(a, b) | Expression::Div(a, b) => {
                a.arity().max(b.arity())
            }
        }
    }

    pub fn uses_var(&self, k: usize) -> bool {
        match self {
            Expression::Const(_) => false,
            Expression::Var(i) => *i == k,
            Expression::Neg(a) | Expression::Pow(a, _) | Expression::Func(_, a) => a.uses_var(k),
            Expression::Add(a, b) | Expression::Sub(a, b) | Expression::Mul(a, b) | Expression::Div(a, b) => {
                a.uses_var(k) || b.uses_var(k)
            }
        }
    }

    /// True if the tree is the literal constant 0 (no evaluation).
    pub fn is_zero_const(&self) -> bool {
        matches!(self, Expression::Const(c) if *c == 0.0)
    }

    /// Evaluates in any [`EvalScalar`]; `vars[i]` is the value of `x{i+1}`.
    /// `point` is only used for error payloads.
    pub fn eval_with<T: Real, S: EvalScalar<T>>(&self, vars: &[S], point: &[T]) -> Result<S> {
        let domain = |what: &str| Error::Domain {
            what: what.to_string(),
            point: point_f64(point),
        };
        Ok(match self {
            Expression::Const(c) => S::from_const(T::lit(*c)),
            Expression::Var(i) => *vars.get(*i).ok_or_else(|| {
                Error::InvalidInput(format!("variable x{} used with only {} coordinates", i + 1, vars.len()))
            })?,
            Expression::Neg(a) => -a.eval_with(vars, point)?,
            Expression::Add(a, b) => a.eval_with(vars, point)? + b.eval_with(vars, point)?,
            Expression::Sub(a, b) => a.eval_with(vars, point)? - b.eval_with(vars, point)?,
            Expression::Mul(a, b) => a.eval_with(vars, point)? * b.eval_with(vars, point)?,
            Expression::Div(a, b) => {
                let den = b.eval_with(vars, point)?;
                if den.primal() == T::zero() {
                    return Err(domain("division by zero"));
                }
                a.eval_with(vars, point)? / den
            }
            Expression::Pow(a, p) => {
                let base = a.eval_with(vars, point)?;
                let bv = base.primal();
                if is_small_int(*p) {
                    if *p < 0.0 && bv == T::zero() {
                        return Err(domain("zero raised to a negative power"));
                    }
                } else if bv <= T::zero() {
                    return Err(domain("non-integer power of a nonpositive base"));
                }
                base.powf_(T::lit(*p))
            }
            Expression::Func(f, a) => {
                let arg = a.eval_with(vars, point)?;
                let av = arg.primal();
                match f {
                    Func::Exp => arg.exp_(),
                    Func::Log => {
                        if av <= T::zero() {
                            return Err(domain("log of a nonpositive argument"));
                        }
                        arg.ln_()
                    }
                    Func::Sin => arg.sin_(),
                    Func::Cos => arg.cos_(),
                    Func::Sqrt => {
                        if av <= T::zero() {
                            return Err(domain("sqrt of a nonpositive argument"));
                        }
                        arg.sqrt_()
                    }
                }
            }
        })
    }

    /// Plain value at `x`.
    pub fn eval<T: Real>(&self, x: &[T]) -> Result<T> {
        let v = self.eval_with::<T, T>(x, x)?;
        if !v.is_finite() {
            return Err(Error::Domain {
                what: "non-finite value".into(),
                point: point_f64(x),
            });
        }
        Ok(v)
    }

    /// Value, gradient and Hessian at `x`.
    pub fn eval_jet2<T: Real, const N: usize>(&self, x: &[T; N]) -> Result<Jet2<T, N>> {
        let vars = Jet2::variables(x);
        let j = self.eval_with::<T, Jet2<T, N>>(&vars, x)?;
        if !j.is_finite() {
            return Err(Error::Domain {
                what: "non-finite value or derivative".into(),
                point: point_f64(x),
            });
        }
        Ok(j)
    }

    /// Value and gradient at `x`.
    pub fn eval_jet1<T: Real, const N: usize>(&self, x: &[T; N]) -> Result<Jet1<T, N>> {
        let vars: [Jet1<T, N>; N] = std::array::from_fn(|i| Jet1::variable(x[i], i));
        let j = self.eval_with::<T, Jet1<T, N>>(&vars, x)?;
        if !j.is_finite() {
            return Err(Error::Domain {
                what: "non-finite value or derivative".into(),
                point: point_f64(x),
            });
        }
        Ok(j)
    }

    /// Symbolic partial derivative with respect to `x{k+1}`.
    ///
    /// Only trivial zero/one folding is applied.
    pub fn derivative(&self, k: usize) -> Expression {
        use Expression as E;
        match self {
            E::Const(_) => E::Const(0.0),
            E::Var(i) => E::Const(if *i == k { 1.0 } else { 0.0 }),
            E::Neg(a) => neg(a.derivative(k)),
            E::Add(a, b) => add(a.derivative(k), b.derivative(k)),
            E::Sub(a, b) => sub(a.derivative(k), b.derivative(k)),
            E::Mul(a, b) => add(mul(a.derivative(k), (**b).clone()), mul((**a).clone(), b.derivative(k))),
            E::Div(a, b) => {
                let num = sub(mul(a.derivative(k), (**b).clone()), mul((**a).clone(), b.derivative(k)));
                div(num, E::pow((**b).clone(), 2.0))
            }
            E::Pow(a, p) => {
                let da = a.derivative(k);
                if *p == 0.0 {
                    E::Const(0.0)
                } else if *p == 1.0 {
                    da
                } else if *p == 2.0 {
                    mul(mul(E::Const(2.0), (**a).clone()), da)
                } else {
                    mul(mul(E::Const(*p), E::pow((**a).clone(), p - 1.0)), da)
                }
            }
            E::Func(f, a) => {
                let da = a.derivative(k);
                let outer = match f {
                    Func::Exp => self.clone(),
                    Func::Log => return div(da, (**a).clone()),
                    Func::Sin => E::func(Func::Cos, (**a).clone()),
                    Func::Cos => neg(E::func(Func::Sin, (**a).clone())),
                    Func::Sqrt => return div(da, mul(E::Const(2.0), self.clone())),
                };
                mul(outer, da)
            }
        }
    }
}

fn neg(a: Expression) -> Expression {
    match a {
        Expression::Const(c) => Expression::Const(-c),
        a => Expression::Neg(Box::new(a)),
    }
}

fn add(a: Expression, b: Expression) -> Expression {
    if a.is_zero_const() {
        b
    } else if b.is_zero_const() {
        a
    } else {
        Expression::Add(Box::new(a), Box::new(b))
    }
}

fn sub(a: Expression, b: Expression) -> Expression {
    if b.is_zero_const() {
        a
    } else if a.is_zero_const() {
        neg(b)
    } else {
        Expression::Sub(Box::new(a), Box::new(b))
    }
}

fn mul(a: Expression, b: Expression) -> Expression {
    if a.is_zero_const() || b.is_zero_const() {
        Expression::Const(0.0)
    } else if matches!(a, Expression::Const(c) if c == 1.0) {
        b
    } else if matches!(b, Expression::Const(c) if c == 1.0) {
        a
    } else {
        Expression::Mul(Box::new(a), Box::new(b))
    }
}

fn div(a: Expression, b: Expression) -> Expression {
    if a.is_zero_const() {
        Expression::Const(0.0)
    } else {
        Expression::Div(Box::new(a), Box::new(b))
    }
}

impl Add for Expression {
    type Output = Expression;
    fn add(self, rhs: Self) -> Self {
        add(self, rhs)
    }
}

impl Sub for Expression {
    type Output = Expression;
    fn sub(self, rhs: Self) -> Self {
        sub(self, rhs)
    }
}

impl Mul for Expression {
    type Output = Expression;
    fn mul(self, rhs: Self) -> Self {
        mul(self, rhs)
    }
}

impl Div for Expression {
    type Output = Expression;
    fn div(self, rhs: Self) -> Self {
        Expression::Div(Box::new(self), Box::new(rhs))
    }
}

impl Neg for Expression {
    type Output = Expression;
    fn neg(self) -> Self {
        Expression::Neg(Box::new(self))
    }
}

/// Fully parenthesized; `parse(&e.to_string(), n)` reproduces `e` exactly.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Const(c) => {
                if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) {
                    write!(f, "(-{:?})", -c)
                } else {
                    write!(f, "{c:?}")
                }
            }
            Expression::Var(i) => write!(f, "x{}", i + 1),
            Expression::Neg(a) => write!(f, "(-{a})"),
            Expression::Add(a, b) => write!(f, "({a} + {b})"),
            Expression::Sub(a, b) => write!(f, "({a} - {b})"),
            Expression::Mul(a, b) => write!(f, "({a} * {b})"),
            Expression::Div(a, b) => write!(f, "({a} / {b})"),
            Expression::Pow(a, p) => write!(f, "({a}^{p:?})"),
            Expression::Func(g, a) => write!(f, "{}({a})", g.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_is_parenthesized() {
        let e = parse("1/(x1^2) - 3*x2", 2).unwrap();
        assert_eq!(e.to_string(), "((1.0 / (x1^2.0)) - (3.0 * x2))");
    }

    #[test]
    fn symbolic_derivative_matches_jet() {
        let e = parse("exp(x1*x2) / sqrt(x1) + log(x2)^3 - cos(x1)^-2", 2).unwrap();
        let x = [0.7f64, 1.9];
        let j = e.eval_jet2(&x).unwrap();
        for k in 0..2 {
            let d = e.derivative(k).eval(&x).unwrap();
            assert!((d - j.grad[k]).abs() < 1e-12 * (1.0 + d.abs()));
        }
        let d01 = e.derivative(0).derivative(1).eval(&x).unwrap();
        assert!((d01 - j.hess[0][1]).abs() < 1e-11 * (1.0 + d01.abs()));
    }

    #[test]
    fn domain_errors_carry_the_point() {
        let e = parse("log(x1)", 2).unwrap();
        match e.eval(&[-1.0, 2.0]) {
            Err(Error::Domain { point, .. }) => assert_eq!(point, vec![-1.0, 2.0]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse("1/(x1-x2)", 2).unwrap().eval(&[1.0, 1.0]).is_err());
        assert!(parse("sqrt(x1)", 1).unwrap().eval(&[0.0]).is_err());
        assert!(parse("x1^0.5", 1).unwrap().eval(&[-1.0]).is_err());
        assert_eq!(parse("x1^3", 1).unwrap().eval(&[-2.0]).unwrap(), -8.0);
    }

    #[test]
    fn f32_evaluation() {
        let e = parse("x1*x2 + 1", 2).unwrap();
        let j = e.eval_jet2(&[2.0f32, 3.0]).unwrap();
        assert_eq!(j.value, 7.0f32);
        assert_eq!(j.grad, [3.0f32, 2.0]);
    }
}
