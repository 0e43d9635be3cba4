use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use crate::Real;

/// Value, gradient and Hessian of a scalar function of `N` variables.
///
/// Only the upper triangle of the Hessian is computed; the lower triangle is
/// a copy, so `hess[i][j] == hess[j][i]` holds bit for bit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2<T, const N: usize> {
    pub value: T,
    pub grad: [T; N],
    pub hess: [[T; N]; N],
}

/// Value and gradient of a scalar function of `N` variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet1<T, const N: usize> {
    pub value: T,
    pub grad: [T; N],
}

impl<T: Real, const N: usize> Default for Jet2<T, N> {
    fn default() -> Self {
        Self::constant(T::zero())
    }
}

impl<T: Real, const N: usize> Default for Jet1<T, N> {
    fn default() -> Self {
        Self::constant(T::zero())
    }
}

impl<T: Real, const N: usize> Jet2<T, N> {
    pub fn constant(c: T) -> Self {
        Self {
            value: c,
            grad: [T::zero(); N],
            hess: [[T::zero(); N]; N],
        }
    }

    /// The coordinate function `x_i` evaluated at `x_i = value`.
    pub fn variable(value: T, i: usize) -> Self {
        let mut j = Self::constant(value);
        j.grad[i] = T::one();
        j
    }

    /// All coordinate functions at the point `x`.
    pub fn variables(x: &[T; N]) -> [Self; N] {
        std::array::from_fn(|i| Self::variable(x[i], i))
    }

    /// Partial derivative in direction `k` as a first-order jet.
    pub fn derivative(&self, k: usize) -> Jet1<T, N> {
        Jet1 {
            value: self.grad[k],
            grad: self.hess[k],
        }
    }

    pub fn to_jet1(&self) -> Jet1<T, N> {
        Jet1 {
            value: self.value,
            grad: self.grad,
        }
    }

    /// Applies a scalar function given its value and first two derivatives at `self.value`.
    pub fn chain(&self, f0: T, f1: T, f2: T) -> Self {
        let mut out = Self::constant(f0);
        for i in 0..N {
            out.grad[i] = f1 * self.grad[i];
        }
        for i in 0..N {
            for j in i..N {
                let v = f1 * self.hess[i][j] + f2 * self.grad[i] * self.grad[j];
                out.hess[i][j] = v;
                out.hess[j][i] = v;
            }
        }
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Self {
        let a = self.value;
        self.chain(a.ln(), a.recip(), -(a * a).recip())
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn sqrt(&self) -> Self {
        let r = self.value.sqrt();
        let half = T::lit(0.5);
        self.chain(r, half / r, -half * half / (r * self.value))
    }

    pub fn recip(&self) -> Self {
        let a = self.value;
        let r = a.recip();
        self.chain(r, -r * r, T::lit(2.0) * r * r * r)
    }

    pub fn powi(&self, p: i32) -> Self {
        let a = self.value;
        let pf = T::from_i32(p).unwrap();
        let f1 = if p == 0 { T::zero() } else { pf * a.powi(p - 1) };
        let f2 = if p == 0 || p == 1 {
            T::zero()
        } else {
            pf * (pf - T::one()) * a.powi(p - 2)
        };
        self.chain(a.powi(p), f1, f2)
    }

    pub fn powf(&self, p: T) -> Self {
        if p == p.round() && p.abs() <= T::lit(1024.0) {
            return self.powi(p.to_i32().unwrap());
        }
        let a = self.value;
        self.chain(
            a.powf(p),
            p * a.powf(p - T::one()),
            p * (p - T::one()) * a.powf(p - T::lit(2.0)),
        )
    }

    pub fn scale(&self, c: T) -> Self {
        let mut out = *self;
        out.value = out.value * c;
        for i in 0..N {
            out.grad[i] = out.grad[i] * c;
            for j in 0..N {
                out.hess[i][j] = out.hess[i][j] * c;
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|g| g.is_finite())
            && self.hess.iter().flatten().all(|h| h.is_finite())
    }
}

impl<T: Real, const N: usize> Add for Jet2<T, N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<T: Real, const N: usize> AddAssign for Jet2<T, N> {
    fn add_assign(&mut self, rhs: Self) {
        self.value = self.value + rhs.value;
        for i in 0..N {
            self.grad[i] = self.grad[i] + rhs.grad[i];
            for j in 0..N {
                self.hess[i][j] = self.hess[i][j] + rhs.hess[i][j];
            }
        }
    }
}

impl<T: Real, const N: usize> Sub for Jet2<T, N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl<T: Real, const N: usize> SubAssign for Jet2<T, N> {
    fn sub_assign(&mut self, rhs: Self) {
        self.value = self.value - rhs.value;
        for i in 0..N {
            self.grad[i] = self.grad[i] - rhs.grad[i];
            for j in 0..N {
                self.hess[i][j] = self.hess[i][j] - rhs.hess[i][j];
            }
        }
    }
}

impl<T: Real, const N: usize> Neg for Jet2<T, N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Real, const N: usize> Mul for Jet2<T, N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (self, rhs);
        let mut out = Self::constant(a.value * b.value);
        for i in 0..N {
            out.grad[i] = a.value * b.grad[i] + b.value * a.grad[i];
        }
        for i in 0..N {
            for j in i..N {
                let v = a.value * b.hess[i][j] + b.value * a.hess[i][j] + a.grad[i] * b.grad[j] + a.grad[j] * b.grad[i];
                out.hess[i][j] = v;
                out.hess[j][i] = v;
            }
        }
        out
    }
}

impl<T: Real, const N: usize> Div for Jet2<T, N> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl<T: Real, const N: usize> Add<T> for Jet2<T, N> {
    type Output = Self;
    fn add(mut self, rhs: T) -> Self {
        self.value = self.value + rhs;
        self
    }
}

impl<T: Real, const N: usize> Sub<T> for Jet2<T, N> {
    type Output = Self;
    fn sub(mut self, rhs: T) -> Self {
        self.value = self.value - rhs;
        self
    }
}

impl<T: Real, const N: usize> Mul<T> for Jet2<T, N> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        self.scale(rhs)
    }
}

impl<T: Real, const N: usize> Div<T> for Jet2<T, N> {
    type Output = Self;
    fn div(self, rhs: T) -> Self {
        self.scale(rhs.recip())
    }
}

impl<T: Real, const N: usize> Jet1<T, N> {
    pub fn constant(c: T) -> Self {
        Self {
            value: c,
            grad: [T::zero(); N],
        }
    }

    pub fn variable(value: T, i: usize) -> Self {
        let mut j = Self::constant(value);
        j.grad[i] = T::one();
        j
    }

    pub fn chain(&self, f0: T, f1: T) -> Self {
        Self {
            value: f0,
            grad: std::array::from_fn(|i| f1 * self.grad[i]),
        }
    }

    pub fn recip(&self) -> Self {
        let r = self.value.recip();
        self.chain(r, -r * r)
    }

    pub fn sqrt(&self) -> Self {
        let r = self.value.sqrt();
        self.chain(r, T::lit(0.5) / r)
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }

    pub fn ln(&self) -> Self {
        self.chain(self.value.ln(), self.value.recip())
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s)
    }

    pub fn powf(&self, p: T) -> Self {
        let a = self.value;
        if p == T::zero() {
            return Self::constant(T::one());
        }
        if p == p.round() && p.abs() <= T::lit(1024.0) {
            let k = p.to_i32().unwrap();
            return self.chain(a.powi(k), p * a.powi(k - 1));
        }
        self.chain(a.powf(p), p * a.powf(p - T::one()))
    }

    pub fn scale(&self, c: T) -> Self {
        Self {
            value: self.value * c,
            grad: std::array::from_fn(|i| self.grad[i] * c),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.grad.iter().all(|g| g.is_finite())
    }
}

impl<T: Real, const N: usize> Add for Jet1<T, N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            value: self.value + rhs.value,
            grad: std::array::from_fn(|i| self.grad[i] + rhs.grad[i]),
        }
    }
}

impl<T: Real, const N: usize> AddAssign for Jet1<T, N> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<T: Real, const N: usize> Sub for Jet1<T, N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self {
            value: self.value - rhs.value,
            grad: std::array::from_fn(|i| self.grad[i] - rhs.grad[i]),
        }
    }
}

impl<T: Real, const N: usize> SubAssign for Jet1<T, N> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<T: Real, const N: usize> Neg for Jet1<T, N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Real, const N: usize> Mul for Jet1<T, N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self {
            value: self.value * rhs.value,
            grad: std::array::from_fn(|i| self.value * rhs.grad[i] + rhs.value * self.grad[i]),
        }
    }
}

impl<T: Real, const N: usize> Div for Jet1<T, N> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl<T: Real, const N: usize> Add<T> for Jet1<T, N> {
    type Output = Self;
    fn add(mut self, rhs: T) -> Self {
        self.value = self.value + rhs;
        self
    }
}

impl<T: Real, const N: usize> Mul<T> for Jet1<T, N> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        self.scale(rhs)
    }
}

impl<T: Real, const N: usize> Div<T> for Jet1<T, N> {
    type Output = Self;
    fn div(self, rhs: T) -> Self {
        self.scale(rhs.recip())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type J = Jet2<f64, 2>;

    #[test]
    fn product_rule_bilinear() {
        let [x, y] = J::variables(&[2.0, 3.0]);
        let p = x * y;
        assert_eq!(p.value, 6.0);
        assert_eq!(p.grad, [3.0, 2.0]);
        assert_eq!(p.hess, [[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn quotient_matches_closed_form() {
        let [x, y] = J::variables(&[1.5, 0.5]);
        let q = x / y;
        // d/dy (x/y) = -x/y², d²/dy² = 2x/y³
        assert!((q.grad[1] + 1.5 / 0.25).abs() < 1e-12);
        assert!((q.hess[1][1] - 2.0 * 1.5 / 0.125).abs() < 1e-12);
        assert!((q.hess[0][1] + 1.0 / 0.25).abs() < 1e-12);
    }

    #[test]
    fn powi_at_zero_is_finite() {
        let [x, _] = J::variables(&[0.0, 1.0]);
        let p = x.powi(1);
        assert!(p.is_finite());
        let p = x.powi(2);
        assert_eq!(p.hess[0][0], 2.0);
    }

    #[test]
    fn derivative_projects_to_jet1() {
        let [x, y] = J::variables(&[0.3, -0.7]);
        let f = (x * y).sin();
        let d0 = f.derivative(0);
        assert_eq!(d0.value, f.grad[0]);
        assert_eq!(d0.grad, f.hess[0]);
    }

    #[test]
    fn jet1_agrees_with_jet2() {
        let x2 = Jet2::<f64, 3>::variables(&[0.4, 1.2, 0.9]);
        let x1: [Jet1<f64, 3>; 3] = std::array::from_fn(|i| x2[i].to_jet1());
        let f2 = (x2[0] * x2[1]).exp() / x2[2].sqrt() + x2[1].ln().cos();
        let f1 = (x1[0] * x1[1]).exp() / x1[2].sqrt() + x1[1].ln().cos();
        assert!((f1.value - f2.value).abs() < 1e-14);
        for i in 0..3 {
            assert!((f1.grad[i] - f2.grad[i]).abs() < 1e-13);
        }
    }
}
