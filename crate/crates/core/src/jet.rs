//! Truncated multivariate Taylor expansions in one or two variables.
//!
//! A [`Jet`] stores the Taylor coefficients `c_{(a,b)}` of a function at a
//! point up to total order `K`; the partial derivative `D^(a,b)` equals
//! `a! b! c_{(a,b)}`. Arithmetic propagates exact derivatives, which is how
//! derivative sup-norms of the test-function dictionary are tabulated.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    order: usize,
    c: Vec<f64>,
}

impl Jet {
    fn slot(order: usize, a: usize, b: usize) -> usize {
        a * (order + 1) + b
    }

    pub fn constant(order: usize, v: f64) -> Jet {
        let mut c = vec![0.0; (order + 1) * (order + 1)];
        c[0] = v;
        Jet { order, c }
    }

    /// The coordinate function `x_axis` expanded at `value`.
    pub fn variable(order: usize, axis: usize, value: f64) -> Jet {
        let mut j = Jet::constant(order, value);
        if order >= 1 {
            let s = if axis == 0 { Self::slot(order, 1, 0) } else { Self::slot(order, 0, 1) };
            j.c[s] = 1.0;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeff(&self, a: usize, b: usize) -> f64 {
        if a + b > self.order {
            0.0
        } else {
            self.c[Self::slot(self.order, a, b)]
        }
    }

    /// Partial derivative `d^a/dx^a d^b/dy^b` at the expansion point.
    pub fn derivative(&self, a: usize, b: usize) -> f64 {
        self.coeff(a, b) * factorial(a) * factorial(b)
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { order: self.order, c: self.c.iter().map(|v| v * s).collect() }
    }

    pub fn add_constant(&self, s: f64) -> Jet {
        let mut j = self.clone();
        j.c[0] += s;
        j
    }

    /// Nilpotent part: the jet with its constant term removed.
    fn tail(&self) -> Jet {
        let mut j = self.clone();
        j.c[0] = 0.0;
        j
    }

    /// `sum_k coeffs[k] * eps^k` for the nilpotent `eps`.
    fn series(&self, coeffs: &[f64]) -> Jet {
        let eps = self.tail();
        let mut out = Jet::constant(self.order, coeffs[0]);
        let mut power = Jet::constant(self.order, 1.0);
        for &ck in coeffs.iter().skip(1) {
            power = &power * &eps;
            out = &out + &power.scale(ck);
        }
        out
    }

    pub fn exp(&self) -> Jet {
        let e0 = self.value().exp();
        let mut coeffs = vec![e0; self.order + 1];
        for k in 1..=self.order {
            coeffs[k] = coeffs[k - 1] / k as f64;
        }
        self.series(&coeffs)
    }

    pub fn recip(&self) -> Jet {
        let v = self.value();
        let mut coeffs = vec![1.0 / v; self.order + 1];
        for k in 1..=self.order {
            coeffs[k] = -coeffs[k - 1] / v;
        }
        self.series(&coeffs)
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, o: &Jet) -> Jet {
        Jet { order: self.order, c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        Jet { order: self.order, c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        let k = self.order;
        let mut out = Jet::constant(k, 0.0);
        for a1 in 0..=k {
            for b1 in 0..=k - a1 {
                let x = self.c[Jet::slot(k, a1, b1)];
                if x == 0.0 {
                    continue;
                }
                for a2 in 0..=k - a1 - b1 {
                    for b2 in 0..=k - a1 - b1 - a2 {
                        out.c[Jet::slot(k, a1 + a2, b1 + b2)] += x * o.c[Jet::slot(k, a2, b2)];
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_of_linear_has_exponential_derivatives() {
        let x = Jet::variable(6, 0, 0.3);
        let e = x.scale(2.0).exp();
        for k in 0..=6 {
            let expect = 2f64.powi(k as i32) * (0.6f64).exp();
            assert!((e.derivative(k, 0) - expect).abs() < 1e-10 * expect);
        }
    }

    #[test]
    fn recip_matches_closed_form() {
        let x = Jet::variable(5, 0, 2.0);
        let r = x.recip();
        // d^k/dx^k 1/x = (-1)^k k! / x^{k+1}
        for k in 0..=5 {
            let expect = (-1f64).powi(k as i32) * factorial(k) / 2f64.powi(k as i32 + 1);
            assert!((r.derivative(k, 0) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_partials_of_product() {
        let x = Jet::variable(4, 0, 1.5);
        let y = Jet::variable(4, 1, -0.5);
        let f = &(&x * &x) * &y; // x^2 y
        assert!((f.derivative(2, 1) - 2.0).abs() < 1e-14);
        assert!((f.derivative(1, 1) - 3.0).abs() < 1e-14);
        assert!((f.derivative(1, 0) - 2.0 * 1.5 * -0.5).abs() < 1e-14);
        assert_eq!(f.derivative(3, 0), 0.0);
    }
}
