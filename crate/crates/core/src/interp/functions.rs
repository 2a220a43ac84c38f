//! Test functions with analytic mixed partial derivatives.

use std::f64::consts::PI;

/// A function on `R^d` with exact partial derivatives `∂^α v`.
pub trait SmoothFunction: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64], alpha: &[usize]) -> f64;

    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x, &vec![0; self.dim()])
    }
}

/// Wraps a closure `(x, alpha) -> ∂^α v(x)`.
pub struct FnFunction<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &[usize]) -> f64 + Sync> FnFunction<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnFunction { dim, f }
    }
}

impl<F: Fn(&[f64], &[usize]) -> f64 + Sync> SmoothFunction for FnFunction<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], alpha: &[usize]) -> f64 {
        (self.f)(x, alpha)
    }
}

/// `Π sin(ω x_k)`.
#[derive(Debug, Clone, Copy)]
pub struct SinProduct {
    pub dim: usize,
    pub omega: f64,
}

impl SinProduct {
    pub fn new(dim: usize) -> Self {
        SinProduct { dim, omega: PI }
    }
}

impl SmoothFunction for SinProduct {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], alpha: &[usize]) -> f64 {
        x.iter()
            .zip(alpha)
            .map(|(&t, &s)| {
                let w = self.omega;
                let phase = (s % 4) as f64 * PI / 2.0;
                w.powi(s as i32) * (w * t + phase).sin()
            })
            .product()
    }
}

/// `exp(Σ x_k)`.
#[derive(Debug, Clone, Copy)]
pub struct ExpSum {
    pub dim: usize,
}

impl SmoothFunction for ExpSum {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], _alpha: &[usize]) -> f64 {
        x.iter().sum::<f64>().exp()
    }
}

/// `Π |x_k - c|^p`: `H^t` for `t < p + 1/2` near `x_k = c`.
#[derive(Debug, Clone, Copy)]
pub struct KinkPower {
    pub dim: usize,
    pub center: f64,
    pub power: f64,
}

impl KinkPower {
    fn factor(&self, t: f64, s: usize) -> f64 {
        let r = t - self.center;
        let mut c = 1.0;
        for i in 0..s {
            c *= self.power - i as f64;
        }
        let sign = if r < 0.0 && s % 2 == 1 { -1.0 } else { 1.0 };
        sign * c * r.abs().powf(self.power - s as f64)
    }
}

impl SmoothFunction for KinkPower {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], alpha: &[usize]) -> f64 {
        x.iter().zip(alpha).map(|(&t, &s)| self.factor(t, s)).product()
    }
}

/// A sum of monomials `c · Π x_k^{p_k}`.
#[derive(Debug, Clone)]
pub struct Polynomial {
    pub dim: usize,
    pub terms: Vec<(f64, Vec<u32>)>,
}

fn monomial_deriv(t: f64, p: u32, s: usize) -> f64 {
    if s as u32 > p {
        return 0.0;
    }
    let mut c = 1.0;
    for i in 0..s as u32 {
        c *= (p - i) as f64;
    }
    c * t.powi((p - s as u32) as i32)
}

impl SmoothFunction for Polynomial {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], alpha: &[usize]) -> f64 {
        self.terms
            .iter()
            .map(|(c, pw)| {
                c * x.iter().zip(pw).zip(alpha).map(|((&t, &p), &s)| monomial_deriv(t, p, s)).product::<f64>()
            })
            .sum()
    }
}
