//! Classical and generalized Jacobi polynomials, Legendre recurrences and
//! Gauss–Legendre quadrature.
//!
//! Jacobi polynomials use the standard normalization
//! `P_n^{(a,b)}(1) = binom(n + a, n)`, for which
//!
//! ```text
//! ∫ P_i P_j (1-x)^a (1+x)^b dx = γ_j δ_ij,
//! γ_j = 2^{a+b+1} Γ(j+a+1) Γ(j+b+1) / ((2j+a+b+1) j! Γ(j+a+b+1)).
//! ```
//!
//! The generalized Jacobi polynomials used as bubbles are
//! `J_j^{-m,-m}(x) = (1 - x²)^m P_{j-2m}^{(m,m)}(x)` for `j >= 2m`.

use crate::error::{Result, SemError};

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of points `Q`; the rule is exact through degree `2Q - 1`.
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Jacobi indices. Classical evaluation requires `alpha, beta > -1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiParams {
    pub alpha: f64,
    pub beta: f64,
}

impl JacobiParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = JacobiParams { alpha, beta };
        p.check_classical()?;
        Ok(p)
    }

    /// The symmetric pair `alpha = beta = m` carried by `J^{-m,-m}`.
    pub fn symmetric(m: usize) -> Self {
        JacobiParams { alpha: m as f64, beta: m as f64 }
    }

    fn check_classical(&self) -> Result<()> {
        if self.alpha > -1.0 && self.beta > -1.0 {
            Ok(())
        } else {
            Err(SemError::JacobiParams { alpha: self.alpha, beta: self.beta })
        }
    }
}

/// A polynomial stored by its Legendre coefficients `c_0..c_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyInLegendre {
    coeffs: Vec<f64>,
}

impl PolyInLegendre {
    pub fn new(coeffs: Vec<f64>) -> Self {
        PolyInLegendre { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Index of the last nonzero coefficient (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_deriv(x, 0)
    }

    pub fn eval_deriv(&self, x: f64, k: usize) -> f64 {
        if self.coeffs.is_empty() {
            return 0.0;
        }
        let table = legendre_table(self.coeffs.len() - 1, x, k);
        self.coeffs.iter().zip(&table[k]).map(|(c, l)| c * l).sum()
    }

    /// All derivatives `0..=kmax` at `x`.
    pub fn eval_all(&self, x: f64, kmax: usize) -> Vec<f64> {
        if self.coeffs.is_empty() {
            return vec![0.0; kmax + 1];
        }
        let table = legendre_table(self.coeffs.len() - 1, x, kmax);
        table.iter().map(|row| self.coeffs.iter().zip(row).map(|(c, l)| c * l).sum()).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        PolyInLegendre::new(self.coeffs.iter().map(|c| c * s).collect())
    }
}

/// `table[k][l] = d^k L_l / dx^k (x)` for `l <= nmax`, `k <= kmax`.
///
/// Uses the differentiated three-term recurrence
/// `(l+1) L_{l+1}^{(k)} = (2l+1) (x L_l^{(k)} + k L_l^{(k-1)}) - l L_{l-1}^{(k)}`.
pub fn legendre_table(nmax: usize, x: f64, kmax: usize) -> Vec<Vec<f64>> {
    let mut t = vec![vec![0.0; nmax + 1]; kmax + 1];
    for k in 0..=kmax {
        if k == 0 {
            t[0][0] = 1.0;
        }
        for l in 0..nmax {
            let lf = l as f64;
            let lower = if k > 0 { t[k - 1][l] } else { 0.0 };
            let prev = if l > 0 { t[k][l - 1] } else { 0.0 };
            t[k][l + 1] = ((2.0 * lf + 1.0) * (x * t[k][l] + k as f64 * lower) - lf * prev) / (lf + 1.0);
        }
    }
    t
}

/// `d^k L_n / dx^k (x)`.
pub fn legendre_eval(n: usize, x: f64, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    legendre_table(n, x, k)[k][n]
}

fn jacobi_value(alpha: f64, beta: f64, n: usize, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let ab = alpha + beta;
    let mut p0 = 1.0;
    let mut p1 = (alpha + 1.0) + (ab + 2.0) * (x - 1.0) / 2.0;
    for k in 2..=n {
        let kf = k as f64;
        let c = 2.0 * kf + ab;
        let a1 = 2.0 * kf * (kf + ab) * (c - 2.0);
        let a2 = (c - 1.0) * (alpha * alpha - beta * beta);
        let a3 = (c - 2.0) * (c - 1.0) * c;
        let a4 = 2.0 * (kf + alpha - 1.0) * (kf + beta - 1.0) * c;
        let p2 = ((a2 + a3 * x) * p1 - a4 * p0) / a1;
        p0 = p1;
        p1 = p2;
    }
    p1
}

fn jacobi_unchecked(alpha: f64, beta: f64, n: usize, x: f64, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    // d^k P_n^{(a,b)} = prod_{i=1..k} (n+a+b+i)/2 * P_{n-k}^{(a+k,b+k)}
    let scale: f64 = (1..=k).map(|i| (n as f64 + alpha + beta + i as f64) / 2.0).product();
    scale * jacobi_value(alpha + k as f64, beta + k as f64, n - k, x)
}

/// `d^k P_n^{(alpha,beta)} / dx^k (x)` for classical indices.
pub fn jacobi_eval(p: JacobiParams, n: usize, x: f64, k: usize) -> Result<f64> {
    p.check_classical()?;
    Ok(jacobi_unchecked(p.alpha, p.beta, n, x, k))
}

/// The orthogonality constant `γ_j^{alpha,beta}`.
pub fn gamma_norm(p: JacobiParams, j: usize) -> Result<f64> {
    p.check_classical()?;
    let (a, b) = (p.alpha, p.beta);
    let jf = j as f64;
    let log2 = std::f64::consts::LN_2;
    let value = if j == 0 {
        // (2j+a+b+1) Γ(j+a+b+1) collapses to Γ(a+b+2) at j = 0.
        ((a + b + 1.0) * log2 + libm::lgamma(a + 1.0) + libm::lgamma(b + 1.0) - libm::lgamma(a + b + 2.0)).exp()
    } else {
        ((a + b + 1.0) * log2 + libm::lgamma(jf + a + 1.0) + libm::lgamma(jf + b + 1.0)
            - libm::lgamma(jf + 1.0)
            - libm::lgamma(jf + a + b + 1.0))
        .exp()
            / (2.0 * jf + a + b + 1.0)
    };
    Ok(value)
}

/// Monomial coefficients of `(1 - x²)^m`, lowest degree first.
fn weight_monomials(m: usize) -> Vec<f64> {
    let mut c = vec![0.0; 2 * m + 1];
    let mut binom = 1.0;
    for l in 0..=m {
        c[2 * l] = if l % 2 == 0 { binom } else { -binom };
        binom = binom * (m - l) as f64 / (l + 1) as f64;
    }
    c
}

fn monomial_deriv(c: &[f64], x: f64, k: usize) -> f64 {
    (k..c.len()).rev().fold(0.0, |acc, p| {
        let falling: f64 = (0..k).map(|i| (p - i) as f64).product();
        acc * x + c[p] * falling
    })
}

/// `d^k J_j^{-m,-m}(x)`, by the Leibniz rule over `(1 - x²)^m P_{j-2m}^{(m,m)}`.
pub fn gjp_eval(m: usize, j: usize, x: f64, k: usize) -> Result<f64> {
    if m == 0 {
        return Err(SemError::InvalidArgument("smoothness order m must be >= 1".into()));
    }
    if j < 2 * m {
        return Err(SemError::GjpIndex { index: j, min: 2 * m });
    }
    let w = weight_monomials(m);
    let mf = m as f64;
    let mut binom = 1.0;
    let mut acc = 0.0;
    for i in 0..=k {
        if i <= 2 * m {
            let dw = monomial_deriv(&w, x, i);
            if dw != 0.0 {
                acc += binom * dw * jacobi_unchecked(mf, mf, j - 2 * m, x, k - i);
            }
        }
        binom = binom * (k - i) as f64 / (i + 1) as f64;
    }
    Ok(acc)
}

/// Legendre coefficients of `J_j^{-m,-m}`, padded to length `nmax + 1`.
///
/// Computed by Gauss projection with `j + 1` points (exact for the degree-2j
/// integrands); coefficients of the wrong parity are zero by symmetry.
pub fn gjp_to_legendre(m: usize, j: usize, nmax: usize) -> Result<PolyInLegendre> {
    if j > nmax {
        return Err(SemError::InvalidArgument(format!("index {j} exceeds the maximal degree {nmax}")));
    }
    let rule = gauss_legendre(j + 1);
    let values: Vec<f64> = rule.nodes().iter().map(|&x| gjp_eval(m, j, x, 0)).collect::<Result<_>>()?;
    let mut coeffs = vec![0.0; nmax + 1];
    let tables: Vec<Vec<Vec<f64>>> = rule.nodes().iter().map(|&x| legendre_table(j, x, 0)).collect();
    for (l, c) in coeffs.iter_mut().enumerate().take(j + 1) {
        if (j - l) % 2 == 1 {
            continue;
        }
        let s: f64 = rule.weights().iter().zip(&values).zip(&tables).map(|((w, v), t)| w * v * t[0][l]).sum();
        *c = s * (2 * l + 1) as f64 / 2.0;
    }
    Ok(PolyInLegendre::new(coeffs))
}

/// `q`-point Gauss–Legendre rule by Newton iteration on the Legendre
/// recurrence.
pub fn gauss_legendre(q: usize) -> QuadRule {
    assert!(q >= 1, "a quadrature rule needs at least one point");
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let qf = q as f64;
    let half = q.div_ceil(2);
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(q, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (_, d) = legendre_with_derivative(q, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[q - 1 - i] = x;
        nodes[i] = -x;
        weights[q - 1 - i] = w;
        weights[i] = w;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    QuadRule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
