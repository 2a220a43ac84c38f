//! The one-dimensional basis of `P_N`: `2m` nodal functions followed by the
//! bubbles `J_j^{-m,-m}`, `2m <= j <= N`.
//!
//! Index layout: `0..m` are the nodal functions at `-1` (derivative order
//! `0..m`), `m..2m` the nodal functions at `+1`, `2m..=N` the bubbles.

use faer::prelude::*;
use faer::Mat;

use crate::error::{Result, SemError};
use crate::orthopoly::{gjp_to_legendre, legendre_table, PolyInLegendre, QuadRule};

#[derive(Debug, Clone, PartialEq)]
pub struct Basis1D {
    m: usize,
    degree: usize,
    funcs: Vec<PolyInLegendre>,
}

/// Hermite-type functions with `∂^j φ_i(-1) = δ_ij` and `∂^j φ_{i+m}(1) = δ_ij`.
pub fn build_nodal(m: usize) -> Result<Vec<PolyInLegendre>> {
    if m == 0 {
        return Err(SemError::InvalidArgument("smoothness order m must be >= 1".into()));
    }
    let n = 2 * m;
    let left = legendre_table(n - 1, -1.0, m - 1);
    let right = legendre_table(n - 1, 1.0, m - 1);
    // row = endpoint condition, column = Legendre index
    let cond = Mat::<f64>::from_fn(n, n, |r, l| if r < m { left[r][l] } else { right[r - m][l] });
    let coeffs = cond.partial_piv_lu().solve(Mat::<f64>::identity(n, n));
    let residual = (&cond * &coeffs - Mat::<f64>::identity(n, n)).norm_max();
    if !(residual <= 1e-10) {
        return Err(SemError::NodalBasis(residual));
    }
    Ok((0..n).map(|r| PolyInLegendre::new((0..n).map(|l| coeffs[(l, r)]).collect())).collect())
}

/// Nodal functions plus bubbles for `P_N`; requires `N >= 2m - 1`.
pub fn build_basis(m: usize, degree: usize) -> Result<Basis1D> {
    if m == 0 || degree + 1 < 2 * m {
        return Err(SemError::DegreeTooSmall { degree, m, min: (2 * m).saturating_sub(1) });
    }
    let mut funcs: Vec<PolyInLegendre> = build_nodal(m)?
        .into_iter()
        .map(|p| {
            let mut c = p.coeffs().to_vec();
            c.resize(degree + 1, 0.0);
            PolyInLegendre::new(c)
        })
        .collect();
    for j in 2 * m..=degree {
        funcs.push(gjp_to_legendre(m, j, degree)?);
    }
    Ok(Basis1D { m, degree, funcs })
}

impl Basis1D {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.funcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.funcs.is_empty()
    }

    pub fn funcs(&self) -> &[PolyInLegendre] {
        &self.funcs
    }

    pub fn is_bubble(&self, j: usize) -> bool {
        j >= 2 * self.m
    }

    /// `∂^k φ̂_j(x̂)` on the reference interval.
    pub fn eval(&self, j: usize, x: f64, k: usize) -> f64 {
        self.funcs[j].eval_deriv(x, k)
    }

    /// Power of `(b - a)/2` that multiplies `φ̂_j` on a scaled interval.
    pub fn scale_power(&self, j: usize) -> i32 {
        if j < self.m {
            j as i32
        } else if j < 2 * self.m {
            (j - self.m) as i32
        } else {
            0
        }
    }

    /// CSV with columns `j,degree,c_0..c_N`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,degree");
        for l in 0..=self.degree {
            out.push_str(&format!(",c_{l}"));
        }
        out.push('\n');
        for (j, f) in self.funcs.iter().enumerate() {
            out.push_str(&format!("{j},{}", f.degree()));
            for c in f.coeffs() {
                out.push_str(&format!(",{c:.14e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// The basis transported to `[a, b]` by `x = h x̂ + (a + b)/2`, `h = (b - a)/2`,
/// with nodal functions rescaled by `h^j` so that physical endpoint
/// derivatives are again Kronecker deltas.
#[derive(Debug, Clone, Copy)]
pub struct ScaledBasis1D<'a> {
    base: &'a Basis1D,
    a: f64,
    b: f64,
}

pub fn scale_basis(base: &Basis1D, a: f64, b: f64) -> Result<ScaledBasis1D<'_>> {
    if !(a < b) {
        return Err(SemError::DegenerateInterval(a, b));
    }
    Ok(ScaledBasis1D { base, a, b })
}

impl<'a> ScaledBasis1D<'a> {
    pub fn base(&self) -> &'a Basis1D {
        self.base
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn half_width(&self) -> f64 {
        (self.b - self.a) / 2.0
    }

    pub fn to_reference(&self, x: f64) -> f64 {
        (2.0 * x - self.a - self.b) / (self.b - self.a)
    }

    pub fn to_physical(&self, xr: f64) -> f64 {
        self.half_width() * xr + (self.a + self.b) / 2.0
    }

    /// `∂_x^s φ_j(x)` at a physical point.
    pub fn eval(&self, j: usize, x: f64, s: usize) -> f64 {
        let h = self.half_width();
        h.powi(self.base.scale_power(j) - s as i32) * self.base.eval(j, self.to_reference(x), s)
    }
}

/// Reference-interval values `∂^s φ̂_j(x̂_q)`, shared by every element.
#[derive(Debug, Clone)]
pub struct RefTable {
    max_deriv: usize,
    n_funcs: usize,
    rule: QuadRule,
    values: Vec<f64>,
    scale_powers: Vec<i32>,
}

impl RefTable {
    pub fn new(basis: &Basis1D, rule: &QuadRule, max_deriv: usize) -> Self {
        let nq = rule.order();
        let nf = basis.len();
        let mut values = vec![0.0; (max_deriv + 1) * nf * nq];
        for (q, &x) in rule.nodes().iter().enumerate() {
            for (j, f) in basis.funcs().iter().enumerate() {
                for (s, v) in f.eval_all(x, max_deriv).into_iter().enumerate() {
                    values[(s * nf + j) * nq + q] = v;
                }
            }
        }
        RefTable {
            max_deriv,
            n_funcs: nf,
            rule: rule.clone(),
            values,
            scale_powers: (0..nf).map(|j| basis.scale_power(j)).collect(),
        }
    }

    pub fn rule(&self) -> &QuadRule {
        &self.rule
    }

    /// Physical table on `[a, b]` including the chain-rule factors.
    pub fn scaled(&self, a: f64, b: f64) -> BasisTable {
        let h = (b - a) / 2.0;
        let c = (a + b) / 2.0;
        let nq = self.rule.order();
        let nf = self.n_funcs;
        let mut values = self.values.clone();
        for s in 0..=self.max_deriv {
            for j in 0..nf {
                let f = h.powi(self.scale_powers[j] - s as i32);
                for v in &mut values[(s * nf + j) * nq..(s * nf + j + 1) * nq] {
                    *v *= f;
                }
            }
        }
        BasisTable {
            max_deriv: self.max_deriv,
            n_funcs: nf,
            nodes: self.rule.nodes().iter().map(|x| h * x + c).collect(),
            weights: self.rule.weights().iter().map(|w| h * w).collect(),
            values,
        }
    }
}

/// `∂_x^s φ_j` at the mapped quadrature nodes of one interval.
#[derive(Debug, Clone)]
pub struct BasisTable {
    max_deriv: usize,
    n_funcs: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    values: Vec<f64>,
}

impl BasisTable {
    pub fn max_deriv(&self) -> usize {
        self.max_deriv
    }

    pub fn n_funcs(&self) -> usize {
        self.n_funcs
    }

    pub fn n_points(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, s: usize, j: usize, q: usize) -> f64 {
        self.values[(s * self.n_funcs + j) * self.nodes.len() + q]
    }

    /// Row of `∂^s φ_j` over all quadrature points.
    pub fn row(&self, s: usize, j: usize) -> &[f64] {
        let nq = self.nodes.len();
        &self.values[(s * self.n_funcs + j) * nq..(s * self.n_funcs + j + 1) * nq]
    }
}

pub fn tabulate(sb: &ScaledBasis1D<'_>, rule: &QuadRule, max_deriv: usize) -> BasisTable {
    let (a, b) = sb.interval();
    RefTable::new(sb.base(), rule, max_deriv).scaled(a, b)
}
