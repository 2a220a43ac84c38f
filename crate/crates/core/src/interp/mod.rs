//! The spectral element interpolant: endpoint Hermite data for the nodal
//! functions, the `|·|_m`-orthogonal projection for the bubbles, tensorized
//! direction by direction and glued through the dofmap.

pub mod functions;

pub use functions::{ExpSum, FnFunction, KinkPower, Polynomial, SinProduct, SmoothFunction};

use crate::basis1d::{scale_basis, tabulate, Basis1D, ScaledBasis1D};
use crate::dofmap::DofMap;
use crate::error::{Result, SemError};
use crate::mesh::BoxMesh;
use crate::orthopoly::{gauss_legendre, QuadRule};
use crate::par::Execution;
use crate::tensor::apply_along_axis;

/// Nodal coefficients: the endpoint derivatives `v^{(j)}(a)`, then `v^{(j)}(b)`.
pub fn pi1(v: impl Fn(f64, usize) -> f64, sb: &ScaledBasis1D<'_>) -> Vec<f64> {
    let m = sb.base().m();
    let (a, b) = sb.interval();
    (0..m).map(|j| v(a, j)).chain((0..m).map(|j| v(b, j))).collect()
}

/// Bubble coefficients `c_j = (∂^m v, ∂^m φ_j) / (∂^m φ_j, ∂^m φ_j)`.
pub fn pi2(v: impl Fn(f64, usize) -> f64, sb: &ScaledBasis1D<'_>, rule: &QuadRule) -> Vec<f64> {
    let m = sb.base().m();
    let (a, b) = sb.interval();
    let scale = (0..m).map(|j| v(a, j).abs().max(v(b, j).abs())).fold(0.0, f64::max);
    if scale > 1e-8 {
        log::warn!("pi2: endpoint data of size {scale:e}; projecting the H^m_0 part only");
    }
    let t = tabulate(sb, rule, m);
    let dm: Vec<f64> = t.nodes().iter().map(|&x| v(x, m)).collect();
    (2 * m..sb.base().len())
        .map(|j| {
            let row = t.row(m, j);
            let num: f64 = (0..t.n_points()).map(|q| t.weights()[q] * row[q] * dm[q]).sum();
            let den: f64 = (0..t.n_points()).map(|q| t.weights()[q] * row[q] * row[q]).sum();
            num / den
        })
        .collect()
}

/// Sample layout along one direction: `2m` endpoint derivatives, then `∂^m`
/// at the quadrature nodes.
#[derive(Debug, Clone)]
pub struct Samples1D {
    pub points: Vec<f64>,
    pub orders: Vec<usize>,
}

/// Matrix from samples to the `N + 1` coefficients on `[a, b]`, row-major.
pub fn interp_matrix(sb: &ScaledBasis1D<'_>, rule: &QuadRule) -> (Samples1D, Vec<f64>) {
    let m = sb.base().m();
    let n1 = sb.base().len();
    let (a, b) = sb.interval();
    let t = tabulate(sb, rule, m);
    let nq = t.n_points();
    let cols = 2 * m + nq;
    let mut mat = vec![0.0; n1 * cols];
    for i in 0..2 * m {
        mat[i * cols + i] = 1.0;
    }
    for j in 2 * m..n1 {
        let row = t.row(m, j);
        let den: f64 = (0..nq).map(|q| t.weights()[q] * row[q] * row[q]).sum();
        for q in 0..nq {
            mat[j * cols + 2 * m + q] = t.weights()[q] * row[q] / den;
        }
        for i in 0..2 * m {
            let ri = t.row(m, i);
            let c: f64 = (0..nq).map(|q| t.weights()[q] * row[q] * ri[q]).sum();
            mat[j * cols + i] = -c / den;
        }
    }
    let mut points = Vec::with_capacity(cols);
    let mut orders = Vec::with_capacity(cols);
    for j in 0..m {
        points.push(a);
        orders.push(j);
    }
    for j in 0..m {
        points.push(b);
        orders.push(j);
    }
    for &x in t.nodes() {
        points.push(x);
        orders.push(m);
    }
    (Samples1D { points, orders }, mat)
}

/// `Π¹ + Π² (I - Π¹)` on one interval.
pub fn interp_1d(v: impl Fn(f64, usize) -> f64, sb: &ScaledBasis1D<'_>, rule: &QuadRule) -> Vec<f64> {
    let (s, mat) = interp_matrix(sb, rule);
    let data: Vec<f64> = s.points.iter().zip(&s.orders).map(|(&x, &k)| v(x, k)).collect();
    let cols = data.len();
    (0..sb.base().len()).map(|j| (0..cols).map(|c| mat[j * cols + c] * data[c]).sum()).collect()
}

/// Default bubble quadrature for interpolation.
pub fn default_rule(basis: &Basis1D) -> QuadRule {
    gauss_legendre(basis.degree() + 2)
}

/// Tensor coefficients (axis 0 fastest) of the interpolant on one box.
pub fn interp_tensor(
    v: &dyn SmoothFunction,
    bounds: &[(f64, f64)],
    basis: &Basis1D,
    rule: &QuadRule,
) -> Result<Vec<f64>> {
    let order: Vec<usize> = (0..bounds.len()).collect();
    interp_tensor_ordered(v, bounds, basis, rule, &order)
}

/// As [`interp_tensor`], applying the 1-D operators in the given axis order.
pub fn interp_tensor_ordered(
    v: &dyn SmoothFunction,
    bounds: &[(f64, f64)],
    basis: &Basis1D,
    rule: &QuadRule,
    order: &[usize],
) -> Result<Vec<f64>> {
    let d = bounds.len();
    if v.dim() != d {
        return Err(SemError::DimensionMismatch { expected: d, got: v.dim() });
    }
    let mut ops = Vec::with_capacity(d);
    for &(a, b) in bounds {
        ops.push(interp_matrix(&scale_basis(basis, a, b)?, rule));
    }
    let shape: Vec<usize> = ops.iter().map(|(s, _)| s.points.len()).collect();
    let total: usize = shape.iter().product();
    let mut x = vec![0.0; d];
    let mut alpha = vec![0; d];
    let mut data = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        for k in 0..d {
            let i = rem % shape[k];
            rem /= shape[k];
            x[k] = ops[k].0.points[i];
            alpha[k] = ops[k].0.orders[i];
        }
        data.push(v.eval(&x, &alpha));
    }
    let mut sh = shape;
    for &k in order {
        let (next, ns) = apply_along_axis(&data, &sh, k, &ops[k].1, basis.len());
        data = next;
        sh = ns;
    }
    Ok(data)
}

/// Global interpolant over all dofs (constrained ones included).
pub fn interp_global(
    v: &dyn SmoothFunction,
    mesh: &BoxMesh,
    dm: &DofMap,
    basis: &Basis1D,
    rule: &QuadRule,
    exec: Execution,
) -> Result<Vec<f64>> {
    let locals = exec.map(mesh.elements(), |el| interp_tensor(v, &el.bounds, basis, rule));
    let mut out = vec![f64::NAN; dm.total()];
    for (e, local) in locals.into_iter().enumerate() {
        let local = local?;
        for (i, &g) in dm.element_dofs(e).iter().enumerate() {
            let c = local[i];
            if out[g].is_nan() {
                out[g] = c;
            } else if (out[g] - c).abs() > 1e-10 * (1.0 + c.abs()) {
                return Err(SemError::SharedDofMismatch { dof: g, first: out[g], second: c });
            }
        }
    }
    Ok(out)
}

/// Broken `H^s` norm of `u_h - v`, summing all `|α| <= s`.
pub fn sobolev_error(
    coeffs: &[f64],
    v: &dyn SmoothFunction,
    mesh: &BoxMesh,
    dm: &DofMap,
    basis: &Basis1D,
    s: usize,
    q: usize,
) -> f64 {
    let d = mesh.dim();
    let rule = gauss_legendre(q.max(basis.degree() + 6));
    let n1 = basis.len();
    let alphas: Vec<Vec<usize>> = (0..(s + 1).pow(d as u32))
        .map(|f| (0..d).map(|k| f / (s + 1).pow(k as u32) % (s + 1)).collect::<Vec<_>>())
        .filter(|a| a.iter().sum::<usize>() <= s)
        .collect();
    let sums = Execution::default().map_range(mesh.n_elements(), |e| {
        let el = &mesh.elements()[e];
        let tables: Vec<_> =
            el.bounds.iter().map(|&(a, b)| tabulate(&scale_basis(basis, a, b).expect("element"), &rule, s)).collect();
        let nq = rule.order();
        let local: Vec<f64> = dm.element_dofs(e).iter().map(|&g| coeffs[g]).collect();
        let mut acc = 0.0;
        for alpha in &alphas {
            let mut data = local.clone();
            let mut sh = vec![n1; d];
            for k in 0..d {
                let mat: Vec<f64> = (0..nq)
                    .flat_map(|qq| (0..n1).map(move |j| (qq, j)))
                    .map(|(qq, j)| tables[k].get(alpha[k], j, qq))
                    .collect();
                let (next, ns) = apply_along_axis(&data, &sh, k, &mat, nq);
                data = next;
                sh = ns;
            }
            let mut x = vec![0.0; d];
            for (flat, uh) in data.iter().enumerate() {
                let mut rem = flat;
                let mut w = 1.0;
                for k in 0..d {
                    let i = rem % nq;
                    rem /= nq;
                    x[k] = tables[k].nodes()[i];
                    w *= tables[k].weights()[i];
                }
                let diff = uh - v.eval(&x, alpha);
                acc += w * diff * diff;
            }
        }
        acc
    });
    sums.iter().sum::<f64>().sqrt()
}

/// Least-squares slope of `log err` against `log h`.
pub fn observed_slope(h: &[f64], err: &[f64]) -> f64 {
    let n = h.len() as f64;
    let lx: Vec<f64> = h.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = err.iter().map(|x| x.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
