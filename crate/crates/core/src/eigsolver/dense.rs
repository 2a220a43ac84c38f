use std::time::Instant;

use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::ComputeEigenvectors;
use faer::linalg::gevd::{gevd_real, gevd_scratch, GevdParams};
use faer::linalg::temp_mat_scratch;
use faer::{Mat, Par, Spec};
use num_complex::Complex64;

use super::{keep_with_partner, norm, EigOptions, EigenResult, Method, SolveStats};
use crate::error::{Result, SemError};

/// `|β|` below this fraction of `max(|α|, |β|)` counts as an infinite eigenvalue.
const INFINITE_TOL: f64 = 1e-12;

struct Gevd {
    values: Vec<Complex64>,
    vectors: Mat<Complex64>,
    finite: Vec<usize>,
}

fn gevd(a: &Mat<f64>, b: &Mat<f64>) -> Result<Gevd> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(SemError::DimensionMismatch { expected: n, got: b.nrows() });
    }
    let (mut ac, mut bc) = (a.clone(), b.clone());
    let mut u = Mat::<f64>::zeros(n, n);
    let mut s_re = Diag::<f64>::zeros(n);
    let mut s_im = Diag::<f64>::zeros(n);
    let mut beta = Diag::<f64>::zeros(n);
    let par = Par::Seq;
    // the stock scratch estimate misses the n x 2 back-substitution buffer
    // used for complex pairs, so pad it
    // the blocked QZ with aggressive early deflation can underflow its
    // window bookkeeping on these pencils; use the unblocked sweep throughout
    let mut params: Spec<GevdParams, f64> = Default::default();
    params.schur.blocking_threshold = usize::MAX;
    let req = gevd_scratch::<f64>(n, ComputeEigenvectors::No, ComputeEigenvectors::Yes, par, params)
        .and(temp_mat_scratch::<f64>(n, n).array(3));
    let mut mem = MemBuffer::new(req);
    gevd_real(
        ac.as_mut(),
        bc.as_mut(),
        s_re.as_mut(),
        s_im.as_mut(),
        beta.as_mut(),
        None,
        Some(u.as_mut()),
        par,
        MemStack::new(&mut mem),
        params,
    )
    .map_err(|e| SemError::Solver(format!("QZ failed: {e:?}")))?;
    let (s_re, s_im, beta) = (s_re.column_vector(), s_im.column_vector(), beta.column_vector());
    let mut vectors = Mat::<Complex64>::zeros(n, n);
    let mut j = 0;
    while j < n {
        if s_im[j] != 0.0 && j + 1 < n {
            // conjugate pair stored as (Re v, Im v) in consecutive columns
            for r in 0..n {
                vectors[(r, j)] = Complex64::new(u[(r, j)], u[(r, j + 1)]);
                vectors[(r, j + 1)] = Complex64::new(u[(r, j)], -u[(r, j + 1)]);
            }
            j += 2;
        } else {
            for r in 0..n {
                vectors[(r, j)] = Complex64::new(u[(r, j)], 0.0);
            }
            j += 1;
        }
    }
    let mut values = Vec::with_capacity(n);
    let mut finite = Vec::new();
    let mut i = 0;
    while i < n {
        let al = Complex64::new(s_re[i], s_im[i]);
        let be = beta[i];
        let scale = al.norm().max(be.abs());
        let lambda = al / be;
        let ok = be.abs() > INFINITE_TOL * scale && lambda.re.is_finite() && lambda.im.is_finite();
        // only the leading member of a conjugate pair is reliable
        let width = if s_im[i] != 0.0 && i + 1 < n { 2 } else { 1 };
        for w in 0..width {
            if ok {
                finite.push(i + w);
            }
            values.push(if w == 0 { lambda } else { lambda.conj() });
        }
        i += width;
    }
    Ok(Gevd { values, vectors, finite })
}

/// Every finite eigenvalue of the pencil, unsorted.
pub fn full_spectrum(a: &Mat<f64>, b: &Mat<f64>) -> Result<Vec<Complex64>> {
    let g = gevd(a, b)?;
    Ok(g.finite.iter().map(|&i| g.values[i]).collect())
}

fn norm1(m: &Mat<f64>) -> f64 {
    (0..m.ncols()).map(|j| (0..m.nrows()).map(|i| m[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn dense_residual(a: &Mat<f64>, b: &Mat<f64>, na: f64, nb: f64, lambda: Complex64, v: &[Complex64]) -> f64 {
    let n = a.nrows();
    let mut r2 = 0.0;
    for i in 0..n {
        let mut s = Complex64::new(0.0, 0.0);
        for j in 0..n {
            s += v[j] * (a[(i, j)] - lambda * b[(i, j)]);
        }
        r2 += s.norm_sqr();
    }
    r2.sqrt() / ((na + lambda.norm() * nb) * norm(v))
}

/// QZ on dense copies; returns the `count` finite eigenvalues nearest the
/// shift, sorted by modulus.
pub fn solve_dense(a: &Mat<f64>, b: &Mat<f64>, opts: &EigOptions) -> Result<EigenResult> {
    opts.validate()?;
    let start = Instant::now();
    let g = gevd(a, b)?;
    let mut picked = g.finite.clone();
    let shift = opts.shift;
    picked.sort_by(|&i, &j| {
        (g.values[i] - shift)
            .norm()
            .partial_cmp(&(g.values[j] - shift).norm())
            .expect("finite eigenvalues")
            .then(i.cmp(&j))
    });
    let by_distance: Vec<Complex64> = picked.iter().map(|&i| g.values[i]).collect();
    picked.truncate(keep_with_partner(&by_distance, opts.count, shift));
    picked.sort_by(|&i, &j| {
        let (x, y) = (g.values[i], g.values[j]);
        x.norm().partial_cmp(&y.norm()).expect("finite eigenvalues").then(x.im.partial_cmp(&y.im).expect("finite"))
    });
    let (na, nb) = (norm1(a), norm1(b));
    let mut eigenvectors = Vec::with_capacity(picked.len());
    let mut residuals = Vec::with_capacity(picked.len());
    for &i in &picked {
        let v: Vec<Complex64> = (0..a.nrows()).map(|r| g.vectors[(r, i)]).collect();
        residuals.push(dense_residual(a, b, na, nb, g.values[i], &v));
        eigenvectors.push(v);
    }
    Ok(EigenResult {
        eigenvalues: picked.iter().map(|&i| g.values[i]).collect(),
        eigenvectors,
        residuals,
        method: Method::Dense,
        stats: SolveStats {
            infinite: a.nrows() - g.finite.len(),
            solve_seconds: start.elapsed().as_secs_f64(),
            converged: true,
            ..Default::default()
        },
    })
}
