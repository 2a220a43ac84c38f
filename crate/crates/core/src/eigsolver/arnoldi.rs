use std::time::Instant;

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{keep_with_partner, norm, residual_check, EigOptions, EigenResult, Method, SolveStats};
use crate::error::{Result, SemError};
use crate::sparse::SparseMatrix;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

enum Factor {
    Real(Lu<usize, f64>),
    Complex(Lu<usize, C>),
}

/// `x ↦ (A - σB)^{-1} B x`.
struct ShiftInvert<'a> {
    b: &'a SparseMatrix,
    factor: Factor,
    n: usize,
}

impl ShiftInvert<'_> {
    fn solve(&self, rhs: &[C]) -> Vec<C> {
        let n = self.n;
        match &self.factor {
            Factor::Real(lu) => {
                let mut m = Mat::<f64>::from_fn(n, 2, |i, j| if j == 0 { rhs[i].re } else { rhs[i].im });
                lu.solve_in_place_with_conj(Conj::No, m.as_mut());
                (0..n).map(|i| C::new(m[(i, 0)], m[(i, 1)])).collect()
            }
            Factor::Complex(lu) => {
                let mut m = Mat::<C>::from_fn(n, 1, |i, _| rhs[i]);
                lu.solve_in_place_with_conj(Conj::No, m.as_mut());
                (0..n).map(|i| m[(i, 0)]).collect()
            }
        }
    }

    fn apply(&self, x: &[C]) -> Vec<C> {
        let bx = self.b.matvec_c64(x).expect("square operator");
        self.solve(&bx)
    }
}

fn factorize<'a>(a: &SparseMatrix, b: &'a SparseMatrix, shift: C, seed: u64) -> Result<ShiftInvert<'a>> {
    let n = a.nrows();
    let singular = |why: String| SemError::SingularShift(format!("{shift} ({why})"));
    let shifted_re = SparseMatrix::linear_combination(&[(a, 1.0), (b, -shift.re)]);
    let factor = if shift.im == 0.0 {
        Factor::Real(shifted_re.to_faer().sp_lu().map_err(|e| singular(format!("{e:?}")))?)
    } else {
        let mut trips: Vec<Triplet<usize, usize, C>> =
            shifted_re.triplets().map(|(r, c, v)| Triplet::new(r, c, C::new(v, 0.0))).collect();
        trips.extend(b.triplets().map(|(r, c, v)| Triplet::new(r, c, C::new(0.0, -shift.im * v))));
        let m = SparseColMat::<usize, C>::try_new_from_triplets(n, n, &trips)
            .map_err(|e| SemError::Solver(format!("{e:?}")))?;
        Factor::Complex(m.sp_lu().map_err(|e| singular(format!("{e:?}")))?)
    };
    let op = ShiftInvert { b, factor, n };

    // a zero pivot does not always fail the factorization; check one solve
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let r: Vec<C> = (0..n).map(|_| C::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
    let x = op.solve(&r);
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(singular("non-finite solve".into()));
    }
    let ax = a.matvec_c64(&x)?;
    let bx = b.matvec_c64(&x)?;
    let res: f64 = (0..n).map(|i| (ax[i] - shift * bx[i] - r[i]).norm_sqr()).sum::<f64>().sqrt();
    let scale = (a.norm1() + shift.norm() * b.norm1()) * norm(&x) + norm(&r);
    if res > 1e-6 * scale {
        return Err(singular(format!("solve residual {res:.3e}")));
    }
    Ok(op)
}

fn dot(x: &[C], y: &[C]) -> C {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

fn axpy(alpha: C, x: &[C], y: &mut [C]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Orthogonalizes `w` against `basis` with one reorthogonalization pass;
/// returns the accumulated coefficients.
fn orthogonalize(basis: &[Vec<C>], w: &mut [C]) -> Vec<C> {
    let mut h = vec![ZERO; basis.len()];
    for _ in 0..2 {
        let c: Vec<C> = basis.iter().map(|v| dot(v, w)).collect();
        for (v, ci) in basis.iter().zip(&c) {
            axpy(-ci, v, w);
        }
        h.iter_mut().zip(&c).for_each(|(a, b)| *a += b);
    }
    h
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng, basis: &[Vec<C>]) -> Vec<C> {
    if basis.len() >= n {
        // the basis spans everything; the residual direction is zero
        return vec![ZERO; n];
    }
    loop {
        let mut v: Vec<C> = (0..n).map(|_| C::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
        orthogonalize(basis, &mut v);
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|z| *z /= nv);
            return v;
        }
    }
}

/// Columns of `y` made orthonormal by modified Gram-Schmidt, applied twice.
fn orthonormal_columns(y: &[Vec<C>]) -> Vec<Vec<C>> {
    let mut q: Vec<Vec<C>> = Vec::with_capacity(y.len());
    for col in y {
        let mut v = col.clone();
        orthogonalize(&q, &mut v);
        let nv = norm(&v);
        v.iter_mut().for_each(|z| *z /= nv);
        q.push(v);
    }
    q
}

struct Ritz {
    theta: C,
    y: Vec<C>,
    estimate: f64,
}

/// Eigenpairs of the leading `m×m` block of `h`, ordered by decreasing `|θ|`.
fn ritz_pairs(h: &Mat<C>, m: usize) -> Result<Vec<Ritz>> {
    let hm = h.as_ref().submatrix(0, 0, m, m).to_owned();
    let e = hm.eigen().map_err(|e| SemError::Solver(format!("Ritz eigenproblem: {e:?}")))?;
    let s = e.S().column_vector();
    let u = e.U();
    let mut out: Vec<Ritz> = (0..m)
        .map(|i| {
            let mut y: Vec<C> = (0..m).map(|r| u[(r, i)]).collect();
            let ny = norm(&y);
            y.iter_mut().for_each(|z| *z /= ny);
            let estimate = (0..m).map(|r| h[(m, r)] * y[r]).sum::<C>().norm();
            Ritz { theta: s[i], y, estimate }
        })
        .collect();
    out.sort_by(|a, b| b.theta.norm().partial_cmp(&a.theta.norm()).expect("finite Ritz values"));
    Ok(out)
}

/// Eigenvalues nearest `opts.shift` by a thick-restart Krylov-Schur
/// iteration on the shift-inverted operator.
pub fn solve_shift_invert(a: &SparseMatrix, b: &SparseMatrix, opts: &EigOptions) -> Result<EigenResult> {
    opts.validate()?;
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(SemError::DimensionMismatch { expected: n, got: b.nrows() });
    }
    let m = opts.subspace_dim();
    if m > n {
        return Err(SemError::Solver(format!("subspace dimension {m} exceeds problem size {n}")));
    }
    // one extra Ritz value so a conjugate pair at the cutoff stays whole
    let k = if opts.shift.im == 0.0 && opts.count + 1 < m { opts.count + 1 } else { opts.count };
    let t0 = Instant::now();
    let op = factorize(a, b, opts.shift, opts.seed)?;
    let factor_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<Vec<C>> = vec![random_unit(n, &mut rng, &[])];
    let mut h = Mat::<C>::zeros(m + 1, m);
    let mut start = 0;
    let mut stats = SolveStats { factor_seconds, ..Default::default() };

    let ritz = loop {
        for j in start..m {
            let mut w = op.apply(&v[j]);
            stats.matvecs += 1;
            let coeffs = orthogonalize(&v[..=j], &mut w);
            for (i, c) in coeffs.into_iter().enumerate() {
                h[(i, j)] = c;
            }
            let beta = norm(&w);
            let scale = (0..=j).map(|i| h[(i, j)].norm()).fold(beta, f64::max);
            if beta <= 1e-14 * scale {
                // invariant subspace; continue with a fresh direction
                h[(j + 1, j)] = ZERO;
                let fresh = random_unit(n, &mut rng, &v);
                v.push(fresh);
            } else {
                h[(j + 1, j)] = C::new(beta, 0.0);
                w.iter_mut().for_each(|z| *z /= beta);
                v.push(w);
            }
        }

        let ritz = ritz_pairs(&h, m)?;
        let converged = ritz[..k].iter().all(|r| r.estimate <= opts.tol * 1e-2 * r.theta.norm());
        if converged || stats.restarts >= opts.max_restarts {
            stats.converged = converged;
            break ritz;
        }
        stats.restarts += 1;

        let p = (m - 1).min(k + (m - k) / 2);
        let q = orthonormal_columns(&ritz[..p].iter().map(|r| r.y.clone()).collect::<Vec<_>>());
        // T = Qᴴ H Q, b = h_mᵀ Q
        let hq: Vec<Vec<C>> =
            q.iter().map(|col| (0..m).map(|r| (0..m).map(|c| h[(r, c)] * col[c]).sum()).collect()).collect();
        let mut h_new = Mat::<C>::zeros(m + 1, m);
        for (j, hqj) in hq.iter().enumerate() {
            for (i, qi) in q.iter().enumerate() {
                h_new[(i, j)] = dot(qi, hqj);
            }
            h_new[(p, j)] = (0..m).map(|c| h[(m, c)] * q[j][c]).sum();
        }
        let mut v_new: Vec<Vec<C>> = q
            .iter()
            .map(|col| {
                let mut x = vec![ZERO; n];
                for (vi, ci) in v[..m].iter().zip(col) {
                    axpy(*ci, vi, &mut x);
                }
                x
            })
            .collect();
        v_new.push(v[m].clone());
        v = v_new;
        h = h_new;
        start = p;
    };

    let mut pairs: Vec<(C, Vec<C>)> = ritz[..k]
        .iter()
        .map(|r| {
            let mut x = vec![ZERO; n];
            for (vi, ci) in v[..m].iter().zip(&r.y) {
                axpy(*ci, vi, &mut x);
            }
            let nx = norm(&x);
            x.iter_mut().for_each(|z| *z /= nx);
            (opts.shift + r.theta.inv(), x)
        })
        .collect();
    pairs
        .sort_by(|x, y| (x.0 - opts.shift).norm().partial_cmp(&(y.0 - opts.shift).norm()).expect("finite eigenvalues"));
    let by_distance: Vec<C> = pairs.iter().map(|p| p.0).collect();
    pairs.truncate(keep_with_partner(&by_distance, opts.count, opts.shift));
    let residuals = pairs.iter().map(|(l, x)| residual_check(a, b, *l, x)).collect::<Result<Vec<f64>>>()?;
    stats.solve_seconds = t1.elapsed().as_secs_f64();
    if !stats.converged {
        log::warn!("Krylov-Schur stopped after {} restarts without convergence", stats.restarts);
    }
    let (eigenvalues, eigenvectors) = pairs.into_iter().unzip();
    Ok(EigenResult { eigenvalues, eigenvectors, residuals, method: Method::Arnoldi, stats })
}
