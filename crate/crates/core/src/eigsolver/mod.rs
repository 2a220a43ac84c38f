//! Generalized eigenvalues of a real, non-symmetric pencil `A x = λ B x`.
//!
//! Two independent routes: [`solve_dense`] runs the QZ algorithm on dense
//! copies, [`solve_shift_invert`] runs a Krylov–Schur iteration on
//! `(A - σB)^{-1} B` with a sparse LU factorization. Small pencils can be
//! solved both ways and compared.

mod arnoldi;
mod dense;

pub use arnoldi::solve_shift_invert;
pub use dense::{full_spectrum, solve_dense};

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Result, SemError};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Auto,
    Dense,
    Arnoldi,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Method::Auto),
            "dense" => Ok(Method::Dense),
            "arnoldi" => Ok(Method::Arnoldi),
            _ => Err(SemError::InvalidArgument(format!("unknown eigensolver method {s:?}"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Auto => "auto",
            Method::Dense => "dense",
            Method::Arnoldi => "arnoldi",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigOptions {
    /// Eigenvalues wanted nearest `shift`. With a real shift, one more is
    /// returned when the cutoff would separate a conjugate pair.
    pub count: usize,
    pub shift: Complex64,
    pub method: Method,
    pub tol: f64,
    pub max_restarts: usize,
    /// Krylov subspace size; `None` means `max(2 count + 10, 30)`.
    pub subspace: Option<usize>,
    pub dense_threshold: usize,
    pub seed: u64,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions {
            count: 8,
            shift: Complex64::new(0.0, 0.0),
            method: Method::Auto,
            tol: 1e-10,
            max_restarts: 300,
            subspace: None,
            dense_threshold: 3000,
            seed: 0,
        }
    }
}

impl EigOptions {
    pub fn subspace_dim(&self) -> usize {
        self.subspace.unwrap_or((2 * self.count + 10).max(30))
    }

    fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(SemError::InvalidArgument("eigenvalue count must be >= 1".into()));
        }
        if self.subspace_dim() <= self.count {
            return Err(SemError::InvalidArgument(format!(
                "subspace dimension {} must exceed count {}",
                self.subspace_dim(),
                self.count
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub restarts: usize,
    pub matvecs: usize,
    pub factor_seconds: f64,
    pub solve_seconds: f64,
    /// Eigenvalues of the dense path with `β ≈ 0`.
    pub infinite: usize,
    /// False when the Krylov iteration hit `max_restarts` first.
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalues: Vec<Complex64>,
    /// One column per eigenvalue.
    pub eigenvectors: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
    pub method: Method,
    pub stats: SolveStats,
}

/// `‖A v - λ B v‖ / ((‖A‖₁ + |λ| ‖B‖₁) ‖v‖)`.
pub fn residual_check(a: &SparseMatrix, b: &SparseMatrix, lambda: Complex64, v: &[Complex64]) -> Result<f64> {
    let nv = norm(v);
    if nv == 0.0 {
        return Err(SemError::InvalidArgument("zero vector in residual check".into()));
    }
    let av = a.matvec_c64(v)?;
    let bv = b.matvec_c64(v)?;
    let r: f64 = av.iter().zip(&bv).map(|(x, y)| (x - lambda * y).norm_sqr()).sum::<f64>().sqrt();
    Ok(r / ((a.norm1() + lambda.norm() * b.norm1()) * nv))
}

/// How many of `sorted` (ordered by distance to a real shift) to keep so
/// that the first `count` are not split from a conjugate partner: `count`,
/// or `count + 1` when entry `count` completes the pair at the cutoff.
pub(crate) fn keep_with_partner(sorted: &[Complex64], count: usize, shift: Complex64) -> usize {
    if shift.im != 0.0 || sorted.len() <= count {
        return count.min(sorted.len());
    }
    let last = sorted[count - 1];
    let close = |x: Complex64, y: Complex64| (x - y).norm() <= 1e-8 * x.norm().max(f64::MIN_POSITIVE);
    let is_complex = last.im.abs() > 1e-10 * last.norm();
    let paired = sorted[..count - 1].iter().any(|&z| close(z, last.conj()));
    if is_complex && !paired && close(sorted[count], last.conj()) {
        count + 1
    } else {
        count
    }
}

pub(crate) fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Dispatches on `opts.method`; `Auto` picks dense up to `dense_threshold`.
pub fn solve(a: &SparseMatrix, b: &SparseMatrix, opts: &EigOptions) -> Result<EigenResult> {
    let use_dense = match opts.method {
        Method::Dense => true,
        Method::Arnoldi => false,
        Method::Auto => a.nrows() <= opts.dense_threshold,
    };
    if use_dense {
        let da: Mat<f64> = a.to_dense();
        let db: Mat<f64> = b.to_dense();
        solve_dense(&da, &db, opts)
    } else {
        solve_shift_invert(a, b, opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(v: &[f64]) -> SparseMatrix {
        SparseMatrix::from_triplets(v.len(), v.len(), v.iter().enumerate().map(|(i, &x)| (i, i, x)).collect())
    }

    #[test]
    fn diagonal_pencil_both_routes() {
        let a = diag(&[1.0, 2.0]);
        let b = SparseMatrix::identity(2);
        let opts = EigOptions { count: 2, method: Method::Dense, ..Default::default() };
        let r = solve(&a, &b, &opts).unwrap();
        assert!((r.eigenvalues[0] - 1.0).norm() < 1e-14);
        assert!((r.eigenvalues[1] - 2.0).norm() < 1e-14);

        let a = diag(&[1.0, 2.0, 5.0, 7.0, 11.0]);
        let b = SparseMatrix::identity(5);
        let opts = EigOptions {
            count: 1,
            shift: Complex64::new(0.9, 0.0),
            method: Method::Arnoldi,
            subspace: Some(4),
            ..Default::default()
        };
        let r = solve(&a, &b, &opts).unwrap();
        assert!((r.eigenvalues[0] - 1.0).norm() < 1e-12, "{:?}", r.eigenvalues);
        assert!(r.residuals[0] < 1e-12);
    }

    #[test]
    fn rotation_has_imaginary_pair() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 1, -1.0), (1, 0, 1.0)]);
        let b = SparseMatrix::identity(2);
        let r = solve(&a, &b, &EigOptions { count: 2, method: Method::Dense, ..Default::default() }).unwrap();
        let mut im: Vec<f64> = r.eigenvalues.iter().map(|z| z.im).collect();
        im.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((im[0] + 1.0).abs() < 1e-14 && (im[1] - 1.0).abs() < 1e-14);
        assert!(r.eigenvalues.iter().all(|z| z.re.abs() < 1e-14));
    }

    fn random_pencil(n: usize, seed: u64) -> (SparseMatrix, SparseMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ta = Vec::new();
        let mut tb = Vec::new();
        let r: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        for i in 0..n {
            for j in 0..n {
                ta.push((i, j, rng.gen_range(-1.0..1.0)));
                // B = R Rᵀ + n I is SPD
                let s: f64 = (0..n).map(|k| r[i][k] * r[j][k]).sum();
                tb.push((i, j, s + if i == j { n as f64 } else { 0.0 }));
            }
        }
        (SparseMatrix::from_triplets(n, n, ta), SparseMatrix::from_triplets(n, n, tb))
    }

    fn nearest(values: &[Complex64], shift: Complex64, k: usize) -> Vec<Complex64> {
        let mut v = values.to_vec();
        v.sort_by(|x, y| (x - shift).norm().partial_cmp(&(y - shift).norm()).unwrap());
        v.truncate(k);
        v
    }

    // real pencils: a conjugate pair is equidistant from a real shift, so
    // either member may be kept at the count boundary
    fn assert_same_set(x: &[Complex64], y: &[Complex64], tol: f64) {
        for a in x {
            let d =
                y.iter().map(|b| (a - b).norm().min((a - b.conj()).norm()) / a.norm()).fold(f64::INFINITY, f64::min);
            assert!(d < tol, "{a} missing: {d:e}");
        }
    }

    #[test]
    fn random_pencil_routes_agree() {
        let (a, b) = random_pencil(50, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shift = Complex64::new(rng.gen_range(-0.05..0.05), 0.0);
        let opts = EigOptions { count: 6, shift, ..Default::default() };
        let all = full_spectrum(&a.to_dense(), &b.to_dense()).unwrap();
        let dense = nearest(&all, shift, 6);
        let si = solve_shift_invert(&a, &b, &opts).unwrap();
        assert!(si.stats.converged);
        assert_same_set(&dense, &si.eigenvalues, 1e-9);
        assert!(si.residuals.iter().all(|r| *r < 1e-10));
        let d = solve_dense(&a.to_dense(), &b.to_dense(), &opts).unwrap();
        assert_same_set(&dense, &d.eigenvalues, 1e-12);
        assert!(d.residuals.iter().all(|r| *r < 1e-10));
    }

    #[test]
    fn complex_shift_uses_complex_factorization() {
        let (a, b) = random_pencil(40, 5);
        let all = full_spectrum(&a.to_dense(), &b.to_dense()).unwrap();
        let target = *all.iter().find(|z| z.im.abs() > 1e-3).expect("a complex eigenvalue");
        let shift = target + Complex64::new(1e-3, 1e-3);
        let opts = EigOptions { count: 3, shift, ..Default::default() };
        let si = solve_shift_invert(&a, &b, &opts).unwrap();
        assert_same_set(&nearest(&all, shift, 3), &si.eigenvalues, 1e-9);
    }

    #[test]
    fn determinism_and_shift_stability() {
        let (a, b) = random_pencil(60, 2);
        let opts = EigOptions { count: 4, shift: Complex64::new(0.01, 0.0), ..Default::default() };
        let r1 = solve_shift_invert(&a, &b, &opts).unwrap();
        let r2 = solve_shift_invert(&a, &b, &opts).unwrap();
        assert_eq!(r1.eigenvalues, r2.eigenvalues);
    }

    #[test]
    fn singular_shift_is_reported() {
        let a = diag(&[1.0, 2.0, 3.0]);
        let b = SparseMatrix::identity(3);
        let opts = EigOptions { count: 1, shift: Complex64::new(2.0, 0.0), subspace: Some(2), ..Default::default() };
        let err = solve_shift_invert(&a, &b, &opts).unwrap_err();
        assert!(matches!(err, SemError::SingularShift(_)), "{err}");
    }

    #[test]
    fn residual_check_examples() {
        let a = diag(&[1.0, 2.0]);
        let b = SparseMatrix::identity(2);
        let v = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        assert!(residual_check(&a, &b, Complex64::new(1.0, 0.0), &v).unwrap() < 1e-14);
        let r = residual_check(&a, &b, Complex64::new(1.0 + 1e-6, 0.0), &v).unwrap();
        let want = 1e-6 / (2.0 + (1.0 + 1e-6));
        assert!((r - want).abs() < 1e-12);
        assert!(residual_check(&a, &b, Complex64::new(1.0, 0.0), &[Complex64::new(0.0, 0.0); 2]).is_err());
    }

    #[test]
    fn conjugate_pairs_are_not_split_at_the_cutoff() {
        let c = |re, im| Complex64::new(re, im);
        let sorted = [c(1.0, 0.0), c(2.0, 1.0), c(2.0, -1.0), c(5.0, 0.0)];
        let real = c(0.0, 0.0);
        assert_eq!(keep_with_partner(&sorted, 1, real), 1);
        assert_eq!(keep_with_partner(&sorted, 2, real), 3);
        assert_eq!(keep_with_partner(&sorted, 3, real), 3);
        assert_eq!(keep_with_partner(&sorted, 4, real), 4);
        assert_eq!(keep_with_partner(&sorted, 2, c(0.0, 0.5)), 2);
        assert_eq!(keep_with_partner(&sorted[..2], 2, real), 2);

        // 2x2 rotation blocks: eigenvalues 1 ± i and 3 ± 2i
        let a = SparseMatrix::from_triplets(
            4,
            4,
            vec![
                (0, 0, 1.0),
                (0, 1, 1.0),
                (1, 0, -1.0),
                (1, 1, 1.0),
                (2, 2, 3.0),
                (2, 3, 2.0),
                (3, 2, -2.0),
                (3, 3, 3.0),
            ],
        );
        let b = SparseMatrix::identity(4);
        let opts = EigOptions { count: 1, shift: Complex64::new(0.5, 0.0), subspace: Some(4), ..Default::default() };
        for method in [Method::Dense, Method::Arnoldi] {
            let r = solve(&a, &b, &EigOptions { method, ..opts.clone() }).unwrap();
            assert_eq!(r.eigenvalues.len(), 2, "{method:?}");
            assert!((r.eigenvalues[0] - r.eigenvalues[1].conj()).norm() < 1e-10, "{method:?}");
        }
    }

    #[test]
    fn invalid_options_rejected() {
        let a = diag(&[1.0]);
        let opts = EigOptions { count: 0, ..Default::default() };
        assert!(solve(&a, &a, &opts).is_err());
        let opts = EigOptions { count: 4, subspace: Some(4), method: Method::Arnoldi, ..Default::default() };
        assert!(solve(&a, &a, &opts).is_err());
        assert_eq!(Method::parse("dense").unwrap(), Method::Dense);
        assert!(Method::parse("lanczos").is_err());
    }
}
