//! Helmholtz transmission eigenvalues `k` with `λ = k²` from the linearized
//! pencil `[[K, 0], [0, M]] x = λ [[G, -C], [M, 0]] x`, `x = (u, w)`, `w = λu`.

use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;

use crate::assembly::{assemble_pencil, BlockPencil, Coefficient};
use crate::basis1d::{build_basis, Basis1D};
use crate::dofmap::{build_dofmap, clamp_boundary, eval_on_element, DofMap};
use crate::eigsolver::{self, EigOptions, Method, SolveStats};
use crate::error::{Result, SemError};
use crate::mesh::{build_mesh, element_diameter, BoxDomain, BoxMesh};
use crate::par::Execution;

/// Eigenvalues with `|λ|` below this are the excluded `k = 0` modes.
const ZERO_LAMBDA: f64 = 1e-8;

/// Bound on `‖w - λu‖₀ / ‖w‖₀` for converged pairs.
const W_CONSISTENCY: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub domain: BoxDomain,
    pub level: usize,
    pub degree: usize,
    pub coefficient: Coefficient,
    pub k_guess: f64,
    pub eig: EigOptions,
    pub quadrature: Option<usize>,
    pub exec: Execution,
}

impl ProblemSpec {
    /// Shift `σ = (0.8 k_guess)²`, other solver options at their defaults.
    pub fn new(domain: BoxDomain, level: usize, degree: usize, coefficient: Coefficient, k_guess: f64) -> Self {
        let eig = EigOptions { shift: Complex64::new(default_shift(k_guess), 0.0), ..Default::default() };
        ProblemSpec { domain, level, degree, coefficient, k_guess, eig, quadrature: None, exec: Execution::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.domain.dim();
        if !(2..=3).contains(&d) {
            return Err(SemError::InvalidArgument(format!("transmission problems need d = 2 or 3, got {d}")));
        }
        if self.degree < 4 {
            return Err(SemError::DegreeTooSmall { degree: self.degree, m: 2, min: 4 });
        }
        if let Some(cd) = self.coefficient.dim() {
            if cd != d {
                return Err(SemError::DimensionMismatch { expected: d, got: cd });
            }
        }
        if !(self.k_guess.is_finite() && self.k_guess > 0.0) {
            return Err(SemError::InvalidArgument(format!("k_guess must be positive, got {}", self.k_guess)));
        }
        Ok(())
    }

    pub fn with_domain(&self, domain: BoxDomain) -> Self {
        ProblemSpec { domain, ..self.clone() }
    }
}

pub fn default_shift(k_guess: f64) -> f64 {
    (0.8 * k_guess).powi(2)
}

/// Degrees of freedom under both counting conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofReport {
    /// Free dofs of one field (`u` alone).
    pub per_field: usize,
    /// Pencil dimension (`u` and `w`).
    pub doubled: usize,
    /// Dofs of one field before clamping.
    pub unclamped: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timing {
    pub mesh_seconds: f64,
    pub assembly_seconds: f64,
    pub solve_seconds: f64,
}

/// A discretized problem: mesh, numbering, basis and the assembled blocks.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: BoxMesh,
    pub dofmap: DofMap,
    pub basis: Basis1D,
    pub pencil: BlockPencil,
}

impl Discretization {
    pub fn build(spec: &ProblemSpec) -> Result<(Self, Timing)> {
        spec.validate()?;
        let t0 = Instant::now();
        let mesh = build_mesh(&spec.domain, spec.level)?;
        let dofmap = clamp_boundary(&build_dofmap(&mesh, 2, spec.degree)?, &mesh);
        let basis = build_basis(2, spec.degree)?;
        let t1 = Instant::now();
        let pencil = assemble_pencil(&mesh, &dofmap, &basis, &spec.coefficient, spec.quadrature, spec.exec)?;
        let timing = Timing {
            mesh_seconds: (t1 - t0).as_secs_f64(),
            assembly_seconds: t1.elapsed().as_secs_f64(),
            solve_seconds: 0.0,
        };
        Ok((Discretization { mesh, dofmap, basis, pencil }, timing))
    }

    pub fn dofs(&self) -> DofReport {
        DofReport { per_field: self.dofmap.n_free(), doubled: self.pencil.dim(), unclamped: self.dofmap.total() }
    }

    /// `‖x‖₀ = sqrt(xᴴ M x)` for a free-dof vector of one field.
    pub fn l2_norm(&self, x: &[Complex64]) -> f64 {
        let mx = self.pencil.mass.matvec_c64(x).expect("field-sized vector");
        x.iter().zip(&mx).map(|(a, b)| (a.conj() * b).re).sum::<f64>().max(0.0).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct TransmissionResult {
    /// Sorted by real part, then imaginary part.
    pub wavenumbers: Vec<Complex64>,
    pub eigenvalues: Vec<Complex64>,
    /// `u` on the free dofs, one vector per eigenvalue.
    pub u: Vec<Vec<Complex64>>,
    pub w: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
    /// `‖w - λu‖₀ / ‖w‖₀` per pair.
    pub w_consistency: Vec<f64>,
    pub dofs: DofReport,
    pub method: Method,
    pub stats: SolveStats,
    pub timing: Timing,
    pub discretization: Discretization,
}

/// Principal square root with `Re k ≥ 0`; purely imaginary roots get `Im k ≥ 0`.
pub fn wavenumber(lambda: Complex64) -> Complex64 {
    let k = lambda.sqrt();
    if k.re < 0.0 || (k.re == 0.0 && k.im < 0.0) {
        -k
    } else {
        k
    }
}

fn cmp_k(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.partial_cmp(&b.re).expect("finite").then(a.im.partial_cmp(&b.im).expect("finite"))
}

pub fn solve_transmission(spec: &ProblemSpec) -> Result<TransmissionResult> {
    let (disc, mut timing) = Discretization::build(spec)?;
    let t = Instant::now();
    let a = disc.pencil.a_matrix();
    let b = disc.pencil.b_matrix();
    let eig = eigsolver::solve(&a, &b, &spec.eig)?;
    timing.solve_seconds = t.elapsed().as_secs_f64();

    let n = disc.pencil.n_free();
    let mut pairs: Vec<(Complex64, Complex64, Vec<Complex64>, Vec<Complex64>, f64)> = eig
        .eigenvalues
        .iter()
        .zip(eig.eigenvectors)
        .zip(&eig.residuals)
        .filter(|((l, _), _)| l.norm() >= ZERO_LAMBDA)
        .map(|((&l, v), &r)| (wavenumber(l), l, v[..n].to_vec(), v[n..].to_vec(), r))
        .collect();
    pairs.sort_by(|x, y| cmp_k(&x.0, &y.0));

    let mut w_consistency = Vec::with_capacity(pairs.len());
    for (_, l, u, w, r) in &pairs {
        let diff: Vec<Complex64> = w.iter().zip(u).map(|(wi, ui)| wi - l * ui).collect();
        let ratio = disc.l2_norm(&diff) / disc.l2_norm(w);
        if *r <= spec.eig.tol && ratio > W_CONSISTENCY {
            return Err(SemError::Solver(format!("eigenpair λ = {l} violates w = λu: relative L2 gap {ratio:.3e}")));
        }
        w_consistency.push(ratio);
    }

    let mut result = TransmissionResult {
        wavenumbers: Vec::with_capacity(pairs.len()),
        eigenvalues: Vec::with_capacity(pairs.len()),
        u: Vec::with_capacity(pairs.len()),
        w: Vec::with_capacity(pairs.len()),
        residuals: Vec::with_capacity(pairs.len()),
        w_consistency,
        dofs: disc.dofs(),
        method: eig.method,
        stats: eig.stats,
        timing,
        discretization: disc,
    };
    for (k, l, u, w, r) in pairs {
        result.wavenumbers.push(k);
        result.eigenvalues.push(l);
        result.u.push(u);
        result.w.push(w);
        result.residuals.push(r);
    }
    Ok(result)
}

fn first_wavenumbers(r: &TransmissionResult, count: usize) -> Result<Vec<Complex64>> {
    if r.wavenumbers.len() < count {
        return Err(SemError::Solver(format!("only {} wavenumbers found, need {count}", r.wavenumbers.len())));
    }
    Ok(r.wavenumbers[..count].to_vec())
}

fn max_relative_gap(x: &[Complex64], y: &[Complex64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).norm() / a.norm()).fold(0.0, f64::max)
}

/// Largest relative change of the first 4 wavenumbers when the domain is
/// translated by `offset` with the coefficient left unchanged.
pub fn translate_invariance_check(spec: &ProblemSpec, offset: &[f64]) -> Result<f64> {
    let base = solve_transmission(spec)?;
    let moved = solve_transmission(&spec.with_domain(spec.domain.translated(offset)))?;
    Ok(max_relative_gap(&first_wavenumbers(&base, 4)?, &first_wavenumbers(&moved, 4)?))
}

/// Largest relative deviation from `k(sD) = k(D)/s` over the first 4
/// wavenumbers; meaningful for constant coefficients.
pub fn scaling_check(spec: &ProblemSpec, s: f64) -> Result<f64> {
    if !spec.coefficient.is_constant() {
        return Err(SemError::Coefficient("the scaling law needs a constant coefficient".into()));
    }
    let base = solve_transmission(spec)?;
    let mut scaled = spec.with_domain(spec.domain.scaled(s));
    scaled.k_guess = spec.k_guess / s;
    scaled.eig.shift = spec.eig.shift / (s * s);
    let other = solve_transmission(&scaled)?;
    let k0 = first_wavenumbers(&base, 4)?;
    let k1: Vec<Complex64> = first_wavenumbers(&other, 4)?.into_iter().map(|k| k * s).collect();
    Ok(max_relative_gap(&k0, &k1))
}

/// Samples of one eigenfunction on a uniform grid in every element.
#[derive(Debug, Clone)]
pub struct GridSample {
    pub dim: usize,
    /// Points per axis in each element, endpoints included.
    pub grid: usize,
    /// Per element, rows of (point, value).
    pub blocks: Vec<Vec<(Vec<f64>, Complex64)>>,
}

impl GridSample {
    /// Header lines `dim`, `elements`, `grid`, then one blank-line separated
    /// block per element with rows `x_1 .. x_d re(u) im(u)`.
    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "dim {}", self.dim)?;
        writeln!(w, "elements {}", self.blocks.len())?;
        writeln!(w, "grid{}", format!(" {}", self.grid).repeat(self.dim))?;
        for block in &self.blocks {
            writeln!(w)?;
            for (x, u) in block {
                for xi in x {
                    write!(w, "{xi:.14e} ")?;
                }
                writeln!(w, "{:.14e} {:.14e}", u.re, u.im)?;
            }
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().flatten().map(|(_, u)| u.norm()).fold(0.0, f64::max)
    }
}

/// Samples `u` of eigenpair `index`, scaled to `‖u‖₀ = 1` with the largest
/// sample real and positive.
pub fn eigenfunction_sample(result: &TransmissionResult, index: usize, grid: usize) -> Result<GridSample> {
    if index >= result.u.len() {
        return Err(SemError::InvalidArgument(format!(
            "eigenpair index {index} out of range ({} available)",
            result.u.len()
        )));
    }
    if grid < 2 {
        return Err(SemError::InvalidArgument("grid needs at least 2 points per axis".into()));
    }
    let disc = &result.discretization;
    let (mesh, dm) = (&disc.mesh, &disc.dofmap);
    let u = &result.u[index];
    let full = dm.expand_free(u);
    let re: Vec<f64> = full.iter().map(|z| z.re).collect();
    let im: Vec<f64> = full.iter().map(|z| z.im).collect();
    let d = mesh.dim();
    let zero = vec![0; d];
    let npts = grid.pow(d as u32);
    let mut blocks: Vec<Vec<(Vec<f64>, Complex64)>> = Vec::with_capacity(mesh.n_elements());
    for (e, el) in mesh.elements().iter().enumerate() {
        let mut rows = Vec::with_capacity(npts);
        for p in 0..npts {
            let mut rem = p;
            let x: Vec<f64> = (0..d)
                .map(|k| {
                    let i = rem % grid;
                    rem /= grid;
                    let (a, b) = el.bounds[k];
                    a + (b - a) * i as f64 / (grid - 1) as f64
                })
                .collect();
            let v = Complex64::new(
                eval_on_element(dm, mesh, &disc.basis, &re, e, &x, &zero),
                eval_on_element(dm, mesh, &disc.basis, &im, e, &x, &zero),
            );
            rows.push((x, v));
        }
        blocks.push(rows);
    }
    let peak = blocks.iter().flatten().map(|(_, v)| *v).fold(Complex64::new(0.0, 0.0), |m, v| {
        if v.norm() > m.norm() {
            v
        } else {
            m
        }
    });
    let norm = disc.l2_norm(u);
    if norm == 0.0 || peak.norm() == 0.0 {
        return Err(SemError::Solver(format!("eigenfunction {index} vanishes")));
    }
    let scale = (peak.conj() / peak.norm()) / norm;
    for (_, v) in blocks.iter_mut().flatten() {
        *v *= scale;
    }
    Ok(GridSample { dim: d, grid, blocks })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub degree: usize,
    pub level: usize,
    pub h: f64,
    pub dofs: DofReport,
    pub wavenumbers: Vec<Complex64>,
    /// `|k_1 - k_1(previous row)|`.
    pub k1_change: Option<f64>,
}

/// Solves `template` once per `(degree, level)` pair.
pub fn convergence_table(template: &ProblemSpec, sweep: &[(usize, usize)]) -> Result<Vec<ConvergenceRow>> {
    let rows = template.exec.map(sweep, |&(degree, level)| -> Result<ConvergenceRow> {
        let spec = ProblemSpec { degree, level, ..template.clone() };
        let r = solve_transmission(&spec)?;
        Ok(ConvergenceRow {
            degree,
            level,
            h: element_diameter(&r.discretization.mesh),
            dofs: r.dofs,
            wavenumbers: r.wavenumbers,
            k1_change: None,
        })
    });
    let mut out: Vec<ConvergenceRow> = rows.into_iter().collect::<Result<_>>()?;
    for i in 1..out.len() {
        if let (Some(a), Some(b)) = (out[i - 1].wavenumbers.first(), out[i].wavenumbers.first()) {
            out[i].k1_change = Some((a - b).norm());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(n: usize) -> ProblemSpec {
        let mut spec = ProblemSpec::new(BoxDomain::cube(2, -0.5, 0.5), 0, n, Coefficient::Constant(16.0), 1.9);
        spec.eig.count = 6;
        spec
    }

    #[test]
    fn branch_of_square_root() {
        assert_eq!(wavenumber(Complex64::new(4.0, 0.0)), Complex64::new(2.0, 0.0));
        assert_eq!(wavenumber(Complex64::new(-4.0, 0.0)), Complex64::new(0.0, 2.0));
        let k = wavenumber(Complex64::new(3.0, -2.0));
        assert!(k.re > 0.0 && k.im < 0.0);
        assert!((k * k - Complex64::new(3.0, -2.0)).norm() < 1e-14);
    }

    #[test]
    fn unit_square_first_wavenumbers() {
        let r = solve_transmission(&unit_square(15)).unwrap();
        let want = [1.87959117836, 2.4442361007, 2.4442361007, 2.86643909864, 3.14011071773664];
        for (k, w) in r.wavenumbers.iter().zip(want) {
            assert!((k.re - w).abs() / w < 1e-6 && k.im.abs() < 1e-8, "{k} vs {w}");
        }
        assert_eq!(r.dofs, DofReport { per_field: 144, doubled: 288, unclamped: 256 });
        for (k, l) in r.wavenumbers.iter().zip(&r.eigenvalues) {
            assert!((k * k - l).norm() <= 1e-12 * l.norm());
        }
        assert!(r.w_consistency.iter().all(|c| *c < 1e-6));
    }

    #[test]
    fn shift_invert_matches_dense_on_the_pencil() {
        let mut spec = unit_square(15);
        spec.eig = EigOptions { count: 5, shift: Complex64::new(2.0, 0.0), ..Default::default() };
        let (disc, _) = Discretization::build(&spec).unwrap();
        let (a, b) = (disc.pencil.a_matrix(), disc.pencil.b_matrix());
        let dense = eigsolver::solve_dense(&a.to_dense(), &b.to_dense(), &spec.eig).unwrap();
        let si = eigsolver::solve_shift_invert(&a, &b, &spec.eig).unwrap();
        for l in &dense.eigenvalues {
            let d = si.eigenvalues.iter().map(|m| (l - m).norm() / l.norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-9, "{l}: {d:e}");
        }
    }

    #[test]
    fn translation_and_scaling() {
        let spec = unit_square(10);
        assert!(translate_invariance_check(&spec, &[0.5, 0.5]).unwrap() < 1e-9);
        assert!(scaling_check(&spec, 2.0).unwrap() < 1e-9);
        let mut f1 = spec.clone();
        f1.coefficient = Coefficient::parse("affine 8 1 -1").unwrap();
        f1.k_guess = 2.8;
        f1.eig.shift = Complex64::new(default_shift(2.8), 0.0);
        // x_1 - x_2 is invariant along (1, 1), so move along x_1 only
        assert!(translate_invariance_check(&f1, &[0.5, 0.0]).unwrap() > 1e-4);
        assert!(scaling_check(&f1, 2.0).is_err());
    }

    #[test]
    fn eigenfunction_dump() {
        let r = solve_transmission(&unit_square(10)).unwrap();
        let s = eigenfunction_sample(&r, 0, 9).unwrap();
        assert_eq!(s.blocks.len(), 1);
        assert_eq!(s.blocks[0].len(), 81);
        let mut peak_is_real = false;
        for (x, u) in &s.blocks[0] {
            if x.iter().any(|c| (c.abs() - 0.5).abs() < 1e-14) {
                assert!(u.norm() < 1e-8);
            }
            if (u.norm() - s.max_abs()).abs() < 1e-15 {
                peak_is_real = u.im.abs() < 1e-14 && u.re > 0.0;
            }
        }
        assert!(peak_is_real);
        let mut buf = Vec::new();
        s.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(&lines[..3], &["dim 2", "elements 1", "grid 9 9"]);
        assert_eq!(lines[4].split_whitespace().count(), 4);
        assert!(eigenfunction_sample(&r, 99, 9).is_err());
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = unit_square(3);
        assert!(solve_transmission(&spec).is_err());
        spec.degree = 8;
        spec.domain = BoxDomain::cube(1, 0.0, 1.0);
        assert!(solve_transmission(&spec).is_err());
        let mut spec = unit_square(8);
        spec.coefficient = Coefficient::Constant(1.0);
        assert!(solve_transmission(&spec).is_err());
    }
}
