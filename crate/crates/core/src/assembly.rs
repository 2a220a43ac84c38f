//! Matrices of the H² transmission eigenvalue discretization.
//!
//! With `a = 1/(n-1)` and `b = n/(n-1)` the blocks over the free dofs are
//!
//! ```text
//! K = (a Δφ_j, Δφ_i)
//! M = (φ_j, φ_i)
//! G = ((a + b) ∇φ_j, ∇φ_i) + (∇a · (φ_j ∇φ_i + φ_i ∇φ_j), 1)
//! C = (b φ_j, φ_i)
//! ```
//!
//! and the eigenproblem is `A x = λ B x` with `A = [[K, 0], [0, M]]`,
//! `B = [[G, -C], [M, 0]]`, `x = (u, w)`, `w = λ u`.
//!
//! Element integrals use tensor Gauss rules. Constant coefficients reduce
//! every term to a Kronecker product of 1-D matrices; otherwise the terms are
//! evaluated by sum factorization over the quadrature grid.

use std::fmt;
use std::io::BufWriter;
use std::path::Path;

use crate::basis1d::{Basis1D, BasisTable, RefTable};
use crate::dofmap::DofMap;
use crate::error::{Result, SemError};
use crate::mesh::BoxMesh;
use crate::orthopoly::gauss_legendre;
use crate::par::Execution;
use crate::sparse::SparseMatrix;
use crate::tensor::apply_along_axis;

/// Entries below this fraction of the largest entry of a block are dropped.
pub const DROP_TOL: f64 = 1e-14;

/// Index of refraction `n(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Constant(f64),
    /// `c0 + Σ c_i x_i`
    Affine {
        c0: f64,
        c: Vec<f64>,
    },
    /// `c0 + exp(Σ c_i x_i)`
    ExpAffine {
        c0: f64,
        c: Vec<f64>,
    },
}

impl Coefficient {
    /// Parses `constant c`, `affine c0 c1 .. cd` or `exp-affine c0 c1 .. cd`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut it = s.split_whitespace();
        let kind = it.next().ok_or_else(|| SemError::Coefficient("empty coefficient".into()))?;
        let nums = it
            .map(|t| t.parse::<f64>().map_err(|_| SemError::Coefficient(format!("not a number: {t:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        match kind {
            "constant" if nums.len() == 1 => Ok(Coefficient::Constant(nums[0])),
            "affine" if nums.len() >= 2 => Ok(Coefficient::Affine { c0: nums[0], c: nums[1..].to_vec() }),
            "exp-affine" if nums.len() >= 2 => Ok(Coefficient::ExpAffine { c0: nums[0], c: nums[1..].to_vec() }),
            "constant" | "affine" | "exp-affine" => {
                Err(SemError::Coefficient(format!("wrong number of parameters in {s:?}")))
            }
            other => Err(SemError::Coefficient(format!("unknown kind {other:?}"))),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Coefficient::Constant(_))
    }

    /// Spatial dimension the coefficient was written for, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Coefficient::Constant(_) => None,
            Coefficient::Affine { c, .. } | Coefficient::ExpAffine { c, .. } => Some(c.len()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Coefficient::Constant(v) => *v,
            Coefficient::Affine { c0, c } => c0 + c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>(),
            Coefficient::ExpAffine { c0, c } => c0 + c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().exp(),
        }
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Coefficient::Constant(_) => vec![0.0; x.len()],
            Coefficient::Affine { c, .. } => c.clone(),
            Coefficient::ExpAffine { c, .. } => {
                let e = c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().exp();
                c.iter().map(|ci| ci * e).collect()
            }
        }
    }

    /// Default Gauss points per direction for degree `n`.
    pub fn default_quadrature(&self, n: usize) -> usize {
        match self {
            Coefficient::ExpAffine { .. } => n + 4,
            _ => n + 2,
        }
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, c0, c) = match self {
            Coefficient::Constant(v) => return write!(f, "constant {v}"),
            Coefficient::Affine { c0, c } => ("affine", c0, c),
            Coefficient::ExpAffine { c0, c } => ("exp-affine", c0, c),
        };
        write!(f, "{kind} {c0}")?;
        for v in c {
            write!(f, " {v}")?;
        }
        Ok(())
    }
}

/// One integral `∫ coef · ∂^α φ_i · ∂^β φ_j` with `i` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Weight {
    One,
    A,
    B,
    APlusB,
    GradA(usize),
}

#[derive(Debug, Clone)]
struct Term {
    alpha: Vec<usize>,
    beta: Vec<usize>,
    weight: Weight,
    /// Also add the transposed contribution.
    mirrored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    K,
    M,
    G,
    C,
}

fn unit(d: usize, k: usize, s: usize) -> Vec<usize> {
    let mut v = vec![0; d];
    v[k] = s;
    v
}

fn terms(block: Block, d: usize, constant: bool) -> Vec<Term> {
    let zero = vec![0; d];
    match block {
        Block::K => {
            let mut out = Vec::new();
            for k in 0..d {
                for l in k..d {
                    out.push(Term { alpha: unit(d, k, 2), beta: unit(d, l, 2), weight: Weight::A, mirrored: k != l });
                }
            }
            out
        }
        Block::M => vec![Term { alpha: zero.clone(), beta: zero, weight: Weight::One, mirrored: false }],
        Block::C => vec![Term { alpha: zero.clone(), beta: zero, weight: Weight::B, mirrored: false }],
        Block::G => {
            let mut out: Vec<Term> = (0..d)
                .map(|k| Term { alpha: unit(d, k, 1), beta: unit(d, k, 1), weight: Weight::APlusB, mirrored: false })
                .collect();
            if !constant {
                for k in 0..d {
                    out.push(Term {
                        alpha: unit(d, k, 1),
                        beta: zero.clone(),
                        weight: Weight::GradA(k),
                        mirrored: true,
                    });
                }
            }
            out
        }
    }
}

/// Dense local blocks over all `(N+1)^d` tensor functions of one element,
/// row-major. `M0` of the pencil equals `m`.
#[derive(Debug, Clone)]
pub struct ElementBlocks {
    pub size: usize,
    pub k: Vec<f64>,
    pub m: Vec<f64>,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
}

impl ElementBlocks {
    pub fn m0(&self) -> &[f64] {
        &self.m
    }
}

/// Coefficient data on the tensor quadrature grid of one element.
struct Grid {
    /// product weights
    w: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    grad_a: Vec<Vec<f64>>,
}

fn coefficient_grid(tables: &[BasisTable], coeff: &Coefficient) -> Result<Grid> {
    let d = tables.len();
    let nq = tables[0].n_points();
    let total = nq.pow(d as u32);
    let mut g = Grid {
        w: Vec::with_capacity(total),
        a: Vec::with_capacity(total),
        b: Vec::with_capacity(total),
        grad_a: vec![Vec::with_capacity(total); d],
    };
    let mut x = vec![0.0; d];
    for flat in 0..total {
        let mut rem = flat;
        let mut w = 1.0;
        for k in 0..d {
            let i = rem % nq;
            rem /= nq;
            x[k] = tables[k].nodes()[i];
            w *= tables[k].weights()[i];
        }
        let n = coeff.eval(&x);
        check_contrast(n, &x)?;
        let a = 1.0 / (n - 1.0);
        g.w.push(w);
        g.a.push(a);
        g.b.push(n * a);
        for (k, dn) in coeff.grad(&x).into_iter().enumerate() {
            g.grad_a[k].push(-a * a * dn);
        }
    }
    Ok(g)
}

fn check_contrast(n: f64, x: &[f64]) -> Result<()> {
    if !n.is_finite() || (n - 1.0).abs() < 1e-8 {
        let at = if x.is_empty() { String::new() } else { format!(" at {x:?}") };
        return Err(SemError::Coefficient(format!("n - 1 = {:e}{at} is too close to zero", n - 1.0)));
    }
    Ok(())
}

fn grid_weight(g: &Grid, w: Weight) -> Vec<f64> {
    let f: Box<dyn Fn(usize) -> f64> = match w {
        Weight::One => Box::new(|q| g.w[q]),
        Weight::A => Box::new(|q| g.w[q] * g.a[q]),
        Weight::B => Box::new(|q| g.w[q] * g.b[q]),
        Weight::APlusB => Box::new(|q| g.w[q] * (g.a[q] + g.b[q])),
        Weight::GradA(k) => Box::new(move |q| g.w[q] * g.grad_a[k][q]),
    };
    (0..g.w.len()).map(f).collect()
}

/// Sum factorization of `Σ_q c_q Π_k T_k[α_k][i_k][q_k] T_k[β_k][j_k][q_k]`
/// over the active index sets; returns a row-major `A x A` matrix.
fn term_dense(tables: &[BasisTable], active: &[Vec<usize>], term: &Term, grid: &[f64]) -> Vec<f64> {
    let d = tables.len();
    let nq = tables[0].n_points();
    let mut data = grid.to_vec();
    let mut shape = vec![nq; d];
    for k in 0..d {
        let s = &active[k];
        let ta: Vec<&[f64]> = s.iter().map(|&i| tables[k].row(term.alpha[k], i)).collect();
        let tb: Vec<&[f64]> = s.iter().map(|&j| tables[k].row(term.beta[k], j)).collect();
        let ns = s.len();
        let mut mat = vec![0.0; ns * ns * nq];
        for j in 0..ns {
            for i in 0..ns {
                let row = &mut mat[(i + ns * j) * nq..(i + ns * j + 1) * nq];
                for q in 0..nq {
                    row[q] = ta[i][q] * tb[j][q];
                }
            }
        }
        let (next, sh) = apply_along_axis(&data, &shape, k, &mat, ns * ns);
        data = next;
        shape = sh;
    }
    let sizes: Vec<usize> = active.iter().map(|s| s.len()).collect();
    let n_act: usize = sizes.iter().product();
    let mut out = vec![0.0; n_act * n_act];
    for (flat, v) in data.into_iter().enumerate() {
        let mut rem = flat;
        let (mut row, mut col, mut stride) = (0, 0, 1);
        for &ns in &sizes {
            let p = rem % (ns * ns);
            rem /= ns * ns;
            row += (p % ns) * stride;
            col += (p / ns) * stride;
            stride *= ns;
        }
        out[row * n_act + col] += v;
        if term.mirrored {
            out[col * n_act + row] += v;
        }
    }
    out
}

/// `D[i][j] = Σ_q w_q T[s][i][q] T[t][j][q]` restricted to `active`.
fn matrix_1d(t: &BasisTable, active: &[usize], s: usize, u: usize) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for (ii, &i) in active.iter().enumerate() {
        for (jj, &j) in active.iter().enumerate() {
            let (ri, rj) = (t.row(s, i), t.row(u, j));
            let v: f64 = (0..t.n_points()).map(|q| t.weights()[q] * ri[q] * rj[q]).sum();
            out.push((ii, jj, v));
        }
    }
    let max = out.iter().fold(0.0f64, |m, e| m.max(e.2.abs()));
    out.retain(|e| e.2.abs() > DROP_TOL * max);
    out
}

/// Kronecker product of per-axis sparse factors, in active-local indices.
fn term_kron(
    tables: &[BasisTable],
    active: &[Vec<usize>],
    term: &Term,
    scale: f64,
    out: &mut Vec<(usize, usize, f64)>,
) {
    let factors: Vec<Vec<(usize, usize, f64)>> =
        (0..tables.len()).map(|k| matrix_1d(&tables[k], &active[k], term.alpha[k], term.beta[k])).collect();
    let mut acc: Vec<(usize, usize, f64)> = vec![(0, 0, scale)];
    let mut stride = 1;
    for (k, f) in factors.iter().enumerate() {
        let mut next = Vec::with_capacity(acc.len() * f.len());
        for &(r, c, v) in &acc {
            for &(i, j, w) in f {
                next.push((r + i * stride, c + j * stride, v * w));
            }
        }
        acc = next;
        stride *= active[k].len();
    }
    if term.mirrored {
        out.extend(acc.iter().map(|&(r, c, v)| (c, r, v)));
    }
    out.extend(acc);
}

fn physical_tables(reference: &RefTable, bounds: &[(f64, f64)]) -> Vec<BasisTable> {
    bounds.iter().map(|&(a, b)| reference.scaled(a, b)).collect()
}

/// Dense local blocks of one element over every tensor function.
pub fn element_matrices(
    bounds: &[(f64, f64)],
    basis: &Basis1D,
    coeff: &Coefficient,
    q: usize,
) -> Result<ElementBlocks> {
    let reference = RefTable::new(basis, &gauss_legendre(q), 2);
    let tables = physical_tables(&reference, bounds);
    let d = bounds.len();
    let active: Vec<Vec<usize>> = vec![(0..basis.len()).collect(); d];
    let grid = coefficient_grid(&tables, coeff)?;
    let block = |b: Block| {
        let size = basis.len().pow(d as u32);
        let mut acc = vec![0.0; size * size];
        for t in terms(b, d, false) {
            let part = term_dense(&tables, &active, &t, &grid_weight(&grid, t.weight));
            acc.iter_mut().zip(part).for_each(|(x, y)| *x += y);
        }
        acc
    };
    Ok(ElementBlocks {
        size: basis.len().pow(d as u32),
        k: block(Block::K),
        m: block(Block::M),
        g: block(Block::G),
        c: block(Block::C),
    })
}

/// The four distinct blocks of the pencil over the free dofs of one field.
#[derive(Debug, Clone)]
pub struct BlockPencil {
    pub k: SparseMatrix,
    pub mass: SparseMatrix,
    pub g: SparseMatrix,
    pub c: SparseMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

impl BlockPencil {
    /// Free dofs per field.
    pub fn n_free(&self) -> usize {
        self.mass.nrows()
    }

    /// Pencil dimension, twice the free dofs.
    pub fn dim(&self) -> usize {
        2 * self.n_free()
    }

    pub fn a_matrix(&self) -> SparseMatrix {
        SparseMatrix::from_blocks(&[vec![Some((&self.k, 1.0)), None], vec![None, Some((&self.mass, 1.0))]])
    }

    pub fn b_matrix(&self) -> SparseMatrix {
        SparseMatrix::from_blocks(&[
            vec![Some((&self.g, 1.0)), Some((&self.c, -1.0))],
            vec![Some((&self.mass, 1.0)), None],
        ])
    }

    /// Block application without forming the block matrices.
    pub fn apply(&self, side: Side, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n_free();
        if x.len() != 2 * n {
            return Err(SemError::DimensionMismatch { expected: 2 * n, got: x.len() });
        }
        let (u, w) = x.split_at(n);
        let (top, bottom) = match side {
            Side::A => (self.k.matvec(u)?, self.mass.matvec(w)?),
            Side::B => {
                let gu = self.g.matvec(u)?;
                let cw = self.c.matvec(w)?;
                (gu.iter().zip(&cw).map(|(a, b)| a - b).collect(), self.mass.matvec(u)?)
            }
        };
        Ok(top.into_iter().chain(bottom).collect())
    }

    /// Writes `K.mtx`, `M.mtx`, `G.mtx`, `C.mtx` into `dir`.
    pub fn write_matrix_market(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, m, what) in [
            ("K", &self.k, "K = (a lap u, lap v), a = 1/(n-1)"),
            ("M", &self.mass, "M = (u, v), also M0"),
            ("G", &self.g, "G = (grad(a u), grad v) + (grad u, grad(b v)), b = n/(n-1)"),
            ("C", &self.c, "C = (b u, v)"),
        ] {
            let f = std::fs::File::create(dir.join(format!("{name}.mtx")))?;
            m.write_matrix_market(BufWriter::new(f), &format!("block {name}\n{what}"))?;
        }
        Ok(())
    }
}

type Triplets = Vec<(usize, usize, f64)>;

/// Element contributions to K, M, G, C in free-dof indices.
fn element_triplets(
    e: usize,
    mesh: &BoxMesh,
    dm: &DofMap,
    reference: &RefTable,
    coeff: &Coefficient,
) -> Result<[Triplets; 4]> {
    let d = mesh.dim();
    let n1 = dm.degree() + 1;
    let el = &mesh.elements()[e];
    let dofs = dm.element_dofs(e);

    let mut active: Vec<Vec<usize>> = vec![Vec::new(); d];
    for k in 0..d {
        let stride = n1.pow(k as u32);
        for j in 0..n1 {
            let any_free =
                (0..dofs.len()).filter(|flat| flat / stride % n1 == j).any(|flat| dm.free_index(dofs[flat]).is_some());
            if any_free {
                active[k].push(j);
            }
        }
    }
    if active.iter().any(|s| s.is_empty()) {
        return Ok(Default::default());
    }
    // active-local index -> free dof
    let sizes: Vec<usize> = active.iter().map(|s| s.len()).collect();
    let n_act: usize = sizes.iter().product();
    let to_free: Vec<Option<usize>> = (0..n_act)
        .map(|flat| {
            let mut rem = flat;
            let mut local = 0;
            for k in 0..d {
                local += active[k][rem % sizes[k]] * n1.pow(k as u32);
                rem /= sizes[k];
            }
            dm.free_index(dofs[local])
        })
        .collect();

    let tables = physical_tables(reference, &el.bounds);
    let mut out: [Triplets; 4] = Default::default();
    let blocks = [Block::K, Block::M, Block::G, Block::C];

    let mut push = |slot: usize, local: Triplets| {
        let max = local.iter().fold(0.0f64, |m, t| m.max(t.2.abs()));
        out[slot].extend(local.into_iter().filter_map(|(r, c, v)| {
            if v.abs() <= DROP_TOL * max {
                return None;
            }
            Some((to_free[r]?, to_free[c]?, v))
        }));
    };

    if let Coefficient::Constant(n) = *coeff {
        check_contrast(n, &[])?;
        let a = 1.0 / (n - 1.0);
        let b = n * a;
        for (slot, &blk) in blocks.iter().enumerate() {
            let mut local = Vec::new();
            for t in terms(blk, d, true) {
                let scale = match t.weight {
                    Weight::One => 1.0,
                    Weight::A => a,
                    Weight::B => b,
                    Weight::APlusB => a + b,
                    Weight::GradA(_) => 0.0,
                };
                term_kron(&tables, &active, &t, scale, &mut local);
            }
            push(slot, local);
        }
    } else {
        let grid = coefficient_grid(&tables, coeff)?;
        for (slot, &blk) in blocks.iter().enumerate() {
            let mut acc = vec![0.0; n_act * n_act];
            for t in terms(blk, d, false) {
                let part = term_dense(&tables, &active, &t, &grid_weight(&grid, t.weight));
                acc.iter_mut().zip(part).for_each(|(x, y)| *x += y);
            }
            let local = acc
                .into_iter()
                .enumerate()
                .filter(|(_, v)| *v != 0.0)
                .map(|(f, v)| (f / n_act, f % n_act, v))
                .collect();
            push(slot, local);
        }
    }
    Ok(out)
}

/// Rejects coefficients whose contrast `n - 1` changes sign over the quadrature points.
fn check_sign(mesh: &BoxMesh, coeff: &Coefficient, q: usize) -> Result<()> {
    if let Some(cd) = coeff.dim() {
        if cd != mesh.dim() {
            return Err(SemError::DimensionMismatch { expected: mesh.dim(), got: cd });
        }
    }
    let rule = gauss_legendre(q);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let d = mesh.dim();
    for el in mesh.elements() {
        let total = q.pow(d as u32);
        let mut x = vec![0.0; d];
        for flat in 0..total {
            let mut rem = flat;
            for (k, &(a, b)) in el.bounds.iter().enumerate() {
                x[k] = (a + b) / 2.0 + (b - a) / 2.0 * rule.nodes()[rem % q];
                rem /= q;
            }
            let c = coeff.eval(&x) - 1.0;
            lo = lo.min(c);
            hi = hi.max(c);
        }
        if coeff.is_constant() {
            break;
        }
    }
    if lo < 0.0 && hi > 0.0 {
        return Err(SemError::Coefficient(format!("n - 1 changes sign on the domain (range [{lo:e}, {hi:e}])")));
    }
    Ok(())
}

/// Assembles K, M, G, C over the free dofs of a clamped dofmap (`m = 2`).
pub fn assemble_pencil(
    mesh: &BoxMesh,
    dm: &DofMap,
    basis: &Basis1D,
    coeff: &Coefficient,
    quadrature: Option<usize>,
    exec: Execution,
) -> Result<BlockPencil> {
    if dm.m() != 2 || basis.m() != 2 {
        return Err(SemError::InvalidArgument("the transmission forms need m = 2".into()));
    }
    if basis.degree() != dm.degree() {
        return Err(SemError::DimensionMismatch { expected: dm.degree(), got: basis.degree() });
    }
    let q = quadrature.unwrap_or_else(|| coeff.default_quadrature(basis.degree()));
    check_sign(mesh, coeff, q)?;
    let reference = RefTable::new(basis, &gauss_legendre(q), 2);
    let parts = exec.map_range(mesh.n_elements(), |e| element_triplets(e, mesh, dm, &reference, coeff));
    let mut all: [Triplets; 4] = Default::default();
    for p in parts {
        for (slot, t) in p?.into_iter().enumerate() {
            all[slot].extend(t);
        }
    }
    let n = dm.n_free();
    let [k, m, g, c] = all;
    Ok(BlockPencil {
        k: SparseMatrix::from_triplets(n, n, k),
        mass: SparseMatrix::from_triplets(n, n, m),
        g: SparseMatrix::from_triplets(n, n, g),
        c: SparseMatrix::from_triplets(n, n, c),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis1d::build_basis;
    use crate::dofmap::{build_dofmap, clamp_boundary};
    use crate::mesh::{build_mesh, BoxDomain};

    fn setup(dom: &BoxDomain, level: usize, n: usize) -> (BoxMesh, DofMap, Basis1D) {
        let mesh = build_mesh(dom, level).unwrap();
        let dm = clamp_boundary(&build_dofmap(&mesh, 2, n).unwrap(), &mesh);
        (mesh, dm, build_basis(2, n).unwrap())
    }

    #[test]
    fn coefficient_parsing_and_display() {
        assert_eq!(Coefficient::parse("constant 16").unwrap(), Coefficient::Constant(16.0));
        let f1 = Coefficient::parse("affine 8 1 -1").unwrap();
        assert_eq!(f1.eval(&[0.25, -0.5]), 8.75);
        assert_eq!(f1.to_string(), "affine 8 1 -1");
        let f2 = Coefficient::parse("exp-affine 4 1 1").unwrap();
        assert!((f2.eval(&[0.3, 0.2]) - (4.0 + 0.5f64.exp())).abs() < 1e-15);
        assert_eq!(Coefficient::parse(&f2.to_string()).unwrap(), f2);
        assert!(Coefficient::parse("constant").is_err());
        assert!(Coefficient::parse("cubic 1 2").is_err());
        assert!(Coefficient::parse("affine 1 x").is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-6;
        for c in [Coefficient::parse("affine 8 1 -1").unwrap(), Coefficient::parse("exp-affine 4 1 1").unwrap()] {
            let x = [0.2, -0.4];
            let g = c.grad(&x);
            for k in 0..2 {
                let mut p = x;
                let mut m = x;
                p[k] += h;
                m[k] -= h;
                let fd = (c.eval(&p) - c.eval(&m)) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn one_d_biharmonic_bubble_entry() {
        let b = build_basis(2, 4).unwrap();
        let blocks = element_matrices(&[(-1.0, 1.0)], &b, &Coefficient::Constant(2.0), 6).unwrap();
        let scalar: f64 = 105.0 / 8.0;
        assert!((blocks.k[4 * 5 + 4] * scalar * scalar - 4410.0).abs() < 1e-9);
    }

    /// `∫ ∂^s φ_i ∂^t φ_j` on one interval by direct quadrature.
    fn gram_1d(b: &Basis1D, lo: f64, hi: f64, s: usize, t: usize) -> Vec<f64> {
        let sb = crate::basis1d::scale_basis(b, lo, hi).unwrap();
        let rule = gauss_legendre(b.degree() + 2);
        let h = (hi - lo) / 2.0;
        let n1 = b.len();
        let mut out = vec![0.0; n1 * n1];
        for i in 0..n1 {
            for j in 0..n1 {
                out[i * n1 + j] = rule.integrate(|xr| {
                    let x = lo + h * (xr + 1.0);
                    h * sb.eval(i, x, s) * sb.eval(j, x, t)
                });
            }
        }
        out
    }

    #[test]
    fn constant_coefficient_blocks_are_kronecker_sums() {
        let b = build_basis(2, 6).unwrap();
        let n1 = b.len();
        let (x0, x1, y0, y1) = (0.0, 0.5, -1.0, 0.0);
        let el = element_matrices(&[(x0, x1), (y0, y1)], &b, &Coefficient::Constant(16.0), 8).unwrap();
        let gx = |s, t| gram_1d(&b, x0, x1, s, t);
        let gy = |s, t| gram_1d(&b, y0, y1, s, t);
        let (mx, my) = (gx(0, 0), gy(0, 0));
        let (sx, sy) = (gx(1, 1), gy(1, 1));
        let (kx, ky) = (gx(2, 2), gy(2, 2));
        let (x20, y02, x02, y20) = (gx(2, 0), gy(0, 2), gx(0, 2), gy(2, 0));
        let (a, bb) = (1.0 / 15.0, 16.0 / 15.0);
        let n = n1 * n1;
        let mut worst = [0.0f64; 4];
        for iy in 0..n1 {
            for ix in 0..n1 {
                for jy in 0..n1 {
                    for jx in 0..n1 {
                        let (i, j) = (ix + n1 * iy, jx + n1 * jy);
                        let (px, py) = (ix * n1 + jx, iy * n1 + jy);
                        let m = mx[px] * my[py];
                        let k = a * (kx[px] * my[py] + x20[px] * y02[py] + x02[px] * y20[py] + mx[px] * ky[py]);
                        let g = (a + bb) * (sx[px] * my[py] + mx[px] * sy[py]);
                        let c = bb * m;
                        for (w, (got, want)) in worst.iter_mut().zip([
                            (el.m[i * n + j], m),
                            (el.k[i * n + j], k),
                            (el.g[i * n + j], g),
                            (el.c[i * n + j], c),
                        ]) {
                            *w = w.max((got - want).abs() / (1.0 + want.abs()));
                        }
                    }
                }
            }
        }
        assert!(worst[0] < 1e-11, "{worst:?}");
        assert!(worst.iter().all(|w| *w < 1e-10), "{worst:?}");
        assert_eq!(el.m0(), &el.m[..]);
    }

    #[test]
    fn kron_and_sum_factorized_paths_agree() {
        let (mesh, dm, b) = setup(&BoxDomain::l_shape_2d(), 0, 7);
        let kron = assemble_pencil(&mesh, &dm, &b, &Coefficient::Constant(16.0), None, Execution::Sequential).unwrap();
        // affine with zero slope forces the general path
        let flat = Coefficient::Affine { c0: 16.0, c: vec![0.0, 0.0] };
        let general = assemble_pencil(&mesh, &dm, &b, &flat, None, Execution::Sequential).unwrap();
        for (x, y) in [(&kron.k, &general.k), (&kron.mass, &general.mass), (&kron.g, &general.g), (&kron.c, &general.c)]
        {
            let diff = SparseMatrix::linear_combination(&[(x, 1.0), (y, -1.0)]);
            assert!(diff.max_abs() < 1e-11 * x.max_abs(), "{:e}", diff.max_abs());
        }
    }

    #[test]
    fn pencil_dimensions_match_dof_counts() {
        let (mesh, dm, b) = setup(&BoxDomain::cube(2, -0.5, 0.5), 0, 15);
        let p = assemble_pencil(&mesh, &dm, &b, &Coefficient::Constant(16.0), None, Execution::default()).unwrap();
        assert_eq!(p.dim(), 288);
        let (mesh, dm, b) = setup(&BoxDomain::l_shape_2d(), 0, 15);
        let p = assemble_pencil(&mesh, &dm, &b, &Coefficient::Constant(16.0), None, Execution::default()).unwrap();
        assert_eq!(p.dim(), 960);
    }

    #[test]
    fn symmetry_and_positive_mass_diagonal() {
        let (mesh, dm, b) = setup(&BoxDomain::l_shape_2d(), 1, 6);
        for coeff in ["constant 16", "affine 8 1 -1", "exp-affine 4 1 1"] {
            let c = Coefficient::parse(coeff).unwrap();
            let p = assemble_pencil(&mesh, &dm, &b, &c, None, Execution::default()).unwrap();
            assert!(p.k.asymmetry() < 1e-10, "{coeff}");
            assert!(p.g.asymmetry() < 1e-10, "{coeff} {:e}", p.g.asymmetry());
            assert!(p.mass.asymmetry() < 1e-12);
            assert!(p.c.asymmetry() < 1e-10);
            assert!(p.a_matrix().asymmetry() < 1e-10);
            assert!((0..p.n_free()).all(|i| p.mass.get(i, i) > 0.0));
        }
    }

    #[test]
    fn c_is_scaled_mass_for_constant_n() {
        let (mesh, dm, b) = setup(&BoxDomain::cube(2, -0.5, 0.5), 0, 9);
        let p = assemble_pencil(&mesh, &dm, &b, &Coefficient::Constant(16.0), None, Execution::default()).unwrap();
        let diff = SparseMatrix::linear_combination(&[(&p.c, 1.0), (&p.mass, -16.0 / 15.0)]);
        assert!(diff.max_abs() <= 1e-15 * p.c.max_abs());
    }

    #[test]
    fn apply_matches_block_matrices() {
        let (mesh, dm, b) = setup(&BoxDomain::l_shape_2d(), 0, 6);
        let p =
            assemble_pencil(&mesh, &dm, &b, &Coefficient::parse("affine 8 1 -1").unwrap(), None, Execution::default())
                .unwrap();
        let n = p.dim();
        assert!(p.apply(Side::A, &vec![0.0; n]).unwrap().iter().all(|v| *v == 0.0));
        assert!(p.apply(Side::A, &[1.0]).is_err());
        let x: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        for (side, mat) in [(Side::A, p.a_matrix()), (Side::B, p.b_matrix())] {
            let y = p.apply(side, &x).unwrap();
            let dense = mat.to_dense();
            for r in 0..n {
                let want: f64 = (0..n).map(|c| dense[(r, c)] * x[c]).sum();
                assert!((y[r] - want).abs() <= 1e-12 * (1.0 + want.abs()));
            }
        }
        let col = p.apply(Side::A, &(0..n).map(|i| if i == 3 { 1.0 } else { 0.0 }).collect::<Vec<_>>()).unwrap();
        for r in 0..n {
            assert_eq!(col[r], p.a_matrix().get(r, 3));
        }
    }

    #[test]
    fn k_annihilates_harmonic_polynomials() {
        use crate::interp::{interp_global, Polynomial};
        let mesh = build_mesh(&BoxDomain::l_shape_2d(), 1).unwrap();
        let dm = build_dofmap(&mesh, 2, 5).unwrap();
        let b = build_basis(2, 5).unwrap();
        // unclamped K over all dofs
        let p = assemble_pencil(&mesh, &dm, &b, &Coefficient::Constant(16.0), None, Execution::default()).unwrap();
        let bilinear = Polynomial { dim: 2, terms: vec![(1.0, vec![1, 1]), (2.0, vec![1, 0]), (-1.0, vec![0, 0])] };
        let x =
            interp_global(&bilinear, &mesh, &dm, &b, &crate::interp::default_rule(&b), Execution::default()).unwrap();
        let kx = p.k.matvec(&x).unwrap();
        let energy: f64 = kx.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!(energy.abs() < 1e-10);
        // x² - y² is harmonic but its Hessian is not zero
        let harm = Polynomial { dim: 2, terms: vec![(1.0, vec![2, 0]), (-1.0, vec![0, 2])] };
        let x = interp_global(&harm, &mesh, &dm, &b, &crate::interp::default_rule(&b), Execution::default()).unwrap();
        let kx = p.k.matvec(&x).unwrap();
        assert!(kx.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn degenerate_coefficients_are_rejected() {
        let (mesh, dm, b) = setup(&BoxDomain::cube(2, -0.5, 0.5), 0, 5);
        for bad in ["constant 1", "affine 1 1 0"] {
            let c = Coefficient::parse(bad).unwrap();
            let err = assemble_pencil(&mesh, &dm, &b, &c, None, Execution::default()).unwrap_err();
            assert_eq!(err.category(), crate::ErrorCategory::Assembly, "{bad}");
        }
        let three = Coefficient::parse("affine 8 1 1 1").unwrap();
        assert!(assemble_pencil(&mesh, &dm, &b, &three, None, Execution::default()).is_err());
    }

    #[test]
    fn sequential_and_parallel_assembly_agree() {
        let (mesh, dm, b) = setup(&BoxDomain::l_shape_3d(), 0, 5);
        let c = Coefficient::parse("affine 8 1 -1 0.5").unwrap();
        let s = assemble_pencil(&mesh, &dm, &b, &c, None, Execution::Sequential).unwrap();
        let p = assemble_pencil(&mesh, &dm, &b, &c, None, Execution::Parallel).unwrap();
        assert_eq!(s.k, p.k);
        assert_eq!(s.g, p.g);
    }
}
