//! Global numbering for the `C^{m-1}` tensor spectral element space.
//!
//! A local basis function `φ_{j_1} ⊗ … ⊗ φ_{j_d}` of an element belongs to the
//! entity selected per axis by its 1-D index (low node, high node, or bubble),
//! and is identified globally by that entity plus the per-axis tags (derivative
//! order on pinned axes, bubble index on free axes). Elements sharing an entity
//! therefore share the dof with multiplier 1.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis1d::{scale_basis, Basis1D};
use crate::error::{Result, SemError};
use crate::mesh::{pattern_index, BoxMesh, Side};
use crate::tensor::contract_all;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DofKey {
    pub entity: usize,
    /// Derivative order on pinned axes, bubble index on free axes.
    pub tags: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct DofMap {
    m: usize,
    degree: usize,
    dim: usize,
    keys: Vec<DofKey>,
    element_dofs: Vec<Vec<usize>>,
    constrained: Vec<bool>,
    free_index: Vec<Option<usize>>,
    n_free: usize,
}

/// Side and tag of 1-D local index `j`.
pub fn local_side(m: usize, j: usize) -> (Side, usize) {
    if j < m {
        (Side::Low, j)
    } else if j < 2 * m {
        (Side::High, j - m)
    } else {
        (Side::Free, j)
    }
}

pub fn build_dofmap(mesh: &BoxMesh, m: usize, degree: usize) -> Result<DofMap> {
    if m == 0 || degree < 2 * m {
        return Err(SemError::DegreeTooSmall { degree, m, min: 2 * m });
    }
    let d = mesh.dim();
    let n1 = degree + 1;
    let n_local = n1.pow(d as u32);

    let mut local_keys: Vec<Vec<DofKey>> = Vec::with_capacity(mesh.n_elements());
    let mut ids: BTreeMap<DofKey, usize> = BTreeMap::new();
    for el in mesh.elements() {
        let mut keys = Vec::with_capacity(n_local);
        let mut sides = vec![Side::Free; d];
        let mut tags = vec![0; d];
        for flat in 0..n_local {
            let mut rem = flat;
            for k in 0..d {
                let (s, t) = local_side(m, rem % n1);
                sides[k] = s;
                tags[k] = t;
                rem /= n1;
            }
            let key = DofKey { entity: el.entities[pattern_index(&sides)], tags: tags.clone() };
            ids.entry(key.clone()).or_insert(0);
            keys.push(key);
        }
        local_keys.push(keys);
    }
    for (i, v) in ids.values_mut().enumerate() {
        *v = i;
    }
    let element_dofs = local_keys.iter().map(|keys| keys.iter().map(|k| ids[k]).collect()).collect();
    let keys: Vec<DofKey> = ids.into_keys().collect();
    let total = keys.len();
    Ok(DofMap {
        m,
        degree,
        dim: d,
        keys,
        element_dofs,
        constrained: vec![false; total],
        free_index: (0..total).map(Some).collect(),
        n_free: total,
    })
}

/// Constrains every dof attached to a boundary entity (clamped `H^m_0`).
pub fn clamp_boundary(dm: &DofMap, mesh: &BoxMesh) -> DofMap {
    let mut out = dm.clone();
    for (g, key) in dm.keys.iter().enumerate() {
        if mesh.entities()[key.entity].boundary {
            out.constrained[g] = true;
        }
    }
    out.renumber_free();
    out
}

impl DofMap {
    fn renumber_free(&mut self) {
        let mut next = 0;
        for (g, f) in self.free_index.iter_mut().enumerate() {
            *f = if self.constrained[g] {
                None
            } else {
                next += 1;
                Some(next - 1)
            };
        }
        self.n_free = next;
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total(&self) -> usize {
        self.keys.len()
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn n_local(&self) -> usize {
        (self.degree + 1).pow(self.dim as u32)
    }

    pub fn keys(&self) -> &[DofKey] {
        &self.keys
    }

    /// Global id of each local tensor index, axis 0 fastest.
    pub fn element_dofs(&self, e: usize) -> &[usize] {
        &self.element_dofs[e]
    }

    pub fn is_constrained(&self, g: usize) -> bool {
        self.constrained[g]
    }

    pub fn free_index(&self, g: usize) -> Option<usize> {
        self.free_index[g]
    }

    /// Expands a free-dof vector to all dofs, zero on constrained ones.
    pub fn expand_free<T: Copy + Default>(&self, free: &[T]) -> Vec<T> {
        self.free_index.iter().map(|f| f.map_or(T::default(), |i| free[i])).collect()
    }

    /// Swaps two local entries of one element. Fault injection for tests of
    /// the conformity check; breaks the conforming numbering.
    pub fn swap_local_ids(&mut self, element: usize, a: usize, b: usize) {
        self.element_dofs[element].swap(a, b);
    }

    /// CSV rows `entity_dim,entity,index_tuple,global,constrained`.
    pub fn report_csv(&self, mesh: &BoxMesh) -> String {
        let mut out = String::from("entity_dim,entity,index_tuple,global,constrained\n");
        for (g, k) in self.keys.iter().enumerate() {
            let tuple: Vec<String> = k.tags.iter().map(|t| t.to_string()).collect();
            out.push_str(&format!(
                "{},{},{},{g},{}\n",
                mesh.entities()[k.entity].dim,
                k.entity,
                tuple.join(" "),
                u8::from(self.constrained[g])
            ));
        }
        out
    }
}

/// Evaluates `∂^s u` at a point of element `e` from a global coefficient vector.
pub fn eval_on_element(
    dm: &DofMap,
    mesh: &BoxMesh,
    basis: &Basis1D,
    coeffs: &[f64],
    e: usize,
    x: &[f64],
    s: &[usize],
) -> f64 {
    let el = &mesh.elements()[e];
    let n1 = dm.degree + 1;
    let vals: Vec<Vec<f64>> = (0..dm.dim)
        .map(|k| {
            let (a, b) = el.bounds[k];
            let sb = scale_basis(basis, a, b).expect("non-degenerate element");
            (0..n1).map(|j| sb.eval(j, x[k], s[k])).collect()
        })
        .collect();
    let local: Vec<f64> = dm.element_dofs[e].iter().map(|&g| coeffs[g]).collect();
    let refs: Vec<&[f64]> = vals.iter().map(|v| v.as_slice()).collect();
    contract_all(&local, &vec![n1; dm.dim], &refs)
}

/// Largest jump of any derivative `∂^s`, `s_k < m`, between elements sharing
/// an entity, over `trials` random coefficient vectors and random points on
/// each shared entity.
pub fn conformity_check(dm: &DofMap, mesh: &BoxMesh, basis: &Basis1D, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = dm.dim;
    let orders: Vec<Vec<usize>> =
        (0..dm.m.pow(d as u32)).map(|f| (0..d).map(|k| f / dm.m.pow(k as u32) % dm.m).collect()).collect();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let coeffs: Vec<f64> = (0..dm.total()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for (id, ent) in mesh.entities().iter().enumerate() {
            if ent.dim == d || ent.elements.len() < 2 {
                continue;
            }
            let bounds = mesh.entity_bounds(id);
            let n_points = if ent.dim == 0 { 1 } else { 2 };
            for _ in 0..n_points {
                let x: Vec<f64> = bounds.iter().map(|&(a, b)| if a == b { a } else { rng.gen_range(a..b) }).collect();
                for s in &orders {
                    let first = eval_on_element(dm, mesh, basis, &coeffs, ent.elements[0], &x, s);
                    for &e in &ent.elements[1..] {
                        let other = eval_on_element(dm, mesh, basis, &coeffs, e, &x, s);
                        worst = worst.max((first - other).abs());
                    }
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis1d::build_basis;
    use crate::mesh::{build_mesh, BoxDomain};

    fn clamped(dom: &BoxDomain, level: usize, m: usize, n: usize) -> (BoxMesh, DofMap) {
        let mesh = build_mesh(dom, level).unwrap();
        let dm = build_dofmap(&mesh, m, n).unwrap();
        let c = clamp_boundary(&dm, &mesh);
        (mesh, c)
    }

    #[test]
    fn single_element_counts() {
        let sq = BoxDomain::cube(2, -0.5, 0.5);
        let (_, dm) = clamped(&sq, 0, 2, 15);
        assert_eq!(dm.total(), 256);
        assert_eq!(dm.n_free(), 144);
        assert_eq!(clamped(&sq, 0, 2, 20).1.n_free(), 289);
        assert_eq!(clamped(&BoxDomain::cube(3, 0.0, 1.0), 0, 2, 10).1.n_free(), 343);
        assert_eq!(clamped(&BoxDomain::cube(3, 0.0, 1.0), 0, 2, 20).1.n_free(), 4913);
        assert_eq!(clamped(&BoxDomain::cube(3, 0.0, 1.0), 0, 2, 5).1.n_free(), 8);
        let (_, one) = clamped(&BoxDomain::cube(1, 0.0, 1.0), 0, 2, 7);
        assert_eq!(one.total(), 8);
        assert_eq!(one.n_free(), 4);
    }

    #[test]
    fn l_shape_counts() {
        assert_eq!(clamped(&BoxDomain::l_shape_2d(), 0, 2, 15).1.n_free(), 480);
        assert_eq!(clamped(&BoxDomain::l_shape_3d(), 0, 2, 4).1.n_free(), 37);
        assert_eq!(clamped(&BoxDomain::l_prism(), 0, 2, 4).1.n_free(), 7);
    }

    #[test]
    fn rejects_low_degree() {
        let mesh = build_mesh(&BoxDomain::cube(2, 0.0, 1.0), 0).unwrap();
        assert!(matches!(build_dofmap(&mesh, 2, 3), Err(SemError::DegreeTooSmall { .. })));
    }

    #[test]
    fn dimension_formula_on_grids() {
        for p in 1..=4usize {
            for q in 1..=4usize {
                let mut boxes = Vec::new();
                for j in 0..q {
                    for i in 0..p {
                        boxes.push(vec![(i as f64, i as f64 + 1.0), (j as f64, j as f64 + 1.0)]);
                    }
                }
                let dom = BoxDomain::new(2, boxes).unwrap();
                for n in [5usize, 8, 15] {
                    let (_, dm) = clamped(&dom, 0, 2, n);
                    let b = n - 3;
                    let want = p * q * b * b + (p * (q - 1) + q * (p - 1)) * 2 * b + (p - 1) * (q - 1) * 4;
                    assert_eq!(dm.n_free(), want, "p={p} q={q} N={n}");
                }
            }
        }
    }

    #[test]
    fn every_local_function_is_mapped_and_ordering_is_by_entity() {
        let (mesh, dm) = clamped(&BoxDomain::l_shape_2d(), 1, 2, 6);
        for e in 0..mesh.n_elements() {
            assert_eq!(dm.element_dofs(e).len(), 49);
            assert!(dm.element_dofs(e).iter().all(|&g| g < dm.total()));
        }
        for w in dm.keys().windows(2) {
            assert!(w[0] < w[1]);
            let d0 = mesh.entities()[w[0].entity].dim;
            let d1 = mesh.entities()[w[1].entity].dim;
            assert!(d0 <= d1);
        }
        let constrained = (0..dm.total()).filter(|&g| dm.is_constrained(g)).count();
        assert_eq!(dm.n_free(), dm.total() - constrained);
    }

    #[test]
    fn conformity_on_l_shapes() {
        let basis = build_basis(2, 8).unwrap();
        for dom in [BoxDomain::l_shape_2d(), BoxDomain::l_shape_3d()] {
            let mesh = build_mesh(&dom, 0).unwrap();
            let dm = build_dofmap(&mesh, 2, 8).unwrap();
            let jump = conformity_check(&dm, &mesh, &basis, 3, 7);
            assert!(jump < 1e-10, "jump {jump:e}");
        }
    }

    #[test]
    fn conformity_for_m1_and_m3() {
        for m in [1usize, 3] {
            let basis = build_basis(m, 2 * m + 2).unwrap();
            let mesh = build_mesh(&BoxDomain::l_shape_2d(), 1).unwrap();
            let dm = build_dofmap(&mesh, m, 2 * m + 2).unwrap();
            let j = conformity_check(&dm, &mesh, &basis, 2, 1);
            // fourth mixed derivatives on quarter-size elements for m = 3
            let tol = if m == 3 { 1e-7 } else { 1e-10 };
            assert!(j < tol, "m={m} jump {j:e}");
        }
    }

    #[test]
    fn graded_neighbours_conform() {
        let dom = BoxDomain::new(2, vec![vec![(0.0, 1.0), (0.0, 1.0)], vec![(1.0, 3.0), (0.0, 1.0)]]).unwrap();
        let mesh = build_mesh(&dom, 1).unwrap();
        let basis = build_basis(2, 7).unwrap();
        let dm = build_dofmap(&mesh, 2, 7).unwrap();
        assert!(conformity_check(&dm, &mesh, &basis, 3, 3) < 1e-10);
    }

    #[test]
    fn swapped_ids_are_detected() {
        let mesh = build_mesh(&BoxDomain::l_shape_2d(), 0).unwrap();
        let basis = build_basis(2, 8).unwrap();
        let mut dm = build_dofmap(&mesh, 2, 8).unwrap();
        // element 0 value dof at its high-high corner against an interior bubble
        let corner = 2 + 2 * 9;
        let bubble = 9 * 9 - 1;
        dm.swap_local_ids(0, corner, bubble);
        assert!(conformity_check(&dm, &mesh, &basis, 3, 5) > 1e-3);
    }

    #[test]
    fn single_element_jump_is_zero() {
        let mesh = build_mesh(&BoxDomain::cube(2, 0.0, 1.0), 0).unwrap();
        let basis = build_basis(2, 5).unwrap();
        let dm = build_dofmap(&mesh, 2, 5).unwrap();
        assert_eq!(conformity_check(&dm, &mesh, &basis, 2, 0), 0.0);
    }

    #[test]
    fn report_has_a_row_per_dof() {
        let (mesh, dm) = clamped(&BoxDomain::cube(2, 0.0, 1.0), 0, 2, 4);
        let csv = dm.report_csv(&mesh);
        assert_eq!(csv.lines().count(), 1 + 25);
        assert_eq!(csv.lines().filter(|l| l.ends_with(",0")).count(), 1);
    }
}
