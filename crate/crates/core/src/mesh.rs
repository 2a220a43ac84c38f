//! Conforming rectangular partitions of unions of axis-aligned boxes.
//!
//! Every box is split uniformly into `2^level` slabs per axis. Coordinates are
//! generated by one formula per box edge, so points shared between boxes are
//! bitwise identical and entities are deduplicated by exact comparison.

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Result, SemError};

/// A union of closed axis-aligned boxes; `boxes[i][k] = (a_k, b_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    dim: usize,
    boxes: Vec<Vec<(f64, f64)>>,
}

impl BoxDomain {
    pub fn new(dim: usize, boxes: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(SemError::Domain(format!("dimension {dim} not in 1..=3")));
        }
        if boxes.is_empty() {
            return Err(SemError::Domain("no boxes given".into()));
        }
        for (i, b) in boxes.iter().enumerate() {
            if b.len() != dim {
                return Err(SemError::Domain(format!("box {i} has {} intervals, expected {dim}", b.len())));
            }
            for &(lo, hi) in b {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(SemError::Domain(format!("box {i} has degenerate interval [{lo}, {hi}]")));
                }
            }
        }
        Ok(BoxDomain { dim, boxes })
    }

    /// Boxes given as `[a_1, b_1, a_2, b_2, ...]` rows.
    pub fn from_flat(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let boxes = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                if r.len() != 2 * dim {
                    return Err(SemError::Domain(format!("box {i} has {} numbers, expected {}", r.len(), 2 * dim)));
                }
                Ok(r.chunks(2).map(|c| (c[0], c[1])).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        BoxDomain::new(dim, boxes)
    }

    /// `(a, b)^dim` as a single box.
    pub fn cube(dim: usize, a: f64, b: f64) -> Self {
        BoxDomain::new(dim, vec![vec![(a, b); dim]]).expect("valid cube")
    }

    /// `(-1, 1)^2` minus `[0, 1) x (-1, 0]`, three unit squares.
    pub fn l_shape_2d() -> Self {
        BoxDomain::new(
            2,
            vec![vec![(-1.0, 0.0), (-1.0, 0.0)], vec![(-1.0, 0.0), (0.0, 1.0)], vec![(0.0, 1.0), (0.0, 1.0)]],
        )
        .expect("valid L-shape")
    }

    /// `(-1, 1)^3` minus `(-1, 0)^3`, seven unit cubes.
    pub fn l_shape_3d() -> Self {
        let mut boxes = Vec::new();
        for oct in 1..8usize {
            boxes.push((0..3).map(|k| if oct >> k & 1 == 1 { (0.0, 1.0) } else { (-1.0, 0.0) }).collect());
        }
        BoxDomain::new(3, boxes).expect("valid 3-D L-shape")
    }

    /// `((-1, 1)^2 minus (-1, 0]^2) x (0, 1)`, three unit cubes.
    pub fn l_prism() -> Self {
        BoxDomain::new(
            3,
            vec![
                vec![(-1.0, 0.0), (0.0, 1.0), (0.0, 1.0)],
                vec![(0.0, 1.0), (-1.0, 0.0), (0.0, 1.0)],
                vec![(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)],
            ],
        )
        .expect("valid prism")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boxes(&self) -> &[Vec<(f64, f64)>] {
        &self.boxes
    }

    pub fn translated(&self, offset: &[f64]) -> Self {
        let boxes =
            self.boxes.iter().map(|b| b.iter().zip(offset).map(|(&(lo, hi), o)| (lo + o, hi + o)).collect()).collect();
        BoxDomain { dim: self.dim, boxes }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let boxes = self.boxes.iter().map(|b| b.iter().map(|&(lo, hi)| (lo * s, hi * s)).collect()).collect();
        BoxDomain { dim: self.dim, boxes }
    }

    /// Rejects overlapping interiors, partial face contacts and disconnected unions.
    pub fn check_conforming(&self) -> Result<()> {
        let n = self.boxes.len();
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in i + 1..n {
                match contact(&self.boxes[i], &self.boxes[j]) {
                    Contact::None => {}
                    Contact::Overlap | Contact::Partial => return Err(SemError::NonConforming { first: i, second: j }),
                    Contact::Entity(q) => {
                        if q + 1 == self.dim {
                            adjacency[i].push(j);
                            adjacency[j].push(i);
                        }
                    }
                }
            }
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(SemError::Domain(format!("box {k} is not face-connected to box 0")));
        }
        Ok(())
    }
}

enum Contact {
    None,
    Overlap,
    Partial,
    /// The boxes meet in a common entity of this dimension.
    Entity(usize),
}

fn contact(p: &[(f64, f64)], q: &[(f64, f64)]) -> Contact {
    let mut open = 0;
    let mut partial = false;
    for (&(a0, b0), &(a1, b1)) in p.iter().zip(q) {
        let lo = a0.max(a1);
        let hi = b0.min(b1);
        if lo > hi {
            return Contact::None;
        }
        if lo < hi {
            open += 1;
            if (a0, b0) != (a1, b1) {
                partial = true;
            }
        }
    }
    if open == p.len() {
        Contact::Overlap
    } else if partial {
        Contact::Partial
    } else {
        Contact::Entity(open)
    }
}

/// Per-axis description of an entity: pinned at a lattice coordinate or
/// spanning the interval between two lattice coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AxisKey {
    Pinned(usize),
    Free(usize, usize),
}

/// Which part of an element interval an entity occupies along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Low,
    High,
    Free,
}

impl Side {
    fn code(self) -> usize {
        match self {
            Side::Low => 0,
            Side::High => 1,
            Side::Free => 2,
        }
    }
}

/// Flat index of a per-axis side pattern, axis 0 fastest in base 3.
pub fn pattern_index(sides: &[Side]) -> usize {
    sides.iter().rev().fold(0, |acc, s| acc * 3 + s.code())
}

#[derive(Debug, Clone)]
pub struct Entity {
    pub dim: usize,
    pub key: Vec<AxisKey>,
    pub boundary: bool,
    pub elements: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Element {
    pub bounds: Vec<(f64, f64)>,
    /// Entity id for each of the `3^d` side patterns, see [`pattern_index`].
    pub entities: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct BoxMesh {
    dim: usize,
    level: usize,
    coords: Vec<Vec<f64>>,
    elements: Vec<Element>,
    entities: Vec<Entity>,
}

pub fn build_mesh(dom: &BoxDomain, level: usize) -> Result<BoxMesh> {
    dom.check_conforming()?;
    if level > 20 {
        return Err(SemError::Domain(format!("refinement level {level} too large")));
    }
    let d = dom.dim();
    let parts = 1usize << level;

    // element intervals per box and axis, from the canonical formula
    let mut cells: Vec<Vec<(f64, f64)>> = Vec::new();
    for b in dom.boxes() {
        let axis_points: Vec<Vec<f64>> = b
            .iter()
            .map(|&(lo, hi)| {
                (0..=parts)
                    .map(|i| {
                        if i == 0 {
                            lo
                        } else if i == parts {
                            hi
                        } else {
                            lo + (hi - lo) * i as f64 / parts as f64
                        }
                    })
                    .collect()
            })
            .collect();
        for flat in 0..parts.pow(d as u32) {
            let mut rem = flat;
            let mut cell = Vec::with_capacity(d);
            for pts in &axis_points {
                let i = rem % parts;
                rem /= parts;
                cell.push((pts[i], pts[i + 1]));
            }
            cells.push(cell);
        }
    }

    let mut coords: Vec<Vec<f64>> = vec![Vec::new(); d];
    for c in &cells {
        for (k, &(lo, hi)) in c.iter().enumerate() {
            coords[k].push(lo);
            coords[k].push(hi);
        }
    }
    for axis in &mut coords {
        axis.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
        axis.dedup();
    }
    let id_of = |k: usize, x: f64| -> usize {
        coords[k].binary_search_by(|p| p.partial_cmp(&x).expect("finite coordinates")).expect("coordinate registered")
    };

    let n_patterns = 3usize.pow(d as u32);
    let mut keyed: BTreeMap<(usize, Vec<AxisKey>), Vec<(usize, usize)>> = BTreeMap::new();
    for (e, c) in cells.iter().enumerate() {
        for p in 0..n_patterns {
            let mut rem = p;
            let mut key = Vec::with_capacity(d);
            let mut free = 0;
            for (k, &(lo, hi)) in c.iter().enumerate() {
                key.push(match rem % 3 {
                    0 => AxisKey::Pinned(id_of(k, lo)),
                    1 => AxisKey::Pinned(id_of(k, hi)),
                    _ => {
                        free += 1;
                        AxisKey::Free(id_of(k, lo), id_of(k, hi))
                    }
                });
                rem /= 3;
            }
            keyed.entry((free, key)).or_default().push((e, p));
        }
    }

    let mut elements: Vec<Element> =
        cells.into_iter().map(|bounds| Element { bounds, entities: vec![usize::MAX; n_patterns] }).collect();
    let mut entities = Vec::with_capacity(keyed.len());
    for (id, ((dim, key), uses)) in keyed.into_iter().enumerate() {
        let mut incident: Vec<usize> = uses.iter().map(|&(e, _)| e).collect();
        incident.dedup();
        for (e, p) in uses {
            elements[e].entities[p] = id;
        }
        entities.push(Entity { dim, key, boundary: false, elements: incident });
    }

    // boundary faces and their closures
    for e in 0..elements.len() {
        for k in 0..d {
            for side in [Side::Low, Side::High] {
                let mut sides = vec![Side::Free; d];
                sides[k] = side;
                let face = elements[e].entities[pattern_index(&sides)];
                if entities[face].elements.len() != 1 {
                    continue;
                }
                for p in 0..n_patterns {
                    let along = (p / 3usize.pow(k as u32)) % 3;
                    if along == side.code() {
                        let id = elements[e].entities[p];
                        entities[id].boundary = true;
                    }
                }
            }
        }
    }

    Ok(BoxMesh { dim: d, level, coords, elements, entities })
}

impl BoxMesh {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Lattice coordinate of id `i` along `axis`.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.coords[axis][i]
    }

    pub fn count(&self, dim: usize) -> usize {
        self.entities.iter().filter(|e| e.dim == dim).count()
    }

    pub fn count_interior(&self, dim: usize) -> usize {
        self.entities.iter().filter(|e| e.dim == dim && !e.boundary).count()
    }

    /// Geometry of an entity as per-axis intervals (degenerate where pinned).
    pub fn entity_bounds(&self, id: usize) -> Vec<(f64, f64)> {
        self.entities[id]
            .key
            .iter()
            .enumerate()
            .map(|(k, a)| match *a {
                AxisKey::Pinned(i) => (self.coords[k][i], self.coords[k][i]),
                AxisKey::Free(i, j) => (self.coords[k][i], self.coords[k][j]),
            })
            .collect()
    }

    /// Common `(d-1)`-face of two distinct elements.
    pub fn shared_face(&self, e1: usize, e2: usize) -> Option<Vec<(f64, f64)>> {
        if e1 == e2 || e1 >= self.elements.len() || e2 >= self.elements.len() {
            return None;
        }
        self.elements[e1]
            .entities
            .iter()
            .find(|&&id| {
                let ent = &self.entities[id];
                ent.dim + 1 == self.dim && ent.elements.contains(&e2)
            })
            .map(|&id| self.entity_bounds(id))
    }

    /// CSV summary: entity counts per dimension, `h`, then the element list.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("entity_dim,count,boundary\n");
        for q in 0..=self.dim {
            let b = self.entities.iter().filter(|e| e.dim == q && e.boundary).count();
            out.push_str(&format!("{q},{},{b}\n", self.count(q)));
        }
        out.push_str(&format!("h,{:.14e}\n", element_diameter(self)));
        out.push_str("element");
        for k in 0..self.dim {
            out.push_str(&format!(",a{},b{}", k + 1, k + 1));
        }
        out.push('\n');
        for (i, e) in self.elements.iter().enumerate() {
            out.push_str(&i.to_string());
            for &(lo, hi) in &e.bounds {
                out.push_str(&format!(",{lo:.14e},{hi:.14e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Largest element diagonal.
pub fn element_diameter(mesh: &BoxMesh) -> f64 {
    mesh.elements.iter().map(|e| e.bounds.iter().map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt()).fold(0.0, f64::max)
}
