//! Adaptive quadtree/octree grids subdivided into Kuhn simplices, carrying
//! continuous piecewise linear finite elements.

mod deformation;
mod quadrature;

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

pub use deformation::{Deformation, GridMismatch};
pub use quadrature::{simplex_rule, QuadraturePoint};

use crate::geometry::SignedShape;
use crate::math;
use crate::sparse::CsrMatrix;
use crate::tensor::{assert_dim, Vector};

/// Finest representable level; integer coordinates are multiples of
/// `2^-MAX_LEVEL`.
pub const MAX_LEVEL: u32 = 12;
const SCALE: u32 = 1 << MAX_LEVEL;

/// Simplex vertex slots; only the first `D + 1` are used.
pub type SimplexVertices = [usize; 4];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("levels must satisfy 2 <= min <= max <= {MAX_LEVEL}, got {0}..{1}")]
    BadLevels(u32, u32),
    #[error("split flags do not describe a grid with these levels")]
    BadSplitFlags,
}

#[derive(Debug, Clone)]
struct Cell<const D: usize> {
    level: u32,
    origin: [u32; D],
    /// Index of the first of `2^D` children, or 0 for a leaf.
    first_child: usize,
}

impl<const D: usize> Cell<D> {
    fn size(&self) -> u32 {
        SCALE >> self.level
    }

    fn is_leaf(&self) -> bool {
        self.first_child == 0
    }
}

/// How a vertex value is determined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexKind {
    /// Unconstrained degree of freedom with the given index.
    Free(usize),
    /// On the boundary of the box; held fixed.
    Boundary,
    /// Interpolated from other vertices; see [`AdaptiveGrid::constraint`].
    Hanging,
}

#[derive(Debug, Clone)]
pub struct AdaptiveGrid<const D: usize> {
    min_level: u32,
    max_level: u32,
    cells: Vec<Cell<D>>,
    leaves: Vec<usize>,
    /// Position of each cell in `leaves`, for leaf cells.
    leaf_pos: Vec<usize>,
    perms: Vec<[usize; D]>,
    vertices: Vec<[u32; D]>,
    simplices: Vec<SimplexVertices>,
    kinds: Vec<VertexKind>,
    constraint_ptr: Vec<usize>,
    constraint_entries: Vec<(usize, f64)>,
    dof_vertex: Vec<usize>,
}

impl<const D: usize> AdaptiveGrid<D> {
    /// Uniform grid at `level`.
    pub fn uniform(level: u32) -> Result<Self, GridError> {
        Self::build_with(level, level, |_, _, _| false)
    }

    /// Grid refined down to `max_level` around the narrow bands of both
    /// shapes.
    ///
    /// A cell of level `k` is split when its center lies within
    /// `band * 2^(max_level - k)` plus its half-diagonal of either zero level
    /// set, so the bands are covered by finest leaves and the refinement zone
    /// widens geometrically towards coarser levels.
    pub fn build(
        min_level: u32,
        max_level: u32,
        s1: &SignedShape<D>,
        s2: &SignedShape<D>,
        band: f64,
    ) -> Result<Self, GridError> {
        Self::build_with(min_level, max_level, |center, half_diag, level| {
            let width = band * (1u64 << (max_level - level)) as f64 + half_diag;
            s1.distance_at(center).abs() <= width || s2.distance_at(center).abs() <= width
        })
    }

    /// Grid whose cells below `max_level` are split wherever `refine(center,
    /// half_diagonal, level)` holds.
    pub fn build_with(
        min_level: u32,
        max_level: u32,
        refine: impl Fn(&Vector<D>, f64, u32) -> bool,
    ) -> Result<Self, GridError> {
        assert_dim::<D>();
        if !(2 <= min_level && min_level <= max_level && max_level <= MAX_LEVEL) {
            return Err(GridError::BadLevels(min_level, max_level));
        }
        let mut cells = vec![Cell { level: 0, origin: [0; D], first_child: 0 }];
        let mut stack = vec![0usize];
        while let Some(c) = stack.pop() {
            let cell = &cells[c];
            let level = cell.level;
            if level >= max_level {
                continue;
            }
            let split = level < min_level || {
                let size = cell.size() as f64 / SCALE as f64;
                let center = Vector(core::array::from_fn(|k| cell.origin[k] as f64 / SCALE as f64 + size / 2.0));
                refine(&center, size * math::sqrt(D as f64) / 2.0, level)
            };
            if split {
                let first = split_cell(&mut cells, c);
                stack.extend(first..first + (1 << D));
            }
        }
        balance(&mut cells);
        Ok(Self::finish(min_level, max_level, cells))
    }

    /// Pre-order split flags of the cell tree (children in index order).
    pub fn split_flags(&self) -> Vec<bool> {
        let mut flags = Vec::with_capacity(self.cells.len());
        let mut stack = vec![0usize];
        while let Some(c) = stack.pop() {
            let cell = &self.cells[c];
            flags.push(!cell.is_leaf());
            if !cell.is_leaf() {
                stack.extend((cell.first_child..cell.first_child + (1 << D)).rev());
            }
        }
        flags
    }

    /// Rebuilds a grid from [`AdaptiveGrid::split_flags`].
    pub fn from_split_flags(min_level: u32, max_level: u32, flags: &[bool]) -> Result<Self, GridError> {
        assert_dim::<D>();
        if !(2 <= min_level && min_level <= max_level && max_level <= MAX_LEVEL) {
            return Err(GridError::BadLevels(min_level, max_level));
        }
        let mut cells = vec![Cell { level: 0, origin: [0; D], first_child: 0 }];
        let mut stack = vec![0usize];
        let mut next = flags.iter();
        while let Some(c) = stack.pop() {
            let split = *next.next().ok_or(GridError::BadSplitFlags)?;
            let level = cells[c].level;
            if (level < min_level && !split) || (split && level >= max_level) {
                return Err(GridError::BadSplitFlags);
            }
            if split {
                let first = split_cell(&mut cells, c);
                stack.extend((first..first + (1 << D)).rev());
            }
        }
        if next.next().is_some() {
            return Err(GridError::BadSplitFlags);
        }
        let before = cells.len();
        balance(&mut cells);
        if cells.len() != before {
            return Err(GridError::BadSplitFlags);
        }
        Ok(Self::finish(min_level, max_level, cells))
    }

    fn finish(min_level: u32, max_level: u32, cells: Vec<Cell<D>>) -> Self {
        let mut leaves = Vec::new();
        let mut stack = vec![0usize];
        while let Some(c) = stack.pop() {
            if cells[c].is_leaf() {
                leaves.push(c);
            } else {
                let f = cells[c].first_child;
                stack.extend((f..f + (1 << D)).rev());
            }
        }
        let mut leaf_pos = vec![usize::MAX; cells.len()];
        for (i, &c) in leaves.iter().enumerate() {
            leaf_pos[c] = i;
        }
        let perms = permutations::<D>();
        let mut vertex_index: BTreeMap<[u32; D], usize> = BTreeMap::new();
        let mut vertices = Vec::new();
        let mut simplices = Vec::with_capacity(leaves.len() * perms.len());
        for &c in &leaves {
            let cell = &cells[c];
            let size = cell.size();
            for perm in &perms {
                let mut sv = [usize::MAX; 4];
                let mut p = cell.origin;
                for j in 0..=D {
                    if j > 0 {
                        p[perm[j - 1]] += size;
                    }
                    let next = vertices.len();
                    let id = *vertex_index.entry(p).or_insert(next);
                    if id == next {
                        vertices.push(p);
                    }
                    sv[j] = id;
                }
                simplices.push(sv);
            }
        }
        let mut grid = AdaptiveGrid {
            min_level,
            max_level,
            cells,
            leaves,
            leaf_pos,
            perms,
            vertices,
            simplices,
            kinds: Vec::new(),
            constraint_ptr: Vec::new(),
            constraint_entries: Vec::new(),
            dof_vertex: Vec::new(),
        };
        grid.classify_vertices();
        grid
    }

    fn classify_vertices(&mut self) {
        let nv = self.vertices.len();
        // Direct (possibly chained) interpolation weights of hanging vertices.
        let mut direct: Vec<Option<Vec<(usize, f64)>>> = vec![None; nv];
        let mut kinds = vec![VertexKind::Boundary; nv];
        for v in 0..nv {
            let p = self.vertices[v];
            if p.iter().any(|&x| x == 0 || x == SCALE) {
                continue;
            }
            // Coarsest leaf touching p that does not have p as a corner.
            let mut host: Option<usize> = None;
            for orthant in 0..(1usize << D) {
                let unit: [u32; D] = core::array::from_fn(|k| if (orthant >> k) & 1 == 1 { p[k] } else { p[k] - 1 });
                let leaf = self.leaf_containing(&unit);
                let cell = &self.cells[leaf];
                let corner = (0..D).all(|k| p[k] == cell.origin[k] || p[k] == cell.origin[k] + cell.size());
                if !corner && host.is_none_or(|h| self.cells[h].level > cell.level) {
                    host = Some(leaf);
                }
            }
            match host {
                None => kinds[v] = VertexKind::Free(0),
                Some(leaf) => {
                    kinds[v] = VertexKind::Hanging;
                    let cell = &self.cells[leaf];
                    let u: [f64; D] =
                        core::array::from_fn(|k| (p[k] - cell.origin[k]) as f64 / cell.size() as f64);
                    let (perm_idx, bary) = kuhn_barycentric(&self.perms, &u);
                    let sv = self.simplices[self.leaf_pos[leaf] * self.perms.len() + perm_idx];
                    let mut w = Vec::new();
                    for j in 0..=D {
                        if bary[j] != 0.0 {
                            w.push((sv[j], bary[j]));
                        }
                    }
                    direct[v] = Some(w);
                }
            }
        }
        let mut dof_vertex = Vec::new();
        for (v, kind) in kinds.iter_mut().enumerate() {
            if let VertexKind::Free(_) = kind {
                *kind = VertexKind::Free(dof_vertex.len());
                dof_vertex.push(v);
            }
        }
        let mut ptr = vec![0usize; nv + 1];
        let mut entries = Vec::new();
        for v in 0..nv {
            if kinds[v] == VertexKind::Hanging {
                let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
                resolve(&direct, v, 1.0, &mut acc);
                entries.extend(acc.into_iter().filter(|(_, w)| w.abs() > 1e-15));
            }
            ptr[v + 1] = entries.len();
        }
        self.kinds = kinds;
        self.constraint_ptr = ptr;
        self.constraint_entries = entries;
        self.dof_vertex = dof_vertex;
    }

    /// Leaf containing the unit cell with the given integer origin.
    fn leaf_containing(&self, unit: &[u32; D]) -> usize {
        find_leaf(&self.cells, unit)
    }

    pub fn min_level(&self) -> u32 {
        self.min_level
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    /// Mesh width of the finest leaves.
    pub fn finest_spacing(&self) -> f64 {
        1.0 / (1u64 << self.max_level) as f64
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf_levels(&self) -> impl Iterator<Item = u32> + '_ {
        self.leaves.iter().map(|&c| self.cells[c].level)
    }

    /// Leaf bounds as `(origin, edge length)`.
    pub fn leaf_bounds(&self, leaf: usize) -> (Vector<D>, f64) {
        let cell = &self.cells[self.leaves[leaf]];
        (
            Vector(core::array::from_fn(|k| cell.origin[k] as f64 / SCALE as f64)),
            cell.size() as f64 / SCALE as f64,
        )
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_simplices(&self) -> usize {
        self.simplices.len()
    }

    pub fn num_dofs(&self) -> usize {
        self.dof_vertex.len()
    }

    pub fn num_hanging(&self) -> usize {
        self.kinds.iter().filter(|k| **k == VertexKind::Hanging).count()
    }

    pub fn vertex(&self, v: usize) -> Vector<D> {
        Vector(core::array::from_fn(|k| self.vertices[v][k] as f64 / SCALE as f64))
    }

    pub fn vertex_kind(&self, v: usize) -> VertexKind {
        self.kinds[v]
    }

    pub fn dof_vertex(&self, dof: usize) -> usize {
        self.dof_vertex[dof]
    }

    /// Interpolation weights of a hanging vertex in terms of free and
    /// boundary vertices; empty for other vertices.
    pub fn constraint(&self, v: usize) -> &[(usize, f64)] {
        &self.constraint_entries[self.constraint_ptr[v]..self.constraint_ptr[v + 1]]
    }

    /// Vertex ids of a simplex; the first `D + 1` slots are used.
    pub fn simplex(&self, t: usize) -> &[usize] {
        &self.simplices[t][..=D]
    }

    fn simplex_leaf_perm(&self, t: usize) -> (&Cell<D>, &[usize; D]) {
        let per = self.perms.len();
        (&self.cells[self.leaves[t / per]], &self.perms[t % per])
    }

    /// Edge length of the leaf holding simplex `t`.
    pub fn simplex_size(&self, t: usize) -> f64 {
        self.simplex_leaf_perm(t).0.size() as f64 / SCALE as f64
    }

    pub fn simplex_volume(&self, t: usize) -> f64 {
        let s = self.simplex_size(t);
        let fact: f64 = (1..=D).map(|k| k as f64).product();
        math::powi(s, D as i32) / fact
    }

    /// Gradients of the barycentric coordinates on simplex `t`.
    pub fn barycentric_gradients(&self, t: usize) -> [Vector<D>; 4] {
        let (cell, perm) = self.simplex_leaf_perm(t);
        let inv = SCALE as f64 / cell.size() as f64;
        let mut g = [Vector::zero(); 4];
        g[0][perm[0]] = -inv;
        for j in 1..D {
            g[j][perm[j - 1]] = inv;
            g[j][perm[j]] = -inv;
        }
        g[D][perm[D - 1]] = inv;
        g
    }

    /// Point with barycentric coordinates `bary` in simplex `t`.
    pub fn simplex_point(&self, t: usize, bary: &[f64; 4]) -> Vector<D> {
        let mut x = Vector::zero();
        for (j, &v) in self.simplex(t).iter().enumerate() {
            x += self.vertex(v) * bary[j];
        }
        x
    }

    /// Barycentric coordinates of `x` with respect to simplex `t`, extended
    /// affinely outside the simplex.
    pub fn barycentric(&self, t: usize, x: &Vector<D>) -> [f64; 4] {
        let (cell, perm) = self.simplex_leaf_perm(t);
        let size = cell.size() as f64 / SCALE as f64;
        let u: [f64; D] = core::array::from_fn(|k| (x[k] - cell.origin[k] as f64 / SCALE as f64) / size);
        kuhn_coordinates(perm, &u)
    }

    /// Simplex containing `x` and the barycentric coordinates of `x` in it.
    ///
    /// Points on shared faces go to the cell with the smallest integer index
    /// along each axis, then to the first Kuhn simplex in permutation order
    /// with stable tie-breaking. Points outside the box are located in the
    /// nearest boundary cell and get affinely extended coordinates.
    pub fn locate(&self, x: &Vector<D>) -> (usize, [f64; 4]) {
        let fine = 1u32 << self.max_level;
        let step = SCALE / fine;
        let unit: [u32; D] = core::array::from_fn(|k| {
            let c = math::ceil(x[k] * fine as f64) - 1.0;
            (c.clamp(0.0, (fine - 1) as f64) as u32) * step
        });
        let leaf = self.leaf_containing(&unit);
        let cell = &self.cells[leaf];
        let size = cell.size() as f64 / SCALE as f64;
        let u: [f64; D] = core::array::from_fn(|k| (x[k] - cell.origin[k] as f64 / SCALE as f64) / size);
        let clamped: [f64; D] = core::array::from_fn(|k| u[k].clamp(0.0, 1.0));
        let (perm_idx, _) = kuhn_barycentric(&self.perms, &clamped);
        let t = self.leaf_pos[leaf] * self.perms.len() + perm_idx;
        (t, kuhn_coordinates(&self.perms[perm_idx], &u))
    }

    /// Scalar P1 mass and stiffness matrices on the free degrees of freedom,
    /// with hanging vertices eliminated through their constraints.
    pub fn fe_matrices(&self) -> (CsrMatrix, CsrMatrix) {
        let mut mass = Vec::new();
        let mut stiff = Vec::new();
        let mut local = [[(0usize, 0.0f64); 8]; 4];
        let mut counts = [0usize; 4];
        for t in 0..self.simplices.len() {
            let vol = self.simplex_volume(t);
            let grads = self.barycentric_gradients(t);
            for (j, &v) in self.simplex(t).iter().enumerate() {
                counts[j] = 0;
                match self.kinds[v] {
                    VertexKind::Free(d) => {
                        local[j][0] = (d, 1.0);
                        counts[j] = 1;
                    }
                    VertexKind::Boundary => {}
                    VertexKind::Hanging => {
                        for &(w, c) in self.constraint(v) {
                            if let VertexKind::Free(d) = self.kinds[w] {
                                local[j][counts[j]] = (d, c);
                                counts[j] += 1;
                            }
                        }
                    }
                }
            }
            let mass_scale = vol / ((D + 1) * (D + 2)) as f64;
            for a in 0..=D {
                for b in 0..=D {
                    let m = mass_scale * if a == b { 2.0 } else { 1.0 };
                    let k = vol * grads[a].dot(&grads[b]);
                    for &(da, wa) in &local[a][..counts[a]] {
                        for &(db, wb) in &local[b][..counts[b]] {
                            mass.push((da, db, wa * wb * m));
                            stiff.push((da, db, wa * wb * k));
                        }
                    }
                }
            }
        }
        let n = self.num_dofs();
        (CsrMatrix::from_triplets(n, mass), CsrMatrix::from_triplets(n, stiff))
    }

    /// Whether every leaf of `self` lies inside a leaf of `coarse`.
    pub fn refines(&self, coarse: &AdaptiveGrid<D>) -> bool {
        self.leaves.iter().all(|&c| {
            let cell = &self.cells[c];
            let host = &coarse.cells[coarse.leaf_containing(&cell.origin)];
            host.level <= cell.level
        })
    }
}

fn split_cell<const D: usize>(cells: &mut Vec<Cell<D>>, c: usize) -> usize {
    let first = cells.len();
    let level = cells[c].level + 1;
    let half = cells[c].size() / 2;
    let origin = cells[c].origin;
    for child in 0..(1usize << D) {
        let o = core::array::from_fn(|k| origin[k] + if (child >> k) & 1 == 1 { half } else { 0 });
        cells.push(Cell { level, origin: o, first_child: 0 });
    }
    cells[c].first_child = first;
    first
}

fn find_leaf<const D: usize>(cells: &[Cell<D>], unit: &[u32; D]) -> usize {
    let mut c = 0;
    while !cells[c].is_leaf() {
        let cell = &cells[c];
        let half = cell.size() / 2;
        let mut child = 0;
        for k in 0..D {
            if unit[k] >= cell.origin[k] + half {
                child |= 1 << k;
            }
        }
        c = cell.first_child + child;
    }
    c
}

/// Splits leaves until leaves sharing any corner differ by at most one level.
fn balance<const D: usize>(cells: &mut Vec<Cell<D>>) {
    let mut queue: Vec<usize> = (0..cells.len()).filter(|&c| cells[c].is_leaf()).collect();
    let dirs = 3usize.pow(D as u32);
    while let Some(c) = queue.pop() {
        if !cells[c].is_leaf() {
            continue;
        }
        let level = cells[c].level;
        let size = cells[c].size();
        let origin = cells[c].origin;
        for dir in 0..dirs {
            let mut unit = [0u32; D];
            let mut ok = true;
            let mut rem = dir;
            for k in 0..D {
                let delta = rem % 3;
                rem /= 3;
                unit[k] = match delta {
                    0 if origin[k] == 0 => {
                        ok = false;
                        0
                    }
                    0 => origin[k] - 1,
                    1 => origin[k],
                    _ => origin[k] + size,
                };
                if unit[k] >= SCALE {
                    ok = false;
                }
            }
            if !ok || (0..D).all(|k| unit[k] == origin[k]) {
                continue;
            }
            let n = find_leaf(cells, &unit);
            if cells[n].level + 1 < level {
                let first = split_cell(cells, n);
                queue.extend(first..first + (1 << D));
                // The split neighbour may in turn unbalance its own neighbours.
                queue.push(c);
                break;
            }
        }
    }
}

/// Permutations of `0..D` in lexicographic order.
fn permutations<const D: usize>() -> Vec<[usize; D]> {
    let mut out = Vec::new();
    let mut p: [usize; D] = core::array::from_fn(|k| k);
    loop {
        out.push(p);
        // next lexicographic permutation
        let Some(i) = (0..D.saturating_sub(1)).rev().find(|&i| p[i] < p[i + 1]) else {
            return out;
        };
        let j = (i + 1..D).rev().find(|&j| p[j] > p[i]).unwrap();
        p.swap(i, j);
        p[i + 1..].reverse();
    }
}

/// Kuhn simplex (index into `perms`) containing local coordinates `u ∈
/// [0,1]^D`, with the barycentric coordinates.
fn kuhn_barycentric<const D: usize>(perms: &[[usize; D]], u: &[f64; D]) -> (usize, [f64; 4]) {
    let mut order: [usize; D] = core::array::from_fn(|k| k);
    // stable sort, descending in u
    order.sort_by(|&a, &b| u[b].total_cmp(&u[a]));
    let idx = perms.iter().position(|p| *p == order).unwrap();
    (idx, kuhn_coordinates(&order, u))
}

fn kuhn_coordinates<const D: usize>(perm: &[usize; D], u: &[f64; D]) -> [f64; 4] {
    let mut b = [0.0; 4];
    b[0] = 1.0 - u[perm[0]];
    for j in 1..D {
        b[j] = u[perm[j - 1]] - u[perm[j]];
    }
    b[D] = u[perm[D - 1]];
    b
}

fn resolve(
    direct: &[Option<Vec<(usize, f64)>>],
    v: usize,
    scale: f64,
    acc: &mut BTreeMap<usize, f64>,
) {
    match &direct[v] {
        Some(w) => {
            for &(u, c) in w {
                resolve(direct, u, scale * c, acc);
            }
        }
        None => *acc.entry(v).or_insert(0.0) += scale,
    }
}

#[cfg(test)]
mod tests;
