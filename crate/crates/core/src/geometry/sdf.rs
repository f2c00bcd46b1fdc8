//! Signed distance fields sampled on a uniform lattice over the unit box.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::shape::{cross3, DiscreteShape};
use crate::math;
use crate::tensor::{assert_dim, Vector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SdfError {
    #[error("lattice spacing {0} does not divide the unit interval")]
    BadSpacing(f64),
}

/// Uniform lattice with `cells` cells (and `cells + 1` points) per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lattice<const D: usize> {
    pub cells: usize,
}

impl<const D: usize> Lattice<D> {
    pub fn new(cells: usize) -> Self {
        assert_dim::<D>();
        assert!(cells >= 4, "lattice needs at least 4 cells per axis");
        Lattice { cells }
    }

    /// Lattice with the given spacing, which must divide 1.
    pub fn with_spacing(h: f64) -> Result<Self, SdfError> {
        let n = math::floor(1.0 / h + 0.5);
        if !(h > 0.0) || n < 4.0 || (n * h - 1.0).abs() > 1e-12 {
            return Err(SdfError::BadSpacing(h));
        }
        Ok(Self::new(n as usize))
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.cells as f64
    }

    pub fn points_per_axis(&self) -> usize {
        self.cells + 1
    }

    pub fn len(&self) -> usize {
        (0..D).fold(1, |acc, _| acc * self.points_per_axis())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn flat(&self, idx: &[usize; D]) -> usize {
        let n = self.points_per_axis();
        let mut f = 0;
        for k in (0..D).rev() {
            f = f * n + idx[k];
        }
        f
    }

    pub fn unflat(&self, mut f: usize) -> [usize; D] {
        let n = self.points_per_axis();
        let mut idx = [0; D];
        for slot in idx.iter_mut() {
            *slot = f % n;
            f /= n;
        }
        idx
    }

    /// Stride of axis `k` in the flat index.
    pub fn stride(&self, k: usize) -> usize {
        let n = self.points_per_axis();
        (0..k).fold(1, |acc, _| acc * n)
    }

    pub fn position(&self, idx: &[usize; D]) -> Vector<D> {
        let h = self.spacing();
        Vector(core::array::from_fn(|k| idx[k] as f64 * h))
    }
}

/// Signed distance samples: negative inside, positive outside.
#[derive(Debug, Clone)]
pub struct SignedShape<const D: usize> {
    lattice: Lattice<D>,
    values: Vec<f64>,
    source: Option<DiscreteShape<D>>,
}

impl<const D: usize> SignedShape<D> {
    /// Samples an analytic signed distance function.
    pub fn from_fn(lattice: Lattice<D>, f: impl Fn(&Vector<D>) -> f64) -> Self {
        let values = (0..lattice.len())
            .map(|i| f(&lattice.position(&lattice.unflat(i))))
            .collect();
        SignedShape { lattice, values, source: None }
    }

    pub fn from_values(lattice: Lattice<D>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), lattice.len());
        SignedShape { lattice, values, source: None }
    }

    pub fn lattice(&self) -> &Lattice<D> {
        &self.lattice
    }

    pub fn spacing(&self) -> f64 {
        self.lattice.spacing()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, idx: &[usize; D]) -> f64 {
        self.values[self.lattice.flat(idx)]
    }

    /// The shape this field was computed from, if any.
    pub fn source(&self) -> Option<&DiscreteShape<D>> {
        self.source.as_ref()
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Trial {
    value: f64,
    index: usize,
}

impl Eq for Trial {}

impl Ord for Trial {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on value, ties by index for determinism
        other
            .value
            .total_cmp(&self.value)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Trial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Far,
    Trial,
    Known,
}

/// Width, in lattice spacings, of the band initialized with exact
/// point-to-element distances before marching.
const EXACT_BAND: f64 = 2.0;

/// How marching fills lattice points outside the exactly initialized band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarchingScheme {
    /// Exact distance to the nearest element carried by the accepted
    /// upwind neighbours. Accurate enough for second differences.
    #[default]
    ClosestElement,
    /// First-order upwind discretization of `|∇u| = 1`.
    Upwind,
}

/// Signed distance to `shape` on `lattice` with the default scheme.
pub fn fast_march_sdf<const D: usize>(shape: &DiscreteShape<D>, lattice: Lattice<D>) -> SignedShape<D> {
    fast_march_sdf_with(shape, lattice, MarchingScheme::default())
}

/// Signed distance to `shape` on `lattice`.
///
/// Lattice points within two spacings of the shape receive their exact
/// distance to the nearest element; everything else is filled by fast
/// marching in order of increasing distance. The sign comes from even-odd ray
/// parity (d = 2) or the winding number of the oriented surface (d = 3).
pub fn fast_march_sdf_with<const D: usize>(
    shape: &DiscreteShape<D>,
    lattice: Lattice<D>,
    scheme: MarchingScheme,
) -> SignedShape<D> {
    let h = lattice.spacing();
    let n = lattice.points_per_axis();
    let len = lattice.len();
    let mut dist = vec![f64::INFINITY; len];
    let mut nearest = vec![usize::MAX; len];
    let band = EXACT_BAND * h;

    for e in 0..shape.elements().len() {
        let pts = shape.element_points(e);
        let mut lo = [0usize; D];
        let mut hi = [0usize; D];
        for k in 0..D {
            let mn = pts.iter().map(|p| p.0[k]).fold(f64::INFINITY, f64::min) - band;
            let mx = pts.iter().map(|p| p.0[k]).fold(f64::NEG_INFINITY, f64::max) + band;
            lo[k] = math::ceil(mn / h).max(0.0) as usize;
            hi[k] = (math::floor(mx / h) as isize).clamp(0, n as isize - 1) as usize;
        }
        for_each_in_box(&lo, &hi, |idx| {
            let f = lattice.flat(idx);
            let x = lattice.position(idx);
            let de = shape.distance_to_element(e, &x);
            if de < dist[f] {
                dist[f] = de;
                nearest[f] = e;
            }
        });
    }

    let mut state = vec![State::Far; len];
    for f in 0..len {
        if dist[f] <= band {
            state[f] = State::Known;
        } else {
            dist[f] = f64::INFINITY;
            nearest[f] = usize::MAX;
        }
    }

    let mut heap = BinaryHeap::new();
    let strides: [usize; D] = core::array::from_fn(|k| lattice.stride(k));
    let neighbours = |f: usize, idx: &[usize; D], out: &mut Vec<usize>| {
        out.clear();
        for k in 0..D {
            if idx[k] > 0 {
                out.push(f - strides[k]);
            }
            if idx[k] + 1 < n {
                out.push(f + strides[k]);
            }
        }
    };
    let adjacency = element_adjacency(shape);
    let mut nb = Vec::with_capacity(2 * D);
    let mut nb2 = Vec::with_capacity(2 * D);
    let mut update = |g: usize, dist: &[f64], state: &[State], nearest: &[usize]| -> (f64, usize) {
        match scheme {
            MarchingScheme::Upwind => (upwind_update(&lattice, dist, state, g, h), usize::MAX),
            MarchingScheme::ClosestElement => {
                let x = lattice.position(&lattice.unflat(g));
                neighbours(g, &lattice.unflat(g), &mut nb2);
                let mut best = (f64::INFINITY, usize::MAX);
                for &m in nb2.iter() {
                    let e = nearest[m];
                    if state[m] != State::Known || e == usize::MAX || e == best.1 {
                        continue;
                    }
                    let de = shape.distance_to_element(e, &x);
                    if de < best.0 || (de == best.0 && e < best.1) {
                        best = (de, e);
                    }
                }
                descend(shape, &adjacency, &x, best)
            }
        }
    };
    for f in 0..len {
        if state[f] != State::Known {
            continue;
        }
        let idx = lattice.unflat(f);
        neighbours(f, &idx, &mut nb);
        for &g in &nb {
            if state[g] == State::Far {
                state[g] = State::Trial;
                let (v, e) = update(g, &dist, &state, &nearest);
                dist[g] = v;
                nearest[g] = e;
                heap.push(Trial { value: v, index: g });
            }
        }
    }

    while let Some(Trial { value, index }) = heap.pop() {
        if state[index] == State::Known || value > dist[index] {
            continue;
        }
        state[index] = State::Known;
        let idx = lattice.unflat(index);
        neighbours(index, &idx, &mut nb);
        for &g in &nb {
            if state[g] == State::Known {
                continue;
            }
            let (v, e) = update(g, &dist, &state, &nearest);
            if v < dist[g] {
                dist[g] = v;
                nearest[g] = e;
                state[g] = State::Trial;
                heap.push(Trial { value: v, index: g });
            }
        }
    }

    let inside = if D == 2 { inside_by_parity(shape, &lattice) } else { inside_by_winding(shape, &lattice) };
    for f in 0..len {
        if inside[f] {
            dist[f] = -dist[f];
        }
    }
    SignedShape { lattice, values: dist, source: Some(shape.clone()) }
}

/// Elements sharing a vertex with each element.
fn element_adjacency<const D: usize>(shape: &DiscreteShape<D>) -> Vec<Vec<usize>> {
    let mut incident = vec![Vec::new(); shape.vertices().len()];
    for (e, el) in shape.elements().iter().enumerate() {
        for &v in el {
            incident[v].push(e);
        }
    }
    shape
        .elements()
        .iter()
        .enumerate()
        .map(|(e, el)| {
            let mut adj: Vec<usize> = el.iter().flat_map(|&v| incident[v].iter().copied()).filter(|&f| f != e).collect();
            adj.sort_unstable();
            adj.dedup();
            adj
        })
        .collect()
}

/// Greedy walk over adjacent elements towards the one closest to `x`.
fn descend<const D: usize>(
    shape: &DiscreteShape<D>,
    adjacency: &[Vec<usize>],
    x: &Vector<D>,
    mut best: (f64, usize),
) -> (f64, usize) {
    if best.1 == usize::MAX {
        return best;
    }
    loop {
        let mut improved = false;
        for &f in &adjacency[best.1] {
            let df = shape.distance_to_element(f, x);
            if df < best.0 {
                best = (df, f);
                improved = true;
            }
        }
        if !improved {
            return best;
        }
    }
}

fn for_each_in_box<const D: usize>(lo: &[usize; D], hi: &[usize; D], mut f: impl FnMut(&[usize; D])) {
    if (0..D).any(|k| lo[k] > hi[k]) {
        return;
    }
    let mut idx = *lo;
    loop {
        f(&idx);
        let mut k = 0;
        loop {
            if k == D {
                return;
            }
            if idx[k] < hi[k] {
                idx[k] += 1;
                break;
            }
            idx[k] = lo[k];
            k += 1;
        }
    }
}

/// First-order upwind solution of `|∇u| = 1` at lattice point `f` from its
/// known neighbours.
fn upwind_update<const D: usize>(lattice: &Lattice<D>, dist: &[f64], state: &[State], f: usize, h: f64) -> f64 {
    let n = lattice.points_per_axis();
    let idx = lattice.unflat(f);
    let mut a = [f64::INFINITY; D];
    for k in 0..D {
        let s = lattice.stride(k);
        if idx[k] > 0 && state[f - s] == State::Known {
            a[k] = a[k].min(dist[f - s]);
        }
        if idx[k] + 1 < n && state[f + s] == State::Known {
            a[k] = a[k].min(dist[f + s]);
        }
    }
    a.sort_by(f64::total_cmp);
    let mut u = a[0] + h;
    for m in 2..=D {
        if !a[m - 1].is_finite() || u <= a[m - 1] {
            break;
        }
        // Σ_{k<m} (u − a_k)² = h²
        let sum: f64 = a[..m].iter().sum();
        let sum2: f64 = a[..m].iter().map(|v| v * v).sum();
        let mf = m as f64;
        let disc = sum * sum - mf * (sum2 - h * h);
        if disc < 0.0 {
            break;
        }
        u = (sum + math::sqrt(disc)) / mf;
    }
    u
}

// Offsets that move the sign rays off lattice-aligned coincidences.
const RAY_OFFSET_A: f64 = 1.234_567_891e-9;
const RAY_OFFSET_B: f64 = 2.718_281_828e-9;

/// Even–odd parity of crossings of the horizontal ray through each lattice row.
fn inside_by_parity<const D: usize>(shape: &DiscreteShape<D>, lattice: &Lattice<D>) -> Vec<bool> {
    let n = lattice.points_per_axis();
    let h = lattice.spacing();
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); n];
    for e in 0..shape.elements().len() {
        let [a, b] = {
            let p = shape.element_points(e);
            [p[0], p[1 % D]]
        };
        let (ylo, yhi) = (a.0[1].min(b.0[1]), a.0[1].max(b.0[1]));
        let jlo = math::ceil((ylo - RAY_OFFSET_A) / h).max(0.0) as usize;
        let jhi = (math::floor((yhi - RAY_OFFSET_A) / h) as isize).min(n as isize - 1);
        if jhi < 0 {
            continue;
        }
        for j in jlo..=(jhi as usize) {
            let y = j as f64 * h + RAY_OFFSET_A;
            if (a.0[1] - y) * (b.0[1] - y) < 0.0 {
                let x = a.0[0] + (y - a.0[1]) * (b.0[0] - a.0[0]) / (b.0[1] - a.0[1]);
                rows[j].push(x);
            }
        }
    }
    let mut inside = vec![false; lattice.len()];
    for (j, row) in rows.iter_mut().enumerate() {
        row.sort_by(f64::total_cmp);
        let mut c = 0;
        for i in 0..n {
            let x = i as f64 * h;
            while c < row.len() && row[c] < x {
                c += 1;
            }
            let mut idx = [0; D];
            idx[0] = i;
            idx[1] = j;
            inside[lattice.flat(&idx)] = c % 2 == 1;
        }
    }
    inside
}

/// Winding number of the oriented surface around each lattice point, from
/// signed crossings of the vertical ray through each lattice column.
fn inside_by_winding<const D: usize>(shape: &DiscreteShape<D>, lattice: &Lattice<D>) -> Vec<bool> {
    let n = lattice.points_per_axis();
    let h = lattice.spacing();
    let mut columns: Vec<Vec<(f64, i32)>> = vec![Vec::new(); n * n];
    for e in 0..shape.elements().len() {
        let p = shape.element_points(e);
        let q: [[f64; 3]; 3] = core::array::from_fn(|k| [p[k].0[0], p[k].0[1], p[k].0[D - 1]]);
        let normal = cross3(&sub(&q[1], &q[0]), &sub(&q[2], &q[0]));
        let area2 = normal[2];
        if area2 == 0.0 {
            continue;
        }
        let orient = if area2 > 0.0 { 1 } else { -1 };
        let range = |k: usize, off: f64| {
            let mn = q.iter().map(|v| v[k]).fold(f64::INFINITY, f64::min);
            let mx = q.iter().map(|v| v[k]).fold(f64::NEG_INFINITY, f64::max);
            let lo = math::ceil((mn - off) / h).max(0.0) as usize;
            let hi = (math::floor((mx - off) / h) as isize).min(n as isize - 1);
            (lo, hi)
        };
        let (ilo, ihi) = range(0, RAY_OFFSET_A);
        let (jlo, jhi) = range(1, RAY_OFFSET_B);
        if ihi < 0 || jhi < 0 {
            continue;
        }
        for j in jlo..=(jhi as usize) {
            for i in ilo..=(ihi as usize) {
                let x = i as f64 * h + RAY_OFFSET_A;
                let y = j as f64 * h + RAY_OFFSET_B;
                // Barycentric coordinates of (x, y) in the projected triangle.
                let w0 = edge_fn(&q[1], &q[2], x, y) / area2;
                let w1 = edge_fn(&q[2], &q[0], x, y) / area2;
                let w2 = 1.0 - w0 - w1;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let z = w0 * q[0][2] + w1 * q[1][2] + w2 * q[2][2];
                columns[j * n + i].push((z, orient));
            }
        }
    }
    let mut inside = vec![false; lattice.len()];
    for j in 0..n {
        for i in 0..n {
            let col = &mut columns[j * n + i];
            col.sort_by(|a, b| a.0.total_cmp(&b.0));
            // winding of a point = Σ orientation of crossings above it
            let mut above: i32 = col.iter().map(|c| c.1).sum();
            let mut c = 0;
            for k in 0..n {
                let z = k as f64 * h;
                while c < col.len() && col[c].0 < z {
                    above -= col[c].1;
                    c += 1;
                }
                let mut idx = [0; D];
                idx[0] = i;
                idx[1] = j;
                idx[D - 1] = k;
                inside[lattice.flat(&idx)] = above.abs() as f64 >= 0.5;
            }
        }
    }
    inside
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn edge_fn(a: &[f64; 3], b: &[f64; 3], x: f64, y: f64) -> f64 {
    (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0])
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn max_error(s: &SignedShape<2>, c: [f64; 2], r: f64) -> f64 {
        let lat = *s.lattice();
        (0..lat.len())
            .map(|f| {
                let x = lat.position(&lat.unflat(f));
                let exact = math::sqrt((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) - r;
                (s.values()[f] - exact).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn circle_distance_within_two_spacings() {
        let shape = circle([0.5, 0.5], 0.2, 2000);
        let lat = Lattice::<2>::with_spacing(1.0 / 256.0).unwrap();
        for scheme in [MarchingScheme::ClosestElement, MarchingScheme::Upwind] {
            let s = fast_march_sdf_with(&shape, lat, scheme);
            let err = max_error(&s, [0.5, 0.5], 0.2);
            assert!(err <= 2.0 * lat.spacing(), "{scheme:?}: {err}");
            assert!(s.value_at(&[128, 128]) < 0.0);
            assert!(s.value_at(&[0, 0]) > 0.0);
        }
    }

    #[test]
    fn spacing_must_divide_unit_interval() {
        assert!(Lattice::<2>::with_spacing(0.3).is_err());
        assert!(Lattice::<2>::with_spacing(-0.25).is_err());
        assert_eq!(Lattice::<2>::with_spacing(0.125).unwrap().cells, 8);
    }

    #[test]
    fn flat_index_round_trip() {
        let lat = Lattice::<3>::new(6);
        for f in 0..lat.len() {
            assert_eq!(lat.flat(&lat.unflat(f)), f);
        }
        assert_eq!(lat.stride(2), 49);
    }

    #[test]
    fn eikonal_residual_in_band() {
        let shape = circle([0.5, 0.5], 0.2, 2000);
        let lat = Lattice::<2>::new(256);
        let h = lat.spacing();
        for scheme in [MarchingScheme::ClosestElement, MarchingScheme::Upwind] {
            let s = fast_march_sdf_with(&shape, lat, scheme);
            let mut res = Vec::new();
            for j in 1..256 {
                for i in 1..256 {
                    let v = |a: usize, b: usize| s.value_at(&[a, b]);
                    if v(i, j).abs() >= 0.1 {
                        continue;
                    }
                    let gx = (v(i + 1, j) - v(i - 1, j)) / (2.0 * h);
                    let gy = (v(i, j + 1) - v(i, j - 1)) / (2.0 * h);
                    res.push((math::sqrt(gx * gx + gy * gy) - 1.0).abs());
                }
            }
            res.sort_by(f64::total_cmp);
            assert!(res[res.len() / 2] <= 0.02, "{scheme:?}: {}", res[res.len() / 2]);
        }
    }

    #[test]
    fn sphere_gradient_has_unit_length() {
        let shape = sphere([0.5, 0.5, 0.5], 0.2, 4);
        let lat = Lattice::<3>::new(128);
        let h = lat.spacing();
        let s = fast_march_sdf(&shape, lat);
        let mut worst: f64 = 0.0;
        for f in 0..lat.len() {
            let idx = lat.unflat(f);
            let d = s.values()[f];
            if idx.iter().any(|&i| i == 0 || i == 128) || !(d.abs() > 2.0 * h && d.abs() < 0.1) {
                continue;
            }
            let mut g2 = 0.0;
            for k in 0..3 {
                let st = lat.stride(k);
                let g = (s.values()[f + st] - s.values()[f - st]) / (2.0 * h);
                g2 += g * g;
            }
            worst = worst.max((math::sqrt(g2) - 1.0).abs());
        }
        assert!(worst <= 0.05, "{worst}");
        assert!(s.value_at(&[64, 64, 64]) < 0.0);
        assert!(s.value_at(&[10, 64, 64]) > 0.0);
    }

    #[test]
    fn sphere_sign_matches_analytic() {
        let shape = sphere([0.45, 0.5, 0.55], 0.25, 3);
        let lat = Lattice::<3>::new(32);
        let s = fast_march_sdf(&shape, lat);
        for f in 0..lat.len() {
            let x = lat.position(&lat.unflat(f));
            let r = (x - Vector([0.45, 0.5, 0.55])).norm();
            if (r - 0.25).abs() > 0.01 {
                assert_eq!(s.values()[f] < 0.0, r < 0.25, "{x:?}");
            }
        }
    }

    #[test]
    fn polygon_sign_with_vertices_on_lattice_rows() {
        let pts = [[0.25, 0.25], [0.75, 0.25], [0.75, 0.75], [0.5, 0.5], [0.25, 0.75]];
        let shape = DiscreteShape::closed_polyline(pts.iter().map(|p| Vector(*p)).collect()).unwrap();
        let lat = Lattice::<2>::new(16);
        let s = fast_march_sdf(&shape, lat);
        assert!(s.value_at(&[6, 6]) < 0.0);
        assert!(s.value_at(&[8, 11]) > 0.0);
        assert!(s.value_at(&[2, 8]) > 0.0);
        assert!(s.value_at(&[11, 10]) < 0.0);
    }
}
