//! Triangulated terrains: mesh representation, vertex classification,
//! saddle unfolding and the downhill flow graph.
//!
//! A terrain is a triangulation of the plane with one distinct height per
//! vertex. The boundary convention follows the usual one-point
//! compactification: a sentinel vertex [`V_INF`] at height `+inf` is adjacent
//! to every convex-hull vertex, so every finite edge is shared by exactly two
//! faces and water can never leave the terrain.

use std::collections::HashMap;

use thiserror::Error;

use crate::geom::{signed_area2, Vec2};
use crate::scalar::{cmp_real, Real};

/// Sentinel id for the vertex at infinity.
pub const V_INF: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("vertex {0} has fewer than 3 neighbors")]
    TooFewNeighbors(u32),
    #[error("vertices {0} and {1} have identical heights")]
    DuplicateHeights(u32, u32),
    #[error("triangle {0} references vertex {1} out of range")]
    BadTriangle(usize, u32),
    #[error("mesh is not a manifold triangulation near vertex {0}")]
    NonManifold(u32),
    #[error("terrain has no finite triangles")]
    Empty,
}

/// Classification of a finite vertex by the sign pattern of its link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexClass {
    /// All neighbors higher; a sink.
    Minimum,
    /// All neighbors lower.
    Maximum,
    /// One ascent run and one descent run around the link.
    Regular,
    /// `2(k+1)` sign alternations around the link; `k >= 1` is the multiplicity.
    Saddle(u32),
}

/// Classify a vertex from its own height and the heights of its neighbors in
/// cyclic (rotational) order. Heights of `+inf` stand for the vertex at
/// infinity.
pub fn classify_vertex<T: Real>(own: T, cyclic_neighbors: &[T]) -> Result<VertexClass, MeshError> {
    if cyclic_neighbors.len() < 3 {
        return Err(MeshError::TooFewNeighbors(u32::MAX));
    }
    let mut ups = 0usize;
    let mut alternations = 0usize;
    let n = cyclic_neighbors.len();
    for i in 0..n {
        let cur = cyclic_neighbors[i] > own;
        let next = cyclic_neighbors[(i + 1) % n] > own;
        if cur {
            ups += 1;
        }
        if cur != next {
            alternations += 1;
        }
    }
    Ok(if ups == n {
        VertexClass::Minimum
    } else if ups == 0 {
        VertexClass::Maximum
    } else if alternations == 2 {
        VertexClass::Regular
    } else {
        debug_assert!(alternations % 2 == 0 && alternations >= 4);
        VertexClass::Saddle(alternations as u32 / 2 - 1)
    })
}

/// A triangulated terrain with distinct vertex heights.
///
/// Immutable after construction; read-only sharing across threads is safe.
#[derive(Debug, Clone)]
pub struct Terrain<T> {
    positions: Vec<Vec2<T>>,
    heights: Vec<T>,
    triangles: Vec<[u32; 3]>,
    /// CSR neighbor cycles; entries may be [`V_INF`] on hull vertices.
    nbr_offsets: Vec<u32>,
    nbr_data: Vec<u32>,
    /// Vertex ids sorted by descending height.
    order_desc: Vec<u32>,
    /// Position of each vertex in `order_desc`.
    rank: Vec<u32>,
}

impl<T: Real> Terrain<T> {
    /// Build a terrain from raw parts. Heights must be pairwise distinct.
    pub fn from_parts(
        positions: Vec<Vec2<T>>,
        heights: Vec<T>,
        triangles: Vec<[u32; 3]>,
    ) -> Result<Self, MeshError> {
        Self::build(positions, heights, triangles, false)
    }

    /// Like [`Terrain::from_parts`] but resolves duplicate heights with a
    /// deterministic id-ordered perturbation instead of rejecting them.
    pub fn from_parts_dedup(
        positions: Vec<Vec2<T>>,
        heights: Vec<T>,
        triangles: Vec<[u32; 3]>,
    ) -> Result<Self, MeshError> {
        Self::build(positions, heights, triangles, true)
    }

    fn build(
        positions: Vec<Vec2<T>>,
        mut heights: Vec<T>,
        mut triangles: Vec<[u32; 3]>,
        dedup: bool,
    ) -> Result<Self, MeshError> {
        let n = positions.len();
        if triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        for (i, t) in triangles.iter().enumerate() {
            for &v in t {
                if v as usize >= n {
                    return Err(MeshError::BadTriangle(i, v));
                }
            }
        }

        if dedup {
            dedup_heights(&mut heights);
        }
        let mut by_height: Vec<u32> = (0..n as u32).collect();
        by_height.sort_by(|&a, &b| cmp_real(heights[a as usize], heights[b as usize]));
        for w in by_height.windows(2) {
            if heights[w[0] as usize] == heights[w[1] as usize] {
                return Err(MeshError::DuplicateHeights(w[0], w[1]));
            }
        }

        // Orient every triangle counter-clockwise so fan walking is coherent.
        for t in triangles.iter_mut() {
            let area2 = signed_area2(
                positions[t[0] as usize],
                positions[t[1] as usize],
                positions[t[2] as usize],
            );
            if area2 < T::zero() {
                t.swap(1, 2);
            }
        }

        let (nbr_offsets, nbr_data) = build_cycles(n, &triangles)?;

        let mut order_desc = by_height;
        order_desc.reverse();
        let mut rank = vec![0u32; n];
        for (r, &v) in order_desc.iter().enumerate() {
            rank[v as usize] = r as u32;
        }

        Ok(Terrain {
            positions,
            heights,
            triangles,
            nbr_offsets,
            nbr_data,
            order_desc,
            rank,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn position(&self, v: u32) -> Vec2<T> {
        self.positions[v as usize]
    }

    pub fn positions(&self) -> &[Vec2<T>] {
        &self.positions
    }

    pub fn heights(&self) -> &[T] {
        &self.heights
    }

    /// Height of a vertex; `+inf` for [`V_INF`].
    pub fn height(&self, v: u32) -> T {
        if v == V_INF {
            T::infinity()
        } else {
            self.heights[v as usize]
        }
    }

    /// Neighbors of `v` in cyclic order; may contain [`V_INF`].
    pub fn neighbors(&self, v: u32) -> &[u32] {
        let v = v as usize;
        &self.nbr_data[self.nbr_offsets[v] as usize..self.nbr_offsets[v + 1] as usize]
    }

    /// Finite vertex ids sorted by descending height.
    pub fn order_desc(&self) -> &[u32] {
        &self.order_desc
    }

    /// Rank of `v` in the descending-height order.
    pub fn rank(&self, v: u32) -> u32 {
        self.rank[v as usize]
    }

    pub fn is_hull(&self, v: u32) -> bool {
        self.neighbors(v).contains(&V_INF)
    }

    pub fn classify(&self, v: u32) -> Result<VertexClass, MeshError> {
        let hs: Vec<T> = self.neighbors(v).iter().map(|&w| self.height(w)).collect();
        classify_vertex(self.heights[v as usize], &hs).map_err(|_| MeshError::TooFewNeighbors(v))
    }

    /// All sinks (minima), in ascending id order.
    pub fn sinks(&self) -> Vec<u32> {
        (0..self.vertex_count() as u32)
            .filter(|&v| {
                self.neighbors(v)
                    .iter()
                    .all(|&w| self.height(w) > self.heights[v as usize])
            })
            .collect()
    }

    /// Smallest gap between consecutive distinct heights.
    pub fn min_height_gap(&self) -> T {
        let mut hs = self.heights.clone();
        hs.sort_by(|a, b| cmp_real(*a, *b));
        let mut gap = T::infinity();
        for w in hs.windows(2) {
            let d = w[1] - w[0];
            if d < gap {
                gap = d;
            }
        }
        gap
    }

    /// Planar length of the edge `(u, v)`.
    pub fn edge_len(&self, u: u32, v: u32) -> T {
        self.positions[u as usize]
            .sub(self.positions[v as usize])
            .norm()
    }

    pub fn raw_parts(&self) -> (Vec<Vec2<T>>, Vec<T>, Vec<[u32; 3]>) {
        (
            self.positions.clone(),
            self.heights.clone(),
            self.triangles.clone(),
        )
    }
}

fn dedup_heights<T: Real>(heights: &mut [T]) {
    let mut idx: Vec<u32> = (0..heights.len() as u32).collect();
    idx.sort_by(|&a, &b| {
        cmp_real(heights[a as usize], heights[b as usize]).then(a.cmp(&b))
    });
    for i in 1..idx.len() {
        let prev = heights[idx[i - 1] as usize];
        let cur = heights[idx[i] as usize];
        if cur <= prev {
            let bump = (prev.abs().max(T::one())) * T::epsilon() * T::lit(4.0);
            heights[idx[i] as usize] = prev + bump;
        }
    }
}

/// Build cyclic neighbor lists by fan-walking the CCW-oriented triangles.
/// Hull vertices get [`V_INF`] inserted in the boundary gap.
fn build_cycles(n: usize, triangles: &[[u32; 3]]) -> Result<(Vec<u32>, Vec<u32>), MeshError> {
    // succ[v]: map from link vertex a to link vertex b for each wedge (v,a,b).
    let mut succ: Vec<HashMap<u32, u32>> = vec![HashMap::new(); n];
    let mut pred: Vec<HashMap<u32, u32>> = vec![HashMap::new(); n];
    for t in triangles {
        let [a, b, c] = *t;
        for (v, x, y) in [(a, b, c), (b, c, a), (c, a, b)] {
            if succ[v as usize].insert(x, y).is_some() {
                return Err(MeshError::NonManifold(v));
            }
            if pred[v as usize].insert(y, x).is_some() {
                return Err(MeshError::NonManifold(v));
            }
        }
    }

    let mut offsets = Vec::with_capacity(n + 1);
    let mut data = Vec::new();
    offsets.push(0u32);
    for v in 0..n {
        let s = &succ[v];
        if s.is_empty() {
            return Err(MeshError::TooFewNeighbors(v as u32));
        }
        // A boundary fan has a unique start (no predecessor); interior fans
        // are closed cycles.
        let starts: Vec<u32> = s
            .keys()
            .copied()
            .filter(|x| !pred[v].contains_key(x))
            .collect();
        let (start, boundary) = match starts.len() {
            0 => (*s.keys().min().unwrap(), false),
            1 => (starts[0], true),
            _ => return Err(MeshError::NonManifold(v as u32)),
        };
        let mut cycle = vec![start];
        let mut cur = start;
        while let Some(&next) = s.get(&cur) {
            if next == start {
                break;
            }
            cycle.push(next);
            cur = next;
        }
        if cycle.len() != s.len() + if boundary { 1 } else { 0 } {
            return Err(MeshError::NonManifold(v as u32));
        }
        if boundary {
            cycle.push(V_INF);
        }
        if cycle.len() < 3 {
            return Err(MeshError::TooFewNeighbors(v as u32));
        }
        data.extend_from_slice(&cycle);
        offsets.push(data.len() as u32);
    }
    Ok((offsets, data))
}

/// Split every saddle of multiplicity `k >= 2` into `k` simple saddles.
///
/// Each split replaces the vertex by an edge between two copies, hands one
/// lower-run/upper-run pair of the link to the new copy, and seals the slit
/// with two triangles. Heights within a split group end up symmetric around
/// the original height with spacing small enough that sublevel-set
/// connectivity away from the group is untouched. The result is idempotent.
pub fn unfold_saddles<T: Real>(terrain: &Terrain<T>) -> Result<Terrain<T>, MeshError> {
    let (mut positions, mut heights, mut triangles) = terrain.raw_parts();
    let gap = terrain.min_height_gap();
    // groups: (original height, members created so far, residual id)
    let mut groups: Vec<(T, Vec<u32>, u32)> = Vec::new();
    let mut cur = terrain.clone();
    loop {
        let mut split_done = false;
        for v in 0..cur.vertex_count() as u32 {
            if let VertexClass::Saddle(k) = cur.classify(v)? {
                if k < 2 {
                    continue;
                }
                let group = match groups.iter_mut().find(|g| g.2 == v) {
                    Some(g) => g,
                    None => {
                        groups.push((cur.heights()[v as usize], Vec::new(), v));
                        groups.last_mut().unwrap()
                    }
                };
                let new_id = split_once(&cur, v, gap, group.1.len(), &mut positions, &mut heights, &mut triangles);
                group.1.push(new_id);
                cur = Terrain::from_parts(positions.clone(), heights.clone(), triangles.clone())?;
                split_done = true;
                break;
            }
        }
        if !split_done {
            break;
        }
    }
    if groups.is_empty() {
        return Ok(terrain.clone());
    }
    // Final heights: order-preserving symmetric offsets around the original
    // height, so the provisional sign structure is kept intact.
    for (h0, members, residual) in &groups {
        let mut all: Vec<u32> = members.clone();
        all.push(*residual);
        all.sort_by(|&a, &b| cmp_real(heights[a as usize], heights[b as usize]));
        let k = all.len();
        let eps = gap / T::of_usize(4 * k);
        for (j, &id) in all.iter().enumerate() {
            let off = T::of_usize(2 * j) - T::of_usize(k - 1);
            heights[id as usize] = *h0 + off * eps;
        }
    }
    Terrain::from_parts(positions, heights, triangles)
}

/// Split one lower/upper run pair off the multi-saddle `v`. Returns the new
/// vertex id. Mutates the raw arrays; the caller rebuilds the terrain.
fn split_once<T: Real>(
    cur: &Terrain<T>,
    v: u32,
    gap: T,
    nth: usize,
    positions: &mut Vec<Vec2<T>>,
    heights: &mut Vec<T>,
    triangles: &mut Vec<[u32; 3]>,
) -> u32 {
    let own = cur.heights()[v as usize];
    let cycle: Vec<u32> = cur.neighbors(v).to_vec();
    let m = cycle.len();
    let is_up = |w: u32| cur.height(w) > own;

    // Rotate so the cycle starts at the first element of an upper run whose
    // last element is finite (avoids pairing the slit with the hull gap).
    let mut start = None;
    for i in 0..m {
        let prev = cycle[(i + m - 1) % m];
        if is_up(cycle[i]) && !is_up(prev) {
            // i begins an upper run; find the run end.
            let mut j = i;
            while is_up(cycle[(j + 1) % m]) {
                j = (j + 1) % m;
            }
            if cycle[j] != V_INF {
                start = Some(i);
                break;
            }
        }
    }
    let start = start.expect("multi-saddle has a finite-ended upper run");
    let rot: Vec<u32> = (0..m).map(|i| cycle[(start + i) % m]).collect();

    // rot = U0 L1 U1 L2 ... ; a = last of U0, b = first of L2.
    let mut i = 0;
    while i + 1 < m && is_up(rot[i + 1]) {
        i += 1;
    }
    let a_idx = i; // last of U0
    let mut j = a_idx + 1; // L1 start
    while j + 1 < m && !is_up(rot[j + 1]) {
        j += 1;
    }
    let mut l = j + 1; // U1 start
    while l + 1 < m && is_up(rot[l + 1]) {
        l += 1;
    }
    let b_idx = l + 1; // first of L2
    let a = rot[a_idx];
    let b = rot[b_idx];
    debug_assert!(b != V_INF && a != V_INF);
    let arc: Vec<u32> = rot[a_idx + 1..b_idx].to_vec(); // L1 ∪ U1

    // New vertex: provisional height just below v, position nudged toward the
    // arc it takes over.
    let new_id = positions.len() as u32;
    let mut centroid = Vec2::new(T::zero(), T::zero());
    let mut cnt = 0usize;
    for &w in arc.iter().chain([a, b].iter()) {
        if w != V_INF {
            centroid = centroid.add(cur.position(w));
            cnt += 1;
        }
    }
    centroid = centroid.scale(T::one() / T::of_usize(cnt));
    let vpos = cur.position(v);
    let dir = centroid.sub(vpos);
    let min_edge = cycle
        .iter()
        .filter(|&&w| w != V_INF)
        .map(|&w| cur.edge_len(v, w))
        .fold(T::infinity(), |acc, d| if d < acc { d } else { acc });
    let delta = min_edge / T::lit(64.0);
    let npos = vpos.add(dir.normalized().scale(delta));
    positions.push(npos);
    heights.push(own - gap * T::of_usize(nth + 1) / T::lit(1024.0));

    // Reassign triangles whose wedge lies strictly inside [a..b] to the new
    // vertex: those are exactly the triangles (v, x, y) with x in {a} ∪ arc
    // and y in arc ∪ {b}.
    let takes: std::collections::HashSet<u32> = arc.iter().copied().chain([a, b]).collect();
    for t in triangles.iter_mut() {
        if let Some(p) = t.iter().position(|&x| x == v) {
            let x = t[(p + 1) % 3];
            let y = t[(p + 2) % 3];
            let x_in = takes.contains(&x) && x != b;
            let y_in = takes.contains(&y) && y != a;
            if x_in && y_in {
                t[p] = new_id;
            }
        }
    }
    // Seal the slit with (new, v, a) and (v, new, b), oriented CCW.
    for (p, q, r) in [(new_id, v, a), (v, new_id, b)] {
        if r == V_INF {
            continue;
        }
        let mut tri = [p, q, r];
        if signed_area2(
            positions[p as usize],
            positions[q as usize],
            positions[r as usize],
        ) < T::zero()
        {
            tri.swap(1, 2);
        }
        triangles.push(tri);
    }
    new_id
}

/// Local flow model at a vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowModel<T> {
    /// All water follows the steepest downslope edge (ties to smallest id).
    Sfd,
    /// Water splits over all downslope edges proportionally to slope^exponent.
    Mfd { exponent: T },
}

impl<T: Real> FlowModel<T> {
    pub fn mfd() -> Self {
        FlowModel::Mfd { exponent: T::one() }
    }
}

/// Downhill-directed weighted DAG over the terrain edges.
#[derive(Debug, Clone)]
pub struct FlowGraph<T> {
    model: FlowModel<T>,
    out_offsets: Vec<u32>,
    /// `(target, initial local flow)` per downslope edge, in neighbor-cycle order.
    out_edges: Vec<(u32, T)>,
    in_offsets: Vec<u32>,
    /// Sources of incoming edges, ascending.
    in_edges: Vec<u32>,
}

impl<T: Real> FlowGraph<T> {
    pub fn model(&self) -> FlowModel<T> {
        self.model
    }

    /// Outgoing `(target, weight)` pairs of `v`.
    pub fn out(&self, v: u32) -> &[(u32, T)] {
        let v = v as usize;
        &self.out_edges[self.out_offsets[v] as usize..self.out_offsets[v + 1] as usize]
    }

    /// Sources of incoming edges of `v`, ascending by id.
    pub fn incoming(&self, v: u32) -> &[u32] {
        let v = v as usize;
        &self.in_edges[self.in_offsets[v] as usize..self.in_offsets[v + 1] as usize]
    }

    /// Initial weight of the edge `(u, v)`, or 0 when absent.
    pub fn weight(&self, u: u32, v: u32) -> T {
        self.out(u)
            .iter()
            .find(|(w, _)| *w == v)
            .map(|(_, lam)| *lam)
            .unwrap_or_else(T::zero)
    }

    pub fn edge_count(&self) -> usize {
        self.out_edges.len()
    }
}

/// Direct every terrain edge downhill and attach initial local-flow weights.
pub fn build_flow_graph<T: Real>(terrain: &Terrain<T>, model: FlowModel<T>) -> FlowGraph<T> {
    let n = terrain.vertex_count();
    let mut out_offsets = Vec::with_capacity(n + 1);
    let mut out_edges: Vec<(u32, T)> = Vec::new();
    out_offsets.push(0u32);
    for v in 0..n as u32 {
        let h = terrain.heights()[v as usize];
        let down: Vec<u32> = terrain
            .neighbors(v)
            .iter()
            .copied()
            .filter(|&w| w != V_INF && terrain.heights()[w as usize] < h)
            .collect();
        if !down.is_empty() {
            match model {
                FlowModel::Sfd => {
                    let mut best = down[0];
                    let mut best_slope = T::neg_infinity();
                    for &w in &down {
                        let s = (h - terrain.heights()[w as usize]) / terrain.edge_len(v, w);
                        if s > best_slope || (s == best_slope && w < best) {
                            best = w;
                            best_slope = s;
                        }
                    }
                    out_edges.push((best, T::one()));
                }
                FlowModel::Mfd { exponent } => {
                    let slopes: Vec<T> = down
                        .iter()
                        .map(|&w| {
                            let s = (h - terrain.heights()[w as usize]) / terrain.edge_len(v, w);
                            s.powf(exponent)
                        })
                        .collect();
                    let total = slopes.iter().fold(T::zero(), |acc, &s| acc + s);
                    for (&w, &s) in down.iter().zip(&slopes) {
                        out_edges.push((w, s / total));
                    }
                }
            }
        }
        out_offsets.push(out_edges.len() as u32);
    }

    let mut ins: Vec<Vec<u32>> = vec![Vec::new(); n];
    for v in 0..n as u32 {
        let s = out_offsets[v as usize] as usize..out_offsets[v as usize + 1] as usize;
        for &(w, _) in &out_edges[s] {
            ins[w as usize].push(v);
        }
    }
    let mut in_offsets = Vec::with_capacity(n + 1);
    let mut in_edges = Vec::new();
    in_offsets.push(0u32);
    for mut srcs in ins {
        srcs.sort_unstable();
        in_edges.extend_from_slice(&srcs);
        in_offsets.push(in_edges.len() as u32);
    }

    FlowGraph {
        model,
        out_offsets,
        out_edges,
        in_offsets,
        in_edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn classify_matches_link_patterns() {
        assert_eq!(
            classify_vertex(5.0, &[6.0, 7.0, 8.0]).unwrap(),
            VertexClass::Minimum
        );
        assert_eq!(
            classify_vertex(5.0, &[3.0, 7.0, 2.0, 8.0]).unwrap(),
            VertexClass::Saddle(1)
        );
        assert_eq!(
            classify_vertex(5.0, &[3.0, 4.0, 7.0, 8.0]).unwrap(),
            VertexClass::Regular
        );
        assert_eq!(
            classify_vertex(5.0, &[1.0, 2.0, 3.0]).unwrap(),
            VertexClass::Maximum
        );
        assert_eq!(
            classify_vertex(5.0, &[1.0, 9.0, 2.0, 8.0, 3.0, 7.0]).unwrap(),
            VertexClass::Saddle(2)
        );
        assert_eq!(
            classify_vertex(5.0, &[6.0, 7.0]),
            Err(MeshError::TooFewNeighbors(u32::MAX))
        );
    }

    #[test]
    fn duplicate_heights_rejected_by_default() {
        let pos = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        let err = Terrain::from_parts(pos.clone(), vec![1.0, 1.0, 2.0], vec![[0, 1, 2]]);
        assert!(matches!(err, Err(MeshError::DuplicateHeights(_, _))));
        let ok = Terrain::from_parts_dedup(pos, vec![1.0, 1.0, 2.0], vec![[0, 1, 2]]).unwrap();
        assert_ne!(ok.heights()[0], ok.heights()[1]);
    }

    #[test]
    fn hull_vertices_see_the_vertex_at_infinity() {
        let t = fixtures::two_pit();
        let hull_count = (0..t.vertex_count() as u32).filter(|&v| t.is_hull(v)).count();
        assert!(hull_count >= 4);
        // Every neighbor cycle is closed and at least a triangle fan.
        for v in 0..t.vertex_count() as u32 {
            assert!(t.neighbors(v).len() >= 3, "vertex {v}");
        }
    }

    #[test]
    fn order_desc_is_a_topological_order_of_the_flow_graph() {
        let t = fixtures::two_pit();
        let g = build_flow_graph(&t, FlowModel::mfd());
        for &v in t.order_desc() {
            for &(w, _) in g.out(v) {
                assert!(t.rank(w) > t.rank(v), "edge {v}->{w} goes up in rank");
            }
        }
    }

    #[test]
    fn mfd_weights_sum_to_one() {
        let t = fixtures::two_pit();
        for model in [FlowModel::mfd(), FlowModel::Mfd { exponent: 2.0 }] {
            let g = build_flow_graph(&t, model);
            for v in 0..t.vertex_count() as u32 {
                let out = g.out(v);
                if out.is_empty() {
                    continue;
                }
                let sum: f64 = out.iter().map(|(_, w)| *w).sum();
                assert!((sum - 1.0).abs() < 1e-12, "vertex {v}: {sum}");
            }
        }
    }

    #[test]
    fn equal_slopes_split_evenly_under_mfd() {
        // Ridge vertex 4 in the middle of a symmetric tent.
        let pos = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(0.0, 2.0),
            Vec2::new(1.0, 1.0),
        ];
        let h = vec![0.0, 0.125, 0.25, 0.375, 10.0];
        let tris = vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]];
        let t = Terrain::from_parts(pos, h, tris).unwrap();
        let g = build_flow_graph(&t, FlowModel::mfd());
        let out = g.out(4);
        assert_eq!(out.len(), 4);
        let g2 = build_flow_graph(&t, FlowModel::Sfd);
        // Steepest neighbor of 4 is vertex 0 (lowest at equal distance).
        assert_eq!(g2.out(4), &[(0, 1.0)]);
        assert!(g2.out(0).is_empty(), "sink has no outgoing edges");
    }

    #[test]
    fn sfd_breaks_slope_ties_by_smallest_id() {
        let pos = vec![
            Vec2::new(-1.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(0.0, -1.0),
        ];
        // 2 is the apex; 0 and 1 are equally steep below it.
        let h = vec![0.0, 0.0, 1.0, -1.0];
        let t = Terrain::from_parts_dedup(pos, h, vec![[0, 2, 1], [0, 1, 3]]).unwrap();
        let g = build_flow_graph(&t, FlowModel::Sfd);
        assert_eq!(g.out(2)[0].0, 0);
    }

    #[test]
    fn monkey_saddle_unfolds_into_two_simple_saddles() {
        let t = fixtures::monkey_saddle();
        assert_eq!(t.classify(0).unwrap(), VertexClass::Saddle(2));
        let u = unfold_saddles(&t).unwrap();
        assert_eq!(u.vertex_count(), t.vertex_count() + 1);
        let center_ids = [0u32, t.vertex_count() as u32];
        for &v in &center_ids {
            assert_eq!(u.classify(v).unwrap(), VertexClass::Saddle(1), "vertex {v}");
        }
        let h0 = t.heights()[0];
        let (lo, hi) = (
            u.heights()[center_ids[0] as usize].min(u.heights()[center_ids[1] as usize]),
            u.heights()[center_ids[0] as usize].max(u.heights()[center_ids[1] as usize]),
        );
        assert!((h0 - lo) > 0.0 && (hi - h0) > 0.0, "heights straddle the original");
        assert!(((h0 - lo) - (hi - h0)).abs() < 1e-12, "offsets symmetric");
        // No other vertex moved.
        for v in 1..t.vertex_count() {
            assert_eq!(t.heights()[v], u.heights()[v]);
        }
    }

    #[test]
    fn unfold_is_identity_on_simple_terrains_and_idempotent() {
        let t = fixtures::two_pit();
        let u = unfold_saddles(&t).unwrap();
        assert_eq!(u.vertex_count(), t.vertex_count());
        assert_eq!(u.heights(), t.heights());

        let m = fixtures::monkey_saddle();
        let once = unfold_saddles(&m).unwrap();
        let twice = unfold_saddles(&once).unwrap();
        assert_eq!(once.vertex_count(), twice.vertex_count());
        assert_eq!(once.heights(), twice.heights());
    }

    #[test]
    fn unfold_preserves_sublevel_connectivity_off_the_split_band() {
        let m = fixtures::monkey_saddle();
        let u = unfold_saddles(&m).unwrap();
        // Component counts of {h < l} must agree for levels away from the
        // center height (the split band is narrower than any height gap).
        let heights: Vec<f64> = m.heights().to_vec();
        let mut levels: Vec<f64> = heights.iter().map(|h| h + 1e-6).collect();
        levels.extend(heights.iter().map(|h| h - 1e-6));
        for &l in &levels {
            if (l - m.heights()[0]).abs() < 1e-3 {
                continue;
            }
            assert_eq!(
                fixtures::sublevel_components(&m, l),
                fixtures::sublevel_components(&u, l),
                "level {l}"
            );
        }
    }
}
