//! Merge tree of a terrain: how sublevel-set components appear at sinks and
//! merge at negative saddles, plus per-vertex depression annotations.
//!
//! Each tree edge corresponds to a maximal depression; we identify the
//! depression with the node at the edge's lower end, so "depression id" and
//! "node id" are used interchangeably. The root node stands for the
//! depression extending to infinity (its capacity is infinite).

use thiserror::Error;

use crate::scalar::{cmp_real, Real};
use crate::terrain::{Terrain, V_INF};

#[derive(Debug, Error, PartialEq)]
pub enum MergeTreeError {
    #[error("vertex {0} merges more than two depressions; unfold saddles first")]
    NonSimpleSaddle(u32),
    #[error("terrain is not connected")]
    Disconnected,
    #[error("level {level} lies above the delimiting saddle of depression {node}")]
    LevelAboveSaddle { node: u32, level: f64 },
    #[error("labels not assigned; call assign_inorder_labels first")]
    Unlabeled,
}

#[derive(Debug, Clone)]
struct Node<T> {
    vertex: u32,
    height: T,
    parent: Option<u32>,
    children: Option<[u32; 2]>,
    label: u32,
    /// Min/max label over the subtree (inclusive).
    label_range: (u32, u32),
    /// Volume of this node's depression at its delimiting (parent) saddle
    /// level; infinite for the root. Filled by `annotate_vertices`.
    capacity: T,
}

/// Binary merge tree; leaves are sinks, internal nodes are negative saddles.
#[derive(Debug, Clone)]
pub struct MergeTree<T> {
    nodes: Vec<Node<T>>,
    root: u32,
    /// Node of a sink or negative-saddle vertex; `u32::MAX` otherwise.
    node_of_vertex: Vec<u32>,
    labeled: bool,
}

impl<T: Real> MergeTree<T> {
    /// Build the tree by an ascending union-find sweep over mesh adjacency.
    /// Requires simple saddles (run [`crate::terrain::unfold_saddles`] first).
    pub fn build(terrain: &Terrain<T>) -> Result<Self, MergeTreeError> {
        let n = terrain.vertex_count();
        let mut nodes: Vec<Node<T>> = Vec::new();
        let mut node_of_vertex = vec![u32::MAX; n];
        let mut uf = UnionFind::new(n);
        // Component root -> current tree node.
        let mut comp_node = vec![u32::MAX; n];

        let asc: Vec<u32> = terrain.order_desc().iter().rev().copied().collect();
        for &v in &asc {
            let h = terrain.heights()[v as usize];
            let mut comps: Vec<u32> = terrain
                .neighbors(v)
                .iter()
                .filter(|&&w| w != V_INF && terrain.heights()[w as usize] < h)
                .map(|&w| uf.find(w))
                .collect();
            comps.sort_unstable();
            comps.dedup();
            match comps.len() {
                0 => {
                    let id = nodes.len() as u32;
                    nodes.push(Node {
                        vertex: v,
                        height: h,
                        parent: None,
                        children: None,
                        label: 0,
                        label_range: (0, 0),
                        capacity: T::nan(),
                    });
                    node_of_vertex[v as usize] = id;
                    comp_node[v as usize] = id;
                }
                1 => {
                    let r = uf.union(comps[0], v);
                    let nid = comp_node[comps[0] as usize];
                    comp_node[r as usize] = nid;
                }
                2 => {
                    let id = nodes.len() as u32;
                    let mut kids = [
                        comp_node[comps[0] as usize],
                        comp_node[comps[1] as usize],
                    ];
                    kids.sort_unstable();
                    nodes.push(Node {
                        vertex: v,
                        height: h,
                        parent: None,
                        children: Some(kids),
                        label: 0,
                        label_range: (0, 0),
                        capacity: T::nan(),
                    });
                    for k in kids {
                        nodes[k as usize].parent = Some(id);
                    }
                    node_of_vertex[v as usize] = id;
                    let r1 = uf.union(comps[0], comps[1]);
                    let r = uf.union(r1, v);
                    comp_node[r as usize] = id;
                }
                _ => return Err(MergeTreeError::NonSimpleSaddle(v)),
            }
        }

        let root_comp = uf.find(asc[0]);
        for &v in &asc {
            if uf.find(v) != root_comp {
                return Err(MergeTreeError::Disconnected);
            }
        }
        let root = comp_node[root_comp as usize];
        Ok(MergeTree {
            nodes,
            root,
            node_of_vertex,
            labeled: false,
        })
    }

    /// Assign in-order labels (1-based) and subtree label ranges.
    pub fn assign_inorder_labels(&mut self) {
        let mut next = 1u32;
        // Iterative in-order traversal.
        let mut stack: Vec<(u32, bool)> = vec![(self.root, false)];
        while let Some((id, expanded)) = stack.pop() {
            let node = &self.nodes[id as usize];
            match (node.children, expanded) {
                (Some([l, r]), false) => {
                    stack.push((r, false));
                    stack.push((id, true));
                    stack.push((l, false));
                }
                _ => {
                    self.nodes[id as usize].label = next;
                    next += 1;
                }
            }
        }
        // Ranges bottom-up (children have smaller ids than their parent).
        for id in 0..self.nodes.len() {
            let lab = self.nodes[id].label;
            self.nodes[id].label_range = (lab, lab);
        }
        for id in 0..self.nodes.len() {
            if let Some([l, r]) = self.nodes[id].children {
                let (llo, lhi) = self.nodes[l as usize].label_range;
                let (rlo, rhi) = self.nodes[r as usize].label_range;
                let lab = self.nodes[id].label;
                self.nodes[id].label_range =
                    (llo.min(rlo).min(lab), lhi.max(rhi).max(lab));
            }
        }
        self.labeled = true;
    }

    pub fn root(&self) -> u32 {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.children.is_none()).count()
    }

    pub fn vertex(&self, node: u32) -> u32 {
        self.nodes[node as usize].vertex
    }

    pub fn height(&self, node: u32) -> T {
        self.nodes[node as usize].height
    }

    pub fn parent(&self, node: u32) -> Option<u32> {
        self.nodes[node as usize].parent
    }

    pub fn children(&self, node: u32) -> Option<[u32; 2]> {
        self.nodes[node as usize].children
    }

    pub fn is_leaf(&self, node: u32) -> bool {
        self.nodes[node as usize].children.is_none()
    }

    pub fn label(&self, node: u32) -> u32 {
        self.nodes[node as usize].label
    }

    pub fn label_range(&self, node: u32) -> (u32, u32) {
        self.nodes[node as usize].label_range
    }

    /// Volume of the node's depression at its delimiting saddle; infinite
    /// for the root. Available after `annotate_vertices`.
    pub fn capacity(&self, node: u32) -> T {
        self.nodes[node as usize].capacity
    }

    /// Node of a sink or negative-saddle vertex.
    pub fn node_of_vertex(&self, v: u32) -> Option<u32> {
        match self.node_of_vertex[v as usize] {
            u32::MAX => None,
            id => Some(id),
        }
    }

    /// Sibling of a non-root node.
    pub fn sibling(&self, node: u32) -> Option<u32> {
        let p = self.parent(node)?;
        let [l, r] = self.children(p).unwrap();
        Some(if l == node { r } else { l })
    }

    /// Height of the delimiting saddle of a node's depression (`+inf` for
    /// the root depression).
    pub fn rim_height(&self, node: u32) -> T {
        match self.parent(node) {
            Some(p) => self.height(p),
            None => T::infinity(),
        }
    }

    /// Leaves of the subtree under `node`, in node-id order.
    pub fn subtree_leaves(&self, node: u32) -> Vec<u32> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(id) = stack.pop() {
            match self.children(id) {
                Some([l, r]) => {
                    stack.push(l);
                    stack.push(r);
                }
                None => out.push(id),
            }
        }
        out.sort_unstable();
        out
    }

    fn set_capacity(&mut self, node: u32, cap: T) {
        self.nodes[node as usize].capacity = cap;
    }
}

/// Per-vertex annotations: depression volume `vol(β_v)`, smallest maximal
/// depression, and in-order label.
#[derive(Debug, Clone)]
pub struct VertexAnnotation<T> {
    vol_beta: Vec<T>,
    smallest_depr: Vec<u32>,
    label: Vec<u32>,
}

impl<T: Real> VertexAnnotation<T> {
    /// `vol(β_v)`: volume of the depression delimited by `v` at level `h(v)`.
    pub fn vol_beta(&self, v: u32) -> T {
        self.vol_beta[v as usize]
    }

    /// Node id of the smallest maximal depression containing `v`.
    pub fn smallest_depression(&self, v: u32) -> u32 {
        self.smallest_depr[v as usize]
    }

    /// In-order label of that depression.
    pub fn label(&self, v: u32) -> u32 {
        self.label[v as usize]
    }
}

/// Piecewise-quadratic sublevel-area state of one growing component.
#[derive(Debug, Clone, Copy, Default)]
struct AreaState<T> {
    /// Area polynomial `a0 + a1 l + a2 l^2` valid at the current level.
    a: [T; 3],
    /// Accumulated volume up to `level`.
    volume: T,
    level: T,
}

impl<T: Real> AreaState<T> {
    fn advance(&mut self, to: T) {
        let l0 = self.level;
        if to == l0 {
            return;
        }
        let [a0, a1, a2] = self.a;
        let half = T::lit(0.5);
        let third = T::lit(1.0 / 3.0);
        let int = |l: T| a0 * l + half * a1 * l * l + third * a2 * l * l * l;
        self.volume = self.volume + int(to) - int(l0);
        self.level = to;
    }

    fn merge(&mut self, other: &AreaState<T>) {
        debug_assert!(self.level == other.level);
        for i in 0..3 {
            self.a[i] = self.a[i] + other.a[i];
        }
        self.volume = self.volume + other.volume;
    }

    fn add_poly(&mut self, p: [T; 3], sign: T) {
        for i in 0..3 {
            self.a[i] = self.a[i] + sign * p[i];
        }
    }
}

/// Clipped-area polynomial pieces of one face, by sorted vertex heights.
fn face_pieces<T: Real>(terrain: &Terrain<T>, tri: [u32; 3]) -> ([T; 3], [[T; 3]; 3]) {
    let mut z: Vec<T> = tri
        .iter()
        .map(|&v| terrain.heights()[v as usize])
        .collect();
    z.sort_by(|a, b| cmp_real(*a, *b));
    let (z1, z2, z3) = (z[0], z[1], z[2]);
    let area = crate::geom::signed_area2(
        terrain.position(tri[0]),
        terrain.position(tri[1]),
        terrain.position(tri[2]),
    )
    .abs()
        * T::lit(0.5);
    let d1 = (z2 - z1) * (z3 - z1);
    let d2 = (z3 - z1) * (z3 - z2);
    // Piece on [z1, z2]: A (l - z1)^2 / d1.
    let p1 = [area * z1 * z1 / d1, -(area + area) * z1 / d1, area / d1];
    // Piece on [z2, z3]: A - A (z3 - l)^2 / d2.
    let p2 = [
        area - area * z3 * z3 / d2,
        (area + area) * z3 / d2,
        -area / d2,
    ];
    // Piece on [z3, inf): constant A.
    let p3 = [area, T::zero(), T::zero()];
    ([z1, z2, z3], [p1, p2, p3])
}

/// Exact clipped volume integral of one face below `level`.
fn face_clipped_volume<T: Real>(terrain: &Terrain<T>, tri: [u32; 3], level: T) -> T {
    let mut z: Vec<T> = tri
        .iter()
        .map(|&v| terrain.heights()[v as usize])
        .collect();
    z.sort_by(|a, b| cmp_real(*a, *b));
    let (z1, z2, z3) = (z[0], z[1], z[2]);
    let area = crate::geom::signed_area2(
        terrain.position(tri[0]),
        terrain.position(tri[1]),
        terrain.position(tri[2]),
    )
    .abs()
        * T::lit(0.5);
    let third = T::lit(1.0 / 3.0);
    if level <= z1 {
        T::zero()
    } else if level <= z2 {
        let d = level - z1;
        area * d * d * d * third / ((z2 - z1) * (z3 - z1))
    } else if level <= z3 {
        let mean = (z1 + z2 + z3) * third;
        let d = z3 - level;
        area * (level - mean) + area * d * d * d * third / ((z3 - z1) * (z3 - z2))
    } else {
        let mean = (z1 + z2 + z3) * third;
        area * (level - mean)
    }
}

/// Exact volume of a depression at `level`: integral of `level - h` over the
/// sublevel component containing the depression's sinks. Direct face-scan
/// route, independent of the annotation sweep.
pub fn depression_volume<T: Real>(
    terrain: &Terrain<T>,
    tree: &MergeTree<T>,
    node: u32,
    level: T,
) -> Result<T, MergeTreeError> {
    let rim = tree.rim_height(node);
    if level > rim {
        return Err(MergeTreeError::LevelAboveSaddle {
            node,
            level: level.to_f64().unwrap_or(f64::NAN),
        });
    }
    // BFS over vertices below `level` from the depression's sinks.
    let n = terrain.vertex_count();
    let mut in_region = vec![false; n];
    let mut queue: Vec<u32> = tree
        .subtree_leaves(node)
        .iter()
        .map(|&leaf| tree.vertex(leaf))
        .filter(|&s| terrain.heights()[s as usize] < level)
        .collect();
    for &s in &queue {
        in_region[s as usize] = true;
    }
    while let Some(v) = queue.pop() {
        for &w in terrain.neighbors(v) {
            if w != V_INF
                && !in_region[w as usize]
                && terrain.heights()[w as usize] < level
            {
                in_region[w as usize] = true;
                queue.push(w);
            }
        }
    }
    let mut vol = T::zero();
    for &tri in terrain.triangles() {
        if tri.iter().any(|&v| in_region[v as usize]) {
            vol = vol + face_clipped_volume(terrain, tri, level);
        }
    }
    Ok(vol)
}

/// Ascending sweep computing `vol(β_v)`, smallest containing maximal
/// depression and label for every vertex, and depression capacities for
/// every tree node. O(n log n) overall.
pub fn annotate_vertices<T: Real>(
    terrain: &Terrain<T>,
    tree: &mut MergeTree<T>,
) -> Result<VertexAnnotation<T>, MergeTreeError> {
    if !tree.labeled {
        return Err(MergeTreeError::Unlabeled);
    }
    let n = terrain.vertex_count();
    let mut uf = UnionFind::new(n);
    let mut comp_node = vec![u32::MAX; n];
    let mut comp_area: Vec<AreaState<T>> = vec![AreaState::default(); n];
    let mut vol_beta = vec![T::zero(); n];
    let mut smallest = vec![u32::MAX; n];

    // Face transition schedule: when a vertex is processed it is z1, z2 or
    // z3 of each incident face.
    let asc: Vec<u32> = terrain.order_desc().iter().rev().copied().collect();
    let mut face_events: Vec<Vec<(u32, usize)>> = vec![Vec::new(); n]; // vertex -> (face, position)
    for (fi, &tri) in terrain.triangles().iter().enumerate() {
        let mut by_h: Vec<u32> = tri.to_vec();
        by_h.sort_by(|&a, &b| {
            cmp_real(terrain.heights()[a as usize], terrain.heights()[b as usize])
        });
        for (pos, &v) in by_h.iter().enumerate() {
            face_events[v as usize].push((fi as u32, pos));
        }
    }

    for &v in &asc {
        let h = terrain.heights()[v as usize];
        let mut comps: Vec<u32> = terrain
            .neighbors(v)
            .iter()
            .filter(|&&w| w != V_INF && terrain.heights()[w as usize] < h)
            .map(|&w| uf.find(w))
            .collect();
        comps.sort_unstable();
        comps.dedup();
        for &c in &comps {
            comp_area[c as usize].advance(h);
        }
        let (node, merged_comp) = match comps.len() {
            0 => {
                let node = tree.node_of_vertex(v).ok_or_else(|| {
                    MergeTreeError::NonSimpleSaddle(v)
                })?;
                vol_beta[v as usize] = T::zero();
                comp_area[v as usize] = AreaState {
                    a: [T::zero(); 3],
                    volume: T::zero(),
                    level: h,
                };
                (node, v)
            }
            1 => {
                let c = comps[0];
                vol_beta[v as usize] = comp_area[c as usize].volume;
                let node = comp_node[c as usize];
                let r = uf.union(c, v);
                if r != c {
                    comp_area[r as usize] = comp_area[c as usize];
                }
                (node, r)
            }
            2 => {
                let node = tree
                    .node_of_vertex(v)
                    .ok_or(MergeTreeError::NonSimpleSaddle(v))?;
                let [c1, c2] = [comps[0], comps[1]];
                // Record child capacities at this saddle level.
                let kids = tree.children(node).unwrap();
                for k in kids {
                    let kc = if comp_node[c1 as usize] == k { c1 } else { c2 };
                    debug_assert_eq!(comp_node[kc as usize], k);
                    tree.set_capacity(k, comp_area[kc as usize].volume);
                }
                vol_beta[v as usize] =
                    comp_area[c1 as usize].volume + comp_area[c2 as usize].volume;
                let mut merged = comp_area[c1 as usize];
                merged.merge(&comp_area[c2 as usize]);
                let r1 = uf.union(c1, c2);
                let r = uf.union(r1, v);
                comp_area[r as usize] = merged;
                (node, r)
            }
            _ => return Err(MergeTreeError::NonSimpleSaddle(v)),
        };
        comp_node[merged_comp as usize] = node;
        smallest[v as usize] = node;
        for &(fi, pos) in &face_events[v as usize] {
            let (_, pieces) = face_pieces(terrain, terrain.triangles()[fi as usize]);
            let area = &mut comp_area[merged_comp as usize];
            match pos {
                0 => area.add_poly(pieces[0], T::one()),
                1 => {
                    area.add_poly(pieces[0], -T::one());
                    area.add_poly(pieces[1], T::one());
                }
                _ => {
                    area.add_poly(pieces[1], -T::one());
                    area.add_poly(pieces[2], T::one());
                }
            }
        }
    }
    tree.set_capacity(tree.root, T::infinity());

    let label = smallest
        .iter()
        .map(|&nd| if nd == u32::MAX { 0 } else { tree.label(nd) })
        .collect();
    Ok(VertexAnnotation {
        vol_beta,
        smallest_depr: smallest,
        label,
    })
}

/// One entry of a tributary decomposition: a saddle on the query's root path
/// and the sibling depression hanging off it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tributary {
    pub saddle_vertex: u32,
    /// Depression on the query's path (child containing the query).
    pub on_path: u32,
    /// Sibling depression (the tributary itself).
    pub sibling: u32,
}

/// Maximal depressions containing `q` (outermost first) and the sibling
/// depressions along the path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TributaryList {
    /// Nodes from root depression down to the smallest containing `q`.
    pub path: Vec<u32>,
    /// One entry per non-root node on the path, outermost first.
    pub entries: Vec<Tributary>,
}

/// Tributaries of a query vertex: siblings of the depressions on its
/// root path, ordered outermost first.
pub fn tributaries<T: Real>(
    tree: &MergeTree<T>,
    ann: &VertexAnnotation<T>,
    q: u32,
) -> TributaryList {
    let mut path = Vec::new();
    let mut cur = ann.smallest_depression(q);
    loop {
        path.push(cur);
        match tree.parent(cur) {
            Some(p) => cur = p,
            None => break,
        }
    }
    path.reverse(); // root first
    let entries = path
        .iter()
        .skip(1)
        .map(|&node| Tributary {
            saddle_vertex: tree.vertex(tree.parent(node).unwrap()),
            on_path: node,
            sibling: tree.sibling(node).unwrap(),
        })
        .collect();
    TributaryList { path, entries }
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, x: u32) -> u32 {
        let mut r = x;
        while self.parent[r as usize] != r {
            r = self.parent[r as usize];
        }
        let mut c = x;
        while self.parent[c as usize] != r {
            let nxt = self.parent[c as usize];
            self.parent[c as usize] = r;
            c = nxt;
        }
        r
    }

    /// Union returning the new root.
    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra as usize] = rb;
        }
        rb
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::terrain::{unfold_saddles, VertexClass};

    fn built(t: &Terrain<f64>) -> (MergeTree<f64>, VertexAnnotation<f64>) {
        let mut tree = MergeTree::build(t).unwrap();
        tree.assign_inorder_labels();
        let ann = annotate_vertices(t, &mut tree).unwrap();
        (tree, ann)
    }

    #[test]
    fn two_sinks_one_saddle() {
        let t = fixtures::two_pit();
        let (tree, ann) = built(&t);
        assert_eq!(tree.len(), 3);
        assert_eq!(tree.leaf_count(), 2);
        assert_eq!(tree.vertex(tree.root()), 7);
        // Saddle's own smallest depression is the merged one.
        assert_eq!(ann.smallest_depression(7), tree.root());
        // The two sinks sit in their own leaf depressions.
        let l6 = ann.smallest_depression(6);
        let l8 = ann.smallest_depression(8);
        assert_ne!(l6, l8);
        assert!(tree.is_leaf(l6) && tree.is_leaf(l8));
        assert_eq!(ann.vol_beta(6), 0.0);
        // Outer slope vertices live in the root depression.
        assert_eq!(ann.smallest_depression(0), tree.root());
    }

    #[test]
    fn single_sink_terrain_is_one_leaf() {
        let t = fixtures::pyramid_pit(1.0, 1.0);
        let (tree, ann) = built(&t);
        assert_eq!(tree.len(), 1);
        assert!(tree.is_leaf(tree.root()));
        assert_eq!(tree.label(tree.root()), 1);
        assert_eq!(ann.smallest_depression(3), tree.root());
        assert_eq!(tributaries(&tree, &ann, 0).entries.len(), 0);
    }

    #[test]
    fn merge_heights_match_sublevel_component_oracle() {
        for seed in 0..6u64 {
            let raw = fixtures::rough_terrain(seed, 7, 7);
            let t = unfold_saddles(&raw).unwrap();
            let (tree, _) = built(&t);
            // Leaves = minima from classification.
            let minima = t
                .sinks()
                .len();
            assert_eq!(tree.leaf_count(), minima, "seed {seed}");
            assert_eq!(tree.len(), 2 * minima - 1, "seed {seed}");
            // At every internal node the component count drops by one when
            // crossing the saddle height.
            for node in 0..tree.len() as u32 {
                if tree.is_leaf(node) {
                    continue;
                }
                let h = tree.height(node);
                let eps = t.min_height_gap() / 2.0;
                let below = fixtures::sublevel_components(&t, h - eps);
                let above = fixtures::sublevel_components(&t, h + eps);
                assert_eq!(above, below - 1, "seed {seed} node {node}");
            }
        }
    }

    #[test]
    fn euler_relation_holds_with_the_vertex_at_infinity() {
        for seed in 0..4u64 {
            let t = fixtures::rough_terrain(seed, 8, 6);
            let mut mins = 0i64;
            let mut maxs = 1i64; // v_inf is the maximum at infinity
            let mut saddle_mult = 0i64;
            for v in 0..t.vertex_count() as u32 {
                match t.classify(v).unwrap() {
                    VertexClass::Minimum => mins += 1,
                    VertexClass::Maximum => maxs += 1,
                    VertexClass::Saddle(k) => saddle_mult += k as i64,
                    VertexClass::Regular => {}
                }
            }
            assert_eq!(mins + maxs - saddle_mult, 2, "seed {seed}");
            // Sublevel tracking agrees: merges equal sinks minus one
            // component at the top.
            let top = fixtures::sublevel_components(&t, f64::INFINITY);
            assert_eq!(top, 1);
        }
    }

    #[test]
    fn labels_separate_subtrees_at_every_saddle() {
        for seed in 0..6u64 {
            let raw = fixtures::rough_terrain(seed, 7, 7);
            let t = unfold_saddles(&raw).unwrap();
            let (tree, ann) = built(&t);
            for node in 0..tree.len() as u32 {
                let Some([l, r]) = tree.children(node) else {
                    continue;
                };
                let lv = tree.label(node);
                let (llo, lhi) = tree.label_range(l);
                let (rlo, rhi) = tree.label_range(r);
                assert!(lhi < lv && lv < rlo || rhi < lv && lv < llo);
                // Every vertex of one child labels below the saddle, the
                // other above.
                for v in 0..t.vertex_count() as u32 {
                    let d = ann.smallest_depression(v);
                    let (dlo, dhi) = (tree.label_range(d).0, tree.label_range(d).1);
                    if dlo >= llo && dhi <= lhi {
                        assert!(ann.label(v) < lv);
                    }
                }
                let _ = (rlo, rhi);
            }
            // Label ranges are contiguous per depression subtree.
            for node in 0..tree.len() as u32 {
                let (lo, hi) = tree.label_range(node);
                let mut seen: Vec<u32> = Vec::new();
                for other in 0..tree.len() as u32 {
                    let l = tree.label(other);
                    if l >= lo && l <= hi {
                        seen.push(other);
                    }
                }
                // Subtree size equals label-range size.
                assert_eq!(seen.len() as u32, hi - lo + 1);
            }
        }
    }

    #[test]
    fn pyramid_volume_matches_closed_form_and_monte_carlo() {
        let (a, d) = (1.0, 1.0);
        let t = fixtures::pyramid_pit(a, d);
        let (tree, _) = built(&t);
        let leaf = tree.root();
        let analytic = 4.0 / 3.0 * a * a * d;
        let vol = depression_volume(&t, &tree, leaf, 0.0).unwrap();
        assert!((vol - analytic).abs() / analytic < 1e-6, "vol {vol}");

        // Monte-Carlo oracle over the bounding square.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut acc = 0.0;
        let samples = 200_000;
        for _ in 0..samples {
            let x: f64 = rng.gen_range(-a..a);
            let y: f64 = rng.gen_range(-a..a);
            // Height of the pyramid surface at (x, y): linear from center.
            let r = x.abs().max(y.abs());
            let h = -d + r * d / a;
            if h < 0.0 {
                acc += -h;
            }
        }
        let mc = acc / samples as f64 * (2.0 * a) * (2.0 * a);
        assert!((vol - mc).abs() / analytic < 1e-2, "mc {mc} vs {vol}");
    }

    #[test]
    fn volume_is_zero_at_and_below_the_sink() {
        let t = fixtures::two_pit();
        let (tree, ann) = built(&t);
        let leaf = ann.smallest_depression(6);
        assert_eq!(depression_volume(&t, &tree, leaf, 1.0).unwrap(), 0.0);
        assert_eq!(depression_volume(&t, &tree, leaf, 0.0).unwrap(), 0.0);
        let above = depression_volume(&t, &tree, leaf, 5.0).unwrap();
        assert!(above > 0.0);
        assert!(matches!(
            depression_volume(&t, &tree, leaf, 5.1),
            Err(MergeTreeError::LevelAboveSaddle { .. })
        ));
    }

    #[test]
    fn annotation_volumes_match_direct_route() {
        for seed in 0..5u64 {
            let raw = fixtures::rough_terrain(seed, 7, 7);
            let t = unfold_saddles(&raw).unwrap();
            let (tree, ann) = built(&t);
            for v in 0..t.vertex_count() as u32 {
                if let Some(node) = tree.node_of_vertex(v) {
                    if !tree.is_leaf(node) {
                        let direct =
                            depression_volume(&t, &tree, node, t.heights()[v as usize])
                                .unwrap();
                        let swept = ann.vol_beta(v);
                        assert!(
                            (direct - swept).abs() <= 1e-9 * direct.max(1.0),
                            "seed {seed} saddle {v}: {direct} vs {swept}"
                        );
                    }
                }
                // Capacities at the parent saddle agree too.
            }
            for node in 0..tree.len() as u32 {
                if let Some(p) = tree.parent(node) {
                    let direct =
                        depression_volume(&t, &tree, node, tree.height(p)).unwrap();
                    let cap = tree.capacity(node);
                    assert!(
                        (direct - cap).abs() <= 1e-9 * direct.max(1.0),
                        "seed {seed} node {node}: {direct} vs {cap}"
                    );
                }
            }
        }
    }

    #[test]
    fn volume_derivative_is_continuous_at_vertex_heights() {
        let t = fixtures::two_pit();
        let (tree, _) = built(&t);
        let root = tree.root();
        // dVol/dl approximated at +/- eps around interior vertex heights.
        for v in [6u32, 8, 7, 12] {
            let h = t.heights()[v as usize];
            if h >= 9.0 {
                continue;
            }
            let eps = 1e-7;
            let d = 1e-4;
            let vol = |l: f64| depression_volume(&t, &tree, root, l).unwrap();
            let below = (vol(h - eps) - vol(h - eps - d)) / d;
            let above = (vol(h + eps + d) - vol(h + eps)) / d;
            assert!(below >= -1e-12, "area nonnegative");
            assert!(
                (above - below).abs() <= 1e-3 * above.abs().max(1e-9) + 1e-6,
                "vertex {v}: {below} vs {above}"
            );
        }
    }

    #[test]
    fn tributary_chain_length_matches_path() {
        let t = fixtures::nested_chain(4);
        let (tree, ann) = built(&t);
        assert_eq!(tree.leaf_count(), 4);
        // Deepest pit: its root path passes every saddle.
        let deep_sink = t.sinks()[0];
        let trib = tributaries(&tree, &ann, deep_sink);
        assert_eq!(trib.entries.len(), trib.path.len() - 1);
        assert_eq!(trib.path.len(), 4, "left-deep chain of 3 saddles + leaf");
        // Sibling of q's depression is the only tributary for two_pit.
        let t2 = fixtures::two_pit();
        let (tree2, ann2) = built(&t2);
        let tr = tributaries(&tree2, &ann2, 6);
        assert_eq!(tr.entries.len(), 1);
        assert_eq!(tr.entries[0].sibling, ann2.smallest_depression(8));
    }
}
