//! Preprocessed bundle shared by every flow query: unfolded terrain, labeled
//! merge tree, vertex annotations, static crossing-edge counts and the
//! per-depression descending vertex chains.

use crate::mergetree::{annotate_vertices, MergeTree, MergeTreeError, VertexAnnotation};
use crate::scalar::Real;
use crate::terrain::{build_flow_graph, unfold_saddles, FlowGraph, FlowModel, MeshError, Terrain, V_INF};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    MergeTree(#[from] MergeTreeError),
}

/// Immutable preprocessing product; safe to share across concurrent queries.
#[derive(Debug, Clone)]
pub struct TerrainIndex<T> {
    terrain: Terrain<T>,
    tree: MergeTree<T>,
    ann: VertexAnnotation<T>,
    /// Per node: number of terrain edges crossing into the node's depression
    /// at its delimiting saddle level (static, independent of rain).
    crossing_count: Vec<u32>,
    /// Merge-tree nodes indexed by in-order label - 1.
    nodes_by_label: Vec<u32>,
    /// Next lower vertex within the same smallest maximal depression.
    chain_next: Vec<u32>,
    /// Highest vertex of each node's depression (chain head).
    chain_first: Vec<u32>,
    /// Height of the merge tree (edges on the longest root-leaf path).
    tree_height: usize,
}

impl<T: Real> TerrainIndex<T> {
    /// Preprocess a terrain: unfold saddles, build and label the merge tree,
    /// annotate vertices, and derive the static query tables.
    pub fn build(terrain: &Terrain<T>) -> Result<Self, IndexError> {
        let terrain = unfold_saddles(terrain)?;
        let mut tree = MergeTree::build(&terrain)?;
        tree.assign_inorder_labels();
        let ann = annotate_vertices(&terrain, &mut tree)?;

        let nn = tree.len();
        let mut nodes_by_label = vec![0u32; nn];
        for node in 0..nn as u32 {
            nodes_by_label[(tree.label(node) - 1) as usize] = node;
        }

        // Static |E(depression)| counts: walk each downhill edge's target
        // up the merge path while the source is at or above the rim.
        let mut crossing_count = vec![0u32; nn];
        let n = terrain.vertex_count();
        for u in 0..n as u32 {
            let hu = terrain.height(u);
            for &w in terrain.neighbors(u) {
                if w == V_INF || terrain.height(w) >= hu {
                    continue;
                }
                // Rim heights increase along the root path, so the counted
                // depressions form a prefix of the path.
                let mut node = ann.smallest_depression(w);
                while hu >= tree.rim_height(node) {
                    crossing_count[node as usize] += 1;
                    node = tree.parent(node).unwrap();
                }
            }
        }

        // Descending chains within each smallest maximal depression.
        let mut groups: Vec<Vec<u32>> = vec![Vec::new(); nn];
        for &v in terrain.order_desc() {
            groups[ann.smallest_depression(v) as usize].push(v);
        }
        let mut chain_next = vec![u32::MAX; n];
        let mut chain_first = vec![u32::MAX; nn];
        for (node, group) in groups.iter().enumerate() {
            if let Some(&first) = group.first() {
                chain_first[node] = first;
            }
            for pair in group.windows(2) {
                chain_next[pair[0] as usize] = pair[1];
            }
        }

        // Node ids are topological (children before parents), so walking
        // ids downward sees each parent before its children.
        let mut tree_height = 0usize;
        let mut depth = vec![0usize; nn];
        for node in (0..nn).rev() {
            if let Some(p) = tree.parent(node as u32) {
                depth[node] = depth[p as usize] + 1;
                tree_height = tree_height.max(depth[node]);
            }
        }

        Ok(TerrainIndex {
            terrain,
            tree,
            ann,
            crossing_count,
            nodes_by_label,
            chain_next,
            chain_first,
            tree_height,
        })
    }

    pub fn terrain(&self) -> &Terrain<T> {
        &self.terrain
    }

    pub fn tree(&self) -> &MergeTree<T> {
        &self.tree
    }

    pub fn annotation(&self) -> &VertexAnnotation<T> {
        &self.ann
    }

    pub fn flow_graph(&self, model: FlowModel<T>) -> FlowGraph<T> {
        build_flow_graph(&self.terrain, model)
    }

    pub fn tree_height(&self) -> usize {
        self.tree_height
    }

    /// Static number of edges crossing into a node's depression at its rim.
    pub fn crossing_count(&self, node: u32) -> u32 {
        self.crossing_count[node as usize]
    }

    /// Children of a saddle node ordered `(cheap, expensive)` by static
    /// crossing-edge count, ties to the smaller label. All algorithms use
    /// this choice, so their fill-rate arithmetic is identical.
    pub fn cheap_expensive(&self, saddle_node: u32) -> (u32, u32) {
        let [l, r] = self.tree.children(saddle_node).expect("internal node");
        let (cl, cr) = (self.crossing_count(l), self.crossing_count(r));
        if cl < cr || (cl == cr && self.tree.label(l) < self.tree.label(r)) {
            (l, r)
        } else {
            (r, l)
        }
    }

    pub fn node_by_label(&self, label: u32) -> u32 {
        self.nodes_by_label[(label - 1) as usize]
    }

    /// Next lower vertex in the same smallest maximal depression.
    pub fn chain_next(&self, v: u32) -> Option<u32> {
        match self.chain_next[v as usize] {
            u32::MAX => None,
            w => Some(w),
        }
    }

    /// Highest vertex of a node's depression.
    pub fn chain_first(&self, node: u32) -> u32 {
        self.chain_first[node as usize]
    }
}
