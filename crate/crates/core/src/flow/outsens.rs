//! Output-sensitive terrain-flow sweep: only vertices with nonzero flow
//! (plus all negative saddles, which seed the queue) are processed.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::*;

/// Answer a terrain-flow query processing only the vertices that can carry
/// water. Produces exactly the same map as [`terrain_flow_simple`].
pub fn terrain_flow_output_sensitive<T: Real>(
    index: &TerrainIndex<T>,
    graph: &FlowGraph<T>,
    rain: &RainDistribution<T>,
) -> Result<FlowRateMap<T>, FlowError> {
    let mut ctx = SweepCtx::new(index, graph, rain)?;
    let terrain = index.terrain();
    let ann = index.annotation();
    let tree = index.tree();
    let n = terrain.vertex_count();
    let mut structure = EdgeFlowStructure::new();
    let mut stash: Vec<Vec<(u32, StepFn<T>)>> = vec![Vec::new(); n];

    // Highest priority = smallest rank (descending height).
    let mut queue: BinaryHeap<Reverse<(u32, u32)>> = BinaryHeap::new();
    for (v, _) in rain.iter() {
        if v >= n as u32 {
            return Err(FlowError::UnknownVertex(v));
        }
        queue.push(Reverse((terrain.rank(v), v)));
    }
    for node in 0..tree.len() as u32 {
        if !tree.is_leaf(node) {
            let v = tree.vertex(node);
            queue.push(Reverse((terrain.rank(v), v)));
        }
    }

    let mut processed = vec![false; n];
    let mut order = Vec::new();
    while let Some(Reverse((_, v))) = queue.pop() {
        if processed[v as usize] {
            continue;
        }
        processed[v as usize] = true;
        order.push(v);

        let lab = ann.label(v);
        for &u in graph.incoming(v) {
            structure.remove(&(lab, v, u));
        }
        let mut incoming = std::mem::take(&mut stash[v as usize]);
        incoming.sort_unstable_by_key(|&(u, _)| u);
        let phi_v = ctx.vertex_inflow(v, &incoming);

        let is_saddle = tree
            .node_of_vertex(v)
            .map(|nd| !tree.is_leaf(nd))
            .unwrap_or(false);
        let out = if is_saddle {
            let node = tree.node_of_vertex(v).unwrap();
            let (cheap, _) = index.cheap_expensive(node);
            let (lo, hi) = tree.label_range(cheap);
            let members = structure.side_members(lo, hi);
            ctx.process_saddle(v, &phi_v, &members)?
        } else {
            ctx.process_regular(v, &phi_v)
        };
        for (w, f) in out {
            structure.insert((ann.label(w), w, v), f.clone());
            stash[w as usize].push((v, f));
            queue.push(Reverse((terrain.rank(w), w)));
        }
    }

    let stats = QueryStats {
        processed: order,
        ..QueryStats::default()
    };
    Ok(ctx.finish(stats))
}
