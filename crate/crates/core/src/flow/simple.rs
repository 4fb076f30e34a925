//! The simple terrain-flow sweep: every vertex in descending height order.

use super::*;

/// Answer a terrain-flow query by sweeping all vertices top-down,
/// maintaining the label-ordered crossing-edge structure.
pub fn terrain_flow_simple<T: Real>(
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

    for &v in terrain.order_desc() {
        // Edges into v stop crossing the sweep line here.
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
        }
    }
    Ok(ctx.finish(QueryStats::default()))
}
