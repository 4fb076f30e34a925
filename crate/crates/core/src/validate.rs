//! Conservation and consistency checks over computed flow-rate maps.
//!
//! These recompute the balance laws from the stored per-edge functions and
//! report the worst relative deviation, so tests can pin tolerances.

use crate::flow::{FlowRateMap, RainDistribution};
use crate::index::TerrainIndex;
use crate::scalar::Real;
use crate::stepfn::StepFn;
use crate::terrain::{FlowGraph, V_INF};

/// `|a - b|` relative to the larger magnitude with floor 1.
fn rel_err<T: Real>(a: T, b: T) -> T {
    (a - b).abs() / T::one().max(a.abs()).max(b.abs())
}

/// Breakpoint times of all the given functions, plus one point past the end.
fn probe_times<T: Real>(fns: &[&StepFn<T>]) -> Vec<T> {
    let mut ts: Vec<T> = fns
        .iter()
        .flat_map(|f| f.breakpoints().iter().map(|&(t, _)| t))
        .collect();
    ts.sort_by(|a, b| crate::scalar::cmp_real(*a, *b));
    ts.dedup();
    if let Some(&last) = ts.last() {
        ts.push(last + T::one());
    }
    ts
}

/// Worst violation of local conservation: at every non-saddle, non-sink
/// vertex, outgoing flow equals rain plus incoming flow at every breakpoint
/// before the vertex floods.
pub fn max_local_conservation_error<T: Real>(
    index: &TerrainIndex<T>,
    graph: &FlowGraph<T>,
    rain: &RainDistribution<T>,
    map: &FlowRateMap<T>,
) -> T {
    let terrain = index.terrain();
    let tree = index.tree();
    let mut worst = T::zero();
    for v in 0..terrain.vertex_count() as u32 {
        let is_saddle = tree
            .node_of_vertex(v)
            .map(|nd| !tree.is_leaf(nd))
            .unwrap_or(false);
        if is_saddle || graph.out(v).is_empty() {
            continue;
        }
        let empty = StepFn::empty();
        let rain_fn = rain.fn_of(v).unwrap_or(&empty);
        let ins: Vec<&StepFn<T>> = graph
            .incoming(v)
            .iter()
            .filter_map(|&u| map.edge_fn(u, v))
            .collect();
        let outs: Vec<&StepFn<T>> = graph
            .out(v)
            .iter()
            .filter_map(|&(w, _)| map.edge_fn(v, w))
            .collect();
        let mut all: Vec<&StepFn<T>> = vec![rain_fn];
        all.extend(&ins);
        all.extend(&outs);
        let flood = map.flood_time(v);
        for t in probe_times(&all) {
            if t >= flood {
                break;
            }
            let inflow = rain_fn.value_at(t)
                + ins.iter().fold(T::zero(), |acc, f| acc + f.value_at(t));
            let outflow = outs.iter().fold(T::zero(), |acc, f| acc + f.value_at(t));
            worst = worst.max(rel_err(inflow, outflow));
        }
    }
    worst
}

/// Worst violation of global conservation: before anything fills, the fill
/// rates of the leaf depressions sum to the total rain rate.
pub fn max_global_conservation_error<T: Real>(
    index: &TerrainIndex<T>,
    rain: &RainDistribution<T>,
    map: &FlowRateMap<T>,
) -> T {
    let tree = index.tree();
    let mut first_fill = T::infinity();
    for (_, rec) in map.depressions() {
        first_fill = first_fill.min(rec.fill_time);
    }
    if tree.len() == 1 {
        // A single sink has no delimited depression; nothing to compare.
        return T::zero();
    }
    let leaf_fills: Vec<&StepFn<T>> = (0..tree.len() as u32)
        .filter(|&nd| tree.is_leaf(nd))
        .filter_map(|nd| map.depression(nd).map(|r| &r.fill))
        .collect();
    let total_rain = StepFn::sum(rain.iter().map(|(_, f)| f));
    let mut probes: Vec<&StepFn<T>> = leaf_fills.clone();
    probes.push(&total_rain);
    let mut worst = T::zero();
    for t in probe_times(&probes) {
        if t >= first_fill {
            break;
        }
        let sum = leaf_fills
            .iter()
            .fold(T::zero(), |acc, f| acc + f.value_at(t));
        worst = worst.max(rel_err(sum, total_rain.value_at(t)));
    }
    worst
}

/// Worst deviation between each depression's recorded fill rate and a
/// from-scratch recomputation over its crossing edges. This exercises the
/// partition sums and the parent-minus-cheap-side subtraction together.
pub fn max_fill_recomputation_error<T: Real>(
    index: &TerrainIndex<T>,
    graph: &FlowGraph<T>,
    rain: &RainDistribution<T>,
    map: &FlowRateMap<T>,
) -> T {
    let terrain = index.terrain();
    let tree = index.tree();
    let ann = index.annotation();
    let rain_node = crate::flow::aggregate_rain(index, rain).expect("rain valid");
    let mut worst = T::zero();
    for node in 0..tree.len() as u32 {
        let Some(parent) = tree.parent(node) else {
            continue;
        };
        let v = tree.vertex(parent);
        let rim = tree.height(parent);
        let (lo, hi) = tree.label_range(node);
        // Pseudo inflow of the saddle vertex: rain plus stored incoming.
        let empty = StepFn::empty();
        let mut phi_in = rain.fn_of(v).cloned().unwrap_or_else(StepFn::empty);
        for &u in graph.incoming(v) {
            phi_in = phi_in.add(map.edge_fn(u, v).unwrap_or(&empty));
        }
        let mut fill = rain_node[node as usize].clone();
        for u in 0..terrain.vertex_count() as u32 {
            let hu = terrain.height(u);
            if hu < rim {
                continue;
            }
            for &w in terrain.neighbors(u) {
                if w == V_INF || terrain.height(w) >= hu {
                    continue;
                }
                let lab = ann.label(w);
                if lab < lo || lab > hi {
                    continue;
                }
                if u == v {
                    fill = fill.add(&phi_in.scale(graph.weight(u, w)));
                } else if let Some(f) = map.edge_fn(u, w) {
                    fill = fill.add(f);
                }
            }
        }
        let rec = map.depression(node).expect("record per node");
        let probes = [&fill, &rec.fill];
        for t in probe_times(&probes) {
            worst = worst.max(rel_err(fill.value_at(t), rec.fill.value_at(t)));
        }
    }
    worst
}

/// True when every recorded fill rate is nondecreasing before `horizon`
/// (valid for corpora whose per-vertex rain is constant on the horizon).
pub fn fills_nondecreasing_before<T: Real>(map: &FlowRateMap<T>, horizon: T) -> bool {
    for (_, rec) in map.depressions() {
        for &(t, d) in rec.fill.breakpoints() {
            if t >= horizon {
                break;
            }
            if d < T::zero() {
                return false;
            }
        }
    }
    true
}
