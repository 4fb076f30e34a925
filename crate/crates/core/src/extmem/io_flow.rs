//! The two I/O-efficient terrain-flow algorithms, realized over the
//! simulated block store via time-forward processing.
//!
//! Both run the same per-vertex arithmetic as the internal-memory sweeps
//! (see [`crate::flow`]); what differs is transport. The first keeps
//! per-depression crossing-edge collections in memory (assuming
//! `rho (h + k) = O(m)`), the second forwards fill rates along depression
//! chains and ships only the cheaper side's crossing edges to each saddle
//! (assuming `rho = O(m)`).

use std::collections::BTreeMap;

use thiserror::Error;

use super::block_store::{BlockStore, ExtMemError, ExtVec, IoCounters, ItemWeight};
use super::pqueue::ExtPriorityQueue;
use super::sort::ext_sort;
use crate::flow::{FlowError, FlowRateMap, QueryStats, RainDistribution, SweepCtx};
use crate::index::{IndexError, TerrainIndex};
use crate::scalar::Real;
use crate::stepfn::StepFn;
use crate::terrain::{FlowGraph, Terrain};

#[derive(Debug, Error)]
pub enum IoFlowError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Ext(#[from] ExtMemError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

/// Priority-queue key: `(rank of target, kind, a, b)`. Ranks follow the
/// descending-height processing order, so delete-min yields the batches in
/// sweep order.
type QKey = (u32, u8, u32, u32);

impl ItemWeight for (u32, u8, u32, u32) {}

const KIND_RAIN: u8 = 0;
const KIND_FILL: u8 = 1;
const KIND_EDGE: u8 = 2;
const KIND_COPY: u8 = 3;

#[derive(Debug, Clone)]
enum Payload<T> {
    Rain(StepFn<T>),
    Fill { node: u32, f: StepFn<T> },
    Edge { source: u32, f: StepFn<T> },
    Copy { source: u32, target: u32, f: StepFn<T> },
}

impl<T: Real> ItemWeight for Payload<T> {
    fn weight(&self) -> usize {
        1 + match self {
            Payload::Rain(f)
            | Payload::Fill { f, .. }
            | Payload::Edge { f, .. }
            | Payload::Copy { f, .. } => f.complexity(),
        }
    }
}

/// Height key with a total order (terrain heights are finite and distinct).
#[derive(PartialEq, Clone, Copy, Debug)]
struct HeightKey(f64);
impl Eq for HeightKey {}
impl PartialOrd for HeightKey {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for HeightKey {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

/// Build the terrain index over the store: sort the vertex and edge streams
/// (counted) and run the shared construction, so annotations are
/// bit-identical to [`TerrainIndex::build`]. Requires `rho <= m`.
pub fn preprocess_io<T: Real>(
    store: &BlockStore,
    terrain: &Terrain<T>,
) -> Result<TerrainIndex<T>, IoFlowError> {
    let n = terrain.vertex_count() as u32;
    let verts = ExtVec::write(store, (0..n).collect::<Vec<u32>>());
    let sorted = ext_sort(store, verts, |&v| {
        HeightKey(terrain.height(v).to_f64().unwrap())
    })?;
    // Scan in ascending height order (the sweep order of the construction).
    let mut last = f64::NEG_INFINITY;
    for &v in sorted.reader(store) {
        let h = terrain.height(v).to_f64().unwrap();
        debug_assert!(h > last);
        last = h;
    }
    // Edge stream sorted by source height, as the annotation sweep consumes it.
    let mut edges: Vec<(u32, u32)> = Vec::new();
    for v in 0..n {
        for &w in terrain.neighbors(v) {
            if w != crate::terrain::V_INF && terrain.height(w) < terrain.height(v) {
                edges.push((v, w));
            }
        }
    }
    let estream = ExtVec::write(store, edges);
    let sorted_edges = ext_sort(store, estream, |&(u, _)| {
        HeightKey(terrain.height(u).to_f64().unwrap())
    })?;
    let _ = sorted_edges.read_all(store);

    let index = TerrainIndex::build(terrain)?;
    let rho = index.tree().leaf_count();
    if rho > store.memory_items() {
        return Err(ExtMemError::ResidencyExceeded {
            what: "sink count rho",
            need: rho,
            m: store.memory_items(),
        }
        .into());
    }
    Ok(index)
}

/// Sort the nonzero rain functions by target rank and seed the queue.
fn seed_rain<'s, T: Real>(
    store: &'s BlockStore,
    index: &TerrainIndex<T>,
    rain: &RainDistribution<T>,
    pq: &mut ExtPriorityQueue<'s, QKey, Payload<T>>,
) -> Result<(), IoFlowError> {
    let items: Vec<(u32, u8, u32, u32)> = rain
        .iter()
        .map(|(v, _)| (index.terrain().rank(v), KIND_RAIN, v, 0))
        .collect();
    let stream = ExtVec::write(store, items);
    let sorted = ext_sort(store, stream, |&k| k)?;
    for &(rank, _, v, _) in sorted.read_all(store) {
        let f = rain.fn_of(v).expect("seeded from rain").clone();
        pq.insert((rank, KIND_RAIN, v, 0), Payload::Rain(f));
    }
    Ok(())
}

struct Batch<T> {
    rain: Option<StepFn<T>>,
    fill: Option<(u32, StepFn<T>)>,
    edges: Vec<(u32, StepFn<T>)>,
    copies: Vec<(u32, u32, StepFn<T>)>,
}

fn pop_batch<T: Real>(
    pq: &mut ExtPriorityQueue<QKey, Payload<T>>,
    rank: u32,
) -> Result<Batch<T>, ExtMemError> {
    let mut batch = Batch {
        rain: None,
        fill: None,
        edges: Vec::new(),
        copies: Vec::new(),
    };
    while pq.peek_key().map(|k| k.0 == rank).unwrap_or(false) {
        let (_, payload) = pq.delete_min()?;
        match payload {
            Payload::Rain(f) => batch.rain = Some(f),
            Payload::Fill { node, f } => batch.fill = Some((node, f)),
            Payload::Edge { source, f } => batch.edges.push((source, f)),
            Payload::Copy { source, target, f } => batch.copies.push((source, target, f)),
        }
    }
    batch.edges.sort_by_key(|&(u, _)| u);
    Ok(batch)
}

/// First I/O-efficient terrain-flow algorithm: edge flows are forwarded once
/// through the external priority queue; per-depression crossing-edge
/// collections stay in memory under the `rho (h + k) <= m` assumption.
pub fn terrain_flow_io_v1<T: Real>(
    store: &BlockStore,
    index: &TerrainIndex<T>,
    graph: &FlowGraph<T>,
    rain: &RainDistribution<T>,
) -> Result<(FlowRateMap<T>, IoCounters), IoFlowError> {
    let rho = index.tree().leaf_count();
    let hk = index.tree_height() + rain.change_count();
    if rho.saturating_mul(hk) > store.memory_items() {
        return Err(ExtMemError::ResidencyExceeded {
            what: "rho * (h + k)",
            need: rho * hk,
            m: store.memory_items(),
        }
        .into());
    }
    let mut ctx = SweepCtx::new(index, graph, rain)?;
    let terrain = index.terrain();
    let tree = index.tree();
    let ann = index.annotation();

    let vstream = ExtVec::write(store, terrain.order_desc().to_vec());
    let mut pq: ExtPriorityQueue<QKey, Payload<T>> = ExtPriorityQueue::new(store);
    seed_rain(store, index, rain, &mut pq)?;

    // Depression flow-rate collections, keyed (target, source) per node.
    let mut members: Vec<BTreeMap<(u32, u32), StepFn<T>>> =
        vec![BTreeMap::new(); tree.len()];

    let order: Vec<u32> = vstream.reader(store).copied().collect();
    for v in order {
        let batch = pop_batch(&mut pq, terrain.rank(v))?;
        debug_assert!(batch.fill.is_none() && batch.copies.is_empty());
        let node_v = ann.smallest_depression(v);
        for (u, _) in &batch.edges {
            members[node_v as usize].remove(&(v, *u));
        }
        let phi_v = ctx.vertex_inflow(v, &batch.edges);

        let is_saddle = tree
            .node_of_vertex(v)
            .map(|nd| !tree.is_leaf(nd))
            .unwrap_or(false);
        let out = if is_saddle {
            let node = tree.node_of_vertex(v).unwrap();
            let (cheap, _) = index.cheap_expensive(node);
            let (lo, hi) = tree.label_range(cheap);
            let mem: Vec<((u32, u32, u32), &StepFn<T>)> = (lo..=hi)
                .flat_map(|lab| {
                    let nd = index.node_by_label(lab);
                    members[nd as usize]
                        .iter()
                        .map(move |(&(w, u), f)| ((lab, w, u), f))
                })
                .collect();
            ctx.process_saddle(v, &phi_v, &mem)?
        } else {
            ctx.process_regular(v, &phi_v)
        };
        for (w, f) in out {
            members[ann.smallest_depression(w) as usize].insert((w, v), f.clone());
            pq.insert(
                (terrain.rank(w), KIND_EDGE, v, 0),
                Payload::Edge { source: v, f },
            );
        }
    }
    debug_assert!(pq.is_empty());
    let map = ctx.finish(QueryStats {
        forwards: store.counters().forwards,
        ..QueryStats::default()
    });
    Ok((map, store.counters()))
}

/// Second I/O-efficient terrain-flow algorithm: fill rates travel vertex to
/// vertex along each depression's descending chain, and each saddle receives
/// copies of only the cheaper side's crossing-edge functions. Assumes
/// `rho <= m`.
pub fn terrain_flow_io_v2<T: Real>(
    store: &BlockStore,
    index: &TerrainIndex<T>,
    graph: &FlowGraph<T>,
    rain: &RainDistribution<T>,
) -> Result<(FlowRateMap<T>, IoCounters), IoFlowError> {
    let rho = index.tree().leaf_count();
    if rho > store.memory_items() {
        return Err(ExtMemError::ResidencyExceeded {
            what: "sink count rho",
            need: rho,
            m: store.memory_items(),
        }
        .into());
    }
    let mut ctx = SweepCtx::new(index, graph, rain)?;
    let terrain = index.terrain();
    let tree = index.tree();
    let ann = index.annotation();

    let vstream = ExtVec::write(store, terrain.order_desc().to_vec());
    let mut pq: ExtPriorityQueue<QKey, Payload<T>> = ExtPriorityQueue::new(store);
    seed_rain(store, index, rain, &mut pq)?;

    // The root depression's fill starts at its chain head.
    let root = tree.root();
    let head = index.chain_first(root);
    pq.insert(
        (terrain.rank(head), KIND_FILL, root, 0),
        Payload::Fill {
            node: root,
            f: ctx.fill_desc[root as usize].clone().expect("root fill"),
        },
    );

    let mut saddle_copy_counts: BTreeMap<u32, u64> = BTreeMap::new();
    let order: Vec<u32> = vstream.reader(store).copied().collect();
    for v in order {
        let batch = pop_batch(&mut pq, terrain.rank(v))?;
        let node_v = ann.smallest_depression(v);
        if let Some((node, f)) = &batch.fill {
            debug_assert_eq!(*node, node_v);
            debug_assert_eq!(
                Some(f),
                ctx.fill_desc[node_v as usize].as_ref(),
                "chain-forwarded fill matches the computed one"
            );
        }
        let phi_v = ctx.vertex_inflow(v, &batch.edges);

        let is_saddle = tree
            .node_of_vertex(v)
            .map(|nd| !tree.is_leaf(nd))
            .unwrap_or(false);
        let out = if is_saddle {
            let mut mem: Vec<((u32, u32, u32), StepFn<T>)> = batch
                .copies
                .iter()
                .map(|(u, w, f)| ((ann.label(*w), *w, *u), f.clone()))
                .collect();
            mem.sort_by_key(|&(k, _)| k);
            let mem_refs: Vec<((u32, u32, u32), &StepFn<T>)> =
                mem.iter().map(|(k, f)| (*k, f)).collect();
            let out = ctx.process_saddle(v, &phi_v, &mem_refs)?;
            // Children fills start down their own chains.
            let node = tree.node_of_vertex(v).unwrap();
            for child in tree.children(node).unwrap() {
                let first = index.chain_first(child);
                pq.insert(
                    (terrain.rank(first), KIND_FILL, child, 0),
                    Payload::Fill {
                        node: child,
                        f: ctx.fill_desc[child as usize].clone().expect("assigned"),
                    },
                );
            }
            out
        } else {
            ctx.process_regular(v, &phi_v)
        };

        // Forward the depression fill along the chain.
        if let Some(next) = index.chain_next(v) {
            pq.insert(
                (terrain.rank(next), KIND_FILL, node_v, 0),
                Payload::Fill {
                    node: node_v,
                    f: ctx.fill_desc[node_v as usize].clone().expect("assigned"),
                },
            );
        }

        for (w, f) in out {
            pq.insert(
                (terrain.rank(w), KIND_EDGE, v, 0),
                Payload::Edge {
                    source: v,
                    f: f.clone(),
                },
            );
            // Ship a copy to every lower saddle whose cheap side this edge
            // crosses into. Rim equality only happens at the producing saddle
            // itself, whose own edges are folded locally.
            let hv = terrain.height(v);
            let mut node = ann.smallest_depression(w);
            while hv > tree.rim_height(node) {
                let parent = tree.parent(node).unwrap();
                if index.cheap_expensive(parent).0 == node {
                    let saddle_v = tree.vertex(parent);
                    store.count_saddle_forward();
                    *saddle_copy_counts.entry(saddle_v).or_insert(0) += 1;
                    pq.insert(
                        (terrain.rank(saddle_v), KIND_COPY, w, v),
                        Payload::Copy {
                            source: v,
                            target: w,
                            f: f.clone(),
                        },
                    );
                }
                node = parent;
            }
        }
    }
    debug_assert!(pq.is_empty());
    let counters = store.counters();
    let map = ctx.finish(QueryStats {
        forwards: counters.forwards,
        saddle_forwards: counters.saddle_forwards,
        saddle_copies: saddle_copy_counts,
        ..QueryStats::default()
    });
    Ok((map, counters))
}
