//! Terrain-flow queries under the MFD (and SFD) flow model.
//!
//! The four query algorithms (simple sweep, output-sensitive sweep, and the
//! two block-store variants in [`crate::extmem`]) share the arithmetic in
//! this module: vertex inflow folds, the saddle fill/spill/redistribution
//! logic, and the flood-time post-pass. Sharing the exact operation order is
//! what makes their outputs identical rather than merely close: every fill
//! rate is assembled as "rain aggregate + canonical fold over the cheap
//! side's crossing edges", and the other side is always obtained from the
//! parent fill by subtraction, in every algorithm.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::index::TerrainIndex;
use crate::scalar::{cmp_real, Real};
use crate::stepfn::{CumFn, StepFn};
use crate::terrain::{FlowGraph, V_INF};

mod outsens;
mod simple;

pub use outsens::terrain_flow_output_sensitive;
pub use simple::terrain_flow_simple;

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("rain falls on unknown vertex {0}")]
    UnknownVertex(u32),
    #[error("negative rain rate on vertex {vertex}")]
    NegativeRainRate { vertex: u32 },
    #[error("rain setpoint times decrease on vertex {vertex}")]
    NonMonotoneRainTimes { vertex: u32 },
    #[error("rain setpoint at or after the end time on vertex {vertex}")]
    RainAfterEnd { vertex: u32 },
    #[error("saddle spill has no outlet: initial weights on the open side sum to zero")]
    ModelDegenerate,
}

/// Piecewise-constant rain rates per vertex, all zero from `end_time` on.
#[derive(Debug, Clone, PartialEq)]
pub struct RainDistribution<T> {
    per_vertex: BTreeMap<u32, StepFn<T>>,
    end_time: T,
    change_times: Vec<T>,
    entry_count: usize,
}

impl<T: Real> RainDistribution<T> {
    /// Build from `(vertex, time, rate)` setpoints: the rain rate on the
    /// vertex steps to `rate` at `time` and drops to zero at `end_time`.
    pub fn from_setpoints(points: &[(u32, T, T)], end_time: T) -> Result<Self, FlowError> {
        let mut by_vertex: BTreeMap<u32, Vec<(T, T)>> = BTreeMap::new();
        let mut entry_count = 0usize;
        for &(v, t, rate) in points {
            if rate < T::zero() {
                return Err(FlowError::NegativeRainRate { vertex: v });
            }
            if t >= end_time {
                return Err(FlowError::RainAfterEnd { vertex: v });
            }
            if rate != T::zero() {
                entry_count += 1;
            }
            by_vertex.entry(v).or_default().push((t, rate));
        }
        let mut per_vertex = BTreeMap::new();
        let mut change_times: Vec<T> = Vec::new();
        for (v, setpoints) in by_vertex {
            for w in setpoints.windows(2) {
                if w[1].0 < w[0].0 {
                    return Err(FlowError::NonMonotoneRainTimes { vertex: v });
                }
            }
            let mut deltas = Vec::with_capacity(setpoints.len() + 1);
            let mut level = T::zero();
            for (t, rate) in setpoints {
                deltas.push((t, rate - level));
                level = rate;
            }
            deltas.push((end_time, -level));
            let f = StepFn::from_deltas(deltas);
            if !f.is_empty() {
                change_times.extend(f.breakpoints().iter().map(|&(t, _)| t));
                per_vertex.insert(v, f);
            }
        }
        change_times.sort_by(|a, b| cmp_real(*a, *b));
        change_times.dedup();
        Ok(RainDistribution {
            per_vertex,
            end_time,
            change_times,
            entry_count,
        })
    }

    pub fn empty(end_time: T) -> Self {
        RainDistribution {
            per_vertex: BTreeMap::new(),
            end_time,
            change_times: Vec::new(),
            entry_count: 0,
        }
    }

    /// Constant rate on a set of vertices over `[0, end_time)`.
    pub fn uniform(vertices: impl IntoIterator<Item = u32>, rate: T, end_time: T) -> Self {
        let points: Vec<(u32, T, T)> = vertices
            .into_iter()
            .map(|v| (v, T::zero(), rate))
            .collect();
        Self::from_setpoints(&points, end_time).expect("uniform rain is valid")
    }

    pub fn fn_of(&self, v: u32) -> Option<&StepFn<T>> {
        self.per_vertex.get(&v)
    }

    /// Vertices with nonzero rain, ascending, with their rate functions.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &StepFn<T>)> {
        self.per_vertex.iter().map(|(&v, f)| (v, f))
    }

    pub fn end_time(&self) -> T {
        self.end_time
    }

    /// Distinct times at which any rate changes.
    pub fn change_times(&self) -> &[T] {
        &self.change_times
    }

    pub fn change_count(&self) -> usize {
        self.change_times.len()
    }

    /// Number of nonzero vertex-time entries.
    pub fn entry_count(&self) -> usize {
        self.entry_count
    }

    pub fn is_zero(&self) -> bool {
        self.per_vertex.is_empty()
    }
}

/// Sum the per-vertex rain into every maximal depression by an upward sweep
/// of the merge tree. Entry `[node]` of the result is `R(beta, .)` for the
/// node's depression.
pub fn aggregate_rain<T: Real>(
    index: &TerrainIndex<T>,
    rain: &RainDistribution<T>,
) -> Result<Vec<StepFn<T>>, FlowError> {
    let n = index.terrain().vertex_count() as u32;
    let nn = index.tree().len();
    let mut direct: Vec<Vec<&StepFn<T>>> = vec![Vec::new(); nn];
    for (v, f) in rain.iter() {
        if v >= n {
            return Err(FlowError::UnknownVertex(v));
        }
        direct[index.annotation().smallest_depression(v) as usize].push(f);
    }
    let mut out: Vec<StepFn<T>> = vec![StepFn::empty(); nn];
    // Node ids are topological: children precede parents.
    for node in 0..nn {
        let mut acc = StepFn::sum(direct[node].iter().copied());
        if let Some([l, r]) = index.tree().children(node as u32) {
            acc = acc.add(&out[l as usize]);
            acc = acc.add(&out[r as usize]);
        }
        out[node] = acc;
    }
    Ok(out)
}

/// Which of the two depressions at a saddle fills first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstFilled {
    Alpha,
    Beta,
    Neither,
}

/// Determine the first-filled depression from the two pseudo-fill rates and
/// depression volumes, and the spill rate it produces: zero before the fill
/// time, the filled side's whole arrival rate afterwards. Exact ties resolve
/// to `Alpha`.
pub fn saddle_fill_spill<T: Real>(
    fill_a: &StepFn<T>,
    fill_b: &StepFn<T>,
    vol_a: T,
    vol_b: T,
) -> (FirstFilled, T, StepFn<T>) {
    let ta = fill_a.first_time_integral_reaches(vol_a);
    let tb = fill_b.first_time_integral_reaches(vol_b);
    if ta.is_infinite() && tb.is_infinite() {
        return (FirstFilled::Neither, T::infinity(), StepFn::empty());
    }
    if ta <= tb {
        (FirstFilled::Alpha, ta, fill_a.restrict_from(ta))
    } else {
        (FirstFilled::Beta, tb, fill_b.restrict_from(tb))
    }
}

/// Fill-first determination by scanning prefix volumes backward from the
/// last breakpoint, resolving within a segment analytically. Agrees with
/// [`saddle_fill_spill`]; the output-sensitive sweep cross-checks it.
pub(crate) fn first_filled_by_backward_scan<T: Real>(
    fill_a: &StepFn<T>,
    fill_b: &StepFn<T>,
    vol_a: T,
    vol_b: T,
) -> FirstFilled {
    let ta = fill_a.first_time_integral_reaches(vol_a);
    let tb = fill_b.first_time_integral_reaches(vol_b);
    if ta.is_infinite() && tb.is_infinite() {
        return FirstFilled::Neither;
    }
    let cum_a = CumFn::of(fill_a);
    let cum_b = CumFn::of(fill_b);
    let mut times: Vec<T> = cum_a
        .entries()
        .iter()
        .chain(cum_b.entries())
        .map(|&(t, _)| t)
        .collect();
    times.sort_by(|a, b| cmp_real(*a, *b));
    times.dedup();
    for &t in times.iter().rev() {
        let a_filled = fill_a.integral_to(t) >= vol_a;
        let b_filled = fill_b.integral_to(t) >= vol_b;
        match (a_filled, b_filled) {
            (true, false) => return FirstFilled::Alpha,
            (false, true) => return FirstFilled::Beta,
            _ => {}
        }
    }
    // Both fill within the same segment (or exactly together): resolve by
    // the in-segment crossing times.
    if ta <= tb {
        FirstFilled::Alpha
    } else {
        FirstFilled::Beta
    }
}

/// Side of a saddle's downslope edge relative to the first-filled depression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpillSide {
    /// Into the depression that fills first.
    First,
    /// Into the sibling that keeps receiving water.
    Other,
}

/// Result of redistributing a saddle's outflow after its first depression
/// fills.
#[derive(Debug, Clone)]
pub struct SaddleOutflow<T> {
    pub phi_v: StepFn<T>,
    /// Per-edge weights for `t >= tau`.
    pub weights_after: Vec<(u32, T)>,
    /// Final per-edge flow functions.
    pub edges: Vec<(u32, StepFn<T>)>,
}

/// Apply the saddle flow redistribution: before `tau_first` the vertex
/// passes its inflow by the initial weights; afterwards everything (plus the
/// spill, which already accounts for the water the vertex was pouring into
/// the filled side) is renormalized over the open side.
///
/// When the open side's initial weights sum to zero the spill still needs an
/// outlet; under SFD the caller provides the steepest open-side neighbor as
/// `fallback_outlet`. Without one this is a degenerate model state.
pub fn saddle_redistribute<T: Real>(
    lambda0: &[(u32, T, SpillSide)],
    phi_in: &StepFn<T>,
    spill: &StepFn<T>,
    tau_first: T,
    fallback_outlet: Option<u32>,
) -> Result<SaddleOutflow<T>, FlowError> {
    if spill.is_empty() || tau_first.is_infinite() {
        return Ok(SaddleOutflow {
            phi_v: phi_in.clone(),
            weights_after: lambda0.iter().map(|&(w, lam, _)| (w, lam)).collect(),
            edges: lambda0
                .iter()
                .map(|&(w, lam, _)| (w, phi_in.scale(lam)))
                .collect(),
        });
    }
    let mut s_other = T::zero();
    for &(_, lam, side) in lambda0 {
        if side == SpillSide::Other {
            s_other = s_other + lam;
        }
    }
    let weights_after: Vec<(u32, T)> = if s_other > T::zero() {
        lambda0
            .iter()
            .map(|&(w, lam, side)| match side {
                SpillSide::Other => (w, lam / s_other),
                SpillSide::First => (w, T::zero()),
            })
            .collect()
    } else {
        let outlet = fallback_outlet.ok_or(FlowError::ModelDegenerate)?;
        lambda0
            .iter()
            .map(|&(w, _, _)| (w, if w == outlet { T::one() } else { T::zero() }))
            .collect()
    };
    let after = phi_in.scale(s_other);
    let phi_v = phi_in.switch_at(tau_first, &after).add(spill);
    let edges = lambda0
        .iter()
        .zip(&weights_after)
        .map(|(&(w, lam, _), &(_, post))| {
            let pre = phi_in.scale(lam);
            let post_fn = phi_v.scale(post);
            (w, pre.switch_at(tau_first, &post_fn))
        })
        .collect();
    Ok(SaddleOutflow {
        phi_v,
        weights_after,
        edges,
    })
}

/// Ordered collection of crossing-edge flow rates keyed by the in-order
/// label of the target's smallest maximal depression. A saddle partitions it
/// into its two sides by label range; only the cheaper side is ever summed.
pub type EdgeKey = (u32, u32, u32);

#[derive(Debug, Clone, Default)]
pub struct EdgeFlowStructure<T> {
    map: BTreeMap<EdgeKey, StepFn<T>>,
}

impl<T: Real> EdgeFlowStructure<T> {
    pub fn new() -> Self {
        EdgeFlowStructure {
            map: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, key: EdgeKey, f: StepFn<T>) {
        self.map.insert(key, f);
    }

    pub fn remove(&mut self, key: &EdgeKey) -> Option<StepFn<T>> {
        self.map.remove(key)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Members with label in `[lo, hi]`, in key order. Cost is proportional
    /// to the side size, which the caller keeps at the cheaper side.
    pub fn side_members(&self, lo: u32, hi: u32) -> Vec<(EdgeKey, &StepFn<T>)> {
        self.map
            .range((lo, 0, 0)..=(hi, u32::MAX, u32::MAX))
            .map(|(&k, f)| (k, f))
            .collect()
    }

    /// Canonical sum of one side's members.
    pub fn side_sum(&self, lo: u32, hi: u32) -> StepFn<T> {
        StepFn::sum(
            self.map
                .range((lo, 0, 0)..=(hi, u32::MAX, u32::MAX))
                .map(|(_, f)| f),
        )
    }
}

/// Per-depression results of a terrain-flow query.
#[derive(Debug, Clone, PartialEq)]
pub struct DepressionRecord<T> {
    /// Arrival rate used to determine the fill time (pseudo-fill rate at the
    /// delimiting saddle, plus any sibling spill received).
    pub fill: StepFn<T>,
    /// Rate at which the depression spills over its delimiting saddle.
    pub spill: StepFn<T>,
    /// Time the depression becomes full, or infinity.
    pub fill_time: T,
}

/// Counters describing how a query ran. Not part of result equality.
#[derive(Debug, Clone, Default)]
pub struct QueryStats {
    /// Vertices processed, in processing order.
    pub processed: Vec<u32>,
    /// Priority-queue forwards (block-store algorithms).
    pub forwards: u64,
    /// Crossing-edge copies forwarded to saddles (second block-store
    /// algorithm).
    pub saddle_forwards: u64,
    /// Per-saddle copy counts, keyed by saddle vertex.
    pub saddle_copies: std::collections::BTreeMap<u32, u64>,
}

/// Flow-rate functions on edges plus per-depression fill/spill data and
/// per-vertex flood times.
#[derive(Debug, Clone)]
pub struct FlowRateMap<T> {
    edges: BTreeMap<(u32, u32), StepFn<T>>,
    depressions: BTreeMap<u32, DepressionRecord<T>>,
    flood_times: BTreeMap<u32, T>,
    stats: QueryStats,
}

impl<T: Real> PartialEq for FlowRateMap<T> {
    fn eq(&self, other: &Self) -> bool {
        self.edges == other.edges
            && self.depressions == other.depressions
            && self.flood_times == other.flood_times
    }
}

impl<T: Real> FlowRateMap<T> {
    /// Flow-rate function of the edge `(u, v)`; `None` means identically 0.
    pub fn edge_fn(&self, u: u32, v: u32) -> Option<&StepFn<T>> {
        self.edges.get(&(u, v))
    }

    pub fn edges(&self) -> impl Iterator<Item = (&(u32, u32), &StepFn<T>)> {
        self.edges.iter()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Total complexity of all stored flow-rate functions.
    pub fn total_complexity(&self) -> usize {
        self.edges.values().map(|f| f.complexity()).sum()
    }

    pub fn depression(&self, node: u32) -> Option<&DepressionRecord<T>> {
        self.depressions.get(&node)
    }

    pub fn depressions(&self) -> impl Iterator<Item = (&u32, &DepressionRecord<T>)> {
        self.depressions.iter()
    }

    /// Flood time of a vertex, or infinity if it never floods.
    pub fn flood_time(&self, v: u32) -> T {
        self.flood_times.get(&v).copied().unwrap_or_else(T::infinity)
    }

    pub fn flood_times(&self) -> impl Iterator<Item = (&u32, &T)> {
        self.flood_times.iter()
    }

    pub fn stats(&self) -> &QueryStats {
        &self.stats
    }

    pub(crate) fn stats_mut(&mut self) -> &mut QueryStats {
        &mut self.stats
    }
}

/// Flood time of a vertex: least time the water volume in its containing
/// depression reaches `vol(beta_v)`. A zero-volume depression (a sink)
/// floods the moment water first arrives.
pub(crate) fn flood_time_of<T: Real>(fill: &StepFn<T>, vol: T) -> T {
    if vol == T::zero() {
        match fill.breakpoints().first() {
            Some(&(t, _)) => t,
            None => T::infinity(),
        }
    } else {
        fill.first_time_integral_reaches(vol)
    }
}

/// Shared per-vertex computation state of a terrain-flow sweep. The drivers
/// differ only in scheduling and transport; every arithmetic step lives
/// here so their outputs are bit-identical.
pub(crate) struct SweepCtx<'a, T: Real> {
    pub index: &'a TerrainIndex<T>,
    pub graph: &'a FlowGraph<T>,
    pub rain: &'a RainDistribution<T>,
    pub rain_node: Vec<StepFn<T>>,
    /// Fill rate of each node's depression including received sibling spill;
    /// assigned at the parent saddle (root at initialization).
    pub fill_desc: Vec<Option<StepFn<T>>>,
    edges: BTreeMap<(u32, u32), StepFn<T>>,
    depressions: BTreeMap<u32, DepressionRecord<T>>,
}

impl<'a, T: Real> SweepCtx<'a, T> {
    pub fn new(
        index: &'a TerrainIndex<T>,
        graph: &'a FlowGraph<T>,
        rain: &'a RainDistribution<T>,
    ) -> Result<Self, FlowError> {
        let rain_node = aggregate_rain(index, rain)?;
        let nn = index.tree().len();
        let mut fill_desc = vec![None; nn];
        let root = index.tree().root();
        fill_desc[root as usize] = Some(rain_node[root as usize].clone());
        let mut depressions = BTreeMap::new();
        depressions.insert(
            root,
            DepressionRecord {
                fill: rain_node[root as usize].clone(),
                spill: StepFn::empty(),
                fill_time: T::infinity(),
            },
        );
        Ok(SweepCtx {
            index,
            graph,
            rain,
            rain_node,
            fill_desc,
            edges: BTreeMap::new(),
            depressions,
        })
    }

    /// Rain on `v` plus incoming edge flows in ascending source order.
    pub fn vertex_inflow(&self, v: u32, incoming: &[(u32, StepFn<T>)]) -> StepFn<T> {
        debug_assert!(incoming.windows(2).all(|w| w[0].0 < w[1].0));
        let mut acc = match self.rain.fn_of(v) {
            Some(f) => f.clone(),
            None => StepFn::empty(),
        };
        for (_, f) in incoming {
            acc = acc.add(f);
        }
        acc
    }

    /// Non-saddle vertex: route the inflow by the initial weights.
    pub fn process_regular(&mut self, v: u32, phi_v: &StepFn<T>) -> Vec<(u32, StepFn<T>)> {
        let mut out = Vec::new();
        for &(w, lam) in self.graph.out(v) {
            let f = phi_v.scale(lam);
            if !f.is_empty() {
                self.edges.insert((v, w), f.clone());
                out.push((w, f));
            }
        }
        out
    }

    /// Negative saddle: fill-rate determination, spill, redistribution and
    /// per-depression records. `cheap_members` are the cheap side's crossing
    /// edges (excluding this vertex's own), sorted by key.
    pub fn process_saddle(
        &mut self,
        v: u32,
        phi_in: &StepFn<T>,
        cheap_members: &[(EdgeKey, &StepFn<T>)],
    ) -> Result<Vec<(u32, StepFn<T>)>, FlowError> {
        let tree = self.index.tree();
        let ann = self.index.annotation();
        let terrain = self.index.terrain();
        let node = tree.node_of_vertex(v).expect("saddle has a merge node");
        let [left, right] = tree.children(node).expect("negative saddle");
        let (cheap, _exp) = self.index.cheap_expensive(node);
        let (cheap_lo, cheap_hi) = tree.label_range(cheap);

        // This vertex's own downslope edges with their pseudo flows, keyed
        // like structure members so the fold order is canonical.
        let mut downs: Vec<(u32, T)> = terrain
            .neighbors(v)
            .iter()
            .filter(|&&w| w != V_INF && terrain.height(w) < terrain.height(v))
            .map(|&w| (w, self.graph.weight(v, w)))
            .collect();
        downs.sort_unstable_by_key(|&(w, _)| w);
        let pseudo: Vec<(EdgeKey, StepFn<T>)> = downs
            .iter()
            .map(|&(w, lam)| ((ann.label(w), w, v), phi_in.scale(lam)))
            .filter(|(_, f)| !f.is_empty())
            .collect();

        // Canonical fold over the cheap side: merge stored members with the
        // pseudo edges that land in the cheap range.
        let mut sum = StepFn::empty();
        {
            let mut i = 0usize;
            let mut j = 0usize;
            let in_cheap =
                |k: &EdgeKey| k.0 >= cheap_lo && k.0 <= cheap_hi;
            let pseudo_cheap: Vec<&(EdgeKey, StepFn<T>)> =
                pseudo.iter().filter(|(k, _)| in_cheap(k)).collect();
            while i < cheap_members.len() || j < pseudo_cheap.len() {
                let take_member = match (cheap_members.get(i), pseudo_cheap.get(j)) {
                    (Some((mk, _)), Some((pk, _))) => mk < pk,
                    (Some(_), None) => true,
                    _ => false,
                };
                if take_member {
                    sum = sum.add(cheap_members[i].1);
                    i += 1;
                } else {
                    sum = sum.add(&pseudo_cheap[j].1);
                    j += 1;
                }
            }
        }
        let fill_cheap = self.rain_node[cheap as usize].add(&sum);
        let fill_parent = self.fill_desc[node as usize]
            .as_ref()
            .expect("parent fill assigned before its saddle is processed");
        let fill_exp = fill_parent.sub(&fill_cheap);
        let (fill_left, fill_right) = if cheap == left {
            (fill_cheap, fill_exp)
        } else {
            (fill_exp, fill_cheap)
        };

        let (vol_left, vol_right) = (tree.capacity(left), tree.capacity(right));
        let (first, tau, spill) =
            saddle_fill_spill(&fill_left, &fill_right, vol_left, vol_right);
        debug_assert_eq!(
            first,
            first_filled_by_backward_scan(&fill_left, &fill_right, vol_left, vol_right),
            "prefix-volume scan disagrees at saddle {v}"
        );
        let (first_node, first_fill, other_node, other_fill) = match first {
            FirstFilled::Beta => (right, &fill_right, left, &fill_left),
            _ => (left, &fill_left, right, &fill_right),
        };

        // Descend fills: the open side receives the spill.
        let first_desc = first_fill.clone();
        let other_desc = other_fill.add(&spill);
        let ft_first = flood_time_of(&first_desc, tree.capacity(first_node));
        let ft_other = flood_time_of(&other_desc, tree.capacity(other_node));
        self.depressions.insert(
            first_node,
            DepressionRecord {
                fill: first_fill.clone(),
                spill: spill.clone(),
                fill_time: ft_first,
            },
        );
        self.depressions.insert(
            other_node,
            DepressionRecord {
                fill: other_fill.clone(),
                spill: StepFn::empty(),
                fill_time: ft_other,
            },
        );
        self.fill_desc[first_node as usize] = Some(first_desc);
        self.fill_desc[other_node as usize] = Some(other_desc);

        // Redistribute this vertex's outflow.
        let (flo, fhi) = tree.label_range(first_node);
        let lambda0: Vec<(u32, T, SpillSide)> = downs
            .iter()
            .map(|&(w, lam)| {
                let lab = ann.label(w);
                let side = if lab >= flo && lab <= fhi {
                    SpillSide::First
                } else {
                    SpillSide::Other
                };
                (w, lam, side)
            })
            .collect();
        let fallback = spill_entry(self.index, v, &lambda0);
        let outflow = saddle_redistribute(&lambda0, phi_in, &spill, tau, fallback)?;
        let mut out = Vec::new();
        for (w, f) in outflow.edges {
            if !f.is_empty() {
                self.edges.insert((v, w), f.clone());
                out.push((w, f));
            }
        }
        Ok(out)
    }

    /// Flood times for every vertex, edge truncation, and assembly.
    pub fn finish(self, stats: QueryStats) -> FlowRateMap<T> {
        let ann = self.index.annotation();
        let n = self.index.terrain().vertex_count() as u32;
        let mut flood_times = BTreeMap::new();
        for v in 0..n {
            let d = ann.smallest_depression(v);
            let fill = self.fill_desc[d as usize]
                .as_ref()
                .expect("all saddles processed");
            let tau = flood_time_of(fill, ann.vol_beta(v));
            if tau.is_finite() {
                flood_times.insert(v, tau);
            }
        }
        let mut edges = self.edges;
        for ((_, w), f) in edges.iter_mut() {
            if let Some(&tau) = flood_times.get(w) {
                *f = f.clone().truncated(tau);
            }
        }
        FlowRateMap {
            edges,
            depressions: self.depressions,
            flood_times,
            stats,
        }
    }
}

/// Steepest open-side downslope neighbor of a spilling saddle; ties to the
/// smallest id. This is where the spill enters when the initial weights give
/// the open side nothing (the SFD case).
fn spill_entry<T: Real>(
    index: &TerrainIndex<T>,
    v: u32,
    lambda0: &[(u32, T, SpillSide)],
) -> Option<u32> {
    let terrain = index.terrain();
    let h = terrain.height(v);
    let mut best: Option<(u32, T)> = None;
    for &(w, _, side) in lambda0 {
        if side != SpillSide::Other {
            continue;
        }
        let s = (h - terrain.height(w)) / terrain.edge_len(v, w);
        match best {
            Some((bw, bs)) if s < bs || (s == bs && w > bw) => {}
            _ => best = Some((w, s)),
        }
    }
    best.map(|(w, _)| w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sf(v: &[(f64, f64)]) -> StepFn<f64> {
        StepFn::from_deltas(v.to_vec())
    }

    #[test]
    fn fill_spill_prefers_the_smaller_volume_at_equal_rates() {
        let f = sf(&[(0.0, 1.0)]);
        let (first, tau, spill) = saddle_fill_spill(&f, &f, 2.0, 3.0);
        assert_eq!(first, FirstFilled::Alpha);
        assert_eq!(tau, 2.0);
        assert_eq!(spill.value_at(1.9), 0.0);
        assert_eq!(spill.value_at(2.0), 1.0);
    }

    #[test]
    fn no_spill_when_rain_stops_early() {
        // Rate 1 for 2 seconds: total volume 2 < both capacities.
        let f = sf(&[(0.0, 1.0), (2.0, -1.0)]);
        let (first, tau, spill) = saddle_fill_spill(&f, &f, 5.0, 6.0);
        assert_eq!(first, FirstFilled::Neither);
        assert!(tau.is_infinite());
        assert!(spill.is_empty());
    }

    #[test]
    fn fill_rate_two_volume_six_spills_at_three() {
        let f = sf(&[(0.0, 2.0)]);
        let (first, tau, spill) = saddle_fill_spill(&f, &StepFn::empty(), 6.0, 1.0);
        assert_eq!(first, FirstFilled::Alpha);
        assert_eq!(tau, 3.0);
        assert_eq!(spill, sf(&[(3.0, 2.0)]));
    }

    #[test]
    fn backward_scan_agrees_with_direct_comparison() {
        let cases = [
            (sf(&[(0.0, 1.0), (5.0, 1.0)]), sf(&[(0.0, 2.0)]), 4.0, 9.0),
            (sf(&[(0.0, 1.0)]), sf(&[(0.0, 1.0)]), 3.0, 3.0),
            (sf(&[(0.0, 1.0), (1.0, -1.0)]), sf(&[(0.0, 4.0)]), 9.0, 2.0),
            (StepFn::empty(), StepFn::empty(), 1.0, 1.0),
        ];
        for (fa, fb, va, vb) in cases {
            let (direct, _, _) = saddle_fill_spill(&fa, &fb, va, vb);
            assert_eq!(first_filled_by_backward_scan(&fa, &fb, va, vb), direct);
        }
    }

    #[test]
    fn redistribute_renormalizes_the_open_side() {
        // Two downslope edges of weight 0.5 each; the first side fills at 2.
        let phi_in = sf(&[(0.0, 1.0)]);
        let spill = sf(&[(2.0, 1.0)]);
        let lambda0 = [
            (10u32, 0.5, SpillSide::First),
            (11u32, 0.5, SpillSide::Other),
        ];
        let out = saddle_redistribute(&lambda0, &phi_in, &spill, 2.0, None).unwrap();
        assert_eq!(out.weights_after, vec![(10, 0.0), (11, 1.0)]);
        // phi_v: 1 before, 1 * 0.5 + 1 = 1.5 after.
        assert_eq!(out.phi_v.value_at(1.0), 1.0);
        assert_eq!(out.phi_v.value_at(2.0), 1.5);
        // The open edge carries everything after tau.
        let e11 = &out.edges[1].1;
        assert_eq!(e11.value_at(1.0), 0.5);
        assert_eq!(e11.value_at(3.0), 1.5);
        let e10 = &out.edges[0].1;
        assert_eq!(e10.value_at(1.0), 0.5);
        assert_eq!(e10.value_at(2.0), 0.0);
    }

    #[test]
    fn redistribute_without_open_outlet_errors_under_mfd() {
        let phi_in = sf(&[(0.0, 1.0)]);
        let spill = sf(&[(2.0, 1.0)]);
        let lambda0 = [(10u32, 1.0, SpillSide::First)];
        assert_eq!(
            saddle_redistribute(&lambda0, &phi_in, &spill, 2.0, None).unwrap_err(),
            FlowError::ModelDegenerate
        );
    }

    #[test]
    fn redistribute_with_zero_spill_is_the_plain_rule() {
        let phi_in = sf(&[(0.0, 1.0)]);
        let lambda0 = [
            (10u32, 0.25, SpillSide::First),
            (11u32, 0.75, SpillSide::Other),
        ];
        let out =
            saddle_redistribute(&lambda0, &phi_in, &StepFn::empty(), f64::INFINITY, None)
                .unwrap();
        assert_eq!(out.phi_v, phi_in);
        assert_eq!(out.edges[0].1.value_at(5.0), 0.25);
        assert_eq!(out.edges[1].1.value_at(5.0), 0.75);
    }

    #[test]
    fn rain_distribution_validates_and_canonicalizes() {
        let r =
            RainDistribution::from_setpoints(&[(3, 0.0, 1.0), (3, 2.0, 0.5)], 4.0).unwrap();
        let f = r.fn_of(3).unwrap();
        assert_eq!(f.value_at(1.0), 1.0);
        assert_eq!(f.value_at(2.5), 0.5);
        assert_eq!(f.value_at(4.0), 0.0);
        assert_eq!(r.change_count(), 3);
        assert_eq!(r.entry_count(), 2);

        assert!(matches!(
            RainDistribution::from_setpoints(&[(1, 0.0, -1.0)], 2.0),
            Err(FlowError::NegativeRainRate { vertex: 1 })
        ));
        assert!(matches!(
            RainDistribution::from_setpoints(&[(1, 3.0, 1.0)], 2.0),
            Err(FlowError::RainAfterEnd { vertex: 1 })
        ));
    }
}
