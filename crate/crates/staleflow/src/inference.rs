//! Phase two of profile transfer: complete the partial counts on a CFG into
//! an exact, flow-conservation-consistent profile.
//!
//! The objective is the total adjustment penalty
//!
//! ```text
//! Σ cost(f(v), cnt(v)) + Σ cost(f(u,v), cnt(u,v))
//! cost(f, cnt) = k_inc·(f − cnt)  if f ≥ cnt
//!              = k_dec·(cnt − f)  otherwise;   cost(f, ∅) = 0
//! ```
//!
//! minimized over all non-negative integral flows `f` satisfying flow
//! conservation. Counted edges are first subdivided so only vertices carry
//! counts; each vertex is then split into an in/out node pair whose
//! connecting arcs encode the piecewise-linear cost exactly (a capacity-`cnt`
//! arc at −k_dec in parallel with an unbounded arc at +k_inc), and the
//! resulting min-cost circulation is solved exactly by saturating the
//! negative arcs and repairing imbalances along successive shortest paths
//! with node potentials. A final rebalancing pass spreads flow evenly across
//! regions that carry no counts at all.

use crate::cfg::FunctionCfg;
use crate::matching::InitialCounts;
use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

/// Input counts above this are clamped; keeps every product with a penalty
/// coefficient comfortably inside 64-bit signed arithmetic.
pub const COUNT_CAP: u64 = 1 << 44;

const INF_CAP: i64 = 1 << 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InferenceParams {
    pub k_inc: u64,
    pub k_dec: u64,
    /// Per-unit cost of the artificial exit arcs added when a function has
    /// no exit blocks at all.
    pub exit_penalty: u64,
}

impl Default for InferenceParams {
    fn default() -> Self {
        InferenceParams {
            k_inc: 1,
            k_dec: 2,
            exit_penalty: 1 << 20,
        }
    }
}

/// A function viewed as a flow problem: vertices and edges with optional
/// initial counts (`None` is ∅ — no information).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowFunction {
    pub entry: u32,
    pub vertices: BTreeMap<u32, Option<u64>>,
    pub edges: BTreeMap<(u32, u32), Option<u64>>,
}

impl FlowFunction {
    /// Builds the flow problem for `cfg` with the matcher's initial counts.
    /// Counts are clamped to [`COUNT_CAP`].
    pub fn from_cfg(cfg: &FunctionCfg, counts: &InitialCounts) -> FlowFunction {
        let vertices = cfg
            .blocks
            .iter()
            .map(|b| {
                (
                    b.id,
                    counts
                        .block
                        .get(&b.id)
                        .copied()
                        .flatten()
                        .map(|c| c.min(COUNT_CAP)),
                )
            })
            .collect();
        let edges = cfg
            .edges()
            .into_iter()
            .map(|e| {
                (
                    e,
                    counts
                        .jump
                        .get(&e)
                        .copied()
                        .flatten()
                        .map(|c| c.min(COUNT_CAP)),
                )
            })
            .collect();
        FlowFunction {
            entry: cfg.entry,
            vertices,
            edges,
        }
    }

    /// The exit set T*: vertices with no outgoing edges.
    pub fn exits(&self) -> Vec<u32> {
        let has_out: BTreeSet<u32> = self.edges.keys().map(|&(u, _)| u).collect();
        self.vertices
            .keys()
            .filter(|v| !has_out.contains(v))
            .copied()
            .collect()
    }

    fn successors(&self) -> BTreeMap<u32, Vec<u32>> {
        let mut out: BTreeMap<u32, Vec<u32>> =
            self.vertices.keys().map(|&v| (v, Vec::new())).collect();
        for &(u, v) in self.edges.keys() {
            out.get_mut(&u).expect("edge source exists").push(v);
        }
        out
    }

    fn predecessors(&self) -> BTreeMap<u32, Vec<u32>> {
        let mut inn: BTreeMap<u32, Vec<u32>> =
            self.vertices.keys().map(|&v| (v, Vec::new())).collect();
        for &(u, v) in self.edges.keys() {
            inn.get_mut(&v).expect("edge target exists").push(u);
        }
        inn
    }

    fn reachable(&self) -> BTreeSet<u32> {
        let succ = self.successors();
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::new();
        if self.vertices.contains_key(&self.entry) {
            seen.insert(self.entry);
            queue.push_back(self.entry);
        }
        while let Some(v) = queue.pop_front() {
            for &s in &succ[&v] {
                if seen.insert(s) {
                    queue.push_back(s);
                }
            }
        }
        seen
    }
}

/// Inference output: a complete integral flow plus the objective it attains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowResult {
    pub vertex_flow: BTreeMap<u32, u64>,
    pub edge_flow: BTreeMap<(u32, u32), u64>,
    /// The adjustment objective of the flow against the (preprocessed)
    /// initial counts; minimal by construction.
    pub objective: u64,
    pub warnings: Vec<String>,
}

/// Result of counted-edge subdivision, with the mapping from each inserted
/// vertex back to the edge it replaced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subdivided {
    pub flow: FlowFunction,
    pub edge_vertex: BTreeMap<u32, (u32, u32)>,
}

/// Replaces every counted edge (u,v) by a fresh vertex w carrying the edge's
/// count, with uncounted edges (u,w) and (w,v). The output has no counted
/// edges; uncounted edges pass through unchanged.
pub fn subdivide_counted_edges(ff: &FlowFunction) -> Subdivided {
    let mut flow = FlowFunction {
        entry: ff.entry,
        vertices: ff.vertices.clone(),
        edges: BTreeMap::new(),
    };
    let mut edge_vertex = BTreeMap::new();
    let mut next_id = ff.vertices.keys().max().map_or(0, |m| m + 1);
    for (&(u, v), &cnt) in &ff.edges {
        match cnt {
            Some(c) => {
                let w = next_id;
                next_id += 1;
                flow.vertices.insert(w, Some(c));
                flow.edges.insert((u, w), None);
                flow.edges.insert((w, v), None);
                edge_vertex.insert(w, (u, v));
            }
            None => {
                flow.edges.insert((u, v), None);
            }
        }
    }
    Subdivided { flow, edge_vertex }
}

#[derive(Debug, Clone)]
struct RawArc {
    to: usize,
    rev: usize,
    cap: i64,
    cost: i64,
}

/// The min-cost-circulation network for one (subdivided) flow function.
/// Node-split construction: vertex v becomes v_in → v_out with parallel arcs
/// encoding the count-adjustment cost; CFG edges connect out to in nodes at
/// zero cost; a source S feeds the entry and exits drain into a sink T that
/// recirculates into S.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    graph: Vec<Vec<RawArc>>,
    /// (node, arc index) of every forward arc, for cost accounting.
    forward: Vec<(usize, usize)>,
    vertex_base: BTreeMap<u32, (usize, usize)>,
    vertex_main: BTreeMap<u32, (usize, usize)>,
    edge_pos: BTreeMap<(u32, u32), (usize, usize)>,
    penalty_exits: usize,
}

impl FlowNetwork {
    fn add_arc(&mut self, u: usize, v: usize, cap: i64, cost: i64) -> (usize, usize) {
        let pos = (u, self.graph[u].len());
        let rev = self.graph[v].len();
        self.graph[u].push(RawArc {
            to: v,
            rev,
            cap,
            cost,
        });
        self.graph[v].push(RawArc {
            to: u,
            rev: pos.1,
            cap: 0,
            cost: -cost,
        });
        self.forward.push(pos);
        pos
    }

    fn arc_flow(&self, pos: (usize, usize)) -> i64 {
        let a = &self.graph[pos.0][pos.1];
        self.graph[a.to][a.rev].cap
    }

    /// Flow through vertex v (both parallel arcs when counted).
    pub fn vertex_flow(&self, v: u32) -> u64 {
        let base = self.vertex_base.get(&v).map_or(0, |&p| self.arc_flow(p));
        let main = self.vertex_main.get(&v).map_or(0, |&p| self.arc_flow(p));
        (base + main) as u64
    }

    /// Flow on CFG edge (u,v).
    pub fn edge_flow(&self, u: u32, v: u32) -> u64 {
        self.edge_pos.get(&(u, v)).map_or(0, |&p| self.arc_flow(p)) as u64
    }

    /// Total cost of the current flow over all arcs.
    pub fn total_cost(&self) -> i128 {
        self.forward
            .iter()
            .map(|&p| {
                let a = &self.graph[p.0][p.1];
                self.arc_flow(p) as i128 * a.cost as i128
            })
            .sum()
    }

    /// (capacity, cost) of the capacitated base arc of a counted vertex.
    pub fn base_arc(&self, v: u32) -> Option<(u64, i64)> {
        self.vertex_base.get(&v).map(|&(n, i)| {
            let a = &self.graph[n][i];
            ((a.cap + self.arc_flow((n, i))) as u64, a.cost)
        })
    }

    /// Cost of the unbounded through-arc of a vertex (the overflow arc for
    /// counted vertices, the sole arc otherwise).
    pub fn main_arc_cost(&self, v: u32) -> Option<i64> {
        self.vertex_main
            .get(&v)
            .map(|&(n, i)| self.graph[n][i].cost)
    }

    /// Number of penalized artificial exit arcs (nonzero only for functions
    /// with an empty exit set).
    pub fn penalty_exit_count(&self) -> usize {
        self.penalty_exits
    }

    pub fn node_count(&self) -> usize {
        self.graph.len()
    }
}

/// Drops positive counts sitting on vertices or edges unreachable from the
/// entry (the flow model cannot route anything there), returning the cleaned
/// function and one warning per drop.
fn drop_unreachable_counts(ff: &FlowFunction) -> (FlowFunction, Vec<String>) {
    let reachable = ff.reachable();
    let mut out = ff.clone();
    let mut warnings = Vec::new();
    for (&v, cnt) in out.vertices.iter_mut() {
        if let Some(c) = *cnt {
            if c > 0 && !reachable.contains(&v) {
                warnings.push(format!("dropping count {c} on unreachable block {v}"));
                *cnt = None;
            }
        }
    }
    for (&(u, v), cnt) in out.edges.iter_mut() {
        if let Some(c) = *cnt {
            if c > 0 && !reachable.contains(&u) {
                warnings.push(format!("dropping count {c} on unreachable edge ({u},{v})"));
                *cnt = None;
            }
        }
    }
    (out, warnings)
}

/// Builds the circulation network for a flow function without counted edges
/// (run [`subdivide_counted_edges`] first). Unreachable counted vertices are
/// reported and their counts ignored.
pub fn build_network(ff: &FlowFunction, params: &InferenceParams) -> (FlowNetwork, Vec<String>) {
    assert!(
        ff.edges.values().all(|c| c.is_none()),
        "build_network requires a subdivided flow function"
    );
    let (ff, warnings) = drop_unreachable_counts(ff);
    let ids: Vec<u32> = ff.vertices.keys().copied().collect();
    let index: BTreeMap<u32, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let n_nodes = 2 + 2 * ids.len();
    let mut net = FlowNetwork {
        graph: vec![Vec::new(); n_nodes],
        forward: Vec::new(),
        vertex_base: BTreeMap::new(),
        vertex_main: BTreeMap::new(),
        edge_pos: BTreeMap::new(),
        penalty_exits: 0,
    };
    const S: usize = 0;
    const T: usize = 1;
    let node_in = |v: u32| 2 + 2 * index[&v];
    let node_out = |v: u32| 3 + 2 * index[&v];

    for &v in &ids {
        match ff.vertices[&v] {
            Some(c) => {
                let cap = c.min(COUNT_CAP) as i64;
                let base = net.add_arc(node_in(v), node_out(v), cap, -(params.k_dec as i64));
                let over = net.add_arc(node_in(v), node_out(v), INF_CAP, params.k_inc as i64);
                net.vertex_base.insert(v, base);
                net.vertex_main.insert(v, over);
            }
            None => {
                let main = net.add_arc(node_in(v), node_out(v), INF_CAP, 0);
                net.vertex_main.insert(v, main);
            }
        }
    }
    for &(u, v) in ff.edges.keys() {
        let pos = net.add_arc(node_out(u), node_in(v), INF_CAP, 0);
        net.edge_pos.insert((u, v), pos);
    }
    if ff.vertices.contains_key(&ff.entry) {
        net.add_arc(S, node_in(ff.entry), INF_CAP, 0);
    }
    let exits = ff.exits();
    if exits.is_empty() {
        for &v in &ids {
            net.add_arc(node_out(v), T, INF_CAP, params.exit_penalty as i64);
            net.penalty_exits += 1;
        }
    } else {
        for &t in &exits {
            net.add_arc(node_out(t), T, INF_CAP, 0);
        }
    }
    net.add_arc(T, S, INF_CAP, 0);
    (net, warnings)
}

/// Solves the network to an exact minimum-cost circulation: every
/// negative-cost arc is saturated up front, and the resulting node
/// imbalances are repaired along successive shortest residual paths using
/// node potentials (Dijkstra on reduced costs, deterministic tie-breaking).
pub fn solve_min_cost_flow(net: &mut FlowNetwork) {
    let n = net.graph.len();
    let mut excess = vec![0i64; n];
    for u in 0..n {
        for i in 0..net.graph[u].len() {
            let (to, rev, cap, cost) = {
                let a = &net.graph[u][i];
                (a.to, a.rev, a.cap, a.cost)
            };
            if cost < 0 && cap > 0 {
                net.graph[u][i].cap = 0;
                net.graph[to][rev].cap += cap;
                excess[u] -= cap;
                excess[to] += cap;
            }
        }
    }

    let mut pot = vec![0i64; n];
    let mut dist = vec![i64::MAX; n];
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    loop {
        let sources: Vec<usize> = (0..n).filter(|&v| excess[v] > 0).collect();
        if sources.is_empty() {
            break;
        }
        // Multi-source Dijkstra on reduced costs to the nearest deficit node.
        dist.iter_mut().for_each(|d| *d = i64::MAX);
        parent.iter_mut().for_each(|p| *p = None);
        let mut heap: BinaryHeap<Reverse<(i64, usize)>> = BinaryHeap::new();
        for &s in &sources {
            dist[s] = 0;
            heap.push(Reverse((0, s)));
        }
        let mut target: Option<usize> = None;
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            if excess[u] < 0 {
                target = Some(u);
                break;
            }
            for (i, a) in net.graph[u].iter().enumerate() {
                if a.cap <= 0 {
                    continue;
                }
                let nd = d + a.cost + pot[u] - pot[a.to];
                debug_assert!(a.cost + pot[u] - pot[a.to] >= 0, "reduced cost negative");
                if nd < dist[a.to] {
                    dist[a.to] = nd;
                    parent[a.to] = Some((u, i));
                    heap.push(Reverse((nd, a.to)));
                }
            }
        }
        let t = target.expect("a deficit node is always reachable from an excess node");
        let dt = dist[t];

        // Bottleneck along the path, bounded by the endpoint imbalances.
        let mut bottleneck = -excess[t];
        let mut v = t;
        let mut s = t;
        while let Some((u, i)) = parent[v] {
            bottleneck = bottleneck.min(net.graph[u][i].cap);
            v = u;
            s = u;
        }
        bottleneck = bottleneck.min(excess[s]);
        debug_assert!(bottleneck > 0);

        let mut v = t;
        while let Some((u, i)) = parent[v] {
            let rev = net.graph[u][i].rev;
            net.graph[u][i].cap -= bottleneck;
            let to = net.graph[u][i].to;
            net.graph[to][rev].cap += bottleneck;
            v = u;
        }
        excess[s] -= bottleneck;
        excess[t] += bottleneck;

        for v in 0..n {
            pot[v] += dist[v].min(dt);
        }
    }
}

/// The adjustment objective evaluated on a complete flow against the counts
/// of `ff`. Missing flow entries read as zero.
pub fn adjustment_objective(
    ff: &FlowFunction,
    vertex_flow: &BTreeMap<u32, u64>,
    edge_flow: &BTreeMap<(u32, u32), u64>,
    params: &InferenceParams,
) -> u64 {
    let term = |f: u64, cnt: Option<u64>| -> u128 {
        match cnt {
            None => 0,
            Some(c) => {
                if f >= c {
                    (f - c) as u128 * params.k_inc as u128
                } else {
                    (c - f) as u128 * params.k_dec as u128
                }
            }
        }
    };
    let mut total: u128 = 0;
    for (&v, &cnt) in &ff.vertices {
        total += term(vertex_flow.get(&v).copied().unwrap_or(0), cnt);
    }
    for (&e, &cnt) in &ff.edges {
        total += term(edge_flow.get(&e).copied().unwrap_or(0), cnt);
    }
    u64::try_from(total).expect("objective fits in 64 bits")
}

/// Checks the flow conservation rules; returns one message per violated
/// vertex (empty means the flow is exactly conservative).
pub fn conservation_violations(ff: &FlowFunction, res: &FlowResult) -> Vec<String> {
    let exits: BTreeSet<u32> = ff.exits().into_iter().collect();
    let mut in_sum: BTreeMap<u32, u128> = ff.vertices.keys().map(|&v| (v, 0)).collect();
    let mut out_sum: BTreeMap<u32, u128> = in_sum.clone();
    for &(u, v) in ff.edges.keys() {
        let f = res.edge_flow.get(&(u, v)).copied().unwrap_or(0) as u128;
        *out_sum.get_mut(&u).unwrap() += f;
        *in_sum.get_mut(&v).unwrap() += f;
    }
    let mut out = Vec::new();
    for &v in ff.vertices.keys() {
        let f = res.vertex_flow.get(&v).copied().unwrap_or(0) as u128;
        let is_entry = v == ff.entry;
        let is_exit = exits.contains(&v);
        let (need_in, need_out) = match (is_entry, is_exit) {
            (true, true) => (false, false),
            (true, false) => (false, true),
            (false, true) => (true, false),
            (false, false) => (true, true),
        };
        if need_in && in_sum[&v] != f {
            out.push(format!("vertex {v}: f={} but inflow={}", f, in_sum[&v]));
        }
        if need_out && out_sum[&v] != f {
            out.push(format!("vertex {v}: f={} but outflow={}", f, out_sum[&v]));
        }
    }
    out
}

/// Full inference: subdivide, build, solve, extract, then rebalance.
pub fn infer(ff: &FlowFunction, params: &InferenceParams) -> FlowResult {
    infer_opts(ff, params, true)
}

/// Inference with rebalancing optional (the flow and objective are identical
/// either way; only the spread across count-free regions differs).
pub fn infer_opts(ff: &FlowFunction, params: &InferenceParams, rebalance: bool) -> FlowResult {
    let (clean, mut warnings) = drop_unreachable_counts(ff);
    let sub = subdivide_counted_edges(&clean);
    let (mut net, w2) = build_network(&sub.flow, params);
    warnings.extend(w2);
    solve_min_cost_flow(&mut net);

    let subdivided_edge: BTreeMap<(u32, u32), u32> =
        sub.edge_vertex.iter().map(|(&w, &e)| (e, w)).collect();
    let vertex_flow: BTreeMap<u32, u64> = clean
        .vertices
        .keys()
        .map(|&v| (v, net.vertex_flow(v)))
        .collect();
    let edge_flow: BTreeMap<(u32, u32), u64> = clean
        .edges
        .keys()
        .map(|&(u, v)| {
            // Counted edges were rerouted through a subdivision vertex; the
            // edge flow is that vertex's through-flow.
            let f = match subdivided_edge.get(&(u, v)) {
                Some(&w) => net.vertex_flow(w),
                None => net.edge_flow(u, v),
            };
            ((u, v), f)
        })
        .collect();

    let objective = adjustment_objective(&clean, &vertex_flow, &edge_flow, params);
    let mut result = FlowResult {
        vertex_flow,
        edge_flow,
        objective,
        warnings,
    };
    if rebalance {
        rebalance_unknown_subgraphs(&clean, &mut result);
        debug_assert_eq!(
            adjustment_objective(&clean, &result.vertex_flow, &result.edge_flow, params),
            result.objective,
            "rebalancing must not change the objective"
        );
    }
    debug_assert!(
        conservation_violations(&clean, &result).is_empty(),
        "inference output must conserve flow: {:?}",
        conservation_violations(&clean, &result)
    );
    result
}

/// Spreads flow evenly across maximal count-free regions: a single known
/// source, a single known sink, and an acyclic all-unknown interior whose
/// edges carry no counts. At the source and at every interior branch the
/// region flow splits as evenly as integrality allows among region
/// successors, larger shares going to lower block ids. Regions of any other
/// shape are left untouched.
pub fn rebalance_unknown_subgraphs(ff: &FlowFunction, res: &mut FlowResult) {
    let succ = ff.successors();
    let pred = ff.predecessors();
    let known = |v: u32| ff.vertices[&v].is_some();
    let counted_edge = |u: u32, v: u32| ff.edges.get(&(u, v)).is_some_and(|c| c.is_some());

    let known_srcs: Vec<u32> = ff.vertices.keys().copied().filter(|&v| known(v)).collect();
    for &src in &known_srcs {
        // Closure of unknown vertices reachable from src through unknowns.
        let mut region: BTreeSet<u32> = BTreeSet::new();
        let mut stack: Vec<u32> = succ[&src].iter().copied().filter(|&v| !known(v)).collect();
        while let Some(v) = stack.pop() {
            if region.insert(v) {
                stack.extend(succ[&v].iter().copied().filter(|&s| !known(s)));
            }
        }
        if region.is_empty() {
            continue;
        }

        // Shape checks. Interior vertices must not be the entry, must have a
        // way out, must be fed only from src or the region, and all region
        // edges must be uncounted; everything leaving the region must
        // converge on one known sink.
        let mut ok = true;
        let mut sinks: BTreeSet<u32> = BTreeSet::new();
        for &r in &region {
            if r == ff.entry || succ[&r].is_empty() {
                ok = false;
                break;
            }
            if !pred[&r].iter().all(|&p| p == src || region.contains(&p)) {
                ok = false;
                break;
            }
            for &s in &succ[&r] {
                if counted_edge(r, s) {
                    ok = false;
                    break;
                }
                if known(s) {
                    sinks.insert(s);
                }
            }
            if !ok {
                break;
            }
        }
        if !ok || sinks.len() != 1 {
            continue;
        }
        let snk = *sinks.iter().next().unwrap();
        if succ[&src]
            .iter()
            .any(|&s| region.contains(&s) && counted_edge(src, s))
        {
            continue;
        }

        // Topological order of the interior; bail out on cycles.
        let mut indeg: BTreeMap<u32, usize> = region
            .iter()
            .map(|&r| (r, pred[&r].iter().filter(|p| region.contains(p)).count()))
            .collect();
        let mut queue: VecDeque<u32> = indeg
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&r, _)| r)
            .collect();
        let mut topo: Vec<u32> = Vec::with_capacity(region.len());
        while let Some(r) = queue.pop_front() {
            topo.push(r);
            for &s in &succ[&r] {
                if region.contains(&s) {
                    let d = indeg.get_mut(&s).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        queue.push_back(s);
                    }
                }
            }
        }
        if topo.len() != region.len() {
            continue; // interior contains a cycle
        }

        // Split set at the source: uncounted edges into the region, plus an
        // uncounted direct edge to the sink if one exists.
        let split: Vec<u32> = succ[&src]
            .iter()
            .copied()
            .filter(|&s| (region.contains(&s) || s == snk) && !counted_edge(src, s))
            .collect();
        let entering: u64 = split
            .iter()
            .map(|&s| res.edge_flow.get(&(src, s)).copied().unwrap_or(0))
            .sum();
        distribute(src, &split, entering, &mut res.edge_flow);

        for &r in &topo {
            let inflow: u64 = pred[&r]
                .iter()
                .map(|&p| res.edge_flow.get(&(p, r)).copied().unwrap_or(0))
                .sum();
            res.vertex_flow.insert(r, inflow);
            let outs: Vec<u32> = succ[&r].clone();
            distribute(r, &outs, inflow, &mut res.edge_flow);
        }
    }
}

/// Assigns `total` across the edges `(v, head)` as evenly as integrality
/// allows; the remainder goes one unit each to the lowest head ids.
fn distribute(v: u32, heads: &[u32], total: u64, edge_flow: &mut BTreeMap<(u32, u32), u64>) {
    if heads.is_empty() {
        return;
    }
    let mut sorted = heads.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as u64;
    let share = total / n;
    let rem = total % n;
    for (i, &h) in sorted.iter().enumerate() {
        let extra = if (i as u64) < rem { 1 } else { 0 };
        edge_flow.insert((v, h), share + extra);
    }
}

/// Exhaustive reference solver for tiny instances: minimizes the adjustment
/// objective over every integral conservative flow whose per-edge and
/// per-vertex values stay within the enumeration bound. Returns `None` when
/// the instance is too large to enumerate (more than 8 vertices or 12
/// edges). Intended for validating the network solver, not for use in the
/// pipeline.
///
/// The bound is the sum of all initial counts (floored at twice the largest
/// single count). That always contains an optimum: decompose any optimal
/// flow into paths and cycles; a path touching no counted element at or
/// below its count can be removed without raising the objective, so some
/// optimum has every unit of flow charged to a counted element within its
/// count, and no flow value exceeds the count total.
pub fn reference_minimum(ff: &FlowFunction, params: &InferenceParams) -> Option<u64> {
    let (ff, _) = drop_unreachable_counts(ff);
    if ff.vertices.len() > 8 || ff.edges.len() > 12 {
        return None;
    }
    let counts: Vec<u64> = ff
        .vertices
        .values()
        .chain(ff.edges.values())
        .filter_map(|c| *c)
        .collect();
    let total: u64 = counts.iter().fold(0, |a, &c| a.saturating_add(c));
    let bound = total.max(counts.iter().max().copied().unwrap_or(0).saturating_mul(2));

    let ids: Vec<u32> = ff.vertices.keys().copied().collect();
    let edges: Vec<(u32, u32)> = ff.edges.keys().copied().collect();
    let vidx: BTreeMap<u32, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let nv = ids.len();
    let ne = edges.len();

    let mut in_idx: Vec<Vec<usize>> = vec![Vec::new(); nv];
    let mut out_idx: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (i, &(u, v)) in edges.iter().enumerate() {
        out_idx[vidx[&u]].push(i);
        in_idx[vidx[&v]].push(i);
    }
    let exits: BTreeSet<u32> = ff.exits().into_iter().collect();

    struct Ctx<'a> {
        ff: &'a FlowFunction,
        params: &'a InferenceParams,
        ids: &'a [u32],
        edges: &'a [(u32, u32)],
        vidx: &'a BTreeMap<u32, usize>,
        in_idx: &'a [Vec<usize>],
        out_idx: &'a [Vec<usize>],
        exits: &'a BTreeSet<u32>,
        bound: u64,
        assign: Vec<u64>,
        best: Option<u128>,
    }

    impl Ctx<'_> {
        fn feasible_at(&self, vi: usize, upto: usize) -> bool {
            let v = self.ids[vi];
            let is_entry = v == self.ff.entry;
            let is_exit = self.exits.contains(&v);
            let sum = |idxs: &[usize]| -> (u64, u64) {
                let mut s = 0u64;
                let mut rem = 0u64;
                for &i in idxs {
                    if i <= upto {
                        s += self.assign[i];
                    } else {
                        rem += 1;
                    }
                }
                (s, rem)
            };
            let (in_s, in_rem) = sum(&self.in_idx[vi]);
            let (out_s, out_rem) = sum(&self.out_idx[vi]);
            match (is_entry, is_exit) {
                (true, _) => out_s <= self.bound,
                (false, true) => in_s <= self.bound,
                (false, false) => {
                    in_s <= self.bound
                        && out_s <= self.bound
                        && in_s <= out_s + self.bound * out_rem
                        && out_s <= in_s + self.bound * in_rem
                }
            }
        }

        fn objective(&self, entry_free: u64) -> u128 {
            let term = |f: u64, cnt: Option<u64>| -> u128 {
                match cnt {
                    None => 0,
                    Some(c) => {
                        if f >= c {
                            (f - c) as u128 * self.params.k_inc as u128
                        } else {
                            (c - f) as u128 * self.params.k_dec as u128
                        }
                    }
                }
            };
            let mut total = 0u128;
            for (vi, &v) in self.ids.iter().enumerate() {
                let f = if v == self.ff.entry && self.out_idx[vi].is_empty() {
                    entry_free
                } else if v == self.ff.entry {
                    self.out_idx[vi].iter().map(|&i| self.assign[i]).sum()
                } else {
                    self.in_idx[vi].iter().map(|&i| self.assign[i]).sum()
                };
                total += term(f, self.ff.vertices[&v]);
            }
            for (i, &e) in self.edges.iter().enumerate() {
                total += term(self.assign[i], self.ff.edges[&e]);
            }
            total
        }

        fn finish(&mut self) {
            // Interior vertices need exact balance; exits and the entry have
            // their value defined by one side only.
            for (vi, &v) in self.ids.iter().enumerate() {
                if v == self.ff.entry || self.exits.contains(&v) {
                    continue;
                }
                let in_s: u64 = self.in_idx[vi].iter().map(|&i| self.assign[i]).sum();
                let out_s: u64 = self.out_idx[vi].iter().map(|&i| self.assign[i]).sum();
                if in_s != out_s {
                    return;
                }
            }
            // A lone entry-exit vertex has no incident edges to pin it down.
            let entry_isolated = self.vidx.get(&self.ff.entry).is_some_and(|&vi| {
                self.exits.contains(&self.ff.entry) && self.out_idx[vi].is_empty()
            });
            if entry_isolated {
                for f in 0..=self.bound {
                    let obj = self.objective(f);
                    if self.best.is_none_or(|b| obj < b) {
                        self.best = Some(obj);
                    }
                }
            } else {
                let obj = self.objective(0);
                if self.best.is_none_or(|b| obj < b) {
                    self.best = Some(obj);
                }
            }
        }

        fn dfs(&mut self, i: usize) {
            if i == self.edges.len() {
                self.finish();
                return;
            }
            let (u, v) = self.edges[i];
            let (ui, vi) = (self.vidx[&u], self.vidx[&v]);
            for val in 0..=self.bound {
                self.assign[i] = val;
                if self.feasible_at(ui, i) && (ui == vi || self.feasible_at(vi, i)) {
                    self.dfs(i + 1);
                }
            }
            self.assign[i] = 0;
        }
    }

    let mut ctx = Ctx {
        ff: &ff,
        params,
        ids: &ids,
        edges: &edges,
        vidx: &vidx,
        in_idx: &in_idx,
        out_idx: &out_idx,
        exits: &exits,
        bound,
        assign: vec![0; ne],
        best: None,
    };
    ctx.dfs(0);
    ctx.best.map(|b| u64::try_from(b).expect("objective fits"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ff(
        entry: u32,
        vertices: &[(u32, Option<u64>)],
        edges: &[((u32, u32), Option<u64>)],
    ) -> FlowFunction {
        FlowFunction {
            entry,
            vertices: vertices.iter().copied().collect(),
            edges: edges.iter().copied().collect(),
        }
    }

    #[test]
    fn subdivide_counted_edges_inserts_vertices() {
        let f = ff(
            0,
            &[(0, Some(300)), (1, Some(300)), (2, Some(150))],
            &[((0, 1), Some(300)), ((1, 2), Some(150))],
        );
        let sub = subdivide_counted_edges(&f);
        assert_eq!(sub.flow.vertices.len(), 5);
        assert_eq!(sub.edge_vertex.len(), 2);
        let mut new_counts: Vec<u64> = sub
            .edge_vertex
            .keys()
            .map(|w| sub.flow.vertices[w].unwrap())
            .collect();
        new_counts.sort_unstable();
        assert_eq!(new_counts, vec![150, 300]);
        assert!(sub.flow.edges.values().all(|c| c.is_none()));
        assert_eq!(sub.flow.edges.len(), 4);
    }

    #[test]
    fn subdivide_leaves_uncounted_graph_alone() {
        let f = ff(0, &[(0, Some(5)), (1, None)], &[((0, 1), None)]);
        let sub = subdivide_counted_edges(&f);
        assert_eq!(sub.flow, f);
        assert!(sub.edge_vertex.is_empty());
    }

    #[test]
    fn subdivide_counted_self_loop() {
        let f = ff(0, &[(0, None)], &[((0, 0), Some(5))]);
        let sub = subdivide_counted_edges(&f);
        assert_eq!(sub.flow.vertices.len(), 2);
        let (&w, &(u, v)) = sub.edge_vertex.iter().next().unwrap();
        assert_eq!((u, v), (0, 0));
        assert_eq!(sub.flow.vertices[&w], Some(5));
        assert!(sub.flow.edges.contains_key(&(0, w)));
        assert!(sub.flow.edges.contains_key(&(w, 0)));
    }

    #[test]
    fn network_arcs_encode_costs() {
        let f = ff(0, &[(0, Some(100)), (1, None)], &[((0, 1), None)]);
        let (net, warnings) = build_network(&f, &InferenceParams::default());
        assert!(warnings.is_empty());
        assert_eq!(net.base_arc(0), Some((100, -2)));
        assert_eq!(net.main_arc_cost(0), Some(1));
        assert_eq!(net.base_arc(1), None);
        assert_eq!(net.main_arc_cost(1), Some(0));
        assert_eq!(net.penalty_exit_count(), 0);
    }

    #[test]
    fn network_adds_penalty_exits_for_loops() {
        // 0 → 1 → 0: no exit blocks at all.
        let f = ff(
            0,
            &[(0, None), (1, None)],
            &[((0, 1), None), ((1, 0), None)],
        );
        let (net, _) = build_network(&f, &InferenceParams::default());
        assert_eq!(net.penalty_exit_count(), 2);
    }

    #[test]
    fn unreachable_counted_vertex_is_dropped_with_warning() {
        let f = ff(
            0,
            &[(0, Some(1)), (1, None), (2, Some(9))],
            &[((0, 1), None)],
        );
        let (_, warnings) = build_network(&f, &InferenceParams::default());
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("unreachable"), "{warnings:?}");
        let res = infer(&f, &InferenceParams::default());
        assert_eq!(res.vertex_flow[&2], 0);
        assert_eq!(res.objective, 0); // the dropped count no longer costs anything
        assert_eq!(res.warnings.len(), 1);
    }

    #[test]
    fn single_counted_vertex_flows_at_negative_cost() {
        // S → v → T with cnt(v)=100: the solver should push exactly 100
        // through the base arc for a total cost of −200.
        let f = ff(0, &[(0, Some(100))], &[]);
        let sub = subdivide_counted_edges(&f);
        let (mut net, _) = build_network(&sub.flow, &InferenceParams::default());
        solve_min_cost_flow(&mut net);
        assert_eq!(net.vertex_flow(0), 100);
        assert_eq!(net.total_cost(), -200);
    }

    #[test]
    fn all_empty_counts_yield_zero_flow() {
        let f = ff(
            0,
            &[(0, None), (1, None), (2, None)],
            &[((0, 1), None), ((1, 2), None)],
        );
        let res = infer(&f, &InferenceParams::default());
        assert!(res.vertex_flow.values().all(|&v| v == 0));
        assert!(res.edge_flow.values().all(|&v| v == 0));
        assert_eq!(res.objective, 0);
    }

    #[test]
    fn chained_conflict_resolves_by_cost_ratio() {
        // Two chained counted vertices 100 and 90. Raising 90 to 100 costs
        // 10·k_inc; lowering 100 to 90 costs 10·k_dec. Defaults prefer the
        // raise; flipped coefficients prefer the cut.
        let chain = ff(0, &[(0, Some(100)), (1, Some(90))], &[((0, 1), None)]);
        let res = infer(&chain, &InferenceParams::default());
        assert_eq!(res.vertex_flow[&0], 100);
        assert_eq!(res.vertex_flow[&1], 100);
        assert_eq!(res.objective, 10);

        let flipped = InferenceParams {
            k_inc: 3,
            k_dec: 1,
            ..InferenceParams::default()
        };
        let res = infer(&chain, &flipped);
        assert_eq!(res.vertex_flow[&0], 90);
        assert_eq!(res.vertex_flow[&1], 90);
        assert_eq!(res.objective, 10);
    }

    #[test]
    fn conservation_fills_obvious_gaps() {
        // A(100) → B(∅) → C(100): conservation forces B to 100.
        let f = ff(
            0,
            &[(0, Some(100)), (1, None), (2, Some(100))],
            &[((0, 1), None), ((1, 2), None)],
        );
        let res = infer(&f, &InferenceParams::default());
        assert_eq!(res.vertex_flow[&1], 100);
        assert_eq!(res.edge_flow[&(0, 1)], 100);
        assert_eq!(res.edge_flow[&(1, 2)], 100);
        assert_eq!(res.objective, 0);
    }

    #[test]
    fn counted_vertex_before_exit_is_free() {
        let f = ff(0, &[(0, Some(100)), (1, None)], &[((0, 1), None)]);
        let res = infer(&f, &InferenceParams::default());
        assert_eq!(res.vertex_flow[&0], 100);
        assert_eq!(res.vertex_flow[&1], 100);
        assert_eq!(res.objective, 0);
    }

    #[test]
    fn counted_edges_constrain_through_subdivision() {
        // Diamond with both branch edges counted: 0→1 carries 300, 0→2
        // carries 150; everything else unknown.
        let f = ff(
            0,
            &[(0, None), (1, None), (2, None), (3, None)],
            &[
                ((0, 1), Some(300)),
                ((0, 2), Some(150)),
                ((1, 3), None),
                ((2, 3), None),
            ],
        );
        let res = infer(&f, &InferenceParams::default());
        assert_eq!(res.edge_flow[&(0, 1)], 300);
        assert_eq!(res.edge_flow[&(0, 2)], 150);
        assert_eq!(res.vertex_flow[&0], 450);
        assert_eq!(res.vertex_flow[&3], 450);
        assert_eq!(res.objective, 0);
    }

    #[test]
    fn loop_without_exit_self_circulates() {
        // cnt on a loop block in an exitless function: flow circulates in
        // the cycle and conservation still holds everywhere.
        let f = ff(
            0,
            &[(0, None), (1, Some(100))],
            &[((0, 1), None), ((1, 0), None)],
        );
        let res = infer(&f, &InferenceParams::default());
        assert_eq!(res.vertex_flow[&1], 100);
        assert_eq!(res.vertex_flow[&0], 100);
        assert_eq!(res.objective, 0);
        assert!(conservation_violations(&f, &res).is_empty());
    }

    #[test]
    fn rebalance_splits_diamond_evenly() {
        let f = ff(
            0,
            &[(0, Some(100)), (1, None), (2, None), (3, Some(100))],
            &[
                ((0, 1), None),
                ((0, 2), None),
                ((1, 3), None),
                ((2, 3), None),
            ],
        );
        let res = infer(&f, &InferenceParams::default());
        assert_eq!(res.vertex_flow[&1], 50);
        assert_eq!(res.vertex_flow[&2], 50);
        assert_eq!(res.edge_flow[&(0, 1)], 50);
        assert_eq!(res.edge_flow[&(2, 3)], 50);
        assert_eq!(res.objective, 0);
    }

    #[test]
    fn rebalance_gives_odd_unit_to_lower_bid() {
        let f = ff(
            0,
            &[(0, Some(101)), (1, None), (2, None), (3, Some(101))],
            &[
                ((0, 1), None),
                ((0, 2), None),
                ((1, 3), None),
                ((2, 3), None),
            ],
        );
        let res = infer(&f, &InferenceParams::default());
        assert_eq!(res.vertex_flow[&1], 51);
        assert_eq!(res.vertex_flow[&2], 50);
    }

    #[test]
    fn rebalance_skips_cyclic_interiors() {
        // src → B ⇄ C → snk with an interior cycle: left untouched.
        let f = ff(
            0,
            &[(0, Some(10)), (1, None), (2, None), (3, Some(10))],
            &[
                ((0, 1), None),
                ((1, 2), None),
                ((2, 1), None),
                ((2, 3), None),
            ],
        );
        let before = infer_opts(&f, &InferenceParams::default(), false);
        let after = infer(&f, &InferenceParams::default());
        assert_eq!(before.vertex_flow, after.vertex_flow);
        assert_eq!(before.edge_flow, after.edge_flow);
    }

    #[test]
    fn rebalance_requires_single_known_sink() {
        // src → {B, C}, B → snk1, C → snk2: two known sinks, no rebalance.
        let f = ff(
            0,
            &[
                (0, Some(10)),
                (1, None),
                (2, None),
                (3, Some(7)),
                (4, Some(3)),
            ],
            &[
                ((0, 1), None),
                ((0, 2), None),
                ((1, 3), None),
                ((2, 4), None),
            ],
        );
        let before = infer_opts(&f, &InferenceParams::default(), false);
        let after = infer(&f, &InferenceParams::default());
        assert_eq!(before.edge_flow, after.edge_flow);
    }

    #[test]
    fn rebalance_three_way_split() {
        let f = ff(
            0,
            &[
                (0, Some(10)),
                (1, None),
                (2, None),
                (3, None),
                (4, Some(10)),
            ],
            &[
                ((0, 1), None),
                ((0, 2), None),
                ((0, 3), None),
                ((1, 4), None),
                ((2, 4), None),
                ((3, 4), None),
            ],
        );
        let res = infer(&f, &InferenceParams::default());
        // 10 into three branches: 4/3/3 with the extra unit on bid 1.
        assert_eq!(res.vertex_flow[&1], 4);
        assert_eq!(res.vertex_flow[&2], 3);
        assert_eq!(res.vertex_flow[&3], 3);
        assert!(conservation_violations(&f, &res).is_empty());
    }

    #[test]
    fn perfect_input_passes_through_unchanged() {
        let f = ff(
            0,
            &[(0, Some(10)), (1, Some(4)), (2, Some(6)), (3, Some(10))],
            &[
                ((0, 1), Some(4)),
                ((0, 2), Some(6)),
                ((1, 3), Some(4)),
                ((2, 3), Some(6)),
            ],
        );
        let res = infer(&f, &InferenceParams::default());
        assert_eq!(res.objective, 0);
        for (&v, &cnt) in &f.vertices {
            assert_eq!(res.vertex_flow[&v], cnt.unwrap());
        }
        for (&e, &cnt) in &f.edges {
            assert_eq!(res.edge_flow[&e], cnt.unwrap());
        }
    }

    #[test]
    fn inference_is_idempotent() {
        let f = ff(
            0,
            &[(0, Some(9)), (1, None), (2, None), (3, Some(7))],
            &[
                ((0, 1), None),
                ((0, 2), Some(3)),
                ((1, 3), None),
                ((2, 3), None),
            ],
        );
        let first = infer(&f, &InferenceParams::default());
        let again = FlowFunction {
            entry: f.entry,
            vertices: first
                .vertex_flow
                .iter()
                .map(|(&v, &fv)| (v, Some(fv)))
                .collect(),
            edges: first
                .edge_flow
                .iter()
                .map(|(&e, &fe)| (e, Some(fe)))
                .collect(),
        };
        let second = infer(&again, &InferenceParams::default());
        assert_eq!(second.objective, 0);
        assert_eq!(second.vertex_flow, first.vertex_flow);
        assert_eq!(second.edge_flow, first.edge_flow);
    }

    #[test]
    fn reference_minimum_agrees_on_fixed_instances() {
        let params = InferenceParams::default();
        let cases = [
            // Chain conflict.
            ff(0, &[(0, Some(4)), (1, Some(3))], &[((0, 1), None)]),
            // Diamond with count only at the top.
            ff(
                0,
                &[(0, Some(4)), (1, None), (2, None), (3, None)],
                &[
                    ((0, 1), None),
                    ((0, 2), None),
                    ((1, 3), None),
                    ((2, 3), None),
                ],
            ),
            // Counted edge in a cycle.
            ff(
                0,
                &[(0, None), (1, Some(2))],
                &[((0, 1), Some(3)), ((1, 0), None), ((1, 1), None)],
            ),
            // Conflicting vertex and edge counts.
            ff(0, &[(0, Some(2)), (1, Some(4))], &[((0, 1), Some(1))]),
            // Unreachable counted vertex.
            ff(
                0,
                &[(0, Some(2)), (1, None), (2, Some(4))],
                &[((0, 1), None)],
            ),
            // Fan-in of counted edges: the optimum raises vertex 4 to 12,
            // past twice the largest single count, so the enumeration bound
            // must cover count sums, not just 2·max.
            ff(
                0,
                &[
                    (0, None),
                    (1, None),
                    (2, None),
                    (3, None),
                    (4, Some(4)),
                    (5, None),
                ],
                &[
                    ((0, 1), None),
                    ((0, 2), None),
                    ((0, 3), None),
                    ((1, 4), Some(4)),
                    ((2, 4), Some(4)),
                    ((3, 4), Some(4)),
                    ((4, 5), None),
                ],
            ),
        ];
        for (i, f) in cases.iter().enumerate() {
            let res = infer(f, &params);
            let oracle = reference_minimum(f, &params).expect("instance within limits");
            assert_eq!(res.objective, oracle, "case {i}: {f:?}");
        }
    }

    #[test]
    fn reference_minimum_rejects_large_instances() {
        let big = ff(0, &(0..9).map(|i| (i, None)).collect::<Vec<_>>(), &[]);
        assert!(reference_minimum(&big, &InferenceParams::default()).is_none());
    }

    #[test]
    fn flipped_parameters_change_reference_minimum_too() {
        let chain = ff(0, &[(0, Some(4)), (1, Some(3))], &[((0, 1), None)]);
        let defaults = InferenceParams::default();
        let flipped = InferenceParams {
            k_inc: 3,
            k_dec: 1,
            ..defaults
        };
        assert_eq!(reference_minimum(&chain, &defaults), Some(1)); // raise 3→4
        assert_eq!(reference_minimum(&chain, &flipped), Some(1)); // cut 4→3
        assert_eq!(infer(&chain, &defaults).vertex_flow[&1], 4);
        assert_eq!(infer(&chain, &flipped).vertex_flow[&0], 3);
    }
}
