use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, NodeId};
use super::topology::MAX_RESAMPLES;
use super::NetError;

pub const DEFAULT_PENALTY: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    Main,
    Parasitic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServicePair {
    pub alice: NodeId,
    pub bob: NodeId,
    pub kind: PairKind,
    /// Node sequences from `alice` to `bob`.
    pub routes: Vec<Vec<NodeId>>,
}

/// Graph plus service pairs with their fixed routes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub graph: Graph,
    pub pairs: Vec<ServicePair>,
}

impl NetworkSpec {
    /// Routes every pair with [`compute_routes`].
    pub fn routed(graph: Graph, pairs: &[(NodeId, NodeId, PairKind)], m: usize, penalty: f64) -> Result<Self, NetError> {
        let mut out = Vec::with_capacity(pairs.len());
        for &(alice, bob, kind) in pairs {
            let routes = compute_routes(&graph, (alice, bob), m, penalty)?;
            out.push(ServicePair {
                alice,
                bob,
                kind,
                routes,
            });
        }
        let spec = Self { graph, pairs: out };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if !self.graph.is_connected() {
            return Err(NetError::Disconnected);
        }
        for p in &self.pairs {
            if p.alice == p.bob {
                return Err(NetError::InvalidRoute(format!("pair endpoints coincide at {}", self.graph.name(p.alice))));
            }
            for r in &p.routes {
                validate_route(&self.graph, r)?;
                if r.first() != Some(&p.alice) || r.last() != Some(&p.bob) {
                    return Err(NetError::InvalidRoute(format!(
                        "route {} does not join {} and {}",
                        route_name(&self.graph, r),
                        self.graph.name(p.alice),
                        self.graph.name(p.bob)
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn all_routes(&self) -> Vec<Vec<NodeId>> {
        self.pairs.iter().flat_map(|p| p.routes.iter().cloned()).collect()
    }
}

pub fn validate_route(g: &Graph, route: &[NodeId]) -> Result<(), NetError> {
    if route.len() < 2 {
        return Err(NetError::InvalidRoute("route needs at least two nodes".into()));
    }
    let distinct: BTreeSet<_> = route.iter().collect();
    if distinct.len() != route.len() {
        return Err(NetError::InvalidRoute(format!("route {} revisits a node", route_name(g, route))));
    }
    if let Some(w) = route.windows(2).find(|w| !g.has_edge(w[0], w[1])) {
        return Err(NetError::InvalidRoute(format!(
            "route {} uses missing edge {}",
            route_name(g, route),
            g.pair_name(w[0], w[1])
        )));
    }
    Ok(())
}

pub fn route_name(g: &Graph, route: &[NodeId]) -> String {
    let sep = if g.single_char_names() { "" } else { "-" };
    route.iter().map(|&v| g.name(v)).collect::<Vec<_>>().join(sep)
}

/// Parses a route written as node names (`ABCD`, or `n1-n2-n3` for longer names).
pub fn parse_route(g: &Graph, text: &str) -> Result<Vec<NodeId>, NetError> {
    let tokens: Vec<String> = if text.contains('-') || !g.single_char_names() {
        text.split('-').map(|s| s.trim().to_string()).collect()
    } else {
        text.chars().map(String::from).collect()
    };
    let route = tokens
        .iter()
        .map(|t| g.index_of(t).ok_or_else(|| NetError::UnknownNode(t.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    validate_route(g, &route)?;
    Ok(route)
}

#[derive(PartialEq)]
struct HeapItem(f64, NodeId);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn edge_key(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    (u.min(v), u.max(v))
}

/// Lexicographically smallest minimum-weight path from `s` to `t`.
///
/// Distances to `t` come from Dijkstra; the path is then walked from `s`,
/// always stepping to the smallest-id neighbor that stays on a shortest path.
fn shortest_path(g: &Graph, weight: &HashMap<(NodeId, NodeId), f64>, s: NodeId, t: NodeId) -> Option<Vec<NodeId>> {
    let w = |u: NodeId, v: NodeId| weight.get(&edge_key(u, v)).copied().unwrap_or(1.0);
    let mut dist = vec![f64::INFINITY; g.node_count()];
    dist[t] = 0.0;
    let mut heap = BinaryHeap::from([HeapItem(0.0, t)]);
    while let Some(HeapItem(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for v in g.neighbors(u) {
            let nd = d + w(u, v);
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(HeapItem(nd, v));
            }
        }
    }
    if !dist[s].is_finite() {
        return None;
    }
    let mut path = vec![s];
    let mut u = s;
    while u != t {
        let tol = 1e-9 * dist[u].max(1.0);
        u = g.neighbors(u).find(|&v| (w(u, v) + dist[v] - dist[u]).abs() <= tol)?;
        path.push(u);
    }
    Some(path)
}

/// Up to `m` distinct routes: each iteration takes the current shortest path
/// and multiplies the weight of every edge it uses by `penalty`.
pub fn compute_routes(g: &Graph, pair: (NodeId, NodeId), m: usize, penalty: f64) -> Result<Vec<Vec<NodeId>>, NetError> {
    let (s, t) = pair;
    if m == 0 {
        return Err(NetError::InvalidParams("route count must be at least 1".into()));
    }
    let mut weight = HashMap::new();
    let mut routes: Vec<Vec<NodeId>> = Vec::new();
    for _ in 0..m {
        let path = shortest_path(g, &weight, s, t).ok_or(NetError::Unreachable {
            from: g.name(s).to_string(),
            to: g.name(t).to_string(),
        })?;
        for e in path.windows(2) {
            *weight.entry(edge_key(e[0], e[1])).or_insert(1.0) *= penalty;
        }
        if !routes.contains(&path) {
            routes.push(path);
        }
    }
    Ok(routes)
}

/// Endpoints of a longest shortest path, smallest `(u, v)` among ties.
pub fn diameter_endpoints(g: &Graph) -> Option<(NodeId, NodeId, usize)> {
    let mut best: Option<(NodeId, NodeId, usize)> = None;
    for u in 0..g.node_count() {
        for (v, d) in g.bfs(u).into_iter().enumerate().skip(u + 1) {
            if let Some(d) = d {
                if best.is_none_or(|(_, _, bd)| d > bd) {
                    best = Some((u, v, d));
                }
            }
        }
    }
    best
}

/// Pair 1 spans the diameter; pair 2 spans the diameter of the graph left
/// after removing each edge of pair 1's path independently with probability
/// `edge_removal_prob`, resampled until that graph stays connected.
pub fn select_main_pairs(g: &Graph, edge_removal_prob: f64, seed: u64) -> Result<[(NodeId, NodeId); 2], NetError> {
    if !(0.0..=1.0).contains(&edge_removal_prob) {
        return Err(NetError::InvalidParams(format!(
            "edge removal probability must lie in [0, 1], got {edge_removal_prob}"
        )));
    }
    let (a, b, _) = diameter_endpoints(g).ok_or(NetError::Disconnected)?;
    let lambda = shortest_path(g, &HashMap::new(), a, b).ok_or(NetError::Disconnected)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_RESAMPLES {
        let mut residual = g.clone();
        for e in lambda.windows(2) {
            if rng.random_bool(edge_removal_prob) {
                residual.remove_edge(e[0], e[1]);
            }
        }
        if residual.is_connected() {
            let (c, d, _) = diameter_endpoints(&residual).ok_or(NetError::Disconnected)?;
            return Ok([(a, b), (c, d)]);
        }
    }
    Err(NetError::SelectionFailed { attempts: MAX_RESAMPLES })
}

/// Draws `2 n_pairs` distinct nodes outside `forbidden` and pairs them in draw order.
pub fn place_parasitic_pairs(
    g: &Graph,
    n_pairs: usize,
    forbidden: &BTreeSet<NodeId>,
    seed: u64,
) -> Result<Vec<(NodeId, NodeId)>, NetError> {
    let mut pool: Vec<NodeId> = (0..g.node_count()).filter(|v| !forbidden.contains(v)).collect();
    if pool.len() < 2 * n_pairs {
        return Err(NetError::NotEnoughNodes {
            needed: 2 * n_pairs,
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (drawn, _) = pool.partial_shuffle(&mut rng, 2 * n_pairs);
    Ok(drawn.chunks(2).map(|c| (c[0], c[1])).collect())
}
