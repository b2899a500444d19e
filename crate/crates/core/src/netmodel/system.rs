use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::graph::{Graph, NodeId};
use super::NetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Queue {
    /// Smaller endpoint id.
    pub u: NodeId,
    pub v: NodeId,
    /// Spans a fiber edge and can therefore generate ebits.
    pub physical: bool,
}

impl Queue {
    pub fn touches(&self, node: NodeId) -> bool {
        self.u == node || self.v == node
    }
}

/// Swap `i[j]k` at middle node `j`, with `i < k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Transition {
    pub i: NodeId,
    pub j: NodeId,
    pub k: NodeId,
    /// Queue indices of `(i, j)` and `(j, k)`.
    pub parents: [usize; 2],
    /// Queue index of `(i, k)`.
    pub child: usize,
}

/// One column of the decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Swap(usize),
    Consume(usize),
}

/// Queues, transitions and ranks derived from a set of routes.
///
/// Decision vectors list transitions first, then one consumption entry per
/// queue, matching the columns of `M̃ = [M | -I]` and `Ñ = [0 | -I]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionSystem {
    node_names: Vec<String>,
    single_char: bool,
    queues: Vec<Queue>,
    transitions: Vec<Transition>,
    queue_index: HashMap<(NodeId, NodeId), usize>,
    ranks: Vec<u32>,
    feeders: Vec<Vec<usize>>,
}

/// Builds the extended edge set and transitions from `routes`. A queue is
/// physical iff its endpoints share an edge of `graph`.
pub fn build_transition_system(graph: &Graph, routes: &[Vec<NodeId>]) -> Result<TransitionSystem, NetError> {
    let mut pairs = BTreeSet::new();
    let mut triples = BTreeSet::new();
    for route in routes {
        super::routes::validate_route(graph, route)?;
        for a in 0..route.len() {
            for b in a + 1..route.len() {
                let (x, y) = (route[a], route[b]);
                pairs.insert((x.min(y), x.max(y)));
                for &mid in &route[a + 1..b] {
                    triples.insert((x.min(y), mid, x.max(y)));
                }
            }
        }
    }
    let queues: Vec<Queue> = pairs
        .iter()
        .map(|&(u, v)| Queue {
            u,
            v,
            physical: graph.has_edge(u, v),
        })
        .collect();
    let queue_index: HashMap<(NodeId, NodeId), usize> = pairs.iter().enumerate().map(|(e, &p)| (p, e)).collect();
    let key = |a: NodeId, b: NodeId| queue_index[&(a.min(b), a.max(b))];
    let transitions: Vec<Transition> = triples
        .iter()
        .map(|&(i, j, k)| Transition {
            i,
            j,
            k,
            parents: [key(i, j), key(j, k)],
            child: key(i, k),
        })
        .collect();
    let mut feeders = vec![Vec::new(); queues.len()];
    for (t, tr) in transitions.iter().enumerate() {
        feeders[tr.child].push(t);
    }
    let ranks = assign_ranks(&queues, &transitions)?;
    Ok(TransitionSystem {
        node_names: graph.names().to_vec(),
        single_char: graph.single_char_names(),
        queues,
        transitions,
        queue_index,
        ranks,
        feeders,
    })
}

/// Ranks over decision columns (transitions, then consumptions).
///
/// Physical consumption is pinned to 0; a transition ranks one above its
/// parents' consumption ranks; a virtual queue's consumption ranks one above
/// its feeding transitions. Solved by relaxation from all-zero.
pub fn assign_ranks(queues: &[Queue], transitions: &[Transition]) -> Result<Vec<u32>, NetError> {
    let nt = transitions.len();
    let mut trans = vec![0u32; nt];
    let mut cons = vec![0u32; queues.len()];
    let mut feeders: Vec<Vec<usize>> = vec![Vec::new(); queues.len()];
    for (t, tr) in transitions.iter().enumerate() {
        feeders[tr.child].push(t);
    }
    for _ in 0..nt + 2 {
        let mut changed = false;
        for (t, tr) in transitions.iter().enumerate() {
            let r = 1 + tr.parents.iter().map(|&p| cons[p]).max().unwrap();
            if r != trans[t] {
                trans[t] = r;
                changed = true;
            }
        }
        for (e, q) in queues.iter().enumerate() {
            if q.physical {
                continue;
            }
            let r = feeders[e].iter().map(|&t| trans[t] + 1).max().unwrap_or(0);
            if r != cons[e] {
                cons[e] = r;
                changed = true;
            }
        }
        if !changed {
            trans.extend(cons);
            return Ok(trans);
        }
    }
    Err(NetError::RankCycle)
}

impl TransitionSystem {
    pub fn n_queues(&self) -> usize {
        self.queues.len()
    }

    pub fn n_transitions(&self) -> usize {
        self.transitions.len()
    }

    /// Length of a decision vector.
    pub fn dim(&self) -> usize {
        self.transitions.len() + self.queues.len()
    }

    pub fn queues(&self) -> &[Queue] {
        &self.queues
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    pub fn queue_of(&self, a: NodeId, b: NodeId) -> Option<usize> {
        self.queue_index.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn queue_by_name(&self, name: &str) -> Option<usize> {
        (0..self.n_queues()).find(|&e| self.queue_name(e) == name)
    }

    pub fn transition_by_name(&self, name: &str) -> Option<usize> {
        (0..self.n_transitions()).find(|&t| self.transition_name(t) == name)
    }

    pub fn column(&self, op: Op) -> usize {
        match op {
            Op::Swap(t) => t,
            Op::Consume(e) => self.transitions.len() + e,
        }
    }

    pub fn op(&self, col: usize) -> Op {
        if col < self.transitions.len() {
            Op::Swap(col)
        } else {
            Op::Consume(col - self.transitions.len())
        }
    }

    pub fn consume_col(&self, e: usize) -> usize {
        self.transitions.len() + e
    }

    pub fn rank(&self, col: usize) -> u32 {
        self.ranks[col]
    }

    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    /// Columns grouped by rank, ascending; columns within a group ascend too.
    pub fn columns_by_rank(&self) -> Vec<(u32, Vec<usize>)> {
        let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (col, &r) in self.ranks.iter().enumerate() {
            groups.entry(r).or_default().push(col);
        }
        groups.into_iter().collect()
    }

    /// Transitions whose child is queue `e`.
    pub fn feeders(&self, e: usize) -> &[usize] {
        &self.feeders[e]
    }

    pub fn queues_at(&self, node: NodeId) -> Vec<usize> {
        (0..self.n_queues()).filter(|&e| self.queues[e].touches(node)).collect()
    }

    pub fn queue_name(&self, e: usize) -> String {
        let q = self.queues[e];
        let (a, b) = (&self.node_names[q.u], &self.node_names[q.v]);
        if self.single_char {
            format!("{a}{b}")
        } else {
            format!("{a}-{b}")
        }
    }

    pub fn transition_name(&self, t: usize) -> String {
        let tr = self.transitions[t];
        format!("{}[{}]{}", self.node_names[tr.i], self.node_names[tr.j], self.node_names[tr.k])
    }

    /// Header names of the decision columns; consumption columns carry the queue name.
    pub fn column_names(&self) -> Vec<String> {
        (0..self.n_transitions())
            .map(|t| self.transition_name(t))
            .chain((0..self.n_queues()).map(|e| self.queue_name(e)))
            .collect()
    }

    /// Dense `M̃`, one row per queue.
    pub fn m_tilde(&self) -> Vec<Vec<i32>> {
        let mut m = vec![vec![0; self.dim()]; self.n_queues()];
        for (t, tr) in self.transitions.iter().enumerate() {
            m[tr.parents[0]][t] = -1;
            m[tr.parents[1]][t] = -1;
            m[tr.child][t] = 1;
        }
        for (e, row) in m.iter_mut().enumerate() {
            row[self.transitions.len() + e] = -1;
        }
        m
    }

    /// Dense `Ñ = [0 | -I]`.
    pub fn n_tilde(&self) -> Vec<Vec<i32>> {
        let mut n = vec![vec![0; self.dim()]; self.n_queues()];
        for (e, row) in n.iter_mut().enumerate() {
            row[self.transitions.len() + e] = -1;
        }
        n
    }

    /// Net ebit change per queue caused by decision `r`, i.e. `M̃ r`.
    pub fn apply_m_tilde(&self, r: &[u64]) -> Vec<i64> {
        let mut out = vec![0i64; self.n_queues()];
        for (t, tr) in self.transitions.iter().enumerate() {
            let x = r[t] as i64;
            out[tr.parents[0]] -= x;
            out[tr.parents[1]] -= x;
            out[tr.child] += x;
        }
        for e in 0..self.n_queues() {
            out[e] -= r[self.transitions.len() + e] as i64;
        }
        out
    }

    fn matrix_csv(&self, m: &[Vec<i32>]) -> String {
        let mut out = String::from("queue");
        for name in self.column_names() {
            out.push(',');
            out.push_str(&name);
        }
        out.push('\n');
        for (e, row) in m.iter().enumerate() {
            out.push_str(&self.queue_name(e));
            for &x in row {
                out.push(',');
                out.push_str(match x {
                    1 => "+1",
                    -1 => "-1",
                    _ => "0",
                });
            }
            out.push('\n');
        }
        out
    }

    pub fn m_tilde_csv(&self) -> String {
        self.matrix_csv(&self.m_tilde())
    }

    pub fn n_tilde_csv(&self) -> String {
        self.matrix_csv(&self.n_tilde())
    }

    /// Order-independent fingerprint for cache keys.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.queues.hash(&mut h);
        self.transitions.hash(&mut h);
        h.finish()
    }
}

/// Parses a matrix emitted by [`TransitionSystem::m_tilde_csv`] into
/// `(row names, column names, cells)`.
pub fn parse_matrix_csv(text: &str) -> Result<(Vec<String>, Vec<String>, Vec<Vec<i32>>), String> {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().ok_or("empty matrix")?.split(',').map(String::from).collect();
    if header.first().map(String::as_str) != Some("queue") {
        return Err("header must start with `queue`".into());
    }
    let cols = header[1..].to_vec();
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let toks: Vec<&str> = line.split(',').collect();
        if toks.len() != cols.len() + 1 {
            return Err(format!("row {} has {} cells", toks[0], toks.len() - 1));
        }
        rows.push(toks[0].to_string());
        cells.push(
            toks[1..]
                .iter()
                .map(|t| t.parse::<i32>().map_err(|e| format!("{t:?}: {e}")))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    Ok((rows, cols, cells))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::routes::parse_route;
    use crate::netmodel::topology::chain;

    fn system(n: usize, routes: &[&str]) -> TransitionSystem {
        let g = chain(n);
        let routes: Vec<_> = routes.iter().map(|r| parse_route(&g, r).unwrap()).collect();
        build_transition_system(&g, &routes).unwrap()
    }

    fn rank_of(s: &TransitionSystem, name: &str) -> u32 {
        if let Some(t) = s.transition_by_name(name) {
            s.rank(t)
        } else {
            s.rank(s.consume_col(s.queue_by_name(name).unwrap()))
        }
    }

    #[test]
    fn abcd_shape() {
        let s = system(4, &["ABCD"]);
        assert_eq!(s.n_queues(), 6);
        assert_eq!(s.n_transitions(), 4);
        let names: Vec<_> = (0..4).map(|t| s.transition_name(t)).collect();
        assert_eq!(names, ["A[B]C", "A[B]D", "A[C]D", "B[C]D"]);
        let m = s.m_tilde();
        let col = s.transition_by_name("A[B]C").unwrap();
        for (e, row) in m.iter().enumerate() {
            let expect = match s.queue_name(e).as_str() {
                "AB" | "BC" => -1,
                "AC" => 1,
                _ => 0,
            };
            assert_eq!(row[col], expect);
        }
    }

    #[test]
    fn single_edge() {
        let s = system(2, &["AB"]);
        assert_eq!(s.m_tilde(), vec![vec![-1]]);
        assert_eq!(s.ranks(), &[0]);
    }

    #[test]
    fn abcde_ranks() {
        let s = system(5, &["ABCDE"]);
        assert_eq!(rank_of(&s, "B[C]D"), 1);
        assert_eq!(rank_of(&s, "CE"), 2);
        assert_eq!(rank_of(&s, "A[C]D"), 3);
        assert_eq!(rank_of(&s, "AD"), 4);
        assert_eq!(rank_of(&s, "A[D]E"), 5);
        assert_eq!(rank_of(&s, "AE"), 6);
        for e in 0..s.n_queues() {
            if s.queues()[e].physical {
                assert_eq!(rank_of(&s, &s.queue_name(e)), 0);
            }
        }
    }

    #[test]
    fn triangle_pins_physical_queue() {
        let mut g = Graph::with_default_names(3);
        g.add_edge(0, 1);
        g.add_edge(1, 2);
        g.add_edge(0, 2);
        // Route A-C-B feeds physical queue AB through A[C]B.
        let s = build_transition_system(&g, &[vec![0, 2, 1]]).unwrap();
        let ab = s.queue_by_name("AB").unwrap();
        assert!(s.queues()[ab].physical);
        assert_eq!(s.feeders(ab).len(), 1);
        assert_eq!(s.rank(s.consume_col(ab)), 0);
        assert_eq!(s.rank(0), 1);
    }

    #[test]
    fn csv_roundtrip() {
        let s = system(4, &["ABCD"]);
        let (rows, cols, cells) = parse_matrix_csv(&s.m_tilde_csv()).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(cols, s.column_names());
        assert_eq!(cells, s.m_tilde());
        assert!(s.m_tilde_csv().contains("+1"));
    }
}
