use std::collections::{BTreeSet, VecDeque};

use super::NetError;

pub type NodeId = usize;

/// Undirected simple graph with named nodes. Node ids are dense indices and
/// double as the ordering key everywhere (queues, transitions, tie-breaks).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    names: Vec<String>,
    adj: Vec<BTreeSet<NodeId>>,
}

impl Graph {
    pub fn new(names: Vec<String>) -> Self {
        let n = names.len();
        Self {
            names,
            adj: vec![BTreeSet::new(); n],
        }
    }

    /// Nodes named `A`, `B`, ... when there are at most 26, `0`, `1`, ... otherwise.
    pub fn with_default_names(n: usize) -> Self {
        Self::new(default_names(n))
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn name(&self, v: NodeId) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<NodeId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn add_edge(&mut self, u: NodeId, v: NodeId) {
        assert!(u != v, "self-loops are not allowed");
        self.adj[u].insert(v);
        self.adj[v].insert(u);
    }

    pub fn remove_edge(&mut self, u: NodeId, v: NodeId) {
        self.adj[u].remove(&v);
        self.adj[v].remove(&u);
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adj[u].contains(&v)
    }

    /// Neighbors in ascending id order.
    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adj[v].iter().copied()
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v].len()
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (u, nbrs) in self.adj.iter().enumerate() {
            out.extend(nbrs.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }

    /// Hop distances from `src`; `None` for unreachable nodes.
    pub fn bfs(&self, src: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count()];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for v in self.neighbors(u) {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.node_count() == 0 || self.bfs(0).iter().all(Option::is_some)
    }

    /// Removes nodes, renumbering survivors in their original order.
    pub fn without_nodes(&self, removed: &BTreeSet<NodeId>) -> Graph {
        let keep: Vec<NodeId> = (0..self.node_count()).filter(|v| !removed.contains(v)).collect();
        let mut map = vec![usize::MAX; self.node_count()];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut g = Graph::new(keep.iter().map(|&v| self.names[v].clone()).collect());
        for (u, v) in self.edges() {
            if map[u] != usize::MAX && map[v] != usize::MAX {
                g.add_edge(map[u], map[v]);
            }
        }
        g
    }

    /// Parses one `u v` pair per line; blank lines and `#` comments are
    /// skipped. Node ids are assigned in order of first appearance.
    pub fn from_edge_list(text: &str) -> Result<Graph, NetError> {
        let mut names: Vec<String> = Vec::new();
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(NetError::EdgeList {
                    line: lineno + 1,
                    msg: format!("expected two node names, found {}", toks.len()),
                });
            }
            if toks[0] == toks[1] {
                return Err(NetError::EdgeList {
                    line: lineno + 1,
                    msg: format!("self-loop on {}", toks[0]),
                });
            }
            let mut id = |name: &str| match names.iter().position(|n| n == name) {
                Some(i) => i,
                None => {
                    names.push(name.to_string());
                    names.len() - 1
                }
            };
            let (u, v) = (id(toks[0]), id(toks[1]));
            pairs.push((u, v));
        }
        let mut g = Graph::new(names);
        for (u, v) in pairs {
            g.add_edge(u, v);
        }
        Ok(g)
    }

    pub fn to_edge_list(&self) -> String {
        self.edges()
            .into_iter()
            .map(|(u, v)| format!("{} {}\n", self.names[u], self.names[v]))
            .collect()
    }

    /// Display name for the unordered pair, e.g. `AB` for single-character
    /// names and `n1-n7` otherwise.
    pub fn pair_name(&self, u: NodeId, v: NodeId) -> String {
        let (a, b) = (&self.names[u.min(v)], &self.names[u.max(v)]);
        if self.single_char_names() {
            format!("{a}{b}")
        } else {
            format!("{a}-{b}")
        }
    }

    pub(crate) fn single_char_names(&self) -> bool {
        self.names.iter().all(|n| n.chars().count() == 1)
    }
}

pub fn default_names(n: usize) -> Vec<String> {
    if n <= 26 {
        (0..n).map(|i| char::from(b'A' + i as u8).to_string()).collect()
    } else {
        (0..n).map(|i| i.to_string()).collect()
    }
}
