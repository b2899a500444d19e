use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{default_names, Graph};
use super::NetError;

/// Retry budget for generators that resample until the graph is connected.
pub const MAX_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologyParams {
    Chain { n: usize },
    Grid { rows: usize, cols: usize },
    PerforatedGrid { rows: usize, cols: usize, removal_prob: f64 },
    ErdosRenyi { n: usize, p: f64 },
    WattsStrogatz { n: usize, k: usize, p: f64 },
    /// Edge list file, one `u v` pair per line.
    Custom { path: PathBuf },
    /// `A-B`, `C-B`, `B-D`, `D-E`, `D-F`: two commodities sharing the `B-D` link.
    Dumbbell,
}

pub fn generate_topology(params: &TopologyParams, seed: u64) -> Result<Graph, NetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let invalid = |msg: String| Err(NetError::InvalidParams(msg));
    let g = match params {
        TopologyParams::Chain { n } => {
            if *n < 2 {
                return invalid(format!("chain needs at least 2 nodes, got {n}"));
            }
            chain(*n)
        }
        TopologyParams::Grid { rows, cols } => {
            if rows * cols < 2 {
                return invalid(format!("grid {rows}x{cols} has fewer than 2 nodes"));
            }
            grid(*rows, *cols)
        }
        TopologyParams::PerforatedGrid { rows, cols, removal_prob } => {
            check_prob("removal_prob", *removal_prob)?;
            let full = grid(*rows, *cols);
            resample(|| {
                let removed: BTreeSet<usize> =
                    (0..full.node_count()).filter(|_| rng.random_bool(*removal_prob)).collect();
                full.without_nodes(&removed)
            })?
        }
        TopologyParams::ErdosRenyi { n, p } => {
            check_prob("p", *p)?;
            if *n < 2 {
                return invalid(format!("erdos_renyi needs at least 2 nodes, got {n}"));
            }
            resample(|| {
                let mut g = Graph::with_default_names(*n);
                for u in 0..*n {
                    for v in u + 1..*n {
                        if rng.random_bool(*p) {
                            g.add_edge(u, v);
                        }
                    }
                }
                g
            })?
        }
        TopologyParams::WattsStrogatz { n, k, p } => {
            check_prob("p", *p)?;
            if k % 2 != 0 || *k == 0 || k >= n {
                return invalid(format!("watts_strogatz needs even 0 < k < n, got k={k}, n={n}"));
            }
            resample(|| watts_strogatz(*n, *k, *p, &mut rng))?
        }
        TopologyParams::Custom { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| NetError::Io {
                path: path.clone(),
                msg: e.to_string(),
            })?;
            let g = Graph::from_edge_list(&text)?;
            if !g.is_connected() || g.node_count() < 2 {
                return Err(NetError::Disconnected);
            }
            g
        }
        TopologyParams::Dumbbell => dumbbell(),
    };
    Ok(g)
}

fn check_prob(name: &str, p: f64) -> Result<(), NetError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(NetError::InvalidParams(format!("{name} must lie in [0, 1], got {p}")))
    }
}

fn resample(mut draw: impl FnMut() -> Graph) -> Result<Graph, NetError> {
    for _ in 0..MAX_RESAMPLES {
        let g = draw();
        if g.node_count() >= 2 && g.is_connected() {
            return Ok(g);
        }
    }
    Err(NetError::GenerationFailed { attempts: MAX_RESAMPLES })
}

pub fn chain(n: usize) -> Graph {
    let mut g = Graph::with_default_names(n);
    for v in 1..n {
        g.add_edge(v - 1, v);
    }
    g
}

/// Row-major grid; node `r * cols + c`.
pub fn grid(rows: usize, cols: usize) -> Graph {
    let mut g = Graph::new(default_names(rows * cols));
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                g.add_edge(v, v + 1);
            }
            if r + 1 < rows {
                g.add_edge(v, v + cols);
            }
        }
    }
    g
}

pub fn dumbbell() -> Graph {
    let mut g = Graph::with_default_names(6);
    for (u, v) in [(0, 1), (2, 1), (1, 3), (3, 4), (3, 5)] {
        g.add_edge(u, v);
    }
    g
}

fn watts_strogatz(n: usize, k: usize, p: f64, rng: &mut ChaCha8Rng) -> Graph {
    let mut g = Graph::with_default_names(n);
    for u in 0..n {
        for j in 1..=k / 2 {
            g.add_edge(u, (u + j) % n);
        }
    }
    for j in 1..=k / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            if !g.has_edge(u, v) || !rng.random_bool(p) {
                continue;
            }
            // Rewire to a uniformly chosen node that is neither u nor a current neighbor.
            let candidates: Vec<usize> = (0..n).filter(|&w| w != u && !g.has_edge(u, w)).collect();
            if candidates.is_empty() {
                continue;
            }
            let w = candidates[rng.random_range(0..candidates.len())];
            g.remove_edge(u, v);
            g.add_edge(u, w);
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_and_grid_sizes() {
        let g = generate_topology(&TopologyParams::Chain { n: 6 }, 0).unwrap();
        assert_eq!(g.names().join(""), "ABCDEF");
        assert_eq!(g.edge_count(), 5);
        let g = generate_topology(&TopologyParams::Grid { rows: 5, cols: 5 }, 0).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (25, 40));
    }

    #[test]
    fn random_generators_are_connected_and_deterministic() {
        let params = [
            TopologyParams::ErdosRenyi { n: 25, p: 0.125 },
            TopologyParams::WattsStrogatz { n: 25, k: 4, p: 0.2 },
            TopologyParams::PerforatedGrid {
                rows: 5,
                cols: 5,
                removal_prob: 0.25,
            },
        ];
        for p in &params {
            for seed in 0..20 {
                let g = generate_topology(p, seed).unwrap();
                assert!(g.is_connected());
                assert_eq!(g, generate_topology(p, seed).unwrap());
            }
        }
    }

    #[test]
    fn watts_strogatz_keeps_edge_count() {
        let g = generate_topology(&TopologyParams::WattsStrogatz { n: 20, k: 4, p: 0.3 }, 3).unwrap();
        assert_eq!(g.edge_count(), 40);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(generate_topology(&TopologyParams::WattsStrogatz { n: 10, k: 3, p: 0.1 }, 0).is_err());
        assert!(generate_topology(&TopologyParams::ErdosRenyi { n: 10, p: 1.5 }, 0).is_err());
        assert!(matches!(
            generate_topology(&TopologyParams::ErdosRenyi { n: 30, p: 0.0 }, 0),
            Err(NetError::GenerationFailed { .. })
        ));
    }

    #[test]
    fn dumbbell_shape() {
        let g = dumbbell();
        assert_eq!(g.edge_count(), 5);
        assert_eq!(g.degree(1), 3);
        assert_eq!(g.degree(3), 3);
    }
}
