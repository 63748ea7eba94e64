//! Irredundant subgraphs, per-player path subgraphs `G_i` and two-terminal
//! series-parallel recognition.

use std::collections::BTreeMap;

use crate::game::{Game, StrategySpace};
use crate::graph::{edges_on_st_paths, Network};

/// Vertices and edges lying on some `s_i`–`t_i` path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Irredundant {
    pub vertices: Vec<bool>,
    pub edges: Vec<bool>,
}

impl Irredundant {
    pub fn is_everything(&self) -> bool {
        self.vertices.iter().chain(&self.edges).all(|&b| b)
    }

    /// The network restricted to the kept edges (vertex ids unchanged) and
    /// the original id of each kept edge.
    pub fn apply(&self, net: &Network) -> (Network, Vec<usize>) {
        let mut out = Network::new(net.n, net.directed);
        let mut ids = Vec::new();
        for (e, edge) in net.edges.iter().enumerate() {
            if self.edges[e] {
                out.add_edge(edge.u, edge.v, edge.cost.clone());
                ids.push(e);
            }
        }
        (out, ids)
    }
}

/// Keeps exactly the vertices and edges on some simple `s_i`–`t_i` path:
/// for each pair, the blocks between its endpoints in the block-cut tree.
pub fn irredundant(net: &Network, pairs: &[(usize, usize)]) -> Irredundant {
    let all = vec![true; net.edges.len()];
    let mut edges = vec![false; net.edges.len()];
    let mut vertices = vec![false; net.n];
    for &(s, t) in pairs {
        vertices[s] = true;
        vertices[t] = true;
        for (e, on) in edges_on_st_paths(net, &all, s, t).into_iter().enumerate() {
            if on {
                edges[e] = true;
                vertices[net.edges[e].u] = true;
                vertices[net.edges[e].v] = true;
            }
        }
    }
    Irredundant { vertices, edges }
}

/// Edge mask of `G_i`, the union of all `s_i`–`t_i` paths.
pub fn player_subgraph(net: &Network, s: usize, t: usize) -> Vec<bool> {
    edges_on_st_paths(net, &vec![true; net.edges.len()], s, t)
}

/// Reduces the masked multigraph by merging parallel edges and contracting
/// degree-2 inner vertices; series-parallel iff a single `s`–`t` edge is left.
pub fn is_two_terminal_sp(net: &Network, mask: &[bool], s: usize, t: usize) -> bool {
    if s == t {
        return !mask.iter().any(|&b| b);
    }
    let mut edges: Vec<(usize, usize)> =
        net.edges.iter().zip(mask).filter(|(_, &m)| m).map(|(e, _)| (e.u.min(e.v), e.u.max(e.v))).collect();
    loop {
        edges.sort_unstable();
        edges.dedup();
        let mut incident: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (k, &(u, v)) in edges.iter().enumerate() {
            incident.entry(u).or_default().push(k);
            incident.entry(v).or_default().push(k);
        }
        let series = incident.iter().find(|(&w, ks)| w != s && w != t && ks.len() == 2);
        let Some((&w, ks)) = series else { break };
        let other = |k: usize| if edges[k].0 == w { edges[k].1 } else { edges[k].0 };
        let (a, b) = (other(ks[0]), other(ks[1]));
        let (k0, k1) = (ks[0], ks[1]);
        edges[k0] = (a.min(b), a.max(b));
        edges.remove(k1);
    }
    edges == vec![(s.min(t), s.max(t))]
}

/// Every player's `G_i` is two-terminal series-parallel for `(s_i, t_i)`.
pub fn is_n_series_parallel(game: &Game) -> bool {
    let Some(net) = &game.graph else { return false };
    if net.directed {
        return false;
    }
    game.spaces.iter().all(|space| match space {
        StrategySpace::Path { source, terminal } => {
            let mask = player_subgraph(net, *source, *terminal);
            is_two_terminal_sp(net, &mask, *source, *terminal)
        }
        StrategySpace::Matroid(_) => false,
    })
}
