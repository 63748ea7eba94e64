//! Cheapest alternatives of a player relative to their current path.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::structure::{is_two_terminal_sp, player_subgraph};
use crate::error::{Error, Result};
use crate::game::{Game, StrategySpace};
use crate::graph::dijkstra_all;
use crate::rational::Rational;

/// A detour of `owner` leaving its current path at position `from` and
/// rejoining it at position `to > from`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Alternative {
    pub owner: usize,
    pub from: usize,
    pub to: usize,
    /// Edges of the detour in order from `vertices[0]`.
    pub path: Vec<usize>,
    pub vertices: Vec<usize>,
    /// The subpath `P_i^A` replaced by the detour, in path order.
    pub substituted: Vec<usize>,
    /// `Σ_{e∈path} (c_e + d_{i,e})`.
    pub weight: Rational,
}

impl Alternative {
    /// Splices the detour into `path` (ordered edges) and `verts`.
    pub fn apply(&self, path: &[usize], verts: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let mut edges = path[..self.from].to_vec();
        edges.extend(&self.path);
        edges.extend(&path[self.to..]);
        let mut vs = verts[..self.from].to_vec();
        vs.extend(&self.vertices);
        vs.extend(&verts[self.to + 1..]);
        (edges, vs)
    }
}

fn edge_cost(game: &Game, e: usize) -> Result<Rational> {
    game.costs[e].fixed_value().cloned().ok_or_else(|| Error::Unsupported("alternatives need fixed edge costs".into()))
}

/// The cheapest alternative for every pair of path vertices joined by a
/// detour region of `G_i`. `path` and `verts` are player `i`'s current
/// path from `s_i` to `t_i`.
pub fn alternatives(game: &Game, i: usize, path: &[usize], verts: &[usize]) -> Result<Vec<Alternative>> {
    let net = game.graph.as_ref().ok_or_else(|| Error::Unsupported("alternatives need a graph".into()))?;
    let StrategySpace::Path { source, terminal } = game.spaces[i] else {
        return Err(Error::Unsupported(format!("player {i} has no path space")));
    };
    let mask = player_subgraph(net, source, terminal);
    if !is_two_terminal_sp(net, &mask, source, terminal) {
        return Err(Error::NotSeriesParallel(format!("G_{i} is not series-parallel")));
    }
    let mut pos = vec![None; net.n];
    for (k, &v) in verts.iter().enumerate() {
        pos[v] = Some(k);
    }
    let on_path: BTreeSet<usize> = path.iter().copied().collect();

    // Group the remaining edges of G_i into flaps: a chord is its own flap,
    // otherwise flaps are the components of the off-path vertices.
    let mut parent: Vec<usize> = (0..net.n).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        parent[x] = r;
        r
    }
    let rest: Vec<usize> = (0..net.edges.len()).filter(|&e| mask[e] && !on_path.contains(&e)).collect();
    for &e in &rest {
        let (u, v) = (net.edges[e].u, net.edges[e].v);
        if pos[u].is_none() && pos[v].is_none() {
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut flaps: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for &e in &rest {
        let (u, v) = (net.edges[e].u, net.edges[e].v);
        let key = match (pos[u], pos[v]) {
            (Some(_), Some(_)) => (1, e),
            (None, _) => (0, find(&mut parent, u)),
            (_, None) => (0, find(&mut parent, v)),
        };
        flaps.entry(key).or_default().push(e);
    }

    let mut best: BTreeMap<(usize, usize), Alternative> = BTreeMap::new();
    for edges in flaps.values() {
        let attach: BTreeSet<usize> =
            edges.iter().flat_map(|&e| [net.edges[e].u, net.edges[e].v]).filter_map(|v| pos[v]).collect();
        if attach.len() != 2 {
            return Err(Error::NotSeriesParallel(format!(
                "a detour region of player {i} attaches to {} path vertices",
                attach.len()
            )));
        }
        let (from, to) = (*attach.first().unwrap(), *attach.last().unwrap());
        let in_flap: BTreeSet<usize> = edges.iter().copied().collect();
        let mut weights = BTreeMap::new();
        for &e in edges {
            weights.insert(e, edge_cost(game, e)? + game.delay(i, e));
        }
        let labels = dijkstra_all(net, verts[from], false, &|e| in_flap.contains(&e).then(|| weights[&e].clone()));
        let Some(sp) = labels[verts[to]].clone() else { continue };
        let alt = Alternative {
            owner: i,
            from,
            to,
            path: sp.edges,
            vertices: sp.vertices,
            substituted: path[from..to].to_vec(),
            weight: sp.cost,
        };
        let replace = match best.get(&(from, to)) {
            None => true,
            Some(b) => (&alt.weight, &alt.vertices) < (&b.weight, &b.vertices),
        };
        if replace {
            best.insert((from, to), alt);
        }
    }
    Ok(best.into_values().collect())
}

/// `Σ_{e∈P_i^A} (share_e + d_{i,e})` for the given per-edge shares of `i`.
pub fn substituted_cost(game: &Game, alt: &Alternative, share: &dyn Fn(usize) -> Rational) -> Rational {
    alt.substituted.iter().map(|&e| share(e) + game.delay(alt.owner, e)).sum()
}

/// Among the tight alternatives whose substituted subpath contains `f`, the
/// one substituting the fewest edges; ties by edge sequence.
pub fn smallest_tight_alternative(
    game: &Game,
    i: usize,
    path: &[usize],
    verts: &[usize],
    share: &dyn Fn(usize) -> Rational,
    f: usize,
) -> Result<Alternative> {
    let mut found: Option<Alternative> = None;
    for alt in alternatives(game, i, path, verts)? {
        if !alt.substituted.contains(&f) || substituted_cost(game, &alt, share) != alt.weight {
            continue;
        }
        let better = match &found {
            None => true,
            Some(b) => (alt.substituted.len(), &alt.path) < (b.substituted.len(), &b.path),
        };
        if better {
            found = Some(alt);
        }
    }
    found.ok_or_else(|| Error::NoTightAlternative(format!("player {i}, edge {f}")))
}
