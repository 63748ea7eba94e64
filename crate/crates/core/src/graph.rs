//! Graphs with exact edge costs, lexicographic shortest paths and block
//! decomposition.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub cost: Rational,
}

/// A multigraph on vertices `0..n`. Edge ids are positions in `edges`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    pub n: usize,
    pub directed: bool,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathResult {
    pub cost: Rational,
    pub edges: Vec<usize>,
    pub vertices: Vec<usize>,
}

impl Network {
    pub fn new(n: usize, directed: bool) -> Self {
        Network { n, directed, edges: Vec::new() }
    }

    pub fn add_edge(&mut self, u: usize, v: usize, cost: Rational) -> usize {
        assert!(u < self.n && v < self.n, "edge endpoint out of range");
        self.edges.push(Edge { u, v, cost });
        self.edges.len() - 1
    }

    pub fn cost(&self, e: usize) -> &Rational {
        &self.edges[e].cost
    }

    /// The vertex reached by traversing `e` from `from`, if allowed.
    pub fn traverse(&self, e: usize, from: usize) -> Option<usize> {
        let edge = &self.edges[e];
        if edge.u == from {
            Some(edge.v)
        } else if edge.v == from && !self.directed {
            Some(edge.u)
        } else {
            None
        }
    }

    /// Like [`Network::traverse`] but walking arcs backwards in a directed graph.
    pub fn traverse_rev(&self, e: usize, from: usize) -> Option<usize> {
        if !self.directed {
            return self.traverse(e, from);
        }
        let edge = &self.edges[e];
        (edge.v == from).then_some(edge.u)
    }

    /// Outgoing `(edge, neighbour)` pairs per vertex, sorted by neighbour then edge.
    pub fn adjacency(&self, reversed: bool) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (id, e) in self.edges.iter().enumerate() {
            if self.directed {
                if reversed {
                    adj[e.v].push((id, e.u));
                } else {
                    adj[e.u].push((id, e.v));
                }
            } else {
                adj[e.u].push((id, e.v));
                if e.u != e.v {
                    adj[e.v].push((id, e.u));
                }
            }
        }
        for list in &mut adj {
            list.sort_by_key(|&(id, w)| (w, id));
        }
        adj
    }

    pub fn path_cost(&self, edges: &[usize]) -> Rational {
        edges.iter().map(|&e| &self.edges[e].cost).sum()
    }
}

/// Dijkstra from `from` with keys `(distance, vertex sequence)` compared
/// lexicographically. `weight` returns `None` for unusable edges; weights
/// must be nonnegative. With `reversed`, directed arcs are walked backwards
/// and the reported sequences still start at `from`.
pub fn dijkstra_all(
    net: &Network,
    from: usize,
    reversed: bool,
    weight: &dyn Fn(usize) -> Option<Rational>,
) -> Vec<Option<PathResult>> {
    let adj = net.adjacency(reversed);
    let mut label: Vec<Option<PathResult>> = vec![None; net.n];
    let mut done = vec![false; net.n];
    label[from] = Some(PathResult { cost: Rational::zero(), edges: vec![], vertices: vec![from] });
    loop {
        let mut best: Option<usize> = None;
        for v in 0..net.n {
            if done[v] {
                continue;
            }
            if let Some(l) = &label[v] {
                let better = match best {
                    None => true,
                    Some(b) => {
                        let lb = label[b].as_ref().unwrap();
                        (&l.cost, &l.vertices) < (&lb.cost, &lb.vertices)
                    }
                };
                if better {
                    best = Some(v);
                }
            }
        }
        let Some(x) = best else { break };
        done[x] = true;
        let lx = label[x].clone().unwrap();
        for &(e, y) in &adj[x] {
            if done[y] {
                continue;
            }
            let Some(w) = weight(e) else { continue };
            debug_assert!(!w.is_negative());
            let cost = &lx.cost + &w;
            let mut vertices = lx.vertices.clone();
            vertices.push(y);
            let replace = match &label[y] {
                None => true,
                Some(ly) => (&cost, &vertices) < (&ly.cost, &ly.vertices),
            };
            if replace {
                let mut edges = lx.edges.clone();
                edges.push(e);
                label[y] = Some(PathResult { cost, edges, vertices });
            }
        }
    }
    label
}

/// Lexicographically smallest shortest path from `from` to `to`.
pub fn shortest_path(
    net: &Network,
    from: usize,
    to: usize,
    weight: &dyn Fn(usize) -> Option<Rational>,
) -> Option<PathResult> {
    dijkstra_all(net, from, false, weight).swap_remove(to)
}

/// Orders an edge set as a simple path from `from` to `to`. Returns `None`
/// unless the set is exactly such a path.
pub fn path_from_edges(
    net: &Network,
    edges: &BTreeSet<usize>,
    from: usize,
    to: usize,
) -> Option<(Vec<usize>, Vec<usize>)> {
    if edges.iter().any(|&e| e >= net.edges.len()) {
        return None;
    }
    let mut used = BTreeSet::new();
    let mut order = Vec::new();
    let mut vertices = vec![from];
    let mut seen = BTreeSet::from([from]);
    let mut cur = from;
    while cur != to {
        let mut next = None;
        for &e in edges {
            if used.contains(&e) {
                continue;
            }
            if let Some(w) = net.traverse(e, cur) {
                if next.is_some() {
                    return None;
                }
                next = Some((e, w));
            }
        }
        let (e, w) = next?;
        if !seen.insert(w) {
            return None;
        }
        used.insert(e);
        order.push(e);
        vertices.push(w);
        cur = w;
    }
    (used.len() == edges.len()).then_some((order, vertices))
}

/// Biconnected components (as edge lists) of the undirected multigraph
/// formed by the edges with `mask[e]`. Self-loops are ignored.
pub fn blocks(net: &Network, mask: &[bool]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); net.n];
    for (id, e) in net.edges.iter().enumerate() {
        if mask[id] && e.u != e.v {
            adj[e.u].push((id, e.v));
            adj[e.v].push((id, e.u));
        }
    }
    for list in &mut adj {
        list.sort_by_key(|&(id, w)| (w, id));
    }
    let mut disc = vec![usize::MAX; net.n];
    let mut low = vec![0usize; net.n];
    let mut timer = 0;
    let mut stack: Vec<usize> = Vec::new();
    let mut out = Vec::new();

    fn dfs(
        x: usize,
        parent_edge: Option<usize>,
        adj: &[Vec<(usize, usize)>],
        disc: &mut [usize],
        low: &mut [usize],
        timer: &mut usize,
        stack: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        disc[x] = *timer;
        low[x] = *timer;
        *timer += 1;
        for &(e, y) in &adj[x] {
            if Some(e) == parent_edge {
                continue;
            }
            if disc[y] == usize::MAX {
                stack.push(e);
                dfs(y, Some(e), adj, disc, low, timer, stack, out);
                low[x] = low[x].min(low[y]);
                if low[y] >= disc[x] {
                    let mut comp = Vec::new();
                    while let Some(f) = stack.pop() {
                        comp.push(f);
                        if f == e {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            } else if disc[y] < disc[x] {
                stack.push(e);
                low[x] = low[x].min(disc[y]);
            }
        }
    }

    for v in 0..net.n {
        if disc[v] == usize::MAX {
            dfs(v, None, &adj, &mut disc, &mut low, &mut timer, &mut stack, &mut out);
        }
    }
    out
}

/// Edges lying on at least one simple `s`–`t` path among the masked edges:
/// the union of the blocks on the `s`–`t` path of the block-vertex tree.
pub fn edges_on_st_paths(net: &Network, mask: &[bool], s: usize, t: usize) -> Vec<bool> {
    let mut result = vec![false; net.edges.len()];
    if s == t {
        return result;
    }
    let comps = blocks(net, mask);
    // Nodes 0..n are vertices, n.. are blocks.
    let nb = comps.len();
    let mut adj = vec![Vec::new(); net.n + nb];
    for (b, comp) in comps.iter().enumerate() {
        let mut verts = BTreeSet::new();
        for &e in comp {
            verts.insert(net.edges[e].u);
            verts.insert(net.edges[e].v);
        }
        for v in verts {
            adj[v].push(net.n + b);
            adj[net.n + b].push(v);
        }
    }
    let mut prev = vec![usize::MAX; net.n + nb];
    let mut queue = VecDeque::from([s]);
    prev[s] = s;
    while let Some(x) = queue.pop_front() {
        for &y in &adj[x] {
            if prev[y] == usize::MAX {
                prev[y] = x;
                queue.push_back(y);
            }
        }
    }
    if prev[t] == usize::MAX {
        return result;
    }
    let mut cur = t;
    while cur != s {
        if cur >= net.n {
            for &e in &comps[cur - net.n] {
                result[e] = true;
            }
        }
        cur = prev[cur];
    }
    result
}

/// All simple paths from `from` to `to` as edge sequences, in DFS order over
/// sorted adjacency. Returns `None` once more than `limit` paths exist.
pub fn simple_paths(net: &Network, from: usize, to: usize, limit: usize) -> Option<Vec<Vec<usize>>> {
    let adj = net.adjacency(false);
    let mut out = Vec::new();
    let mut on_path = vec![false; net.n];
    let mut path = Vec::new();

    fn go(
        x: usize,
        to: usize,
        adj: &[Vec<(usize, usize)>],
        on_path: &mut [bool],
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        limit: usize,
    ) -> bool {
        if x == to {
            out.push(path.clone());
            return out.len() <= limit;
        }
        on_path[x] = true;
        for &(e, y) in &adj[x] {
            if on_path[y] {
                continue;
            }
            path.push(e);
            let ok = go(y, to, adj, on_path, path, out, limit);
            path.pop();
            if !ok {
                on_path[x] = false;
                return false;
            }
        }
        on_path[x] = false;
        true
    }

    go(from, to, &adj, &mut on_path, &mut path, &mut out, limit).then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    fn square() -> Network {
        // 0-1-2 and 0-3-2 with equal costs, plus a pendant 2-4.
        let mut g = Network::new(5, false);
        g.add_edge(0, 1, r(1));
        g.add_edge(1, 2, r(1));
        g.add_edge(0, 3, r(1));
        g.add_edge(3, 2, r(1));
        g.add_edge(2, 4, r(5));
        g
    }

    #[test]
    fn ties_break_on_vertex_sequence() {
        let g = square();
        let p = shortest_path(&g, 0, 2, &|e| Some(g.cost(e).clone())).unwrap();
        assert_eq!(p.cost, r(2));
        assert_eq!(p.vertices, vec![0, 1, 2]);
        let p = shortest_path(&g, 2, 0, &|e| Some(g.cost(e).clone())).unwrap();
        assert_eq!(p.vertices, vec![2, 1, 0]);
    }

    #[test]
    fn zero_weight_edges_are_fine() {
        let mut g = Network::new(3, false);
        g.add_edge(0, 2, r(0));
        g.add_edge(0, 1, r(0));
        g.add_edge(1, 2, r(0));
        let p = shortest_path(&g, 0, 2, &|e| Some(g.cost(e).clone())).unwrap();
        assert_eq!(p.vertices, vec![0, 1, 2]);
    }

    #[test]
    fn directed_respects_orientation() {
        let mut g = Network::new(3, true);
        g.add_edge(0, 1, r(1));
        g.add_edge(2, 1, r(1));
        assert!(shortest_path(&g, 0, 2, &|e| Some(g.cost(e).clone())).is_none());
        let all = dijkstra_all(&g, 1, true, &|e| Some(g.cost(e).clone()));
        assert_eq!(all[2].as_ref().unwrap().vertices, vec![1, 2]);
    }

    #[test]
    fn path_from_edges_accepts_only_simple_paths() {
        let g = square();
        let (order, verts) = path_from_edges(&g, &BTreeSet::from([3, 2, 4]), 0, 4).unwrap();
        assert_eq!(order, vec![2, 3, 4]);
        assert_eq!(verts, vec![0, 3, 2, 4]);
        assert!(path_from_edges(&g, &BTreeSet::from([0, 1, 2, 3]), 0, 2).is_none());
        assert!(path_from_edges(&g, &BTreeSet::from([0]), 0, 2).is_none());
        assert!(path_from_edges(&g, &BTreeSet::new(), 3, 3).is_some());
    }

    #[test]
    fn blocks_split_at_cut_vertex() {
        let g = square();
        let mut bs = blocks(&g, &[true; 5]);
        bs.sort();
        assert_eq!(bs, vec![vec![0, 1, 2, 3], vec![4]]);
        let on = edges_on_st_paths(&g, &[true; 5], 0, 2);
        assert_eq!(on, vec![true, true, true, true, false]);
        let on = edges_on_st_paths(&g, &[true; 5], 1, 4);
        assert_eq!(on, vec![true, true, true, true, true]);
    }

    #[test]
    fn parallel_edges_form_one_block() {
        let mut g = Network::new(2, false);
        g.add_edge(0, 1, r(1));
        g.add_edge(0, 1, r(2));
        assert_eq!(blocks(&g, &[true, true]), vec![vec![0, 1]]);
    }

    #[test]
    fn enumerates_simple_paths() {
        let g = square();
        let paths = simple_paths(&g, 0, 4, 100).unwrap();
        assert_eq!(paths, vec![vec![0, 1, 4], vec![2, 3, 4]]);
        assert!(simple_paths(&g, 0, 4, 1).is_none());
    }
}
