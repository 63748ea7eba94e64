//! Single-source connection games with fixed costs: tree profiles, the
//! auxiliary-graph transformation with bottom-up sharing, expansion back to
//! the original graph, and the source/terminal reductions.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use crate::error::{invariant, Error, Result};
use crate::game::{Game, Profile, StrategySpace};
use crate::graph::{dijkstra_all, Network, PathResult};
use crate::protocol::{verify_budget_balance, verify_pne, SeparableProtocol, SharingTable};
use crate::rational::Rational;
use crate::trace::TraceEvent;

/// Extra runs on the previous output when the expanded profile is not an
/// equilibrium in the original graph.
const MAX_PASSES: usize = 4;

/// The common source of a single-source game.
pub fn common_source(game: &Game) -> Result<usize> {
    if !game.is_path_game() {
        return Err(Error::Unsupported("needs a connection game".into()));
    }
    let mut sources = game.spaces.iter().map(|s| match s {
        StrategySpace::Path { source, .. } => *source,
        StrategySpace::Matroid(_) => unreachable!(),
    });
    let Some(s) = sources.next() else {
        return Err(Error::InvalidInput("no players".into()));
    };
    if sources.any(|t| t != s) {
        return Err(Error::Unsupported("players do not share a source".into()));
    }
    Ok(s)
}

fn check_input(game: &Game) -> Result<usize> {
    let s = common_source(game)?;
    if !game.is_fixed_cost() {
        return Err(Error::Unsupported("needs fixed edge costs".into()));
    }
    if !game.has_zero_delays() {
        return Err(Error::Unsupported("delays are not supported here; use the series-parallel transform".into()));
    }
    Ok(s)
}

fn terminals(game: &Game) -> Vec<usize> {
    game.spaces
        .iter()
        .map(|sp| match sp {
            StrategySpace::Path { terminal, .. } => *terminal,
            StrategySpace::Matroid(_) => unreachable!(),
        })
        .collect()
}

/// Shortest-path tree from the source inside the union of the paths of `p`,
/// each player routed along its tree path.
pub fn to_tree_profile(game: &Game, p: &Profile) -> Result<Profile> {
    let s = check_input(game)?;
    game.check_profile(p)?;
    let net = game.graph.as_ref().unwrap();
    let union = p.used_resources();
    let labels = dijkstra_all(net, s, true, &|e| union.contains(&e).then(|| net.cost(e).clone()));
    let mut choices = Vec::new();
    for (i, t) in terminals(game).into_iter().enumerate() {
        let l = labels[t]
            .as_ref()
            .ok_or_else(|| Error::Disconnected(format!("terminal of player {i} cannot reach the source")))?;
        choices.push(l.edges.iter().copied().collect());
    }
    let out = Profile::new(choices);
    debug_assert!(game.check_profile(&out).is_ok());
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum TreeEdge {
    Real(usize),
    Aux(usize),
}

/// A shortcut standing for a shortest path in the original graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuxEdge {
    pub lower: usize,
    pub upper: usize,
    pub cost: Rational,
    /// Original edges from `lower` to `upper`.
    pub path: Vec<usize>,
    pub vertices: Vec<usize>,
    pub owner: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contribution {
    pub delta: Rational,
    /// Where the cheapest path avoiding the edge leaves the player's path,
    /// and where it rejoins it above the edge.
    pub deviation: Option<(usize, usize)>,
}

/// Working state: the current tree rooted at the source, with closed/open
/// labels, shares on closed edges and the auxiliary edges bought so far.
#[derive(Debug, Clone)]
pub struct AuxiliaryGraph {
    pub source: usize,
    pub terminals: Vec<usize>,
    /// Edge to the parent and the parent, per tree vertex other than the root.
    pub parent: Vec<Option<(TreeEdge, usize)>>,
    /// Label of each vertex's parent edge.
    pub closed: Vec<bool>,
    /// BFS number in the initial tree.
    pub bfs: Vec<usize>,
    pub aux: Vec<AuxEdge>,
    /// `ĉ_e(i)` on closed original tree edges, keyed `(player, edge)`.
    pub shares: BTreeMap<(usize, usize), Rational>,
    /// `(descendant, ancestor)` pairs of the initial tree.
    initial_pairs: BTreeSet<(usize, usize)>,
    net: Network,
    dist_cache: Vec<Option<Vec<Option<PathResult>>>>,
}

impl AuxiliaryGraph {
    /// Builds the state for a tree profile; every edge starts open.
    pub fn new(game: &Game, tree: &Profile) -> Result<Self> {
        let source = check_input(game)?;
        game.check_profile(tree)?;
        let net = game.graph.clone().unwrap();
        let n = net.n;
        let terminals = terminals(game);
        let mut parent: Vec<Option<(TreeEdge, usize)>> = vec![None; n];
        for i in 0..game.n_players {
            let (edges, mut verts) = game.ordered_path(i, &tree.choices[i])?;
            let mut edges = edges;
            if !net.directed {
                edges.reverse();
                verts.reverse();
            }
            for (k, &e) in edges.iter().enumerate() {
                let link = Some((TreeEdge::Real(e), verts[k + 1]));
                match parent[verts[k]] {
                    None => parent[verts[k]] = link,
                    Some(old) if Some(old) == link => {}
                    Some(_) => return Err(Error::InvalidInput("profile is not a tree profile".into())),
                }
            }
        }
        invariant!(parent[source].is_none(), "the source has a parent edge");
        let mut children = vec![Vec::new(); n];
        for v in 0..n {
            if let Some((_, p)) = parent[v] {
                children[p].push(v);
            }
        }
        let mut bfs = vec![usize::MAX; n];
        let mut queue = VecDeque::from([source]);
        let mut next = 0;
        while let Some(v) = queue.pop_front() {
            bfs[v] = next;
            next += 1;
            queue.extend(children[v].iter().copied());
        }
        let mut initial_pairs = BTreeSet::new();
        for v in 0..n {
            let mut cur = v;
            while let Some((_, p)) = parent[cur] {
                initial_pairs.insert((v, p));
                cur = p;
            }
        }
        Ok(AuxiliaryGraph {
            source,
            terminals,
            parent,
            closed: vec![false; n],
            bfs,
            aux: Vec::new(),
            shares: BTreeMap::new(),
            initial_pairs,
            dist_cache: vec![None; n],
            net,
        })
    }

    pub fn in_tree(&self, v: usize) -> bool {
        v == self.source || self.parent[v].is_some()
    }

    /// Tree vertices from `t_i` up to the source.
    pub fn path(&self, i: usize) -> Vec<usize> {
        let mut out = vec![self.terminals[i]];
        let mut cur = self.terminals[i];
        while let Some((_, p)) = self.parent[cur] {
            out.push(p);
            cur = p;
        }
        out
    }

    /// Players whose path uses the parent edge of `x`.
    pub fn users(&self, x: usize) -> Vec<usize> {
        (0..self.terminals.len()).filter(|&i| x != self.source && self.path(i).contains(&x)).collect()
    }

    pub fn tree_cost(&self) -> Rational {
        let mut total = Rational::zero();
        for link in self.parent.iter().flatten() {
            total += match link.0 {
                TreeEdge::Real(e) => self.net.cost(e).clone(),
                TreeEdge::Aux(k) => self.aux[k].cost.clone(),
            };
        }
        total
    }

    /// What user `i` pays for the parent edge of `v` in the current state.
    fn user_cost(&self, i: usize, v: usize) -> Rational {
        match self.parent[v].expect("tree edge").0 {
            TreeEdge::Real(e) if self.closed[v] => self.shares.get(&(i, e)).cloned().unwrap_or_default(),
            TreeEdge::Real(_) => Rational::zero(),
            TreeEdge::Aux(k) if self.aux[k].owner == i => self.aux[k].cost.clone(),
            TreeEdge::Aux(_) => Rational::zero(),
        }
    }

    /// Shortest path in the original graph from `a` towards the source side `b`.
    pub fn dist(&mut self, a: usize, b: usize) -> Option<PathResult> {
        if self.dist_cache[a].is_none() {
            let net = &self.net;
            self.dist_cache[a] = Some(dijkstra_all(net, a, false, &|e| Some(net.cost(e).clone())));
        }
        self.dist_cache[a].as_ref().unwrap()[b].clone()
    }

    /// `Δ_i^e` for the open parent edge of `x`: how much more the cheapest
    /// path of `i` costs when the edge costs `c_e` rather than zero.
    pub fn max_contribution(&mut self, i: usize, x: usize) -> Result<Contribution> {
        let Some((TreeEdge::Real(e), _)) = self.parent[x] else {
            return Err(Error::InternalInvariant(format!("vertex {x} has no original parent edge")));
        };
        let c_e = self.net.cost(e).clone();
        let path = self.path(i);
        let k = path
            .iter()
            .position(|&v| v == x)
            .ok_or_else(|| Error::InternalInvariant(format!("player {i} does not use the edge above {x}")))?;
        let mut prefix = vec![Rational::zero()];
        for j in 0..k {
            let next = &prefix[j] + self.user_cost(i, path[j]);
            prefix.push(next);
        }
        let mut best: Option<(Rational, Vec<usize>, (usize, usize))> = None;
        for j in 0..=k {
            for l in k + 1..path.len() {
                let Some(d) = self.dist(path[j], path[l]) else { continue };
                let delta = &prefix[j] + &d.cost - &prefix[k];
                invariant!(!delta.is_negative(), "player {i} would rather leave its path below the edge above {x}");
                let mut seq = path[..=j].to_vec();
                seq.extend(&path[l..]);
                let better = match &best {
                    None => true,
                    Some((bd, bs, _)) => (&delta, &seq) < (bd, bs),
                };
                if better {
                    best = Some((delta, seq, (path[j], path[l])));
                }
            }
        }
        Ok(match best {
            Some((delta, _, dev)) if delta < c_e => Contribution { delta, deviation: Some(dev) },
            _ => Contribution { delta: c_e, deviation: None },
        })
    }

    /// Generic shortest path for `i` over the tree plus every auxiliary
    /// edge; nothing may beat the canonical one-shortcut deviation.
    fn cross_check(&mut self, i: usize, x: usize, delta: &Rational) -> Result<()> {
        let path = self.path(i);
        let on_path: BTreeSet<usize> = path.iter().copied().collect();
        let mut hat = Network::new(self.net.n, self.net.directed);
        let mut weights = Vec::new();
        for v in 0..self.net.n {
            let Some((te, p)) = self.parent[v] else { continue };
            hat.add_edge(v, p, Rational::zero());
            let used = on_path.contains(&v);
            weights.push(match te {
                TreeEdge::Real(e) if v == x => self.net.cost(e).clone(),
                _ if used => self.user_cost(i, v),
                TreeEdge::Real(e) => self.net.cost(e).clone(),
                TreeEdge::Aux(k) => self.aux[k].cost.clone(),
            });
        }
        let pairs: Vec<(usize, usize)> = self.initial_pairs.iter().copied().collect();
        for (a, b) in pairs {
            if !self.in_tree(a) || !self.in_tree(b) {
                continue;
            }
            if let Some(d) = self.dist(a, b) {
                hat.add_edge(a, b, Rational::zero());
                weights.push(d.cost);
            }
        }
        let labels = dijkstra_all(&hat, self.terminals[i], false, &|k| Some(weights[k].clone()));
        let k = path.iter().position(|&v| v == x).unwrap();
        let below: Rational = (0..k).map(|j| self.user_cost(i, path[j])).sum();
        if let Some(l) = &labels[self.source] {
            invariant!(
                l.cost >= below.clone() + delta,
                "a non-canonical deviation of player {i} at the edge above {x} is strictly cheaper"
            );
        }
        Ok(())
    }

    fn is_strict_ancestor(&self, a: usize, b: usize) -> bool {
        let mut cur = b;
        while let Some((_, p)) = self.parent[cur] {
            if p == a {
                return true;
            }
            cur = p;
        }
        false
    }

    fn remove_vertex(&mut self, v: usize) {
        if let Some((TreeEdge::Real(e), _)) = self.parent[v] {
            self.shares.retain(|&(_, f), _| f != e);
        }
        self.parent[v] = None;
        self.closed[v] = false;
    }

    /// Drops tree edges no player uses any more.
    fn prune(&mut self) {
        let terminals: BTreeSet<usize> = self.terminals.iter().copied().collect();
        loop {
            let mut has_child = vec![false; self.net.n];
            for (_, p) in self.parent.iter().flatten() {
                has_child[*p] = true;
            }
            let dead: Vec<usize> = (0..self.net.n)
                .filter(|&v| self.parent[v].is_some() && !has_child[v] && !terminals.contains(&v))
                .collect();
            if dead.is_empty() {
                return;
            }
            for v in dead {
                self.remove_vertex(v);
            }
        }
    }

    /// Replaces each player's auxiliary edges by their original paths,
    /// removes loops and assigns shares: tree shares stand, each owner
    /// pays the expansion edges not paid yet, in player order, and edges
    /// left underpaid by loop removal are topped up by their lowest user.
    pub fn expand_and_assign(&self, trace: &mut Vec<TraceEvent>) -> Result<(Profile, SharingTable)> {
        let n_players = self.terminals.len();
        let mut charged = self.shares.clone();
        let mut paid: BTreeSet<usize> = BTreeSet::new();
        for link in self.parent.iter().flatten() {
            if let TreeEdge::Real(e) = link.0 {
                paid.insert(e);
            }
        }
        let mut walks = Vec::new();
        for i in 0..n_players {
            let mut verts = vec![self.terminals[i]];
            let mut edges = Vec::new();
            let mut cur = self.terminals[i];
            while let Some((te, p)) = self.parent[cur] {
                match te {
                    TreeEdge::Real(e) => {
                        edges.push(e);
                        verts.push(p);
                    }
                    TreeEdge::Aux(k) => {
                        let a = &self.aux[k];
                        edges.extend(&a.path);
                        verts.extend(&a.vertices[1..]);
                        if a.owner == i {
                            for &f in &a.path {
                                if paid.insert(f) {
                                    charged.insert((i, f), self.net.cost(f).clone());
                                    trace.push(
                                        TraceEvent::new("expand_charge")
                                            .player(i)
                                            .resource(f)
                                            .delta(self.net.cost(f).clone()),
                                    );
                                }
                            }
                        }
                    }
                }
                cur = p;
            }
            walks.push(shortcut(&edges, &verts));
        }
        let profile = Profile::new(walks.iter().map(|w| w.iter().copied().collect()).collect());
        let mut table = SharingTable::new(profile.clone());
        for (i, walk) in walks.iter().enumerate() {
            for &e in walk {
                if let Some(v) = charged.get(&(i, e)) {
                    table.set(i, e, v.clone());
                }
            }
        }
        for (e, users) in profile.occupancy(self.net.edges.len()).iter().enumerate() {
            if users.is_empty() {
                continue;
            }
            let total: Rational = users.iter().map(|&i| table.share(i, e)).sum();
            let mut gap = self.net.cost(e) - &total;
            if gap.is_positive() {
                let i = *users.first().unwrap();
                table.set(i, e, table.share(i, e) + &gap);
                trace.push(TraceEvent::new("repair").player(i).resource(e).delta(gap));
            } else if gap.is_negative() {
                for &i in users.iter().rev() {
                    let s = table.share(i, e);
                    let cut = Rational::min_of(s.clone(), -gap.clone());
                    table.set(i, e, s - &cut);
                    gap += cut;
                }
            }
        }
        Ok((profile, table))
    }
}

/// Erases loops from a walk given by its edges and its vertices.
fn shortcut(edges: &[usize], verts: &[usize]) -> Vec<usize> {
    let mut out_e: Vec<usize> = Vec::new();
    let mut out_v = vec![verts[0]];
    for (k, &e) in edges.iter().enumerate() {
        let w = verts[k + 1];
        if let Some(pos) = out_v.iter().position(|&u| u == w) {
            out_v.truncate(pos + 1);
            out_e.truncate(pos);
        } else {
            out_v.push(w);
            out_e.push(e);
        }
    }
    out_e
}

#[derive(Debug, Clone)]
pub struct SingleSourceOutcome {
    pub profile: Profile,
    pub protocol: SeparableProtocol,
    /// The tree profile the first pass started from.
    pub tree_profile: Profile,
    /// Tree cost before the first replacement and after each one.
    pub tree_costs: Vec<Rational>,
    pub replacements: usize,
    pub closings: usize,
    /// Every auxiliary edge of every final tree was paid by its owner alone.
    pub aux_single_payer: bool,
    pub passes: usize,
    pub pne_ok: bool,
    pub budget_ok: bool,
    pub trace: Vec<TraceEvent>,
}

#[derive(Clone)]
struct Pass {
    profile: Profile,
    table: SharingTable,
    tree_profile: Profile,
    tree_costs: Vec<Rational>,
    replacements: usize,
    closings: usize,
    aux_single_payer: bool,
}

fn run_pass(game: &Game, p: &Profile, trace: &mut Vec<TraceEvent>) -> Result<Pass> {
    let tree_profile = to_tree_profile(game, p)?;
    let mut st = AuxiliaryGraph::new(game, &tree_profile)?;
    st.prune();
    let mut tree_costs = vec![st.tree_cost()];
    let (mut replacements, mut closings) = (0, 0);
    loop {
        let open = (0..st.net.n).filter(|&v| st.parent[v].is_some() && !st.closed[v]).max_by_key(|&v| st.bfs[v]);
        let Some(x) = open else { break };
        let Some((TreeEdge::Real(e), _)) = st.parent[x] else {
            return Err(Error::InternalInvariant(format!("open auxiliary edge above {x}")));
        };
        let c_e = st.net.cost(e).clone();
        let users = st.users(x);
        invariant!(!users.is_empty(), "open edge {e} has no users");
        let mut contributions = Vec::new();
        for &i in &users {
            let path = st.path(i);
            let k = path.iter().position(|&v| v == x).unwrap();
            invariant!(path[..k].iter().all(|&v| st.closed[v]), "open edge below edge {e} on player {i}'s path");
            invariant!(
                path[k + 1..path.len() - 1]
                    .iter()
                    .all(|&v| !st.closed[v] && matches!(st.parent[v], Some((TreeEdge::Real(_), _)))),
                "closed edge above edge {e} on player {i}'s path"
            );
            let c = st.max_contribution(i, x)?;
            st.cross_check(i, x, &c.delta)?;
            contributions.push((i, c));
        }
        let total: Rational = contributions.iter().map(|(_, c)| &c.delta).sum();
        if total >= c_e {
            let mut left = c_e.clone();
            for (i, c) in &contributions {
                let give = Rational::min_of(c.delta.clone(), left.clone());
                if give.is_positive() {
                    left -= &give;
                    st.shares.insert((*i, e), give.clone());
                    trace.push(TraceEvent::new("share").player(*i).resource(e).delta(give));
                }
            }
            st.closed[x] = true;
            closings += 1;
            trace.push(TraceEvent::new("close").resource(e).delta(c_e));
            continue;
        }

        // Replace the edge: keep the highest deviation vertices.
        let before = st.tree_cost();
        let devs: Vec<(usize, (usize, usize))> =
            contributions.iter().map(|(i, c)| (*i, c.deviation.expect("Δ < c_e implies a deviation"))).collect();
        let highest: BTreeSet<usize> = devs
            .iter()
            .map(|(_, (v, _))| *v)
            .filter(|&v| !devs.iter().any(|(_, (w, _))| st.is_strict_ancestor(*w, v)))
            .collect();
        let mut segments = Vec::new();
        for &v in &highest {
            let mut seg = vec![v];
            let mut cur = v;
            while cur != x {
                cur = st.parent[cur].unwrap().1;
                seg.push(cur);
            }
            segments.push(seg);
        }
        let mut doomed = BTreeSet::new();
        for seg in &segments {
            doomed.extend(seg[1..].iter().copied());
        }
        for &v in &highest {
            st.remove_vertex(v);
        }
        for &v in &doomed {
            st.remove_vertex(v);
        }
        for &v in &highest {
            let (owner, (_, u)) = *devs.iter().find(|(_, (w, _))| *w == v).unwrap();
            let d = st.dist(v, u).unwrap();
            st.aux.push(AuxEdge {
                lower: v,
                upper: u,
                cost: d.cost.clone(),
                path: d.edges,
                vertices: d.vertices,
                owner,
            });
            st.parent[v] = Some((TreeEdge::Aux(st.aux.len() - 1), u));
            st.closed[v] = true;
            trace.push(TraceEvent::new("aux_edge").player(owner).delta(d.cost));
        }
        st.prune();
        let after = st.tree_cost();
        invariant!(after < before, "replacing edge {e} did not lower the tree cost");
        trace.push(TraceEvent::new("replace").resource(e).delta(&after - &before));
        tree_costs.push(after);
        replacements += 1;
    }
    let mut aux_single_payer = true;
    for v in 0..st.net.n {
        if let Some((TreeEdge::Aux(k), _)) = st.parent[v] {
            let payers: Vec<usize> = st.users(v).into_iter().filter(|&i| st.user_cost(i, v).is_positive()).collect();
            let owner_pays = st.user_cost(st.aux[k].owner, v) == st.aux[k].cost;
            aux_single_payer &= owner_pays && payers.len() <= 1 && st.users(v).contains(&st.aux[k].owner);
        }
    }
    let (profile, table) = st.expand_and_assign(trace)?;
    Ok(Pass { profile, table, tree_profile, tree_costs, replacements, closings, aux_single_payer })
}

/// Pre: single source, fixed costs, zero delays. Returns a profile no more
/// expensive than `p` together with a protocol meant to enforce it; the
/// outcome records whether the equilibrium check in the original graph
/// passed.
pub fn transform_single_source(game: &Game, p: &Profile) -> Result<SingleSourceOutcome> {
    if game.n_players == 0 && game.is_path_game() {
        game.check_profile(p)?;
        return Ok(SingleSourceOutcome {
            profile: p.clone(),
            protocol: SeparableProtocol::new(SharingTable::new(p.clone())),
            tree_profile: p.clone(),
            tree_costs: vec![Rational::zero()],
            replacements: 0,
            closings: 0,
            aux_single_payer: true,
            passes: 0,
            pne_ok: true,
            budget_ok: true,
            trace: Vec::new(),
        });
    }
    check_input(game)?;
    let input_cost = game.total_cost(p)?;
    let mut trace = Vec::new();
    let mut current = p.clone();
    let mut first: Option<Pass> = None;
    let mut passes = 0;
    let (pass, protocol, pne_ok, aux_ok) = loop {
        passes += 1;
        trace.push(TraceEvent::new("pass").delta(Rational::from(passes)));
        let pass = run_pass(game, &current, &mut trace)?;
        let protocol = SeparableProtocol::new(pass.table.clone());
        let pne_ok = verify_pne(game, &protocol)?.ok;
        let aux_ok = first.as_ref().is_none_or(|f| f.aux_single_payer) && pass.aux_single_payer;
        if first.is_none() {
            first = Some(pass.clone());
        }
        if pne_ok || passes >= MAX_PASSES || pass.profile == current {
            break (pass, protocol, pne_ok, aux_ok);
        }
        current = pass.profile.clone();
    };
    let first = first.unwrap();
    let output_cost = game.total_cost(&pass.profile)?;
    invariant!(output_cost <= input_cost, "output cost {output_cost} exceeds input cost {input_cost}");
    let budget_ok = verify_budget_balance(game, &protocol, &pass.profile)?.ok;
    Ok(SingleSourceOutcome {
        profile: pass.profile,
        protocol,
        tree_profile: first.tree_profile,
        tree_costs: first.tree_costs,
        replacements: first.replacements,
        closings: first.closings,
        aux_single_payer: aux_ok,
        passes,
        pne_ok,
        budget_ok,
        trace,
    })
}

/// A multi-source game rewritten with a new common source.
#[derive(Debug, Clone)]
pub struct MultiSourceReduction {
    pub game: Game,
    pub source: usize,
    /// The new edge joining the common source to each player's source.
    pub links: Vec<usize>,
    /// Delay charged to players using another player's link.
    pub big_m: Rational,
}

impl MultiSourceReduction {
    /// A profile of the original game in the reduced game.
    pub fn lift(&self, p: &Profile) -> Profile {
        let mut choices = p.choices.clone();
        for (i, c) in choices.iter_mut().enumerate() {
            c.insert(self.links[i]);
        }
        Profile::new(choices)
    }

    /// A profile of the reduced game restricted to the original edges.
    pub fn project(&self, p: &Profile) -> Profile {
        let links: BTreeSet<usize> = self.links.iter().copied().collect();
        Profile::new(p.choices.iter().map(|c| c.difference(&links).copied().collect()).collect())
    }
}

/// Adds a source `s` joined to every `s_i` by a zero-cost edge that is free
/// for player `i` and costs `M = 1 + Σc + Σd` as delay for everyone else.
pub fn reduce_multi_source(game: &Game) -> Result<MultiSourceReduction> {
    if !game.is_path_game() || !game.is_fixed_cost() {
        return Err(Error::Unsupported("needs a connection game with fixed costs".into()));
    }
    let old = game.graph.as_ref().unwrap();
    let mut big_m = Rational::one();
    for e in &old.edges {
        big_m += &e.cost;
    }
    for d in game.delays.iter().flatten() {
        big_m += d;
    }
    let source = old.n;
    let mut net = Network { n: old.n + 1, directed: old.directed, edges: old.edges.clone() };
    let mut links = Vec::new();
    let mut pairs = Vec::new();
    for sp in &game.spaces {
        let StrategySpace::Path { source: s_i, terminal } = *sp else { unreachable!() };
        // Paths of directed games run from the terminal to the source.
        let link = if net.directed {
            net.add_edge(s_i, source, Rational::zero())
        } else {
            net.add_edge(source, s_i, Rational::zero())
        };
        links.push(link);
        pairs.push((source, terminal));
    }
    let mut delays = game.delays.clone();
    for (i, row) in delays.iter_mut().enumerate() {
        for (j, &link) in links.iter().enumerate() {
            debug_assert_eq!(row.len(), link);
            row.push(if i == j { Rational::zero() } else { big_m.clone() });
        }
    }
    let reduced = Game::path_game(net, &pairs, delays)?;
    Ok(MultiSourceReduction { game: reduced, source, links, big_m })
}

/// Group variant on a directed graph: player `i` may start anywhere in
/// `groups[i]`. Adds a super-terminal per player with zero-cost arcs into
/// its group; returns the new network and `(source, terminal)` pairs.
pub fn reduce_groups(net: &Network, source: usize, groups: &[Vec<usize>]) -> Result<(Network, Vec<(usize, usize)>)> {
    if !net.directed {
        return Err(Error::Unsupported("group terminals need a directed graph".into()));
    }
    let mut out = Network { n: net.n + groups.len(), directed: true, edges: net.edges.clone() };
    let mut pairs = Vec::new();
    for (i, group) in groups.iter().enumerate() {
        let t = net.n + i;
        if group.is_empty() {
            return Err(Error::InvalidInput(format!("group {i} is empty")));
        }
        for &v in group {
            if v >= net.n {
                return Err(Error::InvalidInput(format!("group {i} vertex {v} out of range")));
            }
            out.add_edge(t, v, Rational::zero());
        }
        pairs.push((source, t));
    }
    Ok((out, pairs))
}

/// Initial profile for the single-source transform. Undirected: minimum
/// spanning tree of the metric closure on the source and the terminals,
/// expanded and turned into a tree (at most twice the optimum). Directed:
/// the union of shortest terminal-to-source paths.
pub fn approx_steiner_tree(game: &Game) -> Result<Profile> {
    let s = common_source(game)?;
    if !game.is_fixed_cost() {
        return Err(Error::Unsupported("needs fixed edge costs".into()));
    }
    let net = game.graph.as_ref().unwrap();
    let cost = |e: usize| Some(net.cost(e).clone());
    let terms = terminals(game);
    let mut union = BTreeSet::new();
    if net.directed {
        let labels = dijkstra_all(net, s, true, &cost);
        for (i, &t) in terms.iter().enumerate() {
            let l =
                labels[t].as_ref().ok_or_else(|| Error::Disconnected(format!("player {i} cannot reach the source")))?;
            union.extend(l.edges.iter().copied());
        }
    } else {
        let mut nodes: Vec<usize> = terms.clone();
        nodes.push(s);
        nodes.sort_unstable();
        nodes.dedup();
        let labels: BTreeMap<usize, Vec<Option<PathResult>>> =
            nodes.iter().map(|&v| (v, dijkstra_all(net, v, false, &cost))).collect();
        let mut in_tree = BTreeSet::from([s]);
        while in_tree.len() < nodes.len() {
            let mut best: Option<(Rational, usize, usize)> = None;
            for &a in &in_tree {
                for &b in &nodes {
                    if in_tree.contains(&b) {
                        continue;
                    }
                    if let Some(l) = &labels[&a][b] {
                        if best.as_ref().is_none_or(|(c, _, _)| l.cost < *c) {
                            best = Some((l.cost.clone(), a, b));
                        }
                    }
                }
            }
            let (_, a, b) = best.ok_or_else(|| Error::Disconnected("a terminal cannot reach the source".into()))?;
            union.extend(labels[&a][b].as_ref().unwrap().edges.iter().copied());
            in_tree.insert(b);
        }
    }
    let labels = dijkstra_all(net, s, true, &|e| union.contains(&e).then(|| net.cost(e).clone()));
    let choices = terms
        .iter()
        .map(|&t| labels[t].as_ref().map(|l| l.edges.iter().copied().collect()))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Disconnected("a terminal cannot reach the source".into()))?;
    Ok(Profile::new(choices))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn game(n: usize, edges: &[(usize, usize, i64)], s: usize, terms: &[usize]) -> Game {
        let mut g = Network::new(n, false);
        for &(u, v, c) in edges {
            g.add_edge(u, v, Rational::from(c));
        }
        let pairs: Vec<_> = terms.iter().map(|&t| (s, t)).collect();
        Game::path_game(g, &pairs, vec![]).unwrap()
    }

    #[test]
    fn cycle_becomes_a_tree() {
        // s=0, t1=1, t2=2; cycle 0-1 (3), 1-2 (4), 2-0 (3).
        let g = game(3, &[(0, 1, 3), (1, 2, 4), (2, 0, 3)], 0, &[1, 2]);
        let p = Profile::from_lists(&[&[1, 2], &[0, 1]]);
        let t = to_tree_profile(&g, &p).unwrap();
        assert_eq!(t, Profile::from_lists(&[&[0], &[2]]));
        assert_eq!(g.total_cost(&t).unwrap(), Rational::from(6));
    }

    #[test]
    fn no_players_is_a_no_op() {
        let g = game(2, &[(0, 1, 4)], 0, &[]);
        let out = transform_single_source(&g, &Profile::new(vec![])).unwrap();
        assert_eq!(g.total_cost(&out.profile).unwrap(), Rational::zero());
        assert!(out.pne_ok && out.budget_ok);
    }

    #[test]
    fn tree_input_is_unchanged() {
        let g = game(4, &[(0, 1, 1), (1, 2, 1), (1, 3, 1), (0, 3, 5)], 0, &[2, 3]);
        let p = Profile::from_lists(&[&[0, 1], &[0, 2]]);
        assert_eq!(to_tree_profile(&g, &p).unwrap(), p);
    }

    #[test]
    fn star_keeps_every_leaf_edge() {
        let g = game(4, &[(0, 1, 2), (0, 2, 3), (0, 3, 4)], 0, &[1, 2, 3]);
        let p = Profile::from_lists(&[&[0], &[1], &[2]]);
        let out = transform_single_source(&g, &p).unwrap();
        assert_eq!(out.profile, p);
        assert!(out.pne_ok && out.budget_ok);
        assert_eq!(out.protocol.table.share(1, 1), Rational::from(3));
    }

    #[test]
    fn expensive_trunk_is_bypassed() {
        // s=0, hub 1, terminals 2 and 3. Trunk 0-1 costs 10, leaves 1-2 and
        // 1-3 are free, each terminal has a private bypass of cost 4.
        let g = game(4, &[(0, 1, 10), (1, 2, 0), (1, 3, 0), (2, 0, 4), (3, 0, 4)], 0, &[2, 3]);
        let p = Profile::from_lists(&[&[0, 1], &[0, 2]]);
        let out = transform_single_source(&g, &p).unwrap();
        assert_eq!(g.total_cost(&out.profile).unwrap(), Rational::from(8));
        assert_eq!(out.replacements, 1);
        assert!(out.tree_costs[1] < out.tree_costs[0]);
        assert!(out.pne_ok && out.budget_ok && out.aux_single_payer);
    }

    #[test]
    fn bypass_at_exactly_the_edge_cost_keeps_the_player() {
        let g = game(3, &[(0, 1, 4), (1, 2, 0), (2, 0, 4)], 0, &[2]);
        let p = Profile::from_lists(&[&[0, 1]]);
        let t = to_tree_profile(&g, &p).unwrap();
        let mut st = AuxiliaryGraph::new(&g, &t).unwrap();
        st.closed[2] = true;
        let c = st.max_contribution(0, 1).unwrap();
        assert_eq!(c, Contribution { delta: Rational::from(4), deviation: None });
    }

    #[test]
    fn cheaper_bypass_sets_the_contribution() {
        // Player pays 6 below the edge, edge costs 10, bypass from t costs 4.
        let g = game(3, &[(0, 1, 10), (1, 2, 6), (2, 0, 4)], 0, &[2]);
        let t = Profile::from_lists(&[&[0, 1]]);
        let mut st = AuxiliaryGraph::new(&g, &t).unwrap();
        st.closed[2] = true;
        st.shares.insert((0, 1), Rational::from(0));
        let c = st.max_contribution(0, 1).unwrap();
        assert_eq!(c, Contribution { delta: Rational::from(4), deviation: Some((2, 0)) });
    }

    #[test]
    fn no_bypass_means_full_contribution() {
        let g = game(3, &[(0, 1, 10), (1, 2, 6)], 0, &[2]);
        let t = Profile::from_lists(&[&[0, 1]]);
        let mut st = AuxiliaryGraph::new(&g, &t).unwrap();
        st.closed[2] = true;
        let c = st.max_contribution(0, 1).unwrap();
        assert_eq!(c, Contribution { delta: Rational::from(10), deviation: None });
    }

    #[test]
    fn expansion_overlap_is_charged_once() {
        let edges = [1, 2, 3];
        let verts = [5, 6, 7, 6];
        assert_eq!(shortcut(&edges, &verts), vec![1]);
        assert_eq!(shortcut(&[1, 2], &[0, 1, 2]), vec![1, 2]);
    }

    #[test]
    fn multi_source_reduction_adds_one_link_per_player() {
        let mut g = Network::new(3, false);
        g.add_edge(0, 1, Rational::from(2));
        g.add_edge(2, 1, Rational::from(3));
        let game = Game::path_game(g, &[(0, 1), (2, 1)], vec![]).unwrap();
        let r = reduce_multi_source(&game).unwrap();
        assert_eq!(r.links, vec![2, 3]);
        assert_eq!(r.big_m, Rational::from(6));
        assert_eq!(*r.game.delay(0, 3), Rational::from(6));
        assert!(r.game.delay(1, 3).is_zero());
        let p = Profile::from_lists(&[&[0], &[1]]);
        let lifted = r.lift(&p);
        assert_eq!(r.game.total_cost(&lifted).unwrap(), game.total_cost(&p).unwrap());
        assert_eq!(r.project(&lifted), p);
    }

    #[test]
    fn group_reduction_needs_a_directed_graph() {
        let g = Network::new(2, false);
        assert!(reduce_groups(&g, 0, &[vec![1]]).is_err());
        let mut g = Network::new(3, true);
        g.add_edge(1, 0, Rational::one());
        g.add_edge(2, 0, Rational::from(2));
        let (net, pairs) = reduce_groups(&g, 0, &[vec![1, 2]]).unwrap();
        assert_eq!(pairs, vec![(0, 3)]);
        let game = Game::path_game(net, &pairs, vec![]).unwrap();
        let p = approx_steiner_tree(&game).unwrap();
        assert_eq!(game.total_cost(&p).unwrap(), Rational::one());
    }

    #[test]
    fn steiner_star_is_exact() {
        let g = game(4, &[(0, 1, 1), (0, 2, 1), (0, 3, 1), (1, 2, 3), (2, 3, 3)], 0, &[1, 2, 3]);
        let p = approx_steiner_tree(&g).unwrap();
        assert_eq!(g.total_cost(&p).unwrap(), Rational::from(3));
        let only_source = game(2, &[(0, 1, 1)], 0, &[0]);
        let p = approx_steiner_tree(&only_source).unwrap();
        assert!(p.choices[0].is_empty());
    }
}
