//! Players, resources, cost functions, delays and profiles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{path_from_edges, Network};
use crate::matroid::MatroidSpace;
use crate::rational::Rational;

pub type PlayerSet = BTreeSet<usize>;

/// A set function on players. Implementations need not be validated; the
/// wrapping [`CostFunction`] checks the values it actually sees.
pub trait CostOracle: Send + Sync + fmt::Debug {
    fn value(&self, players: &PlayerSet) -> Result<Rational>;
    fn to_json(&self) -> serde_json::Value;
}

/// Explicit table of values keyed by player set.
#[derive(Debug, Clone)]
pub struct TableCost {
    pub table: BTreeMap<PlayerSet, Rational>,
}

impl CostOracle for TableCost {
    fn value(&self, players: &PlayerSet) -> Result<Rational> {
        self.table
            .get(players)
            .cloned()
            .ok_or_else(|| Error::InvalidCostOracle(format!("no table entry for {players:?}")))
    }

    fn to_json(&self) -> serde_json::Value {
        let map: serde_json::Map<_, _> =
            self.table.iter().map(|(k, v)| (player_set_key(k), serde_json::Value::String(v.to_string()))).collect();
        serde_json::json!({ "subadditive_table": map })
    }
}

/// `c(S) = g(|S|)` with `values[k-1] = g(k)`.
#[derive(Debug, Clone)]
pub struct ConcaveCost {
    pub values: Vec<Rational>,
}

impl CostOracle for ConcaveCost {
    fn value(&self, players: &PlayerSet) -> Result<Rational> {
        self.values
            .get(players.len() - 1)
            .cloned()
            .ok_or_else(|| Error::InvalidCostOracle(format!("no value for {} players", players.len())))
    }

    fn to_json(&self) -> serde_json::Value {
        let vals: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
        serde_json::json!({ "concave": vals })
    }
}

/// Comma-separated sorted ids, e.g. `"0,2"`.
pub fn player_set_key(s: &PlayerSet) -> String {
    s.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

pub fn parse_player_set_key(key: &str) -> Result<PlayerSet> {
    let key = key.trim();
    if key.is_empty() {
        return Ok(PlayerSet::new());
    }
    key.split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad player set key {key:?}"))))
        .collect()
}

/// Oracle plus a cache of every value handed out so far.
pub struct SubadditiveCost {
    oracle: Arc<dyn CostOracle>,
    cache: Mutex<BTreeMap<PlayerSet, Rational>>,
}

impl SubadditiveCost {
    pub fn new(oracle: Arc<dyn CostOracle>) -> Self {
        SubadditiveCost { oracle, cache: Mutex::new(BTreeMap::new()) }
    }

    pub fn oracle(&self) -> &Arc<dyn CostOracle> {
        &self.oracle
    }

    fn eval(&self, s: &PlayerSet) -> Result<Rational> {
        let mut cache = self.cache.lock().expect("cost cache poisoned");
        if let Some(v) = cache.get(s) {
            return Ok(v.clone());
        }
        let v = self.oracle.value(s)?;
        if v.is_negative() {
            return Err(Error::InvalidCostOracle(format!("negative cost {v} for {s:?}")));
        }
        check_against_cache(&cache, s, &v)?;
        cache.insert(s.clone(), v.clone());
        Ok(v)
    }
}

fn check_against_cache(cache: &BTreeMap<PlayerSet, Rational>, s: &PlayerSet, v: &Rational) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidCostOracle(msg));
    for (t, w) in cache {
        if t.is_subset(s) && w > v {
            return bad(format!("c({t:?})={w} > c({s:?})={v}"));
        }
        if s.is_subset(t) && v > w {
            return bad(format!("c({s:?})={v} > c({t:?})={w}"));
        }
    }
    // S = T + i with T and {i} known.
    if s.len() >= 2 {
        for &i in s {
            let single = PlayerSet::from([i]);
            let mut rest = s.clone();
            rest.remove(&i);
            if let (Some(a), Some(b)) = (cache.get(&rest), cache.get(&single)) {
                if v > &(a + b) {
                    return bad(format!("c({s:?})={v} > c({rest:?}) + c({{{i}}})"));
                }
            }
        }
    }
    // S = T - i, or S = {i} joining some cached pair.
    for (t, w) in cache {
        if t.len() == s.len() + 1 && s.is_subset(t) {
            let i = *t.difference(s).next().unwrap();
            let single = PlayerSet::from([i]);
            let vi = if *s == single { Some(v.clone()) } else { cache.get(&single).cloned() };
            if let Some(vi) = vi {
                if w > &(v + &vi) {
                    return bad(format!("c({t:?})={w} > c({s:?}) + c({{{i}}})"));
                }
            }
        }
    }
    if s.len() == 1 {
        let i = *s.iter().next().unwrap();
        for (t, w) in cache {
            if t.contains(&i) || t.is_empty() {
                continue;
            }
            let mut bigger = t.clone();
            bigger.insert(i);
            if let Some(wb) = cache.get(&bigger) {
                if wb > &(w + v) {
                    return bad(format!("c({bigger:?})={wb} > c({t:?}) + c({{{i}}})"));
                }
            }
        }
    }
    Ok(())
}

impl Clone for SubadditiveCost {
    fn clone(&self) -> Self {
        let cache = self.cache.lock().expect("cost cache poisoned").clone();
        SubadditiveCost { oracle: Arc::clone(&self.oracle), cache: Mutex::new(cache) }
    }
}

impl fmt::Debug for SubadditiveCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Subadditive({:?})", self.oracle)
    }
}

#[derive(Debug, Clone)]
pub enum CostFunction {
    /// `c(S) = v` for every nonempty `S`.
    Fixed(Rational),
    Subadditive(SubadditiveCost),
}

impl CostFunction {
    pub fn subadditive(oracle: impl CostOracle + 'static) -> Self {
        CostFunction::Subadditive(SubadditiveCost::new(Arc::new(oracle)))
    }

    pub fn table(table: BTreeMap<PlayerSet, Rational>) -> Self {
        Self::subadditive(TableCost { table })
    }

    /// `c(S)`, with `c(∅) = 0`.
    pub fn eval(&self, s: &PlayerSet) -> Result<Rational> {
        if s.is_empty() {
            return Ok(Rational::zero());
        }
        match self {
            CostFunction::Fixed(v) => Ok(v.clone()),
            CostFunction::Subadditive(c) => c.eval(s),
        }
    }

    pub fn single(&self, i: usize) -> Result<Rational> {
        self.eval(&PlayerSet::from([i]))
    }

    pub fn fixed_value(&self) -> Option<&Rational> {
        match self {
            CostFunction::Fixed(v) => Some(v),
            CostFunction::Subadditive(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StrategySpace {
    Matroid(MatroidSpace),
    /// Simple paths between the two vertices. In a directed graph the path
    /// runs from `terminal` to `source`.
    Path {
        source: usize,
        terminal: usize,
    },
}

/// One strategy per player, each a set of resource ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Profile {
    pub choices: Vec<BTreeSet<usize>>,
}

impl Profile {
    pub fn new(choices: Vec<BTreeSet<usize>>) -> Self {
        Profile { choices }
    }

    pub fn from_lists(lists: &[&[usize]]) -> Self {
        Profile { choices: lists.iter().map(|l| l.iter().copied().collect()).collect() }
    }

    pub fn n_players(&self) -> usize {
        self.choices.len()
    }

    pub fn uses(&self, i: usize, e: usize) -> bool {
        self.choices[i].contains(&e)
    }

    /// `N_e(S)`.
    pub fn users(&self, e: usize) -> PlayerSet {
        (0..self.choices.len()).filter(|&i| self.choices[i].contains(&e)).collect()
    }

    /// `N_e(S)` for every resource `0..m`.
    pub fn occupancy(&self, m: usize) -> Vec<PlayerSet> {
        let mut occ = vec![PlayerSet::new(); m];
        for (i, c) in self.choices.iter().enumerate() {
            for &e in c {
                if e < m {
                    occ[e].insert(i);
                }
            }
        }
        occ
    }

    pub fn used_resources(&self) -> BTreeSet<usize> {
        self.choices.iter().flatten().copied().collect()
    }

    pub fn with_choice(&self, i: usize, choice: BTreeSet<usize>) -> Profile {
        let mut p = self.clone();
        p.choices[i] = choice;
        p
    }
}

#[derive(Debug, Clone)]
pub struct Game {
    pub n_players: usize,
    pub costs: Vec<CostFunction>,
    /// `delays[i][e]`.
    pub delays: Vec<Vec<Rational>>,
    pub spaces: Vec<StrategySpace>,
    pub graph: Option<Network>,
}

impl Game {
    /// Builds and validates a game.
    pub fn new(
        costs: Vec<CostFunction>,
        delays: Vec<Vec<Rational>>,
        spaces: Vec<StrategySpace>,
        graph: Option<Network>,
    ) -> Result<Game> {
        let game = Game { n_players: spaces.len(), costs, delays, spaces, graph };
        game.validate()?;
        Ok(game)
    }

    /// A connection game on `net`: resources are the edges, costs are the
    /// fixed edge costs. `delays` may be empty for all-zero delays.
    pub fn path_game(net: Network, pairs: &[(usize, usize)], delays: Vec<Vec<Rational>>) -> Result<Game> {
        let m = net.edges.len();
        let delays = if delays.is_empty() { vec![vec![Rational::zero(); m]; pairs.len()] } else { delays };
        let costs = net.edges.iter().map(|e| CostFunction::Fixed(e.cost.clone())).collect();
        let spaces = pairs.iter().map(|&(s, t)| StrategySpace::Path { source: s, terminal: t }).collect();
        Game::new(costs, delays, spaces, Some(net))
    }

    pub fn n_resources(&self) -> usize {
        self.costs.len()
    }

    fn validate(&self) -> Result<()> {
        let m = self.n_resources();
        let bad = |s: String| Err(Error::InvalidInput(s));
        if self.delays.len() != self.n_players {
            return bad(format!("expected {} delay rows, got {}", self.n_players, self.delays.len()));
        }
        for (i, row) in self.delays.iter().enumerate() {
            if row.len() != m {
                return bad(format!("delay row {i} has {} entries, expected {m}", row.len()));
            }
            if let Some(d) = row.iter().find(|d| d.is_negative()) {
                return bad(format!("negative delay {d} for player {i}"));
            }
        }
        for (e, c) in self.costs.iter().enumerate() {
            if let CostFunction::Fixed(v) = c {
                if v.is_negative() {
                    return bad(format!("negative cost on resource {e}"));
                }
            }
        }
        for (i, space) in self.spaces.iter().enumerate() {
            match space {
                StrategySpace::Matroid(mat) => {
                    if let Some(&e) = mat.ground().iter().find(|&&e| e >= m) {
                        return bad(format!("player {i} ground element {e} out of range"));
                    }
                    mat.validate()?;
                }
                StrategySpace::Path { source, terminal } => {
                    let Some(g) = &self.graph else {
                        return bad(format!("player {i} has a path space but there is no graph"));
                    };
                    if *source >= g.n || *terminal >= g.n {
                        return bad(format!("player {i} endpoints out of range"));
                    }
                }
            }
        }
        if let Some(g) = &self.graph {
            if g.edges.len() != m {
                return bad(format!("graph has {} edges but game has {m} resources", g.edges.len()));
            }
            for (e, edge) in g.edges.iter().enumerate() {
                if edge.cost.is_negative() {
                    return bad(format!("negative cost on edge {e}"));
                }
                if edge.u == edge.v {
                    return bad(format!("edge {e} is a self-loop"));
                }
            }
        }
        Ok(())
    }

    pub fn delay(&self, i: usize, e: usize) -> &Rational {
        &self.delays[i][e]
    }

    pub fn cost(&self, e: usize, s: &PlayerSet) -> Result<Rational> {
        self.costs[e].eval(s)
    }

    pub fn is_fixed_cost(&self) -> bool {
        self.costs.iter().all(|c| c.fixed_value().is_some())
    }

    pub fn has_zero_delays(&self) -> bool {
        self.delays.iter().flatten().all(|d| d.is_zero())
    }

    pub fn is_path_game(&self) -> bool {
        self.graph.is_some() && self.spaces.iter().all(|s| matches!(s, StrategySpace::Path { .. }))
    }

    pub fn is_matroid_game(&self) -> bool {
        self.spaces.iter().all(|s| matches!(s, StrategySpace::Matroid(_)))
    }

    /// `(from, to)` of player `i`'s path in traversal order.
    pub fn path_endpoints(&self, i: usize) -> Option<(usize, usize)> {
        match (&self.spaces[i], &self.graph) {
            (StrategySpace::Path { source, terminal }, Some(g)) => {
                Some(if g.directed { (*terminal, *source) } else { (*source, *terminal) })
            }
            _ => None,
        }
    }

    pub fn is_feasible(&self, i: usize, choice: &BTreeSet<usize>) -> bool {
        match &self.spaces[i] {
            StrategySpace::Matroid(m) => m.is_basis(choice),
            StrategySpace::Path { .. } => {
                let (from, to) = self.path_endpoints(i).unwrap();
                path_from_edges(self.graph.as_ref().unwrap(), choice, from, to).is_some()
            }
        }
    }

    pub fn check_profile(&self, p: &Profile) -> Result<()> {
        if p.n_players() != self.n_players {
            return Err(Error::InfeasibleProfile(format!(
                "profile has {} strategies for {} players",
                p.n_players(),
                self.n_players
            )));
        }
        for (i, c) in p.choices.iter().enumerate() {
            if !self.is_feasible(i, c) {
                return Err(Error::InfeasibleProfile(format!("strategy of player {i} is infeasible: {c:?}")));
            }
        }
        Ok(())
    }

    /// Player `i`'s path as an ordered edge list and vertex list.
    pub fn ordered_path(&self, i: usize, choice: &BTreeSet<usize>) -> Result<(Vec<usize>, Vec<usize>)> {
        let (from, to) =
            self.path_endpoints(i).ok_or_else(|| Error::Unsupported(format!("player {i} has no path space")))?;
        path_from_edges(self.graph.as_ref().unwrap(), choice, from, to)
            .ok_or_else(|| Error::InfeasibleProfile(format!("strategy of player {i} is not a path")))
    }

    /// `C(S) = Σ_e c_e(N_e(S)) + Σ_i Σ_{e∈S_i} d_{i,e}`.
    pub fn total_cost(&self, p: &Profile) -> Result<Rational> {
        self.check_profile(p)?;
        self.total_cost_unchecked(p)
    }

    pub(crate) fn total_cost_unchecked(&self, p: &Profile) -> Result<Rational> {
        let mut total = Rational::zero();
        for (e, users) in p.occupancy(self.n_resources()).iter().enumerate() {
            if !users.is_empty() {
                total += self.cost(e, users)?;
            }
        }
        for (i, c) in p.choices.iter().enumerate() {
            for &e in c {
                total += self.delay(i, e);
            }
        }
        Ok(total)
    }

    /// Total shareable cost of the used resources, `Σ_e c_e(N_e(S))`.
    pub fn shareable_cost(&self, p: &Profile) -> Result<Rational> {
        let mut total = Rational::zero();
        for (e, users) in p.occupancy(self.n_resources()).iter().enumerate() {
            if !users.is_empty() {
                total += self.cost(e, users)?;
            }
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    fn one_resource_game(c: i64, d: i64) -> Game {
        let space = MatroidSpace::Uniform { ground: vec![0], rank: 1 };
        Game::new(vec![CostFunction::Fixed(r(c))], vec![vec![r(d)]], vec![StrategySpace::Matroid(space)], None).unwrap()
    }

    #[test]
    fn single_term_cost() {
        let g = one_resource_game(5, 2);
        assert_eq!(g.total_cost(&Profile::from_lists(&[&[0]])).unwrap(), r(7));
    }

    #[test]
    fn empty_game_costs_nothing() {
        let g = Game::new(vec![CostFunction::Fixed(r(3))], vec![], vec![], None).unwrap();
        assert_eq!(g.total_cost(&Profile::new(vec![])).unwrap(), r(0));
    }

    #[test]
    fn infeasible_profile_is_rejected() {
        let g = one_resource_game(5, 2);
        assert!(matches!(g.total_cost(&Profile::from_lists(&[&[]])), Err(Error::InfeasibleProfile(_))));
    }

    #[test]
    fn shared_resource_counted_once() {
        let space = MatroidSpace::Uniform { ground: vec![0, 1], rank: 1 };
        let g = Game::new(
            vec![CostFunction::Fixed(r(10)), CostFunction::Fixed(r(3))],
            vec![vec![r(1), r(0)], vec![r(2), r(0)]],
            vec![StrategySpace::Matroid(space.clone()), StrategySpace::Matroid(space)],
            None,
        )
        .unwrap();
        assert_eq!(g.total_cost(&Profile::from_lists(&[&[0], &[0]])).unwrap(), r(13));
        assert_eq!(g.total_cost(&Profile::from_lists(&[&[0], &[1]])).unwrap(), r(14));
    }

    #[test]
    fn table_oracle_violations_are_caught() {
        let mut table = BTreeMap::new();
        table.insert(PlayerSet::from([0]), r(2));
        table.insert(PlayerSet::from([1]), r(2));
        table.insert(PlayerSet::from([0, 1]), r(5));
        let c = CostFunction::table(table);
        assert_eq!(c.eval(&PlayerSet::from([0])).unwrap(), r(2));
        assert_eq!(c.eval(&PlayerSet::from([1])).unwrap(), r(2));
        assert!(matches!(c.eval(&PlayerSet::from([0, 1])), Err(Error::InvalidCostOracle(_))));
    }

    #[test]
    fn monotonicity_violation_is_caught_in_either_order() {
        let mut table = BTreeMap::new();
        table.insert(PlayerSet::from([0]), r(4));
        table.insert(PlayerSet::from([0, 1]), r(3));
        let c = CostFunction::table(table.clone());
        c.eval(&PlayerSet::from([0, 1])).unwrap();
        assert!(c.eval(&PlayerSet::from([0])).is_err());
        let c = CostFunction::table(table);
        c.eval(&PlayerSet::from([0])).unwrap();
        assert!(c.eval(&PlayerSet::from([0, 1])).is_err());
    }

    #[test]
    fn concave_costs_evaluate_by_size() {
        let c = CostFunction::subadditive(ConcaveCost { values: vec![r(4), r(6), r(7)] });
        assert_eq!(c.eval(&PlayerSet::from([2])).unwrap(), r(4));
        assert_eq!(c.eval(&PlayerSet::from([0, 2])).unwrap(), r(6));
        assert_eq!(c.eval(&PlayerSet::new()).unwrap(), r(0));
    }

    #[test]
    fn player_set_keys_round_trip() {
        let s = PlayerSet::from([3, 0, 7]);
        assert_eq!(player_set_key(&s), "0,3,7");
        assert_eq!(parse_player_set_key("0,3,7").unwrap(), s);
        assert!(parse_player_set_key("0,x").is_err());
    }
}
