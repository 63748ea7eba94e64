//! Exhaustive ground truth for small instances. Every search either covers
//! the whole space or fails with `BudgetExceeded`.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};

use crate::error::{Error, Result};
use crate::game::{Game, Profile, StrategySpace};
use crate::graph::{simple_paths, Network};
use crate::lp::{self, LinearProgram};
use crate::matroid::check_enforceable_matroid;
use crate::nsepa::{self, LpMode};
use crate::protocol::{private_cost, CostShareRule, Improvement};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationBudget {
    pub max_profiles: usize,
    pub max_paths_per_player: usize,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        EnumerationBudget { max_profiles: 1_000_000, max_paths_per_player: 10_000 }
    }
}

/// All bases (in lexicographic order) or all simple paths (DFS order over
/// sorted adjacency) of player `i`.
pub fn enumerate_strategies(game: &Game, i: usize, budget: &EnumerationBudget) -> Result<Vec<BTreeSet<usize>>> {
    let limit = budget.max_paths_per_player;
    match &game.spaces[i] {
        StrategySpace::Matroid(space) => {
            let ground = space.ground();
            let rk = space.rank();
            let mut out = Vec::new();
            let mut pick: Vec<usize> = (0..rk).collect();
            if rk > ground.len() {
                return Ok(out);
            }
            loop {
                let set: BTreeSet<usize> = pick.iter().map(|&k| ground[k]).collect();
                if space.is_independent(&set) {
                    out.push(set);
                    if out.len() > limit {
                        return Err(Error::BudgetExceeded(format!("player {i} has more than {limit} bases")));
                    }
                }
                // Next combination in lexicographic order.
                let mut k = rk;
                loop {
                    if k == 0 {
                        return Ok(out);
                    }
                    k -= 1;
                    if pick[k] < ground.len() - rk + k {
                        break;
                    }
                }
                pick[k] += 1;
                for l in k + 1..rk {
                    pick[l] = pick[l - 1] + 1;
                }
            }
        }
        StrategySpace::Path { .. } => {
            let (from, to) = game.path_endpoints(i).unwrap();
            let net = game.graph.as_ref().unwrap();
            let paths = simple_paths(net, from, to, limit)
                .ok_or_else(|| Error::BudgetExceeded(format!("player {i} has more than {limit} paths")))?;
            Ok(paths.into_iter().map(|p| p.into_iter().collect()).collect())
        }
    }
}

pub fn all_strategies(game: &Game, budget: &EnumerationBudget) -> Result<Vec<Vec<BTreeSet<usize>>>> {
    (0..game.n_players).map(|i| enumerate_strategies(game, i, budget)).collect()
}

fn profile_count(strategies: &[Vec<BTreeSet<usize>>]) -> Option<usize> {
    strategies.iter().try_fold(1usize, |acc, s| acc.checked_mul(s.len()))
}

fn check_budget(strategies: &[Vec<BTreeSet<usize>>], budget: &EnumerationBudget) -> Result<()> {
    match profile_count(strategies) {
        Some(c) if c <= budget.max_profiles => Ok(()),
        _ => Err(Error::BudgetExceeded(format!("more than {} profiles", budget.max_profiles))),
    }
}

/// Visits the product of strategy lists in lexicographic index order until
/// `f` returns `false`.
pub fn for_each_profile(
    strategies: &[Vec<BTreeSet<usize>>],
    mut f: impl FnMut(&Profile) -> Result<bool>,
) -> Result<()> {
    if strategies.iter().any(|s| s.is_empty()) {
        return Ok(());
    }
    let n = strategies.len();
    let mut idx = vec![0usize; n];
    let mut profile = Profile::new(strategies.iter().map(|s| s[0].clone()).collect());
    loop {
        if !f(&profile)? {
            return Ok(());
        }
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(());
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < strategies[k].len() {
                profile.choices[k] = strategies[k][idx[k]].clone();
                break;
            }
            idx[k] = 0;
            profile.choices[k] = strategies[k][0].clone();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Optimum {
    pub profile: Profile,
    pub cost: Rational,
    /// No other profile attains the same cost.
    pub unique: bool,
}

/// Exact minimiser of the total cost; the first optimum in enumeration
/// order is reported.
pub fn brute_force_optimum(game: &Game, budget: &EnumerationBudget) -> Result<Optimum> {
    let strategies = all_strategies(game, budget)?;
    check_budget(&strategies, budget)?;
    if strategies.iter().any(|s| s.is_empty()) {
        return Err(Error::InfeasibleProfile("some player has no strategy".into()));
    }
    if let Some(opt) = fast_optimum(game, &strategies) {
        return Ok(opt);
    }
    let mut best: Option<(Rational, Profile)> = None;
    let mut ties = 0usize;
    for_each_profile(&strategies, |p| {
        let c = game.total_cost_unchecked(p)?;
        match &best {
            Some((b, _)) if c > *b => {}
            Some((b, _)) if c == *b => ties += 1,
            _ => {
                best = Some((c, p.clone()));
                ties = 0;
            }
        }
        Ok(true)
    })?;
    let (cost, profile) = best.unwrap();
    Ok(Optimum { profile, cost, unique: ties == 0 })
}

/// Integer search for fixed costs: every value is scaled to a common
/// denominator and resource sets become bitmasks.
fn fast_optimum(game: &Game, strategies: &[Vec<BTreeSet<usize>>]) -> Option<Optimum> {
    let m = game.n_resources();
    if m > 128 || !game.is_fixed_cost() {
        return None;
    }
    let values = game.costs.iter().map(|c| c.fixed_value().unwrap()).chain(game.delays.iter().flatten());
    let mut lcm = BigInt::one();
    for v in values {
        lcm = lcm.lcm(v.denom());
    }
    let scale = |v: &Rational| -> Option<i128> { (v.numer() * (&lcm / v.denom())).to_i128() };
    let costs: Vec<i128> = game.costs.iter().map(|c| scale(c.fixed_value().unwrap())).collect::<Option<_>>()?;
    let mut masks = Vec::new();
    let mut delays = Vec::new();
    for (i, list) in strategies.iter().enumerate() {
        let mut mk = Vec::new();
        let mut dl = Vec::new();
        for s in list {
            mk.push(s.iter().fold(0u128, |acc, &e| acc | (1u128 << e)));
            let mut d = 0i128;
            for &e in s {
                d = d.checked_add(scale(game.delay(i, e))?)?;
            }
            dl.push(d);
        }
        masks.push(mk);
        delays.push(dl);
    }
    // Guard against overflow: the largest conceivable total must fit.
    let worst = costs.iter().try_fold(0i128, |a, &c| a.checked_add(c))?;
    let worst_delay = delays.iter().try_fold(0i128, |a, d| a.checked_add(*d.iter().max().unwrap()))?;
    worst.checked_add(worst_delay)?;

    struct Search<'a> {
        masks: &'a [Vec<u128>],
        delays: &'a [Vec<i128>],
        costs: &'a [i128],
        idx: Vec<usize>,
        best: Option<(i128, Vec<usize>)>,
        ties: usize,
    }
    fn go(s: &mut Search, k: usize, union: u128, acc: i128) {
        if k == s.masks.len() {
            match &s.best {
                Some((b, _)) if acc > *b => {}
                Some((b, _)) if acc == *b => s.ties += 1,
                _ => {
                    s.best = Some((acc, s.idx.clone()));
                    s.ties = 0;
                }
            }
            return;
        }
        for j in 0..s.masks[k].len() {
            let mask = s.masks[k][j];
            let mut add = s.delays[k][j];
            let mut fresh = mask & !union;
            while fresh != 0 {
                let e = fresh.trailing_zeros() as usize;
                add += s.costs[e];
                fresh &= fresh - 1;
            }
            s.idx[k] = j;
            go(s, k + 1, union | mask, acc + add);
        }
    }
    let mut s =
        Search { masks: &masks, delays: &delays, costs: &costs, idx: vec![0; masks.len()], best: None, ties: 0 };
    go(&mut s, 0, 0, 0);
    let (best, idx) = s.best?;
    let profile = Profile::new(idx.iter().enumerate().map(|(i, &j)| strategies[i][j].clone()).collect());
    let cost = Rational::from_big(BigInt::from(best), lcm).ok()?;
    Some(Optimum { profile, cost, unique: s.ties == 0 })
}

/// Path games: the LP over every simple path. Matroid games: D1/D2 with the
/// true deviation costs.
pub fn brute_force_enforceable(game: &Game, profile: &Profile, budget: &EnumerationBudget) -> Result<bool> {
    if game.is_path_game() {
        Ok(nsepa::is_enforceable(game, profile, LpMode::FullPaths { limit: budget.max_paths_per_player })?.enforceable)
    } else if game.is_matroid_game() {
        Ok(check_enforceable_matroid(game, profile, false)?.ok)
    } else {
        Err(Error::Unsupported("mixed strategy spaces".into()))
    }
}

/// Generic enforceability LP: shares on the profile, capacity rows, and one
/// deviation row per alternative strategy of every player, where a
/// deviator pays the full cost of every resource it newly joins.
pub fn enforceable_by_exhaustive_lp(game: &Game, profile: &Profile, budget: &EnumerationBudget) -> Result<bool> {
    game.check_profile(profile)?;
    let occ = profile.occupancy(game.n_resources());
    let mut var = BTreeMap::new();
    for (i, s) in profile.choices.iter().enumerate() {
        for &e in s {
            let k = var.len();
            var.insert((i, e), k);
        }
    }
    let mut prog = LinearProgram::new(var.len());
    for c in prog.objective.iter_mut() {
        *c = Rational::one();
    }
    let mut required = Rational::zero();
    for (e, users) in occ.iter().enumerate() {
        if users.is_empty() {
            continue;
        }
        let c = game.cost(e, users)?;
        required += &c;
        let row: Vec<_> = users.iter().map(|&i| (var[&(i, e)], Rational::one())).collect();
        prog.add_row(&row, c);
    }
    for i in 0..game.n_players {
        let cur = &profile.choices[i];
        for alt in enumerate_strategies(game, i, budget)? {
            if &alt == cur {
                continue;
            }
            let mut rhs = Rational::zero();
            for &e in alt.difference(cur) {
                let mut with_i = occ[e].clone();
                with_i.insert(i);
                rhs += game.cost(e, &with_i)? + game.delay(i, e);
            }
            let mut row = Vec::new();
            for &e in cur.difference(&alt) {
                rhs -= game.delay(i, e);
                row.push((var[&(i, e)], Rational::one()));
            }
            prog.add_row(&row, rhs);
        }
    }
    Ok(matches!(lp::solve(&prog), lp::Solution::Optimal { objective, .. } if objective == required))
}

/// Tries every unilateral deviation from `base` under `rule`.
pub fn brute_force_pne(
    game: &Game,
    rule: &dyn CostShareRule,
    base: &Profile,
    budget: &EnumerationBudget,
) -> Result<Option<Improvement>> {
    for i in 0..game.n_players {
        let old = private_cost(game, rule, base, i)?;
        for alt in enumerate_strategies(game, i, budget)? {
            let dev = base.with_choice(i, alt.clone());
            let new = private_cost(game, rule, &dev, i)?;
            if new < old {
                return Ok(Some(Improvement {
                    player: i,
                    deviation: alt.into_iter().collect(),
                    old_cost: old,
                    new_cost: new,
                }));
            }
        }
    }
    Ok(None)
}

/// Cheapest tree connecting `terminals` in an undirected network: the best
/// minimum spanning tree over every set of extra Steiner vertices.
pub fn brute_force_steiner_tree(net: &Network, terminals: &BTreeSet<usize>) -> Result<Rational> {
    if net.directed {
        return Err(Error::Unsupported("Steiner search needs an undirected graph".into()));
    }
    if terminals.len() <= 1 {
        return Ok(Rational::zero());
    }
    let others: Vec<usize> = (0..net.n).filter(|v| !terminals.contains(v)).collect();
    if others.len() > 20 {
        return Err(Error::BudgetExceeded(format!("{} candidate Steiner vertices", others.len())));
    }
    let mut best: Option<Rational> = None;
    for mask in 0u32..(1u32 << others.len()) {
        let mut keep = terminals.clone();
        for (k, &v) in others.iter().enumerate() {
            if mask >> k & 1 == 1 {
                keep.insert(v);
            }
        }
        if let Some(c) = induced_mst(net, &keep) {
            if best.as_ref().is_none_or(|b| c < *b) {
                best = Some(c);
            }
        }
    }
    best.ok_or_else(|| Error::Disconnected("terminals are not connected".into()))
}

/// Kruskal on the subgraph induced by `keep`; `None` if it is disconnected.
fn induced_mst(net: &Network, keep: &BTreeSet<usize>) -> Option<Rational> {
    let mut edges: Vec<(&Rational, usize)> = net
        .edges
        .iter()
        .enumerate()
        .filter(|(_, e)| keep.contains(&e.u) && keep.contains(&e.v))
        .map(|(id, e)| (&e.cost, id))
        .collect();
    edges.sort();
    let mut parent: Vec<usize> = (0..net.n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    let mut total = Rational::zero();
    let mut joined = 0;
    for (c, id) in edges {
        let e = &net.edges[id];
        let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
        if a != b {
            parent[a] = b;
            total += c;
            joined += 1;
        }
    }
    (joined + 1 == keep.len()).then_some(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::CostFunction;
    use crate::matroid::{ufl_game, MatroidSpace};

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    #[test]
    fn rank_one_strategies() {
        let g = ufl_game(&[r(1), r(2)], &[vec![r(0), r(0)]]).unwrap();
        let s = enumerate_strategies(&g, 0, &EnumerationBudget::default()).unwrap();
        assert_eq!(s, vec![BTreeSet::from([0]), BTreeSet::from([1])]);
    }

    #[test]
    fn triangle_paths() {
        let mut net = Network::new(3, false);
        net.add_edge(0, 1, r(1));
        net.add_edge(1, 2, r(1));
        net.add_edge(0, 2, r(1));
        let g = Game::path_game(net, &[(0, 2)], vec![]).unwrap();
        assert_eq!(enumerate_strategies(&g, 0, &EnumerationBudget::default()).unwrap().len(), 2);
    }

    #[test]
    fn graphic_bases_of_k4() {
        let edges = vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        let space = MatroidSpace::Graphic { ground: (0..6).collect(), edges };
        let g = Game::new(
            (0..6).map(|_| CostFunction::Fixed(r(1))).collect(),
            vec![vec![r(0); 6]],
            vec![StrategySpace::Matroid(space)],
            None,
        )
        .unwrap();
        // Cayley: 4^(4-2) spanning trees.
        assert_eq!(enumerate_strategies(&g, 0, &EnumerationBudget::default()).unwrap().len(), 16);
    }

    #[test]
    fn ufl_optimum_and_budget() {
        let g = ufl_game(&[r(10), r(3)], &[vec![r(0), r(0)], vec![r(0), r(0)]]).unwrap();
        let opt = brute_force_optimum(&g, &EnumerationBudget::default()).unwrap();
        assert_eq!(opt.profile, Profile::from_lists(&[&[1], &[1]]));
        assert_eq!(opt.cost, r(3));
        assert!(opt.unique);
        let tight = EnumerationBudget { max_profiles: 3, ..Default::default() };
        assert!(matches!(brute_force_optimum(&g, &tight), Err(Error::BudgetExceeded(_))));
    }

    #[test]
    fn fast_and_slow_optimum_agree() {
        let g = ufl_game(
            &[Rational::new(7, 2), r(3), Rational::new(5, 3)],
            &[vec![r(1), r(0), r(2)], vec![r(0), Rational::new(1, 2), r(1)], vec![r(2), r(2), r(0)]],
        )
        .unwrap();
        let strategies = all_strategies(&g, &EnumerationBudget::default()).unwrap();
        let fast = fast_optimum(&g, &strategies).unwrap();
        let mut best: Option<Rational> = None;
        for_each_profile(&strategies, |p| {
            let c = g.total_cost(p).unwrap();
            if best.as_ref().is_none_or(|b| c < *b) {
                best = Some(c);
            }
            Ok(true)
        })
        .unwrap();
        assert_eq!(Some(fast.cost.clone()), best);
        assert_eq!(g.total_cost(&fast.profile).unwrap(), fast.cost);
    }

    #[test]
    fn ties_are_reported() {
        let g = ufl_game(&[r(2), r(2)], &[vec![r(0), r(0)]]).unwrap();
        let opt = brute_force_optimum(&g, &EnumerationBudget::default()).unwrap();
        assert!(!opt.unique);
        assert_eq!(opt.profile, Profile::from_lists(&[&[0]]));
    }

    #[test]
    fn exhaustive_lp_matches_d1_d2_on_ufl() {
        let g = ufl_game(&[r(10), r(3)], &[vec![r(0), r(0)], vec![r(0), r(0)]]).unwrap();
        let b = EnumerationBudget::default();
        assert!(!enforceable_by_exhaustive_lp(&g, &Profile::from_lists(&[&[0], &[0]]), &b).unwrap());
        assert!(enforceable_by_exhaustive_lp(&g, &Profile::from_lists(&[&[1], &[1]]), &b).unwrap());
    }

    #[test]
    fn steiner_star() {
        let mut net = Network::new(4, false);
        for t in 1..4 {
            net.add_edge(0, t, r(1));
        }
        net.add_edge(1, 2, r(3));
        net.add_edge(2, 3, r(3));
        assert_eq!(brute_force_steiner_tree(&net, &BTreeSet::from([1, 2, 3])).unwrap(), r(3));
        assert_eq!(brute_force_steiner_tree(&net, &BTreeSet::from([2])).unwrap(), r(0));
    }
}
