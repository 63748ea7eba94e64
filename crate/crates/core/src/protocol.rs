//! Separable cost-sharing protocols: a base profile with a share table,
//! extended to every other profile by the case rule.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};

use serde::Serialize;

use crate::error::{invariant, Error, Result};
use crate::game::{Game, PlayerSet, Profile, StrategySpace};
use crate::graph::dijkstra_all;
use crate::matroid::min_weight_basis;
use crate::oracle;
use crate::rational::Rational;

/// Shares `ξ_{i,e}` on a base profile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharingTable {
    pub base: Profile,
    pub shares: BTreeMap<(usize, usize), Rational>,
}

impl SharingTable {
    pub fn new(base: Profile) -> Self {
        SharingTable { base, shares: BTreeMap::new() }
    }

    pub fn share(&self, i: usize, e: usize) -> Rational {
        self.shares.get(&(i, e)).cloned().unwrap_or_default()
    }

    /// Zero entries are dropped so equal tables compare equal.
    pub fn set(&mut self, i: usize, e: usize, v: Rational) {
        if v.is_zero() {
            self.shares.remove(&(i, e));
        } else {
            self.shares.insert((i, e), v);
        }
    }

    /// Shares must be nonnegative and sit on base resources only.
    pub fn check_shape(&self) -> Result<()> {
        for (&(i, e), v) in &self.shares {
            if v.is_negative() {
                return Err(Error::InvalidInput(format!("negative share {v} for player {i} on {e}")));
            }
            if i >= self.base.n_players() || !self.base.uses(i, e) {
                return Err(Error::InvalidInput(format!("share for player {i} on {e} outside the base profile")));
            }
        }
        Ok(())
    }
}

/// Anything that assigns a cost share to every (profile, player, resource).
pub trait CostShareRule {
    fn cost_share(&self, game: &Game, profile: &Profile, i: usize, e: usize) -> Result<Rational>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparableProtocol {
    pub table: SharingTable,
}

impl SeparableProtocol {
    pub fn new(table: SharingTable) -> Self {
        SeparableProtocol { table }
    }

    pub fn base(&self) -> &Profile {
        &self.table.base
    }

    /// Share under the case rule, using the occupancies only.
    pub fn share_for(&self, game: &Game, current: &PlayerSet, i: usize, e: usize) -> Result<Rational> {
        if !current.contains(&i) {
            return Ok(Rational::zero());
        }
        let base = self.table.base.users(e);
        if *current == base {
            return Ok(self.table.share(i, e));
        }
        let payer = match current.difference(&base).next() {
            Some(&newcomer) => newcomer,
            None => *current.iter().next().unwrap(),
        };
        if i == payer {
            game.cost(e, current)
        } else {
            Ok(Rational::zero())
        }
    }
}

impl CostShareRule for SeparableProtocol {
    fn cost_share(&self, game: &Game, profile: &Profile, i: usize, e: usize) -> Result<Rational> {
        self.share_for(game, &profile.users(e), i, e)
    }
}

/// Equal split of `c_e(N_e)` among the users.
#[derive(Debug, Clone, Copy, Default)]
pub struct FairShare;

impl CostShareRule for FairShare {
    fn cost_share(&self, game: &Game, profile: &Profile, i: usize, e: usize) -> Result<Rational> {
        let users = profile.users(e);
        if !users.contains(&i) {
            return Ok(Rational::zero());
        }
        Ok(game.cost(e, &users)? / Rational::from(users.len()))
    }
}

/// Charges the whole cost to a user picked by hashing the entire profile.
/// Budget balanced but not separable; used to exercise the verifier.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProfileHashRule;

impl CostShareRule for ProfileHashRule {
    fn cost_share(&self, game: &Game, profile: &Profile, i: usize, e: usize) -> Result<Rational> {
        let users: Vec<usize> = profile.users(e).into_iter().collect();
        if !users.contains(&i) {
            return Ok(Rational::zero());
        }
        let mut h = DefaultHasher::new();
        profile.hash(&mut h);
        let payer = users[(h.finish() % users.len() as u64) as usize];
        if i == payer {
            game.cost(e, &profile.users(e))
        } else {
            Ok(Rational::zero())
        }
    }
}

/// `ξ_i(S) = Σ_{e∈S_i} (ξ_{i,e}(S) + d_{i,e})`.
pub fn private_cost(game: &Game, rule: &dyn CostShareRule, profile: &Profile, i: usize) -> Result<Rational> {
    game.check_profile(profile)?;
    let mut total = Rational::zero();
    for &e in &profile.choices[i] {
        total += rule.cost_share(game, profile, i, e)?;
        total += game.delay(i, e);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BudgetViolation {
    pub resource: usize,
    pub paid: Rational,
    pub required: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BudgetReport {
    pub ok: bool,
    pub violations: Vec<BudgetViolation>,
}

/// Shares on every used resource sum to its cost; unused resources collect nothing.
pub fn verify_budget_balance(game: &Game, protocol: &SeparableProtocol, profile: &Profile) -> Result<BudgetReport> {
    game.check_profile(profile)?;
    let occ = profile.occupancy(game.n_resources());
    let mut violations = Vec::new();
    for (e, users) in occ.iter().enumerate() {
        let mut paid = Rational::zero();
        for i in 0..game.n_players {
            paid += protocol.share_for(game, users, i, e)?;
        }
        let required = game.cost(e, users)?;
        if paid != required {
            violations.push(BudgetViolation { resource: e, paid, required });
        }
    }
    // Table entries for non-users would be silently ignored by the rule;
    // flag them since they mean the table does not describe this profile.
    if profile == &protocol.table.base {
        for (&(i, e), v) in &protocol.table.shares {
            if !profile.uses(i, e) && !v.is_zero() && !violations.iter().any(|x| x.resource == e) {
                violations.push(BudgetViolation { resource: e, paid: v.clone(), required: game.cost(e, &occ[e])? });
            }
        }
    }
    Ok(BudgetReport { ok: violations.is_empty(), violations })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Improvement {
    pub player: usize,
    pub deviation: Vec<usize>,
    pub old_cost: Rational,
    pub new_cost: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PneReport {
    pub ok: bool,
    pub improving: Option<Improvement>,
}

/// Per-resource price player `i` faces when deviating from the base: its
/// share plus delay on base resources, full cost plus delay elsewhere.
fn deviation_weights(game: &Game, protocol: &SeparableProtocol, i: usize) -> Result<Vec<Rational>> {
    let base = protocol.base();
    let occ = base.occupancy(game.n_resources());
    let mut w = Vec::with_capacity(game.n_resources());
    for e in 0..game.n_resources() {
        let price = if base.uses(i, e) {
            protocol.table.share(i, e)
        } else {
            let mut with_i = occ[e].clone();
            with_i.insert(i);
            game.cost(e, &with_i)?
        };
        w.push(price + game.delay(i, e));
    }
    Ok(w)
}

/// Checks every player's best response against the base profile.
pub fn verify_pne(game: &Game, protocol: &SeparableProtocol) -> Result<PneReport> {
    let base = protocol.base();
    game.check_profile(base)?;
    for i in 0..game.n_players {
        let w = deviation_weights(game, protocol, i)?;
        let current: Rational = base.choices[i].iter().map(|&e| &w[e]).sum();
        let best: BTreeSet<usize> = match &game.spaces[i] {
            StrategySpace::Matroid(m) => min_weight_basis(m, &|e| w[e].clone()),
            StrategySpace::Path { .. } => {
                let (from, to) = game.path_endpoints(i).unwrap();
                let net = game.graph.as_ref().unwrap();
                let labels = dijkstra_all(net, from, false, &|e| Some(w[e].clone()));
                let p = labels[to].as_ref().ok_or_else(|| Error::Disconnected(format!("player {i} has no path")))?;
                p.edges.iter().copied().collect()
            }
        };
        let best_cost: Rational = best.iter().map(|&e| &w[e]).sum();
        if best_cost < current {
            let deviated = base.with_choice(i, best.clone());
            let realized = private_cost(game, protocol, &deviated, i)?;
            invariant!(realized == best_cost, "deviation price {best_cost} differs from the case rule's {realized}");
            return Ok(PneReport {
                ok: false,
                improving: Some(Improvement {
                    player: i,
                    deviation: best.into_iter().collect(),
                    old_cost: current,
                    new_cost: best_cost,
                }),
            });
        }
    }
    Ok(PneReport { ok: true, improving: None })
}

/// Enumerates every profile and checks that shares only depend on the
/// per-resource occupancy. Fails with `TooLarge` beyond `bound` profiles.
pub fn verify_separability_bruteforce(game: &Game, rule: &dyn CostShareRule, bound: usize) -> Result<bool> {
    let budget = oracle::EnumerationBudget { max_profiles: bound, ..Default::default() };
    let strategies = oracle::all_strategies(game, &budget)?;
    let total = strategies.iter().try_fold(1usize, |acc, s| acc.checked_mul(s.len()));
    match total {
        Some(t) if t <= bound => {}
        _ => return Err(Error::TooLarge(format!("more than {bound} profiles"))),
    }
    let mut seen: BTreeMap<(usize, PlayerSet), Vec<Rational>> = BTreeMap::new();
    let mut separable = true;
    oracle::for_each_profile(&strategies, |profile| {
        for e in 0..game.n_resources() {
            let users = profile.users(e);
            let shares =
                (0..game.n_players).map(|i| rule.cost_share(game, profile, i, e)).collect::<Result<Vec<_>>>()?;
            match seen.get(&(e, users.clone())) {
                Some(prev) if *prev != shares => {
                    separable = false;
                    return Ok(false);
                }
                Some(_) => {}
                None => {
                    seen.insert((e, users), shares);
                }
            }
        }
        Ok(true)
    })?;
    Ok(separable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::CostFunction;
    use crate::matroid::MatroidSpace;

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    /// Rank-1 game over `m` resources with fixed costs and zero delays.
    fn rank_one(n: usize, costs: &[i64]) -> Game {
        let m = costs.len();
        let space = MatroidSpace::Uniform { ground: (0..m).collect(), rank: 1 };
        Game::new(
            costs.iter().map(|&c| CostFunction::Fixed(r(c))).collect(),
            vec![vec![r(0); m]; n],
            vec![StrategySpace::Matroid(space); n],
            None,
        )
        .unwrap()
    }

    fn table(base: Profile, entries: &[(usize, usize, i64)]) -> SeparableProtocol {
        let mut t = SharingTable::new(base);
        for &(i, e, v) in entries {
            t.set(i, e, r(v));
        }
        SeparableProtocol::new(t)
    }

    #[test]
    fn case_rule_on_base_uses_table() {
        let g = rank_one(3, &[10, 4]);
        let base = Profile::from_lists(&[&[1], &[0], &[0]]);
        let p = table(base.clone(), &[(0, 1, 4), (1, 0, 3), (2, 0, 7)]);
        assert_eq!(p.cost_share(&g, &base, 1, 0).unwrap(), r(3));
        assert_eq!(p.cost_share(&g, &base, 2, 0).unwrap(), r(7));
        assert_eq!(p.cost_share(&g, &base, 0, 0).unwrap(), r(0));
    }

    #[test]
    fn newcomer_with_smallest_index_pays_all() {
        let g = rank_one(3, &[10, 4]);
        let base = Profile::from_lists(&[&[1], &[0], &[1]]);
        let p = table(base, &[(0, 1, 2), (1, 0, 10), (2, 1, 2)]);
        let dev = Profile::from_lists(&[&[0], &[0], &[0]]);
        assert_eq!(p.cost_share(&g, &dev, 0, 0).unwrap(), r(10));
        assert_eq!(p.cost_share(&g, &dev, 1, 0).unwrap(), r(0));
        assert_eq!(p.cost_share(&g, &dev, 2, 0).unwrap(), r(0));
    }

    #[test]
    fn smallest_remaining_user_pays_on_strict_subset() {
        let g = rank_one(3, &[10, 4]);
        let base = Profile::from_lists(&[&[0], &[0], &[0]]);
        let p = table(base, &[(0, 0, 3), (1, 0, 3), (2, 0, 4)]);
        let dev = Profile::from_lists(&[&[1], &[0], &[0]]);
        assert_eq!(p.cost_share(&g, &dev, 1, 0).unwrap(), r(10));
        assert_eq!(p.cost_share(&g, &dev, 2, 0).unwrap(), r(0));
    }

    #[test]
    fn budget_balance_detects_underpayment() {
        let g = rank_one(2, &[10, 4]);
        let base = Profile::from_lists(&[&[0], &[0]]);
        let good = table(base.clone(), &[(0, 0, 3), (1, 0, 7)]);
        assert!(verify_budget_balance(&g, &good, &base).unwrap().ok);
        let bad = table(base.clone(), &[(0, 0, 2), (1, 0, 7)]);
        let rep = verify_budget_balance(&g, &bad, &base).unwrap();
        assert!(!rep.ok);
        assert_eq!(rep.violations, vec![BudgetViolation { resource: 0, paid: r(9), required: r(10) }]);
    }

    #[test]
    fn private_costs_split_budget() {
        let g = rank_one(2, &[10, 4]);
        let base = Profile::from_lists(&[&[0], &[0]]);
        let p = table(base.clone(), &[(0, 0, 3), (1, 0, 7)]);
        assert_eq!(private_cost(&g, &p, &base, 0).unwrap(), r(3));
        assert_eq!(private_cost(&g, &p, &base, 1).unwrap(), r(7));
    }

    #[test]
    fn pne_check_finds_profitable_switch() {
        let g = rank_one(2, &[10, 4]);
        let base = Profile::from_lists(&[&[0], &[0]]);
        let p = table(base, &[(0, 0, 3), (1, 0, 7)]);
        let rep = verify_pne(&g, &p).unwrap();
        assert!(!rep.ok);
        let imp = rep.improving.unwrap();
        assert_eq!((imp.player, imp.deviation, imp.old_cost, imp.new_cost), (1, vec![1], r(7), r(4)));
        let p = table(Profile::from_lists(&[&[0], &[0]]), &[(0, 0, 4), (1, 0, 6)]);
        assert!(!verify_pne(&g, &p).unwrap().ok);
        let p = table(Profile::from_lists(&[&[0], &[0]]), &[(0, 0, 4), (1, 0, 4)]);
        assert!(verify_budget_balance(&g, &p, &p.table.base.clone()).map(|r| !r.ok).unwrap());
    }

    #[test]
    fn case_rule_is_separable_and_hash_rule_is_not() {
        let g = rank_one(2, &[3, 5]);
        let base = Profile::from_lists(&[&[0], &[0]]);
        let p = table(base, &[(0, 0, 1), (1, 0, 2)]);
        assert!(verify_separability_bruteforce(&g, &p, 100).unwrap());
        assert!(verify_separability_bruteforce(&g, &FairShare, 100).unwrap());
        let g3 = rank_one(3, &[3, 5, 7]);
        assert!(!verify_separability_bruteforce(&g3, &ProfileHashRule, 100).unwrap());
        assert!(matches!(verify_separability_bruteforce(&g3, &FairShare, 10), Err(Error::TooLarge(_))));
    }
}
