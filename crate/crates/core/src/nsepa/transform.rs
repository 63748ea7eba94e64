//! Turning a profile into an enforceable one by substituting unpaid edges
//! with smallest tight alternatives.

use std::collections::{BTreeMap, BTreeSet};

use super::alternatives::{alternatives, smallest_tight_alternative, substituted_cost};
use super::structure::is_n_series_parallel;
use super::{build_lp, fixed_cost, LpMode};
use crate::error::{invariant, Error, Result};
use crate::game::{Game, Profile};
use crate::lp::{solve, Solution};
use crate::protocol::{SeparableProtocol, SharingTable};
use crate::rational::Rational;
use crate::trace::TraceEvent;

#[derive(Debug, Clone)]
pub struct NsepaOutcome {
    pub profile: Profile,
    pub protocol: SeparableProtocol,
    /// The LP optimum of the profile the phases started from.
    pub lp_value: Rational,
    pub input_enforceable: bool,
    pub phases: usize,
    /// Number of distinct edges in the starting profile; bounds `phases`.
    pub phase_bound: usize,
    /// Substitutions done before the LP became feasible.
    pub pre_repairs: usize,
    pub substitutions: usize,
    pub trace: Vec<TraceEvent>,
}

struct State<'a> {
    game: &'a Game,
    paths: Vec<Vec<usize>>,
    verts: Vec<Vec<usize>>,
    share: BTreeMap<(usize, usize), Rational>,
}

impl State<'_> {
    fn profile(&self) -> Profile {
        Profile::new(self.paths.iter().map(|p| p.iter().copied().collect()).collect())
    }

    fn private(&self, i: usize) -> Rational {
        self.paths[i].iter().map(|&e| &self.share[&(i, e)] + self.game.delay(i, e)).sum()
    }

    fn paid(&self, e: usize) -> Rational {
        (0..self.paths.len()).filter_map(|i| self.share.get(&(i, e))).sum()
    }
}

/// Pre: every `G_i` series-parallel and `p` feasible. Returns a profile no
/// more expensive than `p` and a protocol enforcing it.
pub fn nsepa_transform(game: &Game, p: &Profile) -> Result<NsepaOutcome> {
    if !game.is_path_game() || !game.is_fixed_cost() {
        return Err(Error::Unsupported("needs a connection game with fixed costs".into()));
    }
    if !is_n_series_parallel(game) {
        return Err(Error::NotSeriesParallel("some G_i is not two-terminal series-parallel".into()));
    }
    game.check_profile(p)?;
    let input_cost = game.total_cost(p)?;
    let mut trace = Vec::new();

    // While some detour beats the path even for free, take it.
    let mut current = p.clone();
    let mut pre_repairs = 0;
    let (inst, values, lp_value) = loop {
        let inst = build_lp(game, &current, LpMode::Alternatives)?;
        match solve(&inst.lp) {
            Solution::Optimal { values, objective } => break (inst, values, objective),
            Solution::Unbounded => return Err(Error::InternalInvariant("enforceability LP is unbounded".into())),
            Solution::Infeasible => {}
        }
        let before = game.total_cost(&current)?;
        let mut repaired = false;
        'players: for i in 0..game.n_players {
            let (path, verts) = game.ordered_path(i, &current.choices[i])?;
            for alt in alternatives(game, i, &path, &verts)? {
                let free = substituted_cost(game, &alt, &|_| Rational::zero());
                if alt.weight < free {
                    let (edges, _) = alt.apply(&path, &verts);
                    current = current.with_choice(i, edges.into_iter().collect());
                    let after = game.total_cost(&current)?;
                    invariant!(after < before, "pre-repair of player {i} did not lower the cost");
                    trace.push(TraceEvent::new("pre_repair").player(i).delta(after - &before));
                    pre_repairs += 1;
                    repaired = true;
                    break 'players;
                }
            }
        }
        invariant!(repaired, "LP infeasible but no detour is cheaper than its delays");
    };
    trace.push(TraceEvent::new("lp_solved").delta(lp_value.clone()));
    let input_enforceable = pre_repairs == 0 && lp_value == inst.required;

    let mut state = State { game, paths: Vec::new(), verts: Vec::new(), share: BTreeMap::new() };
    for i in 0..game.n_players {
        let (path, verts) = game.ordered_path(i, &current.choices[i])?;
        state.paths.push(path);
        state.verts.push(verts);
    }
    for (k, &(i, e)) in inst.vars.iter().enumerate() {
        state.share.insert((i, e), values[k].clone());
    }
    let phase_bound = current.used_resources().len();
    let mut dropped: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); game.n_players];
    let mut phases = 0;
    let mut substitutions = 0;

    loop {
        let profile = state.profile();
        let mut unpaid = BTreeSet::new();
        for e in profile.used_resources() {
            if state.paid(e) < fixed_cost(game, e)? {
                unpaid.insert(e);
            }
        }
        if unpaid.is_empty() {
            break;
        }
        phases += 1;
        invariant!(phases <= phase_bound, "more than {phase_bound} phases");
        trace.push(TraceEvent::new("phase").delta(Rational::from(phases)));
        let dropped_before = dropped.clone();
        for i in 0..game.n_players {
            let before = state.private(i);
            let mut adopted = BTreeSet::new();
            loop {
                let target = state.paths[i].iter().copied().find(|e| unpaid.contains(e) && !adopted.contains(e));
                let Some(f) = target else { break };
                let share_i = |e: usize| state.share[&(i, e)].clone();
                let alt = smallest_tight_alternative(game, i, &state.paths[i], &state.verts[i], &share_i, f)?;
                let (edges, verts) = alt.apply(&state.paths[i], &state.verts[i]);
                for &e in &alt.substituted {
                    state.share.remove(&(i, e));
                    dropped[i].insert(e);
                }
                for &e in &alt.path {
                    invariant!(!dropped_before[i].contains(&e), "player {i} re-adopts edge {e}");
                    state.share.insert((i, e), fixed_cost(game, e)?);
                    adopted.insert(e);
                }
                state.paths[i] = edges;
                state.verts[i] = verts;
                substitutions += 1;
                trace.push(TraceEvent::new("substitute").player(i).resource(f).delta(Rational::zero()));
            }
            invariant!(state.private(i) == before, "private cost of player {i} changed within a phase");
        }
    }

    let profile = state.profile();
    game.check_profile(&profile)?;
    let mut table = SharingTable::new(profile.clone());
    for (e, users) in profile.occupancy(game.n_resources()).iter().enumerate() {
        if users.is_empty() {
            continue;
        }
        let mut excess = state.paid(e) - fixed_cost(game, e)?;
        invariant!(!excess.is_negative(), "edge {e} is still underpaid");
        if excess.is_positive() {
            trace.push(TraceEvent::new("reduce_overpaid").resource(e).delta(-excess.clone()));
        }
        for &i in users.iter().rev() {
            let s = state.share.get_mut(&(i, e)).unwrap();
            let cut = Rational::min_of(s.clone(), excess.clone());
            *s -= &cut;
            excess -= &cut;
        }
        for &i in users {
            table.set(i, e, state.share[&(i, e)].clone());
        }
    }
    let output_cost = game.total_cost(&profile)?;
    invariant!(output_cost <= input_cost, "output cost {output_cost} exceeds input cost {input_cost}");
    if !input_enforceable {
        invariant!(output_cost < input_cost, "input was not enforceable but the cost did not drop");
    } else {
        invariant!(profile == *p, "enforceable input was changed");
    }
    Ok(NsepaOutcome {
        profile,
        protocol: SeparableProtocol::new(table),
        lp_value,
        input_enforceable,
        phases,
        phase_bound,
        pre_repairs,
        substitutions,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Network;
    use crate::protocol::{verify_budget_balance, verify_pne};

    #[test]
    fn moves_to_the_cheaper_parallel_edge() {
        let mut g = Network::new(2, false);
        g.add_edge(0, 1, Rational::from(5));
        g.add_edge(0, 1, Rational::from(3));
        let game = Game::path_game(g, &[(0, 1)], vec![]).unwrap();
        let out = nsepa_transform(&game, &Profile::from_lists(&[&[0]])).unwrap();
        assert_eq!(out.profile, Profile::from_lists(&[&[1]]));
        assert_eq!(game.total_cost(&out.profile).unwrap(), Rational::from(3));
        assert_eq!(out.phases, 1);
        assert!(verify_pne(&game, &out.protocol).unwrap().ok);
    }

    #[test]
    fn enforceable_input_is_kept() {
        let mut g = Network::new(3, false);
        g.add_edge(0, 1, Rational::from(2));
        g.add_edge(1, 2, Rational::from(2));
        g.add_edge(0, 2, Rational::from(9));
        let game = Game::path_game(g, &[(0, 2), (0, 2)], vec![]).unwrap();
        let p = Profile::from_lists(&[&[0, 1], &[0, 1]]);
        let out = nsepa_transform(&game, &p).unwrap();
        assert!(out.input_enforceable);
        assert_eq!(out.profile, p);
        assert_eq!(out.phases, 0);
        assert!(verify_budget_balance(&game, &out.protocol, &p).unwrap().ok);
    }

    #[test]
    fn underpaid_trunk_is_abandoned() {
        // Shared trunk 0-1 of cost 10; each player has a private bypass of
        // weight 4 via a delay-free parallel edge.
        let mut g = Network::new(2, false);
        g.add_edge(0, 1, Rational::from(10));
        g.add_edge(0, 1, Rational::from(4));
        g.add_edge(0, 1, Rational::from(4));
        let inf = Rational::from(100);
        let delays =
            vec![vec![Rational::zero(), Rational::zero(), inf.clone()], vec![Rational::zero(), inf, Rational::zero()]];
        let game = Game::path_game(g, &[(0, 1), (0, 1)], delays).unwrap();
        let p = Profile::from_lists(&[&[0], &[0]]);
        let out = nsepa_transform(&game, &p).unwrap();
        assert!(!out.input_enforceable);
        assert_eq!(game.total_cost(&out.profile).unwrap(), Rational::from(8));
        assert!(verify_pne(&game, &out.protocol).unwrap().ok);
        assert!(verify_budget_balance(&game, &out.protocol, &out.profile).unwrap().ok);
    }

    #[test]
    fn rejects_non_series_parallel_graphs() {
        let (game, opt) = crate::nsepa::counterexample_fixture();
        let err = nsepa_transform(&game, &opt).unwrap_err();
        assert!(matches!(err, Error::NotSeriesParallel(_)));
    }
}
