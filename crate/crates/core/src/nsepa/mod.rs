//! Connection games with delays on n-series-parallel graphs: the
//! enforceability LP, cheapest alternatives and the share-driven
//! transformation.

mod alternatives;
mod fixture;
mod structure;
mod transform;

use std::collections::{BTreeMap, BTreeSet};

pub use alternatives::{alternatives, smallest_tight_alternative, substituted_cost, Alternative};
pub use fixture::{counterexample_fixture, FIXTURE_LABELS};
pub use structure::{irredundant, is_n_series_parallel, is_two_terminal_sp, player_subgraph, Irredundant};
pub use transform::{nsepa_transform, NsepaOutcome};

use crate::error::{Error, Result};
use crate::game::{Game, Profile};
use crate::graph::simple_paths;
use crate::lp::{solve, LinearProgram, Solution};
use crate::protocol::SharingTable;
use crate::rational::Rational;

/// Which deviations produce the NE rows of the LP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpMode {
    /// One row per cheapest alternative; needs an n-series-parallel graph.
    Alternatives,
    /// One row per simple path of each player, up to `limit` paths each.
    FullPaths { limit: usize },
}

#[derive(Debug, Clone)]
pub struct LpInstance {
    pub lp: LinearProgram,
    /// `(player, edge)` of each variable.
    pub vars: Vec<(usize, usize)>,
    /// Total cost of the used edges, the most the objective can reach.
    pub required: Rational,
}

#[derive(Debug, Clone)]
pub struct EnforceReport {
    pub enforceable: bool,
    /// `None` if the LP is infeasible (some deviation is cheaper even when
    /// the player pays nothing).
    pub lp_value: Option<Rational>,
    pub shares: Option<SharingTable>,
}

pub(crate) fn fixed_cost(game: &Game, e: usize) -> Result<Rational> {
    game.costs[e].fixed_value().cloned().ok_or_else(|| Error::Unsupported("needs fixed edge costs".into()))
}

fn check_input(game: &Game, p: &Profile) -> Result<()> {
    if !game.is_path_game() {
        return Err(Error::Unsupported("needs a connection game".into()));
    }
    if !game.is_fixed_cost() {
        return Err(Error::Unsupported("needs fixed edge costs".into()));
    }
    game.check_profile(p)
}

/// `max Σ ξ_{i,e}` subject to capacity rows `Σ_{i∈N_e} ξ_{i,e} ≤ c_e` and one
/// NE row per deviation.
pub fn build_lp(game: &Game, p: &Profile, mode: LpMode) -> Result<LpInstance> {
    check_input(game, p)?;
    let net = game.graph.as_ref().unwrap();
    let mut vars = Vec::new();
    let mut index = BTreeMap::new();
    for (i, choice) in p.choices.iter().enumerate() {
        for &e in choice {
            index.insert((i, e), vars.len());
            vars.push((i, e));
        }
    }
    let mut lp = LinearProgram::new(vars.len());
    for x in lp.objective.iter_mut() {
        *x = Rational::one();
    }
    let mut required = Rational::zero();
    for (e, users) in p.occupancy(game.n_resources()).iter().enumerate() {
        if users.is_empty() {
            continue;
        }
        let c = fixed_cost(game, e)?;
        required += &c;
        let coeffs: Vec<_> = users.iter().map(|&i| (index[&(i, e)], Rational::one())).collect();
        lp.add_row(&coeffs, c);
    }
    // Row for a deviation replacing `old` by `new`: Σ_old ξ ≤ Σ_new (c+d) − Σ_old d.
    let ne_row = |lp: &mut LinearProgram, i: usize, old: &[usize], new: &[usize]| -> Result<()> {
        let mut rhs = Rational::zero();
        for &e in new {
            rhs += fixed_cost(game, e)? + game.delay(i, e);
        }
        for &e in old {
            rhs -= game.delay(i, e);
        }
        let coeffs: Vec<_> = old.iter().map(|&e| (index[&(i, e)], Rational::one())).collect();
        lp.add_row(&coeffs, rhs);
        Ok(())
    };
    for i in 0..game.n_players {
        match mode {
            LpMode::Alternatives => {
                let (path, verts) = game.ordered_path(i, &p.choices[i])?;
                for alt in alternatives(game, i, &path, &verts)? {
                    ne_row(&mut lp, i, &alt.substituted, &alt.path)?;
                }
            }
            LpMode::FullPaths { limit } => {
                let (from, to) = game.path_endpoints(i).unwrap();
                let paths = simple_paths(net, from, to, limit).ok_or(Error::TooManyPaths { player: i, limit })?;
                for q in paths {
                    let q: BTreeSet<usize> = q.into_iter().collect();
                    if q == p.choices[i] {
                        continue;
                    }
                    let old: Vec<usize> = p.choices[i].difference(&q).copied().collect();
                    let new: Vec<usize> = q.difference(&p.choices[i]).copied().collect();
                    ne_row(&mut lp, i, &old, &new)?;
                }
            }
        }
    }
    Ok(LpInstance { lp, vars, required })
}

/// `P` is enforceable iff the LP optimum pays every used edge in full.
pub fn is_enforceable(game: &Game, p: &Profile, mode: LpMode) -> Result<EnforceReport> {
    let inst = build_lp(game, p, mode)?;
    match solve(&inst.lp) {
        Solution::Optimal { values, objective } => {
            let enforceable = objective == inst.required;
            let shares = enforceable.then(|| {
                let mut table = SharingTable::new(p.clone());
                for (k, &(i, e)) in inst.vars.iter().enumerate() {
                    table.set(i, e, values[k].clone());
                }
                table
            });
            Ok(EnforceReport { enforceable, lp_value: Some(objective), shares })
        }
        Solution::Infeasible => Ok(EnforceReport { enforceable: false, lp_value: None, shares: None }),
        Solution::Unbounded => Err(Error::InternalInvariant("enforceability LP is unbounded".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Network;

    fn parallel(costs: &[i64]) -> Game {
        let mut g = Network::new(2, false);
        for &c in costs {
            g.add_edge(0, 1, Rational::from(c));
        }
        Game::path_game(g, &[(0, 1)], vec![]).unwrap()
    }

    #[test]
    fn lone_edge_is_paid_in_full() {
        let g = parallel(&[5]);
        let p = Profile::from_lists(&[&[0]]);
        let r = is_enforceable(&g, &p, LpMode::Alternatives).unwrap();
        assert!(r.enforceable);
        assert_eq!(r.lp_value, Some(Rational::from(5)));
        assert_eq!(r.shares.unwrap().share(0, 0), Rational::from(5));
    }

    #[test]
    fn cheaper_parallel_edge_caps_the_share() {
        let g = parallel(&[5, 3]);
        let p = Profile::from_lists(&[&[0]]);
        for mode in [LpMode::Alternatives, LpMode::FullPaths { limit: 10 }] {
            let r = is_enforceable(&g, &p, mode).unwrap();
            assert!(!r.enforceable);
            assert_eq!(r.lp_value, Some(Rational::from(3)));
            assert!(r.shares.is_none());
        }
    }

    #[test]
    fn large_delay_on_the_path_makes_the_lp_infeasible() {
        let mut g = Network::new(2, false);
        g.add_edge(0, 1, Rational::from(1));
        g.add_edge(0, 1, Rational::from(1));
        let delays = vec![vec![Rational::from(9), Rational::zero()]];
        let game = Game::path_game(g, &[(0, 1)], delays).unwrap();
        let p = Profile::from_lists(&[&[0]]);
        let r = is_enforceable(&game, &p, LpMode::Alternatives).unwrap();
        assert!(!r.enforceable);
        assert_eq!(r.lp_value, None);
    }

    #[test]
    fn full_paths_respects_the_limit() {
        let g = parallel(&[1, 1, 1]);
        let p = Profile::from_lists(&[&[0]]);
        let err = build_lp(&g, &p, LpMode::FullPaths { limit: 2 }).unwrap_err();
        assert_eq!(err, Error::TooManyPaths { player: 0, limit: 2 });
    }
}
