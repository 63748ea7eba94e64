//! Matroid strategy spaces, the D1/D2 enforceability test and the packet
//! moving transform for subadditive costs.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{invariant, Error, Result};
use crate::game::{CostFunction, Game, Profile, StrategySpace};
use crate::protocol::{SeparableProtocol, SharingTable};
use crate::rational::Rational;
use crate::trace::TraceEvent;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatroidSpace {
    /// Any `rank` elements of `ground`.
    Uniform { ground: Vec<usize>, rank: usize },
    /// At most `quotas[k]` elements from `blocks[k]`.
    Partition { blocks: Vec<Vec<usize>>, quotas: Vec<usize> },
    /// `ground[k]` is the resource for graph edge `edges[k]`; independent
    /// sets are forests.
    Graphic { ground: Vec<usize>, edges: Vec<(usize, usize)> },
}

impl MatroidSpace {
    pub fn ground(&self) -> Vec<usize> {
        let mut g = match self {
            MatroidSpace::Uniform { ground, .. } | MatroidSpace::Graphic { ground, .. } => ground.clone(),
            MatroidSpace::Partition { blocks, .. } => blocks.iter().flatten().copied().collect(),
        };
        g.sort_unstable();
        g
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(Error::InvalidInput(s.to_string()));
        let ground = self.ground();
        if ground.windows(2).any(|w| w[0] == w[1]) {
            return bad("matroid ground set has duplicates");
        }
        match self {
            MatroidSpace::Uniform { ground, rank } if *rank > ground.len() => bad("uniform rank exceeds ground size"),
            MatroidSpace::Partition { blocks, quotas } if blocks.len() != quotas.len() => {
                bad("partition blocks and quotas differ in length")
            }
            MatroidSpace::Partition { blocks, quotas } if blocks.iter().zip(quotas).any(|(b, &q)| q > b.len()) => {
                bad("partition quota exceeds block size")
            }
            MatroidSpace::Graphic { ground, edges } if ground.len() != edges.len() => {
                bad("graphic ground and edges differ in length")
            }
            _ => Ok(()),
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            MatroidSpace::Uniform { rank, .. } => *rank,
            MatroidSpace::Partition { quotas, .. } => quotas.iter().sum(),
            MatroidSpace::Graphic { ground, .. } => {
                min_weight_basis(self, &|_| Rational::zero()).len().min(ground.len())
            }
        }
    }

    pub fn is_independent(&self, set: &BTreeSet<usize>) -> bool {
        match self {
            MatroidSpace::Uniform { ground, rank } => set.len() <= *rank && set.iter().all(|e| ground.contains(e)),
            MatroidSpace::Partition { blocks, quotas } => {
                let mut counted = 0;
                for (b, &q) in blocks.iter().zip(quotas) {
                    let k = b.iter().filter(|e| set.contains(e)).count();
                    if k > q {
                        return false;
                    }
                    counted += k;
                }
                counted == set.len()
            }
            MatroidSpace::Graphic { ground, edges } => {
                let nv = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
                let mut parent: Vec<usize> = (0..nv).collect();
                fn find(p: &mut [usize], x: usize) -> usize {
                    let mut x = x;
                    while p[x] != x {
                        p[x] = p[p[x]];
                        x = p[x];
                    }
                    x
                }
                for &e in set {
                    let Some(k) = ground.iter().position(|&g| g == e) else { return false };
                    let (u, v) = edges[k];
                    let (a, b) = (find(&mut parent, u), find(&mut parent, v));
                    if a == b {
                        return false;
                    }
                    parent[a] = b;
                }
                true
            }
        }
    }

    pub fn is_basis(&self, set: &BTreeSet<usize>) -> bool {
        set.len() == self.rank() && self.is_independent(set)
    }
}

/// Greedy minimum-weight basis; ties go to the smaller resource id.
pub fn min_weight_basis(space: &MatroidSpace, weight: &dyn Fn(usize) -> Rational) -> BTreeSet<usize> {
    let mut order: Vec<(Rational, usize)> = space.ground().into_iter().map(|e| (weight(e), e)).collect();
    order.sort();
    let mut basis = BTreeSet::new();
    for (_, e) in order {
        basis.insert(e);
        if !space.is_independent(&basis) {
            basis.remove(&e);
        }
    }
    basis
}

/// All `f` (including `e`) such that `B - e + f` is a basis.
pub fn exchange_candidates(space: &MatroidSpace, basis: &BTreeSet<usize>, e: usize) -> Result<Vec<usize>> {
    if !space.is_basis(basis) {
        return Err(Error::NotABasis(format!("{basis:?}")));
    }
    if !basis.contains(&e) {
        return Err(Error::NotInBasis(format!("{e} not in {basis:?}")));
    }
    let mut rest = basis.clone();
    rest.remove(&e);
    let mut out = Vec::new();
    for f in space.ground() {
        if f == e {
            out.push(f);
        } else if !basis.contains(&f) {
            rest.insert(f);
            if space.is_independent(&rest) {
                out.push(f);
            }
            rest.remove(&f);
        }
    }
    Ok(out)
}

fn matroid_of(game: &Game, i: usize) -> Result<&MatroidSpace> {
    match &game.spaces[i] {
        StrategySpace::Matroid(m) => Ok(m),
        _ => Err(Error::Unsupported(format!("player {i} does not have a matroid strategy space"))),
    }
}

/// `π_i^e = c_e({i}) + d_{i,e}`.
pub fn virtual_cost(game: &Game, i: usize, e: usize) -> Result<Rational> {
    Ok(game.costs[e].single(i)? + game.delay(i, e))
}

/// `Δ_i^e(B)` (true) or `Δ̄_i^e(B)` (virtual) for `e ∈ B_i`.
pub fn deviation_cost(game: &Game, b: &Profile, i: usize, e: usize, virtual_: bool) -> Result<Rational> {
    let space = matroid_of(game, i)?;
    let cands = exchange_candidates(space, &b.choices[i], e)?;
    let mut best: Option<Rational> = None;
    for f in cands {
        let v = if virtual_ {
            virtual_cost(game, i, f)?
        } else {
            let mut occ = b.users(f);
            occ.insert(i);
            game.cost(f, &occ)? + game.delay(i, f)
        };
        if best.as_ref().is_none_or(|b| v < *b) {
            best = Some(v);
        }
    }
    Ok(best.expect("exchange candidates always contain e"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    D1,
    D2,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub condition: Condition,
    pub resource: usize,
    pub player: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatroidReport {
    pub ok: bool,
    pub violated: Vec<Violation>,
}

/// D1: `d_{i,e} ≤ Δ_i^e(B)`; D2: `c_e(B) ≤ Σ_{i∈N_e(B)} (Δ_i^e(B) − d_{i,e})`.
pub fn check_enforceable_matroid(game: &Game, b: &Profile, virtual_: bool) -> Result<MatroidReport> {
    for i in 0..game.n_players {
        matroid_of(game, i)?;
    }
    game.check_profile(b)?;
    let occ = b.occupancy(game.n_resources());
    let mut violated = Vec::new();
    for (e, users) in occ.iter().enumerate() {
        if users.is_empty() {
            continue;
        }
        let mut slack = Rational::zero();
        for &i in users {
            let delta = deviation_cost(game, b, i, e, virtual_)?;
            if game.delay(i, e) > &delta {
                violated.push(Violation { condition: Condition::D1, resource: e, player: Some(i) });
            }
            slack += delta - game.delay(i, e);
        }
        if game.cost(e, users)? > slack {
            violated.push(Violation { condition: Condition::D2, resource: e, player: None });
        }
    }
    Ok(MatroidReport { ok: violated.is_empty(), violated })
}

#[derive(Debug, Clone)]
pub struct MatroidOutcome {
    pub profile: Profile,
    /// Passes through the outer while-loop.
    pub iterations: usize,
    /// Individual packet movements.
    pub moves: usize,
    /// `n · m · max_i rk_i`.
    pub bound: usize,
    pub trace: Vec<TraceEvent>,
}

fn best_swap(game: &Game, b: &Profile, i: usize, e: usize) -> Result<(usize, Rational)> {
    let space = matroid_of(game, i)?;
    let mut best: Option<(Rational, usize)> = None;
    for f in exchange_candidates(space, &b.choices[i], e)? {
        let pi = virtual_cost(game, i, f)?;
        if best.as_ref().is_none_or(|(v, g)| (&pi, f) < (v, *g)) {
            best = Some((pi, f));
        }
    }
    let (pi, f) = best.unwrap();
    Ok((f, pi))
}

struct Scan {
    e: usize,
    delay_violator: Option<usize>,
}

fn find_violation(game: &Game, b: &Profile) -> Result<Option<Scan>> {
    let occ = b.occupancy(game.n_resources());
    for (e, users) in occ.iter().enumerate() {
        if users.is_empty() {
            continue;
        }
        let mut delay_violator = None;
        let mut slack = Rational::zero();
        for &i in users {
            let dbar = deviation_cost(game, b, i, e, true)?;
            if delay_violator.is_none() && game.delay(i, e) > &dbar {
                delay_violator = Some(i);
            }
            slack += dbar - game.delay(i, e);
        }
        if delay_violator.is_some() || game.cost(e, users)? > slack {
            return Ok(Some(Scan { e, delay_violator }));
        }
    }
    Ok(None)
}

fn cost_violated(game: &Game, b: &Profile, e: usize) -> Result<bool> {
    let users = b.users(e);
    if users.is_empty() {
        return Ok(false);
    }
    let mut slack = Rational::zero();
    for &i in &users {
        slack += deviation_cost(game, b, i, e, true)? - game.delay(i, e);
    }
    Ok(game.cost(e, &users)? > slack)
}

/// Moves packets until the virtual D1/D2 conditions hold everywhere.
/// Resources, players and swap targets are always chosen smallest-id first.
pub fn transform_matroid(game: &Game, b: &Profile) -> Result<MatroidOutcome> {
    for i in 0..game.n_players {
        matroid_of(game, i)?;
    }
    game.check_profile(b)?;
    let n = game.n_players;
    let m = game.n_resources();
    let rk = (0..n).map(|i| matroid_of(game, i).map(|s| s.rank())).collect::<Result<Vec<_>>>()?;
    let bound = n * m * rk.iter().copied().max().unwrap_or(0);
    let mut cur = b.clone();
    let mut iterations = 0;
    let mut moves = 0;
    let mut trace = Vec::new();

    let apply_move = |cur: &mut Profile, i: usize, e: usize, moves: &mut usize| -> Result<Rational> {
        let (f, pi_f) = best_swap(game, cur, i, e)?;
        let pi_e = virtual_cost(game, i, e)?;
        invariant!(pi_e > pi_f, "packet of player {i} moved from {e} to {f} without lowering its virtual cost");
        cur.choices[i].remove(&e);
        cur.choices[i].insert(f);
        *moves += 1;
        Ok(pi_f)
    };

    while let Some(scan) = find_violation(game, &cur)? {
        iterations += 1;
        invariant!(iterations <= bound, "while-loop ran {iterations} times, bound is {bound}");
        let e = scan.e;
        let before = game.total_cost_unchecked(&cur)?;
        if let Some(i) = scan.delay_violator {
            apply_move(&mut cur, i, e, &mut moves)?;
            let after = game.total_cost_unchecked(&cur)?;
            invariant!(after < before, "delay move of player {i} off {e} did not lower cost");
            trace.push(TraceEvent::new("delay_move").player(i).resource(e).delta(after - before));
        } else {
            while cost_violated(game, &cur, e)? {
                let mut picked = None;
                for i in cur.users(e) {
                    if virtual_cost(game, i, e)? > deviation_cost(game, &cur, i, e, true)? {
                        picked = Some(i);
                        break;
                    }
                }
                let Some(i) = picked else {
                    return Err(Error::InternalInvariant(format!("no movable player on {e}")));
                };
                let step_before = game.total_cost_unchecked(&cur)?;
                apply_move(&mut cur, i, e, &mut moves)?;
                let step_after = game.total_cost_unchecked(&cur)?;
                trace.push(TraceEvent::new("cost_move").player(i).resource(e).delta(step_after - step_before));
            }
            let after = game.total_cost_unchecked(&cur)?;
            invariant!(after < before, "cost moves off {e} did not lower total cost");
        }
    }
    invariant!(moves <= bound, "{moves} packet moves exceed bound {bound}");
    Ok(MatroidOutcome { profile: cur, iterations, moves, bound, trace })
}

/// Shares filled player by player up to `Δ_i^e(B) − d_{i,e}`.
pub fn build_matroid_protocol(game: &Game, b: &Profile) -> Result<SeparableProtocol> {
    let report = check_enforceable_matroid(game, b, false)?;
    if !report.ok {
        return Err(Error::NotEnforceable(format!("violated: {:?}", report.violated)));
    }
    let mut table = SharingTable::new(b.clone());
    for (e, users) in b.occupancy(game.n_resources()).iter().enumerate() {
        if users.is_empty() {
            continue;
        }
        let mut remaining = game.cost(e, users)?;
        for &i in users {
            let cap = deviation_cost(game, b, i, e, false)? - game.delay(i, e);
            let pay = remaining.clone().min_of(cap);
            remaining -= &pay;
            table.set(i, e, pay);
        }
        invariant!(remaining.is_zero(), "resource {e} left {remaining} unpaid despite D2");
    }
    Ok(SeparableProtocol::new(table))
}

/// Facility location as a matroid game: every client picks one facility and
/// pays its distance as a delay.
pub fn ufl_game(opening: &[Rational], distance: &[Vec<Rational>]) -> Result<Game> {
    let m = opening.len();
    let space = MatroidSpace::Uniform { ground: (0..m).collect(), rank: 1 };
    Game::new(
        opening.iter().map(|c| CostFunction::Fixed(c.clone())).collect(),
        distance.to_vec(),
        vec![StrategySpace::Matroid(space); distance.len()],
        None,
    )
}
