//! Seeded random instances. The same seed always gives the same instance.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::game::{CostFunction, Game, PlayerSet, Profile, StrategySpace};
use crate::graph::{shortest_path, simple_paths, Network};
use crate::matroid::{min_weight_basis, ufl_game, MatroidSpace};
use crate::rational::Rational;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn int(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Rational {
    Rational::from(rng.gen_range(lo..=hi))
}

/// Opening costs uniform in 1..=20, distances uniform in 0..=10. Every
/// client starts at a uniformly random facility.
pub fn ufl(players: usize, facilities: usize, seed: u64) -> Result<(Game, Profile)> {
    let mut r = rng(seed);
    let opening: Vec<_> = (0..facilities).map(|_| int(&mut r, 1, 20)).collect();
    let distance: Vec<Vec<_>> = (0..players).map(|_| (0..facilities).map(|_| int(&mut r, 0, 10)).collect()).collect();
    let game = ufl_game(&opening, &distance)?;
    let start = (0..players).map(|_| BTreeSet::from([r.gen_range(0..facilities)])).collect();
    Ok((game, Profile::new(start)))
}

fn random_subset(r: &mut ChaCha8Rng, m: usize, size: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..m).collect();
    all.shuffle(r);
    all.truncate(size);
    all.sort_unstable();
    all
}

fn random_space(r: &mut ChaCha8Rng, m: usize) -> MatroidSpace {
    match r.gen_range(0..3) {
        0 => {
            let size = r.gen_range(1..=m);
            MatroidSpace::Uniform { ground: random_subset(r, m, size), rank: r.gen_range(1..=size) }
        }
        1 => {
            let size = r.gen_range(1..=m);
            let ground = random_subset(r, m, size);
            let k = r.gen_range(1..=size.min(3));
            let mut blocks = vec![Vec::new(); k];
            for (j, &e) in ground.iter().enumerate() {
                // The first k resources seed the blocks so none is empty.
                let b = if j < k { j } else { r.gen_range(0..k) };
                blocks[b].push(e);
            }
            let quotas = blocks.iter().map(|b| r.gen_range(0..=b.len().min(2))).collect();
            MatroidSpace::Partition { blocks, quotas }
        }
        _ => {
            let size = r.gen_range(1..=m.min(6));
            let ground = random_subset(r, m, size);
            let nv = r.gen_range(2..=4);
            let edges = (0..size)
                .map(|_| {
                    let u = r.gen_range(0..nv);
                    let v = (u + r.gen_range(1..nv)) % nv;
                    (u, v)
                })
                .collect();
            MatroidSpace::Graphic { ground, edges }
        }
    }
}

/// `c(S) = min(Σ_{i∈S} w_i, cap)`, which is monotone and subadditive.
fn capped_table(r: &mut ChaCha8Rng, n: usize) -> CostFunction {
    let w: Vec<i64> = (0..n).map(|_| r.gen_range(1..=10)).collect();
    let cap = r.gen_range(1..=15);
    let mut table = BTreeMap::new();
    for mask in 1u32..(1 << n) {
        let s: PlayerSet = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        let sum: i64 = s.iter().map(|&i| w[i]).sum();
        table.insert(s, Rational::from(sum.min(cap)));
    }
    CostFunction::table(table)
}

/// Players in 1..=5 and resources in 1..=8. Each player gets a uniform,
/// partition or graphic matroid with equal odds. Costs are fixed in
/// 1..=10, or with `subadditive` set, a capped-sum table per resource with
/// probability 1/2. Delays are uniform in 0..=5. The start profile holds a
/// min-weight basis per player under uniform 0..=20 weights.
pub fn matroid(seed: u64, subadditive: bool) -> Result<(Game, Profile)> {
    let mut r = rng(seed);
    let n = r.gen_range(1..=5);
    let m = r.gen_range(1..=8);
    let costs = (0..m)
        .map(|_| {
            if subadditive && r.gen_bool(0.5) {
                capped_table(&mut r, n)
            } else {
                CostFunction::Fixed(int(&mut r, 1, 10))
            }
        })
        .collect();
    let delays = (0..n).map(|_| (0..m).map(|_| int(&mut r, 0, 5)).collect()).collect();
    let spaces: Vec<MatroidSpace> = (0..n).map(|_| random_space(&mut r, m)).collect();
    let mut choices = Vec::new();
    for sp in &spaces {
        let w: Vec<_> = (0..m).map(|_| int(&mut r, 0, 20)).collect();
        choices.push(min_weight_basis(sp, &|e| w[e].clone()));
    }
    let game = Game::new(costs, delays, spaces.into_iter().map(StrategySpace::Matroid).collect(), None)?;
    Ok((game, Profile::new(choices)))
}

/// Undirected connected graph on 2..=10 vertices: a random spanning tree
/// plus up to as many extra edges, costs uniform in 1..=10. One to four
/// players with distinct terminals, all rooted at vertex 0, no delays. Each
/// player starts on a shortest path under uniform 1..=10 edge weights.
pub fn tree(seed: u64) -> Result<(Game, Profile)> {
    let mut r = rng(seed);
    let nv = r.gen_range(2..=10);
    let mut net = Network::new(nv, false);
    for v in 1..nv {
        let u = r.gen_range(0..v);
        net.add_edge(u, v, int(&mut r, 1, 10));
    }
    for _ in 0..r.gen_range(0..nv) {
        let u = r.gen_range(0..nv);
        let v = r.gen_range(0..nv);
        if u != v {
            net.add_edge(u, v, int(&mut r, 1, 10));
        }
    }
    let n = r.gen_range(1..=4).min(nv - 1);
    let terminals = random_subset(&mut r, nv - 1, n);
    let pairs: Vec<_> = terminals.iter().map(|&t| (0, t + 1)).collect();
    let mut choices = Vec::new();
    for &(s, t) in &pairs {
        let w: Vec<_> = (0..net.edges.len()).map(|_| int(&mut r, 1, 10)).collect();
        let p = shortest_path(&net, s, t, &|e| Some(w[e].clone())).expect("graph is connected");
        choices.push(p.edges.into_iter().collect());
    }
    let game = Game::path_game(net, &pairs, vec![])?;
    Ok((game, Profile::new(choices)))
}

/// Two-terminal series-parallel graph from vertex 0 to 1: start with one
/// edge, then up to 11 times replace a uniformly chosen edge by two edges
/// in series or in parallel (equal odds). Costs uniform in 1..=10, delays
/// uniform in 0..=5. One to three players all connect 0 to 1 and start on
/// a uniformly random simple path.
pub fn series_parallel(seed: u64) -> Result<(Game, Profile)> {
    let mut r = rng(seed);
    let mut edges: Vec<(usize, usize)> = vec![(0, 1)];
    let mut nv = 2;
    let target = r.gen_range(1..=12);
    while edges.len() < target {
        let k = r.gen_range(0..edges.len());
        let (u, v) = edges[k];
        if r.gen_bool(0.5) {
            edges[k] = (u, nv);
            edges.push((nv, v));
            nv += 1;
        } else {
            edges.push((u, v));
        }
    }
    let mut net = Network::new(nv, false);
    for &(u, v) in &edges {
        net.add_edge(u, v, int(&mut r, 1, 10));
    }
    let n = r.gen_range(1..=3);
    let m = net.edges.len();
    let delays = (0..n).map(|_| (0..m).map(|_| int(&mut r, 0, 5)).collect()).collect();
    let paths = simple_paths(&net, 0, 1, usize::MAX).expect("no limit");
    let choices = (0..n).map(|_| paths[r.gen_range(0..paths.len())].iter().copied().collect()).collect();
    let game = Game::path_game(net, &vec![(0, 1); n], delays)?;
    Ok((game, Profile::new(choices)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nsepa::is_n_series_parallel;

    #[test]
    fn generators_are_deterministic_and_valid() {
        for seed in 0..40 {
            for f in [tree, series_parallel, |s| matroid(s, true)] {
                let (g, p) = f(seed).unwrap();
                g.check_profile(&p).unwrap();
                let (g2, p2) = f(seed).unwrap();
                assert_eq!(p, p2);
                assert_eq!(g.delays, g2.delays);
            }
            let (g, p) = ufl(3, 2, seed).unwrap();
            g.check_profile(&p).unwrap();
        }
    }

    #[test]
    fn series_parallel_games_are_recognised() {
        for seed in 0..40 {
            let (g, _) = series_parallel(seed).unwrap();
            assert!(g.graph.as_ref().unwrap().edges.len() <= 12);
            assert!(is_n_series_parallel(&g), "seed {seed}");
        }
    }
}
