//! Cross-checks against small independent oracles written here.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sepshare::connect::{approx_steiner_tree, reduce_multi_source, transform_single_source};
use sepshare::matroid::{build_matroid_protocol, transform_matroid, ufl_game};
use sepshare::nsepa::{counterexample_fixture, irredundant};
use sepshare::oracle::{
    brute_force_enforceable, brute_force_optimum, brute_force_steiner_tree, enforceable_by_exhaustive_lp,
    enumerate_strategies, EnumerationBudget,
};
use sepshare::protocol::verify_pne;
use sepshare::{gen, Game, Network, Profile, Rational};

/// Every simple path as an edge set, by DFS visiting higher edge ids first.
fn reverse_dfs_paths(net: &Network, from: usize, to: usize) -> BTreeSet<BTreeSet<usize>> {
    fn go(
        net: &Network,
        v: usize,
        to: usize,
        seen: &mut Vec<bool>,
        stack: &mut Vec<usize>,
        out: &mut BTreeSet<BTreeSet<usize>>,
    ) {
        if v == to {
            out.insert(stack.iter().copied().collect());
            return;
        }
        for e in (0..net.edges.len()).rev() {
            let edge = &net.edges[e];
            let next = if edge.u == v {
                edge.v
            } else if edge.v == v && !net.directed {
                edge.u
            } else {
                continue;
            };
            if seen[next] {
                continue;
            }
            seen[next] = true;
            stack.push(e);
            go(net, next, to, seen, stack, out);
            stack.pop();
            seen[next] = false;
        }
    }
    let mut seen = vec![false; net.n];
    seen[from] = true;
    let mut out = BTreeSet::new();
    go(net, from, to, &mut seen, &mut Vec::new(), &mut out);
    out
}

#[test]
fn fixture_path_lists_match_an_independent_dfs() {
    let (game, _) = counterexample_fixture();
    let net = game.graph.as_ref().unwrap();
    for i in 0..game.n_players {
        let (s, t) = game.path_endpoints(i).unwrap();
        let ours: Vec<_> = enumerate_strategies(&game, i, &EnumerationBudget::default()).unwrap();
        let theirs = reverse_dfs_paths(net, s, t);
        assert_eq!(ours.len(), theirs.len(), "player {i}");
        assert_eq!(ours.into_iter().collect::<BTreeSet<_>>(), theirs, "player {i}");
    }
}

fn random_graph(r: &mut ChaCha8Rng, n: usize, m: usize) -> Network {
    let mut net = Network::new(n, false);
    for _ in 0..m {
        let u = r.gen_range(0..n);
        let v = r.gen_range(0..n);
        if u != v {
            net.add_edge(u, v, Rational::from(r.gen_range(1i64..=9)));
        }
    }
    net
}

#[test]
fn irredundant_part_is_the_union_of_simple_paths() {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let n = r.gen_range(2..=7);
        let m = r.gen_range(1..=10);
        let net = random_graph(&mut r, n, m);
        let pairs: Vec<_> = (0..r.gen_range(1..=2)).map(|_| (r.gen_range(0..n), r.gen_range(0..n))).collect();
        let mut expected = vec![false; net.edges.len()];
        for &(s, t) in &pairs {
            for p in reverse_dfs_paths(&net, s, t) {
                for e in p {
                    expected[e] = true;
                }
            }
        }
        assert_eq!(irredundant(&net, &pairs).edges, expected, "{net:?} {pairs:?}");
    }
}

#[test]
fn approximate_tree_is_within_twice_the_optimum() {
    for seed in 0..150u64 {
        let (game, _) = gen::tree(seed).unwrap();
        let net = game.graph.as_ref().unwrap();
        let mut terms: BTreeSet<usize> = (0..game.n_players).map(|i| game.path_endpoints(i).unwrap().1).collect();
        terms.insert(0);
        let best = brute_force_steiner_tree(net, &terms).unwrap();
        let approx = approx_steiner_tree(&game).unwrap();
        let cost = game.total_cost(&approx).unwrap();
        assert!(cost <= Rational::from(2) * &best, "seed {seed}: {cost} vs optimum {best}");
        let out = transform_single_source(&game, &approx).unwrap();
        assert!(game.total_cost(&out.profile).unwrap() <= cost);
        assert!(verify_pne(&game, &out.protocol).unwrap().ok, "seed {seed}");
    }
}

#[test]
fn transform_outputs_pass_the_generic_lp() {
    let budget = EnumerationBudget { max_profiles: 50_000, max_paths_per_player: 1_000 };
    for seed in 0..80u64 {
        let (game, start) = gen::tree(seed).unwrap();
        let out = transform_single_source(&game, &start).unwrap();
        assert!(enforceable_by_exhaustive_lp(&game, &out.profile, &budget).unwrap(), "tree seed {seed}");
        assert!(brute_force_enforceable(&game, &out.profile, &budget).unwrap(), "tree seed {seed}");
        let (game, start) = gen::matroid(seed, true).unwrap();
        let out = transform_matroid(&game, &start).unwrap();
        assert!(enforceable_by_exhaustive_lp(&game, &out.profile, &budget).unwrap(), "matroid seed {seed}");
    }
}

#[test]
fn two_client_facility_location() {
    let z = Rational::zero();
    let game =
        ufl_game(&[Rational::from(10), Rational::from(3)], &[vec![z.clone(), z.clone()], vec![z.clone(), z]]).unwrap();
    let opt = brute_force_optimum(&game, &EnumerationBudget::default()).unwrap();
    assert_eq!(opt.profile, Profile::from_lists(&[&[1], &[1]]));
    assert_eq!(opt.cost, Rational::from(3));
    let out = transform_matroid(&game, &Profile::from_lists(&[&[0], &[0]])).unwrap();
    assert_eq!(out.profile, opt.profile);
    let protocol = build_matroid_protocol(&game, &out.profile).unwrap();
    assert_eq!(protocol.table.share(0, 1), Rational::from(3));
    assert_eq!(protocol.table.share(1, 1), Rational::zero());
    assert!(verify_pne(&game, &protocol).unwrap().ok);
}

fn multi_pair_game(r: &mut ChaCha8Rng) -> Option<Game> {
    let n = r.gen_range(3..=5);
    let m = r.gen_range(2..=6);
    let net = random_graph(r, n, m);
    let pairs: Vec<_> = (0..r.gen_range(1..=2))
        .map(|_| {
            let s = r.gen_range(0..n);
            (s, (s + r.gen_range(1..n)) % n)
        })
        .collect();
    let m = net.edges.len();
    let delays = pairs.iter().map(|_| (0..m).map(|_| Rational::from(r.gen_range(0i64..=3))).collect()).collect();
    let game = Game::path_game(net, &pairs, delays).ok()?;
    let budget = EnumerationBudget::default();
    (0..game.n_players).all(|i| !enumerate_strategies(&game, i, &budget).unwrap().is_empty()).then_some(game)
}

#[test]
fn common_source_reduction_keeps_the_optimum() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let budget = EnumerationBudget::default();
    let mut checked = 0;
    while checked < 60 {
        let Some(game) = multi_pair_game(&mut r) else { continue };
        let red = reduce_multi_source(&game).unwrap();
        let orig = brute_force_optimum(&game, &budget).unwrap();
        let reduced = brute_force_optimum(&red.game, &budget).unwrap();
        assert_eq!(orig.cost, reduced.cost);
        let projected = red.project(&reduced.profile);
        assert_eq!(game.total_cost(&projected).unwrap(), orig.cost);
        assert_eq!(red.game.total_cost(&red.lift(&orig.profile)).unwrap(), orig.cost);
        checked += 1;
    }
}
