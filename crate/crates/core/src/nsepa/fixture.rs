//! A three-player instance whose unique optimal forest is not enforceable.

use crate::game::{Game, Profile};
use crate::graph::Network;
use crate::rational::Rational;

/// Vertex names by id.
pub const FIXTURE_LABELS: [&str; 7] = ["s1", "t1", "s2", "t2", "s3", "t3", "a"];

/// The game (pairs `(s1,t1)`, `(s2,t2)`, `(s3,t3)`, zero delays) and its
/// optimal profile of cost 346.
pub fn counterexample_fixture() -> (Game, Profile) {
    let (s1, t1, s2, t2, s3, t3, a) = (0, 1, 2, 3, 4, 5, 6);
    let mut g = Network::new(7, false);
    for (u, v, c) in [
        (s1, s2, 84),
        (s1, t1, 100),
        (t3, s3, 69),
        (t2, t3, 86),
        (s1, s3, 60),
        (s1, t3, 57),
        (a, s2, 71),
        (a, t1, 38),
        (a, t3, 38),
        (t2, s3, 82),
    ] {
        g.add_edge(u, v, Rational::from(c));
    }
    let game = Game::path_game(g, &[(s1, t1), (s2, t2), (s3, t3)], vec![]).expect("fixture is valid");
    let opt = Profile::from_lists(&[&[5, 8, 7], &[6, 8, 5, 4, 9], &[4, 5]]);
    (game, opt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nsepa::{irredundant, is_enforceable, is_n_series_parallel, LpMode};

    #[test]
    fn optimum_costs_346_and_is_not_enforceable() {
        let (game, opt) = counterexample_fixture();
        assert_eq!(game.total_cost(&opt).unwrap(), Rational::from(346));
        let r = is_enforceable(&game, &opt, LpMode::FullPaths { limit: 1000 }).unwrap();
        assert!(!r.enforceable);
        assert!(r.lp_value.unwrap() <= Rational::from(339));
    }

    #[test]
    fn graph_is_irredundant_but_not_n_series_parallel() {
        let (game, _) = counterexample_fixture();
        let net = game.graph.as_ref().unwrap();
        assert!(irredundant(net, &[(0, 1), (2, 3), (4, 5)]).is_everything());
        assert!(!is_n_series_parallel(&game));
    }
}
