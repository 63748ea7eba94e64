//! Enforceable strategy profiles and separable cost-sharing protocols for
//! cost-sharing games with player-specific delays.
//!
//! Every quantity is an exact [`Rational`]. The transforms in [`matroid`],
//! [`connect`] and [`nsepa`] turn an arbitrary profile into one that is no
//! more expensive and can be made a pure Nash equilibrium by a separable
//! protocol; [`protocol`] verifies that claim and [`oracle`] provides
//! brute-force ground truth for small instances.

pub mod connect;
pub mod error;
pub mod game;
pub mod gen;
pub mod graph;
pub mod io;
pub mod lp;
pub mod matroid;
pub mod nsepa;
pub mod oracle;
pub mod protocol;
pub mod rational;
pub mod trace;

pub use error::{Error, Result};
pub use game::{CostFunction, Game, PlayerSet, Profile, StrategySpace};
pub use graph::Network;
pub use matroid::MatroidSpace;
pub use protocol::{SeparableProtocol, SharingTable};
pub use rational::Rational;
