//! JSON instance and protocol files. Rationals are `"p/q"` strings.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{parse_player_set_key, ConcaveCost, CostFunction, Game, Profile, StrategySpace};
use crate::graph::Network;
use crate::matroid::MatroidSpace;
use crate::protocol::{SeparableProtocol, SharingTable};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostEntry {
    Fixed(Rational),
    Table { subadditive_table: BTreeMap<String, Rational> },
    Concave { concave: Vec<Rational> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatroidEntry {
    Uniform {
        ground: Vec<usize>,
        rank: usize,
    },
    Partition {
        blocks: Vec<Vec<usize>>,
        quotas: Vec<usize>,
    },
    /// Without `ground`, edge `k` is resource `k`.
    Graphic {
        edges: Vec<(usize, usize)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ground: Option<Vec<usize>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceEntry {
    Matroid(MatroidEntry),
    Path { source: usize, terminal: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEntry {
    pub directed: bool,
    /// Defaults to one more than the largest endpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<usize>,
    pub edges: Vec<(usize, usize, Rational)>,
}

/// On-disk form of a game plus named profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub players: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resources: Option<Vec<usize>>,
    /// Optional for graph games, where edge costs are used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<BTreeMap<String, CostEntry>>,
    /// Optional; all zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delays: Option<Vec<Vec<Rational>>>,
    pub spaces: Vec<SpaceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphEntry>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub profiles: BTreeMap<String, Vec<Vec<usize>>>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

fn cost_from_entry(entry: &CostEntry) -> Result<CostFunction> {
    Ok(match entry {
        CostEntry::Fixed(v) => CostFunction::Fixed(v.clone()),
        CostEntry::Table { subadditive_table } => {
            let mut table = BTreeMap::new();
            for (k, v) in subadditive_table {
                table.insert(parse_player_set_key(k)?, v.clone());
            }
            CostFunction::table(table)
        }
        CostEntry::Concave { concave } => CostFunction::subadditive(ConcaveCost { values: concave.clone() }),
    })
}

impl InstanceFile {
    pub fn to_game(&self) -> Result<Game> {
        let network = match &self.graph {
            None => None,
            Some(g) => {
                let max_vertex = g.edges.iter().map(|&(u, v, _)| u.max(v) + 1).max().unwrap_or(0);
                let mut n = g.vertices.unwrap_or(max_vertex);
                for sp in &self.spaces {
                    if let SpaceEntry::Path { source, terminal } = sp {
                        if g.vertices.is_none() {
                            n = n.max(source + 1).max(terminal + 1);
                        }
                    }
                }
                if max_vertex > n {
                    return Err(invalid(format!("edge endpoint out of range for {n} vertices")));
                }
                let mut net = Network::new(n, g.directed);
                for (u, v, c) in &g.edges {
                    net.add_edge(*u, *v, c.clone());
                }
                Some(net)
            }
        };
        let m = match (&self.resources, &network) {
            (Some(r), _) => {
                if r.iter().enumerate().any(|(k, &id)| k != id) {
                    return Err(invalid("resource ids must be 0, 1, ..., m-1 in order"));
                }
                r.len()
            }
            (None, Some(net)) => net.edges.len(),
            (None, None) => match &self.costs {
                Some(c) => c.len(),
                None => return Err(invalid("no resources, costs or graph given")),
            },
        };
        let mut costs = Vec::with_capacity(m);
        for e in 0..m {
            let entry = self.costs.as_ref().and_then(|c| c.get(&e.to_string()));
            costs.push(match (entry, &network) {
                (Some(s), _) => cost_from_entry(s)?,
                (None, Some(net)) if e < net.edges.len() => CostFunction::Fixed(net.cost(e).clone()),
                _ => return Err(invalid(format!("no cost for resource {e}"))),
            });
        }
        if let Some(c) = &self.costs {
            if let Some(k) = c.keys().find(|k| k.parse::<usize>().map_or(true, |e| e >= m)) {
                return Err(invalid(format!("cost key {k:?} is not a resource id")));
            }
        }
        if let Some(net) = &network {
            for (e, c) in costs.iter().enumerate().take(net.edges.len()) {
                if c.fixed_value() != Some(net.cost(e)) {
                    return Err(invalid(format!("cost of resource {e} disagrees with its graph edge")));
                }
            }
        }
        if self.spaces.len() != self.players {
            return Err(invalid(format!("{} spaces for {} players", self.spaces.len(), self.players)));
        }
        let spaces = self
            .spaces
            .iter()
            .map(|sp| match sp {
                SpaceEntry::Path { source, terminal } => StrategySpace::Path { source: *source, terminal: *terminal },
                SpaceEntry::Matroid(MatroidEntry::Uniform { ground, rank }) => {
                    StrategySpace::Matroid(MatroidSpace::Uniform { ground: ground.clone(), rank: *rank })
                }
                SpaceEntry::Matroid(MatroidEntry::Partition { blocks, quotas }) => {
                    StrategySpace::Matroid(MatroidSpace::Partition { blocks: blocks.clone(), quotas: quotas.clone() })
                }
                SpaceEntry::Matroid(MatroidEntry::Graphic { edges, ground }) => {
                    StrategySpace::Matroid(MatroidSpace::Graphic {
                        ground: ground.clone().unwrap_or_else(|| (0..edges.len()).collect()),
                        edges: edges.clone(),
                    })
                }
            })
            .collect();
        let delays = self.delays.clone().unwrap_or_else(|| vec![vec![Rational::zero(); m]; self.players]);
        Game::new(costs, delays, spaces, network)
    }

    pub fn from_game(game: &Game) -> InstanceFile {
        let m = game.n_resources();
        let mut costs = BTreeMap::new();
        for (e, c) in game.costs.iter().enumerate() {
            let entry = match c {
                CostFunction::Fixed(v) => CostEntry::Fixed(v.clone()),
                CostFunction::Subadditive(s) => {
                    serde_json::from_value(s.oracle().to_json()).expect("oracles serialize to a cost entry")
                }
            };
            costs.insert(e.to_string(), entry);
        }
        let spaces = game
            .spaces
            .iter()
            .map(|sp| match sp {
                StrategySpace::Path { source, terminal } => SpaceEntry::Path { source: *source, terminal: *terminal },
                StrategySpace::Matroid(MatroidSpace::Uniform { ground, rank }) => {
                    SpaceEntry::Matroid(MatroidEntry::Uniform { ground: ground.clone(), rank: *rank })
                }
                StrategySpace::Matroid(MatroidSpace::Partition { blocks, quotas }) => {
                    SpaceEntry::Matroid(MatroidEntry::Partition { blocks: blocks.clone(), quotas: quotas.clone() })
                }
                StrategySpace::Matroid(MatroidSpace::Graphic { ground, edges }) => {
                    let identity = ground.iter().enumerate().all(|(k, &g)| k == g);
                    SpaceEntry::Matroid(MatroidEntry::Graphic {
                        edges: edges.clone(),
                        ground: (!identity).then(|| ground.clone()),
                    })
                }
            })
            .collect();
        let graph = game.graph.as_ref().map(|net| GraphEntry {
            directed: net.directed,
            vertices: Some(net.n),
            edges: net.edges.iter().map(|e| (e.u, e.v, e.cost.clone())).collect(),
        });
        InstanceFile {
            players: game.n_players,
            resources: Some((0..m).collect()),
            costs: Some(costs),
            delays: Some(game.delays.clone()),
            spaces,
            graph,
            profiles: BTreeMap::new(),
        }
    }

    pub fn add_profile(&mut self, name: &str, p: &Profile) {
        self.profiles.insert(name.to_string(), profile_lists(p));
    }

    pub fn profile(&self, name: &str) -> Result<Profile> {
        self.profiles
            .get(name)
            .map(|lists| Profile::new(lists.iter().map(|l| l.iter().copied().collect()).collect()))
            .ok_or_else(|| invalid(format!("instance has no profile named {name:?}")))
    }
}

pub fn profile_lists(p: &Profile) -> Vec<Vec<usize>> {
    p.choices.iter().map(|c| c.iter().copied().collect()).collect()
}

pub fn parse_profile(text: &str) -> Result<Profile> {
    let lists: Vec<Vec<usize>> = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(Profile::new(lists.into_iter().map(|l| l.into_iter().collect::<BTreeSet<_>>()).collect()))
}

pub fn parse_instance(text: &str) -> Result<InstanceFile> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn instance_to_string(inst: &InstanceFile) -> String {
    serde_json::to_string_pretty(inst).expect("instances serialize")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareEntry {
    pub player: usize,
    pub resource: usize,
    pub share: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolFile {
    pub base: Vec<Vec<usize>>,
    pub shares: Vec<ShareEntry>,
}

impl ProtocolFile {
    pub fn from_protocol(p: &SeparableProtocol) -> Self {
        ProtocolFile {
            base: profile_lists(p.base()),
            shares: p
                .table
                .shares
                .iter()
                .map(|(&(player, resource), share)| ShareEntry { player, resource, share: share.clone() })
                .collect(),
        }
    }

    pub fn to_protocol(&self) -> Result<SeparableProtocol> {
        let base = Profile::new(self.base.iter().map(|l| l.iter().copied().collect()).collect());
        let mut table = SharingTable::new(base);
        for s in &self.shares {
            if table.shares.contains_key(&(s.player, s.resource)) {
                return Err(invalid(format!("duplicate share for player {} on {}", s.player, s.resource)));
            }
            table.set(s.player, s.resource, s.share.clone());
        }
        table.check_shape()?;
        Ok(SeparableProtocol::new(table))
    }
}

pub fn parse_protocol(text: &str) -> Result<SeparableProtocol> {
    let file: ProtocolFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.to_protocol()
}
