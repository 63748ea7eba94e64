use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use sepshare::connect::{approx_steiner_tree, transform_single_source};
use sepshare::gen;
use sepshare::io::{
    instance_to_string, parse_instance, parse_profile, parse_protocol, profile_lists, InstanceFile, ProtocolFile,
};
use sepshare::matroid::{build_matroid_protocol, check_enforceable_matroid, transform_matroid};
use sepshare::nsepa::{self, counterexample_fixture, is_n_series_parallel, nsepa_transform, LpMode};
use sepshare::oracle::{self, EnumerationBudget};
use sepshare::protocol::{verify_budget_balance, verify_pne};
use sepshare::trace::TraceEvent;
use sepshare::{Error, Game, Profile, Rational, SeparableProtocol};

#[derive(Parser)]
#[command(name = "sepshare", version, about = "Enforceable profiles and separable cost-sharing protocols")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Instance JSON; stdin when absent.
    #[arg(long = "in", global = true)]
    input: Option<PathBuf>,
    /// Report destination; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write one JSON object per algorithm step to this file.
    #[arg(long, global = true)]
    trace: Option<PathBuf>,
    /// Add decimal renderings of every rational in the report.
    #[arg(long, global = true)]
    approx_display: bool,
    /// Add wall-clock timings to the report (makes it non-reproducible).
    #[arg(long, global = true)]
    timings: bool,
    /// Write the resulting profile as JSON lists to this file.
    #[arg(long, global = true)]
    emit_profile: Option<PathBuf>,
    /// Write the resulting protocol to this file.
    #[arg(long, global = true)]
    emit_protocol: Option<PathBuf>,
    /// Most profiles the brute-force oracle may enumerate.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    max_profiles: usize,
    /// Most simple paths per player the oracle may enumerate.
    #[arg(long, global = true, default_value_t = 10_000)]
    max_paths: usize,
}

#[derive(Args, Clone)]
struct ProfileArg {
    /// Name of a profile stored in the instance.
    #[arg(long)]
    profile: Option<String>,
    /// Profile given as a JSON list of resource lists.
    #[arg(long, conflicts_with = "profile")]
    profile_file: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Make a profile of a matroid game enforceable without raising its cost.
    TransformMatroid {
        #[command(flatten)]
        profile: ProfileArg,
    },
    /// Make a profile of a single-source connection game enforceable. Without
    /// a profile, starts from an approximate Steiner tree.
    TransformTree {
        #[command(flatten)]
        profile: ProfileArg,
    },
    /// Connection games with delays on series-parallel graphs.
    Nsepa {
        #[command(subcommand)]
        command: NsepaCommand,
    },
    /// Check a profile for enforceability, and a protocol if given.
    Verify {
        #[command(flatten)]
        profile: ProfileArg,
        /// Protocol JSON to verify against the profile.
        #[arg(long)]
        protocol: Option<PathBuf>,
    },
    /// Exhaustive minimum-cost profile.
    Optimum,
    /// Brute-force verdicts.
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
    /// Seeded random instances, written as instance JSON with a "start" profile.
    Gen {
        #[command(subcommand)]
        command: GenCommand,
    },
    /// Built-in instances.
    Fixture {
        #[command(subcommand)]
        command: FixtureCommand,
    },
}

#[derive(Subcommand)]
enum NsepaCommand {
    /// Replace unpaid edges by tight alternatives until every edge is paid.
    Transform {
        #[command(flatten)]
        profile: ProfileArg,
    },
    /// Solve the enforceability LP for a profile.
    Check {
        #[command(flatten)]
        profile: ProfileArg,
        /// Deviations in the LP; defaults to alternatives on series-parallel
        /// graphs and all paths otherwise.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Alternatives,
    Full,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Minimum total cost over every profile.
    Optimum,
    /// Enforceability with every alternative strategy as a deviation.
    Enforceable {
        #[command(flatten)]
        profile: ProfileArg,
    },
    /// Every strategy of one player.
    Strategies {
        #[arg(long)]
        player: usize,
    },
}

#[derive(Subcommand)]
enum GenCommand {
    /// Facility location: opening costs uniform in 1..=20, distances
    /// (delays) uniform in 0..=10; clients start at random facilities.
    Ufl {
        #[arg(long, default_value_t = 3)]
        players: usize,
        #[arg(long, default_value_t = 3)]
        facilities: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// 1..=5 players, 1..=8 resources, uniform/partition/graphic matroids
    /// with equal odds, fixed costs in 1..=10 (with --subadditive half the
    /// resources get capped-sum tables), delays in 0..=5, start on a
    /// min-weight basis under weights in 0..=20.
    Matroid {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        subadditive: bool,
    },
    /// Undirected connected graph on 2..=10 vertices (random spanning tree
    /// plus extra edges), costs in 1..=10, 1..=4 players rooted at vertex 0
    /// with distinct terminals, no delays, start on shortest paths under
    /// weights in 1..=10.
    Tree {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Series-parallel graph from 0 to 1 with at most 12 edges grown by
    /// random series or parallel splits, costs in 1..=10, delays in 0..=5,
    /// 1..=3 players from 0 to 1 on random simple paths.
    Sp {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum FixtureCommand {
    /// Three pairs on seven vertices whose unique optimal forest (profile
    /// "opt", cost 346) is not enforceable.
    Counterexample,
}

#[derive(Debug, Default, Serialize)]
struct RunReport {
    command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    input_cost: Option<Rational>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output_cost: Option<Rational>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phases: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    enforceable: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pne_verified: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    budget_balanced: Option<bool>,
    #[serde(flatten)]
    details: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    approx: Option<BTreeMap<String, String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timings: Option<BTreeMap<String, f64>>,
}

impl RunReport {
    fn new(command: &str) -> Self {
        RunReport { command: command.into(), ..Default::default() }
    }

    fn detail(&mut self, key: &str, v: impl Serialize) {
        self.details.insert(key.into(), serde_json::to_value(v).expect("report values serialize"));
    }

    fn failed(&self) -> bool {
        [self.enforceable, self.pne_verified, self.budget_balanced].contains(&Some(false))
    }

    fn add_approx(&mut self) {
        let mut approx = BTreeMap::new();
        for (k, v) in [("input_cost", &self.input_cost), ("output_cost", &self.output_cost)] {
            if let Some(v) = v {
                approx.insert(k.to_string(), format!("{:.6}", v.to_f64()));
            }
        }
        for (k, v) in &self.details {
            if let Some(r) = v.as_str().and_then(|s| s.parse::<Rational>().ok()) {
                approx.insert(k.clone(), format!("{:.6}", r.to_f64()));
            }
        }
        self.approx = Some(approx);
    }
}

/// Either a report or raw JSON (generated instances, oracle verdicts).
enum Output {
    Report(Box<RunReport>),
    Raw(String),
}

struct Ctx {
    common: Common,
    trace: Vec<TraceEvent>,
}

impl Ctx {
    fn read_input(&self) -> Result<String, Error> {
        let mut text = String::new();
        match &self.common.input {
            Some(p) => {
                text = fs::read_to_string(p).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))?
            }
            None => {
                io::stdin().read_to_string(&mut text).map_err(|e| Error::InvalidInput(e.to_string()))?;
            }
        }
        Ok(text)
    }

    fn instance(&self) -> Result<(InstanceFile, Game), Error> {
        let inst = parse_instance(&self.read_input()?)?;
        let game = inst.to_game()?;
        Ok((inst, game))
    }

    fn budget(&self) -> EnumerationBudget {
        EnumerationBudget { max_profiles: self.common.max_profiles, max_paths_per_player: self.common.max_paths }
    }

    fn emit(&self, profile: &Profile, protocol: Option<&SeparableProtocol>) -> Result<(), Error> {
        if let Some(path) = &self.common.emit_profile {
            write_file(path, &serde_json::to_string(&profile_lists(profile)).unwrap())?;
        }
        if let (Some(path), Some(p)) = (&self.common.emit_protocol, protocol) {
            write_file(path, &serde_json::to_string_pretty(&ProtocolFile::from_protocol(p)).unwrap())?;
        }
        Ok(())
    }
}

fn write_file(path: &PathBuf, text: &str) -> Result<(), Error> {
    fs::write(path, format!("{text}\n")).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

/// The named profile, the file profile, the sole stored profile, or "start".
fn pick_profile(inst: &InstanceFile, arg: &ProfileArg) -> Result<Option<Profile>, Error> {
    if let Some(path) = &arg.profile_file {
        let text = fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        return parse_profile(&text).map(Some);
    }
    if let Some(name) = &arg.profile {
        return inst.profile(name).map(Some);
    }
    if inst.profiles.len() == 1 {
        let name = inst.profiles.keys().next().unwrap().clone();
        return inst.profile(&name).map(Some);
    }
    if inst.profiles.contains_key("start") {
        return inst.profile("start").map(Some);
    }
    Ok(None)
}

fn require_profile(inst: &InstanceFile, arg: &ProfileArg) -> Result<Profile, Error> {
    pick_profile(inst, arg)?
        .ok_or_else(|| Error::InvalidInput("no profile given; use --profile or --profile-file".into()))
}

fn verify_protocol(
    game: &Game,
    protocol: &SeparableProtocol,
    profile: &Profile,
    report: &mut RunReport,
) -> Result<(), Error> {
    report.pne_verified = Some(verify_pne(game, protocol)?.ok);
    report.budget_balanced = Some(verify_budget_balance(game, protocol, profile)?.ok);
    Ok(())
}

fn run(command: Command, ctx: &mut Ctx) -> Result<Output, Error> {
    match command {
        Command::TransformMatroid { profile } => {
            let (inst, game) = ctx.instance()?;
            let start = require_profile(&inst, &profile)?;
            let out = transform_matroid(&game, &start)?;
            ctx.trace.extend(out.trace.iter().cloned());
            let mut r = RunReport::new("transform-matroid");
            r.input_cost = Some(game.total_cost(&start)?);
            r.output_cost = Some(game.total_cost(&out.profile)?);
            r.iterations = Some(out.iterations);
            r.detail("moves", out.moves);
            r.detail("iteration_bound", out.bound);
            r.detail("profile", profile_lists(&out.profile));
            r.enforceable = Some(check_enforceable_matroid(&game, &out.profile, false)?.ok);
            let protocol =
                if r.enforceable == Some(true) { Some(build_matroid_protocol(&game, &out.profile)?) } else { None };
            if let Some(p) = &protocol {
                verify_protocol(&game, p, &out.profile, &mut r)?;
            }
            ctx.emit(&out.profile, protocol.as_ref())?;
            Ok(Output::Report(Box::new(r)))
        }
        Command::TransformTree { profile } => {
            let (inst, game) = ctx.instance()?;
            let start = match pick_profile(&inst, &profile)? {
                Some(p) => p,
                None if game.n_players == 0 => Profile::new(vec![]),
                None => approx_steiner_tree(&game)?,
            };
            let out = transform_single_source(&game, &start)?;
            ctx.trace.extend(out.trace.iter().cloned());
            let mut r = RunReport::new("transform-tree");
            r.input_cost = Some(game.total_cost(&start)?);
            r.output_cost = Some(game.total_cost(&out.profile)?);
            r.iterations = Some(out.replacements);
            r.detail("closings", out.closings);
            r.detail("passes", out.passes);
            r.detail("aux_single_payer", out.aux_single_payer);
            r.detail("profile", profile_lists(&out.profile));
            verify_protocol(&game, &out.protocol, &out.profile, &mut r)?;
            r.enforceable = Some(r.pne_verified == Some(true) && r.budget_balanced == Some(true));
            ctx.emit(&out.profile, Some(&out.protocol))?;
            Ok(Output::Report(Box::new(r)))
        }
        Command::Nsepa { command: NsepaCommand::Transform { profile } } => {
            let (inst, game) = ctx.instance()?;
            let start = require_profile(&inst, &profile)?;
            let out = nsepa_transform(&game, &start)?;
            ctx.trace.extend(out.trace.iter().cloned());
            let mut r = RunReport::new("nsepa transform");
            r.input_cost = Some(game.total_cost(&start)?);
            r.output_cost = Some(game.total_cost(&out.profile)?);
            r.phases = Some(out.phases);
            r.detail("phase_bound", out.phase_bound);
            r.detail("substitutions", out.substitutions);
            r.detail("pre_repairs", out.pre_repairs);
            r.detail("input_enforceable", out.input_enforceable);
            r.detail("lp_value", &out.lp_value);
            r.detail("profile", profile_lists(&out.profile));
            verify_protocol(&game, &out.protocol, &out.profile, &mut r)?;
            r.enforceable = Some(r.pne_verified == Some(true) && r.budget_balanced == Some(true));
            ctx.emit(&out.profile, Some(&out.protocol))?;
            Ok(Output::Report(Box::new(r)))
        }
        Command::Nsepa { command: NsepaCommand::Check { profile, mode } } => {
            let (inst, game) = ctx.instance()?;
            let p = require_profile(&inst, &profile)?;
            let full = LpMode::FullPaths { limit: ctx.common.max_paths };
            let mode = match mode {
                Some(Mode::Alternatives) => LpMode::Alternatives,
                Some(Mode::Full) => full,
                None if game.is_path_game() && is_n_series_parallel(&game) => LpMode::Alternatives,
                None => full,
            };
            let check = nsepa::is_enforceable(&game, &p, mode)?;
            let mut r = RunReport::new("nsepa check");
            r.input_cost = Some(game.total_cost(&p)?);
            r.enforceable = Some(check.enforceable);
            r.detail("mode", if mode == LpMode::Alternatives { "alternatives" } else { "full" });
            r.detail("lp_value", &check.lp_value);
            r.detail("required", game.shareable_cost(&p)?);
            let protocol = check.shares.map(SeparableProtocol::new);
            if let Some(pr) = &protocol {
                verify_protocol(&game, pr, &p, &mut r)?;
            }
            ctx.emit(&p, protocol.as_ref())?;
            Ok(Output::Report(Box::new(r)))
        }
        Command::Verify { profile, protocol } => {
            let (inst, game) = ctx.instance()?;
            let p = require_profile(&inst, &profile)?;
            let mut r = RunReport::new("verify");
            r.input_cost = Some(game.total_cost(&p)?);
            r.enforceable = Some(oracle::brute_force_enforceable(&game, &p, &ctx.budget())?);
            let protocol = match protocol {
                Some(path) => {
                    let text = fs::read_to_string(&path)
                        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
                    let pr = parse_protocol(&text)?;
                    if *pr.base() != p {
                        return Err(Error::InvalidInput("protocol base differs from the profile".into()));
                    }
                    Some(pr)
                }
                None if r.enforceable == Some(true) => Some(build_protocol(&game, &p, ctx)?),
                None => None,
            };
            if let Some(pr) = &protocol {
                verify_protocol(&game, pr, &p, &mut r)?;
            }
            ctx.emit(&p, protocol.as_ref())?;
            Ok(Output::Report(Box::new(r)))
        }
        Command::Optimum => {
            let (_, game) = ctx.instance()?;
            let opt = oracle::brute_force_optimum(&game, &ctx.budget())?;
            let mut r = RunReport::new("optimum");
            r.output_cost = Some(opt.cost.clone());
            r.detail("unique", opt.unique);
            r.detail("profile", profile_lists(&opt.profile));
            ctx.emit(&opt.profile, None)?;
            Ok(Output::Report(Box::new(r)))
        }
        Command::Oracle { command } => {
            let (inst, game) = ctx.instance()?;
            let budget = ctx.budget();
            let verdict = match command {
                OracleCommand::Optimum => {
                    let opt = oracle::brute_force_optimum(&game, &budget)?;
                    json!({"cost": opt.cost, "unique": opt.unique, "profile": profile_lists(&opt.profile)})
                }
                OracleCommand::Enforceable { profile } => {
                    let p = require_profile(&inst, &profile)?;
                    json!({
                        "enforceable": oracle::brute_force_enforceable(&game, &p, &budget)?,
                        "exhaustive_lp": oracle::enforceable_by_exhaustive_lp(&game, &p, &budget)?,
                    })
                }
                OracleCommand::Strategies { player } => {
                    if player >= game.n_players {
                        return Err(Error::InvalidInput(format!("no player {player}")));
                    }
                    let s = oracle::enumerate_strategies(&game, player, &budget)?;
                    let lists: Vec<Vec<usize>> = s.iter().map(|c| c.iter().copied().collect()).collect();
                    json!({"player": player, "count": lists.len(), "strategies": lists})
                }
            };
            Ok(Output::Raw(serde_json::to_string_pretty(&verdict).unwrap()))
        }
        Command::Gen { command } => {
            let (game, start) = match command {
                GenCommand::Ufl { players, facilities, seed } => {
                    if facilities == 0 {
                        return Err(Error::InvalidInput("need at least one facility".into()));
                    }
                    gen::ufl(players, facilities, seed)?
                }
                GenCommand::Matroid { seed, subadditive } => gen::matroid(seed, subadditive)?,
                GenCommand::Tree { seed } => gen::tree(seed)?,
                GenCommand::Sp { seed } => gen::series_parallel(seed)?,
            };
            let mut inst = InstanceFile::from_game(&game);
            inst.add_profile("start", &start);
            Ok(Output::Raw(instance_to_string(&inst)))
        }
        Command::Fixture { command: FixtureCommand::Counterexample } => {
            let (game, opt) = counterexample_fixture();
            let mut inst = InstanceFile::from_game(&game);
            inst.add_profile("opt", &opt);
            Ok(Output::Raw(instance_to_string(&inst)))
        }
    }
}

/// A protocol for an enforceable profile: LP shares for connection games,
/// the deviation-cost shares for matroid games.
fn build_protocol(game: &Game, p: &Profile, ctx: &Ctx) -> Result<SeparableProtocol, Error> {
    if game.is_matroid_game() {
        return build_matroid_protocol(game, p);
    }
    let check = nsepa::is_enforceable(game, p, LpMode::FullPaths { limit: ctx.common.max_paths })?;
    check
        .shares
        .map(SeparableProtocol::new)
        .ok_or_else(|| Error::NotEnforceable("the LP does not pay every edge".into()))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::BudgetExceeded(_) | Error::TooLarge(_) | Error::TooManyPaths { .. } => 3,
        Error::NotEnforceable(_) | Error::InternalInvariant(_) => 1,
        _ => 2,
    }
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::TransformMatroid { .. } => "transform-matroid",
        Command::TransformTree { .. } => "transform-tree",
        Command::Nsepa { .. } => "nsepa",
        Command::Verify { .. } => "verify",
        Command::Optimum => "optimum",
        Command::Oracle { .. } => "oracle",
        Command::Gen { .. } => "gen",
        Command::Fixture { .. } => "fixture",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let name = command_name(&cli.command);
    let mut ctx = Ctx { common: cli.common, trace: Vec::new() };
    let started = Instant::now();
    let result = run(cli.command, &mut ctx);
    let elapsed = started.elapsed();
    if let Some(path) = &ctx.common.trace {
        let lines: Vec<String> = ctx.trace.iter().map(|t| serde_json::to_string(t).unwrap()).collect();
        if let Err(e) = fs::write(path, lines.iter().map(|l| format!("{l}\n")).collect::<String>()) {
            eprintln!("{}", json!({"error": format!("{}: {e}", path.display())}));
            return ExitCode::from(2);
        }
    }
    let (text, code) = match result {
        Ok(Output::Raw(text)) => (text, 0),
        Ok(Output::Report(mut r)) => {
            if ctx.common.approx_display {
                r.add_approx();
            }
            if ctx.common.timings {
                r.timings = Some(BTreeMap::from([("elapsed_ms".to_string(), elapsed.as_secs_f64() * 1000.0)]));
            }
            let code = if r.failed() { 1 } else { 0 };
            (serde_json::to_string_pretty(&r).unwrap(), code)
        }
        Err(e) => {
            eprintln!("{}", json!({"command": name, "error": e.to_string()}));
            return ExitCode::from(exit_code(&e));
        }
    };
    let written = match &ctx.common.out {
        Some(path) => write_file(path, &text).map_err(|e| e.to_string()),
        None => writeln!(io::stdout().lock(), "{text}").map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("{}", json!({"error": e}));
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}
