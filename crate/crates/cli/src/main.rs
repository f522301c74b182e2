//! Command-line front end: run mechanisms on market files, enumerate stable
//! sets, audit axioms at a single profile, sweep whole domains, and rerun the
//! bundled case studies.
//!
//! Exit codes: 0 success (and expectations met), 1 witness expectation
//! failed or a case study assertion failed, 2 input error, 3 internal
//! validation failure.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use matchkit::market::{DomainRestriction, Market, Partner, Profile, Side};
use matchkit::mechanisms::MechanismId;
use matchkit::replication::{
    replicate, verify_step1_over_domain, NamedMarket, ReplicationReport, Step1SweepReport,
};
use matchkit::stability::{enumerate_stable_matchings, lattice_join, matched_agent_set};
use matchkit::sweep::{sweep, SweepMode, SweepSpec};
use matchkit::{check_axiom, parse_market, run_mechanism, to_json, Axiom, Matching, Witness};

const EXIT_WITNESS_EXPECTATION: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "matchkit", version, about = "Two-sided matching mechanisms, audits, and counterexample sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one mechanism on a market file and print the matching.
    Run {
        /// Mechanism: mda, wda, mia or wia.
        #[arg(long)]
        mechanism: MechanismId,
        /// Market file path.
        #[arg(long)]
        market: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Enumerate all stable matchings of a market file by brute force.
    Stable {
        #[arg(long)]
        market: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Audit one axiom for one mechanism at the profile in a market file.
    Check {
        #[arg(long)]
        mechanism: MechanismId,
        /// Axiom: sp, boost, trunc, stability or ir.
        #[arg(long)]
        axiom: Axiom,
        #[arg(long)]
        market: PathBuf,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        expect: Expectation,
    },
    /// Sweep a whole profile domain through an axiom checker.
    Search {
        #[arg(long)]
        mechanism: MechanismId,
        #[arg(long)]
        axiom: Axiom,
        /// Market size, e.g. 3x3.
        #[arg(long)]
        size: MarketSize,
        /// Domain: full, all-acceptable or sampled.
        #[arg(long)]
        domain: DomainKind,
        /// Sample count (sampled domain only).
        #[arg(long)]
        samples: Option<u64>,
        /// Sample seed (sampled domain only).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Visiting mode: first, count or collect=N.
        #[arg(long, default_value = "first")]
        mode: ModeArg,
        /// Visit only the first N profiles of the stream.
        #[arg(long)]
        budget: Option<u128>,
        /// Allow domains above one million profiles.
        #[arg(long)]
        long_run: bool,
        /// Worker threads (falls back to MM_WORKERS, then all cores).
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        expect: Expectation,
    },
    /// Rerun a bundled case study and exit 0 only if every assertion holds.
    Replicate {
        /// example1, theorem1, or step1.
        target: ReplicateTarget,
        /// Market size for step1, e.g. 3x3.
        #[arg(long)]
        size: Option<MarketSize>,
        /// Check a random sample of profiles instead of the whole domain
        /// (step1 only).
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
#[group(multiple = false)]
struct Expectation {
    /// Exit 1 if any witness is found.
    #[arg(long)]
    expect_none: bool,
    /// Exit 1 if no witness is found.
    #[arg(long)]
    expect_some: bool,
}

impl Expectation {
    fn exit_code(&self, witnesses: usize) -> u8 {
        let violated = (self.expect_none && witnesses > 0) || (self.expect_some && witnesses == 0);
        if violated {
            EXIT_WITNESS_EXPECTATION
        } else {
            0
        }
    }
}

#[derive(Clone, Copy)]
struct MarketSize {
    men: usize,
    women: usize,
}

impl FromStr for MarketSize {
    type Err = String;

    fn from_str(s: &str) -> Result<MarketSize, String> {
        let (men, women) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected <men>x<women>, got `{s}`"))?;
        let parse = |t: &str| t.parse::<usize>().map_err(|_| format!("bad size `{s}`"));
        Ok(MarketSize { men: parse(men)?, women: parse(women)? })
    }
}

#[derive(Clone, Copy)]
enum DomainKind {
    Full,
    AllAcceptable,
    Sampled,
}

impl FromStr for DomainKind {
    type Err = String;

    fn from_str(s: &str) -> Result<DomainKind, String> {
        match s {
            "full" => Ok(DomainKind::Full),
            "all-acceptable" => Ok(DomainKind::AllAcceptable),
            "sampled" => Ok(DomainKind::Sampled),
            other => Err(format!("unknown domain `{other}` (expected full, all-acceptable or sampled)")),
        }
    }
}

#[derive(Clone, Copy)]
struct ModeArg(SweepMode);

impl FromStr for ModeArg {
    type Err = String;

    fn from_str(s: &str) -> Result<ModeArg, String> {
        if s == "first" {
            Ok(ModeArg(SweepMode::FirstWitness))
        } else if s == "count" {
            Ok(ModeArg(SweepMode::CountAll))
        } else if let Some(n) = s.strip_prefix("collect=") {
            let n: usize = n.parse().map_err(|_| format!("bad collect count in `{s}`"))?;
            Ok(ModeArg(SweepMode::CollectUpTo(n)))
        } else {
            Err(format!("unknown mode `{s}` (expected first, count or collect=N)"))
        }
    }
}

#[derive(Clone, Copy)]
enum ReplicateTarget {
    Example1,
    Theorem1,
    Step1,
}

impl FromStr for ReplicateTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<ReplicateTarget, String> {
        match s {
            "example1" => Ok(ReplicateTarget::Example1),
            "theorem1" => Ok(ReplicateTarget::Theorem1),
            "step1" => Ok(ReplicateTarget::Step1),
            other => Err(format!("unknown target `{other}` (expected example1, theorem1 or step1)")),
        }
    }
}

/// A failure with a dedicated process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl fmt::Display) -> Failure {
        Failure { code: EXIT_INPUT, message: message.to_string() }
    }

    fn internal(message: impl fmt::Display) -> Failure {
        Failure { code: EXIT_INTERNAL, message: message.to_string() }
    }
}

fn load_profile(path: &Path) -> Result<Profile, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    parse_market(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn resolve_workers(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var("MM_WORKERS").ok().and_then(|v| v.parse().ok()))
        .filter(|&w| w >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        })
}

fn print_matching(matching: &Matching) {
    for agent in matching.market().agents() {
        if agent.side == Side::Woman {
            if let Partner::Agent(_) = matching.partner(agent) {
                continue; // already printed from the man's side
            }
        }
        println!("{agent} -> {}", matching.partner(agent));
    }
}

#[derive(Serialize)]
struct StableReport {
    market: Market,
    stable_matchings: Vec<Matching>,
    matched_agents: Vec<String>,
    man_optimal: Matching,
    woman_optimal: Matching,
}

#[derive(Serialize)]
struct CheckReport {
    mechanism: MechanismId,
    axiom: Axiom,
    witnesses: Vec<Witness>,
}

fn cmd_run(mechanism: MechanismId, market: &Path, json: bool) -> Result<u8, Failure> {
    let profile = load_profile(market)?;
    let matching = run_mechanism(mechanism, &profile);
    if json {
        print!("{}", to_json(&matching));
    } else {
        println!("mechanism: {mechanism}");
        print_matching(&matching);
    }
    Ok(0)
}

fn cmd_stable(market: &Path, json: bool) -> Result<u8, Failure> {
    let profile = load_profile(market)?;
    let stable = enumerate_stable_matchings(&profile).map_err(Failure::input)?;
    let fold = |side: Side| -> Result<Matching, Failure> {
        let mut best = stable[0].clone();
        for m in &stable[1..] {
            best = lattice_join(&profile, &best, m, side).map_err(Failure::internal)?;
        }
        Ok(best)
    };
    let report = StableReport {
        market: profile.market(),
        matched_agents: matched_agent_set(&stable[0]).iter().map(|a| a.name()).collect(),
        man_optimal: fold(Side::Man)?,
        woman_optimal: fold(Side::Woman)?,
        stable_matchings: stable,
    };
    if json {
        print!("{}", to_json(&report));
    } else {
        println!("stable matchings: {}", report.stable_matchings.len());
        for m in &report.stable_matchings {
            println!("  {m}");
        }
        println!("matched agents: {}", report.matched_agents.join(" "));
        println!("man-optimal:   {}", report.man_optimal);
        println!("woman-optimal: {}", report.woman_optimal);
    }
    Ok(0)
}

fn cmd_check(
    mechanism: MechanismId,
    axiom: Axiom,
    market: &Path,
    json: bool,
    expect: &Expectation,
) -> Result<u8, Failure> {
    let profile = load_profile(market)?;
    let witnesses = check_axiom(mechanism, &profile, axiom);
    for w in &witnesses {
        w.verify().map_err(Failure::internal)?;
    }
    if json {
        print!("{}", to_json(&CheckReport { mechanism, axiom, witnesses: witnesses.clone() }));
    } else {
        println!("mechanism {mechanism}, axiom {axiom}: {} witnesses", witnesses.len());
        for w in &witnesses {
            println!("  {}", w.summary());
        }
    }
    Ok(expect.exit_code(witnesses.len()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_search(
    mechanism: MechanismId,
    axiom: Axiom,
    size: MarketSize,
    domain: DomainKind,
    samples: Option<u64>,
    seed: u64,
    mode: ModeArg,
    budget: Option<u128>,
    long_run: bool,
    workers: Option<usize>,
    json: bool,
    expect: &Expectation,
) -> Result<u8, Failure> {
    let market = Market::new(size.men, size.women).map_err(Failure::input)?;
    let restriction = match domain {
        DomainKind::Full => DomainRestriction::Full,
        DomainKind::AllAcceptable => DomainRestriction::AllAcceptable,
        DomainKind::Sampled => {
            let count = samples
                .ok_or_else(|| Failure::input("--domain sampled requires --samples"))?;
            DomainRestriction::Sampled { count, seed }
        }
    };
    let spec = SweepSpec {
        market,
        restriction,
        mechanism,
        axioms: vec![axiom],
        mode: mode.0,
        budget,
        long_run,
    };
    let report = sweep(&spec, resolve_workers(workers)).map_err(Failure::input)?;
    for w in &report.witnesses {
        w.witness.verify().map_err(Failure::internal)?;
    }
    if json {
        print!("{}", to_json(&report));
    } else {
        println!(
            "mechanism {mechanism}, axiom {axiom}, domain {}: {} witnesses, {} of {} profiles examined in {:?}",
            report.spec.restriction,
            report.witness_count(),
            report.profiles_examined,
            report.domain_size,
            report.wall_time
        );
        if let Some(first) = report.witnesses.first() {
            println!("  first witness at profile {}:", first.profile_index);
            println!("    {}", first.witness.summary());
        }
    }
    Ok(expect.exit_code(report.witness_count()))
}

#[derive(Serialize)]
#[serde(untagged)]
enum ReplicateOutput {
    Caselet(ReplicationReport),
    Step1(Step1SweepReport),
}

fn cmd_replicate(
    target: ReplicateTarget,
    size: Option<MarketSize>,
    samples: Option<u64>,
    seed: u64,
    json: bool,
) -> Result<u8, Failure> {
    let (output, passed) = match target {
        ReplicateTarget::Example1 => {
            let report = replicate(NamedMarket::Example1);
            (ReplicateOutput::Caselet(report.clone()), report.passed())
        }
        ReplicateTarget::Theorem1 => {
            let report = replicate(NamedMarket::Theorem1Step2);
            (ReplicateOutput::Caselet(report.clone()), report.passed())
        }
        ReplicateTarget::Step1 => {
            let size = size.ok_or_else(|| Failure::input("step1 requires --size"))?;
            let market = Market::new(size.men, size.women).map_err(Failure::input)?;
            let report = verify_step1_over_domain(market, samples.map(|n| (n, seed)));
            let passed = report.passed();
            (ReplicateOutput::Step1(report), passed)
        }
    };
    if json {
        print!("{}", to_json(&output));
    } else {
        match &output {
            ReplicateOutput::Caselet(report) => {
                for line in report.checks() {
                    println!("{line}");
                }
                if let ReplicationReport::Theorem1(r) = report {
                    println!("m2: {} -> {}", r.truthful_assignment, r.deviant_assignment);
                }
            }
            ReplicateOutput::Step1(report) => {
                println!(
                    "step1 identities: {} women checked over {} profiles, {} failures",
                    report.women_checked,
                    report.profiles_examined,
                    report.failures.len()
                );
                for failure in report.failures.iter().take(5) {
                    println!("  {} fails {:?}", failure.woman, failure.failed_checks);
                }
            }
        }
        println!("result: {}", if passed { "PASS" } else { "FAIL" });
    }
    Ok(if passed { 0 } else { EXIT_WITNESS_EXPECTATION })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { mechanism, market, json } => cmd_run(mechanism, &market, json),
        Command::Stable { market, json } => cmd_stable(&market, json),
        Command::Check { mechanism, axiom, market, json, expect } => {
            cmd_check(mechanism, axiom, &market, json, &expect)
        }
        Command::Search {
            mechanism,
            axiom,
            size,
            domain,
            samples,
            seed,
            mode,
            budget,
            long_run,
            workers,
            json,
            expect,
        } => cmd_search(
            mechanism, axiom, size, domain, samples, seed, mode, budget, long_run, workers, json,
            &expect,
        ),
        Command::Replicate { target, size, samples, seed, json } => {
            cmd_replicate(target, size, samples, seed, json)
        }
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
