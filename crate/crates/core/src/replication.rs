//! Named reference markets and executable case studies on them: the bundled
//! `example1` market separates truncation strategies from assignment-boosting
//! misreports, and the bundled `theorem1` market exhibits a boosting
//! misreport that moves its sender under the woman-optimal stable mechanism.
//! `verify_step1_identities` checks the chain of identities that pins the
//! woman-optimal outcome after a woman truncates right below her match.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::fileio::parse_market;
use crate::market::{
    AgentId, DomainRestriction, Market, Matching, Partner, Preference, Profile, ProfileDomain,
    Side,
};
use crate::mechanisms::{deferred_acceptance, run_mechanism, MAN_DA, WOMAN_DA};
use crate::stability::enumerate_stable_matchings;
use crate::strategy::{is_boost_misrepresentation, truncation_strategies};
use crate::strategy::boost_misrepresentations;

pub const EXAMPLE1_TEXT: &str = "\
market 2 2
m1: w2 w1 self
m2: w1 w2 self
w1: m1 m2 self
w2: m2 m1 self
";

pub const THEOREM1_TEXT: &str = "\
market 3 3
m1: w2 w3 w1 self
m2: w1 w2 w3 self
m3: w1 w3 w2 self
w1: m1 m2 m3 self
w2: m2 m3 m1 self
w3: m2 m1 m3 self
";

/// The bundled reference markets.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedMarket {
    Example1,
    Theorem1Step2,
}

impl NamedMarket {
    pub fn profile(&self) -> Profile {
        let text = match self {
            NamedMarket::Example1 => EXAMPLE1_TEXT,
            NamedMarket::Theorem1Step2 => THEOREM1_TEXT,
        };
        parse_market(text).expect("bundled market text is valid")
    }

    pub fn name(&self) -> &'static str {
        match self {
            NamedMarket::Example1 => "example1",
            NamedMarket::Theorem1Step2 => "theorem1",
        }
    }
}

impl FromStr for NamedMarket {
    type Err = String;

    fn from_str(s: &str) -> Result<NamedMarket, String> {
        match s {
            "example1" => Ok(NamedMarket::Example1),
            "theorem1" => Ok(NamedMarket::Theorem1Step2),
            other => Err(format!("unknown named market `{other}`")),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplicationError {
    #[error("{agent} is not a woman; the construction truncates a woman's list")]
    NotAWoman { agent: AgentId },
    #[error("{agent} is single under the woman-proposing outcome; the construction needs a match")]
    NotApplicable { agent: AgentId },
    #[error("{assignment} does not occur in the list of {agent}")]
    BadAssignment { agent: AgentId, assignment: Partner },
}

/// Copies the truthful prefix down to and including `pivot`, places self
/// immediately after, and completes with the remaining entries in truthful
/// order. The completion below self is arbitrary for every use of this
/// construction; the truthful order is the fixed canonical choice.
fn truncate_after(truth: &Preference, pivot: Partner) -> Preference {
    let cut = truth.rank(pivot).expect("pivot occurs in order");
    let mut order: Vec<Partner> = truth.order()[..cut].to_vec();
    order.push(Partner::Single);
    order.extend(truth.order()[cut..].iter().copied().filter(|p| !p.is_single()));
    Preference::from_order_unchecked(truth.owner(), order)
}

/// The truncation a woman submits right below her woman-proposing match:
/// everything down to the match is kept verbatim, self comes next, and the
/// remaining men follow in truthful order.
pub fn construct_p_prime(profile: &Profile, woman: AgentId) -> Result<Preference, ReplicationError> {
    if woman.side != Side::Woman {
        return Err(ReplicationError::NotAWoman { agent: woman });
    }
    let matched = deferred_acceptance(profile, Side::Woman).partner(woman);
    if matched.is_single() {
        return Err(ReplicationError::NotApplicable { agent: woman });
    }
    Ok(truncate_after(profile.pref(woman), matched))
}

/// The same truncation shape applied at an arbitrary audited assignment:
/// keep the truthful prefix down to `phi_assignment`, then self, then the
/// rest in truthful order. When the audited assignment is self this
/// degenerates to the truthful preference itself.
pub fn construct_p_double_prime(
    profile: &Profile,
    woman: AgentId,
    phi_assignment: Partner,
) -> Result<Preference, ReplicationError> {
    if woman.side != Side::Woman {
        return Err(ReplicationError::NotAWoman { agent: woman });
    }
    let truth = profile.pref(woman);
    if phi_assignment.is_single() {
        return Ok(truth.clone());
    }
    if truth.rank(phi_assignment).is_err() {
        return Err(ReplicationError::BadAssignment { agent: woman, assignment: phi_assignment });
    }
    Ok(truncate_after(truth, phi_assignment))
}

/// One named assertion with its outcome.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckLine {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> CheckLine {
        CheckLine { name: name.to_string(), passed, detail: detail.into() }
    }
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}: {}", self.name, self.detail)
    }
}

/// Identity chain for one woman's post-match truncation.
#[derive(Clone, Debug, Serialize)]
pub struct Step1Report {
    pub woman: AgentId,
    pub truncation: Preference,
    pub checks: Vec<CheckLine>,
}

impl Step1Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Verifies, at the profile deviated by the woman's post-match truncation:
/// the woman-proposing outcome is unchanged, the man-proposing outcome keeps
/// the woman matched and agrees with the woman-proposing one on her partner,
/// and every stable matching of the deviated profile gives her that same
/// partner.
pub fn verify_step1_identities(
    profile: &Profile,
    woman: AgentId,
) -> Result<Step1Report, ReplicationError> {
    let truncation = construct_p_prime(profile, woman)?;
    let truthful_wda = deferred_acceptance(profile, Side::Woman);
    let her_match = truthful_wda.partner(woman);
    let deviated = profile.with_pref(truncation.clone()).expect("valid truncation");
    let deviated_wda = run_mechanism(WOMAN_DA, &deviated);
    let deviated_mda = run_mechanism(MAN_DA, &deviated);
    let wda_match = deviated_wda.partner(woman);
    let mda_match = deviated_mda.partner(woman);

    let mut checks = Vec::new();
    checks.push(CheckLine::new(
        "wda-fixed-point",
        deviated_wda == truthful_wda,
        format!("woman-proposing outcome {deviated_wda} vs truthful {truthful_wda}"),
    ));
    checks.push(CheckLine::new(
        "mda-in-two-element-set",
        mda_match.is_single() || mda_match == wda_match,
        format!("man-proposing gives {woman} {mda_match}; allowed: self or {wda_match}"),
    ));
    checks.push(CheckLine::new(
        "matched-set-keeps-woman",
        !mda_match.is_single(),
        format!("man-proposing gives {woman} {mda_match}"),
    ));
    checks.push(CheckLine::new(
        "extremes-agree-on-woman",
        mda_match == wda_match && wda_match == her_match,
        format!("man-proposing {mda_match}, woman-proposing {wda_match}, truthful {her_match}"),
    ));
    let stable = enumerate_stable_matchings(&deviated).expect("desk-scale market");
    let all_agree = stable.iter().all(|m| m.partner(woman) == her_match);
    checks.push(CheckLine::new(
        "stable-set-agrees-on-woman",
        all_agree,
        format!("{} stable matchings at the deviated profile", stable.len()),
    ));
    Ok(Step1Report { woman, truncation, checks })
}

/// Outcome of sweeping `verify_step1_identities` over a profile domain.
#[derive(Clone, Debug, Serialize)]
pub struct Step1SweepReport {
    pub market: Market,
    pub profiles_examined: u64,
    pub women_checked: u64,
    pub failures: Vec<Step1Failure>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Step1Failure {
    pub profile: Profile,
    pub woman: AgentId,
    pub failed_checks: Vec<CheckLine>,
}

impl Step1SweepReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs the identity chain for every matched woman across the all-acceptable
/// domain of `market`; `sample` restricts the sweep to `(count, seed)` random
/// profiles of that domain.
pub fn verify_step1_over_domain(
    market: Market,
    sample: Option<(u64, u64)>,
) -> Step1SweepReport {
    let domain = ProfileDomain::new(market, DomainRestriction::AllAcceptable)
        .expect("domain size fits");
    let indices: Vec<u128> = match sample {
        None => (0..domain.size()).collect(),
        Some((count, seed)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count).map(|_| rng.gen_range(0..domain.size())).collect()
        }
    };
    let mut report = Step1SweepReport {
        market,
        profiles_examined: 0,
        women_checked: 0,
        failures: Vec::new(),
    };
    for index in indices {
        let profile = domain.profile_at(index).expect("index in range");
        report.profiles_examined += 1;
        for woman in market.side_agents(Side::Woman) {
            let step1 = match verify_step1_identities(&profile, woman) {
                Ok(step1) => step1,
                Err(ReplicationError::NotApplicable { .. }) => continue,
                Err(e) => unreachable!("{e}"),
            };
            report.women_checked += 1;
            if !step1.passed() {
                report.failures.push(Step1Failure {
                    profile: profile.clone(),
                    woman,
                    failed_checks: step1.checks.into_iter().filter(|c| !c.passed).collect(),
                });
            }
        }
    }
    report
}

/// Replication report for [`NamedMarket::Example1`].
#[derive(Clone, Debug, Serialize)]
pub struct Example1Report {
    pub profile: Profile,
    pub woman_optimal: Matching,
    /// Non-identity truncation strategies of m1.
    pub truncation_set: Vec<Preference>,
    /// Non-identity boosting misreports of m1 at his woman-optimal match.
    pub boost_set: Vec<Preference>,
    pub checks: Vec<CheckLine>,
}

/// Replication report for [`NamedMarket::Theorem1Step2`].
#[derive(Clone, Debug, Serialize)]
pub struct Theorem1Report {
    pub profile: Profile,
    pub misreport: Preference,
    pub truthful_matching: Matching,
    pub deviant_matching: Matching,
    pub truthful_assignment: Partner,
    pub deviant_assignment: Partner,
    pub checks: Vec<CheckLine>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "market", rename_all = "lowercase")]
pub enum ReplicationReport {
    Example1(Example1Report),
    Theorem1(Theorem1Report),
}

impl ReplicationReport {
    pub fn checks(&self) -> &[CheckLine] {
        match self {
            ReplicationReport::Example1(r) => &r.checks,
            ReplicationReport::Theorem1(r) => &r.checks,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }
}

fn order_of(entries: &[&str]) -> Vec<Partner> {
    entries.iter().map(|e| e.parse().expect("valid name")).collect()
}

fn same_set(a: &[Preference], b: &[Vec<Partner>]) -> bool {
    a.len() == b.len() && b.iter().all(|order| a.iter().any(|p| p.order() == order.as_slice()))
}

/// Recomputes the bundled case studies and asserts their frozen outcomes.
pub fn replicate(name: NamedMarket) -> ReplicationReport {
    match name {
        NamedMarket::Example1 => {
            let profile = name.profile();
            let m1 = AgentId::man(0);
            let woman_optimal = deferred_acceptance(&profile, Side::Woman);
            let expected_matching = Matching::from_pairs(
                profile.market(),
                &[(AgentId::man(0), AgentId::woman(0)), (AgentId::man(1), AgentId::woman(1))],
            )
            .expect("valid pairs");
            let assignment = woman_optimal.partner(m1);
            let truncation_set = truncation_strategies(profile.pref(m1), false);
            let boost_set = boost_misrepresentations(profile.pref(m1), assignment, false)
                .expect("assignment occurs in order");

            let expected_truncations = [
                order_of(&["w2", "self", "w1"]),
                order_of(&["self", "w1", "w2"]),
                order_of(&["self", "w2", "w1"]),
            ];
            let expected_boosts =
                [order_of(&["w1", "w2", "self"]), order_of(&["w1", "self", "w2"])];
            let disjoint = boost_set.iter().all(|b| !truncation_set.contains(b));

            let checks = vec![
                CheckLine::new(
                    "woman-optimal-outcome",
                    woman_optimal == expected_matching,
                    format!("{woman_optimal}"),
                ),
                CheckLine::new(
                    "truncation-set",
                    same_set(&truncation_set, &expected_truncations),
                    format!("{} non-identity truncations of m1", truncation_set.len()),
                ),
                CheckLine::new(
                    "boost-set",
                    same_set(&boost_set, &expected_boosts),
                    format!("{} non-identity boosting misreports of m1", boost_set.len()),
                ),
                CheckLine::new(
                    "families-disjoint",
                    disjoint,
                    "no misreport is in both families here",
                ),
            ];
            ReplicationReport::Example1(Example1Report {
                profile,
                woman_optimal,
                truncation_set,
                boost_set,
                checks,
            })
        }
        NamedMarket::Theorem1Step2 => {
            let profile = name.profile();
            let m2 = AgentId::man(1);
            let misreport = Preference::new(
                &profile.market(),
                m2,
                order_of(&["w1", "w3", "w2", "self"]),
            )
            .expect("valid order");
            let truthful_matching = deferred_acceptance(&profile, Side::Woman);
            let deviated = profile.with_pref(misreport.clone()).expect("valid misreport");
            let deviant_matching = deferred_acceptance(&deviated, Side::Woman);
            let truthful_assignment = truthful_matching.partner(m2);
            let deviant_assignment = deviant_matching.partner(m2);

            let expected_truthful = Matching::from_pairs(
                profile.market(),
                &[
                    (AgentId::man(0), AgentId::woman(2)),
                    (AgentId::man(1), AgentId::woman(0)),
                    (AgentId::man(2), AgentId::woman(1)),
                ],
            )
            .expect("valid pairs");
            let expected_deviant = Matching::from_pairs(
                profile.market(),
                &[
                    (AgentId::man(0), AgentId::woman(0)),
                    (AgentId::man(1), AgentId::woman(2)),
                    (AgentId::man(2), AgentId::woman(1)),
                ],
            )
            .expect("valid pairs");
            let is_boost =
                is_boost_misrepresentation(profile.pref(m2), truthful_assignment, &misreport)
                    .expect("same owner");

            let checks = vec![
                CheckLine::new(
                    "truthful-outcome",
                    truthful_matching == expected_truthful,
                    format!("{truthful_matching}"),
                ),
                CheckLine::new(
                    "deviated-outcome",
                    deviant_matching == expected_deviant,
                    format!("{deviant_matching}"),
                ),
                CheckLine::new(
                    "misreport-boosts-assignment",
                    is_boost,
                    format!("misreport {misreport} keeps everything above {truthful_assignment}"),
                ),
                CheckLine::new(
                    "m2-assignment-changes",
                    truthful_assignment.name() == "w1" && deviant_assignment.name() == "w3",
                    format!("m2: {truthful_assignment} -> {deviant_assignment}"),
                ),
            ];
            ReplicationReport::Theorem1(Theorem1Report {
                profile,
                misreport,
                truthful_matching,
                deviant_matching,
                truthful_assignment,
                deviant_assignment,
                checks,
            })
        }
    }
}
