//! Mechanism audits: strategy-proofness, boost-invariance,
//! truncation-invariance, stability and individual rationality, each
//! reporting violations as self-contained, re-checkable witnesses.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{AgentId, Matching, Partner, Preference, Profile};
use crate::mechanisms::{run_mechanism, MechanismId};
use crate::stability::{block_report, BlockReport};
use crate::strategy::{
    all_misrepresentations, boost_misrepresentations, is_boost_misrepresentation,
    is_truncation_strategy, truncation_strategies,
};

/// The auditable axioms.
#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum Axiom {
    StrategyProofness,
    BoostInvariance,
    TruncationInvariance,
    Stability,
    IndividualRationality,
}

impl Axiom {
    pub fn all() -> [Axiom; 5] {
        [
            Axiom::StrategyProofness,
            Axiom::BoostInvariance,
            Axiom::TruncationInvariance,
            Axiom::Stability,
            Axiom::IndividualRationality,
        ]
    }

    /// Short code used on the command line.
    pub fn code(&self) -> &'static str {
        match self {
            Axiom::StrategyProofness => "sp",
            Axiom::BoostInvariance => "boost",
            Axiom::TruncationInvariance => "trunc",
            Axiom::Stability => "stability",
            Axiom::IndividualRationality => "ir",
        }
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

impl FromStr for Axiom {
    type Err = String;

    fn from_str(s: &str) -> Result<Axiom, String> {
        match s {
            "sp" => Ok(Axiom::StrategyProofness),
            "boost" => Ok(Axiom::BoostInvariance),
            "trunc" => Ok(Axiom::TruncationInvariance),
            "stability" => Ok(Axiom::Stability),
            "ir" => Ok(Axiom::IndividualRationality),
            other => Err(format!(
                "unknown axiom `{other}` (expected sp, boost, trunc, stability or ir)"
            )),
        }
    }
}

/// A self-contained record of one axiom violation. Witnesses carry the full
/// profile and both outcomes so they can be replayed and re-checked in
/// isolation; [`Witness::verify`] does exactly that.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Witness {
    pub axiom: Axiom,
    pub mechanism: MechanismId,
    pub profile: Profile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<AgentId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub misreport: Option<Preference>,
    pub truthful_outcome: Matching,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviant_outcome: Option<Matching>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_report: Option<BlockReport>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WitnessError {
    #[error("witness for {axiom} is missing its {field} field")]
    MissingField { axiom: Axiom, field: &'static str },
    #[error("stored truthful outcome does not match a rerun of the mechanism")]
    TruthfulOutcomeMismatch,
    #[error("stored deviant outcome does not match a rerun of the mechanism")]
    DeviantOutcomeMismatch,
    #[error("stored block report does not match a recomputation")]
    BlockReportMismatch,
    #[error("the recorded violation condition does not hold: {0}")]
    ConditionFailed(String),
    #[error("witness is malformed: {0}")]
    Malformed(String),
}

impl Witness {
    fn deviation(&self) -> Result<(AgentId, &Preference, &Matching), WitnessError> {
        let missing = |field| WitnessError::MissingField { axiom: self.axiom, field };
        let agent = self.agent.ok_or(missing("agent"))?;
        let misreport = self.misreport.as_ref().ok_or(missing("misreport"))?;
        let deviant = self.deviant_outcome.as_ref().ok_or(missing("deviant_outcome"))?;
        Ok((agent, misreport, deviant))
    }

    /// Re-runs the mechanism on the stored inputs and re-evaluates the
    /// stored violation condition.
    pub fn verify(&self) -> Result<(), WitnessError> {
        let rerun = run_mechanism(self.mechanism, &self.profile);
        if rerun != self.truthful_outcome {
            return Err(WitnessError::TruthfulOutcomeMismatch);
        }
        match self.axiom {
            Axiom::StrategyProofness => {
                let (agent, misreport, deviant) = self.deviation()?;
                self.check_deviant_rerun(agent, misreport, deviant)?;
                let truth = self.profile.pref(agent);
                let got = deviant.partner(agent);
                let had = self.truthful_outcome.partner(agent);
                let profitable = truth
                    .prefers(got, had)
                    .map_err(|e| WitnessError::Malformed(e.to_string()))?;
                if !profitable {
                    return Err(WitnessError::ConditionFailed(format!(
                        "{agent} does not strictly prefer {got} over {had}"
                    )));
                }
            }
            Axiom::BoostInvariance | Axiom::TruncationInvariance => {
                let (agent, misreport, deviant) = self.deviation()?;
                self.check_deviant_rerun(agent, misreport, deviant)?;
                let truth = self.profile.pref(agent);
                let assignment = self.truthful_outcome.partner(agent);
                let admissible = match self.axiom {
                    Axiom::BoostInvariance => {
                        is_boost_misrepresentation(truth, assignment, misreport)
                    }
                    _ => is_truncation_strategy(truth, misreport),
                }
                .map_err(|e| WitnessError::Malformed(e.to_string()))?;
                if !admissible {
                    return Err(WitnessError::ConditionFailed(format!(
                        "misreport of {agent} is not in the audited family"
                    )));
                }
                if deviant.partner(agent) == assignment {
                    return Err(WitnessError::ConditionFailed(format!(
                        "assignment of {agent} did not change"
                    )));
                }
            }
            Axiom::Stability | Axiom::IndividualRationality => {
                let stored = self
                    .block_report
                    .as_ref()
                    .ok_or(WitnessError::MissingField { axiom: self.axiom, field: "block_report" })?;
                let recomputed = block_report(&self.profile, &self.truthful_outcome)
                    .map_err(|e| WitnessError::Malformed(e.to_string()))?;
                let relevant = match self.axiom {
                    Axiom::IndividualRationality => recomputed.individuals_only(),
                    _ => recomputed,
                };
                if *stored != relevant {
                    return Err(WitnessError::BlockReportMismatch);
                }
                if stored.is_empty() {
                    return Err(WitnessError::ConditionFailed(
                        "stored block report is empty".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn check_deviant_rerun(
        &self,
        agent: AgentId,
        misreport: &Preference,
        deviant: &Matching,
    ) -> Result<(), WitnessError> {
        if misreport.owner() != agent {
            return Err(WitnessError::Malformed(format!(
                "misreport owner {} is not the deviating agent {agent}",
                misreport.owner()
            )));
        }
        let deviated = self
            .profile
            .with_pref(misreport.clone())
            .map_err(|e| WitnessError::Malformed(e.to_string()))?;
        if run_mechanism(self.mechanism, &deviated) != *deviant {
            return Err(WitnessError::DeviantOutcomeMismatch);
        }
        Ok(())
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        match self.axiom {
            Axiom::StrategyProofness
            | Axiom::BoostInvariance
            | Axiom::TruncationInvariance => {
                let agent = self.agent.expect("deviation witness");
                let misreport = self.misreport.as_ref().expect("deviation witness");
                let had = self.truthful_outcome.partner(agent);
                let got = self.deviant_outcome.as_ref().expect("deviation witness").partner(agent);
                let order: Vec<String> =
                    misreport.order().iter().map(Partner::name).collect();
                format!(
                    "{} {agent} misreport ({}): {had} -> {got}",
                    self.axiom,
                    order.join(" ")
                )
            }
            Axiom::Stability | Axiom::IndividualRationality => {
                let report = self.block_report.as_ref().expect("block witness");
                let mut parts: Vec<String> =
                    report.blocking_individuals.iter().map(|a| a.name()).collect();
                parts.extend(
                    report.blocking_pairs.iter().map(|(m, w)| format!("({m},{w})")),
                );
                format!("{} outcome {} blocked by {}", self.axiom, self.truthful_outcome, parts.join(" "))
            }
        }
    }
}

/// Emits one witness per profitable unilateral deviation at this profile:
/// agent by agent, every misreport in the full space, others held at truth.
pub fn check_strategy_proofness(mech: MechanismId, profile: &Profile) -> Vec<Witness> {
    let truthful = run_mechanism(mech, profile);
    let mut witnesses = Vec::new();
    for agent in profile.market().agents() {
        let truth = profile.pref(agent);
        let had = truthful.partner(agent);
        for misreport in all_misrepresentations(truth) {
            let deviated = profile.with_pref(misreport.clone()).expect("valid misreport");
            let deviant = run_mechanism(mech, &deviated);
            let got = deviant.partner(agent);
            if truth.prefers(got, had).expect("valid partner") {
                witnesses.push(Witness {
                    axiom: Axiom::StrategyProofness,
                    mechanism: mech,
                    profile: profile.clone(),
                    agent: Some(agent),
                    misreport: Some(misreport),
                    truthful_outcome: truthful.clone(),
                    deviant_outcome: Some(deviant),
                    block_report: None,
                });
            }
        }
    }
    witnesses
}

fn check_invariance(
    mech: MechanismId,
    profile: &Profile,
    axiom: Axiom,
    generate: impl Fn(&Preference, Partner) -> Vec<Preference>,
) -> Vec<Witness> {
    let truthful = run_mechanism(mech, profile);
    let mut witnesses = Vec::new();
    for agent in profile.market().agents() {
        let truth = profile.pref(agent);
        let assignment = truthful.partner(agent);
        for misreport in generate(truth, assignment) {
            let deviated = profile.with_pref(misreport.clone()).expect("valid misreport");
            let deviant = run_mechanism(mech, &deviated);
            if deviant.partner(agent) != assignment {
                witnesses.push(Witness {
                    axiom,
                    mechanism: mech,
                    profile: profile.clone(),
                    agent: Some(agent),
                    misreport: Some(misreport),
                    truthful_outcome: truthful.clone(),
                    deviant_outcome: Some(deviant),
                    block_report: None,
                });
            }
        }
    }
    witnesses
}

/// Emits one witness per assignment-boosting misreport that changes the
/// deviating agent's assignment (any change counts, better or worse). The
/// truthful report is included in the generated family; it can never witness.
pub fn check_boost_invariance(mech: MechanismId, profile: &Profile) -> Vec<Witness> {
    check_invariance(mech, profile, Axiom::BoostInvariance, |truth, assignment| {
        boost_misrepresentations(truth, assignment, true).expect("assignment occurs in order")
    })
}

/// Emits one witness per truncation strategy that changes the deviating
/// agent's assignment.
pub fn check_truncation_invariance(mech: MechanismId, profile: &Profile) -> Vec<Witness> {
    check_invariance(mech, profile, Axiom::TruncationInvariance, |truth, _| {
        truncation_strategies(truth, true)
    })
}

/// Audits the mechanism's output at this profile for stability and
/// individual rationality; an empty block report yields no witnesses.
pub fn audit_mechanism(mech: MechanismId, profile: &Profile) -> Vec<Witness> {
    let truthful = run_mechanism(mech, profile);
    let report = block_report(profile, &truthful).expect("same market");
    let mut witnesses = Vec::new();
    if !report.is_empty() {
        witnesses.push(Witness {
            axiom: Axiom::Stability,
            mechanism: mech,
            profile: profile.clone(),
            agent: None,
            misreport: None,
            truthful_outcome: truthful.clone(),
            deviant_outcome: None,
            block_report: Some(report.clone()),
        });
    }
    if !report.blocking_individuals.is_empty() {
        witnesses.push(Witness {
            axiom: Axiom::IndividualRationality,
            mechanism: mech,
            profile: profile.clone(),
            agent: None,
            misreport: None,
            truthful_outcome: truthful,
            deviant_outcome: None,
            block_report: Some(report.individuals_only()),
        });
    }
    witnesses
}

/// Runs the checker for one axiom at one profile.
pub fn check_axiom(mech: MechanismId, profile: &Profile, axiom: Axiom) -> Vec<Witness> {
    match axiom {
        Axiom::StrategyProofness => check_strategy_proofness(mech, profile),
        Axiom::BoostInvariance => check_boost_invariance(mech, profile),
        Axiom::TruncationInvariance => check_truncation_invariance(mech, profile),
        Axiom::Stability | Axiom::IndividualRationality => audit_mechanism(mech, profile)
            .into_iter()
            .filter(|w| w.axiom == axiom)
            .collect(),
    }
}

/// Which of the two constructions produced the strategy-proofness witness.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConversionBranch {
    /// The boosting misreport is itself profitable at the truthful profile.
    ProfitAtTruth,
    /// Reverting to the truthful report is profitable when the deviated
    /// profile is taken as the truth.
    ProfitAtDeviated,
}

impl fmt::Display for ConversionBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConversionBranch::ProfitAtTruth => write!(f, "profit-at-truth"),
            ConversionBranch::ProfitAtDeviated => write!(f, "profit-at-deviated"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConversionError {
    #[error("input witness is not a boost-invariance witness (got {0})")]
    WrongAxiom(Axiom),
    #[error("input witness does not self-validate: {0}")]
    InvalidInput(WitnessError),
    #[error("neither conversion branch applies; this flags an implementation bug")]
    NoBranchApplies,
    #[error("converted witness does not self-validate: {0}")]
    InvalidOutput(WitnessError),
}

/// Turns a boost-invariance witness into a strategy-proofness witness for
/// the same mechanism and agent: either the misreport is profitable at the
/// truthful profile, or — because everything the misreport ranks above the
/// truthful assignment keeps its truthful rank — reverting to the truthful
/// report is profitable once the deviated profile is treated as the truth.
pub fn convert_boost_to_sp(
    witness: &Witness,
) -> Result<(Witness, ConversionBranch), ConversionError> {
    if witness.axiom != Axiom::BoostInvariance {
        return Err(ConversionError::WrongAxiom(witness.axiom));
    }
    witness.verify().map_err(ConversionError::InvalidInput)?;
    let agent = witness.agent.expect("verified");
    let misreport = witness.misreport.clone().expect("verified");
    let deviant_outcome = witness.deviant_outcome.clone().expect("verified");
    let truth = witness.profile.pref(agent).clone();
    let had = witness.truthful_outcome.partner(agent);
    let got = deviant_outcome.partner(agent);

    if truth.prefers(got, had).expect("valid partner") {
        let converted = Witness {
            axiom: Axiom::StrategyProofness,
            mechanism: witness.mechanism,
            profile: witness.profile.clone(),
            agent: Some(agent),
            misreport: Some(misreport),
            truthful_outcome: witness.truthful_outcome.clone(),
            deviant_outcome: Some(deviant_outcome),
            block_report: None,
        };
        converted.verify().map_err(ConversionError::InvalidOutput)?;
        return Ok((converted, ConversionBranch::ProfitAtTruth));
    }

    if misreport.prefers(had, got).expect("valid partner") {
        let deviated_profile =
            witness.profile.with_pref(misreport).expect("valid misreport");
        let converted = Witness {
            axiom: Axiom::StrategyProofness,
            mechanism: witness.mechanism,
            profile: deviated_profile,
            agent: Some(agent),
            misreport: Some(truth),
            truthful_outcome: deviant_outcome,
            deviant_outcome: Some(witness.truthful_outcome.clone()),
            block_report: None,
        };
        converted.verify().map_err(ConversionError::InvalidOutput)?;
        return Ok((converted, ConversionBranch::ProfitAtDeviated));
    }

    Err(ConversionError::NoBranchApplies)
}
