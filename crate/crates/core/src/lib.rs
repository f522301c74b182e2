//! Two-sided one-to-one matching toolkit.
//!
//! The crate models marriage markets with outside options, runs the deferred
//! acceptance and immediate acceptance mechanisms on them, analyzes stability
//! by brute force, generates misrepresentation families (assignment-boosting
//! misreports, truncation strategies, the full misreport space), audits
//! mechanisms against incentive and stability axioms with replayable
//! witnesses, and sweeps whole profile domains in parallel to count or
//! collect counterexamples.
//!
//! Everything is a pure value: profiles and matchings are immutable after
//! construction and safe to share across sweep workers.

pub mod axioms;
pub mod fileio;
pub mod json;
pub mod market;
pub mod mechanisms;
pub mod replication;
pub mod stability;
pub mod strategy;
pub mod sweep;

pub use axioms::{
    audit_mechanism, check_axiom, check_boost_invariance, check_strategy_proofness,
    check_truncation_invariance, convert_boost_to_sp, Axiom, ConversionBranch, Witness,
};
pub use fileio::{parse_market, serialize_profile, ParseError};
pub use json::to_json;
pub use market::{
    enumerate_preferences, enumerate_profiles, validate_partner_map, AgentId, DomainRestriction,
    Market, MarketError, Matching, Partner, Preference, Profile, ProfileDomain, Side,
};
pub use mechanisms::{
    deferred_acceptance, immediate_acceptance, run_mechanism, Algorithm, MechanismId, MAN_DA,
    MAN_IA, WOMAN_DA, WOMAN_IA,
};
pub use replication::{
    construct_p_prime, construct_p_double_prime, replicate, verify_step1_identities,
    verify_step1_over_domain, NamedMarket, ReplicationReport,
};
pub use stability::{
    block_report, enumerate_matchings, enumerate_stable_matchings, is_individually_rational,
    is_stable, lattice_join, matched_agent_set, BlockReport, StabilityError,
};
pub use strategy::{
    all_misrepresentations, boost_misrepresentations, is_boost_misrepresentation,
    is_truncation_strategy, truncation_strategies, MisrepKind,
};
pub use sweep::{
    cross_validate, sweep, CrossValidationReport, SweepMode, SweepReport, SweepSpec, SweepWitness,
};
