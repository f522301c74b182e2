//! The deferred acceptance and immediate acceptance mechanisms.
//!
//! Both are implemented as pure functions of a stated [`Profile`]; invalid
//! profiles are unrepresentable, so the mechanisms are total.

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::market::{AgentId, Matching, Partner, Profile, Side};

/// The two implemented algorithm families.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Algorithm {
    DeferredAcceptance,
    ImmediateAcceptance,
}

/// Identifier of one concrete mechanism: an algorithm plus the proposing
/// side. `(DeferredAcceptance, Man)` is the man-optimal stable mechanism and
/// `(DeferredAcceptance, Woman)` the woman-optimal one.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct MechanismId {
    pub algorithm: Algorithm,
    pub proposing_side: Side,
}

pub const MAN_DA: MechanismId =
    MechanismId { algorithm: Algorithm::DeferredAcceptance, proposing_side: Side::Man };
pub const WOMAN_DA: MechanismId =
    MechanismId { algorithm: Algorithm::DeferredAcceptance, proposing_side: Side::Woman };
pub const MAN_IA: MechanismId =
    MechanismId { algorithm: Algorithm::ImmediateAcceptance, proposing_side: Side::Man };
pub const WOMAN_IA: MechanismId =
    MechanismId { algorithm: Algorithm::ImmediateAcceptance, proposing_side: Side::Woman };

impl MechanismId {
    pub fn all() -> [MechanismId; 4] {
        [MAN_DA, WOMAN_DA, MAN_IA, WOMAN_IA]
    }

    /// Short code used on the command line and in reports.
    pub fn code(&self) -> &'static str {
        match (self.algorithm, self.proposing_side) {
            (Algorithm::DeferredAcceptance, Side::Man) => "mda",
            (Algorithm::DeferredAcceptance, Side::Woman) => "wda",
            (Algorithm::ImmediateAcceptance, Side::Man) => "mia",
            (Algorithm::ImmediateAcceptance, Side::Woman) => "wia",
        }
    }
}

impl fmt::Display for MechanismId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

impl FromStr for MechanismId {
    type Err = String;

    fn from_str(s: &str) -> Result<MechanismId, String> {
        match s {
            "mda" => Ok(MAN_DA),
            "wda" => Ok(WOMAN_DA),
            "mia" => Ok(MAN_IA),
            "wia" => Ok(WOMAN_IA),
            other => Err(format!("unknown mechanism `{other}` (expected mda, wda, mia or wia)")),
        }
    }
}

impl Serialize for MechanismId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for MechanismId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<MechanismId, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Runs the mechanism named by `id` on a stated profile.
pub fn run_mechanism(id: MechanismId, profile: &Profile) -> Matching {
    match id.algorithm {
        Algorithm::DeferredAcceptance => deferred_acceptance(profile, id.proposing_side),
        Algorithm::ImmediateAcceptance => immediate_acceptance(profile, id.proposing_side),
    }
}

/// Gale-Shapley deferred acceptance with `side` proposing.
///
/// Free proposers work down their lists in decreasing preference order and
/// stop at self (everything below is unacceptable to them). A receiver
/// tentatively holds the best acceptable proposer seen so far and rejects
/// everyone else. The default schedule serves free proposers first-in
/// first-out starting from ascending index; the outcome does not depend on
/// the schedule (see [`deferred_acceptance_scheduled`] and the property
/// tests).
pub fn deferred_acceptance(profile: &Profile, side: Side) -> Matching {
    deferred_acceptance_scheduled(profile, side, |_| 0)
}

/// Deferred acceptance with an explicit proposal schedule: at every step
/// `pick(n)` chooses which of the `n` currently free proposers acts, by
/// position in the free list (front = longest waiting).
pub fn deferred_acceptance_scheduled(
    profile: &Profile,
    side: Side,
    mut pick: impl FnMut(usize) -> usize,
) -> Matching {
    let market = profile.market();
    let proposers: Vec<AgentId> = market.side_agents(side).collect();
    let mut next_choice = vec![0usize; proposers.len()];
    // Receiver index -> proposer index currently held.
    let mut held: Vec<Option<usize>> = vec![None; market.opposite_size(side)];
    let mut free: Vec<usize> = (0..proposers.len()).collect();

    while !free.is_empty() {
        let slot = pick(free.len());
        let p = free[slot];
        let pref = profile.pref(proposers[p]);
        let entry = pref.order()[next_choice[p]];
        next_choice[p] += 1;
        match entry {
            Partner::Single => {
                // Exhausted all acceptable receivers; stays single.
                free.remove(slot);
            }
            Partner::Agent(receiver) => {
                let receiver_pref = profile.pref(receiver);
                let me = Partner::Agent(proposers[p]);
                if !receiver_pref.is_acceptable(me).expect("valid partner") {
                    continue; // rejected outright, proposer stays free
                }
                match held[receiver.index] {
                    None => {
                        held[receiver.index] = Some(p);
                        free.remove(slot);
                    }
                    Some(current) => {
                        let cur = Partner::Agent(proposers[current]);
                        if receiver_pref.prefers(me, cur).expect("valid partners") {
                            held[receiver.index] = Some(p);
                            free[slot] = current; // displaced proposer is free again
                        }
                    }
                }
            }
        }
    }

    let mut partners = vec![Partner::Single; market.num_agents()];
    for (r, holder) in held.iter().enumerate() {
        if let Some(p) = holder {
            let receiver = AgentId { side: side.opposite(), index: r };
            partners[market.ordinal(proposers[*p])] = Partner::Agent(receiver);
            partners[market.ordinal(receiver)] = Partner::Agent(proposers[*p]);
        }
    }
    Matching::new(market, partners).expect("construction is involutive")
}

/// The immediate acceptance (Boston) mechanism with `side` proposing.
///
/// In round `k` every proposer still in the market proposes to the `k`-th
/// entry of its list. An entry of self makes the proposer leave single; an
/// entry naming an already-matched receiver is a wasted proposal (the
/// proposer does not advance within the round). Each receiver still in the
/// market permanently accepts her favorite proposer of the round, by her
/// stated list, and rejects the rest.
pub fn immediate_acceptance(profile: &Profile, side: Side) -> Matching {
    let market = profile.market();
    let proposers: Vec<AgentId> = market.side_agents(side).collect();
    let num_receivers = market.opposite_size(side);
    let mut proposer_active = vec![true; proposers.len()];
    let mut receiver_active = vec![true; num_receivers];
    let mut partners = vec![Partner::Single; market.num_agents()];

    let rounds = num_receivers + 1; // every list ends at self by then
    for k in 0..rounds {
        let mut proposals: Vec<Vec<usize>> = vec![Vec::new(); num_receivers];
        for (p, active) in proposer_active.iter_mut().enumerate() {
            if !*active {
                continue;
            }
            match profile.pref(proposers[p]).order()[k] {
                Partner::Single => *active = false,
                Partner::Agent(receiver) => {
                    if receiver_active[receiver.index] {
                        proposals[receiver.index].push(p);
                    }
                }
            }
        }
        for (r, candidates) in proposals.iter().enumerate() {
            if candidates.is_empty() {
                continue;
            }
            let receiver = AgentId { side: side.opposite(), index: r };
            let receiver_pref = profile.pref(receiver);
            let best = *candidates
                .iter()
                .min_by_key(|&&p| {
                    receiver_pref.rank(Partner::Agent(proposers[p])).expect("valid partner")
                })
                .expect("nonempty");
            partners[market.ordinal(proposers[best])] = Partner::Agent(receiver);
            partners[market.ordinal(receiver)] = Partner::Agent(proposers[best]);
            proposer_active[best] = false;
            receiver_active[r] = false;
        }
        if proposer_active.iter().all(|a| !a) {
            break;
        }
    }
    Matching::new(market, partners).expect("construction is involutive")
}
