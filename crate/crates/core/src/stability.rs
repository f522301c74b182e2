//! Blocking analysis, brute-force stable-set enumeration, lattice joins, and
//! the matched-set query behind the rural hospital property tests.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{AgentId, Market, Matching, Partner, Profile, Side};

/// Side-by-side market size above which brute-force enumeration refuses to
/// run; callers that really want more pass an explicit bound.
pub const DEFAULT_BRUTE_FORCE_BOUND: usize = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StabilityError {
    #[error("matching belongs to a different market than the profile")]
    MarketMismatch,
    #[error("{which} input matching is not stable with respect to the profile")]
    NotStable { which: &'static str },
    #[error("market side size {size} exceeds the brute-force bound {bound}")]
    AboveBruteForceBound { size: usize, bound: usize },
}

/// Everything that blocks a matching: agents preferring to stay single, and
/// man-woman pairs preferring each other to their assigned partners. Empty
/// exactly when the matching is stable.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct BlockReport {
    pub blocking_individuals: Vec<AgentId>,
    pub blocking_pairs: Vec<(AgentId, AgentId)>,
}

impl BlockReport {
    pub fn is_empty(&self) -> bool {
        self.blocking_individuals.is_empty() && self.blocking_pairs.is_empty()
    }

    /// The report restricted to individual blocks.
    pub fn individuals_only(&self) -> BlockReport {
        BlockReport {
            blocking_individuals: self.blocking_individuals.clone(),
            blocking_pairs: Vec::new(),
        }
    }
}

/// Computes all blocking individuals and blocking pairs of `matching` under
/// `profile`, in ascending agent order.
pub fn block_report(profile: &Profile, matching: &Matching) -> Result<BlockReport, StabilityError> {
    if matching.market() != profile.market() {
        return Err(StabilityError::MarketMismatch);
    }
    let market = profile.market();
    let mut report = BlockReport::default();
    for agent in market.agents() {
        let assigned = matching.partner(agent);
        if profile.pref(agent).prefers(Partner::Single, assigned).expect("valid partner") {
            report.blocking_individuals.push(agent);
        }
    }
    for man in market.side_agents(Side::Man) {
        for woman in market.side_agents(Side::Woman) {
            let he_wants = profile
                .pref(man)
                .prefers(Partner::Agent(woman), matching.partner(man))
                .expect("valid partner");
            let she_wants = profile
                .pref(woman)
                .prefers(Partner::Agent(man), matching.partner(woman))
                .expect("valid partner");
            if he_wants && she_wants {
                report.blocking_pairs.push((man, woman));
            }
        }
    }
    Ok(report)
}

pub fn is_stable(profile: &Profile, matching: &Matching) -> Result<bool, StabilityError> {
    Ok(block_report(profile, matching)?.is_empty())
}

pub fn is_individually_rational(
    profile: &Profile,
    matching: &Matching,
) -> Result<bool, StabilityError> {
    Ok(block_report(profile, matching)?.blocking_individuals.is_empty())
}

/// Enumerates every matching of the market: all partial injections from men
/// to women, everyone else single. Order is deterministic: by the bitmask of
/// matched men ascending, then lexicographic over the chosen women.
pub fn enumerate_matchings(market: &Market) -> Vec<Matching> {
    let men: Vec<AgentId> = market.side_agents(Side::Man).collect();
    let women: Vec<AgentId> = market.side_agents(Side::Woman).collect();
    let mut out = Vec::new();
    for mask in 0u64..(1 << men.len()) {
        let chosen: Vec<AgentId> =
            men.iter().copied().filter(|m| mask & (1 << m.index) != 0).collect();
        if chosen.len() > women.len() {
            continue;
        }
        let mut assignment: Vec<Option<AgentId>> = vec![None; chosen.len()];
        let mut used = vec![false; women.len()];
        fn fill(
            slot: usize,
            chosen: &[AgentId],
            women: &[AgentId],
            used: &mut [bool],
            assignment: &mut [Option<AgentId>],
            market: &Market,
            out: &mut Vec<Matching>,
        ) {
            if slot == chosen.len() {
                let pairs: Vec<(AgentId, AgentId)> = chosen
                    .iter()
                    .copied()
                    .zip(assignment.iter().map(|w| w.expect("filled")))
                    .collect();
                out.push(Matching::from_pairs(*market, &pairs).expect("valid pairs"));
                return;
            }
            for (wi, woman) in women.iter().enumerate() {
                if !used[wi] {
                    used[wi] = true;
                    assignment[slot] = Some(*woman);
                    fill(slot + 1, chosen, women, used, assignment, market, out);
                    used[wi] = false;
                }
            }
        }
        fill(0, &chosen, &women, &mut used, &mut assignment, market, &mut out);
    }
    out
}

/// The complete set of stable matchings, by exhaustive filtering.
pub fn enumerate_stable_matchings(profile: &Profile) -> Result<Vec<Matching>, StabilityError> {
    enumerate_stable_matchings_bounded(profile, DEFAULT_BRUTE_FORCE_BOUND)
}

pub fn enumerate_stable_matchings_bounded(
    profile: &Profile,
    bound: usize,
) -> Result<Vec<Matching>, StabilityError> {
    let market = profile.market();
    let size = market.num_men().max(market.num_women());
    if size > bound {
        return Err(StabilityError::AboveBruteForceBound { size, bound });
    }
    Ok(enumerate_matchings(&market)
        .into_iter()
        .filter(|m| is_stable(profile, m).expect("same market"))
        .collect())
}

/// Pointwise join of two stable matchings: every agent of `side` keeps the
/// preferred of its two partners and every agent of the other side the less
/// preferred. The result is a stable matching by the lattice structure of the
/// stable set; stability of the output is asserted by property tests rather
/// than checked here.
pub fn lattice_join(
    profile: &Profile,
    a: &Matching,
    b: &Matching,
    side: Side,
) -> Result<Matching, StabilityError> {
    if !is_stable(profile, a)? {
        return Err(StabilityError::NotStable { which: "first" });
    }
    if !is_stable(profile, b)? {
        return Err(StabilityError::NotStable { which: "second" });
    }
    let market = profile.market();
    let partners: Vec<Partner> = market
        .agents()
        .map(|agent| {
            let (x, y) = (a.partner(agent), b.partner(agent));
            let x_preferred = x == y || profile.pref(agent).prefers(x, y).expect("valid partner");
            let take_better = agent.side == side;
            if x_preferred == take_better {
                x
            } else {
                y
            }
        })
        .collect();
    Ok(Matching::new(market, partners).expect("join of stable matchings is a matching"))
}

/// Agents not matched to themselves. Callers pass a stable matching; the
/// rural hospital property says this set is an invariant of the profile.
pub fn matched_agent_set(matching: &Matching) -> BTreeSet<AgentId> {
    matching
        .market()
        .agents()
        .filter(|&a| !matching.partner(a).is_single())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{DomainRestriction, Preference, ProfileDomain};
    use crate::mechanisms::deferred_acceptance;

    fn profile(num_men: usize, num_women: usize, lists: &[(&str, &[&str])]) -> Profile {
        let market = Market::new(num_men, num_women).unwrap();
        let prefs = lists
            .iter()
            .map(|(owner, entries)| {
                let owner: AgentId = owner.parse().unwrap();
                let order = entries.iter().map(|e| e.parse().unwrap()).collect();
                Preference::new(&market, owner, order).unwrap()
            })
            .collect();
        Profile::new(market, prefs).unwrap()
    }

    fn two_by_two() -> Profile {
        profile(
            2,
            2,
            &[
                ("m1", &["w2", "w1", "self"]),
                ("m2", &["w1", "w2", "self"]),
                ("w1", &["m1", "m2", "self"]),
                ("w2", &["m2", "m1", "self"]),
            ],
        )
    }

    fn three_by_three() -> Profile {
        profile(
            3,
            3,
            &[
                ("m1", &["w2", "w3", "w1", "self"]),
                ("m2", &["w1", "w2", "w3", "self"]),
                ("m3", &["w1", "w3", "w2", "self"]),
                ("w1", &["m1", "m2", "m3", "self"]),
                ("w2", &["m2", "m3", "m1", "self"]),
                ("w3", &["m2", "m1", "m3", "self"]),
            ],
        )
    }

    fn pairs(spec: &[(usize, usize)], market: Market) -> Matching {
        let list: Vec<(AgentId, AgentId)> =
            spec.iter().map(|&(m, w)| (AgentId::man(m), AgentId::woman(w))).collect();
        Matching::from_pairs(market, &list).unwrap()
    }

    #[test]
    fn boxed_matching_is_stable() {
        let p = three_by_three();
        let boxed = pairs(&[(0, 2), (1, 0), (2, 1)], p.market());
        let report = block_report(&p, &boxed).unwrap();
        assert!(report.is_empty());
        assert!(is_stable(&p, &boxed).unwrap());
    }

    #[test]
    fn all_single_under_mutual_interest_is_blocked() {
        let p = two_by_two();
        let lonely = Matching::everyone_single(p.market());
        let report = block_report(&p, &lonely).unwrap();
        assert!(report.blocking_individuals.is_empty());
        assert!(report
            .blocking_pairs
            .contains(&(AgentId::man(0), AgentId::woman(0))));
        assert!(is_individually_rational(&p, &lonely).unwrap());
        assert!(!is_stable(&p, &lonely).unwrap());
    }

    #[test]
    fn matched_agent_preferring_single_blocks_individually() {
        let p = profile(
            1,
            1,
            &[("m1", &["self", "w1"]), ("w1", &["m1", "self"])],
        );
        let matched = pairs(&[(0, 0)], p.market());
        let report = block_report(&p, &matched).unwrap();
        assert_eq!(report.blocking_individuals, vec![AgentId::man(0)]);
    }

    #[test]
    fn all_single_is_stable_when_nobody_is_acceptable() {
        let p = profile(
            2,
            2,
            &[
                ("m1", &["self", "w1", "w2"]),
                ("m2", &["self", "w2", "w1"]),
                ("w1", &["self", "m1", "m2"]),
                ("w2", &["self", "m2", "m1"]),
            ],
        );
        let lonely = Matching::everyone_single(p.market());
        assert!(is_stable(&p, &lonely).unwrap());
        let stable = enumerate_stable_matchings(&p).unwrap();
        assert_eq!(stable, vec![lonely]);
    }

    #[test]
    fn market_mismatch_is_an_error() {
        let p = two_by_two();
        let other = Matching::everyone_single(Market::new(3, 3).unwrap());
        assert_eq!(block_report(&p, &other).unwrap_err(), StabilityError::MarketMismatch);
    }

    #[test]
    fn matching_enumeration_counts() {
        // 2x2: empty + 2x(one pair) x2 + 2 full = 7.
        assert_eq!(enumerate_matchings(&Market::new(2, 2).unwrap()).len(), 7);
        // 3x3: sum over k of C(3,k)^2 * k! = 1 + 9 + 18 + 6 = 34.
        assert_eq!(enumerate_matchings(&Market::new(3, 3).unwrap()).len(), 34);
        // Unbalanced 1x2: empty + two pairs = 3.
        assert_eq!(enumerate_matchings(&Market::new(1, 2).unwrap()).len(), 3);
    }

    /// Stability check written directly from the definitions, independent of
    /// `block_report`, used as the oracle for the enumeration tests.
    fn oracle_is_stable(profile: &Profile, matching: &Matching) -> bool {
        let market = profile.market();
        let ir = market.agents().all(|a| {
            let assigned = matching.partner(a);
            assigned.is_single() || profile.pref(a).prefers(assigned, Partner::Single).unwrap()
        });
        let unblocked = market.side_agents(Side::Man).all(|m| {
            market.side_agents(Side::Woman).all(|w| {
                !(profile.pref(m).prefers(Partner::Agent(w), matching.partner(m)).unwrap()
                    && profile.pref(w).prefers(Partner::Agent(m), matching.partner(w)).unwrap())
            })
        });
        ir && unblocked
    }

    #[test]
    fn stable_set_of_two_by_two() {
        let p = two_by_two();
        let stable = enumerate_stable_matchings(&p).unwrap();
        let expected = [
            pairs(&[(0, 0), (1, 1)], p.market()),
            pairs(&[(0, 1), (1, 0)], p.market()),
        ];
        assert_eq!(stable.len(), 2);
        assert!(expected.iter().all(|m| stable.contains(m)));
        for m in enumerate_matchings(&p.market()) {
            assert_eq!(stable.contains(&m), oracle_is_stable(&p, &m));
        }
    }

    #[test]
    fn stable_set_of_three_by_three() {
        let p = three_by_three();
        let stable = enumerate_stable_matchings(&p).unwrap();
        let boxed = pairs(&[(0, 2), (1, 0), (2, 1)], p.market());
        let man_optimal = pairs(&[(0, 1), (1, 0), (2, 2)], p.market());
        assert_eq!(stable.len(), 2);
        assert!(stable.contains(&boxed));
        assert!(stable.contains(&man_optimal));
        for m in enumerate_matchings(&p.market()) {
            assert_eq!(stable.contains(&m), oracle_is_stable(&p, &m));
        }
    }

    #[test]
    fn bound_is_enforced() {
        let market = Market::new(6, 6).unwrap();
        let domain = ProfileDomain::new(market, DomainRestriction::Sampled { count: 1, seed: 1 })
            .unwrap();
        let p = domain.profile_at(0).unwrap();
        assert_eq!(
            enumerate_stable_matchings(&p).unwrap_err(),
            StabilityError::AboveBruteForceBound { size: 6, bound: 5 }
        );
        assert!(enumerate_stable_matchings_bounded(&p, 6).is_ok());
    }

    #[test]
    fn join_is_idempotent() {
        let p = two_by_two();
        let stable = enumerate_stable_matchings(&p).unwrap();
        for m in &stable {
            for side in [Side::Man, Side::Woman] {
                assert_eq!(&lattice_join(&p, m, m, side).unwrap(), m);
            }
        }
    }

    #[test]
    fn join_extremes_on_two_by_two() {
        let p = two_by_two();
        let woman_best = pairs(&[(0, 0), (1, 1)], p.market());
        let man_best = pairs(&[(0, 1), (1, 0)], p.market());
        assert_eq!(lattice_join(&p, &woman_best, &man_best, Side::Man).unwrap(), man_best);
        assert_eq!(lattice_join(&p, &woman_best, &man_best, Side::Woman).unwrap(), woman_best);
    }

    #[test]
    fn join_requires_stable_inputs() {
        let p = two_by_two();
        let stable = enumerate_stable_matchings(&p).unwrap();
        let lonely = Matching::everyone_single(p.market());
        assert_eq!(
            lattice_join(&p, &lonely, &stable[0], Side::Man).unwrap_err(),
            StabilityError::NotStable { which: "first" }
        );
    }

    #[test]
    fn matched_sets() {
        let p3 = three_by_three();
        let boxed = pairs(&[(0, 2), (1, 0), (2, 1)], p3.market());
        assert_eq!(matched_agent_set(&boxed).len(), 6);
        assert!(matched_agent_set(&Matching::everyone_single(p3.market())).is_empty());
        let p2 = two_by_two();
        let stable = enumerate_stable_matchings(&p2).unwrap();
        let sets: Vec<_> = stable.iter().map(matched_agent_set).collect();
        assert_eq!(sets[0], sets[1]);
        assert_eq!(sets[0].len(), 4);
    }

    #[test]
    fn rural_hospital_and_lattice_closure_on_2x2_full_domain() {
        let domain =
            ProfileDomain::new(Market::new(2, 2).unwrap(), DomainRestriction::Full).unwrap();
        for p in domain.iter() {
            let stable = enumerate_stable_matchings(&p).unwrap();
            assert!(!stable.is_empty(), "no stable matching for {p}");
            let reference = matched_agent_set(&stable[0]);
            for m in &stable {
                assert_eq!(matched_agent_set(m), reference, "rural hospital fails on {p}");
            }
            for a in &stable {
                for b in &stable {
                    for side in [Side::Man, Side::Woman] {
                        let join = lattice_join(&p, a, b, side).unwrap();
                        assert!(stable.contains(&join), "join left the stable set on {p}");
                    }
                }
            }
            // DA finds the side-optimal element of the enumerated set.
            for side in [Side::Man, Side::Woman] {
                let da = deferred_acceptance(&p, side);
                assert!(stable.contains(&da));
                for m in &stable {
                    for agent in p.market().side_agents(side) {
                        let ours = da.partner(agent);
                        let theirs = m.partner(agent);
                        assert!(
                            ours == theirs
                                || p.pref(agent).prefers(ours, theirs).unwrap(),
                            "{agent} prefers {theirs} over DA's {ours} on {p}"
                        );
                    }
                }
            }
        }
    }
}
