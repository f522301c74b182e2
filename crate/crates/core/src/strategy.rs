//! Misrepresentation generators: assignment-boosting misreports, truncation
//! strategies, and the full misreport space, plus the defining predicates
//! used to cross-check the generators.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{MarketError, Partner, Preference};

/// The misrepresentation families this module can generate.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MisrepKind {
    /// Raise a given assignment, keep everything above its new slot verbatim.
    BoostMisrepresentation,
    /// Raise self, keep everything above its new slot verbatim.
    TruncationStrategy,
    /// Any order other than the truthful one.
    Arbitrary,
}

impl fmt::Display for MisrepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MisrepKind::BoostMisrepresentation => "boost",
            MisrepKind::TruncationStrategy => "truncation",
            MisrepKind::Arbitrary => "arbitrary",
        };
        write!(f, "{s}")
    }
}

impl FromStr for MisrepKind {
    type Err = String;

    fn from_str(s: &str) -> Result<MisrepKind, String> {
        match s {
            "boost" => Ok(MisrepKind::BoostMisrepresentation),
            "truncation" | "trunc" => Ok(MisrepKind::TruncationStrategy),
            "arbitrary" => Ok(MisrepKind::Arbitrary),
            other => Err(format!("unknown misrepresentation kind `{other}`")),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StrategyError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("candidate preference belongs to {found}, expected {expected}")]
    OwnerMismatch { expected: String, found: String },
}

/// Canonical sort key for enumeration: opposite-side agents ascending, self
/// last.
fn symbol_key(p: &Partner) -> usize {
    match p {
        Partner::Agent(a) => a.index,
        Partner::Single => usize::MAX,
    }
}

/// All permutations of `items` in lexicographic order of the canonical
/// symbol key. Sizes here are tiny (at most the preference list length).
fn lex_permutations(items: &[Partner]) -> Vec<Vec<Partner>> {
    let mut sorted: Vec<Partner> = items.to_vec();
    sorted.sort_by_key(symbol_key);
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(sorted.len());
    fn recurse(
        pool: &[Partner],
        used: &mut Vec<bool>,
        current: &mut Vec<Partner>,
        out: &mut Vec<Vec<Partner>>,
    ) {
        if current.len() == pool.len() {
            out.push(current.clone());
            return;
        }
        for i in 0..pool.len() {
            if !used[i] {
                used[i] = true;
                current.push(pool[i]);
                recurse(pool, used, current, out);
                current.pop();
                used[i] = false;
            }
        }
    }
    let mut used = vec![false; sorted.len()];
    recurse(&sorted, &mut used, &mut current, &mut out);
    out
}

/// All orders obtained by moving `target` from its true position to some
/// weakly higher rank `r`, copying the true top `r-1` entries verbatim above
/// it and permuting everything else arbitrarily below. This is the shared
/// shape of boost misrepresentations (`target` = the assignment) and
/// truncation strategies (`target` = self).
fn raise_target(true_pref: &Preference, target: Partner, include_identity: bool) -> Vec<Preference> {
    let order = true_pref.order();
    let true_pos = order.iter().position(|&p| p == target).expect("target occurs in order");
    let mut out = Vec::new();
    for new_pos in 0..=true_pos {
        let prefix = &order[..new_pos];
        let tail: Vec<Partner> = order
            .iter()
            .copied()
            .filter(|p| *p != target && !prefix.contains(p))
            .collect();
        for tail_perm in lex_permutations(&tail) {
            let mut candidate = Vec::with_capacity(order.len());
            candidate.extend_from_slice(prefix);
            candidate.push(target);
            candidate.extend_from_slice(&tail_perm);
            if !include_identity && candidate == order {
                continue;
            }
            out.push(Preference::from_order_unchecked(true_pref.owner(), candidate));
        }
    }
    out
}

/// All misreports that weakly raise `assignment` while keeping every entry
/// above its new position at exactly its truthful rank. `assignment` is the
/// owner's match under the audited mechanism at the truthful profile,
/// supplied by the caller. With `include_identity` the truthful preference
/// itself is part of the set (it satisfies the defining implication).
pub fn boost_misrepresentations(
    true_pref: &Preference,
    assignment: Partner,
    include_identity: bool,
) -> Result<Vec<Preference>, StrategyError> {
    true_pref.rank(assignment).map_err(StrategyError::Market)?;
    Ok(raise_target(true_pref, assignment, include_identity))
}

/// All misreports that weakly raise self while keeping every entry above its
/// new position at exactly its truthful rank.
pub fn truncation_strategies(true_pref: &Preference, include_identity: bool) -> Vec<Preference> {
    raise_target(true_pref, Partner::Single, include_identity)
}

/// Every preference of the owner's type space except the truthful one, in
/// lexicographic order over the canonical symbol indexing.
pub fn all_misrepresentations(true_pref: &Preference) -> impl Iterator<Item = Preference> + '_ {
    lex_permutations(true_pref.order())
        .into_iter()
        .filter(|order| order.as_slice() != true_pref.order())
        .map(|order| Preference::from_order_unchecked(true_pref.owner(), order))
}

fn check_owner(true_pref: &Preference, candidate: &Preference) -> Result<(), StrategyError> {
    if candidate.owner() != true_pref.owner() || candidate.order().len() != true_pref.order().len()
    {
        return Err(StrategyError::OwnerMismatch {
            expected: true_pref.owner().name(),
            found: candidate.owner().name(),
        });
    }
    Ok(())
}

/// The defining predicate of a boost misrepresentation: every entry that the
/// candidate ranks strictly above `assignment` sits at exactly its truthful
/// rank.
pub fn is_boost_misrepresentation(
    true_pref: &Preference,
    assignment: Partner,
    candidate: &Preference,
) -> Result<bool, StrategyError> {
    check_owner(true_pref, candidate)?;
    let pivot = candidate.rank(assignment).map_err(StrategyError::Market)?;
    true_pref.rank(assignment).map_err(StrategyError::Market)?;
    for entry in candidate.order() {
        let candidate_rank = candidate.rank(*entry).expect("entry in order");
        if candidate_rank < pivot && candidate_rank != true_pref.rank(*entry)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The defining predicate of a truncation strategy: self weakly rises and
/// every entry above it keeps its truthful rank.
pub fn is_truncation_strategy(
    true_pref: &Preference,
    candidate: &Preference,
) -> Result<bool, StrategyError> {
    is_boost_misrepresentation(true_pref, Partner::Single, candidate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{AgentId, DomainRestriction, Market, enumerate_preferences};

    fn pref(market: &Market, owner: &str, entries: &[&str]) -> Preference {
        let owner: AgentId = owner.parse().unwrap();
        let order = entries.iter().map(|e| e.parse().unwrap()).collect();
        Preference::new(market, owner, order).unwrap()
    }

    fn orders(prefs: &[Preference]) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = prefs
            .iter()
            .map(|p| p.order().iter().map(Partner::name).collect())
            .collect();
        out.sort();
        out
    }

    #[test]
    fn boost_set_of_reference_2x2_agent() {
        let market = Market::new(2, 2).unwrap();
        let truth = pref(&market, "m1", &["w2", "w1", "self"]);
        let boosts =
            boost_misrepresentations(&truth, "w1".parse().unwrap(), false).unwrap();
        assert_eq!(
            orders(&boosts),
            vec![
                vec!["w1".to_string(), "self".to_string(), "w2".to_string()],
                vec!["w1".to_string(), "w2".to_string(), "self".to_string()],
            ]
        );
    }

    #[test]
    fn truncation_set_of_reference_2x2_agent() {
        let market = Market::new(2, 2).unwrap();
        let truth = pref(&market, "m1", &["w2", "w1", "self"]);
        let truncations = truncation_strategies(&truth, false);
        assert_eq!(
            orders(&truncations),
            vec![
                vec!["self".to_string(), "w1".to_string(), "w2".to_string()],
                vec!["self".to_string(), "w2".to_string(), "w1".to_string()],
                vec!["w2".to_string(), "self".to_string(), "w1".to_string()],
            ]
        );
    }

    #[test]
    fn boost_and_truncation_sets_are_disjoint_here() {
        let market = Market::new(2, 2).unwrap();
        let truth = pref(&market, "m1", &["w2", "w1", "self"]);
        let boosts =
            boost_misrepresentations(&truth, "w1".parse().unwrap(), false).unwrap();
        let truncations = truncation_strategies(&truth, false);
        for b in &boosts {
            assert!(!truncations.contains(b));
        }
    }

    #[test]
    fn top_ranked_assignment_leaves_only_tail_shuffles() {
        let market = Market::new(2, 2).unwrap();
        let truth = pref(&market, "m1", &["w1", "w2", "self"]);
        let boosts =
            boost_misrepresentations(&truth, "w1".parse().unwrap(), false).unwrap();
        assert_eq!(orders(&boosts), vec![vec![
            "w1".to_string(),
            "self".to_string(),
            "w2".to_string()
        ]]);
    }

    #[test]
    fn identity_is_included_on_request() {
        let market = Market::new(2, 2).unwrap();
        let truth = pref(&market, "m1", &["w2", "w1", "self"]);
        let boosts = boost_misrepresentations(&truth, "w1".parse().unwrap(), true).unwrap();
        assert!(boosts.contains(&truth));
        let truncations = truncation_strategies(&truth, true);
        assert!(truncations.contains(&truth));
    }

    #[test]
    fn self_first_truncations_are_only_tail_shuffles() {
        let market = Market::new(2, 2).unwrap();
        let truth = pref(&market, "m1", &["self", "w1", "w2"]);
        let truncations = truncation_strategies(&truth, false);
        assert_eq!(orders(&truncations), vec![vec![
            "self".to_string(),
            "w2".to_string(),
            "w1".to_string()
        ]]);
    }

    #[test]
    fn misreport_space_counts() {
        let m2 = Market::new(2, 2).unwrap();
        let truth = pref(&m2, "m1", &["w2", "w1", "self"]);
        let all: Vec<_> = all_misrepresentations(&truth).collect();
        assert_eq!(all.len(), 5);
        assert!(all.iter().all(|p| p != &truth));

        let m3 = Market::new(3, 3).unwrap();
        let truth = pref(&m3, "w2", &["m2", "m3", "m1", "self"]);
        assert_eq!(all_misrepresentations(&truth).count(), 23);
    }

    #[test]
    fn boost_never_lowers_the_assignment() {
        let m3 = Market::new(3, 3).unwrap();
        let truth = pref(&m3, "m1", &["w2", "w3", "w1", "self"]);
        let assignment: Partner = "w1".parse().unwrap();
        for misreport in boost_misrepresentations(&truth, assignment, true).unwrap() {
            assert!(misreport.rank(assignment).unwrap() <= truth.rank(assignment).unwrap());
            // Entries above the assignment keep their truthful rank.
            let pivot = misreport.rank(assignment).unwrap();
            for entry in misreport.order() {
                let r = misreport.rank(*entry).unwrap();
                if r < pivot {
                    assert_eq!(r, truth.rank(*entry).unwrap());
                }
            }
        }
    }

    #[test]
    fn generators_match_their_defining_predicates() {
        // On every 2x2 and 3x3 preference type and every possible
        // assignment, the generated sets equal the predicate-filtered full
        // space.
        for size in [2, 3] {
            generators_match_on(Market::new(size, size).unwrap());
        }
    }

    fn generators_match_on(market: Market) {
        let owner = AgentId::man(0);
        for truth in enumerate_preferences(&market, owner, DomainRestriction::Full).unwrap() {
            let space: Vec<Preference> = all_misrepresentations(&truth)
                .chain(std::iter::once(truth.clone()))
                .collect();
            for &assignment in truth.order() {
                let generated =
                    boost_misrepresentations(&truth, assignment, true).unwrap();
                let filtered: Vec<Preference> = space
                    .iter()
                    .filter(|c| is_boost_misrepresentation(&truth, assignment, c).unwrap())
                    .cloned()
                    .collect();
                assert_eq!(orders(&generated), orders(&filtered));
            }
            let generated = truncation_strategies(&truth, true);
            let filtered: Vec<Preference> = space
                .iter()
                .filter(|c| is_truncation_strategy(&truth, c).unwrap())
                .cloned()
                .collect();
            assert_eq!(orders(&generated), orders(&filtered));
        }
    }

    #[test]
    fn invalid_assignment_is_rejected() {
        let m2 = Market::new(2, 2).unwrap();
        let truth = pref(&m2, "m1", &["w2", "w1", "self"]);
        let stranger: Partner = "w9".parse().unwrap();
        assert!(boost_misrepresentations(&truth, stranger, true).is_err());
    }
}
