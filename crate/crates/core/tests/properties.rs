//! Property tests over randomly drawn markets, profiles, and misreports.

use proptest::prelude::*;

use matchkit::market::{
    enumerate_preferences, AgentId, DomainRestriction, Market, Partner, Preference, ProfileDomain,
    Side,
};
use matchkit::mechanisms::{
    deferred_acceptance, deferred_acceptance_scheduled, run_mechanism, MechanismId,
};
use matchkit::stability::{block_report, enumerate_stable_matchings, is_stable};
use matchkit::strategy::{
    boost_misrepresentations, is_boost_misrepresentation, is_truncation_strategy,
    truncation_strategies,
};
use matchkit::validate_partner_map;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A random market up to 4x4 together with one profile drawn from its full
/// space.
fn market_and_profile() -> impl Strategy<Value = matchkit::Profile> {
    (1usize..=4, 1usize..=4, any::<u64>()).prop_map(|(men, women, seed)| {
        let market = Market::new(men, women).unwrap();
        let domain =
            ProfileDomain::new(market, DomainRestriction::Sampled { count: 1, seed }).unwrap();
        domain.profile_at(0).unwrap()
    })
}

proptest! {
    #[test]
    fn enumerated_preferences_are_strict_total_orders(
        men in 1usize..=4,
        women in 1usize..=4,
        index in any::<u64>(),
        man_side in any::<bool>(),
    ) {
        let market = Market::new(men, women).unwrap();
        let owner = if man_side { AgentId::man(0) } else { AgentId::woman(0) };
        let prefs: Vec<Preference> =
            enumerate_preferences(&market, owner, DomainRestriction::Full).unwrap().collect();
        let pref = &prefs[(index as usize) % prefs.len()];
        // Reconstruction through the validating constructor succeeds.
        Preference::new(&market, owner, pref.order().to_vec()).unwrap();
        // rank and prefers agree and are antisymmetric.
        for &a in pref.order() {
            prop_assert!(!pref.prefers(a, a).unwrap());
            for &b in pref.order() {
                if a != b {
                    prop_assert!(pref.prefers(a, b).unwrap() ^ pref.prefers(b, a).unwrap());
                    prop_assert_eq!(
                        pref.prefers(a, b).unwrap(),
                        pref.rank(a).unwrap() < pref.rank(b).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn profile_indexing_round_trips(
        men in 1usize..=3,
        women in 1usize..=3,
        raw in any::<u64>(),
        acceptable_only in any::<bool>(),
    ) {
        let market = Market::new(men, women).unwrap();
        let restriction = if acceptable_only {
            DomainRestriction::AllAcceptable
        } else {
            DomainRestriction::Full
        };
        let domain = ProfileDomain::new(market, restriction).unwrap();
        let index = raw as u128 % domain.size();
        let profile = domain.profile_at(index).unwrap();
        prop_assert_eq!(domain.index_of(&profile).unwrap(), index);
    }

    #[test]
    fn da_is_schedule_invariant_and_stable(profile in market_and_profile(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for side in [Side::Man, Side::Woman] {
            let reference = deferred_acceptance(&profile, side);
            prop_assert!(is_stable(&profile, &reference).unwrap());
            for _ in 0..3 {
                let shuffled =
                    deferred_acceptance_scheduled(&profile, side, |n| rng.gen_range(0..n));
                prop_assert_eq!(&shuffled, &reference);
            }
        }
    }

    #[test]
    fn mechanism_outputs_are_valid_matchings(profile in market_and_profile()) {
        for id in MechanismId::all() {
            let outcome = run_mechanism(id, &profile);
            prop_assert!(validate_partner_map(&profile.market(), outcome.partners()).is_empty());
        }
    }

    #[test]
    fn generated_misreports_satisfy_their_predicates(
        profile in market_and_profile(),
        agent_pick in any::<u64>(),
        target_pick in any::<u64>(),
    ) {
        let market = profile.market();
        let agent = market.agent_at(agent_pick as usize % market.num_agents());
        let truth = profile.pref(agent);
        let target = truth.order()[target_pick as usize % truth.order().len()];
        for misreport in boost_misrepresentations(truth, target, true).unwrap() {
            prop_assert!(is_boost_misrepresentation(truth, target, &misreport).unwrap());
            prop_assert!(
                misreport.rank(target).unwrap() <= truth.rank(target).unwrap()
            );
        }
        for misreport in truncation_strategies(truth, true) {
            prop_assert!(is_truncation_strategy(truth, &misreport).unwrap());
        }
    }

    #[test]
    fn da_agrees_with_the_stable_set_extreme(profile in market_and_profile()) {
        let stable = enumerate_stable_matchings(&profile).unwrap();
        prop_assert!(!stable.is_empty());
        for side in [Side::Man, Side::Woman] {
            let da = deferred_acceptance(&profile, side);
            prop_assert!(stable.contains(&da));
            for other in &stable {
                for agent in profile.market().side_agents(side) {
                    let ours = da.partner(agent);
                    let theirs = other.partner(agent);
                    prop_assert!(
                        ours == theirs || profile.pref(agent).prefers(ours, theirs).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn block_reports_are_sound(profile in market_and_profile(), seed in any::<u64>()) {
        // A random matching's block report re-derives entry by entry.
        let market = profile.market();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let matchings = matchkit::enumerate_matchings(&market);
        let matching = &matchings[rng.gen_range(0..matchings.len())];
        let report = block_report(&profile, matching).unwrap();
        for agent in market.agents() {
            let blocked = profile
                .pref(agent)
                .prefers(Partner::Single, matching.partner(agent))
                .unwrap();
            prop_assert_eq!(report.blocking_individuals.contains(&agent), blocked);
        }
        for man in market.side_agents(Side::Man) {
            for woman in market.side_agents(Side::Woman) {
                let blocked = profile
                    .pref(man)
                    .prefers(Partner::Agent(woman), matching.partner(man))
                    .unwrap()
                    && profile
                        .pref(woman)
                        .prefers(Partner::Agent(man), matching.partner(woman))
                        .unwrap();
                prop_assert_eq!(report.blocking_pairs.contains(&(man, woman)), blocked);
            }
        }
    }
}
