//! Exhaustive and sampled sweeps of profile domains through the axiom
//! checkers, with worker parallelism, deterministic early exit, and
//! conversion-based cross-validation of boost-invariance findings.
//!
//! Determinism contract: a sweep report depends only on the spec (including
//! the sample seed), never on the worker count or chunk scheduling. Witnesses
//! are ordered by (profile index, deviating agent, misreport index); the
//! early-exit modes pick prefixes of that order.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axioms::{check_axiom, convert_boost_to_sp, Axiom, ConversionBranch, Witness};
use crate::market::{DomainRestriction, Market, MarketError, ProfileDomain};
use crate::mechanisms::MechanismId;

/// Domains larger than this require an explicit long-run opt-in.
pub const LONG_RUN_THRESHOLD: u128 = 1_000_000;

/// How much of the domain a sweep visits.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Stop at the first witness in canonical order.
    FirstWitness,
    /// Visit the whole domain and keep every witness.
    CountAll,
    /// Stop once the first `n` witnesses in canonical order are collected.
    CollectUpTo(usize),
}

/// Full description of one sweep.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SweepSpec {
    pub market: Market,
    pub restriction: DomainRestriction,
    pub mechanism: MechanismId,
    /// Checked per profile in this order; duplicates are ignored.
    pub axioms: Vec<Axiom>,
    pub mode: SweepMode,
    /// Visit only the first `budget` profiles of the stream.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u128>,
    /// Explicit opt-in for domains above [`LONG_RUN_THRESHOLD`].
    #[serde(default)]
    pub long_run: bool,
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("budget {budget} exceeds the domain size {size}")]
    BudgetExceedsDomain { budget: u128, size: u128 },
    #[error("domain has {size} profiles; pass the long-run flag for sweeps above {threshold}")]
    LongRunRequired { size: u128, threshold: u128 },
    #[error("collect mode needs a positive witness count")]
    CollectZero,
    #[error("sweep must include the boost-invariance axiom to cross-validate")]
    MissingBoostAxiom,
    #[error("witness conversion failed: {0}")]
    Conversion(#[from] crate::axioms::ConversionError),
}

/// A witness together with the index of the profile it was found at.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SweepWitness {
    pub profile_index: u128,
    pub witness: Witness,
}

/// Result of one sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub spec: SweepSpec,
    /// Profiles in the (budget-truncated) stream.
    pub domain_size: u128,
    /// Profiles the mode needed: the whole stream for a full count, the
    /// canonical prefix up to the decisive witness for the early-exit modes.
    pub profiles_examined: u128,
    pub witnesses: Vec<SweepWitness>,
    pub per_axiom_counts: BTreeMap<Axiom, u64>,
    /// Wall-clock time; informational only and excluded from serialization
    /// so that identical specs produce byte-identical reports.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl SweepReport {
    pub fn witness_count(&self) -> usize {
        self.witnesses.len()
    }
}

fn canonical_axioms(spec: &SweepSpec) -> Vec<Axiom> {
    let mut seen = Vec::new();
    for axiom in &spec.axioms {
        if !seen.contains(axiom) {
            seen.push(*axiom);
        }
    }
    seen
}

struct ChunkOutcome {
    witnesses: Vec<SweepWitness>,
}

struct SweepState {
    next_chunk: AtomicUsize,
    /// Chunks strictly above this bound cannot influence the result.
    stop_bound: AtomicUsize,
    done: Mutex<BTreeMap<usize, ChunkOutcome>>,
}

/// Runs the checkers in `spec` over the profile stream with `workers`
/// parallel workers. The report is identical for every worker count.
pub fn sweep(spec: &SweepSpec, workers: usize) -> Result<SweepReport, SweepError> {
    let started = Instant::now();
    if spec.mode == SweepMode::CollectUpTo(0) {
        return Err(SweepError::CollectZero);
    }
    let domain = ProfileDomain::new(spec.market, spec.restriction)?;
    let mut size = domain.size();
    if let Some(budget) = spec.budget {
        if budget > size {
            return Err(SweepError::BudgetExceedsDomain { budget, size });
        }
        size = budget;
    }
    if size > LONG_RUN_THRESHOLD && !spec.long_run {
        return Err(SweepError::LongRunRequired { size, threshold: LONG_RUN_THRESHOLD });
    }
    let axioms = canonical_axioms(spec);
    let wanted = match spec.mode {
        SweepMode::FirstWitness => Some(1usize),
        SweepMode::CollectUpTo(n) => Some(n),
        SweepMode::CountAll => None,
    };

    let chunk_size: u128 = (size / (workers.max(1) as u128 * 8)).clamp(16, 4096);
    let num_chunks = size.div_ceil(chunk_size);
    let num_chunks_usize = usize::try_from(num_chunks).expect("chunk count fits usize");
    let state = SweepState {
        next_chunk: AtomicUsize::new(0),
        stop_bound: AtomicUsize::new(usize::MAX),
        done: Mutex::new(BTreeMap::new()),
    };

    let run_chunk = |chunk: usize| -> ChunkOutcome {
        let lo = chunk as u128 * chunk_size;
        let hi = (lo + chunk_size).min(size);
        let mut witnesses = Vec::new();
        for index in lo..hi {
            if state.stop_bound.load(Ordering::Relaxed) < chunk {
                break; // a decisive earlier chunk finished; this one is moot
            }
            let profile = domain.profile_at(index).expect("index in range");
            for &axiom in &axioms {
                for witness in check_axiom(spec.mechanism, &profile, axiom) {
                    witnesses.push(SweepWitness { profile_index: index, witness });
                }
            }
            if spec.mode == SweepMode::FirstWitness && !witnesses.is_empty() {
                break; // earliest in this chunk is already decided
            }
        }
        ChunkOutcome { witnesses }
    };

    let finish_chunk = |chunk: usize, outcome: ChunkOutcome| {
        let mut done = state.done.lock().expect("no poisoned workers");
        done.insert(chunk, outcome);
        if let Some(target) = wanted {
            // Find the shortest complete prefix of chunks holding `target`
            // witnesses; anything beyond it can stop.
            let mut collected = 0usize;
            for (expect, (&index, outcome)) in done.iter().enumerate() {
                if index != expect {
                    return; // prefix has a hole; keep going
                }
                collected += outcome.witnesses.len();
                if collected >= target {
                    state.stop_bound.fetch_min(index, Ordering::Relaxed);
                    return;
                }
            }
        }
    };

    let worker_loop = || loop {
        let chunk = state.next_chunk.fetch_add(1, Ordering::Relaxed);
        if chunk >= num_chunks_usize {
            break;
        }
        if state.stop_bound.load(Ordering::Relaxed) < chunk {
            finish_chunk(chunk, ChunkOutcome { witnesses: Vec::new() });
            continue;
        }
        let outcome = run_chunk(chunk);
        finish_chunk(chunk, outcome);
    };

    if workers <= 1 {
        worker_loop();
    } else {
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(worker_loop);
            }
        });
    }

    let done = state.done.into_inner().expect("workers joined");
    let mut witnesses: Vec<SweepWitness> =
        done.into_values().flat_map(|c| c.witnesses).collect();
    // Chunks are merged in index order and scanned ascending inside, so the
    // list is already canonically ordered; the sort is a cheap guarantee.
    witnesses.sort_by_key(|w| w.profile_index);
    if let Some(target) = wanted {
        witnesses.truncate(target);
    }
    let profiles_examined = match (spec.mode, witnesses.last()) {
        (SweepMode::CountAll, _) | (_, None) => size,
        (_, Some(last)) => {
            if witnesses.len() == wanted.expect("early-exit mode") {
                last.profile_index + 1
            } else {
                size
            }
        }
    };
    let mut per_axiom_counts = BTreeMap::new();
    for w in &witnesses {
        *per_axiom_counts.entry(w.witness.axiom).or_insert(0u64) += 1;
    }
    Ok(SweepReport {
        spec: spec.clone(),
        domain_size: size,
        profiles_examined,
        witnesses,
        per_axiom_counts,
        wall_time: started.elapsed(),
    })
}

/// Outcome of converting every boost-invariance witness of a sweep into a
/// strategy-proofness witness and re-verifying it.
#[derive(Clone, Debug, Serialize)]
pub struct CrossValidationReport {
    pub sweep: SweepReport,
    pub boost_witnesses: u64,
    pub converted: u64,
    pub profit_at_truth: u64,
    pub profit_at_deviated: u64,
    /// Conversion failures flag an implementation bug; always expected empty.
    pub failures: Vec<String>,
}

impl CrossValidationReport {
    pub fn conversion_rate(&self) -> f64 {
        if self.boost_witnesses == 0 {
            1.0
        } else {
            self.converted as f64 / self.boost_witnesses as f64
        }
    }

    pub fn is_clean(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Sweeps per `spec` (which must include the boost-invariance axiom), then
/// converts each boost witness into a strategy-proofness witness.
pub fn cross_validate(spec: &SweepSpec, workers: usize) -> Result<CrossValidationReport, SweepError> {
    if !spec.axioms.contains(&Axiom::BoostInvariance) {
        return Err(SweepError::MissingBoostAxiom);
    }
    let sweep_report = sweep(spec, workers)?;
    let mut report = CrossValidationReport {
        boost_witnesses: 0,
        converted: 0,
        profit_at_truth: 0,
        profit_at_deviated: 0,
        failures: Vec::new(),
        sweep: sweep_report,
    };
    for entry in &report.sweep.witnesses {
        if entry.witness.axiom != Axiom::BoostInvariance {
            continue;
        }
        report.boost_witnesses += 1;
        match convert_boost_to_sp(&entry.witness) {
            Ok((_, ConversionBranch::ProfitAtTruth)) => {
                report.converted += 1;
                report.profit_at_truth += 1;
            }
            Ok((_, ConversionBranch::ProfitAtDeviated)) => {
                report.converted += 1;
                report.profit_at_deviated += 1;
            }
            Err(e) => {
                report
                    .failures
                    .push(format!("profile {}: {e}", entry.profile_index));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{MAN_DA, MAN_IA, WOMAN_DA};

    fn spec(
        market: Market,
        restriction: DomainRestriction,
        mechanism: MechanismId,
        axioms: &[Axiom],
        mode: SweepMode,
    ) -> SweepSpec {
        SweepSpec {
            market,
            restriction,
            mechanism,
            axioms: axioms.to_vec(),
            mode,
            budget: None,
            long_run: false,
        }
    }

    #[test]
    fn first_witness_is_deterministic_across_worker_counts() {
        let s = spec(
            Market::new(3, 3).unwrap(),
            DomainRestriction::AllAcceptable,
            WOMAN_DA,
            &[Axiom::BoostInvariance],
            SweepMode::FirstWitness,
        );
        let one = sweep(&s, 1).unwrap();
        let four = sweep(&s, 4).unwrap();
        assert_eq!(one.witnesses, four.witnesses);
        assert_eq!(one.profiles_examined, four.profiles_examined);
        assert_eq!(one.witnesses.len(), 1);
        one.witnesses[0].witness.verify().unwrap();
    }

    #[test]
    fn collect_mode_prefixes_count_mode() {
        let market = Market::new(2, 2).unwrap();
        let all = spec(
            market,
            DomainRestriction::Full,
            MAN_DA,
            &[Axiom::TruncationInvariance],
            SweepMode::CountAll,
        );
        let full = sweep(&all, 3).unwrap();
        assert!(full.witness_count() > 5);
        assert_eq!(full.profiles_examined, 1296);
        let some = spec(
            market,
            DomainRestriction::Full,
            MAN_DA,
            &[Axiom::TruncationInvariance],
            SweepMode::CollectUpTo(5),
        );
        let prefix = sweep(&some, 3).unwrap();
        assert_eq!(prefix.witnesses, full.witnesses[..5].to_vec());
        assert_eq!(
            prefix.profiles_examined,
            full.witnesses[4].profile_index + 1
        );
    }

    #[test]
    fn first_and_count_agree_on_existence() {
        let market = Market::new(2, 2).unwrap();
        for mechanism in [MAN_DA, MAN_IA] {
            for axiom in [Axiom::StrategyProofness, Axiom::BoostInvariance] {
                let count = sweep(
                    &spec(market, DomainRestriction::Full, mechanism, &[axiom], SweepMode::CountAll),
                    2,
                )
                .unwrap();
                let first = sweep(
                    &spec(market, DomainRestriction::Full, mechanism, &[axiom], SweepMode::FirstWitness),
                    2,
                )
                .unwrap();
                assert_eq!(count.witness_count() > 0, first.witness_count() > 0);
            }
        }
    }

    #[test]
    fn one_by_one_market_admits_no_profitable_deviation() {
        let market = Market::new(1, 1).unwrap();
        for mechanism in MechanismId::all() {
            let report = sweep(
                &spec(
                    market,
                    DomainRestriction::Full,
                    mechanism,
                    &[Axiom::StrategyProofness],
                    SweepMode::CountAll,
                ),
                1,
            )
            .unwrap();
            assert_eq!(report.domain_size, 4);
            assert_eq!(report.profiles_examined, 4);
            assert_eq!(report.witness_count(), 0, "mechanism {mechanism}");
        }
    }

    #[test]
    fn budget_and_long_run_guards() {
        let market = Market::new(3, 3).unwrap();
        let mut s = spec(
            market,
            DomainRestriction::Full,
            WOMAN_DA,
            &[Axiom::BoostInvariance],
            SweepMode::FirstWitness,
        );
        assert!(matches!(sweep(&s, 1), Err(SweepError::LongRunRequired { .. })));
        s.budget = Some(500);
        let report = sweep(&s, 1).unwrap();
        assert!(report.domain_size == 500);
        s.budget = Some(u128::MAX);
        assert!(matches!(sweep(&s, 1), Err(SweepError::BudgetExceedsDomain { .. })));
        s.budget = None;
        s.mode = SweepMode::CollectUpTo(0);
        assert!(matches!(sweep(&s, 1), Err(SweepError::CollectZero)));
    }

    #[test]
    fn sampled_sweeps_are_reproducible() {
        let s = spec(
            Market::new(3, 3).unwrap(),
            DomainRestriction::Sampled { count: 400, seed: 3 },
            MAN_IA,
            &[Axiom::Stability, Axiom::IndividualRationality],
            SweepMode::CountAll,
        );
        let a = sweep(&s, 1).unwrap();
        let b = sweep(&s, 4).unwrap();
        assert_eq!(a.witnesses, b.witnesses);
        assert_eq!(a.per_axiom_counts, b.per_axiom_counts);
    }

    #[test]
    fn woman_da_has_truncation_violations_at_scale() {
        let s = spec(
            Market::new(3, 3).unwrap(),
            DomainRestriction::AllAcceptable,
            WOMAN_DA,
            &[Axiom::TruncationInvariance],
            SweepMode::FirstWitness,
        );
        let report = sweep(&s, 2).unwrap();
        assert_eq!(report.witness_count(), 1);
        report.witnesses[0].witness.verify().unwrap();
    }

    #[test]
    fn ia_is_individually_rational_on_the_all_acceptable_domain() {
        for mechanism in [MAN_IA, crate::mechanisms::WOMAN_IA] {
            let s = spec(
                Market::new(3, 3).unwrap(),
                DomainRestriction::AllAcceptable,
                mechanism,
                &[Axiom::IndividualRationality],
                SweepMode::CountAll,
            );
            let report = sweep(&s, 4).unwrap();
            assert_eq!(report.witness_count(), 0, "mechanism {mechanism}");
            assert_eq!(report.profiles_examined, 46_656);
        }
    }

    #[test]
    fn cross_validate_requires_boost_axiom() {
        let s = spec(
            Market::new(2, 2).unwrap(),
            DomainRestriction::Full,
            WOMAN_DA,
            &[Axiom::StrategyProofness],
            SweepMode::CountAll,
        );
        assert!(matches!(cross_validate(&s, 1), Err(SweepError::MissingBoostAxiom)));
    }

    #[test]
    fn cross_validate_converts_everything_on_2x2() {
        let s = spec(
            Market::new(2, 2).unwrap(),
            DomainRestriction::Full,
            WOMAN_DA,
            &[Axiom::BoostInvariance],
            SweepMode::CountAll,
        );
        let report = cross_validate(&s, 2).unwrap();
        assert!(report.is_clean());
        assert_eq!(report.converted, report.boost_witnesses);
        assert_eq!(report.conversion_rate(), 1.0);
    }

    #[test]
    fn empty_witness_list_cross_validates_vacuously() {
        let s = spec(
            Market::new(2, 2).unwrap(),
            DomainRestriction::Full,
            MAN_IA,
            &[Axiom::BoostInvariance],
            SweepMode::CountAll,
        );
        let report = cross_validate(&s, 2).unwrap();
        assert_eq!(report.boost_witnesses, 0);
        assert_eq!(report.conversion_rate(), 1.0);
        assert!(report.is_clean());
    }
}
