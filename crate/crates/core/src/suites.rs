//! Seeded property suites over generated scenarios.
//!
//! Every suite draws its scenarios from `derive_seed(seed, tag, i)`, runs
//! them in parallel and reduces in index order, so a report depends only on
//! `(n, seed)`.

use rand::prelude::*;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::amount::Amount;
use crate::baselines::{compare_algorithms, Algorithm};
use crate::builders::{BidPolicy, BuilderKind};
use crate::conflict::{conflict_free_set, get_conflict_groups};
use crate::default_algo::{resolve_group_traced, DefaultAlgorithm};
use crate::fixtures;
use crate::mechanism::run_mechanism;
use crate::model::{BidFunction, Block, Bundle, BundleId, BundleSet, ContextSignature, Scenario};
use crate::oracle::{vcg_outcome, DEFAULT_ORACLE_LIMIT};
use crate::seeding::{derive_seed, rng};
use crate::strategy::{
    adoption_game, budget_deficit_demo, builder_deviation_sweep, builder_offsets, collusion_demo,
    collusion_epsilons, integration_game, searcher_deviation_sweep, standard_grid, ConflictStructure, GRID_NOTE,
};
use crate::workload::{generate_scenario, BuilderMix, Profile, Topology};

/// Witnesses kept per report.
const MAX_WITNESSES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub witnesses: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<&'static str>,
    /// Suite-specific figures, e.g. a measured fraction.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub figures: Vec<(String, String)>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{}: {}/{} cases passed", self.suite, self.cases - self.failures, self.cases);
        for (k, v) in &self.figures {
            s.push_str(&format!(", {k} = {v}"));
        }
        s
    }
}

/// Run `check` on case indices `0..n` and collect failures in order.
fn run_cases<F>(suite: &'static str, n: usize, check: F) -> SuiteReport
where
    F: Fn(usize) -> Result<(), String> + Sync + Send,
{
    let results: Vec<Result<(), String>> = (0..n).into_par_iter().map(check).collect();
    let failed: Vec<String> = results
        .into_iter()
        .enumerate()
        .filter_map(|(i, r)| r.err().map(|e| format!("case {i}: {e}")))
        .collect();
    SuiteReport {
        suite,
        cases: n,
        failures: failed.len(),
        witnesses: failed.into_iter().take(MAX_WITNESSES).collect(),
        note: None,
        figures: Vec::new(),
    }
}

fn small_profile(n: usize, sizes: Vec<(usize, u32)>) -> Profile {
    Profile {
        name: "suite".into(),
        n_bundles: n,
        group_sizes: sizes,
        ..Profile::builtin("small-groups").expect("built-in")
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// The default algorithm matches the exhaustive optimum on one group of at
/// most six bundles.
pub fn oracle_equivalence(n: usize, seed: u64) -> SuiteReport {
    run_cases("oracle-equivalence", n, |i| {
        let s = derive_seed(seed, "oracle-equivalence", i as u64);
        let size = 1 + (s % 6) as usize;
        let mut p = small_profile(size, vec![(size, 1)]);
        p.bid_model.table_rate = 0.8;
        let scenario = generate_scenario(&p, s).map_err(err)?;
        let algo = DefaultAlgorithm::new(8, s);
        let cb = algo.one_time_coinbase(&[]);
        let run = algo.build(&scenario.bundles, &cb);
        let exact = vcg_outcome(&scenario.bundles, &cb, DEFAULT_ORACLE_LIMIT).map_err(err)?;
        if run.value != exact.total_bid {
            return Err(format!("seed {s}: default {} vs optimum {}", run.value, exact.total_bid));
        }
        Ok(())
    })
}

fn mixed_scenario(s: u64) -> Result<Scenario, String> {
    let names = ["realistic", "small-groups", "no-conflict", "full-conflict", "stress-large-groups"];
    let mut p = Profile::builtin(names[(s % names.len() as u64) as usize]).map_err(err)?;
    p.n_bundles = p.n_bundles.min(24);
    p.group_sizes.retain(|&(size, _)| size <= p.n_bundles);
    p.builders = BuilderMix {
        min: 0,
        max: 3,
        ..Profile::builtin("realistic").map_err(err)?.builders
    };
    generate_scenario(&p, s).map_err(err)
}

/// Refunds are never negative and outflows never exceed inflows.
pub fn budget_balance(n: usize, seed: u64) -> SuiteReport {
    run_cases("budget-balance", n, |i| {
        let s = derive_seed(seed, "budget-balance", i as u64);
        let scenario = mixed_scenario(s)?;
        let out = run_mechanism(&scenario).map_err(err)?;
        if let Some((id, r)) = out.default_refunds.iter().find(|(_, r)| r.is_negative()) {
            return Err(format!("seed {s}: refund {r} for bundle {id}"));
        }
        if !out.refunds_non_negative() {
            return Err(format!("seed {s}: negative settlement refund"));
        }
        if !out.is_budget_balanced() {
            return Err(format!("seed {s}: outflow {} > inflow {}", out.outflow, out.inflow));
        }
        Ok(())
    })
}

fn builder_scenario(s: u64, n: usize) -> Result<Scenario, String> {
    let mut p = small_profile(n, vec![(1, 3), (2, 3), (3, 2), (4, 1), (5, 1)]);
    p.builders = BuilderMix {
        min: 1,
        max: 3,
        kinds: vec![
            BuilderKind::CopyDefault,
            BuilderKind::GreedyByBid,
            BuilderKind::GreedyByDensity,
            BuilderKind::HashMin,
            BuilderKind::HashMax,
        ],
        policies: vec![
            BidPolicy::Truthful,
            BidPolicy::Offset { amount: Amount::from_units(5) },
            BidPolicy::Offset { amount: Amount::from_units(-5) },
        ],
    };
    generate_scenario(&p, s).map_err(err)
}

/// No offset from the truthful bid strictly improves any builder's utility.
pub fn builder_dsic(n: usize, seed: u64) -> SuiteReport {
    let offsets = builder_offsets();
    let mut report = run_cases("dsic-builder", n, |i| {
        let s = derive_seed(seed, "dsic-builder", i as u64);
        let scenario = builder_scenario(s, 10)?;
        for j in 0..scenario.builders.len() {
            let r = builder_deviation_sweep(&scenario, j, &offsets).map_err(err)?;
            if !r.dominant {
                return Err(format!("seed {s}, builder {j}: {}", r.witness.unwrap_or_default()));
            }
        }
        Ok(())
    });
    report.note = Some(GRID_NOTE);
    report
}

/// Builders the default weakly beats on every input when all groups are
/// below the cutoff.
fn dominated_stubs(s: u64) -> Vec<(BuilderKind, BidPolicy)> {
    let half = BidPolicy::Scaled { num: 1, den: 2 };
    let all = [
        (BuilderKind::Empty, BidPolicy::Fixed { amount: Amount::ZERO }),
        (BuilderKind::GreedyByBid, half.clone()),
        (BuilderKind::GreedyByDensity, half.clone()),
        (BuilderKind::CopyDefault, half),
    ];
    let mut r = rng(derive_seed(s, "stubs", 0));
    let count = r.gen_range(0..=3);
    all.choose_multiple(&mut r, count).cloned().collect()
}

/// With only dominated builders, no grid misreport strictly improves any
/// searcher's utility.
pub fn searcher_dsic(n: usize, seed: u64) -> SuiteReport {
    let mut report = run_cases("dsic-searcher", n, |i| {
        let s = derive_seed(seed, "dsic-searcher", i as u64);
        let p = small_profile(7, vec![(1, 2), (2, 2), (3, 2), (4, 1), (5, 1)]);
        let mut scenario = generate_scenario(&p, s).map_err(err)?;
        scenario.builders = dominated_stubs(s)
            .into_iter()
            .enumerate()
            .map(|(j, (kind, policy))| {
                crate::builders::BuilderSpec::new(format!("stub{j}"), crate::CoinbaseLabel(format!("0xb{j}")), kind)
                    .with_bid(policy)
            })
            .collect();
        for id in scenario.bundles.ids() {
            let v = scenario.bundles.bundle(id).map_err(err)?.valuation.clone();
            let r = searcher_deviation_sweep(&scenario, id, &standard_grid(&v)).map_err(err)?;
            if !r.dominant {
                return Err(format!("seed {s}, bundle {id}: {}", r.witness.unwrap_or_default()));
            }
        }
        Ok(())
    });
    report.note = Some(GRID_NOTE);
    report
}

/// Integration and misreports never raise the joint utility of a
/// conflict-free searcher and a builder; the searcher alone also has no
/// profitable misreport.
pub fn integration(n: usize, seed: u64) -> SuiteReport {
    let offsets = builder_offsets();
    let mut report = run_cases("integration", n, |i| {
        let s = derive_seed(seed, "integration", i as u64);
        // redraw until the scenario has a conflict-free bundle
        let (s, scenario, free) = (0..64)
            .map(|a| derive_seed(s, "redraw", a))
            .map(|s| {
                let sc = builder_scenario(s, 6)?;
                let free: Vec<BundleId> = conflict_free_set(&get_conflict_groups(&sc.bundles)).into_iter().collect();
                Ok((s, sc, free))
            })
            .find(|r: &Result<_, String>| r.as_ref().map_or(true, |(_, _, f): &(u64, Scenario, Vec<BundleId>)| !f.is_empty()))
            .ok_or("no conflict-free bundle in 64 draws")??;
        let id = free[(s % free.len() as u64) as usize];
        let j = (s % scenario.builders.len() as u64) as usize;
        let v = scenario.bundles.bundle(id).map_err(err)?.valuation.clone();
        let grid = standard_grid(&v);
        let r = integration_game(&scenario, id, j, &grid, &offsets).map_err(err)?;
        if let Some(w) = r.witness {
            return Err(format!(
                "seed {s}, bundle {id}, builder {j}: {:?} / {} / offset {} gives joint {} > {}",
                w.access, w.searcher_bid, w.builder_offset, w.joint, r.baseline.joint
            ));
        }
        let solo = searcher_deviation_sweep(&scenario, id, &grid).map_err(err)?;
        if !solo.dominant {
            return Err(format!("seed {s}, bundle {id}: {}", solo.witness.unwrap_or_default()));
        }
        Ok(())
    });
    report.note = Some(GRID_NOTE);
    report
}

/// The colluding builder raises its partner's utility to the predicted
/// amount under the alternative refund rule and changes nothing under the
/// default rule.
pub fn collusion() -> SuiteReport {
    let eps = collusion_epsilons();
    run_cases("collusion", eps.len(), |i| {
        let r = collusion_demo(&fixtures::collusion(), BundleId(1), &eps[i..=i]).map_err(err)?;
        let row = &r.rows[0];
        if !(row.exploit && row.default_rule_unchanged && row.searcher_utility_alternative_rule == row.predicted) {
            return Err(format!("epsilon {}: {row:?}", row.epsilon));
        }
        Ok(())
    })
}

/// Builder-only VCG runs a deficit on the fixture; the mechanism does not.
pub fn deficit() -> SuiteReport {
    run_cases("deficit", 1, |_| {
        let r = budget_deficit_demo(&fixtures::deficit()).map_err(err)?;
        let units = Amount::from_units;
        let expect = r.refunds.get(&BundleId(1)) == Some(&units(99))
            && r.collected == units(1)
            && r.deficit == units(98)
            && r.mechanism.is_budget_balanced();
        if !expect {
            return Err(format!(
                "refunds {:?}, collected {}, deficit {}, mechanism balanced {}",
                r.refunds,
                r.collected,
                r.deficit,
                r.mechanism.is_budget_balanced()
            ));
        }
        Ok(())
    })
}

/// Commit is weakly optimal for the proposer under no conflict and full
/// conflict, with the predicted revenue.
pub fn adoption(n: usize, seed: u64) -> SuiteReport {
    run_cases("adoption", n, |i| {
        let s = derive_seed(seed, "adoption", i as u64);
        let mut free = Profile::builtin("no-conflict").map_err(err)?;
        free.n_bundles = 2 + (s % 5) as usize;
        let mut full = Profile::builtin("full-conflict").map_err(err)?;
        full.n_bundles = 2 + (s % 5) as usize;
        full.group_sizes = vec![(full.n_bundles, 1)];
        for (p, structure) in [(free, ConflictStructure::NoConflict), (full, ConflictStructure::FullConflict)] {
            let scenario = generate_scenario(&p, s).map_err(err)?;
            let r = adoption_game(&scenario).map_err(err)?;
            let ok = r.structure == structure
                && r.commit_weakly_optimal
                && r.predictions_hold
                && (structure == ConflictStructure::FullConflict || r.best_build_and_choose.is_zero());
            if !ok {
                return Err(format!(
                    "seed {s}, {:?}: commit {} vs build-and-choose {}",
                    structure, r.commit_utility, r.best_build_and_choose
                ));
            }
        }
        Ok(())
    })
}

/// Fresh random bids on the same bundles: tables over single predecessors
/// within each group, or constants.
pub fn rebid(bundles: &BundleSet, seed: u64) -> BundleSet {
    let mut r = rng(seed);
    let groups = get_conflict_groups(bundles);
    let rebid: Vec<Bundle> = bundles
        .iter()
        .map(|b| {
            let peers: Vec<BundleId> = groups
                .iter()
                .find(|g| g.contains(b.id))
                .map(|g| g.members.iter().copied().filter(|&m| m != b.id).collect())
                .unwrap_or_default();
            let draw = |r: &mut rand_chacha::ChaCha8Rng| Amount::from_units(r.gen_range(0..=100));
            let bid = if peers.is_empty() || r.gen_bool(0.3) {
                BidFunction::constant(draw(&mut r))
            } else {
                let mut entries = vec![(ContextSignature::empty(), draw(&mut r))];
                for p in peers.iter().take(3) {
                    entries.push((ContextSignature(vec![*p]), draw(&mut r)));
                }
                BidFunction::table(entries, draw(&mut r))
            };
            Bundle {
                bid: bid.clone(),
                valuation: bid,
                ..b.clone()
            }
        })
        .collect();
    BundleSet::new(rebid).expect("same ids as the input")
}

/// Digest of every candidate the default evaluates, group by group.
pub fn transcript_digest(scenario: &Scenario) -> ([u8; 32], u64) {
    let algo = DefaultAlgorithm::new(scenario.k_cutoff, scenario.seed);
    let cb = algo.one_time_coinbase(&[]);
    let mut h = Sha256::new();
    let mut count = 0u64;
    for g in get_conflict_groups(&scenario.bundles) {
        let mut observe = |b: &Block| {
            count += 1;
            h.update((b.len() as u32).to_le_bytes());
            for id in b.ids() {
                h.update(id.0.to_le_bytes());
            }
        };
        resolve_group_traced(&g, &scenario.bundles, scenario.k_cutoff, scenario.seed, &cb, &mut observe);
        h.update(b"|");
    }
    (h.finalize().into(), count)
}

/// Candidate sets do not depend on the bids.
pub fn transcripts(n: usize, seed: u64) -> SuiteReport {
    run_cases("transcripts", n, |i| {
        let s = derive_seed(seed, "transcripts", i as u64);
        let mut p = Profile::builtin(if i % 2 == 0 { "realistic" } else { "stress-large-groups" }).map_err(err)?;
        p.n_bundles = 24;
        p.group_sizes.retain(|&(size, _)| size <= 24);
        p.topologies = vec![(Topology::Clique, 1), (Topology::Chain, 1), (Topology::Star, 1)];
        let base = generate_scenario(&p, s).map_err(err)?;
        let mut a = base.clone();
        a.bundles = rebid(&base.bundles, derive_seed(s, "profile", 0));
        let mut b = base;
        b.bundles = rebid(&b.bundles, derive_seed(s, "profile", 1));
        let (da, ca) = transcript_digest(&a);
        let (db, cb) = transcript_digest(&b);
        if da != db || ca != cb {
            return Err(format!("seed {s}: {ca} vs {cb} candidates, digests differ"));
        }
        Ok(())
    })
}

/// Fraction of `n` scenarios from `profile` where no baseline beats the default.
pub fn default_optimal_fraction(profile: &Profile, n: usize, seed: u64) -> Result<(usize, usize), String> {
    let hits: Vec<bool> = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = derive_seed(seed, "compare", i as u64);
            let scenario = generate_scenario(profile, s).map_err(err)?;
            compare_algorithms(&scenario).map(|r| r.default_is_best).map_err(err)
        })
        .collect::<Result<_, _>>()?;
    Ok((hits.iter().filter(|&&h| h).count(), n))
}

/// The default is never beaten when every group is below the cutoff.
pub fn compare_small(n: usize, seed: u64) -> SuiteReport {
    let p = Profile::builtin("small-groups").expect("built-in");
    let mut report = run_cases("compare-small-groups", n, |i| {
        let s = derive_seed(seed, "compare", i as u64);
        let scenario = generate_scenario(&p, s).map_err(err)?;
        let r = compare_algorithms(&scenario).map_err(err)?;
        if !r.default_is_best {
            return Err(format!("seed {s}: a baseline beats the default"));
        }
        Ok(())
    });
    report.figures.push(("default-optimal".into(), format!("{}/{}", n - report.failures, n)));
    report
}

/// On large groups the default-optimal fraction is reproducible, and the
/// truncation fixture loses to greedy.
pub fn compare_large(n: usize, seed: u64) -> SuiteReport {
    let p = Profile::builtin("stress-large-groups").expect("built-in");
    let first = default_optimal_fraction(&p, n, seed);
    let second = default_optimal_fraction(&p, n, seed);
    let witness = compare_algorithms(&fixtures::truncation_witness()).map_err(err);
    let mut failures = Vec::new();
    match (&first, &second) {
        (Ok(a), Ok(b)) if a == b => {}
        _ => failures.push(format!("fraction not reproducible: {first:?} vs {second:?}")),
    }
    match &witness {
        Ok(r) if !r.default_is_best => {}
        Ok(r) => failures.push(format!(
            "truncation fixture: default {:?} not beaten",
            r.value_of(Algorithm::Default)
        )),
        Err(e) => failures.push(e.clone()),
    }
    let mut figures = Vec::new();
    if let Ok((hits, total)) = first {
        figures.push(("default-optimal".into(), format!("{hits}/{total}")));
    }
    if let Ok(r) = witness {
        for alg in [Algorithm::Default, Algorithm::GreedyByBid] {
            if let Some(v) = r.value_of(alg) {
                figures.push((format!("truncation {}", alg.name()), v.to_string()));
            }
        }
    }
    SuiteReport {
        suite: "compare-large-groups",
        cases: 2,
        failures: failures.len(),
        witnesses: failures,
        note: None,
        figures,
    }
}
