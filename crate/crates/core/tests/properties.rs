//! Invariants over random inputs, checked against a brute-force optimum
//! written independently of the library's oracle.

use std::collections::BTreeSet;

use blockmech::builders::{BidPolicy, BuilderKind, BuilderSpec};
use blockmech::default_algo::{block_building, DefaultAlgorithm};
use blockmech::mechanism::run_mechanism;
use blockmech::model::{BidFunction, Bundle, BundleId, BundleSet, CoinbaseLabel, ContextSignature, Scenario, StorageKey, TxHash, TxRef};
use blockmech::suites::{rebid, transcript_digest};
use blockmech::Amount;
use proptest::prelude::*;

/// Best total bid over every ordered subset, by direct recursion. All
/// bundles share one key, so every earlier bundle is a predecessor.
fn brute_force(bundles: &[Bundle], cb: &CoinbaseLabel) -> Amount {
    fn go(bundles: &[Bundle], used: &mut Vec<BundleId>, cb: &CoinbaseLabel) -> Amount {
        let mut best = Amount::ZERO;
        for b in bundles {
            if used.contains(&b.id) {
                continue;
            }
            let here = b.bid.evaluate(used, cb);
            used.push(b.id);
            let rest = go(bundles, used, cb);
            used.pop();
            best = best.max(here + rest);
        }
        best
    }
    go(bundles, &mut Vec::new(), cb)
}

fn clique_bundle(id: u32, head: i64, behind: Vec<(u32, i64)>, default: i64) -> Bundle {
    let entries = std::iter::once((ContextSignature::empty(), Amount::from_units(head)))
        .chain(behind.into_iter().map(|(p, v)| (ContextSignature::of(&[p]), Amount::from_units(v))));
    Bundle::new(
        id,
        vec![TxRef {
            hash: TxHash::from_low_u64(id as u64 + 1),
            target: format!("0x{id}"),
        }],
        BidFunction::table(entries, default),
    )
    .with_writes([StorageKey::new("0xhot", "0")])
}

fn arb_clique(max: usize) -> impl Strategy<Value = Vec<Bundle>> {
    (1..=max).prop_flat_map(|n| {
        proptest::collection::vec((0i64..50, proptest::collection::vec(0i64..50, n), 0i64..50), n).prop_map(move |rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (head, behind, default))| {
                    let id = i as u32 + 1;
                    let behind = (1..=n as u32).filter(|&p| p != id).zip(behind).collect();
                    clique_bundle(id, head, behind, default)
                })
                .collect()
        })
    })
}

fn arb_builders() -> impl Strategy<Value = Vec<BuilderSpec>> {
    let kind = prop_oneof![
        Just(BuilderKind::CopyDefault),
        Just(BuilderKind::GreedyByBid),
        Just(BuilderKind::HashMin),
        Just(BuilderKind::HashMax),
        Just(BuilderKind::Empty),
    ];
    let policy = prop_oneof![
        Just(BidPolicy::Truthful),
        (-20i64..20).prop_map(|u| BidPolicy::Offset { amount: Amount::from_units(u) }),
        (0i64..200).prop_map(|u| BidPolicy::Fixed { amount: Amount::from_units(u) }),
    ];
    proptest::collection::vec((kind, policy), 0..=3).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(j, (k, p))| BuilderSpec::new(format!("b{j}"), CoinbaseLabel(format!("0xb{j}")), k).with_bid(p))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn default_matches_brute_force(bundles in arb_clique(5), seed in any::<u64>()) {
        let set = BundleSet::new(bundles.clone()).unwrap();
        let run = block_building(&set, 8, seed);
        prop_assert_eq!(run.value, brute_force(&bundles, &run.coinbase));
    }

    #[test]
    fn counterfactuals_match_brute_force(bundles in arb_clique(4)) {
        let set = BundleSet::new(bundles.clone()).unwrap();
        let algo = DefaultAlgorithm::new(8, 0);
        let cb = algo.one_time_coinbase(&[]);
        let run = algo.build_with_counterfactuals(&set, &cb);
        for b in &bundles {
            let zeroed: Vec<Bundle> = set.with_zeroed_bid(b.id).unwrap().iter().cloned().collect();
            prop_assert_eq!(run.counterfactuals[&b.id].others_value, brute_force(&zeroed, &cb));
        }
    }

    #[test]
    fn settlement_is_balanced(bundles in arb_clique(4), extra in 0usize..4, builders in arb_builders()) {
        // conflict-free bundles next to the clique
        let mut all = bundles;
        let base = all.len() as u32;
        for i in 0..extra as u32 {
            let id = base + i + 1;
            all.push(
                Bundle::new(id, vec![TxRef { hash: TxHash::from_low_u64(100 + id as u64), target: "0xfree".into() }], BidFunction::constant(id as i64))
                    .with_writes([StorageKey::balance(format!("0xs{id}"))]),
            );
        }
        let s = Scenario::new(BundleSet::new(all).unwrap()).with_builders(builders);
        let out = run_mechanism(&s).unwrap();
        prop_assert!(out.default_refunds.values().all(|r| !r.is_negative()));
        prop_assert!(out.refunds_non_negative());
        prop_assert!(out.outflow <= out.inflow);
        prop_assert!(!out.proposer_revenue.is_negative());
        // everything the mechanism keeps goes to the proposer
        prop_assert_eq!(out.inflow - out.outflow, out.proposer_revenue);
    }

    #[test]
    fn truthful_beats_scaling_without_builders(bundles in arb_clique(4), pick in 0usize..4, num in 0i128..8) {
        let set = BundleSet::new(bundles).unwrap();
        let id = set.ids()[pick % set.len()];
        let s = Scenario::new(set.clone());
        let truthful = run_mechanism(&s).unwrap().searcher_utility(id);
        let lie = set.bundle(id).unwrap().valuation.scaled(num, 4);
        let mut s2 = s.clone();
        s2.bundles = set.with_bid(id, lie).unwrap();
        prop_assert!(run_mechanism(&s2).unwrap().searcher_utility(id) <= truthful);
    }

    #[test]
    fn candidate_transcripts_ignore_bids(n in 2usize..12, seed in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        // a chain wider than the cutoff exercises truncation too
        let bundles: Vec<Bundle> = (1..=n as u32)
            .map(|i| {
                let mut x = clique_bundle(i, 1, vec![], 1);
                x.writes = BTreeSet::from([StorageKey::new("0xchain", i.to_string())]);
                if i > 1 {
                    x.reads.insert(StorageKey::new("0xchain", (i - 1).to_string()));
                }
                x
            })
            .collect();
        let s = Scenario::new(BundleSet::new(bundles).unwrap()).with_k_cutoff(6).with_seed(seed);
        let mut sa = s.clone();
        sa.bundles = rebid(&s.bundles, a);
        let mut sb = s;
        sb.bundles = rebid(&sb.bundles, b);
        prop_assert_eq!(transcript_digest(&sa), transcript_digest(&sb));
    }
}
