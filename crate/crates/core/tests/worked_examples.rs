//! Published worked examples, checked exactly.

use blockmech::fixtures;
use blockmech::mechanism::{run_mechanism, Winner};
use blockmech::model::{Block, BundleId, CoinbaseLabel};
use blockmech::oracle::{bid_table, vcg_outcome};
use blockmech::strategy::{budget_deficit_demo, collusion_demo, collusion_epsilons};
use blockmech::Amount;

fn units(n: i64) -> Amount {
    Amount::from_units(n)
}

#[test]
fn two_bundle_bid_table() {
    let set = fixtures::two_bundle().bundles;
    let cb = CoinbaseLabel::new("0xany");
    let rows = bid_table(&set, &cb, 8).unwrap();
    let got: Vec<(Block, Option<Amount>, Option<Amount>, Amount)> = rows
        .iter()
        .map(|r| (r.block.clone(), r.bids.get(&BundleId(1)).copied(), r.bids.get(&BundleId(2)).copied(), r.total))
        .collect();
    assert_eq!(
        got,
        vec![
            (Block::of(&[1]), Some(units(40)), None, units(40)),
            (Block::of(&[2]), None, Some(units(50)), units(50)),
            (Block::of(&[1, 2]), Some(units(40)), Some(units(80)), units(120)),
            (Block::of(&[2, 1]), Some(units(100)), Some(units(50)), units(150)),
        ]
    );

    let out = vcg_outcome(&set, &cb, 8).unwrap();
    assert_eq!(out.winner, Block::of(&[2, 1]));
    assert_eq!(out.others_optimum[&BundleId(1)], units(80));
    assert_eq!(out.others_optimum[&BundleId(2)], units(100));
    assert_eq!(out.refunds[&BundleId(1)], units(70));
    assert_eq!(out.refunds[&BundleId(2)], units(50));
    assert_eq!(out.proposer_revenue, units(30));
}

#[test]
fn mechanism_matches_table_without_builders() {
    let out = run_mechanism(&fixtures::two_bundle()).unwrap();
    assert_eq!(out.winner, Winner::Default);
    assert_eq!(out.final_block, Block::of(&[2, 1]));
    assert_eq!(out.searchers[&BundleId(1)].refund, units(70));
    assert_eq!(out.searchers[&BundleId(2)].refund, units(50));
    assert_eq!(out.proposer_revenue, units(30));
}

#[test]
fn builder_only_deficit() {
    let r = budget_deficit_demo(&fixtures::deficit()).unwrap();
    assert_eq!((r.beta_star, r.beta_prime), (units(100), units(1)));
    assert_eq!(r.best_without[&BundleId(1)], units(1));
    assert_eq!(r.refunds[&BundleId(1)], units(99));
    assert_eq!(r.refunds[&BundleId(2)], Amount::ZERO);
    assert_eq!(r.collected, units(1));
    assert_eq!(r.deficit, units(98));
    assert!(r.mechanism.is_budget_balanced());
    assert!(r.mechanism.proposer_revenue >= Amount::ZERO);
}

#[test]
fn colluding_pair_gains_beta0() {
    let s = fixtures::collusion();
    let honest = run_mechanism(&s).unwrap();
    let e = &honest.searchers[&BundleId(1)];
    let r = collusion_demo(&s, BundleId(1), &collusion_epsilons()).unwrap();
    for row in &r.rows {
        // u' = v(o*) - b(o*) + (beta0 + eps - eps)
        assert_eq!(row.searcher_utility_alternative_rule, e.valuation - e.charge + honest.beta0);
        assert!(row.searcher_utility_alternative_rule > r.honest_utility);
        assert_eq!(row.searcher_utility_default_rule, r.honest_utility);
        assert_eq!(row.builder_utility, Amount::ZERO);
    }
}
