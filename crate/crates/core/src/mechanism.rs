//! The full auction: conflict-free separation, default block with VCG-style
//! refunds, builder competition and settlement.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::amount::Amount;
use crate::builders::{BuildParams, BuilderOutput};
use crate::conflict::{conflict_free_set, get_conflict_groups};
use crate::default_algo::{Counterfactual, DefaultAlgorithm};
use crate::model::{
    bid_in_block, validate_builder_block, valuation_in_block, Block, BlockViolation, BundleId, BundleSet,
    CoinbaseLabel, ModelError, Scenario,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MechanismError {
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which refund rule settles the searchers when a builder wins.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefundRule {
    /// Refunds come from the default algorithm's counterfactuals.
    #[default]
    Default,
    /// Refunds come from the winning builder's reported counterfactual
    /// bids. Open to collusion; kept for demonstrations.
    Alternative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Winner {
    Default,
    Builder { index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BuilderEntry {
    pub name: String,
    pub label: CoinbaseLabel,
    pub block: Block,
    pub bid: Amount,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<String>,
    /// Searcher bids collected by the builder.
    pub collected: Amount,
    pub payment: Amount,
    pub refund: Amount,
}

impl BuilderEntry {
    pub fn qualified(&self) -> bool {
        self.violation.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearcherEntry {
    pub conflict_free: bool,
    pub included: bool,
    pub charge: Amount,
    pub refund: Amount,
    pub net: Amount,
    pub valuation: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MechanismOutcome {
    pub final_block: Block,
    pub final_coinbase: CoinbaseLabel,
    pub winner: Winner,
    pub refund_rule: RefundRule,
    pub default_block: Block,
    pub default_coinbase: CoinbaseLabel,
    pub beta0: Amount,
    pub beta_star: Amount,
    pub beta_prime: Amount,
    pub conflict_free: BTreeSet<BundleId>,
    /// Step-2 refunds for every non-conflict-free bundle.
    pub default_refunds: BTreeMap<BundleId, Amount>,
    pub counterfactuals: BTreeMap<BundleId, Counterfactual>,
    pub searchers: BTreeMap<BundleId, SearcherEntry>,
    pub builders: Vec<BuilderEntry>,
    pub proposer_revenue: Amount,
    /// Payments received by the mechanism.
    pub inflow: Amount,
    /// Refunds paid by the mechanism to searchers and builders.
    pub outflow: Amount,
}

impl MechanismOutcome {
    pub fn searcher_utility(&self, id: BundleId) -> Amount {
        searcher_utility(self, id)
    }

    pub fn builder_utility(&self, index: usize) -> Amount {
        builder_utility(self, index)
    }

    pub fn is_budget_balanced(&self) -> bool {
        self.outflow <= self.inflow
    }

    pub fn refunds_non_negative(&self) -> bool {
        self.searchers.values().all(|s| !s.refund.is_negative())
            && self.builders.iter().all(|b| !b.refund.is_negative())
    }
}

/// Default refund: value of `o*` to the non-conflict-free bundles minus
/// the others' value in the counterfactual block.
pub fn refund_default(
    i: BundleId,
    o_star: &Block,
    o_minus_i: &Block,
    rest: &BundleSet,
    coinbase: &CoinbaseLabel,
) -> Result<Amount, ModelError> {
    rest.bundle(i)?;
    let mut total = Amount::ZERO;
    let mut others = Amount::ZERO;
    for id in rest.ids() {
        total += bid_in_block(o_star, id, rest, coinbase)?;
        if id != i {
            others += bid_in_block(o_minus_i, id, rest, coinbase)?;
        }
    }
    Ok(total - others)
}

/// Alternative refunds `w_i = β* − β₋ᵢ` (floored at zero), scaled down in
/// proportion when their sum exceeds `max{β₀, β′}`.
pub fn alternative_refunds(
    beta_star: Amount,
    beta_minus: &BTreeMap<BundleId, Amount>,
    beta0: Amount,
    beta_prime: Amount,
) -> BTreeMap<BundleId, Amount> {
    let cap = beta0.max(beta_prime);
    let weights: BTreeMap<BundleId, Amount> = beta_minus
        .iter()
        .map(|(&id, &b)| (id, (beta_star - b).non_negative()))
        .collect();
    let total: Amount = weights.values().sum();
    if total <= cap {
        return weights;
    }
    weights
        .into_iter()
        .map(|(id, w)| (id, w.mul_ratio(cap.nanos(), total.nanos())))
        .collect()
}

/// Single-bundle form of [`alternative_refunds`].
pub fn alternative_refund(
    i: BundleId,
    beta_star: Amount,
    beta_minus: &BTreeMap<BundleId, Amount>,
    beta0: Amount,
    beta_prime: Amount,
) -> Amount {
    alternative_refunds(beta_star, beta_minus, beta0, beta_prime)
        .get(&i)
        .copied()
        .unwrap_or(Amount::ZERO)
}

/// S in ascending first-transaction-hash order.
fn conflict_free_order(bundles: &BundleSet, s: &BTreeSet<BundleId>) -> Vec<BundleId> {
    let mut v: Vec<_> = s
        .iter()
        .map(|&id| (bundles.get(id).expect("member").first_tx_hash(), id))
        .collect();
    v.sort();
    v.into_iter().map(|(_, id)| id).collect()
}

pub fn run_mechanism(scenario: &Scenario) -> Result<MechanismOutcome, MechanismError> {
    run_mechanism_with(scenario, RefundRule::Default)
}

pub fn run_mechanism_with(scenario: &Scenario, rule: RefundRule) -> Result<MechanismOutcome, MechanismError> {
    scenario.validate()?;
    let all = &scenario.bundles;
    let params = BuildParams {
        k_cutoff: scenario.k_cutoff,
        seed: scenario.seed,
    };

    // (0) conflict-free bundles sit out the competition
    let s = conflict_free_set(&get_conflict_groups(all));
    let rest_ids: BTreeSet<BundleId> = all.ids().into_iter().filter(|id| !s.contains(id)).collect();
    let rest = all.restricted_to(&rest_ids);

    // (1) default block and counterfactuals under a one-time label
    let algo = DefaultAlgorithm::new(scenario.k_cutoff, scenario.seed);
    let labels: Vec<CoinbaseLabel> = scenario.builders.iter().map(|b| b.label.clone()).collect();
    let default_coinbase = algo.one_time_coinbase(&labels);
    let run = algo.build_with_counterfactuals(&rest, &default_coinbase);
    let beta0 = run.value;

    // (2) refunds
    let mut default_refunds = BTreeMap::new();
    for &id in &rest_ids {
        let cf = &run.counterfactuals[&id];
        default_refunds.insert(id, refund_default(id, &run.block, &cf.block, &rest, &default_coinbase)?);
    }

    // (3) builders; the input is shared read-only
    let outputs: Vec<BuilderOutput> = scenario
        .builders
        .par_iter()
        .map(|b| b.produce(&rest, params))
        .collect();
    let mut builders: Vec<BuilderEntry> = scenario
        .builders
        .iter()
        .zip(outputs)
        .map(|(spec, out)| {
            let violation = validate_builder_block(&out.block, &rest_ids)
                .err()
                .map(|v: BlockViolation| v.to_string());
            BuilderEntry {
                name: spec.name.clone(),
                label: spec.label.clone(),
                bid: if violation.is_some() { Amount::ZERO } else { out.bid },
                block: out.block,
                violation,
                collected: Amount::ZERO,
                payment: Amount::ZERO,
                refund: Amount::ZERO,
            }
        })
        .collect();

    let mut ranked: Vec<usize> = (0..builders.len()).filter(|&j| builders[j].qualified()).collect();
    // highest bid first, lowest index among equals
    ranked.sort_by(|&a, &b| builders[b].bid.cmp(&builders[a].bid).then(a.cmp(&b)));
    let top = ranked.first().copied();
    let beta_star = top.map(|j| builders[j].bid).unwrap_or(Amount::ZERO);
    let beta_prime = ranked.get(1).map(|&j| builders[j].bid).unwrap_or(Amount::ZERO);

    // (4)
    let builder_wins = top.filter(|_| beta0 < beta_star);
    let (winner, base_block, final_coinbase) = match builder_wins {
        None => (Winner::Default, run.block.clone(), default_coinbase.clone()),
        Some(j) => (
            Winner::Builder { index: j },
            builders[j].block.clone(),
            builders[j].label.clone(),
        ),
    };
    let mut final_ids = base_block.ids().to_vec();
    final_ids.extend(conflict_free_order(all, &s));
    let final_block = Block(final_ids);

    let mut searcher_refunds = default_refunds.clone();
    if let (Some(j), RefundRule::Alternative) = (builder_wins, rule) {
        let beta_minus = scenario.builders[j].counterfactual_bids(&rest, params, beta_star);
        searcher_refunds = alternative_refunds(beta_star, &beta_minus, beta0, beta_prime);
    }

    let mut searchers = BTreeMap::new();
    let mut charges_total = Amount::ZERO;
    let mut s_charges = Amount::ZERO;
    let mut searcher_refund_total = Amount::ZERO;
    for id in all.ids() {
        let charge = bid_in_block(&final_block, id, all, &final_coinbase)?;
        let valuation = valuation_in_block(&final_block, id, all, &final_coinbase)?;
        let conflict_free = s.contains(&id);
        let refund = if conflict_free {
            s_charges += charge;
            charge
        } else {
            searcher_refunds.get(&id).copied().unwrap_or(Amount::ZERO)
        };
        charges_total += charge;
        searcher_refund_total += refund;
        searchers.insert(
            id,
            SearcherEntry {
                conflict_free,
                included: final_block.contains(id),
                charge,
                refund,
                net: charge - refund,
                valuation,
            },
        );
    }
    let rest_refunds: Amount = searchers
        .iter()
        .filter(|(_, e)| !e.conflict_free)
        .map(|(_, e)| e.refund)
        .sum();

    let (inflow, builder_refund, proposer_revenue) = match builder_wins {
        None => (charges_total, Amount::ZERO, beta0 - rest_refunds),
        Some(j) => {
            let reserve = beta0.max(beta_prime);
            let b = &mut builders[j];
            b.collected = charges_total;
            b.payment = beta_star + s_charges;
            b.refund = beta_star - reserve;
            (b.payment, b.refund, reserve - rest_refunds)
        }
    };

    Ok(MechanismOutcome {
        final_block,
        final_coinbase,
        winner,
        refund_rule: rule,
        default_block: run.block,
        default_coinbase,
        beta0,
        beta_star,
        beta_prime,
        conflict_free: s,
        default_refunds,
        counterfactuals: run.counterfactuals,
        searchers,
        builders,
        proposer_revenue,
        inflow,
        outflow: searcher_refund_total + builder_refund,
    })
}

/// `v_i(ω) − b_i(ω) + r_i` on the final block.
pub fn searcher_utility(outcome: &MechanismOutcome, id: BundleId) -> Amount {
    outcome
        .searchers
        .get(&id)
        .map(|e| e.valuation - e.charge + e.refund)
        .unwrap_or(Amount::ZERO)
}

/// Searcher bids collected, minus the payment to the mechanism, plus the
/// surplus refund. Zero for every builder that did not win.
pub fn builder_utility(outcome: &MechanismOutcome, index: usize) -> Amount {
    match outcome.winner {
        Winner::Builder { index: j } if j == index => {
            let b = &outcome.builders[j];
            b.collected - b.payment + b.refund
        }
        _ => Amount::ZERO,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::{BidPolicy, BuilderKind, BuilderSpec};
    use crate::fixtures;

    fn units(n: i64) -> Amount {
        Amount::from_units(n)
    }

    fn copy_default(label: &str) -> BuilderSpec {
        BuilderSpec::new("copy", CoinbaseLabel::new(label), BuilderKind::CopyDefault)
    }

    #[test]
    fn no_builders_is_plain_vcg() {
        let out = run_mechanism(&fixtures::two_bundle()).unwrap();
        assert_eq!(out.winner, Winner::Default);
        assert_eq!(out.final_block, Block::of(&[2, 1]));
        assert_eq!(out.beta0, units(150));
        assert_eq!(out.proposer_revenue, units(30));
        assert_eq!(out.searchers[&BundleId(1)].refund, units(70));
        assert_eq!(out.searchers[&BundleId(2)].refund, units(50));
        assert_eq!(out.searcher_utility(BundleId(1)), units(70));
        assert!(out.is_budget_balanced());
    }

    #[test]
    fn matching_builder_loses_the_tie() {
        let s = fixtures::two_bundle().with_builders(vec![copy_default("0xb1")]);
        let out = run_mechanism(&s).unwrap();
        assert_eq!(out.winner, Winner::Default);
        assert_eq!(out.beta_star, units(150));
        assert_eq!(out.builders[0].refund, Amount::ZERO);
        assert_eq!(out.builder_utility(0), Amount::ZERO);
    }

    #[test]
    fn builder_outbidding_by_epsilon_wins() {
        let eps = Amount::from_nanos(1_000);
        let s = fixtures::two_bundle().with_builders(vec![
            copy_default("0xb1").with_bid(BidPolicy::Offset { amount: eps })
        ]);
        let out = run_mechanism(&s).unwrap();
        assert_eq!(out.winner, Winner::Builder { index: 0 });
        assert_eq!(out.beta_star, units(150) + eps);
        assert_eq!(out.builders[0].refund, eps);
        assert_eq!(out.proposer_revenue, units(30));
        assert_eq!(out.builder_utility(0), Amount::ZERO);
        assert_eq!(out.default_refunds, run_mechanism(&fixtures::two_bundle()).unwrap().default_refunds);
        assert!(out.is_budget_balanced());
    }

    #[test]
    fn truthful_winner_keeps_second_price_surplus() {
        use crate::model::{BidFunction, Bundle, StorageKey, TxHash, TxRef};
        let tx = |n: u64| vec![TxRef { hash: TxHash::from_low_u64(n), target: "0xamm".into() }];
        let key = StorageKey::new("0xamm", "0");
        let label = CoinbaseLabel::new("0xb1");
        // bundle 2 only executes for the builder
        let a = Bundle::new(1, tx(1), BidFunction::exclusive(80)).with_writes([key.clone()]);
        let b = Bundle::new(2, tx(2), BidFunction::exclusive(100)).with_writes([key]).with_gate(label.clone());
        let s = Scenario::new(BundleSet::new(vec![a, b]).unwrap())
            .with_builders(vec![BuilderSpec::new("copy", label, BuilderKind::CopyDefault)]);
        let out = run_mechanism(&s).unwrap();
        assert_eq!(out.beta0, units(80));
        assert_eq!(out.beta_star, units(100));
        assert_eq!(out.winner, Winner::Builder { index: 0 });
        assert_eq!(out.builder_utility(0), units(20));
        assert!(out.is_budget_balanced());
    }

    #[test]
    fn second_price_surplus() {
        let mut s = fixtures::two_bundle();
        s.builders = vec![
            BuilderSpec::new("fixed-21", CoinbaseLabel::new("0xb1"), BuilderKind::FixedBlock { order: vec![BundleId(2), BundleId(1)] }),
            BuilderSpec::new("fixed-12", CoinbaseLabel::new("0xb2"), BuilderKind::FixedBlock { order: vec![BundleId(1), BundleId(2)] }),
        ];
        s.builders[0].bid = BidPolicy::Fixed { amount: units(200) };
        s.builders[1].bid = BidPolicy::Fixed { amount: units(180) };
        let out = run_mechanism(&s).unwrap();
        assert_eq!(out.winner, Winner::Builder { index: 0 });
        assert_eq!(out.beta_prime, units(180));
        assert_eq!(out.builders[0].refund, units(20));
        // collected 150, paid 200, refunded 20
        assert_eq!(out.builder_utility(0), units(-30));
        assert!(out.is_budget_balanced());
    }

    #[test]
    fn invalid_builder_is_disqualified() {
        let s = fixtures::two_bundle().with_builders(vec![BuilderSpec::new(
            "dup",
            CoinbaseLabel::new("0xb1"),
            BuilderKind::FixedBlock { order: vec![BundleId(1), BundleId(1)] },
        )
        .with_bid(BidPolicy::Fixed { amount: units(1000) })]);
        let out = run_mechanism(&s).unwrap();
        assert_eq!(out.winner, Winner::Default);
        assert!(!out.builders[0].qualified());
        assert_eq!(out.beta_star, Amount::ZERO);
    }

    #[test]
    fn conflict_free_net_zero_in_both_cases() {
        let s = fixtures::collusion();
        let out = run_mechanism(&s).unwrap();
        assert_eq!(out.winner, Winner::Default);
        assert_eq!(out.conflict_free, [BundleId(3)].into_iter().collect());
        assert_eq!(out.final_block, Block::of(&[2, 1, 3]));
        assert_eq!(out.searchers[&BundleId(3)].net, Amount::ZERO);
        assert_eq!(out.searcher_utility(BundleId(3)), units(5));

        let mut s2 = s.clone();
        s2.builders[0].bid = BidPolicy::Fixed { amount: units(160) };
        let out2 = run_mechanism(&s2).unwrap();
        assert_eq!(out2.winner, Winner::Builder { index: 0 });
        assert_eq!(out2.final_block, Block::of(&[1, 2, 3]));
        assert_eq!(out2.searchers[&BundleId(3)].net, Amount::ZERO);
        assert_eq!(out2.default_refunds, out.default_refunds);
        assert_eq!(out2.builders[0].payment, units(165));
        assert!(out2.is_budget_balanced());
    }

    #[test]
    fn refund_default_checks() {
        let s = fixtures::two_bundle();
        let cb = CoinbaseLabel::new("0xd");
        let r1 = refund_default(BundleId(1), &Block::of(&[2, 1]), &Block::of(&[1, 2]), &s.bundles, &cb).unwrap();
        assert_eq!(r1, units(70));
        let r2 = refund_default(BundleId(2), &Block::of(&[2, 1]), &Block::of(&[2, 1]), &s.bundles, &cb).unwrap();
        assert_eq!(r2, units(50));
    }

    #[test]
    fn alternative_refund_shapes() {
        let m = |v: &[(u32, i64)]| v.iter().map(|&(i, a)| (BundleId(i), units(a))).collect::<BTreeMap<_, _>>();
        // collusion: β* = β₀ + ε, β₋ᵢ = ε
        let eps = units(1);
        let beta0 = units(150);
        let minus = [(BundleId(1), eps), (BundleId(2), beta0 + eps)].into_iter().collect();
        assert_eq!(alternative_refund(BundleId(1), beta0 + eps, &minus, beta0, units(120)), beta0);
        assert_eq!(alternative_refund(BundleId(2), beta0 + eps, &minus, beta0, units(120)), Amount::ZERO);
        // over the cap: proportional
        let scaled = alternative_refunds(units(100), &m(&[(1, 40), (2, 40)]), units(100), units(0));
        assert_eq!(scaled, m(&[(1, 50), (2, 50)]));
    }

    #[test]
    fn deficit_fixture_is_balanced() {
        let out = run_mechanism(&fixtures::deficit()).unwrap();
        assert_eq!(out.winner, Winner::Default);
        assert_eq!(out.beta0, units(100));
        assert_eq!(out.beta_star, units(100));
        assert_eq!(out.searchers[&BundleId(1)].refund, units(99));
        assert_eq!(out.searchers[&BundleId(2)].refund, Amount::ZERO);
        assert_eq!(out.proposer_revenue, units(1));
        assert!(out.is_budget_balanced());
    }
}
