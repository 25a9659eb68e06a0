//! Registry of builder algorithms a scenario can name.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::amount::Amount;
use crate::baselines::{greedy_by_bid, greedy_by_density};
use crate::default_algo::DefaultAlgorithm;
use crate::model::{block_total_bid, Block, BundleId, BundleSet, CoinbaseLabel};

/// How a builder orders the bundles it is given.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BuilderKind {
    /// Runs the default algorithm under its own label.
    CopyDefault,
    GreedyByBid,
    GreedyByDensity,
    /// Emits `order` verbatim, even if it names bundles it was not given.
    FixedBlock { order: Vec<BundleId> },
    /// The single bundle with the smallest first transaction hash.
    HashMin,
    /// The single bundle with the largest first transaction hash.
    HashMax,
    Empty,
}

/// How a builder turns its block's value into a bid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BidPolicy {
    /// The block's total bid.
    Truthful,
    Offset { amount: Amount },
    Fixed { amount: Amount },
    Scaled { num: i64, den: i64 },
}

/// Counterfactual bids a builder reports for the alternative refund rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "report", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CounterfactualReport {
    /// Rerun the algorithm with each bundle's bid zeroed.
    Honest,
    /// Report `epsilon` for `partner` and the winning bid for everyone else.
    Collude { partner: BundleId, epsilon: Amount },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuilderSpec {
    pub name: String,
    pub label: CoinbaseLabel,
    pub algorithm: BuilderKind,
    #[serde(default = "truthful")]
    pub bid: BidPolicy,
    #[serde(default = "honest")]
    pub report: CounterfactualReport,
}

fn truthful() -> BidPolicy {
    BidPolicy::Truthful
}

fn honest() -> CounterfactualReport {
    CounterfactualReport::Honest
}

/// What one builder hands to the auction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BuilderOutput {
    pub block: Block,
    /// Total bid of the block under the builder's label, or `None` when the
    /// block is not a valid block over the input.
    pub value: Option<Amount>,
    pub bid: Amount,
}

/// Parameters the default algorithm needs when a builder copies it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildParams {
    pub k_cutoff: usize,
    pub seed: u64,
}

impl BuilderSpec {
    pub fn new(name: impl Into<String>, label: CoinbaseLabel, algorithm: BuilderKind) -> Self {
        BuilderSpec {
            name: name.into(),
            label,
            algorithm,
            bid: BidPolicy::Truthful,
            report: CounterfactualReport::Honest,
        }
    }

    pub fn with_bid(mut self, bid: BidPolicy) -> Self {
        self.bid = bid;
        self
    }

    pub fn with_report(mut self, report: CounterfactualReport) -> Self {
        self.report = report;
        self
    }

    pub fn block(&self, bundles: &BundleSet, params: BuildParams) -> Block {
        let by_hash = |pick_max: bool| {
            let it = bundles.iter().map(|b| (b.first_tx_hash(), b.id));
            let chosen = if pick_max { it.max() } else { it.min() };
            Block(chosen.map(|(_, id)| id).into_iter().collect())
        };
        match &self.algorithm {
            BuilderKind::CopyDefault => {
                DefaultAlgorithm::new(params.k_cutoff, params.seed)
                    .build(bundles, &self.label)
                    .block
            }
            BuilderKind::GreedyByBid => greedy_by_bid(bundles, &self.label),
            // zero weights fall back to plain bid order
            BuilderKind::GreedyByDensity => {
                greedy_by_density(bundles, &self.label).unwrap_or_else(|_| greedy_by_bid(bundles, &self.label))
            }
            BuilderKind::FixedBlock { order } => Block(order.clone()),
            BuilderKind::HashMin => by_hash(false),
            BuilderKind::HashMax => by_hash(true),
            BuilderKind::Empty => Block::empty(),
        }
    }

    pub fn bid_for(&self, value: Amount) -> Amount {
        let bid = match &self.bid {
            BidPolicy::Truthful => value,
            BidPolicy::Offset { amount } => value + *amount,
            BidPolicy::Fixed { amount } => *amount,
            BidPolicy::Scaled { num, den } => value.mul_ratio(*num as i128, *den as i128),
        };
        bid.non_negative()
    }

    pub fn produce(&self, bundles: &BundleSet, params: BuildParams) -> BuilderOutput {
        let block = self.block(bundles, params);
        let value = block_total_bid(&block, bundles, &self.label).ok();
        BuilderOutput {
            bid: self.bid_for(value.unwrap_or(Amount::ZERO)),
            block,
            value,
        }
    }

    /// β₋ᵢ for every bundle in `bundles`, given the winning bid.
    pub fn counterfactual_bids(
        &self,
        bundles: &BundleSet,
        params: BuildParams,
        winning_bid: Amount,
    ) -> BTreeMap<BundleId, Amount> {
        bundles
            .ids()
            .into_iter()
            .map(|id| {
                let beta = match &self.report {
                    CounterfactualReport::Honest => {
                        let zeroed = bundles.with_zeroed_bid(id).expect("id from the set");
                        self.produce(&zeroed, params).bid
                    }
                    CounterfactualReport::Collude { partner, epsilon } => {
                        if *partner == id {
                            *epsilon
                        } else {
                            winning_bid
                        }
                    }
                };
                (id, beta)
            })
            .collect()
    }
}
