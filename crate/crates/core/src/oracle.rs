//! Exact VCG over the whole block space. Exponential; small inputs only.

use std::collections::BTreeMap;

use itertools::Itertools;
use serde::Serialize;

use crate::amount::Amount;
use crate::model::{block_bids, Block, BundleId, BundleSet, CoinbaseLabel, ModelError};

pub const DEFAULT_ORACLE_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("{size} bundles exceed the oracle limit of {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Every ordered subset of `bundles`: by length, then lexicographic in id.
pub fn full_omega(bundles: &BundleSet, limit: usize) -> Result<Vec<Block>, OracleError> {
    if bundles.len() > limit {
        return Err(OracleError::TooLarge {
            size: bundles.len(),
            limit,
        });
    }
    let ids = bundles.ids();
    Ok((0..=ids.len())
        .flat_map(|k| ids.iter().copied().permutations(k).map(Block))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleRow {
    pub block: Block,
    pub bids: BTreeMap<BundleId, Amount>,
    pub total: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VcgOutcome {
    pub winner: Block,
    pub total_bid: Amount,
    pub charges: BTreeMap<BundleId, Amount>,
    pub refunds: BTreeMap<BundleId, Amount>,
    /// Best total of the others' bids with each bundle's bid zeroed.
    pub others_optimum: BTreeMap<BundleId, Amount>,
    pub proposer_revenue: Amount,
}

fn score(block: &Block, bundles: &BundleSet, coinbase: &CoinbaseLabel) -> Result<OracleRow, ModelError> {
    let bids: BTreeMap<BundleId, Amount> = block_bids(block, bundles, coinbase)?.into_iter().collect();
    Ok(OracleRow {
        block: block.clone(),
        total: bids.values().copied().sum(),
        bids,
    })
}

/// Bid table over the whole block space (nonempty blocks only, as printed
/// in the worked example).
pub fn bid_table(
    bundles: &BundleSet,
    coinbase: &CoinbaseLabel,
    limit: usize,
) -> Result<Vec<OracleRow>, OracleError> {
    full_omega(bundles, limit)?
        .iter()
        .filter(|b| !b.is_empty())
        .map(|b| score(b, bundles, coinbase).map_err(OracleError::from))
        .collect()
}

fn argmax(
    omega: &[Block],
    bundles: &BundleSet,
    coinbase: &CoinbaseLabel,
) -> Result<(Block, Amount), ModelError> {
    let mut best = (Block::empty(), Amount::ZERO);
    for block in omega {
        let total = score(block, bundles, coinbase)?.total;
        if total > best.1 {
            best = (block.clone(), total);
        }
    }
    Ok(best)
}

pub fn vcg_outcome(
    bundles: &BundleSet,
    coinbase: &CoinbaseLabel,
    limit: usize,
) -> Result<VcgOutcome, OracleError> {
    let omega = full_omega(bundles, limit)?;
    let (winner, total_bid) = argmax(&omega, bundles, coinbase)?;
    let winner_bids: BTreeMap<BundleId, Amount> = block_bids(&winner, bundles, coinbase)?.into_iter().collect();

    let mut charges = BTreeMap::new();
    let mut refunds = BTreeMap::new();
    let mut others_optimum = BTreeMap::new();
    for id in bundles.ids() {
        let zeroed = bundles.with_zeroed_bid(id)?;
        let (_, others) = argmax(&omega, &zeroed, coinbase)?;
        charges.insert(id, winner_bids.get(&id).copied().unwrap_or(Amount::ZERO));
        refunds.insert(id, total_bid - others);
        others_optimum.insert(id, others);
    }
    let proposer_revenue = charges.values().copied().sum::<Amount>() - refunds.values().copied().sum::<Amount>();
    Ok(VcgOutcome {
        winner,
        total_bid,
        charges,
        refunds,
        others_optimum,
        proposer_revenue,
    })
}
