//! Greedy reference builders and the value comparison harness.
//!
//! The two greedy orderings are simple stand-ins for production builder
//! orderings; they are not replicas of any particular implementation.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::amount::Amount;
use crate::default_algo::DefaultAlgorithm;
use crate::model::{block_total_bid, Block, Bundle, BundleId, BundleSet, CoinbaseLabel, ModelError, Scenario};
use crate::oracle::{vcg_outcome, DEFAULT_ORACLE_LIMIT};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BaselineError {
    #[error("bundle {0} has zero weight")]
    ZeroWeight(BundleId),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Marginal bid of `candidate` if appended after `block`.
fn appended_bid(block: &[&Bundle], candidate: &Bundle, coinbase: &CoinbaseLabel, preds: &mut Vec<BundleId>) -> Amount {
    preds.clear();
    preds.extend(block.iter().filter(|p| p.affects(candidate, coinbase)).map(|p| p.id));
    candidate.bid_at(preds, coinbase)
}

/// Append the best remaining bundle by `better` until nothing adds value.
fn greedy<F>(bundles: &BundleSet, coinbase: &CoinbaseLabel, mut better: F) -> Block
where
    F: FnMut((Amount, &Bundle), (Amount, &Bundle)) -> bool,
{
    let mut chosen: Vec<&Bundle> = Vec::new();
    let mut remaining: Vec<&Bundle> = bundles.iter().collect();
    let mut preds = Vec::new();
    loop {
        let mut best: Option<(usize, Amount)> = None;
        for (pos, &b) in remaining.iter().enumerate() {
            let bid = appended_bid(&chosen, b, coinbase, &mut preds);
            if !bid.is_positive() {
                continue;
            }
            // ids ascend in `remaining`, so keeping the incumbent on ties picks the smaller id
            if best.is_none_or(|(bp, bv)| better((bid, b), (bv, remaining[bp]))) {
                best = Some((pos, bid));
            }
        }
        match best {
            Some((pos, _)) => chosen.push(remaining.remove(pos)),
            None => break,
        }
    }
    Block(chosen.iter().map(|b| b.id).collect())
}

pub fn greedy_by_bid(bundles: &BundleSet, coinbase: &CoinbaseLabel) -> Block {
    greedy(bundles, coinbase, |(a, _), (b, _)| a > b)
}

pub fn greedy_by_density(bundles: &BundleSet, coinbase: &CoinbaseLabel) -> Result<Block, BaselineError> {
    if let Some(b) = bundles.iter().find(|b| b.weight == 0) {
        return Err(BaselineError::ZeroWeight(b.id));
    }
    Ok(greedy(bundles, coinbase, |(a, x), (b, y)| {
        a.nanos() * y.weight as i128 > b.nanos() * x.weight as i128
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Default,
    GreedyByBid,
    GreedyByDensity,
    Oracle,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Default,
        Algorithm::GreedyByBid,
        Algorithm::GreedyByDensity,
        Algorithm::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Default => "default",
            Algorithm::GreedyByBid => "greedy-by-bid",
            Algorithm::GreedyByDensity => "greedy-by-density",
            Algorithm::Oracle => "oracle",
        }
    }

    pub fn note(self) -> Option<&'static str> {
        match self {
            Algorithm::GreedyByBid | Algorithm::GreedyByDensity => Some("stand-in greedy, not a production ordering"),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmResult {
    pub algorithm: Algorithm,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<&'static str>,
    pub block: Block,
    pub value: Amount,
    /// Best value minus this value.
    pub gap: Amount,
    /// `gap / best`, absent when the best value is zero.
    pub relative_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub bundles: usize,
    pub results: Vec<AlgorithmResult>,
    pub default_is_best: bool,
    pub oracle_available: bool,
}

impl CompareReport {
    pub fn value_of(&self, algorithm: Algorithm) -> Option<Amount> {
        self.results.iter().find(|r| r.algorithm == algorithm).map(|r| r.value)
    }
}

fn run_one(
    algorithm: Algorithm,
    scenario: &Scenario,
    coinbase: &CoinbaseLabel,
    oracle_limit: usize,
) -> Result<Option<Block>, BaselineError> {
    let bundles = &scenario.bundles;
    Ok(match algorithm {
        Algorithm::Default => Some(
            DefaultAlgorithm::new(scenario.k_cutoff, scenario.seed)
                .build(bundles, coinbase)
                .block,
        ),
        Algorithm::GreedyByBid => Some(greedy_by_bid(bundles, coinbase)),
        Algorithm::GreedyByDensity => Some(greedy_by_density(bundles, coinbase)?),
        Algorithm::Oracle => {
            if bundles.len() > oracle_limit {
                None
            } else {
                let out = vcg_outcome(bundles, coinbase, oracle_limit).map_err(|e| match e {
                    crate::oracle::OracleError::Model(m) => BaselineError::Model(m),
                    crate::oracle::OracleError::TooLarge { .. } => unreachable!("size checked above"),
                })?;
                Some(out.winner)
            }
        }
    })
}

/// Run every algorithm on the whole bundle set and record per-algorithm
/// wall time alongside the report. Timings are kept out of the report.
pub fn compare_with_timings(
    scenario: &Scenario,
    oracle_limit: usize,
) -> Result<(CompareReport, Vec<(Algorithm, Duration)>), BaselineError> {
    let algo = DefaultAlgorithm::new(scenario.k_cutoff, scenario.seed);
    let coinbase = algo.one_time_coinbase(&[]);
    let mut blocks = Vec::new();
    let mut timings = Vec::new();
    for alg in Algorithm::ALL {
        let start = Instant::now();
        let block = run_one(alg, scenario, &coinbase, oracle_limit)?;
        timings.push((alg, start.elapsed()));
        if let Some(block) = block {
            let value = block_total_bid(&block, &scenario.bundles, &coinbase)?;
            blocks.push((alg, block, value));
        }
    }
    let best = blocks.iter().map(|(_, _, v)| *v).max().unwrap_or(Amount::ZERO);
    let results: Vec<AlgorithmResult> = blocks
        .into_iter()
        .map(|(algorithm, block, value)| AlgorithmResult {
            algorithm,
            note: algorithm.note(),
            gap: best - value,
            relative_gap: (best - value).ratio(best),
            block,
            value,
        })
        .collect();
    let default_value = results[0].value;
    let report = CompareReport {
        bundles: scenario.bundles.len(),
        oracle_available: results.iter().any(|r| r.algorithm == Algorithm::Oracle),
        // the oracle is an upper bound, not a competitor
        default_is_best: results
            .iter()
            .filter(|r| r.algorithm != Algorithm::Oracle)
            .all(|r| r.value <= default_value),
        results,
    };
    Ok((report, timings))
}

pub fn compare_algorithms(scenario: &Scenario) -> Result<CompareReport, BaselineError> {
    compare_with_timings(scenario, DEFAULT_ORACLE_LIMIT).map(|(r, _)| r)
}
