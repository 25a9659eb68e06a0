//! Deviation sweeps, the integration game, exploit demonstrations and the
//! proposer adoption game.
//!
//! Sweeps are checks over finite misreport grids. A passing sweep means no
//! grid point beat truthful bidding; it says nothing about points off the
//! grid.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::amount::Amount;
use crate::builders::{BidPolicy, BuildParams, BuilderKind, BuilderSpec, CounterfactualReport};
use crate::conflict::{conflict_free_set, get_conflict_groups};
use crate::mechanism::{run_mechanism, run_mechanism_with, MechanismError, MechanismOutcome, RefundRule, Winner};
use crate::model::{
    bid_in_block, BidFunction, Block, Bundle, BundleId, BundleSet, CoinbaseLabel, ContextSignature, ModelError,
    Scenario,
};

pub const GRID_NOTE: &str = "finite misreport grid; not a proof over all bid functions";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StrategyError {
    #[error("no bundle {0}")]
    UnknownBundle(BundleId),
    #[error("no builder with index {0}")]
    UnknownBuilder(usize),
    #[error("bundle {0} is not conflict-free")]
    NotConflictFree(BundleId),
    #[error("the default block does not beat every builder")]
    DefaultNotDominant,
    #[error("scenario is neither conflict-free nor fully conflicting")]
    MixedConflict,
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A misreport derived from the true valuation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "transform", rename_all = "kebab-case")]
pub enum BidTransform {
    Scale {
        num: i128,
        den: i128,
    },
    /// Overwrite one table entry; `None` addresses the default.
    SetEntry {
        signature: Option<ContextSignature>,
        value: Amount,
    },
}

impl BidTransform {
    pub fn apply(&self, f: &BidFunction) -> BidFunction {
        match (self, f) {
            (BidTransform::Scale { num, den }, _) => f.scaled(*num, *den),
            (BidTransform::SetEntry { .. }, BidFunction::CoinbaseGated { target, inner }) => {
                BidFunction::gated(target.clone(), self.apply(inner))
            }
            (BidTransform::SetEntry { signature, value }, BidFunction::ContextTable { entries, default }) => {
                let mut entries = entries.clone();
                let mut default = *default;
                match signature {
                    Some(sig) => {
                        entries.insert(sig.clone(), *value);
                    }
                    None => default = *value,
                }
                BidFunction::ContextTable { entries, default }
            }
            (BidTransform::SetEntry { .. }, BidFunction::Constant { .. }) => f.clone(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            BidTransform::Scale { num, den } => format!("scale {num}/{den}"),
            BidTransform::SetEntry { signature: Some(sig), value } => format!("entry [{sig}] = {value}"),
            BidTransform::SetEntry { signature: None, value } => format!("default = {value}"),
        }
    }
}

const SCALES: [(i128, i128); 5] = [(0, 1), (1, 4), (1, 2), (2, 1), (4, 1)];
const MAX_EDITED_TABLE: usize = 4;

/// Scalings by 0, ¼, ½, 2 and 4, plus zeroing and doubling each entry of a
/// table with at most four entries.
pub fn standard_grid(valuation: &BidFunction) -> Vec<BidTransform> {
    let mut grid: Vec<BidTransform> = SCALES
        .iter()
        .map(|&(num, den)| BidTransform::Scale { num, den })
        .collect();
    let table = match valuation {
        BidFunction::CoinbaseGated { inner, .. } => inner.as_ref(),
        f => f,
    };
    if let BidFunction::ContextTable { entries, default } = table {
        if entries.len() <= MAX_EDITED_TABLE {
            let slots = entries
                .iter()
                .map(|(k, v)| (Some(k.clone()), *v))
                .chain([(None, *default)]);
            for (signature, v) in slots {
                for value in [Amount::ZERO, v + v] {
                    grid.push(BidTransform::SetEntry {
                        signature: signature.clone(),
                        value,
                    });
                }
            }
        }
    }
    grid
}

/// Offsets around a builder's truthful bid: ±50, ±10, ±1, ±0.1 and 0.
pub fn builder_offsets() -> Vec<Amount> {
    let tenth = Amount::from_nanos(100_000_000);
    let mut v: Vec<Amount> = [50, 10, 1].iter().map(|&u| -Amount::from_units(u)).collect();
    v.extend([-tenth, Amount::ZERO, tenth]);
    v.extend([1, 10, 50].iter().map(|&u| Amount::from_units(u)));
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Subject {
    Searcher { id: BundleId },
    Builder { index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeviationReport {
    pub subject: Subject,
    pub truthful_utility: Amount,
    pub best_deviation_utility: Amount,
    pub deviations: usize,
    pub dominant: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

fn report(subject: Subject, truthful: Amount, tried: Vec<(String, Amount)>) -> DeviationReport {
    let mut best: Option<(String, Amount)> = None;
    for (label, u) in &tried {
        if best.as_ref().is_none_or(|(_, b)| u > b) {
            best = Some((label.clone(), *u));
        }
    }
    let best_u = best.as_ref().map(|(_, u)| *u).unwrap_or(truthful);
    let dominant = truthful >= best_u;
    DeviationReport {
        subject,
        truthful_utility: truthful,
        best_deviation_utility: best_u,
        deviations: tried.len(),
        dominant,
        witness: if dominant {
            None
        } else {
            best.map(|(label, u)| format!("{label} gives {u} > {truthful}"))
        },
    }
}

fn with_bid(scenario: &Scenario, id: BundleId, bid: BidFunction) -> Result<Scenario, StrategyError> {
    let mut s = scenario.clone();
    s.bundles = s.bundles.with_bid(id, bid)?;
    Ok(s)
}

fn valuation_of(scenario: &Scenario, id: BundleId) -> Result<BidFunction, StrategyError> {
    Ok(scenario
        .bundles
        .get(id)
        .ok_or(StrategyError::UnknownBundle(id))?
        .valuation
        .clone())
}

/// Searcher `i`'s utility when bidding truthfully versus each grid point.
pub fn searcher_deviation_sweep(
    scenario: &Scenario,
    i: BundleId,
    grid: &[BidTransform],
) -> Result<DeviationReport, StrategyError> {
    let valuation = valuation_of(scenario, i)?;
    let truthful = run_mechanism(&with_bid(scenario, i, valuation.clone())?)?.searcher_utility(i);
    let tried = grid
        .par_iter()
        .map(|t| {
            let s = with_bid(scenario, i, t.apply(&valuation))?;
            Ok((t.describe(), run_mechanism(&s)?.searcher_utility(i)))
        })
        .collect::<Result<Vec<_>, StrategyError>>()?;
    Ok(report(Subject::Searcher { id: i }, truthful, tried))
}

fn with_policy(scenario: &Scenario, j: usize, bid: BidPolicy) -> Scenario {
    let mut s = scenario.clone();
    s.builders[j].bid = bid;
    s
}

/// Builder `j`'s utility when bidding its block's value versus each offset.
pub fn builder_deviation_sweep(
    scenario: &Scenario,
    j: usize,
    offsets: &[Amount],
) -> Result<DeviationReport, StrategyError> {
    if j >= scenario.builders.len() {
        return Err(StrategyError::UnknownBuilder(j));
    }
    let truthful = run_mechanism(&with_policy(scenario, j, BidPolicy::Truthful))?.builder_utility(j);
    let tried = offsets
        .par_iter()
        .map(|&amount| {
            let s = with_policy(scenario, j, BidPolicy::Offset { amount });
            Ok((format!("offset {amount}"), run_mechanism(&s)?.builder_utility(j)))
        })
        .collect::<Result<Vec<_>, StrategyError>>()?;
    Ok(report(Subject::Builder { index: j }, truthful, tried))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Access {
    Participate,
    Integrate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntegrationCell {
    pub access: Access,
    pub searcher_bid: String,
    pub builder_offset: Amount,
    pub searcher_utility: Amount,
    pub builder_utility: Amount,
    pub joint: Amount,
    pub builder_won: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntegrationReport {
    pub searcher: BundleId,
    pub builder: usize,
    /// Participate, truthful searcher, truthful builder.
    pub baseline: IntegrationCell,
    pub cells: Vec<IntegrationCell>,
    pub dominant: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<IntegrationCell>,
}

/// Joint utility of conflict-free searcher `i` and builder `j` over
/// {participate, integrate} × {truthful, misreports} × builder offsets.
/// Integration gates `i` on `j`'s label.
pub fn integration_game(
    scenario: &Scenario,
    i: BundleId,
    j: usize,
    grid: &[BidTransform],
    offsets: &[Amount],
) -> Result<IntegrationReport, StrategyError> {
    if j >= scenario.builders.len() {
        return Err(StrategyError::UnknownBuilder(j));
    }
    let valuation = valuation_of(scenario, i)?;
    if !conflict_free_set(&get_conflict_groups(&scenario.bundles)).contains(&i) {
        return Err(StrategyError::NotConflictFree(i));
    }
    let label = scenario.builders[j].label.clone();

    let mut plans: Vec<(Access, String, BidFunction, Option<Amount>)> = Vec::new();
    let bids: Vec<(String, BidFunction)> = std::iter::once(("truthful".to_string(), valuation.clone()))
        .chain(grid.iter().map(|t| (t.describe(), t.apply(&valuation))))
        .collect();
    for access in [Access::Participate, Access::Integrate] {
        for (name, bid) in &bids {
            plans.push((access, name.clone(), bid.clone(), None));
            for &off in offsets {
                plans.push((access, name.clone(), bid.clone(), Some(off)));
            }
        }
    }

    let cells = plans
        .par_iter()
        .map(|(access, name, bid, offset)| {
            let mut s = with_bid(scenario, i, bid.clone())?;
            let b = s.bundles.get_mut(i).expect("checked above");
            b.gate = match access {
                Access::Participate => None,
                Access::Integrate => Some(label.clone()),
            };
            s.builders[j].bid = match offset {
                None => BidPolicy::Truthful,
                Some(amount) => BidPolicy::Offset { amount: *amount },
            };
            let out = run_mechanism(&s)?;
            let (ui, uj) = (out.searcher_utility(i), out.builder_utility(j));
            Ok(IntegrationCell {
                access: *access,
                searcher_bid: name.clone(),
                builder_offset: offset.unwrap_or(Amount::ZERO),
                searcher_utility: ui,
                builder_utility: uj,
                joint: ui + uj,
                builder_won: out.winner == Winner::Builder { index: j },
            })
        })
        .collect::<Result<Vec<_>, StrategyError>>()?;

    let baseline = cells[0].clone();
    let witness = cells.iter().find(|c| c.joint > baseline.joint).cloned();
    Ok(IntegrationReport {
        searcher: i,
        builder: j,
        dominant: witness.is_none(),
        baseline,
        cells,
        witness,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CollusionRow {
    pub epsilon: Amount,
    pub builder_won: bool,
    /// Colluding searcher's utility under the default refund rule.
    pub searcher_utility_default_rule: Amount,
    /// Colluding searcher's utility under the alternative refund rule.
    pub searcher_utility_alternative_rule: Amount,
    /// `v_i(o*) − b_i(o*) + β₀`.
    pub predicted: Amount,
    pub builder_utility: Amount,
    pub proposer_revenue: Amount,
    pub other_refunds: BTreeMap<BundleId, Amount>,
    pub exploit: bool,
    pub default_rule_unchanged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CollusionReport {
    pub searcher: BundleId,
    pub honest_utility: Amount,
    pub honest_proposer_revenue: Amount,
    pub honest_other_refunds: BTreeMap<BundleId, Amount>,
    pub beta0: Amount,
    pub rows: Vec<CollusionRow>,
}

impl CollusionReport {
    pub fn holds(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.exploit && r.default_rule_unchanged && r.searcher_utility_alternative_rule == r.predicted)
    }
}

pub fn collusion_epsilons() -> Vec<Amount> {
    vec![Amount::from_nanos(1_000), Amount::from_nanos(1_000_000), Amount::from_units(1)]
}

fn fresh_label(scenario: &Scenario, base: &str) -> CoinbaseLabel {
    let taken: BTreeSet<&CoinbaseLabel> = scenario.builders.iter().map(|b| &b.label).collect();
    (0..)
        .map(|n| CoinbaseLabel(format!("{base}{n:02x}")))
        .find(|l| !taken.contains(l))
        .expect("unbounded labels")
}

/// A builder copies the default block, bids `β₀ + ε` and reports `β₋ᵢ = ε`
/// for its partner `i` and the winning bid for everyone else.
pub fn collusion_demo(
    scenario: &Scenario,
    i: BundleId,
    epsilons: &[Amount],
) -> Result<CollusionReport, StrategyError> {
    valuation_of(scenario, i)?;
    let honest = run_mechanism(scenario)?;
    if honest.winner != Winner::Default || honest.beta_star >= honest.beta0 {
        return Err(StrategyError::DefaultNotDominant);
    }
    let others = |o: &MechanismOutcome| -> BTreeMap<BundleId, Amount> {
        o.searchers
            .iter()
            .filter(|(id, _)| **id != i)
            .map(|(id, e)| (*id, e.refund))
            .collect()
    };
    let e = &honest.searchers[&i];
    let predicted = e.valuation - e.charge + honest.beta0;
    let label = fresh_label(scenario, "0xc0");

    let mut rows = Vec::new();
    for &epsilon in epsilons {
        let mut s = scenario.clone();
        s.builders.push(
            BuilderSpec::new("colluder", label.clone(), BuilderKind::CopyDefault)
                .with_bid(BidPolicy::Offset { amount: epsilon })
                .with_report(CounterfactualReport::Collude { partner: i, epsilon }),
        );
        let j = s.builders.len() - 1;
        let plain = run_mechanism_with(&s, RefundRule::Default)?;
        let alt = run_mechanism_with(&s, RefundRule::Alternative)?;
        let u_alt = alt.searcher_utility(i);
        rows.push(CollusionRow {
            epsilon,
            builder_won: alt.winner == Winner::Builder { index: j },
            searcher_utility_default_rule: plain.searcher_utility(i),
            searcher_utility_alternative_rule: u_alt,
            predicted,
            builder_utility: alt.builder_utility(j),
            proposer_revenue: alt.proposer_revenue,
            other_refunds: others(&alt),
            exploit: u_alt > honest.searcher_utility(i),
            default_rule_unchanged: plain.searcher_utility(i) == honest.searcher_utility(i),
        });
    }
    Ok(CollusionReport {
        searcher: i,
        honest_utility: honest.searcher_utility(i),
        honest_proposer_revenue: honest.proposer_revenue,
        honest_other_refunds: others(&honest),
        beta0: honest.beta0,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeficitReport {
    /// Truthful bid of each builder.
    pub builder_bids: Vec<Amount>,
    pub beta_star: Amount,
    pub beta_prime: Amount,
    /// Best builder value with each bundle's bid zeroed.
    pub best_without: BTreeMap<BundleId, Amount>,
    pub refunds: BTreeMap<BundleId, Amount>,
    pub collected: Amount,
    pub paid: Amount,
    pub deficit: Amount,
    pub mechanism: MechanismOutcome,
}

/// Payments an efficient, searcher- and builder-DSIC rule would make when
/// the candidate blocks come only from the builders: the winner pays the
/// second-highest bid and each bundle gets `β* − H_i`, where `H_i` is the best
/// builder value with that bundle's bid zeroed.
pub fn budget_deficit_demo(scenario: &Scenario) -> Result<DeficitReport, StrategyError> {
    let params = BuildParams {
        k_cutoff: scenario.k_cutoff,
        seed: scenario.seed,
    };
    let bids: Vec<Amount> = scenario
        .builders
        .iter()
        .map(|b| b.produce(&scenario.bundles, params).bid)
        .collect();
    let mut sorted = bids.clone();
    sorted.sort_by(|a, b| b.cmp(a));
    let beta_star = sorted.first().copied().unwrap_or(Amount::ZERO);
    let beta_prime = sorted.get(1).copied().unwrap_or(Amount::ZERO);

    let mut best_without = BTreeMap::new();
    let mut refunds = BTreeMap::new();
    for id in scenario.bundles.ids() {
        let zeroed = scenario.bundles.with_zeroed_bid(id)?;
        let h = scenario
            .builders
            .iter()
            .map(|b| b.produce(&zeroed, params).bid)
            .max()
            .unwrap_or(Amount::ZERO);
        best_without.insert(id, h);
        refunds.insert(id, beta_star - h);
    }
    let paid: Amount = refunds.values().sum();
    Ok(DeficitReport {
        builder_bids: bids,
        beta_star,
        beta_prime,
        best_without,
        refunds,
        collected: beta_prime,
        paid,
        deficit: paid - beta_prime,
        mechanism: run_mechanism(scenario)?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SybilReport {
    pub original: BundleId,
    pub parts: Vec<BundleId>,
    pub refund_before: Amount,
    pub refund_after: Amount,
    pub utility_before: Amount,
    pub utility_after: Amount,
    pub inflated: bool,
}

/// Replace bundle `i` by `parts` and compare the refunds the searcher
/// collects. The parts must be free of duplicates with the remaining
/// bundles and, executed together, must bid what `i` bids alone.
pub fn sybil_demo(scenario: &Scenario, i: BundleId, parts: Vec<Bundle>) -> Result<SybilReport, StrategyError> {
    let original = scenario.bundles.get(i).ok_or(StrategyError::UnknownBundle(i))?.clone();
    if parts.is_empty() {
        return Err(StrategyError::InvalidSplit("no parts".into()));
    }
    let part_ids: Vec<BundleId> = parts.iter().map(|b| b.id).collect();
    let probe = BundleSet::new(parts.clone())?;
    let probe_cb = CoinbaseLabel::new("0xsybil");
    let together = Block(part_ids.clone());
    let joint: Amount = part_ids
        .iter()
        .map(|&id| bid_in_block(&together, id, &probe, &probe_cb))
        .sum::<Result<Amount, _>>()?;
    let alone = original.bid_at(&[], &probe_cb);
    if joint != alone {
        return Err(StrategyError::InvalidSplit(format!("parts bid {joint} together, original bids {alone}")));
    }

    let before = run_mechanism(scenario)?;
    let mut bundles: Vec<Bundle> = scenario.bundles.iter().filter(|b| b.id != i).cloned().collect();
    bundles.extend(parts);
    let mut split = scenario.clone();
    split.bundles = BundleSet::new(bundles)?;
    let after = run_mechanism(&split)?;

    let refund_after: Amount = part_ids.iter().map(|id| after.searchers[id].refund).sum();
    let utility_after: Amount = part_ids.iter().map(|&id| after.searcher_utility(id)).sum();
    let refund_before = before.searchers[&i].refund;
    Ok(SybilReport {
        original: i,
        parts: part_ids,
        refund_before,
        refund_after,
        utility_before: before.searcher_utility(i),
        utility_after,
        inflated: refund_after > refund_before,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConflictStructure {
    NoConflict,
    FullConflict,
}

/// All bundles in singletons, or one group where any bundle behind another
/// bids and values nothing.
pub fn classify_conflicts(bundles: &BundleSet) -> Result<ConflictStructure, StrategyError> {
    let groups = get_conflict_groups(bundles);
    if groups.iter().all(|g| g.len() == 1) {
        return Ok(ConflictStructure::NoConflict);
    }
    if groups.len() != 1 {
        return Err(StrategyError::MixedConflict);
    }
    let cb = CoinbaseLabel::new("0xprobe");
    for a in bundles.iter() {
        for b in bundles.iter().filter(|b| b.id != a.id) {
            if !a.affects(b, &cb) {
                return Err(StrategyError::MixedConflict);
            }
            let behind = [a.id];
            if b.bid_at(&behind, &cb).is_positive() || b.valuation_at(&behind, &cb).is_positive() {
                return Err(StrategyError::MixedConflict);
            }
        }
    }
    Ok(ConflictStructure::FullConflict)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PrivateSplit {
    /// Bundles sent privately to the proposer.
    pub private: Vec<BundleId>,
    pub boost_revenue: Amount,
    pub private_revenue: Amount,
    pub proposer_utility: Amount,
    /// `max{v₂(S), v₂(M∖S)}`; zero in the conflict-free case.
    pub predicted: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdoptionReport {
    pub structure: ConflictStructure,
    pub commit_utility: Amount,
    /// Second-highest valuation over all bundles (zero for no conflict).
    pub commit_predicted: Amount,
    pub best_build_and_choose: Amount,
    pub splits: Vec<PrivateSplit>,
    pub commit_weakly_optimal: bool,
    pub predictions_hold: bool,
}

fn second_highest(values: impl IntoIterator<Item = Amount>) -> Amount {
    let mut v: Vec<Amount> = values.into_iter().collect();
    v.sort_by(|a, b| b.cmp(a));
    v.get(1).copied().unwrap_or(Amount::ZERO)
}

pub const ADOPTION_LIMIT: usize = 12;

/// Proposer's choice between committing to the mechanism and building
/// privately from whatever searchers send it, for every split of the
/// bundles. Only the default algorithm runs; searchers bid truthfully.
pub fn adoption_game(scenario: &Scenario) -> Result<AdoptionReport, StrategyError> {
    let mut base = scenario.clone();
    base.builders.clear();
    let truthful: Vec<Bundle> = base
        .bundles
        .iter()
        .map(|b| Bundle {
            bid: b.valuation.clone(),
            ..b.clone()
        })
        .collect();
    base.bundles = BundleSet::new(truthful)?;
    let structure = classify_conflicts(&base.bundles)?;
    if base.bundles.len() > ADOPTION_LIMIT {
        return Err(StrategyError::InvalidSplit(format!(
            "{} bundles exceed the split enumeration limit of {ADOPTION_LIMIT}",
            base.bundles.len()
        )));
    }
    let head_cb = CoinbaseLabel::new("0xhead");
    let value: BTreeMap<BundleId, Amount> = base.bundles.iter().map(|b| (b.id, b.valuation_at(&[], &head_cb))).collect();

    let commit = run_mechanism(&base)?.proposer_revenue;
    let commit_predicted = match structure {
        ConflictStructure::NoConflict => Amount::ZERO,
        ConflictStructure::FullConflict => second_highest(value.values().copied()),
    };

    let ids = base.bundles.ids();
    let mut splits = Vec::new();
    for mask in 0u32..(1 << ids.len()) {
        let private: BTreeSet<BundleId> = ids
            .iter()
            .enumerate()
            .filter(|(k, _)| mask & (1 << k) != 0)
            .map(|(_, &id)| id)
            .collect();
        let public: BTreeSet<BundleId> = ids.iter().copied().filter(|id| !private.contains(id)).collect();
        let mut boost = base.clone();
        boost.bundles = base.bundles.restricted_to(&public);
        let boost_revenue = run_mechanism(&boost)?.proposer_revenue;

        let (private_revenue, predicted) = match structure {
            // a private searcher with no competitor bids nothing
            ConflictStructure::NoConflict => (Amount::ZERO, Amount::ZERO),
            ConflictStructure::FullConflict => {
                let top = private.iter().map(|id| value[id]).max();
                let v2_private = second_highest(private.iter().map(|id| value[id]));
                let v2_public = second_highest(public.iter().map(|id| value[id]));
                // first-price auction among the private bundles with reserve
                // set by the mechanism's payout
                let private_revenue = match top {
                    Some(top) if top >= boost_revenue => v2_private.max(boost_revenue),
                    _ => Amount::ZERO,
                };
                (private_revenue, v2_private.max(v2_public))
            }
        };
        splits.push(PrivateSplit {
            private: private.into_iter().collect(),
            boost_revenue,
            private_revenue,
            proposer_utility: boost_revenue.max(private_revenue),
            predicted,
        });
    }
    let best = splits.iter().map(|s| s.proposer_utility).max().unwrap_or(Amount::ZERO);
    Ok(AdoptionReport {
        structure,
        commit_utility: commit,
        commit_predicted,
        best_build_and_choose: best,
        commit_weakly_optimal: commit >= best,
        predictions_hold: commit == commit_predicted && splits.iter().all(|s| s.proposer_utility == s.predicted),
        splits,
    })
}
