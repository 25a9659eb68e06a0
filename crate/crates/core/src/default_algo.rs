//! The mechanism's default block builder.
//!
//! Bundles are split into conflict groups and each group is solved on its
//! own: small groups by exhaustive search over ordered subsets, large ones
//! through a structural shortcut or, failing that, exhaustive search over a
//! seeded subset of `k_cutoff - 1` members. The candidate set of every group
//! depends only on membership, declared transactions, `k_cutoff` and the
//! seed, never on bids, and the argmax over it is exact. Counterfactual
//! blocks (one bundle's bid treated as zero) fall out of the same pass.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::amount::Amount;
use crate::conflict::{get_conflict_groups, ConflictGroup};
use crate::model::{Block, Bundle, BundleId, BundleSet, CoinbaseLabel, TxHash};
use crate::seeding::{hash64, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Enumerated,
    SharedPivot,
    SameTarget,
    TruncatedEnumeration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    SharedPivot,
    SameTarget,
    Infeasible,
}

/// Classify a large group by its declared transaction structure.
pub fn is_feasible(group: &ConflictGroup, bundles: &BundleSet) -> Feasibility {
    let members: Vec<&Bundle> = group
        .members
        .iter()
        .filter_map(|&id| bundles.get(id))
        .collect();
    let Some((first, rest)) = members.split_first() else {
        return Feasibility::Infeasible;
    };

    let mut shared: BTreeSet<TxHash> = first.txs.iter().map(|t| t.hash).collect();
    for b in rest {
        let own: BTreeSet<TxHash> = b.txs.iter().map(|t| t.hash).collect();
        shared.retain(|h| own.contains(h));
        if shared.is_empty() {
            break;
        }
    }
    if !shared.is_empty() {
        return Feasibility::SharedPivot;
    }

    let target = &first.txs[0].target;
    if members
        .iter()
        .all(|b| b.txs.iter().all(|t| &t.target == target))
    {
        return Feasibility::SameTarget;
    }
    Feasibility::Infeasible
}

fn rank_key(seed: u64, bundle: &Bundle) -> u64 {
    hash64(&[b"select", &seed.to_le_bytes(), &bundle.first_tx_hash().0])
}

/// Keep the first `k` members when ordered by a seeded hash of their first
/// transaction (ties by id). Returns the whole group when `k >= len`.
pub fn select_subset(
    group: &ConflictGroup,
    bundles: &BundleSet,
    k: usize,
    seed: u64,
) -> ConflictGroup {
    if k >= group.len() {
        return group.clone();
    }
    let mut ranked: Vec<(u64, BundleId)> = group
        .members
        .iter()
        .map(|&id| {
            let key = bundles.get(id).map(|b| rank_key(seed, b)).unwrap_or(u64::MAX);
            (key, id)
        })
        .collect();
    ranked.sort();
    ConflictGroup::new(ranked.into_iter().take(k).map(|(_, id)| id).collect())
}

fn same_target_order(group: &ConflictGroup, bundles: &BundleSet, seed: u64) -> Vec<BundleId> {
    let mut material = Vec::new();
    for &id in &group.members {
        material.extend_from_slice(&id.0.to_le_bytes());
        if let Some(b) = bundles.get(id) {
            material.extend_from_slice(&b.first_tx_hash().0);
        }
    }
    let mut order = group.members.clone();
    order.shuffle(&mut rng(hash64(&[b"same-target", &seed.to_le_bytes(), &material])));
    order
}

/// The blocks a group resolution chooses from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CandidateSpace {
    /// Every permutation of every subset of the members (ids ascending).
    OrderedSubsets(Vec<BundleId>),
    /// One single-bundle block per member.
    Singletons(Vec<BundleId>),
    /// Exactly one block.
    Fixed(Block),
}

impl CandidateSpace {
    pub fn len(&self) -> u64 {
        match self {
            CandidateSpace::OrderedSubsets(m) => ordered_subset_count(m.len()),
            CandidateSpace::Singletons(m) => m.len() as u64,
            CandidateSpace::Fixed(_) => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn members(&self) -> &[BundleId] {
        match self {
            CandidateSpace::OrderedSubsets(m) | CandidateSpace::Singletons(m) => m,
            CandidateSpace::Fixed(b) => b.ids(),
        }
    }

    /// All candidate blocks in canonical order.
    pub fn blocks(&self) -> Vec<Block> {
        let mut out = Vec::new();
        let n = self.members().len();
        let ids = self.members();
        match self {
            CandidateSpace::OrderedSubsets(_) => {
                for_each_ordered_subset(n, |path| {
                    out.push(Block(path.iter().map(|&x| ids[x]).collect()))
                });
            }
            CandidateSpace::Singletons(m) => out.extend(m.iter().map(|&id| Block(vec![id]))),
            CandidateSpace::Fixed(b) => out.push(b.clone()),
        }
        out
    }
}

/// Σ_k n!/(n-k)!
pub fn ordered_subset_count(n: usize) -> u64 {
    let mut total = 0u64;
    let mut term = 1u64;
    for k in 0..=n as u64 {
        total += term;
        term *= n as u64 - k;
    }
    total
}

/// Visit index paths of every ordered subset of `0..n`: by length, then
/// lexicographically.
fn for_each_ordered_subset(n: usize, mut visit: impl FnMut(&[usize])) {
    fn walk(n: usize, len: usize, path: &mut Vec<usize>, used: &mut [bool], visit: &mut dyn FnMut(&[usize])) {
        if path.len() == len {
            visit(path);
            return;
        }
        for x in 0..n {
            if !used[x] {
                used[x] = true;
                path.push(x);
                walk(n, len, path, used, visit);
                path.pop();
                used[x] = false;
            }
        }
    }
    let mut path = Vec::with_capacity(n);
    let mut used = vec![false; n];
    for len in 0..=n {
        walk(n, len, &mut path, &mut used, &mut visit);
    }
}

/// Strategy and candidate set for one group.
pub fn candidate_set(
    group: &ConflictGroup,
    bundles: &BundleSet,
    k_cutoff: usize,
    seed: u64,
) -> (Strategy, CandidateSpace) {
    if group.len() < k_cutoff {
        return (
            Strategy::Enumerated,
            CandidateSpace::OrderedSubsets(group.members.clone()),
        );
    }
    match is_feasible(group, bundles) {
        Feasibility::SharedPivot => (
            Strategy::SharedPivot,
            CandidateSpace::Singletons(group.members.clone()),
        ),
        Feasibility::SameTarget => (
            Strategy::SameTarget,
            CandidateSpace::Fixed(Block(same_target_order(group, bundles, seed))),
        ),
        Feasibility::Infeasible => {
            let kept = select_subset(group, bundles, k_cutoff.saturating_sub(1), seed);
            (
                Strategy::TruncatedEnumeration,
                CandidateSpace::OrderedSubsets(kept.members),
            )
        }
    }
}

/// A block and the bid total it was chosen for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Scored {
    pub block: Block,
    pub value: Amount,
}

/// Exact search over one candidate space.
struct GroupSearch<'a> {
    ids: &'a [BundleId],
    bundles: Vec<&'a Bundle>,
    // affects[a][b]: running `a` before `b` is visible to `b`.
    affects: Vec<Vec<bool>>,
    coinbase: &'a CoinbaseLabel,
}

#[derive(Debug, Clone)]
struct SearchOutcome {
    best: Scored,
    /// Per space member: best block for the others' bids.
    counterfactual: Vec<Scored>,
    candidates: u64,
}

impl<'a> GroupSearch<'a> {
    fn new(ids: &'a [BundleId], set: &'a BundleSet, coinbase: &'a CoinbaseLabel) -> Self {
        let bundles: Vec<&Bundle> = ids
            .iter()
            .map(|&id| set.get(id).expect("group member belongs to the bundle set"))
            .collect();
        let affects = bundles
            .iter()
            .map(|a| bundles.iter().map(|b| a.affects(b, coinbase)).collect())
            .collect();
        GroupSearch {
            ids,
            bundles,
            affects,
            coinbase,
        }
    }

    fn bid(&self, x: usize, prefix: &[usize], scratch: &mut Vec<BundleId>) -> Amount {
        scratch.clear();
        scratch.extend(
            prefix
                .iter()
                .filter(|&&p| self.affects[p][x])
                .map(|&p| self.ids[p]),
        );
        self.bundles[x].bid_at(scratch, self.coinbase)
    }

    fn run(
        &self,
        space: &CandidateSpace,
        counterfactuals: bool,
        mut observer: Option<&mut dyn FnMut(&Block)>,
    ) -> SearchOutcome {
        let n = self.ids.len();
        let mut tracker = Tracker::new(n, counterfactuals);
        let mut scratch = Vec::new();
        let mut bids: Vec<Amount> = Vec::with_capacity(n);

        let mut leaf = |path: &[usize], bids: &[Amount], tracker: &mut Tracker| {
            if let Some(obs) = observer.as_deref_mut() {
                obs(&Block(path.iter().map(|&x| self.ids[x]).collect()));
            }
            tracker.offer(path, bids, self.ids);
        };

        match space {
            CandidateSpace::OrderedSubsets(_) => {
                let mut path = Vec::with_capacity(n);
                let mut used = vec![false; n];
                for len in 0..=n {
                    self.walk(len, &mut path, &mut bids, &mut used, &mut scratch, &mut |p, b| {
                        leaf(p, b, &mut tracker)
                    });
                }
            }
            CandidateSpace::Singletons(_) => {
                for x in 0..n {
                    let b = self.bid(x, &[], &mut scratch);
                    leaf(&[x], &[b], &mut tracker);
                }
            }
            CandidateSpace::Fixed(_) => {
                let path: Vec<usize> = (0..n).collect();
                for x in 0..n {
                    let b = self.bid(x, &path[..x], &mut scratch);
                    bids.push(b);
                }
                leaf(&path, &bids, &mut tracker);
            }
        }
        tracker.finish()
    }

    fn walk(
        &self,
        len: usize,
        path: &mut Vec<usize>,
        bids: &mut Vec<Amount>,
        used: &mut [bool],
        scratch: &mut Vec<BundleId>,
        leaf: &mut dyn FnMut(&[usize], &[Amount]),
    ) {
        if path.len() == len {
            leaf(path, bids);
            return;
        }
        for x in 0..used.len() {
            if used[x] {
                continue;
            }
            // a bundle's bid depends only on what precedes it
            let b = self.bid(x, path, scratch);
            used[x] = true;
            path.push(x);
            bids.push(b);
            self.walk(len, path, bids, used, scratch, leaf);
            bids.pop();
            path.pop();
            used[x] = false;
        }
    }
}

struct Tracker {
    best: Option<Scored>,
    counterfactual: Option<Vec<Option<Scored>>>,
    bid_of: Vec<Amount>,
    candidates: u64,
}

impl Tracker {
    fn new(n: usize, counterfactuals: bool) -> Self {
        Tracker {
            best: None,
            counterfactual: counterfactuals.then(|| vec![None; n]),
            bid_of: vec![Amount::ZERO; n],
            candidates: 0,
        }
    }

    fn offer(&mut self, path: &[usize], bids: &[Amount], ids: &[BundleId]) {
        self.candidates += 1;
        let total: Amount = bids.iter().sum();
        let block = || Block(path.iter().map(|&x| ids[x]).collect());
        // strict improvement only: the first maximizer wins ties
        if self.best.as_ref().is_none_or(|b| total > b.value) {
            self.best = Some(Scored {
                block: block(),
                value: total,
            });
        }
        if let Some(cf) = self.counterfactual.as_mut() {
            for (&x, &b) in path.iter().zip(bids) {
                self.bid_of[x] = b;
            }
            for (m, slot) in cf.iter_mut().enumerate() {
                let others = total - self.bid_of[m];
                if slot.as_ref().is_none_or(|s| others > s.value) {
                    *slot = Some(Scored {
                        block: block(),
                        value: others,
                    });
                }
            }
            for &x in path {
                self.bid_of[x] = Amount::ZERO;
            }
        }
    }

    fn finish(self) -> SearchOutcome {
        let best = self.best.unwrap_or(Scored {
            block: Block::empty(),
            value: Amount::ZERO,
        });
        let counterfactual = self
            .counterfactual
            .map(|cf| {
                cf.into_iter()
                    .map(|s| s.unwrap_or_else(|| best.clone()))
                    .collect()
            })
            .unwrap_or_default();
        SearchOutcome {
            best,
            counterfactual,
            candidates: self.candidates,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupResolution {
    pub group: ConflictGroup,
    pub strategy: Strategy,
    pub sub_block: Block,
    pub value: Amount,
    pub candidates: u64,
}

/// Counterfactual optimum for one bundle: the chosen block and the others'
/// total bid in it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterfactual {
    pub block: Block,
    pub others_value: Amount,
}

struct ResolvedGroup {
    resolution: GroupResolution,
    counterfactuals: Vec<(BundleId, Scored)>,
}

fn resolve(
    group: &ConflictGroup,
    bundles: &BundleSet,
    k_cutoff: usize,
    seed: u64,
    coinbase: &CoinbaseLabel,
    counterfactuals: bool,
    observer: Option<&mut dyn FnMut(&Block)>,
) -> ResolvedGroup {
    let (strategy, space) = candidate_set(group, bundles, k_cutoff, seed);
    let search = GroupSearch::new(space.members(), bundles, coinbase);
    let outcome = search.run(&space, counterfactuals, observer);

    let mut cf = Vec::new();
    if counterfactuals {
        for &id in &group.members {
            // members outside the candidate space bid zero everywhere
            let scored = match space.members().iter().position(|&m| m == id) {
                Some(pos) => outcome.counterfactual[pos].clone(),
                None => outcome.best.clone(),
            };
            cf.push((id, scored));
        }
    }
    ResolvedGroup {
        resolution: GroupResolution {
            group: group.clone(),
            strategy,
            sub_block: outcome.best.block,
            value: outcome.best.value,
            candidates: outcome.candidates,
        },
        counterfactuals: cf,
    }
}

/// Best sub-block of one group (first maximizer in canonical order).
pub fn resolve_group(
    group: &ConflictGroup,
    bundles: &BundleSet,
    k_cutoff: usize,
    seed: u64,
    coinbase: &CoinbaseLabel,
) -> GroupResolution {
    resolve(group, bundles, k_cutoff, seed, coinbase, false, None).resolution
}

/// [`resolve_group`] reporting every candidate it evaluates, in order.
pub fn resolve_group_traced(
    group: &ConflictGroup,
    bundles: &BundleSet,
    k_cutoff: usize,
    seed: u64,
    coinbase: &CoinbaseLabel,
    observer: &mut dyn FnMut(&Block),
) -> GroupResolution {
    resolve(group, bundles, k_cutoff, seed, coinbase, false, Some(observer)).resolution
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DefaultAlgorithm {
    pub k_cutoff: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DefaultRun {
    pub block: Block,
    pub value: Amount,
    pub coinbase: CoinbaseLabel,
    pub resolutions: Vec<GroupResolution>,
    /// Empty unless counterfactuals were requested.
    pub counterfactuals: BTreeMap<BundleId, Counterfactual>,
}

impl Default for DefaultAlgorithm {
    fn default() -> Self {
        DefaultAlgorithm {
            k_cutoff: crate::DEFAULT_K_CUTOFF,
            seed: 0,
        }
    }
}

impl DefaultAlgorithm {
    pub fn new(k_cutoff: usize, seed: u64) -> Self {
        DefaultAlgorithm { k_cutoff, seed }
    }

    /// Fresh coinbase label for one run, distinct from every label in `taken`.
    pub fn one_time_coinbase(&self, taken: &[CoinbaseLabel]) -> CoinbaseLabel {
        (0u64..)
            .map(|salt| {
                let h = hash64(&[b"coinbase", &self.seed.to_le_bytes(), &salt.to_le_bytes()]);
                CoinbaseLabel(format!("0x{h:016x}"))
            })
            .find(|label| !taken.contains(label))
            .expect("unbounded label supply")
    }

    pub fn build(&self, bundles: &BundleSet, coinbase: &CoinbaseLabel) -> DefaultRun {
        self.run(bundles, coinbase, false)
    }

    /// Build `o*` and, for every bundle, the counterfactual optimum with
    /// that bundle's bid treated as zero.
    pub fn build_with_counterfactuals(
        &self,
        bundles: &BundleSet,
        coinbase: &CoinbaseLabel,
    ) -> DefaultRun {
        self.run(bundles, coinbase, true)
    }

    fn run(&self, bundles: &BundleSet, coinbase: &CoinbaseLabel, counterfactuals: bool) -> DefaultRun {
        let groups = get_conflict_groups(bundles);
        // order-preserving collect keeps the result independent of scheduling
        let resolved: Vec<ResolvedGroup> = groups
            .par_iter()
            .map(|g| {
                resolve(
                    g,
                    bundles,
                    self.k_cutoff,
                    self.seed,
                    coinbase,
                    counterfactuals,
                    None,
                )
            })
            .collect();

        let value: Amount = resolved.iter().map(|r| r.resolution.value).sum();
        let block = Block(
            resolved
                .iter()
                .flat_map(|r| r.resolution.sub_block.ids().iter().copied())
                .collect(),
        );

        let mut cf = BTreeMap::new();
        for (gi, r) in resolved.iter().enumerate() {
            for (id, scored) in &r.counterfactuals {
                let mut ids = Vec::with_capacity(block.len());
                for (gj, other) in resolved.iter().enumerate() {
                    if gi == gj {
                        ids.extend_from_slice(scored.block.ids());
                    } else {
                        ids.extend_from_slice(other.resolution.sub_block.ids());
                    }
                }
                cf.insert(
                    *id,
                    Counterfactual {
                        block: Block(ids),
                        others_value: value - r.resolution.value + scored.value,
                    },
                );
            }
        }

        DefaultRun {
            block,
            value,
            coinbase: coinbase.clone(),
            resolutions: resolved.into_iter().map(|r| r.resolution).collect(),
            counterfactuals: cf,
        }
    }

    /// Counterfactual blocks by literally rerunning the builder with each
    /// bundle's bid replaced by zero. Slow; used to cross-check
    /// [`DefaultAlgorithm::build_with_counterfactuals`].
    pub fn counterfactual_blocks_by_rerun(
        &self,
        bundles: &BundleSet,
        coinbase: &CoinbaseLabel,
    ) -> BTreeMap<BundleId, Counterfactual> {
        bundles
            .ids()
            .into_iter()
            .map(|id| {
                let zeroed = bundles.with_zeroed_bid(id).expect("id from the set");
                let run = self.build(&zeroed, coinbase);
                (
                    id,
                    Counterfactual {
                        block: run.block,
                        others_value: run.value,
                    },
                )
            })
            .collect()
    }
}

/// Run the default builder under a fresh one-time coinbase label.
pub fn block_building(bundles: &BundleSet, k_cutoff: usize, seed: u64) -> DefaultRun {
    let algo = DefaultAlgorithm::new(k_cutoff, seed);
    let coinbase = algo.one_time_coinbase(&[]);
    algo.build(bundles, &coinbase)
}

/// Counterfactual block for every bundle, under the same label as `o*`.
pub fn counterfactual_blocks(
    bundles: &BundleSet,
    k_cutoff: usize,
    seed: u64,
    coinbase: &CoinbaseLabel,
) -> BTreeMap<BundleId, Counterfactual> {
    DefaultAlgorithm::new(k_cutoff, seed)
        .build_with_counterfactuals(bundles, coinbase)
        .counterfactuals
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{block_total_bid, BidFunction, StorageKey, TxRef};
    use proptest::prelude::*;
    use super::Strategy;
    use proptest::strategy::Strategy as _;

    fn cb() -> CoinbaseLabel {
        CoinbaseLabel::new("0xdefault")
    }

    fn tx(hash: u64, target: &str) -> TxRef {
        TxRef {
            hash: TxHash::from_low_u64(hash),
            target: target.into(),
        }
    }

    fn hot() -> StorageKey {
        StorageKey::new("0xpool", "0")
    }

    fn group_of(set: &BundleSet) -> ConflictGroup {
        ConflictGroup::new(set.ids())
    }

    #[test]
    fn ordered_subset_counts() {
        assert_eq!(ordered_subset_count(0), 1);
        assert_eq!(ordered_subset_count(2), 5);
        assert_eq!(ordered_subset_count(3), 16);
        assert_eq!(ordered_subset_count(7), 13_700);
    }

    #[test]
    fn canonical_candidates_for_two() {
        let space = CandidateSpace::OrderedSubsets(vec![BundleId(1), BundleId(2)]);
        let blocks = space.blocks();
        assert_eq!(
            blocks,
            vec![Block::of(&[]), Block::of(&[1]), Block::of(&[2]), Block::of(&[1, 2]), Block::of(&[2, 1])]
        );
        let three = CandidateSpace::OrderedSubsets(vec![BundleId(1), BundleId(2), BundleId(3)]);
        let blocks = three.blocks();
        assert_eq!(blocks.len(), 16);
        let unique: BTreeSet<_> = blocks.iter().collect();
        assert_eq!(unique.len(), 16);
    }

    fn pivot_group(n: u32) -> BundleSet {
        // sandwiches around one victim transaction
        BundleSet::new(
            (0..n)
                .map(|i| {
                    Bundle::new(
                        i,
                        vec![tx(100 + i as u64, "0xpool"), tx(7, "0xpool"), tx(200 + i as u64, "0xpool")],
                        BidFunction::constant(i as i64 + 1),
                    )
                    .with_writes([hot()])
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn shared_pivot_picks_best_single() {
        let set = pivot_group(9);
        let g = group_of(&set);
        assert_eq!(is_feasible(&g, &set), Feasibility::SharedPivot);
        let (strategy, space) = candidate_set(&g, &set, 8, 0);
        assert_eq!(strategy, Strategy::SharedPivot);
        assert_eq!(space.len(), 9);
        let r = resolve_group(&g, &set, 8, 0, &cb());
        assert_eq!(r.sub_block, Block::of(&[8]));
        assert_eq!(r.value, Amount::from_units(9));
        // linear-scan oracle
        let oracle = set
            .iter()
            .map(|b| (b.bid_at(&[], &cb()), b.id))
            .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
            .unwrap();
        assert_eq!(r.sub_block, Block(vec![oracle.1]));

        let set4 = pivot_group(4);
        let (_, space) = candidate_set(&group_of(&set4), &set4, 4, 0);
        assert_eq!(space.len(), 4);
    }

    #[test]
    fn same_target_and_infeasible_classification() {
        let same = BundleSet::new(
            (0..12)
                .map(|i| Bundle::new(i, vec![tx(i as u64, "0xtoken")], BidFunction::constant(1)).with_writes([hot()]))
                .collect(),
        )
        .unwrap();
        let g = group_of(&same);
        assert_eq!(is_feasible(&g, &same), Feasibility::SameTarget);
        let (strategy, space) = candidate_set(&g, &same, 8, 5);
        assert_eq!(strategy, Strategy::SameTarget);
        assert_eq!(space.len(), 1);
        let r = resolve_group(&g, &same, 8, 5, &cb());
        assert_eq!(r.sub_block.len(), 12);
        assert_eq!(r, resolve_group(&g, &same, 8, 5, &cb()));

        let mixed = fixtures::truncation_witness().bundles;
        assert_eq!(is_feasible(&group_of(&mixed), &mixed), Feasibility::Infeasible);
    }

    #[test]
    fn select_subset_is_deterministic() {
        let set = BundleSet::new(
            (0..12)
                .map(|i| Bundle::new(i, vec![tx(1000 + i as u64, &format!("c{i}"))], BidFunction::zero()))
                .collect(),
        )
        .unwrap();
        let g = group_of(&set);
        let a = select_subset(&g, &set, 7, 42);
        assert_eq!(a.len(), 7);
        assert_eq!(a, select_subset(&g, &set, 7, 42));
        assert_eq!(select_subset(&g, &set, 12, 42), g);
        assert_eq!(select_subset(&g, &set, 20, 42), g);
        let seeds: BTreeSet<_> = (0..8).map(|s| select_subset(&g, &set, 7, s)).collect();
        assert!(seeds.len() > 1, "different seeds should usually pick different subsets");
    }

    #[test]
    fn two_bundle_resolution_and_counterfactuals() {
        let set = fixtures::two_bundle().bundles;
        let algo = DefaultAlgorithm::new(8, 1);
        let run = algo.build_with_counterfactuals(&set, &cb());
        assert_eq!(run.block, Block::of(&[2, 1]));
        assert_eq!(run.value, Amount::from_units(150));
        assert_eq!(run.resolutions[0].strategy, Strategy::Enumerated);
        assert_eq!(run.resolutions[0].candidates, 5);
        let cf1 = &run.counterfactuals[&BundleId(1)];
        assert_eq!(cf1.block, Block::of(&[1, 2]));
        assert_eq!(cf1.others_value, Amount::from_units(80));
        let cf2 = &run.counterfactuals[&BundleId(2)];
        assert_eq!(cf2.block, Block::of(&[2, 1]));
        assert_eq!(cf2.others_value, Amount::from_units(100));
        assert_eq!(run.counterfactuals, algo.counterfactual_blocks_by_rerun(&set, &cb()));
    }

    #[test]
    fn zero_bids_give_empty_block() {
        let set = BundleSet::new(
            (0..3)
                .map(|i| Bundle::new(i, vec![tx(i as u64, "c")], BidFunction::zero()).with_writes([hot()]))
                .collect(),
        )
        .unwrap();
        let r = resolve_group(&group_of(&set), &set, 8, 0, &cb());
        assert_eq!(r.sub_block, Block::empty());
        assert_eq!(r.value, Amount::ZERO);
    }

    #[test]
    fn independent_constant_bids_take_first_full_permutation() {
        let set = BundleSet::new(
            [5, 7, 9]
                .iter()
                .enumerate()
                .map(|(i, &v)| Bundle::new(i as u32 + 1, vec![tx(i as u64, "c")], BidFunction::constant(v)).with_reads([hot()]))
                .chain([Bundle::new(9, vec![tx(99, "c")], BidFunction::zero()).with_writes([StorageKey::new("0xother", "0")])])
                .collect(),
        )
        .unwrap();
        // readers only: three singleton groups plus one more
        let run = DefaultAlgorithm::new(8, 0).build(&set, &cb());
        assert_eq!(run.value, Amount::from_units(21));

        // same bids inside one group (shared reads plus a writer that bids 0)
        let grouped = BundleSet::new(
            [5, 7, 9]
                .iter()
                .enumerate()
                .map(|(i, &v)| Bundle::new(i as u32 + 1, vec![tx(i as u64, "c")], BidFunction::constant(v)).with_writes([hot()]))
                .collect(),
        )
        .unwrap();
        let r = resolve_group(&group_of(&grouped), &grouped, 8, 0, &cb());
        assert_eq!(r.value, Amount::from_units(21));
        assert_eq!(r.sub_block, Block::of(&[1, 2, 3]));
        assert_eq!(r.candidates, 16);
    }

    #[test]
    fn non_conflicting_bundles_are_all_included() {
        let set = BundleSet::new(vec![
            Bundle::new(1, vec![tx(1, "a")], BidFunction::constant(3)).with_writes([StorageKey::new("a", "0")]),
            Bundle::new(2, vec![tx(2, "b")], BidFunction::constant(4)).with_writes([StorageKey::new("b", "0")]),
        ])
        .unwrap();
        let run = block_building(&set, 8, 0);
        assert_eq!(run.block, Block::of(&[1, 2]));
        assert_eq!(run.value, Amount::from_units(7));
    }

    #[test]
    fn sole_bundle_counterfactual_is_zero() {
        let set = BundleSet::new(vec![Bundle::new(1, vec![tx(1, "a")], BidFunction::constant(3))]).unwrap();
        let cf = counterfactual_blocks(&set, 8, 0, &cb());
        assert_eq!(cf[&BundleId(1)].others_value, Amount::ZERO);
    }

    #[test]
    fn truncation_keeps_k_minus_one() {
        let s = fixtures::truncation_witness();
        let run = DefaultAlgorithm::new(8, s.seed).build(&s.bundles, &cb());
        assert_eq!(run.resolutions[0].strategy, Strategy::TruncatedEnumeration);
        assert_eq!(run.block.len(), 7);
        assert_eq!(run.value, Amount::from_units(70));
        assert_eq!(run.resolutions[0].candidates, 13_700);
    }

    #[test]
    fn coinbase_is_fresh() {
        let algo = DefaultAlgorithm::new(8, 3);
        let first = algo.one_time_coinbase(&[]);
        let second = algo.one_time_coinbase(std::slice::from_ref(&first));
        assert_ne!(first, second);
        assert_eq!(first, algo.one_time_coinbase(&[]));
    }

    fn arb_group() -> impl proptest::strategy::Strategy<Value = BundleSet> {
        // up to 5 bundles on one hot key, each with a small context table
        (1usize..=5)
            .prop_flat_map(|n| {
                prop::collection::vec((0i64..20, 0i64..20, prop::collection::vec((0u32..5, 0i64..30), 0..3)), n)
            })
            .prop_map(|rows| {
                let n = rows.len() as u32;
                BundleSet::new(
                    rows.into_iter()
                        .enumerate()
                        .map(|(i, (head, dflt, entries))| {
                            let i = i as u32;
                            let mut table: Vec<(crate::model::ContextSignature, Amount)> =
                                vec![(crate::model::ContextSignature::empty(), Amount::from_units(head))];
                            for (other, v) in entries {
                                let other = other % n;
                                if other != i {
                                    table.push((crate::model::ContextSignature::of(&[other]), Amount::from_units(v)));
                                }
                            }
                            Bundle::new(i, vec![tx(i as u64, "t")], BidFunction::table(table, dflt)).with_writes([hot()])
                        })
                        .collect(),
                )
                .unwrap()
            })
    }

    proptest! {
        // Property 1(ii): the resolution is the exact first maximizer over its candidates.
        #[test]
        fn resolution_is_exact_argmax(set in arb_group(), seed in 0u64..4) {
            let g = group_of(&set);
            let r = resolve_group(&g, &set, 8, seed, &cb());
            let (_, space) = candidate_set(&g, &set, 8, seed);
            let mut best: Option<(Amount, Block)> = None;
            for block in space.blocks() {
                let v = block_total_bid(&block, &set, &cb()).unwrap();
                if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                    best = Some((v, block));
                }
            }
            let (v, block) = best.unwrap();
            prop_assert_eq!(r.value, v);
            prop_assert_eq!(r.sub_block, block);
        }

        #[test]
        fn single_pass_counterfactuals_match_rerun(set in arb_group()) {
            let algo = DefaultAlgorithm::new(8, 0);
            let fast = algo.build_with_counterfactuals(&set, &cb()).counterfactuals;
            prop_assert_eq!(fast, algo.counterfactual_blocks_by_rerun(&set, &cb()));
        }

        // Property 1(i): candidates never depend on bids.
        #[test]
        fn transcript_ignores_bids(a in arb_group(), scale in 0i128..5) {
            let b = BundleSet::new(a.iter().map(|x| { let mut x = x.clone(); x.bid = x.bid.scaled(scale, 2); x }).collect()).unwrap();
            let g = group_of(&a);
            let mut ta = Vec::new();
            let mut tb = Vec::new();
            resolve_group_traced(&g, &a, 3, 0, &cb(), &mut |blk| ta.push(blk.clone()));
            resolve_group_traced(&g, &b, 3, 0, &cb(), &mut |blk| tb.push(blk.clone()));
            prop_assert_eq!(ta, tb);
        }
    }
}
