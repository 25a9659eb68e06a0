//! Bundles, bid functions and the abstract execution semantics.
//!
//! A bundle's execution state is reduced to the ordered list of earlier
//! bundles in the block whose effective writes touch its footprint, plus the
//! coinbase label of the algorithm that built the block. Bids and valuations
//! are functions of that context only.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::amount::Amount;
use crate::builders::BuilderSpec;

/// Slot value reserved for account-balance keys.
pub const BALANCE_SLOT: &str = "balance";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("bundle {0} is not included in the block")]
    NotIncluded(BundleId),
    #[error("unknown bundle id {0}")]
    UnknownBundle(BundleId),
    #[error("bundle {0} appears more than once in the block")]
    DuplicateInBlock(BundleId),
    #[error("bundle id {0} is declared more than once")]
    DuplicateBundleId(BundleId),
    #[error("bundle {0} has no transactions")]
    EmptyTxs(BundleId),
    #[error("bundle {bundle}: {what} contains a negative value")]
    NegativeValue { bundle: BundleId, what: &'static str },
    #[error("k_cutoff must be at least 1")]
    InvalidKCutoff,
    #[error("invalid context signature `{0}`")]
    InvalidSignature(String),
    #[error("invalid transaction hash `{0}`")]
    InvalidTxHash(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BundleId(pub u32);

impl fmt::Display for BundleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StorageKey {
    pub address: String,
    pub slot: String,
}

impl StorageKey {
    pub fn new(address: impl Into<String>, slot: impl Into<String>) -> Self {
        StorageKey {
            address: address.into(),
            slot: slot.into(),
        }
    }

    pub fn balance(address: impl Into<String>) -> Self {
        StorageKey::new(address, BALANCE_SLOT)
    }

    pub fn is_balance(&self) -> bool {
        self.slot == BALANCE_SLOT
    }
}

/// 32-byte transaction hash, written as `0x`-prefixed hex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TxHash(pub [u8; 32]);

impl TxHash {
    /// Hash whose last eight bytes hold `n`; handy for hand-written fixtures.
    pub fn from_low_u64(n: u64) -> Self {
        let mut bytes = [0u8; 32];
        bytes[24..].copy_from_slice(&n.to_be_bytes());
        TxHash(bytes)
    }
}

impl fmt::Display for TxHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for TxHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for TxHash {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.strip_prefix("0x").unwrap_or(s);
        let mut bytes = [0u8; 32];
        hex::decode_to_slice(digits, &mut bytes)
            .map_err(|_| ModelError::InvalidTxHash(s.to_string()))?;
        Ok(TxHash(bytes))
    }
}

impl TryFrom<String> for TxHash {
    type Error = ModelError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<TxHash> for String {
    fn from(h: TxHash) -> String {
        h.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxRef {
    pub hash: TxHash,
    pub target: String,
}

/// Fee-recipient label visible to executing bundles.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoinbaseLabel(pub String);

impl CoinbaseLabel {
    pub fn new(value: impl Into<String>) -> Self {
        CoinbaseLabel(value.into())
    }
}

impl fmt::Display for CoinbaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Predecessor sequence used as a [`BidFunction::ContextTable`] key.
///
/// Canonical text form: ids in occurrence order joined by `,`; the empty
/// context is the empty string.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ContextSignature(pub Vec<BundleId>);

impl ContextSignature {
    pub fn empty() -> Self {
        ContextSignature(Vec::new())
    }

    pub fn of(ids: &[u32]) -> Self {
        ContextSignature(ids.iter().copied().map(BundleId).collect())
    }
}

impl Borrow<[BundleId]> for ContextSignature {
    fn borrow(&self) -> &[BundleId] {
        &self.0
    }
}

impl fmt::Display for ContextSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (pos, id) in self.0.iter().enumerate() {
            if pos > 0 {
                f.write_str(",")?;
            }
            write!(f, "{id}")?;
        }
        Ok(())
    }
}

impl FromStr for ContextSignature {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Ok(ContextSignature::empty());
        }
        s.split(',')
            .map(|part| {
                part.parse::<u32>()
                    .map(BundleId)
                    .map_err(|_| ModelError::InvalidSignature(s.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(ContextSignature)
    }
}

impl TryFrom<String> for ContextSignature {
    type Error = ModelError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ContextSignature> for String {
    fn from(sig: ContextSignature) -> String {
        sig.to_string()
    }
}

/// What a bundle sees when it executes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionContext {
    pub predecessors: Vec<BundleId>,
    pub coinbase: CoinbaseLabel,
}

/// State-dependent payment (or valuation) rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", deny_unknown_fields)]
pub enum BidFunction {
    Constant {
        value: Amount,
    },
    ContextTable {
        entries: BTreeMap<ContextSignature, Amount>,
        default: Amount,
    },
    CoinbaseGated {
        target: CoinbaseLabel,
        inner: Box<BidFunction>,
    },
}

impl BidFunction {
    pub fn constant(value: impl Into<Amount>) -> Self {
        BidFunction::Constant {
            value: value.into(),
        }
    }

    pub fn zero() -> Self {
        BidFunction::constant(Amount::ZERO)
    }

    pub fn table<I>(entries: I, default: impl Into<Amount>) -> Self
    where
        I: IntoIterator<Item = (ContextSignature, Amount)>,
    {
        BidFunction::ContextTable {
            entries: entries.into_iter().collect(),
            default: default.into(),
        }
    }

    /// Pays `value` only at an empty context, 0 behind any conflicting bundle.
    pub fn exclusive(value: impl Into<Amount>) -> Self {
        BidFunction::table([(ContextSignature::empty(), value.into())], Amount::ZERO)
    }

    pub fn gated(target: CoinbaseLabel, inner: BidFunction) -> Self {
        BidFunction::CoinbaseGated {
            target,
            inner: Box::new(inner),
        }
    }

    pub fn evaluate(&self, predecessors: &[BundleId], coinbase: &CoinbaseLabel) -> Amount {
        match self {
            BidFunction::Constant { value } => *value,
            BidFunction::ContextTable { entries, default } => {
                entries.get(predecessors).copied().unwrap_or(*default)
            }
            BidFunction::CoinbaseGated { target, inner } => {
                if target == coinbase {
                    inner.evaluate(predecessors, coinbase)
                } else {
                    Amount::ZERO
                }
            }
        }
    }

    /// Every value the function can return.
    pub fn values(&self) -> Vec<Amount> {
        match self {
            BidFunction::Constant { value } => vec![*value],
            BidFunction::ContextTable { entries, default } => {
                entries.values().copied().chain([*default]).collect()
            }
            BidFunction::CoinbaseGated { inner, .. } => {
                let mut v = inner.values();
                v.push(Amount::ZERO);
                v
            }
        }
    }

    /// Multiply every value by `num / den` (floored).
    pub fn scaled(&self, num: i128, den: i128) -> BidFunction {
        match self {
            BidFunction::Constant { value } => BidFunction::Constant {
                value: value.mul_ratio(num, den),
            },
            BidFunction::ContextTable { entries, default } => BidFunction::ContextTable {
                entries: entries
                    .iter()
                    .map(|(k, v)| (k.clone(), v.mul_ratio(num, den)))
                    .collect(),
                default: default.mul_ratio(num, den),
            },
            BidFunction::CoinbaseGated { target, inner } => BidFunction::CoinbaseGated {
                target: target.clone(),
                inner: Box::new(inner.scaled(num, den)),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bundle {
    pub id: BundleId,
    pub txs: Vec<TxRef>,
    #[serde(default)]
    pub reads: BTreeSet<StorageKey>,
    #[serde(default)]
    pub writes: BTreeSet<StorageKey>,
    #[serde(default)]
    pub weight: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<CoinbaseLabel>,
    pub bid: BidFunction,
    pub valuation: BidFunction,
}

impl Bundle {
    /// Truthful bundle: valuation equals bid.
    pub fn new(id: u32, txs: Vec<TxRef>, bid: BidFunction) -> Self {
        Bundle {
            id: BundleId(id),
            txs,
            reads: BTreeSet::new(),
            writes: BTreeSet::new(),
            weight: 1,
            gate: None,
            valuation: bid.clone(),
            bid,
        }
    }

    pub fn with_writes<I: IntoIterator<Item = StorageKey>>(mut self, keys: I) -> Self {
        self.writes.extend(keys);
        self
    }

    pub fn with_reads<I: IntoIterator<Item = StorageKey>>(mut self, keys: I) -> Self {
        self.reads.extend(keys);
        self
    }

    pub fn with_weight(mut self, weight: u64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_gate(mut self, gate: CoinbaseLabel) -> Self {
        self.gate = Some(gate);
        self
    }

    pub fn first_tx_hash(&self) -> TxHash {
        self.txs[0].hash
    }

    /// Whether the bundle executes under `coinbase` (ungated bundles always do).
    pub fn executes_under(&self, coinbase: &CoinbaseLabel) -> bool {
        self.gate.as_ref().is_none_or(|g| g == coinbase)
    }

    /// Declared-footprint conflict: one side writes a key the other touches.
    pub fn conflicts_with(&self, other: &Bundle) -> bool {
        touches_any(&self.writes, other) || touches_any(&other.writes, self)
    }

    /// Whether executing `self` first can change what `later` sees.
    pub fn affects(&self, later: &Bundle, coinbase: &CoinbaseLabel) -> bool {
        self.executes_under(coinbase) && touches_any(&self.writes, later)
    }

    pub fn bid_in(&self, ctx: &ExecutionContext) -> Amount {
        self.bid_at(&ctx.predecessors, &ctx.coinbase)
    }

    pub fn bid_at(&self, predecessors: &[BundleId], coinbase: &CoinbaseLabel) -> Amount {
        if self.executes_under(coinbase) {
            self.bid.evaluate(predecessors, coinbase)
        } else {
            Amount::ZERO
        }
    }

    pub fn valuation_at(&self, predecessors: &[BundleId], coinbase: &CoinbaseLabel) -> Amount {
        if self.executes_under(coinbase) {
            self.valuation.evaluate(predecessors, coinbase)
        } else {
            Amount::ZERO
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.txs.is_empty() {
            return Err(ModelError::EmptyTxs(self.id));
        }
        if self.bid.values().iter().any(|v| v.is_negative()) {
            return Err(ModelError::NegativeValue {
                bundle: self.id,
                what: "bid",
            });
        }
        if self.valuation.values().iter().any(|v| v.is_negative()) {
            return Err(ModelError::NegativeValue {
                bundle: self.id,
                what: "valuation",
            });
        }
        Ok(())
    }
}

fn touches_any(keys: &BTreeSet<StorageKey>, other: &Bundle) -> bool {
    keys.iter()
        .any(|k| other.writes.contains(k) || other.reads.contains(k))
}

/// Bundles of one scenario, kept sorted by id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Bundle>", into = "Vec<Bundle>")]
pub struct BundleSet {
    bundles: Vec<Bundle>,
}

impl BundleSet {
    pub fn new(mut bundles: Vec<Bundle>) -> Result<Self, ModelError> {
        bundles.sort_by_key(|b| b.id);
        for pair in bundles.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(ModelError::DuplicateBundleId(pair[0].id));
            }
        }
        for b in &bundles {
            b.validate()?;
        }
        Ok(BundleSet { bundles })
    }

    pub fn len(&self) -> usize {
        self.bundles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bundles.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Bundle> {
        self.bundles.iter()
    }

    pub fn ids(&self) -> Vec<BundleId> {
        self.bundles.iter().map(|b| b.id).collect()
    }

    pub fn get(&self, id: BundleId) -> Option<&Bundle> {
        self.bundles
            .binary_search_by_key(&id, |b| b.id)
            .ok()
            .map(|pos| &self.bundles[pos])
    }

    pub fn bundle(&self, id: BundleId) -> Result<&Bundle, ModelError> {
        self.get(id).ok_or(ModelError::UnknownBundle(id))
    }

    pub fn contains(&self, id: BundleId) -> bool {
        self.get(id).is_some()
    }

    pub fn next_id(&self) -> BundleId {
        self.bundles
            .last()
            .map(|b| BundleId(b.id.0 + 1))
            .unwrap_or(BundleId(0))
    }

    pub fn get_mut(&mut self, id: BundleId) -> Option<&mut Bundle> {
        self.bundles
            .binary_search_by_key(&id, |b| b.id)
            .ok()
            .map(move |pos| &mut self.bundles[pos])
    }

    /// Copy with bundle `id`'s bid function replaced (gate and footprint kept).
    pub fn with_bid(&self, id: BundleId, bid: BidFunction) -> Result<Self, ModelError> {
        let mut next = self.clone();
        next.get_mut(id).ok_or(ModelError::UnknownBundle(id))?.bid = bid;
        Ok(next)
    }

    pub fn with_zeroed_bid(&self, id: BundleId) -> Result<Self, ModelError> {
        self.with_bid(id, BidFunction::zero())
    }

    /// Copy keeping only `ids`.
    pub fn restricted_to(&self, ids: &BTreeSet<BundleId>) -> Self {
        BundleSet {
            bundles: self
                .bundles
                .iter()
                .filter(|b| ids.contains(&b.id))
                .cloned()
                .collect(),
        }
    }
}

impl TryFrom<Vec<Bundle>> for BundleSet {
    type Error = ModelError;
    fn try_from(v: Vec<Bundle>) -> Result<Self, Self::Error> {
        BundleSet::new(v)
    }
}

impl From<BundleSet> for Vec<Bundle> {
    fn from(set: BundleSet) -> Vec<Bundle> {
        set.bundles
    }
}

/// Ordered sequence of distinct bundle ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Block(pub Vec<BundleId>);

impl Block {
    pub fn empty() -> Self {
        Block(Vec::new())
    }

    pub fn of(ids: &[u32]) -> Self {
        Block(ids.iter().copied().map(BundleId).collect())
    }

    pub fn ids(&self) -> &[BundleId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: BundleId) -> bool {
        self.0.contains(&id)
    }

    /// Checks that ids exist in `bundles` and are not repeated.
    pub fn check(&self, bundles: &BundleSet) -> Result<(), ModelError> {
        let mut seen = HashSet::with_capacity(self.0.len());
        for &id in &self.0 {
            if !bundles.contains(id) {
                return Err(ModelError::UnknownBundle(id));
            }
            if !seen.insert(id) {
                return Err(ModelError::DuplicateInBlock(id));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (pos, id) in self.0.iter().enumerate() {
            if pos > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{id}")?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BlockViolation {
    #[error("bundle {0} appears more than once")]
    Duplicate(BundleId),
    #[error("bundle {0} is not part of the input")]
    Foreign(BundleId),
}

/// Ok iff `block` is a duplicate-free subset of `input`.
pub fn validate_builder_block(
    block: &Block,
    input: &BTreeSet<BundleId>,
) -> Result<(), BlockViolation> {
    let mut seen = HashSet::with_capacity(block.len());
    for &id in block.ids() {
        if !input.contains(&id) {
            return Err(BlockViolation::Foreign(id));
        }
        if !seen.insert(id) {
            return Err(BlockViolation::Duplicate(id));
        }
    }
    Ok(())
}

pub fn canonical_context(
    block: &Block,
    subject: BundleId,
    bundles: &BundleSet,
    coinbase: &CoinbaseLabel,
) -> Result<ExecutionContext, ModelError> {
    let pos = block
        .ids()
        .iter()
        .position(|&id| id == subject)
        .ok_or(ModelError::NotIncluded(subject))?;
    let me = bundles.bundle(subject)?;
    let mut predecessors = Vec::new();
    for &earlier in &block.ids()[..pos] {
        if bundles.bundle(earlier)?.affects(me, coinbase) {
            predecessors.push(earlier);
        }
    }
    Ok(ExecutionContext {
        predecessors,
        coinbase: coinbase.clone(),
    })
}

pub fn evaluate_bid(bundle: &Bundle, ctx: &ExecutionContext) -> Amount {
    bundle.bid_in(ctx)
}

/// Per-bundle bids of every member of `block`, in block order.
pub fn block_bids(
    block: &Block,
    bundles: &BundleSet,
    coinbase: &CoinbaseLabel,
) -> Result<Vec<(BundleId, Amount)>, ModelError> {
    block.check(bundles)?;
    block
        .ids()
        .iter()
        .map(|&id| {
            let ctx = canonical_context(block, id, bundles, coinbase)?;
            Ok((id, bundles.bundle(id)?.bid_in(&ctx)))
        })
        .collect()
}

/// Per-bundle valuations of every member of `block`, in block order.
pub fn block_valuations(
    block: &Block,
    bundles: &BundleSet,
    coinbase: &CoinbaseLabel,
) -> Result<Vec<(BundleId, Amount)>, ModelError> {
    block.check(bundles)?;
    block
        .ids()
        .iter()
        .map(|&id| {
            let ctx = canonical_context(block, id, bundles, coinbase)?;
            let b = bundles.bundle(id)?;
            Ok((id, b.valuation_at(&ctx.predecessors, &ctx.coinbase)))
        })
        .collect()
}

pub fn block_total_bid(
    block: &Block,
    bundles: &BundleSet,
    coinbase: &CoinbaseLabel,
) -> Result<Amount, ModelError> {
    Ok(block_bids(block, bundles, coinbase)?
        .into_iter()
        .map(|(_, v)| v)
        .sum())
}

/// Bid of `id` in `block`, zero when it is not included.
pub fn bid_in_block(
    block: &Block,
    id: BundleId,
    bundles: &BundleSet,
    coinbase: &CoinbaseLabel,
) -> Result<Amount, ModelError> {
    if !block.contains(id) {
        return Ok(Amount::ZERO);
    }
    let ctx = canonical_context(block, id, bundles, coinbase)?;
    Ok(bundles.bundle(id)?.bid_in(&ctx))
}

/// Valuation of `id` in `block`, zero when it is not included.
pub fn valuation_in_block(
    block: &Block,
    id: BundleId,
    bundles: &BundleSet,
    coinbase: &CoinbaseLabel,
) -> Result<Amount, ModelError> {
    if !block.contains(id) {
        return Ok(Amount::ZERO);
    }
    let ctx = canonical_context(block, id, bundles, coinbase)?;
    Ok(bundles
        .bundle(id)?
        .valuation_at(&ctx.predecessors, &ctx.coinbase))
}

fn default_k_cutoff() -> usize {
    crate::DEFAULT_K_CUTOFF
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub bundles: BundleSet,
    #[serde(default)]
    pub builders: Vec<BuilderSpec>,
    pub k_cutoff: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn new(bundles: BundleSet) -> Self {
        Scenario {
            bundles,
            builders: Vec::new(),
            k_cutoff: default_k_cutoff(),
            seed: 0,
        }
    }

    pub fn with_builders(mut self, builders: Vec<BuilderSpec>) -> Self {
        self.builders = builders;
        self
    }

    pub fn with_k_cutoff(mut self, k_cutoff: usize) -> Self {
        self.k_cutoff = k_cutoff;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.k_cutoff == 0 {
            return Err(ModelError::InvalidKCutoff);
        }
        for b in self.bundles.iter() {
            b.validate()?;
        }
        Ok(())
    }
}
