//! Hand-built scenarios with known answers.
//!
//! The same scenarios ship as JSON under `fixtures/` at the repository root;
//! a test keeps the two in sync.

use crate::amount::Amount;
use crate::builders::{BuilderKind, BuilderSpec};
use crate::model::{
    BidFunction, Bundle, BundleId, BundleSet, CoinbaseLabel, ContextSignature, Scenario,
    StorageKey, TxHash, TxRef,
};

fn txs(n: u64, target: &str) -> Vec<TxRef> {
    vec![TxRef {
        hash: TxHash::from_low_u64(n),
        target: target.to_string(),
    }]
}

fn pool_key() -> StorageKey {
    StorageKey::new("0xpool", "reserves")
}

fn units(n: i64) -> Amount {
    Amount::from_units(n)
}

/// Two bundles whose bids depend on whether they run at the head of the
/// block or behind the other one: 1 bids 40 / 100, 2 bids 50 / 80.
pub fn two_bundle() -> Scenario {
    let b1 = Bundle::new(
        1,
        txs(0x11, "0xpool"),
        BidFunction::table([(ContextSignature::of(&[2]), units(100))], 40),
    )
    .with_writes([pool_key()]);
    let b2 = Bundle::new(
        2,
        txs(0x22, "0xpool"),
        BidFunction::table([(ContextSignature::of(&[1]), units(80))], 50),
    )
    .with_writes([pool_key()]);
    Scenario::new(BundleSet::new(vec![b1, b2]).expect("valid fixture")).with_seed(1)
}

/// Two mutually exclusive transactions bidding 100 and 1, and two builders:
/// one always takes the smallest hash, the other the largest.
pub fn deficit() -> Scenario {
    let t1 = Bundle::new(1, txs(0x01, "0xdex"), BidFunction::exclusive(100)).with_writes([pool_key()]);
    let mut t2 = Bundle::new(2, txs(0x02, "0xdex"), BidFunction::exclusive(1)).with_writes([pool_key()]);
    t2.txs[0].hash.0[0] = 0xff;
    let builders = vec![
        BuilderSpec::new("hash-min", CoinbaseLabel::new("0xb1"), BuilderKind::HashMin),
        BuilderSpec::new("hash-max", CoinbaseLabel::new("0xb2"), BuilderKind::HashMax),
    ];
    Scenario::new(BundleSet::new(vec![t1, t2]).expect("valid fixture"))
        .with_builders(builders)
        .with_seed(6)
}

/// The two-bundle auction plus a conflict-free bundle and an honest builder
/// that is worse than the default block. Bundle 1 is the colluding searcher.
pub fn collusion() -> Scenario {
    let mut base = two_bundle();
    let mut bundles: Vec<Bundle> = base.bundles.iter().cloned().collect();
    bundles.push(
        Bundle::new(3, txs(0x33, "0xtoken"), BidFunction::constant(5))
            .with_writes([StorageKey::balance("0xsearcher3")]),
    );
    base.bundles = BundleSet::new(bundles).expect("valid fixture");
    base.builders = vec![BuilderSpec::new(
        "fixed-12",
        CoinbaseLabel::new("0xb1"),
        BuilderKind::FixedBlock {
            order: vec![BundleId(1), BundleId(2)],
        },
    )];
    base.seed = 2;
    base
}

/// Bundle 1 (bid 100) and bundle 2 (bid 60) compete for one opportunity.
pub fn sybil() -> Scenario {
    let a = Bundle::new(1, txs(0xa1, "0xpool"), BidFunction::exclusive(100)).with_writes([pool_key()]);
    let b = Bundle::new(2, txs(0xb2, "0xpool"), BidFunction::exclusive(60)).with_writes([pool_key()]);
    Scenario::new(BundleSet::new(vec![a, b]).expect("valid fixture")).with_seed(3)
}

/// Split of [`sybil`]'s bundle 1 into two compatible halves (ids 1 and 3).
pub fn sybil_split() -> Vec<Bundle> {
    let half = |id: u32, partner: u32, hash: u64| {
        Bundle::new(
            id,
            txs(hash, "0xpool"),
            BidFunction::table(
                [
                    (ContextSignature::empty(), units(50)),
                    (ContextSignature::of(&[partner]), units(50)),
                ],
                0,
            ),
        )
        .with_writes([pool_key()])
    };
    vec![half(1, 3, 0xa1), half(3, 1, 0xa3)]
}

/// Nine constant-bid bundles chained through storage with distinct targets:
/// no shortcut applies, so the default builder keeps only `k_cutoff - 1`.
pub fn truncation_witness() -> Scenario {
    let bundles = (0..9u32)
        .map(|i| {
            let mut b = Bundle::new(i, txs(0x900 + i as u64, &format!("0xc{i}")), BidFunction::constant(10))
                .with_writes([StorageKey::new("0xchain", format!("{i}"))]);
            if i > 0 {
                b = b.with_reads([StorageKey::new("0xchain", format!("{}", i - 1))]);
            }
            b
        })
        .collect();
    Scenario::new(BundleSet::new(bundles).expect("valid fixture")).with_seed(9)
}

pub fn by_name(name: &str) -> Option<Scenario> {
    match name {
        "two-bundle" => Some(two_bundle()),
        "deficit" => Some(deficit()),
        "collusion" => Some(collusion()),
        "sybil" => Some(sybil()),
        "truncation" => Some(truncation_witness()),
        _ => None,
    }
}

pub const NAMES: [&str; 5] = ["two-bundle", "deficit", "collusion", "sybil", "truncation"];
