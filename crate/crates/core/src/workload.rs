//! Seeded synthetic scenarios and scenario files.
//!
//! A profile fixes the group-size distribution, how often the two special
//! group shapes appear, the bid model and the builder mix. Generation is a
//! pure function of `(profile, seed)`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::amount::{Amount, SCALE};
use crate::builders::{BidPolicy, BuilderKind, BuilderSpec};
use crate::conflict::{get_conflict_groups, ConflictGroup};
use crate::model::{
    BidFunction, Bundle, BundleId, BundleSet, CoinbaseLabel, ContextSignature, ModelError, Scenario, StorageKey,
    TxHash, TxRef,
};
use crate::seeding::{derive_seed, rng};

#[derive(Debug, thiserror::Error)]
pub enum WorkloadError {
    #[error("infeasible profile: {0}")]
    InfeasibleProfile(String),
    #[error("unknown profile {0:?}")]
    UnknownProfile(String),
    #[error("planned partition {planned:?} differs from realized {realized:?}")]
    PartitionMismatch {
        planned: Vec<ConflictGroup>,
        realized: Vec<ConflictGroup>,
    },
    #[error("cannot read {}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How bundles in one group touch storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    /// Everyone writes one shared key.
    Clique,
    /// Member m writes its own key and reads member m−1's.
    Chain,
    /// The first member writes a hub key every other member reads.
    Star,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidModel {
    /// Bids are drawn from `1..=max_value` units.
    pub max_value: i64,
    /// Probability a bundle bids through a context table rather than a constant.
    pub table_rate: f64,
    /// Every bundle pays only at the head of the block (0 behind anyone).
    #[serde(default)]
    pub exclusive: bool,
    /// Add a random sub-unit part to every value.
    #[serde(default)]
    pub fractional: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuilderMix {
    pub min: usize,
    pub max: usize,
    pub kinds: Vec<BuilderKind>,
    /// Policies to draw from; truthful only when empty.
    #[serde(default)]
    pub policies: Vec<BidPolicy>,
}

impl BuilderMix {
    pub fn none() -> Self {
        BuilderMix {
            min: 0,
            max: 0,
            kinds: Vec::new(),
            policies: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub name: String,
    pub n_bundles: usize,
    /// `(size, weight)` pairs.
    pub group_sizes: Vec<(usize, u32)>,
    pub topologies: Vec<(Topology, u32)>,
    /// Probability a group of two or more shares one victim transaction.
    pub shared_pivot_rate: f64,
    /// Probability a group of two or more targets a single contract.
    pub same_target_rate: f64,
    pub bid_model: BidModel,
    #[serde(default = "default_k")]
    pub k_cutoff: usize,
    #[serde(default = "BuilderMix::none")]
    pub builders: BuilderMix,
}

fn default_k() -> usize {
    crate::DEFAULT_K_CUTOFF
}

pub const PROFILE_NAMES: [&str; 5] = [
    "no-conflict",
    "full-conflict",
    "realistic",
    "stress-large-groups",
    "small-groups",
];

fn all_topologies() -> Vec<(Topology, u32)> {
    vec![(Topology::Clique, 2), (Topology::Chain, 1), (Topology::Star, 1)]
}

fn mixed_builders() -> BuilderMix {
    BuilderMix {
        min: 0,
        max: 3,
        kinds: vec![
            BuilderKind::CopyDefault,
            BuilderKind::GreedyByBid,
            BuilderKind::GreedyByDensity,
            BuilderKind::HashMin,
            BuilderKind::HashMax,
            BuilderKind::Empty,
        ],
        policies: vec![
            BidPolicy::Truthful,
            BidPolicy::Offset { amount: Amount::from_units(1) },
            BidPolicy::Offset { amount: Amount::from_units(-5) },
            BidPolicy::Scaled { num: 1, den: 2 },
        ],
    }
}

impl Profile {
    pub fn builtin(name: &str) -> Result<Profile, WorkloadError> {
        let plain = BidModel {
            max_value: 100,
            table_rate: 0.5,
            exclusive: false,
            fractional: false,
        };
        let p = match name {
            "no-conflict" => Profile {
                name: name.into(),
                n_bundles: 20,
                group_sizes: vec![(1, 1)],
                topologies: vec![(Topology::Clique, 1)],
                shared_pivot_rate: 0.0,
                same_target_rate: 0.0,
                bid_model: plain,
                k_cutoff: default_k(),
                builders: BuilderMix::none(),
            },
            "full-conflict" => Profile {
                name: name.into(),
                n_bundles: 5,
                group_sizes: vec![(5, 1)],
                topologies: vec![(Topology::Clique, 1)],
                shared_pivot_rate: 0.0,
                same_target_rate: 0.0,
                bid_model: BidModel {
                    exclusive: true,
                    ..plain
                },
                k_cutoff: default_k(),
                builders: BuilderMix::none(),
            },
            // mostly groups of 1 to 3 with a thin tail to 20
            "realistic" => Profile {
                name: name.into(),
                n_bundles: 40,
                group_sizes: vec![
                    (1, 50),
                    (2, 20),
                    (3, 12),
                    (4, 6),
                    (5, 4),
                    (6, 3),
                    (8, 2),
                    (10, 1),
                    (14, 1),
                    (20, 1),
                ],
                topologies: all_topologies(),
                shared_pivot_rate: 0.1,
                same_target_rate: 0.1,
                bid_model: BidModel {
                    fractional: true,
                    ..plain
                },
                k_cutoff: default_k(),
                builders: mixed_builders(),
            },
            "stress-large-groups" => Profile {
                name: name.into(),
                n_bundles: 40,
                group_sizes: vec![(8, 2), (10, 2), (12, 1), (16, 1)],
                topologies: all_topologies(),
                shared_pivot_rate: 0.1,
                same_target_rate: 0.1,
                bid_model: plain,
                k_cutoff: default_k(),
                builders: BuilderMix::none(),
            },
            // every group below the cutoff, so the default enumerates exactly
            "small-groups" => Profile {
                name: name.into(),
                n_bundles: 30,
                group_sizes: (1..=7).map(|s| (s, 8 - s as u32)).collect(),
                topologies: all_topologies(),
                shared_pivot_rate: 0.0,
                same_target_rate: 0.0,
                bid_model: BidModel {
                    fractional: true,
                    ..plain
                },
                k_cutoff: default_k(),
                builders: BuilderMix::none(),
            },
            _ => return Err(WorkloadError::UnknownProfile(name.into())),
        };
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |m: String| Err(WorkloadError::InfeasibleProfile(m));
        if self.group_sizes.iter().all(|&(_, w)| w == 0) {
            return bad("group-size weights must sum to more than zero".into());
        }
        if let Some(&(s, _)) = self.group_sizes.iter().find(|&&(s, w)| w > 0 && s == 0) {
            return bad(format!("group size {s} is empty"));
        }
        if let Some(&(s, _)) = self.group_sizes.iter().find(|&&(s, w)| w > 0 && s > self.n_bundles) {
            return bad(format!("group size {s} exceeds n_bundles = {}", self.n_bundles));
        }
        if self.topologies.iter().all(|&(_, w)| w == 0) {
            return bad("topology weights must sum to more than zero".into());
        }
        for (what, r) in [
            ("shared_pivot_rate", self.shared_pivot_rate),
            ("same_target_rate", self.same_target_rate),
            ("table_rate", self.bid_model.table_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{what} = {r} is not a probability"));
            }
        }
        if self.bid_model.max_value < 1 {
            return bad("max_value must be at least 1".into());
        }
        if self.k_cutoff == 0 {
            return bad("k_cutoff must be at least 1".into());
        }
        let b = &self.builders;
        if b.min > b.max || (b.max > 0 && b.kinds.is_empty()) {
            return bad("builder mix needs min <= max and at least one kind".into());
        }
        Ok(())
    }
}

/// Named built-in profile, or a JSON profile file.
pub fn resolve_profile(name_or_path: &str) -> Result<Profile, WorkloadError> {
    if PROFILE_NAMES.contains(&name_or_path) {
        return Profile::builtin(name_or_path);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        return read_json(path);
    }
    Err(WorkloadError::UnknownProfile(name_or_path.into()))
}

fn tx_hash(seed: u64, tag: &str, a: u64, b: u64) -> TxHash {
    let mut h = Sha256::new();
    h.update(tag.as_bytes());
    h.update(seed.to_le_bytes());
    h.update(a.to_le_bytes());
    h.update(b.to_le_bytes());
    TxHash(h.finalize().into())
}

fn draw_value(model: &BidModel, rng: &mut impl Rng) -> Amount {
    let units = Amount::from_units(rng.gen_range(1..=model.max_value));
    if model.fractional {
        units + Amount::from_nanos(rng.gen_range(0..SCALE))
    } else {
        units
    }
}

fn draw_bid(model: &BidModel, others: &[BundleId], rng: &mut impl Rng) -> BidFunction {
    let head = draw_value(model, rng);
    if model.exclusive && !others.is_empty() {
        return BidFunction::exclusive(head);
    }
    if others.is_empty() || !rng.gen_bool(model.table_rate) {
        return BidFunction::constant(head);
    }
    // the head value, up to three single-predecessor contexts and a default
    let mut entries = vec![(ContextSignature::empty(), head)];
    for id in others.choose_multiple(rng, others.len().min(3)) {
        entries.push((ContextSignature(vec![*id]), draw_value(model, rng)));
    }
    let default = if rng.gen_bool(0.25) {
        Amount::ZERO
    } else {
        draw_value(model, rng)
    };
    BidFunction::table(entries, default)
}

fn group_keys(topology: Topology, g: usize, m: usize) -> (Vec<StorageKey>, Vec<StorageKey>) {
    let contract = format!("0xg{g:04x}");
    let slot = |s: String| StorageKey::new(contract.clone(), s);
    match topology {
        Topology::Clique => (vec![slot("shared".into())], vec![]),
        Topology::Chain => {
            let reads = if m == 0 { vec![] } else { vec![slot(format!("k{}", m - 1))] };
            (vec![slot(format!("k{m}"))], reads)
        }
        Topology::Star if m == 0 => (vec![slot("hub".into())], vec![]),
        Topology::Star => (vec![slot(format!("leaf{m}"))], vec![slot("hub".into())]),
    }
}

/// Draw a scenario from `profile`. Bundle ids run from 1 in group order.
pub fn generate_scenario(profile: &Profile, seed: u64) -> Result<Scenario, WorkloadError> {
    profile.validate()?;
    let mut rng = rng(derive_seed(seed, "workload", 0));
    let size_dist = WeightedIndex::new(profile.group_sizes.iter().map(|&(_, w)| w)).expect("validated weights");
    let topo_dist = WeightedIndex::new(profile.topologies.iter().map(|&(_, w)| w)).expect("validated weights");

    let mut planned: Vec<ConflictGroup> = Vec::new();
    let mut bundles = Vec::with_capacity(profile.n_bundles);
    let mut next = 1u32;
    while bundles.len() < profile.n_bundles {
        let g = planned.len();
        let size = profile.group_sizes[size_dist.sample(&mut rng)]
            .0
            .min(profile.n_bundles - bundles.len());
        let topology = profile.topologies[topo_dist.sample(&mut rng)].0;
        let pivot = size > 1 && rng.gen_bool(profile.shared_pivot_rate);
        let same_target = size > 1 && rng.gen_bool(profile.same_target_rate);
        let ids: Vec<BundleId> = (next..next + size as u32).map(BundleId).collect();
        next += size as u32;
        let victim = TxRef {
            hash: tx_hash(seed, "victim", g as u64, 0),
            target: format!("0xvictim{g:04x}"),
        };

        for (m, &id) in ids.iter().enumerate() {
            let target = if same_target {
                format!("0xg{g:04x}")
            } else {
                format!("0xg{g:04x}m{m:02x}")
            };
            let mut txs = vec![TxRef {
                hash: tx_hash(seed, "tx", id.0 as u64, 0),
                target: target.clone(),
            }];
            if pivot {
                txs.push(TxRef {
                    target: if same_target { target.clone() } else { victim.target.clone() },
                    ..victim.clone()
                });
                txs.push(TxRef {
                    hash: tx_hash(seed, "tx", id.0 as u64, 1),
                    target,
                });
            }
            let others: Vec<BundleId> = ids.iter().copied().filter(|&o| o != id).collect();
            let bid = draw_bid(&profile.bid_model, &others, &mut rng);
            let (writes, reads) = if size > 1 {
                group_keys(topology, g, m)
            } else {
                (vec![], vec![])
            };
            let mut b = Bundle {
                id,
                txs,
                reads: reads.into_iter().collect(),
                writes: writes.into_iter().collect(),
                weight: rng.gen_range(1..=10),
                gate: None,
                valuation: bid.clone(),
                bid,
            };
            b.writes.insert(StorageKey::balance(format!("0xsearcher{:04x}", id.0)));
            bundles.push(b);
        }
        planned.push(ConflictGroup::new(ids));
    }

    let set = BundleSet::new(bundles)?;
    let mut realized = get_conflict_groups(&set);
    realized.sort();
    planned.sort();
    if realized != planned {
        return Err(WorkloadError::PartitionMismatch { planned, realized });
    }

    let mix = &profile.builders;
    let count = if mix.max == 0 { 0 } else { rng.gen_range(mix.min..=mix.max) };
    let builders = (0..count)
        .map(|j| {
            let kind = mix.kinds.choose(&mut rng).expect("validated mix").clone();
            let policy = mix.policies.choose(&mut rng).cloned().unwrap_or(BidPolicy::Truthful);
            BuilderSpec::new(format!("b{j}"), CoinbaseLabel(format!("0xb{j}")), kind).with_bid(policy)
        })
        .collect();

    let scenario = Scenario::new(set)
        .with_builders(builders)
        .with_k_cutoff(profile.k_cutoff)
        .with_seed(seed);
    scenario.validate()?;
    Ok(scenario)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<(), WorkloadError> {
    fs::write(path, to_json(scenario)).map_err(|source| WorkloadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, WorkloadError> {
    let text = fs::read_to_string(path).map_err(|source| WorkloadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| WorkloadError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, WorkloadError> {
    let scenario: Scenario = read_json(path)?;
    scenario.validate()?;
    Ok(scenario)
}
