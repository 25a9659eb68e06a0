//! Storage-conflict graph and its connected components.
//!
//! Two bundles conflict when one writes a key the other reads or writes.
//! Components are found through a key → accessors index, so the cost is
//! linear in the number of declared accesses.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::model::{BundleId, BundleSet, StorageKey};

/// Groups of at least this size are reported as "large".
pub const LARGE_GROUP: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ConflictGroup {
    /// Sorted ascending.
    pub members: Vec<BundleId>,
}

impl ConflictGroup {
    pub fn new(mut members: Vec<BundleId>) -> Self {
        members.sort();
        members.dedup();
        ConflictGroup { members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn smallest(&self) -> Option<BundleId> {
        self.members.first().copied()
    }

    pub fn contains(&self, id: BundleId) -> bool {
        self.members.binary_search(&id).is_ok()
    }
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

#[derive(Default)]
struct Accessors {
    first_writer: Option<usize>,
    readers: Vec<usize>,
}

/// Partition `bundles` into conflict groups, ordered by smallest member id.
pub fn get_conflict_groups(bundles: &BundleSet) -> Vec<ConflictGroup> {
    let ids = bundles.ids();
    let mut sets = DisjointSets::new(ids.len());
    let mut index: HashMap<&StorageKey, Accessors> = HashMap::new();

    for (pos, bundle) in bundles.iter().enumerate() {
        for key in &bundle.writes {
            let entry = index.entry(key).or_default();
            match entry.first_writer {
                Some(w) => sets.union(w, pos),
                None => {
                    entry.first_writer = Some(pos);
                    for &r in &entry.readers {
                        sets.union(r, pos);
                    }
                    entry.readers.clear();
                }
            }
        }
        for key in bundle.reads.difference(&bundle.writes) {
            let entry = index.entry(key).or_default();
            match entry.first_writer {
                Some(w) => sets.union(w, pos),
                None => entry.readers.push(pos),
            }
        }
    }

    let mut components: BTreeMap<usize, Vec<BundleId>> = BTreeMap::new();
    for (pos, &id) in ids.iter().enumerate() {
        components.entry(sets.find(pos)).or_default().push(id);
    }
    let mut groups: Vec<ConflictGroup> = components.into_values().map(ConflictGroup::new).collect();
    groups.sort_by_key(|g| g.smallest());
    groups
}

/// Members of every singleton group.
pub fn conflict_free_set(groups: &[ConflictGroup]) -> BTreeSet<BundleId> {
    groups
        .iter()
        .filter(|g| g.len() == 1)
        .flat_map(|g| g.members.iter().copied())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupStats {
    pub bundles: usize,
    pub groups: usize,
    pub conflict_free: usize,
    /// Group size → number of groups of that size.
    pub size_histogram: BTreeMap<usize, usize>,
    pub large_groups: usize,
    pub max_group_size: usize,
}

pub fn group_stats(groups: &[ConflictGroup]) -> GroupStats {
    let mut size_histogram = BTreeMap::new();
    for g in groups {
        *size_histogram.entry(g.len()).or_insert(0) += 1;
    }
    GroupStats {
        bundles: groups.iter().map(ConflictGroup::len).sum(),
        groups: groups.len(),
        conflict_free: size_histogram.get(&1).copied().unwrap_or(0),
        large_groups: groups.iter().filter(|g| g.len() >= LARGE_GROUP).count(),
        max_group_size: groups.iter().map(ConflictGroup::len).max().unwrap_or(0),
        size_histogram,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BidFunction, Bundle, TxHash, TxRef};
    use proptest::prelude::*;

    fn key(n: u32) -> StorageKey {
        StorageKey::new("0xc", n.to_string())
    }

    fn bundle(id: u32, reads: &[u32], writes: &[u32]) -> Bundle {
        Bundle::new(
            id,
            vec![TxRef {
                hash: TxHash::from_low_u64(id as u64),
                target: "0xc".into(),
            }],
            BidFunction::zero(),
        )
        .with_reads(reads.iter().map(|&k| key(k)))
        .with_writes(writes.iter().map(|&k| key(k)))
    }

    fn ids(v: &[u32]) -> Vec<BundleId> {
        v.iter().copied().map(BundleId).collect()
    }

    #[test]
    fn write_read_conflict() {
        let set = BundleSet::new(vec![bundle(0, &[], &[1]), bundle(1, &[1], &[]), bundle(2, &[], &[2])]).unwrap();
        let groups = get_conflict_groups(&set);
        assert_eq!(groups, vec![ConflictGroup::new(ids(&[0, 1])), ConflictGroup::new(ids(&[2]))]);
        assert_eq!(conflict_free_set(&groups), [BundleId(2)].into_iter().collect());
    }

    #[test]
    fn read_read_is_not_a_conflict() {
        let set = BundleSet::new(vec![bundle(0, &[1], &[]), bundle(1, &[1], &[])]).unwrap();
        assert_eq!(get_conflict_groups(&set).len(), 2);
    }

    #[test]
    fn readers_before_writer_join_its_group() {
        let set = BundleSet::new(vec![bundle(0, &[1], &[]), bundle(1, &[1], &[]), bundle(2, &[], &[1])]).unwrap();
        assert_eq!(get_conflict_groups(&set), vec![ConflictGroup::new(ids(&[0, 1, 2]))]);
    }

    #[test]
    fn write_chain_is_one_group() {
        // 0:k1, 1:k1-k2, 2:k2-k3, 3:k3-k4, 4:k4
        let set = BundleSet::new(vec![
            bundle(0, &[], &[1]),
            bundle(1, &[], &[1, 2]),
            bundle(2, &[], &[2, 3]),
            bundle(3, &[], &[3, 4]),
            bundle(4, &[], &[4]),
        ])
        .unwrap();
        let groups = get_conflict_groups(&set);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].len(), 5);
        assert!(conflict_free_set(&groups).is_empty());
    }

    #[test]
    fn all_singletons() {
        let set = BundleSet::new((0..4).map(|i| bundle(i, &[], &[i])).collect()).unwrap();
        let groups = get_conflict_groups(&set);
        assert_eq!(conflict_free_set(&groups).len(), 4);
        let stats = group_stats(&groups);
        assert_eq!(stats.size_histogram.get(&1), Some(&4));
        assert_eq!(stats.large_groups, 0);
    }

    /// Pairwise reference: edges by direct comparison, components by search.
    fn brute_groups(set: &BundleSet) -> Vec<ConflictGroup> {
        let all: Vec<&Bundle> = set.iter().collect();
        let n = all.len();
        let mut label: Vec<usize> = (0..n).collect();
        let mut changed = true;
        while changed {
            changed = false;
            for a in 0..n {
                for b in 0..n {
                    if a != b && all[a].conflicts_with(all[b]) && label[b] > label[a] {
                        label[b] = label[a];
                        changed = true;
                    }
                }
            }
        }
        let mut comps: BTreeMap<usize, Vec<BundleId>> = BTreeMap::new();
        for (i, b) in all.iter().enumerate() {
            comps.entry(label[i]).or_default().push(b.id);
        }
        let mut groups: Vec<_> = comps.into_values().map(ConflictGroup::new).collect();
        groups.sort_by_key(|g| g.smallest());
        groups
    }

    proptest! {
        #[test]
        fn matches_pairwise_reference(
            spec in prop::collection::vec(
                (prop::collection::vec(0u32..12, 0..3), prop::collection::vec(0u32..12, 0..3)),
                0..14,
            )
        ) {
            let set = BundleSet::new(
                spec.iter().enumerate().map(|(i, (r, w))| bundle(i as u32, r, w)).collect()
            ).unwrap();
            let groups = get_conflict_groups(&set);
            prop_assert_eq!(&groups, &brute_groups(&set));
            let total: usize = groups.iter().map(ConflictGroup::len).sum();
            prop_assert_eq!(total, set.len());
        }

        #[test]
        fn conflict_is_symmetric(r1 in prop::collection::vec(0u32..5, 0..3), w1 in prop::collection::vec(0u32..5, 0..3),
                                 r2 in prop::collection::vec(0u32..5, 0..3), w2 in prop::collection::vec(0u32..5, 0..3)) {
            let a = bundle(0, &r1, &w1);
            let b = bundle(1, &r2, &w2);
            prop_assert_eq!(a.conflicts_with(&b), b.conflicts_with(&a));
        }
    }
}
