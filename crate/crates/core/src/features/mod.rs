//! Base fields, cross features and the tree-structured feature-set space.

pub mod discretize;
pub mod encode;
pub mod hash;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use discretize::{
    bin_index, default_levels, discretize_multi_granularity, filter_granularities,
    keep_best_half, levels_for_rows, DiscretizationSpec, GranularityCandidate, MultiGranularity,
    NumericBinning,
};
pub use encode::{encode_table, BaseField, BaseSource, EncodedData};
pub use hash::{hash_base, hash_bin, hash_cross, CrossHasher, HashConfig};

/// Index of a post-discretization categorical field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BaseFieldId(pub u32);

impl BaseFieldId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A canonical (sorted, duplicate-free, non-empty) set of base fields.
/// Order 1 is an original field.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<BaseFieldId>", into = "Vec<BaseFieldId>")]
pub struct CrossFeature(Vec<BaseFieldId>);

impl CrossFeature {
    /// `None` when `ids` is empty.
    pub fn new(ids: impl IntoIterator<Item = BaseFieldId>) -> Option<Self> {
        let mut v: Vec<BaseFieldId> = ids.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        v.sort_unstable();
        v.dedup();
        Some(Self(v))
    }

    pub fn from_indices(ids: &[u32]) -> Option<Self> {
        Self::new(ids.iter().copied().map(BaseFieldId))
    }

    pub fn single(id: BaseFieldId) -> Self {
        Self(vec![id])
    }

    pub fn constituents(&self) -> &[BaseFieldId] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn is_original(&self) -> bool {
        self.0.len() == 1
    }

    /// Set union; crossing a feature with itself is a no-op.
    pub fn union(&self, other: &CrossFeature) -> CrossFeature {
        let mut v = Vec::with_capacity(self.0.len() + other.0.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        v.sort_unstable();
        v.dedup();
        CrossFeature(v)
    }

    /// Ordering used to break ties between equally scored candidates:
    /// lower order first, then lexicographic constituents.
    pub fn simplicity_cmp(&self, other: &CrossFeature) -> std::cmp::Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| self.0.cmp(&other.0))
    }

    /// Human-readable name from base field names, e.g. `job*education`.
    pub fn display_name(&self, names: &[String]) -> String {
        self.0
            .iter()
            .map(|id| names.get(id.index()).map_or_else(|| format!("#{}", id.0), Clone::clone))
            .collect::<Vec<_>>()
            .join("*")
    }
}

impl TryFrom<Vec<BaseFieldId>> for CrossFeature {
    type Error = String;

    fn try_from(v: Vec<BaseFieldId>) -> Result<Self, Self::Error> {
        CrossFeature::new(v).ok_or_else(|| "cross feature must have at least one constituent".to_string())
    }
}

impl From<CrossFeature> for Vec<BaseFieldId> {
    fn from(c: CrossFeature) -> Self {
        c.0
    }
}

impl fmt::Display for CrossFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|id| id.0.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// A node of the search tree: all original fields plus adopted crosses, in
/// insertion order.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<CrossFeature>", into = "Vec<CrossFeature>")]
pub struct FeatureSet {
    members: Vec<CrossFeature>,
    n_original: usize,
    #[serde(skip)]
    index: BTreeSet<CrossFeature>,
}

impl FeatureSet {
    /// The root node over `d` original fields.
    pub fn originals(d: usize) -> Self {
        let members: Vec<CrossFeature> = (0..d as u32)
            .map(|i| CrossFeature::single(BaseFieldId(i)))
            .collect();
        let index = members.iter().cloned().collect();
        Self {
            members,
            n_original: d,
            index,
        }
    }

    pub fn members(&self) -> &[CrossFeature] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn n_original(&self) -> usize {
        self.n_original
    }

    /// Adopted crosses (order >= 2), in adoption order.
    pub fn crosses(&self) -> &[CrossFeature] {
        &self.members[self.n_original..]
    }

    pub fn contains(&self, c: &CrossFeature) -> bool {
        self.index.contains(c)
    }

    /// Returns false when `c` is already a member.
    pub fn insert(&mut self, c: CrossFeature) -> bool {
        if self.index.insert(c.clone()) {
            self.members.push(c);
            true
        } else {
            false
        }
    }

    pub fn with(&self, c: CrossFeature) -> FeatureSet {
        let mut next = self.clone();
        next.insert(c);
        next
    }
}

impl PartialEq for FeatureSet {
    fn eq(&self, other: &Self) -> bool {
        self.index == other.index
    }
}

impl Eq for FeatureSet {}

impl TryFrom<Vec<CrossFeature>> for FeatureSet {
    type Error = String;

    fn try_from(members: Vec<CrossFeature>) -> Result<Self, Self::Error> {
        let n_original = members.iter().take_while(|c| c.is_original()).count();
        for (i, c) in members.iter().take(n_original).enumerate() {
            if c.constituents()[0].index() != i {
                return Err(format!("original field {i} out of place"));
            }
        }
        let mut set = FeatureSet::originals(n_original);
        for c in members.into_iter().skip(n_original) {
            if c.constituents().iter().any(|id| id.index() >= n_original) {
                return Err(format!("cross {c} references an unknown base field"));
            }
            if !set.insert(c.clone()) {
                return Err(format!("duplicate member {c}"));
            }
        }
        Ok(set)
    }
}

impl From<FeatureSet> for Vec<CrossFeature> {
    fn from(s: FeatureSet) -> Self {
        s.members
    }
}

/// New crosses obtainable from `node` by one pair-wise crossing of its
/// members, deduplicated, in first-occurrence pair order.
pub fn candidate_crosses(node: &FeatureSet) -> Vec<CrossFeature> {
    let members = node.members();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, f) in members.iter().enumerate() {
        for g in &members[i + 1..] {
            let c = f.union(g);
            if &c == f || &c == g || node.contains(&c) {
                continue;
            }
            if seen.insert(c.clone()) {
                out.push(c);
            }
        }
    }
    out
}

/// Children of `node`: one child per distinct new pair-wise cross.
pub fn expand_children(node: &FeatureSet) -> Vec<FeatureSet> {
    candidate_crosses(node)
        .into_iter()
        .map(|c| node.with(c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cf(ids: &[u32]) -> CrossFeature {
        CrossFeature::from_indices(ids).unwrap()
    }

    #[test]
    fn cross_is_canonical() {
        assert_eq!(cf(&[3, 1, 1]), cf(&[1, 3]));
        assert!(CrossFeature::from_indices(&[]).is_none());
        assert_eq!(cf(&[0, 1]).union(&cf(&[0, 2])), cf(&[0, 1, 2]));
        assert_eq!(cf(&[0, 1]).union(&cf(&[0, 1])), cf(&[0, 1]));
    }

    #[test]
    fn root_of_four_has_six_children() {
        let root = FeatureSet::originals(4);
        let kids = candidate_crosses(&root);
        let expected: Vec<CrossFeature> = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]]
            .iter()
            .map(|p| cf(p))
            .collect();
        assert_eq!(kids, expected);
        assert_eq!(expand_children(&root).len(), 6);
    }

    #[test]
    fn saturated_pair_has_no_children() {
        let node = FeatureSet::originals(2).with(cf(&[0, 1]));
        assert!(expand_children(&node).is_empty());
    }

    #[test]
    fn ab_cross_cd_reaches_abcd() {
        let node = FeatureSet::originals(4).with(cf(&[0, 1])).with(cf(&[2, 3]));
        let kids = expand_children(&node);
        assert!(kids.iter().any(|k| k.contains(&cf(&[0, 1, 2, 3]))));
        for k in &kids {
            assert_eq!(k.len(), node.len() + 1);
            assert!(k.members()[..4].iter().all(CrossFeature::is_original));
        }
    }

    #[test]
    fn children_are_deduplicated() {
        // (AB, C) and (A, BC) both give ABC.
        let node = FeatureSet::originals(3).with(cf(&[0, 1])).with(cf(&[1, 2]));
        let kids = candidate_crosses(&node);
        assert_eq!(kids.iter().filter(|c| **c == cf(&[0, 1, 2])).count(), 1);
    }

    #[test]
    fn feature_set_serde_round_trip() {
        let node = FeatureSet::originals(3).with(cf(&[0, 2]));
        let json = serde_json::to_string(&node).unwrap();
        assert_eq!(json, "[[0],[1],[2],[0,2]]");
        let back: FeatureSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, node);
        assert_eq!(back.crosses(), &[cf(&[0, 2])]);
        assert!(serde_json::from_str::<FeatureSet>("[[0],[1],[0,5]]").is_err());
    }

    #[test]
    fn simplicity_order() {
        use std::cmp::Ordering;
        assert_eq!(cf(&[5, 6]).simplicity_cmp(&cf(&[0, 1, 2])), Ordering::Less);
        assert_eq!(cf(&[0, 2]).simplicity_cmp(&cf(&[1, 2])), Ordering::Less);
    }
}
