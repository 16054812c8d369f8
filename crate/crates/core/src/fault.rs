//! Fault distribution assumptions: which sets of nodes may be Byzantine at
//! the same time.
//!
//! Every model is downward closed (any subset of a permitted fault set is
//! permitted), the empty set is always permitted, and trusted nodes never
//! appear in a permitted set. Downward closure makes `can_all_fault`
//! equivalent to plain validity, which is what the decoder sweeps rely on.

use std::collections::BTreeSet;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, NodeSet};

/// Guard on enumeration: largest universe we will sweep subsets over.
pub const MAX_ENUM_UNIVERSE: usize = 16;
/// Guard on enumeration output size.
pub const MAX_ENUM_SETS: usize = 100_000;

/// A node set with a budget of simultaneous faults.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub nodes: NodeSet,
    pub budget: usize,
}

impl Region {
    pub fn new(nodes: impl IntoIterator<Item = NodeId>, budget: usize) -> Self {
        Region {
            nodes: nodes.into_iter().collect(),
            budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FaultKind {
    /// At most `f` simultaneous faults anywhere.
    Threshold { f: usize },
    /// Per-region budgets; nodes outside every region cannot fault.
    PerRegion { regions: Vec<Region> },
    /// Explicit family of permitted fault sets, stored as its maximal members.
    ExplicitFamily { sets: Vec<NodeSet> },
}

/// Which sets of nodes may simultaneously be Byzantine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultModel {
    pub kind: FaultKind,
    /// Nodes that can never be Byzantine, known to the whole graph.
    pub trusted: NodeSet,
}

/// A candidate set of faulty nodes used by decoders.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FaultHypothesis {
    pub members: NodeSet,
}

impl FaultModel {
    pub fn threshold(f: usize) -> Self {
        FaultModel {
            kind: FaultKind::Threshold { f },
            trusted: NodeSet::new(),
        }
    }

    pub fn per_region(regions: Vec<Region>) -> Self {
        FaultModel {
            kind: FaultKind::PerRegion { regions },
            trusted: NodeSet::new(),
        }
    }

    /// Store only the inclusion-maximal members of the family.
    pub fn explicit_family(sets: impl IntoIterator<Item = NodeSet>) -> Self {
        let all: Vec<NodeSet> = sets.into_iter().collect();
        let mut maximal: Vec<NodeSet> = all
            .iter()
            .filter(|s| !all.iter().any(|t| *t != **s && s.is_subset(t)))
            .cloned()
            .collect();
        maximal.sort();
        maximal.dedup();
        FaultModel {
            kind: FaultKind::ExplicitFamily { sets: maximal },
            trusted: NodeSet::new(),
        }
    }

    /// The assumption "fewer than half of every minimal vertex cut is faulty",
    /// materialized as the explicit family of maximal node sets satisfying it.
    pub fn majority_per_cut(g: &Graph) -> Result<Self> {
        let n = g.node_count();
        if n > MAX_ENUM_UNIVERSE {
            return Err(Error::ResourceLimit {
                what: "majority_per_cut universe",
                actual: n,
                limit: MAX_ENUM_UNIVERSE,
            });
        }
        let cuts = g.enumerate_minimal_cuts()?;
        let cut_masks: Vec<(u64, usize)> = cuts
            .iter()
            .map(|c| Ok((g.set_to_mask(&c.members)?, c.members.len())))
            .collect::<Result<_>>()?;
        let mut ok: Vec<u64> = Vec::new();
        for m in 0..(1u64 << n) {
            if cut_masks
                .iter()
                .all(|&(cm, len)| 2 * ((m & cm).count_ones() as usize) < len)
            {
                ok.push(m);
            }
        }
        let sets = ok
            .iter()
            .filter(|&&s| !ok.iter().any(|&t| t != s && (t & s) == s))
            .map(|&s| g.mask_to_set(s));
        Ok(FaultModel::explicit_family(sets))
    }

    pub fn with_trusted(mut self, trusted: impl IntoIterator<Item = NodeId>) -> Self {
        self.trusted = trusted.into_iter().collect();
        self
    }

    /// True iff `s` is a permitted simultaneous fault set.
    pub fn is_valid(&self, s: &NodeSet) -> bool {
        if s.iter().any(|n| self.trusted.contains(n)) {
            return false;
        }
        match &self.kind {
            FaultKind::Threshold { f } => s.len() <= *f,
            FaultKind::PerRegion { regions } => {
                s.iter()
                    .all(|n| regions.iter().any(|r| r.nodes.contains(n)))
                    && regions
                        .iter()
                        .all(|r| s.intersection(&r.nodes).count() <= r.budget)
            }
            FaultKind::ExplicitFamily { sets } => {
                s.is_empty() || sets.iter().any(|m| s.is_subset(m))
            }
        }
    }

    /// True iff some permitted fault set contains `s`. Equals `is_valid` for
    /// the downward-closed models here; the equivalence is asserted in tests
    /// against the maximal-set enumeration.
    pub fn can_all_fault(&self, s: &NodeSet) -> bool {
        self.is_valid(s)
    }

    /// All inclusion-maximal permitted fault sets within `universe`, in
    /// lexicographic order of their sorted member lists.
    pub fn enumerate_maximal_fault_sets(&self, universe: &NodeSet) -> Result<Vec<NodeSet>> {
        let candidates: Vec<&NodeId> = universe
            .iter()
            .filter(|n| !self.trusted.contains(*n))
            .collect();
        let out: Vec<NodeSet> = match &self.kind {
            FaultKind::Threshold { f } => {
                let k = (*f).min(candidates.len());
                let combos = count_combinations(candidates.len(), k);
                if combos > MAX_ENUM_SETS {
                    return Err(Error::ResourceLimit {
                        what: "maximal fault set enumeration",
                        actual: combos,
                        limit: MAX_ENUM_SETS,
                    });
                }
                combinations(&candidates, k)
            }
            FaultKind::PerRegion { .. } | FaultKind::ExplicitFamily { .. } => {
                if candidates.len() > MAX_ENUM_UNIVERSE {
                    return Err(Error::ResourceLimit {
                        what: "fault enumeration universe",
                        actual: candidates.len(),
                        limit: MAX_ENUM_UNIVERSE,
                    });
                }
                let mut valid: Vec<NodeSet> = Vec::new();
                for mask in 0u64..(1 << candidates.len()) {
                    let s: NodeSet = candidates
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask & (1 << i) != 0)
                        .map(|(_, n)| (*n).clone())
                        .collect();
                    if self.is_valid(&s) {
                        valid.push(s);
                    }
                }
                valid
                    .iter()
                    .filter(|s| !valid.iter().any(|t| *t != **s && s.is_subset(t)))
                    .cloned()
                    .collect()
            }
        };
        let mut out = out;
        out.sort();
        out.dedup();
        Ok(out)
    }
}

fn count_combinations(n: usize, k: usize) -> usize {
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

fn combinations(items: &[&NodeId], k: usize) -> Vec<NodeSet> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k == 0 {
        return vec![NodeSet::new()];
    }
    if k > items.len() {
        return vec![items.iter().map(|n| (*n).clone()).collect()];
    }
    loop {
        out.push(idx.iter().map(|&i| items[i].clone()).collect());
        // Advance the combination cursor.
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + items.len() - k {
                break;
            }
        }
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

// JSON form: {"kind":"threshold","f":2,"trusted":[...]} and friends.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Repr {
    Threshold {
        f: usize,
        #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
        trusted: NodeSet,
    },
    PerRegion {
        regions: Vec<Region>,
        #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
        trusted: NodeSet,
    },
    ExplicitFamily {
        sets: Vec<NodeSet>,
        #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
        trusted: NodeSet,
    },
}

impl Serialize for FaultModel {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match &self.kind {
            FaultKind::Threshold { f } => Repr::Threshold {
                f: *f,
                trusted: self.trusted.clone(),
            },
            FaultKind::PerRegion { regions } => Repr::PerRegion {
                regions: regions.clone(),
                trusted: self.trusted.clone(),
            },
            FaultKind::ExplicitFamily { sets } => Repr::ExplicitFamily {
                sets: sets.clone(),
                trusted: self.trusted.clone(),
            },
        };
        repr.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for FaultModel {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let repr = Repr::deserialize(de)?;
        let model = match repr {
            Repr::Threshold { f, trusted } => FaultModel::threshold(f).with_trusted(trusted),
            Repr::PerRegion { regions, trusted } => {
                for r in &regions {
                    if r.nodes.is_empty() {
                        return Err(D::Error::custom("per_region: empty region"));
                    }
                }
                FaultModel::per_region(regions).with_trusted(trusted)
            }
            Repr::ExplicitFamily { sets, trusted } => {
                FaultModel::explicit_family(sets).with_trusted(trusted)
            }
        };
        Ok(model)
    }
}

impl FaultModel {
    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::FaultModelParse(e.to_string()))
    }
}
