//! Shared relation vocabulary for a set of graphs.
//!
//! Per-graph relation sets differ (a relation absent from a run simply never
//! occurs), but feature vectors and per-relation model weights must line up
//! across a dataset. The schema is the sorted union of every canonical
//! relation observed, giving each a stable column/weight index.

use serde::{Deserialize, Serialize};

use super::{CanonicalRelation, HeteroMultigraph};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetSchema {
    relations: Vec<CanonicalRelation>,
}

impl DatasetSchema {
    pub fn from_graphs<'a>(graphs: impl IntoIterator<Item = &'a HeteroMultigraph>) -> Self {
        let mut relations: Vec<CanonicalRelation> = graphs
            .into_iter()
            .flat_map(|g| g.relations().map(|(rel, _)| rel.clone()))
            .collect();
        relations.sort();
        relations.dedup();
        DatasetSchema { relations }
    }

    /// Build from an explicit relation list, restoring the sorted-unique
    /// invariant regardless of input order.
    pub fn from_relations(mut relations: Vec<CanonicalRelation>) -> Self {
        relations.sort();
        relations.dedup();
        DatasetSchema { relations }
    }

    pub fn relations(&self) -> &[CanonicalRelation] {
        &self.relations
    }

    pub fn index_of(&self, rel: &CanonicalRelation) -> Option<usize> {
        self.relations.binary_search(rel).ok()
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }
}

// CanonicalRelation serializes as the compact triple, not a struct map.
impl Serialize for CanonicalRelation {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        (&self.src_type, &self.edge_type, &self.dst_type).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CanonicalRelation {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let (src_type, edge_type, dst_type) = <(String, String, String)>::deserialize(deserializer)?;
        Ok(CanonicalRelation { src_type, edge_type, dst_type })
    }
}
