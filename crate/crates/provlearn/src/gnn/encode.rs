//! Flattened per-graph views consumed by the network: global node indexing,
//! per-relation edge lists, and stacked feature matrices. Building these once
//! per graph keeps repeated forward/backward passes off the hash maps.

use ndarray::Array2;

use super::{Aggregation, GnnError};
use crate::features::FeatureSet;
use crate::graph::{DatasetSchema, HeteroMultigraph};

#[derive(Debug, Clone)]
pub(super) struct EncodedRelation {
    pub schema_idx: usize,
    /// (src, dst) in global node indices, direction as stored.
    pub pairs: Vec<(u32, u32)>,
    /// Per-edge 1/|N_r(dst)| factors; `None` under SUM aggregation.
    pub edge_scale: Option<Vec<f64>>,
}

/// A graph re-indexed against a model's schema.
#[derive(Debug, Clone)]
pub struct GraphEncoding {
    pub(super) num_nodes: usize,
    pub(super) relations: Vec<EncodedRelation>,
}

impl GraphEncoding {
    pub fn build(
        g: &HeteroMultigraph,
        schema: &DatasetSchema,
        aggregation: Aggregation,
    ) -> Result<Self, GnnError> {
        let mut offsets = vec![0u32; g.node_types().len() + 1];
        for t in 0..g.node_types().len() {
            offsets[t + 1] = offsets[t] + g.node_table(t).len() as u32;
        }
        let num_nodes = g.num_nodes();
        let mut indeg = vec![0u32; num_nodes];
        let mut relations = Vec::with_capacity(g.num_relations());
        for (rel, edges) in g.relations() {
            let schema_idx = schema.index_of(rel).ok_or_else(|| GnnError::SchemaMismatch {
                detail: format!("relation {rel} absent from model schema"),
            })?;
            let src_base = offsets[g.type_index(&rel.src_type).expect("typed relation")];
            let dst_base = offsets[g.type_index(&rel.dst_type).expect("typed relation")];
            let pairs: Vec<(u32, u32)> = edges
                .endpoints
                .iter()
                .map(|&(s, d)| (src_base + s, dst_base + d))
                .collect();
            let edge_scale = match aggregation {
                Aggregation::Sum => None,
                Aggregation::Mean => {
                    for &(_, d) in &pairs {
                        indeg[d as usize] += 1;
                    }
                    let scale =
                        pairs.iter().map(|&(_, d)| 1.0 / indeg[d as usize] as f64).collect();
                    for &(_, d) in &pairs {
                        indeg[d as usize] = 0;
                    }
                    Some(scale)
                }
            };
            relations.push(EncodedRelation { schema_idx, pairs, edge_scale });
        }
        Ok(GraphEncoding { num_nodes, relations })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }
}

/// Stack per-type feature matrices into one row-per-node matrix in global
/// node order.
pub fn stack_features(g: &HeteroMultigraph, feats: &FeatureSet) -> Result<Array2<f64>, GnnError> {
    if feats.node_types != g.node_types() {
        return Err(GnnError::SchemaMismatch {
            detail: format!(
                "feature node types {:?} do not match graph {:?}",
                feats.node_types,
                g.node_types()
            ),
        });
    }
    let dim = feats.dim();
    let mut x = Array2::zeros((g.num_nodes(), dim));
    let mut row = 0;
    for (t, m) in feats.matrices.iter().enumerate() {
        let expected = g.node_table(t).len();
        if m.nrows() != expected || m.ncols() != dim {
            return Err(GnnError::SchemaMismatch {
                detail: format!(
                    "feature matrix for `{}` is {}x{}, graph needs {}x{}",
                    g.node_types()[t],
                    m.nrows(),
                    m.ncols(),
                    expected,
                    dim
                ),
            });
        }
        x.slice_mut(ndarray::s![row..row + expected, ..]).assign(m);
        row += expected;
    }
    Ok(x)
}
