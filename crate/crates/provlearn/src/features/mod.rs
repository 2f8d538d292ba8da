//! Per-node feature engineering.
//!
//! Two families are produced and concatenated: relation-wise in/out degree
//! counts, and spectral embeddings taken from the smallest eigenvectors of a
//! multilayer block matrix assembled from per-relation normalized Laplacians.

mod dense;
mod io;
mod lobpcg;
mod sparse;

pub use io::{features_to_json, read_graph_with_features, write_graph_with_features};
pub use lobpcg::{lobpcg, LobpcgResult, Precond};
pub use sparse::{build_block_matrix, normalized_laplacian, SparseSymMatrix};

use ndarray::{s, Array2, ArrayView2};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::graph::{CanonicalRelation, DatasetSchema, GraphError, HeteroMultigraph};
use crate::par;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("relation {relation} does not occur in the graph")]
    UnknownRelation { relation: String },
    #[error("layer dimension {found} does not match {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid eigensolver block: {detail}")]
    InvalidBlock { detail: String },
    #[error("eigensolver breakdown: {detail}")]
    Breakdown { detail: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Per-type dense feature matrices sharing one column schema. Row order
/// matches node order within each type.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub node_types: Vec<String>,
    pub schema: Vec<String>,
    pub matrices: Vec<Array2<f64>>,
}

impl FeatureSet {
    pub fn dim(&self) -> usize {
        self.schema.len()
    }

    pub fn matrix_for(&self, node_type: &str) -> Option<&Array2<f64>> {
        self.node_types.iter().position(|t| t == node_type).map(|i| &self.matrices[i])
    }

    /// Column-wise concatenation; both sides must describe the same types in
    /// the same order.
    fn hstack(mut self, other: FeatureSet) -> FeatureSet {
        assert_eq!(self.node_types, other.node_types, "feature sets must share node types");
        self.schema.extend(other.schema);
        self.matrices = self
            .matrices
            .into_iter()
            .zip(other.matrices)
            .map(|(a, b)| ndarray::concatenate![ndarray::Axis(1), a, b])
            .collect();
        self
    }
}

fn degree_schema(relations: &[CanonicalRelation]) -> Vec<String> {
    relations
        .iter()
        .flat_map(|rel| [format!("in:{rel}"), format!("out:{rel}")])
        .collect()
}

fn degree_features_impl(
    g: &HeteroMultigraph,
    relations: &[CanonicalRelation],
    column_of: impl Fn(&CanonicalRelation) -> Option<usize>,
) -> Result<FeatureSet, FeatureError> {
    let width = 2 * relations.len();
    let mut matrices: Vec<Array2<f64>> = (0..g.node_types().len())
        .map(|t| Array2::zeros((g.node_table(t).len(), width)))
        .collect();
    for (rel, list) in g.relations() {
        let col = 2 * column_of(rel)
            .ok_or_else(|| FeatureError::UnknownRelation { relation: rel.to_string() })?;
        let src_t = g.type_index(&rel.src_type).expect("relation source type") ;
        let dst_t = g.type_index(&rel.dst_type).expect("relation destination type");
        for &(s, d) in &list.endpoints {
            matrices[src_t][(s as usize, col + 1)] += 1.0; // out-degree
            matrices[dst_t][(d as usize, col)] += 1.0; // in-degree
        }
    }
    Ok(FeatureSet {
        node_types: g.node_types().to_vec(),
        schema: degree_schema(relations),
        matrices,
    })
}

/// Per-relation (in-degree, out-degree) counts in the graph's own relation
/// order; parallel edges count with multiplicity.
pub fn degree_features(g: &HeteroMultigraph) -> FeatureSet {
    let relations: Vec<CanonicalRelation> = g.relations().map(|(r, _)| r.clone()).collect();
    let index: std::collections::HashMap<&CanonicalRelation, usize> =
        relations.iter().enumerate().map(|(i, r)| (r, i)).collect();
    degree_features_impl(g, &relations, |r| index.get(r).copied())
        .expect("every graph relation indexes itself")
}

/// Degree counts with columns laid out by a dataset-wide schema, so feature
/// dimensions line up across graphs with differing relation sets. Relations
/// outside the schema are an error.
pub fn degree_features_for_schema(
    g: &HeteroMultigraph,
    schema: &DatasetSchema,
) -> Result<FeatureSet, FeatureError> {
    degree_features_impl(g, schema.relations(), |r| schema.index_of(r))
}

/// Settings for [`spectral_node_features_with`].
#[derive(Debug, Clone)]
pub struct SpectralConfig {
    /// Embedding dimension (smallest eigenpairs kept).
    pub k: usize,
    /// Interlayer coupling strength.
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Solve densely when the block-matrix dimension is at most this.
    pub dense_limit: usize,
    /// Seed for the eigensolver's starting block.
    pub seed: u64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            k: 16,
            gamma: 1.0,
            tol: 1e-6,
            max_iter: 200,
            dense_limit: 512,
            seed: 0x5eed,
        }
    }
}

/// One relation's Laplacian plus where its rows live in the global index.
struct Layer {
    matrix: SparseSymMatrix,
    global_rows: Vec<usize>,
}

fn type_offsets(g: &HeteroMultigraph) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(g.node_types().len());
    let mut acc = 0usize;
    for t in 0..g.node_types().len() {
        offsets.push(acc);
        acc += g.node_table(t).len();
    }
    offsets
}

fn layer_embeddings(g: &HeteroMultigraph) -> Result<Vec<Layer>, FeatureError> {
    let offsets = type_offsets(g);
    let rels: Vec<CanonicalRelation> = g.relations().map(|(r, _)| r.clone()).collect();
    par::map_indexed(rels.len(), |i| {
        normalized_laplacian(g, &rels[i]).map(|(matrix, mapping)| Layer {
            matrix,
            global_rows: mapping
                .iter()
                .map(|r| offsets[r.type_id as usize] + r.index as usize)
                .collect(),
        })
    })
    .into_iter()
    .collect()
}

/// Block-matrix product without materializing the whole matrix: per-layer
/// Laplacian products on the diagonal blocks plus γ-coupling between copies
/// of each node.
fn supra_apply(
    layers: &[Layer],
    n: usize,
    gamma: f64,
) -> impl Fn(&ArrayView2<'_, f64>) -> Array2<f64> + '_ {
    let m = layers.len();
    move |x: &ArrayView2<'_, f64>| {
        let q = x.ncols();
        let mut out = Array2::zeros((m * n, q));
        let products = par::map_indexed(m, |li| {
            let layer = &layers[li];
            let local = Array2::from_shape_fn((layer.global_rows.len(), q), |(i, c)| {
                x[(li * n + layer.global_rows[i], c)]
            });
            layer.matrix.matmat(&local.view())
        });
        for (li, product) in products.into_iter().enumerate() {
            for (i, &row) in layers[li].global_rows.iter().enumerate() {
                out.row_mut(li * n + row).assign(&product.row(i));
            }
        }
        if gamma != 0.0 && m > 1 {
            let mut sum = Array2::zeros((n, q));
            for li in 0..m {
                sum += &x.slice(s![li * n..(li + 1) * n, ..]);
            }
            for li in 0..m {
                let block = x.slice(s![li * n..(li + 1) * n, ..]);
                let mut target = out.slice_mut(s![li * n..(li + 1) * n, ..]);
                target += &((&sum - &block) * gamma);
            }
        }
        out
    }
}

fn materialize_supra(
    layers: &[Layer],
    n: usize,
    gamma: f64,
) -> Result<SparseSymMatrix, FeatureError> {
    let embedded: Vec<SparseSymMatrix> = layers
        .iter()
        .map(|layer| {
            SparseSymMatrix::from_triplets(
                n,
                layer
                    .matrix
                    .iter_upper()
                    .map(|(i, j, v)| (layer.global_rows[i], layer.global_rows[j], v)),
            )
        })
        .collect();
    build_block_matrix(&embedded, gamma)
}

/// Spectral embedding concatenated with degree features, using default
/// solver settings.
pub fn spectral_node_features(
    g: &HeteroMultigraph,
    k: usize,
    gamma: f64,
) -> Result<FeatureSet, FeatureError> {
    spectral_node_features_with(g, &SpectralConfig { k, gamma, ..SpectralConfig::default() })
}

pub fn spectral_node_features_with(
    g: &HeteroMultigraph,
    cfg: &SpectralConfig,
) -> Result<FeatureSet, FeatureError> {
    spectral_impl(g, cfg, None)
}

/// Schema-aware variant: the degree block uses dataset-wide columns.
pub fn spectral_node_features_for_schema(
    g: &HeteroMultigraph,
    schema: &DatasetSchema,
    cfg: &SpectralConfig,
) -> Result<FeatureSet, FeatureError> {
    spectral_impl(g, cfg, Some(schema))
}

fn spectral_impl(
    g: &HeteroMultigraph,
    cfg: &SpectralConfig,
    schema: Option<&DatasetSchema>,
) -> Result<FeatureSet, FeatureError> {
    let n = g.num_nodes();
    if cfg.k > n {
        return Err(FeatureError::InvalidBlock {
            detail: format!("embedding dimension {} exceeds node count {n}", cfg.k),
        });
    }
    let degrees = match schema {
        Some(schema) => degree_features_for_schema(g, schema)?,
        None => degree_features(g),
    };
    let m = g.num_relations();
    let spectral_rows = if m == 0 || cfg.k == 0 {
        Array2::zeros((n, cfg.k))
    } else {
        let layers = layer_embeddings(g)?;
        let dim = m * n;
        let vectors = if dim <= cfg.dense_limit {
            let supra = materialize_supra(&layers, n, cfg.gamma)?;
            dense::smallest_eigenpairs(&supra.to_dense(), cfg.k).1
        } else {
            // The block matrix is bounded below by −γ, so a +γ shift keeps
            // the operator PSD without changing eigenvectors.
            let shift = if m > 1 { cfg.gamma.abs() } else { 0.0 };
            let base = supra_apply(&layers, n, cfg.gamma);
            let apply = |x: &ArrayView2<'_, f64>| {
                let mut out = base(x);
                if shift != 0.0 {
                    out.scaled_add(shift, x);
                }
                out
            };
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
            let x0 = Array2::from_shape_fn((dim, cfg.k), |_| StandardNormal.sample(&mut rng));
            let result = lobpcg(apply, dim, cfg.k, x0, cfg.tol, cfg.max_iter, None)?;
            if !result.converged {
                log::warn!(
                    "spectral embedding stopped at {} iterations above tolerance \
                     (max residual {:.3e})",
                    result.iterations,
                    result.residual_norms.iter().cloned().fold(0.0, f64::max),
                );
            }
            result.eigenvectors
        };
        // Node feature = sum of that node's entries across layer copies.
        let mut rows = Array2::zeros((n, cfg.k));
        for li in 0..(vectors.nrows() / n) {
            rows += &vectors.slice(s![li * n..(li + 1) * n, ..]);
        }
        rows
    };

    let offsets = type_offsets(g);
    let spectral = FeatureSet {
        node_types: g.node_types().to_vec(),
        schema: (0..cfg.k).map(|j| format!("spectral:{j}")).collect(),
        matrices: (0..g.node_types().len())
            .map(|t| {
                let count = g.node_table(t).len();
                spectral_rows.slice(s![offsets[t]..offsets[t] + count, ..]).to_owned()
            })
            .collect(),
    };
    let out = degrees.hstack(spectral);
    if out.matrices.iter().any(|mat| mat.iter().any(|v| !v.is_finite())) {
        return Err(FeatureError::Breakdown {
            detail: "non-finite feature entries".to_string(),
        });
    }
    Ok(out)
}
