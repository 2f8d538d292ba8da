//! Symmetric sparse matrices, per-relation normalized Laplacians, and the
//! multilayer block matrix.

use std::collections::{HashMap, HashSet};

use ndarray::{Array1, Array2, ArrayView2};

use super::FeatureError;
use crate::graph::{CanonicalRelation, HeteroMultigraph, NodeRef};
use crate::par;

/// Symmetric matrix in compressed-row form; both triangles are stored so a
/// row scan covers every incident entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    pub fn zeros(n: usize) -> Self {
        SparseSymMatrix { n, row_ptr: vec![0; n + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    /// Build from (i, j, value) triplets. Each unordered pair is given once
    /// (either orientation); duplicates accumulate. Symmetry holds by
    /// construction because every off-diagonal entry is mirrored.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut cells: HashMap<(u32, u32), f64> = HashMap::new();
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) outside dimension {n}");
            if v == 0.0 {
                continue;
            }
            let key = (i.min(j) as u32, i.max(j) as u32);
            *cells.entry(key).or_insert(0.0) += v;
        }
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for (&(i, j), &v) in &cells {
            rows[i as usize].push((j, v));
            if i != j {
                rows[j as usize].push((i, v));
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        SparseSymMatrix { n, row_ptr, col_idx, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of the upper triangle (i ≤ j), row-major.
    pub fn iter_upper(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).filter_map(move |e| {
                let j = self.col_idx[e] as usize;
                (j >= i).then_some((i, j, self.values[e]))
            })
        })
    }

    fn fill_row(&self, i: usize, x: &ArrayView2<'_, f64>, out: &mut [f64]) {
        for e in self.row_ptr[i]..self.row_ptr[i + 1] {
            let j = self.col_idx[e] as usize;
            let v = self.values[e];
            for (c, slot) in out.iter_mut().enumerate() {
                *slot += v * x[(j, c)];
            }
        }
    }

    /// Dense block product A·X. Pure; rows are computed independently.
    pub fn matmat(&self, x: &ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.n, "operand row count must match dimension");
        let k = x.ncols();
        let mut out = vec![0.0; self.n * k];
        par::for_each_chunk(&mut out, k.max(1), |i, row| self.fill_row(i, x, row));
        Array2::from_shape_vec((self.n, k), out).expect("shape from row-major fill")
    }

    pub fn matvec(&self, x: &Array1<f64>) -> Array1<f64> {
        let x2 = x.view().insert_axis(ndarray::Axis(1));
        self.matmat(&x2).index_axis_move(ndarray::Axis(1), 0)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for e in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[(i, self.col_idx[e] as usize)] = self.values[e];
            }
        }
        out
    }
}

/// Normalized Laplacian L = I − D^(−1/2) A D^(−1/2) of one relation.
///
/// A is the simple undirected adjacency over the union of the relation's
/// endpoint type populations: direction dropped, parallel edges collapsed,
/// self-loops dropped. Isolated nodes get an all-zero row (no unit diagonal),
/// which keeps L positive semidefinite and keeps padding rows inert inside
/// the block matrix. The returned mapping gives each matrix row's graph node.
pub fn normalized_laplacian(
    g: &HeteroMultigraph,
    rel: &CanonicalRelation,
) -> Result<(SparseSymMatrix, Vec<NodeRef>), FeatureError> {
    let list = g
        .relation(rel)
        .ok_or_else(|| FeatureError::UnknownRelation { relation: rel.to_string() })?;
    let src_t = g.type_index(&rel.src_type).expect("relation source type exists") as u32;
    let dst_t = g.type_index(&rel.dst_type).expect("relation destination type exists") as u32;

    let n_src = g.node_table(src_t as usize).len();
    let mut mapping: Vec<NodeRef> =
        (0..n_src as u32).map(|index| NodeRef { type_id: src_t, index }).collect();
    if dst_t != src_t {
        mapping.extend(
            (0..g.node_table(dst_t as usize).len() as u32)
                .map(|index| NodeRef { type_id: dst_t, index }),
        );
    }
    let n = mapping.len();
    let dst_base = if dst_t == src_t { 0 } else { n_src };

    let mut pairs: HashSet<(u32, u32)> = HashSet::new();
    for &(s, d) in &list.endpoints {
        let a = s;
        let b = dst_base as u32 + d;
        if a != b {
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    let mut degree = vec![0u32; n];
    for &(a, b) in &pairs {
        degree[a as usize] += 1;
        degree[b as usize] += 1;
    }
    let diag = (0..n).filter(|&i| degree[i] > 0).map(|i| (i, i, 1.0));
    let mut pairs: Vec<(u32, u32)> = pairs.into_iter().collect();
    pairs.sort_unstable();
    let off = pairs.iter().map(|&(a, b)| {
        let w = -1.0 / ((degree[a as usize] as f64) * (degree[b as usize] as f64)).sqrt();
        (a as usize, b as usize, w)
    });
    Ok((SparseSymMatrix::from_triplets(n, diag.chain(off)), mapping))
}

/// Assemble the multilayer block matrix: layer matrices on the diagonal
/// blocks, γ·I coupling copies of each node on every off-diagonal block.
/// All layers must share one global node index space.
pub fn build_block_matrix(
    layers: &[SparseSymMatrix],
    gamma: f64,
) -> Result<SparseSymMatrix, FeatureError> {
    let m = layers.len();
    let Some(first) = layers.first() else {
        return Ok(SparseSymMatrix::zeros(0));
    };
    let n = first.dim();
    for layer in layers {
        if layer.dim() != n {
            return Err(FeatureError::DimensionMismatch { expected: n, found: layer.dim() });
        }
    }
    if m == 1 {
        return Ok(first.clone());
    }
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for (li, layer) in layers.iter().enumerate() {
        let base = li * n;
        triplets.extend(layer.iter_upper().map(|(i, j, v)| (base + i, base + j, v)));
    }
    if gamma != 0.0 {
        for i in 0..m {
            for j in (i + 1)..m {
                triplets.extend((0..n).map(|v| (i * n + v, j * n + v, gamma)));
            }
        }
    }
    Ok(SparseSymMatrix::from_triplets(m * n, triplets))
}
