//! Feature-set export: a JSON object keyed by node type, and a compact
//! binary section carried inside the compressed graph format.

use ndarray::Array2;
use serde_json::{json, Map, Value};

use super::{FeatureError, FeatureSet};
use crate::graph::HeteroMultigraph;

/// `{"<type>": {"schema": [...], "rows": [[...]]}}` in type order.
pub fn features_to_json(fs: &FeatureSet) -> Vec<u8> {
    let mut root = Map::new();
    for (name, matrix) in fs.node_types.iter().zip(&fs.matrices) {
        let rows: Vec<Value> = matrix
            .rows()
            .into_iter()
            .map(|r| Value::Array(r.iter().map(|&v| json!(v)).collect()))
            .collect();
        root.insert(name.clone(), json!({ "schema": fs.schema, "rows": rows }));
    }
    let mut bytes = serde_json::to_vec(&Value::Object(root)).expect("feature JSON serializes");
    bytes.push(b'\n');
    bytes
}

fn check_alignment(g: &HeteroMultigraph, fs: &FeatureSet) -> Result<(), FeatureError> {
    if fs.node_types != g.node_types() {
        return Err(FeatureError::InvalidBlock {
            detail: "feature set and graph disagree on node types".to_string(),
        });
    }
    for (t, matrix) in fs.matrices.iter().enumerate() {
        if matrix.nrows() != g.node_table(t).len() {
            return Err(FeatureError::DimensionMismatch {
                expected: g.node_table(t).len(),
                found: matrix.nrows(),
            });
        }
        if matrix.ncols() != fs.schema.len() {
            return Err(FeatureError::DimensionMismatch {
                expected: fs.schema.len(),
                found: matrix.ncols(),
            });
        }
    }
    Ok(())
}

// Blob layout: u32 column count, per column u32 length + UTF-8 descriptor,
// then per node type (graph order) u32 row count + rows×cols little-endian
// f64 values.
fn encode_blob(fs: &FeatureSet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(fs.schema.len() as u32).to_le_bytes());
    for col in &fs.schema {
        out.extend_from_slice(&(col.len() as u32).to_le_bytes());
        out.extend_from_slice(col.as_bytes());
    }
    for matrix in &fs.matrices {
        out.extend_from_slice(&(matrix.nrows() as u32).to_le_bytes());
        for v in matrix.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn blob_err(detail: impl Into<String>) -> FeatureError {
    FeatureError::InvalidBlock { detail: format!("feature section: {}", detail.into()) }
}

struct BlobReader<'a> {
    blob: &'a [u8],
    pos: usize,
}

impl<'a> BlobReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FeatureError> {
        if self.blob.len() - self.pos < n {
            return Err(blob_err(format!("needed {n} bytes at offset {}", self.pos)));
        }
        let s = &self.blob[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FeatureError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4-byte slice")))
    }
}

fn decode_blob(blob: &[u8], g: &HeteroMultigraph) -> Result<FeatureSet, FeatureError> {
    let mut r = BlobReader { blob, pos: 0 };
    let cols = r.u32()? as usize;
    if cols > blob.len() {
        return Err(blob_err(format!("implausible column count {cols}")));
    }
    let mut schema = Vec::with_capacity(cols);
    for _ in 0..cols {
        let len = r.u32()? as usize;
        let raw = r.take(len)?;
        schema.push(
            std::str::from_utf8(raw).map_err(|_| blob_err("descriptor not UTF-8"))?.to_string(),
        );
    }
    let mut matrices = Vec::with_capacity(g.node_types().len());
    for t in 0..g.node_types().len() {
        let rows = r.u32()? as usize;
        if rows != g.node_table(t).len() {
            return Err(FeatureError::DimensionMismatch {
                expected: g.node_table(t).len(),
                found: rows,
            });
        }
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            values.push(f64::from_le_bytes(r.take(8)?.try_into().expect("8-byte slice")));
        }
        matrices.push(
            Array2::from_shape_vec((rows, cols), values).expect("row-major feature block"),
        );
    }
    if r.pos != blob.len() {
        return Err(blob_err("trailing bytes"));
    }
    Ok(FeatureSet { node_types: g.node_types().to_vec(), schema, matrices })
}

/// Compressed binary graph with the feature matrices embedded.
pub fn write_graph_with_features(
    g: &HeteroMultigraph,
    fs: &FeatureSet,
) -> Result<Vec<u8>, FeatureError> {
    check_alignment(g, fs)?;
    Ok(g.serialize_with_blob(&encode_blob(fs)))
}

/// Read a binary graph, recovering embedded features when present.
pub fn read_graph_with_features(
    bytes: &[u8],
) -> Result<(HeteroMultigraph, Option<FeatureSet>), FeatureError> {
    let (g, blob) = HeteroMultigraph::deserialize_with_blob(bytes)?;
    let features = match blob {
        None => None,
        Some(blob) => Some(decode_blob(&blob, &g)?),
    };
    Ok((g, features))
}
