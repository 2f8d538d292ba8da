//! Model persistence: `RGCN` magic, version byte, length-prefixed JSON
//! header (schema, dims, aggregation), then every parameter row-major as
//! little-endian f64. Reload is bit-exact.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Aggregation, GnnError, RGCNModel, Readout};
use crate::graph::DatasetSchema;

const MAGIC: &[u8; 4] = b"RGCN";
const VERSION: u8 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    schema: DatasetSchema,
    feature_dim: usize,
    hidden_dim: usize,
    num_layers: usize,
    aggregation: Aggregation,
    readout: Readout,
    dropout_rate: f64,
}

fn corrupt(detail: impl Into<String>) -> GnnError {
    GnnError::CheckpointCorrupt { detail: detail.into() }
}

impl RGCNModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            schema: self.schema.clone(),
            feature_dim: self.feature_dim,
            hidden_dim: self.hidden_dim,
            num_layers: self.layers.len(),
            aggregation: self.aggregation,
            readout: self.readout,
            dropout_rate: self.dropout_rate,
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for param in self.parameters() {
            for &v in param.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GnnError> {
        if bytes.len() < MAGIC.len() + 1 + 4 {
            return Err(corrupt("shorter than fixed header"));
        }
        if &bytes[..4] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        if bytes[4] != VERSION {
            return Err(corrupt(format!("unsupported version {}", bytes[4])));
        }
        let header_len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let rest = &bytes[9..];
        if rest.len() < header_len {
            return Err(corrupt("truncated header"));
        }
        let header: Header = serde_json::from_slice(&rest[..header_len])
            .map_err(|e| corrupt(format!("header: {e}")))?;
        if header.feature_dim == 0 || header.hidden_dim == 0 || header.num_layers == 0 {
            return Err(corrupt("zero dimension in header"));
        }
        if !(0.0..1.0).contains(&header.dropout_rate) {
            return Err(corrupt("dropout rate outside [0, 1)"));
        }
        // Reconstructing through the sorting constructor keeps index lookups
        // valid even if the stored list was edited.
        let schema = DatasetSchema::from_relations(header.schema.relations().to_vec());
        if schema.len() != header.schema.len() {
            return Err(corrupt("duplicate relations in schema"));
        }
        let mut model = RGCNModel::init(
            schema,
            header.feature_dim,
            header.hidden_dim,
            header.num_layers,
            header.aggregation,
            0,
        )
        .with_readout(header.readout)
        .with_dropout(header.dropout_rate);

        let blob = &rest[header_len..];
        let expected: usize = model.parameters().iter().map(|p| p.len()).sum();
        if blob.len() != expected * 8 {
            return Err(corrupt(format!(
                "parameter blob holds {} bytes, dimensions require {}",
                blob.len(),
                expected * 8
            )));
        }
        let mut offset = 0;
        for param in model.parameters_mut() {
            let fresh = Array2::from_shape_vec(
                param.raw_dim(),
                blob[offset..offset + param.len() * 8]
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            )
            .expect("shape matches length");
            offset += param.len() * 8;
            *param = fresh;
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), GnnError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, GnnError> {
        RGCNModel::from_bytes(&std::fs::read(path)?)
    }
}
