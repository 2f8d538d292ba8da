//! Relational graph convolutional network for whole-graph binary
//! classification, with exact reverse-mode gradients.
//!
//! Per layer, `h_v ← σ( Σ_r Σ_{u∈N_r(v)} c⁻¹ W_rᵀ h_u + W_0ᵀ h_v )` with
//! c = 1 under SUM aggregation and c = |N_r(v)| under MEAN; messages flow
//! along stored edge direction. A readout pools final node states over all
//! nodes and an affine classifier yields two logits. All math is f64 and the
//! layer transform is applied before aggregation (the two orders are equal
//! by linearity; transforming first touches each edge only `out_dim` times).

mod adam;
mod checkpoint;
mod encode;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use encode::{stack_features, GraphEncoding};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureSet;
use crate::graph::{DatasetSchema, HeteroMultigraph, Label};

pub const DEFAULT_HIDDEN_DIM: usize = 256;
pub const DEFAULT_DROPOUT: f64 = 0.5;
pub const DEFAULT_NUM_LAYERS: usize = 2;

#[derive(Debug, Error)]
pub enum GnnError {
    #[error("schema mismatch: {detail}")]
    SchemaMismatch { detail: String },
    #[error("non-finite loss: activations overflowed")]
    NonFiniteLoss,
    #[error("corrupt checkpoint: {detail}")]
    CheckpointCorrupt { detail: String },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Sum,
    Mean,
}

impl std::str::FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sum" => Ok(Aggregation::Sum),
            "mean" => Ok(Aggregation::Mean),
            other => Err(format!("unknown aggregation `{other}` (expected sum|mean)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Readout {
    #[serde(rename = "sum")]
    SumPool,
    #[serde(rename = "mean")]
    MeanPool,
}

/// Whether dropout is live; the seed fixes the masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { dropout_seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RGCNLayer {
    /// One weight per schema relation, aligned with schema order.
    pub rel_weights: Vec<Array2<f64>>,
    pub self_weight: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RGCNModel {
    schema: DatasetSchema,
    feature_dim: usize,
    hidden_dim: usize,
    aggregation: Aggregation,
    readout: Readout,
    dropout_rate: f64,
    layers: Vec<RGCNLayer>,
    classifier_w: Array2<f64>,
    classifier_b: Array2<f64>,
}

impl RGCNModel {
    /// Glorot-uniform initialization, deterministic in `seed`. Draw order:
    /// per layer the relation weights in schema order then the self weight,
    /// then the classifier; biases start at zero.
    pub fn init(
        schema: DatasetSchema,
        feature_dim: usize,
        hidden_dim: usize,
        num_layers: usize,
        aggregation: Aggregation,
        seed: u64,
    ) -> Self {
        assert!(feature_dim >= 1 && hidden_dim >= 1 && num_layers >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut glorot = |rows: usize, cols: usize| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng.gen_range(-limit..limit)).collect();
            Array2::from_shape_vec((rows, cols), data).expect("shape matches draw count")
        };
        let mut layers = Vec::with_capacity(num_layers);
        for l in 0..num_layers {
            let in_dim = if l == 0 { feature_dim } else { hidden_dim };
            let rel_weights =
                (0..schema.len()).map(|_| glorot(in_dim, hidden_dim)).collect();
            let self_weight = glorot(in_dim, hidden_dim);
            layers.push(RGCNLayer { rel_weights, self_weight });
        }
        let classifier_w = glorot(hidden_dim, 2);
        let classifier_b = Array2::zeros((1, 2));
        RGCNModel {
            schema,
            feature_dim,
            hidden_dim,
            aggregation,
            readout: Readout::SumPool,
            dropout_rate: DEFAULT_DROPOUT,
            layers,
            classifier_w,
            classifier_b,
        }
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        assert!((0.0..1.0).contains(&rate));
        self.dropout_rate = rate;
        self
    }

    pub fn with_readout(mut self, readout: Readout) -> Self {
        self.readout = readout;
        self
    }

    pub fn schema(&self) -> &DatasetSchema {
        &self.schema
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn aggregation(&self) -> Aggregation {
        self.aggregation
    }

    pub fn readout(&self) -> Readout {
        self.readout
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    /// All parameter matrices in canonical order: per layer the relation
    /// weights then the self weight, then classifier weight and bias.
    pub fn parameters(&self) -> Vec<&Array2<f64>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend(layer.rel_weights.iter());
            out.push(&layer.self_weight);
        }
        out.push(&self.classifier_w);
        out.push(&self.classifier_b);
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.extend(layer.rel_weights.iter_mut());
            out.push(&mut layer.self_weight);
        }
        out.push(&mut self.classifier_w);
        out.push(&mut self.classifier_b);
        out
    }

    pub fn encode(&self, g: &HeteroMultigraph) -> Result<GraphEncoding, GnnError> {
        GraphEncoding::build(g, &self.schema, self.aggregation)
    }

    pub fn forward(
        &self,
        g: &HeteroMultigraph,
        feats: &FeatureSet,
        mode: Mode,
    ) -> Result<([f64; 2], ForwardCache), GnnError> {
        let enc = self.encode(g)?;
        let x = stack_features(g, feats)?;
        self.forward_encoded(&enc, &x, mode)
    }

    /// Forward pass over a pre-built encoding. Deterministic given
    /// (parameters, encoding, features, mode).
    pub fn forward_encoded(
        &self,
        enc: &GraphEncoding,
        x: &Array2<f64>,
        mode: Mode,
    ) -> Result<([f64; 2], ForwardCache), GnnError> {
        if x.ncols() != self.feature_dim {
            return Err(GnnError::SchemaMismatch {
                detail: format!(
                    "feature dim {} does not match model dim {}",
                    x.ncols(),
                    self.feature_dim
                ),
            });
        }
        if x.nrows() != enc.num_nodes {
            return Err(GnnError::SchemaMismatch {
                detail: format!(
                    "{} feature rows for {} nodes",
                    x.nrows(),
                    enc.num_nodes
                ),
            });
        }
        let n = enc.num_nodes;
        let mut dropout_rng = match mode {
            Mode::Train { dropout_seed } if self.dropout_rate > 0.0 => {
                Some(ChaCha8Rng::seed_from_u64(dropout_seed))
            }
            _ => None,
        };
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            let mut z = h.dot(&layer.self_weight);
            for rel in &enc.relations {
                let m = h.dot(&layer.rel_weights[rel.schema_idx]);
                scatter_add(&mut z, &m, &rel.pairs, rel.edge_scale.as_deref());
            }
            z.mapv_inplace(|v| v.max(0.0));
            let mask = dropout_rng.as_mut().map(|rng| {
                let keep = 1.0 - self.dropout_rate;
                let data = (0..z.len())
                    .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect();
                Array2::from_shape_vec(z.raw_dim(), data).expect("mask shape")
            });
            h = match &mask {
                Some(m) => &z * m,
                None => z,
            };
            layers.push(LayerCache { fed: h.clone(), mask });
        }
        let mut pooled: Array1<f64> = h.sum_axis(ndarray::Axis(0));
        if self.readout == Readout::MeanPool && n > 0 {
            pooled /= n as f64;
        }
        let raw = pooled.dot(&self.classifier_w);
        let logits = [
            raw[0] + self.classifier_b[(0, 0)],
            raw[1] + self.classifier_b[(0, 1)],
        ];
        Ok((logits, ForwardCache { layers, pooled }))
    }

    pub fn loss_and_backward(
        &self,
        g: &HeteroMultigraph,
        feats: &FeatureSet,
        label: Label,
        mode: Mode,
    ) -> Result<(f64, GradientTape), GnnError> {
        let enc = self.encode(g)?;
        let x = stack_features(g, feats)?;
        self.loss_and_backward_encoded(&enc, &x, label, mode)
    }

    /// Cross-entropy loss plus exact gradients for every parameter.
    pub fn loss_and_backward_encoded(
        &self,
        enc: &GraphEncoding,
        x: &Array2<f64>,
        label: Label,
        mode: Mode,
    ) -> Result<(f64, GradientTape), GnnError> {
        let (logits, cache) = self.forward_encoded(enc, x, mode)?;
        let target = (label == Label::Attack) as usize;
        let m = logits[0].max(logits[1]);
        let z = (logits[0] - m).exp() + (logits[1] - m).exp();
        let loss = z.ln() + m - logits[target];
        if !loss.is_finite() {
            return Err(GnnError::NonFiniteLoss);
        }
        let p = [(logits[0] - m).exp() / z, (logits[1] - m).exp() / z];
        let dlogits = Array1::from_vec(vec![
            p[0] - (target == 0) as usize as f64,
            p[1] - (target == 1) as usize as f64,
        ]);

        let mut tape = GradientTape::zeros(self);
        for j in 0..2 {
            tape.classifier_b[(0, j)] = dlogits[j];
            for i in 0..self.hidden_dim {
                tape.classifier_w[(i, j)] = cache.pooled[i] * dlogits[j];
            }
        }
        let dpool = self.classifier_w.dot(&dlogits);
        let n = enc.num_nodes;
        let scale = match self.readout {
            Readout::SumPool => 1.0,
            Readout::MeanPool => {
                if n > 0 {
                    1.0 / n as f64
                } else {
                    0.0
                }
            }
        };
        let mut dh = Array2::zeros((n, self.hidden_dim));
        for mut row in dh.rows_mut() {
            for (v, &g) in row.iter_mut().zip(dpool.iter()) {
                *v = g * scale;
            }
        }

        let mut scratch: Array2<f64> = Array2::zeros((n, self.hidden_dim));
        for l in (0..self.layers.len()).rev() {
            let LayerCache { fed, mask } = &cache.layers[l];
            // d/dz of relu-then-dropout: the mask already zeroes dropped
            // units, and fed > 0 identifies active rectifier units there.
            let mut dz = dh;
            match mask {
                Some(m) => {
                    ndarray::Zip::from(&mut dz).and(fed).and(m).for_each(|d, &f, &mv| {
                        *d = if f > 0.0 { *d * mv } else { 0.0 }
                    });
                }
                None => {
                    ndarray::Zip::from(&mut dz).and(fed).for_each(|d, &f| {
                        if f <= 0.0 {
                            *d = 0.0
                        }
                    });
                }
            }
            let input = if l == 0 { x } else { &cache.layers[l - 1].fed };
            let layer = &self.layers[l];
            let grad = &mut tape.layers[l];
            grad.self_weight += &input.t().dot(&dz);
            // Nothing consumes gradients w.r.t. the raw input features, so
            // skip the propagation matmuls on the first layer.
            let mut dh_prev = if l > 0 {
                dz.dot(&layer.self_weight.t())
            } else {
                Array2::zeros((0, 0))
            };
            for rel in &enc.relations {
                scratch.fill(0.0);
                scatter_add_rev(&mut scratch, &dz, &rel.pairs, rel.edge_scale.as_deref());
                grad.rel_weights[rel.schema_idx] += &input.t().dot(&scratch);
                if l > 0 {
                    dh_prev += &scratch.dot(&layer.rel_weights[rel.schema_idx].t());
                }
            }
            dh = dh_prev;
        }
        Ok((loss, tape))
    }
}

#[derive(Debug)]
struct LayerCache {
    /// Post-rectifier, post-dropout activations the next stage consumed.
    fed: Array2<f64>,
    /// Inverted-dropout mask (0 or 1/keep); `None` in eval mode.
    mask: Option<Array2<f64>>,
}

/// Activations retained by a forward pass; consumed by backward.
#[derive(Debug)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    pooled: Array1<f64>,
}

/// Parameter gradients, shape-congruent with the model.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTape {
    pub layers: Vec<LayerGrad>,
    pub classifier_w: Array2<f64>,
    pub classifier_b: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub rel_weights: Vec<Array2<f64>>,
    pub self_weight: Array2<f64>,
}

impl GradientTape {
    pub fn zeros(model: &RGCNModel) -> Self {
        let layers = model
            .layers
            .iter()
            .map(|l| LayerGrad {
                rel_weights: l.rel_weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
                self_weight: Array2::zeros(l.self_weight.raw_dim()),
            })
            .collect();
        GradientTape {
            layers,
            classifier_w: Array2::zeros(model.classifier_w.raw_dim()),
            classifier_b: Array2::zeros(model.classifier_b.raw_dim()),
        }
    }

    pub fn parameters(&self) -> Vec<&Array2<f64>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend(layer.rel_weights.iter());
            out.push(&layer.self_weight);
        }
        out.push(&self.classifier_w);
        out.push(&self.classifier_b);
        out
    }

    /// Elementwise sum, for averaging gradients over a batch.
    pub fn accumulate(&mut self, other: &GradientTape) {
        for (mine, theirs) in self.parameters_mut_internal().into_iter().zip(other.parameters()) {
            *mine += theirs;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for p in self.parameters_mut_internal() {
            *p *= factor;
        }
    }

    fn parameters_mut_internal(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.extend(layer.rel_weights.iter_mut());
            out.push(&mut layer.self_weight);
        }
        out.push(&mut self.classifier_w);
        out.push(&mut self.classifier_b);
        out
    }
}

/// `acc[dst] += m[src] (· scale)` over all pairs; rows are contiguous.
fn scatter_add(
    acc: &mut Array2<f64>,
    m: &Array2<f64>,
    pairs: &[(u32, u32)],
    scale: Option<&[f64]>,
) {
    let d = acc.ncols();
    let a = acc.as_slice_mut().expect("standard layout");
    let ms = m.as_slice().expect("standard layout");
    match scale {
        None => {
            for &(s, t) in pairs {
                let (s, t) = (s as usize * d, t as usize * d);
                for j in 0..d {
                    a[t + j] += ms[s + j];
                }
            }
        }
        Some(sc) => {
            for (&(s, t), &f) in pairs.iter().zip(sc) {
                let (s, t) = (s as usize * d, t as usize * d);
                for j in 0..d {
                    a[t + j] += ms[s + j] * f;
                }
            }
        }
    }
}

/// Adjoint of `scatter_add`: `acc[src] += m[dst] (· scale)`.
fn scatter_add_rev(
    acc: &mut Array2<f64>,
    m: &Array2<f64>,
    pairs: &[(u32, u32)],
    scale: Option<&[f64]>,
) {
    let d = acc.ncols();
    let a = acc.as_slice_mut().expect("standard layout");
    let ms = m.as_slice().expect("standard layout");
    match scale {
        None => {
            for &(s, t) in pairs {
                let (s, t) = (s as usize * d, t as usize * d);
                for j in 0..d {
                    a[s + j] += ms[t + j];
                }
            }
        }
        Some(sc) => {
            for (&(s, t), &f) in pairs.iter().zip(sc) {
                let (s, t) = (s as usize * d, t as usize * d);
                for j in 0..d {
                    a[s + j] += ms[t + j] * f;
                }
            }
        }
    }
}
