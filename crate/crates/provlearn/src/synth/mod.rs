//! Seeded generator of labeled synthetic provenance graphs calibrated to
//! published per-scenario statistics.
//!
//! Each scenario builds a web-serving backbone — task / process-memory /
//! path / socket / inode clusters wired by a fixed relation vocabulary —
//! and, for the attack class, injects a class-distinguishing motif: extra
//! relation types plus a local perturbation of the edge mix. Brute-force
//! attacks are the exception, reducing to two socket-derivation chains.
//!
//! Determinism: a [`ScenarioSpec`] fully determines its graph. Dataset
//! generation derives the seed of graph `i` as element `i` of the splitmix64
//! stream seeded with the dataset seed (see [`graph_seed`]), so graphs can be
//! produced independently in any order.
//!
//! On-disk layout produced by [`export_dataset`]:
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/<vector>/<class>/<index>.pgrf
//! ```
//!
//! with the manifest schema
//!
//! ```json
//! {
//!   "vector": "brute-force",
//!   "seed": 1,
//!   "graphs": [
//!     {"path": "brute-force/benign/0.pgrf", "label": "benign",
//!      "nodes": 21391, "edges": 514200, "relations": 30}
//!   ]
//! }
//! ```
//!
//! [`load_dataset`] recomputes each graph's statistics and rejects any
//! disagreement with the manifest.

mod build;
mod profile;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, GraphFormat, HeteroMultigraph, Label};
use crate::par;

/// The six scenario classes, named as in the evaluation datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackVector {
    XssStored,
    XssReflected,
    XssDom,
    ClInjection,
    SqlInjection,
    BruteForce,
}

impl AttackVector {
    pub const ALL: [AttackVector; 6] = [
        AttackVector::XssStored,
        AttackVector::XssReflected,
        AttackVector::XssDom,
        AttackVector::ClInjection,
        AttackVector::SqlInjection,
        AttackVector::BruteForce,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttackVector::XssStored => "xss-stored",
            AttackVector::XssReflected => "xss-reflected",
            AttackVector::XssDom => "xss-dom",
            AttackVector::ClInjection => "cl-injection",
            AttackVector::SqlInjection => "sql-injection",
            AttackVector::BruteForce => "brute-force",
        }
    }
}

impl fmt::Display for AttackVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackVector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttackVector::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown attack vector `{s}`"))
    }
}

/// Everything that determines one generated graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioSpec {
    pub vector: AttackVector,
    pub class_label: Label,
    pub seed: u64,
    /// Relative half-width of the uniform draw around each size target;
    /// must lie in [0, 0.5].
    pub jitter: f64,
    /// Multiplier on the published node/edge targets, for reduced-size runs.
    /// Relation-count targets are never scaled.
    pub scale: f64,
}

impl ScenarioSpec {
    pub fn new(vector: AttackVector, class_label: Label, seed: u64) -> Self {
        ScenarioSpec { vector, class_label, seed, jitter: 0.10, scale: 1.0 }
    }
}

/// Labeled graphs of one scenario: benign block first, then attacks.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub vector: AttackVector,
    pub seed: u64,
    pub graphs: Vec<HeteroMultigraph>,
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed manifest: {detail}")]
    MalformedManifest { detail: String },
    #[error("manifest mismatch at {path}: {detail}")]
    ManifestMismatch { path: String, detail: String },
    #[error("graph {index} carries no label")]
    UnlabeledGraph { index: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Element `index` of the splitmix64 stream seeded with `dataset_seed` — the
/// per-graph seed-splitting rule.
pub fn graph_seed(dataset_seed: u64, index: u64) -> u64 {
    let z = dataset_seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    let z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    let z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generate one labeled graph. Same spec, same graph, byte for byte.
pub fn generate_scenario(spec: ScenarioSpec) -> HeteroMultigraph {
    assert!(
        (0.0..=0.5).contains(&spec.jitter),
        "jitter {} outside [0, 0.5]",
        spec.jitter
    );
    assert!(spec.scale > 0.0, "scale must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut g = if spec.vector == AttackVector::BruteForce && spec.class_label == Label::Attack {
        build::socket_chains(&mut rng, &spec)
    } else {
        build::backbone(&mut rng, &spec)
    };
    g.label = Some(spec.class_label);
    g.scenario = Some(spec.vector.as_str().to_string());
    g
}

/// Size parameters shared by every graph of a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenOptions {
    pub jitter: f64,
    pub scale: f64,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions { jitter: 0.10, scale: 1.0 }
    }
}

pub fn generate_dataset(
    vector: AttackVector,
    n_benign: usize,
    n_attack: usize,
    seed: u64,
) -> Dataset {
    generate_dataset_with(vector, n_benign, n_attack, seed, GenOptions::default())
}

pub fn generate_dataset_with(
    vector: AttackVector,
    n_benign: usize,
    n_attack: usize,
    seed: u64,
    opts: GenOptions,
) -> Dataset {
    let total = n_benign + n_attack;
    let specs: Vec<ScenarioSpec> = (0..total)
        .map(|i| ScenarioSpec {
            vector,
            class_label: if i < n_benign { Label::Benign } else { Label::Attack },
            seed: graph_seed(seed, i as u64),
            jitter: opts.jitter,
            scale: opts.scale,
        })
        .collect();
    let specs = &specs;
    let graphs = par::map_indexed(total, |i| generate_scenario(specs[i]));
    Dataset { vector, seed, graphs }
}

const MANIFEST: &str = "manifest.json";

#[derive(Serialize, Deserialize)]
struct Manifest {
    vector: AttackVector,
    seed: u64,
    graphs: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    path: String,
    label: Label,
    nodes: u64,
    edges: u64,
    relations: u64,
}

/// Write one `.pgrf` file per graph plus `manifest.json` under `dir`.
pub fn export_dataset(ds: &Dataset, dir: &Path) -> Result<(), SynthError> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(ds.graphs.len());
    let mut per_class = [0usize; 2];
    for (index, g) in ds.graphs.iter().enumerate() {
        let label = g.label.ok_or(SynthError::UnlabeledGraph { index })?;
        let class_index = per_class[(label == Label::Attack) as usize];
        per_class[(label == Label::Attack) as usize] += 1;
        let rel_path = format!("{}/{}/{}.pgrf", ds.vector, label, class_index);
        let full = dir.join(&rel_path);
        fs::create_dir_all(full.parent().expect("per-class directory"))?;
        fs::write(&full, g.serialize(GraphFormat::BinaryCompressed))?;
        let stats = g.stats();
        entries.push(ManifestEntry {
            path: rel_path,
            label,
            nodes: stats.num_nodes as u64,
            edges: stats.num_edges as u64,
            relations: stats.num_relation_types as u64,
        });
    }
    let manifest = Manifest { vector: ds.vector, seed: ds.seed, graphs: entries };
    let mut body = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    body.push(b'\n');
    fs::write(dir.join(MANIFEST), body)?;
    Ok(())
}

/// Read a directory written by [`export_dataset`], verifying every graph
/// against its manifest entry.
pub fn load_dataset(dir: &Path) -> Result<Dataset, SynthError> {
    let raw = fs::read(dir.join(MANIFEST))?;
    let manifest: Manifest = serde_json::from_slice(&raw)
        .map_err(|e| SynthError::MalformedManifest { detail: e.to_string() })?;
    let mut graphs = Vec::with_capacity(manifest.graphs.len());
    for entry in &manifest.graphs {
        let bytes = fs::read(dir.join(&entry.path))?;
        let g = HeteroMultigraph::deserialize(&bytes)?;
        let stats = g.stats();
        let found = (
            stats.num_nodes as u64,
            stats.num_edges as u64,
            stats.num_relation_types as u64,
        );
        let expected = (entry.nodes, entry.edges, entry.relations);
        if found != expected {
            return Err(SynthError::ManifestMismatch {
                path: entry.path.clone(),
                detail: format!(
                    "stats (nodes, edges, relations): manifest {expected:?}, recomputed {found:?}"
                ),
            });
        }
        if g.label != Some(entry.label) {
            return Err(SynthError::ManifestMismatch {
                path: entry.path.clone(),
                detail: format!("label: manifest {}, graph {:?}", entry.label, g.label),
            });
        }
        graphs.push(g);
    }
    Ok(Dataset { vector: manifest.vector, seed: manifest.seed, graphs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CanonicalRelation;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn relation_set(g: &HeteroMultigraph) -> HashSet<CanonicalRelation> {
        g.relations().map(|(r, _)| r.clone()).collect()
    }

    fn small(scale: f64) -> GenOptions {
        GenOptions { scale, ..GenOptions::default() }
    }

    #[test]
    fn splitmix_reference_stream() {
        // First outputs of the splitmix64 stream from seed 0.
        assert_eq!(graph_seed(0, 0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(graph_seed(0, 1), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(graph_seed(0, 2), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn brute_force_attack_is_socket_chains() {
        let g = generate_scenario(ScenarioSpec::new(
            AttackVector::BruteForce,
            Label::Attack,
            7,
        ));
        let stats = g.stats();
        assert_eq!(stats.num_relation_types, 1);
        let (rel, _) = g.relations().next().unwrap();
        assert_eq!(rel.to_string(), "(socket, WasDerivedFrom, socket)");
        assert!((stats.num_nodes as f64 - 418.0).abs() <= 42.0, "{}", stats.num_nodes);
        assert_eq!(stats.num_edges, stats.num_nodes - 2);
    }

    #[test]
    fn stored_benign_hits_published_row() {
        let g = generate_scenario(ScenarioSpec::new(AttackVector::XssStored, Label::Benign, 7));
        let stats = g.stats();
        assert!((stats.num_nodes as f64 - 19_436.0).abs() <= 1_944.0, "{}", stats.num_nodes);
        assert!((stats.num_edges as f64 - 463_682.0).abs() <= 46_369.0, "{}", stats.num_edges);
        assert!((29..=31).contains(&stats.num_relation_types));
    }

    #[test]
    fn same_spec_same_bytes() {
        let spec = ScenarioSpec {
            scale: 0.05,
            ..ScenarioSpec::new(AttackVector::XssStored, Label::Attack, 99)
        };
        let a = generate_scenario(spec).serialize(GraphFormat::BinaryCompressed);
        let b = generate_scenario(spec).serialize(GraphFormat::BinaryCompressed);
        assert_eq!(a, b);
    }

    #[test]
    fn dataset_orders_benign_block_first() {
        let ds = generate_dataset_with(AttackVector::BruteForce, 3, 2, 1, small(0.05));
        assert_eq!(ds.graphs.len(), 5);
        for (i, g) in ds.graphs.iter().enumerate() {
            let expected = if i < 3 { Label::Benign } else { Label::Attack };
            assert_eq!(g.label, Some(expected));
            assert_eq!(g.scenario.as_deref(), Some("brute-force"));
        }
        let again = generate_dataset_with(AttackVector::BruteForce, 3, 2, 1, small(0.05));
        assert_eq!(ds, again);
    }

    #[test]
    fn attack_only_dataset() {
        let ds = generate_dataset_with(AttackVector::SqlInjection, 0, 1, 1, small(0.05));
        assert_eq!(ds.graphs.len(), 1);
        assert_eq!(ds.graphs[0].label, Some(Label::Attack));
    }

    #[test]
    fn export_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_dataset_with(AttackVector::SqlInjection, 2, 2, 11, small(0.02));
        export_dataset(&ds, dir.path()).unwrap();
        assert!(dir.path().join("sql-injection/benign/0.pgrf").is_file());
        assert!(dir.path().join("sql-injection/attack/1.pgrf").is_file());
        let loaded = load_dataset(dir.path()).unwrap();
        assert_eq!(ds, loaded);
    }

    #[test]
    fn tampered_manifest_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_dataset_with(AttackVector::XssDom, 1, 0, 2, small(0.02));
        export_dataset(&ds, dir.path()).unwrap();
        let manifest_path = dir.path().join(MANIFEST);
        let mut doc: serde_json::Value =
            serde_json::from_slice(&std::fs::read(&manifest_path).unwrap()).unwrap();
        doc["graphs"][0]["edges"] = serde_json::json!(1);
        std::fs::write(&manifest_path, serde_json::to_vec(&doc).unwrap()).unwrap();
        match load_dataset(dir.path()) {
            Err(SynthError::ManifestMismatch { path, .. }) => {
                assert_eq!(path, "xss-dom/benign/0.pgrf")
            }
            other => panic!("expected mismatch, got {other:?}"),
        }
    }

    #[test]
    fn empty_dataset_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_dataset(AttackVector::XssDom, 0, 0, 1);
        export_dataset(&ds, dir.path()).unwrap();
        let loaded = load_dataset(dir.path()).unwrap();
        assert_eq!(loaded, ds);
    }

    #[test]
    fn unlabeled_graph_cannot_be_exported() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset {
            vector: AttackVector::XssDom,
            seed: 0,
            graphs: vec![HeteroMultigraph::empty()],
        };
        assert!(matches!(
            export_dataset(&ds, dir.path()),
            Err(SynthError::UnlabeledGraph { index: 0 })
        ));
    }

    #[test]
    fn attack_relations_missing_from_benign_family() {
        for vector in AttackVector::ALL {
            if vector == AttackVector::BruteForce {
                continue;
            }
            let ds = generate_dataset_with(vector, 12, 12, 5, small(0.03));
            let mut benign = HashSet::new();
            let mut attack = HashSet::new();
            for g in &ds.graphs {
                let target = match g.label.unwrap() {
                    Label::Benign => &mut benign,
                    Label::Attack => &mut attack,
                };
                target.extend(relation_set(g));
            }
            let exclusive: Vec<_> = attack.difference(&benign).collect();
            assert!(!exclusive.is_empty(), "{vector}: no attack-only relation");
        }
    }

    #[test]
    fn brute_force_relation_oracle_is_perfect() {
        let ds = generate_dataset_with(AttackVector::BruteForce, 10, 10, 3, small(0.05));
        let motif = CanonicalRelation::new("socket", "WasDerivedFrom", "socket");
        for g in &ds.graphs {
            let has_motif = relation_set(g).contains(&motif);
            assert_eq!(has_motif, g.label == Some(Label::Attack));
            if has_motif {
                assert_eq!(g.num_relations(), 1);
            }
        }
    }

    #[test]
    fn stored_relation_oracle_is_imperfect() {
        // The stored-XSS payload store appears in only a minority of attack
        // graphs, so relation-set membership cannot fully separate classes.
        let ds = generate_dataset_with(AttackVector::XssStored, 25, 25, 9, small(0.03));
        let mut benign = HashSet::new();
        let mut attack_sets = Vec::new();
        for g in &ds.graphs {
            match g.label.unwrap() {
                Label::Benign => benign.extend(relation_set(g)),
                Label::Attack => attack_sets.push(relation_set(g)),
            }
        }
        let union: HashSet<_> = attack_sets.iter().flatten().cloned().collect();
        let exclusive: HashSet<_> = union.difference(&benign).cloned().collect();
        assert!(!exclusive.is_empty());
        let flagged = attack_sets
            .iter()
            .filter(|s| s.intersection(&exclusive).next().is_some())
            .count();
        assert!(flagged > 0, "signal vanished entirely");
        assert!(flagged < attack_sets.len(), "relation sets separate stored perfectly");
    }

    #[test]
    fn degree_biased_sampling_produces_hubs() {
        let spec = ScenarioSpec {
            scale: 0.1,
            ..ScenarioSpec::new(AttackVector::XssStored, Label::Benign, 42)
        };
        let g = generate_scenario(spec);
        let mut offsets = vec![0usize; g.node_types().len() + 1];
        for t in 0..g.node_types().len() {
            offsets[t + 1] = offsets[t] + g.node_table(t).len();
        }
        let mut degree = vec![0u64; g.num_nodes()];
        for (rel, edges) in g.relations() {
            let s = g.type_index(&rel.src_type).unwrap();
            let d = g.type_index(&rel.dst_type).unwrap();
            for &(a, b) in &edges.endpoints {
                degree[offsets[s] + a as usize] += 1;
                degree[offsets[d] + b as usize] += 1;
            }
        }
        let max = *degree.iter().max().unwrap() as f64;
        let mean = 2.0 * g.num_edges() as f64 / g.num_nodes() as f64;
        assert!(max >= 5.0 * mean, "max degree {max} vs mean {mean}");
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

        #[test]
        fn generated_stats_respect_targets(
            vector_idx in 0usize..6,
            attack in any::<bool>(),
            seed in any::<u64>(),
            jitter in 0.0f64..=0.5,
            scale in 0.02f64..0.06,
        ) {
            let vector = AttackVector::ALL[vector_idx];
            let label = if attack { Label::Attack } else { Label::Benign };
            let spec = ScenarioSpec { vector, class_label: label, seed, jitter, scale };
            let g = generate_scenario(spec);
            let again = generate_scenario(spec);
            prop_assert_eq!(&g, &again);

            let stats = g.stats();
            let brute_attack =
                vector == AttackVector::BruteForce && label == Label::Attack;
            // Published averages the generator is calibrated to.
            let (n_t, e_t, r_t) = match (vector, label) {
                (AttackVector::XssStored, Label::Benign) => (19_436.0, 463_682.0, 30),
                (AttackVector::XssStored, Label::Attack) => (19_547.0, 480_179.0, 31),
                (AttackVector::XssReflected, Label::Benign) => (33_481.0, 824_276.0, 31),
                (AttackVector::XssReflected, Label::Attack) => (24_435.0, 666_705.0, 32),
                (AttackVector::XssDom, Label::Benign) => (31_243.0, 753_519.0, 30),
                (AttackVector::XssDom, Label::Attack) => (30_261.0, 751_133.0, 32),
                (AttackVector::ClInjection, Label::Benign) => (32_996.0, 793_318.0, 29),
                (AttackVector::ClInjection, Label::Attack) => (25_720.0, 631_633.0, 30),
                (AttackVector::SqlInjection, Label::Benign) => (22_903.0, 543_266.0, 30),
                (AttackVector::SqlInjection, Label::Attack) => (29_576.0, 733_375.0, 30),
                (AttackVector::BruteForce, Label::Benign) => (21_518.0, 517_101.0, 30),
                (AttackVector::BruteForce, Label::Attack) => (418.0, 416.0, 1),
            };
            let n_goal = n_t * scale;
            prop_assert!((stats.num_nodes as f64 - n_goal).abs() <= n_goal * jitter + 2.0);
            if brute_attack {
                prop_assert_eq!(stats.num_edges, stats.num_nodes - 2);
                prop_assert_eq!(stats.num_relation_types, 1);
            } else {
                let e_goal = e_t * scale;
                prop_assert!(
                    (stats.num_edges as f64 - e_goal).abs() <= e_goal * jitter + 2.0
                );
                let r = stats.num_relation_types as i64;
                prop_assert!((r - r_t as i64).abs() <= 1);
            }
        }
    }
}
