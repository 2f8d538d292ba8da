//! Backbone assembly: typed node clusters wired by degree-biased edge
//! sampling, plus the socket-chain motif for brute-force attacks.

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::profile::{self, Triple};
use super::ScenarioSpec;
use crate::graph::{CanonicalRelation, EdgeList, HeteroMultigraph, Label, NodeTable};

/// Per-relation multiplicative weight noise, uniform in 1 ± this.
const WEIGHT_NOISE: f64 = 0.35;

/// Recent-endpoint window size for degree-biased sampling.
const RING: usize = 64;

/// Probability of redrawing an endpoint from the window (as a u32 threshold);
/// 3/4 reuse yields the hub-heavy degrees provenance graphs exhibit.
const REUSE_P: u32 = 0xC000_0000;

/// Uniform integer draw in `target ± jitter`, floored at `min`.
fn jittered(rng: &mut ChaCha8Rng, target: f64, jitter: f64, min: usize) -> usize {
    let f = 1.0 + jitter * (2.0 * rng.gen::<f64>() - 1.0);
    ((target * f).round() as usize).max(min)
}

/// Largest-remainder apportionment of `total` across `weights`; sums exactly
/// to `total`, deterministic under ties.
fn allocate(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    assert!(sum > 0.0 && !weights.is_empty());
    let mut out = Vec::with_capacity(weights.len());
    let mut fractions: Vec<(f64, usize)> = Vec::with_capacity(weights.len());
    for (i, w) in weights.iter().enumerate() {
        let exact = total as f64 * w / sum;
        let base = exact.floor();
        out.push(base as usize);
        fractions.push((exact - base, i));
    }
    let assigned: usize = out.iter().sum();
    fractions.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in fractions.iter().take(total - assigned) {
        out[i] += 1;
    }
    out
}

/// `allocate`, then guarantee every slot at least one by stealing from the
/// largest. Requires `total >= weights.len()`.
fn allocate_min1(total: usize, weights: &[f64]) -> Vec<usize> {
    assert!(total >= weights.len(), "budget {total} below slot count");
    let mut out = allocate(total, weights);
    for i in 0..out.len() {
        if out[i] == 0 {
            let donor = (0..out.len()).max_by_key(|&j| out[j]).unwrap();
            out[donor] -= 1;
            out[i] = 1;
        }
    }
    out
}

/// Sliding window of recently used endpoints; hubs persist by occupying
/// several slots at once.
struct Ring {
    slots: [u32; RING],
    len: usize,
    cursor: usize,
}

impl Ring {
    fn new() -> Self {
        Ring { slots: [0; RING], len: 0, cursor: 0 }
    }

    fn pick(&mut self, bits: u64, n: u32) -> u32 {
        let hi = (bits >> 32) as u32;
        let lo = bits as u32;
        let chosen = if self.len > 0 && hi < REUSE_P {
            self.slots[lo as usize % self.len]
        } else {
            lo % n
        };
        if self.len < RING {
            self.slots[self.len] = chosen;
            self.len += 1;
        } else {
            self.slots[self.cursor] = chosen;
            self.cursor = (self.cursor + 1) % RING;
        }
        chosen
    }
}

fn gen_edges(rng: &mut ChaCha8Rng, count: usize, src_n: u32, dst_n: u32) -> Vec<(u32, u32)> {
    let mut endpoints = Vec::with_capacity(count);
    let mut src_ring = Ring::new();
    let mut dst_ring = Ring::new();
    for _ in 0..count {
        let s = src_ring.pick(rng.gen::<u64>(), src_n);
        let d = dst_ring.pick(rng.gen::<u64>(), dst_n);
        endpoints.push((s, d));
    }
    endpoints
}

fn node_table(type_name: &str, count: usize) -> NodeTable {
    NodeTable {
        ids: (0..count).map(|i| format!("{type_name}:{i}")).collect(),
        attributes: Default::default(),
    }
}

/// Web-serving backbone for every (vector, class) except brute-force/attack.
/// Draw order is fixed — node target, edge target, relation count, optional
/// shuffle, attack coin, boost, weight noise, then per-relation endpoints —
/// so one seed always yields one graph.
pub(crate) fn backbone(rng: &mut ChaCha8Rng, spec: &ScenarioSpec) -> HeteroMultigraph {
    let (n_target, e_target, r_target) = profile::cell_targets(spec.vector, spec.class_label);
    let n = jittered(rng, n_target * spec.scale, spec.jitter, profile::TYPE_SHARES.len());
    let e_base = jittered(rng, e_target * spec.scale, spec.jitter, 1);
    let r = (r_target as i64 + rng.gen_range(-1i64..=1)) as usize;

    let mut optional_order: [usize; 6] = [0, 1, 2, 3, 4, 5];
    optional_order.shuffle(rng);

    let attack = profile::attack_profile(spec.vector);
    let is_attack = spec.class_label == Label::Attack;
    let with_exclusives = is_attack && rng.gen::<f64>() < attack.exclusive_prob;
    let boost = match (is_attack, attack.msg_boost) {
        (true, Some((lo, hi))) => rng.gen_range(lo..hi),
        _ => 1.0,
    };

    let exclusive_count = if with_exclusives { attack.exclusives.len() } else { 0 };
    let optional_count = (r as i64 - profile::CORE.len() as i64 - exclusive_count as i64)
        .clamp(0, profile::OPTIONAL.len() as i64) as usize;
    let mut chosen: Vec<usize> = optional_order[..optional_count].to_vec();
    chosen.sort_unstable();

    let mut triples: Vec<Triple> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for (i, (triple, w)) in profile::CORE.iter().enumerate() {
        let w = if profile::MSG_CORE.contains(&i) { w * boost } else { *w };
        triples.push(*triple);
        weights.push(w);
    }
    for &i in &chosen {
        triples.push(profile::OPTIONAL[i]);
        weights.push(profile::OPTIONAL_WEIGHT);
    }
    if with_exclusives {
        for t in attack.exclusives {
            triples.push(*t);
            weights.push(profile::EXCLUSIVE_WEIGHT);
        }
    }
    for w in &mut weights {
        *w *= 1.0 + WEIGHT_NOISE * (2.0 * rng.gen::<f64>() - 1.0);
    }

    let e = e_base.max(triples.len());
    let budgets = allocate_min1(e, &weights);

    let type_weights: Vec<f64> = profile::TYPE_SHARES.iter().map(|(_, p)| *p).collect();
    let cluster_sizes = allocate_min1(n, &type_weights);
    let type_of = |name: &str| -> usize {
        profile::TYPE_SHARES.iter().position(|(t, _)| *t == name).expect("cluster for type")
    };

    let mut edge_types: Vec<String> = Vec::new();
    let mut relations: IndexMap<CanonicalRelation, EdgeList> = IndexMap::new();
    for (triple, budget) in triples.iter().zip(&budgets) {
        let (src, edge, dst) = *triple;
        if !edge_types.iter().any(|t| t == edge) {
            edge_types.push(edge.to_string());
        }
        let src_n = cluster_sizes[type_of(src)] as u32;
        let dst_n = cluster_sizes[type_of(dst)] as u32;
        let endpoints = gen_edges(rng, *budget, src_n, dst_n);
        relations.insert(
            CanonicalRelation::new(src, edge, dst),
            EdgeList { endpoints, attributes: Default::default() },
        );
    }

    let node_types: Vec<String> =
        profile::TYPE_SHARES.iter().map(|(t, _)| t.to_string()).collect();
    let nodes: Vec<NodeTable> = profile::TYPE_SHARES
        .iter()
        .zip(&cluster_sizes)
        .map(|((t, _), &c)| node_table(t, c))
        .collect();

    HeteroMultigraph::from_parts(node_types, edge_types, nodes, relations, None, None)
}

/// Brute-force attack: two password-guessing connection chains under the
/// single socket-derivation relation; nodes ≈ target, edges = nodes − 2.
pub(crate) fn socket_chains(rng: &mut ChaCha8Rng, spec: &ScenarioSpec) -> HeteroMultigraph {
    let (n_target, _, _) = profile::cell_targets(spec.vector, spec.class_label);
    let n = jittered(rng, n_target * spec.scale, spec.jitter, 4);
    let first = n / 2 + n % 2;

    let mut endpoints = Vec::with_capacity(n - 2);
    for chain in [0..first, first..n] {
        let start = chain.start;
        for i in chain {
            if i > start {
                endpoints.push((i as u32, i as u32 - 1));
            }
        }
    }

    let (src, edge, dst) = profile::BRUTE_FORCE_MOTIF;
    let mut relations = IndexMap::new();
    relations.insert(
        CanonicalRelation::new(src, edge, dst),
        EdgeList { endpoints, attributes: Default::default() },
    );
    HeteroMultigraph::from_parts(
        vec![src.to_string()],
        vec![edge.to_string()],
        vec![node_table(src, n)],
        relations,
        None,
        None,
    )
}
