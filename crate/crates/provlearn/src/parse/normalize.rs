//! Document normalization: canonical type labels, id deduplication, and
//! dangling-edge resolution.

use std::collections::HashMap;

use super::{warn_codes, Layer, NodeRecord, ParseError, ProvDocument, Warning};

/// What to do with an edge whose endpoint was never declared as a node.
///
/// Capture daemons intermix record streams and routinely reference nodes
/// serialized in another chunk, so the default materializes a placeholder
/// instead of failing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DanglingPolicy {
    #[default]
    Synthesize,
    Skip,
    Fail,
}

impl std::str::FromStr for DanglingPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "synthesize" => Ok(DanglingPolicy::Synthesize),
            "skip" => Ok(DanglingPolicy::Skip),
            "fail" => Ok(DanglingPolicy::Fail),
            other => Err(format!("unknown dangling policy `{other}`")),
        }
    }
}

impl ProvDocument {
    /// Normalize with the default [`DanglingPolicy::Synthesize`]; never fails.
    pub fn normalize(&self) -> ProvDocument {
        self.normalize_with(DanglingPolicy::Synthesize)
            .expect("synthesize policy cannot fail")
    }

    /// Normalize the document: case-fold node types, merge duplicate node
    /// ids (attributes unioned, conflicts resolved last-writer with a
    /// warning), uniquify duplicate edge ids, and resolve edges whose
    /// endpoints were never declared according to `policy`.
    ///
    /// Normalization is idempotent: a second pass returns an identical
    /// document and appends no new warnings.
    pub fn normalize_with(&self, policy: DanglingPolicy) -> Result<ProvDocument, ParseError> {
        let mut out = ProvDocument::empty(self.format_tag);
        out.warnings = self.warnings.clone();

        // Merge nodes, first appearance fixes position and type casing.
        let mut index_of: HashMap<String, usize> = HashMap::new();
        for record in &self.nodes {
            let node_type = record.node_type.to_lowercase();
            match index_of.get(&record.id) {
                None => {
                    index_of.insert(record.id.clone(), out.nodes.len());
                    out.nodes.push(NodeRecord { node_type, ..record.clone() });
                }
                Some(&at) => {
                    push_unique(
                        &mut out.warnings,
                        Warning::new(
                            warn_codes::DUPLICATE_NODE,
                            format!("node `{}` declared more than once; merged", record.id),
                        ),
                    );
                    let existing = &mut out.nodes[at];
                    for (k, v) in &record.attributes {
                        if let Some(old) = existing.attributes.get(k) {
                            if old != v {
                                push_unique(
                                    &mut out.warnings,
                                    Warning::new(
                                        warn_codes::ATTR_CONFLICT,
                                        format!(
                                            "node `{}` attribute `{k}` redefined; keeping latest",
                                            record.id
                                        ),
                                    ),
                                );
                            }
                        }
                        existing.attributes.insert(k.clone(), v.clone());
                    }
                    if existing.layer == Layer::Unknown {
                        existing.layer = record.layer;
                    }
                }
            }
        }

        // Edges: enforce unique ids and non-empty structural fields.
        let mut seen_edge_ids: HashMap<String, usize> = HashMap::new();
        for record in &self.edges {
            if record.relation.is_empty() || record.src.is_empty() || record.dst.is_empty() {
                push_unique(
                    &mut out.warnings,
                    Warning::new(
                        warn_codes::EMPTY_FIELD,
                        format!("edge `{}` has an empty relation or endpoint; dropped", record.id),
                    ),
                );
                continue;
            }
            let mut edge = record.clone();
            let count = seen_edge_ids.entry(edge.id.clone()).or_insert(0);
            if *count > 0 {
                push_unique(
                    &mut out.warnings,
                    Warning::new(
                        warn_codes::DUPLICATE_EDGE_ID,
                        format!("edge id `{}` reused; renamed", edge.id),
                    ),
                );
                edge.id = format!("{}#dup{}", edge.id, count);
            }
            *count += 1;

            for endpoint in [&edge.src, &edge.dst] {
                if !index_of.contains_key(endpoint) {
                    match policy {
                        DanglingPolicy::Fail => {
                            return Err(ParseError::DanglingEndpoint {
                                edge: edge.id.clone(),
                                node: endpoint.clone(),
                            })
                        }
                        DanglingPolicy::Synthesize => {
                            push_unique(
                                &mut out.warnings,
                                Warning::new(
                                    warn_codes::DANGLING_ENDPOINT,
                                    format!("node `{endpoint}` undeclared; placeholder added"),
                                ),
                            );
                            index_of.insert(endpoint.clone(), out.nodes.len());
                            out.nodes.push(NodeRecord {
                                id: endpoint.clone(),
                                node_type: "unknown".to_string(),
                                attributes: super::AttrMap::new(),
                                layer: Layer::Unknown,
                            });
                        }
                        DanglingPolicy::Skip => {}
                    }
                }
            }
            if policy == DanglingPolicy::Skip
                && (!index_of.contains_key(&edge.src) || !index_of.contains_key(&edge.dst))
            {
                push_unique(
                    &mut out.warnings,
                    Warning::new(
                        warn_codes::DANGLING_ENDPOINT,
                        format!("edge `{}` references an undeclared node; dropped", edge.id),
                    ),
                );
                continue;
            }
            out.edges.push(edge);
        }

        if has_cycle(&out, &index_of) {
            push_unique(
                &mut out.warnings,
                Warning::new(
                    warn_codes::CYCLE,
                    "document contains a directed cycle; kept as recorded".to_string(),
                ),
            );
        }
        Ok(out)
    }
}

/// Append a warning unless the identical warning is already present, so
/// re-normalizing cannot grow the list.
fn push_unique(warnings: &mut Vec<Warning>, warning: Warning) {
    if !warnings.contains(&warning) {
        warnings.push(warning);
    }
}

/// Iterative three-color DFS over the directed edge set.
fn has_cycle(doc: &ProvDocument, index_of: &HashMap<String, usize>) -> bool {
    let n = doc.nodes.len();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for edge in &doc.edges {
        if let (Some(&s), Some(&d)) = (index_of.get(&edge.src), index_of.get(&edge.dst)) {
            if s == d {
                return true; // self-loop
            }
            adjacency[s].push(d);
        }
    }
    const WHITE: u8 = 0;
    const GRAY: u8 = 1;
    const BLACK: u8 = 2;
    let mut color = vec![WHITE; n];
    for start in 0..n {
        if color[start] != WHITE {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        color[start] = GRAY;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if *next < adjacency[node].len() {
                let child = adjacency[node][*next];
                *next += 1;
                match color[child] {
                    GRAY => return true,
                    WHITE => {
                        color[child] = GRAY;
                        stack.push((child, 0));
                    }
                    _ => {}
                }
            } else {
                color[node] = BLACK;
                stack.pop();
            }
        }
    }
    false
}
