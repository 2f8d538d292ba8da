//! JSON graph form. Carries structure only (types, ids, edge lists, label);
//! attributes and the scenario tag live in the binary form.
//!
//! ```json
//! {"node_types": [...],
//!  "nodes": {"<type>": ["<id>", ...], ...},
//!  "relations": [{"src_type": .., "edge_type": .., "dst_type": .., "edges": [[si, di], ...]}, ...],
//!  "label": "benign" | "attack" | null}
//! ```

use serde_json::{json, Map, Value};

use super::{GraphBuilder, GraphError, HeteroMultigraph, NodeRef};

pub(super) fn encode(g: &HeteroMultigraph) -> Vec<u8> {
    let mut nodes = Map::new();
    for (name, table) in g.node_types.iter().zip(&g.nodes) {
        nodes.insert(name.clone(), json!(table.ids));
    }
    let relations: Vec<Value> = g
        .relations
        .iter()
        .map(|(rel, list)| {
            let edges: Vec<Value> = list.endpoints.iter().map(|&(s, d)| json!([s, d])).collect();
            json!({
                "src_type": rel.src_type,
                "edge_type": rel.edge_type,
                "dst_type": rel.dst_type,
                "edges": edges,
            })
        })
        .collect();
    let doc = json!({
        "node_types": g.node_types,
        "nodes": Value::Object(nodes),
        "relations": relations,
        "label": g.label.map(|l| l.as_str()),
    });
    let mut bytes = serde_json::to_vec(&doc).expect("graph JSON is serializable");
    bytes.push(b'\n');
    bytes
}

fn bad(detail: impl Into<String>) -> GraphError {
    GraphError::MalformedJson { detail: detail.into() }
}

fn as_str<'v>(v: &'v Value, what: &str) -> Result<&'v str, GraphError> {
    v.as_str().ok_or_else(|| bad(format!("{what} must be a string")))
}

pub(super) fn decode(bytes: &[u8]) -> Result<HeteroMultigraph, GraphError> {
    let root: Value =
        serde_json::from_slice(bytes).map_err(|e| bad(format!("not valid JSON: {e}")))?;
    let obj = root.as_object().ok_or_else(|| bad("top level must be an object"))?;
    let node_types = obj
        .get("node_types")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing `node_types` array"))?;
    let nodes = obj
        .get("nodes")
        .and_then(Value::as_object)
        .ok_or_else(|| bad("missing `nodes` object"))?;
    let relations = obj
        .get("relations")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing `relations` array"))?;

    let mut builder = GraphBuilder::new();
    for name in node_types {
        let name = as_str(name, "node type")?;
        let ids = nodes
            .get(name)
            .and_then(Value::as_array)
            .ok_or_else(|| bad(format!("`nodes` has no id list for type `{name}`")))?;
        for id in ids {
            builder.add_node(name, as_str(id, "node id")?)?;
        }
    }
    let graph_types = builder.graph.node_types.clone();
    for rel in relations {
        let rel = rel.as_object().ok_or_else(|| bad("relation entries must be objects"))?;
        let field = |key: &str| {
            rel.get(key).ok_or_else(|| bad(format!("relation missing `{key}`"))).and_then(|v| {
                as_str(v, key).map(str::to_string)
            })
        };
        let (src_type, edge_type, dst_type) =
            (field("src_type")?, field("edge_type")?, field("dst_type")?);
        let endpoint_type = |name: &str| {
            graph_types
                .iter()
                .position(|t| t == name)
                .map(|t| t as u32)
                .ok_or_else(|| bad(format!("relation references unknown type `{name}`")))
        };
        let (src_t, dst_t) = (endpoint_type(&src_type)?, endpoint_type(&dst_type)?);
        let edges = rel
            .get("edges")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("relation missing `edges` array"))?;
        for pair in edges {
            let pair = pair.as_array().filter(|p| p.len() == 2).ok_or_else(|| {
                bad("edge entries must be [src_index, dst_index] pairs")
            })?;
            let index = |v: &Value, type_id: u32| {
                let i = v.as_u64().ok_or_else(|| bad("edge indices must be integers"))?;
                let limit = builder.graph.nodes[type_id as usize].len() as u64;
                if i >= limit {
                    return Err(bad(format!("edge index {i} out of range for type of {limit}")));
                }
                Ok(i as u32)
            };
            let src = NodeRef { type_id: src_t, index: index(&pair[0], src_t)? };
            let dst = NodeRef { type_id: dst_t, index: index(&pair[1], dst_t)? };
            builder.add_edge(&edge_type, src, dst);
        }
    }
    let mut graph = builder.build();
    graph.label = match obj.get("label") {
        None | Some(Value::Null) => None,
        Some(v) => Some(as_str(v, "label")?.parse().map_err(bad)?),
    };
    Ok(graph)
}
