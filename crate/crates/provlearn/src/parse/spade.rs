//! SPADE JSON parser.
//!
//! A SPADE document is an array of record objects, each carrying a `type`
//! field. Vertex types (`Entity`, `Activity`, `Agent`, and the OPM names
//! `Artifact`, `Process`) become node records; anything with `from`/`to`
//! endpoints becomes an edge record. A one-record-per-line stream (as
//! written by daemons that append to a log) is accepted as an equivalent
//! spelling of the array form, and so is an object wrapping such arrays.

use serde_json::Value;

use super::{
    flatten_value, warn_codes, EdgeRecord, FormatTag, Layer, NodeRecord, ParseError, ProvDocument,
    Warning,
};

const NODE_TYPES: [&str; 5] = ["entity", "activity", "agent", "artifact", "process"];

/// Annotation keys consulted, in order, for a node's fine-grained type.
const TYPE_ANNOTATIONS: [&str; 3] = ["object_type", "cf:type", "prov:type"];

fn is_node_type(t: &str) -> bool {
    NODE_TYPES.iter().any(|n| n.eq_ignore_ascii_case(t))
}

pub(super) fn is_typed_array(value: &Value) -> bool {
    match value {
        Value::Array(items) => items.iter().all(|i| i.get("type").is_some()),
        _ => false,
    }
}

pub(super) fn looks_like_record_stream(text: &str) -> bool {
    let mut saw_record = false;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match serde_json::from_str::<Value>(line) {
            Ok(v) if v.is_object() => saw_record = true,
            _ => return false,
        }
    }
    saw_record
}

pub(super) fn parse(text: &str) -> Result<ProvDocument, ParseError> {
    let records = collect_records(text)?;
    let mut doc = ProvDocument::empty(FormatTag::SpadeJson);
    for (ordinal, record) in records.iter().enumerate() {
        parse_record(ordinal, record, &mut doc);
    }
    Ok(doc)
}

/// Pull the record list out of any accepted top-level shape.
fn collect_records(text: &str) -> Result<Vec<Value>, ParseError> {
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Array(items)) => Ok(items),
        Ok(Value::Object(map)) => {
            let mut records = Vec::new();
            let mut found = false;
            for value in map.values() {
                if let Value::Array(items) = value {
                    found = true;
                    records.extend(items.iter().cloned());
                }
            }
            if found {
                Ok(records)
            } else {
                Err(ParseError::shape(
                    "SPADE JSON top level must be (or contain) an array of records",
                ))
            }
        }
        Ok(other) => Err(ParseError::shape(format!(
            "SPADE JSON top level must be an array, found {}",
            kind(&other)
        ))),
        Err(first_err) => {
            // One-record-per-line stream.
            let mut records = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                match serde_json::from_str::<Value>(line) {
                    Ok(v) => records.push(v),
                    Err(e) => {
                        return Err(ParseError::MalformedInput {
                            detail: e.to_string(),
                            line: lineno + 1,
                            column: e.column(),
                        })
                    }
                }
            }
            if records.is_empty() {
                Err(ParseError::from_json(&first_err))
            } else {
                Ok(records)
            }
        }
    }
}

fn parse_record(ordinal: usize, record: &Value, doc: &mut ProvDocument) {
    let Some(obj) = record.as_object() else {
        doc.warnings.push(Warning::new(
            warn_codes::SKIPPED_RECORD,
            format!("record #{ordinal} is not an object"),
        ));
        return;
    };
    let Some(type_str) = obj.get("type").and_then(Value::as_str) else {
        doc.warnings.push(Warning::new(
            warn_codes::SKIPPED_RECORD,
            format!("record #{ordinal} has no `type` field"),
        ));
        return;
    };

    let mut attributes = super::AttrMap::new();
    if let Some(Value::Object(ann)) = obj.get("annotations") {
        for (k, v) in ann {
            attributes.insert(k.clone(), flatten_value(v));
        }
    }
    // Top-level extras besides the structural fields ride along as attributes.
    for (k, v) in obj {
        if matches!(k.as_str(), "type" | "id" | "from" | "to" | "annotations") {
            continue;
        }
        attributes.entry(k.clone()).or_insert_with(|| flatten_value(v));
    }

    if is_node_type(type_str) {
        let Some(id) = scalar_field(obj, "id") else {
            doc.warnings.push(Warning::new(
                warn_codes::MISSING_ID,
                format!("{type_str} record #{ordinal} has no id"),
            ));
            return;
        };
        let node_type = TYPE_ANNOTATIONS
            .iter()
            .find_map(|k| attributes.get(*k))
            .filter(|t| !t.is_empty())
            .cloned()
            .unwrap_or_else(|| type_str.to_string());
        let layer = attributes.get("layer").map(|v| Layer::from_attr(v)).unwrap_or_default();
        doc.nodes.push(NodeRecord { id, node_type, attributes, layer });
    } else {
        match (scalar_field(obj, "from"), scalar_field(obj, "to")) {
            (Some(src), Some(dst)) => {
                let id = scalar_field(obj, "id").unwrap_or_else(|| format!("edge#{ordinal}"));
                doc.edges.push(EdgeRecord {
                    id,
                    relation: type_str.to_string(),
                    src,
                    dst,
                    attributes,
                });
            }
            _ => {
                doc.warnings.push(Warning::new(
                    warn_codes::MISSING_ENDPOINT,
                    format!("{type_str} record #{ordinal} lacks from/to endpoints"),
                ));
            }
        }
    }
}

fn scalar_field(obj: &serde_json::Map<String, Value>, key: &str) -> Option<String> {
    obj.get(key).map(flatten_value).filter(|s| !s.is_empty())
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}
