//! W3C PROV JSON parser.
//!
//! The top level is an object keyed by record category: `entity`, `activity`
//! and `agent` hold node records; relation keys (`used`, `wasGeneratedBy`,
//! ...) hold edge records. Each category maps record ids to attribute
//! objects. Endpoint fields follow the PROV-JSON field order for each
//! relation, so the source of a `used` edge is the activity.

use serde_json::Value;

use super::{
    flatten_value, warn_codes, EdgeRecord, FormatTag, Layer, NodeRecord, ParseError, ProvDocument,
    Warning,
};

const NODE_CATEGORIES: [&str; 3] = ["entity", "activity", "agent"];

/// Recognized PROV relations with their endpoint field names, source first.
/// Unprefixed fallbacks are accepted alongside the `prov:` names because
/// capture tools are inconsistent about prefixing.
const RELATIONS: [(&str, [&str; 2], [&str; 2]); 14] = [
    ("used", ["prov:activity", "activity"], ["prov:entity", "entity"]),
    ("wasGeneratedBy", ["prov:entity", "entity"], ["prov:activity", "activity"]),
    ("wasInformedBy", ["prov:informed", "informed"], ["prov:informant", "informant"]),
    (
        "wasDerivedFrom",
        ["prov:generatedEntity", "generatedEntity"],
        ["prov:usedEntity", "usedEntity"],
    ),
    ("wasAssociatedWith", ["prov:activity", "activity"], ["prov:agent", "agent"]),
    ("wasAttributedTo", ["prov:entity", "entity"], ["prov:agent", "agent"]),
    ("actedOnBehalfOf", ["prov:delegate", "delegate"], ["prov:responsible", "responsible"]),
    ("wasStartedBy", ["prov:activity", "activity"], ["prov:trigger", "trigger"]),
    ("wasEndedBy", ["prov:activity", "activity"], ["prov:trigger", "trigger"]),
    ("wasInvalidatedBy", ["prov:entity", "entity"], ["prov:activity", "activity"]),
    (
        "specializationOf",
        ["prov:specificEntity", "specificEntity"],
        ["prov:generalEntity", "generalEntity"],
    ),
    ("alternateOf", ["prov:alternate1", "alternate1"], ["prov:alternate2", "alternate2"]),
    ("hadMember", ["prov:collection", "collection"], ["prov:entity", "entity"]),
    ("wasInfluencedBy", ["prov:influencee", "influencee"], ["prov:influencer", "influencer"]),
];

/// Attribute keys consulted, in order, for a node's fine-grained type.
const TYPE_ATTRS: [&str; 3] = ["prov:type", "cf:type", "type"];

pub(super) fn is_w3c_key(key: &str) -> bool {
    key == "prefix"
        || NODE_CATEGORIES.contains(&key)
        || RELATIONS.iter().any(|(name, _, _)| *name == key)
}

fn relation_fields(key: &str) -> Option<(&'static [&'static str; 2], &'static [&'static str; 2])> {
    RELATIONS
        .iter()
        .find(|(name, _, _)| *name == key)
        .map(|(_, src, dst)| (src, dst))
}

fn endpoint(body: &serde_json::Map<String, Value>, fields: &[&str; 2]) -> Option<String> {
    fields.iter().find_map(|f| body.get(*f)).map(flatten_value).filter(|s| !s.is_empty())
}

pub(super) fn parse(text: &str) -> Result<ProvDocument, ParseError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ParseError::from_json(&e))?;
    let top = match value {
        Value::Object(map) => map,
        other => {
            return Err(ParseError::shape(format!(
                "W3C PROV top level must be an object, found {}",
                json_kind(&other)
            )))
        }
    };

    let mut doc = ProvDocument::empty(FormatTag::W3cProv);
    for (key, section) in &top {
        if key == "prefix" {
            continue; // namespace table, not a record category
        }
        if NODE_CATEGORIES.contains(&key.as_str()) {
            parse_node_section(key, section, &mut doc);
        } else if let Some((src_fields, dst_fields)) = relation_fields(key) {
            parse_relation_section(key, section, src_fields, dst_fields, &mut doc);
        } else {
            doc.warnings
                .push(Warning::new(warn_codes::UNRECOGNIZED_KEY, format!("top-level key `{key}`")));
        }
    }
    Ok(doc)
}

fn parse_node_section(category: &str, section: &Value, doc: &mut ProvDocument) {
    let Some(entries) = section.as_object() else {
        doc.warnings.push(Warning::new(
            warn_codes::SKIPPED_RECORD,
            format!("`{category}` section is not an object"),
        ));
        return;
    };
    for (id, body) in entries {
        let Some(attrs_obj) = body.as_object() else {
            doc.warnings.push(Warning::new(
                warn_codes::SKIPPED_RECORD,
                format!("{category} record `{id}` is not an object"),
            ));
            continue;
        };
        let mut attributes = super::AttrMap::new();
        for (k, v) in attrs_obj {
            attributes.insert(k.clone(), flatten_value(v));
        }
        let node_type = TYPE_ATTRS
            .iter()
            .find_map(|k| attributes.get(*k))
            .filter(|t| !t.is_empty())
            .cloned()
            .unwrap_or_else(|| category.to_string());
        let layer = attributes.get("layer").map(|v| Layer::from_attr(v)).unwrap_or_default();
        doc.nodes.push(NodeRecord { id: id.clone(), node_type, attributes, layer });
    }
}

fn parse_relation_section(
    relation: &str,
    section: &Value,
    src_fields: &[&str; 2],
    dst_fields: &[&str; 2],
    doc: &mut ProvDocument,
) {
    let Some(entries) = section.as_object() else {
        doc.warnings.push(Warning::new(
            warn_codes::SKIPPED_RECORD,
            format!("`{relation}` section is not an object"),
        ));
        return;
    };
    for (id, body) in entries {
        let Some(body_obj) = body.as_object() else {
            doc.warnings.push(Warning::new(
                warn_codes::SKIPPED_RECORD,
                format!("{relation} record `{id}` is not an object"),
            ));
            continue;
        };
        let (src, dst) = match (endpoint(body_obj, src_fields), endpoint(body_obj, dst_fields)) {
            (Some(src), Some(dst)) => (src, dst),
            _ => {
                doc.warnings.push(Warning::new(
                    warn_codes::MISSING_ENDPOINT,
                    format!("{relation} record `{id}` lacks its endpoint fields"),
                ));
                continue;
            }
        };
        let mut attributes = super::AttrMap::new();
        for (k, v) in body_obj {
            if src_fields.contains(&k.as_str()) || dst_fields.contains(&k.as_str()) {
                continue;
            }
            attributes.insert(k.clone(), flatten_value(v));
        }
        doc.edges.push(EdgeRecord {
            id: id.clone(),
            relation: relation.to_string(),
            src,
            dst,
            attributes,
        });
    }
}

fn json_kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}
