//! Compressed binary graph form.
//!
//! Layout: magic `PGRF`, one version byte, then a raw-deflate stream. The
//! decompressed payload is a sequence of length-prefixed sections, all
//! integers little-endian u32:
//!
//! 1. string table: count, then per string byte length + UTF-8 bytes;
//!    every string below is a table reference
//! 2. node types: count + refs
//! 3. edge types: count + refs
//! 4. per node type: id count + id refs, then sparse attributes
//!    (entry count, then node index + pair count + key/value refs)
//! 5. relations: count, then per relation src/edge/dst type indices,
//!    endpoint count + (src, dst) index pairs, sparse edge attributes
//! 6. label byte (0 none, 1 benign, 2 attack)
//! 7. scenario: present byte + optional ref
//! 8. feature section: present byte + optional length-prefixed opaque blob
//!    (layout owned by the feature code)
//!
//! Reported corruption offsets refer to the decompressed payload, except
//! offsets 0–4 which point into the header.

use std::io::{Read, Write};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;
use indexmap::IndexSet;

use super::{EdgeList, GraphError, HeteroMultigraph, Label, NodeTable};
use crate::parse::AttrMap;

pub(super) const MAGIC: &[u8; 4] = b"PGRF";
pub(super) const VERSION: u8 = 1;
const HEADER_LEN: usize = 5;

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

#[derive(Default)]
struct Interner {
    strings: IndexSet<String>,
}

impl Interner {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(at) = self.strings.get_index_of(s) {
            return at as u32;
        }
        self.strings.insert(s.to_string());
        (self.strings.len() - 1) as u32
    }
}

fn put_attrs(body: &mut Vec<u8>, interner: &mut Interner, attrs: &std::collections::BTreeMap<u32, AttrMap>) {
    put_u32(body, attrs.len() as u32);
    for (&index, pairs) in attrs {
        put_u32(body, index);
        put_u32(body, pairs.len() as u32);
        for (k, v) in pairs {
            put_u32(body, interner.intern(k));
            put_u32(body, interner.intern(v));
        }
    }
}

pub(super) fn encode(g: &HeteroMultigraph) -> Vec<u8> {
    encode_with_blob(g, None)
}

pub(crate) fn encode_with_blob(g: &HeteroMultigraph, blob: Option<&[u8]>) -> Vec<u8> {
    let mut interner = Interner::default();
    let mut body = Vec::new();

    put_u32(&mut body, g.node_types.len() as u32);
    for t in &g.node_types {
        put_u32(&mut body, interner.intern(t));
    }
    put_u32(&mut body, g.edge_types.len() as u32);
    for t in &g.edge_types {
        put_u32(&mut body, interner.intern(t));
    }
    for table in &g.nodes {
        put_u32(&mut body, table.ids.len() as u32);
        for id in &table.ids {
            put_u32(&mut body, interner.intern(id));
        }
        put_attrs(&mut body, &mut interner, &table.attributes);
    }
    put_u32(&mut body, g.relations.len() as u32);
    for (rel, list) in &g.relations {
        let type_index = |name: &str| g.type_index(name).expect("relation type exists") as u32;
        put_u32(&mut body, type_index(&rel.src_type));
        let edge_type = g.edge_types.iter().position(|t| *t == rel.edge_type);
        put_u32(&mut body, edge_type.expect("edge type registered") as u32);
        put_u32(&mut body, type_index(&rel.dst_type));
        put_u32(&mut body, list.endpoints.len() as u32);
        for &(s, d) in &list.endpoints {
            put_u32(&mut body, s);
            put_u32(&mut body, d);
        }
        put_attrs(&mut body, &mut interner, &list.attributes);
    }
    body.push(match g.label {
        None => 0,
        Some(Label::Benign) => 1,
        Some(Label::Attack) => 2,
    });
    match &g.scenario {
        None => body.push(0),
        Some(s) => {
            body.push(1);
            put_u32(&mut body, interner.intern(s));
        }
    }
    match blob {
        None => body.push(0),
        Some(blob) => {
            body.push(1);
            put_u32(&mut body, blob.len() as u32);
            body.extend_from_slice(blob);
        }
    }

    let mut payload = Vec::with_capacity(body.len() / 2);
    put_u32(&mut payload, interner.strings.len() as u32);
    for s in &interner.strings {
        put_u32(&mut payload, s.len() as u32);
        payload.extend_from_slice(s.as_bytes());
    }
    payload.extend_from_slice(&body);

    let mut out = Vec::with_capacity(payload.len() / 4 + HEADER_LEN);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    let mut enc = DeflateEncoder::new(out, Compression::default());
    enc.write_all(&payload).expect("writing to a Vec cannot fail");
    enc.finish().expect("finishing a Vec-backed encoder cannot fail")
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn corrupt(&self, detail: impl Into<String>) -> GraphError {
        GraphError::CorruptPayload { offset: self.pos, detail: detail.into() }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], GraphError> {
        if self.bytes.len() - self.pos < n {
            return Err(self.corrupt(format!(
                "needed {n} bytes, {} remain",
                self.bytes.len() - self.pos
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, GraphError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, GraphError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4-byte slice")))
    }

    /// Count prefix that must leave at least `min_item` bytes per item.
    fn count(&mut self, min_item: usize, what: &str) -> Result<usize, GraphError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(min_item) > self.bytes.len() - self.pos {
            return Err(self.corrupt(format!("implausible {what} count {n}")));
        }
        Ok(n)
    }

    fn finish(self) -> Result<(), GraphError> {
        if self.pos != self.bytes.len() {
            return Err(self.corrupt("trailing bytes after graph payload"));
        }
        Ok(())
    }
}

fn read_attrs(
    cur: &mut Cursor<'_>,
    strings: &[String],
    limit: u32,
) -> Result<std::collections::BTreeMap<u32, AttrMap>, GraphError> {
    let mut out = std::collections::BTreeMap::new();
    let entries = cur.count(8, "attribute entry")?;
    for _ in 0..entries {
        let index = cur.u32()?;
        if index >= limit {
            return Err(cur.corrupt(format!("attribute index {index} out of range {limit}")));
        }
        let pairs = cur.count(8, "attribute pair")?;
        let mut map = AttrMap::new();
        for _ in 0..pairs {
            let k = read_ref(cur, strings)?;
            let v = read_ref(cur, strings)?;
            map.insert(k, v);
        }
        if out.insert(index, map).is_some() {
            return Err(cur.corrupt(format!("duplicate attribute entry for index {index}")));
        }
    }
    Ok(out)
}

fn read_ref(cur: &mut Cursor<'_>, strings: &[String]) -> Result<String, GraphError> {
    let r = cur.u32()? as usize;
    strings
        .get(r)
        .cloned()
        .ok_or_else(|| cur.corrupt(format!("string reference {r} out of table of {}", strings.len())))
}

pub(super) fn decode(bytes: &[u8]) -> Result<HeteroMultigraph, GraphError> {
    decode_with_blob(bytes).map(|(g, _)| g)
}

pub(crate) fn decode_with_blob(
    bytes: &[u8],
) -> Result<(HeteroMultigraph, Option<Vec<u8>>), GraphError> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(GraphError::CorruptPayload {
            offset: 0,
            detail: "missing PGRF magic".to_string(),
        });
    }
    if bytes[4] != VERSION {
        return Err(GraphError::CorruptPayload {
            offset: 4,
            detail: format!("unsupported version {}", bytes[4]),
        });
    }
    let mut payload = Vec::new();
    DeflateDecoder::new(&bytes[HEADER_LEN..]).read_to_end(&mut payload).map_err(|e| {
        GraphError::CorruptPayload { offset: HEADER_LEN, detail: format!("deflate stream: {e}") }
    })?;
    let mut cur = Cursor { bytes: &payload, pos: 0 };

    let n_strings = cur.count(4, "string")?;
    let mut strings = Vec::with_capacity(n_strings);
    for _ in 0..n_strings {
        let len = cur.count(1, "string byte")?;
        let raw = cur.take(len)?;
        strings.push(String::from_utf8(raw.to_vec()).map_err(|_| {
            GraphError::CorruptPayload {
                offset: cur.pos - len,
                detail: "string table entry is not UTF-8".to_string(),
            }
        })?);
    }

    let mut g = HeteroMultigraph::empty();
    let n_types = cur.count(4, "node type")?;
    for _ in 0..n_types {
        let name = read_ref(&mut cur, &strings)?;
        if g.node_types.contains(&name) {
            return Err(cur.corrupt(format!("duplicate node type `{name}`")));
        }
        g.node_types.push(name);
    }
    let n_edge_types = cur.count(4, "edge type")?;
    for _ in 0..n_edge_types {
        g.edge_types.push(read_ref(&mut cur, &strings)?);
    }
    let mut seen_ids = std::collections::HashSet::new();
    for _ in 0..n_types {
        let n_nodes = cur.count(4, "node")?;
        let mut table = NodeTable::default();
        for _ in 0..n_nodes {
            let id = read_ref(&mut cur, &strings)?;
            if !seen_ids.insert(id.clone()) {
                return Err(GraphError::IdCollision { id });
            }
            table.ids.push(id);
        }
        table.attributes = read_attrs(&mut cur, &strings, n_nodes as u32)?;
        g.nodes.push(table);
    }
    let n_relations = cur.count(16, "relation")?;
    for _ in 0..n_relations {
        let type_at = |cur: &mut Cursor<'_>, which: &str| -> Result<usize, GraphError> {
            let t = cur.u32()? as usize;
            if t >= n_types {
                return Err(cur.corrupt(format!("{which} type index {t} out of range {n_types}")));
            }
            Ok(t)
        };
        let src_t = type_at(&mut cur, "source")?;
        let e = cur.u32()? as usize;
        let edge_type = g
            .edge_types
            .get(e)
            .cloned()
            .ok_or_else(|| cur.corrupt(format!("edge type index {e} out of range")))?;
        let dst_t = type_at(&mut cur, "destination")?;
        let n_edges = cur.count(8, "edge")?;
        if n_edges == 0 {
            return Err(cur.corrupt("empty edge list"));
        }
        let mut list = EdgeList::default();
        let (src_limit, dst_limit) = (g.nodes[src_t].len() as u32, g.nodes[dst_t].len() as u32);
        for _ in 0..n_edges {
            let (s, d) = (cur.u32()?, cur.u32()?);
            if s >= src_limit || d >= dst_limit {
                return Err(cur.corrupt(format!("endpoint ({s}, {d}) out of range")));
            }
            list.endpoints.push((s, d));
        }
        list.attributes = read_attrs(&mut cur, &strings, n_edges as u32)?;
        let rel = super::CanonicalRelation::new(
            g.node_types[src_t].clone(),
            edge_type,
            g.node_types[dst_t].clone(),
        );
        if g.relations.insert(rel, list).is_some() {
            return Err(cur.corrupt("duplicate relation tuple"));
        }
    }
    g.label = match cur.u8()? {
        0 => None,
        1 => Some(Label::Benign),
        2 => Some(Label::Attack),
        b => return Err(cur.corrupt(format!("unknown label byte {b}"))),
    };
    g.scenario = match cur.u8()? {
        0 => None,
        1 => Some(read_ref(&mut cur, &strings)?),
        b => return Err(cur.corrupt(format!("unknown scenario flag {b}"))),
    };
    let blob = match cur.u8()? {
        0 => None,
        1 => {
            let len = cur.count(1, "feature byte")?;
            Some(cur.take(len)?.to_vec())
        }
        b => return Err(cur.corrupt(format!("unknown feature flag {b}"))),
    };
    cur.finish()?;
    Ok((g, blob))
}
