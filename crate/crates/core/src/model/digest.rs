use sha2::{Digest as _, Sha256};

use super::graph::ReflectionModel;
use super::value::Value;

/// SHA-256 over the canonical serialization of a model's domain content.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModelDigest(pub [u8; 32]);

impl ModelDigest {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl std::fmt::Debug for ModelDigest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ModelDigest({})", self.to_hex())
    }
}

impl std::fmt::Display for ModelDigest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u64).to_be_bytes());
    out.extend_from_slice(bytes);
}

fn put_value(out: &mut Vec<u8>, value: &Value) {
    match value {
        Value::Int(i) => {
            out.push(b'i');
            out.extend_from_slice(&i.to_be_bytes());
        }
        Value::Float(x) => {
            out.push(b'f');
            // -0.0 and 0.0 compare equal, so they serialize identically.
            let x = if *x == 0.0 { 0.0f64 } else { *x };
            out.extend_from_slice(&x.to_bits().to_be_bytes());
        }
        Value::Str(s) => {
            out.push(b's');
            put_bytes(out, s.as_bytes());
        }
        Value::Bool(b) => {
            out.push(b'b');
            out.push(u8::from(*b));
        }
    }
}

/// Canonical byte form: nodes by id, attributes by name, edges by id, every
/// string length-prefixed. Mode and annotations are not part of it.
pub fn canonical_bytes(model: &ReflectionModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"amrt-model/1");
    out.extend_from_slice(&(model.node_count() as u64).to_be_bytes());
    for (id, node) in model.nodes() {
        out.push(b'N');
        put_bytes(&mut out, id.as_bytes());
        put_bytes(&mut out, node.node_type.as_bytes());
        out.extend_from_slice(&(node.attrs.len() as u64).to_be_bytes());
        for (name, value) in &node.attrs {
            put_bytes(&mut out, name.as_bytes());
            put_value(&mut out, value);
        }
    }
    out.extend_from_slice(&(model.edge_count() as u64).to_be_bytes());
    for (id, edge) in model.edges() {
        out.push(b'E');
        put_bytes(&mut out, id.as_bytes());
        put_bytes(&mut out, edge.edge_type.as_bytes());
        put_bytes(&mut out, edge.source.as_bytes());
        put_bytes(&mut out, edge.target.as_bytes());
    }
    out
}

impl ReflectionModel {
    pub fn digest(&self) -> ModelDigest {
        let hash = Sha256::digest(canonical_bytes(self));
        let mut bytes = [0u8; 32];
        bytes.copy_from_slice(&hash);
        ModelDigest(bytes)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::fixture;
    use crate::model::EditOp;

    #[test]
    fn insertion_order_does_not_matter() {
        let a = fixture::m0();
        let mut b = ReflectionModel::new(fixture::shop_metamodel());
        let mut txn = b.begin_transaction().unwrap();
        let mut ops: Vec<EditOp> = fixture::m0_ops();
        // Nodes first (edges need their endpoints), each group reversed.
        let split = ops.iter().position(|op| matches!(op, EditOp::AddEdge { .. })).unwrap();
        let mut edges = ops.split_off(split);
        ops.reverse();
        edges.reverse();
        for op in ops.into_iter().chain(edges) {
            b.apply_edit(&mut txn, op).unwrap();
        }
        b.commit(&mut txn).unwrap();
        assert_eq!(a.digest(), b.digest());
    }

    #[test]
    fn one_attribute_change_changes_digest() {
        let a = fixture::m0();
        let mut b = fixture::m0();
        let mut txn = b.begin_transaction().unwrap();
        let op = b.set_attr_op("C1", "load", 11.0).unwrap();
        b.apply_edit(&mut txn, op).unwrap();
        b.commit(&mut txn).unwrap();
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn annotations_do_not_enter_digest() {
        let mut m = fixture::m0();
        let d = m.digest();
        let ev =
            crate::model::ChangeEvent::attr_changed(1, 1, "C2", "state", None, None, crate::model::EventSource::System);
        m.annotate_event(ev).unwrap();
        assert_eq!(m.digest(), d);
    }

    #[test]
    fn negative_zero_is_canonical() {
        let mm = fixture::shop_metamodel();
        let mk = |x: f64| {
            let mut m = ReflectionModel::new(mm.clone());
            let mut t = m.begin_transaction().unwrap();
            let attrs = BTreeMap::from([("capacity".to_string(), Value::Float(x))]);
            m.apply_edit(&mut t, EditOp::add_node("S", "Server", attrs)).unwrap();
            m.commit(&mut t).unwrap();
            m.digest()
        };
        assert_eq!(mk(0.0), mk(-0.0));
    }
}
