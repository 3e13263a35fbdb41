//! JSON form of a trained tree.
//!
//! Thresholds are written with 17 significant digits so that every `f64`
//! survives a write/read cycle bit-for-bit.

use std::fmt::Write as _;

use serde_json::Value;

use super::{ClassifierError, TreeNode};
use crate::dataset::{FeatureVector, ProximityLabel};

pub const TREE_FORMAT: &str = "proxitrace-tree/1";

fn write_node(out: &mut String, node: &TreeNode, indent: usize) {
    let pad = "  ".repeat(indent);
    let inner = "  ".repeat(indent + 1);
    match node {
        TreeNode::Leaf { label, counts } => {
            let _ = write!(
                out,
                "{{\n{inner}\"label\": \"{label}\",\n{inner}\"counts\": [{}, {}]\n{pad}}}",
                counts[0], counts[1]
            );
        }
        TreeNode::Split {
            feature,
            threshold,
            counts,
            left,
            right,
        } => {
            let _ = write!(
                out,
                "{{\n{inner}\"feature\": {feature},\n{inner}\"threshold\": {threshold:.16e},\n{inner}\"counts\": [{}, {}],\n{inner}\"left\": ",
                counts[0], counts[1]
            );
            write_node(out, left, indent + 1);
            let _ = write!(out, ",\n{inner}\"right\": ");
            write_node(out, right, indent + 1);
            let _ = write!(out, "\n{pad}}}");
        }
    }
}

pub fn tree_to_json(tree: &TreeNode) -> String {
    let mut out = String::new();
    let names: Vec<String> = FeatureVector::NAMES
        .iter()
        .map(|n| format!("\"{n}\""))
        .collect();
    let _ = write!(
        out,
        "{{\n  \"format\": \"{TREE_FORMAT}\",\n  \"features\": [{}],\n  \"root\": ",
        names.join(", ")
    );
    write_node(&mut out, tree, 1);
    out.push_str("\n}\n");
    out
}

fn bad(msg: impl Into<String>) -> ClassifierError {
    ClassifierError::Format(msg.into())
}

fn counts(v: &Value) -> Result<[u64; 2], ClassifierError> {
    let arr = v
        .get("counts")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("node without counts"))?;
    match arr.as_slice() {
        [a, b] => Ok([
            a.as_u64().ok_or_else(|| bad("count is not an integer"))?,
            b.as_u64().ok_or_else(|| bad("count is not an integer"))?,
        ]),
        _ => Err(bad("counts must have two entries")),
    }
}

fn read_node(v: &Value) -> Result<TreeNode, ClassifierError> {
    let counts = counts(v)?;
    if let Some(label) = v.get("label") {
        let label = match label.as_str() {
            Some("close") => ProximityLabel::Close,
            Some("far") => ProximityLabel::Far,
            _ => return Err(bad("label must be \"close\" or \"far\"")),
        };
        return Ok(TreeNode::Leaf { label, counts });
    }
    let feature = v
        .get("feature")
        .and_then(Value::as_u64)
        .ok_or_else(|| bad("split without feature"))?;
    let threshold = v
        .get("threshold")
        .and_then(Value::as_f64)
        .ok_or_else(|| bad("split without threshold"))?;
    if !threshold.is_finite() {
        return Err(bad("threshold is not finite"));
    }
    let left = v.get("left").ok_or_else(|| bad("split without left"))?;
    let right = v.get("right").ok_or_else(|| bad("split without right"))?;
    Ok(TreeNode::Split {
        feature: feature as usize,
        threshold,
        counts,
        left: Box::new(read_node(left)?),
        right: Box::new(read_node(right)?),
    })
}

pub fn tree_from_json(text: &str) -> Result<TreeNode, ClassifierError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    match doc.get("format").and_then(Value::as_str) {
        Some(TREE_FORMAT) => {}
        other => return Err(bad(format!("unsupported format {other:?}"))),
    }
    read_node(doc.get("root").ok_or_else(|| bad("missing root"))?)
}
