//! Close/far proximity classification.
//!
//! A CART decision tree grown greedily on Gini impurity, the fixed RSS
//! threshold baseline it is compared against, and the evaluation reports
//! used to reproduce the per-combination accuracy table.

mod eval;
mod serialize;
pub mod table2;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{FeatureVector, ProximityLabel, RssSample};

pub use eval::{evaluate, evaluate_with, EvalReport};
pub use serialize::{tree_from_json, tree_to_json};
pub use tree::{train_tree, train_tree_on};

/// RSS level (dBm) below which the naive baseline calls a pair far.
pub const DEFAULT_CUTOFF_DBM: f64 = -80.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifierError {
    #[error("gini impurity of an empty node")]
    EmptyNode,
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("empty test set")]
    EmptyTestSet,
    #[error("feature index {index} out of range for a {len}-feature vector")]
    FeatureIndexOutOfRange { index: usize, len: usize },
    #[error("training rows have inconsistent or non-finite features")]
    BadFeatures,
    #[error("invalid tree parameters: {0}")]
    InvalidParams(String),
    #[error("tree document: {0}")]
    Format(String),
}

/// Gini impurity `1 - Σ p²` of a `[close, far]` count pair.
pub fn compute_gini(counts: [u64; 2]) -> Result<f64, ClassifierError> {
    let n = counts[0] + counts[1];
    if n == 0 {
        return Err(ClassifierError::EmptyNode);
    }
    let n = n as f64;
    let (p, q) = (counts[0] as f64 / n, counts[1] as f64 / n);
    Ok(1.0 - (p * p + q * q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub min_impurity_decrease: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 8,
            min_leaf: 5,
            min_impurity_decrease: 0.0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if self.max_depth < 1 {
            return Err(ClassifierError::InvalidParams(
                "max_depth must be >= 1".into(),
            ));
        }
        if self.min_leaf < 1 {
            return Err(ClassifierError::InvalidParams(
                "min_leaf must be >= 1".into(),
            ));
        }
        if !(self.min_impurity_decrease >= 0.0) {
            return Err(ClassifierError::InvalidParams(
                "min_impurity_decrease must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// A node of a trained tree. Rows with `feature <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        label: ProximityLabel,
        /// Training rows reaching this leaf, `[close, far]`.
        counts: [u64; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        counts: [u64; 2],
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn leaf(counts: [u64; 2]) -> Self {
        // Ties go to close: a missed contact costs more than a false alarm.
        let label = if counts[0] >= counts[1] {
            ProximityLabel::Close
        } else {
            ProximityLabel::Far
        };
        TreeNode::Leaf { label, counts }
    }

    pub fn counts(&self) -> [u64; 2] {
        match self {
            TreeNode::Leaf { counts, .. } | TreeNode::Split { counts, .. } => *counts,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// Root-to-leaf descent.
    pub fn predict(&self, x: &[f64]) -> Result<ProximityLabel, ClassifierError> {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { label, .. } => return Ok(*label),
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    let v = *x
                        .get(*feature)
                        .ok_or(ClassifierError::FeatureIndexOutOfRange {
                            index: *feature,
                            len: x.len(),
                        })?;
                    node = if v <= *threshold { left } else { right };
                }
            }
        }
    }
}

pub fn predict(tree: &TreeNode, f: &FeatureVector) -> Result<ProximityLabel, ClassifierError> {
    tree.predict(&f.to_array())
}

/// Close iff the RSS is at or above the cutoff.
pub fn threshold_baseline(rss_dbm: f64, cutoff_dbm: f64) -> ProximityLabel {
    if rss_dbm >= cutoff_dbm {
        ProximityLabel::Close
    } else {
        ProximityLabel::Far
    }
}

/// Samples that are physically close but fall below the RSS cutoff.
pub fn baseline_false_negatives(samples: &[RssSample], cutoff_dbm: f64, cutoff_m: f64) -> usize {
    samples
        .iter()
        .filter(|s| s.distance_m <= cutoff_m && s.rss_dbm < cutoff_dbm)
        .count()
}

/// Anything that can label a feature window.
pub trait ProximityDecider {
    fn decide(&self, f: &FeatureVector) -> ProximityLabel;
}

impl ProximityDecider for TreeNode {
    fn decide(&self, f: &FeatureVector) -> ProximityLabel {
        // Every tree trained on FeatureVector rows references indices < LEN.
        predict(self, f).expect("tree features exceed FeatureVector")
    }
}

/// The naive baseline applied to the window mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdClassifier {
    pub cutoff_dbm: f64,
}

impl ProximityDecider for ThresholdClassifier {
    fn decide(&self, f: &FeatureVector) -> ProximityLabel {
        threshold_baseline(f.rss_mean_dbm, self.cutoff_dbm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DeviceKind, PositionPair};

    #[test]
    fn gini_values() {
        assert_eq!(compute_gini([10, 0]).unwrap(), 0.0);
        assert_eq!(compute_gini([5, 5]).unwrap(), 0.5);
        // 1 - (9/16 + 1/16)
        assert_eq!(compute_gini([3, 1]).unwrap(), 0.375);
        assert_eq!(compute_gini([0, 0]), Err(ClassifierError::EmptyNode));
    }

    #[test]
    fn baseline_boundary() {
        assert_eq!(threshold_baseline(-70.0, -80.0), ProximityLabel::Close);
        assert_eq!(threshold_baseline(-85.0, -80.0), ProximityLabel::Far);
        assert_eq!(threshold_baseline(-80.0, -80.0), ProximityLabel::Close);
    }

    fn s(rss: f64, d: f64) -> RssSample {
        RssSample {
            rss_dbm: rss,
            distance_m: d,
            position_pair: PositionPair::HH,
            device_kind: DeviceKind::Smartphone,
            session_id: "x".into(),
            t_offset_s: None,
        }
    }

    #[test]
    fn baseline_false_negative_counts() {
        let close_strong: Vec<_> = (0..10).map(|_| s(-50.0, 1.0)).collect();
        assert_eq!(baseline_false_negatives(&close_strong, -80.0, 2.0), 0);
        let close_weak: Vec<_> = (0..10).map(|_| s(-90.0, 1.0)).collect();
        assert_eq!(baseline_false_negatives(&close_weak, -80.0, 2.0), 10);
        assert_eq!(baseline_false_negatives(&[s(-90.0, 3.0)], -80.0, 2.0), 0);
    }

    #[test]
    fn predict_checks_feature_range() {
        let t = TreeNode::Split {
            feature: 3,
            threshold: 0.0,
            counts: [1, 1],
            left: Box::new(TreeNode::leaf([1, 0])),
            right: Box::new(TreeNode::leaf([0, 1])),
        };
        assert_eq!(
            t.predict(&[1.0]),
            Err(ClassifierError::FeatureIndexOutOfRange { index: 3, len: 1 })
        );
        assert_eq!(t.predict(&[0.0, 0.0, 0.0, 1.0]), Ok(ProximityLabel::Far));
    }

    #[test]
    fn params_validation() {
        assert!(TreeParams::default().validate().is_ok());
        assert!(TreeParams {
            max_depth: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TreeParams {
            min_leaf: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TreeParams {
            min_impurity_decrease: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
