use std::cmp::Ordering;

use super::{ClassifierError, TreeNode, TreeParams};
use crate::dataset::{Example, ProximityLabel};

/// Exact split quality `(close_l² + far_l²)/n_l + (close_r² + far_r²)/n_r`
/// held as a fraction. Larger means purer children; the weighted child
/// impurity times the node size is `n - score`.
#[derive(Debug, Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn children(left: [u64; 2], right: [u64; 2]) -> Self {
        let sq = |c: [u64; 2]| (c[0] as u128).pow(2) + (c[1] as u128).pow(2);
        let nl = (left[0] + left[1]) as u128;
        let nr = (right[0] + right[1]) as u128;
        Score {
            num: sq(left) * nr + sq(right) * nl,
            den: nl * nr,
        }
    }

    fn parent(counts: [u64; 2]) -> Self {
        let n = (counts[0] + counts[1]) as u128;
        Score {
            num: (counts[0] as u128).pow(2) + (counts[1] as u128).pow(2),
            den: n,
        }
    }

    fn cmp(&self, other: &Score) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }

    fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: Score,
}

fn count(y: &[ProximityLabel], idx: &[usize]) -> [u64; 2] {
    let mut c = [0u64; 2];
    for &i in idx {
        c[y[i].index()] += 1;
    }
    c
}

/// Midpoint of two consecutive distinct values that still separates them.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi {
        lo
    } else {
        m
    }
}

fn best_split<R: AsRef<[f64]>>(
    x: &[R],
    y: &[ProximityLabel],
    idx: &[usize],
    n_features: usize,
    min_leaf: usize,
) -> Option<Candidate> {
    let total = count(y, idx);
    let mut order = idx.to_vec();
    let mut best: Option<Candidate> = None;
    for feature in 0..n_features {
        let value = |i: usize| x[i].as_ref()[feature];
        order.sort_by(|&a, &b| value(a).total_cmp(&value(b)));
        let mut left = [0u64; 2];
        for k in 0..order.len() - 1 {
            left[y[order[k]].index()] += 1;
            let (v, next) = (value(order[k]), value(order[k + 1]));
            if v == next {
                continue;
            }
            let nl = k + 1;
            if nl < min_leaf || order.len() - nl < min_leaf {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let score = Score::children(left, right);
            // Strict improvement keeps the lowest feature, then lowest threshold.
            if best
                .as_ref()
                .is_none_or(|b| score.cmp(&b.score) == Ordering::Greater)
            {
                best = Some(Candidate {
                    feature,
                    threshold: midpoint(v, next),
                    score,
                });
            }
        }
    }
    best
}

fn grow<R: AsRef<[f64]>>(
    x: &[R],
    y: &[ProximityLabel],
    idx: &mut [usize],
    depth: usize,
    n_features: usize,
    params: &TreeParams,
) -> TreeNode {
    let counts = count(y, idx);
    let n = idx.len();
    if depth >= params.max_depth || counts[0] == 0 || counts[1] == 0 || n < 2 * params.min_leaf {
        return TreeNode::leaf(counts);
    }
    let Some(best) = best_split(x, y, idx, n_features, params.min_leaf) else {
        return TreeNode::leaf(counts);
    };
    let parent = Score::parent(counts);
    if best.score.cmp(&parent) != Ordering::Greater {
        return TreeNode::leaf(counts);
    }
    let gain = (best.score.value() - parent.value()) / n as f64;
    if gain < params.min_impurity_decrease {
        return TreeNode::leaf(counts);
    }
    let feature = best.feature;
    let threshold = best.threshold;
    idx.sort_by_key(|&i| x[i].as_ref()[feature] > threshold);
    let split_at = idx.partition_point(|&i| x[i].as_ref()[feature] <= threshold);
    let (l, r) = idx.split_at_mut(split_at);
    TreeNode::Split {
        feature,
        threshold,
        counts,
        left: Box::new(grow(x, y, l, depth + 1, n_features, params)),
        right: Box::new(grow(x, y, r, depth + 1, n_features, params)),
    }
}

/// Greedy CART on a raw feature matrix.
///
/// Candidate thresholds are midpoints between consecutive distinct values
/// of a feature; the split with the largest Gini decrease wins and ties go
/// to the lowest feature index, then the lowest threshold.
pub fn train_tree_on<R: AsRef<[f64]>>(
    x: &[R],
    y: &[ProximityLabel],
    params: &TreeParams,
) -> Result<TreeNode, ClassifierError> {
    params.validate()?;
    if x.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let n_features = x[0].as_ref().len();
    if y.len() != x.len()
        || x.iter()
            .any(|r| r.as_ref().len() != n_features || r.as_ref().iter().any(|v| !v.is_finite()))
    {
        return Err(ClassifierError::BadFeatures);
    }
    let mut idx: Vec<usize> = (0..x.len()).collect();
    Ok(grow(x, y, &mut idx, 0, n_features, params))
}

pub fn train_tree(train: &[Example], params: &TreeParams) -> Result<TreeNode, ClassifierError> {
    let x: Vec<[f64; 6]> = train.iter().map(|e| e.features.to_array()).collect();
    let y: Vec<ProximityLabel> = train.iter().map(|e| e.label).collect();
    train_tree_on(&x, &y, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::compute_gini;
    use ProximityLabel::{Close, Far};

    fn unbounded() -> TreeParams {
        TreeParams {
            max_depth: 64,
            min_leaf: 1,
            min_impurity_decrease: 0.0,
        }
    }

    #[test]
    fn all_close_is_single_leaf() {
        let x = vec![[-50.0], [-60.0], [-90.0]];
        let t = train_tree_on(&x, &[Close, Close, Close], &TreeParams::default()).unwrap();
        assert_eq!(
            t,
            TreeNode::Leaf {
                label: Close,
                counts: [3, 0]
            }
        );
    }

    #[test]
    fn two_point_split_at_midpoint() {
        let x = vec![[-50.0], [-90.0]];
        let t = train_tree_on(&x, &[Close, Far], &unbounded()).unwrap();
        match &t {
            TreeNode::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, -70.0);
            }
            _ => panic!("expected a split"),
        }
        assert_eq!(t.predict(&[-60.0]).unwrap(), Close);
        assert_eq!(t.predict(&[-70.0]).unwrap(), Far);
    }

    #[test]
    fn empty_training_set() {
        let x: Vec<[f64; 1]> = vec![];
        assert_eq!(
            train_tree_on(&x, &[], &unbounded()),
            Err(ClassifierError::EmptyTrainingSet)
        );
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // Both features separate the classes perfectly.
        let x = vec![[1.0, 10.0], [2.0, 20.0], [3.0, 30.0], [4.0, 40.0]];
        let t = train_tree_on(&x, &[Close, Close, Far, Far], &unbounded()).unwrap();
        match t {
            TreeNode::Split {
                feature, threshold, ..
            } => assert_eq!((feature, threshold), (0, 2.5)),
            _ => panic!(),
        }
    }

    #[test]
    fn min_leaf_and_depth_stop_growth() {
        let x: Vec<[f64; 1]> = (0..10).map(|i| [i as f64]).collect();
        let y: Vec<_> = (0..10)
            .map(|i| if i % 2 == 0 { Close } else { Far })
            .collect();
        let shallow = train_tree_on(
            &x,
            &y,
            &TreeParams {
                max_depth: 1,
                ..unbounded()
            },
        )
        .unwrap();
        assert!(shallow.depth() <= 1);
        let coarse = train_tree_on(
            &x,
            &y,
            &TreeParams {
                min_leaf: 5,
                ..unbounded()
            },
        )
        .unwrap();
        fn min_leaf_size(t: &TreeNode) -> u64 {
            match t {
                TreeNode::Leaf { counts, .. } => counts[0] + counts[1],
                TreeNode::Split { left, right, .. } => {
                    min_leaf_size(left).min(min_leaf_size(right))
                }
            }
        }
        assert!(min_leaf_size(&coarse) >= 5);
    }

    #[test]
    fn zero_gain_node_stays_a_leaf() {
        // XOR: every axis split leaves both children at the parent's mix.
        let x = vec![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
        let t = train_tree_on(&x, &[Close, Close, Far, Far], &unbounded()).unwrap();
        assert_eq!(
            t,
            TreeNode::Leaf {
                label: Close,
                counts: [2, 2]
            }
        );
    }

    fn check_gains(t: &TreeNode, min_dec: f64) {
        if let TreeNode::Split {
            counts,
            left,
            right,
            ..
        } = t
        {
            let n = (counts[0] + counts[1]) as f64;
            let (lc, rc) = (left.counts(), right.counts());
            let w = |c: [u64; 2]| (c[0] + c[1]) as f64 / n * compute_gini(c).unwrap();
            let gain = compute_gini(*counts).unwrap() - w(lc) - w(rc);
            assert!(gain > 0.0 && gain >= min_dec - 1e-12, "gain {gain}");
            check_gains(left, min_dec);
            check_gains(right, min_dec);
        }
    }

    proptest::proptest! {
        #[test]
        fn unbounded_tree_fits_consistent_data(
            rows in proptest::collection::btree_map(-200i32..200, proptest::bool::ANY, 1..80)
        ) {
            let x: Vec<[f64; 1]> = rows.keys().map(|&a| [a as f64]).collect();
            let y: Vec<_> = rows.values().map(|&c| if c { Close } else { Far }).collect();
            let t = train_tree_on(&x, &y, &unbounded()).unwrap();
            for (xi, yi) in x.iter().zip(&y) {
                proptest::prop_assert_eq!(t.predict(xi).unwrap(), *yi);
            }
            check_gains(&t, 0.0);
        }

        #[test]
        fn splits_respect_min_decrease(
            rows in proptest::collection::vec(((-20i32..20), proptest::bool::ANY), 2..80),
            min_dec in 0.0f64..0.2,
        ) {
            let x: Vec<[f64; 1]> = rows.iter().map(|&(a, _)| [a as f64]).collect();
            let y: Vec<_> = rows.iter().map(|&(_, c)| if c { Close } else { Far }).collect();
            let params = TreeParams { max_depth: 6, min_leaf: 1, min_impurity_decrease: min_dec };
            let t = train_tree_on(&x, &y, &params).unwrap();
            check_gains(&t, min_dec);
            proptest::prop_assert_eq!(t.clone(), train_tree_on(&x, &y, &params).unwrap());
        }

        #[test]
        fn predictions_survive_monotone_rescaling(
            rows in proptest::collection::vec(((-90i32..-40), proptest::bool::ANY), 2..60),
            scale in 0.1f64..10.0,
            shift in -100.0f64..100.0,
        ) {
            let f = |v: f64| v * scale + shift;
            let x: Vec<[f64; 1]> = rows.iter().map(|&(a, _)| [a as f64]).collect();
            let xt: Vec<[f64; 1]> = x.iter().map(|r| [f(r[0])]).collect();
            let y: Vec<_> = rows.iter().map(|&(_, c)| if c { Close } else { Far }).collect();
            let params = TreeParams { max_depth: 5, min_leaf: 2, min_impurity_decrease: 0.0 };
            let t = train_tree_on(&x, &y, &params).unwrap();
            let tt = train_tree_on(&xt, &y, &params).unwrap();
            for r in &x {
                proptest::prop_assert_eq!(t.predict(r).unwrap(), tt.predict(&[f(r[0])]).unwrap());
            }
        }
    }
}
