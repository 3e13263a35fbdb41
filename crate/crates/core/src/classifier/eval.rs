use serde::{Deserialize, Serialize};

use super::{ClassifierError, ProximityDecider, TreeNode};
use crate::dataset::{Example, ProximityLabel};

/// Test-set performance of a close/far classifier.
///
/// `confusion[truth][predicted]` with index 0 = close, 1 = far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub confusion: [[u64; 2]; 2],
    /// Fraction of truly close windows predicted far; 0 when none are close.
    pub false_negative_rate: f64,
    pub n_test: u64,
}

impl EvalReport {
    pub fn from_pairs<I>(pairs: I) -> Result<Self, ClassifierError>
    where
        I: IntoIterator<Item = (ProximityLabel, ProximityLabel)>,
    {
        let mut confusion = [[0u64; 2]; 2];
        for (truth, pred) in pairs {
            confusion[truth.index()][pred.index()] += 1;
        }
        let n_test: u64 = confusion.iter().flatten().sum();
        if n_test == 0 {
            return Err(ClassifierError::EmptyTestSet);
        }
        let correct = confusion[0][0] + confusion[1][1];
        let close = confusion[0][0] + confusion[0][1];
        Ok(EvalReport {
            accuracy: correct as f64 / n_test as f64,
            confusion,
            false_negative_rate: if close == 0 {
                0.0
            } else {
                confusion[0][1] as f64 / close as f64
            },
            n_test,
        })
    }

    pub fn false_negatives(&self) -> u64 {
        self.confusion[0][1]
    }
}

pub fn evaluate_with<D: ProximityDecider + ?Sized>(
    decider: &D,
    test: &[Example],
) -> Result<EvalReport, ClassifierError> {
    EvalReport::from_pairs(test.iter().map(|e| (e.label, decider.decide(&e.features))))
}

pub fn evaluate(tree: &TreeNode, test: &[Example]) -> Result<EvalReport, ClassifierError> {
    evaluate_with(tree, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureVector, PositionPair, Stratum};
    use ProximityLabel::{Close, Far};

    struct Oracle;
    impl ProximityDecider for Oracle {
        fn decide(&self, f: &FeatureVector) -> ProximityLabel {
            if f.rss_mean_dbm > -70.0 {
                Close
            } else {
                Far
            }
        }
    }

    fn ex(rss: f64, label: ProximityLabel) -> Example {
        Example {
            features: FeatureVector::single(rss, 0),
            label,
            stratum: Stratum::new(1.0, PositionPair::HH),
        }
    }

    #[test]
    fn perfect_predictor() {
        let test = vec![ex(-50.0, Close), ex(-60.0, Close), ex(-80.0, Far)];
        let r = evaluate_with(&Oracle, &test).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.false_negative_rate, 0.0);
        assert_eq!(r.confusion, [[2, 0], [0, 1]]);
        assert_eq!(r.n_test, 3);
    }

    #[test]
    fn confusion_accounting() {
        let test = vec![
            ex(-75.0, Close),
            ex(-60.0, Close),
            ex(-65.0, Far),
            ex(-90.0, Far),
        ];
        let r = evaluate_with(&Oracle, &test).unwrap();
        assert_eq!(r.confusion, [[1, 1], [1, 1]]);
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.false_negative_rate, 0.5);
        assert_eq!(r.false_negatives(), 1);
    }

    #[test]
    fn empty_test_set() {
        assert_eq!(
            evaluate_with(&Oracle, &[]),
            Err(ClassifierError::EmptyTestSet)
        );
    }
}
