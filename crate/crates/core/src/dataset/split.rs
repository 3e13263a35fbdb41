use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetError, Example, Stratum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Vec<Example>,
    pub test: Vec<Example>,
    pub split_seed: u64,
    pub train_fraction: f64,
}

/// Number of training elements taken from a stratum of size `n`.
pub(crate) fn train_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).clamp(1, n - 1)
}

/// Stratified, seeded train/test split over (distance, position) strata.
///
/// Both halves keep the input order of their elements.
pub fn split(
    data: &[Example],
    train_fraction: f64,
    seed: u64,
) -> Result<SplitDataset, DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(train_fraction));
    }
    let mut strata: BTreeMap<Stratum, Vec<usize>> = BTreeMap::new();
    for (i, e) in data.iter().enumerate() {
        strata.entry(e.stratum).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; data.len()];
    for (stratum, mut idx) in strata {
        if idx.len() < 2 {
            return Err(DatasetError::EmptyStratum(stratum.to_string()));
        }
        let k = train_count(idx.len(), train_fraction);
        idx.shuffle(&mut rng);
        for &i in &idx[..k] {
            in_train[i] = true;
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (e, t) in data.iter().zip(in_train) {
        if t {
            train.push(e.clone());
        } else {
            test.push(e.clone());
        }
    }
    Ok(SplitDataset {
        train,
        test,
        split_seed: seed,
        train_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureVector, PositionPair, ProximityLabel};
    use proptest::prelude::*;

    fn ex(i: usize, d: f64, p: PositionPair) -> Example {
        Example {
            features: FeatureVector::single(-(i as f64), p.code()),
            label: ProximityLabel::Close,
            stratum: Stratum::new(d, p),
        }
    }

    #[test]
    fn eighty_twenty() {
        let data: Vec<_> = (0..100).map(|i| ex(i, 1.0, PositionPair::HH)).collect();
        let s = split(&data, 0.8, 7).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (80, 20));
        let again = split(&data, 0.8, 7).unwrap();
        assert_eq!(s, again);
        let other = split(&data, 0.8, 8).unwrap();
        assert_ne!(s.train, other.train);
    }

    #[test]
    fn singleton_stratum_rejected() {
        let data = vec![
            ex(0, 1.0, PositionPair::HH),
            ex(1, 1.0, PositionPair::HH),
            ex(2, 3.0, PositionPair::HH),
        ];
        assert!(matches!(
            split(&data, 0.8, 1),
            Err(DatasetError::EmptyStratum(_))
        ));
        assert!(matches!(
            split(&data, 1.0, 1),
            Err(DatasetError::InvalidFraction(_))
        ));
    }

    proptest! {
        #[test]
        fn halves_partition_input(
            sizes in proptest::collection::vec(2usize..40, 1..6),
            fraction in 0.05f64..0.95,
            seed in any::<u64>(),
        ) {
            let mut data = Vec::new();
            let mut id = 0;
            for (k, &n) in sizes.iter().enumerate() {
                for _ in 0..n {
                    data.push(ex(id, 0.2 * (k + 1) as f64, PositionPair::PB));
                    id += 1;
                }
            }
            let s = split(&data, fraction, seed).unwrap();
            let mut ids: Vec<i64> = s.train.iter().chain(&s.test)
                .map(|e| -e.features.rss_mean_dbm as i64).collect();
            ids.sort();
            prop_assert_eq!(ids, (0..id as i64).collect::<Vec<_>>());
            for (k, &n) in sizes.iter().enumerate() {
                let st = Stratum::new(0.2 * (k + 1) as f64, PositionPair::PB);
                let tr = s.train.iter().filter(|e| e.stratum == st).count();
                prop_assert!((tr as f64 - fraction * n as f64).abs() <= 1.0);
            }
        }
    }
}
