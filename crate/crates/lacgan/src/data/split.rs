//! Seeded shuffle and 80/10/10 split over the trainable classes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{filter_labels, RawSample};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<RawSample>,
    pub validation: Vec<RawSample>,
    pub test: Vec<RawSample>,
    pub seed: u64,
}

/// Filter to the 4 trainable classes, shuffle with the seed, then cut
/// contiguously. Validation and test each take floor(n/10); the remainder
/// goes to train.
pub fn split_dataset(samples: &[RawSample], seed: u64) -> Result<DatasetSplit> {
    let mut kept = filter_labels(samples);
    if kept.len() < 10 {
        return Err(Error::Validation(format!(
            "need at least 10 trainable samples to split, got {}",
            kept.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    kept.shuffle(&mut rng);
    let n = kept.len();
    let tenth = n / 10;
    let train_end = n - 2 * tenth;
    let test = kept.split_off(train_end + tenth);
    let validation = kept.split_off(train_end);
    Ok(DatasetSplit {
        train: kept,
        validation,
        test,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabelCategory;

    fn samples(n: usize) -> Vec<RawSample> {
        (0..n)
            .map(|i| RawSample {
                id: format!("s{i}"),
                synset: "cup".into(),
                name_candidates: vec!["cup".into()],
                situation_sentences: vec![],
                label: LabelCategory::from_class_index(i % 4).unwrap(),
            })
            .collect()
    }

    #[test]
    fn sizes_670_gives_536_67_67() {
        let split = split_dataset(&samples(670), 0).unwrap();
        assert_eq!(split.train.len(), 536);
        assert_eq!(split.validation.len(), 67);
        assert_eq!(split.test.len(), 67);
    }

    #[test]
    fn sizes_10_gives_8_1_1() {
        let split = split_dataset(&samples(10), 0).unwrap();
        assert_eq!(
            (split.train.len(), split.validation.len(), split.test.len()),
            (8, 1, 1)
        );
    }

    #[test]
    fn identical_seed_identical_membership() {
        let data = samples(100);
        let a = split_dataset(&data, 42).unwrap();
        let b = split_dataset(&data, 42).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.validation, b.validation);
        assert_eq!(a.test, b.test);
    }

    #[test]
    fn union_equals_filtered_input_and_ids_disjoint() {
        use std::collections::HashSet;
        let mut data = samples(53);
        data[0].label = LabelCategory::E1;
        data[1].label = LabelCategory::O;
        let split = split_dataset(&data, 7).unwrap();
        let all: Vec<_> = split
            .train
            .iter()
            .chain(&split.validation)
            .chain(&split.test)
            .collect();
        assert_eq!(all.len(), 51);
        let ids: HashSet<_> = all.iter().map(|s| &s.id).collect();
        assert_eq!(ids.len(), 51);
        assert!(all.iter().all(|s| s.label.class_index().is_some()));
    }

    #[test]
    fn too_few_samples_is_error() {
        assert!(split_dataset(&samples(9), 0).is_err());
    }
}
