//! Dataset schema, synthetic generation, text embedding, and split
//! management for the object-manipulation instruction task.

pub mod embed;
pub mod jsonl;
pub mod split;
pub mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;

pub use embed::{embed_name, embed_situation, embed_text, EMBED_DIM};
pub use jsonl::{load_jsonl, save_jsonl};
pub use split::{split_dataset, DatasetSplit};
pub use synth::{generate_synthetic, SynthConfig, SYNSETS};

/// Raw input width: name embedding (200) + situation embedding (200).
pub const RAW_DIM: usize = 2 * EMBED_DIM;
/// Number of trainable classes (N, M0, M1, M2).
pub const NUM_CLASSES: usize = 4;

/// Annotation category. Only N/M0/M1/M2 are trainable; E1/E2/O are
/// excluded before splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelCategory {
    E1,
    E2,
    N,
    M0,
    M1,
    M2,
    O,
}

impl LabelCategory {
    /// Stable class index for trainable labels: N=0, M0=1, M1=2, M2=3.
    pub fn class_index(self) -> Option<usize> {
        match self {
            LabelCategory::N => Some(0),
            LabelCategory::M0 => Some(1),
            LabelCategory::M1 => Some(2),
            LabelCategory::M2 => Some(3),
            _ => None,
        }
    }

    pub fn from_class_index(i: usize) -> Option<LabelCategory> {
        match i {
            0 => Some(LabelCategory::N),
            1 => Some(LabelCategory::M0),
            2 => Some(LabelCategory::M1),
            3 => Some(LabelCategory::M2),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LabelCategory::E1 => "E1",
            LabelCategory::E2 => "E2",
            LabelCategory::N => "N",
            LabelCategory::M0 => "M0",
            LabelCategory::M1 => "M1",
            LabelCategory::M2 => "M2",
            LabelCategory::O => "O",
        }
    }
}

impl std::str::FromStr for LabelCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "E1" => Ok(LabelCategory::E1),
            "E2" => Ok(LabelCategory::E2),
            "N" => Ok(LabelCategory::N),
            "M0" => Ok(LabelCategory::M0),
            "M1" => Ok(LabelCategory::M1),
            "M2" => Ok(LabelCategory::M2),
            "O" => Ok(LabelCategory::O),
            other => Err(Error::Validation(format!("unknown label {other:?}"))),
        }
    }
}

/// One trajector-in-scene record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub id: String,
    pub synset: String,
    /// Name candidates, e.g. `["cups in stack", "stacked cups"]`.
    pub name_candidates: Vec<String>,
    pub situation_sentences: Vec<String>,
    pub label: LabelCategory,
}

/// A sample embedded into the 400-dim raw feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSample {
    pub id: String,
    pub x_name: Vec<f64>,
    pub x_situation: Vec<f64>,
    /// One-hot label over the 4 trainable classes.
    pub y: [f64; NUM_CLASSES],
}

impl EmbeddedSample {
    pub fn from_raw(raw: &RawSample, embed_seed: u64) -> Result<Self> {
        let class = raw.label.class_index().ok_or_else(|| {
            Error::Validation(format!(
                "sample {} has non-trainable label {}",
                raw.id,
                raw.label.as_str()
            ))
        })?;
        let x_name = embed_name(&raw.name_candidates, embed_seed)?;
        let x_situation = embed_situation(&raw.situation_sentences, embed_seed);
        let mut y = [0.0; NUM_CLASSES];
        y[class] = 1.0;
        Ok(EmbeddedSample {
            id: raw.id.clone(),
            x_name,
            x_situation,
            y,
        })
    }

    pub fn class_index(&self) -> usize {
        self.y.iter().position(|&v| v == 1.0).expect("one-hot label")
    }
}

/// Keep only trainable (N/M0/M1/M2) samples.
pub fn filter_labels(samples: &[RawSample]) -> Vec<RawSample> {
    samples
        .iter()
        .filter(|s| s.label.class_index().is_some())
        .cloned()
        .collect()
}

/// Stack x_raw = concat(x_name, x_situation) for a batch, plus one-hot labels.
pub fn batch_matrices(samples: &[&EmbeddedSample]) -> Result<(Mat, Mat)> {
    let mut x = Mat::zeros(samples.len(), RAW_DIM);
    let mut y = Mat::zeros(samples.len(), NUM_CLASSES);
    for (i, s) in samples.iter().enumerate() {
        if s.x_name.len() != EMBED_DIM || s.x_situation.len() != EMBED_DIM {
            return Err(Error::dim(
                "embedded sample width",
                s.x_name.len() + s.x_situation.len(),
                RAW_DIM,
            ));
        }
        let row = x.row_mut(i);
        row[..EMBED_DIM].copy_from_slice(&s.x_name);
        row[EMBED_DIM..].copy_from_slice(&s.x_situation);
        y.row_mut(i).copy_from_slice(&s.y);
    }
    Ok((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_index_mapping_is_stable() {
        assert_eq!(LabelCategory::N.class_index(), Some(0));
        assert_eq!(LabelCategory::M0.class_index(), Some(1));
        assert_eq!(LabelCategory::M1.class_index(), Some(2));
        assert_eq!(LabelCategory::M2.class_index(), Some(3));
        assert_eq!(LabelCategory::E1.class_index(), None);
        assert_eq!(LabelCategory::E2.class_index(), None);
        assert_eq!(LabelCategory::O.class_index(), None);
    }

    #[test]
    fn filter_drops_excluded_labels() {
        let mk = |id: &str, label| RawSample {
            id: id.into(),
            synset: "cup".into(),
            name_candidates: vec!["cup".into()],
            situation_sentences: vec![],
            label,
        };
        let samples = vec![
            mk("a", LabelCategory::E1),
            mk("b", LabelCategory::N),
            mk("c", LabelCategory::O),
            mk("d", LabelCategory::M2),
        ];
        let kept = filter_labels(&samples);
        assert_eq!(kept.len(), 2);
        assert!(kept.iter().all(|s| s.label.class_index().is_some()));
    }

    #[test]
    fn x_raw_is_400_wide_name_then_situation() {
        let raw = RawSample {
            id: "s1".into(),
            synset: "cup".into(),
            name_candidates: vec!["red cup".into()],
            situation_sentences: vec!["the table is clear".into()],
            label: LabelCategory::M2,
        };
        let e = EmbeddedSample::from_raw(&raw, 0).unwrap();
        let (x, y) = batch_matrices(&[&e]).unwrap();
        assert_eq!(x.cols(), 400);
        assert_eq!(y.row(0), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(&x.row(0)[..200], e.x_name.as_slice());
        assert_eq!(&x.row(0)[200..], e.x_situation.as_slice());
    }
}
