//! Dataset model: labelled feature records organized into the four
//! protocol splits, plus the preprocessing steps every detector shares.
//!
//! Splits carry distinct roles. Enrolment holds each client's real-access
//! frames and feeds the client-specific models; Train pools real-access
//! frames of disjoint subjects for the client-independent baseline; Dev is
//! scored to calibrate thresholds; Test is scored for final error rates.
//! Enrolment and Train never contain attacks, and that is enforced both at
//! parse time and again before training.

pub mod format;
pub mod synth;

use crate::error::{Error, Result};
use crate::linalg::{l2_normalize, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Real,
    Attack,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Attack => "attack",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SplitName {
    Enrolment,
    Train,
    Dev,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 4] =
        [SplitName::Enrolment, SplitName::Train, SplitName::Dev, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Enrolment => "enrolment",
            SplitName::Train => "train",
            SplitName::Dev => "dev",
            SplitName::Test => "test",
        }
    }

    pub fn parse(tok: &str) -> Option<SplitName> {
        match tok {
            "enrolment" => Some(SplitName::Enrolment),
            "train" => Some(SplitName::Train),
            "dev" => Some(SplitName::Dev),
            "test" => Some(SplitName::Test),
            _ => None,
        }
    }
}

/// One feature vector extracted from one video frame.
///
/// `attack_type` is `Some` exactly when `label == Attack`; the constructor
/// refuses the other combinations so the invariant holds everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub client_id: String,
    pub label: Label,
    pub attack_type: Option<String>,
    pub video_id: String,
    pub frame_index: u32,
    pub vector: Vector,
}

/// Identifier tokens go into an unquoted comma-separated file format, so the
/// alphabet is restricted up front.
pub fn valid_id(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

impl FeatureRecord {
    pub fn new(
        client_id: String,
        label: Label,
        attack_type: Option<String>,
        video_id: String,
        frame_index: u32,
        vector: Vector,
    ) -> Result<Self> {
        if !valid_id(&client_id) {
            return Err(Error::Validation(format!("invalid client id {client_id:?}")));
        }
        if !valid_id(&video_id) {
            return Err(Error::Validation(format!("invalid video id {video_id:?}")));
        }
        match (label, &attack_type) {
            (Label::Real, Some(_)) => {
                return Err(Error::Validation("real record cannot carry an attack type".into()))
            }
            (Label::Attack, None) => {
                return Err(Error::Validation("attack record must carry an attack type".into()))
            }
            (Label::Attack, Some(t)) if !valid_id(t) => {
                return Err(Error::Validation(format!("invalid attack type {t:?}")))
            }
            _ => {}
        }
        Ok(FeatureRecord { client_id, label, attack_type, video_id, frame_index, vector })
    }
}

/// A named, ordered collection of records of one common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub name: SplitName,
    pub records: Vec<FeatureRecord>,
}

impl Split {
    pub fn empty(name: SplitName) -> Self {
        Split { name, records: Vec::new() }
    }

    /// Real-only check for the model-building splits.
    pub fn ensure_real_only(&self) -> Result<()> {
        for r in &self.records {
            if r.label != Label::Real {
                return Err(Error::DataIntegrity(format!(
                    "{} split must contain only real-access records, found attack for client {} video {}",
                    self.name.as_str(),
                    r.client_id,
                    r.video_id
                )));
            }
        }
        Ok(())
    }

    pub fn client_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.records.iter().map(|r| r.client_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// The four splits plus the common feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub enrolment: Split,
    pub train: Split,
    pub dev: Split,
    pub test: Split,
}

impl Dataset {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("feature dimension must be positive".into()));
        }
        Ok(Dataset {
            dim,
            enrolment: Split::empty(SplitName::Enrolment),
            train: Split::empty(SplitName::Train),
            dev: Split::empty(SplitName::Dev),
            test: Split::empty(SplitName::Test),
        })
    }

    pub fn split(&self, name: SplitName) -> &Split {
        match name {
            SplitName::Enrolment => &self.enrolment,
            SplitName::Train => &self.train,
            SplitName::Dev => &self.dev,
            SplitName::Test => &self.test,
        }
    }

    pub fn split_mut(&mut self, name: SplitName) -> &mut Split {
        match name {
            SplitName::Enrolment => &mut self.enrolment,
            SplitName::Train => &mut self.train,
            SplitName::Dev => &mut self.dev,
            SplitName::Test => &mut self.test,
        }
    }

    /// Appends a record, enforcing the dimension and the real-only rule for
    /// Enrolment and Train.
    pub fn push(&mut self, split: SplitName, record: FeatureRecord) -> Result<()> {
        if record.vector.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: record.vector.dim() });
        }
        if matches!(split, SplitName::Enrolment | SplitName::Train) && record.label == Label::Attack
        {
            return Err(Error::DataIntegrity(format!(
                "{} split must contain only real-access records, found attack for client {} video {}",
                split.as_str(),
                record.client_id,
                record.video_id
            )));
        }
        self.split_mut(split).records.push(record);
        Ok(())
    }

    pub fn total_records(&self) -> usize {
        SplitName::ALL.iter().map(|&s| self.split(s).records.len()).sum()
    }
}

/// Scales every feature vector in the split to unit Euclidean norm.
///
/// All three detectors consume normalized vectors, so this runs once per
/// split rather than once per detector. A zero vector is reported with the
/// identity of the offending record.
pub fn preprocess(split: &Split) -> Result<Split> {
    let mut records = Vec::with_capacity(split.records.len());
    for r in &split.records {
        let vector = l2_normalize(&r.vector).map_err(|_| {
            Error::DegenerateInput(format!(
                "zero feature vector for client {} video {} frame {}",
                r.client_id, r.video_id, r.frame_index
            ))
        })?;
        records.push(FeatureRecord { vector, ..r.clone() });
    }
    Ok(Split { name: split.name, records })
}

/// Deterministic, order-preserving subsample of `ceil(fraction * len)`
/// items taken at an even stride.
///
/// Item `i` of the output is input index `(i * len) / m` (integer
/// arithmetic), so the same fraction always selects the same indices; there
/// is no randomness to seed. `fraction` must lie in `(0, 1]`, and
/// `fraction == 1` returns everything.
pub fn subsample<T: Clone>(items: &[T], fraction: f64) -> Result<Vec<T>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Validation(format!("fraction must be in (0, 1], got {fraction}")));
    }
    let n = items.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let m = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    Ok((0..m).map(|i| items[i * n / m].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(client: &str, label: Label, video: &str, frame: u32, v: Vec<f64>) -> FeatureRecord {
        let attack_type = match label {
            Label::Real => None,
            Label::Attack => Some("print".to_string()),
        };
        FeatureRecord::new(client.into(), label, attack_type, video.into(), frame, Vector::new(v).unwrap())
            .unwrap()
    }

    #[test]
    fn push_enforces_dimension_and_split_purity() {
        let mut ds = Dataset::new(2).unwrap();
        ds.push(SplitName::Enrolment, rec("c1", Label::Real, "v1", 0, vec![1.0, 0.0])).unwrap();
        let wrong_dim = rec("c1", Label::Real, "v1", 1, vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            ds.push(SplitName::Enrolment, wrong_dim),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
        let attack = rec("c1", Label::Attack, "v2", 0, vec![0.5, 0.5]);
        assert!(matches!(ds.push(SplitName::Train, attack), Err(Error::DataIntegrity(_))));
        let attack = rec("c1", Label::Attack, "v2", 0, vec![0.5, 0.5]);
        ds.push(SplitName::Dev, attack).unwrap();
        assert_eq!(ds.total_records(), 2);
    }

    #[test]
    fn record_label_attack_type_pairing() {
        let v = Vector::new(vec![1.0]).unwrap();
        assert!(FeatureRecord::new("c".into(), Label::Real, Some("print".into()), "v".into(), 0, v.clone())
            .is_err());
        assert!(FeatureRecord::new("c".into(), Label::Attack, None, "v".into(), 0, v.clone()).is_err());
        assert!(FeatureRecord::new("c".into(), Label::Attack, Some("hi res!".into()), "v".into(), 0, v.clone())
            .is_err());
        assert!(FeatureRecord::new("c/1".into(), Label::Real, None, "v".into(), 0, v).is_err());
    }

    #[test]
    fn preprocess_normalizes_every_record_and_names_offenders() {
        let mut split = Split::empty(SplitName::Dev);
        split.records.push(rec("c1", Label::Real, "v1", 0, vec![3.0, 4.0]));
        let out = preprocess(&split).unwrap();
        assert!((out.records[0].vector[0] - 0.6).abs() < 1e-15);
        split.records.push(rec("c9", Label::Real, "vz", 7, vec![0.0, 0.0]));
        let err = preprocess(&split).unwrap_err().to_string();
        assert!(err.contains("c9") && err.contains("vz") && err.contains('7'), "{err}");
    }

    #[test]
    fn preprocess_is_idempotent() {
        let mut split = Split::empty(SplitName::Dev);
        split.records.push(rec("c1", Label::Real, "v1", 0, vec![0.1, -2.4, 0.7]));
        split.records.push(rec("c1", Label::Real, "v1", 1, vec![5.0, 5.0, 5.0]));
        let once = preprocess(&split).unwrap();
        let twice = preprocess(&once).unwrap();
        for (a, b) in once.records.iter().zip(&twice.records) {
            for i in 0..3 {
                assert!((a.vector[i] - b.vector[i]).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn subsample_stride_examples() {
        let items: Vec<u32> = (0..100).collect();
        let out = subsample(&items, 0.1).unwrap();
        let expect: Vec<u32> = (0..10).map(|i| i * 10).collect();
        assert_eq!(out, expect);

        assert_eq!(subsample(&items, 1.0).unwrap(), items);
        assert_eq!(subsample(&items, 0.005).unwrap(), vec![0]);
        assert!(subsample(&items, 0.0).is_err());
        assert!(subsample(&items, 1.5).is_err());
        let empty: Vec<u32> = vec![];
        assert_eq!(subsample(&empty, 0.5).unwrap(), empty);
    }

    #[test]
    fn subsample_sizes_are_ceil_and_indices_strictly_increase() {
        for n in 1usize..60 {
            let items: Vec<usize> = (0..n).collect();
            for &f in &[0.01, 0.1, 1.0 / 3.0, 0.5, 0.75, 0.99, 1.0] {
                let out = subsample(&items, f).unwrap();
                let expect_m = ((f * n as f64).ceil() as usize).min(n);
                assert_eq!(out.len(), expect_m, "n={n} f={f}");
                for w in out.windows(2) {
                    assert!(w[0] < w[1]);
                }
            }
        }
    }

    #[test]
    fn split_purity_check_reports_the_culprit() {
        let mut split = Split::empty(SplitName::Train);
        split.records.push(rec("c1", Label::Real, "v1", 0, vec![1.0]));
        assert!(split.ensure_real_only().is_ok());
        split.records.push(rec("c2", Label::Attack, "v9", 0, vec![1.0]));
        let err = split.ensure_real_only().unwrap_err().to_string();
        assert!(err.contains("c2") && err.contains("v9"));
    }
}
