//! Model registries: one detector per enrolled client, or one pooled
//! detector shared by everyone.
//!
//! The client-specific flavor trains on each client's own enrolment frames
//! and routes a query to the model of the identity it claims; the
//! client-independent flavor trains a single model on the train split
//! (disjoint subjects) and ignores the claim. Both apply the same
//! preprocessing: L2 normalization, then a deterministic stride subsample
//! of `train_fraction` of the frames.
//!
//! Per-client training is independent across clients and runs through the
//! data-parallel executor; results are merged in client order, so the
//! registry comes out identical however many workers ran.

mod serial;

pub use serial::{load_registry, parse_registry, render_registry, save_registry};

use crate::dataset::{preprocess, subsample, Dataset, Split};
use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::{l2_normalize, Vector};
use crate::mahalanobis::{fit_pca, md_score, PcaModel};
use crate::ocsrc::{build_dictionary, ocsrc_score, Dictionary, HomotopyConfig};
use crate::ocsvm::{auto_gamma, ocsvm_score, train_ocsvm, OcsvmModel, RbfKernel};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// One model per enrolled client, fed by the enrolment split.
    ClientSpecific,
    /// One pooled model, fed by the train split.
    ClientIndependent,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::ClientSpecific => "spe",
            Mode::ClientIndependent => "ind",
        }
    }

    pub fn parse(tok: &str) -> Option<Mode> {
        match tok {
            "spe" => Some(Mode::ClientSpecific),
            "ind" => Some(Mode::ClientIndependent),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    Ocsvm,
    Ocsrc,
    Md,
}

impl DetectorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Ocsvm => "ocsvm",
            DetectorKind::Ocsrc => "ocsrc",
            DetectorKind::Md => "md",
        }
    }

    pub fn parse(tok: &str) -> Option<DetectorKind> {
        match tok {
            "ocsvm" => Some(DetectorKind::Ocsvm),
            "ocsrc" => Some(DetectorKind::Ocsrc),
            "md" => Some(DetectorKind::Md),
            _ => None,
        }
    }
}

/// Detector family plus its hyperparameters; only the fields of the chosen
/// family exist.
#[derive(Debug, Clone, PartialEq)]
pub enum DetectorParams {
    Ocsvm {
        nu: f64,
        /// `None` selects the median-distance heuristic per trained model.
        gamma: Option<f64>,
    },
    Ocsrc {
        dict_fraction: f64,
        homotopy: HomotopyConfig,
    },
    Md {
        variance_fraction: f64,
    },
}

impl DetectorParams {
    pub fn kind(&self) -> DetectorKind {
        match self {
            DetectorParams::Ocsvm { .. } => DetectorKind::Ocsvm,
            DetectorParams::Ocsrc { .. } => DetectorKind::Ocsrc,
            DetectorParams::Md { .. } => DetectorKind::Md,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DetectorParams::Ocsvm { nu, gamma } => {
                if !(*nu > 0.0 && *nu <= 1.0) {
                    return Err(Error::Validation(format!("nu must be in (0, 1], got {nu}")));
                }
                if let Some(g) = gamma {
                    if !(*g > 0.0 && g.is_finite()) {
                        return Err(Error::Validation(format!("gamma must be positive, got {g}")));
                    }
                }
            }
            DetectorParams::Ocsrc { dict_fraction, homotopy } => {
                if !(*dict_fraction > 0.0 && *dict_fraction <= 1.0) {
                    return Err(Error::Validation(format!(
                        "dictionary fraction must be in (0, 1], got {dict_fraction}"
                    )));
                }
                homotopy.validate()?;
            }
            DetectorParams::Md { variance_fraction } => {
                if !(*variance_fraction > 0.0 && *variance_fraction <= 1.0) {
                    return Err(Error::Validation(format!(
                        "variance fraction must be in (0, 1], got {variance_fraction}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Everything needed to train a registry: mode, the shared training-set
/// subsample fraction, and the detector parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSpec {
    pub mode: Mode,
    pub train_fraction: f64,
    pub params: DetectorParams,
}

impl DetectorSpec {
    pub fn kind(&self) -> DetectorKind {
        self.params.kind()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Validation(format!(
                "train fraction must be in (0, 1], got {}",
                self.train_fraction
            )));
        }
        self.params.validate()
    }
}

/// One fitted detector.
#[derive(Debug, Clone, PartialEq)]
pub enum DetectorModel {
    Ocsvm(OcsvmModel),
    Ocsrc { dictionary: Dictionary, homotopy: HomotopyConfig },
    Md(PcaModel),
}

impl DetectorModel {
    pub fn kind(&self) -> DetectorKind {
        match self {
            DetectorModel::Ocsvm(_) => DetectorKind::Ocsvm,
            DetectorModel::Ocsrc { .. } => DetectorKind::Ocsrc,
            DetectorModel::Md(_) => DetectorKind::Md,
        }
    }

    /// Scores an already-normalized vector; higher means more anomalous.
    pub fn score(&self, x: &Vector) -> Result<f64> {
        match self {
            DetectorModel::Ocsvm(m) => ocsvm_score(m, x),
            DetectorModel::Ocsrc { dictionary, homotopy } => ocsrc_score(dictionary, x, homotopy),
            DetectorModel::Md(m) => md_score(m, x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRegistry {
    pub spec: DetectorSpec,
    /// Client-specific models, present exactly in client-specific mode.
    pub per_client: BTreeMap<String, DetectorModel>,
    /// Pooled model, present exactly in client-independent mode.
    pub pooled: Option<DetectorModel>,
}

impl ModelRegistry {
    pub fn client_ids(&self) -> Vec<&str> {
        self.per_client.keys().map(String::as_str).collect()
    }
}

fn train_one(params: &DetectorParams, vectors: &[Vector]) -> Result<DetectorModel> {
    match params {
        DetectorParams::Ocsvm { nu, gamma } => {
            let g = match gamma {
                Some(g) => *g,
                None => auto_gamma(vectors)?,
            };
            let kernel = RbfKernel::new(g)?;
            Ok(DetectorModel::Ocsvm(train_ocsvm(vectors, *nu, kernel)?))
        }
        DetectorParams::Ocsrc { dict_fraction, homotopy } => Ok(DetectorModel::Ocsrc {
            dictionary: build_dictionary(vectors, *dict_fraction)?,
            homotopy: homotopy.clone(),
        }),
        DetectorParams::Md { variance_fraction } => {
            Ok(DetectorModel::Md(fit_pca(vectors, *variance_fraction)?))
        }
    }
}

/// Normalized, subsampled training vectors for one client or the pool.
fn prepared_vectors(split: &Split, fraction: f64) -> Result<Vec<Vector>> {
    let normalized = preprocess(split)?;
    let vectors: Vec<Vector> = normalized.records.into_iter().map(|r| r.vector).collect();
    subsample(&vectors, fraction)
}

pub fn train_registry(spec: &DetectorSpec, data: &Dataset) -> Result<ModelRegistry> {
    spec.validate()?;
    match spec.mode {
        Mode::ClientSpecific => {
            let source = &data.enrolment;
            source.ensure_real_only()?;
            if source.records.is_empty() {
                return Err(Error::Validation("enrolment split is empty; nothing to enrol".into()));
            }
            // Group per client preserving record order within each group.
            let mut groups: BTreeMap<&str, Split> = BTreeMap::new();
            for r in &source.records {
                groups
                    .entry(r.client_id.as_str())
                    .or_insert_with(|| Split::empty(source.name))
                    .records
                    .push(r.clone());
            }
            let jobs: Vec<(&str, Split)> = groups.into_iter().collect();
            let results = exec::par_map(&jobs, |(client, split)| {
                let vectors = prepared_vectors(split, spec.train_fraction)
                    .and_then(|v| train_one(&spec.params, &v));
                (client.to_string(), vectors)
            });
            let mut per_client = BTreeMap::new();
            for (client, result) in results {
                match result {
                    Ok(model) => {
                        per_client.insert(client, model);
                    }
                    Err(e) => {
                        return Err(Error::ClientTraining { client, message: e.to_string() })
                    }
                }
            }
            Ok(ModelRegistry { spec: spec.clone(), per_client, pooled: None })
        }
        Mode::ClientIndependent => {
            let source = &data.train;
            source.ensure_real_only()?;
            if source.records.is_empty() {
                return Err(Error::Validation("train split is empty; nothing to fit".into()));
            }
            let vectors = prepared_vectors(source, spec.train_fraction)?;
            let pooled = train_one(&spec.params, &vectors)?;
            Ok(ModelRegistry { spec: spec.clone(), per_client: BTreeMap::new(), pooled: Some(pooled) })
        }
    }
}

/// Scores a raw (unnormalized) query against the model selected by the
/// claimed identity. Client-independent registries ignore the claim.
pub fn score_query(registry: &ModelRegistry, claimed_id: &str, x: &Vector) -> Result<f64> {
    let normalized = l2_normalize(x)?;
    match registry.spec.mode {
        Mode::ClientSpecific => {
            let model = registry
                .per_client
                .get(claimed_id)
                .ok_or_else(|| Error::UnknownClient(claimed_id.to_string()))?;
            model.score(&normalized)
        }
        Mode::ClientIndependent => {
            let model = registry
                .pooled
                .as_ref()
                .ok_or_else(|| Error::ModelFile("registry has no pooled model".into()))?;
            model.score(&normalized)
        }
    }
}
