//! Client-specific one-class anomaly detection for face presentation
//! attacks.
//!
//! Spoofing countermeasures are usually trained as two-class problems, but
//! attack styles seen in training rarely match the ones met in the field.
//! This crate takes the other route: every model here learns only what
//! *real* access attempts look like, per enrolled client, and flags
//! anything unlike them. Nothing about any attack enters training, so an
//! unseen attack instrument is no different from a seen one at test time.
//!
//! Three one-class detectors share one interface:
//!
//! * [`ocsvm`]: a ν-parameterized one-class SVM with an RBF kernel,
//!   trained by sequential minimal optimization.
//! * [`ocsrc`]: sparse reconstruction against a dictionary of the client's
//!   own enrolment frames; the score is the L2 residual after an L1
//!   homotopy solve.
//! * [`mahalanobis`]: distance in a PCA-whitened subspace of the
//!   enrolment data.
//!
//! [`registry`] trains one model per enrolled client (or one pooled model
//!   for the client-independent baseline) and routes queries by claimed
//!   identity. [`evaluation`] calibrates thresholds on a development set
//!   (globally or per client), fuses frame scores per video, and grades
//!   EER / HTER / AUC. [`dataset`] holds the feature-file format and a
//!   synthetic generator used by the tests and examples.
//!
//! Per-client work (training, scoring) runs in parallel via rayon when the
//! `parallel` feature is on (default); disabling it yields a dependency-free
//! sequential build with bit-identical results.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod linalg;
pub mod mahalanobis;
pub mod ocsrc;
pub mod ocsvm;
pub mod registry;

pub use dataset::{Dataset, FeatureRecord, Label, Split, SplitName};
pub use error::{Error, Result};
pub use evaluation::{evaluate, EvalReport, Granularity, PolicyKind, ScoreSet};
pub use linalg::Vector;
pub use registry::{
    load_registry, save_registry, train_registry, DetectorKind, DetectorParams, DetectorSpec,
    Mode, ModelRegistry,
};
