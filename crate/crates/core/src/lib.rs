//! Imbalance-aware ensembles and dynamic classifier selection for binary
//! malware detection.
//!
//! The crate covers the whole pipeline: loading binary feature vectors,
//! balancing training data with SMOTE (once on the whole set, or per
//! bootstrap with Bootstrap-Based Balancing), training pools of decision
//! trees, kNN or Bernoulli naive Bayes members, combining them statically or
//! with dynamic selectors (OLA, KNOP, META-DES), and scoring the result with
//! metrics that stay meaningful under heavy imbalance.
//!
//! ```
//! use imbalanced_ds::balancing::{smote, SmoteConfig};
//! use imbalanced_ds::synthetic::{gaussian_blobs, BlobConfig};
//!
//! let data = gaussian_blobs(&BlobConfig { n: 210, imbalance_ratio: 20.0, ..BlobConfig::default() })?;
//! assert_eq!(data.class_counts().positive, 10);
//!
//! let balanced = smote(&data, &SmoteConfig::default())?;
//! assert_eq!(balanced.class_counts().positive, balanced.class_counts().negative);
//! # Ok::<(), imbalanced_ds::Error>(())
//! ```

pub mod artifact;
pub mod balancing;
pub mod classifiers;
pub mod dataset;
pub mod dynsel;
mod error;
pub mod hardness;
pub mod harness;
pub mod metrics;
pub mod neighbors;
pub mod pool;
pub mod synthetic;

pub use classifiers::{Classifier, Model};
pub use dataset::{Dataset, Label, SparseRow};
pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/balancing.md")]
    mod balancing {}
    #[doc = include_str!("../../../book/src/classifiers.md")]
    mod classifiers {}
    #[doc = include_str!("../../../book/src/pools.md")]
    mod pools {}
    #[doc = include_str!("../../../book/src/dynamic-selection.md")]
    mod dynamic_selection {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/hardness.md")]
    mod hardness {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
