//! Audio moment retrieval toolkit: synthetic long-form data generation,
//! set-prediction losses, retrieval metrics, embedding stores and a
//! sliding-window similarity baseline.

pub mod assignment;
pub mod audio;
pub mod baseline;
pub mod embeddings;
pub mod error;
pub mod losses;
pub mod manifest;
pub mod metrics;
pub mod predictions;
pub mod simulate;
pub mod span;

pub use embeddings::{EmbeddingStore, StoreKind, STORE_FORMAT_VERSION};
pub use error::{Error, Result};
pub use manifest::{AudioItem, MomentAnnotation, MANIFEST_FORMAT_VERSION};
pub use span::{Candidate, NormalizedMoment, Span};
