//! Unsupervised word sense induction.
//!
//! Two pipelines share one graph-clustering core:
//!
//! * [`method_one`] clusters the embedding-space neighbours of a lemma and
//!   assigns each occurrence to the cluster closest to its averaged context
//!   vector.
//! * [`method_two`] samples masked-LM substitutes for every occurrence into
//!   sparse representative vectors, TF-IDF weights and clusters them, and maps
//!   each occurrence to the cluster holding most of its vectors.
//!
//! [`evaluation`] scores either output against gold senses with BCubed
//! precision and recall.

pub mod clustering;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod method_one;
pub mod method_two;
pub mod seed;
pub mod sparse;
pub mod synthetic;

pub use clustering::{chinese_whispers, Clustering, EdgeRule, WeightedGraph};
pub use corpus::{Corpus, Occurrence, Pos, SenseInventory};
pub use embeddings::{EmbeddingStore, Neighbor};
pub use error::{Error, Result};
