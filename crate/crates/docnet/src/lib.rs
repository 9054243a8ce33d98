//! docnet builds two complementary embedding spaces for a scholarly corpus:
//! a *semantic* space from article text (document-term matrices, topic
//! models, paragraph vectors, imported vectors) and a *relational* space from
//! the citation network (graph autoencoders trained on link prediction),
//! plus the descriptive network statistics and the embedding-analysis suite
//! used to compare the two.

pub mod analysis;
pub mod autodiff;
pub mod corpus;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod matrix;
pub mod rng;
pub mod scalar;
pub mod sparse;
pub mod textembed;

pub use error::{Error, Result};
pub use matrix::DenseMatrix;
pub use scalar::Scalar;
pub use sparse::CsrMatrix;

/// Dense `f64` matrix, the training precision.
pub type Mat = DenseMatrix<f64>;
/// Dense `f32` matrix, the storage precision of embedding files.
pub type Mat32 = DenseMatrix<f32>;
