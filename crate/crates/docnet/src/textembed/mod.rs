//! Semantic document embeddings: document-term matrices, topic models,
//! paragraph vectors, and ingestion of externally computed vectors.

mod dtm;
mod embio;
mod lda;
mod pvdm;

pub use dtm::{build_dtm, DocumentTermMatrix, Weighting};
pub use embio::{load_external_embeddings, read_embedding, write_embedding, EmbeddingFormat};
pub use lda::{
    conditional_topic_weights, lda_doc_topics, lda_fit, topic_relative_importance, LdaConfig,
    TopicModel,
};
pub use pvdm::{negative_sampling_loss, pvdm_fit, PvdmConfig};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// Provenance of an embedding matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingKind {
    LdaTheta,
    Pvdm,
    External,
    Gnn,
}

impl EmbeddingKind {
    pub fn name(self) -> &'static str {
        match self {
            EmbeddingKind::LdaTheta => "lda-theta",
            EmbeddingKind::Pvdm => "pvdm",
            EmbeddingKind::External => "external",
            EmbeddingKind::Gnn => "gnn",
        }
    }
}

/// One row per document, labeled by article id.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix<S: Scalar> {
    ids: Vec<String>,
    data: DenseMatrix<S>,
    pub kind: EmbeddingKind,
}

impl<S: Scalar> EmbeddingMatrix<S> {
    pub fn new(ids: Vec<String>, data: DenseMatrix<S>, kind: EmbeddingKind) -> Result<Self> {
        if ids.len() != data.rows() {
            return Err(Error::ShapeMismatch {
                op: "embedding",
                details: format!("{} ids vs {} rows", ids.len(), data.rows()),
            });
        }
        if data.cols() == 0 || data.rows() == 0 {
            return Err(Error::EmptyMatrix("embedding must be non-empty".into()));
        }
        if !data.is_finite() {
            return Err(Error::InvalidArgument(
                "embedding contains non-finite values".into(),
            ));
        }
        Ok(Self { ids, data, kind })
    }

    pub fn n(&self) -> usize {
        self.data.rows()
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &DenseMatrix<S> {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[S] {
        self.data.row(i)
    }

    pub fn row_of(&self, id: &str) -> Option<&[S]> {
        self.ids.iter().position(|x| x == id).map(|i| self.data.row(i))
    }
}

/// Embedding in training precision.
pub type Embedding = EmbeddingMatrix<f64>;
