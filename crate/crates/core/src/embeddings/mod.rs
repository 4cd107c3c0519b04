//! Contextual word and question embeddings behind a provider contract.

mod cache;
mod fixture;

pub use cache::{build_cache, CachedProvider, EmbeddingCache, CACHE_FORMAT_VERSION, CACHE_MAGIC};
pub use fixture::FixtureProvider;

use crate::corpus::{Paragraph, ParagraphKey, Question};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("no embedding for {0}")]
    Missing(String),
    #[error("word {word} has no tokens (tokenization mismatch)")]
    UntokenizedWord { word: usize },
    #[error("token {token} maps to word {word} outside {n_words} words")]
    TokenOutOfRange { token: usize, word: usize, n_words: usize },
    #[error("expected dimension {expected}, found {found}")]
    Dim { expected: usize, found: usize },
    #[error("non-finite embedding for {0}")]
    NonFinite(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("embedding cache: {0}")]
    Format(String),
}

/// One row per paragraph word.
#[derive(Debug, Clone, PartialEq)]
pub struct WordEmbeddings<T> {
    pub paragraph: ParagraphKey,
    pub vectors: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuestionEmbedding<T> {
    pub question_id: String,
    pub vector: Vec<T>,
}

/// Source of embeddings. Results depend only on the text identity and the
/// provider version.
pub trait EmbeddingProvider<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;
    fn version(&self) -> &str;
    /// Encoder layer the vectors come from.
    fn layer(&self) -> &str;
    fn dim(&self) -> usize;
    fn word_embeddings(&self, paragraph: &Paragraph) -> Result<WordEmbeddings<T>, EmbeddingError>;
    /// Aggregate embedding of the question text on its own.
    fn question_embedding(&self, question: &Question) -> Result<QuestionEmbedding<T>, EmbeddingError>;
    /// Token-level vectors of a free text, one row per token.
    fn token_embeddings(&self, text: &str) -> Result<Matrix<T>, EmbeddingError>;
}

/// Sums token vectors into word vectors. `token_to_word[t]` is `None` for
/// special tokens.
pub fn pool_tokens_to_words<T: Scalar>(
    tokens: &Matrix<T>,
    token_to_word: &[Option<usize>],
    n_words: usize,
) -> Result<Matrix<T>, EmbeddingError> {
    assert_eq!(tokens.rows(), token_to_word.len(), "one word mapping per token");
    let mut out = Matrix::zeros(n_words, tokens.cols());
    let mut seen = vec![false; n_words];
    for (t, w) in token_to_word.iter().enumerate() {
        let Some(w) = *w else { continue };
        if w >= n_words {
            return Err(EmbeddingError::TokenOutOfRange {
                token: t,
                word: w,
                n_words,
            });
        }
        seen[w] = true;
        for (d, &x) in out.row_mut(w).iter_mut().zip(tokens.row(t)) {
            *d += x;
        }
    }
    if let Some(word) = seen.iter().position(|s| !s) {
        return Err(EmbeddingError::UntokenizedWord { word });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooling_sums_pieces() {
        let t = Matrix::from_rows(&[[0.0f64, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 2.0]]);
        let w = pool_tokens_to_words(&t, &[None, Some(0), Some(0), Some(1)], 2).unwrap();
        assert_eq!(w.row(0), &[1.0, 1.0]);
        assert_eq!(w.row(1), &[2.0, 2.0]);
        assert!(matches!(
            pool_tokens_to_words(&t, &[None, Some(0), Some(0), Some(0)], 2),
            Err(EmbeddingError::UntokenizedWord { word: 1 })
        ));
    }
}
