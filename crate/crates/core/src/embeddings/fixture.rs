use std::collections::HashMap;
use std::marker::PhantomData;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::{EmbeddingError, EmbeddingProvider, QuestionEmbedding, WordEmbeddings};
use crate::corpus::{Corpus, Paragraph, Question, Span};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::text::{is_stopword, normalize_word, word_tokens};

/// Deterministic test double: unit-norm Gaussian vectors keyed by stable ids.
///
/// With `lexical > 0` a word vector mixes in the vector of its surface form,
/// and unplanted questions embed as the mean of their content-token vectors,
/// so questions resemble the words they mention.
#[derive(Debug, Clone)]
pub struct FixtureProvider<T> {
    dim: usize,
    seed: u64,
    lexical: f64,
    planted: HashMap<String, Vec<T>>,
    _t: PhantomData<T>,
}

impl<T: Scalar> FixtureProvider<T> {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim >= 2, "fixture embeddings need dim >= 2");
        FixtureProvider {
            dim,
            seed,
            lexical: 0.0,
            planted: HashMap::new(),
            _t: PhantomData,
        }
    }

    /// Weight in [0, 1] of the surface-form component.
    pub fn with_lexical(mut self, weight: f64) -> Self {
        self.lexical = weight.clamp(0.0, 1.0);
        self
    }

    fn raw(&self, key: &str) -> Vec<f64> {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(key.as_bytes());
        let mut rng = ChaCha8Rng::from_seed(h.finalize().into());
        let v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        unit(v)
    }

    /// Unit vector for an arbitrary key.
    pub fn keyed(&self, key: &str) -> Vec<T> {
        self.raw(key).into_iter().map(T::of).collect()
    }

    fn word_vector(&self, paragraph: &Paragraph, i: usize) -> Vec<f64> {
        let ctx = self.raw(&format!("w|{}|{i}", paragraph.key));
        if self.lexical == 0.0 {
            return ctx;
        }
        let lex = self.raw(&format!("t|{}", normalize_word(&paragraph.words[i].text)));
        unit(
            ctx.iter()
                .zip(&lex)
                .map(|(c, l)| (1.0 - self.lexical) * c + self.lexical * l)
                .collect(),
        )
    }

    /// Replaces the question's vector by the mean of `span`'s word vectors.
    pub fn plant_span_mean(&mut self, paragraph: &Paragraph, question_id: &str, span: Span) {
        let mut mean = vec![0.0; self.dim];
        for i in span.start..span.end {
            for (m, x) in mean.iter_mut().zip(self.word_vector(paragraph, i)) {
                *m += x / span.len() as f64;
            }
        }
        self.planted
            .insert(question_id.to_string(), mean.into_iter().map(T::of).collect());
    }

    /// Plants every question of the corpus on its own critical span.
    pub fn plant_corpus(&mut self, corpus: &Corpus) {
        for (p, qs) in corpus.paragraphs().iter().zip(corpus.question_sets()) {
            for q in qs.questions() {
                self.plant_span_mean(p, &q.question_id, q.critical_span);
            }
        }
    }
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        return v;
    }
    v.into_iter().map(|x| x / n).collect()
}

impl<T: Scalar> EmbeddingProvider<T> for FixtureProvider<T> {
    fn name(&self) -> &str {
        "fixture"
    }

    fn version(&self) -> &str {
        "1"
    }

    fn layer(&self) -> &str {
        "final"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn word_embeddings(&self, paragraph: &Paragraph) -> Result<WordEmbeddings<T>, EmbeddingError> {
        let mut m = Matrix::zeros(paragraph.len(), self.dim);
        for i in 0..paragraph.len() {
            for (d, x) in m.row_mut(i).iter_mut().zip(self.word_vector(paragraph, i)) {
                *d = T::of(x);
            }
        }
        Ok(WordEmbeddings {
            paragraph: paragraph.key.clone(),
            vectors: m,
        })
    }

    fn question_embedding(&self, question: &Question) -> Result<QuestionEmbedding<T>, EmbeddingError> {
        let vector = if let Some(v) = self.planted.get(&question.question_id) {
            v.clone()
        } else if self.lexical == 0.0 {
            self.keyed(&format!("q|{}", question.question_id))
        } else {
            let tokens = word_tokens(&question.text);
            let content: Vec<&String> = tokens.iter().filter(|t| !is_stopword(t)).collect();
            let chosen: Vec<&String> = if content.is_empty() {
                tokens.iter().collect()
            } else {
                content
            };
            let mut mean = vec![0.0; self.dim];
            for t in &chosen {
                for (m, x) in mean.iter_mut().zip(self.raw(&format!("t|{t}"))) {
                    *m += x;
                }
            }
            unit(mean).into_iter().map(T::of).collect()
        };
        Ok(QuestionEmbedding {
            question_id: question.question_id.clone(),
            vector,
        })
    }

    fn token_embeddings(&self, text: &str) -> Result<Matrix<T>, EmbeddingError> {
        let rows: Vec<Vec<T>> = word_tokens(text)
            .iter()
            .map(|t| self.keyed(&format!("t|{t}")))
            .collect();
        if rows.is_empty() {
            return Ok(Matrix::zeros(0, self.dim));
        }
        Ok(Matrix::from_rows(&rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DifficultyLevel, ParagraphKey, QuestionType, Word};
    use crate::scalar::cosine;

    fn para() -> Paragraph {
        Paragraph {
            key: ParagraphKey::new("a", "1", DifficultyLevel::Original),
            words: ["The", "quick", "fox", "jumps"]
                .iter()
                .enumerate()
                .map(|(i, w)| Word::plain(i, *w))
                .collect(),
        }
    }

    fn question(id: &str, text: &str) -> Question {
        Question {
            question_id: id.into(),
            text: text.into(),
            qtype: QuestionType::Q1,
            critical_span: Span::new(1, 3),
            answers: None,
        }
    }

    #[test]
    fn unit_norm_and_deterministic() {
        let f = FixtureProvider::<f64>::new(16, 3);
        let a = f.word_embeddings(&para()).unwrap();
        let b = FixtureProvider::<f64>::new(16, 3).word_embeddings(&para()).unwrap();
        assert_eq!(a, b);
        for r in a.vectors.iter_rows() {
            assert!((crate::scalar::norm(r) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn planted_question_matches_span_mean() {
        let p = para();
        let mut f = FixtureProvider::<f64>::new(32, 1);
        f.plant_span_mean(&p, "q", Span::new(1, 3));
        let w = f.word_embeddings(&p).unwrap().vectors;
        let mean: Vec<f64> = (0..32).map(|d| (w[(1, d)] + w[(2, d)]) / 2.0).collect();
        let q = f.question_embedding(&question("q", "anything")).unwrap().vector;
        assert!((cosine(&q, &mean).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lexical_mode_links_questions_to_their_words() {
        let p = para();
        let f = FixtureProvider::<f64>::new(64, 2).with_lexical(0.7);
        let w = f.word_embeddings(&p).unwrap().vectors;
        let q = f
            .question_embedding(&question("q", "Why does the fox run?"))
            .unwrap()
            .vector;
        let fox = cosine(&q, w.row(2)).unwrap();
        let quick = cosine(&q, w.row(1)).unwrap();
        assert!(fox > quick + 0.2, "{fox} vs {quick}");
    }
}
