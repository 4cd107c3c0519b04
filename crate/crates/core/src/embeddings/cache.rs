//! Binary embedding cache.
//!
//! Layout, little-endian throughout: magic `GGEMBED\0`, u32 format version,
//! then provider name, provider version and layer as u32-length-prefixed UTF-8,
//! u32 dim, u64 row count, and per row a u32-length-prefixed key followed by
//! `dim` f32 values. Keys are `w|<paragraph>|<index>`, `q|<question_id>` and
//! `t|<token>`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{EmbeddingError, EmbeddingProvider, QuestionEmbedding, WordEmbeddings};
use crate::corpus::{Corpus, Paragraph, Question};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::text::word_tokens;

pub const CACHE_MAGIC: &[u8; 8] = b"GGEMBED\0";
pub const CACHE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingCache {
    pub provider: String,
    pub provider_version: String,
    pub layer: String,
    pub dim: usize,
    pub rows: BTreeMap<String, Vec<f32>>,
}

pub(crate) fn word_key(paragraph: &Paragraph, i: usize) -> String {
    format!("w|{}|{i}", paragraph.key)
}

impl EmbeddingCache {
    pub fn new(provider: &str, provider_version: &str, layer: &str, dim: usize) -> Self {
        EmbeddingCache {
            provider: provider.into(),
            provider_version: provider_version.into(),
            layer: layer.into(),
            dim,
            rows: BTreeMap::new(),
        }
    }

    pub fn insert<T: Scalar>(&mut self, key: String, v: &[T]) -> Result<(), EmbeddingError> {
        if v.len() != self.dim {
            return Err(EmbeddingError::Dim {
                expected: self.dim,
                found: v.len(),
            });
        }
        let row: Vec<f32> = v.iter().map(|x| x.f64() as f32).collect();
        if row.iter().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::NonFinite(key));
        }
        self.rows.insert(key, row);
        Ok(())
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn write(&self, path: &Path) -> Result<(), EmbeddingError> {
        let io = |source| EmbeddingError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut buf = Vec::new();
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&CACHE_FORMAT_VERSION.to_le_bytes());
        for s in [&self.provider, &self.provider_version, &self.layer] {
            put_str(&mut buf, s);
        }
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.rows.len() as u64).to_le_bytes());
        for (k, v) in &self.rows {
            put_str(&mut buf, k);
            for x in v {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        let tmp = path.with_extension("cache.tmp");
        let mut f = std::fs::File::create(&tmp).map_err(io)?;
        f.write_all(&buf).map_err(io)?;
        f.sync_all().map_err(io)?;
        std::fs::rename(&tmp, path).map_err(io)
    }

    pub fn read(path: &Path) -> Result<Self, EmbeddingError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|source| EmbeddingError::Io {
                path: path.display().to_string(),
                source,
            })?;
        let mut r = Reader { b: &bytes, at: 0 };
        if r.take(8)? != CACHE_MAGIC {
            return Err(EmbeddingError::Format("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CACHE_FORMAT_VERSION {
            return Err(EmbeddingError::Format(format!("unsupported version {version}")));
        }
        let provider = r.string()?;
        let provider_version = r.string()?;
        let layer = r.string()?;
        let dim = r.u32()? as usize;
        let n = r.u64()?;
        let mut rows = BTreeMap::new();
        for _ in 0..n {
            let key = r.string()?;
            let mut v = Vec::with_capacity(dim);
            for _ in 0..dim {
                v.push(f32::from_le_bytes(r.take(4)?.try_into().unwrap()));
            }
            rows.insert(key, v);
        }
        if r.at != bytes.len() {
            return Err(EmbeddingError::Format("trailing bytes".into()));
        }
        Ok(EmbeddingCache {
            provider,
            provider_version,
            layer,
            dim,
            rows,
        })
    }

    fn get<T: Scalar>(&self, key: &str) -> Result<Vec<T>, EmbeddingError> {
        self.rows
            .get(key)
            .map(|v| v.iter().map(|&x| T::of(x as f64)).collect())
            .ok_or_else(|| EmbeddingError::Missing(key.to_string()))
    }
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    b: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], EmbeddingError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.b.len());
        let end = end.ok_or_else(|| EmbeddingError::Format("truncated file".into()))?;
        let s = &self.b[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, EmbeddingError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, EmbeddingError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, EmbeddingError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| EmbeddingError::Format("invalid utf-8".into()))
    }
}

/// Embeds every paragraph word, question and question token of the corpus.
pub fn build_cache<T: Scalar, P: EmbeddingProvider<T> + ?Sized>(
    provider: &P,
    corpus: &Corpus,
) -> Result<EmbeddingCache, EmbeddingError> {
    let mut cache = EmbeddingCache::new(provider.name(), provider.version(), provider.layer(), provider.dim());
    for (p, qs) in corpus.paragraphs().iter().zip(corpus.question_sets()) {
        let w = provider.word_embeddings(p)?;
        for i in 0..p.len() {
            cache.insert(word_key(p, i), w.vectors.row(i))?;
        }
        for q in qs.questions() {
            let e = provider.question_embedding(q)?;
            cache.insert(format!("q|{}", q.question_id), &e.vector)?;
            let toks = provider.token_embeddings(&q.text)?;
            for (t, row) in word_tokens(&q.text).into_iter().zip(toks.iter_rows()) {
                cache.insert(format!("t|{t}"), row)?;
            }
        }
    }
    Ok(cache)
}

/// Serves embeddings from a loaded cache.
#[derive(Debug, Clone)]
pub struct CachedProvider {
    cache: EmbeddingCache,
}

impl CachedProvider {
    pub fn new(cache: EmbeddingCache) -> Self {
        CachedProvider { cache }
    }

    pub fn cache(&self) -> &EmbeddingCache {
        &self.cache
    }
}

impl<T: Scalar> EmbeddingProvider<T> for CachedProvider {
    fn name(&self) -> &str {
        &self.cache.provider
    }

    fn version(&self) -> &str {
        &self.cache.provider_version
    }

    fn layer(&self) -> &str {
        &self.cache.layer
    }

    fn dim(&self) -> usize {
        self.cache.dim
    }

    fn word_embeddings(&self, paragraph: &Paragraph) -> Result<WordEmbeddings<T>, EmbeddingError> {
        let rows = (0..paragraph.len())
            .map(|i| self.cache.get(&word_key(paragraph, i)))
            .collect::<Result<Vec<Vec<T>>, _>>()?;
        let vectors = if rows.is_empty() {
            Matrix::zeros(0, self.cache.dim)
        } else {
            Matrix::from_rows(&rows)
        };
        Ok(WordEmbeddings {
            paragraph: paragraph.key.clone(),
            vectors,
        })
    }

    fn question_embedding(&self, question: &Question) -> Result<QuestionEmbedding<T>, EmbeddingError> {
        Ok(QuestionEmbedding {
            question_id: question.question_id.clone(),
            vector: self.cache.get(&format!("q|{}", question.question_id))?,
        })
    }

    fn token_embeddings(&self, text: &str) -> Result<Matrix<T>, EmbeddingError> {
        let rows = word_tokens(text)
            .iter()
            .map(|t| self.cache.get(&format!("t|{t}")))
            .collect::<Result<Vec<Vec<T>>, _>>()?;
        Ok(if rows.is_empty() {
            Matrix::zeros(0, self.cache.dim)
        } else {
            Matrix::from_rows(&rows)
        })
    }
}
