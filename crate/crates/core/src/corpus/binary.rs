use std::io::{Read, Write};
use std::path::Path;

use super::{Corpus, CorpusError};

pub const CORPUS_MAGIC: &[u8; 8] = b"GZGLCORP";
pub const CORPUS_FORMAT_VERSION: u32 = 1;

/// Layout: magic, `u32` LE format version, bincode payload.
pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let payload = bincode::serialize(corpus).map_err(|e| CorpusError::Cache(e.to_string()))?;
    let io = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let tmp = path.with_extension("bin.tmp");
    {
        let mut f = std::fs::File::create(&tmp).map_err(io)?;
        f.write_all(CORPUS_MAGIC).map_err(io)?;
        f.write_all(&CORPUS_FORMAT_VERSION.to_le_bytes()).map_err(io)?;
        f.write_all(&payload).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let io = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(io)?
        .read_to_end(&mut bytes)
        .map_err(io)?;
    if bytes.len() < 12 || &bytes[..8] != CORPUS_MAGIC {
        return Err(CorpusError::Cache(format!(
            "{}: not a corpus cache (bad magic)",
            path.display()
        )));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CORPUS_FORMAT_VERSION {
        return Err(CorpusError::Cache(format!(
            "{}: format version {version}, expected {CORPUS_FORMAT_VERSION}",
            path.display()
        )));
    }
    let mut corpus: Corpus = bincode::deserialize(&bytes[12..]).map_err(|e| CorpusError::Cache(e.to_string()))?;
    corpus.rebuild_index()?;
    Ok(corpus)
}
