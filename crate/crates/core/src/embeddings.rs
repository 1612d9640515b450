//! Static word-embedding store in word2vec text format, with exact cosine
//! queries.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::Serialize;

use crate::corpus::open;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighbor {
    pub word: String,
    pub similarity: f64,
}

/// Either a stored word or a raw vector, for [`EmbeddingStore::cosine`].
#[derive(Debug, Clone, Copy)]
pub enum Operand<'a> {
    Word(&'a str),
    Vector(&'a [f64]),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LoadWarnings {
    pub duplicate_words: usize,
    pub zero_vectors: usize,
}

#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    // row-major, vocab.len() * dim
    data: Vec<f64>,
    norms: Vec<f64>,
    warnings: LoadWarnings,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity of two raw vectors; `None` if either has zero norm.
pub fn cosine_raw(a: &[f64], b: &[f64]) -> Option<f64> {
    let (na, nb) = (norm(a), norm(b));
    (na > 0.0 && nb > 0.0).then(|| clamp_unit(dot(a, b) / (na * nb)))
}

fn clamp_unit(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

impl EmbeddingStore {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(open(path.as_ref())?)
    }

    /// Parses word2vec text format: a `V D` header, then `word f1 .. fD` rows.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line.map_err(|e| Error::parse("embeddings", 1, e))?,
            None => return Err(Error::parse("embeddings", 1, "missing header")),
        };
        let mut parts = header.split_whitespace();
        let parse_count = |p: Option<&str>| -> Result<usize> {
            p.ok_or_else(|| Error::parse("embeddings", 1, "header must be `V D`"))?
                .parse()
                .map_err(|e| Error::parse("embeddings", 1, e))
        };
        let declared_rows = parse_count(parts.next())?;
        let dim = parse_count(parts.next())?;
        if dim == 0 {
            return Err(Error::parse("embeddings", 1, "dimension must be positive"));
        }

        let mut rows = Vec::with_capacity(declared_rows);
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::parse("embeddings", line_no, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().unwrap_or_default().to_owned();
            let values = fields
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse("embeddings", line_no, e))?;
            if values.len() != dim {
                return Err(Error::DimensionMismatch {
                    row: line_no,
                    expected: dim,
                    found: values.len(),
                });
            }
            rows.push((word, values));
        }
        if rows.len() != declared_rows {
            return Err(Error::parse(
                "embeddings",
                1,
                format!("header declares {declared_rows} rows, found {}", rows.len()),
            ));
        }
        Self::from_rows(dim, rows)
    }

    /// Builds a store from in-memory rows. Later duplicates and zero vectors
    /// are skipped and counted in [`EmbeddingStore::warnings`].
    pub fn from_rows<I>(dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut store = EmbeddingStore {
            vocab: Vec::new(),
            index: HashMap::new(),
            dim,
            data: Vec::new(),
            norms: Vec::new(),
            warnings: LoadWarnings::default(),
        };
        for (row, (word, values)) in rows.into_iter().enumerate() {
            if values.len() != dim {
                return Err(Error::DimensionMismatch {
                    row: row + 1,
                    expected: dim,
                    found: values.len(),
                });
            }
            if store.index.contains_key(&word) {
                log::warn!("duplicate embedding for `{word}`; keeping the first");
                store.warnings.duplicate_words += 1;
                continue;
            }
            let n = norm(&values);
            if n == 0.0 || !n.is_finite() {
                log::warn!("skipping zero or non-finite vector for `{word}`");
                store.warnings.zero_vectors += 1;
                continue;
            }
            store.index.insert(word.clone(), store.vocab.len());
            store.vocab.push(word);
            store.data.extend_from_slice(&values);
            store.norms.push(n);
        }
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn warnings(&self) -> LoadWarnings {
        self.warnings
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn row_norm(&self, index: usize) -> f64 {
        self.norms[index]
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.index_of(word).map(|i| self.row(i))
    }

    fn require(&self, word: &str) -> Result<usize> {
        self.index_of(word).ok_or_else(|| Error::UnknownWord(word.to_owned()))
    }

    fn resolve<'a>(&'a self, op: Operand<'a>) -> Result<(&'a [f64], f64)> {
        match op {
            Operand::Word(w) => {
                let i = self.require(w)?;
                Ok((self.row(i), self.norms[i]))
            }
            Operand::Vector(v) => {
                if v.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        row: 0,
                        expected: self.dim,
                        found: v.len(),
                    });
                }
                let n = norm(v);
                if n == 0.0 {
                    return Err(Error::ZeroVector("<raw vector>".into()));
                }
                Ok((v, n))
            }
        }
    }

    pub fn cosine(&self, a: Operand<'_>, b: Operand<'_>) -> Result<f64> {
        let (va, na) = self.resolve(a)?;
        let (vb, nb) = self.resolve(b)?;
        Ok(clamp_unit(dot(va, vb) / (na * nb)))
    }

    /// Cosine between a stored row and a raw vector with known norm.
    pub fn cosine_to_row(&self, index: usize, v: &[f64], v_norm: f64) -> f64 {
        clamp_unit(dot(self.row(index), v) / (self.norms[index] * v_norm))
    }

    /// Exact scan: all other words sorted by cosine (descending, ties by
    /// vocabulary order), cut at `floor` if given and truncated to `limit`.
    pub fn nearest_neighbors(&self, word: &str, limit: usize, floor: Option<f64>) -> Result<Vec<Neighbor>> {
        let q = self.require(word)?;
        if limit == 0 {
            return Ok(Vec::new());
        }
        let (qv, qn) = (self.row(q), self.norms[q]);
        let mut scored: Vec<(usize, f64)> = (0..self.len())
            .filter(|&i| i != q)
            .map(|i| (i, self.cosine_to_row(i, qv, qn)))
            .filter(|&(_, s)| floor.is_none_or(|f| s >= f))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(limit);
        Ok(scored
            .into_iter()
            .map(|(i, similarity)| Neighbor {
                word: self.vocab[i].clone(),
                similarity,
            })
            .collect())
    }
}
