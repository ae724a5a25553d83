use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader};
use std::marker::PhantomData;
use std::path::Path;

use serde::Deserialize;

use super::text::tokenize;
use crate::augment::source_id;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Sparse vector with strictly increasing indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVector<T> {
    dim: usize,
    entries: Vec<(u32, T)>,
}

impl<T: Real> SparseVector<T> {
    pub fn zeros(dim: usize) -> Self {
        SparseVector { dim, entries: Vec::new() }
    }

    /// Builds from arbitrary (index, value) pairs; duplicates are summed and
    /// zeros dropped.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (usize, T)>) -> Result<Self> {
        let mut acc: BTreeMap<u32, T> = BTreeMap::new();
        for (i, v) in pairs {
            if i >= dim {
                return Err(Error::OutOfRange { index: i, len: dim });
            }
            let e = acc.entry(i as u32).or_insert_with(T::zero);
            *e = *e + v;
        }
        Ok(SparseVector {
            dim,
            entries: acc.into_iter().filter(|(_, v)| !v.is_zero()).collect(),
        })
    }

    pub fn from_dense(values: &[T]) -> Self {
        SparseVector {
            dim: values.len(),
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.is_zero())
                .map(|(i, &v)| (i as u32, v))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, T)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn norm(&self) -> T {
        self.entries.iter().map(|&(_, v)| v * v).sum::<T>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for &(i, v) in &self.entries {
            out[i as usize] = v;
        }
        out
    }

    pub fn dot(&self, dense: &[T]) -> T {
        self.entries
            .iter()
            .fold(T::zero(), |acc, &(i, v)| acc + v * dense[i as usize])
    }

    /// Copy with each entry zeroed with probability `rate` and survivors
    /// scaled by `1 / (1 - rate)`.
    pub fn dropout(&self, rate: f64, rng: &mut impl rand::Rng) -> Self {
        if rate <= 0.0 {
            return self.clone();
        }
        let scale = T::from_f64_lossy(1.0 / (1.0 - rate));
        SparseVector {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .filter(|_| rng.random::<f64>() >= rate)
                .map(|&(i, v)| (i, v * scale))
                .collect(),
        }
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}

/// Term frequencies hashed into `feature_dim` buckets with FNV-1a (bucket =
/// hash mod dim), L2-normalized when nonzero.
pub fn featurize<T: Real, S: AsRef<str>>(tokens: &[S], feature_dim: usize) -> Result<SparseVector<T>> {
    if feature_dim == 0 {
        return Err(Error::InvalidConfig("feature_dim must be >= 1".into()));
    }
    let v = SparseVector::from_pairs(
        feature_dim,
        tokens
            .iter()
            .map(|t| ((fnv1a64(t.as_ref().as_bytes()) % feature_dim as u64) as usize, T::one())),
    )?;
    let norm = v.norm();
    if norm.is_zero() {
        return Ok(v);
    }
    Ok(SparseVector {
        dim: v.dim,
        entries: v.entries.into_iter().map(|(i, x)| (i, x / norm)).collect(),
    })
}

/// Text to fixed-length feature vector. Implementations must be pure: the
/// same input always yields the same vector, and `dim` never changes.
pub trait EncoderBackend<T: Real>: Send + Sync {
    fn dim(&self) -> usize;
    fn encode(&self, id: &str, text: &str) -> Result<SparseVector<T>>;
}

/// Native encoder: [`tokenize`] then [`featurize`].
#[derive(Clone, Debug)]
pub struct HashingEncoder<T> {
    feature_dim: usize,
    _scalar: PhantomData<T>,
}

impl<T: Real> HashingEncoder<T> {
    pub fn new(feature_dim: usize) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::InvalidConfig("feature_dim must be >= 1".into()));
        }
        Ok(HashingEncoder {
            feature_dim,
            _scalar: PhantomData,
        })
    }
}

impl<T: Real> EncoderBackend<T> for HashingEncoder<T> {
    fn dim(&self) -> usize {
        self.feature_dim
    }

    fn encode(&self, _id: &str, text: &str) -> Result<SparseVector<T>> {
        featurize(&tokenize(text), self.feature_dim)
    }
}

#[derive(Deserialize)]
struct EmbeddingLine {
    id: String,
    vector: Vec<f64>,
}

/// Embeddings computed offline by an external encoder, one JSON object per
/// line: `{"id": "...", "vector": [...]}`.
///
/// Lookup is by report id. Augmented copies (`<id>#aug<k>`) fall back to
/// their source's vector since their text was never encoded.
#[derive(Clone, Debug)]
pub struct PrecomputedEncoder<T> {
    dim: usize,
    vectors: HashMap<String, SparseVector<T>>,
}

impl<T: Real> PrecomputedEncoder<T> {
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut dim = None;
        let mut vectors = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let e: EmbeddingLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            let d = *dim.get_or_insert(e.vector.len());
            if e.vector.len() != d || d == 0 {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: e.vector.len(),
                });
            }
            if e.vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "non-finite embedding value".into(),
                });
            }
            let dense: Vec<T> = e.vector.iter().map(|&v| T::from_f64_lossy(v)).collect();
            if vectors.insert(e.id.clone(), SparseVector::from_dense(&dense)).is_some() {
                return Err(Error::DuplicateId(e.id));
            }
        }
        Ok(PrecomputedEncoder {
            dim: dim.ok_or(Error::Empty("embedding file"))?,
            vectors,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(file))
    }
}

impl<T: Real> EncoderBackend<T> for PrecomputedEncoder<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, id: &str, _text: &str) -> Result<SparseVector<T>> {
        self.vectors
            .get(id)
            .or_else(|| self.vectors.get(source_id(id)))
            .cloned()
            .ok_or_else(|| Error::MissingEmbedding(id.to_string()))
    }
}
