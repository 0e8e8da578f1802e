//! Seeded random-sequence test sets and their text file format.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use qcomp_core::gateset::{evaluate, random_sequence_with, GateSequence};
use qcomp_core::linalg::UnitaryGate;

pub const DATASET_MAGIC: &str = "qcomp-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid length range [{min}, {max}]: need 0 < min <= max")]
    BadRange { min: usize, max: usize },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("dataset line {line}: {reason}")]
    Format { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetItem {
    pub generator: GateSequence,
    pub target: UnitaryGate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub seed: u64,
    pub length_range: (usize, usize),
    pub items: Vec<DatasetItem>,
}

impl Dataset {
    /// Dataset from explicit generators; targets are their products.
    pub fn from_generators(name: &str, seed: u64, generators: Vec<GateSequence>) -> Self {
        let min = generators.iter().map(|g| g.len()).min().unwrap_or(0);
        let max = generators.iter().map(|g| g.len()).max().unwrap_or(0);
        let items = generators
            .into_iter()
            .map(|generator| DatasetItem {
                target: evaluate(&generator),
                generator,
            })
            .collect();
        Self {
            name: name.to_string(),
            seed,
            length_range: (min, max),
            items,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{DATASET_MAGIC} {DATASET_VERSION}\nname {}\nseed {}\ncount {}\nlengths {} {}\n",
            self.name,
            self.seed,
            self.items.len(),
            self.length_range.0,
            self.length_range.1
        );
        for it in &self.items {
            out.push_str(&it.generator.to_tokens());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        let err = |line: usize, reason: &str| DatasetError::Format {
            line,
            reason: reason.to_string(),
        };
        let lines: Vec<&str> = text.lines().collect();
        let field = |i: usize, key: &str| -> Result<&str, DatasetError> {
            let l = lines.get(i).ok_or_else(|| err(i + 1, "truncated header"))?;
            l.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| err(i + 1, &format!("expected `{key} …`")))
        };
        let magic = field(0, DATASET_MAGIC)?;
        if magic.trim() != DATASET_VERSION.to_string() {
            return Err(err(1, "unsupported version"));
        }
        let name = field(1, "name")?.to_string();
        let seed = field(2, "seed")?.trim().parse().map_err(|_| err(3, "bad seed"))?;
        let count: usize = field(3, "count")?.trim().parse().map_err(|_| err(4, "bad count"))?;
        let range: Vec<usize> = field(4, "lengths")?
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| err(5, "bad length")))
            .collect::<Result<_, _>>()?;
        if range.len() != 2 {
            return Err(err(5, "expected two lengths"));
        }
        let body = &lines[5..];
        if body.len() != count {
            return Err(err(6, &format!("header says {count} items, found {}", body.len())));
        }
        let mut generators = Vec::with_capacity(count);
        for (i, l) in body.iter().enumerate() {
            generators.push(GateSequence::parse(l).map_err(|e| err(i + 6, &e.to_string()))?);
        }
        let mut d = Dataset::from_generators(&name, seed, generators);
        d.length_range = (range[0], range[1]);
        Ok(d)
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        std::fs::write(path, self.to_text()).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}

/// `count` random sequences with lengths uniform in `[min_len, max_len]`.
pub fn make_dataset(name: &str, count: usize, min_len: usize, max_len: usize, seed: u64) -> Result<Dataset, DatasetError> {
    if min_len == 0 || min_len > max_len {
        return Err(DatasetError::BadRange { min: min_len, max: max_len });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let generators = (0..count)
        .map(|_| {
            let len = rng.random_range(min_len..=max_len);
            random_sequence_with(len, &mut rng)
        })
        .collect();
    let mut d = Dataset::from_generators(name, seed, generators);
    d.length_range = (min_len, max_len);
    Ok(d)
}
