//! Breadth-first ε-net of short braid + T words.

use std::collections::HashMap;
use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use qcomp_core::gateset::{evaluate, GateId, GateSequence};
use qcomp_core::linalg::{fidelity_distance, su2_to_bloch, UnitaryGate};

use crate::vptree::{linear_nearest, VpTree};

pub const MAX_DEPTH: usize = 12;
/// Cache file magic and format version.
pub const CACHE_MAGIC: &str = "qcomp-net";
pub const CACHE_VERSION: u32 = 1;
/// Grid used to key Bloch matrices for deduplication.
const KEY_SCALE: f64 = 1e8;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("net depth {0} outside 1..=12")]
    DepthOutOfRange(usize),
    #[error("net cache I/O: {0}")]
    Io(#[from] io::Error),
    #[error("net cache format: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetEntry {
    pub sequence: GateSequence,
    pub unitary: UnitaryGate,
}

#[derive(Debug, Clone)]
pub struct EpsilonNet {
    depth: usize,
    entries: Vec<NetEntry>,
    unitaries: Vec<UnitaryGate>,
    index: VpTree,
}

type Key = [i64; 9];

/// Phase-free key: the Bloch image on a fixed grid.
fn key_of(u: &UnitaryGate) -> Key {
    su2_to_bloch(u)
        .to_row_major()
        .map(|v| (v * KEY_SCALE).round() as i64)
}

impl EpsilonNet {
    fn from_entries(depth: usize, entries: Vec<NetEntry>) -> Self {
        let unitaries: Vec<UnitaryGate> = entries.iter().map(|e| e.unitary).collect();
        let index = VpTree::build(&unitaries);
        Self {
            depth,
            entries,
            unitaries,
            index,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn entries(&self) -> &[NetEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Nearest entry by the indexed lookup.
    pub fn nearest(&self, target: &UnitaryGate) -> &NetEntry {
        let (i, _) = self
            .index
            .nearest(&self.unitaries, target)
            .expect("nets contain the identity");
        &self.entries[i]
    }

    /// Nearest entry by exhaustive scan.
    pub fn nearest_linear(&self, target: &UnitaryGate) -> &NetEntry {
        let (i, _) = linear_nearest(&self.unitaries, target).expect("nets contain the identity");
        &self.entries[i]
    }

    /// Writes the cache file: a header line, then one `8 floats<TAB>tokens`
    /// line per entry.
    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        writeln!(w, "{CACHE_MAGIC} {CACHE_VERSION} {} {}", self.depth, self.entries.len())?;
        for e in &self.entries {
            let reals = e.unitary.to_reals().map(|v| format!("{v:e}")).join(" ");
            writeln!(w, "{reals}\t{}", e.sequence.to_tokens())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a cache file, re-evaluating every sequence against its stored
    /// matrix.
    pub fn load(path: &Path) -> Result<Self, NetError> {
        let file = io::BufReader::new(fs::File::open(path)?);
        let mut lines = file.lines();
        let header = lines
            .next()
            .ok_or_else(|| NetError::Format("empty file".into()))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != CACHE_MAGIC {
            return Err(NetError::Format(format!("bad header {header:?}")));
        }
        let version: u32 = fields[1]
            .parse()
            .map_err(|_| NetError::Format(format!("bad version {:?}", fields[1])))?;
        if version != CACHE_VERSION {
            return Err(NetError::Format(format!(
                "version {version}, expected {CACHE_VERSION}"
            )));
        }
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| NetError::Format(format!("bad integer {s:?}")))
        };
        let depth = parse_usize(fields[2])?;
        let count = parse_usize(fields[3])?;
        let mut entries = Vec::with_capacity(count);
        for (n, line) in lines.enumerate() {
            let line = line?;
            let (reals, tokens) = line
                .split_once('\t')
                .ok_or_else(|| NetError::Format(format!("line {}: missing tab", n + 2)))?;
            let vals: Vec<f64> = reals
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| NetError::Format(format!("line {}: {e}", n + 2)))?;
            let vals: [f64; 8] = vals
                .try_into()
                .map_err(|_| NetError::Format(format!("line {}: expected 8 floats", n + 2)))?;
            let unitary = UnitaryGate::from_reals(&vals)
                .map_err(|e| NetError::Format(format!("line {}: {e}", n + 2)))?;
            let sequence = GateSequence::parse(tokens)
                .map_err(|e| NetError::Format(format!("line {}: {e}", n + 2)))?;
            if fidelity_distance(&evaluate(&sequence), &unitary) > 1e-9 {
                return Err(NetError::Format(format!(
                    "line {}: stored matrix does not match its sequence",
                    n + 2
                )));
            }
            entries.push(NetEntry { sequence, unitary });
        }
        if entries.len() != count {
            return Err(NetError::Format(format!(
                "header promises {count} entries, found {}",
                entries.len()
            )));
        }
        Ok(Self::from_entries(depth, entries))
    }
}

/// Breadth-first enumeration of words up to `depth` with adjacent-inverse
/// pruning, keeping the first (shortest) word for every gate modulo phase.
pub fn build_net(depth: usize) -> Result<EpsilonNet, NetError> {
    if !(1..=MAX_DEPTH).contains(&depth) {
        return Err(NetError::DepthOutOfRange(depth));
    }
    let identity = NetEntry {
        sequence: GateSequence::empty(),
        unitary: UnitaryGate::identity(),
    };
    let mut seen: HashMap<Key, usize> = HashMap::new();
    seen.insert(key_of(&identity.unitary), 0);
    let mut entries = vec![identity];
    let mut frontier: Vec<usize> = vec![0];

    for _ in 0..depth {
        let candidates: Vec<Vec<(Key, NetEntry)>> = frontier
            .par_iter()
            .map(|&i| {
                let base = &entries[i];
                let last = base.sequence.ids().last().copied();
                GateId::ALL
                    .iter()
                    .filter(|&&g| last != Some(g.inverse()))
                    .map(|&g| {
                        let unitary = g.matrix().mul(&base.unitary);
                        let mut sequence = base.sequence.clone();
                        sequence.push(g);
                        (key_of(&unitary), NetEntry { sequence, unitary })
                    })
                    .collect()
            })
            .collect();
        let mut next = Vec::new();
        for (key, entry) in candidates.into_iter().flatten() {
            if let std::collections::hash_map::Entry::Vacant(slot) = seen.entry(key) {
                slot.insert(entries.len());
                next.push(entries.len());
                entries.push(entry);
            }
        }
        frontier = next;
    }
    Ok(EpsilonNet::from_entries(depth, entries))
}

/// Loads the cached net for `depth` from `dir`, building and saving it on a
/// miss or an unreadable cache.
pub fn load_or_build(dir: &Path, depth: usize) -> Result<EpsilonNet, NetError> {
    let path = cache_path(dir, depth);
    if path.exists() {
        if let Ok(net) = EpsilonNet::load(&path) {
            if net.depth() == depth {
                return Ok(net);
            }
        }
    }
    let net = build_net(depth)?;
    fs::create_dir_all(dir)?;
    net.save(&path)?;
    Ok(net)
}

pub fn cache_path(dir: &Path, depth: usize) -> std::path::PathBuf {
    dir.join(format!("net-depth{depth}.txt"))
}
