//! Cell-topology search over a lookup table.
//!
//! A cell is a DAG on 7 vertices whose edges `(i, j)`, `i < j`, are the 21
//! bits of the strict upper triangle of the adjacency matrix, row-major:
//! bit 0 is `(0, 1)`, bit 5 is `(0, 6)`, bit 6 is `(1, 2)` and bit 20 is
//! `(5, 6)`. Every vertex carries the same operation, so only the topology
//! is searched.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{boltzmann_log_prior, boltzmann_sample, Problem, ProblemError};
use crate::bitstate::{BitVector, RngStream};
use crate::sampler::{AbcTarget, SimulationError};

pub const VERTICES: usize = 7;
pub const MAX_EDGES: usize = 9;
pub const ENCODING_DIM: usize = VERTICES * (VERTICES - 1) / 2;
/// Distance assigned to invalid cells.
pub const INVALID_DISTANCE: f64 = 1.0;

/// `(from, to)` for every encoding bit.
pub fn edge_list() -> [(usize, usize); ENCODING_DIM] {
    let mut out = [(0, 0); ENCODING_DIM];
    let mut k = 0;
    for i in 0..VERTICES {
        for j in i + 1..VERTICES {
            out[k] = (i, j);
            k += 1;
        }
    }
    out
}

/// A valid cell topology.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Architecture {
    bits: BitVector,
}

impl Architecture {
    pub fn bits(&self) -> &BitVector {
        &self.bits
    }

    /// Table key: the 21-character bit string.
    pub fn key(&self) -> String {
        self.bits.to_string()
    }

    pub fn edge_count(&self) -> usize {
        self.bits.popcount()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let all = edge_list();
        self.bits.ones_indices().map(|k| all[k]).collect()
    }

    pub fn adjacency(&self) -> [[bool; VERTICES]; VERTICES] {
        let mut adj = [[false; VERTICES]; VERTICES];
        for (i, j) in self.edges() {
            adj[i][j] = true;
        }
        adj
    }

    /// Number of distinct directed paths from the input to the output vertex.
    pub fn path_count(&self) -> u64 {
        path_count(self.bits.to_index() as u32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvalidReason {
    TooManyEdges(usize),
    Disconnected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NasDecoded {
    Valid(Architecture),
    Invalid(InvalidReason),
}

fn paths_by_vertex(code: u32) -> [u64; VERTICES] {
    let edges = edge_list();
    let mut paths = [0u64; VERTICES];
    paths[0] = 1;
    for (k, &(i, j)) in edges.iter().enumerate() {
        // edges are ordered by source vertex, so paths[i] is final here
        if code >> k & 1 == 1 {
            paths[j] += paths[i];
        }
    }
    paths
}

fn path_count(code: u32) -> u64 {
    paths_by_vertex(code)[VERTICES - 1]
}

fn classify(code: u32) -> Result<(), InvalidReason> {
    let edges = code.count_ones() as usize;
    if edges > MAX_EDGES {
        Err(InvalidReason::TooManyEdges(edges))
    } else if path_count(code) == 0 {
        Err(InvalidReason::Disconnected)
    } else {
        Ok(())
    }
}

/// Decodes a 21-bit encoding, checking the edge budget and input-output
/// connectivity.
pub fn nas_encode(x: &BitVector) -> Result<NasDecoded, ProblemError> {
    if x.dim() != ENCODING_DIM {
        return Err(ProblemError::DimensionMismatch {
            expected: ENCODING_DIM,
            got: x.dim(),
        });
    }
    Ok(match classify(x.to_index() as u32) {
        Ok(()) => NasDecoded::Valid(Architecture { bits: x.clone() }),
        Err(reason) => NasDecoded::Invalid(reason),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NasEntry {
    pub validation_error: f64,
    pub test_error: f64,
}

/// Lookup table from valid cells to their errors.
#[derive(Debug, Clone, PartialEq)]
pub struct NasTable {
    entries: HashMap<u32, NasEntry>,
    best: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NasQueryMeta {
    pub valid: bool,
    pub test_error: Option<f64>,
}

impl NasTable {
    /// Every key must be a valid encoding and errors must lie in `[0, 1]`.
    pub fn new(entries: HashMap<u32, NasEntry>) -> Result<Self, ProblemError> {
        for (&code, e) in &entries {
            if code >> ENCODING_DIM != 0 || classify(code).is_err() {
                return Err(ProblemError::Invalid(format!(
                    "table key {} is not a valid architecture",
                    BitVector::from_index(code as u64, ENCODING_DIM)
                )));
            }
            if !(0.0..=1.0).contains(&e.validation_error) || !(0.0..=1.0).contains(&e.test_error) {
                return Err(ProblemError::Invalid(format!("errors for key {code} outside [0, 1]")));
            }
        }
        let best = scan_best(&entries).ok_or_else(|| ProblemError::Invalid("table is empty".into()))?;
        Ok(Self { entries, best })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, arch: &Architecture) -> Option<NasEntry> {
        self.entries.get(&(arch.bits.to_index() as u32)).copied()
    }

    /// Cell with the lowest validation error (lowest key on ties).
    pub fn best(&self) -> (BitVector, NasEntry) {
        (BitVector::from_index(self.best as u64, ENCODING_DIM), self.entries[&self.best])
    }

    pub fn best_validation_error(&self) -> f64 {
        self.entries[&self.best].validation_error
    }

    /// Entries sorted by key index.
    pub fn iter(&self) -> impl Iterator<Item = (BitVector, NasEntry)> + '_ {
        let mut keys: Vec<u32> = self.entries.keys().copied().collect();
        keys.sort_unstable();
        keys.into_iter()
            .map(|k| (BitVector::from_index(k as u64, ENCODING_DIM), self.entries[&k]))
    }

    /// Header line, then one `key validation test` record per line.
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<(), ProblemError> {
        let (best, entry) = self.best();
        writeln!(
            out,
            "vertex_count={VERTICES} max_edges={MAX_EDGES} entries={} best={best} best_validation_error={}",
            self.len(),
            entry.validation_error
        )?;
        let mut line = String::new();
        for (key, e) in self.iter() {
            line.clear();
            writeln!(line, "{key} {} {}", e.validation_error, e.test_error).expect("string write");
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self, ProblemError> {
        let mut lines = input.lines();
        let header = lines.next().ok_or(ProblemError::Parse {
            line: 1,
            msg: "missing header".into(),
        })??;
        let fields: HashMap<&str, &str> = header.split_whitespace().filter_map(|t| t.split_once('=')).collect();
        let field = |name: &str| {
            fields.get(name).copied().ok_or_else(|| ProblemError::Parse {
                line: 1,
                msg: format!("header lacks {name}"),
            })
        };
        if field("vertex_count")? != VERTICES.to_string() || field("max_edges")? != MAX_EDGES.to_string() {
            return Err(ProblemError::Parse {
                line: 1,
                msg: format!("only vertex_count={VERTICES} max_edges={MAX_EDGES} tables are supported"),
            });
        }
        let mut entries = HashMap::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            let lineno = n + 2;
            if line.trim().is_empty() {
                continue;
            }
            let perr = |msg: String| ProblemError::Parse { line: lineno, msg };
            let parts: Vec<&str> = line.split(' ').collect();
            if parts.len() != 3 || parts[0].len() != ENCODING_DIM {
                return Err(perr("expected `<21-bit key> <validation> <test>`".into()));
            }
            let key: BitVector = parts[0].parse().map_err(|e| perr(format!("{e}")))?;
            let num = |s: &str| s.parse::<f64>().map_err(|e| perr(format!("{s}: {e}")));
            let entry = NasEntry {
                validation_error: num(parts[1])?,
                test_error: num(parts[2])?,
            };
            if entries.insert(key.to_index() as u32, entry).is_some() {
                return Err(perr(format!("duplicate key {key}")));
            }
        }
        let table = Self::new(entries)?;
        if let Some(best) = fields.get("best") {
            if *best != table.best().0.to_string() {
                return Err(ProblemError::Parse {
                    line: 1,
                    msg: format!("header best={best} disagrees with the table minimum"),
                });
            }
        }
        Ok(table)
    }
}

fn scan_best(entries: &HashMap<u32, NasEntry>) -> Option<u32> {
    entries
        .iter()
        .min_by(|a, b| a.1.validation_error.total_cmp(&b.1.validation_error).then(a.0.cmp(b.0)))
        .map(|(&k, _)| k)
}

/// Distance of a cell: its validation error, or [`INVALID_DISTANCE`].
pub fn nas_query(table: &NasTable, x: &BitVector) -> Result<(f64, NasQueryMeta), ProblemError> {
    match nas_encode(x)? {
        NasDecoded::Invalid(_) => Ok((
            INVALID_DISTANCE,
            NasQueryMeta {
                valid: false,
                test_error: None,
            },
        )),
        NasDecoded::Valid(arch) => {
            let e = table.get(&arch).ok_or_else(|| ProblemError::MissingArchitecture(arch.key()))?;
            Ok((
                e.validation_error,
                NasQueryMeta {
                    valid: true,
                    test_error: Some(e.test_error),
                },
            ))
        }
    }
}

/// Shape of the synthetic error surface.
///
/// `validation = base + span * (1 - exp(-h / length_scale))
///   + edge_weight * |edges - edges_ref| + path_weight * |ln(paths / paths_ref)| + noise * u`,
/// where `h` is the Hamming distance to a hidden reference cell and
/// `u ~ U[0, 1)`. Test errors add `test_gap * (2u' - 1)` on top.
/// Values are clamped to `[0, 1]` and rounded to six decimals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthParams {
    pub base: f64,
    pub span: f64,
    pub length_scale: f64,
    pub edge_weight: f64,
    pub path_weight: f64,
    pub noise: f64,
    pub test_gap: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            base: 0.05,
            span: 0.6,
            length_scale: 3.0,
            edge_weight: 0.005,
            path_weight: 0.01,
            noise: 0.02,
            test_gap: 0.005,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), ProblemError> {
        let nonneg = [
            self.base,
            self.span,
            self.edge_weight,
            self.path_weight,
            self.noise,
            self.test_gap,
        ];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || self.length_scale.is_nan() || self.length_scale <= 0.0 {
            return Err(ProblemError::Invalid("synthetic table parameters must be non-negative".into()));
        }
        Ok(())
    }
}

/// Every valid encoding, in increasing key order.
pub fn valid_codes() -> Vec<u32> {
    (0u32..1 << ENCODING_DIM).filter(|&c| classify(c).is_ok()).collect()
}

fn round6(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 1e6).round() / 1e6
}

/// Synthetic table over every valid cell.
///
/// The reference cell is drawn first (edges i.i.d. with probability 0.35,
/// redrawn until valid), then two uniforms per valid cell in key order.
/// The reference gets no noise and is the unique global minimum.
pub fn nas_synth_table(rng: &mut RngStream, params: &SynthParams) -> Result<NasTable, ProblemError> {
    params.validate()?;
    let reference = loop {
        let x = BitVector::bernoulli(ENCODING_DIM, 0.35, rng)?;
        let code = x.to_index() as u32;
        if classify(code).is_ok() {
            break code;
        }
    };
    let ref_edges = reference.count_ones() as f64;
    let ref_paths = path_count(reference) as f64;
    let mut entries = HashMap::new();
    for code in valid_codes() {
        let h = (code ^ reference).count_ones() as f64;
        let edges = code.count_ones() as f64;
        let paths = path_count(code) as f64;
        let smooth = params.base
            + params.span * (1.0 - (-h / params.length_scale).exp())
            + params.edge_weight * (edges - ref_edges).abs()
            + params.path_weight * (paths / ref_paths).ln().abs();
        let noise = if code == reference { 0.0 } else { params.noise * rng.uniform() };
        let validation_error = round6(smooth + noise);
        let test_error = round6(validation_error + params.test_gap * (2.0 * rng.uniform() - 1.0));
        entries.insert(
            code,
            NasEntry {
                validation_error,
                test_error,
            },
        );
    }
    let table = NasTable::new(entries)?;
    debug_assert_eq!(table.best, reference);
    Ok(table)
}

/// Architecture search as an ABC problem: observation is the validation
/// error, observed value 0, distance `|sim - obs|`, Boltzmann prior.
#[derive(Debug, Clone)]
pub struct NasProblem {
    table: NasTable,
    target: f64,
}

impl NasProblem {
    pub fn new(table: NasTable) -> Self {
        Self { table, target: 0.0 }
    }

    pub fn table(&self) -> &NasTable {
        &self.table
    }

    /// Test error of a chain, `None` for invalid cells.
    pub fn test_error(&self, x: &BitVector) -> Option<f64> {
        nas_query(&self.table, x).ok().and_then(|(_, m)| m.test_error)
    }
}

impl AbcTarget for NasProblem {
    type Observation = f64;

    fn log_prior(&self, x: &BitVector) -> f64 {
        boltzmann_log_prior(x)
    }

    fn simulate(&self, x: &BitVector, _rng: &mut RngStream) -> Result<f64, SimulationError> {
        nas_query(&self.table, x)
            .map(|(d, _)| d)
            .map_err(|e| SimulationError(e.to_string()))
    }

    fn distance(&self, simulated: &f64, observed: &f64) -> f64 {
        (simulated - observed).abs()
    }
}

impl Problem for NasProblem {
    fn dim(&self) -> usize {
        ENCODING_DIM
    }

    fn sample_prior(&self, rng: &mut RngStream) -> BitVector {
        boltzmann_sample(ENCODING_DIM, rng)
    }

    fn observed(&self) -> &f64 {
        &self.target
    }

    fn error(&self, x: &BitVector) -> f64 {
        nas_query(&self.table, x).map_or(INVALID_DISTANCE, |(d, _)| d)
    }
}
