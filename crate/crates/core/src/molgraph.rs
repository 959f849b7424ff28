//! Molecular graph data model, text serialization, validity checking,
//! canonical hashing, and synthetic dataset generation.
//!
//! Molecules are kekulized graphs: atoms carry an index into an
//! [`AtomAlphabet`], bonds carry an integer order in `{1, 2, 3}`. Formal
//! charges and explicit hydrogens are not modeled.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::rng;

/// Kekulized valence table for the four-element alphabet (C, N, O, F).
pub const ALPHABET_QM9: &str = "C:4,N:3,O:2,F:1";

/// Kekulized valence table for the nine-element alphabet. Hypervalent sulfur
/// is pinned at 6 and phosphorus at 5; halogens are terminal.
pub const ALPHABET_ZINC: &str = "C:4,N:3,O:2,F:1,P:5,S:6,Cl:1,Br:1,I:1";

#[derive(Debug, Error)]
pub enum MolError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: ParseError,
    },
    #[error("line {line}: {message}")]
    Header { line: usize, message: String },
    #[error("alphabet: {0}")]
    Alphabet(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Syntax or invariant violation in a single molecule line.
#[derive(Debug, Error)]
#[error("column {column}: {message}")]
pub struct ParseError {
    /// 1-based byte offset of the offending token.
    pub column: usize,
    pub message: String,
}

impl ParseError {
    fn new(column: usize, message: impl Into<String>) -> Self {
        ParseError { column, message: message.into() }
    }
}

/// Structural violation when assembling a graph from raw parts.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph must have at least one atom")]
    Empty,
    #[error("bond endpoint {index} out of range for {n} atoms")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("self-loop on node {node}")]
    SelfLoop { node: usize },
    #[error("duplicate bond between {i} and {j}")]
    DuplicateBond { i: usize, j: usize },
    #[error("bond order {order} outside 1..=3")]
    BadOrder { order: u8 },
}

/// Ordered element symbols with their maximum total bond order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomAlphabet {
    symbols: Vec<String>,
    valences: Vec<u32>,
}

impl AtomAlphabet {
    pub fn new(pairs: Vec<(String, u32)>) -> Result<Self, MolError> {
        if pairs.is_empty() {
            return Err(MolError::Alphabet("alphabet must not be empty".into()));
        }
        let mut symbols = Vec::with_capacity(pairs.len());
        let mut valences = Vec::with_capacity(pairs.len());
        for (sym, val) in pairs {
            if sym.is_empty() || !sym.chars().all(|c| c.is_ascii_alphanumeric()) {
                return Err(MolError::Alphabet(format!("bad symbol {sym:?}")));
            }
            if symbols.contains(&sym) {
                return Err(MolError::Alphabet(format!("duplicate symbol {sym:?}")));
            }
            if val == 0 {
                return Err(MolError::Alphabet(format!("{sym}: valence must be >= 1")));
            }
            symbols.push(sym);
            valences.push(val);
        }
        Ok(AtomAlphabet { symbols, valences })
    }

    /// Parses a `sym:valence[,sym:valence...]` table such as [`ALPHABET_QM9`].
    pub fn parse_spec(spec: &str) -> Result<Self, MolError> {
        let mut pairs = Vec::new();
        for part in spec.split(',') {
            let part = part.trim();
            let (sym, val) = part
                .split_once(':')
                .ok_or_else(|| MolError::Alphabet(format!("expected sym:valence, got {part:?}")))?;
            let val: u32 = val
                .trim()
                .parse()
                .map_err(|_| MolError::Alphabet(format!("bad valence in {part:?}")))?;
            pairs.push((sym.trim().to_string(), val));
        }
        AtomAlphabet::new(pairs)
    }

    pub fn qm9() -> Self {
        AtomAlphabet::parse_spec(ALPHABET_QM9).expect("builtin alphabet")
    }

    pub fn zinc() -> Self {
        AtomAlphabet::parse_spec(ALPHABET_ZINC).expect("builtin alphabet")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbol(&self, index: usize) -> &str {
        &self.symbols[index]
    }

    pub fn valence(&self, index: usize) -> u32 {
        self.valences[index]
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    /// The `sym:valence,...` form accepted by [`AtomAlphabet::parse_spec`].
    pub fn spec_string(&self) -> String {
        self.symbols
            .iter()
            .zip(&self.valences)
            .map(|(s, v)| format!("{s}:{v}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// An undirected bond, stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub order: u8,
}

/// Atom type indices plus bonds. Construction normalizes bond endpoint order
/// and sorts bonds, so structural equality is canonical. Connectivity is a
/// queried property, not a construction invariant: decoded samples may be
/// disconnected and are scored as invalid downstream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MolecularGraph {
    atom_types: Vec<usize>,
    bonds: Vec<Bond>,
}

impl MolecularGraph {
    pub fn new(atom_types: Vec<usize>, bonds: Vec<(usize, usize, u8)>) -> Result<Self, GraphError> {
        let n = atom_types.len();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut normalized = Vec::with_capacity(bonds.len());
        for (i, j, order) in bonds {
            if i >= n {
                return Err(GraphError::IndexOutOfRange { index: i, n });
            }
            if j >= n {
                return Err(GraphError::IndexOutOfRange { index: j, n });
            }
            if i == j {
                return Err(GraphError::SelfLoop { node: i });
            }
            if !(1..=3).contains(&order) {
                return Err(GraphError::BadOrder { order });
            }
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            normalized.push(Bond { i: a, j: b, order });
        }
        normalized.sort();
        for w in normalized.windows(2) {
            if w[0].i == w[1].i && w[0].j == w[1].j {
                return Err(GraphError::DuplicateBond { i: w[0].i, j: w[0].j });
            }
        }
        Ok(MolecularGraph { atom_types, bonds: normalized })
    }

    pub fn node_count(&self) -> usize {
        self.atom_types.len()
    }

    pub fn atom_types(&self) -> &[usize] {
        &self.atom_types
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    /// Per-node list of `(neighbor, order)` pairs.
    pub fn adjacency(&self) -> Vec<Vec<(usize, u8)>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for b in &self.bonds {
            adj[b.i].push((b.j, b.order));
            adj[b.j].push((b.i, b.order));
        }
        adj
    }

    /// Bond order between `i` and `j`, or 0 if not bonded.
    pub fn bond_order(&self, i: usize, j: usize) -> u8 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.bonds
            .iter()
            .find(|bond| bond.i == a && bond.j == b)
            .map(|bond| bond.order)
            .unwrap_or(0)
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 1 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &(u, _) in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == n
    }
}

/// Valency check outcome; `violations` lists every node whose total incident
/// bond order exceeds its element's valence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityReport {
    pub violations: Vec<ValencyViolation>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValencyViolation {
    pub node: usize,
    pub total_order: u32,
    pub allowed: u32,
}

impl ValidityReport {
    pub fn valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every node's total incident bond order against its valence.
pub fn check_valency(g: &MolecularGraph, alphabet: &AtomAlphabet) -> ValidityReport {
    let mut totals = vec![0u32; g.node_count()];
    for b in g.bonds() {
        totals[b.i] += u32::from(b.order);
        totals[b.j] += u32::from(b.order);
    }
    let mut violations = Vec::new();
    for (node, (&ty, &total)) in g.atom_types().iter().zip(&totals).enumerate() {
        assert!(ty < alphabet.len(), "atom type {ty} outside alphabet of size {}", alphabet.len());
        let allowed = alphabet.valence(ty);
        if total > allowed {
            violations.push(ValencyViolation { node, total_order: total, allowed });
        }
    }
    ValidityReport { violations }
}

/// Valency plus connectivity; the predicate used by the generation metrics.
pub fn is_valid(g: &MolecularGraph, alphabet: &AtomAlphabet) -> bool {
    check_valency(g, alphabet).valid() && g.is_connected()
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

/// Parses one molecule line `sym[,sym...];i-j:order[,...]`.
///
/// Rejects malformed syntax, unknown symbols, self-loops, duplicate bonds,
/// and disconnected graphs, each with column context.
pub fn parse_molecule(line: &str, alphabet: &AtomAlphabet) -> Result<MolecularGraph, ParseError> {
    let semi = line
        .find(';')
        .ok_or_else(|| ParseError::new(line.len().max(1), "missing ';' separator"))?;
    let (atoms_part, bonds_part) = (&line[..semi], &line[semi + 1..]);

    let mut atom_types = Vec::new();
    let mut col = 1usize;
    for sym in atoms_part.split(',') {
        let trimmed = sym.trim();
        if trimmed.is_empty() {
            return Err(ParseError::new(col, "empty atom symbol"));
        }
        let ty = alphabet
            .index_of(trimmed)
            .ok_or_else(|| ParseError::new(col, format!("unknown symbol {trimmed:?}")))?;
        atom_types.push(ty);
        col += sym.len() + 1;
    }

    let n = atom_types.len();
    let mut bonds: Vec<(usize, usize, u8)> = Vec::new();
    let mut col = semi + 2;
    for tok in bonds_part.split(',') {
        let trimmed = tok.trim();
        if trimmed.is_empty() {
            if bonds_part.trim().is_empty() {
                break; // empty bond list is allowed
            }
            return Err(ParseError::new(col, "empty bond token"));
        }
        let (pair, order) = trimmed
            .split_once(':')
            .ok_or_else(|| ParseError::new(col, format!("expected i-j:order, got {trimmed:?}")))?;
        let (si, sj) = pair
            .split_once('-')
            .ok_or_else(|| ParseError::new(col, format!("expected i-j, got {pair:?}")))?;
        let i: usize = si
            .trim()
            .parse()
            .map_err(|_| ParseError::new(col, format!("bad node index {si:?}")))?;
        let j: usize = sj
            .trim()
            .parse()
            .map_err(|_| ParseError::new(col, format!("bad node index {sj:?}")))?;
        let order: u8 = order
            .trim()
            .parse()
            .map_err(|_| ParseError::new(col, format!("bad bond order {order:?}")))?;
        if i >= n || j >= n {
            return Err(ParseError::new(col, format!("bond index out of range for {n} atoms")));
        }
        if i == j {
            return Err(ParseError::new(col, format!("self-loop on node {i}")));
        }
        if !(1..=3).contains(&order) {
            return Err(ParseError::new(col, format!("bond order {order} outside 1..=3")));
        }
        bonds.push((i, j, order));
        col += tok.len() + 1;
    }

    let g = MolecularGraph::new(atom_types, bonds).map_err(|e| match e {
        GraphError::DuplicateBond { i, j } => {
            ParseError::new(semi + 2, format!("duplicate bond between {i} and {j}"))
        }
        other => ParseError::new(semi + 2, other.to_string()),
    })?;
    if !g.is_connected() {
        return Err(ParseError::new(1, "graph is disconnected"));
    }
    Ok(g)
}

/// Canonical text form: bonds normalized `i<j` and sorted lexicographically.
pub fn serialize_molecule(g: &MolecularGraph, alphabet: &AtomAlphabet) -> String {
    let mut out = String::new();
    for (idx, &ty) in g.atom_types().iter().enumerate() {
        if idx > 0 {
            out.push(',');
        }
        out.push_str(alphabet.symbol(ty));
    }
    out.push(';');
    for (idx, b) in g.bonds().iter().enumerate() {
        if idx > 0 {
            out.push(',');
        }
        let _ = write!(out, "{}-{}:{}", b.i, b.j, b.order);
    }
    out
}

// ---------------------------------------------------------------------------
// Canonical hashing
// ---------------------------------------------------------------------------

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over little-endian u64 words; stable across platforms and builds.
struct Fnv64(u64);

impl Fnv64 {
    fn new() -> Self {
        Fnv64(FNV_OFFSET)
    }

    fn write_u64(&mut self, word: u64) {
        for byte in word.to_le_bytes() {
            self.0 ^= u64::from(byte);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

/// Isomorphism-invariant 64-bit digest by iterated Weisfeiler-Lehman label
/// refinement (node labels = atom types, edge labels = bond orders, N rounds)
/// followed by hashing the sorted final label multiset.
///
/// WL is sound but incomplete: distinct digests imply non-isomorphic graphs,
/// while rare regular non-isomorphic pairs may collide. For uniqueness
/// counting this only ever overcounts duplicates.
pub fn canonical_hash(g: &MolecularGraph) -> u64 {
    let n = g.node_count();
    let adj = g.adjacency();

    let mut labels: Vec<u64> = g
        .atom_types()
        .iter()
        .map(|&ty| {
            let mut h = Fnv64::new();
            h.write_u64(0x6e6f_6465); // node tag
            h.write_u64(ty as u64);
            h.finish()
        })
        .collect();

    let mut scratch: Vec<(u64, u64)> = Vec::new();
    for _round in 0..n {
        let mut next = Vec::with_capacity(n);
        for v in 0..n {
            scratch.clear();
            scratch.extend(adj[v].iter().map(|&(u, order)| (u64::from(order), labels[u])));
            scratch.sort_unstable();
            let mut h = Fnv64::new();
            h.write_u64(labels[v]);
            for &(order, lab) in &scratch {
                h.write_u64(order);
                h.write_u64(lab);
            }
            next.push(h.finish());
        }
        labels = next;
    }

    labels.sort_unstable();
    let mut h = Fnv64::new();
    h.write_u64(n as u64);
    for lab in labels {
        h.write_u64(lab);
    }
    h.finish()
}

// ---------------------------------------------------------------------------
// Synthetic dataset generation
// ---------------------------------------------------------------------------

/// Generates `count` connected, valency-valid molecules deterministically.
///
/// Each molecule starts as a random tree attached under valence capacity
/// limits, then gains a few valency-respecting extra bonds and bond-order
/// upgrades, and is finally relabeled by a random node permutation.
pub fn generate_synthetic_dataset(
    count: usize,
    max_atoms: usize,
    alphabet: &AtomAlphabet,
    seed: u64,
) -> Vec<MolecularGraph> {
    assert!(count >= 1, "count must be >= 1");
    assert!((1..=38).contains(&max_atoms), "max_atoms must be in 1..=38");
    (0..count)
        .map(|m| generate_one(max_atoms, alphabet, seed, m as u64))
        .collect()
}

fn generate_one(max_atoms: usize, alphabet: &AtomAlphabet, seed: u64, index: u64) -> MolecularGraph {
    let mut rng = rng::stream(seed, rng::STREAM_DATAGEN, index, 0);
    let n = rng.random_range(1..=max_atoms);
    let a = alphabet.len();

    // Sample atom types until a tree under the valence bounds is feasible:
    // total valence must cover 2(n-1) tree edge endpoints.
    let mut types: Vec<usize> = Vec::new();
    let mut feasible = false;
    for _ in 0..64 {
        types = (0..n).map(|_| rng.random_range(0..a)).collect();
        let total: u32 = types.iter().map(|&t| alphabet.valence(t)).sum();
        if n == 1 || total >= 2 * (n as u32 - 1) {
            feasible = true;
            break;
        }
    }
    if !feasible {
        let best = (0..a).max_by_key(|&t| alphabet.valence(t)).unwrap();
        types = vec![best; n];
    }

    // Highest-valence atoms first: greedy attachment then never runs out of
    // open capacity among already-placed nodes.
    types.sort_unstable_by(|&x, &y| alphabet.valence(y).cmp(&alphabet.valence(x)));

    let mut capacity: Vec<u32> = types.iter().map(|&t| alphabet.valence(t)).collect();
    let mut bonds: Vec<(usize, usize, u8)> = Vec::new();
    let mut adjacent = vec![false; n * n];
    for i in 1..n {
        let open: Vec<usize> = (0..i).filter(|&j| capacity[j] >= 1).collect();
        let j = open[rng.random_range(0..open.len())];
        bonds.push((j, i, 1));
        adjacent[j * n + i] = true;
        adjacent[i * n + j] = true;
        capacity[j] -= 1;
        capacity[i] -= 1;
    }

    // Extra ring-forming bonds.
    if n >= 3 {
        let attempts = rng.random_range(0..=n);
        for _ in 0..attempts {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i != j && !adjacent[i * n + j] && capacity[i] >= 1 && capacity[j] >= 1 {
                bonds.push((i.min(j), i.max(j), 1));
                adjacent[i * n + j] = true;
                adjacent[j * n + i] = true;
                capacity[i] -= 1;
                capacity[j] -= 1;
            }
        }
    }

    // Bond-order upgrades where both endpoints still have capacity.
    if !bonds.is_empty() {
        let attempts = rng.random_range(0..=bonds.len());
        for _ in 0..attempts {
            let b = rng.random_range(0..bonds.len());
            let (i, j, order) = bonds[b];
            if order < 3 && capacity[i] >= 1 && capacity[j] >= 1 {
                bonds[b].2 += 1;
                capacity[i] -= 1;
                capacity[j] -= 1;
            }
        }
    }

    // Random relabeling so node order carries no valence signal.
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut new_types = vec![0usize; n];
    for (old, &new) in perm.iter().enumerate() {
        new_types[new] = types[old];
    }
    let new_bonds: Vec<(usize, usize, u8)> =
        bonds.iter().map(|&(i, j, o)| (perm[i], perm[j], o)).collect();

    MolecularGraph::new(new_types, new_bonds).expect("generator emits structurally valid graphs")
}

// ---------------------------------------------------------------------------
// Molecule files
// ---------------------------------------------------------------------------

/// One record of a molecule file: a parsed molecule, or an `#invalid` marker
/// whose raw decode text is preserved for inspection but never re-parsed.
#[derive(Debug, Clone)]
pub enum FileEntry {
    Molecule(MolecularGraph),
    InvalidDecode(String),
}

#[derive(Debug, Clone)]
pub struct MoleculeFile {
    pub alphabet: AtomAlphabet,
    pub entries: Vec<FileEntry>,
}

impl MoleculeFile {
    pub fn molecules(&self) -> Vec<&MolecularGraph> {
        self.entries
            .iter()
            .filter_map(|e| match e {
                FileEntry::Molecule(g) => Some(g),
                FileEntry::InvalidDecode(_) => None,
            })
            .collect()
    }

    pub fn invalid_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| matches!(e, FileEntry::InvalidDecode(_)))
            .count()
    }
}

/// Reads a molecule file: a `#alphabet sym:valence,...` header line followed
/// by one molecule per line; `#` lines are comments, `#invalid` lines record
/// rejected decodes.
pub fn read_molecule_file(path: &Path) -> Result<MoleculeFile, MolError> {
    let text = std::fs::read_to_string(path).map_err(|source| MolError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_molecule_file(&text)
}

pub fn parse_molecule_file(text: &str) -> Result<MoleculeFile, MolError> {
    let mut alphabet: Option<AtomAlphabet> = None;
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#alphabet") {
            if alphabet.is_some() {
                return Err(MolError::Header {
                    line: line_no,
                    message: "duplicate #alphabet header".into(),
                });
            }
            alphabet = Some(AtomAlphabet::parse_spec(rest.trim()).map_err(|e| MolError::Header {
                line: line_no,
                message: e.to_string(),
            })?);
            continue;
        }
        if let Some(rest) = line.strip_prefix("#invalid") {
            entries.push(FileEntry::InvalidDecode(rest.trim().to_string()));
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let ab = alphabet.as_ref().ok_or_else(|| MolError::Header {
            line: line_no,
            message: "molecule line before #alphabet header".into(),
        })?;
        let g = parse_molecule(line, ab).map_err(|source| MolError::Parse { line: line_no, source })?;
        entries.push(FileEntry::Molecule(g));
    }
    let alphabet = alphabet.ok_or_else(|| MolError::Header {
        line: 0,
        message: "missing #alphabet header".into(),
    })?;
    Ok(MoleculeFile { alphabet, entries })
}

/// A record to write: `Invalid` graphs are emitted as `#invalid` comment
/// lines carrying the raw decode.
#[derive(Debug, Clone, Copy)]
pub enum WriteRecord<'a> {
    Valid(&'a MolecularGraph),
    Invalid(&'a MolecularGraph),
}

pub fn render_molecule_file(alphabet: &AtomAlphabet, records: &[WriteRecord<'_>]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "#alphabet {}", alphabet.spec_string());
    for rec in records {
        match rec {
            WriteRecord::Valid(g) => {
                let _ = writeln!(out, "{}", serialize_molecule(g, alphabet));
            }
            WriteRecord::Invalid(g) => {
                let _ = writeln!(out, "#invalid {}", serialize_molecule(g, alphabet));
            }
        }
    }
    out
}

pub fn write_molecule_file(
    path: &Path,
    alphabet: &AtomAlphabet,
    records: &[WriteRecord<'_>],
) -> Result<(), MolError> {
    std::fs::write(path, render_molecule_file(alphabet, records)).map_err(|source| MolError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Canonical hashes of a training set, for novelty scoring.
pub fn training_hash_set(molecules: &[&MolecularGraph]) -> std::collections::HashSet<u64> {
    molecules.iter().map(|g| canonical_hash(g)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ethane(alphabet: &AtomAlphabet) -> MolecularGraph {
        parse_molecule("C,C;0-1:1", alphabet).unwrap()
    }

    #[test]
    fn parse_ethane() {
        let ab = AtomAlphabet::qm9();
        let g = ethane(&ab);
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.atom_types(), &[0, 0]);
        assert_eq!(g.bonds(), &[Bond { i: 0, j: 1, order: 1 }]);
    }

    #[test]
    fn parse_single_atom() {
        let ab = AtomAlphabet::qm9();
        let g = parse_molecule("C;", &ab).unwrap();
        assert_eq!(g.node_count(), 1);
        assert!(g.bonds().is_empty());
        assert!(g.is_connected());
    }

    #[test]
    fn parse_rejects_self_loop() {
        let ab = AtomAlphabet::qm9();
        let err = parse_molecule("C,C;0-0:1", &ab).unwrap_err();
        assert!(err.message.contains("self-loop"), "{err}");
    }

    #[test]
    fn parse_rejects_duplicate_bond() {
        let ab = AtomAlphabet::qm9();
        let err = parse_molecule("C,C;0-1:1,1-0:2", &ab).unwrap_err();
        assert!(err.message.contains("duplicate"), "{err}");
    }

    #[test]
    fn parse_rejects_unknown_symbol() {
        let ab = AtomAlphabet::qm9();
        let err = parse_molecule("C,X;0-1:1", &ab).unwrap_err();
        assert!(err.message.contains("unknown symbol"), "{err}");
        assert_eq!(err.column, 3);
    }

    #[test]
    fn parse_rejects_disconnected() {
        let ab = AtomAlphabet::qm9();
        let err = parse_molecule("C,C;", &ab).unwrap_err();
        assert!(err.message.contains("disconnected"), "{err}");
    }

    #[test]
    fn parse_rejects_out_of_range_index() {
        let ab = AtomAlphabet::qm9();
        let err = parse_molecule("C,C;0-2:1", &ab).unwrap_err();
        assert!(err.message.contains("out of range"), "{err}");
    }

    #[test]
    fn serialize_normalizes_bond_direction() {
        let ab = AtomAlphabet::qm9();
        let g = MolecularGraph::new(vec![0, 0], vec![(1, 0, 2)]).unwrap();
        assert_eq!(serialize_molecule(&g, &ab), "C,C;0-1:2");
    }

    #[test]
    fn serialize_sorts_bonds() {
        let ab = AtomAlphabet::qm9();
        let g = MolecularGraph::new(vec![0, 0, 0], vec![(1, 2, 1), (0, 2, 1), (0, 1, 1)]).unwrap();
        assert_eq!(serialize_molecule(&g, &ab), "C,C,C;0-1:1,0-2:1,1-2:1");
    }

    #[test]
    fn parse_serialize_round_trip() {
        let ab = AtomAlphabet::qm9();
        for text in ["C,C;0-1:1", "C;", "C,C,C;0-1:1,0-2:1,1-2:1", "C,N,O;0-1:2,1-2:1"] {
            let g = parse_molecule(text, &ab).unwrap();
            assert_eq!(serialize_molecule(&g, &ab), text);
        }
    }

    #[test]
    fn valency_examples() {
        let ab = AtomAlphabet::qm9();
        // carbon with four order-1 bonds
        let g = MolecularGraph::new(vec![0, 1, 1, 1, 1], vec![(0, 1, 1), (0, 2, 1), (0, 3, 1), (0, 4, 1)])
            .unwrap();
        assert!(check_valency(&g, &ab).valid());
        // carbon with one order-3 and two order-1 bonds: total 5 > 4
        let g = MolecularGraph::new(vec![0, 1, 1, 1], vec![(0, 1, 3), (0, 2, 1), (0, 3, 1)]).unwrap();
        let report = check_valency(&g, &ab);
        assert!(!report.valid());
        assert_eq!(
            report.violations,
            vec![ValencyViolation { node: 0, total_order: 5, allowed: 4 }]
        );
        // oxygen with one double bond
        let g = MolecularGraph::new(vec![2, 0], vec![(0, 1, 2)]).unwrap();
        assert!(check_valency(&g, &ab).valid());
    }

    #[test]
    fn hash_invariant_under_relabeling() {
        let ab = AtomAlphabet::qm9();
        let propane_a = parse_molecule("C,C,C;0-1:1,1-2:1", &ab).unwrap();
        let propane_b = MolecularGraph::new(vec![0, 0, 0], vec![(2, 1, 1), (1, 0, 1)]).unwrap();
        assert_eq!(canonical_hash(&propane_a), canonical_hash(&propane_b));
    }

    /// Brute-force isomorphism oracle over all node permutations.
    fn isomorphic_exhaustive(a: &MolecularGraph, b: &MolecularGraph) -> bool {
        let n = a.node_count();
        if n != b.node_count() || a.bonds().len() != b.bonds().len() {
            return false;
        }
        let mut perm: Vec<usize> = (0..n).collect();
        loop {
            let types_match = (0..n).all(|v| a.atom_types()[v] == b.atom_types()[perm[v]]);
            if types_match {
                let bonds_match = a
                    .bonds()
                    .iter()
                    .all(|bond| b.bond_order(perm[bond.i], perm[bond.j]) == bond.order);
                if bonds_match {
                    return true;
                }
            }
            // next lexicographic permutation
            let Some(k) = (0..n - 1).rev().find(|&k| perm[k] < perm[k + 1]) else {
                return false;
            };
            let l = (k + 1..n).rev().find(|&l| perm[l] > perm[k]).unwrap();
            perm.swap(k, l);
            perm[k + 1..].reverse();
        }
    }

    #[test]
    fn hash_separates_propane_from_propene() {
        let ab = AtomAlphabet::qm9();
        let propane = parse_molecule("C,C,C;0-1:1,1-2:1", &ab).unwrap();
        let propene = parse_molecule("C,C,C;0-1:2,1-2:1", &ab).unwrap();
        assert!(!isomorphic_exhaustive(&propane, &propene));
        assert_ne!(canonical_hash(&propane), canonical_hash(&propene));
    }

    #[test]
    fn hash_separates_atom_types() {
        let ab = AtomAlphabet::qm9();
        let carbon = parse_molecule("C;", &ab).unwrap();
        let nitrogen = parse_molecule("N;", &ab).unwrap();
        assert_ne!(canonical_hash(&carbon), canonical_hash(&nitrogen));
    }

    #[test]
    fn generator_is_deterministic_and_valid() {
        let ab = AtomAlphabet::qm9();
        let a = generate_synthetic_dataset(100, 9, &ab, 13);
        let b = generate_synthetic_dataset(100, 9, &ab, 13);
        assert_eq!(a, b);
        for g in &a {
            assert!(g.is_connected());
            assert!(check_valency(g, &ab).valid());
            assert!(g.node_count() <= 9);
        }
    }

    #[test]
    fn generator_single_atom() {
        let ab = AtomAlphabet::qm9();
        let got = generate_synthetic_dataset(1, 1, &ab, 7);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].node_count(), 1);
    }

    #[test]
    fn generator_handles_terminal_heavy_alphabet() {
        // Fluorine-heavy draws force the feasibility retry path.
        let ab = AtomAlphabet::parse_spec("F:1,C:4").unwrap();
        let got = generate_synthetic_dataset(50, 8, &ab, 3);
        for g in &got {
            assert!(g.is_connected());
            assert!(check_valency(g, &ab).valid());
        }
    }

    #[test]
    fn molecule_file_round_trip() {
        let ab = AtomAlphabet::qm9();
        let gs = generate_synthetic_dataset(20, 9, &ab, 5);
        let records: Vec<WriteRecord> = gs.iter().map(WriteRecord::Valid).collect();
        let text = render_molecule_file(&ab, &records);
        let parsed = parse_molecule_file(&text).unwrap();
        assert_eq!(parsed.alphabet, ab);
        let mols = parsed.molecules();
        assert_eq!(mols.len(), gs.len());
        for (a, b) in mols.iter().zip(&gs) {
            assert_eq!(*a, b);
        }
    }

    #[test]
    fn molecule_file_invalid_markers_counted() {
        let ab = AtomAlphabet::qm9();
        let g = parse_molecule("C,C;0-1:1", &ab).unwrap();
        let disconnected = MolecularGraph::new(vec![0, 0], vec![]).unwrap();
        let text = render_molecule_file(
            &ab,
            &[WriteRecord::Valid(&g), WriteRecord::Invalid(&disconnected)],
        );
        let parsed = parse_molecule_file(&text).unwrap();
        assert_eq!(parsed.molecules().len(), 1);
        assert_eq!(parsed.invalid_count(), 1);
    }

    #[test]
    fn molecule_file_requires_header() {
        let err = parse_molecule_file("C;\n").unwrap_err();
        assert!(err.to_string().contains("#alphabet"), "{err}");
    }

    #[test]
    fn alphabet_spec_round_trip() {
        let ab = AtomAlphabet::zinc();
        assert_eq!(ab.len(), 9);
        let back = AtomAlphabet::parse_spec(&ab.spec_string()).unwrap();
        assert_eq!(back, ab);
    }

    #[test]
    fn alphabet_rejects_duplicates_and_zero_valence() {
        assert!(AtomAlphabet::parse_spec("C:4,C:3").is_err());
        assert!(AtomAlphabet::parse_spec("C:0").is_err());
        assert!(AtomAlphabet::parse_spec("").is_err());
    }
}
