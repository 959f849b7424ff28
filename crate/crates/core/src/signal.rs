//! Encoding molecules as sets of (coordinate, target-signal) function
//! evaluations and decoding sampled signals back into graphs.
//!
//! Signal layout: `f = A + 3 + 1` slots — one per alphabet element, one per
//! bond order in `{1, 2, 3}`, and a null slot meaning "no bond here".

use thiserror::Error;

use crate::molgraph::{AtomAlphabet, MolecularGraph};
use crate::spectral::{self, CoordinateSet, EigenError};

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("signal has {got} slots, layout needs {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("{got} signals for {want} evaluation kinds")]
    CountMismatch { got: usize, want: usize },
}

/// Slot assignment for an alphabet of `A` elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignalLayout {
    alphabet_size: usize,
}

impl SignalLayout {
    pub fn f(&self) -> usize {
        self.alphabet_size + 4
    }

    pub fn atom_range(&self) -> std::ops::Range<usize> {
        0..self.alphabet_size
    }

    pub fn bond_range(&self) -> std::ops::Range<usize> {
        self.alphabet_size..self.alphabet_size + 3
    }

    pub fn null_index(&self) -> usize {
        self.alphabet_size + 3
    }

    pub fn bond_slot(&self, order: u8) -> usize {
        debug_assert!((1..=3).contains(&order));
        self.alphabet_size + usize::from(order) - 1
    }
}

pub fn signal_layout(alphabet: &AtomAlphabet) -> SignalLayout {
    SignalLayout { alphabet_size: alphabet.len() }
}

/// Where a function evaluation lives: on a node, or on an unordered pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvaluationKind {
    Node(usize),
    Edge(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionEvaluation {
    pub kind: EvaluationKind,
    pub coordinate: Vec<f64>,
    pub target: Vec<f64>,
}

/// A molecule as a function: all `N` node evaluations followed by all
/// `N(N-1)/2` pair evaluations in lexicographic `(i, j)` order.
#[derive(Debug, Clone)]
pub struct MoleculeFunction {
    pub graph: MolecularGraph,
    pub coords: CoordinateSet,
    pub evaluations: Vec<FunctionEvaluation>,
}

/// Encodes a molecule: node targets are one-hot on the atom slot, pair
/// targets one-hot on the matching bond slot or on the null slot.
pub fn encode_molecule(
    g: &MolecularGraph,
    layout: &SignalLayout,
    d: usize,
    tol: f64,
) -> Result<MoleculeFunction, EigenError> {
    let coords = spectral::node_coordinates(g, d, tol)?;
    let n = g.node_count();
    let f = layout.f();
    let mut evaluations = Vec::with_capacity(n + n * (n - 1) / 2);

    for i in 0..n {
        let mut target = vec![0.0; f];
        target[g.atom_types()[i]] = 1.0;
        evaluations.push(FunctionEvaluation {
            kind: EvaluationKind::Node(i),
            coordinate: coords.node(i).to_vec(),
            target,
        });
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut target = vec![0.0; f];
            let order = g.bond_order(i, j);
            let slot = if order == 0 { layout.null_index() } else { layout.bond_slot(order) };
            target[slot] = 1.0;
            evaluations.push(FunctionEvaluation {
                kind: EvaluationKind::Edge(i, j),
                coordinate: spectral::edge_coordinates(&coords, i, j),
                target,
            });
        }
    }

    Ok(MoleculeFunction { graph: g.clone(), coords, evaluations })
}

/// Decodes sampled signals: node = argmax over atom slots only; pair = argmax
/// over bond and null slots, no bond when the null slot wins. Ties break
/// toward the lowest slot index. The result may violate valency or
/// connectivity; it is scored downstream, never corrected.
pub fn decode_sample(
    kinds: &[EvaluationKind],
    signals: &[Vec<f64>],
    alphabet: &AtomAlphabet,
) -> Result<MolecularGraph, SignalError> {
    let layout = signal_layout(alphabet);
    let f = layout.f();
    if kinds.len() != signals.len() {
        return Err(SignalError::CountMismatch { got: signals.len(), want: kinds.len() });
    }
    for s in signals {
        if s.len() != f {
            return Err(SignalError::LengthMismatch { got: s.len(), want: f });
        }
    }

    let n = kinds.iter().filter(|k| matches!(k, EvaluationKind::Node(_))).count();
    let mut atom_types = vec![0usize; n];
    let mut bonds = Vec::new();
    for (kind, signal) in kinds.iter().zip(signals) {
        match *kind {
            EvaluationKind::Node(i) => {
                atom_types[i] = argmax(&signal[layout.atom_range()]);
            }
            EvaluationKind::Edge(i, j) => {
                let slot = argmax(&signal[layout.bond_range().start..=layout.null_index()]);
                if slot < 3 {
                    bonds.push((i, j, slot as u8 + 1));
                }
            }
        }
    }
    Ok(MolecularGraph::new(atom_types, bonds).expect("decode emits structurally valid graphs"))
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &x) in values.iter().enumerate() {
        if x > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::{generate_synthetic_dataset, parse_molecule};
    use crate::spectral::DEFAULT_TOL;

    #[test]
    fn layout_sizes() {
        assert_eq!(signal_layout(&AtomAlphabet::qm9()).f(), 8);
        assert_eq!(signal_layout(&AtomAlphabet::zinc()).f(), 13);
        let one = AtomAlphabet::parse_spec("C:4").unwrap();
        assert_eq!(signal_layout(&one).f(), 5);
        let layout = signal_layout(&AtomAlphabet::qm9());
        assert_eq!(layout.atom_range(), 0..4);
        assert_eq!(layout.bond_range(), 4..7);
        assert_eq!(layout.null_index(), 7);
    }

    #[test]
    fn encode_targets_match_layout() {
        let ab = AtomAlphabet::qm9();
        let layout = signal_layout(&ab);
        let g = parse_molecule("C,C;0-1:1", &ab).unwrap();
        let mf = encode_molecule(&g, &layout, 7, DEFAULT_TOL).unwrap();
        assert_eq!(mf.evaluations.len(), 3);
        // carbon node
        assert_eq!(mf.evaluations[0].target, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        // bonded pair, order 1
        assert_eq!(mf.evaluations[2].target, vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn encode_nonbonded_pair_hits_null_slot() {
        let ab = AtomAlphabet::qm9();
        let layout = signal_layout(&ab);
        let g = parse_molecule("C,C,C;0-1:1,1-2:1", &ab).unwrap();
        let mf = encode_molecule(&g, &layout, 7, DEFAULT_TOL).unwrap();
        let pair02 = mf
            .evaluations
            .iter()
            .find(|e| e.kind == EvaluationKind::Edge(0, 2))
            .unwrap();
        assert_eq!(pair02.target, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn evaluation_count_is_nodes_plus_pairs() {
        let ab = AtomAlphabet::qm9();
        let layout = signal_layout(&ab);
        for g in generate_synthetic_dataset(20, 9, &ab, 11) {
            let n = g.node_count();
            let mf = encode_molecule(&g, &layout, 7, DEFAULT_TOL).unwrap();
            assert_eq!(mf.evaluations.len(), n + n * (n - 1) / 2);
        }
    }

    #[test]
    fn decode_masks_bond_slots_for_nodes() {
        let ab = AtomAlphabet::qm9();
        let kinds = [EvaluationKind::Node(0)];
        let signals = vec![vec![0.9, 0.1, 0.0, 0.0, 0.7, 0.0, 0.0, 0.0]];
        let g = decode_sample(&kinds, &signals, &ab).unwrap();
        assert_eq!(g.atom_types(), &[0]);
        assert!(g.bonds().is_empty());
    }

    #[test]
    fn decode_null_slot_wins_no_bond() {
        let ab = AtomAlphabet::qm9();
        let kinds = [
            EvaluationKind::Node(0),
            EvaluationKind::Node(1),
            EvaluationKind::Edge(0, 1),
        ];
        let node = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let edge = vec![0.0, 0.0, 0.0, 0.0, 0.5, 0.4, 0.3, 0.6];
        let g = decode_sample(&kinds, &[node.clone(), node, edge], &ab).unwrap();
        assert!(g.bonds().is_empty());
    }

    #[test]
    fn decode_tie_breaks_toward_lower_slot() {
        let ab = AtomAlphabet::qm9();
        let kinds = [
            EvaluationKind::Node(0),
            EvaluationKind::Node(1),
            EvaluationKind::Edge(0, 1),
        ];
        let node = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        // exact tie between bond slot 0 and the null slot
        let edge = vec![0.0, 0.0, 0.0, 0.0, 0.6, 0.0, 0.0, 0.6];
        let g = decode_sample(&kinds, &[node.clone(), node, edge], &ab).unwrap();
        assert_eq!(g.bonds().len(), 1);
        assert_eq!(g.bonds()[0].order, 1);
    }

    #[test]
    fn decode_rejects_wrong_signal_length() {
        let ab = AtomAlphabet::qm9();
        let kinds = [EvaluationKind::Node(0)];
        let err = decode_sample(&kinds, &[vec![0.0; 5]], &ab).unwrap_err();
        assert!(matches!(err, SignalError::LengthMismatch { got: 5, want: 8 }));
    }

    #[test]
    fn encode_decode_identity_on_random_molecules() {
        let ab = AtomAlphabet::qm9();
        let layout = signal_layout(&ab);
        for g in generate_synthetic_dataset(100, 9, &ab, 2024) {
            let mf = encode_molecule(&g, &layout, 7, DEFAULT_TOL).unwrap();
            let kinds: Vec<EvaluationKind> = mf.evaluations.iter().map(|e| e.kind).collect();
            let signals: Vec<Vec<f64>> =
                mf.evaluations.iter().map(|e| e.target.clone()).collect();
            let decoded = decode_sample(&kinds, &signals, &ab).unwrap();
            assert_eq!(decoded, g);
        }
    }

    #[test]
    fn node_targets_never_touch_bond_slots() {
        let ab = AtomAlphabet::qm9();
        let layout = signal_layout(&ab);
        for g in generate_synthetic_dataset(20, 9, &ab, 8) {
            let mf = encode_molecule(&g, &layout, 7, DEFAULT_TOL).unwrap();
            for e in &mf.evaluations {
                match e.kind {
                    EvaluationKind::Node(_) => {
                        assert!(e.target[layout.bond_range().start..].iter().all(|&x| x == 0.0));
                    }
                    EvaluationKind::Edge(_, _) => {
                        assert!(e.target[layout.atom_range()].iter().all(|&x| x == 0.0));
                    }
                }
            }
        }
    }
}
