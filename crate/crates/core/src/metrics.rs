//! Generation metrics (validity, uniqueness, novelty) and a lightweight
//! graph-statistics distance between molecule sets.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::molgraph::{canonical_hash, is_valid, AtomAlphabet, MolecularGraph};

/// One generated sample: a decoded graph, or a marker read back from a file
/// whose decode was already rejected.
#[derive(Debug, Clone)]
pub enum GeneratedSample {
    Decoded(MolecularGraph),
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationMetrics {
    pub validity: f64,
    pub uniqueness: f64,
    pub novelty: f64,
    pub vun: f64,
    pub n_generated: usize,
    pub n_valid: usize,
}

/// Validity counts valency and connectivity; uniqueness and novelty are
/// computed over the valid subset only, via canonical hashes. An empty valid
/// set yields uniqueness = novelty = 0.
pub fn compute_metrics(
    generated: &[GeneratedSample],
    alphabet: &AtomAlphabet,
    training_hashes: &HashSet<u64>,
) -> GenerationMetrics {
    let n_generated = generated.len();
    let mut valid_hashes: Vec<u64> = Vec::new();
    for sample in generated {
        if let GeneratedSample::Decoded(g) = sample {
            if is_valid(g, alphabet) {
                valid_hashes.push(canonical_hash(g));
            }
        }
    }
    let n_valid = valid_hashes.len();
    let distinct: HashSet<u64> = valid_hashes.iter().copied().collect();
    let novel = distinct.iter().filter(|h| !training_hashes.contains(h)).count();

    let validity = if n_generated == 0 { 0.0 } else { n_valid as f64 / n_generated as f64 };
    let uniqueness = if n_valid == 0 { 0.0 } else { distinct.len() as f64 / n_valid as f64 };
    let novelty = if distinct.is_empty() { 0.0 } else { novel as f64 / distinct.len() as f64 };

    GenerationMetrics {
        validity,
        uniqueness,
        novelty,
        vun: validity * uniqueness * novelty,
        n_generated,
        n_valid,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStatsDistance {
    pub atom_tv: f64,
    pub bond_tv: f64,
    pub degree_tv: f64,
    pub nodes_tv: f64,
    pub mean: f64,
}

/// Total-variation distances between normalized histograms of atom types,
/// bond orders, node degrees, and node counts, plus their mean.
pub fn graph_stats_distance(a: &[&MolecularGraph], b: &[&MolecularGraph]) -> GraphStatsDistance {
    assert!(!a.is_empty() && !b.is_empty(), "stats distance needs non-empty lists");
    let atom_tv = tv_distance(&atom_histogram(a), &atom_histogram(b));
    let bond_tv = tv_distance(&bond_histogram(a), &bond_histogram(b));
    let degree_tv = tv_distance(&degree_histogram(a), &degree_histogram(b));
    let nodes_tv = tv_distance(&node_count_histogram(a), &node_count_histogram(b));
    let mean = (atom_tv + bond_tv + degree_tv + nodes_tv) / 4.0;
    GraphStatsDistance { atom_tv, bond_tv, degree_tv, nodes_tv, mean }
}

fn atom_histogram(gs: &[&MolecularGraph]) -> BTreeMap<usize, f64> {
    let mut counts = BTreeMap::new();
    for g in gs {
        for &t in g.atom_types() {
            *counts.entry(t).or_insert(0.0) += 1.0;
        }
    }
    normalize(counts)
}

fn bond_histogram(gs: &[&MolecularGraph]) -> BTreeMap<usize, f64> {
    let mut counts = BTreeMap::new();
    for g in gs {
        for bond in g.bonds() {
            *counts.entry(bond.order as usize).or_insert(0.0) += 1.0;
        }
    }
    normalize(counts)
}

fn degree_histogram(gs: &[&MolecularGraph]) -> BTreeMap<usize, f64> {
    let mut counts = BTreeMap::new();
    for g in gs {
        for adj in g.adjacency() {
            *counts.entry(adj.len()).or_insert(0.0) += 1.0;
        }
    }
    normalize(counts)
}

fn node_count_histogram(gs: &[&MolecularGraph]) -> BTreeMap<usize, f64> {
    let mut counts = BTreeMap::new();
    for g in gs {
        *counts.entry(g.node_count()).or_insert(0.0) += 1.0;
    }
    normalize(counts)
}

fn normalize(counts: BTreeMap<usize, f64>) -> BTreeMap<usize, f64> {
    let total: f64 = counts.values().sum();
    if total == 0.0 {
        return counts;
    }
    counts.into_iter().map(|(k, v)| (k, v / total)).collect()
}

/// `0.5 * sum |p - q|` over the union of supports; in `[0, 1]`.
fn tv_distance(p: &BTreeMap<usize, f64>, q: &BTreeMap<usize, f64>) -> f64 {
    let keys: std::collections::BTreeSet<usize> = p.keys().chain(q.keys()).copied().collect();
    0.5 * keys
        .iter()
        .map(|k| (p.get(k).unwrap_or(&0.0) - q.get(k).unwrap_or(&0.0)).abs())
        .sum::<f64>()
}
