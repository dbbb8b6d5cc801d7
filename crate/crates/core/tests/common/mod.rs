//! Shared fixtures and independent reference implementations for the
//! integration tests. Nothing here calls into the code paths it checks.

#![allow(dead_code)]

use std::path::Path;

use petgraph::graph::DiGraph;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sentsort::model::{write_corpus, Document};
use sentsort::{ConstraintGraph, Permutation};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_permutation(rng: &mut impl Rng, v: usize) -> Permutation {
    let mut xs: Vec<usize> = (0..v).collect();
    xs.shuffle(rng);
    Permutation::new(xs).unwrap()
}

/// Tournament with each pair oriented by a fair coin.
pub fn random_tournament(rng: &mut impl Rng, v: usize) -> ConstraintGraph {
    let mut edges = Vec::new();
    for i in 0..v {
        for j in i + 1..v {
            edges.push(if rng.gen_bool(0.5) { (i, j) } else { (j, i) });
        }
    }
    ConstraintGraph::from_edges(v, &edges).unwrap()
}

/// Acyclic tournament whose unique consistent order is `order`.
pub fn acyclic_tournament(order: &Permutation) -> ConstraintGraph {
    let xs = order.as_slice();
    let mut edges = Vec::new();
    for a in 0..xs.len() {
        for b in a + 1..xs.len() {
            edges.push((xs[a], xs[b]));
        }
    }
    ConstraintGraph::from_edges(xs.len(), &edges).unwrap()
}

/// Cycle check through petgraph, independent of the DFS under test.
pub fn has_cycle(g: &ConstraintGraph) -> bool {
    let mut pg = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..g.node_count()).map(|_| pg.add_node(())).collect();
    for (u, w) in g.edges() {
        pg.add_edge(nodes[u], nodes[w], ());
    }
    petgraph::algo::is_cyclic_directed(&pg)
}

/// Patience-sorting longest strictly increasing subsequence.
pub fn lis_len(xs: &[usize]) -> usize {
    let mut tails: Vec<usize> = Vec::new();
    for &x in xs {
        match tails.binary_search(&x) {
            Ok(_) => {}
            Err(k) if k == tails.len() => tails.push(x),
            Err(k) => tails[k] = x,
        }
    }
    tails.len()
}

/// `gold^-1 ∘ pred`: each predicted sentence replaced by its gold position.
pub fn relabel(pred: &Permutation, gold: &Permutation) -> Vec<usize> {
    let mut gold_pos = vec![0; gold.len()];
    for (k, &s) in gold.as_slice().iter().enumerate() {
        gold_pos[s] = k;
    }
    pred.as_slice().iter().map(|&s| gold_pos[s]).collect()
}

/// Straight-line per-document metrics: (exact, acc, tau, rouge_s, lcs_ratio).
pub fn reference_scores(pred: &[usize], gold: &[usize]) -> (bool, f64, f64, f64, f64) {
    let v = gold.len();
    let pos = |order: &[usize], s: usize| order.iter().position(|&x| x == s).unwrap();
    let exact = pred == gold;
    let acc = (0..v).filter(|&k| pred[k] == gold[k]).count() as f64 / v as f64;
    if v == 1 {
        return (exact, acc, 1.0, 1.0, 1.0);
    }
    let mut concordant = 0usize;
    let mut discordant = 0usize;
    for a in 0..v {
        for b in 0..v {
            if a < b {
                let same = (pos(pred, a) < pos(pred, b)) == (pos(gold, a) < pos(gold, b));
                if same {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let pairs = (concordant + discordant) as f64;
    let tau = (concordant as f64 - discordant as f64) / pairs;
    let rouge = concordant as f64 / pairs;
    // LCS by recursion over suffixes with memo
    let mut memo = vec![vec![usize::MAX; v + 1]; v + 1];
    fn lcs(a: &[usize], b: &[usize], i: usize, j: usize, memo: &mut Vec<Vec<usize>>) -> usize {
        if i == a.len() || j == b.len() {
            return 0;
        }
        if memo[i][j] != usize::MAX {
            return memo[i][j];
        }
        let r = if a[i] == b[j] {
            1 + lcs(a, b, i + 1, j + 1, memo)
        } else {
            lcs(a, b, i + 1, j, memo).max(lcs(a, b, i, j + 1, memo))
        };
        memo[i][j] = r;
        r
    }
    let l = lcs(pred, gold, 0, 0, &mut memo) as f64 / v as f64;
    (exact, acc, tau, rouge, l)
}

/// A synthetic corpus with lengths drawn uniformly from `min_v..=max_v`.
pub fn synthetic_corpus(n: usize, min_v: usize, max_v: usize, seed: u64) -> Vec<Document> {
    let mut rng = rng(seed);
    (0..n)
        .map(|d| {
            let v = rng.gen_range(min_v..=max_v);
            let sentences = (0..v).map(|k| format!("Document {d}, sentence {k}.")).collect();
            Document::new(format!("doc-{d:04}"), sentences).unwrap()
        })
        .collect()
}

pub fn write_synthetic_corpus(path: &Path, n: usize, min_v: usize, max_v: usize, seed: u64) -> Vec<Document> {
    let docs = synthetic_corpus(n, min_v, max_v, seed);
    write_corpus(path, &docs).unwrap();
    docs
}

pub fn ceil_log2(v: usize) -> usize {
    if v <= 1 {
        0
    } else {
        (usize::BITS - (v - 1).leading_zeros()) as usize
    }
}
