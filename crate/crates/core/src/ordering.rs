//! Order recovery from pairwise constraints.
//!
//! Two strategies are provided. [`topological_sort`] queries every pair up
//! front, builds the full tournament and runs a depth-first topological sort.
//! [`merge_sort_order`] queries the oracle lazily from inside a stable merge
//! sort, so only `O(v log v)` pairs are ever asked about.

use crate::error::{Error, Result};
use crate::model::Permutation;
use crate::oracle::{PairOracle, PRECEDES_THRESHOLD};

/// Largest document accepted by [`brute_force_max_agreement`].
pub const BRUTE_FORCE_MAX: usize = 8;

/// A tournament over `v` nodes: exactly one directed edge per unordered pair.
/// An edge `u -> w` means sentence `u` precedes sentence `w`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintGraph {
    v: usize,
    // row-major adjacency, precedes[u * v + w]
    precedes: Vec<bool>,
}

impl ConstraintGraph {
    /// Builds a tournament from an explicit edge list.
    pub fn from_edges(v: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut precedes = vec![false; v * v];
        for &(u, w) in edges {
            if u >= v || w >= v || u == w {
                return Err(Error::IndexOutOfRange { i: u, j: w, v });
            }
            if precedes[u * v + w] || precedes[w * v + u] {
                return Err(Error::Config(format!("pair {{{u}, {w}}} has more than one edge")));
            }
            precedes[u * v + w] = true;
        }
        let expected = v * v.saturating_sub(1) / 2;
        if edges.len() != expected {
            return Err(Error::Config(format!(
                "a tournament on {v} nodes needs {expected} edges, got {}",
                edges.len()
            )));
        }
        Ok(ConstraintGraph { v, precedes })
    }

    /// The tournament consistent with `order` (earlier nodes point to later ones).
    pub fn from_order(order: &Permutation) -> Self {
        let v = order.len();
        let pos = order.inverse();
        let mut precedes = vec![false; v * v];
        for u in 0..v {
            for w in 0..v {
                precedes[u * v + w] = pos[u] < pos[w];
            }
        }
        ConstraintGraph { v, precedes }
    }

    pub fn node_count(&self) -> usize {
        self.v
    }

    pub fn has_edge(&self, u: usize, w: usize) -> bool {
        u < self.v && w < self.v && self.precedes[u * self.v + w]
    }

    /// Out-neighbours of `u` in ascending order.
    pub fn successors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.precedes[u * self.v..(u + 1) * self.v];
        row.iter().enumerate().filter(|(_, &e)| e).map(|(w, _)| w)
    }

    /// All edges, sorted by source then target.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.v)
            .flat_map(|u| self.successors(u).map(move |w| (u, w)))
            .collect()
    }

    /// Number of edges `u -> w` with `u` placed before `w` in `order`.
    pub fn agreement(&self, order: &[usize]) -> usize {
        let mut count = 0;
        for (a, &u) in order.iter().enumerate() {
            for &w in &order[a + 1..] {
                if self.has_edge(u, w) {
                    count += 1;
                }
            }
        }
        count
    }

    /// Oracle view of the tournament: 1.0 when `i -> j`, else 0.0.
    pub fn as_oracle(&self) -> impl PairOracle + '_ {
        move |i: usize, j: usize| -> Result<f64> {
            if i < j && j < self.v {
                Ok(if self.has_edge(i, j) { 1.0 } else { 0.0 })
            } else {
                Err(Error::IndexOutOfRange { i, j, v: self.v })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderingResult {
    /// Predicted order, as shuffled indices.
    pub order: Permutation,
    pub queries_made: usize,
    /// Constraint edges ignored because they closed a cycle.
    pub dropped_edges: usize,
}

/// Queries every pair `i < j` and orients each edge by the 0.5 threshold.
pub fn build_constraint_graph(v: usize, oracle: &impl PairOracle) -> Result<ConstraintGraph> {
    let mut precedes = vec![false; v * v];
    for i in 0..v {
        for j in i + 1..v {
            if oracle.query(i, j)? >= PRECEDES_THRESHOLD {
                precedes[i * v + j] = true;
            } else {
                precedes[j * v + i] = true;
            }
        }
    }
    Ok(ConstraintGraph { v, precedes })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mark {
    White,
    Gray,
    Black,
}

/// Depth-first topological sort.
///
/// Roots and out-neighbours are visited in ascending index order, and a node
/// is prepended to the output once all its descendants are finished. An edge
/// into a node that is still on the DFS stack would close a cycle; it is
/// skipped and counted in `dropped_edges`. The result is always a permutation,
/// and it satisfies every edge when the graph is acyclic.
pub fn topological_sort(graph: &ConstraintGraph) -> OrderingResult {
    let v = graph.node_count();
    let mut mark = vec![Mark::White; v];
    let mut finished = Vec::with_capacity(v);
    let mut dropped_edges = 0;
    // (node, next candidate successor)
    let mut stack: Vec<(usize, usize)> = Vec::new();

    for root in 0..v {
        if mark[root] != Mark::White {
            continue;
        }
        mark[root] = Mark::Gray;
        stack.push((root, 0));
        while let Some(top) = stack.last_mut() {
            let (node, next) = *top;
            match (next..v).find(|&w| graph.has_edge(node, w)) {
                Some(w) => {
                    top.1 = w + 1;
                    match mark[w] {
                        Mark::White => {
                            mark[w] = Mark::Gray;
                            stack.push((w, 0));
                        }
                        Mark::Gray => dropped_edges += 1,
                        Mark::Black => {}
                    }
                }
                None => {
                    mark[node] = Mark::Black;
                    finished.push(node);
                    stack.pop();
                }
            }
        }
    }

    finished.reverse();
    OrderingResult {
        order: Permutation::new(finished).expect("every node finishes exactly once"),
        queries_made: v * v.saturating_sub(1) / 2,
        dropped_edges,
    }
}

/// Builds the full tournament from `oracle` and sorts it topologically.
pub fn topological_order(v: usize, oracle: &impl PairOracle) -> Result<OrderingResult> {
    let graph = build_constraint_graph(v, oracle)?;
    Ok(topological_sort(&graph))
}

/// Top-down stable merge sort over shuffled indices, asking `oracle` only for
/// the pairs the merge actually compares.
///
/// `a` goes before `b` iff `query(a, b) >= 0.5` (for `a < b`) or
/// `query(b, a) < 0.5` (for `a > b`). At most `v * ceil(log2 v)` queries are made.
pub fn merge_sort_order(v: usize, oracle: &impl PairOracle) -> Result<OrderingResult> {
    let mut queries_made = 0usize;
    let mut before = |a: usize, b: usize| -> Result<bool> {
        queries_made += 1;
        Ok(if a < b {
            oracle.query(a, b)? >= PRECEDES_THRESHOLD
        } else {
            oracle.query(b, a)? < PRECEDES_THRESHOLD
        })
    };

    let mut items: Vec<usize> = (0..v).collect();
    let mut scratch = items.clone();
    merge_sort(&mut items, &mut scratch, &mut before)?;

    Ok(OrderingResult {
        order: Permutation::new(items).expect("merge sort permutes its input"),
        queries_made,
        dropped_edges: 0,
    })
}

fn merge_sort<F>(items: &mut [usize], scratch: &mut [usize], before: &mut F) -> Result<()>
where
    F: FnMut(usize, usize) -> Result<bool>,
{
    let n = items.len();
    if n < 2 {
        return Ok(());
    }
    let mid = n / 2;
    merge_sort(&mut items[..mid], &mut scratch[..mid], before)?;
    merge_sort(&mut items[mid..], &mut scratch[mid..], before)?;

    let (mut l, mut r, mut out) = (0, mid, 0);
    while l < mid && r < n {
        // Left element wins unless the right one strictly precedes it.
        if before(items[l], items[r])? {
            scratch[out] = items[l];
            l += 1;
        } else {
            scratch[out] = items[r];
            r += 1;
        }
        out += 1;
    }
    scratch[out..out + mid - l].copy_from_slice(&items[l..mid]);
    out += mid - l;
    scratch[out..].copy_from_slice(&items[r..n]);
    items.copy_from_slice(&scratch[..n]);
    Ok(())
}

/// Exhaustive search for the order that satisfies the most constraint edges.
/// Ties go to the lexicographically smallest order. Only for `v <= 8`.
///
/// This is a verification oracle; the CLI never calls it.
pub fn brute_force_max_agreement(v: usize, oracle: &impl PairOracle) -> Result<Permutation> {
    if v > BRUTE_FORCE_MAX {
        return Err(Error::TooLarge {
            v,
            max: BRUTE_FORCE_MAX,
        });
    }
    let graph = build_constraint_graph(v, oracle)?;

    struct Search<'g> {
        graph: &'g ConstraintGraph,
        prefix: Vec<usize>,
        used: Vec<bool>,
        best: Option<(usize, Vec<usize>)>,
    }

    impl Search<'_> {
        // Placing a node settles every pair between it and the unplaced nodes,
        // so `score` counts satisfied edges among all settled pairs and the
        // remaining pairs bound what can still be gained.
        fn extend(&mut self, score: usize) {
            let v = self.graph.node_count();
            let left = v - self.prefix.len();
            if left == 0 {
                if self.best.as_ref().is_none_or(|(b, _)| score > *b) {
                    self.best = Some((score, self.prefix.clone()));
                }
                return;
            }
            let open_pairs = left * (left - 1) / 2;
            if let Some((best, _)) = &self.best {
                // Equal scores cannot displace an earlier (lexicographically smaller) order.
                if score + open_pairs <= *best {
                    return;
                }
            }
            for node in 0..v {
                if self.used[node] {
                    continue;
                }
                let gained = (0..v)
                    .filter(|&w| !self.used[w] && w != node && self.graph.has_edge(node, w))
                    .count();
                self.used[node] = true;
                self.prefix.push(node);
                self.extend(score + gained);
                self.prefix.pop();
                self.used[node] = false;
            }
        }
    }

    let mut search = Search {
        graph: &graph,
        prefix: Vec::with_capacity(v),
        used: vec![false; v],
        best: None,
    };
    search.extend(0);
    let (_, order) = search.best.expect("at least one permutation exists");
    Ok(Permutation::new(order).expect("search emits permutations"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::enumerate_pairs;

    fn cycle3() -> ConstraintGraph {
        ConstraintGraph::from_edges(3, &[(0, 1), (1, 2), (2, 0)]).unwrap()
    }

    #[test]
    fn four_sentence_gold_graph() {
        let gold = |_: usize, _: usize| -> Result<f64> { Ok(1.0) };
        let g = build_constraint_graph(4, &gold).unwrap();
        assert_eq!(g.edges(), enumerate_pairs(4));
        assert_eq!(g, ConstraintGraph::from_order(&Permutation::identity(4)));
        let r = topological_sort(&g);
        assert_eq!(r.order.as_slice(), &[0, 1, 2, 3]);
        assert_eq!(r.dropped_edges, 0);
    }

    #[test]
    fn single_node() {
        let g = build_constraint_graph(1, &|_: usize, _: usize| -> Result<f64> { unreachable!() }).unwrap();
        assert!(g.edges().is_empty());
        assert_eq!(topological_sort(&g).order.as_slice(), &[0]);
        let m = merge_sort_order(1, &g.as_oracle()).unwrap();
        assert_eq!(m.order.as_slice(), &[0]);
        assert_eq!(m.queries_made, 0);
        assert_eq!(brute_force_max_agreement(1, &g.as_oracle()).unwrap().as_slice(), &[0]);
    }

    #[test]
    fn three_cycle_from_prediction_table() {
        // (0,1) -> 0 before 1; (1,2) -> 1 before 2; (0,2) -> 2 before 0
        let q = |i: usize, j: usize| -> Result<f64> {
            Ok(match (i, j) {
                (0, 1) => 0.9,
                (1, 2) => 0.8,
                (0, 2) => 0.1,
                _ => unreachable!(),
            })
        };
        let g = build_constraint_graph(3, &q).unwrap();
        assert_eq!(g, cycle3());
    }

    #[test]
    fn three_cycle_topological_trace() {
        let r = topological_sort(&cycle3());
        assert_eq!(r.order.as_slice(), &[0, 1, 2]);
        assert_eq!(r.dropped_edges, 1);
    }

    #[test]
    fn three_cycle_brute_force() {
        // Hand enumeration of all six orders: [0,1,2], [1,2,0] and [2,0,1]
        // satisfy two edges; the rest satisfy one.
        let g = cycle3();
        let scores: Vec<usize> = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]]
            .iter()
            .map(|o| g.agreement(o))
            .collect();
        assert_eq!(scores, vec![2, 1, 1, 2, 2, 1]);
        assert_eq!(brute_force_max_agreement(3, &g.as_oracle()).unwrap().as_slice(), &[0, 1, 2]);
    }

    #[test]
    fn merge_sort_two_elements() {
        let q = |_: usize, _: usize| -> Result<f64> { Ok(0.2) };
        let r = merge_sort_order(2, &q).unwrap();
        assert_eq!(r.order.as_slice(), &[1, 0]);
        assert_eq!(r.queries_made, 1);
    }

    #[test]
    fn merge_sort_tie_keeps_input_order() {
        let q = |_: usize, _: usize| -> Result<f64> { Ok(0.5) };
        let r = merge_sort_order(6, &q).unwrap();
        assert!(r.order.is_identity());
        let g = build_constraint_graph(6, &q).unwrap();
        assert!(topological_sort(&g).order.is_identity());
    }

    #[test]
    fn merge_sort_recovers_gold_order() {
        let shuffle = Permutation::new(vec![3, 0, 4, 1, 2]).unwrap();
        let gold = |i: usize, j: usize| -> Result<f64> { Ok(if shuffle[i] < shuffle[j] { 1.0 } else { 0.0 }) };
        let r = merge_sort_order(5, &gold).unwrap();
        assert_eq!(r.order, shuffle.inverse());
        assert!(r.queries_made <= 15);
    }

    #[test]
    fn brute_force_rejects_large_input() {
        let q = |_: usize, _: usize| -> Result<f64> { Ok(1.0) };
        assert!(matches!(brute_force_max_agreement(9, &q), Err(Error::TooLarge { v: 9, .. })));
    }

    #[test]
    fn query_errors_propagate() {
        let q = |i: usize, j: usize| -> Result<f64> {
            Err(Error::MissingPair {
                doc_id: "d".into(),
                i,
                j,
            })
        };
        assert!(build_constraint_graph(3, &q).is_err());
        assert!(merge_sort_order(3, &q).is_err());
    }

    #[test]
    fn from_edges_validates_tournament() {
        assert!(ConstraintGraph::from_edges(3, &[(0, 1), (1, 2)]).is_err());
        assert!(ConstraintGraph::from_edges(2, &[(0, 1), (1, 0)]).is_err());
        assert!(ConstraintGraph::from_edges(2, &[(0, 0)]).is_err());
        assert!(ConstraintGraph::from_edges(2, &[(0, 2)]).is_err());
    }
}
