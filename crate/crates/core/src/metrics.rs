//! Order-quality metrics and corpus aggregation.
//!
//! Per-document functions compare a predicted order with the gold order, both
//! given as sequences of sentence labels over the same `0..v`. A single
//! sentence document is a perfect prediction under every metric.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{is_permutation, Permutation};

/// Displacement windows reported alongside the main metrics.
pub const WINDOWS: [usize; 3] = [1, 2, 3];

/// Default cut-off for the long-document sub-report (documents with `v > 10`).
pub const DEFAULT_LONG_THRESHOLD: usize = 10;

/// Above this length [`kendall_tau`] switches to the merge-based inversion count.
pub const EXHAUSTIVE_TAU_MAX: usize = 32;

fn check_lengths(pred: &Permutation, gold: &Permutation) -> Result<usize> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: gold.len(),
        });
    }
    Ok(pred.len())
}

fn pair_count(v: usize) -> usize {
    v * v.saturating_sub(1) / 2
}

/// Fraction of positions holding the gold sentence.
pub fn sentence_accuracy(pred: &Permutation, gold: &Permutation) -> Result<f64> {
    let v = check_lengths(pred, gold)?;
    let hits = pred
        .as_slice()
        .iter()
        .zip(gold.as_slice())
        .filter(|(a, b)| a == b)
        .count();
    Ok(hits as f64 / v as f64)
}

/// Pairs of sentences whose relative order in `pred` disagrees with `gold`,
/// counted pair by pair.
pub fn inversions_exhaustive(pred: &Permutation, gold: &Permutation) -> Result<usize> {
    let v = check_lengths(pred, gold)?;
    let gold_pos = gold.inverse();
    let mut count = 0;
    for a in 0..v {
        for b in a + 1..v {
            if gold_pos[pred[a]] > gold_pos[pred[b]] {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Same count as [`inversions_exhaustive`] in `O(v log v)`, by merge sorting
/// the predicted order relabelled with gold positions.
pub fn inversions_merge(pred: &Permutation, gold: &Permutation) -> Result<usize> {
    check_lengths(pred, gold)?;
    let gold_pos = gold.inverse();
    let mut ranks: Vec<usize> = pred.as_slice().iter().map(|&s| gold_pos[s]).collect();
    let mut scratch = ranks.clone();
    Ok(count_inversions(&mut ranks, &mut scratch))
}

fn count_inversions(xs: &mut [usize], scratch: &mut [usize]) -> usize {
    let n = xs.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = count_inversions(&mut xs[..mid], &mut scratch[..mid])
        + count_inversions(&mut xs[mid..], &mut scratch[mid..]);
    let (mut l, mut r) = (0, mid);
    for slot in scratch[..n].iter_mut() {
        if r >= n || (l < mid && xs[l] <= xs[r]) {
            *slot = xs[l];
            l += 1;
        } else {
            // xs[r] jumps ahead of every element left in the left half
            count += mid - l;
            *slot = xs[r];
            r += 1;
        }
    }
    xs.copy_from_slice(&scratch[..n]);
    count
}

/// Kendall's tau, `1 - 2I / C(v, 2)`; 1.0 for `v = 1`.
pub fn kendall_tau(pred: &Permutation, gold: &Permutation) -> Result<f64> {
    let v = check_lengths(pred, gold)?;
    if v < 2 {
        return Ok(1.0);
    }
    let inversions = if v <= EXHAUSTIVE_TAU_MAX {
        inversions_exhaustive(pred, gold)?
    } else {
        inversions_merge(pred, gold)?
    };
    Ok(1.0 - 2.0 * inversions as f64 / pair_count(v) as f64)
}

/// Ordered pairs `(a, b)` with `a` appearing before `b`.
pub fn skip_bigrams(order: &Permutation) -> HashSet<(usize, usize)> {
    let xs = order.as_slice();
    let mut set = HashSet::with_capacity(pair_count(xs.len()));
    for (k, &a) in xs.iter().enumerate() {
        for &b in &xs[k + 1..] {
            set.insert((a, b));
        }
    }
    set
}

/// Fraction of gold skip-bigrams that the prediction preserves; 1.0 for `v = 1`.
pub fn rouge_s(pred: &Permutation, gold: &Permutation) -> Result<f64> {
    let v = check_lengths(pred, gold)?;
    if v < 2 {
        return Ok(1.0);
    }
    // gold_skip[a * v + b]: a appears before b in gold
    let mut gold_skip = vec![false; v * v];
    let g = gold.as_slice();
    for (k, &a) in g.iter().enumerate() {
        for &b in &g[k + 1..] {
            gold_skip[a * v + b] = true;
        }
    }
    let xs = pred.as_slice();
    let shared = xs
        .iter()
        .enumerate()
        .map(|(k, &a)| xs[k + 1..].iter().filter(|&&b| gold_skip[a * v + b]).count())
        .sum::<usize>();
    Ok(shared as f64 / pair_count(v) as f64)
}

/// Length of the longest common subsequence of two index sequences.
pub fn lcs_len(a: &[usize], b: &[usize]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &x in a {
        for (k, &y) in b.iter().enumerate() {
            cur[k + 1] = if x == y {
                prev[k] + 1
            } else {
                cur[k].max(prev[k + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn lcs_ratio(pred: &Permutation, gold: &Permutation) -> Result<f64> {
    let v = check_lengths(pred, gold)?;
    Ok(lcs_len(pred.as_slice(), gold.as_slice()) as f64 / v as f64)
}

/// Fraction of sentences placed within `window` positions of their gold position.
pub fn displacement_within(pred: &Permutation, gold: &Permutation, window: usize) -> Result<f64> {
    let v = check_lengths(pred, gold)?;
    let gold_pos = gold.inverse();
    let near = pred
        .as_slice()
        .iter()
        .enumerate()
        .filter(|&(k, &s)| k.abs_diff(gold_pos[s]) <= window)
        .count();
    Ok(near as f64 / v as f64)
}

/// Scores for one document.
///
/// When `length_mismatch` is set the predicted order was not a permutation of
/// the document's sentences; the metric fields are then zero and the document
/// is left out of every aggregate except the mismatch rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentScore {
    pub doc_id: String,
    pub v: usize,
    pub exact_match: bool,
    pub acc: f64,
    pub tau: f64,
    pub rouge_s: f64,
    pub lcs_ratio: f64,
    pub within_window: BTreeMap<usize, f64>,
    pub length_mismatch: bool,
}

impl DocumentScore {
    /// Scores a raw predicted sequence against `gold`. Anything other than a
    /// permutation of `0..gold.len()` is recorded as a mismatch.
    pub fn compute(doc_id: impl Into<String>, predicted: &[usize], gold: &Permutation) -> Self {
        let doc_id = doc_id.into();
        if !is_mismatch(predicted, gold.len()) {
            let pred = Permutation::new(predicted.to_vec()).expect("checked above");
            Self::score(doc_id, &pred, gold).expect("lengths checked above")
        } else {
            Self::mismatched(doc_id, gold.len())
        }
    }

    pub fn score(doc_id: impl Into<String>, pred: &Permutation, gold: &Permutation) -> Result<Self> {
        let within_window = WINDOWS
            .iter()
            .map(|&w| Ok((w, displacement_within(pred, gold, w)?)))
            .collect::<Result<_>>()?;
        Ok(DocumentScore {
            doc_id: doc_id.into(),
            v: gold.len(),
            exact_match: pred == gold,
            acc: sentence_accuracy(pred, gold)?,
            tau: kendall_tau(pred, gold)?,
            rouge_s: rouge_s(pred, gold)?,
            lcs_ratio: lcs_ratio(pred, gold)?,
            within_window,
            length_mismatch: false,
        })
    }

    pub fn mismatched(doc_id: impl Into<String>, v: usize) -> Self {
        DocumentScore {
            doc_id: doc_id.into(),
            v,
            exact_match: false,
            acc: 0.0,
            tau: 0.0,
            rouge_s: 0.0,
            lcs_ratio: 0.0,
            within_window: WINDOWS.iter().map(|&w| (w, 0.0)).collect(),
            length_mismatch: true,
        }
    }
}

/// Whether a predicted sequence fails to be a permutation of `0..v`.
pub fn is_mismatch(predicted: &[usize], v: usize) -> bool {
    predicted.len() != v || !is_permutation(predicted)
}

fn scored(scores: &[DocumentScore]) -> impl Iterator<Item = &DocumentScore> {
    scores.iter().filter(|s| !s.length_mismatch)
}

fn mean_pct(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    100.0 * values.sum::<f64>() / n as f64
}

/// Percentage of well-formed documents predicted exactly.
pub fn pmr(scores: &[DocumentScore]) -> Result<f64> {
    let n = scored(scores).count();
    if n == 0 {
        return Err(Error::EmptyCorpus);
    }
    let exact = scored(scores).filter(|s| s.exact_match).count();
    Ok(100.0 * exact as f64 / n as f64)
}

/// Percentage of documents whose prediction was not a valid order; 0 for an empty list.
pub fn mismatch_rate(scores: &[DocumentScore]) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    let bad = scores.iter().filter(|s| s.length_mismatch).count();
    100.0 * bad as f64 / scores.len() as f64
}

/// Macro-averaged metrics over well-formed predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub n_scored: usize,
    pub pmr: f64,
    pub acc: f64,
    pub tau: f64,
    pub rouge_s: f64,
    pub lcs: f64,
    /// Window size to percentage of sentences within that window.
    pub displacement: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub n_docs: usize,
    pub n_mismatched: usize,
    pub mismatch_pct: f64,
    /// Absent when every prediction was malformed.
    pub metrics: Option<MetricSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub long_threshold: Option<usize>,
    /// The same report restricted to documents longer than `long_threshold`;
    /// absent when there are none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub long_docs: Option<Box<CorpusReport>>,
}

pub fn aggregate(scores: &[DocumentScore]) -> Result<CorpusReport> {
    if scores.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let n_scored = scored(scores).count();
    let metrics = if n_scored == 0 {
        None
    } else {
        let mean = |f: fn(&DocumentScore) -> f64| mean_pct(scored(scores).map(f), n_scored);
        Some(MetricSummary {
            n_scored,
            pmr: pmr(scores)?,
            acc: mean(|s| s.acc),
            tau: scored(scores).map(|s| s.tau).sum::<f64>() / n_scored as f64,
            rouge_s: mean(|s| s.rouge_s),
            lcs: mean(|s| s.lcs_ratio),
            displacement: WINDOWS
                .iter()
                .map(|&w| (w, mean_pct(scored(scores).map(|s| s.within_window[&w]), n_scored)))
                .collect(),
        })
    };
    Ok(CorpusReport {
        n_docs: scores.len(),
        n_mismatched: scores.len() - n_scored,
        mismatch_pct: mismatch_rate(scores),
        metrics,
        long_threshold: None,
        long_docs: None,
    })
}

/// Aggregates over documents with more than `threshold` sentences, or `None` if there are none.
pub fn filter_long(scores: &[DocumentScore], threshold: usize) -> Option<CorpusReport> {
    let long: Vec<DocumentScore> = scores.iter().filter(|s| s.v > threshold).cloned().collect();
    aggregate(&long).ok()
}

/// Overall report with the long-document sub-report attached.
pub fn corpus_report(scores: &[DocumentScore], long_threshold: usize) -> Result<CorpusReport> {
    let mut report = aggregate(scores)?;
    report.long_threshold = Some(long_threshold);
    report.long_docs = filter_long(scores, long_threshold).map(Box::new);
    Ok(report)
}

impl CorpusReport {
    /// Aligned-column text rendering with two-decimal percentages.
    pub fn to_text(&self) -> String {
        let mut rows: Vec<(String, &CorpusReport)> = vec![("overall".into(), self)];
        if let (Some(t), Some(long)) = (self.long_threshold, &self.long_docs) {
            rows.push((format!("v > {t}"), long));
        }
        let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(8);

        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<label_w$}  {:>6}  {:>8}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}",
            "subset", "docs", "mismatch", "PMR", "Acc", "Tau", "Rouge-S", "LCS"
        );
        for (label, r) in &rows {
            let _ = write!(out, "{:<label_w$}  {:>6}  {:>8.2}", label, r.n_docs, r.mismatch_pct);
            match &r.metrics {
                Some(m) => {
                    let _ = writeln!(
                        out,
                        "  {:>7.2}  {:>7.2}  {:>7.2}  {:>7.2}  {:>7.2}",
                        m.pmr, m.acc, m.tau, m.rouge_s, m.lcs
                    );
                }
                None => {
                    let _ = writeln!(out, "  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}", "-", "-", "-", "-", "-");
                }
            }
        }
        if let Some(t) = self.long_threshold.filter(|_| self.long_docs.is_none()) {
            let _ = writeln!(out, "(no documents with v > {t})");
        }

        let _ = writeln!(out);
        let _ = write!(out, "{:<label_w$}", "displacement");
        for w in WINDOWS {
            let _ = write!(out, "  {:>7}", format!("Win={w}"));
        }
        let _ = writeln!(out, "  {:>7}", "% Miss");
        for (label, r) in &rows {
            let _ = write!(out, "{:<label_w$}", label);
            for w in WINDOWS {
                match &r.metrics {
                    Some(m) => {
                        let _ = write!(out, "  {:>7.2}", m.displacement[&w]);
                    }
                    None => {
                        let _ = write!(out, "  {:>7}", "-");
                    }
                }
            }
            let _ = writeln!(out, "  {:>7.2}", r.mismatch_pct);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(xs: &[usize]) -> Permutation {
        Permutation::new(xs.to_vec()).unwrap()
    }

    fn id(v: usize) -> Permutation {
        Permutation::identity(v)
    }

    fn rev(v: usize) -> Permutation {
        p(&(0..v).rev().collect::<Vec<_>>())
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(sentence_accuracy(&p(&[0, 1, 3, 2]), &id(4)).unwrap(), 0.5);
        assert_eq!(sentence_accuracy(&id(4), &id(4)).unwrap(), 1.0);
        assert_eq!(sentence_accuracy(&rev(4), &id(4)).unwrap(), 0.0);
        assert!(matches!(sentence_accuracy(&id(3), &id(4)), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn tau_examples() {
        assert_eq!(kendall_tau(&id(6), &id(6)).unwrap(), 1.0);
        assert_eq!(kendall_tau(&rev(6), &id(6)).unwrap(), -1.0);
        let swapped = p(&[0, 2, 1, 3]);
        assert_eq!(inversions_exhaustive(&swapped, &id(4)).unwrap(), 1);
        assert!((kendall_tau(&swapped, &id(4)).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(kendall_tau(&id(1), &id(1)).unwrap(), 1.0);
    }

    #[test]
    fn tau_uses_merge_count_for_long_orders() {
        assert_eq!(kendall_tau(&rev(100), &id(100)).unwrap(), -1.0);
        assert_eq!(inversions_merge(&rev(100), &id(100)).unwrap(), 4950);
    }

    #[test]
    fn rouge_examples() {
        let pred = p(&[1, 0, 2, 3]);
        let expected: HashSet<_> = [(0, 2), (0, 3), (1, 2), (1, 3), (2, 3)].into_iter().collect();
        let shared: HashSet<_> = skip_bigrams(&pred).intersection(&skip_bigrams(&id(4))).copied().collect();
        assert_eq!(shared, expected);
        assert!((rouge_s(&pred, &id(4)).unwrap() - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(rouge_s(&id(4), &id(4)).unwrap(), 1.0);
        assert_eq!(rouge_s(&rev(4), &id(4)).unwrap(), 0.0);
        assert_eq!(rouge_s(&id(1), &id(1)).unwrap(), 1.0);
    }

    #[test]
    fn lcs_examples() {
        assert_eq!(lcs_ratio(&p(&[1, 0, 2, 3]), &id(4)).unwrap(), 0.75);
        assert_eq!(lcs_ratio(&id(4), &id(4)).unwrap(), 1.0);
        assert_eq!(lcs_ratio(&rev(4), &id(4)).unwrap(), 0.25);
    }

    #[test]
    fn displacement_examples() {
        assert_eq!(displacement_within(&p(&[1, 0, 2, 3]), &id(4), 1).unwrap(), 1.0);
        for w in 1..5 {
            assert_eq!(displacement_within(&id(4), &id(4), w).unwrap(), 1.0);
        }
        // displacements 4, 2, 0, 2, 4
        assert_eq!(displacement_within(&rev(5), &id(5), 2).unwrap(), 0.6);
    }

    #[test]
    fn metrics_respect_non_identity_gold() {
        // gold [2,0,1]; predicting it exactly is perfect
        let gold = p(&[2, 0, 1]);
        let s = DocumentScore::score("d", &gold, &gold).unwrap();
        assert!(s.exact_match && s.acc == 1.0 && s.tau == 1.0 && s.rouge_s == 1.0 && s.lcs_ratio == 1.0);
        let s = DocumentScore::score("d", &p(&[1, 0, 2]), &gold).unwrap();
        assert_eq!(s.tau, -1.0);
    }

    #[test]
    fn mismatch_detection() {
        let s = DocumentScore::compute("d", &[0, 1, 2], &id(4));
        assert!(s.length_mismatch);
        assert!(DocumentScore::compute("d", &[0, 1, 1, 2], &id(4)).length_mismatch);
        assert!(DocumentScore::compute("d", &[0, 1, 2, 9], &id(4)).length_mismatch);
        assert!(!DocumentScore::compute("d", &[3, 1, 2, 0], &id(4)).length_mismatch);
        let well_formed: Vec<_> = (0..3).map(|k| DocumentScore::compute(format!("{k}"), &[1, 0], &id(2))).collect();
        assert_eq!(mismatch_rate(&well_formed), 0.0);
    }

    fn perfect(id_: &str, v: usize) -> DocumentScore {
        DocumentScore::score(id_, &id(v), &id(v)).unwrap()
    }

    #[test]
    fn pmr_examples() {
        let docs = vec![perfect("a", 3), DocumentScore::score("b", &rev(3), &id(3)).unwrap()];
        assert_eq!(pmr(&docs).unwrap(), 50.0);
        assert_eq!(pmr(&[perfect("a", 3), perfect("b", 1)]).unwrap(), 100.0);
        assert!(perfect("one", 1).exact_match);
        assert!(matches!(pmr(&[]), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn aggregate_single_perfect_document() {
        let r = aggregate(&[perfect("a", 5)]).unwrap();
        let m = r.metrics.unwrap();
        assert_eq!((m.pmr, m.acc, m.tau, m.rouge_s, m.lcs), (100.0, 100.0, 1.0, 100.0, 100.0));
        assert_eq!(r.mismatch_pct, 0.0);
    }

    #[test]
    fn aggregate_tau_is_arithmetic_mean() {
        // I = 3 of 6 pairs
        let zero = DocumentScore::score("z", &p(&[1, 2, 3, 0]), &id(4)).unwrap();
        assert_eq!(zero.tau, 0.0);
        let r = aggregate(&[perfect("a", 4), zero]).unwrap();
        assert_eq!(r.metrics.unwrap().tau, 0.5);
        assert!(matches!(aggregate(&[]), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn mismatched_documents_are_excluded() {
        let docs = vec![perfect("a", 4), DocumentScore::compute("b", &[0, 1, 2], &id(4))];
        let r = aggregate(&docs).unwrap();
        assert_eq!(r.mismatch_pct, 50.0);
        let m = r.metrics.unwrap();
        assert_eq!(m.n_scored, 1);
        assert_eq!(m.pmr, 100.0);
        let all_bad = aggregate(&[DocumentScore::mismatched("x", 3)]).unwrap();
        assert!(all_bad.metrics.is_none());
        assert_eq!(all_bad.mismatch_pct, 100.0);
    }

    #[test]
    fn long_document_filter() {
        let docs = vec![
            perfect("a", 5),
            perfect("b", 12),
            DocumentScore::score("c", &rev(15), &id(15)).unwrap(),
        ];
        let long = filter_long(&docs, 10).unwrap();
        assert_eq!(long.n_docs, 2);
        // by hand: one of the two long documents is exact
        assert_eq!(long.metrics.unwrap().pmr, 50.0);
        assert!(filter_long(&docs[..1], 10).is_none());
        let report = corpus_report(&docs[..1], 10).unwrap();
        assert!(report.to_text().contains("no documents with v > 10"));
    }

    #[test]
    fn text_report_layout() {
        let r = corpus_report(&[perfect("a", 12)], 10).unwrap();
        let text = r.to_text();
        assert!(text.contains("100.00"), "{text}");
        assert!(text.contains("Rouge-S"));
        assert!(text.contains("Win=3"));
        assert!(text.contains("v > 10"));
    }
}
