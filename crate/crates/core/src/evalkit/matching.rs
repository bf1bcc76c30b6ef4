use serde::{Deserialize, Serialize};

use super::record::record_similarity;
use super::{EvalError, SimilarityWeights};
use crate::records::Record;

/// One threshold-passing gold/prediction pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub gold: usize,
    pub pred: usize,
    pub similarity: f64,
}

/// Bipartite graph between gold and predicted records; only pairs whose score
/// reaches `threshold` are connected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchGraph {
    gold_count: usize,
    pred_count: usize,
    edges: Vec<Edge>,
    threshold: f64,
}

impl MatchGraph {
    pub fn new(gold_count: usize, pred_count: usize, threshold: f64, mut edges: Vec<Edge>) -> Result<Self, EvalError> {
        check_threshold(threshold)?;
        edges.sort_by_key(|e| (e.gold, e.pred));
        for pair in edges.windows(2) {
            if (pair[0].gold, pair[0].pred) == (pair[1].gold, pair[1].pred) {
                return Err(EvalError::InvalidGraph(format!("duplicate edge ({}, {})", pair[0].gold, pair[0].pred)));
            }
        }
        for e in &edges {
            if e.gold >= gold_count || e.pred >= pred_count {
                return Err(EvalError::InvalidGraph(format!("edge ({}, {}) out of range", e.gold, e.pred)));
            }
            if !(threshold..=1.0).contains(&e.similarity) {
                return Err(EvalError::InvalidGraph(format!(
                    "edge ({}, {}) similarity {} outside [{threshold}, 1]",
                    e.gold, e.pred, e.similarity
                )));
            }
        }
        Ok(Self { gold_count, pred_count, edges, threshold })
    }

    pub fn gold_count(&self) -> usize {
        self.gold_count
    }

    pub fn pred_count(&self) -> usize {
        self.pred_count
    }

    /// Edges sorted by `(gold, pred)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

fn check_threshold(threshold: f64) -> Result<(), EvalError> {
    if threshold > 0.0 && threshold <= 1.0 {
        Ok(())
    } else {
        Err(EvalError::Threshold(threshold))
    }
}

/// Outcome of matching predictions against gold records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub gold_count: usize,
    pub pred_count: usize,
    /// Matched `(gold, pred)` pairs in ascending order.
    pub matching: Vec<(usize, usize)>,
    /// Similarity of each matched pair, aligned with `matching`.
    pub similarities: Vec<f64>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MatchReport {
    fn from_pairs(gold_count: usize, pred_count: usize, pairs: Vec<Edge>) -> Self {
        let tp = pairs.len();
        let precision = if pred_count == 0 { 0.0 } else { tp as f64 / pred_count as f64 };
        let recall = if gold_count == 0 { 0.0 } else { tp as f64 / gold_count as f64 };
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Self {
            gold_count,
            pred_count,
            matching: pairs.iter().map(|e| (e.gold, e.pred)).collect(),
            similarities: pairs.iter().map(|e| e.similarity).collect(),
            tp,
            fp: pred_count - tp,
            fn_: gold_count - tp,
            precision,
            recall,
            f1,
        }
    }
}

/// Scores every gold/prediction pair and keeps those at or above `threshold`.
///
/// Pairs of different record kinds are never connected.
pub fn build_match_graph(
    gold: &[Record],
    pred: &[Record],
    threshold: f64,
    w: &SimilarityWeights,
) -> Result<MatchGraph, EvalError> {
    check_threshold(threshold)?;
    w.validate()?;
    let mut edges = Vec::new();
    for (gi, g) in gold.iter().enumerate() {
        for (pi, p) in pred.iter().enumerate() {
            if g.kind() != p.kind() {
                continue;
            }
            let similarity = record_similarity(g, p, w)?;
            if similarity >= threshold {
                edges.push(Edge { gold: gi, pred: pi, similarity });
            }
        }
    }
    MatchGraph::new(gold.len(), pred.len(), threshold, edges)
}

/// Graph construction followed by matching.
pub fn score_records(
    gold: &[Record],
    pred: &[Record],
    threshold: f64,
    w: &SimilarityWeights,
) -> Result<MatchReport, EvalError> {
    Ok(max_matching(&build_match_graph(gold, pred, threshold, w)?))
}

// Similarities are compared at this resolution so ties are exact.
const SIM_SCALE: f64 = 1e9;

/// One-to-one matching of maximum cardinality; among those, maximum total
/// similarity; remaining ties go to the lexicographically smallest list of
/// `(gold, pred)` pairs.
pub fn max_matching(g: &MatchGraph) -> MatchReport {
    let mut pairs = Vec::new();
    for component in components(g) {
        pairs.extend(match_component(&component));
    }
    pairs.sort_by_key(|e| (e.gold, e.pred));
    MatchReport::from_pairs(g.gold_count, g.pred_count, pairs)
}

/// Edge lists of the connected components that have at least one edge.
fn components(g: &MatchGraph) -> Vec<Vec<Edge>> {
    let n = g.gold_count + g.pred_count;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for e in &g.edges {
        let a = find(&mut parent, e.gold);
        let b = find(&mut parent, g.gold_count + e.pred);
        if a != b {
            parent[a] = b;
        }
    }
    let mut by_root: std::collections::BTreeMap<usize, Vec<Edge>> = Default::default();
    for e in &g.edges {
        let root = find(&mut parent, e.gold);
        by_root.entry(root).or_default().push(*e);
    }
    by_root.into_values().collect()
}

/// Matching for a single component with edges sorted by `(gold, pred)`.
fn match_component(edges: &[Edge]) -> Vec<Edge> {
    let mut golds: Vec<usize> = edges.iter().map(|e| e.gold).collect();
    golds.dedup();
    let mut preds: Vec<usize> = edges.iter().map(|e| e.pred).collect();
    preds.sort_unstable();
    preds.dedup();

    // Each edge is worth more than any amount of similarity, so the optimum is
    // maximum-cardinality first.
    let card_unit = (golds.len().min(preds.len()) as i64 + 1) * SIM_SCALE as i64;
    let weight = |e: &Edge| card_unit + (e.similarity * SIM_SCALE).round() as i64;

    let gi = |gold: usize| golds.binary_search(&gold).unwrap();
    let pj = |pred: usize| preds.binary_search(&pred).unwrap();
    let mut table = vec![vec![None; preds.len()]; golds.len()];
    for e in edges {
        table[gi(e.gold)][pj(e.pred)] = Some(weight(e));
    }

    let (optimum, mut current) = max_weight_assignment(&table);
    let mut gold_done = vec![false; golds.len()];
    let mut pred_used = vec![false; preds.len()];
    let mut fixed_weight = 0i64;
    let mut chosen = Vec::new();

    for r in 0..golds.len() {
        let mut picked = None;
        for c in 0..preds.len() {
            let Some(w) = table[r][c] else { continue };
            if pred_used[c] {
                continue;
            }
            if current[r] == Some(c) {
                picked = Some(c);
                break;
            }
            // Does forcing (r, c) still reach the optimum?
            let mut reduced = table.clone();
            for (rr, row) in reduced.iter_mut().enumerate() {
                for (cc, cell) in row.iter_mut().enumerate() {
                    if rr == r || cc == c || gold_done[rr] || pred_used[cc] {
                        *cell = None;
                    }
                }
            }
            let (rest, assignment) = max_weight_assignment(&reduced);
            if fixed_weight + w + rest == optimum {
                current = assignment;
                current[r] = Some(c);
                picked = Some(c);
                break;
            }
        }
        gold_done[r] = true;
        if let Some(c) = picked {
            pred_used[c] = true;
            fixed_weight += table[r][c].unwrap();
            let edge = edges.iter().find(|e| e.gold == golds[r] && e.pred == preds[c]).copied().unwrap();
            chosen.push(edge);
        }
    }
    chosen
}

/// Maximum-weight (not necessarily perfect) assignment of rows to columns over
/// the present cells; weights must be positive. Returns the total weight and
/// each row's column.
fn max_weight_assignment(table: &[Vec<Option<i64>>]) -> (i64, Vec<Option<usize>>) {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return (0, vec![None; rows]);
    }
    // Square cost matrix; absent cells cost 0, i.e. "leave unmatched".
    let n = rows.max(cols);
    let cost = |r: usize, c: usize| -> i64 {
        if r < rows && c < cols {
            table[r][c].map_or(0, |w| -w)
        } else {
            0
        }
    };

    // Shortest augmenting path Hungarian method, 1-based with sentinel 0.
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![None; rows];
    let mut total = 0;
    for j in 1..=n {
        let (r, c) = (p[j] - 1, j - 1);
        if r < rows && c < cols {
            if let Some(w) = table[r][c] {
                assignment[r] = Some(c);
                total += w;
            }
        }
    }
    (total, assignment)
}
