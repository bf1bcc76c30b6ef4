//! Brute-force reference implementations used to check the library.

#![allow(dead_code)]

use std::collections::BTreeSet;

/// Gestalt matching-block total by exhaustive search of every start pair.
pub fn brute_matching_blocks(a: &[char], b: &[char]) -> usize {
    let mut best = (0usize, 0usize, 0usize);
    for i in 0..a.len() {
        for j in 0..b.len() {
            let mut k = 0;
            while i + k < a.len() && j + k < b.len() && a[i + k] == b[j + k] {
                k += 1;
            }
            // strict > keeps the earliest i, then earliest j
            if k > best.2 {
                best = (i, j, k);
            }
        }
    }
    let (i, j, k) = best;
    if k == 0 {
        return 0;
    }
    k + brute_matching_blocks(&a[..i], &b[..j]) + brute_matching_blocks(&a[i + k..], &b[j + k..])
}

pub fn brute_ratio(s: &str, t: &str) -> f64 {
    let a: Vec<char> = s.chars().collect();
    let b: Vec<char> = t.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (x, y) = if b < a { (&b, &a) } else { (&a, &b) };
    2.0 * brute_matching_blocks(x, y) as f64 / (a.len() + b.len()) as f64
}

fn grams(s: &str, n: usize) -> BTreeSet<String> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = BTreeSet::new();
    let mut i = 0;
    while i + n <= chars.len() {
        let mut g = String::new();
        for c in &chars[i..i + n] {
            g.push(*c);
        }
        out.insert(g);
        i += 1;
    }
    out
}

pub fn brute_jaccard(s: &str, t: &str, n: usize) -> f64 {
    let gs = grams(s, n);
    let gt = grams(t, n);
    let union: BTreeSet<&String> = gs.iter().chain(gt.iter()).collect();
    if union.is_empty() {
        return if s == t { 1.0 } else { 0.0 };
    }
    let inter = gs.iter().filter(|g| gt.contains(*g)).count();
    inter as f64 / union.len() as f64
}

/// Maximum cardinality of a one-to-one matching, by trying every injective
/// assignment of gold items to predictions (or to nothing).
pub fn brute_max_cardinality(gold: usize, pred: usize, edges: &[(usize, usize)]) -> usize {
    fn go(g: usize, gold: usize, used: &mut Vec<bool>, adj: &[Vec<usize>]) -> usize {
        if g == gold {
            return 0;
        }
        let mut best = go(g + 1, gold, used, adj);
        for &p in &adj[g] {
            if !used[p] {
                used[p] = true;
                best = best.max(1 + go(g + 1, gold, used, adj));
                used[p] = false;
            }
        }
        best
    }
    let mut adj = vec![Vec::new(); gold];
    for &(g, p) in edges {
        adj[g].push(p);
    }
    go(0, gold, &mut vec![false; pred], &adj)
}

/// Best `(cardinality, total weight)` over all one-to-one matchings, compared
/// lexicographically; weights are integers to keep ties exact.
pub fn brute_best_matching(gold: usize, pred: usize, edges: &[(usize, usize, i64)]) -> (usize, i64) {
    fn go(g: usize, gold: usize, used: &mut Vec<bool>, adj: &[Vec<(usize, i64)>]) -> (usize, i64) {
        if g == gold {
            return (0, 0);
        }
        let mut best = go(g + 1, gold, used, adj);
        for &(p, w) in &adj[g] {
            if !used[p] {
                used[p] = true;
                let (c, s) = go(g + 1, gold, used, adj);
                best = best.max((c + 1, s + w));
                used[p] = false;
            }
        }
        best
    }
    let mut adj = vec![Vec::new(); gold];
    for &(g, p, w) in edges {
        adj[g].push((p, w));
    }
    go(0, gold, &mut vec![false; pred], &adj)
}
