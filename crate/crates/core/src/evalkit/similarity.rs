//! String and numeric similarity metrics used to score extracted records.

use std::collections::HashSet;

use super::normalize::normalize_text;
use super::{EvalError, SimilarityWeights};

/// Gestalt (Ratcliff–Obershelp) ratio `2M / (|s| + |t|)`.
///
/// `M` is the total length of the matching blocks found by taking the longest
/// common substring and recursing on both remainders. Lengths are counted in
/// Unicode scalar values. Two empty strings score 1.
///
/// Ties between equally long common substrings go to the earliest start in the
/// first sequence, then in the second. The pair is put in lexicographic order
/// first so the score does not depend on argument order.
pub fn ratio_similarity(s: &str, t: &str) -> f64 {
    let a: Vec<char> = s.chars().collect();
    let b: Vec<char> = t.chars().collect();
    let total = a.len() + b.len();
    if total == 0 {
        return 1.0;
    }
    let m = if b < a { matching_chars(&b, &a) } else { matching_chars(&a, &b) };
    2.0 * m as f64 / total as f64
}

/// Total length of the Ratcliff–Obershelp matching blocks of `a` and `b`.
pub fn matching_chars(a: &[char], b: &[char]) -> usize {
    let mut total = 0;
    let mut pending = vec![(0, a.len(), 0, b.len())];
    while let Some((alo, ahi, blo, bhi)) = pending.pop() {
        let (i, j, k) = longest_match(a, alo, ahi, b, blo, bhi);
        if k == 0 {
            continue;
        }
        total += k;
        if alo < i && blo < j {
            pending.push((alo, i, blo, j));
        }
        if i + k < ahi && j + k < bhi {
            pending.push((i + k, ahi, j + k, bhi));
        }
    }
    total
}

/// Longest common substring of `a[alo..ahi]` and `b[blo..bhi]` as
/// `(start_a, start_b, len)`; earliest `start_a`, then earliest `start_b`.
fn longest_match(a: &[char], alo: usize, ahi: usize, b: &[char], blo: usize, bhi: usize) -> (usize, usize, usize) {
    let width = bhi - blo;
    let mut prev = vec![0usize; width + 1];
    let mut cur = vec![0usize; width + 1];
    let (mut best_i, mut best_j, mut best_k) = (alo, blo, 0);
    for i in alo..ahi {
        for j in blo..bhi {
            let col = j - blo + 1;
            if a[i] == b[j] {
                let k = prev[col - 1] + 1;
                cur[col] = k;
                if k > best_k {
                    best_i = i + 1 - k;
                    best_j = j + 1 - k;
                    best_k = k;
                }
            } else {
                cur[col] = 0;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    (best_i, best_j, best_k)
}

/// The set of adjacent `n`-character substrings of `s`.
pub fn char_ngrams(s: &str, n: usize) -> HashSet<Vec<char>> {
    let chars: Vec<char> = s.chars().collect();
    if n == 0 || chars.len() < n {
        return HashSet::new();
    }
    chars.windows(n).map(<[char]>::to_vec).collect()
}

/// Jaccard index of the character `n`-gram sets of `s` and `t` (`n` is 2 or 3).
///
/// When neither string is long enough to produce a gram the score is 1 for
/// equal strings and 0 otherwise.
pub fn ngram_jaccard(s: &str, t: &str, n: usize) -> Result<f64, EvalError> {
    if !(2..=3).contains(&n) {
        return Err(EvalError::GramSize(n));
    }
    let gs = char_ngrams(s, n);
    let gt = char_ngrams(t, n);
    if gs.is_empty() && gt.is_empty() {
        return Ok(if s == t { 1.0 } else { 0.0 });
    }
    let inter = gs.intersection(&gt).count();
    let union = gs.len() + gt.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// Weighted blend of the gestalt ratio and the bigram/trigram Jaccard scores,
/// computed on normalized text.
pub fn text_similarity(s: &str, t: &str, w: &SimilarityWeights) -> f64 {
    let s = normalize_text(s);
    let t = normalize_text(t);
    // Accumulated as a deficit from 1 so identical inputs score exactly 1.
    let mut deficit = 0.0;
    if w.ratio_w > 0.0 {
        deficit += w.ratio_w * (1.0 - ratio_similarity(&s, &t));
    }
    if w.bigram_w > 0.0 {
        deficit += w.bigram_w * (1.0 - ngram_jaccard(&s, &t, 2).expect("valid gram size"));
    }
    if w.trigram_w > 0.0 {
        deficit += w.trigram_w * (1.0 - ngram_jaccard(&s, &t, 3).expect("valid gram size"));
    }
    let score = 1.0 - deficit / (w.ratio_w + w.bigram_w + w.trigram_w);
    score.clamp(0.0, 1.0)
}

/// Symmetric relative closeness `1 - |a-b| / max(|a|,|b|)`, floored at 0.
pub fn numeric_similarity(a: f64, b: f64) -> Result<f64, EvalError> {
    if !a.is_finite() || !b.is_finite() {
        return Err(EvalError::NonFinite);
    }
    if a == b {
        return Ok(1.0);
    }
    let scale = a.abs().max(b.abs());
    Ok((1.0 - (a - b).abs() / scale).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq(a: &str, b: &str) -> f64 {
        ratio_similarity(a, b)
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(eq("abcd", "abcd"), 1.0);
        assert_eq!(eq("abcd", ""), 0.0);
        assert_eq!(eq("abcd", "bcde"), 0.75);
        assert_eq!(eq("", ""), 1.0);
    }

    #[test]
    fn ratio_known_values() {
        // Values shared with other gestalt implementations.
        assert!((eq("alexandre", "aleksander") - (1.0 - 0.263158)).abs() < 1e-6);
        assert!((eq("pennsylvania", "pencilvaneya") - (1.0 - 0.333333)).abs() < 1e-6);
        assert!((eq("abandonned", "abandoned") - (1.0 - 0.052632)).abs() < 1e-6);
    }

    #[test]
    fn ratio_counts_scalar_values() {
        // 'é' is one scalar, two bytes.
        assert_eq!(eq("é", "é"), 1.0);
        assert_eq!(eq("éa", "é"), 2.0 * 1.0 / 3.0);
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(ngram_jaccard("abcd", "abcd", 2).unwrap(), 1.0);
        assert!((ngram_jaccard("night", "nacht", 2).unwrap() - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(ngram_jaccard("a", "b", 3).unwrap(), 0.0);
        assert_eq!(ngram_jaccard("ab", "ab", 3).unwrap(), 1.0);
        assert_eq!(ngram_jaccard("abc", "ab", 3).unwrap(), 0.0);
    }

    #[test]
    fn jaccard_rejects_other_sizes() {
        assert!(matches!(ngram_jaccard("abc", "abc", 4), Err(EvalError::GramSize(4))));
    }

    #[test]
    fn text_examples() {
        let eqw = SimilarityWeights::default();
        assert_eq!(text_similarity("MXene", "MXene", &eqw), 1.0);
        assert_eq!(text_similarity("x", "y", &eqw), 0.0);
        let ratio_only = SimilarityWeights::text_only(1.0, 0.0, 0.0).unwrap();
        assert_eq!(text_similarity("abcd", "bcde", &ratio_only), 0.75);
    }

    #[test]
    fn text_is_case_and_space_insensitive() {
        let w = SimilarityWeights::default();
        assert_eq!(text_similarity("Lead  Phthalocyanine", "lead phthalocyanine", &w), 1.0);
    }

    #[test]
    fn numeric_examples() {
        assert_eq!(numeric_similarity(5.0, 5.0).unwrap(), 1.0);
        assert_eq!(numeric_similarity(0.0, 3.0).unwrap(), 0.0);
        assert!((numeric_similarity(90.0, 100.0).unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(numeric_similarity(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(numeric_similarity(-5.0, 5.0).unwrap(), 0.0);
        assert!(matches!(numeric_similarity(f64::NAN, 1.0), Err(EvalError::NonFinite)));
        assert!(matches!(numeric_similarity(1.0, f64::INFINITY), Err(EvalError::NonFinite)));
    }
}
