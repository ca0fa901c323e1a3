//! Summary evaluation metrics implemented from their definitions.
//!
//! All metrics work on lowercased token sequences from the shared
//! word/punctuation tokenizer. Conventions:
//!
//! * ROUGE-N: clipped n-gram overlap; ROUGE-L: LCS with balanced F (β = 1).
//! * BLEU: clipped n-gram precisions up to order 4, geometric mean, brevity
//!   penalty against the closest reference length, no smoothing. Orders the
//!   candidate is too short to contain are left out of the mean.
//! * METEOR: exact unigram matches only, `Fmean = 10PR / (R + 9P)`,
//!   `penalty = 0.5 · (chunks / m)³`.
//! * BERTScore: greedy cosine matching of token embeddings without baseline
//!   rescaling.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingVector, TokenEmbedder};
use crate::error::{Error, Result};
use crate::tokenize::normalize_tokens;

/// Lowercased tokens; no token is empty.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn from_text(text: &str) -> Self {
        Self(normalize_tokens(text))
    }

    /// Pre-tokenized input; empty tokens are dropped.
    pub fn from_tokens<S: AsRef<str>>(tokens: impl IntoIterator<Item = S>) -> Self {
        Self(
            tokens
                .into_iter()
                .map(|t| t.as_ref().to_string())
                .filter(|t| !t.is_empty())
                .collect(),
        )
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self { precision, recall, f1 }
    }

    fn from_counts(overlap: usize, cand: usize, reference: usize) -> Self {
        let p = if cand == 0 { 0.0 } else { overlap as f64 / cand as f64 };
        let r = if reference == 0 {
            0.0
        } else {
            overlap as f64 / reference as f64
        };
        Self::new(p, r)
    }
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut m = HashMap::new();
    if n == 0 || tokens.len() < n {
        return m;
    }
    for w in tokens.windows(n) {
        *m.entry(w).or_insert(0) += 1;
    }
    m
}

pub fn rouge_n(candidate: &TokenSequence, reference: &TokenSequence, n: usize) -> Prf {
    let c = ngram_counts(&candidate.0, n);
    let r = ngram_counts(&reference.0, n);
    let overlap: usize = c.iter().map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0))).sum();
    Prf::from_counts(overlap, c.values().sum(), r.values().sum())
}

/// Longest common subsequence length, O(|a|·|b|) time, O(|b|) memory.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l(candidate: &TokenSequence, reference: &TokenSequence) -> Prf {
    Prf::from_counts(lcs_len(&candidate.0, &reference.0), candidate.len(), reference.len())
}

/// Sufficient statistics for BLEU, summable over a corpus.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BleuStats {
    pub matches: Vec<usize>,
    pub totals: Vec<usize>,
    pub candidate_len: usize,
    pub reference_len: usize,
}

impl BleuStats {
    pub fn compute(candidate: &TokenSequence, references: &[TokenSequence], max_n: usize) -> Self {
        let mut matches = vec![0; max_n];
        let mut totals = vec![0; max_n];
        for n in 1..=max_n {
            let c = ngram_counts(&candidate.0, n);
            let mut max_ref: HashMap<&[String], usize> = HashMap::new();
            for r in references {
                for (g, k) in ngram_counts(&r.0, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(k);
                }
            }
            matches[n - 1] = c
                .iter()
                .map(|(g, &k)| k.min(max_ref.get(g).copied().unwrap_or(0)))
                .sum();
            totals[n - 1] = c.values().sum();
        }
        let c_len = candidate.len();
        // closest reference length, shorter wins ties
        let reference_len = references
            .iter()
            .map(TokenSequence::len)
            .min_by_key(|&r| (r.abs_diff(c_len), r))
            .unwrap_or(0);
        Self {
            matches,
            totals,
            candidate_len: c_len,
            reference_len,
        }
    }

    pub fn merge(&mut self, other: &BleuStats) {
        if self.matches.len() < other.matches.len() {
            self.matches.resize(other.matches.len(), 0);
            self.totals.resize(other.totals.len(), 0);
        }
        for (i, (&m, &t)) in other.matches.iter().zip(&other.totals).enumerate() {
            self.matches[i] += m;
            self.totals[i] += t;
        }
        self.candidate_len += other.candidate_len;
        self.reference_len += other.reference_len;
    }

    pub fn brevity_penalty(&self) -> f64 {
        if self.candidate_len == 0 {
            return 0.0;
        }
        let (c, r) = (self.candidate_len as f64, self.reference_len as f64);
        (1.0 - r / c).exp().min(1.0)
    }

    pub fn score(&self) -> f64 {
        if self.candidate_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        let mut orders = 0;
        for (&m, &t) in self.matches.iter().zip(&self.totals) {
            if t == 0 {
                continue;
            }
            if m == 0 {
                return 0.0;
            }
            log_sum += (m as f64 / t as f64).ln();
            orders += 1;
        }
        if orders == 0 {
            return 0.0;
        }
        self.brevity_penalty() * (log_sum / orders as f64).exp()
    }
}

pub const BLEU_MAX_N: usize = 4;

pub fn bleu(candidate: &TokenSequence, references: &[TokenSequence], max_n: usize) -> f64 {
    BleuStats::compute(candidate, references, max_n.max(1)).score()
}

/// Corpus BLEU: statistics summed over all pairs before combining.
pub fn corpus_bleu(pairs: &[(TokenSequence, Vec<TokenSequence>)], max_n: usize) -> f64 {
    let mut total = BleuStats::default();
    for (c, refs) in pairs {
        total.merge(&BleuStats::compute(c, refs, max_n.max(1)));
    }
    total.score()
}

/// Above this many candidate alignments METEOR falls back to greedy
/// longest-run-first alignment.
const METEOR_EXACT_LIMIT: u64 = 50_000;

/// Number of chunks in an alignment given as (candidate pos, reference pos)
/// pairs sorted by candidate position.
pub fn count_chunks(alignment: &[(usize, usize)]) -> usize {
    if alignment.is_empty() {
        return 0;
    }
    1 + alignment
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}

/// Maximum exact-match alignment with the fewest chunks. Exhaustive when the
/// number of maximal alignments is small, otherwise greedy longest common
/// run first.
pub fn meteor_alignment(candidate: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let mut cand_pos: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut ref_pos: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, t) in candidate.iter().enumerate() {
        cand_pos.entry(t).or_default().push(i);
    }
    for (j, t) in reference.iter().enumerate() {
        ref_pos.entry(t).or_default().push(j);
    }
    let mut types: Vec<(&Vec<usize>, &Vec<usize>)> = cand_pos
        .iter()
        .filter_map(|(t, c)| ref_pos.get(t).map(|r| (c, r)))
        .collect();
    types.sort();

    let mut space: u64 = 1;
    for (c, r) in &types {
        let (big, small) = if c.len() >= r.len() {
            (c.len(), r.len())
        } else {
            (r.len(), c.len())
        };
        for k in 0..small {
            space = space.saturating_mul((big - k) as u64);
        }
    }
    if space <= METEOR_EXACT_LIMIT {
        exact_alignment(&types)
    } else {
        greedy_alignment(candidate, reference)
    }
}

fn exact_alignment(types: &[(&Vec<usize>, &Vec<usize>)]) -> Vec<(usize, usize)> {
    fn injections(from: &[usize], to: &[usize], used: &mut Vec<bool>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == from.len() {
            out.push(cur.clone());
            return;
        }
        for k in 0..to.len() {
            if !used[k] {
                used[k] = true;
                cur.push(to[k]);
                injections(from, to, used, cur, out);
                cur.pop();
                used[k] = false;
            }
        }
    }
    // per word type, every maximal pairing of its occurrences
    let options: Vec<Vec<Vec<(usize, usize)>>> = types
        .iter()
        .map(|(c, r)| {
            let swap = c.len() > r.len();
            let (from, to) = if swap { (*r, *c) } else { (*c, *r) };
            let mut maps = Vec::new();
            injections(from, to, &mut vec![false; to.len()], &mut Vec::new(), &mut maps);
            maps.into_iter()
                .map(|m| {
                    from.iter()
                        .zip(m)
                        .map(|(&a, b)| if swap { (b, a) } else { (a, b) })
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut best: Option<(usize, Vec<(usize, usize)>)> = None;
    let mut choice = vec![0usize; options.len()];
    loop {
        let mut al: Vec<(usize, usize)> = options
            .iter()
            .zip(&choice)
            .flat_map(|(o, &k)| o[k].iter().copied())
            .collect();
        al.sort_unstable();
        let ch = count_chunks(&al);
        if best.as_ref().is_none_or(|(b, _)| ch < *b) {
            best = Some((ch, al));
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == choice.len() {
                return best.map(|(_, a)| a).unwrap_or_default();
            }
            choice[i] += 1;
            if choice[i] < options[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

fn greedy_alignment(candidate: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let mut used_c = vec![false; candidate.len()];
    let mut used_r = vec![false; reference.len()];
    let mut al = Vec::new();
    loop {
        // longest run of free, equal tokens; earliest position wins ties
        let (mut best_len, mut best_i, mut best_j) = (0, 0, 0);
        let mut prev = vec![0usize; reference.len() + 1];
        for i in 0..candidate.len() {
            let mut cur = vec![0usize; reference.len() + 1];
            for j in 0..reference.len() {
                if !used_c[i] && !used_r[j] && candidate[i] == reference[j] {
                    cur[j + 1] = prev[j] + 1;
                    if cur[j + 1] > best_len {
                        best_len = cur[j + 1];
                        best_i = i + 1 - best_len;
                        best_j = j + 1 - best_len;
                    }
                }
            }
            prev = cur;
        }
        if best_len == 0 {
            break;
        }
        for k in 0..best_len {
            used_c[best_i + k] = true;
            used_r[best_j + k] = true;
            al.push((best_i + k, best_j + k));
        }
    }
    al.sort_unstable();
    al
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeteorParts {
    pub matches: usize,
    pub chunks: usize,
    pub precision: f64,
    pub recall: f64,
    pub fmean: f64,
    pub penalty: f64,
    pub score: f64,
}

pub fn meteor_from_counts(matches: usize, chunks: usize, cand_len: usize, ref_len: usize) -> MeteorParts {
    if matches == 0 {
        return MeteorParts {
            matches,
            chunks,
            precision: 0.0,
            recall: 0.0,
            fmean: 0.0,
            penalty: 0.0,
            score: 0.0,
        };
    }
    let m = matches as f64;
    let p = m / cand_len as f64;
    let r = m / ref_len as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / m).powi(3);
    MeteorParts {
        matches,
        chunks,
        precision: p,
        recall: r,
        fmean,
        penalty,
        score: fmean * (1.0 - penalty),
    }
}

pub fn meteor_detail(candidate: &TokenSequence, reference: &TokenSequence) -> MeteorParts {
    let al = meteor_alignment(&candidate.0, &reference.0);
    meteor_from_counts(al.len(), count_chunks(&al), candidate.len(), reference.len())
}

pub fn meteor(candidate: &TokenSequence, reference: &TokenSequence) -> f64 {
    meteor_detail(candidate, reference).score
}

/// Greedy-matching BERTScore over token embeddings.
pub fn bert_score(candidate: &TokenSequence, reference: &TokenSequence, embedder: &dyn TokenEmbedder) -> Result<Prf> {
    if candidate.is_empty() || reference.is_empty() {
        return Ok(Prf::default());
    }
    let c = embedder.embed_tokens(&candidate.0)?;
    let r = embedder.embed_tokens(&reference.0)?;
    if c.len() != candidate.len() || r.len() != reference.len() {
        return Err(Error::ProviderFailure(
            "token embedder returned the wrong number of vectors".into(),
        ));
    }
    if let Some(v) = c.iter().chain(&r).find(|v| v.dim() != c[0].dim()) {
        return Err(Error::DimensionMismatch {
            expected: c[0].dim(),
            actual: v.dim(),
        });
    }
    let c: Vec<EmbeddingVector> = c.iter().map(EmbeddingVector::normalized).collect();
    let r: Vec<EmbeddingVector> = r.iter().map(EmbeddingVector::normalized).collect();
    let sim: Vec<Vec<f64>> = c
        .iter()
        .map(|cv| r.iter().map(|rv| cv.dot(rv).clamp(-1.0, 1.0)).collect())
        .collect();
    let precision = sim
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / c.len() as f64;
    let recall = (0..r.len())
        .map(|j| sim.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / r.len() as f64;
    Ok(Prf::new(precision, recall))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rouge1: Prf,
    pub rouge2: Prf,
    pub rouge_l: Prf,
    pub bleu: f64,
    pub meteor: f64,
    pub bertscore: Option<Prf>,
    pub candidate_length: usize,
    /// Kept so corpus-level BLEU can be computed from stored reports.
    pub bleu_stats: BleuStats,
}

#[derive(Clone, Copy, Default)]
pub struct EvalOptions<'a> {
    /// Token embedder for BERTScore; `None` skips it.
    pub bertscore: Option<&'a dyn TokenEmbedder>,
}

pub fn evaluate_pair(candidate: &str, reference: &str, options: &EvalOptions<'_>) -> Result<EvalReport> {
    let r = TokenSequence::from_text(reference);
    if r.is_empty() {
        return Err(Error::EmptyReference);
    }
    let c = TokenSequence::from_text(candidate);
    let stats = BleuStats::compute(&c, std::slice::from_ref(&r), BLEU_MAX_N);
    Ok(EvalReport {
        rouge1: rouge_n(&c, &r, 1),
        rouge2: rouge_n(&c, &r, 2),
        rouge_l: rouge_l(&c, &r),
        bleu: stats.score(),
        meteor: meteor(&c, &r),
        bertscore: options.bertscore.map(|e| bert_score(&c, &r, e)).transpose()?,
        candidate_length: c.len(),
        bleu_stats: stats,
    })
}

/// Means over pairs, plus corpus-level BLEU.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AggregateReport {
    pub pairs: usize,
    pub avg_length: f64,
    pub rouge1: Prf,
    pub rouge2: Prf,
    pub rouge_l: Prf,
    pub bleu: f64,
    pub corpus_bleu: f64,
    pub meteor: f64,
    pub bertscore: Option<Prf>,
}

fn mean_prf<'a>(xs: impl Iterator<Item = &'a Prf>, n: f64) -> Prf {
    let (p, r, f) = xs.fold((0.0, 0.0, 0.0), |(p, r, f), x| {
        (p + x.precision, r + x.recall, f + x.f1)
    });
    Prf {
        precision: p / n,
        recall: r / n,
        f1: f / n,
    }
}

pub fn aggregate(reports: &[EvalReport]) -> AggregateReport {
    if reports.is_empty() {
        return AggregateReport::default();
    }
    let n = reports.len() as f64;
    let mut stats = BleuStats::default();
    for r in reports {
        stats.merge(&r.bleu_stats);
    }
    let bert: Vec<&Prf> = reports.iter().filter_map(|r| r.bertscore.as_ref()).collect();
    AggregateReport {
        pairs: reports.len(),
        avg_length: reports.iter().map(|r| r.candidate_length as f64).sum::<f64>() / n,
        rouge1: mean_prf(reports.iter().map(|r| &r.rouge1), n),
        rouge2: mean_prf(reports.iter().map(|r| &r.rouge2), n),
        rouge_l: mean_prf(reports.iter().map(|r| &r.rouge_l), n),
        bleu: reports.iter().map(|r| r.bleu).sum::<f64>() / n,
        corpus_bleu: stats.score(),
        meteor: reports.iter().map(|r| r.meteor).sum::<f64>() / n,
        bertscore: (bert.len() == reports.len()).then(|| mean_prf(bert.into_iter(), n)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{EmbeddingVector, HashedTokenEmbedder};

    fn seq(s: &str) -> TokenSequence {
        TokenSequence::from_text(s)
    }

    #[test]
    fn rouge1_cat_mat() {
        let p = rouge_n(&seq("the cat sat on the mat"), &seq("the cat is on the mat"), 1);
        assert!((p.precision - 5.0 / 6.0).abs() < 1e-12);
        assert!((p.recall - 5.0 / 6.0).abs() < 1e-12);
        assert!((p.f1 - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn rouge_identity_and_disjoint() {
        let a = seq("legal appeal dismissed");
        assert_eq!(rouge_n(&a, &a, 2).f1, 1.0);
        assert_eq!(rouge_n(&a, &seq("zebra yak"), 1).f1, 0.0);
        assert_eq!(rouge_n(&seq("one"), &seq("one"), 2).f1, 0.0);
    }

    #[test]
    fn rouge_l_swap() {
        let p = rouge_l(&seq("a b c d"), &seq("a c b d"));
        assert!((p.f1 - 0.75).abs() < 1e-12);
        assert_eq!(rouge_l(&TokenSequence::default(), &seq("a")).f1, 0.0);
        assert_eq!(rouge_l(&seq("x y"), &seq("x y")).f1, 1.0);
    }

    #[test]
    fn bleu_clipping_to_zero() {
        let s = BleuStats::compute(&seq("the the the the"), &[seq("the cat")], 4);
        assert_eq!(s.matches[0], 1);
        assert_eq!(s.totals[0], 4);
        assert_eq!(s.matches[1], 0);
        assert_eq!(s.score(), 0.0);
    }

    #[test]
    fn bleu_identity_and_brevity() {
        let a = seq("the court dismissed the appeal with costs");
        assert!((bleu(&a, std::slice::from_ref(&a), 4) - 1.0).abs() < 1e-12);
        assert!((bleu(&seq("x"), &[seq("x")], 4) - 1.0).abs() < 1e-12);
        // candidate is the first half of the reference: every precision is 1
        let r = seq("a b c d e f g h");
        let c = seq("a b c d");
        assert!((bleu(&c, &[r], 4) - (-1f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn bleu_closest_reference_length() {
        let s = BleuStats::compute(&seq("a b c"), &[seq("a b c d e f g"), seq("a b")], 1);
        assert_eq!(s.reference_len, 2);
        let s = BleuStats::compute(&seq("a b c"), &[seq("a b c d"), seq("a b")], 1);
        assert_eq!(s.reference_len, 2);
    }

    #[test]
    fn meteor_cases() {
        assert_eq!(meteor(&seq("a b"), &seq("c d")), 0.0);
        let id = meteor_detail(&seq("x y z"), &seq("x y z"));
        assert_eq!((id.matches, id.chunks), (3, 1));
        assert!((id.score - (1.0 - 1.0 / 54.0)).abs() < 1e-12);
        let sw = meteor_detail(&seq("b a"), &seq("a b"));
        assert_eq!((sw.matches, sw.chunks), (2, 2));
        assert!((sw.score - 0.5).abs() < 1e-12);
    }

    #[test]
    fn meteor_prefers_fewer_chunks() {
        // aligning the second "a" keeps "a b" contiguous
        let d = meteor_detail(&seq("a b"), &seq("a x a b"));
        assert_eq!((d.matches, d.chunks), (2, 1));
    }

    #[test]
    fn greedy_alignment_maximizes_matches() {
        let c: Vec<String> = "a b c a b c d".split(' ').map(String::from).collect();
        let r: Vec<String> = "d c b a c b a".split(' ').map(String::from).collect();
        assert_eq!(greedy_alignment(&c, &r).len(), 7);
    }

    struct Fixed(HashMap<String, EmbeddingVector>);

    impl TokenEmbedder for Fixed {
        fn embed_tokens(&self, tokens: &[String]) -> Result<Vec<EmbeddingVector>> {
            Ok(tokens.iter().map(|t| self.0[t].clone()).collect())
        }
    }

    #[test]
    fn bertscore_half_recall() {
        let mut m = HashMap::new();
        m.insert("u".to_string(), EmbeddingVector::new(vec![1.0, 0.0]).unwrap());
        m.insert("v".to_string(), EmbeddingVector::new(vec![0.0, 1.0]).unwrap());
        let e = Fixed(m);
        let p = bert_score(&seq("u"), &seq("u v"), &e).unwrap();
        assert!((p.recall - 0.5).abs() < 1e-12);
        assert!((p.precision - 1.0).abs() < 1e-12);
        assert!((p.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(bert_score(&seq("u"), &seq("v"), &e).unwrap().f1, 0.0);
    }

    #[test]
    fn bertscore_identity() {
        let a = seq("The appeal is allowed, the order set aside.");
        let p = bert_score(&a, &a, &HashedTokenEmbedder::default()).unwrap();
        assert!((p.f1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_identity() {
        let text = "The appeal is dismissed with costs.";
        let r = evaluate_pair(
            text,
            text,
            &EvalOptions {
                bertscore: Some(&HashedTokenEmbedder::default()),
            },
        )
        .unwrap();
        assert_eq!(r.rouge1.f1, 1.0);
        assert_eq!(r.rouge2.f1, 1.0);
        assert_eq!(r.rouge_l.f1, 1.0);
        assert!((r.bleu - 1.0).abs() < 1e-12);
        // 7 tokens in one chunk
        assert!((r.meteor - (1.0 - 0.5 / 343.0)).abs() < 1e-12);
        assert!((r.bertscore.unwrap().f1 - 1.0).abs() < 1e-12);
        assert!(matches!(
            evaluate_pair("x", " ", &EvalOptions::default()),
            Err(Error::EmptyReference)
        ));
    }

    #[test]
    fn aggregate_means() {
        let mut a = evaluate_pair("a b", "a b", &EvalOptions::default()).unwrap();
        let mut b = a.clone();
        a.rouge1.f1 = 0.4;
        b.rouge1.f1 = 0.6;
        let agg = aggregate(&[a, b]);
        assert!((agg.rouge1.f1 - 0.5).abs() < 1e-12);
        assert!(agg.bertscore.is_none());
    }
}
