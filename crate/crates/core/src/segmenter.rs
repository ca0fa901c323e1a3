//! C99 linear text segmentation.
//!
//! Sentences are embedded, compared pairwise by cosine similarity, and the
//! similarity matrix is replaced by local ranks: every cell becomes the
//! fraction of its neighbours (inside a `mask × mask` window, clipped at the
//! borders) holding a strictly lower value. Divisive clustering then splits
//! `[0, n)` greedily, each step inserting the boundary that maximizes the
//! inside density
//!
//! ```text
//! D = Σ_k rank_mass(segment_k) / Σ_k len(segment_k)²
//! ```
//!
//! Without a target count the number of segments is chosen from the density
//! gains `δD(k) = D(k) − D(k−1)`: the largest `k` whose gain exceeds
//! `mean + c·stddev` (c = 1.2), or a single segment when none does.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::CaseDocument;
use crate::embedding::{cosine, embed_sentences, EmbeddingProvider, EmbeddingVector};
use crate::error::{Error, Result};

pub const DEFAULT_MASK: usize = 11;
pub const DEFAULT_THRESHOLD_C: f64 = 1.2;

/// Relative tolerance under which two candidate densities count as equal.
const TIE_EPS: f64 = 1e-12;

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::NonSquareMatrix {
                rows: n,
                cols: bad.len(),
            });
        }
        Ok(Self {
            n,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// Pairwise cosine similarities between sentence vectors.
pub fn similarity_matrix(vectors: &[EmbeddingVector]) -> Result<SquareMatrix> {
    let n = vectors.len();
    let mut m = SquareMatrix::from_fn(n, |_, _| 0.0);
    for i in 0..n {
        for j in i..n {
            let s = cosine(&vectors[i], &vectors[j])?;
            m.data[i * n + j] = s;
            m.data[j * n + i] = s;
        }
    }
    Ok(m)
}

/// Local rank transform. Entries are in [0, 1]; a cell without neighbours
/// (the 1×1 case) gets 0.
pub fn rank_matrix(sim: &SquareMatrix, mask: usize) -> Result<SquareMatrix> {
    if mask < 3 || mask.is_multiple_of(2) {
        return Err(Error::InvalidMaskSize(mask));
    }
    let n = sim.size();
    let r = mask / 2;
    Ok(SquareMatrix::from_fn(n, |i, j| {
        let v = sim.get(i, j);
        let (mut lower, mut total) = (0u32, 0u32);
        for a in i.saturating_sub(r)..(i + r + 1).min(n) {
            for b in j.saturating_sub(r)..(j + r + 1).min(n) {
                if a == i && b == j {
                    continue;
                }
                total += 1;
                if sim.get(a, b) < v {
                    lower += 1;
                }
            }
        }
        if total == 0 {
            0.0
        } else {
            f64::from(lower) / f64::from(total)
        }
    }))
}

/// A partition of `[0, n)` into contiguous non-empty spans. `boundaries`
/// holds the start index of every segment except the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    pub doc_id: String,
    pub n: usize,
    pub boundaries: Vec<usize>,
}

impl Segmentation {
    pub fn new(doc_id: impl Into<String>, n: usize, mut boundaries: Vec<usize>) -> Result<Self> {
        boundaries.sort_unstable();
        boundaries.dedup();
        if let Some(&b) = boundaries.iter().find(|&&b| b == 0 || b >= n) {
            return Err(Error::SpanOutOfRange {
                start: b,
                end: b,
                len: n,
            });
        }
        Ok(Self {
            doc_id: doc_id.into(),
            n,
            boundaries,
        })
    }

    pub fn single(doc_id: impl Into<String>, n: usize) -> Self {
        Self {
            doc_id: doc_id.into(),
            n,
            boundaries: Vec::new(),
        }
    }

    pub fn segments(&self) -> Vec<Range<usize>> {
        let mut starts = vec![0];
        starts.extend(&self.boundaries);
        let mut ends = self.boundaries.clone();
        ends.push(self.n);
        starts.into_iter().zip(ends).map(|(s, e)| s..e).collect()
    }

    pub fn len(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn to_record(&self) -> SegmentationRecord {
        SegmentationRecord {
            case_id: self.doc_id.clone(),
            boundaries: self.boundaries.clone(),
        }
    }
}

/// Line format of `argpipe segment` output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationRecord {
    pub case_id: String,
    pub boundaries: Vec<usize>,
}

/// Greedy split history: `boundaries[k]` is the boundary inserted at step
/// `k + 1`, `densities[k]` the inside density with `k + 1` segments.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitTrajectory {
    pub n: usize,
    pub boundaries: Vec<usize>,
    pub densities: Vec<f64>,
}

struct PrefixSums {
    n: usize,
    p: Vec<f64>,
}

impl PrefixSums {
    fn new(m: &SquareMatrix) -> Self {
        let n = m.size();
        let w = n + 1;
        let mut p = vec![0.0; w * w];
        for i in 0..n {
            for j in 0..n {
                p[(i + 1) * w + j + 1] = m.get(i, j) + p[i * w + j + 1] + p[(i + 1) * w + j] - p[i * w + j];
            }
        }
        Self { n, p }
    }

    /// Rank mass of the diagonal block `[a, b) × [a, b)`.
    fn block(&self, a: usize, b: usize) -> f64 {
        let w = self.n + 1;
        self.p[b * w + b] - self.p[a * w + b] - self.p[b * w + a] + self.p[a * w + a]
    }
}

fn area(a: usize, b: usize) -> f64 {
    let l = (b - a) as f64;
    l * l
}

/// Runs greedy divisive clustering until `max_segments` segments exist (or
/// no segment can be split further).
pub fn c99_trajectory(rank: &SquareMatrix, max_segments: usize) -> SplitTrajectory {
    let n = rank.size();
    let sums = PrefixSums::new(rank);
    let mut spans: Vec<(usize, usize)> = vec![(0, n)];
    let mut mass = sums.block(0, n);
    let mut total_area = area(0, n);
    let density = |m: f64, a: f64| if a > 0.0 { m / a } else { 0.0 };
    let mut traj = SplitTrajectory {
        n,
        boundaries: Vec::new(),
        densities: vec![density(mass, total_area)],
    };
    while spans.len() < max_segments.min(n) {
        // (density, cut, span index, new area)
        let mut best: Option<(f64, usize, usize, f64)> = None;
        for (k, &(a, b)) in spans.iter().enumerate() {
            let base_mass = mass - sums.block(a, b);
            let base_area = total_area - area(a, b);
            for c in a + 1..b {
                let m = base_mass + sums.block(a, c) + sums.block(c, b);
                let ar = base_area + area(a, c) + area(c, b);
                let d = density(m, ar);
                let better = match best {
                    None => true,
                    Some((bd, bc, ..)) => {
                        let tie = (d - bd).abs() <= TIE_EPS * bd.abs().max(1.0);
                        if tie {
                            c < bc
                        } else {
                            d > bd
                        }
                    }
                };
                if better {
                    best = Some((d, c, k, ar));
                }
            }
        }
        let Some((_, c, k, ar)) = best else { break };
        let (a, b) = spans[k];
        spans[k] = (a, c);
        spans.insert(k + 1, (c, b));
        // recompute from blocks so rounding does not drift across steps
        mass = spans.iter().map(|&(a, b)| sums.block(a, b)).sum();
        total_area = ar;
        traj.boundaries.push(c);
        traj.densities.push(density(mass, total_area));
    }
    traj
}

/// Number of segments picked by the gain threshold.
pub fn auto_segment_count(densities: &[f64], c: f64) -> usize {
    if densities.len() < 2 {
        return 1;
    }
    let gains: Vec<f64> = densities.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = gains.iter().sum::<f64>() / gains.len() as f64;
    let var = gains.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / gains.len() as f64;
    let threshold = mean + c * var.sqrt();
    // gains[i] is δD(i + 2)
    gains.iter().rposition(|&g| g > threshold).map_or(1, |i| i + 2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    pub mask: usize,
    /// Fixed segment count; `None` selects automatic termination.
    pub target_segments: Option<usize>,
    /// Upper bound on segments explored by automatic termination.
    pub max_segments: Option<usize>,
    pub threshold_c: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            mask: DEFAULT_MASK,
            target_segments: None,
            max_segments: None,
            threshold_c: DEFAULT_THRESHOLD_C,
        }
    }
}

/// Segments a rank matrix. With `target` the greedy process stops at that
/// many segments; otherwise the count is chosen automatically.
pub fn c99_segment(rank: &SquareMatrix, target: Option<usize>) -> Result<Segmentation> {
    c99_segment_with(
        rank,
        &SegmentParams {
            target_segments: target,
            ..SegmentParams::default()
        },
    )
}

pub fn c99_segment_with(rank: &SquareMatrix, params: &SegmentParams) -> Result<Segmentation> {
    let n = rank.size();
    if let Some(t) = params.target_segments {
        if t == 0 || t > n {
            return Err(Error::InvalidTargetCount {
                target: t,
                sentences: n,
            });
        }
        let traj = c99_trajectory(rank, t);
        return Segmentation::new("", n, traj.boundaries);
    }
    let traj = c99_trajectory(rank, params.max_segments.unwrap_or(n).max(1));
    let k = auto_segment_count(&traj.densities, params.threshold_c);
    Segmentation::new("", n, traj.boundaries[..k - 1].to_vec())
}

/// Embed → similarity → rank → divisive clustering.
pub fn segment_document(
    doc: &CaseDocument,
    provider: &dyn EmbeddingProvider,
    params: &SegmentParams,
) -> Result<Segmentation> {
    let texts: Vec<&str> = doc.sentences.iter().map(|s| s.text.as_str()).collect();
    if texts.len() == 1 {
        return Ok(Segmentation::single(&doc.case_id, 1));
    }
    let vectors = embed_sentences(provider, &texts)?;
    let sim = similarity_matrix(&vectors)?;
    let rank = rank_matrix(&sim, params.mask)?;
    let mut seg = c99_segment_with(&rank, params)?;
    seg.doc_id = doc.case_id.clone();
    Ok(seg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block_diag(n: usize, split: usize) -> SquareMatrix {
        SquareMatrix::from_fn(n, |i, j| if (i < split) == (j < split) { 1.0 } else { 0.0 })
    }

    #[test]
    fn rank_of_single_cell_is_zero() {
        let m = SquareMatrix::from_rows(vec![vec![0.7]]).unwrap();
        assert_eq!(rank_matrix(&m, 11).unwrap().get(0, 0), 0.0);
    }

    #[test]
    fn rank_strict_maximum() {
        // (0,1) exceeds every other cell of its clipped 2×3 window.
        let m = SquareMatrix::from_rows(vec![vec![0.5, 0.9, 0.1], vec![0.2, 0.4, 0.3], vec![0.1, 0.3, 0.6]]).unwrap();
        assert_eq!(rank_matrix(&m, 3).unwrap().get(0, 1), 1.0);
    }

    #[test]
    fn rank_symmetric_maximum_ties_with_its_mirror() {
        // In a symmetric matrix (1,0) equals (0,1), so only 4 of 5 neighbours are lower.
        let m = SquareMatrix::from_rows(vec![vec![0.5, 0.9, 0.1], vec![0.9, 0.4, 0.3], vec![0.1, 0.3, 0.6]]).unwrap();
        assert!((rank_matrix(&m, 3).unwrap().get(0, 1) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn rank_of_constant_matrix_is_zero() {
        let m = SquareMatrix::from_fn(6, |_, _| 0.3);
        let r = rank_matrix(&m, 3).unwrap();
        assert!((0..6).all(|i| (0..6).all(|j| r.get(i, j) == 0.0)));
    }

    #[test]
    fn rank_rejects_even_mask() {
        let m = SquareMatrix::from_fn(2, |_, _| 0.0);
        assert!(matches!(rank_matrix(&m, 4), Err(Error::InvalidMaskSize(4))));
        assert!(matches!(rank_matrix(&m, 1), Err(Error::InvalidMaskSize(1))));
    }

    #[test]
    fn non_square_rejected() {
        assert!(matches!(
            SquareMatrix::from_rows(vec![vec![1.0, 2.0], vec![1.0]]),
            Err(Error::NonSquareMatrix { .. })
        ));
    }

    #[test]
    fn target_one_is_whole_range() {
        let seg = c99_segment(&block_diag(10, 5), Some(1)).unwrap();
        assert_eq!(seg.segments(), vec![0..10]);
    }

    #[test]
    fn target_n_is_singletons() {
        let seg = c99_segment(&block_diag(6, 3), Some(6)).unwrap();
        assert_eq!(seg.boundaries, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn invalid_target() {
        assert!(matches!(
            c99_segment(&block_diag(4, 2), Some(5)),
            Err(Error::InvalidTargetCount { .. })
        ));
        assert!(c99_segment(&block_diag(4, 2), Some(0)).is_err());
    }

    #[test]
    fn block_diagonal_split() {
        // Exhaustive oracle: score every one of the 9 candidate cuts directly.
        let m = block_diag(10, 5);
        let dens = |c: usize| {
            let mass = |a: usize, b: usize| -> f64 {
                (a..b)
                    .flat_map(|i| (a..b).map(move |j| (i, j)))
                    .map(|(i, j)| m.get(i, j))
                    .sum()
            };
            let sq = |a: usize, b: usize| ((b - a) * (b - a)) as f64;
            (mass(0, c) + mass(c, 10)) / (sq(0, c) + sq(c, 10))
        };
        let best = (1..10)
            .max_by(|&a, &b| dens(a).partial_cmp(&dens(b)).unwrap().then(b.cmp(&a)))
            .unwrap();
        assert_eq!(best, 5);
        let seg = c99_segment(&m, Some(2)).unwrap();
        assert_eq!(seg.boundaries, vec![5]);
    }

    #[test]
    fn ties_pick_smaller_index() {
        let m = SquareMatrix::from_fn(4, |_, _| 1.0);
        // every first cut gives the same density; the smallest index wins
        let traj = c99_trajectory(&m, 2);
        assert_eq!(traj.boundaries, vec![1]);
    }

    #[test]
    fn auto_count_threshold() {
        assert_eq!(auto_segment_count(&[0.5], 1.2), 1);
        // gains 0.4, 0.01, 0.01, 0.0: only the first clears mean + 1.2 sd
        assert_eq!(auto_segment_count(&[0.4, 0.8, 0.81, 0.82, 0.82], 1.2), 2);
        // flat gains: none exceeds the mean
        assert_eq!(auto_segment_count(&[0.1, 0.2, 0.3, 0.4], 1.2), 1);
    }

    #[test]
    fn one_sentence_document() {
        let doc = CaseDocument::new("d", [("Only one.".to_string(), None)], None).unwrap();
        let seg = segment_document(
            &doc,
            &crate::embedding::HashedBowProvider::default(),
            &SegmentParams::default(),
        )
        .unwrap();
        assert_eq!(seg.segments(), vec![0..1]);
    }

    #[test]
    fn segmentation_rejects_bad_boundaries() {
        assert!(Segmentation::new("d", 5, vec![0]).is_err());
        assert!(Segmentation::new("d", 5, vec![5]).is_err());
        assert_eq!(Segmentation::new("d", 5, vec![3, 1, 3]).unwrap().boundaries, vec![1, 3]);
    }
}
