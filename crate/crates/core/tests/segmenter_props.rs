mod common;

use argpipe::embedding::{EmbeddingVector, HashedBowProvider};
use argpipe::segmenter::{
    c99_segment, c99_trajectory, rank_matrix, segment_document, similarity_matrix, SegmentParams, Segmentation,
    SegmentationRecord, SquareMatrix,
};
use proptest::prelude::*;

/// Rank entry by scanning the whole matrix for cells inside the window.
fn rank_oracle(m: &SquareMatrix, mask: usize) -> Vec<f64> {
    let n = m.size();
    let r = (mask / 2) as isize;
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (mut lower, mut total) = (0, 0);
            for a in 0..n {
                for b in 0..n {
                    let (di, dj) = (a as isize - i as isize, b as isize - j as isize);
                    if (a, b) == (i, j) || di.abs() > r || dj.abs() > r {
                        continue;
                    }
                    total += 1;
                    if m.get(a, b) < m.get(i, j) {
                        lower += 1;
                    }
                }
            }
            out.push(if total == 0 { 0.0 } else { lower as f64 / total as f64 });
        }
    }
    out
}

/// Inside density of `spans`, summing every cell directly.
fn density(m: &SquareMatrix, bounds: &[usize]) -> f64 {
    let n = m.size();
    let mut edges = vec![0];
    edges.extend(bounds);
    edges.push(n);
    let (mut mass, mut area) = (0.0, 0.0);
    for w in edges.windows(2) {
        for i in w[0]..w[1] {
            for j in w[0]..w[1] {
                mass += m.get(i, j);
            }
        }
        area += ((w[1] - w[0]) * (w[1] - w[0])) as f64;
    }
    mass / area
}

#[allow(clippy::needless_range_loop)]
fn symmetric(n: usize, vals: &[f64]) -> SquareMatrix {
    let mut k = 0;
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = if i == j { 1.0 } else { vals[k % vals.len()] };
            k += 1;
            rows[i][j] = v;
            rows[j][i] = v;
        }
    }
    SquareMatrix::from_rows(rows).unwrap()
}

fn matrix_strategy() -> impl Strategy<Value = SquareMatrix> {
    (2usize..24, prop::collection::vec(-1.0f64..1.0, 1..300)).prop_map(|(n, v)| symmetric(n, &v))
}

fn embedded_rank(n: usize, seed: u64) -> SquareMatrix {
    let mut r = common::rng(seed);
    let vocab = common::vocabulary("v", 25);
    let vectors: Vec<EmbeddingVector> = (0..n)
        .map(|_| {
            let s = common::sentence(&mut r, &vocab, 3, 9);
            HashedBowProvider::default().embed_one(&s)
        })
        .collect();
    rank_matrix(&similarity_matrix(&vectors).unwrap(), 11).unwrap()
}

#[test]
fn block_diagonal_boundary_matches_exhaustive_scoring() {
    let rank = SquareMatrix::from_fn(10, |i, j| if (i < 5) == (j < 5) { 1.0 } else { 0.0 });
    let best = (1..10)
        .max_by(|&a, &b| density(&rank, &[a]).total_cmp(&density(&rank, &[b])).then(b.cmp(&a)))
        .unwrap();
    assert_eq!(best, 5);
    assert_eq!(c99_segment(&rank, Some(2)).unwrap().boundaries, vec![5]);
}

#[test]
fn two_topic_first_split_is_global_density_maximum() {
    for seed in 0..10 {
        let doc = common::two_topic_document(seed);
        let provider = HashedBowProvider::default();
        let texts: Vec<&str> = doc.sentences.iter().map(|s| s.text.as_str()).collect();
        let vectors: Vec<EmbeddingVector> = texts.iter().map(|t| provider.embed_one(t)).collect();
        let rank = rank_matrix(&similarity_matrix(&vectors).unwrap(), 11).unwrap();
        let best = (1..20)
            .max_by(|&a, &b| density(&rank, &[a]).total_cmp(&density(&rank, &[b])))
            .unwrap();
        let seg = c99_segment(&rank, Some(2)).unwrap();
        assert_eq!(seg.boundaries, vec![best]);
        assert!((9..=11).contains(&best), "seed {seed}: {best}");

        let auto = segment_document(&doc, &provider, &SegmentParams::default()).unwrap();
        assert!(
            auto.boundaries.iter().any(|b| (9..=11).contains(b)),
            "seed {seed}: {:?}",
            auto.boundaries
        );
    }
}

#[test]
fn density_can_fall_on_late_splits() {
    let rank = embedded_rank(10, 9667);
    let traj = c99_trajectory(&rank, 10);
    let gains: Vec<f64> = traj.densities.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(gains[..gains.len() - 1].iter().all(|&g| g > 0.0));
    assert!(*gains.last().unwrap() < 0.0, "{:?}", traj.densities);
}

#[test]
fn record_round_trip() {
    let seg = Segmentation::new("d", 12, vec![7, 3]).unwrap();
    let line = serde_json::to_string(&seg.to_record()).unwrap();
    assert_eq!(line, r#"{"case_id":"d","boundaries":[3,7]}"#);
    let rec: SegmentationRecord = serde_json::from_str(&line).unwrap();
    assert_eq!(Segmentation::new(rec.case_id, 12, rec.boundaries).unwrap(), seg);
}

proptest! {
    #[test]
    fn rank_matches_window_oracle(m in matrix_strategy(), half in 1usize..6) {
        let mask = 2 * half + 1;
        let rank = rank_matrix(&m, mask).unwrap();
        let oracle = rank_oracle(&m, mask);
        for (k, v) in oracle.iter().enumerate() {
            prop_assert_eq!(rank.get(k / m.size(), k % m.size()), *v);
        }
    }

    #[test]
    fn rank_is_bounded_and_rescale_invariant(m in matrix_strategy()) {
        let rank = rank_matrix(&m, 11).unwrap();
        let n = m.size();
        prop_assert!((0..n * n).all(|k| (0.0..=1.0).contains(&rank.get(k / n, k % n))));
        let rescaled = SquareMatrix::from_fn(n, |i, j| {
            let x = m.get(i, j);
            x * x * x + 2.0 * x + 5.0
        });
        prop_assert_eq!(rank_matrix(&rescaled, 11).unwrap(), rank);
    }

    #[test]
    fn segments_partition_the_document(m in matrix_strategy(), t in 1usize..24) {
        let rank = rank_matrix(&m, 11).unwrap();
        let n = rank.size();
        let target = t.min(n);
        let seg = c99_segment(&rank, Some(target)).unwrap();
        let spans = seg.segments();
        prop_assert_eq!(spans.len(), target);
        prop_assert_eq!(spans[0].start, 0);
        prop_assert_eq!(spans.last().unwrap().end, n);
        prop_assert!(spans.windows(2).all(|w| w[0].end == w[1].start));
        prop_assert!(spans.iter().all(|s| s.start < s.end));

        let auto = c99_segment(&rank, None).unwrap();
        let spans = auto.segments();
        prop_assert_eq!(spans.iter().map(|s| s.len()).sum::<usize>(), n);
    }

    #[test]
    fn each_greedy_step_maximizes_density(m in matrix_strategy()) {
        let rank = rank_matrix(&m, 5).unwrap();
        let n = rank.size();
        let traj = c99_trajectory(&rank, n);
        prop_assert_eq!(traj.boundaries.len(), n - 1);
        let mut bounds: Vec<usize> = Vec::new();
        for (k, &b) in traj.boundaries.iter().enumerate() {
            let best = (1..n)
                .filter(|c| !bounds.contains(c))
                .map(|c| {
                    let mut t = bounds.clone();
                    t.push(c);
                    t.sort_unstable();
                    density(&rank, &t)
                })
                .fold(f64::MIN, f64::max);
            bounds.push(b);
            bounds.sort_unstable();
            let chosen = density(&rank, &bounds);
            prop_assert!((chosen - best).abs() <= 1e-9, "step {k}: {chosen} vs {best}");
            prop_assert!((traj.densities[k + 1] - chosen).abs() <= 1e-9);
        }
    }
}
