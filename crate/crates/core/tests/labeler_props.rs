mod common;

use argpipe::embedding::EmbeddingVector;
use argpipe::labeler::{
    evaluate_classifier, gold_segments, read_predictions, segment_stats, sigmoid, train_classifier,
    ClassificationReport, ClassifierModel, Confusion, PredictionRecord, SegmentLabel, TrainParams,
};
use argpipe::segmenter::Segmentation;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn random_segmentation(r: &mut impl Rng, id: &str, n: usize) -> Segmentation {
    let k = r.gen_range(0..n);
    let mut cuts: Vec<usize> = (1..n).collect();
    cuts.shuffle(r);
    Segmentation::new(id, n, cuts[..k].to_vec()).unwrap()
}

/// Two clusters on either side of the hyperplane `x·d = 0` with a margin.
fn separable(seed: u64, n: usize, dim: usize) -> Vec<(EmbeddingVector, SegmentLabel)> {
    let mut r = common::rng(seed);
    let dir: Vec<f64> = (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut out = Vec::new();
    while out.len() < n {
        let x: Vec<f64> = (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect();
        let proj = x.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>() / norm;
        if proj.abs() < 0.3 {
            continue;
        }
        out.push((EmbeddingVector::new(x).unwrap(), SegmentLabel::from(proj > 0.0)));
    }
    out
}

/// Perceptron run to convergence: finds a separating hyperplane iff one
/// exists (within the epoch cap).
fn linearly_separable(data: &[(EmbeddingVector, SegmentLabel)]) -> bool {
    let dim = data[0].0.dim();
    let (mut w, mut b) = (vec![0.0; dim], 0.0);
    for _ in 0..10_000 {
        let mut mistakes = 0;
        for (x, y) in data {
            let t = if y.is_argumentative() { 1.0 } else { -1.0 };
            let s: f64 = x.values().iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + b;
            if t * s <= 0.0 {
                mistakes += 1;
                for (wi, xi) in w.iter_mut().zip(x.values()) {
                    *wi += t * xi;
                }
                b += t;
            }
        }
        if mistakes == 0 {
            return true;
        }
    }
    false
}

#[test]
fn gold_label_is_or_of_sentence_flags() {
    let mut r = common::rng(11);
    let mut per_doc = Vec::new();
    for d in 0..200 {
        let n = r.gen_range(1..25);
        let doc = common::annotated_document(&mut r, &format!("d{d}"), n, 0.15);
        let seg = random_segmentation(&mut r, &doc.case_id, n);
        let labelled = gold_segments(&doc, &seg).unwrap();
        for s in &labelled {
            let any = doc.sentences[s.start..s.end].iter().any(|x| x.irc.is_some());
            assert_eq!(s.gold, Some(SegmentLabel::from(any)));
        }
        per_doc.push(labelled.iter().map(|s| s.gold.unwrap()).collect::<Vec<_>>());
    }
    let stats = segment_stats(&per_doc).unwrap();
    assert!((stats.argumentative.avg + stats.non_argumentative.avg - stats.total.avg).abs() < 1e-9);
}

#[test]
fn separable_set_is_learned() {
    let data = separable(5, 400, 8);
    assert!(linearly_separable(&data));
    let (train, test) = data.split_at(300);
    let model = train_classifier(train, "synthetic", &TrainParams::default()).unwrap();
    let h = &model.training.loss_history;
    assert!(h.windows(2).all(|w| w[1] <= w[0]), "loss rose");
    let report = evaluate_classifier(&model, test, 0.5).unwrap();
    assert!(report.argumentative.f1 >= 0.95, "{report:?}");
}

#[test]
fn training_is_seed_deterministic() {
    let data = separable(9, 100, 6);
    let p = TrainParams {
        epochs: 50,
        seed: 3,
        ..TrainParams::default()
    };
    let a = train_classifier(&data, "s", &p).unwrap();
    let b = train_classifier(&data, "s", &p).unwrap();
    assert_eq!(a.weights, b.weights);
    assert_eq!(a.bias, b.bias);
}

#[test]
fn planted_confusion_matrix() {
    use SegmentLabel::{Argumentative as A, NonArgumentative as N};
    let pairs = [
        (A, A),
        (A, A),
        (A, A),
        (A, A),
        (N, A),
        (A, N),
        (A, N),
        (N, N),
        (N, N),
        (N, N),
    ];
    let c = Confusion::from_pairs(pairs);
    assert_eq!((c.tp, c.fp, c.fn_, c.tn), (4, 1, 2, 3));
    let r = ClassificationReport::from_confusion(c).unwrap();
    assert!((r.argumentative.precision - 0.8).abs() < 1e-12);
    assert!((r.argumentative.recall - 2.0 / 3.0).abs() < 1e-12);
    assert!((r.argumentative.f1 - 8.0 / 11.0).abs() < 1e-12);
}

#[test]
fn sigmoid_of_hand_set_logit() {
    let model = ClassifierModel {
        dim: 2,
        weights: vec![0.5, 0.25],
        bias: 0.3,
        feature_spec: "test".into(),
        training: Default::default(),
    };
    // 0.5·0.6 + 0.25·0.8 + 0.3 = 0.8
    let s = model.score(&EmbeddingVector::new(vec![0.6, 0.8]).unwrap()).unwrap();
    assert!((s - 1.0 / (1.0 + (-0.8f64).exp())).abs() < 1e-12);
    assert!((s - 0.689974).abs() < 1e-6);
}

#[test]
fn model_file_round_trip_and_validation() {
    let data = separable(1, 60, 4);
    let model = train_classifier(
        &data,
        "hashed-bow-4",
        &TrainParams {
            epochs: 20,
            ..Default::default()
        },
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    model.save(&path).unwrap();
    let back = ClassifierModel::load(&path).unwrap();
    assert_eq!(
        (back.dim, &back.weights, back.bias),
        (model.dim, &model.weights, model.bias)
    );
    let x = &data[0].0;
    assert_eq!(back.predict(x, 0.5).unwrap(), model.predict(x, 0.5).unwrap());

    std::fs::write(&path, r#"{"dim":3,"weights":[1.0],"bias":0.0,"feature_spec":"x"}"#).unwrap();
    assert!(ClassifierModel::load(&path).is_err());
    assert!(model.score(&EmbeddingVector::new(vec![1.0; 5]).unwrap()).is_err());
}

#[test]
fn injected_predictions_are_indexed_by_segment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.jsonl");
    let recs = [
        PredictionRecord {
            case_id: "a".into(),
            segment_index: 1,
            label: SegmentLabel::Argumentative,
            score: None,
        },
        PredictionRecord {
            case_id: "a".into(),
            segment_index: 0,
            label: SegmentLabel::NonArgumentative,
            score: Some(0.1),
        },
    ];
    let text: String = recs.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
    assert!(text.contains(r#""label":1"#));
    std::fs::write(&path, text).unwrap();
    let m = read_predictions(&path).unwrap();
    assert_eq!(
        m["a"],
        vec![Some(SegmentLabel::NonArgumentative), Some(SegmentLabel::Argumentative)]
    );
}

#[test]
fn single_class_training_rejected() {
    let data: Vec<_> = separable(2, 20, 3)
        .into_iter()
        .filter(|(_, l)| l.is_argumentative())
        .collect();
    assert!(train_classifier(&data, "s", &TrainParams::default()).is_err());
}

proptest! {
    #[test]
    fn raising_threshold_never_creates_positives(
        w in prop::collection::vec(-3.0f64..3.0, 4),
        b in -2.0f64..2.0,
        x in prop::collection::vec(-1.0f64..1.0, 4),
        t1 in 0.0f64..1.0,
        dt in 0.0f64..1.0,
    ) {
        let model = ClassifierModel { dim: 4, weights: w, bias: b, feature_spec: "p".into(), training: Default::default() };
        let x = EmbeddingVector::new(x).unwrap();
        let lo = model.predict(&x, t1).unwrap();
        let hi = model.predict(&x, t1 + dt).unwrap();
        prop_assert!(!(lo.label == SegmentLabel::NonArgumentative && hi.label == SegmentLabel::Argumentative));
        prop_assert!((lo.score - sigmoid(model.weights.iter().zip(x.values()).map(|(a, c)| a * c).sum::<f64>() + b)).abs() < 1e-12);
    }

    #[test]
    fn report_ignores_pair_order(flags in prop::collection::vec((any::<bool>(), any::<bool>()), 1..60), seed in any::<u64>()) {
        let pairs: Vec<_> = flags.iter().map(|&(g, p)| (SegmentLabel::from(g), SegmentLabel::from(p))).collect();
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut common::rng(seed));
        let a = ClassificationReport::from_confusion(Confusion::from_pairs(pairs)).unwrap();
        let b = ClassificationReport::from_confusion(Confusion::from_pairs(shuffled)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn loss_history_never_increases(seed in 0u64..500, lr in 0.1f64..20.0) {
        let data = separable(seed, 40, 5);
        let params = TrainParams { epochs: 40, learning_rate: lr, seed, ..TrainParams::default() };
        let model = train_classifier(&data, "p", &params).unwrap();
        let h = &model.training.loss_history;
        prop_assert!(h.iter().all(|l| l.is_finite()));
        prop_assert!(h.windows(2).all(|w| w[1] <= w[0]));
    }
}
