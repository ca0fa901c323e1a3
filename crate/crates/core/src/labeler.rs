//! Segment argumentativeness: the gold IRC-presence rule and a learned
//! logistic-regression classifier over pooled sentence embeddings.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::ops::Range;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::CaseDocument;
use crate::embedding::{embed_sentences, EmbeddingProvider, EmbeddingVector};
use crate::error::{Error, Result};
use crate::segmenter::Segmentation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum SegmentLabel {
    NonArgumentative = 0,
    Argumentative = 1,
}

impl SegmentLabel {
    pub fn is_argumentative(self) -> bool {
        self == SegmentLabel::Argumentative
    }

    fn target(self) -> f64 {
        if self.is_argumentative() {
            1.0
        } else {
            0.0
        }
    }
}

impl From<SegmentLabel> for u8 {
    fn from(l: SegmentLabel) -> u8 {
        l as u8
    }
}

impl TryFrom<u8> for SegmentLabel {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(SegmentLabel::NonArgumentative),
            1 => Ok(SegmentLabel::Argumentative),
            other => Err(format!("segment label must be 0 or 1, got {other}")),
        }
    }
}

impl From<bool> for SegmentLabel {
    fn from(b: bool) -> Self {
        if b {
            SegmentLabel::Argumentative
        } else {
            SegmentLabel::NonArgumentative
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: SegmentLabel,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSegment {
    pub case_id: String,
    pub segment_index: usize,
    pub start: usize,
    pub end: usize,
    pub gold: Option<SegmentLabel>,
    pub prediction: Option<Prediction>,
}

impl LabeledSegment {
    pub fn span(&self) -> Range<usize> {
        self.start..self.end
    }
}

fn check_span(span: &Range<usize>, doc: &CaseDocument) -> Result<()> {
    if span.start >= span.end || span.end > doc.len() {
        return Err(Error::SpanOutOfRange {
            start: span.start,
            end: span.end,
            len: doc.len(),
        });
    }
    Ok(())
}

/// Argumentative iff at least one sentence in the span carries an IRC label.
pub fn gold_label(span: Range<usize>, doc: &CaseDocument) -> Result<SegmentLabel> {
    check_span(&span, doc)?;
    Ok(doc.sentences[span].iter().any(|s| s.is_irc()).into())
}

/// Gold-labels every segment of a segmentation.
pub fn gold_segments(doc: &CaseDocument, seg: &Segmentation) -> Result<Vec<LabeledSegment>> {
    seg.segments()
        .into_iter()
        .enumerate()
        .map(|(i, span)| {
            Ok(LabeledSegment {
                case_id: doc.case_id.clone(),
                segment_index: i,
                start: span.start,
                end: span.end,
                gold: Some(gold_label(span, doc)?),
                prediction: None,
            })
        })
        .collect()
}

/// Mean of the span's sentence vectors, L2-normalized.
pub fn featurize(span: Range<usize>, doc: &CaseDocument, provider: &dyn EmbeddingProvider) -> Result<EmbeddingVector> {
    check_span(&span, doc)?;
    let texts: Vec<&str> = doc.sentences[span].iter().map(|s| s.text.as_str()).collect();
    let vectors = embed_sentences(provider, &texts)?;
    Ok(EmbeddingVector::mean(&vectors).normalized())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
    /// Weight each class by `N / (2 · N_class)`.
    pub class_weighting: bool,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            epochs: 300,
            learning_rate: 1.0,
            l2: 1e-4,
            seed: 0,
            class_weighting: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
    pub class_weighting: bool,
    /// Objective before the first update and after every epoch.
    pub loss_history: Vec<f64>,
}

/// Logistic-regression model. The serialized form holds `dim`, `weights`,
/// `bias` and `feature_spec` only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_spec: String,
    #[serde(skip)]
    pub training: TrainingMeta,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

struct Objective<'a> {
    xs: Vec<&'a [f64]>,
    ys: Vec<f64>,
    sample_weights: Vec<f64>,
    weight_sum: f64,
    l2: f64,
}

impl Objective<'_> {
    fn loss(&self, w: &[f64], b: f64) -> f64 {
        let data: f64 = self
            .xs
            .iter()
            .zip(&self.ys)
            .zip(&self.sample_weights)
            .map(|((x, &y), &sw)| {
                let z = dot(w, x) + b;
                // -[y ln σ(z) + (1-y) ln(1-σ(z))]
                sw * (softplus(z) - y * z)
            })
            .sum();
        data / self.weight_sum + 0.5 * self.l2 * dot(w, w)
    }

    fn gradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let mut gw = vec![0.0; w.len()];
        let mut gb = 0.0;
        for ((x, &y), &sw) in self.xs.iter().zip(&self.ys).zip(&self.sample_weights) {
            let r = sw * (sigmoid(dot(w, x) + b) - y);
            for (g, xi) in gw.iter_mut().zip(x.iter()) {
                *g += r * xi;
            }
            gb += r;
        }
        for (g, wi) in gw.iter_mut().zip(w) {
            *g = *g / self.weight_sum + self.l2 * wi;
        }
        (gw, gb / self.weight_sum)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Full-batch gradient descent on the (optionally class-weighted) logistic
/// loss with L2 penalty on the weights. A step that would raise the
/// objective is retried with half the step size, so the recorded loss never
/// increases.
pub fn train_classifier(
    examples: &[(EmbeddingVector, SegmentLabel)],
    feature_spec: &str,
    params: &TrainParams,
) -> Result<ClassifierModel> {
    let n_pos = examples.iter().filter(|(_, l)| l.is_argumentative()).count();
    let n_neg = examples.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClassTrainingSet);
    }
    let dim = examples[0].0.dim();
    if let Some((bad, _)) = examples.iter().find(|(x, _)| x.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.dim(),
        });
    }
    let n = examples.len() as f64;
    let (w_pos, w_neg) = if params.class_weighting {
        (n / (2.0 * n_pos as f64), n / (2.0 * n_neg as f64))
    } else {
        (1.0, 1.0)
    };
    let sample_weights: Vec<f64> = examples
        .iter()
        .map(|(_, l)| if l.is_argumentative() { w_pos } else { w_neg })
        .collect();
    let obj = Objective {
        xs: examples.iter().map(|(x, _)| x.values()).collect(),
        ys: examples.iter().map(|(_, l)| l.target()).collect(),
        weight_sum: sample_weights.iter().sum(),
        sample_weights,
        l2: params.l2,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.01..0.01)).collect();
    let mut b = 0.0;
    let mut loss = obj.loss(&w, b);
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss(0));
    }
    let mut history = vec![loss];
    let mut step = params.learning_rate;
    for epoch in 1..=params.epochs {
        let (gw, gb) = obj.gradient(&w, b);
        let mut accepted = false;
        for _ in 0..40 {
            let cand_w: Vec<f64> = w.iter().zip(&gw).map(|(wi, g)| wi - step * g).collect();
            let cand_b = b - step * gb;
            let cand_loss = obj.loss(&cand_w, cand_b);
            if !cand_loss.is_finite() {
                return Err(Error::NonFiniteLoss(epoch));
            }
            if cand_loss <= loss {
                w = cand_w;
                b = cand_b;
                loss = cand_loss;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        history.push(loss);
        if !accepted {
            // no descent direction left at machine precision
            break;
        }
    }

    Ok(ClassifierModel {
        dim,
        weights: w,
        bias: b,
        feature_spec: feature_spec.to_string(),
        training: TrainingMeta {
            epochs: params.epochs,
            learning_rate: params.learning_rate,
            l2: params.l2,
            seed: params.seed,
            class_weighting: params.class_weighting,
            loss_history: history,
        },
    })
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

impl ClassifierModel {
    pub fn score(&self, x: &EmbeddingVector) -> Result<f64> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.dim(),
            });
        }
        Ok(sigmoid(dot(&self.weights, x.values()) + self.bias))
    }

    /// Argumentative iff `score >= threshold`.
    pub fn predict(&self, x: &EmbeddingVector, threshold: f64) -> Result<Prediction> {
        let score = self.score(x)?;
        Ok(Prediction {
            label: (score >= threshold).into(),
            score,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: ClassifierModel = serde_json::from_str(&text)?;
        if model.weights.len() != model.dim {
            return Err(Error::DimensionMismatch {
                expected: model.dim,
                actual: model.weights.len(),
            });
        }
        if model.weights.iter().any(|w| !w.is_finite()) || !model.bias.is_finite() {
            return Err(Error::Config("model has non-finite parameters".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }
}

pub fn predict_label(
    model: &ClassifierModel,
    span: Range<usize>,
    doc: &CaseDocument,
    provider: &dyn EmbeddingProvider,
    threshold: f64,
) -> Result<Prediction> {
    if provider.dim() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            actual: provider.dim(),
        });
    }
    model.predict(&featurize(span, doc, provider)?, threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (SegmentLabel, SegmentLabel)>) -> Self {
        let mut c = Confusion::default();
        for (gold, pred) in pairs {
            match (gold.is_argumentative(), pred.is_argumentative()) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ClassMetrics {
    fn new(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
            support: tp + fn_,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub argumentative: ClassMetrics,
    pub non_argumentative: ClassMetrics,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub confusion: Confusion,
}

impl ClassificationReport {
    pub fn from_confusion(c: Confusion) -> Result<Self> {
        if c.total() == 0 {
            return Err(Error::EmptyTestSet);
        }
        let argumentative = ClassMetrics::new(c.tp, c.fp, c.fn_);
        let non_argumentative = ClassMetrics::new(c.tn, c.fn_, c.fp);
        Ok(Self {
            macro_f1: (argumentative.f1 + non_argumentative.f1) / 2.0,
            accuracy: ratio(c.tp + c.tn, c.total()),
            argumentative,
            non_argumentative,
            confusion: c,
        })
    }

    pub fn render(&self) -> String {
        let mut out = String::from("| Class | Precision | Recall | F1 | Support |\n|---|---|---|---|---|\n");
        for (name, m) in [
            ("Argumentative", &self.argumentative),
            ("Non-argumentative", &self.non_argumentative),
        ] {
            let _ = writeln!(
                out,
                "| {name} | {:.2} | {:.2} | {:.2} | {} |",
                m.precision * 100.0,
                m.recall * 100.0,
                m.f1 * 100.0,
                m.support
            );
        }
        let c = &self.confusion;
        let _ = writeln!(
            out,
            "\nMacro-F1 {:.2}, accuracy {:.2}. Confusion: TP={} FP={} FN={} TN={}",
            self.macro_f1 * 100.0,
            self.accuracy * 100.0,
            c.tp,
            c.fp,
            c.fn_,
            c.tn
        );
        out
    }
}

pub fn evaluate_classifier(
    model: &ClassifierModel,
    test: &[(EmbeddingVector, SegmentLabel)],
    threshold: f64,
) -> Result<ClassificationReport> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let pairs = test
        .iter()
        .map(|(x, gold)| Ok((*gold, model.predict(x, threshold)?.label)))
        .collect::<Result<Vec<_>>>()?;
    ClassificationReport::from_confusion(Confusion::from_pairs(pairs))
}

/// One line of an injected-prediction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub case_id: String,
    pub segment_index: usize,
    pub label: SegmentLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// Reads `{"case_id", "segment_index", "label"}` lines into per-document
/// label vectors indexed by segment.
pub fn read_predictions(path: impl AsRef<Path>) -> Result<HashMap<String, Vec<Option<SegmentLabel>>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out: HashMap<String, Vec<Option<SegmentLabel>>> = HashMap::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: k + 1,
            reason: e.to_string(),
        })?;
        let labels = out.entry(rec.case_id).or_default();
        if labels.len() <= rec.segment_index {
            labels.resize(rec.segment_index + 1, None);
        }
        labels[rec.segment_index] = Some(rec.label);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountStats {
    pub avg: f64,
    pub max: usize,
    pub min: usize,
}

impl CountStats {
    fn from_counts(counts: &[usize]) -> Option<Self> {
        Some(Self {
            avg: counts.iter().sum::<usize>() as f64 / counts.len() as f64,
            max: *counts.iter().max()?,
            min: *counts.iter().min()?,
        })
    }
}

/// Per-document segment counts by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub argumentative: CountStats,
    pub non_argumentative: CountStats,
    pub total: CountStats,
}

/// `labels[d]` lists the segment labels of document `d`.
pub fn segment_stats(labels: &[Vec<SegmentLabel>]) -> Result<SegmentStats> {
    let arg: Vec<usize> = labels
        .iter()
        .map(|l| l.iter().filter(|x| x.is_argumentative()).count())
        .collect();
    let total: Vec<usize> = labels.iter().map(Vec::len).collect();
    let non: Vec<usize> = arg.iter().zip(&total).map(|(a, t)| t - a).collect();
    Ok(SegmentStats {
        argumentative: CountStats::from_counts(&arg).ok_or(Error::EmptyCorpus)?,
        non_argumentative: CountStats::from_counts(&non).ok_or(Error::EmptyCorpus)?,
        total: CountStats::from_counts(&total).ok_or(Error::EmptyCorpus)?,
    })
}

impl SegmentStats {
    pub fn render(&self) -> String {
        let mut out = String::from(
            "| Type | Avg. # of segments | Max. # of segments | Min. # of segments |\n|---|---|---|---|\n",
        );
        for (name, s) in [
            ("Argumentative segmentation", &self.argumentative),
            ("Non-argumentative segmentation", &self.non_argumentative),
            ("Total", &self.total),
        ] {
            let _ = writeln!(out, "| {name} | {:.0} | {} | {} |", s.avg, s.max, s.min);
        }
        out
    }
}
