//! Parameter-grid experiments over a corpus and result tables.
//!
//! Each grid cell is one `(temperature, max_tokens)` pair. Per-document
//! results are appended to `results/<cell>.jsonl` as they are produced, so an
//! interrupted run resumes where it stopped. Aggregation happens after sorting
//! by case id; documents that failed anywhere are dropped from every cell.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::corpus::{split_corpus, CaseDocument, SplitRatios};
use crate::embedding::{EmbeddingProvider, TokenEmbedder};
use crate::error::{Error, Result};
use crate::labeler::{gold_label, predict_label, ClassifierModel, SegmentLabel, DEFAULT_THRESHOLD};
use crate::metrics::{aggregate, evaluate_pair, EvalOptions, EvalReport};
use crate::segmenter::{segment_document, SegmentParams, Segmentation};
use crate::summarizer::{
    summarize_document, CompletionClient, DecodeParams, ProviderProfile, SummaryInput, SummaryMethod, SummaryRecord,
    TokenBudgetPolicy,
};

/// Where segment labels come from in argumentative-segment mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelSource {
    Gold,
    Model(PathBuf),
    /// Injected `{"case_id", "segment_index", "label"}` lines.
    Predictions(PathBuf),
}

impl FromStr for LabelSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "gold" {
            return Ok(LabelSource::Gold);
        }
        if let Some(p) = s.strip_prefix("model:") {
            return Ok(LabelSource::Model(p.into()));
        }
        if let Some(p) = s.strip_prefix("predictions:") {
            return Ok(LabelSource::Predictions(p.into()));
        }
        Err(Error::Config(format!(
            "label source `{s}` must be gold, model:<path> or predictions:<path>"
        )))
    }
}

/// Which documents a run evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentSet {
    /// The test slice of the seeded 80/10/10 split.
    Test,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub corpus: PathBuf,
    pub methods: Vec<SummaryMethod>,
    pub profile: ProviderProfile,
    pub temperatures: Vec<f64>,
    pub max_tokens: Vec<usize>,
    pub budget: TokenBudgetPolicy,
    pub seed: u64,
    pub documents: DocumentSet,
    pub labels: LabelSource,
    pub provider: String,
    pub endpoint: Option<String>,
    pub embedding: String,
    pub embedding_endpoint: Option<String>,
    pub embedding_dim: usize,
    pub segment: SegmentParams,
    pub max_in_flight: usize,
    pub bertscore: bool,
    pub output_dir: PathBuf,
    pub compare_temperature: f64,
    pub compare_max_tokens: usize,
}

impl ExperimentConfig {
    pub fn new(corpus: impl Into<PathBuf>, profile: ProviderProfile) -> Self {
        Self {
            corpus: corpus.into(),
            methods: vec![SummaryMethod::ArgSegments, SummaryMethod::BaselineChunks],
            temperatures: vec![0.0, 0.3, 0.5, 0.8],
            max_tokens: profile.max_tokens_grid.clone(),
            budget: TokenBudgetPolicy {
                budget_tokens: profile.budget_tokens,
            },
            compare_temperature: 0.0,
            compare_max_tokens: *profile.max_tokens_grid.last().expect("profiles define a grid"),
            profile,
            seed: 0,
            documents: DocumentSet::Test,
            labels: LabelSource::Gold,
            provider: "mock".into(),
            endpoint: None,
            embedding: "builtin".into(),
            embedding_endpoint: None,
            embedding_dim: crate::embedding::DEFAULT_DIM,
            segment: SegmentParams::default(),
            max_in_flight: 4,
            bertscore: true,
            output_dir: PathBuf::from("."),
        }
    }

    /// Parses a flat `key = value` file. `#` starts a comment; lists are
    /// comma-separated. Relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", k + 1)))?;
            kv.insert(key.trim().to_string(), value.trim().to_string());
        }
        let take = |k: &str| kv.get(k).cloned();
        let resolve = |p: String| {
            let p = PathBuf::from(p);
            if p.is_relative() {
                base_dir.join(p)
            } else {
                p
            }
        };
        let corpus = take("corpus").ok_or_else(|| Error::Config("missing `corpus`".into()))?;
        let profile = ProviderProfile::by_name(take("profile").as_deref().unwrap_or("small"))?;
        let mut cfg = Self::new(resolve(corpus), profile);
        let known = [
            "corpus",
            "profile",
            "methods",
            "temperatures",
            "max_tokens",
            "budget",
            "seed",
            "documents",
            "labels",
            "provider",
            "endpoint",
            "embedding",
            "embedding_endpoint",
            "embedding_dim",
            "mask",
            "segments",
            "max_in_flight",
            "bertscore",
            "output_dir",
            "compare_temperature",
            "compare_max_tokens",
        ];
        if let Some(k) = kv.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key `{k}`")));
        }
        if let Some(v) = take("methods") {
            cfg.methods = parse_list(&v)?;
        }
        if let Some(v) = take("temperatures") {
            cfg.temperatures = parse_list(&v)?;
        }
        if let Some(v) = take("max_tokens") {
            cfg.max_tokens = parse_list(&v)?;
            cfg.compare_max_tokens = *cfg.max_tokens.last().unwrap_or(&cfg.compare_max_tokens);
        }
        if let Some(v) = take("budget") {
            cfg.budget = TokenBudgetPolicy::new(parse_value(&v)?)?;
        }
        if let Some(v) = take("seed") {
            cfg.seed = parse_value(&v)?;
        }
        if let Some(v) = take("documents") {
            cfg.documents = match v.as_str() {
                "test" => DocumentSet::Test,
                "all" => DocumentSet::All,
                other => return Err(Error::Config(format!("documents must be test or all, got `{other}`"))),
            };
        }
        if let Some(v) = take("labels") {
            cfg.labels = match v.parse()? {
                LabelSource::Model(p) => LabelSource::Model(resolve(p.to_string_lossy().into_owned())),
                LabelSource::Predictions(p) => LabelSource::Predictions(resolve(p.to_string_lossy().into_owned())),
                LabelSource::Gold => LabelSource::Gold,
            };
        }
        if let Some(v) = take("provider") {
            cfg.provider = v;
        }
        cfg.endpoint = take("endpoint");
        if let Some(v) = take("embedding") {
            cfg.embedding = v;
        }
        cfg.embedding_endpoint = take("embedding_endpoint");
        if let Some(v) = take("embedding_dim") {
            cfg.embedding_dim = parse_value(&v)?;
        }
        if let Some(v) = take("mask") {
            cfg.segment.mask = parse_value(&v)?;
        }
        if let Some(v) = take("segments") {
            cfg.segment.target_segments = if v == "auto" { None } else { Some(parse_value(&v)?) };
        }
        if let Some(v) = take("max_in_flight") {
            cfg.max_in_flight = parse_value(&v)?;
        }
        if let Some(v) = take("bertscore") {
            cfg.bertscore = parse_value(&v)?;
        }
        if let Some(v) = take("output_dir") {
            cfg.output_dir = resolve(v);
        }
        if let Some(v) = take("compare_temperature") {
            cfg.compare_temperature = parse_value(&v)?;
        }
        if let Some(v) = take("compare_max_tokens") {
            cfg.compare_max_tokens = parse_value(&v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.temperatures.is_empty() || self.max_tokens.is_empty() {
            return Err(Error::Config(
                "methods, temperatures and max_tokens must be non-empty".into(),
            ));
        }
        if let Some(t) = self
            .temperatures
            .iter()
            .chain([&self.compare_temperature])
            .find(|t| !(0.0..=1.0).contains(*t))
        {
            return Err(Error::Config(format!("temperature {t} outside [0, 1]")));
        }
        if self.max_tokens.contains(&0) || self.compare_max_tokens == 0 {
            return Err(Error::Config("max_tokens must be positive".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            temperatures: self.temperatures.clone(),
            max_tokens: self.max_tokens.clone(),
        }
    }
}

fn parse_value<T: FromStr>(v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse `{v}`")))
}

fn parse_list<T: FromStr>(v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(parse_value).collect()
}

impl FromStr for SummaryMethodList {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(Self(parse_list(s)?))
    }
}

/// Comma-separated methods, as accepted on the command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryMethodList(pub Vec<SummaryMethod>);

/// Temperatures × max-token budgets, iterated budget-major as in the
/// published tables: `(0, 32), (0.3, 32), …, (0.8, 128)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub temperatures: Vec<f64>,
    pub max_tokens: Vec<usize>,
}

impl GridSpec {
    pub fn cells(&self) -> Vec<DecodeParams> {
        self.max_tokens
            .iter()
            .flat_map(|&m| {
                self.temperatures.iter().map(move |&t| DecodeParams {
                    temperature: t,
                    max_tokens: m,
                })
            })
            .collect()
    }
}

pub fn cell_name(method: SummaryMethod, p: &DecodeParams) -> String {
    format!("{}_t{}_m{}", method.short_name(), p.temperature, p.max_tokens)
}

fn param_label(p: &DecodeParams) -> String {
    format!("({}, {})", p.temperature, p.max_tokens)
}

/// A document ready for summarization: segmentation and labels are present
/// whenever argumentative-segment mode will run.
#[derive(Debug, Clone)]
pub struct PreparedDoc<'a> {
    pub doc: &'a CaseDocument,
    pub segmentation: Option<Segmentation>,
    pub labels: Option<Vec<SegmentLabel>>,
}

impl PreparedDoc<'_> {
    fn input(&self, method: SummaryMethod) -> Result<SummaryInput<'_>> {
        match method {
            SummaryMethod::BaselineChunks => Ok(SummaryInput::BaselineChunks),
            SummaryMethod::ArgSegments => match (&self.segmentation, &self.labels) {
                (Some(segmentation), Some(labels)) => Ok(SummaryInput::ArgSegments { segmentation, labels }),
                _ => Err(Error::Config(format!(
                    "document `{}` was not segmented",
                    self.doc.case_id
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocFailure {
    pub case_id: String,
    pub stage: String,
    pub error: String,
}

/// Labels for every segment of `seg`.
pub fn label_segments(
    doc: &CaseDocument,
    seg: &Segmentation,
    source: &LabelSource,
    model: Option<&ClassifierModel>,
    injected: Option<&HashMap<String, Vec<Option<SegmentLabel>>>>,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<SegmentLabel>> {
    let spans = seg.segments();
    match source {
        LabelSource::Gold => spans.into_iter().map(|s| gold_label(s, doc)).collect(),
        LabelSource::Model(_) => {
            let model = model.ok_or_else(|| Error::Config("classifier model not loaded".into()))?;
            spans
                .into_iter()
                .map(|s| Ok(predict_label(model, s, doc, provider, DEFAULT_THRESHOLD)?.label))
                .collect()
        }
        LabelSource::Predictions(_) => {
            let labels = injected
                .and_then(|m| m.get(&doc.case_id))
                .ok_or(Error::LabelSegmentMismatch {
                    labels: 0,
                    segments: spans.len(),
                })?;
            if labels.len() != spans.len() || labels.iter().any(Option::is_none) {
                return Err(Error::LabelSegmentMismatch {
                    labels: labels.iter().flatten().count(),
                    segments: spans.len(),
                });
            }
            Ok(labels.iter().flatten().copied().collect())
        }
    }
}

/// Segments and labels documents when argumentative-segment mode is
/// requested. Documents that cannot be prepared (including those without any
/// argumentative segment) are reported instead of silently skipped.
pub fn prepare_documents<'a>(
    docs: &[&'a CaseDocument],
    methods: &[SummaryMethod],
    provider: &dyn EmbeddingProvider,
    params: &SegmentParams,
    source: &LabelSource,
) -> Result<(Vec<PreparedDoc<'a>>, Vec<DocFailure>)> {
    let needs_segments = methods.contains(&SummaryMethod::ArgSegments);
    let model = match source {
        LabelSource::Model(p) if needs_segments => Some(ClassifierModel::load(p)?),
        _ => None,
    };
    let injected = match source {
        LabelSource::Predictions(p) if needs_segments => Some(crate::labeler::read_predictions(p)?),
        _ => None,
    };
    let mut prepared = Vec::new();
    let mut failures = Vec::new();
    for &doc in docs {
        if !needs_segments {
            prepared.push(PreparedDoc {
                doc,
                segmentation: None,
                labels: None,
            });
            continue;
        }
        let result = segment_document(doc, provider, params).and_then(|seg| {
            let labels = label_segments(doc, &seg, source, model.as_ref(), injected.as_ref(), provider)?;
            if !labels.iter().any(|l| l.is_argumentative()) {
                return Err(Error::NoArgumentativeSegments(doc.case_id.clone()));
            }
            Ok((seg, labels))
        });
        match result {
            Ok((seg, labels)) => prepared.push(PreparedDoc {
                doc,
                segmentation: Some(seg),
                labels: Some(labels),
            }),
            Err(e) => {
                warn!("excluding `{}`: {e}", doc.case_id);
                failures.push(DocFailure {
                    case_id: doc.case_id.clone(),
                    stage: "prepare".into(),
                    error: e.to_string(),
                });
            }
        }
    }
    Ok((prepared, failures))
}

/// One line of a cell's checkpoint file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocResult {
    pub cell: String,
    pub case_id: String,
    pub summary: Option<SummaryRecord>,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

impl DocResult {
    fn ok(&self) -> bool {
        self.error.is_none() && self.summary.is_some() && self.report.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub method: SummaryMethod,
    pub params: DecodeParams,
    /// Sorted by case id.
    pub docs: Vec<DocResult>,
}

/// Everything a cell computation needs besides the documents.
pub struct RunContext<'a> {
    pub client: &'a CompletionClient,
    pub policy: TokenBudgetPolicy,
    pub profile: &'a ProviderProfile,
    pub token_embedder: Option<&'a dyn TokenEmbedder>,
    /// Directory for `<cell>.jsonl` checkpoints; `None` keeps results in memory.
    pub checkpoint_dir: Option<&'a Path>,
}

fn load_checkpoint(path: &Path) -> Result<HashMap<String, DocResult>> {
    let mut done = HashMap::new();
    let Ok(file) = File::open(path) else {
        return Ok(done);
    };
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        // a torn final line from an interrupted write is recomputed
        let Ok(rec) = serde_json::from_str::<DocResult>(&line) else {
            continue;
        };
        if rec.ok() {
            done.insert(rec.case_id.clone(), rec);
        }
    }
    Ok(done)
}

fn run_one(
    prep: &PreparedDoc<'_>,
    method: SummaryMethod,
    params: &DecodeParams,
    cell: &str,
    ctx: &RunContext<'_>,
) -> DocResult {
    let outcome = prep.input(method).and_then(|input| {
        let summary = summarize_document(
            prep.doc,
            &input,
            ctx.client,
            params,
            &ctx.policy,
            Some(&ctx.profile.pricing),
        )?;
        let reference = prep.doc.reference_summary.as_deref().unwrap_or("");
        let report = evaluate_pair(
            &summary.final_summary,
            reference,
            &EvalOptions {
                bertscore: ctx.token_embedder,
            },
        )?;
        Ok((summary, report))
    });
    match outcome {
        Ok((summary, report)) => DocResult {
            cell: cell.to_string(),
            case_id: prep.doc.case_id.clone(),
            summary: Some(summary),
            report: Some(report),
            error: None,
        },
        Err(e) => DocResult {
            cell: cell.to_string(),
            case_id: prep.doc.case_id.clone(),
            summary: None,
            report: None,
            error: Some(e.to_string()),
        },
    }
}

/// Runs one cell over all prepared documents, reusing checkpointed results.
pub fn run_cell(
    docs: &[PreparedDoc<'_>],
    method: SummaryMethod,
    params: &DecodeParams,
    ctx: &RunContext<'_>,
) -> Result<CellResult> {
    let cell = cell_name(method, params);
    let path = ctx.checkpoint_dir.map(|d| d.join(format!("{cell}.jsonl")));
    let mut done = match &path {
        Some(p) => load_checkpoint(p)?,
        None => HashMap::new(),
    };
    let mut sink = match &path {
        Some(p) => Some(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map_err(|e| Error::io(p, e))?,
        ),
        None => None,
    };
    let reused = done.len();
    for prep in docs {
        if done.contains_key(&prep.doc.case_id) {
            continue;
        }
        let res = run_one(prep, method, params, &cell, ctx);
        if let (Some(f), Some(p)) = (sink.as_mut(), &path) {
            let line = serde_json::to_string(&res)? + "\n";
            f.write_all(line.as_bytes())
                .and_then(|_| f.flush())
                .map_err(|e| Error::io(p, e))?;
        }
        done.insert(res.case_id.clone(), res);
    }
    info!("cell {cell}: {} documents ({reused} from checkpoint)", docs.len());
    let wanted: BTreeSet<&str> = docs.iter().map(|d| d.doc.case_id.as_str()).collect();
    let mut results: Vec<DocResult> = done
        .into_values()
        .filter(|r| wanted.contains(r.case_id.as_str()))
        .collect();
    results.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    Ok(CellResult {
        method,
        params: *params,
        docs: results,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub label: String,
    pub documents: usize,
    pub avg_length: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
    /// Corpus-level BLEU over the cell's documents.
    pub bleu: f64,
    pub meteor: f64,
    pub bertscore: Option<f64>,
    pub cost: f64,
}

/// Aggregates one cell over every document not listed in `excluded`.
pub fn cell_row(cell: &CellResult, excluded: &BTreeSet<String>) -> ResultRow {
    let kept: Vec<&DocResult> = cell
        .docs
        .iter()
        .filter(|d| !excluded.contains(&d.case_id) && d.ok())
        .collect();
    let reports: Vec<EvalReport> = kept.iter().filter_map(|d| d.report.clone()).collect();
    let agg = aggregate(&reports);
    ResultRow {
        label: param_label(&cell.params),
        documents: reports.len(),
        avg_length: agg.avg_length,
        rouge1: agg.rouge1.f1,
        rouge2: agg.rouge2.f1,
        rouge_l: agg.rouge_l.f1,
        bleu: agg.corpus_bleu,
        meteor: agg.meteor,
        bertscore: agg.bertscore.map(|b| b.f1),
        cost: kept.iter().filter_map(|d| d.summary.as_ref()?.cost).sum(),
    }
}

/// Column-wise mean of `rows`.
pub fn average_row(rows: &[ResultRow]) -> ResultRow {
    let n = rows.len() as f64;
    let mean = |f: &dyn Fn(&ResultRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    ResultRow {
        label: "Average".into(),
        documents: rows.first().map_or(0, |r| r.documents),
        avg_length: mean(&|r| r.avg_length),
        rouge1: mean(&|r| r.rouge1),
        rouge2: mean(&|r| r.rouge2),
        rouge_l: mean(&|r| r.rouge_l),
        bleu: mean(&|r| r.bleu),
        meteor: mean(&|r| r.meteor),
        bertscore: rows
            .iter()
            .map(|r| r.bertscore)
            .collect::<Option<Vec<f64>>>()
            .map(|b| b.iter().sum::<f64>() / n),
        cost: rows.iter().map(|r| r.cost).sum(),
    }
}

/// Ids of documents that failed in any of `cells`.
pub fn failed_ids(cells: &[CellResult]) -> BTreeMap<String, DocFailure> {
    let mut out = BTreeMap::new();
    for c in cells {
        for d in c.docs.iter().filter(|d| !d.ok()) {
            out.entry(d.case_id.clone()).or_insert_with(|| DocFailure {
                case_id: d.case_id.clone(),
                stage: d.cell.clone(),
                error: d.error.clone().unwrap_or_default(),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub method: SummaryMethod,
    /// Cell rows in grid order followed by the average row.
    pub rows: Vec<ResultRow>,
    pub failures: Vec<DocFailure>,
}

/// Every cell of the grid for one method, plus the average row.
pub fn run_grid(
    grid: &GridSpec,
    method: SummaryMethod,
    docs: &[PreparedDoc<'_>],
    ctx: &RunContext<'_>,
) -> Result<GridReport> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let cells = grid
        .cells()
        .iter()
        .map(|p| run_cell(docs, method, p, ctx))
        .collect::<Result<Vec<_>>>()?;
    let failures = failed_ids(&cells);
    let excluded: BTreeSet<String> = failures.keys().cloned().collect();
    let mut rows: Vec<ResultRow> = cells.iter().map(|c| cell_row(c, &excluded)).collect();
    rows.push(average_row(&rows));
    Ok(GridReport {
        method,
        rows,
        failures: failures.into_values().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: SummaryMethod,
    pub row: ResultRow,
    pub total_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodComparison {
    pub params: DecodeParams,
    pub rows: Vec<MethodRow>,
    pub failures: Vec<DocFailure>,
}

/// Runs every method at one decoding setting over the same documents.
/// A document failing under any method is excluded from all of them.
pub fn compare_methods(
    methods: &[SummaryMethod],
    params: &DecodeParams,
    docs: &[PreparedDoc<'_>],
    ctx: &RunContext<'_>,
) -> Result<MethodComparison> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let cells = methods
        .iter()
        .map(|&m| run_cell(docs, m, params, ctx))
        .collect::<Result<Vec<_>>>()?;
    let failures = failed_ids(&cells);
    let excluded: BTreeSet<String> = failures.keys().cloned().collect();
    let rows = cells
        .iter()
        .map(|c| {
            let mut row = cell_row(c, &excluded);
            row.label = c.method.short_name().to_string();
            MethodRow {
                method: c.method,
                total_cost: row.cost,
                row,
            }
        })
        .collect();
    Ok(MethodComparison {
        params: *params,
        rows,
        failures: failures.into_values().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

pub const TABLE_HEADER: [&str; 8] = [
    "Parameters",
    "Avg. summary length",
    "Rouge-1",
    "Rouge-2",
    "Rouge-L",
    "BLEU",
    "METEOR",
    "BERTScore",
];

fn row_cells(r: &ResultRow) -> [String; 8] {
    [
        r.label.clone(),
        format!("{:.0}", r.avg_length),
        format!("{:.2}", r.rouge1 * 100.0),
        format!("{:.2}", r.rouge2 * 100.0),
        format!("{:.2}", r.rouge_l * 100.0),
        format!("{:.2}", r.bleu * 100.0),
        format!("{:.2}", r.meteor),
        r.bertscore
            .map_or_else(|| "-".to_string(), |b| format!("{:.2}", b * 100.0)),
    ]
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// ROUGE, BLEU and BERTScore are shown ×100; METEOR stays in [0, 1].
pub fn render_table(rows: &[ResultRow], format: TableFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::EmptyRows);
    }
    let mut out = String::new();
    match format {
        TableFormat::Markdown => {
            let _ = writeln!(out, "| {} |", TABLE_HEADER.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(TABLE_HEADER.len()));
            for r in rows {
                let _ = writeln!(out, "| {} |", row_cells(r).join(" | "));
            }
        }
        TableFormat::Csv => {
            let _ = writeln!(
                out,
                "{}",
                TABLE_HEADER.iter().map(|h| csv_field(h)).collect::<Vec<_>>().join(",")
            );
            for r in rows {
                let _ = writeln!(
                    out,
                    "{}",
                    row_cells(r).iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(",")
                );
            }
        }
    }
    Ok(out)
}

fn render_comparison(cmp: &MethodComparison) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| Method | {} | Total cost ($) |", TABLE_HEADER[1..].join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(TABLE_HEADER.len() + 1));
    for m in &cmp.rows {
        let cells = row_cells(&m.row);
        let _ = writeln!(
            out,
            "| {} | {} | {:.4} |",
            cells[0],
            cells[1..].join(" | "),
            m.total_cost
        );
    }
    out
}

/// Outputs of a full experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub grids: Vec<GridReport>,
    pub comparison: MethodComparison,
    pub failures: Vec<DocFailure>,
    pub documents: usize,
    pub footer: String,
}

impl ExperimentReport {
    pub fn render_markdown(&self) -> Result<String> {
        let mut out = String::from("# Summarization experiment\n\n");
        for g in &self.grids {
            let _ = writeln!(out, "## Method `{}` (temperature, max tokens)\n", g.method);
            out.push_str(&render_table(&g.rows, TableFormat::Markdown)?);
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "## Method comparison at {}\n",
            param_label(&self.comparison.params)
        );
        out.push_str(&render_comparison(&self.comparison));
        out.push('\n');
        if !self.failures.is_empty() {
            out.push_str("## Excluded documents\n\n");
            for f in &self.failures {
                let _ = writeln!(out, "- `{}` ({}): {}", f.case_id, f.stage, f.error);
            }
            out.push('\n');
        }
        out.push_str(&self.footer);
        Ok(out)
    }

    pub fn render_csv(&self) -> Result<String> {
        let mut out = String::new();
        for g in &self.grids {
            let mut rows = g.rows.clone();
            for r in &mut rows {
                r.label = format!("{} {}", g.method, r.label);
            }
            let table = render_table(&rows, TableFormat::Csv)?;
            if out.is_empty() {
                out.push_str(&table);
            } else {
                out.extend(table.lines().skip(1).map(|l| format!("{l}\n")));
            }
        }
        Ok(out)
    }
}

/// Prepares documents, runs the grid for each method and the method
/// comparison, and writes `results/`, `report.md` and `report.csv` under
/// `out_dir` when given.
pub fn run_experiment(
    config: &ExperimentConfig,
    corpus: &[CaseDocument],
    embedder: &dyn EmbeddingProvider,
    token_embedder: Option<&dyn TokenEmbedder>,
    client: &CompletionClient,
    out_dir: Option<&Path>,
) -> Result<ExperimentReport> {
    config.validate()?;
    let docs: Vec<&CaseDocument> = match config.documents {
        DocumentSet::All => corpus.iter().collect(),
        DocumentSet::Test => {
            let split = split_corpus(corpus, SplitRatios::default(), config.seed)?;
            crate::corpus::select(corpus, &split.test)
        }
    };
    let (mut prepared, mut failures) =
        prepare_documents(&docs, &config.methods, embedder, &config.segment, &config.labels)?;
    // references are required for scoring
    prepared.retain(|p| {
        let ok = p.doc.reference_summary.as_deref().is_some_and(|r| !r.trim().is_empty());
        if !ok {
            failures.push(DocFailure {
                case_id: p.doc.case_id.clone(),
                stage: "prepare".into(),
                error: Error::EmptyReference.to_string(),
            });
        }
        ok
    });
    if prepared.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let results_dir = out_dir.map(|d| d.join("results"));
    if let Some(d) = &results_dir {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let ctx = RunContext {
        client,
        policy: config.budget,
        profile: &config.profile,
        token_embedder: if config.bertscore { token_embedder } else { None },
        checkpoint_dir: results_dir.as_deref(),
    };

    let grid = config.grid();
    let mut grids: Vec<GridReport> = config
        .methods
        .iter()
        .map(|&m| run_grid(&grid, m, &prepared, &ctx))
        .collect::<Result<_>>()?;
    let params = DecodeParams {
        temperature: config.compare_temperature,
        max_tokens: config.compare_max_tokens,
    };
    let comparison = compare_methods(&config.methods, &params, &prepared, &ctx)?;

    // like-for-like: a document failing anywhere leaves every table
    let mut all_failures: BTreeMap<String, DocFailure> = BTreeMap::new();
    for f in failures
        .into_iter()
        .chain(grids.iter().flat_map(|g| g.failures.clone()))
        .chain(comparison.failures.clone())
    {
        all_failures.entry(f.case_id.clone()).or_insert(f);
    }
    let excluded: BTreeSet<String> = all_failures.keys().cloned().collect();
    let comparison = if excluded.is_empty() {
        comparison
    } else {
        let kept: Vec<PreparedDoc<'_>> = prepared
            .iter()
            .filter(|p| !excluded.contains(&p.doc.case_id))
            .cloned()
            .collect();
        for g in &mut grids {
            *g = run_grid(&grid, g.method, &kept, &ctx)?;
        }
        compare_methods(&config.methods, &params, &kept, &ctx)?
    };
    let documents = prepared.len() - prepared.iter().filter(|p| excluded.contains(&p.doc.case_id)).count();

    let report = ExperimentReport {
        grids,
        comparison,
        failures: all_failures.into_values().collect(),
        documents,
        footer: format!(
            "Documents evaluated: {documents}. Summary lengths are counted with the `{}` tokenizer. \
             BERTScore is raw greedy-match F1 over `{}` token embeddings without baseline rescaling; \
             BLEU is corpus-level without smoothing. Provider: `{}`, profile `{}`, prompt budget {} tokens.\n",
            client.tokenizer().id(),
            if ctx.token_embedder.is_some() {
                "hashed-token"
            } else {
                "none"
            },
            client.provider_id(),
            config.profile.name,
            config.budget.budget_tokens,
        ),
    };
    if let Some(d) = out_dir {
        let md = d.join("report.md");
        fs::write(&md, report.render_markdown()?).map_err(|e| Error::io(&md, e))?;
        let csv = d.join("report.csv");
        fs::write(&csv, report.render_csv()?).map_err(|e| Error::io(&csv, e))?;
    }
    Ok(report)
}
