use std::collections::HashMap;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use argpipe::corpus::{self, corpus_stats, split_corpus, CaseDocument, SplitRatios};
use argpipe::embedding::{
    EmbeddingProvider, HashedBowProvider, HashedTokenEmbedder, HttpEmbeddingProvider, DEFAULT_DIM,
};
use argpipe::experiment::{self, ExperimentConfig, LabelSource};
use argpipe::labeler::{
    self, evaluate_classifier, featurize, gold_segments, segment_stats, train_classifier, ClassifierModel,
    PredictionRecord, SegmentLabel, TrainParams, DEFAULT_THRESHOLD,
};
use argpipe::metrics::{aggregate, evaluate_pair, EvalOptions, EvalReport};
use argpipe::segmenter::{segment_document, SegmentParams, Segmentation, SegmentationRecord, DEFAULT_MASK};
use argpipe::summarizer::{
    summarize_document, CompletionClient, CompletionProvider, DecodeParams, HttpCompletionProvider, MockProvider,
    ProviderProfile, SummaryInput, SummaryMethod, TokenBudgetPolicy, API_KEY_ENV,
};
use argpipe::tokenize::WordPunctTokenizer;

#[derive(Parser, Debug)]
#[command(
    name = "argpipe",
    version,
    about = "Argumentative-segment summarization of legal case documents"
)]
struct Cli {
    /// Experiment configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Default endpoint for HTTP providers.
    #[arg(long, global = true)]
    endpoint: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long, global = true, default_value = API_KEY_ENV)]
    api_key_env: String,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Directory for outputs that are written as files.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Print machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a corpus and write it back in canonical form.
    Ingest {
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Token statistics of documents and reference summaries.
    Stats { corpus: PathBuf },
    /// Seeded train/validation/test split.
    Split {
        corpus: PathBuf,
        /// Output directory for train.jsonl, validation.jsonl and test.jsonl.
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment every document.
    Segment {
        corpus: PathBuf,
        /// Fixed number of segments per document.
        #[arg(long, conflicts_with = "auto")]
        segments: Option<usize>,
        /// Choose the number of segments automatically (default).
        #[arg(long)]
        auto: bool,
        #[arg(long, default_value_t = DEFAULT_MASK)]
        mask: usize,
        #[arg(long, value_enum, default_value_t = EmbeddingKind::Builtin)]
        provider: EmbeddingKind,
        #[arg(long, default_value_t = DEFAULT_DIM)]
        dim: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gold segment labels and label statistics.
    Label {
        corpus: PathBuf,
        #[arg(long)]
        segmentation: PathBuf,
        /// Derive labels from sentence annotations.
        #[arg(long, required = true)]
        gold: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the segment classifier on gold labels.
    Train {
        corpus: PathBuf,
        #[arg(long)]
        segmentation: PathBuf,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 1.0)]
        lr: f64,
        #[arg(long, default_value_t = 1e-4)]
        l2: f64,
        #[command(flatten)]
        emb: EmbeddingArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict segment labels with a trained model.
    Predict {
        corpus: PathBuf,
        #[arg(long)]
        segmentation: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[command(flatten)]
        emb: EmbeddingArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-class precision, recall and F1 against gold labels.
    EvalClassifier {
        corpus: PathBuf,
        #[arg(long)]
        segmentation: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[command(flatten)]
        emb: EmbeddingArgs,
    },
    /// Summarize every document.
    Summarize {
        corpus: PathBuf,
        #[arg(long, value_parser = parse_method, default_value = "argseg")]
        method: SummaryMethod,
        #[arg(long, default_value_t = 0.0)]
        temperature: f64,
        #[arg(long, default_value_t = 128)]
        max_tokens: usize,
        /// Prompt budget in tokens; defaults to the profile's budget.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, default_value = "small")]
        profile: String,
        #[arg(long, value_enum, default_value_t = CompletionKind::Mock)]
        provider: CompletionKind,
        /// Segmentation file; segments are computed when absent.
        #[arg(long)]
        segmentation: Option<PathBuf>,
        /// gold, model:<path> or predictions:<path>.
        #[arg(long, default_value = "gold")]
        labels: String,
        #[command(flatten)]
        seg: SegmentArgs,
        #[arg(long, default_value_t = 4)]
        max_in_flight: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score candidate summaries against references.
    Score {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        references: PathBuf,
        /// Report file; a `.csv` extension selects CSV, anything else JSON.
        /// Per-pair JSON lines go to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_bertscore: bool,
    },
    /// Run a configured parameter-grid experiment.
    Experiment {
        /// Same as the global --config.
        config_file: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct EmbeddingArgs {
    #[arg(long = "embedding", value_enum, default_value_t = EmbeddingKind::Builtin)]
    embedding: EmbeddingKind,
    #[arg(long, default_value_t = DEFAULT_DIM)]
    dim: usize,
}

/// Segmentation settings used when `summarize` segments on the fly.
#[derive(Args, Debug, Clone)]
struct SegmentArgs {
    /// Fixed number of segments per document; automatic when absent.
    #[arg(long)]
    segment_count: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MASK)]
    mask: usize,
    #[command(flatten)]
    emb: EmbeddingArgs,
}

impl SegmentArgs {
    fn params(&self) -> SegmentParams {
        SegmentParams {
            mask: self.mask,
            target_segments: self.segment_count,
            ..SegmentParams::default()
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum EmbeddingKind {
    Builtin,
    Http,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum CompletionKind {
    Mock,
    Http,
}

fn parse_method(s: &str) -> Result<SummaryMethod, String> {
    s.parse().map_err(|e: argpipe::Error| e.to_string())
}

struct Globals {
    endpoint: Option<String>,
    api_key: Option<String>,
    out_dir: Option<PathBuf>,
    json: bool,
    seed: u64,
}

impl Globals {
    fn endpoint(&self, what: &str) -> Result<String> {
        self.endpoint
            .clone()
            .ok_or_else(|| anyhow!("--endpoint is required for the HTTP {what} provider"))
    }

    fn embedder(&self, args: &EmbeddingArgs) -> Result<Box<dyn EmbeddingProvider>> {
        Ok(match args.embedding {
            EmbeddingKind::Builtin => Box::new(HashedBowProvider::new(args.dim)),
            EmbeddingKind::Http => Box::new(HttpEmbeddingProvider::new(
                self.endpoint("embedding")?,
                args.dim,
                self.api_key.clone(),
            )),
        })
    }

    fn completion(&self, kind: &str, profile: &ProviderProfile) -> Result<Arc<dyn CompletionProvider>> {
        Ok(match kind {
            "mock" => Arc::new(MockProvider {
                context_window: Some(profile.context_window),
            }),
            "http" => {
                let mut p = HttpCompletionProvider::new(self.endpoint("completion")?, self.api_key.clone());
                p.context_window = Some(profile.context_window);
                Arc::new(p)
            }
            other => bail!("unknown completion provider `{other}`"),
        })
    }

    /// Writes to `name` under the output directory, `path`, or stdout.
    fn sink(&self, path: Option<&Path>) -> Result<Box<dyn Write>> {
        let path = match (path, &self.out_dir) {
            (Some(p), Some(d)) if p.is_relative() => Some(d.join(p)),
            (Some(p), _) => Some(p.to_path_buf()),
            (None, _) => None,
        };
        Ok(match path {
            Some(p) => {
                if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
                }
                Box::new(io::BufWriter::new(
                    fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?,
                ))
            }
            None => Box::new(io::BufWriter::new(io::stdout())),
        })
    }
}

fn write_lines<T: Serialize>(out: &mut dyn Write, items: impl IntoIterator<Item = T>) -> Result<()> {
    for item in items {
        writeln!(out, "{}", serde_json::to_string(&item)?)?;
    }
    out.flush()?;
    Ok(())
}

fn read_segmentations(path: &Path, docs: &[CaseDocument]) -> Result<HashMap<String, Segmentation>> {
    let by_id: HashMap<&str, &CaseDocument> = docs.iter().map(|d| (d.case_id.as_str(), d)).collect();
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = HashMap::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SegmentationRecord =
            serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), k + 1))?;
        let doc = by_id
            .get(rec.case_id.as_str())
            .ok_or_else(|| anyhow!("{}:{}: unknown case `{}`", path.display(), k + 1, rec.case_id))?;
        let seg = Segmentation::new(rec.case_id.clone(), doc.len(), rec.boundaries)?;
        out.insert(rec.case_id, seg);
    }
    Ok(out)
}

fn segmented<'a>(
    docs: &'a [CaseDocument],
    segs: &'a HashMap<String, Segmentation>,
) -> Result<Vec<(&'a CaseDocument, &'a Segmentation)>> {
    docs.iter()
        .map(|d| {
            segs.get(&d.case_id)
                .map(|s| (d, s))
                .ok_or_else(|| anyhow!("no segmentation for `{}`", d.case_id))
        })
        .collect()
}

fn gold_training_pairs(
    docs: &[(&CaseDocument, &Segmentation)],
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<(argpipe::embedding::EmbeddingVector, SegmentLabel)>> {
    let mut pairs = Vec::new();
    for (doc, seg) in docs {
        for s in gold_segments(doc, seg)? {
            let gold = s.gold.ok_or_else(|| anyhow!("`{}` has no annotations", doc.case_id))?;
            pairs.push((featurize(s.span(), doc, provider)?, gold));
        }
    }
    Ok(pairs)
}

#[derive(Debug, Deserialize)]
struct TextRecord {
    case_id: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    final_summary: Option<String>,
    #[serde(default)]
    reference_summary: Option<String>,
}

impl TextRecord {
    fn body(&self) -> Option<&str> {
        self.text
            .as_deref()
            .or(self.final_summary.as_deref())
            .or(self.reference_summary.as_deref())
    }
}

fn read_texts(path: &Path) -> Result<Vec<(String, String)>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TextRecord = serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), k + 1))?;
        let body = rec
            .body()
            .ok_or_else(|| anyhow!("{}:{}: no text field", path.display(), k + 1))?
            .to_string();
        out.push((rec.case_id, body));
    }
    Ok(out)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Serialize)]
struct ScoredPair<'a> {
    case_id: &'a str,
    #[serde(flatten)]
    report: &'a EvalReport,
}

fn run(cli: Cli) -> Result<()> {
    let g = Globals {
        endpoint: cli.endpoint.clone(),
        api_key: std::env::var(&cli.api_key_env).ok().filter(|k| !k.is_empty()),
        out_dir: cli.out_dir.clone(),
        json: cli.json,
        seed: cli.seed,
    };
    match cli.command {
        Command::Ingest { corpus, out } => {
            let docs = corpus::ingest(&corpus)?;
            log::info!("{} documents", docs.len());
            let mut w = g.sink(out.as_deref())?;
            w.write_all(corpus::serialize_corpus(&docs).as_bytes())?;
            w.flush()?;
        }
        Command::Stats { corpus } => {
            let docs = corpus::ingest(&corpus)?;
            let stats = corpus_stats(&docs, &WordPunctTokenizer)?;
            if g.json {
                println!("{}", serde_json::to_string_pretty(&stats)?);
            } else {
                print!("{}", stats.render());
            }
        }
        Command::Split { corpus, out } => {
            let docs = corpus::ingest(&corpus)?;
            let split = split_corpus(&docs, SplitRatios::default(), g.seed)?;
            let dir = match &g.out_dir {
                Some(d) if out.is_relative() => d.join(out),
                _ => out,
            };
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            for (name, ids) in [
                ("train", &split.train),
                ("validation", &split.validation),
                ("test", &split.test),
            ] {
                let part: Vec<CaseDocument> = corpus::select(&docs, ids).into_iter().cloned().collect();
                corpus::write_corpus(dir.join(format!("{name}.jsonl")), &part)?;
            }
            println!(
                "train {} validation {} test {}",
                split.train.len(),
                split.validation.len(),
                split.test.len()
            );
        }
        Command::Segment {
            corpus,
            segments,
            auto: _,
            mask,
            provider,
            dim,
            out,
        } => {
            let docs = corpus::ingest(&corpus)?;
            let provider = g.embedder(&EmbeddingArgs {
                embedding: provider,
                dim,
            })?;
            let params = SegmentParams {
                mask,
                target_segments: segments,
                ..SegmentParams::default()
            };
            let records = docs
                .iter()
                .map(|d| Ok(segment_document(d, provider.as_ref(), &params)?.to_record()))
                .collect::<Result<Vec<_>>>()?;
            write_lines(g.sink(out.as_deref())?.as_mut(), records)?;
        }
        Command::Label {
            corpus,
            segmentation,
            gold: _,
            out,
        } => {
            let docs = corpus::ingest(&corpus)?;
            let segs = read_segmentations(&segmentation, &docs)?;
            let mut labels = Vec::new();
            let mut rows = Vec::new();
            for (doc, seg) in segmented(&docs, &segs)? {
                let labelled = gold_segments(doc, seg)?;
                labels.push(labelled.iter().filter_map(|s| s.gold).collect::<Vec<_>>());
                rows.extend(labelled);
            }
            write_lines(g.sink(out.as_deref())?.as_mut(), &rows)?;
            let stats = segment_stats(&labels)?;
            if g.json {
                eprintln!("{}", serde_json::to_string(&stats)?);
            } else {
                eprint!("{}", stats.render());
            }
        }
        Command::Train {
            corpus,
            segmentation,
            epochs,
            lr,
            l2,
            emb,
            out,
        } => {
            let docs = corpus::ingest(&corpus)?;
            let segs = read_segmentations(&segmentation, &docs)?;
            let provider = g.embedder(&emb)?;
            let pairs = gold_training_pairs(&segmented(&docs, &segs)?, provider.as_ref())?;
            let params = TrainParams {
                epochs,
                learning_rate: lr,
                l2,
                seed: g.seed,
                ..TrainParams::default()
            };
            let model = train_classifier(&pairs, &provider.id(), &params)?;
            let path = match &g.out_dir {
                Some(d) if out.is_relative() => d.join(out),
                _ => out,
            };
            model.save(&path)?;
            let loss = &model.training.loss_history;
            log::info!(
                "trained on {} segments; loss {:.4} -> {:.4}",
                pairs.len(),
                loss.first().unwrap_or(&f64::NAN),
                loss.last().unwrap_or(&f64::NAN)
            );
        }
        Command::Predict {
            corpus,
            segmentation,
            model,
            threshold,
            emb,
            out,
        } => {
            let docs = corpus::ingest(&corpus)?;
            let segs = read_segmentations(&segmentation, &docs)?;
            let provider = g.embedder(&emb)?;
            let model = ClassifierModel::load(&model)?;
            let mut records = Vec::new();
            for (doc, seg) in segmented(&docs, &segs)? {
                for (i, span) in seg.segments().into_iter().enumerate() {
                    let p = labeler::predict_label(&model, span, doc, provider.as_ref(), threshold)?;
                    records.push(PredictionRecord {
                        case_id: doc.case_id.clone(),
                        segment_index: i,
                        label: p.label,
                        score: Some(p.score),
                    });
                }
            }
            write_lines(g.sink(out.as_deref())?.as_mut(), records)?;
        }
        Command::EvalClassifier {
            corpus,
            segmentation,
            model,
            threshold,
            emb,
        } => {
            let docs = corpus::ingest(&corpus)?;
            let segs = read_segmentations(&segmentation, &docs)?;
            let provider = g.embedder(&emb)?;
            let model = ClassifierModel::load(&model)?;
            let pairs = gold_training_pairs(&segmented(&docs, &segs)?, provider.as_ref())?;
            let report = evaluate_classifier(&model, &pairs, threshold)?;
            if g.json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.render());
            }
        }
        Command::Summarize {
            corpus,
            method,
            temperature,
            max_tokens,
            budget,
            profile,
            provider,
            segmentation,
            labels,
            seg,
            max_in_flight,
            out,
        } => {
            let docs = corpus::ingest(&corpus)?;
            let profile = ProviderProfile::by_name(&profile)?;
            let policy = TokenBudgetPolicy::new(budget.unwrap_or(profile.budget_tokens))?;
            let kind = match provider {
                CompletionKind::Mock => "mock",
                CompletionKind::Http => "http",
            };
            let client = CompletionClient::new(g.completion(kind, &profile)?)
                .with_seed(g.seed)
                .with_max_in_flight(max_in_flight);
            let params = DecodeParams {
                temperature,
                max_tokens,
            };
            let embedder = g.embedder(&seg.emb)?;
            let source: LabelSource = labels.parse()?;
            let given = match &segmentation {
                Some(p) => Some(read_segmentations(p, &docs)?),
                None => None,
            };
            let model = match &source {
                LabelSource::Model(p) if method == SummaryMethod::ArgSegments => Some(ClassifierModel::load(p)?),
                _ => None,
            };
            let injected = match &source {
                LabelSource::Predictions(p) if method == SummaryMethod::ArgSegments => {
                    Some(labeler::read_predictions(p)?)
                }
                _ => None,
            };
            let mut w = g.sink(out.as_deref())?;
            let mut failures = 0;
            for doc in &docs {
                let result = (|| -> Result<_> {
                    match method {
                        SummaryMethod::BaselineChunks => Ok(summarize_document(
                            doc,
                            &SummaryInput::BaselineChunks,
                            &client,
                            &params,
                            &policy,
                            Some(&profile.pricing),
                        )?),
                        SummaryMethod::ArgSegments => {
                            let seg = match given.as_ref().and_then(|m| m.get(&doc.case_id)) {
                                Some(s) => s.clone(),
                                None => segment_document(doc, embedder.as_ref(), &seg.params())?,
                            };
                            let labels = experiment::label_segments(
                                doc,
                                &seg,
                                &source,
                                model.as_ref(),
                                injected.as_ref(),
                                embedder.as_ref(),
                            )?;
                            let input = SummaryInput::ArgSegments {
                                segmentation: &seg,
                                labels: &labels,
                            };
                            Ok(summarize_document(
                                doc,
                                &input,
                                &client,
                                &params,
                                &policy,
                                Some(&profile.pricing),
                            )?)
                        }
                    }
                })();
                match result {
                    Ok(rec) => writeln!(w, "{}", serde_json::to_string(&rec)?)?,
                    Err(e) => {
                        failures += 1;
                        log::warn!("`{}`: {e:#}", doc.case_id);
                    }
                }
            }
            w.flush()?;
            if failures == docs.len() {
                bail!("every document failed");
            }
        }
        Command::Score {
            candidates,
            references,
            out,
            no_bertscore,
        } => {
            let cands = read_texts(&candidates)?;
            let refs: HashMap<String, String> = read_texts(&references)?.into_iter().collect();
            let embedder = HashedTokenEmbedder::new(DEFAULT_DIM);
            let opts = EvalOptions {
                bertscore: if no_bertscore { None } else { Some(&embedder) },
            };
            let mut scored = Vec::new();
            for (id, cand) in &cands {
                let reference = refs.get(id).ok_or_else(|| anyhow!("no reference for `{id}`"))?;
                scored.push((id.as_str(), evaluate_pair(cand, reference, &opts)?));
            }
            let reports: Vec<EvalReport> = scored.iter().map(|(_, r)| r.clone()).collect();
            let summary = aggregate(&reports);
            let csv = out
                .as_deref()
                .and_then(Path::extension)
                .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
            let mut w = g.sink(out.as_deref())?;
            if csv {
                writeln!(w, "case_id,Length,Rouge-1,Rouge-2,Rouge-L,BLEU,METEOR,BERTScore")?;
                let bert = |b: Option<f64>| b.map_or(String::new(), |v| v.to_string());
                for (id, r) in &scored {
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{},{}",
                        csv_field(id),
                        r.candidate_length,
                        r.rouge1.f1,
                        r.rouge2.f1,
                        r.rouge_l.f1,
                        r.bleu,
                        r.meteor,
                        bert(r.bertscore.map(|b| b.f1))
                    )?;
                }
                writeln!(
                    w,
                    "mean,{},{},{},{},{},{},{}",
                    summary.avg_length,
                    summary.rouge1.f1,
                    summary.rouge2.f1,
                    summary.rouge_l.f1,
                    summary.corpus_bleu,
                    summary.meteor,
                    bert(summary.bertscore.map(|b| b.f1))
                )?;
            } else if out.is_some() {
                let pairs: Vec<ScoredPair<'_>> = scored
                    .iter()
                    .map(|(id, r)| ScoredPair { case_id: id, report: r })
                    .collect();
                let doc = serde_json::json!({ "pairs": pairs, "aggregate": summary });
                writeln!(w, "{}", serde_json::to_string_pretty(&doc)?)?;
            } else {
                for (id, r) in &scored {
                    writeln!(w, "{}", serde_json::to_string(&ScoredPair { case_id: id, report: r })?)?;
                }
                writeln!(w, "{}", serde_json::to_string(&summary)?)?;
            }
            w.flush()?;
        }
        Command::Experiment { config_file } => {
            let path = config_file
                .or(cli.config)
                .ok_or_else(|| anyhow!("experiment needs a configuration file (--config)"))?;
            let mut config = ExperimentConfig::load(&path)?;
            if let Some(d) = &g.out_dir {
                config.output_dir = d.clone();
            }
            if g.endpoint.is_some() && config.endpoint.is_none() {
                config.endpoint = g.endpoint.clone();
            }
            let docs = corpus::ingest(&config.corpus)?;
            let endpoint_globals = Globals {
                endpoint: config.endpoint.clone(),
                api_key: g.api_key.clone(),
                out_dir: None,
                json: g.json,
                seed: config.seed,
            };
            let client = CompletionClient::new(endpoint_globals.completion(&config.provider, &config.profile)?)
                .with_seed(config.seed)
                .with_max_in_flight(config.max_in_flight);
            let emb_kind = match config.embedding.as_str() {
                "builtin" => EmbeddingKind::Builtin,
                "http" => EmbeddingKind::Http,
                other => bail!("unknown embedding provider `{other}`"),
            };
            let emb_globals = Globals {
                endpoint: config.embedding_endpoint.clone().or(config.endpoint.clone()),
                ..endpoint_globals
            };
            let embedder = emb_globals.embedder(&EmbeddingArgs {
                embedding: emb_kind,
                dim: config.embedding_dim,
            })?;
            let token_embedder = HashedTokenEmbedder::new(DEFAULT_DIM);
            let report = experiment::run_experiment(
                &config,
                &docs,
                embedder.as_ref(),
                Some(&token_embedder),
                &client,
                Some(&config.output_dir),
            )?;
            if g.json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.render_markdown()?);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
