//! Corpus loading, validation, splitting and statistics.
//!
//! A corpus file holds one JSON object per line:
//!
//! ```text
//! {"case_id": "c1", "sentences": [{"text": "...", "irc": "issue"}], "reference_summary": "..."}
//! ```
//!
//! `irc` is one of `issue`, `reason`, `conclusion` or `null`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenize::Tokenizer;

/// Issue / Reason / Conclusion sentence type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IrcLabel {
    Issue,
    Reason,
    Conclusion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceRecord {
    pub index: usize,
    pub text: String,
    pub irc: Option<IrcLabel>,
}

impl SentenceRecord {
    pub fn is_irc(&self) -> bool {
        self.irc.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseDocument {
    pub case_id: String,
    pub sentences: Vec<SentenceRecord>,
    pub reference_summary: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct WireSentence {
    text: String,
    #[serde(default)]
    irc: Option<IrcLabel>,
}

#[derive(Serialize, Deserialize)]
struct WireDocument {
    case_id: String,
    sentences: Vec<WireSentence>,
    #[serde(default)]
    reference_summary: Option<String>,
}

impl CaseDocument {
    /// Builds a document from sentence texts and optional labels, checking
    /// the sentence invariants.
    pub fn new(
        case_id: impl Into<String>,
        sentences: impl IntoIterator<Item = (String, Option<IrcLabel>)>,
        reference_summary: Option<String>,
    ) -> std::result::Result<Self, String> {
        let case_id = case_id.into();
        if case_id.trim().is_empty() {
            return Err("case_id is empty".into());
        }
        let sentences: Vec<SentenceRecord> = sentences
            .into_iter()
            .enumerate()
            .map(|(index, (text, irc))| SentenceRecord { index, text, irc })
            .collect();
        if sentences.is_empty() {
            return Err("document has no sentences".into());
        }
        if let Some(s) = sentences.iter().find(|s| s.text.trim().is_empty()) {
            return Err(format!("sentence {} has empty text", s.index));
        }
        Ok(Self {
            case_id,
            sentences,
            reference_summary,
        })
    }

    /// Builds a document from unsegmented text using [`split_sentences`].
    pub fn from_raw_text(
        case_id: impl Into<String>,
        text: &str,
        reference_summary: Option<String>,
    ) -> std::result::Result<Self, String> {
        Self::new(
            case_id,
            split_sentences(text).into_iter().map(|s| (s, None)),
            reference_summary,
        )
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Sentences in `start..end` joined by single spaces.
    pub fn span_text(&self, start: usize, end: usize) -> String {
        self.sentences[start..end]
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn full_text(&self) -> String {
        self.span_text(0, self.sentences.len())
    }

    pub fn token_count(&self, tokenizer: &dyn Tokenizer) -> usize {
        self.sentences.iter().map(|s| tokenizer.count(&s.text)).sum()
    }

    pub fn summary_token_count(&self, tokenizer: &dyn Tokenizer) -> Option<usize> {
        self.reference_summary.as_deref().map(|s| tokenizer.count(s))
    }

    pub fn to_json_line(&self) -> String {
        let wire = WireDocument {
            case_id: self.case_id.clone(),
            sentences: self
                .sentences
                .iter()
                .map(|s| WireSentence {
                    text: s.text.clone(),
                    irc: s.irc,
                })
                .collect(),
            reference_summary: self.reference_summary.clone(),
        };
        serde_json::to_string(&wire).expect("corpus records always serialize")
    }
}

/// Rule-based fallback splitter for raw text: a sentence ends at `.`, `?` or
/// `!` when followed by whitespace and then an uppercase letter, a quote or a
/// digit.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for (k, &(i, c)) in chars.iter().enumerate() {
        if !matches!(c, '.' | '?' | '!') {
            continue;
        }
        let Some(&(_, next)) = chars.get(k + 1) else {
            continue;
        };
        if !next.is_whitespace() {
            continue;
        }
        let following = chars[k + 1..].iter().map(|&(_, c)| c).find(|c| !c.is_whitespace());
        let opens = matches!(following, Some(f) if f.is_uppercase() || f.is_ascii_digit() || matches!(f, '"' | '\'' | '“' | '‘'));
        if opens {
            let end = i + c.len_utf8();
            let piece = text[start..end].trim();
            if !piece.is_empty() {
                out.push(piece.to_string());
            }
            start = end;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

/// Parses a corpus from line-delimited JSON. Blank lines are skipped.
pub fn parse_corpus(reader: impl BufRead) -> Result<Vec<CaseDocument>> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|e| Error::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: WireDocument = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        let doc = CaseDocument::new(
            wire.case_id,
            wire.sentences.into_iter().map(|s| (s.text, s.irc)),
            wire.reference_summary,
        )
        .map_err(|reason| Error::MalformedRecord { line: line_no, reason })?;
        if !seen.insert(doc.case_id.clone()) {
            return Err(Error::DuplicateCaseId(doc.case_id));
        }
        docs.push(doc);
    }
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(docs)
}

pub fn ingest(path: impl AsRef<Path>) -> Result<Vec<CaseDocument>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file))
}

pub fn serialize_corpus(docs: &[CaseDocument]) -> String {
    let mut out = String::new();
    for d in docs {
        out.push_str(&d.to_json_line());
        out.push('\n');
    }
    out
}

pub fn write_corpus(path: impl AsRef<Path>, docs: &[CaseDocument]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(serialize_corpus(docs).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::InvalidRatios(format!("{self:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidRatios(format!("{self:?} does not sum to 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
}

/// Seeded shuffle followed by contiguous slicing into train / validation /
/// test. Validation and test sizes are `round(n * ratio)`; the training split
/// takes everything left over.
pub fn split_corpus(docs: &[CaseDocument], ratios: SplitRatios, seed: u64) -> Result<CorpusSplit> {
    ratios.validate()?;
    let n = docs.len();
    if n < 3 {
        return Err(Error::CorpusTooSmall(n));
    }
    let mut ids: Vec<String> = docs.iter().map(|d| d.case_id.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    let n_val = ((n as f64 * ratios.validation).round() as usize).min(n);
    let n_test = ((n as f64 * ratios.test).round() as usize).min(n - n_val);
    let n_train = n - n_val - n_test;

    let test = ids.split_off(n_train + n_val);
    let validation = ids.split_off(n_train);
    Ok(CorpusSplit {
        train: ids,
        validation,
        test,
        seed,
    })
}

/// Keeps only the documents whose ids are listed, in corpus order.
pub fn select<'a>(docs: &'a [CaseDocument], ids: &[String]) -> Vec<&'a CaseDocument> {
    let wanted: HashSet<&str> = ids.iter().map(String::as_str).collect();
    docs.iter().filter(|d| wanted.contains(d.case_id.as_str())).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenStats {
    pub count: usize,
    pub avg: f64,
    pub max: usize,
    pub min: usize,
}

impl TokenStats {
    pub fn from_counts(counts: &[usize]) -> Option<Self> {
        let max = *counts.iter().max()?;
        let min = *counts.iter().min()?;
        let avg = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
        Some(Self {
            count: counts.len(),
            avg,
            max,
            min,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub tokenizer: String,
    pub documents: TokenStats,
    /// Absent when no document carries a reference summary.
    pub summaries: Option<TokenStats>,
}

pub fn corpus_stats(docs: &[CaseDocument], tokenizer: &dyn Tokenizer) -> Result<CorpusStats> {
    let doc_counts: Vec<usize> = docs.iter().map(|d| d.token_count(tokenizer)).collect();
    let documents = TokenStats::from_counts(&doc_counts).ok_or(Error::EmptyCorpus)?;
    let summary_counts: Vec<usize> = docs.iter().filter_map(|d| d.summary_token_count(tokenizer)).collect();
    Ok(CorpusStats {
        tokenizer: tokenizer.id().to_string(),
        documents,
        summaries: TokenStats::from_counts(&summary_counts),
    })
}

impl CorpusStats {
    /// Markdown table with one row per record type.
    pub fn render(&self) -> String {
        let mut out =
            String::from("| Type | Avg. # of tokens | Max. # of tokens | Min. # of tokens |\n|---|---|---|---|\n");
        let mut row = |name: &str, s: &TokenStats| {
            let _ = writeln!(out, "| {name} | {:.0} | {} | {} |", s.avg, s.max, s.min);
        };
        row("Court decision", &self.documents);
        if let Some(s) = &self.summaries {
            row("Human-written summary", s);
        }
        let _ = writeln!(out, "\nTokens counted with the `{}` tokenizer.", self.tokenizer);
        out
    }
}
