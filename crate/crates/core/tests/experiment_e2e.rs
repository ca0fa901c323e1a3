use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use argpipe::corpus::{ingest, CaseDocument};
use argpipe::embedding::{HashedBowProvider, HashedTokenEmbedder, DEFAULT_DIM};
use argpipe::experiment::{run_experiment, ExperimentConfig, ExperimentReport};
use argpipe::summarizer::{
    CompletionClient, CompletionProvider, CompletionRequest, CompletionResponse, MockProvider, ProviderError,
    RecordingProvider, SummaryRecord,
};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../cli/fixtures")
}

fn setup() -> (ExperimentConfig, Vec<CaseDocument>) {
    let config = ExperimentConfig::load(fixtures().join("tiny.conf")).unwrap();
    let corpus = ingest(&config.corpus).unwrap();
    (config, corpus)
}

fn run_with(provider: Arc<dyn CompletionProvider>, out: &Path) -> ExperimentReport {
    let (config, corpus) = setup();
    let client = CompletionClient::new(provider).with_seed(config.seed);
    let embedder = HashedBowProvider::new(config.embedding_dim);
    let tokens = HashedTokenEmbedder::new(DEFAULT_DIM);
    run_experiment(&config, &corpus, &embedder, Some(&tokens), &client, Some(out)).unwrap()
}

/// Fails every request whose prompt mentions `needle` and the given budget.
struct FailOn {
    needle: &'static str,
    max_tokens: usize,
    calls: AtomicUsize,
}

impl CompletionProvider for FailOn {
    fn id(&self) -> String {
        "fail-on".into()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if request.max_tokens == self.max_tokens && request.prompt.contains(self.needle) {
            return Err(ProviderError::fatal("refused"));
        }
        MockProvider::default().complete(request)
    }
}

fn records(dir: &Path, cell: &str) -> Vec<SummaryRecord> {
    std::fs::read_to_string(dir.join("results").join(format!("{cell}.jsonl")))
        .unwrap()
        .lines()
        .filter_map(|l| serde_json::from_str::<serde_json::Value>(l).ok())
        .filter_map(|v| serde_json::from_value(v["summary"].clone()).ok())
        .collect()
}

#[test]
fn report_is_reproducible_and_complete() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run_with(Arc::new(MockProvider::default()), a.path());
    run_with(Arc::new(MockProvider::default()), b.path());
    let md = std::fs::read(a.path().join("report.md")).unwrap();
    assert_eq!(md, std::fs::read(b.path().join("report.md")).unwrap());
    assert_eq!(
        std::fs::read(a.path().join("report.csv")).unwrap(),
        std::fs::read(b.path().join("report.csv")).unwrap()
    );
    assert_eq!(ra.grids.len(), 2);
    for g in &ra.grids {
        assert_eq!(g.rows.len(), 13);
        assert_eq!(g.rows[12].label, "Average");
        assert!(g.rows.iter().all(|r| r.documents == 3));
    }
    assert_eq!(ra.documents, 3);
    assert!(ra.failures.is_empty());
}

#[test]
fn average_row_and_costs_match_records() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_with(Arc::new(MockProvider::default()), dir.path());
    let (config, _) = setup();
    for g in &report.grids {
        let cells = &g.rows[..12];
        let avg = &g.rows[12];
        let mean = |f: fn(&argpipe::experiment::ResultRow) -> f64| cells.iter().map(f).sum::<f64>() / 12.0;
        assert!((avg.rouge1 - mean(|r| r.rouge1)).abs() < 1e-12);
        assert!((avg.rouge_l - mean(|r| r.rouge_l)).abs() < 1e-12);
        assert!((avg.meteor - mean(|r| r.meteor)).abs() < 1e-12);
        assert!((avg.bleu - mean(|r| r.bleu)).abs() < 1e-12);
        assert!((avg.avg_length - mean(|r| r.avg_length)).abs() < 1e-9);

        let mut grid_cost = 0.0;
        for p in config.grid().cells() {
            let cell = argpipe::experiment::cell_name(g.method, &p);
            let recs = records(dir.path(), &cell);
            assert_eq!(recs.len(), 3);
            let priced: f64 = recs.iter().map(|r| config.profile.pricing.cost(&r.usage)).sum();
            let row = cells
                .iter()
                .find(|r| r.label == format!("({}, {})", p.temperature, p.max_tokens))
                .unwrap();
            assert!((row.cost - priced).abs() < 1e-12, "{cell}");
            grid_cost += priced;
        }
        assert!((avg.cost - grid_cost).abs() < 1e-9);
    }
}

#[test]
fn resume_reuses_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let first = Arc::new(RecordingProvider::new(MockProvider::default()));
    run_with(first.clone(), dir.path());
    assert!(first.calls() > 0);
    let before = std::fs::read(dir.path().join("report.md")).unwrap();

    let second = Arc::new(RecordingProvider::new(MockProvider::default()));
    run_with(second.clone(), dir.path());
    assert_eq!(second.calls(), 0);
    assert_eq!(std::fs::read(dir.path().join("report.md")).unwrap(), before);

    // a torn trailing line is recomputed, nothing else
    let cell = dir.path().join("results/baseline_t0_m32.jsonl");
    let text = std::fs::read_to_string(&cell).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let last = lines.pop().unwrap();
    let torn = format!("{}\n{}", lines.join("\n"), &last[..last.len() / 2]);
    std::fs::write(&cell, torn).unwrap();
    let third = Arc::new(RecordingProvider::new(MockProvider::default()));
    run_with(third.clone(), dir.path());
    assert!(third.calls() > 0);
    assert!(third.requests().iter().all(|r| r.max_tokens == 32));
    assert_eq!(std::fs::read(dir.path().join("report.md")).unwrap(), before);
}

#[test]
fn a_failing_document_leaves_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let provider = Arc::new(FailOn {
        needle: "employ",
        max_tokens: 64,
        calls: AtomicUsize::new(0),
    });
    let report = run_with(provider.clone(), dir.path());
    assert!(provider.calls.load(Ordering::SeqCst) > 0);
    assert_eq!(report.documents, 2);
    let failed: Vec<&str> = report.failures.iter().map(|f| f.case_id.as_str()).collect();
    assert_eq!(failed, ["employment-2020-11"]);
    for g in &report.grids {
        assert!(g.rows.iter().all(|r| r.documents == 2), "{:?}", g.method);
    }
    assert!(report.comparison.rows.iter().all(|r| r.row.documents == 2));
    let md = report.render_markdown().unwrap();
    assert!(md.contains("employment-2020-11"));
}
