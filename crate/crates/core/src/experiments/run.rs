use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Approach, RunConfig};
use super::output::{sha256_bytes, sha256_file, InputDigest, Manifest, RunLock, Staging};
use crate::corpus::{
    load_dataset_with, read_predictions, write_predictions_to, DataFormat, Dataset, FoundationLabel, LoadOptions,
    Prediction,
};
use crate::embed::{build_microframes, load_vectors, BackgroundSource, EmbeddingStore, FrameAxisScorer, SemanticAnchors};
use crate::error::{Error, Result};
use crate::eval::{evaluate, report, EvalReport, Scope};
use crate::lexicon::{load_lexicon, load_sentiment, score_count, score_prob, Lexicon, LexiconKind};
use crate::llm::{block_on, Annotation, AuditLog, Decoding, LlmClient, PromptBuilder, Shot};
use crate::segment::{tokenize_document, TokenSequence, Vocabulary};

pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub out_dir: PathBuf,
    pub predictions: Vec<Prediction>,
    /// Covered-only and all-documents reports, in that order.
    pub reports: [EvalReport; 2],
    pub manifest: Manifest,
}

/// Extra per-document records some approaches produce.
enum Details {
    None,
    FrameAxis(Vec<FrameAxisRecord>),
    Llm(Vec<Annotation>),
}

#[derive(Serialize)]
struct FrameAxisRecord {
    doc_id: String,
    in_vocab_tokens: usize,
    bias: BTreeMap<FoundationLabel, f64>,
    z: BTreeMap<FoundationLabel, f64>,
}

/// Loads a dataset, inferring the format from the extension when not given.
pub fn load_data(path: &Path, format: Option<DataFormat>, language: Option<&str>) -> Result<Dataset> {
    let format = match format.or_else(|| DataFormat::from_path(path)) {
        Some(f) => f,
        None => return Err(Error::Config(format!("cannot infer data format of {}", path.display()))),
    };
    let opts = LoadOptions {
        language: language.map(str::to_string),
        ..Default::default()
    };
    load_dataset_with(path, format, &opts)
}

/// Runs one configured experiment end to end under an exclusive lock on
/// the output directory. On failure, partial outputs are quarantined.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let _lock = RunLock::acquire(&cfg.out)?;
    let mut staging = Staging::new(&cfg.out)?;
    match execute(cfg, &mut staging) {
        Ok((predictions, reports, manifest)) => {
            let out_dir = staging.commit()?;
            Ok(RunOutput {
                out_dir,
                predictions,
                reports,
                manifest,
            })
        }
        Err(e) => {
            match staging.quarantine("failed") {
                Ok(q) => log::error!("run failed; partial outputs moved to {}", q.display()),
                Err(qe) => log::error!("run failed and quarantine failed: {qe}"),
            }
            Err(e)
        }
    }
}

fn execute(cfg: &RunConfig, staging: &mut Staging) -> Result<(Vec<Prediction>, [EvalReport; 2], Manifest)> {
    let bench = load_data(&cfg.data.bench, cfg.data.format, cfg.data.language.as_deref())?;
    log::info!("{}: {} benchmark documents", cfg.run_name(), bench.len());
    let (predictions, details) = predict(cfg, &bench, staging)?;

    let reports = [
        evaluate(&bench, &predictions, Scope::CoveredOnly)?,
        evaluate(&bench, &predictions, Scope::All)?,
    ];
    let name = cfg.run_name();
    let mut outputs = BTreeMap::new();

    let mut buf = Vec::new();
    write_predictions_to(&mut buf, &predictions)?;
    outputs.insert(PREDICTIONS_FILE.to_string(), staging.write(PREDICTIONS_FILE, &buf)?);

    match &details {
        Details::None => {}
        Details::FrameAxis(recs) => {
            let bytes = jsonl(recs)?;
            outputs.insert("frameaxis.jsonl".into(), staging.write("frameaxis.jsonl", &bytes)?);
        }
        Details::Llm(anns) => {
            let bytes = jsonl(anns)?;
            outputs.insert("annotations.jsonl".into(), staging.write("annotations.jsonl", &bytes)?);
        }
    }

    let rows: Vec<(&str, &EvalReport)> = reports.iter().map(|r| (name.as_str(), r)).collect();
    let csv = report::reports_csv(&rows);
    outputs.insert("report.csv".into(), staging.write("report.csv", csv.as_bytes())?);
    let md = render_markdown(&name, cfg, &reports);
    outputs.insert("report.md".into(), staging.write("report.md", md.as_bytes())?);
    let json = serde_json::to_vec_pretty(&ReportFile {
        name: &name,
        approach: cfg.approach.as_str(),
        seed: cfg.seed,
        reports: &reports,
    })?;
    outputs.insert("report.json".into(), staging.write("report.json", &json)?);

    let manifest = Manifest {
        tool: "crossmoral".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        name,
        approach: cfg.approach.to_string(),
        seed: cfg.seed,
        config_sha256: config_digest(cfg)?,
        inputs: input_digests(cfg)?,
        outputs,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    staging.write(MANIFEST_FILE, &bytes)?;
    Ok((predictions, reports, manifest))
}

#[derive(Serialize)]
struct ReportFile<'a> {
    name: &'a str,
    approach: &'a str,
    seed: u64,
    reports: &'a [EvalReport; 2],
}

fn jsonl<T: Serialize>(items: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for it in items {
        serde_json::to_writer(&mut out, it)?;
        out.push(b'\n');
    }
    Ok(out)
}

fn render_markdown(name: &str, cfg: &RunConfig, reports: &[EvalReport; 2]) -> String {
    let rows: Vec<(&str, &EvalReport)> = reports.iter().map(|r| (name, r)).collect();
    let mut md = format!(
        "# {name}\n\napproach: {}  \nseed: {}  \ndocuments: {}, covered: {}\n\n",
        cfg.approach, cfg.seed, reports[1].n_documents, reports[1].n_covered
    );
    md.push_str(&report::reports_markdown(&rows));
    let gap = (reports[0].f1_weighted - reports[1].f1_weighted).abs();
    if gap >= 0.005 {
        md.push_str(&format!(
            "\nNote: weighted F1 differs by {gap:.3} between covered-only and all-document scoring.\n"
        ));
    }
    md
}

/// Digest of the config with the output directory blanked, so runs that
/// differ only in where they write share a digest.
fn config_digest(cfg: &RunConfig) -> Result<String> {
    let mut c = cfg.clone();
    c.out = PathBuf::new();
    Ok(sha256_bytes(&serde_json::to_vec(&c)?))
}

fn input_digests(cfg: &RunConfig) -> Result<BTreeMap<String, InputDigest>> {
    let mut m = BTreeMap::new();
    let mut add = |role: &str, p: &Path| -> Result<()> {
        m.insert(
            role.to_string(),
            InputDigest {
                path: p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                sha256: sha256_file(p)?,
            },
        );
        Ok(())
    };
    add("bench", &cfg.data.bench)?;
    if let Some(l) = &cfg.lexicon {
        add("lexicon", &l.path)?;
        if let Some(s) = &l.sentiment {
            add("sentiment", s)?;
        }
    }
    if let Some(e) = &cfg.embedding {
        add("embedding", &e.path)?;
    }
    if let Some(l) = &cfg.llm {
        if let Some(s) = &l.shots_file {
            add("shots", s)?;
        }
    }
    if let Some(x) = &cfg.exchange {
        add("exchange", &x.predictions)?;
    }
    Ok(m)
}

fn load_lexicon_for(cfg: &RunConfig, kind: LexiconKind) -> Result<Lexicon> {
    let l = cfg.lexicon.as_ref().ok_or_else(|| Error::Config("missing [lexicon]".into()))?;
    let lex = load_lexicon(&l.path, kind)?;
    match &l.sentiment {
        Some(s) => lex.with_polarity(&load_sentiment(s)?),
        None => Ok(lex),
    }
}

fn load_store(cfg: &RunConfig) -> Result<EmbeddingStore> {
    let e = cfg.embedding.as_ref().ok_or_else(|| Error::Config("missing [embedding]".into()))?;
    load_vectors(&e.path)
}

fn tokenize_all(bench: &Dataset, vocab: &Vocabulary) -> Vec<TokenSequence> {
    bench.documents().par_iter().map(|d| tokenize_document(d, Some(vocab))).collect()
}

fn predict(cfg: &RunConfig, bench: &Dataset, staging: &mut Staging) -> Result<(Vec<Prediction>, Details)> {
    match cfg.approach {
        Approach::LexiconCount | Approach::LexiconProb => {
            let kind = if cfg.approach == Approach::LexiconCount {
                LexiconKind::Count
            } else {
                LexiconKind::Probability
            };
            let lex = load_lexicon_for(cfg, kind)?;
            let vocab: Vocabulary = lex.terms().collect();
            let tokens = tokenize_all(bench, &vocab);
            let preds = bench
                .documents()
                .par_iter()
                .zip(tokens.par_iter())
                .map(|(d, t)| match kind {
                    LexiconKind::Count => score_count(&d.id, t, &lex),
                    LexiconKind::Probability => score_prob(&d.id, t, &lex),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((preds, Details::None))
        }
        Approach::SemanticSim => {
            let lex = load_lexicon_for(cfg, LexiconKind::Count)?;
            let store = load_store(cfg)?;
            let vocab = embedding_vocabulary(&lex, &store);
            let anchors = SemanticAnchors::build(&lex, &store)?;
            let tokens = tokenize_all(bench, &vocab);
            let preds = bench
                .documents()
                .par_iter()
                .zip(tokens.par_iter())
                .map(|(d, t)| anchors.score(&d.id, t, &store))
                .collect();
            Ok((preds, Details::None))
        }
        Approach::Frameaxis => {
            let lex = load_lexicon_for(cfg, LexiconKind::Count)?;
            let store = load_store(cfg)?;
            let vocab = embedding_vocabulary(&lex, &store);
            let tokens = tokenize_all(bench, &vocab);
            let frames = build_microframes(&lex, &store)?;
            let background: Vec<String> = match cfg.frameaxis.background {
                BackgroundSource::Corpus => tokens.iter().flat_map(|t| t.tokens.iter().cloned()).collect(),
                BackgroundSource::Vocabulary => store.words().to_vec(),
            };
            let scorer = FrameAxisScorer::new(
                &store,
                frames,
                &background,
                cfg.frameaxis.bootstrap,
                cfg.seed,
                cfg.frameaxis.z_crit,
                format!("frameaxis+{}", lex.name()),
            )?;
            let scored = bench
                .documents()
                .par_iter()
                .zip(tokens.par_iter())
                .map(|(d, t)| scorer.score(&d.id, t))
                .collect::<Result<Vec<_>>>()?;
            let mut preds = Vec::with_capacity(scored.len());
            let mut recs = Vec::new();
            for (s, p) in scored {
                if let Some(s) = s {
                    recs.push(FrameAxisRecord {
                        doc_id: p.doc_id.clone(),
                        in_vocab_tokens: s.in_vocab_tokens,
                        bias: s.bias,
                        z: s.z,
                    });
                }
                preds.push(p);
            }
            Ok((preds, Details::FrameAxis(recs)))
        }
        Approach::LlmFewshot => {
            let anns = run_llm(cfg, bench, staging)?;
            Ok((anns.iter().map(|a| a.prediction.clone()).collect(), Details::Llm(anns)))
        }
        Approach::ExchangeIngest => {
            let x = cfg.exchange.as_ref().ok_or_else(|| Error::Config("missing [exchange]".into()))?;
            Ok((read_predictions(&x.predictions)?, Details::None))
        }
    }
}

fn embedding_vocabulary(lex: &Lexicon, store: &EmbeddingStore) -> Vocabulary {
    let mut v: Vocabulary = lex.terms().collect();
    v.extend(store.words().iter().map(String::as_str));
    v
}

/// Loads few-shot exemplars by id, in the configured order.
pub fn load_shots(
    path: &Path,
    ids: &[String],
    rationales: &BTreeMap<String, String>,
    language: Option<&str>,
) -> Result<Vec<Shot>> {
    let data = load_data(path, None, language)?;
    ids.iter()
        .map(|id| {
            let doc = data
                .get(id)
                .ok_or_else(|| Error::Config(format!("shot id {id:?} not found in {}", path.display())))?;
            Ok(Shot::from_document(doc, rationales.get(id).map_or("", String::as_str)))
        })
        .collect()
}

fn run_llm(cfg: &RunConfig, bench: &Dataset, staging: &mut Staging) -> Result<Vec<Annotation>> {
    let llm = cfg.llm.as_ref().ok_or_else(|| Error::Config("missing [llm]".into()))?;
    let shots = match &llm.shots_file {
        Some(p) => load_shots(p, &llm.shot_ids, &llm.shot_rationales, cfg.data.language.as_deref())?,
        None => Vec::new(),
    };
    let builder = PromptBuilder::new(llm.prompt_language, llm.culture.as_deref(), shots, bench.ids())?
        .with_decoding(Decoding {
            temperature: llm.temperature,
            max_tokens: llm.max_tokens,
        });
    let audit = Arc::new(AuditLog::open(staging.path("audit.jsonl"))?);
    staging.track("audit.jsonl");
    let client = LlmClient::with_audit(llm.endpoint.clone(), audit)?;
    let approach = format!("llm:{}:{}", llm.endpoint.model, llm.prompt_language);
    let anns = block_on(client.classify_batch(bench.documents(), |d| builder.build(d), &approach))??;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for a in &anns {
        *counts.entry(format!("{:?}", a.outcome).to_lowercase()).or_default() += 1;
    }
    log::info!("llm outcomes: {counts:?}");
    Ok(anns)
}
