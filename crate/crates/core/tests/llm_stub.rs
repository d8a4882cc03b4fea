mod common;

use std::collections::BTreeSet;
use std::sync::atomic::Ordering;
use std::sync::Arc;

use common::spawn_stub;
use crossmoral_core::corpus::{Dataset, Document, FoundationLabel};
use crossmoral_core::llm::{
    block_on, AuditLog, EndpointConfig, LlmClient, Outcome, PromptBuilder, PromptLanguage, Shot, Translator,
};
use crossmoral_core::Error;

fn fast(url: String) -> EndpointConfig {
    let mut cfg = EndpointConfig::new(url, "stub");
    cfg.max_retries = 2;
    cfg.backoff_base_ms = 1;
    cfg.backoff_max_ms = 4;
    cfg
}

fn bench(texts: &[&str]) -> Dataset {
    let docs = texts
        .iter()
        .enumerate()
        .map(|(i, t)| Document::new(format!("q{i:02}"), *t, "en", FoundationLabel::Care, "stub"))
        .collect();
    Dataset::new("q", docs).unwrap()
}

fn annotate_all(cfg: EndpointConfig, d: &Dataset) -> crossmoral_core::Result<Vec<crossmoral_core::llm::Annotation>> {
    let builder = PromptBuilder::new(PromptLanguage::En, None, Vec::new(), d.ids())?;
    let client = LlmClient::new(cfg)?;
    block_on(client.classify_batch(d.documents(), |doc| builder.build(doc), "llm"))?
}

#[test]
fn always_failing_endpoint_degrades_to_unknown() {
    let stub = spawn_stub();
    let d = bench(&["fail 1", "fail 2", "fail 3", "fail 4"]);
    let anns = annotate_all(fast(stub.chat_url()), &d).unwrap();
    assert_eq!(anns.len(), 4);
    for a in &anns {
        assert_eq!(a.outcome, Outcome::Failed);
        assert_eq!(a.prediction.labels, BTreeSet::from([FoundationLabel::Unknown]));
        assert_eq!(a.attempts, 3);
        assert!(a.error.is_some());
    }
    assert_eq!(stub.requests().len(), 12);
}

#[test]
fn one_malformed_reply_in_ten() {
    let stub = spawn_stub();
    let mut texts: Vec<String> = (0..10).map(|i| format!("label:{}", ["care", "loyalty"][i % 2])).collect();
    texts[6] = "garbage".into();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let d = bench(&refs);
    let anns = annotate_all(fast(stub.chat_url()), &d).unwrap();
    let unknown: Vec<usize> = anns
        .iter()
        .enumerate()
        .filter(|(_, a)| a.prediction.labels.contains(&FoundationLabel::Unknown))
        .map(|(i, _)| i)
        .collect();
    assert_eq!(unknown, vec![6]);
    assert_eq!(anns[6].outcome, Outcome::Unparsed);
    assert_eq!(anns[6].prediction.rationale.as_deref(), Some("I cannot say."));
    assert_eq!(anns[3].prediction.labels, BTreeSet::from([FoundationLabel::Loyalty]));
}

#[test]
fn non_chat_body_is_a_failure_not_a_crash() {
    let stub = spawn_stub();
    let d = bench(&["envelope", "label:care"]);
    let anns = annotate_all(fast(stub.chat_url()), &d).unwrap();
    assert_eq!(anns[0].outcome, Outcome::Failed);
    assert_eq!(anns[1].outcome, Outcome::Parsed);
}

#[test]
fn auth_rejection_aborts_the_batch() {
    let stub = spawn_stub();
    let d = bench(&["label:care", "auth", "label:care"]);
    match annotate_all(fast(stub.chat_url()), &d) {
        Err(Error::Auth(401)) => {}
        other => panic!("expected auth error, got {other:?}"),
    }
}

#[test]
fn parallelism_is_bounded() {
    let stub = spawn_stub();
    stub.state.delay_ms.store(20, Ordering::SeqCst);
    let texts: Vec<String> = (0..24).map(|i| format!("label:care {i}")).collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let d = bench(&refs);
    let mut cfg = fast(stub.chat_url());
    cfg.max_parallel = 2;
    let anns = annotate_all(cfg, &d).unwrap();
    assert_eq!(anns.len(), 24);
    let peak = stub.state.max_in_flight.load(Ordering::SeqCst);
    assert!((1..=2).contains(&peak), "peak {peak}");
    let ids: Vec<&str> = anns.iter().map(|a| a.prediction.doc_id.as_str()).collect();
    let want: Vec<&str> = d.documents().iter().map(|x| x.id.as_str()).collect();
    assert_eq!(ids, want);
}

#[test]
fn bearer_token_comes_from_the_environment() {
    let stub = spawn_stub();
    let d = bench(&["label:care"]);
    let mut cfg = fast(stub.chat_url());
    cfg.token_env = Some("CROSSMORAL_TEST_TOKEN_MISSING".into());
    // an unset variable is a configuration error, caught before any request
    assert!(annotate_all(cfg, &d).is_err());
    assert!(stub.requests().is_empty());
}

#[test]
fn prompts_follow_the_chat_layout() {
    let stub = spawn_stub();
    let d = bench(&["label:care"]);
    let shots = vec![
        Shot::from_document(&Document::new("x1", "exemplar one", "en", FoundationLabel::Loyalty, "t"), "team"),
        Shot::from_document(&Document::new("x2", "exemplar two", "en", FoundationLabel::Sanctity, "t"), "purity"),
    ];
    let builder = PromptBuilder::new(PromptLanguage::En, Some("Italian"), shots, d.ids()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let audit = Arc::new(AuditLog::open(dir.path().join("audit.jsonl")).unwrap());
    let client = LlmClient::with_audit(fast(stub.chat_url()), audit).unwrap();
    block_on(client.classify_batch(d.documents(), |doc| builder.build(doc), "llm")).unwrap().unwrap();
    let req = &stub.requests()[0];
    let msgs = req["messages"].as_array().unwrap();
    let roles: Vec<&str> = msgs.iter().map(|m| m["role"].as_str().unwrap()).collect();
    assert_eq!(roles, ["system", "user", "assistant", "user", "assistant", "user"]);
    assert!(msgs[0]["content"].as_str().unwrap().contains("Italian"));
    let reply: serde_json::Value = serde_json::from_str(msgs[4]["content"].as_str().unwrap()).unwrap();
    assert_eq!(reply["labels"], "sanctity");
    assert_eq!(req["model"], "stub");
    let audit_lines = std::fs::read_to_string(dir.path().join("audit.jsonl")).unwrap();
    assert_eq!(audit_lines.lines().count(), 1);
}

#[test]
fn translation_cache_avoids_repeat_calls() {
    let stub = spawn_stub();
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.jsonl");
    let tr = Translator::new(fast(stub.translate_url()))
        .unwrap()
        .with_cache_file(&cache)
        .unwrap();
    let texts: Vec<String> = ["abc", "xyz", "abc"].iter().map(|s| s.to_string()).collect();
    let out = block_on(tr.translate_batch(&texts, "zh", "en")).unwrap().unwrap();
    assert_eq!(out, vec![Some("cba".into()), Some("zyx".into()), Some("cba".into())]);
    assert_eq!(tr.upstream_items(), 2);
    let again = block_on(tr.translate_batch(&texts[..1], "zh", "en")).unwrap().unwrap();
    assert_eq!(again, vec![Some("cba".to_string())]);
    assert_eq!(stub.state.translate_calls.load(Ordering::SeqCst), 1);
    // a different direction is a different key
    block_on(tr.translate_batch(&texts[..1], "it", "en")).unwrap().unwrap();
    assert_eq!(stub.state.translate_calls.load(Ordering::SeqCst), 2);

    // the persisted cache serves a fresh translator
    let fresh = Translator::new(fast(stub.translate_url()))
        .unwrap()
        .with_cache_file(&cache)
        .unwrap();
    assert_eq!(fresh.cached(), 3);
    block_on(fresh.translate_batch(&texts, "zh", "en")).unwrap().unwrap();
    assert_eq!(stub.state.translate_calls.load(Ordering::SeqCst), 2);
}

#[test]
fn failed_translation_chunk_yields_none_for_that_chunk_only() {
    let stub = spawn_stub();
    let tr = Translator::new(fast(stub.translate_url())).unwrap().with_chunk_size(2);
    let texts: Vec<String> = ["a1", "a2", "FAIL", "b2", "c1"].iter().map(|s| s.to_string()).collect();
    let out = block_on(tr.translate_batch(&texts, "zh", "en")).unwrap().unwrap();
    assert_eq!(
        out,
        vec![Some("1a".into()), Some("2a".into()), None, None, Some("1c".into())]
    );
    // failures are not cached, so a retry goes upstream again
    let before = stub.state.translate_calls.load(Ordering::SeqCst);
    block_on(tr.translate_batch(&texts[2..3], "zh", "en")).unwrap().unwrap();
    assert!(stub.state.translate_calls.load(Ordering::SeqCst) > before);
}
