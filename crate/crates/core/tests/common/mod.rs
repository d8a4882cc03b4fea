//! Shared fixtures and stub HTTP endpoints for integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{Json, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::Router;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crossmoral_core::corpus::FoundationLabel;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal via Box-Muller.
pub fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| gaussian(rng)).collect()
}

// ---------------------------------------------------------------------------
// Stub endpoint

#[derive(Default)]
pub struct StubState {
    pub chat_requests: Mutex<Vec<Value>>,
    pub translate_items: AtomicUsize,
    pub translate_calls: AtomicUsize,
    in_flight: AtomicUsize,
    pub max_in_flight: AtomicUsize,
    pub delay_ms: AtomicUsize,
}

pub struct Stub {
    pub base: String,
    pub state: Arc<StubState>,
    _rt: tokio::runtime::Runtime,
}

impl Stub {
    pub fn chat_url(&self) -> String {
        format!("{}/v1/chat/completions", self.base)
    }

    pub fn translate_url(&self) -> String {
        format!("{}/translate", self.base)
    }

    pub fn requests(&self) -> Vec<Value> {
        self.state.chat_requests.lock().unwrap().clone()
    }
}

struct InFlight(Arc<StubState>);

impl InFlight {
    fn enter(s: &Arc<StubState>) -> Self {
        let now = s.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        s.max_in_flight.fetch_max(now, Ordering::SeqCst);
        Self(s.clone())
    }
}

impl Drop for InFlight {
    fn drop(&mut self) {
        self.0.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

/// The target document's text selects the behaviour:
/// `label:<labels>` valid JSON reply, `prose:<text>` free text,
/// `garbage` text without labels, `fail` HTTP 500, `auth` HTTP 401,
/// `envelope` a 200 whose body is not a chat completion.
async fn chat(State(s): State<Arc<StubState>>, Json(body): Json<Value>) -> Response {
    let _guard = InFlight::enter(&s);
    s.chat_requests.lock().unwrap().push(body.clone());
    let target = body["messages"]
        .as_array()
        .and_then(|m| m.last())
        .and_then(|m| m["content"].as_str())
        .unwrap_or("")
        .to_string();
    // later documents answer sooner, so completion order differs from input order
    let n = target.bytes().fold(0usize, |a, b| a.wrapping_mul(31).wrapping_add(b as usize));
    let delay = s.delay_ms.load(Ordering::SeqCst);
    if delay > 0 {
        tokio::time::sleep(Duration::from_millis((n % delay) as u64)).await;
    }
    let content = if let Some(labels) = target.strip_prefix("label:") {
        json!({"rationale": "stub", "labels": labels}).to_string()
    } else if let Some(text) = target.strip_prefix("prose:") {
        format!("Sure. {text}")
    } else if target.starts_with("garbage") {
        "I cannot say.".to_string()
    } else if target.starts_with("fail") {
        return (StatusCode::INTERNAL_SERVER_ERROR, "boom").into_response();
    } else if target.starts_with("auth") {
        return (StatusCode::UNAUTHORIZED, "no").into_response();
    } else if target.starts_with("envelope") {
        return (StatusCode::OK, "not json").into_response();
    } else {
        json!({"rationale": "default", "labels": "none"}).to_string()
    };
    Json(json!({"choices": [{"message": {"role": "assistant", "content": content}}]})).into_response()
}

/// Reverses each string; any item containing `FAIL` fails the whole call.
async fn translate(State(s): State<Arc<StubState>>, Json(body): Json<Value>) -> Response {
    let _guard = InFlight::enter(&s);
    s.translate_calls.fetch_add(1, Ordering::SeqCst);
    let q: Vec<String> = body["q"]
        .as_array()
        .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
        .unwrap_or_default();
    s.translate_items.fetch_add(q.len(), Ordering::SeqCst);
    let delay = s.delay_ms.load(Ordering::SeqCst);
    if delay > 0 {
        tokio::time::sleep(Duration::from_millis(delay as u64)).await;
    }
    if q.iter().any(|t| t.contains("FAIL")) {
        return (StatusCode::INTERNAL_SERVER_ERROR, "boom").into_response();
    }
    let out: Vec<String> = q.iter().map(|t| t.chars().rev().collect()).collect();
    Json(json!({ "translations": out })).into_response()
}

pub fn spawn_stub() -> Stub {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .enable_all()
        .build()
        .unwrap();
    let state = Arc::new(StubState::default());
    let app = Router::new()
        .route("/v1/chat/completions", post(chat))
        .route("/translate", post(translate))
        .with_state(state.clone());
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    rt.spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    Stub {
        base: format!("http://{addr}"),
        state,
        _rt: rt,
    }
}

// ---------------------------------------------------------------------------
// Corpus fixtures

pub const SEEDS: [(&str, FoundationLabel, &str); 20] = [
    ("kind", FoundationLabel::Care, "virtue"),
    ("help", FoundationLabel::Care, "virtue"),
    ("cruel", FoundationLabel::Care, "vice"),
    ("harm*", FoundationLabel::Care, "vice"),
    ("fair", FoundationLabel::Fairness, "virtue"),
    ("just", FoundationLabel::Fairness, "virtue"),
    ("cheat", FoundationLabel::Fairness, "vice"),
    ("unfair", FoundationLabel::Fairness, "vice"),
    ("loyal", FoundationLabel::Loyalty, "virtue"),
    ("team", FoundationLabel::Loyalty, "virtue"),
    ("betray", FoundationLabel::Loyalty, "vice"),
    ("traitor", FoundationLabel::Loyalty, "vice"),
    ("obey", FoundationLabel::Authority, "virtue"),
    ("respect", FoundationLabel::Authority, "virtue"),
    ("defy", FoundationLabel::Authority, "vice"),
    ("rebel", FoundationLabel::Authority, "vice"),
    ("pure", FoundationLabel::Sanctity, "virtue"),
    ("holy", FoundationLabel::Sanctity, "virtue"),
    ("dirty", FoundationLabel::Sanctity, "vice"),
    ("disgust*", FoundationLabel::Sanctity, "vice"),
];

pub const FILLER: [&str; 12] = [
    "the", "city", "people", "went", "said", "news", "today", "market", "school", "river", "old", "new",
];

pub struct Fixture {
    pub dir: PathBuf,
    pub bench: PathBuf,
    pub lexicon: PathBuf,
    pub prob_lexicon: PathBuf,
    pub vectors: PathBuf,
}

fn words_of(f: FoundationLabel) -> Vec<String> {
    SEEDS
        .iter()
        .filter(|(_, g, _)| *g == f)
        .map(|(w, _, _)| w.trim_end_matches('*').to_string() + if w.ends_with('*') { "ful" } else { "" })
        .collect()
}

/// English benchmark, count and probability lexicons and 16-D vectors,
/// all generated from `seed`.
pub fn write_fixture(dir: &Path, n_docs: usize, seed: u64) -> Fixture {
    let mut r = rng(seed);
    std::fs::create_dir_all(dir).unwrap();
    let fs = crossmoral_core::corpus::FOUNDATIONS;

    let mut bench = String::from("id,text,label,language\n");
    for i in 0..n_docs {
        let gold = fs[i % 5];
        let mut words: Vec<String> = Vec::new();
        let own = words_of(gold);
        for _ in 0..r.random_range(0..3) {
            words.push(own[r.random_range(0..own.len())].clone());
        }
        if r.random_bool(0.3) {
            let other = words_of(fs[r.random_range(0..5)]);
            words.push(other[r.random_range(0..other.len())].clone());
        }
        for _ in 0..r.random_range(3..9) {
            words.push(FILLER[r.random_range(0..FILLER.len())].to_string());
        }
        // deterministic shuffle
        for k in (1..words.len()).rev() {
            let j = r.random_range(0..=k);
            words.swap(k, j);
        }
        writeln!(bench, "d{i:03},{},{},en", words.join(" "), gold).unwrap();
    }
    let bench_path = dir.join("bench.csv");
    std::fs::write(&bench_path, bench).unwrap();

    let mut lex = String::from("# term\tfoundation\tpolarity\n");
    let mut prob = String::from("term,care,fairness,loyalty,authority,sanctity\n");
    for (w, f, pol) in SEEDS {
        writeln!(lex, "{w}\t{f}\t{pol}").unwrap();
        let mut p = [0.125f64; 5];
        p[f.index().unwrap()] = 0.75;
        writeln!(prob, "{w},{},{},{},{},{}", p[0], p[1], p[2], p[3], p[4]).unwrap();
    }
    let lex_path = dir.join("lexicon.tsv");
    std::fs::write(&lex_path, lex).unwrap();
    let prob_path = dir.join("prob.csv");
    std::fs::write(&prob_path, prob).unwrap();

    let dim = 16;
    let dirs: Vec<Vec<f64>> = (0..5).map(|_| random_vector(&mut r, dim)).collect();
    let mut vec_text = String::new();
    let mut n = 0;
    let mut body = String::new();
    for (w, f, pol) in SEEDS {
        let w = w.trim_end_matches('*').to_string() + if w.ends_with('*') { "ful" } else { "" };
        let sign = if pol == "virtue" { -1.0 } else { 1.0 };
        let v: Vec<f64> = dirs[f.index().unwrap()]
            .iter()
            .map(|d| sign * d + 0.3 * gaussian(&mut r))
            .collect();
        body.push_str(&vec_line(&w, &v));
        n += 1;
    }
    for w in FILLER {
        body.push_str(&vec_line(w, &random_vector(&mut r, dim)));
        n += 1;
    }
    writeln!(vec_text, "{n} {dim}").unwrap();
    vec_text.push_str(&body);
    let vec_path = dir.join("vectors.txt");
    std::fs::write(&vec_path, vec_text).unwrap();

    Fixture {
        dir: dir.to_path_buf(),
        bench: bench_path,
        lexicon: lex_path,
        prob_lexicon: prob_path,
        vectors: vec_path,
    }
}

fn vec_line(w: &str, v: &[f64]) -> String {
    let nums: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("{w} {}\n", nums.join(" "))
}

/// A TOML run config for `approach` over the fixture.
pub fn run_config(fx: &Fixture, approach: &str, out: &Path, seed: u64) -> String {
    format!(
        r#"approach = "{approach}"
seed = {seed}
out = "{out}"

[data]
bench = "{bench}"

[lexicon]
path = "{lex}"

[embedding]
path = "{vec}"

[frameaxis]
bootstrap = 200
"#,
        out = out.display(),
        bench = fx.bench.display(),
        lex = if approach == "lexicon_prob" { &fx.prob_lexicon } else { &fx.lexicon }.display(),
        vec = fx.vectors.display(),
    )
}
