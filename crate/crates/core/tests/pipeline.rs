mod common;

use std::collections::BTreeSet;
use std::path::Path;

use common::{run_config, spawn_stub, write_fixture};
use crossmoral_core::corpus::{read_predictions, write_predictions, FoundationLabel, Prediction};
use crossmoral_core::eval::{evaluate, Scope};
use crossmoral_core::experiments::{load_data, run, Manifest, RunConfig};
use crossmoral_core::Error;

fn config(toml: &str, dir: &Path) -> RunConfig {
    let p = dir.join("run.toml");
    std::fs::write(&p, toml).unwrap();
    RunConfig::load(&p).unwrap()
}

#[test]
fn every_local_approach_produces_a_complete_run() {
    let dir = tempfile::tempdir().unwrap();
    let fx = write_fixture(&dir.path().join("data"), 40, 3);
    let bench = load_data(&fx.bench, None, None).unwrap();
    for approach in ["lexicon_count", "lexicon_prob", "semantic_sim", "frameaxis"] {
        let out = dir.path().join(approach);
        let cfg = config(&run_config(&fx, approach, &out, 9), dir.path());
        let res = run(&cfg).unwrap();
        assert_eq!(res.predictions.len(), bench.len(), "{approach}");
        for name in ["predictions.jsonl", "report.csv", "report.md", "report.json", "manifest.json"] {
            assert!(out.join(name).is_file(), "{approach}: {name}");
        }
        assert!(!out.join(".partial").exists());
        assert!(!out.join(".lock").exists());
        let on_disk = read_predictions(out.join("predictions.jsonl")).unwrap();
        assert_eq!(on_disk, res.predictions);
        let manifest: Manifest = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest.seed, 9);
        assert!(manifest.inputs.contains_key("bench"));
        let digest = crossmoral_core::experiments::sha256_file(out.join("report.csv")).unwrap();
        assert_eq!(manifest.outputs["report.csv"], digest);
        // virtue and vice vectors point in opposite directions, so only
        // anchor similarity has no signal to find here
        if approach != "semantic_sim" {
            assert!(res.reports[0].accuracy > 0.3, "{approach}: {}", res.reports[0].accuracy);
        }
    }
    assert!(dir.path().join("frameaxis/frameaxis.jsonl").is_file());
}

#[test]
fn config_digest_ignores_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let fx = write_fixture(&dir.path().join("data"), 20, 4);
    let a = run(&config(&run_config(&fx, "lexicon_count", &dir.path().join("a"), 1), dir.path())).unwrap();
    let b = run(&config(&run_config(&fx, "lexicon_count", &dir.path().join("b"), 1), dir.path())).unwrap();
    let c = run(&config(&run_config(&fx, "lexicon_count", &dir.path().join("c"), 2), dir.path())).unwrap();
    assert_eq!(a.manifest.config_sha256, b.manifest.config_sha256);
    assert_ne!(a.manifest.config_sha256, c.manifest.config_sha256);
}

#[test]
fn exchange_ingest_matches_direct_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let fx = write_fixture(&dir.path().join("data"), 30, 5);
    let bench = load_data(&fx.bench, None, None).unwrap();
    let fs = crossmoral_core::corpus::FOUNDATIONS;
    let preds: Vec<Prediction> = bench
        .documents()
        .iter()
        .enumerate()
        .rev()
        .map(|(i, d)| match i % 4 {
            0 => Prediction::none(&d.id, "external"),
            1 => Prediction::new(&d.id, [d.gold, fs[(i + 1) % 5]], "external"),
            _ => Prediction::new(&d.id, [fs[i % 5]], "external"),
        })
        .collect();
    let exch = dir.path().join("external.jsonl");
    write_predictions(&exch, &preds).unwrap();
    let toml = format!(
        "approach = \"exchange_ingest\"\nout = \"out\"\n[data]\nbench = \"{}\"\n[exchange]\npredictions = \"external.jsonl\"\n",
        fx.bench.display()
    );
    let res = run(&config(&toml, dir.path())).unwrap();
    assert_eq!(res.reports[0], evaluate(&bench, &preds, Scope::CoveredOnly).unwrap());
    assert_eq!(res.reports[1], evaluate(&bench, &preds, Scope::All).unwrap());
    assert_eq!(res.manifest.inputs["exchange"].path, "external.jsonl");
}

#[test]
fn exchange_with_missing_document_fails_and_quarantines() {
    let dir = tempfile::tempdir().unwrap();
    let fx = write_fixture(&dir.path().join("data"), 10, 6);
    let bench = load_data(&fx.bench, None, None).unwrap();
    let preds: Vec<Prediction> = bench.documents()[1..].iter().map(|d| Prediction::none(&d.id, "x")).collect();
    write_predictions(dir.path().join("short.jsonl"), &preds).unwrap();
    let toml = format!(
        "approach = \"exchange_ingest\"\nout = \"out\"\n[data]\nbench = \"{}\"\n[exchange]\npredictions = \"short.jsonl\"\n",
        fx.bench.display()
    );
    let err = run(&config(&toml, dir.path())).unwrap_err();
    assert!(matches!(err, Error::Alignment(_)), "{err:?}");
    let out = dir.path().join("out");
    assert!(!out.join("predictions.jsonl").exists());
    assert!(out.join("quarantine/failed-001").is_dir());
    assert!(!out.join(".lock").exists());
}

#[test]
fn concurrent_run_on_the_same_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let fx = write_fixture(&dir.path().join("data"), 10, 7);
    let out = dir.path().join("out");
    std::fs::create_dir_all(&out).unwrap();
    std::fs::write(out.join(".lock"), "").unwrap();
    let cfg = config(&run_config(&fx, "lexicon_count", &out, 1), dir.path());
    assert!(matches!(run(&cfg), Err(Error::Locked(_))));
    std::fs::remove_file(out.join(".lock")).unwrap();
    run(&cfg).unwrap();
}

#[test]
fn invalid_configs_are_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let fx = write_fixture(&dir.path().join("data"), 10, 8);
    let out = dir.path().join("out");
    let low_bootstrap = run_config(&fx, "frameaxis", &out, 1).replace("bootstrap = 200", "bootstrap = 50");
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, low_bootstrap).unwrap();
    assert!(RunConfig::load(&p).is_err());
    std::fs::write(&p, "approach = \"lexicon_count\"\nout = \"o\"\n[data]\nbench = \"nope.csv\"\n").unwrap();
    assert!(RunConfig::load(&p).is_err());
    std::fs::write(&p, "approach = \"telepathy\"\nout = \"o\"\n[data]\nbench = \"b.csv\"\n").unwrap();
    assert!(RunConfig::load(&p).is_err());
    assert!(!out.exists());
}

#[test]
fn environment_variables_expand_in_configs() {
    let dir = tempfile::tempdir().unwrap();
    let fx = write_fixture(&dir.path().join("data"), 10, 9);
    std::env::set_var("CROSSMORAL_PIPELINE_DATA", fx.dir.to_str().unwrap());
    let toml = "approach = \"lexicon_count\"\nout = \"out\"\n[data]\nbench = \"${CROSSMORAL_PIPELINE_DATA}/bench.csv\"\n[lexicon]\npath = \"${CROSSMORAL_PIPELINE_DATA}/lexicon.tsv\"\n";
    let res = run(&config(toml, dir.path())).unwrap();
    assert_eq!(res.predictions.len(), 10);
    assert_eq!(res.out_dir, dir.path().join("out"));
}

#[test]
fn chinese_lexicon_run_segments_by_dictionary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("cmfd.tsv"),
        "关爱\tcare\tvirtue\n伤害\tcare\tvice\n公平\tfairness\tvirtue\n欺骗\tfairness\tvice\n忠诚\tloyalty\tvirtue\n背叛\tloyalty\tvice\n\
         服从\tauthority\tvirtue\n反抗\tauthority\tvice\n纯洁\tsanctity\tvirtue\n肮脏\tsanctity\tvice\n公平竞争\tfairness\tvirtue\n",
    )
    .unwrap();
    std::fs::write(
        d.join("bench.csv"),
        "id,text,label\n\
         z1,他们关爱老人。,care\n\
         z2,商家欺骗顾客，很不公平。,fairness\n\
         z3,士兵对国家忠诚，从不背叛。,loyalty\n\
         z4,学生服从老师。,authority\n\
         z5,这里的水很肮脏。,sanctity\n\
         z6,今天天气很好。,care\n\
         z7,公平竞争与伤害并存。,fairness\n",
    )
    .unwrap();
    let toml = "approach = \"lexicon_count\"\nout = \"out\"\n[data]\nbench = \"bench.csv\"\nlanguage = \"zh\"\n[lexicon]\npath = \"cmfd.tsv\"\n";
    let res = run(&config(toml, d)).unwrap();
    let labels: Vec<BTreeSet<FoundationLabel>> = res.predictions.iter().map(|p| p.labels.clone()).collect();
    use FoundationLabel::*;
    assert_eq!(
        labels,
        vec![
            BTreeSet::from([Care]),
            BTreeSet::from([Fairness]),
            BTreeSet::from([Loyalty]),
            BTreeSet::from([Authority]),
            BTreeSet::from([Sanctity]),
            BTreeSet::from([FoundationLabel::None]),
            // 公平竞争 wins over 公平 at its position; one care, one fairness
            BTreeSet::from([Care, Fairness]),
        ]
    );
    assert_eq!(res.reports[1].coverage, 6.0 / 7.0);
    assert_eq!(res.reports[0].accuracy, 1.0);
}

#[test]
fn llm_run_against_stub_writes_annotations_and_audit() {
    let stub = spawn_stub();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("bench.csv"),
        "id,text,label\nb1,label:care,care\nb2,prose:about loyalty,loyalty\nb3,fail,sanctity\n",
    )
    .unwrap();
    std::fs::write(d.join("shots.csv"), "id,text,label\ns1,an exemplar,fairness\ns2,another,authority\n").unwrap();
    let toml = format!(
        "approach = \"llm_fewshot\"\nout = \"out\"\n[data]\nbench = \"bench.csv\"\n\
         [llm]\nshots_file = \"shots.csv\"\nshot_ids = [\"s2\", \"s1\"]\n\
         [llm.endpoint]\nurl = \"{}\"\nmodel = \"stub-7b\"\nmax_retries = 1\nbackoff_base_ms = 1\n",
        stub.chat_url()
    );
    let res = run(&config(&toml, d)).unwrap();
    use FoundationLabel::*;
    let labels: Vec<BTreeSet<FoundationLabel>> = res.predictions.iter().map(|p| p.labels.clone()).collect();
    assert_eq!(labels, vec![BTreeSet::from([Care]), BTreeSet::from([Loyalty]), BTreeSet::from([Unknown])]);
    assert_eq!(res.predictions[0].approach, "llm:stub-7b:en");
    let out = d.join("out");
    assert_eq!(std::fs::read_to_string(out.join("annotations.jsonl")).unwrap().lines().count(), 3);
    // two attempts for the failing document
    assert_eq!(std::fs::read_to_string(out.join("audit.jsonl")).unwrap().lines().count(), 4);
    assert!(res.manifest.inputs.contains_key("shots"));
    let first = &stub.requests()[0]["messages"];
    assert_eq!(first[1]["content"], "another");
    assert_eq!(first[3]["content"], "an exemplar");
}

#[test]
fn llm_run_aborted_by_auth_is_quarantined() {
    let stub = spawn_stub();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bench.csv"), "id,text,label\nb1,auth,care\n").unwrap();
    let toml = format!(
        "approach = \"llm_fewshot\"\nout = \"out\"\n[data]\nbench = \"bench.csv\"\n[llm.endpoint]\nurl = \"{}\"\n",
        stub.chat_url()
    );
    assert!(matches!(run(&config(&toml, d)), Err(Error::Auth(401))));
    let q = d.join("out/quarantine/failed-001");
    assert!(q.join("audit.jsonl").is_file());
    assert!(!d.join("out/predictions.jsonl").exists());
}
