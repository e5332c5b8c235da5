mod common;

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use common::*;
use pedal::config::ServiceConfig;
use pedal::core::metrics::ter_text;
use pedal::core::simulator::Prepared;
use pedal::core::synthetic::{self, SyntheticConfig};
use pedal::core::{Corpus, Featurizer, Policy, RunConfig, Scheduler, SchedulerConfig};
use pedal::journal::read_journal;
use pedal::service::{router, AppState, Clock, Session};
use serde_json::{json, Value};
use tempfile::TempDir;

fn estimator(warmup: u64) -> SchedulerConfig {
    SchedulerConfig {
        policy: Policy::Estimator,
        warmup,
        ..SchedulerConfig::default()
    }
}

fn journal_in(dir: &Path) -> std::path::PathBuf {
    dir.join("journal.log")
}

/// Service over `corpus` with an optional token-count model preloaded.
fn app_with(corpus: &Corpus, sched: SchedulerConfig, w: Option<f64>, dir: &Path, clock: Clock) -> (Router, AppState) {
    let f = Featurizer::for_corpus(corpus, None).unwrap();
    let mut s = Scheduler::new(corpus, &f, sched.clone()).unwrap();
    if let Some(w) = w {
        s.load_model(token_model(&f, w)).unwrap();
    }
    let session = Session::from_scheduler(s, &journal_in(dir)).unwrap();
    let config = ServiceConfig {
        data_dir: dir.to_path_buf(),
        scheduler: sched,
        ..ServiceConfig::default()
    };
    let state = AppState::with_session(config, clock, Some(session)).unwrap();
    (router(state.clone()), state)
}

fn abc() -> Corpus {
    corpus_from(&[("a", &words(1), "r"), ("b", &words(9), "r"), ("c", &words(5), "r")])
}

fn synthetic_corpus(n: usize, seed: u64) -> Corpus {
    synthetic::generate(&SyntheticConfig {
        segments: n,
        seed,
        ..SyntheticConfig::default()
    })
    .unwrap()
}

async fn next(app: &Router, editor: &str) -> Value {
    let r = get(app, &format!("/queue/next?editor_id={editor}")).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let v = r.json();
    assert_schema("NextResponse", &v);
    v
}

#[tokio::test]
async fn serves_the_highest_prediction() {
    let dir = TempDir::new().unwrap();
    // predictions 0.1, 0.9, 0.5
    let (app, _) = app_with(&abc(), estimator(0), Some(0.1), dir.path(), Clock::system());
    let v = next(&app, "e1").await;
    assert_eq!(v["status"], "task");
    assert_eq!(v["task"]["segment_id"], 1);
    assert!((v["task"]["predicted_ter"].as_f64().unwrap() - 0.9).abs() < 1e-12);
    assert_eq!(v["task"]["hypothesis_text"], words(9));
    assert_eq!(v["task"]["queue"]["remaining"], 2);
    assert_eq!(v["task"]["lease_expires_in_secs"], 1800);
}

#[tokio::test]
async fn sequential_calls_do_not_repeat_a_segment() {
    let dir = TempDir::new().unwrap();
    let (app, _) = app_with(&abc(), estimator(0), Some(0.1), dir.path(), Clock::system());
    let mut served = Vec::new();
    for editor in ["e1", "e2", "e3"] {
        served.push(next(&app, editor).await["task"]["segment_id"].as_u64().unwrap());
    }
    assert_eq!(served, [1, 2, 0]);
    let v = next(&app, "e4").await;
    assert_eq!(v["status"], "drained");
    assert!(v["task"].is_null());
}

#[tokio::test]
async fn drained_queue_reports_status() {
    let dir = TempDir::new().unwrap();
    let c = corpus_from(&[("a", "x y", "x y")]);
    let (app, _) = app_with(&c, estimator(0), None, dir.path(), Clock::system());
    next(&app, "e1").await;
    let r = post_edit(&app, 0, "x y", "e1").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(next(&app, "e1").await["status"], "drained");
}

#[tokio::test]
async fn unchanged_text_scores_zero() {
    let dir = TempDir::new().unwrap();
    let (app, _) = app_with(&abc(), estimator(0), Some(0.1), dir.path(), Clock::system());
    next(&app, "e1").await;
    let r = post_edit(&app, 1, &words(9), "e1").await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let v = r.json();
    assert_schema("PostEditResponse", &v);
    assert_eq!(v["realized_ter"], 0.0);
    assert_eq!(v["seq"], 1);
    assert_eq!(v["queue_size"], 2);
    assert_eq!(v["model_step"], 1);
    assert!((v["blind_prediction"].as_f64().unwrap() - 0.9).abs() < 1e-12);
}

#[tokio::test]
async fn large_discrepancy_is_flagged() {
    let dir = TempDir::new().unwrap();
    let c = corpus_from(&[("s", "a b c d", "a x y z")]);
    // prediction 0.025 * 4 = 0.1, realized 3/4
    let (app, _) = app_with(&c, estimator(0), Some(0.025), dir.path(), Clock::system());
    next(&app, "e1").await;
    let v = post_edit(&app, 0, "a x y z", "e1").await.json();
    assert_schema("PostEditResponse", &v);
    let flag = &v["sanity_flag"];
    assert_eq!(flag["segment_id"], 0);
    assert!((flag["discrepancy"].as_f64().unwrap() - 0.65).abs() < 1e-9);
    assert_eq!(flag["threshold"], 0.35);

    let flags = get(&app, "/flags").await.json();
    assert_schema("FlagsResponse", &flags);
    assert_eq!(flags["flags"].as_array().unwrap().len(), 1);
    assert_eq!(flags["flags"][0], *flag);
}

#[tokio::test]
async fn small_discrepancy_is_not_flagged() {
    let dir = TempDir::new().unwrap();
    let c = corpus_from(&[("s", "a b c d", "a x c d")]);
    // prediction 0.1, realized 0.25
    let (app, _) = app_with(&c, estimator(0), Some(0.025), dir.path(), Clock::system());
    next(&app, "e1").await;
    let v = post_edit(&app, 0, "a x c d", "e1").await.json();
    assert!(v["sanity_flag"].is_null());
}

#[tokio::test]
async fn error_statuses() {
    let dir = TempDir::new().unwrap();
    let (app, _) = app_with(&abc(), estimator(0), Some(0.1), dir.path(), Clock::system());
    // pending, not in progress
    let r = post_edit(&app, 0, "x", "e1").await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_schema("ErrorBody", &r.json());
    assert_eq!(r.json()["error"], "conflict");

    let r = post_edit(&app, 99, "x", "e1").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["error"], "not_found");

    next(&app, "e1").await;
    assert_eq!(post_edit(&app, 1, &words(9), "e1").await.status, StatusCode::OK);
    // already post-edited
    let r = post_edit(&app, 1, &words(9), "e1").await;
    assert_eq!(r.status, StatusCode::CONFLICT);

    let r = post_json(&app, "/segments/1/postedit", json!({ "edited_text": "x" })).await;
    assert!(r.status.is_client_error());
}

#[tokio::test]
async fn no_session_until_ingest() {
    let dir = TempDir::new().unwrap();
    let config = ServiceConfig {
        data_dir: dir.path().to_path_buf(),
        ..ServiceConfig::default()
    };
    let app = router(AppState::new(config, Clock::system()).unwrap());
    let h = get(&app, "/health").await.json();
    assert_schema("Health", &h);
    assert_eq!(h["session"], false);
    for uri in ["/stats", "/queue/next", "/flags", "/model/snapshot"] {
        let r = get(&app, uri).await;
        assert_eq!(r.status, StatusCode::SERVICE_UNAVAILABLE, "{uri}");
        assert_schema("ErrorBody", &r.json());
        assert_eq!(r.json()["error"], "no_session");
    }
}

#[tokio::test]
async fn blind_predictions_match_the_journal() {
    let dir = TempDir::new().unwrap();
    let corpus = synthetic_corpus(40, 7);
    let (app, _) = app_with(&corpus, estimator(5), None, dir.path(), Clock::system());
    let mut answered = Vec::new();
    for _ in 0..20 {
        let t = next(&app, "e1").await;
        let id = t["task"]["segment_id"].as_u64().unwrap();
        let h = t["task"]["hypothesis_index"].as_u64().unwrap() as usize;
        let gold = corpus.segments()[id as usize].hypotheses[h].gold_post_edit.clone().unwrap();
        let v = post_edit(&app, id, &gold, "e1").await.json();
        assert_schema("PostEditResponse", &v);
        answered.push(v);
    }
    let events = read_journal(&journal_in(dir.path())).unwrap();
    assert_eq!(events.len(), answered.len());
    for (e, v) in events.iter().zip(&answered) {
        assert_eq!(e.seq, v["seq"].as_u64().unwrap());
        assert_eq!(e.segment_id.0 as u64, v["segment_id"].as_u64().unwrap());
        // the journal keeps six decimals
        assert!((e.blind_prediction - v["blind_prediction"].as_f64().unwrap()).abs() <= 5e-7);
        assert!((e.realized_target - v["realized_ter"].as_f64().unwrap()).abs() <= 5e-7);
    }
}

/// Mean `max(0, 100 * (1 - TER))` over the corpus, each segment's text being
/// its journaled post-edit when there is one.
fn offline_quality(corpus: &Corpus, journal: &Path) -> f64 {
    let edits: HashMap<usize, String> = read_journal(journal)
        .unwrap()
        .into_iter()
        .map(|e| (e.segment_id.0, e.edited_text))
        .collect();
    let total: f64 = corpus
        .segments()
        .iter()
        .map(|s| {
            let text = edits.get(&s.id.0).map_or(s.hypotheses[0].text.as_str(), String::as_str);
            let ter = ter_text(text, s.reference.as_deref().unwrap()).unwrap().score;
            (100.0 * (1.0 - ter)).max(0.0)
        })
        .sum();
    total / corpus.len() as f64
}

#[tokio::test]
async fn stats_track_counts_and_quality() {
    let dir = TempDir::new().unwrap();
    let corpus = synthetic_corpus(30, 3);
    let (app, _) = app_with(&corpus, estimator(4), None, dir.path(), Clock::system());

    let s = get(&app, "/stats").await.json();
    assert_schema("StatsResponse", &s);
    assert_eq!(s["counts"], json!({ "pending": 30, "in_progress": 0, "post_edited": 0, "auto_closed": 0 }));
    assert!(s["prequential"].is_null());
    assert_eq!(s["pct_post_edited"], 0.0);
    let q0 = s["corpus_quality"].as_f64().unwrap();
    assert!((q0 - offline_quality(&corpus, &journal_in(dir.path()))).abs() < 1e-9);

    let mut last_pct = 0.0;
    for k in 1..=12u64 {
        let t = next(&app, "e1").await;
        let id = t["task"]["segment_id"].as_u64().unwrap();
        let gold = corpus.segments()[id as usize].hypotheses[0].gold_post_edit.clone().unwrap();
        // edit only half of the tasks to the gold text
        let text = if k % 2 == 0 { gold } else { t["task"]["hypothesis_text"].as_str().unwrap().to_string() };
        assert_eq!(post_edit(&app, id, &text, "e1").await.status, StatusCode::OK);

        let s = get(&app, "/stats").await.json();
        assert_schema("StatsResponse", &s);
        assert_eq!(s["counts"]["post_edited"], k);
        assert_eq!(s["counts"]["pending"], 30 - k);
        assert_eq!(s["prequential"]["samples"], k);
        assert_eq!(s["last_seq"], k);
        assert_eq!(s["warmup_active"], k < 4);
        let pct = s["pct_post_edited"].as_f64().unwrap();
        assert!((pct - last_pct - 100.0 / 30.0).abs() < 1e-9);
        last_pct = pct;
        let q = s["corpus_quality"].as_f64().unwrap();
        assert!((q - offline_quality(&corpus, &journal_in(dir.path()))).abs() < 1e-9);
    }
}

#[tokio::test]
async fn token_guards_everything_but_health() {
    let dir = TempDir::new().unwrap();
    let corpus = abc();
    let f = Featurizer::for_corpus(&corpus, None).unwrap();
    let s = Scheduler::new(&corpus, &f, estimator(0)).unwrap();
    let config = ServiceConfig {
        data_dir: dir.path().to_path_buf(),
        api_token: Some("s3cret".into()),
        ..ServiceConfig::default()
    };
    let session = Session::from_scheduler(s, &journal_in(dir.path())).unwrap();
    let app = router(AppState::with_session(config, Clock::system(), Some(session)).unwrap());

    assert_eq!(get(&app, "/health").await.status, StatusCode::OK);
    let r = get(&app, "/stats").await;
    assert_eq!(r.status, StatusCode::UNAUTHORIZED);
    assert_schema("ErrorBody", &r.json());
    let with = |token: &str| Request::get("/stats").header(header::AUTHORIZATION, token).body(Body::empty()).unwrap();
    assert_eq!(send(&app, with("Bearer wrong")).await.status, StatusCode::UNAUTHORIZED);
    assert_eq!(send(&app, with("s3cret")).await.status, StatusCode::UNAUTHORIZED);
    assert_eq!(send(&app, with("Bearer s3cret")).await.status, StatusCode::OK);
}

#[tokio::test]
async fn leases_expire_and_belong_to_one_editor() {
    let dir = TempDir::new().unwrap();
    let ms = Arc::new(AtomicU64::new(0));
    let (app, _) = app_with(&abc(), estimator(0), Some(0.1), dir.path(), Clock::Manual(ms.clone()));

    assert_eq!(next(&app, "alice").await["task"]["segment_id"], 1);
    // someone else cannot answer alice's task
    let r = post_edit(&app, 1, "x", "bob").await;
    assert_eq!(r.status, StatusCode::CONFLICT);

    // asking again moves alice on and hands the old task back
    assert_eq!(next(&app, "alice").await["task"]["segment_id"], 2);
    let s = get(&app, "/stats").await.json();
    assert_eq!(s["counts"]["in_progress"], 1);

    // just before the timeout the lease holds
    ms.store(30 * 60 * 1000 - 1, Ordering::SeqCst);
    assert_eq!(next(&app, "bob").await["task"]["segment_id"], 1);
    assert_eq!(get(&app, "/stats").await.json()["counts"]["in_progress"], 2);

    // past it both leases are gone and the segments are pending again
    ms.store(60 * 60 * 1000, Ordering::SeqCst);
    let s = get(&app, "/stats").await.json();
    assert_eq!(s["counts"]["in_progress"], 0);
    assert_eq!(s["counts"]["pending"], 3);
    let r = post_edit(&app, 2, "x", "alice").await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(next(&app, "carol").await["task"]["segment_id"], 1);
}

#[tokio::test]
async fn multipart_ingest_starts_and_persists_a_session() {
    let dir = TempDir::new().unwrap();
    let config = ServiceConfig {
        data_dir: dir.path().to_path_buf(),
        ..ServiceConfig::default()
    };
    let app = router(AppState::new(config.clone(), Clock::system()).unwrap());
    let tsv = "eins\tone\tone\tone\nzwei\ttwo too\ttwo\ttwo\nbad row\n";
    let upload = |fields: &[(&str, &str)]| {
        let (ct, body) = multipart(fields);
        Request::builder()
            .method(Method::POST)
            .uri("/ingest")
            .header(header::CONTENT_TYPE, ct)
            .body(Body::from(body))
            .unwrap()
    };

    // malformed row without skip_malformed
    let r = send(&app, upload(&[("file", tsv)])).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST, "{}", r.text);
    assert_schema("ErrorBody", &r.json());
    let r = send(&app, upload(&[("schema", "source,hypothesis")])).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);

    let r = send(&app, upload(&[("file", tsv), ("skip_malformed", "true"), ("target_lang", "fr")])).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let v = r.json();
    assert_schema("IngestResponse", &v);
    assert_eq!(v["segments"], 2);
    assert_eq!(v["skipped"][0]["line"], 3);

    let r = send(&app, upload(&[("file", tsv), ("skip_malformed", "true")])).await;
    assert_eq!(r.status, StatusCode::CONFLICT);

    let t = next(&app, "e1").await;
    assert_eq!(t["task"]["target_lang"], "fr");
    let id = t["task"]["segment_id"].as_u64().unwrap();
    assert_eq!(post_edit(&app, id, "anything", "e1").await.status, StatusCode::OK);

    // a restart over the same data directory resumes the uploaded session
    let app = router(AppState::new(config, Clock::system()).unwrap());
    let s = get(&app, "/stats").await.json();
    assert_eq!(s["counts"]["post_edited"], 1);
    assert_eq!(s["total"], 2);
}

#[tokio::test]
async fn api_session_matches_simulator_replay() {
    let dir = TempDir::new().unwrap();
    let corpus = synthetic_corpus(60, 11);
    let run = RunConfig {
        corpus: "synthetic".into(),
        ..RunConfig::default()
    };
    let (app, _) = app_with(&corpus, run.scheduler_config(), None, dir.path(), Clock::system());
    for i in 0..40 {
        let t = next(&app, "e1").await;
        let id = t["task"]["segment_id"].as_u64().unwrap();
        let h = t["task"]["hypothesis_index"].as_u64().unwrap() as usize;
        // mix gold edits with hand-made ones
        let text = if i % 3 == 0 {
            format!("{} extra", t["task"]["hypothesis_text"].as_str().unwrap())
        } else {
            corpus.segments()[id as usize].hypotheses[h].gold_post_edit.clone().unwrap()
        };
        assert_eq!(post_edit(&app, id, &text, "e1").await.status, StatusCode::OK);
    }
    let live = get(&app, "/model/snapshot").await;
    assert_eq!(live.status, StatusCode::OK);
    assert!(live.content_type.starts_with("text/plain"));

    let events = read_journal(&journal_in(dir.path())).unwrap();
    let prepared = Prepared::new(&corpus, None).unwrap();
    let replayed = prepared.replay(&run, &events).unwrap();
    assert_eq!(replayed.snapshot, live.text);
}
