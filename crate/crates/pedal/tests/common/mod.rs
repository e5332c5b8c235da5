//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;
use std::sync::OnceLock;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use pedal::core::learner::{EstimatorModel, Hyperparams};
use pedal::core::{Corpus, Featurizer, Hypothesis, LangCode, Segment, SegmentId};
use serde_json::Value;
use tower::ServiceExt;

pub fn lang(code: &str) -> LangCode {
    LangCode::new(code).unwrap()
}

/// Hypothesis text with `n` tokens.
pub fn words(n: usize) -> String {
    (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
}

/// Single-hypothesis corpus from `(source, hypothesis, reference)` rows.
pub fn corpus_from(rows: &[(&str, &str, &str)]) -> Corpus {
    let segments = rows
        .iter()
        .enumerate()
        .map(|(i, (src, hyp, reference))| {
            Segment::new(
                SegmentId(i),
                *src,
                lang("de"),
                lang("en"),
                vec![Hypothesis::new("mt", *hyp).with_gold(*reference)],
                Some(reference.to_string()),
            )
            .unwrap()
        })
        .collect();
    Corpus::new(segments).unwrap()
}

/// Model predicting `w * token count` of the hypothesis.
pub fn token_model(f: &Featurizer, w: f64) -> EstimatorModel {
    let layout = f.layout().clone();
    let mut weights = vec![0.0; layout.len() + 1];
    weights[layout.index_of("tgt.token_count").unwrap()] = w;
    EstimatorModel::with_weights(layout, Hyperparams::default(), weights).unwrap()
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: String,
    pub text: String,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.text).unwrap_or_else(|e| panic!("not JSON ({e}): {}", self.text))
    }
}

pub async fn send(app: &Router, req: Request<Body>) -> Reply {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let content_type = res
        .headers()
        .get(header::CONTENT_TYPE)
        .map(|v| v.to_str().unwrap().to_string())
        .unwrap_or_default();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    Reply {
        status,
        content_type,
        text: String::from_utf8(bytes.to_vec()).unwrap(),
    }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

pub async fn post_json(app: &Router, uri: &str, body: Value) -> Reply {
    let req = Request::builder()
        .method(Method::POST)
        .uri(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    send(app, req).await
}

pub async fn post_edit(app: &Router, id: u64, text: &str, editor: &str) -> Reply {
    post_json(
        app,
        &format!("/segments/{id}/postedit"),
        serde_json::json!({ "edited_text": text, "editor_id": editor }),
    )
    .await
}

/// `multipart/form-data` body from `(name, value)` fields.
pub fn multipart(fields: &[(&str, &str)]) -> (String, Vec<u8>) {
    let boundary = "pedal-test-boundary-7d1f";
    let mut body = String::new();
    for (name, value) in fields {
        body.push_str(&format!("--{boundary}\r\n"));
        if *name == "file" {
            body.push_str("Content-Disposition: form-data; name=\"file\"; filename=\"corpus.tsv\"\r\n");
            body.push_str("Content-Type: text/tab-separated-values\r\n\r\n");
        } else {
            body.push_str(&format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n"));
        }
        body.push_str(value);
        body.push_str("\r\n");
    }
    body.push_str(&format!("--{boundary}--\r\n"));
    (format!("multipart/form-data; boundary={boundary}"), body.into_bytes())
}

fn schema_doc() -> &'static Value {
    static DOC: OnceLock<Value> = OnceLock::new();
    DOC.get_or_init(|| {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas/service-api.json");
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
    })
}

/// Panics unless `value` matches `$defs/<def>` of the shipped schema file.
pub fn assert_schema(def: &str, value: &Value) {
    let mut doc = schema_doc().clone();
    doc["$ref"] = Value::String(format!("#/$defs/{def}"));
    let validator = jsonschema::validator_for(&doc).unwrap();
    let errors: Vec<String> = validator.iter_errors(value).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{def} payload violates the schema: {errors:?}\n{value:#}");
}

/// Column layout of corpora written by `pedal simulate --synthetic`.
pub const WRITTEN_SCHEMA: &str = "source,hypothesis,post_edit,reference,source_lang,target_lang";

pub fn golden_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Compares `actual` with the stored golden file; `PEDAL_BLESS=1` rewrites it.
pub fn check_golden(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("PEDAL_BLESS").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} differs from its golden file");
}

/// Three run configs (estimator, three random seeds, oracle) over one small
/// synthetic corpus.
pub fn write_compare_configs(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    let corpus = "[synthetic]\nsegments = 120\nseed = 21\n";
    std::fs::write(dir.join("1-estimator.toml"), format!("policy = \"estimator\"\n{corpus}")).unwrap();
    std::fs::write(dir.join("2-random.toml"), format!("policy = \"random\"\nrandom_seeds = 3\n{corpus}")).unwrap();
    std::fs::write(dir.join("3-oracle.toml"), format!("policy = \"oracle\"\n{corpus}")).unwrap();
}

/// A `pedal serve` child process.
pub struct Server {
    child: std::process::Child,
    pub base: String,
}

impl Server {
    /// Starts the binary on an ephemeral port and waits for its address.
    pub fn start(config: &Path) -> Server {
        use std::io::BufRead;
        let mut child = std::process::Command::new(env!("CARGO_BIN_EXE_pedal"))
            .args(["serve", "--config", config.to_str().unwrap()])
            .env("PEDAL_PORT", "0")
            .env("PEDAL_HOST", "127.0.0.1")
            .stdout(std::process::Stdio::piped())
            .stderr(std::process::Stdio::inherit())
            .spawn()
            .unwrap();
        let mut line = String::new();
        std::io::BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line
            .trim()
            .strip_prefix("pedal listening on ")
            .unwrap_or_else(|| panic!("unexpected first line {line:?}"))
            .to_string();
        Server {
            child,
            base: format!("http://{addr}"),
        }
    }

    pub fn get(&self, path: &str) -> reqwest::blocking::Response {
        reqwest::blocking::get(format!("{}{path}", self.base)).unwrap()
    }

    pub fn post_edit(&self, id: u64, text: &str) -> Value {
        let r = reqwest::blocking::Client::new()
            .post(format!("{}/segments/{id}/postedit", self.base))
            .json(&serde_json::json!({ "edited_text": text, "editor_id": "e1" }))
            .send()
            .unwrap();
        assert!(r.status().is_success());
        r.json().unwrap()
    }

    /// SIGKILL, no graceful shutdown.
    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
