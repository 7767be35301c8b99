//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use fgrain::tagger::{extract_units, read_tagged_corpus, TaggedSentence, TaggerModel, UnitKind};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn oracle_sentences() -> Vec<TaggedSentence> {
    let f = File::open(fixture("tagger_oracle.tsv")).expect("oracle fixture");
    read_tagged_corpus(BufReader::new(f)).expect("oracle fixture parses")
}

pub struct TaggerAgreement {
    pub tokens: usize,
    pub correct_tokens: usize,
    pub sentences: usize,
    pub noun_matches: usize,
}

impl TaggerAgreement {
    pub fn token_accuracy(&self) -> f64 {
        self.correct_tokens as f64 / self.tokens as f64
    }

    pub fn noun_agreement(&self) -> f64 {
        self.noun_matches as f64 / self.sentences as f64
    }
}

/// Token accuracy is measured on the oracle's own tokenization; noun
/// agreement runs the full pipeline on the raw sentence text.
pub fn tagger_agreement(model: &TaggerModel, verbose: bool) -> TaggerAgreement {
    let mut agg = TaggerAgreement { tokens: 0, correct_tokens: 0, sentences: 0, noun_matches: 0 };
    for s in oracle_sentences() {
        let predicted = model.tag_words(&s.words()).unwrap();
        for ((w, gold), p) in s.tokens.iter().zip(&predicted) {
            agg.tokens += 1;
            if p.as_str() == gold {
                agg.correct_tokens += 1;
            } else if verbose {
                eprintln!("  tag  {w}: oracle {gold}, got {p}");
            }
        }
        let text = s.text.clone().expect("fixture sentences carry text");
        let mut want: Vec<String> = s
            .tokens
            .iter()
            .filter(|(_, t)| t == "NOUN" || t == "PROPN")
            .map(|(w, _)| w.clone())
            .collect();
        let mut got: Vec<String> = extract_units(model, &text, UnitKind::Noun)
            .unwrap()
            .into_iter()
            .map(|u| u.surface)
            .collect();
        want.sort();
        got.sort();
        agg.sentences += 1;
        if want == got {
            agg.noun_matches += 1;
        } else if verbose {
            eprintln!("  nouns {text:?}: oracle {want:?}, got {got:?}");
        }
    }
    agg
}

/// What the mock embedding service should answer to one request.
pub struct Reply {
    pub status: u16,
    pub body: String,
    pub delay_ms: u64,
}

impl Reply {
    pub fn ok(body: serde_json::Value) -> Self {
        Reply { status: 200, body: body.to_string(), delay_ms: 0 }
    }

    pub fn status(status: u16) -> Self {
        Reply { status, body: format!("status {status}"), delay_ms: 0 }
    }
}

/// A request as seen by the mock service.
#[derive(Debug, Clone)]
pub struct Seen {
    pub path: String,
    pub authorization: Option<String>,
    pub body: serde_json::Value,
}

pub struct MockServer {
    pub url: String,
    pub seen: std::sync::Arc<std::sync::Mutex<Vec<Seen>>>,
}

impl MockServer {
    pub fn requests(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }
}

/// Deterministic vector for a payload, used by mock handlers.
pub fn payload_vector(payload: &str, dim: usize) -> Vec<f32> {
    (0..dim).map(|d| ((payload.len() * 7 + d * 3 + payload.bytes().map(usize::from).sum::<usize>()) % 17) as f32 - 8.0).collect()
}

/// Serves HTTP/1.1 on a loopback port, one connection per request. `handler`
/// receives the request number (from 0) and the parsed JSON body.
pub fn mock_server<F>(handler: F) -> MockServer
where
    F: Fn(usize, &serde_json::Value) -> Reply + Send + 'static,
{
    use std::io::{BufRead, Read, Write};
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let seen = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
    let log = seen.clone();
    std::thread::spawn(move || {
        for (n, stream) in listener.incoming().enumerate() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            if reader.read_line(&mut request_line).is_err() {
                continue;
            }
            let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
            let mut len = 0;
            let mut authorization = None;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                let (k, v) = line.split_once(':').unwrap_or((&line, ""));
                match k.trim().to_ascii_lowercase().as_str() {
                    "content-length" => len = v.trim().parse().unwrap_or(0),
                    "authorization" => authorization = Some(v.trim().to_string()),
                    _ => {}
                }
            }
            let mut body = vec![0; len];
            let _ = reader.read_exact(&mut body);
            let body: serde_json::Value = serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);
            log.lock().unwrap().push(Seen { path, authorization, body: body.clone() });
            let reply = handler(n, &body);
            std::thread::sleep(std::time::Duration::from_millis(reply.delay_ms));
            let _ = write!(
                stream,
                "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                reply.status,
                reply.body.len(),
                reply.body
            );
            let _ = stream.flush();
        }
    });
    MockServer { url, seen }
}

/// Handler answering every request with `payload_vector`s of `dim`.
pub fn echo_handler(dim: usize) -> impl Fn(usize, &serde_json::Value) -> Reply + Send + 'static {
    move |_, body| {
        let vectors: Vec<Vec<f32>> = body["payloads"]
            .as_array()
            .map(|ps| ps.iter().map(|p| payload_vector(p.as_str().unwrap_or(""), dim)).collect())
            .unwrap_or_default();
        Reply::ok(serde_json::json!({ "dim": dim, "vectors": vectors }))
    }
}
