use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use reasoning_circuits::backends::{
    Backend, BackendError, GenRequest, HttpBackend, HttpConfig, MissPolicy, RecordedCall, Recording, RequestKey,
    ScriptedBackend,
};
use reasoning_circuits::TaskId;

/// What the mock server does with one connection.
#[derive(Clone)]
enum Reply {
    Json(u16, &'static str),
    Stall(Duration),
}

/// Minimal HTTP/1.1 server answering connections from a script, one reply
/// per connection, and recording request bodies.
struct MockServer {
    url: String,
    bodies: Arc<Mutex<Vec<String>>>,
    handle: Option<thread::JoinHandle<()>>,
}

impl MockServer {
    fn start(script: Vec<Reply>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/generate", listener.local_addr().unwrap());
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let seen = Arc::clone(&bodies);
        let handle = thread::spawn(move || {
            for reply in script {
                let (stream, _) = listener.accept().unwrap();
                serve(stream, &reply, &seen);
            }
        });
        Self {
            url,
            bodies,
            handle: Some(handle),
        }
    }

    fn bodies(&self) -> Vec<String> {
        self.bodies.lock().unwrap().clone()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if !thread::panicking() {
            if let Some(h) = self.handle.take() {
                h.join().unwrap();
            }
        }
    }
}

fn serve(stream: TcpStream, reply: &Reply, seen: &Mutex<Vec<String>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut len = 0;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        if line == "\r\n" || line.is_empty() {
            break;
        }
        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            len = v.trim().parse().unwrap();
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).unwrap();
    seen.lock().unwrap().push(String::from_utf8(body).unwrap());
    let mut stream = stream;
    match reply {
        Reply::Json(status, text) => {
            let resp = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{text}",
                text.len()
            );
            stream.write_all(resp.as_bytes()).unwrap();
        }
        Reply::Stall(d) => thread::sleep(*d),
    }
}

fn backend(url: &str, retries: u32) -> HttpBackend {
    HttpBackend::new(
        HttpConfig::new(url)
            .retries(retries)
            .backoff_base(Duration::from_millis(5))
            .timeout(Duration::from_millis(500)),
    )
    .unwrap()
}

fn request() -> GenRequest {
    GenRequest::new("Turn: a statement into question: <extra_id_0>", 32)
}

#[test]
fn returns_text_verbatim() {
    let server = MockServer::start(vec![Reply::Json(200, r#"{"text":"<extra_id_0>  Who?\n","score":1}"#)]);
    let resp = backend(&server.url, 0).generate(&request()).unwrap();
    assert_eq!(resp.text, "<extra_id_0>  Who?\n");
    let sent: serde_json::Value = serde_json::from_str(&server.bodies()[0]).unwrap();
    assert_eq!(
        sent,
        serde_json::json!({
            "prompt": "Turn: a statement into question: <extra_id_0>",
            "max_new_tokens": 32,
            "stop": null
        })
    );
}

#[test]
fn server_error_then_success_is_retried() {
    let server = MockServer::start(vec![
        Reply::Json(500, r#"{"error":"busy"}"#),
        Reply::Json(200, r#"{"text":"ok"}"#),
    ]);
    let resp = backend(&server.url, 1).generate(&request()).unwrap();
    assert_eq!(resp.text, "ok");
    assert_eq!(server.bodies().len(), 2);
}

#[test]
fn retries_exhausted_report_attempts() {
    let server = MockServer::start(vec![Reply::Json(503, "down"), Reply::Json(503, "down")]);
    match backend(&server.url, 1).generate(&request()) {
        Err(BackendError::Unavailable { attempts, last }) => {
            assert_eq!(attempts, 2);
            assert!(matches!(*last, BackendError::Server { status: 503, .. }));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn timeout_without_retries_is_unavailable() {
    let server = MockServer::start(vec![Reply::Stall(Duration::from_millis(900))]);
    match backend(&server.url, 0).generate(&request()) {
        Err(BackendError::Unavailable { attempts: 1, last }) => {
            assert!(
                matches!(*last, BackendError::Timeout | BackendError::Connection(_)),
                "{last}"
            );
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn client_errors_are_not_retried() {
    let server = MockServer::start(vec![Reply::Json(422, r#"{"error":"prompt too long"}"#)]);
    match backend(&server.url, 3).generate(&request()) {
        Err(BackendError::Request { status: 422, body }) => assert!(body.contains("too long")),
        other => panic!("{other:?}"),
    }
    assert_eq!(server.bodies().len(), 1);
}

#[test]
fn missing_text_field_is_malformed() {
    let server = MockServer::start(vec![Reply::Json(200, r#"{"generated":"x"}"#)]);
    assert!(matches!(
        backend(&server.url, 0).generate(&request()),
        Err(BackendError::Malformed(_))
    ));
}

#[test]
fn unreachable_endpoint_is_unavailable() {
    // Bind then drop to get a port nobody listens on.
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let b = backend(&format!("http://127.0.0.1:{port}/generate"), 1);
    assert!(matches!(
        b.generate(&request()),
        Err(BackendError::Unavailable { attempts: 2, .. })
    ));
}

#[test]
fn recording_replays_through_scripted_backend() {
    let server = MockServer::start(vec![
        Reply::Json(200, r#"{"text":"<extra_id_0> first"}"#),
        Reply::Json(200, r#"{"text":"<extra_id_0> second"}"#),
    ]);
    let rec = Recording::new(backend(&server.url, 0));
    let keyed = request().with_key(RequestKey::new("ex1", TaskId::T10, None));
    let plain = GenRequest::new("Combined assertion: c Answer: a Question: <extra_id_0>", 16);
    assert_eq!(rec.generate(&keyed).unwrap().text, "<extra_id_0> first");
    assert_eq!(rec.generate(&plain).unwrap().text, "<extra_id_0> second");

    let log: Vec<RecordedCall> = rec
        .to_jsonl()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let replay = ScriptedBackend::from_recording(&log, MissPolicy::Fail);
    assert_eq!(replay.generate(&keyed).unwrap().text, "<extra_id_0> first");
    assert_eq!(replay.generate(&plain).unwrap().text, "<extra_id_0> second");
    assert!(matches!(
        replay.generate(&GenRequest::new("other", 1)),
        Err(BackendError::Miss(_))
    ));
}
