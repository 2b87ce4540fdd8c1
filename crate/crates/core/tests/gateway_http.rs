//! The HTTP clients against a scripted local server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use ragcap::lm_gateway::{
    complete, complete_multimodal, embed_remote, ChatClient, EmbedItem, EndpointConfig, GatewayError,
    GenerationRequest, HttpEmbedder, ImagePayload,
};
use ragcap::synthetic::TINY_PNG;
use ragcap::Language;
use serde_json::{json, Value};

enum Reply {
    /// Read the request, then close without answering.
    Drop,
    Respond(u16, String),
}

struct FakeServer {
    base_url: String,
    requests: Arc<Mutex<Vec<Value>>>,
    handle: Option<JoinHandle<()>>,
}

fn read_request(stream: &mut std::net::TcpStream) -> Value {
    let mut reader = BufReader::new(stream);
    let mut len = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().unwrap();
            }
        }
    }
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body).unwrap();
    serde_json::from_slice(&body).unwrap_or(Value::Null)
}

impl FakeServer {
    fn start(script: Vec<Reply>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base_url = format!("http://{}/v1", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let seen = Arc::clone(&requests);
        let handle = std::thread::spawn(move || {
            for reply in script {
                let (mut stream, _) = listener.accept().unwrap();
                let req = read_request(&mut stream);
                seen.lock().unwrap().push(req);
                match reply {
                    Reply::Drop => drop(stream),
                    Reply::Respond(status, body) => {
                        let head = format!(
                            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                            body.len()
                        );
                        stream.write_all(head.as_bytes()).unwrap();
                        stream.write_all(body.as_bytes()).unwrap();
                    }
                }
            }
        });
        Self {
            base_url,
            requests,
            handle: Some(handle),
        }
    }

    fn config(&self) -> EndpointConfig {
        EndpointConfig {
            base_url: self.base_url.clone(),
            model: "test-model".into(),
            timeout_secs: 10,
            backoff_ms: 1,
            ..Default::default()
        }
    }

    fn finish(mut self) -> Vec<Value> {
        self.handle.take().unwrap().join().unwrap();
        self.requests.lock().unwrap().clone()
    }
}

fn chat_reply(text: &str) -> String {
    json!({ "choices": [{ "message": { "role": "assistant", "content": text } }] }).to_string()
}

#[test]
fn retries_dropped_connections_then_succeeds() {
    let server = FakeServer::start(vec![
        Reply::Drop,
        Reply::Drop,
        Reply::Respond(200, chat_reply("\"Two planes.\"\nextra")),
    ]);
    let client = ChatClient::new(server.config());
    let req = GenerationRequest::text("CAPTION 1: x", "", Language::English);
    let out = complete(&client, &req).unwrap();
    assert_eq!(out.attempts, 3);
    assert_eq!(out.text, "Two planes.");
    assert!(out.backend_id.starts_with("http:"));
    assert_eq!(server.finish().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let server = FakeServer::start(vec![Reply::Respond(400, "{\"error\":\"bad\"}".into())]);
    let client = ChatClient::new(server.config());
    let err = complete(&client, &GenerationRequest::text("p", "", Language::English)).unwrap_err();
    assert!(
        matches!(
            err,
            GatewayError::Status {
                status: 400,
                attempts: 1,
                ..
            }
        ),
        "{err:?}"
    );
    assert_eq!(server.finish().len(), 1);
}

#[test]
fn server_errors_exhaust_attempts() {
    let server = FakeServer::start(vec![
        Reply::Respond(503, "{}".into()),
        Reply::Respond(429, "{}".into()),
        Reply::Respond(500, "{}".into()),
    ]);
    let client = ChatClient::new(server.config());
    let err = complete(&client, &GenerationRequest::text("p", "", Language::English)).unwrap_err();
    assert!(
        matches!(
            err,
            GatewayError::Status {
                status: 500,
                attempts: 3,
                ..
            }
        ),
        "{err:?}"
    );
    server.finish();
}

#[test]
fn multimodal_request_carries_one_text_and_one_image_part() {
    let server = FakeServer::start(vec![Reply::Respond(200, chat_reply("a caption"))]);
    let client = ChatClient::new(server.config());
    let req = GenerationRequest::text("describe", "", Language::German)
        .with_image(ImagePayload::from_bytes("image/png", &TINY_PNG));
    let out = complete_multimodal(&client, &req).unwrap();
    assert_eq!(out.text, "a caption");
    let sent = server.finish();
    let parts = sent[0]["messages"][0]["content"].as_array().unwrap();
    assert_eq!(parts.len(), 2);
    assert_eq!(parts[0], json!({ "type": "text", "text": "describe" }));
    assert_eq!(parts[1]["type"], "image_url");
    assert!(parts[1]["image_url"]["url"]
        .as_str()
        .unwrap()
        .starts_with("data:image/png;base64,iVBORw0KGgo"));
    assert_eq!(sent[0]["model"], "test-model");
    assert_eq!(sent[0]["num_beams"], 3);
}

#[test]
fn empty_completion_is_an_error() {
    let server = FakeServer::start(vec![Reply::Respond(200, chat_reply("  \n "))]);
    let client = ChatClient::new(server.config());
    let err = complete(&client, &GenerationRequest::text("p", "", Language::English)).unwrap_err();
    assert_eq!(err, GatewayError::EmptyCompletion);
    server.finish();
}

#[test]
fn embeddings_are_ordered_by_index() {
    let body = json!({ "data": [
        { "index": 1, "embedding": [0.0, 1.0, 0.0] },
        { "index": 0, "embedding": [1.0, 0.0, 0.0] },
    ]});
    let server = FakeServer::start(vec![Reply::Respond(200, body.to_string())]);
    let e = HttpEmbedder::new(server.config());
    let v = embed_remote(&e, &[EmbedItem::Text("a".into()), EmbedItem::Text("b".into())]).unwrap();
    assert_eq!(v[0].values(), &[1.0, 0.0, 0.0]);
    assert_eq!(v[1].values(), &[0.0, 1.0, 0.0]);
    let sent = server.finish();
    assert_eq!(sent[0]["input"], json!(["a", "b"]));
}

#[test]
fn inconsistent_embedding_dims_are_rejected() {
    let body = json!({ "data": [
        { "index": 0, "embedding": [1.0, 0.0, 0.0, 0.0] },
        { "index": 1, "embedding": [1.0, 0.0, 0.0, 0.0, 0.0] },
    ]});
    let server = FakeServer::start(vec![Reply::Respond(200, body.to_string())]);
    let e = HttpEmbedder::new(server.config());
    let err = embed_remote(&e, &[EmbedItem::Text("a".into()), EmbedItem::Text("b".into())]).unwrap_err();
    assert_eq!(
        err,
        GatewayError::DimensionInconsistency {
            index: 1,
            expected: 4,
            found: 5
        }
    );
    server.finish();
}
