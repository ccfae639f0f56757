use leanopt::llm::{ChatBackend, ChatMessage, ChatRequest, LlmError, RemoteBackend};
use leanopt::retrieval::{Embedder, RemoteEmbedder, RetrievalError};
use serde_json::{json, Value};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

struct Seen {
    head: String,
    body: Value,
}

/// Serves one request with `status` and `body`, and hands back what it received.
fn serve_once(status: u16, body: String) -> (String, mpsc::Receiver<Seen>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut r = BufReader::new(stream.try_clone().unwrap());
        let mut head = String::new();
        loop {
            let mut line = String::new();
            r.read_line(&mut line).unwrap();
            if line == "\r\n" || line.is_empty() {
                break;
            }
            head.push_str(&line);
        }
        let len = head
            .lines()
            .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap()))
            .unwrap_or(0);
        let mut buf = vec![0; len];
        r.read_exact(&mut buf).unwrap();
        let mut w = stream;
        write!(w, "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}", body.len())
            .unwrap();
        w.flush().unwrap();
        tx.send(Seen { head, body: serde_json::from_slice(&buf).unwrap_or(Value::Null) }).unwrap();
    });
    (url, rx)
}

fn request() -> ChatRequest {
    ChatRequest::new(vec![ChatMessage::system("be brief"), ChatMessage::user("type?")])
}

fn backend(url: &str) -> RemoteBackend {
    RemoteBackend::with_key(url, "m-1", Duration::from_secs(5), "sk-test")
}

#[test]
fn chat_round_trip() {
    let reply = json!({"choices": [{"message": {"role": "assistant", "content": "Final Answer: RA"}}]});
    let (url, rx) = serve_once(200, reply.to_string());
    assert_eq!(backend(&url).complete(&request()).unwrap(), "Final Answer: RA");
    let seen = rx.recv_timeout(Duration::from_secs(5)).unwrap();
    assert!(seen.head.starts_with("POST /v1/chat "), "{}", seen.head);
    assert!(seen.head.to_ascii_lowercase().contains("authorization: bearer sk-test"), "{}", seen.head);
    assert_eq!(seen.body["model"], "m-1");
    assert_eq!(seen.body["temperature"], 0.0);
    assert_eq!(seen.body["messages"][1]["content"], "type?");
    assert_eq!(seen.body["messages"].as_array().unwrap().len(), 2);
}

#[test]
fn error_status_keeps_body() {
    let (url, _rx) = serve_once(429, "{\"error\":\"slow down\"}".into());
    match backend(&url).complete(&request()) {
        Err(LlmError::Status { status, body }) => {
            assert_eq!(status, 429);
            assert!(body.contains("slow down"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_content_is_malformed() {
    let (url, _rx) = serve_once(200, json!({"choices": []}).to_string());
    assert!(matches!(backend(&url).complete(&request()), Err(LlmError::Malformed(_))));
    let (url, _rx) = serve_once(200, "not json".into());
    assert!(matches!(backend(&url).complete(&request()), Err(LlmError::Malformed(_))));
}

#[test]
fn closed_port_is_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let r = backend(&format!("http://127.0.0.1:{port}/v1/chat")).complete(&request());
    assert!(matches!(r, Err(LlmError::Transport(_))), "{r:?}");
}

#[test]
fn empty_message_rejected_before_sending() {
    let r = backend("http://127.0.0.1:9/unused").complete(&ChatRequest::new(vec![ChatMessage::user("  ")]));
    assert_eq!(r, Err(LlmError::EmptyMessage(0)));
}

#[test]
fn embedder_reads_vector_and_checks_dimension() {
    let (url, rx) = serve_once(200, json!({"data": [{"embedding": [0.6, 0.8, 0.0]}]}).to_string());
    let e = RemoteEmbedder::new(&url, "emb", 3);
    assert!(e.embed("seat allocation").is_ok());
    assert_eq!(rx.recv_timeout(Duration::from_secs(5)).unwrap().body["input"], "seat allocation");

    let (url, _rx) = serve_once(200, json!({"data": [{"embedding": [1.0, 0.0]}]}).to_string());
    let r = RemoteEmbedder::new(&url, "emb", 3).embed("x");
    assert!(matches!(r, Err(RetrievalError::Dimension { expected: 3, got: 2 })), "{r:?}");
}
