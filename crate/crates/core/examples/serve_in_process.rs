//! Starts the HTTP service on an ephemeral port, submits one attempt and
//! prints the responses.
//!
//!     cargo run --example serve_in_process -- [bundles-dir]

use std::path::PathBuf;

use prolab::bundle::Repository;
use prolab::service::{serve, AppState, ServiceConfig};
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};

fn request(addr: SocketAddr, method: &str, path: &str, body: &str) -> String {
    let mut s = TcpStream::connect(addr).unwrap();
    let req = format!(
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    );
    s.write_all(req.as_bytes()).unwrap();
    let mut out = String::new();
    s.read_to_string(&mut out).unwrap();
    out.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or(out)
}

fn main() {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../bundles"));
    let (repo, rejected) = Repository::load(&root).unwrap();
    for r in rejected {
        eprintln!("excluding {r}");
    }
    let state = AppState::in_memory(repo, ServiceConfig::default());
    let runtime = tokio::runtime::Runtime::new().unwrap();
    let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    runtime.spawn(serve(listener, state));

    println!("GET /api/v1/problems\n{}\n", request(addr, "GET", "/api/v1/problems", ""));
    let body = serde_json::json!({ "learner": "ann", "source": "gcd(X, 0, X).\ngcd(X, Y, G) :- G is X mod Y." });
    let resp = request(addr, "POST", "/api/v1/problems/gcd/submissions", &body.to_string());
    let v: serde_json::Value = serde_json::from_str(&resp).unwrap();
    println!("POST /api/v1/problems/gcd/submissions\n{}\n", serde_json::to_string_pretty(&v).unwrap());
    println!("GET /api/v1/learners/ann/model\n{}", request(addr, "GET", "/api/v1/learners/ann/model", ""));
}
