#![allow(dead_code)]

use std::sync::Arc;

use belief_dialog::classifier::{default_labels, FixedBelief};
use belief_dialog::dialog::DialogEngine;
use belief_dialog_service::AppConfig;

pub const ADVISING_TURNS: [&str; 3] = [
    "I am a junior year student with interest in statistics and data analysis",
    "I would prefer a class with lighter workload and higher helpfulness rating",
    "I prefer morning classes as I sleep early at night.",
];

/// Ten turns spread over three sessions as `(session, text)`.
pub const SCRIPT: [(usize, &str); 10] = [
    (0, ADVISING_TURNS[0]),
    (1, "hello"),
    (0, ADVISING_TURNS[1]),
    (2, "I have no inkling of where I want my life to go"),
    (1, "I like programming"),
    (0, ADVISING_TURNS[2]),
    (2, "I am interested in machine learning"),
    (1, "I am a senior"),
    (2, "I prefer afternoon classes"),
    (1, "I want a heavy workload"),
];

pub const GREETING: &str = "Hi! I am your advisor. You can ask any doubts in selection of your courses for next semester.";

pub fn bundled_engine() -> DialogEngine {
    AppConfig::default().engine().unwrap()
}

pub fn fixed_engine(label: &str) -> DialogEngine {
    AppConfig::default().engine_with(Arc::new(FixedBelief::one_hot(default_labels(), label).unwrap())).unwrap()
}

/// Minimal blocking HTTP/1.1 client for talking to a spawned server.
pub fn http(addr: &str, method: &str, path: &str, body: Option<&serde_json::Value>) -> (u16, serde_json::Value) {
    use std::io::{Read, Write};
    let mut stream = std::net::TcpStream::connect(addr).unwrap();
    let payload = body.map(|b| b.to_string()).unwrap_or_default();
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{payload}",
        payload.len()
    )
    .unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).unwrap();
    let (head, body) = raw.split_once("\r\n\r\n").unwrap();
    assert!(!head.to_ascii_lowercase().contains("transfer-encoding: chunked"));
    let status = head.split_whitespace().nth(1).unwrap().parse().unwrap();
    (status, serde_json::from_str(body).unwrap_or(serde_json::Value::Null))
}
