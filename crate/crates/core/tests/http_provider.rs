use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use hintforge_core::fixtures::pool_csv;
use hintforge_core::workbench::{JobRequest, JobState, Workbench, WorkbenchConfig, HTTP_PROVIDER};

fn read_request(sock: &mut TcpStream) -> Option<serde_json::Value> {
    let mut seen = Vec::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = sock.read(&mut buf).ok()?;
        if n == 0 {
            return None;
        }
        seen.extend_from_slice(&buf[..n]);
        let text = String::from_utf8_lossy(&seen);
        if let Some(idx) = text.find("\r\n\r\n") {
            let len: usize = text[..idx]
                .lines()
                .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse().unwrap()))
                .unwrap_or(0);
            if seen.len() >= idx + 4 + len {
                return serde_json::from_slice(&seen[idx + 4..idx + 4 + len]).ok();
            }
        }
    }
}

// Answers each listed step with a pathway that ends on the step's answer.
fn answer(user: &str) -> String {
    let mut out = serde_json::Map::new();
    for block in user.split("\n[").skip(1) {
        let key = &block[..block.find(']').unwrap()];
        let field = |name: &str| block.lines().find_map(|l| l.strip_prefix(name)).map(str::to_string);
        let ans = field("Answer: ").unwrap();
        let ty = field("Answer type: ").unwrap();
        let tail = match field("Choices: ") {
            Some(c) => format!(" :: {}", c.split(" | ").collect::<Vec<_>>().join("|")),
            None => String::new(),
        };
        let text = format!("HINT Start :: Read the step carefully.\nSCAFFOLD Finish :: What is the result? :: {ans} :: {ty}{tail}\n");
        out.insert(key.to_string(), text.into());
    }
    serde_json::Value::Object(out).to_string()
}

fn spawn_provider(fail_after: Option<usize>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let calls = Arc::new(AtomicUsize::new(0));
    let counter = calls.clone();
    std::thread::spawn(move || {
        for sock in listener.incoming() {
            let Ok(mut sock) = sock else { continue };
            let Some(req) = read_request(&mut sock) else { continue };
            let n = counter.fetch_add(1, Ordering::SeqCst);
            let (status, body) = if fail_after.is_some_and(|f| n >= f) {
                ("500 Internal Server Error", r#"{"error":"down"}"#.to_string())
            } else {
                let user = req["messages"][1]["content"].as_str().unwrap();
                let content = answer(user);
                ("200 OK", serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string())
            };
            let _ = write!(
                sock,
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    (url, calls)
}

fn workbench(url: String) -> Workbench {
    let wb = Workbench::open(WorkbenchConfig { provider_url: Some(url), batch_size: 2, ..Default::default() }).unwrap();
    let lessons: Vec<String> = ["2.5", "3.2"].iter().map(|s| s.to_string()).collect();
    wb.ingest_csv("alg", pool_csv(&lessons, 6).as_bytes()).unwrap();
    wb
}

fn job(k: usize) -> JobRequest {
    JobRequest {
        pool_id: "alg".into(),
        prompt_id: None,
        prompt_body: Some("Be encouraging.".into()),
        k: Some(k),
        provider: None,
        seed: 11,
        author: "p4".into(),
        steps: None,
        batch_size: None,
        jobs: Some(1),
    }
}

#[test]
fn http_provider_drives_a_full_job() {
    let (url, calls) = spawn_provider(None);
    let wb = workbench(url);
    assert_eq!(wb.default_provider(), HTTP_PROVIDER);
    let status = wb.run_job_blocking(&job(2)).unwrap();
    assert_eq!(status.state, JobState::Succeeded, "{:?}", status.error);
    assert_eq!(status.provider, HTTP_PROVIDER);
    // 6 steps in batches of 2, twice each.
    assert_eq!(calls.load(Ordering::SeqCst), 6);
    assert_eq!(status.generations, 12);
    assert_eq!(status.invalid, 0);
    let artifact = status.result.unwrap().artifact.unwrap();
    assert_eq!(artifact.records.len(), 6);
}

#[test]
fn provider_outage_fails_the_job_but_keeps_partials() {
    let (url, calls) = spawn_provider(Some(2));
    let wb = workbench(url);
    let status = wb.run_job_blocking(&job(1)).unwrap();
    assert_eq!(status.state, JobState::Failed);
    assert!(status.error.is_some());
    let result = status.result.unwrap();
    assert!(result.artifact.is_none());
    assert_eq!(result.pathways.len(), 4);
    // Provider errors are not retried and stop further calls.
    assert_eq!(calls.load(Ordering::SeqCst), 3);
}
