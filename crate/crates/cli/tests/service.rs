use pa_reward::detectors::DetectorRegistry;
use pa_reward::exec::{Harness, ResourceLimits};
use pa_reward::reward::{RewardConfig, RewardOverrides, Scorer};
use pa_reward::task::{load_candidates, load_task_corpus, CandidateProgram};
use pa_reward_cli::config::ServiceConfig;
use pa_reward_cli::service::{serve, ServiceState};
use serde_json::{json, Value};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

struct Server {
    addr: SocketAddr,
    stop: oneshot::Sender<()>,
    handle: JoinHandle<std::io::Result<()>>,
}

async fn start(limits: ServiceConfig, cli: RewardOverrides) -> Server {
    let tasks = load_task_corpus(&data("tasks/tasks.jsonl")).unwrap();
    let scorer = Scorer::new(
        DetectorRegistry::builtin(),
        Harness::new(ResourceLimits::default()).unwrap(),
        RewardConfig::default(),
    )
    .unwrap();
    let state = ServiceState::new(scorer, tasks, RewardOverrides::default(), cli, limits);
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (stop, rx) = oneshot::channel::<()>();
    let handle = tokio::spawn(serve(listener, state, async {
        let _ = rx.await;
    }));
    Server { addr, stop, handle }
}

/// Minimal HTTP/1.1 exchange over a fresh connection.
async fn http(addr: SocketAddr, method: &str, path: &str, body: &str) -> (u16, Value) {
    let mut s = TcpStream::connect(addr).await.unwrap();
    let req = format!(
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/x-ndjson\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    s.write_all(req.as_bytes()).await.unwrap();
    let mut raw = Vec::new();
    s.read_to_end(&mut raw).await.unwrap();
    let text = String::from_utf8(raw).unwrap();
    let (head, body) = text.split_once("\r\n\r\n").expect("response has a header block");
    let status: u16 = head.split_whitespace().nth(1).unwrap().parse().unwrap();
    let value = if body.trim().is_empty() { Value::Null } else { serde_json::from_str(body).unwrap_or(Value::String(body.into())) };
    (status, value)
}

fn batch(batch_id: &str, config: Option<Value>, items: &[CandidateProgram]) -> String {
    let mut header = json!({"schema_version": 1, "batch_id": batch_id});
    if let Some(c) = config {
        header["config"] = c;
    }
    let mut body = header.to_string();
    for c in items {
        body.push('\n');
        body.push_str(&json!({"candidate_id": c.candidate_id, "task_id": c.task_id, "source": c.source}).to_string());
    }
    body
}

fn samples() -> Vec<CandidateProgram> {
    load_candidates(&data("tasks/candidates.jsonl")).unwrap()
}

fn sleeper(id: &str) -> CandidateProgram {
    CandidateProgram {
        candidate_id: id.into(),
        task_id: "m-fizzbuzz".into(),
        source: "import time\ntime.sleep(1.5)\n".into(),
    }
}

async fn health(addr: SocketAddr) -> Value {
    http(addr, "GET", "/health", "").await.1
}

async fn wait_for(addr: SocketAddr, pred: impl Fn(&Value) -> bool) -> Value {
    for _ in 0..200 {
        let h = health(addr).await;
        if pred(&h) {
            return h;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    panic!("health never reached the expected state: {}", health(addr).await);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn batch_results_keep_request_order() {
    let srv = start(ServiceConfig::default(), RewardOverrides::default()).await;
    let items: Vec<CandidateProgram> = samples().into_iter().step_by(5).take(4).collect();
    let (status, v) = http(srv.addr, "POST", "/v1/score", &batch("b1", None, &items)).await;
    assert_eq!(status, 200, "{v}");
    assert_eq!(v["batch_id"], "b1");
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["config"]["alpha"], 0.5);
    assert!(v["timing"]["queued_ms"].is_u64() && v["timing"]["scoring_ms"].is_u64());
    let rewards = v["rewards"].as_array().unwrap();
    let ids: Vec<&str> = rewards.iter().map(|r| r["candidate_id"].as_str().unwrap()).collect();
    let want: Vec<&str> = items.iter().map(|c| c.candidate_id.as_str()).collect();
    assert_eq!(ids, want);

    // Same records as scoring directly.
    let tasks = load_task_corpus(&data("tasks/tasks.jsonl")).unwrap();
    let scorer =
        Scorer::new(DetectorRegistry::builtin(), Harness::new(ResourceLimits::default()).unwrap(), RewardConfig::default())
            .unwrap();
    for (c, r) in items.iter().zip(rewards) {
        let t = tasks.iter().find(|t| t.task_id == c.task_id).unwrap();
        assert_eq!(*r, serde_json::to_value(scorer.score(c, t).unwrap()).unwrap());
    }
    srv.stop.send(()).unwrap();
    srv.handle.await.unwrap().unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_identical_batches_agree() {
    let srv = start(ServiceConfig { max_in_flight: 4, ..Default::default() }, RewardOverrides::default()).await;
    let items: Vec<CandidateProgram> = samples().into_iter().take(3).collect();
    let body = batch("same", None, &items);
    let mut joins = Vec::new();
    for _ in 0..8 {
        let (addr, body) = (srv.addr, body.clone());
        joins.push(tokio::spawn(async move { http(addr, "POST", "/v1/score", &body).await }));
    }
    let mut results = Vec::new();
    for j in joins {
        let (status, v) = j.await.unwrap();
        assert_eq!(status, 200, "{v}");
        results.push(v["rewards"].clone());
    }
    assert!(results.windows(2).all(|w| w[0] == w[1]));
    srv.stop.send(()).unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn unknown_task_is_a_per_item_error() {
    let srv = start(ServiceConfig::default(), RewardOverrides::default()).await;
    let mut items: Vec<CandidateProgram> = samples().into_iter().take(2).collect();
    items.insert(1, CandidateProgram { candidate_id: "ghost".into(), task_id: "no-such-task".into(), source: "print(1)".into() });
    let (status, v) = http(srv.addr, "POST", "/v1/score", &batch("b", None, &items)).await;
    assert_eq!(status, 200);
    let rewards = v["rewards"].as_array().unwrap();
    assert_eq!(rewards.len(), 3);
    assert_eq!(rewards[1]["candidate_id"], "ghost");
    assert_eq!(rewards[1]["error"]["kind"], "unknown_task");
    assert!(rewards[1]["error"]["message"].as_str().unwrap().contains("no-such-task"));
    assert!(rewards[0]["r_hybrid"].is_number() && rewards[2]["r_hybrid"].is_number());
    srv.stop.send(()).unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn malformed_and_oversized_requests_are_rejected() {
    let srv = start(ServiceConfig { max_batch: 3, ..Default::default() }, RewardOverrides::default()).await;
    let items: Vec<CandidateProgram> = samples().into_iter().take(4).collect();
    let (status, v) = http(srv.addr, "POST", "/v1/score", &batch("big", None, &items)).await;
    assert_eq!(status, 413);
    assert!(v["error"].as_str().unwrap().contains("limit is 3"), "{v}");

    let (status, v) = http(srv.addr, "POST", "/v1/score", "{\"schema_version\": 9, \"batch_id\": \"x\"}").await;
    assert_eq!(status, 400);
    assert!(v["error"].as_str().unwrap().contains("schema_version"));

    let (status, _) = http(srv.addr, "POST", "/v1/score", &format!("{}\nnot json", batch("x", None, &[]))).await;
    assert_eq!(status, 400);

    let (status, v) = http(srv.addr, "POST", "/v1/score", &batch("x", Some(json!({"alpha": 4.0})), &items[..1])).await;
    assert_eq!(status, 400);
    assert!(v["error"].as_str().unwrap().contains("alpha"));

    let (status, _) = http(srv.addr, "POST", "/v1/score", "").await;
    assert_eq!(status, 400);
    srv.stop.send(()).unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn request_config_sits_between_file_and_flags() {
    let srv = start(ServiceConfig::default(), RewardOverrides::default()).await;
    let items: Vec<CandidateProgram> = samples().into_iter().take(2).collect();
    let (_, v) = http(srv.addr, "POST", "/v1/score", &batch("a", Some(json!({"alpha": 0.3})), &items)).await;
    assert_eq!(v["config"]["alpha"], 0.3);
    assert!(v["rewards"].as_array().unwrap().iter().all(|r| r["alpha"] == 0.3));
    srv.stop.send(()).unwrap();

    let pinned = start(ServiceConfig::default(), RewardOverrides { alpha: Some(0.9), ..Default::default() }).await;
    let (_, v) = http(pinned.addr, "POST", "/v1/score", &batch("a", Some(json!({"alpha": 0.3, "normalize": true})), &items)).await;
    assert_eq!(v["config"]["alpha"], 0.9);
    assert_eq!(v["config"]["normalize"], true);
    assert!(v["rewards"].as_array().unwrap().iter().all(|r| r["alpha"] == 0.9 && r["normalized"].is_number()));
    pinned.stop.send(()).unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn health_reports_queue_and_backpressure() {
    let srv = start(ServiceConfig { max_in_flight: 1, max_queue: 1, ..Default::default() }, RewardOverrides::default()).await;
    let h = health(srv.addr).await;
    assert_eq!((h["status"].as_str(), h["queue_depth"].as_u64(), h["in_flight"].as_u64()), (Some("ok"), Some(0), Some(0)));
    assert_eq!(h["tasks"], 20);

    let slow = batch("slow", None, &[sleeper("s")]);
    let first = {
        let (addr, body) = (srv.addr, slow.clone());
        tokio::spawn(async move { http(addr, "POST", "/v1/score", &body).await })
    };
    wait_for(srv.addr, |h| h["in_flight"] == 1).await;
    let second = {
        let (addr, body) = (srv.addr, slow.clone());
        tokio::spawn(async move { http(addr, "POST", "/v1/score", &body).await })
    };
    let h = wait_for(srv.addr, |h| h["queue_depth"] == 1).await;
    assert_eq!(h["in_flight"], 1);

    let (status, v) = http(srv.addr, "POST", "/v1/score", &slow).await;
    assert_eq!(status, 503, "{v}");

    assert_eq!(first.await.unwrap().0, 200);
    assert_eq!(second.await.unwrap().0, 200);
    let h = health(srv.addr).await;
    assert_eq!((h["queue_depth"].as_u64(), h["in_flight"].as_u64()), (Some(0), Some(0)));
    srv.stop.send(()).unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn shutdown_drains_in_flight_batches() {
    let srv = start(ServiceConfig::default(), RewardOverrides::default()).await;
    let addr = srv.addr;
    let pending = tokio::spawn(async move { http(addr, "POST", "/v1/score", &batch("drain", None, &[sleeper("d")])).await });
    wait_for(addr, |h| h["in_flight"] == 1).await;
    srv.stop.send(()).unwrap();
    let (status, v) = pending.await.unwrap();
    assert_eq!(status, 200);
    assert_eq!(v["rewards"][0]["candidate_id"], "d");
    assert_eq!(v["rewards"][0]["runnable"], true);
    tokio::time::timeout(Duration::from_secs(10), srv.handle).await.expect("server stops").unwrap().unwrap();
    assert!(TcpStream::connect(addr).await.is_err());
}
