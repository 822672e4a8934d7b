use std::path::Path;
use std::sync::Arc;
use std::thread;

use bomuse_core::{run_session, BatchRecord, Mode, Session, SessionConfig};
use bomuse_service::{AdvanceResponse, CreateRequest, Defaults, SessionState, SessionView, Store};
use serde_json::{json, Value};

struct Server {
    base: String,
    _stop: tokio::sync::oneshot::Sender<()>,
}

fn start(store: Store) -> Server {
    start_with(store, Defaults::default())
}

fn start_with(store: Store, defaults: Defaults) -> Server {
    let (tx, rx) = std::sync::mpsc::channel();
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            bomuse_service::serve_with(listener, Arc::new(store), defaults, async {
                let _ = stop_rx.await;
            })
            .await
            .unwrap();
        });
    });
    Server { base: format!("http://{}", rx.recv().unwrap()), _stop: stop_tx }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().new_agent()
}

fn post(url: &str, body: Value) -> (u16, String) {
    let mut r = agent().post(url).send_json(body).unwrap();
    (r.status().as_u16(), r.body_mut().read_to_string().unwrap())
}

fn get(url: &str) -> (u16, String) {
    let mut r = agent().get(url).call().unwrap();
    (r.status().as_u16(), r.body_mut().read_to_string().unwrap())
}

fn create(server: &Server, req: &CreateRequest) -> SessionView {
    let (code, body) = post(&format!("{}/sessions", server.base), serde_json::to_value(req).unwrap());
    assert_eq!(code, 201, "{body}");
    serde_json::from_str(&body).unwrap()
}

fn advance(server: &Server, id: &str) -> AdvanceResponse {
    let (code, body) = post(&format!("{}/sessions/{id}/advance", server.base), json!({}));
    assert_eq!(code, 200, "{body}");
    serde_json::from_str(&body).unwrap()
}

fn with_config(id: &str, config: SessionConfig) -> CreateRequest {
    CreateRequest { id: Some(id.into()), config: Some(config), ..Default::default() }
}

#[test]
fn healthz() {
    let s = start(Store::in_memory());
    assert_eq!(get(&format!("{}/healthz", s.base)), (200, "ok".to_string()));
}

#[test]
fn http_session_matches_library_run() {
    let s = start(Store::in_memory());
    for (i, mode) in Mode::ALL.into_iter().enumerate() {
        let config = SessionConfig::for_benchmark("matyas", mode, 3, 3, 40 + i as u64).unwrap();
        let id = format!("eq-{i}");
        let view = create(&s, &with_config(&id, config.clone()));
        let mut records = Vec::new();
        for _ in 0..view.budget_batches {
            records.push(advance(&s, &id).record);
        }
        let (expected, _) = run_session(config.clone()).unwrap();
        assert_eq!(records, expected, "{mode:?}");
        let (_, body) = get(&format!("{}/sessions/{id}", s.base));
        let view: SessionView = serde_json::from_str(&body).unwrap();
        assert_eq!(view.records, expected);

        let mut local = Session::new(config).unwrap();
        while !local.is_finished() {
            local.run_batch(None).unwrap();
        }
        let (code, csv) = get(&format!("{}/sessions/{id}/export.csv", s.base));
        assert_eq!(code, 200);
        assert_eq!(csv, local.export_csv(false));
    }
}

#[test]
fn truth_is_withheld_unless_revealed() {
    let s = start(Store::in_memory());
    let mut req = CreateRequest { id: Some("hidden".into()), benchmark: Some("matyas".into()), batches: Some(1), ..Default::default() };
    create(&s, &req);
    advance(&s, "hidden");
    let (_, body) = get(&format!("{}/sessions/hidden", s.base));
    assert!(!body.contains("f_true") && !body.contains("simple_regret"));

    req.id = Some("shown".into());
    req.reveal_truth = true;
    create(&s, &req);
    let (_, body) = get(&format!("{}/sessions/shown", s.base));
    let v: Value = serde_json::from_str(&body).unwrap();
    assert!(v["observations"][0]["f_true"].is_number());
}

#[test]
fn create_errors() {
    let s = start(Store::in_memory());
    let req = CreateRequest { id: Some("dup".into()), benchmark: Some("levy".into()), ..Default::default() };
    create(&s, &req);
    let url = format!("{}/sessions", s.base);
    assert_eq!(post(&url, serde_json::to_value(&req).unwrap()).0, 409);
    assert_eq!(post(&url, json!({"benchmark": "nope"})).0, 400);
    assert_eq!(post(&url, json!({"id": "bad id!", "benchmark": "matyas"})).0, 400);
    assert_eq!(post(&url, json!({})).0, 400);
    assert_eq!(get(&format!("{url}/missing")).0, 404);
}

#[test]
fn live_human_round_trip() {
    let s = start(Store::in_memory());
    let req = CreateRequest {
        id: Some("live".into()),
        benchmark: Some("matyas".into()),
        batches: Some(2),
        live_human: true,
        ..Default::default()
    };
    let view = create(&s, &req);
    assert_eq!(view.phase, bomuse_service::Phase::AwaitingHuman);
    let adv = format!("{}/sessions/live/advance", s.base);
    let sug = format!("{}/sessions/live/suggestion", s.base);
    assert_eq!(post(&adv, json!({})).0, 409);

    let (code, body) = post(&sug, json!({"x": [3.0, -12.5]}));
    assert_eq!(code, 422);
    let err: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(err["violations"][0]["dim"], 2);
    assert_eq!(err["violations"][0]["value"], -12.5);
    assert_eq!(post(&sug, json!({"x": [1.0]})).0, 400);

    assert_eq!(post(&sug, json!({"x": [1.5, -2.0]})).0, 200);
    assert_eq!(post(&sug, json!({"x": [0.0, 0.0]})).0, 409);
    let r = advance(&s, "live");
    assert_eq!(r.record.x_human, Some(vec![1.5, -2.0]));
    assert_eq!(r.session.observations.len(), 5);
    assert_eq!(r.session.phase, bomuse_service::Phase::AwaitingHuman);
}

#[test]
fn advancing_a_finished_session_conflicts() {
    let s = start(Store::in_memory());
    let req = CreateRequest { id: Some("done".into()), benchmark: Some("matyas".into()), batches: Some(1), ..Default::default() };
    create(&s, &req);
    let r = advance(&s, "done");
    assert_eq!(r.session.phase, bomuse_service::Phase::Finished);
    assert_eq!(post(&format!("{}/sessions/done/advance", s.base), json!({})).0, 409);
}

#[test]
fn concurrent_advances_serialize() {
    let s = start(Store::in_memory());
    let config = SessionConfig::for_benchmark("ackley", Mode::BoMuse, 3, 4, 2).unwrap();
    create(&s, &with_config("race", config.clone()));
    let url = format!("{}/sessions/race/advance", s.base);
    let handles: Vec<_> = (0..4).map(|_| {
        let url = url.clone();
        thread::spawn(move || post(&url, json!({})).0)
    }).collect();
    for h in handles {
        assert_eq!(h.join().unwrap(), 200);
    }
    let (_, body) = get(&format!("{}/sessions/race", s.base));
    let view: SessionView = serde_json::from_str(&body).unwrap();
    let (expected, _): (Vec<BatchRecord>, _) = run_session(config).unwrap();
    assert_eq!(view.records, expected);
}

fn file_bytes(dir: &Path, id: &str) -> Vec<u8> {
    std::fs::read(dir.join(format!("{id}.json"))).unwrap()
}

#[test]
fn reload_is_byte_identical_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let config = SessionConfig::for_benchmark("rastrigin", Mode::BoMuse, 3, 4, 7).unwrap();
    {
        let s = start(Store::open(dir.path()).unwrap());
        create(&s, &with_config("keep", config.clone()));
        advance(&s, "keep");
        advance(&s, "keep");
    }
    let before = file_bytes(dir.path(), "keep");
    let store = Store::open(dir.path()).unwrap();
    let state: SessionState = (*store.get("keep").unwrap().snapshot()).clone();
    assert_eq!(serde_json::to_vec_pretty(&state).unwrap(), before);

    let s = start(store);
    let mut records = state.data.records.clone();
    records.push(advance(&s, "keep").record);
    records.push(advance(&s, "keep").record);
    let (expected, _) = run_session(config).unwrap();
    assert_eq!(records, expected);
}

#[test]
fn server_defaults_apply_to_short_form_only() {
    let defaults = Defaults { delta: Some(0.2), zeta: Some(9.0), sigma: Some(0.5) };
    let server = start_with(Store::in_memory(), defaults);
    let short = CreateRequest { id: Some("short".into()), benchmark: Some("matyas".into()), batches: Some(2), ..Default::default() };
    let view = create(&server, &short);
    let record = advance(&server, "short").record;

    let mut expected = short.clone().into_config().unwrap();
    expected.zeta = 9.0;
    expected.delta = 0.2;
    let range = bomuse_core::ObjectiveConfig::builtin("matyas").instantiate().unwrap().range_estimate().unwrap();
    expected = expected.with_noise_std(0.5, range);
    let mut session = Session::new(expected).unwrap();
    assert_eq!(view.schedule.beta_next, session.schedule().beta());
    assert_eq!(record, session.run_batch(None).unwrap());

    let plain = SessionConfig::for_benchmark("matyas", Mode::BoMuse, 3, 2, 0).unwrap();
    let full = create(&server, &with_config("full", plain.clone()));
    assert_eq!(full.schedule.beta_next, Session::new(plain).unwrap().schedule().beta());
    assert_ne!(full.schedule.beta_next, view.schedule.beta_next);
}
