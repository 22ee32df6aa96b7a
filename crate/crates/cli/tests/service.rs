use std::process::Command;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use emtgrid::{parse_list, parse_slots, router};
use emtgrid_core::grid::{Grid, GridConfig, InProcessRunner, ProcessRunner, TaskRecord, TaskState, WorkerSlot};
use http_body_util::BodyExt;
use tower::ServiceExt;

const RC: &str = r#"{"nodes":["1"],"components":[
 {"id":"r","kind":"resistor","params":{"r":1000.0},"terminals":["1","0"]},
 {"id":"c","kind":"capacitor","params":{"c":1e-6,"v0":1.0},"terminals":["1","0"]}],
 "task":{"dt":1e-5,"duration":1e-3,"channels":["1"]}}"#;

fn grid(dir: &std::path::Path) -> Grid {
    let slots = vec![WorkerSlot::new("slot0", "cpu-serial", 1)];
    Grid::open(GridConfig { data_dir: dir.to_path_buf(), slots }, Arc::new(InProcessRunner)).unwrap()
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: &str) -> (StatusCode, String) {
    let req = Request::builder().method(method).uri(uri).body(Body::from(body.to_string())).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

#[test]
fn http_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let g = grid(dir.path());
    let app = router(g.clone());
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    rt.block_on(async {
        let (s, body) = call(&app, "POST", "/tasks", RC).await;
        assert_eq!(s, StatusCode::CREATED);
        let id = serde_json::from_str::<serde_json::Value>(&body).unwrap()["id"].as_str().unwrap().to_string();
        let (s, _) = call(&app, "POST", "/tasks", RC).await;
        assert_eq!(s, StatusCode::CREATED);

        let (s, _) = call(&app, "GET", "/tasks/nope", "").await;
        assert_eq!(s, StatusCode::NOT_FOUND);
        let (s, _) = call(&app, "POST", "/tasks", "{broken").await;
        assert_eq!(s, StatusCode::BAD_REQUEST);

        g.wait_idle();
        let (s, body) = call(&app, "GET", &format!("/tasks/{id}"), "").await;
        assert_eq!(s, StatusCode::OK);
        let rec: TaskRecord = serde_json::from_str(&body).unwrap();
        assert_eq!(rec.state, TaskState::Done);
        let (s, csv) = call(&app, "GET", &format!("/tasks/{id}/result"), "").await;
        assert_eq!(s, StatusCode::OK);
        assert!(csv.starts_with("time,1\n"));
        assert_eq!(csv.lines().count(), 101);

        let (_, slots) = call(&app, "GET", "/slots", "").await;
        let slots: Vec<WorkerSlot> = serde_json::from_str(&slots).unwrap();
        assert_eq!(slots.len(), 1);
        assert!(slots[0].assignments.is_empty());
    });
}

#[test]
fn unfinished_result_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let g = grid(dir.path());
    let id = g.submit(RC).unwrap();
    let app = router(g);
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    let (s, _) = rt.block_on(call(&app, "GET", &format!("/tasks/{id}/result"), ""));
    assert_eq!(s, StatusCode::CONFLICT);
}

#[test]
fn slot_and_list_syntax() {
    let s = parse_slots("cpu-serial:2, cpu-parallel").unwrap();
    assert_eq!(s.iter().map(|x| (x.id.as_str(), x.device_profile.as_str(), x.capacity)).collect::<Vec<_>>(),
        [("slot0", "cpu-serial", 2), ("slot1", "cpu-parallel", 1)]);
    assert!(parse_slots("cpu-serial:0").is_err());
    assert!(parse_slots("").is_err());
    assert_eq!(parse_list::<usize>("1,4, 16").unwrap(), [1, 4, 16]);
    assert!(parse_list::<usize>("1,x").is_err());
}

#[test]
fn worker_processes_run_packages() {
    let dir = tempfile::tempdir().unwrap();
    let slots = vec![WorkerSlot::new("slot0", "cpu-serial", 2)];
    let runner = Arc::new(ProcessRunner { program: env!("CARGO_BIN_EXE_emtgrid").into() });
    let g = Grid::open(GridConfig { data_dir: dir.path().to_path_buf(), slots }, runner).unwrap();
    let id = g.submit(RC).unwrap();
    g.run_until_idle();
    assert_eq!(g.status(&id).unwrap().state, TaskState::Done, "{:?}", g.status(&id));
    assert!(dir.path().join("work").join(&id).join("waveforms.csv").exists());
}

#[test]
fn cost_command() {
    let out = Command::new(env!("CARGO_BIN_EXE_emtgrid")).args(["cost", "--price", "145", "--hours", "0.29"]).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "0.250\n");
    let bad = Command::new(env!("CARGO_BIN_EXE_emtgrid")).args(["cost", "--price", "0", "--hours", "1"]).output().unwrap();
    assert!(!bad.status.success());
}

#[test]
fn offline_verbs_share_the_store() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("rc.json");
    std::fs::write(&model, RC).unwrap();
    let data = dir.path().join("data");
    let run = |args: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_emtgrid")).args(args).env("EMTGRID_DATA_DIR", &data).output().unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    let id = run(&["submit", model.to_str().unwrap()]).trim().to_string();
    assert!(run(&["status", &id]).contains("\"queued\""));
    assert!(run(&["grid", "run", "--slots", "cpu-serial"]).contains("done"));
    assert!(run(&["result", &id]).starts_with("time,1\n"));
}
