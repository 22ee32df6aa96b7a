mod common;

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use emtgrid_core::grid::*;
use emtgrid_core::kernels::run_serial;
use emtgrid_core::model::parse_model;
use proptest::prelude::*;
use serde_json::json;

fn rc_variant(i: usize, profile: &str) -> String {
    doc(
        &["1"],
        json!([
            {"id": "r", "kind": "resistor", "params": {"r": 1000.0 + i as f64}, "terminals": ["1", "0"]},
            {"id": "c", "kind": "capacitor", "params": {"c": 1e-6, "v0": 1.0}, "terminals": ["1", "0"]}
        ]),
        json!([]),
        json!([]),
        json!({"dt": 1e-5, "duration": 2e-3, "channels": ["1"], "device_profile": profile}),
    )
}

/// Node `2` hangs off node `1` through 1e15 Ω: conductively grounded, so
/// it validates, but its pivot sits far below the singularity threshold.
fn singular_doc() -> String {
    doc(
        &["1", "2"],
        json!([
            {"id": "r1", "kind": "resistor", "params": {"r": 1.0}, "terminals": ["1", "0"]},
            {"id": "rx", "kind": "resistor", "params": {"r": 1e15}, "terminals": ["1", "2"]},
            {"id": "c", "kind": "capacitor", "params": {"c": 1e-6, "v0": 1.0}, "terminals": ["1", "0"]}
        ]),
        json!([]),
        json!([]),
        json!({"dt": 1e-5, "duration": 1e-3, "channels": ["1"]}),
    )
}

fn open(dir: &Path, slots: Vec<WorkerSlot>) -> Grid {
    open_with(dir, slots, Arc::new(InProcessRunner))
}

fn open_with(dir: &Path, slots: Vec<WorkerSlot>, runner: Arc<dyn Runner>) -> Grid {
    Grid::open(GridConfig { data_dir: dir.to_path_buf(), slots }, runner).unwrap()
}

fn serial_slots(n: usize) -> Vec<WorkerSlot> {
    (0..n).map(|i| WorkerSlot::new(format!("s{i}"), "cpu-serial", 1)).collect()
}

fn journal_events(dir: &Path) -> Vec<JournalEvent> {
    fs::read_to_string(dir.join("journal.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Holds every run until released.
struct GateRunner {
    open: AtomicBool,
}

impl Runner for GateRunner {
    fn run(&self, package: &Path, out: &Path) -> Result<(), String> {
        while !self.open.load(Ordering::SeqCst) {
            std::thread::sleep(Duration::from_millis(2));
        }
        InProcessRunner.run(package, out)
    }
}

#[test]
fn resubmission_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let g = open(dir.path(), serial_slots(1));
    let d = rc_variant(0, "cpu-serial");
    let a = g.submit(&d).unwrap();
    let b = g.submit(&d).unwrap();
    assert_eq!(a, b);
    assert_eq!(g.queue_len(), 1);
    assert_eq!(g.records().len(), 1);
}

#[test]
fn id_ignores_formatting_and_key_order() {
    let d = rc_variant(3, "cpu-serial");
    let v: serde_json::Value = serde_json::from_str(&d).unwrap();
    let pretty = serde_json::to_string_pretty(&v).unwrap();
    let a = SimulationTask::from_document(&d).unwrap();
    let b = SimulationTask::from_document(&pretty).unwrap();
    assert_eq!(a.id, b.id);
    assert_eq!(a.id.len(), 64);
    assert_ne!(a.id, SimulationTask::from_document(&rc_variant(4, "cpu-serial")).unwrap().id);
    assert!(matches!(SimulationTask::from_document("{not json"), Err(GridError::Document(_))));
}

#[test]
fn unknown_and_unfinished_tasks() {
    let dir = tempfile::tempdir().unwrap();
    let g = open(dir.path(), serial_slots(1));
    assert!(matches!(g.status("nope"), Err(GridError::UnknownTask(_))));
    assert!(matches!(g.fetch_results("nope"), Err(GridError::UnknownTask(_))));
    let id = g.submit(&rc_variant(0, "cpu-serial")).unwrap();
    assert!(matches!(g.fetch_results(&id), Err(GridError::NotFinished { state: TaskState::Queued, .. })));
}

#[test]
fn eight_tasks_complete_with_serial_results() {
    let dir = tempfile::tempdir().unwrap();
    let g = open(dir.path(), serial_slots(3));
    let docs: Vec<String> = (0..8).map(|i| rc_variant(i, "cpu-serial")).collect();
    let ids: Vec<String> = docs.iter().map(|d| g.submit(d).unwrap()).collect();
    g.run_until_idle();
    for (id, d) in ids.iter().zip(&docs) {
        let rec = g.status(id).unwrap();
        assert_eq!(rec.state, TaskState::Done, "{rec:?}");
        assert!(rec.build_seconds.is_some() && rec.run_seconds.is_some());
        let m = parse_model(d).unwrap();
        let want = run_serial(&m, &m.task).unwrap().waveforms.to_csv();
        assert_eq!(g.result_csv(id).unwrap(), want);
    }
    assert!(g.slots().iter().all(|s| s.assignments.is_empty()));
}

#[test]
fn fifo_with_single_slot() {
    let q = vec![("a".to_string(), "A".to_string()), ("b".to_string(), "A".to_string())];
    let slots = vec![WorkerSlot::new("x", "A", 1)];
    assert_eq!(dispatch(&q, &slots), vec![("a".to_string(), "x".to_string())]);

    let mixed = vec![
        ("a".to_string(), "A".to_string()),
        ("b".to_string(), "B".to_string()),
        ("c".to_string(), "A".to_string()),
    ];
    let slots = vec![WorkerSlot::new("x", "A", 2), WorkerSlot::new("y", "A", 1)];
    let got = dispatch(&mixed, &slots);
    assert_eq!(got, vec![("a".to_string(), "x".to_string()), ("c".to_string(), "x".to_string())]);

    let dir = tempfile::tempdir().unwrap();
    let g = open(dir.path(), serial_slots(1));
    let a = g.submit(&rc_variant(0, "cpu-serial")).unwrap();
    let b = g.submit(&rc_variant(1, "cpu-serial")).unwrap();
    g.run_until_idle();
    let events = journal_events(dir.path());
    let pos = |id: &str, s: TaskState| {
        events
            .iter()
            .position(|e| matches!(e, JournalEvent::State { id: i, state, .. } if i == id && *state == s))
            .unwrap()
    };
    assert!(pos(&a, TaskState::Done) < pos(&b, TaskState::Building));
    assert_eq!(g.status(&b).unwrap().slot.as_deref(), Some("s0"));
}

#[test]
fn unknown_profile_waits_with_note() {
    let dir = tempfile::tempdir().unwrap();
    let g = open(dir.path(), serial_slots(1));
    let id = g.submit(&rc_variant(0, "gpu-p100")).unwrap();
    let ok = g.submit(&rc_variant(1, "cpu-serial")).unwrap();
    g.run_until_idle();
    let rec = g.status(&id).unwrap();
    assert_eq!(rec.state, TaskState::Queued);
    assert!(rec.waiting.unwrap().contains("no worker slot offers profile `gpu-p100`"));
    assert_eq!(g.status(&ok).unwrap().state, TaskState::Done);
}

#[test]
fn busy_slot_note() {
    let dir = tempfile::tempdir().unwrap();
    let runner = Arc::new(GateRunner { open: AtomicBool::new(false) });
    let g = open_with(dir.path(), serial_slots(1), runner.clone());
    g.submit(&rc_variant(0, "cpu-serial")).unwrap();
    let b = g.submit(&rc_variant(1, "cpu-serial")).unwrap();
    g.pump();
    let note = g.status(&b).unwrap().waiting.unwrap();
    assert!(note.contains("waiting for a free `cpu-serial` worker slot"), "{note}");
    runner.open.store(true, Ordering::SeqCst);
    g.wait_idle();
    assert_eq!(g.status(&b).unwrap().state, TaskState::Done);
}

#[test]
fn failing_task_is_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let g = open(dir.path(), serial_slots(4));
    let mut docs: Vec<String> = (0..19).map(|i| rc_variant(i, "cpu-serial")).collect();
    docs.insert(7, singular_doc());
    let ids: Vec<String> = docs.iter().map(|d| g.submit(d).unwrap()).collect();

    let poller = {
        let g = g.clone();
        let ids = ids.clone();
        std::thread::spawn(move || {
            let mut last = vec![TaskState::Queued; ids.len()];
            let deadline = Instant::now() + Duration::from_secs(60);
            loop {
                let states: Vec<TaskState> = ids.iter().map(|id| g.status(id).unwrap().state).collect();
                for (a, b) in last.iter().zip(&states) {
                    assert!(a <= b, "state moved back from {a} to {b}");
                }
                last = states;
                if last.iter().all(|s| s.is_terminal()) || Instant::now() > deadline {
                    break last;
                }
                std::thread::yield_now();
            }
        })
    };
    g.run_until_idle();
    let seen = poller.join().unwrap();
    let done = seen.iter().filter(|s| **s == TaskState::Done).count();
    assert_eq!((done, seen.len() - done), (19, 1));
    let bad = g.status(&ids[7]).unwrap();
    assert_eq!(bad.state, TaskState::Failed);
    assert!(bad.failure.unwrap().contains("singular"));
    assert!(g.slots().iter().all(|s| s.assignments.is_empty()));
    let late = g.submit(&rc_variant(100, "cpu-serial")).unwrap();
    g.run_until_idle();
    assert_eq!(g.status(&late).unwrap().state, TaskState::Done);
}

#[test]
fn dangling_node_fails_build() {
    let dir = tempfile::tempdir().unwrap();
    let g = open(dir.path(), serial_slots(1));
    let d = doc(
        &["1"],
        json!([{"id": "r", "kind": "resistor", "params": {"r": 1.0}, "terminals": ["1", "9"]}]),
        json!([]),
        json!([]),
        json!({"dt": 1e-5, "duration": 1e-4}),
    );
    let id = g.submit(&d).unwrap();
    g.run_until_idle();
    let rec = g.status(&id).unwrap();
    assert_eq!(rec.state, TaskState::Failed);
    assert!(rec.failure.unwrap().contains("DanglingReference"));
    assert!(rec.run_seconds.is_none());
}

#[test]
fn packages_are_deterministic_and_verified() {
    let task = SimulationTask::from_document(&control_rich_doc(50)).unwrap();
    let a = assemble_vse(&task).unwrap();
    let b = assemble_vse(&task).unwrap();
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    let (pa, pb) = (dir.path().join("a"), dir.path().join("b"));
    a.write(&pa).unwrap();
    b.write(&pb).unwrap();
    for f in ["manifest.json", "schedule.cgm", "engine.c", "state.txt"] {
        assert_eq!(fs::read(pa.join(f)).unwrap(), fs::read(pb.join(f)).unwrap(), "{f}");
    }
    assert_eq!(VSEPackage::read(&pa).unwrap(), a);
    let m = parse_model(&task.document).unwrap();
    let want = run_serial(&m, &m.task).unwrap().waveforms.to_csv();
    assert_eq!(run_package(&pa).unwrap().to_csv(), want);

    let mut state = fs::read_to_string(pa.join("state.txt")).unwrap();
    state.push_str("0.0\n");
    fs::write(pa.join("state.txt"), state).unwrap();
    assert!(matches!(VSEPackage::read(&pa), Err(GridError::Checksum(f)) if f == "state.txt"));
}

#[test]
fn restart_keeps_results_and_requeues_running() {
    let dir = tempfile::tempdir().unwrap();
    let docs: Vec<String> = (0..6).map(|i| rc_variant(i, "cpu-serial")).collect();
    let runner = Arc::new(GateRunner { open: AtomicBool::new(true) });
    let g = open_with(dir.path(), serial_slots(2), runner.clone());
    let ids: Vec<String> = docs.iter().map(|d| g.submit(d).unwrap()).collect();
    g.run_until_idle();
    let first: Vec<String> = ids[..2].to_vec();
    let kept: Vec<String> = first.iter().map(|id| g.result_csv(id).unwrap()).collect();
    drop(g);

    // Second session: two more tasks start, then the orchestrator dies.
    let extra: Vec<String> = (6..10).map(|i| rc_variant(i, "cpu-serial")).collect();
    runner.open.store(false, Ordering::SeqCst);
    let g = open_with(dir.path(), serial_slots(2), runner.clone());
    let new_ids: Vec<String> = extra.iter().map(|d| g.submit(d).unwrap()).collect();
    g.pump();
    let deadline = Instant::now() + Duration::from_secs(20);
    while new_ids[..2].iter().any(|id| g.status(id).unwrap().state != TaskState::Running) {
        assert!(Instant::now() < deadline);
        std::thread::sleep(Duration::from_millis(2));
    }
    g.halt();
    runner.open.store(true, Ordering::SeqCst);
    g.abandon();

    let g = open(dir.path(), serial_slots(2));
    for (id, csv) in first.iter().zip(&kept) {
        assert_eq!(g.status(id).unwrap().state, TaskState::Done);
        assert_eq!(&g.result_csv(id).unwrap(), csv);
    }
    for id in &new_ids {
        assert_eq!(g.status(id).unwrap().state, TaskState::Queued, "{id}");
    }
    assert_eq!(g.queue_len(), 4);
    g.run_until_idle();
    assert!(g.records().iter().all(|r| r.state == TaskState::Done));
    assert_eq!(g.records().len(), 10);
}

#[test]
fn torn_journal_tail_is_ignored() {
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let g = open(dir.path(), serial_slots(1));
        g.submit(&rc_variant(0, "cpu-serial")).unwrap()
    };
    let path = dir.path().join("journal.jsonl");
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("{\"event\":\"sta");
    fs::write(&path, text).unwrap();
    let g = open(dir.path(), serial_slots(1));
    assert_eq!(g.status(&id).unwrap().state, TaskState::Queued);
}

#[test]
fn state_transitions() {
    use TaskState::*;
    let all = [Queued, Building, Running, Done, Failed];
    let legal = [(Queued, Building), (Building, Running), (Building, Failed), (Running, Done), (Running, Failed)];
    for a in all {
        for b in all {
            assert_eq!(a.can_become(b), legal.contains(&(a, b)), "{a} -> {b}");
        }
    }
}

#[test]
fn rental_cost_examples() {
    assert_eq!(estimate_cost(115.0, 0.53, 1).unwrap(), 0.363);
    assert_eq!(estimate_cost(145.0, 0.29, 1).unwrap(), 0.25);
    assert_eq!(estimate_cost(168.0, 1.0, 1).unwrap(), 1.0);
    let m = CostModel { device: "Intel E5-2682".into(), price_per_week: 115.0 };
    assert_eq!(m.estimate(0.53, 1).unwrap(), 0.363);
    for (p, h, d) in [(0.0, 1.0, 1), (1.0, 0.0, 1), (1.0, 1.0, 0), (-5.0, 1.0, 1), (1.0, f64::NAN, 1)] {
        assert!(matches!(estimate_cost(p, h, d), Err(GridError::NonPositiveInput)));
    }
}

proptest! {
    #[test]
    fn cost_matches_closed_form(p in 0.01f64..1e4, h in 0.01f64..1e3, d in 1usize..64) {
        let c = estimate_cost(p, h, d).unwrap();
        let exact = d as f64 * p * h / 168.0;
        prop_assert!((c - exact).abs() <= 5e-4 + 1e-12 * exact);
        prop_assert_eq!((c * 1000.0).round() / 1000.0, c);
    }
}
