//! Queue, worker slots and the single-writer record store.

use std::collections::{BTreeMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::Instant;

use super::store::{BlobStore, Journal, JournalEvent};
use super::{assemble_vse, run_package, GridError, SimulationTask, TaskRecord, TaskState, WorkerSlot};

/// Executes a written package and leaves its waveform file at `out`.
pub trait Runner: Send + Sync {
    fn run(&self, package: &Path, out: &Path) -> Result<(), String>;
}

/// Runs packages on a thread of the orchestrator process.
#[derive(Debug, Default, Clone, Copy)]
pub struct InProcessRunner;

impl Runner for InProcessRunner {
    fn run(&self, package: &Path, out: &Path) -> Result<(), String> {
        let waves = run_package(package).map_err(|e| e.to_string())?;
        std::fs::write(out, waves.to_csv()).map_err(|e| e.to_string())
    }
}

/// Runs each package as `<program> vse-run --package <dir> --out <file>`
/// in its own working directory.
#[derive(Debug, Clone)]
pub struct ProcessRunner {
    pub program: PathBuf,
}

impl Runner for ProcessRunner {
    fn run(&self, package: &Path, out: &Path) -> Result<(), String> {
        let work = out.parent().unwrap_or(Path::new("."));
        let output = Command::new(&self.program)
            .arg("vse-run")
            .arg("--package")
            .arg(package)
            .arg("--out")
            .arg(out)
            .current_dir(work)
            .output()
            .map_err(|e| format!("cannot start {}: {e}", self.program.display()))?;
        if output.status.success() {
            Ok(())
        } else {
            let err = String::from_utf8_lossy(&output.stderr);
            Err(format!("worker exited with {}: {}", output.status, err.trim()))
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridConfig {
    pub data_dir: PathBuf,
    pub slots: Vec<WorkerSlot>,
}

struct State {
    records: BTreeMap<String, TaskRecord>,
    documents: BTreeMap<String, String>,
    queue: VecDeque<String>,
    slots: Vec<WorkerSlot>,
    journal: Journal,
    halted: bool,
    workers: Vec<JoinHandle<()>>,
}

struct Inner {
    state: Mutex<State>,
    changed: Condvar,
    blobs: BlobStore,
    data_dir: PathBuf,
    runner: Arc<dyn Runner>,
}

/// Single-orchestrator task grid.
///
/// All record mutations go through one mutex and are journaled before
/// they become visible. Workers hold the lock only to report progress.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<Inner>,
}

impl Grid {
    /// Opens (or creates) the store under `config.data_dir`, replays the
    /// journal and re-queues any task that was building or running.
    pub fn open(config: GridConfig, runner: Arc<dyn Runner>) -> Result<Self, GridError> {
        let journal = Journal::open(&config.data_dir.join("journal.jsonl"))?;
        let blobs = BlobStore::open(&config.data_dir.join("blobs"))?;
        let mut st = State {
            records: BTreeMap::new(),
            documents: BTreeMap::new(),
            queue: VecDeque::new(),
            slots: config.slots.into_iter().map(|s| WorkerSlot { assignments: Vec::new(), ..s }).collect(),
            journal,
            halted: false,
            workers: Vec::new(),
        };
        let mut order = Vec::new();
        for ev in st.journal.replay()? {
            apply(&mut st, &mut order, ev);
        }
        let stale: Vec<String> = order
            .iter()
            .filter(|id| matches!(st.records[*id].state, TaskState::Building | TaskState::Running))
            .cloned()
            .collect();
        for id in stale {
            let ev = JournalEvent::Requeue { id };
            st.journal.append(&ev)?;
            apply(&mut st, &mut order, ev);
        }
        st.queue = order.iter().filter(|id| st.records[*id].state == TaskState::Queued).cloned().collect();
        let grid = Grid {
            inner: Arc::new(Inner { state: Mutex::new(st), changed: Condvar::new(), blobs, data_dir: config.data_dir, runner }),
        };
        grid.refresh_notes(&mut grid.lock());
        Ok(grid)
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.inner.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Queues the document; resubmitting identical content returns the
    /// existing id without a second queue entry.
    pub fn submit(&self, document: &str) -> Result<String, GridError> {
        let task = SimulationTask::from_document(document)?;
        let mut st = self.lock();
        if st.records.contains_key(&task.id) {
            return Ok(task.id);
        }
        let ev = JournalEvent::Submit {
            id: task.id.clone(),
            document: task.document.clone(),
            device_profile: task.device_profile.clone(),
            strategy: task.strategy.clone(),
            submitted: task.submitted,
        };
        st.journal.append(&ev)?;
        let mut order = Vec::new();
        apply(&mut st, &mut order, ev);
        st.queue.push_back(task.id.clone());
        self.refresh_notes(&mut st);
        self.inner.changed.notify_all();
        Ok(task.id)
    }

    pub fn status(&self, id: &str) -> Result<TaskRecord, GridError> {
        self.lock().records.get(id).cloned().ok_or_else(|| GridError::UnknownTask(id.to_string()))
    }

    /// Path of the stored waveform file of a finished task.
    pub fn fetch_results(&self, id: &str) -> Result<PathBuf, GridError> {
        let rec = self.status(id)?;
        match (rec.state, rec.result) {
            (TaskState::Done, Some(addr)) => Ok(self.inner.blobs.path(&addr)),
            (state, _) => Err(GridError::NotFinished { id: id.to_string(), state }),
        }
    }

    pub fn result_csv(&self, id: &str) -> Result<String, GridError> {
        Ok(std::fs::read_to_string(self.fetch_results(id)?)?)
    }

    pub fn records(&self) -> Vec<TaskRecord> {
        self.lock().records.values().cloned().collect()
    }

    pub fn slots(&self) -> Vec<WorkerSlot> {
        self.lock().slots.clone()
    }

    pub fn queue_len(&self) -> usize {
        self.lock().queue.len()
    }

    /// Dispatches and starts a worker thread per new assignment.
    pub fn pump(&self) {
        let mut st = self.lock();
        if st.halted {
            return;
        }
        let assigned = dispatch_locked(&mut st);
        self.refresh_notes(&mut st);
        for (id, slot) in assigned {
            let doc = st.documents[&id].clone();
            let rec = st.records[&id].clone();
            let task = SimulationTask {
                id: id.clone(),
                document: doc,
                device_profile: rec.device_profile,
                strategy: rec.strategy,
                submitted: rec.submitted,
            };
            let grid = self.clone();
            st.workers.push(std::thread::spawn(move || grid.work(task, slot)));
        }
    }

    /// Blocks until no task is assigned and nothing queued can be placed.
    pub fn wait_idle(&self) {
        let mut st = self.lock();
        loop {
            let busy = st.slots.iter().any(|s| !s.assignments.is_empty());
            let placeable = st.queue.iter().any(|id| {
                let p = &st.records[id].device_profile;
                st.slots.iter().any(|s| &s.device_profile == p && s.has_room())
            });
            if !busy && (!placeable || st.halted) {
                break;
            }
            st = self.inner.changed.wait(st).unwrap_or_else(|e| e.into_inner());
        }
        let workers = std::mem::take(&mut st.workers);
        drop(st);
        for w in workers {
            let _ = w.join();
        }
    }

    /// Submits nothing new, waits for every queued task to finish.
    pub fn run_until_idle(&self) {
        self.pump();
        self.wait_idle();
    }

    /// Stops recording: in-flight work may finish but its outcome is
    /// dropped, as if the orchestrator had crashed.
    pub fn halt(&self) {
        self.lock().halted = true;
    }

    /// Halts and waits for in-flight workers. Reopening the data directory
    /// re-queues their tasks.
    pub fn abandon(self) {
        self.halt();
        let workers = std::mem::take(&mut self.lock().workers);
        for w in workers {
            let _ = w.join();
        }
    }

    fn work(&self, task: SimulationTask, slot: String) {
        let id = task.id.clone();
        let dir = self.inner.data_dir.join("packages").join(&id);
        let work = self.inner.data_dir.join("work").join(&id);
        let t0 = Instant::now();
        let built = catch_unwind(AssertUnwindSafe(|| assemble_vse(&task)))
            .unwrap_or_else(|_| Err(GridError::CompilationFailed("builder panicked".into())))
            .and_then(|pkg| pkg.write(&dir));
        let build_seconds = t0.elapsed().as_secs_f64();
        if let Err(e) = built {
            log::warn!("task {id} failed to build: {e}");
            self.finish(&id, &slot, TaskState::Failed, Some(build_seconds), None, Some(e.to_string()), None);
            return;
        }
        if !self.transition(&id, TaskState::Running, Some(build_seconds)) {
            return;
        }
        let t1 = Instant::now();
        let out = work.join("waveforms.csv");
        let ran = std::fs::create_dir_all(&work)
            .map_err(|e| e.to_string())
            .and_then(|_| {
                catch_unwind(AssertUnwindSafe(|| self.inner.runner.run(&dir, &out)))
                    .unwrap_or_else(|_| Err("worker panicked".into()))
            })
            .and_then(|_| std::fs::read(&out).map_err(|e| e.to_string()))
            .and_then(|bytes| self.inner.blobs.put(&bytes).map_err(|e| e.to_string()));
        let run_seconds = Some(t1.elapsed().as_secs_f64());
        match ran {
            Ok(addr) => self.finish(&id, &slot, TaskState::Done, None, run_seconds, None, Some(addr)),
            Err(e) => {
                log::warn!("task {id} failed: {e}");
                self.finish(&id, &slot, TaskState::Failed, None, run_seconds, Some(e), None)
            }
        }
    }

    fn transition(&self, id: &str, state: TaskState, build_seconds: Option<f64>) -> bool {
        let mut st = self.lock();
        if st.halted {
            return false;
        }
        let slot = st.records[id].slot.clone();
        let ev = JournalEvent::State {
            id: id.to_string(),
            state,
            slot,
            build_seconds,
            run_seconds: None,
            failure: None,
            result: None,
        };
        record(&mut st, ev);
        self.inner.changed.notify_all();
        true
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        id: &str,
        slot: &str,
        state: TaskState,
        build_seconds: Option<f64>,
        run_seconds: Option<f64>,
        failure: Option<String>,
        result: Option<String>,
    ) {
        {
            let mut st = self.lock();
            if st.halted {
                return;
            }
            let ev = JournalEvent::State {
                id: id.to_string(),
                state,
                slot: Some(slot.to_string()),
                build_seconds,
                run_seconds,
                failure,
                result,
            };
            record(&mut st, ev);
            if let Some(s) = st.slots.iter_mut().find(|s| s.id == slot) {
                s.assignments.retain(|a| a != id);
            }
            self.inner.changed.notify_all();
        }
        self.pump();
    }

    fn refresh_notes(&self, st: &mut State) {
        let State { queue, records, slots, .. } = st;
        for id in queue.iter() {
            let rec = records.get_mut(id).expect("queued task has a record");
            let p = &rec.device_profile;
            rec.waiting = Some(if slots.iter().any(|s| &s.device_profile == p) {
                format!("waiting for a free `{p}` worker slot")
            } else {
                format!("no worker slot offers profile `{p}`")
            });
        }
    }
}

/// FIFO assignment of `(task, profile)` entries to slots with room and a
/// matching profile. Returns `(task, slot)` pairs; the rest wait.
pub fn dispatch(queue: &[(String, String)], slots: &[WorkerSlot]) -> Vec<(String, String)> {
    let mut free: Vec<usize> = slots.iter().map(|s| s.capacity.saturating_sub(s.assignments.len())).collect();
    let mut out = Vec::new();
    for (id, profile) in queue {
        if let Some(i) = (0..slots.len()).find(|&i| free[i] > 0 && &slots[i].device_profile == profile) {
            free[i] -= 1;
            out.push((id.clone(), slots[i].id.clone()));
        }
    }
    out
}

fn dispatch_locked(st: &mut State) -> Vec<(String, String)> {
    let queue: Vec<(String, String)> =
        st.queue.iter().map(|id| (id.clone(), st.records[id].device_profile.clone())).collect();
    let out = dispatch(&queue, &st.slots);
    for (id, slot_id) in &out {
        st.queue.retain(|q| q != id);
        if let Some(s) = st.slots.iter_mut().find(|s| &s.id == slot_id) {
            s.assignments.push(id.clone());
        }
        let ev = JournalEvent::State {
            id: id.clone(),
            state: TaskState::Building,
            slot: Some(slot_id.clone()),
            build_seconds: None,
            run_seconds: None,
            failure: None,
            result: None,
        };
        record(st, ev);
    }
    out
}

/// Journals then applies. A journal write failure is logged and the
/// in-memory transition still happens so the grid keeps serving.
fn record(st: &mut State, ev: JournalEvent) {
    if let Err(e) = st.journal.append(&ev) {
        log::error!("journal append failed: {e}");
    }
    let mut order = Vec::new();
    apply(st, &mut order, ev);
}

fn apply(st: &mut State, order: &mut Vec<String>, ev: JournalEvent) {
    match ev {
        JournalEvent::Submit { id, document, device_profile, strategy, submitted } => {
            if st.records.contains_key(&id) {
                return;
            }
            order.push(id.clone());
            st.documents.insert(id.clone(), document);
            st.records.insert(
                id.clone(),
                TaskRecord {
                    id,
                    state: TaskState::Queued,
                    device_profile,
                    strategy,
                    submitted,
                    slot: None,
                    build_seconds: None,
                    run_seconds: None,
                    failure: None,
                    waiting: None,
                    result: None,
                },
            );
        }
        JournalEvent::State { id, state, slot, build_seconds, run_seconds, failure, result } => {
            let Some(rec) = st.records.get_mut(&id) else { return };
            if !rec.state.can_become(state) {
                log::warn!("ignoring {} -> {} for task {id}", rec.state, state);
                return;
            }
            rec.state = state;
            rec.waiting = None;
            rec.slot = slot.or(rec.slot.take());
            rec.build_seconds = build_seconds.or(rec.build_seconds);
            rec.run_seconds = run_seconds.or(rec.run_seconds);
            rec.failure = failure.or(rec.failure.take());
            rec.result = result.or(rec.result.take());
        }
        JournalEvent::Requeue { id } => {
            let Some(rec) = st.records.get_mut(&id) else { return };
            if rec.state.is_terminal() {
                return;
            }
            rec.state = TaskState::Queued;
            rec.slot = None;
            rec.build_seconds = None;
            rec.run_seconds = None;
        }
    }
}
