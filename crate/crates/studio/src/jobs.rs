//! FIFO job queue executed by one background thread. Evaluations inside a
//! job fan out over a dedicated rayon pool of `workers` threads.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{channel, Sender};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use growform_core::evolution::{run_evolution, EvolutionConfig, IndividualSpec};
use growform_core::interp::run_interpolation;
use serde::{Deserialize, Serialize};

use crate::error::StoreError;
use crate::store::Store;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Evolution,
    Interpolation,
    Growth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub kind: JobKind,
    pub status: JobStatus,
    pub progress: f64,
    /// Unix milliseconds.
    pub created_at: u64,
    pub updated_at: u64,
    /// API path of the produced resource once done.
    pub result: Option<String>,
    pub error: Option<String>,
}

pub enum JobSpec {
    Evolution(Box<EvolutionConfig>),
    Interpolation { a: Box<IndividualSpec>, b: Box<IndividualSpec>, steps: usize },
}

impl JobSpec {
    fn kind(&self) -> JobKind {
        match self {
            JobSpec::Evolution(_) => JobKind::Evolution,
            JobSpec::Interpolation { .. } => JobKind::Interpolation,
        }
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

struct Shared {
    store: Arc<Store>,
    records: RwLock<BTreeMap<String, JobRecord>>,
}

impl Shared {
    /// Applies `f` to a job and persists it. Progress never moves backwards
    /// and terminal states are final.
    fn update(&self, id: &str, f: impl FnOnce(&mut JobRecord)) {
        let snapshot = {
            let mut map = self.records.write().unwrap_or_else(|e| e.into_inner());
            let Some(rec) = map.get_mut(id) else { return };
            if rec.status.is_terminal() {
                return;
            }
            let before = rec.progress;
            f(rec);
            rec.progress = rec.progress.clamp(before, 1.0);
            rec.updated_at = now_ms();
            rec.clone()
        };
        if let Err(e) = self.store.put_job(&snapshot) {
            tracing::warn!(job = id, error = %e, "could not persist job record");
        }
    }
}

pub struct Jobs {
    shared: Arc<Shared>,
    tx: Mutex<Sender<(String, JobSpec)>>,
    next: AtomicU64,
}

impl Jobs {
    /// Loads job history from the store. Jobs that were still queued or
    /// running when the previous process stopped are marked failed.
    pub fn start(store: Arc<Store>, workers: usize) -> Result<Self, StoreError> {
        let mut records = BTreeMap::new();
        let mut max_seq = 0;
        for mut rec in store.jobs()? {
            if let Some(n) = rec.id.strip_prefix("job-").and_then(|s| s.parse::<u64>().ok()) {
                max_seq = max_seq.max(n);
            }
            if !rec.status.is_terminal() {
                rec.status = JobStatus::Failed;
                rec.error = Some("interrupted by a service restart".into());
                rec.updated_at = now_ms();
                store.put_job(&rec)?;
            }
            records.insert(rec.id.clone(), rec);
        }
        let shared = Arc::new(Shared { store, records: RwLock::new(records) });
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .thread_name(|i| format!("growform-eval-{i}"))
            .build()
            .map_err(|e| StoreError::Io(std::io::Error::other(e)))?;

        let (tx, rx) = channel::<(String, JobSpec)>();
        let worker = Arc::clone(&shared);
        std::thread::Builder::new().name("growform-jobs".into()).spawn(move || {
            while let Ok((id, spec)) = rx.recv() {
                worker.update(&id, |r| r.status = JobStatus::Running);
                let outcome = pool.install(|| execute(&worker, &id, spec));
                match outcome {
                    Ok(result) => worker.update(&id, |r| {
                        r.status = JobStatus::Done;
                        r.progress = 1.0;
                        r.result = Some(result);
                    }),
                    Err(e) => {
                        tracing::warn!(job = %id, error = %e, "job failed");
                        worker.update(&id, |r| {
                            r.status = JobStatus::Failed;
                            r.error = Some(e.to_string());
                        })
                    }
                }
            }
        })?;
        Ok(Jobs { shared, tx: Mutex::new(tx), next: AtomicU64::new(max_seq + 1) })
    }

    pub fn submit(&self, spec: JobSpec) -> Result<JobRecord, StoreError> {
        let id = format!("job-{:06}", self.next.fetch_add(1, Ordering::SeqCst));
        let t = now_ms();
        let rec = JobRecord {
            id: id.clone(),
            kind: spec.kind(),
            status: JobStatus::Queued,
            progress: 0.0,
            created_at: t,
            updated_at: t,
            result: None,
            error: None,
        };
        self.shared.store.put_job(&rec)?;
        self.shared.records.write().unwrap_or_else(|e| e.into_inner()).insert(id.clone(), rec.clone());
        let tx = self.tx.lock().unwrap_or_else(|e| e.into_inner());
        if tx.send((id.clone(), spec)).is_err() {
            self.shared.update(&id, |r| {
                r.status = JobStatus::Failed;
                r.error = Some("job runner stopped".into());
            });
        }
        Ok(rec)
    }

    pub fn get(&self, id: &str) -> Option<JobRecord> {
        self.shared.records.read().unwrap_or_else(|e| e.into_inner()).get(id).cloned()
    }
}

fn execute(shared: &Shared, id: &str, spec: JobSpec) -> Result<String, StoreError> {
    match spec {
        JobSpec::Evolution(cfg) => {
            let archive = run_evolution(&cfg, |done, total| {
                shared.update(id, |r| r.progress = done as f64 / total as f64 * 0.99);
            })?;
            shared.store.put_run(&archive)?;
            Ok(format!("/api/runs/{}", archive.run_id))
        }
        JobSpec::Interpolation { a, b, steps } => {
            let result = run_interpolation(&a, &b, steps, |done, total| {
                shared.update(id, |r| r.progress = done as f64 / total as f64 * 0.99);
            })?;
            shared.store.put_interpolation(&result)?;
            Ok(format!("/api/interpolations/{}", result.id))
        }
    }
}
