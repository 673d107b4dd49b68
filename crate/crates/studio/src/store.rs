//! On-disk layout under the store root:
//!
//! ```text
//! runs/{run_id}.json            run archives
//! individuals/{id}.json         individual records
//! layers/{id}.json.gz           gzipped contour documents, grown on demand
//! interpolations/{id}.json      interpolation results
//! jobs/{job_id}.json            job records
//! ```
//!
//! Every write goes to a temporary file in the same directory and is then
//! renamed over the target, so readers never observe partial documents.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use growform_core::evolution::{IndividualRecord, IndividualSpec, Objective, RunArchive};
use growform_core::interp::InterpolationResult;
use growform_core::metrics::{FitnessVector, MetricsConfig};
use growform_core::{Genome, LayerStack, SimConfig};
use serde::{Deserialize, Serialize};

use crate::error::StoreError;
use crate::jobs::JobRecord;

const DIRS: [&str; 5] = ["runs", "individuals", "layers", "interpolations", "jobs"];

/// Stored individual: enough to regrow it, plus its (compact) fitness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndividualDoc {
    pub id: String,
    pub genome_normalized: Vec<f64>,
    pub genome: Option<Genome>,
    pub env_seed: u64,
    pub sim_config: SimConfig,
    pub metrics_config: MetricsConfig,
    pub fitness: Option<FitnessVector>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl IndividualDoc {
    pub fn from_record(archive: &RunArchive, r: &IndividualRecord) -> Self {
        let spec = archive.spec_for(r);
        IndividualDoc {
            id: r.id.clone(),
            genome_normalized: spec.genome_normalized,
            genome: r.genome,
            env_seed: spec.env_seed,
            sim_config: spec.sim_config,
            metrics_config: spec.metrics_config,
            fitness: r.fitness.clone(),
            error: r.error.clone(),
        }
    }

    pub fn spec(&self) -> IndividualSpec {
        IndividualSpec {
            genome_normalized: self.genome_normalized.clone(),
            env_seed: self.env_seed,
            sim_config: self.sim_config.clone(),
            metrics_config: self.metrics_config.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub objective: Objective,
    pub lambda: usize,
    pub mu: usize,
    pub generations: usize,
    pub env_seed: u64,
    pub best: Option<f64>,
}

pub struct Store {
    root: PathBuf,
    write_lock: Mutex<()>,
    tmp_counter: AtomicU64,
}

/// Ids become file names; anything outside `[A-Za-z0-9_-]` is refused.
fn safe_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

impl Store {
    pub fn open(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        for d in DIRS {
            fs::create_dir_all(root.join(d))?;
        }
        Ok(Store { root, write_lock: Mutex::new(()), tmp_counter: AtomicU64::new(0) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, dir: &str, id: &str, ext: &str) -> Option<PathBuf> {
        safe_id(id).then(|| self.root.join(dir).join(format!("{id}.{ext}")))
    }

    fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        let n = self.tmp_counter.fetch_add(1, Ordering::Relaxed);
        let tmp = path.with_extension(format!("tmp-{}-{n}", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    fn read(&self, path: Option<PathBuf>) -> Result<Option<Vec<u8>>, StoreError> {
        let Some(path) = path else { return Ok(None) };
        match fs::read(path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn ids_in(&self, dir: &str, ext: &str) -> Result<Vec<String>, StoreError> {
        let suffix = format!(".{ext}");
        let mut ids: Vec<String> = fs::read_dir(self.root.join(dir))?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(&suffix)).map(str::to_string))
            .filter(|id| safe_id(id))
            .collect();
        ids.sort();
        Ok(ids)
    }

    /// Stores the archive and every individual in it.
    pub fn put_run(&self, archive: &RunArchive) -> Result<(), StoreError> {
        for g in &archive.generations {
            for r in &g.individuals {
                self.put_individual(&IndividualDoc::from_record(archive, r))?;
            }
        }
        let path = self.path("runs", &archive.run_id, "json").expect("run ids are path-safe");
        self.write_atomic(&path, archive.to_json().as_bytes())
    }

    pub fn run_bytes(&self, id: &str) -> Result<Option<Vec<u8>>, StoreError> {
        self.read(self.path("runs", id, "json"))
    }

    pub fn run(&self, id: &str) -> Result<Option<RunArchive>, StoreError> {
        match self.run_bytes(id)? {
            Some(b) => Ok(Some(serde_json::from_slice(&b)?)),
            None => Ok(None),
        }
    }

    pub fn list_runs(&self) -> Result<Vec<RunSummary>, StoreError> {
        let mut out = Vec::new();
        for id in self.ids_in("runs", "json")? {
            if let Some(a) = self.run(&id)? {
                out.push(RunSummary {
                    run_id: a.run_id.clone(),
                    objective: a.config.objective,
                    lambda: a.config.lambda,
                    mu: a.config.mu,
                    generations: a.generations.len(),
                    env_seed: a.config.env_seed,
                    best: a.best_so_far.last().copied(),
                });
            }
        }
        Ok(out)
    }

    /// Individuals are content-addressed: an existing record is kept.
    pub fn put_individual(&self, doc: &IndividualDoc) -> Result<(), StoreError> {
        let path = self
            .path("individuals", &doc.id, "json")
            .ok_or_else(|| growform_core::Error::InvalidInput(format!("bad individual id {:?}", doc.id)))?;
        if path.exists() {
            return Ok(());
        }
        self.write_atomic(&path, &serde_json::to_vec(doc)?)
    }

    pub fn individual_bytes(&self, id: &str) -> Result<Option<Vec<u8>>, StoreError> {
        self.read(self.path("individuals", id, "json"))
    }

    pub fn individual(&self, id: &str) -> Result<Option<IndividualDoc>, StoreError> {
        match self.individual_bytes(id)? {
            Some(b) => Ok(Some(serde_json::from_slice(&b)?)),
            None => Ok(None),
        }
    }

    /// Gzipped canonical contour document of an individual, grown and cached
    /// on first request.
    pub fn layers_gz(&self, id: &str) -> Result<Option<Vec<u8>>, StoreError> {
        if let Some(b) = self.read(self.path("layers", id, "json.gz"))? {
            return Ok(Some(b));
        }
        let Some(doc) = self.individual(id)? else { return Ok(None) };
        let (stack, _) = doc.spec().develop()?;
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(stack.to_canonical_json().as_bytes())?;
        let gz = enc.finish()?;
        let path = self.path("layers", id, "json.gz").expect("checked above");
        self.write_atomic(&path, &gz)?;
        Ok(Some(gz))
    }

    pub fn stack(&self, id: &str) -> Result<Option<LayerStack>, StoreError> {
        let Some(gz) = self.layers_gz(id)? else { return Ok(None) };
        let mut text = String::new();
        GzDecoder::new(&gz[..]).read_to_string(&mut text)?;
        Ok(Some(LayerStack::from_json(&text)?))
    }

    /// Stores the result and each of its entries as an individual.
    pub fn put_interpolation(&self, r: &InterpolationResult) -> Result<(), StoreError> {
        for e in &r.entries {
            self.put_individual(&IndividualDoc {
                id: e.id.clone(),
                genome_normalized: e.genome_normalized.clone(),
                genome: Some(e.genome),
                env_seed: r.env_seed,
                sim_config: r.sim_config.clone(),
                metrics_config: r.metrics_config.clone(),
                fitness: Some(e.fitness.clone()),
                error: None,
            })?;
        }
        let path = self.path("interpolations", &r.id, "json").expect("interpolation ids are path-safe");
        self.write_atomic(&path, r.to_json().as_bytes())
    }

    pub fn interpolation_bytes(&self, id: &str) -> Result<Option<Vec<u8>>, StoreError> {
        self.read(self.path("interpolations", id, "json"))
    }

    pub fn put_job(&self, job: &JobRecord) -> Result<(), StoreError> {
        let path = self.path("jobs", &job.id, "json").expect("job ids are path-safe");
        self.write_atomic(&path, &serde_json::to_vec(job)?)
    }

    pub fn jobs(&self) -> Result<Vec<JobRecord>, StoreError> {
        let mut out = Vec::new();
        for id in self.ids_in("jobs", "json")? {
            if let Some(b) = self.read(self.path("jobs", &id, "json"))? {
                out.push(serde_json::from_slice(&b)?);
            }
        }
        Ok(out)
    }
}
