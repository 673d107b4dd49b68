//! Linear interpolation between two individuals grown in the same
//! environment.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolution::IndividualSpec;
use crate::genome::Genome;
use crate::metrics::{FitnessVector, MetricsConfig};
use crate::parallel::par_map;
use crate::sim::SimConfig;

pub const INTERPOLATION_FORMAT_VERSION: u32 = 1;

/// `n + 2` evenly spaced points on the segment from `a` to `b`, at
/// `t = i / (n + 1)`. The first and last entries are `a` and `b` exactly.
pub fn interpolate_genomes(a: &[f64], b: &[f64], n: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!("genome lengths differ: {} vs {}", a.len(), b.len())));
    }
    let steps = n + 1;
    Ok((0..=steps)
        .map(|i| {
            let t = i as f64 / steps as f64;
            let g = match i {
                0 => a.to_vec(),
                i if i == steps => b.to_vec(),
                _ => a.iter().zip(b).map(|(&x, &y)| ((1.0 - t) * x + t * y).clamp(0.0, 1.0)).collect(),
            };
            (t, g)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationEntry {
    pub t: f64,
    pub id: String,
    pub genome_normalized: Vec<f64>,
    pub genome: Genome,
    pub fitness: FitnessVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationResult {
    pub version: u32,
    pub id: String,
    pub a: String,
    pub b: String,
    pub steps: usize,
    pub env_seed: u64,
    pub sim_config: SimConfig,
    pub metrics_config: MetricsConfig,
    pub entries: Vec<InterpolationEntry>,
}

impl InterpolationResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("interpolation serializes")
    }

    /// `t,id,P,Rc,C,overall` per entry.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,id,P,Rc,C,overall\n");
        for e in &self.entries {
            let f = &e.fitness;
            out.push_str(&format!("{},{},{},{},{},{}\n", e.t, e.id, f.p, f.rc, f.c, f.overall));
        }
        out
    }
}

pub fn interpolation_id(a: &str, b: &str, steps: usize) -> String {
    let digest = hex::encode(Sha256::digest(format!("{a}:{b}:{steps}").as_bytes()));
    format!("interp-{}", &digest[..16])
}

/// Grows and scores every in-between individual. Both endpoints must share
/// the environment seed and configurations. `on_entry(done, total)` is
/// called as entries finish (in completion order when running in parallel).
pub fn run_interpolation<P>(a: &IndividualSpec, b: &IndividualSpec, n: usize, on_entry: P) -> Result<InterpolationResult>
where
    P: Fn(usize, usize) + Sync + Send,
{
    if !a.same_environment(b) {
        return Err(Error::EnvironmentMismatch(format!(
            "interpolation needs identical environments (env_seed {} vs {}{})",
            a.env_seed,
            b.env_seed,
            if a.sim_config != b.sim_config || a.metrics_config != b.metrics_config {
                ", configurations differ"
            } else {
                ""
            }
        )));
    }
    let points = interpolate_genomes(&a.genome_normalized, &b.genome_normalized, n)?;
    let total = points.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let entries = par_map(&points, |(t, g)| -> Result<InterpolationEntry> {
        let spec = IndividualSpec { genome_normalized: g.clone(), ..a.clone() };
        let (stack, fitness) = spec.develop()?;
        let finished = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
        on_entry(finished, total);
        Ok(InterpolationEntry { t: *t, id: spec.id(), genome_normalized: g.clone(), genome: stack.genome, fitness: fitness.compact() })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (ida, idb) = (a.id(), b.id());
    Ok(InterpolationResult {
        version: INTERPOLATION_FORMAT_VERSION,
        id: interpolation_id(&ida, &idb, n),
        a: ida,
        b: idb,
        steps: n,
        env_seed: a.env_seed,
        sim_config: a.sim_config.clone(),
        metrics_config: a.metrics_config.clone(),
        entries,
    })
}
