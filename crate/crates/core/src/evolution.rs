//! Evolutionary runs: CMA-ES over normalized genomes, each candidate grown
//! in a fixed environment and scored by one objective.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cma::{rank_descending, BoundPolicy, CmaEs, CmaParams};
use crate::error::{Error, Result};
use crate::genome::{decode_genome, Genome, GENOME_LEN};
use crate::metrics::{evaluate, FitnessVector, MetricsConfig};
use crate::parallel::par_map;
use crate::sim::{grow, LayerStack, SimConfig};

pub const ARCHIVE_FORMAT_VERSION: u32 = 1;

/// Score given to candidates whose growth or evaluation failed.
pub const FAILED_SCORE: f64 = -1.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    #[default]
    Overall,
    Printability,
    Coverage,
    Complexity,
}

impl Objective {
    pub fn score(self, f: &FitnessVector) -> f64 {
        match self {
            Objective::Overall => f.overall,
            Objective::Printability => f.p,
            Objective::Coverage => f.rc,
            Objective::Complexity => f.c,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Overall => "overall",
            Objective::Printability => "printability",
            Objective::Coverage => "coverage",
            Objective::Complexity => "complexity",
        }
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "overall" => Ok(Objective::Overall),
            "printability" => Ok(Objective::Printability),
            "coverage" => Ok(Objective::Coverage),
            "complexity" => Ok(Objective::Complexity),
            other => Err(Error::InvalidInput(format!(
                "unknown objective {other:?} (expected overall, printability, coverage or complexity)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    pub lambda: usize,
    pub mu: usize,
    pub generations: usize,
    pub objective: Objective,
    pub env_seed: u64,
    pub sim_config: SimConfig,
    pub metrics_config: MetricsConfig,
    pub cma_seed: u64,
    pub sigma0: f64,
    pub bound_policy: BoundPolicy,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            lambda: 40,
            mu: 2,
            generations: 150,
            objective: Objective::Overall,
            env_seed: 0,
            sim_config: SimConfig::default(),
            metrics_config: MetricsConfig::default(),
            cma_seed: 0,
            sigma0: 0.3,
            bound_policy: BoundPolicy::default(),
        }
    }
}

impl EvolutionConfig {
    /// Small run for laptops and tests: 8 candidates, 20 generations, 300×300
    /// environment with 60 recorded layers.
    pub fn desk(env_seed: u64, cma_seed: u64) -> Self {
        EvolutionConfig {
            lambda: 8,
            generations: 20,
            env_seed,
            cma_seed,
            sim_config: SimConfig::desk(),
            ..EvolutionConfig::default()
        }
    }

    /// Checks every field, collecting one message per offending field.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.mu < 1 || self.mu >= self.lambda {
            problems.push(format!("mu: need 1 <= mu < lambda (mu={}, lambda={})", self.mu, self.lambda));
        }
        if self.generations < 1 {
            problems.push("generations: must be >= 1".to_string());
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            problems.push(format!("sigma0: must be positive, got {}", self.sigma0));
        }
        let b = &self.bound_policy;
        if !(b.lower == 0.0 && b.upper == 1.0) {
            problems.push("bound_policy: genomes live in [0, 1]".to_string());
        }
        if let Err(e) = self.sim_config.validate() {
            problems.push(format!("sim_config: {e}"));
        }
        if let Err(e) = self.metrics_config.validate() {
            problems.push(format!("metrics_config: {e}"));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Stable identifier of the run this configuration produces.
    pub fn run_id(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("run-{}", &hex::encode(Sha256::digest(json.as_bytes()))[..16])
    }
}

/// Everything needed to regrow an individual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndividualSpec {
    pub genome_normalized: Vec<f64>,
    pub env_seed: u64,
    pub sim_config: SimConfig,
    pub metrics_config: MetricsConfig,
}

impl IndividualSpec {
    /// Lowercase hex SHA-256 over the genome at 12 fractional digits, the
    /// environment seed and both configurations.
    pub fn id(&self) -> String {
        individual_id(&self.genome_normalized, self.env_seed, &self.sim_config, &self.metrics_config)
    }

    pub fn genome(&self) -> Result<Genome> {
        decode_genome(&self.genome_normalized)
    }

    pub fn same_environment(&self, other: &IndividualSpec) -> bool {
        self.env_seed == other.env_seed
            && self.sim_config == other.sim_config
            && self.metrics_config == other.metrics_config
    }

    pub fn develop(&self) -> Result<(LayerStack, FitnessVector)> {
        develop(&self.genome_normalized, self.env_seed, &self.sim_config, &self.metrics_config)
    }
}

pub fn individual_id(normalized: &[f64], env_seed: u64, sim: &SimConfig, metrics: &MetricsConfig) -> String {
    let mut doc = String::from("{\"genome\":[");
    for (i, v) in normalized.iter().enumerate() {
        if i > 0 {
            doc.push(',');
        }
        write!(doc, "{v:.12}").unwrap();
    }
    write!(doc, "],\"env_seed\":{env_seed},\"sim_config\":").unwrap();
    doc.push_str(&serde_json::to_string(sim).expect("config serializes"));
    doc.push_str(",\"metrics_config\":");
    doc.push_str(&serde_json::to_string(metrics).expect("config serializes"));
    doc.push('}');
    hex::encode(Sha256::digest(doc.as_bytes()))
}

/// Grows and scores one normalized genome.
pub fn develop(
    normalized: &[f64],
    env_seed: u64,
    sim: &SimConfig,
    metrics: &MetricsConfig,
) -> Result<(LayerStack, FitnessVector)> {
    let genome = decode_genome(normalized)?;
    let stack = grow(&genome, env_seed, sim)?;
    let fitness = evaluate(&stack, metrics);
    Ok((stack, fitness))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndividualRecord {
    pub id: String,
    pub genome_normalized: Vec<f64>,
    pub genome: Option<Genome>,
    /// Value of the run objective; [`FAILED_SCORE`] for failed evaluations.
    pub objective: f64,
    pub fitness: Option<FitnessVector>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub individuals: Vec<IndividualRecord>,
    pub best_index: usize,
    pub sigma: f64,
}

impl GenerationRecord {
    pub fn best(&self) -> &IndividualRecord {
        &self.individuals[self.best_index]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunArchive {
    pub version: u32,
    pub run_id: String,
    pub config: EvolutionConfig,
    pub generations: Vec<GenerationRecord>,
    /// Best objective value seen up to and including each generation.
    pub best_so_far: Vec<f64>,
}

impl RunArchive {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("archive serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let archive: RunArchive = serde_json::from_str(text)?;
        if archive.version != ARCHIVE_FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported archive version {}", archive.version)));
        }
        archive.check()?;
        Ok(archive)
    }

    /// Structural checks: population sizes, best indices and the monotone
    /// best-so-far series.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parse(m));
        if self.best_so_far.len() != self.generations.len() {
            return bad("best_so_far length differs from generation count".into());
        }
        for (i, g) in self.generations.iter().enumerate() {
            if g.generation != i {
                return bad(format!("generation {i} is labelled {}", g.generation));
            }
            if g.individuals.len() != self.config.lambda {
                return bad(format!("generation {i} has {} individuals", g.individuals.len()));
            }
            let Some(best) = g.individuals.get(g.best_index) else {
                return bad(format!("generation {i} best_index out of range"));
            };
            if g.individuals.iter().any(|r| r.objective > best.objective) {
                return bad(format!("generation {i} best_index is not the maximum"));
            }
        }
        if self.best_so_far.windows(2).any(|w| w[1] < w[0]) {
            return bad("best_so_far decreases".into());
        }
        Ok(())
    }

    /// Best individual of the whole run (earliest on ties).
    pub fn best(&self) -> Option<&IndividualRecord> {
        let mut best: Option<&IndividualRecord> = None;
        for g in &self.generations {
            let cand = g.best();
            if best.is_none_or(|b| cand.objective > b.objective) {
                best = Some(cand);
            }
        }
        best
    }

    /// Per-generation fitness of each generation's best individual:
    /// `generation,best_P,best_Rc,best_C,best_overall,best_so_far`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("generation,best_P,best_Rc,best_C,best_overall,best_so_far\n");
        for (g, bsf) in self.generations.iter().zip(&self.best_so_far) {
            let (p, rc, c, o) = match &g.best().fitness {
                Some(f) => (f.p, f.rc, f.c, f.overall),
                None => (0.0, 0.0, 0.0, FAILED_SCORE),
            };
            writeln!(out, "{},{p},{rc},{c},{o},{bsf}", g.generation).unwrap();
        }
        out
    }

    pub fn spec_for(&self, record: &IndividualRecord) -> IndividualSpec {
        IndividualSpec {
            genome_normalized: record.genome_normalized.clone(),
            env_seed: self.config.env_seed,
            sim_config: self.config.sim_config.clone(),
            metrics_config: self.config.metrics_config.clone(),
        }
    }
}

/// Runs CMA-ES with a custom evaluator. Evaluations within a generation run
/// through [`par_map`]; sampling and updates stay on the calling thread.
/// `progress(done, total)` is called after every generation.
pub fn run_evolution_with<E, P>(cfg: &EvolutionConfig, evaluator: E, mut progress: P) -> Result<RunArchive>
where
    E: Fn(&[f64]) -> Result<FitnessVector> + Sync + Send,
    P: FnMut(usize, usize),
{
    cfg.validate()?;
    let params = CmaParams::new(GENOME_LEN, cfg.lambda, cfg.mu)?;
    let mut es = CmaEs::new(params, &[0.5; GENOME_LEN], cfg.sigma0, cfg.cma_seed, Some(cfg.bound_policy.clone()))?;
    let mut generations = Vec::with_capacity(cfg.generations);
    let mut best_so_far: Vec<f64> = Vec::with_capacity(cfg.generations);

    for gen in 0..cfg.generations {
        let sigma = es.sigma;
        let samples = es.sample();
        let results = par_map(&samples, |x| evaluator(x));
        let individuals: Vec<IndividualRecord> = samples
            .iter()
            .zip(results)
            .map(|(x, res)| {
                let id = individual_id(x, cfg.env_seed, &cfg.sim_config, &cfg.metrics_config);
                let genome = decode_genome(x).ok();
                match res {
                    Ok(f) if cfg.objective.score(&f).is_finite() => IndividualRecord {
                        id,
                        genome_normalized: x.clone(),
                        genome,
                        objective: cfg.objective.score(&f),
                        fitness: Some(f.compact()),
                        error: None,
                    },
                    Ok(_) => failed(id, x, genome, "objective is not finite".into()),
                    Err(e) => failed(id, x, genome, e.to_string()),
                }
            })
            .collect();
        let scores: Vec<f64> = individuals.iter().map(|r| r.objective).collect();
        let order = rank_descending(&scores);
        let best = scores[order[0]];
        best_so_far.push(best_so_far.last().map_or(best, |&prev: &f64| prev.max(best)));

        let parents: Vec<Vec<f64>> = order[..cfg.mu].iter().map(|&i| samples[i].clone()).collect();
        es.update(&parents)?;
        generations.push(GenerationRecord { generation: gen, individuals, best_index: order[0], sigma });
        progress(gen + 1, cfg.generations);
    }

    Ok(RunArchive {
        version: ARCHIVE_FORMAT_VERSION,
        run_id: cfg.run_id(),
        config: cfg.clone(),
        generations,
        best_so_far,
    })
}

fn failed(id: String, x: &[f64], genome: Option<Genome>, error: String) -> IndividualRecord {
    IndividualRecord { id, genome_normalized: x.to_vec(), genome, objective: FAILED_SCORE, fitness: None, error: Some(error) }
}

/// Runs CMA-ES with the standard grow-then-evaluate pipeline.
pub fn run_evolution<P: FnMut(usize, usize)>(cfg: &EvolutionConfig, progress: P) -> Result<RunArchive> {
    let (sim, metrics, seed) = (&cfg.sim_config, &cfg.metrics_config, cfg.env_seed);
    run_evolution_with(cfg, |x| develop(x, seed, sim, metrics).map(|(_, f)| f), progress)
}
