use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use growform_core::evolution::{run_evolution, EvolutionConfig, IndividualSpec, Objective};
use growform_core::export::{to_contour_json, to_gcode, to_mesh, ExportFormat, PrinterProfile, DEFAULT_RESAMPLE_N};
use growform_core::interp::run_interpolation;
use growform_core::metrics::{evaluate, FitnessVector};
use growform_core::{LayerStack, MetricsConfig, SimConfig};
use growform_studio::{IndividualDoc, ServeConfig, Store};
use serde::Deserialize;

/// Bad flags or inputs; exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

#[derive(Parser, Debug)]
#[command(name = "growform", version, about = "Differential-growth generative design workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Grow one colony and write its contour JSON.
    Grow(GrowArgs),
    /// Run CMA-ES and write the run archive plus a fitness CSV.
    Evolve(EvolveArgs),
    /// Interpolate between two stored individuals.
    Interp(InterpArgs),
    /// Export a stored individual or a contour file.
    Export(ExportArgs),
    /// Score a contour JSON file.
    Eval(EvalArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
pub struct SimOverrides {
    /// JSON file with optional `sim_config` and `metrics_config` objects.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the reduced 300×300, 60-layer setup.
    #[arg(long)]
    desk: bool,
    #[arg(long)]
    timesteps: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    sim_config: Option<SimConfig>,
    metrics_config: Option<MetricsConfig>,
}

impl SimOverrides {
    fn load(&self) -> Result<(SimConfig, MetricsConfig)> {
        let file: ConfigFile = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                match serde_json::from_str(&text) {
                    Ok(c) => c,
                    Err(e) => return usage(format!("{}: {e}", p.display())),
                }
            }
            None => ConfigFile::default(),
        };
        let base = if self.desk { SimConfig::desk() } else { SimConfig::default() };
        let mut sim = file.sim_config.unwrap_or(base);
        if let Some(t) = self.timesteps {
            sim.timesteps = t;
        }
        if let Some(w) = self.warmup {
            sim.warmup = w;
        }
        let metrics = file.metrics_config.unwrap_or_default();
        if let Err(e) = sim.validate() {
            return usage(format!("sim_config: {e}"));
        }
        if let Err(e) = metrics.validate() {
            return usage(format!("metrics_config: {e}"));
        }
        Ok((sim, metrics))
    }
}

#[derive(Args, Debug)]
pub struct GrowArgs {
    /// Five normalized values in [0, 1] (eta, nu, eps_max, k, rho), comma
    /// separated, or `@file` holding them.
    #[arg(long)]
    genome: String,
    /// Environment seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    sim: SimOverrides,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvolveArgs {
    #[arg(long, default_value = "overall")]
    objective: String,
    #[arg(long, default_value_t = 150)]
    generations: usize,
    #[arg(long, default_value_t = 40)]
    lambda: usize,
    #[arg(long, default_value_t = 2)]
    mu: usize,
    #[arg(long, default_value_t = 0)]
    env_seed: u64,
    #[arg(long, default_value_t = 0)]
    cma_seed: u64,
    #[arg(long, default_value_t = 0.3)]
    sigma0: f64,
    #[command(flatten)]
    sim: SimOverrides,
    /// Output directory for `archive.json` and `fitness.csv`.
    #[arg(long)]
    out: PathBuf,
    /// Also record the run and its individuals in this store.
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InterpArgs {
    #[arg(long)]
    a: String,
    #[arg(long)]
    b: String,
    #[arg(long, default_value_t = 99)]
    steps: usize,
    #[arg(long)]
    store: PathBuf,
    /// Interpolation result JSON.
    #[arg(long)]
    out: PathBuf,
    /// Optional `t,id,P,Rc,C,overall` table.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    /// Individual id in `--store`.
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    id: Option<String>,
    /// Contour JSON file instead of a stored individual.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    format: String,
    #[arg(long, default_value = "growform-store")]
    store: PathBuf,
    /// Printer profile JSON for G-code.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Points per contour in OBJ meshes.
    #[arg(long, default_value_t = DEFAULT_RESAMPLE_N)]
    resample: usize,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// JSON MetricsConfig; defaults otherwise.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, env = "GROWFORM_LISTEN", default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    #[arg(long, env = "GROWFORM_STORE", default_value = "growform-store")]
    store: PathBuf,
    /// Evaluation threads; defaults to the number of cores.
    #[arg(long, env = "GROWFORM_WORKERS")]
    workers: Option<usize>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Grow(a) => grow(a),
        Command::Evolve(a) => evolve(a),
        Command::Interp(a) => interp(a),
        Command::Export(a) => export(a),
        Command::Eval(a) => eval(a),
        Command::Serve(a) => serve(a),
    }
}

fn parse_genome(arg: &str) -> Result<Vec<f64>> {
    let text = match arg.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading genome file {path}"))?,
        None => arg.to_string(),
    };
    let cleaned = text.trim().trim_start_matches('[').trim_end_matches(']');
    let values: std::result::Result<Vec<f64>, _> =
        cleaned.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).map(str::parse).collect();
    let Ok(values) = values else {
        return usage(format!("genome {arg:?}: expected five numbers"));
    };
    if let Err(e) = growform_core::decode_genome(&values) {
        return usage(format!("genome: {e}"));
    }
    Ok(values)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn summary(f: &FitnessVector) -> serde_json::Value {
    serde_json::json!({ "P": f.p, "Rc": f.rc, "C": f.c, "overall": f.overall })
}

fn grow(a: GrowArgs) -> Result<()> {
    let genome = parse_genome(&a.genome)?;
    let (sim, metrics) = a.sim.load()?;
    let spec = IndividualSpec { genome_normalized: genome, env_seed: a.seed, sim_config: sim, metrics_config: metrics };
    let (stack, fitness) = spec.develop()?;
    write_file(&a.out, to_contour_json(&stack).as_bytes())?;
    print_json(&serde_json::json!({ "id": spec.id(), "fitness": summary(&fitness) }))
}

fn evolve(a: EvolveArgs) -> Result<()> {
    let objective: Objective = match a.objective.parse() {
        Ok(o) => o,
        Err(e) => return usage(e.to_string()),
    };
    let (sim_config, metrics_config) = a.sim.load()?;
    let cfg = EvolutionConfig {
        lambda: a.lambda,
        mu: a.mu,
        generations: a.generations,
        objective,
        env_seed: a.env_seed,
        sim_config,
        metrics_config,
        cma_seed: a.cma_seed,
        sigma0: a.sigma0,
        ..EvolutionConfig::default()
    };
    if let Err(e) = cfg.validate() {
        return usage(e.to_string());
    }
    let store = a.store.as_deref().map(Store::open).transpose()?;
    let archive = run_evolution(&cfg, |done, total| {
        tracing::info!(generation = done, of = total, "generation finished");
    })?;
    write_file(&a.out.join("archive.json"), archive.to_json().as_bytes())?;
    write_file(&a.out.join("fitness.csv"), archive.to_csv().as_bytes())?;
    if let Some(store) = store {
        store.put_run(&archive)?;
    }
    let best = archive.best().context("run produced no individuals")?;
    print_json(&serde_json::json!({
        "run_id": archive.run_id,
        "best_id": best.id,
        "best_objective": best.objective,
    }))
}

fn interp(a: InterpArgs) -> Result<()> {
    let store = Store::open(&a.store)?;
    let load = |id: &str| -> Result<IndividualDoc> {
        match store.individual(id)? {
            Some(d) => Ok(d),
            None => usage(format!("individual {id} not found in {}", a.store.display())),
        }
    };
    let (da, db) = (load(&a.a)?, load(&a.b)?);
    let (sa, sb) = (da.spec(), db.spec());
    if !sa.same_environment(&sb) {
        return usage(format!(
            "individuals {} and {} come from different environments; interpolation needs identical environments",
            a.a, a.b
        ));
    }
    let result = run_interpolation(&sa, &sb, a.steps, |_, _| {})?;
    store.put_interpolation(&result)?;
    write_file(&a.out, result.to_json().as_bytes())?;
    if let Some(csv) = &a.csv {
        write_file(csv, result.to_csv().as_bytes())?;
    }
    print_json(&serde_json::json!({ "interpolation_id": result.id, "entries": result.entries.len() }))
}

fn read_stack(path: &Path) -> Result<LayerStack> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    match LayerStack::from_json(&text) {
        Ok(s) => Ok(s),
        Err(e) => usage(format!("{}: {e}", path.display())),
    }
}

fn export(a: ExportArgs) -> Result<()> {
    let format: ExportFormat = match a.format.parse() {
        Ok(f) => f,
        Err(e) => return usage(e.to_string()),
    };
    if a.resample < 3 {
        return usage("--resample must be at least 3");
    }
    let profile = match &a.profile {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let profile: PrinterProfile = match serde_json::from_str(&text) {
                Ok(v) => v,
                Err(e) => return usage(format!("{}: {e}", p.display())),
            };
            if let Err(e) = profile.validate() {
                return usage(e.to_string());
            }
            profile
        }
        None => PrinterProfile::default(),
    };
    let stack = match (&a.id, &a.input) {
        (_, Some(path)) => read_stack(path)?,
        (Some(id), None) => match Store::open(&a.store)?.stack(id)? {
            Some(s) => s,
            None => return usage(format!("individual {id} not found in {}", a.store.display())),
        },
        (None, None) => return usage("either --id or --in is required"),
    };
    let text = match format {
        ExportFormat::Gcode => to_gcode(&stack, &profile)?,
        ExportFormat::Obj => to_mesh(&stack, a.resample)?,
        ExportFormat::Json => to_contour_json(&stack),
    };
    match &a.out {
        Some(p) => write_file(p, text.as_bytes()),
        None => {
            std::io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn eval(a: EvalArgs) -> Result<()> {
    let stack = read_stack(&a.input)?;
    let metrics = match &a.metrics {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            match serde_json::from_str::<MetricsConfig>(&text) {
                Ok(m) if m.validate().is_ok() => m,
                Ok(m) => return usage(m.validate().unwrap_err().to_string()),
                Err(e) => return usage(format!("{}: {e}", p.display())),
            }
        }
        None => MetricsConfig::default(),
    };
    print_json(&evaluate(&stack, &metrics))
}

fn serve(a: ServeArgs) -> Result<()> {
    let workers = a.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return usage("--workers must be at least 1");
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(growform_studio::serve(ServeConfig { listen: a.listen, store_root: a.store, workers }))?;
    Ok(())
}
