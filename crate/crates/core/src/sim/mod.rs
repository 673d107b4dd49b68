//! Agent-based differential-growth simulator.
//!
//! A colony of organisms (closed rings of cells joined by springs) develops
//! in a bounded viscous medium fed by nutrient sources. Each timestep runs a
//! fixed sequence of sub-operations (see [`step`]); after a warmup period the
//! shape of every organism is captured as one layer of a [`LayerStack`].
//!
//! Everything is a pure function of `(genome, env_seed, config)`: all
//! randomness comes from the environment's seeded generator and all loops
//! visit cells in a fixed order.

mod forces;
mod lifecycle;
mod nutrients;
mod stack;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::Genome;
use crate::geometry::{regular_polygon, Point};

pub use forces::{compute_forces, integrate, Forces};
pub use lifecycle::{cull, divide_cells, update_splits};
pub use nutrients::{absorb_nutrients, init_environment, update_nutrients};
pub use stack::{LayerSnapshot, LayerStack, STACK_FORMAT_VERSION};

/// Simulation parameters. Lengths are in world units unless noted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub env_size: [f64; 2],
    pub timesteps: usize,
    pub warmup: usize,
    pub n_init_organisms: usize,
    pub init_cells_per_organism: usize,
    pub init_radius: f64,
    /// Spring rest length `L0`.
    pub rest_length: f64,
    /// Repulsion radius `rr`.
    pub repulsion_radius: f64,
    /// Repulsion strength as a multiple of the genome's `k`.
    pub repulsion_scale: f64,
    pub dt: f64,
    pub n_sources: usize,
    /// Nutrient units `U` per source before it is depleted.
    pub source_units: u32,
    /// Energy value of a freshly released nutrient particle.
    pub particle_value: f64,
    pub nutrient_decay: f64,
    pub uptake_radius: f64,
    pub base_metabolic_cost: f64,
    pub movement_cost: f64,
    /// Cell mass per unit of energy capacity.
    pub mass_coeff: f64,
    /// Per-step speed limit applied after the velocity update.
    pub max_speed: f64,
    /// Organism size `N_split` at which a split is initiated.
    pub split_trigger_size: usize,
    pub unit_to_mm: f64,
    /// Printed layer height in mm.
    pub layer_height: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            env_size: [600.0, 600.0],
            timesteps: 200,
            warmup: 100,
            n_init_organisms: 4,
            init_cells_per_organism: 12,
            init_radius: 20.0,
            rest_length: 4.0,
            repulsion_radius: 10.0,
            repulsion_scale: 1.0,
            dt: 1.0,
            n_sources: 20,
            source_units: 50,
            particle_value: 10.0,
            nutrient_decay: 0.95,
            uptake_radius: 25.0,
            base_metabolic_cost: 0.05,
            movement_cost: 0.01,
            mass_coeff: 0.01,
            max_speed: 5.0,
            split_trigger_size: 40,
            unit_to_mm: 0.25,
            layer_height: 0.2,
        }
    }
}

impl SimConfig {
    /// Reduced setup for quick experiments: 300×300 environment, 60 layers.
    pub fn desk() -> Self {
        SimConfig {
            env_size: [300.0, 300.0],
            timesteps: 60,
            warmup: 30,
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        let [w, h] = self.env_size;
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return bad("env_size components must be positive");
        }
        if self.timesteps == 0 {
            return bad("timesteps must be > 0");
        }
        if self.repulsion_radius.is_nan() || self.repulsion_radius <= 0.0 {
            return bad("repulsion_radius must be > 0");
        }
        if self.rest_length.is_nan() || self.rest_length <= 0.0 {
            return bad("rest_length must be > 0");
        }
        if self.dt.is_nan() || self.dt <= 0.0 {
            return bad("dt must be > 0");
        }
        if !(self.nutrient_decay > 0.0 && self.nutrient_decay <= 1.0) {
            return bad("nutrient_decay must lie in (0, 1]");
        }
        if self.uptake_radius.is_nan() || self.uptake_radius <= 0.0 {
            return bad("uptake_radius must be > 0");
        }
        if self.particle_value.is_nan() || self.particle_value <= 0.0 {
            return bad("particle_value must be > 0");
        }
        if self.mass_coeff.is_nan() || self.mass_coeff <= 0.0 {
            return bad("mass_coeff must be > 0");
        }
        if self.max_speed.is_nan() || self.max_speed <= 0.0 {
            return bad("max_speed must be > 0");
        }
        if self.base_metabolic_cost < 0.0 || self.movement_cost < 0.0 || self.repulsion_scale < 0.0 {
            return bad("costs and repulsion_scale must be non-negative");
        }
        if self.init_cells_per_organism < 3 {
            return bad("organisms need at least 3 cells");
        }
        if self.split_trigger_size < 6 {
            return bad("split_trigger_size must be at least 6");
        }
        if !(self.unit_to_mm > 0.0 && self.layer_height > 0.0) {
            return bad("unit_to_mm and layer_height must be > 0");
        }
        if self.n_init_organisms > 4 {
            return bad("at most 4 initial organisms (one per diagonal midpoint)");
        }
        if self.init_radius.is_nan() || self.init_radius <= 0.0 {
            return bad("init_radius must be > 0");
        }
        if self.init_radius >= w.min(h) / 4.0 {
            return bad("init_radius too large: initial organisms overlap or leave the environment");
        }
        Ok(())
    }

    pub fn bounds(&self) -> (Point, Point) {
        (Point::ZERO, Point::new(self.env_size[0], self.env_size[1]))
    }

    /// Centres of the initial organisms: midpoints of the diagonals joining
    /// the environment centre to its corners.
    pub fn initial_centres(&self) -> Vec<Point> {
        let [w, h] = self.env_size;
        [
            Point::new(0.25 * w, 0.25 * h),
            Point::new(0.75 * w, 0.25 * h),
            Point::new(0.75 * w, 0.75 * h),
            Point::new(0.25 * w, 0.75 * h),
        ]
        .into_iter()
        .take(self.n_init_organisms)
        .collect()
    }
}

/// A point-mass agent.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    /// Stable identity, unique within a colony.
    pub id: u64,
    pub position: Point,
    pub velocity: Point,
    pub energy: f64,
    /// Set when nutrient uptake filled the cell to capacity this step.
    pub saturated: bool,
}

/// A closed ring of cells; cell `i` is joined to `i + 1`, the last to the first.
#[derive(Clone, Debug, PartialEq)]
pub struct Organism {
    pub cells: Vec<Cell>,
    /// Ids of `(C_max, C_split)` while a split is under way.
    pub pending_split: Option<(u64, u64)>,
}

impl Organism {
    pub fn new(cells: Vec<Cell>) -> Self {
        Organism { cells, pending_split: None }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.cells.iter().position(|c| c.id == id)
    }

    pub fn positions(&self) -> Vec<Point> {
        self.cells.iter().map(|c| c.position).collect()
    }

    pub fn total_energy(&self) -> f64 {
        self.cells.iter().map(|c| c.energy).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Colony {
    pub organisms: Vec<Organism>,
    /// Completed organism splits `n_s`.
    pub splits: u32,
    pub(crate) next_id: u64,
}

impl Colony {
    pub fn empty() -> Self {
        Colony { organisms: Vec::new(), splits: 0, next_id: 0 }
    }

    pub fn from_organisms(organisms: Vec<Organism>) -> Self {
        let next_id = organisms
            .iter()
            .flat_map(|o| o.cells.iter().map(|c| c.id + 1))
            .max()
            .unwrap_or(0);
        Colony { organisms, splits: 0, next_id }
    }

    pub(crate) fn fresh_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    pub fn cell_count(&self) -> usize {
        self.organisms.iter().map(Organism::len).sum()
    }

    pub fn total_energy(&self) -> f64 {
        self.organisms.iter().map(Organism::total_energy).sum()
    }

    pub fn is_extinct(&self) -> bool {
        self.organisms.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.organisms.iter().flat_map(|o| o.cells.iter())
    }
}

/// Builds the initial colony: regular polygons at the diagonal midpoints.
pub fn init_colony(config: &SimConfig, genome: &Genome) -> Result<Colony> {
    config.validate()?;
    let mut colony = Colony::empty();
    let n = config.init_cells_per_organism;
    for centre in config.initial_centres() {
        let cells = regular_polygon(centre, config.init_radius, n, 0.0)
            .into_iter()
            .map(|position| Cell {
                id: colony.fresh_id(),
                position,
                velocity: Point::ZERO,
                energy: genome.eps_max / 2.0,
                saturated: false,
            })
            .collect();
        colony.organisms.push(Organism::new(cells));
    }
    Ok(colony)
}

/// Positions of nutrient sources and released particles.
#[derive(Clone, Debug, PartialEq)]
pub struct NutrientSource {
    pub position: Point,
    pub remaining_units: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NutrientParticle {
    pub position: Point,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    pub min: Point,
    pub max: Point,
    pub sources: Vec<NutrientSource>,
    pub particles: Vec<NutrientParticle>,
    pub(crate) rng: ChaCha8Rng,
}

impl Environment {
    pub(crate) fn seeded(config: &SimConfig, seed: u64) -> Self {
        let (min, max) = config.bounds();
        Environment {
            min,
            max,
            sources: Vec::new(),
            particles: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub(crate) fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(self.min.x, self.max.x), p.y.clamp(self.min.y, self.max.y))
    }
}

/// Advances the colony by one timestep.
///
/// Order: nutrients released, nutrients absorbed, forces, integration,
/// division, death, splitting.
pub fn step(colony: &mut Colony, env: &mut Environment, genome: &Genome, config: &SimConfig) {
    update_nutrients(env, config);
    absorb_nutrients(colony, env, genome, config);
    let forces = compute_forces(colony, genome, config);
    integrate(colony, &forces, genome, config, env);
    divide_cells(colony, genome, config, env);
    cull(colony);
    update_splits(colony, genome, config);
}

/// A colony developing in its environment.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub genome: Genome,
    pub config: SimConfig,
    pub colony: Colony,
    pub env: Environment,
    pub time: usize,
}

impl Simulation {
    pub fn new(genome: Genome, env_seed: u64, config: SimConfig) -> Result<Self> {
        genome.validate()?;
        let colony = init_colony(&config, &genome)?;
        let env = init_environment(&config, env_seed)?;
        Ok(Simulation { genome, config, colony, env, time: 0 })
    }

    pub fn step(&mut self) {
        step(&mut self.colony, &mut self.env, &self.genome, &self.config);
        self.time += 1;
    }

    pub fn snapshot(&self) -> LayerSnapshot {
        LayerSnapshot::capture(&self.colony)
    }
}

/// Grows a colony and records one layer per post-warmup timestep.
pub fn grow(genome: &Genome, env_seed: u64, config: &SimConfig) -> Result<LayerStack> {
    let mut sim = Simulation::new(*genome, env_seed, config.clone())?;
    for _ in 0..config.warmup {
        sim.step();
    }
    let extinct = sim.colony.is_extinct();
    let mut layers = Vec::with_capacity(config.timesteps);
    for _ in 0..config.timesteps {
        sim.step();
        layers.push(sim.snapshot());
    }
    Ok(LayerStack {
        genome: *genome,
        env_seed,
        config: config.clone(),
        n_s: sim.colony.splits,
        extinct,
        layers,
    })
}

/// Deterministic unit vector derived from two identifiers; used wherever a
/// direction is geometrically undefined (coincident cells, degenerate rings).
pub(crate) fn hash_direction(a: u64, b: u64) -> Point {
    let mut z = a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.rotate_left(29) ^ 0xD1B5_4A32_D192_ED03;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    let angle = (z >> 11) as f64 / (1u64 << 53) as f64 * std::f64::consts::TAU;
    Point::new(angle.cos(), angle.sin())
}
