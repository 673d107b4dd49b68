use rand::Rng;

use super::{Colony, Environment, NutrientParticle, NutrientSource, SimConfig};
use crate::error::Result;
use crate::genome::Genome;
use crate::geometry::Point;

/// Particles whose value falls below this fraction of the release value are
/// discarded.
const PARTICLE_FLOOR: f64 = 0.01;

pub fn init_environment(config: &SimConfig, seed: u64) -> Result<Environment> {
    config.validate()?;
    let mut env = Environment::seeded(config, seed);
    for _ in 0..config.n_sources {
        let position = random_position(&mut env);
        env.sources.push(NutrientSource { position, remaining_units: config.source_units });
    }
    Ok(env)
}

fn random_position(env: &mut Environment) -> Point {
    let x = env.rng.random_range(env.min.x..=env.max.x);
    let y = env.rng.random_range(env.min.y..=env.max.y);
    Point::new(x, y)
}

/// Replaces depleted sources, decays released particles and lets every
/// source release one new particle near itself.
pub fn update_nutrients(env: &mut Environment, config: &SimConfig) {
    for i in 0..env.sources.len() {
        if env.sources[i].remaining_units == 0 {
            let position = random_position(env);
            env.sources[i] = NutrientSource { position, remaining_units: config.source_units };
        }
    }

    let floor = PARTICLE_FLOOR * config.particle_value;
    for p in &mut env.particles {
        p.value *= config.nutrient_decay;
    }
    env.particles.retain(|p| p.value >= floor);

    for i in 0..env.sources.len() {
        if env.sources[i].remaining_units == 0 {
            continue;
        }
        // Uniform over the disc of radius uptake_radius around the source.
        let angle = env.rng.random_range(0.0..std::f64::consts::TAU);
        let r = config.uptake_radius * env.rng.random::<f64>().sqrt();
        let position = env.clamp(env.sources[i].position + Point::new(angle.cos(), angle.sin()) * r);
        env.particles.push(NutrientParticle { position, value: config.particle_value });
        env.sources[i].remaining_units -= 1;
    }
}

/// Each particle within `uptake_radius` of some cell is eaten by the nearest
/// such cell (ties go to the lowest colony-wide cell index), which gains
/// `eta * value` energy up to its capacity.
pub fn absorb_nutrients(colony: &mut Colony, env: &mut Environment, genome: &Genome, config: &SimConfig) {
    let positions: Vec<Point> = colony.cells().map(|c| c.position).collect();
    if positions.is_empty() || env.particles.is_empty() {
        return;
    }
    let grid = super::forces::CellGrid::build(&positions, env.min, env.max, config.uptake_radius);
    let r2 = config.uptake_radius * config.uptake_radius;

    let mut gains = vec![0.0; positions.len()];
    env.particles.retain(|p| {
        let mut best: Option<(f64, usize)> = None;
        grid.for_each_near(p.position, |j| {
            let d2 = (positions[j] - p.position).norm_sq();
            if d2 <= r2 && best.is_none_or(|(bd, bj)| d2 < bd || (d2 == bd && j < bj)) {
                best = Some((d2, j));
            }
        });
        match best {
            Some((_, j)) => {
                gains[j] += genome.eta * p.value;
                false
            }
            None => true,
        }
    });

    let cells = colony.organisms.iter_mut().flat_map(|o| o.cells.iter_mut());
    for (cell, gain) in cells.zip(gains) {
        if gain > 0.0 {
            cell.energy += gain;
            if cell.energy >= genome.eps_max {
                cell.energy = genome.eps_max;
                cell.saturated = true;
            }
        }
    }
}
