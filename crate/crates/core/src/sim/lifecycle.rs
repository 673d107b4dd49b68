//! Cell division, death and organism splitting.

use super::{hash_direction, Cell, Colony, Environment, Organism, SimConfig};
use crate::genome::Genome;

/// Replaces every cell that reached capacity with two daughters holding
/// half its energy each. The daughters sit `L0/4` either side of the parent
/// along the ring's local tangent (the mean direction of the two incident
/// edges), the first towards the predecessor, so ring order is preserved.
pub fn divide_cells(colony: &mut Colony, genome: &Genome, config: &SimConfig, env: &Environment) {
    let offset = config.rest_length / 4.0;
    let mut next_id = colony.next_id;
    for org in &mut colony.organisms {
        let n = org.len();
        if !org.cells.iter().any(|c| c.saturated || c.energy >= genome.eps_max) {
            continue;
        }
        let old = std::mem::take(&mut org.cells);
        let mut cells = Vec::with_capacity(n + 4);
        for (i, c) in old.iter().enumerate() {
            if !(c.saturated || c.energy >= genome.eps_max) {
                cells.push(c.clone());
                continue;
            }
            let prev = old[(i + n - 1) % n].position;
            let next = old[(i + 1) % n].position;
            let t_in = (c.position - prev).normalized().unwrap_or_default();
            let t_out = (next - c.position).normalized().unwrap_or_default();
            let tangent = (t_in + t_out)
                .normalized()
                .unwrap_or_else(|| hash_direction(c.id, c.id ^ 0x5DEE_CE66));
            let half = c.energy / 2.0;
            cells.push(Cell {
                id: c.id,
                position: env.clamp(c.position - tangent * offset),
                velocity: c.velocity,
                energy: half,
                saturated: false,
            });
            cells.push(Cell {
                id: next_id,
                position: env.clamp(c.position + tangent * offset),
                velocity: c.velocity,
                energy: half,
                saturated: false,
            });
            next_id += 1;
        }
        org.cells = cells;
    }
    colony.next_id = next_id;
    for c in colony.organisms.iter_mut().flat_map(|o| o.cells.iter_mut()) {
        c.saturated = false;
    }
}

/// Removes cells with no energy left, joining their neighbours, and drops
/// organisms that fall below three cells.
pub fn cull(colony: &mut Colony) {
    for org in &mut colony.organisms {
        if org.cells.iter().all(|c| c.energy > 0.0) {
            continue;
        }
        org.cells.retain(|c| c.energy > 0.0);
        if let Some((a, b)) = org.pending_split {
            if org.index_of(a).is_none() || org.index_of(b).is_none() {
                org.pending_split = None;
            }
        }
    }
    colony.organisms.retain(|o| o.len() >= 3);
}

/// Organism splitting state machine.
///
/// An organism with at least `N_split` cells and no split under way picks
/// `C_max` (highest energy, first on ties) and `C_split` (half the ring
/// away). While pending, the two are pulled together by
/// [`compute_forces`](super::compute_forces). Once they are within `2·rr`
/// the ring is cut at both cells into two closed rings that each keep a copy
/// of the two cut cells; energies are rescaled so the ring that runs forward
/// from `C_max` holds `rho` of the pre-split total and the other `1 - rho`.
pub fn update_splits(colony: &mut Colony, genome: &Genome, config: &SimConfig) {
    let threshold = 2.0 * config.repulsion_radius;
    let old = std::mem::take(&mut colony.organisms);
    let mut out = Vec::with_capacity(old.len() + 1);
    for mut org in old {
        match org.pending_split {
            Some((max_id, split_id)) => {
                let (Some(a), Some(b)) = (org.index_of(max_id), org.index_of(split_id)) else {
                    org.pending_split = None;
                    out.push(org);
                    continue;
                };
                if org.cells[a].position.dist(org.cells[b].position) > threshold {
                    out.push(org);
                    continue;
                }
                match cut(&org, a, b, genome, colony) {
                    Some((side_a, side_b)) => {
                        out.push(side_a);
                        out.push(side_b);
                        colony.splits += 1;
                    }
                    None => {
                        org.pending_split = None;
                        out.push(org);
                    }
                }
            }
            None => {
                if org.len() >= config.split_trigger_size {
                    let a = max_energy_index(&org);
                    let b = (a + org.len() / 2) % org.len();
                    org.pending_split = Some((org.cells[a].id, org.cells[b].id));
                }
                out.push(org);
            }
        }
    }
    colony.organisms = out;
}

fn max_energy_index(org: &Organism) -> usize {
    let mut best = 0;
    for (i, c) in org.cells.iter().enumerate() {
        if c.energy > org.cells[best].energy {
            best = i;
        }
    }
    best
}

fn cut(org: &Organism, a: usize, b: usize, genome: &Genome, colony: &mut Colony) -> Option<(Organism, Organism)> {
    let n = org.len();
    let walk = |from: usize, to: usize| -> Vec<Cell> {
        let len = (to + n - from) % n + 1;
        (0..len).map(|s| org.cells[(from + s) % n].clone()).collect()
    };
    let mut side_a = walk(a, b);
    let mut side_b = walk(b, a);
    if side_a.len() < 3 || side_b.len() < 3 {
        return None;
    }
    // The copies of the cut cells in the second ring get fresh ids.
    let last = side_b.len() - 1;
    side_b[0].id = colony.fresh_id();
    side_b[last].id = colony.fresh_id();

    let total = org.total_energy();
    rescale(&mut side_a, genome.rho * total, genome.eps_max);
    rescale(&mut side_b, (1.0 - genome.rho) * total, genome.eps_max);
    Some((Organism::new(side_a), Organism::new(side_b)))
}

fn rescale(cells: &mut [Cell], target: f64, cap: f64) {
    let sum: f64 = cells.iter().map(|c| c.energy).sum();
    if sum <= 0.0 {
        return;
    }
    let factor = target / sum;
    for c in cells {
        c.energy = (c.energy * factor).min(cap);
    }
}
