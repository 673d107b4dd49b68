use super::{hash_direction, Colony, Environment, SimConfig};
use crate::genome::Genome;
use crate::geometry::Point;

/// Uniform bucket grid over the environment. Buckets hold flat cell indices
/// in ascending order, so neighbour visits happen in a fixed order.
pub(crate) struct CellGrid {
    origin: Point,
    size: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<usize>>,
}

impl CellGrid {
    pub(crate) fn build(positions: &[Point], min: Point, max: Point, size: f64) -> Self {
        let cols = (((max.x - min.x) / size).floor() as usize + 1).max(1);
        let rows = (((max.y - min.y) / size).floor() as usize + 1).max(1);
        let mut grid = CellGrid { origin: min, size, cols, rows, buckets: vec![Vec::new(); cols * rows] };
        for (i, &p) in positions.iter().enumerate() {
            let (cx, cy) = grid.coords(p);
            grid.buckets[cy * cols + cx].push(i);
        }
        grid
    }

    fn coords(&self, p: Point) -> (usize, usize) {
        let cx = ((p.x - self.origin.x) / self.size).floor();
        let cy = ((p.y - self.origin.y) / self.size).floor();
        let cx = if cx.is_finite() { (cx.max(0.0) as usize).min(self.cols - 1) } else { 0 };
        let cy = if cy.is_finite() { (cy.max(0.0) as usize).min(self.rows - 1) } else { 0 };
        (cx, cy)
    }

    /// Visits every index in the 3×3 block of buckets around `p`. Covers all
    /// points within `size` of `p`.
    pub(crate) fn for_each_near(&self, p: Point, mut f: impl FnMut(usize)) {
        let (cx, cy) = self.coords(p);
        for y in cy.saturating_sub(1)..=(cy + 1).min(self.rows - 1) {
            for x in cx.saturating_sub(1)..=(cx + 1).min(self.cols - 1) {
                for &j in &self.buckets[y * self.cols + x] {
                    f(j);
                }
            }
        }
    }
}

/// Per-cell force vectors, indexed `[organism][cell]`.
pub type Forces = Vec<Vec<Point>>;

/// Total force on every cell: Hooke springs along ring edges, linear
/// short-range repulsion between all cell pairs in the colony, the
/// zero-rest-length attraction of pending splits, and drag `-nu * v`.
pub fn compute_forces(colony: &Colony, genome: &Genome, config: &SimConfig) -> Forces {
    let mut forces: Forces = colony.organisms.iter().map(|o| vec![Point::ZERO; o.len()]).collect();

    for (o, org) in colony.organisms.iter().enumerate() {
        let n = org.len();
        for i in 0..n {
            let j = (i + 1) % n;
            let (a, b) = (&org.cells[i], &org.cells[j]);
            let f = spring_force(a.position, b.position, genome.k, config.rest_length, a.id, b.id);
            forces[o][i] += f;
            forces[o][j] -= f;
        }
        if let Some((max_id, split_id)) = org.pending_split {
            if let (Some(i), Some(j)) = (org.index_of(max_id), org.index_of(split_id)) {
                let f = (org.cells[j].position - org.cells[i].position) * genome.k;
                forces[o][i] += f;
                forces[o][j] -= f;
            }
        }
    }

    // Repulsion over the whole colony.
    let mut flat_index = Vec::with_capacity(colony.cell_count());
    let mut positions = Vec::with_capacity(colony.cell_count());
    let mut ids = Vec::with_capacity(colony.cell_count());
    for (o, org) in colony.organisms.iter().enumerate() {
        for (i, c) in org.cells.iter().enumerate() {
            flat_index.push((o, i));
            positions.push(c.position);
            ids.push(c.id);
        }
    }
    let rr = config.repulsion_radius;
    let k_rep = genome.k * config.repulsion_scale;
    let (min, max) = config.bounds();
    let grid = CellGrid::build(&positions, min, max, rr);
    for i in 0..positions.len() {
        let p = positions[i];
        grid.for_each_near(p, |j| {
            if j <= i {
                return;
            }
            let d = p - positions[j];
            let dist = d.norm();
            if dist >= rr {
                return;
            }
            let dir = match d.normalized() {
                Some(u) => u,
                None => hash_direction(ids[i].min(ids[j]), ids[i].max(ids[j])) * if ids[i] < ids[j] { 1.0 } else { -1.0 },
            };
            let f = dir * (k_rep * (rr - dist) / rr);
            let (oi, ci) = flat_index[i];
            let (oj, cj) = flat_index[j];
            forces[oi][ci] += f;
            forces[oj][cj] -= f;
        });
    }

    for (o, org) in colony.organisms.iter().enumerate() {
        for (i, c) in org.cells.iter().enumerate() {
            forces[o][i] -= c.velocity * genome.nu;
        }
    }
    forces
}

/// Spring force acting on `a` from the edge `a`–`b`: pulls `a` towards `b`
/// when stretched beyond `rest`, pushes it away when compressed.
fn spring_force(a: Point, b: Point, k: f64, rest: f64, id_a: u64, id_b: u64) -> Point {
    let d = b - a;
    let len = d.norm();
    let dir = d.normalized().unwrap_or_else(|| hash_direction(id_a, id_b));
    dir * (k * (len - rest))
}

/// Semi-implicit Euler update with mass `mass_coeff * eps_max`, speed limit,
/// wall clamping and metabolic plus movement energy costs.
pub fn integrate(colony: &mut Colony, forces: &Forces, genome: &Genome, config: &SimConfig, env: &Environment) {
    let mass = config.mass_coeff * genome.eps_max;
    let dt = config.dt;
    let base_cost = config.base_metabolic_cost * genome.eta;
    for (org, f_org) in colony.organisms.iter_mut().zip(forces) {
        for (cell, &f) in org.cells.iter_mut().zip(f_org) {
            let mut v = cell.velocity + f * (dt / mass);
            let speed = v.norm();
            if speed > config.max_speed {
                v = v * (config.max_speed / speed);
            }
            let mut x = cell.position + v * dt;
            if x.x < env.min.x || x.x > env.max.x {
                x.x = x.x.clamp(env.min.x, env.max.x);
                v.x = 0.0;
            }
            if x.y < env.min.y || x.y > env.max.y {
                x.y = x.y.clamp(env.min.y, env.max.y);
                v.y = 0.0;
            }
            cell.position = x;
            cell.velocity = v;
            let cost = base_cost + config.movement_cost * v.norm() * dt * mass;
            cell.energy = (cell.energy - cost).max(0.0);
        }
    }
}
