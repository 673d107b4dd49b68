//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::{to_bytes, Body};
use axum::http::{header, Request, StatusCode};
use axum::Router;
use growform_core::cma::minimize;
use growform_core::evolution::{run_evolution, EvolutionConfig, IndividualSpec, RunArchive};
use growform_core::export::{flow_per_mm, parse_gcode, to_contour_json, to_gcode, GcodeSummary, PrinterProfile};
use growform_core::geometry::{convex_hull, convexity, min_width, perimeter};
use growform_core::interp::{run_interpolation, InterpolationResult};
use growform_core::metrics::{layer_support, quartile_dispersion, splitting_score, tile_support};
use growform_core::sim::{
    absorb_nutrients, compute_forces, cull, divide_cells, init_colony, init_environment, integrate, update_nutrients,
    update_splits, Colony, Environment,
};
use growform_core::{
    decode_genome, evaluate, grow, Error, Genome, LayerSnapshot, LayerStack, MetricsConfig, Point, SimConfig,
};
use growform_studio::{router, Studio};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tower::ServiceExt;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_genome(r: &mut ChaCha8Rng) -> Vec<f64> {
    (0..5).map(|_| r.random_range(0.0..=1.0)).collect()
}

// ---------------------------------------------------------------- determinism

fn determinism() -> Check {
    let genome = decode_genome(&[0.5; 5]).map_err(|e| e.to_string())?;
    let cfg = SimConfig::default();
    let a = grow(&genome, 11, &cfg).map_err(|e| e.to_string())?;
    let b = grow(&genome, 11, &cfg).map_err(|e| e.to_string())?;
    ensure(a.content_hash() == b.content_hash(), || "grow hashes differ".into())?;

    let run_cfg = EvolutionConfig::desk(3, 3);
    let first = run_evolution(&run_cfg, |_, _| {}).map_err(|e| e.to_string())?.to_json();
    let archived = RunArchive::from_json(&first).map_err(|e| e.to_string())?;
    let replay = run_evolution(&archived.config, |_, _| {}).map_err(|e| e.to_string())?.to_json();
    ensure(first == replay, || "desk run replay differs from archive".into())?;
    Ok(format!("grow hash {}…, desk archive {} bytes replayed identically", &a.content_hash()[..12], first.len()))
}

// ---------------------------------------------------------------------- cma

fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2)).sum()
}

fn cma() -> Check {
    let mut sphere_evals = Vec::new();
    for seed in 0..5 {
        let m = minimize(sphere, &[0.5; 5], 0.3, seed, 5000, 1e-9).map_err(|e| e.to_string())?;
        ensure(m.f < 1e-9 && m.evaluations <= 5000, || {
            format!("sphere seed {seed}: f={:e} after {} evals", m.f, m.evaluations)
        })?;
        sphere_evals.push(m.evaluations);
    }
    let mut solved = 0;
    for seed in 0..5 {
        let m = minimize(rosenbrock, &[0.0; 5], 0.3, seed, 50_000, 1e-6).map_err(|e| e.to_string())?;
        if m.f < 1e-6 && m.evaluations <= 50_000 {
            solved += 1;
        }
    }
    ensure(solved >= 4, || format!("rosenbrock solved on {solved}/5 seeds"))?;
    Ok(format!("sphere 5/5 (evals {sphere_evals:?}), rosenbrock {solved}/5"))
}

// ----------------------------------------------------------------- geometry

fn sweep_width(points: &[Point]) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..1800 {
        let t = (k as f64 * 0.1).to_radians();
        let (c, s) = (t.cos(), t.sin());
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in points {
            let v = p.x * c + p.y * s;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        best = best.min(hi - lo);
    }
    best
}

/// Convex polygon: sorted random angles on a rotated ellipse.
fn random_convex(r: &mut ChaCha8Rng, center: Point, scale: f64) -> Vec<Point> {
    let n = r.random_range(5..40);
    let mut angles: Vec<f64> = (0..n).map(|_| r.random_range(0.0..2.0 * PI)).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let (ax, ay) = (scale * r.random_range(0.3..1.0), scale * r.random_range(0.3..1.0));
    let rot = r.random_range(0.0..PI);
    angles
        .iter()
        .map(|t| {
            let (x, y) = (ax * t.cos(), ay * t.sin());
            Point::new(center.x + x * rot.cos() - y * rot.sin(), center.y + x * rot.sin() + y * rot.cos())
        })
        .collect()
}

fn inside(ring: &[Point], p: Point) -> bool {
    let mut c = false;
    let n = ring.len();
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if (a.y > p.y) != (b.y > p.y) && p.x < a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y) {
            c = !c;
        }
    }
    c
}

fn shoelace_centroid(ring: &[Point]) -> Point {
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..ring.len() {
        let (p, q) = (ring[i], ring[(i + 1) % ring.len()]);
        let w = p.x * q.y - q.x * p.y;
        a += w;
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
    }
    Point::new(cx / (3.0 * a), cy / (3.0 * a))
}

/// Marches from the centroid towards `tc` until leaving the ring, then
/// bisects the crossing.
fn marched_term(tc: Point, ring: &[Point], cap: f64) -> f64 {
    let c = shoelace_centroid(ring);
    let d = ((tc.x - c.x).powi(2) + (tc.y - c.y).powi(2)).sqrt();
    if d <= 1e-12 {
        return cap;
    }
    let dir = Point::new((tc.x - c.x) / d, (tc.y - c.y) / d);
    let at = |s: f64| Point::new(c.x + dir.x * s, c.y + dir.y * s);
    let h = 0.01;
    let mut s = 0.0;
    while inside(ring, at(s + h)) {
        s += h;
        if s > 1e6 {
            return 0.0;
        }
    }
    let (mut lo, mut hi) = (s, s + h);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if inside(ring, at(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi) / d).min(cap)
}

fn seg_dist(p: Point, a: Point, b: Point) -> f64 {
    let (vx, vy) = (b.x - a.x, b.y - a.y);
    let l2 = vx * vx + vy * vy;
    let t = if l2 == 0.0 { 0.0 } else { (((p.x - a.x) * vx + (p.y - a.y) * vy) / l2).clamp(0.0, 1.0) };
    ((p.x - a.x - t * vx).powi(2) + (p.y - a.y - t * vy).powi(2)).sqrt()
}

/// Dense supported-length ratio: samples every `delta/100` along each ring
/// and tests distance to every strand of the layer below.
fn band_support(layer: &[Vec<Point>], below: &[Vec<Point>], delta: f64) -> Vec<f64> {
    layer
        .iter()
        .map(|ring| {
            let (mut total, mut ok) = (0.0, 0.0);
            for i in 0..ring.len() {
                let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
                let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
                let n = (len / (delta / 100.0)).ceil().max(1.0) as usize;
                for s in 0..n {
                    let t = (s as f64 + 0.5) / n as f64;
                    let p = Point::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t);
                    let near = below.iter().any(|r| {
                        (0..r.len()).any(|j| seg_dist(p, r[j], r[(j + 1) % r.len()]) <= delta)
                    });
                    if near {
                        ok += len / n as f64;
                    }
                }
                total += len;
            }
            ok / total
        })
        .collect()
}

fn random_star(r: &mut ChaCha8Rng, center: Point) -> Vec<Point> {
    let n = r.random_range(12..60);
    let base = r.random_range(15.0..40.0);
    let wobble = r.random_range(0.0..0.3);
    let k = r.random_range(2..7) as f64;
    (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            let rad = base * (1.0 + wobble * (k * t).sin());
            Point::new(center.x + rad * t.cos(), center.y + rad * t.sin())
        })
        .collect()
}

fn geometry() -> Check {
    let mut r = rng(2024);
    let mut worst_width = 0.0f64;
    let mut worst_convexity = 0.0f64;
    for _ in 0..100 {
        let pts: Vec<Point> = (0..r.random_range(3..60))
            .map(|_| Point::new(r.random_range(-50.0..50.0), r.random_range(-20.0..20.0)))
            .collect();
        let hull = convex_hull(&pts).map_err(|e| e.to_string())?;
        let (got, want) = (min_width(&hull), sweep_width(&pts));
        worst_width = worst_width.max((got - want).abs() / want);
        let poly = random_convex(&mut r, Point::new(0.0, 0.0), 30.0);
        worst_convexity = worst_convexity.max((convexity(&poly).map_err(|e| e.to_string())? - 1.0).abs());
    }
    ensure(worst_width <= 0.005, || format!("min_width off by {:.4}%", worst_width * 100.0))?;
    ensure(worst_convexity <= 1e-9, || format!("convexity off by {worst_convexity:e}"))?;

    let mut worst_m = 0.0f64;
    for _ in 0..100 {
        let polygons: Vec<Vec<Point>> = (0..3)
            .map(|_| {
                let c = Point::new(r.random_range(40.0..260.0), r.random_range(40.0..260.0));
                let scale = r.random_range(10.0..40.0);
                random_convex(&mut r, c, scale)
            })
            .collect();
        let tc = Point::new(r.random_range(0.0..300.0), r.random_range(0.0..300.0));
        let want: f64 = polygons.iter().map(|p| marched_term(tc, p, 10.0)).sum();
        let got = tile_support(tc, &LayerSnapshot { polygons }, 10.0);
        worst_m = worst_m.max((got - want).abs());
    }
    ensure(worst_m <= 1e-6, || format!("tile_support off by {worst_m:e}"))?;

    let (delta_mm, unit) = (0.4, 0.25);
    let delta = delta_mm / unit;
    let mut worst_p = 0.0f64;
    for _ in 0..50 {
        let layer: Vec<Vec<Point>> = (0..r.random_range(1..3))
            .map(|_| {
                let c = Point::new(r.random_range(60.0..240.0), r.random_range(60.0..240.0));
                random_star(&mut r, c)
            })
            .collect();
        let shift = Point::new(r.random_range(-3.0..3.0) * delta, r.random_range(-3.0..3.0) * delta);
        let noise = r.random_range(0.0..0.5) * delta;
        let below: Vec<Vec<Point>> = layer
            .iter()
            .map(|ring| {
                ring.iter()
                    .map(|p| {
                        Point::new(
                            p.x + shift.x + r.random_range(-noise..=noise),
                            p.y + shift.y + r.random_range(-noise..=noise),
                        )
                    })
                    .collect()
            })
            .collect();
        let want = band_support(&layer, &below, delta);
        let got = layer_support(
            &LayerSnapshot { polygons: layer },
            &LayerSnapshot { polygons: below },
            delta_mm,
            unit,
        );
        for (g, w) in got.iter().zip(&want) {
            worst_p = worst_p.max((g - w).abs());
        }
    }
    ensure(worst_p <= 0.02, || format!("layer_support off by {worst_p:.4}"))?;
    Ok(format!(
        "min_width {:.4}%, convexity {worst_convexity:.1e}, tile_support {worst_m:.1e}, layer_support {worst_p:.4}",
        worst_width * 100.0
    ))
}

// --------------------------------------------------------- formula fidelity

fn formulas() -> Check {
    ensure(quartile_dispersion(&[2.0; 12]) == 0.0, || "Q of equal angles is not 0".into())?;
    let q = quartile_dispersion(&[1.0, 1.0, 3.0, 3.0]);
    ensure((q - 0.5).abs() <= 1e-12, || format!("Q([1,1,3,3]) = {q}"))?;
    ensure((splitting_score(0, 0.1) - 0.1).abs() <= 1e-12, || "S(0, 0.1) != 0.1".into())?;
    for n in 0..50 {
        ensure(splitting_score(n + 1, 0.1) > splitting_score(n, 0.1), || format!("S not increasing at n_s={n}"))?;
    }
    let mut r = rng(77);
    let cfg = SimConfig::desk();
    let metrics = MetricsConfig::default();
    for i in 0..5 {
        let genome = decode_genome(&random_genome(&mut r)).map_err(|e| e.to_string())?;
        let stack = grow(&genome, i, &cfg).map_err(|e| e.to_string())?;
        let f = evaluate(&stack, &metrics);
        ensure((f.overall - (f.p + f.rc + f.c) / 3.0).abs() <= 1e-12, || format!("overall mismatch on stack {i}"))?;
        let cov = &f.reports.coverage;
        ensure((cov.rc - (cov.r - cov.a)).abs() <= 1e-12 && f.rc == cov.rc, || format!("Rc mismatch on stack {i}"))?;
    }
    Ok(format!("Q([1,1,3,3]) = {q}, S(0, 0.1) = 0.1, overall and Rc exact on 5 grown stacks"))
}

// ------------------------------------------------------------- printability

fn circle(c: Point, radius: f64, n: usize) -> Vec<Point> {
    (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            Point::new(c.x + radius * t.cos(), c.y + radius * t.sin())
        })
        .collect()
}

fn stack_of(layers: Vec<Vec<Vec<Point>>>) -> LayerStack {
    LayerStack {
        layers: layers.into_iter().map(|polygons| LayerSnapshot { polygons }).collect(),
        ..LayerStack::empty(Genome::default(), 0, SimConfig::default())
    }
}

fn printability_anchors() -> Check {
    let metrics = MetricsConfig::default();
    let unit = SimConfig::default().unit_to_mm;
    let centre = Point::new(300.0, 300.0);
    // 6 mm and 30 mm wide constant contours.
    for width_mm in [6.0, 30.0] {
        let ring = circle(centre, width_mm / unit / 2.0, 96);
        let p = evaluate(&stack_of(vec![vec![ring]; 40]), &metrics).p;
        ensure(p == 1.0, || format!("constant {width_mm} mm stack scored P = {p}"))?;
    }
    // One layer under 5 mm anywhere in an otherwise wide stack.
    let wide = circle(centre, 40.0, 96);
    let narrow = circle(centre, 4.8 / unit / 2.0, 96);
    for at in [0, 7, 19] {
        let mut layers = vec![vec![wide.clone()]; 20];
        layers[at] = vec![narrow.clone()];
        let p = evaluate(&stack_of(layers), &metrics).p;
        ensure(p == 0.0, || format!("narrow layer at {at} scored P = {p}"))?;
    }
    let sliver: Vec<Point> = circle(centre, 40.0, 96).iter().map(|p| Point::new(p.x, centre.y + (p.y - centre.y) * 0.2)).collect();
    let p = evaluate(&stack_of(vec![vec![sliver]; 10]), &metrics).p;
    ensure(p == 0.0, || format!("4 mm wide ellipse scored P = {p}"))?;
    Ok("wide constant stacks P = 1, any hull under 5 mm P = 0".into())
}

// ----------------------------------------------------------- simulation fuzz

fn colony_invariants(colony: &Colony, env: &Environment, genome: &Genome, step: usize) -> Result<(), String> {
    let mut ids = std::collections::HashSet::new();
    for (o, org) in colony.organisms.iter().enumerate() {
        ensure(org.len() >= 3, || format!("step {step}: organism {o} has {} cells", org.len()))?;
        for c in &org.cells {
            ensure(ids.insert(c.id), || format!("step {step}: duplicate cell id {}", c.id))?;
            ensure(c.energy >= 0.0 && c.energy <= genome.eps_max * (1.0 + 1e-12), || {
                format!("step {step}: energy {} outside [0, {}]", c.energy, genome.eps_max)
            })?;
            ensure(c.position.is_finite() && env.contains(c.position), || {
                format!("step {step}: cell at ({}, {}) out of bounds", c.position.x, c.position.y)
            })?;
        }
    }
    let snap = LayerSnapshot::capture(colony);
    ensure(snap.polygons.len() == colony.organisms.len(), || format!("step {step}: snapshot ring count"))?;
    for (ring, org) in snap.polygons.iter().zip(&colony.organisms) {
        // A closed ring: one vertex per cell and a positive perimeter back to the start.
        ensure(ring.len() == org.len() && perimeter(ring) > 0.0, || format!("step {step}: ring not closed"))?;
    }
    Ok(())
}

fn simulation_fuzz() -> Check {
    let mut r = rng(500);
    let cfg = SimConfig::desk();
    let mut max_cells = 0;
    let mut total_splits = 0;
    for case in 0..20 {
        let genome = decode_genome(&random_genome(&mut r)).map_err(|e| e.to_string())?;
        let seed = r.random::<u64>();
        let mut colony = init_colony(&cfg, &genome).map_err(|e| e.to_string())?;
        let mut env = init_environment(&cfg, seed).map_err(|e| e.to_string())?;
        for step in 0..500 {
            update_nutrients(&mut env, &cfg);
            absorb_nutrients(&mut colony, &mut env, &genome, &cfg);
            let forces = compute_forces(&colony, &genome, &cfg);
            integrate(&mut colony, &forces, &genome, &cfg, &env);
            let before = colony.total_energy();
            divide_cells(&mut colony, &genome, &cfg, &env);
            let after = colony.total_energy();
            ensure((after - before).abs() <= 1e-9 * before.abs().max(1e-300), || {
                format!("case {case} step {step}: division changed energy {before} -> {after}")
            })?;
            cull(&mut colony);
            let (orgs, splits) = (colony.organisms.len(), colony.splits);
            update_splits(&mut colony, &genome, &cfg);
            ensure(colony.organisms.len() - orgs == (colony.splits - splits) as usize, || {
                format!("case {case} step {step}: split counter out of step with organism count")
            })?;
            colony_invariants(&colony, &env, &genome, step).map_err(|e| format!("case {case} {e}"))?;
            max_cells = max_cells.max(colony.cell_count());
        }
        total_splits += colony.splits;
    }
    Ok(format!("20 colonies × 500 steps clean (max {max_cells} cells, {total_splits} splits)"))
}

// ---------------------------------------------------------- desk evolution

fn desk_evolution() -> Check {
    let mut improved = 0;
    let mut lines = Vec::new();
    for seed in 0..5 {
        let cfg = EvolutionConfig::desk(seed, seed);
        ensure(cfg.lambda == 8 && cfg.mu == 2 && cfg.generations == 20, || "desk config drifted".into())?;
        ensure(cfg.sim_config.timesteps == 60 && cfg.sim_config.env_size == [300.0, 300.0], || {
            "desk sim config drifted".into()
        })?;
        let archive = run_evolution(&cfg, |_, _| {}).map_err(|e| e.to_string())?;
        let bsf = &archive.best_so_far;
        ensure(bsf.windows(2).all(|w| w[1] >= w[0]), || format!("seed {seed}: best-so-far decreased"))?;
        let gen0 = archive.generations[0].best().objective;
        let last = *bsf.last().unwrap();
        if last >= gen0 {
            improved += 1;
        }
        lines.push(format!("{gen0:.3}->{last:.3}"));
    }
    ensure(improved >= 4, || format!("only {improved}/5 seeds reached their generation-0 best"))?;
    Ok(format!("{improved}/5 seeds, {}", lines.join(" ")))
}

// ------------------------------------------------------------ interpolation

fn interpolation() -> Check {
    let archive = run_evolution(&EvolutionConfig::desk(1, 1), |_, _| {}).map_err(|e| e.to_string())?;
    let best = archive.best().unwrap();
    let other = archive.generations[0].individuals.iter().find(|r| r.id != best.id).unwrap();
    let (a, b) = (archive.spec_for(best), archive.spec_for(other));
    let res: InterpolationResult = run_interpolation(&a, &b, 99, |_, _| {}).map_err(|e| e.to_string())?;
    ensure(res.entries.len() == 101, || format!("{} entries", res.entries.len()))?;
    let first = &res.entries[0];
    let last = &res.entries[100];
    ensure(first.id == best.id && Some(&first.fitness) == best.fitness.as_ref(), || "start fitness differs".into())?;
    ensure(last.id == other.id && Some(&last.fitness) == other.fitness.as_ref(), || "end fitness differs".into())?;
    let dist = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let gaps: Vec<f64> =
        res.entries.windows(2).map(|w| dist(&w[0].genome_normalized, &w[1].genome_normalized)).collect();
    let spread = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    ensure(spread <= 1e-12, || format!("step lengths vary by {spread:e}"))?;

    let foreign = IndividualSpec { env_seed: b.env_seed + 1, ..b.clone() };
    match run_interpolation(&a, &foreign, 99, |_, _| {}) {
        Err(Error::EnvironmentMismatch(_)) => {}
        other => return Err(format!("mismatched environments not rejected: {:?}", other.map(|r| r.id))),
    }
    Ok(format!("101 entries, endpoints exact, step spread {spread:.1e}, mismatch rejected"))
}

// ------------------------------------------------------------------- export

fn export() -> Check {
    let profile = PrinterProfile::default();
    let flow = flow_per_mm(&profile);
    let mut r = rng(9);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for i in 0..6 {
        let genome = decode_genome(&random_genome(&mut r)).map_err(|e| e.to_string())?;
        let cfg = if i % 2 == 0 { SimConfig::desk() } else { SimConfig::default() };
        let stack = grow(&genome, i, &cfg).map_err(|e| e.to_string())?;
        let text = to_gcode(&stack, &profile).map_err(|e| e.to_string())?;
        let cmds = parse_gcode(&text).map_err(|e| format!("stack {i}: {e}"))?;
        let summary = GcodeSummary::of(&cmds);
        ensure(summary.z_values.windows(2).all(|w| w[1] >= w[0]), || {
            format!("stack {i}: Z decreases")
        })?;
        let expected: f64 = stack
            .layers
            .iter()
            .flat_map(|l| &l.polygons)
            .filter(|ring| ring.len() >= 2)
            .map(|ring| perimeter(ring) * stack.config.unit_to_mm * flow)
            .sum();
        if expected > 0.0 {
            worst = worst.max((summary.total_extrusion - expected).abs() / expected);
            checked += 1;
        }
        let json = to_contour_json(&stack);
        let back = LayerStack::from_json(&json).map_err(|e| e.to_string())?;
        ensure(back.to_canonical_json() == json, || format!("stack {i}: contour JSON does not round-trip"))?;
    }
    ensure(checked > 0, || "no non-empty stacks to check".into())?;
    ensure(worst <= 0.005, || format!("extrusion off by {:.3}%", worst * 100.0))?;
    Ok(format!("6 stacks parsed, E within {:.4}% on {checked}, Z monotone, JSON round-trips", worst * 100.0))
}

// ------------------------------------------------------------------ service

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.expect("router call");
    let status = resp.status();
    (status, to_bytes(resp.into_body(), usize::MAX).await.expect("body").to_vec())
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>) {
    call(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn service_flow() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let app = router(Arc::new(Studio::open(dir.path(), 4).map_err(|e| e.to_string())?));
    let cfg = serde_json::to_string(&EvolutionConfig::desk(4, 4)).unwrap();
    let req = Request::post("/api/runs").header(header::CONTENT_TYPE, "application/json").body(Body::from(cfg)).unwrap();
    let (status, body) = call(&app, req).await;
    ensure(status == StatusCode::ACCEPTED, || format!("submit returned {status}"))?;
    let submitted: Value = serde_json::from_slice(&body).map_err(|e| e.to_string())?;
    let job_id = submitted["job_id"].as_str().ok_or("no job_id")?.to_string();
    let run_id = submitted["run_id"].as_str().ok_or("no run_id")?.to_string();

    let start = Instant::now();
    let job = loop {
        let (_, body) = get(&app, &format!("/api/jobs/{job_id}")).await;
        let job: Value = serde_json::from_slice(&body).map_err(|e| e.to_string())?;
        match job["status"].as_str() {
            Some("done") => break job,
            Some("failed") => return Err(format!("job failed: {job}")),
            _ => {}
        }
        ensure(start.elapsed() < Duration::from_secs(300), || "job did not finish".into())?;
        tokio::time::sleep(Duration::from_millis(100)).await;
    };
    for key in ["id", "kind", "status", "progress", "created_at", "updated_at", "result"] {
        ensure(job.get(key).is_some(), || format!("job record lacks {key}"))?;
    }

    let (status, run_bytes) = get(&app, &format!("/api/runs/{run_id}")).await;
    ensure(status == StatusCode::OK, || format!("archive fetch returned {status}"))?;
    let archive = RunArchive::from_json(std::str::from_utf8(&run_bytes).map_err(|e| e.to_string())?)
        .map_err(|e| format!("archive does not validate: {e}"))?;
    ensure(archive.generations.len() == 20, || "archive has wrong generation count".into())?;
    let best = archive.best().ok_or("empty archive")?.id.clone();
    let (status, ind) = get(&app, &format!("/api/individuals/{best}")).await;
    ensure(status == StatusCode::OK, || format!("individual fetch returned {status}"))?;
    let ind: Value = serde_json::from_slice(&ind).map_err(|e| e.to_string())?;
    ensure(ind["fitness"]["overall"].is_number() && ind["genome"].is_object(), || "individual schema".into())?;
    let (status, layers) = get(&app, &format!("/api/individuals/{best}/layers")).await;
    ensure(status == StatusCode::OK, || format!("layers fetch returned {status}"))?;
    let (status, gcode) = get(&app, &format!("/api/individuals/{best}/export?format=gcode")).await;
    ensure(status == StatusCode::OK, || format!("export returned {status}"))?;
    parse_gcode(std::str::from_utf8(&gcode).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;

    drop(app);
    let app = router(Arc::new(Studio::open(dir.path(), 1).map_err(|e| e.to_string())?));
    for (uri, want) in [
        (format!("/api/runs/{run_id}"), Some(&run_bytes)),
        (format!("/api/individuals/{best}/layers"), Some(&layers)),
        (format!("/api/jobs/{job_id}"), None),
        (format!("/api/individuals/{best}"), None),
        ("/api/runs".to_string(), None),
    ] {
        let (status, body) = get(&app, &uri).await;
        ensure(status == StatusCode::OK, || format!("after restart {uri} returned {status}"))?;
        if let Some(want) = want {
            ensure(&body == want, || format!("after restart {uri} changed"))?;
        }
    }
    Ok(format!("desk run {run_id} done in {:.1}s, archive validates, readable after restart", start.elapsed().as_secs_f64()))
}

fn service() -> Check {
    tokio::runtime::Runtime::new().map_err(|e| e.to_string())?.block_on(service_flow())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("determinism", determinism),
        ("cma-es", cma),
        ("geometry-oracles", geometry),
        ("formula-fidelity", formulas),
        ("printability-anchors", printability_anchors),
        ("simulation-invariants", simulation_fuzz),
        ("desk-evolution", desk_evolution),
        ("interpolation", interpolation),
        ("export", export),
        ("service", service),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({secs:.1}s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1}s) {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
