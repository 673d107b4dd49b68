use serde::{Deserialize, Serialize};

use super::MetricsConfig;
use crate::geometry::{centroid, ray_first_hit, union_area, Point};
use crate::parallel::par_map;
use crate::sim::{LayerSnapshot, LayerStack};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    /// First-layer footprint as a fraction of the environment.
    #[serde(rename = "A")]
    pub a: f64,
    /// Fraction of tiles whose support score reaches the threshold.
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "Rc")]
    pub rc: f64,
    /// Support score `m` per tile, row-major from the environment's min corner.
    pub tile_scores: Vec<f64>,
}

/// Support score `m = sum r_i / d_i` of the tile centred at `tc`.
///
/// `d_i` is the distance from organism `i`'s area centroid to `tc` and `r_i`
/// the distance from that centroid, along the ray towards `tc`, to the first
/// boundary crossing. Terms are capped at `m_cap`; a ray that never meets the
/// boundary contributes nothing.
pub fn tile_support(tc: Point, top: &LayerSnapshot, m_cap: f64) -> f64 {
    top.polygons
        .iter()
        .filter(|ring| ring.len() >= 3)
        .map(|ring| support_term(tc, centroid(ring), ring, m_cap))
        .sum()
}

fn support_term(tc: Point, c: Point, ring: &[Point], m_cap: f64) -> f64 {
    let d = tc.dist(c);
    let Some(dir) = (tc - c).normalized().filter(|_| d > 1e-12) else {
        return m_cap;
    };
    match ray_first_hit(ring, c, dir) {
        Some(r) => (r / d).min(m_cap),
        None => 0.0,
    }
}

/// Relative coverage `Rc = R - A`.
pub fn relative_coverage(stack: &LayerStack, cfg: &MetricsConfig) -> CoverageReport {
    let (lo, hi) = stack.config.bounds();
    let env_area = (hi.x - lo.x) * (hi.y - lo.y);
    let a = match stack.layers.first() {
        Some(first) if env_area > 0.0 => (union_area(&first.polygons, Some((lo, hi))) / env_area).clamp(0.0, 1.0),
        _ => 0.0,
    };

    let (r, tile_scores) = match stack.layers.last() {
        Some(top) if !top.is_empty() => {
            let n = cfg.grid_n;
            let (w, h) = ((hi.x - lo.x) / n as f64, (hi.y - lo.y) / n as f64);
            let rings: Vec<(Point, &Vec<Point>)> =
                top.polygons.iter().filter(|r| r.len() >= 3).map(|r| (centroid(r), r)).collect();
            let tiles: Vec<Point> = (0..n * n)
                .map(|k| Point::new(lo.x + ((k % n) as f64 + 0.5) * w, lo.y + ((k / n) as f64 + 0.5) * h))
                .collect();
            let scores = par_map(&tiles, |&tc| rings.iter().map(|&(c, ring)| support_term(tc, c, ring, cfg.m_cap)).sum());
            let supported = scores.iter().filter(|&&m| m >= cfg.support_threshold).count();
            (supported as f64 / tiles.len() as f64, scores)
        }
        _ => (0.0, Vec::new()),
    };
    CoverageReport { a, r, rc: r - a, tile_scores }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::Genome;
    use crate::geometry::regular_polygon;
    use crate::sim::SimConfig;

    fn circle(c: Point, r: f64) -> Vec<Point> {
        regular_polygon(c, r, 2000, 0.0)
    }

    #[test]
    fn circle_terms() {
        let c = Point::new(100.0, 100.0);
        let layer = LayerSnapshot { polygons: vec![circle(c, 10.0)] };
        let on_boundary = tile_support(Point::new(110.0, 100.0), &layer, 10.0);
        assert!((on_boundary - 1.0).abs() < 1e-6);
        let twice = tile_support(Point::new(100.0, 120.0), &layer, 10.0);
        assert!((twice - 0.5).abs() < 1e-5, "{twice}");
        assert_eq!(tile_support(c, &layer, 10.0), 10.0);
        // Inside near the centre: capped.
        assert_eq!(tile_support(Point::new(100.5, 100.0), &layer, 10.0), 10.0);
    }

    #[test]
    fn support_decreases_radially() {
        let layer = LayerSnapshot { polygons: vec![regular_polygon(Point::new(50.0, 50.0), 10.0, 7, 0.2)] };
        let mut prev = f64::INFINITY;
        for k in 1..40 {
            let m = tile_support(Point::new(50.0 + k as f64, 50.0 + 0.5 * k as f64), &layer, 10.0);
            assert!(m <= prev);
            prev = m;
        }
    }

    #[test]
    fn empty_stack_has_zero_coverage() {
        let s = LayerStack::empty(Genome::default(), 0, SimConfig::default());
        let r = relative_coverage(&s, &MetricsConfig::default());
        assert_eq!((r.a, r.r, r.rc), (0.0, 0.0, 0.0));
    }

    #[test]
    fn full_cover_gives_zero() {
        let cfg = SimConfig::default();
        let full = vec![Point::new(-10.0, -10.0), Point::new(610.0, -10.0), Point::new(610.0, 610.0), Point::new(-10.0, 610.0)];
        let s = LayerStack {
            layers: vec![LayerSnapshot { polygons: vec![full] }; 2],
            ..LayerStack::empty(Genome::default(), 0, cfg)
        };
        let r = relative_coverage(&s, &MetricsConfig::default());
        assert_eq!(r.a, 1.0);
        assert_eq!(r.r, 1.0);
        assert_eq!(r.rc, 0.0);
    }

    #[test]
    fn centred_circle_area_ratio() {
        let ring = circle(Point::new(300.0, 300.0), 100.0);
        let s = LayerStack {
            layers: vec![LayerSnapshot { polygons: vec![ring] }; 3],
            ..LayerStack::empty(Genome::default(), 0, SimConfig::default())
        };
        let r = relative_coverage(&s, &MetricsConfig::default());
        let expect = std::f64::consts::PI * 100.0 * 100.0 / (600.0 * 600.0);
        assert!((r.a - expect).abs() < 1e-4);
        assert_eq!(r.rc, r.r - r.a);
        assert_eq!(r.tile_scores.len(), 400);
        // m >= 0.85 exactly for tiles within 100/0.85 of the centre.
        let oracle = (0..400)
            .filter(|k| {
                let p = Point::new((k % 20) as f64 * 30.0 + 15.0, (k / 20) as f64 * 30.0 + 15.0);
                p.dist(Point::new(300.0, 300.0)) <= 100.0 / 0.85
            })
            .count();
        assert!((r.r * 400.0 - oracle as f64).abs() <= 1.0);
    }
}
