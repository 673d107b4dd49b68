use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{centroid, edges, perimeter, Point};
use crate::sim::LayerStack;

/// `n` points equally spaced by arc length along a closed ring, starting at
/// its first vertex.
pub fn resample_ring(ring: &[Point], n: usize) -> Vec<Point> {
    let total = perimeter(ring);
    if ring.is_empty() || total == 0.0 {
        return vec![ring.first().copied().unwrap_or(Point::ZERO); n];
    }
    let step = total / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut walked = 0.0;
    let mut segs = edges(ring).peekable();
    for k in 0..n {
        let target = k as f64 * step;
        while let Some(&(a, b)) = segs.peek() {
            let len = a.dist(b);
            if walked + len >= target || len == 0.0 && walked >= target {
                let t = if len > 0.0 { (target - walked) / len } else { 0.0 };
                out.push(a + (b - a) * t.clamp(0.0, 1.0));
                break;
            }
            walked += len;
            segs.next();
        }
        if out.len() == k {
            out.push(ring[0]);
        }
    }
    out
}

/// Rotation of `upper` that best lines it up with `lower`, to keep side
/// walls from twisting.
fn best_offset(lower: &[Point], upper: &[Point]) -> usize {
    let n = lower.len();
    (0..n)
        .min_by(|&a, &b| {
            let cost = |o: usize| (0..n).map(|k| lower[k].dist(upper[(k + o) % n]).powi(2)).sum::<f64>();
            cost(a).total_cmp(&cost(b))
        })
        .unwrap_or(0)
}

/// Lofted side-wall mesh in OBJ text. Every contour is resampled to
/// `resample_n` points; contours in consecutive layers are paired greedily
/// by nearest centroid and joined by `2 * resample_n` triangles. Unpaired
/// contours leave open edges. Coordinates are in mm.
pub fn to_mesh(stack: &LayerStack, resample_n: usize) -> Result<String> {
    if resample_n < 3 {
        return Err(Error::InvalidInput(format!("resample_n must be >= 3, got {resample_n}")));
    }
    let scale = stack.config.unit_to_mm;
    let dz = stack.config.layer_height;
    let mut out = String::from("# growform mesh\n");

    // First vertex index (1-based) and centroid of every contour, per layer.
    let mut rings: Vec<Vec<(usize, Point, Vec<Point>)>> = Vec::with_capacity(stack.layers.len());
    let mut next_index = 1;
    for (li, layer) in stack.layers.iter().enumerate() {
        let z = (li + 1) as f64 * dz;
        let mut row = Vec::new();
        for ring in layer.polygons.iter().filter(|r| !r.is_empty()) {
            let pts = resample_ring(ring, resample_n);
            for p in &pts {
                writeln!(out, "v {:.6} {:.6} {:.6}", p.x * scale, p.y * scale, z).unwrap();
            }
            row.push((next_index, centroid(ring), pts));
            next_index += resample_n;
        }
        rings.push(row);
    }

    let n = resample_n;
    for w in rings.windows(2) {
        let (lower, upper) = (&w[0], &w[1]);
        let mut cands: Vec<(f64, usize, usize)> = Vec::new();
        for (i, l) in lower.iter().enumerate() {
            for (j, u) in upper.iter().enumerate() {
                cands.push((l.1.dist(u.1), i, j));
            }
        }
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut used_l = vec![false; lower.len()];
        let mut used_u = vec![false; upper.len()];
        for (_, i, j) in cands {
            if used_l[i] || used_u[j] {
                continue;
            }
            used_l[i] = true;
            used_u[j] = true;
            let (lb, ub) = (lower[i].0, upper[j].0);
            let off = best_offset(&lower[i].2, &upper[j].2);
            for k in 0..n {
                let (a, b) = (lb + k, lb + (k + 1) % n);
                let (c, d) = (ub + (k + off) % n, ub + (k + 1 + off) % n);
                writeln!(out, "f {a} {b} {d}").unwrap();
                writeln!(out, "f {a} {d} {c}").unwrap();
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::Genome;
    use crate::geometry::regular_polygon;
    use crate::sim::{LayerSnapshot, SimConfig};

    fn stack(layers: Vec<LayerSnapshot>) -> LayerStack {
        LayerStack { layers, ..LayerStack::empty(Genome::default(), 0, SimConfig::default()) }
    }

    fn count(text: &str, prefix: &str) -> usize {
        text.lines().filter(|l| l.starts_with(prefix)).count()
    }

    #[test]
    fn resampling_is_even() {
        let sq = vec![Point::new(0.0, 0.0), Point::new(4.0, 0.0), Point::new(4.0, 4.0), Point::new(0.0, 4.0)];
        let r = resample_ring(&sq, 8);
        assert_eq!(r.len(), 8);
        assert_eq!(r[1], Point::new(2.0, 0.0));
        assert_eq!(r[3], Point::new(4.0, 2.0));
        for (a, b) in edges(&r) {
            assert!((a.dist(b) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_layer_circle_counts() {
        let l = LayerSnapshot { polygons: vec![regular_polygon(Point::new(300.0, 300.0), 40.0, 30, 0.0)] };
        let m = to_mesh(&stack(vec![l.clone(), l]), 4).unwrap();
        assert_eq!(count(&m, "v "), 8);
        assert_eq!(count(&m, "f "), 8);
    }

    #[test]
    fn unpaired_contours_leave_ribbons() {
        let one = LayerSnapshot { polygons: vec![regular_polygon(Point::new(100.0, 100.0), 20.0, 9, 0.0)] };
        let two = LayerSnapshot {
            polygons: vec![
                regular_polygon(Point::new(400.0, 400.0), 20.0, 9, 0.0),
                regular_polygon(Point::new(110.0, 100.0), 20.0, 9, 0.0),
            ],
        };
        let m = to_mesh(&stack(vec![one, two.clone(), two]), 6).unwrap();
        assert_eq!(count(&m, "v "), 5 * 6);
        // One pair between layers 0-1, two between 1-2.
        assert_eq!(count(&m, "f "), 3 * 2 * 6);
        let nv = count(&m, "v ");
        for line in m.lines().filter(|l| l.starts_with("f ")) {
            for idx in line[2..].split(' ') {
                let i: usize = idx.parse().unwrap();
                assert!(i >= 1 && i <= nv);
            }
        }
    }

    #[test]
    fn rejects_small_resample() {
        assert!(to_mesh(&stack(vec![]), 2).is_err());
    }
}
