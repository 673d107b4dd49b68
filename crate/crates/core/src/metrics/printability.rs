use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MetricsConfig;
use crate::geometry::{convex_hull, edges, min_width, point_segment_distance, Point};
use crate::parallel::par_map;
use crate::sim::{LayerSnapshot, LayerStack};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrintabilityReport {
    pub gate_pass: bool,
    /// Narrowest per-layer convex-hull width, in mm.
    pub min_width_mm: f64,
    /// Mean supported-perimeter ratio of each layer (layer 0 rests on the bed).
    #[serde(rename = "per_layer_P")]
    pub per_layer_p: Vec<f64>,
    #[serde(rename = "P")]
    pub p: f64,
}

/// Segments of one layer bucketed on a square grid; each segment is entered
/// in every bucket its `reach`-expanded bounding box touches, so a lookup of
/// the single bucket containing a query point sees every segment within
/// `reach` of it.
struct SegmentIndex {
    size: f64,
    buckets: HashMap<(i64, i64), Vec<(Point, Point)>>,
}

impl SegmentIndex {
    fn build(layer: &LayerSnapshot, reach: f64) -> Self {
        let size = (2.0 * reach).max(1e-9);
        let mut buckets: HashMap<(i64, i64), Vec<(Point, Point)>> = HashMap::new();
        for ring in &layer.polygons {
            for (a, b) in edges(ring) {
                let x0 = ((a.x.min(b.x) - reach) / size).floor() as i64;
                let x1 = ((a.x.max(b.x) + reach) / size).floor() as i64;
                let y0 = ((a.y.min(b.y) - reach) / size).floor() as i64;
                let y1 = ((a.y.max(b.y) + reach) / size).floor() as i64;
                for gx in x0..=x1 {
                    for gy in y0..=y1 {
                        buckets.entry((gx, gy)).or_default().push((a, b));
                    }
                }
            }
        }
        SegmentIndex { size, buckets }
    }

    fn any_within(&self, p: Point, dist: f64) -> bool {
        let key = ((p.x / self.size).floor() as i64, (p.y / self.size).floor() as i64);
        self.buckets
            .get(&key)
            .is_some_and(|segs| segs.iter().any(|&(a, b)| point_segment_distance(p, a, b) <= dist))
    }
}

/// Supported fraction `Ps/Pt` of each organism's perimeter in `layer`.
///
/// The boundary is sampled at arc-length steps of at most `delta/2`; a
/// sample counts as supported when it lies within `delta` of a strand of the
/// layer below (strands are the below-layer contours themselves).
pub fn layer_support(layer: &LayerSnapshot, below: &LayerSnapshot, delta_mm: f64, unit_to_mm: f64) -> Vec<f64> {
    let delta = delta_mm / unit_to_mm;
    if below.is_empty() {
        return vec![0.0; layer.polygons.len()];
    }
    let index = SegmentIndex::build(below, delta);
    let step = delta / 2.0;
    layer
        .polygons
        .iter()
        .map(|ring| {
            let mut total = 0.0;
            let mut supported = 0.0;
            for (a, b) in edges(ring) {
                let len = a.dist(b);
                if len == 0.0 {
                    continue;
                }
                let n = (len / step).ceil().max(1.0) as usize;
                let hits = (0..n)
                    .filter(|&s| index.any_within(a + (b - a) * ((s as f64 + 0.5) / n as f64), delta))
                    .count();
                supported += len * hits as f64 / n as f64;
                total += len;
            }
            if total > 0.0 {
                (supported / total).min(1.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// Printability of a stack: zero unless every layer's convex hull is at
/// least `min_width_mm` wide, otherwise the worst layer's mean support ratio.
pub fn printability(stack: &LayerStack, cfg: &MetricsConfig) -> PrintabilityReport {
    let failed = PrintabilityReport { gate_pass: false, min_width_mm: 0.0, per_layer_p: Vec::new(), p: 0.0 };
    if stack.layers.is_empty() || stack.layers.iter().any(LayerSnapshot::is_empty) {
        return failed;
    }
    let unit = stack.config.unit_to_mm;

    let widths = par_map(&stack.layers, |layer| {
        let pts: Vec<Point> = layer.vertices().collect();
        convex_hull(&pts).map(|h| min_width(&h)).unwrap_or(0.0) * unit
    });
    let narrowest = widths.iter().copied().fold(f64::INFINITY, f64::min);
    let gate_pass = narrowest >= cfg.min_width_mm;

    let idx: Vec<usize> = (0..stack.layers.len()).collect();
    let per_layer_p = par_map(&idx, |&i| {
        if i == 0 {
            return 1.0;
        }
        let ratios = layer_support(&stack.layers[i], &stack.layers[i - 1], cfg.support_delta_mm, unit);
        ratios.iter().sum::<f64>() / ratios.len() as f64
    });
    let worst = per_layer_p.iter().copied().fold(f64::INFINITY, f64::min);
    PrintabilityReport {
        gate_pass,
        min_width_mm: narrowest,
        per_layer_p,
        p: if gate_pass { worst } else { 0.0 },
    }
}
