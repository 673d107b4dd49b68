use serde::{Deserialize, Serialize};

use super::MetricsConfig;
use crate::geometry::{convexity, interior_angles};
use crate::sim::LayerStack;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub c_avg: f64,
    #[serde(rename = "Q_avg")]
    pub q_avg: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "C")]
    pub c: f64,
    /// Number of (organism, layer) pairs averaged over.
    pub samples: usize,
}

/// Quartile coefficient of dispersion `(q3 - q1) / (q3 + q1)`, with
/// linearly interpolated quartiles. Fewer than four angles give 0.
pub fn quartile_dispersion(angles: &[f64]) -> f64 {
    if angles.len() < 4 {
        return 0.0;
    }
    let mut v = angles.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (v.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(v.len() - 1);
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    let (q1, q3) = (q(0.25), q(0.75));
    if q1 + q3 <= 0.0 {
        return 0.0;
    }
    ((q3 - q1) / (q3 + q1)).clamp(0.0, 1.0)
}

/// `S = d^(1 / (1 + n_s))`.
pub fn splitting_score(n_s: u32, d: f64) -> f64 {
    d.powf(1.0 / (1.0 + n_s as f64))
}

/// Formal complexity `C = (c + Q + S) / 3`, with `c` and `Q` averaged over
/// every organism of every recorded layer.
pub fn complexity(stack: &LayerStack, cfg: &MetricsConfig) -> ComplexityReport {
    let s = splitting_score(stack.n_s, cfg.d);
    let mut c_sum = 0.0;
    let mut q_sum = 0.0;
    let mut samples = 0usize;
    for ring in stack.layers.iter().flat_map(|l| &l.polygons) {
        // Rings of zero perimeter have no defined convexity.
        let Ok(c) = convexity(ring) else { continue };
        c_sum += c;
        q_sum += quartile_dispersion(&interior_angles(ring));
        samples += 1;
    }
    if samples == 0 {
        return ComplexityReport { c_avg: 0.0, q_avg: 0.0, s, c: 0.0, samples };
    }
    let c_avg = c_sum / samples as f64;
    let q_avg = q_sum / samples as f64;
    ComplexityReport { c_avg, q_avg, s, c: (c_avg + q_avg + s) / 3.0, samples }
}
