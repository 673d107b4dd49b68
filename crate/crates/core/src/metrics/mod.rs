//! Design-objective scores of a [`LayerStack`].
//!
//! Three scores are combined with equal weight into the overall fitness:
//! printability `P`, relative coverage `Rc` and formal complexity `C`.

mod complexity;
mod coverage;
mod printability;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::LayerStack;

pub use complexity::{complexity, quartile_dispersion, splitting_score, ComplexityReport};
pub use coverage::{relative_coverage, tile_support, CoverageReport};
pub use printability::{layer_support, printability, PrintabilityReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    /// Smallest admissible convex-hull width of a layer, in mm.
    pub min_width_mm: f64,
    /// Contact distance between a strand and the one below it, in mm.
    pub support_delta_mm: f64,
    /// Coverage tiles per side of the environment.
    pub grid_n: usize,
    /// Tiles with support score `m` at or above this value are supported.
    pub support_threshold: f64,
    /// Base `d` of the splitting score.
    pub d: f64,
    /// Cap on a single organism's contribution to `m`.
    pub m_cap: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            min_width_mm: 5.0,
            support_delta_mm: 0.4,
            grid_n: 20,
            support_threshold: 0.85,
            d: 0.1,
            m_cap: 10.0,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.min_width_mm.is_nan() || self.min_width_mm <= 0.0 {
            return bad("min_width_mm must be > 0");
        }
        if self.support_delta_mm.is_nan() || self.support_delta_mm <= 0.0 {
            return bad("support_delta_mm must be > 0");
        }
        if self.grid_n < 1 {
            return bad("grid_n must be >= 1");
        }
        if !(self.support_threshold > 0.0 && self.support_threshold <= 1.0) {
            return bad("support_threshold must lie in (0, 1]");
        }
        if !(self.d > 0.0 && self.d < 1.0) {
            return bad("d must lie in (0, 1)");
        }
        if self.m_cap.is_nan() || self.m_cap <= 0.0 {
            return bad("m_cap must be > 0");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessReports {
    pub printability: PrintabilityReport,
    pub coverage: CoverageReport,
    pub complexity: ComplexityReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessVector {
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "Rc")]
    pub rc: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub overall: f64,
    pub reports: FitnessReports,
}

impl FitnessVector {
    pub fn from_reports(reports: FitnessReports) -> Self {
        let (p, rc, c) = (reports.printability.p, reports.coverage.rc, reports.complexity.c);
        FitnessVector { p, rc, c, overall: (p + rc + c) / 3.0, reports }
    }

    /// Copy without the per-layer and per-tile arrays, for embedding in
    /// run archives.
    pub fn compact(&self) -> Self {
        let mut out = self.clone();
        out.reports.printability.per_layer_p.clear();
        out.reports.coverage.tile_scores.clear();
        out
    }
}

/// Scores a stack. Degenerate stacks get the defined fallback scores.
pub fn evaluate(stack: &LayerStack, cfg: &MetricsConfig) -> FitnessVector {
    FitnessVector::from_reports(FitnessReports {
        printability: printability(stack, cfg),
        coverage: relative_coverage(stack, cfg),
        complexity: complexity(stack, cfg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::Genome;
    use crate::geometry::{regular_polygon, Point};
    use crate::sim::{LayerSnapshot, SimConfig};

    #[test]
    fn defaults_are_valid() {
        let c = MetricsConfig::default();
        assert_eq!(c.min_width_mm, 5.0);
        assert_eq!(c.support_threshold, 0.85);
        assert!(c.validate().is_ok());
        assert!(MetricsConfig { d: 1.0, ..c.clone() }.validate().is_err());
        assert!(MetricsConfig { grid_n: 0, ..c }.validate().is_err());
    }

    #[test]
    fn empty_stack_scores_zero() {
        let s = LayerStack::empty(Genome::default(), 0, SimConfig::default());
        let f = evaluate(&s, &MetricsConfig::default());
        assert_eq!((f.p, f.rc, f.c, f.overall), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn overall_is_mean_of_parts() {
        let ring = regular_polygon(Point::new(300.0, 300.0), 60.0, 24, 0.0);
        let s = LayerStack {
            layers: vec![LayerSnapshot { polygons: vec![ring] }; 3],
            ..LayerStack::empty(Genome::default(), 0, SimConfig::default())
        };
        let f = evaluate(&s, &MetricsConfig::default());
        assert_eq!(f.overall, (f.p + f.rc + f.c) / 3.0);
        assert_eq!(f.p, 1.0);
        assert!((f.c - 1.1 / 3.0).abs() < 1e-12);
        let json = serde_json::to_value(&f).unwrap();
        for key in ["P", "Rc", "C", "overall", "reports"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        for key in ["printability", "coverage", "complexity"] {
            assert!(json["reports"].get(key).is_some(), "missing {key}");
        }
    }
}
