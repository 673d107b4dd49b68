//! Captured contours and their canonical JSON form.
//!
//! Coordinates are quantized to 1e-6 world units when captured, which makes
//! the fixed six-digit text encoding lossless: `parse(emit(s)) == s` and two
//! equal stacks always produce identical bytes.

use std::fmt::Write as _;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{Colony, SimConfig};
use crate::error::{Error, Result};
use crate::genome::Genome;
use crate::geometry::Point;

pub const STACK_FORMAT_VERSION: u32 = 1;

const QUANTUM: f64 = 1e6;

fn quantize(v: f64) -> f64 {
    let q = (v * QUANTUM).round() / QUANTUM;
    // Normalize negative zero so that text and value agree.
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

/// One organism contour per living organism at one timestep.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LayerSnapshot {
    pub polygons: Vec<Vec<Point>>,
}

impl LayerSnapshot {
    pub fn capture(colony: &Colony) -> Self {
        let polygons = colony
            .organisms
            .iter()
            .map(|o| {
                o.cells
                    .iter()
                    .map(|c| Point::new(quantize(c.position.x), quantize(c.position.y)))
                    .collect()
            })
            .collect();
        LayerSnapshot { polygons }
    }

    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }

    pub fn vertices(&self) -> impl Iterator<Item = Point> + '_ {
        self.polygons.iter().flatten().copied()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerStack {
    pub genome: Genome,
    pub env_seed: u64,
    pub config: SimConfig,
    /// Completed organism splits over the whole run, warmup included.
    pub n_s: u32,
    /// The colony died out before recording started.
    pub extinct: bool,
    pub layers: Vec<LayerSnapshot>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StackDocument {
    version: u32,
    genome: Genome,
    env_seed: u64,
    config: SimConfig,
    n_s: u32,
    extinct: bool,
    layers: Vec<Vec<Vec<[f64; 2]>>>,
}

impl LayerStack {
    /// Canonical serialization:
    /// `{"version","genome","env_seed","config","n_s","extinct","layers"}` with
    /// `layers` as `[layer][polygon][vertex] = [x, y]` and every coordinate
    /// printed with exactly six fractional digits.
    pub fn to_canonical_json(&self) -> String {
        let mut out = String::with_capacity(64 + 24 * self.vertex_count());
        out.push_str("{\"version\":");
        write!(out, "{STACK_FORMAT_VERSION}").unwrap();
        out.push_str(",\"genome\":");
        out.push_str(&serde_json::to_string(&self.genome).expect("genome serializes"));
        write!(out, ",\"env_seed\":{}", self.env_seed).unwrap();
        out.push_str(",\"config\":");
        out.push_str(&serde_json::to_string(&self.config).expect("config serializes"));
        write!(out, ",\"n_s\":{},\"extinct\":{}", self.n_s, self.extinct).unwrap();
        out.push_str(",\"layers\":[");
        for (li, layer) in self.layers.iter().enumerate() {
            if li > 0 {
                out.push(',');
            }
            out.push('[');
            for (pi, poly) in layer.polygons.iter().enumerate() {
                if pi > 0 {
                    out.push(',');
                }
                out.push('[');
                for (vi, p) in poly.iter().enumerate() {
                    if vi > 0 {
                        out.push(',');
                    }
                    write!(out, "[{:.6},{:.6}]", p.x, p.y).unwrap();
                }
                out.push(']');
            }
            out.push(']');
        }
        out.push_str("]}");
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: StackDocument = serde_json::from_str(text)?;
        if doc.version != STACK_FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported layer stack version {}", doc.version)));
        }
        let layers = doc
            .layers
            .into_iter()
            .map(|polys| LayerSnapshot {
                polygons: polys
                    .into_iter()
                    .map(|ring| ring.into_iter().map(|[x, y]| Point::new(x, y)).collect())
                    .collect(),
            })
            .collect();
        Ok(LayerStack {
            genome: doc.genome,
            env_seed: doc.env_seed,
            config: doc.config,
            n_s: doc.n_s,
            extinct: doc.extinct,
            layers,
        })
    }

    /// Lowercase hex SHA-256 of the canonical serialization.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_canonical_json().as_bytes()))
    }

    pub fn vertex_count(&self) -> usize {
        self.layers.iter().map(|l| l.polygons.iter().map(Vec::len).sum::<usize>()).sum()
    }

    /// A stack with no layers, as emitted for an empty document.
    pub fn empty(genome: Genome, env_seed: u64, config: SimConfig) -> Self {
        LayerStack { genome, env_seed, config, n_s: 0, extinct: false, layers: Vec::new() }
    }
}
