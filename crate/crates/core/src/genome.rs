//! The five-allele genome and its normalized `[0,1]^5` encoding.
//!
//! The optimizer works on the unit cube; the simulator consumes decoded
//! allele values. The mapping is an affine map per allele.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of alleles in a genome.
pub const GENOME_LEN: usize = 5;

/// Closed range of an allele.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlleleRange {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
}

impl AlleleRange {
    pub fn contains(&self, v: f64) -> bool {
        v.is_finite() && v >= self.lo && v <= self.hi
    }
}

/// Ranges for (eta, nu, eps_max, k, rho), in genome order.
///
/// The open lower bounds of eta, nu and k are closed off at a small positive
/// value so that the encoding stays a bijection on a closed box.
pub const ALLELE_RANGES: [AlleleRange; GENOME_LEN] = [
    AlleleRange { name: "eta", lo: 0.01, hi: 1.0 },
    AlleleRange { name: "nu", lo: 0.01, hi: 2.0 },
    AlleleRange { name: "eps_max", lo: 50.0, hi: 500.0 },
    AlleleRange { name: "k", lo: 0.01, hi: 1.0 },
    AlleleRange { name: "rho", lo: 0.1, hi: 0.9 },
];

/// Decoded colony parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    /// Metabolic rate: nutrient-to-energy efficiency, also scales base cost.
    pub eta: f64,
    /// Drag coefficient of the medium acting on each cell.
    pub nu: f64,
    /// Energy capacity of a cell; cell mass is proportional to it.
    pub eps_max: f64,
    /// Edge spring coefficient.
    pub k: f64,
    /// Fraction of energy kept by the `C_max` side after an organism splits.
    pub rho: f64,
}

impl Genome {
    pub fn new(eta: f64, nu: f64, eps_max: f64, k: f64, rho: f64) -> Result<Self> {
        let g = Genome { eta, nu, eps_max, k, rho };
        g.validate()?;
        Ok(g)
    }

    pub fn as_array(&self) -> [f64; GENOME_LEN] {
        [self.eta, self.nu, self.eps_max, self.k, self.rho]
    }

    pub fn from_array(v: [f64; GENOME_LEN]) -> Result<Self> {
        Genome::new(v[0], v[1], v[2], v[3], v[4])
    }

    pub fn validate(&self) -> Result<()> {
        for (v, range) in self.as_array().iter().zip(ALLELE_RANGES.iter()) {
            if !range.contains(*v) {
                return Err(Error::InvalidInput(format!(
                    "allele {} = {} outside [{}, {}]",
                    range.name, v, range.lo, range.hi
                )));
            }
        }
        Ok(())
    }

    /// Inverse of [`decode_genome`].
    pub fn encode(&self) -> [f64; GENOME_LEN] {
        let mut out = [0.0; GENOME_LEN];
        for (i, (v, r)) in self.as_array().iter().zip(ALLELE_RANGES.iter()).enumerate() {
            out[i] = (v - r.lo) / (r.hi - r.lo);
        }
        out
    }
}

impl Default for Genome {
    /// The centre of the allele box.
    fn default() -> Self {
        decode_genome(&[0.5; GENOME_LEN]).expect("midpoint is in range")
    }
}

/// Maps a normalized vector in `[0,1]^5` onto allele values.
pub fn decode_genome(normalized: &[f64]) -> Result<Genome> {
    if normalized.len() != GENOME_LEN {
        return Err(Error::InvalidInput(format!(
            "expected {GENOME_LEN} normalized values, got {}",
            normalized.len()
        )));
    }
    let mut out = [0.0; GENOME_LEN];
    for (i, (&v, r)) in normalized.iter().zip(ALLELE_RANGES.iter()).enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidInput(format!(
                "normalized {} = {v} outside [0, 1]",
                r.name
            )));
        }
        // Endpoints map exactly onto the bounds.
        out[i] = if v == 1.0 { r.hi } else { r.lo + v * (r.hi - r.lo) };
    }
    Ok(Genome { eta: out[0], nu: out[1], eps_max: out[2], k: out[3], rho: out[4] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zeros_decode_to_lower_bounds() {
        let g = decode_genome(&[0.0; 5]).unwrap();
        assert_eq!(g.as_array(), [0.01, 0.01, 50.0, 0.01, 0.1]);
    }

    #[test]
    fn ones_decode_to_upper_bounds() {
        let g = decode_genome(&[1.0; 5]).unwrap();
        assert_eq!(g.as_array(), [1.0, 2.0, 500.0, 1.0, 0.9]);
    }

    #[test]
    fn midpoint_decodes_to_range_midpoints() {
        let g = decode_genome(&[0.5; 5]).unwrap();
        for (v, r) in g.as_array().iter().zip(ALLELE_RANGES.iter()) {
            assert!((v - (r.lo + r.hi) / 2.0).abs() < 1e-12);
        }
        for v in g.encode() {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_range_component() {
        assert!(decode_genome(&[0.5, 0.5, 1.2, 0.5, 0.5]).is_err());
        assert!(decode_genome(&[0.5, -0.01, 0.5, 0.5, 0.5]).is_err());
        assert!(decode_genome(&[0.5, f64::NAN, 0.5, 0.5, 0.5]).is_err());
        assert!(decode_genome(&[0.5; 4]).is_err());
    }

    #[test]
    fn raw_genome_validation() {
        assert!(Genome::new(0.5, 1.0, 100.0, 0.5, 0.5).is_ok());
        assert!(Genome::new(0.5, 1.0, 40.0, 0.5, 0.5).is_err());
        assert!(Genome::new(0.5, 1.0, 100.0, 0.5, 0.95).is_err());
    }

    proptest! {
        #[test]
        fn encoding_round_trips(v in proptest::array::uniform5(0.0f64..=1.0)) {
            let g = decode_genome(&v).unwrap();
            prop_assert!(g.validate().is_ok());
            for (a, b) in g.encode().iter().zip(v.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
