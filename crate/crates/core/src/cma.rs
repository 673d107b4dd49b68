//! (mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu covariance updates and
//! cumulative step-size adaptation.
//!
//! The optimizer itself is sign-agnostic: callers rank candidates best-first
//! and hand the top `mu` to [`CmaEs::update`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EIGEN_FLOOR: f64 = 1e-14;

/// Box constraint handling: redraw out-of-box samples up to `max_resamples`
/// times, then clamp componentwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundPolicy {
    pub lower: f64,
    pub upper: f64,
    pub max_resamples: u32,
}

impl Default for BoundPolicy {
    fn default() -> Self {
        BoundPolicy { lower: 0.0, upper: 1.0, max_resamples: 100 }
    }
}

impl BoundPolicy {
    fn contains(&self, x: &DVector<f64>) -> bool {
        x.iter().all(|&v| v >= self.lower && v <= self.upper)
    }
}

/// Log-rank recombination weights `w_i ∝ ln(mu + 1) - ln(i)`, normalized to
/// sum to one.
pub fn log_weights(mu: usize) -> Vec<f64> {
    let raw: Vec<f64> = (1..=mu).map(|i| ((mu + 1) as f64).ln() - (i as f64).ln()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

/// Strategy constants derived from dimension and parent count.
#[derive(Clone, Debug, PartialEq)]
pub struct CmaParams {
    pub dim: usize,
    pub lambda: usize,
    pub mu: usize,
    pub weights: Vec<f64>,
    pub mueff: f64,
    pub cc: f64,
    pub cs: f64,
    pub c1: f64,
    pub cmu: f64,
    pub damps: f64,
    pub chi_n: f64,
}

impl CmaParams {
    pub fn new(dim: usize, lambda: usize, mu: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dimension must be >= 1".into()));
        }
        if mu == 0 || mu >= lambda {
            return Err(Error::Config(format!("need 1 <= mu < lambda, got mu={mu} lambda={lambda}")));
        }
        let n = dim as f64;
        let weights = log_weights(mu);
        let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n);
        let cs = (mueff + 2.0) / (n + mueff + 5.0);
        let c1 = 2.0 / ((n + 1.3).powi(2) + mueff);
        let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0).powi(2) + mueff));
        let damps = 1.0 + 2.0 * (((mueff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + cs;
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        Ok(CmaParams { dim, lambda, mu, weights, mueff, cc, cs, c1, cmu, damps, chi_n })
    }

    /// Default population size `4 + floor(3 ln n)` with `mu = lambda / 2`.
    pub fn default_for(dim: usize) -> Result<Self> {
        let lambda = 4 + (3.0 * (dim.max(1) as f64).ln()).floor() as usize;
        Self::new(dim, lambda, lambda / 2)
    }
}

#[derive(Clone, Debug)]
pub struct CmaEs {
    pub params: CmaParams,
    pub mean: DVector<f64>,
    pub sigma: f64,
    pub cov: DMatrix<f64>,
    pub p_sigma: DVector<f64>,
    pub p_c: DVector<f64>,
    pub generation: u64,
    bounds: Option<BoundPolicy>,
    basis: DMatrix<f64>,
    scales: DVector<f64>,
    rng: ChaCha8Rng,
}

impl CmaEs {
    pub fn new(params: CmaParams, mean: &[f64], sigma0: f64, seed: u64, bounds: Option<BoundPolicy>) -> Result<Self> {
        if mean.len() != params.dim {
            return Err(Error::InvalidInput(format!("mean has {} components, expected {}", mean.len(), params.dim)));
        }
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::Config(format!("sigma0 must be positive and finite, got {sigma0}")));
        }
        let n = params.dim;
        Ok(CmaEs {
            mean: DVector::from_column_slice(mean),
            sigma: sigma0,
            cov: DMatrix::identity(n, n),
            p_sigma: DVector::zeros(n),
            p_c: DVector::zeros(n),
            generation: 0,
            bounds,
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
            rng: ChaCha8Rng::seed_from_u64(seed),
            params,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.params.weights
    }

    fn draw(&mut self) -> DVector<f64> {
        let n = self.params.dim;
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut self.rng));
        let y = &self.basis * self.scales.component_mul(&z);
        &self.mean + y * self.sigma
    }

    /// Draws `lambda` candidates, applying the bound policy if any.
    pub fn sample(&mut self) -> Vec<Vec<f64>> {
        (0..self.params.lambda)
            .map(|_| {
                let mut x = self.draw();
                if let Some(b) = self.bounds.clone() {
                    let mut tries = 0;
                    while !b.contains(&x) && tries < b.max_resamples {
                        x = self.draw();
                        tries += 1;
                    }
                    x.apply(|v| *v = v.clamp(b.lower, b.upper));
                }
                x.iter().copied().collect()
            })
            .collect()
    }

    /// Updates the distribution from the `mu` best candidates, best first.
    pub fn update(&mut self, ranked: &[Vec<f64>]) -> Result<()> {
        let p = &self.params;
        let n = p.dim;
        if ranked.len() != p.mu {
            return Err(Error::InvalidInput(format!("expected {} ranked candidates, got {}", p.mu, ranked.len())));
        }
        if let Some(bad) = ranked.iter().find(|x| x.len() != n) {
            return Err(Error::InvalidInput(format!("candidate has {} components, expected {n}", bad.len())));
        }
        let old = self.mean.clone();
        let ys: Vec<DVector<f64>> =
            ranked.iter().map(|x| (DVector::from_column_slice(x) - &old) / self.sigma).collect();
        let y_w = ys.iter().zip(&p.weights).fold(DVector::zeros(n), |acc, (y, &w)| acc + y * w);
        self.mean = &old + &y_w * self.sigma;

        // C^{-1/2} y_w through the current eigenbasis.
        let inv_scales = self.scales.map(|d| 1.0 / d);
        let c_inv_sqrt_y = &self.basis * inv_scales.component_mul(&(self.basis.transpose() * &y_w));
        self.p_sigma = &self.p_sigma * (1.0 - p.cs) + c_inv_sqrt_y * (p.cs * (2.0 - p.cs) * p.mueff).sqrt();

        let ps_norm = self.p_sigma.norm();
        let decay = 1.0 - (1.0 - p.cs).powf(2.0 * (self.generation + 1) as f64);
        let hsig = ps_norm / decay.sqrt() / p.chi_n < 1.4 + 2.0 / (n as f64 + 1.0);
        let hsig_f = if hsig { 1.0 } else { 0.0 };
        self.p_c = &self.p_c * (1.0 - p.cc) + &y_w * (hsig_f * (p.cc * (2.0 - p.cc) * p.mueff).sqrt());

        let rank_one = &self.p_c * self.p_c.transpose();
        let rank_mu = ys.iter().zip(&p.weights).fold(DMatrix::zeros(n, n), |acc, (y, &w)| acc + y * y.transpose() * w);
        let correction = (1.0 - hsig_f) * p.cc * (2.0 - p.cc);
        self.cov = &self.cov * (1.0 - p.c1 - p.cmu) + (rank_one + &self.cov * correction) * p.c1 + rank_mu * p.cmu;

        let sigma = self.sigma * ((p.cs / p.damps) * (ps_norm / p.chi_n - 1.0)).exp();
        if sigma.is_finite() && sigma > 0.0 {
            self.sigma = sigma.min(1e100);
        }
        self.generation += 1;
        self.refresh_eigen();
        Ok(())
    }

    /// Re-symmetrizes C, floors its eigenvalues and caches `B` and `D`.
    fn refresh_eigen(&mut self) {
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let values = eig.eigenvalues.map(|v| if v.is_finite() { v.max(EIGEN_FLOOR) } else { EIGEN_FLOOR });
        let basis = eig.eigenvectors;
        self.cov = &basis * DMatrix::from_diagonal(&values) * basis.transpose();
        self.cov = (&self.cov + self.cov.transpose()) * 0.5;
        self.scales = values.map(f64::sqrt);
        self.basis = basis;
    }
}

/// Indices of `scores` ordered best (largest) first; ties keep index order,
/// NaN ranks last.
pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let key = |i: usize| if scores[i].is_nan() { f64::NEG_INFINITY } else { scores[i] };
    idx.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    idx
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
}

/// Minimizes `f` without bounds until `f < target` or the evaluation budget
/// runs out, using the default population for the dimension.
pub fn minimize<F>(f: F, x0: &[f64], sigma0: f64, seed: u64, max_evals: usize, target: f64) -> Result<Minimum>
where
    F: Fn(&[f64]) -> f64,
{
    let params = CmaParams::default_for(x0.len())?;
    let mut es = CmaEs::new(params, x0, sigma0, seed, None)?;
    let mut best = Minimum { x: x0.to_vec(), f: f64::INFINITY, evaluations: 0 };
    while best.evaluations < max_evals {
        let xs = es.sample();
        let neg: Vec<f64> = xs.iter().map(|x| -f(x)).collect();
        best.evaluations += xs.len();
        let order = rank_descending(&neg);
        if -neg[order[0]] < best.f {
            best.f = -neg[order[0]];
            best.x = xs[order[0]].clone();
        }
        if best.f < target {
            break;
        }
        let top: Vec<Vec<f64>> = order[..es.params.mu].iter().map(|&i| xs[i].clone()).collect();
        es.update(&top)?;
    }
    Ok(best)
}
