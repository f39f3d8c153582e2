//! Generalized Wigner ensembles: sampling with a prescribed variance
//! profile and entry law, and the analytic fourth-cumulant sum `k₄`.

use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::HermitianMatrix;
use crate::profile::VarianceProfile;
use crate::rng::{self, KeyedStream};

/// Centered, unit-variance base law of the entries before scaling by `√s_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EntryDist {
    Gaussian,
    Rademacher,
    /// Takes `√((1−p)/p)` with probability `p` and `−√(p/(1−p))` otherwise.
    ShiftedBernoulli { p: f64 },
    /// Uniform on `[−√3, √3]`.
    Uniform,
}

impl EntryDist {
    pub fn check(&self) -> Result<()> {
        if let EntryDist::ShiftedBernoulli { p } = *self {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "shifted Bernoulli needs p in (0, 1), got {p}"
                )));
            }
        }
        Ok(())
    }

    /// Fourth cumulant of the standardized law.
    pub fn kappa4(&self) -> f64 {
        match *self {
            EntryDist::Gaussian => 0.0,
            EntryDist::Rademacher => -2.0,
            EntryDist::Uniform => -1.2,
            EntryDist::ShiftedBernoulli { p } => {
                let q = p * (1.0 - p);
                (1.0 - 6.0 * q) / q
            }
        }
    }

    /// One standardized draw from two 64-bit words.
    ///
    /// Gaussian and Rademacher draws use the same Box–Muller angle, so the
    /// Rademacher value is the sign of the Gaussian one for equal words.
    pub fn draw(&self, w0: u64, w1: u64) -> f64 {
        match *self {
            EntryDist::Gaussian => rng::box_muller(w0, w1),
            EntryDist::Rademacher => {
                if (std::f64::consts::TAU * rng::unit_f64(w1)).cos() >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            EntryDist::Uniform => 3f64.sqrt() * (2.0 * rng::unit_f64(w0) - 1.0),
            EntryDist::ShiftedBernoulli { p } => {
                if rng::unit_f64(w0) < p {
                    ((1.0 - p) / p).sqrt()
                } else {
                    -(p / (1.0 - p)).sqrt()
                }
            }
        }
    }
}

/// Full description of an ensemble.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub beta: u8,
    pub dist: EntryDist,
    pub diag_dist: EntryDist,
    pub profile: Arc<VarianceProfile>,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn new(beta: u8, dist: EntryDist, profile: Arc<VarianceProfile>, seed: u64) -> Result<Self> {
        let spec = Self {
            beta,
            dist,
            diag_dist: dist,
            profile,
            seed,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn with_diag_dist(mut self, diag_dist: EntryDist) -> Result<Self> {
        self.diag_dist = diag_dist;
        self.check()?;
        Ok(self)
    }

    pub fn check(&self) -> Result<()> {
        if self.beta != 1 && self.beta != 2 {
            return Err(Error::InvalidArgument(format!("beta must be 1 or 2, got {}", self.beta)));
        }
        self.dist.check()?;
        self.diag_dist.check()
    }

    pub fn n(&self) -> usize {
        self.profile.n()
    }

    /// Sample number `index`. Entries are generated in upper-triangular
    /// row-major order, so entry `(i, j)` with `i ≤ j` owns keystream slot
    /// `i·n − i(i−1)/2 + (j − i)` of stream `index`.
    pub fn sample(&self, index: u64) -> Result<HermitianMatrix> {
        self.check()?;
        let n = self.n();
        let s = self.profile.matrix();
        let mut stream = KeyedStream::new(self.seed, index, 0);
        match self.beta {
            1 => {
                let mut h = Mat::<f64>::zeros(n, n);
                for i in 0..n {
                    for j in i..n {
                        let w = stream.next_entry();
                        if i == j {
                            h[(i, i)] = s[(i, i)].sqrt() * self.diag_dist.draw(w[0], w[1]);
                        } else {
                            let v = s[(i, j)].sqrt() * self.dist.draw(w[0], w[1]);
                            h[(i, j)] = v;
                            h[(j, i)] = v;
                        }
                    }
                }
                Ok(HermitianMatrix::Real(h))
            }
            _ => {
                let mut h = Mat::<Complex64>::zeros(n, n);
                for i in 0..n {
                    for j in i..n {
                        let w = stream.next_entry();
                        if i == j {
                            let v = s[(i, i)].sqrt() * self.diag_dist.draw(w[0], w[1]);
                            h[(i, i)] = Complex64::new(v, 0.0);
                        } else {
                            let scale = (0.5 * s[(i, j)]).sqrt();
                            let v = Complex64::new(
                                scale * self.dist.draw(w[0], w[1]),
                                scale * self.dist.draw(w[2], w[3]),
                            );
                            h[(i, j)] = v;
                            h[(j, i)] = v.conj();
                        }
                    }
                }
                Ok(HermitianMatrix::Complex(h))
            }
        }
    }

    /// `k₄ = Σ_{i,j} c⁽⁴⁾(H_ij)`, summed over real and imaginary parts.
    pub fn fourth_cumulant_sum(&self) -> f64 {
        let (off, diag) = self.profile.squared_sums();
        let k_off = self.dist.kappa4();
        let k_diag = self.diag_dist.kappa4();
        match self.beta {
            // Real and imaginary parts each carry variance s/2, so each
            // contributes κ₄ s²/4.
            2 => 0.5 * k_off * off + k_diag * diag,
            _ => k_off * off + k_diag * diag,
        }
    }
}
