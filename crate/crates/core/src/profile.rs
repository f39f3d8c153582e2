//! Variance profiles: symmetric doubly stochastic matrices `S` with
//! flatness constants, their spectra, and the trace functionals of `S`
//! that enter the variance and bias formulas.

use std::path::PathBuf;
use std::sync::OnceLock;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semicircle;

/// Row-sum tolerance used by [`VarianceProfile::validate`].
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Threshold on `|1 − m₁m₂|` below which the resolvent of `S` is treated
/// as singular.
pub const SINGULAR_TOL: f64 = 1e-14;
const SINKHORN_MAX_ITER: usize = 20_000;

/// Symmetric kernel on `[0,1]²` used to generate non-flat profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    Constant,
    /// `1 + amplitude·cos(π(x − y))`.
    Cosine { amplitude: f64 },
    /// `inner` when `x, y` fall in the same half of `[0,1]`, else `outer`.
    Block { inner: f64, outer: f64 },
    /// `1 + amplitude·exp(−(x − y)²/(2 width²))`.
    Band { amplitude: f64, width: f64 },
}

impl KernelSpec {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            KernelSpec::Constant => 1.0,
            KernelSpec::Cosine { amplitude } => 1.0 + amplitude * (std::f64::consts::PI * (x - y)).cos(),
            KernelSpec::Block { inner, outer } => {
                if (x <= 0.5) == (y <= 0.5) {
                    inner
                } else {
                    outer
                }
            }
            KernelSpec::Band { amplitude, width } => {
                1.0 + amplitude * (-(x - y).powi(2) / (2.0 * width * width)).exp()
            }
        }
    }
}

/// How a run obtains its profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileSpec {
    Flat,
    Kernel {
        kernel: KernelSpec,
        #[serde(default = "default_sinkhorn_tol")]
        sinkhorn_tol: f64,
    },
    /// Plain-text matrix file; its dimension must match the run's `n`.
    File { path: PathBuf },
}

fn default_sinkhorn_tol() -> f64 {
    1e-13
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::Flat
    }
}

impl ProfileSpec {
    pub fn build(&self, n: usize) -> Result<VarianceProfile> {
        match self {
            ProfileSpec::Flat => VarianceProfile::flat(n),
            ProfileSpec::Kernel { kernel, sinkhorn_tol } => {
                VarianceProfile::from_kernel(n, |x, y| kernel.eval(x, y), *sinkhorn_tol)
            }
            ProfileSpec::File { path } => {
                let file = std::fs::File::open(path)?;
                let s = crate::matrix::read_real_text(std::io::BufReader::new(file))?;
                if s.nrows() != n {
                    return Err(Error::InvalidArgument(format!(
                        "profile file has dimension {}, run needs {n}",
                        s.nrows()
                    )));
                }
                VarianceProfile::from_matrix(s)
            }
        }
    }
}

/// Eigenvalues of `S` grouped by value, used inside contour quadrature
/// where trace functionals are needed at millions of nodes.
#[derive(Debug, Clone)]
pub struct ProfileSpectrum {
    /// Eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    /// `(value, multiplicity)` pairs; multiplicities are exact counts.
    pub clusters: Vec<(f64, f64)>,
    /// `δ₊ = 1 − λ₂`.
    pub gap_plus: f64,
    /// `δ₋ = 1 + λ_min`.
    pub gap_minus: f64,
}

impl ProfileSpectrum {
    fn from_sorted_desc(eigenvalues: Vec<f64>) -> Self {
        let mut clusters: Vec<(f64, f64)> = Vec::new();
        for &l in &eigenvalues {
            match clusters.last_mut() {
                Some((v, k)) if (*v - l).abs() <= 1e-13 => *k += 1.0,
                _ => clusters.push((l, 1.0)),
            }
        }
        let n = eigenvalues.len();
        let gap_plus = if n > 1 { 1.0 - eigenvalues[1] } else { 1.0 };
        let gap_minus = if n > 1 { 1.0 + eigenvalues[n - 1] } else { 1.0 };
        Self {
            eigenvalues,
            clusters,
            gap_plus,
            gap_minus,
        }
    }

    /// `Tr(S(1 − xS)⁻²)`.
    pub fn trace_variance(&self, x: Complex64) -> Complex64 {
        self.clusters
            .iter()
            .map(|&(l, k)| {
                let d = 1.0 - x * l;
                k * l / (d * d)
            })
            .sum()
    }

    /// `Tr(S²(1 − xS)⁻¹)`.
    pub fn trace_bias(&self, x: Complex64) -> Complex64 {
        self.clusters
            .iter()
            .map(|&(l, k)| k * l * l / (1.0 - x * l))
            .sum()
    }
}

#[derive(Debug)]
struct Eigensystem {
    values: Vec<f64>,
    vectors: Mat<f64>,
}

/// Symmetric doubly stochastic variance profile.
#[derive(Debug)]
pub struct VarianceProfile {
    s: Mat<f64>,
    c_inf: f64,
    c_sup: f64,
    flat: bool,
    spectrum: OnceLock<ProfileSpectrum>,
    eigen: OnceLock<Eigensystem>,
}

impl Clone for VarianceProfile {
    fn clone(&self) -> Self {
        // Caches are cheap to rebuild relative to the cost of copying
        // eigenvectors around.
        let out = Self::assemble(self.s.clone());
        if let Some(sp) = self.spectrum.get() {
            let _ = out.spectrum.set(sp.clone());
        }
        out
    }
}

/// Outcome of [`VarianceProfile::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub n: usize,
    pub max_row_deviation: f64,
    pub asymmetry: f64,
    pub min_entry: f64,
    pub c_inf: f64,
    pub c_sup: f64,
    pub rows_ok: bool,
    pub symmetric_ok: bool,
    pub flatness_ok: bool,
    pub pass: bool,
}

/// Observed constants of the stability lemma at one pair `(z, z′)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub gap_plus: f64,
    pub gap_minus: f64,
    /// `‖(1 − m₁m₂S)⁻¹‖_∞ · |1 − m₁m₂|`.
    pub norm_ratio: f64,
    /// `‖(1 − Π)(1 − m₁m₂S)⁻¹‖_∞`.
    pub projected_norm: f64,
    /// `ρ = ‖(1 − m²S)⁻¹‖_∞` at `z`.
    pub rho: f64,
    pub rho_ok: bool,
}

/// Trace functionals of `S` evaluated by [`VarianceProfile::kernel_trace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    /// `Tr(m′₁m′₂ S(1 − m₁m₂S)⁻²)`.
    Variance,
    /// `Tr(m′m³ S²(1 − m²S)⁻¹)`; the second argument is ignored.
    Bias,
    /// `Tr(m₁²m₂² S²(1 − m₁m₂S)⁻¹)`.
    TTrace,
}

impl VarianceProfile {
    fn assemble(s: Mat<f64>) -> Self {
        let n = s.nrows();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let first = s[(0, 0)];
        let mut flat = true;
        for j in 0..n {
            for i in 0..n {
                let v = s[(i, j)];
                lo = lo.min(v);
                hi = hi.max(v);
                flat &= v == first;
            }
        }
        // Equal entries only give the rank-one structure when rows sum to 1.
        flat &= (first * n as f64 - 1.0).abs() <= 1e-15;
        Self {
            s,
            c_inf: lo * n as f64,
            c_sup: hi * n as f64,
            flat,
            spectrum: OnceLock::new(),
            eigen: OnceLock::new(),
        }
    }

    /// Standard Wigner profile `s_ij = 1/n`.
    pub fn flat(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        Ok(Self::assemble(Mat::from_fn(n, n, |_, _| 1.0 / n as f64)))
    }

    /// Wrap an explicit matrix. No validation is performed here so that
    /// invalid profiles can still be inspected by [`Self::validate`].
    pub fn from_matrix(s: Mat<f64>) -> Result<Self> {
        if s.nrows() == 0 || s.nrows() != s.ncols() {
            return Err(Error::InvalidArgument(format!(
                "profile must be a nonempty square matrix, got {}x{}",
                s.nrows(),
                s.ncols()
            )));
        }
        if s.col_iter().any(|c| c.iter().any(|v| !v.is_finite() || *v < 0.0)) {
            return Err(Error::Construction("profile entries must be finite and nonnegative".into()));
        }
        Ok(Self::assemble(s))
    }

    /// `s_ij ∝ kernel(i/n, j/n)/n`, made doubly stochastic by symmetric
    /// Sinkhorn scaling `S = D K D`.
    pub fn from_kernel(
        n: usize,
        kernel: impl Fn(f64, f64) -> f64,
        sinkhorn_tol: f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if !(sinkhorn_tol > 0.0 && sinkhorn_tol < 1e-3) {
            return Err(Error::InvalidArgument(format!(
                "sinkhorn tolerance must lie in (0, 1e-3), got {sinkhorn_tol}"
            )));
        }
        let grid = |i: usize| (i + 1) as f64 / n as f64;
        let mut k = Mat::<f64>::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                let v = kernel(grid(i), grid(j));
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Construction(format!(
                        "kernel value {v} at grid point ({}, {}) is not positive and finite",
                        grid(i),
                        grid(j)
                    )));
                }
                k[(i, j)] = v / n as f64;
            }
        }
        // Symmetrize against a kernel that is only symmetric up to rounding.
        for j in 0..n {
            for i in 0..j {
                let v = 0.5 * (k[(i, j)] + k[(j, i)]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }

        let mut d = vec![1.0; n];
        let mut kd = vec![0.0; n];
        let mut converged = false;
        for _ in 0..SINKHORN_MAX_ITER {
            mat_vec(&k, &d, &mut kd);
            let err = d
                .iter()
                .zip(&kd)
                .map(|(a, b)| (a * b - 1.0).abs())
                .fold(0.0, f64::max);
            if err < sinkhorn_tol {
                converged = true;
                break;
            }
            for (di, kdi) in d.iter_mut().zip(&kd) {
                *di = (*di / kdi).sqrt();
            }
        }
        if !converged {
            return Err(Error::Convergence(format!(
                "Sinkhorn scaling did not reach tolerance {sinkhorn_tol:e} in {SINKHORN_MAX_ITER} iterations"
            )));
        }
        // `d_i·d_j` commutes exactly, so the result stays bitwise symmetric.
        let mut s = Mat::from_fn(n, n, |i, j| k[(i, j)] * (d[i] * d[j]));
        // The leftover row-sum error is pushed onto the diagonal, which keeps
        // symmetry and makes every row sum exact up to rounding.
        for i in 0..n {
            let row: f64 = (0..n).map(|j| s[(i, j)]).sum();
            s[(i, i)] -= row - 1.0;
            if s[(i, i)] < 0.0 {
                return Err(Error::Construction(format!(
                    "diagonal correction made s[{i},{i}] negative"
                )));
            }
        }
        Ok(Self::assemble(s))
    }

    pub fn n(&self) -> usize {
        self.s.nrows()
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.s
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.s[(i, j)]
    }

    /// Observed `min_ij N s_ij`.
    pub fn c_inf(&self) -> f64 {
        self.c_inf
    }

    /// Observed `max_ij N s_ij`.
    pub fn c_sup(&self) -> f64 {
        self.c_sup
    }

    /// True when every entry equals `1/n` exactly.
    pub fn is_flat(&self) -> bool {
        self.flat
    }

    pub fn trace(&self) -> f64 {
        (0..self.n()).map(|i| self.s[(i, i)]).sum()
    }

    /// `(Σ_{i≠j} s_ij², Σ_i s_ii²)`.
    pub fn squared_sums(&self) -> (f64, f64) {
        let n = self.n();
        let (mut off, mut diag) = (0.0, 0.0);
        for j in 0..n {
            for i in 0..n {
                let v = self.s[(i, j)] * self.s[(i, j)];
                if i == j {
                    diag += v;
                } else {
                    off += v;
                }
            }
        }
        (off, diag)
    }

    pub fn validate(&self) -> ProfileReport {
        let n = self.n();
        let mut dev = 0.0f64;
        let mut asym = 0.0f64;
        for i in 0..n {
            let row: f64 = (0..n).map(|j| self.s[(i, j)]).sum();
            dev = dev.max((row - 1.0).abs());
            for j in 0..i {
                asym = asym.max((self.s[(i, j)] - self.s[(j, i)]).abs());
            }
        }
        let rows_ok = dev <= ROW_SUM_TOL;
        let symmetric_ok = asym <= 1e-15;
        let flatness_ok = self.c_inf > 0.0;
        ProfileReport {
            n,
            max_row_deviation: dev,
            asymmetry: asym,
            min_entry: self.c_inf / n as f64,
            c_inf: self.c_inf,
            c_sup: self.c_sup,
            rows_ok,
            symmetric_ok,
            flatness_ok,
            pass: rows_ok && symmetric_ok && flatness_ok,
        }
    }

    fn eigensystem(&self) -> Result<&Eigensystem> {
        if let Some(e) = self.eigen.get() {
            return Ok(e);
        }
        let evd = self
            .s
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numeric(format!("profile eigendecomposition failed: {e:?}")))?;
        let values: Vec<f64> = evd.S().column_vector().iter().copied().collect();
        let vectors = evd.U().to_owned();
        Ok(self.eigen.get_or_init(|| Eigensystem { values, vectors }))
    }

    /// Spectrum of `S` computed by the dense eigensolver, bypassing the
    /// closed form used for flat profiles.
    pub fn computed_spectrum(&self) -> Result<ProfileSpectrum> {
        let mut ev = self.eigensystem()?.values.clone();
        ev.reverse();
        Ok(ProfileSpectrum::from_sorted_desc(ev))
    }

    /// Eigenvalues (descending) and gaps `δ±`, cached after first use.
    pub fn spectral_data(&self) -> Result<&ProfileSpectrum> {
        if let Some(sp) = self.spectrum.get() {
            return Ok(sp);
        }
        let sp = if self.flat {
            let mut ev = vec![0.0; self.n()];
            ev[0] = 1.0;
            ProfileSpectrum::from_sorted_desc(ev)
        } else {
            self.computed_spectrum()?
        };
        Ok(self.spectrum.get_or_init(|| sp))
    }

    fn one_minus_x_s(&self, x: Complex64) -> Result<Mat<Complex64>> {
        let gap = (1.0 - x).norm();
        if gap < SINGULAR_TOL {
            return Err(Error::NearSingular(gap));
        }
        let n = self.n();
        Ok(Mat::from_fn(n, n, |i, j| {
            let d = if i == j { 1.0 } else { 0.0 };
            Complex64::new(d, 0.0) - x * self.s[(i, j)]
        }))
    }

    fn s_squared(&self) -> Mat<f64> {
        &self.s * &self.s
    }

    fn s_complex(s: &Mat<f64>) -> Mat<Complex64> {
        Mat::from_fn(s.nrows(), s.ncols(), |i, j| Complex64::new(s[(i, j)], 0.0))
    }

    /// Exact trace of the requested matrix function via LU solves against
    /// `(1 − xS)`.
    pub fn kernel_trace(&self, z: Complex64, zp: Complex64, kind: TraceKind) -> Result<Complex64> {
        let a = semicircle::evaluate(z)?;
        let b = semicircle::evaluate(zp)?;
        let trace = |m: &Mat<Complex64>| -> Complex64 { (0..m.nrows()).map(|i| m[(i, i)]).sum() };
        match kind {
            TraceKind::Variance => {
                let x = a.m * b.m;
                let lu = self.one_minus_x_s(x)?.partial_piv_lu();
                let once = lu.solve(Self::s_complex(&self.s));
                let twice = lu.solve(&once);
                Ok(a.dm * b.dm * trace(&twice))
            }
            TraceKind::Bias => {
                let x = a.m * a.m;
                let lu = self.one_minus_x_s(x)?.partial_piv_lu();
                let sol = lu.solve(Self::s_complex(&self.s_squared()));
                Ok(a.dm * a.m * a.m * a.m * trace(&sol))
            }
            TraceKind::TTrace => Ok(trace(&self.t_theory_matrix(z, zp)?)),
        }
    }

    /// `m₁²m₂² S²(1 − m₁m₂S)⁻¹`, the deterministic limit of the two-point
    /// function.
    pub fn t_theory_matrix(&self, z: Complex64, zp: Complex64) -> Result<Mat<Complex64>> {
        let m1 = semicircle::m_sc(z)?;
        let m2 = semicircle::m_sc(zp)?;
        let x = m1 * m2;
        let lu = self.one_minus_x_s(x)?.partial_piv_lu();
        let mut sol = lu.solve(Self::s_complex(&self.s_squared()));
        let c = x * x;
        for j in 0..sol.ncols() {
            for i in 0..sol.nrows() {
                sol[(i, j)] *= c;
            }
        }
        Ok(sol)
    }

    /// `(‖(1 − xS)⁻¹‖_∞, ‖(1 − Π)(1 − xS)⁻¹‖_∞)`, through the closed form
    /// for flat profiles and the eigendecomposition of `S` otherwise.
    pub fn resolvent_norms(&self, x: Complex64) -> Result<(f64, f64)> {
        let gap = (1.0 - x).norm();
        if gap < SINGULAR_TOL {
            return Err(Error::NearSingular(gap));
        }
        let n = self.n();
        let nf = n as f64;
        if self.flat {
            // (1 − xΠ)⁻¹ = 1 + x/(1 − x) Π and (1 − Π)(1 − xΠ)⁻¹ = 1 − Π.
            let c = x / (1.0 - x);
            let full = (1.0 + c / nf).norm() + (nf - 1.0) * c.norm() / nf;
            let proj = (1.0 - 1.0 / nf) + (nf - 1.0) / nf;
            return Ok((full, proj));
        }
        self.resolvent_norms_eigen(x)
    }

    fn resolvent_norms_eigen(&self, x: Complex64) -> Result<(f64, f64)> {
        let n = self.n();
        let nf = n as f64;
        let eig = self.eigensystem()?;
        let u = &eig.vectors;
        let w: Vec<Complex64> = eig.values.iter().map(|&l| 1.0 / (1.0 - x * l)).collect();
        let ur = Mat::from_fn(n, n, |i, k| u[(i, k)] * w[k].re);
        let ui = Mat::from_fn(n, n, |i, k| u[(i, k)] * w[k].im);
        let re = &ur * u.transpose();
        let im = &ui * u.transpose();
        let pi_coef = 1.0 / ((1.0 - x) * nf);
        let (mut full, mut proj) = (0.0f64, 0.0f64);
        for i in 0..n {
            let (mut rf, mut rp) = (0.0, 0.0);
            for j in 0..n {
                let v = Complex64::new(re[(i, j)], im[(i, j)]);
                rf += v.norm();
                rp += (v - pi_coef).norm();
            }
            full = full.max(rf);
            proj = proj.max(rp);
        }
        Ok((full, proj))
    }

    pub fn stability_report(&self, z: Complex64, zp: Complex64) -> Result<StabilityReport> {
        let m1 = semicircle::m_sc(z)?;
        let m2 = semicircle::m_sc(zp)?;
        let x = m1 * m2;
        let (full, projected) = self.resolvent_norms(x)?;
        let (rho, _) = self.resolvent_norms(m1 * m1)?;
        let sp = self.spectral_data()?;
        Ok(StabilityReport {
            gap_plus: sp.gap_plus,
            gap_minus: sp.gap_minus,
            norm_ratio: full * (1.0 - x).norm(),
            projected_norm: projected,
            rho,
            rho_ok: rho >= 0.5,
        })
    }
}

fn mat_vec(a: &Mat<f64>, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (j, &xj) in x.iter().enumerate() {
        for (o, &aij) in out.iter_mut().zip(a.col(j).iter()) {
            *o += aij * xj;
        }
    }
}
