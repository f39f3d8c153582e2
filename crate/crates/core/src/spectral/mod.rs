//! Dense Hermitian spectral computations: eigenvalues, resolvents and
//! linear eigenvalue statistics.

pub mod helffer_sjostrand;
pub mod test_function;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::HermitianMatrix;
use crate::quadrature;
use crate::semicircle;

pub use helffer_sjostrand::{trace_f_hs, HsOptions, HsResult};
pub use test_function::{Shape, ShapeSpec, TestFunction, TestFunctionSpec};

/// Eigenvalues of one sampled matrix, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSample {
    pub eigenvalues: Vec<f64>,
    pub n: usize,
    pub sample_index: u64,
}

/// Linear statistic of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub raw: f64,
    pub centered: f64,
    pub sc_expectation: f64,
}

fn check_hermitian(h: &HermitianMatrix) -> Result<()> {
    let defect = h.hermitian_defect();
    if defect > 1e-12 * h.sup_norm().max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "matrix is not Hermitian: defect {defect:e}"
        )));
    }
    Ok(())
}

/// All eigenvalues in ascending order.
pub fn eigenvalues(h: &HermitianMatrix) -> Result<Vec<f64>> {
    check_hermitian(h)?;
    let res = match h {
        HermitianMatrix::Real(m) => m.self_adjoint_eigenvalues(Side::Lower),
        HermitianMatrix::Complex(m) => m.self_adjoint_eigenvalues(Side::Lower),
    };
    let mut ev = res.map_err(|e| Error::Numeric(format!("eigensolver failed: {e:?}")))?;
    if ev.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("eigensolver returned non-finite values".into()));
    }
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

#[derive(Debug, Clone)]
enum Vectors {
    Real(Mat<f64>),
    Complex(Mat<Complex64>),
}

/// Eigenvalues together with eigenvectors, used when many resolvents of the
/// same matrix are needed.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    vectors: Vectors,
}

impl Eigensystem {
    pub fn new(h: &HermitianMatrix) -> Result<Self> {
        check_hermitian(h)?;
        let fail = |e| Error::Numeric(format!("eigensolver failed: {e:?}"));
        let (values, vectors) = match h {
            HermitianMatrix::Real(m) => {
                let evd = m.self_adjoint_eigen(Side::Lower).map_err(fail)?;
                let v = evd.S().column_vector().iter().copied().collect();
                (v, Vectors::Real(evd.U().to_owned()))
            }
            HermitianMatrix::Complex(m) => {
                let evd = m.self_adjoint_eigen(Side::Lower).map_err(fail)?;
                let v = evd.S().column_vector().iter().map(|c| c.re).collect();
                (v, Vectors::Complex(evd.U().to_owned()))
            }
        };
        Ok(Self { values, vectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `G(z) = U diag(1/(λ − z)) U*`.
    pub fn resolvent(&self, z: Complex64) -> Result<Mat<Complex64>> {
        if z.im == 0.0 {
            return Err(Error::RealAxis(z));
        }
        let n = self.dim();
        let d: Vec<Complex64> = self.values.iter().map(|&l| 1.0 / (l - z)).collect();
        Ok(match &self.vectors {
            Vectors::Real(u) => {
                // Two real products instead of one complex product.
                let ur = Mat::from_fn(n, n, |i, k| u[(i, k)] * d[k].re);
                let ui = Mat::from_fn(n, n, |i, k| u[(i, k)] * d[k].im);
                let re = &ur * u.transpose();
                let im = &ui * u.transpose();
                Mat::from_fn(n, n, |i, j| Complex64::new(re[(i, j)], im[(i, j)]))
            }
            Vectors::Complex(u) => {
                let ud = Mat::from_fn(n, n, |i, k| u[(i, k)] * d[k]);
                &ud * u.adjoint()
            }
        })
    }

    /// Diagonal of `G(z)` in `O(n²)`.
    pub fn resolvent_diagonal(&self, z: Complex64) -> Result<Vec<Complex64>> {
        let d = self.weights(z)?;
        let n = self.dim();
        Ok((0..n)
            .map(|i| match &self.vectors {
                Vectors::Real(u) => (0..n).map(|k| u[(i, k)] * u[(i, k)] * d[k]).sum(),
                Vectors::Complex(u) => (0..n).map(|k| u[(i, k)].norm_sqr() * d[k]).sum(),
            })
            .collect())
    }

    /// `G(z) w` in `O(n²)`.
    pub fn resolvent_apply(&self, z: Complex64, w: &[f64]) -> Result<Vec<Complex64>> {
        let d = self.weights(z)?;
        let n = self.dim();
        Ok(match &self.vectors {
            Vectors::Real(u) => {
                let coef: Vec<Complex64> = (0..n)
                    .map(|k| d[k] * (0..n).map(|j| u[(j, k)] * w[j]).sum::<f64>())
                    .collect();
                (0..n).map(|i| (0..n).map(|k| u[(i, k)] * coef[k]).sum()).collect()
            }
            Vectors::Complex(u) => {
                let coef: Vec<Complex64> = (0..n)
                    .map(|k| d[k] * (0..n).map(|j| u[(j, k)].conj() * w[j]).sum::<Complex64>())
                    .collect();
                (0..n).map(|i| (0..n).map(|k| u[(i, k)] * coef[k]).sum()).collect()
            }
        })
    }

    /// `max_ij |G_ij(z) − δ_ij·shift|`. For real eigenvectors `G` is
    /// symmetric and only the lower triangle is formed, one block row of
    /// at most `PANEL` rows at a time.
    pub fn resolvent_entry_sup(&self, z: Complex64, shift: Complex64) -> Result<f64> {
        const PANEL: usize = 128;
        let u = match &self.vectors {
            Vectors::Real(u) => u,
            Vectors::Complex(_) => {
                let g = self.resolvent(z)?;
                let mut sup = 0.0f64;
                for j in 0..g.ncols() {
                    for i in 0..g.nrows() {
                        let v = if i == j { g[(i, j)] - shift } else { g[(i, j)] };
                        sup = sup.max(v.norm());
                    }
                }
                return Ok(sup);
            }
        };
        let d = self.weights(z)?;
        let n = self.dim();
        let mut sup = 0.0f64;
        let mut r0 = 0;
        while r0 < n {
            let b = PANEL.min(n - r0);
            let r1 = r0 + b;
            // Real and imaginary weights stacked so one product covers both.
            let a = Mat::from_fn(2 * b, n, |i, k| {
                let w = if i < b { d[k].re } else { d[k].im };
                u[(r0 + i % b, k)] * w
            });
            let c = &a * u.subrows(0, r1).transpose();
            for i in 0..b {
                for j in 0..=(r0 + i) {
                    let mut v = Complex64::new(c[(i, j)], c[(b + i, j)]);
                    if j == r0 + i {
                        v -= shift;
                    }
                    sup = sup.max(v.norm());
                }
            }
            r0 = r1;
        }
        Ok(sup)
    }

    fn weights(&self, z: Complex64) -> Result<Vec<Complex64>> {
        if z.im == 0.0 {
            return Err(Error::RealAxis(z));
        }
        Ok(self.values.iter().map(|&l| 1.0 / (l - z)).collect())
    }

    /// `n⁻¹ Tr G(z)` from the eigenvalues.
    pub fn stieltjes(&self, z: Complex64) -> Complex64 {
        self.values.iter().map(|&l| 1.0 / (l - z)).sum::<Complex64>() / self.dim() as f64
    }
}

/// `G = (H − z)⁻¹` by an LU solve.
pub fn resolvent(h: &HermitianMatrix, z: Complex64) -> Result<Mat<Complex64>> {
    if z.im == 0.0 {
        return Err(Error::RealAxis(z));
    }
    let n = h.dim();
    let mut a = h.to_complex();
    for i in 0..n {
        a[(i, i)] -= z;
    }
    let g = a.partial_piv_lu().solve(Mat::<Complex64>::identity(n, n));
    if g.col_iter().any(|c| c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite())) {
        return Err(Error::Numeric("resolvent solve produced non-finite entries".into()));
    }
    Ok(g)
}

/// `n ∫ g((x − E₀)/η₀) ρ_sc(x) dx`, integrated in the angle variable
/// `x = 2cos θ`, which removes the square-root endpoints of the density.
pub fn sc_expectation(tf: &TestFunction, n: usize) -> Result<f64> {
    let (a, b) = tf.support_f();
    let (lo, hi) = (a.max(-2.0), b.min(2.0));
    if lo >= hi {
        return Ok(0.0);
    }
    let nf = n as f64;
    let theta_of = |x: f64| (0.5 * x).clamp(-1.0, 1.0).acos();
    // acos is decreasing, so breakpoints map in reverse order.
    let mut cuts: Vec<f64> = tf
        .breakpoints_f()
        .into_iter()
        .filter(|&x| x > lo && x < hi)
        .chain([lo, hi])
        .map(theta_of)
        .collect();
    cuts.sort_by(f64::total_cmp);
    let integrand = |t: f64| {
        let s = t.sin();
        tf.f(2.0 * t.cos()) * s * s
    };
    let mut total = 0.0;
    let pieces = (cuts.len() - 1) as f64;
    for w in cuts.windows(2) {
        total += quadrature::adaptive(integrand, w[0], w[1], 1e-10 / pieces)?;
    }
    Ok(nf * total * 2.0 / std::f64::consts::PI)
}

/// `Σ g((λ_i − E₀)/η₀)` and its centering by `n ∫ f ρ_sc`.
pub fn centered_statistic(eigenvalues: &[f64], tf: &TestFunction) -> Result<Statistic> {
    let raw = quadrature::compensated_sum(eigenvalues.iter().map(|&l| tf.f(l)));
    let sc = sc_expectation(tf, eigenvalues.len())?;
    Ok(Statistic {
        raw,
        centered: raw - sc,
        sc_expectation: sc,
    })
}

/// `m_N(z) − m_sc(z)` helper used by diagnostics.
pub fn stieltjes_error(es: &Eigensystem, z: Complex64) -> Result<Complex64> {
    Ok(es.stieltjes(z) - semicircle::m_sc(z)?)
}
