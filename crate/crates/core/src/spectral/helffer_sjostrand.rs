//! `Tr f(H)` through the Helffer–Sjöstrand formula
//! `Tr f(H) = (1/π) ∬ ∂̄f̃(z) Tr G(z) d²z`, as an independent check of the
//! eigenvalue route.
//!
//! `H` is reduced to a real symmetric tridiagonal matrix by Householder
//! reflections, after which `Tr G(z)` costs `O(n)` per point through the
//! pivots of the `LDLᵀ` factorization of `T − z`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::test_function::{smoothstep, TestFunction};
use crate::error::{Error, Result};
use crate::matrix::HermitianMatrix;
use crate::quadrature::{self, GaussLegendre};

/// Largest dimension accepted by [`trace_f_hs`].
pub const MAX_DIM: usize = 500;

/// Quadrature controls. The cutoff `χ` is fixed: 1 on `|y| ≤ 1`, a
/// quintic smoothstep down to 0 on `1 ≤ |y| ≤ 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsOptions {
    /// Strip `|y| < y_min` is dropped; the integrand is `O(y)` there.
    pub y_min: f64,
    /// Accepted relative difference between the full and half resolution.
    pub rel_tol: f64,
}

impl Default for HsOptions {
    fn default() -> Self {
        Self {
            y_min: 1e-4,
            rel_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsResult {
    pub value: f64,
    /// Difference against the half-resolution grid.
    pub error_estimate: f64,
}

/// `χ(y)` and `χ′(y)`.
pub(crate) fn chi(y: f64) -> (f64, f64) {
    let (s, ds, _) = smoothstep(y.abs() - 1.0);
    (1.0 - s, -ds * y.signum())
}

/// Diagonal and squared off-diagonal moduli of a tridiagonal matrix
/// unitarily similar to `h`.
pub fn tridiagonalize(h: &HermitianMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = h.dim();
    let mut a = h.to_complex();
    let mut diag = vec![0.0; n];
    let mut offsq = vec![0.0; n.saturating_sub(1)];
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    let mut p = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n.saturating_sub(1) {
        diag[k] = a[(k, k)].re;
        let lo = k + 1;
        let norm_sq: f64 = (lo..n).map(|i| a[(i, k)].norm_sqr()).sum();
        offsq[k] = norm_sq;
        if lo + 1 >= n || norm_sq == 0.0 {
            continue;
        }
        // Reflect the column below the diagonal onto a multiple of e₁.
        let x0 = a[(lo, k)];
        let norm = norm_sq.sqrt();
        let phase = if x0.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        for i in lo..n {
            v[i] = a[(i, k)];
        }
        v[lo] -= alpha;
        let vnorm = (lo..n).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for vi in v[lo..n].iter_mut() {
            *vi /= vnorm;
        }
        // Trailing update A ← A − 2(v w* + w v*), w = p − (v*p) v, p = A v.
        for i in lo..n {
            p[i] = (lo..n).map(|j| a[(i, j)] * v[j]).sum();
        }
        let kappa: Complex64 = (lo..n).map(|i| v[i].conj() * p[i]).sum();
        for i in lo..n {
            p[i] -= kappa * v[i];
        }
        for j in lo..n {
            let (vj, wj) = (v[j].conj(), p[j].conj());
            for i in lo..n {
                a[(i, j)] -= 2.0 * (v[i] * wj + p[i] * vj);
            }
        }
    }
    if n > 0 {
        diag[n - 1] = a[(n - 1, n - 1)].re;
    }
    (diag, offsq)
}

/// `Tr (T − z)⁻¹ = −Σ d′_k/d_k` from the pivot recurrence
/// `d_k = a_k − z − |b_{k−1}|²/d_{k−1}`.
pub fn tridiagonal_trace_resolvent(diag: &[f64], offsq: &[f64], z: Complex64) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    let mut d = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for (k, &ak) in diag.iter().enumerate() {
        if k == 0 {
            d = ak - z;
            dp = Complex64::new(-1.0, 0.0);
        } else {
            let b2 = offsq[k - 1];
            let inv = 1.0 / d;
            let nd = ak - z - b2 * inv;
            dp = -1.0 + b2 * dp * inv * inv;
            d = nd;
        }
        total -= dp / d;
    }
    total
}

/// One pass of the 2D quadrature with x-panels of width `refine·y`.
fn hs_pass(diag: &[f64], offsq: &[f64], tf: &TestFunction, opts: &HsOptions, refine: f64) -> f64 {
    let rule = GaussLegendre::new(8);
    let breaks = tf.breakpoints_f();
    let smooth_scale = tf.eta0 * {
        let (a, b) = tf.support_g();
        (b - a) / 16.0
    };
    // Geometric y-panels from y_min to 1, then the ramp of χ on [1, 2].
    let mut y_edges = vec![opts.y_min];
    while *y_edges.last().expect("nonempty") < 1.0 {
        let next = (y_edges.last().expect("nonempty") * 2.0).min(1.0);
        y_edges.push(next);
    }
    y_edges.extend([1.25, 1.5, 1.75, 2.0]);

    let mut terms = Vec::new();
    for w in y_edges.windows(2) {
        for (y, wy) in rule.mapped(w[0], w[1]) {
            let (ch, dch) = chi(y);
            let width = (refine * y).min(smooth_scale);
            let mut row = 0.0;
            for seg in breaks.windows(2) {
                let panels = ((seg[1] - seg[0]) / width).ceil().max(1.0) as usize;
                for (x, wx) in quadrature::composite(&rule, seg[0], seg[1], panels) {
                    let f = tf.f(x);
                    let f1 = tf.f1(x);
                    let f2 = tf.f2(x);
                    // ∂̄f̃ = (i/2)[y f″ χ + (f + i y f′) χ′].
                    let dbar = Complex64::new(0.0, 0.5)
                        * (Complex64::new(y * f2 * ch, 0.0) + Complex64::new(f, y * f1) * dch);
                    if dbar.norm() == 0.0 {
                        continue;
                    }
                    let tr = tridiagonal_trace_resolvent(diag, offsq, Complex64::new(x, y));
                    row += wx * (dbar * tr).re;
                }
            }
            terms.push(wy * row);
        }
    }
    // Conjugate symmetry folds the lower half-plane onto the upper one.
    2.0 / std::f64::consts::PI * quadrature::compensated_sum(terms)
}

/// `Tr f(H)` by 2D quadrature of the Helffer–Sjöstrand integrand.
pub fn trace_f_hs(h: &HermitianMatrix, tf: &TestFunction, opts: &HsOptions) -> Result<HsResult> {
    let n = h.dim();
    if n > MAX_DIM {
        return Err(Error::InvalidArgument(format!(
            "2D quadrature is limited to n <= {MAX_DIM}, got {n}"
        )));
    }
    if !(opts.y_min > 0.0 && opts.y_min < 1.0) {
        return Err(Error::InvalidArgument(format!("y_min must lie in (0, 1), got {}", opts.y_min)));
    }
    let (diag, offsq) = tridiagonalize(h);
    let fine = hs_pass(&diag, &offsq, tf, opts, 1.0);
    let coarse = hs_pass(&diag, &offsq, tf, opts, 2.0);
    let err = (fine - coarse).abs();
    if !fine.is_finite() || err > opts.rel_tol * fine.abs().max(1.0) {
        return Err(Error::Numeric(format!(
            "Helffer-Sjostrand quadrature not converged: value {fine}, half-resolution difference {err:e}"
        )));
    }
    Ok(HsResult {
        value: fine,
        error_estimate: err,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::spectral::eigenvalues;
    use crate::spectral::test_function::Bump;

    #[test]
    fn tridiagonal_trace_matches_eigenvalues() {
        let h = HermitianMatrix::Complex(faer::Mat::from_fn(6, 6, |i, j| {
            let (a, b) = (i.min(j) as f64, i.max(j) as f64);
            let im = if i < j { 0.3 * (a - b) } else if i > j { 0.3 * (b - a) } else { 0.0 };
            Complex64::new(((a + 1.0) * (b + 2.0)).sin(), im)
        }));
        let (d, o) = tridiagonalize(&h);
        let ev = eigenvalues(&h).unwrap();
        for z in [Complex64::new(0.3, 0.1), Complex64::new(-1.0, 2.0)] {
            let expect: Complex64 = ev.iter().map(|&l| 1.0 / (l - z)).sum();
            assert!((tridiagonal_trace_resolvent(&d, &o, z) - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn chi_profile() {
        assert_eq!(chi(0.5), (1.0, 0.0));
        assert_eq!(chi(2.5).0, 0.0);
        assert!((chi(1.5).0 - 0.5).abs() < 1e-15);
        assert!(chi(1.5).1 < 0.0 && chi(-1.5).1 > 0.0);
    }

    #[test]
    fn zero_and_single_point() {
        let tf = TestFunction::new(Arc::new(Bump), 0.5, 1.0).unwrap();
        // f(0) = g(−0.5) ≠ 0 here, so shift to make f(0) = 0.
        let off = TestFunction::new(Arc::new(Bump), 1.0, 1.0).unwrap();
        let r = trace_f_hs(&HermitianMatrix::zeros_real(3), &off, &HsOptions::default()).unwrap();
        assert!(r.value.abs() < 1e-6);
        let one = HermitianMatrix::from_diagonal(&[0.5]);
        let r = trace_f_hs(&one, &tf, &HsOptions::default()).unwrap();
        assert!((r.value - tf.f(0.5)).abs() < 1e-3 * tf.f(0.5));
    }

    #[test]
    fn dimension_guard() {
        let tf = TestFunction::new(Arc::new(Bump), 0.0, 1.0).unwrap();
        let big = HermitianMatrix::zeros_real(MAX_DIM + 1);
        assert!(matches!(
            trace_f_hs(&big, &tf, &HsOptions::default()),
            Err(Error::InvalidArgument(_))
        ));
    }
}
