//! Deterministic predictions: the contour-integral variance `V(f)` and
//! bias `B(f)`, and the universal mesoscopic limits in the bulk and at the
//! edges.
//!
//! # Contours and orientation
//!
//! `Γ_k` is the pair of horizontal lines `Im z = ±h_k`. The upper branch is
//! traversed in the `+x` direction and the lower branch in the `−x`
//! direction, which is the positive orientation of the boundary of the
//! region `|Im z| ≥ h_k` where `f̃` is integrated against `∂̄`. Since `f̃`
//! vanishes outside the support of `f`, each branch is integrated only over
//! that support.
//!
//! # Height dependence
//!
//! With the first-order almost-analytic extension the contour functional
//! is not exactly independent of the heights: it differs from its
//! zero-height limit by terms of order `h²`, `h³`, … . [`predict`] therefore
//! evaluates the functional on a sequence of contours starting at the
//! theorem's heights `η₀N^{−τ}/k` and halving, and extrapolates to zero
//! height with a Richardson table. The unextrapolated values at the
//! theorem's heights are reported alongside.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::profile::{ProfileSpectrum, VarianceProfile};
use crate::quadrature::{self, GaussLegendre};
use crate::semicircle;
use crate::spectral::TestFunction;

/// Nodes per Gauss–Legendre panel on each branch.
const PANEL_NODES: usize = 8;
/// Number of contour heights in the Richardson table.
const RICHARDSON_LEVELS: usize = 6;

/// Geometry and resolution of the contour pair `Γ₁, Γ₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub n: usize,
    pub tau: f64,
    pub eta0: f64,
    /// Exponent from `η₀√(κ₀+η₀) = N^{−1+c₀}`.
    pub c0: f64,
    pub h1: f64,
    pub h2: f64,
    /// Support of `f` padded by `η₀` on both sides.
    pub x_window: (f64, f64),
    /// Gauss–Legendre panels per unit of `h₂` along each branch.
    pub panels_per_height: f64,
}

/// `c₀ = 1 + ln(η₀√(κ₀+η₀))/ln N`.
pub fn c0_of(n: usize, eta0: f64, kappa0: f64) -> f64 {
    1.0 + (eta0 * (kappa0 + eta0).sqrt()).ln() / (n as f64).ln()
}

/// Default `τ = min(0.05, c₀/32)`.
pub fn default_tau(c0: f64) -> f64 {
    (c0 / 32.0).min(0.05)
}

impl ContourSpec {
    /// Contours for `tf` at dimension `n`. With `tau = None` the default is
    /// used. Fails if the configuration violates `τ < c₀/16`.
    pub fn new(tf: &TestFunction, n: usize, tau: Option<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("dimension must be at least 2, got {n}")));
        }
        let c0 = c0_of(n, tf.eta0, tf.kappa0());
        if !(c0 > 0.0) {
            return Err(Error::Hypothesis(format!(
                "eta0*sqrt(kappa0+eta0) = {:e} is below N^-1 = {:e}",
                tf.eta0 * (tf.kappa0() + tf.eta0).sqrt(),
                1.0 / n as f64
            )));
        }
        let tau = tau.unwrap_or_else(|| default_tau(c0));
        if !(tau > 0.0) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
        }
        if tau >= c0 / 16.0 {
            return Err(Error::Hypothesis(format!(
                "eta0*sqrt(kappa0+eta0) = {:e} < N^(-1+16 tau) = {:e} (tau = {tau}, c0 = {c0:.4})",
                tf.eta0 * (tf.kappa0() + tf.eta0).sqrt(),
                (n as f64).powf(-1.0 + 16.0 * tau)
            )));
        }
        let h1 = tf.eta0 * (n as f64).powf(-tau);
        if h1 >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "contour height {h1} must stay below 1, where the cutoff equals 1"
            )));
        }
        let (a, b) = tf.support_f();
        Ok(Self {
            n,
            tau,
            eta0: tf.eta0,
            c0,
            h1,
            h2: h1 / 2.0,
            x_window: (a - tf.eta0, b + tf.eta0),
            panels_per_height: 1.0,
        })
    }

    /// Same contours with both heights multiplied by `factor`.
    pub fn scaled_heights(&self, factor: f64) -> Self {
        Self {
            h1: self.h1 * factor,
            h2: self.h2 * factor,
            ..*self
        }
    }

    /// Same contours with twice as many quadrature nodes.
    pub fn refined(&self) -> Self {
        Self {
            panels_per_height: 2.0 * self.panels_per_height,
            ..*self
        }
    }
}

/// `f̃(x + iy) = (f(x) + i y f′(x)) χ(y)`.
pub fn almost_analytic(tf: &TestFunction, z: Complex64) -> Complex64 {
    let (chi, _) = crate::spectral::helffer_sjostrand::chi(z.im);
    Complex64::new(tf.f(z.re), z.im * tf.f1(z.re)) * chi
}

/// Quadrature node on a branch, with orientation folded into `w`.
#[derive(Debug, Clone, Copy)]
struct Node {
    w: f64,
    ft: Complex64,
    m: Complex64,
    dm: Complex64,
}

fn branch_nodes(tf: &TestFunction, contour: &ContourSpec, height: f64) -> Result<Vec<Node>> {
    let rule = GaussLegendre::new(PANEL_NODES);
    let (ga, gb) = tf.support_g();
    let width = (contour.h2 / contour.panels_per_height).min(tf.eta0 * (gb - ga) / 16.0);
    let breaks: Vec<f64> = tf
        .breakpoints_f()
        .into_iter()
        .map(|x| x.clamp(contour.x_window.0, contour.x_window.1))
        .collect();
    let mut out = Vec::new();
    for (sign, y) in [(1.0, height), (-1.0, -height)] {
        for seg in breaks.windows(2) {
            let panels = ((seg[1] - seg[0]) / width).ceil().max(1.0) as usize;
            for (x, w) in quadrature::composite(&rule, seg[0], seg[1], panels) {
                let z = Complex64::new(x, y);
                let v = semicircle::evaluate(z)?;
                out.push(Node {
                    w: sign * w,
                    ft: almost_analytic(tf, z),
                    m: v.m,
                    dm: v.dm,
                });
            }
        }
    }
    Ok(out)
}

/// Value of a contour functional before taking the real part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourValue {
    pub value: f64,
    /// `|Im| / max(|Re|, tiny)` of the raw complex result.
    pub imag_ratio: f64,
}

fn finish(raw: Complex64) -> ContourValue {
    ContourValue {
        value: raw.re,
        imag_ratio: raw.im.abs() / raw.re.abs().max(1e-300),
    }
}

/// Coefficients of the variance kernel.
#[derive(Debug, Clone, Copy)]
struct Coefficients {
    beta: f64,
    k4: f64,
    trace_s: f64,
}

fn check_beta(beta: u8) -> Result<f64> {
    match beta {
        1 | 2 => Ok(beta as f64),
        _ => Err(Error::InvalidArgument(format!("beta must be 1 or 2, got {beta}"))),
    }
}

/// Variance functional with an arbitrary trace kernel
/// `t(m₁, m₂) = Tr(S(1 − m₁m₂S)⁻²)`.
fn variance_with<T>(tf: &TestFunction, contour: &ContourSpec, c: Coefficients, trace: T) -> Result<ContourValue>
where
    T: Fn(Complex64) -> Complex64 + Sync,
{
    let g1 = branch_nodes(tf, contour, contour.h1)?;
    let g2 = branch_nodes(tf, contour, contour.h2)?;
    let (a, b, d) = (2.0 / c.beta, 2.0 * c.k4, c.trace_s * (1.0 - 2.0 / c.beta));
    let rows: Vec<Complex64> = g1
        .par_iter()
        .map(|p| {
            let mut acc = Complex64::new(0.0, 0.0);
            for q in &g2 {
                let dd = p.dm * q.dm;
                let kernel = a * dd * trace(p.m * q.m) + b * p.m * q.m * dd + d * dd;
                acc += q.w * q.ft * kernel;
            }
            p.w * p.ft * acc
        })
        .collect();
    let re = quadrature::compensated_sum(rows.iter().map(|v| v.re));
    let im = quadrature::compensated_sum(rows.iter().map(|v| v.im));
    let scale = -1.0 / (4.0 * std::f64::consts::PI * std::f64::consts::PI);
    Ok(finish(Complex64::new(re, im) * scale))
}

fn bias_with<T>(tf: &TestFunction, contour: &ContourSpec, beta: f64, k4: f64, trace: T) -> Result<ContourValue>
where
    T: Fn(Complex64) -> Complex64,
{
    let g1 = branch_nodes(tf, contour, contour.h1)?;
    let a = 2.0 / beta - 1.0;
    let terms: Vec<Complex64> = g1
        .iter()
        .map(|p| {
            let m3 = p.m * p.m * p.m;
            let phi = p.dm * m3 * (a * trace(p.m * p.m) + k4);
            p.w * p.ft * phi
        })
        .collect();
    let re = quadrature::compensated_sum(terms.iter().map(|v| v.re));
    let im = quadrature::compensated_sum(terms.iter().map(|v| v.im));
    let raw = Complex64::new(re, im) / Complex64::new(0.0, 2.0 * std::f64::consts::PI);
    Ok(finish(raw))
}

fn spectrum_of(profile: &VarianceProfile) -> Result<&ProfileSpectrum> {
    let sp = profile.spectral_data()?;
    if sp.clusters.len() > 64 {
        log::debug!(
            "variance profile has {} distinct eigenvalues; contour quadrature cost scales with this",
            sp.clusters.len()
        );
    }
    Ok(sp)
}

/// Nonzero eigenvalue clusters only: zero eigenvalues do not contribute to
/// any trace functional used here.
fn nonzero_clusters(sp: &ProfileSpectrum) -> Vec<(f64, f64)> {
    sp.clusters.iter().copied().filter(|&(l, _)| l != 0.0).collect()
}

/// The contour functional `V(f)` at the given contours.
pub fn variance_vf(
    tf: &TestFunction,
    profile: &VarianceProfile,
    beta: u8,
    k4: f64,
    contour: &ContourSpec,
) -> Result<ContourValue> {
    let beta = check_beta(beta)?;
    let clusters = nonzero_clusters(spectrum_of(profile)?);
    let c = Coefficients {
        beta,
        k4,
        trace_s: profile.trace(),
    };
    variance_with(tf, contour, c, |x| {
        clusters
            .iter()
            .map(|&(l, k)| {
                let d = 1.0 - x * l;
                k * l / (d * d)
            })
            .sum()
    })
}

/// The contour functional `B(f)` at the height `h₁`.
pub fn bias_bf(
    tf: &TestFunction,
    profile: &VarianceProfile,
    beta: u8,
    k4: f64,
    contour: &ContourSpec,
) -> Result<ContourValue> {
    let beta = check_beta(beta)?;
    let clusters = nonzero_clusters(spectrum_of(profile)?);
    bias_with(tf, contour, beta, k4, |x| {
        clusters.iter().map(|&(l, k)| k * l * l / (1.0 - x * l)).sum()
    })
}

/// Richardson extrapolation of values computed at step ratios `1, 1/2,
/// 1/4, …` for an error expansion in powers `h², h³, h⁴, …`. Returns the
/// extrapolated value and the difference between the last two entries on
/// the final row.
pub fn richardson(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    assert!(n >= 1, "need at least one value");
    let mut prev = values.to_vec();
    let mut last_err = f64::INFINITY;
    let mut best = values[n - 1];
    for k in 1..n {
        let factor = 2f64.powi(k as i32 + 1);
        let next: Vec<f64> = (k..n)
            .map(|j| (factor * prev[j - k + 1] - prev[j - k]) / (factor - 1.0))
            .collect();
        last_err = (next[next.len() - 1] - prev[prev.len() - 1]).abs();
        best = next[next.len() - 1];
        prev = next;
    }
    (best, last_err)
}

/// Theory record used by the harness and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryPrediction {
    /// `V(f)` extrapolated to zero contour height.
    pub variance: f64,
    /// `B(f)` extrapolated to zero contour height.
    pub bias: f64,
    pub k4: f64,
    pub beta: u8,
    pub tau: f64,
    pub c0: f64,
    pub h1: f64,
    pub h2: f64,
    /// `V(f)` evaluated on the theorem's contours.
    pub variance_at_contour: f64,
    /// `B(f)` evaluated on the theorem's contours.
    pub bias_at_contour: f64,
    /// Extrapolation error plus the node-doubling difference.
    pub quadrature_error_estimate: f64,
    /// Largest `|Im|/|Re|` seen across all evaluated contour integrals.
    pub imag_residue: f64,
}

/// Resolved `V(f)` and `B(f)`.
pub fn predict(
    tf: &TestFunction,
    profile: &VarianceProfile,
    beta: u8,
    k4: f64,
    contour: &ContourSpec,
) -> Result<TheoryPrediction> {
    let mut vs = Vec::with_capacity(RICHARDSON_LEVELS);
    let mut bs = Vec::with_capacity(RICHARDSON_LEVELS);
    let mut imag = 0.0f64;
    let mut finest = *contour;
    for level in 0..RICHARDSON_LEVELS {
        finest = contour.scaled_heights(0.5f64.powi(level as i32));
        let v = variance_vf(tf, profile, beta, k4, &finest)?;
        let b = bias_bf(tf, profile, beta, k4, &finest)?;
        imag = imag.max(v.imag_ratio);
        if b.value.abs() > 1e-12 {
            imag = imag.max(b.imag_ratio);
        }
        vs.push(v.value);
        bs.push(b.value);
    }
    let (variance, v_err) = richardson(&vs);
    let (bias, b_err) = richardson(&bs);
    let fine = finest.refined();
    let v_ref = variance_vf(tf, profile, beta, k4, &fine)?.value;
    let b_ref = bias_bf(tf, profile, beta, k4, &fine)?.value;
    let node_err = (v_ref - vs[RICHARDSON_LEVELS - 1]).abs() + (b_ref - bs[RICHARDSON_LEVELS - 1]).abs();
    let err = v_err + b_err + node_err;
    if !variance.is_finite() || !bias.is_finite() {
        return Err(Error::Numeric("contour quadrature produced non-finite values".into()));
    }
    if err > 1e-3 * variance.abs().max(1e-3) {
        return Err(Error::Numeric(format!(
            "contour quadrature not converged: error estimate {err:e} for variance {variance}"
        )));
    }
    Ok(TheoryPrediction {
        variance,
        bias,
        k4,
        beta,
        tau: contour.tau,
        c0: contour.c0,
        h1: contour.h1,
        h2: contour.h2,
        variance_at_contour: vs[0],
        bias_at_contour: bs[0],
        quadrature_error_estimate: err,
        imag_residue: imag,
    })
}

/// `∫₀^∞ ξ |ĥ(ξ)|² dξ` with `ĥ(ξ) = (2π)^{−1/2} ∫ h(x) e^{−iξx} dx`, for
/// `h` supported on `[breaks[0], breaks[last]]` and smooth between
/// consecutive breakpoints.
pub fn fourier_energy<H: Fn(f64) -> f64 + Sync>(h: H, breaks: &[f64]) -> Result<f64> {
    if breaks.len() < 2 || breaks[breaks.len() - 1] <= breaks[0] {
        return Err(Error::InvalidArgument("fourier quadrature needs a nonempty support".into()));
    }
    let len = breaks[breaks.len() - 1] - breaks[0];
    let rule = GaussLegendre::new(16);
    let xi_rule = GaussLegendre::new(8);
    // |ĥ|² oscillates on the scale 2π/len in ξ.
    let dxi = std::f64::consts::PI / len;
    let transform_sq = |xi: f64| -> f64 {
        let panel = (2.0 * std::f64::consts::PI / xi.max(1e-300)).min(len / 8.0);
        let nodes = quadrature::composite_on_breaks(&rule, breaks, 1.0 / panel);
        let (mut re, mut im) = (0.0, 0.0);
        for (x, w) in nodes {
            let v = w * h(x);
            let (s, c) = (xi * x).sin_cos();
            re += v * c;
            im -= v * s;
        }
        (re * re + im * im) / (2.0 * std::f64::consts::PI)
    };
    let chunk = |lo: f64, hi: f64| -> f64 {
        let panels = ((hi - lo) / dxi).ceil().max(1.0) as usize;
        let nodes = quadrature::composite(&xi_rule, lo, hi, panels);
        let vals: Vec<f64> = nodes.par_iter().map(|&(xi, w)| w * xi * transform_sq(xi)).collect();
        quadrature::compensated_sum(vals)
    };
    let mut upper = 32.0 * dxi;
    let mut total = chunk(0.0, upper);
    for _ in 0..20 {
        let tail = chunk(upper, 2.0 * upper);
        total += tail;
        upper *= 2.0;
        if tail.abs() <= 1e-9 * total.abs() || tail.abs() < 1e-15 {
            return Ok(total);
        }
    }
    Err(Error::Numeric(format!(
        "Fourier tail did not decay below tolerance by xi = {upper}"
    )))
}

/// Universal bulk variance `(1/βπ) ∫ |ξ| |ĝ(ξ)|² dξ`.
pub fn bulk_limit(tf: &TestFunction, beta: u8) -> Result<f64> {
    let beta = check_beta(beta)?;
    let e = fourier_energy(|u| tf.g(u), &tf.breakpoints_g())?;
    Ok(2.0 * e / (beta * std::f64::consts::PI))
}

/// Spectral edge used by [`edge_limit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeSide {
    #[serde(rename = "+2")]
    Upper,
    #[serde(rename = "-2")]
    Lower,
}

/// Mean and variance of the edge limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeLimit {
    pub mean: f64,
    pub variance: f64,
}

/// Edge limit: mean `(2/β − 1) g(0)/4`, variance `(1/2βπ) ∫|ξ||ĥ|²` with
/// `h(x) = g(−x²)` at `+2` and `g(x²)` at `−2`.
pub fn edge_limit(tf: &TestFunction, beta: u8, side: EdgeSide) -> Result<EdgeLimit> {
    let b = check_beta(beta)?;
    let sign = match side {
        EdgeSide::Upper => -1.0,
        EdgeSide::Lower => 1.0,
    };
    // u = sign·x² must lie in the support of g.
    let gb = tf.breakpoints_g();
    let (lo, hi) = (gb[0], gb[gb.len() - 1]);
    let reach_lo = (sign * lo).max(0.0);
    let reach_hi = (sign * hi).max(0.0);
    let r_max = reach_lo.max(reach_hi).sqrt();
    let r_min = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { reach_lo.min(reach_hi).sqrt() };
    let mut radii: Vec<f64> = gb
        .iter()
        .filter(|&&p| sign * p >= 0.0)
        .map(|&p| (sign * p).sqrt())
        .chain([r_min, r_max])
        .collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let mut breaks: Vec<f64> = radii.iter().rev().map(|r| -r).chain(radii.iter().copied()).collect();
    breaks.dedup();
    let mean = (2.0 / b - 1.0) * tf.g(0.0) / 4.0;
    if r_max == 0.0 {
        return Ok(EdgeLimit { mean, variance: 0.0 });
    }
    let e = fourier_energy(|x| tf.g(sign * x * x), &breaks)?;
    Ok(EdgeLimit {
        mean,
        variance: e / (b * std::f64::consts::PI),
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::profile::TraceKind;
    use crate::spectral::test_function::{Bump, CosineWindow, TruncatedGaussian};

    fn tf(e0: f64, eta0: f64) -> TestFunction {
        TestFunction::new(Arc::new(Bump), e0, eta0).unwrap()
    }

    #[test]
    fn almost_analytic_examples() {
        let f = tf(0.0, 1.0);
        assert_eq!(almost_analytic(&f, Complex64::new(0.3, 0.0)), Complex64::new(f.f(0.3), 0.0));
        assert_eq!(almost_analytic(&f, Complex64::new(3.0, 0.5)), Complex64::new(0.0, 0.0));
        assert_eq!(almost_analytic(&f, Complex64::new(0.1, 2.5)).norm(), 0.0);
    }

    #[test]
    fn hypothesis_checks() {
        let f = tf(0.0, 0.5);
        let c = ContourSpec::new(&f, 400, None).unwrap();
        assert!(c.tau < c.c0 / 16.0);
        assert!((c.h2 - c.h1 / 2.0).abs() < 1e-16);
        assert!(matches!(ContourSpec::new(&f, 400, Some(0.2)), Err(Error::Hypothesis(_))));
        let tiny = tf(2.0, 1e-4);
        assert!(matches!(ContourSpec::new(&tiny, 100, None), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn richardson_removes_polynomial_error() {
        let exact = 0.7;
        let vals: Vec<f64> = (0..6)
            .map(|j| {
                let h = 0.8 * 0.5f64.powi(j);
                exact + 0.3 * h * h - 0.2 * h.powi(3) + 0.05 * h.powi(4)
            })
            .collect();
        let (v, _) = richardson(&vals);
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn spectrum_route_matches_solve_route() {
        // Coarse contours keep the number of LU solves small.
        let n = 16;
        let p = VarianceProfile::from_kernel(n, |x, y| 1.0 + 0.4 * (3.0 * (x - y)).cos(), 1e-13).unwrap();
        let f = tf(0.3, 0.5);
        let mut c = ContourSpec::new(&f, 400, None).unwrap();
        c.panels_per_height = 0.05;
        for beta in [1u8, 2] {
            let k4 = -0.7;
            let v = variance_vf(&f, &p, beta, k4, &c).unwrap();
            let b = bias_bf(&f, &p, beta, k4, &c).unwrap();
            let trace_s = p.trace();
            let coeff = Coefficients { beta: beta as f64, k4, trace_s };
            let lu_v = variance_with(&f, &c, coeff, |x| direct_trace_variance(&p, x)).unwrap();
            let lu_b = bias_with(&f, &c, beta as f64, k4, |x| direct_trace_bias(&p, x)).unwrap();
            assert!((v.value - lu_v.value).abs() < 1e-10 * v.value.abs(), "{} {}", v.value, lu_v.value);
            assert!((b.value - lu_b.value).abs() < 1e-10 * b.value.abs().max(1e-3));
        }
        // kernel_trace itself agrees with the spectral sum.
        let z = Complex64::new(0.2, 0.3);
        let zp = Complex64::new(-0.1, -0.2);
        let (a, bb) = (semicircle::evaluate(z).unwrap(), semicircle::evaluate(zp).unwrap());
        let kt = p.kernel_trace(z, zp, TraceKind::Variance).unwrap();
        let dt = a.dm * bb.dm * direct_trace_variance(&p, a.m * bb.m);
        assert!((kt - dt).norm() < 1e-10 * kt.norm());
    }

    fn direct_trace_variance(p: &VarianceProfile, x: Complex64) -> Complex64 {
        use faer::linalg::solvers::Solve;
        let n = p.n();
        let a = faer::Mat::from_fn(n, n, |i, j| {
            Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0) - x * p.get(i, j)
        });
        let s = faer::Mat::from_fn(n, n, |i, j| Complex64::new(p.get(i, j), 0.0));
        let lu = a.partial_piv_lu();
        let once = lu.solve(&s);
        let twice = lu.solve(&once);
        (0..n).map(|i| twice[(i, i)]).sum()
    }

    fn direct_trace_bias(p: &VarianceProfile, x: Complex64) -> Complex64 {
        use faer::linalg::solvers::Solve;
        let n = p.n();
        let a = faer::Mat::from_fn(n, n, |i, j| {
            Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0) - x * p.get(i, j)
        });
        let s = faer::Mat::from_fn(n, n, |i, j| Complex64::new(p.get(i, j), 0.0));
        let sol = a.partial_piv_lu().solve(&s * &s);
        (0..n).map(|i| sol[(i, i)]).sum()
    }

    #[test]
    fn vanishing_coefficients() {
        let p = VarianceProfile::flat(100).unwrap();
        let f = tf(0.0, 0.5);
        let c = ContourSpec::new(&f, 400, None).unwrap();
        let b = bias_bf(&f, &p, 2, 0.0, &c).unwrap();
        assert!(b.value.abs() < 1e-12);
        // β = 2: the TrS term has a zero coefficient, so TrS is irrelevant.
        let v = variance_vf(&f, &p, 2, 0.0, &c).unwrap();
        let alt = variance_with(&f, &c, Coefficients { beta: 2.0, k4: 0.0, trace_s: 123.0 }, |x| {
            1.0 / ((1.0 - x) * (1.0 - x))
        })
        .unwrap();
        assert!((v.value - alt.value).abs() < 1e-12 * v.value.abs());
        assert!(v.imag_ratio < 1e-6);
    }

    #[test]
    fn bulk_limit_gaussian_oracle() {
        let g = TestFunction::new(Arc::new(TruncatedGaussian { cutoff: 7.0 }), 0.0, 1.0).unwrap();
        let v1 = bulk_limit(&g, 1).unwrap();
        assert!((v1 - 1.0 / std::f64::consts::PI).abs() < 1e-6, "{v1}");
        let v2 = bulk_limit(&g, 2).unwrap();
        assert!((v2 - v1 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn bulk_limit_scale_invariance_and_difference_quotient_oracle() {
        let a = TestFunction::new(Arc::new(Bump), 0.0, 1.0).unwrap();
        let b = TestFunction::with_affine(Arc::new(Bump), 1.0, 2.0, 0.0, 1.0).unwrap();
        let va = bulk_limit(&a, 1).unwrap();
        let vb = bulk_limit(&b, 1).unwrap();
        assert!((va - vb).abs() < 1e-6 * va);
        // ∫|ξ||ĝ|² = (1/2π) ∬ ((g(x) − g(y))/(x − y))² dx dy over ℝ²; the
        // part with both points outside the support vanishes and the part
        // with one point outside is integrated in closed form in y.
        let rule = GaussLegendre::new(20);
        let nodes = quadrature::composite(&rule, -1.0, 1.0, 40);
        let mut inner = 0.0;
        for &(x, wx) in &nodes {
            for &(y, wy) in &nodes {
                let q = if (x - y).abs() < 1e-12 {
                    a.g1(x)
                } else {
                    (a.g(x) - a.g(y)) / (x - y)
                };
                inner += wx * wy * q * q;
            }
            // y outside [−1, 1]: ∫ dy/(x − y)² = 1/(1 − x) + 1/(1 + x).
            inner += 2.0 * wx * a.g(x).powi(2) * (1.0 / (1.0 - x) + 1.0 / (1.0 + x));
        }
        let oracle = inner / (2.0 * std::f64::consts::PI) / std::f64::consts::PI;
        assert!((va - oracle).abs() < 1e-6 * va, "{va} vs {oracle}");
    }

    #[test]
    fn edge_limit_examples() {
        let f = tf(2.0, 0.1);
        let e2 = edge_limit(&f, 2, EdgeSide::Upper).unwrap();
        assert_eq!(e2.mean, 0.0);
        let e1 = edge_limit(&f, 1, EdgeSide::Upper).unwrap();
        assert!((e1.mean - 0.25).abs() < 1e-15);
        let lower = edge_limit(&f, 1, EdgeSide::Lower).unwrap();
        assert!((e1.variance - lower.variance).abs() < 1e-9 * e1.variance);
        assert!((e1.variance - 2.0 * e2.variance).abs() < 1e-12);
        let cw = TestFunction::new(Arc::new(CosineWindow), 2.0, 0.1).unwrap();
        assert!(edge_limit(&cw, 1, EdgeSide::Upper).unwrap().variance > 0.0);
    }

    #[test]
    fn flat_profile_rank_one_path() {
        // Flat spectrum is exactly {1, 0, …}; the kernel collapses to the
        // scalar formula regardless of n.
        let f = tf(0.0, 0.5);
        let c = ContourSpec::new(&f, 400, None).unwrap();
        let a = variance_vf(&f, &VarianceProfile::flat(10).unwrap(), 1, -2.0, &c).unwrap();
        let b = variance_vf(&f, &VarianceProfile::flat(1000).unwrap(), 1, -2.0, &c).unwrap();
        let scalar = variance_with(&f, &c, Coefficients { beta: 1.0, k4: -2.0, trace_s: 1.0 }, |x| {
            1.0 / ((1.0 - x) * (1.0 - x))
        })
        .unwrap();
        assert!((a.value - scalar.value).abs() < 1e-8 * scalar.value.abs());
        assert!((b.value - scalar.value).abs() < 1e-8 * scalar.value.abs());
    }
}
