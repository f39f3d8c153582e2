//! Empirical checks of the resolvent local laws and of the two-point
//! function `T`.
//!
//! Every check divides an observed error by a deterministic control scale
//! built from [`crate::semicircle`] and [`crate::profile`] only; sampled data
//! never enters a denominator.

use std::collections::BTreeMap;

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::HermitianMatrix;
use crate::profile::VarianceProfile;
use crate::rng;
use crate::semicircle::{self, ControlParams};
use crate::spectral::Eigensystem;

/// Probe separations below this use the coincident-point identity.
pub const COINCIDENT_TOL: f64 = 1e-12;

/// Ratios of observed errors to control scales at one probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawReport {
    pub z: Complex64,
    pub zp: Option<Complex64>,
    /// Gated ratios, compared against `band`.
    pub ratios: BTreeMap<String, f64>,
    /// Reported but not gated, e.g. the sharper two-point denominator.
    pub informational: BTreeMap<String, f64>,
    pub band: f64,
}

impl LawReport {
    fn new(z: Complex64, zp: Option<Complex64>, band: f64) -> Self {
        Self {
            z,
            zp,
            ratios: BTreeMap::new(),
            informational: BTreeMap::new(),
            band,
        }
    }

    pub fn pass(&self) -> bool {
        self.ratios.values().all(|r| r.is_finite() && *r <= self.band)
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratios.values().copied().fold(0.0, f64::max)
    }
}

/// Pass band `base·N^{slack}`.
pub fn band(n: usize, base: f64, slack_exponent: f64) -> f64 {
    base * (n as f64).powf(slack_exponent)
}

fn check_domain(z: Complex64, n: usize, tau: f64) -> Result<()> {
    let w = Complex64::new(z.re, z.im.abs());
    if semicircle::in_domain_d_prime(w, n, tau) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "probe {z} outside D' for n = {n}, tau = {tau} (needs |E| <= 5, n^(-1+tau) <= |eta| <= 10)"
        )))
    }
}

/// Deterministic isotropic test vectors: `e₁`, `e₂`, the normalized flat
/// vector and one keyed pseudo-random unit vector.
pub fn test_vectors(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for k in 0..n.min(2) {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        out.push(e);
    }
    out.push(vec![1.0 / (n as f64).sqrt(); n]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e57_7ec7);
    let mut v: Vec<f64> = (0..n).map(|_| rng::box_muller(rng.next_u64(), rng.next_u64())).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    out.push(v);
    out
}

fn ensure_dim(n: usize, s: &VarianceProfile) -> Result<()> {
    if n != s.n() {
        return Err(Error::InvalidArgument(format!("matrix has n = {n} but the profile has n = {}", s.n())));
    }
    Ok(())
}

fn ensure_square(g: &Mat<Complex64>, s: &VarianceProfile) -> Result<()> {
    if g.nrows() != s.n() || g.ncols() != s.n() {
        return Err(Error::InvalidArgument(format!(
            "resolvent is {}x{} but the profile has n = {}",
            g.nrows(),
            g.ncols(),
            s.n()
        )));
    }
    Ok(())
}

/// The pieces of `G(z)` the resolvent laws need.
#[derive(Debug, Clone)]
pub struct ResolventSummary {
    /// `max_ij |G_ij − δ_ij m_sc(z)|`.
    pub entry_sup: f64,
    pub diagonal: Vec<Complex64>,
    /// `G w` for each test vector `w`, in order.
    pub applied: Vec<Vec<Complex64>>,
}

impl ResolventSummary {
    pub fn from_matrix(g: &Mat<Complex64>, z: Complex64, vectors: &[Vec<f64>]) -> Result<Self> {
        let m = semicircle::m_sc(z)?;
        let n = g.nrows();
        let mut entry_sup = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let d = if i == j { g[(i, j)] - m } else { g[(i, j)] };
                entry_sup = entry_sup.max(d.norm());
            }
        }
        Ok(Self {
            entry_sup,
            diagonal: (0..n).map(|i| g[(i, i)]).collect(),
            applied: vectors
                .iter()
                .map(|w| (0..n).map(|i| (0..n).map(|j| g[(i, j)] * w[j]).sum()).collect())
                .collect(),
        })
    }

    pub fn from_eigensystem(es: &Eigensystem, z: Complex64, vectors: &[Vec<f64>]) -> Result<Self> {
        let m = semicircle::m_sc(z)?;
        Ok(Self {
            entry_sup: es.resolvent_entry_sup(z, m)?,
            diagonal: es.resolvent_diagonal(z)?,
            applied: vectors.iter().map(|w| es.resolvent_apply(z, w)).collect::<Result<_>>()?,
        })
    }
}

/// Entrywise, averaged, strong and isotropic law ratios at `z`.
pub fn resolvent_law_ratios(
    g: &ResolventSummary,
    s: &VarianceProfile,
    z: Complex64,
    vectors: &[Vec<f64>],
    tau: f64,
    band: f64,
) -> Result<LawReport> {
    let n = s.n();
    if g.diagonal.len() != n || g.applied.len() != vectors.len() {
        return Err(Error::InvalidArgument(format!(
            "resolvent summary of size {} with {} vectors does not match n = {n} and {} vectors",
            g.diagonal.len(),
            g.applied.len(),
            vectors.len()
        )));
    }
    check_domain(z, n, tau)?;
    let m = semicircle::m_sc(z)?;
    let ControlParams { psi, theta } = semicircle::control_params(z, n)?;
    let (rho, _) = s.resolvent_norms(m * m)?;

    let diag = &g.diagonal;
    let m_n = diag.iter().sum::<Complex64>() / n as f64;
    let sm = s.matrix();
    let mut strong = 0.0f64;
    for i in 0..n {
        let v: Complex64 = (0..n).map(|j| sm[(i, j)] * diag[j]).sum();
        strong = strong.max((v - m).norm());
    }
    let mut iso = 0.0f64;
    for v in vectors {
        for (w, gw) in vectors.iter().zip(&g.applied) {
            let vgw: Complex64 = v.iter().zip(gw).map(|(a, b)| *a * b).sum();
            let vw: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
            iso = iso.max((vgw - m * vw).norm());
        }
    }

    let mut r = LawReport::new(z, None, band);
    r.ratios.insert("entrywise".into(), g.entry_sup / psi);
    r.ratios.insert("average".into(), (m_n - m).norm() / theta);
    r.ratios.insert("strong".into(), strong / (rho * psi * psi));
    r.ratios.insert("isotropic".into(), iso / psi);
    Ok(r)
}

/// Resolvent law ratios computed from `h` directly.
pub fn check_resolvent_laws(
    h: &HermitianMatrix,
    s: &VarianceProfile,
    z: Complex64,
    vectors: &[Vec<f64>],
    tau: f64,
    band: f64,
) -> Result<LawReport> {
    check_domain(z, s.n(), tau)?;
    ensure_dim(h.dim(), s)?;
    let g = crate::spectral::resolvent(h, z)?;
    resolvent_law_ratios(&ResolventSummary::from_matrix(&g, z, vectors)?, s, z, vectors, tau, band)
}

fn real_times_complex(a: &Mat<f64>, b: &Mat<Complex64>) -> Mat<Complex64> {
    let re = Mat::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)].re);
    let im = Mat::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)].im);
    let pr = a * &re;
    let pi = a * &im;
    Mat::from_fn(a.nrows(), b.ncols(), |i, j| Complex64::new(pr[(i, j)], pi[(i, j)]))
}

/// `T_ab = Σ_{j≠b} s_aj G_jb(z) G_jb(z′)` from the two resolvents.
pub fn compute_t_from(g1: &Mat<Complex64>, g2: &Mat<Complex64>, s: &VarianceProfile) -> Result<Mat<Complex64>> {
    ensure_square(g1, s)?;
    ensure_square(g2, s)?;
    let n = s.n();
    let prod = Mat::from_fn(n, n, |j, b| g1[(j, b)] * g2[(j, b)]);
    let mut t = real_times_complex(s.matrix(), &prod);
    for b in 0..n {
        let gg = prod[(b, b)];
        for a in 0..n {
            t[(a, b)] -= s.get(a, b) * gg;
        }
    }
    Ok(t)
}

pub fn compute_t(h: &HermitianMatrix, s: &VarianceProfile, z: Complex64, zp: Complex64) -> Result<Mat<Complex64>> {
    let g1 = crate::spectral::resolvent(h, z)?;
    let g2 = crate::spectral::resolvent(h, zp)?;
    compute_t_from(&g1, &g2, s)
}

fn sup_norm(m: &Mat<Complex64>) -> f64 {
    m.col_iter().flat_map(|c| c.iter().map(|v| v.norm()).collect::<Vec<_>>()).fold(0.0, f64::max)
}

/// Two-point law ratios from precomputed `G(z)`, `G(z′)`.
pub fn t_law_ratios(
    g1: &Mat<Complex64>,
    g2: &Mat<Complex64>,
    s: &VarianceProfile,
    z: Complex64,
    zp: Complex64,
    tau: f64,
    band: f64,
) -> Result<LawReport> {
    let n = s.n();
    check_domain(z, n, tau)?;
    check_domain(zp, n, tau)?;
    let nf = n as f64;
    let m1 = semicircle::m_sc(z)?;
    let m2 = semicircle::m_sc(zp)?;
    let c1 = semicircle::control_params(z, n)?;
    let c2 = semicircle::control_params(zp, n)?;
    let (p1, p2) = (c1.psi, c2.psi);
    let (rho2, _) = s.resolvent_norms(m1 * m2)?;
    let xi2 = p1.powf(1.5) * p2 + p1 * p2.powf(1.5);
    let sharp = rho2 * (p1 * p1 * p2 + p1 * p2 * p2);

    let t = compute_t_from(g1, g2, s)?;
    let t_th = s.t_theory_matrix(z, zp)?;
    let diff = &t - &t_th;
    let entry_err = sup_norm(&diff);

    let tr = (0..n).map(|i| t[(i, i)]).sum::<Complex64>();
    let tr_th = (0..n).map(|i| t_th[(i, i)]).sum::<Complex64>();
    let trace_scale = nf * (xi2 + c1.theta * c1.theta + c1.theta * c2.theta);

    let st = real_times_complex(s.matrix(), &t);
    let s2 = s.matrix() * s.matrix();
    let p = Mat::from_fn(n, n, |a, b| -t[(a, b)] / m1 + m2 * st[(a, b)] + m1 * m2 * m2 * s2[(a, b)]);

    let mut r = LawReport::new(z, Some(zp), band);
    r.ratios.insert("T_entrywise".into(), entry_err / (rho2 * xi2));
    r.ratios.insert("T_trace".into(), (tr - tr_th).norm() / trace_scale);
    r.ratios.insert("P_recursion".into(), sup_norm(&p) / xi2);
    r.informational.insert("T_entrywise_sharp".into(), entry_err / sharp);
    Ok(r)
}

pub fn check_t_laws(
    h: &HermitianMatrix,
    s: &VarianceProfile,
    z: Complex64,
    zp: Complex64,
    tau: f64,
    band: f64,
) -> Result<LawReport> {
    let g1 = crate::spectral::resolvent(h, z)?;
    let g2 = crate::spectral::resolvent(h, zp)?;
    t_law_ratios(&g1, &g2, s, z, zp, tau, band)
}

/// Observed deviation of one trace identity and its scale `Θ/|Im z|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub deviation: f64,
    pub scale: f64,
}

impl IdentityCheck {
    pub fn ratio(&self) -> f64 {
        self.deviation / self.scale
    }
}

/// Resolvent-identity consequences for the averaged two-point function
/// `Tr(ΠT) = N⁻¹ Σ_{ab} T_ab`. Identity `T2` is used for separated probes,
/// `T22` (through `G²`) when `|z − z′| < COINCIDENT_TOL`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceIdentityReport {
    pub name: String,
    pub observed: Complex64,
    pub predicted: Complex64,
    pub check: IdentityCheck,
}

/// Both identities rely on `Gᵀ = G`, so `H` must be real symmetric.
pub fn check_trace_identities(
    h: &HermitianMatrix,
    s: &VarianceProfile,
    z: Complex64,
    zp: Complex64,
) -> Result<TraceIdentityReport> {
    if !h.is_real() {
        return Err(Error::InvalidArgument(
            "trace identities need a real symmetric matrix".into(),
        ));
    }
    let es = Eigensystem::new(h)?;
    let g1 = es.resolvent(z)?;
    let coincident = (z - zp).norm() < COINCIDENT_TOL;
    let g2 = if coincident { g1.clone() } else { es.resolvent(zp)? };
    trace_identity_from(&g1, &g2, s, z, zp)
}

pub fn trace_identity_from(
    g1: &Mat<Complex64>,
    g2: &Mat<Complex64>,
    s: &VarianceProfile,
    z: Complex64,
    zp: Complex64,
) -> Result<TraceIdentityReport> {
    let n = s.n();
    let nf = n as f64;
    let t = compute_t_from(g1, g2, s)?;
    let mut observed = Complex64::new(0.0, 0.0);
    for b in 0..n {
        for a in 0..n {
            observed += t[(a, b)];
        }
    }
    observed /= nf;
    let a = semicircle::evaluate(z)?;
    let m2 = semicircle::m_sc(zp)?;
    let coincident = (z - zp).norm() < COINCIDENT_TOL;
    let (name, predicted) = if coincident {
        ("T22", a.dm - a.m * a.m)
    } else {
        ("T2", (a.m - m2) / (z - zp) - a.m * m2)
    };
    let theta = semicircle::control_params(z, n)?
        .theta
        .max(semicircle::control_params(zp, n)?.theta);
    let scale = theta / z.im.abs().min(zp.im.abs());
    Ok(TraceIdentityReport {
        name: name.into(),
        observed,
        predicted,
        check: IdentityCheck {
            deviation: (observed - predicted).norm(),
            scale,
        },
    })
}

/// Purely deterministic relations of the profile, expressed as relative
/// residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeterministicIdentities {
    /// `Tr(m₁²m₂²Π(1 − m₁m₂S)⁻¹)` against `m₁²m₂²/(1 − m₁m₂)`.
    pub t1: f64,
    /// `(1 − m₁m₂S)·T_theory` against `m₁²m₂²S²`, in sup norm.
    pub t_theory_relation: f64,
}

pub fn deterministic_identities(s: &VarianceProfile, z: Complex64, zp: Complex64) -> Result<DeterministicIdentities> {
    let n = s.n();
    let nf = n as f64;
    let m1 = semicircle::m_sc(z)?;
    let m2 = semicircle::m_sc(zp)?;
    let x = m1 * m2;
    let one_minus = Mat::from_fn(n, n, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        Complex64::new(d, 0.0) - x * s.get(i, j)
    });
    let rhs = Mat::from_fn(n, 1, |_, _| Complex64::new(1.0, 0.0));
    let y = one_minus.partial_piv_lu().solve(&rhs);
    let lhs = x * x * (0..n).map(|i| y[(i, 0)]).sum::<Complex64>() / nf;
    let expected = x * x / (1.0 - x);
    let t1 = (lhs - expected).norm() / expected.norm();

    let t_th = s.t_theory_matrix(z, zp)?;
    let st = real_times_complex(s.matrix(), &t_th);
    let applied = Mat::from_fn(n, n, |i, j| t_th[(i, j)] - x * st[(i, j)]);
    let s2 = s.matrix() * s.matrix();
    let target = Mat::from_fn(n, n, |i, j| x * x * s2[(i, j)]);
    let rel = sup_norm(&(&applied - &target)) / sup_norm(&target);
    Ok(DeterministicIdentities {
        t1,
        t_theory_relation: rel,
    })
}

/// Probe-grid configuration and pass bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalLawConfig {
    pub energies: Vec<f64>,
    /// Probe heights are `N^{−a}` for each exponent `a`.
    pub eta_exponents: Vec<f64>,
    /// Exponent in the lower edge `N^{−1+τ}` of the domain.
    pub domain_tau: f64,
    pub band_base: f64,
    pub band_slack_exponent: f64,
}

impl Default for LocalLawConfig {
    fn default() -> Self {
        Self {
            energies: vec![-1.5, -0.5, 0.0, 0.5, 1.5],
            eta_exponents: vec![0.3, 0.5, 0.7],
            domain_tau: 0.1,
            band_base: 5.0,
            band_slack_exponent: 0.05,
        }
    }
}

impl LocalLawConfig {
    pub fn band(&self, n: usize) -> f64 {
        band(n, self.band_base, self.band_slack_exponent)
    }

    /// Grid points lying in `D′`, energies outer, heights inner.
    pub fn probes(&self, n: usize) -> Vec<Complex64> {
        let mut out = Vec::new();
        for &e in &self.energies {
            for &a in &self.eta_exponents {
                let z = Complex64::new(e, (n as f64).powf(-a));
                if semicircle::in_domain_d_prime(z, n, self.domain_tau) {
                    out.push(z);
                }
            }
        }
        out
    }
}

/// One CSV row: `(N, seed, sample, z, zp, check, ratio, band, pass)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawRow {
    pub n: usize,
    pub seed: u64,
    pub sample: u64,
    pub z: Complex64,
    pub zp: Option<Complex64>,
    pub check: String,
    pub ratio: f64,
    pub band: f64,
    pub pass: bool,
}

impl LawRow {
    pub fn from_report(report: &LawReport, n: usize, seed: u64, sample: u64) -> Vec<Self> {
        report
            .ratios
            .iter()
            .map(|(name, &ratio)| Self {
                n,
                seed,
                sample,
                z: report.z,
                zp: report.zp,
                check: name.clone(),
                ratio,
                band: report.band,
                pass: ratio.is_finite() && ratio <= report.band,
            })
            .collect()
    }
}

/// Resolvent-law reports on the whole probe grid for one sample, sharing
/// one eigendecomposition.
pub fn probe_grid_reports(
    h: &HermitianMatrix,
    s: &VarianceProfile,
    cfg: &LocalLawConfig,
    vector_seed: u64,
) -> Result<Vec<LawReport>> {
    let n = s.n();
    ensure_dim(h.dim(), s)?;
    let es = Eigensystem::new(h)?;
    let vectors = test_vectors(n, vector_seed);
    let band = cfg.band(n);
    cfg.probes(n)
        .into_iter()
        .map(|z| {
            let g = ResolventSummary::from_eigensystem(&es, z, &vectors)?;
            resolvent_law_ratios(&g, s, z, &vectors, cfg.domain_tau, band)
        })
        .collect()
}
