//! Monte Carlo experiments for the CLT of linear eigenvalue statistics.
//!
//! Sampling and analysis are separate steps so one set of spectra can be
//! analyzed against several test functions. All randomness comes from the
//! keyed per-index streams of [`crate::ensemble`], and per-sample work is
//! collected in index order, so results do not depend on the thread count.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::ensemble::EnsembleSpec;
use crate::error::{Error, Result};
use crate::locallaw::{self, LawReport, LawRow, LocalLawConfig};
use crate::spectral::{self, TestFunction};
use crate::theory::{self, ContourSpec, TheoryPrediction};

/// Minimum number of samples accepted by [`run_experiment`].
pub const MIN_SAMPLES: usize = 100;
/// Minimum fraction of samples that must succeed.
pub const MIN_SUCCESS_FRACTION: f64 = 0.99;
/// Below this the variance is reported as suspiciously small.
pub const SMALL_VARIANCE: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleSpec,
    pub test_function: TestFunction,
    /// Number of samples `M`.
    pub samples: usize,
    /// `None` selects the default `τ`.
    pub tau: Option<f64>,
    /// Worker threads; 0 means the rayon default.
    pub threads: usize,
    /// Arguments of the characteristic function.
    pub lambdas: Vec<f64>,
}

impl ExperimentConfig {
    pub fn check(&self) -> Result<()> {
        if self.samples < MIN_SAMPLES {
            return Err(Error::InvalidArgument(format!(
                "at least {MIN_SAMPLES} samples are required, got {}",
                self.samples
            )));
        }
        self.ensemble.check()?;
        ContourSpec::new(&self.test_function, self.ensemble.n(), self.tau).map(|_| ())
    }
}

/// Spectra of the requested sample indices; failures are kept per index.
pub struct SpectraBatch {
    pub n: usize,
    pub beta: u8,
    pub spectra: Vec<(u64, std::result::Result<Vec<f64>, String>)>,
}

/// Runs `f` on a pool with `threads` workers (0 selects the default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Eigenvalues of samples `0..samples`, computed in parallel and returned in
/// index order.
pub fn sample_spectra(ensemble: &EnsembleSpec, samples: usize, threads: usize) -> Result<SpectraBatch> {
    ensemble.check()?;
    let spectra = with_threads(threads, || {
        (0..samples as u64)
            .into_par_iter()
            .map(|i| {
                let out = ensemble
                    .sample(i)
                    .and_then(|h| spectral::eigenvalues(&h))
                    .map_err(|e| e.to_string());
                (i, out)
            })
            .collect()
    })?;
    Ok(SpectraBatch {
        n: ensemble.n(),
        beta: ensemble.beta,
        spectra,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStatistic {
    pub index: u64,
    pub raw: f64,
    /// `raw − N∫f ρ_sc`.
    pub centered: f64,
}

/// Sample moments with their large-sample standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub skewness: f64,
    pub skewness_se: f64,
    pub excess_kurtosis: f64,
    pub excess_kurtosis_se: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < 4 {
            return Err(Error::InvalidArgument(format!("moments need at least 4 samples, got {n}")));
        }
        let nf = n as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let central = |p: i32| xs.iter().map(|x| (x - mean).powi(p)).sum::<f64>() / nf;
        let (m2, m3, m4) = (central(2), central(3), central(4));
        let variance = m2 * nf / (nf - 1.0);
        Ok(Self {
            count: n,
            mean,
            mean_se: (variance / nf).sqrt(),
            variance,
            variance_se: ((m4 - m2 * m2).max(0.0) / nf).sqrt(),
            skewness: m3 / m2.powf(1.5),
            skewness_se: (6.0 / nf).sqrt(),
            excess_kurtosis: m4 / (m2 * m2) - 3.0,
            excess_kurtosis_se: (24.0 / nf).sqrt(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// `sup |F̂ − Φ|` without the sample-size precondition.
pub fn ks_statistic(samples: &[f64]) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let p = normal_cdf(x);
            ((i + 1) as f64 / n - p).max(p - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov tail `P(K > λ)` with Stephens' small-sample
/// adjustment of the argument.
pub fn kolmogorov_p(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test against the standard normal.
pub fn ks_normality(samples: &[f64]) -> Result<KsResult> {
    if samples.len() < 5 {
        return Err(Error::InvalidArgument(format!(
            "KS test needs at least 5 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("KS test received non-finite samples".into()));
    }
    let statistic = ks_statistic(samples);
    Ok(KsResult {
        statistic,
        p_value: kolmogorov_p(statistic, samples.len()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharFunctionRow {
    pub lambda: f64,
    pub empirical: Complex64,
    /// Standard errors of the real and imaginary parts.
    pub se_re: f64,
    pub se_im: f64,
    /// `exp(−λ²V/2)`.
    pub gaussian: f64,
}

/// Empirical `E e^{iλx}` of centered samples against the Gaussian limit.
pub fn char_function_check(samples: &[f64], variance: f64, lambdas: &[f64]) -> Vec<CharFunctionRow> {
    let n = samples.len().max(1) as f64;
    lambdas
        .iter()
        .map(|&lambda| {
            let (mut c, mut s, mut c2, mut s2) = (0.0, 0.0, 0.0, 0.0);
            for &x in samples {
                let (si, co) = (lambda * x).sin_cos();
                c += co;
                s += si;
                c2 += co * co;
                s2 += si * si;
            }
            let (mc, ms) = (c / n, s / n);
            CharFunctionRow {
                lambda,
                empirical: Complex64::new(mc, ms),
                se_re: ((c2 / n - mc * mc).max(0.0) / n).sqrt(),
                se_im: ((s2 / n - ms * ms).max(0.0) / n).sqrt(),
                gaussian: (-0.5 * lambda * lambda * variance).exp(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub n: usize,
    pub beta: u8,
    pub samples_requested: usize,
    pub samples_used: usize,
    /// Excluded samples with their failure messages.
    pub failures: Vec<(u64, String)>,
    pub statistics: Vec<SampleStatistic>,
    pub moments: Moments,
    pub theory: TheoryPrediction,
    /// Empirical variance over `V(f)`, with its standard error.
    pub variance_ratio: f64,
    pub variance_ratio_se: f64,
    /// `(mean − B(f)) / SE(mean)`.
    pub bias_z: f64,
    /// KS test of `(x − mean)/√V(f)`.
    pub ks: KsResult,
    pub char_function: Vec<CharFunctionRow>,
    pub warnings: Vec<String>,
}

/// Theory record for an experiment configuration; rejects `V(f) ≤ 0`.
pub fn theory_for(cfg: &ExperimentConfig) -> Result<(TheoryPrediction, Vec<String>)> {
    let ens = &cfg.ensemble;
    let contour = ContourSpec::new(&cfg.test_function, ens.n(), cfg.tau)?;
    let pred = theory::predict(
        &cfg.test_function,
        &ens.profile,
        ens.beta,
        ens.fourth_cumulant_sum(),
        &contour,
    )?;
    if !(pred.variance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "configuration rejected: V(f) = {} is not positive",
            pred.variance
        )));
    }
    let mut warnings = Vec::new();
    if pred.variance < SMALL_VARIANCE {
        let msg = format!("V(f) = {:e} is below {SMALL_VARIANCE:e}", pred.variance);
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok((pred, warnings))
}

/// Statistics of `batch` under `tf`, compared against `theory`.
pub fn analyze(
    batch: &SpectraBatch,
    tf: &TestFunction,
    theory: TheoryPrediction,
    lambdas: &[f64],
    mut warnings: Vec<String>,
) -> Result<ExperimentResult> {
    let sc = spectral::sc_expectation(tf, batch.n)?;
    let mut failures = Vec::new();
    let mut statistics = Vec::with_capacity(batch.spectra.len());
    for (index, out) in &batch.spectra {
        match out {
            Ok(ev) => {
                let raw = crate::quadrature::compensated_sum(ev.iter().map(|&l| tf.f(l)));
                statistics.push(SampleStatistic {
                    index: *index,
                    raw,
                    centered: raw - sc,
                });
            }
            Err(msg) => failures.push((*index, msg.clone())),
        }
    }
    let requested = batch.spectra.len();
    let used = statistics.len();
    if (used as f64) < MIN_SUCCESS_FRACTION * requested as f64 {
        return Err(Error::Numeric(format!(
            "only {used} of {requested} samples succeeded; first failure: {}",
            failures.first().map(|f| f.1.as_str()).unwrap_or("none")
        )));
    }
    if !failures.is_empty() {
        let msg = format!("{} of {requested} samples excluded after failures", failures.len());
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let xs: Vec<f64> = statistics.iter().map(|s| s.centered).collect();
    let moments = Moments::of(&xs)?;
    let sd = theory.variance.sqrt();
    let standardized: Vec<f64> = xs.iter().map(|x| (x - moments.mean) / sd).collect();
    let ks = ks_normality(&standardized)?;
    let centered: Vec<f64> = xs.iter().map(|x| x - moments.mean).collect();
    Ok(ExperimentResult {
        n: batch.n,
        beta: batch.beta,
        samples_requested: requested,
        samples_used: used,
        failures,
        statistics,
        moments,
        theory,
        variance_ratio: moments.variance / theory.variance,
        variance_ratio_se: moments.variance_se / theory.variance,
        bias_z: (moments.mean - theory.bias) / moments.mean_se,
        ks,
        char_function: char_function_check(&centered, theory.variance, lambdas),
        warnings,
    })
}

/// Full experiment: theory, sampling, analysis.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.check()?;
    let (pred, warnings) = theory_for(cfg)?;
    let batch = sample_spectra(&cfg.ensemble, cfg.samples, cfg.threads)?;
    analyze(&batch, &cfg.test_function, pred, &cfg.lambdas, warnings)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub theory_variance: f64,
    pub variance_ratio: f64,
    pub variance_ratio_se: f64,
    pub bias_z: f64,
    pub ks_p: f64,
}

/// One experiment per dimension; `build` produces the configuration at `n`.
pub fn convergence_sweep(
    build: impl Fn(usize) -> Result<ExperimentConfig>,
    n_list: &[usize],
) -> Result<Vec<SweepRow>> {
    n_list
        .iter()
        .map(|&n| {
            let r = run_experiment(&build(n)?)?;
            Ok(SweepRow {
                n,
                theory_variance: r.theory.variance,
                variance_ratio: r.variance_ratio,
                variance_ratio_se: r.variance_ratio_se,
                bias_z: r.bias_z,
                ks_p: r.ks.p_value,
            })
        })
        .collect()
}

/// Resolvent-law reports on the probe grid for samples `0..samples`, in
/// sample order. Each sample gets its own isotropic random vector, keyed by
/// the ensemble seed and the sample index.
pub fn local_law_study(
    ensemble: &EnsembleSpec,
    samples: usize,
    cfg: &LocalLawConfig,
    threads: usize,
) -> Result<Vec<(u64, Vec<LawReport>)>> {
    ensemble.check()?;
    let out: Vec<Result<(u64, Vec<LawReport>)>> = with_threads(threads, || {
        (0..samples as u64)
            .into_par_iter()
            .map(|i| {
                let h = ensemble.sample(i)?;
                let key = ensemble.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i);
                Ok((i, locallaw::probe_grid_reports(&h, &ensemble.profile, cfg, key)?))
            })
            .collect()
    })?;
    out.into_iter().collect()
}

/// Flattens a study into CSV rows.
pub fn law_rows(n: usize, seed: u64, study: &[(u64, Vec<LawReport>)]) -> Vec<LawRow> {
    study
        .iter()
        .flat_map(|(i, reports)| reports.iter().flat_map(move |r| LawRow::from_report(r, n, seed, *i)))
        .collect()
}

/// Median of the entrywise ratio over all samples and probes.
pub fn median_ratio(study: &[(u64, Vec<LawReport>)], check: &str) -> Option<f64> {
    let mut v: Vec<f64> = study
        .iter()
        .flat_map(|(_, rs)| rs.iter().filter_map(|r| r.ratios.get(check).copied()))
        .collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    Some(if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) })
}

/// Gaussian density, used for histogram overlays.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Normal Q–Q points `(Φ⁻¹((i + ½)/n), x₍ᵢ₎)`.
pub fn qq_points(samples: &[f64]) -> Vec<(f64, f64)> {
    let std_normal = Normal::standard();
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| (std_normal.inverse_cdf((i as f64 + 0.5) / n), x))
        .collect()
}

/// Density histogram `(bin centre, density)` on `[lo, hi]`; samples outside
/// the range are dropped from the counts but not from the normalization.
pub fn histogram(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Vec<(f64, f64)>> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::InvalidArgument(format!(
            "histogram needs bins > 0 and lo < hi, got {bins} bins on [{lo}, {hi}]"
        )));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in samples {
        if x >= lo && x <= hi {
            counts[(((x - lo) / width) as usize).min(bins - 1)] += 1;
        }
    }
    let total = samples.len().max(1) as f64;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(k, &c)| (lo + (k as f64 + 0.5) * width, c as f64 / (total * width)))
        .collect())
}
