use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use wigner_clt::harness::{self, CharFunctionRow, ExperimentConfig, KsResult, Moments, SweepRow};
use wigner_clt::locallaw::{self, DeterministicIdentities, LawReport, LawRow};
use wigner_clt::profile::{ProfileReport, StabilityReport};
use wigner_clt::theory::{self, ContourSpec, EdgeLimit, EdgeSide, TheoryPrediction};

use crate::config::{Command, RunConfig};
use crate::error::CliError;
use crate::report::{emit_report, json_payload, num, Meta, Payload};

/// Files written by a command and whether its checks passed.
#[derive(Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub passed: bool,
    pub message: String,
}

pub fn execute(command: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate(command)?;
    let meta = Meta::new(command.name(), cfg.hash());
    let out = cfg.output_dir.as_path();
    match command {
        Command::ValidateProfile => validate_profile(cfg, &meta, out),
        Command::Theory => theory_cmd(cfg, &meta, out),
        Command::Mc => mc(cfg, &meta, out),
        Command::Locallaw => locallaw_cmd(cfg, &meta, out),
        Command::Sweep => sweep(cfg, &meta, out),
        Command::MesoLimits => meso_limits(cfg, &meta, out),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProfileOutput {
    pub report: ProfileReport,
    /// Stability constants at `(z, z̄)` for a few reference points.
    pub stability: Vec<(Complex64, StabilityReport)>,
}

fn validate_profile(cfg: &RunConfig, meta: &Meta, out: &Path) -> Result<Outcome, CliError> {
    let profile = cfg.profile(cfg.n)?;
    let report = profile.validate();
    let stability = [Complex64::new(0.2, 0.1), Complex64::new(0.0, 1.0), Complex64::new(1.9, 0.05)]
        .into_iter()
        .map(|z| Ok((z, profile.stability_report(z, z.conj())?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let passed = report.pass;
    let res = ProfileOutput { report, stability };
    let file = emit_report(out, "profile_report.json", &json_payload(&res)?, meta)?;
    Ok(Outcome {
        files: vec![file],
        passed,
        message: if passed {
            "profile satisfies the normalization, symmetry and flatness checks".into()
        } else {
            "profile failed validation; see profile_report.json".into()
        },
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TheoryOutput {
    pub variance: f64,
    pub bias: f64,
    pub k4: f64,
    pub tau: f64,
    pub quadrature_error_estimate: f64,
    pub config_hash: String,
    pub n: usize,
    pub eta0: f64,
    pub details: TheoryPrediction,
}

fn prediction(cfg: &RunConfig, n: usize) -> Result<(TheoryPrediction, f64), CliError> {
    let tf = cfg.test_function(n)?;
    let ens = cfg.ensemble(n)?;
    let contour = ContourSpec::new(&tf, n, cfg.tau)?;
    let pred = theory::predict(&tf, &ens.profile, ens.beta, ens.fourth_cumulant_sum(), &contour)?;
    Ok((pred, tf.eta0))
}

fn theory_cmd(cfg: &RunConfig, meta: &Meta, out: &Path) -> Result<Outcome, CliError> {
    let (pred, eta0) = prediction(cfg, cfg.n)?;
    let res = TheoryOutput {
        variance: pred.variance,
        bias: pred.bias,
        k4: pred.k4,
        tau: pred.tau,
        quadrature_error_estimate: pred.quadrature_error_estimate,
        config_hash: meta.config_hash.clone(),
        n: cfg.n,
        eta0,
        details: pred,
    };
    let file = emit_report(out, "theory.json", &json_payload(&res)?, meta)?;
    Ok(Outcome {
        files: vec![file],
        passed: true,
        message: format!("V(f) = {}, B(f) = {}", res.variance, res.bias),
    })
}

/// Everything of an experiment except the per-sample table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub n: usize,
    pub beta: u8,
    pub eta0: f64,
    pub samples_requested: usize,
    pub samples_used: usize,
    pub failures: Vec<(u64, String)>,
    pub moments: Moments,
    pub theory: TheoryPrediction,
    pub variance_ratio: f64,
    pub variance_ratio_se: f64,
    pub bias_z: f64,
    pub ks: KsResult,
    pub char_function: Vec<CharFunctionRow>,
    pub warnings: Vec<String>,
}

fn experiment(cfg: &RunConfig, n: usize, samples: usize) -> Result<ExperimentConfig, CliError> {
    Ok(ExperimentConfig {
        ensemble: cfg.ensemble(n)?,
        test_function: cfg.test_function(n)?,
        samples,
        tau: cfg.tau,
        threads: cfg.effective_threads()?,
        lambdas: cfg.mc.lambdas.clone(),
    })
}

fn mc(cfg: &RunConfig, meta: &Meta, out: &Path) -> Result<Outcome, CliError> {
    let exp = experiment(cfg, cfg.n, cfg.mc.samples)?;
    let eta0 = exp.test_function.eta0;
    let r = harness::run_experiment(&exp)?;
    let sd = r.theory.variance.sqrt();
    let standardized: Vec<f64> = r
        .statistics
        .iter()
        .map(|s| (s.centered - r.moments.mean) / sd)
        .collect();
    let rows: Vec<Vec<String>> = r
        .statistics
        .iter()
        .zip(&standardized)
        .map(|(s, z)| vec![s.index.to_string(), num(s.raw), num(s.centered), num(*z)])
        .collect();
    let cf_rows: Vec<Vec<String>> = r
        .char_function
        .iter()
        .map(|c| {
            vec![
                num(c.lambda),
                num(c.empirical.re),
                num(c.empirical.im),
                num(c.se_re),
                num(c.se_im),
                num(c.gaussian),
            ]
        })
        .collect();
    let hist = harness::histogram(&standardized, -5.0, 5.0, cfg.mc.histogram_bins.max(1))?;
    let qq = harness::qq_points(&standardized);
    let summary = McSummary {
        n: r.n,
        beta: r.beta,
        eta0,
        samples_requested: r.samples_requested,
        samples_used: r.samples_used,
        failures: r.failures.clone(),
        moments: r.moments,
        theory: r.theory,
        variance_ratio: r.variance_ratio,
        variance_ratio_se: r.variance_ratio_se,
        bias_z: r.bias_z,
        ks: r.ks,
        char_function: r.char_function.clone(),
        warnings: r.warnings.clone(),
    };
    let files = vec![
        emit_report(
            out,
            "mc_samples.csv",
            &Payload::Csv {
                header: &["index", "raw", "centered", "standardized"],
                rows: &rows,
            },
            meta,
        )?,
        emit_report(out, "mc_summary.json", &json_payload(&summary)?, meta)?,
        emit_report(
            out,
            "mc_char_function.csv",
            &Payload::Csv {
                header: &["lambda", "re", "im", "se_re", "se_im", "gaussian"],
                rows: &cf_rows,
            },
            meta,
        )?,
        emit_report(
            out,
            "mc_histogram.dat",
            &Payload::Gnuplot {
                columns: ("standardized", "density"),
                points: &hist,
            },
            meta,
        )?,
        emit_report(
            out,
            "mc_qq.dat",
            &Payload::Gnuplot {
                columns: ("normal_quantile", "sample_quantile"),
                points: &qq,
            },
            meta,
        )?,
    ];
    Ok(Outcome {
        files,
        passed: true,
        message: format!(
            "variance ratio {:.4} +- {:.4}, bias z {:.2}, KS p {:.3}",
            r.variance_ratio, r.variance_ratio_se, r.bias_z, r.ks.p_value
        ),
    })
}

/// Per-dimension aggregate of a local-law study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawSummary {
    pub n: usize,
    pub band: f64,
    pub probes: usize,
    pub samples: usize,
    pub max_ratio: std::collections::BTreeMap<String, f64>,
    pub median_entrywise: f64,
    pub two_point: Vec<LawReport>,
    pub trace_identities: Vec<(String, f64)>,
    pub deterministic: Vec<DeterministicIdentities>,
    pub all_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalLawOutput {
    pub per_n: Vec<LawSummary>,
    /// Ratios of consecutive median entrywise ratios.
    pub median_growth: Vec<f64>,
    pub max_median_growth: f64,
    pub passed: bool,
}

/// Identities derived from exact algebra must hold to this relative accuracy.
pub const DETERMINISTIC_TOL: f64 = 1e-10;

fn law_csv_row(r: &LawRow) -> Vec<String> {
    let (zp_re, zp_im) = r.zp.map(|w| (num(w.re), num(w.im))).unwrap_or_default();
    vec![
        r.n.to_string(),
        r.seed.to_string(),
        r.sample.to_string(),
        num(r.z.re),
        num(r.z.im),
        zp_re,
        zp_im,
        r.check.clone(),
        num(r.ratio),
        num(r.band),
        r.pass.to_string(),
    ]
}

fn extra_row(n: usize, seed: u64, z: Complex64, zp: Complex64, check: &str, ratio: f64, band: f64) -> LawRow {
    LawRow {
        n,
        seed,
        sample: 0,
        z,
        zp: Some(zp),
        check: check.to_string(),
        ratio,
        band,
        pass: ratio.is_finite() && ratio <= band,
    }
}

fn locallaw_cmd(cfg: &RunConfig, meta: &Meta, out: &Path) -> Result<Outcome, CliError> {
    let sec = &cfg.locallaw;
    let threads = cfg.effective_threads()?;
    let n_list = if sec.n_list.is_empty() { vec![cfg.n] } else { sec.n_list.clone() };
    let mut rows = Vec::new();
    let mut per_n = Vec::new();
    for &n in &n_list {
        let ens = cfg.ensemble(n)?;
        let band = sec.grid.band(n);
        let study = harness::local_law_study(&ens, sec.samples, &sec.grid, threads)?;
        let mut law_rows = harness::law_rows(n, cfg.seed, &study);

        let h = ens.sample(0)?;
        let mut two_point = Vec::new();
        let mut trace_identities = Vec::new();
        let mut deterministic = Vec::new();
        for p in &sec.two_point {
            let rep = locallaw::check_t_laws(&h, &ens.profile, p.z, p.zp, sec.grid.domain_tau, band)?;
            law_rows.extend(LawRow::from_report(&rep, n, cfg.seed, 0));
            two_point.push(rep);
            if h.is_real() {
                let t = locallaw::check_trace_identities(&h, &ens.profile, p.z, p.zp)?;
                law_rows.push(extra_row(n, cfg.seed, p.z, p.zp, &t.name, t.check.ratio(), band));
                trace_identities.push((t.name.clone(), t.check.ratio()));
            }
            let d = locallaw::deterministic_identities(&ens.profile, p.z, p.zp)?;
            law_rows.push(extra_row(n, cfg.seed, p.z, p.zp, "T1_identity", d.t1, DETERMINISTIC_TOL));
            law_rows.push(extra_row(
                n,
                cfg.seed,
                p.z,
                p.zp,
                "T_theory_relation",
                d.t_theory_relation,
                DETERMINISTIC_TOL,
            ));
            deterministic.push(d);
        }
        let mut max_ratio = std::collections::BTreeMap::new();
        for r in &law_rows {
            let e = max_ratio.entry(r.check.clone()).or_insert(0.0f64);
            *e = e.max(r.ratio);
        }
        per_n.push(LawSummary {
            n,
            band,
            probes: sec.grid.probes(n).len(),
            samples: sec.samples,
            max_ratio,
            median_entrywise: harness::median_ratio(&study, "entrywise").unwrap_or(f64::NAN),
            two_point,
            trace_identities,
            deterministic,
            all_pass: law_rows.iter().all(|r| r.pass),
        });
        rows.extend(law_rows);
    }
    let median_growth: Vec<f64> = per_n
        .windows(2)
        .map(|w| w[1].median_entrywise / w[0].median_entrywise)
        .collect();
    let growth_ok = median_growth.iter().all(|g| *g <= sec.max_median_growth);
    let passed = growth_ok && per_n.iter().all(|s| s.all_pass);
    let csv_rows: Vec<Vec<String>> = rows.iter().map(law_csv_row).collect();
    let res = LocalLawOutput {
        per_n,
        median_growth,
        max_median_growth: sec.max_median_growth,
        passed,
    };
    let files = vec![
        emit_report(
            out,
            "locallaw.csv",
            &Payload::Csv {
                header: &[
                    "n", "seed", "sample", "z_re", "z_im", "zp_re", "zp_im", "check", "ratio", "band", "pass",
                ],
                rows: &csv_rows,
            },
            meta,
        )?,
        emit_report(out, "locallaw_summary.json", &json_payload(&res)?, meta)?,
    ];
    let failing = rows.iter().filter(|r| !r.pass).count();
    Ok(Outcome {
        files,
        passed,
        message: format!(
            "{} checks, {failing} outside their band, median growth {:?}",
            rows.len(),
            res.median_growth
        ),
    })
}

fn sweep(cfg: &RunConfig, meta: &Meta, out: &Path) -> Result<Outcome, CliError> {
    let samples = cfg.sweep.samples;
    let table: Vec<SweepRow> = harness::convergence_sweep(
        |n| experiment(cfg, n, samples).map_err(|e| wigner_clt::Error::InvalidArgument(e.to_string())),
        &cfg.sweep.n_list,
    )?;
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                num(r.theory_variance),
                num(r.variance_ratio),
                num(r.variance_ratio_se),
                num(r.bias_z),
                num(r.ks_p),
            ]
        })
        .collect();
    let points: Vec<(f64, f64)> = table.iter().map(|r| (r.n as f64, r.variance_ratio)).collect();
    let files = vec![
        emit_report(
            out,
            "sweep.csv",
            &Payload::Csv {
                header: &["n", "theory_variance", "variance_ratio", "variance_ratio_se", "bias_z", "ks_p"],
                rows: &rows,
            },
            meta,
        )?,
        emit_report(out, "sweep.json", &json_payload(&table)?, meta)?,
        emit_report(
            out,
            "sweep.dat",
            &Payload::Gnuplot {
                columns: ("n", "variance_ratio"),
                points: &points,
            },
            meta,
        )?,
    ];
    Ok(Outcome {
        files,
        passed: true,
        message: format!("{} dimensions swept", table.len()),
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MesoOutput {
    pub n: usize,
    pub e0: f64,
    pub eta0: f64,
    pub beta: u8,
    pub prediction: TheoryPrediction,
    /// Present for `|E₀| < 2`.
    pub bulk_variance: Option<f64>,
    /// Present for `E₀ = ±2`.
    pub edge: Option<EdgeLimit>,
    /// `|V(f) − limit| / limit` for the applicable limit.
    pub variance_gap: Option<f64>,
}

fn meso_limits(cfg: &RunConfig, meta: &Meta, out: &Path) -> Result<Outcome, CliError> {
    let tf = cfg.test_function(cfg.n)?;
    let (pred, eta0) = prediction(cfg, cfg.n)?;
    let e0 = tf.e0;
    let edge_side = if (e0 - 2.0).abs() < 1e-12 {
        Some(EdgeSide::Upper)
    } else if (e0 + 2.0).abs() < 1e-12 {
        Some(EdgeSide::Lower)
    } else {
        None
    };
    let bulk_variance = if e0.abs() < 2.0 {
        Some(theory::bulk_limit(&tf, cfg.beta)?)
    } else {
        None
    };
    let edge = edge_side.map(|s| theory::edge_limit(&tf, cfg.beta, s)).transpose()?;
    let limit = bulk_variance.or(edge.map(|e| e.variance));
    let res = MesoOutput {
        n: cfg.n,
        e0,
        eta0,
        beta: cfg.beta,
        prediction: pred,
        bulk_variance,
        edge,
        variance_gap: limit.map(|l| (pred.variance - l).abs() / l),
    };
    let file = emit_report(out, "meso_limits.json", &json_payload(&res)?, meta)?;
    Ok(Outcome {
        files: vec![file],
        passed: true,
        message: match limit {
            Some(l) => format!("V(f) = {}, universal limit {l}", pred.variance),
            None => format!("V(f) = {}; E0 = {e0} is neither bulk nor edge", pred.variance),
        },
    })
}
