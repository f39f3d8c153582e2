//! Acceptance criteria C1–C11. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails. `ACCEPTANCE_ONLY=C1,C4` restricts the
//! run to a subset.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use wigner_clt::ensemble::{EnsembleSpec, EntryDist};
use wigner_clt::harness::{self, ExperimentResult, SpectraBatch};
use wigner_clt::locallaw::{self, LocalLawConfig};
use wigner_clt::profile::{KernelSpec, TraceKind, VarianceProfile};
use wigner_clt::semicircle;
use wigner_clt::spectral::test_function::Bump;
use wigner_clt::spectral::{self, HsOptions, TestFunction};
use wigner_clt::theory::{self, ContourSpec};

const SEED: u64 = 2024;

type Check = std::result::Result<String, String>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn ensure(cond: bool, msg: String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn bump(e0: f64, eta0: f64) -> TestFunction {
    TestFunction::new(Arc::new(Bump), e0, eta0).expect("bump test function")
}

fn flat(n: usize) -> Arc<VarianceProfile> {
    Arc::new(VarianceProfile::flat(n).expect("flat profile"))
}

fn within_time(start: Instant, limit: Duration, what: &str) -> std::result::Result<(), String> {
    let t = start.elapsed();
    ensure(t <= limit, format!("{what} took {t:.1?}, limit {limit:?}"))
}

// ---------------------------------------------------------------- C1

fn c1() -> Check {
    let start = Instant::now();
    let energies: Vec<f64> = (0..100).map(|i| -5.0 + 10.0 * i as f64 / 99.0).collect();
    let etas: Vec<f64> = (0..100).map(|j| 1e-6 * 1e7f64.powf(j as f64 / 99.0)).collect();
    let (mut worst_res, mut worst_d1, mut worst_d2) = (0.0f64, 0.0f64, 0.0f64);
    let mut branch_violations = 0usize;
    let mut min_abs_m = (f64::INFINITY, c(0.0, 0.0));
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let mut band_violations = 0usize;
    // Smallest eta at which some |E| <= 2 point leaves [1/3, 3].
    let mut first_bad_eta = f64::INFINITY;
    for &en in &energies {
        for &eta in &etas {
            let z = c(en, eta);
            let v = semicircle::evaluate(z).map_err(e)?;
            let m = v.m;
            worst_res = worst_res.max((m * m + z * m + 1.0).norm());
            if !(m.im > 0.0 && m.norm() <= 1.0) {
                branch_violations += 1;
            }
            if m.norm() < min_abs_m.0 {
                min_abs_m = (m.norm(), z);
            }
            // Fourth-order central differences along the real direction.
            let h = 1e-2 * eta.min(1.0);
            let d = |f: &dyn Fn(Complex64) -> Complex64| {
                (8.0 * (f(z + h) - f(z - h)) - (f(z + 2.0 * h) - f(z - 2.0 * h))) / (12.0 * h)
            };
            let fd1 = d(&|w| semicircle::m_sc(w).unwrap());
            let fd2 = d(&|w| semicircle::evaluate(w).unwrap().dm);
            worst_d1 = worst_d1.max((fd1 - v.dm).norm() / v.dm.norm());
            worst_d2 = worst_d2.max((fd2 - v.d2m).norm() / v.d2m.norm());

            if en.abs() <= 2.0 {
                let root = (semicircle::kappa(en) + eta).sqrt();
                for r in [m.im / root, (1.0 - m * m).norm() / root] {
                    lo = lo.min(r);
                    hi = hi.max(r);
                    if !(1.0 / 3.0..=3.0).contains(&r) {
                        band_violations += 1;
                        first_bad_eta = first_bad_eta.min(eta);
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let summary = format!(
        "residual {worst_res:.1e}, branch violations {branch_violations}, FD errors {worst_d1:.1e}/{worst_d2:.1e}, \
         min |m| {:.3} at {}, ratio range [{lo:.3}, {hi:.3}] on |E|<=2 with {band_violations} values outside [1/3,3] \
         (first at eta = {first_bad_eta:.3}), {elapsed:.1?}",
        min_abs_m.0, min_abs_m.1
    );
    let ok = worst_res < 1e-12
        && branch_violations == 0
        && worst_d1 < 1e-6
        && worst_d2 < 1e-6
        && min_abs_m.0 >= 0.2
        && band_violations == 0
        && elapsed <= Duration::from_secs(5);
    if ok {
        Ok(summary)
    } else {
        Err(summary)
    }
}

// ---------------------------------------------------------------- C2

fn c2() -> Check {
    let start = Instant::now();
    let n = 200;
    let s = VarianceProfile::flat(n).map_err(e)?;
    let nf = n as f64;
    let mut worst = 0.0f64;
    for k in 0..20 {
        let kf = k as f64;
        let z = c(-1.9 + 0.2 * kf, 0.05 + 0.1 * kf);
        let zp = match k % 3 {
            0 => z.conj(),
            1 => c(0.7 - 0.15 * kf, 0.3 + 0.05 * kf),
            _ => c(1.1 - 0.1 * kf, -0.2 - 0.08 * kf),
        };
        let a = semicircle::evaluate(z).map_err(e)?;
        let b = semicircle::evaluate(zp).map_err(e)?;
        let x = a.m * b.m;
        let rel = |got: Complex64, want: Complex64| (got - want).norm() / want.norm();
        let var = s.kernel_trace(z, zp, TraceKind::Variance).map_err(e)?;
        worst = worst.max(rel(var, a.dm * b.dm / ((1.0 - x) * (1.0 - x))));
        let bias = s.kernel_trace(z, zp, TraceKind::Bias).map_err(e)?;
        worst = worst.max(rel(bias, a.dm * a.m.powi(3) / (1.0 - a.m * a.m)));
        let tt = s.kernel_trace(z, zp, TraceKind::TTrace).map_err(e)?;
        worst = worst.max(rel(tt, x * x / (1.0 - x)));
        let t = s.t_theory_matrix(z, zp).map_err(e)?;
        let entry = x * x / ((1.0 - x) * nf);
        for j in 0..n {
            for i in 0..n {
                worst = worst.max(rel(t[(i, j)], entry));
            }
        }
    }
    ensure(worst < 1e-10, format!("worst relative error {worst:e}"))?;
    within_time(start, Duration::from_secs(5), "C2")?;
    Ok(format!("20 pairs, worst relative error {worst:.1e}"))
}

// ---------------------------------------------------------------- C3

fn c3() -> Check {
    let start = Instant::now();
    let n = 200;
    let ens = EnsembleSpec::new(1, EntryDist::Gaussian, flat(n), SEED).map_err(e)?;
    let h = ens.sample(0).map_err(e)?;
    let ev = spectral::eigenvalues(&h).map_err(e)?;
    let mut parts = Vec::new();
    for (e0, eta0) in [(0.0, 1.0), (1.2, 0.3)] {
        let tf = bump(e0, eta0);
        let exact: f64 = ev.iter().map(|&l| tf.f(l)).sum();
        let hs = spectral::trace_f_hs(&h, &tf, &HsOptions::default()).map_err(e)?;
        let rel = (hs.value - exact).abs() / exact.abs();
        ensure(rel < 1e-3, format!("E0 = {e0}: 2D quadrature {} vs {exact}", hs.value))?;
        parts.push(format!("E0={e0}: rel {rel:.1e}"));
    }
    within_time(start, Duration::from_secs(120), "C3")?;
    Ok(parts.join(", "))
}

// ---------------------------------------------------------------- C4

fn c4() -> Check {
    let start = Instant::now();
    let n = 2000;
    let tf = bump(0.0, (n as f64).powf(-0.3));
    let contour = ContourSpec::new(&tf, n, None).map_err(e)?;
    let pred = theory::predict(&tf, &flat(n), 1, 0.0, &contour).map_err(e)?;
    let limit = theory::bulk_limit(&tf, 1).map_err(e)?;
    let rel = (pred.variance - limit).abs() / limit;
    ensure(rel < 0.10, format!("V = {}, bulk limit {limit}, rel {rel}", pred.variance))?;
    within_time(start, Duration::from_secs(300), "C4")?;
    Ok(format!(
        "V = {:.6} vs bulk limit {limit:.6} (rel {rel:.1e}); value on the theorem's contours {:.4}",
        pred.variance, pred.variance_at_contour
    ))
}

// ------------------------------------------------------------- C5–C7

const MC_N: usize = 400;
const MC_M: usize = 2000;

struct McState {
    gaussian: SpectraBatch,
    beta1: ExperimentResult,
    elapsed: Duration,
}

fn gaussian_state() -> &'static std::result::Result<McState, String> {
    static STATE: OnceLock<std::result::Result<McState, String>> = OnceLock::new();
    STATE.get_or_init(|| {
        let start = Instant::now();
        let ens = EnsembleSpec::new(1, EntryDist::Gaussian, flat(MC_N), SEED).map_err(e)?;
        let batch = harness::sample_spectra(&ens, MC_M, 0).map_err(e)?;
        let beta1 = analyze(&batch, &ens, 0.5)?;
        Ok(McState {
            gaussian: batch,
            beta1,
            elapsed: start.elapsed(),
        })
    })
}

fn analyze(batch: &SpectraBatch, ens: &EnsembleSpec, eta0: f64) -> std::result::Result<ExperimentResult, String> {
    let cfg = harness::ExperimentConfig {
        ensemble: ens.clone(),
        test_function: bump(0.0, eta0),
        samples: batch.spectra.len(),
        tau: None,
        threads: 0,
        lambdas: vec![0.0, 0.5, 1.0, 2.0],
    };
    let (pred, warnings) = harness::theory_for(&cfg).map_err(e)?;
    harness::analyze(batch, &cfg.test_function, pred, &cfg.lambdas, warnings).map_err(e)
}

fn c5() -> Check {
    let st = gaussian_state().as_ref().map_err(|m| m.clone())?;
    let r = &st.beta1;
    ensure(
        (0.85..=1.15).contains(&r.variance_ratio),
        format!("variance ratio {}", r.variance_ratio),
    )?;
    ensure(r.ks.p_value > 0.01, format!("KS p = {}", r.ks.p_value))?;
    ensure(r.bias_z.abs() <= 3.0, format!("bias z = {}", r.bias_z))?;
    let cf = r.char_function.iter().find(|row| row.lambda == 1.0).expect("lambda 1");
    let cf_gap = (cf.empirical.re - cf.gaussian).abs();
    ensure(
        cf_gap <= 3.0 * cf.se_re + 0.02,
        format!("characteristic function at 1: {} vs {}", cf.empirical, cf.gaussian),
    )?;
    ensure(st.elapsed <= Duration::from_secs(1800), format!("took {:?}", st.elapsed))?;
    Ok(format!(
        "var/V = {:.4} +- {:.4} (V = {:.5}), KS p = {:.3}, mean {:.5} vs B = {:.5} (z = {:.2}), phi(1) gap {cf_gap:.4}; {:.0?}",
        r.variance_ratio, r.variance_ratio_se, r.theory.variance, r.ks.p_value, r.moments.mean, r.theory.bias, r.bias_z, st.elapsed
    ))
}

fn c6() -> Check {
    let st = gaussian_state().as_ref().map_err(|m| m.clone())?;
    let ens = EnsembleSpec::new(2, EntryDist::Gaussian, flat(MC_N), SEED).map_err(e)?;
    let batch = harness::sample_spectra(&ens, MC_M, 0).map_err(e)?;
    let r2 = analyze(&batch, &ens, 0.5)?;
    let ratio = st.beta1.moments.variance / r2.moments.variance;
    ensure((1.7..=2.3).contains(&ratio), format!("empirical variance ratio {ratio}"))?;
    Ok(format!(
        "Var(beta=1)/Var(beta=2) = {ratio:.4}; theory ratio {:.4}; beta=2 var/V = {:.4}",
        st.beta1.theory.variance / r2.theory.variance,
        r2.variance_ratio
    ))
}

fn c7() -> Check {
    let st = gaussian_state().as_ref().map_err(|m| m.clone())?;
    let gauss_ens = EnsembleSpec::new(1, EntryDist::Gaussian, flat(MC_N), SEED).map_err(e)?;
    let gauss = analyze(&st.gaussian, &gauss_ens, 1.0)?;
    let rad_ens = EnsembleSpec::new(1, EntryDist::Rademacher, flat(MC_N), SEED).map_err(e)?;
    let k4 = rad_ens.fourth_cumulant_sum();
    ensure((k4 + 2.0).abs() < 1e-9, format!("k4 = {k4}, expected -2"))?;
    let batch = harness::sample_spectra(&rad_ens, MC_M, 0).map_err(e)?;
    let rad = analyze(&batch, &rad_ens, 1.0)?;
    let theory_diff = rad.theory.variance - gauss.theory.variance;
    let emp_diff = rad.moments.variance - gauss.moments.variance;
    ensure(
        theory_diff.signum() == emp_diff.signum(),
        format!("signs differ: empirical {emp_diff}, theory {theory_diff}"),
    )?;
    let rel = (emp_diff - theory_diff).abs() / theory_diff.abs();
    ensure(rel <= 0.5, format!("empirical {emp_diff} vs theory {theory_diff}"))?;
    Ok(format!(
        "k4 = {k4}; Var(Rademacher) - Var(Gaussian): empirical {emp_diff:.5}, theory {theory_diff:.5} (rel gap {rel:.2})"
    ))
}

// ---------------------------------------------------------------- C8

fn c8() -> Check {
    let n = 1000;
    let eta0 = (n as f64).powf(-0.4);
    let ens = EnsembleSpec::new(1, EntryDist::Gaussian, flat(n), SEED).map_err(e)?;
    let batch = harness::sample_spectra(&ens, MC_M, 0).map_err(e)?;
    let tf = bump(2.0, eta0);
    let cfg = harness::ExperimentConfig {
        ensemble: ens,
        test_function: tf.clone(),
        samples: MC_M,
        tau: None,
        threads: 0,
        lambdas: vec![],
    };
    let (pred, warnings) = harness::theory_for(&cfg).map_err(e)?;
    let r = harness::analyze(&batch, &tf, pred, &[], warnings).map_err(e)?;
    let g0 = tf.g(0.0);
    let target = g0 / 4.0;
    let tol = 3.0 * r.moments.mean_se + 0.15 * g0.abs();
    let gap = (r.moments.mean - target).abs();
    ensure(gap <= tol, format!("mean {} vs g(0)/4 = {target}, tolerance {tol}", r.moments.mean))?;
    Ok(format!(
        "mean {:.4} +- {:.4} vs g(0)/4 = {target:.4} (gap {gap:.4} <= {tol:.4}); finite-eta0 prediction B = {:.4}",
        r.moments.mean, r.moments.mean_se, pred.bias
    ))
}

// ---------------------------------------------------------------- C9

fn c9() -> Check {
    let cfg = LocalLawConfig::default();
    let mut medians = Vec::new();
    let mut parts = Vec::new();
    let mut violations = 0usize;
    for n in [250usize, 500, 1000, 2000] {
        let ens = EnsembleSpec::new(1, EntryDist::Gaussian, flat(n), SEED).map_err(e)?;
        let study = harness::local_law_study(&ens, 20, &cfg, 0).map_err(e)?;
        let band = cfg.band(n);
        let (mut total, mut over) = (0usize, 0usize);
        let mut worst = (String::new(), 0.0f64, c(0.0, 0.0));
        for (_, reports) in &study {
            for r in reports {
                for (name, &v) in &r.ratios {
                    total += 1;
                    if !(v.is_finite() && v <= band) {
                        over += 1;
                    }
                    if !(v <= worst.1) {
                        worst = (name.clone(), v, r.z);
                    }
                }
            }
        }
        violations += over;
        let med = harness::median_ratio(&study, "entrywise").ok_or("no entrywise ratios")?;
        parts.push(format!(
            "N={n}: {over}/{total} ratios above band {band:.2}, max {}={:.2} at {:.4}, median entrywise {med:.3}",
            worst.0, worst.1, worst.2
        ));
        medians.push(med);
    }
    let growth: Vec<f64> = medians.windows(2).map(|w| w[1] / w[0]).collect();
    let growth_ok = growth.iter().all(|&g| g <= 1.5);
    parts.push(format!("median growth per doubling {growth:.3?}"));
    let summary = parts.join("; ");
    if violations == 0 && growth_ok {
        Ok(summary)
    } else {
        Err(summary)
    }
}

// ---------------------------------------------------------------- C10

fn c10() -> Check {
    let n = 1000;
    let band = 5.0 * (n as f64).powf(0.05);
    let z = c(0.2, 0.1);
    let zp = z.conj();
    let kernel = KernelSpec::Cosine { amplitude: 0.5 };
    let profiles = [
        ("flat", flat(n)),
        (
            "kernel",
            Arc::new(VarianceProfile::from_kernel(n, |x, y| kernel.eval(x, y), 1e-13).map_err(e)?),
        ),
    ];
    let mut parts = Vec::new();
    for (name, s) in profiles {
        let ens = EnsembleSpec::new(1, EntryDist::Gaussian, s.clone(), SEED).map_err(e)?;
        let h = ens.sample(0).map_err(e)?;
        let rep = locallaw::check_t_laws(&h, &s, z, zp, 0.1, band).map_err(e)?;
        ensure(rep.pass(), format!("{name}: {:?} exceed {band}", rep.ratios))?;
        let d = locallaw::deterministic_identities(&s, z, zp).map_err(e)?;
        ensure(
            d.t1 < 1e-10 && d.t_theory_relation < 1e-10,
            format!("{name}: deterministic residuals {d:?}"),
        )?;
        let ratios: Vec<String> = rep.ratios.iter().map(|(k, v)| format!("{k} {v:.3}")).collect();
        parts.push(format!(
            "{name}: {} ; T1 {:.1e}, limit relation {:.1e}",
            ratios.join(", "),
            d.t1,
            d.t_theory_relation
        ));
    }
    Ok(parts.join(" | "))
}

// ---------------------------------------------------------------- C11

fn run_cli(cmd: &str, config: &Path, out: &Path, threads: &str) -> std::result::Result<i32, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_wigner-clt"))
        .args([cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("WIGNER_CLT_THREADS", threads)
        .output()
        .map_err(e)?;
    o.status.code().ok_or_else(|| format!("{cmd} terminated by a signal"))
}

fn dir_files(dir: &Path) -> std::result::Result<Vec<(String, Vec<u8>)>, String> {
    let mut v = Vec::new();
    for entry in fs::read_dir(dir).map_err(e)? {
        let entry = entry.map_err(e)?;
        v.push((entry.file_name().to_string_lossy().into_owned(), fs::read(entry.path()).map_err(e)?));
    }
    v.sort();
    Ok(v)
}

fn c11() -> Check {
    let tmp = std::env::temp_dir().join(format!("wigner-clt-acceptance-{}", std::process::id()));
    let _ = fs::remove_dir_all(&tmp);
    fs::create_dir_all(&tmp).map_err(e)?;
    let config = tmp.join("config.json");
    fs::write(
        &config,
        r#"{
            "seed": 77,
            "n": 120,
            "profile": {"kind": "kernel", "kernel": {"type": "band", "amplitude": 1.0, "width": 0.2}},
            "test_function": {"shape": {"type": "bump"}, "e0": 0.3, "eta0": 0.6},
            "mc": {"samples": 200},
            "locallaw": {"samples": 3, "n_list": [80, 120]},
            "sweep": {"n_list": [60, 90], "samples": 100}
        }"#,
    )
    .map_err(e)?;
    let mut checked = 0usize;
    for cmd in ["validate-profile", "theory", "mc", "locallaw", "sweep", "meso-limits"] {
        let mut outputs = Vec::new();
        for (run, threads) in [("a", "1"), ("b", "1"), ("c", "8")] {
            let out = tmp.join(format!("{cmd}-{run}"));
            let code = run_cli(cmd, &config, &out, threads)?;
            ensure(code == 0 || code == 1, format!("{cmd} exited with {code}"))?;
            outputs.push((code, dir_files(&out)?));
        }
        ensure(!outputs[0].1.is_empty(), format!("{cmd} wrote nothing"))?;
        for other in &outputs[1..] {
            ensure(other.0 == outputs[0].0, format!("{cmd}: exit codes differ"))?;
            ensure(other.1.len() == outputs[0].1.len(), format!("{cmd}: file sets differ"))?;
            for ((na, a), (nb, b)) in outputs[0].1.iter().zip(&other.1) {
                ensure(na == nb && a == b, format!("{cmd}: {na} differs"))?;
                let text = String::from_utf8_lossy(a);
                ensure(
                    text.contains("config_hash") && text.contains(wigner_clt::VERSION),
                    format!("{cmd}: {na} lacks hash or version"),
                )?;
                checked += 1;
            }
        }
    }
    let _ = fs::remove_dir_all(&tmp);
    Ok(format!(
        "six commands, three runs each (threads 1, 1, 8): {checked} file comparisons identical"
    ))
}

fn main() {
    let only: Option<Vec<String>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').map(|s| s.trim().to_uppercase()).collect());
    let criteria: [(&str, &str, fn() -> Check); 11] = [
        ("C1", "semicircle suite", c1),
        ("C2", "rank-one oracle", c2),
        ("C3", "Helffer-Sjostrand cross-check", c3),
        ("C4", "bulk universality", c4),
        ("C5", "CLT Monte Carlo", c5),
        ("C6", "beta scaling", c6),
        ("C7", "k4 sensitivity", c7),
        ("C8", "edge mean", c8),
        ("C9", "local laws", c9),
        ("C10", "two-point function", c10),
        ("C11", "reproducibility", c11),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        if let Some(sel) = &only {
            if !sel.iter().any(|s| s == id) {
                continue;
            }
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let t = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {id} {name}: {detail} [{t:.1?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id} {name}: {why} [{t:.1?}]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
