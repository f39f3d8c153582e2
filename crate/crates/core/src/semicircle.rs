//! Stieltjes transform of the semicircle law and the deterministic control
//! quantities built from it.
//!
//! `m_sc(z)` is the solution of `m² + z m + 1 = 0` with `Im m · Im z > 0`.
//! Values in the lower half-plane are obtained by conjugating the
//! upper-half-plane value.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `m_sc` together with its first two derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Msc {
    pub m: Complex64,
    pub dm: Complex64,
    pub d2m: Complex64,
}

/// Deterministic control parameters `Ψ` and `Θ` of the local laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    pub psi: f64,
    pub theta: f64,
}

fn check_off_axis(z: Complex64) -> Result<()> {
    if z.im == 0.0 || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::RealAxis(z));
    }
    Ok(())
}

/// Upper-half-plane root. Both roots `r` and `1/r` of the quadratic are
/// formed and the one with positive imaginary part is kept.
fn upper_root(z: Complex64) -> Complex64 {
    debug_assert!(z.im > 0.0);
    let w = (z - 2.0).sqrt() * (z + 2.0).sqrt();
    // |z + w| >= 2 on the upper half-plane, so this division never cancels.
    let r = -2.0 / (z + w);
    let partner = r.inv();
    if r.im > 0.0 || (r.im == 0.0 && partner.im <= 0.0) {
        r
    } else {
        partner
    }
}

/// `m_sc(z)`; errors on the real axis.
pub fn m_sc(z: Complex64) -> Result<Complex64> {
    check_off_axis(z)?;
    Ok(if z.im > 0.0 {
        upper_root(z)
    } else {
        upper_root(z.conj()).conj()
    })
}

/// `m_sc` and its derivatives `m' = m²/(1−m²)`, `m'' = 2 m m'/(1−m²)²`.
pub fn evaluate(z: Complex64) -> Result<Msc> {
    let m = m_sc(z)?;
    let m2 = m * m;
    let one_minus = 1.0 - m2;
    let dm = m2 / one_minus;
    let d2m = 2.0 * m * dm / (one_minus * one_minus);
    Ok(Msc { m, dm, d2m })
}

/// Derivative of the requested order (0, 1 or 2) of `m_sc` at `z`.
pub fn stieltjes(z: Complex64, order: u8) -> Result<Complex64> {
    if order > 2 {
        return Err(Error::InvalidArgument(format!(
            "derivative order must be 0, 1 or 2, got {order}"
        )));
    }
    let v = evaluate(z)?;
    Ok(match order {
        0 => v.m,
        1 => v.dm,
        _ => v.d2m,
    })
}

/// Semicircle density `(1/2π)√(4−E²)` on `[−2, 2]`, zero elsewhere.
pub fn density(e: f64) -> f64 {
    if e.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - e * e).sqrt() / (2.0 * std::f64::consts::PI)
    }
}

/// Distance from `e` to the closest spectral edge.
pub fn kappa(e: f64) -> f64 {
    (e + 2.0).abs().min((e - 2.0).abs())
}

/// `Ψ = √(Im m/(N|η|)) + 1/(N|η|)` and `Θ = 1/(N|η|)`, with `Im m` taken
/// from the upper-half-plane value.
pub fn control_params(z: Complex64, n: usize) -> Result<ControlParams> {
    check_off_axis(z)?;
    if n == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let eta = z.im.abs();
    let im_m = upper_root(Complex64::new(z.re, eta)).im;
    let theta = 1.0 / (n as f64 * eta);
    Ok(ControlParams {
        psi: (im_m * theta).sqrt() + theta,
        theta,
    })
}

/// Membership in `D = {|E| ≤ 5, 0 < η ≤ 10}`.
pub fn in_domain_d(z: Complex64) -> bool {
    z.re.abs() <= 5.0 && z.im > 0.0 && z.im <= 10.0
}

/// Membership in `D′ = {|E| ≤ 5, N^{−1+τ} ≤ η ≤ 10}`.
pub fn in_domain_d_prime(z: Complex64, n: usize, tau: f64) -> bool {
    let lower = (n as f64).powf(-1.0 + tau);
    z.re.abs() <= 5.0 && z.im >= lower && z.im <= 10.0
}
