//! Compactly supported C² test functions `g` and their scaled versions
//! `f(x) = g((x − E₀)/η₀)`.

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A C² profile with explicit derivatives and compact support.
pub trait Shape: Send + Sync + Debug {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;
    /// Closed interval outside which the shape vanishes.
    fn support(&self) -> (f64, f64);
    /// Interior points where the second derivative is not smooth.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Quintic smoothstep `6t⁵ − 15t⁴ + 10t³` and its first two derivatives,
/// clamped to `[0, 1]`.
pub(crate) fn smoothstep(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
        let ds = 30.0 * t * t * (t - 1.0) * (t - 1.0);
        let d2s = 60.0 * t * (2.0 * t - 1.0) * (t - 1.0);
        (s, ds, d2s)
    }
}

/// `(1 − x²)³` on `[−1, 1]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bump;

impl Shape for Bump {
    fn value(&self, x: f64) -> f64 {
        if x.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - x * x).powi(3)
        }
    }
    fn d1(&self, x: f64) -> f64 {
        if x.abs() >= 1.0 {
            0.0
        } else {
            -6.0 * x * (1.0 - x * x).powi(2)
        }
    }
    fn d2(&self, x: f64) -> f64 {
        if x.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - x * x) * (30.0 * x * x - 6.0)
        }
    }
    fn support(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }
}

/// `e^{−x²/2}` multiplied by a smoothstep taper that falls from 1 to 0 on
/// `cutoff − 1 ≤ |x| ≤ cutoff`.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedGaussian {
    pub cutoff: f64,
}

impl TruncatedGaussian {
    fn taper(&self, ax: f64) -> (f64, f64, f64) {
        let (s, ds, d2s) = smoothstep(ax - (self.cutoff - 1.0));
        (1.0 - s, -ds, -d2s)
    }

    /// Value and derivatives for `x ≥ 0`.
    fn right(&self, x: f64) -> (f64, f64, f64) {
        if x >= self.cutoff {
            return (0.0, 0.0, 0.0);
        }
        let g = (-0.5 * x * x).exp();
        let (g1, g2) = (-x * g, (x * x - 1.0) * g);
        let (t, t1, t2) = self.taper(x);
        (g * t, g1 * t + g * t1, g2 * t + 2.0 * g1 * t1 + g * t2)
    }
}

impl Shape for TruncatedGaussian {
    fn value(&self, x: f64) -> f64 {
        self.right(x.abs()).0
    }
    fn d1(&self, x: f64) -> f64 {
        x.signum() * self.right(x.abs()).1
    }
    fn d2(&self, x: f64) -> f64 {
        self.right(x.abs()).2
    }
    fn support(&self) -> (f64, f64) {
        (-self.cutoff, self.cutoff)
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![-(self.cutoff - 1.0), self.cutoff - 1.0]
    }
}

/// `cos⁴(πx/2)` on `[−1, 1]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CosineWindow;

impl Shape for CosineWindow {
    fn value(&self, x: f64) -> f64 {
        if x.abs() >= 1.0 {
            0.0
        } else {
            (std::f64::consts::FRAC_PI_2 * x).cos().powi(4)
        }
    }
    fn d1(&self, x: f64) -> f64 {
        if x.abs() >= 1.0 {
            return 0.0;
        }
        let k = std::f64::consts::FRAC_PI_2;
        let (s, c) = (k * x).sin_cos();
        -4.0 * k * c.powi(3) * s
    }
    fn d2(&self, x: f64) -> f64 {
        if x.abs() >= 1.0 {
            return 0.0;
        }
        let k = std::f64::consts::FRAC_PI_2;
        let (s, c) = (k * x).sin_cos();
        4.0 * k * k * (3.0 * c * c * s * s - c.powi(4))
    }
    fn support(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }
}

/// Serializable name of a built-in shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ShapeSpec {
    Bump,
    TruncatedGaussian {
        #[serde(default = "default_cutoff")]
        cutoff: f64,
    },
    CosineWindow,
}

fn default_cutoff() -> f64 {
    5.0
}

impl ShapeSpec {
    pub fn build(&self) -> Result<Arc<dyn Shape>> {
        Ok(match *self {
            ShapeSpec::Bump => Arc::new(Bump),
            ShapeSpec::CosineWindow => Arc::new(CosineWindow),
            ShapeSpec::TruncatedGaussian { cutoff } => {
                if !(cutoff >= 2.0 && cutoff.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "gaussian cutoff must be at least 2, got {cutoff}"
                    )));
                }
                Arc::new(TruncatedGaussian { cutoff })
            }
        })
    }
}

/// Serializable test-function description used by configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    pub shape: ShapeSpec,
    pub e0: f64,
    pub eta0: f64,
    /// Multiplies `g`.
    #[serde(default = "one")]
    pub amplitude: f64,
    /// `g(u) = amplitude · shape(u / width)`.
    #[serde(default = "one")]
    pub width: f64,
}

fn one() -> f64 {
    1.0
}

impl TestFunctionSpec {
    pub fn build(&self) -> Result<TestFunction> {
        TestFunction::with_affine(self.shape.build()?, self.amplitude, self.width, self.e0, self.eta0)
    }
}

/// `f(x) = g((x − E₀)/η₀)` with `g(u) = A · h(u / w)` for a [`Shape`] `h`.
#[derive(Debug, Clone)]
pub struct TestFunction {
    shape: Arc<dyn Shape>,
    amplitude: f64,
    width: f64,
    pub e0: f64,
    pub eta0: f64,
}

impl TestFunction {
    pub fn new(shape: Arc<dyn Shape>, e0: f64, eta0: f64) -> Result<Self> {
        Self::with_affine(shape, 1.0, 1.0, e0, eta0)
    }

    pub fn with_affine(
        shape: Arc<dyn Shape>,
        amplitude: f64,
        width: f64,
        e0: f64,
        eta0: f64,
    ) -> Result<Self> {
        if !(eta0 > 0.0 && eta0.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta0 must be positive, got {eta0}")));
        }
        if !(width > 0.0 && width.is_finite()) || !amplitude.is_finite() || !e0.is_finite() {
            return Err(Error::InvalidArgument("amplitude, width and e0 must be finite, width positive".into()));
        }
        let (a, b) = shape.support();
        if !(a < b) {
            return Err(Error::InvalidArgument(format!("empty support [{a}, {b}]")));
        }
        validate_derivatives(shape.as_ref())?;
        Ok(Self {
            shape,
            amplitude,
            width,
            e0,
            eta0,
        })
    }

    pub fn shape(&self) -> &Arc<dyn Shape> {
        &self.shape
    }

    pub fn g(&self, u: f64) -> f64 {
        self.amplitude * self.shape.value(u / self.width)
    }

    pub fn g1(&self, u: f64) -> f64 {
        self.amplitude * self.shape.d1(u / self.width) / self.width
    }

    pub fn g2(&self, u: f64) -> f64 {
        self.amplitude * self.shape.d2(u / self.width) / (self.width * self.width)
    }

    pub fn f(&self, x: f64) -> f64 {
        self.g((x - self.e0) / self.eta0)
    }

    pub fn f1(&self, x: f64) -> f64 {
        self.g1((x - self.e0) / self.eta0) / self.eta0
    }

    pub fn f2(&self, x: f64) -> f64 {
        self.g2((x - self.e0) / self.eta0) / (self.eta0 * self.eta0)
    }

    /// Support of `g`.
    pub fn support_g(&self) -> (f64, f64) {
        let (a, b) = self.shape.support();
        (a * self.width, b * self.width)
    }

    /// Support of `f`.
    pub fn support_f(&self) -> (f64, f64) {
        let (a, b) = self.support_g();
        (self.e0 + self.eta0 * a, self.e0 + self.eta0 * b)
    }

    /// Sorted breakpoints of `g`, including the support ends.
    pub fn breakpoints_g(&self) -> Vec<f64> {
        let (a, b) = self.support_g();
        let mut pts = vec![a, b];
        pts.extend(self.shape.breakpoints().into_iter().map(|p| p * self.width));
        pts.retain(|p| *p >= a && *p <= b);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Sorted breakpoints of `f`, including the support ends.
    pub fn breakpoints_f(&self) -> Vec<f64> {
        self.breakpoints_g()
            .into_iter()
            .map(|u| self.e0 + self.eta0 * u)
            .collect()
    }

    /// Distance from the support of `f` to the spectral edges `±2`, or 0
    /// when the support contains an edge.
    pub fn kappa0(&self) -> f64 {
        let (a, b) = self.support_f();
        [-2.0f64, 2.0]
            .iter()
            .map(|&e| {
                if e >= a && e <= b {
                    0.0
                } else {
                    (e - a).abs().min((e - b).abs())
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Same function with `g` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            amplitude: self.amplitude * factor,
            ..self.clone()
        }
    }
}

/// Central-difference check of `d1`, `d2` against `value`, relative to the
/// size of each derivative over the support.
fn validate_derivatives(shape: &dyn Shape) -> Result<()> {
    const SAMPLES: usize = 97;
    let (a, b) = shape.support();
    let h = 1e-5 * (b - a);
    let mut pts = Vec::with_capacity(SAMPLES);
    for k in 0..SAMPLES {
        // Irrational offset keeps probes off breakpoints.
        let t = (k as f64 + 0.5 + 0.1 * std::f64::consts::FRAC_1_SQRT_2) / SAMPLES as f64;
        let x = a + (b - a) * t;
        if shape.breakpoints().iter().any(|p| (x - p).abs() < 4.0 * h) {
            continue;
        }
        pts.push(x);
    }
    let scale1 = pts.iter().map(|&x| shape.d1(x).abs()).fold(0.0, f64::max).max(1e-300);
    let scale2 = pts.iter().map(|&x| shape.d2(x).abs()).fold(0.0, f64::max).max(1e-300);
    for &x in &pts {
        let fd1 = (shape.value(x + h) - shape.value(x - h)) / (2.0 * h);
        let fd2 = (shape.d1(x + h) - shape.d1(x - h)) / (2.0 * h);
        let e1 = (fd1 - shape.d1(x)).abs() / scale1;
        let e2 = (fd2 - shape.d2(x)).abs() / scale2;
        if e1 > 1e-4 || e2 > 1e-4 {
            return Err(Error::Construction(format!(
                "derivatives inconsistent with the function at x = {x}: relative errors {e1:e}, {e2:e}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug)]
    struct Wrong;
    impl Shape for Wrong {
        fn value(&self, x: f64) -> f64 {
            Bump.value(x)
        }
        fn d1(&self, x: f64) -> f64 {
            2.0 * Bump.d1(x)
        }
        fn d2(&self, x: f64) -> f64 {
            Bump.d2(x)
        }
        fn support(&self) -> (f64, f64) {
            (-1.0, 1.0)
        }
    }

    #[test]
    fn builtins_pass_derivative_validation() {
        for spec in [
            ShapeSpec::Bump,
            ShapeSpec::CosineWindow,
            ShapeSpec::TruncatedGaussian { cutoff: 5.0 },
        ] {
            TestFunction::new(spec.build().unwrap(), 0.0, 1.0).unwrap();
        }
    }

    #[test]
    fn wrong_derivative_rejected() {
        assert!(matches!(
            TestFunction::new(Arc::new(Wrong), 0.0, 1.0),
            Err(Error::Construction(_))
        ));
    }

    #[test]
    fn kappa0_examples() {
        let tf = |e0, eta0| TestFunction::new(Arc::new(Bump), e0, eta0).unwrap();
        assert_eq!(tf(0.0, 1.0).kappa0(), 1.0);
        assert_eq!(tf(2.0, 0.3).kappa0(), 0.0);
        assert!((tf(1.0, 0.1).kappa0() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn gaussian_taper_is_c2_at_joins() {
        let g = TruncatedGaussian { cutoff: 5.0 };
        for &x in &[4.0, 5.0] {
            let eps = 1e-7;
            assert!((g.value(x - eps) - g.value(x + eps)).abs() < 1e-9);
            assert!((g.d1(x - eps) - g.d1(x + eps)).abs() < 1e-8);
            assert!((g.d2(x - eps) - g.d2(x + eps)).abs() < 1e-6);
        }
        assert_eq!(g.value(5.5), 0.0);
        assert!((g.value(1.0) - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn affine_rescaling_describes_same_f() {
        let a = TestFunction::new(Arc::new(Bump), 0.3, 0.2).unwrap();
        let b = TestFunction::with_affine(Arc::new(Bump), 1.0, 2.0, 0.3, 0.1).unwrap();
        for k in 0..50 {
            let x = 0.05 + 0.01 * k as f64;
            assert!((a.f(x) - b.f(x)).abs() < 1e-14);
            assert!((a.f1(x) - b.f1(x)).abs() < 1e-11);
            assert!((a.f2(x) - b.f2(x)).abs() < 1e-8);
        }
        assert_eq!(a.support_f(), b.support_f());
    }
}
