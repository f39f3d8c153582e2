//! Run configuration: one JSON document per run.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wigner_clt::ensemble::{EnsembleSpec, EntryDist};
use wigner_clt::locallaw::LocalLawConfig;
use wigner_clt::profile::{ProfileSpec, VarianceProfile};
use wigner_clt::spectral::{ShapeSpec, TestFunction, TestFunctionSpec};
use wigner_clt::theory::ContourSpec;

use crate::error::CliError;

/// Environment variable overriding the configured thread count.
pub const THREADS_ENV: &str = "WIGNER_CLT_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    ValidateProfile,
    Theory,
    Mc,
    Locallaw,
    Sweep,
    MesoLimits,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ValidateProfile => "validate-profile",
            Command::Theory => "theory",
            Command::Mc => "mc",
            Command::Locallaw => "locallaw",
            Command::Sweep => "sweep",
            Command::MesoLimits => "meso-limits",
        }
    }
}

/// Test function with `η₀` either fixed or given as `N^{−a}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunctionConfig {
    pub shape: ShapeSpec,
    #[serde(default)]
    pub e0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta0: Option<f64>,
    /// `η₀ = N^{−eta0_exponent}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta0_exponent: Option<f64>,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub width: f64,
}

impl TestFunctionConfig {
    pub fn eta0(&self, n: usize) -> Result<f64, CliError> {
        match (self.eta0, self.eta0_exponent) {
            (Some(e), None) => Ok(e),
            (None, Some(a)) => Ok((n as f64).powf(-a)),
            _ => Err(CliError::Config(
                "test_function needs exactly one of eta0 and eta0_exponent".into(),
            )),
        }
    }

    pub fn build(&self, n: usize) -> Result<TestFunction, CliError> {
        let spec = TestFunctionSpec {
            shape: self.shape,
            e0: self.e0,
            eta0: self.eta0(n)?,
            amplitude: self.amplitude,
            width: self.width,
        };
        Ok(spec.build()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub samples: usize,
    pub lambdas: Vec<f64>,
    pub histogram_bins: usize,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            samples: 2000,
            lambdas: vec![0.0, 0.5, 1.0, 2.0],
            histogram_bins: 40,
        }
    }
}

/// A probe pair `(z, z′)` written as `[[re, im], [re, im]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbePair {
    pub z: Complex64,
    pub zp: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalLawSection {
    pub samples: usize,
    /// Dimensions to study; empty means the run's `n`.
    pub n_list: Vec<usize>,
    pub grid: LocalLawConfig,
    /// Two-point probes, checked on sample 0 of each dimension.
    pub two_point: Vec<ProbePair>,
    /// Allowed growth of the median entrywise ratio per step of `n_list`.
    pub max_median_growth: f64,
}

impl Default for LocalLawSection {
    fn default() -> Self {
        Self {
            samples: 20,
            n_list: Vec::new(),
            grid: LocalLawConfig::default(),
            two_point: vec![ProbePair {
                z: Complex64::new(0.2, 0.1),
                zp: Complex64::new(0.2, -0.1),
            }],
            max_median_growth: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub n_list: Vec<usize>,
    pub samples: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            n_list: vec![200, 400, 800],
            samples: 2000,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_beta() -> u8 {
    1
}

fn default_entry() -> EntryDist {
    EntryDist::Gaussian
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// When present it must agree with the command given on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// 0 selects all available cores.
    #[serde(default)]
    pub threads: usize,
    pub n: usize,
    #[serde(default = "default_beta")]
    pub beta: u8,
    #[serde(default)]
    pub profile: ProfileSpec,
    #[serde(default = "default_entry")]
    pub entry: EntryDist,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diag_entry: Option<EntryDist>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_function: Option<TestFunctionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub locallaw: LocalLawSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Structural checks that do not need any numerics.
    pub fn validate(&self, command: Command) -> Result<(), CliError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(CliError::Config(format!(
                    "config is for command '{}' but '{}' was requested",
                    c.name(),
                    command.name()
                )));
            }
        }
        if self.n < 2 {
            return Err(CliError::Config(format!("n must be at least 2, got {}", self.n)));
        }
        if self.beta != 1 && self.beta != 2 {
            return Err(CliError::Config(format!("beta must be 1 or 2, got {}", self.beta)));
        }
        let needs_tf = matches!(
            command,
            Command::Theory | Command::Mc | Command::Sweep | Command::MesoLimits
        );
        if needs_tf {
            let tf = self
                .test_function
                .as_ref()
                .ok_or_else(|| CliError::Config(format!("command '{}' needs a test_function", command.name())))?;
            tf.eta0(self.n)?;
        }
        match command {
            Command::Mc if self.mc.samples < wigner_clt::harness::MIN_SAMPLES => Err(CliError::Config(format!(
                "mc.samples must be at least {}",
                wigner_clt::harness::MIN_SAMPLES
            ))),
            Command::Sweep if self.sweep.samples < wigner_clt::harness::MIN_SAMPLES => Err(CliError::Config(
                format!("sweep.samples must be at least {}", wigner_clt::harness::MIN_SAMPLES),
            )),
            Command::Locallaw if self.locallaw.samples == 0 => {
                Err(CliError::Config("locallaw.samples must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Thread count after the environment override.
    pub fn effective_threads(&self) -> Result<usize, CliError> {
        match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a non-negative integer, got '{v}'"))),
            Err(_) => Ok(self.threads),
        }
    }

    /// SHA-256 of the canonical JSON form, ignoring settings that cannot
    /// change results (threads, output directory).
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.threads = 0;
        canon.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&canon).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn profile(&self, n: usize) -> Result<Arc<VarianceProfile>, CliError> {
        Ok(Arc::new(self.profile.build(n)?))
    }

    pub fn ensemble(&self, n: usize) -> Result<EnsembleSpec, CliError> {
        let mut e = EnsembleSpec::new(self.beta, self.entry, self.profile(n)?, self.seed)?;
        if let Some(d) = self.diag_entry {
            e = e.with_diag_dist(d)?;
        }
        Ok(e)
    }

    /// Test function at dimension `n`, with the theorem's hypothesis checked.
    pub fn test_function(&self, n: usize) -> Result<TestFunction, CliError> {
        let cfg = self
            .test_function
            .as_ref()
            .ok_or_else(|| CliError::Config("missing test_function".into()))?;
        let tf = cfg.build(n)?;
        ContourSpec::new(&tf, n, self.tau)?;
        Ok(tf)
    }
}
