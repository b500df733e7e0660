//! Job configuration: a single versioned JSON document holding the kernel,
//! the master seed, and per-command option blocks. Unknown fields are
//! rejected everywhere so option typos cannot silently change a run.

use crate::CliError;
use bsphere_core::constants::AlphaSpec;
use bsphere_core::kernels::KernelSpec;
use serde::Deserialize;
use std::path::{Path, PathBuf};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    /// Schema version; must equal 1.
    pub format: u32,
    /// Kernel in canonical JSON form {"d", "variant", "params"}.
    pub kernel: Option<serde_json::Value>,
    /// Master seed; every task seed is derived from it by labeled hashing.
    #[serde(default)]
    pub seed: u64,
    /// Degree cap of computed spectra.
    #[serde(default = "default_spectrum_l")]
    pub spectrum_l: usize,
    /// Output directory for report files (`--out` overrides).
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub analyze: Option<AnalyzeSection>,
    #[serde(default)]
    pub verify: Option<VerifySection>,
    #[serde(default)]
    pub flow: Option<FlowSection>,
}

fn default_spectrum_l() -> usize {
    64
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSection {
    /// Reference kernel with a known lower bound, enabling the comparison
    /// route.
    #[serde(default)]
    pub reference: Option<ReferenceBlock>,
    /// When present, the process exit code reflects the criterion verdict.
    #[serde(default)]
    pub criterion: Option<CriterionBlock>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceBlock {
    pub kernel: serde_json::Value,
    /// Known lower bound for the reference kernel.
    pub lambda: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionBlock {
    pub alpha: AlphaJson,
    #[serde(default)]
    pub r_range: Option<(f64, f64)>,
}

/// Velocity-scaling profile in JSON: {"power": {"gamma": ..}} or
/// {"tabulated": {"radii": [..], "alpha": [..], "alpha_prime": [..]}}.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaJson {
    Power { gamma: f64 },
    Tabulated { radii: Vec<f64>, alpha: Vec<f64>, alpha_prime: Vec<f64> },
}

impl AlphaJson {
    pub fn to_spec(&self) -> AlphaSpec {
        match self {
            AlphaJson::Power { gamma } => AlphaSpec::Power { gamma: *gamma },
            AlphaJson::Tabulated { radii, alpha, alpha_prime } => AlphaSpec::Tabulated {
                radii: radii.clone(),
                alpha: alpha.clone(),
                alpha_prime: alpha_prime.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Checks to run; omitted means every check applicable to the kernel
    /// and dimension.
    #[serde(default)]
    pub checks: Option<Vec<String>>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: usize,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_gateaux_dt")]
    pub gateaux_dt: f64,
    #[serde(default = "default_villani_step")]
    pub villani_step: f64,
    #[serde(default)]
    pub legendre: Option<LegendreBlock>,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            checks: None,
            samples: default_samples(),
            bandwidth: default_bandwidth(),
            amplitude: default_amplitude(),
            gateaux_dt: default_gateaux_dt(),
            villani_step: default_villani_step(),
            legendre: None,
        }
    }
}

fn default_samples() -> usize {
    16
}
fn default_bandwidth() -> usize {
    6
}
fn default_amplitude() -> f64 {
    0.9
}
fn default_gateaux_dt() -> f64 {
    1e-5
}
fn default_villani_step() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegendreBlock {
    #[serde(default = "default_legendre_d_min")]
    pub d_min: u32,
    #[serde(default = "default_legendre_d_max")]
    pub d_max: u32,
    #[serde(default = "default_legendre_l")]
    pub l_max: usize,
    #[serde(default = "default_legendre_grid")]
    pub grid: usize,
}

impl Default for LegendreBlock {
    fn default() -> Self {
        Self {
            d_min: default_legendre_d_min(),
            d_max: default_legendre_d_max(),
            l_max: default_legendre_l(),
            grid: default_legendre_grid(),
        }
    }
}

fn default_legendre_d_min() -> u32 {
    2
}
fn default_legendre_d_max() -> u32 {
    6
}
fn default_legendre_l() -> usize {
    40
}
fn default_legendre_grid() -> usize {
    1001
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    /// "heat" or "jump".
    pub generator: String,
    /// Strictly increasing sample times.
    pub times: Vec<f64>,
    #[serde(default = "default_bandwidth")]
    pub initial_bandwidth: usize,
    #[serde(default = "default_amplitude")]
    pub initial_amplitude: f64,
    /// Index into the deterministic sample stream for the initial datum.
    #[serde(default)]
    pub initial_index: u64,
    /// Heat runs only: verify the Fisher decay envelope at this tolerance.
    #[serde(default)]
    pub decay_tol: Option<f64>,
    /// Slack for the monotonicity verdict.
    #[serde(default = "default_slack")]
    pub slack: f64,
}

fn default_slack() -> f64 {
    1e-10
}

impl JobConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: JobConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if self.format != FORMAT_VERSION {
            return fail(format!(
                "unsupported config format {} (expected {FORMAT_VERSION})",
                self.format
            ));
        }
        if !(4..=4096).contains(&self.spectrum_l) {
            return fail(format!(
                "spectrum_l {} outside the documented range 4..=4096",
                self.spectrum_l
            ));
        }
        if let Some(a) = &self.analyze {
            if let Some(r) = &a.reference {
                if !(r.lambda > 0.0 && r.lambda.is_finite()) {
                    return fail(format!(
                        "reference lambda must be positive and finite, got {}",
                        r.lambda
                    ));
                }
            }
        }
        if let Some(v) = &self.verify {
            if !(1..=100_000).contains(&v.samples) {
                return fail(format!("samples {} outside 1..=100000", v.samples));
            }
            if !(2..=64).contains(&v.bandwidth) {
                return fail(format!("bandwidth {} outside 2..=64", v.bandwidth));
            }
            if !(v.amplitude >= 0.0 && v.amplitude <= 3.0) {
                return fail(format!("amplitude {} outside 0..=3", v.amplitude));
            }
            if !(v.gateaux_dt > 0.0 && v.gateaux_dt <= 1e-2) {
                return fail(format!("gateaux_dt {} outside (0, 1e-2]", v.gateaux_dt));
            }
            if !(v.villani_step > 0.0 && v.villani_step < 0.1) {
                return fail(format!("villani_step {} outside (0, 0.1)", v.villani_step));
            }
            if let Some(l) = &v.legendre {
                if l.d_min < 2 || l.d_max > 16 || l.d_min > l.d_max {
                    return fail(format!(
                        "legendre dimension range {}..={} outside 2..=16",
                        l.d_min, l.d_max
                    ));
                }
                if !(1..=200).contains(&l.l_max) || !(3..=100_001).contains(&l.grid) {
                    return fail(format!(
                        "legendre l_max {} / grid {} outside 1..=200 / 3..=100001",
                        l.l_max, l.grid
                    ));
                }
            }
            if let Some(names) = &v.checks {
                for name in names {
                    if !CHECK_NAMES.contains(&name.as_str()) {
                        return fail(format!(
                            "unknown check '{name}' (known: {})",
                            CHECK_NAMES.join(", ")
                        ));
                    }
                }
            }
        }
        if let Some(f) = &self.flow {
            if f.generator != "heat" && f.generator != "jump" {
                return fail(format!(
                    "generator must be \"heat\" or \"jump\", got \"{}\"",
                    f.generator
                ));
            }
            if f.times.is_empty() {
                return fail("flow needs at least one time".into());
            }
            if f.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                return fail("flow times must be finite and nonnegative".into());
            }
            for pair in f.times.windows(2) {
                if !(pair[1] > pair[0]) {
                    return fail(format!(
                        "flow times must increase strictly, got {} then {}",
                        pair[0], pair[1]
                    ));
                }
            }
            if !(2..=64).contains(&f.initial_bandwidth) {
                return fail(format!("initial_bandwidth {} outside 2..=64", f.initial_bandwidth));
            }
            if !(f.initial_amplitude >= 0.0 && f.initial_amplitude <= 3.0) {
                return fail(format!("initial_amplitude {} outside 0..=3", f.initial_amplitude));
            }
            if let Some(tol) = f.decay_tol {
                if !(tol > 0.0 && tol.is_finite()) {
                    return fail(format!("decay_tol must be positive and finite, got {tol}"));
                }
            }
            if !(f.slack >= 0.0 && f.slack.is_finite()) {
                return fail(format!("slack must be finite and >= 0, got {}", f.slack));
            }
        }
        Ok(())
    }

    /// The configured kernel, parsed and validated.
    pub fn kernel(&self) -> Result<KernelSpec, CliError> {
        let value = self
            .kernel
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a \"kernel\" entry".into()))?;
        KernelSpec::from_json(value).map_err(|e| CliError::Config(format!("kernel: {e}")))
    }
}

pub const CHECK_NAMES: [&str; 6] = ["logsob", "hardy", "gamma2", "gateaux", "villani", "legendre"];

/// Derives a task seed from the master seed by labeled hashing, so results
/// do not depend on scheduling or on which other commands ran.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(b"bsphere-task-seed");
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is long enough"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn parse(doc: serde_json::Value) -> Result<JobConfig, CliError> {
        let cfg: JobConfig = serde_json::from_value(doc)
            .map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = parse(json!({
            "format": 1,
            "kernel": {"d": 3, "variant": "hard_sphere", "params": {}}
        }))
        .unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.spectrum_l, 64);
        assert!(cfg.kernel().is_ok());
    }

    #[test]
    fn bad_numeric_ranges_are_rejected() {
        assert!(parse(json!({"format": 1, "spectrum_l": 2})).is_err());
        assert!(parse(json!({"format": 1, "spectrum_l": 5000})).is_err());
        assert!(parse(json!({"format": 0})).is_err());
        assert!(parse(json!({
            "format": 1,
            "verify": {"samples": 0}
        }))
        .is_err());
        assert!(parse(json!({
            "format": 1,
            "verify": {"checks": ["hardy", "no_such_check"]}
        }))
        .is_err());
    }

    #[test]
    fn flow_times_must_increase_strictly() {
        let base = |times: serde_json::Value| {
            parse(json!({
                "format": 1,
                "kernel": {"d": 3, "variant": "hard_sphere", "params": {}},
                "flow": {"generator": "heat", "times": times}
            }))
        };
        assert!(base(json!([0.1, 0.2, 0.3])).is_ok());
        assert!(base(json!([0.1, 0.1])).is_err());
        assert!(base(json!([0.2, 0.1])).is_err());
        assert!(base(json!([])).is_err());
    }

    #[test]
    fn unknown_fields_are_rejected_everywhere() {
        assert!(parse(json!({"format": 1, "surprise": 1})).is_err());
        assert!(parse(json!({"format": 1, "verify": {"sample": 4}})).is_err());
        assert!(parse(json!({"format": 1, "flow": {"generator": "heat", "times": [0.1], "step": 2}})).is_err());
    }

    #[test]
    fn derived_seeds_separate_by_label_and_master() {
        let a = derive_seed(1, "verify-logsob");
        let b = derive_seed(1, "verify-hardy");
        let c = derive_seed(2, "verify-logsob");
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(1, "verify-logsob"));
    }
}
