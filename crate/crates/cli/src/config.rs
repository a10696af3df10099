//! Experiment configuration: JSON schema, defaults and resolution into
//! library types.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use jacobilab::coeffs::{check_diophantine, GOLDEN_MEAN};
use jacobilab::ids::{log_spaced, GateConfig};
use jacobilab::{Complex64, Frequency, ModelSpec, TrigPoly};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

/// Coefficient model: a named preset or explicit Fourier tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    Amo {
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    Harper {
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default = "one")]
        l1: f64,
        #[serde(default = "one")]
        l2: f64,
        #[serde(default = "one")]
        l3: f64,
    },
    /// Fourier modes as `[k, re, im]` triples.
    Explicit { a: Vec<(i64, f64, f64)>, b: Vec<(i64, f64, f64)> },
}

fn default_lambda() -> f64 {
    3.0
}

fn one() -> f64 {
    1.0
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Amo { lambda: default_lambda() }
    }
}

/// `"golden"` or an explicit value in `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FrequencyConfig {
    Value(f64),
    Named(String),
}

impl Default for FrequencyConfig {
    fn default() -> Self {
        FrequencyConfig::Named("golden".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: ModelConfig,
    pub frequency: FrequencyConfig,
    pub diophantine_c: f64,
    pub diophantine_alpha: f64,
    pub certify_up_to: u64,

    /// Volumes `N` for the scale sweeps.
    pub scales: Vec<usize>,
    /// Block length `l` for AP, adjusted-integer and Jensen runs.
    pub block_length: usize,
    /// Block lengths compared by the `ap` subcommand.
    pub ap_lengths: Vec<usize>,
    /// Number of blocks `m`.
    pub blocks: usize,
    /// Cap `A` in `l ≤ |Λ_j| ≤ l^A`.
    pub length_exponent: f64,

    pub phases: usize,
    pub energy_interval: (f64, f64),
    pub energy_count: usize,
    /// `η = N^{−t}` for each listed `t`.
    pub eta_exponents: Vec<f64>,
    pub eps_holder: f64,
    pub jensen_eps: f64,
    pub jensen_divisor: usize,
    /// Radius `ρ₀` for the excluded set of the pointwise Wegner bound.
    pub rho0: f64,
    /// Exponent `C₀` in the adjusted-disk radius `r0·exp(−(log l)^{C₀})`.
    pub adjusted_radius_exponent: f64,

    pub lyapunov_n: usize,
    pub lyapunov_phases: usize,
    pub gamma: f64,

    pub ids_energy_count: usize,
    pub holder_n: usize,
    pub holder_phases: usize,
    pub holder_etas: Vec<f64>,
    pub holder_energies: usize,
    pub holder_pass_fraction: f64,

    pub identity_scales: Vec<usize>,
    pub identity_samples: usize,
    pub identity_tolerance: f64,

    pub seed: u64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let gate = GateConfig::default();
        Self {
            schema_version: SCHEMA_VERSION,
            model: ModelConfig::default(),
            frequency: FrequencyConfig::default(),
            diophantine_c: gate.diophantine_c,
            diophantine_alpha: gate.diophantine_alpha,
            certify_up_to: gate.certify_up_to,
            scales: gate.scales.clone(),
            block_length: 24,
            ap_lengths: vec![20, 40],
            blocks: 8,
            length_exponent: 2.0,
            phases: gate.phases,
            energy_interval: gate.energy_interval,
            energy_count: gate.energy_count,
            eta_exponents: gate.eta_exponents.clone(),
            eps_holder: gate.eps_holder,
            jensen_eps: 0.1,
            jensen_divisor: 4,
            rho0: 0.01,
            adjusted_radius_exponent: 2.0,
            lyapunov_n: gate.lyapunov_n,
            lyapunov_phases: gate.lyapunov_phases,
            gamma: gate.gamma,
            ids_energy_count: 201,
            holder_n: gate.holder_n,
            holder_phases: gate.holder_phases,
            holder_etas: log_spaced(1e-3, 1e-2, 6),
            holder_energies: gate.holder_energies,
            holder_pass_fraction: gate.holder_pass_fraction,
            identity_scales: vec![10, 100, 1000, 5000],
            identity_samples: 100,
            identity_tolerance: 1e-9,
            seed: gate.seed,
            out: PathBuf::from("out"),
        }
    }
}

/// A config error with a location, reported with exit status 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.inner();
        ConfigError(format!(
            "{origin}:{}:{}: field `{path}`: {inner}",
            inner.line(),
            inner.column()
        ))
    })?;
    cfg.validate().map_err(|e| ConfigError(format!("{origin}: {e:#}")))?;
    Ok(cfg)
}

pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, ConfigError> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
            parse_config(&text, &p.display().to_string())
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!("field `schema_version`: unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version);
        }
        self.model_spec().context("field `model`")?;
        self.omega_value().context("field `frequency`")?;
        let checks: [(&str, bool); 12] = [
            ("scales", !self.scales.is_empty() && self.scales.iter().all(|n| *n >= 2)),
            ("block_length", self.block_length >= 2),
            ("blocks", self.blocks >= 2),
            ("phases", self.phases >= 2),
            ("energy_interval", self.energy_interval.0 <= self.energy_interval.1),
            ("eps_holder", self.eps_holder >= 0.0),
            ("jensen_eps", self.jensen_eps > 0.0 && self.jensen_eps < 1.0),
            ("rho0", self.rho0 > 0.0 && self.rho0 < 0.5),
            ("holder_etas", self.holder_etas.len() >= 6 && self.holder_etas.windows(2).all(|w| w[0] < w[1])),
            ("lyapunov_phases", self.lyapunov_phases >= 2),
            ("holder_phases", self.holder_phases >= 2),
            ("identity_scales", self.identity_scales.iter().all(|n| *n >= 1)),
        ];
        for (field, ok) in checks {
            if !ok {
                bail!("field `{field}`: value out of range");
            }
        }
        Ok(())
    }

    pub fn model_spec(&self) -> anyhow::Result<ModelSpec> {
        let omega = self.omega_value()?;
        let table = |modes: &[(i64, f64, f64)]| TrigPoly::new(&modes.iter().map(|&(k, re, im)| (k, Complex64::new(re, im))).collect::<Vec<_>>());
        Ok(match &self.model {
            ModelConfig::Amo { lambda } => ModelSpec::almost_mathieu(*lambda),
            ModelConfig::Harper { lambda, l1, l2, l3 } => ModelSpec::extended_harper(*lambda, *l1, *l2, *l3, omega)?,
            ModelConfig::Explicit { a, b } => ModelSpec::new(table(a), table(b))?,
        })
    }

    pub fn omega_value(&self) -> anyhow::Result<f64> {
        match &self.frequency {
            FrequencyConfig::Named(name) if name == "golden" => Ok(GOLDEN_MEAN),
            FrequencyConfig::Named(name) => bail!("unknown frequency name {name:?}"),
            FrequencyConfig::Value(w) if *w > 0.0 && *w < 1.0 => Ok(*w),
            FrequencyConfig::Value(w) => bail!("frequency {w} outside (0, 1)"),
        }
    }

    /// The certified frequency, or an uncertified one plus the failure.
    pub fn frequency(&self) -> (Frequency, Option<String>) {
        let omega = self.omega_value().expect("validated");
        match check_diophantine(omega, self.diophantine_c, self.diophantine_alpha, self.certify_up_to) {
            Ok(f) => (f, None),
            Err(e) => (Frequency::uncertified(omega), Some(e.to_string())),
        }
    }

    pub fn energies(&self) -> Vec<f64> {
        let (lo, hi) = self.energy_interval;
        if self.energy_count <= 1 {
            return vec![0.5 * (lo + hi)];
        }
        (0..self.energy_count).map(|i| lo + (hi - lo) * i as f64 / (self.energy_count - 1) as f64).collect()
    }

    pub fn gate_config(&self) -> anyhow::Result<GateConfig> {
        Ok(GateConfig {
            model: self.model_spec()?,
            omega: self.omega_value()?,
            diophantine_c: self.diophantine_c,
            diophantine_alpha: self.diophantine_alpha,
            certify_up_to: self.certify_up_to,
            energy_interval: self.energy_interval,
            energy_count: self.energy_count,
            scales: self.scales.clone(),
            eta_exponents: self.eta_exponents.clone(),
            phases: self.phases,
            lyapunov_n: self.lyapunov_n,
            lyapunov_phases: self.lyapunov_phases,
            gamma: self.gamma,
            eps_holder: self.eps_holder,
            holder_n: self.holder_n,
            holder_phases: self.holder_phases,
            holder_etas: self.holder_etas.clone(),
            holder_energies: self.holder_energies,
            holder_pass_fraction: self.holder_pass_fraction,
            seed: self.seed,
        })
    }

    /// SHA-256 of the canonical JSON form, in hex. The output directory is
    /// not part of the experiment and is left out.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
