//! TOML experiment configuration. Unknown keys are rejected, every seed is
//! explicit, and the version field is mandatory.

use serde::{Deserialize, Serialize};
use sqglab_core::error::{Error, Result};
use sqglab_core::grid::Grid;
use sqglab_core::initial::InitialCondition;
use sqglab_core::io;
use sqglab_core::solver::{DriftMode, SolverConfig, TimeStep};
use std::path::Path;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub run: Option<RunSection>,
    pub diagnostics: Option<DiagnosticsSection>,
    pub lemmas: Option<LemmasSection>,
    pub holder: Option<HolderSection>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        Self::from_str_checked(&text)
    }

    pub fn from_str_checked(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("config parse error:\n{e}")))?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::InvalidArgument(format!(
                "config version {} unsupported (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn run_section(&self) -> Result<&RunSection> {
        self.run
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("config is missing the [run] section".into()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub grid: Vec<usize>,
    /// Domain lengths per axis; default 2π each.
    pub domain_length: Option<Vec<f64>>,
    pub beta: f64,
    pub kappa: f64,
    pub dt: DtSpec,
    pub t_end: f64,
    pub drift: DriftSpec,
    pub initial: InitialCondition,
    #[serde(default = "default_true")]
    pub dealias: bool,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
}

fn default_true() -> bool {
    true
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DtSpec {
    Fixed(f64),
    Named(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DriftSpec {
    Named(String),
    Prescribed { prescribed: Vec<String> },
}

impl RunSection {
    /// Resolve into a solver configuration, loading prescribed drift files
    /// relative to `base`.
    pub fn to_solver_config(&self, base: &Path, seed_override: Option<u64>) -> Result<SolverConfig> {
        let lens = match &self.domain_length {
            Some(l) => l.clone(),
            None => vec![std::f64::consts::TAU; self.grid.len()],
        };
        let grid = Grid::new(&self.grid, &lens)?;
        let dt = match &self.dt {
            DtSpec::Fixed(v) => TimeStep::Fixed(*v),
            DtSpec::Named(s) if s == "auto" => TimeStep::Auto,
            DtSpec::Named(s) => {
                return Err(Error::InvalidArgument(format!("dt must be a number or \"auto\", got {s:?}")))
            }
        };
        let drift = match &self.drift {
            DriftSpec::Named(s) if s == "sqg" => DriftMode::Sqg,
            DriftSpec::Named(s) if s == "zero" => DriftMode::Zero,
            DriftSpec::Named(s) => {
                return Err(Error::InvalidArgument(format!(
                    "drift must be \"sqg\", \"zero\", or {{ prescribed = [...] }}, got {s:?}"
                )))
            }
            DriftSpec::Prescribed { prescribed } => {
                let comps = prescribed
                    .iter()
                    .map(|p| io::read_field(&base.join(p)))
                    .collect::<Result<Vec<_>>>()?;
                DriftMode::Prescribed(comps)
            }
        };
        let mut initial = self.initial.clone();
        if let Some(seed) = seed_override {
            if let InitialCondition::RandomBand { seed: s, .. } = &mut initial {
                *s = seed;
            }
        }
        Ok(SolverConfig {
            grid,
            beta: self.beta,
            kappa: self.kappa,
            dt,
            t_end: self.t_end,
            initial,
            drift,
            dealias: self.dealias,
            snapshot_stride: self.snapshot_stride,
        })
    }

    pub fn drift_name(&self) -> &str {
        match &self.drift {
            DriftSpec::Named(s) => s,
            DriftSpec::Prescribed { .. } => "prescribed",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    /// Number of truncation levels spanning [min θ₀, max θ₀].
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Waiting time t₀ of the truncation-energy ladder, as a fraction of
    /// t_end.
    #[serde(default = "default_t0_fraction")]
    pub t0_fraction: f64,
    /// Number of U_k levels.
    #[serde(default = "default_uk_levels")]
    pub uk_levels: usize,
    /// Snapshot subsampling for the extension-based local energy check.
    #[serde(default = "default_local_stride")]
    pub local_energy_stride: usize,
}

fn default_levels() -> usize {
    16
}

fn default_t0_fraction() -> f64 {
    0.25
}

fn default_uk_levels() -> usize {
    7
}

fn default_local_stride() -> usize {
    4
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        DiagnosticsSection {
            levels: default_levels(),
            t0_fraction: default_t0_fraction(),
            uk_levels: default_uk_levels(),
            local_energy_stride: default_local_stride(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmasSection {
    #[serde(default = "default_b1_resolution")]
    pub b1_resolution: usize,
    #[serde(default = "default_b2_pmax")]
    pub b2_pmax: usize,
    /// Mesh width of the finite-difference oracle for b₂ (power of two
    /// denominator).
    #[serde(default = "default_oracle_h_inv")]
    pub b2_oracle_h_inv: usize,
    #[serde(default = "default_corpus_samples")]
    pub corpus_samples: usize,
    #[serde(default = "default_corpus_resolution")]
    pub corpus_resolution: usize,
    #[serde(default = "default_corpus_seed")]
    pub corpus_seed: u64,
    /// Generic energy constant entering C₀ of the constants ledger.
    #[serde(default = "default_energy_c")]
    pub energy_c: f64,
}

fn default_b1_resolution() -> usize {
    64
}

fn default_b2_pmax() -> usize {
    50
}

fn default_oracle_h_inv() -> usize {
    128
}

fn default_corpus_samples() -> usize {
    200
}

fn default_corpus_resolution() -> usize {
    64
}

fn default_corpus_seed() -> u64 {
    7
}

fn default_energy_c() -> f64 {
    1.0
}

impl Default for LemmasSection {
    fn default() -> Self {
        LemmasSection {
            b1_resolution: default_b1_resolution(),
            b2_pmax: default_b2_pmax(),
            b2_oracle_h_inv: default_oracle_h_inv(),
            corpus_samples: default_corpus_samples(),
            corpus_resolution: default_corpus_resolution(),
            corpus_seed: default_corpus_seed(),
            energy_c: default_energy_c(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderSection {
    #[serde(default = "default_radii")]
    pub radii_count: usize,
}

fn default_radii() -> usize {
    5
}

impl Default for HolderSection {
    fn default() -> Self {
        HolderSection { radii_count: default_radii() }
    }
}
