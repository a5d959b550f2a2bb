//! Monte Carlo and deterministic experiments that check the calculus and the
//! solver at desk scale.
//!
//! Every experiment is a pure function of its configuration: replicates run in
//! parallel, but each replicate draws from its own substream and reductions
//! happen in replicate order, so reports are reproducible bit for bit.
//!
//! Inequalities whose constants are only known to exist are checked through
//! their ratio statistics: a ratio must be finite on the whole battery and
//! stable within ±20% under a change of seed, a doubling of the sample size,
//! or a grid refinement.

mod analysis;
mod laws;
mod maximal;
pub mod oracle;
mod pde;
mod report;

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use analysis::{contraction_experiment, littlewood_paley_experiment, spectral_laws_experiment};
pub use laws::{
    duality_experiment, fbm_law_experiment, kernel_quadrature_experiment, l2_identity_experiment, skorohod_experiment,
    skorohod_report,
};
pub use maximal::{maximal_ratio_experiment, p2_maximal_experiment};
pub use pde::{
    apriori_estimate_experiment, embedding_sup_experiment, hoelder_experiment, solver_reduction_experiment,
    weak_residual_experiment,
};
pub use report::{ExperimentReport, Row, Series};

/// Relative stability window for ratio statistics.
pub const STABILITY: f64 = 0.2;

/// Shipped experiment files, used when a configuration names none.
pub mod builtin {
    pub const MALLIAVIN: &str = include_str!("../../../../experiments/malliavin.toml");
    pub const MAXIMAL: &str = include_str!("../../../../experiments/maximal.toml");
    pub const DET_G: &str = include_str!("../../../../experiments/det_g.toml");
    pub const DET_G_2D: &str = include_str!("../../../../experiments/det_g_2d.toml");
    pub const MIXED: &str = include_str!("../../../../experiments/mixed.toml");
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    FbmLaw,
    KernelQuadrature,
    Skorohod,
    Duality,
    L2Identity,
    SpectralLaws,
    Contraction,
    SolverReduction,
    WeakResidual,
    Maximal,
    P2Maximal,
    Hoelder,
    EmbeddingSup,
    Apriori,
    LittlewoodPaley,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 15] = [
        Self::FbmLaw,
        Self::KernelQuadrature,
        Self::Skorohod,
        Self::Duality,
        Self::L2Identity,
        Self::SpectralLaws,
        Self::Contraction,
        Self::SolverReduction,
        Self::WeakResidual,
        Self::Maximal,
        Self::P2Maximal,
        Self::Hoelder,
        Self::EmbeddingSup,
        Self::Apriori,
        Self::LittlewoodPaley,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::FbmLaw => "fbm_law",
            Self::KernelQuadrature => "kernel_quadrature",
            Self::Skorohod => "skorohod",
            Self::Duality => "duality",
            Self::L2Identity => "l2_identity",
            Self::SpectralLaws => "spectral_laws",
            Self::Contraction => "contraction",
            Self::SolverReduction => "solver_reduction",
            Self::WeakResidual => "weak_residual",
            Self::Maximal => "maximal",
            Self::P2Maximal => "p2_maximal",
            Self::Hoelder => "hoelder",
            Self::EmbeddingSup => "embedding_sup",
            Self::Apriori => "apriori",
            Self::LittlewoodPaley => "littlewood_paley",
        }
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|id| id.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|i| i.name()).collect();
            invalid("experiment", format!("unknown experiment `{s}`; expected one of {} or all", names.join(", ")))
        })
    }
}

impl std::fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FbmLawConfig {
    pub hursts: Vec<f64>,
    pub horizon: f64,
    pub cells: usize,
    pub n_paths: usize,
    pub seed: u64,
}

impl Default for FbmLawConfig {
    fn default() -> Self {
        Self { hursts: vec![0.55, 0.75, 0.9], horizon: 1.0, cells: 16, n_paths: 100_000, seed: 20240611 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelQuadratureConfig {
    pub cases: usize,
    pub max_cells: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for KernelQuadratureConfig {
    fn default() -> Self {
        Self { cases: 100, max_cells: 24, tolerance: 1e-6, seed: 20240611 }
    }
}

/// Settings shared by the scalar Skorohod experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MalliavinConfig {
    /// Battery file; the shipped battery when absent.
    pub battery: Option<PathBuf>,
    /// Overrides the battery's sample size.
    pub n_mc: Option<usize>,
    /// Overrides the battery's seed.
    pub seed: Option<u64>,
    /// Paths for the pathwise `δ(β_T) = β_T² - T^{2H}` check.
    pub pathwise: usize,
}

impl Default for MalliavinConfig {
    fn default() -> Self {
        Self { battery: None, n_mc: None, seed: None, pathwise: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub half_width: f64,
    pub points_1d: usize,
    pub points_2d: usize,
    pub tolerance: f64,
    pub slack: f64,
    pub exponents: Vec<f64>,
    pub seed: u64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            half_width: 8.0,
            points_1d: 128,
            points_2d: 32,
            tolerance: 1e-10,
            slack: 1e-8,
            exponents: vec![1.0, 1.5, 2.0, 4.0, 8.0],
            seed: 20240611,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Deterministic-`g` problem files; the shipped pair when empty.
    pub problems: Vec<PathBuf>,
    pub cells: Vec<usize>,
    pub replicates: usize,
    pub reduction_tolerance: f64,
    pub min_order: f64,
    pub seed: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            problems: Vec::new(),
            cells: vec![64, 128, 256],
            replicates: 64,
            reduction_tolerance: 1e-10,
            min_order: 1.0,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoelderConfig {
    pub problem: Option<PathBuf>,
    pub cells: usize,
    pub p: f64,
    pub beta: f64,
    pub alpha: f64,
    pub order: f64,
    pub lags: Vec<usize>,
    pub replicates: usize,
    pub slack: f64,
    pub min_r_squared: f64,
    pub seed: Option<u64>,
}

impl Default for HoelderConfig {
    fn default() -> Self {
        Self {
            problem: None,
            cells: 64,
            p: 4.0,
            beta: 0.5,
            alpha: 0.4,
            order: 1.0,
            lags: vec![1, 2, 4, 8, 16],
            replicates: 10_000,
            slack: 0.15,
            min_r_squared: 0.98,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaximalConfig {
    pub battery: Option<PathBuf>,
    pub hursts: Vec<f64>,
    pub exponents: Vec<f64>,
    pub n_mc: usize,
    /// Seeds `seed, seed + 1, ...` for the seed-stability study.
    pub seeds: usize,
    pub seed: Option<u64>,
    /// Maximum relative move of the left side under `m → 2m`.
    pub refinement_tolerance: f64,
}

impl Default for MaximalConfig {
    fn default() -> Self {
        Self {
            battery: None,
            hursts: vec![0.6, 0.75],
            exponents: vec![2.0, 4.0],
            n_mc: 10_000,
            seeds: 3,
            seed: None,
            refinement_tolerance: 0.05,
        }
    }
}

/// Settings of the two norm-ratio experiments on solution ensembles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    /// Problem files; the shipped mixed and deterministic-`g` problems when empty.
    pub problems: Vec<PathBuf>,
    pub p: f64,
    pub order: f64,
    pub replicates: usize,
    pub seeds: usize,
    pub seed: Option<u64>,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self { problems: Vec::new(), p: 4.0, order: 2.0, replicates: 1000, seeds: 3, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LittlewoodPaleyConfig {
    pub hurst: f64,
    pub exponents: Vec<f64>,
    pub half_width: f64,
    pub points: usize,
    pub horizon: f64,
    /// Time steps per unit time on the coarse level.
    pub steps: usize,
    pub slices: usize,
    pub identity_tolerance: f64,
}

impl Default for LittlewoodPaleyConfig {
    fn default() -> Self {
        Self {
            hurst: 0.75,
            exponents: vec![2.0, 4.0, 6.0],
            half_width: 8.0,
            points: 64,
            horizon: 1.0,
            steps: 32,
            slices: 4,
            identity_tolerance: 1e-6,
        }
    }
}

/// All experiment settings. Relative paths resolve against `base`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Overrides every experiment seed when set.
    pub seed: Option<u64>,
    pub fbm_law: FbmLawConfig,
    pub kernel_quadrature: KernelQuadratureConfig,
    pub malliavin: MalliavinConfig,
    pub spectral: SpectralConfig,
    pub solver: SolverConfig,
    pub hoelder: HoelderConfig,
    pub maximal: MaximalConfig,
    pub estimates: EstimateConfig,
    pub littlewood_paley: LittlewoodPaleyConfig,
    #[serde(skip)]
    pub base: Option<PathBuf>,
}

impl VerifyConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Format { what: "verify configuration", reason: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
        let mut c = Self::from_toml_str(&s)?;
        c.base = path.parent().map(Path::to_path_buf);
        Ok(c)
    }

    pub(crate) fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Contents of `path`, or `builtin` when no path is configured.
    pub(crate) fn text(&self, path: Option<&PathBuf>, builtin: &str) -> Result<String> {
        match path {
            None => Ok(builtin.to_string()),
            Some(p) => {
                let p = self.resolve(p);
                std::fs::read_to_string(&p).map_err(|source| Error::Read { path: p, source })
            }
        }
    }

    pub(crate) fn seed_or(&self, local: Option<u64>, fallback: u64) -> u64 {
        self.seed.or(local).unwrap_or(fallback)
    }
}

/// Runs one experiment and records its wall time.
pub fn run(id: ExperimentId, config: &VerifyConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut report = match id {
        ExperimentId::FbmLaw => fbm_law_experiment(config)?,
        ExperimentId::KernelQuadrature => kernel_quadrature_experiment(config)?,
        ExperimentId::Skorohod => skorohod_experiment(config)?,
        ExperimentId::Duality => duality_experiment(config)?,
        ExperimentId::L2Identity => l2_identity_experiment(config)?,
        ExperimentId::SpectralLaws => spectral_laws_experiment(config)?,
        ExperimentId::Contraction => contraction_experiment(config)?,
        ExperimentId::SolverReduction => solver_reduction_experiment(config)?,
        ExperimentId::WeakResidual => weak_residual_experiment(config)?,
        ExperimentId::Maximal => maximal_ratio_experiment(config)?,
        ExperimentId::P2Maximal => p2_maximal_experiment(config)?,
        ExperimentId::Hoelder => hoelder_experiment(config)?,
        ExperimentId::EmbeddingSup => embedding_sup_experiment(config)?,
        ExperimentId::Apriori => apriori_estimate_experiment(config)?,
        ExperimentId::LittlewoodPaley => littlewood_paley_experiment(config)?,
    };
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in ExperimentId::ALL {
            assert_eq!(id.name().parse::<ExperimentId>().unwrap(), id);
        }
        assert!("nope".parse::<ExperimentId>().is_err());
    }

    #[test]
    fn config_defaults_and_overrides() {
        let c = VerifyConfig::from_toml_str("seed = 5\n[hoelder]\nreplicates = 10\n").unwrap();
        assert_eq!(c.hoelder.replicates, 10);
        assert_eq!(c.hoelder.p, 4.0);
        assert_eq!(c.seed_or(Some(1), 2), 5);
        assert!(VerifyConfig::from_toml_str("[hoelder]\nbogus = 1\n").is_err());
    }
}
