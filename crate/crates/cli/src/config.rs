//! JSON run configuration. Every section is optional; unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use nlsusy_core::{AnalyticSolutionFamily, DerivativeScheme, Grid1D, NonlinearitySpec, ResidualOptions};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub nonlinearity: NonlinearityConfig,
    #[serde(default)]
    pub levels: LevelsConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub scheme: SchemeName,
    #[serde(default)]
    pub masks: MaskConfig,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub input: Option<InputConfig>,
    #[serde(default)]
    pub vacuum: VacuumConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub xmin: f64,
    pub xmax: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NonlinearityKind {
    Kerr,
    /// `κ|ψ|² / (1 + |ψ|²)`.
    Saturable,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub kind: NonlinearityKind,
    pub kappa: f64,
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        Self { kind: NonlinearityKind::Kerr, kappa: 2.0 }
    }
}

/// `eta` picks the catalog member; `e0` and `en` override its levels.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelsConfig {
    pub eta: f64,
    pub e0: Option<f64>,
    pub en: Option<f64>,
}

impl Default for LevelsConfig {
    fn default() -> Self {
        Self { eta: 1.0, e0: None, en: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Linearized,
    Shooting,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    pub w0: f64,
    pub bracket: [f64; 2],
    /// Relative tolerance of the adaptive integrator.
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { method: Method::Linearized, w0: 0.0, bracket: [-1.0, 1.0], tol: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    #[default]
    Spectral,
    SpectralPeriodic,
    Central2,
    Central4,
}

impl SchemeName {
    pub fn scheme(self) -> DerivativeScheme {
        match self {
            Self::Spectral => DerivativeScheme::spectral(),
            Self::SpectralPeriodic => DerivativeScheme::spectral_periodic(),
            Self::Central2 => DerivativeScheme::central2(),
            Self::Central4 => DerivativeScheme::central4(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskConfig {
    /// Relative to the peak of the masked field.
    pub threshold: f64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self { threshold: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub riccati: f64,
    pub partner: f64,
    pub residual: f64,
    pub duality: f64,
    pub drift: f64,
    pub vacuum_residual: f64,
    pub scale: f64,
    pub lax_identity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            riccati: 1e-6,
            partner: 1e-6,
            residual: 1e-6,
            duality: 1e-8,
            drift: 1e-6,
            vacuum_residual: 1e-4,
            scale: 1e-10,
            lax_identity: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn scaled(self, k: f64) -> Self {
        Self {
            riccati: self.riccati * k,
            partner: self.partner * k,
            residual: self.residual * k,
            duality: self.duality * k,
            drift: self.drift * k,
            vacuum_residual: self.vacuum_residual * k,
            scale: self.scale * k,
            lax_identity: self.lax_identity * k,
        }
    }
}

/// CSV files in the `x,re,im,abs` layout to verify instead of the catalog.
/// Without `w` the superpotential is recovered from the pair.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub psi: PathBuf,
    pub phi: PathBuf,
    pub w: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VacuumConfig {
    /// Initial state `amplitude · sech(k x)`.
    pub k: f64,
    pub amplitude: [f64; 2],
    pub dt: f64,
    pub steps: usize,
    /// Optional scale factor `[re, im]` for the homogeneity check.
    pub scale: Option<[f64; 2]>,
    /// Rerun at `dt/2` and report the residual ratio.
    pub convergence: bool,
    /// Every how many steps a state goes into the trajectory file.
    pub record_every: usize,
}

impl Default for VacuumConfig {
    fn default() -> Self {
        Self { k: 2.0, amplitude: [1.0, 0.0], dt: 1e-3, steps: 1000, scale: None, convergence: false, record_every: 100 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub etas: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { etas: vec![0.5, 1.0, 2.0] }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }

    pub fn grid(&self, default_n: usize) -> Result<Grid1D, CliError> {
        let g = self.grid.unwrap_or(GridConfig { xmin: -10.0, xmax: 10.0, n: default_n });
        Ok(Grid1D::new(g.xmin, g.xmax, g.n)?)
    }

    pub fn nonlinearity(&self) -> Result<NonlinearitySpec, CliError> {
        let kappa = self.nonlinearity.kappa;
        if !kappa.is_finite() {
            return Err(CliError::Usage("kappa must be finite".into()));
        }
        Ok(match self.nonlinearity.kind {
            NonlinearityKind::Kerr => NonlinearitySpec::kerr(kappa),
            NonlinearityKind::Saturable => {
                NonlinearitySpec::custom("saturable", move |z| kappa * z.norm_sqr() / (1.0 + z.norm_sqr()))?
            }
        })
    }

    /// Catalog member at `eta` with the configured level overrides applied.
    pub fn family(&self, eta: f64) -> Result<AnalyticSolutionFamily, CliError> {
        let mut fam = AnalyticSolutionFamily::new(eta)?;
        if let Some(e0) = self.levels.e0 {
            fam.e0 = e0;
        }
        if let Some(en) = self.levels.en {
            fam.e_n = en;
        }
        if !(fam.e0.is_finite() && fam.e_n.is_finite()) {
            return Err(CliError::Usage("levels must be finite".into()));
        }
        Ok(fam)
    }

    pub fn options(&self) -> Result<ResidualOptions, CliError> {
        let t = self.masks.threshold;
        if !(0.0..1.0).contains(&t) {
            return Err(CliError::Usage(format!("mask threshold must lie in [0, 1), got {t}")));
        }
        Ok(ResidualOptions { scheme: self.scheme.scheme(), mask_rel: t })
    }
}
