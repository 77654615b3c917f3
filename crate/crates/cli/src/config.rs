//! Experiment configuration: a single JSON document with defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use erm_core::kernel::{CompactKernel, PeriodicKernel};
use erm_core::num_complex::Complex64;
use erm_core::theory::{NuGammaSpec, MAX_QUADRATURE_ORDER};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectrum,
    MeasureCompare,
    MomentConvergence,
    DensitySweep,
    PoissonBound,
    EigenvectorResidual,
    Correlations,
    LevelSet,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::MeasureCompare => "measure-compare",
            Command::MomentConvergence => "moment-convergence",
            Command::DensitySweep => "density-sweep",
            Command::PoissonBound => "poisson-bound",
            Command::EigenvectorResidual => "eigenvector-residual",
            Command::Correlations => "correlations",
            Command::LevelSet => "level-set",
        }
    }

    /// Whether the command samples point sets at all.
    pub fn samples_points(self) -> bool {
        !matches!(self, Command::Correlations | Command::LevelSet)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub k: Vec<i64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum KernelSpec {
    Box { d: usize, r: f64 },
    Ball { d: usize, r: f64 },
    PureMode { k: Vec<i64> },
    FourierSeries { d: usize, coeffs: Vec<Coefficient> },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Box { d: 1, r: 0.25 }
    }
}

impl KernelSpec {
    pub fn dim(&self) -> usize {
        match self {
            KernelSpec::Box { d, .. } | KernelSpec::Ball { d, .. } | KernelSpec::FourierSeries { d, .. } => *d,
            KernelSpec::PureMode { k } => k.len(),
        }
    }

    pub fn periodic(&self) -> erm_core::Result<PeriodicKernel> {
        match self {
            KernelSpec::Box { d, r } => PeriodicKernel::box_indicator(*d, *r),
            KernelSpec::Ball { d, r } => PeriodicKernel::ball_indicator(*d, *r),
            KernelSpec::PureMode { k } => PeriodicKernel::pure_mode(k.clone()),
            KernelSpec::FourierSeries { d, coeffs } => {
                let map: BTreeMap<Vec<i64>, Complex64> =
                    coeffs.iter().map(|c| (c.k.clone(), Complex64::new(c.re, c.im))).collect();
                PeriodicKernel::fourier_series(*d, map)
            }
        }
    }

    /// Compactly supported version; only indicators have one.
    pub fn compact(&self) -> Option<erm_core::Result<CompactKernel>> {
        match self {
            KernelSpec::Box { d, r } => Some(CompactKernel::box_indicator(*d, *r)),
            KernelSpec::Ball { d, r } => Some(CompactKernel::ball_indicator(*d, *r)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSpec {
    Torus,
    Scaled {
        gamma: f64,
        #[serde(default)]
        periodic_extension: bool,
    },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Torus
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Monte Carlo comparisons pass within this many standard errors.
    pub standard_errors: f64,
    /// Relative tolerance for quadrature against quadrature.
    pub quadrature_relative: f64,
    /// Absolute slack added to Monte Carlo comparisons.
    pub absolute: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            standard_errors: 3.0,
            quadrature_relative: 0.02,
            absolute: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrelationSpec {
    pub m_list: Vec<usize>,
    pub k: u32,
    pub samples: u64,
}

impl Default for CorrelationSpec {
    fn default() -> Self {
        Self {
            m_list: vec![2, 3],
            k: 1,
            samples: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LevelSetSpec {
    /// `None` picks the cutoff automatically.
    pub xi_cutoff: Option<f64>,
    pub grid_step: f64,
    pub eps0: f64,
    pub bins_per_decade: usize,
}

impl Default for LevelSetSpec {
    fn default() -> Self {
        Self {
            xi_cutoff: None,
            grid_step: 1.0 / 64.0,
            eps0: 1e-6,
            bins_per_decade: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub kernel: KernelSpec,
    pub model: ModelSpec,
    pub n_list: Vec<usize>,
    pub realizations: usize,
    pub master_seed: u64,
    /// Moment orders for the moment studies.
    pub moments: Vec<usize>,
    /// Lattice cutoff `K` for the atomic limit measure.
    pub lattice_cutoff: u32,
    /// Half-open windows `[a, b)` for measure-compare; empty means one window
    /// around each of the largest atoms.
    pub windows: Vec<[f64; 2]>,
    /// Densities for density-sweep.
    pub gammas: Vec<f64>,
    /// Lattice point `k` for eigenvector-residual.
    pub mode: Option<Vec<i64>>,
    pub quadrature: NuGammaSpec,
    pub correlation: CorrelationSpec,
    pub level_set: LevelSetSpec,
    pub tolerances: Tolerances,
    pub output_dir: Option<PathBuf>,
    pub save_points: bool,
    pub save_spectra: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: None,
            kernel: KernelSpec::default(),
            model: ModelSpec::default(),
            n_list: vec![500],
            realizations: 10,
            master_seed: 1,
            moments: vec![1, 2, 3],
            lattice_cutoff: 400,
            windows: Vec::new(),
            gammas: vec![1.0, 10.0, 100.0],
            mode: None,
            quadrature: NuGammaSpec::default(),
            correlation: CorrelationSpec::default(),
            level_set: LevelSetSpec::default(),
            tolerances: Tolerances::default(),
            output_dir: None,
            save_points: false,
            save_spectra: false,
        }
    }
}

/// One violated constraint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub constraint: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.constraint)
    }
}

fn diag(field: &str, constraint: impl Into<String>) -> Diagnostic {
    Diagnostic {
        field: field.into(),
        constraint: constraint.into(),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn from_path(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Density `γ` of the scaled model, if that is the model.
    pub fn gamma(&self) -> Option<f64> {
        match self.model {
            ModelSpec::Scaled { gamma, .. } => Some(gamma),
            ModelSpec::Torus => None,
        }
    }

    /// Every violated constraint; empty iff the config can run.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let command = match self.command {
            Some(c) => c,
            None => {
                out.push(diag("command", "missing"));
                Command::Spectrum
            }
        };
        let d = self.kernel.dim();
        if d == 0 {
            out.push(diag("kernel.d", "dimension must be at least 1"));
        }
        match &self.kernel {
            KernelSpec::Box { r, .. } | KernelSpec::Ball { r, .. } => {
                if !(*r > 0.0) {
                    out.push(diag("kernel.r", "radius must be positive"));
                } else if *r > 0.5 {
                    out.push(diag("kernel.r", format!("support exceeds Ω: r = {r} > 1/2")));
                }
            }
            KernelSpec::FourierSeries { d, coeffs } => {
                if coeffs.is_empty() {
                    out.push(diag("kernel.coeffs", "at least one coefficient"));
                }
                for c in coeffs {
                    if c.k.len() != *d {
                        out.push(diag("kernel.coeffs", format!("lattice point {:?} has wrong dimension", c.k)));
                    }
                    if !(c.re.is_finite() && c.im.is_finite()) {
                        out.push(diag("kernel.coeffs", "coefficients must be finite"));
                    }
                }
            }
            KernelSpec::PureMode { .. } => {}
        }
        if out.is_empty() {
            if let Err(e) = self.kernel.periodic() {
                out.push(diag("kernel", e.to_string()));
            }
        }
        if command.samples_points() {
            if self.n_list.is_empty() {
                out.push(diag("n_list", "must be nonempty"));
            }
            if self.n_list.iter().any(|&n| n < 2) {
                out.push(diag("n_list", "every n must be at least 2"));
            }
            if self.realizations == 0 {
                out.push(diag("realizations", "must be at least 1"));
            }
        }
        if let ModelSpec::Scaled { gamma, .. } = self.model {
            if !(gamma > 0.0 && gamma.is_finite()) {
                out.push(diag("model.gamma", "must be positive"));
            } else if let Some(&n) = self.n_list.iter().find(|&&n| n > 0 && gamma > n as f64) {
                out.push(diag("model.gamma", format!("gamma/n must be at most 1 (n = {n})")));
            }
        }
        let needs_compact = matches!(command, Command::DensitySweep | Command::PoissonBound | Command::LevelSet)
            || (self.gamma().is_some() && command.samples_points());
        if needs_compact && self.kernel.compact().is_none() {
            out.push(diag("kernel", format!("{} needs a compactly supported kernel (box or ball)", command.name())));
        }
        let needs_torus = matches!(
            command,
            Command::MeasureCompare | Command::EigenvectorResidual | Command::Correlations
        );
        if needs_torus && self.gamma().is_some() {
            out.push(diag("model", format!("{} runs on the torus model", command.name())));
        }
        let needs_scaled = matches!(command, Command::DensitySweep | Command::PoissonBound);
        if needs_scaled && self.gamma().is_none() {
            out.push(diag("model", format!("{} runs on the scaled model", command.name())));
        }
        if matches!(command, Command::MomentConvergence | Command::DensitySweep) {
            if self.moments.is_empty() {
                out.push(diag("moments", "must be nonempty"));
            }
            if self.moments.iter().any(|&m| m == 0 || m > MAX_QUADRATURE_ORDER) {
                out.push(diag("moments", format!("orders must lie in 1..={MAX_QUADRATURE_ORDER}")));
            }
        }
        if command == Command::DensitySweep {
            if self.gammas.is_empty() {
                out.push(diag("gammas", "must be nonempty"));
            }
            if self.gammas.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
                out.push(diag("gammas", "every density must be positive"));
            }
            if let Some(&n) = self.n_list.iter().find(|&&n| self.gammas.iter().any(|&g| g > n as f64)) {
                out.push(diag("gammas", format!("gamma/n must be at most 1 (n = {n})")));
            }
        }
        for w in &self.windows {
            if !(w[0] < w[1]) {
                out.push(diag("windows", format!("[{}, {}) is empty", w[0], w[1])));
            }
        }
        if let Some(k) = &self.mode {
            if k.len() != d {
                out.push(diag("mode", "lattice point has wrong dimension"));
            }
        }
        if command == Command::Correlations {
            if self.correlation.m_list.iter().any(|&m| m < 2) || self.correlation.m_list.is_empty() {
                out.push(diag("correlation.m_list", "orders must be at least 2"));
            }
            if self.correlation.k == 0 {
                out.push(diag("correlation.k", "must be at least 1"));
            }
            if self.correlation.samples < 2 {
                out.push(diag("correlation.samples", "must be at least 2"));
            }
        }
        if command == Command::LevelSet {
            let ls = &self.level_set;
            if !(ls.grid_step > 0.0) {
                out.push(diag("level_set.grid_step", "must be positive"));
            }
            if !(ls.eps0 > 0.0) {
                out.push(diag("level_set.eps0", "must be positive"));
            }
            if ls.bins_per_decade == 0 {
                out.push(diag("level_set.bins_per_decade", "must be positive"));
            }
            if ls.xi_cutoff.is_some_and(|x| !(x > 0.0)) {
                out.push(diag("level_set.xi_cutoff", "must be positive"));
            }
        }
        let q = &self.quadrature;
        if q.qmc_shifts < 2 || q.qmc_samples_per_shift == 0 || q.tensor_budget == 0 {
            out.push(diag("quadrature", "needs at least two shifts and nonzero budgets"));
        }
        let t = &self.tolerances;
        if !(t.standard_errors > 0.0 && t.quadrature_relative > 0.0 && t.absolute >= 0.0) {
            out.push(diag("tolerances", "must be positive"));
        }
        out
    }
}
