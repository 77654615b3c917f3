//! Executes one experiment and assembles its manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use erm_core::ermmatrix::{build_a, build_b, build_geometric_adjacency, RadiusScale};
use erm_core::exec::Execution;
use erm_core::kernel::{
    convolution_power_at_zero, level_set_density, BinSpec, CompactDescriptor, CompactKernel, ConvolutionSpec,
    PeriodicKernel,
};
use erm_core::pointset::{sample_scaled_stream, sample_torus_stream, seed_for_size, Model, PointSet};
use erm_core::spectra::{
    eigenvalues, eigenvector_residual, empirical_measure, measure_count, measure_moment, spectral_gap,
    spectral_radius, Normalization, ResidualNorm, SpectralSample,
};
use erm_core::stats::MeanAccumulator;
use erm_core::theory::{
    correlation_m2, correlation_mm_mc, finite_size_correction, high_density_moment, limit_measure, mu_moment,
    nu_gamma_polynomial, poisson_bound_j, MomentPolynomial,
};
use serde::Serialize;

use crate::config::{Command, Diagnostic, ExperimentConfig, ModelSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// How a record's pass/fail is decided from its own numbers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Tolerance {
    /// `|empirical - theory| <= k · se + absolute`.
    StandardErrors { k: f64, absolute: f64 },
    /// `|empirical - theory| <= rel · |theory|`.
    Relative { rel: f64 },
    /// `empirical == theory`.
    Exact,
}

impl Tolerance {
    pub fn check(&self, theory: f64, empirical: f64, se: f64) -> bool {
        let dev = (empirical - theory).abs();
        match *self {
            Tolerance::StandardErrors { k, absolute } => dev <= k * se + absolute,
            Tolerance::Relative { rel } => dev <= rel * theory.abs(),
            Tolerance::Exact => dev == 0.0,
        }
    }
}

/// One row of `results.csv`, plus provenance and verdict.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Record {
    pub quantity: String,
    pub m: Option<usize>,
    pub gamma: Option<f64>,
    pub theory: Option<f64>,
    pub empirical_mean: Option<f64>,
    pub empirical_se: Option<f64>,
    pub n: Option<usize>,
    pub realizations: Option<u64>,
    pub seed: Option<u64>,
    /// Streams `0..realizations` of `seed` were used.
    pub streams: Option<String>,
    pub tolerance: Option<Tolerance>,
    pub pass: Option<bool>,
}

impl Record {
    fn new(quantity: impl Into<String>) -> Self {
        Record {
            quantity: quantity.into(),
            m: None,
            gamma: None,
            theory: None,
            empirical_mean: None,
            empirical_se: None,
            n: None,
            realizations: None,
            seed: None,
            streams: None,
            tolerance: None,
            pass: None,
        }
    }

    fn judged(mut self, tolerance: Option<Tolerance>) -> Self {
        self.tolerance = tolerance;
        self.pass = match (tolerance, self.theory, self.empirical_mean) {
            (Some(t), Some(th), Some(e)) => Some(t.check(th, e, self.empirical_se.unwrap_or(0.0))),
            _ => None,
        };
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolverStats {
    pub eigensolves: u64,
    pub failures: u64,
    pub failure_messages: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultManifest {
    pub version: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub records: Vec<Record>,
    pub solver: SolverStats,
    pub artifacts: Vec<String>,
}

impl ResultManifest {
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.pass != Some(false))
    }
}

#[derive(Debug)]
pub enum RunError {
    Config(Vec<Diagnostic>),
    Io(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(d) => {
                write!(f, "invalid config:")?;
                for x in d {
                    write!(f, "\n  {x}")?;
                }
                Ok(())
            }
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

fn io_err(e: impl std::fmt::Display) -> RunError {
    RunError::Io(e.to_string())
}

fn config_err(field: &str, e: impl std::fmt::Display) -> RunError {
    RunError::Config(vec![Diagnostic {
        field: field.into(),
        constraint: e.to_string(),
    }])
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_root: PathBuf,
    pub exec: Execution,
    /// Use these points for every realization instead of sampling.
    pub load_points: Option<PathBuf>,
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    exec: Execution,
    dir: PathBuf,
    loaded: Option<PointSet>,
    records: Vec<Record>,
    stats: SolverStats,
    artifacts: Vec<String>,
}

/// Runs `config` and writes `results.csv` and `manifest.json` (plus the
/// optional artifacts) under `<out_root>/<command>/`.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<ResultManifest, RunError> {
    let diagnostics = config.validate();
    if !diagnostics.is_empty() {
        return Err(RunError::Config(diagnostics));
    }
    let command = config.command.expect("validated");
    let dir = opts.out_root.join(command.name());
    fs::create_dir_all(&dir).map_err(io_err)?;
    let loaded = match &opts.load_points {
        Some(path) => Some(load_points(config, path)?),
        None => None,
    };
    let mut runner = Runner {
        cfg: config,
        exec: opts.exec,
        dir,
        loaded,
        records: Vec::new(),
        stats: SolverStats::default(),
        artifacts: Vec::new(),
    };
    match command {
        Command::Spectrum => runner.spectrum()?,
        Command::MeasureCompare => runner.measure_compare()?,
        Command::MomentConvergence => runner.moment_convergence()?,
        Command::DensitySweep => runner.density_sweep()?,
        Command::PoissonBound => runner.poisson_bound()?,
        Command::EigenvectorResidual => runner.eigenvector_residual()?,
        Command::Correlations => runner.correlations()?,
        Command::LevelSet => runner.level_set()?,
    }
    runner.finish(command)
}

fn load_points(cfg: &ExperimentConfig, path: &Path) -> Result<PointSet, RunError> {
    let file = fs::File::open(path).map_err(|e| config_err("load_points", format!("{}: {e}", path.display())))?;
    let probe = PointSet::read_csv(file, Model::Torus).map_err(|e| config_err("load_points", e))?;
    if probe.dim() != cfg.kernel.dim() {
        return Err(config_err("load_points", "point dimension differs from the kernel's"));
    }
    let model = match cfg.model {
        ModelSpec::Torus => Model::Torus,
        ModelSpec::Scaled { gamma, .. } => {
            let delta = erm_core::pointset::scaled_delta(probe.len(), probe.dim(), gamma)
                .map_err(|e| config_err("load_points", e))?;
            Model::ScaledCube { delta, gamma }
        }
    };
    PointSet::from_coords(probe.coords().to_vec(), probe.dim(), model).map_err(|e| config_err("load_points", e))
}

fn summary(values: impl IntoIterator<Item = f64>) -> (f64, f64, u64) {
    let acc: MeanAccumulator = values.into_iter().collect();
    (acc.mean(), acc.standard_error(), acc.count())
}

impl Runner<'_> {
    fn sizes(&self) -> Vec<usize> {
        match &self.loaded {
            Some(p) => vec![p.len()],
            None => self.cfg.n_list.clone(),
        }
    }

    fn count(&self) -> usize {
        if self.loaded.is_some() {
            1
        } else {
            self.cfg.realizations
        }
    }

    fn mc_tolerance(&self) -> Option<Tolerance> {
        Some(Tolerance::StandardErrors {
            k: self.cfg.tolerances.standard_errors,
            absolute: self.cfg.tolerances.absolute,
        })
    }

    fn periodic(&self) -> Result<PeriodicKernel, RunError> {
        self.cfg.kernel.periodic().map_err(|e| config_err("kernel", e))
    }

    fn compact(&self) -> Result<CompactKernel, RunError> {
        match self.cfg.kernel.compact() {
            Some(k) => k.map_err(|e| config_err("kernel", e)),
            None => Err(config_err("kernel", "needs a compactly supported kernel")),
        }
    }

    fn points(&self, n: usize, gamma: Option<f64>, r: usize) -> erm_core::Result<PointSet> {
        if let Some(p) = &self.loaded {
            return Ok(p.clone());
        }
        let seed = seed_for_size(self.cfg.master_seed, n);
        let d = self.cfg.kernel.dim();
        match gamma {
            Some(g) => sample_scaled_stream(n, d, g, seed, r as u64),
            None => sample_torus_stream(n, d, seed, r as u64),
        }
    }

    /// Runs `work` on every realization at size `n`; failed realizations are
    /// dropped and counted.
    fn realizations<T, F>(&mut self, n: usize, gamma: Option<f64>, work: F) -> Result<Vec<T>, RunError>
    where
        T: Send,
        F: Fn(&PointSet) -> erm_core::Result<T> + Sync + Send,
    {
        let results: Vec<erm_core::Result<(PointSet, T)>> = self.exec.map(self.count(), |r| {
            let pts = self.points(n, gamma, r)?;
            let v = work(&pts)?;
            Ok((pts, v))
        });
        let mut out = Vec::with_capacity(results.len());
        for (r, res) in results.into_iter().enumerate() {
            match res {
                Ok((pts, v)) => {
                    if r == 0 && self.cfg.save_points && !self.artifacts.iter().any(|a| a == "points.csv") {
                        let file = fs::File::create(self.dir.join("points.csv")).map_err(io_err)?;
                        pts.write_csv(file).map_err(io_err)?;
                        self.artifacts.push("points.csv".into());
                    }
                    out.push(v);
                }
                Err(e) => {
                    self.stats.failures += 1;
                    self.stats.failure_messages.push(format!("n={n} realization {r}: {e}"));
                }
            }
        }
        Ok(out)
    }

    fn provenance(&self, mut rec: Record, n: usize, count: usize) -> Record {
        rec.n = Some(n);
        rec.realizations = Some(count as u64);
        if self.loaded.is_none() {
            rec.seed = Some(seed_for_size(self.cfg.master_seed, n));
            rec.streams = Some(format!("0..{}", self.cfg.realizations));
        }
        rec
    }

    /// Spectra of `A` (torus, atoms `λ/n`) or `B` (scaled, atoms `λ`).
    fn spectra(&mut self, n: usize, gamma: Option<f64>) -> Result<Vec<SpectralSample>, RunError> {
        let samples = match gamma {
            None => {
                let f = self.periodic()?;
                self.realizations(n, None, |pts| {
                    eigenvalues(&build_a(&f, pts, Execution::Serial)?, Normalization::DividedByN)
                })?
            }
            Some(g) => {
                let f = self.compact()?;
                let periodic = matches!(
                    self.cfg.model,
                    ModelSpec::Scaled {
                        periodic_extension: true,
                        ..
                    }
                );
                self.realizations(n, Some(g), |pts| {
                    eigenvalues(&build_b(&f, pts, periodic, Execution::Serial)?, Normalization::Unit)
                })?
            }
        };
        self.stats.eigensolves += samples.len() as u64;
        if self.cfg.save_spectra {
            self.save_spectra(n, &samples)?;
        }
        Ok(samples)
    }

    fn save_spectra(&mut self, n: usize, samples: &[SpectralSample]) -> Result<(), RunError> {
        for (r, s) in samples.iter().enumerate() {
            let name = format!("spectrum_{r}.csv");
            let path = self.dir.join(&name);
            let fresh = !self.artifacts.contains(&name);
            let mut file = fs::OpenOptions::new()
                .create(true)
                .write(true)
                .append(!fresh)
                .truncate(fresh)
                .open(&path)
                .map_err(io_err)?;
            if fresh {
                writeln!(file, "n,index,eigenvalue").map_err(io_err)?;
                self.artifacts.push(name);
            }
            for (i, l) in s.eigenvalues.iter().enumerate() {
                writeln!(file, "{n},{i},{l}").map_err(io_err)?;
            }
        }
        Ok(())
    }

    fn spectrum(&mut self) -> Result<(), RunError> {
        let gamma = self.cfg.gamma();
        let atoms = match gamma {
            None => {
                let mu = limit_measure(&self.periodic()?, self.cfg.lattice_cutoff.min(64), self.exec)
                    .map_err(|e| config_err("kernel", e))?;
                let mut v: Vec<f64> = mu.values().collect();
                v.sort_by(|a, b| b.total_cmp(a));
                Some(v)
            }
            Some(_) => None,
        };
        for n in self.sizes() {
            let samples = self.spectra(n, gamma)?;
            let (mean, se, k) = summary(samples.iter().map(spectral_radius));
            let mut rec = Record::new("spectral_radius");
            rec.gamma = gamma;
            rec.theory = atoms.as_ref().map(|a| a.iter().fold(0.0f64, |m, x| m.max(x.abs())));
            rec.empirical_mean = Some(mean);
            rec.empirical_se = Some(se);
            self.records.push(self.provenance(rec, n, k as usize));
            let gaps: Vec<f64> = samples.iter().filter_map(|s| spectral_gap(s).ok()).collect();
            let (mean, se, k) = summary(gaps);
            let mut rec = Record::new("spectral_gap");
            rec.gamma = gamma;
            rec.theory = atoms.as_ref().filter(|a| a.len() >= 2).map(|a| a[0] - a[1]);
            rec.empirical_mean = Some(mean);
            rec.empirical_se = Some(se);
            self.records.push(self.provenance(rec, n, k as usize));
        }
        Ok(())
    }

    fn measure_compare(&mut self) -> Result<(), RunError> {
        let f = self.periodic()?;
        let mu = limit_measure(&f, self.cfg.lattice_cutoff, self.exec).map_err(|e| config_err("kernel", e))?;
        let windows = if self.cfg.windows.is_empty() {
            default_windows(mu.values())
        } else {
            self.cfg.windows.clone()
        };
        for n in self.sizes() {
            let samples = self.spectra(n, None)?;
            for w in &windows {
                let counts: Vec<f64> = samples
                    .iter()
                    .map(|s| measure_count(&empirical_measure(s), w[0], w[1]).unwrap_or(f64::NAN))
                    .collect();
                let (mean, se, k) = summary(counts);
                let mut rec = Record::new(format!("window_count[{},{})", w[0], w[1]));
                rec.theory = Some(mu.count(w[0], w[1]) as f64);
                rec.empirical_mean = Some(mean);
                rec.empirical_se = Some(se);
                let rec = self.provenance(rec, n, k as usize).judged(self.mc_tolerance());
                self.records.push(rec);
            }
        }
        Ok(())
    }

    fn moment_theory(&self, m: usize, n: usize) -> Result<f64, RunError> {
        let f = self.periodic()?;
        if m == 1 {
            return Ok(f.value_at_origin().re);
        }
        let cutoff = self.cfg.lattice_cutoff;
        let mu = mu_moment(&f, m as u32, cutoff, self.exec).map_err(|e| config_err("kernel", e))?;
        let corr = finite_size_correction(&f, m as u32, cutoff, self.exec).map_err(|e| config_err("kernel", e))?;
        Ok(mu.value + corr / n as f64)
    }

    fn nu_polynomials(&self) -> Result<Vec<MomentPolynomial>, RunError> {
        let f = self.compact()?;
        self.cfg
            .moments
            .iter()
            .map(|&m| nu_gamma_polynomial(&f, m, &self.cfg.quadrature, self.exec).map_err(|e| config_err("moments", e)))
            .collect()
    }

    fn moment_convergence(&mut self) -> Result<(), RunError> {
        let gamma = self.cfg.gamma();
        let polys = match gamma {
            Some(_) => Some(self.nu_polynomials()?),
            None => None,
        };
        for n in self.sizes() {
            let samples = self.spectra(n, gamma)?;
            for (i, &m) in self.cfg.moments.iter().enumerate() {
                let theory = match (&polys, gamma) {
                    (Some(p), Some(g)) => p[i].evaluate(g).value,
                    _ => self.moment_theory(m, n)?,
                };
                let values = samples
                    .iter()
                    .map(|s| measure_moment(&empirical_measure(s), m as u32).unwrap_or(f64::NAN));
                let (mean, se, k) = summary(values);
                let mut rec = Record::new(if gamma.is_some() { "nu_moment" } else { "mu_moment" });
                rec.m = Some(m);
                rec.gamma = gamma;
                rec.theory = Some(theory);
                rec.empirical_mean = Some(mean);
                rec.empirical_se = Some(se);
                let rec = self.provenance(rec, n, k as usize).judged(self.mc_tolerance());
                self.records.push(rec);
            }
        }
        Ok(())
    }

    fn density_sweep(&mut self) -> Result<(), RunError> {
        let f = self.compact()?;
        let polys = self.nu_polynomials()?;
        let gammas = self.cfg.gammas.clone();
        for n in self.sizes() {
            for &g in &gammas {
                let samples = self.spectra(n, Some(g))?;
                for (i, &m) in self.cfg.moments.iter().enumerate() {
                    let theory = polys[i].evaluate(g).value;
                    let values = samples
                        .iter()
                        .map(|s| measure_moment(&empirical_measure(s), m as u32).unwrap_or(f64::NAN));
                    let (mean, se, k) = summary(values);
                    let mut rec = Record::new("nu_moment");
                    rec.m = Some(m);
                    rec.gamma = Some(g);
                    rec.theory = Some(theory);
                    rec.empirical_mean = Some(mean);
                    rec.empirical_se = Some(se);
                    let rec = self.provenance(rec, n, k as usize).judged(self.mc_tolerance());
                    self.records.push(rec);
                    let lead = high_density_moment(&f, g, m).map_err(|e| config_err("kernel", e))?.value;
                    let mut rec = Record::new("high_density_ratio");
                    rec.m = Some(m);
                    rec.gamma = Some(g);
                    rec.theory = Some(theory / lead);
                    rec.empirical_mean = Some(mean / lead);
                    rec.empirical_se = Some(se / lead);
                    self.records.push(self.provenance(rec, n, k as usize));
                }
            }
        }
        Ok(())
    }

    fn poisson_bound(&mut self) -> Result<(), RunError> {
        let f = self.compact()?;
        let gamma = self.cfg.gamma().expect("validated");
        let sup = f.sup_norm();
        let d = f.dim() as f64;
        // the graph G(X, delta), widened if the support leaves the unit ball
        let reach = match f.descriptor() {
            CompactDescriptor::BallIndicator { .. } => f.support_radius(),
            _ => f.support_radius() * d.sqrt(),
        }
        .max(1.0);
        let periodic = matches!(
            self.cfg.model,
            ModelSpec::Scaled {
                periodic_extension: true,
                ..
            }
        );
        for n in self.sizes() {
            let bound = poisson_bound_j(n as u64, gamma).map_err(|e| config_err("n_list", e))?;
            let mut rec = Record::new("poisson_j");
            rec.gamma = Some(gamma);
            rec.theory = Some(bound.j as f64);
            rec.n = Some(n);
            self.records.push(rec);
            let rows = self.realizations(n, Some(gamma), |pts| {
                let b = build_b(&f, pts, periodic, Execution::Serial)?;
                let rho = spectral_radius(&eigenvalues(&b, Normalization::Unit)?);
                let graph = build_geometric_adjacency(pts, reach, RadiusScale::ScaledByDelta, Execution::Serial)?;
                Ok((rho, graph.max_degree()))
            })?;
            self.stats.eigensolves += rows.len() as u64;
            let within = rows.iter().map(|(rho, _)| f64::from(u8::from(*rho <= bound.bound(sup))));
            let (mean, se, k) = summary(within);
            let mut rec = Record::new("within_poisson_bound");
            rec.gamma = Some(gamma);
            rec.empirical_mean = Some(mean);
            rec.empirical_se = Some(se);
            self.records.push(self.provenance(rec, n, k as usize));
            let dominated = rows
                .iter()
                .map(|(rho, deg)| f64::from(u8::from(*rho <= sup * (1.0 + *deg as f64))));
            let (mean, se, k) = summary(dominated);
            let mut rec = Record::new("degree_domination");
            rec.gamma = Some(gamma);
            rec.theory = Some(1.0);
            rec.empirical_mean = Some(mean);
            rec.empirical_se = Some(se);
            let rec = self.provenance(rec, n, k as usize).judged(Some(Tolerance::Exact));
            self.records.push(rec);
        }
        Ok(())
    }

    fn eigenvector_residual(&mut self) -> Result<(), RunError> {
        let f = self.periodic()?;
        let k = self.cfg.mode.clone().unwrap_or_else(|| vec![0; f.dim()]);
        let coeff = f.fourier_coefficient(&k).map_err(|e| config_err("mode", e))?.value;
        let theory = f.l2_norm_sq() - coeff.norm_sqr();
        for n in self.sizes() {
            let rows = self.realizations(n, None, |pts| {
                let l2 = eigenvector_residual(&f, pts, &k, ResidualNorm::L2, Execution::Serial)?;
                let sup = eigenvector_residual(&f, pts, &k, ResidualNorm::LInf, Execution::Serial)?;
                Ok((l2 * l2, sup))
            })?;
            let (mean, se, c) = summary(rows.iter().map(|r| r.0));
            let mut rec = Record::new("residual_l2_squared");
            rec.theory = Some(theory);
            rec.empirical_mean = Some(mean);
            rec.empirical_se = Some(se);
            let rec = self.provenance(rec, n, c as usize).judged(self.mc_tolerance());
            self.records.push(rec);
            let (mean, se, c) = summary(rows.iter().map(|r| r.1));
            let mut rec = Record::new("residual_linf");
            rec.theory = Some(0.0);
            rec.empirical_mean = Some(mean);
            rec.empirical_se = Some(se);
            self.records.push(self.provenance(rec, n, c as usize));
        }
        Ok(())
    }

    fn correlations(&mut self) -> Result<(), RunError> {
        let f = self.periodic()?;
        let spec = self.cfg.correlation.clone();
        for &m in &spec.m_list {
            let seed = self.cfg.master_seed ^ ((m as u64) << 40) ^ ((spec.k as u64) << 32);
            let est = match correlation_mm_mc(&f, m, spec.k, spec.samples, seed, self.exec) {
                Ok(e) => e,
                Err(e) => {
                    self.stats.failures += 1;
                    self.stats.failure_messages.push(format!("m={m}: {e}"));
                    continue;
                }
            };
            let mut rec = Record::new(format!("correlation_k{}", spec.k));
            rec.m = Some(m);
            rec.theory = if m == 2 && spec.k == 1 { correlation_m2(&f).ok() } else { None };
            rec.empirical_mean = Some(est.estimate);
            rec.empirical_se = Some(est.standard_error);
            rec.realizations = Some(est.samples);
            rec.seed = Some(seed);
            rec.streams = Some(format!("0..{}", est.samples.div_ceil(1 << 14)));
            self.records.push(rec.judged(self.mc_tolerance()));
        }
        Ok(())
    }

    fn level_set(&mut self) -> Result<(), RunError> {
        let f = self.compact()?;
        let ls = &self.cfg.level_set;
        let psi = level_set_density(
            &f,
            ls.xi_cutoff,
            ls.grid_step,
            BinSpec::Geometric {
                per_decade: ls.bins_per_decade,
            },
            ls.eps0,
        )
        .map_err(|e| config_err("level_set", e))?;
        let file = fs::File::create(self.dir.join("level_set.csv")).map_err(io_err)?;
        psi.write_csv(file).map_err(io_err)?;
        self.artifacts.push("level_set.csv".into());
        let spec = ConvolutionSpec::default_for(f.dim());
        for &m in &self.cfg.moments {
            let conv = convolution_power_at_zero(&f, m, &spec).map_err(|e| config_err("moments", e))?;
            let mut rec = Record::new("level_set_moment");
            rec.m = Some(m);
            rec.theory = Some(conv.value());
            rec.empirical_mean = Some(psi.moment(m as u32));
            let tol = Some(Tolerance::Relative {
                rel: self.cfg.tolerances.quadrature_relative,
            });
            self.records.push(rec.judged(tol));
        }
        Ok(())
    }

    fn finish(mut self, command: Command) -> Result<ResultManifest, RunError> {
        let csv_path = self.dir.join("results.csv");
        let mut file = fs::File::create(&csv_path).map_err(io_err)?;
        write_results(&mut file, command, &self.records).map_err(io_err)?;
        self.artifacts.insert(0, "results.csv".into());
        self.artifacts.push("manifest.json".into());
        let manifest = ResultManifest {
            version: VERSION.into(),
            command: command.name().into(),
            config: self.cfg.clone(),
            records: self.records,
            solver: self.stats,
            artifacts: self.artifacts,
        };
        let json = serde_json::to_string_pretty(&manifest).map_err(io_err)?;
        fs::write(self.dir.join("manifest.json"), json + "\n").map_err(io_err)?;
        Ok(manifest)
    }
}

/// Windows of half-width 0.025 around the three largest distinct positive atoms.
fn default_windows(values: impl Iterator<Item = f64>) -> Vec<[f64; 2]> {
    let mut v: Vec<f64> = values.filter(|x| *x > 0.05).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    v.into_iter().take(3).map(|x| [x - 0.025, x + 0.025]).collect()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `results.csv`: a version comment line, then the comparison table.
pub fn write_results<W: Write>(w: &mut W, command: Command, records: &[Record]) -> std::io::Result<()> {
    writeln!(w, "# erm-spectra v{VERSION} {}", command.name())?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["quantity", "m", "gamma", "theory", "empirical_mean", "empirical_se", "n", "realizations"])?;
    for r in records {
        csv.write_record([
            r.quantity.clone(),
            opt(r.m),
            opt(r.gamma),
            opt(r.theory),
            opt(r.empirical_mean),
            opt(r.empirical_se),
            opt(r.n),
            opt(r.realizations),
        ])?;
    }
    csv.flush()
}
