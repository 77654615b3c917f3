//! Eigenvalues, empirical spectral measures and eigenvector residuals.

use std::f64::consts::PI;
use std::io::Write;

use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ermmatrix::{HermitianMatrix, MatrixData, Provenance};
use crate::error::{invalid, ErmError, Result};
use crate::exec::Execution;
use crate::kernel::PeriodicKernel;
use crate::pointset::{torus_diff_into, PointSet};

/// Convention for the atoms of the empirical measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// Atoms at `λ_i / n`, weight 1 each (total mass `n`).
    DividedByN,
    /// Atoms at `λ_i`, weight `1/n` each (total mass 1).
    Unit,
}

/// Sorted eigenvalues of one hermitian matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSample {
    /// Raw eigenvalues of the matrix, ascending.
    pub eigenvalues: Vec<f64>,
    pub normalization: Normalization,
    pub provenance: Provenance,
}

impl SpectralSample {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvalues after applying the normalization, ascending.
    pub fn normalized(&self) -> Vec<f64> {
        let scale = self.scale();
        self.eigenvalues.iter().map(|l| l * scale).collect()
    }

    fn scale(&self) -> f64 {
        match self.normalization {
            Normalization::DividedByN => 1.0 / self.len() as f64,
            Normalization::Unit => 1.0,
        }
    }
}

/// Post-solve checks run by [`eigenvalues_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EigenChecks {
    /// `Σλ = trace` and `Σλ² = ‖H‖_F²`.
    pub identities: bool,
    /// `‖Hv - λv‖` for the smallest and largest pairs (needs eigenvectors).
    pub extreme_pairs: bool,
}

impl Default for EigenChecks {
    fn default() -> Self {
        Self {
            identities: true,
            extreme_pairs: false,
        }
    }
}

/// All eigenvalues, with the trace and Frobenius identities checked.
pub fn eigenvalues(h: &HermitianMatrix, normalization: Normalization) -> Result<SpectralSample> {
    eigenvalues_with(h, normalization, EigenChecks::default())
}

fn solver_error(h: &HermitianMatrix, reason: impl Into<String>) -> ErmError {
    ErmError::Eigensolver {
        provenance: h.provenance().to_string(),
        reason: reason.into(),
    }
}

pub fn eigenvalues_with(h: &HermitianMatrix, normalization: Normalization, checks: EigenChecks) -> Result<SpectralSample> {
    if !h.is_hermitian() {
        return Err(solver_error(h, "matrix is not hermitian"));
    }
    let n = h.order();
    let (values, residual) = match h.data() {
        MatrixData::Real(v) => {
            let m = Mat::<f64>::from_fn(n, n, |i, j| v[i + j * n]);
            solve(&m, checks.extreme_pairs, |i, j| Complex64::new(v[i + j * n], 0.0), n)
        }
        MatrixData::Complex(v) => {
            let m = Mat::<Complex64>::from_fn(n, n, |i, j| v[i + j * n]);
            solve(&m, checks.extreme_pairs, |i, j| v[i + j * n], n)
        }
    }
    .map_err(|e| solver_error(h, e))?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(solver_error(h, "non-finite eigenvalue"));
    }
    let frob = h.frobenius_sq();
    let scale = frob.sqrt().max(f64::MIN_POSITIVE);
    if checks.identities {
        let tol = 1e-12 * n as f64 * scale.max(1.0);
        let trace_err = (values.iter().sum::<f64>() - h.trace().re).abs();
        if trace_err > tol {
            return Err(solver_error(h, format!("trace identity off by {trace_err:e}")));
        }
        let sq_err = (values.iter().map(|l| l * l).sum::<f64>() - frob).abs();
        if sq_err > tol * scale.max(1.0) {
            return Err(solver_error(h, format!("Frobenius identity off by {sq_err:e}")));
        }
    }
    if let Some(r) = residual {
        if r > 1e-12 * n as f64 * scale.max(1.0) {
            return Err(solver_error(h, format!("extreme eigenpair residual {r:e}")));
        }
    }
    Ok(SpectralSample {
        eigenvalues: values,
        normalization,
        provenance: h.provenance().clone(),
    })
}

trait Scalar: faer::traits::ComplexField<Real = f64> + Copy {
    fn to_c64(self) -> Complex64;
}

impl Scalar for f64 {
    fn to_c64(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Scalar for Complex64 {
    fn to_c64(self) -> Complex64 {
        self
    }
}

/// Eigenvalues (ascending) and, on request, the largest residual of the two
/// extreme eigenpairs.
fn solve<T: Scalar>(
    m: &Mat<T>,
    with_vectors: bool,
    entry: impl Fn(usize, usize) -> Complex64,
    n: usize,
) -> std::result::Result<(Vec<f64>, Option<f64>), String> {
    if n == 0 {
        return Ok((Vec::new(), None));
    }
    if !with_vectors {
        let mut v = m
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| format!("{e:?}"))?;
        v.sort_by(f64::total_cmp);
        return Ok((v, None));
    }
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|e| format!("{e:?}"))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let values: Vec<f64> = (0..n).map(|i| s[i].to_c64().re).collect();
    let mut worst = 0.0f64;
    for k in [0, n - 1] {
        let lambda = values[k];
        let mut r2 = 0.0;
        for i in 0..n {
            let hv: Complex64 = (0..n).map(|j| entry(i, j) * u[(j, k)].to_c64()).sum();
            r2 += (hv - u[(i, k)].to_c64() * lambda).norm_sqr();
        }
        worst = worst.max(r2.sqrt());
    }
    let mut sorted = values;
    sorted.sort_by(f64::total_cmp);
    Ok((sorted, Some(worst)))
}

/// Weighted point measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    /// `(location, weight)`, ascending in location.
    pub atoms: Vec<(f64, f64)>,
    pub total_mass: f64,
}

/// `μ_n` (atoms `λ/n`, weight 1) or `ν_n` (atoms `λ`, weight `1/n`).
pub fn empirical_measure(s: &SpectralSample) -> EmpiricalMeasure {
    let n = s.len() as f64;
    let (weight, total_mass) = match s.normalization {
        Normalization::DividedByN => (1.0, n),
        Normalization::Unit => (1.0 / n, 1.0),
    };
    EmpiricalMeasure {
        atoms: s.normalized().into_iter().map(|x| (x, weight)).collect(),
        total_mass,
    }
}

/// Total weight of the atoms in `[a, b)`.
pub fn measure_count(mu: &EmpiricalMeasure, a: f64, b: f64) -> Result<f64> {
    if !(a < b) {
        return Err(invalid("interval", format!("[{a}, {b}) is empty or malformed")));
    }
    Ok(mu
        .atoms
        .iter()
        .filter(|(x, _)| *x >= a && *x < b)
        .map(|(_, w)| w)
        .sum())
}

/// `Σ w x^m`.
pub fn measure_moment(mu: &EmpiricalMeasure, m: u32) -> Result<f64> {
    if m == 0 {
        return Err(invalid("m", "moment order must be at least 1"));
    }
    Ok(mu.atoms.iter().map(|(x, w)| w * x.powi(m as i32)).sum())
}

/// `max |λ|` of the normalized sample.
pub fn spectral_radius(s: &SpectralSample) -> f64 {
    s.normalized().iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `λ_max - λ_second` of the normalized sample.
pub fn spectral_gap(s: &SpectralSample) -> Result<f64> {
    if s.len() < 2 {
        return Err(invalid("sample", "spectral gap needs at least two eigenvalues"));
    }
    let v = s.normalized();
    Ok(v[v.len() - 1] - v[v.len() - 2])
}

/// Which norm [`eigenvector_residual`] reports.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ResidualNorm {
    L2,
    LInf,
    /// `p > 2`.
    Lp(f64),
}

/// `‖A_n Φ - F̂(k) Φ‖_p` with `A_n = A / n` and `Φ_i = e^{2iπ k·X_i}`, by
/// direct matrix-vector products.
pub fn eigenvector_residual(
    f: &PeriodicKernel,
    pts: &PointSet,
    k: &[i64],
    norm: ResidualNorm,
    exec: Execution,
) -> Result<f64> {
    if !f.is_hermitian() {
        return Err(ErmError::KernelRequirement {
            kernel: f.id().to_string(),
            requirement: "hermitian".into(),
        });
    }
    if k.len() != pts.dim() || f.dim() != pts.dim() {
        return Err(ErmError::DimensionMismatch {
            expected: pts.dim(),
            actual: if k.len() != pts.dim() { k.len() } else { f.dim() },
        });
    }
    if let ResidualNorm::Lp(p) = norm {
        if !(p > 2.0 && p.is_finite()) {
            return Err(invalid("p", format!("{p} must be a finite number above 2")));
        }
    }
    let coefficient = f.fourier_coefficient(k)?.value;
    let n = pts.len();
    let phi: Vec<Complex64> = pts
        .iter()
        .map(|x| Complex64::cis(2.0 * PI * k.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum::<f64>()))
        .collect();
    let inv_n = 1.0 / n as f64;
    let residuals: Vec<f64> = exec.map(n, |i| {
        let mut diff = vec![0.0; pts.dim()];
        let xi = pts.point(i);
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, pj) in phi.iter().enumerate() {
            torus_diff_into(xi, pts.point(j), &mut diff);
            acc += f.eval_canonical(&diff) * pj;
        }
        (acc * inv_n - coefficient * phi[i]).norm()
    });
    Ok(match norm {
        ResidualNorm::L2 => residuals.iter().map(|r| r * r).sum::<f64>().sqrt(),
        ResidualNorm::LInf => residuals.iter().fold(0.0, |m, r| m.max(*r)),
        ResidualNorm::Lp(p) => residuals.iter().map(|r| r.powf(p)).sum::<f64>().powf(1.0 / p),
    })
}

/// Writes `realization,index,eigenvalue` rows (raw eigenvalues).
pub fn write_spectra_csv<W: Write>(writer: W, samples: &[(u64, &SpectralSample)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["realization", "index", "eigenvalue"])?;
    for (id, s) in samples {
        for (i, l) in s.eigenvalues.iter().enumerate() {
            w.write_record([id.to_string(), i.to_string(), format!("{l:.17e}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-sample summary for JSON export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub provenance: Provenance,
    pub normalization: Normalization,
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub radius: f64,
    pub gap: Option<f64>,
    /// Moments `m = 1..=4` of the empirical measure.
    pub moments: Vec<f64>,
}

impl SpectrumSummary {
    pub fn of(s: &SpectralSample) -> Self {
        let mu = empirical_measure(s);
        let v = s.normalized();
        Self {
            provenance: s.provenance.clone(),
            normalization: s.normalization,
            n: s.len(),
            min: v.first().copied().unwrap_or(f64::NAN),
            max: v.last().copied().unwrap_or(f64::NAN),
            radius: spectral_radius(s),
            gap: spectral_gap(s).ok(),
            moments: (1..=4).map(|m| measure_moment(&mu, m).unwrap_or(f64::NAN)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ermmatrix::build_a;
    use crate::pointset::{sample_torus, Model};

    fn sample(values: Vec<f64>, normalization: Normalization) -> SpectralSample {
        SpectralSample {
            eigenvalues: values,
            normalization,
            provenance: Provenance {
                builder: "test".into(),
                kernel: "none".into(),
                seed: 0,
                stream: 0,
                model: "torus".into(),
                n: 3,
            },
        }
    }

    #[test]
    fn pure_mode_spectrum() {
        let f = PeriodicKernel::pure_mode(vec![2]).unwrap();
        let pts = sample_torus(60, 1, 11).unwrap();
        let a = build_a(&f, &pts, Execution::Serial).unwrap();
        let s = eigenvalues_with(
            &a,
            Normalization::DividedByN,
            EigenChecks {
                identities: true,
                extreme_pairs: true,
            },
        )
        .unwrap();
        assert!((s.eigenvalues[59] - 60.0).abs() < 1e-10);
        assert!(s.eigenvalues[..59].iter().all(|l| l.abs() < 1e-10));
        assert!((spectral_radius(&s) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isolated_points_spectrum() {
        let f = PeriodicKernel::box_indicator(1, 0.05).unwrap();
        let pts = PointSet::from_coords(vec![-0.4, -0.2, 0.0, 0.2, 0.4], 1, Model::Torus).unwrap();
        let a = build_a(&f, &pts, Execution::Serial).unwrap();
        let s = eigenvalues(&a, Normalization::Unit).unwrap();
        assert!(s.eigenvalues.iter().all(|l| (l - 1.0).abs() < 1e-14));
    }

    #[test]
    fn measure_conventions() {
        let s = sample(vec![0.0, 0.0, 3.0], Normalization::DividedByN);
        let mu = empirical_measure(&s);
        assert_eq!(mu.atoms, vec![(0.0, 1.0), (0.0, 1.0), (1.0, 1.0)]);
        assert_eq!(mu.total_mass, 3.0);
        assert_eq!(measure_count(&mu, 0.5, 1.5).unwrap(), 1.0);
        assert_eq!(measure_count(&mu, f64::NEG_INFINITY, f64::INFINITY).unwrap(), 3.0);
        assert_eq!(measure_count(&mu, 2.0, 3.0).unwrap(), 0.0);
        assert!(measure_count(&mu, 1.0, 1.0).is_err());
        // half-open: the atom at 1 is excluded from [0.5, 1)
        assert_eq!(measure_count(&mu, 0.5, 1.0).unwrap(), 0.0);
        let nu = empirical_measure(&sample(vec![1.0, 2.0, 3.0], Normalization::Unit));
        assert!((nu.total_mass - 1.0).abs() < 1e-15);
        assert!((nu.atoms.iter().map(|a| a.1).sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((measure_moment(&nu, 2).unwrap() - 14.0 / 3.0).abs() < 1e-14);
        assert!(spectral_gap(&sample(vec![1.0], Normalization::Unit)).is_err());
    }

    #[test]
    fn first_moment_is_kernel_at_origin() {
        let f = PeriodicKernel::box_indicator(1, 0.25).unwrap();
        let pts = sample_torus(300, 1, 2).unwrap();
        let s = eigenvalues(&build_a(&f, &pts, Execution::Serial).unwrap(), Normalization::DividedByN).unwrap();
        let mu = empirical_measure(&s);
        assert!((measure_moment(&mu, 1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn residual_of_exact_eigenvector_vanishes() {
        let f = PeriodicKernel::pure_mode(vec![3]).unwrap();
        let pts = sample_torus(80, 1, 6).unwrap();
        for norm in [ResidualNorm::L2, ResidualNorm::LInf, ResidualNorm::Lp(4.0)] {
            let r = eigenvector_residual(&f, &pts, &[3], norm, Execution::Serial).unwrap();
            assert!(r < 1e-12, "{norm:?}: {r}");
        }
        assert!(eigenvector_residual(&f, &pts, &[3], ResidualNorm::Lp(1.5), Execution::Serial).is_err());
    }

    #[test]
    fn residual_matches_spectral_data() {
        // ‖A_nΦ - F̂Φ‖₂ recomputed from an explicit matrix.
        let f = PeriodicKernel::box_indicator(1, 0.25).unwrap();
        let pts = sample_torus(50, 1, 8).unwrap();
        let a = build_a(&f, &pts, Execution::Serial).unwrap();
        let phi: Vec<Complex64> = pts.iter().map(|x| Complex64::cis(2.0 * PI * x[0])).collect();
        let av = a.matvec(&phi);
        let c = 1.0 / PI;
        let direct: f64 = av
            .iter()
            .zip(&phi)
            .map(|(y, p)| (y / 50.0 - p * c).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let r = eigenvector_residual(&f, &pts, &[1], ResidualNorm::L2, Execution::Parallel).unwrap();
        assert!((r - direct).abs() < 1e-12);
    }

    #[test]
    fn csv_and_summary() {
        let s = sample(vec![-1.0, 0.5, 2.0], Normalization::Unit);
        let mut buf = Vec::new();
        write_spectra_csv(&mut buf, &[(7, &s)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().nth(1).unwrap().starts_with("7,0,"));
        let summary = SpectrumSummary::of(&s);
        assert_eq!(summary.radius, 2.0);
        assert_eq!(summary.gap, Some(1.5));
    }
}
