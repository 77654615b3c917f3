//! The atomic limit measure `μ = Σ_k δ_{F̂(k)}` and its moments.

use serde::{Deserialize, Serialize};

use super::{MomentMethod, MomentReport};
use crate::error::{ErmError, Result};
use crate::exec::Execution;
use crate::kernel::{LatticePoint, PeriodicDescriptor, PeriodicKernel};

/// Truncation of `μ` to `‖k‖_∞ <= cutoff`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    /// `(k, F̂(k))`, lattice points in lexicographic order.
    pub atoms: Vec<(LatticePoint, f64)>,
    pub cutoff: u32,
    /// `Σ_{‖k‖_∞ > cutoff} |F̂(k)|²` from Parseval, clamped at 0.
    pub tail_bound: f64,
    /// True if every coefficient outside the cutoff is known to vanish.
    pub exact: bool,
}

impl AtomicMeasure {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|(_, v)| *v)
    }

    /// `Σ F̂(k)^m` over the retained atoms.
    pub fn moment(&self, m: u32) -> f64 {
        self.values().map(|v| v.powi(m as i32)).sum()
    }

    /// Number of atoms in `[a, b)`.
    pub fn count(&self, a: f64, b: f64) -> usize {
        self.values().filter(|v| *v >= a && *v < b).count()
    }

    /// `max |F̂(k)|` over the shell `‖k‖_∞ = s`.
    pub fn shell_max(&self, s: u32) -> f64 {
        self.atoms
            .iter()
            .filter(|(k, _)| k.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0) == s as u64)
            .fold(0.0, |m, (_, v)| m.max(v.abs()))
    }
}

fn lattice_point(flat: usize, cutoff: u32, d: usize) -> LatticePoint {
    let side = 2 * cutoff as usize + 1;
    let mut k = vec![0i64; d];
    let mut rf = flat;
    for j in (0..d).rev() {
        k[j] = (rf % side) as i64 - cutoff as i64;
        rf /= side;
    }
    k
}

fn has_finite_spectrum(f: &PeriodicKernel, cutoff: u32) -> bool {
    let inside = |k: &LatticePoint| k.iter().all(|c| c.unsigned_abs() <= cutoff as u64);
    match f.descriptor() {
        PeriodicDescriptor::PureMode { k } => inside(k),
        PeriodicDescriptor::FourierSeries { coeffs } => coeffs.keys().all(inside),
        _ => false,
    }
}

/// All `F̂(k)` with `‖k‖_∞ <= cutoff`. `F` must be hermitian so the atoms are real.
pub fn limit_measure(f: &PeriodicKernel, cutoff: u32, exec: Execution) -> Result<AtomicMeasure> {
    if !f.is_hermitian() {
        return Err(ErmError::KernelRequirement {
            kernel: f.id().to_string(),
            requirement: "hermitian (real Fourier coefficients)".into(),
        });
    }
    let d = f.dim();
    let total = (2 * cutoff as usize + 1).pow(d as u32);
    let values: Vec<Result<(LatticePoint, f64)>> = exec.map(total, |flat| {
        let k = lattice_point(flat, cutoff, d);
        let v = f.fourier_coefficient(&k)?.value.re;
        Ok((k, v))
    });
    let atoms = values.into_iter().collect::<Result<Vec<_>>>()?;
    let exact = has_finite_spectrum(f, cutoff);
    let captured: f64 = atoms.iter().map(|(_, v)| v * v).sum();
    let tail_bound = if exact { 0.0 } else { (f.l2_norm_sq() - captured).max(0.0) };
    Ok(AtomicMeasure {
        atoms,
        cutoff,
        tail_bound,
        exact,
    })
}

/// `μ(P_m) = Σ_k F̂(k)^m`, truncated at `cutoff`.
///
/// For `m >= 2` the truncation error is at most `tail^{m/2}`. For `m = 1`
/// the series need not converge absolutely; the reported error is the change
/// between the cutoffs `K/2` and `K`.
pub fn mu_moment(f: &PeriodicKernel, m: u32, cutoff: u32, exec: Execution) -> Result<MomentReport> {
    if m == 0 {
        return Err(crate::error::invalid("m", "moment order must be at least 1"));
    }
    let mu = limit_measure(f, cutoff, exec)?;
    let value = mu.moment(m);
    let mut warnings = Vec::new();
    let error_estimate = if mu.exact {
        0.0
    } else if m >= 2 {
        mu.tail_bound.powf(m as f64 / 2.0)
    } else {
        let half = cutoff / 2;
        let coarse: f64 = mu
            .atoms
            .iter()
            .filter(|(k, _)| k.iter().all(|c| c.unsigned_abs() <= half as u64))
            .map(|(_, v)| v)
            .sum();
        let abs_sum: f64 = mu.values().map(f64::abs).sum();
        if abs_sum > 10.0 * value.abs().max(1.0) || (value - coarse).abs() > 1e-3 {
            warnings.push(format!(
                "m = 1 partial sum at cutoff {cutoff} moved by {:.3e} from cutoff {half}; the coefficients may not be absolutely summable",
                (value - coarse).abs()
            ));
        }
        (value - coarse).abs()
    };
    Ok(MomentReport {
        m: m as usize,
        value,
        method: if mu.exact {
            MomentMethod::ClosedForm
        } else {
            MomentMethod::LatticeSum
        },
        error_estimate,
        breakdown: Vec::new(),
        warnings,
    })
}

/// The `1/n` correction of `E μ_n(P_m)`:
/// `Σ_{q=1}^{m-1} q μ(P_q) μ(P_{m-q}) - m(m-1)/2 μ(P_m)`.
///
/// `μ(P_1)` is taken as `F(0)`, its value whenever `F` is continuous at 0,
/// rather than the slowly converging lattice sum.
pub fn finite_size_correction(f: &PeriodicKernel, m: u32, cutoff: u32, exec: Execution) -> Result<f64> {
    if m < 2 {
        return Err(crate::error::invalid("m", "finite-size correction needs m >= 2"));
    }
    let mu = limit_measure(f, cutoff, exec)?;
    let f0 = f.value_at_origin().re;
    let moment = |q: u32| if q == 1 { f0 } else { mu.moment(q) };
    let cross: f64 = (1..m).map(|q| q as f64 * moment(q) * moment(m - q)).sum();
    Ok(cross - (m * (m - 1)) as f64 / 2.0 * moment(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    use num_complex::Complex64;

    fn box1() -> PeriodicKernel {
        PeriodicKernel::box_indicator(1, 0.25).unwrap()
    }

    #[test]
    fn box_atoms() {
        let mu = limit_measure(&box1(), 2, Execution::Serial).unwrap();
        let v: Vec<f64> = mu.values().collect();
        assert_eq!(v.len(), 5);
        let expected = [0.0, 1.0 / PI, 0.5, 1.0 / PI, 0.0];
        for (a, b) in v.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(mu.tail_bound > 0.0);
        assert_eq!(mu.count(0.45, 0.55), 1);
        assert_eq!(mu.count(0.29, 0.34), 2);
    }

    #[test]
    fn shells_decay() {
        let mu = limit_measure(&box1(), 41, Execution::Parallel).unwrap();
        // odd shells carry 1/(πk); compare shells of equal parity
        let odd: Vec<f64> = (0..20).map(|i| mu.shell_max(2 * i + 1)).collect();
        assert!(odd.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn pure_mode_measure() {
        let f = PeriodicKernel::pure_mode(vec![1, -1]).unwrap();
        let mu = limit_measure(&f, 1, Execution::Serial).unwrap();
        assert!(mu.exact);
        assert_eq!(mu.values().filter(|v| *v != 0.0).collect::<Vec<_>>(), vec![1.0]);
        for m in 1..5 {
            let r = mu_moment(&f, m, 1, Execution::Serial).unwrap();
            assert_eq!(r.value, 1.0);
            assert_eq!(r.method, MomentMethod::ClosedForm);
        }
        assert_eq!(finite_size_correction(&f, 2, 1, Execution::Serial).unwrap(), 0.0);
    }

    #[test]
    fn box_moments() {
        let r1 = mu_moment(&box1(), 1, 4000, Execution::Parallel).unwrap();
        assert!((r1.value - 1.0).abs() < 1e-3, "{r1:?}");
        let r2 = mu_moment(&box1(), 2, 400, Execution::Serial).unwrap();
        assert!((r2.value - 0.5).abs() < 1e-3);
        assert!(r2.error_estimate >= 0.5 - r2.value);
        let c = finite_size_correction(&box1(), 2, 400, Execution::Serial).unwrap();
        assert!((c - 0.5).abs() < 1e-3);
    }

    #[test]
    fn even_moments_increase_with_cutoff() {
        let f = box1();
        let mut last = 0.0;
        for k in [1, 2, 4, 8, 16] {
            let v = mu_moment(&f, 4, k, Execution::Serial).unwrap().value;
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn series_kernel_is_exact() {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(vec![0], Complex64::new(0.5, 0.0));
        coeffs.insert(vec![1], Complex64::new(0.25, 0.0));
        coeffs.insert(vec![-1], Complex64::new(0.25, 0.0));
        let f = PeriodicKernel::fourier_series(1, coeffs).unwrap();
        let r = mu_moment(&f, 3, 3, Execution::Serial).unwrap();
        assert_eq!(r.error_estimate, 0.0);
        assert!((r.value - (0.125 + 2.0 * 0.015625)).abs() < 1e-15);
        // m = 3: μ1 μ2 + 2 μ2 μ1 - 3 μ3 with μ1 = F(0) = 1
        let c = finite_size_correction(&f, 3, 3, Execution::Serial).unwrap();
        assert!((c - (3.0 * 0.375 - 3.0 * 0.15625)).abs() < 1e-14);
    }
}
