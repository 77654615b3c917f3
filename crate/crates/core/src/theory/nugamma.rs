//! Moments of the limit measure `ν_γ` of the scaled model, their
//! high-density asymptotics and the second-order term.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{BreakdownTerm, MomentMethod, MomentReport};
use crate::combinatorics::enumerate_surjection_classes;
use crate::error::{invalid, ErmError, Result};
use crate::exec::Execution;
use crate::kernel::quadrature::rqmc_cube;
use crate::kernel::{convolution_power_at_zero, CompactKernel, ConvolutionSpec};

/// Largest `m` accepted by [`nu_gamma_polynomial`].
pub const MAX_QUADRATURE_ORDER: usize = 8;

/// Quadrature settings for the surjection integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NuGammaSpec {
    /// Integrals of total dimension up to this use a tensor midpoint grid.
    pub max_tensor_dim: usize,
    /// Approximate number of grid points per tensor integral.
    pub tensor_budget: usize,
    pub qmc_samples_per_shift: u64,
    pub qmc_shifts: usize,
    pub seed: u64,
}

impl Default for NuGammaSpec {
    fn default() -> Self {
        Self {
            max_tensor_dim: 3,
            tensor_budget: 4_000_000,
            qmc_samples_per_shift: 1 << 16,
            qmc_shifts: 16,
            seed: 0x6e75_5f67,
        }
    }
}

/// `ν_γ(P_m) = Σ_p c_p γ^{p-1}` with its per-`p` coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentPolynomial {
    pub m: usize,
    /// `(p, c_p, error of c_p)` for `p = 1..=m`.
    pub coefficients: Vec<(usize, f64, f64)>,
}

impl MomentPolynomial {
    pub fn coefficient(&self, p: usize) -> Option<f64> {
        self.coefficients.iter().find(|c| c.0 == p).map(|c| c.1)
    }

    pub fn evaluate(&self, gamma: f64) -> MomentReport {
        let breakdown: Vec<BreakdownTerm> = self
            .coefficients
            .iter()
            .map(|&(p, c, e)| {
                let g = gamma.powi(p as i32 - 1);
                BreakdownTerm {
                    p,
                    coefficient: c,
                    contribution: g * c,
                    error_estimate: g * e,
                }
            })
            .collect();
        MomentReport {
            m: self.m,
            value: breakdown.iter().map(|b| b.contribution).sum(),
            method: if self.m == 1 {
                MomentMethod::ClosedForm
            } else {
                MomentMethod::SurjectionQuadrature
            },
            error_estimate: breakdown.iter().map(|b| b.error_estimate).sum(),
            breakdown,
            warnings: Vec::new(),
        }
    }
}

fn require_hermitian(f: &CompactKernel) -> Result<()> {
    if f.is_hermitian() {
        Ok(())
    } else {
        Err(ErmError::KernelRequirement {
            kernel: f.id().to_string(),
            requirement: "hermitian".into(),
        })
    }
}

/// Coefficients `c_p` of `ν_γ(P_m)` as a polynomial in `γ`.
///
/// `c_1 = f(0)^m`; for `p >= 2`, `c_p` is the sum over canonical surjection
/// classes `φ` of `∫ Π_j f(y_{φ(j)} - y_{φ(j+1)}) dy_2..dy_p` (indices cyclic,
/// `y_1 = 0`), the class size `p!` cancelling the `1/p!` prefactor.
pub fn nu_gamma_polynomial(f: &CompactKernel, m: usize, spec: &NuGammaSpec, exec: Execution) -> Result<MomentPolynomial> {
    require_hermitian(f)?;
    if m == 0 || m > MAX_QUADRATURE_ORDER {
        return Err(invalid("m", format!("{m} must lie in 1..={MAX_QUADRATURE_ORDER}")));
    }
    let f0 = f.value_at_origin().re;
    let mut coefficients = vec![(1, f0.powi(m as i32), 0.0)];
    let half_width = (m - 1) as f64 * f.support_radius();
    for p in 2..=m {
        let mut c = 0.0;
        let mut e = 0.0;
        for (idx, class) in enumerate_surjection_classes(m, p)?.iter().enumerate() {
            let seed = spec.seed ^ ((m as u64) << 48) ^ ((p as u64) << 32) ^ idx as u64;
            let (v, err) = class_integral(f, &class.representative, p, half_width, spec, seed, exec);
            c += v;
            e += err;
        }
        if !c.is_finite() {
            return Err(ErmError::Quadrature {
                context: format!("{}: surjection integrals m = {m}, p = {p}", f.id()),
            });
        }
        coefficients.push((p, c, e));
    }
    Ok(MomentPolynomial { m, coefficients })
}

/// `ν_γ(P_m)` with its per-`p` breakdown.
pub fn nu_gamma_moment(
    f: &CompactKernel,
    gamma: f64,
    m: usize,
    spec: &NuGammaSpec,
    exec: Execution,
) -> Result<MomentReport> {
    if !(gamma > 0.0) {
        return Err(invalid("gamma", format!("{gamma} must be positive")));
    }
    Ok(nu_gamma_polynomial(f, m, spec, exec)?.evaluate(gamma))
}

/// One surjection integral and its error estimate.
fn class_integral(
    f: &CompactKernel,
    phi: &[u8],
    p: usize,
    half_width: f64,
    spec: &NuGammaSpec,
    seed: u64,
    exec: Execution,
) -> (f64, f64) {
    let d = f.dim();
    let dim = d * (p - 1);
    let edges: Vec<(usize, usize)> = (0..phi.len())
        .map(|j| (phi[j] as usize - 1, phi[(j + 1) % phi.len()] as usize - 1))
        .collect();
    if dim <= spec.max_tensor_dim {
        let per_axis = (spec.tensor_budget as f64).powf(1.0 / dim as f64).min(20_001.0);
        let r = f.support_radius();
        let k = ((per_axis - 1.0) * r / (2.0 * half_width) - 0.5).floor().max(1.0) as usize;
        let fine = tensor_integral(f, &edges, p, half_width, r / (k as f64 + 0.5), exec);
        let coarse = tensor_integral(f, &edges, p, half_width, r / ((k / 2).max(1) as f64 + 0.5), exec);
        (fine, (fine - coarse).abs())
    } else {
        let integrand = |x: &[f64]| -> f64 {
            let mut y = vec![0.0; d * p];
            let mut diff = vec![0.0; d];
            y[d..].copy_from_slice(x);
            product(f, &edges, &y, &mut diff, d).re
        };
        rqmc_cube(
            dim,
            -half_width,
            half_width,
            spec.qmc_samples_per_shift,
            spec.qmc_shifts,
            seed,
            exec,
            integrand,
        )
    }
}

#[inline]
fn product(f: &CompactKernel, edges: &[(usize, usize)], y: &[f64], diff: &mut [f64], d: usize) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    for &(a, b) in edges {
        for k in 0..d {
            diff[k] = y[a * d + k] - y[b * d + k];
        }
        let v = f.eval(diff);
        if v.re == 0.0 && v.im == 0.0 {
            return v;
        }
        acc *= v;
    }
    acc
}

/// Midpoint rule on the lattice `hZ^{d(p-1)}` restricted to a box covering
/// `[-L, L]^{d(p-1)}`.
///
/// Callers pick `h = R/(k + 1/2)` so the support edge `±R` falls on a cell
/// boundary; for indicator kernels this keeps the error `O(h^2)`. Every
/// coordinate difference is a multiple of `h`, so in `d = 1` `f` is
/// tabulated once.
fn tensor_integral(f: &CompactKernel, edges: &[(usize, usize)], p: usize, half_width: f64, h: f64, exec: Execution) -> f64 {
    let d = f.dim();
    let dim = d * (p - 1);
    let centre = (half_width / h).ceil() as usize;
    let n = 2 * centre + 1;
    let cell = h.powi(dim as i32);
    let rest = n.pow(dim as u32 - 1);
    let partial: Vec<f64> = if d == 1 {
        let table: Vec<Complex64> = (0..2 * n - 1)
            .map(|i| f.eval(&[(i as f64 - (n - 1) as f64) * h]))
            .collect();
        exec.map(n, |i0| {
            let mut idx = vec![centre; p];
            idx[1] = i0;
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..rest {
                let mut rr = r;
                for slot in idx.iter_mut().skip(2) {
                    *slot = rr % n;
                    rr /= n;
                }
                let mut prod = Complex64::new(1.0, 0.0);
                for &(a, b) in edges {
                    let v = table[idx[a] + n - 1 - idx[b]];
                    if v.re == 0.0 && v.im == 0.0 {
                        prod = v;
                        break;
                    }
                    prod *= v;
                }
                acc += prod;
            }
            acc.re
        })
    } else {
        let node = |i: usize| (i as f64 - centre as f64) * h;
        exec.map(n, |i0| {
            let mut y = vec![0.0; d * p];
            let mut diff = vec![0.0; d];
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..rest {
                // axis 0 is the first coordinate of y_2; the rest follow
                y[d] = node(i0);
                let mut rr = r;
                for slot in y.iter_mut().skip(d + 1) {
                    *slot = node(rr % n);
                    rr /= n;
                }
                acc += product(f, edges, &y, &mut diff, d);
            }
            acc.re
        })
    };
    partial.iter().sum::<f64>() * cell
}

/// `γ^{m-1} f^{*m}(0)`, the leading behaviour of `ν_γ(P_m)` as `γ → ∞`.
pub fn high_density_moment(f: &CompactKernel, gamma: f64, m: usize) -> Result<MomentReport> {
    require_hermitian(f)?;
    if m == 0 {
        return Err(invalid("m", "moment order must be at least 1"));
    }
    let conv = convolution_power_at_zero(f, m, &ConvolutionSpec::default_for(f.dim()))?;
    let g = gamma.powi(m as i32 - 1);
    Ok(MomentReport {
        m,
        value: g * conv.value(),
        method: MomentMethod::HighDensityAsymptotic,
        error_estimate: if conv.exact.is_some() { 0.0 } else { g * conv.direct_error },
        breakdown: Vec::new(),
        warnings: conv.warning.into_iter().collect(),
    })
}

/// `I_m = γ^{m-2} Σ_{p=1}^{m-1} p f^{*p}(0) f^{*(m-p)}(0)`.
pub fn second_order_term(f: &CompactKernel, gamma: f64, m: usize) -> Result<f64> {
    require_hermitian(f)?;
    if m < 2 {
        return Err(invalid("m", "second-order term needs m >= 2"));
    }
    let spec = ConvolutionSpec::default_for(f.dim());
    let powers = (1..m)
        .map(|p| Ok(convolution_power_at_zero(f, p, &spec)?.value()))
        .collect::<Result<Vec<f64>>>()?;
    let sum: f64 = (1..m).map(|p| p as f64 * powers[p - 1] * powers[m - p - 1]).sum();
    Ok(gamma.powi(m as i32 - 2) * sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box1() -> CompactKernel {
        CompactKernel::box_indicator(1, 0.25).unwrap()
    }

    #[test]
    fn first_moment_is_f0() {
        let r = nu_gamma_moment(&box1(), 3.0, 1, &NuGammaSpec::default(), Execution::Serial).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.method, MomentMethod::ClosedForm);
    }

    #[test]
    fn box_polynomials() {
        let spec = NuGammaSpec::default();
        let p2 = nu_gamma_polynomial(&box1(), 2, &spec, Execution::Parallel).unwrap();
        assert_eq!(p2.coefficient(1), Some(1.0));
        assert!((p2.coefficient(2).unwrap() - 0.5).abs() < 1e-3);
        let p3 = nu_gamma_polynomial(&box1(), 3, &spec, Execution::Parallel).unwrap();
        assert!((p3.coefficient(2).unwrap() - 1.5).abs() < 5e-3, "{p3:?}");
        assert!((p3.coefficient(3).unwrap() - 0.1875).abs() < 2e-3, "{p3:?}");
        let r = p3.evaluate(2.0);
        let sum: f64 = r.breakdown.iter().map(|b| b.contribution).sum();
        assert_eq!(sum, r.value);
        assert!(r.error_estimate >= 0.0);
    }

    #[test]
    fn leading_term_is_convolution_power() {
        let spec = NuGammaSpec::default();
        let p4 = nu_gamma_polynomial(&box1(), 4, &spec, Execution::Parallel).unwrap();
        let lead = crate::kernel::box_convolution_power_at_zero(1, 0.25, 4);
        assert!((p4.coefficient(4).unwrap() - lead).abs() / lead < 0.01, "{p4:?}");
        // the p = m - 1 term is the second-order coefficient
        let i4 = second_order_term(&box1(), 1.0, 4).unwrap();
        assert!((p4.coefficient(3).unwrap() - i4).abs() / i4 < 0.01, "{p4:?} vs {i4}");
    }

    #[test]
    fn two_dim_uses_both_rules() {
        let f = CompactKernel::box_indicator(2, 0.25).unwrap();
        let spec = NuGammaSpec {
            qmc_samples_per_shift: 1 << 14,
            ..NuGammaSpec::default()
        };
        let p3 = nu_gamma_polynomial(&f, 3, &spec, Execution::Parallel).unwrap();
        // product kernel: coefficients are powers of the 1-d ones
        assert!((p3.coefficient(2).unwrap() - 3.0 * 0.25).abs() < 0.01, "{p3:?}");
        let lead = 0.1875f64.powi(2);
        assert!((p3.coefficient(3).unwrap() - lead).abs() / lead < 0.03, "{p3:?}");
    }

    #[test]
    fn high_density_examples() {
        let r = high_density_moment(&box1(), 10.0, 3).unwrap();
        assert!((r.value - 18.75).abs() < 1e-12);
        for gamma in [0.1, 1.0, 50.0] {
            assert_eq!(high_density_moment(&box1(), gamma, 1).unwrap().value, 1.0);
        }
        assert!((second_order_term(&box1(), 7.0, 3).unwrap() - 1.5 * 7.0).abs() < 1e-12);
        assert!((second_order_term(&box1(), 7.0, 2).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_arguments() {
        let spec = NuGammaSpec::default();
        assert!(nu_gamma_moment(&box1(), 0.0, 2, &spec, Execution::Serial).is_err());
        assert!(nu_gamma_moment(&box1(), 1.0, 9, &spec, Execution::Serial).is_err());
        assert!(second_order_term(&box1(), 1.0, 1).is_err());
    }
}
