//! Correlation functionals of the centred eigenvalues `λ_i - F(0)`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, ErmError, Result};
use crate::exec::Execution;
use crate::kernel::PeriodicKernel;
use crate::pointset::{realization_rng, torus_diff_into};
use crate::stats::MeanAccumulator;

/// Samples drawn from one random stream.
const BATCH: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub samples: u64,
}

/// `M_2 = -∫_Ω F²` for a real-valued kernel.
pub fn correlation_m2(f: &PeriodicKernel) -> Result<f64> {
    if !f.is_real_valued() {
        return Err(ErmError::KernelRequirement {
            kernel: f.id().to_string(),
            requirement: "real values".into(),
        });
    }
    Ok(-f.l2_norm_sq())
}

/// Determinant by LU with partial pivoting; `a` is row-major `m × m` and is
/// overwritten.
pub fn determinant(a: &mut [Complex64], m: usize) -> Complex64 {
    assert_eq!(a.len(), m * m);
    let mut det = Complex64::new(1.0, 0.0);
    for c in 0..m {
        let pivot = (c..m)
            .max_by(|&x, &y| a[x * m + c].norm().total_cmp(&a[y * m + c].norm()))
            .unwrap();
        if a[pivot * m + c].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != c {
            for k in 0..m {
                a.swap(c * m + k, pivot * m + k);
            }
            det = -det;
        }
        let p = a[c * m + c];
        det *= p;
        for r in c + 1..m {
            let factor = a[r * m + c] / p;
            if factor.norm() == 0.0 {
                continue;
            }
            for k in c..m {
                let v = a[c * m + k];
                a[r * m + k] -= factor * v;
            }
        }
    }
    det
}

/// Monte Carlo mean of `det(Ā(U_1..U_m))^k` over i.i.d. uniform `U_i`, where
/// `Ā(U)_{ij} = F(U_i - U_j) - F(0) δ_{ij}`. With `k = 1` this is `M_m`.
///
/// Samples are drawn in batches, batch `b` from stream `b` of `seed`, and
/// reduced in batch order, so the result does not depend on `exec`.
pub fn correlation_mm_mc(
    f: &PeriodicKernel,
    m: usize,
    k: u32,
    samples: u64,
    seed: u64,
    exec: Execution,
) -> Result<McEstimate> {
    if m < 2 {
        return Err(invalid("m", "needs m >= 2"));
    }
    if k < 1 {
        return Err(invalid("k", "needs k >= 1"));
    }
    if samples < 2 {
        return Err(invalid("samples", "needs at least two samples"));
    }
    let d = f.dim();
    let batches = (samples as usize).div_ceil(BATCH);
    let partial: Vec<MeanAccumulator> = exec.map(batches, |b| {
        let mut rng = realization_rng(seed, b as u64);
        let count = BATCH.min(samples as usize - b * BATCH);
        let mut u = vec![0.0; m * d];
        let mut diff = vec![0.0; d];
        let mut mat = vec![Complex64::new(0.0, 0.0); m * m];
        let mut acc = MeanAccumulator::new();
        for _ in 0..count {
            for c in u.iter_mut() {
                *c = rng.random::<f64>() - 0.5;
            }
            for i in 0..m {
                for j in 0..m {
                    mat[i * m + j] = if i == j {
                        Complex64::new(0.0, 0.0)
                    } else {
                        torus_diff_into(&u[i * d..(i + 1) * d], &u[j * d..(j + 1) * d], &mut diff);
                        f.eval_canonical(&diff)
                    };
                }
            }
            let det = determinant(&mut mat, m).powu(k);
            acc.push(det.re);
        }
        acc
    });
    let mut total = MeanAccumulator::new();
    for a in &partial {
        total.merge(a);
    }
    Ok(McEstimate {
        estimate: total.mean(),
        standard_error: total.standard_error(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinant_small_cases() {
        let mut a = vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(3.0, 0.0),
        ];
        assert!((determinant(&mut a, 2) - Complex64::new(5.0, 0.0)).norm() < 1e-14);
        // zero-diagonal 3x3: det = 2 a b c when symmetric
        let (x, y, z) = (0.3, -0.7, 1.1);
        let mut b: Vec<Complex64> = [0.0, x, z, x, 0.0, y, z, y, 0.0]
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        assert!((determinant(&mut b, 3).re - 2.0 * x * y * z).abs() < 1e-14);
        let mut c = vec![Complex64::new(0.0, 0.0); 4];
        assert_eq!(determinant(&mut c, 2), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn m2_examples() {
        let f = PeriodicKernel::box_indicator(1, 0.25).unwrap();
        assert_eq!(correlation_m2(&f).unwrap(), -0.5);
        assert!((correlation_m2(&f.scaled(3.0)).unwrap() + 4.5).abs() < 1e-3);
        assert!(correlation_m2(&PeriodicKernel::pure_mode(vec![1]).unwrap()).is_err());
    }

    #[test]
    fn mc_is_schedule_independent() {
        let f = PeriodicKernel::box_indicator(1, 0.25).unwrap();
        let s = correlation_mm_mc(&f, 3, 1, 40_000, 5, Execution::Serial).unwrap();
        let p = correlation_mm_mc(&f, 3, 1, 40_000, 5, Execution::Parallel).unwrap();
        assert_eq!(s, p);
        assert!((s.estimate - 0.375).abs() < 4.0 * s.standard_error + 1e-3);
    }

    #[test]
    fn rejects_bad_arguments() {
        let f = PeriodicKernel::box_indicator(1, 0.25).unwrap();
        assert!(correlation_mm_mc(&f, 1, 1, 10, 0, Execution::Serial).is_err());
        assert!(correlation_mm_mc(&f, 2, 0, 10, 0, Execution::Serial).is_err());
        assert!(correlation_mm_mc(&f, 2, 1, 1, 0, Execution::Serial).is_err());
    }
}
