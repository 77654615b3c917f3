//! Tensor-product midpoint rules and a Cranley-Patterson randomized
//! low-discrepancy rule.

use num_complex::Complex64;
use rand::Rng;

use crate::exec::Execution;
use crate::pointset::realization_rng;
use crate::stats::MeanAccumulator;

/// Default nodes per axis for integrals over the unit cube.
pub fn default_nodes(d: usize) -> usize {
    match d {
        1 => 4096,
        2 => 512,
        3 => 64,
        _ => 16,
    }
}

/// Midpoint rule for `f` over `[lo, hi]^d` with `nodes` points per axis.
pub fn midpoint_cube<F>(d: usize, lo: f64, hi: f64, nodes: usize, f: F) -> Complex64
where
    F: Fn(&[f64]) -> Complex64,
{
    let h = (hi - lo) / nodes as f64;
    let axis: Vec<f64> = (0..nodes).map(|i| lo + (i as f64 + 0.5) * h).collect();
    let mut idx = vec![0usize; d];
    let mut x: Vec<f64> = vec![axis[0]; d];
    let mut acc = Complex64::new(0.0, 0.0);
    loop {
        acc += f(&x);
        // odometer
        let mut j = 0;
        loop {
            if j == d {
                return acc * h.powi(d as i32);
            }
            idx[j] += 1;
            if idx[j] < nodes {
                x[j] = axis[idx[j]];
                break;
            }
            idx[j] = 0;
            x[j] = axis[0];
            j += 1;
        }
    }
}

/// Midpoint rule at `nodes` and `nodes / 2`; returns the fine value and the
/// absolute difference as an error estimate.
pub fn midpoint_with_error<F>(d: usize, lo: f64, hi: f64, nodes: usize, f: F) -> (Complex64, f64)
where
    F: Fn(&[f64]) -> Complex64,
{
    let fine = midpoint_cube(d, lo, hi, nodes, &f);
    let coarse = midpoint_cube(d, lo, hi, (nodes / 2).max(1), &f);
    (fine, (fine - coarse).norm())
}

/// Fourier sum `∫_{[-1/2,1/2]^d} F(x) e^{-2iπ k·x} dx` by the midpoint rule,
/// with per-axis phase tables.
pub fn fourier_midpoint<F>(d: usize, k: &[i64], nodes: usize, f: F) -> Complex64
where
    F: Fn(&[f64]) -> Complex64,
{
    let h = 1.0 / nodes as f64;
    let axis: Vec<f64> = (0..nodes).map(|i| -0.5 + (i as f64 + 0.5) * h).collect();
    let phases: Vec<Vec<Complex64>> = k
        .iter()
        .map(|&kj| {
            axis.iter()
                .map(|&x| Complex64::cis(-2.0 * std::f64::consts::PI * kj as f64 * x))
                .collect()
        })
        .collect();
    let mut idx = vec![0usize; d];
    let mut x: Vec<f64> = vec![axis[0]; d];
    let mut acc = Complex64::new(0.0, 0.0);
    loop {
        let mut phase = Complex64::new(1.0, 0.0);
        for j in 0..d {
            phase *= phases[j][idx[j]];
        }
        acc += f(&x) * phase;
        let mut j = 0;
        loop {
            if j == d {
                return acc * h.powi(d as i32);
            }
            idx[j] += 1;
            if idx[j] < nodes {
                x[j] = axis[idx[j]];
                break;
            }
            idx[j] = 0;
            x[j] = axis[0];
            j += 1;
        }
    }
}

/// Generalized golden-ratio sequence (the `R_d` sequence): the unique
/// positive root of `x^(d+1) = x + 1` gives the per-axis increments.
#[derive(Clone, Debug)]
pub struct GoldenSequence {
    alpha: Vec<f64>,
}

impl GoldenSequence {
    pub fn new(dim: usize) -> Self {
        let mut phi = 2.0f64;
        for _ in 0..64 {
            phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
        }
        let alpha = (1..=dim).map(|j| phi.powi(-(j as i32)).fract()).collect();
        Self { alpha }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// Point `i` of the sequence shifted by `shift` (mod 1), in `[0, 1)^dim`.
    pub fn point_into(&self, i: u64, shift: &[f64], out: &mut [f64]) {
        for ((o, a), s) in out.iter_mut().zip(&self.alpha).zip(shift) {
            // (i * a) mod 1 with the integer part removed first for accuracy.
            let v = (i as f64 * a).fract() + s;
            *o = v - v.floor();
        }
    }
}

/// Randomized quasi-Monte Carlo estimate of `∫_{[lo,hi]^dim} f`.
///
/// Shift `s` is drawn from stream `s` of `seed`, so the shifts (and the
/// result) do not depend on `exec`. Returns the mean over shifts and its
/// standard error.
#[allow(clippy::too_many_arguments)]
pub fn rqmc_cube<F>(
    dim: usize,
    lo: f64,
    hi: f64,
    samples_per_shift: u64,
    shifts: usize,
    seed: u64,
    exec: Execution,
    f: F,
) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let seq = GoldenSequence::new(dim);
    let width = hi - lo;
    let volume = width.powi(dim as i32);
    let estimates: Vec<f64> = exec.map(shifts, |s| {
        let mut rng = realization_rng(seed, s as u64);
        let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let mut u = vec![0.0; dim];
        let mut x = vec![0.0; dim];
        let mut acc = 0.0;
        for i in 0..samples_per_shift {
            seq.point_into(i, &shift, &mut u);
            for (xj, uj) in x.iter_mut().zip(&u) {
                *xj = lo + width * uj;
            }
            acc += f(&x);
        }
        volume * acc / samples_per_shift as f64
    });
    let stats: MeanAccumulator = estimates.into_iter().collect();
    (stats.mean(), stats.standard_error())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_integrates_quadratic() {
        // ∫_{-1}^{1} x^2 dx = 2/3
        let v = midpoint_cube(1, -1.0, 1.0, 2000, |x| Complex64::new(x[0] * x[0], 0.0));
        assert!((v.re - 2.0 / 3.0).abs() < 1e-6);
        let w = midpoint_cube(2, 0.0, 1.0, 200, |x| Complex64::new(x[0] * x[1], 0.0));
        assert!((w.re - 0.25).abs() < 1e-10);
    }

    #[test]
    fn fourier_midpoint_of_pure_mode() {
        let c = fourier_midpoint(1, &[3], 256, |x| {
            Complex64::cis(2.0 * std::f64::consts::PI * 3.0 * x[0])
        });
        assert!((c - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let z = fourier_midpoint(1, &[2], 256, |x| {
            Complex64::cis(2.0 * std::f64::consts::PI * 3.0 * x[0])
        });
        assert!(z.norm() < 1e-12);
    }

    #[test]
    fn rqmc_volume_of_simplex_corner() {
        // ∫_{[0,1]^3} 1(x+y+z <= 1) = 1/6
        let (m, se) = rqmc_cube(3, 0.0, 1.0, 1 << 14, 8, 1, Execution::Serial, |x| {
            if x.iter().sum::<f64>() <= 1.0 {
                1.0
            } else {
                0.0
            }
        });
        assert!((m - 1.0 / 6.0).abs() < 1e-3, "{m} ± {se}");
        assert!(se < 1e-3);
    }
}
