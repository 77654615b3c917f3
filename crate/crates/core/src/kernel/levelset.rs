//! Histogram of the pushforward of Lebesgue measure under `f̂`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::convolution::transform_grid;
use super::CompactKernel;
use crate::error::{invalid, ErmError, Result};

/// Binning of the `t` axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BinSpec {
    /// Logarithmic bins in `|t|` from `eps0` upward, mirrored for `t < 0`.
    Geometric { per_decade: usize },
    /// `count` equal bins over `[min f̂, max f̂]`, clipped at `±eps0`.
    Uniform { count: usize },
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec::Geometric { per_decade: 200 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSetBin {
    pub lo: f64,
    pub hi: f64,
    /// Lebesgue volume of `{ξ : f̂(ξ) ∈ [lo, hi)}` on the grid.
    pub mass: f64,
}

impl LevelSetBin {
    fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Histogram approximation of the density `ψ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSetDensity {
    /// Sorted, disjoint, none meeting `(-eps0, eps0)`.
    pub bins: Vec<LevelSetBin>,
    pub xi_cutoff: f64,
    pub grid_step: f64,
    pub eps0: f64,
    /// False if the cutoff scan hit its size cap before `|f̂|` fell below `eps0`.
    pub cutoff_verified: bool,
}

impl LevelSetDensity {
    pub fn total_mass(&self) -> f64 {
        self.bins.iter().map(|b| b.mass).sum()
    }

    /// `∫ t^m ψ(t) dt` with bin midpoints.
    pub fn moment(&self, m: u32) -> f64 {
        self.bins.iter().map(|b| b.mass * b.mid().powi(m as i32)).sum()
    }

    /// `∫ h(t) ψ(t) dt` with bin midpoints.
    pub fn integrate<H: Fn(f64) -> f64>(&self, h: H) -> f64 {
        self.bins.iter().map(|b| b.mass * h(b.mid())).sum()
    }

    /// CSV with columns `bin_lo,bin_hi,mass`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bin_lo", "bin_hi", "mass"])?;
        for b in &self.bins {
            w.write_record([
                format!("{:.17e}", b.lo),
                format!("{:.17e}", b.hi),
                format!("{:.17e}", b.mass),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Largest grid the cutoff scan will tabulate.
const SCAN_CELL_CAP: usize = 1 << 24;

/// Smallest power-of-two `X` such that `|f̂| < eps0` on the shell
/// `X < ‖ξ‖_∞ <= 2X` of the grid with spacing `step`.
///
/// Returns `(X, verified)`; `verified` is false when the scan stopped at the
/// size cap.
pub fn choose_xi_cutoff(f: &CompactKernel, step: f64, eps0: f64) -> Result<(f64, bool)> {
    if !(eps0 > 0.0) {
        return Err(invalid("eps0", format!("{eps0} must be positive")));
    }
    if !(step > 0.0) {
        return Err(invalid("grid_step", "must be positive"));
    }
    let d = f.dim() as i32;
    let mut x = 1.0f64;
    loop {
        let outer = 2.0 * x;
        let cells = (2.0 * outer / step).powi(d);
        if cells > SCAN_CELL_CAP as f64 {
            return Ok((x, false));
        }
        let grid = transform_grid(f, outer, step)?;
        let count = grid.axis.len();
        let mut shell_max = 0.0f64;
        for (flat, v) in grid.values.iter().enumerate() {
            let mut rf = flat;
            let mut inf = 0.0f64;
            for _ in 0..d {
                inf = inf.max(grid.axis[rf % count].abs());
                rf /= count;
            }
            if inf > x {
                shell_max = shell_max.max(v.abs());
            }
        }
        if shell_max < eps0 {
            return Ok((x, true));
        }
        x = outer;
    }
}

/// Histogram of `f̂` over the ξ-grid `[-xi_cutoff, xi_cutoff]^d`; cells with
/// `|f̂| < eps0` are dropped.
///
/// `xi_cutoff = None` selects it with [`choose_xi_cutoff`].
pub fn level_set_density(
    f: &CompactKernel,
    xi_cutoff: Option<f64>,
    grid_step: f64,
    bins: BinSpec,
    eps0: f64,
) -> Result<LevelSetDensity> {
    if !(eps0 > 0.0) {
        return Err(invalid("eps0", format!("{eps0} must be positive")));
    }
    if !(grid_step > 0.0) {
        return Err(invalid("grid_step", "must be positive"));
    }
    if !f.is_hermitian() {
        return Err(ErmError::KernelRequirement {
            kernel: f.id().to_string(),
            requirement: "hermitian (f̂ real)".into(),
        });
    }
    let (cutoff, cutoff_verified) = match xi_cutoff {
        Some(x) if x > 0.0 => (x, true),
        Some(x) => return Err(invalid("xi_cutoff", format!("{x} must be positive"))),
        None => choose_xi_cutoff(f, grid_step, eps0)?,
    };
    let grid = transform_grid(f, cutoff, grid_step)?;
    let cell = grid_step.powi(f.dim() as i32);
    let kept: Vec<f64> = grid.values.into_iter().filter(|v| v.abs() >= eps0).collect();
    let (lo, hi) = kept
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let edges = bin_edges(bins, eps0, lo, hi)?;
    let mut out: Vec<LevelSetBin> = edges
        .iter()
        .map(|&(lo, hi)| LevelSetBin { lo, hi, mass: 0.0 })
        .collect();
    for v in kept {
        // bins are sorted and disjoint: binary search on lower edges
        let i = out.partition_point(|b| b.lo <= v).saturating_sub(1);
        let b = &mut out[i];
        debug_assert!(v >= b.lo && v <= b.hi);
        b.mass += cell;
    }
    Ok(LevelSetDensity {
        bins: out,
        xi_cutoff: cutoff,
        grid_step,
        eps0,
        cutoff_verified,
    })
}

/// Sorted `[lo, hi)` bins covering `[lo, hi]` minus `(-eps0, eps0)`; the top
/// bin is closed.
fn bin_edges(spec: BinSpec, eps0: f64, lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
    if !lo.is_finite() {
        return Ok(Vec::new());
    }
    // Widen the top edge by one ulp-ish so the maximum falls inside.
    let top = hi + hi.abs() * 1e-12 + f64::MIN_POSITIVE;
    match spec {
        BinSpec::Geometric { per_decade } => {
            if per_decade == 0 {
                return Err(invalid("bins", "per_decade must be positive"));
            }
            let ratio = 10f64.powf(1.0 / per_decade as f64);
            let ladder = |limit: f64| -> Vec<f64> {
                let mut e = vec![eps0];
                while *e.last().unwrap() < limit {
                    let next = e.last().unwrap() * ratio;
                    e.push(next);
                }
                e
            };
            let mut edges = Vec::new();
            if lo < 0.0 {
                let neg = ladder(-lo + (-lo) * 1e-12);
                for w in neg.windows(2).rev() {
                    edges.push((-w[1], -w[0]));
                }
            }
            if hi > 0.0 {
                let pos = ladder(top);
                for w in pos.windows(2) {
                    edges.push((w[0], w[1]));
                }
            }
            Ok(edges)
        }
        BinSpec::Uniform { count } => {
            if count == 0 {
                return Err(invalid("bins", "count must be positive"));
            }
            let width = (top - lo) / count as f64;
            let mut edges = Vec::new();
            for i in 0..count {
                let a = lo + i as f64 * width;
                let b = if i + 1 == count { top } else { lo + (i + 1) as f64 * width };
                // clip away the punctured neighbourhood
                if b <= -eps0 || a >= eps0 {
                    edges.push((a, b));
                } else {
                    if a < -eps0 {
                        edges.push((a, -eps0));
                    }
                    if b > eps0 {
                        edges.push((eps0, b));
                    }
                }
            }
            Ok(edges)
        }
    }
}
