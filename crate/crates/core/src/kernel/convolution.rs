//! `f^{*m}(0)` by two independent routes, and `f̂` tabulated on a ξ-grid.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{sinc, CompactDescriptor, CompactKernel};
use crate::error::{invalid, ErmError, Result};

/// Resolution of the two routes of [`convolution_power_at_zero`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionSpec {
    /// Spatial cells per unit length for the direct route.
    pub nodes_per_unit: usize,
    /// Truncation `‖ξ‖_∞ <= xi_cutoff` for the spectral route.
    pub xi_cutoff: f64,
    pub xi_step: f64,
    /// Relative discrepancy above which a warning is attached.
    pub tolerance: f64,
}

impl ConvolutionSpec {
    pub fn default_for(d: usize) -> Self {
        match d {
            1 => Self {
                nodes_per_unit: 4096,
                xi_cutoff: 512.0,
                xi_step: 1.0 / 64.0,
                tolerance: 0.02,
            },
            2 => Self {
                nodes_per_unit: 64,
                xi_cutoff: 32.0,
                xi_step: 1.0 / 8.0,
                tolerance: 0.02,
            },
            _ => Self {
                nodes_per_unit: 16,
                xi_cutoff: 8.0,
                xi_step: 0.5,
                tolerance: 0.02,
            },
        }
    }
}

/// Both estimates of `f^{*m}(0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionPower {
    pub m: usize,
    /// Iterated convolution of cell averages over the support, extrapolated
    /// in the cell width.
    pub direct: f64,
    /// Difference between the direct value at full and half resolution.
    pub direct_error: f64,
    /// `∫ f̂^m` over the truncated ξ-grid.
    pub spectral: f64,
    /// Closed form, when one is known (box kernels).
    pub exact: Option<f64>,
    /// `|direct - spectral| / |direct|`.
    pub discrepancy: f64,
    pub tolerance: f64,
    pub warning: Option<String>,
}

impl ConvolutionPower {
    /// Best available value: the closed form, else the direct route.
    pub fn value(&self) -> f64 {
        self.exact.unwrap_or(self.direct)
    }
}

/// Irwin-Hall density `f_m(x)` of a sum of `m` standard uniforms.
pub(crate) fn irwin_hall_density(m: usize, x: f64) -> f64 {
    if x < 0.0 || x > m as f64 {
        return 0.0;
    }
    let mut acc = 0.0;
    let mut binom = 1.0;
    let mut fact = 1.0;
    for j in 1..m {
        fact *= j as f64;
    }
    for k in 0..=(x.floor() as usize).min(m) {
        if k > 0 {
            binom *= (m - k + 1) as f64 / k as f64;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * (x - k as f64).powi(m as i32 - 1);
    }
    acc / fact
}

/// Closed form of `f^{*m}(0)` for the box indicator of half-width `r`:
/// `[(2r)^{m-1} IH_m(m/2)]^d`.
pub fn box_convolution_power_at_zero(d: usize, r: f64, m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    ((2.0 * r).powi(m as i32 - 1) * irwin_hall_density(m, m as f64 / 2.0)).powi(d as i32)
}

/// `f^{*m}(0)` computed directly and spectrally.
pub fn convolution_power_at_zero(f: &CompactKernel, m: usize, spec: &ConvolutionSpec) -> Result<ConvolutionPower> {
    if m == 0 {
        return Err(invalid("m", "convolution power must be at least 1"));
    }
    if !f.is_hermitian() {
        return Err(ErmError::KernelRequirement {
            kernel: f.id().to_string(),
            requirement: "hermitian (f̂ real)".into(),
        });
    }
    if spec.nodes_per_unit < 4 || !(spec.xi_step > 0.0) || !(spec.xi_cutoff > 0.0) {
        return Err(invalid("spec", "resolution parameters must be positive"));
    }
    let (direct, direct_error) = if m == 1 {
        (f.value_at_origin().re, 0.0)
    } else {
        // Jumps at the support edge leave an O(h) error; one Richardson step
        // over h and 2h removes it.
        let fine = direct_route(f, m, spec.nodes_per_unit);
        let coarse = direct_route(f, m, spec.nodes_per_unit / 2);
        (2.0 * fine - coarse, (fine - coarse).abs())
    };
    let grid = transform_grid(f, spec.xi_cutoff, spec.xi_step)?;
    let cell = spec.xi_step.powi(f.dim() as i32);
    let spectral: f64 = grid.values.iter().map(|v| v.powi(m as i32)).sum::<f64>() * cell;
    if !(direct.is_finite() && spectral.is_finite()) {
        return Err(ErmError::Quadrature {
            context: format!("{}: f^(*{m})(0)", f.id()),
        });
    }
    let exact = match f.descriptor() {
        CompactDescriptor::BoxIndicator { r } => Some(box_convolution_power_at_zero(f.dim(), *r, m)),
        _ => None,
    };
    let discrepancy = (direct - spectral).abs() / direct.abs().max(f64::MIN_POSITIVE);
    let warning = (discrepancy > spec.tolerance).then(|| {
        format!(
            "{}: direct {direct:.6e} and spectral {spectral:.6e} routes for m = {m} differ by {:.2}% (tolerance {:.2}%)",
            f.id(),
            100.0 * discrepancy,
            100.0 * spec.tolerance
        )
    });
    Ok(ConvolutionPower {
        m,
        direct,
        direct_error,
        spectral,
        exact,
        discrepancy,
        tolerance: spec.tolerance,
        warning,
    })
}

/// Dense `d`-dimensional array on cells `i·h`, `|i_j| <= half`, last axis fastest.
struct CellArray {
    half: usize,
    d: usize,
    data: Vec<Complex64>,
}

impl CellArray {
    fn side(&self) -> usize {
        2 * self.half + 1
    }

    /// Cell averages of `f` using a `SUB^d` midpoint sub-grid per cell.
    fn averages(f: &CompactKernel, h: f64) -> Self {
        const SUB: usize = 4;
        let d = f.dim();
        let half = (f.support_radius() / h + 0.5).ceil() as usize;
        let side = 2 * half + 1;
        let total = side.pow(d as u32);
        let subs = SUB.pow(d as u32);
        let mut data = vec![Complex64::new(0.0, 0.0); total];
        let mut x = vec![0.0; d];
        for (flat, slot) in data.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for s in 0..subs {
                let (mut rf, mut rs) = (flat, s);
                for j in (0..d).rev() {
                    let i = (rf % side) as f64 - half as f64;
                    let si = (rs % SUB) as f64;
                    rf /= side;
                    rs /= SUB;
                    x[j] = (i - 0.5 + (si + 0.5) / SUB as f64) * h;
                }
                acc += f.eval(&x);
            }
            *slot = acc / subs as f64;
        }
        Self { half, d, data }
    }

    /// `h^d (a * b)` on the grid of half-width `a.half + b.half`.
    fn convolve(&self, other: &CellArray, cell: f64) -> CellArray {
        let half = self.half + other.half;
        let side = 2 * half + 1;
        // Index i_a + i_b of the two inputs is the output index, per axis.
        let offsets = |arr: &CellArray| -> Vec<usize> {
            let s = arr.side();
            (0..arr.data.len())
                .map(|flat| {
                    let mut rf = flat;
                    let mut off = 0;
                    let mut stride = 1;
                    for _ in 0..arr.d {
                        off += (rf % s) * stride;
                        rf /= s;
                        stride *= side;
                    }
                    off
                })
                .collect()
        };
        let oa = offsets(self);
        let ob = offsets(other);
        let mut data = vec![Complex64::new(0.0, 0.0); side.pow(self.d as u32)];
        for (a, &pa) in self.data.iter().zip(&oa) {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            let av = *a * cell;
            for (b, &pb) in other.data.iter().zip(&ob) {
                data[pa + pb] += av * b;
            }
        }
        CellArray { half, d: self.d, data }
    }

    /// `h^d Σ_y self(y) other(-y)`.
    fn pair_at_zero(&self, other: &CellArray, cell: f64) -> Complex64 {
        assert!(other.half <= self.half);
        let s = self.side();
        let t = other.side();
        let shift = self.half - other.half;
        let mut acc = Complex64::new(0.0, 0.0);
        for (flat, b) in other.data.iter().enumerate() {
            if b.norm_sqr() == 0.0 {
                continue;
            }
            // other at index i maps to -i in self: mirror each axis.
            let mut rf = flat;
            let mut off = 0;
            let mut stride = 1;
            for _ in 0..self.d {
                let i = rf % t;
                rf /= t;
                off += (shift + (t - 1 - i)) * stride;
                stride *= s;
            }
            acc += self.data[off] * b;
        }
        acc * cell
    }
}

fn direct_route(f: &CompactKernel, m: usize, nodes_per_unit: usize) -> f64 {
    let h = 1.0 / nodes_per_unit as f64;
    let cell = h.powi(f.dim() as i32);
    let base = CellArray::averages(f, h);
    let mut power = CellArray {
        half: base.half,
        d: base.d,
        data: base.data.clone(),
    };
    for _ in 2..m {
        power = power.convolve(&base, cell);
    }
    power.pair_at_zero(&base, cell).re
}

/// `f̂` tabulated at the midpoints of a ξ-grid over `[-cutoff, cutoff]^d`.
pub(crate) struct TransformGrid {
    pub axis: Vec<f64>,
    /// Real part of `f̂`, row-major with the last axis fastest.
    pub values: Vec<f64>,
}

/// Spatial nodes per axis for transforms computed by quadrature.
fn transform_nodes(d: usize) -> usize {
    match d {
        1 => 2048,
        2 => 256,
        3 => 32,
        _ => 8,
    }
}

pub(crate) fn transform_grid(f: &CompactKernel, cutoff: f64, step: f64) -> Result<TransformGrid> {
    let d = f.dim();
    let count = ((2.0 * cutoff / step).round() as usize).max(1);
    let axis: Vec<f64> = (0..count).map(|i| -cutoff + (i as f64 + 0.5) * step).collect();
    let total = count
        .checked_pow(d as u32)
        .filter(|t| *t <= 1 << 28)
        .ok_or_else(|| invalid("xi_cutoff", format!("ξ-grid of {count}^{d} cells is too large")))?;
    let values = match f.descriptor() {
        CompactDescriptor::BoxIndicator { r } => {
            let g: Vec<f64> = axis.iter().map(|&x| 2.0 * r * sinc(2.0 * PI * x * r)).collect();
            let mut values = vec![1.0; total];
            for (flat, v) in values.iter_mut().enumerate() {
                let mut rf = flat;
                for _ in 0..d {
                    *v *= g[rf % count];
                    rf /= count;
                }
            }
            values
        }
        CompactDescriptor::Custom { transform: Some(t), .. } => {
            let mut xi = vec![0.0; d];
            let mut values = Vec::with_capacity(total);
            for flat in 0..total {
                let mut rf = flat;
                for j in (0..d).rev() {
                    xi[j] = axis[rf % count];
                    rf /= count;
                }
                values.push(t(&xi).re);
            }
            values
        }
        _ => separable_transform(f, &axis),
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ErmError::Quadrature {
            context: format!("{}: transform grid", f.id()),
        });
    }
    Ok(TransformGrid { axis, values })
}

/// Midpoint-rule transform applied one axis at a time.
fn separable_transform(f: &CompactKernel, axis: &[f64]) -> Vec<f64> {
    let d = f.dim();
    let nodes = transform_nodes(d);
    let r = f.support_radius();
    let h = 2.0 * r / nodes as f64;
    let xs: Vec<f64> = (0..nodes).map(|i| -r + (i as f64 + 0.5) * h).collect();
    let mut shape = vec![nodes; d];
    let mut data: Vec<Complex64> = Vec::with_capacity(nodes.pow(d as u32));
    let mut x = vec![0.0; d];
    for flat in 0..nodes.pow(d as u32) {
        let mut rf = flat;
        for j in (0..d).rev() {
            x[j] = xs[rf % nodes];
            rf /= nodes;
        }
        data.push(f.eval(&x));
    }
    let phase: Vec<Complex64> = axis
        .iter()
        .flat_map(|&xi| xs.iter().map(move |&xv| Complex64::cis(-2.0 * PI * xi * xv) * h))
        .collect();
    let count = axis.len();
    for j in 0..d {
        let inner: usize = shape[j + 1..].iter().product();
        let outer: usize = shape[..j].iter().product();
        let mut out = vec![Complex64::new(0.0, 0.0); outer * count * inner];
        for o in 0..outer {
            for k in 0..count {
                let row = &phase[k * nodes..(k + 1) * nodes];
                let dst = (o * count + k) * inner;
                for (mi, w) in row.iter().enumerate() {
                    let src = (o * nodes + mi) * inner;
                    for i in 0..inner {
                        out[dst + i] += w * data[src + i];
                    }
                }
            }
        }
        shape[j] = count;
        data = out;
    }
    data.into_iter().map(|c| c.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn irwin_hall_values() {
        assert!((irwin_hall_density(1, 0.5) - 1.0).abs() < 1e-15);
        assert!((irwin_hall_density(2, 1.0) - 1.0).abs() < 1e-15);
        assert!((irwin_hall_density(3, 1.5) - 0.75).abs() < 1e-15);
        assert!((irwin_hall_density(4, 2.0) - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn box_closed_form_examples() {
        assert_eq!(box_convolution_power_at_zero(1, 0.25, 1), 1.0);
        assert!((box_convolution_power_at_zero(1, 0.25, 2) - 0.5).abs() < 1e-15);
        assert!((box_convolution_power_at_zero(1, 0.25, 3) - 0.1875).abs() < 1e-15);
        assert!((box_convolution_power_at_zero(2, 0.25, 2) - 0.25).abs() < 1e-15);
    }

    /// Oracle for m = 3: (f*f)(y) = (2r - |y|)_+, integrated over [-r, r].
    fn triangle_oracle(r: f64) -> f64 {
        let n = 100_000;
        let h = 2.0 * r / n as f64;
        (0..n)
            .map(|i| {
                let y = -r + (i as f64 + 0.5) * h;
                (2.0 * r - y.abs()).max(0.0) * h
            })
            .sum()
    }

    #[test]
    fn routes_agree_for_box_in_one_dim() {
        let f = CompactKernel::box_indicator(1, 0.25).unwrap();
        let spec = ConvolutionSpec::default_for(1);
        for m in 1..=5 {
            let c = convolution_power_at_zero(&f, m, &spec).unwrap();
            let exact = c.exact.unwrap();
            assert!((c.direct - exact).abs() / exact < 1e-3, "m={m}: {c:?}");
            assert!(c.discrepancy < spec.tolerance, "m={m}: {c:?}");
            assert!(c.warning.is_none());
        }
        let c3 = convolution_power_at_zero(&f, 3, &spec).unwrap();
        assert!((triangle_oracle(0.25) - 0.1875).abs() < 1e-9);
        assert!((c3.direct - triangle_oracle(0.25)).abs() < 1e-4);
    }

    #[test]
    fn routes_agree_for_box_in_two_dims() {
        let f = CompactKernel::box_indicator(2, 0.25).unwrap();
        let spec = ConvolutionSpec::default_for(2);
        for m in 2..=4 {
            let c = convolution_power_at_zero(&f, m, &spec).unwrap();
            let exact = c.exact.unwrap();
            assert!((c.direct - exact).abs() / exact < 1e-2, "m={m}: {c:?}");
            assert!(c.discrepancy < spec.tolerance, "m={m}: {c:?}");
        }
    }

    #[test]
    fn ball_routes_agree() {
        // In d = 1 the ball is the box, which gives an exact oracle.
        let f = CompactKernel::ball_indicator(1, 0.25).unwrap();
        let spec = ConvolutionSpec {
            xi_cutoff: 256.0,
            xi_step: 1.0 / 16.0,
            ..ConvolutionSpec::default_for(1)
        };
        for m in 2..=3 {
            let c = convolution_power_at_zero(&f, m, &spec).unwrap();
            let exact = box_convolution_power_at_zero(1, 0.25, m);
            assert!(c.exact.is_none());
            assert!((c.direct - exact).abs() / exact < 1e-3, "{c:?}");
            assert!(c.discrepancy < spec.tolerance, "{c:?}");
        }
    }

    #[test]
    fn coarse_spectral_grid_raises_warning() {
        let f = CompactKernel::box_indicator(1, 0.25).unwrap();
        let spec = ConvolutionSpec {
            xi_cutoff: 1.0,
            xi_step: 0.5,
            ..ConvolutionSpec::default_for(1)
        };
        let c = convolution_power_at_zero(&f, 2, &spec).unwrap();
        assert!(c.warning.is_some());
    }

    #[test]
    fn rejects_bad_arguments() {
        let f = CompactKernel::box_indicator(1, 0.25).unwrap();
        assert!(convolution_power_at_zero(&f, 0, &ConvolutionSpec::default_for(1)).is_err());
    }
}
