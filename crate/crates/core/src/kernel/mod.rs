//! Kernels for both matrix models and their Fourier analysis.
//!
//! [`PeriodicKernel`] is a 1-periodic function on the torus (first model); its
//! Fourier coefficients `F̂(k)` are the atoms of the limit spectral measure.
//! [`CompactKernel`] is a function supported in the unit cube (scaled model);
//! its full-space transform `f̂(ξ)` drives the high-density asymptotics.
//!
//! Conventions:
//! * indicator kernels use closed conditions (`|x| <= r`);
//! * `f̂(ξ) = ∫_{R^d} f(x) e^{-2iπ ξ·x} dx`, so the unit box of half-width `r`
//!   has `f̂(ξ) = ∏ 2r sinc(2π ξ_j r)`.

mod convolution;
mod levelset;
pub mod quadrature;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, ErmError, Result};
use crate::pointset::{realization_rng, wrap_coordinate, TorusPoint};

pub use convolution::{
    box_convolution_power_at_zero, convolution_power_at_zero, ConvolutionPower, ConvolutionSpec,
};
pub use levelset::{choose_xi_cutoff, level_set_density, BinSpec, LevelSetBin, LevelSetDensity};

/// Lattice point `k ∈ Z^d`.
pub type LatticePoint = Vec<i64>;

/// Kernel evaluation callback; receives canonical coordinates.
pub type EvalFn = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;
/// Fourier coefficient callback `k ↦ F̂(k)`.
pub type CoefficientFn = Arc<dyn Fn(&[i64]) -> Complex64 + Send + Sync>;
/// Fourier transform callback `ξ ↦ f̂(ξ)`.
pub type TransformFn = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;

/// `sin(x) / x` with the removable singularity filled in.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Volume of the Euclidean ball of radius `r` in dimension `d`.
fn ball_volume(d: usize, r: f64) -> f64 {
    // V_d = pi^{d/2} r^d / Gamma(d/2 + 1), via V_d = V_{d-2} * 2 pi / d.
    let mut v = if d % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = if d % 2 == 0 { 2 } else { 3 };
    while k <= d {
        v *= 2.0 * PI / k as f64;
        k += 2;
    }
    v * r.powi(d as i32)
}

/// How a Fourier value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FourierMethod {
    Analytic,
    Supplied,
    Quadrature,
}

/// A Fourier coefficient or transform value with its error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierValue {
    pub value: Complex64,
    /// Zero for analytic values; grid-halving difference for quadrature.
    pub error_estimate: f64,
    pub method: FourierMethod,
}

impl FourierValue {
    fn analytic(value: Complex64) -> Self {
        Self {
            value,
            error_estimate: 0.0,
            method: FourierMethod::Analytic,
        }
    }
}

fn check_finite(v: Complex64, context: impl Fn() -> String) -> Result<Complex64> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(ErmError::Quadrature { context: context() })
    }
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r <= 0.5) {
        return Err(invalid(
            "r",
            format!("radius {r} must lie in (0, 1/2] so the support stays inside the unit cube"),
        ));
    }
    Ok(())
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(invalid("d", "dimension must be at least 1"));
    }
    Ok(())
}

/// Spot-checks `F(-x) = conj(F(x))` on a fixed pseudo-random sample.
fn hermitian_spot_check(d: usize, eval: &dyn Fn(&[f64]) -> Complex64) -> bool {
    let mut rng = realization_rng(0x4845_524d, 0);
    let mut x = vec![0.0; d];
    let mut minus = vec![0.0; d];
    (0..64).all(|_| {
        for (xi, mi) in x.iter_mut().zip(minus.iter_mut()) {
            *xi = rng.random::<f64>() - 0.5;
            *mi = wrap_coordinate(-*xi);
        }
        let a = eval(&x);
        let b = eval(&minus);
        (b - a.conj()).norm() <= 1e-10 * (1.0 + a.norm())
    })
}

/// Descriptor of a periodic kernel.
#[derive(Clone)]
pub enum PeriodicDescriptor {
    /// `1(max_i |x_i| <= r)`.
    BoxIndicator { r: f64 },
    /// `1(|x| <= r)`.
    BallIndicator { r: f64 },
    /// Finite Fourier series `Σ c_k e^{2iπ k·x}`.
    FourierSeries { coeffs: BTreeMap<LatticePoint, Complex64> },
    /// `e^{2iπ k·x}`.
    PureMode { k: LatticePoint },
    Custom {
        eval: EvalFn,
        fourier: Option<CoefficientFn>,
        real_valued: bool,
    },
}

/// A 1-periodic kernel `F` on the torus `T^d`.
#[derive(Clone)]
pub struct PeriodicKernel {
    descriptor: PeriodicDescriptor,
    d: usize,
    hermitian: bool,
    name: String,
}

impl fmt::Debug for PeriodicKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicKernel")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("hermitian", &self.hermitian)
            .finish()
    }
}

impl PeriodicKernel {
    pub fn box_indicator(d: usize, r: f64) -> Result<Self> {
        check_dim(d)?;
        check_radius(r)?;
        Ok(Self {
            descriptor: PeriodicDescriptor::BoxIndicator { r },
            d,
            hermitian: true,
            name: format!("box(d={d},r={r})"),
        })
    }

    pub fn ball_indicator(d: usize, r: f64) -> Result<Self> {
        check_dim(d)?;
        check_radius(r)?;
        Ok(Self {
            descriptor: PeriodicDescriptor::BallIndicator { r },
            d,
            hermitian: true,
            name: format!("ball(d={d},r={r})"),
        })
    }

    /// Finite Fourier series. The kernel is hermitian iff every coefficient is real.
    pub fn fourier_series(d: usize, coeffs: BTreeMap<LatticePoint, Complex64>) -> Result<Self> {
        check_dim(d)?;
        if coeffs.keys().any(|k| k.len() != d) {
            return Err(invalid("coeffs", format!("every lattice point must have {d} entries")));
        }
        if coeffs.values().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(invalid("coeffs", "coefficients must be finite"));
        }
        let hermitian = coeffs.values().all(|c| c.im == 0.0);
        Ok(Self {
            descriptor: PeriodicDescriptor::FourierSeries { coeffs },
            d,
            hermitian,
            name: format!("fourier-series(d={d})"),
        })
    }

    pub fn pure_mode(k: LatticePoint) -> Result<Self> {
        let d = k.len();
        check_dim(d)?;
        let name = format!("pure-mode(k={k:?})");
        Ok(Self {
            descriptor: PeriodicDescriptor::PureMode { k },
            d,
            hermitian: true,
            name,
        })
    }

    /// User-supplied kernel. A `hermitian` claim is spot-checked.
    pub fn custom(
        d: usize,
        name: impl Into<String>,
        eval: EvalFn,
        fourier: Option<CoefficientFn>,
        real_valued: bool,
        hermitian: bool,
    ) -> Result<Self> {
        check_dim(d)?;
        let name = name.into();
        if hermitian && !hermitian_spot_check(d, eval.as_ref()) {
            return Err(ErmError::KernelRequirement {
                kernel: name,
                requirement: "F(-x) = conj(F(x))".into(),
            });
        }
        Ok(Self {
            descriptor: PeriodicDescriptor::Custom {
                eval,
                fourier,
                real_valued,
            },
            d,
            hermitian,
            name,
        })
    }

    pub fn descriptor(&self) -> &PeriodicDescriptor {
        &self.descriptor
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn id(&self) -> &str {
        &self.name
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// True when `F` takes real values only.
    pub fn is_real_valued(&self) -> bool {
        match &self.descriptor {
            PeriodicDescriptor::BoxIndicator { .. } | PeriodicDescriptor::BallIndicator { .. } => {
                true
            }
            PeriodicDescriptor::PureMode { k } => k.iter().all(|&v| v == 0),
            PeriodicDescriptor::FourierSeries { coeffs } => coeffs.iter().all(|(k, c)| {
                let neg: LatticePoint = k.iter().map(|v| -v).collect();
                let partner = coeffs.get(&neg).copied().unwrap_or_default();
                (partner - c.conj()).norm() == 0.0
            }),
            PeriodicDescriptor::Custom { real_valued, .. } => *real_valued,
        }
    }

    /// Evaluates at a point whose coordinates already lie in `[-1/2, 1/2)`.
    #[inline]
    pub fn eval_canonical(&self, x: &[f64]) -> Complex64 {
        match &self.descriptor {
            PeriodicDescriptor::BoxIndicator { r } => {
                Complex64::new(if x.iter().all(|c| c.abs() <= *r) { 1.0 } else { 0.0 }, 0.0)
            }
            PeriodicDescriptor::BallIndicator { r } => {
                let s: f64 = x.iter().map(|c| c * c).sum();
                Complex64::new(if s <= r * r { 1.0 } else { 0.0 }, 0.0)
            }
            PeriodicDescriptor::FourierSeries { coeffs } => coeffs
                .iter()
                .map(|(k, c)| c * Complex64::cis(2.0 * PI * dot(k, x)))
                .sum(),
            PeriodicDescriptor::PureMode { k } => Complex64::cis(2.0 * PI * dot(k, x)),
            PeriodicDescriptor::Custom { eval, .. } => eval(x),
        }
    }

    /// Real part of [`PeriodicKernel::eval_canonical`]; the fast path for real kernels.
    #[inline]
    pub fn eval_canonical_re(&self, x: &[f64]) -> f64 {
        match &self.descriptor {
            PeriodicDescriptor::BoxIndicator { r } => {
                if x.iter().all(|c| c.abs() <= *r) {
                    1.0
                } else {
                    0.0
                }
            }
            _ => self.eval_canonical(x).re,
        }
    }

    /// Evaluates at arbitrary real coordinates (reduced modulo `Z^d`).
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let canon: Vec<f64> = x.iter().map(|&c| wrap_coordinate(c)).collect();
        self.eval_canonical(&canon)
    }

    pub fn value_at_origin(&self) -> Complex64 {
        self.eval_canonical(&vec![0.0; self.d])
    }

    /// `F̂(k)`, using the quadrature default resolution when needed.
    pub fn fourier_coefficient(&self, k: &[i64]) -> Result<FourierValue> {
        self.fourier_coefficient_with(k, quadrature::default_nodes(self.d))
    }

    pub fn fourier_coefficient_with(&self, k: &[i64], nodes: usize) -> Result<FourierValue> {
        if k.len() != self.d {
            return Err(ErmError::DimensionMismatch {
                expected: self.d,
                actual: k.len(),
            });
        }
        match &self.descriptor {
            PeriodicDescriptor::BoxIndicator { r } => Ok(FourierValue::analytic(
                Complex64::new(k.iter().map(|&kj| 2.0 * r * sinc(2.0 * PI * kj as f64 * r)).product(), 0.0),
            )),
            PeriodicDescriptor::FourierSeries { coeffs } => Ok(FourierValue::analytic(
                coeffs.get(k).copied().unwrap_or_default(),
            )),
            PeriodicDescriptor::PureMode { k: k0 } => Ok(FourierValue::analytic(Complex64::new(
                if k0.as_slice() == k { 1.0 } else { 0.0 },
                0.0,
            ))),
            PeriodicDescriptor::Custom {
                fourier: Some(coef), ..
            } => Ok(FourierValue {
                value: check_finite(coef(k), || format!("supplied coefficient at {k:?}"))?,
                error_estimate: 0.0,
                method: FourierMethod::Supplied,
            }),
            _ => {
                let f = |x: &[f64]| self.eval_canonical(x);
                let fine = quadrature::fourier_midpoint(self.d, k, nodes, f);
                let coarse = quadrature::fourier_midpoint(self.d, k, (nodes / 2).max(1), f);
                let value = check_finite(fine, || format!("{} coefficient at {k:?}", self.name))?;
                Ok(FourierValue {
                    value,
                    error_estimate: (fine - coarse).norm(),
                    method: FourierMethod::Quadrature,
                })
            }
        }
    }

    /// `∫_Ω |F(x)|^2 dx`.
    pub fn l2_norm_sq(&self) -> f64 {
        match &self.descriptor {
            PeriodicDescriptor::BoxIndicator { r } => (2.0 * r).powi(self.d as i32),
            PeriodicDescriptor::BallIndicator { r } => ball_volume(self.d, *r),
            PeriodicDescriptor::FourierSeries { coeffs } => coeffs.values().map(|c| c.norm_sqr()).sum(),
            PeriodicDescriptor::PureMode { .. } => 1.0,
            PeriodicDescriptor::Custom { .. } => quadrature::midpoint_cube(
                self.d,
                -0.5,
                0.5,
                quadrature::default_nodes(self.d),
                |x| Complex64::new(self.eval_canonical(x).norm_sqr(), 0.0),
            )
            .re,
        }
    }

    /// Returns `c · F`.
    pub fn scaled(&self, c: f64) -> Self {
        let inner = self.clone();
        let fourier_inner = self.clone();
        let real_valued = self.is_real_valued();
        let descriptor = match &self.descriptor {
            PeriodicDescriptor::FourierSeries { coeffs } => PeriodicDescriptor::FourierSeries {
                coeffs: coeffs.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
            },
            _ => PeriodicDescriptor::Custom {
                eval: Arc::new(move |x| inner.eval_canonical(x) * c),
                fourier: Some(Arc::new(move |k| {
                    fourier_inner
                        .fourier_coefficient(k)
                        .map(|v| v.value * c)
                        .unwrap_or(Complex64::new(f64::NAN, f64::NAN))
                })),
                real_valued,
            },
        };
        Self {
            descriptor,
            d: self.d,
            hermitian: self.hermitian,
            name: format!("{c}*{}", self.name),
        }
    }
}

#[inline]
fn dot(k: &[i64], x: &[f64]) -> f64 {
    k.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum()
}

/// Kernel value at a torus point.
pub fn eval_periodic(kernel: &PeriodicKernel, x: &TorusPoint) -> Result<Complex64> {
    if x.dim() != kernel.dim() {
        return Err(ErmError::DimensionMismatch {
            expected: kernel.dim(),
            actual: x.dim(),
        });
    }
    Ok(kernel.eval_canonical(x.coords()))
}

/// `F̂(k) = ∫_Ω F(x) e^{-2iπ k·x} dx`.
pub fn fourier_coefficient(kernel: &PeriodicKernel, k: &[i64]) -> Result<FourierValue> {
    kernel.fourier_coefficient(k)
}

/// `∫_Ω |F|^2`.
pub fn kernel_l2_norm_sq(kernel: &PeriodicKernel) -> f64 {
    kernel.l2_norm_sq()
}

/// Descriptor of a compactly supported kernel.
#[derive(Clone)]
pub enum CompactDescriptor {
    BoxIndicator { r: f64 },
    BallIndicator { r: f64 },
    Custom {
        eval: EvalFn,
        transform: Option<TransformFn>,
        real_valued: bool,
    },
}

/// A kernel `f` on `R^d` supported in `[-R, R]^d ⊆ [-1/2, 1/2]^d`.
#[derive(Clone)]
pub struct CompactKernel {
    descriptor: CompactDescriptor,
    d: usize,
    hermitian: bool,
    support_radius: f64,
    sup_norm: f64,
    name: String,
}

impl fmt::Debug for CompactKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompactKernel")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("support_radius", &self.support_radius)
            .finish()
    }
}

impl CompactKernel {
    pub fn box_indicator(d: usize, r: f64) -> Result<Self> {
        check_dim(d)?;
        check_radius(r)?;
        Ok(Self {
            descriptor: CompactDescriptor::BoxIndicator { r },
            d,
            hermitian: true,
            support_radius: r,
            sup_norm: 1.0,
            name: format!("box(d={d},r={r})"),
        })
    }

    pub fn ball_indicator(d: usize, r: f64) -> Result<Self> {
        check_dim(d)?;
        check_radius(r)?;
        Ok(Self {
            descriptor: CompactDescriptor::BallIndicator { r },
            d,
            hermitian: true,
            support_radius: r,
            sup_norm: 1.0,
            name: format!("ball(d={d},r={r})"),
        })
    }

    /// User-supplied kernel; `eval` is forced to zero outside `[-R, R]^d`.
    #[allow(clippy::too_many_arguments)]
    pub fn custom(
        d: usize,
        name: impl Into<String>,
        eval: EvalFn,
        transform: Option<TransformFn>,
        support_radius: f64,
        sup_norm: f64,
        real_valued: bool,
        hermitian: bool,
    ) -> Result<Self> {
        check_dim(d)?;
        if !(support_radius > 0.0 && support_radius <= 0.5) {
            return Err(invalid(
                "support_radius",
                format!("{support_radius} must lie in (0, 1/2]"),
            ));
        }
        if !(sup_norm >= 0.0 && sup_norm.is_finite()) {
            return Err(invalid("sup_norm", "must be finite and nonnegative"));
        }
        let name = name.into();
        if hermitian && !hermitian_spot_check(d, eval.as_ref()) {
            return Err(ErmError::KernelRequirement {
                kernel: name,
                requirement: "f(-x) = conj(f(x))".into(),
            });
        }
        Ok(Self {
            descriptor: CompactDescriptor::Custom {
                eval,
                transform,
                real_valued,
            },
            d,
            hermitian,
            support_radius,
            sup_norm,
            name,
        })
    }

    pub fn descriptor(&self) -> &CompactDescriptor {
        &self.descriptor
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn id(&self) -> &str {
        &self.name
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_real_valued(&self) -> bool {
        match &self.descriptor {
            CompactDescriptor::Custom { real_valued, .. } => *real_valued,
            _ => true,
        }
    }

    /// Smallest `R` with support in `[-R, R]^d`.
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// `sup |f|`.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// `f(x)`; zero outside `[-R, R]^d`.
    #[inline]
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        match &self.descriptor {
            CompactDescriptor::BoxIndicator { r } => {
                Complex64::new(if x.iter().all(|c| c.abs() <= *r) { 1.0 } else { 0.0 }, 0.0)
            }
            CompactDescriptor::BallIndicator { r } => {
                let s: f64 = x.iter().map(|c| c * c).sum();
                Complex64::new(if s <= r * r { 1.0 } else { 0.0 }, 0.0)
            }
            CompactDescriptor::Custom { eval, .. } => {
                if x.iter().all(|c| c.abs() <= self.support_radius) {
                    eval(x)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
        }
    }

    #[inline]
    pub fn eval_re(&self, x: &[f64]) -> f64 {
        match &self.descriptor {
            CompactDescriptor::BoxIndicator { r } => {
                if x.iter().all(|c| c.abs() <= *r) {
                    1.0
                } else {
                    0.0
                }
            }
            _ => self.eval(x).re,
        }
    }

    pub fn value_at_origin(&self) -> Complex64 {
        self.eval(&vec![0.0; self.d])
    }

    /// True when `f̂` has a closed form (no quadrature).
    pub fn has_analytic_transform(&self) -> bool {
        matches!(
            self.descriptor,
            CompactDescriptor::BoxIndicator { .. } | CompactDescriptor::Custom { transform: Some(_), .. }
        )
    }

    /// `f̂(ξ) = ∫_{R^d} f(x) e^{-2iπ ξ·x} dx`.
    pub fn fourier_transform(&self, xi: &[f64]) -> Result<FourierValue> {
        self.fourier_transform_with(xi, quadrature::default_nodes(self.d))
    }

    pub fn fourier_transform_with(&self, xi: &[f64], nodes: usize) -> Result<FourierValue> {
        if xi.len() != self.d {
            return Err(ErmError::DimensionMismatch {
                expected: self.d,
                actual: xi.len(),
            });
        }
        match &self.descriptor {
            CompactDescriptor::BoxIndicator { r } => Ok(FourierValue::analytic(Complex64::new(
                xi.iter().map(|&x| 2.0 * r * sinc(2.0 * PI * x * r)).product(),
                0.0,
            ))),
            CompactDescriptor::Custom {
                transform: Some(t), ..
            } => Ok(FourierValue {
                value: check_finite(t(xi), || format!("supplied transform at {xi:?}"))?,
                error_estimate: 0.0,
                method: FourierMethod::Supplied,
            }),
            _ => {
                let r = self.support_radius;
                let (v, err) = quadrature::midpoint_with_error(self.d, -r, r, nodes, |x| {
                    self.eval(x) * Complex64::cis(-2.0 * PI * x.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>())
                });
                Ok(FourierValue {
                    value: check_finite(v, || format!("{} transform at {xi:?}", self.name))?,
                    error_estimate: err,
                    method: FourierMethod::Quadrature,
                })
            }
        }
    }

    /// The 1-periodic extension viewed as a [`PeriodicKernel`] (scale 1).
    pub fn periodized(&self) -> PeriodicKernel {
        match self.descriptor {
            CompactDescriptor::BoxIndicator { r } => PeriodicKernel::box_indicator(self.d, r)
                .expect("radius already validated"),
            CompactDescriptor::BallIndicator { r } => PeriodicKernel::ball_indicator(self.d, r)
                .expect("radius already validated"),
            CompactDescriptor::Custom { real_valued, .. } => {
                let inner = self.clone();
                PeriodicKernel {
                    descriptor: PeriodicDescriptor::Custom {
                        eval: Arc::new(move |x| inner.eval(x)),
                        fourier: None,
                        real_valued,
                    },
                    d: self.d,
                    hermitian: self.hermitian,
                    name: format!("periodized {}", self.name),
                }
            }
        }
    }
}

/// `f̂(ξ)` over the whole space.
pub fn fourier_transform(kernel: &CompactKernel, xi: &[f64]) -> Result<FourierValue> {
    kernel.fourier_transform(xi)
}
