//! Theoretical predictions: limit measures, moment expansions, asymptotics,
//! the Poisson degree bound and eigenvalue correlation functionals.

mod correlation;
mod limit;
mod nugamma;
mod poisson;

use serde::{Deserialize, Serialize};

pub use correlation::{correlation_m2, correlation_mm_mc, determinant, McEstimate};
pub use limit::{finite_size_correction, limit_measure, mu_moment, AtomicMeasure};
pub use nugamma::{
    high_density_moment, nu_gamma_moment, nu_gamma_polynomial, second_order_term, MomentPolynomial, NuGammaSpec,
    MAX_QUADRATURE_ORDER,
};
pub use poisson::{poisson_bound_j, poisson_upper_tail, PoissonBound};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentMethod {
    ClosedForm,
    /// Partial sum over a finite set of lattice points.
    LatticeSum,
    SurjectionQuadrature,
    HighDensityAsymptotic,
}

/// Contribution of the surjections onto `p` labels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownTerm {
    pub p: usize,
    /// `γ`-free coefficient: `(1/p!) Σ_{φ ∈ Σ_{m,p}} ∫ ...`.
    pub coefficient: f64,
    /// `γ^{p-1} · coefficient`.
    pub contribution: f64,
    pub error_estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub m: usize,
    pub value: f64,
    pub method: MomentMethod,
    pub error_estimate: f64,
    pub breakdown: Vec<BreakdownTerm>,
    pub warnings: Vec<String>,
}
