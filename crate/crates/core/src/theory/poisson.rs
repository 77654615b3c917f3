//! The Poisson degree threshold `j(n)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `j(n)` with the two tails that bracket it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonBound {
    pub j: u64,
    /// `n P(Po(γ) >= j + 1)`, at most 1.
    pub n_tail_above: f64,
    /// `n P(Po(γ) >= j)`, above 1 unless `degenerate`.
    pub n_tail_at: f64,
    /// Set when even `j = 0` fails `1 < n P(Po(γ) >= j)` (only for `n = 1`).
    pub degenerate: bool,
}

impl PoissonBound {
    /// `j(n) · sup |f|`.
    pub fn bound(&self, sup_norm: f64) -> f64 {
        self.j as f64 * sup_norm
    }
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// `P(Po(γ) >= j)`.
///
/// Above the mode the masses are summed from the far tail inwards with
/// compensation; at or below it, the complement of the (short) lower tail is
/// used.
pub fn poisson_upper_tail(gamma: f64, j: u64) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let ln_gamma = gamma.ln();
    // ln P(Po = i) = -γ + i ln γ - ln i!
    let ln_mass = |i: u64| -> f64 {
        let ln_fact: f64 = (2..=i).map(|t| (t as f64).ln()).sum();
        -gamma + i as f64 * ln_gamma - ln_fact
    };
    if j as f64 <= gamma {
        return 1.0 - compensated_sum((0..j).map(|k| ln_mass(k).exp()));
    }
    let mut terms = Vec::new();
    let mut i = j;
    let mut ln_p = ln_mass(j);
    loop {
        let p = ln_p.exp();
        terms.push(p);
        if p == 0.0 || p < 1e-18 * terms[0] {
            break;
        }
        i += 1;
        ln_p += ln_gamma - (i as f64).ln();
    }
    compensated_sum(terms.iter().rev().copied())
}

/// The integer `j` with `n P(Po(γ) >= j+1) <= 1 < n P(Po(γ) >= j)`.
pub fn poisson_bound_j(n: u64, gamma: f64) -> Result<PoissonBound> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid("gamma", format!("{gamma} must be positive")));
    }
    let nf = n as f64;
    let mut j = 0u64;
    let mut at = nf * poisson_upper_tail(gamma, 0);
    loop {
        let above = nf * poisson_upper_tail(gamma, j + 1);
        if above <= 1.0 {
            let degenerate = at <= 1.0;
            debug_assert!(degenerate || (above <= 1.0 && 1.0 < at));
            return Ok(PoissonBound {
                j,
                n_tail_above: above,
                n_tail_at: at,
                degenerate,
            });
        }
        j += 1;
        at = above;
    }
}
