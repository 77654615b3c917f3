//! Surjections `{1..m} -> {1..p}` up to relabeling of the target.
//!
//! Each class is represented by its restricted-growth string: the first
//! occurrences of `1, 2, ..., p` appear in increasing order. A class holds
//! `p!` surjections.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Largest `m` accepted by [`enumerate_surjection_classes`]. `S(12, p)` sums
/// to about 4.2 million classes, a few hundred megabytes of representatives.
pub const MAX_SURJECTION_ORDER: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurjectionClass {
    /// Values in `1..=p`, canonical first-occurrence order.
    pub representative: Vec<u8>,
    pub m: usize,
    pub p: usize,
    /// `p!`.
    pub class_size: u64,
}

impl SurjectionClass {
    /// True if the representative is surjective and in canonical order.
    pub fn is_canonical(&self) -> bool {
        let mut next = 1u8;
        for &v in &self.representative {
            if v == next {
                next += 1;
            } else if v == 0 || v > next {
                return false;
            }
        }
        self.representative.len() == self.m && next as usize == self.p + 1
    }
}

fn factorial(p: usize) -> u64 {
    (1..=p as u64).product()
}

/// All `S(m, p)` canonical classes of surjections `{1..m} -> {1..p}`.
pub fn enumerate_surjection_classes(m: usize, p: usize) -> Result<Vec<SurjectionClass>> {
    if m == 0 || m > MAX_SURJECTION_ORDER {
        return Err(invalid(
            "m",
            format!("{m} must lie in 1..={MAX_SURJECTION_ORDER}"),
        ));
    }
    if p == 0 || p > m {
        return Err(invalid("p", format!("{p} must lie in 1..={m}")));
    }
    let class_size = factorial(p);
    let mut out = Vec::new();
    let mut word = vec![0u8; m];
    // word[i] in 1..=max(word[..i]) + 1, capped at p, with enough room left
    // to reach p
    fn rec(
        word: &mut Vec<u8>,
        i: usize,
        used: usize,
        m: usize,
        p: usize,
        class_size: u64,
        out: &mut Vec<SurjectionClass>,
    ) {
        if i == m {
            if used == p {
                out.push(SurjectionClass {
                    representative: word.clone(),
                    m,
                    p,
                    class_size,
                });
            }
            return;
        }
        let remaining = m - i;
        if used + remaining < p {
            return;
        }
        for v in 1..=(used + 1).min(p) {
            word[i] = v as u8;
            rec(word, i + 1, used.max(v), m, p, class_size, out);
        }
    }
    rec(&mut word, 0, 0, m, p, class_size, &mut out);
    Ok(out)
}

/// Stirling number of the second kind `S(m, p)`.
pub fn stirling2(m: usize, p: usize) -> BigUint {
    if p > m {
        return BigUint::from(0u8);
    }
    // row[j] = S(i, j)
    let mut row = vec![BigUint::from(0u8); p + 1];
    row[0] = BigUint::from(1u8);
    for i in 1..=m {
        for j in (1..=p.min(i)).rev() {
            row[j] = &row[j] * BigUint::from(j) + &row[j - 1];
        }
        row[0] = BigUint::from(0u8);
    }
    row[p].clone()
}
