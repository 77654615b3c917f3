//! Uniform point configurations on the unit torus `[-1/2, 1/2)^d` and torus
//! geometry.
//!
//! Both matrix models sample on the same cube. The scaled model records
//! `delta = (gamma / n)^(1/d)` and the kernel is rescaled at matrix build
//! time, so coordinates never leave the unit cube.

use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, ErmError, Result};

/// Returns the canonical representative of `v` modulo 1 in `[-1/2, 1/2)`.
#[inline]
pub fn wrap_coordinate(v: f64) -> f64 {
    let mut w = v - (v + 0.5).floor();
    // (v + 0.5).floor() can round across the seam.
    if w >= 0.5 {
        w -= 1.0;
    } else if w < -0.5 {
        w += 1.0;
    }
    w
}

/// Writes the canonical torus difference `x - y` into `out`.
#[inline]
pub fn torus_diff_into(x: &[f64], y: &[f64], out: &mut [f64]) {
    for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
        *o = wrap_coordinate(a - b);
    }
}

/// A point of the torus, stored by its canonical coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusPoint(Vec<f64>);

impl TorusPoint {
    /// Builds a point from coordinates that already lie in `[-1/2, 1/2)`.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(invalid("coords", "dimension must be at least 1"));
        }
        if let Some(c) = coords.iter().find(|c| !(-0.5..0.5).contains(*c)) {
            return Err(invalid("coords", format!("{c} is outside [-1/2, 1/2)")));
        }
        Ok(Self(coords))
    }

    /// Reduces arbitrary real coordinates modulo the integer lattice.
    pub fn wrapped(coords: &[f64]) -> Result<Self> {
        Self::new(coords.iter().map(|&c| wrap_coordinate(c)).collect())
    }

    pub fn origin(d: usize) -> Self {
        Self(vec![0.0; d.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

/// Canonical representative of `x - y` modulo `Z^d`.
pub fn torus_diff(x: &TorusPoint, y: &TorusPoint) -> Result<TorusPoint> {
    if x.dim() != y.dim() {
        return Err(ErmError::DimensionMismatch {
            expected: x.dim(),
            actual: y.dim(),
        });
    }
    let mut out = vec![0.0; x.dim()];
    torus_diff_into(&x.0, &y.0, &mut out);
    Ok(TorusPoint(out))
}

/// Euclidean norm of the canonical representative; at most `sqrt(d) / 2`.
pub fn torus_norm(x: &TorusPoint) -> f64 {
    x.0.iter()
        .map(|&c| {
            let w = wrap_coordinate(c);
            w * w
        })
        .sum::<f64>()
        .sqrt()
}

/// Which matrix model a point set was drawn for.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Model {
    Torus,
    /// Points on the cube, kernel scaled by `delta`; `delta^d * n = gamma`.
    ScaledCube { delta: f64, gamma: f64 },
}

impl Model {
    pub fn tag(&self) -> &'static str {
        match self {
            Model::Torus => "torus",
            Model::ScaledCube { .. } => "scaled",
        }
    }

    pub fn delta(&self) -> Option<f64> {
        match *self {
            Model::Torus => None,
            Model::ScaledCube { delta, .. } => Some(delta),
        }
    }
}

/// An immutable sample of `n` points in dimension `d`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    coords: Vec<f64>,
    n: usize,
    d: usize,
    seed: u64,
    stream: u64,
    model: Model,
}

/// Random stream for realization `stream` under `seed`.
///
/// Each realization owns ChaCha8 stream number `stream` of the generator keyed
/// by `seed`, so the points of realization `r` do not depend on how many
/// realizations run or in which order.
pub fn realization_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives the seed used for matrix size `n` from a study's master seed
/// (SplitMix64 finalizer of `master ^ n`), so different sizes draw
/// independent configurations.
pub fn seed_for_size(master: u64, n: usize) -> u64 {
    let mut z = master ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_sizes(n: usize, d: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("n", "at least one point is required"));
    }
    if d == 0 {
        return Err(invalid("d", "dimension must be at least 1"));
    }
    Ok(())
}

fn uniform_coords(n: usize, d: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = realization_rng(seed, stream);
    (0..n * d).map(|_| rng.random::<f64>() - 0.5).collect()
}

/// `n` i.i.d. uniform points on the torus (stream 0 of `seed`).
pub fn sample_torus(n: usize, d: usize, seed: u64) -> Result<PointSet> {
    sample_torus_stream(n, d, seed, 0)
}

pub fn sample_torus_stream(n: usize, d: usize, seed: u64, stream: u64) -> Result<PointSet> {
    check_sizes(n, d)?;
    Ok(PointSet {
        coords: uniform_coords(n, d, seed, stream),
        n,
        d,
        seed,
        stream,
        model: Model::Torus,
    })
}

/// Points for the scaled model at density `gamma` (stream 0 of `seed`).
pub fn sample_for_scaled_model(n: usize, d: usize, gamma: f64, seed: u64) -> Result<PointSet> {
    sample_scaled_stream(n, d, gamma, seed, 0)
}

pub fn sample_scaled_stream(
    n: usize,
    d: usize,
    gamma: f64,
    seed: u64,
    stream: u64,
) -> Result<PointSet> {
    check_sizes(n, d)?;
    let delta = scaled_delta(n, d, gamma)?;
    Ok(PointSet {
        coords: uniform_coords(n, d, seed, stream),
        n,
        d,
        seed,
        stream,
        model: Model::ScaledCube { delta, gamma },
    })
}

/// `delta_n = (gamma / n)^(1/d)`; must lie in `(0, 1]`.
pub fn scaled_delta(n: usize, d: usize, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(invalid("gamma", format!("must be positive, got {gamma}")));
    }
    check_sizes(n, d)?;
    let delta = (gamma / n as f64).powf(1.0 / d as f64);
    if delta > 1.0 {
        return Err(invalid(
            "gamma",
            format!("gamma = {gamma} exceeds n = {n}, giving delta = {delta} > 1"),
        ));
    }
    Ok(delta)
}

impl PointSet {
    /// Builds a point set from explicit row-major coordinates (wrapped onto the torus).
    pub fn from_coords(coords: Vec<f64>, d: usize, model: Model) -> Result<Self> {
        if d == 0 || coords.len() % d != 0 || coords.is_empty() {
            return Err(invalid(
                "coords",
                format!("{} values cannot form points of dimension {d}", coords.len()),
            ));
        }
        if let Model::ScaledCube { delta, gamma } = model {
            if !(delta > 0.0 && delta <= 1.0) || !(gamma > 0.0) {
                return Err(invalid("model", "scaled model needs delta in (0, 1] and gamma > 0"));
            }
        }
        let n = coords.len() / d;
        Ok(Self {
            coords: coords.into_iter().map(wrap_coordinate).collect(),
            n,
            d,
            seed: 0,
            stream: 0,
            model,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn model(&self) -> Model {
        self.model
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn torus_point(&self, i: usize) -> TorusPoint {
        TorusPoint(self.point(i).to_vec())
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.d)
    }

    /// Writes the points as CSV with header `x1,...,xd`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record((1..=self.d).map(|j| format!("x{j}")))?;
        for p in self.iter() {
            w.write_record(p.iter().map(|c| format!("{c:.17e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads points written by [`PointSet::write_csv`].
    pub fn read_csv<R: Read>(reader: R, model: Model) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let d = r.headers()?.len();
        let mut coords = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != d {
                return Err(ErmError::DimensionMismatch {
                    expected: d,
                    actual: rec.len(),
                });
            }
            for field in rec.iter() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| invalid("points.csv", format!("`{field}` is not a number")))?;
                coords.push(v);
            }
        }
        Self::from_coords(coords, d, model)
    }
}
