//! Dense kernel matrices built from a point set.
//!
//! Storage is column-major. Hermitian matrices are filled from one kernel
//! evaluation per unordered pair and mirrored, so `a[j][i] == conj(a[i][j])`
//! holds exactly.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, ErmError, Result};
use crate::exec::Execution;
use crate::kernel::{CompactKernel, PeriodicKernel};
use crate::pointset::{torus_diff_into, Model, PointSet};

#[derive(Clone, Debug, PartialEq)]
pub enum MatrixData {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// Where a matrix came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub builder: String,
    pub kernel: String,
    pub seed: u64,
    pub stream: u64,
    pub model: String,
    pub n: usize,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} of {} on {} points (model {}, seed {}, stream {})",
            self.builder, self.kernel, self.n, self.model, self.seed, self.stream
        )
    }
}

/// Dense `n × n` matrix. `hermitian` is false only for matrices built from
/// a non-hermitian kernel; eigen-routines reject those.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    data: MatrixData,
    hermitian: bool,
    provenance: Provenance,
}

/// Whether a geometric-graph radius is taken as is or multiplied by `delta`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RadiusScale {
    Raw,
    ScaledByDelta,
}

impl HermitianMatrix {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn is_real(&self) -> bool {
        matches!(self.data, MatrixData::Real(_))
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn data(&self) -> &MatrixData {
        &self.data
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        let k = i + j * self.n;
        match &self.data {
            MatrixData::Real(v) => Complex64::new(v[k], 0.0),
            MatrixData::Complex(v) => v[k],
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.entry(i, i)).sum()
    }

    /// `Σ |a_ij|^2`.
    pub fn frobenius_sq(&self) -> f64 {
        match &self.data {
            MatrixData::Real(v) => v.iter().map(|x| x * x).sum(),
            MatrixData::Complex(v) => v.iter().map(|x| x.norm_sqr()).sum(),
        }
    }

    /// `max |a_ij|`.
    pub fn max_abs(&self) -> f64 {
        match &self.data {
            MatrixData::Real(v) => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            MatrixData::Complex(v) => v.iter().fold(0.0, |m, x| m.max(x.norm())),
        }
    }

    pub fn row_sums(&self) -> Vec<Complex64> {
        let mut sums = vec![Complex64::new(0.0, 0.0); self.n];
        for j in 0..self.n {
            for (i, s) in sums.iter_mut().enumerate() {
                *s += self.entry(i, j);
            }
        }
        sums
    }

    /// `A x`.
    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        match &self.data {
            MatrixData::Real(v) => {
                for (j, xj) in x.iter().enumerate() {
                    let col = &v[j * self.n..(j + 1) * self.n];
                    for (yi, a) in y.iter_mut().zip(col) {
                        *yi += xj * a;
                    }
                }
            }
            MatrixData::Complex(v) => {
                for (j, xj) in x.iter().enumerate() {
                    let col = &v[j * self.n..(j + 1) * self.n];
                    for (yi, a) in y.iter_mut().zip(col) {
                        *yi += a * xj;
                    }
                }
            }
        }
        y
    }

    /// Largest off-diagonal row count of nonzero entries (the maximal degree
    /// for an adjacency matrix).
    pub fn max_degree(&self) -> usize {
        (0..self.n)
            .map(|i| (0..self.n).filter(|&j| j != i && self.entry(i, j).norm() != 0.0).count())
            .max()
            .unwrap_or(0)
    }

    /// Binary dump: `n` as u64 LE, one byte `is_real`, then entries in
    /// row-major order as f64 LE (`re, im` pairs when complex).
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&[self.is_real() as u8])?;
        for i in 0..self.n {
            for j in 0..self.n {
                let e = self.entry(i, j);
                w.write_all(&e.re.to_le_bytes())?;
                if !self.is_real() {
                    w.write_all(&e.im.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }
}

fn provenance(builder: &str, kernel: &str, pts: &PointSet) -> Provenance {
    Provenance {
        builder: builder.to_string(),
        kernel: kernel.to_string(),
        seed: pts.seed(),
        stream: pts.stream(),
        model: pts.model().tag().to_string(),
        n: pts.len(),
    }
}

fn check_dims(kernel_d: usize, pts: &PointSet) -> Result<()> {
    if kernel_d != pts.dim() {
        return Err(ErmError::DimensionMismatch {
            expected: kernel_d,
            actual: pts.dim(),
        });
    }
    Ok(())
}

/// Fills a matrix from `entry(i, j, scratch)`.
///
/// For hermitian input only `i < j` is evaluated; the diagonal is `diag`.
fn fill<E>(n: usize, d: usize, hermitian: bool, real: bool, diag: Complex64, exec: Execution, entry: E) -> MatrixData
where
    E: Fn(usize, usize, &mut [f64]) -> Complex64 + Sync + Send,
{
    // Columns are computed in parallel; each returns its strictly upper part
    // (hermitian) or its full contents (general).
    let columns: Vec<Vec<Complex64>> = exec.map(n, |j| {
        let mut scratch = vec![0.0; d];
        let rows = if hermitian { j } else { n };
        (0..rows).map(|i| entry(i, j, &mut scratch)).collect()
    });
    let mut full = vec![Complex64::new(0.0, 0.0); n * n];
    for (j, col) in columns.into_iter().enumerate() {
        for (i, v) in col.into_iter().enumerate() {
            full[i + j * n] = v;
            if hermitian {
                full[j + i * n] = v.conj();
            }
        }
        if hermitian {
            full[j + j * n] = diag;
        }
    }
    if real {
        MatrixData::Real(full.into_iter().map(|c| c.re).collect())
    } else {
        MatrixData::Complex(full)
    }
}

/// `A = (F(X_i - X_j))` with torus differences.
pub fn build_a(f: &PeriodicKernel, pts: &PointSet, exec: Execution) -> Result<HermitianMatrix> {
    check_dims(f.dim(), pts)?;
    let n = pts.len();
    let hermitian = f.is_hermitian();
    let real = f.is_real_valued();
    let diag = Complex64::new(f.value_at_origin().re, 0.0);
    let data = fill(n, pts.dim(), hermitian, real, diag, exec, |i, j, diff| {
        torus_diff_into(pts.point(i), pts.point(j), diff);
        f.eval_canonical(diff)
    });
    Ok(HermitianMatrix {
        n,
        data,
        hermitian,
        provenance: provenance("A", f.id(), pts),
    })
}

/// `Ā = A - F(0) I`.
pub fn build_abar(f: &PeriodicKernel, pts: &PointSet, exec: Execution) -> Result<HermitianMatrix> {
    let mut a = build_a(f, pts, exec)?;
    let f0 = f.value_at_origin();
    let n = a.n;
    match &mut a.data {
        MatrixData::Real(v) => {
            for i in 0..n {
                v[i + i * n] -= f0.re;
            }
        }
        MatrixData::Complex(v) => {
            for i in 0..n {
                v[i + i * n] -= f0;
            }
        }
    }
    a.provenance.builder = "Abar".into();
    Ok(a)
}

/// `A - u diag(row sums of A)`; `F` must be real-valued.
pub fn build_u_deformed(f: &PeriodicKernel, pts: &PointSet, u: f64, exec: Execution) -> Result<HermitianMatrix> {
    if !f.is_real_valued() {
        return Err(ErmError::KernelRequirement {
            kernel: f.id().to_string(),
            requirement: "real values (row sums must be real)".into(),
        });
    }
    if !u.is_finite() {
        return Err(invalid("u", "must be finite"));
    }
    let mut a = build_a(f, pts, exec)?;
    let n = a.n;
    let sums: Vec<f64> = a.row_sums().iter().map(|s| s.re).collect();
    if let MatrixData::Real(v) = &mut a.data {
        for (i, s) in sums.iter().enumerate() {
            v[i + i * n] -= u * s;
        }
    }
    a.provenance.builder = format!("u-deformed(u={u})");
    Ok(a)
}

/// `B = (f((X_i - X_j) / delta))`; with `periodic_extension` the difference is
/// taken on the torus (the matrix `B̃`).
pub fn build_b(f: &CompactKernel, pts: &PointSet, periodic_extension: bool, exec: Execution) -> Result<HermitianMatrix> {
    check_dims(f.dim(), pts)?;
    let delta = pts
        .model()
        .delta()
        .ok_or_else(|| invalid("pts", "point set carries no delta (sample it for the scaled model)"))?;
    let n = pts.len();
    let hermitian = f.is_hermitian();
    let real = f.is_real_valued();
    let diag = Complex64::new(f.value_at_origin().re, 0.0);
    let inv = 1.0 / delta;
    let data = fill(n, pts.dim(), hermitian, real, diag, exec, |i, j, diff| {
        let (x, y) = (pts.point(i), pts.point(j));
        if periodic_extension {
            torus_diff_into(x, y, diff);
        } else {
            for ((o, a), b) in diff.iter_mut().zip(x).zip(y) {
                *o = a - b;
            }
        }
        for v in diff.iter_mut() {
            *v *= inv;
        }
        f.eval(diff)
    });
    Ok(HermitianMatrix {
        n,
        data,
        hermitian,
        provenance: provenance(if periodic_extension { "B-periodic" } else { "B" }, f.id(), pts),
    })
}

/// 0/1 adjacency of the geometric graph `‖X_i - X_j‖ <= radius` (torus metric
/// for torus point sets, Euclidean for the scaled model), zero diagonal.
pub fn build_geometric_adjacency(
    pts: &PointSet,
    radius: f64,
    scale: RadiusScale,
    exec: Execution,
) -> Result<HermitianMatrix> {
    if !(radius > 0.0) {
        return Err(invalid("radius", format!("{radius} must be positive")));
    }
    let rho = match scale {
        RadiusScale::Raw => radius,
        RadiusScale::ScaledByDelta => {
            radius
                * pts
                    .model()
                    .delta()
                    .ok_or_else(|| invalid("scale", "ScaledByDelta needs a scaled point set"))?
        }
    };
    let torus = pts.model() == Model::Torus;
    let rho2 = rho * rho;
    let data = fill(pts.len(), pts.dim(), true, true, Complex64::new(0.0, 0.0), exec, |i, j, diff| {
        let (x, y) = (pts.point(i), pts.point(j));
        if torus {
            torus_diff_into(x, y, diff);
        } else {
            for ((o, a), b) in diff.iter_mut().zip(x).zip(y) {
                *o = a - b;
            }
        }
        let s: f64 = diff.iter().map(|v| v * v).sum();
        Complex64::new(if s <= rho2 { 1.0 } else { 0.0 }, 0.0)
    });
    Ok(HermitianMatrix {
        n: pts.len(),
        data,
        hermitian: true,
        provenance: provenance(&format!("adjacency(radius={rho})"), "indicator", pts),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointset::{sample_for_scaled_model, sample_torus};

    fn det3(m: &HermitianMatrix) -> Complex64 {
        let e = |i, j| m.entry(i, j);
        e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1)) - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
            + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0))
    }

    #[test]
    fn box_matrix_is_symmetric_zero_one() {
        let f = PeriodicKernel::box_indicator(1, 0.25).unwrap();
        let pts = sample_torus(50, 1, 3).unwrap();
        let a = build_a(&f, &pts, Execution::Serial).unwrap();
        assert!(a.is_real() && a.is_hermitian());
        for i in 0..50 {
            assert_eq!(a.entry(i, i).re, 1.0);
            for j in 0..50 {
                let v = a.entry(i, j).re;
                assert!(v == 0.0 || v == 1.0);
                assert_eq!(v, a.entry(j, i).re);
            }
        }
        assert_eq!(a.trace().re, 50.0);
    }

    #[test]
    fn complex_matrix_is_exactly_hermitian() {
        let f = PeriodicKernel::pure_mode(vec![1, 2]).unwrap();
        let pts = sample_torus(30, 2, 9).unwrap();
        let a = build_a(&f, &pts, Execution::Parallel).unwrap();
        assert!(!a.is_real());
        for i in 0..30 {
            for j in 0..30 {
                assert_eq!(a.entry(i, j), a.entry(j, i).conj());
            }
        }
        assert_eq!(a.trace(), Complex64::new(30.0, 0.0));
    }

    #[test]
    fn single_point() {
        let f = PeriodicKernel::box_indicator(2, 0.1).unwrap();
        let pts = sample_torus(1, 2, 0).unwrap();
        let a = build_a(&f, &pts, Execution::Serial).unwrap();
        assert_eq!(a.order(), 1);
        assert_eq!(a.entry(0, 0).re, 1.0);
    }

    #[test]
    fn abar_small_determinants() {
        let f = PeriodicKernel::box_indicator(1, 0.25).unwrap();
        let pts = PointSet::from_coords(vec![0.0, 0.1], 1, Model::Torus).unwrap();
        let abar = build_abar(&f, &pts, Execution::Serial).unwrap();
        assert_eq!(abar.trace().re, 0.0);
        let det = abar.entry(0, 0) * abar.entry(1, 1) - abar.entry(0, 1) * abar.entry(1, 0);
        assert_eq!(det.re, -abar.entry(0, 1).norm_sqr());

        let pts = PointSet::from_coords(vec![0.0, 0.1, 0.2], 1, Model::Torus).unwrap();
        let abar = build_abar(&f, &pts, Execution::Serial).unwrap();
        let product = abar.entry(0, 1) * abar.entry(1, 2) * abar.entry(2, 0);
        assert_eq!(det3(&abar), product * 2.0);
        assert_eq!(det3(&abar).re, 2.0);
    }

    #[test]
    fn u_deformation() {
        let f = PeriodicKernel::box_indicator(1, 0.25).unwrap();
        let pts = sample_torus(40, 1, 5).unwrap();
        let a = build_a(&f, &pts, Execution::Serial).unwrap();
        let a0 = build_u_deformed(&f, &pts, 0.0, Execution::Serial).unwrap();
        assert_eq!(a.data(), a0.data());
        let l = build_u_deformed(&f, &pts, 1.0, Execution::Serial).unwrap();
        for s in l.row_sums() {
            assert_eq!(s.re, 0.0);
        }
        let ones = vec![Complex64::new(1.0, 0.0); 40];
        assert!(l.matvec(&ones).iter().all(|v| v.norm() == 0.0));
        let p = PeriodicKernel::pure_mode(vec![1]).unwrap();
        assert!(build_u_deformed(&p, &pts, 1.0, Execution::Serial).is_err());
    }

    #[test]
    fn scaled_matrix() {
        let f = CompactKernel::box_indicator(1, 0.25).unwrap();
        let pts = sample_for_scaled_model(200, 1, 1.0, 4).unwrap();
        let b = build_b(&f, &pts, false, Execution::Serial).unwrap();
        let bt = build_b(&f, &pts, true, Execution::Serial).unwrap();
        let delta = pts.model().delta().unwrap();
        for i in 0..200 {
            assert_eq!(b.entry(i, i).re, 1.0);
            for j in 0..200 {
                let diff = (pts.point(i)[0] - pts.point(j)[0]).abs() / delta;
                assert_eq!(b.entry(i, j).re, if diff <= 0.25 { 1.0 } else { 0.0 });
                // the periodic matrix has at least the plain entries
                assert!(bt.entry(i, j).re >= b.entry(i, j).re);
            }
        }
        assert!(build_b(&f, &sample_torus(5, 1, 0).unwrap(), false, Execution::Serial).is_err());
    }

    #[test]
    fn isolated_points_give_identity() {
        let f = CompactKernel::box_indicator(1, 0.25).unwrap();
        let coords = vec![-0.4, -0.2, 0.0, 0.2, 0.4];
        let pts = PointSet::from_coords(coords, 1, Model::ScaledCube { delta: 0.1, gamma: 0.5 }).unwrap();
        let b = build_b(&f, &pts, false, Execution::Serial).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(b.entry(i, j).re, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn adjacency_extremes() {
        let pts = sample_torus(20, 2, 1).unwrap();
        let full = build_geometric_adjacency(&pts, 1.0, RadiusScale::Raw, Execution::Serial).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                assert_eq!(full.entry(i, j).re, if i == j { 0.0 } else { 1.0 });
            }
        }
        assert_eq!(full.max_degree(), 19);
        let empty = build_geometric_adjacency(&pts, 1e-9, RadiusScale::Raw, Execution::Serial).unwrap();
        assert_eq!(empty.frobenius_sq(), 0.0);
        let degrees: Vec<f64> = full.row_sums().iter().map(|s| s.re).collect();
        assert!(degrees.iter().all(|&d| d == 19.0));
        assert!(build_geometric_adjacency(&pts, 0.0, RadiusScale::Raw, Execution::Serial).is_err());
    }

    #[test]
    fn parallel_fill_matches_serial() {
        let f = PeriodicKernel::ball_indicator(2, 0.2).unwrap();
        let pts = sample_torus(120, 2, 77).unwrap();
        let s = build_a(&f, &pts, Execution::Serial).unwrap();
        let p = build_a(&f, &pts, Execution::Parallel).unwrap();
        assert_eq!(s, p);
    }

    #[test]
    fn binary_dump_layout() {
        let f = PeriodicKernel::box_indicator(1, 0.25).unwrap();
        let pts = PointSet::from_coords(vec![0.0, 0.4], 1, Model::Torus).unwrap();
        let a = build_a(&f, &pts, Execution::Serial).unwrap();
        let mut buf = Vec::new();
        a.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 1 + 4 * 8);
        assert_eq!(u64::from_le_bytes(buf[..8].try_into().unwrap()), 2);
        assert_eq!(buf[8], 1);
    }
}
