//! Dense symmetric matrices and a cyclic Jacobi eigensolver.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::space::Vector;

/// Maximum entrywise asymmetry accepted for a "symmetric" matrix.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Off-diagonal convergence tolerance for the Jacobi sweeps, relative to the
/// Frobenius norm of the input.
pub const JACOBI_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 100;

/// Square symmetric matrix, stored row-major. Serializes as nested rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(invalid("q", "matrix must be non-empty"));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != n) {
            return Err(invalid(
                "q",
                format!("row {i} has length {} but the matrix has {n} rows", rows[i].len()),
            ));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        let m = Self { n, data };
        let asymmetry = m.asymmetry();
        if asymmetry > SYMMETRY_TOL {
            return Err(Error::NonSymmetric { asymmetry });
        }
        Ok(m)
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        let n = values.len();
        Self::from_rows(
            (0..n)
                .map(|i| (0..n).map(|j| if i == j { values[i] } else { 0.0 }).collect())
                .collect(),
        )
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n]).expect("identity is symmetric")
    }

    /// `V diag(values) V^T` for orthonormal columns `V`.
    pub fn from_eigen(values: &[f64], vectors: &[Vector]) -> Result<Self> {
        let n = values.len();
        if vectors.len() != n || vectors.iter().any(|v| v.dim() != n) {
            return Err(invalid("vectors", "need n eigenvectors of dimension n"));
        }
        let mut rows = vec![vec![0.0; n]; n];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = (0..n).map(|l| values[l] * vectors[l][i] * vectors[l][j]).sum();
            }
        }
        // symmetrize away rounding
        for i in 0..n {
            for j in 0..i {
                let avg = 0.5 * (rows[i][j] + rows[j][i]);
                rows[i][j] = avg;
                rows[j][i] = avg;
            }
        }
        Self::from_rows(rows)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn mul_vec(&self, x: &Vector) -> Vector {
        assert_eq!(x.dim(), self.n, "dimension mismatch");
        Vector::from_fn(self.n, |i| {
            self.data[i * self.n..(i + 1) * self.n]
                .iter()
                .zip(x.as_slice())
                .map(|(a, b)| a * b)
                .sum()
        })
    }

    /// Eigen-decomposition by cyclic Jacobi rotations. Eigenvalues come back in
    /// ascending order with matching orthonormal eigenvectors.
    pub fn eigen(&self) -> Eigen {
        jacobi(self)
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.rows()
    }
}

#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vector>,
    pub sweeps: usize,
}

fn jacobi(m: &SymMatrix) -> Eigen {
    let n = m.n;
    let mut a: Vec<Vec<f64>> = m.rows();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let frob = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = JACOBI_TOL * frob.max(f64::MIN_POSITIVE);
    let off = |a: &Vec<Vec<f64>>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i][j] * a[i][j];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    // One extra sweep after reaching the threshold; convergence is quadratic so
    // this drives the off-diagonal mass to rounding level.
    let mut extra = 1;
    while sweeps < MAX_SWEEPS {
        if off(&a) <= threshold {
            if extra == 0 {
                break;
            }
            extra -= 1;
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    Eigen {
        values: order.iter().map(|&i| a[i][i]).collect(),
        vectors: order.iter().map(|&i| Vector::from_fn(n, |r| v[r][i])).collect(),
        sweeps,
    }
}

/// Solves `(I - Q) x = c` through the eigen-decomposition. `None` when
/// `I - Q` is singular (some eigenvalue within `tol` of 1).
pub(crate) fn solve_shifted(q: &SymMatrix, c: &Vector, tol: f64) -> Option<Vector> {
    let eig = q.eigen();
    if eig.values.iter().any(|a| (1.0 - a).abs() <= tol) {
        return None;
    }
    let n = q.dim();
    let mut x = Vector::zeros(n);
    for (a, v) in eig.values.iter().zip(&eig.vectors) {
        let coef = v.dot(c) / (1.0 - a);
        x = Vector::lincomb(1.0, &x, coef, v);
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_non_symmetric_and_ragged() {
        assert!(matches!(
            SymMatrix::from_rows(vec![vec![1.0, 2.0], vec![0.0, 1.0]]),
            Err(Error::NonSymmetric { .. })
        ));
        assert!(SymMatrix::from_rows(vec![vec![1.0, 2.0], vec![2.0]]).is_err());
        assert!(SymMatrix::from_rows(vec![]).is_err());
    }

    #[test]
    fn diagonal_eigen_is_exact() {
        let e = SymMatrix::diag(&[-3.0, 0.5]).unwrap().eigen();
        assert_eq!(e.values, vec![-3.0, 0.5]);
    }

    #[test]
    fn jacobi_matches_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for n in [2usize, 3, 5, 9, 20] {
            let mut rows = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..=i {
                    let x: f64 = rng.random_range(-3.0..3.0);
                    rows[i][j] = x;
                    rows[j][i] = x;
                }
            }
            let m = SymMatrix::from_rows(rows.clone()).unwrap();
            let ours = m.eigen();
            let na = nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]);
            let mut theirs: Vec<f64> = na.symmetric_eigen().eigenvalues.iter().copied().collect();
            theirs.sort_by(f64::total_cmp);
            for (a, b) in ours.values.iter().zip(&theirs) {
                assert!((a - b).abs() < 1e-12, "n={n}: {a} vs {b}");
            }
            for (a, v) in ours.values.iter().zip(&ours.vectors) {
                let r = &m.mul_vec(v) - &(*a * v);
                assert!(r.norm() < 1e-12);
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shifted_solve() {
        let q = SymMatrix::diag(&[0.5]).unwrap();
        let x = solve_shifted(&q, &Vector::new(vec![1.0]).unwrap(), 1e-12).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15);
        assert!(solve_shifted(&SymMatrix::identity(2), &Vector::zeros(2), 1e-12).is_none());
    }

    #[test]
    fn serde_rows() {
        let m: SymMatrix = serde_json::from_str("[[1,2],[2,-1]]").unwrap();
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(serde_json::to_string(&m).unwrap(), "[[1.0,2.0],[2.0,-1.0]]");
    }
}
