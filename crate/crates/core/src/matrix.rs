//! Dense complex matrices and the Hermitian eigensolver.
//!
//! Everything here targets desk-scale operators (dimension ≤ 64), so the
//! representation is a plain row-major `Vec<Complex64>` and the eigensolver
//! is a cyclic Jacobi iteration: slow in theory, rock solid in practice at
//! these sizes.

use num_complex::Complex64;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::MatrixError;

/// Complex scalar used throughout.
pub type C64 = Complex64;

/// Shorthand for building a complex scalar.
#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense complex matrix, row-major. Most uses are square operators; the
/// rectangular case only shows up in block decompositions.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, c64(1.0, 0.0));
        }
        m
    }

    /// Build from explicit rows; all rows must agree in length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self, MatrixError> {
        let r = rows.len();
        if r == 0 {
            return Err(MatrixError::BadData("empty matrix".into()));
        }
        let c = rows[0].len();
        if c == 0 || rows.iter().any(|row| row.len() != c) {
            return Err(MatrixError::BadData("ragged or empty rows".into()));
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.iter().flat_map(|row| row.iter().copied()).collect(),
        })
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        Self::from_diag(&diag.iter().map(|&x| c64(x, 0.0)).collect::<Vec<_>>())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Side length of a square matrix.
    #[inline]
    pub fn dim(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows
    }

    pub fn require_square(&self) -> Result<usize, MatrixError> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(MatrixError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(c64(s, 0.0))
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.set(j, i, self.at(i, j).conj());
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        debug_assert!(self.is_square());
        (0..self.rows).map(|i| self.at(i, i)).sum()
    }

    /// Real part of the trace; the imaginary part is discarded.
    pub fn trace_re(&self) -> f64 {
        self.trace().re
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// ‖A − A†‖_F, zero exactly when Hermitian.
    pub fn hermiticity_defect(&self) -> f64 {
        debug_assert!(self.is_square());
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let d = self.at(i, j) - self.at(j, i).conj();
                acc += d.norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// (A + A†)/2.
    pub fn hermitize(&self) -> Self {
        let adj = self.adjoint();
        (self + &adj).scale_re(0.5)
    }

    /// Extract the sub-block with rows `r0..r1` and columns `c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        let mut m = Self::zeros(r1 - r0, c1 - c0);
        for i in r0..r1 {
            for j in c0..c1 {
                m.set(i - r0, j - c0, self.at(i, j));
            }
        }
        m
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &ComplexMatrix) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self.set(r0 + i, c0 + j, b.at(i, j));
            }
        }
    }

    /// Hilbert-Schmidt inner product Tr(A† B).
    pub fn hs_inner(&self, other: &Self) -> C64 {
        debug_assert_eq!(self.rows, other.rows);
        debug_assert_eq!(self.cols, other.cols);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Nested `[re, im]` pairs, the wire format used by configs and reports.
    pub fn to_nested(&self) -> Vec<Vec<[f64; 2]>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| [self.at(i, j).re, self.at(i, j).im]).collect())
            .collect()
    }

    pub fn from_nested(rows: &[Vec<[f64; 2]>]) -> Result<Self, MatrixError> {
        let parsed: Vec<Vec<C64>> = rows
            .iter()
            .map(|row| row.iter().map(|&[re, im]| c64(re, im)).collect())
            .collect();
        let m = Self::from_rows(&parsed)?;
        if !m.is_finite() {
            return Err(MatrixError::BadData("non-finite entry".into()));
        }
        Ok(m)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self.at(i, j);
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.rows, rhs.rows);
        assert_eq!(self.cols, rhs.cols);
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect()
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.rows, rhs.rows);
        assert_eq!(self.cols, rhs.cols);
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect()
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_re(-1.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    let v = out.at(i, j) + a * rhs.at(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }
}

/// AB − BA.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    &(a * b) - &(b * a)
}

/// AB + BA.
pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    &(a * b) + &(b * a)
}

/// Eigendecomposition of a Hermitian matrix: `values` ascending, eigenvectors
/// stored as the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// V f(Λ) V† for a real function of the eigenvalues.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let mut out = ComplexMatrix::zeros(n, n);
        for k in 0..n {
            let fk = f(self.values[k]);
            if fk == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = self.vectors.at(i, k);
                for j in 0..n {
                    let v = out.at(i, j) + vik * self.vectors.at(j, k).conj() * c64(fk, 0.0);
                    out.set(i, j, v);
                }
            }
        }
        out
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver for Hermitian matrices.
///
/// Each rotation zeroes one off-diagonal pair through a phased Givens
/// rotation; sweeps repeat until the off-diagonal mass is at rounding level.
pub fn eigh(m: &ComplexMatrix) -> Result<HermitianEigen, MatrixError> {
    let n = m.require_square()?;
    let scale = m.max_abs().max(1e-300);
    let defect = m.hermiticity_defect();
    if defect > 1e-8 * scale.max(1.0) {
        return Err(MatrixError::NotHermitian {
            defect,
            tol: 1e-8 * scale.max(1.0),
        });
    }
    let mut a = m.hermitize();
    let mut q = ComplexMatrix::identity(n);
    if n == 1 {
        return Ok(HermitianEigen {
            values: vec![a.at(0, 0).re],
            vectors: q,
        });
    }

    let mut converged = false;
    let mut off = 0.0;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        off = 0.0;
        for p in 0..n {
            for r in (p + 1)..n {
                off += a.at(p, r).norm_sqr();
            }
        }
        off = (2.0 * off).sqrt();
        if off <= 1e-14 * scale * (n as f64) {
            converged = true;
            break;
        }
        for p in 0..(n - 1) {
            for r in (p + 1)..n {
                let apr = a.at(p, r);
                let mag = apr.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apr / mag; // e^{iφ}, so A_pr = mag·phase
                let app = a.at(p, p).re;
                let arr = a.at(r, r).re;
                // Real symmetric Schur decomposition of [[app, mag],[mag, arr]].
                let tau = (arr - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cth = 1.0 / (1.0 + t * t).sqrt();
                let sth = t * cth;
                // V = diag(1, conj(phase)) · [[c, s],[−s, c]]
                let v11 = c64(cth, 0.0);
                let v12 = c64(sth, 0.0);
                let v21 = -phase.conj() * sth;
                let v22 = phase.conj() * cth;
                // Column update: A ← A·V on columns p, r.
                for i in 0..n {
                    let aip = a.at(i, p);
                    let air = a.at(i, r);
                    a.set(i, p, aip * v11 + air * v21);
                    a.set(i, r, aip * v12 + air * v22);
                }
                // Row update: A ← V†·A on rows p, r.
                for j in 0..n {
                    let apj = a.at(p, j);
                    let arj = a.at(r, j);
                    a.set(p, j, v11.conj() * apj + v21.conj() * arj);
                    a.set(r, j, v12.conj() * apj + v22.conj() * arj);
                }
                // Accumulate eigenvectors: Q ← Q·V.
                for i in 0..n {
                    let qip = q.at(i, p);
                    let qir = q.at(i, r);
                    q.set(i, p, qip * v11 + qir * v21);
                    q.set(i, r, qip * v12 + qir * v22);
                }
            }
        }
    }
    if !converged {
        return Err(MatrixError::NoConvergence {
            sweeps: JACOBI_MAX_SWEEPS,
            off,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.at(i, i).re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (newcol, &oldcol) in order.iter().enumerate() {
        for i in 0..n {
            vectors.set(i, newcol, q.at(i, oldcol));
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &ComplexMatrix) -> Result<f64, MatrixError> {
    Ok(eigh(m)?.min())
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn max_eigenvalue(m: &ComplexMatrix) -> Result<f64, MatrixError> {
    Ok(eigh(m)?.max())
}
