//! Exact dense linear algebra over ℚ.
//!
//! Subspaces are carried as matrices whose columns span them. Every
//! comparison is an exact rank computation.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;

pub type Rational = BigRational;

/// Build a rational from small integers.
pub fn q(n: i64, d: i64) -> Rational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// Parse `"a/b"`, `"a"` or `"-a/b"`.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().ok()?;
    let d: BigInt = d.parse().ok()?;
    if d.is_zero() {
        return None;
    }
    Some(BigRational::new(n, d))
}

pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Row-major rational matrix. Also used as the `LinearMap` carrier.
#[derive(Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

pub type LinearMap = Matrix;

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| format_rational(self.get(i, j))).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![Rational::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Rational::one());
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Rational>) -> Self {
        assert_eq!(data.len(), rows * cols, "entries length must be rows*cols");
        Matrix { rows, cols, data }
    }

    pub fn from_i64(rows: usize, cols: usize, vals: &[i64]) -> Self {
        Self::from_vec(rows, cols, vals.iter().map(|&v| qi(v)).collect())
    }

    pub fn from_rows(rows: &[Vec<Rational>], cols: usize) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols);
            data.extend(r.iter().cloned());
        }
        Matrix { rows: rows.len(), cols, data }
    }

    /// Matrix whose columns are the given vectors (each of length `rows`).
    pub fn from_cols(rows: usize, cols: &[Vec<Rational>]) -> Self {
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), rows);
            for i in 0..rows {
                m.set(i, j, c[i].clone());
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.data[i * self.cols + j]
    }
    pub fn set(&mut self, i: usize, j: usize, v: Rational) {
        self.data[i * self.cols + j] = v;
    }
    pub fn entries(&self) -> &[Rational] {
        &self.data
    }

    pub fn col(&self, j: usize) -> Vec<Rational> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in product");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        let idx = i * out.cols + j;
                        out.data[idx] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let mut s = Rational::zero();
                for j in 0..self.cols {
                    let a = self.get(i, j);
                    if !a.is_zero() && !v[j].is_zero() {
                        s += a * &v[j];
                    }
                }
                s
            })
            .collect()
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.add(&other.scale(&-Rational::one()))
    }

    pub fn scale(&self, s: &Rational) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn hstack(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "hstack row mismatch");
        let mut out = Self::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j).clone());
            }
            for j in 0..other.cols {
                out.set(i, self.cols + j, other.get(i, j).clone());
            }
        }
        out
    }

    pub fn vstack(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "vstack column mismatch");
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        Matrix { rows: self.rows + other.rows, cols: self.cols, data }
    }

    /// Block-diagonal sum.
    pub fn block_diag(&self, other: &Matrix) -> Matrix {
        let mut out = Self::zeros(self.rows + other.rows, self.cols + other.cols);
        out.set_block(0, 0, self);
        out.set_block(self.rows, self.cols, other);
        out
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Matrix) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self.set(r0 + i, c0 + j, b.get(i, j).clone());
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        let mut out = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out.set(i, j, self.get(r0 + i, c0 + j).clone());
            }
        }
        out
    }

    pub fn select_cols(&self, idx: &[usize]) -> Matrix {
        let mut out = Self::zeros(self.rows, idx.len());
        for (jj, &j) in idx.iter().enumerate() {
            for i in 0..self.rows {
                out.set(i, jj, self.get(i, j).clone());
            }
        }
        out
    }

    /// Reduced row echelon form and pivot columns.
    pub fn rref(&self) -> (Matrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| !m.get(i, c).is_zero()) else { continue };
            if p != r {
                for j in 0..m.cols {
                    m.data.swap(p * m.cols + j, r * m.cols + j);
                }
            }
            let inv = m.get(r, c).recip();
            for j in c..m.cols {
                let v = m.get(r, j) * &inv;
                m.set(r, j, v);
            }
            for i in 0..m.rows {
                if i == r {
                    continue;
                }
                let f = m.get(i, c).clone();
                if f.is_zero() {
                    continue;
                }
                for j in c..m.cols {
                    let v = m.get(i, j) - &f * m.get(r, j);
                    m.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            return 0;
        }
        self.rref().1.len()
    }
}

/// Columns form a basis of ker(m).
pub fn kernel_basis(m: &Matrix) -> Matrix {
    let n = m.cols();
    let (r, piv) = m.rref();
    let free: Vec<usize> = (0..n).filter(|c| !piv.contains(c)).collect();
    let mut out = Matrix::zeros(n, free.len());
    for (k, &f) in free.iter().enumerate() {
        out.set(f, k, Rational::one());
        for (row, &p) in piv.iter().enumerate() {
            out.set(p, k, -r.get(row, f).clone());
        }
    }
    out
}

/// Canonical basis (reduced column echelon) of the column span.
pub fn span_basis(a: &Matrix) -> Matrix {
    let (r, piv) = a.transpose().rref();
    let k = piv.len();
    r.block(0, 0, k, a.rows()).transpose()
}

pub fn span_dim(a: &Matrix) -> usize {
    a.rank()
}

/// Is span(b) ⊆ span(a)?
pub fn span_contains(a: &Matrix, b: &Matrix) -> bool {
    if b.cols() == 0 {
        return true;
    }
    a.rank() == a.hstack(b).rank()
}

pub fn span_equal(a: &Matrix, b: &Matrix) -> bool {
    span_contains(a, b) && span_contains(b, a)
}

pub fn span_sum(a: &Matrix, b: &Matrix) -> Matrix {
    span_basis(&a.hstack(b))
}

pub fn span_intersect(a: &Matrix, b: &Matrix) -> Matrix {
    let a = span_basis(a);
    let b = span_basis(b);
    let k = kernel_basis(&a.hstack(&b.scale(&-Rational::one())));
    let ca = k.block(0, 0, a.cols(), k.cols());
    span_basis(&a.mul(&ca))
}

/// Basis of {x : m x ∈ span(s)}.
pub fn preimage(m: &Matrix, s: &Matrix) -> Matrix {
    let k = kernel_basis(&m.hstack(&s.scale(&-Rational::one())));
    span_basis(&k.block(0, 0, m.cols(), k.cols()))
}

pub fn image(m: &Matrix, s: &Matrix) -> Matrix {
    span_basis(&m.mul(s))
}

/// Columns of `z` (in order) extending a basis of span(d) to one of
/// span(d) + span(z); the result spans a complement of d inside d + z.
pub fn complement_in(d: &Matrix, z: &Matrix) -> Matrix {
    let mut acc = span_basis(d);
    let mut chosen = Vec::new();
    let zb = span_basis(z);
    for j in 0..zb.cols() {
        let c = zb.select_cols(&[j]);
        let next = acc.hstack(&c);
        if next.rank() > acc.cols() {
            acc = next;
            chosen.push(j);
        }
    }
    zb.select_cols(&chosen)
}

/// Solve `basis * c = v` for `c` (basis columns independent). `None` if v ∉ span.
pub fn coordinates(basis: &Matrix, v: &Matrix) -> Option<Matrix> {
    let n = basis.cols();
    let aug = basis.hstack(v);
    let (r, piv) = aug.rref();
    if piv.iter().any(|&p| p >= n) {
        return None;
    }
    let mut c = Matrix::zeros(n, v.cols());
    for (row, &p) in piv.iter().enumerate() {
        for j in 0..v.cols() {
            c.set(p, j, r.get(row, n + j).clone());
        }
    }
    if basis.mul(&c) != *v {
        return None;
    }
    Some(c)
}

/// Any solution `x` of `m x = v` (columns of v solved independently).
pub fn solve_any(m: &Matrix, v: &Matrix) -> Option<Matrix> {
    let n = m.cols();
    let (r, piv) = m.hstack(v).rref();
    if piv.iter().any(|&p| p >= n) {
        return None;
    }
    let mut x = Matrix::zeros(n, v.cols());
    for (row, &p) in piv.iter().enumerate() {
        for j in 0..v.cols() {
            x.set(p, j, r.get(row, n + j).clone());
        }
    }
    Some(x)
}

/// Max absolute entry, for quick diagnostics.
pub fn max_abs(m: &Matrix) -> Rational {
    m.entries().iter().map(|x| x.abs()).fold(Rational::zero(), |a, b| if b > a { b } else { a })
}
