//! Exact arithmetic in cyclotomic fields ℚ(ζ_N).
//!
//! An element is stored in the power basis 1, ζ, …, ζ^{φ(N)−1} reduced modulo
//! the N-th cyclotomic polynomial. Elements of different conductors are
//! combined in ℚ(ζ_L), L = lcm of the conductors.

use crate::linalg::{format_rational, solve_any, Matrix, Rational};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Mutex, OnceLock};

/// Coefficients (constant term first) of Φ_N, an integer monic polynomial.
pub fn cyclotomic_poly(n: u32) -> Vec<i64> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Vec<i64>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(p) = cache.lock().unwrap().get(&n) {
        return p.clone();
    }
    assert!(n >= 1);
    // x^n − 1 divided by Φ_d for the proper divisors d of n
    let mut p = vec![0i64; n as usize + 1];
    p[0] = -1;
    p[n as usize] = 1;
    for d in 1..n {
        if n.is_multiple_of(d) {
            p = poly_div_exact(&p, &cyclotomic_poly(d));
        }
    }
    cache.lock().unwrap().insert(n, p.clone());
    p
}

fn poly_div_exact(num: &[i64], den: &[i64]) -> Vec<i64> {
    let mut r = num.to_vec();
    let dd = den.len() - 1;
    let mut q = vec![0i64; r.len() - dd];
    for i in (0..q.len()).rev() {
        let c = r[i + dd] / den[dd];
        q[i] = c;
        for (j, &dj) in den.iter().enumerate() {
            r[i + j] -= c * dj;
        }
    }
    debug_assert!(r.iter().all(|&x| x == 0));
    q
}

pub fn euler_phi(n: u32) -> usize {
    cyclotomic_poly(n).len() - 1
}

/// Element of ℚ(ζ_N).
#[derive(Clone, Debug)]
pub struct CycloNum {
    n: u32,
    c: Vec<Rational>,
}

impl CycloNum {
    pub fn from_rational(q: Rational) -> Self {
        CycloNum { n: 1, c: vec![q] }
    }

    pub fn from_i64(v: i64) -> Self {
        Self::from_rational(Rational::from_integer(BigInt::from(v)))
    }

    pub fn zero() -> Self {
        Self::from_i64(0)
    }

    pub fn one() -> Self {
        Self::from_i64(1)
    }

    /// ζ_N^k with ζ_N = e^{2πi/N}.
    pub fn zeta_pow(n: u32, k: i64) -> Self {
        assert!(n >= 1);
        let k = k.rem_euclid(n as i64) as usize;
        let mut v = vec![Rational::zero(); k + 1];
        v[k] = Rational::one();
        Self::reduce(n, v)
    }

    /// Builds an element from power-basis coefficients (any length).
    pub fn from_coeffs(n: u32, coeffs: Vec<Rational>) -> Self {
        Self::reduce(n, coeffs)
    }

    fn reduce(n: u32, mut v: Vec<Rational>) -> Self {
        let phi = cyclotomic_poly(n);
        let deg = phi.len() - 1;
        while v.len() > deg {
            let top = v.pop().unwrap();
            if top.is_zero() {
                continue;
            }
            let shift = v.len() - deg;
            for (j, &pj) in phi.iter().enumerate().take(deg) {
                v[shift + j] -= &top * Rational::from_integer(BigInt::from(pj));
            }
        }
        v.resize(deg, Rational::zero());
        CycloNum { n, c: v }
    }

    pub fn conductor(&self) -> u32 {
        self.n
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.c
    }

    /// The same element viewed in ℚ(ζ_m), m a multiple of the conductor.
    pub fn lift(&self, m: u32) -> Self {
        if m == self.n {
            return self.clone();
        }
        assert!(m.is_multiple_of(self.n), "conductor {} does not divide {}", self.n, m);
        let step = (m / self.n) as usize;
        let mut v = vec![Rational::zero(); step * self.c.len().max(1)];
        for (i, ci) in self.c.iter().enumerate() {
            v[i * step] = ci.clone();
        }
        Self::reduce(m, v)
    }

    fn common(a: &Self, b: &Self) -> (Self, Self) {
        if a.n == b.n {
            return (a.clone(), b.clone());
        }
        let l = (a.n as u64).lcm(&(b.n as u64)) as u32;
        (a.lift(l), b.lift(l))
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|x| x.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.c[0].is_one() && self.c[1..].iter().all(|x| x.is_zero())
    }

    /// `Some(q)` when the element is rational.
    pub fn as_rational(&self) -> Option<Rational> {
        if self.c[1..].iter().all(|x| x.is_zero()) {
            Some(self.c[0].clone())
        } else {
            None
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let (a, b) = Self::common(self, o);
        CycloNum { n: a.n, c: a.c.iter().zip(&b.c).map(|(x, y)| x + y).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        CycloNum { n: self.n, c: self.c.iter().map(|x| -x).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let (a, b) = Self::common(self, o);
        let mut v = vec![Rational::zero(); a.c.len() + b.c.len()];
        for (i, x) in a.c.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.c.iter().enumerate() {
                if !y.is_zero() {
                    v[i + j] += x * y;
                }
            }
        }
        Self::reduce(a.n, v)
    }

    pub fn scale(&self, q: &Rational) -> Self {
        CycloNum { n: self.n, c: self.c.iter().map(|x| x * q).collect() }
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        if let Some(q) = self.as_rational() {
            return Some(Self::from_rational(q.recip()));
        }
        let d = self.c.len();
        let mut m = Matrix::zeros(d, d);
        let mut basis = Self::from_i64(1).lift(self.n);
        for j in 0..d {
            let col = self.mul(&basis);
            for i in 0..d {
                m.set(i, j, col.c[i].clone());
            }
            basis = basis.mul(&Self::zeta_pow(self.n, 1));
        }
        let mut e0 = Matrix::zeros(d, 1);
        e0.set(0, 0, Rational::one());
        let x = solve_any(&m, &e0)?;
        Some(CycloNum { n: self.n, c: (0..d).map(|i| x.get(i, 0).clone()).collect() })
    }

    pub fn div(&self, o: &Self) -> Option<Self> {
        Some(self.mul(&o.inv()?))
    }

    pub fn pow(&self, e: i64) -> Option<Self> {
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut r = Self::one();
        let mut b = base;
        let mut k = e.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                r = r.mul(&b);
            }
            b = b.mul(&b);
            k >>= 1;
        }
        Some(r)
    }

    /// Image under ζ_N ↦ e^{2πij/N}.
    pub fn embed_with(&self, j: u32) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for (l, cl) in self.c.iter().enumerate() {
            if cl.is_zero() {
                continue;
            }
            let ang = 2.0 * PI * (j as f64) * (l as f64) / self.n as f64;
            s += Complex64::from_polar(rational_to_f64(cl), ang);
        }
        s
    }

    /// The standard embedding ζ_N ↦ e^{2πi/N}.
    pub fn embed(&self) -> Complex64 {
        self.embed_with(1)
    }

    /// Smallest k ≥ 1 with self^k = 1, searched up to `bound`.
    pub fn root_of_unity_order(&self, bound: u32) -> Option<u32> {
        let mut p = self.clone();
        for k in 1..=bound {
            if p.is_one() {
                return Some(k);
            }
            p = p.mul(self);
        }
        None
    }

    /// Real rational coordinates, rounded from a complex approximation in
    /// every embedding (used to recognise numerically found roots).
    pub fn recognize(n: u32, conjugates: &[(u32, Complex64)], max_den: i64) -> Option<Self> {
        let d = euler_phi(n);
        if conjugates.len() < d {
            return None;
        }
        // Solve Σ_l c_l e^{2πi j l / n} = v_j for real c (least squares over ℂ).
        let mut a = vec![vec![0.0f64; d]; 2 * conjugates.len()];
        let mut rhs = vec![0.0f64; 2 * conjugates.len()];
        for (r, (j, v)) in conjugates.iter().enumerate() {
            for l in 0..d {
                let ang = 2.0 * PI * (*j as f64) * (l as f64) / n as f64;
                a[2 * r][l] = ang.cos();
                a[2 * r + 1][l] = ang.sin();
            }
            rhs[2 * r] = v.re;
            rhs[2 * r + 1] = v.im;
        }
        let c = least_squares(&a, &rhs)?;
        let mut coeffs = Vec::with_capacity(d);
        for x in c {
            coeffs.push(best_rational(x, max_den)?);
        }
        Some(CycloNum { n, c: coeffs })
    }
}

fn least_squares(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = a[0].len();
    let mut m = vec![vec![0.0; n + 1]; n];
    for (row, &bi) in a.iter().zip(b) {
        for i in 0..n {
            for j in 0..n {
                m[i][j] += row[i] * row[j];
            }
            m[i][n] += row[i] * bi;
        }
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().partial_cmp(&m[y][col].abs()).unwrap())?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for k in col..=n {
                    m[r][k] -= f * m[col][k];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

/// Best rational approximation with denominator ≤ `max_den`, accepted only
/// if it is within 1e−7 (relative) of `x`.
pub fn best_rational(x: f64, max_den: i64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut y = x;
    for _ in 0..64 {
        let a = y.floor();
        if a.abs() > 1e15 {
            break;
        }
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > max_den as i128 {
            break;
        }
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        let approx = h1 as f64 / k1 as f64;
        if (approx - x).abs() <= 1e-9 * x.abs().max(1.0) {
            break;
        }
        let frac = y - a;
        if frac.abs() < 1e-15 {
            break;
        }
        y = 1.0 / frac;
    }
    if k1 == 0 {
        return None;
    }
    let approx = h1 as f64 / k1 as f64;
    if (approx - x).abs() > 1e-7 * x.abs().max(1.0) {
        return None;
    }
    Some(Rational::new(BigInt::from(h1), BigInt::from(k1)))
}

pub fn rational_to_f64(q: &Rational) -> f64 {
    match (q.numer().to_f64(), q.denom().to_f64()) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() => a / b,
        _ => {
            // scale down huge values before dividing
            let shift = q.numer().bits().max(q.denom().bits()).saturating_sub(900);
            let a = (q.numer() >> shift).to_f64().unwrap_or(0.0);
            let b = (q.denom() >> shift).to_f64().unwrap_or(1.0);
            a / b
        }
    }
}

impl PartialEq for CycloNum {
    fn eq(&self, o: &Self) -> bool {
        let (a, b) = Self::common(self, o);
        a.c == b.c
    }
}

impl Eq for CycloNum {}

impl fmt::Display for CycloNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (l, cl) in self.c.iter().enumerate() {
            if cl.is_zero() {
                continue;
            }
            let coef = format_rational(cl);
            let part = match l {
                0 => coef,
                _ => {
                    let z = if l == 1 { format!("zeta({})", self.n) } else { format!("zeta({})^{}", self.n, l) };
                    if cl.is_one() {
                        z
                    } else if (-cl).is_one() {
                        format!("-{z}")
                    } else {
                        format!("{coef}*{z}")
                    }
                }
            };
            parts.push(part);
        }
        if parts.is_empty() {
            return write!(f, "0");
        }
        let mut s = parts[0].clone();
        for p in &parts[1..] {
            if let Some(rest) = p.strip_prefix('-') {
                s.push_str(" - ");
                s.push_str(rest);
            } else {
                s.push_str(" + ");
                s.push_str(p);
            }
        }
        if parts.len() > 1 {
            write!(f, "({s})")
        } else {
            write!(f, "{s}")
        }
    }
}

/// Integers 1 ≤ j < N coprime to N (the Galois embeddings).
pub fn units_mod(n: u32) -> Vec<u32> {
    if n == 1 {
        return vec![1];
    }
    (1..n).filter(|j| j.gcd(&n) == 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::q;

    #[test]
    fn cyclotomic_polys() {
        assert_eq!(cyclotomic_poly(1), vec![-1, 1]);
        assert_eq!(cyclotomic_poly(4), vec![1, 0, 1]);
        assert_eq!(cyclotomic_poly(6), vec![1, -1, 1]);
        assert_eq!(cyclotomic_poly(12), vec![1, 0, -1, 0, 1]);
        assert_eq!(euler_phi(15), 8);
    }

    #[test]
    fn zeta_powers_and_orders() {
        let z = CycloNum::zeta_pow(3, 1);
        assert!(z.pow(3).unwrap().is_one());
        assert_eq!(z.root_of_unity_order(10), Some(3));
        // 1 + ζ₃ + ζ₃² = 0
        assert!(CycloNum::one().add(&z).add(&z.mul(&z)).is_zero());
    }

    #[test]
    fn mixed_conductors() {
        let a = CycloNum::zeta_pow(3, 1);
        let b = CycloNum::zeta_pow(4, 1);
        let ab = a.mul(&b);
        assert_eq!(ab.conductor(), 12);
        assert_eq!(ab, CycloNum::zeta_pow(12, 7));
        assert_eq!(CycloNum::zeta_pow(4, 2), CycloNum::from_i64(-1));
    }

    #[test]
    fn inverse_roundtrip() {
        let a = CycloNum::from_coeffs(5, vec![q(1, 2), q(3, 1), q(0, 1), q(-2, 3)]);
        let b = a.inv().unwrap();
        assert!(a.mul(&b).is_one());
    }

    #[test]
    fn embedding() {
        let z = CycloNum::zeta_pow(4, 1);
        assert!((z.embed() - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        let w = CycloNum::one().sub(&CycloNum::zeta_pow(3, 1));
        assert!((w.embed() - Complex64::new(1.5, -(3f64).sqrt() / 2.0)).norm() < 1e-15);
    }

    #[test]
    fn recognize_roundtrip() {
        let a = CycloNum::from_coeffs(12, vec![q(1, 3), q(-2, 1), q(0, 1), q(5, 7)]);
        let conj: Vec<(u32, Complex64)> = units_mod(12).into_iter().map(|j| (j, a.embed_with(j))).collect();
        assert_eq!(CycloNum::recognize(12, &conj, 1000), Some(a));
    }
}
