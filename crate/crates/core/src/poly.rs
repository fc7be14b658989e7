//! Polynomials and factored rational functions over cyclotomic fields.
//!
//! Rational functions are kept as `c · ∏ P_i^{e_i}` with monic, pairwise
//! distinct, non-constant factors. Univariate factors are split into linear
//! ones whenever their roots lie in the coefficient field, so zero and pole
//! loci can be read off factor by factor.

use crate::cyclo::{units_mod, CycloNum};
use num_complex::Complex64;
use num_integer::Integer;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("0·∞ on restriction: the locus lies on both a zero and a pole")]
    Indeterminate,
    #[error("division by the zero function")]
    DivisionByZero,
}

pub type Exponent = Vec<u32>;

/// Sparse polynomial in `nvars` variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Exponent, CycloNum>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: CycloNum) -> Self {
        let mut p = Self::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, CycloNum::one())
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.terms.insert(e, CycloNum::one());
        p
    }

    pub fn monomial(exp: Exponent, c: CycloNum) -> Self {
        let mut p = Self::zero(exp.len());
        if !c.is_zero() {
            p.terms.insert(exp, c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &BTreeMap<Exponent, CycloNum> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<CycloNum> {
        if self.terms.is_empty() {
            return Some(CycloNum::zero());
        }
        if self.terms.len() == 1 {
            let (e, c) = self.terms.iter().next().unwrap();
            if e.iter().all(|&x| x == 0) {
                return Some(c.clone());
            }
        }
        None
    }

    fn add_term(&mut self, e: Exponent, c: CycloNum) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&e) {
            Some(v) => {
                *v = v.add(&c);
                if v.is_zero() {
                    self.terms.remove(&e);
                }
            }
            None => {
                self.terms.insert(e, c);
            }
        }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        assert_eq!(self.nvars, o.nvars);
        let mut r = self.clone();
        for (e, c) in &o.terms {
            r.add_term(e.clone(), c.clone());
        }
        r
    }

    pub fn neg(&self) -> Poly {
        Poly { nvars: self.nvars, terms: self.terms.iter().map(|(e, c)| (e.clone(), c.neg())).collect() }
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.neg())
    }

    pub fn scale(&self, c: &CycloNum) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.nvars);
        }
        Poly { nvars: self.nvars, terms: self.terms.iter().map(|(e, x)| (e.clone(), x.mul(c))).collect() }
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        assert_eq!(self.nvars, o.nvars);
        let mut r = Poly::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e: Exponent = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                r.add_term(e, c1.mul(c2));
            }
        }
        r
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut r = Poly::one(self.nvars);
        for _ in 0..k {
            r = r.mul(self);
        }
        r
    }

    pub fn degree_in(&self, v: usize) -> u32 {
        self.terms.keys().map(|e| e[v]).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn uses_var(&self, v: usize) -> bool {
        self.terms.keys().any(|e| e[v] > 0)
    }

    pub fn used_vars(&self) -> Vec<usize> {
        (0..self.nvars).filter(|&v| self.uses_var(v)).collect()
    }

    /// Coefficients of v^0, v^1, … (each free of v).
    pub fn coeffs_in(&self, v: usize) -> Vec<Poly> {
        let d = self.degree_in(v) as usize;
        let mut out = vec![Poly::zero(self.nvars); d + 1];
        for (e, c) in &self.terms {
            let mut e2 = e.clone();
            let k = e2[v] as usize;
            e2[v] = 0;
            out[k].add_term(e2, c.clone());
        }
        out
    }

    pub fn leading_coeff_in(&self, v: usize) -> Poly {
        self.coeffs_in(v).pop().unwrap_or_else(|| Poly::zero(self.nvars))
    }

    pub fn derivative(&self, v: usize) -> Poly {
        let mut r = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[v] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[v] -= 1;
            r.add_term(e2, c.scale(&crate::linalg::qi(e[v] as i64)));
        }
        r
    }

    pub fn eval(&self, pt: &[CycloNum]) -> CycloNum {
        let mut s = CycloNum::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    t = t.mul(&pt[i].pow(k as i64).unwrap());
                }
            }
            s = s.add(&t);
        }
        s
    }

    pub fn eval_complex(&self, pt: &[Complex64]) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for (e, c) in &self.terms {
            let mut t = c.embed();
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    t *= pt[i].powi(k as i32);
                }
            }
            s += t;
        }
        s
    }

    /// P(…, num/den, …)·den^{deg_v P}.
    pub fn substitute_homogenized(&self, v: usize, num: &Poly, den: &Poly) -> Poly {
        let cs = self.coeffs_in(v);
        let d = cs.len() - 1;
        let mut r = Poly::zero(self.nvars);
        for (k, ck) in cs.iter().enumerate() {
            if ck.is_zero() {
                continue;
            }
            r = r.add(&ck.mul(&num.pow(k as u32)).mul(&den.pow((d - k) as u32)));
        }
        r
    }

    /// Lex-leading coefficient.
    pub fn leading_coeff(&self) -> CycloNum {
        self.terms.iter().next_back().map(|(_, c)| c.clone()).unwrap_or_else(CycloNum::zero)
    }

    /// Splits off the lex-leading coefficient: `self = lc · monic`.
    pub fn monic(&self) -> (CycloNum, Poly) {
        let lc = self.leading_coeff();
        if lc.is_zero() {
            return (lc, self.clone());
        }
        let inv = lc.inv().unwrap();
        (lc, self.scale(&inv))
    }

    /// Exact quotient if `d` divides `self`.
    pub fn exact_div(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        let (dlead_e, dlead_c) = d.terms.iter().next_back().map(|(e, c)| (e.clone(), c.clone())).unwrap();
        let dinv = dlead_c.inv().unwrap();
        let mut r = self.clone();
        let mut q = Poly::zero(self.nvars);
        while let Some((e, c)) = r.terms.iter().next_back().map(|(e, c)| (e.clone(), c.clone())) {
            if e.iter().zip(&dlead_e).any(|(a, b)| a < b) {
                return None;
            }
            let qe: Exponent = e.iter().zip(&dlead_e).map(|(a, b)| a - b).collect();
            let qc = c.mul(&dinv);
            let t = Poly::monomial(qe, qc);
            q = q.add(&t);
            r = r.sub(&t.mul(d));
        }
        Some(q)
    }

    /// Monomial content: the largest monomial dividing every term.
    pub fn monomial_content(&self) -> Exponent {
        let mut m: Option<Exponent> = None;
        for e in self.terms.keys() {
            m = Some(match m {
                None => e.clone(),
                Some(m) => m.iter().zip(e).map(|(a, b)| *a.min(b)).collect(),
            });
        }
        m.unwrap_or_else(|| vec![0; self.nvars])
    }

    /// Univariate coefficient list (constant first) if only `v` occurs.
    pub fn as_univariate(&self, v: usize) -> Option<Vec<CycloNum>> {
        if self.terms.keys().any(|e| e.iter().enumerate().any(|(i, &k)| i != v && k > 0)) {
            return None;
        }
        let d = self.degree_in(v) as usize;
        let mut out = vec![CycloNum::zero(); d + 1];
        for (e, c) in &self.terms {
            out[e[v] as usize] = c.clone();
        }
        Some(out)
    }

    pub fn from_univariate(nvars: usize, v: usize, cs: &[CycloNum]) -> Poly {
        let mut p = Poly::zero(nvars);
        for (k, c) in cs.iter().enumerate() {
            let mut e = vec![0; nvars];
            e[v] = k as u32;
            p.add_term(e, c.clone());
        }
        p
    }

    /// Appends `k` unused variables.
    pub fn extend_vars(&self, k: usize) -> Poly {
        let mut p = Poly::zero(self.nvars + k);
        for (e, c) in &self.terms {
            let mut e2 = e.clone();
            e2.extend(std::iter::repeat_n(0, k));
            p.terms.insert(e2, c.clone());
        }
        p
    }

    /// Renames variables: old variable i becomes `map[i]` in `nvars` variables.
    pub fn remap_vars(&self, nvars: usize, map: &[usize]) -> Poly {
        let mut p = Poly::zero(nvars);
        for (e, c) in &self.terms {
            let mut e2 = vec![0; nvars];
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    e2[map[i]] += k;
                }
            }
            p.add_term(e2, c.clone());
        }
        p
    }

    pub fn conductor(&self) -> u32 {
        self.terms.values().fold(1u32, |l, c| (l as u64).lcm(&(c.conductor() as u64)) as u32)
    }

    pub fn fmt_with(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for (e, c) in self.terms.iter().rev() {
            let mono: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| if k == 1 { names[i].clone() } else { format!("{}^{}", names[i], k) })
                .collect();
            let cs = c.to_string();
            let s = if mono.is_empty() {
                cs
            } else if c.is_one() {
                mono.join("*")
            } else if c.neg().is_one() {
                format!("-{}", mono.join("*"))
            } else {
                format!("{}*{}", cs, mono.join("*"))
            };
            parts.push(s);
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
        s
    }
}

// ---------- univariate helpers over the cyclotomic field ----------

fn uv_trim(mut p: Vec<CycloNum>) -> Vec<CycloNum> {
    while p.len() > 1 && p.last().unwrap().is_zero() {
        p.pop();
    }
    p
}

fn uv_deg(p: &[CycloNum]) -> usize {
    uv_trim(p.to_vec()).len() - 1
}

fn uv_divrem(a: &[CycloNum], b: &[CycloNum]) -> (Vec<CycloNum>, Vec<CycloNum>) {
    let b = uv_trim(b.to_vec());
    let mut r = uv_trim(a.to_vec());
    let db = b.len() - 1;
    let binv = b[db].inv().expect("division by zero polynomial");
    if r.len() < b.len() || (r.len() == 1 && r[0].is_zero()) {
        return (vec![CycloNum::zero()], r);
    }
    let mut q = vec![CycloNum::zero(); r.len() - db];
    for i in (0..q.len()).rev() {
        let c = r[i + db].mul(&binv);
        if c.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            r[i + j] = r[i + j].sub(&c.mul(bj));
        }
        q[i] = c;
    }
    (uv_trim(q), uv_trim(r))
}

fn uv_is_zero(p: &[CycloNum]) -> bool {
    p.iter().all(|c| c.is_zero())
}

fn uv_gcd(a: &[CycloNum], b: &[CycloNum]) -> Vec<CycloNum> {
    let mut a = uv_trim(a.to_vec());
    let mut b = uv_trim(b.to_vec());
    while !uv_is_zero(&b) {
        let (_, r) = uv_divrem(&a, &b);
        a = b;
        b = r;
    }
    let lc = a.last().unwrap().inv().unwrap();
    a.iter().map(|c| c.mul(&lc)).collect()
}

fn uv_derivative(p: &[CycloNum]) -> Vec<CycloNum> {
    if p.len() <= 1 {
        return vec![CycloNum::zero()];
    }
    p.iter().enumerate().skip(1).map(|(k, c)| c.scale(&crate::linalg::qi(k as i64))).collect()
}

pub fn uv_eval(p: &[CycloNum], x: &CycloNum) -> CycloNum {
    let mut s = CycloNum::zero();
    for c in p.iter().rev() {
        s = s.mul(x).add(c);
    }
    s
}

/// Complex roots by Durand–Kerner iteration with Newton polishing.
pub fn complex_roots(p: &[Complex64]) -> Vec<Complex64> {
    let mut p: Vec<Complex64> = p.to_vec();
    while p.len() > 1 && p.last().unwrap().norm() == 0.0 {
        p.pop();
    }
    let d = p.len() - 1;
    if d == 0 {
        return vec![];
    }
    let lc = p[d];
    let a: Vec<Complex64> = p.iter().map(|c| c / lc).collect();
    let radius = 1.0 + a[..d].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..d).map(|k| Complex64::from_polar(radius * 0.9, 0.4 + 2.0 * std::f64::consts::PI * k as f64 / d as f64)).collect();
    let eval = |x: Complex64| a.iter().rev().fold(Complex64::new(0.0, 0.0), |s, c| s * x + c);
    for _ in 0..2000 {
        let mut delta = 0.0f64;
        for i in 0..d {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..d {
                if j != i {
                    den *= z[i] - z[j];
                }
            }
            let step = eval(z[i]) / den;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    let deriv: Vec<Complex64> = (1..=d).map(|k| a[k] * k as f64).collect();
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let f = eval(*zi);
            let fp = deriv.iter().rev().fold(Complex64::new(0.0, 0.0), |s, c| s * *zi + c);
            if fp.norm() > 0.0 {
                *zi -= f / fp;
            }
        }
    }
    z
}

const MAX_COMBOS: usize = 50_000;

/// Roots in the coefficient field (with multiplicity) of a univariate
/// polynomial; also returns the cofactor carrying the roots not found there.
pub fn roots_in_field(p: &[CycloNum]) -> (Vec<(CycloNum, u32)>, Vec<CycloNum>) {
    let mut rest = uv_trim(p.to_vec());
    let mut found: Vec<(CycloNum, u32)> = Vec::new();
    if uv_deg(&rest) == 0 {
        return (found, rest);
    }
    let sqf = {
        let g = uv_gcd(&rest, &uv_derivative(&rest));
        uv_divrem(&rest, &g).0
    };
    let candidates: Vec<CycloNum> = if uv_deg(&sqf) == 1 {
        vec![sqf[0].neg().mul(&sqf[1].inv().unwrap())]
    } else {
        numeric_candidates(&sqf)
    };
    for r in candidates {
        let lin = vec![r.neg(), CycloNum::one()];
        let mut m = 0;
        loop {
            let (q, rem) = uv_divrem(&rest, &lin);
            if !uv_is_zero(&rem) || uv_deg(&rest) == 0 {
                break;
            }
            rest = q;
            m += 1;
        }
        if m > 0 {
            found.push((r, m));
        }
    }
    (found, rest)
}

fn numeric_candidates(p: &[CycloNum]) -> Vec<CycloNum> {
    let l = p.iter().fold(1u32, |l, c| (l as u64).lcm(&(c.conductor() as u64)) as u32);
    let units = units_mod(l);
    // one representative per complex-conjugate pair of embeddings
    let half: Vec<u32> = units.iter().copied().filter(|&j| l <= 2 || j < l - j).collect();
    let roots: Vec<Vec<Complex64>> = half.iter().map(|&j| complex_roots(&p.iter().map(|c| c.embed_with(j)).collect::<Vec<_>>())).collect();
    let d = roots[0].len();
    let combos = d.checked_pow(half.len() as u32 - 1).unwrap_or(usize::MAX);
    if combos > MAX_COMBOS {
        return vec![];
    }
    let mut out: Vec<CycloNum> = Vec::new();
    for r0 in &roots[0] {
        for mut idx in 0..combos {
            let mut conj = vec![(half[0], *r0)];
            if l > 2 {
                conj.push((l - half[0], r0.conj()));
            }
            for (k, &j) in half.iter().enumerate().skip(1) {
                let r = roots[k][idx % d];
                idx /= d;
                conj.push((j, r));
                conj.push((l - j, r.conj()));
            }
            if let Some(c) = CycloNum::recognize(l, &conj, 1_000_000) {
                if uv_eval(p, &c).is_zero() && !out.contains(&c) {
                    out.push(c);
                    break;
                }
            }
        }
    }
    out
}

// ---------- factored rational functions ----------

/// `coef · ∏ factor^exp`; the zero function has `coef = 0` and no factors.
#[derive(Clone, Debug)]
pub struct RatFn {
    nvars: usize,
    coef: CycloNum,
    factors: Vec<(Poly, i32)>,
}

/// Value of a rational function on a locus: a function or identically ∞.
#[derive(Clone, Debug)]
pub enum Restricted {
    Fn(RatFn),
    Infinity,
}

impl RatFn {
    pub fn constant(nvars: usize, c: CycloNum) -> Self {
        RatFn { nvars, coef: c, factors: vec![] }
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, CycloNum::one())
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        RatFn { nvars, coef: CycloNum::one(), factors: vec![(Poly::var(nvars, i), 1)] }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn coef(&self) -> &CycloNum {
        &self.coef
    }

    pub fn factors(&self) -> &[(Poly, i32)] {
        &self.factors
    }

    pub fn is_zero(&self) -> bool {
        self.coef.is_zero()
    }

    pub fn as_constant(&self) -> Option<CycloNum> {
        if self.factors.is_empty() {
            Some(self.coef.clone())
        } else {
            None
        }
    }

    fn push_factor(&mut self, p: Poly, e: i32) {
        if e == 0 {
            return;
        }
        if let Some(c) = p.as_constant() {
            self.coef = self.coef.mul(&c.pow(e as i64).expect("zero factor with negative exponent"));
            return;
        }
        let (lc, m) = p.monic();
        self.coef = self.coef.mul(&lc.pow(e as i64).unwrap());
        if let Some(pos) = self.factors.iter().position(|(f, _)| *f == m) {
            self.factors[pos].1 += e;
            if self.factors[pos].1 == 0 {
                self.factors.remove(pos);
            }
        } else {
            self.factors.push((m, e));
        }
    }

    /// Factors a polynomial as far as supported: monomial content, linear
    /// factors of univariate parts, univariate content in one variable.
    pub fn from_poly(p: &Poly) -> Self {
        let nv = p.nvars();
        let mut r = RatFn::one(nv);
        if p.is_zero() {
            return RatFn::constant(nv, CycloNum::zero());
        }
        let mc = p.monomial_content();
        let mut rest = p.clone();
        if mc.iter().any(|&k| k > 0) {
            rest = rest.exact_div(&Poly::monomial(mc.clone(), CycloNum::one())).unwrap();
            for (v, &k) in mc.iter().enumerate() {
                if k > 0 {
                    r.push_factor(Poly::var(nv, v), k as i32);
                }
            }
        }
        for f in split_poly(&rest) {
            r.push_factor(f, 1);
        }
        r.sort();
        r
    }

    fn sort(&mut self) {
        self.factors.sort_by(|a, b| {
            let ka: Vec<(&Exponent, String)> = a.0.terms().iter().map(|(e, c)| (e, c.to_string())).collect();
            let kb: Vec<(&Exponent, String)> = b.0.terms().iter().map(|(e, c)| (e, c.to_string())).collect();
            ka.cmp(&kb).then(a.1.cmp(&b.1))
        });
    }

    pub fn mul(&self, o: &RatFn) -> RatFn {
        let mut r = self.clone();
        r.coef = r.coef.mul(&o.coef);
        if r.coef.is_zero() {
            return RatFn::constant(self.nvars, CycloNum::zero());
        }
        for (f, e) in &o.factors {
            r.push_factor(f.clone(), *e);
        }
        r.sort();
        r
    }

    pub fn inv(&self) -> Result<RatFn, PolyError> {
        let c = self.coef.inv().ok_or(PolyError::DivisionByZero)?;
        Ok(RatFn { nvars: self.nvars, coef: c, factors: self.factors.iter().map(|(f, e)| (f.clone(), -e)).collect() })
    }

    pub fn div(&self, o: &RatFn) -> Result<RatFn, PolyError> {
        Ok(self.mul(&o.inv()?))
    }

    pub fn pow(&self, k: i32) -> Result<RatFn, PolyError> {
        if k < 0 {
            return self.inv()?.pow(-k);
        }
        let mut r = RatFn::one(self.nvars);
        for _ in 0..k {
            r = r.mul(self);
        }
        Ok(r)
    }

    pub fn neg(&self) -> RatFn {
        let mut r = self.clone();
        r.coef = r.coef.neg();
        r
    }

    /// Expanded numerator (including the coefficient) and denominator.
    pub fn num_den(&self) -> (Poly, Poly) {
        let mut n = Poly::constant(self.nvars, self.coef.clone());
        let mut d = Poly::one(self.nvars);
        for (f, e) in &self.factors {
            if *e > 0 {
                n = n.mul(&f.pow(*e as u32));
            } else {
                d = d.mul(&f.pow((-e) as u32));
            }
        }
        (n, d)
    }

    pub fn add(&self, o: &RatFn) -> RatFn {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        // common denominator: maximal pole orders
        let mut den: Vec<(Poly, i32)> = Vec::new();
        for (f, e) in self.factors.iter().chain(&o.factors) {
            if *e < 0 {
                match den.iter_mut().find(|(g, _)| g == f) {
                    Some(entry) => entry.1 = entry.1.max(-e),
                    None => den.push((f.clone(), -e)),
                }
            }
        }
        let lift = |x: &RatFn| -> Poly {
            let mut n = Poly::constant(x.nvars, x.coef.clone());
            for (f, e) in &x.factors {
                if *e > 0 {
                    n = n.mul(&f.pow(*e as u32));
                }
            }
            for (g, k) in &den {
                let have = x.factors.iter().find(|(f, _)| f == g).map(|(_, e)| -e).unwrap_or(0).max(0);
                n = n.mul(&g.pow((*k - have) as u32));
            }
            n
        };
        let mut num = lift(self).add(&lift(o));
        if num.is_zero() {
            return RatFn::constant(self.nvars, CycloNum::zero());
        }
        let mut out = RatFn::one(self.nvars);
        for (g, k) in den {
            let mut k = k;
            while k > 0 {
                match num.exact_div(&g) {
                    Some(q) => {
                        num = q;
                        k -= 1;
                    }
                    None => break,
                }
            }
            out.push_factor(g, -k);
        }
        out.mul(&RatFn::from_poly(&num))
    }

    pub fn sub(&self, o: &RatFn) -> RatFn {
        self.add(&o.neg())
    }

    /// Exact equality of functions.
    pub fn equals(&self, o: &RatFn) -> bool {
        let (n1, d1) = self.num_den();
        let (n2, d2) = o.num_den();
        n1.mul(&d2) == n2.mul(&d1)
    }

    pub fn is_one(&self) -> bool {
        self.equals(&RatFn::one(self.nvars))
    }

    pub fn uses_var(&self, v: usize) -> bool {
        self.factors.iter().any(|(f, _)| f.uses_var(v))
    }

    /// Order of vanishing along {v = ∞} (negative for poles).
    pub fn order_at_infinity(&self, v: usize) -> i32 {
        -self.factors.iter().map(|(f, e)| e * f.degree_in(v) as i32).sum::<i32>()
    }

    /// Restriction to {v = r} with r free of v.
    pub fn substitute(&self, v: usize, r: &RatFn) -> Result<Restricted, PolyError> {
        let (rn, rd) = r.num_den();
        let mut out = RatFn::constant(self.nvars, self.coef.clone());
        let mut zero = false;
        let mut inf = false;
        for (f, e) in &self.factors {
            if !f.uses_var(v) {
                out.push_factor(f.clone(), *e);
                continue;
            }
            let d = f.degree_in(v) as i32;
            let fh = f.substitute_homogenized(v, &rn, &rd);
            if fh.is_zero() {
                if *e > 0 {
                    zero = true;
                } else {
                    inf = true;
                }
                continue;
            }
            out = out.mul(&RatFn::from_poly(&fh).pow(*e)?);
            if d > 0 && !rd.as_constant().is_some_and(|c| c.is_one()) {
                out = out.mul(&RatFn::from_poly(&rd).pow(-e * d)?);
            }
        }
        match (zero, inf) {
            (true, true) => Err(PolyError::Indeterminate),
            (true, false) => Ok(Restricted::Fn(RatFn::constant(self.nvars, CycloNum::zero()))),
            (false, true) => Ok(Restricted::Infinity),
            _ => {
                out.sort();
                Ok(Restricted::Fn(out))
            }
        }
    }

    /// Restriction to {v = ∞}.
    pub fn substitute_infinity(&self, v: usize) -> Restricted {
        let ord = self.order_at_infinity(v);
        if ord > 0 {
            return Restricted::Fn(RatFn::constant(self.nvars, CycloNum::zero()));
        }
        if ord < 0 {
            return Restricted::Infinity;
        }
        let mut out = RatFn::constant(self.nvars, self.coef.clone());
        for (f, e) in &self.factors {
            let g = if f.uses_var(v) { f.leading_coeff_in(v) } else { f.clone() };
            out = out.mul(&RatFn::from_poly(&g).pow(*e).unwrap());
        }
        Restricted::Fn(out)
    }

    /// Value at a point; `None` means ∞, `Err` an indeterminate 0/0.
    pub fn eval(&self, pt: &[CycloNum]) -> Result<Option<CycloNum>, PolyError> {
        let mut zeros = 0;
        let mut poles = 0;
        let mut v = self.coef.clone();
        for (f, e) in &self.factors {
            let x = f.eval(pt);
            if x.is_zero() {
                if *e > 0 {
                    zeros += 1;
                } else {
                    poles += 1;
                }
                continue;
            }
            v = v.mul(&x.pow(*e as i64).unwrap());
        }
        match (zeros > 0, poles > 0) {
            (true, true) => Err(PolyError::Indeterminate),
            (true, false) => Ok(Some(CycloNum::zero())),
            (false, true) => Ok(None),
            _ => Ok(Some(v)),
        }
    }

    pub fn eval_complex(&self, pt: &[Complex64]) -> Complex64 {
        let mut v = self.coef.embed();
        for (f, e) in &self.factors {
            v *= f.eval_complex(pt).powi(*e);
        }
        v
    }

    /// ∂_v log f evaluated at a point where no factor vanishes.
    pub fn dlog_at(&self, v: usize, pt: &[CycloNum]) -> CycloNum {
        let mut s = CycloNum::zero();
        for (f, e) in &self.factors {
            let d = f.derivative(v);
            if d.is_zero() {
                continue;
            }
            let q = d.eval(pt).div(&f.eval(pt)).expect("factor vanishes at sample point");
            s = s.add(&q.scale(&crate::linalg::qi(*e as i64)));
        }
        s
    }

    /// ∂_v log f as a complex number.
    pub fn dlog_complex(&self, v: usize, pt: &[Complex64]) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for (f, e) in &self.factors {
            let d = f.derivative(v);
            if d.is_zero() {
                continue;
            }
            s += d.eval_complex(pt) / f.eval_complex(pt) * *e as f64;
        }
        s
    }

    pub fn extend_vars(&self, k: usize) -> RatFn {
        RatFn { nvars: self.nvars + k, coef: self.coef.clone(), factors: self.factors.iter().map(|(f, e)| (f.extend_vars(k), *e)).collect() }
    }

    pub fn remap_vars(&self, nvars: usize, map: &[usize]) -> RatFn {
        let mut r = RatFn::constant(nvars, self.coef.clone());
        for (f, e) in &self.factors {
            r.push_factor(f.remap_vars(nvars, map), *e);
        }
        r.sort();
        r
    }

    /// Sum of |exponent|·total degree over factors: a crude degree bound.
    pub fn degree_bound(&self) -> u32 {
        self.factors.iter().map(|(f, e)| e.unsigned_abs() * f.total_degree()).sum()
    }

    pub fn fmt_with(&self, names: &[String]) -> String {
        if self.factors.is_empty() {
            return self.coef.to_string();
        }
        let mut num = Vec::new();
        let mut den = Vec::new();
        for (f, e) in &self.factors {
            let s = f.fmt_with(names);
            let s = if f.terms().len() > 1 { format!("({s})") } else { s };
            let s = if e.abs() > 1 { format!("{s}^{}", e.abs()) } else { s };
            if *e > 0 {
                num.push(s)
            } else {
                den.push(s)
            }
        }
        let mut n = if num.is_empty() { "1".to_string() } else { num.join("*") };
        if !self.coef.is_one() {
            if self.coef.neg().is_one() {
                n = format!("-{n}");
            } else {
                n = format!("{}*{n}", self.coef);
            }
        }
        if den.is_empty() {
            n
        } else if den.len() == 1 {
            format!("{n}/{}", den[0])
        } else {
            format!("{n}/({})", den.join("*"))
        }
    }
}

/// Splits a polynomial without monomial content into factors: linear
/// factors of a univariate polynomial, or the univariate content with
/// respect to one variable of a multivariate one.
fn split_poly(p: &Poly) -> Vec<Poly> {
    let nv = p.nvars();
    if p.as_constant().is_some() {
        return vec![p.clone()];
    }
    let used = p.used_vars();
    if used.len() == 1 {
        let v = used[0];
        let cs = p.as_univariate(v).unwrap();
        let (roots, rest) = roots_in_field(&cs);
        let mut out = Vec::new();
        let lc = cs.last().unwrap().clone();
        out.push(Poly::constant(nv, lc.clone()));
        for (r, m) in roots {
            for _ in 0..m {
                out.push(Poly::from_univariate(nv, v, &[r.neg(), CycloNum::one()]));
            }
        }
        if uv_deg(&rest) > 0 {
            let inv = rest.last().unwrap().inv().unwrap();
            let rest: Vec<CycloNum> = rest.iter().map(|c| c.mul(&inv)).collect();
            out.push(Poly::from_univariate(nv, v, &rest));
        }
        return out;
    }
    // univariate content: coefficients in v all univariate in a single w
    for &v in &used {
        let cs = p.coeffs_in(v);
        let mut w_opt: Option<usize> = None;
        let mut ok = true;
        for c in cs.iter().filter(|c| !c.is_zero()) {
            let u = c.used_vars();
            match u.len() {
                0 => {}
                1 => {
                    if w_opt.is_some_and(|w| w != u[0]) {
                        ok = false;
                    }
                    w_opt = Some(u[0]);
                }
                _ => ok = false,
            }
        }
        if !ok {
            continue;
        }
        let Some(w) = w_opt else { continue };
        let mut g: Option<Vec<CycloNum>> = None;
        for c in cs.iter().filter(|c| !c.is_zero()) {
            let cu = c.as_univariate(w).unwrap();
            g = Some(match g {
                None => cu,
                Some(g) => uv_gcd(&g, &cu),
            });
        }
        let g = g.unwrap();
        if uv_deg(&g) > 0 {
            let gp = Poly::from_univariate(nv, w, &g);
            let q = p.exact_div(&gp).expect("content divides");
            let mut out = split_poly(&gp);
            out.extend(split_poly(&q));
            return out;
        }
    }
    vec![p.clone()]
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (0..self.nvars).map(|i| format!("v{i}")).collect();
        write!(f, "{}", self.fmt_with(&names))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::q;

    fn c(n: i64) -> CycloNum {
        CycloNum::from_i64(n)
    }

    #[test]
    fn roots_of_rational_cubic() {
        // (t − 1)(t + 2)(2t − 1)
        let p = vec![c(2), c(-5), c(1), c(2)];
        let (roots, rest) = roots_in_field(&p);
        assert_eq!(roots.len(), 3);
        assert_eq!(uv_deg(&rest), 0);
        assert!(roots.iter().any(|(r, _)| *r == CycloNum::from_rational(q(1, 2))));
    }

    #[test]
    fn roots_with_multiplicity_and_irreducible_rest() {
        // (t − 3)² (t² − 2)
        let p = vec![c(-18), c(12), c(7), c(-6), c(1)];
        let (roots, rest) = roots_in_field(&p);
        assert_eq!(roots, vec![(c(3), 2)]);
        assert_eq!(uv_deg(&rest), 2);
    }

    #[test]
    fn cyclotomic_roots() {
        // t² + t + 1 has roots ζ₃, ζ₃²
        let p = vec![c(1), c(1), c(1)];
        let (roots, _) = roots_in_field(&p);
        assert!(roots.is_empty(), "roots of t²+t+1 are not rational");
        let z = CycloNum::zeta_pow(3, 1);
        let p = vec![z.clone(), c(1).add(&z).neg(), c(1)]; // (t − 1)(t − ζ₃)
        let (roots, _) = roots_in_field(&p);
        assert_eq!(roots.len(), 2);
        assert!(roots.iter().any(|(r, _)| *r == z));
    }

    #[test]
    fn ratfn_arithmetic() {
        let t = RatFn::var(1, 0);
        let one = RatFn::one(1);
        let f = one.sub(&t.inv().unwrap()); // 1 − 1/t = (t − 1)/t
        assert_eq!(f.factors().len(), 2);
        let g = t.sub(&one).div(&t).unwrap();
        assert!(f.equals(&g));
        assert!(f.sub(&g).is_zero());
    }

    #[test]
    fn substitution_and_infinity() {
        // f(t, u) = 1 − 1/(t u), restricted to u = 1/t is 0, to u = ∞ is 1.
        let t = RatFn::var(2, 0);
        let u = RatFn::var(2, 1);
        let f = RatFn::one(2).sub(&t.mul(&u).inv().unwrap());
        match f.substitute(1, &t.inv().unwrap()).unwrap() {
            Restricted::Fn(g) => assert!(g.is_zero()),
            _ => panic!(),
        }
        match f.substitute_infinity(1) {
            Restricted::Fn(g) => assert!(g.is_one()),
            _ => panic!(),
        }
        assert_eq!(u.inv().unwrap().order_at_infinity(1), 1);
    }

    #[test]
    fn content_split() {
        // t·u − t − 2u + 2 = (t − 2)(u − 1)
        let t = Poly::var(2, 0);
        let u = Poly::var(2, 1);
        let one = Poly::one(2);
        let two = Poly::constant(2, c(2));
        let p = t.mul(&u).sub(&t).sub(&two.mul(&u)).add(&two);
        let f = RatFn::from_poly(&p);
        assert_eq!(f.factors().len(), 2);
        let _ = one;
    }
}
