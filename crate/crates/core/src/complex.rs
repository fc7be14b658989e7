//! Cochain complexes over ℚ and the constructions built on them: cones,
//! truncations, double complexes, filtrations, décalage, spectral pages
//! and long exact sequences.
//!
//! Differentials have degree +1. A filtration is decreasing, `F^p ⊇ F^{p+1}`.

use crate::linalg::*;
use num_traits::One;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComplexError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("d∘d ≠ 0 at degree {0}")]
    NotAComplex(i32),
    #[error("map does not commute with differentials at degree {0}")]
    NonChainMap(i32),
    #[error("square at bidegree ({0},{1}) does not commute")]
    SquaresDoNotCommute(i32, i32),
    #[error("filtration invalid: {0}")]
    NotAFiltration(String),
    #[error("morphism does not preserve filtration at degree {0}, level {1}")]
    NotFiltered(i32, i32),
    #[error("sequence is not short exact at degree {0}")]
    NotExactSES(i32),
}

pub type Result<T> = std::result::Result<T, ComplexError>;

/// A bounded cochain complex on degrees `lo..=hi`.
#[derive(Clone, Debug, PartialEq)]
pub struct CochainComplex {
    lo: i32,
    dims: Vec<usize>,
    d: Vec<Matrix>,
}

impl CochainComplex {
    /// `d[i]` is the differential out of degree `lo + i`; the last one must map to 0.
    pub fn new(lo: i32, dims: Vec<usize>, d: Vec<Matrix>) -> Result<Self> {
        if dims.len() != d.len() {
            return Err(ComplexError::DimensionMismatch("one differential per degree".into()));
        }
        for (i, m) in d.iter().enumerate() {
            let next = dims.get(i + 1).copied().unwrap_or(0);
            if m.cols() != dims[i] || m.rows() != next {
                return Err(ComplexError::DimensionMismatch(format!(
                    "d^{} is {}x{}, expected {}x{}",
                    lo + i as i32,
                    m.rows(),
                    m.cols(),
                    next,
                    dims[i]
                )));
            }
        }
        let c = CochainComplex { lo, dims, d };
        for k in c.lo..c.hi() {
            if !c.d(k + 1).mul(&c.d(k)).is_zero() {
                return Err(ComplexError::NotAComplex(k));
            }
        }
        Ok(c)
    }

    /// Build from the differentials between consecutive degrees, top differential implied.
    pub fn from_maps(lo: i32, dims: Vec<usize>, inner: Vec<Matrix>) -> Result<Self> {
        let mut d = inner;
        if dims.is_empty() {
            return Self::new(lo, dims, d);
        }
        d.push(Matrix::zeros(0, *dims.last().unwrap()));
        Self::new(lo, dims, d)
    }

    pub fn zero(lo: i32) -> Self {
        CochainComplex { lo, dims: vec![0], d: vec![Matrix::zeros(0, 0)] }
    }

    /// A single space in degree `k`.
    pub fn concentrated(k: i32, dim: usize) -> Self {
        CochainComplex { lo: k, dims: vec![dim], d: vec![Matrix::zeros(0, dim)] }
    }

    pub fn lo(&self) -> i32 {
        self.lo
    }
    pub fn hi(&self) -> i32 {
        self.lo + self.dims.len() as i32 - 1
    }
    pub fn dim(&self, k: i32) -> usize {
        if k < self.lo || k > self.hi() {
            0
        } else {
            self.dims[(k - self.lo) as usize]
        }
    }
    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// d^k : C^k → C^{k+1}, zero outside the stored range.
    pub fn d(&self, k: i32) -> Matrix {
        if k < self.lo || k > self.hi() {
            Matrix::zeros(self.dim(k + 1), self.dim(k))
        } else {
            self.d[(k - self.lo) as usize].clone()
        }
    }

    pub fn check_d_squared(&self) -> bool {
        (self.lo - 1..=self.hi()).all(|k| self.d(k + 1).mul(&self.d(k)).is_zero())
    }

    pub fn cocycles(&self, k: i32) -> Matrix {
        kernel_basis(&self.d(k))
    }

    pub fn coboundaries(&self, k: i32) -> Matrix {
        span_basis(&self.d(k - 1))
    }

    pub fn cohomology_dim(&self, k: i32) -> usize {
        let z = self.dim(k) - self.d(k).rank();
        z - self.d(k - 1).rank()
    }

    pub fn cohomology_dims(&self) -> BTreeMap<i32, usize> {
        (self.lo..=self.hi()).map(|k| (k, self.cohomology_dim(k))).collect()
    }

    pub fn cohomology(&self, k: i32) -> Cohomology {
        let b = self.coboundaries(k);
        let z = self.cocycles(k);
        Cohomology { reps: complement_in(&b, &z), boundaries: b, ambient: self.dim(k) }
    }

    pub fn is_acyclic(&self) -> bool {
        (self.lo..=self.hi()).all(|k| self.cohomology_dim(k) == 0)
    }

    /// Same complex over a wider degree range (padding by zero spaces).
    pub fn widen(&self, lo: i32, hi: i32) -> Self {
        let lo = lo.min(self.lo);
        let hi = hi.max(self.hi());
        let dims: Vec<usize> = (lo..=hi).map(|k| self.dim(k)).collect();
        let d: Vec<Matrix> = (lo..=hi).map(|k| self.d(k)).collect();
        CochainComplex { lo, dims, d }
    }

    /// The shift C[s]: (C[s])^k = C^{k+s}, differential multiplied by (−1)^s.
    pub fn shift(&self, s: i32) -> Self {
        let sign = if s.rem_euclid(2) == 0 { Rational::one() } else { -Rational::one() };
        CochainComplex { lo: self.lo - s, dims: self.dims.clone(), d: self.d.iter().map(|m| m.scale(&sign)).collect() }
    }
}

/// Direct sum of complexes, summands stacked in the given order.
pub fn direct_sum(parts: &[CochainComplex]) -> CochainComplex {
    if parts.is_empty() {
        return CochainComplex::zero(0);
    }
    let lo = parts.iter().map(|c| c.lo()).min().unwrap();
    let hi = parts.iter().map(|c| c.hi()).max().unwrap();
    let dims: Vec<usize> = (lo..=hi).map(|k| parts.iter().map(|c| c.dim(k)).sum()).collect();
    let d = (lo..=hi)
        .map(|k| {
            let rows = if k == hi { 0 } else { dims[(k + 1 - lo) as usize] };
            let mut m = Matrix::zeros(rows, dims[(k - lo) as usize]);
            if k < hi {
                let (mut r, mut c) = (0, 0);
                for part in parts {
                    m.set_block(r, c, &part.d(k));
                    r += part.dim(k + 1);
                    c += part.dim(k);
                }
            }
            m
        })
        .collect();
    CochainComplex::new(lo, dims, d).expect("direct sum of complexes is a complex")
}

/// A cohomology space presented as representatives modulo boundaries.
#[derive(Clone, Debug)]
pub struct Cohomology {
    pub reps: Matrix,
    pub boundaries: Matrix,
    pub ambient: usize,
}

impl Cohomology {
    pub fn dim(&self) -> usize {
        self.reps.cols()
    }

    /// Coordinates (w.r.t. `reps`) of the classes of the cocycles in `v`.
    pub fn class_of(&self, v: &Matrix) -> Matrix {
        let basis = self.reps.hstack(&self.boundaries);
        let c = coordinates(&basis, v).expect("vector is not a cocycle");
        c.block(0, 0, self.dim(), v.cols())
    }
}

/// A degreewise family of linear maps between two complexes.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainMap {
    pub source: CochainComplex,
    pub target: CochainComplex,
    lo: i32,
    maps: Vec<Matrix>,
}

impl ChainMap {
    /// `maps[i]` acts in degree `lo + i`; unspecified degrees are zero maps.
    pub fn new(source: CochainComplex, target: CochainComplex, lo: i32, maps: Vec<Matrix>) -> Result<Self> {
        let f = ChainMap { source, target, lo, maps };
        for (i, m) in f.maps.iter().enumerate() {
            let k = lo + i as i32;
            if m.rows() != f.target.dim(k) || m.cols() != f.source.dim(k) {
                return Err(ComplexError::DimensionMismatch(format!("chain map at degree {k}")));
            }
        }
        let (a, b) = f.range();
        for k in a - 1..=b {
            if f.target.d(k).mul(&f.at(k)) != f.at(k + 1).mul(&f.source.d(k)) {
                return Err(ComplexError::NonChainMap(k));
            }
        }
        Ok(f)
    }

    pub fn identity(c: &CochainComplex) -> Self {
        let maps = (c.lo()..=c.hi()).map(|k| Matrix::identity(c.dim(k))).collect();
        ChainMap { source: c.clone(), target: c.clone(), lo: c.lo(), maps }
    }

    pub fn zero(source: &CochainComplex, target: &CochainComplex) -> Self {
        ChainMap { source: source.clone(), target: target.clone(), lo: 0, maps: vec![] }
    }

    pub fn range(&self) -> (i32, i32) {
        (self.source.lo().min(self.target.lo()), self.source.hi().max(self.target.hi()))
    }

    pub fn at(&self, k: i32) -> Matrix {
        let i = k - self.lo;
        if i >= 0 && (i as usize) < self.maps.len() {
            self.maps[i as usize].clone()
        } else {
            Matrix::zeros(self.target.dim(k), self.source.dim(k))
        }
    }

    pub fn compose(&self, after: &ChainMap) -> ChainMap {
        let (a, b) = self.range();
        let (c, d) = after.range();
        let lo = a.min(c);
        let maps = (lo..=b.max(d)).map(|k| after.at(k).mul(&self.at(k))).collect();
        ChainMap { source: self.source.clone(), target: after.target.clone(), lo, maps }
    }

    /// Induced map H^k(source) → H^k(target) in representative coordinates.
    pub fn on_cohomology(&self, k: i32) -> Matrix {
        let hs = self.source.cohomology(k);
        let ht = self.target.cohomology(k);
        ht.class_of(&self.at(k).mul(&hs.reps))
    }
}

/// cone(μ)^k = M^{k+1} ⊕ N^k with D(a, b) = (−d_M a, μ a + d_N b).
pub fn cone(mu: &ChainMap) -> CochainComplex {
    let m = &mu.source;
    let n = &mu.target;
    let lo = (m.lo() - 1).min(n.lo());
    let hi = (m.hi() - 1).max(n.hi());
    let mut dims = Vec::new();
    let mut ds = Vec::new();
    for k in lo..=hi {
        dims.push(m.dim(k + 1) + n.dim(k));
        let top_src = m.dim(k + 1);
        let rows = if k == hi { 0 } else { m.dim(k + 2) + n.dim(k + 1) };
        let mut dk = Matrix::zeros(rows, top_src + n.dim(k));
        if k < hi {
            dk.set_block(0, 0, &m.d(k + 1).scale(&-Rational::one()));
            dk.set_block(m.dim(k + 2), 0, &mu.at(k + 1));
            dk.set_block(m.dim(k + 2), top_src, &n.d(k));
        }
        ds.push(dk);
    }
    CochainComplex::new(lo, dims, ds).expect("cone of a chain map is a complex")
}

/// Inclusion N → cone(μ) and projection cone(μ) → M[1].
pub fn cone_triangle(mu: &ChainMap) -> (ChainMap, ChainMap) {
    let c = cone(mu);
    let m = &mu.source;
    let n = &mu.target;
    let m1 = m.shift(1);
    let (lo, hi) = (c.lo(), c.hi());
    let mut inc = Vec::new();
    let mut proj = Vec::new();
    for k in lo..=hi {
        let mut i = Matrix::zeros(c.dim(k), n.dim(k));
        i.set_block(m.dim(k + 1), 0, &Matrix::identity(n.dim(k)));
        inc.push(i);
        let mut p = Matrix::zeros(m1.dim(k), c.dim(k));
        p.set_block(0, 0, &Matrix::identity(m.dim(k + 1)));
        proj.push(p);
    }
    (
        ChainMap { source: n.clone(), target: c.clone(), lo, maps: inc },
        ChainMap { source: c, target: m1, lo, maps: proj },
    )
}

/// τ_{≤q}: unchanged below q, cocycles at q, zero above.
pub fn truncate(c: &CochainComplex, q: i32) -> CochainComplex {
    if q < c.lo() {
        return CochainComplex::zero(c.lo());
    }
    let mut dims = Vec::new();
    let mut ds = Vec::new();
    let z = c.cocycles(q);
    for k in c.lo()..=q {
        if k < q - 1 {
            dims.push(c.dim(k));
            ds.push(c.d(k));
        } else if k == q - 1 {
            dims.push(c.dim(k));
            let img = c.d(k);
            ds.push(coordinates(&z, &img).expect("image lies in cocycles"));
        } else {
            dims.push(z.cols());
            ds.push(Matrix::zeros(0, z.cols()));
        }
    }
    CochainComplex::new(c.lo(), dims, ds).expect("truncation is a complex")
}

/// A rectangular double complex with commuting squares. Entry (a, b) has
/// horizontal map to (a+1, b) and vertical map to (a, b+1).
#[derive(Clone, Debug, PartialEq)]
pub struct DoubleComplex {
    pub a_range: (i32, i32),
    pub b_range: (i32, i32),
    dims: BTreeMap<(i32, i32), usize>,
    horizontal: BTreeMap<(i32, i32), Matrix>,
    vertical: BTreeMap<(i32, i32), Matrix>,
}

impl DoubleComplex {
    pub fn new(a_range: (i32, i32), b_range: (i32, i32)) -> Self {
        DoubleComplex { a_range, b_range, dims: BTreeMap::new(), horizontal: BTreeMap::new(), vertical: BTreeMap::new() }
    }

    pub fn set_dim(&mut self, a: i32, b: i32, n: usize) {
        self.dims.insert((a, b), n);
    }
    pub fn set_horizontal(&mut self, a: i32, b: i32, m: Matrix) {
        self.horizontal.insert((a, b), m);
    }
    pub fn set_vertical(&mut self, a: i32, b: i32, m: Matrix) {
        self.vertical.insert((a, b), m);
    }

    pub fn dim(&self, a: i32, b: i32) -> usize {
        self.dims.get(&(a, b)).copied().unwrap_or(0)
    }
    pub fn horizontal(&self, a: i32, b: i32) -> Matrix {
        self.horizontal.get(&(a, b)).cloned().unwrap_or_else(|| Matrix::zeros(self.dim(a + 1, b), self.dim(a, b)))
    }
    pub fn vertical(&self, a: i32, b: i32) -> Matrix {
        self.vertical.get(&(a, b)).cloned().unwrap_or_else(|| Matrix::zeros(self.dim(a, b + 1), self.dim(a, b)))
    }

    /// Checks shapes, rows and columns being complexes, and commuting squares.
    pub fn validate(&self) -> Result<()> {
        let (a0, a1) = self.a_range;
        let (b0, b1) = self.b_range;
        for a in a0..=a1 {
            for b in b0..=b1 {
                let h = self.horizontal(a, b);
                let v = self.vertical(a, b);
                if h.rows() != self.dim(a + 1, b) || h.cols() != self.dim(a, b) {
                    return Err(ComplexError::DimensionMismatch(format!("horizontal at ({a},{b})")));
                }
                if v.rows() != self.dim(a, b + 1) || v.cols() != self.dim(a, b) {
                    return Err(ComplexError::DimensionMismatch(format!("vertical at ({a},{b})")));
                }
                if !self.horizontal(a + 1, b).mul(&h).is_zero() || !self.vertical(a, b + 1).mul(&v).is_zero() {
                    return Err(ComplexError::NotAComplex(a + b));
                }
                if self.vertical(a + 1, b).mul(&h) != self.horizontal(a, b + 1).mul(&v) {
                    return Err(ComplexError::SquaresDoNotCommute(a, b));
                }
            }
        }
        Ok(())
    }

    /// Offsets of each (a, b) block inside total degree a + b, ordered by a.
    pub fn block_offset(&self, a: i32, b: i32) -> usize {
        let k = a + b;
        (self.a_range.0..a).map(|a2| self.dim(a2, k - a2)).sum()
    }

    pub fn column(&self, a: i32) -> CochainComplex {
        let (b0, b1) = self.b_range;
        let dims = (b0..=b1).map(|b| self.dim(a, b)).collect();
        let d = (b0..=b1).map(|b| self.vertical(a, b)).collect();
        CochainComplex::new(b0, dims, d).expect("columns are complexes")
    }

    /// Keep only columns with `keep(a)`; the result is a quotient or sub
    /// double complex depending on the caller's choice of columns.
    pub fn restrict_columns(&self, keep: impl Fn(i32) -> bool) -> DoubleComplex {
        let mut out = DoubleComplex::new(self.a_range, self.b_range);
        for (&(a, b), &n) in &self.dims {
            out.set_dim(a, b, if keep(a) { n } else { 0 });
        }
        for (&(a, b), m) in &self.vertical {
            if keep(a) {
                out.set_vertical(a, b, m.clone());
            }
        }
        for (&(a, b), m) in &self.horizontal {
            if keep(a) && keep(a + 1) {
                out.set_horizontal(a, b, m.clone());
            }
        }
        out
    }

    /// Move every entry by (da, db).
    pub fn reindex(&self, da: i32, db: i32) -> DoubleComplex {
        let mut out = DoubleComplex::new((self.a_range.0 + da, self.a_range.1 + da), (self.b_range.0 + db, self.b_range.1 + db));
        for (&(a, b), &n) in &self.dims {
            out.set_dim(a + da, b + db, n);
        }
        for (&(a, b), m) in &self.vertical {
            out.set_vertical(a + da, b + db, m.clone());
        }
        for (&(a, b), m) in &self.horizontal {
            out.set_horizontal(a + da, b + db, m.clone());
        }
        out
    }
}

/// Simple complex with 𝔻 = d_vert + (−1)^b d_horiz.
pub fn totalize(dc: &DoubleComplex) -> Result<CochainComplex> {
    dc.validate()?;
    let (a0, a1) = dc.a_range;
    let (b0, b1) = dc.b_range;
    let lo = a0 + b0;
    let hi = a1 + b1;
    let tdim = |k: i32| -> usize { (a0..=a1).map(|a| dc.dim(a, k - a)).sum() };
    let mut dims = Vec::new();
    let mut ds = Vec::new();
    for k in lo..=hi {
        dims.push(tdim(k));
        let rows = if k == hi { 0 } else { tdim(k + 1) };
        let mut m = Matrix::zeros(rows, tdim(k));
        if k < hi {
            for a in a0..=a1 {
                let b = k - a;
                if dc.dim(a, b) == 0 {
                    continue;
                }
                let col = dc.block_offset(a, b);
                let v = dc.vertical(a, b);
                if v.rows() > 0 {
                    m.set_block(dc.block_offset(a, b + 1), col, &v);
                }
                let h = dc.horizontal(a, b);
                if h.rows() > 0 && a < a1 {
                    let sign = if b.rem_euclid(2) == 0 { Rational::one() } else { -Rational::one() };
                    m.set_block(dc.block_offset(a + 1, b), col, &h.scale(&sign));
                }
            }
        }
        ds.push(m);
    }
    let t = CochainComplex::new(lo, dims, ds)?;
    Ok(t)
}

/// Column filtration F^p = ⊕_{a ≥ p} on the totalization.
pub fn column_filtration(dc: &DoubleComplex) -> Result<FilteredCochainComplex> {
    let t = totalize(dc)?;
    let (a0, a1) = dc.a_range;
    let mut filt = Vec::new();
    for k in t.lo()..=t.hi() {
        let mut lv = Vec::new();
        for p in a0..=a1 + 1 {
            let start = if p <= a0 {
                0
            } else if p > a1 {
                t.dim(k)
            } else {
                dc.block_offset(p, k - p)
            };
            let n = t.dim(k) - start;
            let mut m = Matrix::zeros(t.dim(k), n);
            m.set_block(start, 0, &Matrix::identity(n));
            lv.push(m);
        }
        filt.push(lv);
    }
    FilteredCochainComplex::new(t, a0, a1 + 1, filt)
}

/// Decreasing filtration `F^p`, given on levels `p_lo..=p_hi` with
/// `F^{p_lo}` everything and `F^{p_hi}` zero in every degree.
#[derive(Clone, Debug)]
pub struct FilteredCochainComplex {
    pub base: CochainComplex,
    pub p_lo: i32,
    pub p_hi: i32,
    filt: Vec<Vec<Matrix>>,
}

impl FilteredCochainComplex {
    pub fn new(base: CochainComplex, p_lo: i32, p_hi: i32, filt: Vec<Vec<Matrix>>) -> Result<Self> {
        let nlev = (p_hi - p_lo + 1) as usize;
        if filt.len() != base.dims.len() || filt.iter().any(|f| f.len() != nlev) {
            return Err(ComplexError::NotAFiltration("wrong number of filtrands".into()));
        }
        let filt = filt.into_iter().map(|lv| lv.into_iter().map(|m| span_basis(&m)).collect()).collect();
        let f = FilteredCochainComplex { base, p_lo, p_hi, filt };
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> Result<()> {
        let b = &self.base;
        for k in b.lo()..=b.hi() {
            if self.f(k, self.p_lo).cols() != b.dim(k) {
                return Err(ComplexError::NotAFiltration(format!("not exhaustive in degree {k}")));
            }
            if self.f(k, self.p_hi).cols() != 0 {
                return Err(ComplexError::NotAFiltration(format!("not bounded in degree {k}")));
            }
            for p in self.p_lo..self.p_hi {
                if self.f(k, p).rows() != b.dim(k) {
                    return Err(ComplexError::DimensionMismatch(format!("filtrand F^{p} in degree {k}")));
                }
                if !span_contains(&self.f(k, p), &self.f(k, p + 1)) {
                    return Err(ComplexError::NotAFiltration(format!("F^{} ⊄ F^{} in degree {k}", p + 1, p)));
                }
                if !span_contains(&self.f(k + 1, p), &b.d(k).mul(&self.f(k, p))) {
                    return Err(ComplexError::NotAFiltration(format!("d(F^{p}) ⊄ F^{p} from degree {k}")));
                }
            }
        }
        Ok(())
    }

    /// F^p in degree k (clamped outside the stored levels).
    pub fn f(&self, k: i32, p: i32) -> Matrix {
        let n = self.base.dim(k);
        if k < self.base.lo() || k > self.base.hi() {
            return Matrix::zeros(n, 0);
        }
        if p <= self.p_lo {
            return Matrix::identity(n);
        }
        if p >= self.p_hi {
            return Matrix::zeros(n, 0);
        }
        self.filt[(k - self.base.lo()) as usize][(p - self.p_lo) as usize].clone()
    }

    /// Trivial filtration with a single jump at `p`: F^{≤p} = all, F^{>p} = 0.
    pub fn trivial(base: CochainComplex, p: i32) -> Self {
        let filt = (base.lo()..=base.hi())
            .map(|k| vec![Matrix::identity(base.dim(k)), Matrix::zeros(base.dim(k), 0)])
            .collect();
        FilteredCochainComplex { base, p_lo: p, p_hi: p + 1, filt }
    }

    /// Filtration length, the number of possibly nonzero graded pieces.
    pub fn length(&self) -> i32 {
        self.p_hi - self.p_lo
    }
}

/// (Dec F)^ℓ K^m = { x ∈ F^{ℓ+m} K^m : dx ∈ F^{ℓ+m+1} K^{m+1} }.
pub fn decalee(f: &FilteredCochainComplex) -> FilteredCochainComplex {
    let b = &f.base;
    let l_lo = f.p_lo - b.hi() - 1;
    let l_hi = f.p_hi - b.lo();
    let mut filt = Vec::new();
    for m in b.lo()..=b.hi() {
        let mut lv = Vec::new();
        for l in l_lo..=l_hi {
            let fp = f.f(m, l + m);
            let pre = preimage(&b.d(m), &f.f(m + 1, l + m + 1));
            lv.push(span_intersect(&fp, &pre));
        }
        filt.push(lv);
    }
    FilteredCochainComplex::new(b.clone(), l_lo, l_hi, filt).expect("décalée of a filtration is a filtration")
}

/// One entry E_r^{p,q}: representatives inside K^{p+q} and the subspace they
/// are taken modulo.
#[derive(Clone, Debug)]
pub struct PageEntry {
    pub dim: usize,
    pub reps: Matrix,
    pub denominator: Matrix,
}

impl PageEntry {
    /// Coordinates of vectors of Z_r (columns of `v`) modulo the denominator.
    pub fn coords(&self, v: &Matrix) -> Matrix {
        let basis = self.reps.hstack(&self.denominator);
        let c = coordinates(&basis, v).expect("vector not in Z_r");
        c.block(0, 0, self.dim, v.cols())
    }
}

/// E_r with d_r of bidegree (r, 1−r). Keys are (p, q), total degree p + q.
#[derive(Clone, Debug)]
pub struct SpectralSequencePage {
    pub r: i32,
    pub entries: BTreeMap<(i32, i32), PageEntry>,
    pub d: BTreeMap<(i32, i32), Matrix>,
}

impl SpectralSequencePage {
    pub fn dim(&self, p: i32, q: i32) -> usize {
        self.entries.get(&(p, q)).map(|e| e.dim).unwrap_or(0)
    }

    pub fn d_at(&self, p: i32, q: i32) -> Matrix {
        self.d.get(&(p, q)).cloned().unwrap_or_else(|| {
            Matrix::zeros(self.dim(p + self.r, q - self.r + 1), self.dim(p, q))
        })
    }

    pub fn check_d_squared(&self) -> bool {
        self.entries.keys().all(|&(p, q)| {
            let r = self.r;
            self.d_at(p + r, q - r + 1).mul(&self.d_at(p, q)).is_zero()
        })
    }

    /// Nonzero entries as (p, q, dim).
    pub fn nonzero(&self) -> Vec<(i32, i32, usize)> {
        self.entries.iter().filter(|(_, e)| e.dim > 0).map(|(&(p, q), e)| (p, q, e.dim)).collect()
    }
}

fn z_r(f: &FilteredCochainComplex, k: i32, p: i32, r: i32) -> Matrix {
    span_intersect(&f.f(k, p), &preimage(&f.base.d(k), &f.f(k + 1, p + r)))
}

fn b_r(f: &FilteredCochainComplex, k: i32, p: i32, r: i32) -> Matrix {
    span_intersect(&f.f(k, p), &image(&f.base.d(k - 1), &f.f(k - 1, p - r + 1)))
}

fn page_entry(f: &FilteredCochainComplex, k: i32, p: i32, r: i32) -> PageEntry {
    let z = z_r(f, k, p, r);
    let den = span_sum(&z_r(f, k, p + 1, r - 1), &b_r(f, k, p, r));
    let reps = complement_in(&den, &z);
    PageEntry { dim: reps.cols(), reps, denominator: den }
}

/// The page E_r, using E_r^p = Z_r^p / (Z_{r−1}^{p+1} + B_r^p) with
/// Z_r^p = F^p ∩ d⁻¹F^{p+r} and B_r^p = F^p ∩ d(F^{p−r+1}).
pub fn page(f: &FilteredCochainComplex, r: i32) -> SpectralSequencePage {
    let b = &f.base;
    let mut entries = BTreeMap::new();
    for k in b.lo()..=b.hi() {
        for p in f.p_lo..f.p_hi {
            entries.insert((p, k - p), page_entry(f, k, p, r));
        }
    }
    let mut d = BTreeMap::new();
    for (&(p, q), e) in &entries {
        let k = p + q;
        let tgt = (p + r, q - r + 1);
        let m = match entries.get(&tgt) {
            Some(t) => t.coords(&b.d(k).mul(&e.reps)),
            None => Matrix::zeros(0, e.dim),
        };
        d.insert((p, q), m);
    }
    SpectralSequencePage { r, entries, d }
}

/// Pages E_0 … E_{r_max}.
pub fn spectral_pages(f: &FilteredCochainComplex, r_max: i32) -> Vec<SpectralSequencePage> {
    (0..=r_max).map(|r| page(f, r)).collect()
}

/// E_∞, reached once r exceeds the filtration length.
pub fn e_infinity(f: &FilteredCochainComplex) -> SpectralSequencePage {
    page(f, f.length() + 1)
}

/// Maps E_r(f1) → E_r(f2) induced by a filtered chain map.
pub fn induced_page_map(
    phi: &ChainMap,
    f1: &FilteredCochainComplex,
    f2: &FilteredCochainComplex,
    r: i32,
) -> Result<BTreeMap<(i32, i32), Matrix>> {
    let b = &f1.base;
    let p_lo = f1.p_lo.min(f2.p_lo);
    let p_hi = f1.p_hi.max(f2.p_hi);
    for k in b.lo()..=b.hi() {
        for p in p_lo..=p_hi {
            if !span_contains(&f2.f(k, p), &phi.at(k).mul(&f1.f(k, p))) {
                return Err(ComplexError::NotFiltered(k, p));
            }
        }
    }
    let e1 = page(f1, r);
    let e2 = page(f2, r);
    let mut out = BTreeMap::new();
    for (&(p, q), e) in &e1.entries {
        let k = p + q;
        let m = match e2.entries.get(&(p, q)) {
            Some(t) => t.coords(&phi.at(k).mul(&e.reps)),
            None => Matrix::zeros(0, e.dim),
        };
        out.insert((p, q), m);
    }
    for (&(p, q), m) in &out {
        let tgt = (p + r, q - r + 1);
        let lhs = e2.d_at(p, q).mul(m);
        let down = out.get(&tgt).cloned().unwrap_or_else(|| Matrix::zeros(e2.dim(tgt.0, tgt.1), e1.dim(tgt.0, tgt.1)));
        let rhs = down.mul(&e1.d_at(p, q));
        if lhs != rhs {
            return Err(ComplexError::NonChainMap(p + q));
        }
    }
    Ok(out)
}

/// One term of a long exact sequence with its outgoing map.
#[derive(Clone, Debug)]
pub struct LesTerm {
    pub label: String,
    pub dim: usize,
    pub map: Matrix,
}

#[derive(Clone, Debug)]
pub struct LongExactSequence {
    pub terms: Vec<LesTerm>,
}

impl LongExactSequence {
    /// rank(incoming) = dim ker(outgoing) at every term, the ends included.
    pub fn is_exact(&self) -> bool {
        self.exactness_defects().is_empty()
    }

    pub fn exactness_defects(&self) -> Vec<usize> {
        let mut bad = Vec::new();
        for (j, t) in self.terms.iter().enumerate() {
            let incoming = if j == 0 { 0 } else { self.terms[j - 1].map.rank() };
            let kernel = t.dim - t.map.rank();
            if incoming != kernel {
                bad.push(j);
            }
        }
        bad
    }

    /// Alternating sum of dimensions; zero for any exact sequence.
    pub fn euler_characteristic(&self) -> i64 {
        self.terms.iter().enumerate().map(|(j, t)| if j % 2 == 0 { t.dim as i64 } else { -(t.dim as i64) }).sum()
    }
}

/// The long exact cohomology sequence of 0 → A → B → C → 0.
pub fn les_from_ses(inclusion: &ChainMap, projection: &ChainMap) -> Result<LongExactSequence> {
    let a = &inclusion.source;
    let bb = &inclusion.target;
    let c = &projection.target;
    let lo = a.lo().min(bb.lo()).min(c.lo());
    let hi = a.hi().max(bb.hi()).max(c.hi());
    for k in lo..=hi {
        let i = inclusion.at(k);
        let p = projection.at(k);
        if i.rank() != a.dim(k) || p.rank() != c.dim(k) || !p.mul(&i).is_zero() || i.rank() + p.rank() != bb.dim(k) {
            return Err(ComplexError::NotExactSES(k));
        }
    }
    let mut terms = Vec::new();
    for k in lo..=hi {
        let ha = a.cohomology(k);
        let hb = bb.cohomology(k);
        let hc = c.cohomology(k);
        let ha_next = a.cohomology(k + 1);
        let ia = hb.class_of(&inclusion.at(k).mul(&ha.reps));
        let pb = hc.class_of(&projection.at(k).mul(&hb.reps));
        let delta = if k < hi {
            let lift = solve_any(&projection.at(k), &hc.reps).expect("projection is surjective");
            let db = bb.d(k).mul(&lift);
            let pre = coordinates(&inclusion.at(k + 1), &db).expect("d(lift) lies in A");
            ha_next.class_of(&pre)
        } else {
            Matrix::zeros(0, hc.dim())
        };
        terms.push(LesTerm { label: format!("H^{k}(A)"), dim: ha.dim(), map: ia });
        terms.push(LesTerm { label: format!("H^{k}(B)"), dim: hb.dim(), map: pb });
        terms.push(LesTerm { label: format!("H^{k}(C)"), dim: hc.dim(), map: delta });
    }
    Ok(LongExactSequence { terms })
}

/// `+1` if `even`, else `−1`.
pub fn sign(even: bool) -> Rational {
    if even {
        Rational::one()
    } else {
        -Rational::one()
    }
}
