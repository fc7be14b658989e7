//! Gysin double complexes of a normal crossing divisor Y = ∪ Y_i ⊂ X,
//! built from user-supplied finite models of the strata.
//!
//! A stratum is a sorted list of 1-based component indices, `[]` being X
//! itself. Each nonempty stratum Y_K carries a model complex C(Y_K) in its
//! own cohomological degree m, and each pair (K, i ∈ K) a pushforward
//! ι_*: C^m(Y_K) → C^{m+2}(Y_{K∖i}) which must be a chain map.
//!
//! Entry (a, b) of 𝒦(p) is ⊕_{|K| = −a} C^{2p+2a+b}(Y_K). The horizontal
//! map is Gy = Σ_{i ∈ K} (−1)^{⟨i⟩_K} ι_*, with ⟨i⟩_K the 1-based position
//! of i in K; the 2πi factor is not carried. The vertical map is the
//! model differential. The sign (−1)^b is applied by `totalize`.
//!
//! The column filtration F^a = ⊕_{a' ≥ a} is the weight filtration with
//! W̃_j = F^{−j}, so E_r^{a,b} of `weight_filtration` is 𝒦(p)_r^{a,b}.

use crate::complex::*;
use crate::json::{complex_from_value, complex_to_value, matrix_from_value, matrix_to_value, FormatError};
use crate::linalg::*;
use crate::random::{invertible, inverse, random_complex, Rng8};
use num_traits::One;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GysinError {
    #[error("invalid NCD descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("map {0} is not a chain map")]
    NotChainMap(String),
    #[error("Gy∘Gy ≠ 0 out of bidegree ({0},{1})")]
    GySquareNonzero(i32, i32),
    #[error("residue of depth {k} needs a class in column {}, got column {got}", -(*k as i32))]
    WrongColumn { k: usize, got: i32 },
    #[error("not a filtration: {0}")]
    NotAFiltration(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

pub type Result<T> = std::result::Result<T, GysinError>;

pub type Stratum = Vec<usize>;

/// Per-degree matrices of a map between two models; missing degrees are zero.
pub type DegreeMaps = BTreeMap<i32, Matrix>;

fn label(k: &[usize]) -> String {
    if k.is_empty() {
        "∅".into()
    } else {
        k.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
    }
}

fn without(k: &[usize], i: usize) -> Stratum {
    k.iter().copied().filter(|&j| j != i).collect()
}

fn union(a: &[usize], b: &[usize]) -> Stratum {
    let mut u: Stratum = a.iter().chain(b).copied().collect();
    u.sort_unstable();
    u.dedup();
    u
}

/// 1-based position of `i` in the sorted multi-index `k`.
fn position(k: &[usize], i: usize) -> usize {
    k.iter().position(|&j| j == i).expect("index in stratum") + 1
}

fn parity_sign(n: usize) -> Rational {
    sign(n.is_multiple_of(2))
}

/// All `size`-subsets of `set`, lexicographic.
fn subsets(set: &[usize], size: usize) -> Vec<Stratum> {
    if size == 0 {
        return vec![vec![]];
    }
    if set.len() < size {
        return vec![];
    }
    let mut out = Vec::new();
    for (idx, &first) in set.iter().enumerate() {
        for mut rest in subsets(&set[idx + 1..], size - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn degree_map(maps: &DegreeMaps, m: i32, rows: usize, cols: usize) -> Matrix {
    maps.get(&m).cloned().unwrap_or_else(|| Matrix::zeros(rows, cols))
}

/// Checks that per-degree maps C → D (raising degree by `shift`) commute with d.
fn check_chain(src: &CochainComplex, tgt: &CochainComplex, maps: &DegreeMaps, shift: i32, name: &str) -> Result<()> {
    for (&m, mat) in maps {
        if mat.rows() != tgt.dim(m + shift) || mat.cols() != src.dim(m) {
            return Err(GysinError::DimensionMismatch(format!("{name} in degree {m}")));
        }
    }
    let lo = src.lo().min(tgt.lo() - shift) - 1;
    let hi = src.hi().max(tgt.hi() - shift);
    for m in lo..=hi {
        let f = degree_map(maps, m, tgt.dim(m + shift), src.dim(m));
        let f1 = degree_map(maps, m + 1, tgt.dim(m + 1 + shift), src.dim(m + 1));
        if tgt.d(m + shift).mul(&f) != f1.mul(&src.d(m)) {
            return Err(GysinError::NotChainMap(format!("{name} at degree {m}")));
        }
    }
    Ok(())
}

/// Combinatorial NCD data with finite models of the strata.
#[derive(Clone, Debug, PartialEq)]
pub struct NcdDescriptor {
    components: usize,
    models: BTreeMap<Stratum, CochainComplex>,
    gysin: BTreeMap<(Stratum, usize), DegreeMaps>,
    coniveau: Vec<DegreeMaps>,
}

impl NcdDescriptor {
    /// `models` holds exactly the nonempty strata, X = `[]` included; a
    /// missing pushforward is the zero map.
    pub fn new(
        components: usize,
        models: BTreeMap<Stratum, CochainComplex>,
        gysin: BTreeMap<(Stratum, usize), DegreeMaps>,
    ) -> Result<Self> {
        let bad = |s: String| Err(GysinError::InvalidDescriptor(s));
        if !models.contains_key(&vec![]) {
            return bad("no model for X".into());
        }
        for k in models.keys() {
            if k.windows(2).any(|w| w[0] >= w[1]) || k.iter().any(|&i| i == 0 || i > components) {
                return bad(format!("stratum [{}] is not a sorted subset of 1..={components}", label(k)));
            }
            for &i in k {
                if !models.contains_key(&without(k, i)) {
                    return bad(format!("stratum [{}] is nonempty but [{}] is not", label(k), label(&without(k, i))));
                }
            }
        }
        for ((k, i), maps) in &gysin {
            let (Some(src), true) = (models.get(k), k.contains(i)) else {
                return bad(format!("pushforward [{}]→[{}] has no source stratum", label(k), label(&without(k, *i))));
            };
            let tgt = &models[&without(k, *i)];
            check_chain(src, tgt, maps, 2, &format!("ι_* [{}]→[{}]", label(k), label(&without(k, *i))))?;
        }
        Ok(NcdDescriptor { components, models, gysin, coniveau: vec![] })
    }

    /// Attach the coniveau filtration N^1 ⊇ N^2 ⊇ … of the X-model, each
    /// level given per degree by spanning columns. Checked by `coniveau_pages`.
    pub fn with_coniveau(mut self, levels: Vec<DegreeMaps>) -> Self {
        self.coniveau = levels;
        self
    }

    pub fn components(&self) -> usize {
        self.components
    }
    pub fn strata(&self) -> impl Iterator<Item = &Stratum> {
        self.models.keys()
    }
    pub fn is_nonempty(&self, k: &[usize]) -> bool {
        self.models.contains_key(k)
    }
    pub fn model(&self, k: &[usize]) -> Option<&CochainComplex> {
        self.models.get(k)
    }
    pub fn models(&self) -> &BTreeMap<Stratum, CochainComplex> {
        &self.models
    }
    pub fn gysin_components(&self) -> &BTreeMap<(Stratum, usize), DegreeMaps> {
        &self.gysin
    }
    pub fn coniveau(&self) -> &[DegreeMaps] {
        &self.coniveau
    }

    /// ι_*: C^m(Y_K) → C^{m+2}(Y_{K∖i}).
    pub fn pushforward(&self, k: &[usize], i: usize, m: i32) -> Matrix {
        let src = &self.models[k];
        let tgt = &self.models[&without(k, i)];
        let maps = self.gysin.get(&(k.to_vec(), i));
        match maps.and_then(|mp| mp.get(&m)) {
            Some(x) => x.clone(),
            None => Matrix::zeros(tgt.dim(m + 2), src.dim(m)),
        }
    }

    /// Same data with every model conjugated by per-degree changes of basis
    /// `g[K][m]`; the maps `g` then form an isomorphism self → result.
    pub fn conjugate(&self, g: &BTreeMap<Stratum, DegreeMaps>) -> Result<(NcdDescriptor, NcdMorphism)> {
        let gm = |k: &Stratum, m: i32| -> Matrix {
            g.get(k).and_then(|x| x.get(&m)).cloned().unwrap_or_else(|| Matrix::identity(self.models[k].dim(m)))
        };
        let mut models = BTreeMap::new();
        for (k, c) in &self.models {
            let dims = (c.lo()..=c.hi()).map(|m| c.dim(m)).collect();
            let ds = (c.lo()..=c.hi()).map(|m| gm(k, m + 1).mul(&c.d(m)).mul(&inverse(&gm(k, m)))).collect();
            models.insert(k.clone(), CochainComplex::new(c.lo(), dims, ds)?);
        }
        let mut gysin = BTreeMap::new();
        for ((k, i), maps) in &self.gysin {
            let t = without(k, *i);
            let conj = maps.iter().map(|(&m, x)| (m, gm(&t, m + 2).mul(x).mul(&inverse(&gm(k, m))))).collect();
            gysin.insert((k.clone(), *i), conj);
        }
        let levels = self
            .coniveau
            .iter()
            .map(|lv| lv.iter().map(|(&m, x)| (m, gm(&vec![], m).mul(x))).collect())
            .collect();
        let out = NcdDescriptor::new(self.components, models, gysin)?.with_coniveau(levels);
        let maps = self.models.iter().map(|(k, c)| (k.clone(), (c.lo()..=c.hi()).map(|m| (m, gm(k, m))).collect())).collect();
        let mor = NcdMorphism::new(self, &out, maps)?;
        Ok((out, mor))
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |s: &str| GysinError::InvalidDescriptor(s.into());
        let n = v.get("components").and_then(|x| x.as_u64()).ok_or_else(|| bad("missing components"))? as usize;
        let parse_stratum = |s: &str| -> Result<Stratum> {
            let s = s.trim();
            if s.is_empty() || s == "∅" {
                return Ok(vec![]);
            }
            s.split(',').map(|t| t.trim().parse::<usize>().map_err(|_| bad(&format!("bad stratum {s:?}")))).collect()
        };
        let mut models = BTreeMap::new();
        for (k, c) in v.get("models").and_then(|x| x.as_object()).ok_or_else(|| bad("missing models"))? {
            models.insert(parse_stratum(k)?, complex_from_value(c)?);
        }
        if let Some(list) = v.get("strata") {
            let list = list.as_array().ok_or_else(|| bad("strata must be a list"))?;
            let mut given = vec![vec![]];
            for s in list {
                let s: Stratum = s
                    .as_array()
                    .ok_or_else(|| bad("stratum must be a list"))?
                    .iter()
                    .map(|x| x.as_u64().map(|x| x as usize).ok_or_else(|| bad("stratum index")))
                    .collect::<Result<_>>()?;
                given.push(s);
            }
            given.sort();
            given.dedup();
            if !given.iter().eq(models.keys()) {
                return Err(bad("nonempty strata do not match the models"));
            }
        }
        let mut gysin = BTreeMap::new();
        if let Some(t) = v.get("gysin") {
            for (key, maps) in t.as_object().ok_or_else(|| bad("gysin must be an object"))? {
                let (l, r) = key.split_once("->").or_else(|| key.split_once('→')).ok_or_else(|| bad(&format!("bad gysin key {key:?}")))?;
                let (k, j) = (parse_stratum(l)?, parse_stratum(r)?);
                let removed: Vec<usize> = k.iter().copied().filter(|x| !j.contains(x)).collect();
                if removed.len() != 1 || without(&k, removed[0]) != j {
                    return Err(bad(&format!("gysin key {key:?} is not I→I∖{{i}}")));
                }
                let (src, tgt) = match (models.get(&k), models.get(&j)) {
                    (Some(s), Some(t)) => (s, t),
                    _ => return Err(bad(&format!("gysin key {key:?} refers to a missing stratum"))),
                };
                let mut dm = DegreeMaps::new();
                for (m, mat) in maps.as_object().ok_or_else(|| bad("gysin entry must be an object"))? {
                    let m: i32 = m.trim().parse().map_err(|_| bad("gysin degree"))?;
                    dm.insert(m, matrix_from_value(mat, tgt.dim(m + 2), src.dim(m))?);
                }
                gysin.insert((k, removed[0]), dm);
            }
        }
        let mut levels = Vec::new();
        if let Some(c) = v.get("coniveau") {
            let x = &models[&vec![]];
            for lv in c.as_array().ok_or_else(|| bad("coniveau must be a list"))? {
                let mut dm = DegreeMaps::new();
                for (m, mat) in lv.as_object().ok_or_else(|| bad("coniveau level must be an object"))? {
                    let m: i32 = m.trim().parse().map_err(|_| bad("coniveau degree"))?;
                    let rows = mat.as_array().map(|r| r.len()).unwrap_or(0);
                    let cols = mat.as_array().and_then(|r| r.first()).and_then(|r| r.as_array()).map(|r| r.len()).unwrap_or(0);
                    if rows != x.dim(m) && !(rows == 0 && x.dim(m) == 0) {
                        return Err(bad("coniveau level has the wrong number of rows"));
                    }
                    dm.insert(m, matrix_from_value(mat, x.dim(m), cols)?);
                }
                levels.push(dm);
            }
        }
        Ok(NcdDescriptor::new(n, models, gysin)?.with_coniveau(levels))
    }

    pub fn to_json(&self) -> Value {
        let key = |k: &Stratum| k.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",");
        let models: Map<String, Value> = self.models.iter().map(|(k, c)| (key(k), complex_to_value(c))).collect();
        let strata: Vec<Value> = self.models.keys().filter(|k| !k.is_empty()).map(|k| json!(k)).collect();
        let gysin: Map<String, Value> = self
            .gysin
            .iter()
            .map(|((k, i), maps)| {
                let m: Map<String, Value> = maps.iter().map(|(d, x)| (d.to_string(), matrix_to_value(x))).collect();
                (format!("{}->{}", key(k), key(&without(k, *i))), Value::Object(m))
            })
            .collect();
        let con: Vec<Value> = self
            .coniveau
            .iter()
            .map(|lv| Value::Object(lv.iter().map(|(d, x)| (d.to_string(), matrix_to_value(x))).collect()))
            .collect();
        json!({"components": self.components, "strata": strata, "models": models, "gysin": gysin, "coniveau": con})
    }
}

/// Degree-preserving chain maps C(Y_K) → C(Y'_K) commuting with every ι_*.
#[derive(Clone, Debug)]
pub struct NcdMorphism {
    maps: BTreeMap<Stratum, DegreeMaps>,
}

impl NcdMorphism {
    pub fn new(src: &NcdDescriptor, tgt: &NcdDescriptor, maps: BTreeMap<Stratum, DegreeMaps>) -> Result<Self> {
        if src.models.keys().ne(tgt.models.keys()) {
            return Err(GysinError::InvalidDescriptor("morphism between different stratifications".into()));
        }
        for (k, c) in &src.models {
            let empty = DegreeMaps::new();
            check_chain(c, &tgt.models[k], maps.get(k).unwrap_or(&empty), 0, &format!("φ on [{}]", label(k)))?;
        }
        let f = NcdMorphism { maps };
        for (k, c) in &src.models {
            for &i in k {
                let t = without(k, i);
                for m in c.lo()..=c.hi() {
                    let lhs = tgt.pushforward(k, i, m).mul(&f.at(src, tgt, k, m));
                    let rhs = f.at(src, tgt, &t, m + 2).mul(&src.pushforward(k, i, m));
                    if lhs != rhs {
                        return Err(GysinError::NotChainMap(format!("φ does not commute with ι_* [{}]→[{}]", label(k), label(&t))));
                    }
                }
            }
        }
        Ok(f)
    }

    pub fn zero() -> Self {
        NcdMorphism { maps: BTreeMap::new() }
    }

    fn at(&self, src: &NcdDescriptor, tgt: &NcdDescriptor, k: &[usize], m: i32) -> Matrix {
        let (s, t) = (src.models[k].dim(m), tgt.models[k].dim(m));
        self.maps.get(k).and_then(|x| x.get(&m)).cloned().unwrap_or_else(|| Matrix::zeros(t, s))
    }
}

/// An entry Y_{I∪J} of the depth-|I| grid, sitting in column −|J|.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Entry {
    i: Stratum,
    j: Stratum,
}

impl Entry {
    fn stratum(&self) -> Stratum {
        union(&self.i, &self.j)
    }
}

/// Layout of a Gysin grid: the one of X (depth 0), or the one of
/// Y^k ∖ Y^{k+1} on Ỹ^k, whose column −m holds the Y_{I∪J} with |I| = k,
/// |J| = m, J ∩ I = ∅. Column −m is placed at position −m − k.
struct Grid {
    twist: i32,
    depth: usize,
    columns: Vec<Vec<Entry>>,
}

impl Grid {
    fn new(ncd: &NcdDescriptor, p: i32, k: usize) -> Grid {
        let all: Vec<usize> = (1..=ncd.components).collect();
        let mut columns = vec![Vec::new(); ncd.components.saturating_sub(k) + 1];
        for i in subsets(&all, k).into_iter().filter(|i| ncd.is_nonempty(i)) {
            let rest: Vec<usize> = all.iter().copied().filter(|x| !i.contains(x)).collect();
            for (m, col) in columns.iter_mut().enumerate() {
                for j in subsets(&rest, m) {
                    let e = Entry { i: i.clone(), j };
                    if ncd.is_nonempty(&e.stratum()) {
                        col.push(e);
                    }
                }
            }
        }
        for c in &mut columns {
            c.sort();
        }
        Grid { twist: p - k as i32, depth: k, columns }
    }

    fn position(&self, m: usize) -> i32 {
        -(m as i32) - self.depth as i32
    }

    /// Model degree of the entries at position (a, b).
    fn model_degree(&self, a: i32, b: i32) -> i32 {
        let alpha = a + self.depth as i32;
        2 * self.twist + 2 * alpha + b
    }

    fn column_index(&self, a: i32) -> Option<usize> {
        let m = -(a + self.depth as i32);
        if m >= 0 && (m as usize) < self.columns.len() {
            Some(m as usize)
        } else {
            None
        }
    }

    fn offsets(&self, ncd: &NcdDescriptor, col: usize, md: i32) -> Vec<usize> {
        let mut off = vec![0];
        for e in &self.columns[col] {
            off.push(off.last().unwrap() + ncd.models[&e.stratum()].dim(md));
        }
        off
    }

    fn build(&self, ncd: &NcdDescriptor) -> Result<DoubleComplex> {
        let a_range = (self.position(self.columns.len() - 1), self.position(0));
        let mut b_lo = i32::MAX;
        let mut b_hi = i32::MIN;
        for (m, col) in self.columns.iter().enumerate() {
            let a = self.position(m);
            for e in col {
                let c = &ncd.models[&e.stratum()];
                let shift = self.model_degree(a, 0);
                b_lo = b_lo.min(c.lo() - shift);
                b_hi = b_hi.max(c.hi() - shift);
            }
        }
        if b_lo > b_hi {
            (b_lo, b_hi) = (0, 0);
        }
        let mut dc = DoubleComplex::new(a_range, (b_lo, b_hi));
        for (mi, col) in self.columns.iter().enumerate() {
            let a = self.position(mi);
            for b in b_lo..=b_hi {
                let md = self.model_degree(a, b);
                let off = self.offsets(ncd, mi, md);
                let off_up = self.offsets(ncd, mi, md + 1);
                dc.set_dim(a, b, *off.last().unwrap());
                let mut v = Matrix::zeros(*off_up.last().unwrap(), *off.last().unwrap());
                for (n, e) in col.iter().enumerate() {
                    v.set_block(off_up[n], off[n], &ncd.models[&e.stratum()].d(md));
                }
                dc.set_vertical(a, b, v);
                if mi == 0 {
                    continue;
                }
                let tcol = &self.columns[mi - 1];
                let toff = self.offsets(ncd, mi - 1, md + 2);
                let mut h = Matrix::zeros(*toff.last().unwrap(), *off.last().unwrap());
                for (n, e) in col.iter().enumerate() {
                    let k = e.stratum();
                    for &j in &e.j {
                        let te = Entry { i: e.i.clone(), j: without(&e.j, j) };
                        let t = tcol.binary_search(&te).expect("faces of nonempty strata are nonempty");
                        let blk = ncd.pushforward(&k, j, md).scale(&parity_sign(position(&e.j, j)));
                        let cur = h.block(toff[t], off[n], blk.rows(), blk.cols());
                        h.set_block(toff[t], off[n], &cur.add(&blk));
                    }
                }
                dc.set_horizontal(a, b, h);
            }
        }
        for a in a_range.0..a_range.1 {
            for b in b_lo..=b_hi {
                if !dc.horizontal(a + 1, b).mul(&dc.horizontal(a, b)).is_zero() {
                    return Err(GysinError::GySquareNonzero(a, b));
                }
            }
        }
        dc.validate()?;
        Ok(dc)
    }

    /// Degree-0 chain map between totalizations given blockwise by
    /// `block(source entry, target entry, model degree)`.
    fn chain_map(
        src: (&Grid, &NcdDescriptor, &DoubleComplex),
        tgt: (&Grid, &NcdDescriptor, &DoubleComplex),
        block: impl Fn(&Entry, &Entry, usize, usize) -> Option<Matrix>,
    ) -> Result<ChainMap> {
        let (sg, sn, sdc) = src;
        let (tg, tn, tdc) = tgt;
        let ts = totalize(sdc)?;
        let tt = totalize(tdc)?;
        let lo = ts.lo().min(tt.lo());
        let hi = ts.hi().max(tt.hi());
        let mut maps = Vec::new();
        for t in lo..=hi {
            let mut m = Matrix::zeros(tt.dim(t), ts.dim(t));
            for a in sdc.a_range.0..=sdc.a_range.1 {
                let b = t - a;
                let (Some(si), Some(ti)) = (sg.column_index(a), tg.column_index(a)) else { continue };
                if sdc.dim(a, b) == 0 || tdc.dim(a, b) == 0 {
                    continue;
                }
                let md = sg.model_degree(a, b);
                let soff = sg.offsets(sn, si, md);
                let toff = tg.offsets(tn, ti, md);
                let (r0, c0) = (tdc.block_offset(a, b), sdc.block_offset(a, b));
                for (x, se) in sg.columns[si].iter().enumerate() {
                    for (y, te) in tg.columns[ti].iter().enumerate() {
                        let (sd, td) = (soff[x + 1] - soff[x], toff[y + 1] - toff[y]);
                        if let Some(blk) = block(se, te, sd, td) {
                            m.set_block(r0 + toff[y], c0 + soff[x], &blk);
                        }
                    }
                }
            }
            maps.push(m);
        }
        Ok(ChainMap::new(ts, tt, lo, maps)?)
    }
}

/// The grid 𝒦(p)^{a,b}, columns a ∈ [−N, 0].
pub fn build_gysin(ncd: &NcdDescriptor, p: i32) -> Result<DoubleComplex> {
    Grid::new(ncd, p, 0).build(ncd)
}

/// W̃_j = F^{−j}: the column filtration F^a = ⊕_{a' ≥ a} of the totalization.
pub fn weight_filtration(dc: &DoubleComplex) -> Result<FilteredCochainComplex> {
    Ok(column_filtration(dc)?)
}

/// The support variant: column 0 omitted. Its cohomology in degree * is
/// cohomology with supports on Y in degree 2p + * + 1.
pub fn support_variant(dc: &DoubleComplex) -> DoubleComplex {
    dc.restrict_columns(|a| a < 0)
}

/// 0 → column 0 → s𝒦 → s(support variant) → 0, as (inclusion, projection).
pub fn column_zero_sequence(dc: &DoubleComplex) -> Result<(ChainMap, ChainMap)> {
    let t = totalize(dc)?;
    let c0 = dc.column(0);
    let sup = totalize(&support_variant(dc))?;
    let lo = t.lo().min(c0.lo());
    let hi = t.hi().max(c0.hi());
    let mut inc = Vec::new();
    let mut proj = Vec::new();
    for k in lo..=hi {
        let mut i = Matrix::zeros(t.dim(k), c0.dim(k));
        if c0.dim(k) > 0 {
            i.set_block(dc.block_offset(0, k), 0, &Matrix::identity(c0.dim(k)));
        }
        inc.push(i);
        let mut pr = Matrix::zeros(sup.dim(k), t.dim(k));
        pr.set_block(0, 0, &Matrix::identity(sup.dim(k)));
        proj.push(pr);
    }
    Ok((ChainMap::new(c0, t.clone(), lo, inc)?, ChainMap::new(t, sup, lo, proj)?))
}

/// A class in E_∞^{a,b} of the weight spectral sequence, twist p + a.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightGradedClass {
    pub a: i32,
    pub b: i32,
    pub twist: i32,
    /// Coordinates in the basis of the E_∞^{a,b} entry.
    pub coords: Vec<Rational>,
    /// A 𝔻-cocycle in F^a of total degree a + b representing the class.
    pub rep: Matrix,
}

impl WeightGradedClass {
    pub fn new(dc: &DoubleComplex, p: i32, a: i32, b: i32, coords: Vec<Rational>) -> Result<Self> {
        let e = e_infinity(&weight_filtration(dc)?);
        let entry = e.entries.get(&(a, b));
        let dim = entry.map(|x| x.dim).unwrap_or(0);
        if coords.len() != dim {
            return Err(GysinError::DimensionMismatch(format!("E_∞^{{{a},{b}}} has dimension {dim}, got {} coordinates", coords.len())));
        }
        let rep = match entry {
            Some(x) => x.reps.mul(&Matrix::from_cols(dim, std::slice::from_ref(&coords))),
            None => Matrix::zeros(0, 1),
        };
        Ok(WeightGradedClass { a, b, twist: p + a, coords, rep })
    }

    /// The basis classes of E_∞^{a,b}.
    pub fn basis(dc: &DoubleComplex, p: i32, a: i32, b: i32) -> Result<Vec<Self>> {
        let e = e_infinity(&weight_filtration(dc)?);
        let dim = e.dim(a, b);
        (0..dim)
            .map(|i| {
                let coords = (0..dim).map(|j| if i == j { Rational::one() } else { qi(0) }).collect();
                WeightGradedClass::new(dc, p, a, b, coords)
            })
            .collect()
    }
}

/// Image of a class under 𝒦(p) ↠ 𝒦^{≤−k}(p) → 𝒦_{Y^k∖Y^{k+1}}(p−k).
#[derive(Clone, Debug)]
pub struct ResidueClass {
    pub depth: usize,
    pub b: i32,
    pub twist: i32,
    /// The target grid, reindexed so that its top column is column 0.
    pub target: DoubleComplex,
    /// Coordinates in the basis of E_∞^{0,b} of `target`.
    pub coords: Vec<Rational>,
    /// The image cocycle in the totalization of `target`.
    pub rep: Matrix,
}

impl ResidueClass {
    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| *c == qi(0))
    }
}

/// The grid computing Y^k ∖ Y^{k+1} at twist p − k, top column at 0.
pub fn residue_target(ncd: &NcdDescriptor, p: i32, k: usize) -> Result<DoubleComplex> {
    Ok(Grid::new(ncd, p, k).build(ncd)?.reindex(k as i32, 0))
}

/// Sign making the restriction Y_K → ⊔ Y_{I∪J} commute with both Gy maps:
/// (−1)^{#{(i, j) ∈ I × J : i < j}}.
fn split_sign(i: &[usize], j: &[usize]) -> Rational {
    parity_sign(j.iter().map(|&y| i.iter().filter(|&&x| x < y).count()).sum())
}

/// The composite 𝒦(p) ↠ 𝒦^{≤−k}(p) → 𝒦_{Y^k∖Y^{k+1}}(p−k) on totalizations,
/// the target placed at columns ≤ −k.
pub fn residue_map(ncd: &NcdDescriptor, p: i32, k: usize) -> Result<ChainMap> {
    let sg = Grid::new(ncd, p, 0);
    let tg = Grid::new(ncd, p, k);
    let sdc = sg.build(ncd)?;
    let tdc = tg.build(ncd)?;
    Grid::chain_map((&sg, ncd, &sdc), (&tg, ncd, &tdc), |se, te, sd, _| {
        (se.j == te.stratum()).then(|| Matrix::identity(sd).scale(&split_sign(&te.i, &te.j)))
    })
}

/// Res^k of a class in column −k; Res⁰ is the identity.
pub fn higher_residue(ncd: &NcdDescriptor, p: i32, cls: &WeightGradedClass, k: usize) -> Result<ResidueClass> {
    if cls.a != -(k as i32) || k > ncd.components {
        return Err(GysinError::WrongColumn { k, got: cls.a });
    }
    let tg = Grid::new(ncd, p, k);
    let tdc = tg.build(ncd)?;
    let pi = residue_map(ncd, p, k)?;
    let t = cls.a + cls.b;
    let v = if cls.rep.rows() == 0 { Matrix::zeros(pi.target.dim(t), 1) } else { pi.at(t).mul(&cls.rep) };
    let e = e_infinity(&column_filtration(&tdc)?);
    let (coords, rep) = match e.entries.get(&(cls.a, cls.b)) {
        Some(entry) => (entry.coords(&v).col(0), v),
        None => (vec![], v),
    };
    Ok(ResidueClass { depth: k, b: cls.b, twist: p - k as i32, target: tdc.reindex(k as i32, 0), coords, rep })
}

/// Chain map s𝒦(p) → s𝒦'(p) (depth 0) or between depth-k residue grids.
pub fn induced_gysin_map(src: &NcdDescriptor, tgt: &NcdDescriptor, f: &NcdMorphism, p: i32, k: usize) -> Result<ChainMap> {
    let sg = Grid::new(src, p, k);
    let tg = Grid::new(tgt, p, k);
    let sdc = sg.build(src)?;
    let tdc = tg.build(tgt)?;
    induced_by_blocks(src, tgt, f, (&sg, &sdc), (&tg, &tdc))
}

fn induced_by_blocks(
    src: &NcdDescriptor,
    tgt: &NcdDescriptor,
    f: &NcdMorphism,
    s: (&Grid, &DoubleComplex),
    t: (&Grid, &DoubleComplex),
) -> Result<ChainMap> {
    let (sg, sdc) = s;
    let (tg, tdc) = t;
    let ts = totalize(sdc)?;
    let tt = totalize(tdc)?;
    let lo = ts.lo().min(tt.lo());
    let hi = ts.hi().max(tt.hi());
    let mut maps = Vec::new();
    for deg in lo..=hi {
        let mut m = Matrix::zeros(tt.dim(deg), ts.dim(deg));
        for a in sdc.a_range.0..=sdc.a_range.1 {
            let b = deg - a;
            let Some(ci) = sg.column_index(a) else { continue };
            if sdc.dim(a, b) == 0 || tdc.dim(a, b) == 0 {
                continue;
            }
            let md = sg.model_degree(a, b);
            let soff = sg.offsets(src, ci, md);
            let toff = tg.offsets(tgt, ci, md);
            for (x, e) in sg.columns[ci].iter().enumerate() {
                let y = tg.columns[ci].binary_search(e).expect("same stratification");
                let blk = f.at(src, tgt, &e.stratum(), md);
                m.set_block(tdc.block_offset(a, b) + toff[y], sdc.block_offset(a, b) + soff[x], &blk);
            }
        }
        maps.push(m);
    }
    Ok(ChainMap::new(ts, tt, lo, maps)?)
}

/// N^k = Σ_{|K| = k} im{C(Y_K) → C(X)} under composite pushforwards, k ≥ 1.
pub fn pushforward_coniveau(ncd: &NcdDescriptor) -> Vec<DegreeMaps> {
    let x = &ncd.models[&vec![]];
    let mut levels = Vec::new();
    for k in 1..=ncd.components {
        let mut lv = DegreeMaps::new();
        for m in x.lo()..=x.hi() {
            lv.insert(m, Matrix::zeros(x.dim(m), 0));
        }
        for (s, c) in ncd.models.iter().filter(|(s, _)| s.len() == k) {
            for m in c.lo()..=c.hi() {
                let mut img = Matrix::identity(c.dim(m));
                let mut cur = s.clone();
                let mut deg = m;
                while let Some(&i) = cur.last() {
                    img = ncd.pushforward(&cur, i, deg).mul(&img);
                    cur.pop();
                    deg += 2;
                }
                if let Some(acc) = lv.get_mut(&deg) {
                    *acc = span_basis(&acc.hstack(&img));
                }
            }
        }
        levels.push(lv);
    }
    levels
}

/// The coniveau filtration N^a on the X-model, with total degree m − 2p.
pub fn coniveau_filtration(ncd: &NcdDescriptor, p: i32) -> Result<FilteredCochainComplex> {
    let x = ncd.models[&vec![]].shift(2 * p);
    let top = ncd.coniveau.len() as i32 + 1;
    let mut filt = Vec::new();
    for t in x.lo()..=x.hi() {
        let m = t + 2 * p;
        let mut lv = vec![Matrix::identity(x.dim(t))];
        for (a, level) in ncd.coniveau.iter().enumerate() {
            let n = level.get(&m).cloned().unwrap_or_else(|| Matrix::zeros(x.dim(t), 0));
            if n.rows() != x.dim(t) {
                return Err(GysinError::DimensionMismatch(format!("N^{} in degree {m}", a + 1)));
            }
            lv.push(n);
        }
        lv.push(Matrix::zeros(x.dim(t), 0));
        filt.push(lv);
    }
    FilteredCochainComplex::new(x, 0, top, filt).map_err(|e| match e {
        ComplexError::NotAFiltration(s) => GysinError::NotAFiltration(s),
        other => GysinError::Complex(other),
    })
}

/// Pages E_0 … E_{r_max} of the coniveau spectral sequence; d_r realizes ′Res^r.
pub fn coniveau_pages(ncd: &NcdDescriptor, p: i32, r_max: i32) -> Result<Vec<SpectralSequencePage>> {
    Ok(spectral_pages(&coniveau_filtration(ncd, p)?, r_max))
}

/// Number of nonzero graded pieces of the filtration induced on cohomology
/// (columns with a nonzero E_∞ entry), per filtered complex.
pub fn graded_length(f: &FilteredCochainComplex) -> usize {
    let e = e_infinity(f);
    let mut cols: Vec<i32> = e.nonzero().into_iter().map(|(a, _, _)| a).collect();
    cols.sort_unstable();
    cols.dedup();
    cols.len()
}

/// Weight and coniveau lengths side by side; report only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiltrationLengths {
    pub weight: usize,
    pub coniveau: usize,
}

pub fn compare_filtration_lengths(ncd: &NcdDescriptor, p: i32) -> Result<FiltrationLengths> {
    let w = weight_filtration(&build_gysin(ncd, p)?)?;
    let c = coniveau_filtration(ncd, p)?;
    Ok(FiltrationLengths { weight: graded_length(&w), coniveau: graded_length(&c) })
}

/// Nonzero d_r with r ≥ r_min out of rows b < 0, as (r, a, b, rank).
pub fn higher_differential_ranks(pages: &[SpectralSequencePage], r_min: i32) -> Vec<(i32, i32, i32, usize)> {
    let mut out = Vec::new();
    for pg in pages.iter().filter(|pg| pg.r >= r_min) {
        for (&(a, b), m) in &pg.d {
            let rk = m.rank();
            if b < 0 && rk > 0 {
                out.push((pg.r, a, b, rk));
            }
        }
    }
    out
}

fn conjugated(rng: &mut Rng8, c: &CochainComplex) -> (CochainComplex, DegreeMaps) {
    let g: DegreeMaps = (c.lo()..=c.hi()).map(|m| (m, invertible(rng, c.dim(m)))).collect();
    let dims = (c.lo()..=c.hi()).map(|m| c.dim(m)).collect();
    let ds = (c.lo()..=c.hi())
        .map(|m| {
            let up = g.get(&(m + 1)).cloned().unwrap_or_else(|| Matrix::identity(c.dim(m + 1)));
            up.mul(&c.d(m)).mul(&inverse(&g[&m]))
        })
        .collect();
    (CochainComplex::new(c.lo(), dims, ds).expect("conjugate of a complex"), g)
}

/// A random model with `components` components. Strata beyond the
/// singletons and {1, 2} are kept with probability 3/4 when their faces are.
/// Each Y_K is ⊕_{L ⊇ K} G_L[−2(|L| − |K|)] ⊕ Z_K with random complexes
/// G_L, Z_K; pushforwards are the identity on every G_L and zero on Z_K,
/// and the whole is hidden by random changes of basis. `skew` doubles the
/// G_{12} part of ι_*: Y₁ → X so that Gy² ≠ 0.
pub fn random_ncd(rng: &mut Rng8, components: usize, max_total: usize, skew: bool) -> NcdDescriptor {
    use rand::Rng;
    let all: Vec<usize> = (1..=components).collect();
    let mut strata: Vec<Stratum> = vec![vec![]];
    for size in 1..=components {
        for k in subsets(&all, size) {
            let faces_ok = k.iter().all(|&i| strata.contains(&without(&k, i)));
            let forced = size == 1 || k == [1, 2];
            if faces_ok && (forced || rng.gen_bool(0.75)) {
                strata.push(k);
            }
        }
    }
    let gens: BTreeMap<Stratum, CochainComplex> =
        strata.iter().map(|k| (k.clone(), random_complex(rng, 0, 2, max_total))).collect();
    let zs: BTreeMap<Stratum, CochainComplex> =
        strata.iter().map(|k| (k.clone(), random_complex(rng, 0, 2 * (components - k.len()) as i32 + 2, max_total))).collect();
    // summands of Y_K: (L, shifted G_L) for L ⊇ K in stratum order, then Z_K
    let parts = |k: &Stratum| -> Vec<(Option<Stratum>, CochainComplex)> {
        let mut v: Vec<(Option<Stratum>, CochainComplex)> = strata
            .iter()
            .filter(|l| k.iter().all(|i| l.contains(i)))
            .map(|l| (Some(l.clone()), gens[l].shift(-2 * (l.len() - k.len()) as i32)))
            .collect();
        v.push((None, zs[k].clone()));
        v
    };
    let mut models = BTreeMap::new();
    for k in &strata {
        let cs: Vec<CochainComplex> = parts(k).into_iter().map(|x| x.1).collect();
        models.insert(k.clone(), direct_sum(&cs));
    }
    let mut gysin = BTreeMap::new();
    for k in strata.iter().filter(|k| !k.is_empty()) {
        let src = parts(k);
        let src_c = &models[k];
        for &i in k {
            let t = without(k, i);
            let tgt = parts(&t);
            let tgt_c = &models[&t];
            let mut dm = DegreeMaps::new();
            for m in src_c.lo()..=src_c.hi() {
                let mut x = Matrix::zeros(tgt_c.dim(m + 2), src_c.dim(m));
                let mut col = 0;
                for (l, c) in &src {
                    if let Some(l) = l {
                        let row: usize = tgt.iter().take_while(|(l2, _)| l2.as_ref() != Some(l)).map(|(_, c2)| c2.dim(m + 2)).sum();
                        let scale = if skew && *l == [1, 2] && *k == [1] { qi(2) } else { qi(1) };
                        x.set_block(row, col, &Matrix::identity(c.dim(m)).scale(&scale));
                    }
                    col += c.dim(m);
                }
                dm.insert(m, x);
            }
            gysin.insert((k.clone(), i), dm);
        }
    }
    let split = NcdDescriptor::new(components, models, gysin).expect("split model is valid");
    random_isomorphic(rng, &split).0
}

/// `random_ncd` with two components, all four strata present.
pub fn random_two_component(rng: &mut Rng8, max_total: usize, skew: bool) -> NcdDescriptor {
    random_ncd(rng, 2, max_total, skew)
}

/// A random change of basis of every model, as a descriptor and the
/// isomorphism onto it.
pub fn random_isomorphic(rng: &mut Rng8, ncd: &NcdDescriptor) -> (NcdDescriptor, NcdMorphism) {
    let mut gs = BTreeMap::new();
    for (k, c) in ncd.models() {
        gs.insert(k.clone(), conjugated(rng, c).1);
    }
    ncd.conjugate(&gs).expect("conjugation preserves validity")
}
