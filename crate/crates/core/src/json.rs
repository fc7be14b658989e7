//! JSON and text formats for complexes, double complexes and pages.
//!
//! Rationals are strings `"a/b"` (or `"a"`); matrices are lists of rows.
//!
//! ```text
//! complex: {"degrees": [lo, hi], "dims": {"k": n}, "d": {"k": [[..], ..]}}
//! double:  {"bidegrees": [[a0, a1], [b0, b1]], "dims": {"a,b": n},
//!           "horizontal": {"a,b": [[..]]}, "vertical": {"a,b": [[..]]}}
//! ```
//! Missing dims are 0 and missing maps are zero maps.

use crate::complex::{CochainComplex, ComplexError, DoubleComplex, SpectralSequencePage};
use crate::linalg::*;
use serde_json::{json, Map, Value};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error(transparent)]
    Complex(#[from] ComplexError),
}

pub type Result<T> = std::result::Result<T, FormatError>;

fn bad(s: impl Into<String>) -> FormatError {
    FormatError::Malformed(s.into())
}

pub fn rational_value(v: &Value) -> Result<Rational> {
    match v {
        Value::String(s) => parse_rational(s).ok_or_else(|| bad(format!("bad rational {s:?}"))),
        Value::Number(n) => n.as_i64().map(qi).ok_or_else(|| bad(format!("non-integer number {n}"))),
        _ => Err(bad(format!("expected rational, got {v}"))),
    }
}

/// A matrix of the given shape; a zero-row matrix may be given as `[]`.
pub fn matrix_from_value(v: &Value, rows: usize, cols: usize) -> Result<Matrix> {
    let rs = v.as_array().ok_or_else(|| bad("matrix must be a list of rows"))?;
    if rs.len() != rows {
        return Err(bad(format!("matrix has {} rows, expected {rows}", rs.len())));
    }
    let mut m = Matrix::zeros(rows, cols);
    for (i, r) in rs.iter().enumerate() {
        let r = r.as_array().ok_or_else(|| bad("matrix row must be a list"))?;
        if r.len() != cols {
            return Err(bad(format!("matrix row has {} entries, expected {cols}", r.len())));
        }
        for (j, x) in r.iter().enumerate() {
            m.set(i, j, rational_value(x)?);
        }
    }
    Ok(m)
}

pub fn matrix_to_value(m: &Matrix) -> Value {
    Value::Array(
        (0..m.rows())
            .map(|i| Value::Array((0..m.cols()).map(|j| Value::String(format_rational(m.get(i, j)))).collect()))
            .collect(),
    )
}

fn int_pair(v: &Value, what: &str) -> Result<(i32, i32)> {
    let a = v.as_array().filter(|a| a.len() == 2).ok_or_else(|| bad(format!("{what} must be [lo, hi]")))?;
    let lo = a[0].as_i64().ok_or_else(|| bad(format!("{what}: integer expected")))? as i32;
    let hi = a[1].as_i64().ok_or_else(|| bad(format!("{what}: integer expected")))? as i32;
    if lo > hi {
        return Err(bad(format!("{what}: lo > hi")));
    }
    Ok((lo, hi))
}

fn table<'a>(v: &'a Value, key: &str) -> Result<Option<&'a Map<String, Value>>> {
    match v.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Object(m)) => Ok(Some(m)),
        Some(_) => Err(bad(format!("{key} must be an object"))),
    }
}

fn parse_key1(k: &str) -> Result<i32> {
    k.trim().parse().map_err(|_| bad(format!("bad degree key {k:?}")))
}

fn parse_key2(k: &str) -> Result<(i32, i32)> {
    let (a, b) = k.split_once(',').ok_or_else(|| bad(format!("bad bidegree key {k:?}")))?;
    Ok((parse_key1(a)?, parse_key1(b)?))
}

pub fn complex_from_value(v: &Value) -> Result<CochainComplex> {
    let (lo, hi) = int_pair(v.get("degrees").ok_or_else(|| bad("missing degrees"))?, "degrees")?;
    let mut dims = vec![0usize; (hi - lo + 1) as usize];
    if let Some(t) = table(v, "dims")? {
        for (k, n) in t {
            let k = parse_key1(k)?;
            if k < lo || k > hi {
                return Err(bad(format!("dim key {k} outside degrees")));
            }
            dims[(k - lo) as usize] = n.as_u64().ok_or_else(|| bad("dims must be non-negative integers"))? as usize;
        }
    }
    let dim = |k: i32| if k < lo || k > hi { 0 } else { dims[(k - lo) as usize] };
    let mut ds: Vec<Matrix> = (lo..=hi).map(|k| Matrix::zeros(if k == hi { 0 } else { dim(k + 1) }, dim(k))).collect();
    if let Some(t) = table(v, "d")? {
        for (k, m) in t {
            let k = parse_key1(k)?;
            if k < lo || k >= hi {
                return Err(bad(format!("differential key {k} outside degrees")));
            }
            ds[(k - lo) as usize] = matrix_from_value(m, dim(k + 1), dim(k))?;
        }
    }
    Ok(CochainComplex::new(lo, dims, ds)?)
}

pub fn complex_to_value(c: &CochainComplex) -> Value {
    let mut dims = Map::new();
    let mut d = Map::new();
    for k in c.lo()..=c.hi() {
        dims.insert(k.to_string(), json!(c.dim(k)));
        if k < c.hi() && !c.d(k).is_zero() {
            d.insert(k.to_string(), matrix_to_value(&c.d(k)));
        }
    }
    json!({"degrees": [c.lo(), c.hi()], "dims": dims, "d": d})
}

pub fn double_complex_from_value(v: &Value) -> Result<DoubleComplex> {
    let bi = v.get("bidegrees").and_then(|b| b.as_array()).filter(|b| b.len() == 2).ok_or_else(|| bad("bidegrees must be [[a0, a1], [b0, b1]]"))?;
    let ar = int_pair(&bi[0], "bidegrees[0]")?;
    let br = int_pair(&bi[1], "bidegrees[1]")?;
    let mut dc = DoubleComplex::new(ar, br);
    let inside = |(a, b): (i32, i32)| a >= ar.0 && a <= ar.1 && b >= br.0 && b <= br.1;
    if let Some(t) = table(v, "dims")? {
        for (k, n) in t {
            let ab = parse_key2(k)?;
            if !inside(ab) {
                return Err(bad(format!("dim key {k} outside bidegrees")));
            }
            dc.set_dim(ab.0, ab.1, n.as_u64().ok_or_else(|| bad("dims must be non-negative integers"))? as usize);
        }
    }
    for (key, horiz) in [("horizontal", true), ("vertical", false)] {
        if let Some(t) = table(v, key)? {
            for (k, m) in t {
                let (a, b) = parse_key2(k)?;
                if !inside((a, b)) {
                    return Err(bad(format!("{key} key {k} outside bidegrees")));
                }
                let (ta, tb) = if horiz { (a + 1, b) } else { (a, b + 1) };
                let m = matrix_from_value(m, dc.dim(ta, tb), dc.dim(a, b))?;
                if horiz {
                    dc.set_horizontal(a, b, m)
                } else {
                    dc.set_vertical(a, b, m)
                }
            }
        }
    }
    dc.validate()?;
    Ok(dc)
}

pub fn double_complex_to_value(dc: &DoubleComplex) -> Value {
    let (a0, a1) = dc.a_range;
    let (b0, b1) = dc.b_range;
    let mut dims = Map::new();
    let mut h = Map::new();
    let mut vt = Map::new();
    for a in a0..=a1 {
        for b in b0..=b1 {
            let key = format!("{a},{b}");
            if dc.dim(a, b) > 0 {
                dims.insert(key.clone(), json!(dc.dim(a, b)));
            }
            if !dc.horizontal(a, b).is_zero() {
                h.insert(key.clone(), matrix_to_value(&dc.horizontal(a, b)));
            }
            if !dc.vertical(a, b).is_zero() {
                vt.insert(key, matrix_to_value(&dc.vertical(a, b)));
            }
        }
    }
    json!({"bidegrees": [[a0, a1], [b0, b1]], "dims": dims, "horizontal": h, "vertical": vt})
}

/// Nonzero entries and nonzero differentials of a page.
pub fn page_to_value(pg: &SpectralSequencePage) -> Value {
    let entries: Vec<Value> = pg.nonzero().into_iter().map(|(p, q, n)| json!({"p": p, "q": q, "dim": n})).collect();
    let d: Vec<Value> = pg
        .d
        .iter()
        .filter(|(_, m)| !m.is_zero())
        .map(|(&(p, q), m)| json!({"p": p, "q": q, "rank": m.rank(), "matrix": matrix_to_value(m)}))
        .collect();
    json!({"r": pg.r, "entries": entries, "d": d})
}

/// Dimension grid with q decreasing downwards and p increasing to the right.
pub fn page_grid_text(pg: &SpectralSequencePage) -> String {
    let nz = pg.nonzero();
    if nz.is_empty() {
        return format!("E_{}: zero\n", pg.r);
    }
    let (p0, p1) = (nz.iter().map(|e| e.0).min().unwrap(), nz.iter().map(|e| e.0).max().unwrap());
    let (q0, q1) = (nz.iter().map(|e| e.1).min().unwrap(), nz.iter().map(|e| e.1).max().unwrap());
    let mut s = format!("E_{}  q\\p", pg.r);
    for p in p0..=p1 {
        s.push_str(&format!("{p:>5}"));
    }
    s.push('\n');
    for q in (q0..=q1).rev() {
        s.push_str(&format!("{:>9}", q));
        for p in p0..=p1 {
            let n = pg.dim(p, q);
            if n == 0 {
                s.push_str("    .");
            } else {
                s.push_str(&format!("{n:>5}"));
            }
        }
        s.push('\n');
    }
    s
}
