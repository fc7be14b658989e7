//! KLM currents of symbol cycles: the triple (T, Ω, R), pairings of R with
//! membranes, numerical Stokes checks, slices over a product base and
//! iterated dlog residues.
//!
//! Conventions (fixed once for the whole crate):
//! * log is the principal branch, cut along ℝ⁻, log 1 = 0.
//! * T_f = f⁻¹(ℝ⁻) is oriented from f = ∞ toward f = 0.
//! * d on a degree-k current is (dT)(φ) = (−1)^{k+1} T(dφ).
//! * R{f₁..fₙ} = Σ_k s_k (2πi)^{k−1} log f_k dlog f_{k+1}∧…∧dlog f_n δ_{T_{f₁}∩…∩T_{f_{k−1}}}
//!   with s_k = (−1)^{k−1}.
//! * A path γ meets T_f with sign +1 where Im f goes from + to − (Re f < 0).
//!
//! With these, d[log f] = dlog f − 2πi δ_T, and on a curve
//! d R{f₁,f₂} = −(2πi)² δ_{T₁}∧δ_{T₂} + 2πi R{∂_B}, where
//! R{∂_B}(ψ) = Σ ord_p(f₂) log f₁(p) ψ(p) − Σ ord_p(f₁) log f₂(p) ψ(p).

use crate::cycles::{restricted_eq, BaseKind, BaseVariety, ParamCycle};
use crate::cyclo::CycloNum;
use crate::linalg::Rational;
use crate::periods::{two_pi_i_pow, PeriodValue};
use crate::poly::{complex_roots, Poly, RatFn, Restricted};
use crate::quad::{integrate, integrate_region, Node, PathPoint, Point2, QuadError, QuadResult, QuadratureSettings, Region, Segment, C64};
use num_traits::{One, Zero};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KlmError {
    #[error("not a symbol graph: {0}")]
    NotASymbolGraph(String),
    #[error("non-integrable singularity on the membrane: {0}")]
    SingularOnMembrane(String),
    #[error("intersection with a T-locus unresolved: {0}")]
    IntersectionUnresolved(String),
    #[error("strata and membranes are misaligned: {0}")]
    MisalignedStrata(String),
    #[error("base is not a product of two lines: {0}")]
    NonProductBase(String),
    #[error("flag coordinate x{0} is not in the polar locus")]
    FlagNotInPolarLocus(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

pub type Result<T> = std::result::Result<T, KlmError>;

fn quad_err(e: QuadError, what: &str) -> KlmError {
    match e {
        QuadError::NonIntegrableSingularity(m) => KlmError::SingularOnMembrane(format!("{what}: {m}")),
        e => KlmError::Quad(e),
    }
}

/// s_k = (−1)^{k−1}.
pub fn term_sign(k: usize) -> i32 {
    if k % 2 == 1 {
        1
    } else {
        -1
    }
}

// ---------- symbolic layer ----------

/// One term sign·(2πi)^twist · log f_k · dlog f_{k+1}∧… · δ_{T_{f₁}∩…}
/// (indices are 0-based into the function list).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RTerm {
    pub sign: i32,
    pub twist: u32,
    pub log_index: usize,
    pub dlog_indices: Vec<usize>,
    pub delta_indices: Vec<usize>,
}

impl RTerm {
    pub fn coefficient(&self) -> C64 {
        two_pi_i_pow(self.twist as i32) * self.sign as f64
    }

    /// Each of 0..n occurs in exactly one role.
    pub fn is_partition(&self, n: usize) -> bool {
        let mut seen = vec![0u32; n];
        for &i in self.delta_indices.iter().chain([self.log_index].iter()).chain(self.dlog_indices.iter()) {
            if i >= n {
                return false;
            }
            seen[i] += 1;
        }
        seen.iter().all(|&c| c == 1)
    }
}

/// R{f₁..fₙ} over a base variety, expanded into [`RTerm`]s.
#[derive(Clone, Debug)]
pub struct SymbolCurrent {
    pub base: Arc<BaseVariety>,
    pub params: Vec<String>,
    pub functions: Vec<RatFn>,
    pub terms: Vec<RTerm>,
}

impl SymbolCurrent {
    pub fn new(base: Arc<BaseVariety>, functions: Vec<RatFn>) -> Result<Self> {
        let params = base.params();
        if let Some(f) = functions.iter().find(|f| f.nvars() != params.len()) {
            return Err(KlmError::DimensionMismatch(format!("function in {} variables over a {}-dimensional base", f.nvars(), params.len())));
        }
        if let Some(i) = functions.iter().position(|f| f.is_zero()) {
            return Err(KlmError::NotASymbolGraph(format!("f{} is identically 0", i + 1)));
        }
        let n = functions.len();
        let terms = (1..=n)
            .map(|k| RTerm {
                sign: term_sign(k),
                twist: (k - 1) as u32,
                log_index: k - 1,
                dlog_indices: (k..n).collect(),
                delta_indices: (0..k - 1).collect(),
            })
            .collect();
        Ok(SymbolCurrent { base, params, functions, terms })
    }

    /// The zero current.
    pub fn zero(base: Arc<BaseVariety>) -> Self {
        let params = base.params();
        SymbolCurrent { base, params, functions: vec![], terms: vec![] }
    }

    pub fn n(&self) -> usize {
        self.functions.len()
    }

    /// Real degree of R: n − 1.
    pub fn degree(&self) -> usize {
        self.n().saturating_sub(1)
    }

    fn fname(&self, i: usize) -> String {
        self.functions[i].fmt_with(&self.params)
    }
}

impl fmt::Display for SymbolCurrent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (j, t) in self.terms.iter().enumerate() {
            match (j, t.sign < 0) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            match t.twist {
                0 => {}
                1 => write!(f, "2πi·")?,
                k => write!(f, "(2πi)^{k}·")?,
            }
            write!(f, "log({})", self.fname(t.log_index))?;
            for &i in &t.dlog_indices {
                write!(f, "·dlog({})", self.fname(i))?;
            }
            if !t.delta_indices.is_empty() {
                let ts: Vec<String> = t.delta_indices.iter().map(|&i| format!("T({})", self.fname(i))).collect();
                write!(f, "·δ[{}]", ts.join("∩"))?;
            }
        }
        Ok(())
    }
}

/// T carried as the constraint list {f_i ∈ ℝ⁻ for i in indices}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TChain {
    pub indices: Vec<usize>,
}

/// dlog f_{i₁} ∧ … in the listed order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DlogWedge {
    pub indices: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct CurrentTriple {
    pub t: TChain,
    pub omega: DlogWedge,
    pub r: SymbolCurrent,
}

impl CurrentTriple {
    pub fn n(&self) -> usize {
        self.r.n()
    }
}

impl fmt::Display for CurrentTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (0..self.n()).map(|i| self.r.fname(i)).collect();
        let t: Vec<String> = self.t.indices.iter().map(|&i| format!("{} ∈ ℝ⁻", names[i])).collect();
        let o: Vec<String> = self.omega.indices.iter().map(|&i| format!("dlog({})", names[i])).collect();
        writeln!(f, "T: {{{}}}", t.join(", "))?;
        writeln!(f, "Ω: {}", if o.is_empty() { "1".to_string() } else { o.join("∧") })?;
        write!(f, "R: {}", self.r)
    }
}

/// The triple of a cycle that is the graph of (f₁..fₙ) over its base.
pub fn klm_triple(z: &ParamCycle) -> Result<CurrentTriple> {
    if z.params != z.base.params() {
        return Err(KlmError::NotASymbolGraph(format!("parameters ({}) differ from the base parameters", z.params.join(", "))));
    }
    let par = z.base.parametrization();
    if par.len() != z.x.len() || !par.iter().zip(&z.x).all(|(a, b)| restricted_eq(a, b)) {
        return Err(KlmError::NotASymbolGraph("the base map is not the base parametrization".into()));
    }
    let r = SymbolCurrent::new(z.base.clone(), z.cube.clone())?;
    let n = r.n();
    Ok(CurrentTriple { t: TChain { indices: (0..n).collect() }, omega: DlogWedge { indices: (0..n).collect() }, r })
}

// ---------- numerical evaluation of rational functions ----------

/// A coordinate point that can report z_v − a accurately.
trait Coords {
    fn z(&self) -> &[C64];
    fn diff(&self, v: usize, a: C64) -> C64 {
        self.z()[v] - a
    }
    /// ln |z_v − a|
    fn ln_abs_diff(&self, v: usize, a: C64) -> f64 {
        self.diff(v, a).norm().ln()
    }
}

struct Plain<'a>(&'a [C64]);

impl Coords for Plain<'_> {
    fn z(&self) -> &[C64] {
        self.0
    }
}

/// A point on a segment in coordinate `var`, other coordinates fixed.
struct OnPath {
    z: Vec<C64>,
    var: usize,
    pp: PathPoint,
}

impl Coords for OnPath {
    fn z(&self) -> &[C64] {
        &self.z
    }
    fn diff(&self, v: usize, a: C64) -> C64 {
        if v == self.var {
            -self.pp.offset_from(a)
        } else {
            self.z[v] - a
        }
    }
}

/// A point of [0,1]² with exact complements.
struct OnSquare {
    z: [C64; 2],
    bar: [f64; 2],
}

impl OnSquare {
    fn new(p: &Point2) -> Self {
        OnSquare { z: [C64::new(p.x, 0.0), C64::new(p.y, 0.0)], bar: [p.xbar, p.ybar] }
    }
}

impl Coords for OnSquare {
    fn z(&self) -> &[C64] {
        &self.z
    }
    fn ln_abs_diff(&self, v: usize, a: C64) -> f64 {
        if a == C64::new(0.0, 0.0) && self.z[v].re > 0.5 {
            (-self.bar[v]).ln_1p()
        } else {
            self.diff(v, a).norm().ln()
        }
    }
    fn diff(&self, v: usize, a: C64) -> C64 {
        if a == C64::new(0.0, 0.0) {
            self.z[v]
        } else if a == C64::new(1.0, 0.0) {
            C64::new(-self.bar[v], 0.0)
        } else {
            self.z[v] - a
        }
    }
}

/// 1/z without squaring |z| (which underflows for |z| < 1e-154).
fn recip(z: C64) -> C64 {
    let s = z.re.abs().max(z.im.abs());
    if s == 0.0 {
        return C64::new(f64::INFINITY, 0.0);
    }
    let w = z / s;
    w.conj() / (w.norm_sqr() * s)
}

#[derive(Clone, Debug)]
enum NumFactor {
    /// lead·(v − root)
    Linear { var: usize, lead: C64, root: C64 },
    General { p: Poly, grads: Vec<Poly> },
}

impl NumFactor {
    fn value(&self, at: &dyn Coords) -> C64 {
        match self {
            NumFactor::Linear { var, lead, root } => lead * at.diff(*var, *root),
            NumFactor::General { p, .. } => p.eval_complex(at.z()),
        }
    }
    fn ln_abs(&self, at: &dyn Coords) -> f64 {
        match self {
            NumFactor::Linear { var, lead, root } => lead.norm().ln() + at.ln_abs_diff(*var, *root),
            NumFactor::General { p, .. } => p.eval_complex(at.z()).norm().ln(),
        }
    }
    fn dlog(&self, v: usize, at: &dyn Coords) -> C64 {
        match self {
            NumFactor::Linear { var, root, .. } => {
                if *var == v {
                    recip(at.diff(*var, *root))
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            NumFactor::General { p, grads } => grads[v].eval_complex(at.z()) / p.eval_complex(at.z()),
        }
    }
}

/// A rational function prepared for accurate complex evaluation.
#[derive(Clone, Debug)]
struct NumFn {
    coef: C64,
    factors: Vec<(NumFactor, i32)>,
    num: Poly,
    den: Poly,
}

impl NumFn {
    fn new(f: &RatFn) -> Self {
        let nv = f.nvars();
        let factors = f
            .factors()
            .iter()
            .map(|(p, e)| {
                let used = p.used_vars();
                let nf = if p.total_degree() == 1 && used.len() == 1 {
                    let v = used[0];
                    let cs = p.coeffs_in(v);
                    let c0 = cs[0].as_constant().unwrap_or_else(CycloNum::zero).embed();
                    let c1 = cs[1].as_constant().unwrap_or_else(CycloNum::one).embed();
                    NumFactor::Linear { var: v, lead: c1, root: -c0 / c1 }
                } else {
                    NumFactor::General { p: p.clone(), grads: (0..nv).map(|v| p.derivative(v)).collect() }
                };
                (nf, *e)
            })
            .collect();
        let (num, den) = f.num_den();
        NumFn { coef: f.coef().embed(), factors, num, den }
    }

    fn value(&self, at: &dyn Coords) -> C64 {
        self.factors.iter().fold(self.coef, |acc, (p, e)| {
            let v = p.value(at);
            acc * if *e < 0 { recip(v).powi(-e) } else { v.powi(*e) }
        })
    }

    /// Principal log, assembled factor by factor so that it stays finite
    /// and accurate where f over- or underflows or |f| is close to 1.
    fn log(&self, at: &dyn Coords) -> C64 {
        let mut re = self.coef.norm().ln();
        let mut im = self.coef.arg();
        for (p, e) in &self.factors {
            re += p.ln_abs(at) * *e as f64;
            im += p.value(at).arg() * *e as f64;
        }
        let turns = ((im - PI) / (2.0 * PI)).ceil();
        C64::new(re, im - 2.0 * PI * turns)
    }

    /// ∂_v log f.
    fn dlog(&self, v: usize, at: &dyn Coords) -> C64 {
        self.factors.iter().fold(C64::new(0.0, 0.0), |acc, (p, e)| acc + p.dlog(v, at) * *e as f64)
    }

    /// Zeros (ord > 0) and poles (ord < 0) in ℂ of a one-variable function.
    fn divisor_1d(&self) -> Vec<(C64, i32)> {
        let mut out = vec![];
        for (p, e) in &self.factors {
            match p {
                NumFactor::Linear { root, .. } => out.push((*root, *e)),
                NumFactor::General { p, .. } => {
                    if let Some(cs) = p.as_univariate(0) {
                        let cs: Vec<C64> = cs.iter().map(|c| c.embed()).collect();
                        out.extend(complex_roots(&cs).into_iter().map(|r| (r, *e)));
                    }
                }
            }
        }
        out
    }

    /// Ascending complex coefficients of numerator and denominator in one variable.
    fn num_den_1d(&self) -> (Vec<C64>, Vec<C64>) {
        let emb = |p: &Poly| -> Vec<C64> { p.as_univariate(0).unwrap_or_default().iter().map(|c| c.embed()).collect() };
        (emb(&self.num), emb(&self.den))
    }
}

fn on_ray(w: C64) -> bool {
    w.re < 0.0 && w.im.abs() <= 1e-13 * w.norm()
}

fn seg_point(seg: &Segment, s: f64) -> PathPoint {
    PathPoint { z: seg.point(s), s, sbar: 1.0 - s, from: seg.from, to: seg.to }
}

/// Fixes all coordinates but `var`, which runs along a path.
#[derive(Clone, Debug)]
struct Line1 {
    fixed: Vec<C64>,
    var: usize,
}

impl Line1 {
    fn curve() -> Self {
        Line1 { fixed: vec![C64::new(0.0, 0.0)], var: 0 }
    }
    fn at(&self, pp: PathPoint) -> OnPath {
        let mut z = self.fixed.clone();
        z[self.var] = pp.z;
        OnPath { z, var: self.var, pp }
    }
}

/// Crossings of T_f by a segment: (parameter, sign), sign +1 when Im f goes + → −.
fn crossings(f: &NumFn, line: &Line1, seg: &Segment) -> Result<Vec<(f64, i32)>> {
    const SAMPLES: usize = 256;
    let val = |s: f64| f.value(&line.at(seg_point(seg, s)));
    let up = |h: f64| h >= 0.0;
    let mut out = vec![];
    let mut prev_on = false;
    for j in 0..=SAMPLES {
        let w = val(j as f64 / SAMPLES as f64);
        let on = on_ray(w);
        if on && (j == 0 || j == SAMPLES) {
            return Err(KlmError::IntersectionUnresolved(format!("membrane endpoint {} lies on T", seg.point(j as f64 / SAMPLES as f64))));
        }
        if on && prev_on {
            return Err(KlmError::IntersectionUnresolved("membrane runs inside T".into()));
        }
        prev_on = on;
    }
    let mut ha = val(0.0).im;
    for j in 0..SAMPLES {
        let (a, b) = (j as f64 / SAMPLES as f64, (j + 1) as f64 / SAMPLES as f64);
        let hb = val(b).im;
        if up(ha) != up(hb) {
            let (mut lo, mut hi) = (a, b);
            while hi - lo > 1e-14 {
                let mid = 0.5 * (lo + hi);
                if up(val(mid).im) == up(ha) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let s = 0.5 * (lo + hi);
            let w = val(s);
            if w.norm() < 1e-12 {
                // a membrane leaving a zero of f away from T only flips Im f numerically
                let inner = if s < 0.5 { b } else { a };
                let at_end = s < 1e-10 || 1.0 - s < 1e-10;
                if at_end && val(inner).re >= 0.0 {
                    ha = hb;
                    continue;
                }
                return Err(KlmError::IntersectionUnresolved(format!("membrane passes through a zero of the function at {}", seg.point(s))));
            }
            if w.re < 0.0 && w.norm() < 1e12 {
                if s < 1e-10 || 1.0 - s < 1e-10 {
                    return Err(KlmError::IntersectionUnresolved(format!("crossing within 1e-10 of the endpoint {}", seg.point(s.round()))));
                }
                out.push((s, if up(ha) { 1 } else { -1 }));
            }
        }
        ha = hb;
    }
    Ok(out)
}

/// ∫_γ c_s·log f₁ dlog f₂ + c_δ·Σ_{γ∩T_{f₁}} ε log f₂ along `line`.
#[allow(clippy::too_many_arguments)]
fn pair_path_n2(f1: &NumFn, f2: &NumFn, line: &Line1, path: &[Segment], splits: &[C64], poles: &[C64], c_smooth: C64, c_delta: C64, cfg: &QuadratureSettings) -> Result<QuadResult> {
    let mut total = QuadResult { value: C64::new(0.0, 0.0), error: 0.0, evals: 0 };
    let tol = cfg.tol / path.len().max(1) as f64;
    for seg in path {
        let dz = seg.to - seg.from;
        if dz.norm() == 0.0 {
            continue;
        }
        // parameter of the foot point, if it lies on the segment
        let foot = |c: C64| -> Option<f64> {
            let s = ((c - seg.from) / dz).re;
            let d = (seg.point(s.clamp(0.0, 1.0)) - c).norm();
            (d <= 1e-12 * (1.0 + c.norm())).then_some(s.clamp(0.0, 1.0))
        };
        // a pole at an end where f₁ = 1 is harmless: log f₁ vanishes to first order there
        let removable = |c: C64| -> bool {
            let s = match foot(c) {
                Some(s) if s == 0.0 || s == 1.0 => s,
                _ => return false,
            };
            (f1.value(&line.at(seg_point(seg, s))) - 1.0).norm() < 1e-12
        };
        if let Some(c) = poles.iter().find(|c| foot(**c).is_some() && !removable(**c)) {
            return Err(KlmError::SingularOnMembrane(format!("dlog pole at {c} on the path")));
        }
        let xs = crossings(f1, line, seg)?;
        for (s, eps) in &xs {
            let at = line.at(seg_point(seg, *s));
            total.value += c_delta * *eps as f64 * f2.log(&at);
        }
        let mut cuts: Vec<f64> = xs.iter().map(|(s, _)| *s).chain(splits.iter().filter_map(|c| foot(*c))).filter(|s| *s > 1e-12 && *s < 1.0 - 1e-12).collect();
        cuts.push(0.0);
        cuts.push(1.0);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
        for w in cuts.windows(2) {
            let sub = Segment::new(if w[0] == 0.0 { seg.from } else { seg.point(w[0]) }, if w[1] == 1.0 { seg.to } else { seg.point(w[1]) });
            let sub_tol = tol * (w[1] - w[0]).max(1e-3);
            let r = integrate(
                |n: Node| {
                    let pp = PathPoint { z: sub.point(n.x), s: n.from_a, sbar: n.to_b, from: sub.from, to: sub.to };
                    let at = line.at(pp);
                    f1.log(&at) * f2.dlog(line.var, &at) * pp.velocity()
                },
                0.0,
                1.0,
                sub_tol,
                cfg,
            )
            .map_err(|e| quad_err(e, "path integrand"))?;
            total.value += c_smooth * r.value;
            total.error += r.error;
            total.evals += r.evals;
        }
    }
    Ok(total)
}

// ---------- membranes ----------

#[derive(Clone, Debug, PartialEq)]
pub enum MembraneShape {
    /// Straight segments in the single base parameter.
    Path(Vec<Segment>),
    /// A real region in the two base parameters.
    Region(Region),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Membrane {
    pub shape: MembraneShape,
    pub orientation: i32,
}

impl Membrane {
    /// Polygonal path through the given points.
    pub fn path(points: &[C64]) -> Self {
        Membrane { shape: MembraneShape::Path(points.windows(2).map(|w| Segment::new(w[0], w[1])).collect()), orientation: 1 }
    }

    pub fn region(r: Region) -> Self {
        Membrane { shape: MembraneShape::Region(r), orientation: 1 }
    }

    pub fn reversed(&self) -> Self {
        Membrane { shape: self.shape.clone(), orientation: -self.orientation }
    }

    pub fn dimension(&self) -> usize {
        match self.shape {
            MembraneShape::Path(_) => 1,
            MembraneShape::Region(_) => 2,
        }
    }

    /// Parses `path z0 -> z1 -> …`, `region delta2`, `region square`,
    /// optionally prefixed by `reverse`. Complex literals: `1.5`, `-2i`, `0.5-0.25i`, `i`.
    pub fn parse(s: &str) -> std::result::Result<Membrane, String> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("reverse") {
            return Ok(Membrane::parse(rest)?.reversed());
        }
        if let Some(rest) = s.strip_prefix("path") {
            let pts = rest.split("->").map(parse_complex).collect::<std::result::Result<Vec<C64>, String>>()?;
            if pts.len() < 2 {
                return Err("a path needs at least two points".into());
            }
            return Ok(Membrane::path(&pts));
        }
        if let Some(rest) = s.strip_prefix("region") {
            return match rest.trim() {
                "delta2" => Ok(Membrane::region(Region::Delta)),
                "square" => Ok(Membrane::region(Region::UnitSquare)),
                other => Err(format!("unknown region '{other}'")),
            };
        }
        Err(format!("expected 'path', 'region' or 'reverse', found '{s}'"))
    }
}

impl fmt::Display for Membrane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.orientation < 0 {
            write!(f, "reverse ")?;
        }
        match &self.shape {
            MembraneShape::Path(segs) => {
                write!(f, "path")?;
                for (i, s) in segs.iter().enumerate() {
                    if i == 0 {
                        write!(f, " {}", fmt_complex(s.from))?;
                    }
                    write!(f, " -> {}", fmt_complex(s.to))?;
                }
                Ok(())
            }
            MembraneShape::Region(Region::Delta) => write!(f, "region delta2"),
            MembraneShape::Region(Region::UnitSquare) => write!(f, "region square"),
            MembraneShape::Region(Region::Rect { x0, x1, y0, y1 }) => write!(f, "region [{x0},{x1}]x[{y0},{y1}]"),
        }
    }
}

fn fmt_complex(z: C64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im < 0.0 {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

/// Parses `a`, `bi`, `a+bi`, `a-bi`, `i`, `-i`.
pub fn parse_complex(s: &str) -> std::result::Result<C64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err("empty complex literal".into());
    }
    let num = |u: &str| -> std::result::Result<f64, String> {
        match u {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => u.parse::<f64>().map_err(|_| format!("bad number '{u}' in '{s}'")),
        }
    };
    if let Some(body) = t.strip_suffix('i') {
        let b = body.as_bytes();
        let split = (1..b.len()).rev().find(|&k| (b[k] == b'+' || b[k] == b'-') && b[k - 1] != b'e' && b[k - 1] != b'E');
        return match split {
            Some(k) => Ok(C64::new(num(&body[..k])?, num(&body[k..])?)),
            None => Ok(C64::new(0.0, num(body)?)),
        };
    }
    Ok(C64::new(num(&t)?, 0.0))
}

// ---------- pairing ----------

/// ∫_γ R for a path on a curve (n = 2) or a real region on a surface (n = 3).
pub fn pair_with_membrane(r: &SymbolCurrent, g: &Membrane, cfg: &QuadratureSettings) -> Result<QuadResult> {
    if r.terms.is_empty() {
        return Ok(QuadResult { value: C64::new(0.0, 0.0), error: 0.0, evals: 0 });
    }
    if g.dimension() != r.degree() {
        return Err(KlmError::DimensionMismatch(format!("membrane of dimension {} against a current of degree {}", g.dimension(), r.degree())));
    }
    if r.params.len() != g.dimension() {
        return Err(KlmError::DimensionMismatch(format!("membrane of dimension {} in a base with {} parameters", g.dimension(), r.params.len())));
    }
    let fns: Vec<NumFn> = r.functions.iter().map(NumFn::new).collect();
    let coef = |k: usize| r.terms.iter().find(|t| t.log_index == k).map(|t| t.coefficient()).unwrap_or_default();
    let mut res = match &g.shape {
        MembraneShape::Path(segs) => {
            let splits: Vec<C64> = fns[0].divisor_1d().into_iter().map(|(c, _)| c).collect();
            let poles: Vec<C64> = fns[1].divisor_1d().into_iter().map(|(c, _)| c).collect();
            pair_path_n2(&fns[0], &fns[1], &Line1::curve(), segs, &splits, &poles, coef(0), coef(1), cfg)?
        }
        MembraneShape::Region(region) => {
            check_region_misses_t(&fns[0], *region)?;
            let (f1, f2, f3) = (&fns[0], &fns[1], &fns[2]);
            let c = coef(0);
            integrate_region(
                |p: &Point2| {
                    let at = OnSquare::new(p);
                    // multiply the log in first: each dlog factor alone can be ~1e170
                    let l = c * f1.log(&at);
                    l * f2.dlog(0, &at) * f3.dlog(1, &at) - l * f2.dlog(1, &at) * f3.dlog(0, &at)
                },
                *region,
                cfg,
            )
            .map_err(|e| quad_err(e, "region integrand"))?
        }
    };
    res.value *= g.orientation as f64;
    Ok(res)
}

fn region_bounds(region: Region) -> (f64, f64, f64, f64) {
    match region {
        Region::UnitSquare | Region::Delta => (0.0, 1.0, 0.0, 1.0),
        Region::Rect { x0, x1, y0, y1 } => (x0, x1, y0, y1),
    }
}

fn in_region(region: Region, x: f64, y: f64) -> bool {
    match region {
        Region::Delta => x + y >= 1.0,
        _ => true,
    }
}

/// δ-terms over a 2-dimensional membrane are supported only when T_{f₁} misses it.
fn check_region_misses_t(f: &NumFn, region: Region) -> Result<()> {
    const G: usize = 64;
    let (x0, x1, y0, y1) = region_bounds(region);
    let mut grid = vec![vec![None; G + 1]; G + 1];
    for (i, row) in grid.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let (u, v) = (i as f64 / G as f64, j as f64 / G as f64);
            let (x, y) = (x0 + (x1 - x0) * u, y0 + (y1 - y0) * v);
            if !in_region(region, x, y) {
                continue;
            }
            let p = Point2 { x, y, xbar: x1 - x, ybar: y1 - y };
            let w = f.value(&OnSquare::new(&p));
            if on_ray(w) {
                return Err(KlmError::IntersectionUnresolved(format!("T meets the region at ({x}, {y})")));
            }
            *cell = Some(w);
        }
    }
    for i in 0..=G {
        for j in 0..=G {
            let Some(a) = grid[i][j] else { continue };
            for (di, dj) in [(1, 0), (0, 1)] {
                if i + di > G || j + dj > G {
                    continue;
                }
                let Some(b) = grid[i + di][j + dj] else { continue };
                if (a.im >= 0.0) != (b.im >= 0.0) && (a.re < 0.0 || b.re < 0.0) && a.norm() < 1e12 && b.norm() < 1e12 {
                    return Err(KlmError::IntersectionUnresolved("T meets the region".into()));
                }
            }
        }
    }
    Ok(())
}

/// (−2πi)^{p−n} Σ_I ∫_{γ_I} R_I over aligned strata. A label may carry
/// several currents (a chain on that stratum); each membrane label must be
/// unique and every label must occur on both sides.
pub fn diagonal_pairing(currents: &[(String, SymbolCurrent)], gammas: &[(String, Membrane)], p: i32, n: i32, cfg: &QuadratureSettings) -> Result<PeriodValue> {
    for (i, (l, _)) in gammas.iter().enumerate() {
        if gammas[..i].iter().any(|(m, _)| m == l) {
            return Err(KlmError::MisalignedStrata(format!("two membranes for stratum {l}")));
        }
        if !currents.iter().any(|(m, _)| m == l) {
            return Err(KlmError::MisalignedStrata(format!("no current on stratum {l}")));
        }
    }
    let mut total = C64::new(0.0, 0.0);
    let mut err = 0.0;
    for (label, r) in currents {
        let g = gammas.iter().find(|(l, _)| l == label).ok_or_else(|| KlmError::MisalignedStrata(format!("no membrane for stratum {label}")))?;
        let v = pair_with_membrane(r, &g.1, cfg)?;
        total += v.value;
        err += v.error;
    }
    let pre = two_pi_i_pow(p - n) * if (p - n) % 2 == 0 { 1.0 } else { -1.0 };
    Ok(PeriodValue::new(pre * total, p, err * pre.norm()))
}

// ---------- Stokes ----------

fn bump(u: f64) -> (f64, f64) {
    if u.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let q = 1.0 - u * u;
    let b = (-1.0 / q).exp();
    (b, b * (-2.0 * u / (q * q)))
}

/// ψ(x, y) = b((x−cx)/rx)·b((y−cy)/ry) with b(u) = exp(−1/(1−u²)).
/// As a 1-form it is ψ·(a dx + b dy); as a 0-form a·ψ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestForm {
    pub center: (f64, f64),
    pub radius: (f64, f64),
    pub a: C64,
    pub b: C64,
}

impl TestForm {
    /// (ψ, ∂xψ, ∂yψ) at z.
    pub fn psi(&self, z: C64) -> (f64, f64, f64) {
        let (bx, dbx) = bump((z.re - self.center.0) / self.radius.0);
        let (by, dby) = bump((z.im - self.center.1) / self.radius.1);
        (bx * by, dbx / self.radius.0 * by, bx * dby / self.radius.1)
    }

    pub fn contains(&self, z: C64) -> bool {
        ((z.re - self.center.0) / self.radius.0).abs() < 1.0 && ((z.im - self.center.1) / self.radius.1).abs() < 1.0
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        (self.center.0 - self.radius.0, self.center.0 + self.radius.0, self.center.1 - self.radius.1, self.center.1 + self.radius.1)
    }

    /// ∫∫ f(z, (ψ, ∂xψ, ∂yψ)) dx dy over the support of ψ.
    ///
    /// The support is cut into cells through the point singularities
    /// `points`; a cell with a singular corner is integrated in Duffy
    /// coordinates, which cancel a 1/|z − p| singularity. Inner lines are
    /// split where they cross T_cut, across which the integrand jumps.
    fn integrate<F: Fn(C64, (f64, f64, f64)) -> C64>(&self, f: F, cut: Option<&NumFn>, points: &[C64], cfg: &QuadratureSettings) -> Result<QuadResult> {
        let (x0, x1, y0, y1) = self.bounds();
        let inside: Vec<C64> = points.iter().copied().filter(|p| self.contains(*p)).collect();
        let grid = |lo: f64, hi: f64, extra: Vec<f64>| -> Vec<f64> {
            let mut c = vec![lo];
            c.extend(extra.into_iter().filter(|v| *v > lo && *v < hi));
            c.push(hi);
            c.sort_by(|a, b| a.partial_cmp(b).unwrap());
            c.dedup();
            c
        };
        let xs = grid(x0, x1, inside.iter().map(|p| p.re).collect());
        let ys = grid(y0, y1, inside.iter().map(|p| p.im).collect());
        let mut cells = vec![];
        for wx in xs.windows(2) {
            for wy in ys.windows(2) {
                split_cell((wx[0], wx[1], wy[0], wy[1]), &inside, &mut cells);
            }
        }
        let g = |z: C64| {
            let ps = self.psi(z);
            if ps.0 == 0.0 && ps.1 == 0.0 && ps.2 == 0.0 {
                return C64::new(0.0, 0.0);
            }
            f(z, ps)
        };
        let tol = cfg.tol2d / cells.len() as f64;
        let mut total = QuadResult { value: C64::new(0.0, 0.0), error: 0.0, evals: 0 };
        for cell in &cells {
            for piece in cell_pieces(cell) {
                let r = integrate_piece(&g, &piece, cut, tol, cfg).map_err(|e| quad_err(e, "planar integrand"))?;
                total.value += r.value;
                total.error += r.error;
                total.evals += r.evals;
            }
        }
        Ok(total)
    }
}

/// A rectangle cell with at most one singular corner.
struct Cell {
    rect: (f64, f64, f64, f64),
    singular: Option<C64>,
}

fn split_cell(rect: (f64, f64, f64, f64), points: &[C64], out: &mut Vec<Cell>) {
    let (xa, xb, ya, yb) = rect;
    let corners = [C64::new(xa, ya), C64::new(xb, ya), C64::new(xb, yb), C64::new(xa, yb)];
    let near = |p: &C64, c: &C64| (p - c).norm() <= 1e-13 * (1.0 + c.norm());
    let hits: Vec<C64> = corners.iter().filter(|c| points.iter().any(|p| near(p, c))).copied().collect();
    if hits.len() <= 1 {
        out.push(Cell { rect, singular: hits.first().copied() });
        return;
    }
    if hits[0].re != hits[1].re {
        let xm = 0.5 * (xa + xb);
        split_cell((xa, xm, ya, yb), points, out);
        split_cell((xm, xb, ya, yb), points, out);
    } else {
        let ym = 0.5 * (ya + yb);
        split_cell((xa, xb, ya, ym), points, out);
        split_cell((xa, xb, ym, yb), points, out);
    }
}

/// A parallelogram o + s·a + t·b, or (when `duffy`) the triangle
/// o + s·(a + t·b) swept by rays from the singular corner o.
struct Piece {
    o: C64,
    a: C64,
    b: C64,
    duffy: bool,
}

fn cell_pieces(cell: &Cell) -> Vec<Piece> {
    let (xa, xb, ya, yb) = cell.rect;
    let Some(p) = cell.singular else {
        return vec![Piece { o: C64::new(xa, ya), a: C64::new(xb - xa, 0.0), b: C64::new(0.0, yb - ya), duffy: false }];
    };
    let corners = [C64::new(xa, ya), C64::new(xb, ya), C64::new(xb, yb), C64::new(xa, yb)];
    let k = (0..4).min_by(|&i, &j| (corners[i] - p).norm().partial_cmp(&(corners[j] - p).norm()).unwrap()).unwrap();
    let (o, u, opp, v) = (corners[k], corners[(k + 1) % 4], corners[(k + 2) % 4], corners[(k + 3) % 4]);
    vec![Piece { o, a: u - o, b: opp - u, duffy: true }, Piece { o, a: opp - o, b: v - opp, duffy: true }]
}

fn cross(u: C64, v: C64) -> f64 {
    u.re * v.im - u.im * v.re
}

fn integrate_piece<G: Fn(C64) -> C64>(g: &G, pc: &Piece, cut: Option<&NumFn>, tol: f64, cfg: &QuadratureSettings) -> std::result::Result<QuadResult, QuadError> {
    let inner_tol = tol * 0.1;
    let fail = std::cell::RefCell::new(None);
    let evals = std::cell::Cell::new(0usize);
    // directions in which T_cut leaves the singular corner
    let mut vcuts = vec![0.0];
    if let (true, Some(h)) = (pc.duffy, cut) {
        let eps = 1e-9;
        vcuts.extend(segment_t_cuts(h, pc.o + pc.a * eps, pc.b * eps));
    }
    vcuts.push(1.0);
    let line_integral = |v: f64| -> C64 {
            // inner line start + w·dir, w ∈ [0, 1], with area factor jac(w)
            let (start, dir, area, radial) = if pc.duffy {
                let dir = pc.a + pc.b * v;
                (pc.o, dir, cross(dir, pc.b).abs(), true)
            } else {
                (pc.o + pc.a * v, pc.b, cross(pc.a, pc.b).abs(), false)
            };
            let mut cuts = vec![0.0];
            if let Some(h) = cut {
                cuts.extend(segment_t_cuts(h, start, dir));
            }
            cuts.push(1.0);
            let mut acc = C64::new(0.0, 0.0);
            for w in cuts.windows(2) {
                let inner = |nw: Node| {
                    let jac = if radial { area * nw.x } else { area };
                    // within rounding of the singular corner; the Jacobian makes this O(1e-14)
                    if jac == 0.0 || radial && nw.x * dir.norm() < 1e-14 * (1.0 + start.norm()) {
                        return C64::new(0.0, 0.0);
                    }
                    g(start + dir * nw.x) * jac
                };
                match integrate(inner, w[0], w[1], inner_tol, cfg) {
                    Ok(r) => {
                        acc += r.value;
                        evals.set(evals.get() + r.evals);
                    }
                    Err(e) => {
                        fail.borrow_mut().get_or_insert(e);
                    }
                }
            }
            acc
    };
    let mut total = QuadResult { value: C64::new(0.0, 0.0), error: 0.0, evals: 0 };
    for w in vcuts.windows(2) {
        let r = integrate(|nv: Node| line_integral(nv.x), w[0], w[1], tol / (vcuts.len() - 1) as f64, cfg)?;
        total.value += r.value;
        total.error += r.error;
        total.evals += r.evals;
    }
    if let Some(e) = fail.into_inner() {
        return Err(e);
    }
    total.evals += evals.get();
    Ok(total)
}

/// Parameters t ∈ (0, 1) where start + t·dir crosses T_f.
fn segment_t_cuts(f: &NumFn, start: C64, dir: C64) -> Vec<f64> {
    const SAMPLES: usize = 64;
    let val = |t: f64| f.value(&Plain(&[start + dir * t]));
    let mut out = vec![];
    let mut ta = 0.0;
    let mut wa = val(ta);
    for j in 1..=SAMPLES {
        let tb = j as f64 / SAMPLES as f64;
        let wb = val(tb);
        if (wa.im >= 0.0) != (wb.im >= 0.0) {
            let (mut lo, mut hi) = (ta, tb);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if (val(mid).im >= 0.0) == (wa.im >= 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = 0.5 * (lo + hi);
            let w = val(t);
            if w.re < 0.0 && w.norm() < 1e12 && t > 0.0 && t < 1.0 {
                out.push(t);
            }
        }
        ta = tb;
        wa = wb;
    }
    out
}

/// ∫_{T_f} ω for ω(z)(ż) given pointwise, T oriented from f = ∞ to f = 0.
/// `splits` are parameters u = r/(1 + r) where ω jumps.
fn integrate_over_t<W: Fn(C64, C64) -> C64>(f: &NumFn, omega: W, splits: &[f64], tol: f64, cfg: &QuadratureSettings) -> Result<QuadResult> {
    let (n, d) = f.num_den_1d();
    let deriv = |p: &[C64]| -> Vec<C64> { p.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect() };
    let (dn, dd) = (deriv(&n), deriv(&d));
    let ev = |p: &[C64], z: C64| p.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * z + c);
    let len = n.len().max(d.len());
    let mut cuts = vec![0.0];
    cuts.extend(splits.iter().copied().filter(|u| *u > 0.0 && *u < 1.0));
    cuts.push(1.0);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut total = QuadResult { value: C64::new(0.0, 0.0), error: 0.0, evals: 0 };
    for w in cuts.windows(2) {
    let r = integrate(
        |nd: Node| {
            let (u, ub) = (nd.x, 1.0 - nd.x);
            if ub <= 0.0 || u <= 0.0 {
                return C64::new(0.0, 0.0);
            }
            let r = u / ub;
            // the tail r > 1e150 contributes O(1/r)
            if r > 1e150 {
                return C64::new(0.0, 0.0);
            }
            let jac = 1.0 / (ub * ub);
            let mut poly = vec![C64::new(0.0, 0.0); len];
            for (k, c) in n.iter().enumerate() {
                poly[k] += c;
            }
            for (k, c) in d.iter().enumerate() {
                poly[k] += c * r;
            }
            let mut s = C64::new(0.0, 0.0);
            for z in complex_roots(&poly) {
                let zdot = -ev(&d, z) / (ev(&dn, z) + ev(&dd, z) * r);
                s += omega(z, zdot);
            }
            // orientation: r decreases along T
            -s * jac
        },
        w[0],
        w[1],
        tol,
        cfg,
    )
    .map_err(|e| quad_err(e, "T-locus integrand"))?;
    total.value += r.value;
    total.error += r.error;
    total.evals += r.evals;
    }
    Ok(total)
}

/// Points of T_{f₁} ∩ T_{f₂} inside the support of ψ, with their
/// parameter u = r/(1 + r) along T_{f₁}.
fn t_intersections(f1: &NumFn, f2: &NumFn, phi: &TestForm) -> Vec<(f64, C64)> {
    let (n, d) = f1.num_den_1d();
    let len = n.len().max(d.len());
    let roots_at = |u: f64| -> Vec<C64> {
        let r = u / (1.0 - u);
        let mut poly = vec![C64::new(0.0, 0.0); len];
        for (k, c) in n.iter().enumerate() {
            poly[k] += c;
        }
        for (k, c) in d.iter().enumerate() {
            poly[k] += c * r;
        }
        complex_roots(&poly)
    };
    let v2 = |z: C64| f2.value(&Plain(&[z]));
    const STEPS: usize = 4000;
    let mut out: Vec<(f64, C64)> = vec![];
    let mut prev = roots_at(0.5 / STEPS as f64);
    for j in 1..STEPS {
        let u = (j as f64 + 0.5) / STEPS as f64;
        let cur = roots_at(u);
        for &zp in &prev {
            let Some(&zc) = cur.iter().min_by(|a, b| (**a - zp).norm().partial_cmp(&(**b - zp).norm()).unwrap()) else { continue };
            if !(phi.contains(zp) || phi.contains(zc)) {
                continue;
            }
            let (wa, wb) = (v2(zp), v2(zc));
            if (wa.im >= 0.0) == (wb.im >= 0.0) || wa.norm() > 1e12 || wb.norm() > 1e12 {
                continue;
            }
            // bisect along the branch
            let (mut lo, mut hi) = ((j as f64 - 0.5) / STEPS as f64, u);
            let (mut zlo, mut zhi) = (zp, zc);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let zs = roots_at(mid);
                let guess = 0.5 * (zlo + zhi);
                let zm = *zs.iter().min_by(|a, b| (**a - guess).norm().partial_cmp(&(**b - guess).norm()).unwrap()).unwrap();
                if (v2(zm).im >= 0.0) == (wa.im >= 0.0) {
                    lo = mid;
                    zlo = zm;
                } else {
                    hi = mid;
                    zhi = zm;
                }
            }
            let z = 0.5 * (zlo + zhi);
            if v2(z).re < 0.0 && !out.iter().any(|q| (q.1 - z).norm() < 1e-9) {
                out.push((0.5 * (lo + hi), z));
            }
        }
        prev = cur;
    }
    out
}

/// Sign of T₁ ∩ T₂ at p: sign Im(conj(τ₁)·τ₂) with τᵢ = 1/fᵢ′(p), the
/// oriented tangent of T_{fᵢ}.
fn intersection_sign(f1: &NumFn, f2: &NumFn, p: C64) -> f64 {
    let at = Plain(&[p]);
    let t1 = (f1.dlog(0, &at) * f1.value(&at)).inv();
    let t2 = (f2.dlog(0, &at) * f2.value(&at)).inv();
    (t1.conj() * t2).im.signum()
}

/// Pairing of the identity for d[R] against φ on a one-parameter base; ≈ 0.
///
/// n = 1: ∫ log f dφ + ∫ dlog f ∧ φ − 2πi ∫_T φ with φ the 1-form.
/// n = 2: R(dψ) + (2πi)² Σ_{T₁∩T₂} ε ψ − 2πi R{∂_B}(ψ) with ψ the 0-form.
pub fn stokes_residual(r: &SymbolCurrent, phi: &TestForm, cfg: &QuadratureSettings) -> Result<QuadResult> {
    if r.params.len() != 1 {
        return Err(KlmError::DimensionMismatch("Stokes residuals are computed on one-parameter bases".into()));
    }
    let tpi = two_pi_i_pow(1);
    match r.n() {
        1 => {
            let f = NumFn::new(&r.functions[0]);
            let (a, b) = (phi.a, phi.b);
            let planar = phi.integrate(
                |z, (ps, px, py)| {
                    let at = Plain(&[z]);
                    f.log(&at) * (b * px - a * py) + f.dlog(0, &at) * ps * (b - C64::i() * a)
                },
                Some(&f),
                &f.divisor_1d().iter().map(|d| d.0).collect::<Vec<_>>(),
                cfg,
            )?;
            let t = integrate_over_t(
                &f,
                |z, zd| {
                    let (ps, _, _) = phi.psi(z);
                    ps * (a * zd.re + b * zd.im)
                },
                &[],
                cfg.tol2d * 1e-2,
                cfg,
            )?;
            Ok(QuadResult { value: planar.value - tpi * t.value, error: planar.error + (tpi * t.error).norm(), evals: planar.evals + t.evals })
        }
        2 => {
            let f1 = NumFn::new(&r.functions[0]);
            let f2 = NumFn::new(&r.functions[1]);
            let c1 = r.terms[0].coefficient();
            let c2 = r.terms[1].coefficient();
            let a = phi.a;
            let planar = phi.integrate(
                |z, (_, px, py)| {
                    let at = Plain(&[z]);
                    c1 * f1.log(&at) * f2.dlog(0, &at) * (py - C64::i() * px) * a
                },
                Some(&f1),
                &f1.divisor_1d().iter().chain(f2.divisor_1d().iter()).map(|d| d.0).collect::<Vec<_>>(),
                cfg,
            )?;
            let meets = t_intersections(&f1, &f2, phi);
            let splits: Vec<f64> = meets.iter().map(|m| m.0).collect();
            let t = integrate_over_t(
                &f1,
                |z, zd| {
                    let (_, px, py) = phi.psi(z);
                    f2.log(&Plain(&[z])) * (px * zd.re + py * zd.im) * a
                },
                &splits,
                cfg.tol2d * 1e-2,
                cfg,
            )?;
            let mut expected = C64::new(0.0, 0.0);
            for &(_, p) in &meets {
                expected -= tpi * tpi * intersection_sign(&f1, &f2, p) * phi.psi(p).0 * a;
            }
            let mut bdry = C64::new(0.0, 0.0);
            for (p, o) in f2.divisor_1d() {
                let ps = phi.psi(p).0;
                if ps != 0.0 {
                    bdry += f1.log(&Plain(&[p])) * ps * o as f64;
                }
            }
            for (p, o) in f1.divisor_1d() {
                let ps = phi.psi(p).0;
                if ps != 0.0 {
                    bdry -= f2.log(&Plain(&[p])) * ps * o as f64;
                }
            }
            expected += tpi * bdry * a;
            let value = planar.value + c2 * t.value - expected;
            Ok(QuadResult { value, error: planar.error + (c2 * t.error).norm(), evals: planar.evals + t.evals })
        }
        n => Err(KlmError::DimensionMismatch(format!("Stokes residuals are computed for n = 1, 2, not {n}"))),
    }
}

// ---------- slices ----------

/// Slice of R over a membrane in the second factor S of X × S.
#[derive(Clone, Debug)]
pub enum Slice {
    /// Restriction to the fiber X × {s₀}.
    Fiber(SymbolCurrent),
    /// x ↦ ∫_{{x}×γ} R, paired against top forms on X.
    Path(PathSlice),
}

#[derive(Clone, Debug)]
pub struct PathSlice {
    pub current: SymbolCurrent,
    pub path: Vec<Segment>,
}

impl PathSlice {
    /// ∫_{{x}×γ} R for fixed x.
    pub fn fiber_pairing(&self, x: C64, cfg: &QuadratureSettings) -> Result<QuadResult> {
        let f1 = NumFn::new(&self.current.functions[0]);
        let f2 = NumFn::new(&self.current.functions[1]);
        let line = Line1 { fixed: vec![x, C64::new(0.0, 0.0)], var: 1 };
        let c1 = self.current.terms[0].coefficient();
        let c2 = self.current.terms[1].coefficient();
        pair_path_n2(&f1, &f2, &line, &self.path, &[], &[], c1, c2, cfg)
    }

    /// ∫_X a·ψ(x) (∫_{{x}×γ} R) dA(x).
    pub fn pair(&self, psi: &TestForm, cfg: &QuadratureSettings) -> Result<QuadResult> {
        let inner = QuadratureSettings { tol: cfg.tol2d * 1e-2, ..*cfg };
        let fail = std::cell::RefCell::new(None);
        let r = psi.integrate(
            |x, (ps, _, _)| match self.fiber_pairing(x, &inner) {
                Ok(v) => psi.a * ps * v.value,
                Err(e) => {
                    fail.borrow_mut().get_or_insert(e);
                    C64::new(0.0, 0.0)
                }
            },
            None,
            &[],
            cfg,
        )?;
        match fail.into_inner() {
            Some(e) => Err(e),
            None => Ok(r),
        }
    }
}

/// Membrane in the S factor of a product base X × S (parameters [x, s]).
#[derive(Clone, Debug)]
pub enum SliceMembrane {
    Point(CycloNum),
    Path(Vec<Segment>),
}

pub fn slice_over_base(r: &SymbolCurrent, g: &SliceMembrane) -> Result<Slice> {
    if r.base.kind != BaseKind::Product || r.params.len() != 2 {
        return Err(KlmError::NonProductBase(format!("{:?} base with {} parameters", r.base.kind, r.params.len())));
    }
    match g {
        SliceMembrane::Point(s0) => {
            let fiber = Arc::new(BaseVariety::line(&r.params[0]));
            let c = RatFn::constant(2, s0.clone());
            let mut fns = vec![];
            for (i, f) in r.functions.iter().enumerate() {
                match f.substitute(1, &c) {
                    Ok(Restricted::Fn(h)) if !h.is_zero() => fns.push(h.remap_vars(1, &[0, 0])),
                    _ => return Err(KlmError::NotASymbolGraph(format!("f{} has a zero or pole along the fiber s = {}", i + 1, s0))),
                }
            }
            Ok(Slice::Fiber(SymbolCurrent::new(fiber, fns)?))
        }
        SliceMembrane::Path(segs) => {
            if r.n() != 2 {
                return Err(KlmError::DimensionMismatch(format!("path slices need n = 2, not {}", r.n())));
            }
            Ok(Slice::Path(PathSlice { current: r.clone(), path: segs.clone() }))
        }
    }
}

// ---------- dlog residues ----------

/// Σ c · dlog x_{i₁} ∧ … ∧ dlog x_{i_k}, stored with strictly increasing indices.
#[derive(Clone, Debug, PartialEq)]
pub struct DlogForm {
    pub terms: Vec<(Rational, Vec<usize>)>,
}

impl DlogForm {
    /// Builds the canonical form: wedges sorted with sign, repeats dropped, like terms merged.
    pub fn new(raw: Vec<(Rational, Vec<usize>)>) -> Self {
        let mut acc: Vec<(Rational, Vec<usize>)> = vec![];
        for (c, mut w) in raw {
            let mut sign = 1i64;
            for i in 0..w.len() {
                for j in 0..w.len() - 1 - i {
                    if w[j] > w[j + 1] {
                        w.swap(j, j + 1);
                        sign = -sign;
                    }
                }
            }
            if w.windows(2).any(|p| p[0] == p[1]) || c.is_zero() {
                continue;
            }
            let c = c * Rational::from_integer(sign.into());
            match acc.iter_mut().find(|(_, v)| *v == w) {
                Some(t) => t.0 = &t.0 + &c,
                None => acc.push((c, w)),
            }
        }
        acc.retain(|(c, _)| !c.is_zero());
        acc.sort_by(|a, b| a.1.cmp(&b.1));
        DlogForm { terms: acc }
    }

    pub fn wedge(indices: &[usize]) -> Self {
        DlogForm::new(vec![(Rational::one(), indices.to_vec())])
    }

    pub fn add(&self, o: &DlogForm) -> DlogForm {
        DlogForm::new(self.terms.iter().chain(o.terms.iter()).cloned().collect())
    }

    pub fn scale(&self, q: &Rational) -> DlogForm {
        DlogForm::new(self.terms.iter().map(|(c, w)| (c * q, w.clone())).collect())
    }

    /// Res along x_j = 0: moves dlog x_j to the front and removes it.
    pub fn residue(&self, j: usize) -> Result<DlogForm> {
        if !self.terms.iter().any(|(_, w)| w.contains(&j)) {
            return Err(KlmError::FlagNotInPolarLocus(j));
        }
        let mut out = vec![];
        for (c, w) in &self.terms {
            if let Some(pos) = w.iter().position(|&i| i == j) {
                let mut rest = w.clone();
                rest.remove(pos);
                let s = if pos % 2 == 0 { c.clone() } else { -c.clone() };
                out.push((s, rest));
            }
        }
        Ok(DlogForm::new(out))
    }

    /// Coefficient of the empty wedge.
    pub fn scalar(&self) -> Rational {
        self.terms.iter().find(|(_, w)| w.is_empty()).map(|(c, _)| c.clone()).unwrap_or_else(Rational::zero)
    }
}

/// Iterated residue along the flag x_{j₁} = 0 ⊃ x_{j₁} = x_{j₂} = 0 ⊃ …;
/// the scalar part of the result.
pub fn dlog_residue(form: &DlogForm, flag: &[usize]) -> Result<Rational> {
    let deg = form.terms.iter().map(|(_, w)| w.len()).max().unwrap_or(0);
    if flag.len() > deg {
        return Err(KlmError::DimensionMismatch(format!("flag of length {} for a form of degree {}", flag.len(), deg)));
    }
    let mut f = form.clone();
    for &j in flag {
        f = f.residue(j)?;
    }
    Ok(f.scalar())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("1.5").unwrap(), C64::new(1.5, 0.0));
        assert_eq!(parse_complex("-i").unwrap(), C64::new(0.0, -1.0));
        assert_eq!(parse_complex("0.5-0.25i").unwrap(), C64::new(0.5, -0.25));
        assert_eq!(parse_complex("1e-3+2i").unwrap(), C64::new(1e-3, 2.0));
        assert!(parse_complex("x").is_err());
    }

    #[test]
    fn membrane_text_round_trip() {
        let m = Membrane::parse("reverse path 0 -> 1+i -> 2").unwrap();
        assert_eq!(m.orientation, -1);
        assert_eq!(Membrane::parse(&m.to_string()).unwrap(), m);
        assert_eq!(Membrane::parse("region delta2").unwrap().dimension(), 2);
    }

    #[test]
    fn bump_derivative() {
        let h = 1e-6;
        for u in [-0.7, 0.1, 0.5] {
            let d = (bump(u + h).0 - bump(u - h).0) / (2.0 * h);
            assert!((d - bump(u).1).abs() < 1e-7);
        }
    }
}
