//! Parametrized cubical precycles in X × □ⁿ with □ = ℙ¹ ∖ {1}.
//!
//! A component is a rational map from an affine chart of (ℙ¹)^k (its
//! parameters) to X × (ℙ¹)ⁿ; the cycle is its image. X is a point, a line,
//! a product of lines or a hypersurface in (ℙ¹)^m solved for one
//! coordinate that occurs linearly. Cube indices in the public API are
//! 1-based, matching ∂_f^i.

use crate::cyclo::CycloNum;
use crate::linalg::Rational;
use crate::poly::{roots_in_field, Poly, PolyError, RatFn, Restricted};
use crate::random::Rng8;
use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CycleError {
    #[error("improper intersection: coordinate {coord} is identically {value} on {component}")]
    ImproperFacet { coord: usize, value: FacetValue, component: String },
    #[error("cannot parametrize the locus {{{0} = 0}}")]
    UnfactorableLocus(String),
    #[error("identity test needs {0} samples, above the supported bound")]
    DegreeBoundExceeded(usize),
    #[error("valuation of the zero function")]
    ZeroFunction,
    #[error("not parametrized: {0}")]
    NotParametrized(String),
    #[error("restriction is 0/∞ along {0}")]
    Indeterminate(String),
    #[error("cycles have different shapes: {0}")]
    ShapeMismatch(String),
}

/// The two facet values of □.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FacetValue {
    Zero,
    Infinity,
}

impl fmt::Display for FacetValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FacetValue::Zero => write!(f, "0"),
            FacetValue::Infinity => write!(f, "∞"),
        }
    }
}

/// A point of ℙ¹ over the coefficient field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PValue {
    Finite(CycloNum),
    Infinity,
}

impl fmt::Display for PValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PValue::Finite(c) => write!(f, "{c}"),
            PValue::Infinity => write!(f, "inf"),
        }
    }
}

fn restricted_value(r: &Restricted) -> Option<PValue> {
    match r {
        Restricted::Infinity => Some(PValue::Infinity),
        Restricted::Fn(g) => g.as_constant().map(PValue::Finite),
    }
}

pub(crate) fn restricted_eq(a: &Restricted, b: &Restricted) -> bool {
    match (a, b) {
        (Restricted::Infinity, Restricted::Infinity) => true,
        (Restricted::Fn(f), Restricted::Fn(g)) => f.equals(g),
        _ => false,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BaseKind {
    Point,
    Line,
    Product,
    Hypersurface,
}

/// The variety X, embedded in (ℙ¹)^m, with an optional open part given by
/// removing closed loci `{coord_a = v_a, coord_b = v_b, …}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseVariety {
    pub kind: BaseKind,
    pub coords: Vec<String>,
    pub equation: Option<Poly>,
    pub solved: Option<usize>,
    pub excluded: Vec<Vec<(usize, PValue)>>,
}

impl BaseVariety {
    pub fn point() -> Self {
        BaseVariety { kind: BaseKind::Point, coords: vec![], equation: None, solved: None, excluded: vec![] }
    }

    pub fn line(name: &str) -> Self {
        BaseVariety { kind: BaseKind::Line, coords: vec![name.to_string()], equation: None, solved: None, excluded: vec![] }
    }

    pub fn product(names: &[&str]) -> Self {
        BaseVariety { kind: BaseKind::Product, coords: names.iter().map(|s| s.to_string()).collect(), equation: None, solved: None, excluded: vec![] }
    }

    /// The hypersurface {eq = 0} ⊂ (ℙ¹)^m, parametrized by solving for
    /// `solve` (default: the last coordinate occurring linearly).
    pub fn hypersurface(coords: Vec<String>, eq: Poly, solve: Option<usize>) -> Result<Self, CycleError> {
        if eq.is_zero() {
            return Err(CycleError::NotParametrized("zero equation".into()));
        }
        let v = match solve {
            Some(v) => v,
            None => (0..coords.len()).rev().find(|&v| eq.degree_in(v) == 1).ok_or_else(|| CycleError::NotParametrized(format!("{} is not linear in any coordinate", eq.fmt_with(&coords))))?,
        };
        if eq.degree_in(v) != 1 {
            return Err(CycleError::NotParametrized(format!("{} is not linear in {}", eq.fmt_with(&coords), coords[v])));
        }
        Ok(BaseVariety { kind: BaseKind::Hypersurface, coords, equation: Some(eq), solved: Some(v), excluded: vec![] })
    }

    pub fn excluding(mut self, locus: Vec<(usize, PValue)>) -> Self {
        self.excluded.push(locus);
        self
    }

    pub fn coord_index(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c == name)
    }

    /// Names of the base parameters (the unsolved coordinates).
    pub fn params(&self) -> Vec<String> {
        self.coords.iter().enumerate().filter(|(i, _)| Some(*i) != self.solved).map(|(_, c)| c.clone()).collect()
    }

    pub fn dim(&self) -> usize {
        self.params().len()
    }

    /// The ambient coordinates as functions of the base parameters.
    pub fn parametrization(&self) -> Vec<Restricted> {
        let k = self.dim();
        let m = self.coords.len();
        let param_of: Vec<usize> = (0..m).map(|i| match self.solved {
            Some(s) if i > s => i - 1,
            _ => i,
        }).collect();
        (0..m)
            .map(|i| {
                if Some(i) == self.solved {
                    let eq = self.equation.as_ref().unwrap();
                    let cs = eq.coeffs_in(i);
                    // map the other coordinates to parameters; i itself is absent
                    let mut map = param_of.clone();
                    map[i] = 0;
                    let a = RatFn::from_poly(&cs[1].remap_vars(k, &map));
                    let b = RatFn::from_poly(&cs[0].remap_vars(k, &map));
                    Restricted::Fn(b.neg().div(&a).expect("linear coefficient is nonzero"))
                } else {
                    Restricted::Fn(RatFn::var(k, param_of[i]))
                }
            })
            .collect()
    }

    /// Does the ambient point/map `x` lie on X (identically)?
    pub fn contains(&self, x: &[Restricted]) -> bool {
        let Some(eq) = &self.equation else { return true };
        let mut eq = eq.clone();
        let mut fns: Vec<Option<RatFn>> = Vec::new();
        for (i, xi) in x.iter().enumerate() {
            match xi {
                Restricted::Infinity => {
                    eq = eq.leading_coeff_in(i);
                    fns.push(None);
                }
                Restricted::Fn(g) => fns.push(Some(g.clone())),
            }
        }
        let nv = fns.iter().flatten().map(|g| g.nvars()).next().unwrap_or(0);
        let args: Vec<RatFn> = fns.into_iter().map(|g| g.unwrap_or_else(|| RatFn::one(nv))).collect();
        eval_poly_at(&eq, &args).is_zero()
    }

    /// Is the (constant part of the) map `x` inside a removed locus?
    pub fn is_excluded(&self, x: &[Restricted]) -> bool {
        self.excluded.iter().any(|locus| locus.iter().all(|(i, v)| restricted_value(&x[*i]).as_ref() == Some(v)))
    }
}

/// P(g₁, …, g_m) for rational functions g_i.
pub fn eval_poly_at(p: &Poly, args: &[RatFn]) -> RatFn {
    let nv = args.first().map(|g| g.nvars()).unwrap_or(0);
    let mut s = RatFn::constant(nv, CycloNum::zero());
    for (e, c) in p.terms() {
        let mut t = RatFn::constant(nv, c.clone());
        for (i, &k) in e.iter().enumerate() {
            if k > 0 {
                t = t.mul(&args[i].pow(k as i32).unwrap());
            }
        }
        s = s.add(&t);
    }
    s
}

/// One component: parameters ↦ (X coordinates; cube coordinates).
#[derive(Clone, Debug)]
pub struct ParamCycle {
    pub base: Arc<BaseVariety>,
    pub params: Vec<String>,
    pub x: Vec<Restricted>,
    pub cube: Vec<RatFn>,
}

impl ParamCycle {
    pub fn new(base: Arc<BaseVariety>, params: Vec<String>, x: Vec<Restricted>, cube: Vec<RatFn>) -> Result<Self, CycleError> {
        let k = params.len();
        if x.len() != base.coords.len() {
            return Err(CycleError::ShapeMismatch(format!("{} ambient coordinates for a base with {}", x.len(), base.coords.len())));
        }
        let bad = x.iter().any(|r| matches!(r, Restricted::Fn(g) if g.nvars() != k)) || cube.iter().any(|g| g.nvars() != k);
        if bad {
            return Err(CycleError::ShapeMismatch("coordinate functions in the wrong number of parameters".into()));
        }
        let z = ParamCycle { base, params, x, cube };
        if !z.base.contains(&z.x) {
            return Err(CycleError::NotParametrized(format!("{z} does not lie on the base")));
        }
        Ok(z)
    }

    /// The graph of (f₁, …, fₙ) over the base, fᵢ in the base parameters.
    pub fn symbol(base: Arc<BaseVariety>, fns: Vec<RatFn>) -> Result<Self, CycleError> {
        let x = base.parametrization();
        let params = base.params();
        Self::new(base, params, x, fns)
    }

    /// The graph of (f₁, …, fₙ) where fᵢ are functions of the ambient
    /// coordinates of the base.
    pub fn symbol_of_coords(base: Arc<BaseVariety>, fns: &[RatFn]) -> Result<Self, CycleError> {
        let x = base.parametrization();
        let args: Vec<RatFn> = x
            .iter()
            .map(|r| match r {
                Restricted::Fn(g) => Ok(g.clone()),
                Restricted::Infinity => Err(CycleError::NotParametrized("base coordinate at infinity".into())),
            })
            .collect::<Result<_, _>>()?;
        let cube = fns.iter().map(|f| compose_ratfn(f, &args)).collect::<Result<Vec<_>, _>>()?;
        Self::symbol(base, cube)
    }

    pub fn n(&self) -> usize {
        self.cube.len()
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    fn all_coords(&self) -> Vec<Restricted> {
        self.x.iter().cloned().chain(self.cube.iter().map(|g| Restricted::Fn(g.clone()))).collect()
    }

    /// Sum of coordinate degree bounds (at least 1).
    pub fn degree_bound(&self) -> usize {
        let d: u32 = self
            .all_coords()
            .iter()
            .map(|r| match r {
                Restricted::Fn(g) => g.degree_bound(),
                Restricted::Infinity => 0,
            })
            .sum();
        d.max(1) as usize
    }

    /// The image of an exact parameter point; `None` if some coordinate is 0/0 there.
    pub fn eval_point(&self, pt: &[CycloNum]) -> Option<Vec<PValue>> {
        self.all_coords()
            .iter()
            .map(|r| match r {
                Restricted::Infinity => Some(PValue::Infinity),
                Restricted::Fn(g) => match g.eval(pt) {
                    Ok(Some(v)) => Some(PValue::Finite(v)),
                    Ok(None) => Some(PValue::Infinity),
                    Err(_) => None,
                },
            })
            .collect()
    }

    /// The image of the parameter ∞ for a one-parameter component.
    fn eval_at_infinity(&self) -> Option<Vec<PValue>> {
        self.all_coords()
            .iter()
            .map(|r| match r {
                Restricted::Infinity => Some(PValue::Infinity),
                Restricted::Fn(g) => restricted_value(&g.substitute_infinity(0)),
            })
            .collect()
    }

    /// Substitutes the parameters by rational functions in `params`.
    pub fn reparametrize(&self, params: Vec<String>, subs: &[RatFn]) -> Result<ParamCycle, CycleError> {
        assert_eq!(subs.len(), self.dim());
        let map = |r: &Restricted| -> Result<Restricted, CycleError> {
            match r {
                Restricted::Infinity => Ok(Restricted::Infinity),
                Restricted::Fn(g) => Ok(Restricted::Fn(compose_ratfn(g, subs)?)),
            }
        };
        let x = self.x.iter().map(map).collect::<Result<Vec<_>, _>>()?;
        let cube = self.cube.iter().map(|g| compose_ratfn(g, subs)).collect::<Result<Vec<_>, _>>()?;
        ParamCycle::new(self.base.clone(), params, x, cube)
    }

    fn fmt_coord(&self, r: &Restricted) -> String {
        match r {
            Restricted::Infinity => "inf".into(),
            Restricted::Fn(g) => g.fmt_with(&self.params),
        }
    }
}

/// g(h₁, …, h_k) for rational functions h_i.
pub fn compose_ratfn(g: &RatFn, args: &[RatFn]) -> Result<RatFn, CycleError> {
    let nv = args.first().map(|h| h.nvars()).unwrap_or(0);
    let mut r = RatFn::constant(nv, g.coef().clone());
    for (f, e) in g.factors() {
        let v = eval_poly_at(f, args);
        if v.is_zero() && *e < 0 {
            return Err(CycleError::Indeterminate("composition makes a pole factor vanish identically".to_string()));
        }
        r = r.mul(&v.pow(*e).map_err(|_| CycleError::Indeterminate("division by zero in composition".into()))?);
    }
    Ok(r)
}

impl fmt::Display for ParamCycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let xs: Vec<String> = self.x.iter().map(|r| self.fmt_coord(r)).collect();
        let cs: Vec<String> = self.cube.iter().map(|g| g.fmt_with(&self.params)).collect();
        write!(f, "({}) |-> ({}; {})", self.params.join(", "), xs.join(", "), cs.join(", "))
    }
}

/// A formal ℚ-linear combination of components.
#[derive(Clone, Debug, Default)]
pub struct CycleChain {
    pub terms: Vec<(ParamCycle, Rational)>,
    /// Notes raised while computing facets (dropped components of multiplicity > 1).
    pub warnings: Vec<String>,
}

impl CycleChain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(z: ParamCycle) -> Self {
        CycleChain { terms: vec![(z, Rational::one())], warnings: vec![] }
    }

    pub fn from_terms(terms: Vec<(ParamCycle, Rational)>) -> Self {
        CycleChain { terms, warnings: vec![] }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn push(&mut self, z: ParamCycle, c: Rational) {
        if !c.is_zero() {
            self.terms.push((z, c));
        }
    }

    pub fn add(&self, o: &CycleChain) -> CycleChain {
        let mut r = self.clone();
        r.terms.extend(o.terms.iter().cloned());
        r.warnings.extend(o.warnings.iter().cloned());
        r
    }

    pub fn scale(&self, q: &Rational) -> CycleChain {
        CycleChain { terms: self.terms.iter().filter(|_| !q.is_zero()).map(|(z, c)| (z.clone(), c * q)).collect(), warnings: self.warnings.clone() }
    }

    pub fn neg(&self) -> CycleChain {
        self.scale(&-Rational::one())
    }

    pub fn sub(&self, o: &CycleChain) -> CycleChain {
        self.add(&o.neg())
    }

    /// Merges identical components and drops zero coefficients; with
    /// `drop_degenerate` also removes degenerate components.
    pub fn normal_form(&self, drop_degenerate: bool) -> Result<CycleChain, CycleError> {
        let mut out: Vec<(ParamCycle, Rational)> = Vec::new();
        for (z, c) in &self.terms {
            if drop_degenerate && is_degenerate(z) {
                continue;
            }
            let mut merged = false;
            for (w, d) in out.iter_mut() {
                if identity_test(w, z)? {
                    *d += c;
                    merged = true;
                    break;
                }
            }
            if !merged {
                out.push((z.clone(), c.clone()));
            }
        }
        out.retain(|(_, c)| !c.is_zero());
        Ok(CycleChain { terms: out, warnings: self.warnings.clone() })
    }

    /// Is the chain zero in normal form (modulo degenerate cycles if asked)?
    pub fn is_zero(&self, modulo_degenerate: bool) -> Result<bool, CycleError> {
        Ok(self.normal_form(modulo_degenerate)?.is_empty())
    }

    pub fn n(&self) -> Option<usize> {
        self.terms.first().map(|(z, _)| z.n())
    }
}

impl fmt::Display for CycleChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (z, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{} * [{}]", crate::linalg::format_rational(c), z)?;
        }
        Ok(())
    }
}

// ---------- facets ----------

enum Locus {
    Factor(Poly),
    AtInfinity(usize),
}

/// Drops parameter `v` (which no longer occurs) from a restricted coordinate.
fn drop_param(r: Restricted, k: usize, v: usize) -> Restricted {
    match r {
        Restricted::Infinity => Restricted::Infinity,
        Restricted::Fn(g) => {
            let map: Vec<usize> = (0..k).map(|j| if j < v { j } else if j > v { j - 1 } else { 0 }).collect();
            Restricted::Fn(g.remap_vars(k - 1, &map))
        }
    }
}

/// The parameter eliminated by a locus, with its value (None for ∞).
fn locus_substitution(params: &[String], locus: &Locus) -> Result<(usize, Option<RatFn>, String), CycleError> {
    let k = params.len();
    Ok(match locus {
        Locus::AtInfinity(v) => (*v, None, format!("{} = inf", params[*v])),
        Locus::Factor(p) => {
            let v = (0..k).rev().find(|&v| p.degree_in(v) == 1).ok_or_else(|| CycleError::UnfactorableLocus(p.fmt_with(params)))?;
            let cs = p.coeffs_in(v);
            let r = RatFn::from_poly(&cs[0]).neg().div(&RatFn::from_poly(&cs[1])).expect("linear coefficient is nonzero");
            (v, Some(r), format!("{} = 0", p.fmt_with(params)))
        }
    })
}

fn restrict_one(r: &Restricted, k: usize, v: usize, sub: &Option<RatFn>, label: &str) -> Result<Restricted, CycleError> {
    let out = match r {
        Restricted::Infinity => Restricted::Infinity,
        Restricted::Fn(g) => match sub {
            None => g.substitute_infinity(v),
            Some(s) => g.substitute(v, s).map_err(|_: PolyError| CycleError::Indeterminate(label.to_string()))?,
        },
    };
    Ok(drop_param(out, k, v))
}

type Restriction = (Vec<String>, Vec<Restricted>, Vec<Restricted>);

/// Restricts coordinate lists to a divisor of the parameter space.
fn restrict_lists(params: &[String], x: &[Restricted], cube: &[Restricted], locus: &Locus) -> Result<Restriction, CycleError> {
    let k = params.len();
    let (v, sub, label) = locus_substitution(params, locus)?;
    let x = x.iter().map(|r| restrict_one(r, k, v, &sub, &label)).collect::<Result<Vec<_>, _>>()?;
    let cube = cube.iter().map(|r| restrict_one(r, k, v, &sub, &label)).collect::<Result<Vec<_>, _>>()?;
    let mut params = params.to_vec();
    params.remove(v);
    Ok((params, x, cube))
}

fn restrict(z: &ParamCycle, locus: &Locus) -> Result<Restriction, CycleError> {
    let cube: Vec<Restricted> = z.cube.iter().map(|g| Restricted::Fn(g.clone())).collect();
    restrict_lists(&z.params, &z.x, &cube, locus)
}

/// The value of a coordinate at a point of (ℙ¹)^k; None if indeterminate.
fn value_at(r: &Restricted, pt: &[PValue]) -> Option<PValue> {
    let g = match r {
        Restricted::Infinity => return Some(PValue::Infinity),
        Restricted::Fn(g) => g,
    };
    let k = pt.len();
    let mut h = g.clone();
    let mut at = Vec::with_capacity(k);
    for (v, p) in pt.iter().enumerate() {
        match p {
            PValue::Finite(c) => at.push(c.clone()),
            PValue::Infinity => {
                let inv = RatFn::var(k, v).inv().expect("a variable is nonzero");
                h = match h.substitute(v, &inv).ok()? {
                    Restricted::Fn(f) => f,
                    Restricted::Infinity => return Some(PValue::Infinity),
                };
                at.push(CycloNum::zero());
            }
        }
    }
    match h.eval(&at) {
        Ok(Some(c)) => Some(PValue::Finite(c)),
        Ok(None) => Some(PValue::Infinity),
        Err(_) => None,
    }
}

/// A base point is harmless when the exceptional curve over it lies in an
/// excluded locus or where some other cube coordinate equals 1.
fn harmless_at(base: &BaseVariety, x: &[Restricted], cube: &[Restricted], skip: usize) -> bool {
    let is_one = |r: &Restricted| matches!(r, Restricted::Fn(g) if g.is_one());
    base.is_excluded(x) || cube.iter().enumerate().any(|(j, r)| j != skip && is_one(r))
}

fn harmless_on_factor(base: &BaseVariety, restricted: &Restriction, skip: usize, factor: &Poly) -> bool {
    let (params, x, cube) = restricted;
    match restrict_lists(params, x, cube, &Locus::Factor(factor.clone())) {
        Ok((_, x2, c2)) => harmless_at(base, &x2, &c2, skip),
        Err(_) => false,
    }
}

fn base_point_error(z: &ParamCycle, g: &RatFn, label: &str, at: String) -> CycleError {
    CycleError::Indeterminate(format!("{} has a base point on {label} at {at}", g.fmt_with(&z.params)))
}

/// For components of dimension ≥ 2: a coordinate other than `skip` whose
/// numerator and denominator vanish together at a point of the locus has an
/// exceptional curve in its graph closure, which the parametrization misses.
/// Base points at infinity of the remaining parameters are checked only for
/// surfaces.
fn check_determinate(z: &ParamCycle, locus: &Locus, skip: usize, restricted: &Restriction) -> Result<Vec<(Vec<PValue>, usize)>, CycleError> {
    let k = z.dim();
    if k < 2 {
        return Ok(vec![]);
    }
    let (v, sub, label) = locus_substitution(&z.params, locus)?;
    let rest = &restricted.0;
    // zero set on the locus: None means identically zero
    let zeros = |p: &Poly, top: bool| -> Result<Option<Vec<Poly>>, CycleError> {
        let r = match &sub {
            None if !top => return Ok(None),
            None => match drop_param(Restricted::Fn(RatFn::from_poly(&p.leading_coeff_in(v))), k, v) {
                Restricted::Fn(g) => g,
                Restricted::Infinity => unreachable!("a polynomial has no pole"),
            },
            Some(_) => match restrict_one(&Restricted::Fn(RatFn::from_poly(p)), k, v, &sub, &label)? {
                Restricted::Fn(g) => g,
                Restricted::Infinity => return Ok(Some(vec![])),
            },
        };
        if r.is_zero() {
            return Ok(None);
        }
        Ok(Some(r.factors().iter().filter(|(_, e)| *e > 0).map(|(f, _)| f.clone()).collect()))
    };
    let mut coords: Vec<(usize, &RatFn)> = Vec::new();
    for r in &z.x {
        if let Restricted::Fn(g) = r {
            coords.push((usize::MAX, g));
        }
    }
    for (j, g) in z.cube.iter().enumerate() {
        if j != skip {
            coords.push((j, g));
        }
    }
    let mut common_factors: Vec<(Poly, &RatFn)> = Vec::new();
    for (_, g) in &coords {
        let (n, d) = g.num_den();
        let (dn, dd) = (n.degree_in(v), d.degree_in(v));
        let (zn, zd) = (zeros(&n, dn >= dd)?, zeros(&d, dd >= dn)?);
        let common: Vec<Poly> = match (&zn, &zd) {
            (None, Some(fs)) | (Some(fs), None) => fs.clone(),
            (Some(a), Some(b)) => a.iter().filter(|f| b.contains(f)).cloned().collect(),
            (None, None) => vec![],
        };
        common_factors.extend(common.into_iter().map(|c| (c, *g)));
    }
    if k != 2 {
        for (c, g) in common_factors {
            if !harmless_on_factor(&z.base, restricted, skip, &c) {
                return Err(base_point_error(z, g, &label, format!("{} = 0", c.fmt_with(rest))));
            }
        }
        return Ok(vec![]);
    }
    // on a surface every base point is a point: collect them with those over ∞
    let u = 1 - v;
    let mut pts: Vec<Vec<PValue>> = Vec::new();
    let place = |pv: PValue, pu: PValue| {
        let mut p = vec![PValue::Infinity; 2];
        p[v] = pv;
        p[u] = pu;
        p
    };
    let v_at = |cu: &PValue| -> PValue {
        match (&sub, cu) {
            (None, _) => PValue::Infinity,
            (Some(r), PValue::Infinity) => match drop_param(r.substitute_infinity(u), 2, u) {
                Restricted::Infinity => PValue::Infinity,
                Restricted::Fn(f) => PValue::Finite(f.as_constant().expect("constant on a point")),
            },
            (Some(r), PValue::Finite(c)) => {
                let mut at = vec![CycloNum::zero(); 2];
                at[u] = c.clone();
                match r.eval(&at) {
                    Ok(Some(x)) => PValue::Finite(x),
                    _ => PValue::Infinity,
                }
            }
        }
    };
    pts.push(place(v_at(&PValue::Infinity), PValue::Infinity));
    if let Some(r) = &sub {
        if let Some(cs) = r.num_den().1.as_univariate(u) {
            for (c, _) in roots_in_field(&cs).0 {
                pts.push(place(PValue::Infinity, PValue::Finite(c)));
            }
        }
    }
    for (c, g) in common_factors {
        let cs = c.as_univariate(0).expect("one remaining parameter");
        let (roots, cof) = roots_in_field(&cs);
        if cof.len() > 1 && !harmless_on_factor(&z.base, restricted, skip, &c) {
            return Err(base_point_error(z, g, &label, format!("{} = 0", c.fmt_with(rest))));
        }
        for (r, _) in roots {
            let cu = PValue::Finite(r);
            pts.push(place(v_at(&cu), cu));
        }
    }
    let mut free = Vec::new();
    for pt in pts {
        let skip_free = value_at(&Restricted::Fn(z.cube[skip].clone()), &pt).is_none();
        let bad: Vec<usize> = coords.iter().enumerate().filter(|(_, (_, g))| value_at(&Restricted::Fn((*g).clone()), &pt).is_none()).map(|(m, _)| m).collect();
        if bad.is_empty() {
            continue;
        }
        let x: Option<Vec<PValue>> = z.x.iter().map(|r| value_at(r, &pt)).collect();
        let cube: Vec<Option<PValue>> = z.cube.iter().map(|g| value_at(&Restricted::Fn(g.clone()), &pt)).collect();
        let one = PValue::Finite(CycloNum::one());
        let excluded = x.as_ref().is_some_and(|x| z.base.excluded.iter().any(|l| l.iter().all(|(i, val)| x[*i] == *val)));
        let at_one = cube.iter().enumerate().any(|(j, c)| j != skip && c.as_ref() == Some(&one));
        if excluded || at_one {
            continue;
        }
        if skip_free {
            // z_i varies on the exceptional curves; with other coordinates
            // also free there can be infinitely near base points
            return Err(base_point_error(z, coords[bad[0]].1, &label, format!("{pt:?} (infinitely near base points are not resolved)")));
        }
        if bad.len() == 1 && coords[bad[0]].0 != usize::MAX && x.is_some() {
            // one free cube coordinate over a point: added by the caller
            free.push((pt, coords[bad[0]].0));
            continue;
        }
        return Err(base_point_error(z, coords[bad[0]].1, &label, format!("{pt:?}")));
    }
    Ok(free)
}

/// A function in local coordinates centred at a point of (ℙ¹)^k.
fn local_fn(g: &RatFn, pt: &[PValue]) -> RatFn {
    let k = pt.len();
    let mut h = g.clone();
    for (v, p) in pt.iter().enumerate() {
        let s = match p {
            PValue::Finite(c) => RatFn::var(k, v).add(&RatFn::constant(k, c.clone())),
            PValue::Infinity => RatFn::var(k, v).inv().expect("a variable is nonzero"),
        };
        h = match h.substitute(v, &s) {
            Ok(Restricted::Fn(f)) => f,
            _ => unreachable!("an invertible substitution keeps a nonzero function finite"),
        };
    }
    h
}

fn low_degree(p: &Poly) -> i64 {
    p.terms().keys().map(|e| e.iter().map(|&d| d as i64).sum::<i64>()).min().unwrap_or(0)
}

fn linear_part(p: &Poly) -> Vec<CycloNum> {
    (0..p.nvars())
        .map(|v| {
            let mut e = vec![0u32; p.nvars()];
            e[v] = 1;
            p.terms().get(&e).cloned().unwrap_or_else(CycloNum::zero)
        })
        .collect()
}

/// The exceptional component over a simple base point of cube coordinate `j`
/// lying on the facet {z_i = f}: the point times a free z_j, with
/// multiplicity ord_E(z_i).
fn exceptional_component(z: &ParamCycle, i: usize, f: FacetValue, pt: &[PValue], j: usize) -> Result<(ParamCycle, i32), CycleError> {
    let (n, d) = local_fn(&z.cube[j], pt).num_den();
    let (ln, ld) = (linear_part(&n), linear_part(&d));
    let det = ln[0].mul(&ld[1]).sub(&ln[1].mul(&ld[0]));
    if low_degree(&n) != 1 || low_degree(&d) != 1 || det.is_zero() {
        return Err(CycleError::Indeterminate(format!("{} has a non-simple base point at {pt:?}", z.cube[j].fmt_with(&z.params))));
    }
    let (ni, di) = local_fn(&z.cube[i - 1], pt).num_den();
    let ord = (low_degree(&ni) - low_degree(&di)) as i32;
    let mult = if f == FacetValue::Zero { ord } else { -ord };
    let label = || format!("exceptional curve of {z} over {pt:?}");
    let constant = |r: &Restricted| -> Result<Restricted, CycleError> {
        match value_at(r, pt) {
            Some(PValue::Finite(c)) => Ok(Restricted::Fn(RatFn::constant(1, c))),
            Some(PValue::Infinity) => Ok(Restricted::Infinity),
            None => Err(CycleError::Indeterminate(label())),
        }
    };
    let x = z.x.iter().map(constant).collect::<Result<Vec<_>, _>>()?;
    let mut cube = Vec::new();
    for (m, g) in z.cube.iter().enumerate() {
        if m == i - 1 {
            continue;
        }
        if m == j {
            cube.push(RatFn::var(1, 0));
            continue;
        }
        match constant(&Restricted::Fn(g.clone()))? {
            Restricted::Fn(c) if !c.is_zero() => cube.push(c),
            r => {
                let value = if matches!(r, Restricted::Infinity) { FacetValue::Infinity } else { FacetValue::Zero };
                return Err(CycleError::ImproperFacet { coord: m + 1, value, component: label() });
            }
        }
    }
    let params = vec![fresh_name(&z.params, "e")];
    Ok((ParamCycle { base: z.base.clone(), params, x, cube }, mult))
}

/// ∂_f^i z: the pullback of z along the facet {z_i = f} (i is 1-based).
pub fn facet_pullback(z: &ParamCycle, i: usize, f: FacetValue) -> Result<CycleChain, CycleError> {
    assert!(i >= 1 && i <= z.n(), "cube index out of range");
    let c = &z.cube[i - 1];
    let mut out = CycleChain::new();
    if let Some(v) = c.as_constant() {
        if v.is_zero() && f == FacetValue::Zero {
            return Err(CycleError::ImproperFacet { coord: i, value: f, component: z.to_string() });
        }
        return Ok(out);
    }
    let mut loci: Vec<(Locus, i32)> = Vec::new();
    for (p, e) in c.factors() {
        let m = if f == FacetValue::Zero { *e } else { -*e };
        if m > 0 {
            loci.push((Locus::Factor(p.clone()), m));
        }
    }
    for v in 0..z.dim() {
        let ord = c.order_at_infinity(v);
        let m = if f == FacetValue::Zero { ord } else { -ord };
        if m > 0 {
            loci.push((Locus::AtInfinity(v), m));
        }
    }
    let mut exceptional: Vec<(Vec<PValue>, usize)> = Vec::new();
    for (locus, mult) in loci {
        let restricted = restrict(z, &locus)?;
        if z.base.is_excluded(&restricted.1) {
            continue;
        }
        for (pt, j) in check_determinate(z, &locus, i - 1, &restricted)? {
            if !exceptional.iter().any(|(p, _)| *p == pt) {
                exceptional.push((pt, j));
            }
        }
        let (params, x, cube) = restricted;
        let mut rest: Vec<Restricted> = cube;
        rest.remove(i - 1);
        let hits_one = rest.iter().any(|r| matches!(r, Restricted::Fn(g) if g.is_one()));
        if hits_one {
            if mult > 1 {
                out.warnings.push(format!("dropped a component of multiplicity {mult} at coordinate 1 in the facet z_{i} = {f} of {z}"));
            }
            continue;
        }
        let mut fns = Vec::new();
        for (j, r) in rest.into_iter().enumerate() {
            let coord = if j + 1 < i { j + 1 } else { j + 2 };
            match r {
                Restricted::Infinity => return Err(CycleError::ImproperFacet { coord, value: FacetValue::Infinity, component: z.to_string() }),
                Restricted::Fn(g) if g.is_zero() => return Err(CycleError::ImproperFacet { coord, value: FacetValue::Zero, component: z.to_string() }),
                Restricted::Fn(g) => fns.push(g),
            }
        }
        let comp = ParamCycle { base: z.base.clone(), params, x, cube: fns };
        out.push(comp, Rational::from_integer(mult.into()));
    }
    for (pt, j) in exceptional {
        let (comp, mult) = exceptional_component(z, i, f, &pt, j)?;
        if mult != 0 {
            out.push(comp, Rational::from_integer(mult.into()));
        }
    }
    Ok(out)
}

/// ∂_f^i applied to a chain, without normalization.
pub fn facet_chain(c: &CycleChain, i: usize, f: FacetValue) -> Result<CycleChain, CycleError> {
    let mut out = CycleChain::new();
    out.warnings = c.warnings.clone();
    for (z, q) in &c.terms {
        out = out.add(&facet_pullback(z, i, f)?.scale(q));
    }
    Ok(out)
}

/// ∂_B = Σ_j (−1)^j (∂_0^j − ∂_∞^j), in normal form modulo degenerate cycles.
pub fn boundary(c: &CycleChain) -> Result<CycleChain, CycleError> {
    boundary_raw(c)?.normal_form(true)
}

/// ∂_B without normalization.
pub fn boundary_raw(c: &CycleChain) -> Result<CycleChain, CycleError> {
    let mut out = CycleChain::new();
    out.warnings = c.warnings.clone();
    let Some(n) = c.n() else { return Ok(out) };
    for j in 1..=n {
        let s = if j % 2 == 0 { Rational::one() } else { -Rational::one() };
        out = out.add(&facet_chain(c, j, FacetValue::Zero)?.scale(&s));
        out = out.add(&facet_chain(c, j, FacetValue::Infinity)?.scale(&-s));
    }
    Ok(out)
}

// ---------- degeneracy and identity ----------

/// Deterministic sample parameters ±(2m+1)/(m+3), pairwise distinct.
fn sample_value(m: usize) -> CycloNum {
    let v = Rational::new(((2 * m + 1) as i64).into(), ((m + 3) as i64).into());
    CycloNum::from_rational(if m.is_multiple_of(2) { v } else { -v })
}

/// Parameter points where no factor of any coordinate vanishes.
fn generic_points(z: &ParamCycle, count: usize) -> Vec<Vec<CycloNum>> {
    let k = z.dim();
    let coords = z.all_coords();
    let mut out = Vec::new();
    let mut m = 0;
    while out.len() < count && m < 10_000 {
        let pt: Vec<CycloNum> = (0..k).map(|v| sample_value(m * (k + 1) + 7 * v + 3)).collect();
        m += 1;
        let ok = coords.iter().all(|r| match r {
            Restricted::Infinity => true,
            Restricted::Fn(g) => g.factors().iter().all(|(p, _)| !p.eval(&pt).is_zero()),
        });
        if ok {
            out.push(pt);
        }
    }
    out
}

fn gradient(g: &Restricted, pt: &[CycloNum]) -> Vec<CycloNum> {
    let k = pt.len();
    match g {
        Restricted::Infinity => vec![CycloNum::zero(); k],
        Restricted::Fn(g) => {
            if g.as_constant().is_some() {
                return vec![CycloNum::zero(); k];
            }
            let val = g.eval(pt).ok().flatten().expect("generic point");
            (0..k).map(|v| val.mul(&g.dlog_at(v, pt))).collect()
        }
    }
}

/// Rank of a matrix over the cyclotomic field.
pub fn cyclo_rank(mut rows: Vec<Vec<CycloNum>>) -> usize {
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut rank = 0;
    for col in 0..ncols {
        let Some(p) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else { continue };
        rows.swap(rank, p);
        let inv = rows[rank][col].inv().unwrap();
        for r in 0..rows.len() {
            if r != rank && !rows[r][col].is_zero() {
                let f = rows[r][col].mul(&inv);
                for c in col..ncols {
                    let t = rows[rank][c].mul(&f);
                    rows[r][c] = rows[r][c].sub(&t);
                }
            }
        }
        rank += 1;
    }
    rank
}

/// True iff the component is a pullback π_i^* along some cube projection,
/// i.e. forgetting the i-th cube coordinate drops the dimension of the
/// image (this includes components whose map is not generically finite).
pub fn is_degenerate(z: &ParamCycle) -> bool {
    let k = z.dim();
    if k == 0 {
        return false;
    }
    let pts = generic_points(z, 2);
    (0..z.n()).any(|i| {
        pts.iter().all(|pt| {
            let rows: Vec<Vec<CycloNum>> = z
                .x
                .iter()
                .cloned()
                .chain(z.cube.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, g)| Restricted::Fn(g.clone())))
                .map(|g| gradient(&g, pt))
                .collect();
            cyclo_rank(rows) < k
        })
    })
}

const MAX_IDENTITY_SAMPLES: usize = 600;

/// Do two components define the same cycle? Exact map equality first; for
/// curves, image equality via membership of more sample points than the
/// intersection bound; higher-dimensional components must agree as maps.
pub fn identity_test(z1: &ParamCycle, z2: &ParamCycle) -> Result<bool, CycleError> {
    if z1.base != z2.base || z1.n() != z2.n() || z1.dim() != z2.dim() {
        return Ok(false);
    }
    let c1 = z1.all_coords();
    let c2 = z2.all_coords();
    if c1.iter().zip(&c2).all(|(a, b)| restricted_eq(a, b)) {
        return Ok(true);
    }
    if z1.dim() != 1 {
        return Ok(false);
    }
    // constant coordinates must agree
    for (a, b) in c1.iter().zip(&c2) {
        let (va, vb) = (restricted_value(a), restricted_value(b));
        if va.is_some() != vb.is_some() || (va.is_some() && va != vb) {
            return Ok(false);
        }
    }
    let need = 2 * z1.degree_bound() * z2.degree_bound() + 1;
    if need > MAX_IDENTITY_SAMPLES {
        return Err(CycleError::DegreeBoundExceeded(need));
    }
    let solve_idx = (0..c2.len()).filter(|&j| restricted_value(&c2[j]).is_none()).min_by_key(|&j| match &c2[j] {
        Restricted::Fn(g) => g.degree_bound(),
        Restricted::Infinity => u32::MAX,
    });
    let Some(j) = solve_idx else { return Ok(false) };
    let Restricted::Fn(g) = &c2[j] else { unreachable!() };
    let (gn, gd) = g.num_den();
    let at_inf = z2.eval_at_infinity();
    let mut checked = 0;
    let mut m = 0;
    while checked < need {
        let s = sample_value(1000 + m);
        m += 1;
        if m > 20 * need + 100 {
            return Ok(false);
        }
        let Some(p1) = z1.eval_point(&[s]) else { continue };
        if at_inf.as_ref() == Some(&p1) {
            checked += 1;
            continue;
        }
        let eqn = match &p1[j] {
            PValue::Finite(c) => gn.sub(&gd.scale(c)),
            PValue::Infinity => gd.clone(),
        };
        let cs = eqn.as_univariate(0).unwrap_or_default();
        if cs.iter().all(|c| c.is_zero()) {
            return Ok(false);
        }
        let (roots, _) = roots_in_field(&cs);
        let member = roots.iter().any(|(r, _)| z2.eval_point(std::slice::from_ref(r)).as_ref() == Some(&p1));
        if !member {
            return Ok(false);
        }
        checked += 1;
    }
    Ok(true)
}

/// Identity after substituting z₂'s parameters by `reparam` (functions of z₁'s parameters).
pub fn identity_test_with(z1: &ParamCycle, z2: &ParamCycle, reparam: &[RatFn]) -> Result<bool, CycleError> {
    let z2r = z2.reparametrize(z1.params.clone(), reparam)?;
    identity_test(z1, &z2r)
}

// ---------- projections, normalization, moving-lemma passes ----------

/// π_i^* z: inserts a free cube coordinate at position i (1-based).
pub fn pullback_projection(z: &ParamCycle, i: usize) -> ParamCycle {
    let k = z.dim();
    let mut params = z.params.clone();
    params.push(fresh_name(&z.params, "a"));
    let ext = |r: &Restricted| match r {
        Restricted::Infinity => Restricted::Infinity,
        Restricted::Fn(g) => Restricted::Fn(g.extend_vars(1)),
    };
    let mut cube: Vec<RatFn> = z.cube.iter().map(|g| g.extend_vars(1)).collect();
    cube.insert(i - 1, RatFn::var(k + 1, k));
    ParamCycle { base: z.base.clone(), params, x: z.x.iter().map(ext).collect(), cube }
}

fn fresh_name(used: &[String], stem: &str) -> String {
    if !used.iter().any(|u| u == stem) {
        return stem.to_string();
    }
    (1..).map(|i| format!("{stem}{i}")).find(|c| !used.contains(c)).unwrap()
}

pub fn pullback_chain(c: &CycleChain, i: usize) -> CycleChain {
    CycleChain { terms: c.terms.iter().map(|(z, q)| (pullback_projection(z, i), q.clone())).collect(), warnings: c.warnings.clone() }
}

/// Z ↦ Z − π_i^* ∂_∞^i Z for i = 1..n; the result has no ∂_∞ facets.
pub fn normalize(c: &CycleChain) -> Result<CycleChain, CycleError> {
    let Some(n) = c.n() else { return Ok(c.clone()) };
    let mut z = c.clone();
    for i in 1..=n {
        let w = facet_chain(&z, i, FacetValue::Infinity)?.normal_form(false)?;
        z = z.sub(&pullback_chain(&w, i)).normal_form(false)?;
    }
    Ok(z)
}

fn check_move_index(c: &CycleChain, i: usize) -> Result<usize, CycleError> {
    let n = c.n().unwrap_or(0);
    if i < 1 || i + 1 > n {
        return Err(CycleError::ShapeMismatch(format!("moving pass index {i} needs 1 <= i < n = {n}")));
    }
    Ok(n)
}

/// Builds components over ∂_0^i w with `extra` new parameters, whose cube
/// coordinates i..i+extra are the new parameters followed by `last`.
fn over_facet(c: &CycleChain, i: usize, extra: usize, last: impl Fn(&RatFn, &[RatFn]) -> RatFn) -> Result<CycleChain, CycleError> {
    let facet = facet_chain(c, i, FacetValue::Zero)?;
    let mut out = CycleChain::new();
    out.warnings = facet.warnings.clone();
    for (w, q) in &facet.terms {
        let k = w.dim();
        let mut params = w.params.clone();
        let mut news = Vec::new();
        for stem in ["a", "b"].iter().take(extra) {
            let name = fresh_name(&params, stem);
            params.push(name);
            news.push(RatFn::var(k + extra, params.len() - 1));
        }
        let ext: Vec<RatFn> = w.cube.iter().map(|g| g.extend_vars(extra)).collect();
        let mut cube: Vec<RatFn> = ext[..i - 1].to_vec();
        cube.extend(news.iter().cloned());
        cube.push(last(&ext[i - 1], &news));
        cube.extend(ext[i..].iter().cloned());
        let x = w
            .x
            .iter()
            .map(|r| match r {
                Restricted::Infinity => Restricted::Infinity,
                Restricted::Fn(g) => Restricted::Fn(g.extend_vars(extra)),
            })
            .collect();
        out.push(ParamCycle { base: w.base.clone(), params, x, cube }, q.clone());
    }
    Ok(out)
}

/// M_i(w) = (π_{i+2})_*(Y_i · π_{i,i+1}^* ∂_0^i w), Y_i: (1−z_i)(1−z_{i+1}) = 1 − z′_{i+1}.
pub fn move_mi(c: &CycleChain, i: usize) -> Result<CycleChain, CycleError> {
    check_move_index(c, i)?;
    over_facet(c, i, 1, |w, news| {
        let one = RatFn::one(w.nvars());
        let a = &news[0];
        // b = (w − a)/(1 − a)
        w.sub(a).div(&one.sub(a)).expect("1 - a is nonzero")
    })
}

/// H_i(w) = (π_{i+3})_*(𝒴_i · π_{i,i+1,i+2}^* ∂_0^i w), 𝒴_i: (1−z_i)(1−z_{i+1})(1−z′_{i+1}) = 1 − z″_{i+1}.
pub fn homotopy_hi(c: &CycleChain, i: usize) -> Result<CycleChain, CycleError> {
    check_move_index(c, i)?;
    over_facet(c, i, 2, |w, news| {
        let one = RatFn::one(w.nvars());
        let d = one.sub(&news[0]).mul(&one.sub(&news[1]));
        // c = 1 − (1 − w)/((1 − a)(1 − b))
        one.sub(&one.sub(w).div(&d).expect("nonzero"))
    })
}

// ---------- Tame symbols ----------

/// A place on a one-parameter curve.
#[derive(Clone, Debug, PartialEq)]
pub enum Place {
    At(CycloNum),
    Infinity,
    /// The zero locus of a monic irreducible factor of degree > 1.
    Factor(Poly),
}

#[derive(Clone, Debug, PartialEq)]
pub enum TameValue {
    Cyclo { value: CycloNum, torsion_order: Option<u32> },
    /// The residue field of the place is larger than the coefficient field.
    NonCyclotomic(String),
}

impl TameValue {
    pub fn is_torsion(&self) -> bool {
        matches!(self, TameValue::Cyclo { torsion_order: Some(_), .. })
    }
}

/// Order and leading coefficient of a univariate function at a place.
fn local_expansion(f: &RatFn, place: &Place) -> Result<(i32, CycloNum), CycleError> {
    if f.is_zero() {
        return Err(CycleError::ZeroFunction);
    }
    match place {
        Place::Infinity => Ok((f.order_at_infinity(0), f.coef().clone())),
        Place::At(c) => {
            let lin = Poly::from_univariate(1, 0, &[c.neg(), CycloNum::one()]);
            let mut ord = 0;
            let mut lc = f.coef().clone();
            for (p, e) in f.factors() {
                let mut q = p.clone();
                let mut m = 0;
                while let Some(r) = q.exact_div(&lin) {
                    q = r;
                    m += 1;
                }
                ord += m * e;
                lc = lc.mul(&q.eval(std::slice::from_ref(c)).pow(*e as i64).expect("cofactor is nonzero"));
            }
            Ok((ord, lc))
        }
        Place::Factor(_) => unreachable!(),
    }
}

/// (−1)^{ν(f)ν(g)} f^{ν(g)} / g^{ν(f)} at a place of a one-parameter base.
pub fn tame_symbol(f: &RatFn, g: &RatFn, place: &Place) -> Result<TameValue, CycleError> {
    if f.is_zero() || g.is_zero() {
        return Err(CycleError::ZeroFunction);
    }
    let place = match place {
        Place::Factor(p) => {
            let cs = p.as_univariate(0).expect("univariate place");
            if cs.len() == 2 {
                Place::At(cs[0].neg().mul(&cs[1].inv().unwrap()))
            } else {
                return Ok(TameValue::NonCyclotomic(format!("residue field of degree {}", cs.len() - 1)));
            }
        }
        p => p.clone(),
    };
    let (nf, af) = local_expansion(f, &place)?;
    let (ng, ag) = local_expansion(g, &place)?;
    let sign = if (nf * ng) % 2 == 0 { CycloNum::one() } else { CycloNum::from_i64(-1) };
    let value = sign.mul(&af.pow(ng as i64).unwrap()).mul(&ag.pow(-(nf as i64)).unwrap());
    let bound = 2 * value.conductor().max(1);
    let torsion_order = value.root_of_unity_order(bound);
    Ok(TameValue::Cyclo { value, torsion_order })
}

/// The places of a one-parameter base where f or g has a zero or a pole.
pub fn divisor_places(fns: &[&RatFn]) -> Vec<Place> {
    let mut out: Vec<Place> = Vec::new();
    for f in fns {
        for (p, _) in f.factors() {
            let cs = p.as_univariate(0).expect("univariate function");
            let pl = if cs.len() == 2 { Place::At(cs[0].neg()) } else { Place::Factor(p.clone()) };
            if !out.contains(&pl) {
                out.push(pl);
            }
        }
        if f.order_at_infinity(0) != 0 && !out.contains(&Place::Infinity) {
            out.push(Place::Infinity);
        }
    }
    out
}

// ---------- good real position (advisory) ----------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Advisory {
    Pass,
    Inconclusive,
    Fail,
}

impl fmt::Display for Advisory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Advisory::Pass => "PASS",
            Advisory::Inconclusive => "INCONCLUSIVE",
            Advisory::Fail => "FAIL",
        };
        write!(f, "{s}")
    }
}

#[derive(Clone, Debug)]
pub struct GoodPositionEntry {
    pub component: usize,
    /// The iterated facet, e.g. "∂_0^2 ∂_∞^1", or "" for the component itself.
    pub face: String,
    pub j: usize,
    pub status: Advisory,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct GoodPositionReport {
    pub entries: Vec<GoodPositionEntry>,
}

impl GoodPositionReport {
    pub fn overall(&self) -> Advisory {
        if self.entries.iter().any(|e| e.status == Advisory::Fail) {
            Advisory::Fail
        } else if self.entries.iter().any(|e| e.status == Advisory::Inconclusive) {
            Advisory::Inconclusive
        } else {
            Advisory::Pass
        }
    }
}

/// FNV-1a, for deterministic per-component seeds.
pub fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// All iterated facets of z (including z itself, with label "").
fn faces(z: &ParamCycle) -> Result<Vec<(String, ParamCycle)>, CycleError> {
    let mut out = vec![(String::new(), z.clone())];
    let mut frontier = vec![(String::new(), z.clone())];
    while let Some((label, w)) = frontier.pop() {
        if w.dim() == 0 {
            continue;
        }
        for i in 1..=w.n() {
            for f in [FacetValue::Zero, FacetValue::Infinity] {
                for (c, _) in facet_pullback(&w, i, f)?.terms {
                    let l = format!("∂_{f}^{i}{}{label}", if label.is_empty() { "" } else { " " });
                    out.push((l.clone(), c.clone()));
                    frontier.push((l, c));
                }
            }
        }
    }
    Ok(out)
}

const PROBES: usize = 40;

fn probe_locus(z: &ParamCycle, j: usize, rng: &mut Rng8) -> Advisory {
    let k = z.dim();
    let fns = &z.cube[..j];
    let eval = |x: &[f64]| -> Option<(Vec<Complex64>, Vec<Vec<f64>>)> {
        let p: Vec<Complex64> = (0..k).map(|v| Complex64::new(x[2 * v], x[2 * v + 1])).collect();
        let mut vals = Vec::new();
        let mut jac = Vec::new();
        for g in fns {
            let val = g.eval_complex(&p);
            if !val.is_finite() || val.norm() > 1e12 {
                return None;
            }
            let mut row = Vec::with_capacity(2 * k);
            for v in 0..k {
                let d = if g.uses_var(v) { val * g.dlog_complex(v, &p) } else { Complex64::new(0.0, 0.0) };
                if !d.is_finite() {
                    return None;
                }
                row.push(d.im);
                row.push(d.re);
            }
            vals.push(val);
            jac.push(row);
        }
        Some((vals, jac))
    };
    let mut full = 0;
    let mut deficient = 0;
    for _ in 0..PROBES {
        let mut x: Vec<f64> = (0..2 * k)
            .map(|_| {
                let r = 10f64.powf(rng.gen_range(-1.0..1.0));
                r * rng.gen_range(-1.0..1.0)
            })
            .collect();
        let mut ok = false;
        for _ in 0..80 {
            let Some((vals, jac)) = eval(&x) else { break };
            let fvec: Vec<f64> = vals.iter().map(|v| v.im).collect();
            let scale = vals.iter().map(|v| v.norm()).fold(1.0, f64::max);
            if fvec.iter().all(|f| f.abs() < 1e-11 * scale) {
                ok = vals.iter().all(|v| v.re < 0.0);
                break;
            }
            match gauss_newton_step(&jac, &fvec) {
                Some(dx) => x.iter_mut().zip(&dx).for_each(|(a, d)| *a -= d),
                None => break,
            }
        }
        if !ok {
            continue;
        }
        let (_, jac) = eval(&x).unwrap();
        if real_rank(&jac) >= j {
            full += 1;
        } else {
            deficient += 1;
        }
    }
    match (full, deficient) {
        (_, 0) => Advisory::Pass,
        (0, _) => Advisory::Fail,
        _ => Advisory::Inconclusive,
    }
}

fn gauss_newton_step(jac: &[Vec<f64>], f: &[f64]) -> Option<Vec<f64>> {
    let j = jac.len();
    let n = jac.first().map(|r| r.len()).unwrap_or(0);
    if n == 0 {
        return None;
    }
    // (J Jᵀ + μ) λ = f, dx = Jᵀ λ
    let mut a = vec![vec![0.0; j + 1]; j];
    for r in 0..j {
        for c in 0..j {
            a[r][c] = (0..n).map(|t| jac[r][t] * jac[c][t]).sum();
        }
        a[r][j] = f[r];
    }
    let tr: f64 = (0..j).map(|r| a[r][r]).sum::<f64>().max(1e-300);
    for r in 0..j {
        a[r][r] += 1e-14 * tr;
    }
    for c in 0..j {
        let p = (c..j).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        a.swap(c, p);
        if a[c][c].abs() < 1e-300 {
            return None;
        }
        for r in 0..j {
            if r != c {
                let fct = a[r][c] / a[c][c];
                for t in c..=j {
                    a[r][t] -= fct * a[c][t];
                }
            }
        }
    }
    let lam: Vec<f64> = (0..j).map(|r| a[r][j] / a[r][r]).collect();
    Some((0..n).map(|t| (0..j).map(|r| jac[r][t] * lam[r]).sum()).collect())
}

fn real_rank(rows: &[Vec<f64>]) -> usize {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let scale = rows.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for r in rows {
        let mut v = r.clone();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            v.iter_mut().zip(b).for_each(|(a, c)| *a -= d * c);
        }
        let nrm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nrm > 1e-7 * scale {
            basis.push(v.iter().map(|a| a / nrm).collect());
        }
    }
    basis.len()
}

/// Samples the loci where the first j cube coordinates are real-negative,
/// on every component and every iterated facet, and compares the local
/// real dimension with the expected bound 2·dim − j. Advisory only.
pub fn good_position_report(c: &CycleChain) -> Result<GoodPositionReport, CycleError> {
    let mut rep = GoodPositionReport::default();
    for (idx, (z, _)) in c.terms.iter().enumerate() {
        for (face, w) in faces(z)? {
            for j in 1..=w.n() {
                let mut rng = crate::random::rng(fnv1a(&format!("{w}|{face}|{j}")));
                let status = probe_locus(&w, j, &mut rng);
                let detail = format!("expected real dimension <= {}", 2 * w.dim() as i64 - j as i64);
                rep.entries.push(GoodPositionEntry { component: idx, face: face.clone(), j, status, detail });
            }
        }
    }
    Ok(rep)
}

// ---------- random symbol graphs ----------

fn random_root(rng: &mut Rng8) -> Rational {
    let choices = [(-3, 1), (-2, 1), (-1, 1), (0, 1), (2, 1), (3, 1), (1, 2), (-1, 2), (3, 2), (1, 3)];
    let (a, b) = choices[rng.gen_range(0..choices.len())];
    Rational::new(a.into(), b.into())
}

fn random_constant(rng: &mut Rng8) -> CycloNum {
    let choices = [(1, 1), (-1, 1), (2, 1), (-2, 1), (1, 2), (3, 1), (-1, 3)];
    let (a, b) = choices[rng.gen_range(0..choices.len())];
    CycloNum::from_rational(Rational::new(a.into(), b.into()))
}

fn random_factor(rng: &mut Rng8, k: usize) -> Poly {
    let r = Poly::constant(k, CycloNum::from_rational(random_root(rng)));
    let s = Poly::var(k, 0);
    if k == 1 {
        return s.sub(&r);
    }
    let t = Poly::var(k, 1);
    match rng.gen_range(0..4) {
        0 => s.sub(&r),
        1 => t.sub(&r),
        2 => s.add(&t).sub(&r),
        _ => {
            let r = if r.is_zero() { Poly::one(k) } else { r };
            s.mul(&t).sub(&r)
        }
    }
}

/// A random function c·∏ ℓ_m^{±1} with at most `max_deg` linear factors.
pub fn random_symbol_function(rng: &mut Rng8, k: usize, max_deg: usize) -> RatFn {
    let d = rng.gen_range(1..=max_deg);
    let mut f = RatFn::constant(k, random_constant(rng));
    for _ in 0..d {
        let e = if rng.gen_bool(0.7) { 1 } else { -1 };
        f = f.mul(&RatFn::from_poly(&random_factor(rng, k)).pow(e).unwrap());
    }
    f
}

/// A random admissible symbol graph over ℙ¹ (k = 1) or (ℙ¹)² (k = 2):
/// every iterated facet is proper.
pub fn random_symbol_graph(rng: &mut Rng8, k: usize, n: usize, max_deg: usize) -> ParamCycle {
    let base = Arc::new(match k {
        1 => BaseVariety::line("t"),
        2 => BaseVariety::product(&["s", "t"]),
        _ => panic!("random symbol graphs over (P1)^k need k in {{1, 2}}"),
    });
    loop {
        let fns: Vec<RatFn> = (0..n).map(|_| random_symbol_function(rng, k, max_deg)).collect();
        if fns.iter().any(|f| f.as_constant().is_some()) {
            continue;
        }
        let z = ParamCycle::symbol(base.clone(), fns).expect("graph over the base");
        if faces(&z).is_ok() {
            return z;
        }
    }
}

/// Total absolute value of the coefficients (a size measure for reports).
pub fn chain_mass(c: &CycleChain) -> Rational {
    c.terms.iter().map(|(_, q)| q.abs()).fold(Rational::zero(), |a, b| a + b)
}

/// The sign (−1)^i as a rational.
pub fn sign_pow(i: usize) -> Rational {
    if i.is_multiple_of(2) {
        Rational::one()
    } else {
        -Rational::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Arc<BaseVariety> {
        Arc::new(BaseVariety::line("t"))
    }

    fn t() -> RatFn {
        RatFn::var(1, 0)
    }

    fn c(n: i64) -> RatFn {
        RatFn::constant(1, CycloNum::from_i64(n))
    }

    #[test]
    fn graph_of_t_and_constant() {
        let z = ParamCycle::symbol(line(), vec![t(), c(3)]).unwrap();
        let f = facet_pullback(&z, 1, FacetValue::Zero).unwrap();
        assert_eq!(f.terms.len(), 1);
        assert_eq!(f.terms[0].0.cube[0].as_constant(), Some(CycloNum::from_i64(3)));
        assert!(matches!(facet_pullback(&z, 2, FacetValue::Zero), Ok(ch) if ch.is_empty()));
    }

    #[test]
    fn steinberg_facet_is_dropped() {
        let z = ParamCycle::symbol(line(), vec![t(), c(1).sub(&t())]).unwrap();
        assert!(facet_pullback(&z, 2, FacetValue::Zero).unwrap().is_empty());
        assert!(!is_degenerate(&z));
    }

    #[test]
    fn degenerate_over_point() {
        let base = Arc::new(BaseVariety::point());
        let z = ParamCycle::new(base, vec!["t".into()], vec![], vec![t(), c(5)]).unwrap();
        assert!(is_degenerate(&z));
    }

    #[test]
    fn tame_of_constant_and_t() {
        let z1 = CycloNum::zeta_pow(3, 1);
        let f = RatFn::constant(1, z1.clone());
        let v = tame_symbol(&f, &t(), &Place::At(CycloNum::zero())).unwrap();
        assert_eq!(v, TameValue::Cyclo { value: z1, torsion_order: Some(3) });
        let w = tame_symbol(&t(), &t(), &Place::At(CycloNum::zero())).unwrap();
        assert_eq!(w, TameValue::Cyclo { value: CycloNum::from_i64(-1), torsion_order: Some(2) });
    }

    #[test]
    fn reparametrized_curve_is_identical() {
        let z = ParamCycle::symbol(line(), vec![t(), c(1).sub(&t())]).unwrap();
        // same image, parametrized by 1/t
        let w = z.reparametrize(vec!["t".into()], &[t().inv().unwrap()]).unwrap();
        assert!(identity_test(&z, &w).unwrap());
        let other = ParamCycle::symbol(line(), vec![t(), c(2).sub(&t())]).unwrap();
        assert!(!identity_test(&z, &other).unwrap());
    }
}
