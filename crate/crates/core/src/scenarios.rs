//! End-to-end scenario runners and their reports.
//!
//! Every runner is deterministic given its settings; only the timings vary
//! between runs.

use crate::complex::{cone, decalee, e_infinity, les_from_ses, page, ChainMap};
use crate::cycles::{boundary, divisor_places, facet_pullback, random_symbol_graph, tame_symbol, BaseVariety, CycleChain, CycleError, FacetValue, ParamCycle, TameValue};
use crate::cyclo::CycloNum;
use crate::dsl::{parse_cycle_file, DslError};
use crate::gysin::{build_gysin, random_ncd, weight_filtration, GysinError};
use crate::klm::{diagonal_pairing, dlog_residue, klm_triple, DlogForm, KlmError, Membrane, SymbolCurrent};
use crate::linalg::{format_rational, Rational};
use crate::periods::{mod_qp_equal, ModQpSettings, ModQpVerdict, PeriodValue};
use crate::poly::{Poly, RatFn};
use crate::polylog::{li2, zeta3};
use crate::quad::{integrate, Node, QuadError, QuadratureSettings, Region, C64};
use crate::random;
use num_traits::One;
use serde_json::{json, Value};
use std::fmt;
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error(transparent)]
    Cycle(#[from] CycleError),
    #[error(transparent)]
    Klm(#[from] KlmError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("cycle file: {0}")]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Gysin(#[from] GysinError),
}

pub type Result<T> = std::result::Result<T, ScenarioError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    pub fn of(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

/// A computed period, its target and the mod-ℚ(p) verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodReport {
    pub value: PeriodValue,
    pub target: C64,
    pub verdict: ModQpVerdict,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioReport {
    pub scenario: String,
    pub checks: Vec<Check>,
    pub period: Option<PeriodReport>,
    /// Free-form lines printed after the checks.
    pub notes: Vec<String>,
    /// (stage, seconds)
    pub timings: Vec<(String, f64)>,
}

impl ScenarioReport {
    pub fn new(scenario: impl Into<String>) -> Self {
        ScenarioReport { scenario: scenario.into(), checks: vec![], period: None, notes: vec![], timings: vec![] }
    }

    pub fn check(&mut self, name: &str, ok: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), status: Status::of(ok), detail: detail.into() });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status == Status::Pass)
    }

    pub fn status(&self) -> Status {
        Status::of(self.passed())
    }

    pub fn check_named(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Value {
        let checks: Vec<Value> = self.checks.iter().map(|c| json!({"name": c.name, "status": c.status.to_string(), "detail": c.detail})).collect();
        let period = match &self.period {
            None => Value::Null,
            Some(p) => json!({
                "value": [p.value.value.re, p.value.value.im],
                "p": p.value.p,
                "error": p.value.error,
                "target": [p.target.re, p.target.im],
                "equal": p.verdict.equal,
                "witness": format_rational(&p.verdict.witness),
                "residual": p.verdict.residual,
            }),
        };
        let timings: serde_json::Map<String, Value> = self.timings.iter().map(|(k, t)| (k.clone(), json!(t))).collect();
        json!({
            "scenario": self.scenario,
            "status": self.status().to_string(),
            "checks": checks,
            "period": period,
            "notes": self.notes,
            "timings": timings,
        })
    }
}

impl fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario {}", self.scenario)?;
        for c in &self.checks {
            writeln!(f, "  [{}] {}: {}", c.status, c.name, c.detail)?;
        }
        if let Some(p) = &self.period {
            writeln!(f, "  period   {} (p = {}, error {:.1e})", fmt_c(p.value.value), p.value.p, p.value.error)?;
            writeln!(f, "  target   {}", fmt_c(p.target))?;
            writeln!(f, "  witness  {} (residual {:.2e})", format_rational(&p.verdict.witness), p.verdict.residual)?;
        }
        for n in &self.notes {
            writeln!(f, "  note: {n}")?;
        }
        for (k, t) in &self.timings {
            writeln!(f, "  time {k}: {t:.3} s")?;
        }
        write!(f, "{}", self.status())
    }
}

fn fmt_c(z: C64) -> String {
    format!("{:.15} {} {:.15}i", z.re, if z.im < 0.0 { '-' } else { '+' }, z.im.abs())
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ScenarioSettings {
    pub quad: QuadratureSettings,
    pub modqp: ModQpSettings,
}

fn timed<T>(rep: &mut ScenarioReport, stage: &str, f: impl FnOnce(&mut ScenarioReport) -> T) -> T {
    let t = Instant::now();
    let v = f(rep);
    rep.timings.push((stage.into(), t.elapsed().as_secs_f64()));
    v
}

// ---------- singular curve ----------

fn require_root_of_unity(z: &CycloNum, name: &str) -> Result<()> {
    let bound = 2 * z.conductor().max(1);
    if z.root_of_unity_order(bound).is_none() {
        return Err(ScenarioError::HypothesisViolated(format!("{name} is not a root of unity")));
    }
    if z.add(&CycloNum::one()).is_zero() {
        return Err(ScenarioError::HypothesisViolated(format!("{name} = −1")));
    }
    Ok(())
}

/// A line in the (x, y)-plane, parametrized by the coordinate not solved for.
fn curve_base(eq: Poly, solve: usize) -> Result<Arc<BaseVariety>> {
    Ok(Arc::new(BaseVariety::hypersurface(vec!["x".into(), "y".into()], eq, Some(solve))?))
}

/// The current of {x, y} on a line, or zero when one entry is the constant 1.
fn symbol_current(z: &ParamCycle) -> Result<SymbolCurrent> {
    if z.cube.iter().any(|f| f.as_constant().is_some_and(|c| c.is_one())) {
        return Ok(SymbolCurrent::zero(z.base.clone()));
    }
    Ok(klm_triple(z)?.r)
}

const XI3: &str = "base hypersurface((P1)^2(x, y); x + y - 1; solve x)\nexclude x = inf\nexclude y = inf\ncomponent 1 symbol(x, y)\n";

/// The period of {x, y} over the lines V₁ = {x = ζ₁}, V₂ = {y = ζ₂} and
/// V₃ = {x + y = 1}, compared with Li₂(ζ₁) + Li₂(ζ₂).
pub fn run_singular_curve(zeta1: &CycloNum, zeta2: &CycloNum, cfg: &ScenarioSettings) -> Result<ScenarioReport> {
    require_root_of_unity(zeta1, "ζ₁")?;
    require_root_of_unity(zeta2, "ζ₂")?;
    if zeta1.add(zeta2).is_one() {
        return Err(ScenarioError::HypothesisViolated("ζ₁ + ζ₂ = 1".into()));
    }
    let (z1, z2) = (zeta1.embed(), zeta2.embed());
    let mut rep = ScenarioReport::new(format!("singular-curve ζ₁ = {} ζ₂ = {}", fmt_c(z1), fmt_c(z2)));
    let xs = Poly::var(2, 0);
    let ys = Poly::var(2, 1);
    let cst = |v: &CycloNum| Poly::constant(2, v.clone());
    let bases = [
        ("1", curve_base(xs.sub(&cst(zeta1)), 0)?),
        ("2", curve_base(ys.sub(&cst(zeta2)), 1)?),
        ("3", curve_base(xs.add(&ys).sub(&Poly::one(2)), 0)?),
    ];
    let xy = [RatFn::var(2, 0), RatFn::var(2, 1)];
    let mut cycles = vec![];
    for (label, b) in &bases {
        cycles.push((label.to_string(), ParamCycle::symbol_of_coords(b.clone(), &xy)?));
    }

    timed(&mut rep, "symbolic", |rep| -> Result<()> {
        let mut bad = vec![];
        let mut count = 0;
        for (label, z) in &cycles {
            let (f, g) = (&z.cube[0], &z.cube[1]);
            if f.is_zero() || g.is_zero() {
                continue;
            }
            for p in divisor_places(&[f, g]) {
                count += 1;
                match tame_symbol(f, g, &p)? {
                    TameValue::Cyclo { torsion_order: Some(_), .. } => {}
                    v => bad.push(format!("V{label} at {p:?}: {v:?}")),
                }
            }
        }
        rep.check("tame-torsion", bad.is_empty(), if bad.is_empty() { format!("{count} places, all values roots of unity") } else { bad.join("; ") });
        let xi3 = parse_cycle_file(XI3)?;
        let z = &xi3.chain.terms[0].0;
        let mut facets = 0;
        for i in 1..=2 {
            for v in [FacetValue::Zero, FacetValue::Infinity] {
                facets += facet_pullback(z, i, v)?.terms.len();
            }
        }
        let closed = boundary(&xi3.chain)?.is_empty();
        rep.check("xi3-closed", closed && facets == 0, format!("∂_B ξ₃° {} ({facets} nonempty facets)", if closed { "= 0" } else { "≠ 0" }));
        Ok(())
    })?;

    let one = C64::new(1.0, 0.0);
    let gammas = vec![
        ("1".to_string(), Membrane::path(&[one - z1, z2])),
        ("2".to_string(), Membrane::path(&[z1, one - z2])),
        ("3".to_string(), Membrane::path(&[z2, one - z1])),
    ];
    let mut currents = vec![];
    for (label, z) in &cycles {
        currents.push((label.clone(), symbol_current(z)?));
    }
    let value = timed(&mut rep, "pairing", |_| diagonal_pairing(&currents, &gammas, 2, 2, &cfg.quad))?;
    let target = li2(z1) + li2(z2);
    let verdict = mod_qp_equal(&value, &PeriodValue::exact(target, 2), &cfg.modqp);
    rep.check(
        "period-mod-Q(2)",
        verdict.equal,
        format!("witness {} residual {:.2e} (tol {:.0e}, B = {}, A = {})", format_rational(&verdict.witness), verdict.residual, cfg.modqp.tol, cfg.modqp.denom_bound, cfg.modqp.num_bound),
    );
    let flipped = mod_qp_equal(&PeriodValue::new(-value.value, 2, value.error), &PeriodValue::exact(target, 2), &cfg.modqp);
    rep.notes.push("γ₁: y from 1−ζ₁ to ζ₂; γ₂: x from ζ₁ to 1−ζ₂; γ₃: y from ζ₂ to 1−ζ₁ (straight segments)".into());
    rep.notes.push(format!("given orientation: {} (witness {})", Status::of(verdict.equal), format_rational(&verdict.witness)));
    rep.notes.push(format!("reversed orientation: {} (residual {:.2e})", Status::of(flipped.equal), flipped.residual));
    rep.period = Some(PeriodReport { value, target, verdict });
    Ok(rep)
}

// ---------- singular surface ----------

/// ξ₄° on V₄ = {xyz = (x − 1)(y − 1)} with its four corrections.
pub const XI4: &str = "\
base hypersurface((P1)^3(x, y, z); x*y*z - (x-1)*(y-1))
exclude x = 0, z = inf
exclude y = 0, z = inf
component +1 symbol(x, y, z)
component -1 map(t, u) -> (inf, t, 1 - 1/t; 1/u, 1 - 1/(t*u), 1 - u)
component +1 map(t, u) -> (inf, t, 1 - 1/t; 1/u, 1 - 1/u, 1 - u)
component +1 map(t, u) -> (t, inf, 1 - 1/t; 1/u, 1 - 1/(t*u), 1 - u)
component -1 map(t, u) -> (t, inf, 1 - 1/t; 1/u, 1 - 1/u, 1 - u)
";

/// Route tolerances for the surface period: region integral, reduced
/// 1-D integral, series.
pub const SURFACE_TOLS: [f64; 3] = [1e-6, 1e-10, 1e-12];
/// Bound on |A − B|.
pub const SURFACE_AB_TOL: f64 = 1e-5;

/// −2 Σ 1/n³ with an Euler–Maclaurin tail.
pub fn minus_two_zeta3_series() -> f64 {
    let n = 2000u32;
    let mut s = 0.0;
    for k in (1..=n).rev() {
        let k = k as f64;
        s += 1.0 / (k * k * k);
    }
    let m = n as f64;
    // Σ_{k>N} k⁻³ = 1/(2N²) − 1/(2N³) + 1/(4N⁴) + O(N⁻⁶)
    s += 1.0 / (2.0 * m * m) - 1.0 / (2.0 * m * m * m) + 1.0 / (4.0 * m * m * m * m);
    -2.0 * s
}

/// −2 ∫₀¹ log(u) log(1 − u) du/u.
pub fn surface_reduced_integral(cfg: &QuadratureSettings) -> Result<PeriodValue> {
    let r = integrate(|n: Node| C64::new(-2.0 * n.from_a.ln() * n.to_b.ln() / n.x, 0.0), 0.0, 1.0, cfg.tol, cfg)?;
    Ok(PeriodValue::new(r.value, 3, r.error))
}

/// Samples Δ = {x + y ≥ 1} ∩ [0, 1]² on a grid including its boundary and
/// returns the sampled points of Δ ∩ T_x not on W₄ = {x = 0, y = 1}.
fn delta_tx_outside_w4(n: usize) -> (usize, Vec<(f64, f64)>) {
    let mut hits = 0;
    let mut bad = vec![];
    for i in 0..=n {
        let x = i as f64 / n as f64;
        for j in 0..=n {
            // y runs over [1 − x, 1]
            let y = (1.0 - x) + x * (j as f64 / n as f64);
            if x <= 0.0 {
                hits += 1;
                if y != 1.0 {
                    bad.push((x, y));
                }
            }
        }
    }
    (hits, bad)
}

pub fn run_singular_surface(cfg: &ScenarioSettings) -> Result<ScenarioReport> {
    let mut rep = ScenarioReport::new("singular-surface");
    let target = C64::new(-2.0 * zeta3(), 0.0);
    let exact = PeriodValue::exact(target, 3);
    let file = parse_cycle_file(XI4)?;

    timed(&mut rep, "symbolic", |rep| -> Result<()> {
        let b = boundary(&file.chain)?;
        rep.check("xi4-closed", b.is_empty(), if b.is_empty() { "∂_B ξ₄° = 0".to_string() } else { format!("∂_B ξ₄° has {} terms", b.terms.len()) });
        let sym = boundary(&CycleChain::single(file.chain.terms[0].0.clone()))?;
        rep.notes.push(format!("∂_B {{x, y, z}} alone has {} terms, cancelled by the corrections", sym.terms.len()));
        let (hits, bad) = delta_tx_outside_w4(64);
        rep.check("gamma4-meets-Tx-in-W4", bad.is_empty(), format!("{hits} sampled points of γ₄ ∩ T_x, {} outside W₄", bad.len()));
        Ok(())
    })?;

    let tr = klm_triple(&file.chain.terms[0].0)?;
    let a = timed(&mut rep, "route A", |_| diagonal_pairing(&[("4".into(), tr.r.clone())], &[("4".into(), Membrane::region(Region::Delta))], 3, 3, &cfg.quad))?;
    let b = timed(&mut rep, "route B", |_| surface_reduced_integral(&cfg.quad))?;
    let c = timed(&mut rep, "route C", |_| PeriodValue::exact(C64::new(minus_two_zeta3_series(), 0.0), 3));
    let mut verdicts = vec![];
    for (name, v, tol) in [("route-A-region", &a, SURFACE_TOLS[0]), ("route-B-reduced", &b, SURFACE_TOLS[1]), ("route-C-series", &c, SURFACE_TOLS[2])] {
        let vd = mod_qp_equal(v, &exact, &ModQpSettings { tol, ..cfg.modqp });
        rep.check(name, vd.equal, format!("{} ≡ −2ζ(3) mod ℚ(3): witness {} residual {:.2e} (tol {:.0e})", fmt_c(v.value), format_rational(&vd.witness), vd.residual, tol));
        verdicts.push(vd);
    }
    let ab = (a.value - b.value).norm();
    rep.check("routes-A-B-agree", ab < SURFACE_AB_TOL, format!("|A − B| = {ab:.2e} (tol {SURFACE_AB_TOL:.0e})"));
    rep.period = Some(PeriodReport { value: a, target, verdict: verdicts.swap_remove(0) });
    Ok(rep)
}

// ---------- toric residue ----------

pub fn run_toric_residue(n: usize) -> Result<ScenarioReport> {
    if !(1..=3).contains(&n) {
        return Err(ScenarioError::HypothesisViolated(format!("n = {n} outside 1..=3")));
    }
    let mut rep = ScenarioReport::new(format!("toric-residue n = {n}"));
    let idx: Vec<usize> = (0..n).collect();
    let form = DlogForm::wedge(&idx);
    let r = dlog_residue(&form, &idx)?;
    rep.check("coordinate-flag", r == Rational::one(), format!("Res = {}", format_rational(&r)));
    if n == 2 {
        let rev = dlog_residue(&form, &[1, 0])?;
        rep.check("reversed-flag", rev == -Rational::one(), format!("Res = {}", format_rational(&rev)));
    }
    Ok(rep)
}

// ---------- self test ----------

/// Quick randomized rounds of the exact invariants plus the three scenarios.
pub fn selftest(seed: u64, rounds: usize, cfg: &ScenarioSettings) -> Result<ScenarioReport> {
    let mut rep = ScenarioReport::new("selftest");
    let mut rng = random::rng(seed);

    let ok = timed(&mut rep, "complexes", |_| {
        let mut ok = [true; 4];
        for _ in 0..rounds {
            let f = random::random_filtered(&mut rng, 0, 2, 12, 3);
            let dec = decalee(&f);
            for r in 1..=3 {
                let (e, eh) = (page(&f, r + 1), page(&dec, r));
                for k in f.base.lo()..=f.base.hi() {
                    for i in f.p_lo - 1..=f.p_hi {
                        let j = k - i;
                        ok[0] &= eh.dim(-j, i + 2 * j) == e.dim(i, j);
                    }
                }
            }
            let einf = e_infinity(&f);
            for k in f.base.lo()..=f.base.hi() {
                ok[1] &= (f.p_lo..f.p_hi).map(|p| einf.dim(p, k - p)).sum::<usize>() == f.base.cohomology_dim(k);
            }
            let (i, p) = random::random_ses(&mut rng, 0, 3, 12);
            ok[2] &= les_from_ses(&i, &p).map(|l| l.is_exact()).unwrap_or(false);
            let c = random::random_complex(&mut rng, 0, 3, 12);
            ok[3] &= cone(&ChainMap::identity(&c)).is_acyclic();
        }
        ok
    });
    rep.check("deligne-shift", ok[0], format!("{rounds} random filtered complexes"));
    rep.check("convergence", ok[1], format!("{rounds} random filtered complexes"));
    rep.check("les-exact", ok[2], format!("{rounds} random short exact sequences"));
    rep.check("cone-of-identity", ok[3], format!("{rounds} random complexes"));

    let closed = timed(&mut rep, "cycles", |_| -> Result<bool> {
        let mut ok = true;
        for k in 0..rounds {
            let z = random_symbol_graph(&mut rng, 1, 2 + k % 2, 3);
            ok &= boundary(&boundary(&CycleChain::single(z))?)?.is_empty();
        }
        Ok(ok)
    })?;
    rep.check("boundary-squared", closed, format!("{rounds} random symbol graphs"));

    let gy = timed(&mut rep, "gysin", |_| -> Result<bool> {
        let mut ok = true;
        for k in 0..rounds {
            let ncd = random_ncd(&mut rng, 1 + k % 3, 10, false);
            let dc = build_gysin(&ncd, 1)?;
            ok &= weight_filtration(&dc)?.base.check_d_squared();
        }
        Ok(ok)
    })?;
    rep.check("gysin-squared", gy, format!("{rounds} random descriptors"));

    let mut subs = vec![];
    for n in 1..=3 {
        subs.push(run_toric_residue(n)?);
    }
    subs.push(run_singular_curve(&CycloNum::zeta_pow(3, 1), &CycloNum::zeta_pow(4, 1), cfg)?);
    subs.push(run_singular_surface(cfg)?);
    for s in subs {
        rep.check(&s.scenario, s.passed(), format!("{} checks", s.checks.len()));
        for (k, t) in s.timings {
            rep.timings.push((format!("{}: {k}", s.scenario), t));
        }
    }
    Ok(rep)
}
