//! Acceptance gate: one PASS/FAIL line per criterion, every tolerance pinned
//! below. Exits nonzero if any criterion fails.

use num_complex::Complex64 as C64;
use rand::Rng;
use reglab_core::complex::*;
use reglab_core::cycles::*;
use reglab_core::cyclo::CycloNum;
use reglab_core::dsl::{parse_cycle_file, parse_function};
use reglab_core::gysin::*;
use reglab_core::klm::{dlog_residue, stokes_residual, DlogForm, SymbolCurrent, TestForm};
use reglab_core::linalg::*;
use reglab_core::periods::{mod_qp_equal, ModQpSettings, PeriodValue};
use reglab_core::poly::{Poly, RatFn};
use reglab_core::quad::QuadratureSettings;
use reglab_core::random;
use reglab_core::scenarios::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

// 1: singular curve
const CURVE_RESIDUAL: f64 = 1e-8;
const CURVE_DENOM_BOUND: u64 = 64;
const CURVE_SECONDS: f64 = 10.0;
/// Agreement of the scenario target with the Clausen-series oracle.
const LI2_ORACLE_TOL: f64 = 1e-11;
// 2: singular surface
const SURFACE_A_TOL: f64 = 1e-6;
const SURFACE_B_TOL: f64 = 1e-10;
const SURFACE_C_TOL: f64 = 1e-12;
const SURFACE_A_MINUS_B: f64 = 1e-5;
const SURFACE_SECONDS: f64 = 60.0;
// 3, 4, 8: symbolic, exact
const SYMBOL_GRAPHS: usize = 100;
const SYMBOL_MAX_DEGREE: usize = 3;
const TAME_ROOT_PAIRS: [((u32, i64), (u32, i64)); 5] = [((3, 1), (4, 1)), ((5, 1), (5, 2)), ((8, 3), (3, 2)), ((1, 0), (4, 1)), ((12, 5), (7, 3))];
const MOVING_CYCLES: usize = 20;
// 5: Stokes
const STOKES_FORMS: usize = 20;
const STOKES_N1_TOL: f64 = 1e-7;
const STOKES_N2_TOL: f64 = 1e-6;
// 6, 7: exact linear algebra
const FILTERED_COMPLEXES: usize = 200;
const FILTERED_MAX_DIM: usize = 24;
const FILTERED_MAX_LENGTH: i32 = 4;
const SES_COUNT: usize = 200;
const CONE_COUNT: usize = 50;
// 10: Gysin
const NCD_COUNT: usize = 100;

type Outcome = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------- independent oracles ----------

/// Li₂(e^{iθ}) for 0 ≤ θ ≤ 2π: real part π²/6 − θ(2π − θ)/4, imaginary part
/// the Clausen sum Σ sin(kθ)/k².
fn li2_unit_circle(z: C64) -> C64 {
    let mut th = z.arg();
    if th < 0.0 {
        th += 2.0 * PI;
    }
    let re = PI * PI / 6.0 - th * (2.0 * PI - th) / 4.0;
    let mut im = 0.0;
    let mut comp = 0.0;
    for k in (1..=4_000_000u64).rev() {
        let k = k as f64;
        // Kahan summation
        let y = (k * th).sin() / (k * k) - comp;
        let t = im + y;
        comp = (t - im) - y;
        im = t;
    }
    C64::new(re, im)
}

/// ζ(3) = (5/2) Σ (−1)^{k+1} / (k³ C(2k, k)).
fn zeta3_oracle() -> f64 {
    let mut s = 0.0;
    let mut binom = 1.0;
    for k in 1..=30u32 {
        let kf = k as f64;
        binom *= (2.0 * kf) * (2.0 * kf - 1.0) / (kf * kf);
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        s += sign / (kf * kf * kf * binom);
    }
    2.5 * s
}

// ---------- criteria ----------

fn c1_singular_curve() -> Outcome {
    let cfg = ScenarioSettings { modqp: ModQpSettings { denom_bound: CURVE_DENOM_BOUND, tol: CURVE_RESIDUAL, ..Default::default() }, ..Default::default() };
    let (z1, z2) = (CycloNum::zeta_pow(3, 1), CycloNum::zeta_pow(4, 1));
    let t = Instant::now();
    let rep = run_singular_curve(&z1, &z2, &cfg).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    ensure(rep.passed(), || format!("scenario failed:\n{rep}"))?;
    let p = rep.period.as_ref().unwrap();
    let target = li2_unit_circle(z1.embed()) + li2_unit_circle(z2.embed());
    ensure((p.target - target).norm() < LI2_ORACLE_TOL, || format!("target {} vs oracle {target}", p.target))?;
    let v = mod_qp_equal(&p.value, &PeriodValue::exact(target, 2), &cfg.modqp);
    ensure(v.equal && v.residual < CURVE_RESIDUAL, || format!("residual {:.2e} against oracle", v.residual))?;
    ensure(secs < CURVE_SECONDS, || format!("took {secs:.1} s"))?;
    Ok(format!("witness {} residual {:.1e} < {CURVE_RESIDUAL:.0e} (B = {CURVE_DENOM_BOUND}), {secs:.3} s", format_rational(&v.witness), v.residual))
}

fn c2_singular_surface() -> Outcome {
    let cfg = ScenarioSettings::default();
    let t = Instant::now();
    let rep = run_singular_surface(&cfg).map_err(|e| e.to_string())?;
    let b = surface_reduced_integral(&cfg.quad).map_err(|e| e.to_string())?;
    let c = PeriodValue::exact(C64::new(minus_two_zeta3_series(), 0.0), 3);
    let secs = t.elapsed().as_secs_f64();
    ensure(rep.passed(), || format!("scenario failed:\n{rep}"))?;
    let a = rep.period.as_ref().unwrap().value.clone();
    let target = PeriodValue::exact(C64::new(-2.0 * zeta3_oracle(), 0.0), 3);
    let mut res = vec![];
    for (name, v, tol) in [("A", &a, SURFACE_A_TOL), ("B", &b, SURFACE_B_TOL), ("C", &c, SURFACE_C_TOL)] {
        let vd = mod_qp_equal(v, &target, &ModQpSettings { tol, ..Default::default() });
        ensure(vd.equal, || format!("route {name}: residual {:.2e} ≥ {tol:.0e}", vd.residual))?;
        res.push(format!("{name} {:.1e}", vd.residual));
    }
    let ab = (a.value - b.value).norm();
    ensure(ab < SURFACE_A_MINUS_B, || format!("|A − B| = {ab:.2e}"))?;
    ensure(secs < SURFACE_SECONDS, || format!("took {secs:.1} s"))?;
    Ok(format!("residuals {} (tols {SURFACE_A_TOL:.0e}/{SURFACE_B_TOL:.0e}/{SURFACE_C_TOL:.0e}), |A − B| = {ab:.1e}, {secs:.3} s", res.join(", ")))
}

fn c3_symbolic_closure() -> Outcome {
    let xi4 = parse_cycle_file(XI4).map_err(|e| e.to_string())?;
    ensure(boundary(&xi4.chain).map_err(|e| e.to_string())?.is_empty(), || "∂_B ξ₄° ≠ 0".into())?;
    let xi3 = parse_cycle_file("base hypersurface((P1)^2(x, y); x + y - 1; solve x)\nexclude x = inf\nexclude y = inf\ncomponent 1 symbol(x, y)\n").map_err(|e| e.to_string())?;
    ensure(boundary(&xi3.chain).map_err(|e| e.to_string())?.is_empty(), || "∂_B ξ₃° ≠ 0".into())?;
    let mut r = random::rng(301);
    for k in 0..SYMBOL_GRAPHS {
        let n = 2 + k % 3;
        let z = random_symbol_graph(&mut r, 1, n, SYMBOL_MAX_DEGREE);
        let bb = boundary(&boundary(&CycleChain::single(z.clone())).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        ensure(bb.is_empty(), || format!("∂_B² ≠ 0 on {z}"))?;
    }
    Ok(format!("∂_B ξ₄° = 0, ∂_B ξ₃° = 0, ∂_B² = 0 on {SYMBOL_GRAPHS} graphs over ℙ¹ (degree ≤ {SYMBOL_MAX_DEGREE}, n = 2..4)"))
}

fn c4_tame_torsion() -> Outcome {
    let mut places = 0;
    for ((n1, k1), (n2, k2)) in TAME_ROOT_PAIRS {
        let (z1, z2) = (CycloNum::zeta_pow(n1, k1), CycloNum::zeta_pow(n2, k2));
        let xs = Poly::var(2, 0);
        let ys = Poly::var(2, 1);
        let lines = [(xs.sub(&Poly::constant(2, z1.clone())), 0), (ys.sub(&Poly::constant(2, z2.clone())), 1), (xs.add(&ys).sub(&Poly::one(2)), 0)];
        for (eq, solve) in lines {
            let base = Arc::new(BaseVariety::hypersurface(vec!["x".into(), "y".into()], eq, Some(solve)).map_err(|e| e.to_string())?);
            let z = ParamCycle::symbol_of_coords(base, &[RatFn::var(2, 0), RatFn::var(2, 1)]).map_err(|e| e.to_string())?;
            let (f, g) = (&z.cube[0], &z.cube[1]);
            for pl in divisor_places(&[f, g]) {
                places += 1;
                match tame_symbol(f, g, &pl).map_err(|e| e.to_string())? {
                    TameValue::Cyclo { value, torsion_order: Some(m) } => {
                        ensure(value.pow(m as i64).is_some_and(|v| v.is_one()), || format!("({n1}:{k1}, {n2}:{k2}) at {pl:?}: value^{m} ≠ 1"))?;
                    }
                    v => return Err(format!("({n1}:{k1}, {n2}:{k2}) at {pl:?}: {v:?}")),
                }
            }
        }
    }
    Ok(format!("{places} places over {} root pairs, every value has an exact finite order", TAME_ROOT_PAIRS.len()))
}

fn c5_stokes() -> Outcome {
    let cfg = QuadratureSettings::default();
    let vars = vec!["t".to_string()];
    let cur = |fs: &[&str]| SymbolCurrent::new(Arc::new(BaseVariety::line("t")), fs.iter().map(|s| parse_function(s, &vars).unwrap()).collect()).unwrap();
    let mut g = random::rng(17);
    let mut worst = [0.0f64; 2];
    let n1 = ["t", "1 - t", "(t - 1)/(t + 2)", "t^2 + 1"];
    for k in 0..STOKES_FORMS {
        let phi = TestForm {
            center: (g.gen_range(-2.0..2.0), g.gen_range(-1.0..1.0)),
            radius: (g.gen_range(0.3..1.2), g.gen_range(0.3..1.2)),
            a: C64::new(g.gen_range(-1.0..1.0), g.gen_range(-1.0..1.0)),
            b: C64::new(g.gen_range(-1.0..1.0), g.gen_range(-1.0..1.0)),
        };
        let v = stokes_residual(&cur(&[n1[k % 4]]), &phi, &cfg).map_err(|e| e.to_string())?.value.norm();
        worst[0] = worst[0].max(v);
    }
    let n2: [&[&str]; 4] = [&["t", "1 - t"], &["t - 1", "-zeta(4)*(t + 1 - zeta(4))"], &["t - 1", "(t + 1 - zeta(4))/(t + 1/2 + zeta(4)/2)"], &["(t - zeta(4))/(t + 2)", "t + 1/3"]];
    let mut g = random::rng(23);
    for k in 0..STOKES_FORMS {
        let phi = TestForm {
            center: (g.gen_range(-1.5..1.0), g.gen_range(-0.6..0.6)),
            radius: (g.gen_range(0.4..1.2), g.gen_range(0.4..1.2)),
            a: C64::new(g.gen_range(-1.0..1.0), g.gen_range(-1.0..1.0)),
            b: C64::new(0.0, 0.0),
        };
        let v = stokes_residual(&cur(n2[k % 4]), &phi, &cfg).map_err(|e| e.to_string())?.value.norm();
        worst[1] = worst[1].max(v);
    }
    ensure(worst[0] < STOKES_N1_TOL && worst[1] < STOKES_N2_TOL, || format!("worst residuals n=1 {:.2e}, n=2 {:.2e}", worst[0], worst[1]))?;
    Ok(format!("{STOKES_FORMS} forms each: n = 1 worst {:.1e} < {STOKES_N1_TOL:.0e}, n = 2 worst {:.1e} < {STOKES_N2_TOL:.0e}", worst[0], worst[1]))
}

fn c6_deligne_shift() -> Outcome {
    let mut r = random::rng(601);
    let mut compared = 0usize;
    for inst in 0..FILTERED_COMPLEXES {
        let len = 1 + (inst as i32 % FILTERED_MAX_LENGTH);
        let f = random::random_filtered(&mut r, 0, 2, FILTERED_MAX_DIM, len);
        ensure(f.base.total_dim() <= FILTERED_MAX_DIM, || "generator exceeded the dimension bound".into())?;
        let dec = decalee(&f);
        for rr in 1..=4 {
            let e = page(&f, rr + 1);
            let eh = page(&dec, rr);
            for k in f.base.lo()..=f.base.hi() {
                for i in f.p_lo - 1..=f.p_hi {
                    let j = k - i;
                    compared += 1;
                    ensure(eh.dim(-j, i + 2 * j) == e.dim(i, j), || format!("instance {inst}: r = {rr}, (i, j) = ({i}, {j})"))?;
                }
            }
        }
        let einf = e_infinity(&f);
        for k in f.base.lo()..=f.base.hi() {
            let s: usize = (f.p_lo..f.p_hi).map(|p| einf.dim(p, k - p)).sum();
            ensure(s == f.base.cohomology_dim(k), || format!("instance {inst}: Σ E_∞ ≠ dim H^{k}"))?;
        }
    }
    Ok(format!("{FILTERED_COMPLEXES} complexes (dim ≤ {FILTERED_MAX_DIM}, length ≤ {FILTERED_MAX_LENGTH}), {compared} bidegrees over r = 1..4, convergence exact"))
}

fn c7_les() -> Outcome {
    let mut r = random::rng(701);
    for k in 0..SES_COUNT {
        let (i, p) = random::random_ses(&mut r, 0, 3, 12);
        let les = les_from_ses(&i, &p).map_err(|e| e.to_string())?;
        ensure(les.is_exact(), || format!("sequence {k}: defects {:?}", les.exactness_defects()))?;
    }
    for k in 0..CONE_COUNT {
        let c = random::random_complex(&mut r, 0, 3, 12);
        ensure(cone(&ChainMap::identity(&c)).is_acyclic(), || format!("cone of identity {k} not acyclic"))?;
    }
    Ok(format!("{SES_COUNT} long exact sequences exact, {CONE_COUNT} cones of identity acyclic"))
}

fn no_infinity_facets(c: &CycleChain) -> std::result::Result<bool, CycleError> {
    for i in 1..=c.n().unwrap_or(0) {
        if !facet_chain(c, i, FacetValue::Infinity)?.is_zero(false)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn moving_identities(c: &CycleChain) -> std::result::Result<(), String> {
    let e = |e: CycleError| e.to_string();
    let n = c.n().unwrap();
    let mut w = normalize(c).map_err(e)?;
    ensure(no_infinity_facets(&w).map_err(e)?, || "normalize left a ∂_∞ facet".into())?;
    for i in 1..n {
        let f0 = facet_chain(&w, i, FacetValue::Zero).map_err(e)?;
        let m = move_mi(&w, i).map_err(e)?;
        let a = facet_chain(&m, i, FacetValue::Zero).map_err(e)?;
        let b = facet_chain(&m, i + 1, FacetValue::Zero).map_err(e)?;
        ensure(a.sub(&f0).is_zero(false).map_err(e)?, || format!("∂_0^{i} M_{i} ≠ ∂_0^{i} W"))?;
        ensure(b.sub(&f0).is_zero(false).map_err(e)?, || format!("∂_0^{} M_{i} ≠ ∂_0^{i} W", i + 1))?;
        let h = homotopy_hi(&w, i).map_err(e)?;
        let bw = boundary_raw(&w).map_err(e)?;
        let h_bw = if bw.is_empty() || i + 1 >= n { CycleChain::new() } else { homotopy_hi(&bw, i).map_err(e)? };
        let lhs = boundary_raw(&h).map_err(e)?;
        let rhs = m.scale(&sign_pow(i)).sub(&h_bw);
        ensure(lhs.sub(&rhs).is_zero(true).map_err(e)?, || format!("homotopy identity fails at i = {i}"))?;
        w = w.sub(&m).normal_form(false).map_err(e)?;
    }
    Ok(())
}

fn c8_moving_lemma() -> Outcome {
    let mut r = random::rng(801);
    for k in 0..MOVING_CYCLES {
        let z = if k % 3 == 2 { random_symbol_graph(&mut r, 2, 3, 2) } else { random_symbol_graph(&mut r, 1, 2 + k % 2, 2) };
        moving_identities(&CycleChain::single(z.clone())).map_err(|m| format!("{z}: {m}"))?;
    }
    Ok(format!("{MOVING_CYCLES} symbol cycles: ∂_∞ facets killed, M_i facet identities and homotopy identity exact"))
}

fn c9_toric() -> Outcome {
    for n in 1..=3usize {
        let idx: Vec<usize> = (0..n).collect();
        let v = dlog_residue(&DlogForm::wedge(&idx), &idx).map_err(|e| e.to_string())?;
        ensure(v == q(1, 1), || format!("n = {n}: residue {}", format_rational(&v)))?;
        let rep = run_toric_residue(n).map_err(|e| e.to_string())?;
        ensure(rep.passed(), || format!("{rep}"))?;
    }
    Ok("Res^n(dlog x₁ ∧ … ∧ dlog xₙ) = 1 for n = 1, 2, 3".into())
}

/// dim W_a H^k / W_{a+1} H^k from images of F^a = ⊕_{a' ≥ a} in cohomology.
fn graded_dims_brute_force(dc: &DoubleComplex) -> BTreeMap<(i32, i32), usize> {
    let t = totalize(dc).unwrap();
    let mut out = BTreeMap::new();
    for k in t.lo()..=t.hi() {
        let z = t.cocycles(k);
        let bd = t.coboundaries(k);
        let image_dim = |a: i32| -> usize {
            if a > dc.a_range.1 {
                return 0;
            }
            let start = if a <= dc.a_range.0 { 0 } else { dc.block_offset(a, k - a) };
            let n = t.dim(k) - start;
            let mut fa = Matrix::zeros(t.dim(k), n);
            fa.set_block(start, 0, &Matrix::identity(n));
            span_dim(&span_sum(&span_intersect(&z, &fa), &bd)) - span_dim(&bd)
        };
        for a in dc.a_range.0..=dc.a_range.1 {
            out.insert((a, k - a), image_dim(a) - image_dim(a + 1));
        }
    }
    out
}

fn c10_gysin() -> Outcome {
    let mut r = random::rng(1001);
    let mut classes = 0;
    for inst in 0..NCD_COUNT {
        let n = 1 + inst % 3;
        let p = (inst % 2) as i32;
        let ncd = random_ncd(&mut r, n, 3, false);
        let dc = build_gysin(&ncd, p).map_err(|e| format!("instance {inst}: {e}"))?;
        for a in dc.a_range.0..dc.a_range.1 {
            for b in dc.b_range.0..=dc.b_range.1 {
                ensure(dc.horizontal(a + 1, b).mul(&dc.horizontal(a, b)).is_zero(), || format!("instance {inst}: Gy² ≠ 0 at ({a}, {b})"))?;
            }
        }
        let t = totalize(&dc).map_err(|e| e.to_string())?;
        ensure(t.check_d_squared(), || format!("instance {inst}: 𝔻² ≠ 0"))?;
        for b in dc.b_range.0..=dc.b_range.1 {
            for cls in WeightGradedClass::basis(&dc, p, 0, b).map_err(|e| e.to_string())? {
                let res = higher_residue(&ncd, p, &cls, 0).map_err(|e| e.to_string())?;
                ensure(res.coords == cls.coords && res.twist == p, || format!("instance {inst}: Res⁰ is not the identity"))?;
                classes += 1;
            }
        }
        let e = e_infinity(&weight_filtration(&dc).map_err(|e| e.to_string())?);
        for ((a, b), want) in graded_dims_brute_force(&dc) {
            ensure(e.dim(a, b) == want, || format!("instance {inst}: E_∞^{{{a},{b}}} = {} but brute force gives {want}", e.dim(a, b)))?;
        }
    }
    Ok(format!("{NCD_COUNT} descriptors (N ≤ 3): Gy² = 𝔻² = 0, Res⁰ = id on {classes} classes, graded dims match"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("singular-curve period", c1_singular_curve),
        ("singular-surface period", c2_singular_surface),
        ("symbolic closure", c3_symbolic_closure),
        ("tame torsion", c4_tame_torsion),
        ("Stokes residuals", c5_stokes),
        ("Deligne shift", c6_deligne_shift),
        ("LES exactness", c7_les),
        ("moving-lemma constructions", c8_moving_lemma),
        ("toric residue", c9_toric),
        ("Gysin engine", c10_gysin),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(d) => println!("criterion {:>2} PASS {name}: {d} [{secs:.2} s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {d} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
