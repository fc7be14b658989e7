use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::Rng;
use reglab_core::cycles::{BaseVariety, ParamCycle};
use reglab_core::cyclo::CycloNum;
use reglab_core::dsl::{parse_cycle_file, parse_function};
use reglab_core::klm::*;
use reglab_core::linalg::q;
use reglab_core::periods::{mod_qp_equal, ModQpSettings, PeriodValue};
use reglab_core::polylog::{li2, zeta3};
use reglab_core::quad::{integrate, integrate_region, Node, Point2, QuadratureSettings, Region, Segment};
use reglab_core::random::rng;
use std::f64::consts::PI;
use std::sync::Arc;

const V4: &str = "
base hypersurface((P1)^3(x, y, z); x*y*z - (x-1)*(y-1))
component +1 symbol(x, y, z)
";

fn line(v: &str) -> Arc<BaseVariety> {
    Arc::new(BaseVariety::line(v))
}

fn current_on(v: &str, fs: &[&str]) -> SymbolCurrent {
    let vars = vec![v.to_string()];
    SymbolCurrent::new(line(v), fs.iter().map(|s| parse_function(s, &vars).unwrap()).collect()).unwrap()
}

fn cur(fs: &[&str]) -> SymbolCurrent {
    current_on("t", fs)
}

fn cfg() -> QuadratureSettings {
    QuadratureSettings::default()
}

fn form(cx: f64, cy: f64, rx: f64, ry: f64, a: C64, b: C64) -> TestForm {
    TestForm { center: (cx, cy), radius: (rx, ry), a, b }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn zeta(n: u32, k: i64) -> C64 {
    CycloNum::zeta_pow(n, k).embed()
}

// ---------- triples ----------

#[test]
fn triple_n1() {
    let z = ParamCycle::symbol(line("t"), vec![parse_function("t", &["t".into()]).unwrap()]).unwrap();
    let tr = klm_triple(&z).unwrap();
    assert_eq!(tr.r.terms.len(), 1);
    assert_eq!(tr.r.to_string(), "log(t)");
    assert_eq!(tr.t.indices, vec![0]);
    assert_eq!(tr.omega.indices, vec![0]);
}

#[test]
fn triple_xyz_matches_three_term_expansion() {
    let f = parse_cycle_file(V4).unwrap();
    let tr = klm_triple(&f.chain.terms[0].0).unwrap();
    let t = &tr.r.terms;
    assert_eq!(t.len(), 3);
    assert_eq!((t[0].log_index, t[0].dlog_indices.clone(), t[0].delta_indices.clone(), t[0].twist), (0, vec![1, 2], vec![], 0));
    assert_eq!((t[1].log_index, t[1].dlog_indices.clone(), t[1].delta_indices.clone(), t[1].twist), (1, vec![2], vec![0], 1));
    assert_eq!((t[2].log_index, t[2].dlog_indices.clone(), t[2].delta_indices.clone(), t[2].twist), (2, vec![], vec![0, 1], 2));
    assert_eq!(t.iter().map(|x| x.sign).collect::<Vec<_>>(), vec![1, -1, 1]);
}

#[test]
fn triple_on_v3_matches_two_term_integrand() {
    let src = "base hypersurface((P1)^2(x, y); x + y - 1; solve x)\ncomponent 1 symbol(x, y)\n";
    let f = parse_cycle_file(src).unwrap();
    let tr = klm_triple(&f.chain.terms[0].0).unwrap();
    assert_eq!(tr.r.to_string(), "log(-(y - 1))·dlog(y) - 2πi·log(y)·δ[T(-(y - 1))]");
}

#[test]
fn non_graph_rejected() {
    let vars = vec!["t".to_string()];
    let base = line("x");
    let sq = parse_function("t^2", &vars).unwrap();
    let z = ParamCycle::new(base, vars.clone(), vec![reglab_core::poly::Restricted::Fn(sq)], vec![parse_function("t", &vars).unwrap()]).unwrap();
    assert!(matches!(klm_triple(&z), Err(KlmError::NotASymbolGraph(_))));
}

#[test]
fn term_partition_and_twists() {
    for n in 1..8 {
        let fs: Vec<String> = (0..n).map(|k| format!("t + {}", k + 1)).collect();
        let refs: Vec<&str> = fs.iter().map(|s| s.as_str()).collect();
        let r = cur(&refs);
        for (k, t) in r.terms.iter().enumerate() {
            assert!(t.is_partition(n));
            assert_eq!(t.twist as usize, k);
            assert_eq!(t.sign, if k % 2 == 0 { 1 } else { -1 });
        }
    }
}

// ---------- pairings ----------

#[test]
fn zero_current_pairs_to_zero() {
    let r = SymbolCurrent::zero(line("t"));
    let v = pair_with_membrane(&r, &Membrane::path(&[c(0.0, 1.0), c(1.0, 1.0)]), &cfg()).unwrap();
    assert_eq!(v.value, c(0.0, 0.0));
}

fn z1() -> C64 {
    zeta(3, 1)
}
fn z2() -> C64 {
    zeta(4, 1)
}

fn strata() -> Vec<(String, SymbolCurrent)> {
    vec![
        ("1".into(), current_on("y", &["zeta(3)", "y"])),
        ("2".into(), current_on("x", &["x", "zeta(4)"])),
        ("3".into(), current_on("y", &["1 - y", "y"])),
    ]
}

fn gammas() -> Vec<(String, Membrane)> {
    let one = c(1.0, 0.0);
    vec![
        ("1".into(), Membrane::path(&[one - z1(), z2()])),
        ("2".into(), Membrane::path(&[z1(), one - z2()])),
        ("3".into(), Membrane::path(&[z2(), one - z1()])),
    ]
}

#[test]
fn singular_curve_term_one() {
    let s = strata();
    let v = pair_with_membrane(&s[0].1, &gammas()[0].1, &cfg()).unwrap();
    let oracle = z1().ln() * (z2().ln() - (c(1.0, 0.0) - z1()).ln());
    assert!((v.value - oracle).norm() < 1e-10, "{} vs {}", v.value, oracle);
}

#[test]
fn singular_curve_delta_term_vanishes() {
    let s = strata();
    let v = pair_with_membrane(&s[1].1, &gammas()[1].1, &cfg()).unwrap();
    assert!(v.value.norm() < 1e-12);
}

#[test]
fn singular_curve_term_three() {
    let s = strata();
    let v = pair_with_membrane(&s[2].1, &gammas()[2].1, &cfg()).unwrap();
    let oracle = li2(z2()) - li2(c(1.0, 0.0) - z1());
    assert!((v.value - oracle).norm() < 1e-9, "{} vs {}", v.value, oracle);
}

#[test]
fn singular_curve_period() {
    let v = diagonal_pairing(&strata(), &gammas(), 2, 2, &cfg()).unwrap();
    let target = PeriodValue::exact(li2(z1()) + li2(z2()), 2);
    let verdict = mod_qp_equal(&v, &target, &ModQpSettings::default());
    assert!(verdict.equal, "{verdict:?}");
    assert_eq!(verdict.witness, q(1, 8));
}

#[test]
fn diagonal_pairing_order_and_chains() {
    let mut s = strata();
    let mut g = gammas();
    let v = diagonal_pairing(&s, &g, 2, 2, &cfg()).unwrap();
    s.reverse();
    g.rotate_left(1);
    let w = diagonal_pairing(&s, &g, 2, 2, &cfg()).unwrap();
    assert!((v.value - w.value).norm() < 1e-12);
    // a doubled component doubles its contribution
    let one = diagonal_pairing(&strata()[..1], &gammas()[..1], 2, 2, &cfg()).unwrap();
    let two = diagonal_pairing(&[strata()[0].clone(), strata()[0].clone()], &gammas()[..1], 2, 2, &cfg()).unwrap();
    assert!((two.value - one.value * 2.0).norm() < 1e-10);
    // prefactor (−2πi)^{p−n}
    let p3 = diagonal_pairing(&strata()[..1], &gammas()[..1], 3, 2, &cfg()).unwrap();
    assert!((p3.value - one.value * c(0.0, -2.0 * PI)).norm() < 1e-9);
}

#[test]
fn misaligned_strata() {
    let s = strata();
    let g = gammas();
    assert!(matches!(diagonal_pairing(&s[..2], &g, 2, 2, &cfg()), Err(KlmError::MisalignedStrata(_))));
    let dup = vec![g[0].clone(), g[0].clone()];
    assert!(matches!(diagonal_pairing(&s[..1], &dup, 2, 2, &cfg()), Err(KlmError::MisalignedStrata(_))));
}

#[test]
fn reparametrization_and_orientation() {
    let r = cur(&["1 - t", "t"]);
    let (a, b) = (c(0.3, 0.8), c(1.5, -0.7));
    let m = Membrane::path(&[a, b]);
    let v = pair_with_membrane(&r, &m, &cfg()).unwrap().value;
    let split = Membrane::path(&[a, a + (b - a) * 0.37, b]);
    assert!((pair_with_membrane(&r, &split, &cfg()).unwrap().value - v).norm() < 1e-10);
    assert!((pair_with_membrane(&r, &m.reversed(), &cfg()).unwrap().value + v).norm() < 1e-12);
    let back = Membrane { shape: MembraneShape::Path(vec![Segment::new(b, a)]), orientation: 1 };
    assert!((pair_with_membrane(&r, &back, &cfg()).unwrap().value + v).norm() < 1e-10);
}

#[test]
fn crossing_delta_term_oracle() {
    // γ from −1 + i to −1 − i crosses T_t once going down; log f₂ = log(t + 3)
    let r = cur(&["t", "t + 3"]);
    let m = Membrane::path(&[c(-1.0, 1.0), c(-1.0, -1.0)]);
    let v = pair_with_membrane(&r, &m, &cfg()).unwrap().value;
    // oracle: smooth part by quadrature on the two halves, δ-part −2πi·log 2
    let half = |from: C64, to: C64| {
        integrate(
            |n: Node| {
                let z = from + (to - from) * n.x;
                let lz = if z.im == 0.0 { c(z.norm().ln(), if from.im > 0.0 { PI } else { -PI }) } else { z.ln() };
                lz / (z + 3.0) * (to - from)
            },
            0.0,
            1.0,
            1e-12,
            &cfg(),
        )
        .unwrap()
        .value
    };
    let oracle = half(c(-1.0, 1.0), c(-1.0, 0.0)) + half(c(-1.0, 0.0), c(-1.0, -1.0)) - c(0.0, 2.0 * PI) * c(2.0f64.ln(), 0.0);
    assert!((v - oracle).norm() < 1e-9, "{v} vs {oracle}");
}

#[test]
fn crossing_at_endpoint_unresolved() {
    let r = cur(&["t", "t + 3"]);
    let m = Membrane::path(&[c(-1.0, 0.0), c(-1.0, -1.0)]);
    assert!(matches!(pair_with_membrane(&r, &m, &cfg()), Err(KlmError::IntersectionUnresolved(_))));
}

#[test]
fn dlog_pole_on_path_is_singular() {
    let r = cur(&["t + 2", "t - 1/2"]);
    let m = Membrane::path(&[c(0.0, 0.0), c(1.0, 0.0)]);
    assert!(matches!(pair_with_membrane(&r, &m, &cfg()), Err(KlmError::SingularOnMembrane(_))));
}

#[test]
fn dlog_pole_at_end_where_log_vanishes() {
    let m = Membrane::path(&[c(0.0, 0.0), c(1.0, 0.0)]);
    let v = pair_with_membrane(&cur(&["1 - t", "t"]), &m, &cfg()).unwrap();
    assert!((v.value - c(-PI * PI / 6.0, 0.0)).norm() < 1e-9, "{}", v.value);
    assert!(matches!(pair_with_membrane(&cur(&["t + 2", "t"]), &m, &cfg()), Err(KlmError::SingularOnMembrane(_))));
}

#[test]
fn dimension_checks() {
    let r = cur(&["t"]);
    assert!(matches!(pair_with_membrane(&r, &Membrane::path(&[c(1.0, 0.0), c(2.0, 0.0)]), &cfg()), Err(KlmError::DimensionMismatch(_))));
    let r = cur(&["t", "1 - t"]);
    assert!(matches!(pair_with_membrane(&r, &Membrane::region(Region::Delta), &cfg()), Err(KlmError::DimensionMismatch(_))));
}

#[test]
fn singular_surface_region_period() {
    let f = parse_cycle_file(V4).unwrap();
    let tr = klm_triple(&f.chain.terms[0].0).unwrap();
    let v = pair_with_membrane(&tr.r, &Membrane::region(Region::Delta), &cfg()).unwrap();
    assert!((v.value - c(-2.0 * zeta3(), 0.0)).norm() < 1e-7, "{}", v.value);
    let p = diagonal_pairing(&[("4".into(), tr.r.clone())], &[("4".into(), Membrane::region(Region::Delta))], 3, 3, &cfg()).unwrap();
    let verdict = mod_qp_equal(&p, &PeriodValue::exact(c(-2.0 * zeta3(), 0.0), 3), &ModQpSettings::default());
    assert!(verdict.equal);
}

#[test]
fn region_meeting_t_unresolved() {
    let base = Arc::new(BaseVariety::product(&["x", "y"]));
    let vars = vec!["x".to_string(), "y".to_string()];
    let fs = ["x - 1/2", "y + 1", "x + 2"].iter().map(|s| parse_function(s, &vars).unwrap()).collect();
    let r = SymbolCurrent::new(base, fs).unwrap();
    assert!(matches!(pair_with_membrane(&r, &Membrane::region(Region::UnitSquare), &cfg()), Err(KlmError::IntersectionUnresolved(_))));
}

#[test]
fn membrane_text() {
    let m = Membrane::parse("path 0.5-0.866i -> i").unwrap();
    assert_eq!(m.dimension(), 1);
    assert!(Membrane::parse("region cube").is_err());
    assert!(Membrane::parse("path 1").is_err());
}

// ---------- Stokes ----------

#[test]
fn stokes_n1_away_from_t() {
    let r = cur(&["t"]);
    let phi = form(1.0, 1.0, 0.5, 0.5, c(1.0, 0.0), c(0.3, -0.2));
    assert!(stokes_residual(&r, &phi, &cfg()).unwrap().value.norm() < 1e-9);
}

#[test]
fn stokes_n1_crossing_t() {
    let r = cur(&["t"]);
    let phi = form(-1.0, 0.2, 0.6, 0.7, c(0.7, 0.1), c(-0.4, 1.0));
    assert!(stokes_residual(&r, &phi, &cfg()).unwrap().value.norm() < 1e-7);
}

#[test]
fn stokes_n1_random() {
    let mut g = rng(17);
    for k in 0..20 {
        let f = ["t", "1 - t", "(t - 1)/(t + 2)", "t^2 + 1"][k % 4];
        let phi = form(g.gen_range(-2.0..2.0), g.gen_range(-1.0..1.0), g.gen_range(0.3..1.2), g.gen_range(0.3..1.2), c(g.gen_range(-1.0..1.0), g.gen_range(-1.0..1.0)), c(g.gen_range(-1.0..1.0), g.gen_range(-1.0..1.0)));
        let v = stokes_residual(&cur(&[f]), &phi, &cfg()).unwrap();
        assert!(v.value.norm() < 1e-7, "{f} {phi:?}: {}", v.value);
    }
}

#[test]
fn stokes_n2_steinberg() {
    let r = cur(&["t", "1 - t"]);
    let phi = form(-0.5, 0.1, 1.0, 0.6, c(1.0, 0.0), c(0.0, 0.0));
    assert!(stokes_residual(&r, &phi, &cfg()).unwrap().value.norm() < 1e-6);
}

#[test]
fn stokes_n2_random() {
    let mut g = rng(23);
    let cases: [&[&str]; 4] = [&["t", "1 - t"], &["t - 1", "-zeta(4)*(t + 1 - zeta(4))"], &["t - 1", "(t + 1 - zeta(4))/(t + 1/2 + zeta(4)/2)"], &["(t - zeta(4))/(t + 2)", "t + 1/3"]];
    for k in 0..20 {
        let r = cur(cases[k % 4]);
        let phi = form(g.gen_range(-1.5..1.0), g.gen_range(-0.6..0.6), g.gen_range(0.4..1.2), g.gen_range(0.4..1.2), c(g.gen_range(-1.0..1.0), g.gen_range(-1.0..1.0)), c(0.0, 0.0));
        let v = stokes_residual(&r, &phi, &cfg()).unwrap();
        assert!(v.value.norm() < 1e-6, "{:?} {phi:?}: {}", cases[k % 4], v.value);
    }
}

#[test]
fn stokes_rejects_n3() {
    let r = cur(&["t", "t + 1", "t + 2"]);
    assert!(matches!(stokes_residual(&r, &form(0.0, 0.0, 1.0, 1.0, c(1.0, 0.0), c(0.0, 0.0)), &cfg()), Err(KlmError::DimensionMismatch(_))));
}

// ---------- slices ----------

fn product_current(fs: &[&str]) -> SymbolCurrent {
    let base = Arc::new(BaseVariety::product(&["x", "s"]));
    let vars = vec!["x".to_string(), "s".to_string()];
    SymbolCurrent::new(base, fs.iter().map(|s| parse_function(s, &vars).unwrap()).collect()).unwrap()
}

#[test]
fn slice_at_point_is_fiber_restriction() {
    let r = product_current(&["x + s", "x*s - 1"]);
    let Slice::Fiber(f) = slice_over_base(&r, &SliceMembrane::Point(CycloNum::from_i64(2))).unwrap() else { panic!() };
    let expect = current_on("x", &["x + 2", "2*x - 1"]);
    assert_eq!(f.params, vec!["x".to_string()]);
    for (a, b) in f.functions.iter().zip(&expect.functions) {
        assert!(a.equals(b));
    }
}

#[test]
fn slice_needs_product_base() {
    let r = cur(&["t", "1 - t"]);
    assert!(matches!(slice_over_base(&r, &SliceMembrane::Point(CycloNum::one())), Err(KlmError::NonProductBase(_))));
}

#[test]
fn slice_of_constant_in_s_symbol_factors() {
    let r = product_current(&["x + 2", "s"]);
    let (s0, s1) = (c(0.5, 0.5), c(2.0, -0.3));
    let Slice::Path(ps) = slice_over_base(&r, &SliceMembrane::Path(vec![Segment::new(s0, s1)])).unwrap() else { panic!() };
    for x in [c(0.1, 0.2), c(-0.7, 1.1)] {
        let v = ps.fiber_pairing(x, &cfg()).unwrap().value;
        assert!((v - (x + 2.0).ln() * (s1.ln() - s0.ln())).norm() < 1e-10);
    }
}

#[test]
fn slice_matches_product_pairing() {
    let mut g = rng(5);
    for _ in 0..3 {
        let a: i64 = g.gen_range(10..40);
        let b: i64 = g.gen_range(200..300);
        let (fa, fb) = (format!("1 + {a}/100*x*s"), format!("{b}/100 + s - x/3"));
        let r = product_current(&[&fa, &fb]);
        let path = vec![Segment::new(c(0.0, 0.0), c(1.0, 0.5))];
        let Slice::Path(ps) = slice_over_base(&r, &SliceMembrane::Path(path.clone())).unwrap() else { panic!() };
        let psi = form(0.3, 0.2, 0.5, 0.4, c(1.0, 0.0), c(0.0, 0.0));
        let sliced = ps.pair(&psi, &cfg()).unwrap().value;
        // Fubini oracle: integrate over X first, then along γ
        let (f1, f2) = (&r.functions[0], &r.functions[1]);
        let seg = path[0];
        let rect = Region::Rect { x0: -0.2, x1: 0.8, y0: -0.2, y1: 0.6 };
        let direct = integrate(
            |n: Node| {
                let s = seg.point(n.x);
                integrate_region(
                    |p: &Point2| {
                        let x = c(p.x, p.y);
                        let pt = [x, s];
                        psi.psi(x).0 * f1.eval_complex(&pt).ln() * f2.dlog_complex(1, &pt)
                    },
                    rect,
                    &cfg(),
                )
                .unwrap()
                .value
                    * (seg.to - seg.from)
            },
            0.0,
            1.0,
            1e-9,
            &cfg(),
        )
        .unwrap()
        .value;
        assert!((sliced - direct).norm() < 1e-7, "{sliced} vs {direct}");
    }
}

// ---------- dlog residues ----------

#[test]
fn residue_examples() {
    assert_eq!(dlog_residue(&DlogForm::wedge(&[0]), &[0]).unwrap(), q(1, 1));
    assert_eq!(dlog_residue(&DlogForm::wedge(&[0, 1]), &[0, 1]).unwrap(), q(1, 1));
    assert_eq!(dlog_residue(&DlogForm::wedge(&[0, 1]), &[1, 0]).unwrap(), q(-1, 1));
    assert!(matches!(dlog_residue(&DlogForm::wedge(&[0, 1]), &[2]), Err(KlmError::FlagNotInPolarLocus(2))));
    assert!(matches!(dlog_residue(&DlogForm::wedge(&[0]), &[0, 0]), Err(KlmError::DimensionMismatch(_))));
    assert!(DlogForm::wedge(&[1, 1]).terms.is_empty());
}

fn perm_sign(w: &[usize]) -> i64 {
    let mut s = 1;
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            if w[i] > w[j] {
                s = -s;
            }
        }
    }
    s
}

proptest! {
    #[test]
    fn residue_alternating(perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(), flag in Just(vec![0usize, 1, 2, 3]).prop_shuffle()) {
        let v = dlog_residue(&DlogForm::wedge(&perm), &flag).unwrap();
        // Res along the flag of dlog x_perm = sign(perm)·sign(flag)
        prop_assert_eq!(v, q(perm_sign(&perm) * perm_sign(&flag), 1));
    }

    #[test]
    fn residue_multilinear(a in -5i64..5, b in -5i64..5, w1 in Just(vec![0usize, 1, 2]).prop_shuffle(), w2 in Just(vec![0usize, 1, 2]).prop_shuffle()) {
        let f1 = DlogForm::wedge(&w1);
        let f2 = DlogForm::wedge(&w2);
        let sum = f1.scale(&q(a, 1)).add(&f2.scale(&q(b, 1)));
        let flag = [2usize, 0, 1];
        let lhs = if sum.terms.is_empty() { q(0, 1) } else { dlog_residue(&sum, &flag).unwrap() };
        let rhs = q(a, 1) * dlog_residue(&f1, &flag).unwrap() + q(b, 1) * dlog_residue(&f2, &flag).unwrap();
        prop_assert_eq!(lhs, rhs);
    }
}
