use proptest::prelude::*;
use reglab_core::cycles::*;
use reglab_core::cyclo::CycloNum;
use reglab_core::dsl::parse_cycle_file;
use reglab_core::linalg::{q, Rational};
use reglab_core::poly::{Poly, RatFn, Restricted};
use reglab_core::random::rng;
use std::sync::Arc;

const XI4: &str = "
base hypersurface((P1)^3(x, y, z); x*y*z - (x-1)*(y-1))
exclude x = 0, z = inf
exclude y = 0, z = inf
component +1 symbol(x, y, z)
component -1 map(t, u) -> (inf, t, 1 - 1/t; 1/u, 1 - 1/(t*u), 1 - u)
component +1 map(t, u) -> (inf, t, 1 - 1/t; 1/u, 1 - 1/u, 1 - u)
component +1 map(t, u) -> (t, inf, 1 - 1/t; 1/u, 1 - 1/(t*u), 1 - u)
component -1 map(t, u) -> (t, inf, 1 - 1/t; 1/u, 1 - 1/u, 1 - u)
";

fn line() -> Arc<BaseVariety> {
    Arc::new(BaseVariety::line("t"))
}

/// ℙ¹ minus {t = ∞}.
fn affine_line() -> Arc<BaseVariety> {
    Arc::new(BaseVariety::line("t").excluding(vec![(0, PValue::Infinity)]))
}

fn t() -> RatFn {
    RatFn::var(1, 0)
}

fn cst(n: i64) -> RatFn {
    RatFn::constant(1, CycloNum::from_i64(n))
}

fn one() -> Rational {
    q(1, 1)
}

#[test]
fn facet_of_graph_with_constant() {
    let z = ParamCycle::symbol(line(), vec![t(), cst(3)]).unwrap();
    let f = facet_pullback(&z, 1, FacetValue::Zero).unwrap();
    assert_eq!(f.terms.len(), 1);
    let (w, c) = &f.terms[0];
    assert_eq!(*c, one());
    assert_eq!(w.dim(), 0);
    assert_eq!(w.eval_point(&[]).unwrap(), vec![PValue::Finite(CycloNum::zero()), PValue::Finite(CycloNum::from_i64(3))]);
}

#[test]
fn steinberg_graph_facet_lands_on_one() {
    // direct substitution: t = 1 makes the first coordinate 1
    let z = ParamCycle::symbol(affine_line(), vec![t(), cst(1).sub(&t())]).unwrap();
    assert!(facet_pullback(&z, 2, FacetValue::Zero).unwrap().is_empty());
    assert!(facet_pullback(&z, 1, FacetValue::Zero).unwrap().is_empty());
    assert!(boundary(&CycleChain::single(z.clone())).unwrap().is_empty());
    // over the complete line the point t = ∞ lies on the codimension 2 face (∞, ∞)
    let full = ParamCycle::symbol(line(), vec![t(), cst(1).sub(&t())]).unwrap();
    assert!(matches!(facet_pullback(&full, 1, FacetValue::Infinity), Err(CycleError::ImproperFacet { coord: 2, .. })));
}

#[test]
fn improper_facet_reported() {
    let z = ParamCycle::symbol(line(), vec![t(), t()]).unwrap();
    assert!(matches!(facet_pullback(&z, 1, FacetValue::Zero), Err(CycleError::ImproperFacet { coord: 2, .. })));
    let base = Arc::new(BaseVariety::point());
    let p = ParamCycle::new(base, vec![], vec![], vec![RatFn::constant(0, CycloNum::zero())]).unwrap();
    assert!(matches!(facet_pullback(&p, 1, FacetValue::Zero), Err(CycleError::ImproperFacet { .. })));
}

#[test]
fn xi3_open_is_closed() {
    let src = "base hypersurface((P1)^2(x, y); x + y - 1; solve x)\nexclude x = inf\nexclude y = inf\ncomponent 1 symbol(x, y)\n";
    let f = parse_cycle_file(src).unwrap();
    let z = &f.chain.terms[0].0;
    for i in 1..=2 {
        for v in [FacetValue::Zero, FacetValue::Infinity] {
            assert!(facet_pullback(z, i, v).unwrap().is_empty(), "facet {i} {v}");
        }
    }
    assert!(boundary(&f.chain).unwrap().is_empty());
}

#[test]
fn xi4_open_is_closed_after_corrections() {
    let f = parse_cycle_file(XI4).unwrap();
    assert!(boundary(&f.chain).unwrap().is_empty());
    // the symbol alone is not closed: its boundary lives on C₁ and C₂
    let sym = CycleChain::single(f.chain.terms[0].0.clone());
    let b = boundary(&sym).unwrap();
    assert_eq!(b.terms.len(), 2);
    let mut on_c = [false, false];
    for (w, c) in &b.terms {
        assert_eq!(w.dim(), 1);
        if matches!(w.x[0], Restricted::Infinity) {
            assert_eq!(*c, one());
            on_c[0] = true;
        }
        if matches!(w.x[1], Restricted::Infinity) {
            assert_eq!(*c, -one());
            on_c[1] = true;
        }
    }
    assert_eq!(on_c, [true, true]);
}

#[test]
fn xi4_corrections_have_expected_boundaries() {
    // hand oracle: ∂_B 𝒜₁ = [C₁], ∂_B 𝒜₃ = [C₂], ∂_B 𝒜₂ = ∂_B 𝒜₄ = 0
    let f = parse_cycle_file(XI4).unwrap();
    let a: Vec<CycleChain> = f.chain.terms[1..].iter().map(|(z, _)| CycleChain::single(z.clone())).collect();
    let b: Vec<CycleChain> = a.iter().map(|c| boundary(c).unwrap()).collect();
    assert_eq!(b[0].terms.len(), 1);
    assert!(b[1].is_empty());
    assert_eq!(b[2].terms.len(), 1);
    assert!(b[3].is_empty());
    let sym = boundary(&CycleChain::single(f.chain.terms[0].0.clone())).unwrap();
    assert!(sym.sub(&b[0]).add(&b[2]).is_zero(true).unwrap());
}

#[test]
fn degeneracy_examples() {
    let pt = Arc::new(BaseVariety::point());
    let z = ParamCycle::new(pt, vec!["t".into()], vec![], vec![t(), cst(7)]).unwrap();
    assert!(is_degenerate(&z));
    assert!(boundary(&CycleChain::single(z)).unwrap().is_empty());
    let s = ParamCycle::symbol(line(), vec![t(), cst(1).sub(&t())]).unwrap();
    assert!(!is_degenerate(&s));
    let p = pullback_projection(&s, 2);
    assert!(is_degenerate(&p));
}

#[test]
fn identity_examples() {
    let a = ParamCycle::symbol(line(), vec![t(), cst(3)]).unwrap();
    let b = ParamCycle::symbol(line(), vec![t(), cst(5)]).unwrap();
    assert!(identity_test(&a, &a).unwrap());
    assert!(!identity_test(&a, &b).unwrap());
    let s = ParamCycle::symbol(line(), vec![t(), cst(1).sub(&t())]).unwrap();
    assert!(identity_test_with(&s, &s, &[t()]).unwrap());
    // the graph reparametrized by t ↦ (2t + 1)/(t − 3) has the same image
    let m = cst(2).mul(&t()).add(&cst(1)).div(&t().sub(&cst(3))).unwrap();
    let r = s.reparametrize(vec!["t".into()], &[m]).unwrap();
    assert!(identity_test(&s, &r).unwrap());
}

#[test]
fn identity_degree_bound() {
    let mut f = t();
    for k in 2..40 {
        f = f.mul(&t().sub(&cst(k)));
    }
    let a = ParamCycle::symbol(line(), vec![f.clone()]).unwrap();
    let b = a.reparametrize(vec!["t".into()], &[t().inv().unwrap()]).unwrap();
    assert!(matches!(identity_test(&a, &b), Err(CycleError::DegreeBoundExceeded(_))));
}

/// ∂_B∂_B computed by composing facets directly (no normal form between).
fn double_boundary_bruteforce(z: &ParamCycle) -> CycleChain {
    let c = CycleChain::single(z.clone());
    boundary_raw(&boundary_raw(&c).unwrap()).unwrap()
}

#[test]
fn boundary_squared_vanishes_on_curves() {
    let mut r = rng(11);
    for _ in 0..100 {
        let n = 2 + (rand::Rng::gen_range(&mut r, 0..2));
        let z = random_symbol_graph(&mut r, 1, n, 3);
        let bb = boundary(&boundary(&CycleChain::single(z.clone())).unwrap()).unwrap();
        assert!(bb.is_empty(), "{z}");
        assert!(double_boundary_bruteforce(&z).is_zero(true).unwrap());
    }
}

#[test]
fn boundary_squared_vanishes_on_surfaces() {
    let mut r = rng(12);
    for _ in 0..25 {
        let z = random_symbol_graph(&mut r, 2, 3, 2);
        let b = boundary(&CycleChain::single(z.clone())).unwrap();
        assert!(boundary(&b).unwrap().is_empty(), "{z}");
        assert!(double_boundary_bruteforce(&z).is_zero(true).unwrap());
    }
}

#[test]
fn facets_commute() {
    // ∂_f^i ∂_g^j = ∂_g^{j−1} ∂_f^i for i < j, modulo degenerate cycles
    let mut r = rng(13);
    for _ in 0..15 {
        let z = random_symbol_graph(&mut r, 2, 3, 2);
        let c = CycleChain::single(z.clone());
        for i in 1..=2 {
            for j in (i + 1)..=3 {
                for f in [FacetValue::Zero, FacetValue::Infinity] {
                    for g in [FacetValue::Zero, FacetValue::Infinity] {
                        let lhs = facet_chain(&facet_chain(&c, j, g).unwrap(), i, f).unwrap();
                        let rhs = facet_chain(&facet_chain(&c, i, f).unwrap(), j - 1, g).unwrap();
                        assert!(lhs.sub(&rhs).is_zero(true).unwrap(), "{z}: i={i} j={j}");
                    }
                }
            }
        }
    }
}

fn assert_no_infinity_facets(c: &CycleChain) {
    for i in 1..=c.n().unwrap() {
        assert!(facet_chain(c, i, FacetValue::Infinity).unwrap().is_zero(false).unwrap(), "∂_∞^{i} survives:\n{c}");
    }
}

#[test]
fn normalize_kills_infinity_facets() {
    let mut r = rng(14);
    for k in [1usize, 2] {
        for _ in 0..10 {
            let z = random_symbol_graph(&mut r, k, 3, 2);
            let c = CycleChain::single(z);
            let nz = normalize(&c).unwrap();
            assert_no_infinity_facets(&nz);
            // the correction is a sum of degenerate cycles
            for (w, _) in nz.sub(&c).normal_form(false).unwrap().terms {
                assert!(is_degenerate(&w));
            }
        }
    }
}

#[test]
fn normalize_leaves_infinity_free_chain_alone() {
    // poles at t = 5 and t = 9 are removed from the base
    let base = Arc::new(BaseVariety::line("t").excluding(vec![(0, PValue::Finite(CycloNum::from_i64(5)))]).excluding(vec![(0, PValue::Finite(CycloNum::from_i64(9)))]));
    let g = t().sub(&cst(3)).div(&t().sub(&cst(5))).unwrap();
    let h = t().sub(&cst(7)).div(&t().sub(&cst(9))).unwrap();
    let c = CycleChain::single(ParamCycle::symbol(base, vec![g.clone(), h.clone()]).unwrap());
    assert_no_infinity_facets(&c);
    assert!(normalize(&c).unwrap().sub(&c).is_zero(false).unwrap());
    // over the full line both ∂_∞ facets are nonempty and get removed
    let full = CycleChain::single(ParamCycle::symbol(line(), vec![g, h]).unwrap());
    assert!(!facet_chain(&full, 1, FacetValue::Infinity).unwrap().is_empty());
    assert_no_infinity_facets(&normalize(&full).unwrap());
}

/// Runs the moving passes on a normalized chain and checks every identity.
fn check_moving_passes(c: &CycleChain) {
    let n = c.n().unwrap();
    let mut w = normalize(c).unwrap();
    for i in 1..n {
        let f0 = facet_chain(&w, i, FacetValue::Zero).unwrap();
        let m = move_mi(&w, i).unwrap();
        let a = facet_chain(&m, i, FacetValue::Zero).unwrap();
        let b = facet_chain(&m, i + 1, FacetValue::Zero).unwrap();
        assert!(a.sub(&f0).is_zero(false).unwrap(), "∂_0^i M_i ≠ ∂_0^i W");
        assert!(b.sub(&f0).is_zero(false).unwrap(), "∂_0^(i+1) M_i ≠ ∂_0^i W");
        // ∂_B H_i(W) = (−1)^i M_i(W) − H_i(∂_B W), modulo degenerate cycles
        let h = homotopy_hi(&w, i).unwrap();
        let bw = boundary_raw(&w).unwrap();
        let h_bw = if bw.is_empty() || i + 1 >= n { CycleChain::new() } else { homotopy_hi(&bw, i).unwrap() };
        let lhs = boundary_raw(&h).unwrap();
        let rhs = m.scale(&sign_pow(i)).sub(&h_bw);
        assert!(lhs.sub(&rhs).is_zero(true).unwrap(), "homotopy identity fails at i = {i}");
        // the opposite overall sign of ∂_B gives the form with (−1)^{i+1}
        let rhs_opp = m.scale(&sign_pow(i + 1)).sub(&h_bw.neg());
        assert!(lhs.neg().sub(&rhs_opp).is_zero(true).unwrap());
        w = w.sub(&m).normal_form(false).unwrap();
        for j in 1..=i {
            assert!(facet_chain(&w, j, FacetValue::Zero).unwrap().is_zero(false).unwrap(), "∂_0^{j} survives pass {i}");
        }
        assert_no_infinity_facets(&w);
    }
}

#[test]
fn moving_passes_on_curves() {
    let mut r = rng(15);
    for _ in 0..12 {
        let n = 2 + (rand::Rng::gen_range(&mut r, 0..2));
        let z = random_symbol_graph(&mut r, 1, n, 2);
        check_moving_passes(&CycleChain::single(z));
    }
}

#[test]
fn moving_passes_on_surfaces() {
    let mut r = rng(16);
    for _ in 0..6 {
        let z = random_symbol_graph(&mut r, 2, 3, 2);
        check_moving_passes(&CycleChain::single(z));
    }
}

#[test]
fn moving_pass_of_facet_free_chain_is_zero() {
    let z = ParamCycle::symbol(line(), vec![cst(1).sub(&t()), t().sub(&cst(2)).div(&t().sub(&cst(3))).unwrap()]).unwrap();
    // first coordinate has no zero except at t = 1 where the second is 1/2: nonempty; use a graph with no ∂_0^1
    let g = ParamCycle::symbol(line(), vec![t().sub(&cst(2)).div(&t().sub(&cst(2)).add(&cst(1))).unwrap().mul(&cst(0)).add(&cst(3)), t()]);
    let _ = (z, g);
    let c = ParamCycle::symbol(line(), vec![cst(4), t()]).unwrap();
    let ch = CycleChain::single(c);
    assert!(move_mi(&ch, 1).unwrap().is_empty());
    assert!(homotopy_hi(&ch, 1).unwrap().is_empty());
}

#[test]
fn steinberg_move_facet_identities() {
    let w = CycleChain::single(ParamCycle::symbol(affine_line(), vec![t(), cst(1).sub(&t())]).unwrap());
    let f0 = facet_chain(&w, 1, FacetValue::Zero).unwrap();
    let m = move_mi(&w, 1).unwrap();
    assert!(facet_chain(&m, 1, FacetValue::Zero).unwrap().sub(&f0).is_zero(false).unwrap());
    assert!(facet_chain(&m, 2, FacetValue::Zero).unwrap().sub(&f0).is_zero(false).unwrap());
}

fn curve_base(coords: [&str; 2], eq: Poly) -> Arc<BaseVariety> {
    Arc::new(BaseVariety::hypersurface(coords.iter().map(|s| s.to_string()).collect(), eq, None).unwrap())
}

fn tame_all_torsion(z1: &CycloNum, z2: &CycloNum) {
    let xs = Poly::var(2, 0);
    let ys = Poly::var(2, 1);
    let c = |v: &CycloNum| Poly::constant(2, v.clone());
    let x = RatFn::var(2, 0);
    let y = RatFn::var(2, 1);
    let bases = [
        curve_base(["x", "y"], xs.sub(&c(z1))),
        curve_base(["x", "y"], ys.sub(&c(z2))),
        curve_base(["x", "y"], xs.add(&ys).sub(&Poly::one(2))),
    ];
    for b in bases {
        let z = ParamCycle::symbol_of_coords(b, &[x.clone(), y.clone()]).unwrap();
        let (f, g) = (&z.cube[0], &z.cube[1]);
        for p in divisor_places(&[f, g]) {
            let v = tame_symbol(f, g, &p).unwrap();
            assert!(v.is_torsion(), "{v:?} at {p:?}");
        }
    }
}

#[test]
fn tame_symbols_are_torsion() {
    let choices = [
        (CycloNum::zeta_pow(3, 1), CycloNum::zeta_pow(4, 1)),
        (CycloNum::zeta_pow(4, 1), CycloNum::zeta_pow(3, 1)),
        (CycloNum::zeta_pow(5, 1), CycloNum::zeta_pow(8, 3)),
        (CycloNum::zeta_pow(12, 1), CycloNum::zeta_pow(12, 5)),
        (CycloNum::one(), CycloNum::zeta_pow(5, 2)),
    ];
    for (a, b) in &choices {
        tame_all_torsion(a, b);
    }
}

#[test]
fn tame_on_first_line_at_origin_is_zeta1() {
    let z1 = CycloNum::zeta_pow(3, 1);
    let b = curve_base(["x", "y"], Poly::var(2, 0).sub(&Poly::constant(2, z1.clone())));
    let z = ParamCycle::symbol_of_coords(b, &[RatFn::var(2, 0), RatFn::var(2, 1)]).unwrap();
    let v = tame_symbol(&z.cube[0], &z.cube[1], &Place::At(CycloNum::zero())).unwrap();
    assert_eq!(v, TameValue::Cyclo { value: z1, torsion_order: Some(3) });
}

#[test]
fn tame_of_f_with_itself_is_minus_one() {
    let f = t().sub(&cst(2)).mul(&t().add(&cst(1)));
    let v = tame_symbol(&f, &f, &Place::At(CycloNum::from_i64(2))).unwrap();
    assert_eq!(v, TameValue::Cyclo { value: CycloNum::from_i64(-1), torsion_order: Some(2) });
    assert!(matches!(tame_symbol(&f, &RatFn::constant(1, CycloNum::zero()), &Place::Infinity), Err(CycleError::ZeroFunction)));
}

#[test]
fn good_position_examples() {
    // positive constants never meet ℝ⁻
    let pt = Arc::new(BaseVariety::point());
    let p = ParamCycle::new(pt.clone(), vec![], vec![], vec![RatFn::constant(0, CycloNum::from_i64(2))]).unwrap();
    assert_eq!(good_position_report(&CycleChain::single(p)).unwrap().overall(), Advisory::Pass);
    // {t, 1 − t}: T_{z₁} is the negative real ray, of the expected dimension
    let s = ParamCycle::symbol(affine_line(), vec![t(), cst(1).sub(&t())]).unwrap();
    let rep = good_position_report(&CycleChain::single(s)).unwrap();
    assert_eq!(rep.overall(), Advisory::Pass, "{:?}", rep.entries);
    // a coordinate identically −2: T_{z₁} is the whole curve
    let bad = ParamCycle::symbol(line(), vec![cst(-2), t()]).unwrap();
    let rep = good_position_report(&CycleChain::single(bad)).unwrap();
    assert_eq!(rep.overall(), Advisory::Fail);
    // a point with negative real coordinate is not in good position
    let q = ParamCycle::new(pt, vec![], vec![], vec![RatFn::constant(0, CycloNum::from_i64(-3))]).unwrap();
    assert_eq!(good_position_report(&CycleChain::single(q)).unwrap().overall(), Advisory::Fail);
}

#[test]
fn good_position_is_deterministic() {
    let mut r = rng(17);
    let z = random_symbol_graph(&mut r, 1, 2, 3);
    let a = good_position_report(&CycleChain::single(z.clone())).unwrap();
    let b = good_position_report(&CycleChain::single(z)).unwrap();
    let sa: Vec<_> = a.entries.iter().map(|e| (e.face.clone(), e.j, e.status)).collect();
    let sb: Vec<_> = b.entries.iter().map(|e| (e.face.clone(), e.j, e.status)).collect();
    assert_eq!(sa, sb);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]
    #[test]
    fn boundary_squared_zero_prop(seed in 0u64..1_000_000, n in 2usize..4) {
        let mut r = rng(seed);
        let z = random_symbol_graph(&mut r, 1, n, 3);
        let bb = boundary(&boundary(&CycleChain::single(z)).unwrap()).unwrap();
        prop_assert!(bb.is_empty());
    }

    #[test]
    fn chain_scaling_commutes_with_boundary(seed in 0u64..1_000_000, a in -5i64..5, b in 1i64..5) {
        let mut r = rng(seed);
        let z = random_symbol_graph(&mut r, 1, 2, 3);
        let c = CycleChain::single(z);
        let s = q(a, b);
        let lhs = boundary(&c.scale(&s)).unwrap();
        let rhs = boundary(&c).unwrap().scale(&s);
        prop_assert!(lhs.sub(&rhs).is_zero(true).unwrap());
    }
}
