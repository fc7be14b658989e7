use criterion::{black_box, criterion_group, criterion_main, Criterion};
use reglab_core::complex::{decalee, les_from_ses, spectral_pages};
use reglab_core::cycles::{boundary, CycleChain};
use reglab_core::cyclo::CycloNum;
use reglab_core::dsl::parse_cycle_file;
use reglab_core::gysin::{build_gysin, random_ncd, weight_filtration};
use reglab_core::polylog::{li2, li3};
use reglab_core::quad::{integrate, Node, QuadratureSettings, C64};
use reglab_core::random;
use reglab_core::scenarios::{run_singular_curve, run_singular_surface, ScenarioSettings, XI4};

fn complexes(c: &mut Criterion) {
    let mut rng = random::rng(3);
    let f = random::random_filtered(&mut rng, 0, 3, 24, 4);
    c.bench_function("spectral pages r ≤ 4, dim 24", |b| b.iter(|| spectral_pages(black_box(&f), 4)));
    c.bench_function("décalée + pages", |b| b.iter(|| spectral_pages(&decalee(black_box(&f)), 3)));
    let (i, p) = random::random_ses(&mut rng, 0, 3, 16);
    c.bench_function("long exact sequence", |b| b.iter(|| les_from_ses(black_box(&i), black_box(&p)).unwrap()));
}

fn gysin(c: &mut Criterion) {
    let mut rng = random::rng(5);
    let ncd = random_ncd(&mut rng, 3, 12, false);
    c.bench_function("gysin grid N = 3 + weight pages", |b| {
        b.iter(|| {
            let dc = build_gysin(black_box(&ncd), 2).unwrap();
            spectral_pages(&weight_filtration(&dc).unwrap(), 3)
        })
    });
}

fn cycles(c: &mut Criterion) {
    let f = parse_cycle_file(XI4).unwrap();
    c.bench_function("∂_B of ξ₄°", |b| b.iter(|| boundary(black_box(&f.chain)).unwrap()));
    let sym = CycleChain::single(f.chain.terms[0].0.clone());
    c.bench_function("∂_B∘∂_B of {x, y, z}", |b| b.iter(|| boundary(&boundary(black_box(&sym)).unwrap()).unwrap()));
}

fn numerics(c: &mut Criterion) {
    let z = C64::new(0.3, 0.8);
    c.bench_function("Li₂", |b| b.iter(|| li2(black_box(z))));
    c.bench_function("Li₃", |b| b.iter(|| li3(black_box(z))));
    let cfg = QuadratureSettings::default();
    c.bench_function("∫ log u log(1−u)/u", |b| b.iter(|| integrate(|n: Node| C64::new(n.from_a.ln() * n.to_b.ln() / n.x, 0.0), 0.0, 1.0, 1e-10, &cfg).unwrap()));
}

fn scenarios(c: &mut Criterion) {
    let cfg = ScenarioSettings::default();
    let (z1, z2) = (CycloNum::zeta_pow(3, 1), CycloNum::zeta_pow(4, 1));
    c.bench_function("singular curve", |b| b.iter(|| run_singular_curve(&z1, &z2, &cfg).unwrap()));
    let mut g = c.benchmark_group("slow");
    g.sample_size(10);
    g.bench_function("singular surface", |b| b.iter(|| run_singular_surface(&cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, complexes, gysin, cycles, numerics, scenarios);
criterion_main!(benches);
