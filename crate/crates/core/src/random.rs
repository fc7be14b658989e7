//! Seeded generators of random finite models: complexes, filtered
//! complexes, short exact sequences and chain maps.
//!
//! Every complex over a field splits into one-dimensional pieces and
//! two-dimensional pieces `x ↦ y`; the generators assemble such pieces and
//! then apply a random change of basis so that nothing stays diagonal.

use crate::complex::{ChainMap, CochainComplex, FilteredCochainComplex};
use crate::linalg::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random invertible n×n matrix with small entries.
pub fn invertible(rng: &mut Rng8, n: usize) -> Matrix {
    loop {
        let vals: Vec<i64> = (0..n * n).map(|_| rng.gen_range(-2..=2)).collect();
        let m = Matrix::from_i64(n, n, &vals);
        if m.rank() == n {
            return m;
        }
    }
}

pub fn inverse(m: &Matrix) -> Matrix {
    coordinates(m, &Matrix::identity(m.rows())).expect("matrix is invertible")
}

pub fn random_matrix(rng: &mut Rng8, rows: usize, cols: usize, range: i64) -> Matrix {
    let vals: Vec<i64> = (0..rows * cols).map(|_| rng.gen_range(-range..=range)).collect();
    Matrix::from_i64(rows, cols, &vals)
}

/// Elementary piece: a single vector in degree `deg`, or a pair `deg → deg+1`.
#[derive(Clone, Copy, Debug)]
struct Piece {
    deg: i32,
    pair: bool,
    level: (i32, i32),
}

struct Assembled {
    complex: CochainComplex,
    /// For each degree: list of (piece index, is-target-of-pair, level).
    basis: Vec<Vec<(usize, bool, i32)>>,
}

fn assemble(lo: i32, hi: i32, pieces: &[Piece]) -> Assembled {
    let n = (hi - lo + 1) as usize;
    let mut basis: Vec<Vec<(usize, bool, i32)>> = vec![vec![]; n];
    for (i, pc) in pieces.iter().enumerate() {
        basis[(pc.deg - lo) as usize].push((i, false, pc.level.0));
        if pc.pair {
            basis[(pc.deg + 1 - lo) as usize].push((i, true, pc.level.1));
        }
    }
    let dims: Vec<usize> = basis.iter().map(|b| b.len()).collect();
    let mut ds = Vec::new();
    for k in 0..n {
        let rows = if k + 1 < n { dims[k + 1] } else { 0 };
        let mut m = Matrix::zeros(rows, dims[k]);
        for (j, &(pi, tgt, _)) in basis[k].iter().enumerate() {
            if !tgt && pieces[pi].pair {
                let row = basis[k + 1].iter().position(|&(pj, t, _)| pj == pi && t).unwrap();
                m.set(row, j, qi(1));
            }
        }
        ds.push(m);
    }
    Assembled { complex: CochainComplex::new(lo, dims, ds).unwrap(), basis }
}

fn random_pieces(rng: &mut Rng8, lo: i32, hi: i32, max_total: usize, levels: (i32, i32)) -> Vec<Piece> {
    let mut pieces = Vec::new();
    let mut total = 0;
    let target = rng.gen_range(1..=max_total.max(1));
    while total < target {
        let deg = rng.gen_range(lo..=hi);
        let pair = deg < hi && rng.gen_bool(0.5) && total + 2 <= max_total;
        let l0 = rng.gen_range(levels.0..=levels.1);
        let l1 = if pair { rng.gen_range(l0..=levels.1) } else { l0 };
        pieces.push(Piece { deg, pair, level: (l0, l1) });
        total += if pair { 2 } else { 1 };
    }
    pieces
}

/// Conjugate by random changes of basis in each degree; returns the new
/// complex and the basis matrices used (columns = images of old basis).
fn twist(rng: &mut Rng8, c: &CochainComplex) -> (CochainComplex, Vec<Matrix>) {
    let gs: Vec<Matrix> = (c.lo()..=c.hi()).map(|k| invertible(rng, c.dim(k))).collect();
    let mut ds = Vec::new();
    for k in c.lo()..=c.hi() {
        let i = (k - c.lo()) as usize;
        let gi = inverse(&gs[i]);
        let d = c.d(k);
        let m = if k < c.hi() { gs[i + 1].mul(&d).mul(&gi) } else { d };
        ds.push(m);
    }
    let dims = (c.lo()..=c.hi()).map(|k| c.dim(k)).collect();
    (CochainComplex::new(c.lo(), dims, ds).unwrap(), gs)
}

/// Random complex on degrees `lo..=hi` with total dimension ≤ `max_total`.
pub fn random_complex(rng: &mut Rng8, lo: i32, hi: i32, max_total: usize) -> CochainComplex {
    let pieces = random_pieces(rng, lo, hi, max_total, (0, 0));
    let a = assemble(lo, hi, &pieces);
    twist(rng, &a.complex).0
}

/// Random filtered complex with levels in `0..=len` (F^0 = all, F^{len+1} = 0).
pub fn random_filtered(rng: &mut Rng8, lo: i32, hi: i32, max_total: usize, len: i32) -> FilteredCochainComplex {
    let pieces = random_pieces(rng, lo, hi, max_total, (0, len - 1));
    let a = assemble(lo, hi, &pieces);
    let (c, gs) = twist(rng, &a.complex);
    let mut filt = Vec::new();
    for k in lo..=hi {
        let i = (k - lo) as usize;
        let mut lv = Vec::new();
        for p in 0..=len {
            let idx: Vec<usize> = a.basis[i].iter().enumerate().filter(|(_, b)| b.2 >= p).map(|(j, _)| j).collect();
            lv.push(gs[i].select_cols(&idx));
        }
        filt.push(lv);
    }
    FilteredCochainComplex::new(c, 0, len, filt).unwrap()
}

/// A random short exact sequence 0 → A → B → C → 0; returns (i, π).
pub fn random_ses(rng: &mut Rng8, lo: i32, hi: i32, max_total: usize) -> (ChainMap, ChainMap) {
    let pieces = random_pieces(rng, lo, hi, max_total, (0, 0));
    let a = assemble(lo, hi, &pieces);
    // 0: not in A, 1: whole piece in A, 2: only the target of a pair in A.
    let choice: Vec<u8> = pieces.iter().map(|pc| if pc.pair { rng.gen_range(0..3) } else { rng.gen_range(0..2) }).collect();
    let (b, gs) = twist(rng, &a.complex);
    let mut sub = Vec::new();
    let mut quo = Vec::new();
    for k in lo..=hi {
        let i = (k - lo) as usize;
        let mut s = Vec::new();
        let mut qv = Vec::new();
        for (j, &(pi, tgt, _)) in a.basis[i].iter().enumerate() {
            let inside = match choice[pi] {
                1 => true,
                2 => tgt,
                _ => false,
            };
            if inside {
                s.push(j)
            } else {
                qv.push(j)
            }
        }
        sub.push(gs[i].select_cols(&s));
        quo.push(gs[i].select_cols(&qv));
    }
    let dims_a: Vec<usize> = sub.iter().map(|m| m.cols()).collect();
    let dims_c: Vec<usize> = quo.iter().map(|m| m.cols()).collect();
    let mut da = Vec::new();
    let mut dc = Vec::new();
    let mut proj = Vec::new();
    for k in lo..=hi {
        let i = (k - lo) as usize;
        let full = sub[i].hstack(&quo[i]);
        let pk = inverse(&full).block(dims_a[i], 0, dims_c[i], b.dim(k));
        proj.push(pk);
    }
    for k in lo..=hi {
        let i = (k - lo) as usize;
        if k < hi {
            let img = b.d(k).mul(&sub[i]);
            da.push(coordinates(&sub[i + 1], &img).unwrap());
            dc.push(proj[i + 1].mul(&b.d(k)).mul(&quo[i]));
        } else {
            da.push(Matrix::zeros(0, dims_a[i]));
            dc.push(Matrix::zeros(0, dims_c[i]));
        }
    }
    let ca = CochainComplex::new(lo, dims_a, da).unwrap();
    let cc = CochainComplex::new(lo, dims_c, dc).unwrap();
    let inc = ChainMap::new(ca, b.clone(), lo, sub).unwrap();
    let pr = ChainMap::new(b, cc, lo, proj).unwrap();
    (inc, pr)
}
