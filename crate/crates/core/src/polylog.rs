//! Riemann ζ at integers ≥ 2 and the polylogarithms Li₂, Li₃ on ℂ
//! (principal branch, cut along [1, ∞)).

use crate::quad::C64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolylogError {
    #[error("Li_{s}({z}) lies on the branch cut [1, ∞); give a side")]
    OnBranchCut { s: u32, z: f64 },
    #[error("only Li_2 and Li_3 are supported (asked for Li_{0})")]
    UnsupportedOrder(u32),
}

/// Which side of the cut to use for real arguments > 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutSide {
    Above,
    Below,
}

const BERNOULLI_EVEN: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// ζ(s) for integer s ≥ 2, by Euler–Maclaurin summation.
pub fn zeta(s: u32) -> f64 {
    assert!(s >= 2, "zeta is only evaluated at integers >= 2");
    let sf = s as f64;
    let n = 12.0f64;
    let mut sum = 0.0;
    for k in (1..12).rev() {
        sum += (k as f64).powf(-sf);
    }
    sum += n.powf(1.0 - sf) / (sf - 1.0) + 0.5 * n.powf(-sf);
    let mut rising = sf; // s (s+1) … (s+2j−2)
    let mut fact = 2.0; // (2j)!
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let j = j as f64 + 1.0;
        sum += b / fact * rising * n.powf(-sf - 2.0 * j + 1.0);
        rising *= (sf + 2.0 * j - 1.0) * (sf + 2.0 * j);
        fact *= (2.0 * j + 1.0) * (2.0 * j + 2.0);
    }
    sum
}

pub fn zeta3() -> f64 {
    zeta(3)
}

/// ζ(s−k)/k! for k ≥ s (i.e. ζ at a non-positive integer, divided by k!).
fn zeta_nonpos_over_fact(s: u32, k: u32) -> f64 {
    let m = k - s; // ζ(−m)
    if m == 0 {
        let mut f = 1.0;
        for i in 1..=k {
            f *= i as f64;
        }
        return -0.5 / f;
    }
    if m.is_multiple_of(2) {
        return 0.0;
    }
    // ζ(−m) = (−1)^n 2 (2n−1)! ζ(2n) / (2π)^{2n}, 2n = m + 1; divide by k! = (m+s)!.
    let n2 = m + 1;
    let sign = if (n2 / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut ratio = 1.0; // m! / (m+s)!
    for i in (m + 1)..=(m + s) {
        ratio /= i as f64;
    }
    sign * 2.0 * ratio * zeta(n2) / (2.0 * PI).powi(n2 as i32)
}

fn harmonic(n: u32) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

fn fact(n: u32) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Li_s(e^μ) for |μ| < 2π via the expansion around μ = 0.
fn li_near_one(s: u32, mu: C64) -> C64 {
    let mut sum = C64::new(0.0, 0.0);
    let mut pw = C64::new(1.0, 0.0);
    for k in 0..s - 1 {
        sum += pw * zeta(s - k) / fact(k);
        pw *= mu;
    }
    // k = s − 1 term
    if mu.norm() > 0.0 {
        sum += pw / fact(s - 1) * (C64::new(harmonic(s - 1), 0.0) - (-mu).ln());
    }
    pw *= mu;
    let mut k = s;
    loop {
        let c = zeta_nonpos_over_fact(s, k);
        let term = pw * c;
        sum += term;
        if k > s + 4 && c != 0.0 && term.norm() < 1e-18 * sum.norm().max(1.0) {
            break;
        }
        if k > 400 {
            break;
        }
        pw *= mu;
        k += 1;
    }
    sum
}

fn li_series(s: u32, z: C64) -> C64 {
    let mut sum = C64::new(0.0, 0.0);
    let mut pw = z;
    for k in 1..2000u32 {
        let term = pw / (k as f64).powi(s as i32);
        sum += term;
        if term.norm() < 1e-18 * sum.norm().max(1e-300) {
            break;
        }
        pw *= z;
    }
    sum
}

fn li_unit_disc(s: u32, z: C64) -> C64 {
    if z.norm() <= 0.5 {
        li_series(s, z)
    } else {
        li_near_one(s, z.ln())
    }
}

/// Li_s(z) for s ∈ {2, 3}. Real z > 1 is rejected; use [`polylog_side`].
pub fn polylog(s: u32, z: C64) -> Result<C64, PolylogError> {
    if s != 2 && s != 3 {
        return Err(PolylogError::UnsupportedOrder(s));
    }
    if z.im == 0.0 && z.re > 1.0 {
        return Err(PolylogError::OnBranchCut { s, z: z.re });
    }
    Ok(polylog_unchecked(s, z))
}

/// Li_s(x ± i0) for real x > 1, and plain Li_s otherwise.
pub fn polylog_side(s: u32, z: C64, side: CutSide) -> Result<C64, PolylogError> {
    if s != 2 && s != 3 {
        return Err(PolylogError::UnsupportedOrder(s));
    }
    if z.im == 0.0 && z.re > 1.0 {
        let eps = match side {
            CutSide::Above => 1e-300,
            CutSide::Below => -1e-300,
        };
        return Ok(polylog_unchecked(s, C64::new(z.re, eps)));
    }
    Ok(polylog_unchecked(s, z))
}

fn polylog_unchecked(s: u32, z: C64) -> C64 {
    if z == C64::new(0.0, 0.0) {
        return z;
    }
    if z == C64::new(1.0, 0.0) {
        return C64::new(zeta(s), 0.0);
    }
    if z.norm() <= 1.0 {
        return li_unit_disc(s, z);
    }
    // inversion: log(−z) taken on the side of z's imaginary part
    let w = z.inv();
    let l = log_neg(z);
    let z2 = C64::new(PI * PI / 6.0, 0.0);
    match s {
        2 => -li_unit_disc(2, w) - z2 - l * l * 0.5,
        _ => li_unit_disc(3, w) - z2 * l - l * l * l / 6.0,
    }
}

/// log(−z) with the sign of Im(−z) respected even when it is ±0.
fn log_neg(z: C64) -> C64 {
    let m = C64::new(-z.re, -z.im);
    C64::new(m.norm().ln(), m.im.atan2(m.re))
}

pub fn li2(z: C64) -> C64 {
    polylog(2, z).expect("argument off the branch cut")
}

pub fn li3(z: C64) -> C64 {
    polylog(3, z).expect("argument off the branch cut")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_values() {
        assert!((zeta(2) - PI * PI / 6.0).abs() < 1e-15);
        assert!((zeta(3) - 1.2020569031595942).abs() < 1e-15);
        assert!((zeta(4) - PI.powi(4) / 90.0).abs() < 1e-15);
    }

    #[test]
    fn li_at_zero_and_one() {
        assert_eq!(li2(C64::new(0.0, 0.0)), C64::new(0.0, 0.0));
        assert!((li2(C64::new(1.0, 0.0)).re - PI * PI / 6.0).abs() < 1e-13);
        assert!((li3(C64::new(1.0, 0.0)).re - zeta(3)).abs() < 1e-13);
    }

    #[test]
    fn li2_at_minus_one() {
        assert!((li2(C64::new(-1.0, 0.0)).re + PI * PI / 12.0).abs() < 1e-14);
    }

    #[test]
    fn branch_cut_rejected() {
        assert!(matches!(polylog(2, C64::new(2.0, 0.0)), Err(PolylogError::OnBranchCut { .. })));
        let a = polylog_side(2, C64::new(2.0, 0.0), CutSide::Above).unwrap();
        let b = polylog_side(2, C64::new(2.0, 0.0), CutSide::Below).unwrap();
        assert!(((a - b).im - 2.0 * PI * 2f64.ln()).abs() < 1e-12);
    }
}
