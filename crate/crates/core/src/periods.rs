//! Periods as complex numbers taken modulo ℚ(p) = (2πi)^p ℚ, with a
//! bounded-height search for the rational discrepancy.

use crate::linalg::Rational;
use crate::quad::C64;
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodValue {
    pub value: C64,
    pub p: i32,
    pub error: f64,
}

impl PeriodValue {
    pub fn new(value: C64, p: i32, error: f64) -> Self {
        assert!(error >= 0.0, "error estimate must be non-negative");
        PeriodValue { value, p, error }
    }

    pub fn exact(value: C64, p: i32) -> Self {
        PeriodValue { value, p, error: 0.0 }
    }
}

/// (2πi)^p.
pub fn two_pi_i_pow(p: i32) -> C64 {
    C64::new(0.0, 2.0 * PI).powi(p)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModQpSettings {
    pub denom_bound: u64,
    pub num_bound: u64,
    pub tol: f64,
}

impl Default for ModQpSettings {
    fn default() -> Self {
        ModQpSettings { denom_bound: 64, num_bound: 10_000, tol: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModQpVerdict {
    pub equal: bool,
    /// The rational q with a − b ≈ (2πi)^p q.
    pub witness: Rational,
    /// |a − b − (2πi)^p q|.
    pub residual: f64,
}

/// Decides whether a ≡ b in ℂ/ℚ(p) up to a witness r/s with |r| ≤ A, s ≤ B.
///
/// Among witnesses with residual below `tol` the one of smallest |q|
/// (then smallest denominator) is returned; otherwise the witness with the
/// smallest residual.
pub fn mod_qp_equal(a: &PeriodValue, b: &PeriodValue, cfg: &ModQpSettings) -> ModQpVerdict {
    assert_eq!(a.p, b.p, "periods compared modulo different Tate twists");
    let unit = two_pi_i_pow(a.p);
    let diff = a.value - b.value;
    let ratio = (diff / unit).re;
    let mut best: Option<(f64, Rational)> = None;
    let mut best_ok: Option<(f64, Rational)> = None;
    for s in 1..=cfg.denom_bound.max(1) {
        let r = (ratio * s as f64).round();
        if !r.is_finite() || r.abs() > cfg.num_bound as f64 {
            continue;
        }
        let q = Rational::new(BigInt::from(r as i64), BigInt::from(s));
        let res = (diff - unit * (r / s as f64)).norm();
        if best.as_ref().is_none_or(|(br, _)| res < *br) {
            best = Some((res, q.clone()));
        }
        if res < cfg.tol {
            let better = match &best_ok {
                None => true,
                Some((_, bq)) => q.abs() < bq.abs(),
            };
            if better {
                best_ok = Some((res, q));
            }
        }
    }
    if let Some((residual, witness)) = best_ok {
        return ModQpVerdict { equal: true, witness, residual };
    }
    match best {
        Some((residual, witness)) => ModQpVerdict { equal: false, witness, residual },
        None => ModQpVerdict { equal: false, witness: Rational::zero(), residual: diff.norm() },
    }
}

/// Witness as an f64, for reports.
pub fn rational_to_f64(q: &Rational) -> f64 {
    q.numer().to_f64().unwrap_or(f64::NAN) / q.denom().to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::q;

    #[test]
    fn reflexive_with_zero_witness() {
        let a = PeriodValue::exact(C64::new(0.3, -1.2), 2);
        let v = mod_qp_equal(&a, &a, &ModQpSettings::default());
        assert!(v.equal);
        assert!(v.witness.is_zero());
    }

    #[test]
    fn finds_three_quarters() {
        let b = PeriodValue::exact(C64::new(0.7, 0.1), 2);
        let a = PeriodValue::exact(b.value + two_pi_i_pow(2) * 0.75, 2);
        let v = mod_qp_equal(&a, &b, &ModQpSettings::default());
        assert!(v.equal);
        assert_eq!(v.witness, q(3, 4));
    }

    #[test]
    fn small_offset_rejected() {
        let b = PeriodValue::exact(C64::new(0.7, 0.1), 2);
        let a = PeriodValue::exact(b.value + 0.001, 2);
        let cfg = ModQpSettings { denom_bound: 8, num_bound: 10, tol: 1e-8 };
        assert!(!mod_qp_equal(&a, &b, &cfg).equal);
    }
}
