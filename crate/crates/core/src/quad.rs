//! Double-exponential (tanh–sinh) quadrature with endpoint-accurate
//! evaluation, for integrands with log or dlog singularities at the ends.
//!
//! Integrands receive the point together with its exact distances to both
//! ends of the original interval, so `log(b − x)` stays finite at every node.

use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

pub type C64 = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("no convergence to {tol:e} within depth {depth} (last error estimate {estimate:e})")]
    MaxDepthExceeded { tol: f64, depth: u32, estimate: f64 },
    #[error("integrand is not finite at x = {0}")]
    NonIntegrableSingularity(f64),
}

pub type Result<T> = std::result::Result<T, QuadError>;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureSettings {
    /// Absolute tolerance for 1-D integrals.
    pub tol: f64,
    /// Absolute tolerance for 2-D integrals.
    pub tol2d: f64,
    /// Maximum bisection depth when a single tanh–sinh rule does not converge.
    pub max_depth: u32,
    /// Maximum number of step halvings inside one tanh–sinh rule.
    pub max_level: u32,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings { tol: 1e-10, tol2d: 1e-7, max_depth: 8, max_level: 9 }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.tol > 0.0 && self.tol2d > 0.0) {
            return Err("tolerances must be positive".into());
        }
        if self.max_depth > 40 || self.max_level > 14 {
            return Err("depth bounds too large".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: C64,
    pub error: f64,
    pub evals: usize,
}

/// A node inside `[a, b]` with exact offsets `x − a` and `b − x`.
#[derive(Clone, Copy, Debug)]
pub struct Node {
    pub x: f64,
    pub from_a: f64,
    pub to_b: f64,
}

/// ∫_a^b f over a sub-interval `[lo, hi]` of the reference interval `[a, b]`;
/// `lo_off = lo − a`, `hi_off = b − hi`.
fn rule<F: Fn(Node) -> C64>(f: &F, lo: f64, hi: f64, lo_off: f64, hi_off: f64, tol: f64, max_level: u32) -> Result<(QuadResult, bool)> {
    let hl = 0.5 * (hi - lo);
    let mut evals = 0usize;
    let eval = |t: f64, evals: &mut usize| -> Result<C64> {
        let u = FRAC_PI_2 * t.sinh();
        let e = (-2.0 * u.abs()).exp();
        // distance from the nearer end, in units of hl: 1 − tanh|u|; nodes
        // closer than 1e−200 are dropped so that 1/x-type factors stay finite
        let near = 2.0 * e / (1.0 + e);
        let w = hl * FRAC_PI_2 * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
        if w == 0.0 || near * hl < 1e-200 {
            return Ok(C64::new(0.0, 0.0));
        }
        let (from_lo, to_hi) = if t >= 0.0 { (2.0 * hl - near * hl, near * hl) } else { (near * hl, 2.0 * hl - near * hl) };
        let x = if t >= 0.0 { hi - to_hi } else { lo + from_lo };
        let v = f(Node { x, from_a: lo_off + from_lo, to_b: hi_off + to_hi });
        *evals += 1;
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(QuadError::NonIntegrableSingularity(x));
        }
        Ok(v * w)
    };
    let tmax = {
        let mut t: f64 = 1.0;
        loop {
            let u = FRAC_PI_2 * t.sinh();
            if (-2.0 * u).exp() * hl.abs() < 1e-200 || t > 7.0 {
                break t;
            }
            t += 0.25;
        }
    };
    let mut h = 0.5;
    let mut sum = eval(0.0, &mut evals)?;
    let mut k = 1;
    while (k as f64) * h <= tmax {
        let t = k as f64 * h;
        sum += eval(t, &mut evals)? + eval(-t, &mut evals)?;
        k += 1;
    }
    let mut prev = sum * h;
    let mut err = f64::INFINITY;
    for level in 1..=max_level {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= tmax {
            let t = k as f64 * h;
            sum += eval(t, &mut evals)? + eval(-t, &mut evals)?;
            k += 2;
        }
        let cur = sum * h;
        err = (cur - prev).norm();
        prev = cur;
        if err <= tol && level >= 3 {
            return Ok((QuadResult { value: cur, error: err, evals }, true));
        }
    }
    Ok((QuadResult { value: prev, error: err, evals }, false))
}

fn adapt<F: Fn(Node) -> C64>(
    f: &F,
    lo: f64,
    hi: f64,
    lo_off: f64,
    hi_off: f64,
    tol: f64,
    cfg: &QuadratureSettings,
    depth: u32,
) -> Result<QuadResult> {
    let (r, ok) = rule(f, lo, hi, lo_off, hi_off, tol, cfg.max_level)?;
    if ok {
        return Ok(r);
    }
    if depth >= cfg.max_depth {
        return Err(QuadError::MaxDepthExceeded { tol, depth, estimate: r.error });
    }
    let mid = 0.5 * (lo + hi);
    let left = adapt(f, lo, mid, lo_off, hi_off + (hi - mid), 0.5 * tol, cfg, depth + 1)?;
    let right = adapt(f, mid, hi, lo_off + (mid - lo), hi_off, 0.5 * tol, cfg, depth + 1)?;
    Ok(QuadResult { value: left.value + right.value, error: left.error + right.error, evals: left.evals + right.evals + r.evals })
}

/// ∫_a^b f(x) dx with adaptive tanh–sinh.
pub fn integrate<F: Fn(Node) -> C64>(f: F, a: f64, b: f64, tol: f64, cfg: &QuadratureSettings) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: C64::new(0.0, 0.0), error: 0.0, evals: 0 });
    }
    if b < a {
        let g = |n: Node| f(Node { x: n.x, from_a: n.to_b, to_b: n.from_a });
        let r = adapt(&g, b, a, 0.0, 0.0, tol, cfg, 0)?;
        return Ok(QuadResult { value: -r.value, ..r });
    }
    adapt(&f, a, b, 0.0, 0.0, tol, cfg, 0)
}

/// Convenience wrapper for real integrands of `x` alone.
pub fn integrate_real<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureSettings) -> Result<f64> {
    Ok(integrate(|n: Node| C64::new(f(n.x), 0.0), a, b, cfg.tol, cfg)?.value.re)
}

/// A point on a straight segment `from → to`, with the parameter `s` and `1 − s`.
#[derive(Clone, Copy, Debug)]
pub struct PathPoint {
    pub z: C64,
    pub s: f64,
    pub sbar: f64,
    pub from: C64,
    pub to: C64,
}

impl PathPoint {
    /// `c − z`, computed from the nearer endpoint so that it keeps full
    /// relative precision when `z` approaches `c = from` or `c = to`.
    pub fn offset_from(&self, c: C64) -> C64 {
        let dz = self.to - self.from;
        if self.s <= self.sbar {
            (c - self.from) - dz * self.s
        } else {
            (c - self.to) + dz * self.sbar
        }
    }

    pub fn velocity(&self) -> C64 {
        self.to - self.from
    }
}

/// A straight oriented segment in ℂ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub from: C64,
    pub to: C64,
}

impl Segment {
    pub fn new(from: C64, to: C64) -> Self {
        Segment { from, to }
    }
    pub fn reversed(&self) -> Self {
        Segment { from: self.to, to: self.from }
    }
    pub fn point(&self, s: f64) -> C64 {
        self.from + (self.to - self.from) * s
    }
}

/// ∫_path f(z) dz over a chain of segments; `f` sees a [`PathPoint`].
pub fn integrate_path<F: Fn(&PathPoint) -> C64>(f: F, path: &[Segment], cfg: &QuadratureSettings) -> Result<QuadResult> {
    let mut total = QuadResult { value: C64::new(0.0, 0.0), error: 0.0, evals: 0 };
    let tol = cfg.tol / path.len().max(1) as f64;
    for seg in path {
        let r = integrate(
            |n: Node| {
                let pp = PathPoint { z: seg.point(n.x), s: n.from_a, sbar: n.to_b, from: seg.from, to: seg.to };
                f(&pp) * pp.velocity()
            },
            0.0,
            1.0,
            tol,
            cfg,
        )?;
        total.value += r.value;
        total.error += r.error;
        total.evals += r.evals;
    }
    Ok(total)
}

/// A point of a planar region with exact complements `1 − x`, `1 − y`
/// (for [`Region::Rect`], the distances `x1 − x`, `y1 − y` to the far edges).
#[derive(Clone, Copy, Debug)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
    pub xbar: f64,
    pub ybar: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    /// [0, 1]²
    UnitSquare,
    /// Δ = {x + y ≥ 1} ⊂ [0, 1]²
    Delta,
    /// [x0, x1] × [y0, y1]
    Rect { x0: f64, x1: f64, y0: f64, y1: f64 },
}

/// ∫_region f dx dy by iterated tanh–sinh (outer x, inner y).
pub fn integrate_region<F: Fn(&Point2) -> C64>(f: F, region: Region, cfg: &QuadratureSettings) -> Result<QuadResult> {
    let inner_tol = 0.1 * cfg.tol2d;
    let inner_err = std::cell::Cell::new(0.0f64);
    let inner_fail = std::cell::RefCell::new(None);
    let (xlo, xhi, yhi) = match region {
        Region::UnitSquare | Region::Delta => (0.0, 1.0, 1.0),
        Region::Rect { x0, x1, y1, .. } => (x0, x1, y1),
    };
    let outer = integrate(
        |nx: Node| {
            let (x, xbar) = (nx.x, nx.to_b);
            let ylo = match region {
                Region::UnitSquare => 0.0,
                Region::Delta => xbar,
                Region::Rect { y0, .. } => y0,
            };
            let r = integrate(
                |ny: Node| f(&Point2 { x, y: ny.x, xbar, ybar: ny.to_b }),
                ylo,
                yhi,
                inner_tol,
                cfg,
            );
            match r {
                Ok(r) => {
                    inner_err.set(inner_err.get().max(r.error));
                    r.value
                }
                Err(e) => {
                    inner_fail.borrow_mut().get_or_insert(e);
                    C64::new(0.0, 0.0)
                }
            }
        },
        xlo,
        xhi,
        cfg.tol2d,
        cfg,
    )?;
    if let Some(e) = inner_fail.into_inner() {
        return Err(e);
    }
    Ok(QuadResult { value: outer.value, error: outer.error + inner_err.get(), evals: outer.evals })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_integrand() {
        let cfg = QuadratureSettings::default();
        let r = integrate_path(|_| C64::new(0.0, 0.0), &[Segment::new(C64::new(0.0, 1.0), C64::new(2.0, -1.0))], &cfg).unwrap();
        assert_eq!(r.value, C64::new(0.0, 0.0));
    }

    #[test]
    fn log_endpoint() {
        let cfg = QuadratureSettings::default();
        let v = integrate(|n: Node| C64::new(n.from_a.ln(), 0.0), 0.0, 1.0, 1e-12, &cfg).unwrap();
        assert!((v.value.re + 1.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_interval_flips_sign() {
        let cfg = QuadratureSettings::default();
        let a = integrate(|n: Node| C64::new(n.x * n.x, 0.0), 0.0, 2.0, 1e-12, &cfg).unwrap();
        let b = integrate(|n: Node| C64::new(n.x * n.x, 0.0), 2.0, 0.0, 1e-12, &cfg).unwrap();
        assert!((a.value + b.value).norm() < 1e-13);
        assert!((a.value.re - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn region_areas() {
        let cfg = QuadratureSettings::default();
        let one = |_: &Point2| C64::new(1.0, 0.0);
        assert!((integrate_region(one, Region::UnitSquare, &cfg).unwrap().value.re - 1.0).abs() < 1e-12);
        assert!((integrate_region(one, Region::Delta, &cfg).unwrap().value.re - 0.5).abs() < 1e-12);
        let rect = Region::Rect { x0: -1.0, x1: 2.0, y0: 0.5, y1: 1.5 };
        assert!((integrate_region(one, rect, &cfg).unwrap().value.re - 3.0).abs() < 1e-12);
        let xy = |p: &Point2| C64::new(p.x * p.y, 0.0);
        assert!((integrate_region(xy, rect, &cfg).unwrap().value.re - 1.5).abs() < 1e-12);
    }
}
