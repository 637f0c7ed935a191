//! Scalar kernels shared by the solvers: bracketed root finding, adaptive
//! Simpson quadrature and inversion of monotone maps.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum NumericsError {
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("tolerance not reached after {iterations} iterations")]
    MaxIterationsExceeded { iterations: usize },
    #[error("target {target} outside image [{lo}, {hi}] of the bracket")]
    OutOfRange { target: f64, lo: f64, hi: f64 },
    #[error("invalid bracket [{lo}, {hi}]")]
    InvalidBracket { lo: f64, hi: f64 },
    #[error("non-finite function value at {at}")]
    NonFinite { at: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Result<Self, NumericsError> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(NumericsError::InvalidBracket { lo, hi });
        }
        Ok(Self { lo, hi })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-10, max_iter: 200 }
    }
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64, max_iter: usize) -> Self {
        assert!(abs_tol > 0.0 && rel_tol >= 0.0 && max_iter >= 1, "invalid tolerance");
        Self { abs_tol, rel_tol, max_iter }
    }
}

/// Brent's method: inverse quadratic interpolation and secant steps guarded
/// by bisection.
///
/// Stops when |f(x)| <= `abs_tol` or the bracket has shrunk below
/// `rel_tol * |x| + abs_tol`.
pub fn find_root<F>(mut f: F, bracket: Bracket, tol: &Tolerance) -> Result<f64, NumericsError>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if !fa.is_finite() {
        return Err(NumericsError::NonFinite { at: a });
    }
    if !fb.is_finite() {
        return Err(NumericsError::NonFinite { at: b });
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(NumericsError::NoSignChange { lo: a, hi: b, f_lo: fa, f_hi: fb });
    }

    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..tol.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * (tol.rel_tol * b.abs() + tol.abs_tol);
        let xm = 0.5 * (c - b);
        if fb.abs() <= tol.abs_tol || xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(NumericsError::NonFinite { at: b });
        }
    }
    Err(NumericsError::MaxIterationsExceeded { iterations: tol.max_iter })
}

// Recursion depth cap for adaptive Simpson; 2^-50 of the interval is far
// below anything a smooth integrand needs.
const SIMPSON_MAX_DEPTH: usize = 50;

/// Adaptive Simpson quadrature with Richardson correction.
///
/// The requested accuracy is `max(abs_tol, rel_tol * |I|)` where `I` is a
/// coarse initial estimate; `max_iter` bounds the number of subinterval
/// refinements.
pub fn integrate<F>(f: F, a: f64, b: f64, tol: &Tolerance) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    if !(a < b) {
        return Err(NumericsError::InvalidBracket { lo: a, hi: b });
    }
    // Seed with a composite estimate so that the relative target is not
    // driven by a lucky single-panel value.
    let panels = 16;
    let h = (b - a) / panels as f64;
    let mut coarse = 0.0;
    let mut pieces = Vec::with_capacity(panels);
    for i in 0..panels {
        let lo = a + i as f64 * h;
        let hi = if i + 1 == panels { b } else { lo + h };
        let mid = 0.5 * (lo + hi);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let s = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        coarse += s;
        pieces.push((lo, hi, flo, fmid, fhi, s));
    }
    if !coarse.is_finite() {
        return Err(NumericsError::NonFinite { at: a });
    }
    let eps = tol.abs_tol.max(tol.rel_tol * coarse.abs());
    let mut budget = tol.max_iter.saturating_mul(1000);
    let mut total = 0.0;
    let mut comp = 0.0;
    for (lo, hi, flo, fmid, fhi, s) in pieces {
        let part = simpson_step(&f, lo, hi, flo, fmid, fhi, s, eps / panels as f64, 0, &mut budget)?;
        // Kahan summation across panels.
        let y = part - comp;
        let t = total + y;
        comp = (t - total) - y;
        total = t;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: usize,
    budget: &mut usize,
) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * eps {
        return Ok(left + right + delta / 15.0);
    }
    if depth >= SIMPSON_MAX_DEPTH || *budget == 0 {
        return Err(NumericsError::MaxIterationsExceeded { iterations: depth });
    }
    *budget -= 1;
    let l = simpson_step(f, a, m, fa, flm, fm, left, 0.5 * eps, depth + 1, budget)?;
    let r = simpson_step(f, m, b, fm, frm, fb, right, 0.5 * eps, depth + 1, budget)?;
    Ok(l + r)
}

/// Solves g(c) = y for strictly monotone g on the bracket.
pub fn invert_monotone<G>(g: G, y: f64, bracket: Bracket, tol: &Tolerance) -> Result<f64, NumericsError>
where
    G: Fn(f64) -> f64,
{
    let (g_lo, g_hi) = (g(bracket.lo), g(bracket.hi));
    let (lo, hi) = if g_lo <= g_hi { (g_lo, g_hi) } else { (g_hi, g_lo) };
    if !(y >= lo && y <= hi) {
        return Err(NumericsError::OutOfRange { target: y, lo, hi });
    }
    if y == g_lo {
        return Ok(bracket.lo);
    }
    if y == g_hi {
        return Ok(bracket.hi);
    }
    // The residual is judged relative to the scale of y, so the absolute
    // floor is widened for large targets.
    let scaled = Tolerance { abs_tol: tol.abs_tol * y.abs().max(1.0), ..*tol };
    find_root(|c| g(c) - y, bracket, &scaled)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_exact_roots() {
        let tol = Tolerance::default();
        let r = find_root(|x| x * x - 4.0, Bracket::new(0.0, 10.0).unwrap(), &tol).unwrap();
        assert!((r - 2.0).abs() < 1e-10);
        let r = find_root(|x| x, Bracket::new(-1.0, 1.0).unwrap(), &tol).unwrap();
        assert!(r.abs() < 1e-12);
    }

    #[test]
    fn brent_quadratic_from_market_roots() {
        let f = |m: f64| 0.00245 * m * m + 0.03245 * m - 0.05;
        let r = find_root(f, Bracket::new(0.0, 10.0).unwrap(), &Tolerance::default()).unwrap();
        let exact = (-0.03245 + (0.03245f64.powi(2) + 4.0 * 0.00245 * 0.05).sqrt()) / (2.0 * 0.00245);
        assert!((r - exact).abs() < 1e-9);
        assert!((r - 1.39410).abs() < 5e-6);
        assert!(f(r).abs() < 1e-12);
    }

    #[test]
    fn brent_rejects_same_sign() {
        let err = find_root(|x| x * x + 1.0, Bracket::new(-1.0, 1.0).unwrap(), &Tolerance::default());
        assert!(matches!(err, Err(NumericsError::NoSignChange { .. })));
    }

    #[test]
    fn brent_reports_iteration_limit() {
        let tol = Tolerance::new(1e-300, 0.0, 3);
        let err = find_root(|x| x.powi(3) - 2.0, Bracket::new(0.0, 5.0).unwrap(), &tol);
        assert!(matches!(err, Err(NumericsError::MaxIterationsExceeded { .. })));
    }

    #[test]
    fn simpson_simple_integrals() {
        let tol = Tolerance::default();
        assert!((integrate(|_| 1.0, 0.0, 1.0, &tol).unwrap() - 1.0).abs() < 1e-14);
        assert!((integrate(|x| x, 0.0, 1.0, &tol).unwrap() - 0.5).abs() < 1e-14);
        let v = integrate(|s| (-0.05 * s).exp(), 0.0, 20.0, &tol).unwrap();
        let exact = (1.0 - (-1.0f64).exp()) / 0.05;
        assert!((v - exact).abs() < 1e-10);
        assert!((v - 12.64241).abs() < 5e-6);
    }

    #[test]
    fn simpson_flags_singularity() {
        let tol = Tolerance::new(1e-14, 1e-14, 1);
        let r = integrate(|x: f64| 1.0 / x.sqrt().max(1e-300), 0.0, 1.0, &tol);
        assert!(r.is_err());
    }

    #[test]
    fn inversion_examples() {
        let tol = Tolerance::default();
        let c = invert_monotone(|c| 2.0 * c, 5.0, Bracket::new(0.0, 10.0).unwrap(), &tol).unwrap();
        assert!((c - 2.5).abs() < 1e-10);
        let c = invert_monotone(|c| c * c * c, 8.0, Bracket::new(0.0, 3.0).unwrap(), &tol).unwrap();
        assert!((c - 2.0).abs() < 1e-10);
        let e = invert_monotone(|c| c, 11.0, Bracket::new(0.0, 10.0).unwrap(), &tol);
        assert!(matches!(e, Err(NumericsError::OutOfRange { .. })));
    }
}
