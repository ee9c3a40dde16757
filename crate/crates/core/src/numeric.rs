//! Scalar root finding, 1-D maximization and quadrature used by the solvers.

use crate::error::{Error, Result};

pub(crate) const BISECTION_MAX_ITER: usize = 200;

/// Bisection for a function that is nonincreasing on `[lo, hi]` with
/// `f(lo) >= 0 >= f(hi)`. Infinite endpoint values are allowed.
///
/// Stops when the bracket collapses to adjacent floats, `|f(mid)| <= ftol`
/// with the bracket below `xtol`, or after `BISECTION_MAX_ITER` halvings.
pub fn bisect_decreasing<F>(f: F, mut lo: f64, mut hi: f64, xtol: f64, ftol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let flo = f(lo);
    let fhi = f(hi);
    if flo.is_nan() || fhi.is_nan() {
        return Err(Error::Numeric(format!(
            "function is NaN at bracket [{lo}, {hi}]"
        )));
    }
    if flo < 0.0 || fhi > 0.0 {
        return Err(Error::Numeric(format!(
            "no sign change on [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}"
        )));
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm.is_nan() {
            return Err(Error::Numeric(format!("function is NaN at {mid}")));
        }
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= xtol && fm.abs() <= ftol {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Doubles `hi` (starting from `start`) until `f(hi) <= 0`.
pub fn expand_upper<F>(f: F, start: f64, max_doublings: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut hi = start;
    for _ in 0..max_doublings {
        if f(hi) <= 0.0 {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    Err(Error::Numeric(format!(
        "could not bracket root: f stays positive on [0, {hi}]"
    )))
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
///
/// Returns `(x_max, f_max)`.
pub fn golden_section_max<F>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iter = 0;
    while (b - a) > tol && iter < 500 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
        iter += 1;
    }
    let (fa, fb) = (f(a), f(b));
    [(x1, f1), (x2, f2), (a, fa), (b, fb)]
        .into_iter()
        .fold(
            (x1, f1),
            |best, cand| if cand.1 > best.1 { cand } else { best },
        )
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 50)
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
    tol: f64,
    depth: u32,
) -> f64
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_finds_sqrt_two() {
        let r = bisect_decreasing(|x| 2.0 - x * x, 0.0, 2.0, 1e-14, 0.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn bisection_rejects_missing_sign_change() {
        let err = bisect_decreasing(|x| 1.0 + x, 0.0, 1.0, 1e-12, 0.0).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn bisection_accepts_infinite_endpoint() {
        let r = bisect_decreasing(|x| 1.0 / x - 2.0, 0.0, 1.0, 1e-14, 0.0).unwrap();
        assert!((r - 0.5).abs() < 1e-14);
    }

    #[test]
    fn expand_upper_doubles_until_negative() {
        let hi = expand_upper(|x| 10.0 - x, 1.0, 64).unwrap();
        assert_eq!(hi, 16.0);
        assert!(expand_upper(|_| 1.0, 1.0, 8).is_err());
    }

    #[test]
    fn golden_section_on_parabola() {
        let (x, fx) = golden_section_max(|x| -(x - 0.3) * (x - 0.3) + 1.0, 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-12);
    }

    #[test]
    fn golden_section_at_boundary() {
        let (x, _) = golden_section_max(|x| x, 0.0, 2.0, 1e-10);
        assert_eq!(x, 2.0);
    }

    #[test]
    fn simpson_integrates_sqrt() {
        let v = adaptive_simpson(f64::sqrt, 0.0, 1.0, 1e-10);
        assert!((v - 2.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn linspace_endpoints() {
        let g = linspace(0.25, 1.0, 4);
        assert_eq!(g, vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(linspace(1.0, 2.0, 1), vec![1.0]);
    }
}
