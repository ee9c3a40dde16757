//! Closed-form solutions for costs uniform on `[0, 1]`.
//!
//! With `F(c) = c` the indifference equation clears to the cubic
//!
//! ```text
//! 0 = H²c³ + (MH - H²)c² - (RH + MH)c + λR(H+M) - RM
//! ```
//!
//! which is solved here in Cardano form with complex intermediates. The cubic
//! is stored with the negated coefficient tuple `a = -H²`, `b = H(H-M)`,
//! `d = H(M+R)`, `e = -λR(H+M) + MR`; both sign conventions share roots.

use num_complex::Complex64;
use serde::Serialize;

use crate::continuum::GameParams;
use crate::distributions::CostDistribution;
use crate::error::{Error, Result};
use crate::numeric::golden_section_max;

/// Imaginary-part tolerance for accepting a complex root as real.
pub const REAL_TOL: f64 = 1e-9;

/// Primitive cube root of unity `(-1 + i√3)/2`.
pub fn unit_root() -> Complex64 {
    Complex64::new(-0.5, 3f64.sqrt() / 2.0)
}

/// Threshold from the security-maximizing quadratic `Hc² + Mc - R = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticSolution {
    pub cstar: f64,
    /// Positive root before clipping to the support.
    pub raw_root: f64,
    /// Set when the raw root exceeded 1 and `c*` was clipped to 1.
    pub corner: bool,
}

pub fn security_max_uniform(h: f64, m: f64, r: f64) -> Result<QuadraticSolution> {
    if !(h > 0.0 && m >= 0.0 && r > 0.0) {
        return Err(Error::InvalidParams(format!(
            "need H > 0, M >= 0, R > 0; got H={h}, M={m}, R={r}"
        )));
    }
    // Same root as (-M + √(M²+4HR)) / 2H without cancellation for large R.
    let raw_root = 2.0 * r / (m + (m * m + 4.0 * h * r).sqrt());
    let corner = raw_root > 1.0;
    Ok(QuadraticSolution {
        cstar: raw_root.min(1.0),
        raw_root,
        corner,
    })
}

/// Welfare optimum for uniform costs from the radical expression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelfareRoot {
    pub cstar: f64,
    /// Cube-root branch `k` (as in `Z·z^k`) that produced the maximizer.
    pub branch: Option<usize>,
    /// Set when no branch passed the `W'(c*) = 0` check and golden-section
    /// search supplied the value instead.
    pub fallback: bool,
}

/// `W'(c) = H²M/(cH+M)² - cH` for uniform costs.
pub fn uniform_welfare_slope(c: f64, h: f64, m: f64) -> f64 {
    h * h * m / ((c * h + m) * (c * h + m)) - c * h
}

/// Radical value of the real optimum for cube-root branch `k`.
///
/// ```text
/// c* = (1+i√3)M² / (2^{2/3}·3·Z) + (1-i√3)Z / (6·∛2·H²) - 2M/(3H)
/// Z  = ∛(-27H⁵M - 2H³M³ + 3√3·√(27H¹⁰M² + 4H⁸M⁴))
/// ```
pub fn welfare_radical(h: f64, m: f64, branch: usize) -> Complex64 {
    let i_sqrt3 = Complex64::new(0.0, 3f64.sqrt());
    let disc = Complex64::new(27.0 * h.powi(10) * m * m + 4.0 * h.powi(8) * m.powi(4), 0.0).sqrt();
    let inner = Complex64::new(-27.0 * h.powi(5) * m - 2.0 * h.powi(3) * m.powi(3), 0.0)
        + 3.0 * 3f64.sqrt() * disc;
    let z = inner.cbrt() * unit_root().powu(branch as u32);
    (1.0 + i_sqrt3) * m * m / (2f64.powf(2.0 / 3.0) * 3.0 * z)
        + (1.0 - i_sqrt3) * z / (6.0 * 2f64.cbrt() * h * h)
        - 2.0 * m / (3.0 * h)
}

pub fn welfare_optimal_uniform(h: f64, m: f64) -> Result<WelfareRoot> {
    if !(h > m && m > 0.0) {
        return Err(Error::InvalidParams(format!(
            "need H > M > 0; got H={h}, M={m}"
        )));
    }
    for branch in 0..3 {
        let c = welfare_radical(h, m, branch);
        if c.im.abs() < REAL_TOL
            && (0.0..=1.0).contains(&c.re)
            && uniform_welfare_slope(c.re, h, m).abs() < 1e-8
        {
            return Ok(WelfareRoot {
                cstar: c.re,
                branch: Some(branch),
                fallback: false,
            });
        }
    }
    let w = |c: f64| h * (c * h / (c * h + m) - 0.5 * c * c);
    let (c, _) = golden_section_max(w, 0.0, 1.0, 1e-12);
    Ok(WelfareRoot {
        cstar: c,
        branch: None,
        fallback: true,
    })
}

/// Cardano decomposition of the equilibrium cubic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CubicSolution {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub e: f64,
    pub delta0: f64,
    pub delta1: f64,
    /// `C = ∛((Δ₁ + √(Δ₁² - 4Δ₀³))/2)`, principal branches.
    #[serde(serialize_with = "ser_complex")]
    pub big_c: Complex64,
    #[serde(serialize_with = "ser_roots")]
    pub roots: [Complex64; 3],
    pub feasible_root: Option<f64>,
}

impl CubicSolution {
    pub fn eval(&self, c: Complex64) -> Complex64 {
        ((self.a * c + self.b) * c + self.d) * c + self.e
    }

    /// `|a|+|b|+|d|+|e|`, the scale used for relative residuals.
    pub fn coefficient_scale(&self) -> f64 {
        self.a.abs() + self.b.abs() + self.d.abs() + self.e.abs()
    }
}

fn ser_complex<S: serde::Serializer>(c: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    [c.re, c.im].serialize(s)
}

fn ser_roots<S: serde::Serializer>(
    r: &[Complex64; 3],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    r.iter()
        .map(|c| [c.re, c.im])
        .collect::<Vec<_>>()
        .serialize(s)
}

/// Coefficients `(a, b, d, e)` of the cleared indifference cubic.
pub fn cubic_coefficients(h: f64, m: f64, r: f64, lambda: f64) -> (f64, f64, f64, f64) {
    (
        -h * h,
        h * (h - m),
        h * (m + r),
        -lambda * r * (h + m) + m * r,
    )
}

/// Roots of `a c³ + b c² + d c + e` via `c_k = -(b + z^k C + Δ₀/(z^k C)) / 3a`.
pub fn cardano_roots(a: f64, b: f64, d: f64, e: f64) -> (f64, f64, Complex64, [Complex64; 3]) {
    let delta0 = b * b - 3.0 * a * d;
    let delta1 = 2.0 * b * b * b - 9.0 * a * b * d + 27.0 * a * a * e;
    let disc = Complex64::new(delta1 * delta1 - 4.0 * delta0 * delta0 * delta0, 0.0).sqrt();
    let scale = delta1
        .abs()
        .max(delta0.abs().powf(1.5))
        .max(f64::MIN_POSITIVE);
    let mut big_c = ((delta1 + disc) / 2.0).cbrt();
    if big_c.norm() <= 1e-12 * scale.cbrt() {
        // Other sign of the square root keeps C away from zero unless Δ₀ = Δ₁ = 0.
        big_c = ((delta1 - disc) / 2.0).cbrt();
    }
    let z = unit_root();
    let roots = if big_c.norm() <= 1e-12 * scale.cbrt() {
        let triple = Complex64::new(-b / (3.0 * a), 0.0);
        [triple; 3]
    } else {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (k, slot) in out.iter_mut().enumerate() {
            let zc = z.powu(k as u32) * big_c;
            *slot = -(b + zc + delta0 / zc) / (3.0 * a);
        }
        out
    };
    (delta0, delta1, big_c, roots)
}

/// Solves the equilibrium cubic for uniform costs and picks the root in (0, 1).
pub fn equilibrium_cubic(h: f64, m: f64, r: f64, lambda: f64) -> Result<CubicSolution> {
    let params = GameParams::new(h, m, r, lambda)?;
    let bound = params.lambda_bound();
    let (a, b, d, e) = cubic_coefficients(h, m, r, lambda);
    let (delta0, delta1, big_c, roots) = cardano_roots(a, b, d, e);
    let mut sol = CubicSolution {
        a,
        b,
        d,
        e,
        delta0,
        delta1,
        big_c,
        roots,
        feasible_root: None,
    };
    if lambda <= bound {
        return Err(Error::Infeasible(format!(
            "lambda={lambda} must exceed M/(H+M)={bound} for a root in (0, 1)"
        )));
    }
    // Clearing denominators adds the spurious root c = 1 at λ = 1, so among
    // candidates keep the one that best satisfies the uncleared equation.
    let uniform = CostDistribution::uniform();
    sol.feasible_root = roots
        .iter()
        .filter(|c| c.im.abs() < REAL_TOL && c.re > 0.0 && c.re < 1.0)
        .map(|c| c.re)
        .min_by(|x, y| {
            let gx = crate::continuum::indifference_gap(*x, &params, &uniform).abs();
            let gy = crate::continuum::indifference_gap(*y, &params, &uniform).abs();
            gx.total_cmp(&gy)
        });
    if sol.feasible_root.is_none() {
        return Err(Error::Infeasible(format!(
            "no real root in (0, 1) for lambda={lambda} (bound M/(H+M)={bound})"
        )));
    }
    Ok(sol)
}
