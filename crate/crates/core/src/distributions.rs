//! Cost distributions for honest agents.
//!
//! A [`CostDistribution`] carries the CDF `F`, its density `f`, the support
//! bound `T` (possibly infinite) and the moments the welfare functional needs.
//! Built-in families are uniform on `[0, T]`, the power family
//! `F(c) = (c/T)^alpha` with `0 < alpha <= 1`, and piecewise-linear tables.
//! Arbitrary CDFs can be plugged in with [`CostDistribution::custom`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{adaptive_simpson, bisect_decreasing, expand_upper};

const QUADRATURE_TOL: f64 = 1e-9;

/// Family tag reported alongside results.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Uniform,
    Power { alpha: f64 },
    Table { knots: usize },
    Custom { name: String },
}

type CdfFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Uniform { upper: f64 },
    Power { alpha: f64, upper: f64 },
    Table { knots: Vec<(f64, f64)> },
    Custom { name: String, cdf: CdfFn },
}

/// Distribution of pool-running costs among honest agents.
#[derive(Clone)]
pub struct CostDistribution {
    kind: Kind,
    upper: f64,
}

impl fmt::Debug for CostDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CostDistribution")
            .field("family", &self.family())
            .field("support_upper", &self.upper)
            .finish()
    }
}

impl fmt::Display for CostDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Uniform { upper } if *upper == 1.0 => write!(f, "uniform"),
            Kind::Uniform { upper } => write!(f, "uniform:T={upper}"),
            Kind::Power { alpha, upper } if *upper == 1.0 => write!(f, "power:alpha={alpha}"),
            Kind::Power { alpha, upper } => write!(f, "power:alpha={alpha},T={upper}"),
            Kind::Table { knots } => write!(f, "table({} knots)", knots.len()),
            Kind::Custom { name, .. } => write!(f, "custom:{name}"),
        }
    }
}

impl CostDistribution {
    /// Uniform costs on `[0, 1]`.
    pub fn uniform() -> Self {
        Self {
            kind: Kind::Uniform { upper: 1.0 },
            upper: 1.0,
        }
    }

    /// Uniform costs on `[0, upper]`.
    pub fn uniform_on(upper: f64) -> Result<Self> {
        check_upper(upper)?;
        Ok(Self {
            kind: Kind::Uniform { upper },
            upper,
        })
    }

    /// `F(c) = c^alpha` on `[0, 1]`.
    pub fn power(alpha: f64) -> Result<Self> {
        Self::power_on(alpha, 1.0)
    }

    /// `F(c) = (c / upper)^alpha` on `[0, upper]`.
    pub fn power_on(alpha: f64, upper: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "power family needs 0 < alpha <= 1 for a concave CDF, got {alpha}"
            )));
        }
        check_upper(upper)?;
        Ok(Self {
            kind: Kind::Power { alpha, upper },
            upper,
        })
    }

    /// Piecewise-linear CDF through `(c, F(c))` knots.
    ///
    /// Costs must be strictly increasing, probabilities nondecreasing in
    /// `[0, 1]` and end at 1. A leading `(0, 0)` knot is inserted when the
    /// first knot sits at a positive cost with zero probability.
    pub fn from_knots(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Spec("table needs at least one knot".into()));
        }
        if knots.iter().any(|(c, p)| !c.is_finite() || !p.is_finite()) {
            return Err(Error::Spec("table knots must be finite".into()));
        }
        if knots[0].0 > 0.0 {
            if knots[0].1 != 0.0 {
                return Err(Error::Spec(
                    "table CDF has an atom at zero (first knot must have F=0)".into(),
                ));
            }
            knots.insert(0, (0.0, 0.0));
        }
        if knots[0].0 != 0.0 || knots[0].1 != 0.0 {
            return Err(Error::Spec("table must start at (0, 0)".into()));
        }
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Spec(format!(
                    "table costs must be strictly increasing ({} after {})",
                    w[1].0, w[0].0
                )));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::Spec(format!(
                    "table CDF decreases between c={} and c={}",
                    w[0].0, w[1].0
                )));
            }
        }
        let last = knots.last_mut().expect("non-empty");
        if (last.1 - 1.0).abs() > 1e-9 {
            return Err(Error::Spec(format!(
                "table CDF must end at 1, ends at {}",
                last.1
            )));
        }
        last.1 = 1.0;
        // Truncate trailing flat knots so that the support ends where F hits 1.
        let first_one = knots.iter().position(|k| k.1 >= 1.0).expect("ends at 1");
        knots.truncate(first_one + 1);
        let upper = knots[first_one].0;
        if upper <= 0.0 {
            return Err(Error::Spec("table support must be positive".into()));
        }
        Ok(Self {
            kind: Kind::Table { knots },
            upper,
        })
    }

    /// Loads a `c,F(c)` CSV (optional header line, `#` comments allowed).
    pub fn from_table_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Spec(format!("cannot read {}: {e}", path.display())))?;
        let mut knots = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Spec(format!(
                    "{}:{}: expected two columns",
                    path.display(),
                    lineno + 1
                )));
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(c), Ok(p)) => knots.push((c, p)),
                _ if knots.is_empty() => continue, // header
                _ => {
                    return Err(Error::Spec(format!(
                        "{}:{}: non-numeric knot",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        }
        Self::from_knots(knots)
    }

    /// User-supplied CDF on `[0, upper)`; `upper` may be `f64::INFINITY`.
    ///
    /// The density is taken as a central difference of `cdf`.
    pub fn custom<F>(name: impl Into<String>, upper: f64, cdf: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if upper.is_nan() || upper <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "support bound must be positive, got {upper}"
            )));
        }
        let at_zero = cdf(0.0);
        if at_zero.abs() > 1e-12 {
            return Err(Error::InvalidParams(format!(
                "custom CDF must vanish at zero (atomless), F(0)={at_zero}"
            )));
        }
        Ok(Self {
            kind: Kind::Custom {
                name: name.into(),
                cdf: Arc::new(cdf),
            },
            upper,
        })
    }

    pub fn family(&self) -> Family {
        match &self.kind {
            Kind::Uniform { .. } => Family::Uniform,
            Kind::Power { alpha, .. } => Family::Power { alpha: *alpha },
            Kind::Table { knots } => Family::Table { knots: knots.len() },
            Kind::Custom { name, .. } => Family::Custom { name: name.clone() },
        }
    }

    /// Support bound `T`.
    pub fn support_upper(&self) -> f64 {
        self.upper
    }

    pub fn is_bounded(&self) -> bool {
        self.upper.is_finite()
    }

    /// `F(c)`; negative costs are a domain error.
    pub fn cdf(&self, c: f64) -> Result<f64> {
        if c < 0.0 || c.is_nan() {
            return Err(Error::Domain(format!("cost must be nonnegative, got {c}")));
        }
        Ok(self.prob_below(c))
    }

    /// `F(c)` extended by 0 below zero and by 1 above `T`.
    pub fn prob_below(&self, c: f64) -> f64 {
        if c <= 0.0 {
            return 0.0;
        }
        if c >= self.upper {
            return 1.0;
        }
        match &self.kind {
            Kind::Uniform { upper } => c / upper,
            Kind::Power { alpha, upper } => (c / upper).powf(*alpha),
            Kind::Table { knots } => table_cdf(knots, c),
            Kind::Custom { cdf, .. } => cdf(c).clamp(0.0, 1.0),
        }
    }

    /// Density `f(c)`; zero outside `[0, T)`.
    pub fn pdf(&self, c: f64) -> f64 {
        if c < 0.0 || c >= self.upper {
            return 0.0;
        }
        match &self.kind {
            Kind::Uniform { upper } => 1.0 / upper,
            Kind::Power { alpha, upper } => {
                if c == 0.0 {
                    if *alpha < 1.0 {
                        f64::INFINITY
                    } else {
                        1.0 / upper
                    }
                } else {
                    alpha / upper * (c / upper).powf(alpha - 1.0)
                }
            }
            Kind::Table { knots } => {
                let i = segment(knots, c);
                let (c0, p0) = knots[i];
                let (c1, p1) = knots[i + 1];
                (p1 - p0) / (c1 - c0)
            }
            Kind::Custom { .. } => {
                let h = 1e-6 * c.max(1.0);
                let lo = (c - h).max(0.0);
                let hi = c + h;
                (self.prob_below(hi) - self.prob_below(lo)) / (hi - lo)
            }
        }
    }

    /// Inverse CDF: the smallest cost `c` with `F(c) >= u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if u <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            Kind::Uniform { upper } => u * upper,
            Kind::Power { alpha, upper } => upper * u.powf(1.0 / alpha),
            Kind::Table { knots } => {
                for w in knots.windows(2) {
                    let (c0, p0) = w[0];
                    let (c1, p1) = w[1];
                    if u <= p1 && p1 > p0 {
                        return c0 + (u - p0) / (p1 - p0) * (c1 - c0);
                    }
                }
                self.upper
            }
            Kind::Custom { .. } => {
                let g = |c: f64| u - self.prob_below(c);
                let hi = if self.is_bounded() {
                    self.upper
                } else {
                    match expand_upper(g, 1.0, 1100) {
                        Ok(hi) => hi,
                        Err(_) => return f64::INFINITY,
                    }
                };
                // g is nonincreasing; the root is where F crosses u.
                bisect_decreasing(|c| if g(c) > 0.0 { 1.0 } else { -1.0 }, 0.0, hi, 0.0, 0.0)
                    .unwrap_or(hi)
            }
        }
    }

    /// One i.i.d. draw by inverse-CDF sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    /// `∫_0^c F(x) dx`.
    pub fn integrated_cdf(&self, c: f64) -> f64 {
        if c <= 0.0 {
            return 0.0;
        }
        let upto = c.min(self.upper);
        let beyond = (c - upto).max(0.0);
        let inside = match &self.kind {
            Kind::Uniform { upper } => upto * upto / (2.0 * upper),
            Kind::Power { alpha, upper } => upto * (upto / upper).powf(*alpha) / (alpha + 1.0),
            Kind::Table { knots } => {
                let mut acc = 0.0;
                for w in knots.windows(2) {
                    let (c0, p0) = w[0];
                    let (c1, p1) = w[1];
                    if upto <= c0 {
                        break;
                    }
                    let end = upto.min(c1);
                    let pend = p0 + (p1 - p0) * (end - c0) / (c1 - c0);
                    acc += 0.5 * (p0 + pend) * (end - c0);
                }
                acc
            }
            Kind::Custom { .. } => {
                adaptive_simpson(|x| self.prob_below(x), 0.0, upto, QUADRATURE_TOL)
            }
        };
        inside + beyond
    }

    /// Partial expectation `∫_0^c x f(x) dx = c F(c) - ∫_0^c F(x) dx`.
    pub fn partial_expectation(&self, c: f64) -> f64 {
        if c <= 0.0 {
            return 0.0;
        }
        let c = c.min(self.upper);
        (c * self.prob_below(c) - self.integrated_cdf(c)).max(0.0)
    }

    /// `E[X | X < cstar]`.
    pub fn truncated_mean(&self, cstar: f64) -> Result<f64> {
        if cstar.is_nan() || cstar < 0.0 {
            return Err(Error::Domain(format!(
                "truncation point must be nonnegative, got {cstar}"
            )));
        }
        let mass = self.prob_below(cstar);
        if mass <= 0.0 {
            return Err(Error::Domain(format!(
                "conditional mean undefined: F({cstar}) = 0"
            )));
        }
        let c = cstar.min(self.upper);
        Ok(match &self.kind {
            Kind::Uniform { .. } => 0.5 * c,
            Kind::Power { alpha, .. } => alpha * c / (alpha + 1.0),
            _ => self.partial_expectation(c) / mass,
        })
    }

    /// Grid check of `F'' <= 0` on the support (or up to the 0.999 quantile).
    pub fn has_concave_cdf(&self) -> bool {
        let hi = if self.is_bounded() {
            self.upper
        } else {
            self.quantile(0.999)
        };
        let n = 2000;
        let h = hi / n as f64;
        (1..n).all(|i| {
            let c = i as f64 * h;
            let second = self.prob_below(c + h) - 2.0 * self.prob_below(c) + self.prob_below(c - h);
            second <= 1e-10
        })
    }
}

impl FromStr for CostDistribution {
    type Err = Error;

    /// Accepts `uniform`, `uniform:T=<x>`, `power:alpha=<a>[,T=<x>]`,
    /// `table:<path>`.
    fn from_str(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (head, rest) = match spec.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (spec, None),
        };
        match head {
            "uniform" => {
                let opts = parse_opts(rest.unwrap_or(""))?;
                let mut upper = 1.0;
                for (k, v) in opts {
                    match k.as_str() {
                        "T" => upper = v,
                        other => {
                            return Err(Error::Spec(format!("unknown uniform option '{other}'")))
                        }
                    }
                }
                Self::uniform_on(upper)
            }
            "power" => {
                let opts = parse_opts(rest.unwrap_or(""))?;
                let mut alpha = None;
                let mut upper = 1.0;
                for (k, v) in opts {
                    match k.as_str() {
                        "alpha" => alpha = Some(v),
                        "T" => upper = v,
                        other => {
                            return Err(Error::Spec(format!("unknown power option '{other}'")))
                        }
                    }
                }
                let alpha = alpha.ok_or_else(|| Error::Spec("power needs alpha=<value>".into()))?;
                Self::power_on(alpha, upper)
            }
            "table" => match rest {
                Some(path) if !path.is_empty() => Self::from_table_csv(path),
                _ => Err(Error::Spec("table needs a path: table:<path>".into())),
            },
            other => Err(Error::Spec(format!("unknown distribution '{other}'"))),
        }
    }
}

fn parse_opts(s: &str) -> Result<Vec<(String, f64)>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::Spec(format!("expected key=value, got '{p}'")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Spec(format!("bad number in '{p}'")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn check_upper(upper: f64) -> Result<()> {
    if !(upper > 0.0 && upper.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "support bound must be positive and finite, got {upper}"
        )));
    }
    Ok(())
}

fn segment(knots: &[(f64, f64)], c: f64) -> usize {
    let idx = knots.partition_point(|k| k.0 <= c);
    idx.saturating_sub(1).min(knots.len() - 2)
}

fn table_cdf(knots: &[(f64, f64)], c: f64) -> f64 {
    let i = segment(knots, c);
    let (c0, p0) = knots[i];
    let (c1, p1) = knots[i + 1];
    p0 + (p1 - p0) * (c - c0) / (c1 - c0)
}
