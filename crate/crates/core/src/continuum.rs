//! Continuum staking-pool formation game: threshold equilibrium, inverse
//! reward split, security and welfare objectives.
//!
//! Honest agents (measure `H`) with cost below the threshold `c*` run a pool,
//! the rest delegate. Malicious agents (measure `M`) always run a pool at zero
//! cost. The indifference condition at the threshold is
//!
//! ```text
//! c* = λR / (F(c*)H + M) - (1 - λ)R / ((1 - F(c*))H)
//! ```
//!
//! whose right-hand side is decreasing in `c*`, so the root is unique when
//! it exists (`λ > M / (H + M)`).

use serde::Serialize;

use crate::distributions::CostDistribution;
use crate::error::{Error, Result};
use crate::numeric::{bisect_decreasing, expand_upper, golden_section_max, linspace};

/// Absolute band around `M/(H+M)` treated as the all-delegate boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;

const MAX_DOUBLINGS: usize = 64;

/// The tuple `(H, M, R, λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GameParams {
    /// Measure of honest agents.
    pub honest: f64,
    /// Measure of malicious agents.
    pub malicious: f64,
    /// Block reward.
    pub reward: f64,
    /// Share of a pool's reward kept by its owner.
    pub lambda: f64,
}

impl GameParams {
    pub fn new(honest: f64, malicious: f64, reward: f64, lambda: f64) -> Result<Self> {
        let p = Self {
            honest,
            malicious,
            reward,
            lambda,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let Self {
            honest: h,
            malicious: m,
            reward: r,
            lambda: l,
        } = *self;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParams(format!("H must be positive, got {h}")));
        }
        if !(m.is_finite() && m >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "M must be nonnegative, got {m}"
            )));
        }
        if h <= m {
            return Err(Error::InvalidParams(format!(
                "honest agents must be the majority: H={h} <= M={m}"
            )));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidParams(format!("R must be positive, got {r}")));
        }
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::InvalidParams(format!(
                "lambda must lie in [0, 1], got {l}"
            )));
        }
        Ok(())
    }

    /// Same game with a different reward split.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.honest, self.malicious, self.reward, lambda)
    }

    /// Existence bound `M / (H + M)`.
    pub fn lambda_bound(&self) -> f64 {
        self.malicious / (self.honest + self.malicious)
    }
}

/// Where the equilibrium sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Corner {
    /// Unique `c* ∈ (0, T)` solving the indifference equation.
    Interior,
    /// `λ = M/(H+M)`: every honest agent delegates, `c* = 0`.
    AllDelegate,
    /// `λ < M/(H+M)`: no honest agent runs a pool.
    NoInterior,
    /// Indifference gap still positive at `T`: every honest agent runs a pool.
    FullParticipation,
}

/// Threshold plus the measures it induces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub cstar: f64,
    /// Measure of honest pool owners.
    pub pools: f64,
    /// Measure of honest delegators.
    pub delegators: f64,
    /// Measure of idle honest agents.
    pub idle: f64,
    /// Delegated stake per pool.
    pub stake_per_pool: f64,
    /// Expected reward per pool.
    pub pool_reward: f64,
    /// Share of pools run by honest agents, `P / (P + M)`.
    pub security: f64,
    pub corner: Corner,
}

/// Outcome of a design computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignResult {
    pub lambda: f64,
    pub cstar: f64,
    /// Value of the optimized objective at the design.
    pub objective: f64,
    pub kind: DesignKind,
    /// Set when the optimum came from a grid search rather than a
    /// concavity-backed method.
    pub heuristic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DesignKind {
    /// Optimum strictly inside the admissible range.
    Interior,
    /// Optimum at the support bound `c* = T`.
    SupportCorner,
    /// Optimum at an endpoint of the admissible λ-interval.
    Endpoint,
    /// No delegating equilibrium exists; non-owners stay idle.
    AllIdle,
}

/// `λR/(F(c)H+M) - (1-λ)R/((1-F(c))H) - c`, the indifference gap.
///
/// Positive gap means an agent with cost `c` strictly prefers running a pool.
pub fn indifference_gap(c: f64, params: &GameParams, dist: &CostDistribution) -> f64 {
    owner_minus_delegator(c, params, dist) - c
}

/// Pool-owner reward minus delegator reward at threshold `c`.
pub(crate) fn owner_minus_delegator(c: f64, params: &GameParams, dist: &CostDistribution) -> f64 {
    let f = dist.prob_below(c);
    let GameParams {
        honest: h,
        malicious: m,
        reward: r,
        lambda: l,
    } = *params;
    let owner = if l == 0.0 { 0.0 } else { l * r / (f * h + m) };
    let delegator = if l == 1.0 {
        0.0
    } else {
        (1.0 - l) * r / ((1.0 - f) * h)
    };
    owner - delegator
}

/// Classifies λ against the existence bound.
pub fn classify_lambda(params: &GameParams) -> Corner {
    let bound = params.lambda_bound();
    if params.lambda > bound + BOUNDARY_TOL {
        Corner::Interior
    } else if params.lambda >= bound - BOUNDARY_TOL {
        Corner::AllDelegate
    } else {
        Corner::NoInterior
    }
}

/// Root of a nonincreasing `gap` on `[0, T]`, doubling the probe when `T = ∞`.
///
/// Returns `(root, hit_upper)`; `hit_upper` is set when the gap is still
/// positive at a finite `T`.
pub(crate) fn decreasing_root<G>(gap: G, dist: &CostDistribution, scale: f64) -> Result<(f64, bool)>
where
    G: Fn(f64) -> f64,
{
    let hi = if dist.is_bounded() {
        let t = dist.support_upper();
        if gap(t) >= 0.0 {
            return Ok((t, true));
        }
        t
    } else {
        expand_upper(&gap, 1.0, MAX_DOUBLINGS)?
    };
    let root = bisect_decreasing(&gap, 0.0, hi, 0.0, 1e-10 * scale)?;
    Ok((root, false))
}

/// Unique threshold equilibrium of the game.
pub fn solve_threshold_equilibrium(
    params: &GameParams,
    dist: &CostDistribution,
) -> Result<EquilibriumResult> {
    params.validate()?;
    match classify_lambda(params) {
        Corner::Interior => {
            let (cstar, full) =
                decreasing_root(|c| indifference_gap(c, params, dist), dist, params.reward)?;
            let corner = if full {
                Corner::FullParticipation
            } else {
                Corner::Interior
            };
            Ok(summary_with(cstar, params, dist, corner))
        }
        corner => Ok(summary_with(0.0, params, dist, corner)),
    }
}

/// Inverse map `λ(c*)` of the equilibrium.
pub fn lambda_from_cstar(cstar: f64, params: &GameParams, dist: &CostDistribution) -> Result<f64> {
    params.validate()?;
    if cstar.is_nan() || cstar < 0.0 {
        return Err(Error::Domain(format!(
            "c* must be nonnegative, got {cstar}"
        )));
    }
    let f = dist.prob_below(cstar);
    if cstar >= dist.support_upper() || f >= 1.0 {
        return Err(Error::Domain(format!(
            "c*={cstar} at or beyond the support bound: no delegators remain"
        )));
    }
    let GameParams {
        honest: h,
        malicious: m,
        reward: r,
        ..
    } = *params;
    let to_delegators = r / ((1.0 - f) * h);
    let to_owner = r / (f * h + m);
    if to_owner.is_infinite() {
        // c* = 0 with M = 0.
        return Ok(0.0);
    }
    Ok((cstar + to_delegators) / (to_owner + to_delegators))
}

/// Equilibrium at `λ = 1`, which maximizes the measure of honest pools.
pub fn security_max_cstar(
    params: &GameParams,
    dist: &CostDistribution,
) -> Result<EquilibriumResult> {
    solve_threshold_equilibrium(&params.with_lambda(1.0)?, dist)
}

/// Social welfare `W = P/(P+M)·H - P·E[X | X < c*]`.
pub fn welfare(cstar: f64, params: &GameParams, dist: &CostDistribution) -> f64 {
    let h = params.honest;
    let m = params.malicious;
    let p = dist.prob_below(cstar) * h;
    if p <= 0.0 {
        return 0.0;
    }
    // P·E[X | X < c*] = H ∫_0^{c*} x f(x) dx
    p / (p + m) * h - h * dist.partial_expectation(cstar)
}

/// Sign-carrying factor of `W'(c) = f(c)·(H²M/(F(c)H+M)² - Hc)`.
pub fn welfare_slope_factor(c: f64, params: &GameParams, dist: &CostDistribution) -> f64 {
    let h = params.honest;
    let m = params.malicious;
    let denom = dist.prob_below(c) * h + m;
    h * h * m / (denom * denom) - h * c
}

/// Welfare-maximizing threshold and the split that implements it.
///
/// For a concave CDF the maximizer is the root of the (decreasing) slope
/// factor, or `T` when `HM >= (H+M)²T`. Otherwise a 10⁴-point grid search
/// with golden-section refinement is used and the result is flagged
/// heuristic.
pub fn welfare_optimal_cstar(params: &GameParams, dist: &CostDistribution) -> Result<DesignResult> {
    params.validate()?;
    let h = params.honest;
    let m = params.malicious;
    if m <= 0.0 {
        return Err(Error::InvalidParams(
            "welfare optimum needs M > 0 (W jumps at c*=0 otherwise)".into(),
        ));
    }
    let t = dist.support_upper();
    let (cstar, kind, heuristic) = if dist.has_concave_cdf() {
        if dist.is_bounded() && h * m >= (h + m) * (h + m) * t {
            (t, DesignKind::SupportCorner, false)
        } else {
            // The factor is negative beyond H/M, which bounds the search.
            let hi = if dist.is_bounded() {
                t.min(h / m)
            } else {
                h / m
            };
            let gap = |c: f64| welfare_slope_factor(c, params, dist);
            let c = if gap(hi) >= 0.0 {
                hi
            } else {
                bisect_decreasing(gap, 0.0, hi, 1e-15, 0.0)?
            };
            (c, DesignKind::Interior, false)
        }
    } else {
        let hi = if dist.is_bounded() { t } else { h / m };
        let grid = linspace(0.0, hi, 10_001);
        let w = |c: f64| welfare(c, params, dist);
        let best = grid
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| w(a.1).total_cmp(&w(b.1)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let a = grid[best.saturating_sub(1)];
        let b = grid[(best + 1).min(grid.len() - 1)];
        let (c, _) = golden_section_max(w, a, b, 1e-12);
        let kind = if dist.is_bounded() && c >= t * (1.0 - 1e-9) {
            DesignKind::SupportCorner
        } else {
            DesignKind::Interior
        };
        (c, kind, true)
    };
    let lambda = if cstar >= t || dist.prob_below(cstar) >= 1.0 {
        // λ(c*) → 1 as c* → T.
        1.0
    } else {
        lambda_from_cstar(cstar, params, dist)?
    };
    Ok(DesignResult {
        lambda,
        cstar,
        objective: welfare(cstar, params, dist),
        kind,
        heuristic,
    })
}

/// Fills `P, D, I, s, r` and security for a given threshold.
pub fn equilibrium_summary(
    cstar: f64,
    params: &GameParams,
    dist: &CostDistribution,
) -> EquilibriumResult {
    let corner = if cstar <= 0.0 {
        classify_lambda(params)
    } else if cstar >= dist.support_upper() {
        Corner::FullParticipation
    } else {
        Corner::Interior
    };
    summary_with(cstar, params, dist, corner)
}

fn summary_with(
    cstar: f64,
    params: &GameParams,
    dist: &CostDistribution,
    corner: Corner,
) -> EquilibriumResult {
    let h = params.honest;
    let m = params.malicious;
    let pools = dist.prob_below(cstar) * h;
    let idle = 0.0;
    let delegators = h - pools - idle;
    let active = pools + m;
    let (stake_per_pool, pool_reward, security) = if active > 0.0 {
        (delegators / active, params.reward / active, pools / active)
    } else {
        (0.0, 0.0, 0.0)
    };
    EquilibriumResult {
        cstar,
        pools,
        delegators,
        idle,
        stake_per_pool,
        pool_reward,
        security,
        corner,
    }
}
