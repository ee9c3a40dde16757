//! Variants of the base game: costly delegation (with an idle option),
//! endogenous rewards tied to a security target, and competition over the
//! delegator return.

use serde::Serialize;

use crate::continuum::{
    decreasing_root, lambda_from_cstar, owner_minus_delegator, security_max_cstar,
    solve_threshold_equilibrium, DesignKind, DesignResult, EquilibriumResult, GameParams,
    BOUNDARY_TOL,
};
use crate::distributions::CostDistribution;
use crate::error::{Error, Result};
use crate::numeric::{bisect_decreasing, linspace};

const COSTLY_GRID: usize = 2001;

/// Base game plus a cost `c_d` paid by every delegator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostlyDelegationParams {
    pub base: GameParams,
    pub c_d: f64,
}

impl CostlyDelegationParams {
    pub fn new(base: GameParams, c_d: f64) -> Result<Self> {
        base.validate()?;
        if !(c_d.is_finite() && c_d >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "delegation cost must be nonnegative, got {c_d}"
            )));
        }
        Ok(Self { base, c_d })
    }

    /// `(MR - c_d·M·H) / (HR + MR)`: above it the costly game has an interior threshold.
    pub fn lambda_lower_bound(&self) -> f64 {
        let GameParams {
            honest: h,
            malicious: m,
            reward: r,
            ..
        } = self.base;
        (m * r - self.c_d * m * h) / (h * r + m * r)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.base.with_lambda(lambda)?, self.c_d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CostlyRegime {
    /// Agents below `c*` run pools, the rest delegate and pay `c_d`.
    Delegating,
    /// `λ` at or below the lower bound and delegating pays: `c* = 0`.
    AllDelegate,
    /// Delegating does not cover `c_d`: agents below `c'` run pools, the rest stay idle.
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostlyOutcome {
    /// Threshold of the selected regime (`c*` or `c'`).
    pub cstar: f64,
    pub regime: CostlyRegime,
    /// Threshold of the base game at the same λ.
    pub base_cstar: f64,
    /// Root of the costly indifference equation, when λ is above the lower bound.
    pub delegating_cstar: Option<f64>,
    pub lambda_lower_bound: f64,
    /// Pools run by honest agents and the resulting security.
    pub pools: f64,
    pub security: f64,
}

fn costly_gap(c: f64, p: &CostlyDelegationParams, dist: &CostDistribution) -> f64 {
    owner_minus_delegator(c, &p.base, dist) + p.c_d - c
}

/// Root of `c = λR/(F(c)H+M) - (1-λ)R/((1-F(c))H) + c_d`, or `None` at or below the lower bound.
pub fn costly_threshold(
    p: &CostlyDelegationParams,
    dist: &CostDistribution,
) -> Result<Option<f64>> {
    if p.base.lambda <= p.lambda_lower_bound() + BOUNDARY_TOL {
        return Ok(None);
    }
    let scale = p.base.reward.max(p.c_d);
    let (root, _) = decreasing_root(|c| costly_gap(c, p, dist), dist, scale)?;
    Ok(Some(root))
}

fn idle_root(lambda: f64, base: &GameParams, dist: &CostDistribution) -> Result<f64> {
    if lambda <= 0.0 {
        return Ok(0.0);
    }
    let GameParams {
        honest: h,
        malicious: m,
        reward: r,
        ..
    } = *base;
    let gap = |c: f64| lambda * r / (dist.prob_below(c) * h + m) - c;
    Ok(decreasing_root(gap, dist, r)?.0)
}

/// Delegators cover their cost: `(1-λ)R / ((1-F(c*))H) >= c_d`.
pub fn delegation_participation_check(
    cstar: f64,
    p: &CostlyDelegationParams,
    dist: &CostDistribution,
) -> bool {
    if p.c_d <= 0.0 {
        return true;
    }
    let GameParams {
        honest: h,
        reward: r,
        lambda: l,
        ..
    } = p.base;
    let f = dist.prob_below(cstar);
    if f >= 1.0 {
        // Nobody is left to delegate.
        return l < 1.0;
    }
    (1.0 - l) * r / ((1.0 - f) * h) >= p.c_d
}

/// Equilibrium of the game with delegation cost, selecting the regime from λ.
///
/// Fails with [`Error::Numeric`] if a positive `c_d` does not raise an
/// interior threshold above the base game's.
pub fn solve_costly_delegation(
    p: &CostlyDelegationParams,
    dist: &CostDistribution,
) -> Result<CostlyOutcome> {
    p.base.validate()?;
    let base = solve_threshold_equilibrium(&p.base, dist)?;
    let lower = p.lambda_lower_bound();
    let delegating = if p.c_d == 0.0 {
        // Same equation as the base game.
        (p.base.lambda > lower + BOUNDARY_TOL).then_some(base.cstar)
    } else {
        costly_threshold(p, dist)?
    };
    let candidate = delegating.unwrap_or(0.0);
    let (cstar, regime) = if delegation_participation_check(candidate, p, dist) {
        let regime = if delegating.is_some() {
            CostlyRegime::Delegating
        } else {
            CostlyRegime::AllDelegate
        };
        (candidate, regime)
    } else {
        (idle_root(p.base.lambda, &p.base, dist)?, CostlyRegime::Idle)
    };
    if regime == CostlyRegime::Delegating
        && p.c_d > 0.0
        && cstar < dist.support_upper()
        && cstar <= base.cstar
    {
        return Err(Error::Numeric(format!(
            "costly threshold {cstar} does not exceed the base threshold {}",
            base.cstar
        )));
    }
    let pools = dist.prob_below(cstar) * p.base.honest;
    let active = pools + p.base.malicious;
    Ok(CostlyOutcome {
        cstar,
        regime,
        base_cstar: base.cstar,
        delegating_cstar: delegating,
        lambda_lower_bound: lower,
        pools,
        security: if active > 0.0 { pools / active } else { 0.0 },
    })
}

/// Threshold `c'` solving `λR/(F(c')H+M) = c'` when non-owners stay idle.
///
/// Only defined for `λ ∈ [(MR - c_d·M·H)/(HR+MR), M/(H+M)]`.
pub fn idle_pool_threshold(p: &CostlyDelegationParams, dist: &CostDistribution) -> Result<f64> {
    p.base.validate()?;
    let lo = p.lambda_lower_bound();
    let hi = p.base.lambda_bound();
    let l = p.base.lambda;
    if l < lo - BOUNDARY_TOL || l > hi + BOUNDARY_TOL {
        return Err(Error::Domain(format!(
            "lambda={l} outside the idle regime [{lo}, {hi}]; use solve_costly_delegation"
        )));
    }
    idle_root(l, &p.base, dist)
}

/// Largest honest-pool threshold reachable while delegators still cover `c_d`.
///
/// The costly threshold increases with λ, so the optimum is the largest λ
/// whose equilibrium passes the participation check. A grid locates the
/// feasible region and bisection refines its upper edge. When no λ works the
/// result is the all-idle outcome at `λ = 1`.
pub fn max_security_costly(
    p: &CostlyDelegationParams,
    dist: &CostDistribution,
) -> Result<DesignResult> {
    p.base.validate()?;
    if p.c_d.is_nan() || p.c_d <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "max_security_costly needs c_d > 0, got {}",
            p.c_d
        )));
    }
    let benchmark = security_max_cstar(&p.base, dist)?;
    let eval = |l: f64| -> Result<Option<f64>> {
        let q = p.with_lambda(l)?;
        match costly_threshold(&q, dist)? {
            Some(c) if c < dist.support_upper() && delegation_participation_check(c, &q, dist) => {
                Ok(Some(c))
            }
            _ => Ok(None),
        }
    };
    let start = p.lambda_lower_bound().max(0.0);
    let grid = linspace(start, 1.0, COSTLY_GRID);
    let mut best: Option<(usize, f64)> = None;
    for (i, &l) in grid.iter().enumerate().rev() {
        if let Some(c) = eval(l)? {
            best = Some((i, c));
            break;
        }
    }
    let Some((i, _)) = best else {
        let cstar = idle_root(1.0, &p.base, dist)?;
        let pools = dist.prob_below(cstar) * p.base.honest;
        return Ok(DesignResult {
            lambda: 1.0,
            cstar,
            objective: pools / (pools + p.base.malicious),
            kind: DesignKind::AllIdle,
            heuristic: false,
        });
    };
    let mut lambda = grid[i];
    if i + 1 < grid.len() {
        let (mut ok, mut bad) = (grid[i], grid[i + 1]);
        for _ in 0..200 {
            let mid = 0.5 * (ok + bad);
            if mid <= ok || mid >= bad {
                break;
            }
            if eval(mid)?.is_some() {
                ok = mid;
            } else {
                bad = mid;
            }
        }
        lambda = ok;
    }
    let cstar = eval(lambda)?.ok_or_else(|| Error::Numeric("lost feasibility".into()))?;
    if cstar > benchmark.cstar {
        return Err(Error::Numeric(format!(
            "costly optimum {cstar} exceeds the benchmark threshold {}",
            benchmark.cstar
        )));
    }
    let pools = dist.prob_below(cstar) * p.base.honest;
    Ok(DesignResult {
        lambda,
        cstar,
        objective: pools / (pools + p.base.malicious),
        kind: if lambda < 1.0 {
            DesignKind::Interior
        } else {
            DesignKind::Endpoint
        },
        heuristic: false,
    })
}

/// Base game plus a fault tolerance `θ`: rewards are paid only while the
/// honest share of pools reaches `1 - θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndogenousParams {
    pub base: GameParams,
    pub theta: f64,
}

impl EndogenousParams {
    pub fn new(base: GameParams, theta: f64) -> Result<Self> {
        base.validate()?;
        if !(0.0..=0.5).contains(&theta) {
            return Err(Error::InvalidParams(format!(
                "theta must lie in [0, 1/2], got {theta}"
            )));
        }
        Ok(Self { base, theta })
    }
}

/// Smallest `c` with `F(c)H/(F(c)H+M) >= 1 - θ`.
pub fn endogenous_threshold_cost(p: &EndogenousParams, dist: &CostDistribution) -> Result<f64> {
    p.base.validate()?;
    let GameParams {
        honest: h,
        malicious: m,
        ..
    } = p.base;
    if m == 0.0 {
        return Ok(0.0);
    }
    if p.theta <= 0.0 {
        return Err(Error::Infeasible(
            "theta = 0 tolerates no malicious pools".into(),
        ));
    }
    let target = (1.0 - p.theta) * m / (p.theta * h);
    if target >= 1.0 - BOUNDARY_TOL {
        return Err(Error::Infeasible(format!(
            "security 1-theta={} unreachable: needs F(c) >= {target}, H/(H+M)={}",
            1.0 - p.theta,
            h / (h + m)
        )));
    }
    let c = dist.quantile(target);
    // quantile may land a hair below the target on flat or tabulated CDFs
    if dist.prob_below(c) >= target {
        Ok(c)
    } else {
        let hi = if dist.is_bounded() {
            dist.support_upper()
        } else {
            2.0 * c.max(1.0)
        };
        Ok(
            bisect_decreasing(|x| target - dist.prob_below(x), c, hi, 1e-15, 0.0).map(|x| {
                if dist.prob_below(x) >= target {
                    x
                } else {
                    x.next_up()
                }
            })?,
        )
    }
}

/// `λ_min = [(c^θ/R)(F(c^θ)H+M)(1-F(c^θ))H + F(c^θ)H + M] / (H+M)`.
///
/// For λ above it the equilibrium threshold exceeds `c^θ`.
pub fn endogenous_lambda_bound(p: &EndogenousParams, dist: &CostDistribution) -> Result<f64> {
    let c = endogenous_threshold_cost(p, dist)?;
    let GameParams {
        honest: h,
        malicious: m,
        reward: r,
        ..
    } = p.base;
    let f = dist.prob_below(c);
    let lambda = ((c / r) * (f * h + m) * (1.0 - f) * h + f * h + m) / (h + m);
    if lambda > 1.0 {
        return Err(Error::Infeasible(format!(
            "lambda_min = {lambda} > 1: no split reaches security {}",
            1.0 - p.theta
        )));
    }
    Ok(lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndogenousOutcome {
    pub equilibrium: EquilibriumResult,
    pub threshold_cost: f64,
    /// `min(1, security + θ)`.
    pub coverage: f64,
    /// Security reaches `1 - θ`, so the reward is paid.
    pub reward_paid: bool,
}

/// Equilibrium at the configured λ and whether it meets the security target.
pub fn endogenous_security(
    p: &EndogenousParams,
    dist: &CostDistribution,
) -> Result<EndogenousOutcome> {
    let threshold_cost = endogenous_threshold_cost(p, dist)?;
    let equilibrium = solve_threshold_equilibrium(&p.base, dist)?;
    let coverage = (equilibrium.security + p.theta).min(1.0);
    Ok(EndogenousOutcome {
        equilibrium,
        threshold_cost,
        coverage,
        reward_paid: equilibrium.security >= 1.0 - p.theta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CompetitionRegime {
    /// Pools undercut each other until only malicious pools remain.
    Disrupted,
    /// A binding floor on λ pins the split; the outcome is the fixed-λ game.
    FixedEquivalent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompetitionOutcome {
    pub regime: CompetitionRegime,
    pub effective_lambda: f64,
    /// `None` when disrupted.
    pub equilibrium: Option<EquilibriumResult>,
}

/// Outcome when pool owners choose their own λ, optionally bounded below.
pub fn classify_return_competition(
    params: &GameParams,
    dist: &CostDistribution,
    lambda_floor: Option<f64>,
) -> Result<CompetitionOutcome> {
    params.validate()?;
    let bound = params.lambda_bound();
    match lambda_floor {
        Some(floor) if !(0.0..=1.0).contains(&floor) => Err(Error::InvalidParams(format!(
            "lambda floor must lie in [0, 1], got {floor}"
        ))),
        Some(floor) if floor > bound + BOUNDARY_TOL => {
            let eq = solve_threshold_equilibrium(&params.with_lambda(floor)?, dist)?;
            Ok(CompetitionOutcome {
                regime: CompetitionRegime::FixedEquivalent,
                effective_lambda: floor,
                equilibrium: Some(eq),
            })
        }
        floor => Ok(CompetitionOutcome {
            regime: CompetitionRegime::Disrupted,
            effective_lambda: floor.unwrap_or(0.0),
            equilibrium: None,
        }),
    }
}

/// Inverse map at `c^θ`; equals [`endogenous_lambda_bound`] algebraically.
pub fn lambda_at_threshold_cost(p: &EndogenousParams, dist: &CostDistribution) -> Result<f64> {
    let c = endogenous_threshold_cost(p, dist)?;
    lambda_from_cstar(c, &p.base, dist)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(m: f64, lambda: f64) -> GameParams {
        GameParams::new(1.0, m, 1.0, lambda).unwrap()
    }

    fn costly(m: f64, lambda: f64, c_d: f64) -> CostlyDelegationParams {
        CostlyDelegationParams::new(base(m, lambda), c_d).unwrap()
    }

    /// Plain bisection on the costly equation, uniform costs on [0, 1].
    fn costly_oracle(h: f64, m: f64, r: f64, l: f64, cd: f64) -> f64 {
        let g = |c: f64| l * r / (c * h + m) - (1.0 - l) * r / ((1.0 - c) * h) + cd - c;
        let (mut a, mut b) = (0.0, 1.0 - 1e-15);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if g(mid) > 0.0 {
                a = mid
            } else {
                b = mid
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn lower_bound_example() {
        assert!((costly(0.5, 1.0, 0.1).lambda_lower_bound() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn zero_cost_reduces_to_base_game() {
        let u = CostDistribution::uniform();
        for l in [0.5, 0.8, 0.9, 1.0] {
            let out = solve_costly_delegation(&costly(0.5, l, 0.0), &u).unwrap();
            let base = solve_threshold_equilibrium(&base(0.5, l), &u).unwrap();
            assert_eq!(out.cstar, base.cstar);
            assert_eq!(out.regime, CostlyRegime::Delegating);
        }
    }

    #[test]
    fn costly_threshold_exceeds_base() {
        let u = CostDistribution::uniform();
        let out = solve_costly_delegation(&costly(0.5, 0.9, 0.05), &u).unwrap();
        assert_eq!(out.regime, CostlyRegime::Delegating);
        assert!(out.cstar > 0.5865);
        assert!((out.cstar - costly_oracle(1.0, 0.5, 1.0, 0.9, 0.05)).abs() < 1e-9);
        assert!((out.cstar - 0.607653).abs() < 1e-6);
    }

    #[test]
    fn idle_threshold_examples() {
        let u = CostDistribution::uniform();
        let c = idle_pool_threshold(&costly(0.5, 1.0 / 3.0, 0.1), &u).unwrap();
        // c'^2 + 0.5c' - 1/3 = 0
        let oracle = (-0.5 + (0.25f64 + 4.0 / 3.0).sqrt()) / 2.0;
        assert!((c - oracle).abs() < 1e-9);
        assert!((c - 0.379153).abs() < 1e-6);
        let tiny = idle_pool_threshold(&costly(0.5, 1e-9, 1.0), &u).unwrap();
        assert!(tiny < 1e-8);
        assert!(matches!(
            idle_pool_threshold(&costly(0.5, 0.9, 0.1), &u),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn idle_equation_has_single_sign_change() {
        let u = CostDistribution::uniform();
        let l = 0.3;
        let g = |c: f64| l / (c + 0.5) - c;
        let grid = linspace(0.0, 1.0, 10_001);
        let changes = grid
            .windows(2)
            .filter(|w| (g(w[0]) > 0.0) != (g(w[1]) > 0.0))
            .count();
        assert_eq!(changes, 1);
        let c = idle_pool_threshold(&costly(0.5, l, 0.2), &u).unwrap();
        assert!(g(c).abs() < 1e-9);
    }

    #[test]
    fn idle_ordering_matches_participation() {
        let u = CostDistribution::uniform();
        // c' < c*_d exactly when delegating at c' fails to cover c_d.
        for (l, cd) in [(0.32, 0.1), (0.32, 0.4), (1.0 / 3.0, 0.2), (1.0 / 3.0, 1.0)] {
            let p = costly(0.5, l, cd);
            let idle = idle_pool_threshold(&p, &u).unwrap();
            let del = costly_threshold(&p, &u).unwrap().unwrap();
            let fails = !delegation_participation_check(idle, &p, &u);
            assert_eq!(idle < del, fails, "l={l} cd={cd}");
        }
    }

    #[test]
    fn participation_examples() {
        let u = CostDistribution::uniform();
        assert!(delegation_participation_check(
            0.46116,
            &costly(0.5, 0.8, 0.3),
            &u
        ));
        assert!(!delegation_participation_check(
            0.46116,
            &costly(0.5, 0.8, 0.372),
            &u
        ));
        assert!(delegation_participation_check(
            0.9,
            &costly(0.5, 0.1, 0.0),
            &u
        ));
        assert!(!delegation_participation_check(
            0.5,
            &costly(0.5, 1.0, 1e-6),
            &u
        ));
    }

    #[test]
    fn idle_regime_selected_when_delegation_does_not_pay() {
        let u = CostDistribution::uniform();
        let out = solve_costly_delegation(&costly(0.5, 0.9, 0.5), &u).unwrap();
        assert_eq!(out.regime, CostlyRegime::Idle);
        assert!((out.cstar - idle_root(0.9, &base(0.5, 0.9), &u).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn max_security_costly_examples() {
        let u = CostDistribution::uniform();
        let d = max_security_costly(&costly(0.5, 1.0, 0.1), &u).unwrap();
        assert!(d.cstar < 0.780776);
        // At the optimum delegators exactly cover c_d: c* = 1 - (1-λ)/c_d.
        assert!((d.cstar - (1.0 - (1.0 - d.lambda) / 0.1)).abs() < 1e-7);
        assert!((d.lambda - 0.976952).abs() < 1e-5);
        let tiny = max_security_costly(&costly(0.5, 1.0, 1e-6), &u).unwrap();
        assert!((tiny.cstar - 0.780776).abs() < 1e-4);
        let idle = max_security_costly(&costly(0.5, 1.0, 1.5), &u).unwrap();
        assert_eq!(idle.kind, DesignKind::AllIdle);
    }

    #[test]
    fn endogenous_examples() {
        let u = CostDistribution::uniform();
        let p = EndogenousParams::new(base(0.4, 1.0), 1.0 / 3.0).unwrap();
        let c = endogenous_threshold_cost(&p, &u).unwrap();
        assert!((c - 0.8).abs() < 1e-12);
        let l = endogenous_lambda_bound(&p, &u).unwrap();
        assert!((l - (0.8 * 1.2 * 0.2 + 1.2) / 1.4).abs() < 1e-12);
        assert!((l - lambda_at_threshold_cost(&p, &u).unwrap()).abs() < 1e-12);
        let half = EndogenousParams::new(base(0.4, 1.0), 0.5).unwrap();
        assert!((endogenous_threshold_cost(&half, &u).unwrap() - 0.4).abs() < 1e-12);
        let hard = EndogenousParams::new(base(0.5, 1.0), 1.0 / 3.0).unwrap();
        assert!(matches!(
            endogenous_threshold_cost(&hard, &u),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn endogenous_bound_straddles_threshold() {
        let u = CostDistribution::uniform();
        let p = EndogenousParams::new(base(0.4, 1.0), 1.0 / 3.0).unwrap();
        let l = endogenous_lambda_bound(&p, &u).unwrap();
        let above = solve_threshold_equilibrium(&base(0.4, l + 1e-3), &u).unwrap();
        let below = solve_threshold_equilibrium(&base(0.4, l - 1e-3), &u).unwrap();
        assert!(above.cstar > 0.8 && below.cstar < 0.8);
    }

    #[test]
    fn coverage_is_capped() {
        let u = CostDistribution::uniform();
        let p = EndogenousParams::new(base(0.4, 1.0), 1.0 / 3.0).unwrap();
        let out = endogenous_security(&p, &u).unwrap();
        assert!(out.reward_paid);
        assert_eq!(out.coverage, 1.0);
        let low = EndogenousParams::new(base(0.4, 0.9), 1.0 / 3.0).unwrap();
        let out = endogenous_security(&low, &u).unwrap();
        assert!(!out.reward_paid);
        assert!(out.coverage < 1.0);
    }

    #[test]
    fn competition_examples() {
        let u = CostDistribution::uniform();
        let p = base(0.5, 1.0);
        let none = classify_return_competition(&p, &u, None).unwrap();
        assert_eq!(none.regime, CompetitionRegime::Disrupted);
        let at = classify_return_competition(&p, &u, Some(1.0 / 3.0)).unwrap();
        assert_eq!(at.regime, CompetitionRegime::Disrupted);
        let fixed = classify_return_competition(&p, &u, Some(0.8)).unwrap();
        assert_eq!(fixed.regime, CompetitionRegime::FixedEquivalent);
        let eq = fixed.equilibrium.unwrap();
        assert!((eq.cstar - 0.46116).abs() < 1e-5);
        assert_eq!(
            eq,
            solve_threshold_equilibrium(&base(0.5, 0.8), &u).unwrap()
        );
    }
}
