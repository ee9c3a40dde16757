//! Share of rewards captured by malicious pools, `μ(λ) = Mλ / (F(c*(λ))H + M)`,
//! its shape over `[M/(H+M), 1]` and the endpoint rule for minimizing it.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::continuum::{
    solve_threshold_equilibrium, welfare, Corner, DesignKind, DesignResult, GameParams,
    BOUNDARY_TOL,
};
use crate::distributions::CostDistribution;
use crate::error::{Error, Result};
use crate::numeric::linspace;

const SHAPE_POINTS: usize = 1000;

/// Shape of `μ` along an ascending λ-grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Shape {
    Increasing,
    IncreasingThenDecreasing,
    /// Only the decreasing tail of the unimodal pattern.
    Decreasing,
    /// Any other sign pattern; the count is the number of sign changes.
    Irregular {
        sign_changes: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub cstar: f64,
    pub pools: f64,
    pub mu: f64,
    pub security: f64,
    pub welfare: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardShareCurve {
    pub rows: Vec<SweepRow>,
    pub shape: Shape,
    /// Row with the smallest μ.
    pub minimizer: Option<SweepRow>,
}

impl RewardShareCurve {
    pub const CSV_HEADER: &'static str = "lambda,cstar,P,mu,security,welfare";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                r.lambda, r.cstar, r.pools, r.mu, r.security, r.welfare
            );
        }
        out
    }
}

/// λ values to sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Points(Vec<f64>),
    Linspace { start: f64, end: f64, count: usize },
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        match self {
            GridSpec::Points(p) => p.clone(),
            GridSpec::Linspace { start, end, count } => linspace(*start, *end, *count),
        }
    }
}

fn check_lambda_range(lambda: f64, params: &GameParams) -> Result<()> {
    let bound = params.lambda_bound();
    if !(lambda >= bound - BOUNDARY_TOL && lambda <= 1.0) {
        return Err(Error::Domain(format!(
            "lambda={lambda} outside [M/(H+M), 1] = [{bound}, 1]"
        )));
    }
    Ok(())
}

fn share_at(lambda: f64, params: &GameParams, dist: &CostDistribution) -> Result<SweepRow> {
    check_lambda_range(lambda, params)?;
    let p = params.with_lambda(lambda.max(0.0))?;
    let eq = solve_threshold_equilibrium(&p, dist)?;
    let m = p.malicious;
    let mu = if eq.corner == Corner::Interior || eq.corner == Corner::FullParticipation {
        m * lambda / (eq.pools + m)
    } else if m > 0.0 {
        // c* = 0: only malicious pools, μ = Mλ/M.
        lambda
    } else {
        0.0
    };
    Ok(SweepRow {
        lambda,
        cstar: eq.cstar,
        pools: eq.pools,
        mu,
        security: eq.security,
        welfare: welfare(eq.cstar, &p, dist),
    })
}

/// `μ(λ)` at the induced equilibrium.
pub fn malicious_reward_share(
    lambda: f64,
    params: &GameParams,
    dist: &CostDistribution,
) -> Result<f64> {
    share_at(lambda, params, dist).map(|r| r.mu)
}

/// Sign pattern of successive differences; differences below `tol` are ignored.
pub fn classify_shape(values: &[f64], tol: f64) -> Shape {
    let signs: Vec<i8> = values
        .windows(2)
        .filter_map(|w| {
            let d = w[1] - w[0];
            if d > tol {
                Some(1)
            } else if d < -tol {
                Some(-1)
            } else {
                None
            }
        })
        .collect();
    let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    match (signs.first(), changes) {
        (None, _) | (Some(1), 0) => Shape::Increasing,
        (Some(1), 1) => Shape::IncreasingThenDecreasing,
        (Some(-1), 0) => Shape::Decreasing,
        _ => Shape::Irregular {
            sign_changes: changes,
        },
    }
}

/// Evaluates `μ` and friends on a λ-grid, in parallel, rows in grid order.
pub fn sweep_lambda(
    params: &GameParams,
    dist: &CostDistribution,
    grid: &GridSpec,
) -> Result<RewardShareCurve> {
    let points = grid.points();
    let rows = points
        .par_iter()
        .map(|&l| share_at(l, params, dist))
        .collect::<Result<Vec<_>>>()?;
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let mus: Vec<f64> = sorted.iter().map(|r| r.mu).collect();
    let shape = classify_shape(&mus, 1e-12);
    let minimizer = rows.iter().copied().min_by(|a, b| a.mu.total_cmp(&b.mu));
    Ok(RewardShareCurve {
        rows,
        shape,
        minimizer,
    })
}

/// Minimizes `μ` over `[lambda_floor, 1]` by comparing the two endpoints.
///
/// The endpoint rule is valid when `μ` is increasing, or increasing then
/// decreasing, on the interval; a 10³-point grid confirms that first and a
/// contradiction is reported as [`Error::Shape`].
pub fn minimize_malicious_reward(
    params: &GameParams,
    dist: &CostDistribution,
    lambda_floor: f64,
) -> Result<DesignResult> {
    params.validate()?;
    check_lambda_range(lambda_floor, params)?;
    let curve = sweep_lambda(
        params,
        dist,
        &GridSpec::Linspace {
            start: lambda_floor,
            end: 1.0,
            count: SHAPE_POINTS,
        },
    )?;
    if let Shape::Irregular { sign_changes } = curve.shape {
        return Err(Error::Shape(format!(
            "mu is not increasing or increasing-then-decreasing on [{lambda_floor}, 1] \
             ({sign_changes} sign changes, distribution {dist}); \
             the endpoint rule is only established for uniform costs"
        )));
    }
    let lo = share_at(lambda_floor, params, dist)?;
    let hi = share_at(1.0, params, dist)?;
    let best = if lo.mu <= hi.mu { lo } else { hi };
    Ok(DesignResult {
        lambda: best.lambda,
        cstar: best.cstar,
        objective: best.mu,
        kind: DesignKind::Endpoint,
        heuristic: false,
    })
}
