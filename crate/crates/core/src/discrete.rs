//! Finite-agent Monte Carlo version of the game.
//!
//! `n` honest agents draw costs i.i.d. from `F`, those below a threshold run
//! pools, and each remaining honest agent delegates to one of the `k + m`
//! pools uniformly at random. One block reward `r` is paid per round to a
//! pool chosen with probability proportional to its stake `(1 + d_i)/(n + m)`:
//! the owner keeps `λr` and the pool's delegators split `(1 - λ)r`. An empty
//! pool's delegator share is burned.
//!
//! Replication `i` draws from a ChaCha8 generator seeded with `seed` on
//! stream `i`, so results depend only on `(seed, i)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::continuum::{solve_threshold_equilibrium, GameParams, BOUNDARY_TOL};
use crate::distributions::CostDistribution;
use crate::error::{Error, Result};
use crate::numeric::bisect_decreasing;

pub const DEFAULT_DAMPING: f64 = 0.5;
const FIXED_POINT_TOL: f64 = 1e-9;
const FIXED_POINT_MAX_ITER: usize = 10_000;
const MC_THRESHOLD_XTOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct DiscreteConfig {
    /// Honest agents.
    pub n: usize,
    /// Malicious agents, each running one pool at zero cost.
    pub m: usize,
    /// Block reward per round.
    pub reward: f64,
    pub lambda: f64,
    pub dist: CostDistribution,
    pub replications: usize,
    pub seed: u64,
    /// Step factor of the best-response iteration.
    pub damping: f64,
}

impl DiscreteConfig {
    pub fn new(
        n: usize,
        m: usize,
        reward: f64,
        lambda: f64,
        dist: CostDistribution,
        replications: usize,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            n,
            m,
            reward,
            lambda,
            dist,
            replications,
            seed,
            damping: DEFAULT_DAMPING,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n <= self.m {
            return Err(Error::InvalidParams(format!(
                "need n > m >= 0 and n >= 1, got n={} m={}",
                self.n, self.m
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidParams(
                "replications must be at least 1".into(),
            ));
        }
        if !(self.reward.is_finite() && self.reward > 0.0) {
            return Err(Error::InvalidParams(format!(
                "reward must be positive, got {}",
                self.reward
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidParams(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }

    /// `m / (n + m)`, below which honest pools cannot be sustained.
    pub fn lambda_bound(&self) -> f64 {
        self.m as f64 / (self.n + self.m) as f64
    }

    /// Finite game matching a continuum game at scale `n`:
    /// `m = round(n·M/H)` and `r = R·n/H`.
    pub fn scaled(
        params: &GameParams,
        n: usize,
        dist: CostDistribution,
        replications: usize,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        let m = (n as f64 * params.malicious / params.honest).round() as usize;
        let r = params.reward * n as f64 / params.honest;
        Self::new(n, m, r, params.lambda, dist, replications, seed)
    }
}

/// Generator for replication `index`.
pub fn replication_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationStats {
    pub index: u64,
    /// Honest pools.
    pub k: usize,
    /// Delegators per pool; honest pools first, then malicious ones.
    pub delegation_counts: Vec<u32>,
    /// Expected owner utility for an agent at the threshold cost, `λr/(k+m) - threshold`.
    pub owner_utility_at_threshold: f64,
    /// Expected utility averaged over honest owners, `(1+d_i)λr/(n+m) - c_i`.
    pub mean_owner_utility: Option<f64>,
    /// Expected utility averaged over delegators, `(1+d_i)(1-λ)r/((n+m)d_i)`.
    pub mean_delegator_utility: Option<f64>,
    /// Owner at the threshold minus delegator; with no delegators the
    /// delegator side is a lone entrant's `2(1-λ)r/(n+m)`.
    pub indifference_gap: f64,
    /// `k / (k + m)`.
    pub security: f64,
    /// No pools at all (`k + m = 0`).
    pub degenerate: bool,
}

/// One round: draw costs, open pools, assign delegators.
pub fn run_replication(
    cfg: &DiscreteConfig,
    threshold: f64,
    index: u64,
) -> Result<ReplicationStats> {
    cfg.validate()?;
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::Domain(format!(
            "threshold must be nonnegative, got {threshold}"
        )));
    }
    let mut rng = replication_rng(cfg.seed, index);
    let costs: Vec<f64> = (0..cfg.n).map(|_| cfg.dist.sample(&mut rng)).collect();
    let owner_costs: Vec<f64> = costs.iter().copied().filter(|&c| c < threshold).collect();
    let k = owner_costs.len();
    let pools = k + cfg.m;
    let delegators = cfg.n - k;
    let n_total = (cfg.n + cfg.m) as f64;
    let (l, r) = (cfg.lambda, cfg.reward);
    let delegator_entrant = 2.0 * (1.0 - l) * r / n_total;

    if pools == 0 {
        return Ok(ReplicationStats {
            index,
            k,
            delegation_counts: Vec::new(),
            owner_utility_at_threshold: l * r - threshold,
            mean_owner_utility: None,
            mean_delegator_utility: None,
            indifference_gap: l * r - threshold,
            security: 0.0,
            degenerate: true,
        });
    }

    let mut counts = vec![0u32; pools];
    for _ in 0..delegators {
        counts[rng.random_range(0..pools)] += 1;
    }
    let mean_owner_utility = (k > 0).then(|| {
        owner_costs
            .iter()
            .zip(&counts)
            .map(|(c, &d)| (1.0 + d as f64) * l * r / n_total - c)
            .sum::<f64>()
            / k as f64
    });
    let mean_delegator_utility = (delegators > 0).then(|| {
        let weighted: f64 = counts
            .iter()
            .filter(|&&d| d > 0)
            .map(|&d| 1.0 + d as f64)
            .sum();
        (1.0 - l) * r / n_total * weighted / delegators as f64
    });
    let owner_utility_at_threshold = l * r / pools as f64 - threshold;
    let indifference_gap =
        owner_utility_at_threshold - mean_delegator_utility.unwrap_or(delegator_entrant);
    Ok(ReplicationStats {
        index,
        k,
        delegation_counts: counts,
        owner_utility_at_threshold,
        mean_owner_utility,
        mean_delegator_utility,
        indifference_gap,
        security: k as f64 / pools as f64,
        degenerate: false,
    })
}

/// `λr/(F(c)n+m) - (1-λ)r/(n-F(c)n) - c`, the gap with `k` and `d_i` replaced by their means.
pub fn mean_field_gap(c: f64, cfg: &DiscreteConfig) -> f64 {
    let n = cfg.n as f64;
    let m = cfg.m as f64;
    let f = cfg.dist.prob_below(c);
    let owner = if cfg.lambda == 0.0 {
        0.0
    } else {
        cfg.lambda * cfg.reward / (f * n + m)
    };
    let delegator = if cfg.lambda == 1.0 {
        0.0
    } else {
        (1.0 - cfg.lambda) * cfg.reward / (n - f * n)
    };
    owner - delegator - c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestResponse {
    pub threshold: f64,
    pub iterations: usize,
}

/// Damped fixed point of `c ↦ c + mean_field_gap(c)`, clamped to `[0, T]`.
pub fn best_response_threshold(cfg: &DiscreteConfig) -> Result<BestResponse> {
    cfg.validate()?;
    let bound = cfg.lambda_bound();
    if cfg.lambda < bound - BOUNDARY_TOL {
        return Err(Error::Domain(format!(
            "lambda={} below m/(n+m)={bound}: honest pools are not sustainable",
            cfg.lambda
        )));
    }
    if cfg.lambda <= bound + BOUNDARY_TOL {
        return Ok(BestResponse {
            threshold: 0.0,
            iterations: 0,
        });
    }
    let upper = cfg.dist.support_upper();
    let mut c = if cfg.dist.is_bounded() {
        0.5 * upper
    } else {
        1.0
    };
    let mut trace = Vec::with_capacity(8);
    for it in 1..=FIXED_POINT_MAX_ITER {
        let target = (c + mean_field_gap(c, cfg)).clamp(0.0, upper);
        let next = c + cfg.damping * (target - c);
        if !next.is_finite() {
            return Err(Error::Numeric(format!(
                "best-response iterate diverged at {c}"
            )));
        }
        if (next - c).abs() < FIXED_POINT_TOL {
            return Ok(BestResponse {
                threshold: next,
                iterations: it,
            });
        }
        if trace.len() == 8 {
            trace.remove(0);
        }
        trace.push(next);
        c = next;
    }
    Err(Error::Numeric(format!(
        "best response did not converge in {FIXED_POINT_MAX_ITER} iterations; last iterates {trace:?}"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self { mean: 0.0, se: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n;
        let se = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self { mean, se }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub n: usize,
    pub m: usize,
    pub reward: f64,
    pub lambda: f64,
    pub dist: String,
    pub replications: usize,
    pub seed: u64,
    pub damping: f64,
}

impl From<&DiscreteConfig> for ConfigEcho {
    fn from(c: &DiscreteConfig) -> Self {
        Self {
            n: c.n,
            m: c.m,
            reward: c.reward,
            lambda: c.lambda,
            dist: c.dist.to_string(),
            replications: c.replications,
            seed: c.seed,
            damping: c.damping,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub config: ConfigEcho,
    pub threshold: f64,
    /// False when `λ < m/(n+m)`; the run then uses threshold 0.
    pub pooling_sustainable: bool,
    pub honest_pools: MeanSe,
    pub security: MeanSe,
    pub owner_utility_at_threshold: MeanSe,
    pub indifference_gap: MeanSe,
    pub delegator_utility: MeanSe,
    pub degenerate_replications: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replications: Option<Vec<ReplicationStats>>,
}

/// Runs all replications at the given threshold, in parallel, keeping index order.
pub fn run_replications(cfg: &DiscreteConfig, threshold: f64) -> Result<Vec<ReplicationStats>> {
    (0..cfg.replications as u64)
        .into_par_iter()
        .map(|i| run_replication(cfg, threshold, i))
        .collect()
}

/// Monte Carlo run at `threshold`, or at the best-response threshold when `None`.
pub fn simulate(
    cfg: &DiscreteConfig,
    threshold: Option<f64>,
    keep_replications: bool,
) -> Result<SimulationReport> {
    cfg.validate()?;
    let sustainable = cfg.lambda >= cfg.lambda_bound() - BOUNDARY_TOL;
    let threshold = match threshold {
        Some(t) => t,
        None if sustainable => best_response_threshold(cfg)?.threshold,
        None => 0.0,
    };
    let reps = run_replications(cfg, threshold)?;
    let live: Vec<&ReplicationStats> = reps.iter().filter(|r| !r.degenerate).collect();
    let col = |f: &dyn Fn(&ReplicationStats) -> Option<f64>| -> MeanSe {
        let v: Vec<f64> = live.iter().filter_map(|r| f(r)).collect();
        MeanSe::of(&v)
    };
    let report = SimulationReport {
        config: cfg.into(),
        threshold,
        pooling_sustainable: sustainable,
        honest_pools: col(&|r| Some(r.k as f64)),
        security: col(&|r| Some(r.security)),
        owner_utility_at_threshold: col(&|r| Some(r.owner_utility_at_threshold)),
        indifference_gap: col(&|r| Some(r.indifference_gap)),
        delegator_utility: col(&|r| r.mean_delegator_utility),
        degenerate_replications: reps.len() - live.len(),
        replications: None,
    };
    Ok(SimulationReport {
        replications: keep_replications.then_some(reps),
        ..report
    })
}

/// Mean Monte Carlo gap at `threshold` with its standard error.
pub fn monte_carlo_gap(cfg: &DiscreteConfig, threshold: f64) -> Result<MeanSe> {
    let reps = run_replications(cfg, threshold)?;
    let gaps: Vec<f64> = reps.iter().map(|r| r.indifference_gap).collect();
    Ok(MeanSe::of(&gaps))
}

/// Threshold where the Monte Carlo gap changes sign, using the same
/// replication streams at every probe.
pub fn monte_carlo_threshold(cfg: &DiscreteConfig) -> Result<f64> {
    let upper = if cfg.dist.is_bounded() {
        cfg.dist.support_upper()
    } else {
        cfg.dist.quantile(1.0 - 1e-9)
    };
    let gap = |t: f64| monte_carlo_gap(cfg, t).map(|g| g.mean).unwrap_or(f64::NAN);
    if gap(0.0) <= 0.0 {
        return Ok(0.0);
    }
    if gap(upper) >= 0.0 {
        return Ok(upper);
    }
    bisect_decreasing(gap, 0.0, upper, MC_THRESHOLD_XTOL, f64::INFINITY)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub m: usize,
    pub reward: f64,
    pub continuum_cstar: f64,
    /// Mean-field best-response threshold.
    pub best_response: f64,
    pub deviation: f64,
    /// Root of the Monte Carlo gap.
    pub monte_carlo_threshold: f64,
    pub monte_carlo_deviation: f64,
    /// Standard error of the Monte Carlo gap at the best-response threshold.
    pub gap_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Median-of-three smoothed deviations never increase (up to the
    /// fixed-point tolerance).
    pub trend_nonincreasing: bool,
}

/// Median-of-three smoothing with the endpoints kept.
pub fn median_of_three(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    for i in 1..values.len().saturating_sub(1) {
        let mut w = [values[i - 1], values[i], values[i + 1]];
        w.sort_by(f64::total_cmp);
        out[i] = w[1];
    }
    out
}

/// Compares finite games of increasing size against the continuum threshold.
pub fn convergence_study(
    params: &GameParams,
    dist: &CostDistribution,
    n_grid: &[usize],
    replications: usize,
    seed: u64,
) -> Result<ConvergenceReport> {
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams(
            "n_grid must be strictly ascending".into(),
        ));
    }
    let continuum = solve_threshold_equilibrium(params, dist)?.cstar;
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let cfg = DiscreteConfig::scaled(params, n, dist.clone(), replications, seed)?;
        let br = best_response_threshold(&cfg)?.threshold;
        let mc = monte_carlo_threshold(&cfg)?;
        rows.push(ConvergenceRow {
            n,
            m: cfg.m,
            reward: cfg.reward,
            continuum_cstar: continuum,
            best_response: br,
            deviation: (br - continuum).abs(),
            monte_carlo_threshold: mc,
            monte_carlo_deviation: (mc - continuum).abs(),
            gap_se: monte_carlo_gap(&cfg, br)?.se,
        });
    }
    let devs: Vec<f64> = rows.iter().map(|r| r.deviation).collect();
    let smooth = median_of_three(&devs);
    let trend_nonincreasing = smooth.windows(2).all(|w| w[1] <= w[0] + FIXED_POINT_TOL);
    Ok(ConvergenceReport {
        rows,
        trend_nonincreasing,
    })
}
