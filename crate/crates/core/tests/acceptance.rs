//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stakepool::closed_form::equilibrium_cubic;
use stakepool::continuum::{classify_lambda, indifference_gap};
use stakepool::discrete::{convergence_study, simulate, DiscreteConfig};
use stakepool::extensions::{
    classify_return_competition, endogenous_lambda_bound, endogenous_threshold_cost,
    max_security_costly, solve_costly_delegation, CompetitionRegime, CostlyDelegationParams,
    CostlyRegime, EndogenousParams,
};
use stakepool::numeric::linspace;
use stakepool::reward_design::{malicious_reward_share, sweep_lambda, GridSpec, Shape};
use stakepool::{
    security_max_cstar, solve_threshold_equilibrium, welfare, welfare_optimal_cstar, Corner,
    CostDistribution, DesignKind, GameParams,
};

type Outcome = Result<String, String>;
/// `(M, λ, published, cubic share, bisection share)`.
type ShareRow = (f64, f64, f64, f64, f64);
type Criterion = (&'static str, fn() -> Outcome);

const THIRD: f64 = 1.0 / 3.0;
const MS: [f64; 3] = [0.5, 0.4, THIRD];

fn game(m: f64, lambda: f64) -> GameParams {
    GameParams::new(1.0, m, 1.0, lambda).expect("valid game")
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    check(took < limit, format!("took {took:?}, limit {limit:?}"))?;
    Ok(took)
}

fn table1() -> Outcome {
    let start = Instant::now();
    let u = CostDistribution::uniform();
    let c_pub = [0.78, 0.82, 0.85];
    let w_pub = [0.305, 0.336, 0.359];
    let mut worst: f64 = 0.0;
    for (i, m) in MS.into_iter().enumerate() {
        let p = game(m, 1.0);
        let c = security_max_cstar(&p, &u).map_err(|e| e.to_string())?.cstar;
        let w = welfare(c, &p, &u);
        let dc = (c - c_pub[i]).abs();
        let dw = (w - w_pub[i]).abs();
        worst = worst.max(dc).max(dw);
        check(
            dc <= 5e-3 && dw <= 5e-3,
            format!("M={m}: c*={c:.6} W={w:.6}"),
        )?;
    }
    let took = within_time(start, Duration::from_secs(1))?;
    Ok(format!("max deviation {worst:.2e}, {took:?}"))
}

fn table2() -> Outcome {
    let start = Instant::now();
    let u = CostDistribution::uniform();
    let rows = [
        (0.83, 0.5, 0.375),
        (0.8, 0.497, 0.431),
        (0.77, 0.491, 0.475),
    ];
    let mut worst: f64 = 0.0;
    for (m, (l, c, w)) in MS.into_iter().zip(rows) {
        let d = welfare_optimal_cstar(&game(m, 1.0), &u).map_err(|e| e.to_string())?;
        let dev = (d.lambda - l)
            .abs()
            .max((d.cstar - c).abs())
            .max((d.objective - w).abs());
        worst = worst.max(dev);
        check(
            dev <= 5e-3,
            format!(
                "M={m}: lambda={:.6} c*={:.6} W={:.6}",
                d.lambda, d.cstar, d.objective
            ),
        )?;
    }
    let took = within_time(start, Duration::from_secs(1))?;
    Ok(format!("max deviation {worst:.2e}, {took:?}"))
}

fn table3() -> Outcome {
    let u = CostDistribution::uniform();
    let published = [0.390388, 0.327922, 0.282376];
    let (mut worst, mut closed): (f64, f64) = (0.0, 0.0);
    for (m, mu_pub) in MS.into_iter().zip(published) {
        let mu = malicious_reward_share(1.0, &game(m, 1.0), &u).map_err(|e| e.to_string())?;
        let formula = 2.0 * m / (m + (m * m + 4.0).sqrt());
        worst = worst.max((mu - mu_pub).abs());
        closed = closed.max((mu - formula).abs());
        check(
            (mu - mu_pub).abs() <= 5e-7,
            format!("M={m}: share {mu:.9} vs {mu_pub}"),
        )?;
        check(
            (mu - formula).abs() <= 1e-9,
            format!("M={m}: closed form off by {:.2e}", (mu - formula).abs()),
        )?;
    }
    Ok(format!(
        "max deviation {worst:.2e}, closed form gap {closed:.2e}"
    ))
}

const TABLE4: [(f64, f64, f64); 15] = [
    (0.5, 0.99, 0.395647),
    (0.5, 0.9, 0.414172),
    (0.5, 0.8, 0.416164),
    (0.5, 0.7, 0.409608),
    (0.5, 0.6, 0.396822),
    (0.5, 0.5, 0.378318),
    (0.4, 0.9, 0.35305),
    (0.4, 0.8, 0.357138),
    (0.4, 0.6, 0.345172),
    (0.4, 0.5, 0.331877),
    (0.4, 0.4, 0.313697),
    (THIRD, 0.9, 0.307422),
    (THIRD, 0.5, 0.294599),
    (THIRD, 0.4, 0.28047),
    (THIRD, 0.3, 0.261626),
];

fn table4_shares() -> Result<Vec<ShareRow>, String> {
    let u = CostDistribution::uniform();
    TABLE4
        .iter()
        .map(|&(m, l, published)| {
            let cubic = equilibrium_cubic(1.0, m, 1.0, l).map_err(|e| e.to_string())?;
            let c = cubic.feasible_root.ok_or("no feasible cubic root")?;
            let b = solve_threshold_equilibrium(&game(m, l), &u)
                .map_err(|e| e.to_string())?
                .cstar;
            Ok((m, l, published, m * l / (c + m), m * l / (b + m)))
        })
        .collect()
}

fn table4_cells() -> Outcome {
    let rows = table4_shares()?;
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| (r.3 - r.2).abs() > 5e-7)
        .map(|r| {
            format!(
                "M={:.4} lambda={}: {:.7} vs {} ({:.1e})",
                r.0,
                r.1,
                r.3,
                r.2,
                (r.3 - r.2).abs()
            )
        })
        .collect();
    check(
        bad.is_empty(),
        format!("{} of 15 cells beyond 5e-7: {}", bad.len(), bad.join("; ")),
    )?;
    Ok("15 of 15 cells within 5e-7".into())
}

fn table4_agreement() -> Outcome {
    let rows = table4_shares()?;
    let worst = rows.iter().map(|r| (r.3 - r.4).abs()).fold(0.0, f64::max);
    check(
        worst <= 1e-8,
        format!("cubic and bisection differ by {worst:.2e}"),
    )?;
    Ok(format!("max cubic/bisection gap {worst:.2e}"))
}

fn existence_boundary() -> Outcome {
    let u = CostDistribution::uniform();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let grid = linspace(1e-6, 1.0 - 1e-6, 2001);
    for i in 0..100 {
        let h: f64 = rng.random_range(0.5..5.0);
        let m: f64 = rng.random_range(0.0..h * 0.99);
        let r = rng.random_range(0.1..5.0);
        let bound = m / (h + m);
        let lambdas = [
            bound,
            bound + 2e-12,
            (bound - 2e-12).max(0.0),
            rng.random_range(0.0..1.0),
            rng.random_range(bound..1.0),
        ];
        for l in lambdas {
            let p = GameParams::new(h, m, r, l).map_err(|e| e.to_string())?;
            let eq = solve_threshold_equilibrium(&p, &u).map_err(|e| e.to_string())?;
            let interior = matches!(eq.corner, Corner::Interior | Corner::FullParticipation);
            check(
                interior == (l > bound + 1e-12),
                format!(
                    "instance {i}: H={h} M={m} R={r} lambda={l} gave {:?}",
                    eq.corner
                ),
            )?;
            if l == bound {
                check(
                    eq.corner == Corner::AllDelegate,
                    format!("instance {i}: equality gave {:?}", eq.corner),
                )?;
            }
            if interior {
                let signs: Vec<bool> = grid
                    .iter()
                    .map(|&c| indifference_gap(c, &p, &u) > 0.0)
                    .collect();
                let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
                let inside = eq.corner == Corner::Interior
                    && eq.cstar > grid[0]
                    && eq.cstar < grid[grid.len() - 1];
                check(
                    changes == usize::from(inside),
                    format!("instance {i}: {changes} sign changes"),
                )?;
            } else {
                check(
                    eq.cstar == 0.0 && classify_lambda(&p) == eq.corner,
                    format!("instance {i}: corner with c*={}", eq.cstar),
                )?;
            }
        }
    }
    Ok("100 random instances, 500 lambda values".into())
}

fn welfare_regimes() -> Outcome {
    let corner_game = GameParams::new(1.0, 0.9, 1.0, 1.0).map_err(|e| e.to_string())?;
    let narrow = CostDistribution::uniform_on(0.2).map_err(|e| e.to_string())?;
    let d = welfare_optimal_cstar(&corner_game, &narrow).map_err(|e| e.to_string())?;
    check(
        d.kind == DesignKind::SupportCorner && d.cstar == 0.2,
        format!("corner instance gave {d:?}"),
    )?;
    let u = CostDistribution::uniform();
    let mut worst: f64 = 0.0;
    for (h, m) in [
        (1.0, 0.5),
        (1.0, 0.4),
        (1.0, THIRD),
        (2.0, 0.3),
        (1.0, 0.1),
        (3.0, 2.5),
    ] {
        let p = GameParams::new(h, m, 1.0, 1.0).map_err(|e| e.to_string())?;
        let d = welfare_optimal_cstar(&p, &u).map_err(|e| e.to_string())?;
        if d.kind != DesignKind::Interior {
            continue;
        }
        let step = 1e-5;
        let slope =
            (welfare(d.cstar + step, &p, &u) - welfare(d.cstar - step, &p, &u)) / (2.0 * step);
        worst = worst.max(slope.abs());
        check(
            slope.abs() < 1e-8,
            format!("H={h} M={m}: W'({})={slope:.2e}", d.cstar),
        )?;
    }
    Ok(format!("corner at T, max |W'| {worst:.2e}"))
}

fn reward_share_shape() -> Outcome {
    let mut dists = vec![CostDistribution::uniform()];
    for a in [0.25, 0.5, 0.75, 1.0] {
        dists.push(CostDistribution::power(a).map_err(|e| e.to_string())?);
    }
    for dist in &dists {
        for m in [0.1, 0.25, THIRD, 0.4, 0.5, 0.8] {
            let p = game(m, 1.0);
            let lo =
                malicious_reward_share(p.lambda_bound(), &p, dist).map_err(|e| e.to_string())?;
            let hi = malicious_reward_share(1.0, &p, dist).map_err(|e| e.to_string())?;
            check(
                lo < hi,
                format!("{dist} M={m}: mu(bound)={lo} >= mu(1)={hi}"),
            )?;
        }
    }
    let u = CostDistribution::uniform();
    for m in [0.1, 0.25, THIRD, 0.4, 0.5, 0.8] {
        let p = game(m, 1.0);
        let grid = GridSpec::Linspace {
            start: p.lambda_bound(),
            end: 1.0,
            count: 1000,
        };
        let curve = sweep_lambda(&p, &u, &grid).map_err(|e| e.to_string())?;
        check(
            matches!(
                curve.shape,
                Shape::Increasing | Shape::IncreasingThenDecreasing
            ),
            format!("M={m}: shape {:?}", curve.shape),
        )?;
    }
    Ok("endpoint inequality on 5 families, unimodal uniform curves".into())
}

fn costly_orderings() -> Outcome {
    let u = CostDistribution::uniform();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut strict = 0;
    for i in 0..50 {
        let h = rng.random_range(0.5..3.0);
        let m = rng.random_range(0.05..h * 0.9);
        let r = rng.random_range(0.2..3.0);
        let base = GameParams::new(h, m, r, 1.0).map_err(|e| e.to_string())?;
        for cd in [0.01, 0.1, 0.3] {
            let lo = base
                .lambda_bound()
                .max((m * r - cd * m * h) / (h * r + m * r));
            let l = rng.random_range(lo + 1e-6..1.0);
            let p =
                CostlyDelegationParams::new(base.with_lambda(l).map_err(|e| e.to_string())?, cd)
                    .map_err(|e| e.to_string())?;
            let out = solve_costly_delegation(&p, &u).map_err(|e| e.to_string())?;
            let costly = out.delegating_cstar.ok_or("no delegating root")?;
            let plain = solve_threshold_equilibrium(&p.base, &u)
                .map_err(|e| e.to_string())?
                .cstar;
            check(
                costly > plain || (plain >= 1.0 && costly >= 1.0),
                format!("instance {i} cd={cd}: {costly} <= {plain}"),
            )?;
            if out.regime == CostlyRegime::Delegating {
                strict += 1;
            }
        }
        let cd = rng.random_range(0.01..0.5);
        let p = CostlyDelegationParams::new(base, cd).map_err(|e| e.to_string())?;
        let best = max_security_costly(&p, &u).map_err(|e| e.to_string())?;
        let bench = security_max_cstar(&base, &u).map_err(|e| e.to_string())?;
        check(
            best.objective <= bench.security + 1e-12,
            format!(
                "instance {i}: security {} above benchmark {}",
                best.objective, bench.security
            ),
        )?;
    }
    Ok(format!(
        "50 instances, {strict} delegating equilibria checked"
    ))
}

fn endogenous_bound() -> Outcome {
    let u = CostDistribution::uniform();
    let p = EndogenousParams::new(game(0.4, 1.0), THIRD).map_err(|e| e.to_string())?;
    let c = endogenous_threshold_cost(&p, &u).map_err(|e| e.to_string())?;
    check((c - 0.8).abs() < 1e-12, format!("c_theta={c}"))?;
    let l = endogenous_lambda_bound(&p, &u).map_err(|e| e.to_string())?;
    let formula = (0.8 * 1.2 * 0.2 + 1.2) / 1.4;
    check(
        (l - formula).abs() < 1e-12,
        format!("lambda_min={l} vs {formula}"),
    )?;
    let above = solve_threshold_equilibrium(&game(0.4, l + 1e-3), &u).map_err(|e| e.to_string())?;
    let below = solve_threshold_equilibrium(&game(0.4, l - 1e-3), &u).map_err(|e| e.to_string())?;
    check(
        above.cstar > 0.8 && below.cstar < 0.8,
        format!("c* {} / {}", below.cstar, above.cstar),
    )?;
    Ok(format!(
        "lambda_min={l:.6}, c* {:.6} < 0.8 < {:.6}",
        below.cstar, above.cstar
    ))
}

fn discrete_convergence() -> Outcome {
    let u = CostDistribution::uniform();
    let p = game(0.5, 1.0);
    let study =
        convergence_study(&p, &u, &[100, 1_000, 10_000], 20, 11).map_err(|e| e.to_string())?;
    let last = study.rows.last().ok_or("empty study")?;
    check(
        last.deviation < 0.02,
        format!("n=1e4 deviation {}", last.deviation),
    )?;
    check(
        study.trend_nonincreasing,
        format!(
            "deviations {:?}",
            study.rows.iter().map(|r| r.deviation).collect::<Vec<_>>()
        ),
    )?;
    let cfg =
        DiscreteConfig::new(10_000, 5_000, 1.0, 1.0, u, 100, 42).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let a = simulate(&cfg, Some(0.7808), true).map_err(|e| e.to_string())?;
    let took = within_time(start, Duration::from_secs(30))?;
    let b = simulate(&cfg, Some(0.7808), true).map_err(|e| e.to_string())?;
    check(
        a == b && format!("{a:?}") == format!("{b:?}"),
        "reruns differ",
    )?;
    Ok(format!(
        "n=1e4 deviation {:.1e} (Monte Carlo {:.1e}), 100 replications in {took:?}",
        last.deviation, last.monte_carlo_deviation
    ))
}

fn competition() -> Outcome {
    let u = CostDistribution::uniform();
    let p = game(0.5, 1.0);
    for floor in [None, Some(THIRD), Some(0.2)] {
        let out = classify_return_competition(&p, &u, floor).map_err(|e| e.to_string())?;
        check(
            out.regime == CompetitionRegime::Disrupted,
            format!("floor {floor:?}: {:?}", out.regime),
        )?;
    }
    let out = classify_return_competition(&p, &u, Some(0.8)).map_err(|e| e.to_string())?;
    let fixed = solve_threshold_equilibrium(&game(0.5, 0.8), &u).map_err(|e| e.to_string())?;
    check(
        out.regime == CompetitionRegime::FixedEquivalent,
        "floor 0.8 not fixed-equivalent",
    )?;
    check(
        out.equilibrium == Some(fixed),
        "equilibrium differs from the fixed game",
    )?;
    Ok(format!("floor 0.8 gives c*={:.6}", fixed.cstar))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("1  security-maximizing table", table1),
        ("2  welfare-maximizing table", table2),
        ("3  reward share at lambda=1", table3),
        ("4  reward share cells", table4_cells),
        ("4  cubic vs bisection", table4_agreement),
        ("5  existence boundary", existence_boundary),
        ("6  welfare regimes", welfare_regimes),
        ("7  reward share shape", reward_share_shape),
        ("8  costly delegation orderings", costly_orderings),
        ("9  endogenous reward bound", endogenous_bound),
        ("10 discrete convergence", discrete_convergence),
        ("11 return competition", competition),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
