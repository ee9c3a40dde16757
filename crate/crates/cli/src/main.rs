mod scenario;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use stakepool::discrete::{convergence_study, simulate, DiscreteConfig};
use stakepool::extensions::{
    classify_return_competition, delegation_participation_check, endogenous_lambda_bound,
    endogenous_security, endogenous_threshold_cost, max_security_costly, solve_costly_delegation,
    CompetitionRegime, CostlyDelegationParams, EndogenousParams,
};
use stakepool::reward_design::{
    malicious_reward_share, minimize_malicious_reward, sweep_lambda, GridSpec,
};
use stakepool::tables::reproduce_tables;
use stakepool::{
    security_max_cstar, solve_threshold_equilibrium, welfare, welfare_optimal_cstar, Corner,
    DesignResult, Error, GameParams,
};

use scenario::{Scenario, ScenarioArgs};

const SCHEMA_VERSION: u32 = 1;

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_TABLE_MISMATCH: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "stakepool",
    version,
    about = "Staking-pool formation game engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Emit JSON instead of text
    #[arg(long, global = true)]
    json: bool,
    /// Write output to a file instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Threshold equilibrium at the given lambda
    Solve,
    /// Optimal lambda for an objective
    Design {
        #[arg(long, value_enum, default_value_t = Objective::Security)]
        objective: Objective,
    },
    /// Reward share, security and welfare over a lambda grid (CSV)
    Sweep {
        /// Comma-separated lambda values; default is an even grid from M/(H+M) to 1
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        /// Number of points of the default grid
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Recompute the reference tables; exit 4 on any mismatch
    Tables,
    /// Monte Carlo run of the finite game
    Simulate {
        /// Run a convergence study over these n instead
        #[arg(long, value_delimiter = ',')]
        convergence: Option<Vec<usize>>,
        /// Fixed pool-opening threshold; default is the best response
        #[arg(long)]
        threshold: Option<f64>,
        /// Include per-replication statistics in JSON output
        #[arg(long)]
        per_replication: bool,
        /// Reward per round; default R·n/H, which matches the continuum game
        #[arg(long)]
        block_reward: Option<f64>,
    },
    /// Delegation with a per-delegator cost
    Costly,
    /// Rewards paid only when security reaches 1 - theta
    Endogenous,
    /// Pools compete on the delegator return, optionally above --floor
    Compete,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Objective {
    Security,
    Welfare,
    MinMalicious,
}

/// Text and JSON renderings of one command result.
struct Output {
    text: String,
    json: Value,
    exit: u8,
}

impl Output {
    fn ok(text: String, json: Value) -> Self {
        Self {
            text,
            json,
            exit: 0,
        }
    }
}

fn corner_name(c: Corner) -> &'static str {
    match c {
        Corner::Interior => "Interior",
        Corner::AllDelegate => "AllDelegate",
        Corner::NoInterior => "NoInterior",
        Corner::FullParticipation => "FullParticipation",
    }
}

fn params_json(p: &GameParams, s: &Scenario) -> Value {
    json!({
        "H": p.honest,
        "M": p.malicious,
        "R": p.reward,
        "lambda": p.lambda,
        "dist": s.dist.to_string(),
    })
}

fn cmd_solve(s: &Scenario) -> stakepool::Result<Output> {
    s.require_lambda()?;
    let p = s.game()?;
    let eq = solve_threshold_equilibrium(&p, &s.dist)?;
    let w = welfare(eq.cstar, &p, &s.dist);
    if matches!(eq.corner, Corner::NoInterior | Corner::AllDelegate) {
        eprintln!(
            "warning: lambda={} is at or below M/(H+M)={:.6}; no honest agent runs a pool",
            p.lambda,
            p.lambda_bound()
        );
    }
    let mut text = String::new();
    let _ = writeln!(text, "c*        {:.6}", eq.cstar);
    let _ = writeln!(text, "P         {:.6}", eq.pools);
    let _ = writeln!(text, "D         {:.6}", eq.delegators);
    let _ = writeln!(text, "s         {:.6}", eq.stake_per_pool);
    let _ = writeln!(text, "r         {:.6}", eq.pool_reward);
    let _ = writeln!(text, "security  {:.6}", eq.security);
    let _ = writeln!(text, "W         {:.6}", w);
    let _ = writeln!(text, "corner    {}", corner_name(eq.corner));
    let mut j = serde_json::to_value(eq).expect("serializable");
    j["welfare"] = json!(w);
    j["params"] = params_json(&p, s);
    Ok(Output::ok(text, j))
}

fn design_output(
    d: &DesignResult,
    p: &GameParams,
    s: &Scenario,
    label: &str,
) -> stakepool::Result<Output> {
    let at = p.with_lambda(d.lambda)?;
    let eq = solve_threshold_equilibrium(&at, &s.dist)?;
    let mu = malicious_reward_share(d.lambda, p, &s.dist)?;
    let security = if d.cstar >= s.dist.support_upper() {
        let pools = s.dist.prob_below(d.cstar) * p.honest;
        pools / (pools + p.malicious)
    } else {
        eq.security
    };
    let w = welfare(d.cstar, p, &s.dist);
    let mut text = String::new();
    let _ = writeln!(text, "objective {label}");
    let _ = writeln!(text, "lambda    {:.6}", d.lambda);
    let _ = writeln!(text, "c*        {:.6}", d.cstar);
    let _ = writeln!(text, "value     {:.6}", d.objective);
    let _ = writeln!(text, "mu        {mu:.6}");
    let _ = writeln!(text, "security  {security:.6}");
    let _ = writeln!(text, "W         {w:.6}");
    let _ = writeln!(text, "kind      {:?}", d.kind);
    if d.heuristic {
        let _ = writeln!(text, "note      grid search (CDF not concave)");
    }
    let mut j = serde_json::to_value(d).expect("serializable");
    j["objective_name"] = json!(label);
    j["mu"] = json!(mu);
    j["security"] = json!(security);
    j["welfare"] = json!(w);
    j["params"] = params_json(p, s);
    Ok(Output::ok(text, j))
}

fn cmd_design(s: &Scenario, objective: Objective) -> stakepool::Result<Output> {
    let p = s.game()?;
    match objective {
        Objective::Security => {
            let eq = security_max_cstar(&p, &s.dist)?;
            let d = DesignResult {
                lambda: 1.0,
                cstar: eq.cstar,
                objective: eq.pools,
                kind: stakepool::DesignKind::Endpoint,
                heuristic: false,
            };
            design_output(&d, &p, s, "security")
        }
        Objective::Welfare => {
            let d = welfare_optimal_cstar(&p, &s.dist)?;
            design_output(&d, &p, s, "welfare")
        }
        Objective::MinMalicious => {
            let floor = s.floor.unwrap_or_else(|| p.lambda_bound());
            let d = minimize_malicious_reward(&p, &s.dist, floor)?;
            design_output(&d, &p, s, "min-malicious")
        }
    }
}

fn cmd_sweep(s: &Scenario, lambdas: Option<Vec<f64>>, points: usize) -> stakepool::Result<Output> {
    let p = s.game()?;
    let grid = match lambdas {
        Some(l) => GridSpec::Points(l),
        None => GridSpec::Linspace {
            start: s.floor.unwrap_or_else(|| p.lambda_bound()),
            end: 1.0,
            count: points,
        },
    };
    let curve = sweep_lambda(&p, &s.dist, &grid)?;
    let mut j = serde_json::to_value(&curve).expect("serializable");
    j["params"] = params_json(&p, s);
    Ok(Output::ok(curve.to_csv(), j))
}

fn cmd_tables() -> stakepool::Result<Output> {
    let report = reproduce_tables()?;
    let mut text = report.render();
    let bad = report.offending();
    let worst_agreement = report
        .agreement
        .iter()
        .map(|a| a.difference())
        .fold(0.0, f64::max);
    let _ = writeln!(
        text,
        "cubic vs bisection: max share difference {worst_agreement:.2e}"
    );
    for c in &bad {
        eprintln!(
            "mismatch: table {} {}: computed {:.9}, published {}, deviation {:.2e} > {:.0e}",
            c.table,
            c.label,
            c.computed,
            c.published,
            c.deviation(),
            c.tolerance
        );
    }
    let j = json!({
        "cells": report.cells,
        "agreement": report.agreement,
        "closed_form_gap": report.closed_form_gap,
        "offending": bad.iter().map(|c| c.label.clone()).collect::<Vec<_>>(),
    });
    let exit = if bad.is_empty() {
        0
    } else {
        EXIT_TABLE_MISMATCH
    };
    Ok(Output {
        text,
        json: j,
        exit,
    })
}

fn cmd_simulate(
    s: &Scenario,
    convergence: Option<Vec<usize>>,
    threshold: Option<f64>,
    per_replication: bool,
    block_reward: Option<f64>,
) -> stakepool::Result<Output> {
    if let Some(grid) = convergence {
        let p = s.game()?;
        let study = convergence_study(&p, &s.dist, &grid, s.reps, s.seed)?;
        let mut text =
            String::from("n,m,continuum,best_response,deviation,monte_carlo,mc_deviation,gap_se\n");
        for r in &study.rows {
            let _ = writeln!(
                text,
                "{},{},{:.6},{:.6},{:.3e},{:.6},{:.3e},{:.3e}",
                r.n,
                r.m,
                r.continuum_cstar,
                r.best_response,
                r.deviation,
                r.monte_carlo_threshold,
                r.monte_carlo_deviation,
                r.gap_se
            );
        }
        let _ = writeln!(text, "trend nonincreasing: {}", study.trend_nonincreasing);
        let mut j = serde_json::to_value(&study).expect("serializable");
        j["params"] = params_json(&p, s);
        return Ok(Output::ok(text, j));
    }
    let n = Scenario::require(s.n, "n")?;
    let m = Scenario::require(s.m, "m")?;
    let cfg = DiscreteConfig::new(
        n,
        m,
        block_reward.unwrap_or(s.reward * n as f64 / s.honest),
        s.require_lambda()?,
        s.dist.clone(),
        s.reps,
        s.seed,
    )?;
    let rep = simulate(&cfg, threshold, per_replication)?;
    if !rep.pooling_sustainable {
        eprintln!(
            "warning: lambda={} below m/(n+m)={:.6}; honest pooling is not sustainable",
            cfg.lambda,
            cfg.lambda_bound()
        );
    }
    let mut text = String::new();
    let _ = writeln!(text, "threshold            {:.6}", rep.threshold);
    let _ = writeln!(text, "pooling sustainable  {}", rep.pooling_sustainable);
    let _ = writeln!(
        text,
        "honest pools         {:.3} ± {:.3}",
        rep.honest_pools.mean, rep.honest_pools.se
    );
    let _ = writeln!(
        text,
        "security             {:.6} ± {:.6}",
        rep.security.mean, rep.security.se
    );
    let _ = writeln!(
        text,
        "indifference gap     {:.6} ± {:.6}",
        rep.indifference_gap.mean, rep.indifference_gap.se
    );
    let _ = writeln!(text, "degenerate runs      {}", rep.degenerate_replications);
    Ok(Output::ok(
        text,
        serde_json::to_value(&rep).expect("serializable"),
    ))
}

fn cmd_costly(s: &Scenario) -> stakepool::Result<Output> {
    let cd = Scenario::require(s.cd, "cd")?;
    let p = CostlyDelegationParams::new(s.game()?, cd)?;
    let mut text = String::new();
    let mut j = json!({ "params": params_json(&p.base, s), "c_d": cd });
    let _ = writeln!(text, "lambda lower bound   {:.6}", p.lambda_lower_bound());
    if s.lambda.is_some() {
        let out = solve_costly_delegation(&p, &s.dist)?;
        let part = delegation_participation_check(out.cstar, &p, &s.dist);
        let _ = writeln!(text, "regime               {:?}", out.regime);
        let _ = writeln!(text, "c*                   {:.6}", out.cstar);
        let _ = writeln!(text, "base c*              {:.6}", out.base_cstar);
        let _ = writeln!(text, "security             {:.6}", out.security);
        let _ = writeln!(text, "delegation pays      {part}");
        j["equilibrium"] = serde_json::to_value(out).expect("serializable");
        j["participation"] = json!(part);
    }
    let best = max_security_costly(&p, &s.dist)?;
    let _ = writeln!(text, "max security lambda  {:.6}", best.lambda);
    let _ = writeln!(text, "max security c*      {:.6}", best.cstar);
    let _ = writeln!(
        text,
        "max security         {:.6} ({:?})",
        best.objective, best.kind
    );
    j["max_security"] = serde_json::to_value(best).expect("serializable");
    Ok(Output::ok(text, j))
}

fn cmd_endogenous(s: &Scenario) -> stakepool::Result<Output> {
    let theta = Scenario::require(s.theta, "theta")?;
    let p = EndogenousParams::new(s.game()?, theta)?;
    let c = endogenous_threshold_cost(&p, &s.dist)?;
    let l = endogenous_lambda_bound(&p, &s.dist)?;
    let mut text = String::new();
    let _ = writeln!(text, "c_theta      {c:.6}");
    let _ = writeln!(text, "lambda_min   {l:.6}");
    let mut j = json!({
        "params": params_json(&p.base, s),
        "theta": theta,
        "threshold_cost": c,
        "lambda_min": l,
    });
    if s.lambda.is_some() {
        let out = endogenous_security(&p, &s.dist)?;
        let _ = writeln!(text, "c*           {:.6}", out.equilibrium.cstar);
        let _ = writeln!(text, "security     {:.6}", out.equilibrium.security);
        let _ = writeln!(text, "coverage     {:.6}", out.coverage);
        let _ = writeln!(text, "reward paid  {}", out.reward_paid);
        j["outcome"] = serde_json::to_value(out).expect("serializable");
    }
    Ok(Output::ok(text, j))
}

fn cmd_compete(s: &Scenario) -> stakepool::Result<Output> {
    let p = s.game()?;
    let out = classify_return_competition(&p, &s.dist, s.floor)?;
    let mut text = String::new();
    let _ = writeln!(text, "regime            {:?}", out.regime);
    let _ = writeln!(text, "effective lambda  {:.6}", out.effective_lambda);
    match (&out.regime, &out.equilibrium) {
        (CompetitionRegime::FixedEquivalent, Some(eq)) => {
            let _ = writeln!(text, "c*                {:.6}", eq.cstar);
            let _ = writeln!(text, "security          {:.6}", eq.security);
        }
        _ => {
            let _ = writeln!(text, "no honest agent runs a pool");
        }
    }
    let mut j = serde_json::to_value(out).expect("serializable");
    j["params"] = params_json(&p, s);
    Ok(Output::ok(text, j))
}

fn run(cli: Cli) -> stakepool::Result<Output> {
    let s = cli.scenario.resolve()?;
    match cli.command {
        Command::Solve => cmd_solve(&s),
        Command::Design { objective } => cmd_design(&s, objective),
        Command::Sweep { lambdas, points } => cmd_sweep(&s, lambdas, points),
        Command::Tables => cmd_tables(),
        Command::Simulate {
            convergence,
            threshold,
            per_replication,
            block_reward,
        } => cmd_simulate(&s, convergence, threshold, per_replication, block_reward),
        Command::Costly => cmd_costly(&s),
        Command::Endogenous => cmd_endogenous(&s),
        Command::Compete => cmd_compete(&s),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Solve => "solve",
        Command::Design { .. } => "design",
        Command::Sweep { .. } => "sweep",
        Command::Tables => "tables",
        Command::Simulate { .. } => "simulate",
        Command::Costly => "costly",
        Command::Endogenous => "endogenous",
        Command::Compete => "compete",
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_NUMERIC
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let as_json = cli.json;
    let out_path = cli.out.clone();
    let name = command_name(&cli.command);
    let output = match run(cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let body = if as_json {
        let mut j = json!({ "schema_version": SCHEMA_VERSION, "command": name });
        j["result"] = output.json;
        serde_json::to_string_pretty(&j).expect("serializable") + "\n"
    } else {
        output.text
    };
    match out_path {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, body) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(EXIT_VALIDATION);
            }
        }
        None => print!("{body}"),
    }
    ExitCode::from(output.exit)
}
