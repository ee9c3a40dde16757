//! Reference tables for uniform costs with `H = R = 1` and `M ∈ {1/2, 2/5, 1/3}`,
//! recomputed and compared cell by cell against the published values.

use std::fmt::Write as _;

use serde::Serialize;

use crate::closed_form::equilibrium_cubic;
use crate::continuum::{
    security_max_cstar, solve_threshold_equilibrium, welfare, welfare_optimal_cstar, GameParams,
};
use crate::distributions::CostDistribution;
use crate::error::Result;

/// Tolerance on cells printed with 2 or 3 decimals.
pub const COARSE_TOL: f64 = 5e-3;
/// Tolerance on cells printed with 6 decimals.
pub const FINE_TOL: f64 = 5e-7;
/// Required agreement between the cubic and the bisection solver.
pub const SOLVER_AGREEMENT_TOL: f64 = 1e-8;

const THIRD: f64 = 1.0 / 3.0;

/// Published security-maximizing rows: `(M, c*, P, W)` at `λ = 1`.
pub const TABLE1: [(f64, f64, f64, f64); 3] = [
    (0.5, 0.78, 0.78, 0.305),
    (0.4, 0.82, 0.82, 0.336),
    (THIRD, 0.85, 0.85, 0.359),
];

/// Published welfare-maximizing rows: `(M, λ, c*, P, W)`.
pub const TABLE2: [(f64, f64, f64, f64, f64); 3] = [
    (0.5, 0.83, 0.5, 0.5, 0.375),
    (0.4, 0.8, 0.497, 0.497, 0.431),
    (THIRD, 0.77, 0.491, 0.491, 0.475),
];

/// Published malicious reward shares at `λ = 1`: `(M, μ)`.
pub const TABLE3: [(f64, f64); 3] = [(0.5, 0.390388), (0.4, 0.327922), (THIRD, 0.282376)];

/// Published malicious reward shares: `(M, λ, μ)`.
pub const TABLE4: [(f64, f64, f64); 15] = [
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

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub table: u8,
    /// Row and column, e.g. `M=0.4 lambda=0.9 share`.
    pub label: String,
    pub computed: f64,
    pub published: f64,
    pub tolerance: f64,
    /// Printed precision.
    pub decimals: usize,
}

impl Cell {
    pub fn deviation(&self) -> f64 {
        (self.computed - self.published).abs()
    }

    pub fn ok(&self) -> bool {
        self.deviation() <= self.tolerance
    }
}

/// Reward share computed two ways for one λ-row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverAgreement {
    pub malicious: f64,
    pub lambda: f64,
    pub cubic_share: f64,
    pub bisection_share: f64,
}

impl SolverAgreement {
    pub fn difference(&self) -> f64 {
        (self.cubic_share - self.bisection_share).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableReport {
    pub cells: Vec<Cell>,
    pub agreement: Vec<SolverAgreement>,
    /// Largest gap between the share at `λ = 1` and `2M/(M + √(M² + 4))`.
    pub closed_form_gap: f64,
}

impl TableReport {
    pub fn offending(&self) -> Vec<&Cell> {
        self.cells.iter().filter(|c| !c.ok()).collect()
    }

    pub fn all_ok(&self) -> bool {
        self.offending().is_empty()
    }

    pub fn table(&self, n: u8) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(move |c| c.table == n)
    }

    /// Plain-text rendering at published precision; mismatches are marked `*`.
    pub fn render(&self) -> String {
        let titles = [
            "Table 1: security-maximizing split (lambda = 1)",
            "Table 2: welfare-maximizing split",
            "Table 3: malicious reward share at lambda = 1",
            "Table 4: malicious reward share",
        ];
        let mut out = String::new();
        for (i, title) in titles.iter().enumerate() {
            let _ = writeln!(out, "{title}");
            for c in self.table(i as u8 + 1) {
                let mark = if c.ok() { ' ' } else { '*' };
                let _ = writeln!(
                    out,
                    "  {:<28} {:>10.*} (published {:.*}){mark}",
                    c.label, c.decimals, c.computed, c.decimals, c.published
                );
            }
            out.push('\n');
        }
        out
    }
}

fn m_label(m: f64) -> String {
    if (m - THIRD).abs() < 1e-15 {
        "1/3".into()
    } else {
        format!("{m}")
    }
}

fn game(m: f64, lambda: f64) -> Result<GameParams> {
    GameParams::new(1.0, m, 1.0, lambda)
}

fn push(
    cells: &mut Vec<Cell>,
    table: u8,
    label: String,
    computed: f64,
    published: f64,
    decimals: usize,
) {
    let tolerance = if decimals >= 6 { FINE_TOL } else { COARSE_TOL };
    cells.push(Cell {
        table,
        label,
        computed,
        published,
        tolerance,
        decimals,
    });
}

/// Recomputes all four tables.
pub fn reproduce_tables() -> Result<TableReport> {
    let u = CostDistribution::uniform();
    let mut cells = Vec::new();

    for (m, c_pub, p_pub, w_pub) in TABLE1 {
        let p = game(m, 1.0)?;
        let eq = security_max_cstar(&p, &u)?;
        let ml = m_label(m);
        push(&mut cells, 1, format!("M={ml} c*"), eq.cstar, c_pub, 2);
        push(&mut cells, 1, format!("M={ml} P"), eq.pools, p_pub, 2);
        push(
            &mut cells,
            1,
            format!("M={ml} W"),
            welfare(eq.cstar, &p, &u),
            w_pub,
            3,
        );
    }

    for (m, l_pub, c_pub, p_pub, w_pub) in TABLE2 {
        let p = game(m, 1.0)?;
        let d = welfare_optimal_cstar(&p, &u)?;
        let ml = m_label(m);
        push(&mut cells, 2, format!("M={ml} lambda"), d.lambda, l_pub, 2);
        push(&mut cells, 2, format!("M={ml} c*"), d.cstar, c_pub, 3);
        push(&mut cells, 2, format!("M={ml} P"), d.cstar, p_pub, 3);
        push(&mut cells, 2, format!("M={ml} W"), d.objective, w_pub, 3);
    }

    let mut closed_form_gap: f64 = 0.0;
    for (m, mu_pub) in TABLE3 {
        let eq = solve_threshold_equilibrium(&game(m, 1.0)?, &u)?;
        let mu = m / (eq.pools + m);
        closed_form_gap = closed_form_gap.max((mu - 2.0 * m / (m + (m * m + 4.0).sqrt())).abs());
        push(
            &mut cells,
            3,
            format!("M={} share", m_label(m)),
            mu,
            mu_pub,
            6,
        );
    }

    let mut agreement = Vec::new();
    for (m, l, mu_pub) in TABLE4 {
        let cubic = equilibrium_cubic(1.0, m, 1.0, l)?;
        let c_cubic = cubic.feasible_root.unwrap_or(f64::NAN);
        let c_bisect = solve_threshold_equilibrium(&game(m, l)?, &u)?.cstar;
        let cubic_share = m * l / (c_cubic + m);
        let bisection_share = m * l / (c_bisect + m);
        agreement.push(SolverAgreement {
            malicious: m,
            lambda: l,
            cubic_share,
            bisection_share,
        });
        push(
            &mut cells,
            4,
            format!("M={} lambda={l} share", m_label(m)),
            cubic_share,
            mu_pub,
            6,
        );
    }

    Ok(TableReport {
        cells,
        agreement,
        closed_form_gap,
    })
}
