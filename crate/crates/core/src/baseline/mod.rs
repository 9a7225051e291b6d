//! Exact solvers for the bounded-rational free-energy problems on a
//! discretized action grid.
//!
//! Everything here works on a [`DiscreteProblem`]: a world distribution
//! and a dense utility table `U[w][j]` over grid points. Free energies and
//! KL terms are in nats; mutual information is reported in bits.

mod frontier;
mod single;
mod two_stage;

pub use frontier::{frontier_utility_at, rate_distortion_curve, FrontierPoint};
pub use single::{
    solve_single_stage, solve_single_stage_from, DiscretePolicy, SingleStageSolution,
};
pub use two_stage::{solve_two_stage, TwoStageOptions, TwoStageSolution};

use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result, WorldModel};

/// Default number of grid points.
pub const DEFAULT_GRID_SIZE: usize = 100;

/// Stopping rule for the fixed-point iterations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Max-norm change of all updated arrays below which iteration stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

/// How a fixed-point iteration ended. Non-convergence is not an error;
/// the caller decides what to do with the final residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Convergence {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// World distribution, action grid, and utility table `U[w][j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteProblem {
    rho: Vec<f64>,
    grid: Vec<f64>,
    utility: Vec<Vec<f64>>,
}

impl DiscreteProblem {
    /// Tabulates a scalar-action world on `grid_size` points at `(j + 0.5) / G`.
    pub fn from_world(world: &WorldModel, grid_size: usize) -> Result<Self> {
        if grid_size < 2 {
            return Err(Error::param("grid_size", "must be at least 2"));
        }
        if world.action_dim() != 1 {
            return Err(Error::param(
                "action_dim",
                "grid discretization supports scalar actions only",
            ));
        }
        let grid: Vec<f64> = (0..grid_size)
            .map(|j| (j as f64 + 0.5) / grid_size as f64)
            .collect();
        let utility = (0..world.num_worlds())
            .map(|w| grid.iter().map(|&a| world.utility(w, &[a])).collect())
            .collect();
        Ok(DiscreteProblem {
            rho: world.rho().to_vec(),
            grid,
            utility,
        })
    }

    /// A problem given directly as a utility table; grid points are placed
    /// at `(j + 0.5) / G` for reporting only.
    pub fn from_table(rho: Vec<f64>, table: Vec<Vec<f64>>) -> Result<Self> {
        if rho.is_empty() || table.is_empty() {
            return Err(Error::Empty("utility table"));
        }
        if rho.len() != table.len() {
            return Err(Error::Shape(format!(
                "rho has {} entries but table has {} rows",
                rho.len(),
                table.len()
            )));
        }
        let g = table[0].len();
        if g == 0 || table.iter().any(|row| row.len() != g) {
            return Err(Error::Shape(
                "table rows must share a nonzero length".into(),
            ));
        }
        let total: f64 = rho.iter().sum();
        if rho.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::param("rho", "must be a probability vector"));
        }
        let grid = (0..g).map(|j| (j as f64 + 0.5) / g as f64).collect();
        Ok(DiscreteProblem {
            rho,
            grid,
            utility: table,
        })
    }

    pub fn num_worlds(&self) -> usize {
        self.rho.len()
    }

    pub fn grid_size(&self) -> usize {
        self.grid.len()
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn utility_row(&self, world: usize) -> &[f64] {
        &self.utility[world]
    }
}

/// `Σ_w ρ(w) Σ_j p(j|w) U(w, j)`.
pub fn expected_utility(problem: &DiscreteProblem, cond: &[Vec<f64>]) -> f64 {
    problem
        .rho
        .iter()
        .zip(cond)
        .zip(&problem.utility)
        .map(|((&r, row), u)| r * dot(row, u))
        .sum()
}

/// Expected utility minus `(1/β) Σ_w ρ(w) KL(p(a|w) ‖ p(a))`, in nats.
///
/// `marginal` is taken as given; at a fixed point it is the induced
/// marginal and the KL term equals the mutual information.
pub fn free_energy(
    problem: &DiscreteProblem,
    cond: &[Vec<f64>],
    marginal: &[f64],
    beta: f64,
) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::param(
            "beta",
            "free energy needs beta > 0; use expected_utility for beta = 0",
        ));
    }
    let kl: f64 = problem
        .rho
        .iter()
        .zip(cond)
        .map(|(&r, row)| r * kl_nats(row, marginal))
        .sum();
    Ok(expected_utility(problem, cond) - kl / beta)
}

/// `I(W;A)` in bits for a world distribution and conditional rows,
/// using the induced marginal. `0 log 0 := 0`.
pub fn mutual_information(rho: &[f64], cond: &[Vec<f64>]) -> f64 {
    let marginal = mix(rho, cond);
    let nats: f64 = rho
        .iter()
        .zip(cond)
        .map(|(&r, row)| r * kl_nats(row, &marginal))
        .sum();
    // Rounding can leave a tiny negative value when rows coincide.
    (nats / core::f64::consts::LN_2).max(0.0)
}

/// `KL(p ‖ q)` in nats with `0 log 0 := 0`.
///
/// Mass below `f64::MIN_POSITIVE` counts as zero: mixing such entries
/// into a marginal can underflow to an exact zero.
pub fn kl_nats(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi >= f64::MIN_POSITIVE)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum()
}

/// `Σ_w weights[w] · rows[w]`.
pub(crate) fn mix(weights: &[f64], rows: &[Vec<f64>]) -> Vec<f64> {
    let mut out = alloc::vec![0.0; rows.first().map_or(0, Vec::len)];
    for (&wt, row) in weights.iter().zip(rows) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += wt * v;
        }
    }
    out
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Writes `prior · exp(beta · utility)` normalized into `out`, working in
/// the log domain with max subtraction so large `beta` cannot overflow.
pub(crate) fn boltzmann_into(prior: &[f64], utility: &[f64], beta: f64, out: &mut [f64]) {
    let mut max = f64::NEG_INFINITY;
    for ((o, &p), &u) in out.iter_mut().zip(prior).zip(utility) {
        *o = if p > 0.0 {
            p.ln() + beta * u
        } else {
            f64::NEG_INFINITY
        };
        max = max.max(*o);
    }
    let mut z = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}
