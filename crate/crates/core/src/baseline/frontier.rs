use alloc::vec::Vec;

use super::{solve_single_stage_from, DiscreteProblem, SolverOptions};
use crate::{Error, Result};

/// One point of the rate-distortion efficiency frontier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrontierPoint {
    pub beta: f64,
    pub mi_bits: f64,
    pub expected_utility: f64,
    pub converged: bool,
}

/// Solves the single-stage problem for every `beta` (ascending), warm
/// starting each solve from the previous marginal.
pub fn rate_distortion_curve(
    problem: &DiscreteProblem,
    betas: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<FrontierPoint>> {
    if betas.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::param("betas", "must be sorted ascending"));
    }
    let g = problem.grid_size();
    let mut marginal = alloc::vec![1.0 / g as f64; g];
    let mut points = Vec::with_capacity(betas.len());
    for &beta in betas {
        let sol = solve_single_stage_from(problem, beta, opts, &marginal)?;
        points.push(FrontierPoint {
            beta,
            mi_bits: sol.policy.mutual_information_bits(problem.rho()),
            expected_utility: sol.policy.expected_utility(problem),
            converged: sol.convergence.converged,
        });
        marginal = sol.policy.marginal;
    }
    Ok(points)
}

/// Frontier expected utility at a given information rate, by linear
/// interpolation in `mi_bits`. Below the first point the first utility is
/// returned, beyond the last point the last one.
pub fn frontier_utility_at(points: &[FrontierPoint], mi_bits: f64) -> Option<f64> {
    let first = points.first()?;
    let last = points.last()?;
    if mi_bits <= first.mi_bits {
        return Some(first.expected_utility);
    }
    if mi_bits >= last.mi_bits {
        return Some(last.expected_utility);
    }
    for w in points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if mi_bits <= b.mi_bits {
            let span = b.mi_bits - a.mi_bits;
            if span <= 0.0 {
                return Some(a.expected_utility.max(b.expected_utility));
            }
            let t = (mi_bits - a.mi_bits) / span;
            return Some(a.expected_utility + t * (b.expected_utility - a.expected_utility));
        }
    }
    Some(last.expected_utility)
}
