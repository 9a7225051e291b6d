use alloc::vec;
use alloc::vec::Vec;

use super::{
    boltzmann_into, expected_utility, free_energy, max_abs_diff, mix, mutual_information,
    Convergence, DiscreteProblem, SolverOptions,
};
use crate::{Error, Result};

/// Conditional action distribution `p(a|w)` on a grid, with its marginal.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePolicy {
    pub grid: Vec<f64>,
    /// `cond[w][j] = p(grid[j] | w)`.
    pub cond: Vec<Vec<f64>>,
    pub marginal: Vec<f64>,
}

impl DiscretePolicy {
    pub fn uniform(problem: &DiscreteProblem) -> Self {
        let g = problem.grid_size();
        let p = 1.0 / g as f64;
        DiscretePolicy {
            grid: problem.grid().to_vec(),
            cond: vec![vec![p; g]; problem.num_worlds()],
            marginal: vec![p; g],
        }
    }

    pub fn mutual_information_bits(&self, rho: &[f64]) -> f64 {
        mutual_information(rho, &self.cond)
    }

    pub fn expected_utility(&self, problem: &DiscreteProblem) -> f64 {
        expected_utility(problem, &self.cond)
    }

    pub fn free_energy(&self, problem: &DiscreteProblem, beta: f64) -> Result<f64> {
        free_energy(problem, &self.cond, &self.marginal, beta)
    }
}

#[derive(Clone, Debug)]
pub struct SingleStageSolution {
    pub policy: DiscretePolicy,
    pub beta: f64,
    pub convergence: Convergence,
    /// Objective after every iteration: free energy for `beta > 0`,
    /// expected utility for `beta = 0`.
    pub objective_trace: Vec<f64>,
}

impl SingleStageSolution {
    /// Max-norm violation of the two self-consistent equations on the
    /// final state, re-evaluated from scratch.
    pub fn equation_residuals(&self, problem: &DiscreteProblem) -> [f64; 2] {
        let mut row = vec![0.0; problem.grid_size()];
        let mut cond_res: f64 = 0.0;
        for (w, cur) in self.policy.cond.iter().enumerate() {
            boltzmann_into(
                &self.policy.marginal,
                problem.utility_row(w),
                self.beta,
                &mut row,
            );
            cond_res = cond_res.max(max_abs_diff(&row, cur));
        }
        let marg = mix(problem.rho(), &self.policy.cond);
        [cond_res, max_abs_diff(&marg, &self.policy.marginal)]
    }
}

/// Alternates `p(a|w) ∝ p(a) exp(β U(w,a))` and `p(a) = Σ_w ρ(w) p(a|w)`
/// from a uniform start.
pub fn solve_single_stage(
    problem: &DiscreteProblem,
    beta: f64,
    opts: &SolverOptions,
) -> Result<SingleStageSolution> {
    let g = problem.grid_size();
    solve_single_stage_from(problem, beta, opts, &vec![1.0 / g as f64; g])
}

/// Same iteration, started from a given marginal (warm start).
pub fn solve_single_stage_from(
    problem: &DiscreteProblem,
    beta: f64,
    opts: &SolverOptions,
    initial_marginal: &[f64],
) -> Result<SingleStageSolution> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::param("beta", "must be finite and nonnegative"));
    }
    if initial_marginal.len() != problem.grid_size() {
        return Err(Error::Shape(
            "initial marginal length differs from grid".into(),
        ));
    }
    let mut marginal = initial_marginal.to_vec();
    let mut cond = vec![marginal.clone(); problem.num_worlds()];
    let mut next = cond.clone();
    let mut trace = Vec::new();
    let mut convergence = Convergence {
        iterations: 0,
        residual: f64::INFINITY,
        converged: false,
    };

    for it in 1..=opts.max_iter {
        let mut residual: f64 = 0.0;
        for (w, row) in next.iter_mut().enumerate() {
            boltzmann_into(&marginal, problem.utility_row(w), beta, row);
            residual = residual.max(max_abs_diff(row, &cond[w]));
        }
        core::mem::swap(&mut cond, &mut next);
        let new_marginal = mix(problem.rho(), &cond);
        residual = residual.max(max_abs_diff(&new_marginal, &marginal));
        marginal = new_marginal;

        trace.push(if beta > 0.0 {
            free_energy(problem, &cond, &marginal, beta)?
        } else {
            expected_utility(problem, &cond)
        });
        convergence = Convergence {
            iterations: it,
            residual,
            converged: residual < opts.tol,
        };
        if convergence.converged {
            break;
        }
    }

    Ok(SingleStageSolution {
        policy: DiscretePolicy {
            grid: problem.grid().to_vec(),
            cond,
            marginal,
        },
        beta,
        convergence,
        objective_trace: trace,
    })
}
