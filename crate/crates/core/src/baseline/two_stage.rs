use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{
    boltzmann_into, dot, kl_nats, max_abs_diff, mix, Convergence, DiscreteProblem, SolverOptions,
};
use crate::{Error, Result, RngState};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoStageOptions {
    pub solver: SolverOptions,
    /// Relative amplitude of the zero-mean noise on the initial `p(a|w,x)`.
    /// The perfectly symmetric start is a repelling fixed point.
    pub perturbation: f64,
    pub perturbation_seed: u64,
}

impl Default for TwoStageOptions {
    fn default() -> Self {
        TwoStageOptions {
            solver: SolverOptions::default(),
            perturbation: 1e-3,
            perturbation_seed: 0,
        }
    }
}

/// The five coupled quantities of the two-stage problem: prior selection
/// `p(x|w)`, its marginal `p(x)`, action posteriors `p(a|w,x)`, action
/// priors `p(a|x)`, and the action-stage free energies `ΔF(w,x)`.
#[derive(Clone, Debug)]
pub struct TwoStageSolution {
    pub num_priors: usize,
    /// `[w][x]`
    pub px_given_w: Vec<Vec<f64>>,
    pub px: Vec<f64>,
    /// `[w][x][j]`
    pub pa_given_wx: Vec<Vec<Vec<f64>>>,
    /// `[x][j]`
    pub pa_given_x: Vec<Vec<f64>>,
    /// `[w][x]`, nats.
    pub delta_f: Vec<Vec<f64>>,
    pub beta1: f64,
    pub beta2: f64,
    pub convergence: Convergence,
    /// More priors than worlds: some priors necessarily go unused.
    pub degenerate: bool,
}

impl TwoStageSolution {
    /// Bayesian posterior `p(w|x)`, indexed `[x][w]`.
    pub fn posterior_w_given_x(&self, rho: &[f64]) -> Vec<Vec<f64>> {
        (0..self.num_priors)
            .map(|x| posterior_column(rho, &self.px_given_w, &self.px, x))
            .collect()
    }

    /// The most likely prior for every world (lowest index on ties).
    pub fn partition(&self) -> Vec<usize> {
        self.px_given_w.iter().map(|row| argmax(row)).collect()
    }

    /// Expected utility of the full two-stage policy.
    pub fn expected_utility(&self, problem: &DiscreteProblem) -> f64 {
        (0..problem.num_worlds())
            .map(|w| {
                let u = problem.utility_row(w);
                problem.rho()[w]
                    * self.px_given_w[w]
                        .iter()
                        .zip(&self.pa_given_wx[w])
                        .map(|(&pxw, row)| pxw * dot(row, u))
                        .sum::<f64>()
            })
            .sum()
    }

    /// Max-norm violation of each of the five equations, re-evaluated on
    /// the final state in the order they are iterated.
    pub fn equation_residuals(&self, problem: &DiscreteProblem) -> [f64; 5] {
        let mut res = [0.0f64; 5];
        let mut row_x = vec![0.0; self.num_priors];
        let mut row_a = vec![0.0; problem.grid_size()];
        for w in 0..problem.num_worlds() {
            boltzmann_into(&self.px, &self.delta_f[w], self.beta1, &mut row_x);
            res[0] = res[0].max(max_abs_diff(&row_x, &self.px_given_w[w]));
        }
        res[1] = max_abs_diff(&mix(problem.rho(), &self.px_given_w), &self.px);
        for w in 0..problem.num_worlds() {
            for x in 0..self.num_priors {
                boltzmann_into(
                    &self.pa_given_x[x],
                    problem.utility_row(w),
                    self.beta2,
                    &mut row_a,
                );
                res[2] = res[2].max(max_abs_diff(&row_a, &self.pa_given_wx[w][x]));
            }
        }
        for x in 0..self.num_priors {
            if self.px[x] > 0.0 {
                let post = posterior_column(problem.rho(), &self.px_given_w, &self.px, x);
                let rows: Vec<Vec<f64>> = self
                    .pa_given_wx
                    .iter()
                    .map(|per_x| per_x[x].clone())
                    .collect();
                res[3] = res[3].max(max_abs_diff(&mix(&post, &rows), &self.pa_given_x[x]));
            }
        }
        for w in 0..problem.num_worlds() {
            for x in 0..self.num_priors {
                let f = action_free_energy(
                    &self.pa_given_wx[w][x],
                    &self.pa_given_x[x],
                    problem.utility_row(w),
                    self.beta2,
                );
                res[4] = res[4].max((f - self.delta_f[w][x]).abs());
            }
        }
        res
    }
}

/// Iterates the five self-consistent equations of the two-stage problem in
/// order: `p(x|w)`, `p(x)`, `p(a|w,x)`, `p(a|x)`, `ΔF(w,x)`.
pub fn solve_two_stage(
    problem: &DiscreteProblem,
    beta1: f64,
    beta2: f64,
    num_priors: usize,
    opts: &TwoStageOptions,
) -> Result<TwoStageSolution> {
    for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
        if !(b >= 0.0) || !b.is_finite() {
            return Err(Error::param(name, "must be finite and nonnegative"));
        }
    }
    if num_priors == 0 {
        return Err(Error::param("num_priors", "must be at least 1"));
    }
    let nw = problem.num_worlds();
    let g = problem.grid_size();
    let rho = problem.rho();

    let mut px_given_w = vec![vec![1.0 / num_priors as f64; num_priors]; nw];
    let mut px = vec![1.0 / num_priors as f64; num_priors];

    let mut pa_given_wx = initial_action_rows(problem, num_priors, opts);
    let mut pa_given_x: Vec<Vec<f64>> = (0..num_priors)
        .map(|x| {
            let rows: Vec<Vec<f64>> = pa_given_wx.iter().map(|per_x| per_x[x].clone()).collect();
            mix(rho, &rows)
        })
        .collect();
    let mut delta_f: Vec<Vec<f64>> = (0..nw)
        .map(|w| {
            (0..num_priors)
                .map(|x| {
                    action_free_energy(
                        &pa_given_wx[w][x],
                        &pa_given_x[x],
                        problem.utility_row(w),
                        beta2,
                    )
                })
                .collect()
        })
        .collect();

    let mut row_x = vec![0.0; num_priors];
    let mut row_a = vec![0.0; g];
    let mut convergence = Convergence {
        iterations: 0,
        residual: f64::INFINITY,
        converged: false,
    };

    for it in 1..=opts.solver.max_iter {
        let mut residual: f64 = 0.0;

        for w in 0..nw {
            boltzmann_into(&px, &delta_f[w], beta1, &mut row_x);
            residual = residual.max(max_abs_diff(&row_x, &px_given_w[w]));
            px_given_w[w].copy_from_slice(&row_x);
        }

        let new_px = mix(rho, &px_given_w);
        residual = residual.max(max_abs_diff(&new_px, &px));
        px = new_px;

        for w in 0..nw {
            for x in 0..num_priors {
                boltzmann_into(&pa_given_x[x], problem.utility_row(w), beta2, &mut row_a);
                residual = residual.max(max_abs_diff(&row_a, &pa_given_wx[w][x]));
                pa_given_wx[w][x].copy_from_slice(&row_a);
            }
        }

        for x in 0..num_priors {
            // An unused prior has no posterior over worlds; leave it as is.
            if px[x] > 0.0 {
                let post = posterior_column(rho, &px_given_w, &px, x);
                row_a.iter_mut().for_each(|v| *v = 0.0);
                for (w, &pw) in post.iter().enumerate() {
                    for (o, &v) in row_a.iter_mut().zip(&pa_given_wx[w][x]) {
                        *o += pw * v;
                    }
                }
                residual = residual.max(max_abs_diff(&row_a, &pa_given_x[x]));
                pa_given_x[x].copy_from_slice(&row_a);
            }
        }

        for w in 0..nw {
            for x in 0..num_priors {
                let f = action_free_energy(
                    &pa_given_wx[w][x],
                    &pa_given_x[x],
                    problem.utility_row(w),
                    beta2,
                );
                residual = residual.max((f - delta_f[w][x]).abs());
                delta_f[w][x] = f;
            }
        }

        convergence = Convergence {
            iterations: it,
            residual,
            converged: residual < opts.solver.tol,
        };
        if convergence.converged {
            break;
        }
    }

    Ok(TwoStageSolution {
        num_priors,
        px_given_w,
        px,
        pa_given_wx,
        pa_given_x,
        delta_f,
        beta1,
        beta2,
        convergence,
        degenerate: num_priors > nw,
    })
}

/// Uniform rows with zero-mean noise. A single prior has no symmetry to
/// break, so it starts exactly uniform.
fn initial_action_rows(
    problem: &DiscreteProblem,
    num_priors: usize,
    opts: &TwoStageOptions,
) -> Vec<Vec<Vec<f64>>> {
    let amplitude = if num_priors > 1 {
        opts.perturbation
    } else {
        0.0
    };
    let mut noise = RngState::new(opts.perturbation_seed);
    (0..problem.num_worlds())
        .map(|_| {
            (0..num_priors)
                .map(|_| {
                    let mut row: Vec<f64> = (0..problem.grid_size())
                        .map(|_| 1.0 + amplitude * noise.random_range(-1.0..=1.0))
                        .collect();
                    let z: f64 = row.iter().sum();
                    row.iter_mut().for_each(|v| *v /= z);
                    row
                })
                .collect()
        })
        .collect()
}

/// `E_{p(a|w,x)}[U] − (1/β₂) KL(p(a|w,x) ‖ p(a|x))`; the KL term vanishes
/// at `β₂ = 0` because the posterior then equals the prior.
fn action_free_energy(post: &[f64], prior: &[f64], utility: &[f64], beta2: f64) -> f64 {
    let eu = dot(post, utility);
    if beta2 > 0.0 {
        eu - kl_nats(post, prior) / beta2
    } else {
        eu
    }
}

fn posterior_column(rho: &[f64], px_given_w: &[Vec<f64>], px: &[f64], x: usize) -> Vec<f64> {
    rho.iter()
        .zip(px_given_w)
        .map(|(&r, row)| r * row[x] / px[x])
        .collect()
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}
