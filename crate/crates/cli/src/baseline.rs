//! The `baseline` command: the exact rate-distortion frontier of the task.

use std::path::PathBuf;

use brdm_core::baseline::{rate_distortion_curve, DiscreteProblem, FrontierPoint};
use brdm_core::make_gaussian_task;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::OutputDir;
use crate::table::{fmt_float, render};

pub const FRONTIER_FILE: &str = "frontier.csv";
pub const FRONTIER_HEADER: [&str; 3] = ["beta", "mi_bits", "expected_utility"];

/// Solves the frontier at the configured `betas`, sorted ascending.
pub fn frontier_points(cfg: &ExperimentConfig) -> Result<Vec<FrontierPoint>> {
    let world = make_gaussian_task(&cfg.task)?;
    let problem = DiscreteProblem::from_world(&world, cfg.grid_size)?;
    let mut betas = cfg.betas.clone();
    betas.sort_by(f64::total_cmp);
    Ok(rate_distortion_curve(&problem, &betas, &cfg.solver)?)
}

/// CSV text of a frontier. A `converged` column is appended only when some
/// solve hit the iteration limit.
pub fn frontier_csv(points: &[FrontierPoint]) -> String {
    let flag = points.iter().any(|p| !p.converged);
    let mut header = FRONTIER_HEADER.to_vec();
    if flag {
        header.push("converged");
    }
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let mut row = vec![
                fmt_float(p.beta),
                fmt_float(p.mi_bits),
                fmt_float(p.expected_utility),
            ];
            if flag {
                row.push(p.converged.to_string());
            }
            row
        })
        .collect();
    render(&header, &rows)
}

pub fn cmd_baseline(cfg: &ExperimentConfig, out: &OutputDir) -> Result<PathBuf> {
    out.claim(&[FRONTIER_FILE])?;
    let points = frontier_points(cfg)?;
    out.write(FRONTIER_FILE, &frontier_csv(&points))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_zero_alone() {
        let cfg = ExperimentConfig {
            betas: vec![0.0],
            ..ExperimentConfig::default()
        };
        let text = frontier_csv(&frontier_points(&cfg).unwrap());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "beta,mi_bits,expected_utility");
        assert!(lines[1].starts_with("0,0,"), "{}", lines[1]);
    }

    #[test]
    fn unsorted_betas_are_sorted() {
        let cfg = ExperimentConfig {
            betas: vec![5.0, 0.0, 1.0],
            ..ExperimentConfig::default()
        };
        let pts = frontier_points(&cfg).unwrap();
        let betas: Vec<f64> = pts.iter().map(|p| p.beta).collect();
        assert_eq!(betas, vec![0.0, 1.0, 5.0]);
    }

    #[test]
    fn converged_column_only_when_needed() {
        let p = |converged| FrontierPoint {
            beta: 1.0,
            mi_bits: 0.5,
            expected_utility: 0.25,
            converged,
        };
        assert_eq!(
            frontier_csv(&[p(true)]),
            "beta,mi_bits,expected_utility\n1,0.5,0.25\n"
        );
        assert_eq!(
            frontier_csv(&[p(true), p(false)]),
            "beta,mi_bits,expected_utility,converged\n1,0.5,0.25,true\n1,0.5,0.25,false\n"
        );
    }
}
