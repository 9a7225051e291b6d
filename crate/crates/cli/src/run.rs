//! The `run` command: trains single-prior agents and multi-prior systems
//! over a sweep of step budgets and summarizes the final episodes.

use std::path::PathBuf;

use brdm_core::agents::{
    delta_u_stats, empirical_mutual_information, final_window, train_system, EpisodeRecord,
};
use brdm_core::vae::VaePrior;
use brdm_core::{make_gaussian_task, RngState, WorldModel};
use rayon::prelude::*;

use crate::config::{AgentKind, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::formats::write_snapshot;
use crate::output::OutputDir;
use crate::table::{fmt_float, render};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_HEADER: [&str; 8] = [
    "agent_kind",
    "total_steps",
    "action_steps",
    "replicate",
    "mi_bits",
    "expected_utility",
    "mean_delta_u",
    "stddev_delta_u",
];
pub const EPISODE_HEADER: [&str; 8] = [
    "episode",
    "world",
    "prior",
    "seed_action",
    "decision",
    "utility",
    "seed_utility",
    "evals",
];

/// One trained system of the sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    /// Position in the sweep; selects the cell's random stream.
    pub index: usize,
    pub kind: AgentKind,
    pub total_steps: usize,
    pub selection_steps: usize,
    pub replicate: usize,
}

impl Cell {
    pub fn action_steps(&self) -> usize {
        self.total_steps - self.selection_steps
    }

    /// File stem shared by the cell's episode log and prior snapshots.
    pub fn stem(&self) -> String {
        format!(
            "{}_t{}_a{}_r{}",
            self.kind,
            self.total_steps,
            self.action_steps(),
            self.replicate
        )
    }
}

/// Sweep cells in output order: agent kind, then total budget, then
/// selection share (multi-prior only), then replicate.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut kinds = cfg.agents.clone();
    kinds.sort();
    kinds.dedup();
    let mut out = Vec::new();
    for kind in kinds {
        for &total in &cfg.total_steps {
            let splits = match kind {
                AgentKind::Single => vec![0],
                AgentKind::Multi => cfg.selection_steps.clone(),
            };
            for selection in splits {
                for replicate in 0..cfg.replicates {
                    out.push(Cell {
                        index: out.len(),
                        kind,
                        total_steps: total,
                        selection_steps: selection,
                        replicate,
                    });
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub kind: AgentKind,
    pub total_steps: usize,
    pub action_steps: usize,
    pub replicate: usize,
    pub mi_bits: f64,
    pub expected_utility: f64,
    pub mean_delta_u: f64,
    pub stddev_delta_u: f64,
}

impl SummaryRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.kind.to_string(),
            self.total_steps.to_string(),
            self.action_steps.to_string(),
            self.replicate.to_string(),
            fmt_float(self.mi_bits),
            fmt_float(self.expected_utility),
            fmt_float(self.mean_delta_u),
            fmt_float(self.stddev_delta_u),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct CellResult {
    pub cell: Cell,
    pub records: Vec<EpisodeRecord>,
    pub priors: Vec<VaePrior>,
    pub summary: SummaryRow,
}

/// Trains one cell from its own stream of the master seed.
pub fn run_cell(cfg: &ExperimentConfig, world: &WorldModel, cell: Cell) -> Result<CellResult> {
    let system_cfg = cfg.system_config(cell.kind, cell.total_steps, cell.selection_steps);
    let mut rng = RngState::for_stream(cfg.seed, cell.index as u64);
    let (system, records) = train_system(world, &system_cfg, cfg.episodes, &mut rng)?;

    let expected = system_cfg.evaluations_per_episode() * cfg.episodes;
    let spent: usize = records.iter().map(|r| r.utility_evaluations).sum();
    if spent != expected {
        return Err(CliError::Check(format!(
            "cell {}: {spent} utility evaluations, budget accounts for {expected}",
            cell.stem()
        )));
    }

    let tail = final_window(&records, cfg.final_fraction);
    let (mean_delta_u, stddev_delta_u) = delta_u_stats(tail)?;
    let summary = SummaryRow {
        kind: cell.kind,
        total_steps: cell.total_steps,
        action_steps: cell.action_steps(),
        replicate: cell.replicate,
        mi_bits: window_mutual_information(tail, world.rho(), cfg.mi_bins)?,
        expected_utility: tail.iter().map(|r| r.utility).sum::<f64>() / tail.len() as f64,
        mean_delta_u,
        stddev_delta_u,
    };
    Ok(CellResult {
        cell,
        priors: system.priors().to_vec(),
        records,
        summary,
    })
}

/// Information estimate over a window. Short runs can leave a world out
/// of the window entirely; `rho` is then renormalized over the worlds that
/// do appear.
fn window_mutual_information(tail: &[EpisodeRecord], rho: &[f64], bins: usize) -> Result<f64> {
    let mut seen = vec![false; rho.len()];
    for r in tail {
        seen[r.world] = true;
    }
    let mass: f64 = rho
        .iter()
        .zip(&seen)
        .filter(|(_, s)| **s)
        .map(|(p, _)| p)
        .sum();
    let restricted: Vec<f64> = rho
        .iter()
        .zip(&seen)
        .map(|(p, s)| if *s { p / mass } else { 0.0 })
        .collect();
    let rho = if seen.iter().all(|s| *s) {
        rho
    } else {
        &restricted
    };
    Ok(empirical_mutual_information(tail, rho, bins)?)
}

/// Runs cells on a pool of `workers` threads (0 = available parallelism).
/// Results come back in the order of `cells`, whatever the schedule.
pub fn run_cells(
    cfg: &ExperimentConfig,
    cells: &[Cell],
    workers: usize,
) -> Result<Vec<CellResult>> {
    let world = make_gaussian_task(&cfg.task)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Pool(e.to_string()))?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|&cell| run_cell(cfg, &world, cell))
            .collect()
    })
}

pub fn summary_csv(results: &[CellResult]) -> String {
    let rows: Vec<Vec<String>> = results.iter().map(|r| r.summary.fields()).collect();
    render(&SUMMARY_HEADER, &rows)
}

fn action_field(action: &[f64]) -> String {
    action
        .iter()
        .map(|&a| fmt_float(a))
        .collect::<Vec<_>>()
        .join(";")
}

/// Episode log of one cell. Multi-coordinate actions are `;`-joined.
pub fn episode_csv(records: &[EpisodeRecord]) -> String {
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.episode.to_string(),
                r.world.to_string(),
                r.selected_prior.to_string(),
                action_field(&r.seed_action),
                action_field(&r.decision),
                fmt_float(r.utility),
                fmt_float(r.seed_utility),
                r.utility_evaluations.to_string(),
            ]
        })
        .collect();
    render(&EPISODE_HEADER, &rows)
}

fn episode_path(cell: &Cell) -> PathBuf {
    PathBuf::from("episodes").join(format!("{}.csv", cell.stem()))
}

fn prior_path(cell: &Cell, x: usize) -> PathBuf {
    PathBuf::from("priors").join(format!("{}_prior{x}.txt", cell.stem()))
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub summary_path: PathBuf,
    pub cells: usize,
    pub files_written: usize,
}

pub fn cmd_run(cfg: &ExperimentConfig, out: &OutputDir, workers: usize) -> Result<RunReport> {
    let cells = cells(cfg);
    let mut targets: Vec<PathBuf> = vec![SUMMARY_FILE.into()];
    targets.extend(cells.iter().map(episode_path));
    if cfg.save_priors {
        for c in &cells {
            let n = cfg
                .system_config(c.kind, c.total_steps, c.selection_steps)
                .num_priors;
            targets.extend((0..n).map(|x| prior_path(c, x)));
        }
    }
    out.claim(&targets)?;

    let results = run_cells(cfg, &cells, workers)?;
    let mut written = 0;
    for r in &results {
        out.write(episode_path(&r.cell), &episode_csv(&r.records))?;
        written += 1;
        if cfg.save_priors {
            for (x, prior) in r.priors.iter().enumerate() {
                out.write(prior_path(&r.cell, x), &write_snapshot(prior))?;
                written += 1;
            }
        }
    }
    let summary_path = out.write(SUMMARY_FILE, &summary_csv(&results))?;
    Ok(RunReport {
        summary_path,
        cells: results.len(),
        files_written: written + 1,
    })
}
