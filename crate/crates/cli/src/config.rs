//! Experiment configuration in a flat `key = value` text format.
//!
//! One assignment per line, `#` starts a comment, list values are
//! comma-separated. Every key is optional; [`ExperimentConfig::default`]
//! documents the defaults and [`ExperimentConfig::to_text`] writes a file
//! that parses back to the same config.
//!
//! ```text
//! # six worlds, three priors
//! num_worlds = 6
//! total_steps = 25, 50, 100
//! selection_steps = 10
//! agents = single, multi
//! ```

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use brdm_core::agents::{BudgetSplit, SystemConfig, TrainingSchedule};
use brdm_core::baseline::SolverOptions;
use brdm_core::mcmc::{ChainConfig, SelectionConfig};
use brdm_core::vae::{Activation, VaeArch};
use brdm_core::GaussianTaskSpec;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("line {line}: `{key}` set twice")]
    Duplicate { line: usize, key: String },

    #[error("line {line}: `{key}`: {message}")]
    Value {
        line: usize,
        key: String,
        message: String,
    },

    #[error("{}: {message}", quoted(keys))]
    Constraint { keys: Vec<String>, message: String },
}

fn quoted(keys: &[String]) -> String {
    keys.iter()
        .map(|k| format!("`{k}`"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl ConfigError {
    fn constraint(keys: &[&str], message: impl Into<String>) -> Self {
        ConfigError::Constraint {
            keys: keys.iter().map(|k| k.to_string()).collect(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum AgentKind {
    Single,
    Multi,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Single => "single",
            AgentKind::Multi => "multi",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "single" => Ok(AgentKind::Single),
            "multi" => Ok(AgentKind::Multi),
            _ => Err(format!("expected `single` or `multi`, got `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub task: GaussianTaskSpec,
    /// Priors of a multi-prior system.
    pub num_priors: usize,
    /// Action-chain parameters; `n_max` is set per sweep cell.
    pub chain: ChainConfig,
    /// Prior-selection parameters; `n_max` is set per sweep cell.
    pub selection: SelectionConfig,
    pub vae: VaeArch,
    pub training: TrainingSchedule,

    pub agents: Vec<AgentKind>,
    /// Per-episode step budgets to sweep.
    pub total_steps: Vec<usize>,
    /// Selection-stage shares of each budget for multi-prior cells.
    pub selection_steps: Vec<usize>,
    pub replicates: usize,
    pub episodes: usize,
    /// Trailing share of each episode log used for the summary.
    pub final_fraction: f64,
    /// Histogram bins per action coordinate for the information estimate.
    pub mi_bins: usize,
    /// Write every trained prior's weights next to the episode logs.
    pub save_priors: bool,

    pub betas: Vec<f64>,
    pub grid_size: usize,
    pub solver: SolverOptions,

    pub seed: u64,
    pub output_dir: PathBuf,
}

/// `0` followed by 40 log-spaced values from 0.1 to 10⁴.
pub fn default_betas() -> Vec<f64> {
    std::iter::once(0.0)
        .chain((0..40).map(|i| 10f64.powf(-1.0 + 5.0 * i as f64 / 39.0)))
        .collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: GaussianTaskSpec::default(),
            num_priors: 3,
            chain: ChainConfig::default(),
            selection: SelectionConfig::default(),
            vae: VaeArch::default(),
            training: TrainingSchedule::default(),
            agents: vec![AgentKind::Single, AgentKind::Multi],
            total_steps: vec![100],
            selection_steps: vec![10],
            replicates: 20,
            episodes: 5000,
            final_fraction: 0.1,
            mi_bins: 100,
            save_priors: false,
            betas: default_betas(),
            grid_size: 100,
            solver: SolverOptions::default(),
            seed: 0,
            output_dir: PathBuf::from("results"),
        }
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(parse_config(&text)?)
}

/// Parses and validates config text.
pub fn parse_config(text: &str) -> std::result::Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    let mut seen: Vec<String> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                message: "missing key before `=`".into(),
            });
        }
        if seen.iter().any(|k| k == key) {
            return Err(ConfigError::Duplicate {
                line,
                key: key.into(),
            });
        }
        apply(&mut cfg, key, value).map_err(|e| match e {
            Assign::Unknown => ConfigError::UnknownKey {
                line,
                key: key.into(),
            },
            Assign::Bad(message) => ConfigError::Value {
                line,
                key: key.into(),
                message,
            },
        })?;
        seen.push(key.into());
    }
    cfg.validate()?;
    Ok(cfg)
}

enum Assign {
    Unknown,
    Bad(String),
}

fn scalar<T: std::str::FromStr>(value: &str) -> std::result::Result<T, Assign>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| Assign::Bad(format!("cannot parse `{value}`: {e}")))
}

fn list<T: std::str::FromStr>(value: &str) -> std::result::Result<Vec<T>, Assign>
where
    T::Err: fmt::Display,
{
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|item| scalar(item.trim())).collect()
}

fn apply(cfg: &mut ExperimentConfig, key: &str, value: &str) -> std::result::Result<(), Assign> {
    match key {
        "num_worlds" => cfg.task.num_worlds = scalar(value)?,
        "width" => cfg.task.width = scalar(value)?,
        "means" => {
            let means: Vec<f64> = list(value)?;
            cfg.task.means = (!means.is_empty()).then_some(means);
        }
        "num_priors" => cfg.num_priors = scalar(value)?,
        "gamma0" => cfg.chain.gamma0 = scalar(value)?,
        "alpha" => cfg.chain.alpha = scalar(value)?,
        "proposal_sigma" => cfg.chain.proposal_sigma = scalar(value)?,
        "selection_gamma0" => cfg.selection.gamma0 = scalar(value)?,
        "selection_alpha" => cfg.selection.alpha = scalar(value)?,
        "utility_samples" => cfg.selection.utility_samples = scalar(value)?,
        "hidden_dim" => cfg.vae.hidden_dim = scalar(value)?,
        "latent_dim" => cfg.vae.latent_dim = scalar(value)?,
        "decoder_variance" => cfg.vae.decoder_variance = scalar(value)?,
        "activation" => {
            cfg.vae.activation = match value {
                "relu" => Activation::Relu,
                "sigmoid" => Activation::Sigmoid,
                _ => {
                    return Err(Assign::Bad(format!(
                        "expected `relu` or `sigmoid`, got `{value}`"
                    )))
                }
            }
        }
        "step_size" => cfg.training.step_size = scalar(value)?,
        "buffer_capacity" => cfg.training.buffer_capacity = scalar(value)?,
        "batch_size" => cfg.training.batch_size = scalar(value)?,
        "train_steps_per_episode" => cfg.training.steps_per_episode = scalar(value)?,
        "agents" => cfg.agents = list(value)?,
        "total_steps" => cfg.total_steps = list(value)?,
        "selection_steps" => cfg.selection_steps = list(value)?,
        "replicates" => cfg.replicates = scalar(value)?,
        "episodes" => cfg.episodes = scalar(value)?,
        "final_fraction" => cfg.final_fraction = scalar(value)?,
        "mi_bins" => cfg.mi_bins = scalar(value)?,
        "save_priors" => cfg.save_priors = scalar(value)?,
        "betas" => cfg.betas = list(value)?,
        "grid_size" => cfg.grid_size = scalar(value)?,
        "solver_tol" => cfg.solver.tol = scalar(value)?,
        "solver_max_iter" => cfg.solver.max_iter = scalar(value)?,
        "seed" => cfg.seed = scalar(value)?,
        "output_dir" => {
            if value.is_empty() {
                return Err(Assign::Bad("must not be empty".into()));
            }
            cfg.output_dir = PathBuf::from(value)
        }
        _ => return Err(Assign::Unknown),
    }
    Ok(())
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

impl ExperimentConfig {
    /// Checks every cross-field constraint, naming the offending keys.
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        for (key, empty) in [
            ("agents", self.agents.is_empty()),
            ("total_steps", self.total_steps.is_empty()),
            ("selection_steps", self.selection_steps.is_empty()),
            ("betas", self.betas.is_empty()),
        ] {
            if empty {
                return Err(ConfigError::constraint(&[key], "list must not be empty"));
            }
        }
        if self.replicates == 0 {
            return Err(ConfigError::constraint(
                &["replicates"],
                "must be at least 1",
            ));
        }
        if self.episodes == 0 {
            return Err(ConfigError::constraint(&["episodes"], "must be at least 1"));
        }
        if !(self.final_fraction > 0.0 && self.final_fraction <= 1.0) {
            return Err(ConfigError::constraint(
                &["final_fraction"],
                "must lie in (0, 1]",
            ));
        }
        if self.mi_bins == 0 {
            return Err(ConfigError::constraint(&["mi_bins"], "must be at least 1"));
        }
        if self.grid_size < 2 {
            return Err(ConfigError::constraint(
                &["grid_size"],
                "must be at least 2",
            ));
        }
        if let Some(b) = self.betas.iter().find(|b| !(**b >= 0.0) || !b.is_finite()) {
            return Err(ConfigError::constraint(
                &["betas"],
                format!("must be finite and nonnegative, got {b}"),
            ));
        }
        if !(self.solver.tol > 0.0) {
            return Err(ConfigError::constraint(&["solver_tol"], "must be positive"));
        }
        if self.agents.contains(&AgentKind::Multi) {
            if self.num_priors < 2 {
                return Err(ConfigError::constraint(
                    &["num_priors", "agents"],
                    "multi-prior agents need at least 2 priors",
                ));
            }
            let max_sel = *self.selection_steps.iter().max().unwrap_or(&0);
            let min_total = *self.total_steps.iter().min().unwrap_or(&0);
            if max_sel > min_total {
                return Err(ConfigError::constraint(
                    &["selection_steps", "total_steps"],
                    format!("selection budget {max_sel} exceeds total budget {min_total}"),
                ));
            }
        }
        self.task.validate().map_err(core_constraint)?;
        for kind in &self.agents {
            self.system_config(*kind, self.total_steps[0], self.selection_steps[0])
                .validate()
                .map_err(core_constraint)?;
        }
        Ok(())
    }

    /// The agent configuration of one sweep cell. Single-prior agents spend
    /// the whole budget on the action chain and ignore `selection_steps`.
    pub fn system_config(
        &self,
        kind: AgentKind,
        total_steps: usize,
        selection_steps: usize,
    ) -> SystemConfig {
        let (num_priors, budget) = match kind {
            AgentKind::Single => (1, BudgetSplit::action_only(total_steps)),
            AgentKind::Multi => (
                self.num_priors,
                BudgetSplit {
                    total_steps,
                    selection_steps,
                    action_steps: total_steps.saturating_sub(selection_steps),
                },
            ),
        };
        SystemConfig {
            num_priors,
            budget,
            chain: self.chain,
            selection: self.selection,
            vae: self.vae,
            training: self.training,
            seed: self.seed,
        }
    }

    /// Serializes every key, defaults included.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("num_worlds", self.task.num_worlds.to_string());
        put("width", self.task.width.to_string());
        put("means", join(self.task.means.as_deref().unwrap_or(&[])));
        put("num_priors", self.num_priors.to_string());
        put("gamma0", self.chain.gamma0.to_string());
        put("alpha", self.chain.alpha.to_string());
        put("proposal_sigma", self.chain.proposal_sigma.to_string());
        put("selection_gamma0", self.selection.gamma0.to_string());
        put("selection_alpha", self.selection.alpha.to_string());
        put(
            "utility_samples",
            self.selection.utility_samples.to_string(),
        );
        put("hidden_dim", self.vae.hidden_dim.to_string());
        put("latent_dim", self.vae.latent_dim.to_string());
        put("decoder_variance", self.vae.decoder_variance.to_string());
        put(
            "activation",
            match self.vae.activation {
                Activation::Relu => "relu",
                Activation::Sigmoid => "sigmoid",
            }
            .into(),
        );
        put("step_size", self.training.step_size.to_string());
        put("buffer_capacity", self.training.buffer_capacity.to_string());
        put("batch_size", self.training.batch_size.to_string());
        put(
            "train_steps_per_episode",
            self.training.steps_per_episode.to_string(),
        );
        put("agents", join(&self.agents));
        put("total_steps", join(&self.total_steps));
        put("selection_steps", join(&self.selection_steps));
        put("replicates", self.replicates.to_string());
        put("episodes", self.episodes.to_string());
        put("final_fraction", self.final_fraction.to_string());
        put("mi_bins", self.mi_bins.to_string());
        put("save_priors", self.save_priors.to_string());
        put("betas", join(&self.betas));
        put("grid_size", self.grid_size.to_string());
        put("solver_tol", self.solver.tol.to_string());
        put("solver_max_iter", self.solver.max_iter.to_string());
        put("seed", self.seed.to_string());
        put("output_dir", self.output_dir.display().to_string());
        out
    }
}

fn core_constraint(e: brdm_core::Error) -> ConfigError {
    match e {
        brdm_core::Error::InvalidParameter { name, reason } => {
            ConfigError::constraint(&[name], reason)
        }
        other => ConfigError::Constraint {
            keys: Vec::new(),
            message: other.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.task.num_worlds, 6);
        assert_eq!(cfg.task.width, 0.05);
        assert_eq!(cfg.num_priors, 3);
        assert_eq!(cfg.total_steps, vec![100]);
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn comments_lists_and_whitespace() {
        let cfg = parse_config(
            "# header\n\n  total_steps = 25, 50 ,100  # trailing\nagents=single\nmeans = 0.1, 0.5, 0.9\nnum_worlds = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.total_steps, vec![25, 50, 100]);
        assert_eq!(cfg.agents, vec![AgentKind::Single]);
        assert_eq!(cfg.task.means, Some(vec![0.1, 0.5, 0.9]));
    }

    #[test]
    fn selection_above_budget_names_both_keys() {
        let err = parse_config("selection_steps = 120\ntotal_steps = 100\n").unwrap_err();
        match &err {
            ConfigError::Constraint { keys, .. } => {
                assert!(keys.contains(&"selection_steps".to_string()));
                assert!(keys.contains(&"total_steps".to_string()));
            }
            other => panic!("{other:?}"),
        }
        let msg = err.to_string();
        assert!(msg.contains("`selection_steps`") && msg.contains("`total_steps`"));
    }

    #[test]
    fn single_only_ignores_selection_budget() {
        assert!(parse_config("agents = single\ntotal_steps = 5\n").is_ok());
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(
            parse_config("seed = 1\n\nfoo = 2\n").unwrap_err(),
            ConfigError::UnknownKey {
                line: 3,
                key: "foo".into()
            }
        );
        assert!(matches!(
            parse_config("width 0.1").unwrap_err(),
            ConfigError::Syntax { line: 1, .. }
        ));
        assert!(matches!(
            parse_config("# c\nepisodes = many").unwrap_err(),
            ConfigError::Value { line: 2, .. }
        ));
        assert!(matches!(
            parse_config("seed = 1\nseed = 2").unwrap_err(),
            ConfigError::Duplicate { line: 2, .. }
        ));
    }

    #[test]
    fn core_constraints_surface_key_names() {
        let err = parse_config("width = -1").unwrap_err();
        assert!(err.to_string().contains("`width`"), "{err}");
        let err = parse_config("replicates = 0").unwrap_err();
        assert!(err.to_string().contains("`replicates`"), "{err}");
        let err = parse_config("agents = multi\nnum_priors = 1").unwrap_err();
        assert!(err.to_string().contains("`num_priors`"), "{err}");
    }

    #[test]
    fn text_round_trip() {
        let text = "num_worlds = 4\nmeans = 0.1, 0.3, 0.6, 0.95\nactivation = sigmoid\n\
                    betas = 0, 0.3, 17.5\nagents = multi\ntotal_steps = 30, 60\n\
                    selection_steps = 5, 10\nsave_priors = true\noutput_dir = out/x\n";
        let cfg = parse_config(text).unwrap();
        let again = parse_config(&cfg.to_text()).unwrap();
        assert_eq!(cfg, again);
        let defaults = ExperimentConfig::default();
        assert_eq!(parse_config(&defaults.to_text()).unwrap(), defaults);
    }

    #[test]
    fn cell_configs() {
        let cfg = ExperimentConfig::default();
        let single = cfg.system_config(AgentKind::Single, 50, 10);
        assert_eq!(single.num_priors, 1);
        assert_eq!(single.budget.action_steps, 50);
        let multi = cfg.system_config(AgentKind::Multi, 50, 10);
        assert_eq!(multi.num_priors, 3);
        assert_eq!(multi.budget.action_steps, 40);
    }
}
