//! Decision episodes for single-prior agents and multi-prior systems, and
//! the empirical information/utility measurements taken from their logs.
//!
//! A multi-prior episode for world `w`:
//!
//! 1. estimate `E[U(w,·)]` under every prior from a few prior samples,
//! 2. run the prior-selection chain over prior indices,
//! 3. seed an action chain with a sample from the selected prior,
//! 4. record the decision, push it into that prior's training buffer and
//!    count the selection in the multinomial `p(x)`.
//!
//! A single-prior agent skips steps 1 and 2.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::mcmc::{run_action_chain, run_selection_chain, ChainConfig, SelectionConfig};
use crate::vae::{ElboReport, VaeArch, VaePrior};
use crate::{Error, Result, WorldModel};

/// How a per-episode step budget is divided between prior selection and
/// action optimization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BudgetSplit {
    pub total_steps: usize,
    pub selection_steps: usize,
    pub action_steps: usize,
}

impl BudgetSplit {
    pub fn new(total_steps: usize, selection_steps: usize) -> Result<Self> {
        if selection_steps > total_steps {
            return Err(Error::param(
                "selection_steps",
                format!("{selection_steps} exceeds total_steps {total_steps}"),
            ));
        }
        Ok(BudgetSplit {
            total_steps,
            selection_steps,
            action_steps: total_steps - selection_steps,
        })
    }

    /// All steps go to the action chain.
    pub fn action_only(total_steps: usize) -> Self {
        BudgetSplit {
            total_steps,
            selection_steps: 0,
            action_steps: total_steps,
        }
    }
}

/// Online training of the priors from chain decisions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainingSchedule {
    /// Most recent decisions kept per prior.
    pub buffer_capacity: usize,
    /// Batch drawn (with replacement) from the buffer for each step.
    pub batch_size: usize,
    /// Training steps for the selected prior after each episode.
    pub steps_per_episode: usize,
    pub step_size: f64,
}

impl Default for TrainingSchedule {
    fn default() -> Self {
        TrainingSchedule {
            buffer_capacity: 256,
            batch_size: 32,
            steps_per_episode: 1,
            step_size: 1e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemConfig {
    pub num_priors: usize,
    pub budget: BudgetSplit,
    /// Action-chain parameters; `n_max` is taken from the budget.
    pub chain: ChainConfig,
    /// Selection-chain parameters; `n_max` is taken from the budget.
    pub selection: SelectionConfig,
    pub vae: VaeArch,
    pub training: TrainingSchedule,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            num_priors: 3,
            budget: BudgetSplit {
                total_steps: 100,
                selection_steps: 10,
                action_steps: 90,
            },
            chain: ChainConfig::default(),
            selection: SelectionConfig::default(),
            vae: VaeArch::default(),
            training: TrainingSchedule::default(),
            seed: 0,
        }
    }
}

impl SystemConfig {
    /// A single-prior agent spending every step on the action chain.
    pub fn single_prior(action_steps: usize) -> Self {
        SystemConfig {
            num_priors: 1,
            budget: BudgetSplit::action_only(action_steps),
            ..SystemConfig::default()
        }
    }

    /// A multi-prior system with the given selection and action budgets.
    pub fn multi_prior(num_priors: usize, selection_steps: usize, action_steps: usize) -> Self {
        SystemConfig {
            num_priors,
            budget: BudgetSplit {
                total_steps: selection_steps + action_steps,
                selection_steps,
                action_steps,
            },
            ..SystemConfig::default()
        }
    }

    pub fn is_single_prior(&self) -> bool {
        self.num_priors == 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_priors == 0 {
            return Err(Error::param("num_priors", "must be at least 1"));
        }
        let b = self.budget;
        if b.selection_steps + b.action_steps != b.total_steps {
            return Err(Error::param(
                "budget",
                "selection_steps + action_steps must equal total_steps",
            ));
        }
        if self.num_priors == 1 && b.selection_steps != 0 {
            return Err(Error::param(
                "selection_steps",
                "a single-prior agent has no selection stage",
            ));
        }
        self.chain.validate()?;
        self.selection.validate()?;
        self.vae.validate()?;
        let t = &self.training;
        if t.buffer_capacity == 0 || t.batch_size == 0 {
            return Err(Error::param(
                "training",
                "buffer and batch sizes must be positive",
            ));
        }
        Ok(())
    }

    /// Utility evaluations spent per episode: prior-utility estimates
    /// (multi-prior only) plus the action chain's seed and proposals.
    pub fn evaluations_per_episode(&self) -> usize {
        let estimates = if self.is_single_prior() {
            0
        } else {
            self.selection.utility_samples * self.num_priors
        };
        estimates + self.budget.action_steps + 1
    }
}

/// Multinomial `p(x)` over prior indices from add-one smoothed selection
/// counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultinomialPrior {
    counts: Vec<u64>,
}

impl MultinomialPrior {
    pub fn new(num_priors: usize) -> Self {
        MultinomialPrior {
            counts: vec![0; num_priors],
        }
    }

    pub fn observe(&mut self, x: usize) {
        self.counts[x] += 1;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let total: u64 = self.counts.iter().sum::<u64>() + self.counts.len() as u64;
        self.counts
            .iter()
            .map(|&c| (c + 1) as f64 / total as f64)
            .collect()
    }
}

/// Ring buffer of recent decisions for one prior.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionBuffer {
    capacity: usize,
    items: VecDeque<Vec<f64>>,
}

impl DecisionBuffer {
    pub fn new(capacity: usize) -> Self {
        DecisionBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, decision: Vec<f64>) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(decision);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// `n` items drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| self.items[rng.random_range(0..self.items.len())].clone())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub world: usize,
    pub selected_prior: usize,
    pub seed_action: Vec<f64>,
    pub decision: Vec<f64>,
    /// `U(world, decision)`.
    pub utility: f64,
    /// `U(world, seed_action)`.
    pub seed_utility: f64,
    pub utility_evaluations: usize,
}

impl EpisodeRecord {
    /// Utility gained by the action chain.
    pub fn delta_u(&self) -> f64 {
        self.utility - self.seed_utility
    }
}

/// A set of VAE priors with their selector, trained online from the
/// decisions of the action chains they seed.
#[derive(Clone, Debug)]
pub struct System {
    world: WorldModel,
    config: SystemConfig,
    priors: Vec<VaePrior>,
    buffers: Vec<DecisionBuffer>,
    selector: MultinomialPrior,
    episodes: usize,
}

impl System {
    /// Fresh system with randomly initialized priors.
    pub fn new<R: Rng + ?Sized>(
        world: WorldModel,
        config: SystemConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let arch = VaeArch {
            input_dim: world.action_dim(),
            ..config.vae
        };
        let priors = (0..config.num_priors)
            .map(|_| VaePrior::new(arch, config.training.step_size, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::with_priors(world, config, priors)
    }

    /// System built around given priors.
    pub fn with_priors(
        world: WorldModel,
        config: SystemConfig,
        priors: Vec<VaePrior>,
    ) -> Result<Self> {
        config.validate()?;
        if priors.len() != config.num_priors {
            return Err(Error::Shape(format!(
                "{} priors for num_priors = {}",
                priors.len(),
                config.num_priors
            )));
        }
        if priors
            .iter()
            .any(|p| p.arch.input_dim != world.action_dim())
        {
            return Err(Error::Shape(
                "prior input_dim differs from action_dim".into(),
            ));
        }
        let buffers = (0..config.num_priors)
            .map(|_| DecisionBuffer::new(config.training.buffer_capacity))
            .collect();
        Ok(System {
            selector: MultinomialPrior::new(config.num_priors),
            world,
            config,
            priors,
            buffers,
            episodes: 0,
        })
    }

    pub fn world(&self) -> &WorldModel {
        &self.world
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn priors(&self) -> &[VaePrior] {
        &self.priors
    }

    pub fn buffers(&self) -> &[DecisionBuffer] {
        &self.buffers
    }

    pub fn selector(&self) -> &MultinomialPrior {
        &self.selector
    }

    pub fn episodes_run(&self) -> usize {
        self.episodes
    }

    /// Per-prior utility estimates for world `w` from prior samples.
    pub fn estimate_utilities<R: Rng + ?Sized>(&self, w: usize, rng: &mut R) -> Vec<f64> {
        let m = self.config.selection.utility_samples;
        self.priors
            .iter()
            .map(|prior| {
                (0..m)
                    .map(|_| self.world.utility(w, &prior.sample_action(rng)))
                    .sum::<f64>()
                    / m as f64
            })
            .collect()
    }

    /// Runs one decision episode for world `w` (without training).
    pub fn run_episode<R: Rng + ?Sized>(&mut self, w: usize, rng: &mut R) -> Result<EpisodeRecord> {
        if w >= self.world.num_worlds() {
            return Err(Error::param("world", format!("index {w} out of range")));
        }
        let budget = self.config.budget;
        let mut evaluations = 0;

        let x = if self.config.is_single_prior() {
            0
        } else {
            let estimates = self.estimate_utilities(w, rng);
            evaluations += estimates.len() * self.config.selection.utility_samples;
            let cfg = self.config.selection.with_steps(budget.selection_steps);
            run_selection_chain(&estimates, &self.selector.probabilities(), &cfg, rng)?
        };

        let seed_action = self.priors[x].sample_action(rng);
        let cfg = self.config.chain.with_steps(budget.action_steps);
        let chain = run_action_chain(&self.world, w, &seed_action, &cfg, rng);
        evaluations += chain.evaluations;

        self.buffers[x].push(chain.decision.clone());
        self.selector.observe(x);
        let record = EpisodeRecord {
            episode: self.episodes,
            world: w,
            selected_prior: x,
            seed_action,
            decision: chain.decision,
            utility: chain.decision_utility,
            seed_utility: chain.seed_utility,
            utility_evaluations: evaluations,
        };
        self.episodes += 1;
        Ok(record)
    }

    /// Trains prior `x` on batches from its decision buffer. Returns the
    /// last ELBO estimate, or `None` when the buffer is still empty.
    pub fn train_prior<R: Rng + ?Sized>(
        &mut self,
        x: usize,
        rng: &mut R,
    ) -> Result<Option<ElboReport>> {
        if self.buffers[x].is_empty() {
            return Ok(None);
        }
        let mut last = None;
        for _ in 0..self.config.training.steps_per_episode {
            let batch = self.buffers[x].sample(self.config.training.batch_size, rng);
            last = Some(self.priors[x].train_step(&batch, rng)?);
        }
        Ok(last)
    }

    /// Draws a world from `rho`, runs an episode and trains the selected
    /// prior.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<EpisodeRecord> {
        let w = WeightedIndex::new(self.world.rho())
            .map_err(|_| Error::param("rho", "not a valid weight vector"))?
            .sample(rng);
        let record = self.run_episode(w, rng)?;
        self.train_prior(record.selected_prior, rng)?;
        Ok(record)
    }
}

/// Builds a system and trains it online for `num_episodes` episodes.
pub fn train_system<R: Rng + ?Sized>(
    world: &WorldModel,
    config: &SystemConfig,
    num_episodes: usize,
    rng: &mut R,
) -> Result<(System, Vec<EpisodeRecord>)> {
    let mut system = System::new(world.clone(), config.clone(), rng)?;
    let mut log = Vec::with_capacity(num_episodes);
    for _ in 0..num_episodes {
        log.push(system.step(rng)?);
    }
    Ok((system, log))
}

/// The last `fraction` of a log, at least one record when nonempty.
pub fn final_window(records: &[EpisodeRecord], fraction: f64) -> &[EpisodeRecord] {
    let n = records.len();
    let keep = ((n as f64 * fraction).ceil() as usize).clamp(n.min(1), n);
    &records[n - keep..]
}

fn cell_of(action: &[f64], bins: usize) -> usize {
    action.iter().fold(0usize, |acc, &a| {
        let b = ((a * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        acc.wrapping_mul(bins).wrapping_add(b)
    })
}

/// Histogram estimate of `I(W;A)` in bits from an episode log.
///
/// Decisions are binned into `bins` equal slices per action coordinate.
/// The per-world conditionals `p̂(a|w)` come from the log; they are mixed
/// with the known world distribution `rho`. `0 log 0 := 0`.
pub fn empirical_mutual_information(
    records: &[EpisodeRecord],
    rho: &[f64],
    bins: usize,
) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Empty("episode log"));
    }
    if bins == 0 {
        return Err(Error::param("bins", "must be positive"));
    }
    let nw = rho.len();
    let mut counts: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); nw];
    let mut totals = vec![0.0; nw];
    for r in records {
        if r.world >= nw {
            return Err(Error::param(
                "world",
                format!("index {} out of range", r.world),
            ));
        }
        *counts[r.world]
            .entry(cell_of(&r.decision, bins))
            .or_insert(0.0) += 1.0;
        totals[r.world] += 1.0;
    }
    if let Some(w) = (0..nw).find(|&w| rho[w] > 0.0 && totals[w] == 0.0) {
        return Err(Error::param(
            "records",
            format!("no record for world {w}; every world needs at least one"),
        ));
    }
    let mut marginal: BTreeMap<usize, f64> = BTreeMap::new();
    for w in 0..nw {
        if rho[w] > 0.0 {
            for (&c, &n) in &counts[w] {
                *marginal.entry(c).or_insert(0.0) += rho[w] * n / totals[w];
            }
        }
    }
    let mut nats = 0.0;
    for w in 0..nw {
        if rho[w] > 0.0 {
            for (c, &n) in &counts[w] {
                let p = n / totals[w];
                nats += rho[w] * p * (p / marginal[c]).ln();
            }
        }
    }
    Ok((nats / core::f64::consts::LN_2).max(0.0))
}

/// Mean decision utility of a log.
pub fn empirical_expected_utility(records: &[EpisodeRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Empty("episode log"));
    }
    Ok(records.iter().map(|r| r.utility).sum::<f64>() / records.len() as f64)
}

/// An agent's position in the information/utility plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EfficiencyPoint {
    pub mi_bits: f64,
    pub expected_utility: f64,
}

pub fn efficiency_point(
    records: &[EpisodeRecord],
    rho: &[f64],
    bins: usize,
) -> Result<EfficiencyPoint> {
    Ok(EfficiencyPoint {
        mi_bits: empirical_mutual_information(records, rho, bins)?,
        expected_utility: empirical_expected_utility(records)?,
    })
}

/// Mean and sample standard deviation of the utility gained by the action
/// chains.
pub fn delta_u_stats(records: &[EpisodeRecord]) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::Empty("episode log"));
    }
    let n = records.len() as f64;
    let mean = records.iter().map(EpisodeRecord::delta_u).sum::<f64>() / n;
    if records.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = records
        .iter()
        .map(|r| (r.delta_u() - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    Ok((mean, var.sqrt()))
}

/// Fraction of episodes whose selected prior agrees with a reference
/// world→prior partition, maximized over relabelings of the priors.
pub fn partition_agreement(
    records: &[EpisodeRecord],
    partition: &[usize],
    num_priors: usize,
) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Empty("episode log"));
    }
    if num_priors == 0 || num_priors > 8 {
        return Err(Error::param(
            "num_priors",
            "relabeling search supports 1..=8 priors",
        ));
    }
    // joint[x_system][x_reference]
    let mut joint = vec![vec![0usize; num_priors]; num_priors];
    for r in records {
        let reference = *partition
            .get(r.world)
            .ok_or_else(|| Error::param("partition", "shorter than the world index range"))?;
        if r.selected_prior >= num_priors || reference >= num_priors {
            return Err(Error::param("num_priors", "prior index out of range"));
        }
        joint[r.selected_prior][reference] += 1;
    }
    let mut perm: Vec<usize> = (0..num_priors).collect();
    let mut best = 0usize;
    permute(&mut perm, 0, &mut |p| {
        let hits = (0..num_priors).map(|x| joint[x][p[x]]).sum::<usize>();
        best = best.max(hits);
    });
    Ok(best as f64 / records.len() as f64)
}

fn permute(perm: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == perm.len() {
        visit(perm);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(perm, k + 1, visit);
        perm.swap(k, i);
    }
}
