//! Annealed Metropolis-Hastings chains as anytime decision makers.
//!
//! A chain targets `q(s) ∝ exp(γ U(s))` with a symmetric proposal, so the
//! acceptance probability is `min{1, exp(γ (U(s') − U(s)))}`. The precision
//! follows `γ(k) = γ₀ + α ln(1 + k)`, where `k` counts proposals from zero
//! in each fresh chain. The decision is the chain's state after the last
//! step.

use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result, WorldModel};

/// `γ₀ + α ln(1 + k)`.
pub fn anneal_gamma(k: f64, gamma0: f64, alpha: f64) -> f64 {
    gamma0 + alpha * (1.0 + k).ln()
}

/// `min{1, exp(γ (u_new − u_old))}`; uphill moves return 1 without
/// evaluating the exponential.
pub fn mh_accept_prob(u_new: f64, u_old: f64, gamma: f64) -> f64 {
    let x = gamma * (u_new - u_old);
    if x >= 0.0 || gamma == 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// Folds a real number into `[0, 1]` by repeated mirror reflection at the
/// two boundaries (`x → −x` below 0, `x → 2 − x` above 1).
pub fn reflect_unit(x: f64) -> f64 {
    if (0.0..=1.0).contains(&x) {
        return x;
    }
    let mut r = x % 2.0;
    if r < 0.0 {
        r += 2.0;
    }
    if r > 1.0 {
        2.0 - r
    } else {
        r
    }
}

/// Gaussian random-walk proposal `N(a, σ² I)` reflected into the unit cube.
/// Reflection keeps the kernel symmetric on the box.
pub fn propose<R: Rng + ?Sized>(action: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    action
        .iter()
        .map(|&a| {
            let xi: f64 = rng.sample(StandardNormal);
            reflect_unit(a + sigma * xi)
        })
        .collect()
}

/// Parameters of an action chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainConfig {
    pub gamma0: f64,
    pub alpha: f64,
    /// Number of proposals. Zero is allowed and returns the seed.
    pub n_max: usize,
    pub proposal_sigma: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            gamma0: 1.0,
            alpha: 5.0,
            n_max: 100,
            proposal_sigma: 0.1,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 >= 0.0) {
            return Err(Error::param("gamma0", "must be nonnegative"));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::param("alpha", "must be nonnegative"));
        }
        if !(self.proposal_sigma > 0.0) || !self.proposal_sigma.is_finite() {
            return Err(Error::param("proposal_sigma", "must be positive"));
        }
        Ok(())
    }

    pub fn with_steps(self, n_max: usize) -> Self {
        ChainConfig { n_max, ..self }
    }
}

/// One proposal of a chain.
#[derive(Clone, Debug, PartialEq)]
pub struct Step<S> {
    pub proposal: S,
    pub utility: f64,
    pub gamma: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chain<S> {
    pub seed: S,
    pub seed_utility: f64,
    /// State after the last step.
    pub decision: S,
    pub decision_utility: f64,
    pub trace: Vec<Step<S>>,
    /// Calls of the utility function: the seed plus one per proposal.
    pub evaluations: usize,
    pub acceptance_rate: f64,
}

impl<S: Clone> Chain<S> {
    /// Chain state after each step.
    pub fn path(&self) -> Vec<S> {
        let mut cur = self.seed.clone();
        self.trace
            .iter()
            .map(|s| {
                if s.accepted {
                    cur = s.proposal.clone();
                }
                cur.clone()
            })
            .collect()
    }
}

pub type ChainResult = Chain<Vec<f64>>;

/// Generic annealed Metropolis chain with a symmetric proposal.
pub fn run_chain<S, R, P, U>(
    seed: S,
    n_steps: usize,
    gamma0: f64,
    alpha: f64,
    rng: &mut R,
    mut propose: P,
    mut utility: U,
) -> Chain<S>
where
    S: Clone,
    R: Rng + ?Sized,
    P: FnMut(&S, &mut R) -> S,
    U: FnMut(&S) -> f64,
{
    let seed_utility = utility(&seed);
    let mut state = seed.clone();
    let mut u_state = seed_utility;
    let mut trace = Vec::with_capacity(n_steps);
    let mut accepted_count = 0usize;

    for k in 0..n_steps {
        let gamma = anneal_gamma(k as f64, gamma0, alpha);
        let proposal = propose(&state, rng);
        let u_new = utility(&proposal);
        let p = mh_accept_prob(u_new, u_state, gamma);
        let accepted = p >= 1.0 || rng.random::<f64>() < p;
        if accepted {
            state = proposal.clone();
            u_state = u_new;
            accepted_count += 1;
        }
        trace.push(Step {
            proposal,
            utility: u_new,
            gamma,
            accepted,
        });
    }

    Chain {
        seed,
        seed_utility,
        decision: state,
        decision_utility: u_state,
        trace,
        evaluations: n_steps + 1,
        acceptance_rate: if n_steps == 0 {
            0.0
        } else {
            accepted_count as f64 / n_steps as f64
        },
    }
}

/// Anytime optimization of `U(w, ·)` from `seed_action`.
pub fn run_action_chain<R: Rng + ?Sized>(
    world: &WorldModel,
    w: usize,
    seed_action: &[f64],
    cfg: &ChainConfig,
    rng: &mut R,
) -> ChainResult {
    let sigma = cfg.proposal_sigma;
    run_chain(
        seed_action.to_vec(),
        cfg.n_max,
        cfg.gamma0,
        cfg.alpha,
        rng,
        |a: &Vec<f64>, r: &mut R| propose(a, sigma, r),
        |a: &Vec<f64>| world.utility(w, a),
    )
}

/// Parameters of the prior-selection chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectionConfig {
    pub gamma0: f64,
    pub alpha: f64,
    pub n_max: usize,
    /// Prior samples averaged per candidate to estimate its expected utility.
    pub utility_samples: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            gamma0: 1.0,
            alpha: 5.0,
            n_max: 10,
            utility_samples: 3,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 >= 0.0) {
            return Err(Error::param("selection_gamma0", "must be nonnegative"));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::param("selection_alpha", "must be nonnegative"));
        }
        if self.utility_samples == 0 {
            return Err(Error::param("utility_samples", "must be at least 1"));
        }
        Ok(())
    }

    pub fn with_steps(self, n_max: usize) -> Self {
        SelectionConfig { n_max, ..self }
    }
}

/// Discrete chain over prior indices. Starts from `x ~ px`, proposes
/// uniformly over all indices and accepts with the annealed Metropolis
/// rule on the candidates' utility estimates (new minus old).
pub fn run_selection_chain<R: Rng + ?Sized>(
    estimates: &[f64],
    px: &[f64],
    cfg: &SelectionConfig,
    rng: &mut R,
) -> Result<usize> {
    let n = estimates.len();
    if n == 0 {
        return Err(Error::Empty("candidate priors"));
    }
    if px.len() != n {
        return Err(Error::Shape(alloc::format!(
            "{} estimates but {} prior weights",
            n,
            px.len()
        )));
    }
    if n == 1 {
        return Ok(0);
    }
    let start = WeightedIndex::new(px)
        .map_err(|_| Error::param("px", "must be a valid weight vector"))?
        .sample(rng);
    let chain = run_chain(
        start,
        cfg.n_max,
        cfg.gamma0,
        cfg.alpha,
        rng,
        |_: &usize, r: &mut R| r.random_range(0..n),
        |&x: &usize| estimates[x],
    );
    Ok(chain.decision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RngState;
    use alloc::sync::Arc;
    use alloc::vec;

    #[test]
    fn gamma_schedule() {
        assert_eq!(anneal_gamma(0.0, 1.5, 3.0), 1.5);
        let e = core::f64::consts::E;
        assert!((anneal_gamma(e - 1.0, 1.0, 2.0) - 3.0).abs() < 1e-15);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..100 {
            let g = anneal_gamma(k as f64, 1.0, 0.7);
            assert!(g >= prev);
            prev = g;
        }
    }

    #[test]
    fn acceptance_examples() {
        assert_eq!(mh_accept_prob(0.7, 0.3, 5.0), 1.0);
        assert_eq!(mh_accept_prob(0.0, 1.0, 0.0), 1.0);
        assert!((mh_accept_prob(0.0, 0.5, 2.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((mh_accept_prob(0.0, 0.5, 2.0) - 0.36788).abs() < 1e-5);
        assert_eq!(mh_accept_prob(-1e300, 1e300, 1e10), 0.0);
    }

    #[test]
    fn reflection() {
        assert_eq!(reflect_unit(0.3), 0.3);
        assert!((reflect_unit(-0.1) - 0.1).abs() < 1e-15);
        assert!((reflect_unit(1.25) - 0.75).abs() < 1e-15);
        assert!((reflect_unit(2.3) - 0.3).abs() < 1e-12);
        assert!((reflect_unit(-1.2) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn degenerate_proposal_stays_put() {
        let mut rng = RngState::new(1);
        let a = propose(&[0.37, 0.91], 1e-12, &mut rng);
        assert!((a[0] - 0.37).abs() < 1e-9 && (a[1] - 0.91).abs() < 1e-9);
    }

    #[test]
    fn single_step_without_precision_always_accepts() {
        let world = WorldModel::uniform(1, 1, Arc::new(|_: usize, a: &[f64]| -a[0])).unwrap();
        let cfg = ChainConfig {
            gamma0: 0.0,
            alpha: 0.0,
            n_max: 1,
            proposal_sigma: 0.2,
        };
        let mut rng = RngState::new(3);
        let res = run_action_chain(&world, 0, &[0.5], &cfg, &mut rng);
        assert!(res.trace[0].accepted);
        assert_eq!(res.decision, res.trace[0].proposal);
        assert_eq!(res.evaluations, 2);
    }

    #[test]
    fn flat_utility_accepts_everything() {
        let world = WorldModel::uniform(1, 1, Arc::new(|_: usize, _: &[f64]| 0.4)).unwrap();
        let cfg = ChainConfig {
            gamma0: 50.0,
            alpha: 10.0,
            n_max: 200,
            proposal_sigma: 0.3,
        };
        let res = run_action_chain(&world, 0, &[0.1], &cfg, &mut RngState::new(9));
        assert_eq!(res.acceptance_rate, 1.0);
        assert_eq!(res.trace.len(), 200);
        assert_eq!(res.evaluations, 201);
    }

    #[test]
    fn zero_steps_returns_seed() {
        let world = WorldModel::uniform(1, 1, Arc::new(|_: usize, a: &[f64]| a[0])).unwrap();
        let cfg = ChainConfig::default().with_steps(0);
        let res = run_action_chain(&world, 0, &[0.25], &cfg, &mut RngState::new(0));
        assert_eq!(res.decision, vec![0.25]);
        assert_eq!(res.decision_utility, res.seed_utility);
        assert_eq!(res.evaluations, 1);
    }

    #[test]
    fn decision_is_last_accepted_state() {
        let world = WorldModel::uniform(1, 1, Arc::new(|_: usize, a: &[f64]| a[0])).unwrap();
        let res = run_action_chain(
            &world,
            0,
            &[0.5],
            &ChainConfig::default(),
            &mut RngState::new(5),
        );
        let last = res
            .trace
            .iter()
            .rev()
            .find(|s| s.accepted)
            .map(|s| s.proposal.clone());
        assert_eq!(Some(res.decision.clone()), last);
        assert_eq!(res.path().last(), Some(&res.decision));
    }

    #[test]
    fn selection_single_candidate() {
        let mut rng = RngState::new(0);
        let before = rng.clone().random::<u64>();
        let x = run_selection_chain(&[0.3], &[1.0], &SelectionConfig::default(), &mut rng).unwrap();
        assert_eq!(x, 0);
        assert_eq!(rng.random::<u64>(), before);
    }

    #[test]
    fn selection_errors() {
        let mut rng = RngState::new(0);
        let cfg = SelectionConfig::default();
        assert!(run_selection_chain(&[], &[], &cfg, &mut rng).is_err());
        assert!(run_selection_chain(&[0.1, 0.2], &[1.0], &cfg, &mut rng).is_err());
    }
}
