//! World states, their distribution, and utilities over the unit action cube.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// A utility function `U(w, a)` over world indices and actions in `[0,1]^d`.
pub trait Utility: Send + Sync {
    fn eval(&self, world: usize, action: &[f64]) -> f64;
}

impl<F> Utility for F
where
    F: Fn(usize, &[f64]) -> f64 + Send + Sync,
{
    fn eval(&self, world: usize, action: &[f64]) -> f64 {
        self(world, action)
    }
}

/// Discrete world-state distribution `rho(w)` plus a utility over
/// `(world, action)`. Cheap to clone; the utility is shared.
#[derive(Clone)]
pub struct WorldModel {
    rho: Vec<f64>,
    action_dim: usize,
    utility: Arc<dyn Utility>,
}

impl WorldModel {
    pub fn new(rho: Vec<f64>, action_dim: usize, utility: Arc<dyn Utility>) -> Result<Self> {
        if rho.is_empty() {
            return Err(Error::Empty("world distribution"));
        }
        if action_dim == 0 {
            return Err(Error::param("action_dim", "must be at least 1"));
        }
        if rho.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::param(
                "rho",
                "entries must be finite and nonnegative",
            ));
        }
        let total: f64 = rho.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param("rho", format!("sums to {total}, expected 1")));
        }
        Ok(WorldModel {
            rho,
            action_dim,
            utility,
        })
    }

    /// Uniform world distribution over `num_worlds` states.
    pub fn uniform(
        num_worlds: usize,
        action_dim: usize,
        utility: Arc<dyn Utility>,
    ) -> Result<Self> {
        if num_worlds == 0 {
            return Err(Error::Empty("world distribution"));
        }
        let p = 1.0 / num_worlds as f64;
        Self::new(vec![p; num_worlds], action_dim, utility)
    }

    pub fn num_worlds(&self) -> usize {
        self.rho.len()
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn utility(&self, world: usize, action: &[f64]) -> f64 {
        debug_assert!(world < self.rho.len());
        debug_assert_eq!(action.len(), self.action_dim);
        self.utility.eval(world, action)
    }

    /// The same world distribution with a different utility, e.g. an
    /// instrumented wrapper around the original one.
    pub fn with_utility(&self, utility: Arc<dyn Utility>) -> Self {
        WorldModel {
            rho: self.rho.clone(),
            action_dim: self.action_dim,
            utility,
        }
    }

    pub fn utility_handle(&self) -> Arc<dyn Utility> {
        Arc::clone(&self.utility)
    }
}

impl fmt::Debug for WorldModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WorldModel")
            .field("rho", &self.rho)
            .field("action_dim", &self.action_dim)
            .finish_non_exhaustive()
    }
}

/// Parameters of the multi-world Gaussian task: each world has a Gaussian
/// bump utility on `[0,1]` with its own optimum.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianTaskSpec {
    pub num_worlds: usize,
    pub width: f64,
    /// Per-world optima; `None` spaces them at `(i + 0.5) / num_worlds`.
    pub means: Option<Vec<f64>>,
}

impl Default for GaussianTaskSpec {
    fn default() -> Self {
        GaussianTaskSpec {
            num_worlds: 6,
            width: 0.05,
            means: None,
        }
    }
}

impl GaussianTaskSpec {
    pub fn resolved_means(&self) -> Vec<f64> {
        match &self.means {
            Some(m) => m.clone(),
            None => (0..self.num_worlds)
                .map(|i| (i as f64 + 0.5) / self.num_worlds as f64)
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_worlds == 0 {
            return Err(Error::param("num_worlds", "must be positive"));
        }
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(Error::param(
                "width",
                format!("must be positive, got {}", self.width),
            ));
        }
        let means = self.resolved_means();
        if means.len() != self.num_worlds {
            return Err(Error::param(
                "means",
                format!("expected {} entries, got {}", self.num_worlds, means.len()),
            ));
        }
        if means.iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(Error::param("means", "all means must lie in [0,1]"));
        }
        if means.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::param("means", "must be strictly increasing"));
        }
        Ok(())
    }
}

/// `U(w, a) = exp(-(a - mean_w)^2 / (2 width^2))` on scalar actions.
#[derive(Clone, Debug)]
pub struct GaussianUtility {
    means: Vec<f64>,
    width: f64,
}

impl GaussianUtility {
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn width(&self) -> f64 {
        self.width
    }
}

impl Utility for GaussianUtility {
    fn eval(&self, world: usize, action: &[f64]) -> f64 {
        let d = action[0] - self.means[world];
        (-(d * d) / (2.0 * self.width * self.width)).exp()
    }
}

pub fn make_gaussian_task(spec: &GaussianTaskSpec) -> Result<WorldModel> {
    spec.validate()?;
    let utility = GaussianUtility {
        means: spec.resolved_means(),
        width: spec.width,
    };
    WorldModel::uniform(spec.num_worlds, 1, Arc::new(utility))
}

/// Componentwise clamp into `[0, 1]`; NaN maps to 0.
#[allow(clippy::manual_clamp)]
pub fn clamp01(action: &[f64]) -> Vec<f64> {
    action.iter().map(|&x| x.max(0.0).min(1.0)).collect()
}
