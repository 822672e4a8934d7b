//! Suggestion policies. Every agent sees only the shared observation list and
//! builds its own GP from it; no agent reads another agent's model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{maximize_with, srinivas_beta, AcquisitionSpec, BetaSchedule, MaximizerConfig};
use crate::domain::Bounds;
use crate::error::{Error, Result};
use crate::gp::{fit_hyperparameters, lengthscale_grid, GpPosterior, Observation};
use crate::kernels::{FeatureMap, KernelFamily, KernelSpec};

/// `√β̂ = 0.001`: the simulated expert's `μ + 0.001 σ`.
pub const SIMULATED_EXPERT_BETA: f64 = 1e-6;

/// Size of the virtual grid in the generic GP-UCB schedule.
pub const GENERIC_UCB_GRID: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Human,
    Ai,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    /// GP-UCB with the over-explorative `ζ χ̆` schedule.
    BoMuseAi,
    /// GP-UCB with the `2 ln(|D| t² π²/6δ)` schedule, for the AI-only baseline.
    GenericUcb,
    /// Exploitative GP-UCB standing in for a human expert.
    SimulatedExpertUcb {
        #[serde(default = "default_beta_hat")]
        beta_hat: f64,
    },
    /// Expected improvement over the best observation.
    SimulatedExpertEi,
    /// Maximizes posterior standard deviation only.
    PureExplorer,
    /// Waits for a suggestion posted by a person.
    LiveHuman,
}

fn default_beta_hat() -> f64 {
    SIMULATED_EXPERT_BETA
}

impl Policy {
    pub fn is_live(self) -> bool {
        matches!(self, Policy::LiveHuman)
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: String,
    pub role: Role,
    pub policy: Policy,
    pub kernel: KernelSpec<f64>,
    pub noise_variance: f64,
    /// Refit kernel hyperparameters by marginal likelihood on every call.
    #[serde(default = "default_true")]
    pub fit_hyperparameters: bool,
}

impl AgentSpec {
    pub fn new(id: impl Into<String>, role: Role, policy: Policy, kernel: KernelSpec<f64>, noise_variance: f64) -> Self {
        Self { id: id.into(), role, policy, kernel, noise_variance, fit_hyperparameters: true }
    }

    /// BO-Muse AI with a squared-exponential kernel on the raw inputs.
    pub fn bo_muse_ai(noise_variance: f64) -> Self {
        Self::new("ai", Role::Ai, Policy::BoMuseAi, KernelSpec::squared_exponential(1.0, 1.0), noise_variance)
    }

    /// Simulated expert: squared-exponential kernel over `feature_map`.
    pub fn simulated_expert(feature_map: Option<&str>, noise_variance: f64) -> Result<Self> {
        let mut kernel = KernelSpec::squared_exponential(1.0, 1.0);
        if let Some(name) = feature_map {
            kernel = kernel.with_feature_map(FeatureMap::builtin(name)?);
        }
        Ok(Self::new(
            "human",
            Role::Human,
            Policy::SimulatedExpertUcb { beta_hat: SIMULATED_EXPERT_BETA },
            kernel,
            noise_variance,
        ))
    }

    pub fn live_human(noise_variance: f64) -> Self {
        Self::new("human", Role::Human, Policy::LiveHuman, KernelSpec::squared_exponential(1.0, 1.0), noise_variance)
    }

    pub fn with_policy(mut self, policy: Policy) -> Self {
        self.policy = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.noise_variance > 0.0) || !self.noise_variance.is_finite() {
            return Err(Error::Input(format!("agent '{}': noise variance must be positive", self.id)));
        }
        if self.policy.is_live() && self.role != Role::Human {
            return Err(Error::Input(format!("agent '{}': a live human must have the human role", self.id)));
        }
        if let Policy::SimulatedExpertUcb { beta_hat } = self.policy {
            if !(beta_hat >= 0.0) {
                return Err(Error::Input("beta_hat must be nonnegative".into()));
            }
        }
        Ok(())
    }

    /// Length scale reference for the ML grid: the box diagonal, or for a
    /// feature-mapped kernel the diagonal of the mapped box, estimated from a
    /// fixed sample of box points.
    pub fn hyperparameter_scale(&self, bounds: &Bounds<f64>) -> Result<f64> {
        let Some(map) = &self.kernel.feature_map else { return Ok(bounds.diagonal()) };
        let mut rng = ChaCha8Rng::seed_from_u64(0xfea7);
        let mut lo = vec![f64::INFINITY; map.dim_out()];
        let mut hi = vec![f64::NEG_INFINITY; map.dim_out()];
        let corners = (0..(1usize << bounds.dim().min(10))).map(|mask| {
            (0..bounds.dim()).map(|i| if mask >> i & 1 == 1 { bounds.hi(i) } else { bounds.lo(i) }).collect::<Vec<_>>()
        });
        let samples = (0..256).map(|_| bounds.sample(&mut rng));
        for x in corners.chain(samples) {
            for (j, v) in map.apply(&x)?.into_iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        let d = lo.iter().zip(&hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
        Ok(if d > 0.0 && d.is_finite() { d } else { 1.0 })
    }

    /// The agent's GP on `data`, with hyperparameters refit when enabled and
    /// there are at least two observations.
    pub fn model(&self, data: &[Observation<f64>], bounds: &Bounds<f64>) -> Result<GpPosterior<f64>> {
        let kernel = if self.fit_hyperparameters && data.len() >= 2 {
            let candidates = match self.kernel.family {
                KernelFamily::SquaredExponential => lengthscale_grid(self.hyperparameter_scale(bounds)?),
                KernelFamily::Linear | KernelFamily::Polynomial => crate::gp::log_grid(1e-4, 1e2, 25),
            };
            fit_hyperparameters(&self.kernel, data, self.noise_variance, &candidates)?
        } else {
            self.kernel.clone()
        };
        GpPosterior::fit(kernel, data.to_vec(), self.noise_variance)
    }
}

/// Everything besides the data that a suggestion depends on.
#[derive(Debug, Clone, Copy)]
pub struct SuggestContext<'a> {
    pub schedule: &'a BetaSchedule<f64>,
    pub bounds: &'a Bounds<f64>,
    /// 1-based count of suggestions this agent has made, including this one.
    pub iteration: u64,
    pub seed: u64,
    pub maximizer: MaximizerConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Suggestion {
    Point {
        x: Vec<f64>,
        /// Trade-off used, for UCB-type policies.
        beta: Option<f64>,
        acquisition: f64,
    },
    Pending,
}

impl Suggestion {
    pub fn point(&self) -> Option<&[f64]> {
        match self {
            Suggestion::Point { x, .. } => Some(x),
            Suggestion::Pending => None,
        }
    }
}

/// The acquisition an agent maximizes on `gp`, or `None` for a live human.
pub fn acquisition_for(agent: &AgentSpec, gp: &GpPosterior<f64>, ctx: &SuggestContext<'_>) -> Option<AcquisitionSpec<f64>> {
    Some(match agent.policy {
        Policy::BoMuseAi => AcquisitionSpec::GpUcb { beta: ctx.schedule.beta() },
        Policy::GenericUcb => AcquisitionSpec::GpUcb {
            beta: srinivas_beta(ctx.iteration, ctx.schedule.delta, GENERIC_UCB_GRID),
        },
        Policy::SimulatedExpertUcb { beta_hat } => AcquisitionSpec::GpUcb { beta: beta_hat },
        Policy::SimulatedExpertEi => {
            let best = gp.data().iter().map(|o| o.y).fold(f64::NEG_INFINITY, f64::max);
            AcquisitionSpec::ExpectedImprovement { best_y: if best.is_finite() { best } else { 0.0 } }
        }
        Policy::PureExplorer => AcquisitionSpec::PureExploration,
        Policy::LiveHuman => return None,
    })
}

/// Next point for `agent`, from the shared (normalized, maximization-oriented)
/// observations. Deterministic in `(data, ctx)` for machine policies.
pub fn suggest(agent: &AgentSpec, data: &[Observation<f64>], ctx: &SuggestContext<'_>) -> Result<Suggestion> {
    if agent.policy.is_live() {
        return Ok(Suggestion::Pending);
    }
    let gp = agent.model(data, ctx.bounds)?;
    let acq = acquisition_for(agent, &gp, ctx).expect("machine policy");
    let (x, acquisition) = maximize_with(|x| acq.value(&gp, x), ctx.bounds, ctx.seed, ctx.maximizer)?;
    let beta = match acq {
        AcquisitionSpec::GpUcb { beta } | AcquisitionSpec::EcGpUcb { beta, .. } => Some(beta),
        _ => None,
    };
    Ok(Suggestion::Point { x, beta, acquisition })
}
