//! The batch loop: each batch takes one suggestion from the human agent and
//! one from the AI agent, evaluates both, and only then lets the models see
//! the new data. Also the three comparison arms and regret bookkeeping.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::acquisition::{BetaSchedule, MaximizerConfig, DEFAULT_ZETA};
use crate::agents::{suggest, AgentSpec, Policy, Role, SuggestContext, Suggestion};
use crate::benchmarks::Goal;
use crate::domain::Bounds;
use crate::error::{Error, Result};
use crate::gp::{Observation, Source};
use crate::objective::{Objective, ObjectiveConfig};

pub const DEFAULT_DELTA: f64 = 0.1;
/// Noise standard deviation as a fraction of the objective's range.
pub const DEFAULT_NOISE_FRACTION: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Human and over-explorative AI each propose one point per batch.
    BoMuse,
    /// AI alone with the generic GP-UCB schedule.
    GenericBo,
    /// Human alone.
    HumanOnly,
    /// Human paired with a pure-exploration AI.
    HumanPlusPureExploration,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::BoMuse, Mode::GenericBo, Mode::HumanOnly, Mode::HumanPlusPureExploration];

    pub fn human_acts(self) -> bool {
        !matches!(self, Mode::GenericBo)
    }

    pub fn ai_acts(self) -> bool {
        !matches!(self, Mode::HumanOnly)
    }

    pub fn evaluations_per_batch(self) -> usize {
        usize::from(self.human_acts()) + usize::from(self.ai_acts())
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::BoMuse => "bo_muse",
            Mode::GenericBo => "generic_bo",
            Mode::HumanOnly => "human_only",
            Mode::HumanPlusPureExploration => "human_plus_pure_exploration",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown mode '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub objective: ObjectiveConfig,
    /// Overrides the objective's own box when present.
    #[serde(default)]
    pub bounds: Option<Bounds<f64>>,
    pub num_init: usize,
    pub budget_batches: usize,
    pub delta: f64,
    pub zeta: f64,
    pub seed: u64,
    /// Observation noise standard deviation `Σ` in objective units. Defaults
    /// to 1% of the range estimate for built-in objectives and to none for
    /// external ones.
    #[serde(default)]
    pub noise_std: Option<f64>,
    pub human_agent: AgentSpec,
    pub ai_agent: AgentSpec,
    pub mode: Mode,
    /// Let status views show true objective values mid-session.
    #[serde(default)]
    pub reveal_truth: bool,
    #[serde(default)]
    pub maximizer: MaximizerConfig,
}

impl SessionConfig {
    /// Default arm configuration on a built-in benchmark. `batches` is the
    /// BO-Muse batch count; single-agent modes get twice as many iterations
    /// so every arm spends the same number of evaluations.
    pub fn for_benchmark(name: &str, mode: Mode, num_init: usize, batches: usize, seed: u64) -> Result<Self> {
        let objective = ObjectiveConfig::builtin(name);
        let feature_map = objective.instantiate()?.feature_map().map(str::to_string);
        let noise_variance = DEFAULT_NOISE_FRACTION * DEFAULT_NOISE_FRACTION;
        let human = AgentSpec::simulated_expert(feature_map.as_deref(), noise_variance)?;
        let ai = AgentSpec::bo_muse_ai(noise_variance).with_policy(match mode {
            Mode::GenericBo => Policy::GenericUcb,
            Mode::HumanPlusPureExploration => Policy::PureExplorer,
            Mode::BoMuse | Mode::HumanOnly => Policy::BoMuseAi,
        });
        Ok(Self {
            objective,
            bounds: None,
            num_init,
            budget_batches: batches * 2 / mode.evaluations_per_batch(),
            delta: DEFAULT_DELTA,
            zeta: DEFAULT_ZETA,
            seed,
            noise_std: None,
            human_agent: human,
            ai_agent: ai,
            mode,
            reveal_truth: false,
            maximizer: MaximizerConfig::default(),
        })
    }

    /// Sets `Σ` and matches both agents' model noise to it (`σ = Σ`), given
    /// the scale targets are normalized by.
    pub fn with_noise_std(mut self, noise_std: f64, y_scale: f64) -> Self {
        self.noise_std = Some(noise_std);
        let v = (noise_std / y_scale).powi(2).max(1e-10);
        self.human_agent.noise_variance = v;
        self.ai_agent.noise_variance = v;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget_batches == 0 {
            return Err(Error::Input("budget_batches must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Input(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.zeta >= 1.0) {
            return Err(Error::Input(format!("zeta must be at least 1, got {}", self.zeta)));
        }
        if let Some(s) = self.noise_std {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::Input(format!("noise_std must be a nonnegative number, got {s}")));
            }
        }
        if let Some(b) = &self.bounds {
            b.validate()?;
        }
        self.human_agent.validate()?;
        self.ai_agent.validate()?;
        if self.human_agent.role != Role::Human || self.ai_agent.role != Role::Ai {
            return Err(Error::Input("session needs one human-role agent and one ai-role agent".into()));
        }
        Ok(())
    }
}

/// One objective evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedPoint {
    /// Batch index; 0 for the initial design.
    pub s: usize,
    /// 1-based evaluation index.
    pub t: usize,
    pub source: Source,
    pub x: Vec<f64>,
    /// Observed (noisy) value, user orientation.
    pub y: f64,
    /// Noiseless objective value, user orientation.
    pub f_true: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub s: usize,
    pub x_human: Option<Vec<f64>>,
    pub y_human: Option<f64>,
    pub x_ai: Option<Vec<f64>>,
    pub y_ai: Option<f64>,
    pub gamma_after: f64,
    pub b_after: f64,
    /// Trade-off used by the AI this batch, if it acted with a UCB policy.
    pub beta_used: Option<f64>,
}

/// Mutable state of a session; everything needed to resume it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionData {
    pub observations: Vec<EvaluatedPoint>,
    pub records: Vec<BatchRecord>,
    pub schedule: BetaSchedule<f64>,
    /// Divisor applied to targets before modeling.
    pub y_scale: f64,
    /// `Σ` actually injected by the engine.
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub optimum_known: bool,
    /// Best noiseless value among the first `t` evaluations (user orientation).
    pub best_value: Vec<f64>,
    /// `r_t`, one entry per evaluation, initial design included.
    pub simple_regret: Option<Vec<f64>>,
    /// `r̄_s = min` of per-point regret within batch `s`.
    pub batch_regret: Option<Vec<f64>>,
    /// Running sum of `batch_regret`.
    pub cumulative: Option<Vec<f64>>,
}

const TAG_INIT: u64 = 0x1417;
const TAG_NOISE: u64 = 0x4015e;
const TAG_HUMAN: u64 = 0x4a3a;
const TAG_AI: u64 = 0xa1;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent deterministic stream per `(seed, purpose, index)`.
fn stream_seed(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ tag) ^ index)
}

pub struct Session {
    config: SessionConfig,
    objective: Arc<dyn Objective>,
    bounds: Bounds<f64>,
    data: SessionData,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("objective", &self.objective.name())
            .field("batches", &self.data.records.len())
            .finish()
    }
}

impl Session {
    /// Validates the config, draws and evaluates the initial design.
    pub fn new(config: SessionConfig) -> Result<Self> {
        let objective = config.objective.instantiate()?;
        Self::with_objective(config, objective)
    }

    pub fn with_objective(config: SessionConfig, objective: Arc<dyn Objective>) -> Result<Self> {
        config.validate()?;
        let bounds = Self::resolve_bounds(&config, objective.as_ref())?;
        let noise_std = config.noise_std.unwrap_or_else(|| {
            match (objective.is_noiseless(), objective.range_estimate()) {
                (true, Some(r)) => DEFAULT_NOISE_FRACTION * r,
                _ => 0.0,
            }
        });
        let schedule = BetaSchedule::new(config.delta, config.ai_agent.noise_variance.sqrt(), config.zeta)?;

        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, TAG_INIT, 0));
        let mut observations = Vec::with_capacity(config.num_init);
        for i in 0..config.num_init {
            let x = bounds.sample(&mut rng);
            let t = i + 1;
            let f_true = objective.evaluate(&x)?;
            let y = f_true + draw_noise(config.seed, t, noise_std);
            observations.push(EvaluatedPoint { s: 0, t, source: Source::Init, x, y, f_true });
        }
        let y_scale = objective.range_estimate().unwrap_or_else(|| {
            let (lo, hi) = observations
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
            if hi > lo { hi - lo } else { 1.0 }
        });

        let mut session = Self {
            config,
            objective,
            bounds,
            data: SessionData { observations, records: Vec::new(), schedule, y_scale, noise_std },
        };
        // information gain of the initial design, scored point by point
        let init: Vec<Vec<f64>> = session.data.observations.iter().map(|p| p.x.clone()).collect();
        let training = session.training_data();
        let gain = session.sequential_gain(&training, &init)?;
        session.data.schedule.add_gain(gain);
        Ok(session)
    }

    /// Rebuilds a session from persisted state.
    pub fn restore(config: SessionConfig, data: SessionData) -> Result<Self> {
        let objective = config.objective.instantiate()?;
        Self::restore_with_objective(config, data, objective)
    }

    pub fn restore_with_objective(config: SessionConfig, data: SessionData, objective: Arc<dyn Objective>) -> Result<Self> {
        config.validate()?;
        let bounds = Self::resolve_bounds(&config, objective.as_ref())?;
        if data.records.len() > config.budget_batches {
            return Err(Error::Input("stored session has more batches than its budget".into()));
        }
        Ok(Self { config, objective, bounds, data })
    }

    fn resolve_bounds(config: &SessionConfig, objective: &dyn Objective) -> Result<Bounds<f64>> {
        let bounds = config.bounds.clone().unwrap_or_else(|| objective.bounds().clone());
        bounds.validate()?;
        if bounds.dim() != objective.bounds().dim() {
            return Err(Error::Dimension { expected: objective.bounds().dim(), got: bounds.dim() });
        }
        Ok(bounds)
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn data(&self) -> &SessionData {
        &self.data
    }

    pub fn into_data(self) -> SessionData {
        self.data
    }

    pub fn objective(&self) -> &Arc<dyn Objective> {
        &self.objective
    }

    pub fn bounds(&self) -> &Bounds<f64> {
        &self.bounds
    }

    pub fn records(&self) -> &[BatchRecord] {
        &self.data.records
    }

    pub fn schedule(&self) -> &BetaSchedule<f64> {
        &self.data.schedule
    }

    /// Index of the batch the next `run_batch` call will run.
    pub fn next_batch(&self) -> usize {
        self.data.records.len() + 1
    }

    pub fn is_finished(&self) -> bool {
        self.data.records.len() >= self.config.budget_batches
    }

    /// True when the next batch needs a suggestion from a person.
    pub fn awaits_live_human(&self) -> bool {
        !self.is_finished() && self.config.mode.human_acts() && self.config.human_agent.policy.is_live()
    }

    /// Observations as the models see them: maximization orientation,
    /// centered, divided by `y_scale`.
    pub fn training_data(&self) -> Vec<Observation<f64>> {
        normalize(&self.data.observations, self.objective.goal(), self.data.y_scale)
    }

    fn sequential_gain(&self, training: &[Observation<f64>], new_xs: &[Vec<f64>]) -> Result<f64> {
        if new_xs.is_empty() {
            return Ok(0.0);
        }
        let prior: Vec<Observation<f64>> = training[..training.len() - new_xs.len()].to_vec();
        let mut gp = self.config.ai_agent.model(&prior, &self.bounds)?;
        let mut total = 0.0;
        for x in new_xs {
            total += gp.information_gain_increment(x)?;
            gp = gp.with_observation(Observation::new(x.clone(), 0.0, Source::Init))?;
        }
        Ok(total)
    }

    fn context(&self, role_tag: u64, s: usize) -> SuggestContext<'_> {
        SuggestContext {
            schedule: &self.data.schedule,
            bounds: &self.bounds,
            iteration: s as u64,
            seed: stream_seed(self.config.seed, role_tag, s as u64),
            maximizer: self.config.maximizer,
        }
    }

    /// What each acting agent would suggest for the next batch, computed from
    /// the committed observations only. `None` entries are agents that sit
    /// this mode out; a live human yields `Suggestion::Pending`.
    pub fn suggestions(&self) -> Result<(Option<Suggestion>, Option<Suggestion>)> {
        let s = self.next_batch();
        let training = self.training_data();
        let human = if self.config.mode.human_acts() {
            Some(suggest(&self.config.human_agent, &training, &self.context(TAG_HUMAN, s))?)
        } else {
            None
        };
        let ai = if self.config.mode.ai_acts() {
            Some(suggest(&self.config.ai_agent, &training, &self.context(TAG_AI, s))?)
        } else {
            None
        };
        Ok((human, ai))
    }

    /// Runs one batch. `human_x` must be given exactly when the human agent is
    /// live. Nothing is committed unless every step succeeds.
    pub fn run_batch(&mut self, human_x: Option<Vec<f64>>) -> Result<BatchRecord> {
        if self.is_finished() {
            return Err(Error::Finished(self.config.budget_batches));
        }
        let s = self.next_batch();
        let live = self.awaits_live_human();
        if human_x.is_some() && !live {
            return Err(Error::Input("this session's human agent does not take posted suggestions".into()));
        }
        if let Some(x) = &human_x {
            self.bounds.check(x)?;
        }
        let (human_sugg, ai_sugg) = self.suggestions()?;
        let human_point = match human_sugg {
            Some(Suggestion::Pending) => Some(human_x.ok_or(Error::Pending)?),
            Some(Suggestion::Point { x, .. }) => Some(x),
            None => None,
        };
        let (ai_point, beta_used) = match ai_sugg {
            Some(Suggestion::Point { x, beta, .. }) => (Some(x), beta),
            Some(Suggestion::Pending) => return Err(Error::Input("the AI agent cannot be a live human".into())),
            None => (None, None),
        };

        let mut new_points = Vec::new();
        for (source, x) in [(Source::Human, human_point.clone()), (Source::Ai, ai_point.clone())] {
            let Some(x) = x else { continue };
            let t = self.data.observations.len() + new_points.len() + 1;
            let f_true = self.objective.evaluate(&x)?;
            if !f_true.is_finite() {
                return Err(Error::Objective(format!("non-finite value at evaluation {t}")));
            }
            let y = f_true + draw_noise(self.config.seed, t, self.data.noise_std);
            new_points.push(EvaluatedPoint { s, t, source, x, y, f_true });
        }

        let mut observations = self.data.observations.clone();
        observations.extend(new_points.iter().cloned());
        let training_after = normalize(&observations, self.objective.goal(), self.data.y_scale);
        let new_xs: Vec<Vec<f64>> = new_points.iter().map(|p| p.x.clone()).collect();
        let gain = self.sequential_gain(&training_after, &new_xs)?;
        let norm = self.config.ai_agent.model(&training_after, &self.bounds)?.rkhs_norm_estimate()?;

        let mut schedule = self.data.schedule;
        schedule.add_gain(gain);
        schedule.update_b(norm);

        let pick = |src: Source| new_points.iter().find(|p| p.source == src);
        let record = BatchRecord {
            s,
            x_human: pick(Source::Human).map(|p| p.x.clone()),
            y_human: pick(Source::Human).map(|p| p.y),
            x_ai: pick(Source::Ai).map(|p| p.x.clone()),
            y_ai: pick(Source::Ai).map(|p| p.y),
            gamma_after: schedule.running_gamma,
            b_after: schedule.running_b,
            beta_used,
        };

        self.data.observations = observations;
        self.data.schedule = schedule;
        self.data.records.push(record.clone());
        Ok(record)
    }

    pub fn regret(&self) -> RegretTrace {
        compute_regret(&self.data.observations, self.objective.goal(), self.objective.optimum_value())
    }

    /// CSV with one row per evaluation. With `reveal_truth` false the
    /// noiseless values and regrets are left blank.
    pub fn export_csv(&self, reveal_truth: bool) -> String {
        export_csv(&self.data, &self.regret(), self.bounds.dim(), reveal_truth)
    }
}

fn draw_noise(seed: u64, t: usize, std: f64) -> f64 {
    if std <= 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, TAG_NOISE, t as u64));
    Normal::new(0.0, std).expect("positive finite std").sample(&mut rng)
}

fn normalize(points: &[EvaluatedPoint], goal: Goal, scale: f64) -> Vec<Observation<f64>> {
    if points.is_empty() {
        return Vec::new();
    }
    let sign: f64 = goal.sign();
    let center = points.iter().map(|p| sign * p.y).sum::<f64>() / points.len() as f64;
    points
        .iter()
        .map(|p| Observation::new(p.x.clone(), (sign * p.y - center) / scale, p.source))
        .collect()
}

/// Runs a whole machine-only session.
pub fn run_session(config: SessionConfig) -> Result<(Vec<BatchRecord>, RegretTrace)> {
    let mut session = Session::new(config)?;
    while !session.is_finished() {
        session.run_batch(None)?;
    }
    let trace = session.regret();
    Ok((session.data.records, trace))
}

/// Regret from the stored noiseless values. Without a known optimum only
/// `best_value` is filled in.
pub fn compute_regret(points: &[EvaluatedPoint], goal: Goal, optimum: Option<f64>) -> RegretTrace {
    let sign: f64 = goal.sign();
    let mut best_value = Vec::with_capacity(points.len());
    let mut best = f64::NEG_INFINITY;
    for p in points {
        best = best.max(sign * p.f_true);
        best_value.push(sign * best);
    }
    let Some(opt) = optimum else {
        return RegretTrace { optimum_known: false, best_value, simple_regret: None, batch_regret: None, cumulative: None };
    };
    let target = sign * opt;
    let point_regret = |p: &EvaluatedPoint| (target - sign * p.f_true).max(0.0);
    let simple: Vec<f64> = best_value.iter().map(|&b| (target - sign * b).max(0.0)).collect();

    let last_batch = points.iter().map(|p| p.s).max().unwrap_or(0);
    let batch: Vec<f64> = (1..=last_batch)
        .map(|s| points.iter().filter(|p| p.s == s).map(point_regret).fold(f64::INFINITY, f64::min))
        .collect();
    let cumulative = batch
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r;
            Some(*acc)
        })
        .collect();
    RegretTrace {
        optimum_known: true,
        best_value,
        simple_regret: Some(simple),
        batch_regret: Some(batch),
        cumulative: Some(cumulative),
    }
}

/// Columns: `s,t,source,x1..xd,y,f_star,simple_regret,batch_regret,gamma,B,beta`.
pub fn export_csv(data: &SessionData, trace: &RegretTrace, dim: usize, reveal_truth: bool) -> String {
    let mut out = String::from("s,t,source");
    for i in 1..=dim {
        let _ = write!(out, ",x{i}");
    }
    out.push_str(",y,f_star,simple_regret,batch_regret,gamma,B,beta\n");
    let blank = String::new;
    let num = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_else(blank);
    let gamma_init = data
        .records
        .first()
        .map(|_| None)
        .unwrap_or(Some(data.schedule.running_gamma));
    for (i, p) in data.observations.iter().enumerate() {
        let record = (p.s > 0).then(|| data.records.get(p.s - 1)).flatten();
        let _ = write!(out, "{},{},{}", p.s, p.t, p.source.as_str());
        for v in &p.x {
            let _ = write!(out, ",{v}");
        }
        let truth = reveal_truth.then_some(p.f_true);
        let simple = reveal_truth.then(|| trace.simple_regret.as_ref().map(|r| r[i])).flatten();
        let batch = reveal_truth
            .then(|| trace.batch_regret.as_ref().and_then(|r| p.s.checked_sub(1).map(|k| r[k])))
            .flatten();
        let (gamma, b, beta) = match record {
            Some(r) => (Some(r.gamma_after), Some(r.b_after), r.beta_used),
            None => (if p.s == 0 { gamma_init } else { None }, if p.s == 0 { Some(1.0) } else { None }, None),
        };
        let _ = writeln!(
            out,
            ",{},{},{},{},{},{},{}",
            p.y,
            num(truth),
            num(simple),
            num(batch),
            num(gamma),
            num(b),
            num(beta)
        );
    }
    out
}
