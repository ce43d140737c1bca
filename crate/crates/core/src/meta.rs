//! Task-weighted meta-training over a family of DU scenarios, plus few-shot
//! adaptation to new tasks and the comparison baselines.
//!
//! Each meta iteration clones the meta-model into every task, collects
//! evaluation episodes into disjoint support/query buffers, performs support
//! updates, and folds the query gradients at the adapted parameters back into
//! the meta-model (first-order treatment of the inner step). Task weights
//! come from a Softmin over per-task TD-error variances, so noisy tasks pull
//! less on the shared initialization while still being tracked.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ddpg::{DdpgAgent, DdpgConfig, ReplayBuffer};
use crate::env::{build_env, episode_seed, EnvConfig, EnvError, TaskSpec, SLICE_COUNT};
use crate::hrl::{
    run_episode, run_episode_random, EpisodeConfig, EpisodeRecord, HrlAgents, HIGHER_ACTION_DIM,
    HIGHER_OBS_DIM,
};
use crate::metrics::cumulative_reward;
use crate::nn::{
    adam_step, read_checkpoint, write_checkpoint, Activation, Adam, Gradients, Mlp, NnError,
};
use crate::num::mix_seed;

#[derive(Debug, Error)]
pub enum MetaError {
    #[error("no tasks to train on")]
    NoTasks,
    #[error("query set is empty")]
    EmptyQuerySet,
    #[error("TD window needs at least 2 samples, got {0}")]
    WindowTooSmall(usize),
    #[error("checkpoint shapes are incompatible: {0}")]
    IncompatibleCheckpoint(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Actor/critic parameters of one controller.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    pub actor: Mlp,
    pub critic: Mlp,
}

/// The shared initialization: one higher controller and one lower controller
/// per slice.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaModel {
    pub higher: AgentParams,
    pub lowers: Vec<AgentParams>,
}

impl MetaModel {
    pub fn init<R: Rng + ?Sized>(ue_count: usize, hidden: &[usize], rng: &mut R) -> Self {
        let make = |input: usize, output: usize, rng: &mut R| {
            let mut actor_sizes = vec![input];
            actor_sizes.extend_from_slice(hidden);
            actor_sizes.push(output);
            let mut critic_sizes = vec![input + output];
            critic_sizes.extend_from_slice(hidden);
            critic_sizes.push(1);
            AgentParams {
                actor: Mlp::new(&actor_sizes, Activation::Tanh, rng),
                critic: Mlp::new(&critic_sizes, Activation::Identity, rng),
            }
        };
        MetaModel {
            higher: make(HIGHER_OBS_DIM, HIGHER_ACTION_DIM, rng),
            lowers: (0..SLICE_COUNT)
                .map(|_| make(crate::hrl::lower_obs_dim(ue_count), ue_count, rng))
                .collect(),
        }
    }

    /// Clones the shared parameters into a fresh learner; targets start as
    /// copies and Adam state starts empty.
    pub fn to_agents(&self, cfg: &DdpgConfig) -> HrlAgents {
        HrlAgents {
            higher: DdpgAgent::from_params(self.higher.actor.clone(), self.higher.critic.clone(), cfg),
            lowers: self
                .lowers
                .iter()
                .map(|p| DdpgAgent::from_params(p.actor.clone(), p.critic.clone(), cfg))
                .collect(),
        }
    }

    /// UE capacity the lower controllers were built for.
    pub fn ue_capacity(&self) -> usize {
        self.lowers[0].actor.output_dim()
    }

    fn entries(&self) -> Vec<(String, &Mlp)> {
        let mut entries = vec![
            ("higher.actor".to_string(), &self.higher.actor),
            ("higher.critic".to_string(), &self.higher.critic),
        ];
        for (s, p) in self.lowers.iter().enumerate() {
            entries.push((format!("lower{s}.actor"), &p.actor));
            entries.push((format!("lower{s}.critic"), &p.critic));
        }
        entries
    }

    pub fn save(&self, path: &Path) -> Result<(), MetaError> {
        let entries = self.entries();
        let borrowed: Vec<(&str, &Mlp)> = entries.iter().map(|(n, m)| (n.as_str(), *m)).collect();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &borrowed)?;
        fs::write(path, buf).map_err(NnError::Io)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, MetaError> {
        let bytes = fs::read(path).map_err(NnError::Io)?;
        let entries = read_checkpoint(&mut bytes.as_slice())?;
        let find = |name: &str| -> Result<Mlp, MetaError> {
            entries
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, m)| m.clone())
                .ok_or_else(|| MetaError::IncompatibleCheckpoint(format!("missing entry {name}")))
        };
        let higher = AgentParams {
            actor: find("higher.actor")?,
            critic: find("higher.critic")?,
        };
        let mut lowers = Vec::with_capacity(SLICE_COUNT);
        for s in 0..SLICE_COUNT {
            lowers.push(AgentParams {
                actor: find(&format!("lower{s}.actor"))?,
                critic: find(&format!("lower{s}.critic"))?,
            });
        }
        Ok(MetaModel { higher, lowers })
    }

    /// Checks that the parameter shapes fit a scenario with `ue_count` UEs.
    pub fn check_compatible(&self, ue_count: usize) -> Result<(), MetaError> {
        if self.higher.actor.input_dim() != HIGHER_OBS_DIM
            || self.higher.actor.output_dim() != HIGHER_ACTION_DIM
        {
            return Err(MetaError::IncompatibleCheckpoint(format!(
                "higher actor is {}x{}, expected {HIGHER_OBS_DIM}x{HIGHER_ACTION_DIM}",
                self.higher.actor.input_dim(),
                self.higher.actor.output_dim()
            )));
        }
        let expected_in = crate::hrl::lower_obs_dim(ue_count);
        for (s, p) in self.lowers.iter().enumerate() {
            if p.actor.input_dim() != expected_in || p.actor.output_dim() != ue_count {
                return Err(MetaError::IncompatibleCheckpoint(format!(
                    "lower{s} actor is {}x{}, expected {}x{}",
                    p.actor.input_dim(),
                    p.actor.output_dim(),
                    expected_in,
                    ue_count
                )));
            }
        }
        Ok(())
    }
}

/// Gradient bundle mirroring the meta-model structure.
#[derive(Debug, Clone)]
pub struct AgentGrads {
    pub actor: Gradients,
    pub critic: Gradients,
}

#[derive(Debug, Clone)]
pub struct MetaGradient {
    pub higher: AgentGrads,
    pub lowers: Vec<AgentGrads>,
}

impl MetaGradient {
    pub fn zeros_like(model: &MetaModel) -> Self {
        let zero = |p: &AgentParams| AgentGrads {
            actor: Gradients::zeros_like(&p.actor),
            critic: Gradients::zeros_like(&p.critic),
        };
        Self {
            higher: zero(&model.higher),
            lowers: model.lowers.iter().map(zero).collect(),
        }
    }

    pub fn axpy(&mut self, factor: f64, other: &MetaGradient) {
        self.higher.actor.axpy(factor, &other.higher.actor);
        self.higher.critic.axpy(factor, &other.higher.critic);
        for (mine, theirs) in self.lowers.iter_mut().zip(&other.lowers) {
            mine.actor.axpy(factor, &theirs.actor);
            mine.critic.axpy(factor, &theirs.critic);
        }
    }
}

/// Adam state for every network of the meta-model.
#[derive(Debug, Clone)]
pub struct MetaOptimizer {
    higher_actor: Adam,
    higher_critic: Adam,
    lowers: Vec<(Adam, Adam)>,
}

impl MetaOptimizer {
    pub fn new(model: &MetaModel, actor_lr: f64, critic_lr: f64) -> Self {
        Self {
            higher_actor: Adam::new(&model.higher.actor, actor_lr),
            higher_critic: Adam::new(&model.higher.critic, critic_lr),
            lowers: model
                .lowers
                .iter()
                .map(|p| (Adam::new(&p.actor, actor_lr), Adam::new(&p.critic, critic_lr)))
                .collect(),
        }
    }

    pub fn set_lr(&mut self, actor_lr: f64, critic_lr: f64) {
        self.higher_actor.lr = actor_lr;
        self.higher_critic.lr = critic_lr;
        for (a, c) in &mut self.lowers {
            a.lr = actor_lr;
            c.lr = critic_lr;
        }
    }
}

/// Unbiased sample variance over a TD-error window.
pub fn td_variance(window: &[f64]) -> Result<f64, MetaError> {
    if window.len() < 2 {
        return Err(MetaError::WindowTooSmall(window.len()));
    }
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    Ok(window.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0))
}

/// Softmin weights: smaller variances earn larger weights. Computed with a
/// min-shift so extreme variances stay finite; invariant under adding a
/// constant to every variance.
pub fn softmin_weights(variances: &[f64]) -> Vec<f64> {
    let m = variances.iter().cloned().fold(f64::INFINITY, f64::min);
    let exps: Vec<f64> = variances.iter().map(|&v| (-(v - m)).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Rolling per-task TD-error windows feeding the Softmin weights.
#[derive(Debug, Clone)]
pub struct WeightState {
    windows: Vec<VecDeque<f64>>,
    capacity: usize,
}

impl WeightState {
    pub fn new(task_count: usize, capacity: usize) -> Self {
        Self {
            windows: vec![VecDeque::new(); task_count],
            capacity: capacity.max(2),
        }
    }

    pub fn push(&mut self, task: usize, errors: &[f64]) {
        let window = &mut self.windows[task];
        for &e in errors {
            if window.len() == self.capacity {
                window.pop_front();
            }
            window.push_back(e);
        }
    }

    /// Per-task variances; windows that are still too small report 0 so that
    /// early iterations behave uniformly.
    pub fn variances(&self) -> Vec<f64> {
        self.windows
            .iter()
            .map(|w| {
                if w.len() < 2 {
                    0.0
                } else {
                    let (a, b) = w.as_slices();
                    let joined: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
                    td_variance(&joined).unwrap()
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightingMode {
    /// Every task weighs 1/N in the meta update.
    Uniform,
    /// Softmin of the burn-in average variance, frozen afterwards.
    StaticVar,
    /// Softmin of the current variance window, recomputed every iteration.
    AdaptiveVar,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetaConfig {
    /// Meta iterations T.
    pub iterations: usize,
    /// Evaluation episodes collected per task per iteration.
    pub eval_episodes: usize,
    pub episode_len: usize,
    /// Support-set gradient updates per task per iteration.
    pub inner_steps: usize,
    pub batch_size: usize,
    /// Task-level actor learning rate.
    pub inner_lr: f64,
    /// Task-level critic learning rate; critics usually tolerate a larger
    /// step than the policy they feed.
    pub inner_critic_lr: f64,
    /// Meta-level actor learning rate.
    pub meta_lr: f64,
    /// Meta-level critic learning rate.
    pub meta_critic_lr: f64,
    /// Optional hyperbolic decay of the meta rate: beta_t = beta / (1 + d*t),
    /// which drives beta_t / alpha toward 0.
    pub meta_lr_decay: f64,
    pub gamma: f64,
    pub hidden: Vec<usize>,
    pub h_period: usize,
    pub weighting: WeightingMode,
    /// TD-error window size per task.
    pub td_window: usize,
    /// Fraction of iterations used to estimate the frozen Static-Var weights.
    pub burn_in_frac: f64,
    pub noise_std_init: f64,
    pub noise_std_final: f64,
    pub tau_soft: f64,
    pub buffer_capacity: usize,
    pub seed: u64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            eval_episodes: 10,
            episode_len: 40,
            inner_steps: 10,
            batch_size: 128,
            inner_lr: 1e-4,
            inner_critic_lr: 1e-4,
            meta_lr: 1e-4,
            meta_critic_lr: 1e-4,
            meta_lr_decay: 0.0,
            gamma: 0.99,
            hidden: crate::nn::DEFAULT_HIDDEN.to_vec(),
            h_period: 1,
            weighting: WeightingMode::AdaptiveVar,
            td_window: 512,
            burn_in_frac: 0.2,
            noise_std_init: 0.2,
            noise_std_final: 0.02,
            tau_soft: 0.005,
            buffer_capacity: 1_000_000,
            seed: 0,
        }
    }
}

impl MetaConfig {
    pub fn ddpg(&self) -> DdpgConfig {
        DdpgConfig {
            gamma: self.gamma,
            actor_lr: self.inner_lr,
            critic_lr: self.inner_critic_lr,
            tau_soft: self.tau_soft,
            batch_size: self.batch_size,
            noise_std: self.noise_std_init,
        }
    }
}

/// Linear exploration decay over the training horizon.
pub fn exploration_std(step: usize, total: usize, init: f64, last: f64) -> f64 {
    if total <= 1 {
        return last;
    }
    let frac = (step as f64 / (total - 1) as f64).clamp(0.0, 1.0);
    init + (last - init) * frac
}

/// One row of the training log; a meta iteration appends one row per task.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogRow {
    pub iteration: usize,
    pub task_id: usize,
    pub critic_loss: f64,
    pub actor_objective: f64,
    pub mean_return: f64,
    pub td_variance: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    /// Mean per-iteration return across tasks, in iteration order.
    pub fn mean_return_by_iteration(&self) -> Vec<f64> {
        let mut sums: Vec<(f64, usize)> = Vec::new();
        for row in &self.rows {
            if row.iteration >= sums.len() {
                sums.resize(row.iteration + 1, (0.0, 0));
            }
            sums[row.iteration].0 += row.mean_return;
            sums[row.iteration].1 += 1;
        }
        sums.iter().map(|(s, n)| s / (*n).max(1) as f64).collect()
    }
}

/// Replay storage for one HRL learner: one buffer per controller.
#[derive(Debug, Clone)]
pub struct HrlBuffers {
    pub higher: ReplayBuffer,
    pub lowers: Vec<ReplayBuffer>,
}

impl HrlBuffers {
    pub fn new(capacity: usize) -> Self {
        Self {
            higher: ReplayBuffer::new(capacity),
            lowers: (0..SLICE_COUNT).map(|_| ReplayBuffer::new(capacity)).collect(),
        }
    }

    pub fn absorb(&mut self, record: &EpisodeRecord) {
        for t in &record.higher {
            self.higher.push(t.clone());
        }
        for (s, transitions) in record.lowers.iter().enumerate() {
            for t in transitions {
                self.lowers[s].push(t.clone());
            }
        }
    }
}

/// Persistent per-task training state: buffers accumulate across meta
/// iterations, the episode counter keeps episode seeds fresh.
#[derive(Debug, Clone)]
pub struct TaskState {
    pub spec: TaskSpec,
    pub support: HrlBuffers,
    pub query: HrlBuffers,
    pub episodes_done: u64,
}

impl TaskState {
    pub fn new(spec: TaskSpec, capacity: usize) -> Self {
        Self {
            spec,
            support: HrlBuffers::new(capacity),
            query: HrlBuffers::new(capacity),
            episodes_done: 0,
        }
    }
}

/// Inner-loop statistics reported per task per iteration.
#[derive(Debug, Clone, Default)]
pub struct InnerStats {
    pub critic_loss: f64,
    pub actor_objective: f64,
    pub mean_return: f64,
    pub td_errors: Vec<f64>,
}

fn env_for_episode(spec: &TaskSpec, episode: u64, env_cfg: &EnvConfig) -> Result<crate::env::Env, EnvError> {
    let episode_spec = TaskSpec {
        seed: episode_seed(spec.seed, episode),
        ..spec.clone()
    };
    build_env(&episode_spec, env_cfg)
}

/// Clones the meta-model into the task, collects `eval_episodes` episodes
/// (alternating into support and query), then applies `inner_steps` support
/// updates. Returns the adapted learner and its statistics.
pub fn inner_adapt(
    model: &MetaModel,
    task: &mut TaskState,
    cfg: &MetaConfig,
    env_cfg: &EnvConfig,
    noise_std: f64,
    stream: u64,
) -> Result<(HrlAgents, InnerStats), MetaError> {
    let mut agents = model.to_agents(&cfg.ddpg());
    agents.set_noise_std(noise_std);
    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(task.spec.seed, stream));
    let episode_cfg = EpisodeConfig {
        steps: cfg.episode_len,
        h_period: cfg.h_period,
        explore: true,
    };
    let mut returns = Vec::with_capacity(cfg.eval_episodes);
    for _ in 0..cfg.eval_episodes {
        let episode = task.episodes_done;
        task.episodes_done += 1;
        let mut env = env_for_episode(&task.spec, episode, env_cfg)?;
        let record = run_episode(&agents, &mut env, &episode_cfg, &mut rng)?;
        returns.push(cumulative_reward(&record.higher_rewards, cfg.gamma));
        if episode % 2 == 0 {
            task.support.absorb(&record);
        } else {
            task.query.absorb(&record);
        }
    }
    let mut stats = InnerStats {
        mean_return: returns.iter().sum::<f64>() / returns.len().max(1) as f64,
        ..InnerStats::default()
    };
    let mut losses = Vec::new();
    let mut objectives = Vec::new();
    for _ in 0..cfg.inner_steps {
        train_hrl_step(
            &mut agents,
            &task.support,
            cfg.batch_size,
            &mut rng,
            &mut stats.td_errors,
            &mut losses,
            &mut objectives,
        )?;
    }
    stats.critic_loss = mean(&losses);
    stats.actor_objective = mean(&objectives);
    Ok((agents, stats))
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// One training sweep over all four controllers from their support buffers.
fn train_hrl_step<R: Rng + ?Sized>(
    agents: &mut HrlAgents,
    buffers: &HrlBuffers,
    batch_size: usize,
    rng: &mut R,
    td_sink: &mut Vec<f64>,
    losses: &mut Vec<f64>,
    objectives: &mut Vec<f64>,
) -> Result<(), MetaError> {
    if buffers.higher.len() >= 2 {
        let batch = buffers.higher.sample(rng, batch_size);
        td_sink.extend(agents.higher.td_errors(&batch));
        losses.push(agents.higher.critic_train_step(&batch)?);
        objectives.push(agents.higher.actor_train_step(&batch)?);
        agents.higher.soft_update_targets();
    }
    for (s, lower) in agents.lowers.iter_mut().enumerate() {
        if buffers.lowers[s].len() < 2 {
            continue;
        }
        let batch = buffers.lowers[s].sample(rng, batch_size);
        td_sink.extend(lower.td_errors(&batch));
        losses.push(lower.critic_train_step(&batch)?);
        objectives.push(lower.actor_train_step(&batch)?);
        lower.soft_update_targets();
    }
    Ok(())
}

/// DDPG losses and gradients on the query buffers at the adapted parameters;
/// the first-order meta-gradient contribution of one task.
pub fn query_grads<R: Rng + ?Sized>(
    agents: &HrlAgents,
    query: &HrlBuffers,
    batch_size: usize,
    rng: &mut R,
) -> Result<(InnerStats, MetaGradient), MetaError> {
    if query.higher.is_empty() {
        return Err(MetaError::EmptyQuerySet);
    }
    let mut stats = InnerStats::default();
    let mut losses = Vec::new();
    let mut objectives = Vec::new();

    let batch = query.higher.sample(rng, batch_size);
    let (higher_loss, higher_critic) = agents.higher.critic_grads(&batch);
    let (higher_obj, higher_actor) = agents.higher.actor_grads(&batch);
    losses.push(higher_loss);
    objectives.push(higher_obj);

    let mut lowers = Vec::with_capacity(SLICE_COUNT);
    for (s, lower) in agents.lowers.iter().enumerate() {
        if query.lowers[s].is_empty() {
            lowers.push(AgentGrads {
                actor: Gradients::zeros_like(&lower.actor),
                critic: Gradients::zeros_like(&lower.critic),
            });
            continue;
        }
        let batch = query.lowers[s].sample(rng, batch_size);
        let (loss, critic) = lower.critic_grads(&batch);
        let (objective, actor) = lower.actor_grads(&batch);
        losses.push(loss);
        objectives.push(objective);
        lowers.push(AgentGrads { actor, critic });
    }
    stats.critic_loss = mean(&losses);
    stats.actor_objective = mean(&objectives);
    Ok((
        stats,
        MetaGradient {
            higher: AgentGrads {
                actor: higher_actor,
                critic: higher_critic,
            },
            lowers,
        },
    ))
}

/// Applies the weighted sum of task contributions to the meta-model through
/// Adam. `weights` must sum to 1; uniform mode passes 1/N everywhere.
pub fn meta_update(
    model: &mut MetaModel,
    opt: &mut MetaOptimizer,
    contributions: &[MetaGradient],
    weights: &[f64],
) -> Result<(), MetaError> {
    debug_assert_eq!(contributions.len(), weights.len());
    let mut agg = MetaGradient::zeros_like(model);
    for (w, c) in weights.iter().zip(contributions) {
        agg.axpy(*w, c);
    }
    adam_step(&mut model.higher.actor, &agg.higher.actor, &mut opt.higher_actor)?;
    adam_step(&mut model.higher.critic, &agg.higher.critic, &mut opt.higher_critic)?;
    for (s, p) in model.lowers.iter_mut().enumerate() {
        adam_step(&mut p.actor, &agg.lowers[s].actor, &mut opt.lowers[s].0)?;
        adam_step(&mut p.critic, &agg.lowers[s].critic, &mut opt.lowers[s].1)?;
    }
    Ok(())
}

/// Output of a full meta-training run.
#[derive(Debug, Clone)]
pub struct MetaRun {
    pub model: MetaModel,
    pub log: TrainingLog,
    /// Wall-clock seconds spent per meta iteration.
    pub iteration_secs: Vec<f64>,
}

struct TaskIterOutput {
    stats: InnerStats,
    grads: MetaGradient,
}

/// The meta-training loop. Per-task inner work fans out over the global
/// thread pool; aggregation order is fixed by task index, so results do not
/// depend on the worker count.
pub fn meta_train(
    tasks: &[TaskSpec],
    cfg: &MetaConfig,
    env_cfg: &EnvConfig,
) -> Result<MetaRun, MetaError> {
    if tasks.is_empty() {
        return Err(MetaError::NoTasks);
    }
    let mut init_rng = ChaCha12Rng::seed_from_u64(mix_seed(cfg.seed, 0x4D45_5441));
    let mut model = MetaModel::init(tasks[0].ue_count, &cfg.hidden, &mut init_rng);
    let mut opt = MetaOptimizer::new(&model, cfg.meta_lr, cfg.meta_critic_lr);
    let mut weight_state = WeightState::new(tasks.len(), cfg.td_window);
    let mut task_states: Vec<TaskState> = tasks
        .iter()
        .map(|t| TaskState::new(t.clone(), cfg.buffer_capacity))
        .collect();
    let mut log = TrainingLog::default();
    let mut iteration_secs = Vec::with_capacity(cfg.iterations);
    let burn_iters = ((cfg.burn_in_frac * cfg.iterations as f64).ceil() as usize).max(1);
    let mut burn_variances: Vec<Vec<f64>> = vec![Vec::new(); tasks.len()];
    let mut frozen_weights: Option<Vec<f64>> = None;
    let uniform = vec![1.0 / tasks.len() as f64; tasks.len()];

    for iteration in 0..cfg.iterations {
        let started = std::time::Instant::now();
        let noise = exploration_std(
            iteration,
            cfg.iterations,
            cfg.noise_std_init,
            cfg.noise_std_final,
        );
        let model_ref = &model;
        let results: Vec<TaskIterOutput> = task_states
            .par_iter_mut()
            .enumerate()
            .map(|(g, state)| -> Result<TaskIterOutput, MetaError> {
                let stream = mix_seed(cfg.seed, (iteration as u64) << 20 | g as u64);
                let (agents, mut stats) =
                    inner_adapt(model_ref, state, cfg, env_cfg, noise, stream)?;
                let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(stream, 0x5155_4552));
                let (query_stats, grads) =
                    query_grads(&agents, &state.query, cfg.batch_size, &mut rng)?;
                stats.critic_loss = query_stats.critic_loss;
                stats.actor_objective = query_stats.actor_objective;
                Ok(TaskIterOutput { stats, grads })
            })
            .collect::<Result<Vec<_>, MetaError>>()?;

        for (g, out) in results.iter().enumerate() {
            weight_state.push(g, &out.stats.td_errors);
        }
        let variances = weight_state.variances();
        let weights = match cfg.weighting {
            WeightingMode::Uniform => uniform.clone(),
            WeightingMode::AdaptiveVar => softmin_weights(&variances),
            WeightingMode::StaticVar => {
                if iteration < burn_iters {
                    for (g, &v) in variances.iter().enumerate() {
                        burn_variances[g].push(v);
                    }
                    uniform.clone()
                } else {
                    frozen_weights
                        .get_or_insert_with(|| {
                            let avg: Vec<f64> =
                                burn_variances.iter().map(|v| mean(v)).collect();
                            softmin_weights(&avg)
                        })
                        .clone()
                }
            }
        };

        let contributions: Vec<MetaGradient> = results.iter().map(|r| r.grads.clone()).collect();
        let decay = 1.0 + cfg.meta_lr_decay * iteration as f64;
        opt.set_lr(cfg.meta_lr / decay, cfg.meta_critic_lr / decay);
        meta_update(&mut model, &mut opt, &contributions, &weights)?;

        for (g, out) in results.iter().enumerate() {
            log.rows.push(LogRow {
                iteration,
                task_id: tasks[g].task_id,
                critic_loss: out.stats.critic_loss,
                actor_objective: out.stats.actor_objective,
                mean_return: out.stats.mean_return,
                td_variance: variances[g],
                weight: weights[g],
            });
        }
        iteration_secs.push(started.elapsed().as_secs_f64());
    }
    Ok(MetaRun {
        model,
        log,
        iteration_secs,
    })
}

/// Few-shot adaptation knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptConfig {
    pub shots: usize,
    /// Gradient updates applied after each collected episode.
    pub updates_per_shot: usize,
    /// Greedy evaluation episodes per measurement.
    pub eval_episodes: usize,
    pub noise_std: f64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            shots: 5,
            updates_per_shot: 4,
            eval_episodes: 3,
            noise_std: 0.1,
        }
    }
}

/// Greedy evaluation summary on fixed episode seeds.
#[derive(Debug, Clone, Default)]
pub struct EvalStats {
    pub mean_return: f64,
    /// Raw slice KPIs averaged over steps and episodes.
    pub mean_kpis: [f64; SLICE_COUNT],
    /// Mean per-UE throughput, averaged over episodes.
    pub ue_throughputs: Vec<f64>,
}

/// Adaptation trace: the zero-shot measurement plus one entry per shot.
#[derive(Debug, Clone, Default)]
pub struct AdaptationReport {
    pub zero_shot_reward: f64,
    pub zero_shot_kpis: [f64; SLICE_COUNT],
    /// reward after k+1 shots at index k; length equals the shot count.
    pub per_shot_rewards: Vec<f64>,
    pub per_shot_kpis: Vec<[f64; SLICE_COUNT]>,
    /// Per-UE throughput from the final evaluation.
    pub final_ue_throughputs: Vec<f64>,
}

const EVAL_STREAM: u64 = 0xE7A1;
const ADAPT_STREAM: u64 = 0xADA7;

/// Greedy (noise-free) policy evaluation on deterministic episode seeds, so
/// every method sees identical conditions.
pub fn evaluate_policy(
    agents: &HrlAgents,
    task: &TaskSpec,
    cfg: &MetaConfig,
    env_cfg: &EnvConfig,
    episodes: usize,
) -> Result<EvalStats, MetaError> {
    let episode_cfg = EpisodeConfig {
        steps: cfg.episode_len,
        h_period: cfg.h_period,
        explore: false,
    };
    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(task.seed, EVAL_STREAM));
    let mut stats = EvalStats {
        ue_throughputs: vec![0.0; task.ue_count],
        ..EvalStats::default()
    };
    for e in 0..episodes {
        let mut env = env_for_episode(task, EVAL_STREAM ^ e as u64, env_cfg)?;
        let record = run_episode(agents, &mut env, &episode_cfg, &mut rng)?;
        stats.mean_return += cumulative_reward(&record.higher_rewards, cfg.gamma) / episodes as f64;
        for kpis in &record.kpi_trace {
            for s in 0..SLICE_COUNT {
                stats.mean_kpis[s] += kpis[s] / (episodes * record.kpi_trace.len()) as f64;
            }
        }
        for (acc, r) in stats.ue_throughputs.iter_mut().zip(&record.mean_ue_rates) {
            *acc += r / episodes as f64;
        }
    }
    Ok(stats)
}

/// Random-policy counterpart of [`evaluate_policy`] on the same seeds.
pub fn evaluate_random_policy(
    task: &TaskSpec,
    cfg: &MetaConfig,
    env_cfg: &EnvConfig,
    episodes: usize,
    seed: u64,
) -> Result<EvalStats, MetaError> {
    let episode_cfg = EpisodeConfig {
        steps: cfg.episode_len,
        h_period: cfg.h_period,
        explore: true,
    };
    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(task.seed, seed));
    let mut stats = EvalStats {
        ue_throughputs: vec![0.0; task.ue_count],
        ..EvalStats::default()
    };
    for e in 0..episodes {
        let mut env = env_for_episode(task, EVAL_STREAM ^ e as u64, env_cfg)?;
        let record = run_episode_random(&mut env, &episode_cfg, &mut rng)?;
        stats.mean_return += cumulative_reward(&record.higher_rewards, cfg.gamma) / episodes as f64;
        for kpis in &record.kpi_trace {
            for s in 0..SLICE_COUNT {
                stats.mean_kpis[s] += kpis[s] / (episodes * record.kpi_trace.len()) as f64;
            }
        }
        for (acc, r) in stats.ue_throughputs.iter_mut().zip(&record.mean_ue_rates) {
            *acc += r / episodes as f64;
        }
    }
    Ok(stats)
}

/// Initializes a learner from the meta-model and runs support-set updates
/// only: per shot, one exploratory episode is collected and
/// `updates_per_shot` gradient sweeps are applied, followed by a greedy
/// evaluation. The meta-model itself is never mutated.
pub fn meta_adapt(
    model: &MetaModel,
    task: &TaskSpec,
    adapt: &AdaptConfig,
    cfg: &MetaConfig,
    env_cfg: &EnvConfig,
) -> Result<AdaptationReport, MetaError> {
    let mut agents = model.to_agents(&cfg.ddpg());
    agents.set_noise_std(adapt.noise_std);
    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(task.seed, ADAPT_STREAM));
    let mut support = HrlBuffers::new(cfg.buffer_capacity);
    let episode_cfg = EpisodeConfig {
        steps: cfg.episode_len,
        h_period: cfg.h_period,
        explore: true,
    };

    let zero = evaluate_policy(&agents, task, cfg, env_cfg, adapt.eval_episodes)?;
    let mut report = AdaptationReport {
        zero_shot_reward: zero.mean_return,
        zero_shot_kpis: zero.mean_kpis,
        final_ue_throughputs: zero.ue_throughputs,
        ..AdaptationReport::default()
    };
    let mut scratch = Vec::new();
    for shot in 0..adapt.shots {
        let mut env = env_for_episode(task, ADAPT_STREAM ^ shot as u64, env_cfg)?;
        let record = run_episode(&agents, &mut env, &episode_cfg, &mut rng)?;
        support.absorb(&record);
        for _ in 0..adapt.updates_per_shot {
            train_hrl_step(
                &mut agents,
                &support,
                cfg.batch_size,
                &mut rng,
                &mut scratch,
                &mut Vec::new(),
                &mut Vec::new(),
            )?;
            scratch.clear();
        }
        let eval = evaluate_policy(&agents, task, cfg, env_cfg, adapt.eval_episodes)?;
        report.per_shot_rewards.push(eval.mean_return);
        report.per_shot_kpis.push(eval.mean_kpis);
        report.final_ue_throughputs = eval.ue_throughputs;
    }
    Ok(report)
}

/// Reward at `shots` adaptation shots (0 means the zero-shot measurement).
pub fn reward_at_shot(report: &AdaptationReport, shots: usize) -> f64 {
    if shots == 0 || report.per_shot_rewards.is_empty() {
        report.zero_shot_reward
    } else {
        report.per_shot_rewards[shots.min(report.per_shot_rewards.len()) - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Fresh random initialization adapted directly on the new task.
    Scratch,
    /// Single-task pre-training on one source task, then fine-tuning.
    Transfer,
    /// Shared parameters trained on one random source task and the new task.
    Multitask,
    /// Meta-training with uniform task weights.
    UniformMeta,
    /// Meta-training with weights frozen after the burn-in.
    StaticVar,
}

#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    pub kind: BaselineKind,
    pub log: TrainingLog,
    pub adaptation: AdaptationReport,
}

/// Runs one comparison method end to end: pre-training (where the method has
/// any) followed by few-shot adaptation on the held-out task.
pub fn run_baseline(
    kind: BaselineKind,
    tasks: &[TaskSpec],
    new_task: &TaskSpec,
    adapt: &AdaptConfig,
    cfg: &MetaConfig,
    env_cfg: &EnvConfig,
) -> Result<BaselineOutcome, MetaError> {
    if tasks.is_empty() {
        return Err(MetaError::NoTasks);
    }
    let (model, log) = match kind {
        BaselineKind::Scratch => {
            let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(cfg.seed, 0x5C7A));
            (
                MetaModel::init(new_task.ue_count, &cfg.hidden, &mut rng),
                TrainingLog::default(),
            )
        }
        BaselineKind::Transfer => {
            let run = meta_train(
                &[tasks[0].clone()],
                &MetaConfig {
                    weighting: WeightingMode::Uniform,
                    ..cfg.clone()
                },
                env_cfg,
            )?;
            (run.model, run.log)
        }
        BaselineKind::Multitask => {
            let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(cfg.seed, 0x4174));
            let source = tasks[rng.random_range(0..tasks.len())].clone();
            let run = meta_train(
                &[source, new_task.clone()],
                &MetaConfig {
                    weighting: WeightingMode::Uniform,
                    ..cfg.clone()
                },
                env_cfg,
            )?;
            (run.model, run.log)
        }
        BaselineKind::UniformMeta => {
            let run = meta_train(
                tasks,
                &MetaConfig {
                    weighting: WeightingMode::Uniform,
                    ..cfg.clone()
                },
                env_cfg,
            )?;
            (run.model, run.log)
        }
        BaselineKind::StaticVar => {
            let run = meta_train(
                tasks,
                &MetaConfig {
                    weighting: WeightingMode::StaticVar,
                    ..cfg.clone()
                },
                env_cfg,
            )?;
            (run.model, run.log)
        }
    };
    let adaptation = meta_adapt(&model, new_task, adapt, cfg, env_cfg)?;
    Ok(BaselineOutcome {
        kind,
        log,
        adaptation,
    })
}
