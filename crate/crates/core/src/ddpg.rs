//! Off-policy actor-critic learner: replay buffer, Gaussian exploration,
//! TD-error extraction and the paired actor/critic update steps.
//!
//! The critic regresses the bootstrapped Bellman target built from the target
//! networks; the actor ascends the critic's action gradient. Each agent owns
//! its parameters, optimizer state and targets; buffers are single-owner.

use ndarray::{s, Array2};
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::nn::{adam_step, soft_update, Activation, Adam, Gradients, Mlp, NnError};

/// One environment interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
    pub reward: f64,
}

/// Fixed-capacity ring with oldest-first eviction and uniform sampling
/// without replacement within a batch.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    write: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "capacity must be positive");
        Self {
            capacity,
            items: Vec::new(),
            write: 0,
        }
    }

    pub fn push(&mut self, transition: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(transition);
        } else {
            self.items[self.write] = transition;
        }
        self.write = (self.write + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform sample of `min(n, len)` distinct stored transitions.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, rng: &mut R, n: usize) -> Vec<&'a Transition> {
        let amount = n.min(self.items.len());
        rand::seq::index::sample(rng, self.items.len(), amount)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DdpgConfig {
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Polyak rate for the target networks.
    pub tau_soft: f64,
    pub batch_size: usize,
    pub noise_std: f64,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            actor_lr: 1e-4,
            critic_lr: 1e-4,
            tau_soft: 0.005,
            batch_size: 128,
            noise_std: 0.2,
        }
    }
}

/// Actor-critic pair with target networks and Adam state.
#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    pub gamma: f64,
    pub tau_soft: f64,
    pub noise_std: f64,
    state_dim: usize,
    action_dim: usize,
}

impl DdpgAgent {
    /// Fresh agent: tanh-head actor, identity-head critic over `[s, a]`.
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        cfg: &DdpgConfig,
        rng: &mut R,
    ) -> Self {
        let mut actor_sizes = vec![state_dim];
        actor_sizes.extend_from_slice(hidden);
        actor_sizes.push(action_dim);
        let mut critic_sizes = vec![state_dim + action_dim];
        critic_sizes.extend_from_slice(hidden);
        critic_sizes.push(1);
        let actor = Mlp::new(&actor_sizes, Activation::Tanh, rng);
        let critic = Mlp::new(&critic_sizes, Activation::Identity, rng);
        Self::from_params(actor, critic, cfg)
    }

    /// Wraps existing parameters (e.g. cloned from a meta-model); targets
    /// start as copies of the online networks.
    pub fn from_params(actor: Mlp, critic: Mlp, cfg: &DdpgConfig) -> Self {
        let state_dim = actor.input_dim();
        let action_dim = actor.output_dim();
        assert_eq!(
            critic.input_dim(),
            state_dim + action_dim,
            "critic must consume [state, action]"
        );
        Self {
            actor_opt: Adam::new(&actor, cfg.actor_lr),
            critic_opt: Adam::new(&critic, cfg.critic_lr),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            gamma: cfg.gamma,
            tau_soft: cfg.tau_soft,
            noise_std: cfg.noise_std,
            state_dim,
            action_dim,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// Greedy action plus optional Gaussian exploration, clipped to [-1, 1].
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        explore: bool,
        rng: &mut R,
    ) -> Vec<f64> {
        let mut action = self.actor.forward(state);
        if explore && self.noise_std > 0.0 {
            let noise = Normal::new(0.0, self.noise_std).expect("finite noise std");
            for a in &mut action {
                *a += rng.sample(noise);
            }
        }
        for a in &mut action {
            *a = a.clamp(-1.0, 1.0);
        }
        action
    }

    fn batch_matrices(&self, batch: &[&Transition]) -> (Array2<f64>, Array2<f64>, Array2<f64>, Vec<f64>) {
        let n = batch.len();
        let mut states = Array2::zeros((n, self.state_dim));
        let mut actions = Array2::zeros((n, self.action_dim));
        let mut next_states = Array2::zeros((n, self.state_dim));
        let mut rewards = Vec::with_capacity(n);
        for (i, t) in batch.iter().enumerate() {
            states.row_mut(i).assign(&ndarray::ArrayView1::from(&t.state[..]));
            actions.row_mut(i).assign(&ndarray::ArrayView1::from(&t.action[..]));
            next_states
                .row_mut(i)
                .assign(&ndarray::ArrayView1::from(&t.next_state[..]));
            rewards.push(t.reward);
        }
        (states, actions, next_states, rewards)
    }

    fn concat_state_action(&self, states: &Array2<f64>, actions: &Array2<f64>) -> Array2<f64> {
        let n = states.nrows();
        let mut joint = Array2::zeros((n, self.state_dim + self.action_dim));
        joint.slice_mut(s![.., ..self.state_dim]).assign(states);
        joint.slice_mut(s![.., self.state_dim..]).assign(actions);
        joint
    }

    /// Bellman targets r + gamma * Q_target(s', pi_target(s')).
    fn targets(&self, next_states: &Array2<f64>, rewards: &[f64]) -> Vec<f64> {
        let next_actions = self.target_actor.forward_batch(next_states.view());
        let joint = self.concat_state_action(next_states, &next_actions);
        let q_next = self.target_critic.forward_batch(joint.view());
        rewards
            .iter()
            .zip(q_next.column(0))
            .map(|(r, q)| r + self.gamma * q)
            .collect()
    }

    /// Mean squared TD loss on the batch and its critic gradients; no update.
    pub fn critic_grads(&self, batch: &[&Transition]) -> (f64, Gradients) {
        let n = batch.len();
        let (states, actions, next_states, rewards) = self.batch_matrices(batch);
        let targets = self.targets(&next_states, &rewards);
        let joint = self.concat_state_action(&states, &actions);
        let q = self.critic.forward_batch(joint.view());
        let mut loss = 0.0;
        let mut upstream = Array2::zeros((n, 1));
        for i in 0..n {
            let diff = q[(i, 0)] - targets[i];
            loss += diff * diff;
            upstream[(i, 0)] = 2.0 * diff / n as f64;
        }
        let (grads, _) = self.critic.backward_batch(joint.view(), upstream.view());
        (loss / n as f64, grads)
    }

    /// Mean Q under the current policy and the actor's ascent gradients in
    /// descent convention; no update.
    pub fn actor_grads(&self, batch: &[&Transition]) -> (f64, Gradients) {
        let n = batch.len();
        let (states, _, _, _) = self.batch_matrices(batch);
        let actions = self.actor.forward_batch(states.view());
        let joint = self.concat_state_action(&states, &actions);
        let q = self.critic.forward_batch(joint.view());
        let objective = q.column(0).sum() / n as f64;
        let upstream = Array2::from_elem((n, 1), 1.0 / n as f64);
        let (_, d_joint) = self.critic.backward_batch(joint.view(), upstream.view());
        // Chain rule through the critic input: only the action block feeds
        // the actor; negate so Adam's descent maximizes Q.
        let d_action = d_joint.slice(s![.., self.state_dim..]).mapv(|g| -g);
        let (grads, _) = self.actor.backward_batch(states.view(), d_action.view());
        (objective, grads)
    }

    /// One Adam step on the critic; returns the pre-step loss.
    pub fn critic_train_step(&mut self, batch: &[&Transition]) -> Result<f64, NnError> {
        let (loss, grads) = self.critic_grads(batch);
        if !loss.is_finite() {
            return Err(NnError::NonFiniteGradient);
        }
        adam_step(&mut self.critic, &grads, &mut self.critic_opt)?;
        Ok(loss)
    }

    /// One Adam ascent step on the actor; returns the pre-step mean Q.
    pub fn actor_train_step(&mut self, batch: &[&Transition]) -> Result<f64, NnError> {
        let (objective, grads) = self.actor_grads(batch);
        if !objective.is_finite() {
            return Err(NnError::NonFiniteGradient);
        }
        adam_step(&mut self.actor, &grads, &mut self.actor_opt)?;
        Ok(objective)
    }

    /// TD residuals r + gamma * Q_target(s', pi_target(s')) - Q(s, a).
    /// Side-effect free.
    pub fn td_errors(&self, batch: &[&Transition]) -> Vec<f64> {
        let (states, actions, next_states, rewards) = self.batch_matrices(batch);
        let targets = self.targets(&next_states, &rewards);
        let joint = self.concat_state_action(&states, &actions);
        let q = self.critic.forward_batch(joint.view());
        targets
            .iter()
            .zip(q.column(0))
            .map(|(y, q)| y - q)
            .collect()
    }

    /// Polyak-averages both target networks toward the online ones.
    pub fn soft_update_targets(&mut self) {
        soft_update(&mut self.target_actor, &self.actor, self.tau_soft);
        soft_update(&mut self.target_critic, &self.critic, self.tau_soft);
    }
}
