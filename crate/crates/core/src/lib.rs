//! Simulation and learning stack for O-RAN slice scheduling experiments.
//!
//! The crate is layered bottom-up:
//!
//! - [`channel`]: link-level math (path loss, Rayleigh fading, SINR, rates)
//! - [`env`]: per-DU cell environment with mobility, traffic and slice KPIs
//! - [`nn`]: dense networks with analytic backprop, Adam and checkpoints
//! - [`ddpg`]: off-policy actor-critic learner with replay and TD errors
//! - [`hrl`]: two-level controller: inter-slice budgets, intra-slice scheduling
//! - [`meta`]: variance-weighted meta-training and few-shot adaptation
//! - [`metrics`]: evaluation statistics (returns, CDFs, fairness, convergence)

pub mod channel;
pub mod ddpg;
pub mod env;
pub mod hrl;
pub mod meta;
pub mod metrics;
pub mod nn;
pub mod num;

pub use channel::{ChannelParams, LinkSample};
pub use ddpg::{DdpgAgent, DdpgConfig, ReplayBuffer, Transition};
pub use env::{build_env, Env, EnvConfig, SliceId, TaskDistribution, TaskSpec, UeState};
pub use hrl::{Goal, HrlAgents};
pub use meta::{AdaptationReport, MetaConfig, MetaModel, TrainingLog, WeightingMode};
pub use nn::{Activation, Adam, Gradients, Mlp};
