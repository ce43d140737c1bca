//! Two-level controller: the higher agent splits the RB grid across slices,
//! one lower agent per slice schedules its budget across that slice's UEs.
//!
//! Raw network outputs live in [-1, 1]^d; decoding maps them to integer RB
//! budgets via a shift-invariant softmax followed by largest-remainder
//! rounding, so decoded allocations are always feasible.

use ndarray::Array2;
use rand::Rng;

use crate::ddpg::{DdpgAgent, DdpgConfig, Transition};
use crate::env::{Env, EnvError, SliceId, SLICE_COUNT};
use crate::num::{largest_remainder, sigmoid, softmax};

/// Width of the higher observation: 3 normalized KPIs, 3 normalized slice
/// populations, 3 previous budget fractions.
pub const HIGHER_OBS_DIM: usize = 9;
pub const HIGHER_ACTION_DIM: usize = SLICE_COUNT;

pub fn lower_obs_dim(ue_count: usize) -> usize {
    3 + ue_count
}

/// Inter-slice budget decision realized as a contiguous-block slice mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Goal {
    /// RBs granted to each slice; sums to the grid size.
    pub rb_budget: Vec<usize>,
    /// Realized mask b (L x K): slice blocks in slice order.
    pub slice_mask: Array2<bool>,
}

impl Goal {
    /// RB index range owned by slice `s`.
    pub fn block_range(&self, slice: usize) -> std::ops::Range<usize> {
        let start: usize = self.rb_budget[..slice].iter().sum();
        start..start + self.rb_budget[slice]
    }
}

/// Maps a raw higher action to slice budgets: softmax to positive fractions,
/// scale by the grid size, round by largest remainder (ties to the lowest
/// slice index), then hand out contiguous blocks in slice order.
pub fn decode_higher_action(a_raw: &[f64], rb_count: usize) -> Goal {
    assert_eq!(a_raw.len(), SLICE_COUNT, "higher action must have one entry per slice");
    let weights = softmax(a_raw);
    let rb_budget = largest_remainder(&weights, rb_count);
    let mut slice_mask = Array2::from_elem((SLICE_COUNT, rb_count), false);
    let mut start = 0;
    for (s, &budget) in rb_budget.iter().enumerate() {
        for rb in start..start + budget {
            slice_mask[(s, rb)] = true;
        }
        start += budget;
    }
    Goal {
        rb_budget,
        slice_mask,
    }
}

/// Same normalize-and-round scheme for the intra-slice split: the first
/// `ue_count` entries of the raw action are softmax weights over the slice's
/// UEs; the result is per-UE RB counts summing to `budget`.
pub fn decode_lower_action(a_raw: &[f64], ue_count: usize, budget: usize) -> Vec<usize> {
    assert!(ue_count >= 1 && ue_count <= a_raw.len());
    let weights = softmax(&a_raw[..ue_count]);
    largest_remainder(&weights, budget)
}

/// Allocation units spent beyond the grid size.
pub fn rb_overflow(assignment: &Array2<bool>, rb_count: usize) -> usize {
    let used = assignment.iter().filter(|&&x| x).count();
    used.saturating_sub(rb_count)
}

/// Intra-slice reward: sigmoid of the normalized minimum throughput minus a
/// sigmoid over-allocation penalty. Stays inside (-1, 1).
pub fn lower_reward(q_min: f64, c_min: f64, c_max: f64, overflow: f64) -> f64 {
    debug_assert!(c_min < c_max);
    let normalized = (q_min - c_min) / (c_max - c_min);
    sigmoid(normalized) - sigmoid(overflow)
}

/// Inter-slice reward: sum of the normalized per-slice KPIs (the latency
/// entry arrives already negated).
pub fn higher_reward(kpis_normalized: &[f64; SLICE_COUNT]) -> f64 {
    kpis_normalized.iter().sum()
}

/// Scales raw KPIs into comparable unit ranges: throughput KPIs against
/// task-level references, latency against its cap and negated so that larger
/// is uniformly better.
#[derive(Debug, Clone, Copy)]
pub struct KpiNormalizer {
    pub embb_ref: f64,
    pub mmtc_ref: f64,
    pub tau_max: f64,
}

impl KpiNormalizer {
    pub fn from_env(env: &Env) -> Self {
        let mmtc_ues = env.state().ue_per_slice[SliceId::Mmtc.index()].max(1);
        Self {
            embb_ref: env.spec.reward_max,
            mmtc_ref: env.spec.reward_max * mmtc_ues as f64,
            tau_max: env.cfg.tau_max_s,
        }
    }

    pub fn normalize(&self, kpis: &[f64; SLICE_COUNT]) -> [f64; SLICE_COUNT] {
        [
            (kpis[0] / self.embb_ref).clamp(0.0, 1.0),
            (kpis[1] / self.mmtc_ref).clamp(0.0, 1.0),
            -(kpis[2] / self.tau_max).clamp(0.0, 1.0),
        ]
    }
}

/// Higher observation: normalized KPIs, slice populations, last budget split.
pub fn higher_obs(
    kpis_normalized: &[f64; SLICE_COUNT],
    ue_per_slice: &[usize; SLICE_COUNT],
    ue_count: usize,
    prev_budget_frac: &[f64; SLICE_COUNT],
) -> Vec<f64> {
    let mut obs = Vec::with_capacity(HIGHER_OBS_DIM);
    obs.extend_from_slice(kpis_normalized);
    obs.extend(ue_per_slice.iter().map(|&n| n as f64 / ue_count.max(1) as f64));
    obs.extend_from_slice(prev_budget_frac);
    obs
}

/// Lower observation: average/min/max slice throughput normalized by the
/// task's demand band, then the previous per-UE budget fractions
/// (zero-padded to the fixed width).
pub fn lower_obs(slice_rates: &[f64], c_min: f64, c_max: f64, prev_frac: &[f64]) -> Vec<f64> {
    let norm = |q: f64| ((q - c_min) / (c_max - c_min)).clamp(-1.0, 2.0);
    let (mut q_min, mut q_max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &r in slice_rates {
        q_min = q_min.min(r);
        q_max = q_max.max(r);
        sum += r;
    }
    let q_avg = sum / slice_rates.len().max(1) as f64;
    let mut obs = Vec::with_capacity(3 + prev_frac.len());
    obs.push(norm(q_avg));
    obs.push(norm(q_min));
    obs.push(norm(q_max));
    obs.extend_from_slice(prev_frac);
    obs
}

/// The paired controllers of one HRL agent.
#[derive(Debug, Clone)]
pub struct HrlAgents {
    pub higher: DdpgAgent,
    pub lowers: Vec<DdpgAgent>,
}

impl HrlAgents {
    pub fn new<R: Rng + ?Sized>(
        ue_count: usize,
        hidden: &[usize],
        cfg: &DdpgConfig,
        rng: &mut R,
    ) -> Self {
        let higher = DdpgAgent::new(HIGHER_OBS_DIM, HIGHER_ACTION_DIM, hidden, cfg, rng);
        let lowers = (0..SLICE_COUNT)
            .map(|_| DdpgAgent::new(lower_obs_dim(ue_count), ue_count, hidden, cfg, rng))
            .collect();
        Self { higher, lowers }
    }

    pub fn set_noise_std(&mut self, std: f64) {
        self.higher.noise_std = std;
        for lower in &mut self.lowers {
            lower.noise_std = std;
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EpisodeConfig {
    pub steps: usize,
    /// Higher-level action interval in environment steps.
    pub h_period: usize,
    pub explore: bool,
}

/// Everything one episode produces: transitions for each controller's buffer
/// and the traces used for rewards, KPIs and fairness statistics.
#[derive(Debug, Clone, Default)]
pub struct EpisodeRecord {
    pub higher: Vec<Transition>,
    pub lowers: Vec<Vec<Transition>>,
    /// Per-step composite reward.
    pub higher_rewards: Vec<f64>,
    /// Per-step, per-slice intra-slice rewards (0 for empty slices).
    pub lower_rewards: Vec<[f64; SLICE_COUNT]>,
    /// Mean per-UE throughput over the episode.
    pub mean_ue_rates: Vec<f64>,
    /// Raw slice KPIs per step.
    pub kpi_trace: Vec<[f64; SLICE_COUNT]>,
}

struct PendingHigher {
    obs: Vec<f64>,
    action: Vec<f64>,
    reward_sum: f64,
    steps: usize,
}

/// Which controller an action request belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerRole {
    Higher,
    Lower(usize),
}

/// Runs one episode of coupled higher/lower stepping. Every `h_period` steps
/// the higher agent re-splits the grid; each step every non-empty slice
/// schedules inside its block. Rewards follow the composite KPI sum for the
/// higher level and the sigmoid form for the lower level.
pub fn run_episode<R: Rng + ?Sized>(
    agents: &HrlAgents,
    env: &mut Env,
    cfg: &EpisodeConfig,
    rng: &mut R,
) -> Result<EpisodeRecord, EnvError> {
    let explore = cfg.explore;
    run_episode_with(env, cfg, |role, obs| match role {
        ControllerRole::Higher => agents.higher.select_action(obs, explore, rng),
        ControllerRole::Lower(s) => agents.lowers[s].select_action(obs, explore, rng),
    })
}

/// Same stepping with actions drawn uniformly from [-1, 1]^d; the
/// random-policy baseline.
pub fn run_episode_random<R: Rng + ?Sized>(
    env: &mut Env,
    cfg: &EpisodeConfig,
    rng: &mut R,
) -> Result<EpisodeRecord, EnvError> {
    let ue_count = env.spec.ue_count;
    run_episode_with(env, cfg, |role, _obs| {
        let dim = match role {
            ControllerRole::Higher => HIGHER_ACTION_DIM,
            ControllerRole::Lower(_) => ue_count,
        };
        (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
    })
}

fn run_episode_with(
    env: &mut Env,
    cfg: &EpisodeConfig,
    mut select: impl FnMut(ControllerRole, &[f64]) -> Vec<f64>,
) -> Result<EpisodeRecord, EnvError> {
    let ue_count = env.spec.ue_count;
    let rb_count = env.spec.rb_count;
    let (c_min, c_max) = (env.spec.reward_min, env.spec.reward_max);
    let normalizer = KpiNormalizer::from_env(env);
    let members: Vec<Vec<usize>> = SliceId::ALL
        .iter()
        .map(|&s| {
            (0..ue_count)
                .filter(|&u| env.state().ues[u].slice == s)
                .collect()
        })
        .collect();
    let ue_per_slice = env.state().ue_per_slice;

    let mut record = EpisodeRecord {
        lowers: vec![Vec::new(); SLICE_COUNT],
        mean_ue_rates: vec![0.0; ue_count],
        ..EpisodeRecord::default()
    };
    let mut prev_budget_frac = [1.0 / SLICE_COUNT as f64; SLICE_COUNT];
    let mut prev_lower_frac = vec![vec![0.0; ue_count]; SLICE_COUNT];
    let mut goal = decode_higher_action(&vec![0.0; SLICE_COUNT], rb_count);
    let mut pending: Option<PendingHigher> = None;

    let build_higher_obs = |env: &Env, prev: &[f64; SLICE_COUNT]| {
        let kpis = normalizer.normalize(&env.state().kpis);
        higher_obs(&kpis, &ue_per_slice, ue_count, prev)
    };
    let slice_rates = |env: &Env, s: usize| -> Vec<f64> {
        members[s].iter().map(|&u| env.state().ues[u].last_rate).collect()
    };

    for t in 0..cfg.steps {
        if t % cfg.h_period.max(1) == 0 {
            let obs = build_higher_obs(env, &prev_budget_frac);
            if let Some(p) = pending.take() {
                record.higher.push(Transition {
                    state: p.obs,
                    action: p.action,
                    next_state: obs.clone(),
                    reward: p.reward_sum / p.steps.max(1) as f64,
                });
            }
            let action = select(ControllerRole::Higher, &obs);
            goal = decode_higher_action(&action, rb_count);
            for s in 0..SLICE_COUNT {
                prev_budget_frac[s] = goal.rb_budget[s] as f64 / rb_count.max(1) as f64;
            }
            pending = Some(PendingHigher {
                obs,
                action,
                reward_sum: 0.0,
                steps: 0,
            });
        }

        let mut assignment = Array2::from_elem((ue_count, rb_count), false);
        let mut lower_steps: Vec<Option<(Vec<f64>, Vec<f64>)>> = vec![None; SLICE_COUNT];
        for s in 0..SLICE_COUNT {
            if members[s].is_empty() {
                continue;
            }
            let obs = lower_obs(&slice_rates(env, s), c_min, c_max, &prev_lower_frac[s]);
            let action = select(ControllerRole::Lower(s), &obs);
            let counts = decode_lower_action(&action, members[s].len(), goal.rb_budget[s]);
            let block = goal.block_range(s);
            let mut next_rb = block.start;
            for (&ue, &count) in members[s].iter().zip(&counts) {
                for rb in next_rb..next_rb + count {
                    assignment[(ue, rb)] = true;
                }
                next_rb += count;
            }
            let budget = goal.rb_budget[s];
            for (slot, &count) in prev_lower_frac[s].iter_mut().zip(&counts) {
                *slot = if budget > 0 {
                    count as f64 / budget as f64
                } else {
                    0.0
                };
            }
            lower_steps[s] = Some((obs, action));
        }

        let outcome = env.step(&goal.slice_mask, &assignment)?;
        let overflow = rb_overflow(&assignment, rb_count) as f64;
        let reward_h = higher_reward(&normalizer.normalize(&outcome.kpis));

        let mut lower_rewards = [0.0; SLICE_COUNT];
        for s in 0..SLICE_COUNT {
            let Some((obs, action)) = lower_steps[s].take() else {
                continue;
            };
            let rates = slice_rates(env, s);
            let q_min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
            let reward = lower_reward(q_min, c_min, c_max, overflow);
            lower_rewards[s] = reward;
            let next_obs = lower_obs(&rates, c_min, c_max, &prev_lower_frac[s]);
            record.lowers[s].push(Transition {
                state: obs,
                action,
                next_state: next_obs,
                reward,
            });
        }

        if let Some(p) = pending.as_mut() {
            p.reward_sum += reward_h;
            p.steps += 1;
        }
        record.higher_rewards.push(reward_h);
        record.lower_rewards.push(lower_rewards);
        record.kpi_trace.push(outcome.kpis);
        for (acc, rate) in record.mean_ue_rates.iter_mut().zip(&outcome.rates) {
            *acc += rate / cfg.steps.max(1) as f64;
        }
    }

    if let Some(p) = pending.take() {
        let obs = build_higher_obs(env, &prev_budget_frac);
        record.higher.push(Transition {
            state: p.obs,
            action: p.action,
            next_state: obs,
            reward: p.reward_sum / p.steps.max(1) as f64,
        });
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_env, EnvConfig, TaskSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn equal_raw_gives_equal_thirds() {
        for x in [-0.7, 0.0, 0.9] {
            let goal = decode_higher_action(&[x, x, x], 100);
            assert_eq!(goal.rb_budget, vec![34, 33, 33]);
        }
        let goal = decode_higher_action(&[0.2, 0.2, 0.2], 0);
        assert_eq!(goal.rb_budget, vec![0, 0, 0]);
    }

    #[test]
    fn budgets_are_shift_invariant() {
        let raw = [0.4, -0.9, 0.1];
        let base = decode_higher_action(&raw, 64);
        for c in [-3.0, 0.5, 10.0] {
            let shifted: Vec<f64> = raw.iter().map(|x| x + c).collect();
            assert_eq!(decode_higher_action(&shifted, 64).rb_budget, base.rb_budget);
        }
    }

    #[test]
    fn raising_a_coordinate_never_lowers_its_budget() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let raw: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let i = rng.random_range(0..3);
            let before = decode_higher_action(&raw, 100).rb_budget[i];
            let mut bumped = raw.clone();
            bumped[i] += rng.random_range(0.0..1.0);
            let after = decode_higher_action(&bumped, 100).rb_budget[i];
            assert!(after >= before, "{raw:?} -> bump {i}: {before} -> {after}");
        }
    }

    #[test]
    fn goal_mask_is_contiguous_blocks() {
        let goal = decode_higher_action(&[1.0, -1.0, -1.0], 16);
        assert_eq!(goal.rb_budget.iter().sum::<usize>(), 16);
        for s in 0..SLICE_COUNT {
            let block = goal.block_range(s);
            for rb in 0..16 {
                assert_eq!(goal.slice_mask[(s, rb)], block.contains(&rb));
            }
        }
    }

    #[test]
    fn lower_decode_cases() {
        // Single UE takes the whole budget.
        assert_eq!(decode_lower_action(&[0.3, 0.0], 1, 7), vec![7]);
        // Equal raw, 2 UEs, budget 5: largest remainder, index order.
        assert_eq!(decode_lower_action(&[0.1, 0.1], 2, 5), vec![3, 2]);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..500 {
            let n = rng.random_range(1..6);
            let budget = rng.random_range(0..12);
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let counts = decode_lower_action(&raw, n, budget);
            assert_eq!(counts.iter().sum::<usize>(), budget);
        }
    }

    #[test]
    fn overflow_arithmetic() {
        let mut e = Array2::from_elem((4, 8), false);
        for rb in 0..8 {
            e[(0, rb)] = true;
        }
        assert_eq!(rb_overflow(&e, 8), 0);
        for rb in 0..4 {
            e[(1, rb)] = true;
        }
        assert_eq!(rb_overflow(&e, 8), 4);
        let empty = Array2::from_elem((2, 4), false);
        assert_eq!(rb_overflow(&empty, 4), 0);
    }

    #[test]
    fn lower_reward_reference_points() {
        // Q_m at the floor with no overflow sits exactly at zero.
        assert_eq!(lower_reward(1.0, 1.0, 2.0, 0.0), 0.0);
        // Q_m at the ceiling: sigmoid(1) - 0.5.
        let r = lower_reward(2.0, 1.0, 2.0, 0.0);
        assert!((r - (sigmoid(1.0) - 0.5)).abs() < 1e-12);
        assert!((r - 0.2311).abs() < 1e-4);
        // Strictly decreasing in overflow.
        let mut last = f64::INFINITY;
        for overflow in 0..=10 {
            let r = lower_reward(1.5, 1.0, 2.0, overflow as f64);
            assert!(r < last);
            last = r;
        }
    }

    #[test]
    fn lower_reward_stays_in_open_unit_interval() {
        // Ranges kept inside the regime where the sigmoids are not rounded
        // to exactly 0 or 1 in f64.
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let q = rng.random_range(-3e8..3e8);
            let overflow = rng.random_range(0.0..30.0);
            let r = lower_reward(q, 0.0, 1e7, overflow);
            assert!(r > -1.0 && r < 1.0, "r {r} q {q} overflow {overflow}");
        }
    }

    #[test]
    fn higher_reward_is_additive() {
        assert_eq!(higher_reward(&[0.0, 0.0, 0.0]), 0.0);
        assert!((higher_reward(&[0.5, 0.3, 0.2]) - 1.0).abs() < 1e-15);
        let base = higher_reward(&[0.2, 0.1, -0.4]);
        assert!(higher_reward(&[0.3, 0.1, -0.4]) > base);
    }

    fn tiny_env() -> Env {
        let spec = TaskSpec {
            ue_count: 4,
            rb_count: 8,
            slice_mix: [0.5, 0.25, 0.25],
            traffic_profile: [4e6, 2e6, 1e6],
            seed: 11,
            ..TaskSpec::default()
        };
        build_env(&spec, &EnvConfig::default()).unwrap()
    }

    #[test]
    fn episode_transitions_are_consistent() {
        let mut env = tiny_env();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let agents = HrlAgents::new(4, &[16, 16], &DdpgConfig::default(), &mut rng);
        let cfg = EpisodeConfig {
            steps: 12,
            h_period: 1,
            explore: true,
        };
        let record = run_episode(&agents, &mut env, &cfg, &mut rng).unwrap();
        // With h_period 1 the higher agent acts every step.
        assert_eq!(record.higher.len(), 12);
        assert_eq!(record.higher_rewards.len(), 12);
        for t in &record.higher {
            assert_eq!(t.state.len(), HIGHER_OBS_DIM);
            assert_eq!(t.action.len(), HIGHER_ACTION_DIM);
            assert!(t.state.iter().all(|x| x.is_finite()));
            assert!(t.reward.is_finite());
        }
        for (s, lows) in record.lowers.iter().enumerate() {
            let expected = if env.state().ue_per_slice[s] > 0 { 12 } else { 0 };
            assert_eq!(lows.len(), expected);
            for t in lows {
                assert_eq!(t.state.len(), lower_obs_dim(4));
                assert_eq!(t.action.len(), 4);
            }
        }
        // Chaining: next_state of step t is the state of step t+1.
        for w in record.higher.windows(2) {
            assert_eq!(w[0].next_state, w[1].state);
        }
        for lows in &record.lowers {
            for w in lows.windows(2) {
                assert_eq!(w[0].next_state, w[1].state);
            }
        }
    }

    #[test]
    fn slower_higher_period_thins_higher_transitions() {
        let mut env = tiny_env();
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let agents = HrlAgents::new(4, &[16, 16], &DdpgConfig::default(), &mut rng);
        let cfg = EpisodeConfig {
            steps: 20,
            h_period: 10,
            explore: false,
        };
        let record = run_episode(&agents, &mut env, &cfg, &mut rng).unwrap();
        assert_eq!(record.higher.len(), 2);
    }

    #[test]
    fn zero_budget_slice_is_starved() {
        let mut env = tiny_env();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut agents = HrlAgents::new(4, &[16, 16], &DdpgConfig::default(), &mut rng);
        // Nudge the higher actor to a constant saturated split instead of
        // relying on training: overwrite its output bias so slice 2 gets 0.
        for w in &mut agents.higher.actor.weights {
            w.fill(0.0);
        }
        for b in &mut agents.higher.actor.biases {
            b.fill(0.0);
        }
        let bias = agents.higher.actor.biases.last_mut().unwrap();
        bias[0] = 5.0;
        bias[1] = 5.0;
        bias[2] = -5.0;
        let goal = decode_higher_action(
            &agents.higher.actor.forward(&vec![0.0; HIGHER_OBS_DIM]),
            8,
        );
        assert_eq!(goal.rb_budget[2], 0);
        let cfg = EpisodeConfig {
            steps: 6,
            h_period: 1,
            explore: false,
        };
        let record = run_episode(&agents, &mut env, &cfg, &mut rng).unwrap();
        // The starved slice earns the minimal reward value every step.
        let urllc = SliceId::Urllc.index();
        for step in &record.lower_rewards {
            assert!(step[urllc] <= lower_reward(0.0, env.spec.reward_min, env.spec.reward_max, 0.0));
        }
    }
}
