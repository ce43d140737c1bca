// Temporary tuning probe; not part of the deliverable.
use metahrl_core::env::{EnvConfig, FadingKind, TaskDistribution, TaskSpec};
use metahrl_core::meta::{
    evaluate_policy, evaluate_random_policy, meta_adapt, meta_train, reward_at_shot, AdaptConfig,
    MetaConfig, MetaModel, WeightingMode,
};
use metahrl_core::num::mix_seed;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "single".into());
    match which.as_str() {
        "single" => single_task(),
        "meta" => meta_vs_scratch(),
        _ => panic!("unknown probe"),
    }
}

fn desk_cfg(seed: u64) -> MetaConfig {
    MetaConfig {
        iterations: 100,
        eval_episodes: 6,
        episode_len: 30,
        inner_steps: 20,
        batch_size: 64,
        inner_lr: 3e-4,
        inner_critic_lr: 3e-3,
        meta_lr: 5e-4,
        meta_critic_lr: 2e-3,
        gamma: 0.95,
        hidden: vec![32, 32],
        h_period: 1,
        weighting: WeightingMode::AdaptiveVar,
        td_window: 512,
        noise_std_init: 0.3,
        noise_std_final: 0.1,
        tau_soft: 0.01,
        seed,
        ..MetaConfig::default()
    }
}

fn desk_task(seed: u64) -> TaskSpec {
    TaskSpec {
        ue_count: 4,
        rb_count: 8,
        slice_mix: [0.25, 0.5, 0.25],
        traffic_profile: [8e6, 3e6, 2e6],
        reward_min: 2e6,
        reward_max: 4e7,
        seed,
        ..TaskSpec::default()
    }
}

fn single_task() {
    let env_cfg = EnvConfig {
        fading: FadingKind::Unit,
        ..EnvConfig::default()
    };
    for seed in 0..5u64 {
        let task = desk_task(100 + seed);
        let cfg = desk_cfg(seed);
        let t0 = std::time::Instant::now();
        let run = meta_train(&[task.clone()], &cfg, &env_cfg).unwrap();
        let trained = evaluate_policy(
            &run.model.to_agents(&cfg.ddpg()),
            &task,
            &cfg,
            &env_cfg,
            5,
        )
        .unwrap();
        let random = evaluate_random_policy(&task, &cfg, &env_cfg, 5, 777).unwrap();
        let returns = run.log.mean_return_by_iteration();
        let closs: Vec<f64> = run.log.rows.iter().map(|r| r.critic_loss).collect();
        println!(
            "seed {seed}: random {:.3} trained {:.3} ratio {:.2} | returns {:.2}->{:.2} | closs {:.4}->{:.4} | {:.1}s",
            random.mean_return,
            trained.mean_return,
            trained.mean_return / random.mean_return,
            returns.first().unwrap(),
            returns.last().unwrap(),
            closs.first().unwrap(),
            closs.last().unwrap(),
            t0.elapsed().as_secs_f64()
        );
    }
}

fn meta_vs_scratch() {
    let env_cfg = EnvConfig::default();
    let base = TaskSpec {
        ue_count: 8,
        rb_count: 16,
        seed: 0,
        ..desk_task(0)
    };
    let dist = TaskDistribution {
        reward_min_range: (1e6, 4e6),
        reward_max_range: (2e7, 6e7),
        slice_mix_ranges: [(0.2, 0.4), (0.3, 0.5), (0.2, 0.4)],
        traffic_ranges: [(5e6, 1.2e7), (2e6, 5e6), (1e6, 3e6)],
    };
    for seed in 0..5u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(seed, 0x7A5C));
        let mut tasks = metahrl_core::env::sample_tasks(
            5,
            &TaskSpec {
                seed: seed * 1000,
                ..base.clone()
            },
            &dist,
            &mut rng,
        );
        let new_task = tasks.pop().unwrap();
        let cfg = desk_cfg(seed);
        let adapt = AdaptConfig {
            shots: 5,
            updates_per_shot: 10,
            eval_episodes: 3,
            noise_std: 0.1,
        };
        let t0 = std::time::Instant::now();
        let adaptive = meta_train(&tasks, &cfg, &env_cfg).unwrap();
        let adaptive_report = meta_adapt(&adaptive.model, &new_task, &adapt, &cfg, &env_cfg).unwrap();
        let uniform = meta_train(
            &tasks,
            &MetaConfig {
                weighting: WeightingMode::Uniform,
                ..cfg.clone()
            },
            &env_cfg,
        )
        .unwrap();
        let uniform_report = meta_adapt(&uniform.model, &new_task, &adapt, &cfg, &env_cfg).unwrap();
        let mut scratch_rng = ChaCha12Rng::seed_from_u64(mix_seed(cfg.seed, 0x5C7A));
        let scratch_model = MetaModel::init(new_task.ue_count, &cfg.hidden, &mut scratch_rng);
        let scratch_report = meta_adapt(&scratch_model, &new_task, &adapt, &cfg, &env_cfg).unwrap();
        println!(
            "seed {seed}: adaptive {:.3} uniform {:.3} scratch {:.3} (zero-shot a/u/s {:.3}/{:.3}/{:.3}) | {:.0}s",
            reward_at_shot(&adaptive_report, 5),
            reward_at_shot(&uniform_report, 5),
            reward_at_shot(&scratch_report, 5),
            adaptive_report.zero_shot_reward,
            uniform_report.zero_shot_reward,
            scratch_report.zero_shot_reward,
            t0.elapsed().as_secs_f64()
        );
    }
}
