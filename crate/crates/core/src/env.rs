//! Per-DU cell environment: topology, UE mobility, traffic backlogs, slice
//! KPIs, environment stepping and the task distribution.
//!
//! Each [`Env`] owns its state and RNG; a full trajectory is a pure function
//! of `(TaskSpec, EnvConfig, action sequence)`.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{self, ChannelParams, LinkSample};
use crate::num::{largest_remainder, mix_seed};

pub const SLICE_COUNT: usize = 3;

/// Floor on the service rate when converting backlog to queueing delay.
const RATE_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid task spec: {0}")]
    InvalidSpec(String),
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error(transparent)]
    Channel(#[from] channel::ChannelError),
}

/// The three service classes of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SliceId {
    Embb,
    Mmtc,
    Urllc,
}

impl SliceId {
    pub const ALL: [SliceId; SLICE_COUNT] = [SliceId::Embb, SliceId::Mmtc, SliceId::Urllc];

    pub fn index(self) -> usize {
        match self {
            SliceId::Embb => 0,
            SliceId::Mmtc => 1,
            SliceId::Urllc => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<SliceId> {
        SliceId::ALL.get(index).copied()
    }
}

/// One user terminal: kinematics, service class, queue and last-step results.
#[derive(Debug, Clone)]
pub struct UeState {
    pub position: [f64; 2],
    pub speed_mps: f64,
    pub heading_rad: f64,
    pub slice: SliceId,
    /// Acceptable-throughput threshold lambda_i, bits/s.
    pub demand_threshold: f64,
    pub backlog_bits: f64,
    pub last_rate: f64,
    pub last_latency: f64,
}

/// One meta-task: a DU scenario with reward normalizers, traffic profile and
/// a seed that fixes the whole trajectory distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: usize,
    /// Reward normalizer floor c_m, bits/s.
    pub reward_min: f64,
    /// Reward normalizer ceiling c_x, bits/s.
    pub reward_max: f64,
    pub ue_count: usize,
    pub rb_count: usize,
    /// Fraction of UEs per slice; must sum to 1.
    pub slice_mix: [f64; SLICE_COUNT],
    /// Mean traffic arrival rate per UE of each slice, bits/s.
    pub traffic_profile: [f64; SLICE_COUNT],
    pub seed: u64,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self {
            task_id: 0,
            reward_min: 1e6,
            reward_max: 1.2e7,
            ue_count: 30,
            rb_count: 100,
            slice_mix: [0.4, 0.3, 0.3],
            traffic_profile: [8e6, 3e6, 2e6],
            seed: 0,
        }
    }
}

impl TaskSpec {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.reward_min < self.reward_max) {
            return Err(EnvError::InvalidSpec(format!(
                "reward_min {} must be below reward_max {}",
                self.reward_min, self.reward_max
            )));
        }
        if self.ue_count < SLICE_COUNT {
            return Err(EnvError::InvalidSpec(format!(
                "ue_count {} must be at least {SLICE_COUNT}",
                self.ue_count
            )));
        }
        if self.rb_count == 0 {
            return Err(EnvError::InvalidSpec("rb_count must be positive".into()));
        }
        let mix_sum: f64 = self.slice_mix.iter().sum();
        if (mix_sum - 1.0).abs() > 1e-9 || self.slice_mix.iter().any(|&m| m < 0.0) {
            return Err(EnvError::InvalidSpec(format!(
                "slice_mix must be non-negative and sum to 1, got {:?}",
                self.slice_mix
            )));
        }
        if self.traffic_profile.iter().any(|&t| t < 0.0) {
            return Err(EnvError::InvalidSpec("traffic_profile must be non-negative".into()));
        }
        Ok(())
    }
}

/// Fading model for the serving and interfering links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FadingKind {
    /// |h|^2 drawn i.i.d. Exponential(1) every step.
    Rayleigh,
    /// |h|^2 fixed at 1; deterministic channel.
    Unit,
}

/// Cell-level knobs that are not part of the task identity.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub cell_radius_m: f64,
    /// Frame duration, s.
    pub dt_s: f64,
    /// Latency cap for starved queues, s.
    pub tau_max_s: f64,
    pub fading: FadingKind,
    pub channel: ChannelParams,
    /// Neighbouring cells contributing inter-cell interference.
    pub interferer_count: usize,
    pub interferer_ue_count: usize,
    /// Traffic arrives as Poisson-counted bursts of this many bits.
    pub burst_bits: f64,
    pub speed_range_mps: (f64, f64),
    /// lambda_i is drawn uniformly in this multiple of the slice demand mean.
    pub demand_jitter: (f64, f64),
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            cell_radius_m: 250.0,
            dt_s: 1.0,
            tau_max_s: 1.0,
            fading: FadingKind::Rayleigh,
            channel: ChannelParams::default(),
            interferer_count: 0,
            interferer_ue_count: 4,
            burst_bits: 1e5,
            speed_range_mps: (10.0, 20.0),
            demand_jitter: (0.5, 1.5),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        self.channel.validate()?;
        if !(self.cell_radius_m > 0.0) {
            return Err(EnvError::InvalidConfig("cell_radius_m must be positive".into()));
        }
        if self.dt_s < 0.0 {
            return Err(EnvError::InvalidConfig("dt_s must be non-negative".into()));
        }
        if !(self.tau_max_s > 0.0) {
            return Err(EnvError::InvalidConfig("tau_max_s must be positive".into()));
        }
        if !(self.burst_bits > 0.0) {
            return Err(EnvError::InvalidConfig("burst_bits must be positive".into()));
        }
        if self.speed_range_mps.0 > self.speed_range_mps.1 || self.speed_range_mps.0 < 0.0 {
            return Err(EnvError::InvalidConfig("speed_range_mps must be ordered".into()));
        }
        Ok(())
    }
}

/// Snapshot of the cell at one time step.
#[derive(Debug, Clone)]
pub struct EnvState {
    pub ues: Vec<UeState>,
    /// Slice mask b, L x K.
    pub slice_mask: Array2<bool>,
    /// RB assignment e, N x K.
    pub assignment: Array2<bool>,
    pub time_step: u64,
    /// Raw per-slice KPIs: mean rate (eMBB), quality-weighted capacity (mMTC),
    /// max latency (URLLC).
    pub kpis: [f64; SLICE_COUNT],
    pub ue_per_slice: [usize; SLICE_COUNT],
}

/// A neighbouring cell modelled only through the interference it creates.
#[derive(Debug, Clone)]
struct InterfererCell {
    /// Distance of each of its UEs to its own RU.
    distances_m: Vec<f64>,
}

/// One DU cell plus the RNG that drives fading, traffic and mobility.
#[derive(Debug, Clone)]
pub struct Env {
    pub spec: TaskSpec,
    pub cfg: EnvConfig,
    state: EnvState,
    rng: ChaCha12Rng,
    interferers: Vec<InterfererCell>,
}

/// Per-step results handed to the controllers.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub kpis: [f64; SLICE_COUNT],
    pub rates: Vec<f64>,
    pub latencies: Vec<f64>,
}

/// Relative heading perturbations, one drawn uniformly per UE per step.
pub const HEADING_OFFSETS: [f64; 7] = [
    -PI / 3.0,
    -PI / 6.0,
    -PI / 12.0,
    0.0,
    PI / 12.0,
    PI / 6.0,
    PI / 3.0,
];

/// Places UEs uniformly in the cell disc and assigns slices by `slice_mix`.
/// Deterministic under `spec.seed`.
pub fn build_env(spec: &TaskSpec, cfg: &EnvConfig) -> Result<Env, EnvError> {
    spec.validate()?;
    cfg.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let counts = largest_remainder(&spec.slice_mix, spec.ue_count);
    let mut ues = Vec::with_capacity(spec.ue_count);
    let mut ue_per_slice = [0usize; SLICE_COUNT];
    for (s, &count) in counts.iter().enumerate() {
        let slice = SliceId::from_index(s).unwrap();
        ue_per_slice[s] = count;
        for _ in 0..count {
            let radius = cfg.cell_radius_m * rng.random::<f64>().sqrt();
            let angle = 2.0 * PI * rng.random::<f64>();
            let speed = sample_range(&mut rng, cfg.speed_range_mps);
            let heading = 2.0 * PI * rng.random::<f64>();
            let jitter = sample_range(&mut rng, cfg.demand_jitter);
            ues.push(UeState {
                position: [radius * angle.cos(), radius * angle.sin()],
                speed_mps: speed,
                heading_rad: heading,
                slice,
                demand_threshold: jitter * spec.traffic_profile[s],
                backlog_bits: 0.0,
                last_rate: 0.0,
                last_latency: 0.0,
            });
        }
    }
    let interferers = (0..cfg.interferer_count)
        .map(|_| InterfererCell {
            distances_m: (0..cfg.interferer_ue_count)
                .map(|_| sample_range(&mut rng, (cfg.channel.min_distance_m, cfg.cell_radius_m)))
                .collect(),
        })
        .collect();
    Ok(Env {
        state: EnvState {
            ues,
            slice_mask: Array2::from_elem((SLICE_COUNT, spec.rb_count), false),
            assignment: Array2::from_elem((spec.ue_count, spec.rb_count), false),
            time_step: 0,
            kpis: [0.0; SLICE_COUNT],
            ue_per_slice,
        },
        spec: spec.clone(),
        cfg: cfg.clone(),
        rng,
        interferers,
    })
}

fn sample_range<R: Rng + ?Sized>(rng: &mut R, range: (f64, f64)) -> f64 {
    if range.1 <= range.0 {
        range.0
    } else {
        rng.random_range(range.0..range.1)
    }
}

/// Projects an allocation onto the feasible set: an RB can only be held by a
/// UE whose slice owns it, and by at most one UE of the cell. The total
/// assignment count is then bounded by the RB count automatically.
pub fn project_allocation(
    slice_mask: &Array2<bool>,
    assignment: &Array2<bool>,
    ue_slices: &[SliceId],
) -> Array2<bool> {
    let (n, k) = assignment.dim();
    let mut out = Array2::from_elem((n, k), false);
    for rb in 0..k {
        for u in 0..n {
            if assignment[(u, rb)] && slice_mask[(ue_slices[u].index(), rb)] {
                out[(u, rb)] = true;
                break; // first UE in index order wins the column
            }
        }
    }
    out
}

/// Mean throughput over the slice's UEs (eMBB KPI).
pub fn qos_embb(rates: &[f64]) -> Result<f64, EnvError> {
    if rates.is_empty() {
        return Err(EnvError::EmptyInput("qos_embb rates"));
    }
    Ok(rates.iter().sum::<f64>() / rates.len() as f64)
}

/// Quality-weighted capacity (mMTC KPI): the fraction of UEs meeting their
/// demand threshold times the aggregate throughput. The indicator counts
/// `rate >= threshold`.
pub fn qos_mmtc(rates: &[f64], thresholds: &[f64]) -> Result<f64, EnvError> {
    if rates.is_empty() {
        return Err(EnvError::EmptyInput("qos_mmtc rates"));
    }
    if rates.len() != thresholds.len() {
        return Err(EnvError::ShapeMismatch {
            expected: format!("{} thresholds", rates.len()),
            got: format!("{}", thresholds.len()),
        });
    }
    let satisfied = rates
        .iter()
        .zip(thresholds)
        .filter(|(r, t)| r >= t)
        .count();
    Ok(satisfied as f64 / rates.len() as f64 * rates.iter().sum::<f64>())
}

/// Worst-case transmission delay over the slice's UEs (URLLC KPI).
pub fn qos_urllc(latencies: &[f64]) -> Result<f64, EnvError> {
    if latencies.is_empty() {
        return Err(EnvError::EmptyInput("qos_urllc latencies"));
    }
    Ok(latencies.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

/// Queueing delay of the current backlog at the given service rate, capped at
/// `tau_max`. An empty queue has zero delay regardless of rate.
pub fn ue_latency(backlog_bits: f64, rate: f64, tau_max: f64) -> f64 {
    if backlog_bits <= 0.0 {
        0.0
    } else {
        (backlog_bits / rate.max(RATE_EPS)).min(tau_max)
    }
}

/// Backlog evolution over one frame: arrivals in, service out, floored at 0.
pub fn drain_backlog(backlog_bits: f64, arrivals_bits: f64, rate: f64, dt: f64) -> f64 {
    (backlog_bits + arrivals_bits - rate * dt).max(0.0)
}

impl Env {
    pub fn state(&self) -> &EnvState {
        &self.state
    }

    /// Applies one allocation, advances traffic and mobility, and recomputes
    /// the slice KPIs. Raw actions are projected to feasibility first.
    pub fn step(
        &mut self,
        slice_mask: &Array2<bool>,
        assignment: &Array2<bool>,
    ) -> Result<StepOutcome, EnvError> {
        let n = self.spec.ue_count;
        let k = self.spec.rb_count;
        if slice_mask.dim() != (SLICE_COUNT, k) {
            return Err(EnvError::ShapeMismatch {
                expected: format!("slice mask {SLICE_COUNT}x{k}"),
                got: format!("{:?}", slice_mask.dim()),
            });
        }
        if assignment.dim() != (n, k) {
            return Err(EnvError::ShapeMismatch {
                expected: format!("assignment {n}x{k}"),
                got: format!("{:?}", assignment.dim()),
            });
        }
        let ue_slices: Vec<SliceId> = self.state.ues.iter().map(|u| u.slice).collect();
        let assignment = project_allocation(slice_mask, assignment, &ue_slices);

        // Serving-link fading, then per-RB interference from neighbour cells.
        let fading = self.draw_fading(n, k);
        let interference = self.draw_interference(k);

        let mut rates = Vec::with_capacity(n);
        for u in 0..n {
            let distance = distance_from_origin(self.state.ues[u].position);
            let links: Vec<LinkSample> = (0..k)
                .map(|rb| LinkSample {
                    distance_m: distance.max(self.cfg.channel.min_distance_m),
                    fading_gain: fading[(u, rb)],
                    interference_w: interference[rb],
                })
                .collect();
            let e_row: Vec<bool> = (0..k).map(|rb| assignment[(u, rb)]).collect();
            let b_row: Vec<bool> = (0..k)
                .map(|rb| slice_mask[(ue_slices[u].index(), rb)])
                .collect();
            rates.push(channel::ue_rate(&e_row, &b_row, &links, &self.cfg.channel)?);
        }

        // Traffic: latency is the pre-arrival queueing delay, then the queue
        // absorbs this frame's arrivals and service.
        let mut latencies = Vec::with_capacity(n);
        for u in 0..n {
            let mean = self.spec.traffic_profile[self.state.ues[u].slice.index()];
            let arrivals = self.draw_arrivals(mean);
            let ue = &mut self.state.ues[u];
            let latency = ue_latency(ue.backlog_bits, rates[u], self.cfg.tau_max_s);
            ue.backlog_bits = drain_backlog(ue.backlog_bits, arrivals, rates[u], self.cfg.dt_s);
            ue.last_rate = rates[u];
            ue.last_latency = latency;
            latencies.push(latency);
        }

        let kpis = self.compute_kpis(&rates, &latencies);
        self.move_ues();

        self.state.slice_mask = slice_mask.clone();
        self.state.assignment = assignment;
        self.state.kpis = kpis;
        self.state.time_step += 1;
        Ok(StepOutcome {
            kpis,
            rates,
            latencies,
        })
    }

    fn draw_fading(&mut self, n: usize, k: usize) -> Array2<f64> {
        match self.cfg.fading {
            FadingKind::Unit => Array2::from_elem((n, k), 1.0),
            FadingKind::Rayleigh => {
                Array2::from_shape_fn((n, k), |_| channel::sample_fading(&mut self.rng))
            }
        }
    }

    /// Each neighbour cell assigns every RB to one of its UEs uniformly at
    /// random; its contribution is independent of our UE positions because
    /// the path loss is taken to the interferer's own RU.
    fn draw_interference(&mut self, k: usize) -> Vec<f64> {
        let mut totals = vec![0.0; k];
        let eta = self.cfg.channel.pathloss_exponent;
        let power = self.cfg.channel.tx_power_w();
        for cell in &self.interferers {
            for total in totals.iter_mut() {
                let ue = self.rng.random_range(0..cell.distances_m.len());
                let gain = match self.cfg.fading {
                    FadingKind::Unit => 1.0,
                    FadingKind::Rayleigh => channel::sample_fading(&mut self.rng),
                };
                *total += power * cell.distances_m[ue].powf(-eta) * gain;
            }
        }
        totals
    }

    fn draw_arrivals(&mut self, mean_rate: f64) -> f64 {
        let mean_bits = mean_rate * self.cfg.dt_s;
        if mean_bits <= 0.0 {
            return 0.0;
        }
        let bursts = Poisson::new(mean_bits / self.cfg.burst_bits)
            .expect("positive burst mean")
            .sample(&mut self.rng);
        bursts * self.cfg.burst_bits
    }

    fn compute_kpis(&self, rates: &[f64], latencies: &[f64]) -> [f64; SLICE_COUNT] {
        let mut kpis = [0.0; SLICE_COUNT];
        for slice in SliceId::ALL {
            let s = slice.index();
            let idx: Vec<usize> = (0..self.state.ues.len())
                .filter(|&u| self.state.ues[u].slice == slice)
                .collect();
            if idx.is_empty() {
                continue;
            }
            let slice_rates: Vec<f64> = idx.iter().map(|&u| rates[u]).collect();
            kpis[s] = match slice {
                SliceId::Embb => qos_embb(&slice_rates).unwrap(),
                SliceId::Mmtc => {
                    let thresholds: Vec<f64> = idx
                        .iter()
                        .map(|&u| self.state.ues[u].demand_threshold)
                        .collect();
                    qos_mmtc(&slice_rates, &thresholds).unwrap()
                }
                SliceId::Urllc => {
                    let slice_lat: Vec<f64> = idx.iter().map(|&u| latencies[u]).collect();
                    qos_urllc(&slice_lat).unwrap()
                }
            };
        }
        kpis
    }

    /// Random-walk mobility: each UE perturbs its heading by one of the seven
    /// offsets and advances `speed * dt`, reflecting at the cell boundary.
    fn move_ues(&mut self) {
        let radius = self.cfg.cell_radius_m;
        let dt = self.cfg.dt_s;
        for u in 0..self.state.ues.len() {
            let offset = HEADING_OFFSETS[self.rng.random_range(0..HEADING_OFFSETS.len())];
            let ue = &mut self.state.ues[u];
            let (pos, heading) = advance_ue(ue.position, ue.heading_rad + offset, ue.speed_mps, dt, radius);
            ue.position = pos;
            ue.heading_rad = heading;
        }
    }
}

/// Advances a position along `heading` by `speed * dt`, reflecting the
/// position and velocity at the disc boundary.
pub fn advance_ue(
    position: [f64; 2],
    heading: f64,
    speed: f64,
    dt: f64,
    radius: f64,
) -> ([f64; 2], f64) {
    let mut x = position[0] + speed * dt * heading.cos();
    let mut y = position[1] + speed * dt * heading.sin();
    let mut heading = heading;
    let dist = (x * x + y * y).sqrt();
    if dist > radius {
        // Radial reflection: fold the overshoot back inside, mirror the
        // velocity about the tangent at the crossing direction.
        let scale = (2.0 * radius - dist).max(0.0) / dist;
        let (nx, ny) = (x / dist, y / dist);
        x *= scale;
        y *= scale;
        let (vx, vy) = (heading.cos(), heading.sin());
        let dot = vx * nx + vy * ny;
        heading = (vy - 2.0 * dot * ny).atan2(vx - 2.0 * dot * nx);
    }
    ([x, y], heading)
}

fn distance_from_origin(position: [f64; 2]) -> f64 {
    (position[0] * position[0] + position[1] * position[1]).sqrt()
}

/// Ranges from which task parameters are drawn when sampling a family of
/// heterogeneous DU scenarios.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskDistribution {
    pub reward_min_range: (f64, f64),
    pub reward_max_range: (f64, f64),
    pub slice_mix_ranges: [(f64, f64); SLICE_COUNT],
    pub traffic_ranges: [(f64, f64); SLICE_COUNT],
}

impl Default for TaskDistribution {
    fn default() -> Self {
        Self {
            reward_min_range: (5e5, 2e6),
            reward_max_range: (8e6, 1.6e7),
            slice_mix_ranges: [(0.2, 0.6), (0.2, 0.5), (0.2, 0.5)],
            traffic_ranges: [(4e6, 1.2e7), (1e6, 6e6), (1e6, 4e6)],
        }
    }
}

impl TaskDistribution {
    pub fn validate(&self) -> Result<(), EnvError> {
        for r in [self.reward_min_range, self.reward_max_range]
            .iter()
            .chain(self.slice_mix_ranges.iter())
            .chain(self.traffic_ranges.iter())
        {
            if r.0 > r.1 {
                return Err(EnvError::InvalidConfig(format!("range {r:?} is reversed")));
            }
        }
        if self.reward_max_range.0 <= self.reward_min_range.1 {
            return Err(EnvError::InvalidConfig(
                "reward_max_range must sit strictly above reward_min_range".into(),
            ));
        }
        Ok(())
    }

    /// Degenerate distribution that reproduces `base` exactly.
    pub fn degenerate(base: &TaskSpec) -> Self {
        Self {
            reward_min_range: (base.reward_min, base.reward_min),
            reward_max_range: (base.reward_max, base.reward_max),
            slice_mix_ranges: [
                (base.slice_mix[0], base.slice_mix[0]),
                (base.slice_mix[1], base.slice_mix[1]),
                (base.slice_mix[2], base.slice_mix[2]),
            ],
            traffic_ranges: [
                (base.traffic_profile[0], base.traffic_profile[0]),
                (base.traffic_profile[1], base.traffic_profile[1]),
                (base.traffic_profile[2], base.traffic_profile[2]),
            ],
        }
    }
}

/// Samples `n` task specs modelling heterogeneous DUs. Seeds are derived from
/// the base seed so task 0 of a degenerate distribution reproduces `base`.
pub fn sample_tasks<R: Rng + ?Sized>(
    n: usize,
    base: &TaskSpec,
    dist: &TaskDistribution,
    rng: &mut R,
) -> Vec<TaskSpec> {
    let mut tasks = Vec::with_capacity(n);
    for i in 0..n {
        let reward_min = sample_range(rng, dist.reward_min_range);
        let reward_max = sample_range(rng, dist.reward_max_range);
        let mut mix = [0.0; SLICE_COUNT];
        for (m, &range) in mix.iter_mut().zip(dist.slice_mix_ranges.iter()) {
            *m = sample_range(rng, range);
        }
        let mix_sum: f64 = mix.iter().sum();
        if mix_sum > 0.0 {
            for m in mix.iter_mut() {
                *m /= mix_sum;
            }
        }
        let mut traffic = [0.0; SLICE_COUNT];
        for (t, &range) in traffic.iter_mut().zip(dist.traffic_ranges.iter()) {
            *t = sample_range(rng, range);
        }
        tasks.push(TaskSpec {
            task_id: i,
            reward_min,
            reward_max,
            ue_count: base.ue_count,
            rb_count: base.rb_count,
            slice_mix: mix,
            traffic_profile: traffic,
            seed: base.seed.wrapping_add(i as u64),
        });
    }
    tasks
}

/// Derives the environment seed for one episode of one task.
pub fn episode_seed(task_seed: u64, episode: u64) -> u64 {
    mix_seed(task_seed, 0xEC0D_0000 ^ episode)
}
