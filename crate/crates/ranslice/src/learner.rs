//! Outer-layer learning: replay buffer, the softmax-actor/critic pair with
//! soft target networks, the per-window update schedule, and the training
//! loop shared by the learned policies (two-layer, equal-split, and the
//! decision-shaped baselines) plus the random baseline.
//!
//! The critic scores the joint decision: its input is the state, the actor's
//! continuous simplex fractions (pre-decode), and the flattened split
//! matrices chosen by the inner layer. Targets bootstrap through the target
//! networks at the stored next state; the twin-critic variant adds clipped
//! smoothing noise on the target action, takes the minimum of the twin
//! target critics, and delays actor/target updates.

use crate::env::{EnvAction, SliceEnv, SplitPolicy, GROUP};
use crate::error::{Error, Result};
use crate::nn::{soft_update, Adam, Gradients, Head, Mlp};
use serde::{Deserialize, Serialize};

fn default_hidden() -> Vec<usize> {
    vec![128, 64]
}
fn default_policy_delay() -> usize {
    2
}
fn default_target_noise() -> f64 {
    0.01
}
fn default_noise_clip() -> f64 {
    0.05
}
fn default_buffer() -> usize {
    100_000
}
fn default_reward_scale() -> f64 {
    0.01
}
fn default_warmup_windows() -> usize {
    1200
}
fn default_critic_updates() -> usize {
    8
}
fn default_random_window_prob() -> f64 {
    0.2
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LearnerConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub discount: f64,
    pub tau: f64,
    /// Exploration noise added to the actor output.
    pub sigma: f64,
    pub minibatch: usize,
    pub episodes: usize,
    #[serde(default = "default_buffer")]
    pub buffer_capacity: usize,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_policy_delay")]
    pub policy_delay: usize,
    #[serde(default = "default_target_noise")]
    pub target_noise: f64,
    #[serde(default = "default_noise_clip")]
    pub noise_clip: f64,
    /// Internal normalization applied to rewards inside the value updates.
    /// Raw window rewards sit in the hundreds; Adam moves parameters by
    /// roughly one learning rate per step, so the critic could not even
    /// represent the raw discounted sums within the training budget. Scaling
    /// is direction-invariant for the actor.
    #[serde(default = "default_reward_scale")]
    pub reward_scale: f64,
    /// Environment windows driven by uniformly random allocations before the
    /// actor takes over. Exploration noise alone rarely crosses an integer
    /// decode boundary, so without this the critic never observes how reward
    /// responds to the allocation and its action gradient is an artifact.
    /// Updates run normally during warmup (the agent learns off-policy).
    #[serde(default = "default_warmup_windows")]
    pub warmup_windows: usize,
    /// Critic gradient steps per environment window. One step per window
    /// cannot fit the state-dependent feasibility threshold within a few
    /// hundred episodes; the linear cost slope then dominates the value
    /// gradient and the policy starves the compute slice.
    #[serde(default = "default_critic_updates")]
    pub critic_updates: usize,
    /// After warmup, initial probability that a window is still driven by a
    /// random allocation instead of the policy; decays linearly to zero by
    /// sixty percent of the episode budget. The critic only stays honest
    /// about regions it keeps seeing labels for; without this the actor can
    /// camp on an extrapolation artifact faster than on-policy data
    /// corrects it. The decay keeps late learning-curve episodes clean.
    #[serde(default = "default_random_window_prob")]
    pub random_window_prob: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            discount: 0.75,
            tau: 0.005,
            sigma: 0.02,
            minibatch: 64,
            episodes: 1000,
            buffer_capacity: default_buffer(),
            hidden: default_hidden(),
            policy_delay: default_policy_delay(),
            target_noise: default_target_noise(),
            noise_clip: default_noise_clip(),
            reward_scale: default_reward_scale(),
            warmup_windows: default_warmup_windows(),
            critic_updates: default_critic_updates(),
            random_window_prob: default_random_window_prob(),
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, message: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Config {
                    field: field.into(),
                    message: message.into(),
                })
            }
        };
        check(
            self.discount > 0.0 && self.discount < 1.0,
            "learner.discount",
            "must lie in (0, 1)",
        )?;
        check(
            self.tau > 0.0 && self.tau <= 1.0,
            "learner.tau",
            "must lie in (0, 1]",
        )?;
        check(self.sigma >= 0.0, "learner.sigma", "must be nonnegative")?;
        check(self.minibatch >= 1, "learner.minibatch", "must be positive")?;
        check(self.episodes >= 1, "learner.episodes", "must be positive")?;
        check(
            self.buffer_capacity >= self.minibatch,
            "learner.buffer_capacity",
            "must hold at least one minibatch",
        )?;
        check(!self.hidden.is_empty(), "learner.hidden", "must not be empty")?;
        check(
            self.policy_delay >= 1,
            "learner.policy_delay",
            "must be positive",
        )?;
        check(
            self.actor_lr > 0.0 && self.critic_lr > 0.0,
            "learner.actor_lr",
            "learning rates must be positive",
        )?;
        check(
            self.reward_scale > 0.0,
            "learner.reward_scale",
            "must be positive",
        )?;
        check(
            self.critic_updates >= 1,
            "learner.critic_updates",
            "must be positive",
        )?;
        check(
            (0.0..1.0).contains(&self.random_window_prob),
            "learner.random_window_prob",
            "must lie in [0, 1)",
        )?;
        Ok(())
    }
}

/// Which policy drives the environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    /// Two-layer learner: softmax actor + convex inner layer.
    Raws,
    /// Same learner with the inner layer pinned to the equal split.
    RawsWo,
    /// Separated decisions: equal split plus decision shaping.
    DdpgShaped,
    /// As above with twin critics, delayed updates, target smoothing.
    Td3Shaped,
    /// Uniformly random decisions in the decision space.
    Random,
}

impl Algorithm {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "raws" => Ok(Algorithm::Raws),
            "raws-wo" => Ok(Algorithm::RawsWo),
            "ddpg" => Ok(Algorithm::DdpgShaped),
            "td3" => Ok(Algorithm::Td3Shaped),
            "random" => Ok(Algorithm::Random),
            other => Err(Error::Config {
                field: "algorithm".into(),
                message: format!("unknown algorithm '{other}' (raws|ddpg|td3|raws-wo|random)"),
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Raws => "raws",
            Algorithm::RawsWo => "raws-wo",
            Algorithm::DdpgShaped => "ddpg",
            Algorithm::Td3Shaped => "td3",
            Algorithm::Random => "random",
        }
    }

    pub fn split_policy(&self) -> SplitPolicy {
        match self {
            Algorithm::Raws => SplitPolicy::Optimized,
            Algorithm::RawsWo => SplitPolicy::EqualSplit,
            Algorithm::DdpgShaped | Algorithm::Td3Shaped => SplitPolicy::EqualSplitShaped,
            // The random baseline supplies its own split with the action.
            Algorithm::Random => SplitPolicy::EqualSplit,
        }
    }

    pub fn is_learning(&self) -> bool {
        !matches!(self, Algorithm::Random)
    }

    pub fn twin_critics(&self) -> bool {
        matches!(self, Algorithm::Td3Shaped)
    }
}

/// One stored experience tuple.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    /// Continuous actor output (simplex fractions, pre-decode).
    pub fractions: Vec<f64>,
    /// Flattened split matrices chosen by the inner layer.
    pub split: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// FIFO ring buffer with uniform sampling.
pub struct ReplayBuffer {
    data: Vec<Transition>,
    capacity: usize,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            data: Vec::with_capacity(capacity.min(4096)),
            capacity,
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    pub fn sample_indices(&self, n: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
        (0..n).map(|_| rng.random_range(0..self.data.len())).collect()
    }

    pub fn get(&self, idx: usize) -> &Transition {
        &self.data[idx]
    }
}

fn critic_input(state: &[f64], fractions: &[f64], split: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(state.len() + fractions.len() + split.len());
    v.extend_from_slice(state);
    v.extend_from_slice(fractions);
    v.extend_from_slice(split);
    v
}

/// Clamp to [0,1] and renormalize every simplex group; an all-zero group
/// falls back to uniform.
pub fn project_groups(fractions: &mut [f64]) {
    for group in fractions.chunks_mut(GROUP) {
        let mut sum = 0.0;
        for x in group.iter_mut() {
            *x = x.clamp(0.0, 1.0);
            sum += *x;
        }
        if sum <= 0.0 {
            for x in group.iter_mut() {
                *x = 1.0 / GROUP as f64;
            }
        } else {
            for x in group.iter_mut() {
                *x /= sum;
            }
        }
    }
}

/// Actor-critic pair with target networks.
pub struct Agent {
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critics: Vec<Mlp>,
    pub critic_targets: Vec<Mlp>,
    actor_opt: Adam,
    critic_opts: Vec<Adam>,
    pub cfg: LearnerConfig,
    pub twin: bool,
    state_dim: usize,
    action_dim: usize,
    update_count: usize,
}

impl Agent {
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        split_dim: usize,
        cfg: LearnerConfig,
        twin: bool,
        rng: &mut impl rand::Rng,
    ) -> Self {
        let mut actor_dims = vec![state_dim];
        actor_dims.extend_from_slice(&cfg.hidden);
        actor_dims.push(action_dim);
        let actor = Mlp::new_scaled_output(
            &actor_dims,
            Head::SoftmaxGroups { group_size: GROUP },
            1e-3,
            rng,
        );

        let mut critic_dims = vec![state_dim + action_dim + split_dim];
        critic_dims.extend_from_slice(&cfg.hidden);
        critic_dims.push(1);
        let n_critics = if twin { 2 } else { 1 };
        let critics: Vec<Mlp> = (0..n_critics)
            .map(|_| Mlp::new_scaled_output(&critic_dims, Head::Linear, 1e-3, rng))
            .collect();

        let actor_target = actor.clone();
        let critic_targets = critics.clone();
        let actor_opt = Adam::new(&actor, cfg.actor_lr);
        let critic_opts = critics.iter().map(|c| Adam::new(c, cfg.critic_lr)).collect();
        Agent {
            actor,
            actor_target,
            critics,
            critic_targets,
            actor_opt,
            critic_opts,
            cfg,
            twin,
            state_dim,
            action_dim,
            update_count: 0,
        }
    }

    /// Rebuild an agent from checkpointed networks (fresh optimizer state).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        actor: Mlp,
        actor_target: Mlp,
        critics: Vec<Mlp>,
        critic_targets: Vec<Mlp>,
        cfg: LearnerConfig,
        twin: bool,
        state_dim: usize,
        action_dim: usize,
    ) -> Self {
        let actor_opt = Adam::new(&actor, cfg.actor_lr);
        let critic_opts = critics.iter().map(|c| Adam::new(c, cfg.critic_lr)).collect();
        Agent {
            actor,
            actor_target,
            critics,
            critic_targets,
            actor_opt,
            critic_opts,
            cfg,
            twin,
            state_dim,
            action_dim,
            update_count: 0,
        }
    }

    /// Policy output with exploration noise; `sigma = 0` is the exact
    /// deterministic policy.
    pub fn act(&self, state: &[f64], sigma: f64, rng: &mut impl rand::Rng) -> Vec<f64> {
        let mut out = self.actor.forward(state);
        if sigma > 0.0 {
            let normal = rand_distr::Normal::new(0.0, sigma).expect("valid sigma");
            for x in out.iter_mut() {
                *x += rand_distr::Distribution::sample(&normal, rng);
            }
            project_groups(&mut out);
        }
        out
    }

    /// One Adam step on every critic toward the bootstrapped targets
    /// `y = r + gamma * Q'(s', mu'(s'), a2)`. Next-state bootstrapping is
    /// what lets the policy see past the one-window reconfiguration ramp:
    /// a myopic value of the same transition would prefer staying at a
    /// starved allocation forever. The stored split stands in for the next
    /// window's split. Returns the first critic's minibatch loss.
    pub fn critic_update(&mut self, batch: &[&Transition], rng: &mut impl rand::Rng) -> f64 {
        let n = batch.len() as f64;
        let gamma = self.cfg.discount;
        let targets: Vec<f64> = batch
            .iter()
            .map(|t| {
                let mut next_action = self.actor_target.forward(&t.next_state);
                if self.twin && self.cfg.target_noise > 0.0 {
                    // Target smoothing: evaluate the target critics at a
                    // perturbed action, projected back to the simplex.
                    let normal =
                        rand_distr::Normal::new(0.0, self.cfg.target_noise).expect("valid noise");
                    for x in next_action.iter_mut() {
                        let eps: f64 = rand_distr::Distribution::sample(&normal, rng);
                        *x += eps.clamp(-self.cfg.noise_clip, self.cfg.noise_clip);
                    }
                    project_groups(&mut next_action);
                }
                let input = critic_input(&t.next_state, &next_action, &t.split);
                let q_next = self
                    .critic_targets
                    .iter()
                    .map(|c| c.forward(&input)[0])
                    .fold(f64::INFINITY, f64::min);
                t.reward * self.cfg.reward_scale + gamma * q_next
            })
            .collect();

        let mut first_loss = 0.0;
        for ci in 0..self.critics.len() {
            let mut acc = Gradients::zeros_like(&self.critics[ci]);
            let mut loss = 0.0;
            for (t, &y) in batch.iter().zip(&targets) {
                let input = critic_input(&t.state, &t.fractions, &t.split);
                let trace = self.critics[ci].forward_trace(&input);
                let err = trace.output[0] - y;
                loss += err * err;
                let g = self.critics[ci].backward(&trace, &[2.0 * err / n]);
                acc.accumulate(&g);
            }
            self.critic_opts[ci].apply(&mut self.critics[ci], &acc);
            if ci == 0 {
                first_loss = loss / n;
            }
        }
        first_loss
    }

    /// One ascent step along the sampled deterministic policy gradient;
    /// returns the gradient norm before clipping.
    ///
    /// When a split responder is given, each candidate action `mu(s)` is
    /// scored together with the split the inner layer would actually choose
    /// for it; otherwise the stored split is reused. Scoring against the
    /// responder keeps the gradient aligned with the joint decision the
    /// environment will execute.
    pub fn actor_update(&mut self, batch: &[&Transition], responder: Option<&SliceEnv>) -> f64 {
        let n = batch.len() as f64;
        let mut acc = Gradients::zeros_like(&self.actor);
        for t in batch {
            let atrace = self.actor.forward_trace(&t.state);
            let split = match responder {
                Some(env) => env
                    .split_response(&t.state, &atrace.output)
                    .unwrap_or_else(|_| t.split.clone()),
                None => t.split.clone(),
            };
            let input = critic_input(&t.state, &atrace.output, &split);
            let qtrace = self.critics[0].forward_trace(&input);
            let cgrads = self.critics[0].backward(&qtrace, &[1.0]);
            let a1_grad = &cgrads.input[self.state_dim..self.state_dim + self.action_dim];
            let agrads = self.actor.backward(&atrace, a1_grad);
            acc.accumulate(&agrads);
        }
        acc.scale(1.0 / n);
        let norm = acc.param_norm();
        acc.clip_param_norm(1.0);
        // Ascent: Adam minimizes, so feed the negated gradient.
        acc.scale(-1.0);
        self.actor_opt.apply(&mut self.actor, &acc);
        norm
    }

    pub fn soft_update_targets(&mut self) {
        soft_update(&mut self.actor_target, &self.actor, self.cfg.tau);
        for (t, s) in self.critic_targets.iter_mut().zip(&self.critics) {
            soft_update(t, s, self.cfg.tau);
        }
    }

    /// One scheduled update: critics every call; actor and targets every
    /// call for the single-critic agent, every `policy_delay` calls for the
    /// twin-critic agent. With `actor_too = false` only the critics move
    /// (used during warmup, while the critic catches up on random data and
    /// any policy gradient would be noise).
    pub fn update(
        &mut self,
        buffer: &ReplayBuffer,
        actor_too: bool,
        responder: Option<&SliceEnv>,
        rng: &mut impl rand::Rng,
    ) -> (f64, Option<f64>) {
        let idx = buffer.sample_indices(self.cfg.minibatch, rng);
        let batch: Vec<&Transition> = idx.iter().map(|&i| buffer.get(i)).collect();
        let loss = self.critic_update(&batch, rng);
        self.update_count += 1;
        if !actor_too {
            self.soft_update_targets();
            return (loss, None);
        }
        let delayed = self.twin && self.update_count % self.cfg.policy_delay != 0;
        if delayed {
            (loss, None)
        } else {
            let norm = self.actor_update(&batch, responder);
            self.soft_update_targets();
            (loss, Some(norm))
        }
    }

    pub fn all_finite(&self) -> bool {
        self.actor.all_finite()
            && self.actor_target.all_finite()
            && self.critics.iter().all(Mlp::all_finite)
            && self.critic_targets.iter().all(Mlp::all_finite)
    }
}

/// Uniformly random decision in the decision space: simplex fractions per
/// group (capacity-safe after decoding) and uniform splits.
pub fn random_policy(
    n_bs: usize,
    n_overlapped: usize,
    rng: &mut impl rand::Rng,
) -> EnvAction {
    let mut fractions = Vec::with_capacity(crate::env::action_dim(n_bs));
    for _ in 0..2 * n_bs {
        let mut g = [0.0; GROUP];
        let mut sum = 0.0;
        for x in g.iter_mut() {
            // Normalized unit exponentials land uniformly on the simplex.
            *x = -(1.0 - rng.random::<f64>()).ln();
            sum += *x;
        }
        for x in g.iter_mut() {
            *x /= sum;
        }
        fractions.extend_from_slice(&g);
    }
    EnvAction {
        fractions,
        split_override: Some(random_splits(n_overlapped, rng)),
    }
}

/// Uniform split matrix over the unit box.
pub fn random_splits(
    n_overlapped: usize,
    rng: &mut impl rand::Rng,
) -> Vec<[f64; crate::NUM_SERVICES]> {
    (0..n_overlapped)
        .map(|_| {
            let mut row = [0.0; crate::NUM_SERVICES];
            for x in row.iter_mut() {
                *x = rng.random::<f64>();
            }
            row
        })
        .collect()
}

/// Random allocation fractions for exploration windows.
///
/// Draw modes, in decreasing share: single-group contrasts around the
/// current policy output (these give the critic the per-BS comparisons it
/// needs for credit assignment), uniform simplex draws, and spiky draws
/// concentrated near group corners (where a value network extrapolates most
/// optimistically and needs labels before the policy goes looking there).
pub fn exploration_fractions(
    n_bs: usize,
    policy_output: Option<&[f64]>,
    rng: &mut impl rand::Rng,
) -> Vec<f64> {
    let groups = 2 * n_bs;
    let uniform_group = |rng: &mut dyn rand::RngCore| -> [f64; GROUP] {
        let mut g = [0.0; GROUP];
        let mut sum = 0.0;
        for x in g.iter_mut() {
            *x = -(1.0 - rand::Rng::random::<f64>(rng)).ln();
            sum += *x;
        }
        for x in g.iter_mut() {
            *x /= sum;
        }
        g
    };
    if let Some(base) = policy_output {
        if rng.random::<f64>() < 0.5 {
            // Replace one or two groups of the policy action.
            let mut fractions = base.to_vec();
            let replacements = 1 + (rng.random::<f64>() < 0.3) as usize;
            for _ in 0..replacements {
                let g = rng.random_range(0..groups);
                let fresh = uniform_group(rng);
                fractions[g * GROUP..(g + 1) * GROUP].copy_from_slice(&fresh);
            }
            return fractions;
        }
    }
    if rng.random::<f64>() < 0.6 {
        let mut fractions = Vec::with_capacity(groups * GROUP);
        for _ in 0..groups {
            fractions.extend_from_slice(&uniform_group(rng));
        }
        return fractions;
    }
    let gamma = rand_distr::Gamma::new(0.2, 1.0).expect("valid shape");
    let mut fractions = Vec::with_capacity(groups * GROUP);
    for _ in 0..groups {
        let mut g = [0.0; GROUP];
        let mut sum = 0.0;
        for x in g.iter_mut() {
            *x = rand_distr::Distribution::sample(&gamma, rng) + 1e-12;
            sum += *x;
        }
        for x in g.iter_mut() {
            *x /= sum;
        }
        fractions.extend_from_slice(&g);
    }
    fractions
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub mean_reward: f64,
    /// Mean per-window system cost.
    pub mean_cost: f64,
    pub violation_rate: f64,
    /// Fraction of windows where both subproblems were feasible.
    pub feasible_rate: f64,
}

pub struct TrainResult {
    pub agent: Option<Agent>,
    pub episodes: Vec<EpisodeStats>,
}

/// Run the training loop (or plain rollouts for the random baseline).
///
/// Each episode picks a start window uniformly from `start_pool`. One
/// critic/actor update runs per environment window once the buffer holds a
/// minibatch. Fully deterministic for a fixed seed.
pub fn train(
    env: &mut SliceEnv,
    cfg: &LearnerConfig,
    algorithm: Algorithm,
    seed: u64,
    start_pool: &[usize],
) -> Result<TrainResult> {
    use rand::{Rng, SeedableRng};
    cfg.validate()?;
    if start_pool.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut master = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let mut init_rng = rand_chacha::ChaCha20Rng::seed_from_u64(master.random());
    let mut noise_rng = rand_chacha::ChaCha20Rng::seed_from_u64(master.random());
    let mut batch_rng = rand_chacha::ChaCha20Rng::seed_from_u64(master.random());
    let mut day_rng = rand_chacha::ChaCha20Rng::seed_from_u64(master.random());

    let n_bs = env.setup.topology.num_bs();
    let n_over = env.setup.topology.num_overlapped();
    let mut agent = algorithm.is_learning().then(|| {
        Agent::new(
            env.state_dim(),
            env.action_dim(),
            env.split_flat_dim(),
            cfg.clone(),
            algorithm.twin_critics(),
            &mut init_rng,
        )
    });
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut episodes = Vec::with_capacity(cfg.episodes);
    let mut windows_seen = 0usize;
    // Exploration actions persist for a few windows so their labels reflect
    // static cost rather than constant reconfiguration churn.
    let mut held: Option<EnvAction> = None;

    for e in 0..cfg.episodes {
        let decay_end = (0.6 * cfg.episodes as f64).ceil();
        let explore_prob =
            cfg.random_window_prob * (1.0 - e as f64 / decay_end).max(0.0);
        let start = start_pool[day_rng.random_range(0..start_pool.len())];
        let mut state = env.reset(start)?;
        let mut sum_reward = 0.0;
        let mut sum_cost = 0.0;
        let mut violations = 0usize;
        let mut feasible_windows = 0usize;
        let steps = env.setup.episode_len;
        for _ in 0..steps {
            let action = match &agent {
                Some(a) if windows_seen >= cfg.warmup_windows
                    && noise_rng.random::<f64>() >= explore_prob =>
                {
                    held = None;
                    EnvAction {
                        fractions: a.act(&state, cfg.sigma, &mut noise_rng),
                        split_override: None,
                    }
                }
                Some(a) => {
                    // Warmup or an exploration window: random allocations,
                    // held for a geometric number of windows. Some redraws
                    // randomize the split as well; without independent split
                    // variation the critic cannot separate the allocation's
                    // effect from the inner layer's response to it.
                    if held.is_none() || noise_rng.random::<f64>() < 0.35 {
                        let split_override = (noise_rng.random::<f64>() < 0.3)
                            .then(|| random_splits(n_over, &mut noise_rng));
                        let base = a.actor.forward(&state);
                        held = Some(EnvAction {
                            fractions: exploration_fractions(
                                n_bs,
                                Some(&base),
                                &mut noise_rng,
                            ),
                            split_override,
                        });
                    }
                    held.clone().unwrap()
                }
                None => random_policy(n_bs, n_over, &mut noise_rng),
            };
            windows_seen += 1;
            let out = env.step(&action)?;
            if let Some(a) = agent.as_mut() {
                buffer.push(Transition {
                    state: std::mem::take(&mut state),
                    fractions: action.fractions,
                    split: out.info.split_flat(),
                    reward: out.reward,
                    next_state: out.next_state.clone(),
                });
                if buffer.len() >= cfg.minibatch {
                    for _ in 1..cfg.critic_updates {
                        a.update(&buffer, false, None, &mut batch_rng);
                    }
                    a.update(
                        &buffer,
                        windows_seen > cfg.warmup_windows,
                        Some(&*env),
                        &mut batch_rng,
                    );
                }
            }
            sum_reward += out.reward;
            sum_cost += out.info.total_cost;
            if out.info.violated {
                violations += 1;
            }
            if out.info.feasible.iter().all(|&f| f) {
                feasible_windows += 1;
            }
            state = out.next_state;
        }
        if let Some(a) = &agent {
            if !a.all_finite() {
                return Err(Error::NumericalDivergence {
                    network: "actor/critic".into(),
                    episode: e,
                });
            }
        }
        episodes.push(EpisodeStats {
            episode: e,
            mean_reward: sum_reward / steps as f64,
            mean_cost: sum_cost / steps as f64,
            violation_rate: violations as f64 / steps as f64,
            feasible_rate: feasible_windows as f64 / steps as f64,
        });
    }
    Ok(TrainResult {
        agent,
        episodes,
    })
}
